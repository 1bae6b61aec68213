//! Seeded random-number plumbing shared by the samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// SplitMix64 finaliser; used to derive independent seeds from a base seed
/// and a path of indices.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and an index path. Stable across
/// platforms and releases.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// A ChaCha8 generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw `ln G` with `G ~ Gamma(shape, 1)`.
///
/// Small shapes use `G = G' U^{1/shape}`, `G' ~ Gamma(shape + 1)`, evaluated in
/// log space so the draw never underflows to zero.
pub fn log_gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = rng.random::<f64>();
        // `random` is in [0, 1); map to (0, 1].
        g.ln() + (1.0 - u).ln() / shape
    }
}

/// Fill `out` with a Dirichlet(`conc`) draw. Entries are strictly positive
/// and sum to one up to rounding.
pub fn dirichlet_into<R: Rng + ?Sized>(rng: &mut R, conc: &[f64], out: &mut [f64]) {
    debug_assert_eq!(conc.len(), out.len());
    if conc.len() == 1 {
        out[0] = 1.0;
        return;
    }
    let mut max = f64::NEG_INFINITY;
    for (o, &c) in out.iter_mut().zip(conc) {
        *o = log_gamma_draw(rng, c);
        max = max.max(*o);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, conc: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; conc.len()];
    dirichlet_into(rng, conc, &mut out);
    out
}

/// Draw an index from unnormalised non-negative weights by inversion.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding: fall back to the last index with positive mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_and_repeat() {
        let a = derive_seed(7, &[1, 2]);
        assert_eq!(a, derive_seed(7, &[1, 2]));
        assert_ne!(a, derive_seed(7, &[2, 1]));
        assert_ne!(a, derive_seed(8, &[1, 2]));
    }

    #[test]
    fn dirichlet_moments() {
        let mut rng = stream_rng(3, 0);
        let conc = [0.2, 1.0, 3.8];
        let total: f64 = conc.iter().sum();
        let n = 100_000;
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let d = dirichlet(&mut rng, &conc);
            assert!(d.iter().all(|&v| v > 0.0));
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (m, v) in mean.iter_mut().zip(&d) {
                *m += v / n as f64;
            }
        }
        for (m, c) in mean.iter().zip(&conc) {
            let p = c / total;
            let se = (p * (1.0 - p) / (total + 1.0) / n as f64).sqrt();
            assert!((m - p).abs() < 4.0 * se, "{m} vs {p}");
        }
    }

    #[test]
    fn tiny_shapes_stay_normalised() {
        let mut rng = stream_rng(1, 1);
        for _ in 0..1000 {
            let d = dirichlet(&mut rng, &[1e-4, 1e-4, 1e-4]);
            assert!(d.iter().all(|v| *v >= 0.0 && v.is_finite()));
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let d = dirichlet(&mut rng, &[0.05, 0.05]);
        assert!(d.iter().all(|v| *v > 0.0));
    }
}
