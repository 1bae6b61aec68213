//! Posterior inference for the hierarchical Multinomial-Dirichlet model.
//!
//! Every column `θ_{X|y}` of a CPT is drawn from `Dirichlet(s α)` with a
//! shared, unknown mean `α ~ Dirichlet(α0)`. Integrating the columns out
//! leaves a marginal posterior for `α` that is the prior times a product of
//! rising factorials,
//!
//! ```text
//! p(α | D) ∝ Π_x Π_{y: n_xy > 0} (s α_x)(s α_x + 1)...(s α_x + n_xy - 1) · Π_x α_x^{α0_x - 1}
//! ```
//!
//! so drawing `α` from the `Dirichlet(α0)` prior and weighting each draw by
//! the rising-factorial term is exact self-normalised importance sampling of
//! the posterior moments. [`alpha_moment_quadrature`] computes the same
//! moments by deterministic integration for `r ≤ 3`.
//!
//! Given `α̂ = E[α | D]` and `Cov(α | D)`, the CPT estimate and its full
//! posterior covariance follow in closed form ([`hierarchical_estimate`]).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count_model::CountTable;
use crate::error::{Error, Result};
use crate::estimators::{CptEstimate, Hyper, Method};
use crate::quadrature::{integrate, integrate_triangle, QuadOptions};
use crate::sampling::{derive_seed, dirichlet_into, stream_rng};
use crate::special::log_rising;

/// Importance samples are generated in fixed-size chunks, each from its own
/// RNG stream, so results do not depend on the number of worker threads.
pub const CHUNK: usize = 2048;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierConfig {
    pub s: f64,
    pub alpha0: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    /// Minimum acceptable ESS as a fraction of `n_samples`.
    pub ess_floor: f64,
}

impl HierConfig {
    pub fn new(s: f64, alpha0: Vec<f64>) -> Self {
        HierConfig {
            s,
            alpha0,
            n_samples: DEFAULT_SAMPLES,
            seed: 0,
            ess_floor: 0.01,
        }
    }

    /// `s = r`, `α0 = 1`.
    pub fn for_child(r: usize) -> Self {
        Self::new(r as f64, vec![1.0; r])
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, r: usize) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::invalid("s must be positive"));
        }
        if self.alpha0.len() != r {
            return Err(Error::invalid(format!(
                "alpha0 has {} entries, child has {r} states",
                self.alpha0.len()
            )));
        }
        if self.alpha0.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("alpha0 entries must be positive"));
        }
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::invalid(format!("n_samples must be at least {MIN_SAMPLES}")));
        }
        if !(0.0..=1.0).contains(&self.ess_floor) {
            return Err(Error::invalid("ess_floor must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Posterior summary of the shared Dirichlet mean `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPosterior {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    /// Monte-Carlo standard error of each coordinate of `mean`.
    pub mc_se: Vec<f64>,
    pub ess: f64,
    /// Log of the mean importance weight, i.e. the log marginal likelihood
    /// of the counts relative to the prior, up to a constant.
    pub log_norm: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Rising-factorial data term, grouped by repeated count values.
struct DataTerm {
    hist: Vec<Vec<(u64, u64)>>,
    s: f64,
}

impl DataTerm {
    fn new(ct: &CountTable, s: f64) -> Self {
        DataTerm {
            hist: ct.count_histogram(),
            s,
        }
    }

    fn log_value(&self, alpha: &[f64]) -> f64 {
        let mut total = 0.0;
        for (h, &a) in self.hist.iter().zip(alpha) {
            if h.is_empty() {
                continue;
            }
            let sa = self.s * a;
            if sa <= 0.0 {
                return f64::NEG_INFINITY;
            }
            for &(count, mult) in h {
                total += mult as f64 * log_rising(sa, count);
            }
        }
        total
    }
}

fn log_prior_term(alpha: &[f64], alpha0: &[f64]) -> f64 {
    alpha
        .iter()
        .zip(alpha0)
        .filter(|(_, &a0)| a0 != 1.0)
        .map(|(&a, &a0)| (a0 - 1.0) * a.ln())
        .sum()
}

/// Log of the unnormalised marginal posterior of `α`:
/// `Σ_x Σ_{y: n_xy>0} [ln Γ(s α_x + n_xy) − ln Γ(s α_x)] + Σ_x (α0_x − 1) ln α_x`.
pub fn log_posterior_kernel(alpha: &[f64], ct: &CountTable, cfg: &HierConfig) -> Result<f64> {
    if alpha.len() != ct.r() || cfg.alpha0.len() != ct.r() {
        return Err(Error::invalid("alpha length does not match the child cardinality"));
    }
    if alpha.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::BoundaryAlpha);
    }
    if (alpha.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("alpha must sum to one"));
    }
    Ok(DataTerm::new(ct, cfg.s).log_value(alpha) + log_prior_term(alpha, &cfg.alpha0))
}

/// Draws from the `Dirichlet(α0)` proposal with their log importance weights.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    r: usize,
    alphas: Vec<f64>,
    log_w: Vec<f64>,
}

impl WeightedSample {
    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    pub fn alpha(&self, i: usize) -> &[f64] {
        &self.alphas[i * self.r..(i + 1) * self.r]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    /// Weights scaled to sum to one.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let max = self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_w.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = w.iter().sum();
        w.into_iter().map(|v| v / sum).collect()
    }

    pub fn ess(&self) -> f64 {
        let w = self.normalized_weights();
        1.0 / w.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Draw `n` proposal points and weight them by the rising-factorial term.
pub fn weighted_sample(ct: &CountTable, cfg: &HierConfig, n: usize) -> Result<WeightedSample> {
    let r = ct.r();
    cfg.validate(r)?;
    let term = DataTerm::new(ct, cfg.s);
    let n_chunks = n.div_ceil(CHUNK);
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            let mut rng = stream_rng(cfg.seed, c as u64);
            let mut alphas = vec![0.0; len * r];
            let mut log_w = Vec::with_capacity(len);
            for a in alphas.chunks_exact_mut(r) {
                dirichlet_into(&mut rng, &cfg.alpha0, a);
                log_w.push(term.log_value(a));
            }
            (alphas, log_w)
        })
        .collect();
    let mut alphas = Vec::with_capacity(n * r);
    let mut log_w = Vec::with_capacity(n);
    for (a, w) in chunks {
        alphas.extend(a);
        log_w.extend(w);
    }
    if log_w.iter().any(|w| w.is_nan() || *w == f64::INFINITY)
        || log_w.iter().all(|w| *w == f64::NEG_INFINITY)
    {
        return Err(Error::NonFiniteWeight);
    }
    Ok(WeightedSample { r, alphas, log_w })
}

/// Weighted first and second moments of a sample.
pub fn summarize(sample: &WeightedSample, seed: u64) -> AlphaPosterior {
    let r = sample.r;
    let n = sample.len();
    let max = sample.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = sample.log_w.iter().map(|l| (l - max).exp()).collect();
    let sum_w: f64 = w.iter().sum();
    let sum_w2: f64 = w.iter().map(|v| v * v).sum();

    let mut mean = vec![0.0; r];
    for (i, &wi) in w.iter().enumerate() {
        for (m, &a) in mean.iter_mut().zip(sample.alpha(i)) {
            *m += wi * a;
        }
    }
    for m in &mut mean {
        *m /= sum_w;
    }

    let mut cov = DMatrix::zeros(r, r);
    let mut se2 = vec![0.0; r];
    let mut d = vec![0.0; r];
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for ((dx, &a), &m) in d.iter_mut().zip(sample.alpha(i)).zip(&mean) {
            *dx = a - m;
        }
        for x in 0..r {
            se2[x] += wi * wi * d[x] * d[x];
            for x2 in x..r {
                cov[(x, x2)] += wi * d[x] * d[x2];
            }
        }
    }
    for x in 0..r {
        for x2 in x..r {
            let v = cov[(x, x2)] / sum_w;
            cov[(x, x2)] = v;
            cov[(x2, x)] = v;
        }
    }
    AlphaPosterior {
        mean,
        cov,
        mc_se: se2.iter().map(|v| v.sqrt() / sum_w).collect(),
        ess: sum_w * sum_w / sum_w2,
        log_norm: max + (sum_w / n as f64).ln(),
        n_samples: n,
        seed,
    }
}

/// Posterior mean and covariance of `α` by self-normalised importance
/// sampling from the prior. If the ESS falls below `ess_floor · n_samples`
/// the run is repeated once with ten times the samples before giving up.
pub fn alpha_posterior(ct: &CountTable, cfg: &HierConfig) -> Result<AlphaPosterior> {
    let mut n = cfg.n_samples;
    for attempt in 0..2 {
        let sample = weighted_sample(ct, cfg, n)?;
        let post = summarize(&sample, cfg.seed);
        let floor = cfg.ess_floor * n as f64;
        if post.ess >= floor {
            return Ok(post);
        }
        if attempt == 1 {
            return Err(Error::LowEss {
                ess: post.ess,
                floor,
                n_samples: n,
            });
        }
        n *= 10;
    }
    unreachable!()
}

/// `E[Π α_x^{k_x} | D]` by adaptive quadrature over the simplex (`r ≤ 3`).
pub fn alpha_moment_quadrature(ct: &CountTable, cfg: &HierConfig, k: &[u32]) -> Result<f64> {
    let r = ct.r();
    if r > 3 {
        return Err(Error::invalid("quadrature oracle supports at most three states"));
    }
    if k.len() != r || cfg.alpha0.len() != r {
        return Err(Error::invalid("moment order length does not match the child cardinality"));
    }
    if !(cfg.s > 0.0) || cfg.alpha0.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::invalid("s and alpha0 must be positive"));
    }
    if r == 1 || k.iter().all(|&v| v == 0) {
        return Ok(1.0);
    }
    let term = DataTerm::new(ct, cfg.s);
    let log_kernel = |alpha: &[f64]| term.log_value(alpha) + log_prior_term(alpha, &cfg.alpha0);
    let opts = QuadOptions::default();

    if r == 2 {
        let shift = (1..400)
            .map(|i| {
                let a = i as f64 / 400.0;
                log_kernel(&[a, 1.0 - a])
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let integral = |kk: [u32; 2]| {
            integrate(
                |a| {
                    let alpha = [a, 1.0 - a];
                    Ok((log_kernel(&alpha) - shift).exp() * a.powi(kk[0] as i32) * (1.0 - a).powi(kk[1] as i32))
                },
                0.0,
                1.0,
                opts,
            )
        };
        let z0 = integral([0, 0])?;
        let zk = integral([k[0], k[1]])?;
        return Ok(zk / z0);
    }

    let grid = 80;
    let mut shift = f64::NEG_INFINITY;
    for i in 1..grid {
        for j in 1..grid - i {
            let a = i as f64 / grid as f64;
            let b = j as f64 / grid as f64;
            shift = shift.max(log_kernel(&[a, b, 1.0 - a - b]));
        }
    }
    let integral = |kk: [u32; 3]| {
        integrate_triangle(
            |a, b| {
                let c = 1.0 - a - b;
                let alpha = [a, b, c];
                Ok((log_kernel(&alpha) - shift).exp()
                    * a.powi(kk[0] as i32)
                    * b.powi(kk[1] as i32)
                    * c.powi(kk[2] as i32))
            },
            opts,
        )
    };
    let z0 = integral([0, 0, 0])?;
    let zk = integral([k[0], k[1], k[2]])?;
    Ok(zk / z0)
}

/// Posterior mean and covariance of `α` from quadrature moments (`r ≤ 3`).
pub fn alpha_posterior_quadrature(ct: &CountTable, cfg: &HierConfig) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let r = ct.r();
    let unit = |x: usize| -> Vec<u32> { (0..r).map(|i| u32::from(i == x)).collect() };
    let mean = (0..r)
        .map(|x| alpha_moment_quadrature(ct, cfg, &unit(x)))
        .collect::<Result<Vec<f64>>>()?;
    let mut cov = DMatrix::zeros(r, r);
    for x in 0..r {
        for x2 in x..r {
            let k: Vec<u32> = unit(x).iter().zip(unit(x2)).map(|(a, b)| a + b).collect();
            let v = alpha_moment_quadrature(ct, cfg, &k)? - mean[x] * mean[x2];
            cov[(x, x2)] = v;
            cov[(x2, x)] = v;
        }
    }
    Ok((mean, cov))
}

/// Hierarchical CPT estimate with the posterior of `α` it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct HierCptEstimate {
    pub theta: DMatrix<f64>,
    pub alpha_post: AlphaPosterior,
    pub s: f64,
    /// `Cov(θ_{x|y}, θ_{x'|y'})` at row/column `y·r + x`.
    pub theta_cov: Option<DMatrix<f64>>,
}

impl HierCptEstimate {
    pub fn to_cpt(&self) -> CptEstimate {
        CptEstimate {
            theta: self.theta.clone(),
            method: Method::Hier,
            hyper: Some(Hyper {
                s: self.s,
                alpha: self.alpha_post.mean.clone(),
            }),
            undefined: vec![false; self.theta.ncols()],
        }
    }

    /// JSON document with the estimate and sampler diagnostics.
    pub fn to_json(&self) -> serde_json::Value {
        let theta: Vec<Vec<f64>> = (0..self.theta.ncols())
            .map(|y| self.theta.column(y).iter().copied().collect())
            .collect();
        serde_json::json!({
            "method": "HIER",
            "s": self.s,
            "theta_columns": theta,
            "alpha_mean": self.alpha_post.mean,
            "alpha_cov": (0..self.alpha_post.cov.nrows())
                .map(|i| self.alpha_post.cov.row(i).iter().copied().collect::<Vec<f64>>())
                .collect::<Vec<_>>(),
            "alpha_mc_se": self.alpha_post.mc_se,
            "ess": self.alpha_post.ess,
            "log_norm": self.alpha_post.log_norm,
            "n_samples": self.alpha_post.n_samples,
            "seed": self.alpha_post.seed,
        })
    }
}

/// `(n_xy + s α̂_x) / (n_y + s)` for every cell.
pub fn theta_from_alpha(ct: &CountTable, s: f64, alpha: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(ct.r(), ct.q(), |x, y| {
        (ct.count(x, y) as f64 + s * alpha[x]) / (ct.col_total(y) as f64 + s)
    })
}

/// Posterior covariance of all CPT entries given `θ̂` and `Cov(α | D)`:
///
/// ```text
/// Cov(θ_{x|y}, θ_{x'|y'}) = δ_{yy'} (θ̂_{x|y} δ_{xx'} − θ̂_{x|y} θ̂_{x'|y}) / (n_y + s + 1)
///                         + s² Cov(α_x, α_x') / C_{yy'}
/// C_{yy'} = (n_y + s)(n_y' + s)      for y ≠ y'
///         = (n_y + s)(n_y + s + 1)   for y = y'
/// ```
pub fn theta_covariance(ct: &CountTable, s: f64, theta: &DMatrix<f64>, alpha_cov: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, q) = (ct.r(), ct.q());
    let mut cov = DMatrix::zeros(r * q, r * q);
    for y in 0..q {
        let ny = ct.col_total(y) as f64 + s;
        for y2 in 0..q {
            let ny2 = ct.col_total(y2) as f64 + s;
            let c = if y == y2 { ny * (ny + 1.0) } else { ny * ny2 };
            for x in 0..r {
                for x2 in 0..r {
                    let mut v = s * s * alpha_cov[(x, x2)] / c;
                    if y == y2 {
                        let delta = if x == x2 { theta[(x, y)] } else { 0.0 };
                        v += (delta - theta[(x, y)] * theta[(x2, y)]) / (ny + 1.0);
                    }
                    cov[(y * r + x, y2 * r + x2)] = v;
                }
            }
        }
    }
    cov
}

/// Hierarchical estimate of a CPT: posterior mean of every column and,
/// optionally, the full posterior covariance.
pub fn hierarchical_estimate(ct: &CountTable, cfg: &HierConfig, want_cov: bool) -> Result<HierCptEstimate> {
    let alpha_post = alpha_posterior(ct, cfg)?;
    Ok(hierarchical_from_posterior(ct, cfg.s, alpha_post, want_cov))
}

pub fn hierarchical_from_posterior(ct: &CountTable, s: f64, alpha_post: AlphaPosterior, want_cov: bool) -> HierCptEstimate {
    let theta = theta_from_alpha(ct, s, &alpha_post.mean);
    let theta_cov = want_cov.then(|| theta_covariance(ct, s, &theta, &alpha_post.cov));
    HierCptEstimate {
        theta,
        alpha_post,
        s,
        theta_cov,
    }
}

/// Monte-Carlo covariance of the CPT entries with standard errors.
#[derive(Debug, Clone)]
pub struct ThetaCovOracle {
    pub cov: DMatrix<f64>,
    pub se: DMatrix<f64>,
    pub ess: f64,
    pub n_draws: usize,
}

/// Sampling-importance-resampling estimate of `Cov(θ | D)`: resample `α`
/// from an importance-weighted pool, then draw every column from
/// `Dirichlet(s α + n_y)` given the resampled `α`.
pub fn theta_cov_mc_oracle(ct: &CountTable, cfg: &HierConfig, n_draws: usize) -> Result<ThetaCovOracle> {
    if n_draws < 10_000 {
        return Err(Error::invalid("the covariance oracle needs at least 10^4 draws"));
    }
    let (r, q) = (ct.r(), ct.q());
    let pool_cfg = HierConfig {
        seed: derive_seed(cfg.seed, &[0x51_52]),
        ..cfg.clone()
    };
    let pool = weighted_sample(ct, &pool_cfg, cfg.n_samples.max(10 * n_draws))?;
    let ess = pool.ess();
    if ess < cfg.ess_floor * pool.len() as f64 {
        return Err(Error::LowEss {
            ess,
            floor: cfg.ess_floor * pool.len() as f64,
            n_samples: pool.len(),
        });
    }
    let weights = pool.normalized_weights();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }

    let dim = r * q;
    let n_chunks = n_draws.div_ceil(CHUNK);
    let draws: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n_draws - c * CHUNK);
            let mut rng = stream_rng(derive_seed(cfg.seed, &[0x51_52, 1]), c as u64);
            let mut out = vec![0.0; len * dim];
            let mut conc = vec![0.0; r];
            for v in out.chunks_exact_mut(dim) {
                let u: f64 = rand::Rng::random::<f64>(&mut rng) * acc;
                let idx = cumulative.partition_point(|&c| c <= u).min(weights.len() - 1);
                let alpha = pool.alpha(idx);
                for y in 0..q {
                    for x in 0..r {
                        conc[x] = cfg.s * alpha[x] + ct.count(x, y) as f64;
                    }
                    dirichlet_into(&mut rng, &conc, &mut v[y * r..(y + 1) * r]);
                }
            }
            out
        })
        .collect();
    let flat: Vec<f64> = draws.into_iter().flatten().collect();

    let n = n_draws as f64;
    let mut mean = vec![0.0; dim];
    for v in flat.chunks_exact(dim) {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / n;
        }
    }
    let mut sum = DMatrix::<f64>::zeros(dim, dim);
    let mut sum_sq = DMatrix::<f64>::zeros(dim, dim);
    let mut d = vec![0.0; dim];
    for v in flat.chunks_exact(dim) {
        for ((dx, x), m) in d.iter_mut().zip(v).zip(&mean) {
            *dx = x - m;
        }
        for i in 0..dim {
            for j in i..dim {
                let p = d[i] * d[j];
                sum[(i, j)] += p;
                sum_sq[(i, j)] += p * p;
            }
        }
    }
    let mut cov = DMatrix::zeros(dim, dim);
    let mut se = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let m = sum[(i, j)] / n;
            let var = (sum_sq[(i, j)] / n - m * m).max(0.0);
            let c = sum[(i, j)] / (n - 1.0);
            let e = (var / n).sqrt();
            cov[(i, j)] = c;
            cov[(j, i)] = c;
            se[(i, j)] = e;
            se[(j, i)] = e;
        }
    }
    Ok(ThetaCovOracle {
        cov,
        se,
        ess,
        n_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::lgamma;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg2() -> HierConfig {
        HierConfig::new(2.0, vec![1.0, 1.0])
    }

    #[test]
    fn kernel_examples() {
        let empty = CountTable::zeros(3, 2);
        let cfg = HierConfig::for_child(3);
        assert_eq!(log_posterior_kernel(&[0.2, 0.3, 0.5], &empty, &cfg).unwrap(), 0.0);

        let one = CountTable::from_columns(&[vec![1, 0]]).unwrap();
        let cfg = cfg2();
        let a = 0.37;
        assert_abs_diff_eq!(log_posterior_kernel(&[a, 1.0 - a], &one, &cfg).unwrap(), (2.0 * a).ln(), epsilon = 1e-15);

        let two = CountTable::from_columns(&[vec![2, 0]]).unwrap();
        let got = log_posterior_kernel(&[a, 1.0 - a], &two, &cfg).unwrap();
        let sa = 2.0 * a;
        assert_abs_diff_eq!(got, sa.ln() + (sa + 1.0).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(got, lgamma(sa + 2.0) - lgamma(sa), epsilon = 1e-12);
    }

    #[test]
    fn kernel_rejects_boundary() {
        let ct = CountTable::zeros(2, 1);
        assert!(matches!(log_posterior_kernel(&[1.0, 0.0], &ct, &cfg2()), Err(Error::BoundaryAlpha)));
    }

    #[test]
    fn kernel_uses_prior_exponent() {
        let ct = CountTable::zeros(2, 1);
        let cfg = HierConfig::new(2.0, vec![3.0, 1.0]);
        assert_abs_diff_eq!(log_posterior_kernel(&[0.25, 0.75], &ct, &cfg).unwrap(), 2.0 * 0.25f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn quadrature_closed_form() {
        let ct = CountTable::from_columns(&[vec![1, 0]]).unwrap();
        let cfg = cfg2();
        assert_eq!(alpha_moment_quadrature(&ct, &cfg, &[0, 0]).unwrap(), 1.0);
        assert_abs_diff_eq!(alpha_moment_quadrature(&ct, &cfg, &[1, 0]).unwrap(), 2.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(alpha_moment_quadrature(&ct, &cfg, &[2, 0]).unwrap(), 0.5, epsilon = 1e-9);
        assert!(alpha_moment_quadrature(&CountTable::zeros(4, 1), &HierConfig::for_child(4), &[1, 0, 0, 0]).is_err());
    }

    #[test]
    fn quadrature_three_states_prior_moments() {
        // zero counts: posterior = Dirichlet(1, 2, 3)
        let ct = CountTable::zeros(3, 2);
        let cfg = HierConfig::new(3.0, vec![1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(alpha_moment_quadrature(&ct, &cfg, &[0, 0, 1]).unwrap(), 0.5, epsilon = 1e-9);
        // E[a b] = 1·2 / (6·7)
        assert_abs_diff_eq!(alpha_moment_quadrature(&ct, &cfg, &[1, 1, 0]).unwrap(), 2.0 / 42.0, epsilon = 1e-9);
    }

    #[test]
    fn sampler_matches_closed_form() {
        let ct = CountTable::from_columns(&[vec![1, 0]]).unwrap();
        let post = alpha_posterior(&ct, &cfg2().with_seed(5)).unwrap();
        assert!((post.mean[0] - 2.0 / 3.0).abs() < 3.0 * post.mc_se[0]);
        assert!((post.mean.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_counts_recover_prior() {
        let ct = CountTable::zeros(3, 4);
        let cfg = HierConfig::new(3.0, vec![1.0, 2.0, 3.0]).with_seed(9);
        let post = alpha_posterior(&ct, &cfg).unwrap();
        assert_eq!(post.ess, post.n_samples as f64);
        let a0 = 6.0;
        for x in 0..3 {
            let p = cfg.alpha0[x] / a0;
            assert!((post.mean[x] - p).abs() < 4.0 * post.mc_se[x]);
            for x2 in 0..3 {
                let d = if x == x2 { p } else { 0.0 };
                let exact = (d - p * cfg.alpha0[x2] / a0) / (a0 + 1.0);
                assert!((post.cov[(x, x2)] - exact).abs() < 2e-3, "{x},{x2}");
            }
        }
    }

    #[test]
    fn symmetric_columns_give_uniform_mean() {
        let ct = CountTable::from_columns(&[vec![1, 0], vec![0, 1]]).unwrap();
        let post = alpha_posterior(&ct, &cfg2().with_seed(1)).unwrap();
        assert!((post.mean[0] - 0.5).abs() < 3.0 * post.mc_se[0]);
    }

    #[test]
    fn determinism_and_thread_independence() {
        let ct = CountTable::from_columns(&[vec![4, 1, 0], vec![0, 2, 7]]).unwrap();
        let cfg = HierConfig::for_child(3).with_seed(42).with_samples(20_000);
        let a = alpha_posterior(&ct, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| alpha_posterior(&ct, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn linearity_of_the_mixture() {
        let ct = CountTable::from_columns(&[vec![3, 0, 1], vec![0, 0, 0], vec![1, 5, 2]]).unwrap();
        let cfg = HierConfig::for_child(3).with_seed(3).with_samples(10_000);
        let sample = weighted_sample(&ct, &cfg, cfg.n_samples).unwrap();
        let post = summarize(&sample, cfg.seed);
        let est = hierarchical_from_posterior(&ct, cfg.s, post, false);
        let w = sample.normalized_weights();
        for y in 0..ct.q() {
            for x in 0..ct.r() {
                let n_y = ct.col_total(y) as f64;
                let mix: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(i, wi)| wi * (ct.count(x, y) as f64 + cfg.s * sample.alpha(i)[x]) / (n_y + cfg.s))
                    .sum();
                assert_abs_diff_eq!(est.theta[(x, y)], mix, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn estimate_examples() {
        let ct = CountTable::from_columns(&[vec![1, 0], vec![0, 0]]).unwrap();
        let est = hierarchical_estimate(&ct, &cfg2().with_seed(2), true).unwrap();
        let a = &est.alpha_post.mean;
        assert_eq!(est.theta[(0, 0)], (1.0 + 2.0 * a[0]) / 3.0);
        assert_eq!(est.theta.column(1).iter().copied().collect::<Vec<_>>(), *a);
        assert!((est.theta[(0, 0)] - 7.0 / 9.0).abs() < 3.0 * 2.0 / 3.0 * est.alpha_post.mc_se[0]);

        let big = CountTable::from_columns(&[vec![1000, 1000]]).unwrap();
        let est = hierarchical_estimate(&big, &cfg2(), false).unwrap();
        assert!(est.theta.iter().all(|&t| t > 0.49 && t < 0.51));
    }

    #[test]
    fn low_ess_is_reported() {
        // a very sharp posterior under a diffuse prior
        let ct = CountTable::from_columns(&vec![vec![400, 100]; 40]).unwrap();
        let mut cfg = HierConfig::new(200.0, vec![1.0, 1.0]).with_samples(1000);
        cfg.ess_floor = 0.5;
        assert!(matches!(alpha_posterior(&ct, &cfg), Err(Error::LowEss { n_samples: 10_000, .. })));
    }

    #[test]
    fn config_validation() {
        let ct = CountTable::zeros(2, 1);
        assert!(alpha_posterior(&ct, &cfg2().with_samples(10)).is_err());
        assert!(alpha_posterior(&ct, &HierConfig::new(-1.0, vec![1.0, 1.0])).is_err());
        assert!(alpha_posterior(&ct, &HierConfig::new(1.0, vec![1.0])).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn posterior_invariants(cols in proptest::collection::vec(proptest::collection::vec(0u64..12, 3), 1..5), seed in any::<u64>()) {
            let ct = CountTable::from_columns(&cols).unwrap();
            let cfg = HierConfig::for_child(3).with_seed(seed).with_samples(4000);
            let est = hierarchical_estimate(&ct, &cfg, true).unwrap();
            let post = &est.alpha_post;
            prop_assert!((post.mean.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(post.mean.iter().all(|&m| m > 0.0 && m < 1.0));
            for x in 0..3 {
                let row_sum: f64 = post.cov.row(x).sum();
                prop_assert!(row_sum.abs() < 1e-10);
                for x2 in 0..3 {
                    prop_assert_eq!(post.cov[(x, x2)], post.cov[(x2, x)]);
                }
            }
            let eig = post.cov.clone().symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&e| e > -1e-10));
            for y in 0..ct.q() {
                prop_assert!((est.theta.column(y).sum() - 1.0).abs() < 1e-10);
            }
            let cov = est.theta_cov.as_ref().unwrap();
            let r = 3;
            for i in 0..cov.nrows() {
                for y2 in 0..ct.q() {
                    let s: f64 = (0..r).map(|x2| cov[(i, y2 * r + x2)]).sum();
                    prop_assert!(s.abs() < 1e-8);
                }
                for j in 0..cov.ncols() {
                    prop_assert!((cov[(i, j)] - cov[(j, i)]).abs() < 1e-15);
                }
            }
        }
    }
}
