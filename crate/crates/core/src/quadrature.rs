//! Globally adaptive Gauss-Kronrod (7/15) quadrature on intervals, and a
//! nested variant over the 2-simplex.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-9,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok(Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Integrate `f` over `(a, b)`. The integrand is never evaluated at the
/// endpoints.
pub fn integrate<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let first = gk15(&mut f, a, b)?;
    let mut total_error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    while total_error > opts.abs_tol {
        if heap.len() >= opts.max_intervals {
            return Err(Error::QuadratureNonConvergence { error: total_error });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            return Err(Error::QuadratureNonConvergence { error: total_error });
        }
        let left = gk15(&mut f, worst.a, mid)?;
        let right = gk15(&mut f, mid, worst.b)?;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // resum periodically to shed accumulated rounding in the running total
        if heap.len() % 64 == 0 {
            total_error = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Integrate `f(a, b)` over the triangle `a, b > 0, a + b < 1` by nesting the
/// 1-D rule: the inner integral runs over `b ∈ (0, 1 - a)`.
pub fn integrate_triangle<F: FnMut(f64, f64) -> Result<f64>>(mut f: F, opts: QuadOptions) -> Result<f64> {
    let inner_opts = QuadOptions {
        abs_tol: opts.abs_tol * 1e-2,
        max_intervals: opts.max_intervals,
    };
    integrate(
        |a| integrate(|b| f(a, b), 0.0, 1.0 - a, inner_opts),
        0.0,
        1.0,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| Ok(x.powi(5) - 2.0 * x), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 6.0 - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn peaked_integrand_subdivides() {
        let v = integrate(|x| Ok((-(x - 0.3f64).powi(2) / 2e-4).exp()), 0.0, 1.0, QuadOptions::default()).unwrap();
        let exact = (2.0 * std::f64::consts::PI * 1e-4).sqrt();
        assert_abs_diff_eq!(v, exact, epsilon = 1e-9);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫ x^{-1/2} = 2
        let v = integrate(|x| Ok(x.powf(-0.5)), 0.0, 1.0, QuadOptions { abs_tol: 1e-8, max_intervals: 5000 }).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn triangle_area_and_moment() {
        let opts = QuadOptions::default();
        assert_abs_diff_eq!(integrate_triangle(|_, _| Ok(1.0), opts).unwrap(), 0.5, epsilon = 1e-14);
        // Dirichlet(1,1,1) normaliser: ∫ a b (1-a-b) = 1/120
        let v = integrate_triangle(|a, b| Ok(a * b * (1.0 - a - b)), opts).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 120.0, epsilon = 1e-14);
    }

    #[test]
    fn non_convergence_is_reported() {
        let r = integrate(|x| Ok(1.0 / x), 0.0, 1.0, QuadOptions { abs_tol: 1e-12, max_intervals: 20 });
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}
