//! Column-wise CPT estimators: maximum likelihood, fixed-prior Dirichlet
//! (BDeu presets) and the ideal shrinkage estimator that knows the
//! generating mean.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::count_model::CountTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ML")]
    Ml,
    #[serde(rename = "BAYES")]
    Bayes,
    #[serde(rename = "IDEAL")]
    Ideal,
    #[serde(rename = "HIER")]
    Hier,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ml => "ML",
            Method::Bayes => "BAYES",
            Method::Ideal => "IDEAL",
            Method::Hier => "HIER",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub s: f64,
    pub alpha: Vec<f64>,
}

/// An `r × q` column-stochastic table with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CptEstimate {
    pub theta: DMatrix<f64>,
    pub method: Method,
    pub hyper: Option<Hyper>,
    /// ML only: columns with `n_y = 0`, filled uniform.
    pub undefined: Vec<bool>,
}

impl CptEstimate {
    pub fn r(&self) -> usize {
        self.theta.nrows()
    }

    pub fn q(&self) -> usize {
        self.theta.ncols()
    }

    pub fn has_undefined(&self) -> bool {
        self.undefined.iter().any(|&u| u)
    }

    /// CSV with a `# method=... s=... alpha=...` line, then one row per child
    /// state and one column per parent configuration.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# method={}", self.method);
        if let Some(h) = &self.hyper {
            let alpha: Vec<String> = h.alpha.iter().map(|a| format!("{a:.16e}")).collect();
            let _ = write!(out, " s={:.16e} alpha={}", h.s, alpha.join(";"));
        }
        out.push('\n');
        out.push_str("state");
        for y in 0..self.q() {
            let _ = write!(out, ",pa{y}");
        }
        out.push('\n');
        for x in 0..self.r() {
            let _ = write!(out, "{x}");
            for y in 0..self.q() {
                let _ = write!(out, ",{:.16e}", self.theta[(x, y)]);
            }
            out.push('\n');
        }
        out
    }
}

pub fn uniform_alpha(r: usize) -> Vec<f64> {
    vec![1.0 / r as f64; r]
}

pub(crate) fn check_prior(s: f64, alpha: &[f64], r: usize) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("equivalent sample size must be positive, got {s}")));
    }
    if alpha.len() != r {
        return Err(Error::invalid(format!(
            "alpha has {} entries, child has {r} states",
            alpha.len()
        )));
    }
    if alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::invalid("alpha entries must be positive"));
    }
    let sum: f64 = alpha.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("alpha must sum to one, sums to {sum}")));
    }
    Ok(())
}

/// `θ_{x|y} = n_xy / n_y`; empty columns are filled uniform and flagged.
pub fn ml_estimate(ct: &CountTable) -> CptEstimate {
    let (r, q) = (ct.r(), ct.q());
    let mut undefined = vec![false; q];
    let theta = DMatrix::from_fn(r, q, |x, y| {
        let n_y = ct.col_total(y);
        if n_y == 0 {
            undefined[y] = true;
            1.0 / r as f64
        } else {
            ct.count(x, y) as f64 / n_y as f64
        }
    });
    CptEstimate {
        theta,
        method: Method::Ml,
        hyper: None,
        undefined,
    }
}

fn shrink(ct: &CountTable, s: f64, alpha: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(ct.r(), ct.q(), |x, y| {
        (ct.count(x, y) as f64 + s * alpha[x]) / (ct.col_total(y) as f64 + s)
    })
}

/// Posterior mean under a fixed Dirichlet(`s·alpha`) prior:
/// `(n_xy + s α_x) / (n_y + s)`.
pub fn bayes_estimate(ct: &CountTable, s: f64, alpha: &[f64]) -> Result<CptEstimate> {
    check_prior(s, alpha, ct.r())?;
    Ok(CptEstimate {
        theta: shrink(ct, s, alpha),
        method: Method::Bayes,
        hyper: Some(Hyper {
            s,
            alpha: alpha.to_vec(),
        }),
        undefined: vec![false; ct.q()],
    })
}

/// Uniform-alpha Bayesian estimate with equivalent sample size `s` per column.
pub fn bdeu_estimate(ct: &CountTable, s: f64) -> Result<CptEstimate> {
    bayes_estimate(ct, s, &uniform_alpha(ct.r()))
}

/// The classic BDeu convention: `α_x = 1/r`, `s = 1/q`.
pub fn bdeu_classic_estimate(ct: &CountTable) -> Result<CptEstimate> {
    bayes_estimate(ct, 1.0 / ct.q() as f64, &uniform_alpha(ct.r()))
}

/// Shrinkage towards the true generating mean `alpha_true` with weight
/// `n_y / (n_y + s)`. Only usable in simulations.
pub fn ideal_estimate(ct: &CountTable, s: f64, alpha_true: &[f64]) -> Result<CptEstimate> {
    let mut est = bayes_estimate(ct, s, alpha_true)?;
    est.method = Method::Ideal;
    Ok(est)
}

/// Shrinkage weight `ω_y = n_y / (n_y + s)`.
pub fn shrinkage_weight(n_y: u64, s: f64) -> f64 {
    n_y as f64 / (n_y as f64 + s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ml_examples() {
        let ct = CountTable::from_columns(&[vec![3, 1], vec![2, 2], vec![0, 0]]).unwrap();
        let ml = ml_estimate(&ct);
        assert_eq!(ml.theta[(0, 0)], 0.75);
        assert_eq!(ml.theta[(1, 0)], 0.25);
        assert_eq!(ml.theta[(0, 1)], 0.5);
        assert_eq!(ml.undefined, vec![false, false, true]);
        assert!(ml.has_undefined());
        assert_eq!(ml.theta[(0, 2)], 0.5);
    }

    #[test]
    fn bayes_examples() {
        let ct = CountTable::from_columns(&[vec![3, 1], vec![0, 0]]).unwrap();
        let b = bayes_estimate(&ct, 2.0, &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(b.theta[(0, 0)], 4.0 / 6.0, epsilon = 1e-15);
        assert_eq!(b.theta[(0, 1)], 0.5);

        let b = bayes_estimate(&ct, 2.0, &[0.3, 0.7]).unwrap();
        assert_eq!(b.theta.column(1).as_slice(), &[0.3, 0.7]);
    }

    #[test]
    fn bdeu_classic_preset() {
        let ct = CountTable::zeros(2, 2);
        let b = bdeu_classic_estimate(&ct).unwrap();
        let h = b.hyper.unwrap();
        assert_eq!(h.s, 0.5);
        assert_eq!(h.alpha, vec![0.5, 0.5]);
    }

    #[test]
    fn ideal_examples() {
        let ct = CountTable::from_columns(&[vec![1, 0, 0], vec![0, 0, 0]]).unwrap();
        let alpha = [0.3, 0.5, 0.2];
        let ideal = ideal_estimate(&ct, 1.0, &alpha).unwrap();
        assert_abs_diff_eq!(ideal.theta[(0, 0)], 0.65, epsilon = 1e-15);
        assert_eq!(ideal.theta.column(1).as_slice(), &alpha);
        let bayes = bayes_estimate(&ct, 1.0, &alpha).unwrap();
        assert_eq!(ideal.theta, bayes.theta);
        assert_eq!(ideal.method, Method::Ideal);
    }

    #[test]
    fn invalid_priors() {
        let ct = CountTable::zeros(2, 1);
        assert!(bayes_estimate(&ct, 0.0, &[0.5, 0.5]).is_err());
        assert!(bayes_estimate(&ct, 1.0, &[0.6, 0.5]).is_err());
        assert!(bayes_estimate(&ct, 1.0, &[1.0, 0.0]).is_err());
        assert!(bayes_estimate(&ct, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn large_sample_limit() {
        let ct = CountTable::from_columns(&[vec![300_000, 700_000]]).unwrap();
        let b = bayes_estimate(&ct, 10.0, &[0.9, 0.1]).unwrap();
        let ml = ml_estimate(&ct);
        for x in 0..2 {
            assert_abs_diff_eq!(b.theta[(x, 0)], ml.theta[(x, 0)], epsilon = 1e-5);
        }
    }

    #[test]
    fn csv_has_metadata_line() {
        let ct = CountTable::from_columns(&[vec![1, 1]]).unwrap();
        let csv = bdeu_estimate(&ct, 1.0).unwrap().to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# method=BAYES s=1.0000000000000000e0 alpha="));
        assert_eq!(lines.next().unwrap(), "state,pa0");
    }

    fn table() -> impl Strategy<Value = (Vec<Vec<u64>>, Vec<f64>, f64)> {
        (2usize..6, 1usize..6).prop_flat_map(|(r, q)| {
            (
                proptest::collection::vec(proptest::collection::vec(0u64..30, r), q),
                proptest::collection::vec(0.05f64..1.0, r),
                0.1f64..20.0,
            )
        })
    }

    proptest! {
        #[test]
        fn shrinkage_identity_and_betweenness((cols, raw, s) in table()) {
            let total: f64 = raw.iter().sum();
            let alpha: Vec<f64> = raw.iter().map(|a| a / total).collect();
            let ct = CountTable::from_columns(&cols).unwrap();
            let b = bayes_estimate(&ct, s, &alpha).unwrap();
            let ml = ml_estimate(&ct);
            for y in 0..ct.q() {
                let w = shrinkage_weight(ct.col_total(y), s);
                let mut col_sum = 0.0;
                for x in 0..ct.r() {
                    let t = b.theta[(x, y)];
                    col_sum += t;
                    prop_assert!(t > 0.0);
                    if ct.col_total(y) > 0 {
                        let form = w * ml.theta[(x, y)] + (1.0 - w) * alpha[x];
                        prop_assert!((t - form).abs() < 1e-12);
                        let (lo, hi) = if ml.theta[(x, y)] < alpha[x] { (ml.theta[(x, y)], alpha[x]) } else { (alpha[x], ml.theta[(x, y)]) };
                        prop_assert!(t >= lo - 1e-15 && t <= hi + 1e-15);
                    }
                }
                prop_assert!((col_sum - 1.0).abs() < 1e-12);
            }
        }
    }
}
