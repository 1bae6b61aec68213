//! Mean-squared-error analysis of CPT estimators under the non-hierarchical
//! generative model: every column `θ_{X|y} ~ Dirichlet(s α̃)`, observations
//! categorical given the parent configuration.
//!
//! Closed forms exist for the ML, ideal and fixed-prior Bayesian estimators
//! when `n_y` is held fixed; the hierarchical estimator is only measurable
//! empirically, which is what [`empirical_mse`] and [`run_mse_benchmark`] do.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count_model::CountTable;
use crate::error::{Error, Result};
use crate::estimators::{bdeu_estimate, check_prior};
use crate::hier_posterior::{hierarchical_estimate, HierConfig};
use crate::report::{Table, Value};
use crate::sampling::{categorical, derive_seed, dirichlet, stream_rng};

/// How parent configurations are assigned to the `n` observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParentMode {
    /// `n / q` observations per configuration (the remainder spread over the
    /// first columns), so `n_y` is fixed as the closed forms assume.
    FixedCounts,
    /// `Y` drawn from this distribution for every observation.
    RandomParent(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeSpec {
    pub r: usize,
    pub q: usize,
    pub s_true: f64,
    pub alpha_true: Vec<f64>,
    pub n: usize,
    pub parents: ParentMode,
}

impl GenerativeSpec {
    /// Uniform random parents.
    pub fn new(q: usize, s_true: f64, alpha_true: Vec<f64>, n: usize) -> Self {
        GenerativeSpec {
            r: alpha_true.len(),
            q,
            s_true,
            alpha_true,
            n,
            parents: ParentMode::RandomParent(vec![1.0 / q as f64; q]),
        }
    }

    pub fn fixed_counts(mut self) -> Self {
        self.parents = ParentMode::FixedCounts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r != self.alpha_true.len() || self.q == 0 || self.n == 0 {
            return Err(Error::invalid("generative spec needs r = |alpha|, q ≥ 1, n ≥ 1"));
        }
        check_prior(self.s_true, &self.alpha_true, self.r)?;
        if let ParentMode::RandomParent(p) = &self.parents {
            if p.len() != self.q || p.iter().any(|&v| !(v >= 0.0)) || !(p.iter().sum::<f64>() > 0.0) {
                return Err(Error::invalid("parent distribution must have q non-negative entries"));
            }
        }
        Ok(())
    }

    /// Column totals in fixed-counts mode.
    pub fn fixed_column_totals(&self) -> Vec<u64> {
        (0..self.q)
            .map(|y| (self.n / self.q + usize::from(y < self.n % self.q)) as u64)
            .collect()
    }
}

/// Draw true columns and tally `n` observations generated from them.
pub fn sample_generative(spec: &GenerativeSpec, seed: u64) -> Result<(DMatrix<f64>, CountTable)> {
    spec.validate()?;
    let (r, q) = (spec.r, spec.q);
    let mut rng = stream_rng(seed, 0);
    let conc: Vec<f64> = spec.alpha_true.iter().map(|a| spec.s_true * a).collect();
    let mut theta = DMatrix::zeros(r, q);
    for y in 0..q {
        let col = dirichlet(&mut rng, &conc);
        theta.column_mut(y).copy_from_slice(&col);
    }
    let mut ct = CountTable::zeros(r, q);
    let draw = |y: usize, rng: &mut rand_chacha::ChaCha8Rng, ct: &mut CountTable| {
        let x = categorical(rng, theta.column(y).as_slice());
        ct.add(x, y, 1);
    };
    match &spec.parents {
        ParentMode::FixedCounts => {
            for (y, &n_y) in spec.fixed_column_totals().iter().enumerate() {
                for _ in 0..n_y {
                    draw(y, &mut rng, &mut ct);
                }
            }
        }
        ParentMode::RandomParent(p) => {
            for _ in 0..spec.n {
                let y = categorical(&mut rng, p);
                draw(y, &mut rng, &mut ct);
            }
        }
    }
    Ok((theta, ct))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosedFormKind {
    Ml,
    Ideal,
    Bayes,
}

/// Per-cell MSE under the generative model with `n_y` fixed and shrinkage
/// weight `ω = n_y / (n_y + s)`. With `v = (α̃_x − α̃_x²)/(s + 1)`:
///
/// * ML: `s / n_y · v`
/// * IDEAL: `(ω² s / n_y + (1 − ω)²) v = s / (n_y + s) · v`
/// * BAYES (uniform prior mean): IDEAL `+ (1 − ω)² (α̃_x − 1/r)²`
pub fn mse_closed_form(kind: ClosedFormKind, n_y: u64, s: f64, alpha_x: f64, r: usize) -> Result<f64> {
    if !(s > 0.0) || !(alpha_x > 0.0 && alpha_x < 1.0) || r < 2 {
        return Err(Error::invalid("closed form needs s > 0, 0 < alpha_x < 1, r ≥ 2"));
    }
    let v = (alpha_x - alpha_x * alpha_x) / (s + 1.0);
    let n = n_y as f64;
    let w = n / (n + s);
    match kind {
        ClosedFormKind::Ml if n_y == 0 => Err(Error::invalid("ML MSE is undefined for n_y = 0")),
        ClosedFormKind::Ml => Ok(s / n * v),
        ClosedFormKind::Ideal => Ok(s / (n + s) * v),
        ClosedFormKind::Bayes => {
            let bias = alpha_x - 1.0 / r as f64;
            Ok(s / (n + s) * v + (1.0 - w).powi(2) * bias * bias)
        }
    }
}

/// Average closed-form MSE over all cells of a fixed-counts spec.
pub fn mse_closed_form_average(kind: ClosedFormKind, spec: &GenerativeSpec) -> Result<f64> {
    let totals = spec.fixed_column_totals();
    let mut sum = 0.0;
    for &n_y in &totals {
        for &a in &spec.alpha_true {
            sum += mse_closed_form(kind, n_y, spec.s_true, a, spec.r)?;
        }
    }
    Ok(sum / (spec.r * spec.q) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub per_cell: DMatrix<f64>,
    pub average: f64,
    /// Standard error of `average` from the replicate-level averages.
    pub mc_se: f64,
    pub replicates: usize,
    pub skipped: usize,
    pub estimator_tag: String,
}

/// A CPT estimator usable in the MSE lab.
pub type Estimator<'a> = dyn Fn(&CountTable) -> Result<DMatrix<f64>> + Sync + 'a;

/// Monte-Carlo MSE of an estimator: per replicate, sample columns and counts,
/// estimate, and accumulate squared errors against the true columns.
pub fn empirical_mse(
    tag: &str,
    estimator: &Estimator<'_>,
    spec: &GenerativeSpec,
    replicates: usize,
    seed: u64,
) -> Result<MseReport> {
    if replicates < 2 {
        return Err(Error::invalid("at least two replicates are required"));
    }
    spec.validate()?;
    let (r, q) = (spec.r, spec.q);
    let results: Vec<Option<DMatrix<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let (theta, ct) = sample_generative(spec, derive_seed(seed, &[i as u64])).ok()?;
            let est = estimator(&ct).ok()?;
            Some((est - theta).map(|d| d * d))
        })
        .collect();

    let mut per_cell = DMatrix::zeros(r, q);
    let mut averages = Vec::with_capacity(replicates);
    for sq in results.iter().flatten() {
        per_cell += sq;
        averages.push(sq.mean());
    }
    let ok = averages.len();
    if ok < 2 {
        return Err(Error::invalid(format!("estimator `{tag}` failed on all but {ok} replicates")));
    }
    per_cell /= ok as f64;
    let mean = averages.iter().sum::<f64>() / ok as f64;
    let var = averages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (ok - 1) as f64;
    Ok(MseReport {
        average: per_cell.mean(),
        per_cell,
        mc_se: (var / ok as f64).sqrt(),
        replicates: ok,
        skipped: replicates - ok,
        estimator_tag: tag.to_owned(),
    })
}

/// Which distribution the true `α̃` is drawn from for each repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchTest {
    /// `α̃ ~ Dirichlet(1)`: skewed means, favourable to the hierarchical model.
    One,
    /// `α̃ ~ Dirichlet(10^6 · 1)`: essentially uniform, the Bayesian ideal.
    Two,
}

impl BenchTest {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(BenchTest::One),
            2 => Ok(BenchTest::Two),
            _ => Err(Error::invalid(format!("unknown benchmark test {id}"))),
        }
    }

    pub fn id(self) -> u32 {
        match self {
            BenchTest::One => 1,
            BenchTest::Two => 2,
        }
    }

    pub fn concentration(self) -> f64 {
        match self {
            BenchTest::One => 1.0,
            BenchTest::Two => 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub test: BenchTest,
    pub r: Vec<usize>,
    pub q: Vec<usize>,
    pub n: Vec<usize>,
    pub reps: usize,
    pub n_samples: usize,
    pub ess_floor: f64,
    pub seed: u64,
    pub fixed_counts: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub test: u32,
    pub r: usize,
    pub q: usize,
    pub n: usize,
    pub repetition: usize,
    pub mse_bayes: f64,
    pub mse_hier: f64,
    /// `mse_bayes − mse_hier`; positive favours the hierarchical estimator.
    pub diff: f64,
    /// ESS of the hierarchical fit.
    pub ess: f64,
}

/// Draw `α̃` for one benchmark repetition.
pub fn draw_alpha_true(test: BenchTest, r: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 1);
    dirichlet(&mut rng, &vec![test.concentration(); r])
}

/// For every `(r, q, n, repetition)`: draw `α̃`, generate data with `s = r`,
/// fit the hierarchical (`s = r`, `α0 = 1`) and uniform Bayesian (`s = r`)
/// estimators and record their average MSE over cells.
pub fn run_mse_benchmark(settings: &BenchSettings) -> Result<Vec<BenchRow>> {
    if settings.r.is_empty() || settings.q.is_empty() || settings.n.is_empty() || settings.reps == 0 {
        return Err(Error::invalid("benchmark grid is empty"));
    }
    let mut jobs = Vec::new();
    for &r in &settings.r {
        for &q in &settings.q {
            for &n in &settings.n {
                for rep in 0..settings.reps {
                    jobs.push((r, q, n, rep));
                }
            }
        }
    }
    let test = settings.test;
    jobs.into_par_iter()
        .map(|(r, q, n, rep)| {
            let job_seed = derive_seed(settings.seed, &[test.id() as u64, r as u64, q as u64, n as u64, rep as u64]);
            let alpha_true = draw_alpha_true(test, r, job_seed);
            let mut spec = GenerativeSpec::new(q, r as f64, alpha_true, n);
            if settings.fixed_counts {
                spec = spec.fixed_counts();
            }
            let (theta, ct) = sample_generative(&spec, job_seed)?;
            let bayes = bdeu_estimate(&ct, r as f64)?;
            let cfg = HierConfig {
                n_samples: settings.n_samples,
                ess_floor: settings.ess_floor,
                seed: derive_seed(job_seed, &[7]),
                ..HierConfig::for_child(r)
            };
            let hier = hierarchical_estimate(&ct, &cfg, false)?;
            let mse = |est: &DMatrix<f64>| (est - &theta).map(|d| d * d).mean();
            let mse_bayes = mse(&bayes.theta);
            let mse_hier = mse(&hier.theta);
            Ok(BenchRow {
                test: test.id(),
                r,
                q,
                n,
                repetition: rep,
                mse_bayes,
                mse_hier,
                diff: mse_bayes - mse_hier,
                ess: hier.alpha_post.ess,
            })
        })
        .collect()
}

pub const BENCH_COLUMNS: [&str; 9] = ["test", "r", "q", "n", "repetition", "mse_bayes", "mse_hier", "diff", "mc_diagnostics"];

pub fn bench_table(rows: &[BenchRow]) -> Table {
    let mut t = Table::new(BENCH_COLUMNS);
    for b in rows {
        t.push(vec![
            Value::Int(b.test as i64),
            Value::Int(b.r as i64),
            Value::Int(b.q as i64),
            Value::Int(b.n as i64),
            Value::Int(b.repetition as i64),
            Value::Float(b.mse_bayes),
            Value::Float(b.mse_hier),
            Value::Float(b.diff),
            Value::Float(b.ess),
        ]);
    }
    t
}

/// Median of a slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{ideal_estimate, ml_estimate};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn closed_form_examples() {
        let ml = mse_closed_form(ClosedFormKind::Ml, 4, 1.0, 0.5, 2).unwrap();
        assert_abs_diff_eq!(ml, 0.03125, epsilon = 1e-15);
        let ideal = mse_closed_form(ClosedFormKind::Ideal, 4, 1.0, 0.5, 2).unwrap();
        assert_abs_diff_eq!(ideal, 0.025, epsilon = 1e-15);
        assert!(ideal < ml);
        let bayes = mse_closed_form(ClosedFormKind::Bayes, 4, 1.0, 0.5, 2).unwrap();
        assert_eq!(bayes, ideal);
        // 0.016 + (1/25)·0.09
        let bayes = mse_closed_form(ClosedFormKind::Bayes, 4, 1.0, 0.8, 2).unwrap();
        assert_abs_diff_eq!(bayes, 0.0196, epsilon = 1e-15);
        assert!(mse_closed_form(ClosedFormKind::Ml, 0, 1.0, 0.5, 2).is_err());
    }

    #[test]
    fn ideal_form_matches_weighted_expression() {
        for &(n, s, a) in &[(1u64, 0.5, 0.1), (7, 3.0, 0.6), (50, 12.0, 0.33)] {
            let w = n as f64 / (n as f64 + s);
            let v = (a - a * a) / (s + 1.0);
            let long = (w * w * s / n as f64 + (1.0 - w).powi(2)) * v;
            assert_abs_diff_eq!(mse_closed_form(ClosedFormKind::Ideal, n, s, a, 3).unwrap(), long, epsilon = 1e-15);
        }
    }

    #[test]
    fn generative_conservation_and_determinism() {
        let spec = GenerativeSpec::new(3, 2.0, vec![0.2, 0.3, 0.5], 57);
        let (t1, c1) = sample_generative(&spec, 4).unwrap();
        let (t2, c2) = sample_generative(&spec, 4).unwrap();
        assert_eq!(c1.total(), 57);
        assert_eq!((t1, c1), (t2, c2));
        let fixed = spec.clone().fixed_counts();
        let (_, c) = sample_generative(&fixed, 1).unwrap();
        assert_eq!(c.col_totals(), &[19, 19, 19]);
    }

    #[test]
    fn generative_column_moments() {
        let a = [0.7, 0.2, 0.1];
        let s = 3.0;
        let spec = GenerativeSpec::new(1000, s, a.to_vec(), 1);
        let mut vals = Vec::new();
        for seed in 0..100 {
            let (theta, _) = sample_generative(&spec, seed).unwrap();
            vals.extend(theta.row(0).iter().copied());
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let exact_var = (a[0] - a[0] * a[0]) / (s + 1.0);
        assert!((mean - a[0]).abs() < 3.0 * (exact_var / n).sqrt());
        let fourth = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let var_se = ((fourth - var * var) / n).sqrt();
        assert!((var - exact_var).abs() < 3.0 * var_se, "{var} vs {exact_var}");
    }

    #[test]
    fn perfect_estimator_has_zero_mse() {
        let spec = GenerativeSpec::new(2, 2.0, vec![0.4, 0.6], 10);
        // the "estimator" recomputes the true columns from the same seed stream
        let report = empirical_mse(
            "oracle",
            &|ct: &CountTable| {
                for seed in 0..8u64 {
                    let (theta, c) = sample_generative(&spec, derive_seed(99, &[seed]))?;
                    if &c == ct {
                        return Ok(theta);
                    }
                }
                Err(Error::invalid("unmatched"))
            },
            &spec,
            8,
            99,
        )
        .unwrap();
        assert_eq!(report.average, 0.0);
        assert_eq!(report.skipped, 0);
    }

    #[test]
    fn empirical_matches_closed_form_small() {
        let spec = GenerativeSpec::new(2, 2.0, vec![0.3, 0.7], 8).fixed_counts();
        let alpha = spec.alpha_true.clone();
        let ideal = empirical_mse("ideal", &|ct| Ok(ideal_estimate(ct, 2.0, &alpha)?.theta), &spec, 4000, 1).unwrap();
        let exact = mse_closed_form_average(ClosedFormKind::Ideal, &spec).unwrap();
        assert!((ideal.average - exact).abs() < 3.0 * ideal.mc_se, "{} vs {exact}", ideal.average);
        let ml = empirical_mse("ml", &|ct| Ok(ml_estimate(ct).theta), &spec, 4000, 2).unwrap();
        let exact = mse_closed_form_average(ClosedFormKind::Ml, &spec).unwrap();
        assert!((ml.average - exact).abs() < 3.0 * ml.mc_se);
        assert_abs_diff_eq!(ml.average, ml.per_cell.mean(), epsilon = 1e-12);
    }

    #[test]
    fn benchmark_rows_and_determinism() {
        let settings = BenchSettings {
            test: BenchTest::Two,
            r: vec![2],
            q: vec![2, 3],
            n: vec![20],
            reps: 2,
            n_samples: 2000,
            ess_floor: 0.01,
            seed: 7,
            fixed_counts: false,
        };
        let rows = run_mse_benchmark(&settings).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows, run_mse_benchmark(&settings).unwrap());
        assert_eq!((rows[2].q, rows[2].repetition), (3, 0));
        let t = draw_alpha_true(BenchTest::Two, 4, 5);
        assert!(t.iter().all(|a| (a - 0.25).abs() < 0.01));
    }

    #[test]
    fn median_handles_parity() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    proptest! {
        #[test]
        fn mse_ordering(n_y in 1u64..500, s in 0.01f64..50.0, a in 0.001f64..0.999, r in 2usize..9) {
            let ideal = mse_closed_form(ClosedFormKind::Ideal, n_y, s, a, r).unwrap();
            let bayes = mse_closed_form(ClosedFormKind::Bayes, n_y, s, a, r).unwrap();
            let ml = mse_closed_form(ClosedFormKind::Ml, n_y, s, a, r).unwrap();
            prop_assert!(ideal <= bayes);
            prop_assert!(ideal < ml);
        }
    }
}
