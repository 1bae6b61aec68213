//! Command-line driver. Every subcommand resolves its configuration from
//! built-in defaults, an optional JSON file and command-line flags (in that
//! order of precedence, lowest first), echoes the result to `config.json` in
//! the output directory and writes its tables there.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::bayes_net::{evaluate, fit_cpts, joint_log_likelihood, learn_tan, BayesNet, Dag, EstimatorSpec};
use crate::count_model::CountTable;
use crate::error::{Error, Result};
use crate::hier_posterior::{alpha_posterior, alpha_posterior_quadrature, HierConfig, DEFAULT_SAMPLES};
use crate::mse_lab::{bench_table, run_mse_benchmark, BenchSettings, BenchTest};
use crate::report::{emit_report, Format, Table, Value};
use crate::sampling::{categorical, derive_seed, dirichlet, stream_rng};
use crate::tabular_data::{format_cut_points, load_categorical_csv, load_csv, subsample, ColumnKind, RawColumn};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (unknown flag, missing argument)
  3  invalid configuration or parameter value
  4  file system error
  5  malformed input data or structure
  6  estimation failure (low ESS, non-finite weights, undefined AUC)
  7  validation failure";

#[derive(Debug, Parser)]
#[command(name = "hiercpt", version, about = "Hierarchical Dirichlet CPT estimation and experiments", after_help = EXIT_CODES)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "HIERCPT_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Table format: csv or json.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// JSON file with parameters; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equal-frequency discretization of numeric CSV columns.
    Discretize(DiscretizeArgs),
    /// Fit every CPT of a DAG on a categorical CSV.
    Fit(FitArgs),
    /// Simulated MSE comparison of the hierarchical and uniform Bayesian estimators.
    MseBench(MseBenchArgs),
    /// Held-out log-likelihood of a fixed DAG across training sizes.
    LoglikExp(LoglikArgs),
    /// TAN classification accuracy and AUC across training sizes.
    ClassifyExp(ClassifyArgs),
    /// Compare the importance sampler with the quadrature oracle.
    Validate(ValidateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Discretize(_) => "discretize",
            Command::Fit(_) => "fit",
            Command::MseBench(_) => "mse-bench",
            Command::LoglikExp(_) => "loglik-exp",
            Command::ClassifyExp(_) => "classify-exp",
            Command::Validate(_) => "validate",
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct DiscretizeArgs {
    /// Input CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Column kinds, e.g. `c,n,n` (c = categorical, n = numeric). Default:
    /// numeric wherever every value parses as a number.
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    bins: Option<usize>,
    /// The input has no header row.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not", rename = "header", serialize_with = "ser_negated")]
    no_header: bool,
}

fn ser_negated<S: serde::Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_bool(!v)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DiscretizeConfig {
    input: Option<PathBuf>,
    schema: Option<String>,
    bins: usize,
    header: bool,
    format: Format,
}

impl Default for DiscretizeConfig {
    fn default() -> Self {
        DiscretizeConfig {
            input: None,
            schema: None,
            bins: 3,
            header: true,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    /// Categorical CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// DAG file (`name | parent1,parent2` per line).
    #[arg(long)]
    dag: Option<PathBuf>,
    /// ml, bdeu:<s>, bdeu-classic or hier.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    ess_floor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitConfig {
    data: Option<PathBuf>,
    dag: Option<PathBuf>,
    estimator: String,
    n_samples: usize,
    ess_floor: f64,
    seed: u64,
    format: Format,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            data: None,
            dag: None,
            estimator: "hier".into(),
            n_samples: DEFAULT_SAMPLES,
            ess_floor: 0.01,
            seed: 0,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct MseBenchArgs {
    /// 1: α̃ ~ Dir(1); 2: α̃ ~ Dir(10^6).
    #[arg(long)]
    test: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    ess_floor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Exactly n/q observations per parent configuration.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    fixed_counts: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MseBenchConfig {
    test: u32,
    r: Vec<usize>,
    q: Vec<usize>,
    n: Vec<usize>,
    reps: usize,
    n_samples: usize,
    ess_floor: f64,
    seed: u64,
    fixed_counts: bool,
    format: Format,
}

impl Default for MseBenchConfig {
    fn default() -> Self {
        MseBenchConfig {
            test: 1,
            r: vec![2, 4, 6, 8],
            q: vec![2, 4, 6, 8],
            n: vec![20, 40, 80, 160, 320, 640],
            reps: 10,
            n_samples: 10_000,
            ess_floor: 0.0,
            seed: 0,
            fixed_counts: false,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct LoglikArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    dag: Option<PathBuf>,
    /// Training sizes.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    /// BDeu equivalent sample sizes to compare against.
    #[arg(long, value_delimiter = ',')]
    bdeu: Option<Vec<f64>>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    ess_floor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// At most this many held-out rows.
    #[arg(long)]
    test_cap: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LoglikConfig {
    data: Option<PathBuf>,
    dag: Option<PathBuf>,
    n: Vec<usize>,
    reps: usize,
    bdeu: Vec<f64>,
    n_samples: usize,
    ess_floor: f64,
    seed: u64,
    test_cap: Option<usize>,
    format: Format,
}

fn experiment_sizes() -> Vec<usize> {
    vec![20, 40, 80, 160, 320, 640, 1280]
}

impl Default for LoglikConfig {
    fn default() -> Self {
        LoglikConfig {
            data: None,
            dag: None,
            n: experiment_sizes(),
            reps: 10,
            bdeu: vec![1.0, 10.0],
            n_samples: 20_000,
            ess_floor: 0.0,
            seed: 0,
            test_cap: None,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct ClassifyArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the class column.
    #[arg(long)]
    class: Option<String>,
    /// Fixed structure; by default a TAN is learned on each training set.
    #[arg(long)]
    dag: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    bdeu: Option<Vec<f64>>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    ess_floor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    test_cap: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ClassifyConfig {
    data: Option<PathBuf>,
    class: Option<String>,
    dag: Option<PathBuf>,
    n: Vec<usize>,
    reps: usize,
    bdeu: Vec<f64>,
    n_samples: usize,
    ess_floor: f64,
    seed: u64,
    test_cap: Option<usize>,
    format: Format,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            data: None,
            class: None,
            dag: None,
            n: experiment_sizes(),
            reps: 10,
            bdeu: vec![1.0, 10.0],
            n_samples: 20_000,
            ess_floor: 0.0,
            seed: 0,
            test_cap: None,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct ValidateArgs {
    /// Child cardinality of the fixtures (2 or 3).
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ValidateConfig {
    r: usize,
    n_samples: usize,
    seed: u64,
    format: Format,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            r: 2,
            n_samples: DEFAULT_SAMPLES,
            seed: 0,
            format: Format::Csv,
        }
    }
}

/// Exit code for an error, as listed in `--help`.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) => 3,
        Error::Io { .. } => 4,
        Error::Csv(e) if e.is_io_error() => 4,
        Error::Csv(_)
        | Error::RaggedRow { .. }
        | Error::NotNumeric { .. }
        | Error::DegenerateBins { .. }
        | Error::StateOutOfRange { .. }
        | Error::InvalidParents(_)
        | Error::InvalidDag(_)
        | Error::UndefinedColumn { .. } => 5,
        Error::BoundaryAlpha
        | Error::LowEss { .. }
        | Error::NonFiniteWeight
        | Error::QuadratureNonConvergence { .. }
        | Error::NodeFit { .. }
        | Error::AucUndefined
        | Error::EmptyReport => 6,
        Error::Validation(_) => 7,
    }
}

/// Run the CLI on `argv` (including the program name) and return the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hiercpt: error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.jobs {
            if j == 0 {
                return Err(Error::Config("--jobs must be at least 1".into()));
            }
            b = b.num_threads(j);
        }
        b.build().map_err(|e| Error::Config(e.to_string()))?
    };
    let ctx = Context {
        out: cli.out.clone(),
        config: cli.config.clone(),
        format: cli.format.clone(),
        command: cli.command.name(),
    };
    pool.install(|| match &cli.command {
        Command::Discretize(a) => cmd_discretize(&ctx, a),
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::MseBench(a) => cmd_mse_bench(&ctx, a),
        Command::LoglikExp(a) => cmd_loglik(&ctx, a),
        Command::ClassifyExp(a) => cmd_classify(&ctx, a),
        Command::Validate(a) => cmd_validate(&ctx, a),
    })
}

struct Context {
    out: PathBuf,
    config: Option<PathBuf>,
    format: Option<String>,
    command: &'static str,
}

impl Context {
    /// Defaults, then the config file, then flags.
    fn resolve<C, A>(&self, flags: &A) -> Result<C>
    where
        C: Serialize + DeserializeOwned + Default,
        A: Serialize,
    {
        let mut merged = match serde_json::to_value(C::default())? {
            Json::Object(m) => m,
            _ => unreachable!("configs are structs"),
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let file: Json = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let Json::Object(mut file) = file else {
                return Err(Error::Config(format!("{}: expected a JSON object", path.display())));
            };
            if let Some(cmd) = file.remove("command") {
                if cmd != Json::String(self.command.into()) {
                    return Err(Error::Config(format!(
                        "config file is for command {cmd}, not `{}`",
                        self.command
                    )));
                }
            }
            overlay(&mut merged, file);
        }
        let mut from_flags = match serde_json::to_value(flags)? {
            Json::Object(m) => m,
            _ => unreachable!("flag sets are structs"),
        };
        if let Some(f) = &self.format {
            from_flags.insert("format".into(), Json::String(f.clone()));
        }
        from_flags.retain(|_, v| !v.is_null());
        overlay(&mut merged, from_flags);
        serde_json::from_value(Json::Object(merged)).map_err(|e| Error::Config(e.to_string()))
    }

    fn prepare<C: Serialize>(&self, cfg: &C) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        let mut doc = match serde_json::to_value(cfg)? {
            Json::Object(m) => m,
            _ => unreachable!(),
        };
        doc.insert("command".into(), Json::String(self.command.into()));
        let path = self.out.join("config.json");
        let mut text = serde_json::to_string_pretty(&Json::Object(doc))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn emit(&self, table: &Table, stem: &str, format: Format) -> Result<PathBuf> {
        let path = self.out.join(format!("{stem}.{}", format.extension()));
        emit_report(table, format, &path)?;
        Ok(path)
    }
}

fn overlay(base: &mut Map<String, Json>, top: Map<String, Json>) {
    for (k, v) in top {
        base.insert(k, v);
    }
}

fn required<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Config(format!("missing required parameter `{name}`")))
}

fn cmd_discretize(ctx: &Context, args: &DiscretizeArgs) -> Result<()> {
    let cfg: DiscretizeConfig = ctx.resolve(args)?;
    let input = required(&cfg.input, "input")?;
    let schema = cfg.schema.as_deref().map(ColumnKind::parse_list).transpose()?;
    let table = match &schema {
        Some(s) => load_csv(input, Some(s), cfg.header)?,
        None => {
            // a column is numeric when every label parses as a number
            let probe = load_csv(input, None, cfg.header)?;
            let kinds: Vec<ColumnKind> = probe
                .columns
                .iter()
                .map(|c| match c {
                    RawColumn::Categorical { labels, .. } if labels.iter().all(|l| l.parse::<f64>().is_ok()) => {
                        ColumnKind::Numeric
                    }
                    _ => ColumnKind::Categorical,
                })
                .collect();
            load_csv(input, Some(&kinds), cfg.header)?
        }
    };
    ctx.prepare(&cfg)?;
    let (ds, cuts) = table.discretize(cfg.bins)?;
    let data_path = ctx.out.join("discretized.csv");
    ds.write_csv(&data_path)?;
    let cuts_path = ctx.out.join("cut_points.txt");
    fs::write(&cuts_path, format_cut_points(&table.names, &cuts)).map_err(|e| Error::io(&cuts_path, e))?;

    let mut summary = Table::new(["variable", "kind", "cardinality", "cut_points"]);
    for ((name, col), d) in table.names.iter().zip(&table.columns).zip(&cuts) {
        let kind = match col {
            RawColumn::Categorical { .. } => "categorical",
            RawColumn::Numeric(_) => "numeric",
        };
        let card = ds.cardinality(ds.variable_index(name).expect("column kept"));
        let cut_list = d
            .as_ref()
            .map(|d| d.cut_points.iter().map(|c| format!("{c:.16e}")).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        summary.push(vec![name.as_str().into(), kind.into(), card.into(), cut_list.into()]);
    }
    let path = ctx.emit(&summary, "variables", cfg.format)?;
    println!(
        "discretized {} rows ({} dropped) into {}; summary in {}",
        ds.n_rows(),
        table.dropped_rows,
        data_path.display(),
        path.display()
    );
    Ok(())
}

fn hier_spec(n_samples: usize, seed: u64, ess_floor: f64) -> EstimatorSpec {
    EstimatorSpec::Hier {
        n_samples,
        seed,
        ess_floor,
    }
}

fn cmd_fit(ctx: &Context, args: &FitArgs) -> Result<()> {
    let cfg: FitConfig = ctx.resolve(args)?;
    let data = required(&cfg.data, "data")?;
    let dag_path = required(&cfg.dag, "dag")?;
    let mut spec: EstimatorSpec = cfg.estimator.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    if spec.is_hier() {
        spec = hier_spec(cfg.n_samples, cfg.seed, cfg.ess_floor);
    }
    let ds = load_categorical_csv(data)?;
    let dag = Dag::load(dag_path)?;
    ctx.prepare(&cfg)?;
    let net = fit_cpts(&dag, &ds, &spec)?;

    let cpt_dir = ctx.out.join("cpts");
    fs::create_dir_all(&cpt_dir).map_err(|e| Error::io(&cpt_dir, e))?;
    let mut summary = Table::new(["node", "r", "q", "method", "s", "ess", "undefined_columns"]);
    for (i, cpt) in net.cpts.iter().enumerate() {
        let name = &dag.names()[i];
        let path = cpt_dir.join(format!("{i:03}_{}.csv", sanitize(name)));
        fs::write(&path, cpt.to_csv()).map_err(|e| Error::io(&path, e))?;
        let s = cpt.hyper.as_ref().map_or(Value::Text(String::new()), |h| Value::Float(h.s));
        let ess = net.alpha_posteriors[i]
            .as_ref()
            .map_or(Value::Text(String::new()), |p| Value::Float(p.ess));
        summary.push(vec![
            name.as_str().into(),
            cpt.r().into(),
            cpt.q().into(),
            cpt.method.to_string().into(),
            s,
            ess,
            cpt.undefined.iter().filter(|&&u| u).count().into(),
        ]);
    }
    let path = ctx.emit(&summary, "fit", cfg.format)?;
    println!("fitted {} CPTs with {}; summary in {}", net.n_nodes(), spec, path.display());
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn cmd_mse_bench(ctx: &Context, args: &MseBenchArgs) -> Result<()> {
    let cfg: MseBenchConfig = ctx.resolve(args)?;
    let settings = BenchSettings {
        test: BenchTest::from_id(cfg.test)?,
        r: cfg.r.clone(),
        q: cfg.q.clone(),
        n: cfg.n.clone(),
        reps: cfg.reps,
        n_samples: cfg.n_samples,
        ess_floor: cfg.ess_floor,
        seed: cfg.seed,
        fixed_counts: cfg.fixed_counts,
    };
    if settings.r.iter().any(|&r| r < 2) || settings.q.contains(&0) || settings.n.contains(&0) {
        return Err(Error::Config("r ≥ 2, q ≥ 1 and n ≥ 1 are required".into()));
    }
    ctx.prepare(&cfg)?;
    let rows = run_mse_benchmark(&settings)?;
    let path = ctx.emit(&bench_table(&rows), "mse_bench", cfg.format)?;
    println!("{} benchmark rows written to {}", rows.len(), path.display());
    Ok(())
}

struct ExperimentPlan {
    jobs: Vec<(usize, usize)>,
    estimators: Vec<EstimatorSpec>,
}

fn plan(n: &[usize], reps: usize, bdeu: &[f64], total_rows: usize) -> Result<ExperimentPlan> {
    if n.is_empty() || reps == 0 {
        return Err(Error::Config("training sizes and repetitions must be non-empty".into()));
    }
    if let Some(&big) = n.iter().find(|&&v| v >= total_rows) {
        return Err(Error::Config(format!(
            "training size {big} leaves no held-out rows ({total_rows} rows in data)"
        )));
    }
    if bdeu.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Config("BDeu equivalent sample sizes must be positive".into()));
    }
    let jobs = n.iter().flat_map(|&n| (0..reps).map(move |rep| (n, rep))).collect();
    // the hierarchical spec is a placeholder; each job sets its own seed
    let mut estimators = vec![hier_spec(0, 0, 0.0)];
    estimators.extend(bdeu.iter().map(|&s| EstimatorSpec::Bdeu { s }));
    Ok(ExperimentPlan { jobs, estimators })
}

/// Smallest importance-sampling ESS over the nodes; blank for non-hierarchical fits.
fn min_ess(net: &BayesNet) -> Value {
    net.alpha_posteriors
        .iter()
        .flatten()
        .map(|p| p.ess)
        .reduce(f64::min)
        .map_or(Value::Text(String::new()), Value::Float)
}

fn job_estimator(spec: &EstimatorSpec, n_samples: usize, ess_floor: f64, seed: u64) -> EstimatorSpec {
    if spec.is_hier() {
        hier_spec(n_samples, seed, ess_floor)
    } else {
        spec.clone()
    }
}

fn cmd_loglik(ctx: &Context, args: &LoglikArgs) -> Result<()> {
    let cfg: LoglikConfig = ctx.resolve(args)?;
    let ds = load_categorical_csv(required(&cfg.data, "data")?)?;
    let dag = Dag::load(required(&cfg.dag, "dag")?)?;
    let plan = plan(&cfg.n, cfg.reps, &cfg.bdeu, ds.n_rows())?;
    ctx.prepare(&cfg)?;

    let results: Vec<Vec<(String, f64, usize, Value)>> = plan
        .jobs
        .par_iter()
        .map(|&(n, rep)| {
            let split = subsample(&ds, n, derive_seed(cfg.seed, &[n as u64, rep as u64]), cfg.test_cap)?;
            let hier_seed = derive_seed(cfg.seed, &[n as u64, rep as u64, 1]);
            plan.estimators
                .iter()
                .map(|e| {
                    let spec = job_estimator(e, cfg.n_samples, cfg.ess_floor, hier_seed);
                    let net = fit_cpts(&dag, &split.train, &spec)?;
                    let ll = joint_log_likelihood(&net, &split.test)?;
                    Ok((spec.label(), ll, split.test.n_rows(), min_ess(&net)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(["n", "repetition", "method", "log_lik", "n_test", "hier_minus_method", "min_ess"]);
    for (&(n, rep), res) in plan.jobs.iter().zip(&results) {
        let hier = res[0].1;
        for (label, ll, n_test, ess) in res {
            table.push(vec![
                n.into(),
                rep.into(),
                label.as_str().into(),
                Value::Float(*ll),
                (*n_test).into(),
                Value::Float(hier - ll),
                ess.clone(),
            ]);
        }
    }
    let path = ctx.emit(&table, "loglik", cfg.format)?;
    println!("{} rows written to {}", table.len(), path.display());
    Ok(())
}

fn cmd_classify(ctx: &Context, args: &ClassifyArgs) -> Result<()> {
    let cfg: ClassifyConfig = ctx.resolve(args)?;
    let ds = load_categorical_csv(required(&cfg.data, "data")?)?;
    let class = required(&cfg.class, "class")?;
    let class_col = ds
        .variable_index(class)
        .ok_or_else(|| Error::Config(format!("class column `{class}` not in data")))?;
    let fixed = cfg.dag.as_deref().map(Dag::load).transpose()?;
    let plan = plan(&cfg.n, cfg.reps, &cfg.bdeu, ds.n_rows())?;
    ctx.prepare(&cfg)?;

    type Row = (String, crate::bayes_net::EvalReport, Value);
    let results: Vec<Vec<Row>> = plan
        .jobs
        .par_iter()
        .map(|&(n, rep)| {
            let split = subsample(&ds, n, derive_seed(cfg.seed, &[n as u64, rep as u64]), cfg.test_cap)?;
            let hier_seed = derive_seed(cfg.seed, &[n as u64, rep as u64, 1]);
            let dag = match &fixed {
                Some(d) => d.clone(),
                None => learn_tan(&split.train, class_col)?,
            };
            let class_node = dag
                .node_index(class)
                .ok_or_else(|| Error::InvalidDag(format!("class `{class}` is not a node of the DAG")))?;
            plan.estimators
                .iter()
                .map(|e| {
                    let spec = job_estimator(e, cfg.n_samples, cfg.ess_floor, hier_seed);
                    let net = fit_cpts(&dag, &split.train, &spec)?;
                    Ok((spec.label(), evaluate(&net, &split.test, class_node)?, min_ess(&net)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut columns = vec!["n", "repetition", "method"];
    columns.extend(crate::bayes_net::EvalReport::COLUMNS);
    columns.push("min_ess");
    let mut table = Table::new(columns);
    for (&(n, rep), res) in plan.jobs.iter().zip(&results) {
        for (label, report, ess) in res {
            let mut row: Vec<Value> = vec![n.into(), rep.into(), label.as_str().into()];
            row.extend(report.values());
            row.push(ess.clone());
            table.push(row);
        }
    }
    let path = ctx.emit(&table, "classify", cfg.format)?;
    println!("{} rows written to {}", table.len(), path.display());
    Ok(())
}

/// Count tables for the oracle comparison: `q ∈ {1, 2, 4}`, `n ∈ {0, 1, 5, 50}`,
/// observations spread over the cells by a random categorical.
pub fn validation_fixtures(r: usize, seed: u64) -> Vec<CountTable> {
    let mut out = Vec::new();
    for q in [1usize, 2, 4] {
        for n in [0usize, 1, 5, 50] {
            let mut rng = stream_rng(derive_seed(seed, &[r as u64, q as u64, n as u64]), 0);
            let p = dirichlet(&mut rng, &vec![1.0; r * q]);
            let mut cols = vec![vec![0u64; r]; q];
            for _ in 0..n {
                let cell = categorical(&mut rng, &p);
                cols[cell / r][cell % r] += 1;
            }
            out.push(CountTable::from_columns(&cols).expect("well-formed fixture"));
        }
    }
    out
}

fn cmd_validate(ctx: &Context, args: &ValidateArgs) -> Result<()> {
    let cfg: ValidateConfig = ctx.resolve(args)?;
    if !(2..=3).contains(&cfg.r) {
        return Err(Error::Config("validate supports r = 2 or r = 3".into()));
    }
    ctx.prepare(&cfg)?;
    let fixtures = validation_fixtures(cfg.r, cfg.seed);
    let mut table = Table::new([
        "fixture", "q", "n", "coordinate", "sampler", "quadrature", "abs_diff", "tolerance", "pass",
    ]);
    let mut failures = 0;
    for (i, ct) in fixtures.iter().enumerate() {
        let hc = HierConfig::for_child(cfg.r)
            .with_samples(cfg.n_samples)
            .with_seed(derive_seed(cfg.seed, &[i as u64]));
        let post = alpha_posterior(ct, &hc)?;
        let (quad, _) = alpha_posterior_quadrature(ct, &hc)?;
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for x in 0..cfg.r {
            let d = (post.mean[x] - quad[x]).abs();
            let tol = (3.0 * post.mc_se[x]).max(5e-3);
            let pass = d <= tol;
            ok &= pass;
            worst = worst.max(d);
            table.push(vec![
                i.into(),
                ct.q().into(),
                (ct.total() as usize).into(),
                x.into(),
                Value::Float(post.mean[x]),
                Value::Float(quad[x]),
                Value::Float(d),
                Value::Float(tol),
                (if pass { "true" } else { "false" }).into(),
            ]);
        }
        failures += usize::from(!ok);
        println!(
            "fixture {i:2} r={} q={} n={:2}: max |Δ| = {worst:.2e}  {}",
            cfg.r,
            ct.q(),
            ct.total(),
            if ok { "PASS" } else { "FAIL" }
        );
    }
    ctx.emit(&table, "validate", cfg.format)?;
    if failures > 0 {
        return Err(Error::Validation(format!("{failures} of {} fixtures outside tolerance", fixtures.len())));
    }
    println!("all {} fixtures within tolerance", fixtures.len());
    Ok(())
}
