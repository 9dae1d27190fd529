//! Command-line front end.
//!
//! Every subcommand writes a table: CSV with `#`-prefixed metadata lines,
//! or JSON carrying the same metadata, rows and summary. Stochastic
//! subcommands require `--seed` and record it together with the number of
//! replications. Exit codes: 0 success, 1 usage, 2 data or computation
//! error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::exposure::{ExposureKind, ExposureSpec};
use crate::impossibility::{general_mixtures, mixture_error_sum, mixture_error_sum_exact, tv_profile, SignPattern};
use crate::lim::{threshold, FractionMoments, SeparationEstimator, ThresholdVariant};
use crate::model::{LimModel, ModelDoc, OutcomeModel};
use crate::network::{gen_k_regular, load_network, Network};
use crate::refinement::check_refinement;
use crate::risk::{baseline_tests, consistency_curve, default_alt_models, CurveConfig, Estimate, GraphFamily};
use crate::rng::{derive_seed, substream};

/// Environment variable overriding `--threads`.
pub const THREADS_ENV: &str = "INTERFERENCE_LAB_THREADS";

/// Exact mixture sums enumerate `2^(n + sign slots)` cases; beyond this
/// only the Monte Carlo column is filled.
const EXACT_MIXTURE_LIMIT: usize = 20;

// Labels for seeds derived from the master seed.
const GRAPH_STREAM: u64 = 0;
const REPLICATION_STREAM: u64 = 1;

#[derive(Parser, Debug)]
#[command(name = "interference-lab", version, about = "Simulate and test interference models in networked experiments")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random graph and write it as an edge list.
    GenGraph(GenGraphArgs),
    /// Total-variation check between the mixtures built on two nested exposure mappings.
    TvCheck(TvCheckArgs),
    /// Impossibility lower bound and the mixture error sum of baseline tests.
    RiskBound(RiskBoundArgs),
    /// Repeated runs of the linear-in-means threshold test.
    LimRun(LimRunArgs),
    /// Type I / Type II error of the linear-in-means test across network sizes.
    LimConsistency(LimConsistencyArgs),
    /// First four moments of the treated-neighbour fraction.
    Moments(MomentsArgs),
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GraphKind {
    KRegular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Variant {
    Main,
    General,
}

impl From<Variant> for ThresholdVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Main => ThresholdVariant::Main,
            Variant::General => ThresholdVariant::General,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Truth {
    Null,
    Alt,
}

#[derive(Args, Debug)]
struct GenGraphArgs {
    #[arg(long, value_enum)]
    kind: GraphKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TvCheckArgs {
    /// Coarse exposure mapping (no-effect, own-treatment, stratified, arbitrary-neighborhood).
    #[arg(long)]
    null: String,
    /// Fine exposure mapping.
    #[arg(long)]
    alt: String,
    #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
    n: Option<usize>,
    /// Edge-list file.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value = "bernoulli:0.5")]
    design: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct RiskBoundArgs {
    #[arg(long)]
    null: String,
    #[arg(long)]
    alt: String,
    /// Number of units; a seeded 4-regular graph is generated for
    /// network-based mappings and tests.
    #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
    n: Option<usize>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value = "bernoulli:0.5")]
    design: String,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct LimRunArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Units of a generated k-regular graph (with --k).
    #[arg(long, conflicts_with = "graph", requires = "k")]
    n: Option<usize>,
    #[arg(long, conflicts_with = "graph", requires = "n")]
    k: Option<usize>,
    /// Model JSON file.
    #[arg(long, conflicts_with = "beta", required_unless_present = "beta")]
    model: Option<PathBuf>,
    /// Homogeneous coefficients b1,b2,b3.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, value_enum, default_value_t = Variant::Main)]
    variant: Variant,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    /// Whether the model lies in the null or the alternative; adds the
    /// empirical error rate to the summary.
    #[arg(long, value_enum)]
    truth: Option<Truth>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct LimConsistencyArgs {
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Comma-separated network sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, value_enum, default_value_t = Variant::Main)]
    variant: Variant,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct MomentsArgs {
    #[arg(long)]
    degree: usize,
    #[arg(long)]
    p: f64,
    #[command(flatten)]
    output: OutputArgs,
}

/// A rendered result: metadata, rows, and trailing summary.
#[derive(Debug, Default)]
struct Table {
    meta: Vec<(&'static str, Value)>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
    summary: Vec<(&'static str, Value)>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Self::default()
        }
    }

    fn meta(&mut self, key: &'static str, value: impl Into<Value>) -> &mut Self {
        self.meta.push((key, value.into()));
        self
    }

    fn summary(&mut self, key: &'static str, value: impl Into<Value>) -> &mut Self {
        self.summary.push((key, value.into()));
        self
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Json => self.json(),
        }
    }

    fn csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            s += &format!("# {k}={}\n", cell(v));
        }
        s += &self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            s += &row.iter().map(cell).collect::<Vec<_>>().join(",");
            s.push('\n');
        }
        for (k, v) in &self.summary {
            s += &format!("# {k}={}\n", cell(v));
        }
        s
    }

    fn json(&self) -> String {
        let obj = |pairs: &[(&'static str, Value)]| {
            Value::Object(pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect::<Map<_, _>>())
        };
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Object(
                    self.columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| (c.to_string(), v.clone()))
                        .collect(),
                )
            })
            .collect();
        let doc = json!({
            "meta": obj(&self.meta),
            "rows": rows,
            "summary": obj(&self.summary),
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("tables serialise");
        s.push('\n');
        s
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::usage(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(flag),
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(cli.threads)? {
        if t == 0 {
            return Err(Error::usage("--threads must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::usage(format!("cannot start worker pool: {e}")))?;
    // Work runs on the pool; writing happens afterwards on this thread.
    let mut notes = Vec::new();
    let result = pool.install(|| -> Result<Option<(Table, &OutputArgs)>> {
        Ok(match &cli.command {
            Command::GenGraph(a) => {
                gen_graph(a, &mut notes)?;
                None
            }
            Command::TvCheck(a) => Some((tv_check(a)?, &a.output)),
            Command::RiskBound(a) => Some((risk_bound(a)?, &a.output)),
            Command::LimRun(a) => Some((lim_run(a)?, &a.output)),
            Command::LimConsistency(a) => Some((lim_consistency(a)?, &a.output)),
            Command::Moments(a) => Some((moments(a)?, &a.output)),
        })
    });
    for note in &notes {
        writeln!(stderr, "{note}")?;
    }
    if let Some((table, out)) = result? {
        emit(table, out, stdout)?;
    }
    Ok(())
}

fn emit(table: Table, out: &OutputArgs, stdout: &mut dyn Write) -> Result<()> {
    let text = table.render(out.format);
    match &out.out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_graph(path: &Path) -> Result<Network> {
    load_network(&fs::read_to_string(path)?)
}

fn gen_graph(a: &GenGraphArgs, notes: &mut Vec<String>) -> Result<()> {
    let g = match a.kind {
        GraphKind::KRegular => gen_k_regular(a.n, a.k, a.seed)?,
    };
    fs::write(&a.out, g.to_edge_list())?;
    notes.push(format!("n={} edges={} d_max={}", g.n(), g.edge_count(), g.max_degree()));
    Ok(())
}

fn spec_pair(
    null: &str,
    alt: &str,
    n: usize,
    network: Option<Arc<Network>>,
) -> Result<(ExposureSpec, ExposureSpec)> {
    let build = |name: &str| -> Result<ExposureSpec> {
        let kind = ExposureKind::parse(name)?;
        if kind.needs_network() && network.is_none() {
            return Err(Error::usage(format!("exposure mapping {} needs --graph", kind.name())));
        }
        ExposureSpec::from_kind(kind, n, network.clone())
    };
    Ok((build(null)?, build(alt)?))
}

fn tv_check(a: &TvCheckArgs) -> Result<Table> {
    let design: Design = a.design.parse()?;
    let (n, network) = match (&a.graph, a.n) {
        (Some(path), _) => {
            let g = read_graph(path)?;
            (g.n(), Some(Arc::new(g)))
        }
        (None, Some(n)) => (n, None),
        (None, None) => return Err(Error::usage("tv-check needs --n or --graph")),
    };
    let (coarse, fine) = spec_pair(&a.null, &a.alt, n, network)?;
    let report = check_refinement(&coarse, &fine)?;
    let pair = general_mixtures(coarse, fine, report, SignPattern::FirstPositive)?;
    let profile = tv_profile(&pair, &design)?;
    let mut t = Table::new(&["z", "probability", "tv"]);
    t.meta("null", pair.coarse().kind().name())
        .meta("alt", pair.fine().kind().name())
        .meta("n", n)
        .meta("design", design.label());
    t.rows = profile
        .per_z
        .iter()
        .map(|(z, w, tv)| vec![z.to_string().into(), (*w).into(), (*tv).into()])
        .collect();
    t.summary("max_tv", profile.max_tv).summary("risk_bound", profile.risk_bound);
    Ok(t)
}

fn risk_bound(a: &RiskBoundArgs) -> Result<Table> {
    let design: Design = a.design.parse()?;
    let network = match (&a.graph, a.n) {
        (Some(path), _) => read_graph(path)?,
        (None, Some(n)) => gen_k_regular(n, 4, derive_seed(a.seed, GRAPH_STREAM))?,
        (None, None) => return Err(Error::usage("risk-bound needs --n or --graph")),
    };
    let n = network.n();
    let network = Arc::new(network);
    let (coarse, fine) = spec_pair(&a.null, &a.alt, n, Some(network.clone()))?;
    let report = check_refinement(&coarse, &fine)?;
    let pair = general_mixtures(coarse, fine, report, SignPattern::FirstPositive)?;
    let bound = if n <= crate::design::DEFAULT_ENUMERATION_CAP {
        Some(tv_profile(&pair, &design)?.risk_bound)
    } else {
        None
    };
    let slots: usize = pair.sign_slots().iter().sum();
    let mc_seed = derive_seed(a.seed, REPLICATION_STREAM);
    let mut t = Table::new(&["test", "mixture_error_sum", "se", "exact"]);
    t.meta("null", pair.coarse().kind().name())
        .meta("alt", pair.fine().kind().name())
        .meta("n", n)
        .meta("design", design.label())
        .meta("seed", a.seed)
        .meta("reps", a.reps)
        .meta("risk_bound", bound.map_or(Value::Null, Value::from));
    for proc in baseline_tests(&design, network) {
        let est: Estimate = mixture_error_sum(&proc, &pair, a.reps, mc_seed)?;
        let exact = if n + slots <= EXACT_MIXTURE_LIMIT {
            Value::from(mixture_error_sum_exact(&proc, &pair)?)
        } else {
            Value::Null
        };
        t.rows.push(vec![proc.label.clone().into(), est.value.into(), est.se.into(), exact]);
    }
    Ok(t)
}

fn lim_run(a: &LimRunArgs) -> Result<Table> {
    if a.reps < 2 {
        return Err(Error::usage("--reps must be at least 2"));
    }
    let design = Design::bernoulli(a.p)?;
    let network = match (&a.graph, a.n, a.k) {
        (Some(path), _, _) => read_graph(path)?,
        (None, Some(n), Some(k)) => gen_k_regular(n, k, derive_seed(a.seed, GRAPH_STREAM))?,
        _ => return Err(Error::usage("lim-run needs --graph or both --n and --k")),
    };
    let network = Arc::new(network);
    let model: OutcomeModel = match (&a.model, &a.beta) {
        (Some(path), _) => ModelDoc::from_json(&fs::read_to_string(path)?)?.resolve(Some(&network))?,
        (None, Some(b)) => {
            let b: [f64; 3] = b
                .as_slice()
                .try_into()
                .map_err(|_| Error::usage(format!("--beta needs three values, got {}", b.len())))?;
            LimModel::homogeneous(network.clone(), b)?.into()
        }
        (None, None) => return Err(Error::usage("lim-run needs --model or --beta")),
    };
    if model.n() != network.n() {
        return Err(Error::model(format!(
            "model has {} units but the graph has {}",
            model.n(),
            network.n()
        )));
    }
    let variant: ThresholdVariant = a.variant.into();
    let estimator = SeparationEstimator::new(network.clone(), a.p)?;
    let tau = threshold(&network, variant);
    let n = network.n();
    let seed = derive_seed(a.seed, REPLICATION_STREAM);
    let g_hats = (0..a.reps)
        .into_par_iter()
        .map(|r| {
            let z = design.sample(n, &mut substream(seed, r as u64));
            estimator.estimate(&z, &model.evaluate(&z))
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut t = Table::new(&["rep", "g_hat", "tau", "reject"]);
    t.meta("n", n)
        .meta("d_max", network.max_degree())
        .meta("p", a.p)
        .meta("variant", variant.to_string())
        .meta("seed", a.seed)
        .meta("reps", a.reps);
    let mut rejections = 0usize;
    for (r, &g) in g_hats.iter().enumerate() {
        let reject = crate::lim::decide(g, tau);
        rejections += reject as usize;
        t.rows.push(vec![r.into(), g.into(), tau.into(), (reject as u8).into()]);
    }
    let mean = Estimate::from_samples(&g_hats);
    let rate = Estimate::binomial(rejections, a.reps);
    t.summary("mean_g_hat", mean.value)
        .summary("g_hat_se", mean.se)
        .summary("rejection_rate", rate.value);
    match a.truth {
        Some(Truth::Null) => {
            t.summary("type1", rate.value).summary("type1_se", rate.se);
        }
        Some(Truth::Alt) => {
            t.summary("type2", 1.0 - rate.value).summary("type2_se", rate.se);
        }
        None => {}
    }
    Ok(t)
}

fn lim_consistency(a: &LimConsistencyArgs) -> Result<Table> {
    let cfg = CurveConfig {
        family: GraphFamily::KRegular { k: a.k },
        ns: a.n.clone(),
        delta: a.delta,
        p: a.p,
        variant: a.variant.into(),
        reps: a.reps,
        seed: a.seed,
    };
    let rows = consistency_curve(&cfg, &default_alt_models)?;
    let mut t = Table::new(&[
        "n", "delta", "type1", "type1_se", "type2", "type2_se", "overall", "reps", "seed",
    ]);
    t.meta("k", a.k)
        .meta("p", a.p)
        .meta("variant", cfg.variant.to_string())
        .meta("seed", a.seed)
        .meta("reps", a.reps);
    t.rows = rows
        .into_iter()
        .map(|r| {
            vec![
                r.n.into(),
                r.delta.into(),
                r.type1.into(),
                r.type1_se.into(),
                r.type2.into(),
                r.type2_se.into(),
                r.overall.into(),
                r.reps.into(),
                r.seed.into(),
            ]
        })
        .collect();
    Ok(t)
}

fn moments(a: &MomentsArgs) -> Result<Table> {
    let closed = FractionMoments::new(a.degree, a.p)?;
    let oracle = FractionMoments::enumerated(a.degree, a.p)?;
    let mut t = Table::new(&["moment", "closed_form", "oracle"]);
    t.meta("degree", a.degree).meta("p", a.p);
    let pick = |m: &FractionMoments| [m.m1, m.m2, m.m3, m.m4, m.var];
    for ((name, c), o) in ["m1", "m2", "m3", "m4", "var"].iter().zip(pick(&closed)).zip(pick(&oracle)) {
        t.rows.push(vec![(*name).into(), c.into(), o.into()]);
    }
    Ok(t)
}
