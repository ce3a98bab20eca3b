mod error;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use seqreject::clustering::agglomerate;
use seqreject::engine::RunReport;
use seqreject::multiplicity::AdjustmentKind;
use seqreject::simulation::{default_methods, run_study};
use seqreject::{
    correlation_distance, run, AdjustmentPolicy, AggregationConfig, ClusterHierarchy, Dataset, HypothesisCollection,
    Linkage, RunConfig, Scenario, StudyConfig,
};

use crate::error::{CliError, CliResult};
use crate::io::{emit, read_text, to_json, write_csv, Table};

const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser)]
#[command(name = "seqreject", version, about = "Sequential rejection tests for clusters of regression variables")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    parallel: Option<usize>,

    /// Log progress to standard error.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a cluster tree of the covariates in a CSV file.
    Cluster(ClusterArgs),
    /// Test clusters of covariates for association with a response.
    Analyze(AnalyzeArgs),
    /// Run a simulation study from a JSON or TOML scenario.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeFormat {
    Json,
    Newick,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkageArg {
    Complete,
    Single,
    Average,
}

impl From<LinkageArg> for Linkage {
    fn from(l: LinkageArg) -> Self {
        match l {
            LinkageArg::Complete => Linkage::Complete,
            LinkageArg::Single => Linkage::Single,
            LinkageArg::Average => Linkage::Average,
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    input: PathBuf,
    /// Column to leave out of the clustering.
    #[arg(long)]
    response: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: TreeFormat,
    #[arg(long, value_enum, default_value = "complete")]
    linkage: LinkageArg,
    /// Output file (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AggregationArgs {
    /// Use a single quantile level instead of the adaptive search.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    gamma_min: f64,
    #[arg(long, default_value_t = 0.025)]
    gamma_step: f64,
}

impl AggregationArgs {
    fn config(&self) -> AggregationConfig {
        match self.gamma {
            Some(gamma) => AggregationConfig::Fixed { gamma },
            None => AggregationConfig::Adaptive { gamma_min: self.gamma_min, step: self.gamma_step },
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    input: PathBuf,
    /// Response column (default: the first column).
    #[arg(long)]
    response: Option<String>,
    #[arg(long, default_value = "hier-inherit")]
    method: String,
    /// Multiply in Shaffer factors (hier-inherit only).
    #[arg(long)]
    shaffer: bool,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 50)]
    splits: usize,
    #[arg(long, env = "SEQREJECT_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    aggregation: AggregationArgs,
    /// Fit an intercept in the partial F-tests.
    #[arg(long)]
    intercept: bool,
    /// Cluster tree to test (JSON or Newick); built by complete linkage otherwise.
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    scenario: PathBuf,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, env = "SEQREJECT_SEED")]
    seed: Option<u64>,
    /// Comma-separated methods, e.g. `single-holm,hier-inherit+shaffer`, or `all`.
    #[arg(long, default_value = "all")]
    methods: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 50)]
    splits: usize,
    #[command(flatten)]
    aggregation: AggregationArgs,
    #[arg(long)]
    intercept: bool,
    /// Report JSON (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Per-method summary table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_env("SEQREJECT_LOG").init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.parallel {
        if threads == 0 {
            return Err(CliError::Usage("--parallel must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    match cli.command {
        Command::Cluster(args) => cluster(args),
        Command::Analyze(args) => analyze(args),
        Command::Simulate(args) => simulate(args),
    }
}

fn column_index(table: &Table, name: &str, path: &Path) -> CliResult<usize> {
    table
        .index_of(name)
        .ok_or_else(|| CliError::Input { path: path.to_path_buf(), message: format!("no column named {name:?}") })
}

fn build_tree(x: &ndarray::Array2<f64>, names: &[String], linkage: Linkage) -> CliResult<ClusterHierarchy> {
    let d = correlation_distance(x.view()).map_err(|e| match e {
        seqreject::Error::ConstantColumn { index, .. } => {
            seqreject::Error::ConstantColumn { index, name: names[index].clone() }
        }
        other => other,
    })?;
    Ok(agglomerate(d.view(), linkage)?)
}

fn cluster(args: ClusterArgs) -> CliResult<()> {
    let table = Table::read(&args.input)?;
    let skip = args.response.as_deref().map(|r| column_index(&table, r, &args.input)).transpose()?;
    let (x, names) = table.design(skip);
    if names.len() < 2 {
        return Err(CliError::Input { path: args.input, message: "need at least two covariate columns".into() });
    }
    if table.rows < 2 {
        return Err(CliError::Input { path: args.input, message: "need at least two rows".into() });
    }
    let tree = build_tree(&x, &names, args.linkage.into())?;
    let text = match args.format {
        TreeFormat::Json => to_json(&serde_json::json!({
            "schema": seqreject::engine::SCHEMA,
            "variables": names,
            "hierarchy": tree.to_json(),
        }))?,
        TreeFormat::Newick => tree.to_newick(Some(&names)) + "\n",
    };
    emit(args.output.as_ref(), &text)
}

fn load_tree(path: &Path, names: &[String]) -> CliResult<ClusterHierarchy> {
    let text = read_text(path)?;
    let trimmed = text.trim_start();
    let tree = if trimmed.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(trimmed).map_err(seqreject::Error::from)?;
        ClusterHierarchy::from_json(value.get("hierarchy").unwrap_or(&value))?
    } else {
        ClusterHierarchy::from_newick(trimmed, Some(names))?
    };
    if tree.n_variables() != names.len() {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            message: format!("tree covers {} variables, data has {}", tree.n_variables(), names.len()),
        });
    }
    Ok(tree)
}

fn analyze(args: AnalyzeArgs) -> CliResult<()> {
    let kind: AdjustmentKind = args.method.parse()?;
    let policy = AdjustmentPolicy::new(kind, args.shaffer)?;
    let table = Table::read(&args.input)?;
    let response = match &args.response {
        Some(r) => column_index(&table, r, &args.input)?,
        None => 0,
    };
    if table.headers.len() < 2 {
        return Err(CliError::Input { path: args.input, message: "need a response and at least one covariate".into() });
    }
    let (x, names) = table.design(Some(response));
    let y = table.column(response);
    let dataset = Dataset::with_names(x, y, names.clone())?;
    let collection = if kind.is_hierarchical() {
        let tree = match &args.tree {
            Some(path) => load_tree(path, &names)?,
            None => build_tree(&dataset.x().to_owned(), &names, Linkage::Complete)?,
        };
        HypothesisCollection::tree(tree)
    } else {
        HypothesisCollection::singletons(dataset.p())
    };
    let config = RunConfig {
        alpha: args.alpha,
        splits: args.splits,
        seed: args.seed,
        policy,
        aggregation: args.aggregation.config(),
        intercept: args.intercept,
        ..RunConfig::default()
    };
    log::info!("analyzing {} rows, {} covariates with {}", dataset.n(), dataset.p(), policy.label());
    let output = run(&dataset, &collection, &config)?;
    let report = RunReport::new(&dataset, &collection, &config, &output)?;
    let mut value = serde_json::to_value(&report).map_err(seqreject::Error::from)?;
    value["variables"] = serde_json::json!(names);
    if let Some(tree) = collection.hierarchy() {
        value["hierarchy"] = tree.to_json();
    }
    emit(args.output.as_ref(), &to_json(&value)?)
}

fn parse_methods(spec: &str) -> CliResult<Vec<AdjustmentPolicy>> {
    if spec.trim() == "all" {
        return Ok(default_methods());
    }
    spec.split(',')
        .map(|m| {
            let m = m.trim();
            let (name, shaffer) = match m.strip_suffix("+shaffer") {
                Some(base) => (base, true),
                None => (m, false),
            };
            Ok(AdjustmentPolicy::new(name.parse()?, shaffer)?)
        })
        .collect()
}

fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = read_text(path)?;
    let bad = |message: String| CliError::Input { path: path.to_path_buf(), message };
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))
    } else {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
    }
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    runs: usize,
    fwer_count: usize,
    fwer: f64,
    #[serde(rename = "MTDs")]
    mtds: f64,
    #[serde(rename = "STDs")]
    stds: f64,
    #[serde(rename = "Perf1")]
    perf1: f64,
    #[serde(rename = "Perf2")]
    perf2: f64,
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(runs) = args.runs {
        scenario.runs = runs;
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let config = StudyConfig {
        methods: parse_methods(&args.methods)?,
        alpha: args.alpha,
        splits: args.splits,
        aggregation: args.aggregation.config(),
        intercept: args.intercept,
        ..StudyConfig::default()
    };
    log::info!("simulating {} runs", scenario.runs);
    let report = run_study(&scenario, &config)?;
    if let Some(path) = &args.csv {
        let rows: Vec<SummaryRow> = report
            .methods
            .iter()
            .map(|m| SummaryRow {
                method: &m.method,
                runs: m.runs,
                fwer_count: m.fwer_count,
                fwer: m.fwer,
                mtds: m.avg_mtd,
                stds: m.avg_std,
                perf1: m.perf1,
                perf2: m.perf2,
            })
            .collect();
        write_csv(path, &rows)?;
    }
    emit(args.output.as_ref(), &to_json(&report)?)
}
