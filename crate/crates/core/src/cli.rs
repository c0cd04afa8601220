//! Command-line front end: `synth`, `fit`, `bench` and `replay`.
//!
//! Every command writes a `manifest.json` next to its outputs recording the
//! fully resolved arguments; `replay <manifest>` re-runs the command from it.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::{robustness, run_bench, summarize, summary_csv, BenchPlan, DataSource, TraceRecord};
use crate::datagen::{synth_subspace, SynthSpec};
use crate::error::Error;
use crate::io::{matrix_to_csv, read_samples_csv, write_mask_csv, write_samples_csv, write_text, IoError};
use crate::linalg::{center_columns, DataMatrix};
use crate::objectives::{NormSpec, DEFAULT_EPS};
use crate::parallel::Execution;
use crate::solvers::{fit, Init, SolverConfig, Variant, DEFAULT_MAX_ITER, DEFAULT_TOL};

pub const TOOL_NAME: &str = "robust-pca";
pub const MANIFEST_FILE: &str = "manifest.json";

const DATA_LAYOUT: &str = "CSV files are sample-major: one row per sample, one column per feature. \
They are transposed on load so that samples become columns, and centered unless --no-center is given.";

#[derive(Debug, Parser)]
#[command(name = TOOL_NAME, version, about = "Robust PCA under l1 and l2,p reconstruction losses", after_help = DATA_LAYOUT)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded low-rank dataset with gross outliers.
    Synth(SynthArgs),
    /// Fit a projection to a CSV dataset.
    Fit(FitArgs),
    /// Compare vanilla PCA with every robust solver.
    Bench(BenchArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    Pgd,
    Momentum,
    Irls,
}

impl From<SolverArg> for Variant {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Pgd => Variant::Pgd,
            SolverArg::Momentum => Variant::Momentum,
            SolverArg::Irls => Variant::Irls,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormArg {
    Fro,
    L1,
    L2p,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    VanillaPca,
    Random,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Number of features.
    #[arg(long)]
    pub m: usize,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    /// Intrinsic dimension of the inlier subspace.
    #[arg(long)]
    pub k_true: usize,
    /// Standard deviation of the inlier noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Fraction of samples replaced by outliers, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub outlier_frac: f64,
    /// Standard deviation of the outliers.
    #[arg(long, default_value_t = 5.0)]
    pub outlier_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write a header row in the data CSV.
    #[arg(long)]
    pub header: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Solver settings shared by `fit` and `bench`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SolverOpts {
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Relative objective-change stopping threshold.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Clamp on residual column norms when building weights.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = InitArg::VanillaPca)]
    pub init: InitArg,
    /// Seed for --init random.
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    /// Write 0 for every wall-clock field so outputs are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

impl SolverOpts {
    fn config(&self, variant: Variant) -> Result<SolverConfig, CliError> {
        let init = match self.init {
            InitArg::VanillaPca => Init::VanillaPca,
            InitArg::Random => Init::RandomOrthonormal { seed: self.init_seed },
        };
        if self.max_iter == 0 {
            return Err(usage("--max-iter", "must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(usage("--tol", "must be positive"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(usage("--eps", "must be positive"));
        }
        Ok(SolverConfig { variant, max_iter: self.max_iter, tol: self.tol, eps: self.eps, init })
    }

    fn time(&self, ms: f64) -> f64 {
        if self.no_timing {
            0.0
        } else {
            ms
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Sample-major data CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// The input CSV has a header row.
    #[arg(long)]
    pub header: bool,
    /// Do not center the data on load.
    #[arg(long)]
    pub no_center: bool,
    /// Target dimension.
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = SolverArg::Pgd)]
    pub solver: SolverArg,
    #[arg(long, value_enum, default_value_t = NormArg::L1)]
    pub norm: NormArg,
    /// Exponent for --norm l2p, in (0, 2].
    #[arg(long)]
    pub p: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver_opts: SolverOpts,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// Sample-major data CSV. Without it the synthetic flags are used.
    #[arg(long, conflicts_with_all = ["m", "n", "k_true"])]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub no_center: bool,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k_true: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_frac: f64,
    #[arg(long, default_value_t = 5.0)]
    pub outlier_scale: f64,
    /// Base seed; repeat r uses seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target dimension (defaults to --k-true for synthetic data).
    #[arg(long)]
    pub k: Option<usize>,
    /// Losses to benchmark, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![NormArg::L1])]
    pub norm: Vec<NormArg>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Robust solvers to run next to vanilla PCA, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![SolverArg::Pgd, SolverArg::Momentum, SolverArg::Irls])]
    pub solvers: Vec<SolverArg>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Run repeats one after another on the calling thread.
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver_opts: SolverOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Path to a manifest.json written by a previous run.
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "snake_case")]
pub enum ManifestCommand {
    Synth(SynthArgs),
    Fit(FitArgs),
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    #[serde(flatten)]
    pub command: ManifestCommand,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values (exit code 2).
    Usage(String),
    /// Runtime or I/O failure (exit code 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn usage(flag: &str, message: &str) -> CliError {
    CliError::Usage(format!("invalid value for {flag}: {message}"))
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parse `argv` and run. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Replay(a) => cmd_replay(&a.manifest),
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::from(IoError::io(path, e)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    Ok(write_text(path, &text)?)
}

fn write_manifest(out: &Path, command: ManifestCommand, seed: Option<u64>, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Result<(), CliError> {
    let manifest = RunManifest {
        tool: TOOL_NAME.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        seed,
        inputs,
        outputs,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)
}

fn synth_spec(m: usize, n: usize, k_true: usize, noise: f64, frac: f64, scale: f64, seed: u64) -> Result<SynthSpec, CliError> {
    if m == 0 {
        return Err(usage("--m", "must be at least 1"));
    }
    if n == 0 {
        return Err(usage("--n", "must be at least 1"));
    }
    if k_true == 0 || k_true > m {
        return Err(usage("--k-true", &format!("must lie in [1, {m}], got {k_true}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(usage("--noise", &format!("must be nonnegative, got {noise}")));
    }
    if !(0.0..1.0).contains(&frac) {
        return Err(usage("--outlier-frac", &format!("must lie in [0, 1), got {frac}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(usage("--outlier-scale", &format!("must be positive, got {scale}")));
    }
    Ok(SynthSpec { m, n, k_true, noise_sigma: noise, outlier_frac: frac, outlier_scale: scale, seed })
}

fn norm_spec(norm: NormArg, p: Option<f64>) -> Result<NormSpec, CliError> {
    match norm {
        NormArg::Fro => Ok(NormSpec::FroSquared),
        NormArg::L1 => Ok(NormSpec::ElementwiseL1),
        NormArg::L2p => {
            let p = p.ok_or_else(|| CliError::Usage("--norm l2p requires --p".into()))?;
            NormSpec::l2p(p).map_err(|_| usage("--p", &format!("must lie in (0, 2], got {p}")))
        }
    }
}

fn load_data(path: &Path, header: bool, no_center: bool) -> Result<DataMatrix, CliError> {
    let x = read_samples_csv(path, header)?;
    Ok(if no_center { x } else { center_columns(&x).0 })
}

pub fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let spec = synth_spec(a.m, a.n, a.k_true, a.noise, a.outlier_frac, a.outlier_scale, a.seed)?;
    let data = synth_subspace(&spec)?;
    create_dir(&a.out)?;
    let files = ["data.csv", "w_true.csv", "outlier_mask.csv"].map(|f| a.out.join(f));
    write_samples_csv(&files[0], data.data.values(), a.header)?;
    write_text(&files[1], &matrix_to_csv(data.w_true.values(), None))?;
    write_mask_csv(&files[2], &data.outlier_mask)?;
    write_manifest(&a.out, ManifestCommand::Synth(a.clone()), Some(a.seed), Vec::new(), files.to_vec())
}

pub fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let spec = norm_spec(a.norm, a.p)?;
    let cfg = a.solver_opts.config(a.solver.into())?;
    let x = load_data(&a.input, a.header, a.no_center)?;
    let limit = x.features().min(x.samples());
    if a.k == 0 || a.k > limit {
        return Err(usage("--k", &format!("must lie in [1, {limit}] for this input, got {}", a.k)));
    }
    let result = fit(&x, a.k, spec, &cfg)?;
    let solver = if spec == NormSpec::FroSquared { crate::bench::VANILLA } else { cfg.variant.name() };
    let mut trace = TraceRecord::new(solver, spec, &result);
    trace.wall_time_ms = a.solver_opts.time(trace.wall_time_ms);

    create_dir(&a.out)?;
    let proj = a.out.join("projection.csv");
    let trace_path = a.out.join("trace.json");
    write_text(&proj, &matrix_to_csv(result.projection.values(), None))?;
    write_json(&trace_path, &trace)?;
    let seed = matches!(cfg.init, Init::RandomOrthonormal { .. }).then_some(a.solver_opts.init_seed);
    write_manifest(&a.out, ManifestCommand::Fit(a.clone()), seed, vec![a.input.clone()], vec![proj, trace_path])
}

pub fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    if a.repeats == 0 {
        return Err(usage("--repeats", "must be at least 1"));
    }
    let norms = a.norm.iter().map(|&n| norm_spec(n, a.p)).collect::<Result<Vec<_>, _>>()?;
    let variants: Vec<Variant> = a.solvers.iter().map(|&s| s.into()).collect();
    let config = a.solver_opts.config(Variant::Pgd)?;

    let (source, k) = match &a.input {
        Some(path) => {
            if a.repeats != 1 {
                return Err(usage("--repeats", "must be 1 with --input"));
            }
            let k = a.k.ok_or_else(|| CliError::Usage("--input requires --k".into()))?;
            (DataSource::Fixed(load_data(path, a.header, a.no_center)?), k)
        }
        None => {
            let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| CliError::Usage(format!("{flag} is required without --input")));
            let spec = synth_spec(need(a.m, "--m")?, need(a.n, "--n")?, need(a.k_true, "--k-true")?, a.noise, a.outlier_frac, a.outlier_scale, a.seed)?;
            (DataSource::Synthetic(spec), a.k.unwrap_or(spec.k_true))
        }
    };
    let (m, n) = match &source {
        DataSource::Fixed(x) => (x.features(), x.samples()),
        DataSource::Synthetic(s) => (s.m, s.n),
    };
    if k == 0 || k > m.min(n) {
        return Err(usage("--k", &format!("must lie in [1, {}], got {k}", m.min(n))));
    }

    let plan = BenchPlan { source, k, norms, variants, repeats: a.repeats, config };
    let exec = if a.sequential { Execution::Sequential } else { Execution::Auto };
    let mut outcomes = run_bench(&plan, exec)?;
    for run in outcomes.iter_mut().flat_map(|o| o.runs.iter_mut()) {
        run.report.eval.wall_time_ms = a.solver_opts.time(run.report.eval.wall_time_ms);
        run.trace.wall_time_ms = a.solver_opts.time(run.trace.wall_time_ms);
    }

    #[derive(Serialize)]
    struct RepeatTrace<'a> {
        repeat: usize,
        #[serde(flatten)]
        trace: &'a TraceRecord,
    }
    #[derive(Serialize)]
    struct Robustness {
        repeats: usize,
        reference: String,
        results: Vec<crate::bench::RobustnessRow>,
    }

    let reports: Vec<_> = outcomes.iter().flat_map(|o| o.runs.iter().map(|r| &r.report)).collect();
    let traces: Vec<_> = outcomes
        .iter()
        .flat_map(|o| o.runs.iter().map(move |r| RepeatTrace { repeat: o.repeat, trace: &r.trace }))
        .collect();
    let rob = Robustness {
        repeats: a.repeats,
        reference: reports.first().map(|r| r.reference.clone()).unwrap_or_default(),
        results: robustness(&outcomes),
    };
    let summary = summary_csv(&summarize(&outcomes));

    create_dir(&a.out)?;
    let files = ["reports.json", "traces.json", "summary.csv", "robustness.json"].map(|f| a.out.join(f));
    write_json(&files[0], &reports)?;
    write_json(&files[1], &traces)?;
    write_text(&files[2], &summary)?;
    write_json(&files[3], &rob)?;
    print!("{summary}");
    for r in &rob.results {
        let p = r.p.map(|p| format!(" p={p}")).unwrap_or_default();
        println!("{} {}{}: beats vanilla in {}/{} repeats", r.solver, r.norm, p, r.wins, r.repeats);
    }
    let inputs = a.input.iter().cloned().collect();
    let seed = a.input.is_none().then_some(a.seed);
    write_manifest(&a.out, ManifestCommand::Bench(a.clone()), seed, inputs, files.to_vec())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::from(IoError::io(path, e)))?;
    serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn cmd_replay(path: &Path) -> Result<(), CliError> {
    let manifest = read_manifest(path)?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by {} {}, replaying with {}",
            manifest.tool,
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    match manifest.command {
        ManifestCommand::Synth(a) => cmd_synth(&a),
        ManifestCommand::Fit(a) => cmd_fit(&a),
        ManifestCommand::Bench(a) => cmd_bench(&a),
    }
}
