//! `sparsica` command line: `simulate`, `fit`, `bench`, `export-maps` and
//! `replay`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Every command
//! writes a `manifest.json` into its output directory; `replay` re-runs the
//! recorded arguments and reproduces every other output byte for byte.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::baselines::{self, Unmixer, ALGORITHMS};
use crate::error::Error;
use crate::evaluate::{self, BenchmarkAlgorithm, TrialOutcome};
use crate::io::{load_matrix, save_matrix, Format, RNG_ALGORITHM};
use crate::preprocess::{mixing_timecourses, whiten};
use crate::simgen::{self, SimParams, GRID};
use crate::sparse_ica::{self, SparseIcaConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "sparsica", version, about = "Sparse ICA, classical baselines and a synthetic benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic digit-source dataset.
    Simulate(SimulateArgs),
    /// Whiten a data matrix and decompose it.
    Fit(FitArgs),
    /// Run the repeated-trial benchmark.
    Bench(BenchArgs),
    /// Render component maps as grayscale PGM images.
    ExportMaps(ExportArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be non-negative, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn ar_coefficient(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..1.0).contains(&v) => Ok(v),
        Ok(v) => Err(format!("must lie in [0, 1), got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.4, value_parser = positive, allow_negative_numbers = true)]
    snr: f64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(2..))]
    frames: u64,
    #[arg(long, default_value_t = 0.47, value_parser = ar_coefficient, allow_negative_numbers = true)]
    ar: f64,
    #[arg(long, default_value_t = 6.0, value_parser = positive, allow_negative_numbers = true)]
    fwhm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    SparseIca,
    Fastica,
    Infomax,
    Amuse,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::SparseIca => "sparse-ica",
            Algo::Fastica => "fastica",
            Algo::Infomax => "infomax",
            Algo::Amuse => "amuse",
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Observations x locations matrix (`.csv` or SPIM binary); decomposed spatially.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    algo: Algo,
    /// Components to keep. Defaults to 3 only for `simulate` output (a `params.json` sits next to the input).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    q: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = positive, allow_negative_numbers = true, conflicts_with = "nu_grid")]
    nu: Option<f64>,
    /// Comma-separated candidate penalties, chosen by information criterion.
    #[arg(long, value_delimiter = ',', value_parser = positive, allow_negative_numbers = true)]
    nu_grid: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    trials: u64,
    /// Comma-separated algorithm names, or `all`.
    #[arg(long, default_value = "all")]
    algos: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Fixed sparse ICA penalty; otherwise chosen on a held-out dataset.
    #[arg(long, value_parser = positive, allow_negative_numbers = true)]
    nu: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Shape {
    rows: usize,
    cols: usize,
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
        let rows = r.trim().parse::<usize>().map_err(|e| e.to_string())?;
        let cols = c.trim().parse::<usize>().map_err(|e| e.to_string())?;
        if rows == 0 || cols == 0 {
            return Err("dimensions must be positive".into());
        }
        Ok(Shape { rows, cols })
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    components: PathBuf,
    #[arg(long, default_value_t = Shape { rows: GRID, cols: GRID })]
    shape: Shape,
    #[arg(long)]
    out: PathBuf,
    /// Zero entries with |value| below this before scaling.
    #[arg(long, value_parser = non_negative)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved arguments, replayable as `sparsica <args>`.
    pub args: Vec<String>,
    pub params: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub rng_algorithm: String,
    pub wall_time_secs: f64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

struct Outcome {
    args: Vec<String>,
    params: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    out_dir: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    configure_threads();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("SPARSICA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // fails only if the pool already exists, e.g. on a second in-process run
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn execute(command: Command) -> CliResult<()> {
    let started = Instant::now();
    let (name, outcome) = match command {
        Command::Simulate(a) => ("simulate", cmd_simulate(a)?),
        Command::Fit(a) => ("fit", cmd_fit(a)?),
        Command::Bench(a) => ("bench", cmd_bench(a)?),
        Command::ExportMaps(a) => ("export-maps", cmd_export_maps(a)?),
        Command::Replay(a) => return cmd_replay(a),
    };
    let manifest = RunManifest {
        tool: "sparsica".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: name.into(),
        args: outcome.args,
        params: outcome.params,
        inputs: outcome.inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
        rng_algorithm: RNG_ALGORITHM.into(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&outcome.out_dir.join(MANIFEST), &manifest)?;
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(Error::io(dir, e)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let body = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
    fs::write(path, body).map_err(|e| CliError::Runtime(Error::io(path, e)))
}

fn path_arg(p: &Path) -> String {
    p.display().to_string()
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<Outcome> {
    let params = SimParams {
        frames: a.frames as usize,
        snr: a.snr,
        ar_coeff: a.ar,
        fwhm: a.fwhm,
        field_sd: 1.0,
        seed: a.seed,
    };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let ds = simgen::generate(&params)?;
    create_dir(&a.out)?;
    let mut outputs = Vec::new();
    for (name, m) in [
        ("sources.bin", &ds.sources),
        ("timecourses.bin", &ds.timecourses),
        ("observed.bin", &ds.observed),
    ] {
        let path = a.out.join(name);
        save_matrix(m, &path, Format::Binary)?;
        outputs.push(path);
    }
    for (name, mask) in ["mask_1.csv", "mask_22.csv", "mask_333.csv"]
        .iter()
        .zip(simgen::digit_masks())
    {
        let text: String = mask
            .chunks(GRID)
            .map(|row| {
                let cells: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
                cells.join(",") + "\n"
            })
            .collect();
        let path = a.out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        outputs.push(path);
    }
    let params_json = json!({
        "params": params,
        "noise_sigma2": ds.noise_sigma2,
        "grid": [GRID, GRID],
        "rng_algorithm": RNG_ALGORITHM,
    });
    let path = a.out.join("params.json");
    write_json(&path, &params_json)?;
    outputs.push(path);
    let args = vec![
        "simulate".into(),
        "--out".into(),
        path_arg(&a.out),
        "--seed".into(),
        a.seed.to_string(),
        "--snr".into(),
        format!("{:?}", a.snr),
        "--frames".into(),
        a.frames.to_string(),
        "--ar".into(),
        format!("{:?}", a.ar),
        "--fwhm".into(),
        format!("{:?}", a.fwhm),
    ];
    Ok(Outcome {
        args,
        params: json!({ "sim": params, "noise_sigma2": ds.noise_sigma2 }),
        inputs: vec![],
        outputs,
        out_dir: a.out,
    })
}

fn cmd_fit(a: FitArgs) -> CliResult<Outcome> {
    let q = match a.q {
        Some(q) => q as usize,
        None => {
            let from_simulate = a
                .input
                .parent()
                .map(|d| d.join("params.json").is_file())
                .unwrap_or(false);
            if !from_simulate {
                return Err(CliError::Usage(
                    "--q is required unless the input was written by `simulate`".into(),
                ));
            }
            simgen::N_SOURCES
        }
    };
    if a.algo != Algo::SparseIca && (a.nu.is_some() || a.nu_grid.is_some()) {
        return Err(CliError::Usage("--nu/--nu-grid only apply to --algo sparse-ica".into()));
    }
    let x = load_matrix(&a.input, Format::from_path(&a.input))?;
    let w = whiten(&x.transpose(), q).map_err(|e| match e {
        Error::Value(msg) => CliError::Usage(msg),
        other => CliError::Runtime(other),
    })?;
    if a.algo == Algo::Amuse && a.seed.is_some() {
        eprintln!("warning: amuse is deterministic; --seed is ignored");
    }
    let seed = a.seed.unwrap_or(0);

    let (maps, rotation, model) = match a.algo {
        Algo::SparseIca => {
            let base = SparseIcaConfig::default().with_seed(seed);
            let (nu, table) = match (a.nu, &a.nu_grid) {
                (Some(nu), _) => (nu, None),
                (None, grid) => {
                    let grid = grid.clone().unwrap_or_else(sparse_ica::default_nu_grid);
                    let (nu, table) = sparse_ica::select_nu(&w.xw, &grid, &base)?;
                    (nu, Some(table))
                }
            };
            let fitted = sparse_ica::fit(&w.xw, &SparseIcaConfig { nu, ..base })?;
            if !fitted.converged {
                eprintln!("warning: sparse ICA hit max_iters before converging");
            }
            let mut meta = serde_json::to_value(fitted.metadata()).map_err(Error::from)?;
            meta["algorithm"] = json!("sparse-ica");
            meta["nonzeros"] = json!(fitted.v.count_nonzero());
            if let Some(table) = table {
                meta["nu_selection"] = json!(table
                    .iter()
                    .map(|(nu, score)| json!({ "nu": nu, "score": score }))
                    .collect::<Vec<_>>());
            }
            (fitted.v, fitted.u, meta)
        }
        other => {
            let unmixer = baselines::by_name(other.name(), 1.0)?;
            let res = unmixer.unmix(&w.xw, seed)?;
            let meta = json!({
                "algorithm": res.algorithm,
                "iterations": res.iterations,
                "converged": res.converged,
                "seed": if unmixer.is_deterministic() { None } else { Some(seed) },
                "warnings": res.warnings,
            });
            (res.sources, res.mixing, meta)
        }
    };

    create_dir(&a.out)?;
    let components = a.out.join("components.bin");
    save_matrix(&maps, &components, Format::Binary)?;
    let timecourses = a.out.join("timecourses.bin");
    save_matrix(&mixing_timecourses(&w, &rotation)?, &timecourses, Format::Binary)?;
    let model_path = a.out.join("model.json");
    write_json(&model_path, &model)?;

    let mut args = vec![
        "fit".into(),
        "--input".into(),
        path_arg(&a.input),
        "--algo".into(),
        a.algo.name().into(),
        "--q".into(),
        q.to_string(),
        "--out".into(),
        path_arg(&a.out),
    ];
    if let Some(nu) = a.nu {
        args.extend(["--nu".into(), format!("{nu:?}")]);
    }
    if let Some(grid) = &a.nu_grid {
        let list: Vec<String> = grid.iter().map(|v| format!("{v:?}")).collect();
        args.extend(["--nu-grid".into(), list.join(",")]);
    }
    if let Some(s) = a.seed {
        args.extend(["--seed".into(), s.to_string()]);
    }
    Ok(Outcome {
        args,
        params: json!({ "q": q, "seed": seed, "model": model }),
        inputs: vec![a.input],
        outputs: vec![components, timecourses, model_path],
        out_dir: a.out,
    })
}

fn parse_algos(list: &str) -> CliResult<Vec<String>> {
    if list.trim() == "all" {
        return Ok(ALGORITHMS.iter().map(|s| s.to_string()).collect());
    }
    let mut names = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if !ALGORITHMS.contains(&name) {
            return Err(CliError::Usage(format!(
                "--algos: unknown algorithm `{name}`; expected `all` or a list of {}",
                ALGORITHMS.join(", ")
            )));
        }
        if !names.iter().any(|n| n == name) {
            names.push(name.to_string());
        }
    }
    if names.is_empty() {
        return Err(CliError::Usage("--algos is empty".into()));
    }
    Ok(names)
}

fn cmd_bench(a: BenchArgs) -> CliResult<Outcome> {
    let names = parse_algos(&a.algos)?;
    let params = SimParams::default();
    let mut selection = serde_json::Value::Null;
    let nu = match a.nu {
        Some(nu) => nu,
        None if names.iter().any(|n| n == "sparse-ica") => {
            let grid = sparse_ica::default_nu_grid();
            let (nu, table) =
                evaluate::select_benchmark_nu(&params, a.seed, &grid, &SparseIcaConfig::default())?;
            selection = json!({
                "heldout_seed": evaluate::heldout_seed(a.seed),
                "chosen": nu,
                "table": table.iter().map(|(nu, s)| json!({ "nu": nu, "score": s })).collect::<Vec<_>>(),
            });
            nu
        }
        None => SparseIcaConfig::default().nu,
    };
    let unmixers: Vec<Box<dyn Unmixer>> = names
        .iter()
        .map(|n| baselines::by_name(n, nu))
        .collect::<Result<_, _>>()?;
    let refs: Vec<&dyn BenchmarkAlgorithm> = unmixers.iter().map(|u| u as &dyn BenchmarkAlgorithm).collect();
    let report = evaluate::run_benchmark(&refs, a.trials as usize, &params, a.seed)?;
    create_dir(&a.out)?;
    evaluate::write_report(&report, &a.out)?;
    let mut outputs: Vec<PathBuf> = ["report.json", "trials.csv", "summary.csv", "plot_data.csv"]
        .iter()
        .map(|f| a.out.join(f))
        .collect();
    if !selection.is_null() {
        let path = a.out.join("nu_selection.json");
        write_json(&path, &selection)?;
        outputs.push(path);
    }

    for alg in &report.algorithms {
        let agg = &alg.aggregate;
        eprintln!(
            "{:<11} mean {:.4}  sd {:.4}  n {}  failed {}",
            alg.name,
            agg.mean.unwrap_or(f64::NAN),
            agg.sd.unwrap_or(f64::NAN),
            agg.n,
            agg.failures
        );
    }

    let mut args = vec![
        "bench".into(),
        "--trials".into(),
        a.trials.to_string(),
        "--algos".into(),
        names.join(","),
        "--seed".into(),
        a.seed.to_string(),
        "--out".into(),
        path_arg(&a.out),
    ];
    if let Some(nu) = a.nu {
        args.extend(["--nu".into(), format!("{nu:?}")]);
    }
    let outcome = Outcome {
        args,
        params: json!({ "nu": nu, "nu_selection": selection, "sim": params }),
        inputs: vec![],
        outputs,
        out_dir: a.out,
    };

    let dead: Vec<&str> = report
        .algorithms
        .iter()
        .filter(|alg| alg.trials.iter().all(|t| matches!(t.outcome, TrialOutcome::Failed { .. })))
        .map(|alg| alg.name.as_str())
        .collect();
    if !dead.is_empty() {
        return Err(CliError::Runtime(Error::Divergence(format!(
            "every trial failed for: {}",
            dead.join(", ")
        ))));
    }
    Ok(outcome)
}

/// 8-bit grayscale rendering of one map (row-major, `rows x cols`).
///
/// With a threshold, entries with `|v| < t` are zeroed first; if nothing
/// survives the image is black. Otherwise values are min-max scaled to
/// 0..=255, and a constant map renders as uniform 128.
pub fn render_map(values: &[f64], threshold: Option<f64>) -> Vec<u8> {
    let kept: Vec<f64> = match threshold {
        Some(t) => values.iter().map(|&v| if v.abs() < t { 0.0 } else { v }).collect(),
        None => values.to_vec(),
    };
    if threshold.is_some() && kept.iter().all(|&v| v == 0.0) {
        return vec![0; kept.len()];
    }
    let lo = kept.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = kept.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![128; kept.len()];
    }
    kept.iter()
        .map(|&v| ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Binary PGM (`P5`, maxval 255).
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

fn cmd_export_maps(a: ExportArgs) -> CliResult<Outcome> {
    let comps = load_matrix(&a.components, Format::from_path(&a.components))?;
    if a.shape.rows * a.shape.cols != comps.rows() {
        return Err(CliError::Usage(format!(
            "--shape {} covers {} pixels but the components have {} rows",
            a.shape,
            a.shape.rows * a.shape.cols,
            comps.rows()
        )));
    }
    create_dir(&a.out)?;
    let mut outputs = Vec::new();
    for k in 0..comps.cols() {
        let pixels = render_map(&comps.column(k), a.threshold);
        let path = a.out.join(format!("component_{k}.pgm"));
        fs::write(&path, encode_pgm(a.shape.cols, a.shape.rows, &pixels)).map_err(|e| Error::io(&path, e))?;
        outputs.push(path);
    }
    let mut args = vec![
        "export-maps".into(),
        "--components".into(),
        path_arg(&a.components),
        "--shape".into(),
        a.shape.to_string(),
        "--out".into(),
        path_arg(&a.out),
    ];
    if let Some(t) = a.threshold {
        args.extend(["--threshold".into(), format!("{t:?}")]);
    }
    Ok(Outcome {
        args,
        params: json!({ "shape": [a.shape.rows, a.shape.cols], "threshold": a.threshold }),
        inputs: vec![a.components],
        outputs,
        out_dir: a.out,
    })
}

fn cmd_replay(a: ReplayArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.manifest).map_err(|e| Error::io(&a.manifest, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(Error::from)?;
    let mut args = manifest.args.clone();
    if let Some(out) = &a.out {
        let pos = args
            .iter()
            .position(|s| s == "--out")
            .ok_or_else(|| CliError::Usage("manifest has no --out argument".into()))?;
        args[pos + 1] = path_arg(out);
    }
    let argv = std::iter::once("sparsica".to_string()).chain(args);
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(format!("manifest arguments: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage("a manifest cannot replay another replay".into()));
    }
    execute(cli.command)
}
