//! Command-line front end: run one walk and write its artifacts, sweep a
//! nonlinearity grid, fit the collision-time law, or classify a run's
//! dynamical phase.
//!
//! Exit codes: 0 success, 1 runtime failure (simulation or file errors),
//! 2 usage errors (bad flags or an empty sweep range), 3 indeterminate
//! classification.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use nlogb::analysis::{ALPHA_BOUNDARY_BALLISTIC, ALPHA_BOUNDARY_CHAOTIC};
use nlogb::io::{
    DENSITY_GRID_FILE, DISTRIBUTION_FILE, FIT_REPORT_FILE, MANIFEST_FILE, SUMMARY_FILE,
    SWEEP_INDEX_FILE,
};
use nlogb::{
    analyze_run, analyze_run_with, fit_hyperbola, read_manifest_json, read_summary_json,
    read_sweep_index, tail_stats, write_density_grid, write_distribution_csv, write_fit_report,
    write_manifest_json, write_summary_json, write_sweep_index, Classification, CoinOp,
    InitialCondition, PhaseRule, ProbabilityDist, RunAnalysis, RunManifest, RunSummary,
    SimConfig, SiteAmplitude, SweepIndexRow,
};

#[derive(Parser)]
#[command(
    name = "nlogb",
    version,
    about = "Nonlinear optical Galton board: a coined walk on the line with an \
             intensity-dependent phase at every site",
    after_help = "The default output directory is $NLOGB_OUT_DIR, or the working \
                  directory if that is unset."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one walk and write distribution, density grid, summary,
    /// and manifest
    Run(RunArgs),
    /// Run every alpha on a grid and write per-run summaries plus a sweep
    /// index
    Sweep(SweepArgs),
    /// Fit 1/t_col = a/alpha + b to the collision times of a sweep
    Fit(FitArgs),
    /// Assign a dynamical phase (I, II, III) to one run and show the
    /// evidence
    Classify(ClassifyArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Kerr nonlinearity strength
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    alpha: f64,
    /// Number of walk steps
    #[arg(long, default_value_t = 300)]
    steps: u32,
    /// Start state: "symmetric", "updelta", or a path to a custom state
    /// file (CSV lines "m,re_u,im_u,re_d,im_d")
    #[arg(long, default_value = "symmetric")]
    init: String,
    /// Phase rule applied before each coin toss
    #[arg(long, default_value = "kerr", value_parser = ["kerr", "none", "linear", "quadratic"])]
    phase: String,
    /// Phase scale for the linear and quadratic rules
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phi0: f64,
    /// Soliton window halfwidth (sites on each side of the window peak)
    #[arg(long, default_value_t = 8)]
    dm: i64,
    /// Record a snapshot every this many steps (t = 0 and t = steps are
    /// always recorded)
    #[arg(long, default_value_t = 10)]
    record_every: u32,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-run the exact configuration stored in a manifest, ignoring
    /// --alpha/--steps/--init/--phase/--phi0/--dm/--record-every
    #[arg(long, value_name = "MANIFEST")]
    from_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// First alpha of the grid
    #[arg(long, allow_negative_numbers = true)]
    alpha_from: f64,
    /// Last alpha of the grid (inclusive)
    #[arg(long, allow_negative_numbers = true)]
    alpha_to: f64,
    /// Grid spacing
    #[arg(long, allow_negative_numbers = true)]
    alpha_step: f64,
    /// Number of walk steps per run
    #[arg(long, default_value_t = 2000)]
    steps: u32,
    /// Soliton window halfwidth
    #[arg(long, default_value_t = 8)]
    dm: i64,
    /// Worker threads; the artifacts are identical for any job count
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep index to fit [default: <out dir>/sweep_index.csv]
    #[arg(long)]
    index: Option<PathBuf>,
    /// Directory for fit_report.txt [default: the index's directory]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Classify an existing run directory by its summary.json
    #[arg(long, value_name = "DIR", conflicts_with_all = ["alpha", "steps", "dm"])]
    dir: Option<PathBuf>,
    /// Kerr nonlinearity strength for an inline symmetric run
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Number of walk steps for an inline run
    #[arg(long, default_value_t = 1000)]
    steps: u32,
    /// Soliton window halfwidth for an inline run
    #[arg(long, default_value_t = 8)]
    dm: i64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Classify(args) => cmd_classify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    eprintln!("Run `nlogb help` for usage.");
    ExitCode::from(2)
}

/// --out flag, then $NLOGB_OUT_DIR, then the working directory.
fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("NLOGB_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn parse_init(text: &str) -> Result<InitialCondition> {
    match text {
        "symmetric" => Ok(InitialCondition::SymmetricDelta),
        "updelta" => Ok(InitialCondition::UpDelta),
        path => read_custom_init(Path::new(path))
            .with_context(|| format!("reading custom start state {path:?}")),
    }
}

/// Custom start states are CSV lines "m,re_u,im_u,re_d,im_d"; blank lines
/// and lines starting with '#' are skipped.
fn read_custom_init(path: &Path) -> Result<InitialCondition> {
    let text = fs::read_to_string(path)?;
    let mut sites = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            bail!("line {}: expected m,re_u,im_u,re_d,im_d", i + 1);
        }
        let m: i64 = fields[0]
            .parse()
            .with_context(|| format!("line {}: bad site index {:?}", i + 1, fields[0]))?;
        let mut reals = [0.0f64; 4];
        for (k, field) in fields[1..].iter().enumerate() {
            reals[k] = field
                .parse()
                .with_context(|| format!("line {}: bad amplitude {field:?}", i + 1))?;
        }
        sites.push(SiteAmplitude {
            m,
            u: Complex64::new(reals[0], reals[1]),
            d: Complex64::new(reals[2], reals[3]),
        });
    }
    if sites.is_empty() {
        bail!("no sites in {path:?}");
    }
    Ok(InitialCondition::Custom { sites })
}

fn build_config(args: &RunArgs) -> Result<SimConfig, String> {
    if !args.alpha.is_finite() {
        return Err(format!("--alpha must be finite, got {}", args.alpha));
    }
    if !args.phi0.is_finite() {
        return Err(format!("--phi0 must be finite, got {}", args.phi0));
    }
    if args.record_every == 0 {
        return Err("--record-every must be at least 1".to_string());
    }
    if args.dm < 1 {
        return Err(format!("--dm must be at least 1, got {}", args.dm));
    }
    let phase = match args.phase.as_str() {
        "kerr" => PhaseRule::Kerr { alpha: args.alpha },
        "none" => PhaseRule::None,
        "linear" => PhaseRule::Linear { phi0: args.phi0 },
        "quadratic" => PhaseRule::Quadratic { phi0: args.phi0 },
        other => return Err(format!("unknown phase rule {other:?}")),
    };
    let init = match parse_init(&args.init) {
        Ok(init) => init,
        Err(err) => return Err(format!("{err:#}")),
    };
    Ok(SimConfig {
        phase,
        coin: CoinOp::hadamard(),
        init,
        steps: args.steps,
        record_every: args.record_every,
    })
}

fn create_artifact(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {path:?}"))?;
    Ok(BufWriter::new(file))
}

/// Simulates one run and writes all four artifacts into `dir`.
fn write_run_artifacts(dir: &Path, config: &SimConfig, halfwidth: i64) -> Result<RunAnalysis> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {dir:?}"))?;
    let started = Instant::now();
    let steps = config.steps;
    let every = config.record_every;
    let mut snapshots: Vec<ProbabilityDist> = Vec::new();
    let analysis = analyze_run_with(config, halfwidth, |dist| {
        let t = dist.t();
        if t % every == 0 || t == steps {
            snapshots.push(dist.clone());
        }
    })?;

    let mut w = create_artifact(dir, DISTRIBUTION_FILE)?;
    write_distribution_csv(&mut w, &snapshots)?;
    w.flush()?;

    let mut w = create_artifact(dir, DENSITY_GRID_FILE)?;
    write_density_grid(&mut w, &snapshots)?;
    w.flush()?;

    let summary = RunSummary::from_analysis(&analysis);
    let mut w = create_artifact(dir, SUMMARY_FILE)?;
    write_summary_json(&mut w, &summary)?;
    w.flush()?;

    let artifacts = vec![
        DISTRIBUTION_FILE.to_string(),
        DENSITY_GRID_FILE.to_string(),
        SUMMARY_FILE.to_string(),
    ];
    let manifest = RunManifest::new(
        config.clone(),
        halfwidth,
        artifacts,
        started.elapsed().as_secs_f64(),
    );
    let mut w = create_artifact(dir, MANIFEST_FILE)?;
    write_manifest_json(&mut w, &manifest)?;
    w.flush()?;

    Ok(analysis)
}

fn describe_phase(analysis: &RunAnalysis) -> String {
    match &analysis.classification {
        Classification::Label(label) => label.to_string(),
        Classification::Indeterminate { reason } => format!("indeterminate ({reason})"),
    }
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let (config, halfwidth) = match &args.from_manifest {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {path:?}"))?;
            let manifest = read_manifest_json(BufReader::new(file))
                .with_context(|| format!("reading {path:?}"))?;
            (manifest.config, manifest.halfwidth)
        }
        None => match build_config(args) {
            Ok(config) => (config, args.dm),
            Err(message) => return Ok(usage_error(&message)),
        },
    };
    let dir = out_dir(&args.out);
    let analysis = write_run_artifacts(&dir, &config, halfwidth)?;

    if let Some(err) = &analysis.collision_error {
        eprintln!("warning: {err}; collision statistics were left out of the summary");
    }
    if let Some(alpha) = config.phase.kerr_alpha() {
        println!("alpha = {alpha}  steps = {}", config.steps);
    } else {
        println!("steps = {}", config.steps);
    }
    println!("phase = {}", describe_phase(&analysis));
    if let Some(event) = &analysis.collision {
        println!(
            "collision: t_col = {}  intensity before = {:.4}  after = {:.4}",
            event.t_col, event.intensity_before, event.intensity_after
        );
    }
    println!("artifacts written to {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

/// The alpha grid is laid out in integer nanounits so that accumulated
/// float error can never add or drop a grid point.
fn alpha_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(from.is_finite() && to.is_finite() && step.is_finite()) {
        return Err("alpha range bounds must be finite".to_string());
    }
    if step <= 0.0 {
        return Err(format!("--alpha-step must be positive, got {step}"));
    }
    const SCALE: f64 = 1e9;
    let from_n = (from * SCALE).round() as i64;
    let to_n = (to * SCALE).round() as i64;
    let step_n = (step * SCALE).round() as i64;
    if step_n == 0 {
        return Err(format!("--alpha-step {step} is below the 1e-9 grid resolution"));
    }
    if to_n < from_n {
        return Err(format!("empty alpha range: from {from} to {to}"));
    }
    Ok((0..=(to_n - from_n) / step_n)
        .map(|k| (from_n + k * step_n) as f64 / SCALE)
        .collect())
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode> {
    let alphas = match alpha_grid(args.alpha_from, args.alpha_to, args.alpha_step) {
        Ok(alphas) => alphas,
        Err(message) => return Ok(usage_error(&message)),
    };
    if args.jobs == 0 {
        return Ok(usage_error("--jobs must be at least 1"));
    }
    if args.dm < 1 {
        return Ok(usage_error(&format!("--dm must be at least 1, got {}", args.dm)));
    }
    let dir = out_dir(&args.out);
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {dir:?}"))?;

    let run_point = |alpha: f64| -> Result<(SweepIndexRow, Option<String>)> {
        let config = SimConfig::kerr(alpha, args.steps);
        let point_dir = dir.join(format!("alpha_{alpha}"));
        fs::create_dir_all(&point_dir)
            .with_context(|| format!("creating output directory {point_dir:?}"))?;
        let started = Instant::now();
        let analysis = analyze_run(&config, args.dm)
            .with_context(|| format!("simulating alpha = {alpha}"))?;

        let summary = RunSummary::from_analysis(&analysis);
        let mut w = create_artifact(&point_dir, SUMMARY_FILE)?;
        write_summary_json(&mut w, &summary)?;
        w.flush()?;
        let manifest = RunManifest::new(
            config,
            args.dm,
            vec![SUMMARY_FILE.to_string()],
            started.elapsed().as_secs_f64(),
        );
        let mut w = create_artifact(&point_dir, MANIFEST_FILE)?;
        write_manifest_json(&mut w, &manifest)?;
        w.flush()?;

        let row = SweepIndexRow {
            alpha,
            t_col: analysis.collision.map(|event| event.t_col),
            phase: summary.phase.clone(),
        };
        let warning = analysis
            .collision_error
            .as_ref()
            .map(|err| format!("alpha = {alpha}: {err}"));
        Ok((row, warning))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .context("building the worker pool")?;
    let results: Result<Vec<(SweepIndexRow, Option<String>)>> = pool.install(|| {
        use rayon::prelude::*;
        alphas.par_iter().map(|&alpha| run_point(alpha)).collect()
    });
    let results = results?;

    let mut rows = Vec::with_capacity(results.len());
    for (row, warning) in results {
        if let Some(warning) = warning {
            eprintln!("warning: {warning}");
        }
        match row.t_col {
            Some(t_col) => println!("alpha = {}  t_col = {}  phase = {}", row.alpha, t_col, row.phase),
            None => println!("alpha = {}  t_col = -  phase = {}", row.alpha, row.phase),
        }
        rows.push(row);
    }
    let mut w = create_artifact(&dir, SWEEP_INDEX_FILE)?;
    write_sweep_index(&mut w, &rows)?;
    w.flush()?;
    println!("sweep index written to {}", dir.join(SWEEP_INDEX_FILE).display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit(args: &FitArgs) -> Result<ExitCode> {
    let index_path = args
        .index
        .clone()
        .unwrap_or_else(|| out_dir(&args.out).join(SWEEP_INDEX_FILE));
    let file = File::open(&index_path).with_context(|| format!("opening {index_path:?}"))?;
    let rows = read_sweep_index(BufReader::new(file))
        .with_context(|| format!("reading {index_path:?}"))?;

    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|row| row.phase == "II")
        .filter_map(|row| row.t_col.map(|t| (row.alpha, t as f64)))
        .collect();
    if points.len() < 3 {
        bail!(
            "the fit needs at least 3 recollapse points with collision times; \
             {} has {}",
            index_path.display(),
            points.len()
        );
    }
    let fit = fit_hyperbola(&points)?;

    let mut report = Vec::new();
    write_fit_report(&mut report, &points, &fit)?;
    print!("{}", String::from_utf8_lossy(&report));

    let report_dir = args
        .out
        .clone()
        .or_else(|| args.index.as_ref().and_then(|p| p.parent().map(Path::to_path_buf)))
        .unwrap_or_else(|| out_dir(&None));
    fs::create_dir_all(&report_dir)
        .with_context(|| format!("creating output directory {report_dir:?}"))?;
    let mut w = create_artifact(&report_dir, FIT_REPORT_FILE)?;
    w.write_all(&report)?;
    w.flush()?;
    println!("report written to {}", report_dir.join(FIT_REPORT_FILE).display());
    Ok(ExitCode::SUCCESS)
}

/// Phases near a regime boundary need long runs to settle; warn when the
/// requested run is short and alpha sits close to one.
fn warn_if_short(alpha: f64, steps: u32) {
    let near_boundary = (alpha - ALPHA_BOUNDARY_BALLISTIC).abs() < 0.05
        || (alpha - ALPHA_BOUNDARY_CHAOTIC).abs() < 0.05;
    if steps < 1000 && near_boundary {
        eprintln!(
            "warning: alpha = {alpha} is near a phase boundary; {steps} steps may be \
             too few to classify reliably, prefer --steps 1000 or more"
        );
    }
}

fn classification_exit(phase: &str) -> ExitCode {
    if phase.starts_with("indeterminate") {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn classify_dir(dir: &Path) -> Result<ExitCode> {
    let path = dir.join(SUMMARY_FILE);
    let file = File::open(&path).with_context(|| format!("opening {path:?}"))?;
    let summary = read_summary_json(BufReader::new(file))
        .with_context(|| format!("reading {path:?}"))?;

    if let Some(alpha) = summary.config.phase.kerr_alpha() {
        println!("alpha = {alpha}  steps = {}", summary.config.steps);
    } else {
        println!("steps = {}", summary.config.steps);
    }
    match &summary.indeterminate_reason {
        Some(reason) => println!("phase = indeterminate ({reason})"),
        None => match &summary.behavior {
            Some(behavior) => println!("phase = {} ({behavior})", summary.phase),
            None => println!("phase = {}", summary.phase),
        },
    }
    if let Some(m_eq) = summary.m_eq {
        println!("localized at m_cm = {m_eq:.2}");
    }
    if let Some(turning) = &summary.turning_point {
        println!("turning point: t = {}  m_cm = {:.2}", turning.t, turning.m_cm);
    }
    if let Some(event) = &summary.collision {
        println!(
            "collision: t_col = {}  intensity before = {:.4}  after = {:.4}",
            event.t_col, event.intensity_before, event.intensity_after
        );
    }
    if let Some(point) = summary.tracks.right.series.last() {
        println!("right track ends at t = {}  m_cm = {:.2}", point.t, point.m_cm);
    }
    Ok(classification_exit(&summary.phase))
}

fn classify_inline(args: &ClassifyArgs, alpha: f64) -> Result<ExitCode> {
    if !alpha.is_finite() {
        return Ok(usage_error(&format!("--alpha must be finite, got {alpha}")));
    }
    if args.dm < 1 {
        return Ok(usage_error(&format!("--dm must be at least 1, got {}", args.dm)));
    }
    warn_if_short(alpha, args.steps);
    let config = SimConfig::kerr(alpha, args.steps);
    let analysis = analyze_run(&config, args.dm)?;

    println!("alpha = {alpha}  steps = {}", args.steps);
    println!("phase = {}", describe_phase(&analysis));
    if let Classification::Label(nlogb::PhaseLabel::Chaotic { behavior }) =
        &analysis.classification
    {
        println!("chaotic behavior: {behavior}");
    }
    match analysis.turning {
        Some((t, m_cm)) => println!("turning point: t = {t}  m_cm = {m_cm:.2}"),
        None => println!("turning point: none"),
    }
    println!("contact episodes: {}", analysis.episodes.len());
    for episode in &analysis.episodes {
        match episode.exit {
            Some(exit) => println!("  contact from t = {} to t = {exit}", episode.enter),
            None => println!("  contact from t = {} to the end of the run", episode.enter),
        }
    }
    if let Some(event) = &analysis.collision {
        println!(
            "collision: t_col = {}  intensity before = {:.4}  after = {:.4}",
            event.t_col, event.intensity_before, event.intensity_after
        );
    }
    if let Some(err) = &analysis.collision_error {
        println!("collision statistics unresolved: {err}");
    }
    if let Some(tail) = tail_stats(&analysis.right, args.steps) {
        println!(
            "tail from t = {}: mean m_cm = {:.2}  range = {:.2}",
            tail.from_t, tail.mean, tail.range
        );
    }
    Ok(classification_exit(&describe_phase(&analysis)))
}

fn cmd_classify(args: &ClassifyArgs) -> Result<ExitCode> {
    match (&args.dir, args.alpha) {
        (Some(dir), _) => classify_dir(dir),
        (None, Some(alpha)) => classify_inline(args, alpha),
        (None, None) => Ok(usage_error("either --dir or --alpha is required")),
    }
}
