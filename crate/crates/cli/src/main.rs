//! `pgdpir`: simulate degraded measurements, restore them, score the result,
//! and run the warm-start ablation.
//!
//! Exit codes: 0 success, 1 file I/O, 2 configuration, 3 solver, 4 denoiser
//! protocol.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use pgdpir::ablation::run_ablation;
use pgdpir::forward::sample_exact_pg;
use pgdpir::io::{load_image, save_image};
use pgdpir::metrics::MetricReport;
use pgdpir::solvers::{run_method, Method};
use pgdpir::synth::generate;
use pgdpir::{DenoiserSpec, ImageGrid};
use serde::Serialize;

use config::{RunConfig, TargetSource};
use manifest::{json_hash, kernel_hash, sha256_hex, Manifest, OperatorRecord, VERSION};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core { context: Option<String>, source: pgdpir::Error },
}

impl CliError {
    pub fn at(path: &Path, e: impl Into<CliError>) -> Self {
        let p = path.display();
        match e.into() {
            CliError::Config(m) => CliError::Config(format!("{p}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{p}: {m}")),
            CliError::Core { source, .. } => CliError::Core { context: Some(p.to_string()), source },
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core { source, .. } if source.is_protocol() => 4,
            CliError::Core { source, .. } => match source.root() {
                pgdpir::Error::Io(_) | pgdpir::Error::Format(_) => 1,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core { context: Some(c), source } => write!(f, "{c}: {source}"),
            CliError::Core { context: None, source } => write!(f, "{source}"),
        }
    }
}

impl From<pgdpir::Error> for CliError {
    fn from(source: pgdpir::Error) -> Self {
        CliError::Core { context: None, source }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "pgdpir", version, about = "Plug-and-play restoration for Poisson-Gaussian imaging")]
struct Cli {
    /// JSON run configuration; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// pg-dpir, dpir or pgd.
    #[arg(long, global = true)]
    method: Option<String>,
    /// identity, gaussian, tv, median or external:CMD.
    #[arg(long, global = true)]
    denoiser: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade a target image with the exact Poisson-Gaussian model.
    Simulate {
        /// Image path or `synth:<checkerboard|ramp|filtered_noise|urban>`.
        #[arg(long)]
        target: Option<String>,
        /// Side length of generated targets.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Restore a simulated measurement.
    Restore {
        /// Degraded image; defaults to the one named in the manifest.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Defaults to `manifest.json` next to the input.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Ground truth for PSNR/SSIM.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Score a restored image against a reference.
    Eval {
        #[arg(long)]
        restored: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Warm-start versus cold-start inner descent on a synthetic suite.
    BenchAblation {
        #[arg(long)]
        instances: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pgdpir: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (mut cfg, base) = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.ablation.seed = seed;
    }
    if let Some(m) = &cli.method {
        cfg.method = m.parse::<Method>().map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(d) = &cli.denoiser {
        let spec = DenoiserSpec::parse(d).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.ablation.denoiser = spec.clone();
        cfg.denoiser = spec;
    }
    match cli.command {
        Command::Simulate { target, size } => {
            if target.is_some() {
                cfg.target = target;
            }
            if let Some(s) = size {
                cfg.size = s;
            }
            cfg.validate()?;
            simulate(&cfg, &base, &cli.out)
        }
        Command::Restore { input, manifest, reference } => {
            cfg.validate()?;
            restore(&cfg, input, manifest, reference, &cli.out)
        }
        Command::Eval { restored, reference } => eval(&restored, &reference),
        Command::BenchAblation { instances } => {
            if let Some(n) = instances {
                cfg.ablation.instances = n;
            }
            cfg.ablation.validate().map_err(|e| CliError::Config(e.to_string()))?;
            bench_ablation(&cfg, &cli.out)
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::at(dir, e))
}

fn save(path: &Path, x: &ImageGrid) -> Result<(), CliError> {
    save_image(path, x).map_err(|e| CliError::at(path, e))
}

fn load(path: &Path) -> Result<ImageGrid, CliError> {
    load_image(path).map_err(|e| CliError::at(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| CliError::at(path, e))
}

fn simulate(cfg: &RunConfig, base: &Path, out: &Path) -> Result<(), CliError> {
    let op = cfg.operator(base)?;
    let noise = cfg.noise.params()?;
    let target = match cfg.target_source(base)? {
        TargetSource::File(p) => load(&p)?,
        TargetSource::Synthetic(kind) => generate(kind, cfg.size, cfg.size, cfg.seed)?,
    };
    let degraded = sample_exact_pg(&target, &op, &noise, cfg.seed)?;

    create_dir(out)?;
    save(&out.join("target.imgf"), &target)?;
    save(&out.join("degraded.imgf"), &degraded)?;
    save(&out.join("degraded.png"), &degraded)?;
    let files = BTreeMap::from([
        ("target".to_string(), "target.imgf".to_string()),
        ("degraded".to_string(), "degraded.imgf".to_string()),
    ]);
    let manifest = Manifest {
        version: VERSION.to_string(),
        seed: cfg.seed,
        noise: cfg.noise,
        operator: OperatorRecord::from_op(&op),
        kernel_sha256: kernel_hash(&op.kernel),
        config_sha256: json_hash(cfg),
        files,
    };
    manifest.write(&out.join("manifest.json"))?;
    println!(
        "simulated {}x{} -> {}x{} (sigma0={}, K={}, seed={}) in {}",
        target.height(),
        target.width(),
        degraded.height(),
        degraded.width(),
        cfg.noise.sigma0,
        cfg.noise.gain_k,
        cfg.seed,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct RestoreRecord<'a> {
    version: &'a str,
    seed: u64,
    method: Method,
    denoiser: &'a DenoiserSpec,
    solver: pgdpir::SolverConfig,
    config_sha256: String,
    input: String,
    input_sha256: String,
    manifest: String,
}

fn restore(
    cfg: &RunConfig,
    input: Option<PathBuf>,
    manifest_path: Option<PathBuf>,
    reference: Option<PathBuf>,
    out: &Path,
) -> Result<(), CliError> {
    let manifest_path = match (&input, manifest_path) {
        (_, Some(m)) => m,
        (Some(i), None) => i.parent().unwrap_or(Path::new(".")).join("manifest.json"),
        (None, None) => {
            return Err(CliError::Config("restore needs --input or --manifest".into()));
        }
    };
    let manifest = Manifest::read(&manifest_path)?;
    let input = match input {
        Some(i) => i,
        None => manifest_path.parent().unwrap_or(Path::new(".")).join(&manifest.files["degraded"]),
    };
    let op = manifest.operator.to_op()?;
    let noise = manifest.noise.params()?;
    let y = load(&input)?;
    let truth = reference.as_deref().map(load).transpose()?;

    let solver = cfg.solver();
    let mut denoiser = cfg.denoiser.build()?;
    let start = Instant::now();
    let (restored, trace) = run_method(cfg.method, &y, &op, &noise, denoiser.as_mut(), &solver, truth.as_ref())?;
    let wall = start.elapsed().as_secs_f64();

    create_dir(out)?;
    save(&out.join("restored.imgf"), &restored)?;
    save(&out.join("restored.png"), &restored)?;
    let trace_path = out.join("trace.jsonl");
    let mut lines = Vec::new();
    for r in &trace.records {
        serde_json::to_writer(&mut lines, r).expect("record serializes");
        lines.push(b'\n');
    }
    fs::write(&trace_path, lines).map_err(|e| CliError::at(&trace_path, e))?;
    let input_bytes = fs::read(&input).map_err(|e| CliError::at(&input, e))?;
    write_json(
        &out.join("run.json"),
        &RestoreRecord {
            version: VERSION,
            seed: cfg.seed,
            method: cfg.method,
            denoiser: &cfg.denoiser,
            solver,
            config_sha256: json_hash(cfg),
            input: input.display().to_string(),
            input_sha256: sha256_hex(&input_bytes),
            manifest: manifest_path.display().to_string(),
        },
    )?;

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "{} restored {}x{} in {wall:.2}s ({} inner steps)",
        cfg.method,
        restored.height(),
        restored.width(),
        trace.total_inner_steps()
    );
    if let Some(truth) = &truth {
        let mut report = MetricReport::compute(&restored, truth, wall)?;
        report.trace = Some("trace.jsonl".into());
        write_json(&out.join("metrics.json"), &report)?;
        let _ = writeln!(stdout, "{}", format_report(&report));
    }
    Ok(())
}

fn format_report(r: &MetricReport) -> String {
    let psnr = r.psnr.map_or("inf".to_string(), |p| format!("{p:.3}"));
    format!("psnr {psnr} dB, ssim {:.4}", r.ssim)
}

fn eval(restored: &Path, reference: &Path) -> Result<(), CliError> {
    let a = load(restored)?;
    let b = load(reference)?;
    let report = MetricReport::compute(&a, &b, 0.0)?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(())
}

#[derive(Serialize)]
struct BenchRecord<'a> {
    version: &'a str,
    config_sha256: String,
    settings: &'a pgdpir::ablation::AblationSettings,
    median_ratio: f64,
    max_psnr_gap: f64,
}

fn bench_ablation(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let summary = run_ablation(&cfg.ablation)?;
    create_dir(out)?;
    let csv = out.join("ablation.csv");
    fs::write(&csv, summary.to_csv()).map_err(|e| CliError::at(&csv, e))?;
    write_json(
        &out.join("ablation.json"),
        &BenchRecord {
            version: VERSION,
            config_sha256: json_hash(cfg),
            settings: &cfg.ablation,
            median_ratio: summary.median_ratio,
            max_psnr_gap: summary.max_psnr_gap,
        },
    )?;
    print!("{}", summary.to_table());
    Ok(())
}
