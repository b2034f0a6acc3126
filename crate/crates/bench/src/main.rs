use std::path::{Path, PathBuf};
use std::process::ExitCode;

use castshadow::config::BenchConfig;
use castshadow::methods::Method;
use castshadow::pipeline::{
    bench_time, evaluate_all, run_detect, run_trackeval, write_eval_csv, write_timing_csv, write_track_csv,
    Sequence, TimingRow, EFFECTIVE_CONFIG_FILE,
};
use castshadow::synth::{generate, SceneKind};
use castshadow::Error;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

/// Moving cast shadow detection benchmark.
#[derive(Parser)]
#[command(name = "shadow-bench", version)]
struct Cli {
    /// Flat-key configuration file merged over the defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory (default: the `output.dir` config key).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// More log output; repeat for debug. `RUST_LOG` takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write per-frame label masks for every sequence and method.
    Detect(Selection),
    /// Score methods against ground-truth masks.
    Eval {
        #[command(flatten)]
        selection: Selection,
        /// Comma-separated desaturation rates (default: 0).
        #[arg(long, value_name = "CSV")]
        lambda_grid: Option<String>,
    },
    /// Score methods on progressively desaturated input.
    DesatSweep {
        #[command(flatten)]
        selection: Selection,
        /// Comma-separated desaturation rates (default: `eval.lambda_grid`).
        #[arg(long, value_name = "CSV")]
        lambda_grid: Option<String>,
    },
    /// Track blobs after shadow removal and score MOTA/MOTP.
    TrackEval(Selection),
    /// Time each method, one run at a time.
    BenchTime(Selection),
    /// Generate the bundled synthetic sequences.
    Synth,
}

#[derive(Args)]
struct Selection {
    /// Sequence directory, or a directory of sequences. Repeatable.
    #[arg(long = "seq", value_name = "DIR", required = true)]
    seqs: Vec<PathBuf>,

    /// Comma-separated method names; `all` is the five detectors.
    #[arg(long, value_name = "LIST")]
    methods: Option<String>,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_FRAMES: u8 = 4;
const EXIT_IMAGE: u8 = 5;
const EXIT_GROUND_TRUTH: u8 = 6;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::InvalidParameter { .. } => EXIT_CONFIG,
        Error::Sequence { .. } => EXIT_FRAMES,
        Error::Image { .. } | Error::DimensionMismatch { .. } | Error::ImageTooSmall(_) => EXIT_IMAGE,
        Error::GroundTruth(_) => EXIT_GROUND_TRUTH,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> castshadow::Result<()> {
    let config = match &cli.config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::default(),
    };
    config.validate()?;
    let out = cli.out.clone().unwrap_or_else(|| config.output_dir.clone());
    create_dir(&out)?;

    match cli.command {
        Command::Detect(sel) => {
            let (seqs, methods) = sel.resolve(&[])?;
            std::fs::write(out.join(EFFECTIVE_CONFIG_FILE), config.to_text())?;
            let mut rows = Vec::new();
            for seq in &seqs {
                for &m in &methods {
                    info!("detecting {} with {m}", seq.name);
                    let stats = run_detect(seq, m, &config, &out)?;
                    rows.push(TimingRow {
                        sequence: seq.name.clone(),
                        method: m.to_string(),
                        stats,
                    });
                }
            }
            write_timing_csv(&out.join("timing.csv"), &rows)?;
        }
        Command::Eval { selection, lambda_grid } => {
            let lambdas = match lambda_grid {
                Some(text) => parse_lambda_grid(&text)?,
                None => vec![0.0],
            };
            eval(&selection, &lambdas, &config, &out, "eval")?;
        }
        Command::DesatSweep { selection, lambda_grid } => {
            let lambdas = match lambda_grid {
                Some(text) => parse_lambda_grid(&text)?,
                None => config.lambda_grid.clone(),
            };
            eval(&selection, &lambdas, &config, &out, "desat")?;
        }
        Command::TrackEval(sel) => {
            let (seqs, methods) = sel.resolve(&[])?;
            let mut rows = Vec::new();
            for seq in &seqs {
                rows.extend(run_trackeval(seq, &methods, &config)?);
            }
            write_track_csv(&out.join("track.csv"), &rows)?;
        }
        Command::BenchTime(sel) => {
            let (seqs, methods) = sel.resolve(&[Method::SrTextureFast])?;
            write_timing_csv(&out.join("timing.csv"), &bench_time(&seqs, &methods, &config)?)?;
        }
        Command::Synth => {
            for kind in SceneKind::ALL {
                info!("generating {}", kind.name());
                generate(kind).write(&out.join(kind.name()))?;
            }
        }
    }
    Ok(())
}

fn eval(sel: &Selection, lambdas: &[f64], config: &BenchConfig, out: &Path, stem: &str) -> castshadow::Result<()> {
    let (seqs, methods) = sel.resolve(&[])?;
    let rows = evaluate_all(&seqs, &methods, lambdas, config, Some(out))?;
    for r in rows.iter().filter(|r| r.counts.is_empty()) {
        warn!("{}: {} has no labelled frame", r.sequence, r.method);
    }
    write_eval_csv(&out.join(format!("{stem}.csv")), &rows, |r| r.pooled)?;
    write_eval_csv(&out.join(format!("{stem}_macro.csv")), &rows, |r| r.per_frame)?;
    Ok(())
}

impl Selection {
    /// Opens the sequences and parses the method list. `extra` is appended
    /// when no list is given.
    fn resolve(&self, extra: &[Method]) -> castshadow::Result<(Vec<Sequence>, Vec<Method>)> {
        let mut methods = Method::parse_list(self.methods.as_deref().unwrap_or("all"))?;
        if self.methods.is_none() {
            methods.extend_from_slice(extra);
        }
        let mut seqs = Vec::new();
        for dir in &self.seqs {
            for d in sequence_dirs(dir)? {
                seqs.push(Sequence::open(&d)?);
            }
        }
        Ok((seqs, methods))
    }
}

/// `dir` itself when it holds a `frames/` directory, otherwise its
/// subdirectories that do, sorted by name.
fn sequence_dirs(dir: &Path) -> castshadow::Result<Vec<PathBuf>> {
    if dir.join("frames").is_dir() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let not_found = |reason: String| Error::Sequence {
        path: dir.to_path_buf(),
        reason,
    };
    let entries = std::fs::read_dir(dir).map_err(|e| not_found(e.to_string()))?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("frames").is_dir())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(not_found("no frames/ directory here or in any subdirectory".into()));
    }
    Ok(found)
}

fn parse_lambda_grid(text: &str) -> castshadow::Result<Vec<f64>> {
    let grid = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|l| (0.0..=1.0).contains(l))
                .ok_or_else(|| Error::Config(format!("--lambda-grid: `{s}` is not a rate in [0, 1]")))
        })
        .collect::<castshadow::Result<Vec<f64>>>()?;
    if grid.is_empty() {
        return Err(Error::Config("--lambda-grid is empty".into()));
    }
    Ok(grid)
}

fn create_dir(path: &Path) -> castshadow::Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))
}
