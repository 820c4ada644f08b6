//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::field::{Field, FieldError};
use crate::generators::{
    add_noise, circle_points, fourier_image, levels_from_epsilon, levelset_stream, oscillating_rips_stream,
    random_stream, GeneratorError, RandomStreamParams,
};
use crate::io::{emit_stream, format_diagram, format_metrics, parse_image, parse_points, parse_stream, IoError};
use crate::oracle::{oracle_diagram, OracleError, DEFAULT_CELL_LIMIT};
use crate::pipeline::{run_stream, PipelineError, RunOptions, RunOutput};
use crate::stream::BlockOp;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: IoError },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "zzmorse", version, about = "Zigzag persistence with on-the-fly Morse reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Oscillating Rips zigzag of a point cloud
    Rips(RipsArgs),
    /// Levelset zigzag of a 3D scalar image
    Levelset(LevelsetArgs),
    /// Zigzag persistence of a block stream file
    Stream(StreamArgs),
    /// Compare the pipeline against brute-force decomposition on random zigzags
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Characteristic of the coefficient field
    #[arg(long, default_value_t = 2)]
    pub field_char: u64,
    /// Skip Morse reduction; every cell is critical
    #[arg(long)]
    pub no_morse: bool,
    /// Check matching, Betti and homology-matrix invariants after every step
    #[arg(long)]
    pub validate: bool,
    /// Diagram file; stdout if absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Metrics file; defaults to `<out>.metrics`, or stderr without --out
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    /// Also write the generated block stream
    #[arg(long)]
    pub stream_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RipsArgs {
    /// Point file, one whitespace-separated point per line
    #[arg(long, conflicts_with = "circle")]
    pub points: Option<PathBuf>,
    /// Use N seeded points spread over the unit circle instead of a file
    #[arg(long, value_name = "N")]
    pub circle: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 6.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 2)]
    pub max_dim: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct LevelsetArgs {
    /// Image file: "dims nx ny nz" then values, x fastest
    #[arg(long, conflicts_with = "fourier")]
    pub image: Option<PathBuf>,
    /// Use a seeded random Fourier sum on an N×N×N grid instead of a file
    #[arg(long, value_name = "N")]
    pub fourier: Option<usize>,
    /// Number of Fourier terms
    #[arg(long, default_value_t = 8)]
    pub terms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add uniform noise in [0, NOISE] to every vertex
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Level spacing
    #[arg(long, conflicts_with = "levels")]
    pub epsilon: Option<f64>,
    /// Explicit comma-separated levels
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub levels: Option<Vec<f64>>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    /// Block stream file
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 2)]
    pub field_char: u64,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn parsed<T>(path: &Path, r: Result<T, IoError>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Parse { path: path.to_path_buf(), source })
}

/// What a command prints to stdout and stderr.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Report {
    pub stdout: String,
    pub stderr: String,
    pub success: bool,
}

fn run_blocks(blocks: &[BlockOp], common: &Common) -> Result<Report, CliError> {
    let field = Field::new(common.field_char)?;
    if let Some(path) = &common.stream_out {
        write(path, &emit_stream(blocks))?;
    }
    let opts = RunOptions { field, morse: !common.no_morse, validate: common.validate };
    let RunOutput { diagram, metrics } = run_stream(blocks, opts)?;
    let diagram = format_diagram(&diagram);
    let metrics = format_metrics(&metrics);
    let mut report = Report { success: true, ..Report::default() };
    match &common.out {
        Some(path) => {
            write(path, &diagram)?;
            let sidecar = common.metrics_out.clone().unwrap_or_else(|| {
                let mut p = path.clone().into_os_string();
                p.push(".metrics");
                PathBuf::from(p)
            });
            write(&sidecar, &metrics)?;
        }
        None => {
            report.stdout = diagram;
            match &common.metrics_out {
                Some(path) => write(path, &metrics)?,
                None => report.stderr = metrics,
            }
        }
    }
    Ok(report)
}

pub fn run(cli: Cli) -> Result<Report, CliError> {
    match cli.command {
        Command::Rips(a) => {
            if !(a.mu > 0.0 && a.mu <= a.nu) {
                return Err(CliError::Usage(format!("need 0 < mu <= nu, got mu={}, nu={}", a.mu, a.nu)));
            }
            let pc = match (&a.points, a.circle) {
                (Some(path), _) => parsed(path, parse_points(&read(path)?))?,
                (None, Some(n)) => circle_points(n, a.seed),
                (None, None) => return Err(CliError::Usage("rips needs --points or --circle".into())),
            };
            let blocks = oscillating_rips_stream(&pc, a.mu, a.nu, a.max_dim)?;
            run_blocks(&blocks, &a.common)
        }
        Command::Levelset(a) => {
            let mut img = match (&a.image, a.fourier) {
                (Some(path), _) => parsed(path, parse_image(&read(path)?))?,
                (None, Some(n)) => fourier_image((n, n, n), a.seed, a.terms)?,
                (None, None) => return Err(CliError::Usage("levelset needs --image or --fourier".into())),
            };
            if a.noise < 0.0 {
                return Err(CliError::Usage("--noise must be nonnegative".into()));
            }
            add_noise(&mut img, a.noise, a.seed);
            let levels = match (&a.levels, a.epsilon) {
                (Some(l), _) => l.clone(),
                (None, Some(eps)) => {
                    if !(eps > 0.0) {
                        return Err(CliError::Usage("--epsilon must be positive".into()));
                    }
                    let (lo, hi) = img.min_max();
                    levels_from_epsilon(lo, hi, eps)?
                }
                (None, None) => return Err(CliError::Usage("levelset needs --epsilon or --levels".into())),
            };
            let blocks = levelset_stream(&img, &levels)?;
            run_blocks(&blocks, &a.common)
        }
        Command::Stream(a) => {
            let blocks = parsed(&a.input, parse_stream(&read(&a.input)?))?;
            run_blocks(&blocks, &a.common)
        }
        Command::OracleCheck(a) => oracle_check(a),
    }
}

fn oracle_check(a: OracleArgs) -> Result<Report, CliError> {
    let field = Field::new(a.field_char)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (mut pass, mut fail) = (0, 0);
    let mut stderr = String::new();
    for trial in 0..a.trials {
        let blocks = random_stream(&mut rng, RandomStreamParams::default());
        let want = oracle_diagram(&field, &blocks, DEFAULT_CELL_LIMIT)?;
        let mut ok = true;
        for morse in [true, false] {
            match run_stream(&blocks, RunOptions { field, morse, validate: true }) {
                Ok(out) if out.diagram.triples() == want => {}
                Ok(_) => {
                    ok = false;
                    stderr.push_str(&format!("trial {trial}: diagram differs (morse={morse})\n"));
                }
                Err(e) => {
                    ok = false;
                    stderr.push_str(&format!("trial {trial}: {e} (morse={morse})\n"));
                }
            }
        }
        if ok {
            pass += 1;
        } else {
            fail += 1;
        }
    }
    Ok(Report { stdout: format!("passed {pass}, failed {fail}\n"), stderr, success: fail == 0 })
}
