//! `bubbleline`: command-line front end for the double-bubble phase-diagram
//! library.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bubbleline::bubbles::{blowup_time, classify, tie_curve, BlowupTime, BubbleAnalysis, Regime};
use bubbleline::limits::{write_trace_csv, AsymptoticProfile};
use bubbleline::oracle::brute_force_minimize;
use bubbleline::phase::{analyze, phase_sweep, render_svg, write_phase_csv, write_tie_csv, Status};
use bubbleline::{DensityModel, Error, ExtendedReal, Settings};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

const CONFIG_ENV: &str = "BUBBLELINE_CONFIG";

#[derive(Parser)]
#[command(name = "bubbleline", version, about = "Double-bubble phase diagrams for log-convex densities on the line")]
struct Cli {
    /// TOML file overriding tolerances and thresholds (falls back to $BUBBLELINE_CONFIG).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the density, estimate L and M, and locate the blowup time.
    Analyze {
        #[command(flatten)]
        density: DensityArg,
        /// Write the L and M sample traces as CSV files into this directory.
        #[arg(long, value_name = "DIR")]
        trace_dir: Option<PathBuf>,
        /// Number of tie-function samples included in the report.
        #[arg(long, default_value_t = 8)]
        tie_samples: usize,
    },
    /// Compare the double and triple intervals at one pair of volumes.
    Classify {
        #[command(flatten)]
        density: DensityArg,
        #[arg(long)]
        v1: f64,
        #[arg(long)]
        v2: f64,
    },
    /// Sample the tie function λ(V1) as CSV.
    TieCurve {
        #[command(flatten)]
        density: DensityArg,
        /// Defaults to 1% of the upper end.
        #[arg(long)]
        v1_min: Option<f64>,
        /// Defaults to just below V0 when finite, else 4.
        #[arg(long)]
        v1_max: Option<f64>,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        /// Output CSV file (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Classify a grid of volume pairs with V1 <= V2.
    Phase {
        #[command(flatten)]
        density: DensityArg,
        #[arg(long)]
        v1_max: f64,
        #[arg(long)]
        v2_max: f64,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        /// Output CSV file (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Also render the grid and tie curve as SVG.
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
    },
    /// Brute-force search over interval configurations.
    Oracle {
        #[command(flatten)]
        density: DensityArg,
        #[arg(long)]
        v1: f64,
        #[arg(long)]
        v2: f64,
        /// At most this many intervals per region (1 to 3).
        #[arg(long, default_value_t = 3)]
        max_intervals: usize,
    },
}

#[derive(Args)]
struct DensityArg {
    /// Density definition file (`f = ...`, optional `coordinate`, `L`, `M`).
    density_file: PathBuf,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Inconclusive(_) => 3,
            Error::InvalidArgument(_) => 4,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(4),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_settings(path: Option<&Path>) -> CliResult<Settings> {
    let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    let Some(path) = path.map(Path::to_path_buf).or(env_path) else {
        return Ok(Settings::default());
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
}

fn load_model(arg: &DensityArg, settings: &Settings) -> CliResult<DensityModel> {
    Ok(DensityModel::from_file(&arg.density_file)?.with_settings(settings.density.clone()))
}

/// Loads and validates; a failed validation prints the report and exits 2.
fn load_valid_model(arg: &DensityArg, settings: &Settings) -> CliResult<DensityModel> {
    let model = load_model(arg, settings)?;
    let report = model.validate();
    if !report.passed() {
        print_json(&report)?;
        return Err(Failure {
            code: 2,
            message: "density failed validation".into(),
        });
    }
    Ok(model)
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure {
        code: 1,
        message: e.to_string(),
    })?;
    let mut out = io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn check_volumes(v1: f64, v2: f64) -> CliResult {
    if !(v1 > 0.0 && v1.is_finite() && v2.is_finite()) {
        return Err(Failure::usage(format!("volumes must be positive and finite, got v1 = {v1}, v2 = {v2}")));
    }
    if v1 > v2 {
        return Err(Failure::usage(format!("volumes must be ordered v1 <= v2, got v1 = {v1}, v2 = {v2}")));
    }
    Ok(())
}

fn blowup(model: &DensityModel, settings: &Settings) -> CliResult<BlowupTime> {
    let profile = AsymptoticProfile::estimate(model, &settings.limits)?;
    Ok(blowup_time(model, &profile, settings)?)
}

fn run(cli: Cli) -> CliResult<u8> {
    let settings = load_settings(cli.config.as_deref())?;
    match cli.command {
        Command::Analyze {
            density,
            trace_dir,
            tie_samples,
        } => {
            let model = load_model(&density, &settings)?;
            let report = analyze(&model, &settings, tie_samples)?;
            if let (Some(dir), Some(limits)) = (&trace_dir, &report.limits) {
                std::fs::create_dir_all(dir)?;
                write_trace_csv(&limits.l.trace, BufWriter::new(File::create(dir.join("L_trace.csv"))?))?;
                write_trace_csv(&limits.m.trace, BufWriter::new(File::create(dir.join("M_trace.csv"))?))?;
            }
            print_json(&report)?;
            Ok(match report.status {
                Status::Ok => 0,
                Status::ValidationFailed => 2,
                Status::Inconclusive { message } => {
                    eprintln!("inconclusive: {message}");
                    3
                }
            })
        }
        Command::Classify { density, v1, v2 } => {
            check_volumes(v1, v2)?;
            let model = load_valid_model(&density, &settings)?;
            // V0 only settles exact ties; an inconclusive estimate is not fatal.
            let v0 = match blowup(&model, &settings) {
                Ok(b) => Some(b.v0),
                Err(f) if f.code == 3 => {
                    eprintln!("warning: {}", f.message);
                    None
                }
                Err(f) => return Err(f),
            };
            #[derive(Serialize)]
            struct Report {
                #[serde(flatten)]
                analysis: BubbleAnalysis,
                #[serde(rename = "V0")]
                v0: Option<ExtendedReal>,
            }
            let analysis = classify(&model, v1, v2, v0, &settings)?;
            print_json(&Report { analysis, v0 })?;
            Ok(0)
        }
        Command::TieCurve {
            density,
            v1_min,
            v1_max,
            samples,
            out,
        } => {
            let model = load_valid_model(&density, &settings)?;
            let b = blowup(&model, &settings)?;
            let top = v1_max.unwrap_or(match b.regime {
                Regime::FiniteBlowup => b.v0.to_f64(),
                _ => 4.0,
            });
            let bottom = v1_min.unwrap_or(0.01 * top);
            let curve = tie_curve(&model, &b, bottom, top, samples, &settings)?;
            for w in &curve.warnings {
                eprintln!("warning: {w}");
            }
            let mut sink = output(out.as_deref())?;
            write_tie_csv(&curve.samples, &mut sink)?;
            sink.flush()?;
            Ok(0)
        }
        Command::Phase {
            density,
            v1_max,
            v2_max,
            grid,
            out,
            svg,
        } => {
            if !(v1_max > 0.0 && v2_max > 0.0) || grid < 2 {
                return Err(Failure::usage("need --v1-max > 0, --v2-max > 0 and --grid >= 2"));
            }
            let model = load_valid_model(&density, &settings)?;
            let b = match blowup(&model, &settings) {
                Ok(b) => Some(b),
                Err(f) if f.code == 3 => {
                    eprintln!("warning: {}", f.message);
                    None
                }
                Err(f) => return Err(f),
            };
            let rows = phase_sweep(&model, v1_max, v2_max, grid, b.as_ref().map(|b| b.v0), &settings)?;
            let mut sink = output(out.as_deref())?;
            write_phase_csv(&rows, &mut sink)?;
            sink.flush()?;
            if let Some(svg_path) = svg {
                let tie = match &b {
                    Some(b) if b.regime != Regime::AlwaysDouble => {
                        let top = b.v0.as_finite().map_or(v1_max, |v0| v0.min(v1_max));
                        tie_curve(&model, b, top / 64.0, top, 32, &settings)?.samples
                    }
                    _ => Vec::new(),
                };
                let title = format!("f = {}", model.definition().f);
                std::fs::write(svg_path, render_svg(&rows, &tie, v1_max, v2_max, &title))?;
            }
            Ok(0)
        }
        Command::Oracle {
            density,
            v1,
            v2,
            max_intervals,
        } => {
            check_volumes(v1, v2)?;
            if !(1..=3).contains(&max_intervals) {
                return Err(Failure::usage(format!("--max-intervals must be 1, 2 or 3, got {max_intervals}")));
            }
            let model = load_valid_model(&density, &settings)?;
            let report = brute_force_minimize(&model, v1, v2, max_intervals, &settings.oracle, &settings.solver)?;
            print_json(&report)?;
            if report.budget_exhausted {
                eprintln!("oracle stopped at its time budget; best-so-far reported");
                return Ok(1);
            }
            if !report.agreement {
                eprintln!("oracle disagrees with min(P2, P3) by {}", report.difference);
                return Ok(1);
            }
            Ok(0)
        }
    }
}
