//! Batch CLI: scene in, numbers out.
//!
//! Exit codes: 0 success, 1 validation failure, 2 numerical failure,
//! 3 parse error.

use clap::{Args, Parser, Subcommand};
use homspray::cli::{
    cmd_curvature, cmd_eta, cmd_geodesic, cmd_oracle_compare, cmd_scan, cmd_transport,
    cmd_validate, BaseCurve, CommandOutput, OutputFormat,
};
use homspray::error::Error;
use homspray::scene::Scene;
use nalgebra::DVector;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "homspray",
    about = "Homogeneous spray and Finsler geometry engine"
)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scene file (JSON)
    #[arg(long)]
    scene: PathBuf,
    /// Seed for randomized checks, recorded in reports
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format where a choice exists
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run structural validation checks; exit 0 iff all pass
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Spray vector field and connection columns at y
    Eta {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
    },
    /// Riemann operator (with term breakdown), S-curvature, flags, Landsberg
    Curvature {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
    },
    /// Integrate the geodesic from y0; CSV with conserved-quantity columns
    Geodesic {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        y0: String,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Parallel transport along a base curve; CSV
    Transport {
        #[command(flatten)]
        common: Common,
        /// linear or nonlinear
        #[arg(long)]
        mode: String,
        /// Constant trivialized base velocity (the exp(tv) orbit)
        #[arg(long, allow_hyphen_values = true)]
        base_velocity: Option<String>,
        /// Launch the base curve as the geodesic from this vector
        #[arg(long, allow_hyphen_values = true)]
        base_geodesic: Option<String>,
        /// Transported initial vector
        #[arg(long, allow_hyphen_values = true)]
        w0: String,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Flag curvature over a grid of flag directions; CSV
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Compare homogeneous operators against the chart oracle
    OracleCompare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
}

fn parse_vector(text: &str, name: &str) -> Result<DVector<f64>, Error> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    values
        .map(DVector::from_vec)
        .map_err(|e| Error::Parse(format!("--{name}: {e}")))
}

fn parse_format(text: &str) -> Result<OutputFormat, Error> {
    match text {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        other => Err(Error::Parse(format!(
            "--format must be json or csv, got {other}"
        ))),
    }
}

fn load_scene(path: &PathBuf) -> Result<Scene, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    Scene::from_json_str(&text)
}

fn emit(common: &Common, output: &CommandOutput) -> Result<(), Error> {
    match &common.out {
        None => {
            print!("{}", output.text);
            if !output.text.ends_with('\n') {
                println!();
            }
        }
        Some(path) => std::fs::write(path, &output.text)
            .map_err(|e| Error::Numerical(format!("cannot write {}: {e}", path.display())))?,
    }
    Ok(())
}

fn run(cli: CliArgs) -> Result<bool, Error> {
    match cli.command {
        Command::Validate { common } => {
            let scene = load_scene(&common.scene)?;
            let out = cmd_validate(&scene, common.seed)?;
            emit(&common, &out)?;
            Ok(out.all_passed)
        }
        Command::Eta { common, y } => {
            let scene = load_scene(&common.scene)?.build()?;
            let y = parse_vector(&y, "y")?;
            let out = cmd_eta(&scene, &y, common.seed)?;
            emit(&common, &out)?;
            Ok(true)
        }
        Command::Curvature { common, y } => {
            let scene = load_scene(&common.scene)?.build()?;
            let y = parse_vector(&y, "y")?;
            let out = cmd_curvature(&scene, &y, common.seed)?;
            emit(&common, &out)?;
            Ok(true)
        }
        Command::Geodesic {
            common,
            y0,
            t_end,
            dt,
        } => {
            let scene = load_scene(&common.scene)?.build()?;
            let y0 = parse_vector(&y0, "y0")?;
            let out = cmd_geodesic(&scene, &y0, t_end, dt)?;
            emit(&common, &out)?;
            Ok(true)
        }
        Command::Transport {
            common,
            mode,
            base_velocity,
            base_geodesic,
            w0,
            t_end,
            dt,
        } => {
            let scene = load_scene(&common.scene)?.build()?;
            let start = parse_vector(&w0, "w0")?;
            let base = match (base_velocity, base_geodesic) {
                (Some(v), None) => BaseCurve::ConstantVelocity(parse_vector(&v, "base-velocity")?),
                (None, Some(y0)) => BaseCurve::Geodesic(parse_vector(&y0, "base-geodesic")?),
                _ => {
                    return Err(Error::Parse(
                        "give exactly one of --base-velocity or --base-geodesic".into(),
                    ))
                }
            };
            let out = cmd_transport(&scene, &mode, base, &start, t_end, dt)?;
            emit(&common, &out)?;
            Ok(true)
        }
        Command::Scan { common, y, grid } => {
            let scene = load_scene(&common.scene)?.build()?;
            let y = parse_vector(&y, "y")?;
            let out = cmd_scan(&scene, &y, grid, common.seed)?;
            emit(&common, &out)?;
            Ok(true)
        }
        Command::OracleCompare { common, samples } => {
            let format = parse_format(&common.format)?;
            let scene = load_scene(&common.scene)?.build()?;
            let out = cmd_oracle_compare(&scene, samples, common.seed, format)?;
            emit(&common, &out)?;
            Ok(out.all_passed)
        }
    }
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Parse(_) | Error::Scene { .. } => 3,
        Error::InvalidAlgebra(_)
        | Error::InadmissibleNorm(_)
        | Error::DimensionMismatch { .. }
        | Error::UnsupportedConfiguration(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = CliArgs::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
