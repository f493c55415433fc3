//! `elfkit`: V-versus-μ curves, bias curves and validation suites.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elfkit_core::harness::{
    bias_curve, vrf_curve, write_bias_csv, write_vrf_csv, BiasCurveConfig, VrfCurveConfig, DEFAULT_MU_POINTS,
    DEFAULT_SIGMAS, DEFAULT_THETA_POINTS,
};
use elfkit_core::logical_circuit::{Scheme, TunableParams};
use elfkit_core::series_expansion::CoefficientPath;
use elfkit_core::validation::{flipped_nu, validate, ValidationLevel, ValidationOptions};
use elfkit_core::ElfError;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "elfkit", version, about = "Engineered likelihood functions for Bayesian amplitude estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CLF and optimized V over a μ grid for each σ, as CSV.
    VrfCurve(VrfCurveArgs),
    /// Circuit bias next to its cosine series on [0, π], as CSV.
    BiasCurve(BiasCurveArgs),
    /// Run the identity and oracle checks; exits 1 if any fails.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Af,
    Ab,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Af => Scheme::AncillaFree,
            SchemeArg::Ab => Scheme::AncillaBased,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Auto,
    Combinatorial,
    Numeric,
}

impl From<PathArg> for CoefficientPath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Auto => CoefficientPath::Auto,
            PathArg::Combinatorial => CoefficientPath::Combinatorial,
            PathArg::Numeric => CoefficientPath::Numeric,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    NuSign,
}

#[derive(Args)]
struct VrfCurveArgs {
    /// Scheme to run; both when omitted.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long = "L", default_value_t = 1)]
    layers: usize,
    /// Comma-separated prior widths.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = DEFAULT_SIGMAS.to_vec())]
    sigma: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_MU_POINTS)]
    mu_points: usize,
    /// Random starts per point on top of the CLF-based ones.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 200)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fidelity f in [0, 1); noiseless when omitted.
    #[arg(long, allow_hyphen_values = true)]
    fidelity: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    coefficients: PathArg,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BiasCurveArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long = "L")]
    layers: Option<usize>,
    /// Comma-separated rotation angles; the CLF point when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    angles: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_THETA_POINTS)]
    theta_points: usize,
    #[arg(long, allow_hyphen_values = true)]
    fidelity: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    coefficients: PathArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value = "fast")]
    level: LevelArg,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<Fault>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ElfError> for Failure {
    fn from(e: ElfError) -> Self {
        match e {
            ElfError::InvalidArgument(_) | ElfError::Domain(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_vrf_curve(args: VrfCurveArgs) -> Result<(), Failure> {
    let config = VrfCurveConfig {
        schemes: match args.scheme {
            Some(s) => vec![s.into()],
            None => Scheme::ALL.to_vec(),
        },
        layers: args.layers,
        sigmas: args.sigma,
        mu_points: args.mu_points,
        restarts: args.restarts,
        max_sweeps: args.max_sweeps,
        seed: args.seed,
        fidelity: args.fidelity,
        path: args.coefficients.into(),
    };
    config.validate()?;
    let rows = vrf_curve(&config)?;
    let mut out = open_output(args.out.as_deref())?;
    write_vrf_csv(&rows, &mut out)?;
    out.flush()?;
    if let Some(p) = &args.out {
        eprintln!("wrote {} rows to {}", rows.len(), p.display());
    }
    Ok(())
}

fn run_bias_curve(args: BiasCurveArgs) -> Result<(), Failure> {
    let scheme: Scheme = args.scheme.into();
    let params = match (args.angles, args.layers) {
        (Some(a), layers) => {
            let x = TunableParams::new(scheme, a)?;
            if layers.is_some_and(|l| l != x.layers()) {
                return Err(Failure::Usage(format!("--L disagrees with {} angles", x.angles().len())));
            }
            x
        }
        (None, layers) => TunableParams::chebyshev(scheme, layers.unwrap_or(1))?,
    };
    let config = BiasCurveConfig {
        params,
        theta_points: args.theta_points,
        fidelity: args.fidelity,
        path: args.coefficients.into(),
    };
    let curve = bias_curve(&config)?;
    let mut out = open_output(args.out.as_deref())?;
    write_bias_csv(&curve, &mut out)?;
    out.flush()?;
    eprintln!("max discrepancy {:e}", curve.max_discrepancy);
    Ok(())
}

fn run_validate(args: ValidateArgs) -> Result<(), Failure> {
    let level = match args.level {
        LevelArg::Fast => ValidationLevel::Fast,
        LevelArg::Full => ValidationLevel::Full,
    };
    let mut options = ValidationOptions { seed: args.seed, ..ValidationOptions::new(level) };
    if let Some(Fault::NuSign) = args.inject_fault {
        options.nu = flipped_nu;
    }
    let report = validate(&options);
    println!("{report}");
    if let Some(p) = &args.json {
        std::fs::write(p, report.to_json() + "\n").map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
    }
    if report.passed {
        Ok(())
    } else {
        let names: Vec<&str> = report.failed().map(|c| c.name.as_str()).collect();
        Err(Failure::Runtime(format!("validation failed: {}", names.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::VrfCurve(a) => run_vrf_curve(a),
        Command::BiasCurve(a) => run_bias_curve(a),
        Command::Validate(a) => run_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
