use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use clequil_core::bound::{truncation_study, TruncatedSystem};
use clequil_core::scan::{self, run, Inputs, Quantity, Settings};
use clequil_core::{Error, SpectralDensity, ThermalPoint};

const EXIT_ACCURACY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "clequil",
    version,
    about = "Equilibrium of oscillators in harmonic baths"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the grid scans described by a config file or an earlier manifest.json.
    Scan {
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one quantity at one point and print a JSON record.
    Point {
        quantity: Quantity,
        #[command(flatten)]
        at: PointArgs,
        /// Also run the finite-bath oracle with this many modes.
        #[arg(long)]
        oracle_n: Option<usize>,
        #[command(flatten)]
        numerics: NumericArgs,
    },
    /// Compare the analytic route with the finite-bath oracle.
    OracleCheck {
        #[command(flatten)]
        at: PointArgs,
        /// Bath modes in the oracle.
        #[arg(long, default_value_t = 4000)]
        n: usize,
        /// Bath modes of a second, densely solved model for the uncertainty moments.
        #[arg(long)]
        dense_n: Option<usize>,
        /// Largest accepted relative gap.
        #[arg(long, default_value_t = run::ORACLE_TOLERANCE)]
        tol: f64,
        #[arg(long, default_value_t = 1000.0)]
        omega_max: f64,
    },
    /// Commutator functional for a harmonic system, with a basis-doubling check.
    Bound {
        /// Temperatures, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        theta: Vec<f64>,
        #[arg(long = "d")]
        d: f64,
        #[arg(long)]
        gamma: f64,
        /// Basis size L (the check also uses 2L).
        #[arg(long, default_value_t = 40)]
        l: usize,
        /// Coupling operator coefficients: S = s0 + s1 q + s2 q² + ...
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,0,1",
            allow_negative_numbers = true
        )]
        s: Vec<f64>,
    },
}

#[derive(Args)]
struct PointArgs {
    #[arg(long)]
    theta: f64,
    #[arg(long = "d")]
    d: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    c: f64,
}

impl PointArgs {
    fn inputs(&self) -> Inputs {
        Inputs {
            theta: self.theta,
            d: self.d,
            gamma: self.gamma,
            c: self.c,
        }
    }
}

#[derive(Args)]
struct NumericArgs {
    #[arg(long, default_value_t = 1000.0)]
    omega_max: f64,
    #[arg(long, default_value_t = 40)]
    bound_l: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0,1",
        allow_negative_numbers = true
    )]
    bound_s: Vec<f64>,
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: run::exit_code(&e),
            msg: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Scan { config, out } => scan_cmd(config, out),
        Command::Point {
            quantity,
            at,
            oracle_n,
            numerics,
        } => {
            let settings = Settings {
                omega_max: numerics.omega_max,
                bound_l: numerics.bound_l,
                bound_s: numerics.bound_s,
                ..Settings::default()
            };
            let rec = scan::run_point(quantity, &at.inputs(), &settings, oracle_n)?;
            print_json(&rec);
            Ok(if rec.ok { 0 } else { EXIT_ACCURACY })
        }
        Command::OracleCheck {
            at,
            n,
            dense_n,
            tol,
            omega_max,
        } => {
            let settings = Settings {
                oracle_n: n,
                omega_max,
                ..Settings::default()
            };
            let report = scan::oracle_report(&at.inputs(), &settings, dense_n)?;
            print_json(&report);
            Ok(if report.max_relative_gap <= tol {
                0
            } else {
                EXIT_ACCURACY
            })
        }
        Command::Bound {
            theta,
            d,
            gamma,
            l,
            s,
        } => bound_cmd(&theta, d, gamma, l, &s),
    }
}

fn scan_cmd(config: PathBuf, out: Option<PathBuf>) -> Result<u8, Failure> {
    let fail = |e: scan::ScanError| {
        let code = match e {
            scan::ScanError::Config { .. } => EXIT_USAGE,
            scan::ScanError::Io { .. } => EXIT_IO,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    };
    let cfg = scan::load_config(&config).map_err(fail)?;
    let out = out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let manifest = scan::run_scan(&cfg, &out).map_err(fail)?;
    let mut code = 0;
    for o in &manifest.outputs {
        let bad = o.ok.iter().filter(|f| !**f).count();
        eprintln!(
            "{}: {} rows, {} below accuracy target",
            out.join(&o.file).display(),
            o.rows,
            bad
        );
        for f in &o.failures {
            eprintln!("  theta={} d={}: {}", f.theta, f.d, f.message);
        }
        if bad > 0 {
            code = EXIT_ACCURACY;
        }
    }
    Ok(code)
}

#[derive(Serialize)]
struct BoundRow {
    theta: f64,
    re: f64,
    im: f64,
    modulus: f64,
    scale: f64,
    err_estimate: f64,
    /// Relative change from L to 2L.
    truncation_change: f64,
}

fn bound_cmd(thetas: &[f64], d: f64, gamma: f64, l: usize, s: &[f64]) -> Result<u8, Failure> {
    let sd = SpectralDensity::drude(gamma, d)?;
    let build = |n| TruncatedSystem::harmonic(n, 1.0, s);
    let mut rows = Vec::with_capacity(thetas.len());
    for &t in thetas {
        let st = truncation_study(l, build, &sd, &ThermalPoint::new(t)?)?;
        rows.push(BoundRow {
            theta: t,
            re: st.fine.value.re,
            im: st.fine.value.im,
            modulus: st.fine.modulus(),
            scale: st.fine.scale,
            err_estimate: st.fine.error,
            truncation_change: st.relative_change,
        });
    }
    print_json(&rows);
    Ok(0)
}

fn print_json<T: Serialize>(v: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("record serializes")
    );
}
