//! Point evaluation, oracle comparison, grid scans and their output files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, Quantity, ScanConfig, ScanGrid, Settings};
use crate::bound::{bound_functional, bound_functional_quadrature, TruncatedSystem};
use crate::entanglement::{negativity, CoupledPair};
use crate::equilibrium::{self, entropy_canonical};
use crate::error::{Error, Result};
use crate::gaussian::{logarithmic_negativity, von_neumann_entropy};
use crate::oracle::{self, DiscretizationRule, UncertaintyQuantities};
use crate::{Estimate, SpectralDensity, ThermalPoint};

/// A grid point passes when `err_estimate ≤ ACCURACY_TARGET·max(1, |value|)`.
pub const ACCURACY_TARGET: f64 = 1e-8;
/// Largest relative analytic-vs-oracle gap an `oracle-check` point accepts.
pub const ORACLE_TOLERANCE: f64 = 1e-3;

/// Physical inputs of a single evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub theta: f64,
    pub d: f64,
    pub gamma: f64,
    pub c: f64,
}

impl Inputs {
    fn spectral_density(&self) -> Result<SpectralDensity> {
        SpectralDensity::drude(self.gamma, self.d)
    }

    fn thermal_point(&self) -> Result<ThermalPoint> {
        ThermalPoint::new(self.theta)
    }

    fn rule(&self, settings: &Settings) -> DiscretizationRule {
        DiscretizationRule {
            n_bath: settings.oracle_n,
            omega_max: settings.omega_max,
        }
    }
}

/// Analytic value of `q` with its error estimate.
pub fn evaluate(q: Quantity, inp: &Inputs, settings: &Settings) -> Result<Estimate> {
    let sd = inp.spectral_density()?;
    let tp = inp.thermal_point()?;
    match q {
        Quantity::Zratio => equilibrium::log_partition_ratio(&sd, &tp),
        Quantity::Entropy => equilibrium::entropy_ratio(&sd, &tp),
        Quantity::Qvar => equilibrium::q_variance(&sd, &tp),
        Quantity::Delta => equilibrium::squeezing_delta(&sd, &tp),
        Quantity::Negativity => negativity(&CoupledPair::new(inp.c, sd)?, &tp),
        Quantity::Bound => {
            let ts = TruncatedSystem::harmonic(settings.bound_l, 1.0, &settings.bound_s)?;
            let b = bound_functional(&ts, &sd, &tp)?;
            Ok(Estimate {
                value: b.modulus(),
                error: b.error,
            })
        }
        Quantity::OracleCheck => {
            let r = oracle_report(inp, settings, None)?;
            Ok(Estimate {
                value: r.max_relative_gap,
                error: r.max_relative_error,
            })
        }
    }
}

/// Whether an evaluation of `q` meets its accuracy target.
pub fn meets_target(q: Quantity, est: &Estimate) -> bool {
    let accurate = est.error.is_finite() && est.error <= ACCURACY_TARGET * est.value.abs().max(1.0);
    match q {
        Quantity::OracleCheck => accurate && est.value <= ORACLE_TOLERANCE,
        _ => accurate && est.value.is_finite(),
    }
}

/// The same quantity from an independent route: the finite-bath oracle, or
/// for `bound` the quadrature evaluation of the functional. `None` for
/// `oracle-check`, which is already a comparison.
pub fn oracle_value(q: Quantity, inp: &Inputs, settings: &Settings) -> Result<Option<f64>> {
    let sd = inp.spectral_density()?;
    let tp = inp.thermal_point()?;
    let rule = inp.rule(settings);
    let single =
        || -> Result<oracle::NormalModes> { oracle::discretize(&sd, &rule)?.normal_modes() };
    let v = match q {
        Quantity::Zratio => single()?.partition_ratio(&tp),
        Quantity::Qvar => single()?.quantum_reduced_state(&tp)?.sigma()[(0, 0)],
        Quantity::Delta => {
            let st = single()?.quantum_reduced_state(&tp)?;
            st.sigma()[(1, 1)] - st.sigma()[(0, 0)]
        }
        Quantity::Entropy => {
            let st = single()?.quantum_reduced_state(&tp)?;
            (von_neumann_entropy(&st) / entropy_canonical(1.0, tp.beta())).ln()
        }
        Quantity::Negativity => {
            CoupledPair::new(inp.c, sd)?;
            let sm = oracle::discretize_pair(&sd, &rule, inp.c)?;
            logarithmic_negativity(&oracle::quantum_reduced_state(&sm, &tp)?, &[1])?
        }
        Quantity::Bound => {
            let ts = TruncatedSystem::harmonic(settings.bound_l, 1.0, &settings.bound_s)?;
            bound_functional_quadrature(&ts, &sd, &tp, false)?.modulus()
        }
        Quantity::OracleCheck => return Ok(None),
    };
    Ok(Some(v))
}

/// One analytic-vs-oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub analytic: f64,
    pub err_estimate: f64,
    pub oracle: f64,
    pub relative_gap: f64,
}

impl Comparison {
    fn new(analytic: Estimate, oracle: f64) -> Self {
        Comparison {
            analytic: analytic.value,
            err_estimate: analytic.error,
            oracle,
            relative_gap: relative_gap(analytic.value, oracle),
        }
    }
}

fn relative_gap(reference: f64, other: f64) -> f64 {
    if reference == other {
        0.0
    } else {
        (other - reference).abs() / reference.abs()
    }
}

/// Analytic route against the finite-bath oracle at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub inputs: Inputs,
    pub n_bath: usize,
    pub omega_max: f64,
    pub q_var: Comparison,
    pub p_var: Comparison,
    pub log_ratio: Comparison,
    pub entropy: Comparison,
    /// `⟨q₁q₂⟩` of the coupled pair, when `c > 0`.
    pub pair_q1q2: Option<Comparison>,
    /// Classical reduced `⟨q²⟩/θ` and `⟨p²⟩/θ`; both are exactly 1.
    pub classical_q_over_theta: f64,
    pub classical_p_over_theta: f64,
    /// Exact uncertainty moments on a smaller model solved densely.
    pub uncertainty: Option<UncertaintyQuantities>,
    pub max_relative_gap: f64,
    /// Largest analytic relative error estimate among the comparisons.
    pub max_relative_error: f64,
}

/// Compare every observable the oracle provides. With `dense_n`, the
/// uncertainty moments are added from a model with that many bath modes.
pub fn oracle_report(
    inp: &Inputs,
    settings: &Settings,
    dense_n: Option<usize>,
) -> Result<OracleReport> {
    let sd = inp.spectral_density()?;
    let tp = inp.thermal_point()?;
    let rule = inp.rule(settings);
    let sm = oracle::discretize(&sd, &rule)?;
    let nm = sm.normal_modes()?;
    let st = nm.quantum_reduced_state(&tp)?;
    let obs = equilibrium::observables(&sd, &tp)?;
    let q_var = Comparison::new(obs.q_var, st.sigma()[(0, 0)]);
    let p_var = Comparison::new(obs.p_var, st.sigma()[(1, 1)]);
    let log_ratio = Comparison::new(obs.log_ratio, nm.partition_ratio(&tp));
    let entropy = Comparison::new(obs.entropy, von_neumann_entropy(&st));

    let pair_q1q2 = if inp.c > 0.0 {
        let cp = CoupledPair::new(inp.c, sd)?;
        let ps = crate::entanglement::pair_covariance(&cp, &tp)?;
        let pm = oracle::discretize_pair(&sd, &rule, inp.c)?;
        let ost = oracle::quantum_reduced_state(&pm, &tp)?;
        Some(Comparison::new(
            Estimate {
                value: ps.state.sigma()[(0, 2)],
                error: ps.error,
            },
            ost.sigma()[(0, 2)],
        ))
    } else {
        None
    };

    let cl = oracle::classical_reduced_state(&sm, &tp)?;
    let uncertainty = match dense_n {
        Some(n) => {
            let small = oracle::discretize(&sd, &DiscretizationRule { n_bath: n, ..rule })?;
            Some(oracle::uncertainty_quantities(&small, &tp)?)
        }
        None => None,
    };

    let all: Vec<&Comparison> = [&q_var, &p_var, &log_ratio, &entropy]
        .into_iter()
        .chain(pair_q1q2.as_ref())
        .collect();
    let max_relative_gap = all.iter().map(|c| c.relative_gap).fold(0.0, f64::max);
    let max_relative_error = all
        .iter()
        .map(|c| {
            if c.analytic == 0.0 {
                0.0
            } else {
                c.err_estimate / c.analytic.abs()
            }
        })
        .fold(0.0, f64::max);
    Ok(OracleReport {
        inputs: *inp,
        n_bath: rule.n_bath,
        omega_max: rule.omega_max,
        q_var,
        p_var,
        log_ratio,
        entropy,
        pair_q1q2,
        classical_q_over_theta: cl[(0, 0)] / inp.theta,
        classical_p_over_theta: cl[(1, 1)] / inp.theta,
        uncertainty,
        max_relative_gap,
        max_relative_error,
    })
}

/// Output of `point`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub quantity: Quantity,
    pub inputs: Inputs,
    pub value: f64,
    pub err_estimate: f64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_gap: Option<f64>,
}

/// Evaluate one point; with `oracle_n`, also run the oracle with that many
/// bath modes and report the absolute gap.
pub fn run_point(
    q: Quantity,
    inp: &Inputs,
    settings: &Settings,
    oracle_n: Option<usize>,
) -> Result<PointRecord> {
    let est = evaluate(q, inp, settings)?;
    let (oracle_value, oracle_gap) = match oracle_n {
        Some(n) => {
            let s = Settings {
                oracle_n: n,
                ..settings.clone()
            };
            let o = oracle_value(q, inp, &s)?;
            (o, o.map(|v| (v - est.value).abs()))
        }
        None => (None, None),
    };
    Ok(PointRecord {
        quantity: q,
        inputs: *inp,
        value: est.value,
        err_estimate: est.error,
        ok: meets_target(q, &est),
        oracle_value,
        oracle_gap,
    })
}

/// Result at one grid point. Failed evaluations keep their message and
/// are written as `NaN` with an infinite error.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub theta: f64,
    pub d: f64,
    pub estimate: Estimate,
    pub ok: bool,
    pub message: Option<String>,
}

/// Evaluate a grid in parallel; the result is in [`ScanGrid::points`] order.
pub fn scan_grid(grid: &ScanGrid, settings: &Settings) -> Vec<PointOutcome> {
    grid.points()
        .par_iter()
        .map(|&(theta, d)| {
            let inp = Inputs {
                theta,
                d,
                gamma: grid.gamma,
                c: grid.c,
            };
            match evaluate(grid.quantity, &inp, settings) {
                Ok(est) => PointOutcome {
                    theta,
                    d,
                    ok: meets_target(grid.quantity, &est),
                    estimate: est,
                    message: None,
                },
                Err(e) => PointOutcome {
                    theta,
                    d,
                    estimate: Estimate {
                        value: f64::NAN,
                        error: f64::INFINITY,
                    },
                    ok: false,
                    message: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub const CSV_HEADER: &str = "theta,d,gamma,c,value,err_estimate";

/// Seventeen significant digits, locale independent.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_text(grid: &ScanGrid, outcomes: &[PointOutcome]) -> String {
    let mut out = String::with_capacity(96 * (outcomes.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in outcomes {
        let row = [
            p.theta,
            p.d,
            grid.gamma,
            grid.c,
            p.estimate.value,
            p.estimate.error,
        ];
        let cells: Vec<String> = row.iter().map(|x| format_number(*x)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Per-point failure recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub index: usize,
    pub theta: f64,
    pub d: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub quantity: Quantity,
    pub file: String,
    pub rows: usize,
    /// Accuracy flag per row, in CSV order.
    pub ok: Vec<bool>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ScanConfig,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputEntry>,
}

impl Manifest {
    pub fn all_ok(&self) -> bool {
        self.outputs.iter().all(|o| o.ok.iter().all(|f| *f))
    }
}

/// Failures of a scan run that are not per-point accuracy problems.
#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Load a scan configuration from a plain-text config file or from a
/// `manifest.json` written by an earlier run.
pub fn load_config(path: &Path) -> std::result::Result<ScanConfig, ScanError> {
    let text = fs::read_to_string(path).map_err(|source| ScanError::Io {
        path: path.to_owned(),
        source,
    })?;
    let config_err = |source| ScanError::Config {
        path: path.to_owned(),
        source,
    };
    if text.trim_start().starts_with('{') {
        let m: Manifest = serde_json::from_str(&text).map_err(|e| {
            config_err(ConfigError {
                line: Some(e.line()),
                msg: format!("invalid manifest: {e}"),
            })
        })?;
        m.config.validate().map_err(config_err)?;
        Ok(m.config)
    } else {
        text.parse().map_err(config_err)
    }
}

/// Run every grid of `cfg`, writing `<quantity>.csv` files and
/// `manifest.json` into `out_dir`.
pub fn run_scan(cfg: &ScanConfig, out_dir: &Path) -> std::result::Result<Manifest, ScanError> {
    let start = Instant::now();
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| ScanError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut outputs = Vec::new();
    for grid in cfg.grids() {
        let outcomes = scan_grid(&grid, &cfg.settings);
        let file = format!("{}.csv", grid.quantity);
        let path = out_dir.join(&file);
        fs::write(&path, csv_text(&grid, &outcomes)).map_err(io(&path))?;
        let failures = outcomes
            .iter()
            .enumerate()
            .filter_map(|(index, p)| {
                p.message.as_ref().map(|m| Failure {
                    index,
                    theta: p.theta,
                    d: p.d,
                    message: m.clone(),
                })
            })
            .collect();
        outputs.push(OutputEntry {
            quantity: grid.quantity,
            file,
            rows: outcomes.len(),
            ok: outcomes.iter().map(|p| p.ok).collect(),
            failures,
        });
    }
    let manifest = Manifest {
        tool: "clequil".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(io(&path))?;
    Ok(manifest)
}

/// Exit status for a library error: bad inputs are usage errors, the rest
/// are accuracy or model failures.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Stability(_) => 2,
        Error::Accuracy { .. } | Error::Model(_) | Error::Consistency(_) => 1,
    }
}
