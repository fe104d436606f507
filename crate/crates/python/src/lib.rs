//! Python bindings: spectral densities, single-oscillator observables, the
//! finite-bath oracle, pair negativity and the commutator functional.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use clequil_core::bound::{truncation_study, TruncatedSystem};
use clequil_core::entanglement::{self, CoupledPair};
use clequil_core::equilibrium::{self, OscillatorObservables};
use clequil_core::oracle::{self, DiscretizationRule};
use clequil_core::scan::{self, Inputs, Quantity, ScanError, Settings};
use clequil_core::{Error, Estimate};

create_exception!(
    clequil,
    AccuracyError,
    PyArithmeticError,
    "A result missed its accuracy target."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Stability(_) => PyValueError::new_err(e.to_string()),
        Error::Accuracy { .. } => AccuracyError::new_err(e.to_string()),
        Error::Model(_) | Error::Consistency(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn pair(e: Estimate) -> (f64, f64) {
    (e.value, e.error)
}

/// Drude spectral density `J(ω) = γω ω_D²/(ω² + ω_D²)`.
#[pyclass(frozen, skip_from_py_object, module = "clequil")]
#[derive(Clone)]
struct SpectralDensity(clequil_core::SpectralDensity);

#[pymethods]
impl SpectralDensity {
    #[new]
    fn new(gamma: f64, omega_d: f64) -> PyResult<Self> {
        clequil_core::SpectralDensity::drude(gamma, omega_d)
            .map(SpectralDensity)
            .map_err(to_py)
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    #[getter]
    fn omega_d(&self) -> f64 {
        self.0.omega_d()
    }

    fn __call__(&self, omega: f64) -> PyResult<f64> {
        clequil_core::bath::spectral_density(&self.0, omega).map_err(to_py)
    }

    /// `γ̃(ν)` at imaginary frequency `ν ≥ 0`.
    fn effective_coupling(&self, nu: f64) -> PyResult<f64> {
        clequil_core::bath::effective_coupling_closed(&self.0, nu).map_err(to_py)
    }

    /// Imaginary-time kernel `K(σ)` as `(value, error)`.
    fn kernel(&self, theta: f64, sigma: f64) -> PyResult<(f64, f64)> {
        let tp = thermal(theta)?;
        clequil_core::bath::kernel_series(&self.0, &tp, sigma)
            .map(pair)
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralDensity(gamma={}, omega_d={})",
            self.0.gamma(),
            self.0.omega_d()
        )
    }
}

fn thermal(theta: f64) -> PyResult<clequil_core::ThermalPoint> {
    clequil_core::ThermalPoint::new(theta).map_err(to_py)
}

/// Equilibrium moments of one damped oscillator; each entry is `(value, error)`.
#[pyclass(frozen, get_all, module = "clequil")]
struct Observables {
    omega_sq: f64,
    q_var: (f64, f64),
    p_var: (f64, f64),
    delta: (f64, f64),
    log_z: (f64, f64),
    log_ratio: (f64, f64),
    entropy: (f64, f64),
    log_z_can: f64,
    entropy_can: f64,
    symplectic: f64,
}

impl From<OscillatorObservables> for Observables {
    fn from(o: OscillatorObservables) -> Self {
        Observables {
            omega_sq: o.omega_sq,
            q_var: pair(o.q_var),
            p_var: pair(o.p_var),
            delta: pair(o.delta),
            log_z: pair(o.log_z),
            log_ratio: pair(o.log_ratio),
            entropy: pair(o.entropy),
            log_z_can: o.log_z_can,
            entropy_can: o.entropy_can,
            symplectic: o.symplectic(),
        }
    }
}

#[pymethods]
impl Observables {
    fn __repr__(&self) -> String {
        format!(
            "Observables(q_var={:.6e}, p_var={:.6e}, log_ratio={:.6e})",
            self.q_var.0, self.p_var.0, self.log_ratio.0
        )
    }
}

/// Observables of an oscillator with squared frequency `omega_sq`.
#[pyfunction]
#[pyo3(signature = (sd, theta, omega_sq = 1.0))]
fn observables(sd: &SpectralDensity, theta: f64, omega_sq: f64) -> PyResult<Observables> {
    equilibrium::oscillator_observables(&sd.0, &thermal(theta)?, omega_sq)
        .map(Observables::from)
        .map_err(to_py)
}

/// `ln(S/S_can)` as `(value, error)`.
#[pyfunction]
fn entropy_ratio(sd: &SpectralDensity, theta: f64) -> PyResult<(f64, f64)> {
    equilibrium::entropy_ratio(&sd.0, &thermal(theta)?)
        .map(pair)
        .map_err(to_py)
}

/// Named scan quantity at one point, as `(value, error)`.
#[pyfunction]
#[pyo3(signature = (quantity, theta, d, gamma, c = 0.0))]
fn evaluate(
    py: Python<'_>,
    quantity: &str,
    theta: f64,
    d: f64,
    gamma: f64,
    c: f64,
) -> PyResult<(f64, f64)> {
    let q: Quantity = quantity.parse().map_err(PyValueError::new_err)?;
    let inp = Inputs { theta, d, gamma, c };
    py.detach(|| scan::evaluate(q, &inp, &Settings::default()))
        .map(pair)
        .map_err(to_py)
}

/// Oracle observables of a discretized bath with `n` modes.
#[pyfunction]
#[pyo3(signature = (sd, theta, n = 4000, omega_max = 1000.0))]
fn oracle_observables(
    py: Python<'_>,
    sd: &SpectralDensity,
    theta: f64,
    n: usize,
    omega_max: f64,
) -> PyResult<(f64, f64, f64)> {
    let tp = thermal(theta)?;
    let rule = DiscretizationRule {
        n_bath: n,
        omega_max,
    };
    py.detach(|| {
        let sm = oracle::discretize(&sd.0, &rule)?;
        let modes = sm.normal_modes()?;
        let st = modes.quantum_reduced_state(&tp)?;
        Ok((
            st.sigma()[(0, 0)],
            st.sigma()[(1, 1)],
            modes.partition_ratio(&tp),
        ))
    })
    .map_err(to_py)
}

/// Logarithmic negativity of two oscillators coupled by `c q₁q₂`.
#[pyfunction]
fn negativity(c: f64, sd: &SpectralDensity, theta: f64) -> PyResult<(f64, f64)> {
    let cp = CoupledPair::new(c, sd.0).map_err(to_py)?;
    entanglement::negativity(&cp, &thermal(theta)?)
        .map(pair)
        .map_err(to_py)
}

/// Temperature in `[lo, hi]` where the pair negativity vanishes, if any.
#[pyfunction]
fn crossing_temperature(
    c: f64,
    sd: &SpectralDensity,
    lo: f64,
    hi: f64,
) -> PyResult<Option<(f64, f64)>> {
    let cp = CoupledPair::new(c, sd.0).map_err(to_py)?;
    entanglement::crossing_temperature(&cp, lo, hi)
        .map(|r| r.map(pair))
        .map_err(to_py)
}

/// Commutator functional for `H = p²/2 + ω²q²/2` in an `l`-level basis with
/// `S = Σ s[k] qᵏ`. Returns `(re, im, scale, error, truncation_change)`.
#[pyfunction]
#[pyo3(signature = (sd, theta, l = 40, s = vec![0.0, 0.0, 1.0], omega = 1.0))]
fn bound(
    py: Python<'_>,
    sd: &SpectralDensity,
    theta: f64,
    l: usize,
    s: Vec<f64>,
    omega: f64,
) -> PyResult<(f64, f64, f64, f64, f64)> {
    let tp = thermal(theta)?;
    py.detach(|| {
        let st = truncation_study(l, |n| TruncatedSystem::harmonic(n, omega, &s), &sd.0, &tp)?;
        Ok((
            st.fine.value.re,
            st.fine.value.im,
            st.fine.scale,
            st.fine.error,
            st.relative_change,
        ))
    })
    .map_err(to_py)
}

/// Run a scan config, writing CSVs and `manifest.json` to `out_dir`.
/// Returns the manifest as a JSON string.
#[pyfunction]
fn run_scan(py: Python<'_>, config: PathBuf, out_dir: PathBuf) -> PyResult<String> {
    py.detach(|| {
        let cfg = scan::load_config(&config)?;
        let manifest = scan::run_scan(&cfg, &out_dir)?;
        Ok(serde_json::to_string(&manifest).expect("manifest serializes"))
    })
    .map_err(|e: ScanError| match e {
        ScanError::Config { .. } => PyValueError::new_err(e.to_string()),
        ScanError::Io { .. } => PyIOError::new_err(e.to_string()),
    })
}

#[pymodule]
mod clequil {
    #[pymodule_export]
    use super::{
        bound, crossing_temperature, entropy_ratio, evaluate, negativity, observables,
        oracle_observables, run_scan, AccuracyError, Observables, SpectralDensity,
    };
}
