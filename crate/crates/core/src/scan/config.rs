//! Plain-text scan configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Axes are either a
//! comma-separated list or `log:lo:hi:n` / `lin:lo:hi:n` with both ends
//! included.
//!
//! ```text
//! # log(Z/Z_can) surface
//! quantity = zratio
//! gamma    = 0.1
//! theta    = log:0.1:100:30
//! d        = log:1:100:30
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// What a scan evaluates at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    /// `ln(Z/Z_can)`.
    Zratio,
    /// `ln(S/S_can)`.
    Entropy,
    /// `⟨q²⟩`.
    Qvar,
    /// `⟨p²⟩ − ⟨q²⟩`.
    Delta,
    /// Logarithmic negativity of the coupled pair.
    Negativity,
    /// Modulus of the commutator functional for a harmonic system.
    Bound,
    /// Largest relative gap between the analytic route and the finite-bath
    /// oracle.
    OracleCheck,
}

impl Quantity {
    pub const ALL: [Quantity; 7] = [
        Quantity::Zratio,
        Quantity::Entropy,
        Quantity::Qvar,
        Quantity::Delta,
        Quantity::Negativity,
        Quantity::Bound,
        Quantity::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Zratio => "zratio",
            Quantity::Entropy => "entropy",
            Quantity::Qvar => "qvar",
            Quantity::Delta => "delta",
            Quantity::Negativity => "negativity",
            Quantity::Bound => "bound",
            Quantity::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Quantity::ALL.iter().map(|q| q.name()).collect();
                format!(
                    "unknown quantity '{s}' (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

/// A rectangular `(θ, d)` grid for one quantity at fixed `γ` and `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub theta_axis: Vec<f64>,
    pub d_axis: Vec<f64>,
    pub gamma: f64,
    pub c: f64,
    pub quantity: Quantity,
}

impl ScanGrid {
    /// Grid points in output order: θ outer, `d` inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.theta_axis
            .iter()
            .flat_map(|t| self.d_axis.iter().map(move |d| (*t, *d)))
            .collect()
    }
}

/// Numerical settings that are not grid axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Bath modes per system oscillator in the oracle.
    pub oracle_n: usize,
    /// Oracle discretization reach in units of `ω_D`.
    pub omega_max: f64,
    /// Basis size for the commutator functional.
    pub bound_l: usize,
    /// Coupling operator `S = Σ_k s[k] q^k` for the commutator functional.
    pub bound_s: Vec<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            oracle_n: 4000,
            omega_max: 1000.0,
            bound_l: 40,
            bound_s: vec![0.0, 0.0, 1.0],
        }
    }
}

/// A validated scan configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub quantities: Vec<Quantity>,
    pub theta: Vec<f64>,
    pub d: Vec<f64>,
    pub gamma: f64,
    pub c: f64,
    /// Output directory; the command line may override it.
    pub output: Option<String>,
    pub settings: Settings,
}

impl ScanConfig {
    pub fn grids(&self) -> Vec<ScanGrid> {
        self.quantities
            .iter()
            .map(|q| ScanGrid {
                theta_axis: self.theta.clone(),
                d_axis: self.d.clone(),
                gamma: self.gamma,
                c: self.c,
                quantity: *q,
            })
            .collect()
    }

    /// Re-check invariants, e.g. after loading a manifest.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.check()
            .map_err(|(_, msg)| ConfigError { line: None, msg })
    }

    /// On failure, names the key at fault.
    fn check(&self) -> Result<(), (&'static str, String)> {
        if self.quantities.is_empty() {
            return Err(("quantity", "no quantity given".into()));
        }
        for (name, axis) in [("theta", &self.theta), ("d", &self.d)] {
            check_axis(axis).map_err(|m| (name, format!("{name}: {m}")))?;
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err((
                "gamma",
                format!("gamma must be finite and non-negative, got {}", self.gamma),
            ));
        }
        if !(0.0..1.0).contains(&self.c) {
            return Err(("c", format!("c must lie in [0, 1), got {}", self.c)));
        }
        let s = &self.settings;
        let max = crate::oracle::MAX_BATH;
        if s.oracle_n == 0 || s.oracle_n > max {
            return Err((
                "oracle_n",
                format!("oracle_n must be in 1..={max}, got {}", s.oracle_n),
            ));
        }
        if !(s.omega_max > 0.0 && s.omega_max.is_finite()) {
            return Err((
                "omega_max",
                format!("omega_max must be positive, got {}", s.omega_max),
            ));
        }
        if s.bound_l < 2 {
            return Err((
                "bound_l",
                format!("bound_l must be at least 2, got {}", s.bound_l),
            ));
        }
        if s.bound_s.is_empty() || s.bound_s.iter().any(|v| !v.is_finite()) {
            return Err((
                "bound_s",
                "bound_s needs at least one finite coefficient".into(),
            ));
        }
        Ok(())
    }
}

impl FromStr for ScanConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut seen: Vec<(&str, usize)> = Vec::new();
        let mut quantities = None;
        let (mut theta, mut d, mut gamma) = (None, None, None);
        let mut c = 0.0;
        let mut output = None;
        let mut settings = Settings::default();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let at = |msg: String| ConfigError {
                line: Some(line),
                msg,
            };
            let (key, value) = body
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| at(format!("expected 'key = value', got '{body}'")))?;
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
                return Err(at(format!(
                    "duplicate key '{key}' (first set on line {first})"
                )));
            }
            seen.push((key, line));
            match key {
                "quantity" => {
                    let qs = value
                        .split(',')
                        .map(|s| s.trim().parse::<Quantity>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(at)?;
                    quantities = Some(qs);
                }
                "theta" => theta = Some(parse_axis(value).map_err(at)?),
                "d" => d = Some(parse_axis(value).map_err(at)?),
                "gamma" => gamma = Some(parse_number(value).map_err(at)?),
                "c" => c = parse_number(value).map_err(at)?,
                "output" => output = Some(value.to_string()),
                "oracle_n" => settings.oracle_n = parse_count(value).map_err(at)?,
                "omega_max" => settings.omega_max = parse_number(value).map_err(at)?,
                "bound_l" => settings.bound_l = parse_count(value).map_err(at)?,
                "bound_s" => settings.bound_s = parse_list(value).map_err(at)?,
                _ => return Err(at(format!("unknown key '{key}'"))),
            }
        }

        let missing = |k: &str| ConfigError {
            line: None,
            msg: format!("missing required key '{k}'"),
        };
        let cfg = ScanConfig {
            quantities: quantities.ok_or_else(|| missing("quantity"))?,
            theta: theta.ok_or_else(|| missing("theta"))?,
            d: d.ok_or_else(|| missing("d"))?,
            gamma: gamma.ok_or_else(|| missing("gamma"))?,
            c,
            output,
            settings,
        };
        cfg.check().map_err(|(key, msg)| ConfigError {
            line: seen.iter().find(|(k, _)| *k == key).map(|(_, l)| *l),
            msg,
        })?;
        Ok(cfg)
    }
}

/// A configuration error, tied to a line when one is responsible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.msg),
            None => f.write_str(&self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

fn parse_number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(v)
}

fn parse_count(s: &str) -> Result<usize, String> {
    s.parse()
        .map_err(|_| format!("'{s}' is not a non-negative integer"))
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_number(x.trim())).collect()
}

/// Parse an axis and check it is non-empty, positive and strictly increasing.
pub fn parse_axis(s: &str) -> Result<Vec<f64>, String> {
    let axis = match s.split_once(':') {
        Some((kind @ ("log" | "lin"), rest)) => {
            let parts: Vec<&str> = rest.split(':').collect();
            let [lo, hi, n] = parts[..] else {
                return Err(format!("expected '{kind}:lo:hi:n', got '{s}'"));
            };
            let (lo, hi, n) = (parse_number(lo)?, parse_number(hi)?, parse_count(n)?);
            spaced(kind == "log", lo, hi, n)?
        }
        Some((kind, _)) => return Err(format!("unknown axis spacing '{kind}' (use log or lin)")),
        None => parse_list(s)?,
    };
    check_axis(&axis)?;
    Ok(axis)
}

fn spaced(log: bool, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    match n {
        0 => Ok(Vec::new()),
        1 if lo == hi => Ok(vec![lo]),
        1 => Err("a one-point axis needs lo = hi".into()),
        _ => {
            if log && !(lo > 0.0) {
                return Err("log axis needs lo > 0".into());
            }
            let step = |k: usize| {
                let f = k as f64 / (n - 1) as f64;
                if log {
                    (lo.ln() + f * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + f * (hi - lo)
                }
            };
            let mut v: Vec<f64> = (0..n).map(step).collect();
            v[0] = lo;
            v[n - 1] = hi;
            Ok(v)
        }
    }
}

fn check_axis(axis: &[f64]) -> Result<(), String> {
    if axis.is_empty() {
        return Err("axis is empty".into());
    }
    if axis.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err("axis values must be positive and finite".into());
    }
    if axis.windows(2).any(|p| p[0] >= p[1]) {
        return Err("axis must be strictly increasing".into());
    }
    Ok(())
}
