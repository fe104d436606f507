//! Matsubara-type sums `Σ_{n≥1} g(nΩ)` with an analytic tail.
//!
//! The first `N` terms are summed explicitly. Beyond them the summand is
//! replaced by its expansion in `u = NΩ/ν`, and every power is summed exactly
//! through scaled Hurwitz zeta values `Σ_{n>N} (N/n)^k`. `N` is chosen so that
//! `u ≤ 1/4` on the tail, which makes the expansion converge geometrically.

use crate::error::{Error, Result};
use crate::Estimate;

/// Hard cap on explicitly summed terms.
pub const MAX_TERMS: usize = 10_000_000;

const MIN_TERMS: usize = 16;
const TAIL_ORDER: usize = 64;
// Tail starts where the nearest singularity of the summand is at most a
// quarter of the first tail frequency.
const RADIUS_FACTOR: f64 = 4.0;

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Power-series coefficients of `num(u) / den(u)` up to `u^order`.
/// `den[0]` must be non-zero.
pub fn series_div(num: &[f64], den: &[f64], order: usize) -> Vec<f64> {
    let mut c = vec![0.0; order + 1];
    for k in 0..=order {
        let mut acc = num.get(k).copied().unwrap_or(0.0);
        for j in 1..den.len().min(k + 1) {
            acc -= den[j] * c[k - j];
        }
        c[k] = acc / den[0];
    }
    c
}

/// Power-series coefficients of `ln p(u)` up to `u^order`, for `p[0] = 1`.
pub fn series_ln(p: &[f64], order: usize) -> Vec<f64> {
    debug_assert!((p[0] - 1.0).abs() < 1e-15);
    let dp: Vec<f64> = p
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| k as f64 * a)
        .collect();
    let q = series_div(&dp, p, order.saturating_sub(1));
    let mut c = vec![0.0; order + 1];
    for k in 1..=order {
        c[k] = q[k - 1] / k as f64;
    }
    c
}

/// `Σ_{n>N} (N/n)^k` for `k ≥ 2`, i.e. `N^k ζ(k, N+1)`.
pub fn scaled_hurwitz(k: u32, n: usize) -> f64 {
    assert!(k >= 2, "scaled Hurwitz zeta needs k >= 2");
    let nf = n as f64;
    let kf = k as f64;
    let start = (2.0 * kf + 16.0).max(nf + 1.0) as usize;
    let mut acc = Neumaier::default();
    for m in (n + 1)..start {
        acc.add((nf / m as f64).powi(k as i32));
    }
    // Euler–Maclaurin from a = start.
    const B: [f64; 6] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
    ];
    let a = start as f64;
    let fa = (nf / a).powi(k as i32);
    let mut bracket = a / (kf - 1.0) + 0.5;
    // (k)_{2j-1} / (2j)! / a^{2j-1}
    let mut rising = kf;
    let mut fact = 2.0;
    let mut apow = a;
    for (j, b) in B.iter().enumerate() {
        bracket += b * rising / (fact * apow);
        let m = 2 * j as u32 + 1;
        rising *= (kf + m as f64) * (kf + m as f64 + 1.0);
        fact *= (2 * j + 3) as f64 * (2 * j + 4) as f64;
        apow *= a * a;
    }
    acc.add(fa * bracket);
    acc.value()
}

/// A summand for [`matsubara_sum`].
pub trait Summand {
    /// Exact value at frequency `nu > 0`.
    fn eval(&self, nu: f64) -> f64;

    /// Upper bound on the modulus of every singularity of the summand in the
    /// complex frequency plane.
    fn radius(&self) -> f64;

    /// Coefficients `c_k` with `g(ν) = Σ_k c_k (s/ν)^k` for `ν ≥ s`, up to
    /// `order`. Must satisfy `c_0 = c_1 = 0`.
    fn expansion(&self, s: f64, order: usize) -> Vec<f64>;
}

/// Evaluate `Σ_{n≥1} g(nΩ)` to near machine precision.
pub fn matsubara_sum(g: &impl Summand, omega: f64) -> Result<Estimate> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::domain(format!(
            "Matsubara spacing must be positive, got {omega}"
        )));
    }
    let wanted = (RADIUS_FACTOR * g.radius() / omega).ceil();
    if !(wanted.is_finite()) || wanted > MAX_TERMS as f64 {
        return Err(Error::accuracy(
            format!("Matsubara sum needs {wanted:e} explicit terms (cap {MAX_TERMS})"),
            f64::INFINITY,
        ));
    }
    let n = (wanted as usize).max(MIN_TERMS);

    let mut explicit = Neumaier::default();
    let mut abs_sum = 0.0;
    for k in 1..=n {
        let v = g.eval(k as f64 * omega);
        explicit.add(v);
        abs_sum += v.abs();
    }

    let coeffs = g.expansion(n as f64 * omega, TAIL_ORDER);
    debug_assert!(
        coeffs[0] == 0.0 && coeffs[1].abs() <= 1e-12 * coeffs.iter().map(|c| c.abs()).sum::<f64>()
    );
    let mut tail = Neumaier::default();
    let mut last = 0.0;
    let scale = explicit.value().abs().max(abs_sum * 1e-300);
    let mut small_run = 0;
    for (k, c) in coeffs.iter().enumerate().skip(2) {
        if *c == 0.0 {
            continue;
        }
        let term = c * scaled_hurwitz(k as u32, n);
        tail.add(term);
        last = term.abs();
        if last <= 1e-18 * scale.max(tail.value().abs()) {
            small_run += 1;
            if small_run >= 3 {
                break;
            }
        } else {
            small_run = 0;
        }
    }
    let value = explicit.value() + tail.value();
    let roundoff = f64::EPSILON * (abs_sum + tail.value().abs()) * (n as f64).sqrt().max(1.0);
    Ok(Estimate {
        value,
        error: 4.0 * last + roundoff,
    })
}
