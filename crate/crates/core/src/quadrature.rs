//! Numerical integration: globally adaptive Gauss–Kronrod (7/15) on finite
//! intervals and on the half line, plus Gauss–Legendre rules.

use crate::error::{Error, Result};
use crate::Estimate;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_119,
    0.417_959_183_673_469_4,
];

/// Tolerances and limits for the adaptive integrators.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 0.0,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

/// One 15-point Kronrod panel with the QUADPACK error heuristic.
fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kron.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kron += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kron;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = kron * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kron - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

struct Panel {
    seg: usize,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Globally adaptive integration over a union of segments. Each segment is a
/// finite interval of its own (possibly transformed) integrand.
fn adaptive<F>(segments: &[(f64, f64)], f: F, tol: Tolerance) -> Result<Estimate>
where
    F: Fn(usize, f64) -> f64,
{
    let mut panels: Vec<Panel> = segments
        .iter()
        .enumerate()
        .filter(|(_, (a, b))| b > a)
        .map(|(seg, &(a, b))| {
            let (value, error) = kronrod15(&|x| f(seg, x), a, b);
            Panel {
                seg,
                a,
                b,
                value,
                error,
            }
        })
        .collect();

    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::accuracy(
                "adaptive quadrature (non-finite integrand)",
                f64::INFINITY,
            ));
        }
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(Estimate { value, error });
        }
        if panels.len() >= tol.max_intervals {
            return Err(Error::accuracy(
                "adaptive quadrature (interval limit)",
                error,
            ));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let Panel { seg, a, b, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) {
            return Err(Error::accuracy(
                "adaptive quadrature (roundoff limit)",
                error,
            ));
        }
        for (lo, hi) in [(a, mid), (mid, b)] {
            let (v, e) = kronrod15(&|x| f(seg, x), lo, hi);
            panels.push(Panel {
                seg,
                a: lo,
                b: hi,
                value: v,
                error: e,
            });
        }
    }
}

/// Integrate `f` over the finite interval `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::domain(format!("invalid interval [{a}, {b}]")));
    }
    adaptive(&[(a, b)], |_, x| f(x), tol)
}

/// Integrate `f` over `[0, ∞)`.
///
/// `scales` are positive frequencies at which the integrand changes
/// character. The first piece `[0, s_min]` is integrated directly, pieces
/// between consecutive scales in the logarithm of the variable, and the tail
/// `[s_max, ∞)` after the substitution `x = s_max / t`.
pub fn integrate_half_line(
    f: impl Fn(f64) -> f64,
    scales: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    let mut s: Vec<f64> = scales
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > 0.0)
        .collect();
    if s.is_empty() {
        return Err(Error::domain(
            "half-line quadrature needs at least one positive scale",
        ));
    }
    s.sort_by(f64::total_cmp);
    s.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-12);

    // Segment 0: [0, s0]; segments 1..=m-1: log pieces; segment m: tail in t.
    let m = s.len();
    let mut segments = Vec::with_capacity(m + 1);
    segments.push((0.0, s[0]));
    for w in s.windows(2) {
        segments.push((0.0, (w[1] / w[0]).ln()));
    }
    segments.push((0.0, 1.0));
    let last = s[m - 1];

    adaptive(
        &segments,
        |seg, x| {
            if seg == 0 {
                f(x)
            } else if seg < m {
                let w = s[seg - 1] * x.exp();
                f(w) * w
            } else {
                let w = last / x;
                let v = f(w);
                if v == 0.0 {
                    0.0
                } else {
                    v * last / (x * x)
                }
            }
        },
        tol,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, Tolerance::default()).unwrap();
        assert_relative_eq!(est.value, 10.0, max_relative = 1e-14);
    }

    #[test]
    fn half_line_lorentzian() {
        let est =
            integrate_half_line(|x| 1.0 / (1.0 + x * x), &[1.0], Tolerance::default()).unwrap();
        assert_relative_eq!(est.value, std::f64::consts::FRAC_PI_2, max_relative = 1e-12);
    }

    #[test]
    fn half_line_widely_separated_scales() {
        // ∫ dx / ((x²+a²)(x²+b²)) = π / (2ab(a+b))
        let (a, b) = (1e-3, 1e3);
        let exact = std::f64::consts::PI / (2.0 * a * b * (a + b));
        let est = integrate_half_line(
            |x| 1.0 / ((x * x + a * a) * (x * x + b * b)),
            &[a, b],
            Tolerance::default(),
        )
        .unwrap();
        assert_relative_eq!(est.value, exact, max_relative = 1e-11);
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        for n in [1, 2, 5, 64, 257] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-13);
            let deg = 2 * n - 2;
            let s: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.powi(deg as i32))
                .sum();
            assert_relative_eq!(s, 2.0 / (deg as f64 + 1.0), max_relative = 1e-12);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn reports_nonconvergence() {
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-14,
            max_intervals: 10,
        };
        let r = integrate(|x| x.abs().sqrt().recip(), 0.0, 1.0, tol);
        assert!(matches!(r, Err(Error::Accuracy { .. })));
    }
}
