//! Eigenproblem of a symmetric matrix bordered by a diagonal block,
//!
//! ```text
//! H = [ A   Bᵀ      ]      A: s×s (s ≤ 2), diag(p): bath block,
//!     [ B   diag(p) ]      B_i = −sqrt(k_i p_i) e_{owner(i)},
//! ```
//!
//! with `A = diag(w + Σ_{i∈r} k_i) − c·offdiag`. This is the mass-weighted
//! Hessian of oscillators coupled to baths through `(q_j − q)²`. By the
//! Haynsworth inertia formula the number of eigenvalues below `λ` is
//! `#{p_i < λ} + #{negative eigenvalues of S(λ)}` with the Schur complement
//!
//! ```text
//! S(λ)_rr = w − λ (1 + Σ_{i∈r} k_i/(p_i − λ)),   S(λ)_01 = −c,
//! ```
//!
//! in which the counterterm has been cancelled analytically. Eigenvalues are
//! isolated by counting and polished by safeguarded Newton on the branch of
//! `S(λ)` that crosses zero.

use rayon::prelude::*;

use crate::error::{Error, Result};

const MAX_ITER: usize = 300;
// Relative size of a second small Schur eigenvalue that marks a degenerate pair.
const DEGENERATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct Bordered {
    /// Number of system coordinates (1 or 2).
    pub s: usize,
    /// Squared bare system frequency.
    pub w: f64,
    /// Bilinear system coupling (`−c q₀ q₁`).
    pub c: f64,
    /// Bath poles `ω_i²`, ascending.
    pub poles: Vec<f64>,
    /// Coupling stiffness `k_i = m_i ω_i²`, aligned with `poles`.
    pub k: Vec<f64>,
    /// System coordinate each pole couples to.
    pub owner: Vec<u8>,
}

/// One eigenpair projected onto the system coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SystemMode {
    pub lambda: f64,
    /// `u uᵀ/‖x‖²` for the normalized eigenvector `x` with system part `u`.
    pub weight: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy)]
struct Sym2 {
    a: f64,
    b: f64,
    c: f64,
}

impl Sym2 {
    /// Eigenvalues ascending, each with a unit eigenvector.
    fn eigen(&self) -> [(f64, [f64; 2]); 2] {
        let Sym2 { a, b, c } = *self;
        if c == 0.0 {
            return if a <= b {
                [(a, [1.0, 0.0]), (b, [0.0, 1.0])]
            } else {
                [(b, [0.0, 1.0]), (a, [1.0, 0.0])]
            };
        }
        let m = 0.5 * (a + b);
        let r = (0.5 * (a - b)).hypot(c);
        let det = a * b - c * c;
        // Take the larger-magnitude eigenvalue directly and the other from
        // the determinant to avoid cancellation near a root.
        let (lo, hi) = if m >= 0.0 {
            let hi = m + r;
            (det / hi, hi)
        } else {
            let lo = m - r;
            (lo, det / lo)
        };
        let vec = |mu: f64| {
            // (A − μ)v = 0 with off-diagonal c: v ∝ (c, μ − a) or (μ − b, c).
            let v1 = [c, mu - a];
            let v2 = [mu - b, c];
            let n1 = v1[0].hypot(v1[1]);
            let n2 = v2[0].hypot(v2[1]);
            if n1 >= n2 {
                [v1[0] / n1, v1[1] / n1]
            } else {
                [v2[0] / n2, v2[1] / n2]
            }
        };
        [(lo, vec(lo)), (hi, vec(hi))]
    }
}

impl Bordered {
    pub fn dim(&self) -> usize {
        self.s + self.poles.len()
    }

    /// `S(λ)` and the diagonal of `−S′(λ) − I`, i.e. `Σ k_i p_i/(p_i − λ)²`.
    fn schur(&self, lambda: f64) -> (Sym2, [f64; 2]) {
        let mut sum = [0.0f64; 2];
        let mut dsum = [0.0f64; 2];
        for ((&p, &k), &r) in self.poles.iter().zip(&self.k).zip(&self.owner) {
            let inv = 1.0 / (p - lambda);
            sum[r as usize] += k * inv;
            dsum[r as usize] += k * p * inv * inv;
        }
        let diag = |r: usize| self.w - lambda * (1.0 + sum[r]);
        let s = if self.s == 1 {
            Sym2 {
                a: diag(0),
                b: f64::INFINITY,
                c: 0.0,
            }
        } else {
            Sym2 {
                a: diag(0),
                b: diag(1),
                c: -self.c,
            }
        };
        (s, dsum)
    }

    fn poles_below(&self, lambda: f64) -> usize {
        self.poles.partition_point(|&p| p < lambda)
    }

    /// Number of eigenvalues strictly below `lambda`.
    fn count_below(&self, lambda: f64) -> usize {
        let lambda = self.avoid_pole(lambda);
        let (s, _) = self.schur(lambda);
        let eig = s.eigen();
        let neg = eig[..self.s].iter().filter(|(mu, _)| *mu < 0.0).count();
        self.poles_below(lambda) + neg
    }

    fn avoid_pole(&self, lambda: f64) -> f64 {
        let i = self.poles.partition_point(|&p| p < lambda);
        if i < self.poles.len() && self.poles[i] == lambda {
            lambda.next_up()
        } else {
            lambda
        }
    }

    /// Branch `j` of `S(λ)` and its derivative.
    fn branch(&self, j: usize, lambda: f64) -> (f64, f64, [f64; 2], Sym2, [f64; 2]) {
        let (s, dsum) = self.schur(lambda);
        let (mu, v) = s.eigen()[j];
        let d = -(1.0
            + v[0] * v[0] * dsum[0]
            + if self.s == 2 {
                v[1] * v[1] * dsum[1]
            } else {
                0.0
            });
        (mu, d, v, s, dsum)
    }

    fn upper_bound(&self) -> f64 {
        let mut sys = [self.w + self.c.abs(); 2];
        let mut hi: f64 = 0.0;
        for ((&p, &k), &r) in self.poles.iter().zip(&self.k).zip(&self.owner) {
            let b = (k * p).sqrt();
            sys[r as usize] += k + b;
            hi = hi.max(p + b);
        }
        hi.max(sys[0]).max(if self.s == 2 { sys[1] } else { 0.0 })
    }

    /// Check positive definiteness: no eigenvalue at or below zero.
    pub fn check_positive(&self) -> Result<()> {
        let (s0, _) = self.schur(0.0);
        let eig = s0.eigen();
        if eig[..self.s].iter().any(|(mu, _)| !(*mu > 0.0))
            || self.poles.first().is_some_and(|&p| p <= 0.0)
        {
            return Err(Error::Model(
                "stiffness matrix is not positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Eigenvalue `k` (ascending, 0-based) with its system weight.
    fn solve_one(&self, idx: usize, top: f64) -> Result<SystemMode> {
        let p = &self.poles;
        let mut lo = if idx >= self.s { p[idx - self.s] } else { 0.0 };
        let mut hi = if idx < p.len() { p[idx] } else { top };
        // Isolate: shrink until no pole lies strictly inside.
        let mut iter = 0;
        loop {
            let inside = self.poles_below(hi) - self.poles.partition_point(|&x| x <= lo);
            if inside == 0 || hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(Error::Model(format!(
                    "eigenvalue {idx} could not be isolated"
                )));
            }
        }
        let below = self.poles.partition_point(|&x| x <= lo);
        let j = idx
            .checked_sub(below)
            .filter(|&j| j < self.s)
            .ok_or_else(|| {
                Error::Model(format!(
                    "eigenvalue {idx} lies outside its interlacing bracket"
                ))
            })?;
        let lo_pole = below > 0 && p[below - 1] == lo;
        let hi_pole = below < p.len() && p[below] == hi;

        // Safeguarded Newton on h(λ) = μ_j(λ)·(λ − lo)·(hi − λ), with the factors
        // present only at pole endpoints. h has the sign of μ_j, which
        // decreases through the root.
        let h = |x: f64| {
            let (mu, d, ..) = self.branch(j, x);
            let (fl, dl) = if lo_pole { (x - lo, 1.0) } else { (1.0, 0.0) };
            let (fh, dh) = if hi_pole { (hi - x, -1.0) } else { (1.0, 0.0) };
            (mu * fl * fh, d * fl * fh + mu * (dl * fh + fl * dh))
        };
        let (mut a, mut b) = (lo, hi);
        let mut x = 0.5 * (a + b);
        let mut converged = false;
        for _ in 0..MAX_ITER {
            let (hv, dv) = h(x);
            if hv == 0.0 {
                converged = true;
                break;
            }
            if hv > 0.0 {
                a = x;
            } else {
                b = x;
            }
            let newton = x - hv / dv;
            let next = if dv < 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs() || b - a <= 2.0 * f64::EPSILON * b {
                x = next;
                converged = true;
                break;
            }
            x = next;
        }
        if !converged {
            return Err(Error::Model(format!("eigenvalue {idx} did not converge")));
        }
        Ok(self.mode_at(j, x))
    }

    fn mode_at(&self, j: usize, lambda: f64) -> SystemMode {
        let (_, d, v, s, dsum) = self.branch(j, lambda);
        if self.s == 1 {
            return SystemMode {
                lambda,
                weight: [[1.0 / -d, 0.0], [0.0, 0.0]],
            };
        }
        let eig = s.eigen();
        let other = eig[1 - j].0;
        let scale = s.a.abs() + s.b.abs() + s.c.abs() + lambda * (1.0 + dsum[0] + dsum[1]).sqrt();
        if other.abs() <= DEGENERATE_TOL * scale {
            // Degenerate pair: each member carries half the projector onto the
            // two-dimensional eigenspace, whose system block is M⁻¹ with
            // M = I + diag(dsum).
            return SystemMode {
                lambda,
                weight: [[0.5 / (1.0 + dsum[0]), 0.0], [0.0, 0.5 / (1.0 + dsum[1])]],
            };
        }
        let n = -d;
        SystemMode {
            lambda,
            weight: [
                [v[0] * v[0] / n, v[0] * v[1] / n],
                [v[0] * v[1] / n, v[1] * v[1] / n],
            ],
        }
    }

    /// All eigenvalues ascending with their system weights.
    pub fn solve(&self) -> Result<Vec<SystemMode>> {
        self.check_positive()?;
        let top = self.upper_bound() * (1.0 + 1e-12) + 1.0;
        (0..self.dim())
            .into_par_iter()
            .map(|k| self.solve_one(k, top))
            .collect()
    }
}
