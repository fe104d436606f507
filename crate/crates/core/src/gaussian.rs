//! Mean-zero Gaussian states described by their covariance matrix.
//!
//! Convention: `σ_ij = ½⟨{x_i, x_j}⟩` with `x = (q₁, p₁, q₂, p₂, …)`, so the
//! vacuum is `I/2` and `[x_i, x_j] = i J_ij` with `J = ⊕ [[0, 1], [−1, 0]]`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

/// Slack allowed below `1/2` in symplectic eigenvalues of physical states.
pub const PHYSICALITY_SLACK: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-12;
const PURE_SLACK: f64 = 1e-14;

/// Symplectic form for `n` modes.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(2 * k, 2 * k + 1)] = 1.0;
        j[(2 * k + 1, 2 * k)] = -1.0;
    }
    j
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::domain(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::domain(format!(
                    "{what} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Symplectic spectrum of an arbitrary symmetric positive-definite matrix,
/// ascending. The matrix need not be a physical covariance.
///
/// With `K = σ^{1/2} J σ^{1/2}` (real antisymmetric), `KᵀK` is symmetric and
/// has every `u_k²` as a doubly degenerate eigenvalue.
pub fn symplectic_spectrum(sigma: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(sigma, "covariance matrix")?;
    let dim = sigma.nrows();
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "covariance dimension must be even and non-zero, got {dim}"
        )));
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::domain(format!(
            "covariance matrix is not positive definite (eigenvalue {min:e})"
        )));
    }
    let sqrt_vals = eig.eigenvalues.map(f64::sqrt);
    let root =
        &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    let k = &root * symplectic_form(dim / 2) * &root;
    let ktk = k.transpose() * &k;
    let mut sq: Vec<f64> = SymmetricEigen::new(ktk)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    sq.sort_by(f64::total_cmp);
    Ok(sq
        .chunks(2)
        .map(|p| (0.5 * (p[0] + p[1])).max(0.0).sqrt())
        .collect())
}

/// Entropy of a single mode with symplectic eigenvalue `u ≥ 1/2`; the pure
/// state limit `u → 1/2` gives 0, and so does roundoff-level excess above it.
pub fn mode_entropy(u: f64) -> f64 {
    let a = u + 0.5;
    let b = u - 0.5;
    if b <= PURE_SLACK {
        return 0.0;
    }
    a * a.ln() - b * b.ln()
}

/// A physical mean-zero Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    sigma: DMatrix<f64>,
}

impl GaussianState {
    /// Validate and wrap a covariance matrix.
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        Self::with_slack(sigma, PHYSICALITY_SLACK)
    }

    /// As [`GaussianState::new`] with a custom physicality slack, for
    /// covariances assembled from large numerical decompositions.
    pub fn with_slack(sigma: DMatrix<f64>, slack: f64) -> Result<Self> {
        let spectrum = symplectic_spectrum(&sigma)?;
        if spectrum[0] < 0.5 - slack {
            return Err(Error::Consistency(format!(
                "covariance violates the uncertainty principle: smallest symplectic eigenvalue {}",
                spectrum[0]
            )));
        }
        Ok(GaussianState { sigma })
    }

    /// Vacuum of `n` modes.
    pub fn vacuum(n: usize) -> Self {
        GaussianState {
            sigma: DMatrix::identity(2 * n, 2 * n) * 0.5,
        }
    }

    /// Thermal state of one mode of frequency `omega` at temperature `theta`.
    pub fn thermal(omega: f64, theta: f64) -> Result<Self> {
        if !(omega > 0.0 && theta > 0.0) {
            return Err(Error::domain(
                "thermal state needs positive frequency and temperature",
            ));
        }
        let s = 0.5 / (0.5 * omega / theta).tanh();
        Ok(GaussianState {
            sigma: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![s / omega, s * omega])),
        })
    }

    /// Two-mode squeezed vacuum with squeezing `r`.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let (c, s) = (0.5 * (2.0 * r).cosh(), 0.5 * (2.0 * r).sinh());
        #[rustfmt::skip]
        let sigma = DMatrix::from_row_slice(4, 4, &[
            c, 0.0, s, 0.0,
            0.0, c, 0.0, -s,
            s, 0.0, c, 0.0,
            0.0, -s, 0.0, c,
        ]);
        GaussianState { sigma }
    }

    pub fn n_modes(&self) -> usize {
        self.sigma.nrows() / 2
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn omega_form(&self) -> DMatrix<f64> {
        symplectic_form(self.n_modes())
    }

    /// Covariance of the listed modes.
    pub fn reduced(&self, modes: &[usize]) -> Result<GaussianState> {
        check_modes(modes, self.n_modes())?;
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let sigma = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.sigma[(idx[i], idx[j])]);
        Ok(GaussianState { sigma })
    }

    /// `σ → S σ Sᵀ`.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Result<GaussianState> {
        let m = s * &self.sigma * s.transpose();
        GaussianState::new(0.5 * (&m + m.transpose()))
    }
}

fn check_modes(modes: &[usize], n: usize) -> Result<()> {
    for (i, &m) in modes.iter().enumerate() {
        if m >= n {
            return Err(Error::domain(format!(
                "mode {m} out of range for a {n}-mode state"
            )));
        }
        if modes[..i].contains(&m) {
            return Err(Error::domain(format!("mode {m} listed twice")));
        }
    }
    Ok(())
}

/// Symplectic eigenvalues, ascending.
pub fn symplectic_eigenvalues(gs: &GaussianState) -> Vec<f64> {
    symplectic_spectrum(&gs.sigma).expect("validated on construction")
}

/// Von Neumann entropy `−tr ρ ln ρ`.
pub fn von_neumann_entropy(gs: &GaussianState) -> f64 {
    symplectic_eigenvalues(gs)
        .into_iter()
        .map(mode_entropy)
        .sum()
}

/// Covariance after transposing the modes in `party` (`p → −p`).
pub fn partial_transpose(gs: &GaussianState, party: &[usize]) -> Result<DMatrix<f64>> {
    check_modes(party, gs.n_modes())?;
    let mut signs = nalgebra::DVector::from_element(2 * gs.n_modes(), 1.0);
    for &m in party {
        signs[2 * m + 1] = -1.0;
    }
    let p = DMatrix::from_diagonal(&signs);
    Ok(&p * &gs.sigma * &p)
}

/// Logarithmic negativity with respect to the bipartition `party | rest`.
pub fn logarithmic_negativity(gs: &GaussianState, party: &[usize]) -> Result<f64> {
    if party.is_empty() || party.len() >= gs.n_modes() {
        return Err(Error::domain(
            "bipartition needs a non-empty proper subset of modes",
        ));
    }
    let pt = partial_transpose(gs, party)?;
    let en: f64 = symplectic_spectrum(&pt)?
        .into_iter()
        .filter(|&u| u < 0.5)
        .map(|u| -(2.0 * u).ln())
        .sum();
    Ok(en.max(0.0))
}

/// Moments of the quadratic observables `Q_A = ½xᵀAx` and `Q_C = ½xᵀCx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticMoments {
    pub mean_a: f64,
    pub var_a: f64,
    pub var_c: f64,
    /// `⟨[Q_C, Q_A]⟩ = i·commutator_im`.
    pub commutator_im: f64,
}

impl QuadraticMoments {
    pub fn commutator_abs(&self) -> f64 {
        self.commutator_im.abs()
    }

    /// `ΔQ_C ΔQ_A − ½|⟨[Q_C, Q_A]⟩|`, non-negative for physical states.
    pub fn uncertainty_slack(&self) -> f64 {
        self.var_c.max(0.0).sqrt() * self.var_a.max(0.0).sqrt() - 0.5 * self.commutator_abs()
    }
}

fn quadratic_variance(sigma: &DMatrix<f64>, j: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let a_s = a * sigma;
    let a_j = a * j;
    0.5 * (&a_s * &a_s).trace() + 0.125 * (&a_j * &a_j).trace()
}

/// Mean and variance of `Q_A`, variance of `Q_C` and `⟨[Q_C, Q_A]⟩`, by Wick's
/// theorem with the complex contraction `Σ + (i/2)J`:
///
/// ```text
/// ⟨Q_A⟩ = ½ tr(AΣ)
/// Var Q_A = ½ tr(AΣAΣ) + ⅛ tr(AJAJ)
/// ⟨[Q_C, Q_A]⟩ = i tr(CJAΣ)
/// ```
pub fn quadratic_moments(
    gs: &GaussianState,
    a_form: &DMatrix<f64>,
    c_form: &DMatrix<f64>,
) -> Result<QuadraticMoments> {
    let dim = gs.sigma.nrows();
    for (m, what) in [(a_form, "observable form A"), (c_form, "observable form C")] {
        check_symmetric(m, what)?;
        if m.nrows() != dim {
            return Err(Error::domain(format!(
                "{what} has dimension {}, state has {dim}",
                m.nrows()
            )));
        }
    }
    let j = gs.omega_form();
    let sigma = &gs.sigma;
    Ok(QuadraticMoments {
        mean_a: 0.5 * (a_form * sigma).trace(),
        var_a: quadratic_variance(sigma, &j, a_form),
        var_c: quadratic_variance(sigma, &j, c_form),
        commutator_im: (c_form * &j * a_form * sigma).trace(),
    })
}

/// Variance of `½xᵀAx` for a classical Gaussian with covariance `Σ`.
pub fn classical_quadratic_variance(sigma: &DMatrix<f64>, a_form: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(a_form, "observable form A")?;
    if a_form.nrows() != sigma.nrows() {
        return Err(Error::domain(
            "observable form and covariance differ in dimension",
        ));
    }
    let a_s = a_form * sigma;
    Ok(0.5 * (&a_s * &a_s).trace())
}
