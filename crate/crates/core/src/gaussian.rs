//! Phase-space engine for Gaussian states.
//!
//! Conventions: quadratures ordered `(x_1, p_1, ..., x_N, p_N)` with
//! `x = (a + a†)/sqrt(2)`, vacuum covariance `I/2`. A single-mode input is
//! parametrized as `d = (alpha_x, alpha_y)`, `Xi = 1/2 [[a, b], [b, c]]`, pure
//! iff `ac - b^2 = 1`.
//!
//! A passive (number-conserving) unitary that sends `a_q† -> sum_k A[q][k] a_k†`
//! maps a coherent amplitude `beta_q` to `beta_k' = sum_q A[q][k] beta_q`, so
//! the phase-space block `(k, q)` is the rotation-dilation
//! `[[Re z, -Im z], [Im z, Re z]]` with `z = A[q][k]`. The phase gate
//! `exp(i phi n)` is the same block with `z = e^{i phi}`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{PstError, Result};
use crate::evolution::{
    correction_phase, minus_i_pow, optimal_time, EvolutionMatrix, PhaseCorrection, Propagator,
};
use crate::io::{fmt_sig, CsvTable};
use crate::lattice::{coupling_matrix, design_couplings_nd, mirror_permutation, Dims, LatticeSpec};
use crate::linalg::{unitarity_defect, C64};

/// Eigenvalue floor for the uncertainty-principle check.
pub const STATE_EIGEN_FLOOR: f64 = -1e-10;

/// First and second moments of an `N`-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    d: DVector<f64>,
    xi: DMatrix<f64>,
}

/// Single-mode input parameters `(alpha_x, alpha_y, a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleModeParams {
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SingleModeParams {
    /// Displaced squeezed state used for the fidelity/entanglement study:
    /// `alpha_x = alpha_y = 1`, `a = 2`, `b = sqrt(5)`, `c = 3`.
    pub fn figure_input() -> Self {
        Self {
            alpha_x: 1.0,
            alpha_y: 1.0,
            a: 2.0,
            b: 5f64.sqrt(),
            c: 3.0,
        }
    }

    pub fn displacement(&self) -> Vector2<f64> {
        Vector2::new(self.alpha_x, self.alpha_y)
    }

    /// `1/2 [[a, b], [b, c]]`.
    pub fn covariance(&self) -> Matrix2<f64> {
        Matrix2::new(self.a, self.b, self.b, self.c) * 0.5
    }

    pub fn state(&self) -> Result<GaussianState> {
        GaussianState::single_mode(self.displacement(), self.covariance())
    }
}

impl GaussianState {
    /// Validated construction: even dimension, symmetric `Xi`, and
    /// `Xi + (i/2) W >= 0` down to [`STATE_EIGEN_FLOOR`].
    pub fn new(d: DVector<f64>, xi: DMatrix<f64>) -> Result<Self> {
        let dim = d.len();
        if dim == 0 || !dim.is_multiple_of(2) || xi.nrows() != dim || xi.ncols() != dim {
            return Err(PstError::Shape(format!(
                "displacement of length {dim} and covariance {}x{} do not describe a mode set",
                xi.nrows(),
                xi.ncols()
            )));
        }
        if d.iter().chain(xi.iter()).any(|x| !x.is_finite()) {
            return Err(PstError::InvalidState("non-finite moments".into()));
        }
        let asym = (&xi - xi.transpose()).amax();
        if asym > 1e-12 * xi.amax().max(1.0) {
            return Err(PstError::InvalidState(format!(
                "covariance is not symmetric (defect {asym:e})"
            )));
        }
        let state = Self { d, xi };
        let floor = state.uncertainty_floor();
        if floor < STATE_EIGEN_FLOOR {
            return Err(PstError::InvalidState(format!(
                "covariance violates the uncertainty relation (min eigenvalue {floor:e})"
            )));
        }
        Ok(state)
    }

    fn new_unchecked(d: DVector<f64>, xi: DMatrix<f64>) -> Self {
        Self { d, xi }
    }

    pub fn vacuum(modes: usize) -> Self {
        Self::new_unchecked(
            DVector::zeros(2 * modes),
            DMatrix::identity(2 * modes, 2 * modes) * 0.5,
        )
    }

    pub fn single_mode(d: Vector2<f64>, xi: Matrix2<f64>) -> Result<Self> {
        Self::new(
            DVector::from_column_slice(d.as_slice()),
            DMatrix::from_column_slice(2, 2, xi.as_slice()),
        )
    }

    /// Coherent state `|beta>`.
    pub fn coherent(beta: C64) -> Self {
        let s = std::f64::consts::SQRT_2;
        Self::new_unchecked(
            DVector::from_vec(vec![s * beta.re, s * beta.im]),
            DMatrix::identity(2, 2) * 0.5,
        )
    }

    /// Squeezed vacuum `S(r)|0>`: `x` variance `e^{-2r}/2`.
    pub fn squeezed(r: f64) -> Self {
        Self::new_unchecked(
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![
                0.5 * (-2.0 * r).exp(),
                0.5 * (2.0 * r).exp(),
            ])),
        )
    }

    /// Thermal state with mean photon number `nbar`.
    pub fn thermal(nbar: f64) -> Self {
        Self::new_unchecked(DVector::zeros(2), DMatrix::identity(2, 2) * (nbar + 0.5))
    }

    /// Two-mode squeezed vacuum with squeezing `r`.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let ch = 0.5 * (2.0 * r).cosh();
        let sh = 0.5 * (2.0 * r).sinh();
        let xi = DMatrix::from_row_slice(
            4,
            4,
            &[
                ch, 0.0, sh, 0.0, //
                0.0, ch, 0.0, -sh, //
                sh, 0.0, ch, 0.0, //
                0.0, -sh, 0.0, ch,
            ],
        );
        Self::new_unchecked(DVector::zeros(4), xi)
    }

    /// Tensor product (direct sum of moments) in the given order.
    pub fn product(states: &[GaussianState]) -> Result<Self> {
        if states.is_empty() {
            return Err(PstError::Shape("empty product".into()));
        }
        let dim: usize = states.iter().map(|s| s.d.len()).sum();
        let mut d = DVector::zeros(dim);
        let mut xi = DMatrix::zeros(dim, dim);
        let mut off = 0;
        for s in states {
            let k = s.d.len();
            d.rows_mut(off, k).copy_from(&s.d);
            xi.view_mut((off, off), (k, k)).copy_from(&s.xi);
            off += k;
        }
        Ok(Self::new_unchecked(d, xi))
    }

    pub fn num_modes(&self) -> usize {
        self.d.len() / 2
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.xi
    }

    pub fn mode_displacement(&self, k: usize) -> Vector2<f64> {
        Vector2::new(self.d[2 * k], self.d[2 * k + 1])
    }

    /// 2x2 covariance block between modes `j` and `k`.
    pub fn block(&self, j: usize, k: usize) -> Matrix2<f64> {
        Matrix2::new(
            self.xi[(2 * j, 2 * k)],
            self.xi[(2 * j, 2 * k + 1)],
            self.xi[(2 * j + 1, 2 * k)],
            self.xi[(2 * j + 1, 2 * k + 1)],
        )
    }

    /// `<n_total> = (tr Xi - N)/2 + |d|^2 / 2`.
    pub fn mean_photon_number(&self) -> f64 {
        (self.xi.trace() - self.num_modes() as f64) / 2.0 + self.d.norm_squared() / 2.0
    }

    /// Smallest eigenvalue of `Xi + (i/2) W`.
    pub fn uncertainty_floor(&self) -> f64 {
        let n = self.num_modes();
        let w = symplectic_form(n);
        let h = DMatrix::<C64>::from_fn(2 * n, 2 * n, |i, j| {
            C64::new(self.xi[(i, j)], 0.5 * w[(i, j)])
        });
        h.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `det Xi`; `1/4^N` for pure states.
    pub fn covariance_determinant(&self) -> f64 {
        self.xi.determinant()
    }
}

/// `W = diag(Omega, ..., Omega)`, `Omega = [[0, 1], [-1, 0]]`.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

/// Real `2N x 2N` matrix acting on quadrature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix(DMatrix<f64>);

impl SymplecticMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn num_modes(&self) -> usize {
        self.0.nrows() / 2
    }

    /// `max |S W S^T - W|`.
    pub fn symplectic_defect(&self) -> f64 {
        let w = symplectic_form(self.num_modes());
        (&self.0 * &w * self.0.transpose() - w).amax()
    }

    /// `max |S S^T - I|`; zero for passive transformations.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.0.nrows();
        (&self.0 * self.0.transpose() - DMatrix::<f64>::identity(n, n)).amax()
    }
}

fn dilation(z: C64) -> Matrix2<f64> {
    Matrix2::new(z.re, -z.im, z.im, z.re)
}

/// Phase-space image of a passive unitary `A` (see module docs for the
/// block convention).
pub fn symplectic_from_unitary(a: &DMatrix<C64>) -> Result<SymplecticMatrix> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(PstError::Shape(format!(
            "unitary must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let defect = unitarity_defect(a);
    if defect > 1e-9 {
        return Err(PstError::InvalidInput(format!(
            "matrix is not unitary (defect {defect:e})"
        )));
    }
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        for q in 0..n {
            let blk = dilation(a[(q, k)]);
            s.view_mut((2 * k, 2 * q), (2, 2)).copy_from(&blk);
        }
    }
    Ok(SymplecticMatrix(s))
}

pub fn symplectic_from_evolution(a: &EvolutionMatrix) -> Result<SymplecticMatrix> {
    symplectic_from_unitary(a.matrix())
}

/// `d' = S d`, `Xi' = S Xi S^T`.
pub fn apply_symplectic(state: &GaussianState, s: &SymplecticMatrix) -> Result<GaussianState> {
    if s.0.nrows() != state.d.len() || s.0.ncols() != state.d.len() {
        return Err(PstError::Shape(format!(
            "symplectic matrix is {}x{}, state has {} quadratures",
            s.0.nrows(),
            s.0.ncols(),
            state.d.len()
        )));
    }
    let d = &s.0 * &state.d;
    let xi = &s.0 * &state.xi * s.0.transpose();
    // restore exact symmetry lost to rounding
    let xi = (&xi + xi.transpose()) * 0.5;
    Ok(GaussianState::new_unchecked(d, xi))
}

/// Partial trace: keep the listed modes, in the listed order.
pub fn reduce_to_modes(state: &GaussianState, modes: &[usize]) -> Result<GaussianState> {
    let n = state.num_modes();
    if modes.is_empty() {
        return Err(PstError::Shape("empty mode list".into()));
    }
    for (i, &m) in modes.iter().enumerate() {
        if m >= n {
            return Err(PstError::InvalidParameter(format!(
                "mode {m} out of range for {n} modes"
            )));
        }
        if modes[..i].contains(&m) {
            return Err(PstError::InvalidParameter(format!("mode {m} listed twice")));
        }
    }
    let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    let d = DVector::from_iterator(idx.len(), idx.iter().map(|&i| state.d[i]));
    let xi = DMatrix::from_fn(idx.len(), idx.len(), |i, j| state.xi[(idx[i], idx[j])]);
    Ok(GaussianState::new_unchecked(d, xi))
}

fn rotate_mode(state: &GaussianState, mode: usize, cos: f64, sin: f64) -> Result<GaussianState> {
    let n = state.num_modes();
    if mode >= n {
        return Err(PstError::InvalidParameter(format!(
            "mode {mode} out of range for {n} modes"
        )));
    }
    let mut d = state.d.clone();
    let mut xi = state.xi.clone();
    let (i, j) = (2 * mode, 2 * mode + 1);
    let (x, p) = (d[i], d[j]);
    d[i] = cos * x - sin * p;
    d[j] = sin * x + cos * p;
    // rows then columns
    for k in 0..2 * n {
        let (a, b) = (xi[(i, k)], xi[(j, k)]);
        xi[(i, k)] = cos * a - sin * b;
        xi[(j, k)] = sin * a + cos * b;
    }
    for k in 0..2 * n {
        let (a, b) = (xi[(k, i)], xi[(k, j)]);
        xi[(k, i)] = cos * a - sin * b;
        xi[(k, j)] = sin * a + cos * b;
    }
    Ok(GaussianState::new_unchecked(d, xi))
}

/// Local phase gate `exp(i phi n)` on one mode.
pub fn apply_phase_gate(state: &GaussianState, mode: usize, phi: f64) -> Result<GaussianState> {
    let (sin, cos) = phi.sin_cos();
    rotate_mode(state, mode, cos, sin)
}

/// Phase gate by a whole number of quarter turns, with exact entries.
pub fn apply_phase_correction(
    state: &GaussianState,
    mode: usize,
    phase: PhaseCorrection,
) -> Result<GaussianState> {
    let u = phase.unit();
    rotate_mode(state, mode, u.re, u.im)
}

/// Moments of the first and last modes of a transfer chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryMoments {
    pub d_first: Vector2<f64>,
    pub xi_first: Matrix2<f64>,
    pub d_last: Vector2<f64>,
    pub xi_last: Matrix2<f64>,
}

fn chain_amplitudes(n: usize, jt: f64) -> Result<(f64, C64)> {
    if n < 2 {
        return Err(PstError::InvalidLattice(format!(
            "chain needs N >= 2, got {n}"
        )));
    }
    let x = jt / ((n - 1) as f64).sqrt();
    let (s, c) = x.sin_cos();
    let k = n as i32 - 1;
    Ok((c.powi(k), minus_i_pow(n - 1) * s.powi(k)))
}

/// Closed-form moments of modes 1 and N when the input sits in mode 1 of an
/// `N`-mode transfer chain and the rest start in vacuum.
///
/// Mode 1 carries the real amplitude `cos^{N-1} x`; mode N carries
/// `(-i)^{N-1} sin^{N-1} x`, whose phase rotates the output moments. After
/// the output phase gate, or whenever `N = 4m + 1`, mode N reads
/// `d_N = sin^{N-1} x (alpha_x, alpha_y)`,
/// `Xi_N = 1/2 [sin^{2(N-1)} x ([[a, b], [b, c]] - I) + I]`.
pub fn analytic_boundary_moments(
    input: &SingleModeParams,
    n: usize,
    jt: f64,
) -> Result<BoundaryMoments> {
    let (first, last) = chain_amplitudes(n, jt)?;
    let excess = input.covariance() - Matrix2::identity() * 0.5;
    let half = Matrix2::identity() * 0.5;
    let r_last = dilation(last);
    Ok(BoundaryMoments {
        d_first: input.displacement() * first,
        xi_first: excess * (first * first) + half,
        d_last: r_last * input.displacement(),
        xi_last: r_last * excess * r_last.transpose() + half,
    })
}

/// Off-diagonal block `Xi_{1N}` of the reduced two-mode covariance of modes
/// 1 and N: `(sin 2x / 2)^{N-1} * 1/2 ([[a, b], [b, c]] - I) * R^T`, with `R`
/// the quarter-turn rotation carried by `(-i)^{N-1}`.
pub fn cross_covariance_block(input: &SingleModeParams, n: usize, jt: f64) -> Result<Matrix2<f64>> {
    let (first, last) = chain_amplitudes(n, jt)?;
    let excess = input.covariance() - Matrix2::identity() * 0.5;
    Ok(excess * first * dilation(last).transpose())
}

fn det2(m: &Matrix2<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Uhlmann fidelity of two single-mode Gaussian states:
///
/// `F = exp(-1/2 dd^T (Xi_1 + Xi_2)^{-1} dd) / (sqrt(Delta + delta) - sqrt(delta))`
///
/// with `Delta = det(Xi_1 + Xi_2)` and `delta = 4 (det Xi_1 - 1/4)(det Xi_2 - 1/4)`.
pub fn uhlmann_fidelity_gaussian(s1: &GaussianState, s2: &GaussianState) -> Result<f64> {
    if s1.num_modes() != 1 || s2.num_modes() != 1 {
        return Err(PstError::Shape(format!(
            "fidelity formula is single-mode, got {} and {} modes",
            s1.num_modes(),
            s2.num_modes()
        )));
    }
    let x1 = s1.block(0, 0);
    let x2 = s2.block(0, 0);
    let sum = x1 + x2;
    let big_delta = det2(&sum);
    if !(big_delta.abs() > 1e-300) {
        return Err(PstError::NumericalFailure {
            residual: big_delta,
        });
    }
    let mut small_delta = 4.0 * (det2(&x1) - 0.25) * (det2(&x2) - 0.25);
    if small_delta < -1e-12 {
        return Err(PstError::InvalidState(format!(
            "negative purity product {small_delta:e}"
        )));
    }
    small_delta = small_delta.max(0.0);
    let radicand = big_delta + small_delta;
    if radicand < 0.0 {
        return Err(PstError::InvalidState(format!(
            "negative radicand {radicand:e}"
        )));
    }
    let inv = sum.try_inverse().ok_or(PstError::NumericalFailure {
        residual: big_delta,
    })?;
    let dd = s1.mode_displacement(0) - s2.mode_displacement(0);
    let exponent = -0.5 * (dd.transpose() * inv * dd)[(0, 0)];
    Ok(exponent.exp() / (radicand.sqrt() - small_delta.sqrt()))
}

/// Evaluation of the printed closed-form transfer fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrintedFidelity {
    /// `None` when a radicand is negative or the denominator vanishes.
    pub value: Option<f64>,
    pub radicand_first: f64,
    pub radicand_second: f64,
    pub exponent_numerator: f64,
    pub exponent_denominator: f64,
}

/// Evaluates the closed-form transfer fidelity exactly as printed, with
/// `chi_pm = ab - c^2 +- 1` and `A = |A_{1N}|`. Kept for auditing only: it
/// is not the Uhlmann fidelity, see [`fidelity_formula_audit`].
pub fn closed_form_transfer_fidelity(
    input: &SingleModeParams,
    a_mag: f64,
) -> Result<PrintedFidelity> {
    if !(0.0..=1.0 + 1e-12).contains(&a_mag) {
        return Err(PstError::InvalidParameter(format!(
            "|A_1N| must lie in [0, 1], got {a_mag}"
        )));
    }
    let SingleModeParams {
        alpha_x: ax,
        alpha_y: ay,
        a,
        b,
        c,
    } = *input;
    let chi_p = a * b - c * c + 1.0;
    let chi_m = a * b - c * c - 1.0;
    let a2 = a_mag * a_mag;
    let a4 = a2 * a2;
    let numerator = (1.0 - a_mag).powi(2)
        * ((b * ax * ax - 2.0 * c * ax * ay + a * ay * ay) * (1.0 + a2)
            + (ax * ax + ay * ay) * (1.0 - a2));
    let denominator = (chi_p - 1.0) * (1.0 + a2) + (1.0 - a2);
    let r1 = chi_m * a2 * ((a + b - 2.0) + (chi_p - a - b) * a2);
    let r2 = (chi_p + a + b) + (a + b) * chi_m * a2 + (chi_p - a - b) * (chi_p - 1.0) * a4;
    let value = if r1 < 0.0 || r2 < 0.0 || denominator == 0.0 {
        None
    } else {
        let root_gap = r1.sqrt() - r2.sqrt();
        if root_gap == 0.0 {
            None
        } else {
            Some(2.0 * (-numerator / denominator).exp() / root_gap)
        }
    };
    Ok(PrintedFidelity {
        value,
        radicand_first: r1,
        radicand_second: r2,
        exponent_numerator: numerator,
        exponent_denominator: denominator,
    })
}

/// Logarithmic negativity of a two-mode Gaussian state,
/// `E = max(0, -ln(2 nu_-))` from the smallest partially transposed
/// symplectic eigenvalue.
pub fn log_negativity(state: &GaussianState) -> Result<f64> {
    if state.num_modes() != 2 {
        return Err(PstError::Shape(format!(
            "log-negativity needs a two-mode state, got {} modes",
            state.num_modes()
        )));
    }
    let a = state.block(0, 0);
    let b = state.block(1, 1);
    let c = state.block(0, 1);
    let det_xi = state.xi.determinant();
    let delta_pt = det2(&a) + det2(&b) - 2.0 * det2(&c);
    let mut disc = delta_pt * delta_pt - 4.0 * det_xi;
    if disc < -1e-12 * delta_pt.abs().max(1.0).powi(2) {
        return Err(PstError::InvalidState(format!(
            "partial-transpose discriminant is negative ({disc:e})"
        )));
    }
    disc = disc.max(0.0);
    let nu_sq = (delta_pt - disc.sqrt()) / 2.0;
    if !(nu_sq > 0.0) {
        return Err(PstError::InvalidState(format!(
            "non-positive symplectic eigenvalue squared ({nu_sq:e})"
        )));
    }
    Ok((-(2.0 * nu_sq.sqrt()).ln()).max(0.0))
}

/// Outcome of a mirror SWAP run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapVerdict {
    pub pass: bool,
    pub worst_deviation: f64,
    pub t_opt: f64,
    pub phase: f64,
}

/// Evolves a product of single-mode states (one per site, row-major order)
/// to `t_opt`, applies the correction phase on every mode, and compares with
/// the mirror-permuted input.
pub fn swap_verify(
    dims: Dims,
    inputs: &[GaussianState],
    coupling: f64,
    tol: f64,
) -> Result<SwapVerdict> {
    let spec = LatticeSpec::new(dims, coupling)?;
    let n = dims.total();
    if inputs.len() != n || inputs.iter().any(|s| s.num_modes() != 1) {
        return Err(PstError::Shape(format!(
            "SWAP needs one single-mode state per site ({n}), got {}",
            inputs.len()
        )));
    }
    let profile = design_couplings_nd(&spec)?;
    let m = coupling_matrix(&spec, &profile)?;
    let t_opt = optimal_time(dims, coupling, 0)?;
    let a = Propagator::new(&m)?.at(t_opt)?;
    let s = symplectic_from_evolution(&a)?;
    let phase = correction_phase(dims)?;

    let mut state = apply_symplectic(&GaussianState::product(inputs)?, &s)?;
    for k in 0..n {
        state = apply_phase_correction(&state, k, phase)?;
    }

    let perm = mirror_permutation(dims);
    let mut expected_order = vec![0usize; n];
    for (q, &pq) in perm.iter().enumerate() {
        expected_order[pq] = q;
    }
    let expected: Vec<GaussianState> = expected_order.iter().map(|&q| inputs[q].clone()).collect();
    let expected = GaussianState::product(&expected)?;
    let worst = (state.displacement() - expected.displacement())
        .amax()
        .max((state.covariance() - expected.covariance()).amax());
    Ok(SwapVerdict {
        pass: worst < tol,
        worst_deviation: worst,
        t_opt,
        phase: phase.phi(),
    })
}

/// One grid point of the printed-vs-Uhlmann fidelity comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditRow {
    pub jt: f64,
    pub a_mag: f64,
    pub printed: Option<f64>,
    pub uhlmann: f64,
}

/// Comparison of the printed closed-form fidelity with the Uhlmann fidelity
/// of the actually evolved output mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityAudit {
    pub tolerance: f64,
    pub total_points: usize,
    pub evaluable_points: usize,
    pub max_abs_difference: Option<f64>,
    pub agrees: bool,
    pub rows: Vec<AuditRow>,
}

impl FidelityAudit {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["Jt", "abs_A1N", "printed", "uhlmann", "abs_diff"]);
        for r in &self.rows {
            let printed = r.printed.map_or("nan".to_string(), |v| fmt_sig(v, 12));
            let diff = r
                .printed
                .map_or("nan".to_string(), |v| fmt_sig((v - r.uhlmann).abs(), 12));
            t.push_row(vec![
                fmt_sig(r.jt, 12),
                fmt_sig(r.a_mag, 12),
                printed,
                fmt_sig(r.uhlmann, 12),
                diff,
            ]);
        }
        t
    }
}

/// Runs the printed fidelity formula against the Uhlmann fidelity of the
/// phase-corrected output of an `N`-mode chain at every `Jt` in `times`.
pub fn fidelity_formula_audit(
    input: &SingleModeParams,
    n: usize,
    times: &[f64],
    tol: f64,
) -> Result<FidelityAudit> {
    let input_state = input.state()?;
    let phase = correction_phase(Dims::linear(n)?)?;
    let mut rows = Vec::with_capacity(times.len());
    for &jt in times {
        let m = analytic_boundary_moments(input, n, jt)?;
        let out = GaussianState::single_mode(m.d_last, m.xi_last)?;
        let out = apply_phase_correction(&out, 0, phase)?;
        let uhlmann = uhlmann_fidelity_gaussian(&input_state, &out)?;
        let a_mag = (jt / ((n - 1) as f64).sqrt())
            .sin()
            .abs()
            .powi(n as i32 - 1);
        let printed = closed_form_transfer_fidelity(input, a_mag.min(1.0))?.value;
        rows.push(AuditRow {
            jt,
            a_mag,
            printed,
            uhlmann,
        });
    }
    let diffs: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.printed.map(|p| (p - r.uhlmann).abs()))
        .collect();
    let max_abs_difference = diffs.iter().copied().fold(None, |acc: Option<f64>, x| {
        Some(acc.map_or(x, |a| a.max(x)))
    });
    let evaluable_points = diffs.len();
    let agrees = evaluable_points == rows.len() && max_abs_difference.is_some_and(|d| d <= tol);
    Ok(FidelityAudit {
        tolerance: tol,
        total_points: rows.len(),
        evaluable_points,
        max_abs_difference,
        agrees,
        rows,
    })
}

/// JSON form of a Gaussian state: `d` and row-major `xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDocument {
    pub d: Vec<f64>,
    pub xi: Vec<f64>,
}

impl From<&GaussianState> for GaussianDocument {
    fn from(s: &GaussianState) -> Self {
        let n = s.d.len();
        Self {
            d: s.d.iter().map(|&x| crate::io::round_sig(x, 15)).collect(),
            xi: (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| crate::io::round_sig(s.xi[(i, j)], 15))
                .collect(),
        }
    }
}

impl TryFrom<GaussianDocument> for GaussianState {
    type Error = PstError;

    fn try_from(doc: GaussianDocument) -> Result<Self> {
        let n = doc.d.len();
        if doc.xi.len() != n * n {
            return Err(PstError::Shape(format!(
                "xi has {} entries, expected {}",
                doc.xi.len(),
                n * n
            )));
        }
        GaussianState::new(
            DVector::from_vec(doc.d),
            DMatrix::from_row_slice(n, n, &doc.xi),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::evolve_operator;
    use crate::lattice::design_couplings_1d;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn chain_unitary(n: usize, jt: f64) -> EvolutionMatrix {
        let spec = LatticeSpec::linear(n, 1.0).unwrap();
        let m = coupling_matrix(&spec, &design_couplings_1d(n, 1.0).unwrap()).unwrap();
        evolve_operator(&m, jt).unwrap()
    }

    fn transfer_state(input: &SingleModeParams, n: usize, jt: f64) -> GaussianState {
        let s = symplectic_from_evolution(&chain_unitary(n, jt)).unwrap();
        let mut parts = vec![input.state().unwrap()];
        parts.extend((1..n).map(|_| GaussianState::vacuum(1)));
        apply_symplectic(&GaussianState::product(&parts).unwrap(), &s).unwrap()
    }

    #[test]
    fn validation() {
        assert!(GaussianState::new(DVector::zeros(2), DMatrix::identity(2, 2) * 0.4).is_err());
        assert!(GaussianState::new(DVector::zeros(3), DMatrix::identity(3, 3)).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 1.0]);
        assert!(GaussianState::new(DVector::zeros(2), asym).is_err());
        assert!(SingleModeParams::figure_input().state().is_ok());
        assert!(GaussianState::new(
            DVector::zeros(4),
            GaussianState::two_mode_squeezed(0.7).xi.clone()
        )
        .is_ok());
    }

    #[test]
    fn figure_input_is_pure() {
        let p = SingleModeParams::figure_input();
        assert!((p.a * p.c - p.b * p.b - 1.0).abs() < 1e-15);
        let s = p.state().unwrap();
        assert!((s.covariance_determinant() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn identity_symplectic() {
        let s = symplectic_from_unitary(&DMatrix::<C64>::identity(3, 3)).unwrap();
        assert_eq!(s.matrix(), &DMatrix::<f64>::identity(6, 6));
        let state = SingleModeParams::figure_input().state().unwrap();
        let st = GaussianState::product(&[state.clone(), GaussianState::vacuum(2)]).unwrap();
        assert_eq!(apply_symplectic(&st, &s).unwrap(), st);
    }

    #[test]
    fn non_unitary_rejected() {
        let a = DMatrix::<C64>::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(matches!(
            symplectic_from_unitary(&a),
            Err(PstError::InvalidInput(_))
        ));
    }

    #[test]
    fn phase_gate_block_matches_single_mode_unitary() {
        let phi = 0.37;
        let u = DMatrix::from_element(1, 1, C64::from_polar(1.0, phi));
        let s = symplectic_from_unitary(&u).unwrap();
        let coh = GaussianState::coherent(C64::new(0.3, -0.8));
        let via_s = apply_symplectic(&coh, &s).unwrap();
        let via_gate = apply_phase_gate(&coh, 0, phi).unwrap();
        assert!((via_s.displacement() - via_gate.displacement()).amax() < 1e-15);
        // |beta> -> |e^{i phi} beta>
        let expect = GaussianState::coherent(C64::new(0.3, -0.8) * C64::from_polar(1.0, phi));
        assert!((via_gate.displacement() - expect.displacement()).amax() < 1e-15);
    }

    #[test]
    fn two_mode_transfer_symplectic() {
        let a = chain_unitary(2, FRAC_PI_2);
        let s = symplectic_from_evolution(&a).unwrap();
        assert!(s.symplectic_defect() < 1e-14);
        assert!(s.orthogonality_defect() < 1e-14);
        // off-diagonal blocks only
        let m = s.matrix();
        assert!(m.view((0, 0), (2, 2)).amax() < 1e-15);
        let s2 = m * m;
        assert!((s2.clone() - DMatrix::<f64>::identity(4, 4)).amax() > 0.5);
        // phase-corrected map squares to identity
        let phase = correction_phase(Dims::linear(2).unwrap()).unwrap();
        let corrected = &a.matrix().clone() * phase.unit();
        let sc = symplectic_from_unitary(&corrected).unwrap();
        let sq = sc.matrix() * sc.matrix();
        assert!((sq - DMatrix::<f64>::identity(4, 4)).amax() < 1e-14);
    }

    #[test]
    fn vacuum_is_invariant() {
        let a = chain_unitary(4, 1.234);
        let s = symplectic_from_evolution(&a).unwrap();
        let v = apply_symplectic(&GaussianState::vacuum(4), &s).unwrap();
        assert!((v.covariance() - DMatrix::<f64>::identity(8, 8) * 0.5).amax() < 1e-14);
        assert!(v.displacement().amax() < 1e-15);
    }

    #[test]
    fn figure_input_transfers_at_pi() {
        let p = SingleModeParams::figure_input();
        let out = transfer_state(&p, 5, PI);
        let phase = correction_phase(Dims::linear(5).unwrap()).unwrap();
        let out = apply_phase_correction(&out, 4, phase).unwrap();
        let last = reduce_to_modes(&out, &[4]).unwrap();
        assert!((last.mode_displacement(0) - p.displacement()).amax() < 1e-12);
        assert!((last.block(0, 0) - p.covariance()).amax() < 1e-12);
        for k in 0..4 {
            assert!(out.mode_displacement(k).amax() < 1e-12);
            assert!((out.block(k, k) - Matrix2::identity() * 0.5).amax() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let s = symplectic_from_unitary(&DMatrix::<C64>::identity(2, 2)).unwrap();
        assert!(matches!(
            apply_symplectic(&GaussianState::vacuum(3), &s),
            Err(PstError::Shape(_))
        ));
    }

    #[test]
    fn boundary_moments_examples() {
        let p = SingleModeParams::figure_input();
        let m = analytic_boundary_moments(&p, 5, 0.0).unwrap();
        assert!((m.d_first - p.displacement()).amax() < 1e-15);
        assert!((m.xi_first - p.covariance()).amax() < 1e-15);
        assert!(m.d_last.amax() < 1e-15);
        assert!((m.xi_last - Matrix2::identity() * 0.5).amax() < 1e-15);

        let m = analytic_boundary_moments(&p, 5, PI).unwrap();
        assert!((m.d_last - Vector2::new(1.0, 1.0)).amax() < 1e-15);
        assert!((m.xi_last - p.covariance()).amax() < 1e-15);

        let m = analytic_boundary_moments(&p, 5, FRAC_PI_2).unwrap();
        assert!((m.d_last - Vector2::new(0.25, 0.25)).amax() < 1e-15);
        let full = transfer_state(&p, 5, FRAC_PI_2);
        assert!((full.mode_displacement(4) - m.d_last).amax() < 1e-12);
        assert!((full.block(4, 4) - m.xi_last).amax() < 1e-12);
        assert!((full.block(0, 0) - m.xi_first).amax() < 1e-12);
    }

    #[test]
    fn corrected_output_matches_unrotated_form() {
        // after the output gate the last-mode moments lose the quarter-turn rotation
        let p = SingleModeParams::figure_input();
        for n in 2..9 {
            let jt = 0.77;
            let m = analytic_boundary_moments(&p, n, jt).unwrap();
            let out = GaussianState::single_mode(m.d_last, m.xi_last).unwrap();
            let out = apply_phase_correction(
                &out,
                0,
                correction_phase(Dims::linear(n).unwrap()).unwrap(),
            )
            .unwrap();
            let s = (jt / ((n - 1) as f64).sqrt()).sin().powi(n as i32 - 1);
            let expect_d = p.displacement() * s;
            let expect_xi =
                (p.covariance() - Matrix2::identity() * 0.5) * (s * s) + Matrix2::identity() * 0.5;
            assert!(
                (out.mode_displacement(0) - expect_d).amax() < 1e-14,
                "N={n}"
            );
            assert!((out.block(0, 0) - expect_xi).amax() < 1e-14, "N={n}");
        }
    }

    #[test]
    fn cross_block_examples() {
        let p = SingleModeParams::figure_input();
        assert!(cross_covariance_block(&p, 5, 0.0).unwrap().amax() < 1e-16);
        assert!(cross_covariance_block(&p, 5, PI).unwrap().amax() < 1e-15);
        let full = transfer_state(&p, 5, FRAC_PI_2);
        let blk = cross_covariance_block(&p, 5, FRAC_PI_2).unwrap();
        assert!((full.block(0, 4) - blk).amax() < 1e-12);
        // (sin(pi/2)/2)^4 * 1/2 * (a-1) = 1/32
        assert!((blk[(0, 0)] - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn fidelity_basics() {
        let p = SingleModeParams::figure_input().state().unwrap();
        assert!((uhlmann_fidelity_gaussian(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        for beta in [0.3, 1.0, 1.7] {
            let f = uhlmann_fidelity_gaussian(
                &GaussianState::vacuum(1),
                &GaussianState::coherent(C64::new(beta, 0.0)),
            )
            .unwrap();
            assert!((f - (-beta * beta).exp()).abs() < 1e-14);
        }
        let th = GaussianState::thermal(0.8);
        let f1 = uhlmann_fidelity_gaussian(&p, &th).unwrap();
        let f2 = uhlmann_fidelity_gaussian(&th, &p).unwrap();
        assert!((f1 - f2).abs() < 1e-14);
        assert!(f1 > 0.0 && f1 < 1.0);
        assert!(uhlmann_fidelity_gaussian(&GaussianState::vacuum(2), &th).is_err());
    }

    #[test]
    fn negativity_examples() {
        let prod = GaussianState::product(&[
            SingleModeParams::figure_input().state().unwrap(),
            GaussianState::thermal(0.3),
        ])
        .unwrap();
        assert_eq!(log_negativity(&prod).unwrap(), 0.0);
        for r in [0.1, 0.5, 1.2] {
            let e = log_negativity(&GaussianState::two_mode_squeezed(r)).unwrap();
            assert!((e - 2.0 * r).abs() < 1e-12, "r={r}: {e}");
        }
        assert!(log_negativity(&GaussianState::vacuum(3)).is_err());
    }

    #[test]
    fn reduce_examples() {
        let s = transfer_state(&SingleModeParams::figure_input(), 5, 0.9);
        assert_eq!(reduce_to_modes(&s, &[0, 1, 2, 3, 4]).unwrap(), s);
        let v = reduce_to_modes(&GaussianState::vacuum(5), &[1, 3]).unwrap();
        assert_eq!(v, GaussianState::vacuum(2));
        assert!(reduce_to_modes(&s, &[0, 0]).is_err());
        assert!(reduce_to_modes(&s, &[5]).is_err());
        assert!(reduce_to_modes(&s, &[]).is_err());

        let p = SingleModeParams::figure_input();
        let pair = reduce_to_modes(&s, &[0, 4]).unwrap();
        let m = analytic_boundary_moments(&p, 5, 0.9).unwrap();
        assert!((pair.block(0, 0) - m.xi_first).amax() < 1e-12);
        assert!((pair.block(1, 1) - m.xi_last).amax() < 1e-12);
        assert!((pair.block(0, 1) - cross_covariance_block(&p, 5, 0.9).unwrap()).amax() < 1e-12);
    }

    #[test]
    fn phase_gate_examples() {
        let s = transfer_state(&SingleModeParams::figure_input(), 3, 0.4);
        assert_eq!(apply_phase_gate(&s, 1, 0.0).unwrap(), s);
        let full = apply_phase_gate(&s, 1, 2.0 * PI).unwrap();
        assert!((full.covariance() - s.covariance()).amax() < 1e-14);
        assert!((full.displacement() - s.displacement()).amax() < 1e-14);
        let v = apply_phase_gate(&GaussianState::vacuum(2), 0, 1.1).unwrap();
        assert!((v.covariance() - GaussianState::vacuum(2).covariance()).amax() < 1e-16);
        assert!(apply_phase_gate(&s, 3, 0.1).is_err());

        // N = 5: correction is zero and transfer already exact
        let p = SingleModeParams::figure_input();
        let out = transfer_state(&p, 5, PI);
        let phase = correction_phase(Dims::linear(5).unwrap()).unwrap();
        assert_eq!(phase.phi(), 0.0);
        let corrected = apply_phase_correction(&out, 4, phase).unwrap();
        assert_eq!(corrected, out);
        assert!((out.mode_displacement(4) - p.displacement()).amax() < 1e-12);
    }

    #[test]
    fn swap_examples() {
        let dims = Dims::linear(3).unwrap();
        let vac = vec![GaussianState::vacuum(1); 3];
        assert!(swap_verify(dims, &vac, 1.0, 1e-9).unwrap().pass);

        let coh: Vec<GaussianState> =
            [C64::new(0.5, 0.1), C64::new(-0.3, 0.9), C64::new(1.2, -0.4)]
                .into_iter()
                .map(GaussianState::coherent)
                .collect();
        let v = swap_verify(dims, &coh, 1.0, 1e-9).unwrap();
        assert!(v.pass, "{v:?}");
        assert_eq!(v.phase, PI);

        let dims4 = Dims::linear(4).unwrap();
        let states: Vec<GaussianState> = (0..4)
            .map(|k| {
                let r = 0.1 + 0.2 * k as f64;
                let sq = GaussianState::squeezed(r);
                let d = Vector2::new(0.3 * k as f64, -0.2 + 0.1 * k as f64);
                GaussianState::single_mode(d, sq.block(0, 0)).unwrap()
            })
            .collect();
        let v = swap_verify(dims4, &states, 1.3, 1e-9).unwrap();
        assert!(v.pass, "{v:?}");

        assert!(swap_verify(dims4, &states[..3], 1.0, 1e-9).is_err());
    }

    #[test]
    fn printed_fidelity_at_perfect_transfer() {
        let p = SingleModeParams::figure_input();
        let f = closed_form_transfer_fidelity(&p, 1.0).unwrap();
        assert!((f.value.unwrap() - 1.0).abs() < 1e-12);
        assert!(closed_form_transfer_fidelity(&p, 1.5).is_err());
    }

    #[test]
    fn printed_fidelity_disagrees_at_zero_amplitude() {
        // pure, undisplaced input: the Uhlmann value is the overlap with vacuum
        let p = SingleModeParams {
            alpha_x: 0.0,
            alpha_y: 0.0,
            ..SingleModeParams::figure_input()
        };
        let oracle =
            uhlmann_fidelity_gaussian(&p.state().unwrap(), &GaussianState::vacuum(1)).unwrap();
        let printed = closed_form_transfer_fidelity(&p, 0.0).unwrap();
        let agrees = printed.value.is_some_and(|v| (v - oracle).abs() < 1e-6);
        assert!(!agrees, "printed {:?} vs oracle {oracle}", printed.value);
    }

    #[test]
    fn document_roundtrip() {
        let s = transfer_state(&SingleModeParams::figure_input(), 2, 0.3);
        let doc = GaussianDocument::from(&s);
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.starts_with("{\"d\":["));
        let back: GaussianState = serde_json::from_str::<GaussianDocument>(&text)
            .unwrap()
            .try_into()
            .unwrap();
        assert!((back.covariance() - s.covariance()).amax() < 1e-14);
    }
}
