//! Single-particle propagator `A(t) = exp(-i M t)` and the transfer
//! diagnostics built on it.
//!
//! `A[q][q']` is the amplitude for a photon injected at mode `q` to be found
//! at mode `q'`. `M` is real symmetric, so `A` is symmetric as well.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PstError, Result};
use crate::io::CsvTable;
use crate::lattice::{
    coupling_matrix, mirror_permutation, mirror_site, mode_index, pst_gap_couplings,
    CouplingMatrix, CouplingProfile, Dims, LatticeSpec, AXIS_B,
};
use crate::linalg::{
    jacobi_eigen, tridiagonal_eigen, unitarity_defect, unitary_from_eigen, SymmetricEigen, C64,
};

/// Default tolerance for transfer verdicts.
pub const DEFAULT_PST_TOL: f64 = 1e-9;

/// Eigen-decomposed coupling matrix; evaluates `A(t)` for any `t`.
///
/// Immutable after construction, so a single instance can serve concurrent
/// time scans.
#[derive(Debug, Clone)]
pub struct Propagator {
    eigen: SymmetricEigen,
    dims: Dims,
}

impl Propagator {
    pub fn new(m: &CouplingMatrix) -> Result<Self> {
        let eigen = match m.chain_couplings() {
            Some(off) => tridiagonal_eigen(&vec![0.0; m.num_modes()], &off)?,
            None => jacobi_eigen(m.matrix())?,
        };
        let scale = m.matrix().amax().max(1.0);
        let residual = eigen.residual(m.matrix());
        if residual > 1e-10 * scale {
            return Err(PstError::NumericalFailure { residual });
        }
        Ok(Self {
            eigen,
            dims: m.dims(),
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn at(&self, t: f64) -> Result<EvolutionMatrix> {
        if !t.is_finite() || t < 0.0 {
            return Err(PstError::InvalidParameter(format!(
                "evolution time must be finite and >= 0, got {t}"
            )));
        }
        let n = self.eigen.values.len();
        let matrix = if t == 0.0 {
            DMatrix::identity(n, n)
        } else {
            unitary_from_eigen(&self.eigen, t)
        };
        Ok(EvolutionMatrix {
            matrix,
            time: t,
            dims: self.dims,
        })
    }
}

/// `A = exp(-i M t)` together with the time and lattice layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionMatrix {
    matrix: DMatrix<C64>,
    time: f64,
    dims: Dims,
}

impl EvolutionMatrix {
    /// Wraps an externally supplied matrix (used for hand-built unitaries).
    pub fn from_matrix(matrix: DMatrix<C64>, time: f64, dims: Dims) -> Result<Self> {
        if matrix.nrows() != dims.total() || matrix.ncols() != dims.total() {
            return Err(PstError::Shape(format!(
                "evolution matrix is {}x{}, lattice {dims} has {} modes",
                matrix.nrows(),
                matrix.ncols(),
                dims.total()
            )));
        }
        Ok(Self { matrix, time, dims })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn num_modes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, from: usize, to: usize) -> C64 {
        self.matrix[(from, to)]
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    /// Worst `|sum_k |A[j][k]|^2 - 1|` over rows.
    pub fn row_norm_defect(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|row| (row.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Worst `|A[j][k] - A[P j][P k]|` under the lattice mirror permutation.
    pub fn mirror_defect(&self) -> f64 {
        let perm = mirror_permutation(self.dims);
        let n = self.num_modes();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((self.matrix[(j, k)] - self.matrix[(perm[j], perm[k])]).norm());
            }
        }
        worst
    }
}

/// `exp(-i M t)` by eigen-decomposition of `M`.
pub fn evolve_operator(m: &CouplingMatrix, t: f64) -> Result<EvolutionMatrix> {
    Propagator::new(m)?.at(t)
}

/// Closed-form mirror coefficient `A[j][N-j+1]` of the transfer chain for
/// `j = 1, 2, 3` (1-based), as a function of the dimensionless `Jt`.
///
/// With `x = Jt / sqrt(N - 1)`, `s = sin x`, `c = cos x`:
///
/// * `A_{1,N}   = (-i)^{N-1} s^{N-1}`
/// * `A_{2,N-1} = (-i)^{N-1} s^{N-3} (1 - (N-1) c^2)`
/// * `A_{3,N-2} = (-i)^{N-1} s^{N-5} (1 - 2(N-2) c^2 + C(N-1,2) c^4)`
///
/// The bracketed polynomials are the spin-(N-1)/2 rotation matrix elements
/// `d^{J}_{m,-m}(2x)`; at `x = pi/2` all of them equal 1.
pub fn closed_form_mirror_coefficient(j: usize, n: usize, jt: f64) -> Result<C64> {
    if !(1..=3).contains(&j) {
        return Err(PstError::Unsupported(format!(
            "closed form only for j = 1..3, got j = {j}; use the numeric propagator"
        )));
    }
    if n < 2 || n + 1 < 2 * j {
        return Err(PstError::InvalidParameter(format!(
            "mirror coefficient j = {j} needs N >= {}, got N = {n}",
            (2 * j - 1).max(2)
        )));
    }
    let x = jt / ((n - 1) as f64).sqrt();
    let (s, c) = x.sin_cos();
    let c2 = c * c;
    let nf = n as f64;
    let magnitude = match j {
        1 => s.powi(n as i32 - 1),
        2 => s.powi(n as i32 - 3) * (1.0 - (nf - 1.0) * c2),
        _ => {
            let binom = (nf - 1.0) * (nf - 2.0) / 2.0;
            s.powi(n as i32 - 5) * (1.0 - 2.0 * (nf - 2.0) * c2 + binom * c2 * c2)
        }
    };
    Ok(minus_i_pow(n - 1) * magnitude)
}

/// `(-i)^k` with exact components.
pub fn minus_i_pow(k: usize) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// `t_opt = (2n + 1) sqrt(B - 1) pi / (2 J)`, `B` the reference axis count
/// (the chain length in 1D).
pub fn optimal_time(dims: Dims, coupling: f64, n: u32) -> Result<f64> {
    dims.validate()?;
    if !(coupling.is_finite() && coupling > 0.0) {
        return Err(PstError::InvalidParameter(format!(
            "coupling scale J must be > 0, got {coupling}"
        )));
    }
    if dims.dimensionality() > 1 && dims.b() < 2 {
        return Err(PstError::InvalidReferenceAxis { dims: dims.0 });
    }
    let b = dims.reference_count() as f64;
    Ok((2 * n + 1) as f64 * (b - 1.0).sqrt() * PI / (2.0 * coupling))
}

/// Output phase-gate angle, stored as a whole number of quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCorrection {
    quarter_turns: u8,
}

impl PhaseCorrection {
    pub fn from_quarter_turns(k: u8) -> Self {
        Self {
            quarter_turns: k % 4,
        }
    }

    pub fn quarter_turns(&self) -> u8 {
        self.quarter_turns
    }

    /// Angle in radians, one of `0, pi/2, pi, 3pi/2`.
    pub fn phi(&self) -> f64 {
        self.quarter_turns as f64 * FRAC_PI_2
    }

    /// `exp(i phi)` with exact components.
    pub fn unit(&self) -> C64 {
        match self.quarter_turns {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }
}

/// Phase-gate angle that cancels the `(-i)^D` phase each transferred photon
/// picks up. 1D is keyed on `N mod 4`, 2D on the sum of the two axis
/// counts, 3D on `L + B + H`.
pub fn correction_phase(dims: Dims) -> Result<PhaseCorrection> {
    dims.validate()?;
    let sum: usize = dims.0.iter().filter(|&&n| n > 1).sum();
    let k = match dims.dimensionality() {
        1 => match dims.total() % 4 {
            3 => 2, // pi
            1 => 0,
            2 => 1, // pi/2
            _ => 3, // 3pi/2
        },
        2 => match sum % 4 {
            3 => 1,
            1 => 3,
            2 => 0,
            _ => 2,
        },
        _ => match sum % 4 {
            0 => 1,
            2 => 3,
            3 => 0,
            _ => 2,
        },
    };
    Ok(PhaseCorrection::from_quarter_turns(k))
}

/// Result of a transfer check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PstVerdict {
    pub pass: bool,
    pub worst_deviation: f64,
}

/// Passes iff every `(q, q')` pair has `| |A[q][q']| - 1 | < tol` and every
/// other entry of row `q` is below `tol` in magnitude.
pub fn pst_check(a: &EvolutionMatrix, pairs: &[(usize, usize)], tol: f64) -> Result<PstVerdict> {
    if !(tol > 0.0) {
        return Err(PstError::InvalidParameter(format!(
            "tolerance must be > 0, got {tol}"
        )));
    }
    let n = a.num_modes();
    let mut worst: f64 = 0.0;
    for &(q, target) in pairs {
        if q >= n || target >= n {
            return Err(PstError::InvalidParameter(format!(
                "pair ({q}, {target}) out of range for {n} modes"
            )));
        }
        for k in 0..n {
            let mag = a.entry(q, k).norm();
            let dev = if k == target { (mag - 1.0).abs() } else { mag };
            worst = worst.max(dev);
        }
    }
    Ok(PstVerdict {
        pass: worst < tol,
        worst_deviation: worst,
    })
}

/// Every `(q, P q)` pair on the lattice.
pub fn mirror_pairs(dims: Dims) -> Vec<(usize, usize)> {
    mirror_permutation(dims).into_iter().enumerate().collect()
}

/// Mirror amplitude as the product of per-axis chain coefficients.
///
/// Every axis shares the rescaled argument `Jt / sqrt(B - 1)`; axes with a
/// single mode contribute 1. Per-axis coefficients use the closed forms for
/// `j <= 3` and the numeric chain propagator beyond.
pub fn factorized_coefficient(
    dims: Dims,
    from: [usize; 3],
    to: [usize; 3],
    jt: f64,
) -> Result<C64> {
    dims.validate()?;
    mode_index(from, dims)?;
    mode_index(to, dims)?;
    if mirror_site(from, dims) != to {
        return Err(PstError::Unsupported(format!(
            "closed-form factorization only covers mirror pairs; {from:?} -> {to:?} is not one in {dims}"
        )));
    }
    if dims.dimensionality() > 1 && dims.b() < 2 {
        return Err(PstError::InvalidReferenceAxis { dims: dims.0 });
    }
    let reference = dims.reference_count();
    let mut product = C64::new(1.0, 0.0);
    for a in 0..3 {
        let n = dims.axis(a);
        if n == 1 {
            continue;
        }
        // chain coefficient with couplings J sqrt((n-1)/(B-1)) sqrt(j(n-j)/(n-1))
        let axis_jt = jt * ((n - 1) as f64 / (reference - 1) as f64).sqrt();
        let j = from[a].min(n + 1 - from[a]);
        let coeff = if j <= 3 {
            closed_form_mirror_coefficient(j, n, axis_jt)?
        } else {
            let spec = LatticeSpec::linear(n, 1.0)?;
            let mut axes: [Vec<f64>; 3] = Default::default();
            axes[AXIS_B] = pst_gap_couplings(n, 1.0)?;
            let m = coupling_matrix(&spec, &CouplingProfile::new(axes)?)?;
            evolve_operator(&m, axis_jt)?.entry(j - 1, n - j)
        };
        product *= coeff;
    }
    Ok(product)
}

/// Samples one coefficient over a time grid: `Jt,re,im,abs` with 12
/// significant digits. `times` are dimensionless `Jt` values; the propagator
/// must be built for coupling scale `J`.
pub fn coefficient_scan(
    propagator: &Propagator,
    coupling: f64,
    pair: (usize, usize),
    times: &[f64],
) -> Result<CsvTable> {
    use rayon::prelude::*;
    let values: Vec<C64> = times
        .par_iter()
        .map(|&jt| {
            propagator
                .at(jt / coupling)
                .map(|a| a.entry(pair.0, pair.1))
        })
        .collect::<Result<_>>()?;
    let mut table = CsvTable::new(&["Jt", "re", "im", "abs"]);
    for (&jt, z) in times.iter().zip(&values) {
        table.push_numbers(&[jt, z.re, z.im, z.norm()], 12);
    }
    Ok(table)
}
