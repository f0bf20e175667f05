//! Real symmetric eigensolvers and small dense helpers.
//!
//! The coupling matrix is always real symmetric, so two solvers cover every
//! lattice: an implicit-shift QL iteration for the tridiagonal 1D case and a
//! cyclic Jacobi sweep for the Kronecker-assembled 2D/3D matrices.

use nalgebra::{Complex, DMatrix};

use crate::error::{PstError, Result};

pub type C64 = Complex<f64>;

/// Convergence threshold on the (relative) off-diagonal norm.
pub const EIGEN_TOL: f64 = 1e-12;

const MAX_QL_ITERATIONS: usize = 64;
const MAX_JACOBI_SWEEPS: usize = 100;

/// Eigen-decomposition `A = V diag(values) Vᵀ` of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    /// Largest entry of `|A V - V diag(values)|`.
    pub fn residual(&self, a: &DMatrix<f64>) -> f64 {
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.values));
        let r = a * &self.vectors - &self.vectors * lambda;
        r.amax()
    }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix.
///
/// `diag` has length n, `off` has length n - 1 with `off[k] = A[k][k+1]`.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<SymmetricEigen> {
    let n = diag.len();
    if n == 0 {
        return Err(PstError::Shape("empty tridiagonal matrix".into()));
    }
    if off.len() + 1 != n {
        return Err(PstError::Shape(format!(
            "tridiagonal matrix of order {n} needs {} off-diagonal entries, got {}",
            n - 1,
            off.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let mut v = DMatrix::<f64>::identity(n, n);

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(PstError::NumericalFailure {
                        residual: e[l].abs(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let hk = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * hk;
                        v[(k, i)] = c * v[(k, i)] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    let mut eig = SymmetricEigen {
        values: d,
        vectors: v,
    };
    orthonormalize_if_needed(&mut eig.vectors);
    Ok(eig)
}

/// Cyclic Jacobi rotations on a dense real symmetric matrix.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(PstError::Shape(format!(
            "Jacobi solver needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(1.0);

    let off_norm = |a: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    // Sweep until the off-diagonal mass sits at rounding level; stagnation
    // above EIGEN_TOL is a convergence failure.
    let mut previous = f64::INFINITY;
    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= 1e-2 * EIGEN_TOL * scale {
            break;
        }
        if off >= previous || sweeps == MAX_JACOBI_SWEEPS {
            if off <= EIGEN_TOL * scale {
                break;
            }
            return Err(PstError::NumericalFailure { residual: off });
        }
        previous = off;
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let values = (0..n).map(|i| a[(i, i)]).collect();
    let mut eig = SymmetricEigen { values, vectors: v };
    orthonormalize_if_needed(&mut eig.vectors);
    Ok(eig)
}

/// One modified Gram-Schmidt pass over the columns, only when some pair of
/// columns has drifted past 1e-10 in overlap.
pub fn orthonormalize_if_needed(v: &mut DMatrix<f64>) -> bool {
    let n = v.ncols();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max(v.column(i).dot(&v.column(j)).abs());
        }
    }
    if worst <= 1e-10 {
        return false;
    }
    for i in 0..n {
        for j in 0..i {
            let proj = v.column(j).dot(&v.column(i));
            let cj = v.column(j).clone_owned();
            let mut ci = v.column_mut(i);
            ci.axpy(-proj, &cj, 1.0);
        }
        let norm = v.column(i).norm();
        v.column_mut(i).scale_mut(1.0 / norm);
    }
    true
}

/// `exp(-i A t)` from an eigen-decomposition of the real symmetric `A`.
pub fn unitary_from_eigen(eig: &SymmetricEigen, t: f64) -> DMatrix<C64> {
    let n = eig.values.len();
    let phases: Vec<C64> = eig
        .values
        .iter()
        .map(|&lambda| C64::from_polar(1.0, -lambda * t))
        .collect();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let mut acc = C64::new(0.0, 0.0);
            for (m, ph) in phases.iter().enumerate() {
                acc += ph * (eig.vectors[(j, m)] * eig.vectors[(k, m)]);
            }
            out[(j, k)] = acc;
            out[(k, j)] = acc;
        }
    }
    out
}

/// Largest entry of `|U U† - I|`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    let prod = u * u.adjoint();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Kronecker product of two real matrices.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}
