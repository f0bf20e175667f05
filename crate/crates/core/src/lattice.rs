//! Lattice geometry, mirror-symmetric coupling design and the single-particle
//! coupling matrix `M`.
//!
//! Sites are 1-based triples `(u, v, w)` with `1 <= u <= L`, `1 <= v <= B`,
//! `1 <= w <= H`. Every matrix and state vector in the crate uses the same
//! row-major flattening, see [`mode_index`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PstError, Result};
use crate::io::round_sig;

/// Axis identifiers in storage order.
pub const AXIS_L: usize = 0;
pub const AXIS_B: usize = 1;
pub const AXIS_H: usize = 2;

/// Mode counts `(L, B, H)` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims(pub [usize; 3]);

impl Dims {
    pub fn new(l: usize, b: usize, h: usize) -> Result<Self> {
        let dims = Dims([l, b, h]);
        dims.validate()?;
        Ok(dims)
    }

    /// A linear chain of `n` modes, laid out along the reference axis.
    pub fn linear(n: usize) -> Result<Self> {
        Self::new(1, n, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.contains(&0) {
            return Err(PstError::InvalidLattice(format!(
                "every axis needs at least one mode, got {:?}",
                self.0
            )));
        }
        if self.total() < 2 {
            return Err(PstError::InvalidLattice(format!(
                "lattice {:?} has a single mode; transfer needs N >= 2",
                self.0
            )));
        }
        Ok(())
    }

    pub fn l(&self) -> usize {
        self.0[AXIS_L]
    }

    pub fn b(&self) -> usize {
        self.0[AXIS_B]
    }

    pub fn h(&self) -> usize {
        self.0[AXIS_H]
    }

    pub fn axis(&self, a: usize) -> usize {
        self.0[a]
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    /// Number of axes with more than one mode.
    pub fn dimensionality(&self) -> usize {
        self.0.iter().filter(|&&n| n > 1).count()
    }

    /// Exponent `D` of the accumulated `(-i)^D` transfer phase: the sum of
    /// `n_a - 1` over the axes.
    pub fn phase_exponent(&self) -> usize {
        self.0.iter().map(|&n| n - 1).sum()
    }

    /// Mode count of the axis that fixes the transfer time: `B`, or `N` for a
    /// chain laid out along another axis.
    pub fn reference_count(&self) -> usize {
        if self.dimensionality() == 1 {
            self.total()
        } else {
            self.b()
        }
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.0[0], self.0[1], self.0[2])
    }
}

impl std::str::FromStr for Dims {
    type Err = PstError;

    /// Parses `LxBxH`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        if parts.len() != 3 {
            return Err(PstError::InvalidLattice(format!(
                "expected LxBxH, got {s:?}"
            )));
        }
        let mut out = [0usize; 3];
        for (slot, p) in out.iter_mut().zip(&parts) {
            *slot = p
                .trim()
                .parse()
                .map_err(|_| PstError::InvalidLattice(format!("bad axis count {p:?} in {s:?}")))?;
        }
        Dims::new(out[0], out[1], out[2])
    }
}

/// Lattice dimensions together with the coupling scale `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub dims: Dims,
    /// Coupling scale (inverse time, ħ = 1).
    pub coupling: f64,
}

impl LatticeSpec {
    pub fn new(dims: Dims, coupling: f64) -> Result<Self> {
        dims.validate()?;
        if !(coupling.is_finite() && coupling > 0.0) {
            return Err(PstError::InvalidParameter(format!(
                "coupling scale J must be finite and > 0, got {coupling}"
            )));
        }
        Ok(Self { dims, coupling })
    }

    pub fn linear(n: usize, coupling: f64) -> Result<Self> {
        Self::new(Dims::linear(n)?, coupling)
    }

    pub fn num_modes(&self) -> usize {
        self.dims.total()
    }
}

/// Gap couplings per axis; axis `a` with `n_a` modes carries `n_a - 1` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    pub axes: [Vec<f64>; 3],
}

impl CouplingProfile {
    /// Builds a profile, checking finiteness, sign and mirror symmetry.
    pub fn new(axes: [Vec<f64>; 3]) -> Result<Self> {
        for (a, gaps) in axes.iter().enumerate() {
            for (j, &x) in gaps.iter().enumerate() {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(PstError::InvalidParameter(format!(
                        "axis {a} gap {} coupling must be finite and >= 0, got {x}",
                        j + 1
                    )));
                }
            }
            let n = gaps.len();
            for j in 0..n / 2 {
                let (x, y) = (gaps[j], gaps[n - 1 - j]);
                if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                    return Err(PstError::InvalidParameter(format!(
                        "axis {a} profile is not mirror symmetric: gap {} = {x}, gap {} = {y}",
                        j + 1,
                        n - j
                    )));
                }
            }
        }
        Ok(Self { axes })
    }

    /// Equal couplings `J` on every gap.
    pub fn uniform(dims: Dims, coupling: f64) -> Result<Self> {
        dims.validate()?;
        let axes = [0, 1, 2].map(|a| vec![coupling; dims.axis(a) - 1]);
        Self::new(axes)
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn max_coupling(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|v| v.iter().copied())
            .fold(0.0, f64::max)
    }

    fn check_dims(&self, dims: Dims) -> Result<()> {
        for a in 0..3 {
            let want = dims.axis(a) - 1;
            if self.axes[a].len() != want {
                return Err(PstError::Shape(format!(
                    "axis {a} has {} modes and needs {want} gap couplings, profile has {}",
                    dims.axis(a),
                    self.axes[a].len()
                )));
            }
        }
        Ok(())
    }
}

/// `J_j = J sqrt(j (N - j) / (N - 1))` for `j = 1..N-1`.
pub fn pst_gap_couplings(n: usize, coupling: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(PstError::InvalidLattice(format!(
            "a chain needs N >= 2 modes, got {n}"
        )));
    }
    let denom = (n - 1) as f64;
    Ok((1..n)
        .map(|j| coupling * ((j * (n - j)) as f64 / denom).sqrt())
        .collect())
}

/// Transfer couplings for a linear chain of `n` modes, placed on the
/// reference axis (dims `1 x n x 1`).
pub fn design_couplings_1d(n: usize, coupling: f64) -> Result<CouplingProfile> {
    let gaps = pst_gap_couplings(n, coupling)?;
    CouplingProfile::new([Vec::new(), gaps, Vec::new()])
}

/// Transfer couplings for a rectangular lattice. Axis B is the reference
/// axis; axes L and H are rescaled by `sqrt((n_a - 1) / (B - 1))` so every
/// axis shares the same transfer period.
pub fn design_couplings_nd(spec: &LatticeSpec) -> Result<CouplingProfile> {
    let dims = spec.dims;
    dims.validate()?;
    let b = dims.b();
    if b == 1 {
        if dims.l() > 1 || dims.h() > 1 {
            return Err(PstError::InvalidReferenceAxis { dims: dims.0 });
        }
        return Err(PstError::InvalidLattice(format!(
            "lattice {dims} has a single mode"
        )));
    }
    let mut axes: [Vec<f64>; 3] = Default::default();
    axes[AXIS_B] = pst_gap_couplings(b, spec.coupling)?;
    for a in [AXIS_L, AXIS_H] {
        let n = dims.axis(a);
        if n > 1 {
            let scale = ((n - 1) as f64 / (b - 1) as f64).sqrt();
            axes[a] = pst_gap_couplings(n, spec.coupling)?
                .into_iter()
                .map(|x| x * scale)
                .collect();
        }
    }
    CouplingProfile::new(axes)
}

/// Row-major 0-based index of the 1-based site `(u, v, w)`.
pub fn mode_index(site: [usize; 3], dims: Dims) -> Result<usize> {
    let [u, v, w] = site;
    let [l, b, h] = dims.0;
    if u == 0 || v == 0 || w == 0 || u > l || v > b || w > h {
        return Err(PstError::Index { site, dims: dims.0 });
    }
    Ok((u - 1) * b * h + (v - 1) * h + (w - 1))
}

/// Inverse of [`mode_index`].
pub fn site_of(index: usize, dims: Dims) -> Result<[usize; 3]> {
    let [_, b, h] = dims.0;
    if index >= dims.total() {
        return Err(PstError::Index {
            site: [index, 0, 0],
            dims: dims.0,
        });
    }
    Ok([index / (b * h) + 1, (index / h) % b + 1, index % h + 1])
}

/// Site reflected through the lattice centre.
pub fn mirror_site(site: [usize; 3], dims: Dims) -> [usize; 3] {
    let [l, b, h] = dims.0;
    [l + 1 - site[0], b + 1 - site[1], h + 1 - site[2]]
}

/// Mirror permutation on flattened indices: `perm[q]` is the image of `q`.
pub fn mirror_permutation(dims: Dims) -> Vec<usize> {
    (0..dims.total())
        .map(|q| {
            let s = site_of(q, dims).expect("index in range");
            mode_index(mirror_site(s, dims), dims).expect("mirror in range")
        })
        .collect()
}

/// Real symmetric nearest-neighbour coupling matrix with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    matrix: DMatrix<f64>,
    dims: Dims,
}

impl CouplingMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn num_modes(&self) -> usize {
        self.matrix.nrows()
    }

    /// True when only one axis has more than one mode, so `M` is tridiagonal.
    pub fn is_chain(&self) -> bool {
        self.dims.dimensionality() == 1
    }

    /// Super-diagonal of a chain matrix.
    pub fn chain_couplings(&self) -> Option<Vec<f64>> {
        if !self.is_chain() {
            return None;
        }
        let n = self.num_modes();
        Some((0..n - 1).map(|k| self.matrix[(k, k + 1)]).collect())
    }
}

/// Assembles `M[q][q']` = axis coupling for lattice neighbours, else 0.
pub fn coupling_matrix(spec: &LatticeSpec, profile: &CouplingProfile) -> Result<CouplingMatrix> {
    let dims = spec.dims;
    dims.validate()?;
    profile.check_dims(dims)?;
    let n = dims.total();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for q in 0..n {
        let site = site_of(q, dims)?;
        for a in 0..3 {
            if site[a] < dims.axis(a) {
                let mut next = site;
                next[a] += 1;
                let r = mode_index(next, dims)?;
                let j = profile.axes[a][site[a] - 1];
                m[(q, r)] = j;
                m[(r, q)] = j;
            }
        }
    }
    Ok(CouplingMatrix { matrix: m, dims })
}

/// JSON document for a designed profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub dims: [usize; 3],
    #[serde(rename = "J")]
    pub coupling: f64,
    pub axis_profiles: [Vec<f64>; 3],
}

impl ProfileDocument {
    pub fn new(spec: &LatticeSpec, profile: &CouplingProfile) -> Self {
        Self {
            dims: spec.dims.0,
            coupling: round_sig(spec.coupling, 15),
            axis_profiles: profile
                .axes
                .clone()
                .map(|v| v.into_iter().map(|x| round_sig(x, 15)).collect()),
        }
    }

    pub fn into_parts(self) -> Result<(LatticeSpec, CouplingProfile)> {
        let spec = LatticeSpec::new(Dims(self.dims), self.coupling)?;
        let profile = CouplingProfile::new(self.axis_profiles)?;
        profile.check_dims(spec.dims)?;
        Ok((spec, profile))
    }
}
