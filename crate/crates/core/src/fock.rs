//! Truncated Fock-space engine.
//!
//! Single-mode states are density matrices `C[n][m] = <n|rho|m>` on
//! `n, m <= cutoff`. The production transfer path is the pure-loss channel
//! with complex amplitude `alpha = A[in][out]`; the sector oracle evolves the
//! full multimode state photon-number sector by sector and exists to
//! validate it.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PstError, Result};
use crate::evolution::PhaseCorrection;
use crate::lattice::CouplingMatrix;
use crate::linalg::C64;

/// Default truncation budget for constructed states.
pub const DEFAULT_LEAK_BUDGET: f64 = 1e-8;

/// Default cap on the number of occupation basis states the oracle builds.
pub const DEFAULT_SECTOR_CAP: usize = 200_000;

const HERMITIAN_TOL: f64 = 1e-12;
const EIGEN_FLOOR: f64 = -1e-10;
const MAX_AUTO_CUTOFF: usize = 400;

/// Single-mode density matrix on a truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    c: DMatrix<C64>,
    leak: f64,
}

impl FockState {
    /// Validates hermiticity, trace in `[1 - leak, 1]` and positivity.
    pub fn new(c: DMatrix<C64>, leak: f64) -> Result<Self> {
        if c.nrows() == 0 || c.nrows() != c.ncols() {
            return Err(PstError::Shape(format!(
                "density matrix must be square, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if !(0.0..1.0).contains(&leak) {
            return Err(PstError::InvalidParameter(format!(
                "leak must lie in [0, 1), got {leak}"
            )));
        }
        if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PstError::InvalidState(
                "non-finite density matrix entry".into(),
            ));
        }
        let herm = (&c - c.adjoint()).camax();
        if herm > HERMITIAN_TOL {
            return Err(PstError::InvalidState(format!(
                "density matrix is not Hermitian (defect {herm:e})"
            )));
        }
        let tr = c.trace().re;
        if tr > 1.0 + 1e-12 || tr < 1.0 - leak - 1e-12 {
            return Err(PstError::InvalidState(format!(
                "trace {tr} outside [1 - {leak}, 1]"
            )));
        }
        let state = Self { c, leak };
        let floor = state.min_eigenvalue();
        if floor < EIGEN_FLOOR {
            return Err(PstError::InvalidState(format!(
                "negative eigenvalue {floor:e}"
            )));
        }
        Ok(state)
    }

    fn from_parts(c: DMatrix<C64>, leak: f64) -> Self {
        Self { c, leak }
    }

    /// Normalized projector onto a truncated amplitude vector.
    pub fn pure(amplitudes: &[C64], leak: f64) -> Result<Self> {
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(PstError::InvalidState("zero state vector".into()));
        }
        let v = v / C64::new(norm, 0.0);
        Ok(Self::from_parts(&v * v.adjoint(), leak))
    }

    pub fn vacuum(cutoff: usize) -> Self {
        Self::number(0, cutoff).expect("vacuum fits any cutoff")
    }

    /// Number state `|n>`.
    pub fn number(n: usize, cutoff: usize) -> Result<Self> {
        if n > cutoff {
            return Err(PstError::Resource {
                what: "cutoff for number state".into(),
                required: n as f64,
                limit: cutoff as f64,
            });
        }
        let mut c = DMatrix::zeros(cutoff + 1, cutoff + 1);
        c[(n, n)] = C64::new(1.0, 0.0);
        Ok(Self::from_parts(c, 0.0))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.c
    }

    pub fn cutoff(&self) -> usize {
        self.c.nrows() - 1
    }

    /// Probability mass discarded by truncation when the state was built.
    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn trace(&self) -> f64 {
        self.c.trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.c.nrows()).map(|n| self.c[(n, n)].re).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.c + self.c.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Zero-padded copy with a larger cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        let old = self.cutoff();
        if cutoff < old {
            let tail: f64 = (cutoff + 1..=old).map(|n| self.c[(n, n)].re).sum();
            if tail > 1e-14 {
                return Err(PstError::Resource {
                    what: "cutoff for state support".into(),
                    required: old as f64,
                    limit: cutoff as f64,
                });
            }
        }
        let keep = old.min(cutoff) + 1;
        let mut c = DMatrix::zeros(cutoff + 1, cutoff + 1);
        c.view_mut((0, 0), (keep, keep))
            .copy_from(&self.c.view((0, 0), (keep, keep)));
        Ok(Self::from_parts(c, self.leak))
    }
}

/// Standard input families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateKind {
    Number(usize),
    Coherent(C64),
    Squeezed(f64),
    /// Even cat `|beta> + |-beta>`.
    Cat(C64),
    Thermal(f64),
}

impl StateKind {
    pub fn name(&self) -> &'static str {
        match self {
            StateKind::Number(_) => "fock",
            StateKind::Coherent(_) => "coherent",
            StateKind::Squeezed(_) => "squeezed",
            StateKind::Cat(_) => "cat",
            StateKind::Thermal(_) => "thermal",
        }
    }

    /// Photon-number amplitudes `c_0..c_len-1` of a pure kind.
    fn amplitudes(&self, len: usize) -> Option<Vec<C64>> {
        let mut out = vec![C64::new(0.0, 0.0); len];
        match *self {
            StateKind::Number(n) => {
                if n < len {
                    out[n] = C64::new(1.0, 0.0);
                }
            }
            StateKind::Coherent(beta) => {
                let mut c = C64::new((-beta.norm_sqr() / 2.0).exp(), 0.0);
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = c;
                    c = c * beta / ((k + 1) as f64).sqrt();
                }
            }
            StateKind::Cat(beta) => {
                let norm = (2.0 * (1.0 + (-2.0 * beta.norm_sqr()).exp())).sqrt();
                let mut c = C64::new(2.0 * (-beta.norm_sqr() / 2.0).exp() / norm, 0.0);
                for (k, slot) in out.iter_mut().enumerate() {
                    if k % 2 == 0 {
                        *slot = c;
                    }
                    c = c * beta / ((k + 1) as f64).sqrt();
                }
            }
            StateKind::Squeezed(r) => {
                let t = -r.tanh();
                let mut c = 1.0 / r.cosh().sqrt();
                let mut n = 0usize;
                while 2 * n < len {
                    out[2 * n] = C64::new(c, 0.0);
                    c *= t * ((2 * n + 1) as f64 / (2 * n + 2) as f64).sqrt();
                    n += 1;
                }
            }
            StateKind::Thermal(_) => return None,
        }
        Some(out)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StateKind::Number(_) => true,
            StateKind::Coherent(b) | StateKind::Cat(b) => b.re.is_finite() && b.im.is_finite(),
            StateKind::Squeezed(r) => r.is_finite(),
            StateKind::Thermal(n) => n.is_finite() && n >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(PstError::InvalidParameter(format!(
                "bad parameter for {self}"
            )))
        }
    }

    /// Probability mass above `cutoff`.
    pub fn tail_mass(&self, cutoff: usize) -> Result<f64> {
        self.validate()?;
        match *self {
            StateKind::Number(n) => Ok(if n > cutoff { 1.0 } else { 0.0 }),
            StateKind::Thermal(nbar) => Ok((nbar / (nbar + 1.0)).powi(cutoff as i32 + 1)),
            _ => {
                // sum the tail directly until the terms are negligible
                let mut len = 2 * (cutoff + 1) + 64;
                loop {
                    let amps = self.amplitudes(len).expect("pure kind");
                    let tail: f64 = amps[cutoff + 1..].iter().map(|c| c.norm_sqr()).sum();
                    let last: f64 = amps[len - 8..].iter().map(|c| c.norm_sqr()).sum();
                    if last <= 1e-30 * tail.max(1e-300) || last < 1e-300 || len > 1 << 16 {
                        return Ok(tail);
                    }
                    len *= 2;
                }
            }
        }
    }

    /// Smallest cutoff whose tail mass is below `budget`.
    pub fn auto_cutoff(&self, budget: f64) -> Result<usize> {
        if let StateKind::Number(n) = self {
            return Ok(*n);
        }
        for cutoff in 0..=MAX_AUTO_CUTOFF {
            if self.tail_mass(cutoff)? < budget {
                return Ok(cutoff);
            }
        }
        Err(PstError::Resource {
            what: format!("cutoff for {self} under leak budget {budget:e}"),
            required: f64::INFINITY,
            limit: MAX_AUTO_CUTOFF as f64,
        })
    }

    /// Truncated, renormalized density matrix. `cutoff = None` picks the
    /// smallest cutoff meeting `budget`.
    pub fn build(&self, cutoff: Option<usize>, budget: f64) -> Result<FockState> {
        self.validate()?;
        let cutoff = match cutoff {
            Some(c) => c,
            None => self.auto_cutoff(budget)?,
        };
        let leak = self.tail_mass(cutoff)?;
        if leak >= budget {
            let needed = self
                .auto_cutoff(budget)
                .map(|c| c as f64)
                .unwrap_or(f64::INFINITY);
            return Err(PstError::Resource {
                what: format!("cutoff for {self} (leak {leak:e} over budget {budget:e})"),
                required: needed,
                limit: cutoff as f64,
            });
        }
        match self.amplitudes(cutoff + 1) {
            Some(amps) => FockState::pure(&amps, leak),
            None => {
                let StateKind::Thermal(nbar) = *self else {
                    unreachable!()
                };
                let q = nbar / (nbar + 1.0);
                let p: Vec<f64> = (0..=cutoff)
                    .map(|n| q.powi(n as i32) / (nbar + 1.0))
                    .collect();
                let total: f64 = p.iter().sum();
                let c = DMatrix::from_diagonal(&DVector::from_iterator(
                    cutoff + 1,
                    p.iter().map(|x| C64::new(x / total, 0.0)),
                ));
                Ok(FockState::from_parts(c, leak))
            }
        }
    }
}

fn fmt_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.re == 0.0 {
        format!("{}i", z.im)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StateKind::Number(n) => write!(f, "fock:{n}"),
            StateKind::Coherent(b) => write!(f, "coherent:{}", fmt_complex(b)),
            StateKind::Squeezed(r) => write!(f, "squeezed:{r}"),
            StateKind::Cat(b) => write!(f, "cat:{}", fmt_complex(b)),
            StateKind::Thermal(n) => write!(f, "thermal:{n}"),
        }
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also `j` for the imaginary unit).
pub fn parse_complex(s: &str) -> Result<C64> {
    let bad = || PstError::InvalidInput(format!("cannot parse complex number '{s}'"));
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t
            .parse::<f64>()
            .map(|re| C64::new(re, 0.0))
            .map_err(|_| bad());
    };
    // split at the last sign that is not an exponent sign or the leading sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let parse_im = |x: &str| -> Result<f64> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse().map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => {
            let re: f64 = body[..k].parse().map_err(|_| bad())?;
            Ok(C64::new(re, parse_im(&body[k..])?))
        }
        None => Ok(C64::new(0.0, parse_im(body)?)),
    }
}

impl FromStr for StateKind {
    type Err = PstError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("vacuum") {
            return Ok(StateKind::Number(0));
        }
        let (kind, param) = s.split_once(':').ok_or_else(|| {
            PstError::InvalidInput(format!("state spec '{s}' is not of the form kind:param"))
        })?;
        let real = |p: &str| -> Result<f64> {
            p.trim()
                .parse::<f64>()
                .map_err(|_| PstError::InvalidInput(format!("cannot parse '{p}' as a real number")))
        };
        let kind = match kind.trim().to_ascii_lowercase().as_str() {
            "fock" | "number" => StateKind::Number(param.trim().parse().map_err(|_| {
                PstError::InvalidInput(format!(
                    "photon number '{param}' is not a non-negative integer"
                ))
            })?),
            "coherent" => StateKind::Coherent(parse_complex(param)?),
            "squeezed" => StateKind::Squeezed(real(param)?),
            "cat" => StateKind::Cat(parse_complex(param)?),
            "thermal" => StateKind::Thermal(real(param)?),
            other => {
                return Err(PstError::InvalidInput(format!(
                    "unknown state kind '{other}'"
                )))
            }
        };
        kind.validate()
            .map_err(|e| PstError::InvalidInput(e.to_string()))?;
        Ok(kind)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Reduced output state of a mode reached with amplitude `alpha` when the
/// rest of the lattice starts in vacuum:
///
/// `C'[n-l][m-l] += C[n][m] sqrt(binom(n,l) binom(m,l)) alpha^{n-l} conj(alpha)^{m-l} (1-|alpha|^2)^l`.
pub fn loss_channel_output(input: &FockState, alpha: C64) -> Result<FockState> {
    let mag = alpha.norm();
    if !mag.is_finite() || mag > 1.0 + 1e-12 {
        return Err(PstError::InvalidCoefficient(mag));
    }
    let d = input.c.nrows();
    let loss = (1.0 - alpha.norm_sqr()).max(0.0);
    let conj = alpha.conj();
    let pow_a: Vec<C64> = (0..d).map(|k| alpha.powu(k as u32)).collect();
    let pow_c: Vec<C64> = (0..d).map(|k| conj.powu(k as u32)).collect();
    let pow_l: Vec<f64> = (0..d).map(|k| loss.powi(k as i32)).collect();
    let mut out = DMatrix::zeros(d, d);
    for n in 0..d {
        for m in 0..d {
            let c = input.c[(n, m)];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for l in 0..=n.min(m) {
                let w = (binomial(n, l) * binomial(m, l)).sqrt() * pow_l[l];
                out[(n - l, m - l)] += c * pow_a[n - l] * pow_c[m - l] * w;
            }
        }
    }
    Ok(FockState::from_parts(out, input.leak))
}

/// `C[n][m] -> e^{i phi (n - m)} C[n][m]`.
pub fn apply_phase_gate_fock(state: &FockState, phi: f64) -> FockState {
    let c = DMatrix::from_fn(state.c.nrows(), state.c.ncols(), |n, m| {
        state.c[(n, m)] * C64::from_polar(1.0, phi * (n as f64 - m as f64))
    });
    FockState::from_parts(c, state.leak)
}

/// Phase gate by whole quarter turns with exact unit factors.
pub fn apply_phase_correction_fock(state: &FockState, phase: PhaseCorrection) -> FockState {
    let k = phase.quarter_turns() as i64;
    let c = DMatrix::from_fn(state.c.nrows(), state.c.ncols(), |n, m| {
        let q = (k * (n as i64 - m as i64)).rem_euclid(4) as u8;
        state.c[(n, m)] * PhaseCorrection::from_quarter_turns(q).unit()
    });
    FockState::from_parts(c, state.leak)
}

/// Eigenvalues below this are rounding noise of a rank-deficient matrix.
fn noise_floor(values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(0.0, f64::max);
    64.0 * f64::EPSILON * top * values.len() as f64
}

fn hermitian_sqrt(c: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let h = (c + c.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    if let Some(&min) = eig.eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < EIGEN_FLOOR {
            return Err(PstError::InvalidState(format!(
                "negative eigenvalue {min:e}"
            )));
        }
    }
    let floor = noise_floor(eig.eigenvalues.as_slice());
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|&l| C64::new(if l > floor { l.sqrt() } else { 0.0 }, 0.0)),
    );
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.adjoint())
}

/// Uhlmann fidelity `(tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2`, evaluated as
/// the squared trace norm of `sqrt(rho1) sqrt(rho2)`.
pub fn fock_uhlmann_fidelity(rho1: &FockState, rho2: &FockState) -> Result<f64> {
    if rho1.cutoff() != rho2.cutoff() {
        return Err(PstError::Shape(format!(
            "cutoffs differ ({} vs {})",
            rho1.cutoff(),
            rho2.cutoff()
        )));
    }
    let product = hermitian_sqrt(&rho1.c)? * hermitian_sqrt(&rho2.c)?;
    let trace_norm: f64 = product.svd(false, false).singular_values.iter().sum();
    Ok(trace_norm * trace_norm)
}

/// Single-mode production pipeline: pure-loss transfer with amplitude
/// `alpha`, then the output phase gate.
pub fn fock_transfer(input: &FockState, alpha: C64, phase: PhaseCorrection) -> Result<FockState> {
    Ok(apply_phase_correction_fock(
        &loss_channel_output(input, alpha)?,
        phase,
    ))
}

/// Occupation basis of one photon-number sector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    photons: usize,
    basis: Vec<Vec<u16>>,
    amplitudes: DVector<C64>,
}

impl Sector {
    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn basis(&self) -> &[Vec<u16>] {
        &self.basis
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Multimode state `rho = sum_{n,m} C[n][m] |psi_n><psi_m|` with `|psi_n>`
/// a normalized vector in the `n`-photon sector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodeFockState {
    modes: usize,
    coefficients: DMatrix<C64>,
    sectors: Vec<Sector>,
    leak: f64,
}

/// Number of occupation states of `modes` modes holding `photons` photons.
pub fn sector_dimension(modes: usize, photons: usize) -> f64 {
    if modes == 0 {
        return 0.0;
    }
    binomial(photons + modes - 1, photons)
}

fn enumerate_sector(modes: usize, photons: usize) -> Vec<Vec<u16>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if k + 1 == cur.len() {
            cur[k] = left as u16;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[k] = v as u16;
            rec(k + 1, left - v, cur, out);
        }
        cur[k] = 0;
    }
    let mut out = Vec::new();
    rec(0, photons, &mut vec![0; modes], &mut out);
    out
}

/// Sparse sector Hamiltonian as row lists of `(column, value)`.
fn sector_hamiltonian(m: &DMatrix<f64>, basis: &[Vec<u16>]) -> Vec<Vec<(usize, f64)>> {
    let index: HashMap<&[u16], usize> = basis
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    let n = m.nrows();
    let mut rows = Vec::with_capacity(basis.len());
    let mut scratch: Vec<u16> = vec![0; n];
    for s in basis {
        let mut row = Vec::new();
        let diag: f64 = (0..n).map(|j| m[(j, j)] * s[j] as f64).sum();
        if diag != 0.0 {
            row.push((index[s.as_slice()], diag));
        }
        for k in 0..n {
            if s[k] == 0 {
                continue;
            }
            for j in 0..n {
                let h = m[(j, k)];
                if j == k || h == 0.0 {
                    continue;
                }
                scratch.copy_from_slice(s);
                scratch[k] -= 1;
                scratch[j] += 1;
                let amp = h * ((s[j] as f64 + 1.0) * s[k] as f64).sqrt();
                row.push((index[scratch.as_slice()], amp));
            }
        }
        rows.push(row);
    }
    rows
}

/// `exp(-i H t) v` by a Taylor series on sub-steps with `|H| h <= 1/2`.
fn sector_exp_action(h: &[Vec<(usize, f64)>], v: &DVector<C64>, t: f64) -> DVector<C64> {
    let bound = h
        .iter()
        .map(|row| row.iter().map(|(_, x)| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if bound == 0.0 || t == 0.0 {
        return v.clone();
    }
    let steps = (2.0 * bound * t.abs()).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut state = v.clone();
    for _ in 0..steps {
        let mut term = state.clone();
        let mut sum = state.clone();
        for k in 1..60 {
            let mut next = DVector::zeros(term.len());
            for (i, row) in h.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &(j, x) in row {
                    acc += term[j] * x;
                }
                next[i] = acc * C64::new(0.0, -dt / k as f64);
            }
            term = next;
            sum += &term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        state = sum;
    }
    state
}

/// Evolves a single-mode input placed at mode `site` (vacuum elsewhere)
/// through the full lattice, sector by sector, for time `t`.
pub fn full_evolution_oracle(
    input: &FockState,
    m: &CouplingMatrix,
    site: usize,
    t: f64,
    cap: usize,
) -> Result<MultimodeFockState> {
    let modes = m.num_modes();
    if site >= modes {
        return Err(PstError::InvalidParameter(format!(
            "site {site} out of range for {modes} modes"
        )));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(PstError::InvalidParameter(format!(
            "evolution time must be finite and >= 0, got {t}"
        )));
    }
    let cutoff = input.cutoff();
    let required: f64 = (0..=cutoff).map(|n| sector_dimension(modes, n)).sum();
    if required > cap as f64 {
        return Err(PstError::Resource {
            what: "occupation basis states".into(),
            required,
            limit: cap as f64,
        });
    }
    let sectors = (0..=cutoff)
        .map(|n| {
            let basis = enumerate_sector(modes, n);
            let mut v = DVector::zeros(basis.len());
            let start = basis
                .iter()
                .position(|s| s[site] as usize == n)
                .expect("all photons on one site is a basis state");
            v[start] = C64::new(1.0, 0.0);
            let amplitudes = if n == 0 {
                v
            } else {
                sector_exp_action(&sector_hamiltonian(m.matrix(), &basis), &v, t)
            };
            Sector {
                photons: n,
                basis,
                amplitudes,
            }
        })
        .collect();
    Ok(MultimodeFockState {
        modes,
        coefficients: input.c.clone(),
        sectors,
        leak: input.leak,
    })
}

impl MultimodeFockState {
    pub fn num_modes(&self) -> usize {
        self.modes
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn trace(&self) -> f64 {
        (0..self.coefficients.nrows())
            .map(|n| self.coefficients[(n, n)].re * self.sectors[n].amplitudes.norm_squared())
            .sum()
    }

    /// Mean photon number on each mode.
    pub fn occupations(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.modes];
        for (n, sec) in self.sectors.iter().enumerate() {
            let w = self.coefficients[(n, n)].re;
            for (s, a) in sec.basis.iter().zip(sec.amplitudes.iter()) {
                for (k, &x) in s.iter().enumerate() {
                    occ[k] += w * a.norm_sqr() * x as f64;
                }
            }
        }
        occ
    }

    /// Partial trace over every mode except `site`.
    pub fn reduce_mode(&self, site: usize) -> Result<FockState> {
        if site >= self.modes {
            return Err(PstError::InvalidParameter(format!(
                "site {site} out of range for {} modes",
                self.modes
            )));
        }
        let rest_maps: Vec<HashMap<Vec<u16>, C64>> = self
            .sectors
            .iter()
            .map(|sec| {
                sec.basis
                    .iter()
                    .zip(sec.amplitudes.iter())
                    .filter(|(_, a)| a.norm_sqr() > 0.0)
                    .map(|(s, &a)| {
                        let mut rest = s.clone();
                        rest[site] = 0;
                        (rest, a)
                    })
                    .collect()
            })
            .collect();
        let d = self.coefficients.nrows();
        let mut out = DMatrix::zeros(d, d);
        for n in 0..d {
            for m in 0..d {
                let c = self.coefficients[(n, m)];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                for (rest, &an) in &rest_maps[n] {
                    let Some(&am) = rest_maps[m].get(rest) else {
                        continue;
                    };
                    let used: usize = rest.iter().map(|&x| x as usize).sum();
                    out[(n - used, m - used)] += c * an * am.conj();
                }
            }
        }
        Ok(FockState::from_parts(out, self.leak))
    }
}

/// JSON form: `cutoff`, `leak`, row-major `re` and `im`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockDocument {
    pub cutoff: usize,
    #[serde(default)]
    pub leak: f64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&FockState> for FockDocument {
    fn from(s: &FockState) -> Self {
        let d = s.c.nrows();
        let entries: Vec<C64> = (0..d)
            .flat_map(|n| (0..d).map(move |m| (n, m)))
            .map(|(n, m)| s.c[(n, m)])
            .collect();
        Self {
            cutoff: s.cutoff(),
            leak: s.leak,
            re: entries
                .iter()
                .map(|z| crate::io::round_sig(z.re, 15))
                .collect(),
            im: entries
                .iter()
                .map(|z| crate::io::round_sig(z.im, 15))
                .collect(),
        }
    }
}

impl TryFrom<FockDocument> for FockState {
    type Error = PstError;

    fn try_from(doc: FockDocument) -> Result<Self> {
        let d = doc.cutoff + 1;
        if doc.re.len() != d * d || doc.im.len() != d * d {
            return Err(PstError::Shape(format!(
                "cutoff {} needs {} entries, got re {} / im {}",
                doc.cutoff,
                d * d,
                doc.re.len(),
                doc.im.len()
            )));
        }
        let c = DMatrix::from_fn(d, d, |n, m| C64::new(doc.re[n * d + m], doc.im[n * d + m]));
        FockState::new(c, doc.leak)
    }
}
