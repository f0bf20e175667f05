//! Time scans and verdicts shared by the CLI and the FFI.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PstError, Result};
use crate::evolution::{
    correction_phase, mirror_pairs, optimal_time, pst_check, PhaseCorrection, Propagator,
};
use crate::fock::{fock_transfer, fock_uhlmann_fidelity, FockState, StateKind};
use crate::gaussian::{
    apply_phase_correction, apply_symplectic, log_negativity, reduce_to_modes,
    symplectic_from_evolution, uhlmann_fidelity_gaussian, GaussianState, SingleModeParams,
};
use crate::io::{round_sig, CsvTable};
use crate::lattice::{
    coupling_matrix, design_couplings_nd, mirror_site, mode_index, CouplingMatrix, CouplingProfile,
    Dims, LatticeSpec,
};
use crate::linalg::C64;

/// Uniform time grid in `Jt` units, `start` and `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl TimeGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let g = Self { start, stop, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(PstError::InvalidParameter(
                "time grid values must be finite".into(),
            ));
        }
        if self.start < 0.0 {
            return Err(PstError::InvalidParameter(format!(
                "grid start must be >= 0, got {}",
                self.start
            )));
        }
        if !(self.step > 0.0) {
            return Err(PstError::InvalidParameter(format!(
                "grid step must be > 0, got {}",
                self.step
            )));
        }
        if self.stop < self.start {
            return Err(PstError::InvalidParameter(format!(
                "grid stop {} is before start {}",
                self.stop, self.start
            )));
        }
        Ok(())
    }

    /// `start + k * step` for every `k` that stays within `stop` (with a
    /// relative slack of `1e-9` steps).
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| self.start + k as f64 * self.step)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Gaussian,
    Fock,
    Both,
}

impl FromStr for Engine {
    type Err = PstError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Engine::Gaussian),
            "fock" => Ok(Engine::Fock),
            "both" => Ok(Engine::Both),
            other => Err(PstError::InvalidInput(format!("unknown engine '{other}'"))),
        }
    }
}

/// Which couplings the lattice uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    #[default]
    Designed,
    Uniform,
}

impl FromStr for ProfileKind {
    type Err = PstError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "designed" | "pst" => Ok(ProfileKind::Designed),
            "uniform" => Ok(ProfileKind::Uniform),
            other => Err(PstError::InvalidInput(format!("unknown profile '{other}'"))),
        }
    }
}

/// Single-mode input: one of the Fock-basis families, or a general
/// Gaussian `gaussian:ax,ay,a,b,c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputState {
    Kind(StateKind),
    Gaussian(SingleModeParams),
}

impl FromStr for InputState {
    type Err = PstError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("gaussian:") {
            let v: Vec<f64> = rest
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| PstError::InvalidInput(format!("cannot parse '{x}' in '{s}'")))
                })
                .collect::<Result<_>>()?;
            let [alpha_x, alpha_y, a, b, c] = v[..] else {
                return Err(PstError::InvalidInput(format!(
                    "'{s}' needs five values alpha_x,alpha_y,a,b,c"
                )));
            };
            return Ok(InputState::Gaussian(SingleModeParams {
                alpha_x,
                alpha_y,
                a,
                b,
                c,
            }));
        }
        if s.eq_ignore_ascii_case("figure") {
            return Ok(InputState::Gaussian(SingleModeParams::figure_input()));
        }
        s.parse().map(InputState::Kind)
    }
}

impl fmt::Display for InputState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputState::Kind(k) => write!(f, "{k}"),
            InputState::Gaussian(p) => write!(
                f,
                "gaussian:{},{},{},{},{}",
                p.alpha_x, p.alpha_y, p.a, p.b, p.c
            ),
        }
    }
}

impl InputState {
    pub fn gaussian(&self) -> Result<GaussianState> {
        match *self {
            InputState::Gaussian(p) => p.state(),
            InputState::Kind(StateKind::Coherent(b)) => Ok(GaussianState::coherent(b)),
            InputState::Kind(StateKind::Squeezed(r)) => Ok(GaussianState::squeezed(r)),
            InputState::Kind(StateKind::Thermal(n)) => Ok(GaussianState::thermal(n)),
            InputState::Kind(StateKind::Number(0)) => Ok(GaussianState::vacuum(1)),
            InputState::Kind(k) => Err(PstError::Unsupported(format!("{k} is not Gaussian"))),
        }
    }

    pub fn fock(&self, cutoff: Option<usize>, budget: f64) -> Result<FockState> {
        match self {
            InputState::Kind(k) => k.build(cutoff, budget),
            InputState::Gaussian(_) => Err(PstError::Unsupported(
                "general Gaussian inputs run on the gaussian engine only".into(),
            )),
        }
    }
}

/// Builds the coupling matrix for `dims` with the chosen profile.
pub fn lattice_matrix(
    dims: Dims,
    coupling: f64,
    profile: ProfileKind,
) -> Result<(LatticeSpec, CouplingProfile, CouplingMatrix)> {
    let spec = LatticeSpec::new(dims, coupling)?;
    let prof = match profile {
        ProfileKind::Designed => design_couplings_nd(&spec)?,
        ProfileKind::Uniform => CouplingProfile::uniform(dims, coupling)?,
    };
    let m = coupling_matrix(&spec, &prof)?;
    Ok((spec, prof, m))
}

/// Everything a transfer scan needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSetup {
    pub dims: Dims,
    pub coupling: f64,
    pub profile: ProfileKind,
    pub grid: TimeGrid,
    pub input: InputState,
    pub engine: Engine,
    /// 1-based input site; the output is its mirror image.
    pub input_site: [usize; 3],
    pub cutoff: Option<usize>,
    pub leak_budget: f64,
    pub phase_correction: bool,
}

impl ScanSetup {
    pub fn new(dims: Dims, input: InputState, grid: TimeGrid) -> Self {
        Self {
            dims,
            coupling: 1.0,
            profile: ProfileKind::Designed,
            grid,
            input,
            engine: Engine::Gaussian,
            input_site: [1, 1, 1],
            cutoff: None,
            leak_budget: crate::fock::DEFAULT_LEAK_BUDGET,
            phase_correction: true,
        }
    }
}

/// One grid point of a transfer scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub jt: f64,
    pub abs_a: f64,
    pub fidelity: Option<f64>,
    pub log_negativity: Option<f64>,
    pub fidelity_fock: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub engine: Engine,
    pub input_mode: usize,
    pub output_mode: usize,
    pub leak: Option<f64>,
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    /// Gaussian: `Jt,fidelity,log_negativity,abs_A`; Fock: `Jt,fidelity,abs_A`;
    /// both: `Jt,fidelity,log_negativity,fidelity_fock,abs_A`.
    pub fn to_csv(&self) -> CsvTable {
        let header: &[&str] = match self.engine {
            Engine::Gaussian => &["Jt", "fidelity", "log_negativity", "abs_A"],
            Engine::Fock => &["Jt", "fidelity", "abs_A"],
            Engine::Both => &["Jt", "fidelity", "log_negativity", "fidelity_fock", "abs_A"],
        };
        let mut t = CsvTable::new(header);
        for r in &self.rows {
            let vals: Vec<f64> = match self.engine {
                Engine::Gaussian => vec![
                    r.jt,
                    r.fidelity.unwrap_or(f64::NAN),
                    r.log_negativity.unwrap_or(f64::NAN),
                    r.abs_a,
                ],
                Engine::Fock => vec![r.jt, r.fidelity_fock.unwrap_or(f64::NAN), r.abs_a],
                Engine::Both => vec![
                    r.jt,
                    r.fidelity.unwrap_or(f64::NAN),
                    r.log_negativity.unwrap_or(f64::NAN),
                    r.fidelity_fock.unwrap_or(f64::NAN),
                    r.abs_a,
                ],
            };
            t.push_numbers(&vals, 12);
        }
        t
    }
}

/// Transfers the input from `input_site` to its mirror image at every grid
/// point. Points are computed in parallel and returned in grid order.
pub fn run_scan(setup: &ScanSetup) -> Result<ScanResult> {
    setup.grid.validate()?;
    let (_, _, m) = lattice_matrix(setup.dims, setup.coupling, setup.profile)?;
    let q_in = mode_index(setup.input_site, setup.dims)?;
    let q_out = mode_index(mirror_site(setup.input_site, setup.dims), setup.dims)?;
    let modes = m.num_modes();
    let phase = if setup.phase_correction {
        correction_phase(setup.dims)?
    } else {
        PhaseCorrection::from_quarter_turns(0)
    };
    let gauss_in = match setup.engine {
        Engine::Gaussian | Engine::Both => Some(setup.input.gaussian()?),
        Engine::Fock => None,
    };
    let fock_in = match setup.engine {
        Engine::Fock | Engine::Both => Some(setup.input.fock(setup.cutoff, setup.leak_budget)?),
        Engine::Gaussian => None,
    };
    let global_in = gauss_in
        .as_ref()
        .map(|g| {
            let parts: Vec<GaussianState> = (0..modes)
                .map(|k| {
                    if k == q_in {
                        g.clone()
                    } else {
                        GaussianState::vacuum(1)
                    }
                })
                .collect();
            GaussianState::product(&parts)
        })
        .transpose()?;
    let prop = Propagator::new(&m)?;
    let points = setup.grid.points();
    let rows = points
        .par_iter()
        .map(|&jt| -> Result<ScanRow> {
            let a = prop.at(jt / setup.coupling)?;
            let alpha = a.entry(q_in, q_out);
            let mut row = ScanRow {
                jt,
                abs_a: alpha.norm(),
                fidelity: None,
                log_negativity: None,
                fidelity_fock: None,
            };
            if let (Some(g), Some(global)) = (&gauss_in, &global_in) {
                let out = apply_symplectic(global, &symplectic_from_evolution(&a)?)?;
                if q_in != q_out {
                    row.log_negativity =
                        Some(log_negativity(&reduce_to_modes(&out, &[q_in, q_out])?)?);
                }
                let out_mode = apply_phase_correction(&reduce_to_modes(&out, &[q_out])?, 0, phase)?;
                row.fidelity = Some(uhlmann_fidelity_gaussian(g, &out_mode)?);
            }
            if let Some(f) = &fock_in {
                let out = fock_transfer(f, clamp_unit(alpha), phase)?;
                row.fidelity_fock = Some(fock_uhlmann_fidelity(f, &out)?);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        engine: setup.engine,
        input_mode: q_in,
        output_mode: q_out,
        leak: fock_in.map(|f| f.leak()),
        rows,
    })
}

fn clamp_unit(z: C64) -> C64 {
    let n = z.norm();
    if n > 1.0 {
        z / n
    } else {
        z
    }
}

/// Machine-readable verdict of `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub worst_deviation: f64,
    pub t_opt: f64,
    pub phase: f64,
}

impl Verdict {
    /// Copy with every number rounded to 15 significant digits.
    pub fn rounded(&self) -> Self {
        Self {
            pass: self.pass,
            worst_deviation: round_sig(self.worst_deviation, 15),
            t_opt: round_sig(self.t_opt, 15),
            phase: round_sig(self.phase, 15),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.rounded()).expect("verdict serializes")
    }
}

/// Mirror transfer check at `t_opt` (period index `n`).
pub fn verify_pst(
    dims: Dims,
    coupling: f64,
    profile: ProfileKind,
    n: u32,
    tol: f64,
) -> Result<Verdict> {
    let (_, _, m) = lattice_matrix(dims, coupling, profile)?;
    let t_opt = optimal_time(dims, coupling, n)?;
    let a = Propagator::new(&m)?.at(t_opt)?;
    let v = pst_check(&a, &mirror_pairs(dims), tol)?;
    Ok(Verdict {
        pass: v.pass,
        worst_deviation: v.worst_deviation,
        t_opt,
        phase: correction_phase(dims)?.phi(),
    })
}

/// SWAP of one Gaussian input per site; see [`crate::gaussian::swap_verify`].
pub fn verify_swap(dims: Dims, coupling: f64, inputs: &[InputState], tol: f64) -> Result<Verdict> {
    let states: Vec<GaussianState> = inputs.iter().map(|s| s.gaussian()).collect::<Result<_>>()?;
    let v = crate::gaussian::swap_verify(dims, &states, coupling, tol)?;
    Ok(Verdict {
        pass: v.pass,
        worst_deviation: v.worst_deviation,
        t_opt: v.t_opt,
        phase: v.phase,
    })
}
