//! Waveguide separations realizing a coupling profile.
//!
//! In the weak-coupling regime the coupling between neighbouring guides
//! decays as `J_j = gamma * exp(-eta * kappa_j)`, so the separation is
//! `kappa_j = ln(gamma / J_j) / eta`.

use serde::Serialize;

use crate::error::{PstError, Result};
use crate::io::CsvTable;
use crate::lattice::CouplingProfile;

/// One gap of the device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gap {
    pub axis: usize,
    /// 1-based position along the axis.
    pub gap_index: usize,
    pub coupling: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FabricationPlan {
    gamma: f64,
    eta: f64,
    gaps: Vec<Gap>,
}

/// Separations for every gap of `profile`. Requires `gamma > J_j` for all
/// gaps and `eta > 0`.
pub fn separations(profile: &CouplingProfile, gamma: f64, eta: f64) -> Result<FabricationPlan> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(PstError::InvalidParameter(format!(
            "gamma must be finite and > 0, got {gamma}"
        )));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(PstError::InvalidParameter(format!(
            "eta must be finite and > 0, got {eta}"
        )));
    }
    let mut gaps = Vec::new();
    for axis in 0..3 {
        for (k, &j) in profile.axis(axis).iter().enumerate() {
            if j <= 0.0 {
                return Err(PstError::InvalidParameter(format!(
                    "axis {axis} gap {} has coupling {j}; a separation needs J > 0",
                    k + 1
                )));
            }
            if gamma <= j {
                return Err(PstError::WeakCouplingViolation {
                    axis,
                    gap: k + 1,
                    coupling: j,
                    gamma,
                });
            }
            gaps.push(Gap {
                axis,
                gap_index: k + 1,
                coupling: j,
                kappa: (gamma / j).ln() / eta,
            });
        }
    }
    Ok(FabricationPlan { gamma, eta, gaps })
}

impl FabricationPlan {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    /// Separations of one axis in gap order.
    pub fn kappas(&self, axis: usize) -> Vec<f64> {
        self.gaps
            .iter()
            .filter(|g| g.axis == axis)
            .map(|g| g.kappa)
            .collect()
    }

    /// `J_j = gamma * exp(-eta * kappa_j)`.
    pub fn recovered_couplings(&self) -> Vec<f64> {
        self.gaps
            .iter()
            .map(|g| self.gamma * (-self.eta * g.kappa).exp())
            .collect()
    }

    /// CSV with header `axis,gap_index,J,kappa`; axes are named `L`, `B`, `H`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["axis", "gap_index", "J", "kappa"]);
        for g in &self.gaps {
            t.push_row(vec![
                ["L", "B", "H"][g.axis].to_string(),
                g.gap_index.to_string(),
                crate::io::fmt_sig(g.coupling, 12),
                crate::io::fmt_sig(g.kappa, 12),
            ]);
        }
        t
    }
}
