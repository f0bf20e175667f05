use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;

use crate::evolution::{
    closed_form_mirror_coefficient, evolve_operator, minus_i_pow, optimal_time, Propagator,
};
use crate::fabrication::separations;
use crate::fock::{
    fock_uhlmann_fidelity, full_evolution_oracle, loss_channel_output, StateKind,
    DEFAULT_SECTOR_CAP,
};
use crate::gaussian::{
    analytic_boundary_moments, apply_symplectic, cross_covariance_block, log_negativity,
    reduce_to_modes, symplectic_from_evolution, uhlmann_fidelity_gaussian, GaussianState,
    SingleModeParams,
};
use crate::lattice::{design_couplings_1d, design_couplings_nd, Dims, LatticeSpec};
use crate::scan::{lattice_matrix, ProfileKind};
use crate::C64;

fn dims_strategy() -> impl Strategy<Value = Dims> {
    prop_oneof![
        (2usize..=8).prop_map(|n| Dims::linear(n).unwrap()),
        (2usize..=4, 2usize..=4).prop_map(|(l, b)| Dims::new(l, b, 1).unwrap()),
        (1usize..=3, 2usize..=3, 2usize..=3).prop_map(|(l, b, h)| Dims::new(l, b, h).unwrap()),
    ]
}

fn params_strategy() -> impl Strategy<Value = SingleModeParams> {
    (
        -2.0..2.0f64,
        -2.0..2.0f64,
        0.0..1.0f64,
        0.0..PI,
        0.0..1.0f64,
    )
        .prop_map(|(ax, ay, r, theta, nbar)| {
            let xi = squeezed_thermal(r, theta, nbar);
            SingleModeParams {
                alpha_x: ax,
                alpha_y: ay,
                a: 2.0 * xi[(0, 0)],
                b: 2.0 * xi[(0, 1)],
                c: 2.0 * xi[(1, 1)],
            }
        })
}

fn squeezed_thermal(r: f64, theta: f64, nbar: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    let rot = Matrix2::new(c, -s, s, c);
    let diag = Matrix2::new((2.0 * r).exp(), 0.0, 0.0, (-2.0 * r).exp()) * (0.5 + nbar);
    let xi = rot * diag * rot.transpose();
    (xi + xi.transpose()) * 0.5
}

fn state_strategy() -> impl Strategy<Value = GaussianState> {
    params_strategy().prop_map(|p| p.state().unwrap())
}

fn kind_strategy() -> impl Strategy<Value = StateKind> {
    prop_oneof![
        (0usize..=3).prop_map(StateKind::Number),
        (-0.6..0.6f64, -0.6..0.6f64).prop_map(|(x, y)| StateKind::Coherent(C64::new(x, y))),
        (0.0..0.5f64).prop_map(StateKind::Squeezed),
        (0.2..0.8f64, -0.4..0.4f64).prop_map(|(x, y)| StateKind::Cat(C64::new(x, y))),
        (0.0..0.4f64).prop_map(StateKind::Thermal),
    ]
}

fn embed(input: &GaussianState, modes: usize, site: usize) -> GaussianState {
    let parts: Vec<GaussianState> = (0..modes)
        .map(|k| {
            if k == site {
                input.clone()
            } else {
                GaussianState::vacuum(1)
            }
        })
        .collect();
    GaussianState::product(&parts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evolution_is_unitary_and_mirror_symmetric(dims in dims_strategy(), jt in 0.0..4.0 * PI) {
        let (_, _, m) = lattice_matrix(dims, 1.0, ProfileKind::Designed).unwrap();
        let a = evolve_operator(&m, jt).unwrap();
        prop_assert!(a.unitarity_defect() < 1e-10);
        prop_assert!(a.mirror_defect() < 1e-10);
    }

    #[test]
    fn symplectic_preserves_form(dims in dims_strategy(), jt in 0.0..4.0 * PI) {
        let (_, _, m) = lattice_matrix(dims, 1.0, ProfileKind::Designed).unwrap();
        let s = symplectic_from_evolution(&evolve_operator(&m, jt).unwrap()).unwrap();
        prop_assert!(s.symplectic_defect() < 1e-10);
    }

    #[test]
    fn purity_and_photon_number_conserved(
        dims in dims_strategy(),
        input in state_strategy(),
        jt in 0.0..4.0 * PI,
    ) {
        let (_, _, m) = lattice_matrix(dims, 1.0, ProfileKind::Designed).unwrap();
        let s = symplectic_from_evolution(&evolve_operator(&m, jt).unwrap()).unwrap();
        let before = embed(&input, dims.total(), 0);
        let after = apply_symplectic(&before, &s).unwrap();
        let (d0, d1) = (before.covariance_determinant(), after.covariance_determinant());
        prop_assert!((d0 - d1).abs() <= 1e-10 * d0.abs().max(1.0), "{d0} vs {d1}");
        prop_assert!((before.mean_photon_number() - after.mean_photon_number()).abs() < 1e-9);
    }

    #[test]
    fn fidelity_bounded_and_symmetric(s1 in state_strategy(), s2 in state_strategy()) {
        let f12 = uhlmann_fidelity_gaussian(&s1, &s2).unwrap();
        let f21 = uhlmann_fidelity_gaussian(&s2, &s1).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f12));
        prop_assert!((f12 - f21).abs() < 1e-12);
        prop_assert!((uhlmann_fidelity_gaussian(&s1, &s1).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn boundary_modes_separable_at_transfer_time(n in 2usize..=8, p in params_strategy(), period in 0u32..3) {
        let dims = Dims::linear(n).unwrap();
        let (_, _, m) = lattice_matrix(dims, 1.0, ProfileKind::Designed).unwrap();
        let a = evolve_operator(&m, optimal_time(dims, 1.0, period).unwrap()).unwrap();
        let out = apply_symplectic(&embed(&p.state().unwrap(), n, 0), &symplectic_from_evolution(&a).unwrap()).unwrap();
        let pair = reduce_to_modes(&out, &[0, n - 1]).unwrap();
        prop_assert!(log_negativity(&pair).unwrap() < 1e-9);
        prop_assert!(pair.block(0, 1).amax() < 1e-9);
    }

    #[test]
    fn boundary_moments_match_full_evolution(n in 2usize..=8, p in params_strategy(), jt in 0.0..4.0 * PI) {
        let (_, _, m) = lattice_matrix(Dims::linear(n).unwrap(), 1.0, ProfileKind::Designed).unwrap();
        let a = evolve_operator(&m, jt).unwrap();
        let out = apply_symplectic(&embed(&p.state().unwrap(), n, 0), &symplectic_from_evolution(&a).unwrap()).unwrap();
        let bm = analytic_boundary_moments(&p, n, jt).unwrap();
        prop_assert!((out.mode_displacement(0) - bm.d_first).amax() < 1e-9);
        prop_assert!((out.mode_displacement(n - 1) - bm.d_last).amax() < 1e-9);
        prop_assert!((out.block(0, 0) - bm.xi_first).amax() < 1e-9);
        prop_assert!((out.block(n - 1, n - 1) - bm.xi_last).amax() < 1e-9);
        prop_assert!((out.block(0, n - 1) - cross_covariance_block(&p, n, jt).unwrap()).amax() < 1e-9);
    }

    #[test]
    fn closed_forms_match_propagator(n in 2usize..=14, j in 1usize..=3, jt in 0.0..4.0 * PI) {
        prop_assume!(n + 1 >= 2 * j);
        let (_, _, m) = lattice_matrix(Dims::linear(n).unwrap(), 1.0, ProfileKind::Designed).unwrap();
        let numeric = Propagator::new(&m).unwrap().at(jt).unwrap().entry(j - 1, n - j);
        let closed = closed_form_mirror_coefficient(j, n, jt).unwrap();
        prop_assert!((closed - numeric).norm() < 1e-9);
        prop_assert!((closed * minus_i_pow(n - 1).conj()).im.abs() < 1e-12);
    }

    #[test]
    fn fabrication_round_trip(
        dims in dims_strategy(),
        coupling in 0.1..5.0f64,
        headroom in 1.01..20.0f64,
        eta in 0.1..5.0f64,
    ) {
        let profile = design_couplings_nd(&LatticeSpec::new(dims, coupling).unwrap()).unwrap();
        let plan = separations(&profile, profile.max_coupling() * headroom, eta).unwrap();
        for (g, j) in plan.gaps().iter().zip(plan.recovered_couplings()) {
            prop_assert!((g.coupling - j).abs() <= 1e-12 * g.coupling.max(1.0));
            prop_assert!(g.kappa >= 0.0);
        }
        for axis in 0..3 {
            let k = plan.kappas(axis);
            for (a, b) in k.iter().zip(k.iter().rev()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_dimensional_plan_inverts_couplings(n in 2usize..=40, coupling in 0.1..5.0f64, eta in 0.1..5.0f64) {
        let profile = design_couplings_1d(n, coupling).unwrap();
        let plan = separations(&profile, profile.max_coupling() * 2.0, eta).unwrap();
        prop_assert_eq!(plan.gaps().len(), n - 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn loss_channel_matches_multimode_evolution(
        n in 2usize..=4,
        kind in kind_strategy(),
        cutoff in 3usize..=4,
        jt in 0.0..4.0 * PI,
    ) {
        let input = kind.build(Some(cutoff), 1.0).unwrap();
        let (_, _, m) = lattice_matrix(Dims::linear(n).unwrap(), 1.0, ProfileKind::Designed).unwrap();
        let a = evolve_operator(&m, jt).unwrap();
        let full = full_evolution_oracle(&input, &m, 0, jt, DEFAULT_SECTOR_CAP).unwrap();
        prop_assert!((full.trace() - input.trace()).abs() < 1e-10);
        for k in 0..n {
            let channel = loss_channel_output(&input, a.entry(0, k)).unwrap();
            prop_assert!((channel.matrix() - full.reduce_mode(k).unwrap().matrix()).camax() < 1e-8);
        }
    }

    #[test]
    fn channel_never_grows_trace_or_photons(kind in kind_strategy(), mag in 0.0..1.0f64, arg in 0.0..2.0 * PI) {
        let input = kind.build(Some(12), 1.0).unwrap();
        let out = loss_channel_output(&input, C64::from_polar(mag, arg)).unwrap();
        prop_assert!(out.trace() <= input.trace() + 1e-12);
        prop_assert!(out.trace() <= 1.0 + 1e-12);
        prop_assert!(out.mean_photon_number() <= input.mean_photon_number() + 1e-12);
        prop_assert!(out.min_eigenvalue() > -1e-12);
        let f = fock_uhlmann_fidelity(&input, &out).unwrap();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&f));
    }
}

#[test]
fn squeezed_thermal_is_physical() {
    let xi = squeezed_thermal(0.7, 1.1, 0.3);
    let s = GaussianState::single_mode(Vector2::zeros(), xi).unwrap();
    assert!((s.covariance_determinant() - 0.64).abs() < 1e-12);
}
