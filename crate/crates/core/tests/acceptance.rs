//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails.
//!
//! Run with `cargo test -p waveguide-pst --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use waveguide_pst::evolution::{
    closed_form_mirror_coefficient, correction_phase, evolve_operator, factorized_coefficient,
    minus_i_pow, mirror_pairs, optimal_time, pst_check, Propagator,
};
use waveguide_pst::fabrication::separations;
use waveguide_pst::fock::{
    fock_transfer, fock_uhlmann_fidelity, full_evolution_oracle, loss_channel_output, StateKind,
    DEFAULT_SECTOR_CAP,
};
use waveguide_pst::gaussian::{
    fidelity_formula_audit, swap_verify, GaussianState, SingleModeParams,
};
use waveguide_pst::lattice::{
    design_couplings_1d, mirror_site, mode_index, site_of, CouplingProfile, Dims,
};
use waveguide_pst::scan::{lattice_matrix, run_scan, InputState, ProfileKind, ScanSetup, TimeGrid};
use waveguide_pst::{Result, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

type Criterion = fn() -> Result<Outcome>;

fn within_budget(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for n in 2..=12 {
        let dims = Dims::linear(n)?;
        let (_, _, m) = lattice_matrix(dims, 1.0, ProfileKind::Designed)?;
        let a = evolve_operator(&m, optimal_time(dims, 1.0, 0)?)?;
        let v = pst_check(&a, &mirror_pairs(dims), 1e-9)?;
        worst = worst.max(v.worst_deviation);
        if !v.pass {
            failures.push(n);
        }
    }
    let elapsed = start.elapsed();
    let fast = within_budget(elapsed, 5.0);
    outcome(
        failures.is_empty() && fast,
        format!(
            "designed chains N=2..12 at t_opt: worst deviation {worst:.2e} (tol 1e-9), failing N {failures:?}, {:.3} s (limit 5 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let step = PI / 200.0;
    let setup = ScanSetup::new(
        Dims::linear(5)?,
        InputState::Gaussian(SingleModeParams::figure_input()),
        TimeGrid::new(0.0, 3.5 * PI, step)?,
    );
    let scan = run_scan(&setup)?;
    let elapsed = start.elapsed();
    let at = |jt: f64| {
        scan.rows
            .iter()
            .min_by(|a, b| (a.jt - jt).abs().total_cmp(&(b.jt - jt).abs()))
            .expect("non-empty grid")
    };
    let f = |jt: f64| at(jt).fidelity.unwrap_or(f64::NAN);
    let e = |jt: f64| at(jt).log_negativity.unwrap_or(f64::NAN);

    let f_pi = f(PI);
    let f_3pi = f(3.0 * PI);
    let f_half = f(PI / 2.0);
    let e_pi = e(PI);
    let e_max = scan
        .rows
        .iter()
        .filter_map(|r| r.log_negativity)
        .fold(f64::NEG_INFINITY, f64::max);
    let jt_peak = scan
        .rows
        .iter()
        .find(|r| r.log_negativity.is_some_and(|x| x >= e_max - 1e-12))
        .map(|r| r.jt)
        .unwrap_or(f64::NAN);

    let ok_pi = (f_pi - 1.0).abs() <= 1e-9;
    let ok_3pi = (f_3pi - 1.0).abs() <= 1e-9;
    let ok_half = (f_half - 0.5).abs() <= 0.02;
    let ok_e_pi = e_pi.abs() <= 1e-9;
    let ok_peak = (jt_peak - PI / 2.0).abs() <= step + 1e-12;
    let fast = within_budget(elapsed, 2.0);
    let mark = |b: bool| if b { "ok" } else { "FAIL" };
    outcome(
        ok_pi && ok_3pi && ok_half && ok_e_pi && ok_peak && fast,
        format!(
            "N=5 scan over [0, 3.5pi]: F(pi)={f_pi:.12} [{}], F(3pi)={f_3pi:.12} [{}], F(pi/2)={f_half:.6} vs 0.5+-0.02 [{}], \
             E(pi)={e_pi:.2e} [{}], argmax E at Jt={:.6}pi (E={e_max:.6}) [{}], {:.3} s (limit 2 s) [{}]",
            mark(ok_pi),
            mark(ok_3pi),
            mark(ok_half),
            mark(ok_e_pi),
            jt_peak / PI,
            mark(ok_peak),
            elapsed.as_secs_f64(),
            mark(fast),
        ),
    )
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn printed_form(j: usize, n: usize, jt: f64) -> Option<C64> {
    let x = jt / ((n - 1) as f64).sqrt();
    let (s, c) = x.sin_cos();
    let c2 = c * c;
    let nf = n as f64;
    let value = match j {
        2 if n >= 3 => s.powi(n as i32 - 3) * (4.0 - 2.0 * (nf - 1.0) * c2) / 4.0,
        3 if n >= 5 => {
            let sum: f64 = (1..=2)
                .map(|r| {
                    (-2.0f64).powi(r as i32) * c2.powi(r as i32) * (binom(n - 2, r) + nf - 2.0)
                })
                .sum();
            s.powi(n as i32 - 5) * (8.0 + sum) / 8.0
        }
        _ => return None,
    };
    Some(minus_i_pow(n - 1) * value)
}

fn criterion_3() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut worst: f64 = 0.0;
    let mut printed_worst = [0.0f64; 2];
    let mut samples = 0usize;
    for n in 2..=12usize {
        let (_, _, m) = lattice_matrix(Dims::linear(n)?, 1.0, ProfileKind::Designed)?;
        let prop = Propagator::new(&m)?;
        for _ in 0..200 {
            let jt = rng.gen_range(0.0..4.0 * PI);
            let a = prop.at(jt)?;
            for j in 1..=3usize {
                if n + 1 < 2 * j {
                    continue;
                }
                let numeric = a.entry(j - 1, n - j);
                worst = worst.max((closed_form_mirror_coefficient(j, n, jt)? - numeric).norm());
                if let Some(p) = printed_form(j, n, jt) {
                    printed_worst[j - 2] = printed_worst[j - 2].max((p - numeric).norm());
                }
                samples += 1;
            }
        }
    }
    outcome(
        worst < 1e-8,
        format!(
            "closed forms j=1..3, N=2..12, {samples} samples with Jt in [0, 4pi]: max error {worst:.2e} (tol 1e-8); \
             diagnostic: as-printed j=2 form deviates by up to {:.3}, j=3 form by up to {:.3}",
            printed_worst[0], printed_worst[1]
        ),
    )
}

fn criterion_4() -> Result<Outcome> {
    let mut lattices = Vec::new();
    for n in 2..=20 {
        lattices.push(Dims::linear(n)?);
    }
    for l in 2..=6 {
        for b in 2..=6 {
            lattices.push(Dims::new(l, b, 1)?);
            lattices.push(Dims::new(1, b, l)?);
        }
    }
    for l in 2..=4 {
        for b in 2..=4 {
            for h in 2..=4 {
                lattices.push(Dims::new(l, b, h)?);
            }
        }
    }
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for dims in &lattices {
        let d = dims.phase_exponent();
        let k = correction_phase(*dims)?.quarter_turns() as usize;
        let exact = minus_i_pow(d) * minus_i_pow((4 - k % 4) % 4);
        if !(3 * d + k).is_multiple_of(4) || exact != C64::new(1.0, 0.0) {
            bad.push(dims.0);
        }
        if dims.total() <= 64 {
            let (_, _, m) = lattice_matrix(*dims, 1.0, ProfileKind::Designed)?;
            let a = evolve_operator(&m, optimal_time(*dims, 1.0, 0)?)?;
            let q = mode_index([1, 1, 1], *dims)?;
            let p = mode_index(mirror_site([1, 1, 1], *dims), *dims)?;
            let corrected = a.entry(q, p) * correction_phase(*dims)?.unit();
            worst = worst.max((corrected - C64::new(1.0, 0.0)).norm());
        }
    }
    outcome(
        bad.is_empty() && worst < 1e-9,
        format!(
            "{} lattices (1D N<=20, 2D sides<=6, 3D sides<=4): exact closure failures {bad:?}; corrected corner amplitude off 1 by at most {worst:.2e}",
            lattices.len()
        ),
    )
}

fn criterion_5() -> Result<Outcome> {
    let start = Instant::now();
    let mut lattices = Vec::new();
    for l in 2..=4 {
        for b in 2..=4 {
            lattices.push(Dims::new(l, b, 1)?);
            lattices.push(Dims::new(1, b, l)?);
        }
    }
    for l in 2..=3 {
        for b in 2..=3 {
            lattices.push(Dims::new(l, b, 2)?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut worst: f64 = 0.0;
    let mut comparisons = 0usize;
    for dims in &lattices {
        let (_, _, m) = lattice_matrix(*dims, 1.0, ProfileKind::Designed)?;
        let prop = Propagator::new(&m)?;
        let mut times: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..4.0 * PI)).collect();
        times.push(optimal_time(*dims, 1.0, 0)?);
        for jt in times {
            let a = prop.at(jt)?;
            for (q, p) in mirror_pairs(*dims) {
                let f = factorized_coefficient(*dims, site_of(q, *dims)?, site_of(p, *dims)?, jt)?;
                worst = worst.max((f - a.entry(q, p)).norm());
                comparisons += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let fast = within_budget(elapsed, 10.0);
    outcome(
        worst < 1e-8 && fast,
        format!(
            "{} lattices up to 4x4 and 3x3x2, {comparisons} mirror amplitudes: max |product - exponential| {worst:.2e} (tol 1e-8), {:.3} s (limit 10 s)",
            lattices.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn channel_kinds() -> Vec<StateKind> {
    vec![
        StateKind::Number(2),
        StateKind::Coherent(C64::new(0.5, 0.3)),
        StateKind::Squeezed(0.3),
        StateKind::Cat(C64::new(0.6, 0.0)),
        StateKind::Thermal(0.2),
    ]
}

fn criterion_6() -> Result<Outcome> {
    let start = Instant::now();
    let mut cases = Vec::new();
    for n in 2..=4usize {
        for kind in channel_kinds() {
            for jt in [0.37, 1.1, 2.45, 4.0] {
                cases.push((n, kind, jt));
            }
        }
    }
    let errors = cases
        .par_iter()
        .map(|&(n, kind, jt)| -> Result<f64> {
            let input = kind.build(Some(4), 1.0)?;
            let (_, _, m) = lattice_matrix(Dims::linear(n)?, 1.0, ProfileKind::Designed)?;
            let a = evolve_operator(&m, jt)?;
            let full = full_evolution_oracle(&input, &m, 0, jt, DEFAULT_SECTOR_CAP)?;
            let mut worst: f64 = 0.0;
            for k in 0..n {
                let channel = loss_channel_output(&input, a.entry(0, k))?;
                let reduced = full.reduce_mode(k)?;
                worst = worst.max((channel.matrix() - reduced.matrix()).camax());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let fast = within_budget(elapsed, 60.0);
    outcome(
        worst < 1e-8 && fast,
        format!(
            "{} cases (N=2..4, 5 state kinds, 4 times, cutoff 4, every output mode): max entry error {worst:.2e} (tol 1e-8), {:.3} s (limit 60 s)",
            cases.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Result<Outcome> {
    let kinds = [
        StateKind::Cat(C64::new(1.0, 0.0)),
        StateKind::Cat(C64::new(0.7, 0.7)),
        StateKind::Squeezed(0.5),
        StateKind::Squeezed(0.9),
    ];
    let mut worst_loss: f64 = 0.0;
    let mut max_leak: f64 = 0.0;
    let mut max_cutoff = 0usize;
    for kind in kinds {
        let input = kind.build(None, 1e-8)?;
        max_leak = max_leak.max(input.leak());
        max_cutoff = max_cutoff.max(input.cutoff());
        for n in 2..=5 {
            let dims = Dims::linear(n)?;
            let (_, _, m) = lattice_matrix(dims, 1.0, ProfileKind::Designed)?;
            let a = evolve_operator(&m, optimal_time(dims, 1.0, 0)?)?;
            let out = fock_transfer(&input, a.entry(0, n - 1), correction_phase(dims)?)?;
            worst_loss = worst_loss.max(1.0 - fock_uhlmann_fidelity(&input, &out)?);
        }
    }
    outcome(
        worst_loss <= 1e-6 && max_leak < 1e-8,
        format!(
            "cat and squeezed inputs on N=2..5 at t_opt: min fidelity 1-{worst_loss:.2e} (need >= 1-1e-6), truncation leak <= {max_leak:.2e} at cutoff <= {max_cutoff}"
        ),
    )
}

fn distinct_state(k: usize) -> Result<GaussianState> {
    let kf = k as f64;
    let r = 0.1 + 0.15 * kf;
    let theta = 0.4 * kf;
    let nbar = 0.05 * kf;
    let (s, c) = theta.sin_cos();
    let rot = nalgebra::Matrix2::new(c, -s, s, c);
    let diag = nalgebra::Matrix2::new((2.0 * r).exp(), 0.0, 0.0, (-2.0 * r).exp()) * (0.5 + nbar);
    let xi = rot * diag * rot.transpose();
    let d = nalgebra::Vector2::new(0.3 * kf - 0.5, 0.2 + 0.1 * kf * kf);
    GaussianState::single_mode(d, xi)
}

fn criterion_8() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for n in 2..=5 {
        let inputs = (0..n).map(distinct_state).collect::<Result<Vec<_>>>()?;
        let v = swap_verify(Dims::linear(n)?, &inputs, 1.0, 1e-9)?;
        worst = worst.max(v.worst_deviation);
        if !v.pass {
            failures.push(n);
        }
    }
    outcome(
        failures.is_empty() && worst < 1e-9,
        format!("mirror SWAP of distinct Gaussian products, N=2..5: worst moment deviation {worst:.2e} (tol 1e-9), failing N {failures:?}"),
    )
}

fn criterion_9() -> Result<Outcome> {
    let dims = Dims::linear(5)?;
    let (_, _, m) = lattice_matrix(dims, 1.0, ProfileKind::Uniform)?;
    let prop = Propagator::new(&m)?;
    let pairs = mirror_pairs(dims);
    let steps = 20_000usize;
    let results = (0..=steps)
        .into_par_iter()
        .map(|i| -> Result<(bool, f64, f64)> {
            let jt = PI * 1e-3 * i as f64;
            let v = pst_check(&prop.at(jt)?, &pairs, 1e-3)?;
            Ok((v.pass, v.worst_deviation, jt))
        })
        .collect::<Result<Vec<_>>>()?;
    let passes = results.iter().filter(|r| r.0).count();
    let (_, closest, jt_closest) = results
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    outcome(
        passes == 0,
        format!(
            "uniform N=5 over Jt in [0, 20pi] step 1e-3 pi ({} points): {passes} passing points at tol 1e-3; closest approach {closest:.4} at Jt={:.3}pi",
            results.len(),
            jt_closest / PI
        ),
    )
}

fn criterion_10() -> Result<Outcome> {
    let grid = TimeGrid::new(0.0, 3.5 * PI, PI / 200.0)?;
    let audit = fidelity_formula_audit(&SingleModeParams::figure_input(), 5, &grid.points(), 1e-6)?;
    let dir =
        tempfile::tempdir().map_err(|e| waveguide_pst::PstError::InvalidInput(e.to_string()))?;
    let path = dir.path().join("audit.csv");
    std::fs::write(&path, audit.to_csv().to_csv_string())
        .map_err(|e| waveguide_pst::PstError::InvalidInput(e.to_string()))?;
    let written = std::fs::read_to_string(&path)
        .map(|s| s.lines().count())
        .unwrap_or(0);
    let produced = audit.total_points == grid.points().len() && written == audit.total_points + 1;
    let verdict = if audit.agrees {
        "agreement"
    } else {
        "discrepancy"
    };
    let max_diff = audit
        .max_abs_difference
        .map_or("n/a".to_string(), |d| format!("{d:.3e}"));
    outcome(
        produced,
        format!(
            "printed fidelity formula vs Uhlmann fidelity on {} points: {verdict} recorded ({} evaluable, max |diff| {max_diff}, tol {:.0e})",
            audit.total_points, audit.evaluable_points, audit.tolerance
        ),
    )
}

fn criterion_11() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0011);
    let mut worst: f64 = 0.0;
    let mut asymmetric = 0usize;
    let trials = 200;
    for trial in 0..trials {
        let profile = if trial % 2 == 0 {
            let n = rng.gen_range(2..=16);
            let half: Vec<f64> = (0..(n - 1) / 2).map(|_| rng.gen_range(0.05..3.0)).collect();
            let mut gaps: Vec<f64> = half.clone();
            if (n - 1) % 2 == 1 {
                gaps.push(rng.gen_range(0.05..3.0));
            }
            gaps.extend(half.iter().rev());
            CouplingProfile::new([vec![], gaps, vec![]])?
        } else {
            design_couplings_1d(rng.gen_range(2..=30), rng.gen_range(0.1..5.0))?
        };
        let gamma = profile.max_coupling() * rng.gen_range(1.01..20.0);
        let eta = rng.gen_range(0.1..5.0);
        let plan = separations(&profile, gamma, eta)?;
        for (g, j) in plan.gaps().iter().zip(plan.recovered_couplings()) {
            worst = worst.max((g.coupling - j).abs());
        }
        let k = plan.kappas(1);
        if k.iter()
            .zip(k.iter().rev())
            .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            asymmetric += 1;
        }
    }
    outcome(
        worst <= 1e-12 && asymmetric == 0,
        format!("{trials} random profiles: max |gamma exp(-eta kappa) - J| {worst:.2e} (tol 1e-12), {asymmetric} plans with asymmetric separations"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 11] = [
        ("PST universality", criterion_1),
        ("figure scan", criterion_2),
        ("closed-form coefficients", criterion_3),
        ("phase closure", criterion_4),
        ("factorization", criterion_5),
        ("engine cross-check", criterion_6),
        ("non-Gaussian transfer", criterion_7),
        ("mirror SWAP", criterion_8),
        ("uniform chain control", criterion_9),
        ("fidelity formula audit", criterion_10),
        ("fabrication round trip", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {detail} [{:.2} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
