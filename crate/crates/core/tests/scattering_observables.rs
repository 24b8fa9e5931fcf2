mod common;

use abraham_core::dynamics::{simulate, SystemState, Trajectory, TrajectorySample};
use abraham_core::field::{enforce_hermitian, free_propagate, SpectralFieldPair};
use abraham_core::grid::KGrid;
use abraham_core::matter::{ir_limit_parts, ChargeModel, FOURIER_NORM};
use abraham_core::observables::{ir_extract, soft_photon_residual, IrSettings, IrTail};
use abraham_core::pulse::{make_pulse, PulseParams};
use abraham_core::scattering::{deviation, scattered_field, source_term, Direction, ScatterResult};
use abraham_core::vector::{complexify, max_abs_diff, norm_sqr, rcross, rdot, Complex3, Real3, I};
use num_complex::Complex64;
use proptest::prelude::*;

fn model(e: f64) -> ChargeModel {
    ChargeModel::new(e, 1.0, 1.0).unwrap()
}

fn pulse_radiation(grid: &KGrid) -> SpectralFieldPair {
    let p = PulseParams {
        k0: 4.5,
        width: 0.75,
        amplitude: 30.0,
        polarization: [1.0, 0.0, 0.0],
        direction: [0.0, 0.0, 1.0],
        center: [0.0, 0.0, -8.0],
    };
    enforce_hermitian(&make_pulse(grid, &p).unwrap(), grid)
}

#[test]
fn uncoupled_radiation_scatters_trivially() {
    let grid = common::reference_like_grid();
    let model = model(0.0);
    let state = SystemState::soliton(&grid, &model, Real3::zeros(), Real3::zeros())
        .unwrap()
        .with_radiation(&pulse_radiation(&grid))
        .unwrap();
    let run = simulate(&state, &grid, &model, 8.0, 0.02, 50).unwrap();
    assert!(run.trajectory.max_acceleration() == 0.0);
    let z0 = deviation(&run.snapshots[0], &model, &grid).unwrap();
    let sc = scattered_field(&run.trajectory, &z0, &model, &grid, Direction::Future)
        .unwrap()
        .with_convergence(&run.snapshots, &model, &grid)
        .unwrap();
    let peak = state.fields.e_hat.iter().map(|z| norm_sqr(z).sqrt()).fold(0.0, f64::max);
    for snap in &run.snapshots {
        let free = free_propagate(&state.fields, &grid, snap.t).unwrap();
        for n in 0..grid.n_nodes() {
            assert!(max_abs_diff(&snap.fields.e_hat[n], &free.e_hat[n]) < 1e-13 * peak, "t = {}", snap.t);
            assert!(max_abs_diff(&snap.fields.b_hat[n], &free.b_hat[n]) < 1e-13 * peak, "t = {}", snap.t);
        }
    }
    assert_eq!(sc.z_sc, z0);
    assert_eq!(sc.tail_bound, 0.0);
    let norm = z0.l2_norm(&grid);
    assert!(sc.convergence_series.len() >= 4);
    for (t, d) in &sc.convergence_series {
        assert!(*d < 1e-12 * norm, "t = {t}: {d}");
    }
}

#[test]
fn source_term_is_the_velocity_derivative_of_the_soliton() {
    let grid = common::small_grid();
    let model = model(0.3);
    let h = 1e-5;
    for (q, v, a) in [
        (Real3::zeros(), Real3::zeros(), Real3::new(0.7, 0.0, 0.0)),
        (Real3::new(0.4, -1.0, 2.0), Real3::new(0.1, 0.3, -0.2), Real3::new(-0.2, 0.5, 0.1)),
    ] {
        let sample = TrajectorySample {
            t: 0.0,
            q: q.into(),
            v: v.into(),
            v_dot: a.into(),
        };
        let g = source_term(&sample, &model, &grid).unwrap();
        let plus = model.soliton(v + a * h).unwrap();
        let minus = model.soliton(v - a * h).unwrap();
        for n in (0..grid.n_nodes()).step_by(5) {
            let k = grid.k_vec(n);
            let (ep, bp) = plus.momentum(&k).unwrap();
            let (em, bm) = minus.momentum(&k).unwrap();
            let phase = Complex64::from_polar(1.0 / (2.0 * h), -k.dot(&q));
            let fd_e = (ep - em) * phase;
            let fd_b = (bp - bm) * phase;
            let scale = norm_sqr(&fd_e).sqrt().max(norm_sqr(&fd_b).sqrt()).max(1e-12);
            assert!(max_abs_diff(&g.e_hat[n], &fd_e) < 1e-7 * scale, "node {n}");
            assert!(max_abs_diff(&g.b_hat[n], &fd_b) < 1e-7 * scale, "node {n}");
            // Gauss law does not see v
            assert!(rdot(&k, &g.e_hat[n]).norm() < 1e-14 * scale.max(1.0));
        }
    }
}

/// Free evolution of a transverse pair: `E(t) = cos(κt)E + i sin(κt) k̂×B`,
/// `B(t) = cos(κt)B − i sin(κt) k̂×E`.
fn rotate(k: &Real3, t: f64, e: &Complex3, b: &Complex3) -> (Complex3, Complex3) {
    let kappa = k.norm();
    let k_hat = k / kappa;
    let (s, c) = (kappa * t).sin_cos();
    let c = Complex64::from(c);
    let is = I * s;
    (e * c + rcross(&k_hat, b) * is, b * c - rcross(&k_hat, e) * is)
}

/// Uniformly accelerated particle, `v(t) = a t`.
fn accelerated(a: Real3, t_end: f64, h: f64) -> Trajectory {
    let n = (t_end.abs() / h).round() as usize;
    let sign = t_end.signum();
    let mut samples: Vec<TrajectorySample> = (0..=n)
        .map(|i| {
            let t = sign * i as f64 * h;
            TrajectorySample {
                t,
                q: (a * (0.5 * t * t)).into(),
                v: (a * t).into(),
                v_dot: a.into(),
            }
        })
        .collect();
    samples.sort_by(|x, y| x.t.total_cmp(&y.t));
    Trajectory { samples, spacing: h }
}

#[test]
fn scattered_field_matches_direct_time_integration() {
    let grid = common::small_grid();
    let model = model(0.3);
    let a = Real3::new(0.01, 0.0, 0.005);
    let z0 = enforce_hermitian(&common::random_field(&grid, 11), &grid).transverse_part(&grid);
    for (direction, t_end) in [(Direction::Future, 4.0), (Direction::Past, -4.0)] {
        let traj = accelerated(a, t_end, 0.01);
        let sc = scattered_field(&traj, &z0, &model, &grid, direction).unwrap();
        assert_eq!(sc.t_end, t_end);
        let nodes: Vec<usize> = (0..grid.n_nodes()).filter(|&n| grid.k_mag(n) < 2.0).step_by(9).collect();
        assert!(nodes.len() > 5);
        for &n in &nodes {
            let k = grid.k_vec(n);
            let sol = |s: f64| model.soliton(a * s).unwrap();
            let integrand = |s: f64| {
                let (ge, gb) = sol(s).vgrad(&k, &a).unwrap();
                let phase = Complex64::from_polar(1.0, -k.dot(&(a * (0.5 * s * s))));
                rotate(&k, -s, &(ge * phase), &(gb * phase))
            };
            let mut oracle_e = Complex3::zeros();
            let mut oracle_b = Complex3::zeros();
            for c in 0..3 {
                let part = |f: &dyn Fn(f64) -> f64| common::adaptive_simpson(&f, 0.0, t_end, 1e-13);
                oracle_e[c] = Complex64::new(part(&|s| integrand(s).0[c].re), part(&|s| integrand(s).0[c].im));
                oracle_b[c] = Complex64::new(part(&|s| integrand(s).1[c].re), part(&|s| integrand(s).1[c].im));
            }
            let want_e = z0.e_hat[n] - oracle_e;
            let want_b = z0.b_hat[n] - oracle_b;
            let scale = norm_sqr(&oracle_e).sqrt().max(norm_sqr(&oracle_b).sqrt());
            assert!(max_abs_diff(&sc.z_sc.e_hat[n], &want_e) < 1e-7 * scale, "{direction:?} node {n}");
            assert!(max_abs_diff(&sc.z_sc.b_hat[n], &want_b) < 1e-7 * scale, "{direction:?} node {n}");
        }
    }
}

#[test]
fn truncated_trajectories_are_rejected() {
    let grid = common::small_grid();
    let model = model(0.3);
    let traj = accelerated(Real3::new(0.01, 0.0, 0.0), 2.0, 0.1);
    let z0 = SpectralFieldPair::for_grid(&grid);
    assert!(scattered_field(&traj, &z0, &model, &grid, Direction::Past).is_err());
    let wrong = SpectralFieldPair::zeros(3);
    assert!(scattered_field(&traj, &wrong, &model, &grid, Direction::Future).is_err());
}

#[test]
fn wave_operator_converges_after_a_kick() {
    let grid = common::reference_like_grid();
    let model = model(0.3);
    let state = SystemState::soliton(&grid, &model, Real3::zeros(), Real3::zeros())
        .unwrap()
        .with_radiation(&pulse_radiation(&grid))
        .unwrap();
    let run = simulate(&state, &grid, &model, 24.0, 0.02, 100).unwrap();
    let z0 = deviation(&run.snapshots[0], &model, &grid).unwrap();
    let sc = scattered_field(&run.trajectory, &z0, &model, &grid, Direction::Future)
        .unwrap()
        .with_convergence(&run.snapshots, &model, &grid)
        .unwrap();
    let at = |t: f64| sc.convergence_series.iter().find(|(s, _)| (s - t).abs() < 1e-9).unwrap().1;
    assert!(at(24.0) < at(12.0), "{:?}", sc.convergence_series);
    assert!(at(24.0) < 1e-3 * z0.l2_norm(&grid), "{:?}", sc.convergence_series);
    // the kick is sizable, so z_sc differs from the incoming data
    assert!(sc.z_sc.l2_distance(&z0, &grid) > 1e3 * at(24.0));
}

#[test]
fn soliton_infrared_extraction_recovers_the_closed_form() {
    let grid = common::reference_like_grid();
    let model = model(0.3);
    for v in [Real3::zeros(), Real3::new(0.0, 0.0, 0.5), Real3::new(0.3, -0.2, 0.4)] {
        let state = SystemState::soliton(&grid, &model, Real3::new(1.0, 2.0, -0.5), v).unwrap();
        // the phase e^{−ik·q} tends to one
        let tail = ir_extract(&state.fields, &grid, &IrSettings::default()).unwrap();
        let closed = IrTail::soliton(&grid, &v, model.e());
        for d in 0..grid.n_directions() {
            assert!(max_abs_diff(&tail.e[d], &closed.e[d]) < 1e-6 * model.e() * FOURIER_NORM, "v = {v:?}");
            assert!(max_abs_diff(&tail.b[d], &closed.b[d]) < 1e-6 * model.e() * FOURIER_NORM, "v = {v:?}");
        }
    }
}

#[test]
fn ir_extraction_needs_small_shells() {
    let grid = abraham_core::grid::build_kgrid(16, 0.1, 8.0, 4, 4).unwrap();
    let f = SpectralFieldPair::for_grid(&grid);
    assert!(ir_extract(&f, &grid, &IrSettings::default()).is_err());
}

#[test]
fn regular_pulse_has_no_infrared_tail() {
    let grid = common::reference_like_grid();
    let tail = ir_extract(&pulse_radiation(&grid), &grid, &IrSettings::default()).unwrap();
    for d in 0..grid.n_directions() {
        assert!(norm_sqr(&tail.e[d]).sqrt() < 1e-8 && norm_sqr(&tail.b[d]).sqrt() < 1e-8);
    }
}

fn synthetic(z_sc: SpectralFieldPair, direction: Direction, grid: &KGrid) -> ScatterResult {
    ScatterResult {
        z_sc,
        direction,
        t_end: direction.sign() * 10.0,
        tail_bound: 0.0,
        tail_fit: None,
        ir_quadrature_error: vec![(0.0, 0.0); grid.n_directions()],
        convergence_series: Vec::new(),
    }
}

#[test]
fn soft_photon_residual_ignores_a_common_regular_field() {
    let grid = common::reference_like_grid();
    let model = model(0.3);
    let settings = IrSettings::default();
    let (v_plus, v_minus) = (Real3::new(0.0, 0.1, 0.4), Real3::new(-0.2, 0.0, 0.1));
    let plus = SystemState::soliton(&grid, &model, Real3::zeros(), v_plus).unwrap().fields.scaled(-1.0);
    let minus = SystemState::soliton(&grid, &model, Real3::zeros(), v_minus).unwrap().fields.scaled(-1.0);
    let extra = pulse_radiation(&grid);
    let a = soft_photon_residual(
        &synthetic(plus.clone(), Direction::Future, &grid),
        &synthetic(minus.clone(), Direction::Past, &grid),
        &v_plus,
        &v_minus,
        &model,
        &grid,
        &settings,
    )
    .unwrap();
    let b = soft_photon_residual(
        &synthetic(plus.add(&extra), Direction::Future, &grid),
        &synthetic(minus.add(&extra), Direction::Past, &grid),
        &v_plus,
        &v_minus,
        &model,
        &grid,
        &settings,
    )
    .unwrap();
    // minus the soliton fields satisfy the relation up to extrapolation error
    assert!(a.residual_norm() < 1e-6, "{}", a.residual_norm());
    assert!((a.electric.relative_residual - b.electric.relative_residual).abs() < 1e-12);
    assert!((a.magnetic.relative_residual - b.magnetic.relative_residual).abs() < 1e-12);
    for d in 0..grid.n_directions() {
        assert!(max_abs_diff(&a.electric.lhs[d], &b.electric.lhs[d]) < 1e-12 * model.e() * FOURIER_NORM);
    }
}

#[test]
fn soft_photon_right_hand_side_example() {
    let v = Real3::new(0.0, 0.0, 0.5);
    let rhs = |k_hat: Real3| {
        let (e_plus, b_plus) = ir_limit_parts(&k_hat, &v, 1.0);
        let (e_minus, b_minus) = ir_limit_parts(&k_hat, &Real3::zeros(), 1.0);
        (-(e_plus - e_minus), -(b_plus - b_minus))
    };
    let (e, _) = rhs(common::unit([1.0, 0.0, 1.0]));
    // (1/√2)(1/(7/8) − 1) with the z component reduced by (k̂·v)v
    let c = FOURIER_NORM * (8.0 / 7.0 - 1.0) / 2f64.sqrt();
    let oracle = complexify(&Real3::new(c, 0.0, -c)) * I;
    assert!(max_abs_diff(&e, &oracle) < 1e-16);
    assert!((c - 0.00641).abs() < 5e-6);
    let (e, b) = rhs(Real3::x());
    assert_eq!(e, Complex3::zeros());
    let (_, b_only) = ir_limit_parts(&Real3::x(), &v, 1.0);
    assert!(max_abs_diff(&b, &(-b_only)) < 1e-16);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn difference_of_soliton_tails_is_transverse(
        vx in -0.6f64..0.6, vy in -0.6f64..0.6, vz in -0.6f64..0.6,
        theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..(2.0 * std::f64::consts::PI),
    ) {
        let k_hat = Real3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let (e0, b0) = ir_limit_parts(&k_hat, &Real3::zeros(), 0.3);
        let (ev, bv) = ir_limit_parts(&k_hat, &Real3::new(vx, vy, vz), 0.3);
        prop_assert!(rdot(&k_hat, &(e0 - ev)).norm() < 1e-13);
        prop_assert!(rdot(&k_hat, &bv).norm() < 1e-16);
        prop_assert_eq!(b0, Complex3::zeros());
    }
}
