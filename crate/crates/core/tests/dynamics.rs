mod common;

use abraham_core::dynamics::{
    constraint_residuals, simulate, simulate_with, smeared_fields_at_particle, soliton_on_grid, step, ParticleState,
    SimulateOptions, SystemState, TrajectorySample,
};
use abraham_core::field::{enforce_hermitian, functionals, SpectralFieldPair};
use abraham_core::grid::{GridParams, KGrid, RadialSpacing};
use abraham_core::matter::ChargeModel;
use abraham_core::pulse::{make_pulse, PulseParams};
use abraham_core::vector::{max_abs_diff, norm_sqr, rdot, Complex3, Real3};
use abraham_core::Error;
use num_complex::Complex64;

fn model() -> ChargeModel {
    ChargeModel::new(0.3, 1.0, 1.0).unwrap()
}

fn pulse(amplitude: f64) -> PulseParams {
    PulseParams {
        k0: 4.5,
        width: 0.75,
        amplitude,
        polarization: [1.0, 0.0, 0.0],
        direction: [0.0, 0.0, 1.0],
        center: [0.0, 0.0, -8.0],
    }
}

fn pulse_state(grid: &KGrid, amplitude: f64) -> SystemState {
    let radiation = enforce_hermitian(&make_pulse(grid, &pulse(amplitude)).unwrap(), grid);
    SystemState::soliton(grid, &model(), Real3::zeros(), Real3::zeros())
        .unwrap()
        .with_radiation(&radiation)
        .unwrap()
}

#[test]
fn smeared_field_of_one_mode_pair_is_a_cosine() {
    let grid = common::small_grid();
    let model = model();
    let n = grid.node(10, 3);
    let anti = grid.antipode_node(n);
    let a = common::c3([(0.3, -0.1), (0.0, 0.2), (-0.4, 0.05)]);
    let mut fields = SpectralFieldPair::for_grid(&grid);
    fields.e_hat[n] = a;
    fields.e_hat[anti] = a.map(|z| z.conj());
    let q = Real3::new(0.4, -1.2, 0.7);
    let state = SystemState {
        fields,
        particle: ParticleState::at_rest(q),
        t: 0.0,
    };
    let (e, b) = smeared_fields_at_particle(&state, &grid, &model).unwrap();
    // w φ̂ (A e^{ik·q} + conj(A) e^{−ik·q})
    let k = grid.k_vec(n);
    let w = grid.weight(n) * model.phi_hat(grid.k_mag(n));
    let oracle = (a * Complex64::from_polar(1.0, k.dot(&q))).map(|z| 2.0 * w * z.re);
    assert!((e - oracle).norm() < 1e-15);
    assert_eq!(b, Real3::zeros());
}

#[test]
fn non_hermitian_fields_are_rejected_by_the_force() {
    let grid = common::small_grid();
    let mut fields = SpectralFieldPair::for_grid(&grid);
    fields.e_hat[grid.node(2, 0)] = common::c3([(0.0, 1.0), (0.0, 0.0), (0.0, 0.0)]);
    let state = SystemState {
        fields,
        particle: ParticleState::at_rest(Real3::zeros()),
        t: 0.0,
    };
    assert!(matches!(
        smeared_fields_at_particle(&state, &grid, &model()),
        Err(Error::SymmetryViolation { .. })
    ));
}

#[test]
fn soliton_moves_rigidly() {
    let grid = common::reference_like_grid();
    let model = model();
    let v0 = Real3::new(0.0, 0.0, 0.3);
    let state = SystemState::soliton(&grid, &model, Real3::zeros(), v0).unwrap();
    let dt = 0.02;
    let run = simulate(&state, &grid, &model, 500.0 * dt, dt, 100).unwrap();
    for s in &run.trajectory.samples {
        assert!((s.v() - v0).norm() < 1e-6, "t = {}", s.t);
        assert!(s.v_dot().norm() < 1e-7, "t = {}", s.t);
    }
    let moved = ParticleState::new(v0 * run.final_state.t, v0).unwrap();
    let oracle = soliton_on_grid(&grid, &model, &moved);
    let peak = oracle.e_hat.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for n in 0..grid.n_nodes() {
        let mag = (norm_sqr(&oracle.e_hat[n]) + norm_sqr(&oracle.b_hat[n])).sqrt();
        if mag < 1e-8 * peak {
            continue;
        }
        let dev = (norm_sqr(&(run.final_state.fields.e_hat[n] - oracle.e_hat[n]))
            + norm_sqr(&(run.final_state.fields.b_hat[n] - oracle.b_hat[n])))
        .sqrt();
        assert!(dev < 1e-4 * mag, "node {n}: {dev} vs {mag}");
    }
    assert!(run.asymptotic.error_bound < 1e-12 || run.asymptotic.fit.is_some());
}

#[test]
fn step_forward_then_backward_returns() {
    let grid = common::reference_like_grid();
    let model = model();
    let mut state = pulse_state(&grid, 30.0);
    // start mid-interaction
    for _ in 0..400 {
        state = step(&state, &grid, &model, 0.02).unwrap();
    }
    let back = step(&step(&state, &grid, &model, 0.02).unwrap(), &grid, &model, -0.02).unwrap();
    assert!((back.particle.q - state.particle.q).amax() < 1e-10);
    assert!((back.particle.v - state.particle.v).amax() < 1e-10);
    for n in 0..grid.n_nodes() {
        assert!(max_abs_diff(&back.fields.e_hat[n], &state.fields.e_hat[n]) < 1e-10);
        assert!(max_abs_diff(&back.fields.b_hat[n], &state.fields.b_hat[n]) < 1e-10);
    }
    assert!((back.t - state.t).abs() < 1e-12);
}

#[test]
fn gauss_law_is_slaved_at_every_step() {
    let grid = common::reference_like_grid();
    let model = model();
    let mut state = pulse_state(&grid, 30.0);
    let rho_max = model.e() * model.phi_hat(0.0);
    for _ in 0..20 {
        state = step(&state, &grid, &model, 0.05).unwrap();
        let q = state.particle.q;
        for n in 0..grid.n_nodes() {
            let k = grid.k_vec(n);
            let lhs = rdot(&k, &state.fields.e_hat[n]) * Complex64::new(0.0, 1.0);
            let rhs = Complex64::from_polar(model.e() * model.phi_hat(k.norm()), -k.dot(&q));
            assert!((lhs - rhs).norm() < 1e-12 * rho_max);
            assert!(rdot(grid.k_hat(n), &state.fields.b_hat[n]).norm() < 1e-12);
        }
        let (_, div_b) = constraint_residuals(&state, &grid, &model);
        assert!(div_b < 1e-12);
    }
}

/// `2π / Δk` at the pulse's carrier: the grid's radial spacing makes the
/// radiation partially come back after this time.
fn recurrence_time(grid: &KGrid, k0: f64) -> f64 {
    let nodes = grid.radial_nodes();
    let i = nodes.iter().position(|&k| k > k0).unwrap();
    2.0 * std::f64::consts::PI / (nodes[i] - nodes[i - 1])
}

#[test]
fn pulse_kicks_the_particle_and_velocity_settles() {
    let grid = common::reference_like_grid();
    let model = model();
    let t_final = 24.0;
    assert!(recurrence_time(&grid, pulse(30.0).k0) > 1.5 * t_final);
    let run = simulate(&pulse_state(&grid, 30.0), &grid, &model, t_final, 0.02, 1).unwrap();
    assert!(run.trajectory.max_acceleration() > 1e-4);
    let v_end = run.final_state.particle.v;
    // v oscillates around its limit, so compare maxima over windows
    let window_max = |from: f64, to: f64, f: &dyn Fn(&TrajectorySample) -> f64| {
        run.trajectory
            .samples
            .iter()
            .filter(|s| s.t >= from && s.t < to)
            .map(f)
            .fold(0.0, f64::max)
    };
    let accel: Vec<f64> = [12.0, 16.0, 20.0]
        .iter()
        .map(|&t| window_max(t, t + 4.0, &|s| s.v_dot().norm()))
        .collect();
    assert!(accel.windows(2).all(|w| w[1] < w[0]), "{accel:?}");
    let approach: Vec<f64> = [12.0, 18.0]
        .iter()
        .map(|&t| window_max(t, t + 6.0, &|s| (s.v() - v_end).norm()))
        .collect();
    assert!(approach[1] < approach[0], "{approach:?}");
    let fit = run.asymptotic.fit.expect("fit");
    assert!(fit.exponent < -1.0 && fit.sigma > 0.0);
    assert!(run.drift.energy < 1e-8 && run.drift.momentum < 1e-8);
}

#[test]
fn energy_drift_bound_aborts_the_run() {
    let grid = common::small_grid();
    let model = model();
    let options = SimulateOptions {
        energy_drift_bound: 1e-30,
        fit_window: None,
    };
    let err = simulate_with(&pulse_state(&grid, 30.0), &grid, &model, 40.0, 0.4, 1, &options).unwrap_err();
    assert!(matches!(err, Error::EnergyDrift { .. }), "{err}");
}

#[test]
fn bad_durations_are_rejected() {
    let grid = common::small_grid();
    let model = model();
    let s = pulse_state(&grid, 1.0);
    assert!(simulate(&s, &grid, &model, 1.0, 0.3, 1).is_err());
    assert!(simulate(&s, &grid, &model, 1.0, -0.1, 1).is_err());
    assert!(simulate(&s, &grid, &model, 1.0, 0.1, 0).is_err());
}

/// Gaussian moments of `(x²+y²+z²)(y²+z²)` with `x, y ~ N(0, σ²)`,
/// `z ~ N(k0, σ²)`.
fn pulse_energy_oracle(p: &PulseParams) -> f64 {
    let s2 = p.width * p.width / 2.0;
    let z2 = p.k0 * p.k0 + s2;
    let z4 = p.k0.powi(4) + 6.0 * p.k0 * p.k0 * s2 + 3.0 * s2 * s2;
    let moment = s2 * s2 + s2 * z2 + 3.0 * s2 * s2 + 2.0 * s2 * z2 + z4;
    let a = p.amplitude / (2.0 * p.width.powi(3));
    let mass = (std::f64::consts::PI * p.width * p.width).powf(1.5);
    2.0 * a * a / p.k0.powi(4) * mass * moment
}

#[test]
fn pulse_energy_matches_gaussian_moments() {
    let p = PulseParams {
        k0: 3.0,
        width: 0.8,
        amplitude: 0.7,
        polarization: [1.0, 0.0, 0.0],
        direction: [0.0, 0.0, 1.0],
        center: [0.0, 0.0, -4.0],
    };
    let grid = KGrid::new(GridParams {
        n_radial: 160,
        k_min: 1e-3,
        k_max: 9.0,
        n_polar: 48,
        n_azimuth: 8,
        radial: RadialSpacing::LogLinear { k_switch: 0.3 },
    })
    .unwrap();
    let field = make_pulse(&grid, &p).unwrap();
    let energy = functionals(&field, &grid).unwrap().energy;
    let oracle = pulse_energy_oracle(&p);
    assert!((energy - oracle).abs() < 1e-6 * oracle, "{energy} vs {oracle}");
}

#[test]
fn pulse_is_transverse_hermitian_and_infrared_regular() {
    let grid = common::reference_like_grid();
    let field = make_pulse(&grid, &pulse(5.0)).unwrap();
    assert!(field.hermitian_defect(&grid) < 1e-13);
    let peak = field.e_hat.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for n in 0..grid.n_nodes() {
        let k_hat = grid.k_hat(n);
        assert!(rdot(k_hat, &field.e_hat[n]).norm() < 1e-13 * peak);
        assert!(rdot(k_hat, &field.b_hat[n]).norm() < 1e-13 * peak);
    }
    let first: Complex3 = field.e_hat[grid.node(0, 5)] * Complex64::from(grid.radial_nodes()[0]);
    assert!(first.norm() < 1e-12 * peak);
}
