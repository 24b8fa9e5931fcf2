mod common;

use std::f64::consts::PI;

use abraham_core::dynamics::{smeared_fields_at_particle, ParticleState, SystemState};
use abraham_core::grid::build_kgrid;
use abraham_core::matter::{ChargeModel, FOURIER_NORM};
use abraham_core::quadrature::{gauss_legendre_on, neville_to_zero};
use abraham_core::vector::{complexify, max_abs_diff, rdot, Complex3, Real3, I};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn unit_model() -> ChargeModel {
    ChargeModel::new(1.0, 1.0, 1.0).unwrap()
}

#[test]
fn phi_hat_matches_monte_carlo_transform() {
    let model = unit_model();
    let k = Real3::new(0.6, 0.0, 0.8);
    let mut rng = common::rng(2024);
    let n = 400_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let x = Real3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()) * 2.0 - Real3::repeat(1.0);
        // φ is real and even, so only cos(k·x) survives
        let f = 8.0 * model.phi(x.norm()) * k.dot(&x).cos();
        sum += f;
        sum_sq += f * f;
    }
    let mean = sum / n as f64;
    let sigma = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
    let estimate = FOURIER_NORM * mean;
    let value = model.phi_hat(1.0);
    assert!((estimate - value).abs() < 3.0 * FOURIER_NORM * sigma, "{estimate} vs {value} (σ = {})", FOURIER_NORM * sigma);
}

#[test]
fn profile_is_normalized_and_supported_in_the_ball() {
    let model = ChargeModel::new(1.0, 1.0, 1.5).unwrap();
    let (r, w) = gauss_legendre_on(0.0, 1.5, 200);
    let total: f64 = r.iter().zip(&w).map(|(r, w)| 4.0 * PI * w * r * r * model.phi(*r)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(model.phi(1.5), 0.0);
    assert_eq!(model.phi(2.0), 0.0);
    assert!((model.phi_hat(0.0) - FOURIER_NORM).abs() < 1e-15);
}

#[test]
fn moving_soliton_at_a_transverse_wave_vector() {
    let model = unit_model();
    let v = Real3::new(0.0, 0.0, 0.5);
    let k = Real3::x();
    let (e, b) = model.soliton(v).unwrap().momentum(&k).unwrap();
    // (−ik + v(v·ik)) eφ̂ / (|k|² − (k·v)²) and −v×(ik) eφ̂ / (…) with complex arithmetic
    let ik = complexify(&k) * I;
    let cv = complexify(&v);
    let denom = k.norm_squared() - k.dot(&v).powi(2);
    let phi = Complex64::from(model.phi_hat(1.0));
    let e_oracle = (-ik + cv * cv.dot(&ik)) * (phi / denom);
    let b_oracle = -cv.cross(&ik) * (phi / denom);
    assert!(max_abs_diff(&e, &e_oracle) < 1e-15);
    assert!(max_abs_diff(&b, &b_oracle) < 1e-15);
    let minus_i_phi = -I * phi;
    assert!(max_abs_diff(&e, &(Complex3::new(1.0.into(), 0.0.into(), 0.0.into()) * minus_i_phi)) < 1e-15);
    assert!(max_abs_diff(&b, &(Complex3::new(0.0.into(), 0.5.into(), 0.0.into()) * minus_i_phi)) < 1e-15);
}

#[test]
fn velocity_gradient_matches_central_differences() {
    let model = unit_model();
    let h = 1e-5;
    for (v, k, dv) in [
        (Real3::zeros(), Real3::new(0.3, -0.2, 0.9), Real3::new(1.0, 0.0, 0.0)),
        (Real3::new(0.2, 0.1, -0.4), Real3::new(-1.1, 0.5, 0.2), Real3::new(0.3, -0.7, 0.2)),
        (Real3::new(0.0, 0.6, 0.0), Real3::new(0.0, 2.0, 0.1), Real3::new(0.0, 1.0, 0.5)),
    ] {
        let (ge, gb) = model.soliton(v).unwrap().vgrad(&k, &dv).unwrap();
        let (ep, bp) = model.soliton(v + dv * h).unwrap().momentum(&k).unwrap();
        let (em, bm) = model.soliton(v - dv * h).unwrap().momentum(&k).unwrap();
        let fd_e = (ep - em) / Complex64::from(2.0 * h);
        let fd_b = (bp - bm) / Complex64::from(2.0 * h);
        let scale = ge.norm().max(gb.norm());
        assert!(max_abs_diff(&ge, &fd_e) < 1e-8 * scale, "E at v = {v:?}");
        assert!(max_abs_diff(&gb, &fd_b) < 1e-8 * scale.max(1e-3), "B at v = {v:?}");
        // Gauss law does not depend on v
        assert!(rdot(&k, &ge).norm() < 1e-12 * scale);
    }
}

#[test]
fn rest_tail_is_coulomb() {
    let model = ChargeModel::new(0.7, 1.0, 1.0).unwrap();
    let sol = model.soliton(Real3::zeros()).unwrap();
    let tail = sol.position_tail(&Real3::x());
    assert!((tail - Real3::x() * (0.7 / (4.0 * PI))).norm() < 1e-16);
    assert!((0.0795775 - 1.0 / (4.0 * PI)).abs() < 1e-7);
}

/// `r² E_z(r ẑ)` for a soliton moving along `ẑ`, from the position-space
/// profile: `e(1−v²) ∫₀^R u² φ(u) / (1 − v²u²/r²) du`.
fn on_axis_r2_field(model: &ChargeModel, v: f64, r: f64) -> f64 {
    let (u, w) = gauss_legendre_on(0.0, model.r_phi(), 200);
    let integral: f64 = u
        .iter()
        .zip(&w)
        .map(|(u, w)| w * u * u * model.phi(*u) / (1.0 - v * v * u * u / (r * r)))
        .sum();
    model.e() * (1.0 - v * v) * integral
}

#[test]
fn moving_tail_along_velocity_matches_inverse_transform() {
    let model = unit_model();
    let v = 0.5;
    let sol = model.soliton(Real3::new(0.0, 0.0, v)).unwrap();
    let closed = sol.position_tail(&Real3::z()).z;
    assert!((closed - 0.75 / (4.0 * PI)).abs() < 1e-16);
    let radii = [40.0, 80.0, 160.0];
    let h: Vec<f64> = radii.iter().map(|r| 1.0 / (r * r)).collect();
    let values: Vec<f64> = radii.iter().map(|&r| on_axis_r2_field(&model, v, r)).collect();
    let diag = neville_to_zero(&h, &values);
    assert!((diag[2] - closed).abs() < 1e-12 * closed, "{} vs {closed}", diag[2]);
    assert!((values[2] - closed).abs() < 1e-4 * closed);
}

#[test]
fn tail_flux_is_the_charge() {
    let grid = build_kgrid(4, 0.1, 1.0, 48, 64).unwrap();
    for v in [Real3::zeros(), Real3::new(0.0, 0.0, 0.5), Real3::new(0.3, 0.4, 0.0)] {
        let model = ChargeModel::new(0.3, 1.0, 1.0).unwrap();
        let sol = model.soliton(v).unwrap();
        let flux = grid.integrate_sphere(|d| grid.directions()[d].dot(&sol.position_tail(&grid.directions()[d])));
        assert!((flux - 0.3).abs() < 1e-10, "v = {v:?}: {flux}");
    }
}

#[test]
fn soliton_ir_limit_is_the_small_k_limit() {
    let model = ChargeModel::new(0.3, 1.0, 1.0).unwrap();
    let v = Real3::new(0.2, -0.3, 0.5);
    let sol = model.soliton(v).unwrap();
    for k_hat in [Real3::x(), common::unit([1.0, 1.0, 1.0]), common::unit([-0.2, 0.5, -0.9])] {
        let ks = [1e-2, 1e-3, 1e-4];
        let (es, bs): (Vec<Complex3>, Vec<Complex3>) = ks
            .iter()
            .map(|&k| {
                let (e, b) = sol.momentum(&(k_hat * k)).unwrap();
                (e * Complex64::from(k), b * Complex64::from(k))
            })
            .unzip();
        let (ir_e, ir_b) = sol.ir_limit(&k_hat);
        for c in 0..3 {
            let ex: Vec<f64> = es.iter().map(|z| z[c].im).collect();
            let bx: Vec<f64> = bs.iter().map(|z| z[c].im).collect();
            assert!((neville_to_zero(&ks, &ex)[2] - ir_e[c].im).abs() < 1e-6 * FOURIER_NORM);
            assert!((neville_to_zero(&ks, &bx)[2] - ir_b[c].im).abs() < 1e-6 * FOURIER_NORM);
        }
    }
}

#[test]
fn moving_soliton_feels_no_self_force() {
    let model = ChargeModel::new(0.3, 1.0, 1.0).unwrap();
    let grid = common::reference_like_grid();
    for v in [Real3::new(0.0, 0.0, 0.3), Real3::new(0.4, -0.2, 0.1)] {
        let state = SystemState::soliton(&grid, &model, Real3::new(0.5, -1.0, 2.0), v).unwrap();
        let (e, b) = smeared_fields_at_particle(&state, &grid, &model).unwrap();
        let force = (e + v.cross(&b)) * model.e();
        assert!(force.norm() < 1e-8, "v = {v:?}: {force:?}");
    }
    let p = ParticleState::new(Real3::zeros(), Real3::new(0.0, 0.0, 0.99)).unwrap();
    assert!(p.gamma() > 7.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_law_holds_for_every_velocity(
        vx in -0.5f64..0.5, vy in -0.5f64..0.5, vz in -0.5f64..0.5,
        kx in -3.0f64..3.0, ky in -3.0f64..3.0, kz in -3.0f64..3.0,
    ) {
        let k = Real3::new(kx, ky, kz);
        prop_assume!(k.norm() > 1e-3);
        let model = unit_model();
        let (e, _) = model.soliton(Real3::new(vx, vy, vz)).unwrap().momentum(&k).unwrap();
        let rho = model.phi_hat(k.norm());
        prop_assert!((rdot(&k, &e) * I - rho).norm() < 1e-13 * rho.abs().max(1e-3));
    }

    #[test]
    fn ir_limit_longitudinal_part_is_velocity_independent(
        vx in -0.55f64..0.55, vy in -0.55f64..0.55, vz in -0.55f64..0.55,
        theta in 0.0f64..PI, phi in 0.0f64..(2.0 * PI),
    ) {
        let k_hat = Real3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let model = ChargeModel::new(0.3, 1.0, 1.0).unwrap();
        let (e, _) = model.soliton(Real3::new(vx, vy, vz)).unwrap().ir_limit(&k_hat);
        prop_assert!((rdot(&k_hat, &e) - (-I * 0.3 * FOURIER_NORM)).norm() < 1e-14);
    }

    #[test]
    fn superluminal_velocities_are_rejected(s in 1.0f64..3.0) {
        let model = unit_model();
        prop_assert!(model.soliton(Real3::new(0.0, s, 0.0)).is_err());
    }
}
