#![allow(dead_code)]

use abraham_core::grid::{GridParams, KGrid, RadialSpacing};
use abraham_core::vector::{Complex3, Real3};
use abraham_core::field::SpectralFieldPair;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adaptive Simpson with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Adaptive Simpson over `[a, b]` split at the given points.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, cuts: &[f64], tol: f64) -> f64 {
    cuts.windows(2).map(|w| adaptive_simpson(f, w[0], w[1], tol)).sum()
}

pub fn small_grid() -> KGrid {
    KGrid::new(GridParams::log(24, 1e-3, 8.0, 6, 8)).unwrap()
}

pub fn reference_like_grid() -> KGrid {
    KGrid::new(GridParams {
        n_radial: 64,
        k_min: 1e-3,
        k_max: 8.0,
        n_polar: 8,
        n_azimuth: 8,
        radial: RadialSpacing::LogLinear { k_switch: 0.1 },
    })
    .unwrap()
}

pub fn c3(x: [(f64, f64); 3]) -> Complex3 {
    Complex3::new(
        Complex64::new(x[0].0, x[0].1),
        Complex64::new(x[1].0, x[1].1),
        Complex64::new(x[2].0, x[2].1),
    )
}

pub fn unit(v: [f64; 3]) -> Real3 {
    Real3::from(v).normalize()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent uniform complex amplitudes in `[-½, ½]²` at every node.
pub fn random_field(grid: &KGrid, seed: u64) -> SpectralFieldPair {
    let mut r = rng(seed);
    SpectralFieldPair::from_fn(grid, |_| {
        let mut z = || Complex3::from_fn(|_, _| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
        (z(), z())
    })
}
