//! Scattered radiation data `z_sc,± = Z(0) − ∫₀^{±T} U(−s) ĝ(s) ds`.
//!
//! `Z` is the deviation of the field from the soliton that instantaneously
//! co-moves with the particle and `ĝ = (v̇·∇_v)(Ê_v, B̂_v) e^{−ik·q}` is the
//! term by which it is driven.

use serde::{Deserialize, Serialize};

use crate::dynamics::{soliton_on_grid, PowerLawFit, Snapshot, Trajectory, TrajectorySample};
use crate::field::{FreeRotation, SpectralFieldPair};
use crate::grid::KGrid;
use crate::matter::{soliton_vgrad_parts, ChargeModel, FOURIER_NORM};
use crate::quadrature::simpson_weights;
use crate::vector::{complexify, Complex3, Real3, I};
use crate::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Future,
    Past,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Future => 1.0,
            Direction::Past => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::Future => "sc,+",
            Direction::Past => "sc,-",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScatterResult {
    pub z_sc: SpectralFieldPair,
    pub direction: Direction,
    /// End of the `s` integration, `±T`.
    pub t_end: f64,
    /// Estimated velocity change beyond `|s| = T` from the fitted `|v̇|` tail.
    pub tail_bound: f64,
    pub tail_fit: Option<PowerLawFit>,
    /// Per grid direction, estimated time-quadrature error of the infrared
    /// limit of the `s` integral (electric, magnetic).
    pub ir_quadrature_error: Vec<(f64, f64)>,
    /// `(T, ‖U(−T) Z(T) − z_sc‖)`.
    pub convergence_series: Vec<(f64, f64)>,
}

/// `e φ̂` per radial shell.
fn shell_charge(grid: &KGrid, model: &ChargeModel) -> Vec<f64> {
    grid.radial_nodes().iter().map(|&k| model.e() * model.phi_hat(k)).collect()
}

/// `ĝ(k) = (v̇·∇_v)(Ê_v(k), B̂_v(k)) e^{−ik·q}` at one trajectory sample.
pub fn source_term(sample: &TrajectorySample, model: &ChargeModel, grid: &KGrid) -> Result<SpectralFieldPair> {
    crate::vector::check_subluminal(&sample.v())?;
    let e_phi = shell_charge(grid, model);
    Ok(source_on_grid(sample, grid, &e_phi))
}

fn source_on_grid(sample: &TrajectorySample, grid: &KGrid, e_phi: &[f64]) -> SpectralFieldPair {
    let (q, v, dv) = (sample.q(), sample.v(), sample.v_dot());
    let n_dir = grid.n_directions();
    SpectralFieldPair::from_fn(grid, |n| source_node(grid, n, &q, &v, &dv, e_phi[n / n_dir]))
}

#[inline]
fn source_node(grid: &KGrid, n: usize, q: &Real3, v: &Real3, dv: &Real3, e_phi: f64) -> (Complex3, Complex3) {
    let k = grid.k_vec(n);
    let (a, b) = soliton_vgrad_parts(&k, v, dv, e_phi);
    let phase = I * Complex64::from_polar(1.0, -k.dot(q));
    (complexify(&a) * phase, complexify(&b) * phase)
}

/// Samples of the trajectory on the requested side of `t = 0`, ordered by
/// increasing `|s|`.
fn half_trajectory(traj: &Trajectory, direction: Direction) -> Result<Vec<TrajectorySample>> {
    let tol = 1e-9 * traj.spacing.max(1.0);
    let mut side: Vec<TrajectorySample> = traj
        .samples
        .iter()
        .filter(|s| s.t * direction.sign() >= -tol)
        .copied()
        .collect();
    if direction == Direction::Past {
        side.reverse();
    }
    match side.first() {
        Some(first) if first.t.abs() <= tol && side.len() >= 2 => Ok(side),
        _ => Err(Error::InvalidParameter(format!(
            "trajectory does not cover [0, {}T] starting at t = 0",
            if direction == Direction::Future { "+" } else { "-" }
        ))),
    }
}

/// Builds `z_sc` by composite Simpson quadrature over the recorded samples.
pub fn scattered_field(
    traj: &Trajectory,
    initial_deviation: &SpectralFieldPair,
    model: &ChargeModel,
    grid: &KGrid,
    direction: Direction,
) -> Result<ScatterResult> {
    initial_deviation.check_shape(grid)?;
    let side = half_trajectory(traj, direction)?;
    let weights = simpson_weights(side.len(), traj.spacing);
    let e_phi = shell_charge(grid, model);
    let n_dir = grid.n_directions();
    let sign = direction.sign();
    let mut acc_e = vec![Complex3::zeros(); grid.n_nodes()];
    let mut acc_b = vec![Complex3::zeros(); grid.n_nodes()];
    for (sample, &w) in side.iter().zip(&weights) {
        if sample.v_dot == [0.0; 3] {
            continue;
        }
        crate::vector::check_subluminal(&sample.v())?;
        let rot = FreeRotation::new(grid, -sample.t);
        let (q, v, dv) = (sample.q(), sample.v(), sample.v_dot());
        let cw = Complex64::from(w * sign);
        for n in 0..grid.n_nodes() {
            let (ge, gb) = source_node(grid, n, &q, &v, &dv, e_phi[n / n_dir]);
            let (re, rb) = rot.apply_transverse(n, &grid.directions()[n % n_dir], &ge, &gb);
            acc_e[n] += re * cw;
            acc_b[n] += rb * cw;
        }
    }
    let z_sc = SpectralFieldPair {
        e_hat: initial_deviation.e_hat.iter().zip(&acc_e).map(|(z, a)| z - a).collect(),
        b_hat: initial_deviation.b_hat.iter().zip(&acc_b).map(|(z, a)| z - a).collect(),
    };
    let t_end = side.last().map_or(0.0, |s| s.t);
    let span = t_end.abs();
    let (tail_fit, tail_bound) = if side.iter().all(|s| s.v_dot == [0.0; 3]) {
        (None, 0.0)
    } else {
        let fit = traj.fit_acceleration_tail(0.25 * span, span);
        (fit, fit.map_or(f64::INFINITY, |f| f.tail_integral(span)))
    };
    let norm = z_sc.l2_norm(grid);
    let tail_field = tail_bound * velocity_gradient_norm(&side, grid, &e_phi);
    if tail_field > 0.1 * norm {
        log::warn!(
            "{}: s-integral tail estimate {:.3e} exceeds 10% of ||z_sc|| = {:.3e}; run is too short for a trustworthy IR claim",
            direction.label(),
            tail_field,
            norm
        );
    }
    Ok(ScatterResult {
        z_sc,
        direction,
        t_end,
        tail_bound,
        tail_fit,
        ir_quadrature_error: ir_quadrature_error(&side, &weights, traj.spacing, grid, model.e()),
        convergence_series: Vec::new(),
    })
}

/// Compares the Simpson rule on the `|k| → 0` limit of the integrand,
/// `(v̇·∇_v)(ℰ_v, ℬ_v)(k̂)`, with the same rule at double spacing; the
/// difference over 15 estimates the error of the finer rule.
fn ir_quadrature_error(side: &[TrajectorySample], fine: &[f64], h: f64, grid: &KGrid, e: f64) -> Vec<(f64, f64)> {
    let n = side.len();
    let last_even = if (n - 1).is_multiple_of(2) { n - 1 } else { n - 2 };
    let mut coarse = vec![0.0; n];
    let coarse_w = simpson_weights(last_even / 2 + 1, 2.0 * h);
    for (i, w) in coarse_w.iter().enumerate() {
        coarse[2 * i] += w;
    }
    if last_even != n - 1 {
        coarse[n - 2] += 0.5 * h;
        coarse[n - 1] += 0.5 * h;
    }
    let c = e * FOURIER_NORM;
    grid.directions()
        .iter()
        .map(|k_hat| {
            let (mut de, mut db) = (Real3::zeros(), Real3::zeros());
            for (j, smp) in side.iter().enumerate() {
                let (a, b) = soliton_vgrad_parts(k_hat, &smp.v(), &smp.v_dot(), c);
                let diff = fine[j] - coarse[j];
                de += a * diff;
                db += b * diff;
            }
            (de.norm() / 15.0, db.norm() / 15.0)
        })
        .collect()
}

/// Largest `‖(e_j·∇_v)(Ê_v, B̂_v)‖_{L²}` over unit `e_j` at the final velocity.
fn velocity_gradient_norm(side: &[TrajectorySample], grid: &KGrid, e_phi: &[f64]) -> f64 {
    let last = side[side.len() - 1];
    [Real3::x(), Real3::y(), Real3::z()]
        .iter()
        .map(|dir| {
            let unit = TrajectorySample {
                v_dot: [dir.x, dir.y, dir.z],
                ..last
            };
            source_on_grid(&unit, grid, e_phi).l2_norm(grid)
        })
        .fold(0.0, f64::max)
}

/// `Z(t) = fields − soliton at (q(t), v(t))`.
pub fn deviation(snapshot: &Snapshot, model: &ChargeModel, grid: &KGrid) -> Result<SpectralFieldPair> {
    snapshot.fields.check_shape(grid)?;
    Ok(snapshot.fields.sub(&soliton_on_grid(grid, model, &snapshot.particle)))
}

/// `(T, ‖U(−T) Z(T) − z_sc‖)` for every snapshot on the side of `z_sc`.
pub fn wave_operator_diagnostic(
    snapshots: &[Snapshot],
    z_sc: &ScatterResult,
    model: &ChargeModel,
    grid: &KGrid,
) -> Result<Vec<(f64, f64)>> {
    let sign = z_sc.direction.sign();
    let mut series = Vec::new();
    for snap in snapshots.iter().filter(|s| s.t * sign >= 0.0) {
        let z = deviation(snap, model, grid)?;
        let pulled_back = crate::field::free_propagate(&z, grid, -snap.t)?;
        series.push((snap.t, pulled_back.l2_distance(&z_sc.z_sc, grid)));
    }
    series.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    Ok(series)
}

impl ScatterResult {
    pub fn with_convergence(mut self, snapshots: &[Snapshot], model: &ChargeModel, grid: &KGrid) -> Result<Self> {
        self.convergence_series = wave_operator_diagnostic(snapshots, &self, model, grid)?;
        let late: Vec<f64> = self
            .convergence_series
            .iter()
            .rev()
            .take(4)
            .map(|(_, d)| *d)
            .collect();
        if late.windows(2).any(|w| w[0] > w[1]) {
            log::info!(
                "{}: wave-operator deviation is not monotone over the last checkpoints",
                self.direction.label()
            );
        }
        Ok(self)
    }
}
