//! Coupled field–particle evolution.
//!
//! Only the transverse field is dynamical. Between stage evaluations it is
//! rotated exactly by the free flow (a Lawson, or integrating-factor, RK4
//! scheme); the stage derivative is the current source `−P_tr ĵ` together
//! with the particle's `(q̇, ṗ) = (v, e(E_φ + v × B_φ))`. The longitudinal
//! electric field is rebuilt from Gauss' law whenever a full state is formed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::field::{functionals, FreeRotation, SpectralFieldPair};
use crate::grid::KGrid;
use crate::matter::{soliton_parts, ChargeModel};
use crate::vector::{check_subluminal, complexify, czero, re, transverse, Complex3, Real3, I};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub q: Real3,
    pub v: Real3,
}

impl ParticleState {
    pub fn new(q: Real3, v: Real3) -> Result<Self> {
        check_subluminal(&v)?;
        Ok(Self { q, v })
    }

    pub fn at_rest(q: Real3) -> Self {
        Self { q, v: Real3::zeros() }
    }

    pub fn from_momentum(q: Real3, p: Real3, m: f64) -> Self {
        Self {
            q,
            v: velocity_from_momentum(&p, m),
        }
    }

    pub fn gamma(&self) -> f64 {
        1.0 / (1.0 - self.v.norm_squared()).sqrt()
    }

    pub fn momentum(&self, m: f64) -> Real3 {
        self.v * (m * self.gamma())
    }
}

fn velocity_from_momentum(p: &Real3, m: f64) -> Real3 {
    p / (m * m + p.norm_squared()).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub fields: SpectralFieldPair,
    pub particle: ParticleState,
    pub t: f64,
}

impl SystemState {
    /// The soliton of velocity `v` centred at `q`, at time zero.
    pub fn soliton(grid: &KGrid, model: &ChargeModel, q: Real3, v: Real3) -> Result<Self> {
        let particle = ParticleState::new(q, v)?;
        Ok(Self {
            fields: soliton_on_grid(grid, model, &particle),
            particle,
            t: 0.0,
        })
    }

    /// Adds a (transverse) radiation field to the current fields.
    pub fn with_radiation(mut self, radiation: &SpectralFieldPair) -> Result<Self> {
        if radiation.len() != self.fields.len() {
            return Err(Error::ShapeMismatch {
                expected: self.fields.len(),
                found: radiation.len(),
            });
        }
        self.fields = self.fields.add(radiation);
        Ok(self)
    }
}

/// Soliton fields `(Ê_v(k), B̂_v(k)) e^{−ik·q}` on every node.
pub fn soliton_on_grid(grid: &KGrid, model: &ChargeModel, particle: &ParticleState) -> SpectralFieldPair {
    let e_phi: Vec<f64> = grid.radial_nodes().iter().map(|&k| model.e() * model.phi_hat(k)).collect();
    SpectralFieldPair::from_fn(grid, |n| {
        let k = grid.k_vec(n);
        let (a, b) = soliton_parts(&k, &particle.v, e_phi[n / grid.n_directions()]);
        let phase = I * Complex64::from_polar(1.0, -k.dot(&particle.q));
        (complexify(&a) * phase, complexify(&b) * phase)
    })
}

/// Longitudinal field fixed by Gauss' law, `−i k̂ e φ̂ e^{−ik·q} / |k|`.
pub fn gauss_longitudinal(grid: &KGrid, model: &ChargeModel, q: &Real3) -> Vec<Complex3> {
    let e_phi: Vec<f64> = grid.radial_nodes().iter().map(|&k| model.e() * model.phi_hat(k)).collect();
    (0..grid.n_nodes())
        .map(|n| {
            let k_mag = grid.k_mag(n);
            let k_hat = grid.k_hat(n);
            let phase = Complex64::from_polar(e_phi[n / grid.n_directions()] / k_mag, -k_mag * k_hat.dot(q));
            complexify(k_hat) * (-I * phase)
        })
        .collect()
}

/// `(E_φ(q), B_φ(q)) = Re Σ w φ̂ e^{ik·q} (Ê, B̂)`.
///
/// Fails with [`Error::SymmetryViolation`] if the imaginary part of the sum
/// exceeds `1e-9` of the absolute sum, which only happens for fields that
/// are not Hermitian.
pub fn smeared_fields_at_particle(state: &SystemState, grid: &KGrid, model: &ChargeModel) -> Result<(Real3, Real3)> {
    state.fields.check_shape(grid)?;
    let phi: Vec<f64> = grid.radial_nodes().iter().map(|&k| model.phi_hat(k)).collect();
    let q = state.particle.q;
    let mut e_sum = czero();
    let mut b_sum = czero();
    let mut scale = 0.0;
    for r in 0..grid.n_radial() {
        let k = grid.radial_nodes()[r];
        let wr = grid.radial_weights()[r] * phi[r];
        for d in 0..grid.n_directions() {
            let n = grid.node(r, d);
            let w = wr * grid.angular_weights()[d];
            let phase = Complex64::from_polar(w, k * grid.directions()[d].dot(&q));
            let (e, b) = (&state.fields.e_hat[n], &state.fields.b_hat[n]);
            e_sum += e * phase;
            b_sum += b * phase;
            scale += w.abs() * (e.norm() + b.norm());
        }
    }
    let imaginary = crate::vector::im(&e_sum).amax().max(crate::vector::im(&b_sum).amax());
    if imaginary > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SymmetryViolation {
            imaginary,
            magnitude: scale,
        });
    }
    Ok((re(&e_sum), re(&b_sum)))
}

/// Lorentz acceleration `v̇ = (F − v(v·F)) / (mγ)` for a force `F`.
pub fn acceleration(v: &Real3, force: &Real3, m: f64) -> Real3 {
    let gamma = 1.0 / (1.0 - v.norm_squared()).sqrt();
    (force - v * v.dot(force)) / (m * gamma)
}

/// Transverse field plus particle momentum: the variables the stepper moves.
#[derive(Debug, Clone)]
struct Dynamical {
    e: Vec<Complex3>,
    b: Vec<Complex3>,
    q: Real3,
    p: Real3,
}

struct Stage {
    d: Dynamical,
    force: Real3,
}

/// Precomputed per-node data for one grid and charge model.
pub(crate) struct Engine<'a> {
    grid: &'a KGrid,
    model: &'a ChargeModel,
    /// `e φ̂(|k|)` per radial shell.
    e_phi: Vec<f64>,
    /// `w_n φ̂(|k_n|)` per node.
    force_weight: Vec<f64>,
    dir_dot: Vec<f64>,
    phase: Vec<Complex64>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(grid: &'a KGrid, model: &'a ChargeModel) -> Self {
        let phi: Vec<f64> = grid.radial_nodes().iter().map(|&k| model.phi_hat(k)).collect();
        let force_weight = (0..grid.n_nodes())
            .map(|n| grid.weight(n) * phi[n / grid.n_directions()])
            .collect();
        Self {
            grid,
            model,
            e_phi: phi.iter().map(|p| model.e() * p).collect(),
            force_weight,
            dir_dot: vec![0.0; grid.n_directions()],
            phase: vec![Complex64::new(0.0, 0.0); grid.n_nodes()],
        }
    }

    /// Fills `phase[n] = e^{ik_n·q}`.
    fn update_phase(&mut self, q: &Real3) {
        for (d, dir) in self.grid.directions().iter().enumerate() {
            self.dir_dot[d] = dir.dot(q);
        }
        let n_dir = self.grid.n_directions();
        for (r, &k) in self.grid.radial_nodes().iter().enumerate() {
            for d in 0..n_dir {
                let (s, c) = (k * self.dir_dot[d]).sin_cos();
                self.phase[r * n_dir + d] = Complex64::new(c, s);
            }
        }
    }

    fn velocity(&self, p: &Real3) -> Real3 {
        velocity_from_momentum(p, self.model.m())
    }

    /// Force on the particle from transverse fields at the current phase.
    fn force(&self, e: &[Complex3], b: &[Complex3], v: &Real3) -> Real3 {
        let mut e_phi = Real3::zeros();
        let mut b_phi = Real3::zeros();
        let n_dir = self.grid.n_directions();
        for r in 0..self.grid.n_radial() {
            let mut e_shell = Real3::zeros();
            let mut b_shell = Real3::zeros();
            for d in 0..n_dir {
                let n = r * n_dir + d;
                let (ph, w) = (self.phase[n], self.force_weight[n]);
                e_shell += re_mul(&e[n], ph) * w;
                b_shell += re_mul(&b[n], ph) * w;
            }
            e_phi += e_shell;
            b_phi += b_shell;
        }
        (e_phi + v.cross(&b_phi)) * self.model.e()
    }

    fn derivative(&mut self, y: &Dynamical) -> Stage {
        self.update_phase(&y.q);
        let v = self.velocity(&y.p);
        let force = self.force(&y.e, &y.b, &v);
        let n_dir = self.grid.n_directions();
        let e = (0..self.grid.n_nodes())
            .map(|n| {
                let k_hat = &self.grid.directions()[n % n_dir];
                let v_tr = v - k_hat * k_hat.dot(&v);
                complexify(&v_tr) * (-self.e_phi[n / n_dir] * self.phase[n].conj())
            })
            .collect();
        Stage {
            d: Dynamical {
                e,
                b: vec![czero(); self.grid.n_nodes()],
                q: v,
                p: force,
            },
            force,
        }
    }

    fn rotate(&self, y: &Dynamical, rot: &FreeRotation) -> Dynamical {
        let n_dir = self.grid.n_directions();
        let (e, b) = (0..self.grid.n_nodes())
            .map(|n| rot.apply_transverse(n, &self.grid.directions()[n % n_dir], &y.e[n], &y.b[n]))
            .unzip();
        Dynamical { e, b, q: y.q, p: y.p }
    }

    /// One Lawson–RK4 step of size `h`, returning the new state and the force
    /// at the old one.
    fn lawson_step(&mut self, y: &Dynamical, h: f64, half: &FreeRotation) -> (Dynamical, Real3) {
        let k1 = self.derivative(y);
        let y_half = self.rotate(y, half);
        let b = self.rotate(&axpy(y, &[(0.5 * h, &k1.d)]), half);
        let k2 = self.derivative(&b);
        let c = axpy(&y_half, &[(0.5 * h, &k2.d)]);
        let k3 = self.derivative(&c);
        let d = self.rotate(&axpy(&y_half, &[(h, &k3.d)]), half);
        let k4 = self.derivative(&d);
        let inner = self.rotate(&axpy(y, &[(h / 6.0, &k1.d)]), half);
        let outer = self.rotate(&axpy(&inner, &[(h / 3.0, &k2.d), (h / 3.0, &k3.d)]), half);
        (axpy(&outer, &[(h / 6.0, &k4.d)]), k1.force)
    }

    fn to_dynamical(&self, state: &SystemState) -> Dynamical {
        let n_dir = self.grid.n_directions();
        let e = state
            .fields
            .e_hat
            .iter()
            .enumerate()
            .map(|(n, e)| transverse(&self.grid.directions()[n % n_dir], e))
            .collect();
        let b = state
            .fields
            .b_hat
            .iter()
            .enumerate()
            .map(|(n, b)| transverse(&self.grid.directions()[n % n_dir], b))
            .collect();
        Dynamical {
            e,
            b,
            q: state.particle.q,
            p: state.particle.momentum(self.model.m()),
        }
    }

    fn to_state(&mut self, y: &Dynamical, t: f64) -> SystemState {
        self.update_phase(&y.q);
        let n_dir = self.grid.n_directions();
        let e_hat = (0..self.grid.n_nodes())
            .map(|n| {
                let r = n / n_dir;
                let k_hat = &self.grid.directions()[n % n_dir];
                let amp = self.phase[n].conj() * (-self.e_phi[r] / self.grid.radial_nodes()[r]);
                y.e[n] + complexify(k_hat) * (I * amp)
            })
            .collect();
        SystemState {
            fields: SpectralFieldPair {
                e_hat,
                b_hat: y.b.clone(),
            },
            particle: ParticleState::from_momentum(y.q, y.p, self.model.m()),
            t,
        }
    }

    /// Force at a state, for recording `v̇`.
    fn force_at(&mut self, y: &Dynamical) -> Real3 {
        self.update_phase(&y.q);
        let v = self.velocity(&y.p);
        self.force(&y.e, &y.b, &v)
    }
}

#[inline]
fn re_mul(z: &Complex3, ph: Complex64) -> Real3 {
    Real3::new(
        z.x.re * ph.re - z.x.im * ph.im,
        z.y.re * ph.re - z.y.im * ph.im,
        z.z.re * ph.re - z.z.im * ph.im,
    )
}

fn axpy(y: &Dynamical, terms: &[(f64, &Dynamical)]) -> Dynamical {
    let mut out = y.clone();
    for (c, d) in terms {
        let cc = Complex64::from(*c);
        for (o, x) in out.e.iter_mut().zip(&d.e) {
            *o += x * cc;
        }
        for (o, x) in out.b.iter_mut().zip(&d.b) {
            *o += x * cc;
        }
        out.q += d.q * *c;
        out.p += d.p * *c;
    }
    out
}

fn check_step(y: &Dynamical, m: f64) -> Result<()> {
    let speed = velocity_from_momentum(&y.p, m).norm();
    if speed.is_finite() && speed < 1.0 && y.e.iter().all(|e| e.iter().all(|c| c.is_finite())) {
        Ok(())
    } else {
        Err(Error::Superluminal(speed))
    }
}

/// Advances the coupled system by `dt` (negative for backward evolution).
pub fn step(state: &SystemState, grid: &KGrid, model: &ChargeModel, dt: f64) -> Result<SystemState> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step dt = {dt}")));
    }
    state.fields.check_shape(grid)?;
    check_subluminal(&state.particle.v)?;
    let mut engine = Engine::new(grid, model);
    let half = FreeRotation::new(grid, 0.5 * dt);
    let y = engine.to_dynamical(state);
    let (next, _) = engine.lawson_step(&y, dt, &half);
    check_step(&next, model.m())?;
    Ok(engine.to_state(&next, state.t + dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: [f64; 3],
    pub v: [f64; 3],
    pub v_dot: [f64; 3],
}

impl TrajectorySample {
    pub fn q(&self) -> Real3 {
        Real3::from(self.q)
    }

    pub fn v(&self) -> Real3 {
        Real3::from(self.v)
    }

    pub fn v_dot(&self) -> Real3 {
        Real3::from(self.v_dot)
    }
}

/// Samples at every integrator step, in increasing time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Uniform spacing between samples.
    pub spacing: f64,
}

/// `|v̇(t)| ≈ C (1+|t|)^{exponent}`, `σ = −1 − exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub c: f64,
    pub exponent: f64,
    pub sigma: f64,
    pub t_from: f64,
    pub t_to: f64,
    pub samples: usize,
}

impl PowerLawFit {
    /// `∫_T^∞ C (1+s)^{−1−σ} ds`, infinite when `σ ≤ 0`.
    pub fn tail_integral(&self, t: f64) -> f64 {
        if self.sigma > 0.0 {
            self.c * (1.0 + t.abs()).powf(-self.sigma) / self.sigma
        } else {
            f64::INFINITY
        }
    }
}

impl Trajectory {
    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TrajectorySample {
        &self.samples[self.samples.len() - 1]
    }

    /// Least-squares fit of `ln|v̇|` against `ln(1+|t|)` over samples with
    /// `|t| ∈ [t_from, t_to]`. Samples with `v̇ = 0` are skipped; `None` if
    /// fewer than two remain.
    pub fn fit_acceleration_tail(&self, t_from: f64, t_to: f64) -> Option<PowerLawFit> {
        let points: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|s| s.t.abs() >= t_from && s.t.abs() <= t_to)
            .filter_map(|s| {
                let a = s.v_dot().norm();
                (a > 0.0).then(|| ((1.0 + s.t.abs()).ln(), a.ln()))
            })
            .collect();
        if points.len() < 2 {
            return None;
        }
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx <= 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        Some(PowerLawFit {
            c: intercept.exp(),
            exponent: slope,
            sigma: -1.0 - slope,
            t_from,
            t_to,
            samples: points.len(),
        })
    }

    pub fn max_acceleration(&self) -> f64 {
        self.samples.iter().map(|s| s.v_dot().norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub particle: ParticleState,
    pub fields: SpectralFieldPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticVelocity {
    pub v: [f64; 3],
    /// Remaining velocity change past the end of the run, from the fitted
    /// acceleration tail; zero when the particle never accelerated.
    pub error_bound: f64,
    pub fit: Option<PowerLawFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationDrift {
    /// `max_t |H(t) − H(0)| / |H(0)|`, `H = mγ + field energy`.
    pub energy: f64,
    /// `max_t |P(t) − P(0)| / |H(0)|`, `P = mγv + ∫ E × B`.
    pub momentum: f64,
    pub initial_energy: f64,
    pub initial_momentum: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub final_state: SystemState,
    pub trajectory: Trajectory,
    pub snapshots: Vec<Snapshot>,
    pub asymptotic: AsymptoticVelocity,
    pub drift: ConservationDrift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateOptions {
    /// Abort when the relative energy drift at a snapshot exceeds this.
    pub energy_drift_bound: f64,
    /// `|t|` window for the acceleration fit; the last three quarters of the
    /// run if `None`. Clipped to the run.
    pub fit_window: Option<[f64; 2]>,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            energy_drift_bound: 1e-2,
            fit_window: None,
        }
    }
}

pub fn simulate(
    initial: &SystemState,
    grid: &KGrid,
    model: &ChargeModel,
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> Result<SimulationRun> {
    simulate_with(initial, grid, model, t_final, dt, sample_every, &SimulateOptions::default())
}

fn total_energy_momentum(state: &SystemState, grid: &KGrid, m: f64) -> Result<(f64, Real3)> {
    let f = functionals(&state.fields, grid)?;
    let particle = &state.particle;
    Ok((
        m * particle.gamma() + f.energy,
        particle.momentum(m) + Real3::from(f.momentum),
    ))
}

/// Integrates from `initial.t` over a duration `t_final` (same sign as `dt`).
pub fn simulate_with(
    initial: &SystemState,
    grid: &KGrid,
    model: &ChargeModel,
    t_final: f64,
    dt: f64,
    sample_every: usize,
    options: &SimulateOptions,
) -> Result<SimulationRun> {
    if dt == 0.0 || !dt.is_finite() || !t_final.is_finite() {
        return Err(Error::InvalidParameter(format!("dt = {dt}, t_final = {t_final}")));
    }
    if t_final.abs() < dt.abs() || t_final * dt < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "t_final = {t_final} and dt = {dt} must share a sign with |t_final| >= |dt|"
        )));
    }
    if sample_every == 0 {
        return Err(Error::InvalidParameter("sample_every must be positive".into()));
    }
    let steps_f = t_final / dt;
    let steps = steps_f.round() as usize;
    if (steps_f - steps as f64).abs() > 1e-9 * steps_f.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} does not divide t_final = {t_final}"
        )));
    }
    initial.fields.check_shape(grid)?;
    check_subluminal(&initial.particle.v)?;

    let m = model.m();
    let mut engine = Engine::new(grid, model);
    let half = FreeRotation::new(grid, 0.5 * dt);
    let mut y = engine.to_dynamical(initial);
    let start = engine.to_state(&y, initial.t);
    let (h0, p0) = total_energy_momentum(&start, grid, m)?;
    let mut drift = ConservationDrift {
        energy: 0.0,
        momentum: 0.0,
        initial_energy: h0,
        initial_momentum: [p0.x, p0.y, p0.z],
    };
    let mut snapshots = vec![Snapshot {
        t: start.t,
        particle: start.particle,
        fields: start.fields,
    }];
    let mut samples = Vec::with_capacity(steps + 1);
    let record = |t: f64, y: &Dynamical, force: &Real3| {
        let v = velocity_from_momentum(&y.p, m);
        let a = acceleration(&v, force, m);
        TrajectorySample {
            t,
            q: [y.q.x, y.q.y, y.q.z],
            v: [v.x, v.y, v.z],
            v_dot: [a.x, a.y, a.z],
        }
    };

    for i in 0..steps {
        let t = initial.t + dt * i as f64;
        let (next, force) = engine.lawson_step(&y, dt, &half);
        samples.push(record(t, &y, &force));
        check_step(&next, m)?;
        y = next;
        let done = i + 1 == steps;
        if (i + 1) % sample_every == 0 || done {
            let t_next = initial.t + dt * (i + 1) as f64;
            let state = engine.to_state(&y, t_next);
            let (h, p) = total_energy_momentum(&state, grid, m)?;
            drift.energy = drift.energy.max((h - h0).abs() / h0.abs());
            drift.momentum = drift.momentum.max((p - p0).norm() / h0.abs());
            if drift.energy > options.energy_drift_bound {
                return Err(Error::EnergyDrift {
                    drift: drift.energy,
                    bound: options.energy_drift_bound,
                    time: t_next,
                });
            }
            snapshots.push(Snapshot {
                t: t_next,
                particle: state.particle,
                fields: state.fields,
            });
        }
    }
    let t_end = initial.t + t_final;
    let final_force = engine.force_at(&y);
    samples.push(record(t_end, &y, &final_force));
    if dt < 0.0 {
        samples.reverse();
    }
    let trajectory = Trajectory {
        samples,
        spacing: dt.abs(),
    };
    let final_snapshot = snapshots.last().expect("final snapshot recorded");
    let final_state = SystemState {
        fields: final_snapshot.fields.clone(),
        particle: final_snapshot.particle,
        t: t_end,
    };
    let asymptotic = asymptotic_velocity(&trajectory, &final_state.particle, initial.t, t_end, options.fit_window);
    Ok(SimulationRun {
        final_state,
        trajectory,
        snapshots,
        asymptotic,
        drift,
    })
}

/// `v(t_end)` with a bound from a power-law fit of `|v̇|`.
fn asymptotic_velocity(
    traj: &Trajectory,
    particle: &ParticleState,
    t_start: f64,
    t_end: f64,
    window: Option<[f64; 2]>,
) -> AsymptoticVelocity {
    let v = [particle.v.x, particle.v.y, particle.v.z];
    if traj.max_acceleration() == 0.0 {
        return AsymptoticVelocity {
            v,
            error_bound: 0.0,
            fit: None,
        };
    }
    let span = (t_end - t_start).abs();
    let (lo, hi) = (t_start.abs().min(t_end.abs()), t_start.abs().max(t_end.abs()));
    let [from, to] = window.unwrap_or([lo + 0.25 * span, hi]);
    let fit = traj.fit_acceleration_tail(from.max(lo), to.min(hi));
    AsymptoticVelocity {
        v,
        error_bound: fit.map_or(f64::INFINITY, |f| f.tail_integral(t_end)),
        fit,
    }
}

/// Largest per-node Gauss-law residual `|ik·Ê − eφ̂ e^{−ik·q}| / |eφ̂|`, and
/// largest `|k̂·B̂|`.
pub fn constraint_residuals(state: &SystemState, grid: &KGrid, model: &ChargeModel) -> (f64, f64) {
    let q = state.particle.q;
    let mut gauss: f64 = 0.0;
    for r in 0..grid.n_radial() {
        let k = grid.radial_nodes()[r];
        let rho = model.e() * model.phi_hat(k);
        if rho == 0.0 {
            continue;
        }
        for d in 0..grid.n_directions() {
            let n = grid.node(r, d);
            let k_vec = grid.directions()[d] * k;
            let lhs = I * crate::vector::rdot(&k_vec, &state.fields.e_hat[n]);
            let rhs = Complex64::from_polar(rho, -k_vec.dot(&q));
            gauss = gauss.max((lhs - rhs).norm() / rho.abs());
        }
    }
    (gauss, state.fields.magnetic_divergence(grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_kgrid;

    #[test]
    fn particle_momentum_round_trip() {
        let p = ParticleState::new(Real3::zeros(), Real3::new(0.3, -0.4, 0.5)).unwrap();
        let back = ParticleState::from_momentum(p.q, p.momentum(2.0), 2.0);
        assert!((back.v - p.v).norm() < 1e-15);
        assert!(ParticleState::new(Real3::zeros(), Real3::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn acceleration_is_parallel_force_over_gamma_cubed_mass() {
        let v = Real3::new(0.0, 0.0, 0.6);
        let a = acceleration(&v, &Real3::new(0.0, 0.0, 1.0), 1.0);
        assert!((a.z - 0.8f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn rest_soliton_feels_no_field() {
        let g = build_kgrid(8, 1e-2, 6.0, 4, 4).unwrap();
        let model = ChargeModel::new(0.4, 1.0, 1.0).unwrap();
        let s = SystemState::soliton(&g, &model, Real3::new(0.1, 0.2, 0.3), Real3::zeros()).unwrap();
        let (e, b) = smeared_fields_at_particle(&s, &g, &model).unwrap();
        assert!(e.norm() < 1e-16);
        assert_eq!(b, Real3::zeros());
    }

    #[test]
    fn rejects_zero_time_step_and_bad_durations() {
        let g = build_kgrid(4, 1e-2, 6.0, 2, 2).unwrap();
        let model = ChargeModel::new(0.1, 1.0, 1.0).unwrap();
        let s = SystemState::soliton(&g, &model, Real3::zeros(), Real3::zeros()).unwrap();
        assert!(step(&s, &g, &model, 0.0).is_err());
        assert!(simulate(&s, &g, &model, 1.0, -0.1, 1).is_err());
        assert!(simulate(&s, &g, &model, 0.05, 0.1, 1).is_err());
        assert!(simulate(&s, &g, &model, 1.0, 0.3, 1).is_err());
        assert!(simulate(&s, &g, &model, 1.0, 0.1, 0).is_err());
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let samples = (0..200)
            .map(|i| {
                let t = i as f64 * 0.2;
                TrajectorySample {
                    t,
                    q: [0.0; 3],
                    v: [0.0; 3],
                    v_dot: [0.0, 3.0 * (1.0 + t).powf(-2.5), 0.0],
                }
            })
            .collect();
        let traj = Trajectory { samples, spacing: 0.2 };
        let fit = traj.fit_acceleration_tail(5.0, 40.0).unwrap();
        assert!((fit.exponent + 2.5).abs() < 1e-12);
        assert!((fit.c - 3.0).abs() < 1e-10);
        assert!((fit.sigma - 1.5).abs() < 1e-12);
    }
}
