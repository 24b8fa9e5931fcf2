//! Scenario pipeline: simulation, scattering, observables, artifacts and the
//! acceptance profile.
//!
//! Every number in `report.json` is also written to the artifact named next
//! to it. Wall-clock timings go to `timings.json` so the report itself is
//! reproducible byte for byte.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::coherent::{ir_match_check, scattered_ir_closed_form, spiral_directions, CoherentProfile, CoherentReport};
use crate::dynamics::{
    constraint_residuals, gauss_longitudinal, simulate_with, soliton_on_grid, step, ConservationDrift, PowerLawFit, SimulateOptions,
    SimulationRun, Snapshot, SystemState,
};
use crate::field::{enforce_hermitian, SpectralFieldPair};
use crate::grid::KGrid;
use crate::io::{read_csv, read_json, read_trajectory, write_csv, write_field, write_json, write_trajectory};
use crate::matter::{ir_limit_parts, ChargeModel};
use crate::observables::{
    check_ir_conservation, ir_extract, rest_start_transverse_residual, soft_photon_residual, IrConservationReport,
    SoftPhotonReport,
};
use crate::pulse::make_pulse;
use crate::scattering::{deviation, scattered_field, Direction, ScatterResult};
use crate::scenario::{steps_for, AcceptanceProfile, Scenario, SpatialParams};
use crate::spatial::{spatial_tail, total_flux, SpatialTail};
use crate::vector::{complexify, max_abs_diff, norm_sqr, transverse, Complex3, Real3};
use crate::{Error, Result};

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";

/// Which parts of the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Plan {
    pub simulate: bool,
    pub scatter: bool,
    pub conservation: bool,
    pub soft_photon: bool,
    pub coherent: bool,
    pub spatial: bool,
    pub structural: bool,
}

impl Plan {
    pub fn full() -> Self {
        Self {
            simulate: true,
            scatter: true,
            conservation: true,
            soft_photon: true,
            coherent: true,
            spatial: true,
            structural: true,
        }
    }

    fn normalized(mut self) -> Self {
        if self.soft_photon {
            self.scatter = true;
        }
        if self.scatter || self.conservation || self.spatial {
            self.simulate = true;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
    pub schema: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub direction: String,
    pub t_end: f64,
    pub v_final: [f64; 3],
    pub asymptotic_error_bound: f64,
    pub max_acceleration: f64,
    pub acceleration_fit: Option<PowerLawFit>,
    pub drift: ConservationDrift,
    pub snapshots: usize,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub dt_coarse: f64,
    pub dt_fine: f64,
    pub coarse: ConservationDrift,
    pub fine: ConservationDrift,
    pub ratio_energy: f64,
    pub ratio_momentum: f64,
    /// Ratio of `hypot(energy drift, momentum drift)`.
    pub ratio_combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationSummary {
    pub scaling: ScalingCheck,
    pub ir: IrConservationReport,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterSummary {
    pub direction: String,
    pub t_end: f64,
    pub tail_bound: f64,
    pub tail_fit: Option<PowerLawFit>,
    pub z_sc_norm: f64,
    pub convergence_series: Vec<(f64, f64)>,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorSummary {
    pub relative_residual: f64,
    pub rhs_norm: f64,
    pub budget: f64,
    pub budget_extrapolation: f64,
    pub budget_quadrature: f64,
    pub budget_tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftPhotonSummary {
    pub v_plus: [f64; 3],
    pub v_minus: [f64; 3],
    pub electric: SectorSummary,
    pub magnetic: SectorSummary,
    pub rest_start_electric: f64,
    pub rest_start_magnetic: f64,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentSummary {
    pub v_inf: [f64; 3],
    pub times: Vec<f64>,
    pub max_residual: Vec<f64>,
    /// Largest change of the limits between the first and any later time.
    pub time_dependence: f64,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialSummary {
    pub times: Vec<f64>,
    /// `max_x̂ |𝔈(x̂,t) − 𝔈(x̂,0)| / |𝔈(x̂,0)|` per time.
    pub drift: Vec<f64>,
    /// `∮ n·𝔈 dΩ` per time.
    pub flux: Vec<f64>,
    pub flux_error: Vec<f64>,
    pub under_resolved_radii: Vec<f64>,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralSummary {
    pub stationarity_v: [f64; 3],
    pub stationarity_t: f64,
    pub stationarity_velocity: f64,
    pub stationarity_field: f64,
    pub continuity_steps: usize,
    /// Longitudinal leakage of the evolved fields per step:
    /// `max(|k̂·Ê − k̂·Ê_∥(q)| / max|Ê|, |k̂·B̂| / max|B̂|)`.
    pub continuity: f64,
    /// Per-node `|ik·Ê − eφ̂e^{−ik·q}| / |eφ̂|`, for reference.
    pub gauss_per_node: f64,
    pub ir_extraction: f64,
    pub transverse_identity: f64,
    pub artifact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub forward: Option<RunSummary>,
    pub backward: Option<RunSummary>,
    pub conservation: Option<ConservationSummary>,
    pub scatter_plus: Option<ScatterSummary>,
    pub scatter_minus: Option<ScatterSummary>,
    pub soft_photon: Option<SoftPhotonSummary>,
    pub coherent: Option<CoherentSummary>,
    pub spatial: Option<SpatialSummary>,
    pub structural: Option<StructuralSummary>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

struct Clock {
    timings: Timings,
}

impl Clock {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.timings.stages.push((name.to_string(), start.elapsed().as_secs_f64()));
        log::info!("{name}: {:.2}s", start.elapsed().as_secs_f64());
        Ok(out)
    }
}

/// Soliton at `(q0, v0)` plus the Hermitian-symmetrized pulse, if any.
pub fn initial_state(scenario: &Scenario, grid: &KGrid, model: &ChargeModel) -> Result<SystemState> {
    let state = SystemState::soliton(grid, model, scenario.q0(), scenario.v0())?;
    match &scenario.initial.pulse {
        Some(p) => {
            let pulse = make_pulse(grid, p).map_err(|e| Error::config("initial.pulse", e.to_string()))?;
            state.with_radiation(&enforce_hermitian(&pulse, grid))
        }
        None => Ok(state),
    }
}

fn options(scenario: &Scenario) -> SimulateOptions {
    SimulateOptions {
        energy_drift_bound: scenario.run.energy_drift_abort,
        fit_window: Some(scenario.observables.fit_window),
    }
}

fn summarize_run(run: &SimulationRun, label: &str, artifact: &str) -> RunSummary {
    RunSummary {
        direction: label.to_string(),
        t_end: run.final_state.t,
        v_final: run.asymptotic.v,
        asymptotic_error_bound: run.asymptotic.error_bound,
        max_acceleration: run.trajectory.max_acceleration(),
        acceleration_fit: run.asymptotic.fit,
        drift: run.drift,
        snapshots: run.snapshots.len(),
        artifact: artifact.to_string(),
    }
}

fn summarize_scatter(sc: &ScatterResult, grid: &KGrid, artifact: &str) -> ScatterSummary {
    ScatterSummary {
        direction: sc.direction.label().to_string(),
        t_end: sc.t_end,
        tail_bound: sc.tail_bound,
        tail_fit: sc.tail_fit,
        z_sc_norm: sc.z_sc.l2_norm(grid),
        convergence_series: sc.convergence_series.clone(),
        artifact: artifact.to_string(),
    }
}

fn sector(s: &crate::observables::SectorBalance) -> SectorSummary {
    SectorSummary {
        relative_residual: s.relative_residual,
        rhs_norm: s.rhs_norm,
        budget: s.budget(),
        budget_extrapolation: s.budget_extrapolation,
        budget_quadrature: s.budget_quadrature,
        budget_tail: s.budget_tail,
    }
}

#[derive(Serialize)]
struct RunMeta<'a> {
    grid: &'a crate::grid::GridParams,
    charge: &'a crate::matter::ChargeParams,
    dt: f64,
    t_final: f64,
    t_backward: f64,
    sample_every: usize,
    pulse: &'a Option<crate::pulse::PulseParams>,
    v0: [f64; 3],
    q0: [f64; 3],
}

#[derive(Serialize)]
struct ScatterArtifact<'a> {
    direction: &'a str,
    t_end: f64,
    tail_bound: f64,
    tail_fit: Option<PowerLawFit>,
    ir_quadrature_error: &'a [(f64, f64)],
    convergence_series: &'a [(f64, f64)],
    field_file: String,
}

/// Drift of `hypot(energy, momentum)`; `coarse / fine` ratios.
fn scaling_check(scenario: &Scenario, initial: &SystemState, grid: &KGrid, model: &ChargeModel) -> Result<ScalingCheck> {
    let [coarse_dt, fine_dt] = scenario.run.dt_pair;
    let run = |dt: f64| -> Result<ConservationDrift> {
        let steps = steps_for(scenario.run.t_final, dt).expect("validated");
        let cadence = (scenario.run.dt * scenario.run.sample_every as f64 / dt).round().max(1.0) as usize;
        Ok(simulate_with(initial, grid, model, steps as f64 * dt, dt, cadence.min(steps), &options(scenario))?.drift)
    };
    let coarse = run(coarse_dt)?;
    let fine = run(fine_dt)?;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
    Ok(ScalingCheck {
        dt_coarse: coarse_dt,
        dt_fine: fine_dt,
        ratio_energy: ratio(coarse.energy, fine.energy),
        ratio_momentum: ratio(coarse.momentum, fine.momentum),
        ratio_combined: ratio(coarse.energy.hypot(coarse.momentum), fine.energy.hypot(fine.momentum)),
        coarse,
        fine,
    })
}

/// Largest per-node `|F − F_closed| / |F_closed|` over nodes where the closed
/// form exceeds `1e-8` of its maximum.
fn relative_node_deviation(a: &SpectralFieldPair, b: &SpectralFieldPair) -> f64 {
    let mags: Vec<f64> = (0..b.len())
        .map(|n| (norm_sqr(&b.e_hat[n]) + norm_sqr(&b.b_hat[n])).sqrt())
        .collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    (0..b.len())
        .filter(|&n| mags[n] > 1e-8 * peak)
        .map(|n| (norm_sqr(&(a.e_hat[n] - b.e_hat[n])) + norm_sqr(&(a.b_hat[n] - b.b_hat[n]))).sqrt() / mags[n])
        .fold(0.0, f64::max)
}

const CONTINUITY_STEPS: usize = 50;

fn structural(scenario: &Scenario, grid: &KGrid, model: &ChargeModel) -> Result<StructuralSummary> {
    let obs = &scenario.observables;
    let v0 = Real3::from(obs.stationarity_v);
    let sol = SystemState::soliton(grid, model, Real3::zeros(), v0)?;
    let dt = scenario.run.dt;
    let steps = steps_for(obs.stationarity_t, dt).expect("validated");
    let run = simulate_with(&sol, grid, model, steps as f64 * dt, dt, steps, &options(scenario))?;
    let velocity = run
        .trajectory
        .samples
        .iter()
        .map(|s| (s.v() - v0).norm())
        .fold(0.0, f64::max);
    let moved = crate::dynamics::ParticleState::new(v0 * run.final_state.t, v0)?;
    let field = relative_node_deviation(&run.final_state.fields, &soliton_on_grid(grid, model, &moved));

    let mut state = initial_state(scenario, grid, model)?;
    let peak = |f: &[Complex3]| f.iter().map(|z| norm_sqr(z).sqrt()).fold(f64::MIN_POSITIVE, f64::max);
    let (mut continuity, mut gauss_per_node) = (0.0f64, 0.0f64);
    for _ in 0..CONTINUITY_STEPS {
        state = step(&state, grid, model, dt)?;
        let (gauss, div_b) = constraint_residuals(&state, grid, model);
        let slaved = gauss_longitudinal(grid, model, &state.particle.q);
        let leak = (0..grid.n_nodes())
            .map(|n| {
                let k_hat = complexify(grid.k_hat(n));
                (k_hat.dot(&(state.fields.e_hat[n] - slaved[n]))).norm()
            })
            .fold(0.0, f64::max);
        continuity = continuity
            .max(leak / peak(&state.fields.e_hat))
            .max(div_b / peak(&state.fields.b_hat));
        gauss_per_node = gauss_per_node.max(gauss);
    }

    let mut ir_extraction: f64 = 0.0;
    for axis in [Real3::z(), Real3::new(1.0, 1.0, 1.0).normalize()] {
        for i in 0..=7 {
            let v = axis * (0.1 * i as f64);
            let particle = crate::dynamics::ParticleState::new(Real3::zeros(), v)?;
            let field = soliton_on_grid(grid, model, &particle);
            let tail = ir_extract(&field, grid, &obs.ir)?;
            for (d, k_hat) in grid.directions().iter().enumerate() {
                let (e, _) = ir_limit_parts(k_hat, &v, model.e());
                ir_extraction = ir_extraction.max(max_abs_diff(&tail.e[d], &e) / norm_sqr(&e).sqrt());
            }
        }
    }

    let mut identity: f64 = 0.0;
    for axis in [Real3::z(), Real3::new(1.0, 2.0, 2.0) / 3.0] {
        for i in 1..=9 {
            let v = axis * (0.1 * i as f64);
            for k_hat in spiral_directions(16) {
                let (e, _) = ir_limit_parts(&k_hat, &v, model.e());
                let lhs = -transverse(&k_hat, &e);
                let (rhs, _) = scattered_ir_closed_form(&k_hat, &v, model.e());
                identity = identity.max(max_abs_diff(&lhs, &rhs));
            }
        }
    }
    Ok(StructuralSummary {
        stationarity_v: obs.stationarity_v,
        stationarity_t: obs.stationarity_t,
        stationarity_velocity: velocity,
        stationarity_field: field,
        continuity_steps: CONTINUITY_STEPS,
        continuity,
        gauss_per_node,
        ir_extraction,
        transverse_identity: identity,
        artifact: "structural.json".into(),
    })
}

fn coherent(scenario: &Scenario, model: &ChargeModel, out: &Path) -> Result<CoherentSummary> {
    let co = &scenario.observables.coherent;
    let profile = CoherentProfile::new(Real3::from(co.v_inf), model.clone())?;
    let dirs = spiral_directions(co.directions);
    let reports = co
        .times
        .iter()
        .map(|&t| ir_match_check(&profile, &dirs, t))
        .collect::<Result<Vec<CoherentReport>>>()?;
    let mut time_dependence: f64 = 0.0;
    for r in &reports[1..] {
        for (a, b) in reports[0].rows.iter().zip(&r.rows) {
            time_dependence = time_dependence
                .max(max_abs_diff(&a.limit_e, &b.limit_e))
                .max(max_abs_diff(&a.limit_b, &b.limit_b));
        }
    }
    write_json(&out.join("coherent.json"), &reports)?;
    #[derive(Serialize)]
    struct Row {
        t: f64,
        kx: f64,
        ky: f64,
        kz: f64,
        residual_e: f64,
        residual_b: f64,
        extrapolation_error: f64,
    }
    let rows = reports.iter().flat_map(|r| {
        r.rows.iter().map(move |m| Row {
            t: r.t,
            kx: m.direction.x,
            ky: m.direction.y,
            kz: m.direction.z,
            residual_e: m.residual_e,
            residual_b: m.residual_b,
            extrapolation_error: m.extrapolation_error,
        })
    });
    write_csv(&out.join("coherent.csv"), rows)?;
    Ok(CoherentSummary {
        v_inf: co.v_inf,
        times: co.times.clone(),
        max_residual: reports.iter().map(|r| r.max_residual).collect(),
        time_dependence,
        artifact: "coherent.json".into(),
    })
}

/// Spatial settings used when the scenario has none.
pub fn default_spatial() -> SpatialParams {
    SpatialParams {
        directions: vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ],
        radii: vec![40.0, 80.0, 160.0],
        times: vec![0.0, 10.0],
    }
}

fn spatial(
    scenario: &Scenario,
    snapshots: &[Snapshot],
    grid: &KGrid,
    model: &ChargeModel,
    out: &Path,
) -> Result<SpatialSummary> {
    let params = scenario.observables.spatial.clone().unwrap_or_else(default_spatial);
    let dirs: Vec<Real3> = params.directions.iter().map(|d| Real3::from(*d).normalize()).collect();
    let mut tails: Vec<SpatialTail> = Vec::new();
    let mut flux = Vec::new();
    let mut flux_error = Vec::new();
    let mut times = vec![0.0];
    times.extend(params.times.iter().copied().filter(|&t| t != 0.0));
    for &t in &times {
        let snap = snapshots
            .iter()
            .find(|s| (s.t - t).abs() < 1e-9)
            .ok_or_else(|| Error::config("observables.spatial.times", format!("no snapshot at t = {t}")))?;
        let z = deviation(snap, model, grid)?;
        let ir = &scenario.observables.ir;
        let mut tail = spatial_tail(&z, &snap.particle, model, grid, ir, &dirs, &params.radii)?;
        tail.label = format!("t={t}");
        let sphere = spatial_tail(&z, &snap.particle, model, grid, ir, grid.directions(), &params.radii)?;
        let (f, fe) = total_flux(&sphere, grid)?;
        flux.push(f);
        flux_error.push(fe);
        tails.push(tail);
    }
    let drift = tails
        .iter()
        .map(|t| {
            t.e.iter()
                .zip(&tails[0].e)
                .map(|(a, b)| (a - b).norm() / b.norm())
                .fold(0.0, f64::max)
        })
        .collect();
    write_json(&out.join("spatial_tail.json"), &tails)?;
    Ok(SpatialSummary {
        times,
        drift,
        flux,
        flux_error,
        under_resolved_radii: tails[0].under_resolved.clone(),
        artifact: "spatial_tail.json".into(),
    })
}

fn check(criterion: u8, name: &str, value: f64, threshold: String, pass: bool) -> Check {
    Check {
        criterion,
        name: name.to_string(),
        value,
        threshold,
        pass: pass && !value.is_nan(),
    }
}

/// Applies the acceptance thresholds to whatever sections the report holds.
pub fn evaluate(report: &RunReport, profile: &AcceptanceProfile) -> Vec<Check> {
    let p = profile;
    let mut out = Vec::new();
    if let Some(s) = &report.structural {
        out.push(check(1, "stationarity velocity", s.stationarity_velocity, format!("< {:e}", p.stationarity_velocity), s.stationarity_velocity < p.stationarity_velocity));
        out.push(check(1, "stationarity field", s.stationarity_field, format!("< {:e}", p.stationarity_field), s.stationarity_field < p.stationarity_field));
        out.push(check(2, "continuity per step", s.continuity, format!("< {:e}", p.continuity), s.continuity < p.continuity));
    }
    if let (Some(f), Some(b)) = (&report.forward, &report.backward) {
        let drift = [f.drift.energy, f.drift.momentum, b.drift.energy, b.drift.momentum]
            .into_iter()
            .fold(0.0, f64::max);
        out.push(check(3, "energy/momentum drift", drift, format!("< {:e}", p.conservation_drift), drift < p.conservation_drift));
        let exponent = f.acceleration_fit.map_or(f64::NAN, |fit| fit.exponent);
        out.push(check(8, "acceleration tail exponent", exponent, format!("<= {}", p.acceleration_exponent), exponent <= p.acceleration_exponent));
    }
    if let Some(c) = &report.conservation {
        let [lo, hi] = p.scaling_ratio;
        let r = c.scaling.ratio_combined;
        out.push(check(3, "drift refinement ratio", r, format!("in [{lo}, {hi}]"), (lo..=hi).contains(&r)));
        let n = c.ir.samples.len() as f64;
        out.push(check(4, "snapshots", n, format!(">= {}", p.min_snapshots), n >= p.min_snapshots as f64));
        out.push(check(4, "transverse IR drift", c.ir.max_transverse, format!("< {:e}", p.ir_transverse_drift), c.ir.max_transverse < p.ir_transverse_drift));
        out.push(check(4, "longitudinal IR drift", c.ir.max_longitudinal, format!("< {:e}", p.ir_longitudinal_drift), c.ir.max_longitudinal < p.ir_longitudinal_drift));
    }
    if let Some(sp) = &report.soft_photon {
        for (name, s) in [("soft-photon electric", &sp.electric), ("soft-photon magnetic", &sp.magnetic)] {
            out.push(check(5, name, s.relative_residual, format!("< {:e}", p.soft_photon), s.relative_residual < p.soft_photon));
            out.push(check(5, &format!("{name} within budget"), s.relative_residual - s.budget, "<= 0".into(), s.budget.is_finite() && s.relative_residual <= s.budget));
        }
        out.push(check(6, "rest-start transverse electric", sp.rest_start_electric, format!("< {:e}", p.soft_photon), sp.rest_start_electric < p.soft_photon));
        out.push(check(6, "rest-start transverse magnetic", sp.rest_start_magnetic, format!("< {:e}", p.soft_photon), sp.rest_start_magnetic < p.soft_photon));
    }
    if let Some(s) = &report.structural {
        out.push(check(6, "transverse identity sweep", s.transverse_identity, format!("< {:e}", p.transverse_identity), s.transverse_identity < p.transverse_identity));
    }
    if let Some(sc) = &report.scatter_plus {
        let series = &sc.convergence_series;
        let at = |t: f64| series.iter().find(|(s, _)| (s - t).abs() < 1e-9).map(|x| x.1);
        let early = (0.25 * sc.t_end).abs();
        let ratio = match (at(sc.t_end), at(early)) {
            (Some(end), Some(start)) if start > 0.0 => end / start,
            _ => f64::NAN,
        };
        out.push(check(7, "wave-operator deviation ratio", ratio, format!("< {}", p.wave_operator_ratio), ratio < p.wave_operator_ratio));
        let tail: Vec<f64> = series.iter().rev().take(4).map(|x| x.1).collect();
        let monotone = tail.len() == 4 && tail.windows(2).all(|w| w[0] < w[1]);
        out.push(check(7, "monotone over last 4 checkpoints", monotone as u8 as f64, "= 1".into(), monotone));
    }
    if let Some(s) = &report.structural {
        out.push(check(9, "IR extraction vs closed form", s.ir_extraction, format!("< {:e}", p.ir_extraction), s.ir_extraction < p.ir_extraction));
    }
    if let Some(c) = &report.coherent {
        let worst = c.max_residual.iter().cloned().fold(0.0, f64::max);
        out.push(check(10, "coherent residual", worst, format!("< {:e}", p.coherent), worst < p.coherent));
        out.push(check(10, "coherent time dependence", c.time_dependence, format!("< {:e}", p.coherent), c.time_dependence < p.coherent));
    }
    if let Some(s) = &report.spatial {
        let drift = s.drift.iter().cloned().fold(0.0, f64::max);
        out.push(check(11, "spatial tail drift", drift, format!("< {:e}", p.spatial_drift), drift < p.spatial_drift));
    }
    out
}

/// Runs the planned stages, writes every artifact into `out`, and returns
/// the report (also written as `report.json`).
pub fn run_scenario(scenario: &Scenario, plan: Plan, out: &Path) -> Result<RunReport> {
    scenario.validate()?;
    let plan = plan.normalized();
    std::fs::create_dir_all(out)?;
    let grid = scenario.grid()?;
    let model = scenario.model()?;
    let mut clock = Clock {
        timings: Timings::default(),
    };
    let mut artifacts: Vec<String> = Vec::new();
    let mut report = RunReport {
        provenance: Provenance {
            config_hash: scenario.hash(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            schema: scenario.schema,
        },
        forward: None,
        backward: None,
        conservation: None,
        scatter_plus: None,
        scatter_minus: None,
        soft_photon: None,
        coherent: None,
        spatial: None,
        structural: None,
        checks: Vec::new(),
        artifacts: Vec::new(),
    };
    std::fs::write(out.join("scenario.toml"), scenario.to_toml_string())?;
    artifacts.push("scenario.toml".into());

    let mut sims: Option<(SystemState, SimulationRun, SimulationRun)> = None;
    if plan.simulate {
        let initial = initial_state(scenario, &grid, &model)?;
        let run = &scenario.run;
        let fw = clock.time("simulate forward", || {
            simulate_with(&initial, &grid, &model, run.t_final, run.dt, run.sample_every, &options(scenario))
        })?;
        let bw = clock.time("simulate backward", || {
            simulate_with(&initial, &grid, &model, -run.t_backward, -run.dt, run.sample_every, &options(scenario))
        })?;
        write_trajectory(&out.join("trajectory_forward.csv"), &fw.trajectory)?;
        write_trajectory(&out.join("trajectory_backward.csv"), &bw.trajectory)?;
        write_json(
            &out.join("run_meta.json"),
            &RunMeta {
                grid: &scenario.grid,
                charge: &scenario.charge,
                dt: run.dt,
                t_final: run.t_final,
                t_backward: run.t_backward,
                sample_every: run.sample_every,
                pulse: &scenario.initial.pulse,
                v0: scenario.initial.v0,
                q0: scenario.initial.q0,
            },
        )?;
        write_field(&out.join("fields_t0.field"), &fw.snapshots[0].fields, &grid, "t=0")?;
        write_field(&out.join("fields_forward_final.field"), &fw.final_state.fields, &grid, &format!("t={}", fw.final_state.t))?;
        write_field(&out.join("fields_backward_final.field"), &bw.final_state.fields, &grid, &format!("t={}", bw.final_state.t))?;
        for name in [
            "trajectory_forward.csv",
            "trajectory_backward.csv",
            "run_meta.json",
            "fields_t0.field",
            "fields_forward_final.field",
            "fields_backward_final.field",
        ] {
            artifacts.push(name.into());
        }
        report.forward = Some(summarize_run(&fw, "+", "trajectory_forward.csv"));
        report.backward = Some(summarize_run(&bw, "-", "trajectory_backward.csv"));
        write_json(&out.join("runs.json"), &[&report.forward, &report.backward])?;
        artifacts.push("runs.json".into());
        sims = Some((initial, fw, bw));
    }

    if plan.conservation {
        let (initial, fw, _) = sims.as_ref().expect("simulated");
        let scaling = clock.time("dt scaling", || scaling_check(scenario, initial, &grid, &model))?;
        let ir = clock.time("ir conservation", || {
            check_ir_conservation(&fw.snapshots, &model, &grid, &scenario.observables.ir)
        })?;
        let summary = ConservationSummary {
            scaling,
            ir,
            artifact: "conservation.json".into(),
        };
        write_json(&out.join("conservation.json"), &summary)?;
        write_csv(&out.join("ir_drift.csv"), summary.ir.samples.iter())?;
        artifacts.push("conservation.json".into());
        artifacts.push("ir_drift.csv".into());
        report.conservation = Some(summary);
    }

    let mut scattered: Option<(ScatterResult, ScatterResult)> = None;
    if plan.scatter {
        let (_, fw, bw) = sims.as_ref().expect("simulated");
        let z0 = deviation(&fw.snapshots[0], &model, &grid)?;
        let (plus, minus) = clock.time("scatter", || {
            let plus = scattered_field(&fw.trajectory, &z0, &model, &grid, Direction::Future)?
                .with_convergence(&fw.snapshots, &model, &grid)?;
            let minus = scattered_field(&bw.trajectory, &z0, &model, &grid, Direction::Past)?
                .with_convergence(&bw.snapshots, &model, &grid)?;
            Ok((plus, minus))
        })?;
        for (sc, tag) in [(&plus, "plus"), (&minus, "minus")] {
            let field_file = format!("z_sc_{tag}.field");
            write_field(&out.join(&field_file), &sc.z_sc, &grid, &format!("z_sc {}", sc.direction.label()))?;
            let json = format!("scatter_{tag}.json");
            write_json(
                &out.join(&json),
                &ScatterArtifact {
                    direction: sc.direction.label(),
                    t_end: sc.t_end,
                    tail_bound: sc.tail_bound,
                    tail_fit: sc.tail_fit,
                    ir_quadrature_error: &sc.ir_quadrature_error,
                    convergence_series: &sc.convergence_series,
                    field_file: field_file.clone(),
                },
            )?;
            artifacts.push(field_file);
            artifacts.push(json);
        }
        report.scatter_plus = Some(summarize_scatter(&plus, &grid, "scatter_plus.json"));
        report.scatter_minus = Some(summarize_scatter(&minus, &grid, "scatter_minus.json"));
        scattered = Some((plus, minus));
    }

    if plan.soft_photon {
        let (_, fw, bw) = sims.as_ref().expect("simulated");
        let (plus, minus) = scattered.as_ref().expect("scattered");
        let v_plus = fw.final_state.particle.v;
        let v_minus = bw.final_state.particle.v;
        let ir = &scenario.observables.ir;
        let (sp, rest) = clock.time("soft photon", || {
            let sp = soft_photon_residual(plus, minus, &v_plus, &v_minus, &model, &grid, ir)?;
            let rest = rest_start_transverse_residual(plus, &v_plus, &model, &grid, ir)?;
            Ok((sp, rest))
        })?;
        write_json(&out.join("soft_photon.json"), &sp)?;
        write_soft_photon_csv(&out.join("soft_photon.csv"), &sp)?;
        artifacts.push("soft_photon.json".into());
        artifacts.push("soft_photon.csv".into());
        report.soft_photon = Some(SoftPhotonSummary {
            v_plus: [v_plus.x, v_plus.y, v_plus.z],
            v_minus: [v_minus.x, v_minus.y, v_minus.z],
            electric: sector(&sp.electric),
            magnetic: sector(&sp.magnetic),
            rest_start_electric: rest.0,
            rest_start_magnetic: rest.1,
            artifact: "soft_photon.json".into(),
        });
    }

    if plan.coherent {
        report.coherent = Some(clock.time("coherent", || coherent(scenario, &model, out))?);
        artifacts.push("coherent.json".into());
        artifacts.push("coherent.csv".into());
    }

    if plan.spatial {
        let (_, fw, _) = sims.as_ref().expect("simulated");
        report.spatial = Some(clock.time("spatial tail", || spatial(scenario, &fw.snapshots, &grid, &model, out))?);
        artifacts.push("spatial_tail.json".into());
    }

    if plan.structural {
        let s = clock.time("structural", || structural(scenario, &grid, &model))?;
        write_json(&out.join("structural.json"), &s)?;
        artifacts.push("structural.json".into());
        report.structural = Some(s);
    }

    report.checks = evaluate(&report, &scenario.acceptance);
    if let Some(s) = &report.spatial {
        let e = model.e();
        let worst = s.flux.iter().map(|f| (f - e).abs() / e.abs()).fold(0.0, f64::max);
        let p = scenario.acceptance.flux;
        report.checks.push(check(11, "sphere flux vs charge", worst, format!("< {p:e}"), worst < p));
    }
    report.checks.sort_by_key(|c| c.criterion);
    write_json(&out.join("acceptance.json"), &report.checks)?;
    artifacts.push("acceptance.json".into());

    if plan.simulate {
        clock.time("plot data", || emit_plots_data(out).map(|files| artifacts.extend(files)))?;
    }
    artifacts.sort();
    report.artifacts = artifacts;
    write_json(&out.join(REPORT_FILE), &report)?;
    write_json(&out.join(TIMINGS_FILE), &clock.timings)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoftPhotonRow {
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
    pub residual_e: f64,
    pub residual_b: f64,
    pub rhs_e: f64,
    pub rhs_b: f64,
}

fn write_soft_photon_csv(path: &Path, sp: &SoftPhotonReport) -> Result<()> {
    let rows = sp.directions.iter().enumerate().map(|(d, k)| SoftPhotonRow {
        kx: k.x,
        ky: k.y,
        kz: k.z,
        residual_e: sp.electric.residuals[d],
        residual_b: sp.magnetic.residuals[d],
        rhs_e: norm_sqr(&sp.electric.rhs[d]).sqrt(),
        rhs_b: norm_sqr(&sp.magnetic.rhs[d]).sqrt(),
    });
    write_csv(path, rows)
}

pub fn read_soft_photon_csv(path: &Path) -> Result<Vec<SoftPhotonRow>> {
    read_csv(path)
}

fn required(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if p.exists() {
        Ok(p)
    } else {
        Err(Error::MissingArtifact(p.display().to_string()))
    }
}

/// Plot-ready CSVs from a run directory. Files whose inputs were not produced
/// by the run are skipped, except the trajectory, which is required.
pub fn emit_plots_data(dir: &Path) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let traj = read_trajectory(&required(dir, "trajectory_forward.csv")?)?;
    // non-finite numbers are stored as null, so read loosely
    let runs: serde_json::Value = read_json(&required(dir, "runs.json")?)?;
    let fit = runs[0]["acceleration_fit"]
        .as_object()
        .and_then(|f| Some((f["c"].as_f64()?, f["exponent"].as_f64()?, f["t_from"].as_f64()?, f["t_to"].as_f64()?)));
    #[derive(Serialize)]
    struct Accel {
        t: f64,
        acceleration: f64,
        fit: Option<f64>,
    }
    write_csv(
        &dir.join("plot_acceleration.csv"),
        traj.samples.iter().map(|s| Accel {
            t: s.t,
            acceleration: s.v_dot().norm(),
            fit: fit
                .filter(|&(_, _, from, to)| s.t.abs() >= from && s.t.abs() <= to)
                .map(|(c, exponent, _, _)| c * (1.0 + s.t.abs()).powf(exponent)),
        }),
    )?;
    written.push("plot_acceleration.csv".to_string());

    if dir.join("conservation.json").exists() {
        let c: ConservationSummary = read_json(&dir.join("conservation.json"))?;
        write_csv(&dir.join("plot_ir_drift.csv"), c.ir.samples.iter())?;
        written.push("plot_ir_drift.csv".into());
    }
    if dir.join("soft_photon.csv").exists() {
        #[derive(Serialize)]
        struct Row {
            theta: f64,
            phi: f64,
            residual_e: f64,
            residual_b: f64,
        }
        let rows = read_soft_photon_csv(&dir.join("soft_photon.csv"))?;
        write_csv(
            &dir.join("plot_soft_photon_residual.csv"),
            rows.iter().map(|r| Row {
                theta: r.kz.clamp(-1.0, 1.0).acos(),
                phi: r.ky.atan2(r.kx),
                residual_e: r.residual_e,
                residual_b: r.residual_b,
            }),
        )?;
        written.push("plot_soft_photon_residual.csv".into());
    }
    if dir.join("scatter_plus.json").exists() {
        #[derive(Deserialize)]
        struct Series {
            convergence_series: Vec<(f64, f64)>,
        }
        #[derive(Serialize)]
        struct Row {
            direction: &'static str,
            t: f64,
            deviation: f64,
        }
        let mut rows = Vec::new();
        for (file, label) in [("scatter_plus.json", "+"), ("scatter_minus.json", "-")] {
            let s: Series = read_json(&required(dir, file)?)?;
            rows.extend(s.convergence_series.into_iter().map(|(t, deviation)| Row {
                direction: label,
                t,
                deviation,
            }));
        }
        write_csv(&dir.join("plot_wave_operator.csv"), rows)?;
        written.push("plot_wave_operator.csv".into());
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolitonRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// `ℰ_v` and `ℬ_v` are purely imaginary; their imaginary parts.
    pub ir_e_x: f64,
    pub ir_e_y: f64,
    pub ir_e_z: f64,
    pub ir_b_x: f64,
    pub ir_b_y: f64,
    pub ir_b_z: f64,
    pub tail_x: f64,
    pub tail_y: f64,
    pub tail_z: f64,
    pub flux: f64,
}

/// `ℰ_v`, `ℬ_v` and `𝔈_v` over the grid's direction set.
pub fn soliton_table(model: &ChargeModel, v: &Real3, grid: &KGrid) -> Result<Vec<SolitonRow>> {
    let sol = model.soliton(*v)?;
    Ok(grid
        .directions()
        .iter()
        .map(|n| {
            let (e, b) = sol.ir_limit(n);
            let tail = sol.position_tail(n);
            SolitonRow {
                x: n.x,
                y: n.y,
                z: n.z,
                ir_e_x: e.x.im,
                ir_e_y: e.y.im,
                ir_e_z: e.z.im,
                ir_b_x: b.x.im,
                ir_b_y: b.y.im,
                ir_b_z: b.z.im,
                tail_x: tail.x,
                tail_y: tail.y,
                tail_z: tail.z,
                flux: n.dot(&tail),
            }
        })
        .collect())
}
