//! Infrared tails `ℱ(k̂) = lim_{|k|→0} |k| F̂(k)`, their conservation, and the
//! soft-photon balance between scattered and soliton tails.

use serde::{Deserialize, Serialize};

use crate::dynamics::Snapshot;
use crate::field::SpectralFieldPair;
use crate::grid::KGrid;
use crate::matter::{ir_limit_parts, soliton_vgrad_parts, ChargeModel, FOURIER_NORM};
use crate::quadrature::neville_to_zero;
use crate::scattering::{deviation, ScatterResult};
use crate::vector::{norm_sqr, transverse, Complex3, Real3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrSettings {
    /// Only shells with `|k|` below this enter the extrapolation.
    pub k_ir: f64,
    /// Number of shells used; the extrapolating polynomial has degree
    /// `points − 1`.
    pub points: usize,
}

impl Default for IrSettings {
    fn default() -> Self {
        Self { k_ir: 0.05, points: 4 }
    }
}

/// Per-direction infrared coefficients of both field sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrTail {
    pub label: String,
    pub directions: Vec<Real3>,
    pub e: Vec<Complex3>,
    pub b: Vec<Complex3>,
    pub error_e: Vec<f64>,
    pub error_b: Vec<f64>,
    /// Directions where the extrapolation error exceeds the value.
    pub non_converged: Vec<usize>,
}

impl IrTail {
    /// The closed-form tail of a soliton on the grid's directions.
    pub fn soliton(grid: &KGrid, v: &Real3, e: f64) -> Self {
        let (es, bs) = grid.directions().iter().map(|d| ir_limit_parts(d, v, e)).unzip();
        Self {
            label: format!("soliton({:.6e},{:.6e},{:.6e})", v.x, v.y, v.z),
            directions: grid.directions().to_vec(),
            e: es,
            b: bs,
            error_e: vec![0.0; grid.n_directions()],
            error_b: vec![0.0; grid.n_directions()],
            non_converged: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    fn combine(&self, other: &Self, sign: f64, label: String) -> Self {
        assert_eq!(self.len(), other.len(), "tails over different direction sets");
        let s = num_complex::Complex64::from(sign);
        let mut non_converged: Vec<usize> = self.non_converged.iter().chain(&other.non_converged).copied().collect();
        non_converged.sort_unstable();
        non_converged.dedup();
        Self {
            label,
            directions: self.directions.clone(),
            e: self.e.iter().zip(&other.e).map(|(a, b)| a + b * s).collect(),
            b: self.b.iter().zip(&other.b).map(|(a, b)| a + b * s).collect(),
            error_e: self.error_e.iter().zip(&other.error_e).map(|(a, b)| a + b).collect(),
            error_b: self.error_b.iter().zip(&other.error_b).map(|(a, b)| a + b).collect(),
            non_converged,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0, format!("{}+{}", self.label, other.label))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0, format!("{}-{}", self.label, other.label))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let cc = num_complex::Complex64::from(c);
        Self {
            e: self.e.iter().map(|z| z * cc).collect(),
            b: self.b.iter().map(|z| z * cc).collect(),
            error_e: self.error_e.iter().map(|x| x * c.abs()).collect(),
            error_b: self.error_b.iter().map(|x| x * c.abs()).collect(),
            ..self.clone()
        }
    }
}

/// Extrapolates `|k| (Ê, B̂)` to `|k| = 0` along every grid direction by
/// Neville's scheme over the smallest shells.
pub fn ir_extract(field: &SpectralFieldPair, grid: &KGrid, settings: &IrSettings) -> Result<IrTail> {
    field.check_shape(grid)?;
    let below = grid.radial_nodes().iter().take_while(|&&k| k < settings.k_ir).count();
    if below < 3 || settings.points < 2 {
        return Err(Error::InvalidParameter(format!(
            "infrared extrapolation needs at least 3 shells below k_ir = {} (grid has {below}) and points >= 2",
            settings.k_ir
        )));
    }
    let shells = settings.points.min(below);
    let ks = &grid.radial_nodes()[..shells];
    let n_dir = grid.n_directions();
    let mut tail = IrTail {
        label: String::new(),
        directions: grid.directions().to_vec(),
        e: Vec::with_capacity(n_dir),
        b: Vec::with_capacity(n_dir),
        error_e: Vec::with_capacity(n_dir),
        error_b: Vec::with_capacity(n_dir),
        non_converged: Vec::new(),
    };
    let mut scale: f64 = 0.0;
    for d in 0..n_dir {
        let es: Vec<Complex3> = (0..shells).map(|r| field.e_hat[grid.node(r, d)] * num_complex::Complex64::from(ks[r])).collect();
        let bs: Vec<Complex3> = (0..shells).map(|r| field.b_hat[grid.node(r, d)] * num_complex::Complex64::from(ks[r])).collect();
        for z in es.iter().chain(&bs) {
            scale = scale.max(norm_sqr(z).sqrt());
        }
        let (e, err_e) = extrapolate(ks, &es);
        let (b, err_b) = extrapolate(ks, &bs);
        tail.e.push(e);
        tail.b.push(b);
        tail.error_e.push(err_e);
        tail.error_b.push(err_b);
    }
    let floor = 1e-12 * scale;
    for d in 0..n_dir {
        let bad_e = tail.error_e[d] > floor && tail.error_e[d] > norm_sqr(&tail.e[d]).sqrt();
        let bad_b = tail.error_b[d] > floor && tail.error_b[d] > norm_sqr(&tail.b[d]).sqrt();
        if bad_e || bad_b {
            tail.non_converged.push(d);
        }
    }
    if !tail.non_converged.is_empty() {
        log::info!(
            "infrared extrapolation did not converge along {} of {} directions",
            tail.non_converged.len(),
            n_dir
        );
    }
    Ok(tail)
}

/// Wraps `Complex3` so [`neville_to_zero`] can work on it.
#[derive(Clone, Copy)]
struct Cv(Complex3);

impl std::ops::Add for Cv {
    type Output = Cv;
    fn add(self, o: Cv) -> Cv {
        Cv(self.0 + o.0)
    }
}

impl std::ops::Sub for Cv {
    type Output = Cv;
    fn sub(self, o: Cv) -> Cv {
        Cv(self.0 - o.0)
    }
}

impl std::ops::Mul<f64> for Cv {
    type Output = Cv;
    fn mul(self, c: f64) -> Cv {
        Cv(self.0 * num_complex::Complex64::from(c))
    }
}

fn extrapolate(ks: &[f64], ys: &[Complex3]) -> (Complex3, f64) {
    let wrapped: Vec<Cv> = ys.iter().map(|y| Cv(*y)).collect();
    let diag = neville_to_zero(ks, &wrapped);
    let last = diag[diag.len() - 1].0;
    let prev = diag[diag.len() - 2].0;
    (last, norm_sqr(&(last - prev)).sqrt())
}

/// Infrared tail of the full field at a snapshot: closed-form soliton tail at
/// the snapshot velocity plus the extrapolated tail of the deviation.
pub fn full_field_tail(snapshot: &Snapshot, model: &ChargeModel, grid: &KGrid, settings: &IrSettings) -> Result<IrTail> {
    let z = deviation(snapshot, model, grid)?;
    let mut dev = ir_extract(&z, grid, settings)?;
    dev.label = format!("t={}", snapshot.t);
    let mut tail = IrTail::soliton(grid, &snapshot.particle.v, model.e()).add(&dev);
    tail.label = format!("t={}", snapshot.t);
    Ok(tail)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrDriftSample {
    pub t: f64,
    /// `max_k̂ |P_tr(ℰ(k̂,t) − ℰ(k̂,0))| / |ℰ(k̂,0)|`.
    pub transverse_e: f64,
    /// `max_k̂ |ℬ(k̂,t) − ℬ(k̂,0)| / |ℰ(k̂,0)|`.
    pub magnetic: f64,
    /// `max_k̂ |k̂·(ℰ(k̂,t) − ℰ(k̂,0))|`.
    pub longitudinal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrConservationReport {
    pub samples: Vec<IrDriftSample>,
    pub max_transverse: f64,
    pub max_magnetic: f64,
    pub max_longitudinal: f64,
    pub max_extrapolation_error: f64,
}

/// Drift of the full-field infrared tail relative to the first snapshot.
pub fn check_ir_conservation(
    snapshots: &[Snapshot],
    model: &ChargeModel,
    grid: &KGrid,
    settings: &IrSettings,
) -> Result<IrConservationReport> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidParameter("at least two snapshots are required".into()));
    }
    let tails = snapshots
        .iter()
        .map(|s| full_field_tail(s, model, grid, settings))
        .collect::<Result<Vec<_>>>()?;
    let reference = &tails[0];
    let mut report = IrConservationReport {
        samples: Vec::with_capacity(tails.len()),
        max_transverse: 0.0,
        max_magnetic: 0.0,
        max_longitudinal: 0.0,
        max_extrapolation_error: 0.0,
    };
    for (snap, tail) in snapshots.iter().zip(&tails) {
        let mut sample = IrDriftSample {
            t: snap.t,
            transverse_e: 0.0,
            magnetic: 0.0,
            longitudinal: 0.0,
        };
        for d in 0..tail.len() {
            let k_hat = &tail.directions[d];
            let scale = norm_sqr(&reference.e[d]).sqrt();
            let de = tail.e[d] - reference.e[d];
            let db = tail.b[d] - reference.b[d];
            sample.transverse_e = sample.transverse_e.max(norm_sqr(&transverse(k_hat, &de)).sqrt() / scale);
            sample.magnetic = sample.magnetic.max(norm_sqr(&db).sqrt() / scale);
            sample.longitudinal = sample.longitudinal.max(crate::vector::rdot(k_hat, &de).norm());
            report.max_extrapolation_error = report
                .max_extrapolation_error
                .max((tail.error_e[d] + tail.error_b[d]) / scale);
        }
        report.max_transverse = report.max_transverse.max(sample.transverse_e);
        report.max_magnetic = report.max_magnetic.max(sample.magnetic);
        report.max_longitudinal = report.max_longitudinal.max(sample.longitudinal);
        report.samples.push(sample);
    }
    Ok(report)
}

/// `v ↦ v − (k̂·v) k̂` on both sectors, direction by direction.
pub fn transverse_project(tail: &IrTail) -> IrTail {
    IrTail {
        e: tail.directions.iter().zip(&tail.e).map(|(d, z)| transverse(d, z)).collect(),
        b: tail.directions.iter().zip(&tail.b).map(|(d, z)| transverse(d, z)).collect(),
        ..tail.clone()
    }
}

/// One sector of the soft-photon balance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorBalance {
    pub lhs: Vec<Complex3>,
    pub rhs: Vec<Complex3>,
    pub residuals: Vec<f64>,
    /// `‖lhs − rhs‖ / ‖rhs‖` in the angular L² norm.
    pub relative_residual: f64,
    pub rhs_norm: f64,
    /// Error budget in the same relative units: extrapolation, time
    /// quadrature and truncated-tail contributions.
    pub budget_extrapolation: f64,
    pub budget_quadrature: f64,
    pub budget_tail: f64,
}

impl SectorBalance {
    pub fn budget(&self) -> f64 {
        self.budget_extrapolation + self.budget_quadrature + self.budget_tail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftPhotonReport {
    pub v_plus: Real3,
    pub v_minus: Real3,
    pub directions: Vec<Real3>,
    pub electric: SectorBalance,
    pub magnetic: SectorBalance,
}

impl SoftPhotonReport {
    pub fn residual_norm(&self) -> f64 {
        self.electric.relative_residual.max(self.magnetic.relative_residual)
    }
}

fn angular_norm(grid: &KGrid, values: impl Fn(usize) -> f64) -> f64 {
    grid.integrate_sphere(|d| values(d).powi(2)).sqrt()
}

/// `max_j |(e_j·∇_v)(ℰ_v, ℬ_v)(k̂)|` summed over Cartesian `e_j`, per direction.
fn tail_sensitivity(k_hat: &Real3, v: &Real3, e: f64) -> (f64, f64) {
    let (mut se, mut sb) = (0.0, 0.0);
    for dir in [Real3::x(), Real3::y(), Real3::z()] {
        let (a, b) = soliton_vgrad_parts(k_hat, v, &dir, e * FOURIER_NORM);
        se += a.norm_squared();
        sb += b.norm_squared();
    }
    (se.sqrt(), sb.sqrt())
}

/// Compares `ℱ_sc,+ − ℱ_sc,−` with `−(ℱ_{v+} − ℱ_{v−})` in both sectors.
pub fn soft_photon_residual(
    sc_plus: &ScatterResult,
    sc_minus: &ScatterResult,
    v_plus: &Real3,
    v_minus: &Real3,
    model: &ChargeModel,
    grid: &KGrid,
    settings: &IrSettings,
) -> Result<SoftPhotonReport> {
    let plus = ir_extract(&sc_plus.z_sc, grid, settings)?;
    let minus = ir_extract(&sc_minus.z_sc, grid, settings)?;
    let lhs = plus.sub(&minus);
    let rhs = IrTail::soliton(grid, v_plus, model.e())
        .sub(&IrTail::soliton(grid, v_minus, model.e()))
        .scaled(-1.0);
    let n_dir = grid.n_directions();
    let sens: Vec<((f64, f64), (f64, f64))> = grid
        .directions()
        .iter()
        .map(|d| (tail_sensitivity(d, v_plus, model.e()), tail_sensitivity(d, v_minus, model.e())))
        .collect();
    let quad = |d: usize| {
        let (a, b) = (sc_plus.ir_quadrature_error[d], sc_minus.ir_quadrature_error[d]);
        (a.0 + b.0, a.1 + b.1)
    };
    let tail = |d: usize| {
        let ((sp_e, sp_b), (sm_e, sm_b)) = sens[d];
        (
            sc_plus.tail_bound * sp_e + sc_minus.tail_bound * sm_e,
            sc_plus.tail_bound * sp_b + sc_minus.tail_bound * sm_b,
        )
    };
    let sector = |l: &[Complex3], r: &[Complex3], extrap: &[f64], electric: bool| {
        let residuals: Vec<f64> = (0..n_dir).map(|d| norm_sqr(&(l[d] - r[d])).sqrt()).collect();
        let rhs_norm = angular_norm(grid, |d| norm_sqr(&r[d]).sqrt());
        let res_norm = angular_norm(grid, |d| residuals[d]);
        let pick = |p: (f64, f64)| if electric { p.0 } else { p.1 };
        let rel = |x: f64| if rhs_norm > 0.0 { x / rhs_norm } else { x };
        SectorBalance {
            lhs: l.to_vec(),
            rhs: r.to_vec(),
            relative_residual: rel(res_norm),
            rhs_norm,
            budget_extrapolation: rel(angular_norm(grid, |d| extrap[d])),
            budget_quadrature: rel(angular_norm(grid, |d| pick(quad(d)))),
            budget_tail: rel(angular_norm(grid, |d| pick(tail(d)))),
            residuals,
        }
    };
    Ok(SoftPhotonReport {
        v_plus: *v_plus,
        v_minus: *v_minus,
        directions: grid.directions().to_vec(),
        electric: sector(&lhs.e, &rhs.e, &lhs.error_e, true),
        magnetic: sector(&lhs.b, &rhs.b, &lhs.error_b, false),
    })
}

/// `‖ℰ_sc,+ + P_tr ℰ_{v+}‖ / ‖P_tr ℰ_{v+}‖` and `‖ℬ_sc,+ + ℬ_{v+}‖ / ‖ℬ_{v+}‖`
/// (angular L² norms), the transverse form of the balance for data that
/// start at rest with infrared-regular incoming radiation.
pub fn rest_start_transverse_residual(
    sc_plus: &ScatterResult,
    v_plus: &Real3,
    model: &ChargeModel,
    grid: &KGrid,
    settings: &IrSettings,
) -> Result<(f64, f64)> {
    let tail = ir_extract(&sc_plus.z_sc, grid, settings)?;
    let soliton = transverse_project(&IrTail::soliton(grid, v_plus, model.e()));
    let sum = tail.add(&soliton);
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
    let e = rel(
        angular_norm(grid, |d| norm_sqr(&sum.e[d]).sqrt()),
        angular_norm(grid, |d| norm_sqr(&soliton.e[d]).sqrt()),
    );
    let b = rel(
        angular_norm(grid, |d| norm_sqr(&sum.b[d]).sqrt()),
        angular_norm(grid, |d| norm_sqr(&soliton.b[d]).sqrt()),
    );
    Ok((e, b))
}
