//! First moments of the free quantized fields on the coherent state `|w⟩`
//! and their infrared match with the classical scattered radiation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::matter::{ChargeModel, FOURIER_NORM};
use crate::quadrature::neville_to_zero;
use crate::vector::{check_subluminal, complexify, conj, norm_sqr, rcross, Complex3, Real3, I};
use crate::{Error, Result};

/// Linear polarization frames built from a reference axis: `ẑ`, or `x̂`
/// within `acos(0.9)` of the poles. `rotation` turns both vectors about `k̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PolarizationBasis {
    pub rotation: f64,
}

impl PolarizationBasis {
    pub fn vectors(&self, k_hat: &Real3) -> [Real3; 2] {
        let reference = if k_hat.z.abs() > 0.9 { Real3::x() } else { Real3::z() };
        let a = (reference - k_hat * k_hat.dot(&reference)).normalize();
        let b = k_hat.cross(&a);
        let (s, c) = self.rotation.sin_cos();
        [a * c + b * s, b * c - a * s]
    }

    /// `Σ_λ ε_λ (ε_λ · z)`.
    fn project(&self, k_hat: &Real3, z: &Complex3) -> Complex3 {
        self.vectors(k_hat)
            .iter()
            .map(|eps| {
                let c = complexify(eps);
                c * c.dot(z)
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct CoherentProfile {
    pub v_inf: Real3,
    pub model: ChargeModel,
    pub basis: PolarizationBasis,
}

impl CoherentProfile {
    pub fn new(v_inf: Real3, model: ChargeModel) -> Result<Self> {
        check_subluminal(&v_inf)?;
        Ok(Self {
            v_inf,
            model,
            basis: PolarizationBasis::default(),
        })
    }

    /// `w(k) = −e φ̂(k) / (√2 |k|^{3/2}) · v∞ / (1 − k̂·v∞)`.
    pub fn w_amplitude(&self, k: &Real3) -> Result<Complex3> {
        let k_mag = k.norm();
        if !(k_mag > 0.0 && k_mag.is_finite()) {
            return Err(Error::ZeroWaveVector);
        }
        let k_hat = k / k_mag;
        let s = -self.model.e() * self.model.phi_hat(k_mag)
            / (std::f64::consts::SQRT_2 * k_mag.powf(1.5) * (1.0 - k_hat.dot(&self.v_inf)));
        Ok(complexify(&(self.v_inf * s)))
    }

    /// `(⟨w|Ê(k,t)|w⟩, ⟨w|B̂(k,t)|w⟩)` with `⟨a_λ(k)⟩ = w(k)·ε_λ(k)`.
    pub fn expected_fields(&self, k: &Real3, t: f64) -> Result<(Complex3, Complex3)> {
        let w_plus = self.w_amplitude(k)?;
        let w_minus = self.w_amplitude(&(-k))?;
        let k_mag = k.norm();
        let k_hat = k / k_mag;
        let out = Complex64::from_polar(1.0, -k_mag * t);
        let back = out.conj();
        // Σ_λ ε_λ(−k)⟨ε_λ(−k)| is the same projector as at k
        let a = self.basis.project(&k_hat, &w_plus) * out;
        let b = self.basis.project(&(-k_hat), &conj(&w_minus)) * back;
        let e = (a - b) * (I * (0.5 * k_mag).sqrt());
        let bf = rcross(k, &(a + b)) * (I * (0.5 / k_mag).sqrt());
        Ok((e, bf))
    }
}

/// Closed-form infrared tails of the future scattered field:
/// `−ie(2π)^{-3/2} (P_tr v)(k̂·v)/(1−(k̂·v)²)` and
/// `e(2π)^{-3/2} (v × ik̂)/(1−(k̂·v)²)`.
pub fn scattered_ir_closed_form(k_hat: &Real3, v: &Real3, e: f64) -> (Complex3, Complex3) {
    let kv = k_hat.dot(v);
    let denom = 1.0 - kv * kv;
    let p_tr_v = v - k_hat * kv;
    let electric = complexify(&(p_tr_v * (kv / denom))) * (-I * e * FOURIER_NORM);
    let magnetic = complexify(&(v.cross(k_hat) / denom)) * (I * e * FOURIER_NORM);
    (electric, magnetic)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentMatch {
    pub direction: Real3,
    pub limit_e: Complex3,
    pub limit_b: Complex3,
    pub closed_e: Complex3,
    pub closed_b: Complex3,
    pub residual_e: f64,
    pub residual_b: f64,
    pub extrapolation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentReport {
    pub v_inf: Real3,
    pub t: f64,
    pub rows: Vec<CoherentMatch>,
    pub max_residual: f64,
}

/// Wave numbers used for the `|k| → 0` extrapolation.
pub const MATCH_RADII: [f64; 4] = [1e-4, 5e-5, 2.5e-5, 1.25e-5];

/// Extrapolates `|k|⟨Ê⟩`, `|k|⟨B̂⟩` to `|k| = 0` along each direction and
/// compares with the closed forms.
pub fn ir_match_check(profile: &CoherentProfile, directions: &[Real3], t: f64) -> Result<CoherentReport> {
    let e = profile.model.e();
    let mut rows = Vec::with_capacity(directions.len());
    for dir in directions {
        let k_hat = dir.normalize();
        let mut es = Vec::with_capacity(MATCH_RADII.len());
        let mut bs = Vec::with_capacity(MATCH_RADII.len());
        for &kr in &MATCH_RADII {
            let (ef, bf) = profile.expected_fields(&(k_hat * kr), t)?;
            es.push(ef * Complex64::from(kr));
            bs.push(bf * Complex64::from(kr));
        }
        let (limit_e, err_e) = extrapolate(&es);
        let (limit_b, err_b) = extrapolate(&bs);
        let (closed_e, closed_b) = scattered_ir_closed_form(&k_hat, &profile.v_inf, e);
        rows.push(CoherentMatch {
            direction: k_hat,
            limit_e,
            limit_b,
            closed_e,
            closed_b,
            residual_e: norm_sqr(&(limit_e - closed_e)).sqrt(),
            residual_b: norm_sqr(&(limit_b - closed_b)).sqrt(),
            extrapolation_error: err_e.max(err_b),
        });
    }
    let max_residual = rows.iter().map(|r| r.residual_e.max(r.residual_b)).fold(0.0, f64::max);
    Ok(CoherentReport {
        v_inf: profile.v_inf,
        t,
        rows,
        max_residual,
    })
}

fn extrapolate(ys: &[Complex3]) -> (Complex3, f64) {
    let mut value = Complex3::zeros();
    let mut error: f64 = 0.0;
    for c in 0..3 {
        let re: Vec<f64> = ys.iter().map(|y| y[c].re).collect();
        let im: Vec<f64> = ys.iter().map(|y| y[c].im).collect();
        let dr = neville_to_zero(&MATCH_RADII, &re);
        let di = neville_to_zero(&MATCH_RADII, &im);
        let n = dr.len();
        value[c] = Complex64::new(dr[n - 1], di[n - 1]);
        error = error.max((dr[n - 1] - dr[n - 2]).abs()).max((di[n - 1] - di[n - 2]).abs());
    }
    (value, error)
}

/// `n` nearly uniform directions on a golden-angle spiral.
pub fn spiral_directions(n: usize) -> Vec<Real3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Real3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}
