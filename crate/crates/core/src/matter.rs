//! Charge distribution and the soliton (uniformly moving charge) fields.
//!
//! All soliton quantities are defined from the momentum-space expressions
//!
//! ```text
//! Ê_v(k) = (−ik + v(v·ik)) / (|k|² − (k·v)²) · e φ̂(k)
//! B̂_v(k) = −v × (ik) / (|k|² − (k·v)²) · e φ̂(k)
//! ```
//!
//! which satisfy Gauss' law `ik·Ê_v = e φ̂` exactly. Position-space tails are
//! the inverse transforms of these.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::quadrature::gauss_legendre_on;
use crate::vector::{check_subluminal, complexify, Complex3, Real3, I};
use crate::{Error, Result};

/// `(2π)^{-3/2}`.
pub const FOURIER_NORM: f64 = 0.063_493_635_934_240_97;

const PROFILE_NODES: usize = 384;

/// Radial shape of the charge distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `C exp(−1/(1 − (r/R)²))` for `r < R`, zero outside.
    #[default]
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeParams {
    pub e: f64,
    pub m: f64,
    pub r_phi: f64,
    #[serde(default)]
    pub profile: Profile,
}

/// Charge `e`, mass `m` and a normalized smooth radial charge profile
/// supported in `|x| ≤ R_φ`.
///
/// The Gauss–Legendre radial rule used for `φ̂` is built once and shared by
/// every evaluation; the model is immutable after construction.
#[derive(Debug, Clone)]
pub struct ChargeModel {
    params: ChargeParams,
    normalization: f64,
    // r_i and w_i r_i² φ(r_i) for the transform integral
    radii: Vec<f64>,
    moment_weights: Vec<f64>,
}

impl ChargeModel {
    pub fn new(e: f64, m: f64, r_phi: f64) -> Result<Self> {
        Self::from_params(ChargeParams {
            e,
            m,
            r_phi,
            profile: Profile::Bump,
        })
    }

    pub fn from_params(params: ChargeParams) -> Result<Self> {
        if !params.e.is_finite() {
            return Err(Error::InvalidParameter(format!("charge e = {}", params.e)));
        }
        if !(params.m > 0.0 && params.m.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass m = {} must be positive", params.m)));
        }
        if !(params.r_phi > 0.0 && params.r_phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("R_phi = {} must be positive", params.r_phi)));
        }
        let (radii, w) = gauss_legendre_on(0.0, params.r_phi, PROFILE_NODES);
        let raw: Vec<f64> = radii.iter().map(|&r| bump(r / params.r_phi)).collect();
        let mass: f64 = radii
            .iter()
            .zip(&w)
            .zip(&raw)
            .map(|((r, wi), f)| 4.0 * PI * wi * r * r * f)
            .sum();
        let normalization = 1.0 / mass;
        let moment_weights = radii
            .iter()
            .zip(&w)
            .zip(&raw)
            .map(|((r, wi), f)| wi * r * r * f * normalization)
            .collect();
        Ok(Self {
            params,
            normalization,
            radii,
            moment_weights,
        })
    }

    pub fn params(&self) -> &ChargeParams {
        &self.params
    }

    pub fn e(&self) -> f64 {
        self.params.e
    }

    pub fn m(&self) -> f64 {
        self.params.m
    }

    pub fn r_phi(&self) -> f64 {
        self.params.r_phi
    }

    /// Position-space profile `φ(r)`; `∫ φ d³x = 1`.
    pub fn phi(&self, r: f64) -> f64 {
        self.normalization * bump(r / self.params.r_phi)
    }

    /// `φ̂(|k|) = (2π)^{-3/2} (4π/|k|) ∫₀^{R_φ} r sin(|k| r) φ(r) dr`,
    /// evaluated as `4π ∫ r² sinc(|k| r) φ(r) dr` so `|k| → 0` is regular.
    pub fn phi_hat(&self, k_mag: f64) -> f64 {
        let k = k_mag.abs();
        let sum: f64 = self
            .radii
            .iter()
            .zip(&self.moment_weights)
            .map(|(r, w)| w * sinc(k * r))
            .sum();
        FOURIER_NORM * 4.0 * PI * sum
    }

    pub fn soliton(&self, v: Real3) -> Result<SolitonField<'_>> {
        SolitonField::new(self, v)
    }
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Soliton fields `(Ê_v, B̂_v)` at a wave vector, given `e φ̂(|k|)`.
///
/// Both are purely imaginary; the returned real vectors `(a, b)` satisfy
/// `Ê = i a`, `B̂ = i b`.
#[inline]
pub fn soliton_parts(k: &Real3, v: &Real3, e_phi_hat: f64) -> (Real3, Real3) {
    let kv = k.dot(v);
    let denom = k.norm_squared() - kv * kv;
    let s = -e_phi_hat / denom;
    ((k - v * kv) * s, v.cross(k) * s)
}

/// Velocity derivative `(dv·∇_v)` of [`soliton_parts`], same `i·(a, b)`
/// convention.
///
/// With `N = −i(k − v(v·k))`, `D = |k|² − (k·v)²`:
/// `(dv·∇)N = i(dv(v·k) + v(dv·k))`, `(dv·∇)D = −2(k·v)(k·dv)`.
#[inline]
pub fn soliton_vgrad_parts(k: &Real3, v: &Real3, dv: &Real3, e_phi_hat: f64) -> (Real3, Real3) {
    let kv = k.dot(v);
    let kdv = k.dot(dv);
    let denom = k.norm_squared() - kv * kv;
    let d_denom = -2.0 * kv * kdv;
    let inv = 1.0 / denom;
    let ratio = d_denom * inv * inv;
    let n_real = k - v * kv;
    let m_real = dv * kv + v * kdv;
    let a = (m_real * inv + n_real * ratio) * e_phi_hat;
    let b = (dv.cross(k) * inv - v.cross(k) * ratio) * (-e_phi_hat);
    (a, b)
}

/// A soliton of velocity `v` for a given charge model.
#[derive(Debug, Clone, Copy)]
pub struct SolitonField<'a> {
    pub v: Real3,
    pub model: &'a ChargeModel,
}

impl<'a> SolitonField<'a> {
    pub fn new(model: &'a ChargeModel, v: Real3) -> Result<Self> {
        check_subluminal(&v)?;
        Ok(Self { v, model })
    }

    /// `(Ê_v(k), B̂_v(k))`; `k = 0` is rejected.
    pub fn momentum(&self, k: &Real3) -> Result<(Complex3, Complex3)> {
        let k_mag = nonzero(k)?;
        let (a, b) = soliton_parts(k, &self.v, self.model.e() * self.model.phi_hat(k_mag));
        Ok((complexify(&a) * I, complexify(&b) * I))
    }

    /// `((dv·∇_v)Ê_v(k), (dv·∇_v)B̂_v(k))`.
    pub fn vgrad(&self, k: &Real3, dv: &Real3) -> Result<(Complex3, Complex3)> {
        let k_mag = nonzero(k)?;
        let (a, b) = soliton_vgrad_parts(k, &self.v, dv, self.model.e() * self.model.phi_hat(k_mag));
        Ok((complexify(&a) * I, complexify(&b) * I))
    }

    /// `lim_{|x|→∞} |x|² E_v(x)` along `x̂`:
    /// `(e/4π)(1−v²) x̂ / (1 − v² sin²θ)^{3/2}`.
    pub fn position_tail(&self, x_hat: &Real3) -> Real3 {
        let x_hat = x_hat.normalize();
        let v2 = self.v.norm_squared();
        let cos_part = x_hat.dot(&self.v);
        let sin2_v2 = v2 - cos_part * cos_part;
        x_hat * (self.model.e() / (4.0 * PI) * (1.0 - v2) / (1.0 - sin2_v2).powf(1.5))
    }

    /// Magnetic tail `v × 𝔈_v(x̂)`.
    pub fn position_tail_magnetic(&self, x_hat: &Real3) -> Real3 {
        self.v.cross(&self.position_tail(x_hat))
    }

    /// `(ℰ_v(k̂), ℬ_v(k̂)) = lim_{|k|→0} |k| (Ê_v, B̂_v)`.
    pub fn ir_limit(&self, k_hat: &Real3) -> (Complex3, Complex3) {
        ir_limit_parts(k_hat, &self.v, self.model.e())
    }
}

/// Closed-form infrared limit of the soliton fields:
/// `ℰ_v = −i e (2π)^{-3/2} (k̂ − (k̂·v)v)/(1 − (k̂·v)²)`,
/// `ℬ_v = −i e (2π)^{-3/2} (v × k̂)/(1 − (k̂·v)²)`.
pub fn ir_limit_parts(k_hat: &Real3, v: &Real3, e: f64) -> (Complex3, Complex3) {
    let kv = k_hat.dot(v);
    let s = -e * FOURIER_NORM / (1.0 - kv * kv);
    let a = (k_hat - v * kv) * s;
    let b = v.cross(k_hat) * s;
    (complexify(&a) * I, complexify(&b) * I)
}

fn nonzero(k: &Real3) -> Result<f64> {
    let k_mag = k.norm();
    if k_mag > 0.0 && k_mag.is_finite() {
        Ok(k_mag)
    } else {
        Err(Error::ZeroWaveVector)
    }
}
