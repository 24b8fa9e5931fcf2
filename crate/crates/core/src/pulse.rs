//! Transverse, infrared-regular free wave packets used as incoming radiation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::field::SpectralFieldPair;
use crate::grid::KGrid;
use crate::vector::{complexify, Real3};
use crate::{Error, Result};

/// A Gaussian packet around `k0 · direction`, centred at `center` at `t = 0`.
///
/// `amplitude` is the peak electric field in position space for a packet
/// that is well resolved by the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseParams {
    pub k0: f64,
    pub width: f64,
    pub amplitude: f64,
    pub polarization: [f64; 3],
    pub direction: [f64; 3],
    #[serde(default)]
    pub center: [f64; 3],
}

impl PulseParams {
    pub fn validate(&self) -> Result<(Real3, Real3)> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidParameter(format!("pulse width = {} must be positive", self.width)));
        }
        if !(self.k0 > 3.0 * self.width && self.k0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pulse k0 = {} must exceed 3 * width = {}",
                self.k0,
                3.0 * self.width
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!("pulse amplitude = {}", self.amplitude)));
        }
        let d = Real3::from(self.direction);
        if !(d.norm() > 0.0) {
            return Err(Error::InvalidParameter("pulse direction must be nonzero".into()));
        }
        let d = d.normalize();
        let eps = Real3::from(self.polarization);
        let eps_perp = eps - d * d.dot(&eps);
        if !(eps_perp.norm() > 1e-8 * eps.norm()) || !eps.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter("pulse polarization is parallel to its direction".into()));
        }
        Ok((d, eps_perp.normalize()))
    }
}

/// Builds the packet
///
/// ```text
/// Ê(k) = A s(|k|) P_tr(k̂) ε e^{−ik·x₀} (G(k) + G(−k))
/// B̂(k) = A s(|k|) k̂ × ε e^{−ik·x₀} (G(k) − G(−k))
/// ```
///
/// with `G(k) = exp(−|k − k₀d|²/2w²)`, `s(|k|) = (|k|/k₀)²` and
/// `A = amplitude / (2w³)`. Both sectors are transverse and Hermitian, and
/// `|k| Ê → 0` at the origin.
pub fn make_pulse(grid: &KGrid, params: &PulseParams) -> Result<SpectralFieldPair> {
    let (d, eps) = params.validate()?;
    let center = Real3::from(params.center);
    let k_peak = d * params.k0;
    let inv_two_w2 = 1.0 / (2.0 * params.width * params.width);
    let a = params.amplitude / (2.0 * params.width.powi(3));
    Ok(SpectralFieldPair::from_fn(grid, |n| {
        let k_hat = grid.k_hat(n);
        let k = grid.k_vec(n);
        let g_plus = (-(k - k_peak).norm_squared() * inv_two_w2).exp();
        let g_minus = (-(k + k_peak).norm_squared() * inv_two_w2).exp();
        let s = (grid.k_mag(n) / params.k0).powi(2) * a;
        let phase = Complex64::from_polar(s, -k.dot(&center));
        let e_dir = eps - k_hat * k_hat.dot(&eps);
        let b_dir = k_hat.cross(&eps);
        (
            complexify(&e_dir) * (phase * (g_plus + g_minus)),
            complexify(&b_dir) * (phase * (g_plus - g_minus)),
        )
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_kgrid;

    fn params() -> PulseParams {
        PulseParams {
            k0: 3.0,
            width: 0.8,
            amplitude: 0.1,
            polarization: [1.0, 0.0, 0.0],
            direction: [0.0, 0.0, 1.0],
            center: [0.0, 0.0, -4.0],
        }
    }

    #[test]
    fn rejects_parallel_polarization_and_narrow_k0() {
        let g = build_kgrid(8, 1e-3, 8.0, 4, 4).unwrap();
        let mut p = params();
        p.polarization = [0.0, 0.0, 2.0];
        assert!(make_pulse(&g, &p).is_err());
        let mut p = params();
        p.k0 = 2.0;
        assert!(make_pulse(&g, &p).is_err());
        let mut p = params();
        p.width = 0.0;
        assert!(make_pulse(&g, &p).is_err());
    }

    #[test]
    fn pulse_is_hermitian() {
        let g = build_kgrid(12, 1e-3, 8.0, 6, 6).unwrap();
        let f = make_pulse(&g, &params()).unwrap();
        assert!(f.hermitian_defect(&g) < 1e-15);
    }
}
