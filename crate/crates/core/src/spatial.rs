//! Position-space tails `𝔉(x̂) = lim_{|x|→∞} |x|² F(x)` and the asymptotic
//! flux `n·𝔈(n)`.
//!
//! The soliton contributes its closed form. For the deviation only the
//! `1/|k|` part of its transform survives the limit, so it is expanded in
//! real spherical harmonics over the grid directions and each partial wave
//! is carried to position space by the radial integral
//!
//! ```text
//! r² F_l(r) ∝ ∫₀^∞ s j_l(s) χ(s/r) ds,   χ(k) = exp(−(k R_φ)²/2),
//! ```
//!
//! evaluated at the requested radii and extrapolated in `1/r`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dynamics::ParticleState;
use crate::field::SpectralFieldPair;
use crate::grid::KGrid;
use crate::matter::{ChargeModel, FOURIER_NORM};
use crate::observables::{ir_extract, IrSettings, IrTail};
use crate::quadrature::{gauss_legendre_on, neville_to_zero};
use crate::vector::{check_subluminal, norm_sqr, Complex3, Real3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialTail {
    pub label: String,
    pub directions: Vec<Real3>,
    pub e: Vec<Real3>,
    pub b: Vec<Real3>,
    pub error_e: Vec<f64>,
    pub error_b: Vec<f64>,
    pub radii: Vec<f64>,
    /// Radii at which `k_ir · r` times the angular spacing exceeds π.
    pub under_resolved: Vec<f64>,
    /// Highest partial wave resolved by the direction set.
    pub l_max: usize,
}

impl SpatialTail {
    /// `n·𝔈(n)` per direction.
    pub fn flux(&self) -> Vec<f64> {
        self.directions.iter().zip(&self.e).map(|(n, e)| n.dot(e)).collect()
    }
}

/// Real spherical harmonics `Y_lm(n)` for `l ≤ l_max`, ordered by `(l, m)`
/// with `m = −l..=l`.
pub fn real_harmonics(n: &Real3, l_max: usize) -> Vec<f64> {
    let n = n.normalize();
    let cos_t = n.z.clamp(-1.0, 1.0);
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = n.y.atan2(n.x);
    // normalized associated Legendre functions, p[l][m]
    let mut p = vec![vec![0.0; l_max + 1]; l_max + 1];
    p[0][0] = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..=l_max {
        let mf = m as f64;
        p[m][m] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t * p[m - 1][m - 1];
    }
    for m in 0..l_max {
        p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * cos_t * p[m][m];
    }
    for m in 0..=l_max {
        for l in (m + 2)..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (cos_t * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    let mut out = Vec::with_capacity((l_max + 1) * (l_max + 1));
    for (l, row) in p.iter().enumerate() {
        for m in -(l as i64)..=(l as i64) {
            let am = m.unsigned_abs() as usize;
            let value = match m {
                0 => row[0],
                m if m > 0 => std::f64::consts::SQRT_2 * row[am] * (am as f64 * phi).cos(),
                _ => std::f64::consts::SQRT_2 * row[am] * (am as f64 * phi).sin(),
            };
            out.push(value);
        }
    }
    out
}

/// Spherical Bessel function `j_l(x)` for `x ≥ 0`.
pub fn spherical_bessel(l: usize, x: f64) -> f64 {
    if x < l as f64 + 1.0 {
        // power series
        let mut prefactor = 1.0;
        for i in 0..l {
            prefactor *= x / (2 * i + 3) as f64;
        }
        let y = -0.5 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..200 {
            term *= y / (n as f64 * (2 * (l + n) + 1) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return prefactor * sum;
    }
    let j0 = x.sin() / x;
    if l == 0 {
        return j0;
    }
    let mut prev = j0;
    let mut cur = x.sin() / (x * x) - x.cos() / x;
    for n in 1..l {
        let next = (2 * n + 1) as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `∫₀^∞ s j_l(s) ds` in the Abel sense: `√π Γ(l/2+1)/Γ(l/2+1/2)`.
pub fn radial_moment_limit(l: usize) -> f64 {
    // Γ(l/2+1)/Γ(l/2+1/2) by the recurrence Γ(x+1) = xΓ(x) from l = 0, 1
    let mut ratio = if l.is_multiple_of(2) { 1.0 / PI.sqrt() } else { PI.sqrt() / 2.0 };
    let mut j = l % 2;
    while j < l {
        let x = j as f64 / 2.0;
        // g(j+2) = Γ(x+2)/Γ(x+3/2) = (x+1)/(x+1/2) g(j)
        ratio *= (x + 1.0) / (x + 0.5);
        j += 2;
    }
    PI.sqrt() * ratio
}

/// `∫₀^∞ s j_l(s) χ(s/r) ds` by Gauss–Legendre panels of length `π/r` in
/// `k`. Any regulator with `χ(0) = 1` has the same large-`r` limit; the
/// Gaussian is negligible beyond `k R_φ = 9`.
fn radial_moment(model: &ChargeModel, l_max: usize, r: f64) -> Vec<f64> {
    let width = model.r_phi();
    let k_end = 9.0 / width;
    let panel = PI / r;
    let panels = (k_end / panel).ceil() as usize;
    let (x, w) = gauss_legendre_on(0.0, panel, 10);
    let mut out = vec![0.0; l_max + 1];
    for p in 0..panels {
        let k0 = p as f64 * panel;
        for (xi, wi) in x.iter().zip(&w) {
            let k = k0 + xi;
            let chi = (-0.5 * (k * width).powi(2)).exp();
            for (l, slot) in out.iter_mut().enumerate() {
                *slot += wi * r * r * k * spherical_bessel(l, k * r) * chi;
            }
        }
    }
    out
}

fn band_limit(grid: &KGrid) -> usize {
    let p = grid.params();
    (p.n_polar - 1).min((p.n_azimuth / 2).saturating_sub(1))
}

/// Partial-wave map from an infrared tail to the `|x|⁻²` coefficient.
struct PartialWave {
    l_max: usize,
    // I_l extrapolated to r = ∞ and its error
    moments: Vec<f64>,
    moment_error: Vec<f64>,
}

impl PartialWave {
    fn new(grid: &KGrid, model: &ChargeModel, radii: &[f64]) -> Self {
        let l_max = band_limit(grid);
        let per_radius: Vec<Vec<f64>> = radii.iter().map(|&r| radial_moment(model, l_max, r)).collect();
        let inv: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
        let mut moments = Vec::with_capacity(l_max + 1);
        let mut moment_error = Vec::with_capacity(l_max + 1);
        for l in 0..=l_max {
            let ys: Vec<f64> = per_radius.iter().map(|v| v[l]).collect();
            let diag = neville_to_zero(&inv, &ys);
            let last = diag[diag.len() - 1];
            let err = if diag.len() > 1 { (last - diag[diag.len() - 2]).abs() } else { last.abs() };
            moments.push(last);
            moment_error.push(err);
        }
        Self {
            l_max,
            moments,
            moment_error,
        }
    }

    /// Kernel `K(x̂, k̂_d)` with `r² F(x̂) = Σ_d w_d K(x̂, k̂_d) A(k̂_d)`;
    /// also returns the kernel built from the moment errors.
    fn kernel(&self, grid: &KGrid, x_hat: &Real3) -> (Vec<Complex64>, Vec<f64>) {
        let yx = real_harmonics(x_hat, self.l_max);
        let mut k = Vec::with_capacity(grid.n_directions());
        let mut dk = Vec::with_capacity(grid.n_directions());
        for (d, n) in grid.directions().iter().enumerate() {
            let yk = real_harmonics(n, self.l_max);
            let mut sum = Complex64::new(0.0, 0.0);
            let mut err = 0.0;
            let mut idx = 0;
            for l in 0..=self.l_max {
                let mut s = 0.0;
                for _ in 0..(2 * l + 1) {
                    s += yx[idx] * yk[idx];
                    idx += 1;
                }
                sum += Complex64::i().powu(l as u32) * (self.moments[l] * s);
                err += self.moment_error[l] * s.abs();
            }
            let c = 4.0 * PI * FOURIER_NORM * grid.angular_weights()[d];
            k.push(sum * c);
            dk.push(err * c);
        }
        (k, dk)
    }

    fn apply(&self, grid: &KGrid, tail: &IrTail, x_hat: &Real3) -> [(Real3, f64); 2] {
        let (kernel, kernel_err) = self.kernel(grid, x_hat);
        let sector = |values: &[Complex3], errors: &[f64]| {
            let mut acc = Complex3::zeros();
            let mut err = 0.0;
            for d in 0..values.len() {
                acc += values[d] * kernel[d];
                err += kernel[d].norm() * errors[d] + kernel_err[d] * norm_sqr(&values[d]).sqrt();
            }
            let re = Real3::new(acc.x.re, acc.y.re, acc.z.re);
            let im = Real3::new(acc.x.im, acc.y.im, acc.z.im);
            (re, err + im.norm())
        };
        [sector(&tail.e, &tail.error_e), sector(&tail.b, &tail.error_b)]
    }
}

/// `𝔈(x̂)`, `𝔅(x̂)` of the field at a snapshot: soliton closed form at the
/// particle velocity plus the partial-wave tail of the deviation.
///
/// `deviation` is the field minus the soliton at `particle`.
pub fn spatial_tail(
    deviation: &SpectralFieldPair,
    particle: &ParticleState,
    model: &ChargeModel,
    grid: &KGrid,
    settings: &IrSettings,
    directions: &[Real3],
    radii: &[f64],
) -> Result<SpatialTail> {
    check_subluminal(&particle.v)?;
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= model.r_phi() {
        return Err(Error::InvalidParameter(format!(
            "spatial-tail radii {radii:?} must be increasing and exceed R_phi = {}",
            model.r_phi()
        )));
    }
    if directions.iter().any(|d| !(d.norm() > 0.0)) {
        return Err(Error::InvalidParameter("spatial-tail directions must be nonzero".into()));
    }
    let tail = ir_extract(deviation, grid, settings)?;
    let waves = PartialWave::new(grid, model, radii);
    let soliton = model.soliton(particle.v)?;
    let bound = PI / grid.angular_spacing();
    let under_resolved: Vec<f64> = radii.iter().copied().filter(|r| settings.k_ir * r > bound).collect();
    if !under_resolved.is_empty() {
        log::warn!("spatial tail: radii {under_resolved:?} exceed the angular resolution of the smallest shells");
    }
    let mut out = SpatialTail {
        label: String::new(),
        directions: Vec::with_capacity(directions.len()),
        e: Vec::with_capacity(directions.len()),
        b: Vec::with_capacity(directions.len()),
        error_e: Vec::with_capacity(directions.len()),
        error_b: Vec::with_capacity(directions.len()),
        radii: radii.to_vec(),
        under_resolved,
        l_max: waves.l_max,
    };
    for x in directions {
        let x_hat = x.normalize();
        let [(de, err_e), (db, err_b)] = waves.apply(grid, &tail, &x_hat);
        out.directions.push(x_hat);
        out.e.push(soliton.position_tail(&x_hat) + de);
        out.b.push(soliton.position_tail_magnetic(&x_hat) + db);
        out.error_e.push(err_e);
        out.error_b.push(err_b);
    }
    Ok(out)
}

/// `∮ n·𝔈(n) dΩ` over the grid's direction set, with its error.
pub fn total_flux(tail: &SpatialTail, grid: &KGrid) -> Result<(f64, f64)> {
    if tail.directions.len() != grid.n_directions() {
        return Err(Error::ShapeMismatch {
            expected: grid.n_directions(),
            found: tail.directions.len(),
        });
    }
    let flux = tail.flux();
    let value = grid.integrate_sphere(|d| flux[d]);
    let error = grid.integrate_sphere(|d| tail.error_e[d]);
    Ok((value, error))
}
