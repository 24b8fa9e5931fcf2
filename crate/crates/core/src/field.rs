//! Fourier-space electromagnetic field on a [`KGrid`], exact free evolution
//! and quadratic functionals.
//!
//! Convention: `f̂(k) = (2π)^{-3/2} ∫ e^{-ik·x} f(x) d³x`. A real position
//! space field has `f̂(−k) = conj f̂(k)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::KGrid;
use crate::vector::{conj, czero, norm_sqr, rcross, re, transverse, Complex3, Real3, I};
use crate::{Error, Result};

/// Complex amplitudes `(Ê, B̂)` per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFieldPair {
    pub e_hat: Vec<Complex3>,
    pub b_hat: Vec<Complex3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldFunctionals {
    /// `½ ∫ d³k (|Ê|² + |B̂|²)`.
    pub energy: f64,
    /// `∫ d³k Re(Ê* × B̂)`, equal to `∫ d³x E × B` for real fields.
    pub momentum: [f64; 3],
    /// `(∫ d³k (|Ê|² + |B̂|²))^{1/2}`.
    pub l2_norm: f64,
}

impl SpectralFieldPair {
    pub fn zeros(n_nodes: usize) -> Self {
        Self {
            e_hat: vec![czero(); n_nodes],
            b_hat: vec![czero(); n_nodes],
        }
    }

    pub fn for_grid(grid: &KGrid) -> Self {
        Self::zeros(grid.n_nodes())
    }

    pub fn from_fn<F>(grid: &KGrid, mut f: F) -> Self
    where
        F: FnMut(usize) -> (Complex3, Complex3),
    {
        let (e_hat, b_hat) = (0..grid.n_nodes()).map(&mut f).unzip();
        Self { e_hat, b_hat }
    }

    pub fn len(&self) -> usize {
        self.e_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_hat.is_empty()
    }

    pub fn check_shape(&self, grid: &KGrid) -> Result<()> {
        let expected = grid.n_nodes();
        for found in [self.e_hat.len(), self.b_hat.len()] {
            if found != expected {
                return Err(Error::ShapeMismatch { expected, found });
            }
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            e_hat: self.e_hat.iter().map(|v| v * Complex64::from(c)).collect(),
            b_hat: self.b_hat.iter().map(|v| v * Complex64::from(c)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&Complex3, &Complex3) -> Complex3) -> Self {
        assert_eq!(self.len(), other.len(), "field pairs live on different grids");
        Self {
            e_hat: self.e_hat.iter().zip(&other.e_hat).map(|(a, b)| f(a, b)).collect(),
            b_hat: self.b_hat.iter().zip(&other.b_hat).map(|(a, b)| f(a, b)).collect(),
        }
    }

    /// Transverse part of both sectors.
    pub fn transverse_part(&self, grid: &KGrid) -> Self {
        Self::from_fn(grid, |n| {
            let k_hat = grid.k_hat(n);
            (transverse(k_hat, &self.e_hat[n]), transverse(k_hat, &self.b_hat[n]))
        })
    }

    /// Largest `|f̂(−k) − conj f̂(k)|` over nodes and both sectors.
    pub fn hermitian_defect(&self, grid: &KGrid) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 0..grid.n_nodes() {
            let a = grid.antipode_node(n);
            for (x, y) in [(&self.e_hat[n], &self.e_hat[a]), (&self.b_hat[n], &self.b_hat[a])] {
                worst = worst.max(crate::vector::max_abs_diff(y, &conj(x)));
            }
        }
        worst
    }

    /// Largest `|k̂·B̂|` over nodes.
    pub fn magnetic_divergence(&self, grid: &KGrid) -> f64 {
        (0..grid.n_nodes())
            .map(|n| crate::vector::rdot(grid.k_hat(n), &self.b_hat[n]).norm())
            .fold(0.0, f64::max)
    }

    /// `Σ_n w_n (|Ê|² + |B̂|²)` in node order.
    pub fn norm_sqr(&self, grid: &KGrid) -> f64 {
        grid.integrate(|n| norm_sqr(&self.e_hat[n]) + norm_sqr(&self.b_hat[n]))
    }

    pub fn l2_norm(&self, grid: &KGrid) -> f64 {
        self.norm_sqr(grid).sqrt()
    }

    pub fn l2_distance(&self, other: &Self, grid: &KGrid) -> f64 {
        grid.integrate(|n| norm_sqr(&(self.e_hat[n] - other.e_hat[n])) + norm_sqr(&(self.b_hat[n] - other.b_hat[n])))
            .sqrt()
    }
}

/// Averages each node with the conjugate of its antipode. Idempotent.
pub fn enforce_hermitian(state: &SpectralFieldPair, grid: &KGrid) -> SpectralFieldPair {
    let half = Complex64::from(0.5);
    SpectralFieldPair::from_fn(grid, |n| {
        let a = grid.antipode_node(n);
        (
            (state.e_hat[n] + conj(&state.e_hat[a])) * half,
            (state.b_hat[n] + conj(&state.b_hat[a])) * half,
        )
    })
}

/// Per-shell `cos(|k|t)`, `sin(|k|t)` for a fixed time.
#[derive(Debug, Clone)]
pub struct FreeRotation {
    cos: Vec<f64>,
    sin: Vec<f64>,
    n_directions: usize,
}

impl FreeRotation {
    pub fn new(grid: &KGrid, t: f64) -> Self {
        let (sin, cos) = grid.radial_nodes().iter().map(|k| (k * t).sin_cos()).unzip();
        Self {
            cos,
            sin,
            n_directions: grid.n_directions(),
        }
    }

    /// Exact free evolution of one mode.
    ///
    /// Transverse parts rotate, `Ê⊥ → cos Ê⊥ + i sin k̂×B̂`,
    /// `B̂⊥ → cos B̂⊥ − i sin k̂×Ê`; longitudinal parts are constants of the
    /// source-free equations and are left unchanged.
    #[inline]
    pub fn apply(&self, node: usize, k_hat: &Real3, e: &Complex3, b: &Complex3) -> (Complex3, Complex3) {
        let r = node / self.n_directions;
        let (c, s) = (self.cos[r], self.sin[r]);
        let cm1 = Complex64::from(c - 1.0);
        let e_new = e + transverse(k_hat, e) * cm1 + rcross(k_hat, b) * (I * s);
        let b_new = b + transverse(k_hat, b) * cm1 - rcross(k_hat, e) * (I * s);
        (e_new, b_new)
    }

    /// Free evolution of a purely transverse mode (skips the projections).
    #[inline]
    pub fn apply_transverse(&self, node: usize, k_hat: &Real3, e: &Complex3, b: &Complex3) -> (Complex3, Complex3) {
        let r = node / self.n_directions;
        let (c, s) = (Complex64::from(self.cos[r]), I * self.sin[r]);
        (e * c + rcross(k_hat, b) * s, b * c - rcross(k_hat, e) * s)
    }
}

/// Exact free Maxwell evolution `U(t)` applied node by node.
pub fn free_propagate(state: &SpectralFieldPair, grid: &KGrid, t: f64) -> Result<SpectralFieldPair> {
    state.check_shape(grid)?;
    let rot = FreeRotation::new(grid, t);
    Ok(SpectralFieldPair::from_fn(grid, |n| {
        rot.apply(n, grid.k_hat(n), &state.e_hat[n], &state.b_hat[n])
    }))
}

/// Energy, momentum and L² norm by grid quadrature.
///
/// Logs a warning when the bilinear form `∫ Ê(−k)·Ê(k)` has an imaginary
/// part above `1e-10` of its real part, which signals a non-Hermitian state.
pub fn functionals(state: &SpectralFieldPair, grid: &KGrid) -> Result<FieldFunctionals> {
    state.check_shape(grid)?;
    let mut energy_sq = 0.0;
    let mut bilinear = Complex64::new(0.0, 0.0);
    let mut momentum = Real3::zeros();
    for r in 0..grid.n_radial() {
        let wr = grid.radial_weights()[r];
        let mut shell_sq = 0.0;
        let mut shell_bilinear = Complex64::new(0.0, 0.0);
        let mut shell_momentum = Real3::zeros();
        for d in 0..grid.n_directions() {
            let n = grid.node(r, d);
            let wa = grid.angular_weights()[d];
            let (e, b) = (&state.e_hat[n], &state.b_hat[n]);
            let a = grid.antipode_node(n);
            shell_sq += wa * (norm_sqr(e) + norm_sqr(b));
            shell_bilinear += (state.e_hat[a].dot(e) + state.b_hat[a].dot(b)) * wa;
            shell_momentum += re(&conj(e).cross(b)) * wa;
        }
        energy_sq += wr * shell_sq;
        bilinear += shell_bilinear * wr;
        momentum += shell_momentum * wr;
    }
    if bilinear.im.abs() > 1e-10 * bilinear.re.abs().max(f64::MIN_POSITIVE) {
        log::warn!(
            "field is not Hermitian: Im ∫Ê(−k)·Ê(k) = {:.3e}, Re = {:.3e}",
            bilinear.im,
            bilinear.re
        );
    }
    Ok(FieldFunctionals {
        energy: 0.5 * energy_sq,
        momentum: [momentum.x, momentum.y, momentum.z],
        l2_norm: energy_sq.sqrt(),
    })
}
