//! Spherical Fourier-space quadrature grid.
//!
//! Nodes are the tensor product of radial shells `|k|` and unit directions
//! `k̂`. Directions come from Gauss–Legendre nodes in `cos θ` times a uniform
//! azimuth, both symmetric under `k̂ → −k̂`, so every direction has an exact
//! antipode in the set. Node `n = r * n_directions + d`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::quadrature::gauss_legendre;
use crate::vector::Real3;
use crate::{Error, Result};

/// How radial shells are spaced between `k_min` and `k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialSpacing {
    /// Uniform in `ln |k|`.
    #[default]
    Log,
    /// Uniform in `u` with `|k| = k_switch · ln(1 + e^u)`: geometric below
    /// `k_switch`, arithmetic (spacing `k_switch · h`) above it.
    LogLinear { k_switch: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub n_radial: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub n_polar: usize,
    pub n_azimuth: usize,
    #[serde(default)]
    pub radial: RadialSpacing,
}

impl GridParams {
    pub fn log(n_radial: usize, k_min: f64, k_max: f64, n_polar: usize, n_azimuth: usize) -> Self {
        Self {
            n_radial,
            k_min,
            k_max,
            n_polar,
            n_azimuth,
            radial: RadialSpacing::Log,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_radial < 4 {
            return Err(Error::InvalidGrid(format!("n_radial = {} < 4", self.n_radial)));
        }
        if !(self.k_min > 0.0 && self.k_min.is_finite()) {
            return Err(Error::InvalidGrid(format!("k_min = {} must be positive", self.k_min)));
        }
        if !(self.k_max > self.k_min && self.k_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "k_max = {} must exceed k_min = {}",
                self.k_max, self.k_min
            )));
        }
        if self.n_polar < 2 || !self.n_polar.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_polar = {} must be even and >= 2 for antipodal pairing",
                self.n_polar
            )));
        }
        if self.n_azimuth < 2 || !self.n_azimuth.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_azimuth = {} must be even and >= 2 for antipodal pairing",
                self.n_azimuth
            )));
        }
        if let RadialSpacing::LogLinear { k_switch } = self.radial {
            if !(k_switch > 0.0 && k_switch.is_finite()) {
                return Err(Error::InvalidGrid(format!("k_switch = {k_switch} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    params: GridParams,
    radial_nodes: Vec<f64>,
    radial_weights: Vec<f64>,
    directions: Vec<Real3>,
    angular_weights: Vec<f64>,
    antipode: Vec<usize>,
}

/// Log-spaced radial shells with Gauss–Legendre × uniform-azimuth directions.
pub fn build_kgrid(
    n_radial: usize,
    k_min: f64,
    k_max: f64,
    n_polar: usize,
    n_azimuth: usize,
) -> Result<KGrid> {
    KGrid::new(GridParams::log(n_radial, k_min, k_max, n_polar, n_azimuth))
}

impl KGrid {
    pub fn new(params: GridParams) -> Result<Self> {
        params.validate()?;
        let (radial_nodes, radial_weights) = radial_rule(&params);
        let (directions, angular_weights, antipode) = angular_rule(params.n_polar, params.n_azimuth);
        Ok(Self {
            params,
            radial_nodes,
            radial_weights,
            directions,
            angular_weights,
            antipode,
        })
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn radial_nodes(&self) -> &[f64] {
        &self.radial_nodes
    }

    /// Weights for `∫₀^∞ dk k² f(k)`; the `k²` Jacobian is included.
    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    pub fn directions(&self) -> &[Real3] {
        &self.directions
    }

    pub fn angular_weights(&self) -> &[f64] {
        &self.angular_weights
    }

    /// Antipode of a direction index.
    pub fn antipode_index(&self, direction: usize) -> usize {
        self.antipode[direction]
    }

    pub fn n_radial(&self) -> usize {
        self.radial_nodes.len()
    }

    pub fn n_directions(&self) -> usize {
        self.directions.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_radial() * self.n_directions()
    }

    #[inline]
    pub fn node(&self, radial: usize, direction: usize) -> usize {
        radial * self.directions.len() + direction
    }

    #[inline]
    pub fn split(&self, node: usize) -> (usize, usize) {
        (node / self.directions.len(), node % self.directions.len())
    }

    #[inline]
    pub fn k_mag(&self, node: usize) -> f64 {
        self.radial_nodes[node / self.directions.len()]
    }

    #[inline]
    pub fn k_hat(&self, node: usize) -> &Real3 {
        &self.directions[node % self.directions.len()]
    }

    #[inline]
    pub fn k_vec(&self, node: usize) -> Real3 {
        self.k_hat(node) * self.k_mag(node)
    }

    /// Full `d³k` weight of a node.
    #[inline]
    pub fn weight(&self, node: usize) -> f64 {
        let (r, d) = self.split(node);
        self.radial_weights[r] * self.angular_weights[d]
    }

    /// Node holding `−k`.
    #[inline]
    pub fn antipode_node(&self, node: usize) -> usize {
        let (r, d) = self.split(node);
        self.node(r, self.antipode[d])
    }

    /// `∫ d³k f(k)` by the grid rule, summed in node order.
    pub fn integrate<F: FnMut(usize) -> f64>(&self, mut f: F) -> f64 {
        let mut total = 0.0;
        for r in 0..self.n_radial() {
            let mut shell = 0.0;
            for d in 0..self.n_directions() {
                shell += self.angular_weights[d] * f(self.node(r, d));
            }
            total += self.radial_weights[r] * shell;
        }
        total
    }

    /// `∫ dΩ f(k̂)` over the direction set.
    pub fn integrate_sphere<F: FnMut(usize) -> f64>(&self, mut f: F) -> f64 {
        (0..self.n_directions()).map(|d| self.angular_weights[d] * f(d)).sum()
    }

    /// Largest angular separation between a grid direction and its nearest
    /// neighbour, used as a resolution scale.
    pub fn angular_spacing(&self) -> f64 {
        let polar = PI / self.params.n_polar as f64;
        let azimuth = 2.0 * PI / self.params.n_azimuth as f64;
        polar.max(azimuth)
    }

    /// Indices of the `count` smallest radial shells.
    pub fn smallest_shells(&self, count: usize) -> std::ops::Range<usize> {
        0..count.min(self.n_radial())
    }
}

fn radial_rule(p: &GridParams) -> (Vec<f64>, Vec<f64>) {
    let n = p.n_radial;
    let (u_min, u_max): (f64, f64) = match p.radial {
        RadialSpacing::Log => (p.k_min.ln(), p.k_max.ln()),
        RadialSpacing::LogLinear { k_switch } => (
            (p.k_min / k_switch).exp_m1().ln(),
            softplus_inverse(p.k_max / k_switch),
        ),
    };
    let h = (u_max - u_min) / (n - 1) as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let u = u_min + h * i as f64;
        let (k, dk_du) = match p.radial {
            RadialSpacing::Log => {
                let k = if i == 0 {
                    p.k_min
                } else if i == n - 1 {
                    p.k_max
                } else {
                    u.exp()
                };
                (k, k)
            }
            RadialSpacing::LogLinear { k_switch } => {
                let k = if i == 0 {
                    p.k_min
                } else if i == n - 1 {
                    p.k_max
                } else {
                    k_switch * softplus(u)
                };
                (k, k_switch * logistic(u))
            }
        };
        // Trapezoid in u: exponentially accurate for integrands that decay
        // at both ends of the u axis.
        let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        nodes.push(k);
        weights.push(end * h * dk_du * k * k);
    }
    (nodes, weights)
}

fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u + (-u).exp()
    } else {
        u.exp().ln_1p()
    }
}

fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn angular_rule(n_polar: usize, n_azimuth: usize) -> (Vec<Real3>, Vec<f64>, Vec<usize>) {
    let (mu, w_mu) = gauss_legendre(n_polar);
    let n_dir = n_polar * n_azimuth;
    let mut directions = vec![Real3::zeros(); n_dir];
    let mut weights = vec![0.0; n_dir];
    let mut antipode = vec![0usize; n_dir];
    let dphi = 2.0 * PI / n_azimuth as f64;
    let half_az = n_azimuth / 2;
    let index = |i: usize, j: usize| i * n_azimuth + j;
    for i in 0..n_polar {
        let sin_theta = (1.0 - mu[i] * mu[i]).max(0.0).sqrt();
        for j in 0..half_az {
            let phi = dphi * (j as f64 + 0.5);
            let dir = Real3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), mu[i]);
            let dir = dir / dir.norm();
            let a = index(i, j);
            // mu is mirrored exactly by construction, so the antipode of
            // (mu_i, phi_j) is (mu_{n-1-i}, phi_j + pi) and we store -dir.
            let b = index(n_polar - 1 - i, j + half_az);
            directions[a] = dir;
            directions[b] = -dir;
            antipode[a] = b;
            antipode[b] = a;
        }
        for j in 0..n_azimuth {
            weights[index(i, j)] = w_mu[i] * dphi;
        }
    }
    (directions, weights, antipode)
}
