//! Real and complex 3-vectors and the handful of mixed products the
//! Fourier-space formulas need.

use nalgebra::Vector3;
use num_complex::Complex64;

pub type Real3 = Vector3<f64>;
pub type Complex3 = Vector3<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn complexify(v: &Real3) -> Complex3 {
    Complex3::new(v.x.into(), v.y.into(), v.z.into())
}

#[inline]
pub fn czero() -> Complex3 {
    Complex3::zeros()
}

/// `a · z` without conjugation, for real `a`.
#[inline]
pub fn rdot(a: &Real3, z: &Complex3) -> Complex64 {
    z.x * a.x + z.y * a.y + z.z * a.z
}

/// `a × z` for real `a`.
#[inline]
pub fn rcross(a: &Real3, z: &Complex3) -> Complex3 {
    Complex3::new(
        z.z * a.y - z.y * a.z,
        z.x * a.z - z.z * a.x,
        z.y * a.x - z.x * a.y,
    )
}

#[inline]
pub fn norm_sqr(z: &Complex3) -> f64 {
    z.x.norm_sqr() + z.y.norm_sqr() + z.z.norm_sqr()
}

#[inline]
pub fn conj(z: &Complex3) -> Complex3 {
    z.map(|c| c.conj())
}

#[inline]
pub fn re(z: &Complex3) -> Real3 {
    z.map(|c| c.re)
}

#[inline]
pub fn im(z: &Complex3) -> Real3 {
    z.map(|c| c.im)
}

/// Transverse projection `z − (n·z) n` for a unit vector `n`.
#[inline]
pub fn transverse(n: &Real3, z: &Complex3) -> Complex3 {
    let along = rdot(n, z);
    z - complexify(n) * along
}

/// Longitudinal projection `(n·z) n`.
#[inline]
pub fn longitudinal(n: &Real3, z: &Complex3) -> Complex3 {
    complexify(n) * rdot(n, z)
}

#[inline]
pub fn max_abs_diff(a: &Complex3, b: &Complex3) -> f64 {
    (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub fn check_subluminal(v: &Real3) -> crate::Result<()> {
    let speed = v.norm();
    if speed.is_finite() && speed < 1.0 {
        Ok(())
    } else {
        Err(crate::Error::Superluminal(speed))
    }
}
