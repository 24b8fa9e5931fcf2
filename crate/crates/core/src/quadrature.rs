//! One-dimensional quadrature rules shared by the grid, the charge model and
//! the scattering integral.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
///
/// Nodes are computed for the positive half by Newton iteration on the
/// three-term recurrence and mirrored, so `x[n-1-i] == -x[i]` holds exactly.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root.
        let theta = PI * (4.0 * i as f64 + 3.0) / (4.0 * n as f64 + 2.0);
        let mut root = theta.cos()
            * (1.0 - (n as f64 - 1.0) / (8.0 * (n as f64).powi(3)));
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, root);
            deriv = dp;
            let step = p / dp;
            root -= step;
            if step.abs() <= 1e-16 * root.abs().max(1.0) {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, root);
        if dp.is_finite() {
            deriv = dp;
        }
        let weight = 2.0 / ((1.0 - root * root) * deriv * deriv);
        x[n - 1 - i] = root;
        w[n - 1 - i] = weight;
        x[i] = -root;
        w[i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}

/// Composite Simpson weights for `n` equally spaced samples with spacing `h`.
///
/// With an odd number of intervals the last three intervals use the 3/8 rule,
/// so the rule stays fourth order. Two samples fall back to the trapezoid.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => return w,
        2 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
            return w;
        }
        3 => {
            w[0] = h / 3.0;
            w[1] = 4.0 * h / 3.0;
            w[2] = h / 3.0;
            return w;
        }
        _ => {}
    }
    let intervals = n - 1;
    let simpson_intervals = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    for j in (0..simpson_intervals).step_by(2) {
        w[j] += h / 3.0;
        w[j + 1] += 4.0 * h / 3.0;
        w[j + 2] += h / 3.0;
    }
    if simpson_intervals < intervals {
        let s = simpson_intervals;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Polynomial (Neville) extrapolation of samples `(x_i, y_i)` to `x = 0`.
///
/// Returns the table diagonal: entry `p` is the value of the degree-`p`
/// interpolant through the first `p + 1` samples. Callers take the last entry
/// as the estimate and the difference of the last two as its error.
pub fn neville_to_zero<T>(xs: &[f64], ys: &[T]) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mut table: Vec<T> = ys.to_vec();
    let mut diag = Vec::with_capacity(n);
    if n == 0 {
        return diag;
    }
    diag.push(table[0]);
    for level in 1..n {
        for i in 0..n - level {
            let xi = xs[i];
            let xj = xs[i + level];
            // P_{i..j}(0) = (x_j P_{i..j-1} - x_i P_{i+1..j}) / (x_j - x_i)
            table[i] = (table[i] * xj - table[i + 1] * xi) * (1.0 / (xj - xi));
        }
        diag.push(table[0]);
    }
    diag
}
