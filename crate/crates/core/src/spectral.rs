//! One-dimensional spectral machinery: Chebyshev–Lobatto nodes on `[0, m]`,
//! barycentric interpolation and differentiation, Clenshaw–Curtis weights,
//! Gauss–Legendre rules and the periodic Fourier differentiation matrix.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Chebyshev–Lobatto nodes mapped to `[0, length]`, in increasing order.
///
/// Returns `(x, length - x)` computed separately so that both distances to the
/// endpoints keep full relative precision near the clustered ends.
pub fn lobatto_nodes(count: usize, length: f64) -> (Vec<f64>, Vec<f64>) {
    let last = (count - 1) as f64;
    let mut left = Vec::with_capacity(count);
    let mut right = Vec::with_capacity(count);
    for j in 0..count {
        let half = 0.5 * PI * j as f64 / last;
        let (s, c) = half.sin_cos();
        left.push(length * s * s);
        right.push(length * c * c);
    }
    // pin the endpoints exactly
    left[0] = 0.0;
    right[count - 1] = 0.0;
    left[count - 1] = length;
    right[0] = length;
    (left, right)
}

/// Barycentric weights of the Chebyshev–Lobatto nodes (up to a common factor).
pub fn lobatto_barycentric_weights(count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == count - 1 {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect()
}

/// First-derivative collocation matrix on the Lobatto nodes of `[0, length]`.
///
/// Off-diagonal entries use the trigonometric form of `x_i - x_j`; the diagonal
/// is the negative row sum so that constants are annihilated to roundoff.
pub fn lobatto_diff_matrix(count: usize, length: f64) -> DMatrix<f64> {
    let last = (count - 1) as f64;
    let theta: Vec<f64> = (0..count).map(|j| PI * j as f64 / last).collect();
    let w = lobatto_barycentric_weights(count);
    let mut d = DMatrix::<f64>::zeros(count, count);
    for i in 0..count {
        let mut row_sum = 0.0;
        for j in 0..count {
            if i == j {
                continue;
            }
            let diff =
                length * ((theta[i] + theta[j]) * 0.5).sin() * ((theta[i] - theta[j]) * 0.5).sin();
            let entry = (w[j] / w[i]) / diff;
            d[(i, j)] = entry;
            row_sum += entry;
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// Clenshaw–Curtis weights on the Lobatto nodes of `[0, length]`.
pub fn clenshaw_curtis_weights(count: usize, length: f64) -> Vec<f64> {
    let n = count - 1;
    let nf = n as f64;
    let mut w = vec![0.0; count];
    let theta: Vec<f64> = (0..count).map(|j| PI * j as f64 / nf).collect();
    if n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
    }
    for j in 1..n {
        let mut v = 1.0;
        if n.is_multiple_of(2) {
            for k in 1..n / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * theta[j]).cos() / (4.0 * kf * kf - 1.0);
            }
            v -= (nf * theta[j]).cos() / (nf * nf - 1.0);
        } else {
            for k in 1..=(n - 1) / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * theta[j]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        w[j] = 2.0 * v / nf;
    }
    w.iter().map(|wi| wi * 0.5 * length).collect()
}

/// Gauss–Legendre rule on `[0, 1]` with `count` points (Newton on `P_count`).
pub fn gauss_legendre_unit(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    for i in 0..count {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(count, z);
            dp = d;
            let step = p / d;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(count, z);
        dp = if d.is_finite() { d } else { dp };
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - z);
        weights[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Lagrange basis values `l_j(z)` on the given nodes, via the barycentric form.
pub fn lagrange_row(nodes: &[f64], bary: &[f64], z: f64) -> Vec<f64> {
    let mut row = vec![0.0; nodes.len()];
    for (j, &xj) in nodes.iter().enumerate() {
        if z == xj {
            row[j] = 1.0;
            return row;
        }
    }
    let mut denom = 0.0;
    for j in 0..nodes.len() {
        let t = bary[j] / (z - nodes[j]);
        row[j] = t;
        denom += t;
    }
    for r in row.iter_mut() {
        *r /= denom;
    }
    row
}

/// Barycentric interpolation of nodal `values` at `z`.
pub fn interpolate(nodes: &[f64], bary: &[f64], values: &[f64], z: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..nodes.len() {
        let dz = z - nodes[j];
        if dz == 0.0 {
            return values[j];
        }
        let t = bary[j] / dz;
        num += t * values[j];
        den += t;
    }
    num / den
}

/// Chebyshev coefficients of the interpolant through Lobatto values ordered by
/// increasing `x` (so `y = 2x/L - 1 = -cos(theta_j)`).
pub fn chebyshev_coefficients(values: &[f64]) -> Vec<f64> {
    let count = values.len();
    let n = count - 1;
    let nf = n as f64;
    let mut coeffs = vec![0.0; count];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, v) in values.iter().enumerate() {
            let half = if j == 0 || j == n { 0.5 } else { 1.0 };
            acc += half * v * (PI * (k * j) as f64 / nf).cos();
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let scale = if k == 0 || k == n { 1.0 / nf } else { 2.0 / nf };
        *c = sign * scale * acc;
    }
    coeffs
}

/// Periodic Fourier differentiation matrix on `count` uniform nodes of `[0, 1)`.
pub fn fourier_diff_matrix(count: usize) -> DMatrix<f64> {
    assert!(
        count.is_multiple_of(2),
        "periodic grids use an even node count"
    );
    let mut d = DMatrix::<f64>::zeros(count, count);
    for i in 0..count {
        for j in 0..count {
            if i == j {
                continue;
            }
            let k = i as i64 - j as i64;
            let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            d[(i, j)] = PI * sign / (PI * k as f64 / count as f64).tan();
        }
    }
    d
}

/// Dense matrix-vector product returning a plain vector.
pub fn apply(matrix: &DMatrix<f64>, values: &[f64]) -> Vec<f64> {
    let v = DVector::from_column_slice(values);
    (matrix * v).as_slice().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobatto_nodes_are_increasing_and_pinned() {
        let (x, r) = lobatto_nodes(17, 3.0);
        assert_eq!(x[0], 0.0);
        assert_eq!(x[16], 3.0);
        for j in 1..17 {
            assert!(x[j] > x[j - 1]);
            assert!((x[j] + r[j] - 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn diff_matrix_is_exact_on_polynomials() {
        let count = 20;
        let length = 2.5;
        let (x, _) = lobatto_nodes(count, length);
        let d = lobatto_diff_matrix(count, length);
        let p: Vec<f64> = x
            .iter()
            .map(|&t| t.powi(7) - 3.0 * t.powi(2) + 1.0)
            .collect();
        let dp = apply(&d, &p);
        for (i, &t) in x.iter().enumerate() {
            let exact = 7.0 * t.powi(6) - 6.0 * t;
            assert!((dp[i] - exact).abs() < 1e-9 * (1.0 + exact.abs()), "{i}");
        }
    }

    #[test]
    fn clenshaw_curtis_integrates_polynomials() {
        for &count in &[16usize, 17, 64] {
            let (x, _) = lobatto_nodes(count, 3.0);
            let w = clenshaw_curtis_weights(count, 3.0);
            let q: f64 = x.iter().zip(&w).map(|(t, wi)| wi * t.powi(9)).sum();
            let exact = 3.0f64.powi(10) / 10.0;
            assert!((q - exact).abs() < 1e-11 * exact, "{count}: {q} vs {exact}");
        }
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree() {
        let (u, w) = gauss_legendre_unit(12);
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        let q: f64 = u.iter().zip(&w).map(|(t, wi)| wi * t.powi(23)).sum();
        assert!((q - 1.0 / 24.0).abs() < 1e-14);
        assert!(u.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn chebyshev_coefficients_recover_series() {
        let count = 12;
        let (x, _) = lobatto_nodes(count, 2.0);
        // f(y) = T_0 + 0.5 T_3 with y = x - 1
        let f: Vec<f64> = x
            .iter()
            .map(|&t| {
                let y: f64 = t - 1.0;
                1.0 + 0.5 * (4.0 * y.powi(3) - 3.0 * y)
            })
            .collect();
        let c = chebyshev_coefficients(&f);
        assert!((c[0] - 1.0).abs() < 1e-13);
        assert!((c[3] - 0.5).abs() < 1e-13);
        for (k, ck) in c.iter().enumerate() {
            if k != 0 && k != 3 {
                assert!(ck.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fourier_matrix_differentiates_trig() {
        let count = 32;
        let d = fourier_diff_matrix(count);
        let x: Vec<f64> = (0..count).map(|j| j as f64 / count as f64).collect();
        let f: Vec<f64> = x.iter().map(|t| (2.0 * PI * 3.0 * t).sin()).collect();
        let df = apply(&d, &f);
        for (i, t) in x.iter().enumerate() {
            let exact = 6.0 * PI * (6.0 * PI * t).cos();
            assert!((df[i] - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomial() {
        let count = 15;
        let (x, _) = lobatto_nodes(count, 4.0);
        let b = lobatto_barycentric_weights(count);
        let f: Vec<f64> = x.iter().map(|t| t.powi(5) - t).collect();
        let z = 1.2345;
        let v = interpolate(&x, &b, &f, z);
        assert!((v - (z.powi(5) - z)).abs() < 1e-11);
        let row = lagrange_row(&x, &b, z);
        let v2: f64 = row.iter().zip(&f).map(|(a, b)| a * b).sum();
        assert!((v - v2).abs() < 1e-11);
    }
}
