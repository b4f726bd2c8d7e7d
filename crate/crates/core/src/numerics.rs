//! Shared numeric kernel: fixed-step ODE integration, quadrature, dense
//! linear algebra and finite-difference / spectral weights.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Largest RK4 step, in arc length.
    pub ode_step: f64,
    pub quad_points: usize,
    /// Relative residual accepted by [`linear_solve`].
    pub lin_tol: f64,
    pub eig_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ode_step: 2e-3,
            quad_points: 16,
            lin_tol: 1e-9,
            eig_tol: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ode_step > 0.0
            && self.lin_tol > 0.0
            && self.eig_tol > 0.0
            && self.quad_points >= 2
            && self.ode_step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Classical RK4 step of size `h`.
pub fn rk4_step<F>(rhs: &F, t: f64, y: &[f64], h: f64, out: &mut [f64])
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    rhs(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(t + h, &tmp, &mut k4);
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrate `y' = rhs(t, y)` and return the state at every node of `t_grid`.
///
/// Each interval between nodes is split into equal substeps no longer than
/// `max_step`, so the output lands exactly on the grid.
pub fn integrate_ode<F>(rhs: F, y0: &[f64], t_grid: &[f64], max_step: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    assert!(!t_grid.is_empty());
    assert!(max_step > 0.0);
    let mut out = Vec::with_capacity(t_grid.len());
    let mut y = y0.to_vec();
    let mut next = y.clone();
    out.push(y.clone());
    for w in t_grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        assert!(b > a, "time grid must be strictly increasing");
        let m = ((b - a) / max_step).ceil().max(1.0) as usize;
        let h = (b - a) / m as f64;
        for s in 0..m {
            let t = a + s as f64 * h;
            rk4_step(&rhs, t, &y, h, &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { last_t: t });
            }
            std::mem::swap(&mut y, &mut next);
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            } else {
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre approximation of the integral of `f` over [a, b].
pub fn quadrature_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(a < b);
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>() * h
}

/// Trapezoid rule for a periodic integrand on [a, b) with n samples.
pub fn trapezoid_periodic<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + i as f64 * h)).sum::<f64>() * h
}

/// Dense LU factorization with partial pivoting, row-major storage.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl Lu {
    pub fn new(m: &DMatrix<f64>) -> Lu {
        assert_eq!(m.nrows(), m.ncols(), "LU needs a square matrix");
        let n = m.nrows();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = m[(i, j)];
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot: f64 = 0.0;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let piv = a[k * n + k];
            min_pivot = min_pivot.min(piv.abs());
            max_pivot = max_pivot.max(piv.abs());
            if piv == 0.0 {
                continue;
            }
            let (top, rest) = a.split_at_mut((k + 1) * n);
            let row_k = &top[k * n..k * n + n];
            let update = |row: &mut [f64]| {
                let l = row[k] / piv;
                row[k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        row[j] -= l * row_k[j];
                    }
                }
            };
            if (n - k) * (n - k) > 40_000 {
                rest.par_chunks_mut(n).for_each(update);
            } else {
                rest.chunks_mut(n).for_each(update);
            }
        }
        Lu {
            n,
            a,
            perm,
            min_pivot,
            max_pivot,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Ratio of smallest to largest pivot; zero means exactly singular.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.a[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.a[i * n + j] * x[j];
            }
            x[i] = s / self.a[i * n + i];
        }
        x
    }

    /// Solve the transposed system `A^T x = b`.
    pub fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        // U^T z = b
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.a[j * n + i] * z[j];
            }
            z[i] = s / self.a[i * n + i];
        }
        // L^T y = z
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.a[j * n + i] * z[j];
            }
            z[i] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn matvec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let xv = DVector::from_column_slice(x);
    (a * xv).as_slice().to_vec()
}

/// Solve a square system and check the relative residual against `lin_tol`.
pub fn linear_solve(a: &DMatrix<f64>, b: &[f64], lin_tol: f64) -> Result<Vec<f64>> {
    let lu = Lu::new(a);
    let x = lu.solve(b);
    let r: Vec<f64> = matvec(a, &x).iter().zip(b).map(|(ax, bi)| ax - bi).collect();
    let bn = norm(b);
    let ok = x.iter().all(|v| v.is_finite()) && norm(&r) <= lin_tol * bn.max(f64::MIN_POSITIVE);
    if ok || bn == 0.0 && x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::RankDeficient {
            sigma_min: smallest_singular_value(a, 1e-10),
        })
    }
}

/// Estimate of the largest singular value by power iteration on `A^T A`.
pub fn largest_singular_value(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for (i, v) in x.iter_mut().enumerate() {
        *v *= 1.0 + 0.1 * ((i * 7919) % 13) as f64 / 13.0;
    }
    let mut s = 0.0;
    for _ in 0..200 {
        let y = matvec(a, &x);
        let z = matvec(&a.transpose(), &y);
        let nz = norm(&z);
        if nz == 0.0 {
            return 0.0;
        }
        let s_new = nz.sqrt();
        x = z.iter().map(|v| v / nz).collect();
        if (s_new - s).abs() <= 1e-12 * s_new {
            return s_new;
        }
        s = s_new;
    }
    s
}

/// Smallest singular value together with its right singular vector.
///
/// Inverse iteration on `A^T A` through an LU factorization of `A` (square
/// case) or of the triangular factor of a QR decomposition (tall case).
pub fn smallest_singular_pair(a: &DMatrix<f64>, eig_tol: f64) -> (f64, Vec<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    if n == 0 {
        return (0.0, vec![]);
    }
    if m < n {
        // wide: pad with zero rows, a null vector exists
        let full = a.clone().insert_rows(m, n - m, 0.0);
        return smallest_singular_pair(&full, eig_tol);
    }
    let square = if m == n {
        a.clone()
    } else {
        let qr = a.clone().qr();
        qr.r()
    };
    let lu = Lu::new(&square);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 2654435761usize) % 1000) as f64 / 1000.0).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma = f64::INFINITY;
    for _ in 0..300 {
        let y = lu.solve_t(&x);
        let z = lu.solve(&y);
        let nz = norm(&z);
        if !nz.is_finite() || nz == 0.0 {
            return (0.0, x);
        }
        let s_new = 1.0 / nz.sqrt();
        x = z.iter().map(|v| v / nz).collect();
        if (s_new - sigma).abs() <= eig_tol * s_new.max(f64::MIN_POSITIVE) {
            sigma = s_new;
            break;
        }
        sigma = s_new;
    }
    // Rayleigh value is more accurate than the iteration estimate.
    let ax = matvec(a, &x);
    (norm(&ax).min(sigma), x)
}

pub fn smallest_singular_value(a: &DMatrix<f64>, eig_tol: f64) -> f64 {
    smallest_singular_pair(a, eig_tol).0
}

fn is_tridiagonal(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..n {
            if (i as isize - j as isize).abs() > 1 && a[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Number of eigenvalues of the symmetric tridiagonal (d, e) below x.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] };
        q = d[i] - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiag_solve(d: &[f64], e: &[f64], shift: f64, b: &[f64]) -> Vec<f64> {
    // Gaussian elimination with partial pivoting on a tridiagonal matrix.
    let n = d.len();
    let mut diag: Vec<f64> = d.iter().map(|v| v - shift).collect();
    let mut up: Vec<f64> = e.to_vec();
    up.push(0.0);
    let mut up2 = vec![0.0; n];
    let mut low: Vec<f64> = e.to_vec();
    let mut rhs = b.to_vec();
    for k in 0..n.saturating_sub(1) {
        if low[k].abs() > diag[k].abs() {
            // swap rows k and k+1
            std::mem::swap(&mut diag[k], &mut low[k]);
            let (u_k, u_k1) = (up[k], diag[k + 1]);
            up[k] = u_k1;
            diag[k + 1] = u_k;
            let (v_k, v_k1) = (up2[k], up[k + 1]);
            up2[k] = v_k1;
            up[k + 1] = v_k;
            rhs.swap(k, k + 1);
        }
        let piv = if diag[k] == 0.0 { 1e-300 } else { diag[k] };
        let l = low[k] / piv;
        diag[k + 1] -= l * up[k];
        up[k + 1] -= l * up2[k];
        rhs[k + 1] -= l * rhs[k];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= up[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= up2[i] * x[i + 2];
        }
        let piv = if diag[i] == 0.0 { 1e-300 } else { diag[i] };
        x[i] = s / piv;
    }
    x
}

/// Smallest eigenpair of a symmetric matrix.
///
/// Tridiagonal input uses Sturm bisection followed by inverse iteration.
/// Otherwise inverse iteration from a Gershgorin shift, polished by a few
/// Rayleigh quotient steps.
pub fn symmetric_smallest_eig(a: &DMatrix<f64>, eig_tol: f64) -> (f64, Vec<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let gersh_lo = (0..n)
        .map(|i| a[(i, i)] - (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let gersh_hi = (0..n)
        .map(|i| a[(i, i)] + (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    if is_tridiagonal(a) {
        let d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let e: Vec<f64> = (0..n.saturating_sub(1)).map(|i| a[(i + 1, i)]).collect();
        let (mut lo, mut hi) = (gersh_lo, gersh_hi);
        let scale = lo.abs().max(hi.abs()).max(1e-300);
        while hi - lo > 1e-15 * scale {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if sturm_count(&d, &e, mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        let mut x = vec![1.0; n];
        for _ in 0..3 {
            x = tridiag_solve(&d, &e, lam - 1e-14 * scale, &x);
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
        }
        return (lam, x);
    }
    let shift = gersh_lo - 1e-3 * (gersh_hi - gersh_lo).abs().max(1e-12);
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = Lu::new(&m);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 40503) % 97) as f64 / 97.0).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lam = f64::INFINITY;
    for _ in 0..2000 {
        let z = lu.solve(&x);
        let nz = norm(&z);
        x = z.iter().map(|v| v / nz).collect();
        let ax = matvec(a, &x);
        let l_new: f64 = ax.iter().zip(&x).map(|(p, q)| p * q).sum();
        if (l_new - lam).abs() <= eig_tol * l_new.abs().max(1.0) {
            lam = l_new;
            break;
        }
        lam = l_new;
    }
    // Rayleigh quotient polish
    for _ in 0..3 {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] -= lam;
        }
        let lu = Lu::new(&m);
        if lu.pivot_ratio() < 1e-15 {
            break;
        }
        let z = lu.solve(&x);
        let nz = norm(&z);
        if !nz.is_finite() {
            break;
        }
        x = z.iter().map(|v| v / nz).collect();
        let ax = matvec(a, &x);
        lam = ax.iter().zip(&x).map(|(p, q)| p * q).sum();
    }
    (lam, x)
}

/// Finite-difference weights for derivatives 0..=m at `x0` from nodes `xs`
/// (Fornberg's recursion). Returns `w[k][i]` for derivative k, node i.
pub fn fornberg_weights(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Weights `w` such that `sum w_i f(x_i)` is the integral over [a, b] of the
/// polynomial interpolating f at the nodes `xs`.
pub fn interval_weights(xs: &[f64], a: f64, b: f64) -> Vec<f64> {
    let n = xs.len();
    let c = 0.5 * (a + b);
    let h = xs
        .iter()
        .map(|x| (x - c).abs())
        .fold(0.5 * (b - a).abs(), f64::max)
        .max(1e-300);
    // moments of ((x - c)/h)^k over [a, b]
    let (sa, sb) = ((a - c) / h, (b - c) / h);
    let mut vt = DMatrix::<f64>::zeros(n, n);
    let mut mom = DVector::<f64>::zeros(n);
    for k in 0..n {
        mom[k] = h * (sb.powi(k as i32 + 1) - sa.powi(k as i32 + 1)) / (k + 1) as f64;
        for (i, x) in xs.iter().enumerate() {
            vt[(k, i)] = ((x - c) / h).powi(k as i32);
        }
    }
    let w = vt.lu().solve(&mom).expect("distinct interpolation nodes");
    w.as_slice().to_vec()
}

/// Spectral differentiation matrices (first and second derivative) for n
/// equispaced samples of a 2π-periodic function, n even.
pub fn fourier_diff_matrices(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    assert!(n >= 2 && n % 2 == 0, "spectral grid needs an even size");
    let h = 2.0 * PI / n as f64;
    let mut d1 = DMatrix::zeros(n, n);
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let k = i as isize - j as isize;
            if k == 0 {
                d2[(i, j)] = -PI * PI / (3.0 * h * h) - 1.0 / 6.0;
                continue;
            }
            let sgn = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let x = k as f64 * h / 2.0;
            d1[(i, j)] = 0.5 * sgn / x.tan();
            d2[(i, j)] = -0.5 * sgn / (x.sin() * x.sin());
        }
    }
    (d1, d2)
}

/// Weights of the trigonometric interpolant through n equispaced samples on
/// [0, 2π), evaluated at `theta`.
pub fn trig_interp_weights(n: usize, theta: f64) -> Vec<f64> {
    let h = 2.0 * PI / n as f64;
    (0..n)
        .map(|j| {
            let x = theta - j as f64 * h;
            let half = 0.5 * x;
            if half.sin().abs() < 1e-14 {
                // periodic sinc equals ±1 at multiples of 2π
                let k = (x / (2.0 * PI)).round() as i64;
                if (x - k as f64 * 2.0 * PI).abs() < 1e-12 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (n as f64 * half).sin() / (n as f64 * half.tan())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_sine_and_constants() {
        let rhs = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        let out = integrate_ode(rhs, &[0.0, 1.0], &[0.0, PI / 2.0], 1e-3).unwrap();
        assert!((out[1][0] - 1.0).abs() < 1e-8);
        assert!(out[1][1].abs() < 1e-8);
        let zero = |_t: f64, _y: &[f64], d: &mut [f64]| d.iter_mut().for_each(|v| *v = 0.0);
        let out = integrate_ode(zero, &[3.0, -2.0], &[0.0, 1.0, 2.0], 0.1).unwrap();
        assert!(out.iter().all(|y| y == &vec![3.0, -2.0]));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let rhs = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        let err = |h: f64| {
            let out = integrate_ode(rhs, &[0.0, 1.0], &[0.0, 3.0], h).unwrap();
            (out[1][0] - 3f64.sin()).abs()
        };
        let ratio = err(0.05) / err(0.025);
        assert!(ratio >= 14.0, "ratio {ratio}");
    }

    #[test]
    fn divergence_reports_time() {
        let rhs = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = y[0] * y[0];
        let e = integrate_ode(rhs, &[1.0], &[0.0, 2.0], 1e-2).unwrap_err();
        match e {
            Error::Diverged { last_t } => assert!(last_t > 0.9 && last_t < 2.0),
            _ => panic!(),
        }
    }

    #[test]
    fn gauss_legendre_degree_exactness() {
        for n in 1..12 {
            for deg in 0..2 * n {
                let q = quadrature_1d(|x| x.powi(deg as i32), 0.0, 1.0, n);
                let want = 1.0 / (deg + 1) as f64;
                assert!((q - want).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn periodic_integrand_agrees_with_trapezoid() {
        let f = |x: f64| (2.0 * x).cos().powi(2);
        let g = quadrature_1d(f, 0.0, 2.0 * PI, 40);
        let t = trapezoid_periodic(f, 0.0, 2.0 * PI, 64);
        assert!((g - t).abs() < 1e-12);
        assert!((t - PI).abs() < 1e-12);
    }

    #[test]
    fn lu_solves_and_transposes() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let lu = Lu::new(&a);
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let r = matvec(&a, &x);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[2] - 3.0).abs() < 1e-14);
        let at = a.transpose();
        let y = lu.solve_t(&[1.0, -1.0, 2.0]);
        let r = matvec(&at, &y);
        assert!((r[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn fornberg_recovers_central_differences() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[1][0] + 0.5).abs() < 1e-15 && (w[1][2] - 0.5).abs() < 1e-15);
        assert!((w[2][0] - 1.0).abs() < 1e-15 && (w[2][1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn interval_weights_integrate_polynomials() {
        let xs = [0.0, 0.3, 0.5, 1.1, 1.4];
        let w = interval_weights(&xs, 0.3, 0.5);
        let q: f64 = xs.iter().zip(&w).map(|(x, wi)| wi * x.powi(4)).sum();
        let want = (0.5f64.powi(5) - 0.3f64.powi(5)) / 5.0;
        assert!((q - want).abs() < 1e-14);
    }

    #[test]
    fn spectral_derivative_of_trig_polynomial() {
        let n = 16;
        let (d1, d2) = fourier_diff_matrices(n);
        let th: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let v = DVector::from_iterator(n, th.iter().map(|t| (3.0 * t).sin() + (2.0 * t).cos()));
        let dv = &d1 * &v;
        let ddv = &d2 * &v;
        for (j, t) in th.iter().enumerate() {
            assert!((dv[j] - (3.0 * (3.0 * t).cos() - 2.0 * (2.0 * t).sin())).abs() < 1e-12);
            assert!((ddv[j] + 9.0 * (3.0 * t).sin() + 4.0 * (2.0 * t).cos()).abs() < 1e-11);
        }
        let w = trig_interp_weights(n, 0.37);
        let val: f64 = w.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        assert!((val - ((3.0f64 * 0.37).sin() + (0.74f64).cos())).abs() < 1e-13);
    }

    #[test]
    fn tridiagonal_eigen_by_bisection() {
        let n = 200;
        let h = PI / (n + 1) as f64;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0 / (h * h);
            if i + 1 < n {
                a[(i, i + 1)] = -1.0 / (h * h);
                a[(i + 1, i)] = -1.0 / (h * h);
            }
        }
        let (lam, _) = symmetric_smallest_eig(&a, 1e-12);
        // exact eigenvalue of the second-difference matrix
        let exact = 4.0 / (h * h) * (h / 2.0).sin().powi(2);
        assert!((lam - exact).abs() < 1e-9);
        assert!((lam - 1.0).abs() < 1e-4);
    }
}
