//! Discrete calculus on a [`PolarGrid`].
//!
//! Nodal arrays use the grid layout `j * (nt + 1) + k` with the origin
//! repeated at `k = 0` of every ray. Derivatives along rays use 7-point
//! finite-difference stencils (centered where the ray allows), θ-derivatives
//! are spectral since rays always cover the full circle, and integrals along
//! rays use local interpolatory weights of the same width.

use crate::geodesic::PolarGrid;
use crate::numerics::{fornberg_weights, fourier_diff_matrices, interval_weights, trig_interp_weights};
use crate::surface::V3;
use nalgebra::DMatrix;
use std::f64::consts::PI;

const WIDTH: usize = 7;

#[derive(Clone, Debug)]
struct Stencil {
    start: usize,
    w: Vec<f64>,
}

/// Frame derivatives of a scalar field: `w1 = <∇w, T>`, `w2 = <∇w, E>` and
/// the covariant Hessian components in the {T, E} frame.
#[derive(Clone, Debug)]
pub struct FrameDerivs {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub w11: Vec<f64>,
    pub w12: Vec<f64>,
    pub w22: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GridOps {
    pub n: usize,
    pub nt: usize,
    pub dt: f64,
    d1: Vec<Stencil>,
    d2: Vec<Stencil>,
    cum: Vec<Stencil>,
    fd1: DMatrix<f64>,
    fd2: DMatrix<f64>,
    /// Jacobi factor and its derivatives at every node.
    pub f: Vec<f64>,
    pub f_t: Vec<f64>,
    pub f_th: Vec<f64>,
    /// Weights of the area integral ∫∫ g f dt dθ over the whole grid.
    pub area: Vec<f64>,
}

fn window(i: usize, len: usize) -> usize {
    let w = WIDTH.min(len);
    i.saturating_sub(w / 2).min(len - w)
}

impl GridOps {
    pub fn new(grid: &PolarGrid) -> GridOps {
        let nt = grid.nt;
        let len = nt + 1;
        let w = WIDTH.min(len);
        let ts: Vec<f64> = (0..len).map(|k| grid.t(k)).collect();
        let mut d1 = Vec::with_capacity(len);
        let mut d2 = Vec::with_capacity(len);
        for k in 0..len {
            let s = window(k, len);
            let c = fornberg_weights(ts[k], &ts[s..s + w], 2);
            d1.push(Stencil { start: s, w: c[1].clone() });
            d2.push(Stencil { start: s, w: c[2].clone() });
        }
        let mut cum = vec![Stencil { start: 0, w: vec![0.0; w] }];
        for i in 1..len {
            // interval [t_{i-1}, t_i], window centered on its midpoint
            let s = (i - 1).saturating_sub(w / 2 - 1).min(len - w);
            cum.push(Stencil {
                start: s,
                w: interval_weights(&ts[s..s + w], ts[i - 1], ts[i]),
            });
        }
        let (fd1, fd2) = fourier_diff_matrices(grid.n_theta);
        let f = grid.sample(|n| n.f);
        let f_t = grid.sample(|n| n.f_t);
        let mut ops = GridOps {
            n: grid.n_theta,
            nt,
            dt: grid.dt,
            d1,
            d2,
            cum,
            fd1,
            fd2,
            f: f.clone(),
            f_t,
            f_th: Vec::new(),
            area: Vec::new(),
        };
        ops.f_th = ops.d_th(&f);
        // area weights: per-ray quadrature of g f, trapezoid in θ
        let mut rw = vec![0.0; len];
        for st in &ops.cum[1..] {
            for (i, wi) in st.w.iter().enumerate() {
                rw[st.start + i] += wi;
            }
        }
        let hth = 2.0 * PI / ops.n as f64;
        let mut area = vec![0.0; ops.len()];
        for j in 0..ops.n {
            for k in 0..len {
                let i = ops.idx(j, k);
                area[i] = hth * rw[k] * ops.f[i];
            }
        }
        ops.area = area;
        ops
    }

    pub fn len(&self) -> usize {
        self.n * (self.nt + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, j: usize, k: usize) -> usize {
        j * (self.nt + 1) + k
    }

    fn along(&self, st: &[Stencil], w: &[f64]) -> Vec<f64> {
        let len = self.nt + 1;
        let mut out = vec![0.0; w.len()];
        for j in 0..self.n {
            let ray = &w[j * len..(j + 1) * len];
            for (k, s) in st.iter().enumerate() {
                out[j * len + k] = s.w.iter().zip(&ray[s.start..]).map(|(a, b)| a * b).sum();
            }
        }
        out
    }

    /// ∂t along rays.
    pub fn d_t(&self, w: &[f64]) -> Vec<f64> {
        self.along(&self.d1, w)
    }

    /// ∂t² along rays.
    pub fn d_tt(&self, w: &[f64]) -> Vec<f64> {
        self.along(&self.d2, w)
    }

    fn across(&self, m: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
        let len = self.nt + 1;
        let mut out = vec![0.0; w.len()];
        let mut col = vec![0.0; self.n];
        for k in 0..len {
            for (j, c) in col.iter_mut().enumerate() {
                *c = w[j * len + k];
            }
            for i in 0..self.n {
                let mut s = 0.0;
                for (j, c) in col.iter().enumerate() {
                    s += m[(i, j)] * c;
                }
                out[i * len + k] = s;
            }
        }
        out
    }

    /// Spectral ∂θ at fixed t.
    pub fn d_th(&self, w: &[f64]) -> Vec<f64> {
        self.across(&self.fd1, w)
    }

    /// Spectral ∂θ² at fixed t.
    pub fn d_thth(&self, w: &[f64]) -> Vec<f64> {
        self.across(&self.fd2, w)
    }

    /// ∫₀ᵗ g ds along every ray.
    pub fn cumulative(&self, g: &[f64]) -> Vec<f64> {
        let len = self.nt + 1;
        let mut out = vec![0.0; g.len()];
        for j in 0..self.n {
            let ray = &g[j * len..(j + 1) * len];
            let mut acc = 0.0;
            for k in 1..len {
                let s = &self.cum[k];
                acc += s.w.iter().zip(&ray[s.start..]).map(|(a, b)| a * b).sum::<f64>();
                out[j * len + k] = acc;
            }
        }
        out
    }

    /// ∫₀ᵗ Φ(t, s) g(s) ds with Φ(t, s) = Φ₀(s) f(t) - f(s) Φ₀(t).
    pub fn kernel_integral(&self, phi0: &[f64], g: &[f64]) -> Vec<f64> {
        let a: Vec<f64> = phi0.iter().zip(g).map(|(p, v)| p * v).collect();
        let b: Vec<f64> = self.f.iter().zip(g).map(|(p, v)| p * v).collect();
        let ca = self.cumulative(&a);
        let cb = self.cumulative(&b);
        (0..g.len()).map(|i| self.f[i] * ca[i] - phi0[i] * cb[i]).collect()
    }

    /// ∫∫ g dA over the grid.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        self.area.iter().zip(g).map(|(a, b)| a * b).sum()
    }

    /// Frame derivatives, with the origin values taken as limits along rays.
    pub fn frame_derivs(&self, w: &[f64]) -> FrameDerivs {
        let len = self.nt + 1;
        let wt = self.d_t(w);
        let wtt = self.d_tt(w);
        let wth = self.d_th(w);
        let wthth = self.d_thth(w);
        let wtth = self.d_th(&wt);
        let wttth = self.d_th(&wtt);
        let m = w.len();
        let mut d = FrameDerivs {
            w1: wt.clone(),
            w2: vec![0.0; m],
            w11: wtt.clone(),
            w12: vec![0.0; m],
            w22: vec![0.0; m],
        };
        let mean_tt0 = (0..self.n).map(|j| wtt[j * len]).sum::<f64>() / self.n as f64;
        for j in 0..self.n {
            for k in 0..len {
                let i = j * len + k;
                if k == 0 {
                    d.w2[i] = wtth[i];
                    d.w12[i] = 0.5 * wttth[i];
                    d.w22[i] = 2.0 * mean_tt0 - wtt[i];
                    continue;
                }
                let (f, ft, fth) = (self.f[i], self.f_t[i], self.f_th[i]);
                let w2 = wth[i] / f;
                d.w2[i] = w2;
                d.w12[i] = (wtth[i] - ft * w2) / f;
                d.w22[i] = wthth[i] / (f * f) - fth * wth[i] / (f * f * f) + ft / f * wt[i];
            }
        }
        d
    }

    /// Expand an unknown vector (origin first, then ray j, k = 1..=nt) to a
    /// nodal array.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let len = self.nt + 1;
        let mut out = vec![0.0; self.len()];
        for j in 0..self.n {
            out[j * len] = x[0];
            for k in 1..len {
                out[j * len + k] = x[1 + j * self.nt + (k - 1)];
            }
        }
        out
    }

    /// Inverse of [`expand`](Self::expand); the origin value is averaged
    /// over rays.
    pub fn compress(&self, w: &[f64]) -> Vec<f64> {
        let len = self.nt + 1;
        let mut x = vec![0.0; 1 + self.n * self.nt];
        x[0] = (0..self.n).map(|j| w[j * len]).sum::<f64>() / self.n as f64;
        for j in 0..self.n {
            for k in 1..len {
                x[1 + j * self.nt + (k - 1)] = w[j * len + k];
            }
        }
        x
    }

    pub fn unknowns(&self) -> usize {
        1 + self.n * self.nt
    }

    /// Interpolate a nodal array at polar coordinates (t, θ): trigonometric
    /// in θ, Lagrange in t. Returns the value and its (∂t, ∂θ) derivatives.
    pub fn interp(&self, w: &[f64], t: f64, theta: f64) -> (f64, f64, f64) {
        let len = self.nt + 1;
        let wl = WIDTH.min(len);
        let kc = ((t / self.dt).round().max(0.0) as usize).min(self.nt);
        let s = window(kc, len);
        let ts: Vec<f64> = (s..s + wl).map(|k| k as f64 * self.dt).collect();
        let lw = fornberg_weights(t, &ts, 1);
        let tw = trig_interp_weights(self.n, theta);
        let h = 1e-6;
        let twp = trig_interp_weights(self.n, theta + h);
        let twm = trig_interp_weights(self.n, theta - h);
        let (mut v, mut vt, mut vth) = (0.0, 0.0, 0.0);
        for (q, k) in (s..s + wl).enumerate() {
            let (mut a, mut b) = (0.0, 0.0);
            for j in 0..self.n {
                let x = w[j * len + k];
                a += tw[j] * x;
                b += (twp[j] - twm[j]) / (2.0 * h) * x;
            }
            v += lw[0][q] * a;
            vt += lw[1][q] * a;
            vth += lw[0][q] * b;
        }
        (v, vt, vth)
    }
}

/// Ambient positions, tangents and Jacobi-scaled transverse vectors of the
/// grid, used to locate points in polar coordinates.
#[derive(Clone, Debug)]
pub struct Locator {
    pos: [Vec<f64>; 3],
    tan: [Vec<f64>; 3],
    fe: [Vec<f64>; 3],
}

impl Locator {
    pub fn new(grid: &PolarGrid) -> Locator {
        let comp = |g: &dyn Fn(&crate::geodesic::RayNode) -> V3, c: usize| grid.sample(|n| g(n)[c]);
        let p = |n: &crate::geodesic::RayNode| n.position;
        let t = |n: &crate::geodesic::RayNode| n.tangent;
        let e = |n: &crate::geodesic::RayNode| n.transverse * n.f;
        Locator {
            pos: [comp(&p, 0), comp(&p, 1), comp(&p, 2)],
            tan: [comp(&t, 0), comp(&t, 1), comp(&t, 2)],
            fe: [comp(&e, 0), comp(&e, 1), comp(&e, 2)],
        }
    }

    fn eval(&self, ops: &GridOps, t: f64, th: f64) -> (V3, V3, V3) {
        let mut x = V3::zeros();
        let mut xt = V3::zeros();
        let mut xth = V3::zeros();
        for c in 0..3 {
            x[c] = ops.interp(&self.pos[c], t, th).0;
            xt[c] = ops.interp(&self.tan[c], t, th).0;
            xth[c] = ops.interp(&self.fe[c], t, th).0;
        }
        (x, xt, xth)
    }

    /// Polar coordinates of an ambient point on the surface, if it lies
    /// within the grid (t ≤ t_max). Newton iteration from the nearest node.
    pub fn locate(&self, ops: &GridOps, p: &V3) -> Option<(f64, f64)> {
        let len = ops.nt + 1;
        let mut best = (f64::INFINITY, 0, 0);
        for j in 0..ops.n {
            for k in 0..len {
                let i = j * len + k;
                let d = (V3::new(self.pos[0][i], self.pos[1][i], self.pos[2][i]) - p).norm_squared();
                if d < best.0 {
                    best = (d, j, k);
                }
            }
        }
        let mut t = best.2 as f64 * ops.dt;
        let mut th = 2.0 * PI * best.1 as f64 / ops.n as f64;
        if best.2 == 0 {
            if best.0 < 1e-28 {
                return Some((0.0, 0.0));
            }
            t = 0.5 * ops.dt;
        }
        let tmax = ops.nt as f64 * ops.dt;
        for _ in 0..50 {
            let (x, xt, xth) = self.eval(ops, t, th);
            let r = p - x;
            // least squares on the tangent plane
            let a11 = xt.dot(&xt);
            let a12 = xt.dot(&xth);
            let a22 = xth.dot(&xth);
            let b1 = xt.dot(&r);
            let b2 = xth.dot(&r);
            let det = a11 * a22 - a12 * a12;
            if det.abs() < 1e-300 {
                break;
            }
            let dt = (a22 * b1 - a12 * b2) / det;
            let dth = (a11 * b2 - a12 * b1) / det;
            t += dt;
            th += dth;
            if t < 0.0 {
                t = -t;
                th += PI;
            }
            if dt.abs() + dth.abs() * t.max(1e-3) < 1e-13 {
                break;
            }
        }
        let (x, _, _) = self.eval(ops, t, th);
        let th = th.rem_euclid(2.0 * PI);
        if (x - p).norm() < 1e-7 && t <= tmax * (1.0 + 1e-9) {
            Some((t, th))
        } else {
            None
        }
    }
}
