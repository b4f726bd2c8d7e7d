//! Negative curvature: in coordinates (s, ϑ) with ⟨∂s, ∂ϑ⟩ = 0 and
//! Π(∂s, ∂ϑ) = 0 the characteristic equation becomes the wave equation
//!
//! ```text
//! w_ss = (a w_ϑ)_ϑ + B̃w,   a = -Π(∂s, ∂s)/Π(∂ϑ, ∂ϑ) > 0,
//! ```
//!
//! obtained by dividing by Π(∂ϑ, ∂ϑ)/(|∂s|²|∂ϑ|²). B̃ has a local part
//! (connection and κ trΠ terms) and a nonlocal part made of integrals along
//! geodesics from a base point o. Cauchy data are given on s = 0 and
//! evolved in s by leapfrog.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodesic::{build_polar_grid, shoot_ray, GridSpec, OriginFrame};
use crate::grid::{GridOps, Locator};
use crate::numerics::{fornberg_weights, fourier_diff_matrices, interval_weights, Tolerances};
use crate::surface::{to_v3, Surface, V3};

use std::f64::consts::PI;

/// Angular extent of the chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Angles {
    /// ϑ ∈ [0, 2π), n nodes (n even).
    Periodic(usize),
    /// ϑ ∈ [start, start + width], n + 1 nodes.
    Sector { start: f64, width: f64, n: usize },
}

/// Chart u = u₀ + s, v = ϑ of a surface (or a synthetic coefficient field)
/// with the coefficients of the wave equation at the nodes. Node (i, j) is
/// level s_i = i h and angle ϑ_j; index i m + j.
#[derive(Clone, Debug)]
pub struct HyperbolicChart {
    pub surface: Option<Surface>,
    pub u0: f64,
    pub h: f64,
    pub ns: usize,
    /// Nodes per level.
    pub m: usize,
    pub theta0: f64,
    pub dth: f64,
    pub periodic: bool,
    pub a: Vec<f64>,
    pub a_th: Vec<f64>,
    /// Local lower-order terms: B̃_loc w = -a_ϑ w_ϑ + c_s w_s + c_th w_ϑ + c_0 w.
    pub c_s: Vec<f64>,
    pub c_th: Vec<f64>,
    pub c_0: Vec<f64>,
    /// |∂s|²|∂ϑ|²/Π(∂ϑ, ∂ϑ), the factor in front of the nonlocal terms.
    pub scale: Vec<f64>,
    pub g_ss: Vec<f64>,
    pub g_tt: Vec<f64>,
    pub pi_ss: Vec<f64>,
    pub pi_tt: Vec<f64>,
    d1: Option<DMatrix<f64>>,
}

fn angles(a: Angles) -> Result<(f64, f64, usize, bool)> {
    match a {
        Angles::Periodic(n) => {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidParams(format!("periodic grid needs an even n ≥ 4, got {n}")));
            }
            Ok((0.0, 2.0 * PI / n as f64, n, true))
        }
        Angles::Sector { start, width, n } => {
            if !(width > 0.0 && width < 2.0 * PI) || n < 4 {
                return Err(Error::InvalidParams(format!("sector width {width} with {n} cells")));
            }
            Ok((start, width / n as f64, n + 1, false))
        }
    }
}

struct NodeCoeffs {
    g_ss: f64,
    g_st: f64,
    g_tt: f64,
    pi_ss: f64,
    pi_st: f64,
    pi_tt: f64,
    c_s: f64,
    c_th: f64,
    c_0: f64,
}

fn node_coeffs(surface: &Surface, u: f64, v: f64) -> Result<NodeCoeffs> {
    if !surface.contains(u, v) {
        return Err(Error::OutsideDomain { u, v });
    }
    let j = surface.jets(u, v, 2);
    let g = j.metric();
    let p = j.second_form();
    let gam = j.christoffel();
    let kappa = p.determinant() / g.determinant();
    let (g_ss, g_tt) = (g[(0, 0)], g[(1, 1)]);
    let (pi_ss, pi_tt) = (p[(0, 0)], p[(1, 1)]);
    let a = -pi_ss / pi_tt;
    let scale = g_ss * g_tt / pi_tt;
    let tr = pi_ss / g_ss + pi_tt / g_tt;
    Ok(NodeCoeffs {
        g_ss,
        g_st: g[(0, 1)],
        g_tt,
        pi_ss,
        pi_st: p[(0, 1)],
        pi_tt,
        c_s: gam[0][(0, 0)] - a * gam[0][(1, 1)],
        c_th: gam[1][(0, 0)] - a * gam[1][(1, 1)],
        c_0: -scale * kappa * tr,
    })
}

impl HyperbolicChart {
    /// Sample the chart u = u0 + s, s ∈ [0, b] in `ns` steps, and verify
    /// ⟨∂s, ∂ϑ⟩ = 0, Π(∂s, ∂ϑ) = 0 (relative 1e-8) and that Π(∂s, ∂s) and
    /// Π(∂ϑ, ∂ϑ) have opposite signs (a > 0). Violations are listed.
    pub fn check_assumptions(surface: &Surface, u0: f64, b: f64, ns: usize, ang: Angles) -> Result<HyperbolicChart> {
        if !(b > 0.0) || ns < 2 {
            return Err(Error::InvalidParams(format!("evolution length {b} in {ns} steps")));
        }
        let (theta0, dth, m, periodic) = angles(ang)?;
        let h = b / ns as f64;
        let nodes: Vec<(f64, f64)> = (0..=ns)
            .flat_map(|i| (0..m).map(move |j| (i as f64 * h, theta0 + j as f64 * dth)))
            .collect();
        let coeffs: Vec<NodeCoeffs> = nodes
            .par_iter()
            .map(|&(s, th)| node_coeffs(surface, u0 + s, th))
            .collect::<Result<_>>()?;
        let mut bad = Vec::new();
        for (&(s, th), c) in nodes.iter().zip(&coeffs) {
            let mut why = Vec::new();
            if c.g_st.abs() > 1e-8 * (c.g_ss * c.g_tt).sqrt() {
                why.push("<∂s,∂ϑ> ≠ 0");
            }
            if c.pi_st.abs() > 1e-8 * (c.pi_ss.abs() + c.pi_tt.abs()) {
                why.push("Π(∂s,∂ϑ) ≠ 0");
            }
            if !(c.pi_ss * c.pi_tt < 0.0) {
                why.push("Π(∂s,∂s) and Π(∂ϑ,∂ϑ) not of opposite signs");
            }
            if !why.is_empty() {
                bad.push(format!("(s, ϑ) = ({s:.4}, {th:.4}): {}", why.join(", ")));
            }
        }
        if !bad.is_empty() {
            let n = bad.len();
            bad.truncate(5);
            return Err(Error::Regime(format!(
                "hyperbolic chart assumptions fail at {n} nodes, e.g. {}",
                bad.join("; ")
            )));
        }
        let a: Vec<f64> = coeffs.iter().map(|c| -c.pi_ss / c.pi_tt).collect();
        let delta = 1e-5;
        let a_th = nodes
            .par_iter()
            .map(|&(s, th)| {
                let ap = node_coeffs(surface, u0 + s, th + delta)?;
                let am = node_coeffs(surface, u0 + s, th - delta)?;
                Ok((-ap.pi_ss / ap.pi_tt + am.pi_ss / am.pi_tt) / (2.0 * delta))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(HyperbolicChart {
            surface: Some(surface.clone()),
            u0,
            h,
            ns,
            m,
            theta0,
            dth,
            periodic,
            a,
            a_th,
            c_s: coeffs.iter().map(|c| c.c_s).collect(),
            c_th: coeffs.iter().map(|c| c.c_th).collect(),
            c_0: coeffs.iter().map(|c| c.c_0).collect(),
            scale: coeffs.iter().map(|c| c.g_ss * c.g_tt / c.pi_tt).collect(),
            g_ss: coeffs.iter().map(|c| c.g_ss).collect(),
            g_tt: coeffs.iter().map(|c| c.g_tt).collect(),
            pi_ss: coeffs.iter().map(|c| c.pi_ss).collect(),
            pi_tt: coeffs.iter().map(|c| c.pi_tt).collect(),
            d1: periodic.then(|| fourier_diff_matrices(m).0),
        })
    }

    /// Chart with a prescribed coefficient a(s, ϑ) and no lower-order terms.
    pub fn synthetic<F: Fn(f64, f64) -> f64>(a: F, a_th: impl Fn(f64, f64) -> f64, b: f64, ns: usize, ang: Angles) -> Result<HyperbolicChart> {
        if !(b > 0.0) || ns < 2 {
            return Err(Error::InvalidParams(format!("evolution length {b} in {ns} steps")));
        }
        let (theta0, dth, m, periodic) = angles(ang)?;
        let h = b / ns as f64;
        let nodes: Vec<(f64, f64)> = (0..=ns)
            .flat_map(|i| (0..m).map(move |j| (i as f64 * h, theta0 + j as f64 * dth)))
            .collect();
        let av: Vec<f64> = nodes.iter().map(|&(s, t)| a(s, t)).collect();
        if let Some(bad) = av.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Regime(format!("coefficient a = {bad} is not positive")));
        }
        let len = nodes.len();
        Ok(HyperbolicChart {
            surface: None,
            u0: 0.0,
            h,
            ns,
            m,
            theta0,
            dth,
            periodic,
            a: av,
            a_th: nodes.iter().map(|&(s, t)| a_th(s, t)).collect(),
            c_s: vec![0.0; len],
            c_th: vec![0.0; len],
            c_0: vec![0.0; len],
            scale: vec![0.0; len],
            g_ss: vec![1.0; len],
            g_tt: vec![1.0; len],
            pi_ss: vec![0.0; len],
            pi_tt: vec![0.0; len],
            d1: periodic.then(|| fourier_diff_matrices(m).0),
        })
    }

    pub fn len(&self) -> usize {
        (self.ns + 1) * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }

    pub fn s(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.theta0 + j as f64 * self.dth
    }

    pub fn b(&self) -> f64 {
        self.ns as f64 * self.h
    }

    /// Ambient position of node (i, j).
    pub fn position(&self, i: usize, j: usize) -> Option<V3> {
        let s = self.surface.as_ref()?;
        Some(to_v3(&s.point(self.u0 + self.s(i), self.theta(j))))
    }

    /// Sample a function of (s, ϑ) on the nodes.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..=self.ns)
            .flat_map(|i| (0..self.m).map(move |j| (i, j)))
            .map(|(i, j)| f(self.s(i), self.theta(j)))
            .collect()
    }

    /// Largest step allowed by the CFL condition: c/(M √a_max) with
    /// M = m/2 retained modes (spectral), c Δϑ/√a_max (sector).
    pub fn max_step(&self, cfl: f64) -> f64 {
        let amax = self.a.iter().fold(0.0_f64, |m, v| m.max(*v)).sqrt();
        if self.periodic {
            cfl / ((self.m / 2) as f64 * amax)
        } else {
            cfl * self.dth / amax
        }
    }

    fn d_theta(&self, w: &[f64]) -> Vec<f64> {
        match &self.d1 {
            Some(d1) => (d1 * DVector::from_column_slice(w)).as_slice().to_vec(),
            None => {
                let mut out = vec![0.0; self.m];
                for j in 1..self.m - 1 {
                    out[j] = (w[j + 1] - w[j - 1]) / (2.0 * self.dth);
                }
                out
            }
        }
    }

    /// (a w_ϑ)_ϑ on level i, plus the local part of B̃ without the w_s term.
    fn spatial(&self, i: usize, w: &[f64], local: bool) -> Vec<f64> {
        let m = self.m;
        let base = i * m;
        let a = &self.a[base..base + m];
        let wt = self.d_theta(w);
        let mut out = if self.periodic {
            let aw: Vec<f64> = wt.iter().zip(a).map(|(x, y)| x * y).collect();
            self.d_theta(&aw)
        } else {
            let mut o = vec![0.0; m];
            let h2 = self.dth * self.dth;
            for j in 1..m - 1 {
                let ap = 0.5 * (a[j] + a[j + 1]);
                let am = 0.5 * (a[j] + a[j - 1]);
                o[j] = (ap * (w[j + 1] - w[j]) - am * (w[j] - w[j - 1])) / h2;
            }
            o
        };
        if local {
            for j in 0..m {
                let q = base + j;
                out[j] += (self.c_th[q] - self.a_th[q]) * wt[j] + self.c_0[q] * w[j];
            }
        }
        if !self.periodic {
            out[0] = 0.0;
            out[m - 1] = 0.0;
        }
        out
    }
}

/// Nonlocal part of B̃ as a linear map of the nodal values:
/// -scale · [κ₁ ∫₀ᵗ wΠ₁₁ - κ₂ ∫₀ᵗ Φ(t, s) P(w) ds + w(o) Π(σ̇, σ)(o) κ₂ f(t)],
/// with the integrals taken along the geodesic from o to each node and w,
/// ∇w interpolated from the chart nodes.
#[derive(Clone, Debug)]
pub struct Nonlocal {
    /// Chart coordinates (s, ϑ) of o.
    pub origin: [f64; 2],
    pub matrix: DMatrix<f64>,
}

/// Interpolation weights at x for values, first derivatives, on a uniform
/// grid x0 + k dx (k < n), with a 6-point window.
fn stencil(x: f64, x0: f64, dx: f64, n: usize, periodic: bool) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let width = 6.min(n);
    let r = (x - x0) / dx;
    let k0 = r.floor() as i64 - (width as i64 / 2 - 1);
    let k0 = if periodic { k0 } else { k0.clamp(0, (n - width) as i64) };
    let ks: Vec<i64> = (k0..k0 + width as i64).collect();
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let w = fornberg_weights(r, &xs, 1);
    let idx = ks.iter().map(|&k| k.rem_euclid(n as i64) as usize).collect();
    (idx, w[0].clone(), w[1].iter().map(|v| v / dx).collect())
}

impl Nonlocal {
    /// Build the operator for base point o at chart coordinates `origin`,
    /// with `ray_steps` quadrature intervals per geodesic. Fails with a
    /// coverage error if some node is not reached from o by a geodesic
    /// inside the chart.
    pub fn new(chart: &HyperbolicChart, origin: [f64; 2], ray_steps: usize, tol: &Tolerances) -> Result<Nonlocal> {
        let surface = chart
            .surface
            .as_ref()
            .ok_or_else(|| Error::Precondition("nonlocal terms need a surface chart".into()))?;
        if ray_steps < 6 {
            return Err(Error::InvalidParams("at least 6 steps per geodesic".into()));
        }
        let o_uv = [chart.u0 + origin[0], origin[1]];
        let frame = OriginFrame::new(surface, o_uv)?;
        let o_pos = frame.point.position;
        let mut reach: f64 = 0.0;
        for i in 0..=chart.ns {
            for j in 0..chart.m {
                reach = reach.max((chart.position(i, j).unwrap() - o_pos).norm());
            }
        }
        let grid = build_polar_grid(surface, o_uv, GridSpec::new(32, 32, 1.6 * reach + 1e-3), tol)
            .map_err(|e| Error::Coverage(format!("polar grid about o: {e}")))?;
        let ops = GridOps::new(&grid);
        let loc = Locator::new(&grid);
        // quadrature weights on k dt, k = 0..=K, for ∫₀^{K dt}, unit dt
        let kk = ray_steps;
        let mut qw = vec![0.0; kk + 1];
        let xs: Vec<f64> = (0..=kk).map(|k| k as f64).collect();
        for iv in 0..kk {
            let st = iv.saturating_sub(3).min(kk + 1 - 7);
            let w = interval_weights(&xs[st..st + 7], iv as f64, iv as f64 + 1.0);
            for (q, wq) in w.iter().enumerate() {
                qw[st + q] += wq;
            }
        }
        let (sl, sh) = (-1e-8, chart.b() + 1e-8);
        let (tl, th) = (chart.theta0 - 1e-8, chart.theta0 + (chart.m - 1) as f64 * chart.dth + 1e-8);
        let locate = |u: f64, v: f64| -> Result<(f64, f64)> {
            let s = u - chart.u0;
            let t = if chart.periodic { v.rem_euclid(2.0 * PI) } else { v };
            if s < sl || s > sh || (!chart.periodic && (t < tl || t > th)) {
                return Err(Error::Coverage(format!(
                    "geodesic from o leaves the chart at (s, ϑ) = ({s:.4}, {t:.4})"
                )));
            }
            Ok((s, t))
        };
        let o_st = locate(o_uv[0], o_uv[1])?;
        let o_w = {
            let (si, sw, _) = stencil(o_st.0, 0.0, chart.h, chart.ns + 1, false);
            let (ti, tw, _) = stencil(o_st.1, chart.theta0, chart.dth, chart.m, chart.periodic);
            (si, sw, ti, tw)
        };
        let n = chart.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|p| -> Result<Vec<f64>> {
                let (i, j) = (p / chart.m, p % chart.m);
                let mut row = vec![0.0; n];
                let x = chart.position(i, j).unwrap();
                let (t, theta) = loc
                    .locate(&ops, &x)
                    .ok_or_else(|| Error::Coverage(format!("node (s, ϑ) = ({:.4}, {:.4}) not reached from o", chart.s(i), chart.theta(j))))?;
                if t < 1e-10 {
                    return Ok(row);
                }
                let dt = t / kk as f64;
                let ray = shoot_ray(surface, &frame, theta, dt, kk, tol, false);
                if ray.valid_steps() < kk {
                    return Err(Error::Coverage(format!("geodesic to node ({i}, {j}) stops early")));
                }
                let end = &ray.nodes[kk];
                let (k1, k2, ft, p0t) = (end.k1, end.k2, end.f, end.phi0);
                for (q, nd) in ray.nodes.iter().enumerate() {
                    let (s, th) = locate(nd.uv[0], nd.uv[1])?;
                    let jets = surface.jets(nd.uv[0], nd.uv[1], 1);
                    let gi = jets.inverse_metric();
                    let (xu, xv) = jets.basis();
                    let gs = xu * gi[(0, 0)] + xv * gi[(1, 0)];
                    let gt = xu * gi[(0, 1)] + xv * gi[(1, 1)];
                    let wq = qw[q] * dt;
                    let phi = ft * nd.phi0 - p0t * nd.f;
                    let [p11, p12, _] = nd.pi;
                    let ca = k1 * wq * p11 + k2 * wq * phi * nd.dpi[1];
                    let cgrad = |g: &V3| -k2 * wq * phi * (-2.0 * p12 * g.dot(&nd.tangent) + p11 * g.dot(&nd.transverse));
                    let (cb, cc) = (cgrad(&gs), cgrad(&gt));
                    let (si, sw0, sw1) = stencil(s, 0.0, chart.h, chart.ns + 1, false);
                    let (ti, tw0, tw1) = stencil(th, chart.theta0, chart.dth, chart.m, chart.periodic);
                    for (a, &ii) in si.iter().enumerate() {
                        for (b, &jj) in ti.iter().enumerate() {
                            row[ii * chart.m + jj] += ca * sw0[a] * tw0[b] + cb * sw1[a] * tw0[b] + cc * sw0[a] * tw1[b];
                        }
                    }
                }
                let co = k2 * ray.nodes[0].pi[1] * ft;
                let (si, sw, ti, tw) = &o_w;
                for (a, &ii) in si.iter().enumerate() {
                    for (b, &jj) in ti.iter().enumerate() {
                        row[ii * chart.m + jj] += co * sw[a] * tw[b];
                    }
                }
                let sc = -chart.scale[p];
                row.iter_mut().for_each(|v| *v *= sc);
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let matrix = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
        Ok(Nonlocal { origin, matrix })
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(w)).as_slice().to_vec()
    }
}

/// Which lower-order terms enter the evolution.
#[derive(Clone, Copy, Debug)]
pub enum Lower<'a> {
    /// w_ss = (a w_ϑ)_ϑ.
    Suppressed,
    /// Local part of B̃ only.
    Local,
    /// Local and nonlocal parts.
    Full(&'a Nonlocal),
}

impl Lower<'_> {
    fn local(&self) -> bool {
        !matches!(self, Lower::Suppressed)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub cfl: f64,
    /// Relative change at which the fixed-point iteration for the nonlocal
    /// terms stops.
    pub picard_tol: f64,
    pub picard_max: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            cfl: 0.5,
            picard_tol: 1e-11,
            picard_max: 60,
        }
    }
}

/// Cauchy data on s = 0 sampled at the chart angles.
#[derive(Clone, Debug)]
pub struct CauchyData {
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
}

impl CauchyData {
    /// On a periodic chart w₁ must have zero mean (1e-12 relative).
    pub fn new<F0: Fn(f64) -> f64, F1: Fn(f64) -> f64>(chart: &HyperbolicChart, w0: F0, w1: F1) -> Result<CauchyData> {
        let w0: Vec<f64> = (0..chart.m).map(|j| w0(chart.theta(j))).collect();
        let w1: Vec<f64> = (0..chart.m).map(|j| w1(chart.theta(j))).collect();
        if chart.periodic {
            let mean = w1.iter().sum::<f64>() / chart.m as f64;
            let size = w1.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            if mean.abs() > 1e-12 * size {
                return Err(Error::Precondition(format!("w1 has mean {mean:.3e}, expected 0")));
            }
        }
        Ok(CauchyData { w0, w1 })
    }
}

/// Solution on all levels, index i m + j.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub m: usize,
    pub ns: usize,
    pub h: f64,
    pub w: Vec<f64>,
    pub picard_iterations: usize,
}

impl Evolution {
    pub fn level(&self, i: usize) -> &[f64] {
        &self.w[i * self.m..(i + 1) * self.m]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.m + j]
    }
}

fn check_cfl(chart: &HyperbolicChart, opts: &EvolveOptions) -> Result<()> {
    let hmax = chart.max_step(opts.cfl);
    if chart.h > hmax {
        return Err(Error::Stability(format!(
            "step {:.4e} exceeds the CFL bound {:.4e}; use at least {} steps",
            chart.h,
            hmax,
            (chart.b() / hmax).ceil()
        )));
    }
    Ok(())
}

/// Leapfrog from two given levels; the w_s term is centered, which makes
/// each step an explicit pointwise division.
fn march(chart: &HyperbolicChart, first: &[f64], second: &[f64], local: bool, forcing: Option<&[f64]>, sides: Option<(&[f64], &[f64])>) -> Vec<f64> {
    let m = chart.m;
    let h = chart.h;
    let mut w = vec![0.0; chart.len()];
    w[..m].copy_from_slice(first);
    w[m..2 * m].copy_from_slice(second);
    for i in 1..chart.ns {
        let cur = w[i * m..(i + 1) * m].to_vec();
        let r = chart.spatial(i, &cur, local);
        for j in 0..m {
            let q = i * m + j;
            let f = forcing.map_or(0.0, |f| f[q]);
            let half = if local { 0.5 * h * chart.c_s[q] } else { 0.0 };
            let prev = w[q - m];
            w[q + m] = (2.0 * cur[j] - prev * (1.0 + half) + h * h * (r[j] + f)) / (1.0 - half);
        }
        if let Some((h1, h2)) = sides {
            w[(i + 1) * m] = h1[i + 1];
            w[(i + 1) * m + m - 1] = h2[i + 1];
        }
    }
    w
}

/// Second level from Taylor expansion: w + h w₁ + h²/2 w_ss(0).
fn start_level(chart: &HyperbolicChart, data: &CauchyData, local: bool, forcing: Option<&[f64]>) -> Vec<f64> {
    let h = chart.h;
    let r = chart.spatial(0, &data.w0, local);
    (0..chart.m)
        .map(|j| {
            let f = forcing.map_or(0.0, |f| f[j]);
            let cs = if local { chart.c_s[j] * data.w1[j] } else { 0.0 };
            data.w0[j] + h * data.w1[j] + 0.5 * h * h * (r[j] + cs + f)
        })
        .collect()
}

fn evolve(chart: &HyperbolicChart, data: &CauchyData, lower: Lower, opts: &EvolveOptions, sides: Option<(&[f64], &[f64])>) -> Result<Evolution> {
    check_cfl(chart, opts)?;
    if data.w0.len() != chart.m || data.w1.len() != chart.m {
        return Err(Error::InvalidParams("Cauchy data size does not match the chart".into()));
    }
    let local = lower.local();
    let run = |forcing: Option<&[f64]>| {
        let mut second = start_level(chart, data, local, forcing);
        if let Some((h1, h2)) = sides {
            second[0] = h1[1];
            second[chart.m - 1] = h2[1];
        }
        march(chart, &data.w0, &second, local, forcing, sides)
    };
    let mut w = run(None);
    let mut iterations = 0;
    if let Lower::Full(nl) = lower {
        loop {
            iterations += 1;
            let f = nl.apply(&w);
            let next = run(Some(&f));
            let size = next.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            let change = next.iter().zip(&w).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            w = next;
            if !w.iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged { last_t: chart.b() });
            }
            if change <= opts.picard_tol * size {
                break;
            }
            if iterations >= opts.picard_max {
                return Err(Error::Diverged { last_t: chart.b() });
            }
        }
    }
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged { last_t: chart.b() });
    }
    Ok(Evolution {
        m: chart.m,
        ns: chart.ns,
        h: chart.h,
        w,
        picard_iterations: iterations,
    })
}

/// Evolve periodic Cauchy data over the chart's s-range.
pub fn evolve_cauchy(chart: &HyperbolicChart, data: &CauchyData, lower: Lower, opts: &EvolveOptions) -> Result<Evolution> {
    if !chart.periodic {
        return Err(Error::Precondition("periodic evolution needs a periodic chart; use evolve_with_sides".into()));
    }
    evolve(chart, data, lower, opts, None)
}

/// Continue the leapfrog from two consecutive levels (used to run the
/// scheme backwards).
pub fn evolve_from_levels(chart: &HyperbolicChart, first: &[f64], second: &[f64], opts: &EvolveOptions) -> Result<Evolution> {
    check_cfl(chart, opts)?;
    Ok(Evolution {
        m: chart.m,
        ns: chart.ns,
        h: chart.h,
        w: march(chart, first, second, false, None, None),
        picard_iterations: 0,
    })
}

/// Evolve on a sector ϑ ∈ [ϑ_a, ϑ_b] with Dirichlet data h₁(s) at ϑ_a and
/// h₂(s) at ϑ_b. Second-order differences in ϑ.
pub fn evolve_with_sides<H1: Fn(f64) -> f64, H2: Fn(f64) -> f64>(
    chart: &HyperbolicChart,
    data: &CauchyData,
    h1: H1,
    h2: H2,
    lower: Lower,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    if chart.periodic {
        return Err(Error::Precondition("side conditions need a sector chart".into()));
    }
    let m = chart.m;
    let (c1, c2) = (h1(0.0), h2(0.0));
    let scale = 1.0 + c1.abs().max(c2.abs());
    if (c1 - data.w0[0]).abs() > 1e-10 * scale || (c2 - data.w0[m - 1]).abs() > 1e-10 * scale {
        return Err(Error::Precondition(format!(
            "corner data incompatible: h1(0) = {c1}, w0(ϑa) = {}, h2(0) = {c2}, w0(ϑb) = {}",
            data.w0[0],
            data.w0[m - 1]
        )));
    }
    let s1: Vec<f64> = (0..=chart.ns).map(|i| h1(chart.s(i))).collect();
    let s2: Vec<f64> = (0..=chart.ns).map(|i| h2(chart.s(i))).collect();
    evolve(chart, data, lower, opts, Some((&s1, &s2)))
}

/// First derivative along a uniform line of `n` nodes spaced `dx`, with
/// five-point windows (one-sided near the ends).
fn d1_fd5(n: usize, dx: f64) -> DMatrix<f64> {
    let xs: Vec<f64> = (0..n).map(|k| k as f64 * dx).collect();
    let mut d = DMatrix::zeros(n, n);
    for k in 0..n {
        let st = k.saturating_sub(2).min(n - 5);
        let w = fornberg_weights(xs[k], &xs[st..st + 5], 1);
        for q in 0..5 {
            d[(k, st + q)] = w[1][q];
        }
    }
    d
}

/// B̃w on all nodes: -a_ϑ w_ϑ + c_s w_s + c_th w_ϑ + c_0 w plus the
/// nonlocal part when given. w_s uses five-point differences in s, w_ϑ is
/// spectral on periodic charts and five-point on sectors.
pub fn operator_btilde(chart: &HyperbolicChart, w: &[f64], nonlocal: Option<&Nonlocal>) -> Result<Vec<f64>> {
    let (m, ns) = (chart.m, chart.ns);
    if w.len() != chart.len() {
        return Err(Error::InvalidParams("field size does not match the chart".into()));
    }
    if ns < 4 || (!chart.periodic && m < 5) {
        return Err(Error::InvalidParams("too few nodes for five-point differences".into()));
    }
    let wm = DMatrix::from_row_slice(ns + 1, m, w);
    let ws = d1_fd5(ns + 1, chart.h) * &wm;
    let wt = match &chart.d1 {
        Some(d1) => &wm * d1.transpose(),
        None => &wm * d1_fd5(m, chart.dth).transpose(),
    };
    let mut out: Vec<f64> = (0..chart.len())
        .map(|q| {
            let (i, j) = (q / m, q % m);
            (chart.c_th[q] - chart.a_th[q]) * wt[(i, j)] + chart.c_s[q] * ws[(i, j)] + chart.c_0[q] * w[q]
        })
        .collect();
    if let Some(nl) = nonlocal {
        if nl.matrix.nrows() != chart.len() {
            return Err(Error::InvalidParams("nonlocal operator built for another chart".into()));
        }
        for (o, v) in out.iter_mut().zip(nl.apply(w)) {
            *o += v;
        }
    }
    Ok(out)
}

/// max |w_ss - (a w_ϑ)_ϑ - B̃w| over interior nodes, with fourth-order
/// differences in s and, on sectors, in ϑ (spectral on periodic charts).
pub fn pde_residual(chart: &HyperbolicChart, evo: &Evolution, lower: Lower) -> f64 {
    let m = chart.m;
    let h = chart.h;
    let local = lower.local();
    let nl = match lower {
        Lower::Full(n) => Some(n.apply(&evo.w)),
        _ => None,
    };
    // fourth-order ϑ-derivative matrices on sectors
    let sector_d = (!chart.periodic).then(|| {
        let xs: Vec<f64> = (0..m).map(|j| j as f64 * chart.dth).collect();
        let mut d1 = DMatrix::zeros(m, m);
        let mut d2 = DMatrix::zeros(m, m);
        for j in 1..m - 1 {
            let st = j.saturating_sub(2).min(m - 5);
            let w = fornberg_weights(xs[j], &xs[st..st + 5], 2);
            for q in 0..5 {
                d1[(j, st + q)] = w[1][q];
                d2[(j, st + q)] = w[2][q];
            }
        }
        (d1, d2)
    });
    let mut worst: f64 = 0.0;
    for i in 2..chart.ns.saturating_sub(1) {
        let lv = |k: usize| evo.level(k);
        let (a, b, c, d, e) = (lv(i - 2), lv(i - 1), lv(i), lv(i + 1), lv(i + 2));
        let rhs: Vec<f64> = match &sector_d {
            None => chart.spatial(i, c, local),
            Some((d1, d2)) => {
                let cv = DVector::from_column_slice(c);
                let (w1, w2) = (d1 * &cv, d2 * &cv);
                (0..m)
                    .map(|j| {
                        let q = i * m + j;
                        let mut v = chart.a[q] * w2[j] + chart.a_th[q] * w1[j];
                        if local {
                            v += (chart.c_th[q] - chart.a_th[q]) * w1[j] + chart.c_0[q] * c[j];
                        }
                        v
                    })
                    .collect()
            }
        };
        let j_range = if chart.periodic { 0..m } else { 1..m - 1 };
        for j in j_range {
            let q = i * m + j;
            let wss = (-a[j] + 16.0 * b[j] - 30.0 * c[j] + 16.0 * d[j] - e[j]) / (12.0 * h * h);
            let ws = (a[j] - 8.0 * b[j] + 8.0 * d[j] - e[j]) / (12.0 * h);
            let mut r = wss - rhs[j];
            if local {
                r -= chart.c_s[q] * ws;
            }
            if let Some(f) = &nl {
                r -= f[q];
            }
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Exponential fit of the norm ‖(w, w_s)‖ (discrete L² in ϑ) along s.
#[derive(Clone, Copy, Debug)]
pub struct GrowthFit {
    /// Least-squares slope of log‖·‖ over the whole range and each half.
    pub omega: f64,
    pub omega_first: f64,
    pub omega_second: f64,
    /// Smallest C with ‖U(s)‖ ≤ C e^{ω s} ‖U(0)‖.
    pub c: f64,
}

pub fn growth_fit(evo: &Evolution) -> GrowthFit {
    let m = evo.m;
    let n = evo.ns;
    let norms: Vec<f64> = (0..=n)
        .map(|i| {
            let (lo, hi) = if i == 0 { (0, 1) } else if i == n { (n - 1, n) } else { (i - 1, i + 1) };
            let span = (hi - lo) as f64 * evo.h;
            let s: f64 = (0..m)
                .map(|j| {
                    let ws = (evo.at(hi, j) - evo.at(lo, j)) / span;
                    evo.at(i, j).powi(2) + ws * ws
                })
                .sum();
            (s / m as f64).sqrt().max(1e-300)
        })
        .collect();
    let fit = |lo: usize, hi: usize| {
        let pts: Vec<(f64, f64)> = (lo..=hi).map(|i| (i as f64 * evo.h, norms[i].ln())).collect();
        let k = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / k, sy / k);
        let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
        num / den
    };
    let omega = fit(0, n);
    let c = (0..=n)
        .map(|i| norms[i] / (norms[0] * (omega * i as f64 * evo.h).exp()))
        .fold(0.0, f64::max);
    GrowthFit {
        omega,
        omega_first: fit(0, n / 2),
        omega_second: fit(n / 2, n),
        c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::catalog;

    fn hyperboloid() -> Surface {
        catalog("hyperboloid", &[]).unwrap()
    }

    #[test]
    fn assumptions_on_catalog_surfaces() {
        let c = HyperbolicChart::check_assumptions(&hyperboloid(), 1.2, 0.8, 8, Angles::Periodic(8)).unwrap();
        for i in 0..=8 {
            let r = 1.2 + c.s(i);
            let a = 1.0 / (r * r * (r * r - 1.0));
            assert!((c.a[c.idx(i, 3)] - a).abs() < 1e-12 * a);
            assert!(c.a_th[c.idx(i, 3)].abs() < 1e-8);
        }
        let lr = catalog("log-revolution", &[]).unwrap();
        assert!(HyperbolicChart::check_assumptions(&lr, 1.1, 1.5, 8, Angles::Periodic(8)).is_ok());
        let sph = catalog("sphere", &[]).unwrap();
        match HyperbolicChart::check_assumptions(&sph, 0.2, 0.3, 4, Angles::Sector { start: 0.1, width: 0.2, n: 4 }) {
            Err(Error::Regime(msg)) => assert!(msg.contains("opposite signs"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cfl_and_data_checks() {
        let c = HyperbolicChart::synthetic(|_, _| 4.0, |_, _| 0.0, 1.0, 10, Angles::Periodic(32)).unwrap();
        let d = CauchyData::new(&c, f64::cos, |_| 0.0).unwrap();
        assert!(matches!(evolve_cauchy(&c, &d, Lower::Suppressed, &EvolveOptions::default()), Err(Error::Stability(_))));
        assert!(matches!(CauchyData::new(&c, f64::cos, |_| 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_data_stay_zero() {
        let c = HyperbolicChart::check_assumptions(&hyperboloid(), 1.2, 0.5, 40, Angles::Periodic(16)).unwrap();
        let d = CauchyData::new(&c, |_| 0.0, |_| 0.0).unwrap();
        let e = evolve_cauchy(&c, &d, Lower::Local, &EvolveOptions::default()).unwrap();
        assert!(e.w.iter().all(|v| *v == 0.0));
    }

    fn const_error(ns: usize) -> f64 {
        let (a0, k, b) = (1.5, 3.0, 1.0);
        let c = HyperbolicChart::synthetic(|_, _| a0, |_, _| 0.0, b, ns, Angles::Periodic(32)).unwrap();
        let d = CauchyData::new(&c, |t| (k * t).cos(), |_| 0.0).unwrap();
        let e = evolve_cauchy(&c, &d, Lower::Suppressed, &EvolveOptions::default()).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..=ns {
            for j in 0..32 {
                let exact = (k * c.theta(j)).cos() * (a0.sqrt() * k * c.s(i)).cos();
                err = err.max((e.at(i, j) - exact).abs());
            }
        }
        err
    }

    #[test]
    fn separable_solution_and_second_order() {
        let (e1, e2) = (const_error(200), const_error(400));
        assert!(e2 < 1e-4, "{e2}");
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.15, "{order}");
    }

    #[test]
    fn leapfrog_runs_backwards() {
        let c = HyperbolicChart::synthetic(|_, t| 1.0 + 0.3 * t.cos(), |_, t| -0.3 * t.sin(), 1.0, 100, Angles::Periodic(24)).unwrap();
        let d = CauchyData::new(&c, |t| (2.0 * t).sin() + 0.5, |t| t.cos()).unwrap();
        let e = evolve_cauchy(&c, &d, Lower::Suppressed, &EvolveOptions::default()).unwrap();
        let back = evolve_from_levels(&c, e.level(100), e.level(99), &EvolveOptions::default()).unwrap();
        let err = back.level(100).iter().zip(&d.w0).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn linear_in_data_and_mean_consistent() {
        let c = HyperbolicChart::check_assumptions(&hyperboloid(), 1.2, 0.5, 40, Angles::Periodic(16)).unwrap();
        let o = EvolveOptions::default();
        let d1 = CauchyData::new(&c, |t| t.cos(), |t| (2.0 * t).sin()).unwrap();
        let d2 = CauchyData::new(&c, |t| 1.0 + (3.0 * t).sin(), |t| t.cos()).unwrap();
        let d3 = CauchyData {
            w0: d1.w0.iter().zip(&d2.w0).map(|(a, b)| 2.0 * a - b).collect(),
            w1: d1.w1.iter().zip(&d2.w1).map(|(a, b)| 2.0 * a - b).collect(),
        };
        let (e1, e2, e3) = (
            evolve_cauchy(&c, &d1, Lower::Local, &o).unwrap(),
            evolve_cauchy(&c, &d2, Lower::Local, &o).unwrap(),
            evolve_cauchy(&c, &d3, Lower::Local, &o).unwrap(),
        );
        for q in 0..c.len() {
            assert!((e3.w[q] - 2.0 * e1.w[q] + e2.w[q]).abs() < 1e-10);
        }
        // the averaged equation holds for the discrete solution
        let m = c.m;
        for i in 1..c.ns {
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            let r = c.spatial(i, e2.level(i), true);
            for j in 0..m {
                let q = i * m + j;
                lhs += (e2.w[q + m] - 2.0 * e2.w[q] + e2.w[q - m]) / (c.h * c.h);
                rhs += r[j] + c.c_s[q] * (e2.w[q + m] - e2.w[q - m]) / (2.0 * c.h);
            }
            assert!((lhs - rhs).abs() / m as f64 <= 1e-10 * (1.0 + lhs.abs() / m as f64));
        }
    }

    /// Largest gap between a periodic evolution and the sector evolution
    /// driven by its values on two angles.
    fn sector_gap(n: usize) -> f64 {
        let s = hyperboloid();
        let ns = 120;
        let per = HyperbolicChart::check_assumptions(&s, 1.2, 0.5, ns, Angles::Periodic(n)).unwrap();
        let d = CauchyData::new(&per, |t| (2.0 * t).cos(), |t| t.sin()).unwrap();
        let e = evolve_cauchy(&per, &d, Lower::Local, &EvolveOptions::default()).unwrap();
        let k = n / 4;
        let width = k as f64 * per.dth;
        let sec = HyperbolicChart::check_assumptions(&s, 1.2, 0.5, ns, Angles::Sector { start: 0.0, width, n: k }).unwrap();
        let ds = CauchyData::new(&sec, |t| (2.0 * t).cos(), |t| t.sin()).unwrap();
        let side = |j: usize| {
            let e = &e;
            move |x: f64| e.at((x / per.h).round() as usize, j)
        };
        let es = evolve_with_sides(&sec, &ds, side(0), side(k), Lower::Local, &EvolveOptions::default()).unwrap();
        let bad = evolve_with_sides(&sec, &ds, |_| 5.0, side(k), Lower::Local, &EvolveOptions::default());
        assert!(matches!(bad, Err(Error::Precondition(_))));
        let mut err: f64 = 0.0;
        for i in 0..=ns {
            for j in 0..=k {
                err = err.max((es.at(i, j) - e.at(i, j)).abs());
            }
        }
        err
    }

    #[test]
    fn sides_reproduce_periodic_solution() {
        // the sector scheme is second order in ϑ, the periodic one spectral
        let (coarse, fine) = (sector_gap(48), sector_gap(96));
        assert!(fine < 1e-3, "{fine}");
        let order = (coarse / fine).log2();
        assert!((order - 2.0).abs() < 0.3, "{coarse} {fine}");
    }

    #[test]
    fn translation_normal_solves_the_full_equation() {
        // normal components of translations are isometries, so they satisfy
        // the wave equation with the complete lower-order operator
        let s = hyperboloid();
        let c = HyperbolicChart::check_assumptions(&s, 1.3, 0.3, 30, Angles::Sector { start: -0.25, width: 0.5, n: 20 }).unwrap();
        let nl = Nonlocal::new(&c, [0.15, 0.0], 16, &Tolerances::default()).unwrap();
        // a translation along N(o) has no tangential part at o, which is the
        // normalization built into the integral terms
        let v = s.jets(c.u0 + 0.15, 0.0, 1).normal();
        let normal_at = |sv: f64, th: f64| {
            let j = s.jets(c.u0 + sv, th, 1);
            j.normal().dot(&v)
        };
        let w = c.sample(normal_at);
        let evo = Evolution {
            m: c.m,
            ns: c.ns,
            h: c.h,
            w: w.clone(),
            picard_iterations: 0,
        };
        let full = pde_residual(&c, &evo, Lower::Full(&nl));
        let local = pde_residual(&c, &evo, Lower::Local);
        assert!(full < 1e-5 && local > 100.0 * full, "{full} {local}");
        // and the evolution reproduces it from its Cauchy data and sides
        let eps = 1e-6;
        let d = CauchyData::new(&c, |t| normal_at(0.0, t), |t| (normal_at(eps, t) - normal_at(-eps, t)) / (2.0 * eps)).unwrap();
        let th_a = c.theta(0);
        let th_b = c.theta(c.m - 1);
        let e = evolve_with_sides(&c, &d, |x| normal_at(x, th_a), |x| normal_at(x, th_b), Lower::Full(&nl), &EvolveOptions::default()).unwrap();
        let err = e.w.iter().zip(&w).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "{err} after {} iterations", e.picard_iterations);
    }

    fn sector_btilde(ns: usize, n: usize, steps: usize) -> (HyperbolicChart, Vec<f64>) {
        let s = hyperboloid();
        let c = HyperbolicChart::check_assumptions(&s, 1.3, 0.3, ns, Angles::Sector { start: -0.25, width: 0.5, n }).unwrap();
        let nl = Nonlocal::new(&c, [0.15, 0.0], steps, &Tolerances::default()).unwrap();
        let w = c.sample(|x, t| (1.0 + x * x) * (2.0 * t).sin() + x);
        let b = operator_btilde(&c, &w, Some(&nl)).unwrap();
        (c, b)
    }

    #[test]
    fn btilde_is_resolution_independent() {
        let (c1, b1) = sector_btilde(30, 20, 16);
        let (c2, b2) = sector_btilde(60, 40, 32);
        let mut err: f64 = 0.0;
        let mut size: f64 = 0.0;
        for i in 0..=c1.ns {
            for j in 0..c1.m {
                let (p, q) = (c1.idx(i, j), c2.idx(2 * i, 2 * j));
                err = err.max((b1[p] - b2[q]).abs());
                size = size.max(b2[q].abs());
            }
        }
        assert!(err < 1e-3 && size > 0.1, "{err} {size}");
    }

    #[test]
    fn btilde_is_linear_and_drops_integrals_for_synthetic_charts() {
        let (c, _) = sector_btilde(30, 20, 16);
        let nl = Nonlocal::new(&c, [0.15, 0.0], 16, &Tolerances::default()).unwrap();
        let u = c.sample(|x, t| x * t.cos());
        let v = c.sample(|x, t| (x - t).exp());
        let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 3.0 * a - b).collect();
        let (bu, bv, buv) = (
            operator_btilde(&c, &u, Some(&nl)).unwrap(),
            operator_btilde(&c, &v, Some(&nl)).unwrap(),
            operator_btilde(&c, &uv, Some(&nl)).unwrap(),
        );
        for q in 0..c.len() {
            assert!((buv[q] - 3.0 * bu[q] + bv[q]).abs() < 1e-10);
        }
        let syn = HyperbolicChart::synthetic(|_, t| 2.0 + t, |_, _| 1.0, 0.3, 30, Angles::Sector { start: 0.0, width: 0.5, n: 20 }).unwrap();
        let w = syn.sample(|x, t| x * (3.0 * t).sin());
        let b = operator_btilde(&syn, &w, None).unwrap();
        for q in 0..syn.len() {
            let (i, j) = (q / syn.m, q % syn.m);
            let exact = -3.0 * syn.s(i) * (3.0 * syn.theta(j)).cos();
            assert!((b[q] - exact).abs() < 1e-3, "{q}");
        }
    }

    #[test]
    fn full_evolution_of_a_normalized_rigid_motion() {
        // rotations about tangent axes through x(o) and the translation along
        // N(o) have no tangential part and no rotation at o
        let s = hyperboloid();
        let (u0, o) = (1.3, [0.25, 0.0]);
        let jo = s.jets(u0 + o[0], o[1], 1);
        let (e1, e2, n0) = jo.frame();
        let xo = to_v3(&s.point(u0 + o[0], o[1]));
        let d = e1 + e2 * 0.5;
        let exact = |x: f64, t: f64| {
            let j = s.jets(u0 + x, t, 1);
            let p = to_v3(&s.point(u0 + x, t));
            j.normal().dot(&(n0 + d.cross(&(p - xo))))
        };
        let eps = 1e-6;
        let run = |ns: usize| {
            let c = HyperbolicChart::check_assumptions(&s, u0, 0.5, ns, Angles::Sector { start: -0.25, width: 0.5, n: 20 }).unwrap();
            let nl = Nonlocal::new(&c, o, 16, &Tolerances::default()).unwrap();
            let data = CauchyData::new(&c, |t| exact(0.0, t), |t| (exact(eps, t) - exact(-eps, t)) / (2.0 * eps)).unwrap();
            let (ta, tb) = (c.theta(0), c.theta(c.m - 1));
            let e = evolve_with_sides(&c, &data, |x| exact(x, ta), |x| exact(x, tb), Lower::Full(&nl), &EvolveOptions::default()).unwrap();
            let r = pde_residual(&c, &e, Lower::Full(&nl));
            let err = e.w.iter().zip(c.sample(exact)).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            (e, r, err)
        };
        let (e1, r1, x1) = run(50);
        let (e2, r2, x2) = run(100);
        assert!(r1 < 1e-3 && r2 < 1e-3, "{r1} {r2}");
        assert!(x1 < 1e-3 && x2 < 1e-3, "{x1} {x2}");
        let diff = (0..e1.m).fold(0.0_f64, |m, j| m.max((e1.at(50, j) - e2.at(100, j)).abs()));
        assert!(diff < 1e-3, "{diff}");
        let g = growth_fit(&e2);
        assert!(g.omega.is_finite() && g.c.is_finite());
    }

    fn random_data(c: &HyperbolicChart, seed: u64) -> CauchyData {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let coef: Vec<[f64; 4]> = (1..=4).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let w0 = |t: f64| coef.iter().enumerate().map(|(k, q)| q[0] * ((k + 1) as f64 * t).cos() + q[1] * ((k + 1) as f64 * t).sin()).sum::<f64>();
        let w1 = |t: f64| coef.iter().enumerate().map(|(k, q)| q[2] * ((k + 1) as f64 * t).cos() + q[3] * ((k + 1) as f64 * t).sin()).sum::<f64>();
        CauchyData::new(c, w0, w1).unwrap()
    }

    #[test]
    fn superposition_of_random_data() {
        let c = HyperbolicChart::check_assumptions(&hyperboloid(), 1.2, 1.0, 80, Angles::Periodic(16)).unwrap();
        let o = EvolveOptions::default();
        let (d1, d2) = (random_data(&c, 7), random_data(&c, 11));
        let sum = CauchyData {
            w0: d1.w0.iter().zip(&d2.w0).map(|(a, b)| a + b).collect(),
            w1: d1.w1.iter().zip(&d2.w1).map(|(a, b)| a + b).collect(),
        };
        let (e1, e2, e3) = (
            evolve_cauchy(&c, &d1, Lower::Local, &o).unwrap(),
            evolve_cauchy(&c, &d2, Lower::Local, &o).unwrap(),
            evolve_cauchy(&c, &sum, Lower::Local, &o).unwrap(),
        );
        let size = e3.w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for q in 0..c.len() {
            assert!((e3.w[q] - e1.w[q] - e2.w[q]).abs() < 1e-12 * size);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn reversal_recovers_initial_data(amp in 0.0..0.9_f64, k in 1usize..6, phase in 0.0..6.3_f64) {
            let c = HyperbolicChart::synthetic(move |_, t| 1.0 + amp * (t + phase).cos(), move |_, t| -amp * (t + phase).sin(), 0.5, 60, Angles::Periodic(16)).unwrap();
            let d = CauchyData::new(&c, |t| (k as f64 * t).cos(), |t| (k as f64 * t + phase).sin()).unwrap();
            let e = evolve_cauchy(&c, &d, Lower::Suppressed, &EvolveOptions::default()).unwrap();
            let back = evolve_from_levels(&c, e.level(60), e.level(59), &EvolveOptions::default()).unwrap();
            let err = back.level(60).iter().zip(&d.w0).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            proptest::prop_assert!(err < 1e-6, "{}", err);
        }
    }
}
