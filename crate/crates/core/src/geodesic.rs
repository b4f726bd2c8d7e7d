//! Geodesic polar coordinates about a base point.
//!
//! A ray integrates, in chart coordinates, the geodesic equation together
//! with the Jacobi equation `f'' + κ f = 0` (f(0) = 0, f'(0) = 1) and its
//! companion `Φ₀'' + κ Φ₀ = 0` (Φ₀(0) = 1, Φ₀'(0) = 0). Optionally the
//! derivatives of the whole state with respect to the ray angle are carried
//! along (variational equations), which gives θ-derivatives on rays that do
//! not close up into full rings.

use crate::error::{Error, Result};
use crate::numerics::{rk4_step, Tolerances};
use crate::surface::{LocalJets, Surface, SurfacePoint, V3};
use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, Default)]
pub struct RayNode {
    pub t: f64,
    pub uv: [f64; 2],
    pub position: V3,
    /// Unit tangent T of the ray.
    pub tangent: V3,
    /// E = N × T.
    pub transverse: V3,
    pub normal: V3,
    pub f: f64,
    pub f_t: f64,
    pub phi0: f64,
    pub phi0_t: f64,
    /// θ-derivatives of f and Φ₀ (zero unless sensitivities were requested).
    pub f_th: f64,
    pub phi0_th: f64,
    pub kappa: f64,
    /// <∇κ, T> and <∇κ, E>.
    pub k1: f64,
    pub k2: f64,
    /// Π(T,T), Π(T,E), Π(E,E).
    pub pi: [f64; 3],
    /// Components of DΠ (totally symmetric): TTT, TTE, TEE, EEE.
    pub dpi: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    Complete,
    /// Left the chart domain after this arc length.
    DomainExit { t: f64 },
    /// f vanished: conjugate point.
    Conjugate { t: f64 },
    Diverged { t: f64 },
}

#[derive(Clone, Debug)]
pub struct GeodesicRay {
    pub theta: f64,
    pub nodes: Vec<RayNode>,
    pub stop: Stop,
}

impl GeodesicRay {
    pub fn valid_steps(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Orthonormal frame at the base point.
#[derive(Clone, Copy, Debug)]
pub struct OriginFrame {
    pub point: SurfacePoint,
    pub e1: V3,
    pub e2: V3,
    pub normal: V3,
}

impl OriginFrame {
    pub fn new(surface: &Surface, uv: [f64; 2]) -> Result<OriginFrame> {
        if !surface.contains(uv[0], uv[1]) {
            return Err(Error::OutsideDomain { u: uv[0], v: uv[1] });
        }
        let j = surface.jets(uv[0], uv[1], 1);
        let (e1, e2, normal) = j.frame();
        Ok(OriginFrame {
            point: surface.surface_point(uv[0], uv[1]),
            e1,
            e2,
            normal,
        })
    }

    /// σ(θ) = cos θ e1 + sin θ e2.
    pub fn sigma(&self, theta: f64) -> V3 {
        self.e1 * theta.cos() + self.e2 * theta.sin()
    }

    pub fn sigma_dot(&self, theta: f64) -> V3 {
        -self.e1 * theta.sin() + self.e2 * theta.cos()
    }
}

const NSTATE: usize = 8;

fn rhs(surface: &Surface, sens: bool, y: &[f64], d: &mut [f64]) {
    let order = if sens { 3 } else { 2 };
    let j = LocalJets::new(surface, y[0], y[1], order);
    let (p, q) = (y[2], y[3]);
    let gam = |k: usize, m: usize| j.gam[k][m].value();
    let quad = |k: usize, a: [f64; 2], b: [f64; 2]| {
        gam(k, 0) * a[0] * b[0] + gam(k, 1) * (a[0] * b[1] + a[1] * b[0]) + gam(k, 2) * a[1] * b[1]
    };
    let kap = j.kappa.value();
    d[0] = p;
    d[1] = q;
    d[2] = -quad(0, [p, q], [p, q]);
    d[3] = -quad(1, [p, q], [p, q]);
    d[4] = y[5];
    d[5] = -kap * y[4];
    d[6] = y[7];
    d[7] = -kap * y[6];
    if sens {
        let s = &y[NSTATE..];
        let (du, dv, dp, dq) = (s[0], s[1], s[2], s[3]);
        let dgam = |k: usize, m: usize| j.gam[k][m].du().value() * du + j.gam[k][m].dv().value() * dv;
        let dquad = |k: usize| {
            dgam(k, 0) * p * p + 2.0 * dgam(k, 1) * p * q + dgam(k, 2) * q * q
        };
        let dkap = j.kappa.du().value() * du + j.kappa.dv().value() * dv;
        let o = &mut d[NSTATE..];
        o[0] = dp;
        o[1] = dq;
        o[2] = -dquad(0) - 2.0 * quad(0, [p, q], [dp, dq]);
        o[3] = -dquad(1) - 2.0 * quad(1, [p, q], [dp, dq]);
        o[4] = s[5];
        o[5] = -dkap * y[4] - kap * s[4];
        o[6] = s[7];
        o[7] = -dkap * y[6] - kap * s[6];
    }
}

/// Geometry of a ray node from the integrated state.
fn node_from_state(surface: &Surface, t: f64, y: &[f64], sens: bool) -> RayNode {
    let j = LocalJets::new(surface, y[0], y[1], 3);
    let (xu, xv) = j.basis();
    let normal = j.normal();
    let raw = xu * y[2] + xv * y[3];
    let speed = raw.norm();
    let tangent = raw / speed;
    let transverse = normal.cross(&tangent);
    let ct = Vector2::new(y[2], y[3]) / speed;
    let ce = j.coords_of(&transverse);
    let pm = j.second_form();
    let bil = |m: &Matrix2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| a.dot(&(m * b));
    let dpi = j.covariant_dpi();
    let dir = |c: &Vector2<f64>| dpi[0] * c[0] + dpi[1] * c[1];
    let dt_pi = dir(&ct);
    let de_pi = dir(&ce);
    let kg = j.kappa_gradient();
    RayNode {
        t,
        uv: [y[0], y[1]],
        position: j.position(),
        tangent,
        transverse,
        normal,
        f: y[4],
        f_t: y[5],
        phi0: y[6],
        phi0_t: y[7],
        f_th: if sens { y[NSTATE + 4] } else { 0.0 },
        phi0_th: if sens { y[NSTATE + 6] } else { 0.0 },
        kappa: j.kappa.value(),
        k1: kg[0] * ct[0] + kg[1] * ct[1],
        k2: kg[0] * ce[0] + kg[1] * ce[1],
        pi: [bil(&pm, &ct, &ct), bil(&pm, &ct, &ce), bil(&pm, &ce, &ce)],
        dpi: [
            bil(&dt_pi, &ct, &ct),
            bil(&dt_pi, &ct, &ce),
            bil(&dt_pi, &ce, &ce),
            bil(&de_pi, &ce, &ce),
        ],
    }
}

/// Shoot the geodesic from `frame` in direction σ(θ), recording nodes at
/// t = k dt for k = 0..=n_steps. Stops early at a domain exit or at the
/// first zero of f.
pub fn shoot_ray(
    surface: &Surface,
    frame: &OriginFrame,
    theta: f64,
    dt: f64,
    n_steps: usize,
    tol: &Tolerances,
    sensitivities: bool,
) -> GeodesicRay {
    let uv = frame.point.uv;
    let j = surface.jets(uv[0], uv[1], 1);
    let c0 = j.coords_of(&frame.sigma(theta));
    let c1 = j.coords_of(&frame.sigma_dot(theta));
    let dim = if sensitivities { 2 * NSTATE } else { NSTATE };
    let mut y = vec![0.0; dim];
    y[..NSTATE].copy_from_slice(&[uv[0], uv[1], c0[0], c0[1], 0.0, 1.0, 1.0, 0.0]);
    if sensitivities {
        y[NSTATE + 2] = c1[0];
        y[NSTATE + 3] = c1[1];
    }
    let f = |_t: f64, y: &[f64], d: &mut [f64]| rhs(surface, sensitivities, y, d);
    let mut nodes = vec![node_from_state(surface, 0.0, &y, sensitivities)];
    let m = (dt / tol.ode_step).ceil().max(1.0) as usize;
    let h = dt / m as f64;
    let mut next = y.clone();
    let mut stop = Stop::Complete;
    'outer: for k in 0..n_steps {
        for s in 0..m {
            let t = k as f64 * dt + s as f64 * h;
            rk4_step(&f, t, &y, h, &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                stop = Stop::Diverged { t };
                break 'outer;
            }
            if !surface.contains(next[0], next[1]) {
                stop = Stop::DomainExit { t: t + h };
                break 'outer;
            }
            if next[4] <= 0.0 {
                stop = Stop::Conjugate { t: t + h };
                break 'outer;
            }
            std::mem::swap(&mut y, &mut next);
        }
        nodes.push(node_from_state(surface, (k + 1) as f64 * dt, &y, sensitivities));
    }
    GeodesicRay { theta, nodes, stop }
}

#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    /// Number of rays (even).
    pub n_theta: usize,
    /// Number of arc-length steps per ray.
    pub n_t: usize,
    pub t_max: f64,
    pub sensitivities: bool,
}

impl GridSpec {
    pub fn new(n_theta: usize, n_t: usize, t_max: f64) -> GridSpec {
        GridSpec {
            n_theta,
            n_t,
            t_max,
            sensitivities: false,
        }
    }
}

/// Rays at θ_j = 2πj/n_θ from a common origin with a common uniform t-grid.
#[derive(Clone, Debug)]
pub struct PolarGrid {
    pub surface: Surface,
    pub frame: OriginFrame,
    pub n_theta: usize,
    pub dt: f64,
    /// Steps available on every ray.
    pub nt: usize,
    pub rays: Vec<GeodesicRay>,
    /// Whether the rays carry θ-derivatives of f and Φ₀.
    pub sensitivities: bool,
}

pub fn build_polar_grid(surface: &Surface, origin: [f64; 2], spec: GridSpec, tol: &Tolerances) -> Result<PolarGrid> {
    tol.validate()?;
    if spec.n_theta < 2 || spec.n_theta % 2 != 0 {
        return Err(Error::InvalidParams(format!("n_theta = {} must be even", spec.n_theta)));
    }
    if !(spec.t_max > 0.0) || spec.n_t == 0 {
        return Err(Error::InvalidParams("t_max and n_t must be positive".into()));
    }
    let frame = OriginFrame::new(surface, origin)?;
    let dt = spec.t_max / spec.n_t as f64;
    let rays: Vec<GeodesicRay> = (0..spec.n_theta)
        .into_par_iter()
        .map(|j| {
            let th = 2.0 * PI * j as f64 / spec.n_theta as f64;
            shoot_ray(surface, &frame, th, dt, spec.n_t, tol, spec.sensitivities)
        })
        .collect();
    let nt = rays.iter().map(|r| r.valid_steps()).min().unwrap_or(0);
    if nt == 0 {
        return Err(Error::Grid("some ray stops before its first step".into()));
    }
    Ok(PolarGrid {
        surface: surface.clone(),
        frame,
        n_theta: spec.n_theta,
        dt,
        nt,
        rays,
        sensitivities: spec.sensitivities,
    })
}

impl PolarGrid {
    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_theta as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.nt as f64 * self.dt
    }

    pub fn node(&self, j: usize, k: usize) -> &RayNode {
        &self.rays[j].nodes[k]
    }

    /// True when every ray reached the requested length.
    pub fn complete(&self) -> bool {
        self.rays.iter().all(|r| r.stop == Stop::Complete)
    }

    /// Number of field values per ray (origin included).
    pub fn len_ray(&self) -> usize {
        self.nt + 1
    }

    /// Length of a full nodal array (origin repeated on every ray).
    pub fn len(&self) -> usize {
        self.n_theta * (self.nt + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, j: usize, k: usize) -> usize {
        j * (self.nt + 1) + k
    }

    /// Sample a per-node quantity into a nodal array.
    pub fn sample(&self, f: impl Fn(&RayNode) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for r in &self.rays {
            for k in 0..=self.nt {
                out.push(f(&r.nodes[k]));
            }
        }
        out
    }

    /// Sample with access to the ray angle.
    pub fn sample_with_theta(&self, f: impl Fn(f64, &RayNode) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for r in &self.rays {
            for k in 0..=self.nt {
                out.push(f(r.theta, &r.nodes[k]));
            }
        }
        out
    }
}

/// Φ₀ along a ray and the kernel Φ(·, s) at node index `ks`, from the
/// Wronskian identity Φ(t, s) = Φ₀(s) f(t) - f(s) Φ₀(t).
pub fn phi_kernels(ray: &GeodesicRay, ks: usize) -> (Vec<f64>, Vec<f64>) {
    let s = &ray.nodes[ks];
    let phi0 = ray.nodes.iter().map(|n| n.phi0).collect();
    let phi = ray.nodes.iter().map(|n| s.phi0 * n.f - s.f * n.phi0).collect();
    (phi0, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::catalog;

    #[test]
    fn sphere_jacobi_field_is_sine() {
        let s = catalog("sphere", &[1.0]).unwrap();
        let fr = OriginFrame::new(&s, [0.0, 0.0]).unwrap();
        let tol = Tolerances { ode_step: 1e-3, ..Default::default() };
        let ray = shoot_ray(&s, &fr, 0.7, 0.01, 300, &tol, false);
        assert_eq!(ray.stop, Stop::Complete);
        for n in &ray.nodes {
            assert!((n.f - n.t.sin()).abs() < 1e-8);
            assert!((n.phi0 - n.t.cos()).abs() < 1e-8);
            assert!((n.tangent.dot(&n.transverse)).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_point_on_sphere() {
        let s = catalog("sphere", &[1.0]).unwrap();
        // start on the equator and aim through the north pole so the whole
        // half great circle stays inside the stereographic chart
        let fr = OriginFrame::new(&s, [1.0, 0.0]).unwrap();
        let up = V3::new(0.0, 0.0, 1.0);
        let th = up.dot(&fr.e2).atan2(up.dot(&fr.e1));
        let tol = Tolerances { ode_step: 1e-4, ..Default::default() };
        let ray = shoot_ray(&s, &fr, th, 1e-3, 3500, &tol, false);
        match ray.stop {
            Stop::Conjugate { t } => assert!((t - PI).abs() < 1e-4, "t = {t}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sensitivities_match_jacobi_field() {
        // ∂θ x = f E, so the θ-derivative of f on the sphere vanishes and on
        // a generic graph it matches a finite difference across rays.
        let s = catalog("perturbed", &[]).unwrap();
        let fr = OriginFrame::new(&s, [0.1, -0.2]).unwrap();
        let tol = Tolerances::default();
        let th = 0.9;
        let h = 1e-5;
        let r0 = shoot_ray(&s, &fr, th, 0.05, 10, &tol, true);
        let rp = shoot_ray(&s, &fr, th + h, 0.05, 10, &tol, false);
        let rm = shoot_ray(&s, &fr, th - h, 0.05, 10, &tol, false);
        for k in 0..=10 {
            let fd = (rp.nodes[k].f - rm.nodes[k].f) / (2.0 * h);
            assert!((fd - r0.nodes[k].f_th).abs() < 1e-7);
            let fd = (rp.nodes[k].phi0 - rm.nodes[k].phi0) / (2.0 * h);
            assert!((fd - r0.nodes[k].phi0_th).abs() < 1e-7);
            let dx = (rp.nodes[k].position - rm.nodes[k].position) / (2.0 * h);
            let je = r0.nodes[k].transverse * r0.nodes[k].f;
            assert!((dx - je).norm() < 1e-7);
        }
    }
}
