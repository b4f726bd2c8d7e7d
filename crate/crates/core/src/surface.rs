//! Analytic surface patches and their local differential geometry.
//!
//! Every chart is written once, generic over [`Scalar`]; evaluating it on
//! jets gives exact partial derivatives of any order up to five, from which
//! the metric, normal, second fundamental form, Christoffel symbols and the
//! Gaussian curvature with its covariant derivatives follow.
//!
//! Conventions: `N` is the unit normal chosen per family, `Π(X, Y) =
//! <D_X N, Y>` (so `Π_ij = -<x_ij, N>`), the positive rotation is `X ↦ N × X`
//! and `QX = X × N`.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{Jet, Scalar};
use nalgebra::{Matrix2, Vector2, Vector3};

pub type V3 = Vector3<f64>;

#[derive(Clone, Debug)]
pub enum Family {
    /// Inverse stereographic projection from the south pole, radius r.
    Sphere { r: f64 },
    /// (a cos u, a sin u, v).
    Cylinder { a: f64 },
    /// v (a cos u, a sin u, 1).
    Cone { a: f64 },
    /// (x, y, h(x, y)).
    Graph { h: Expr },
    /// (x, y, H(x² + y²)).
    RadialGraph { h: Expr },
    /// Polar chart (r cos ϑ, r sin ϑ, h(r)) with u = r, v = ϑ.
    PolarRevolution { h: Expr },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Whole,
    Disk { r: f64 },
    Annulus { r0: f64, r1: f64 },
    Rect { u0: f64, u1: f64, v0: f64, v1: f64 },
    /// v0 < v < v1, u unrestricted.
    Band { v0: f64, v1: f64 },
}

impl Domain {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        match *self {
            Domain::Whole => u.is_finite() && v.is_finite(),
            Domain::Disk { r } => u * u + v * v < r * r,
            Domain::Annulus { r0, r1 } => {
                let q = u * u + v * v;
                q > r0 * r0 && q < r1 * r1
            }
            Domain::Rect { u0, u1, v0, v1 } => u > u0 && u < u1 && v > v0 && v < v1,
            Domain::Band { v0, v1 } => v > v0 && v < v1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Surface {
    pub name: String,
    pub family: Family,
    pub domain: Domain,
    /// +1 or -1: orientation of N relative to x_u × x_v.
    pub normal_sign: f64,
    /// Period of the first chart coordinate, if the chart wraps.
    pub u_period: Option<f64>,
    /// Period of the second chart coordinate, if the chart wraps.
    pub v_period: Option<f64>,
}

/// A point in chart coordinates together with its image and basis vectors.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub uv: [f64; 2],
    pub position: V3,
    pub xu: V3,
    pub xv: V3,
}

#[derive(Clone, Copy, Debug)]
pub struct ShapeData {
    /// Metric in chart coordinates.
    pub g: Matrix2<f64>,
    /// Second fundamental form in chart coordinates.
    pub pi: Matrix2<f64>,
    pub normal: V3,
    pub kappa: f64,
    /// Third fundamental form Π g⁻¹ Π in chart coordinates.
    pub t0: Matrix2<f64>,
}

/// Gaussian curvature and its covariant derivatives at a point. Vectors are
/// ambient; `hess` is in the orthonormal frame `(e1, e2)`, `e2 = N × e1`.
#[derive(Clone, Copy, Debug)]
pub struct CurvatureJet {
    pub kappa: f64,
    pub grad: V3,
    pub hess: Matrix2<f64>,
    pub lap: f64,
    pub grad_lap: V3,
    pub e1: V3,
    pub e2: V3,
    pub normal: V3,
}

pub fn to_v3<S: Scalar>(x: &[S; 3]) -> V3 {
    V3::new(x[0].val(), x[1].val(), x[2].val())
}

pub(crate) fn dot3<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> [S; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn map3(x: &[Jet; 3], f: impl Fn(&Jet) -> Jet) -> [Jet; 3] {
    [f(&x[0]), f(&x[1]), f(&x[2])]
}

impl Surface {
    fn new(name: &str, family: Family, domain: Domain, normal_sign: f64) -> Surface {
        Surface {
            name: name.to_string(),
            family,
            domain,
            normal_sign,
            u_period: None,
            v_period: None,
        }
    }

    /// Graph of `h(x, y)` over the given domain, normal pointing down.
    pub fn graph(src: &str, domain: Domain) -> Result<Surface> {
        let h = Expr::parse(src, &["x", "y"])?;
        Ok(Surface::new("graph", Family::Graph { h }, domain, -1.0))
    }

    /// Graph of `H(x² + y²)`.
    pub fn radial_graph(src: &str, domain: Domain) -> Result<Surface> {
        let h = Expr::parse(src, &["q"])?;
        Ok(Surface::new("radial", Family::RadialGraph { h }, domain, -1.0))
    }

    /// Surface of revolution in the polar chart (r, ϑ) with profile h(r).
    pub fn polar_revolution(src: &str, r0: f64, r1: f64) -> Result<Surface> {
        if !(r0 > 0.0 && r1 > r0) {
            return Err(Error::InvalidParams(format!("radial range ({r0}, {r1})")));
        }
        let h = Expr::parse(src, &["r"])?;
        let mut s = Surface::new(
            "revolution",
            Family::PolarRevolution { h },
            Domain::Rect {
                u0: r0,
                u1: r1,
                v0: f64::NEG_INFINITY,
                v1: f64::INFINITY,
            },
            -1.0,
        );
        s.v_period = Some(2.0 * std::f64::consts::PI);
        Ok(s)
    }

    pub fn with_domain(mut self, domain: Domain) -> Surface {
        self.domain = domain;
        self
    }

    pub fn point<S: Scalar>(&self, u: S, v: S) -> [S; 3] {
        match &self.family {
            Family::Sphere { r } => {
                let q = u * u + v * v;
                let d = (q + 1.0).recip() * *r;
                [u * 2.0 * d, v * 2.0 * d, (S::cst(1.0) - q) * d]
            }
            Family::Cylinder { a } => [u.cos() * *a, u.sin() * *a, v],
            Family::Cone { a } => [v * u.cos() * *a, v * u.sin() * *a, v],
            Family::Graph { h } => [u, v, h.eval(&[u, v])],
            Family::RadialGraph { h } => [u, v, h.eval(&[u * u + v * v])],
            Family::PolarRevolution { h } => [u * v.cos(), u * v.sin(), h.eval(&[u])],
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.domain.contains(u, v)
    }

    pub fn surface_point(&self, u: f64, v: f64) -> SurfacePoint {
        let j = LocalJets::new(self, u, v, 1);
        SurfacePoint {
            uv: [u, v],
            position: to_v3(&j.x),
            xu: to_v3(&j.xu),
            xv: to_v3(&j.xv),
        }
    }

    pub fn jets(&self, u: f64, v: f64, order: usize) -> LocalJets {
        LocalJets::new(self, u, v, order)
    }

    pub fn shape_at(&self, u: f64, v: f64) -> Result<ShapeData> {
        if !self.contains(u, v) {
            return Err(Error::OutsideDomain { u, v });
        }
        let j = LocalJets::new(self, u, v, 2);
        let g = j.metric();
        if !(g.determinant() > 0.0) {
            return Err(Error::Immersion { u, v });
        }
        let pi = j.second_form();
        let ginv = g.try_inverse().ok_or(Error::Immersion { u, v })?;
        Ok(ShapeData {
            g,
            pi,
            normal: to_v3(&j.n),
            kappa: j.kappa.value(),
            t0: pi * ginv * pi,
        })
    }

    pub fn curvature_jet(&self, u: f64, v: f64) -> Result<CurvatureJet> {
        if !self.contains(u, v) {
            return Err(Error::OutsideDomain { u, v });
        }
        let j = LocalJets::new(self, u, v, 5);
        if !(j.g[0].value() * j.g[2].value() - j.g[1].value().powi(2) > 0.0) {
            return Err(Error::Immersion { u, v });
        }
        let k = j.kappa;
        let ku = k.du();
        let kv = k.dv();
        let kd = [ku, kv];
        let ksec = [ku.du(), ku.dv(), kv.dv()];
        // covariant Hessian in coordinates, as jets
        let mut h = [Jet::constant(0.0); 3];
        for (m, hm) in h.iter_mut().enumerate() {
            *hm = ksec[m] - j.gam[0][m] * kd[0] - j.gam[1][m] * kd[1];
        }
        let lap = j.ginv[0] * h[0] + j.ginv[1] * h[1] * 2.0 + j.ginv[2] * h[2];
        let grad = j.gradient([ku.value(), kv.value()]);
        let grad_lap = j.gradient([lap.du().value(), lap.dv().value()]);
        let (e1, e2, normal) = j.frame();
        let hc = Matrix2::new(h[0].value(), h[1].value(), h[1].value(), h[2].value());
        let c1 = j.coords_of(&e1);
        let c2 = j.coords_of(&e2);
        let hess = Matrix2::new(
            c1.dot(&(hc * c1)),
            c1.dot(&(hc * c2)),
            c2.dot(&(hc * c1)),
            c2.dot(&(hc * c2)),
        );
        Ok(CurvatureJet {
            kappa: k.value(),
            grad,
            hess,
            lap: lap.value(),
            grad_lap,
            e1,
            e2,
            normal,
        })
    }
}

/// Rotation by the quarter turn `QX = X × N`; `Q e1 = -e2` for `e2 = N × e1`.
pub fn rotate_q(normal: &V3, x: &V3) -> V3 {
    x.cross(normal)
}

/// Jets of the chart and its geometry at one point.
///
/// With chart order n: first derivatives, normal and metric are valid to
/// order n-1; second derivatives, Π, Christoffel symbols and κ to n-2.
#[derive(Clone, Debug)]
pub struct LocalJets {
    pub x: [Jet; 3],
    pub xu: [Jet; 3],
    pub xv: [Jet; 3],
    pub xuu: [Jet; 3],
    pub xuv: [Jet; 3],
    pub xvv: [Jet; 3],
    pub n: [Jet; 3],
    /// (g11, g12, g22)
    pub g: [Jet; 3],
    /// inverse metric (g^11, g^12, g^22)
    pub ginv: [Jet; 3],
    /// Π in coordinates (Π11, Π12, Π22)
    pub pi: [Jet; 3],
    /// gam[k][m]: Γ^k_{11}, Γ^k_{12}, Γ^k_{22}
    pub gam: [[Jet; 3]; 2],
    pub kappa: Jet,
}

impl LocalJets {
    pub fn new(s: &Surface, u: f64, v: f64, order: usize) -> LocalJets {
        let uj = Jet::var_u(u, order);
        let vj = Jet::var_v(v, order);
        let x = s.point(uj, vj);
        let xu = map3(&x, |c| c.du());
        let xv = map3(&x, |c| c.dv());
        let g = [dot3(&xu, &xu), dot3(&xu, &xv), dot3(&xv, &xv)];
        let det = g[0] * g[2] - g[1] * g[1];
        let idet = det.recip();
        let ginv = [g[2] * idet, -g[1] * idet, g[0] * idet];
        let c = cross3(&xu, &xv);
        let nn = dot3(&c, &c).sqrt().recip() * s.normal_sign;
        let n = map3(&c, |ci| *ci * nn);
        if order < 2 {
            let z = Jet::constant(0.0);
            return LocalJets {
                x,
                xu,
                xv,
                xuu: [z; 3],
                xuv: [z; 3],
                xvv: [z; 3],
                n,
                g,
                ginv,
                pi: [z; 3],
                gam: [[z; 3]; 2],
                kappa: z,
            };
        }
        let xuu = map3(&xu, |c| c.du());
        let xuv = map3(&xu, |c| c.dv());
        let xvv = map3(&xv, |c| c.dv());
        let pi = [-dot3(&xuu, &n), -dot3(&xuv, &n), -dot3(&xvv, &n)];
        let second = [&xuu, &xuv, &xvv];
        let mut gam = [[Jet::constant(0.0); 3]; 2];
        for m in 0..3 {
            let a = dot3(second[m], &xu);
            let b = dot3(second[m], &xv);
            gam[0][m] = ginv[0] * a + ginv[1] * b;
            gam[1][m] = ginv[1] * a + ginv[2] * b;
        }
        let kappa = (pi[0] * pi[2] - pi[1] * pi[1]) * idet;
        LocalJets {
            x,
            xu,
            xv,
            xuu,
            xuv,
            xvv,
            n,
            g,
            ginv,
            pi,
            gam,
            kappa,
        }
    }

    pub fn position(&self) -> V3 {
        to_v3(&self.x)
    }

    pub fn normal(&self) -> V3 {
        to_v3(&self.n)
    }

    pub fn basis(&self) -> (V3, V3) {
        (to_v3(&self.xu), to_v3(&self.xv))
    }

    pub fn metric(&self) -> Matrix2<f64> {
        Matrix2::new(self.g[0].value(), self.g[1].value(), self.g[1].value(), self.g[2].value())
    }

    pub fn inverse_metric(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.ginv[0].value(),
            self.ginv[1].value(),
            self.ginv[1].value(),
            self.ginv[2].value(),
        )
    }

    pub fn second_form(&self) -> Matrix2<f64> {
        Matrix2::new(self.pi[0].value(), self.pi[1].value(), self.pi[1].value(), self.pi[2].value())
    }

    /// Orthonormal frame e1 = x_u/|x_u|, e2 = N × e1, and N.
    pub fn frame(&self) -> (V3, V3, V3) {
        let (xu, _) = self.basis();
        let n = self.normal();
        let e1 = xu.normalize();
        (e1, n.cross(&e1), n)
    }

    /// Chart components of a tangent vector.
    pub fn coords_of(&self, x: &V3) -> Vector2<f64> {
        let (xu, xv) = self.basis();
        self.inverse_metric() * Vector2::new(x.dot(&xu), x.dot(&xv))
    }

    pub fn ambient(&self, c: &Vector2<f64>) -> V3 {
        let (xu, xv) = self.basis();
        xu * c[0] + xv * c[1]
    }

    /// Ambient gradient from coordinate partials (s_u, s_v).
    pub fn gradient(&self, d: [f64; 2]) -> V3 {
        self.ambient(&(self.inverse_metric() * Vector2::new(d[0], d[1])))
    }

    /// Christoffel symbols at the point: gamma(k)[(i, j)].
    pub fn christoffel(&self) -> [Matrix2<f64>; 2] {
        let m = |k: usize| {
            Matrix2::new(
                self.gam[k][0].value(),
                self.gam[k][1].value(),
                self.gam[k][1].value(),
                self.gam[k][2].value(),
            )
        };
        [m(0), m(1)]
    }

    /// Covariant derivative of Π in coordinates: dpi[k] is the matrix
    /// (∇_k Π)_ij. Needs chart order ≥ 3.
    pub fn covariant_dpi(&self) -> [Matrix2<f64>; 2] {
        let pm = self.second_form();
        let gam = self.christoffel();
        let dp = |k: usize| {
            let d = |p: &Jet| if k == 0 { p.du().value() } else { p.dv().value() };
            Matrix2::new(d(&self.pi[0]), d(&self.pi[1]), d(&self.pi[1]), d(&self.pi[2]))
        };
        let mut out = [Matrix2::zeros(); 2];
        for (k, o) in out.iter_mut().enumerate() {
            let raw = dp(k);
            // Γ^l_{k i} as matrix A[(l, i)]
            let a = Matrix2::new(gam[0][(k, 0)], gam[0][(k, 1)], gam[1][(k, 0)], gam[1][(k, 1)]);
            let corr = a.transpose() * pm;
            *o = raw - corr - corr.transpose();
        }
        out
    }

    /// Coordinate gradient of κ (needs chart order ≥ 3).
    pub fn kappa_gradient(&self) -> [f64; 2] {
        [self.kappa.du().value(), self.kappa.dv().value()]
    }
}

/// Build a catalog surface by name.
pub fn catalog(name: &str, params: &[f64]) -> Result<Surface> {
    let p = |i: usize, d: f64| params.get(i).copied().unwrap_or(d);
    let positive = |v: f64, what: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidParams(format!("{what} must be positive, got {v}")))
        }
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let s = match name {
        "sphere" => {
            let r = positive(p(0, 1.0), "radius")?;
            Surface::new("sphere", Family::Sphere { r }, Domain::Disk { r: 1e3 }, 1.0)
        }
        "cylinder" => {
            let a = positive(p(0, 1.0), "radius")?;
            let b = p(1, f64::INFINITY);
            if !(b > 0.0) {
                return Err(Error::InvalidParams(format!("half-length must be positive, got {b}")));
            }
            let mut s = Surface::new("cylinder", Family::Cylinder { a }, Domain::Band { v0: -b, v1: b }, 1.0);
            s.u_period = Some(two_pi);
            s
        }
        "cone" => {
            let a = positive(p(0, 1.0), "opening")?;
            let z0 = positive(p(1, 0.05), "lower height")?;
            let z1 = p(2, 1e3);
            if z1 <= z0 {
                return Err(Error::InvalidParams("cone heights".into()));
            }
            let mut s = Surface::new("cone", Family::Cone { a }, Domain::Band { v0: z0, v1: z1 }, 1.0);
            s.u_period = Some(two_pi);
            s
        }
        "plane" => {
            let mut s = Surface::graph("0", Domain::Whole)?;
            s.name = "plane".into();
            s
        }
        "paraboloid" => {
            let mut s = Surface::radial_graph("q/2", Domain::Whole)?;
            s.name = "paraboloid".into();
            s
        }
        "perturbed" => {
            let eps = p(0, 0.1);
            let mut s = Surface::graph(&format!("x^2/2 + y^2/2 + {eps}*x^3"), Domain::Disk { r: 2.0 })?;
            s.name = "perturbed".into();
            s
        }
        "hemisphere" => {
            let r = positive(p(0, 1.0), "radius")?;
            let mut s = Surface::radial_graph(&format!("{r} - sqrt({r}^2 - q)"), Domain::Disk { r: r * 0.999 })?;
            s.name = "hemisphere".into();
            s
        }
        "spheroid" => {
            let c = positive(p(0, 2.0), "axis ratio")?;
            let mut s = Surface::radial_graph(&format!("{c}*(1 - sqrt(1 - q))"), Domain::Disk { r: 0.999 })?;
            s.name = "spheroid".into();
            s
        }
        "log-revolution" => {
            let mut s = Surface::polar_revolution("ln(1 + r^2)", p(0, 0.05), p(1, 10.0))?;
            s.name = "log-revolution".into();
            s
        }
        "log-revolution-graph" => {
            let mut s = Surface::radial_graph("ln(1 + q)", Domain::Whole)?;
            s.name = "log-revolution-graph".into();
            s
        }
        "hyperboloid" => {
            let r0 = p(0, 1.0 + 1e-6);
            if r0 <= 1.0 {
                return Err(Error::InvalidParams("hyperboloid chart needs r > 1".into()));
            }
            let mut s = Surface::polar_revolution("sqrt(r^2 - 1)", r0, p(1, 10.0))?;
            s.name = "hyperboloid".into();
            s
        }
        other => return Err(Error::UnknownSurface(other.to_string())),
    };
    Ok(s)
}
