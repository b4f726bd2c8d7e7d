//! Flat surfaces with nonvanishing second fundamental form: rulings, the
//! structure w = w₀(s) + w₁(s)t of normal components of isometries, and the
//! explicit isometries of the unit cylinder.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::geodesic::PolarGrid;
use crate::grid::{GridOps, Locator};
use crate::isometry::{characteristic_dirichlet_matrix, rim_unknowns, GridCoeffs};
use crate::numerics::Lu;
use crate::surface::{LocalJets, Surface, V3};

/// Trigonometric polynomial plus a polynomial part in θ:
/// Σ poly[i] θⁱ + Σ cos[k-1] cos kθ + sin[k-1] sin kθ. The polynomial part
/// appears when antiderivatives of nonzero-mean functions are taken.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trig {
    pub poly: Vec<f64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Trig {
    pub fn constant(c: f64) -> Trig {
        Trig { poly: vec![c], ..Trig::default() }
    }

    pub fn cosine(k: usize, amp: f64) -> Trig {
        if k == 0 {
            return Trig::constant(amp);
        }
        let mut t = Trig::default();
        t.cos = vec![0.0; k];
        t.cos[k - 1] = amp;
        t
    }

    pub fn sine(k: usize, amp: f64) -> Trig {
        let mut t = Trig::default();
        if k == 0 {
            return t;
        }
        t.sin = vec![0.0; k];
        t.sin[k - 1] = amp;
        t
    }

    pub fn eval(&self, th: f64) -> f64 {
        let mut v = self.poly.iter().rev().fold(0.0, |acc, c| acc * th + c);
        for (k, c) in self.cos.iter().enumerate() {
            v += c * ((k + 1) as f64 * th).cos();
        }
        for (k, s) in self.sin.iter().enumerate() {
            v += s * ((k + 1) as f64 * th).sin();
        }
        v
    }

    pub fn deriv(&self) -> Trig {
        let poly = self.poly.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
        let cos = self.sin.iter().enumerate().map(|(k, s)| (k + 1) as f64 * s).collect();
        let sin = self.cos.iter().enumerate().map(|(k, c)| -((k + 1) as f64) * c).collect();
        Trig { poly, cos, sin }
    }

    /// ∫₀^θ.
    pub fn integral(&self) -> Trig {
        let mut poly = vec![0.0];
        poly.extend(self.poly.iter().enumerate().map(|(i, c)| c / (i + 1) as f64));
        let mut cos = vec![0.0; self.sin.len()];
        let sin = self.cos.iter().enumerate().map(|(k, c)| c / (k + 1) as f64).collect();
        for (k, s) in self.sin.iter().enumerate() {
            let kk = (k + 1) as f64;
            poly[0] += s / kk;
            cos[k] = -s / kk;
        }
        Trig { poly, cos, sin }
    }

    pub fn scale(&self, a: f64) -> Trig {
        Trig {
            poly: self.poly.iter().map(|c| a * c).collect(),
            cos: self.cos.iter().map(|c| a * c).collect(),
            sin: self.sin.iter().map(|c| a * c).collect(),
        }
    }

    pub fn plus(&self, o: &Trig) -> Trig {
        let add = |a: &[f64], b: &[f64]| {
            (0..a.len().max(b.len()))
                .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
                .collect()
        };
        Trig {
            poly: add(&self.poly, &o.poly),
            cos: add(&self.cos, &o.cos),
            sin: add(&self.sin, &o.sin),
        }
    }

    /// True when the polynomial part is constant.
    pub fn is_periodic(&self) -> bool {
        self.poly.iter().skip(1).all(|c| *c == 0.0)
    }
}

/// The null direction E of Π at a point (unit), the normal, and the
/// nonzero principal value λ = Π(QE, QE).
fn null_direction(surface: &Surface, uv: [f64; 2]) -> Result<(V3, V3, f64)> {
    let sh = surface.shape_at(uv[0], uv[1])?;
    let l = sh.g.cholesky().ok_or(Error::Immersion { u: uv[0], v: uv[1] })?.l();
    let li = l.try_inverse().ok_or(Error::Immersion { u: uv[0], v: uv[1] })?;
    let c: Matrix2<f64> = li * sh.pi * li.transpose();
    let eig = c.symmetric_eigen();
    let (i0, i1) = if eig.eigenvalues[0].abs() <= eig.eigenvalues[1].abs() { (0, 1) } else { (1, 0) };
    let (mu0, mu1) = (eig.eigenvalues[i0], eig.eigenvalues[i1]);
    if mu1.abs() < 1e-12 {
        return Err(Error::Planar);
    }
    if mu0.abs() > 1e-8 * mu1.abs() {
        return Err(Error::Regime(format!("curvature {:.3e} is not zero", mu0 * mu1)));
    }
    let y = eig.eigenvectors.column(i0);
    let coords = li.transpose() * y;
    let j = LocalJets::new(surface, uv[0], uv[1], 1);
    let (xu, xv) = j.basis();
    let e = (xu * coords[0] + xv * coords[1]).normalize();
    Ok((e, sh.normal, mu1))
}

#[derive(Clone, Debug)]
struct RulingSample {
    uv: [f64; 2],
    zeta: V3,
    dzeta: V3,
    e: V3,
}

/// Coordinates (s, t) on a flat surface: s is arc length along a curve ζ
/// orthogonal to the rulings, t the signed distance along the ruling
/// P(s, t) = ζ(s) + t E(s).
#[derive(Clone, Debug)]
pub struct ParabolicChart {
    pub surface: Surface,
    pub s_min: f64,
    pub h: f64,
    /// Π(QE, QE) at the seed.
    pub lambda: f64,
    samples: Vec<RulingSample>,
}

/// Build a ruling chart through `seed` covering s ∈ [s0, s1] (s0 ≤ 0 ≤ s1)
/// by tracing ζ' = QE with step `h`.
pub fn detect_ruling(surface: &Surface, seed: [f64; 2], s_range: (f64, f64), h: f64) -> Result<ParabolicChart> {
    let (s0, s1) = s_range;
    if !(s0 <= 0.0 && s1 >= 0.0 && h > 0.0) {
        return Err(Error::InvalidParams(format!("ruling range ({s0}, {s1}) with step {h}")));
    }
    let (e0, n0, lambda) = null_direction(surface, seed)?;
    // fix the sign: largest component positive
    let big = (0..3).max_by(|&a, &b| e0[a].abs().total_cmp(&e0[b].abs())).unwrap();
    let e0 = if e0[big] < 0.0 { -e0 } else { e0 };
    let sample = |uv: [f64; 2], prev_e: &V3| -> Result<RulingSample> {
        let (e, n, _) = null_direction(surface, uv)?;
        let e = if e.dot(prev_e) < 0.0 { -e } else { e };
        Ok(RulingSample {
            uv,
            zeta: crate::surface::to_v3(&surface.point(uv[0], uv[1])),
            dzeta: e.cross(&n),
            e,
        })
    };
    let direction = |uv: [f64; 2], prev_e: &V3, sign: f64| -> Result<[f64; 2]> {
        let (e, n, _) = null_direction(surface, uv)?;
        let e = if e.dot(prev_e) < 0.0 { -e } else { e };
        let c = LocalJets::new(surface, uv[0], uv[1], 1).coords_of(&(e.cross(&n) * sign));
        Ok([c[0], c[1]])
    };
    let trace = |sign: f64, steps: usize| -> Result<Vec<RulingSample>> {
        let mut out = Vec::with_capacity(steps);
        let mut uv = seed;
        let mut e = e0;
        let _ = n0;
        for _ in 0..steps {
            let k1 = direction(uv, &e, sign)?;
            let p = |k: [f64; 2], a: f64| [uv[0] + a * h * k[0], uv[1] + a * h * k[1]];
            let k2 = direction(p(k1, 0.5), &e, sign)?;
            let k3 = direction(p(k2, 0.5), &e, sign)?;
            let k4 = direction(p(k3, 1.0), &e, sign)?;
            uv = [
                uv[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                uv[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            if !surface.contains(uv[0], uv[1]) {
                return Err(Error::OutsideDomain { u: uv[0], v: uv[1] });
            }
            let s = sample(uv, &e)?;
            e = s.e;
            out.push(s);
        }
        Ok(out)
    };
    let n_lo = (-s0 / h).ceil() as usize + 2;
    let n_hi = (s1 / h).ceil() as usize + 2;
    let mut lo = trace(-1.0, n_lo)?;
    lo.reverse();
    let mut samples = lo;
    samples.push(sample(seed, &e0)?);
    samples.extend(trace(1.0, n_hi)?);
    Ok(ParabolicChart {
        surface: surface.clone(),
        s_min: -(n_lo as f64) * h,
        h,
        lambda,
        samples,
    })
}

impl ParabolicChart {
    pub fn s_range(&self) -> (f64, f64) {
        (self.s_min + self.h, self.s_min + (self.samples.len() - 2) as f64 * self.h)
    }

    /// ζ(s) by cubic Hermite interpolation and E(s) by cubic Lagrange
    /// interpolation, renormalized.
    pub fn ruling(&self, s: f64) -> (V3, V3) {
        let x = (s - self.s_min) / self.h;
        let i = (x.floor() as i64).clamp(1, self.samples.len() as i64 - 3) as usize;
        let u = x - i as f64;
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let h00 = 2.0 * u * u * u - 3.0 * u * u + 1.0;
        let h10 = u * u * u - 2.0 * u * u + u;
        let h01 = -2.0 * u * u * u + 3.0 * u * u;
        let h11 = u * u * u - u * u;
        let zeta = a.zeta * h00 + a.dzeta * (h10 * self.h) + b.zeta * h01 + b.dzeta * (h11 * self.h);
        let nodes = [-1.0, 0.0, 1.0, 2.0];
        let mut e = V3::zeros();
        for (q, &xq) in nodes.iter().enumerate() {
            let mut l = 1.0;
            for (r, &xr) in nodes.iter().enumerate() {
                if r != q {
                    l *= (u - xr) / (xq - xr);
                }
            }
            e += self.samples[i - 1 + q].e * l;
        }
        (zeta, e.normalize())
    }

    pub fn point(&self, s: f64, t: f64) -> V3 {
        let (z, e) = self.ruling(s);
        z + e * t
    }

    /// Chart coordinates of an ambient point on the surface.
    pub fn coords(&self, x: &V3) -> Option<(f64, f64)> {
        let (mut s, mut t) = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let t = (x - r.zeta).dot(&r.e);
                (i, t, (x - r.zeta - r.e * t).norm())
            })
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .map(|(i, t, _)| (self.s_min + i as f64 * self.h, t))?;
        let (lo, hi) = self.s_range();
        for _ in 0..30 {
            let d = 1e-6;
            let r = self.point(s, t) - x;
            let ps = (self.point(s + d, t) - self.point(s - d, t)) / (2.0 * d);
            let (_, e) = self.ruling(s);
            let m = Matrix2::new(ps.dot(&ps), ps.dot(&e), ps.dot(&e), e.dot(&e));
            let step = m.try_inverse()? * nalgebra::Vector2::new(ps.dot(&r), e.dot(&r));
            s -= step[0];
            t -= step[1];
            if step.norm() < 1e-14 {
                break;
            }
        }
        ((lo..=hi).contains(&s) && (self.point(s, t) - x).norm() < 1e-9).then_some((s, t))
    }

    /// Distance from P(s, t) to the surface, by projection from the
    /// nearest ruling sample.
    pub fn distance_to_surface(&self, s: f64, t: f64) -> f64 {
        let p = self.point(s, t);
        let i = (((s - self.s_min) / self.h).round() as usize).min(self.samples.len() - 1);
        let r = &self.samples[i];
        let c = LocalJets::new(&self.surface, r.uv[0], r.uv[1], 1).coords_of(&(r.e * t));
        project_to_surface(&self.surface, [r.uv[0] + c[0], r.uv[1] + c[1]], &p).1
    }
}

/// Closest point of the surface to `p` by Gauss-Newton from `uv0`.
/// Returns the chart coordinates and the distance.
pub fn project_to_surface(surface: &Surface, uv0: [f64; 2], p: &V3) -> ([f64; 2], f64) {
    let mut uv = uv0;
    for _ in 0..50 {
        let j = LocalJets::new(surface, uv[0], uv[1], 1);
        let r = j.position() - p;
        let (xu, xv) = j.basis();
        let m = Matrix2::new(xu.dot(&xu), xu.dot(&xv), xu.dot(&xv), xv.dot(&xv));
        let Some(mi) = m.try_inverse() else { break };
        let d = mi * nalgebra::Vector2::new(xu.dot(&r), xv.dot(&r));
        uv = [uv[0] - d[0], uv[1] - d[1]];
        if d.norm() < 1e-15 {
            break;
        }
    }
    let x = crate::surface::to_v3(&surface.point(uv[0], uv[1]));
    (uv, (x - p).norm())
}

/// Samples of a field on a tensor (s, t) grid, s-major.
#[derive(Clone, Debug)]
pub struct ChartField {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl ChartField {
    pub fn from_fn<F: Fn(f64, f64) -> f64>(s: &[f64], t: &[f64], f: F) -> ChartField {
        let values = s.iter().flat_map(|&si| t.iter().map(move |&tk| (si, tk))).map(|(a, b)| f(a, b)).collect();
        ChartField {
            s: s.to_vec(),
            t: t.to_vec(),
            values,
        }
    }

    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.t.len() + k]
    }
}

/// The normal component w(s, t) = w₀(s) + w₁(s)t.
pub fn parabolic_isometry<F0, F1>(s: &[f64], t: &[f64], w0: F0, w1: F1) -> ChartField
where
    F0: Fn(f64) -> f64,
    F1: Fn(f64) -> f64,
{
    ChartField::from_fn(s, t, |si, tk| w0(si) + w1(si) * tk)
}

/// max |∂²w/∂t²| by second differences on a uniform t grid.
pub fn verify_linear_in_t(field: &ChartField) -> f64 {
    let nt = field.t.len();
    if nt < 3 {
        return 0.0;
    }
    let dt = (field.t[nt - 1] - field.t[0]) / (nt - 1) as f64;
    let mut worst: f64 = 0.0;
    for i in 0..field.s.len() {
        for k in 1..nt - 1 {
            let d2 = field.at(i, k + 1) - 2.0 * field.at(i, k) + field.at(i, k - 1);
            worst = worst.max(d2.abs() / (dt * dt));
        }
    }
    worst
}

/// R(a, b) = (-a sinθ - b cosθ, a cosθ - b sinθ).
fn rot(th: f64, a: f64, b: f64) -> [f64; 2] {
    let (s, c) = th.sin_cos();
    [-a * s - b * c, a * c - b * s]
}

/// Isometry of the unit cylinder (cosθ, sinθ, z) generated by two functions
/// of θ: V = (R(w₀, w₀'), w₁) + z(-R(w₁', w₁''), 0).
pub fn cylinder_explicit_v(w0: &Trig, w1: &Trig, th: f64, z: f64) -> V3 {
    let d0 = w0.deriv();
    let d1 = w1.deriv();
    let dd1 = d1.deriv();
    let a = rot(th, w0.eval(th), d0.eval(th));
    let b = rot(th, d1.eval(th), dd1.eval(th));
    V3::new(a[0] - z * b[0], a[1] - z * b[1], w1.eval(th))
}

/// Outward normal component of [`cylinder_explicit_v`]: -w₀' + z w₁''.
pub fn cylinder_normal_part(w0: &Trig, w1: &Trig, th: f64, z: f64) -> f64 {
    -w0.deriv().eval(th) + z * w1.deriv().deriv().eval(th)
}

/// Generating functions whose cylinder field has normal component
/// n₀(θ) + z n₁(θ): w₀ = -∫₀^θ n₀, w₁ = ∫₀^θ∫₀^φ n₁.
pub fn potentials_from_normal(n0: &Trig, n1: &Trig) -> (Trig, Trig) {
    (n0.integral().scale(-1.0), n1.integral().integral())
}

/// Solve the characteristic equation on a polar grid of a flat surface with
/// Dirichlet data ψ(x) on the rim. On flat surfaces it reduces to
/// λ ∂²w/∂t² = 0 along rulings.
pub fn solve_on_polar_grid<F: Fn(&V3) -> f64>(grid: &PolarGrid, psi: F) -> Result<(GridOps, Vec<f64>)> {
    let ops = GridOps::new(grid);
    let c = GridCoeffs::new(grid);
    let pmax = c.p11.iter().chain(&c.p22).fold(0.0_f64, |m, v| m.max(v.abs()));
    if pmax < 1e-12 {
        return Err(Error::Planar);
    }
    if let Some(k) = c.kappa.iter().find(|k| k.abs() > 1e-8 * pmax * pmax) {
        return Err(Error::Regime(format!("curvature {k:.3e} is not zero")));
    }
    let one = vec![1.0; ops.len()];
    let m = characteristic_dirichlet_matrix(&ops, &c, &one);
    let mut b = vec![0.0; ops.unknowns()];
    for (j, r) in rim_unknowns(&ops).into_iter().enumerate() {
        b[r] = psi(&grid.node(j, grid.nt).position);
    }
    let lu = Lu::new(&m);
    let x = lu.solve(&b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient { sigma_min: lu.pivot_ratio() });
    }
    let w = ops.expand(&x);
    Ok((ops, w))
}

/// Interpolate a polar-grid field on the chart points (s, t).
pub fn sample_on_chart(chart: &ParabolicChart, grid: &PolarGrid, ops: &GridOps, w: &[f64], s: &[f64], t: &[f64]) -> Result<ChartField> {
    let loc = Locator::new(grid);
    let mut values = Vec::with_capacity(s.len() * t.len());
    for &si in s {
        for &tk in t {
            let p = chart.point(si, tk);
            let (tt, th) = loc
                .locate(ops, &p)
                .ok_or_else(|| Error::Coverage(format!("chart point (s, t) = ({si:.3}, {tk:.3})")))?;
            values.push(ops.interp(w, tt, th).0);
        }
    }
    Ok(ChartField {
        s: s.to_vec(),
        t: t.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{build_polar_grid, GridSpec};
    use crate::isometry::{isometry_residuals, reconstruct_w};
    use crate::numerics::Tolerances;
    use crate::surface::catalog;

    #[test]
    fn trig_calculus() {
        let f = Trig {
            poly: vec![0.5, -1.0],
            cos: vec![0.0, 2.0],
            sin: vec![1.5],
        };
        for th in [-1.0, 0.3, 2.5] {
            let h = 1e-5;
            let fd = (f.eval(th + h) - f.eval(th - h)) / (2.0 * h);
            assert!((f.deriv().eval(th) - fd).abs() < 1e-8);
            let i = f.integral();
            assert!(i.eval(0.0).abs() < 1e-14);
            assert!((i.deriv().eval(th) - f.eval(th)).abs() < 1e-12);
        }
        assert!(!f.is_periodic() && Trig::cosine(3, 1.0).is_periodic());
    }

    #[test]
    fn rulings_of_cylinder_and_cone() {
        let cyl = catalog("cylinder", &[1.0, 10.0]).unwrap();
        let ch = detect_ruling(&cyl, [0.3, 0.0], (-0.5, 0.5), 0.01).unwrap();
        let (_, e) = ch.ruling(0.2);
        assert!((e - V3::new(0.0, 0.0, 1.0)).norm() < 1e-10);
        assert!((ch.lambda.abs() - 1.0).abs() < 1e-10);
        for &(s, t) in &[(0.1, 0.7), (-0.4, -1.5)] {
            assert!(ch.distance_to_surface(s, t) < 1e-8);
            let (s2, t2) = ch.coords(&ch.point(s, t)).unwrap();
            assert!((s2 - s).abs() < 1e-9 && (t2 - t).abs() < 1e-9);
        }
        let a = 0.7;
        let cone = catalog("cone", &[a, 0.05, 50.0]).unwrap();
        let ch = detect_ruling(&cone, [0.0, 2.0], (-0.3, 0.3), 0.01).unwrap();
        let (z, e) = ch.ruling(0.0);
        let gen = V3::new(a, 0.0, 1.0).normalize();
        assert!((e - gen).norm() < 1e-10, "{e:?}");
        assert!((z - V3::new(2.0 * a, 0.0, 2.0)).norm() < 1e-12);
        for &(s, t) in &[(0.2, 0.5), (-0.25, -0.8)] {
            assert!(ch.distance_to_surface(s, t) < 1e-8);
        }
        let plane = catalog("plane", &[]).unwrap();
        assert!(matches!(detect_ruling(&plane, [0.0, 0.0], (-0.1, 0.1), 0.01), Err(Error::Planar)));
        let sph = catalog("sphere", &[]).unwrap();
        assert!(matches!(detect_ruling(&sph, [0.1, 0.0], (-0.1, 0.1), 0.01), Err(Error::Regime(_))));
    }

    #[test]
    fn structure_on_chart_grid() {
        let s: Vec<f64> = (0..11).map(|i| -0.5 + 0.1 * i as f64).collect();
        let t: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
        let w = parabolic_isometry(&s, &t, f64::cos, |x| (2.0 * x).sin());
        assert!(verify_linear_in_t(&w) < 1e-12);
        let q = ChartField::from_fn(&s, &t, |_, tk| tk * tk);
        assert!((verify_linear_in_t(&q) - 2.0).abs() < 1e-10);
        // injective on a mode basis
        let mut cols = Vec::new();
        for k in 0..4 {
            cols.push(parabolic_isometry(&s, &t, |x| (k as f64 * x).cos(), |_| 0.0).values);
            cols.push(parabolic_isometry(&s, &t, |_| 0.0, |x| (k as f64 * x).cos()).values);
        }
        let m = nalgebra::DMatrix::from_fn(cols[0].len(), cols.len(), |r, c| cols[c][r]);
        let sv = m.svd(false, false).singular_values;
        assert!(sv.min() > 1e-6 * sv.max());
    }

    fn ambient_residual(w0: &Trig, w1: &Trig, th: f64, z: f64) -> f64 {
        let h = 1e-4;
        let x = |a: f64, b: f64| V3::new(a.cos(), a.sin(), b);
        let v = |a: f64, b: f64| cylinder_explicit_v(w0, w1, a, b);
        let mut worst: f64 = 0.0;
        for (p, q) in [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8)] {
            let dv = (v(th + p * h, z + q * h) - v(th - p * h, z - q * h)) / (2.0 * h);
            let dx = (x(th + p * h, z + q * h) - x(th - p * h, z - q * h)) / (2.0 * h);
            worst = worst.max(dv.dot(&dx).abs());
        }
        worst
    }

    #[test]
    fn explicit_cylinder_fields() {
        let zero = Trig::default();
        // w₀ = 1: rotation about the axis
        let v = cylinder_explicit_v(&Trig::constant(1.0), &zero, 0.7, 0.3);
        assert!((v - V3::new(-(0.7f64).sin(), (0.7f64).cos(), 0.0)).norm() < 1e-14);
        // w₁ = 1: translation along the axis
        let v = cylinder_explicit_v(&zero, &Trig::constant(1.0), 0.7, 0.3);
        assert!((v - V3::new(0.0, 0.0, 1.0)).norm() < 1e-14);
        let c2 = Trig::cosine(2, 1.0);
        for &(th, z) in &[(0.2, 0.0), (1.3, -0.7), (4.0, 1.2)] {
            assert!(ambient_residual(&c2, &zero, th, z) < 1e-6);
            assert!(ambient_residual(&Trig::sine(3, 0.5), &c2, th, z) < 1e-6);
            let n = cylinder_normal_part(&c2, &zero, th, z);
            assert!((n - 2.0 * (2.0 * th).sin()).abs() < 1e-12);
            let v = cylinder_explicit_v(&c2, &zero, th, z);
            assert!((v.dot(&V3::new(th.cos(), th.sin(), 0.0)) - n).abs() < 1e-12);
        }
        let (p0, p1) = potentials_from_normal(&Trig::cosine(2, 1.0), &Trig::sine(1, 1.0));
        for &(th, z) in &[(0.4, 0.5), (2.0, -1.0)] {
            let n = cylinder_normal_part(&p0, &p1, th, z);
            assert!((n - (2.0 * th).cos() - z * th.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn intrinsic_reconstruction_matches_explicit_field() {
        let cyl = catalog("cylinder", &[1.0, 10.0]).unwrap();
        let g = build_polar_grid(&cyl, [0.0, 0.0], GridSpec::new(32, 32, 0.8), &Tolerances::default()).unwrap();
        let ops = GridOps::new(&g);
        let c = GridCoeffs::new(&g);
        let (w0, w1) = (Trig::cosine(2, 0.3), Trig::sine(3, 0.2));
        let v = |uv: [f64; 2]| cylinder_explicit_v(&w0, &w1, uv[0], uv[1]);
        let w = g.sample(|n| cylinder_normal_part(&w0, &w1, n.uv[0], n.uv[1]));
        let f = &g.frame;
        let vo = v([0.0, 0.0]);
        let w_o = [vo.dot(&f.e1), vo.dot(&f.e2)];
        // rotation gauge: skew part of the ambient derivative of V at o
        let h = 1e-5;
        let dv = |e: &V3| {
            let c = LocalJets::new(&cyl, 0.0, 0.0, 1).coords_of(e);
            (v([h * c[0], h * c[1]]) - v([-h * c[0], -h * c[1]])) / (2.0 * h)
        };
        let a = 0.5 * (dv(&f.e1).dot(&f.e2) - dv(&f.e2).dot(&f.e1));
        let rec = reconstruct_w(&g, &ops, &c, &w, w_o, a);
        assert!(isometry_residuals(&ops, &c, &rec).max() < 1e-5);
        let mut err: f64 = 0.0;
        for j in 0..g.n_theta {
            for k in 0..=g.nt {
                err = err.max((rec.ambient(&g, j, k) - v(g.node(j, k).uv)).norm());
            }
        }
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn polar_solve_is_linear_along_rulings() {
        let s: Vec<f64> = (0..9).map(|i| -0.3 + 0.075 * i as f64).collect();
        let t: Vec<f64> = (0..9).map(|k| -0.4 + 0.1 * k as f64).collect();
        for (name, params, o) in [("cylinder", vec![1.0, 10.0], [0.0, 0.0]), ("cone", vec![0.7, 0.05, 50.0], [0.0, 2.0])] {
            let surf = catalog(name, &params).unwrap();
            let g = build_polar_grid(&surf, o, GridSpec::new(32, 32, 0.7), &Tolerances::default()).unwrap();
            let (ops, w) = solve_on_polar_grid(&g, |x| x.z.exp() * (2.0 * x.x).cos() + x.y).unwrap();
            let ch = detect_ruling(&surf, o, (-0.35, 0.35), 0.01).unwrap();
            let f = sample_on_chart(&ch, &g, &ops, &w, &s, &t).unwrap();
            let r = verify_linear_in_t(&f);
            assert!(r < 1e-3, "{name}: {r}");
        }
    }
}
