//! Infinitesimal isometries of graphs z = h(x).
//!
//! Writing V = (v, u) with v in the plane, the isometry equations read
//! sym Dv = -sym(∇u ⊗ ∇h). Compatibility of this strain forces
//! A : D²u = 0 with A the cofactor matrix of D²h, and then v is recovered from
//! u up to a planar rigid motion.

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::numerics::{gauss_legendre, Lu};
use crate::surface::{Family, LocalJets, Surface};

fn check_graph(s: &Surface) -> Result<()> {
    match s.family {
        Family::Graph { .. } | Family::RadialGraph { .. } => Ok(()),
        _ => Err(Error::Precondition(format!("{} is not a graph over the plane", s.name))),
    }
}

/// Height h with its gradient and Hessian at x.
fn height(s: &Surface, x: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let u = Jet::var_u(x[0], 2);
    let v = Jet::var_v(x[1], 2);
    let h = s.point(u, v)[2];
    (
        h.value(),
        [h.deriv(1, 0), h.deriv(0, 1)],
        [[h.deriv(2, 0), h.deriv(1, 1)], [h.deriv(1, 1), h.deriv(0, 2)]],
    )
}

/// Cofactor matrix of D²h; A : D²u = 0 is the equation for the vertical
/// component of an isometry.
pub fn graph_operator_a(s: &Surface, x: [f64; 2]) -> Result<Matrix2<f64>> {
    check_graph(s)?;
    let (_, _, d2) = height(s, x);
    Ok(Matrix2::new(d2[1][1], -d2[0][1], -d2[0][1], d2[0][0]))
}

/// Uniform planar grid on a rectangle, optionally masked to a disk.
#[derive(Clone, Debug)]
pub struct PlanarGrid {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
    /// Nodes carrying unknowns.
    pub interior: Vec<bool>,
    /// Nodes carrying Dirichlet data.
    pub boundary: Vec<bool>,
}

impl PlanarGrid {
    /// `nx` by `ny` nodes on [x0, x1] × [y0, y1]; the outer ring is boundary.
    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<PlanarGrid> {
        if nx < 5 || ny < 5 || x1 <= x0 || y1 <= y0 {
            return Err(Error::Grid(format!("rectangle grid {nx}x{ny}")));
        }
        let mut interior = vec![false; nx * ny];
        let mut boundary = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let edge = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
                interior[j * nx + i] = !edge;
                boundary[j * nx + i] = edge;
            }
        }
        Ok(PlanarGrid {
            x0,
            y0,
            hx: (x1 - x0) / (nx - 1) as f64,
            hy: (y1 - y0) / (ny - 1) as f64,
            nx,
            ny,
            interior,
            boundary,
        })
    }

    /// Disk of radius r about c on a square grid with `n` nodes per side.
    /// Boundary nodes are the outside nodes touching an interior node.
    pub fn disk(c: [f64; 2], r: f64, n: usize) -> Result<PlanarGrid> {
        if n < 7 || r <= 0.0 {
            return Err(Error::Grid(format!("disk grid n={n}, r={r}")));
        }
        let pad = 2.0 * r / (n - 5) as f64 * 2.0;
        let mut g = PlanarGrid::rect(c[0] - r - pad, c[0] + r + pad, c[1] - r - pad, c[1] + r + pad, n, n)?;
        for j in 0..n {
            for i in 0..n {
                let p = g.point(i, j);
                g.interior[j * n + i] = (p[0] - c[0]).hypot(p[1] - c[1]) < r;
            }
        }
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                g.boundary[k] = false;
                if g.interior[k] {
                    continue;
                }
                'nb: for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if ii >= 0 && jj >= 0 && (ii as usize) < n && (jj as usize) < n && g.interior[jj as usize * n + ii as usize] {
                            g.boundary[k] = true;
                            break 'nb;
                        }
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy]
    }

    pub fn point_at(&self, k: usize) -> [f64; 2] {
        self.point(k % self.nx, k / self.nx)
    }

    pub fn in_domain(&self, k: usize) -> bool {
        self.interior[k] || self.boundary[k]
    }
}

/// Nodal values on a [`PlanarGrid`].
#[derive(Clone, Debug)]
pub struct PlanarField {
    pub grid: PlanarGrid,
    pub values: Vec<f64>,
}

fn lagrange4(xs: [f64; 4], x: f64) -> ([f64; 4], [f64; 4]) {
    let mut w = [0.0; 4];
    let mut dw = [0.0; 4];
    for i in 0..4 {
        let mut den = 1.0;
        for j in 0..4 {
            if j != i {
                den *= xs[i] - xs[j];
            }
        }
        let mut p = 1.0;
        let mut dp = 0.0;
        for j in 0..4 {
            if j == i {
                continue;
            }
            dp = dp * (x - xs[j]) + p;
            p *= x - xs[j];
        }
        w[i] = p / den;
        dw[i] = dp / den;
    }
    (w, dw)
}

fn stencil_start(x: f64, x0: f64, h: f64, n: usize) -> usize {
    let c = ((x - x0) / h).floor() as i64 - 1;
    c.clamp(0, n as i64 - 4) as usize
}

impl PlanarField {
    pub fn from_fn<F: Fn([f64; 2]) -> f64>(grid: &PlanarGrid, f: F) -> PlanarField {
        PlanarField {
            values: (0..grid.len()).map(|k| f(grid.point_at(k))).collect(),
            grid: grid.clone(),
        }
    }

    /// Bicubic interpolation: value and gradient at x.
    pub fn eval(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let g = &self.grid;
        let i0 = stencil_start(x[0], g.x0, g.hx, g.nx);
        let j0 = stencil_start(x[1], g.y0, g.hy, g.ny);
        let xs = [0, 1, 2, 3].map(|a| g.x0 + (i0 + a) as f64 * g.hx);
        let ys = [0, 1, 2, 3].map(|a| g.y0 + (j0 + a) as f64 * g.hy);
        let (wx, dwx) = lagrange4(xs, x[0]);
        let (wy, dwy) = lagrange4(ys, x[1]);
        let (mut v, mut vx, mut vy) = (0.0, 0.0, 0.0);
        for b in 0..4 {
            for a in 0..4 {
                let f = self.values[(j0 + b) * g.nx + i0 + a];
                v += wx[a] * wy[b] * f;
                vx += dwx[a] * wy[b] * f;
                vy += wx[a] * dwy[b] * f;
            }
        }
        (v, [vx, vy])
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.values.len())
            .filter(|&k| self.grid.in_domain(k))
            .map(|k| self.values[k].abs())
            .fold(0.0, f64::max)
    }
}

/// Finite-difference solution of A : D²u = 0 with u = ψ on the boundary
/// nodes. Fourth-order stencils are used where they fit in the domain, the
/// compact nine-point stencil next to the boundary. Nodes outside the domain
/// carry ψ as an extension so the field can be interpolated up to the
/// boundary.
pub fn graph_solve_u<F: Fn([f64; 2]) -> f64>(s: &Surface, grid: &PlanarGrid, psi: F) -> Result<PlanarField> {
    check_graph(s)?;
    let n = grid.len();
    let mut unknown = vec![usize::MAX; n];
    let mut m = 0;
    for k in 0..n {
        if grid.interior[k] {
            unknown[k] = m;
            m += 1;
        }
    }
    let mut values: Vec<f64> = (0..n).map(|k| psi(grid.point_at(k))).collect();
    if m == 0 {
        return Ok(PlanarField { grid: grid.clone(), values });
    }
    let mut mat = DMatrix::zeros(m, m);
    let mut rhs = vec![0.0; m];
    let (hx2, hy2, hxy) = (grid.hx * grid.hx, grid.hy * grid.hy, 4.0 * grid.hx * grid.hy);
    for k in 0..n {
        let r = unknown[k];
        if r == usize::MAX {
            continue;
        }
        let (i, j) = (k % grid.nx, k / grid.nx);
        let a = graph_operator_a(s, grid.point(i, j))?;
        let det = a.determinant();
        if !(det > 0.0) {
            let p = grid.point(i, j);
            return Err(Error::Regime(format!("A is not definite at ({:.4}, {:.4}): det = {det:.3e}", p[0], p[1])));
        }
        // normalize so the diagonal is positive
        let sc = a.trace().signum() / a.trace().abs().max(1e-300);
        let (axx, axy, ayy) = (a[(0, 0)] * sc, a[(0, 1)] * sc, a[(1, 1)] * sc);
        let mut put = |di: i64, dj: i64, c: f64| {
            let kk = ((j as i64 + dj) as usize) * grid.nx + (i as i64 + di) as usize;
            match unknown[kk] {
                usize::MAX => rhs[r] -= c * values[kk],
                col => mat[(r, col)] += c,
            }
        };
        let wide = i >= 2 && j >= 2 && i + 2 < grid.nx && j + 2 < grid.ny && {
            let mut ok = true;
            for dj in -2i64..=2 {
                for di in -2i64..=2 {
                    ok &= grid.in_domain(((j as i64 + dj) as usize) * grid.nx + (i as i64 + di) as usize);
                }
            }
            ok
        };
        if wide {
            // fourth-order centered stencils
            const D2: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
            const D1: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
            for a in 0..5 {
                let o = a as i64 - 2;
                put(o, 0, axx * D2[a] / hx2);
                put(0, o, ayy * D2[a] / hy2);
                for b in 0..5 {
                    let c = 2.0 * axy * D1[a] * D1[b] / (grid.hx * grid.hy);
                    if c != 0.0 {
                        put(o, b as i64 - 2, c);
                    }
                }
            }
        } else {
            put(0, 0, -2.0 * axx / hx2 - 2.0 * ayy / hy2);
            put(1, 0, axx / hx2);
            put(-1, 0, axx / hx2);
            put(0, 1, ayy / hy2);
            put(0, -1, ayy / hy2);
            let c = 2.0 * axy / hxy;
            put(1, 1, c);
            put(-1, -1, c);
            put(1, -1, -c);
            put(-1, 1, -c);
        }
    }
    let lu = Lu::new(&mat);
    if lu.pivot_ratio() < 1e-14 {
        return Err(Error::RankDeficient { sigma_min: lu.pivot_ratio() });
    }
    let x = lu.solve(&rhs);
    for k in 0..n {
        if unknown[k] != usize::MAX {
            values[k] = x[unknown[k]];
        }
    }
    Ok(PlanarField { grid: grid.clone(), values })
}

/// The planar rigid motion left free by the reconstruction: v(o) and the
/// infinitesimal rotation ω(o) = (∂₁v₂ - ∂₂v₁)(o)/2.
#[derive(Clone, Copy, Debug, Default)]
pub struct GraphGauge {
    pub v_o: [f64; 2],
    pub omega_o: f64,
}

/// Reconstructed isometry at one point.
#[derive(Clone, Copy, Debug)]
pub struct GraphIsometry {
    pub x: [f64; 2],
    /// Horizontal components (v₁, v₂).
    pub v: [f64; 2],
    /// Vertical component.
    pub u: f64,
    /// Normal component ⟨V, N⟩.
    pub w: f64,
}

/// Ingredients of the line integrals at a point of the segment.
struct SegmentTerms {
    strain_d: [f64; 2],
    g: f64,
    m_d: f64,
}

fn segment_terms(s: &Surface, grad_u: [f64; 2], x: [f64; 2], d: [f64; 2]) -> SegmentTerms {
    let (_, dh, d2) = height(s, x);
    let (u1, u2) = (grad_u[0], grad_u[1]);
    let hd = dh[0] * d[0] + dh[1] * d[1];
    let ud = u1 * d[0] + u2 * d[1];
    let m = [u1 * d2[0][1] - u2 * d2[0][0], u1 * d2[1][1] - u2 * d2[0][1]];
    SegmentTerms {
        strain_d: [-0.5 * (u1 * hd + dh[0] * ud), -0.5 * (u2 * hd + dh[1] * ud)],
        g: -u1 * dh[1] + u2 * dh[0],
        m_d: m[0] * d[0] + m[1] * d[1],
    }
}

/// Recover V = (v, u) at the points `xs` from the vertical component u,
/// given as a closure returning (u, ∇u), by integrating the strain and the
/// rotation along segments from o. The rotation's gradient is integrated
/// by parts so that only ∇u is needed.
pub fn graph_reconstruct<U>(s: &Surface, u: U, o: [f64; 2], gauge: GraphGauge, xs: &[[f64; 2]], n_quad: usize) -> Result<Vec<GraphIsometry>>
where
    U: Fn([f64; 2]) -> (f64, [f64; 2]),
{
    check_graph(s)?;
    let (nodes, weights) = gauss_legendre(n_quad);
    let (_, grad_o) = u(o);
    let g_o = segment_terms(s, grad_o, o, [0.0, 0.0]).g;
    xs.iter()
        .map(|&x| {
            let d = [x[0] - o[0], x[1] - o[1]];
            let mut strain = [0.0; 2];
            let mut omega = gauge.omega_o - 0.5 * g_o;
            for (z, wq) in nodes.iter().zip(&weights) {
                let sg = 0.5 * (z + 1.0);
                let wq = 0.5 * wq;
                let p = [o[0] + sg * d[0], o[1] + sg * d[1]];
                let (_, gu) = u(p);
                let t = segment_terms(s, gu, p, d);
                strain[0] += wq * t.strain_d[0];
                strain[1] += wq * t.strain_d[1];
                omega += wq * (0.5 * t.g + (1.0 - sg) * t.m_d);
            }
            let v = [gauge.v_o[0] + strain[0] - omega * d[1], gauge.v_o[1] + strain[1] + omega * d[0]];
            let (uv, _) = u(x);
            let n = LocalJets::new(s, x[0], x[1], 1).normal();
            let w = v[0] * n.x + v[1] * n.y + uv * n.z;
            if !w.is_finite() {
                return Err(Error::Diverged { last_t: 0.0 });
            }
            Ok(GraphIsometry { x, v, u: uv, w })
        })
        .collect()
}

/// Reconstruct on every domain node of the field's grid, with o the node
/// nearest the grid center. Entries outside the domain are `None`.
pub fn graph_reconstruct_field(s: &Surface, u: &PlanarField, o: [f64; 2], gauge: GraphGauge) -> Result<Vec<Option<GraphIsometry>>> {
    let g = &u.grid;
    let pts: Vec<[f64; 2]> = (0..g.len()).map(|k| g.point_at(k)).collect();
    let rec = graph_reconstruct(s, |x| u.eval(x), o, gauge, &pts, 24)?;
    Ok(rec.into_iter().enumerate().map(|(k, r)| g.in_domain(k).then_some(r)).collect())
}

/// Largest |⟨D_X V, X⟩| over unit planar directions ξ, X = (ξ, ⟨∇h, ξ⟩),
/// at nodes whose fourth-order difference stencils stay in the domain and
/// that are at least `margin` nodes away from any node outside it.
/// Horizontal derivatives of v are differenced; ∇u comes from `u`.
///
/// Dirichlet data that do not solve the equation near a corner of a
/// rectangle produce r² log r corner singularities, so pointwise checks
/// there need a margin.
pub fn graph_isometry_residual<U>(s: &Surface, grid: &PlanarGrid, rec: &[Option<GraphIsometry>], u: U, margin: usize) -> f64
where
    U: Fn([f64; 2]) -> (f64, [f64; 2]),
{
    let (nx, ny) = (grid.nx, grid.ny);
    let coef = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
    let mut worst: f64 = 0.0;
    let m = margin.max(2);
    let inside = |i: usize, j: usize| {
        for jj in j - m..=j + m {
            for ii in i - m..=i + m {
                if rec[jj * nx + ii].is_none() {
                    return false;
                }
            }
        }
        true
    };
    for j in m..ny.saturating_sub(m) {
        'node: for i in m..nx.saturating_sub(m) {
            if !inside(i, j) {
                continue;
            }
            let mut dx = [0.0; 2];
            let mut dy = [0.0; 2];
            for (a, c) in coef.iter().enumerate() {
                let off = a as i64 - 2;
                let kx = j * nx + (i as i64 + off) as usize;
                let ky = ((j as i64 + off) as usize) * nx + i;
                let (Some(rx), Some(ry)) = (rec[kx], rec[ky]) else { continue 'node };
                for c2 in 0..2 {
                    dx[c2] += c * rx.v[c2] / grid.hx;
                    dy[c2] += c * ry.v[c2] / grid.hy;
                }
            }
            let x = grid.point(i, j);
            let (_, dh, _) = height(s, x);
            let (_, gu) = u(x);
            let s11 = dx[0] + dh[0] * gu[0];
            let s22 = dy[1] + dh[1] * gu[1];
            let s12 = 0.5 * (dy[0] + dx[1] + dh[1] * gu[0] + dh[0] * gu[1]);
            let m = Matrix2::new(s11, s12, s12, s22);
            let e = m.symmetric_eigenvalues();
            worst = worst.max(e[0].abs()).max(e[1].abs());
        }
    }
    worst
}

/// Normal component along a radial line of a revolution graph h = H(ρ)
/// seen from the apex: w = η H'(ρ) ∫₀^ρ u H''(r) dr - u/η, with the gauge
/// fixed to zero. `u_radial` gives u along the ray.
pub fn radial_normal_component<U: Fn(f64) -> f64>(s: &Surface, theta: f64, rho: f64, u_radial: U, n_quad: usize) -> Result<f64> {
    check_graph(s)?;
    let dir = [theta.cos(), theta.sin()];
    let profile = |r: f64| {
        let (_, dh, d2) = height(s, [r * dir[0], r * dir[1]]);
        let h1 = dh[0] * dir[0] + dh[1] * dir[1];
        let h2 = dir[0] * (d2[0][0] * dir[0] + d2[0][1] * dir[1]) + dir[1] * (d2[1][0] * dir[0] + d2[1][1] * dir[1]);
        (h1, h2)
    };
    let (nodes, weights) = gauss_legendre(n_quad);
    let mut integral = 0.0;
    for (z, wq) in nodes.iter().zip(&weights) {
        let r = 0.5 * rho * (z + 1.0);
        integral += 0.5 * rho * wq * u_radial(r) * profile(r).1;
    }
    let (h1, _) = profile(rho);
    let eta = 1.0 / (1.0 + h1 * h1).sqrt();
    let ur = u_radial(rho);
    // N points down, so the sign follows the surface's normal convention
    Ok(-s.normal_sign * (eta * h1 * integral - ur / eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::catalog;

    #[test]
    fn cofactor_matrix_examples() {
        let p = catalog("paraboloid", &[]).unwrap();
        let a = graph_operator_a(&p, [0.3, -0.4]).unwrap();
        assert!((a - Matrix2::identity()).norm() < 1e-12);
        let s = Surface::graph("x*y", crate::surface::Domain::Whole).unwrap();
        let a = graph_operator_a(&s, [0.2, 0.7]).unwrap();
        assert!((a - Matrix2::new(0.0, -1.0, -1.0, 0.0)).norm() < 1e-12);
        let q = catalog("perturbed", &[0.1]).unwrap();
        let x = [0.4, -0.3];
        let (_, dh, _) = height(&q, x);
        let kappa = q.shape_at(x[0], x[1]).unwrap().kappa;
        let det = graph_operator_a(&q, x).unwrap().determinant();
        let oracle = kappa * (1.0 + dh[0] * dh[0] + dh[1] * dh[1]).powi(2);
        assert!((det - oracle).abs() < 1e-10, "{det} {oracle}");
        assert!(graph_operator_a(&catalog("sphere", &[]).unwrap(), x).is_err());
    }

    #[test]
    fn laplace_case_reproduces_quadratic() {
        let p = catalog("paraboloid", &[]).unwrap();
        let g = PlanarGrid::rect(-1.0, 1.0, -0.5, 0.5, 21, 13).unwrap();
        let u = graph_solve_u(&p, &g, |x| x[0] * x[0] - x[1] * x[1]).unwrap();
        for k in 0..g.len() {
            let x = g.point_at(k);
            assert!((u.values[k] - (x[0] * x[0] - x[1] * x[1])).abs() < 1e-10);
        }
        let c = graph_solve_u(&p, &g, |_| 2.5).unwrap();
        assert!(c.values.iter().all(|v| (v - 2.5).abs() < 1e-10));
        let d = PlanarGrid::disk([0.0, 0.0], 0.8, 25).unwrap();
        let z = graph_solve_u(&p, &d, |_| 0.0).unwrap();
        assert!(z.max_abs() < 1e-14);
    }

    #[test]
    fn saddle_is_rejected() {
        let s = Surface::graph("x*y", crate::surface::Domain::Whole).unwrap();
        let g = PlanarGrid::rect(-1.0, 1.0, -1.0, 1.0, 9, 9).unwrap();
        assert!(matches!(graph_solve_u(&s, &g, |_| 0.0), Err(Error::Regime(_))));
    }

    #[test]
    fn translation_gives_constant_horizontal_part() {
        let q = catalog("perturbed", &[0.1]).unwrap();
        let c = [0.3, -0.7, 1.1];
        let gauge = GraphGauge { v_o: [c[0], c[1]], omega_o: 0.0 };
        let pts = [[0.4, 0.2], [-0.5, 0.6], [0.0, -0.8]];
        let r = graph_reconstruct(&q, |_| (c[2], [0.0, 0.0]), [0.0, 0.0], gauge, &pts, 16).unwrap();
        for p in r {
            assert!((p.v[0] - c[0]).abs() < 1e-14 && (p.v[1] - c[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_about_horizontal_axis() {
        // a × X for a = e1 is (0, -h, y)
        let q = catalog("perturbed", &[0.1]).unwrap();
        let o = [0.1, -0.2];
        let (ho, dho, _) = height(&q, o);
        let gauge = GraphGauge {
            v_o: [0.0, -ho],
            omega_o: -0.5 * dho[0],
        };
        let pts = [[0.4, 0.2], [-0.5, 0.6], [0.0, -0.8], [0.9, 0.9]];
        let r = graph_reconstruct(&q, |x| (x[1], [0.0, 1.0]), o, gauge, &pts, 16).unwrap();
        for p in r {
            let (h, _, _) = height(&q, p.x);
            assert!(p.v[0].abs() < 1e-12, "{p:?}");
            assert!((p.v[1] + h).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn radial_formula_matches_reconstruction() {
        let p = catalog("paraboloid", &[]).unwrap();
        let u = |x: [f64; 2]| (x[0] * x[0] * x[1] + x[0].cos(), [2.0 * x[0] * x[1] - x[0].sin(), x[0] * x[0]]);
        for &(th, rho) in &[(0.3, 0.7), (2.0, 1.1), (4.0, 0.4)] {
            let x = [rho * f64::cos(th), rho * f64::sin(th)];
            let r = graph_reconstruct(&p, u, [0.0, 0.0], GraphGauge::default(), &[x], 30).unwrap();
            let w = radial_normal_component(&p, th, rho, |r| u([r * f64::cos(th), r * f64::sin(th)]).0, 30).unwrap();
            assert!((r[0].w - w).abs() < 1e-10, "{} {}", r[0].w, w);
        }
    }

    #[test]
    fn solved_field_is_an_isometry() {
        let q = catalog("perturbed", &[0.1]).unwrap();
        let g = PlanarGrid::rect(-0.5, 0.5, -0.5, 0.5, 41, 41).unwrap();
        let u = graph_solve_u(&q, &g, |x| x[0].powi(3) - 3.0 * x[0] * x[1] * x[1] + 0.3 * x[0] * x[1]).unwrap();
        let rec = graph_reconstruct_field(&q, &u, [0.0, 0.0], GraphGauge::default()).unwrap();
        let res = graph_isometry_residual(&q, &g, &rec, |x| u.eval(x), 4);
        assert!(res < 1e-4, "{res}");
    }
}
