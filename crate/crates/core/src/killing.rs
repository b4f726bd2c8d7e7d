//! Killing fields in geodesic polar coordinates.
//!
//! A Killing field W = φ T + ϕ E is determined by W(o) and the rotation rate
//! a = DW(e2, e1): φ is constant along rays and ϕ solves the Jacobi
//! equation, so ϕ = <W(o), σ̇> Φ₀ + a f. Whether such a field is a genuine
//! Killing field on the region is decided by the remaining equations.

use crate::error::{Error, Result};
use crate::geodesic::{build_polar_grid, GridSpec, PolarGrid};
use crate::grid::GridOps;
use crate::numerics::{fornberg_weights, Tolerances};
use crate::surface::{Surface, V3};
use nalgebra::{DMatrix, Matrix2, Vector2};

/// Initial data at the base point: W(o) in the frame (e1, e2) and a.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KillingIC {
    pub w_o: [f64; 2],
    pub a: f64,
}

/// Tangent field sampled as φ = <W, T>, ϕ = <W, E> on the grid nodes.
#[derive(Clone, Debug)]
pub struct FrameVectorField {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl FrameVectorField {
    /// Ambient vector at node (j, k).
    pub fn ambient(&self, grid: &PolarGrid, j: usize, k: usize) -> V3 {
        let i = grid.idx(j, k);
        let n = grid.node(j, k);
        n.tangent * self.phi[i] + n.transverse * self.psi[i]
    }
}

pub fn killing_from_ic(grid: &PolarGrid, ic: &KillingIC) -> FrameVectorField {
    let [w1, w2] = ic.w_o;
    let phi = grid.sample_with_theta(|th, _| w1 * th.cos() + w2 * th.sin());
    let psi = grid.sample_with_theta(|th, n| (-w1 * th.sin() + w2 * th.cos()) * n.phi0 + ic.a * n.f);
    FrameVectorField { phi, psi }
}

/// Components (s11, s12, s22) of the symmetric part of DW in the {T, E}
/// frame, from numerical derivatives of φ and ϕ. Origin entries are zero.
pub fn sym_dw(ops: &GridOps, field: &FrameVectorField) -> [Vec<f64>; 3] {
    let (phi, psi) = (&field.phi, &field.psi);
    let phi_t = ops.d_t(phi);
    let psi_t = ops.d_t(psi);
    let phi_th = ops.d_th(phi);
    let psi_th = ops.d_th(psi);
    let m = phi.len();
    let mut s = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    for j in 0..ops.n {
        for k in 1..=ops.nt {
            let i = ops.idx(j, k);
            let (f, ft) = (ops.f[i], ops.f_t[i]);
            s[0][i] = phi_t[i];
            s[1][i] = 0.5 * (psi_t[i] + (phi_th[i] - ft * psi[i]) / f);
            s[2][i] = (psi_th[i] + ft * phi[i]) / f;
        }
    }
    s
}

/// Largest component of sym DW over the nodes off the origin.
pub fn killing_residual(ops: &GridOps, field: &FrameVectorField) -> f64 {
    let s = sym_dw(ops, field);
    s.iter().flat_map(|c| c.iter()).fold(0.0, |m, v| m.max(v.abs()))
}

/// max |<∇κ, W>| over the grid.
pub fn gradient_residual(grid: &PolarGrid, field: &FrameVectorField) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..grid.n_theta {
        for k in 0..=grid.nt {
            let i = grid.idx(j, k);
            let n = grid.node(j, k);
            m = m.max((n.k1 * field.phi[i] + n.k2 * field.psi[i]).abs());
        }
    }
    m
}

#[derive(Clone, Debug)]
pub struct DimensionReport {
    pub dim: usize,
    /// Singular values of the constraint system per unit RMS field, ascending.
    pub singular_values: [f64; 3],
}

/// Per-column data of the three basis fields (W(o) = e1, W(o) = e2, a = 1).
fn basis_columns(grid: &PolarGrid) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let mut values = Vec::new();
    let mut resid = Vec::new();
    for r in &grid.rays {
        let (c, s) = (r.theta.cos(), r.theta.sin());
        // <W_o, σ>, <W_o, σ̇> for W_o = e1, e2 and zero for the rotation
        let sig = [c, s, 0.0];
        let sigd = [-s, c, 0.0];
        let rot = [0.0, 0.0, 1.0];
        for n in &r.nodes[..=grid.nt] {
            let mut v1 = [0.0; 3];
            let mut v2 = [0.0; 3];
            let mut rs = [0.0; 3];
            let mut rq = [0.0; 3];
            for b in 0..3 {
                let phi = sig[b];
                let phi_th = sigd[b];
                let psi = sigd[b] * n.phi0 + rot[b] * n.f;
                let psi_t = sigd[b] * n.phi0_t + rot[b] * n.f_t;
                let psi_th = -sig[b] * n.phi0 + sigd[b] * n.phi0_th + rot[b] * n.f_th;
                v1[b] = phi;
                v2[b] = psi;
                if n.t > 0.0 {
                    rs[b] = 0.5 * (psi_t + (phi_th - n.f_t * psi) / n.f);
                    rq[b] = (psi_th + n.f_t * phi) / n.f;
                }
            }
            values.push(v1);
            values.push(v2);
            if n.t > 0.0 {
                resid.push(rs);
                resid.push(rq);
            }
        }
    }
    (values, resid)
}

fn lagrange_at(ts: &[f64], t: f64) -> Vec<f64> {
    fornberg_weights(t, ts, 0).swap_remove(0)
}

/// Seam constraints for a chart periodic in its first coordinate: rays that
/// cross u = u(o) + P/2 and u = u(o) - P/2 at the same surface point must
/// carry the same ambient vector there.
fn seam_rows(grid: &PolarGrid, period: f64) -> Result<Vec<[f64; 3]>> {
    let u0 = grid.frame.point.uv[0];
    let len = grid.nt + 1;
    let mut crossings: Vec<(f64, V3, [V3; 3])> = Vec::new();
    for (sgn_idx, target) in [u0 + 0.5 * period, u0 - 0.5 * period].into_iter().enumerate() {
        for r in &grid.rays {
            let nodes = &r.nodes[..len];
            let Some(k) = (1..len).find(|&k| {
                let a = nodes[k - 1].uv[0] - target;
                let b = nodes[k].uv[0] - target;
                a * b <= 0.0 && a != b
            }) else {
                continue;
            };
            let w = 7.min(len);
            let s = k.saturating_sub(w / 2).min(len - w);
            let ts: Vec<f64> = (s..s + w).map(|q| nodes[q].t).collect();
            // secant iteration for the crossing on the interpolated u(t)
            let ut = |t: f64| -> f64 {
                let l = lagrange_at(&ts, t);
                (0..w).map(|q| l[q] * nodes[s + q].uv[0]).sum::<f64>() - target
            };
            let (mut ta, mut tb) = (nodes[k - 1].t, nodes[k].t);
            let (mut fa, mut fb) = (ut(ta), ut(tb));
            for _ in 0..60 {
                if (fb - fa).abs() < 1e-300 {
                    break;
                }
                let tc = tb - fb * (tb - ta) / (fb - fa);
                ta = tb;
                fa = fb;
                tb = tc;
                fb = ut(tb);
                if fb.abs() < 1e-14 {
                    break;
                }
            }
            let l = lagrange_at(&ts, tb);
            let mut pos = V3::zeros();
            let mut tan = V3::zeros();
            let mut tra = V3::zeros();
            let mut ph0 = 0.0;
            let mut ff = 0.0;
            for q in 0..w {
                let n = &nodes[s + q];
                pos += n.position * l[q];
                tan += n.tangent * l[q];
                tra += n.transverse * l[q];
                ph0 += n.phi0 * l[q];
                ff += n.f * l[q];
            }
            let (c, sn) = (r.theta.cos(), r.theta.sin());
            let sig = [c, sn, 0.0];
            let sigd = [-sn, c, 0.0];
            let rot = [0.0, 0.0, 1.0];
            let mut wv = [V3::zeros(); 3];
            for b in 0..3 {
                wv[b] = tan * sig[b] + tra * (sigd[b] * ph0 + rot[b] * ff);
            }
            crossings.push((sgn_idx as f64, pos, wv));
        }
    }
    let mut rows = Vec::new();
    for a in crossings.iter().filter(|c| c.0 == 0.0) {
        for b in crossings.iter().filter(|c| c.0 == 1.0) {
            if (a.1 - b.1).norm() < 1e-6 {
                for c in 0..3 {
                    rows.push([a.2[0][c] - b.2[0][c], a.2[1][c] - b.2[1][c], a.2[2][c] - b.2[2][c]]);
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Grid("no matching seam crossings; increase t_max".into()));
    }
    Ok(rows)
}

/// Dimension of the Killing fields on one grid. The grid must carry θ
/// sensitivities. `wraps` adds the seam constraints of a region that winds
/// around a periodic chart.
pub fn killing_dimension_on(grid: &PolarGrid, wraps: bool, tol: f64) -> Result<DimensionReport> {
    if !grid.sensitivities {
        return Err(Error::Precondition("grid was built without θ sensitivities".into()));
    }
    let (values, resid) = basis_columns(grid);
    let mut blocks: Vec<Vec<[f64; 3]>> = vec![resid];
    if wraps {
        let period = grid
            .surface
            .u_period
            .ok_or_else(|| Error::Precondition("wrapping region needs a periodic chart".into()))?;
        blocks.push(seam_rows(grid, period)?);
    }
    let gram = |rows: &[[f64; 3]]| {
        let mut g = nalgebra::Matrix3::<f64>::zeros();
        for r in rows {
            for a in 0..3 {
                for b in 0..3 {
                    g[(a, b)] += r[a] * r[b];
                }
            }
        }
        g / rows.len() as f64
    };
    let l = gram(&values)
        .cholesky()
        .ok_or_else(|| Error::Grid("basis fields are linearly dependent on the grid".into()))?
        .l();
    let linv_t = l.try_inverse().expect("cholesky factor").transpose();
    let nrows: usize = blocks.iter().map(|b| b.len()).sum();
    let mut m = DMatrix::<f64>::zeros(nrows, 3);
    let mut r0 = 0;
    for b in &blocks {
        let scale = 1.0 / (b.len() as f64).sqrt();
        for (q, row) in b.iter().enumerate() {
            for c in 0..3 {
                let mut s = 0.0;
                for a in 0..3 {
                    s += row[a] * linv_t[(a, c)];
                }
                m[(r0 + q, c)] = s * scale;
            }
        }
        r0 += b.len();
    }
    let mut sv: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| a.total_cmp(b));
    let dim = sv.iter().filter(|&&s| s < tol).count();
    Ok(DimensionReport {
        dim,
        singular_values: [sv[0], sv[1], sv[2]],
    })
}

/// Dimension of the Killing fields about `origin`, checked for stability
/// when the number of rays doubles.
pub fn killing_dimension(
    surface: &Surface,
    origin: [f64; 2],
    spec: GridSpec,
    wraps: bool,
    tol: &Tolerances,
    threshold: f64,
) -> Result<DimensionReport> {
    let mut spec = spec;
    spec.sensitivities = true;
    let coarse = killing_dimension_on(&build_polar_grid(surface, origin, spec, tol)?, wraps, threshold)?;
    let fine_spec = GridSpec {
        n_theta: 2 * spec.n_theta,
        ..spec
    };
    let fine = killing_dimension_on(&build_polar_grid(surface, origin, fine_spec, tol)?, wraps, threshold)?;
    if coarse.dim != fine.dim {
        return Err(Error::Inconclusive {
            coarse: coarse.dim,
            fine: fine.dim,
        });
    }
    Ok(fine)
}

#[derive(Clone, Copy, Debug)]
pub struct Obstructions {
    /// max |D²κ(∇κ, Q∇κ)|
    pub c1: f64,
    /// max |<Q∇κ, ∇Δκ>|
    pub c2: f64,
    /// Sample points skipped because ∇κ vanishes there.
    pub skipped: usize,
}

const GRAD_FLOOR: f64 = 1e-8;

/// Both expressions must vanish on a region carrying a Killing field when
/// the curvature is not constant.
pub fn nonconstant_obstructions(surface: &Surface, points: &[[f64; 2]]) -> Result<Obstructions> {
    let mut out = Obstructions { c1: 0.0, c2: 0.0, skipped: 0 };
    for p in points {
        let cj = surface.curvature_jet(p[0], p[1])?;
        if cj.grad.norm() < GRAD_FLOOR {
            out.skipped += 1;
            continue;
        }
        let qg = crate::surface::rotate_q(&cj.normal, &cj.grad);
        let g = Vector2::new(cj.grad.dot(&cj.e1), cj.grad.dot(&cj.e2));
        let q = Vector2::new(qg.dot(&cj.e1), qg.dot(&cj.e2));
        out.c1 = out.c1.max(g.dot(&(cj.hess * q)).abs());
        out.c2 = out.c2.max(qg.dot(&cj.grad_lap).abs());
    }
    if out.skipped == points.len() {
        return Err(Error::ConstantCurvature);
    }
    Ok(out)
}

/// The candidate W = e^{h₀} Q∇κ on a polar grid about `p0`, with h₀ the
/// path integral of ∇h = (|∇κ|²Δκ - 2D²κ(∇κ, ∇κ)) / |∇κ|⁴ ∇κ along rays.
pub fn killing_candidate_nonconstant(
    surface: &Surface,
    p0: [f64; 2],
    spec: GridSpec,
    tol: &Tolerances,
    obstruction_tol: f64,
) -> Result<(PolarGrid, FrameVectorField)> {
    let grid = build_polar_grid(surface, p0, spec, tol)?;
    let mut pts = Vec::with_capacity(grid.len());
    for r in &grid.rays {
        for n in &r.nodes[..=grid.nt] {
            pts.push(n.uv);
        }
    }
    let jets: Vec<_> = pts
        .iter()
        .map(|p| surface.curvature_jet(p[0], p[1]))
        .collect::<Result<_>>()?;
    // a critical point inside the region shows up as a gradient far below
    // its typical size, even when no node hits it exactly
    let gmax = jets.iter().map(|c| c.grad.norm()).fold(0.0, f64::max);
    if jets.iter().any(|c| c.grad.norm() < GRAD_FLOOR.max(1e-3 * gmax)) {
        return Err(Error::CriticalPoint);
    }
    // or as ∇κ reversing between neighbouring nodes of a ray
    let len = grid.nt + 1;
    for ray in jets.chunks(len) {
        if ray.windows(2).any(|p| p[0].grad.dot(&p[1].grad) <= 0.0) {
            return Err(Error::CriticalPoint);
        }
    }
    let obs = nonconstant_obstructions(surface, &pts)?;
    if obs.c1 > obstruction_tol || obs.c2 > obstruction_tol {
        return Err(Error::Obstructed { c1: obs.c1, c2: obs.c2 });
    }
    let ops = GridOps::new(&grid);
    let mut dh = vec![0.0; grid.len()];
    let mut i = 0;
    for r in &grid.rays {
        for n in &r.nodes[..=grid.nt] {
            let cj = &jets[i];
            let g2 = cj.grad.norm_squared();
            let gv = Vector2::new(cj.grad.dot(&cj.e1), cj.grad.dot(&cj.e2));
            let hgg = gv.dot(&(cj.hess * gv));
            let coef = (g2 * cj.lap - 2.0 * hgg) / (g2 * g2);
            dh[i] = coef * cj.grad.dot(&n.tangent);
            i += 1;
        }
    }
    let h0 = ops.cumulative(&dh);
    let phi = grid.sample(|n| n.k2);
    let psi = grid.sample(|n| -n.k1);
    let scale: Vec<f64> = h0.iter().map(|h| h.exp()).collect();
    Ok((
        grid,
        FrameVectorField {
            phi: phi.iter().zip(&scale).map(|(a, b)| a * b).collect(),
            psi: psi.iter().zip(&scale).map(|(a, b)| a * b).collect(),
        },
    ))
}

/// Frame components of the covariant Hessian of κ at a node, for callers
/// that want the lemma residual D²κ(∇κ, W).
pub fn hessian_lemma_residual(surface: &Surface, grid: &PolarGrid, field: &FrameVectorField) -> Result<f64> {
    let mut m: f64 = 0.0;
    for j in 0..grid.n_theta {
        for k in 1..=grid.nt {
            let n = grid.node(j, k);
            let cj = surface.curvature_jet(n.uv[0], n.uv[1])?;
            let w = field.ambient(grid, j, k);
            let to = |v: &V3| Vector2::new(v.dot(&cj.e1), v.dot(&cj.e2));
            let h: Matrix2<f64> = cj.hess;
            m = m.max(to(&cj.grad).dot(&(h * to(&w))).abs());
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::catalog;

    fn grid(name: &str, params: &[f64], o: [f64; 2], n: usize, nt: usize, tmax: f64) -> PolarGrid {
        let s = catalog(name, params).unwrap();
        let mut spec = GridSpec::new(n, nt, tmax);
        spec.sensitivities = true;
        build_polar_grid(&s, o, spec, &Tolerances::default()).unwrap()
    }

    #[test]
    fn sphere_rotation_is_jacobi_field() {
        let g = grid("sphere", &[1.0], [0.0, 0.0], 16, 20, 1.0);
        let w = killing_from_ic(&g, &KillingIC { w_o: [0.0, 0.0], a: 1.0 });
        for j in 0..g.n_theta {
            for k in 0..=g.nt {
                let i = g.idx(j, k);
                assert!((w.psi[i] - g.t(k).sin()).abs() < 1e-9);
                assert_eq!(w.phi[i], 0.0);
            }
        }
        let ops = GridOps::new(&g);
        assert!(killing_residual(&ops, &w) < 1e-6);
    }

    #[test]
    fn plane_translation_is_constant() {
        let g = grid("plane", &[], [0.0, 0.0], 16, 10, 1.0);
        let w = killing_from_ic(&g, &KillingIC { w_o: [1.0, 0.0], a: 0.0 });
        for j in 0..g.n_theta {
            for k in 0..=g.nt {
                let v = w.ambient(&g, j, k);
                assert!((v - V3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
            }
        }
        assert!(killing_residual(&GridOps::new(&g), &w) < 1e-6);
    }

    #[test]
    fn non_killing_field_has_large_residual() {
        let g = grid("plane", &[], [0.0, 0.0], 16, 10, 1.0);
        let phi = g.sample(|n| n.t);
        let w = FrameVectorField {
            phi,
            psi: vec![0.0; g.len()],
        };
        assert!(killing_residual(&GridOps::new(&g), &w) >= 0.5);
    }

    #[test]
    fn cylinder_rotation_about_point_grows_linearly() {
        let g = grid("cylinder", &[1.0, 10.0], [0.0, 0.0], 16, 10, 1.0);
        let w = killing_from_ic(&g, &KillingIC { w_o: [0.0, 0.0], a: 1.0 });
        for k in 0..=g.nt {
            assert!((w.psi[g.idx(5, k)] - g.t(k)).abs() < 1e-10);
        }
    }

    #[test]
    fn dimensions_of_model_regions() {
        let tol = Tolerances::default();
        let s = catalog("sphere", &[1.0]).unwrap();
        let d = killing_dimension(&s, [0.0, 0.0], GridSpec::new(8, 10, 1.0), false, &tol, 1e-6).unwrap();
        assert_eq!(d.dim, 3);
        let s = catalog("perturbed", &[]).unwrap();
        let d = killing_dimension(&s, [0.1, -0.2], GridSpec::new(8, 10, 0.6), false, &tol, 1e-6).unwrap();
        assert_eq!(d.dim, 0, "{:?}", d.singular_values);
    }

    #[test]
    fn obstructions_separate_symmetric_from_generic() {
        let s = catalog("log-revolution-graph", &[]).unwrap();
        let pts: Vec<[f64; 2]> = (0..20).map(|i| [1.2 + 0.03 * i as f64, 0.1 * i as f64 - 0.7]).collect();
        let o = nonconstant_obstructions(&s, &pts).unwrap();
        assert!(o.c1 < 1e-6 && o.c2 < 1e-6, "{o:?}");
        let s = catalog("perturbed", &[]).unwrap();
        let pts: Vec<[f64; 2]> = (0..20).map(|i| [0.05 * i as f64 - 0.4, 0.3 - 0.02 * i as f64]).collect();
        let o = nonconstant_obstructions(&s, &pts).unwrap();
        assert!(o.c1 > 1e-3 || o.c2 > 1e-3, "{o:?}");
        let s = catalog("sphere", &[1.0]).unwrap();
        assert!(matches!(nonconstant_obstructions(&s, &pts), Err(Error::ConstantCurvature)));
    }
}
