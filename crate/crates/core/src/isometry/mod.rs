//! Infinitesimal isometries V = W + wN from their normal component.
//!
//! Along each ray the tangential part is recovered from w by quadrature:
//!
//! ```text
//! φ = <W(o), σ> - ∫₀ᵗ w Π₁₁ ds
//! ϕ = Φ₀ <W(o), σ̇> - w(o) Π(σ̇, σ) f + ∫₀ᵗ Φ(t, s) P(w)(s) ds + a f
//! ```
//!
//! which solves two of the three isometry equations identically. The third
//! holds exactly when w satisfies the characteristic equation.

pub mod graph;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::geodesic::PolarGrid;
use crate::grid::{FrameDerivs, GridOps};
use crate::killing::{sym_dw, FrameVectorField};
use crate::surface::V3;

/// Geometric coefficients sampled on the grid nodes.
#[derive(Clone, Debug)]
pub struct GridCoeffs {
    pub p11: Vec<f64>,
    pub p12: Vec<f64>,
    pub p22: Vec<f64>,
    /// DΠ components TTT, TTE, TEE, EEE.
    pub dpi: [Vec<f64>; 4],
    pub kappa: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub phi0: Vec<f64>,
}

impl GridCoeffs {
    pub fn new(grid: &PolarGrid) -> GridCoeffs {
        GridCoeffs {
            p11: grid.sample(|n| n.pi[0]),
            p12: grid.sample(|n| n.pi[1]),
            p22: grid.sample(|n| n.pi[2]),
            dpi: [
                grid.sample(|n| n.dpi[0]),
                grid.sample(|n| n.dpi[1]),
                grid.sample(|n| n.dpi[2]),
                grid.sample(|n| n.dpi[3]),
            ],
            kappa: grid.sample(|n| n.kappa),
            k1: grid.sample(|n| n.k1),
            k2: grid.sample(|n| n.k2),
            phi0: grid.sample(|n| n.phi0),
        }
    }
}

/// A candidate infinitesimal isometry on a polar grid.
#[derive(Clone, Debug)]
pub struct IsometryField {
    pub w: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// W(o) in the origin frame (e1, e2).
    pub w_o: [f64; 2],
    /// Rotation gauge a = DW(e2, e1)(o).
    pub a: f64,
}

impl IsometryField {
    pub fn tangential(&self) -> FrameVectorField {
        FrameVectorField {
            phi: self.phi.clone(),
            psi: self.psi.clone(),
        }
    }

    /// Ambient displacement at node (j, k).
    pub fn ambient(&self, grid: &PolarGrid, j: usize, k: usize) -> V3 {
        let i = grid.idx(j, k);
        let n = grid.node(j, k);
        n.tangent * self.phi[i] + n.transverse * self.psi[i] + n.normal * self.w[i]
    }
}

/// P(w) = -2 w₁ Π₁₂ + w₂ Π₁₁ - w DΠ(T, T, E).
pub fn operator_p(c: &GridCoeffs, w: &[f64], d: &FrameDerivs) -> Vec<f64> {
    (0..w.len())
        .map(|i| -2.0 * d.w1[i] * c.p12[i] + d.w2[i] * c.p11[i] - w[i] * c.dpi[1][i])
        .collect()
}

/// Value of w at the base point (shared by all rays).
fn origin_value(ops: &GridOps, w: &[f64]) -> f64 {
    (0..ops.n).map(|j| w[ops.idx(j, 0)]).sum::<f64>() / ops.n as f64
}

pub fn reconstruct_w(grid: &PolarGrid, ops: &GridOps, c: &GridCoeffs, w: &[f64], w_o: [f64; 2], a: f64) -> IsometryField {
    let d = ops.frame_derivs(w);
    let p = operator_p(c, w, &d);
    let wp: Vec<f64> = w.iter().zip(&c.p11).map(|(a, b)| a * b).collect();
    let cum = ops.cumulative(&wp);
    let kern = ops.kernel_integral(&c.phi0, &p);
    let wo = origin_value(ops, w);
    let len = grid.nt + 1;
    let mut phi = vec![0.0; w.len()];
    let mut psi = vec![0.0; w.len()];
    for (j, r) in grid.rays.iter().enumerate() {
        let (cs, sn) = (r.theta.cos(), r.theta.sin());
        let sig = w_o[0] * cs + w_o[1] * sn;
        let sigd = -w_o[0] * sn + w_o[1] * cs;
        // Π(σ̇, σ) at the origin
        let p_o = r.nodes[0].pi[1];
        for k in 0..len {
            let i = j * len + k;
            phi[i] = sig - cum[i];
            psi[i] = c.phi0[i] * sigd - wo * p_o * ops.f[i] + kern[i] + a * ops.f[i];
        }
    }
    IsometryField {
        w: w.to_vec(),
        phi,
        psi,
        w_o,
        a,
    }
}

/// Residuals of the three isometry equations, each the largest absolute
/// value over the nodes off the origin of the {T, E} frame component of
/// sym DW + w Π.
#[derive(Clone, Copy, Debug)]
pub struct IsometryResiduals {
    pub tt: f64,
    pub te: f64,
    pub ee: f64,
}

impl IsometryResiduals {
    pub fn max(&self) -> f64 {
        self.tt.max(self.te).max(self.ee)
    }
}

pub fn isometry_residuals(ops: &GridOps, c: &GridCoeffs, field: &IsometryField) -> IsometryResiduals {
    let s = sym_dw(ops, &field.tangential());
    let mut r = IsometryResiduals { tt: 0.0, te: 0.0, ee: 0.0 };
    for j in 0..ops.n {
        for k in 1..=ops.nt {
            let i = ops.idx(j, k);
            let w = field.w[i];
            r.tt = r.tt.max((s[0][i] + w * c.p11[i]).abs());
            r.te = r.te.max((s[1][i] + w * c.p12[i]).abs());
            r.ee = r.ee.max((s[2][i] + w * c.p22[i]).abs());
        }
    }
    r
}

/// <D²u, Q*Π> = u₂₂ Π₁₁ - 2 u₁₂ Π₁₂ + u₁₁ Π₂₂.
pub fn hessian_against_rotated_pi(c: &GridCoeffs, d: &FrameDerivs) -> Vec<f64> {
    (0..d.w1.len())
        .map(|i| d.w22[i] * c.p11[i] - 2.0 * d.w12[i] * c.p12[i] + d.w11[i] * c.p22[i])
        .collect()
}

/// The operator A_o u = <D²u, Q*Π> + u κ trΠ + κ₁ ∫₀ᵗ u Π₁₁ - κ₂ ∫₀ᵗ Φ P(u).
pub fn operator_ao(ops: &GridOps, c: &GridCoeffs, u: &[f64]) -> Vec<f64> {
    let d = ops.frame_derivs(u);
    let h = hessian_against_rotated_pi(c, &d);
    let p = operator_p(c, u, &d);
    let up: Vec<f64> = u.iter().zip(&c.p11).map(|(a, b)| a * b).collect();
    let cum = ops.cumulative(&up);
    let kern = ops.kernel_integral(&c.phi0, &p);
    (0..u.len())
        .map(|i| h[i] + u[i] * c.kappa[i] * (c.p11[i] + c.p22[i]) + c.k1[i] * cum[i] - c.k2[i] * kern[i])
        .collect()
}

/// Left side of the characteristic equation A_o u + u(o) Π(σ, σ̇) κ₂ f.
pub fn characteristic_lhs(ops: &GridOps, c: &GridCoeffs, u: &[f64]) -> Vec<f64> {
    let mut out = operator_ao(ops, c, u);
    let uo = origin_value(ops, u);
    let len = ops.nt + 1;
    for j in 0..ops.n {
        let p_o = c.p12[j * len];
        for k in 0..len {
            let i = j * len + k;
            out[i] += uo * p_o * c.k2[i] * ops.f[i];
        }
    }
    out
}

pub fn characteristic_residual(ops: &GridOps, c: &GridCoeffs, u: &[f64]) -> f64 {
    characteristic_lhs(ops, c, u).iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Matrix over the unknowns of [`GridOps::expand`] whose interior rows are
/// the characteristic equation times `row_scale` (nodal) and whose rim rows
/// (k = nt) are identity rows, as for a Dirichlet problem. The origin row
/// is the mean of the origin equations over rays.
pub fn characteristic_dirichlet_matrix(ops: &GridOps, c: &GridCoeffs, row_scale: &[f64]) -> DMatrix<f64> {
    let m = ops.unknowns();
    let cols: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|col| {
            let mut e = vec![0.0; m];
            e[col] = 1.0;
            let lhs = characteristic_lhs(ops, c, &ops.expand(&e));
            let scaled: Vec<f64> = lhs.iter().zip(row_scale).map(|(a, s)| a * s).collect();
            ops.compress(&scaled)
        })
        .collect();
    let mut matrix = DMatrix::from_fn(m, m, |r, c| cols[c][r]);
    for b in rim_unknowns(ops) {
        for c in 0..m {
            matrix[(b, c)] = 0.0;
        }
        matrix[(b, b)] = 1.0;
    }
    matrix
}

/// Unknown index of the rim node of every ray.
pub fn rim_unknowns(ops: &GridOps) -> Vec<usize> {
    (0..ops.n).map(|j| 1 + j * ops.nt + ops.nt - 1).collect()
}

/// Residual of <D²w, Q*Π> + w κ trΠ = <∇κ, W>.
pub fn lemma_identity_residual(ops: &GridOps, c: &GridCoeffs, field: &IsometryField) -> f64 {
    let d = ops.frame_derivs(&field.w);
    let h = hessian_against_rotated_pi(c, &d);
    (0..h.len())
        .map(|i| {
            let lhs = h[i] + field.w[i] * c.kappa[i] * (c.p11[i] + c.p22[i]);
            let rhs = c.k1[i] * field.phi[i] + c.k2[i] * field.psi[i];
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Normal component of a constant translation c.
pub fn translation_normal(grid: &PolarGrid, c: &V3) -> Vec<f64> {
    grid.sample(|n| n.normal.dot(c))
}

/// Tangential part of c at the base point in the frame (e1, e2).
pub fn translation_origin(grid: &PolarGrid, c: &V3) -> [f64; 2] {
    [grid.frame.e1.dot(c), grid.frame.e2.dot(c)]
}
