//! Limit bending energy of thin shells: I(V) = (1/24) ∫ Q₂(Ξ(V)) dA, where
//! Ξ(V) is the first-order change of the second fundamental form under V.
//!
//! Tensors are stored as (G₁₁, G₁₂, G₂₂) in an orthonormal tangent frame.

use nalgebra::{Matrix3, Vector3};

use crate::elliptic::{dirichlet_solve, dtn_theta, EllipticProblem};
use crate::error::{Error, Result};
use crate::geodesic::PolarGrid;
use crate::grid::GridOps;
use crate::isometry::{reconstruct_w, GridCoeffs, IsometryField};
use crate::numerics::{fourier_diff_matrices, gauss_legendre};
use crate::parabolic::Trig;
use crate::surface::V3;

pub type SymTensor2 = [f64; 3];

/// Lamé constants of an isotropic material.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticModuli {
    pub mu: f64,
    pub lambda: f64,
}

impl ElasticModuli {
    pub fn new(mu: f64, lambda: f64) -> Result<ElasticModuli> {
        if !(mu > 0.0 && 2.0 * mu + lambda > 0.0) {
            return Err(Error::InvalidParams(format!("moduli mu = {mu}, lambda = {lambda}")));
        }
        Ok(ElasticModuli { mu, lambda })
    }
}

fn norm2(g: &SymTensor2) -> f64 {
    g[0] * g[0] + 2.0 * g[1] * g[1] + g[2] * g[2]
}

/// Q₂(G) = 2μ|G|² + λμ/(μ + λ/2) tr²G.
pub fn q2_closed(m: &ElasticModuli, g: &SymTensor2) -> f64 {
    let tr = g[0] + g[2];
    2.0 * m.mu * norm2(g) + m.lambda * m.mu / (m.mu + 0.5 * m.lambda) * tr * tr
}

/// Q₃(F) = 2μ|sym F|² + λ tr²F.
pub fn q3(m: &ElasticModuli, f: &Matrix3<f64>) -> f64 {
    let s = (f + f.transpose()) * 0.5;
    2.0 * m.mu * s.norm_squared() + m.lambda * f.trace().powi(2)
}

fn q3_bilinear(m: &ElasticModuli, a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let sa = (a + a.transpose()) * 0.5;
    let sb = (b + b.transpose()) * 0.5;
    2.0 * m.mu * sa.dot(&sb) + m.lambda * a.trace() * b.trace()
}

/// min over a ∈ ℝ³ of Q₃(F + a⊗N) with F the tangential block G and
/// N = e₃. Returns the minimum and the minimizer.
pub fn q2_oracle(m: &ElasticModuli, g: &SymTensor2) -> (f64, [f64; 3]) {
    let f = Matrix3::new(g[0], g[1], 0.0, g[1], g[2], 0.0, 0.0, 0.0, 0.0);
    let basis: Vec<Matrix3<f64>> = (0..3)
        .map(|i| {
            let mut e = Matrix3::zeros();
            e[(i, 2)] = 1.0;
            e
        })
        .collect();
    let h = Matrix3::from_fn(|i, j| q3_bilinear(m, &basis[i], &basis[j]));
    let b = Vector3::from_fn(|i, _| q3_bilinear(m, &f, &basis[i]));
    let a = h.lu().solve(&(-b)).expect("Q3 is positive definite on normal augmentations");
    let mut fa = f;
    for i in 0..3 {
        fa[(i, 2)] += a[i];
    }
    (q3(m, &fa), [a[0], a[1], a[2]])
}

/// Ξ(V) = ι(W)DΠ + Π(D·W, ·) + Π(·, D·W) + w T₀ - D²w in the {T, E}
/// frame. Origin entries are zero.
pub fn xi_tensor(ops: &GridOps, c: &GridCoeffs, field: &IsometryField) -> [Vec<f64>; 3] {
    let (phi, psi) = (&field.phi, &field.psi);
    let phi_t = ops.d_t(phi);
    let psi_t = ops.d_t(psi);
    let phi_th = ops.d_th(phi);
    let psi_th = ops.d_th(psi);
    let d = ops.frame_derivs(&field.w);
    let len = phi.len();
    let mut xi = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for j in 0..ops.n {
        for k in 1..=ops.nt {
            let i = ops.idx(j, k);
            let (f, ft) = (ops.f[i], ops.f_t[i]);
            // M[a][b] = <D_{e_a} W, e_b>
            let m = [[phi_t[i], psi_t[i]], [(phi_th[i] - ft * psi[i]) / f, (psi_th[i] + ft * phi[i]) / f]];
            let p = [[c.p11[i], c.p12[i]], [c.p12[i], c.p22[i]]];
            let a = |r: usize, s: usize| m[r][0] * p[0][s] + m[r][1] * p[1][s];
            let t0 = |r: usize, s: usize| p[r][0] * p[0][s] + p[r][1] * p[1][s];
            let dp = [c.dpi[0][i], c.dpi[1][i], c.dpi[2][i], c.dpi[3][i]];
            let iota = [
                phi[i] * dp[0] + psi[i] * dp[1],
                phi[i] * dp[1] + psi[i] * dp[2],
                phi[i] * dp[2] + psi[i] * dp[3],
            ];
            let w = field.w[i];
            xi[0][i] = iota[0] + 2.0 * a(0, 0) + w * t0(0, 0) - d.w11[i];
            xi[1][i] = iota[1] + a(0, 1) + a(1, 0) + w * t0(0, 1) - d.w12[i];
            xi[2][i] = iota[2] + 2.0 * a(1, 1) + w * t0(1, 1) - d.w22[i];
        }
    }
    xi
}

/// (φ*Π̄ - Π)/ε for the deformed surface x + εV, with the second
/// fundamental forms computed by grid differentiation of the positions.
/// `v` holds the ambient displacement at every node.
pub fn xi_fd_oracle(grid: &PolarGrid, ops: &GridOps, v: &[V3], eps: f64) -> [Vec<f64>; 3] {
    let len = ops.len();
    let second_form = |s: f64| -> [Vec<f64>; 3] {
        let mut comp: Vec<Vec<f64>> = vec![Vec::with_capacity(len); 3];
        for j in 0..grid.n_theta {
            for k in 0..=grid.nt {
                let y = grid.node(j, k).position + v[ops.idx(j, k)] * s;
                for (c, out) in comp.iter_mut().enumerate() {
                    out.push(y[c]);
                }
            }
        }
        let der: Vec<[Vec<f64>; 5]> = comp
            .iter()
            .map(|y| {
                let yt = ops.d_t(y);
                let yth = ops.d_th(y);
                [ops.d_tt(y), ops.d_th(&yt), ops.d_thth(y), yt, yth]
            })
            .collect();
        let at = |q: usize, i: usize| V3::new(der[0][q][i], der[1][q][i], der[2][q][i]);
        let mut out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        for j in 0..grid.n_theta {
            for k in 1..=grid.nt {
                let i = ops.idx(j, k);
                let mut nb = at(3, i).cross(&at(4, i)).normalize();
                if nb.dot(&grid.node(j, k).normal) < 0.0 {
                    nb = -nb;
                }
                let f = ops.f[i];
                out[0][i] = -at(0, i).dot(&nb);
                out[1][i] = -at(1, i).dot(&nb) / f;
                out[2][i] = -at(2, i).dot(&nb) / (f * f);
            }
        }
        out
    };
    let (a, b) = (second_form(eps), second_form(0.0));
    let diff = |q: usize| a[q].iter().zip(&b[q]).map(|(x, y)| (x - y) / eps).collect();
    [diff(0), diff(1), diff(2)]
}

/// max |tr Ξ| over the nodes off the origin.
pub fn trace_xi_residual(ops: &GridOps, xi: &[Vec<f64>; 3]) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..ops.n {
        for k in 1..=ops.nt {
            let i = ops.idx(j, k);
            m = m.max((xi[0][i] + xi[2][i]).abs());
        }
    }
    m
}

/// (1/24) ∫ Q₂(Ξ) dA over the polar grid.
pub fn bending_energy(ops: &GridOps, xi: &[Vec<f64>; 3], m: &ElasticModuli) -> f64 {
    let dens: Vec<f64> = (0..ops.len()).map(|i| q2_closed(m, &[xi[0][i], xi[1][i], xi[2][i]])).collect();
    ops.integrate(&dens) / 24.0
}

/// Boundary form of the energy of a cap solution on the sphere of
/// curvature κ, from the rim values ψ and the normal derivatives Θψ at the
/// n equispaced rim angles:
/// (μ/12) ∮ [2ψ_τ(Θψ)_τ - κψΘψ - √κ cot(√κ a)(|Θψ|² + |ψ_τ|²)] dΓ.
pub fn sphere_boundary_energy(kappa: f64, a: f64, psi: &[f64], theta_psi: &[f64], m: &ElasticModuli) -> f64 {
    let n = psi.len();
    let (d1, _) = fourier_diff_matrices(n);
    let pv = nalgebra::DVector::from_column_slice(psi);
    let qv = nalgebra::DVector::from_column_slice(theta_psi);
    let (p_th, q_th) = (&d1 * &pv, &d1 * &qv);
    let sk = kappa.sqrt();
    let f = (sk * a).sin() / sk;
    let cot = (sk * a).cos() / (sk * a).sin();
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let sum: f64 = (0..n)
        .map(|j| {
            let (ps, q) = (psi[j], theta_psi[j]);
            let (pt, qt) = (p_th[j] / f, q_th[j] / f);
            (2.0 * pt * qt - kappa * ps * q - sk * cot * (q * q + pt * pt)) * f
        })
        .sum();
    m.mu / 12.0 * sum * h
}

/// Both forms of the energy of the cap isometry with boundary data ψ.
#[derive(Clone, Debug)]
pub struct CapEnergy {
    pub boundary: f64,
    pub interior: f64,
    pub trace_residual: f64,
    pub field: IsometryField,
}

/// Solve the Dirichlet problem on an assembled cap, reconstruct the
/// isometry and evaluate its energy by interior quadrature and by the
/// boundary formula.
pub fn sphere_cap_energy(p: &EllipticProblem, kappa: f64, psi: &[f64], m: &ElasticModuli, kernel_tol: f64) -> Result<CapEnergy> {
    let w = dirichlet_solve(p, psi, kernel_tol)?;
    let field = reconstruct_w(&p.grid, &p.ops, &p.coeffs, &w, [0.0, 0.0], 0.0);
    let xi = xi_tensor(&p.ops, &p.coeffs, &field);
    let theta_psi = dtn_theta(p, &w);
    Ok(CapEnergy {
        boundary: sphere_boundary_energy(kappa, p.grid.t_max(), psi, &theta_psi, m),
        interior: bending_energy(&p.ops, &xi, m),
        trace_residual: trace_xi_residual(&p.ops, &xi),
        field,
    })
}

/// ∫₀^{2π} g² dθ by composite Gauss-Legendre (the integrands need not be
/// periodic).
fn integral_of_square(g: &Trig) -> f64 {
    let (x, wq) = gauss_legendre(10);
    let panels = 48;
    let h = 2.0 * std::f64::consts::PI / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let c = (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&wq) {
            let v = g.eval(c + 0.5 * h * xi);
            s += wi * v * v * 0.5 * h;
        }
    }
    s
}

/// One-dimensional energy of the cylinder shell of radius 1 and half
/// length a for the isometry with normal component w₀(θ) + w₁(θ)z:
///
/// ∫ (μa/3)(μ+λ)/(2μ+λ) (w₀+w₀'')² + (μa/3)(w₁' + ∫₀^θ w₁)²
///   + μ(μ+λ)a³/(9(2μ+λ)) (w₁+w₁'')² dθ.
pub fn cylinder_energy_1d(w0: &Trig, w1: &Trig, a: f64, m: &ElasticModuli) -> f64 {
    let (mu, la) = (m.mu, m.lambda);
    let g0 = w0.plus(&w0.deriv().deriv());
    let g1 = w1.deriv().plus(&w1.integral());
    let g2 = w1.plus(&w1.deriv().deriv());
    let c0 = mu * a / 3.0 * (mu + la) / (2.0 * mu + la);
    let c1 = mu * a / 3.0;
    let c2 = mu * (mu + la) * a.powi(3) / (9.0 * (2.0 * mu + la));
    c0 * integral_of_square(&g0) + c1 * integral_of_square(&g1) + c2 * integral_of_square(&g2)
}

/// ∂θ R(a, b) = R(a' - b, b' + a) for R(a, b) = (-a sinθ - b cosθ, a cosθ - b sinθ).
fn d_rot(a: &Trig, b: &Trig) -> (Trig, Trig) {
    (a.deriv().plus(&b.scale(-1.0)), b.deriv().plus(a))
}

/// Ξ of the cylinder field with normal component n₀(θ) + n₁(θ)z, computed
/// as -<∂ᵢ∂ⱼV, N> from the explicit field built on the potentials.
/// Components (θθ, θz, zz); (∂θ, ∂z) is orthonormal on the unit cylinder.
pub fn cylinder_xi(n0: &Trig, n1: &Trig, th: f64, z: f64) -> SymTensor2 {
    let (p0, p1) = crate::parabolic::potentials_from_normal(n0, n1);
    // horizontal part R(A, B), A = p0 - z p1', B = p0' - z p1''
    let a = p0.plus(&p1.deriv().scale(-z));
    let b = p0.deriv().plus(&p1.deriv().deriv().scale(-z));
    let (a1, b1) = d_rot(&a, &b);
    let (_, b2) = d_rot(&a1, &b1);
    // ∂z R(A, B) = R(-p1', -p1''), then ∂θ
    let (_, bz) = d_rot(&p1.deriv().scale(-1.0), &p1.deriv().deriv().scale(-1.0));
    // <R(a, b), N> = -b and the vertical part is orthogonal to N
    [b2.eval(th), bz.eval(th), 0.0]
}

/// (1/24) ∫∫ Q₂(Ξ) over θ ∈ [0, 2π], z ∈ [-a, a] by Gauss-Legendre.
pub fn cylinder_energy_2d(n0: &Trig, n1: &Trig, a: f64, m: &ElasticModuli) -> f64 {
    let (x, wq) = gauss_legendre(10);
    let (xz, wz) = gauss_legendre(4);
    let panels = 48;
    let h = 2.0 * std::f64::consts::PI / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let c = (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&wq) {
            let th = c + 0.5 * h * xi;
            for (zi, wzi) in xz.iter().zip(&wz) {
                let g = cylinder_xi(n0, n1, th, a * zi);
                s += wi * wzi * 0.5 * h * a * q2_closed(m, &g);
            }
        }
    }
    s / 24.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{sphere_cap_grid, Discretization};
    use crate::geodesic::{build_polar_grid, GridSpec};
    use crate::isometry::{translation_normal, translation_origin};
    use crate::numerics::Tolerances;
    use crate::parabolic::cylinder_explicit_v;
    use crate::surface::{catalog, LocalJets};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn moduli() -> impl Strategy<Value = ElasticModuli> {
        (0.1f64..5.0, 0.0f64..1.0).prop_map(|(mu, s)| {
            // λ from just above -2μ up to 5μ
            let lambda = -2.0 * mu + 0.01 + s * 7.0 * mu;
            ElasticModuli { mu, lambda }
        })
    }

    proptest! {
        #[test]
        fn closed_form_is_the_minimum(m in moduli(), g in prop::array::uniform3(-3.0f64..3.0)) {
            let (o, _) = q2_oracle(&m, &g);
            let c = q2_closed(&m, &g);
            prop_assert!((o - c).abs() <= 1e-10 * (1.0 + c.abs()));
        }

        // positive definite iff 2μ + 3λ > 0; on the identity
        // Q₂ = 4μ(2μ + 3λ)/(2μ + λ)
        #[test]
        fn q2_vanishes_only_at_zero(m in moduli(), g in prop::array::uniform3(-1.0f64..1.0)) {
            let n = norm2(&g);
            prop_assume!(n > 1e-6);
            let bulk = 2.0 * m.mu + 3.0 * m.lambda;
            let id = q2_closed(&m, &[1.0, 0.0, 1.0]);
            prop_assert!((id - 4.0 * m.mu * bulk / (2.0 * m.mu + m.lambda)).abs() < 1e-9 * (1.0 + id.abs()));
            if bulk > 0.0 {
                prop_assert!(q2_closed(&m, &g) > 0.0);
            }
        }
    }

    #[test]
    fn q2_spot_values() {
        let m = ElasticModuli::new(1.0, 0.0).unwrap();
        assert_eq!(q2_closed(&m, &[0.0; 3]), 0.0);
        assert!((q2_closed(&m, &[1.0, 0.0, 0.0]) - 2.0).abs() < 1e-15);
        let (_, a) = q2_oracle(&m, &[1.0, 0.5, -2.0]);
        assert!(a[2].abs() < 1e-14);
        let m = ElasticModuli::new(1.0, 1.0).unwrap();
        assert!((q2_closed(&m, &[1.0, 0.0, 1.0]) - 20.0 / 3.0).abs() < 1e-14);
        assert!(ElasticModuli::new(1.0, -2.5).is_err());
    }

    #[test]
    fn translations_do_not_bend() {
        for (name, params, o) in [("sphere", vec![1.0], [0.2, 0.1]), ("paraboloid", vec![], [0.1, 0.0])] {
            let s = catalog(name, &params).unwrap();
            let g = build_polar_grid(&s, o, GridSpec::new(24, 24, 0.5), &Tolerances::default()).unwrap();
            let ops = GridOps::new(&g);
            let c = GridCoeffs::new(&g);
            let v = V3::new(0.3, -0.7, 0.5);
            let w = translation_normal(&g, &v);
            let f = reconstruct_w(&g, &ops, &c, &w, translation_origin(&g, &v), 0.0);
            let xi = xi_tensor(&ops, &c, &f);
            let m = ElasticModuli::new(1.0, 0.5).unwrap();
            assert!(xi.iter().flatten().all(|x| x.abs() < 1e-5), "{name}");
            assert!(bending_energy(&ops, &xi, &m) < 1e-10);
        }
    }

    #[test]
    fn sphere_identity_for_admissible_fields() {
        let g = sphere_cap_grid(1.0, PI / 4.0, 32, 32).unwrap();
        let p = EllipticProblem::assemble(g, Discretization::Collocation, &Tolerances::default()).unwrap();
        let psi: Vec<f64> = (0..32).map(|j| (2.0 * p.grid.theta(j)).cos()).collect();
        let w = dirichlet_solve(&p, &psi, 1e-8).unwrap();
        let field = reconstruct_w(&p.grid, &p.ops, &p.coeffs, &w, [0.0, 0.0], 0.0);
        let xi = xi_tensor(&p.ops, &p.coeffs, &field);
        let d = p.ops.frame_derivs(&w);
        let mut err: f64 = 0.0;
        for j in 0..32 {
            for k in 1..=32 {
                let i = p.ops.idx(j, k);
                err = err.max((xi[0][i] + w[i] + d.w11[i]).abs());
                err = err.max((xi[1][i] + d.w12[i]).abs());
                err = err.max((xi[2][i] + w[i] + d.w22[i]).abs());
            }
        }
        assert!(err < 1e-5, "{err}");
        assert!(trace_xi_residual(&p.ops, &xi) < 1e-4);
        // a non-admissible w misses the EE equation by r, and then
        // tr Ξ = -(Δw + 2w) + 2r
        let u = p.grid.sample(|n| n.position.x * n.position.x);
        let f = reconstruct_w(&p.grid, &p.ops, &p.coeffs, &u, [0.0, 0.0], 0.0);
        let xi = xi_tensor(&p.ops, &p.coeffs, &f);
        let du = p.ops.frame_derivs(&u);
        let s = crate::killing::sym_dw(&p.ops, &f.tangential());
        let mut worst: f64 = 0.0;
        let mut size: f64 = 0.0;
        for j in 0..32 {
            for k in 4..=28 {
                let i = p.ops.idx(j, k);
                let lap = du.w11[i] + du.w22[i] + 2.0 * u[i];
                let r = s[2][i] + u[i] * p.coeffs.p22[i];
                worst = worst.max((xi[0][i] + xi[2][i] + lap - 2.0 * r).abs());
                size = size.max(lap.abs());
            }
        }
        assert!(size > 0.1 && worst < 1e-5, "{worst} {size}");
    }

    #[test]
    fn cap_energy_boundary_form() {
        let g = sphere_cap_grid(1.0, PI / 4.0, 32, 32).unwrap();
        let p = EllipticProblem::assemble(g, Discretization::Collocation, &Tolerances::default()).unwrap();
        let m = ElasticModuli::new(1.0, 0.5).unwrap();
        for k in [1usize, 3] {
            let psi: Vec<f64> = (0..32).map(|j| (k as f64 * p.grid.theta(j)).cos()).collect();
            let e = sphere_cap_energy(&p, 1.0, &psi, &m, 1e-8).unwrap();
            if k == 1 {
                assert!(e.interior.abs() < 1e-8 && e.boundary.abs() < 1e-8, "{e:?}");
            } else {
                assert!(((e.boundary - e.interior) / e.interior).abs() < 1e-4, "{} {}", e.boundary, e.interior);
            }
        }
    }

    #[test]
    fn cylinder_one_dimensional_reduction() {
        let m = ElasticModuli::new(1.0, 1.0).unwrap();
        let z = Trig::default();
        let e = cylinder_energy_1d(&Trig::cosine(2, 1.0), &z, 1.0, &m);
        assert!((e - 2.0 * PI).abs() < 1e-10);
        assert!((cylinder_energy_2d(&Trig::cosine(2, 1.0), &z, 1.0, &m) - 2.0 * PI).abs() < 1e-10);
        assert_eq!(cylinder_energy_1d(&Trig::cosine(1, 1.0), &z, 1.0, &m), 0.0);
        assert_eq!(cylinder_energy_1d(&Trig::sine(1, 1.0), &z, 1.0, &m), 0.0);
        assert_eq!(cylinder_energy_1d(&z, &Trig::cosine(1, 1.0), 1.0, &m), 0.0);
        let m = ElasticModuli::new(0.7, 0.3).unwrap();
        for k in 0..=5 {
            for (n0, n1) in [
                (Trig::cosine(k, 1.0), z.clone()),
                (Trig::sine(k, 1.0), z.clone()),
                (z.clone(), Trig::cosine(k, 1.0)),
                (z.clone(), Trig::sine(k, 1.0)),
            ] {
                let a = cylinder_energy_1d(&n0, &n1, 1.3, &m);
                let b = cylinder_energy_2d(&n0, &n1, 1.3, &m);
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{k}: {a} {b}");
            }
        }
    }

    fn cylinder_field(n: usize, nt: usize, n0: &Trig, n1: &Trig) -> (PolarGrid, GridOps, GridCoeffs, IsometryField, Vec<V3>) {
        let cyl = catalog("cylinder", &[1.0, 10.0]).unwrap();
        let g = build_polar_grid(&cyl, [0.0, 0.0], GridSpec::new(n, nt, 0.8), &Tolerances::default()).unwrap();
        let ops = GridOps::new(&g);
        let c = GridCoeffs::new(&g);
        let (p0, p1) = crate::parabolic::potentials_from_normal(n0, n1);
        let v: Vec<V3> = (0..g.n_theta)
            .flat_map(|j| (0..=g.nt).map(move |k| (j, k)))
            .map(|(j, k)| {
                let uv = g.node(j, k).uv;
                cylinder_explicit_v(&p0, &p1, uv[0], uv[1])
            })
            .collect();
        let mut field = IsometryField {
            w: vec![0.0; ops.len()],
            phi: vec![0.0; ops.len()],
            psi: vec![0.0; ops.len()],
            w_o: [0.0, 0.0],
            a: 0.0,
        };
        for j in 0..g.n_theta {
            for k in 0..=g.nt {
                let (i, nd) = (ops.idx(j, k), g.node(j, k));
                field.w[i] = v[i].dot(&nd.normal);
                field.phi[i] = v[i].dot(&nd.tangent);
                field.psi[i] = v[i].dot(&nd.transverse);
            }
        }
        (g, ops, c, field, v)
    }

    #[test]
    fn grid_xi_matches_cylinder_formula() {
        let (n0, n1) = (Trig::cosine(2, 1.0), Trig::sine(3, 0.5));
        let (g, ops, c, field, _) = cylinder_field(32, 32, &n0, &n1);
        let xi = xi_tensor(&ops, &c, &field);
        let mut err: f64 = 0.0;
        for j in 0..g.n_theta {
            for k in 1..=g.nt {
                let (i, nd) = (ops.idx(j, k), g.node(j, k));
                let x = cylinder_xi(&n0, &n1, nd.uv[0], nd.uv[1]);
                // rotate the (θ, z) components into the {T, E} frame
                let jets = LocalJets::new(&g.surface, nd.uv[0], nd.uv[1], 1);
                let tc = jets.coords_of(&nd.tangent);
                let ec = jets.coords_of(&nd.transverse);
                let q = |a: &nalgebra::Vector2<f64>, b: &nalgebra::Vector2<f64>| {
                    x[0] * a[0] * b[0] + x[1] * (a[0] * b[1] + a[1] * b[0]) + x[2] * a[1] * b[1]
                };
                err = err.max((xi[0][i] - q(&tc, &tc)).abs());
                err = err.max((xi[1][i] - q(&tc, &ec)).abs());
                err = err.max((xi[2][i] - q(&ec, &ec)).abs());
            }
        }
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn linearization_converges_at_first_order() {
        let (n0, n1) = (Trig::cosine(2, 1.0), Trig::cosine(1, 0.5));
        let (g, ops, c, field, v) = cylinder_field(32, 32, &n0, &n1);
        let xi = xi_tensor(&ops, &c, &field);
        let err = |eps: f64| {
            let fd = xi_fd_oracle(&g, &ops, &v, eps);
            (0..3)
                .flat_map(|q| (0..ops.n).flat_map(move |j| (1..=ops.nt).map(move |k| (q, j, k))))
                .map(|(q, j, k)| (fd[q][ops.idx(j, k)] - xi[q][ops.idx(j, k)]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!(e1 < 1e-2 && (1.7..=2.3).contains(&(e1 / e2)), "{e1} {e2}");
    }
}
