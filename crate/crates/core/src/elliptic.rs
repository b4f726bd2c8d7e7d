//! Positive curvature: the normal component of an isometry solves the
//! elliptic equation Δ_Π w + 𝓑w = 0, where Δ_Π is the Laplacian of the
//! metric Π and 𝓑 collects lower-order and integral terms.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodesic::{build_polar_grid, GridSpec, PolarGrid};
use crate::grid::{FrameDerivs, GridOps};
use crate::isometry::{characteristic_dirichlet_matrix, hessian_against_rotated_pi, operator_p, rim_unknowns, GridCoeffs};
use crate::jet::Jet;
use crate::numerics::{largest_singular_value, quadrature_1d, smallest_singular_pair, symmetric_smallest_eig, Lu, Tolerances};
use crate::surface::{catalog, Domain, Surface};

/// Fails unless κ > 0 and Π is positive definite at every node.
pub fn check_elliptic(c: &GridCoeffs) -> Result<()> {
    for i in 0..c.kappa.len() {
        let det = c.p11[i] * c.p22[i] - c.p12[i] * c.p12[i];
        if !(c.kappa[i] > 0.0 && det > 0.0 && c.p11[i] > 0.0) {
            return Err(Error::Regime(format!(
                "not elliptic at node {i}: κ = {:.3e}, Π = [{:.3e}, {:.3e}, {:.3e}]",
                c.kappa[i], c.p11[i], c.p12[i], c.p22[i]
            )));
        }
    }
    Ok(())
}

/// Q*Π(∇κ, ∇w) = Π₂₂κ₁w₁ - Π₁₂(κ₁w₂ + κ₂w₁) + Π₁₁κ₂w₂.
pub fn rotated_pi_gradients(c: &GridCoeffs, d: &FrameDerivs) -> Vec<f64> {
    (0..d.w1.len())
        .map(|i| {
            c.p22[i] * c.k1[i] * d.w1[i] - c.p12[i] * (c.k1[i] * d.w2[i] + c.k2[i] * d.w1[i]) + c.p11[i] * c.k2[i] * d.w2[i]
        })
        .collect()
}

/// Δ_Π w from the divergence form in polar coordinates, where
/// √det Π = f√κ and the fluxes are
/// F_t = (fΠ₂₂w_t - Π₁₂w_θ)/√κ, F_θ = (-Π₁₂w_t + Π₁₁w_θ/f)/√κ.
/// At the origin, where the form degenerates, the identity value is used.
pub fn laplacian_pi(ops: &GridOps, c: &GridCoeffs, w: &[f64]) -> Result<Vec<f64>> {
    check_elliptic(c)?;
    let wt = ops.d_t(w);
    let wth = ops.d_th(w);
    let len = ops.nt + 1;
    let mut ft = vec![0.0; w.len()];
    let mut fth = vec![0.0; w.len()];
    for j in 0..ops.n {
        for k in 0..len {
            let i = j * len + k;
            let sk = c.kappa[i].sqrt();
            let f = ops.f[i];
            ft[i] = (f * c.p22[i] * wt[i] - c.p12[i] * wth[i]) / sk;
            // w_θ/f tends to w₂ at the origin
            let w2 = if k == 0 { 0.0 } else { wth[i] / f };
            fth[i] = (-c.p12[i] * wt[i] + c.p11[i] * w2) / sk;
        }
    }
    let dft = ops.d_t(&ft);
    let dfth = ops.d_th(&fth);
    let origin = laplacian_pi_identity(ops, c, w)?;
    Ok((0..w.len())
        .map(|i| {
            if i % len == 0 {
                origin[i]
            } else {
                (dft[i] + dfth[i]) / (ops.f[i] * c.kappa[i].sqrt())
            }
        })
        .collect())
}

/// Δ_Π w = (⟨D²w, Q*Π⟩ - Q*Π(∇κ, ∇w)/(2κ)) / κ.
pub fn laplacian_pi_identity(ops: &GridOps, c: &GridCoeffs, w: &[f64]) -> Result<Vec<f64>> {
    check_elliptic(c)?;
    let d = ops.frame_derivs(w);
    let h = hessian_against_rotated_pi(c, &d);
    let q = rotated_pi_gradients(c, &d);
    Ok((0..w.len()).map(|i| (h[i] - q[i] / (2.0 * c.kappa[i])) / c.kappa[i]).collect())
}

/// 𝓑w = Q*Π(∇κ,∇w)/(2κ²) + w trΠ + (κ₁/κ)∫wΠ₁₁ - (κ₂/κ)∫ΦP(w)
///      + w(o) Π(σ, σ̇) κ₂ f / κ.
pub fn operator_b(ops: &GridOps, c: &GridCoeffs, w: &[f64]) -> Result<Vec<f64>> {
    check_elliptic(c)?;
    let d = ops.frame_derivs(w);
    let q = rotated_pi_gradients(c, &d);
    let p = operator_p(c, w, &d);
    let wp: Vec<f64> = w.iter().zip(&c.p11).map(|(a, b)| a * b).collect();
    let cum = ops.cumulative(&wp);
    let kern = ops.kernel_integral(&c.phi0, &p);
    let len = ops.nt + 1;
    let wo = (0..ops.n).map(|j| w[j * len]).sum::<f64>() / ops.n as f64;
    Ok((0..w.len())
        .map(|i| {
            let k = c.kappa[i];
            let p_o = c.p12[(i / len) * len];
            q[i] / (2.0 * k * k) + w[i] * (c.p11[i] + c.p22[i]) + c.k1[i] / k * cum[i] - c.k2[i] / k * kern[i]
                + wo * p_o * c.k2[i] * ops.f[i] / k
        })
        .collect())
}

/// Conservative discretization of Δ_Π: Δ_Π ≈ -diag(1/A) K with K the
/// symmetric stiffness matrix of ∫⟨∇w, ∇v⟩_Π dA_Π over unknowns and A the
/// Π-area of each node's cell. Axis-aligned terms use edge differences,
/// the mixed term quad-averaged gradients.
pub fn flux_form_stiffness(ops: &GridOps, c: &GridCoeffs) -> Result<(DMatrix<f64>, Vec<f64>)> {
    check_elliptic(c)?;
    let (n, nt, dt) = (ops.n, ops.nt, ops.dt);
    let dth = 2.0 * std::f64::consts::PI / n as f64;
    let len = nt + 1;
    let m = ops.unknowns();
    let u = |j: usize, k: usize| if k == 0 { 0 } else { 1 + (j % n) * nt + k - 1 };
    let node = |j: usize, k: usize| (j % n) * len + k;
    let sk = |i: usize| c.kappa[i].sqrt();
    let mtt = |i: usize| ops.f[i] * c.p22[i] / sk(i);
    let mthth = |i: usize| c.p11[i] / (ops.f[i] * sk(i));
    let mtth = |i: usize| -c.p12[i] / sk(i);
    let mut kmat = DMatrix::zeros(m, m);
    let add_pair = |a: &[(usize, f64)], b: &[(usize, f64)], wgt: f64, kmat: &mut DMatrix<f64>| {
        for &(ia, ca) in a {
            for &(ib, cb) in b {
                kmat[(ia, ib)] += wgt * ca * cb;
            }
        }
    };
    for j in 0..n {
        for k in 0..nt {
            // t-edge (j,k)-(j,k+1)
            let c_t = 0.5 * (mtt(node(j, k)) + mtt(node(j, k + 1)));
            let g = [(u(j, k + 1), 1.0 / dt), (u(j, k), -1.0 / dt)];
            add_pair(&g, &g, c_t * dt * dth, &mut kmat);
            // mixed term on the quad (j..j+1, k..k+1)
            let ctr = 0.25 * (mtth(node(j, k)) + mtth(node(j + 1, k)) + mtth(node(j, k + 1)) + mtth(node(j + 1, k + 1)));
            let gt = [
                (u(j, k + 1), 0.5 / dt),
                (u(j, k), -0.5 / dt),
                (u(j + 1, k + 1), 0.5 / dt),
                (u(j + 1, k), -0.5 / dt),
            ];
            let gth = [
                (u(j + 1, k), 0.5 / dth),
                (u(j, k), -0.5 / dth),
                (u(j + 1, k + 1), 0.5 / dth),
                (u(j, k + 1), -0.5 / dth),
            ];
            add_pair(&gt, &gth, ctr * dt * dth, &mut kmat);
            add_pair(&gth, &gt, ctr * dt * dth, &mut kmat);
        }
        for k in 1..=nt {
            // θ-edge (j,k)-(j+1,k), cell width dt (half at the rim)
            let lk = if k == nt { 0.5 * dt } else { dt };
            let c_th = 0.5 * (mthth(node(j, k)) + mthth(node(j + 1, k)));
            let g = [(u(j + 1, k), 1.0 / dth), (u(j, k), -1.0 / dth)];
            add_pair(&g, &g, c_th * lk * dth, &mut kmat);
        }
    }
    let mut area = vec![0.0; m];
    area[0] = std::f64::consts::PI * dt * dt / 4.0 * sk(0);
    for j in 0..n {
        for k in 1..=nt {
            let i = node(j, k);
            let lk = if k == nt { 0.5 * dt } else { dt };
            area[u(j, k)] = ops.f[i] * sk(i) * lk * dth;
        }
    }
    Ok((kmat, area))
}

/// How Δ_Π is discretized in the assembled system. 𝓑 is always collocated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Discretization {
    /// Stencil/spectral collocation of the characteristic equation over κ.
    Collocation,
    /// Conservative Δ_Π with collocated 𝓑.
    FluxForm,
}

/// Assembled zero-order-free Dirichlet problem for Δ_Π w + 𝓑w = 0 on a
/// polar grid about o. Unknowns follow [`GridOps::expand`]; boundary rows
/// (k = nt) are identity rows.
pub struct EllipticProblem {
    pub grid: PolarGrid,
    pub ops: GridOps,
    pub coeffs: GridCoeffs,
    pub discretization: Discretization,
    pub matrix: DMatrix<f64>,
    /// Unknown index of the rim node on each ray.
    pub boundary: Vec<usize>,
    /// Extreme singular values of `matrix`.
    pub sigma_min: f64,
    pub sigma_max: f64,
    near_kernel: Vec<f64>,
    lu: Lu,
}

impl EllipticProblem {
    pub fn assemble(grid: PolarGrid, discretization: Discretization, tol: &Tolerances) -> Result<EllipticProblem> {
        let ops = GridOps::new(&grid);
        let coeffs = GridCoeffs::new(&grid);
        check_elliptic(&coeffs)?;
        let m = ops.unknowns();
        let boundary = rim_unknowns(&ops);
        let matrix = match discretization {
            Discretization::Collocation => {
                let inv: Vec<f64> = coeffs.kappa.iter().map(|k| 1.0 / k).collect();
                characteristic_dirichlet_matrix(&ops, &coeffs, &inv)
            }
            Discretization::FluxForm => {
                let (kmat, area) = flux_form_stiffness(&ops, &coeffs)?;
                let cols: Vec<Vec<f64>> = (0..m)
                    .into_par_iter()
                    .map(|col| {
                        let mut e = vec![0.0; m];
                        e[col] = 1.0;
                        let b = operator_b(&ops, &coeffs, &ops.expand(&e)).expect("checked elliptic");
                        let mut out = ops.compress(&b);
                        for r in 0..m {
                            out[r] -= kmat[(r, col)] / area[r];
                        }
                        out
                    })
                    .collect();
                let mut matrix = DMatrix::from_fn(m, m, |r, c| cols[c][r]);
                for &b in &boundary {
                    for c in 0..m {
                        matrix[(b, c)] = 0.0;
                    }
                    matrix[(b, b)] = 1.0;
                }
                matrix
            }
        };
        let (sigma_min, near_kernel) = smallest_singular_pair(&matrix, tol.eig_tol);
        let sigma_max = largest_singular_value(&matrix);
        let lu = Lu::new(&matrix);
        Ok(EllipticProblem {
            grid,
            ops,
            coeffs,
            discretization,
            matrix,
            boundary,
            sigma_min,
            sigma_max,
            near_kernel,
            lu,
        })
    }

    /// Nodal values of the right singular vector for `sigma_min`.
    pub fn near_kernel(&self) -> Vec<f64> {
        self.ops.expand(&self.near_kernel)
    }

    fn rhs(&self, psi: &[f64]) -> Result<Vec<f64>> {
        if psi.len() != self.ops.n {
            return Err(Error::InvalidParams(format!("{} boundary values for {} rays", psi.len(), self.ops.n)));
        }
        let mut b = vec![0.0; self.ops.unknowns()];
        for (j, &r) in self.boundary.iter().enumerate() {
            b[r] = psi[j];
        }
        Ok(b)
    }
}

/// Solve Δ_Π w + 𝓑w = 0 with w = ψ on the rim (one value per ray). Fails
/// with `NonUnique` when σ_min of the system is below `kernel_tol`.
pub fn dirichlet_solve(p: &EllipticProblem, psi: &[f64], kernel_tol: f64) -> Result<Vec<f64>> {
    if p.sigma_min < kernel_tol {
        return Err(Error::NonUnique {
            sigma_min: p.sigma_min,
            kernel: p.near_kernel(),
        });
    }
    let b = p.rhs(psi)?;
    let x = p.lu.solve(&b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient { sigma_min: p.sigma_min });
    }
    Ok(p.ops.expand(&x))
}

/// Least-squares solution orthogonal to the singular vectors with
/// σ < `kernel_tol`. Returns the nodal solution and the dimension of the
/// discarded near-kernel.
pub fn dirichlet_solve_orthogonal(p: &EllipticProblem, psi: &[f64], kernel_tol: f64) -> Result<(Vec<f64>, usize)> {
    let b = p.rhs(psi)?;
    let svd = p.matrix.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let m = b.len();
    let mut x = vec![0.0; m];
    let mut dropped = 0;
    for (s, &sv) in svd.singular_values.iter().enumerate() {
        if sv < kernel_tol {
            dropped += 1;
            continue;
        }
        let c: f64 = (0..m).map(|r| u[(r, s)] * b[r]).sum::<f64>() / sv;
        for (r, xr) in x.iter_mut().enumerate() {
            *xr += c * vt[(s, r)];
        }
    }
    Ok((p.ops.expand(&x), dropped))
}

/// Normal derivative w_ρ on the rim (one value per ray), by the one-sided
/// stencil along each ray.
pub fn dtn_theta(p: &EllipticProblem, w: &[f64]) -> Vec<f64> {
    let wt = p.ops.d_t(w);
    (0..p.ops.n).map(|j| wt[p.ops.idx(j, p.ops.nt)]).collect()
}

/// Polar grid of geodesic radius `a` about the north pole of the sphere of
/// curvature κ.
pub fn sphere_cap_grid(kappa: f64, a: f64, n_theta: usize, nt: usize) -> Result<PolarGrid> {
    if !(kappa > 0.0) || !(a > 0.0 && a * kappa.sqrt() < std::f64::consts::PI) {
        return Err(Error::InvalidParams(format!("cap radius {a} for κ = {kappa}")));
    }
    let s = catalog("sphere", &[1.0 / kappa.sqrt()])?;
    build_polar_grid(&s, [0.0, 0.0], GridSpec::new(n_theta, nt, a), &Tolerances::default())
}

/// First Dirichlet eigenvalue of -Δ on the geodesic cap of radius `a` on
/// the sphere of curvature κ, from the radial problem
/// -(f w')'/f = λw, f = sin(√κρ)/√κ, discretized by cell-centered finite
/// volumes on `n` cells (symmetric tridiagonal after mass scaling).
pub fn cap_eigen_lambda1(kappa: f64, a: f64, n: usize) -> Result<f64> {
    let sk = kappa.sqrt();
    if !(kappa > 0.0) || !(a > 0.0 && a * sk <= std::f64::consts::PI) || n < 4 {
        return Err(Error::InvalidParams(format!("cap eigenvalue for κ = {kappa}, a = {a}, n = {n}")));
    }
    let h = a / n as f64;
    let f = |r: f64| (sk * r).sin() / sk;
    let mass: Vec<f64> = (0..n)
        .map(|i| ((sk * i as f64 * h).cos() - (sk * (i + 1) as f64 * h).cos()) / kappa)
        .collect();
    // conductance of the face between cells i and i+1
    let cond: Vec<f64> = (0..n - 1).map(|i| f((i + 1) as f64 * h) / h).collect();
    let rim = f(a) / (0.5 * h);
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        let left = if i > 0 { cond[i - 1] } else { 0.0 };
        let right = if i + 1 < n { cond[i] } else { rim };
        s[(i, i)] = (left + right) / mass[i];
        if i + 1 < n {
            let o = -cond[i] / (mass[i] * mass[i + 1]).sqrt();
            s[(i, i + 1)] = o;
            s[(i + 1, i)] = o;
        }
    }
    Ok(symmetric_smallest_eig(&s, 1e-13).0)
}

/// Radial graph profile h(s) = H(s²) and its first two derivatives.
fn profile_derivs(surface: &Surface, s: f64) -> (f64, f64) {
    let z = surface.point(Jet::var_u(s, 2), Jet::constant(0.0))[2];
    (z.deriv(1, 0), z.deriv(2, 0))
}

/// Uniqueness check on the revolution graph z = H(|x|²) over |x| < a seen
/// from the apex: verifies h''h'/s > 0 on (0, a] and returns σ_min of the
/// zero-Dirichlet system on a polar grid reaching the rim |x| = a.
pub fn revolution_uniqueness(profile_in_q: &str, a: f64, n_theta: usize, nt: usize) -> Result<f64> {
    let surface = Surface::radial_graph(profile_in_q, Domain::Disk { r: a * 1.02 })?;
    let samples = 400;
    for i in 1..=samples {
        let s = a * i as f64 / samples as f64;
        let (h1, h2) = profile_derivs(&surface, s);
        let cond = h2 * h1 / s;
        if !(cond > 0.0) {
            return Err(Error::Precondition(format!("h''h'/s = {cond:.3e} at s = {s:.4}")));
        }
    }
    // the rim |x| = a is the geodesic circle of radius = meridian arc length
    let len = quadrature_1d(|s| (1.0 + profile_derivs(&surface, s).0.powi(2)).sqrt(), 0.0, a, 40);
    let grid = build_polar_grid(&surface, [0.0, 0.0], GridSpec::new(n_theta, nt, len), &Tolerances::default())?;
    let p = EllipticProblem::assemble(grid, Discretization::Collocation, &Tolerances::default())?;
    Ok(p.sigma_min)
}
