//! End-to-end checks of the whole library, one per acceptance criterion.
//! Each check compares against an independent closed form or oracle and
//! reports a one-line verdict. Used by the acceptance test and by the CLI.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bending::{
    cylinder_energy_1d, cylinder_energy_2d, q2_closed, q2_oracle, sphere_cap_energy, xi_fd_oracle, xi_tensor, ElasticModuli,
};
use crate::elliptic::{cap_eigen_lambda1, dirichlet_solve, sphere_cap_grid, Discretization, EllipticProblem};
use crate::error::{Error, Result};
use crate::geodesic::{build_polar_grid, shoot_ray, GridSpec, OriginFrame, PolarGrid};
use crate::grid::GridOps;
use crate::hyperbolic::{evolve_cauchy, growth_fit, Angles, CauchyData, EvolveOptions, HyperbolicChart, Lower};
use crate::isometry::graph::{graph_reconstruct, graph_reconstruct_field, graph_solve_u, radial_normal_component, GraphGauge, PlanarGrid};
use crate::isometry::{characteristic_residual, isometry_residuals, reconstruct_w, GridCoeffs, IsometryField};
use crate::killing::{gradient_residual, killing_candidate_nonconstant, killing_dimension, killing_from_ic, killing_residual, KillingIC};
use crate::numerics::Tolerances;
use crate::parabolic::{cylinder_explicit_v, detect_ruling, potentials_from_normal, parabolic_isometry, sample_on_chart, solve_on_polar_grid, verify_linear_in_t, Trig};
use crate::surface::{catalog, V3};

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The criterion as stated contradicts the mathematics; the string says
    /// why and which statement was verified instead.
    Unattainable(String),
}

#[derive(Clone, Debug)]
pub struct Check {
    pub id: usize,
    pub title: &'static str,
    pub verdict: Verdict,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    /// `[PASS] 4 Q2 closed form: ...` style line.
    pub fn line(&self) -> String {
        let tag = match &self.verdict {
            Verdict::Pass => "PASS",
            _ => "FAIL",
        };
        let mut s = format!("[{tag}] {:>2} {}: {} ({:.2} s)", self.id, self.title, self.detail, self.seconds);
        if let Verdict::Unattainable(why) = &self.verdict {
            s.push_str(&format!(" [unattainable as stated: {why}]"));
        }
        s
    }

    /// True unless a verifiable statement failed.
    pub fn ok(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

pub const COUNT: usize = 13;

const TITLES: [&str; COUNT] = [
    "Jacobi closed forms",
    "Killing dimensions",
    "Killing residuals",
    "Q2 closed form vs minimization",
    "Xi vs linearized second form",
    "cap eigenvalue threshold",
    "cap uniqueness and kernel",
    "characteristic round trip",
    "sphere energy reduction",
    "cylinder energy reduction",
    "parabolic linearity along rulings",
    "hyperbolic evolution",
    "graph route",
];

type Outcome = Result<(bool, String)>;

/// Run check `id` (1-based).
pub fn run(id: usize) -> Check {
    assert!((1..=COUNT).contains(&id), "no check {id}");
    let start = Instant::now();
    let mut unattainable = None;
    let out = match id {
        1 => jacobi(),
        2 => dimensions(),
        3 => killing_residuals(),
        4 => q2_equivalence(),
        5 => xi_consistency(),
        6 => eigen_threshold(),
        7 => uniqueness(&mut unattainable),
        8 => round_trip(),
        9 => sphere_energy(),
        10 => cylinder_energy(),
        11 => parabolic_structure(),
        12 => hyperbolic(),
        _ => graph_route(),
    };
    let seconds = start.elapsed().as_secs_f64();
    let budget = match id {
        1 => Some(1.0),
        2 => Some(30.0),
        6 => Some(5.0),
        9 => Some(10.0),
        12 => Some(20.0),
        _ => None,
    };
    let (mut verdict, mut detail) = match out {
        Ok((true, d)) => (Verdict::Pass, d),
        Ok((false, d)) => (Verdict::Fail, d),
        Err(e) => (Verdict::Fail, format!("error: {e}")),
    };
    if let Some(b) = budget {
        if seconds > b {
            verdict = Verdict::Fail;
            detail.push_str(&format!("; over the {b} s budget"));
        }
    }
    if verdict == Verdict::Pass {
        if let Some(why) = unattainable {
            verdict = Verdict::Unattainable(why);
        }
    }
    Check {
        id,
        title: TITLES[id - 1],
        verdict,
        detail,
        seconds,
    }
}

pub fn run_all() -> Vec<Check> {
    (1..=COUNT).map(run).collect()
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn jacobi() -> Outcome {
    let tol = Tolerances {
        ode_step: 1e-3,
        ..Tolerances::default()
    };
    let mut worst = [0.0_f64; 2];
    for (q, (name, exact)) in [("sphere", f64::sin as fn(f64) -> f64), ("plane", |t| t)].into_iter().enumerate() {
        let s = catalog(name, &[])?;
        let fr = OriginFrame::new(&s, [0.0, 0.0])?;
        for th in [0.0, 1.3, 4.0] {
            let ray = shoot_ray(&s, &fr, th, 1e-3, 3000, &tol, false);
            if ray.valid_steps() < 3000 {
                return Err(Error::Grid(format!("{name} ray stopped: {:?}", ray.stop)));
            }
            worst[q] = worst[q].max(max_abs(ray.nodes.iter().map(|n| n.f - exact(n.t))));
        }
    }
    Ok((
        worst[0] <= 1e-8 && worst[1] <= 1e-10,
        format!("sphere max|f - sin t| = {:.2e}, plane max|f - t| = {:.2e}", worst[0], worst[1]),
    ))
}

fn dimensions() -> Outcome {
    let tol = Tolerances::default();
    let cases: [(&str, &str, Vec<f64>, [f64; 2], GridSpec, bool, usize); 5] = [
        ("sphere cap", "sphere", vec![1.0], [0.0, 0.0], GridSpec::new(8, 10, 1.0), false, 3),
        ("flat disk", "plane", vec![], [0.0, 0.0], GridSpec::new(8, 10, 1.0), false, 3),
        ("cylinder band", "cylinder", vec![1.0, 10.0], [0.0, 0.0], GridSpec::new(16, 36, 3.6), true, 2),
        ("perturbed graph", "perturbed", vec![0.1], [0.1, -0.2], GridSpec::new(8, 10, 0.6), false, 0),
        ("revolution annulus", "log-revolution-graph", vec![], [1.6, 0.0], GridSpec::new(8, 10, 0.35), false, 1),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, name, p, o, spec, wraps, want) in cases {
        let s = catalog(name, &p)?;
        let d = killing_dimension(&s, o, spec, wraps, &tol, 1e-6)?;
        ok &= d.dim == want;
        parts.push(format!("{label} {}", d.dim));
    }
    Ok((ok, parts.join(", ")))
}

fn killing_residuals() -> Outcome {
    let tol = Tolerances::default();
    let mut sym: f64 = 0.0;
    let mut lemma: f64 = 0.0;
    for (name, o, tmax) in [("sphere", [0.0, 0.0], 1.0), ("plane", [0.0, 0.0], 1.0)] {
        let s = catalog(name, &[])?;
        let g = build_polar_grid(&s, o, GridSpec::new(16, 20, tmax), &tol)?;
        let ops = GridOps::new(&g);
        for ic in [
            KillingIC { w_o: [1.0, 0.0], a: 0.0 },
            KillingIC { w_o: [0.0, 1.0], a: 0.0 },
            KillingIC { w_o: [0.0, 0.0], a: 1.0 },
            KillingIC { w_o: [0.3, -0.7], a: 0.5 },
        ] {
            let w = killing_from_ic(&g, &ic);
            sym = sym.max(killing_residual(&ops, &w));
            lemma = lemma.max(gradient_residual(&g, &w));
        }
    }
    let s = catalog("log-revolution-graph", &[])?;
    let (g, w) = killing_candidate_nonconstant(&s, [2.2, 0.0], GridSpec::new(16, 40, 0.35), &tol, 1e-6)?;
    let rev = killing_residual(&GridOps::new(&g), &w);
    sym = sym.max(rev);
    lemma = lemma.max(gradient_residual(&g, &w));
    Ok((
        sym <= 1e-6 && lemma <= 1e-5,
        format!("max sym DW residual {sym:.2e} (revolution field {rev:.2e}), max |<grad κ, W>| {lemma:.2e}"),
    ))
}

fn q2_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mu = rng.random_range(0.1..3.0);
        let lambda = rng.random_range(-1.9 * mu..3.0);
        let m = ElasticModuli::new(mu, lambda)?;
        let g: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        worst = worst.max((q2_closed(&m, &g) - q2_oracle(&m, &g).0).abs());
    }
    let spot = q2_closed(&ElasticModuli::new(1.0, 1.0)?, &[1.0, 0.0, 1.0]);
    Ok((
        worst <= 1e-10 && (spot - 20.0 / 3.0).abs() <= 1e-12,
        format!("max |closed - oracle| over 100 samples {worst:.2e}, Q2(I) = {spot:.15}"),
    ))
}

fn ambient_field(g: &PolarGrid, f: &IsometryField) -> Vec<V3> {
    let mut v = vec![V3::zeros(); g.len()];
    for j in 0..g.n_theta {
        for k in 0..=g.nt {
            v[g.idx(j, k)] = f.ambient(g, j, k);
        }
    }
    v
}

/// Largest gap between Ξ and the one-sided linearization at ε and ε/2.
fn xi_gaps(g: &PolarGrid, ops: &GridOps, c: &GridCoeffs, field: &IsometryField) -> (f64, f64) {
    let xi = xi_tensor(ops, c, field);
    let v = ambient_field(g, field);
    let err = |eps: f64| {
        let fd = xi_fd_oracle(g, ops, &v, eps);
        let mut m: f64 = 0.0;
        for (a, b) in fd.iter().zip(&xi) {
            for j in 0..ops.n {
                for k in 1..=ops.nt {
                    m = m.max((a[ops.idx(j, k)] - b[ops.idx(j, k)]).abs());
                }
            }
        }
        m
    };
    (err(1e-3), err(5e-4))
}

fn xi_consistency() -> Outcome {
    let tol = Tolerances::default();
    // sphere: a cap isometry from the elliptic solve
    let g = sphere_cap_grid(1.0, PI / 4.0, 32, 32)?;
    let p = EllipticProblem::assemble(g, Discretization::Collocation, &tol)?;
    let psi: Vec<f64> = (0..32).map(|j| (2.0 * p.grid.theta(j)).cos()).collect();
    let w = dirichlet_solve(&p, &psi, 1e-8)?;
    let field = reconstruct_w(&p.grid, &p.ops, &p.coeffs, &w, [0.0, 0.0], 0.0);
    let (s1, s2) = xi_gaps(&p.grid, &p.ops, &p.coeffs, &field);
    // cylinder: the explicit isometry with normal part cos 2θ + z cos θ / 2
    let cyl = catalog("cylinder", &[1.0, 10.0])?;
    let g = build_polar_grid(&cyl, [0.0, 0.0], GridSpec::new(32, 32, 0.8), &tol)?;
    let ops = GridOps::new(&g);
    let c = GridCoeffs::new(&g);
    let (n0, n1) = (Trig::cosine(2, 1.0), Trig::cosine(1, 0.5));
    let (p0, p1) = potentials_from_normal(&n0, &n1);
    let mut cf = IsometryField {
        w: vec![0.0; g.len()],
        phi: vec![0.0; g.len()],
        psi: vec![0.0; g.len()],
        w_o: [0.0, 0.0],
        a: 0.0,
    };
    for j in 0..g.n_theta {
        for k in 0..=g.nt {
            let (i, nd) = (g.idx(j, k), g.node(j, k));
            let v = cylinder_explicit_v(&p0, &p1, nd.uv[0], nd.uv[1]);
            cf.w[i] = v.dot(&nd.normal);
            cf.phi[i] = v.dot(&nd.tangent);
            cf.psi[i] = v.dot(&nd.transverse);
        }
    }
    let (c1, c2) = xi_gaps(&g, &ops, &c, &cf);
    let (rs, rc) = (s1 / s2, c1 / c2);
    let ok = (1.7..=2.3).contains(&rs) && (1.7..=2.3).contains(&rc) && s1 <= 10.0 * 1e-3 && c1 <= 10.0 * 1e-3;
    Ok((
        ok,
        format!("sphere gap {s1:.2e} -> {s2:.2e} (ratio {rs:.3}), cylinder gap {c1:.2e} -> {c2:.2e} (ratio {rc:.3})"),
    ))
}

fn eigen_threshold() -> Outcome {
    let l_half = cap_eigen_lambda1(1.0, PI / 2.0, 2000)?;
    let l_quarter = cap_eigen_lambda1(1.0, PI / 4.0, 2000)?;
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for i in 1..=12 {
        let a = 0.25 * i as f64;
        let l = cap_eigen_lambda1(1.0, a, 400)?;
        monotone &= l <= prev;
        prev = l;
    }
    Ok((
        (l_half - 2.0).abs() <= 1e-4 && l_quarter > 2.5 && monotone,
        format!("λ1(π/2) = {l_half:.8}, λ1(π/4) = {l_quarter:.5}, nonincreasing on a = 0.25..3: {monotone}"),
    ))
}

fn cap_sigma(a: f64, n: usize) -> Result<(f64, f64)> {
    let p = EllipticProblem::assemble(sphere_cap_grid(1.0, a, n, n)?, Discretization::Collocation, &Tolerances::default())?;
    Ok((p.sigma_min, p.sigma_max))
}

fn uniqueness(unattainable: &mut Option<String>) -> Outcome {
    let p = EllipticProblem::assemble(sphere_cap_grid(1.0, PI / 4.0, 24, 24)?, Discretization::Collocation, &Tolerances::default())?;
    let w = dirichlet_solve(&p, &[0.0; 24], 1e-8)?;
    let zero = max_abs(w);
    let sig = |a: f64| -> Result<Vec<(f64, f64)>> { [16, 24].iter().map(|&n| cap_sigma(a, n)).collect() };
    let (s4, s2, s23) = (sig(PI / 4.0)?, sig(PI / 2.0)?, sig(2.0 * PI / 3.0)?);
    // a kernel shows as σmin collapsing under refinement; σmax grows like
    // n², so σmin/σmax falls below 1e-3 on every cap and detects nothing
    let kernel_at_half = s2[1].0 < 1e-8 && s2[1].0 < s2[0].0;
    let none_at = |s: &[(f64, f64)]| s.iter().all(|v| v.0 > 1e-2) && s[1].0 / s[0].0 > 0.5;
    let none_at_two_thirds = none_at(&s23) && none_at(&s4);
    if none_at_two_thirds {
        *unattainable = Some(format!(
            "no kernel at a = 2π/3: σmin = {:.3}, {:.3} at n = 16, 24 (π/4: {:.3}, {:.3}); the radial solution cos ρ vanishes on the rim only at a = π/2. σmin/σmax at 2π/3 is {:.1e} but equally small at π/4 ({:.1e})",
            s23[0].0,
            s23[1].0,
            s4[0].0,
            s4[1].0,
            s23[1].0 / s23[1].1,
            s4[1].0 / s4[1].1
        ));
    }
    Ok((
        zero <= 1e-8 && kernel_at_half && none_at_two_thirds,
        format!(
            "a = π/4 zero data gives max|w| = {zero:.1e}; σmin at a = π/2 collapses: {:.1e}, {:.1e} (n = 16, 24)",
            s2[0].0, s2[1].0
        ),
    ))
}

fn round_trip() -> Outcome {
    let p = EllipticProblem::assemble(sphere_cap_grid(1.0, PI / 4.0, 32, 32)?, Discretization::Collocation, &Tolerances::default())?;
    let (mut ch, mut iso) = (0.0_f64, 0.0_f64);
    for m in 1..=5 {
        let psi: Vec<f64> = (0..32).map(|j| (m as f64 * p.grid.theta(j)).cos()).collect();
        let w = dirichlet_solve(&p, &psi, 1e-8)?;
        ch = ch.max(characteristic_residual(&p.ops, &p.coeffs, &w));
        let f = reconstruct_w(&p.grid, &p.ops, &p.coeffs, &w, [0.0, 0.0], 0.0);
        iso = iso.max(isometry_residuals(&p.ops, &p.coeffs, &f).max());
    }
    Ok((
        ch <= 1e-3 && iso <= 1e-3,
        format!("modes 1..5: characteristic residual {ch:.2e}, isometry residual {iso:.2e}"),
    ))
}

fn sphere_energy() -> Outcome {
    let p = EllipticProblem::assemble(sphere_cap_grid(1.0, PI / 4.0, 32, 32)?, Discretization::Collocation, &Tolerances::default())?;
    let m = ElasticModuli::new(1.0, 0.5)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 1..=4 {
        let psi: Vec<f64> = (0..32).map(|j| (k as f64 * p.grid.theta(j)).cos()).collect();
        let e = sphere_cap_energy(&p, 1.0, &psi, &m, 1e-8)?;
        let gap = if k == 1 {
            // trace of a rigid motion: both sides vanish
            e.boundary.abs().max(e.interior.abs())
        } else {
            ((e.boundary - e.interior) / e.interior).abs()
        };
        ok &= gap <= 1e-4;
        parts.push(format!("m={k} {:.6e}/{:.6e} gap {gap:.1e}", e.boundary, e.interior));
    }
    Ok((ok, parts.join(", ")))
}

fn cylinder_energy() -> Outcome {
    let m = ElasticModuli::new(1.0, 1.0)?;
    let z = Trig::default();
    let spot = cylinder_energy_1d(&Trig::cosine(2, 1.0), &z, 1.0, &m);
    let zeros = [
        cylinder_energy_1d(&Trig::cosine(1, 1.0), &z, 1.0, &m),
        cylinder_energy_1d(&Trig::sine(1, 1.0), &z, 1.0, &m),
        cylinder_energy_1d(&z, &Trig::cosine(1, 1.0), 1.0, &m),
    ];
    let m2 = ElasticModuli::new(0.7, 0.3)?;
    let mut worst: f64 = 0.0;
    for k in 0..=5 {
        for (n0, n1) in [
            (Trig::cosine(k, 1.0), z.clone()),
            (Trig::sine(k, 1.0), z.clone()),
            (z.clone(), Trig::cosine(k, 1.0)),
            (z.clone(), Trig::sine(k, 1.0)),
        ] {
            let a = cylinder_energy_1d(&n0, &n1, 1.3, &m2);
            let b = cylinder_energy_2d(&n0, &n1, 1.3, &m2);
            worst = worst.max((a - b).abs() / a.abs().max(1e-300).max(b.abs()).max(1e-12));
        }
    }
    let zmax = max_abs(zeros);
    Ok((
        (spot - 2.0 * PI).abs() <= 1e-6 && zmax == 0.0 && worst <= 1e-5,
        format!("spot {spot:.12} (2π), rigid modes max {zmax:.1e}, 1D vs 2D relative gap {worst:.1e}"),
    ))
}

fn parabolic_structure() -> Outcome {
    let tol = Tolerances::default();
    let s: Vec<f64> = (0..9).map(|i| -0.3 + 0.075 * i as f64).collect();
    let t: Vec<f64> = (0..9).map(|k| -0.4 + 0.1 * k as f64).collect();
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, params, o) in [("cylinder", vec![1.0, 10.0], [0.0, 0.0]), ("cone", vec![0.7, 0.05, 50.0], [0.0, 2.0])] {
        let surf = catalog(name, &params)?;
        let g = build_polar_grid(&surf, o, GridSpec::new(32, 32, 0.7), &tol)?;
        let (ops, w) = solve_on_polar_grid(&g, |x| x.z.exp() * (2.0 * x.x).cos() + x.y)?;
        let ch = detect_ruling(&surf, o, (-0.35, 0.35), 0.01)?;
        let f = sample_on_chart(&ch, &g, &ops, &w, &s, &t)?;
        let r = verify_linear_in_t(&f);
        ok &= r <= 1e-3;
        parts.push(format!("{name} {r:.2e}"));
    }
    // the intrinsic formula itself is exactly linear
    let lin = verify_linear_in_t(&parabolic_isometry(&s, &t, |x| x.sin(), |x| x * x));
    ok &= lin <= 1e-12;
    Ok((ok, format!("max |∂²w/∂t²|: {}", parts.join(", "))))
}

fn const_coeff_error(ns: usize) -> Result<f64> {
    let (a0, k) = (1.5, 3.0);
    let c = HyperbolicChart::synthetic(|_, _| a0, |_, _| 0.0, 1.0, ns, Angles::Periodic(32))?;
    let d = CauchyData::new(&c, |t| (k * t).cos(), |_| 0.0)?;
    let e = evolve_cauchy(&c, &d, Lower::Suppressed, &EvolveOptions::default())?;
    let exact = c.sample(|s, t| (k * t).cos() * (a0.sqrt() * k * s).cos());
    Ok(max_abs(e.w.iter().zip(&exact).map(|(a, b)| a - b)))
}

fn hyperbolic() -> Outcome {
    let (e1, e2) = (const_coeff_error(200)?, const_coeff_error(400)?);
    let order = (e1 / e2).log2();
    let s = catalog("hyperboloid", &[])?;
    let c = HyperbolicChart::check_assumptions(&s, 1.2, 1.0, 100, Angles::Periodic(32))?;
    let d = CauchyData::new(&c, |t| (3.0 * t).cos() + 0.5 * t.sin(), |t| (2.0 * t).sin())?;
    let e = evolve_cauchy(&c, &d, Lower::Local, &EvolveOptions::default())?;
    let g = growth_fit(&e);
    let bounded = g.omega.is_finite() && g.c.is_finite() && g.c < 10.0;
    Ok((
        e2 <= 1e-4 && (order - 2.0).abs() <= 0.15 && bounded,
        format!(
            "oracle error {e2:.2e}, order {order:.3}, hyperboloid growth ω = {:.3} (halves {:.3}, {:.3}), C = {:.3}",
            g.omega, g.omega_first, g.omega_second, g.c
        ),
    ))
}

fn graph_route() -> Outcome {
    let p = catalog("paraboloid", &[])?;
    let d = PlanarGrid::disk([0.0, 0.0], 0.8, 25)?;
    let u = graph_solve_u(&p, &d, |_| 0.0)?;
    let rec = graph_reconstruct_field(&p, &u, [0.0, 0.0], GraphGauge::default())?;
    let umax = u.max_abs();
    let wmax = max_abs(rec.iter().flatten().map(|r| r.w));
    let field = |x: [f64; 2]| (x[0] * x[0] * x[1] + x[0].cos(), [2.0 * x[0] * x[1] - x[0].sin(), x[0] * x[0]]);
    let mut gap: f64 = 0.0;
    for &(th, rho) in &[(0.3, 0.7), (2.0, 1.1), (4.0, 0.4), (5.5, 0.9)] {
        let x = [rho * f64::cos(th), rho * f64::sin(th)];
        let r = graph_reconstruct(&p, field, [0.0, 0.0], GraphGauge::default(), &[x], 30)?;
        let w = radial_normal_component(&p, th, rho, |r| field([r * f64::cos(th), r * f64::sin(th)]).0, 30)?;
        gap = gap.max((r[0].w - w).abs());
    }
    Ok((
        umax <= 1e-6 && wmax <= 1e-6 && gap <= 1e-5,
        format!("zero data: max|u| = {umax:.1e}, max|w| = {wmax:.1e}; radial vs general formula {gap:.2e}"),
    ))
}
