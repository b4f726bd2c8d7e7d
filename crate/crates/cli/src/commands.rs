//! One function per leaf subcommand. Each reads its settings from the
//! [`Config`], runs the core routine and returns a [`Report`]; writing files
//! and choosing the exit code is left to `main`.

use std::f64::consts::PI;

use isoshell::bending::{cylinder_energy_1d, cylinder_energy_2d, q2_closed, q2_oracle, sphere_cap_energy, ElasticModuli};
use isoshell::elliptic::{cap_eigen_lambda1, dirichlet_solve, sphere_cap_grid, Discretization, EllipticProblem};
use isoshell::expr::Expr;
use isoshell::geodesic::{build_polar_grid, GridSpec, PolarGrid};
use isoshell::grid::GridOps;
use isoshell::hyperbolic::{
    evolve_cauchy, evolve_with_sides, growth_fit, pde_residual, Angles, CauchyData, EvolveOptions, HyperbolicChart, Lower, Nonlocal,
};
use isoshell::isometry::graph::{graph_isometry_residual, graph_reconstruct_field, graph_solve_u, GraphGauge, PlanarGrid};
use isoshell::isometry::{
    characteristic_residual, isometry_residuals, reconstruct_w, translation_normal, translation_origin, GridCoeffs,
};
use isoshell::killing::{killing_candidate_nonconstant, killing_dimension, killing_from_ic, killing_residual, KillingIC};
use isoshell::numerics::Tolerances;
use isoshell::parabolic::{
    detect_ruling, parabolic_isometry, sample_on_chart, solve_on_polar_grid, verify_linear_in_t, ChartField, ParabolicChart, Trig,
};
use isoshell::selftest;
use isoshell::surface::{catalog, Domain, Surface, V3};
use isoshell::Error;

use crate::config::{fmt17, Config, Result};
use crate::output::Table;

/// A pass/fail threshold on one residual.
#[derive(Debug, Clone)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub limit: f64,
}

impl Gate {
    pub fn passed(&self) -> bool {
        self.value <= self.limit
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub table: Option<Table>,
    pub results: Vec<(String, String)>,
    pub gates: Vec<Gate>,
    /// For commands whose success is not a residual (selftest).
    pub failed: bool,
}

impl Report {
    fn num(&mut self, key: &str, v: f64) {
        self.results.push((key.into(), fmt17(v)));
    }

    fn text(&mut self, key: &str, v: impl ToString) {
        self.results.push((key.into(), v.to_string()));
    }

    fn gate(&mut self, cfg: &Config, name: &str, value: f64, default: f64) -> Result<()> {
        let limit = cfg.f64(&format!("gate_{name}"), default)?;
        self.gates.push(Gate {
            name: name.into(),
            value,
            limit,
        });
        Ok(())
    }
}

fn tolerances(cfg: &Config) -> Result<Tolerances> {
    let d = Tolerances::default();
    let t = Tolerances {
        ode_step: cfg.f64("ode_step", d.ode_step)?,
        quad_points: cfg.usize("quad_points", d.quad_points)?,
        lin_tol: cfg.f64("lin_tol", d.lin_tol)?,
        eig_tol: cfg.f64("eig_tol", d.eig_tol)?,
    };
    t.validate()?;
    Ok(t)
}

fn moduli(cfg: &Config, lambda: f64) -> Result<ElasticModuli> {
    ElasticModuli::new(cfg.f64("mu", 1.0)?, cfg.f64("lambda", lambda)?)
}

// ---------------------------------------------------------------- surfaces

/// `name`, `graph:<h(x,y)>` or `radial:<H(q)>`, q = x² + y².
pub fn parse_surface(spec: &str, params: &[f64]) -> Result<Surface> {
    if let Some(e) = spec.strip_prefix("graph:") {
        Surface::graph(e, Domain::Whole)
    } else if let Some(e) = spec.strip_prefix("radial:") {
        Surface::radial_graph(e, Domain::Whole)
    } else {
        catalog(spec, params)
    }
}

fn default_origin(name: &str) -> [f64; 2] {
    match name {
        "cone" => [0.0, 2.0],
        "perturbed" => [0.1, -0.2],
        "hyperboloid" | "log-revolution" | "log-revolution-graph" => [1.6, 0.0],
        _ => [0.0, 0.0],
    }
}

fn surface(cfg: &Config, default: &str) -> Result<(Surface, [f64; 2])> {
    let spec = cfg.str("surface", default);
    let params = cfg.list("params", &[])?;
    let s = parse_surface(&spec, &params)?;
    let o = cfg.fixed("o", default_origin(&spec))?;
    if !s.contains(o[0], o[1]) {
        return Err(Error::OutsideDomain { u: o[0], v: o[1] });
    }
    Ok((s, o))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Elliptic,
    Parabolic,
    Hyperbolic,
    Planar,
    Mixed,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Elliptic => "elliptic",
            Regime::Parabolic => "parabolic",
            Regime::Hyperbolic => "hyperbolic",
            Regime::Planar => "planar",
            Regime::Mixed => "mixed",
        }
    }
}

/// Shape data on an n × n square of chart points about o.
struct Sampled {
    regime: Regime,
    kappa: (f64, f64),
    rows: Vec<[f64; 6]>,
}

fn sample_shape(s: &Surface, o: [f64; 2], radius: f64, n: usize) -> Result<Sampled> {
    let n = n.max(1);
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let f = |k: usize| if n == 1 { 0.0 } else { -1.0 + 2.0 * k as f64 / (n - 1) as f64 };
            let (u, v) = (o[0] + radius * f(i), o[1] + radius * f(j));
            if !s.contains(u, v) {
                continue;
            }
            let d = s.shape_at(u, v)?;
            rows.push([u, v, d.kappa, d.pi[(0, 0)], d.pi[(0, 1)], d.pi[(1, 1)]]);
        }
    }
    if rows.is_empty() {
        return Err(Error::OutsideDomain { u: o[0], v: o[1] });
    }
    let pmax = rows.iter().map(|r| r[3].abs().max(r[4].abs()).max(r[5].abs())).fold(0.0, f64::max);
    let kmin = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    let kmax = rows.iter().map(|r| r[2]).fold(f64::NEG_INFINITY, f64::max);
    let zero = 1e-8 * pmax.max(1e-300) * pmax.max(1e-300);
    let regime = if pmax < 1e-12 {
        Regime::Planar
    } else if kmin > zero {
        Regime::Elliptic
    } else if kmax < -zero {
        Regime::Hyperbolic
    } else if kmin.abs() <= zero && kmax.abs() <= zero {
        Regime::Parabolic
    } else {
        Regime::Mixed
    };
    Ok(Sampled {
        regime,
        kappa: (kmin, kmax),
        rows,
    })
}

/// Classify the surface near o and compare with `regime=` and with what the
/// command needs.
fn regime(cfg: &Config, r: &mut Report, s: &Surface, o: [f64; 2], need: Option<Regime>) -> Result<Regime> {
    let radius = cfg.f64("radius", 0.2)?;
    let got = sample_shape(s, o, radius, 5)?.regime;
    r.text("regime", got.name());
    if let Some(want) = cfg.opt_str("regime") {
        if want != got.name() {
            return Err(Error::Regime(format!("expected {want}, surface is {} near the origin", got.name())));
        }
    }
    if let Some(need) = need {
        if got == Regime::Planar && need == Regime::Parabolic {
            return Err(Error::Planar);
        }
        if got != need {
            return Err(Error::Regime(format!("command needs the {} regime, the surface is {}", need.name(), got.name())));
        }
    }
    Ok(got)
}

fn grid(cfg: &Config, s: &Surface, o: [f64; 2], n: usize, nt: usize, t_max: f64) -> Result<PolarGrid> {
    let spec = GridSpec::new(cfg.usize("n_theta", n)?, cfg.usize("n_t", nt)?, cfg.f64("t_max", t_max)?);
    build_polar_grid(s, o, spec, &tolerances(cfg)?)
}

fn polar_table(g: &PolarGrid, extra: &[&'static str], mut f: impl FnMut(usize, usize) -> Vec<f64>) -> Table {
    let mut header = vec!["theta", "t", "x", "y", "z"];
    header.extend_from_slice(extra);
    let mut t = Table::new(&header);
    for j in 0..g.n_theta {
        for k in 0..=g.nt {
            let p = g.node(j, k).position;
            let mut row = vec![g.theta(j), g.t(k), p.x, p.y, p.z];
            row.extend(f(j, k));
            t.push(row);
        }
    }
    t
}

// ---------------------------------------------------------------- commands

pub fn surface_info(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let (s, o) = surface(cfg, "sphere")?;
    let sm = sample_shape(&s, o, cfg.f64("radius", 0.2)?, cfg.usize("n", 5)?)?;
    if let Some(want) = cfg.opt_str("regime") {
        if want != sm.regime.name() {
            return Err(Error::Regime(format!("expected {want}, surface is {}", sm.regime.name())));
        }
    }
    r.text("regime", sm.regime.name());
    r.num("kappa_min", sm.kappa.0);
    r.num("kappa_max", sm.kappa.1);
    let mut t = Table::new(&["u", "v", "kappa", "pi11", "pi12", "pi22"]);
    t.meta("surface", &s.name);
    for row in sm.rows {
        t.push(row.to_vec());
    }
    r.table = Some(t);
    Ok(r)
}

pub fn killing_dim(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let (s, o) = surface(cfg, "sphere")?;
    let spec = GridSpec::new(cfg.usize("n_theta", 8)?, cfg.usize("n_t", 10)?, cfg.f64("t_max", 0.6)?);
    let d = killing_dimension(&s, o, spec, cfg.bool("wraps", false)?, &tolerances(cfg)?, cfg.f64("threshold", 1e-6)?)?;
    r.text("dimension", d.dim);
    let mut t = Table::new(&["index", "singular_value"]);
    for (i, v) in d.singular_values.iter().enumerate() {
        t.push(vec![i as f64, *v]);
    }
    r.table = Some(t);
    Ok(r)
}

pub fn killing_field(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let mode = cfg.str("mode", "ic");
    let (g, field) = match mode.as_str() {
        "ic" => {
            let (s, o) = surface(cfg, "sphere")?;
            let g = grid(cfg, &s, o, 16, 20, 0.5)?;
            let ic = KillingIC {
                w_o: cfg.fixed("w_o", [1.0, 0.0])?,
                a: cfg.f64("a", 0.0)?,
            };
            let f = killing_from_ic(&g, &ic);
            (g, f)
        }
        "candidate" => {
            let (s, o) = surface(cfg, "log-revolution-graph")?;
            let o = if cfg.has("o") { o } else { [2.2, 0.0] };
            let spec = GridSpec::new(cfg.usize("n_theta", 16)?, cfg.usize("n_t", 40)?, cfg.f64("t_max", 0.35)?);
            killing_candidate_nonconstant(&s, o, spec, &tolerances(cfg)?, cfg.f64("obstruction_tol", 1e-6)?)?
        }
        other => return Err(Error::InvalidParams(format!("mode `{other}`: expected ic or candidate"))),
    };
    let res = killing_residual(&GridOps::new(&g), &field);
    r.num("killing_residual", res);
    r.gate(cfg, "killing", res, 1e-6)?;
    r.table = Some(polar_table(&g, &["vx", "vy", "vz"], |j, k| {
        let v = field.ambient(&g, j, k);
        vec![v.x, v.y, v.z]
    }));
    Ok(r)
}

pub fn isometry_check(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let (s, o) = surface(cfg, "sphere")?;
    regime(cfg, &mut r, &s, o, None)?;
    let g = grid(cfg, &s, o, 16, 20, 0.5)?;
    let ops = GridOps::new(&g);
    let c = GridCoeffs::new(&g);
    let (w, w_o, a) = if let Some(src) = cfg.opt_str("w") {
        let e = Expr::parse(&src, &["x", "y", "z"]).map_err(|e| Error::Parse(format!("w: {e}")))?;
        let w = g.sample(|n| e.eval(&[n.position.x, n.position.y, n.position.z]));
        (w, cfg.fixed("w_o", [0.0, 0.0])?, cfg.f64("a", 0.0)?)
    } else {
        // translation along the normal at o unless given
        let n0 = g.node(0, 0).normal;
        let t = cfg.fixed("translation", [n0.x, n0.y, n0.z])?;
        let t = V3::new(t[0], t[1], t[2]);
        (translation_normal(&g, &t), translation_origin(&g, &t), 0.0)
    };
    let ch = characteristic_residual(&ops, &c, &w);
    let field = reconstruct_w(&g, &ops, &c, &w, w_o, a);
    let iso = isometry_residuals(&ops, &c, &field);
    r.num("characteristic_residual", ch);
    r.num("isometry_residual_tt", iso.tt);
    r.num("isometry_residual_te", iso.te);
    r.num("isometry_residual_ee", iso.ee);
    r.gate(cfg, "isometry", iso.max(), 1e-4)?;
    r.table = Some(polar_table(&g, &["w", "vx", "vy", "vz"], |j, k| {
        let v = field.ambient(&g, j, k);
        vec![w[g.idx(j, k)], v.x, v.y, v.z]
    }));
    Ok(r)
}

pub fn isometry_solve(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let (s, o) = surface(cfg, "paraboloid")?;
    regime(cfg, &mut r, &s, o, Some(Regime::Elliptic))?;
    let rect = cfg.fixed("rect", [-0.8, 0.8, -0.8, 0.8])?;
    let pg = PlanarGrid::rect(rect[0], rect[1], rect[2], rect[3], cfg.usize("nx", 33)?, cfg.usize("ny", 33)?)?;
    let psi = cfg.expr("psi", "x*y", &["x", "y"])?;
    let u = graph_solve_u(&s, &pg, |x| psi.eval(&[x[0], x[1]]))?;
    let gauge = GraphGauge {
        v_o: cfg.fixed("v_o", [0.0, 0.0])?,
        omega_o: cfg.f64("omega_o", 0.0)?,
    };
    let rec = graph_reconstruct_field(&s, &u, o, gauge)?;
    let res = graph_isometry_residual(&s, &pg, &rec, |x| u.eval(x), cfg.usize("margin", 4)?);
    r.num("isometry_residual", res);
    r.gate(cfg, "isometry", res, 1e-3)?;
    let mut t = Table::new(&["x", "y", "u", "v1", "v2", "w"]);
    for g in rec.iter().flatten() {
        t.push(vec![g.x[0], g.x[1], g.u, g.v[0], g.v[1], g.w]);
    }
    r.table = Some(t);
    Ok(r)
}

fn discretization(cfg: &Config) -> Result<Discretization> {
    match cfg.str("discretization", "collocation").as_str() {
        "collocation" => Ok(Discretization::Collocation),
        "flux" => Ok(Discretization::FluxForm),
        o => Err(Error::InvalidParams(format!("discretization `{o}`: expected collocation or flux"))),
    }
}

pub fn elliptic_solve(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let (s, o) = surface(cfg, "sphere")?;
    regime(cfg, &mut r, &s, o, Some(Regime::Elliptic))?;
    let g = grid(cfg, &s, o, 32, 32, PI / 4.0)?;
    let p = EllipticProblem::assemble(g, discretization(cfg)?, &tolerances(cfg)?)?;
    let psi_e = cfg.expr("psi", "cos2θ", &["θ", "theta"])?;
    let psi: Vec<f64> = (0..p.grid.n_theta).map(|j| psi_e.eval(&[p.grid.theta(j); 2])).collect();
    let w = dirichlet_solve(&p, &psi, cfg.f64("kernel_tol", 1e-8)?)?;
    let ch = characteristic_residual(&p.ops, &p.coeffs, &w);
    let field = reconstruct_w(&p.grid, &p.ops, &p.coeffs, &w, [0.0, 0.0], 0.0);
    let iso = isometry_residuals(&p.ops, &p.coeffs, &field).max();
    r.num("sigma_min", p.sigma_min);
    r.num("sigma_max", p.sigma_max);
    r.num("characteristic_residual", ch);
    r.num("isometry_residual", iso);
    r.gate(cfg, "isometry", iso, 1e-3)?;
    let g = &p.grid;
    r.table = Some(polar_table(g, &["w", "vx", "vy", "vz"], |j, k| {
        let v = field.ambient(g, j, k);
        vec![w[g.idx(j, k)], v.x, v.y, v.z]
    }));
    Ok(r)
}

pub fn elliptic_eigen(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let kappa = cfg.f64("kappa", 1.0)?;
    let radii = cfg.list("a", &[PI / 4.0, PI / 2.0, 2.0 * PI / 3.0])?;
    let n = cfg.usize("n", 400)?;
    let mut t = Table::new(&["a", "lambda1", "threshold", "unique"]);
    for a in radii {
        let l = cap_eigen_lambda1(kappa, a, n)?;
        t.push(vec![a, l, 2.0 * kappa, if l > 2.0 * kappa { 1.0 } else { 0.0 }]);
    }
    r.text("rows", t.rows.len());
    r.table = Some(t);
    Ok(r)
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn chart_table(ch: &ParabolicChart, f: &ChartField) -> Table {
    let mut t = Table::new(&["s", "t", "x", "y", "z", "w"]);
    for (i, &s) in f.s.iter().enumerate() {
        for (k, &tk) in f.t.iter().enumerate() {
            let p = ch.point(s, tk);
            t.push(vec![s, tk, p.x, p.y, p.z, f.at(i, k)]);
        }
    }
    t
}

pub fn parabolic_isometry_cmd(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let (s, o) = surface(cfg, "cylinder")?;
    regime(cfg, &mut r, &s, o, Some(Regime::Parabolic))?;
    let sr = cfg.fixed("s_range", [-0.3, 0.3])?;
    let tr = cfg.fixed("t_range", [-0.4, 0.4])?;
    let ss = uniform(sr[0], sr[1], cfg.usize("ns", 9)?);
    let ts = uniform(tr[0], tr[1], cfg.usize("nt", 9)?);
    let margin = 0.05;
    let ch = detect_ruling(&s, o, (sr[0].min(0.0) - margin, sr[1].max(0.0) + margin), cfg.f64("h", 0.01)?)?;
    let f = match cfg.str("mode", "formula").as_str() {
        "formula" => {
            let w0 = cfg.expr("w0", "sin(s)", &["s"])?;
            let w1 = cfg.expr("w1", "s^2", &["s"])?;
            parabolic_isometry(&ss, &ts, |x| w0.eval(&[x]), |x| w1.eval(&[x]))
        }
        "solve" => {
            let psi = cfg.expr("psi", "exp(z)cos(2x) + y", &["x", "y", "z"])?;
            let g = grid(cfg, &s, o, 32, 32, 0.7)?;
            let (ops, w) = solve_on_polar_grid(&g, |x| psi.eval(&[x.x, x.y, x.z]))?;
            sample_on_chart(&ch, &g, &ops, &w, &ss, &ts)?
        }
        other => return Err(Error::InvalidParams(format!("mode `{other}`: expected formula or solve"))),
    };
    let lin = verify_linear_in_t(&f);
    r.num("max_w_tt", lin);
    r.gate(cfg, "linearity", lin, 1e-3)?;
    r.table = Some(chart_table(&ch, &f));
    Ok(r)
}

pub fn hyperbolic_evolve(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let spec = cfg.str("surface", "hyperboloid");
    let s = parse_surface(&spec, &cfg.list("params", &[])?)?;
    let u0 = cfg.f64("u0", 1.2)?;
    let b = cfg.f64("b", 1.0)?;
    let n = cfg.usize("n", 32)?;
    regime(cfg, &mut r, &s, [u0 + 0.5 * b, 0.0], Some(Regime::Hyperbolic))?;
    let angles = match cfg.opt_str("sector") {
        None => Angles::Periodic(n),
        Some(_) => {
            let sec = cfg.fixed("sector", [0.0, 1.0])?;
            Angles::Sector {
                start: sec[0],
                width: sec[1],
                n,
            }
        }
    };
    let opts = EvolveOptions {
        cfl: cfg.f64("cfl", 0.5)?,
        ..EvolveOptions::default()
    };
    let ns = match cfg.parse::<usize>("ns", 0, "a step count")? {
        0 => {
            let probe = HyperbolicChart::check_assumptions(&s, u0, b, 16, angles)?;
            (b / (0.9 * probe.max_step(opts.cfl))).ceil().max(4.0) as usize
        }
        ns => ns,
    };
    let chart = HyperbolicChart::check_assumptions(&s, u0, b, ns, angles)?;
    let w0 = cfg.expr("w0", "cos3θ", &["θ", "theta"])?;
    let w1 = cfg.expr("w1", "sin2θ", &["θ", "theta"])?;
    let data = CauchyData::new(&chart, |t| w0.eval(&[t, t]), |t| w1.eval(&[t, t]))?;
    let lower_name = cfg.str("lower", "local");
    let nonlocal = if lower_name == "full" {
        let o = cfg.fixed("origin", [0.5 * b, chart.theta0 + 0.5 * chart.dth * (chart.m - 1) as f64])?;
        Some(Nonlocal::new(&chart, o, cfg.usize("ray_steps", 24)?, &tolerances(cfg)?)?)
    } else {
        None
    };
    let lower = match (lower_name.as_str(), &nonlocal) {
        ("local", _) => Lower::Local,
        ("suppressed", _) => Lower::Suppressed,
        ("full", Some(nl)) => Lower::Full(nl),
        (o, _) => return Err(Error::InvalidParams(format!("lower `{o}`: expected local, suppressed or full"))),
    };
    let evo = if chart.periodic {
        evolve_cauchy(&chart, &data, lower, &opts)?
    } else {
        // sides default to the linear extension of the Cauchy data
        let side = |key: &str, j: usize| -> Result<Expr> {
            let default = format!("{} + {}*s", fmt17(data.w0[j]), fmt17(data.w1[j]));
            cfg.expr(key, &default, &["s"])
        };
        let (h1, h2) = (side("h1", 0)?, side("h2", chart.m - 1)?);
        evolve_with_sides(&chart, &data, |x| h1.eval(&[x]), |x| h2.eval(&[x]), lower, &opts)?
    };
    let fit = growth_fit(&evo);
    let res = pde_residual(&chart, &evo, lower);
    r.text("steps", ns);
    r.num("step", chart.h);
    r.num("omega", fit.omega);
    r.num("omega_first_half", fit.omega_first);
    r.num("omega_second_half", fit.omega_second);
    r.num("growth_constant", fit.c);
    r.text("picard_iterations", evo.picard_iterations);
    r.num("pde_residual", res);
    // the residual is O(h²) truncation error, so the default gate only
    // catches an unstable or inconsistent run
    let scale = evo.w.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    r.gate(cfg, "pde", res / scale, 5e-2)?;
    let mut t = Table::new(&["s", "theta", "w"]);
    t.meta("surface", &s.name);
    for i in 0..=evo.ns {
        for j in 0..evo.m {
            t.push(vec![chart.s(i), chart.theta(j), evo.at(i, j)]);
        }
    }
    r.table = Some(t);
    Ok(r)
}

pub fn energy_sphere(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let kappa = cfg.f64("kappa", 1.0)?;
    let a = cfg.f64("a", PI / 4.0)?;
    let n = cfg.usize("n", 32)?;
    let m = moduli(cfg, 0.5)?;
    let p = EllipticProblem::assemble(sphere_cap_grid(kappa, a, n, n)?, discretization(cfg)?, &tolerances(cfg)?)?;
    let psi_e = cfg.expr("psi", "cos2θ", &["θ", "theta"])?;
    let psi: Vec<f64> = (0..n).map(|j| psi_e.eval(&[p.grid.theta(j); 2])).collect();
    let e = sphere_cap_energy(&p, kappa, &psi, &m, cfg.f64("kernel_tol", 1e-8)?)?;
    r.num("energy_boundary", e.boundary);
    r.num("energy_interior", e.interior);
    r.num("trace_residual", e.trace_residual);
    let size = e.boundary.abs().max(e.interior.abs());
    // both sides vanish on traces of rigid motions; compare absolutely there
    let gap = if size < 1e-8 { size } else { (e.boundary - e.interior).abs() / size };
    r.num("relative_gap", gap);
    r.gate(cfg, "energy", gap, 1e-4)?;
    let mut t = Table::new(&["theta", "psi"]);
    for (j, v) in psi.iter().enumerate() {
        t.push(vec![p.grid.theta(j), *v]);
    }
    r.table = Some(t);
    Ok(r)
}

/// Fourier projection of a 2π-periodic expression; fails unless it is a
/// trigonometric polynomial of degree at most `kmax`.
pub fn project_trig(src: &str, kmax: usize) -> Result<Trig> {
    let e = Expr::parse(src, &["θ", "theta"]).map_err(|e| Error::Parse(format!("`{src}`: {e}")))?;
    let n = 4 * kmax + 8;
    let th: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
    let f: Vec<f64> = th.iter().map(|&t| e.eval(&[t, t])).collect();
    let mean = f.iter().sum::<f64>() / n as f64;
    let mut out = Trig {
        poly: vec![mean],
        cos: Vec::new(),
        sin: Vec::new(),
    };
    for k in 1..=kmax {
        let c = 2.0 / n as f64 * th.iter().zip(&f).map(|(t, v)| v * (k as f64 * t).cos()).sum::<f64>();
        let s = 2.0 / n as f64 * th.iter().zip(&f).map(|(t, v)| v * (k as f64 * t).sin()).sum::<f64>();
        out.cos.push(c);
        out.sin.push(s);
    }
    let clean = |v: &mut Vec<f64>| {
        for x in v.iter_mut() {
            if x.abs() < 1e-13 {
                *x = 0.0;
            }
        }
        while v.last() == Some(&0.0) {
            v.pop();
        }
    };
    clean(&mut out.cos);
    clean(&mut out.sin);
    if out.poly[0].abs() < 1e-13 {
        out.poly[0] = 0.0;
    }
    let scale = f.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    for j in 0..3 * n {
        let t = 2.0 * PI * (j as f64 + 0.37) / (3 * n) as f64;
        if (out.eval(t) - e.eval(&[t, t])).abs() > 1e-9 * scale {
            return Err(Error::InvalidParams(format!(
                "`{src}` is not a 2π-periodic trigonometric polynomial of degree ≤ {kmax}"
            )));
        }
    }
    Ok(out)
}

pub fn energy_cylinder(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let a = cfg.f64("a", 1.0)?;
    let m = moduli(cfg, 1.0)?;
    let kmax = cfg.usize("kmax", 16)?;
    let w0 = project_trig(&cfg.str("w0", "cos2θ"), kmax)?;
    let w1 = project_trig(&cfg.str("w1", "0"), kmax)?;
    let e1 = cylinder_energy_1d(&w0, &w1, a, &m);
    r.num("energy_1d", e1);
    if cfg.bool("check_2d", true)? {
        let e2 = cylinder_energy_2d(&w0, &w1, a, &m);
        r.num("energy_2d", e2);
        let gap = if e1.abs().max(e2.abs()) < 1e-12 {
            0.0
        } else {
            (e1 - e2).abs() / e1.abs().max(e2.abs())
        };
        r.num("relative_gap", gap);
        r.gate(cfg, "energy", gap, 1e-5)?;
    }
    let mut t = Table::new(&["theta", "w0", "w1"]);
    for j in 0..64 {
        let th = 2.0 * PI * j as f64 / 64.0;
        t.push(vec![th, w0.eval(th), w1.eval(th)]);
    }
    r.table = Some(t);
    Ok(r)
}

pub fn energy_quad(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let m = moduli(cfg, 1.0)?;
    let g = cfg.fixed("g", [1.0, 0.0, 1.0])?;
    let closed = q2_closed(&m, &g);
    let (oracle, arg) = q2_oracle(&m, &g);
    r.num("q2_closed", closed);
    r.num("q2_oracle", oracle);
    r.text("minimizer", arg.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(","));
    let gap = (closed - oracle).abs() / closed.abs().max(oracle.abs()).max(1e-300);
    r.num("relative_gap", gap);
    r.gate(cfg, "q2", gap, 1e-8)?;
    Ok(r)
}

/// Run built-in checks; prints one line per check.
pub fn selftest_cmd(ids: &[usize]) -> Result<Report> {
    let ids: Vec<usize> = if ids.is_empty() { (1..=selftest::COUNT).collect() } else { ids.to_vec() };
    if let Some(bad) = ids.iter().find(|i| !(1..=selftest::COUNT).contains(*i)) {
        return Err(Error::InvalidParams(format!("no check {bad}; valid ids are 1..={}", selftest::COUNT)));
    }
    let mut r = Report::default();
    for id in ids {
        let c = selftest::run(id);
        crate::say(&c.line());
        r.failed |= !c.ok();
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_of_catalog_surfaces() {
        for (name, want) in [
            ("sphere", Regime::Elliptic),
            ("cylinder", Regime::Parabolic),
            ("cone", Regime::Parabolic),
            ("plane", Regime::Planar),
            ("hyperboloid", Regime::Hyperbolic),
        ] {
            let s = parse_surface(name, &[]).unwrap();
            assert_eq!(sample_shape(&s, default_origin(name), 0.2, 5).unwrap().regime, want, "{name}");
        }
        let saddle = parse_surface("graph:x*y", &[]).unwrap();
        assert_eq!(sample_shape(&saddle, [0.0, 0.0], 0.2, 5).unwrap().regime, Regime::Hyperbolic);
        // κ changes sign across the line x = 0
        let cubic = parse_surface("graph:x^3 + y^2", &[]).unwrap();
        assert_eq!(sample_shape(&cubic, [0.0, 0.0], 0.2, 5).unwrap().regime, Regime::Mixed);
    }

    #[test]
    fn trig_projection() {
        let t = project_trig("1 + cos2θ - 0.5sin(3θ)", 8).unwrap();
        assert!((t.poly[0] - 1.0).abs() < 1e-14);
        assert!((t.cos[1] - 1.0).abs() < 1e-14 && t.cos[0] == 0.0);
        assert!((t.sin[2] + 0.5).abs() < 1e-14);
        assert_eq!(t.cos.len(), 2);
        assert!(project_trig("θ", 8).is_err());
        assert!(project_trig("cos(20θ)", 8).is_err());
        assert!(project_trig("cos(", 8).is_err());
    }
}
