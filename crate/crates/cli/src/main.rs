//! `isoshell`: infinitesimal isometries and bending energies of surfaces
//! from the command line.
//!
//! Every leaf command takes `key=value` settings, which override the file
//! given by `--config`. Results go to `<out>/<name>.csv` and
//! `<out>/<name>.manifest`. Exit codes: 0 success, 1 error, 2 wrong regime,
//! 3 a residual gate failed.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isoshell::Error;

use commands::Report;
use config::{Config, Result};
use output::{error_record, Manifest, Sink};

#[derive(Parser, Debug)]
#[command(name = "isoshell", version, about = "Infinitesimal isometries and limit bending energies of surfaces")]
struct Cli {
    /// File of key=value settings; command-line settings take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory [default: $ISOSHELL_OUT or .]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    group: Group,
}

#[derive(Args, Debug, Clone)]
struct Leaf {
    /// Catalog name, `graph:<h(x,y)>` or `radial:<H(q)>`.
    #[arg(long)]
    surface: Option<String>,
    /// Comma-separated catalog parameters.
    #[arg(long)]
    params: Option<String>,
    /// Settings as key=value.
    #[arg(value_name = "KEY=VALUE")]
    settings: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct EvolveArgs {
    #[command(flatten)]
    leaf: Leaf,
    /// Initial value w(0, θ).
    #[arg(long)]
    w0_spec: Option<String>,
    /// Initial slope w_s(0, θ).
    #[arg(long)]
    w1_spec: Option<String>,
    /// Length of the evolution in s.
    #[arg(long)]
    b: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Group {
    /// Local geometry and regime.
    #[command(subcommand)]
    Surface(SurfaceCmd),
    /// Killing fields.
    #[command(subcommand)]
    Killing(KillingCmd),
    /// Infinitesimal isometries.
    #[command(subcommand)]
    Isometry(IsometryCmd),
    /// Dirichlet problems on positively curved surfaces.
    #[command(subcommand)]
    Elliptic(EllipticCmd),
    /// Flat surfaces.
    #[command(subcommand)]
    Parabolic(ParabolicCmd),
    /// Negatively curved surfaces.
    #[command(subcommand)]
    Hyperbolic(HyperbolicCmd),
    /// Limit bending energies.
    #[command(subcommand)]
    Energy(EnergyCmd),
    /// Run the built-in acceptance checks (all when no id is given).
    Selftest { ids: Vec<usize> },
}

#[derive(Subcommand, Debug)]
enum SurfaceCmd {
    /// Curvature, second form and regime near the origin.
    Info(Leaf),
}

#[derive(Subcommand, Debug)]
enum KillingCmd {
    /// Dimension of the Killing fields about a point.
    Dim(Leaf),
    /// A Killing field from initial data, or the nonconstant-curvature candidate.
    Field(Leaf),
}

#[derive(Subcommand, Debug)]
enum IsometryCmd {
    /// Residuals of a normal component and its reconstruction.
    Check(Leaf),
    /// Solve for an isometry of a convex graph from boundary data.
    Solve(Leaf),
}

#[derive(Subcommand, Debug)]
enum EllipticCmd {
    /// Dirichlet problem on a geodesic disk.
    Solve(Leaf),
    /// First Dirichlet eigenvalue of spherical caps.
    Eigen(Leaf),
}

#[derive(Subcommand, Debug)]
enum ParabolicCmd {
    /// Normal component along the rulings.
    Isometry(Leaf),
}

#[derive(Subcommand, Debug)]
enum HyperbolicCmd {
    /// Evolve Cauchy data along s.
    Evolve(EvolveArgs),
}

#[derive(Subcommand, Debug)]
enum EnergyCmd {
    /// Spherical cap: boundary formula against interior quadrature.
    Sphere(Leaf),
    /// Cylinder: one-dimensional reduction against the surface integral.
    Cylinder(Leaf),
    /// Reduced quadratic form against its minimization.
    Quad(Leaf),
}

type Command = fn(&Config) -> Result<Report>;

fn leaf_config(cli: &Cli, leaf: &Leaf) -> Result<Config> {
    let mut c = Config::load(cli.config.as_deref(), &leaf.settings)?;
    c.set_opt("surface", leaf.surface.clone());
    c.set_opt("params", leaf.params.clone());
    Ok(c)
}

/// Print a line; a closed pipe (`isoshell ... | head`) is not an error.
pub fn say(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Regime(_) | Error::Planar => 2,
        _ => 1,
    }
}

fn fail(e: &Error) -> ExitCode {
    let code = exit_code(e);
    eprintln!("{}", error_record(e, code as i32));
    ExitCode::from(code)
}

fn run_leaf(cli: &Cli, name: &str, cfg: Result<Config>, cmd: Command) -> ExitCode {
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("ISOSHELL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let file_name = cfg.str("name", name);
    let mut report = match cmd(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    for k in cfg.unused() {
        eprintln!("warning: setting `{k}` is not used by {name}");
    }
    let failed: Vec<_> = report.gates.iter().filter(|g| !g.passed()).collect();
    let status = if failed.is_empty() { "ok" } else { "gate_failed" };
    let mut manifest = Manifest {
        command: name.replace('-', " "),
        settings: cfg.resolved(),
        results: report.results.clone(),
        status: status.into(),
    };
    for g in &report.gates {
        manifest.results.push((format!("gate_{}", g.name), format!("{} <= {}", config::fmt17(g.value), config::fmt17(g.limit))));
    }
    for (k, v) in &report.results {
        say(&format!("{k} = {v}"));
    }
    let table = report.table.take().map(|mut t| {
        let mut meta = vec![("command".to_string(), manifest.command.clone())];
        meta.extend(manifest.settings.iter().map(|(k, v)| (k.clone(), v.clone())));
        meta.append(&mut t.meta);
        t.meta = meta;
        t
    });
    let written = Sink::new(&out, &file_name).and_then(|sink| {
        let mut paths = Vec::new();
        if let Some(t) = &table {
            paths.push(sink.write_csv(t)?);
        }
        paths.push(sink.write_manifest(&manifest)?);
        Ok(paths)
    });
    match written {
        Ok(paths) => {
            for p in paths {
                say(&format!("wrote {}", p.display()));
            }
        }
        Err(e) => return fail(&e),
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        for g in failed {
            eprintln!(
                "error kind=gate code=3 message=\"{} residual {} exceeds {}\"",
                g.name,
                config::fmt17(g.value),
                config::fmt17(g.limit)
            );
        }
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let msg = e.kind().to_string().replace('"', "\\\"");
            eprintln!("error kind=usage code=1 message=\"{msg}\"");
            return ExitCode::from(1);
        }
    };
    let leaf = |l: &Leaf| leaf_config(&cli, l);
    match &cli.group {
        Group::Surface(SurfaceCmd::Info(l)) => run_leaf(&cli, "surface-info", leaf(l), commands::surface_info),
        Group::Killing(KillingCmd::Dim(l)) => run_leaf(&cli, "killing-dim", leaf(l), commands::killing_dim),
        Group::Killing(KillingCmd::Field(l)) => run_leaf(&cli, "killing-field", leaf(l), commands::killing_field),
        Group::Isometry(IsometryCmd::Check(l)) => run_leaf(&cli, "isometry-check", leaf(l), commands::isometry_check),
        Group::Isometry(IsometryCmd::Solve(l)) => run_leaf(&cli, "isometry-solve", leaf(l), commands::isometry_solve),
        Group::Elliptic(EllipticCmd::Solve(l)) => run_leaf(&cli, "elliptic-solve", leaf(l), commands::elliptic_solve),
        Group::Elliptic(EllipticCmd::Eigen(l)) => run_leaf(&cli, "elliptic-eigen", leaf(l), commands::elliptic_eigen),
        Group::Parabolic(ParabolicCmd::Isometry(l)) => {
            run_leaf(&cli, "parabolic-isometry", leaf(l), commands::parabolic_isometry_cmd)
        }
        Group::Hyperbolic(HyperbolicCmd::Evolve(a)) => {
            let cfg = leaf(&a.leaf).map(|mut c| {
                c.set_opt("w0", a.w0_spec.clone());
                c.set_opt("w1", a.w1_spec.clone());
                c.set_opt("b", a.b.clone());
                c
            });
            run_leaf(&cli, "hyperbolic-evolve", cfg, commands::hyperbolic_evolve)
        }
        Group::Energy(EnergyCmd::Sphere(l)) => run_leaf(&cli, "energy-sphere", leaf(l), commands::energy_sphere),
        Group::Energy(EnergyCmd::Cylinder(l)) => run_leaf(&cli, "energy-cylinder", leaf(l), commands::energy_cylinder),
        Group::Energy(EnergyCmd::Quad(l)) => run_leaf(&cli, "energy-quad", leaf(l), commands::energy_quad),
        Group::Selftest { ids } => match commands::selftest_cmd(ids) {
            Ok(r) if r.failed => ExitCode::from(3),
            Ok(_) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        },
    }
}
