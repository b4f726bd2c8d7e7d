use std::path::Path;
use std::process::{Command, Output};

fn isoshell(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoshell"))
        .args(args)
        .current_dir(dir)
        .env_remove("ISOSHELL_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of `key = value` in the command's stdout.
fn result(o: &Output, key: &str) -> String {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("no `{key}` in {}", stdout(o)))
}

fn number(o: &Output, key: &str) -> f64 {
    result(o, key).parse().unwrap()
}

#[test]
fn regimes_of_catalog_surfaces() {
    let d = tempfile::tempdir().unwrap();
    for (name, want) in [("sphere", "elliptic"), ("cylinder", "parabolic"), ("hyperboloid", "hyperbolic")] {
        let o = isoshell(d.path(), &["surface", "info", "--surface", name]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(result(&o, "regime"), want);
    }
}

#[test]
fn cylinder_energy_of_the_second_mode() {
    let d = tempfile::tempdir().unwrap();
    let o = isoshell(d.path(), &["energy", "cylinder", "w0=cos2θ"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((number(&o, "energy_1d") - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    assert!((number(&o, "energy_2d") - 2.0 * std::f64::consts::PI).abs() < 1e-6);
}

#[test]
fn non_trigonometric_data_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = isoshell(d.path(), &["energy", "cylinder", "w0=θ"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kind=invalid_params"));
}

#[test]
fn wrong_regime_exits_with_two() {
    let d = tempfile::tempdir().unwrap();
    let o = isoshell(d.path(), &["elliptic", "solve", "--surface", "hyperboloid"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.starts_with("error kind=regime code=2 message=\""), "{e}");
    // a declared regime that does not match is refused too
    let o = isoshell(d.path(), &["surface", "info", "--surface", "cylinder", "regime=elliptic"]);
    assert_eq!(o.status.code(), Some(2));
    // and the planar case
    let o = isoshell(d.path(), &["parabolic", "isometry", "--surface", "plane"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind=planar"));
}

#[test]
fn command_line_overrides_the_config_file() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("run.conf"), "# cap\nkappa = 1\na = pi/4\nmu = 2\n").unwrap();
    let o = isoshell(d.path(), &["--config", "run.conf", "energy", "quad", "mu=3", "g=1,0,0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = std::fs::read_to_string(d.path().join("energy-quad.manifest")).unwrap();
    assert!(m.contains("\nmu=3.0000000000000000e0\n"), "{m}");
    // keys the command never reads are reported
    assert!(stderr(&o).contains("setting `kappa` is not used"));
    // Q2 at G = e1⊗e1 with mu = 3, lambda = 1: 2mu + lambda mu/(mu + lambda/2)
    let want = 6.0 + 3.0 / 3.5;
    assert!((number(&o, "q2_closed") - want).abs() < 1e-14);
}

#[test]
fn outputs_are_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let run = |dir: &str| {
        let o = isoshell(d.path(), &["--out", dir, "killing", "field", "w_o=0.3,-0.7", "a=0.5"]);
        assert!(o.status.success(), "{}", stderr(&o));
        (
            std::fs::read(d.path().join(dir).join("killing-field.csv")).unwrap(),
            std::fs::read(d.path().join(dir).join("killing-field.manifest")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn csv_layout() {
    let d = tempfile::tempdir().unwrap();
    let o = isoshell(d.path(), &["surface", "info", "--surface", "sphere", "n=3"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(d.path().join("surface-info.csv")).unwrap();
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    assert!(text.starts_with("# command=surface info\n"));
    assert!(text.contains("\n# surface=sphere\n"));
    assert_eq!(lines.next(), Some("u,v,kappa,pi11,pi12,pi22"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    for r in rows {
        for cell in r.split(',') {
            let v: f64 = cell.parse().unwrap();
            if v != 0.0 {
                // d.dddddddddddddddde±x: 17 significant digits
                let mant = cell.trim_start_matches('-').split('e').next().unwrap();
                assert_eq!(mant.len(), 18, "{cell}");
            }
        }
    }
}

#[test]
fn output_directory_from_the_environment() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("results");
    let o = Command::new(env!("CARGO_BIN_EXE_isoshell"))
        .args(["elliptic", "eigen", "a=pi/4,pi/2"])
        .current_dir(d.path())
        .env("ISOSHELL_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("elliptic-eigen.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    // unique below a quarter sphere, λ₁ = 2 exactly at the hemisphere
    assert_eq!(rows[0][3], 1.0);
    assert!((rows[1][1] - 2.0).abs() < 1e-4);
}

#[test]
fn cfl_violation_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    let o = isoshell(d.path(), &["hyperbolic", "evolve", "ns=5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error kind=stability code=1"));
    assert!(!d.path().join("hyperbolic-evolve.csv").exists());
}

#[test]
fn hyperbolic_evolution_with_named_flags() {
    let d = tempfile::tempdir().unwrap();
    let o = isoshell(d.path(), &["hyperbolic", "evolve", "--w0-spec", "cos2θ", "--w1-spec", "0", "--b", "0.5", "n=16"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = std::fs::read_to_string(d.path().join("hyperbolic-evolve.manifest")).unwrap();
    assert!(m.contains("\nw0=cos2θ\n") && m.contains("\nb=5.0000000000000000e-1\n"), "{m}");
    assert!(number(&o, "growth_constant") < 10.0);
    // periodic data for w_s must have zero mean
    let o = isoshell(d.path(), &["hyperbolic", "evolve", "w1=1"]);
    assert!(stderr(&o).contains("kind=precondition"));
}

#[test]
fn gate_failure_exits_with_three() {
    let d = tempfile::tempdir().unwrap();
    // roundoff alone exceeds this gate
    let o = isoshell(d.path(), &["isometry", "check", "gate_isometry=1e-30"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("error kind=gate code=3"));
    let m = std::fs::read_to_string(d.path().join("isometry-check.manifest")).unwrap();
    assert!(m.contains("status=gate_failed"));
}

#[test]
fn killing_and_graph_commands() {
    let d = tempfile::tempdir().unwrap();
    let o = isoshell(d.path(), &["killing", "dim", "--surface", "perturbed"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(result(&o, "dimension"), "0");
    let o = isoshell(d.path(), &["isometry", "solve", "psi=0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("isometry-solve.csv")).unwrap();
    for l in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let w: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(w.abs() < 1e-6);
    }
}

#[test]
fn selected_selftests() {
    let d = tempfile::tempdir().unwrap();
    let o = isoshell(d.path(), &["selftest", "4", "10"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("[PASS]  4 ") && lines[1].starts_with("[PASS] 10 "), "{lines:?}");
    let o = isoshell(d.path(), &["selftest", "14"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors() {
    let d = tempfile::tempdir().unwrap();
    let o = isoshell(d.path(), &["energy", "quad", "notapair"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kind=parse"));
    let o = isoshell(d.path(), &["energy", "wave"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kind=usage"));
    let o = isoshell(d.path(), &["surface", "info", "--surface", "torus"]);
    assert!(stderr(&o).contains("kind=unknown_surface"));
}
