use isoshell::geodesic::GridSpec;
use isoshell::grid::GridOps;
use isoshell::killing::*;
use isoshell::numerics::Tolerances;
use isoshell::surface::catalog;
use isoshell::Error;

#[test]
fn cylinder_band_has_two_global_killing_fields() {
    let s = catalog("cylinder", &[1.0, 10.0]).unwrap();
    let d = killing_dimension(&s, [0.0, 0.0], GridSpec::new(16, 36, 3.6), true, &Tolerances::default(), 1e-6)
        .unwrap();
    assert_eq!(d.dim, 2, "{:?}", d.singular_values);
    // without the seam the region is a flat disk
    let d = killing_dimension(&s, [0.0, 0.0], GridSpec::new(16, 36, 3.0), false, &Tolerances::default(), 1e-6)
        .unwrap();
    assert_eq!(d.dim, 3, "{:?}", d.singular_values);
}

#[test]
fn flat_disk_and_revolution_annulus() {
    let tol = Tolerances::default();
    let s = catalog("plane", &[]).unwrap();
    let d = killing_dimension(&s, [0.0, 0.0], GridSpec::new(8, 10, 1.0), false, &tol, 1e-6).unwrap();
    assert_eq!(d.dim, 3);
    let s = catalog("log-revolution-graph", &[]).unwrap();
    let d = killing_dimension(&s, [1.6, 0.0], GridSpec::new(8, 10, 0.35), false, &tol, 1e-6).unwrap();
    assert_eq!(d.dim, 1, "{:?}", d.singular_values);
}

#[test]
fn revolution_candidate_is_the_rotation() {
    let s = catalog("log-revolution-graph", &[]).unwrap();
    let (g, w) = killing_candidate_nonconstant(&s, [2.2, 0.0], GridSpec::new(16, 20, 0.35), &Tolerances::default(), 1e-6)
        .unwrap();
    let ops = GridOps::new(&g);
    let r = killing_residual(&ops, &w);
    assert!(r < 1e-4, "{r}");
    assert!(gradient_residual(&g, &w) < 1e-5);
    assert!(hessian_lemma_residual(&s, &g, &w).unwrap() < 1e-4);
    // proportional to ∂ϑ = (-y, x, 0)
    let mut ratio = Vec::new();
    for j in 0..g.n_theta {
        for k in 0..=g.nt {
            let p = g.node(j, k).position;
            let rot = isoshell::surface::V3::new(-p.y, p.x, 0.0);
            let v = w.ambient(&g, j, k);
            assert!(v.cross(&rot).norm() < 1e-8 * rot.norm().max(1.0) * v.norm().max(1.0));
            ratio.push(v.dot(&rot) / rot.norm_squared());
        }
    }
    let r0 = ratio[0];
    assert!(ratio.iter().all(|r| (r - r0).abs() < 1e-6 * r0.abs()), "{:?}", &ratio[..5]);
}

#[test]
fn candidate_refuses_critical_points_and_generic_surfaces() {
    let s = catalog("log-revolution-graph", &[]).unwrap();
    let e = killing_candidate_nonconstant(&s, [0.0, 0.0], GridSpec::new(8, 5, 0.2), &Tolerances::default(), 1e-6);
    assert!(matches!(e, Err(Error::CriticalPoint)));
    // the circle r ≈ 1.529 where κ is extremal
    let e = killing_candidate_nonconstant(&s, [1.5, 0.0], GridSpec::new(8, 10, 0.2), &Tolerances::default(), 1e-6);
    assert!(matches!(e, Err(Error::CriticalPoint)));
    let s = catalog("perturbed", &[]).unwrap();
    let e = killing_candidate_nonconstant(&s, [0.3, 0.2], GridSpec::new(8, 5, 0.2), &Tolerances::default(), 1e-6);
    assert!(matches!(e, Err(Error::Obstructed { .. })));
}
