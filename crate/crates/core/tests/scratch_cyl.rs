use meanfield::fem::{assemble, build_mesh_graded, GradingSpec};
use meanfield::geometry::{surface_catalog, Potential};
use meanfield::green::GreenFunction;
use meanfield::reduced::*;
use meanfield::solver::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

#[test]
fn cylinder_boundary_family() {
    let mut p = BTreeMap::new();
    p.insert("L".to_string(), 2.0);
    let c = surface_catalog("cylinder", &p)
        .unwrap()
        .with_potential(Potential::parse("1 + 0.05*cos(s)*cos(pi*t/2)").unwrap())
        .unwrap();
    let green = Arc::new(GreenFunction::oracle(&c, 0.2).unwrap());
    let xi = c.boundary_point(0, 0.0).unwrap();
    let cfg = Configuration::new(c.clone(), vec![xi], 0).unwrap();
    let lkm = cfg.lambda_km();
    println!("lambda_km {lkm:.4} (4pi = {:.4})", 4.0 * PI);
    let mesh_c = build_mesh_graded(&c, 0.06, &GradingSpec::default()).unwrap();
    let sys_c = Arc::new(assemble(&mesh_c).unwrap());
    let coeffs = coefficients(&green, &cfg, &sys_c, &CoefficientParams::default()).unwrap();
    println!("A1 {:.3e} A2 {:.4} B {:.4} case {:?}", coeffs.a1, coeffs.a2, coeffs.b, coeffs.case);
    let grading = GradingSpec { centers: vec![[0.0, 0.0]], h_core: 2.0e-4, slope: 6.0 };
    let mesh = build_mesh_graded(&c, 0.035, &grading).unwrap();
    println!("nodes {}", mesh.n_nodes());
    let system = Arc::new(assemble(&mesh).unwrap());
    let params = FamilyParams { r0: 0.2, tol: 1e-8, max_iter: 60, epsilon: 0.1, steps: 5, calibrate: true };
    let t0 = std::time::Instant::now();
    let record = match continue_family(green.clone(), system.clone(), &cfg, &coeffs, &params) {
        Ok(r) => r, Err(e) => { println!("FAMILY ERR: {e}"); return; }
    };
    println!("family took {:.1?}, lambda*-4pi {:.6}, steps {}, truncated {:?}",
        t0.elapsed(), record.lambda_star - lkm, record.steps.len(), record.truncated);
    for s in &record.steps {
        println!("gap {:.6} iters {} maxu {:.3} mass(r0/2) {:.5} (4pi={:.5}, {:.2}%) peak {:?}",
            s.lambda - record.lambda_star, s.result.iterations, s.result.max_u,
            s.concentration.masses[0][0], 4.0 * PI, 100.0 * s.concentration.masses[0][0] / (4.0 * PI),
            s.result.peak);
    }
}
