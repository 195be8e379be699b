use meanfield::fem::{assemble, build_mesh_graded, GradingSpec};
use meanfield::geometry::{surface_catalog, Potential};
use meanfield::green::GreenFunction;
use meanfield::reduced::*;
use meanfield::solver::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

#[test]
fn disk_interior_family() {
    let d = surface_catalog("disk", &BTreeMap::new())
        .unwrap()
        .with_potential(Potential::parse("exp(-(x^2+y^2)/4)").unwrap())
        .unwrap();
    let green = Arc::new(GreenFunction::oracle(&d, 0.2).unwrap());
    // coefficients on a moderate mesh
    let mesh_c = build_mesh_graded(&d, 0.05, &GradingSpec::default()).unwrap();
    let sys_c = Arc::new(assemble(&mesh_c).unwrap());
    let cfg = Configuration::new(d.clone(), vec![d.interior_point([0.0, 0.0]).unwrap()], 1).unwrap();
    let coeffs = coefficients(&green, &cfg, &sys_c, &CoefficientParams::default()).unwrap();
    println!("A2 {:.4} case {:?}", coeffs.a2, coeffs.case);
    // Newton mesh graded for the smallest bubble
    let eps = 0.1;
    let steps = 7usize;
    let lkm = cfg.lambda_km();
    let final_gap = eps * 0.5f64.powi(steps as i32 - 1);
    let rho_final = select_rho(&coeffs, lkm, lkm + final_gap).unwrap().unwrap();
    let tau0 = tau(&green, &cfg, 0).unwrap().value;
    let h_core = rho_final * tau0.sqrt() / 6.0; let _ = h_core;
    println!("rho_final {:.5} rho_i {:.5} h_core {:.2e}", rho_final, rho_final*tau0.sqrt(), h_core);
    let grading = GradingSpec { centers: vec![[0.0, 0.0]], h_core: 1.0e-4, slope: 6.0 };
    let mesh = build_mesh_graded(&d, 0.02, &grading).unwrap();
    println!("mesh nodes {}", mesh.n_nodes());
    let system = Arc::new(assemble(&mesh).unwrap());
    let params = FamilyParams { r0: 0.2, tol: 1e-8, max_iter: 60, epsilon: eps, steps, calibrate: true };
    let t0 = std::time::Instant::now();
    let record = match continue_family(green.clone(), system.clone(), &cfg, &coeffs, &params) { Ok(r) => r, Err(e) => { println!("FAMILY ERR: {e}"); return; } };
    println!("family took {:.1?}, lambda*-8pi {:.6}, steps {}, truncated {:?}", t0.elapsed(), record.lambda_star - lkm, record.steps.len(), record.truncated);
    for s in &record.steps {
        println!(
            "lambda-8pi {:.6} rho {:.4} iters {} res {:.2e} maxu {:.3} mass(r0/2) {:.5} (8pi={:.5}) peak {:?} warmgap {:.3}",
            s.lambda - lkm, s.rho, s.result.iterations, s.result.residual, s.result.max_u,
            s.concentration.masses[0][0], 8.0 * PI, s.result.peak, s.warm_start_gap
        );
    }
}
