use meanfield::fem::{assemble, build_mesh_graded, GradingSpec};
use meanfield::geometry::{surface_catalog, Potential, SurfacePoint};
use meanfield::green::GreenFunction;
use meanfield::quadrature::*;
use meanfield::reduced::*;
use std::collections::BTreeMap;
use std::sync::Arc;

#[test]
fn btail_radius_scan() {
    let mut p = BTreeMap::new();
    p.insert("L".to_string(), 2.0);
    let c = surface_catalog("cylinder", &p)
        .unwrap()
        .with_potential(Potential::parse("1 + 0.05*cos(s)*cos(pi*t/2)").unwrap())
        .unwrap();
    let green = Arc::new(GreenFunction::oracle(&c, 0.2).unwrap());
    let xi = c.boundary_point(0, 0.0).unwrap();
    let cfg = Configuration::new(c.clone(), vec![xi.clone()], 0).unwrap();
    // density over the annulus in the chart: compare against tau/|y|^4
    let chart = c.chart_at(&cfg.points[0]).unwrap();
    let t0 = tau(&green, &cfg, 0).unwrap();
    println!("tau {:.6} log-grad {:?}", t0.value, t0.log_grad);
    let density = |x: &SurfacePoint| -> f64 {
        let w = 4.0 * std::f64::consts::PI;
        let g = green.eval(x, &cfg.points[0]).unwrap();
        c.potential.eval(x.coords) * (w * g).exp()
    };
    for r in [0.1, 0.05, 0.025] {
        // integrand times |y|^4 at chart points (r, angle)
        for ang in [0.3, 1.57, 2.8] {
            let y = [r * ang.cos(), r * (ang as f64).sin()];
            let x = chart.inverse(&c, y).unwrap();
            let phi = chart.conformal_factor(&c, y).unwrap();
            let v = density(&x) * phi.exp() * (y[0]*y[0]+y[1]*y[1]).powi(2);
            println!("r {r} ang {ang}: g(y) = {v:.6}");
        }
    }
}
