//! Critical points of the Kirchhoff–Routh energy on the configuration
//! manifold: damped Newton search (boundary points move along arc length,
//! interior points in their 2D charts), finite-difference Hessian
//! classification, and the theorem-side conditions.

use crate::geometry::{LocationTag, SurfacePoint};
use crate::green::GreenFunction;
use crate::quadrature::MomentContext;
use crate::reduced::{displace, f_km_grad, f_km_value, Configuration};
use crate::{Error, Result};
use std::f64::consts::PI;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Classification {
    NondegenerateMin,
    NondegenerateMax,
    NondegenerateSaddle,
    Degenerate,
}

impl Classification {
    /// Every outcome except a degenerate one is a C^1-stable critical point.
    pub fn is_stable(self) -> bool {
        self != Classification::Degenerate
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::NondegenerateMin => "nondegenerate-min",
            Classification::NondegenerateMax => "nondegenerate-max",
            Classification::NondegenerateSaddle => "nondegenerate-saddle",
            Classification::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug)]
pub struct CriticalPointReport {
    pub config: Configuration,
    pub grad_norm: f64,
    pub hessian: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub classification: Classification,
    pub iterations: usize,
    pub f_value: f64,
}

/// Damped Newton on the manifold: converges when `|grad F| < tol`, rejects
/// steps that enter the separation margin, returns `None` past `max_iter`.
pub fn find_critical(
    green: &GreenFunction,
    start: &Configuration,
    tol: f64,
    max_iter: usize,
    margin: f64,
) -> Result<Option<CriticalPointReport>> {
    start.validate(margin)?;
    let mut cfg = start.clone();
    let mut grad = f_km_grad(green, &cfg)?;
    let mut gnorm = norm(&grad);
    for it in 0..max_iter {
        if gnorm < tol {
            return Ok(Some(classify_stability(green, cfg, gnorm, it)?));
        }
        let hess = hessian(green, &cfg)?;
        // Newton direction; fall back to (sign-corrected) gradient descent
        // on |grad F| if the Hessian solve fails
        let mut dir = match solve_small(&hess, &grad) {
            Some(mut d) => {
                for v in d.iter_mut() {
                    *v = -*v;
                }
                d
            }
            None => grad.iter().map(|g| -g).collect(),
        };
        // trust region: cap the step length
        let dlen = norm(&dir);
        if dlen > 0.2 {
            for v in dir.iter_mut() {
                *v *= 0.2 / dlen;
            }
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            match apply_step(&cfg, &dir, alpha) {
                Ok(trial) => {
                    if trial.validate(margin).is_err() {
                        alpha /= 2.0;
                        continue;
                    }
                    let tgrad = f_km_grad(green, &trial)?;
                    let tnorm = norm(&tgrad);
                    if tnorm < gnorm {
                        cfg = trial;
                        grad = tgrad;
                        gnorm = tnorm;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => {}
            }
            alpha /= 2.0;
        }
        if !accepted {
            // stalled: either a genuinely degenerate direction or the
            // margin wall
            return Ok(if gnorm < tol.max(1e-8) {
                Some(classify_stability(green, cfg, gnorm, it)?)
            } else {
                None
            });
        }
    }
    if gnorm < tol {
        return Ok(Some(classify_stability(green, cfg, gnorm, max_iter)?));
    }
    Err(Error::MaxIterations(max_iter))
}

fn apply_step(cfg: &Configuration, dir: &[f64], alpha: f64) -> Result<Configuration> {
    let mut out = cfg.clone();
    let mut idx = 0;
    for i in 0..cfg.m() {
        match cfg.points[i].tag {
            LocationTag::Interior => {
                out = displace(&out, i, [alpha * dir[idx], alpha * dir[idx + 1]])?;
                idx += 2;
            }
            LocationTag::Boundary => {
                out = displace(&out, i, [alpha * dir[idx], 0.0])?;
                idx += 1;
            }
        }
    }
    Ok(out)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Finite-difference Hessian of F on the manifold (step 1e-3, central).
pub fn hessian(green: &GreenFunction, cfg: &Configuration) -> Result<Vec<Vec<f64>>> {
    let h = 1e-3;
    let n = cfg.grad_dim();
    let mut hess = vec![vec![0.0; n]; n];
    let mut idx = 0;
    for i in 0..cfg.m() {
        let comps = if cfg.points[i].tag == LocationTag::Interior { 2 } else { 1 };
        for c in 0..comps {
            let mut step = [0.0, 0.0];
            step[c] = h;
            let gp = f_km_grad(green, &displace(cfg, i, step)?)?;
            step[c] = -h;
            let gm = f_km_grad(green, &displace(cfg, i, step)?)?;
            for r in 0..n {
                hess[r][idx] = (gp[r] - gm[r]) / (2.0 * h);
            }
            idx += 1;
        }
    }
    // symmetrize
    for r in 0..n {
        for c in (r + 1)..n {
            let avg = 0.5 * (hess[r][c] + hess[c][r]);
            hess[r][c] = avg;
            hess[c][r] = avg;
        }
    }
    Ok(hess)
}

/// Classify a converged configuration by the eigenvalues of its Hessian.
pub fn classify_stability(
    green: &GreenFunction,
    cfg: Configuration,
    grad_norm: f64,
    iterations: usize,
) -> Result<CriticalPointReport> {
    let hess = hessian(green, &cfg)?;
    let eigenvalues = jacobi_eigenvalues(&hess);
    let scale = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let degenerate = eigenvalues.iter().any(|v| v.abs() <= 1e-4 * scale.max(1.0));
    let classification = if degenerate {
        Classification::Degenerate
    } else if eigenvalues.iter().all(|&v| v > 0.0) {
        Classification::NondegenerateMin
    } else if eigenvalues.iter().all(|&v| v < 0.0) {
        Classification::NondegenerateMax
    } else {
        Classification::NondegenerateSaddle
    };
    let f_value = f_km_value(green, &cfg)?;
    Ok(CriticalPointReport {
        config: cfg,
        grad_norm,
        hessian: hess,
        eigenvalues,
        classification,
        iterations,
        f_value,
    })
}

/// Winding number of `grad F` around one interior point on a small circle
/// (the planar Brouwer degree probe, 32 samples).
pub fn winding_number(
    green: &GreenFunction,
    cfg: &Configuration,
    i: usize,
    radius: f64,
) -> Result<i32> {
    if cfg.points[i].tag != LocationTag::Interior {
        return Err(Error::InvalidConfig("winding number needs an interior point".into()));
    }
    let n = 32;
    let mut angles = Vec::with_capacity(n + 1);
    for s in 0..=n {
        let a = 2.0 * PI * s as f64 / n as f64;
        let moved = displace(cfg, i, [radius * a.cos(), radius * a.sin()])?;
        let g = f_km_grad(green, &moved)?;
        // components of point i in the full gradient
        let mut idx = 0;
        for q in 0..i {
            idx += if cfg.points[q].tag == LocationTag::Interior { 2 } else { 1 };
        }
        angles.push(g[idx + 1].atan2(g[idx]));
    }
    let mut total = 0.0;
    for w in angles.windows(2) {
        let mut d = w[1] - w[0];
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        total += d;
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _ in 0..100 {
        // largest off-diagonal
        let mut p = 0;
        let mut q = 1;
        let mut big = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                if m[r][c].abs() > big {
                    big = m[r][c].abs();
                    p = r;
                    q = c;
                }
            }
        }
        if n < 2 || big < 1e-14 {
            break;
        }
        let theta = 0.5 * (2.0 * m[p][q]).atan2(m[p][p] - m[q][q]);
        let (c, s) = (theta.cos(), theta.sin());
        for r in 0..n {
            let (mp, mq) = (m[r][p], m[r][q]);
            m[r][p] = c * mp + s * mq;
            m[r][q] = -s * mp + c * mq;
        }
        for r in 0..n {
            let (mp, mq) = (m[p][r], m[q][r]);
            m[p][r] = c * mp + s * mq;
            m[q][r] = -s * mp + c * mq;
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() < 1e-12 * (1.0 + m[col][col].abs()) {
            return None;
        }
        m.swap(col, piv);
        x.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for c in col + 1..n {
            s -= m[col][c] * x[c];
        }
        x[col] = s / m[col][col];
    }
    Some(x)
}

/// Which theorem scenario a condition report refers to.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TheoremCase {
    /// single interior blow-up point
    OneInterior,
    /// single boundary blow-up point
    OneBoundary,
    /// multi-point with the potential coupling condition
    MultiPoint,
    /// the general sign conditions on A1/A2/B
    Main,
}

/// Which side of `lambda_{k,m}` the solutions live on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LambdaSide {
    Right,
    Left,
    Undetermined,
}

#[derive(Debug)]
pub struct ConditionReport {
    pub case: TheoremCase,
    /// per-point second-order quantity whose sign picks the lambda side
    pub point_quantities: Vec<f64>,
    /// per-boundary-point defect of `dn log V + 2 k_g = 0`
    pub boundary_defects: Vec<f64>,
    pub potential_positive: bool,
    pub side: LambdaSide,
}

/// Evaluate the hypotheses of the blow-up theorems at a configuration: the
/// boundary compatibility `dn log V + 2 k_g = 0` and the sign of
/// `Delta_g log V - 2 K + 4 k_g (dn log V + k_g) + 4 pi (m + k) / |S|`
/// at each point (the second-order quantity of the reduced expansion at a
/// critical point).
pub fn check_theorem_conditions(
    cfg: &Configuration,
    case: TheoremCase,
) -> Result<ConditionReport> {
    let s = &cfg.surface;
    let mut quantities = Vec::new();
    let mut defects = Vec::new();
    let mkfactor = 4.0 * PI * (cfg.m() + cfg.k) as f64 / s.area;
    let mut potential_positive = true;
    // sample positivity over a grid
    for i in 0..24 {
        for j in 0..24 {
            let coords = sample_coords(s, i, j, 24);
            if !(s.potential.eval(coords) > 0.0) {
                potential_positive = false;
            }
        }
    }
    for xi in cfg.points.iter() {
        let chart = s.chart_at(xi)?;
        let ctx = MomentContext::new(s, &chart, (chart.radius / 4.0).min(0.2))?;
        let logv = ctx.taylor_data(&|x: &SurfacePoint| s.potential.eval(x.coords).ln())?;
        let lap_logv = logv.laplacian();
        let kgauss = s.gauss_curvature(xi);
        let q = match xi.tag {
            LocationTag::Interior => lap_logv - 2.0 * kgauss + mkfactor,
            LocationTag::Boundary => {
                let kg = s.geodesic_curvature(xi)?;
                let dn_logv = -logv.grad[1];
                defects.push(dn_logv + 2.0 * kg);
                lap_logv - 2.0 * kgauss + 4.0 * kg * (dn_logv + kg) + mkfactor
            }
        };
        quantities.push(q);
    }
    let side = if !potential_positive {
        LambdaSide::Undetermined
    } else if quantities.iter().all(|&q| q > 0.0) {
        LambdaSide::Right
    } else if quantities.iter().all(|&q| q < 0.0) {
        LambdaSide::Left
    } else {
        LambdaSide::Undetermined
    };
    Ok(ConditionReport {
        case,
        point_quantities: quantities,
        boundary_defects: defects,
        potential_positive,
        side,
    })
}

fn sample_coords(s: &crate::geometry::SurfaceModel, i: usize, j: usize, n: usize) -> [f64; 2] {
    match s.kind {
        crate::geometry::SurfaceKind::Disk | crate::geometry::SurfaceKind::Cap { .. } => {
            let rmax = s.kind.patch_radius().unwrap();
            let r = rmax * (i as f64 + 0.5) / n as f64;
            let a = 2.0 * PI * j as f64 / n as f64;
            [r * a.cos(), r * a.sin()]
        }
        crate::geometry::SurfaceKind::Cylinder { length } => {
            [length * i as f64 / (n - 1) as f64, 2.0 * PI * j as f64 / n as f64]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{surface_catalog, Potential};
    use std::collections::BTreeMap;

    #[test]
    fn disk_center_is_found_and_classified() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let green = GreenFunction::oracle(&d, 0.2).unwrap();
        let start =
            Configuration::new(d.clone(), vec![d.interior_point([0.3, 0.2]).unwrap()], 1).unwrap();
        let report = find_critical(&green, &start, 1e-8, 60, 0.02).unwrap().unwrap();
        let p = &report.config.points[0];
        assert!(
            p.coords[0].hypot(p.coords[1]) < 1e-6,
            "converged to {:?}",
            p.coords
        );
        assert!(report.grad_norm < 1e-8);
        // the disk Robin function has a nondegenerate minimum at the center
        assert_eq!(report.classification, Classification::NondegenerateMin);
        // analytic Hessian of F = 64 pi^2 R: diag(128 pi)
        for e in &report.eigenvalues {
            assert!((e - 128.0 * PI).abs() < 0.5, "eigenvalue {e}");
        }
        // Brouwer degree of a nondegenerate extremum is +1
        let w = winding_number(&green, &report.config, 0, 0.05).unwrap();
        assert_eq!(w, 1);
    }

    #[test]
    fn cylinder_boundary_translation_invariance() {
        let mut p = BTreeMap::new();
        p.insert("L".to_string(), 2.0);
        let c = surface_catalog("cylinder", &p).unwrap();
        let green = GreenFunction::oracle(&c, 0.2).unwrap();
        let cfg =
            Configuration::new(c.clone(), vec![c.boundary_point(0, 1.3).unwrap()], 0).unwrap();
        let g = f_km_grad(&green, &cfg).unwrap();
        assert!(g[0].abs() < 1e-7, "gradient along the circle: {}", g[0]);
        let report = find_critical(&green, &cfg, 1e-6, 10, 0.02).unwrap().unwrap();
        assert_eq!(report.classification, Classification::Degenerate);
    }

    #[test]
    fn margin_violation_rejected() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let green = GreenFunction::oracle(&d, 0.2).unwrap();
        let a = d.interior_point([0.1, 0.0]).unwrap();
        let b = d.interior_point([0.11, 0.0]).unwrap();
        let cfg = Configuration::new(d, vec![a, b], 2).unwrap();
        assert!(matches!(
            find_critical(&green, &cfg, 1e-8, 10, 0.05),
            Err(Error::ThickDiagonal(_, _))
        ));
    }

    #[test]
    fn theorem_conditions_disk_and_cylinder() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let cfg =
            Configuration::new(d.clone(), vec![d.interior_point([0.0, 0.0]).unwrap()], 1).unwrap();
        let rep = check_theorem_conditions(&cfg, TheoremCase::OneInterior).unwrap();
        // V = 1: Delta log V - 2K + 8 pi / |S| = 8 > 0
        assert!((rep.point_quantities[0] - 8.0).abs() < 1e-6);
        assert_eq!(rep.side, LambdaSide::Right);

        let mut p = BTreeMap::new();
        p.insert("L".to_string(), 2.0);
        let c = surface_catalog("cylinder", &p).unwrap();
        let cfg =
            Configuration::new(c.clone(), vec![c.boundary_point(0, 0.0).unwrap()], 0).unwrap();
        let rep = check_theorem_conditions(&cfg, TheoremCase::OneBoundary).unwrap();
        assert!(rep.boundary_defects[0].abs() < 1e-8, "dn log V + 2 k_g = 0");
        // 4 pi / |S| = 1 for L = 2
        assert!((rep.point_quantities[0] - 1.0).abs() < 1e-6);
        assert_eq!(rep.side, LambdaSide::Right);
    }

    #[test]
    fn manufactured_quadratic_classifies_min() {
        // V = exp(|x|^2/8) on the disk gives F with a strict local shape at
        // the center dominated by the quadratic potential term
        let d = surface_catalog("disk", &BTreeMap::new())
            .unwrap()
            .with_potential(Potential::parse("exp((x^2 + y^2)/8)").unwrap())
            .unwrap();
        let green = GreenFunction::oracle(&d, 0.2).unwrap();
        let start =
            Configuration::new(d.clone(), vec![d.interior_point([0.2, -0.1]).unwrap()], 1)
                .unwrap();
        let report = find_critical(&green, &start, 1e-8, 60, 0.02).unwrap().unwrap();
        assert_eq!(report.classification, Classification::NondegenerateMin);
        assert!(report.config.points[0].coords[0].hypot(report.config.points[0].coords[1]) < 1e-6);
    }
}
