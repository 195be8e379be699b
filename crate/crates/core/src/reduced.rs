//! The finite-dimensional reduction: the scaling function `tau_i`, the
//! Kirchhoff–Routh energy `F_{k,m}`, the expansion coefficients `A1`, `A2`,
//! `B`, the energy of approximate solutions, and the scale selection
//! solving `d/d_rho E = 0` along a family.

use crate::ansatz::BubbleAnsatz;
use crate::fem::{DiscreteField, NeumannSystem};
use crate::geometry::{LocationTag, SurfaceModel, SurfacePoint};
use crate::green::GreenFunction;
use crate::quadrature::{integrate_chart, MomentContext, QuadratureRule, Region, TaylorData};
use crate::{Error, Result};
use std::sync::Arc;

/// A blow-up configuration: `m` points, the first `k` interior and the
/// rest on the boundary, outside the thick diagonal.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub surface: SurfaceModel,
    pub points: Vec<SurfacePoint>,
    pub k: usize,
}

impl Configuration {
    pub fn new(surface: SurfaceModel, points: Vec<SurfacePoint>, k: usize) -> Result<Self> {
        if k > points.len() {
            return Err(Error::InvalidConfig(format!(
                "k = {k} exceeds m = {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            let expect_interior = i < k;
            if expect_interior != (p.tag == LocationTag::Interior) {
                return Err(Error::InvalidConfig(format!(
                    "point {i} has the wrong location tag (first k interior, rest boundary)"
                )));
            }
        }
        Ok(Configuration { surface, points, k })
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    /// The critical parameter `lambda_{k,m} = 4 pi (m + k)`.
    pub fn lambda_km(&self) -> f64 {
        4.0 * std::f64::consts::PI * (self.m() + self.k) as f64
    }

    /// Check the pairwise separation margin (away from the thick diagonal).
    pub fn validate(&self, margin: f64) -> Result<()> {
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                let d = self.surface.point_distance(&self.points[i], &self.points[j]);
                if d < margin {
                    return Err(Error::ThickDiagonal(i, j));
                }
            }
        }
        Ok(())
    }

    /// Gradient dimension `sum_i i(xi_i)` (2 per interior, 1 per boundary).
    pub fn grad_dim(&self) -> usize {
        2 * self.k + (self.m() - self.k)
    }
}

/// Value and chart-gradient data of `tau_i` at its point.
pub struct TauData {
    pub value: f64,
    /// gradient of `log tau_i` at `xi_i` in chart coordinates
    pub log_grad: [f64; 2],
}

/// `tau_i(x) = V(x) exp(rho_w(xi_i) H(x, xi_i) + sum_{l != i} rho_w(xi_l)
/// G(x, xi_l))` as a function of `x`.
pub fn tau_field<'a>(
    green: &'a GreenFunction,
    cfg: &'a Configuration,
    i: usize,
) -> impl Fn(&SurfacePoint) -> Result<f64> + 'a {
    move |x: &SurfacePoint| {
        let mut e = 0.0;
        for (l, xl) in cfg.points.iter().enumerate() {
            let w = crate::geometry::rho_weight(&cfg.surface, xl)?;
            if l == i {
                e += w * green.regular_part(x, xl)?;
            } else {
                e += w * green.eval(x, xl)?;
            }
        }
        Ok(cfg.surface.potential.eval(x.coords) * e.exp())
    }
}

/// `tau_i(xi_i)` and the chart gradient of `log tau_i` there.
pub fn tau(green: &GreenFunction, cfg: &Configuration, i: usize) -> Result<TauData> {
    let xi = &cfg.points[i];
    let chart = cfg.surface.chart_at(xi)?;
    let ctx = MomentContext::new(&cfg.surface, &chart, (chart.radius / 4.0).min(0.2))?;
    let f = tau_field(green, cfg, i);
    let g = |x: &SurfacePoint| f(x).map(|v| v.ln()).unwrap_or(f64::NAN);
    let data = ctx.taylor_data(&|x| g(x))?;
    Ok(TauData { value: data.value.exp(), log_grad: data.grad })
}

/// Full second-order chart Taylor data of `tau_i` at `xi_i`.
pub fn tau_taylor(green: &GreenFunction, cfg: &Configuration, i: usize) -> Result<TaylorData> {
    let xi = &cfg.points[i];
    let chart = cfg.surface.chart_at(xi)?;
    let ctx = MomentContext::new(&cfg.surface, &chart, (chart.radius / 4.0).min(0.2))?;
    let f = tau_field(green, cfg, i);
    ctx.taylor_data(&|x| f(x).unwrap_or(f64::NAN))
}

/// The Kirchhoff–Routh energy
/// `F_{k,m} = sum_i 2 rho_w_i log V_i + sum_i rho_w_i^2 R(xi_i) +
/// sum_{i != j} rho_w_i rho_w_j G(xi_i, xi_j)` with its gradient in chart
/// coordinates (2 per interior point, 1 arc component per boundary point).
pub struct KirchhoffRouth {
    pub value: f64,
    pub grad: Vec<f64>,
}

pub fn f_km(green: &GreenFunction, cfg: &Configuration) -> Result<KirchhoffRouth> {
    let value = f_km_value(green, cfg)?;
    let grad = f_km_grad(green, cfg)?;
    Ok(KirchhoffRouth { value, grad })
}

pub fn f_km_value(green: &GreenFunction, cfg: &Configuration) -> Result<f64> {
    cfg.validate(1e-6)?;
    let s = &cfg.surface;
    let mut f = 0.0;
    for (i, xi) in cfg.points.iter().enumerate() {
        let wi = crate::geometry::rho_weight(s, xi)?;
        f += 2.0 * wi * s.potential.eval(xi.coords).ln();
        f += wi * wi * green.robin(xi)?;
        for (j, xj) in cfg.points.iter().enumerate() {
            if i != j {
                let wj = crate::geometry::rho_weight(s, xj)?;
                f += wi * wj * green.eval(xi, xj)?;
            }
        }
    }
    Ok(f)
}

/// Displace point `i` of a configuration by a chart step (interior) or an
/// arc step (boundary).
pub fn displace(cfg: &Configuration, i: usize, step: [f64; 2]) -> Result<Configuration> {
    let mut out = cfg.clone();
    let xi = &cfg.points[i];
    match xi.tag {
        LocationTag::Interior => {
            let chart = cfg.surface.chart_at(xi)?;
            let coords = chart.inverse_coords(step)?;
            out.points[i] = cfg.surface.interior_point(coords)?;
        }
        LocationTag::Boundary => {
            let comp = boundary_component(&cfg.surface, xi);
            let arc = xi.arc.unwrap_or(0.0) + step[0];
            out.points[i] = cfg.surface.boundary_point(comp, arc)?;
        }
    }
    Ok(out)
}

pub fn boundary_component(surface: &SurfaceModel, p: &SurfacePoint) -> usize {
    match surface.kind {
        crate::geometry::SurfaceKind::Cylinder { length } => {
            if p.coords[0] < length / 2.0 {
                0
            } else {
                1
            }
        }
        _ => 0,
    }
}

/// Central-difference gradient of `F_{k,m}` (chart step 1e-4).
pub fn f_km_grad(green: &GreenFunction, cfg: &Configuration) -> Result<Vec<f64>> {
    let h = 1e-4;
    let mut grad = Vec::with_capacity(cfg.grad_dim());
    for i in 0..cfg.m() {
        let comps = if cfg.points[i].tag == LocationTag::Interior { 2 } else { 1 };
        for c in 0..comps {
            let mut step = [0.0, 0.0];
            step[c] = h;
            let fp = f_km_value(green, &displace(cfg, i, step)?)?;
            step[c] = -h;
            let fm = f_km_value(green, &displace(cfg, i, step)?)?;
            grad.push((fp - fm) / (2.0 * h));
        }
    }
    Ok(grad)
}

/// Sign case of the leading expansion coefficients.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SignCase {
    /// A1 = 0, A2 != 0: the sign of A2 picks the lambda side.
    A2Driven,
    /// A1 = A2 = 0, B != 0.
    BDriven,
    /// none of the above; no scale selection available
    None,
}

/// The coefficients of the reduced energy expansion at a configuration.
pub struct ReducedCoefficients {
    pub f: f64,
    pub grad_f: Vec<f64>,
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    /// regularization radius used for the B limit
    pub reg_radius: f64,
    /// difference between the two regularization radii (r-independence
    /// diagnostic)
    pub b_r_defect: f64,
    pub case: SignCase,
}

/// Parameters for the coefficient evaluation.
pub struct CoefficientParams {
    pub r0: f64,
    /// relative tolerance for accepting the r-limit of B
    pub b_limit_rtol: f64,
}

impl Default for CoefficientParams {
    fn default() -> Self {
        CoefficientParams { r0: 0.2, b_limit_rtol: 2e-2 }
    }
}

/// Evaluate `A1`, `A2` and `B` (with the r-regularized limit) at a
/// configuration. The `system` provides the mesh quadrature for the
/// far-field integral in `B`.
pub fn coefficients(
    green: &GreenFunction,
    cfg: &Configuration,
    system: &Arc<NeumannSystem>,
    params: &CoefficientParams,
) -> Result<ReducedCoefficients> {
    let s = &cfg.surface;
    let m = cfg.m();
    let kr = f_km(green, cfg)?;
    let mut tau_data = Vec::with_capacity(m);
    for i in 0..m {
        tau_data.push(tau_taylor(green, cfg, i)?);
    }
    // boundary data: dn log V = -d_{y2} log V in the chart, k_g
    let mut a1 = 0.0;
    let mut a2 = 0.0;
    let mut b_local = 0.0;
    for (i, xi) in cfg.points.iter().enumerate() {
        let w = crate::geometry::rho_weight(s, xi)?;
        let tau_i = tau_data[i].value;
        let lap_tau = tau_data[i].laplacian();
        let kgauss = s.gauss_curvature(xi);
        let core = lap_tau - 2.0 * kgauss * tau_i;
        a2 += 0.5 * w * core;
        b_local += -0.25 * w * tau_i.ln() * core;
        if xi.tag == LocationTag::Boundary {
            let chart = s.chart_at(xi)?;
            let ctx = MomentContext::new(s, &chart, (chart.radius / 4.0).min(0.2))?;
            let logv = ctx.taylor_data(&|x| s.potential.eval(x.coords).ln())?;
            let dn_logv = -logv.grad[1];
            let kg = s.geodesic_curvature(xi)?;
            a1 += -w * tau_i.sqrt() * (dn_logv + 2.0 * kg);
            a2 += 2.0 * w * kg * (dn_logv + kg) * tau_i;
            b_local += -2.0 * w * kg * (dn_logv + kg) * tau_i.ln() * tau_i;
        }
    }
    // the r-regularized tail of B at two radii
    let r1 = params.r0 / 4.0;
    let r2 = params.r0 / 8.0;
    let tail1 = b_tail(green, cfg, system, params.r0, r1, a2, &tau_data)?;
    let tail2 = b_tail(green, cfg, system, params.r0, r2, a2, &tau_data)?;
    let defect = (tail1 - tail2).abs();
    let scale = tail1.abs().max(tail2.abs()).max(1.0);
    if defect > params.b_limit_rtol * scale {
        return Err(Error::NonConvergentLimit(tail1, tail2));
    }
    // one Richardson step assuming an O(r^2) remainder
    let tail = tail2 + (tail2 - tail1) / 3.0;
    let b = b_local - 0.5 * a2 + tail;
    // classify the sign case on the configuration
    let a_scale = a2.abs().max(b.abs()).max(1e-12);
    let case = if a1.abs() < 1e-7 * a_scale.max(1.0) {
        if a2.abs() > 1e-7 * a_scale {
            SignCase::A2Driven
        } else if b.abs() > 1e-9 {
            SignCase::BDriven
        } else {
            SignCase::None
        }
    } else {
        SignCase::None
    };
    Ok(ReducedCoefficients {
        f: kr.value,
        grad_f: kr.grad,
        a1,
        a2,
        b,
        reg_radius: r2,
        b_r_defect: defect,
        case,
    })
}

/// `8 int_{Sigma - U_r} V e^{sum w_l G_l} - (1/r^2)(sum w_i tau_i -
/// 8 sum_bdry (dn log V + 2 k_g) tau_i) - A2 log(1/r)`.
fn b_tail(
    green: &GreenFunction,
    cfg: &Configuration,
    system: &Arc<NeumannSystem>,
    r0: f64,
    r: f64,
    a2: f64,
    tau_data: &[TaylorData],
) -> Result<f64> {
    let s = &cfg.surface;
    let density = |x: &SurfacePoint| -> Result<f64> {
        let mut e = 0.0;
        for xl in cfg.points.iter() {
            let w = crate::geometry::rho_weight(s, xl)?;
            e += w * green.eval(x, xl)?;
        }
        Ok(s.potential.eval(x.coords) * e.exp())
    };
    let mut charts = Vec::new();
    for xi in cfg.points.iter() {
        charts.push(s.chart_at(xi)?);
    }
    // far part on the mesh (outside all r0-disks)
    let far = |coords: [f64; 2]| -> f64 {
        let p = match s.classify(coords, 1e-12) {
            Ok(p) => p,
            Err(_) => return 0.0,
        };
        for chart in &charts {
            if let Ok(y) = chart.forward(&p) {
                if y[0].hypot(y[1]) < r0 {
                    return 0.0;
                }
            }
        }
        density(&p).unwrap_or(0.0)
    };
    let loads = system.load(&far, crate::fem::LoadQuadrature::Degree5);
    let mut integral: f64 = loads.iter().sum();
    // annuli r <= |y_i| <= r0 by chart quadrature
    for (i, chart) in charts.iter().enumerate() {
        let region = match cfg.points[i].tag {
            LocationTag::Interior => Region::Annulus(r, r0),
            LocationTag::Boundary => Region::HalfAnnulus(r, r0),
        };
        let f = |y: [f64; 2]| -> f64 {
            let y = if chart.kind == crate::geometry::ChartKind::BoundaryHalfDisk {
                [y[0], y[1].max(0.0)]
            } else {
                y
            };
            let x = match chart.inverse(s, y) {
                Ok(x) => x,
                Err(_) => return f64::NAN,
            };
            let phi = chart.conformal_factor(s, y).unwrap_or(f64::NAN);
            density(&x).unwrap_or(f64::NAN) * phi.exp()
        };
        let (v, _) = integrate_chart(&f, region, &QuadratureRule::with_tol(1e-9, 1e-8))?;
        integral += v;
    }
    // counterterms
    let mut counter = 0.0;
    for (i, xi) in cfg.points.iter().enumerate() {
        let w = crate::geometry::rho_weight(s, xi)?;
        counter += w * tau_data[i].value;
        if xi.tag == LocationTag::Boundary {
            let chart = s.chart_at(xi)?;
            let ctx = MomentContext::new(s, &chart, (chart.radius / 4.0).min(0.2))?;
            let logv = ctx.taylor_data(&|x| s.potential.eval(x.coords).ln())?;
            let dn_logv = -logv.grad[1];
            let kg = s.geodesic_curvature(xi)?;
            counter -= 8.0 * (dn_logv + 2.0 * kg) * tau_data[i].value;
        }
    }
    Ok(8.0 * integral - counter / (r * r) - a2 * (1.0 / r).ln())
}

/// Discrete energy `J_lambda(u) = (1/2) int |grad u|^2 - lambda log int V
/// e^u` of a nodal field.
pub fn energy_j(system: &NeumannSystem, u: &DiscreteField, lambda: f64) -> Result<f64> {
    if !u.mean_zero {
        let mean = system.mean(&u.values);
        if mean.abs() > 1e-8 * u.max_abs().max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "energy functional needs a mean-zero field (mean {mean:.3e})"
            )));
        }
    }
    let dirichlet = system.stiffness.bilinear(&u.values, &u.values);
    let log_mass = log_mass_integral(system, u)?;
    Ok(0.5 * dirichlet - lambda * log_mass)
}

/// `log int V e^u dv_g` with the max subtracted before exponentiation.
pub fn log_mass_integral(system: &NeumannSystem, u: &DiscreteField) -> Result<f64> {
    let shift = u.max();
    let mesh = &system.mesh;
    let f = |coords: [f64; 2]| -> f64 {
        let v = mesh.surface.potential.eval(coords);
        match u.eval(coords) {
            Some(w) => v * (w - shift).exp(),
            None => 0.0,
        }
    };
    let loads = system.load(&f, crate::fem::LoadQuadrature::Degree5);
    let total: f64 = loads.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SolverBreakdown("mass integral not positive".into()));
    }
    Ok(total.ln() + shift)
}

/// Semi-analytic Dirichlet energy of the ansatz:
/// `int |grad W|^2 = sum_{i,l} int chi_i e^{-phi} e^{U_i} PU_l dv_g`.
pub fn ansatz_dirichlet_energy(ansatz: &BubbleAnsatz) -> Result<f64> {
    let cfg = &ansatz.cfg;
    let mut total = 0.0;
    for i in 0..cfg.config.points.len() {
        let chart = &cfg.charts[i];
        let rho = cfg.rho_i[i];
        let region = Region::for_center(cfg.config.points[i].tag, 2.0 * cfg.r0);
        let f = |y: [f64; 2]| -> f64 {
            let y = if chart.kind == crate::geometry::ChartKind::BoundaryHalfDisk {
                [y[0], y[1].max(0.0)]
            } else {
                y
            };
            let r = y[0].hypot(y[1]);
            let q = rho * rho + r * r;
            let x = match chart.inverse(&cfg.config.surface, y) {
                Ok(x) => x,
                Err(_) => return f64::NAN,
            };
            let w = match ansatz.w(&x) {
                Ok(w) => w,
                Err(_) => return f64::NAN,
            };
            crate::cutoff::chi(r / cfg.r0) * 8.0 * rho * rho / (q * q) * w
        };
        let (v, _) = integrate_chart(&f, region, &QuadratureRule::with_tol(1e-8, 1e-8))?;
        total += v;
    }
    Ok(total)
}

/// Energy of the ansatz, combining the semi-analytic Dirichlet part with
/// the chart/mesh-split mass integral.
pub fn ansatz_energy(ansatz: &BubbleAnsatz, lambda: f64) -> Result<f64> {
    let dirichlet = ansatz_dirichlet_energy(ansatz)?;
    let beta = ansatz.mass_integral()?;
    Ok(0.5 * dirichlet - lambda * beta.ln())
}

/// The expansion of the reduced energy in `rho`, term by term. The terms
/// sum to `total` exactly.
#[derive(Clone, Debug)]
pub struct EnergyExpansion {
    pub constant: f64,
    pub f_term: f64,
    pub log_term: f64,
    pub a1_term: f64,
    pub a2_term: f64,
    pub b_term: f64,
    pub a1_sq_term: f64,
    pub total: f64,
    pub d_rho: f64,
    pub d2_rho: f64,
}

/// The lambda-window constant `C` of `|lambda - lambda_km| <= C rho^2
/// |log rho|`.
pub const LAMBDA_WINDOW_C: f64 = 10.0;

pub fn expansion_e(
    coeffs: &ReducedCoefficients,
    lambda_km: f64,
    lambda: f64,
    rho: f64,
) -> Result<EnergyExpansion> {
    let gap = (lambda - lambda_km).abs();
    let bound = LAMBDA_WINDOW_C * rho * rho * rho.ln().abs();
    if gap > bound {
        return Err(Error::LambdaWindow { gap, bound });
    }
    let constant = -lambda_km - lambda * (lambda_km / 8.0).ln();
    let f_term = -0.5 * coeffs.f;
    let log_term = 2.0 * (lambda - lambda_km) * rho.ln();
    let a1_term = -coeffs.a1 * rho;
    let a2_term = coeffs.a2 * rho * rho * rho.ln();
    let b_term = -coeffs.b * rho * rho;
    let a1_sq_term = coeffs.a1 * coeffs.a1 * rho * rho / (2.0 * lambda_km);
    let total = constant + f_term + log_term + a1_term + a2_term + b_term + a1_sq_term;
    let d_rho = 2.0 * (lambda - lambda_km) / rho - coeffs.a1
        + coeffs.a1 * coeffs.a1 / lambda_km * rho
        + coeffs.a2 * rho
        + 2.0 * coeffs.a2 * rho * rho.ln()
        - 2.0 * coeffs.b * rho;
    let d2_rho = -2.0 * (lambda - lambda_km) / (rho * rho)
        + coeffs.a1 * coeffs.a1 / lambda_km
        + 3.0 * coeffs.a2
        + 2.0 * coeffs.a2 * rho.ln()
        - 2.0 * coeffs.b;
    Ok(EnergyExpansion {
        constant,
        f_term,
        log_term,
        a1_term,
        a2_term,
        b_term,
        a1_sq_term,
        total,
        d_rho,
        d2_rho,
    })
}

/// Root of the `d/d_rho` expansion in `mu = rho / sqrt(|lambda -
/// lambda_km|)` on the bracketing interval of the sign case; `None` when
/// the bracket does not change sign.
pub fn select_rho(
    coeffs: &ReducedCoefficients,
    lambda_km: f64,
    lambda: f64,
) -> Result<Option<f64>> {
    let delta = lambda - lambda_km;
    let (driver, right_side) = match coeffs.case {
        SignCase::A2Driven => (coeffs.a2, coeffs.a2 > 0.0),
        SignCase::BDriven => (coeffs.b, coeffs.b > 0.0),
        SignCase::None => {
            return Err(Error::WrongSide(
                "no sign case detected (A1 != 0 or all coefficients vanish)".into(),
            ))
        }
    };
    if (delta > 0.0) != right_side {
        return Err(Error::WrongSide(format!(
            "lambda on the wrong side: case wants a {} neighborhood",
            if right_side { "right" } else { "left" }
        )));
    }
    let ad = delta.abs();
    if ad < 1e-14 {
        return Err(Error::InvalidParameter("lambda equals lambda_km".into()));
    }
    let log_delta = ad.ln().abs().max(1e-2);
    // bracket with safety factors around the driver size
    let upper_bound = 2.0 * driver.abs();
    let lower_bound = driver.abs() / 4.0;
    let m0 = match coeffs.case {
        SignCase::A2Driven => (1.0 / (2.0 * upper_bound * log_delta)).sqrt(),
        SignCase::BDriven => (1.0 / (4.0 * upper_bound * log_delta)).sqrt(),
        SignCase::None => unreachable!(),
    };
    let cap = (1.0 / lower_bound).sqrt();
    let lo = m0 * ad.sqrt();
    let hi = cap * ad.sqrt();
    // g(rho) = rho dE/drho / delta; positive at lo, negative at hi when a
    // root exists
    let g = |rho: f64| {
        let d = 2.0 * delta / rho - coeffs.a1
            + coeffs.a1 * coeffs.a1 / lambda_km * rho
            + coeffs.a2 * rho
            + 2.0 * coeffs.a2 * rho * rho.ln()
            - 2.0 * coeffs.b * rho;
        rho * d / delta
    };
    let (glo, ghi) = (g(lo), g(hi));
    if glo.signum() == ghi.signum() {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if g(mid).signum() == glo.signum() {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a) < 1e-14 * b {
            break;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{surface_catalog, Potential};
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn disk_config() -> (Arc<GreenFunction>, Configuration) {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let green = Arc::new(GreenFunction::oracle(&d, 0.2).unwrap());
        let center = d.interior_point([0.0, 0.0]).unwrap();
        let cfg = Configuration::new(d, vec![center], 1).unwrap();
        (green, cfg)
    }

    #[test]
    fn tau_at_disk_center() {
        let (green, cfg) = disk_config();
        let t = tau(&green, &cfg, 0).unwrap();
        // tau = exp(8 pi R(0)) = exp(-3)
        assert!(
            (t.value - (-3.0f64).exp()).abs() < 1e-6,
            "tau {} vs e^-3 {}",
            t.value,
            (-3.0f64).exp()
        );
        assert!(t.log_grad[0].abs() < 1e-6 && t.log_grad[1].abs() < 1e-6);
    }

    #[test]
    fn tau_scales_with_potential() {
        let d = surface_catalog("disk", &BTreeMap::new())
            .unwrap()
            .with_potential(Potential::parse("2.5").unwrap())
            .unwrap();
        let green = Arc::new(GreenFunction::oracle(&d, 0.2).unwrap());
        let cfg =
            Configuration::new(d.clone(), vec![d.interior_point([0.1, 0.2]).unwrap()], 1).unwrap();
        let t = tau(&green, &cfg, 0).unwrap();
        let (green1, cfg1) = {
            let d1 = surface_catalog("disk", &BTreeMap::new()).unwrap();
            let g = Arc::new(GreenFunction::oracle(&d1, 0.2).unwrap());
            let c = Configuration::new(d1.clone(), vec![d1.interior_point([0.1, 0.2]).unwrap()], 1)
                .unwrap();
            (g, c)
        };
        let t1 = tau(&green1, &cfg1, 0).unwrap();
        assert!((t.value / t1.value - 2.5).abs() < 1e-9, "multiplicative scaling");
    }

    #[test]
    fn f_km_disk_center_value() {
        let (green, cfg) = disk_config();
        let kr = f_km(&green, &cfg).unwrap();
        // F = 64 pi^2 R(0) = -24 pi
        assert!(
            (kr.value + 24.0 * PI).abs() < 1e-9,
            "F {} vs -24 pi {}",
            kr.value,
            -24.0 * PI
        );
        assert!(kr.grad.iter().all(|g| g.abs() < 1e-6), "grad {:?}", kr.grad);
    }

    #[test]
    fn f_km_swap_symmetry_and_potential_shift() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let green = Arc::new(GreenFunction::oracle(&d, 0.2).unwrap());
        let a = d.interior_point([0.3, 0.0]).unwrap();
        let b = d.interior_point([-0.2, 0.25]).unwrap();
        let f_ab = f_km_value(
            &green,
            &Configuration::new(d.clone(), vec![a.clone(), b.clone()], 2).unwrap(),
        )
        .unwrap();
        let f_ba =
            f_km_value(&green, &Configuration::new(d.clone(), vec![b, a], 2).unwrap()).unwrap();
        assert!((f_ab - f_ba).abs() < 1e-12, "swap symmetry");

        // V -> c V shifts F by 2 c_log sum(rho_w) and keeps the gradient
        let c = 3.0f64;
        let dv = surface_catalog("disk", &BTreeMap::new())
            .unwrap()
            .with_potential(Potential::parse("3").unwrap())
            .unwrap();
        let greenv = Arc::new(GreenFunction::oracle(&dv, 0.2).unwrap());
        let a = dv.interior_point([0.3, 0.0]).unwrap();
        let b = dv.interior_point([-0.2, 0.25]).unwrap();
        let cfg2 = Configuration::new(dv.clone(), vec![a.clone(), b.clone()], 2).unwrap();
        let kr2 = f_km(&greenv, &cfg2).unwrap();
        let d0 = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let green0 = Arc::new(GreenFunction::oracle(&d0, 0.2).unwrap());
        let a0 = d0.interior_point([0.3, 0.0]).unwrap();
        let b0 = d0.interior_point([-0.2, 0.25]).unwrap();
        let cfg0 = Configuration::new(d0, vec![a0, b0], 2).unwrap();
        let kr0 = f_km(&green0, &cfg0).unwrap();
        let shift = 2.0 * c.ln() * (8.0 * PI + 8.0 * PI);
        assert!((kr2.value - kr0.value - shift).abs() < 1e-9, "potential shift");
        for (g2, g0) in kr2.grad.iter().zip(kr0.grad.iter()) {
            assert!((g2 - g0).abs() < 1e-6, "gradient invariance");
        }
    }

    #[test]
    fn gradient_matches_analytic_on_disk() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let green = Arc::new(GreenFunction::oracle(&d, 0.2).unwrap());
        let a = d.interior_point([0.35, 0.1]).unwrap();
        let b = d.interior_point([-0.3, -0.2]).unwrap();
        let cfg = Configuration::new(d.clone(), vec![a.clone(), b.clone()], 2).unwrap();
        let grad = f_km_grad(&green, &cfg).unwrap();
        // analytic: dF/dxi_i = 2 w log V' (= 0) + w^2 grad R + 2 w^2 grad_xi G
        let w = 8.0 * PI;
        for (i, xi) in [a, b].iter().enumerate() {
            let r2 = xi.coords[0].powi(2) + xi.coords[1].powi(2);
            let rfac = (1.0 / (1.0 - r2) + 1.0) / PI;
            let other = &cfg.points[1 - i];
            let gg = crate::green::disk_green_grad_source(other.coords, xi.coords);
            for c in 0..2 {
                let analytic = w * w * rfac * xi.coords[c] + 2.0 * w * w * gg[c];
                let fd = grad[2 * i + c];
                assert!(
                    (analytic - fd).abs() < 1e-6 * (1.0 + analytic.abs()),
                    "point {i} comp {c}: analytic {analytic} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn expansion_terms_sum() {
        let coeffs = ReducedCoefficients {
            f: -24.0 * PI,
            grad_f: vec![0.0, 0.0],
            a1: 0.0,
            a2: 5.0,
            b: 1.3,
            reg_radius: 0.025,
            b_r_defect: 0.0,
            case: SignCase::A2Driven,
        };
        let lkm = 8.0 * PI;
        let e = expansion_e(&coeffs, lkm, lkm + 1e-3, 0.05).unwrap();
        let sum = e.constant + e.f_term + e.log_term + e.a1_term + e.a2_term + e.b_term
            + e.a1_sq_term;
        assert_eq!(sum, e.total);
        // lambda window enforcement
        assert!(matches!(
            expansion_e(&coeffs, lkm, lkm + 1.0, 0.05),
            Err(Error::LambdaWindow { .. })
        ));
    }

    #[test]
    fn select_rho_cases() {
        let mk = |a2: f64, b: f64, case| ReducedCoefficients {
            f: 0.0,
            grad_f: vec![],
            a1: 0.0,
            a2,
            b,
            reg_radius: 0.025,
            b_r_defect: 0.0,
            case,
        };
        let lkm = 8.0 * PI;
        // case a1: mu^2 ~ 2 / (A2 |log delta|)
        let coeffs = mk(4.0, 0.5, SignCase::A2Driven);
        let lambda = lkm + 1e-3;
        let rho = select_rho(&coeffs, lkm, lambda).unwrap().unwrap();
        let mu2 = rho * rho / (lambda - lkm);
        let predict = 2.0 / (coeffs.a2 * (lambda - lkm).ln().abs());
        assert!(
            (mu2 - predict).abs() < 0.35 * predict,
            "mu^2 {mu2} vs leading {predict}"
        );
        // wrong side
        assert!(matches!(
            select_rho(&coeffs, lkm, lkm - 1e-3),
            Err(Error::WrongSide(_))
        ));
        // case a2: mu ~ 1/sqrt(B)
        let coeffs = mk(0.0, 2.0, SignCase::BDriven);
        let rho = select_rho(&coeffs, lkm, lambda).unwrap().unwrap();
        let mu = rho / (lambda - lkm).sqrt();
        let predict = 1.0 / (2.0f64).sqrt();
        assert!(
            (mu - predict).abs() < 0.25 * predict,
            "mu {mu} vs 1/sqrt(B) {predict}"
        );
    }
}
