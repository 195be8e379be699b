//! Liouville bubbles and their mean-zero Neumann projections, the kernel
//! projections of the linearized operator, the bubble-weighted norm, and
//! the residual of the approximate solution `W = sum_i PU_i`.
//!
//! The projections are computed by singularity splitting: the bubble
//! profile is carried analytically and only the smooth remainder
//!
//! `eta = PU - chi (U - log 8 rho^2) - rho_w H`
//!
//! is solved for on the mesh. Its right-hand side lives on the cutoff
//! annulus and is O(rho^2), so no bubble-scale mesh resolution is needed
//! and the asymptotic comparisons are not polluted by core interpolation
//! error. The same device (the one the regular part `H` already uses)
//! applies to the kernel projections.

use crate::cutoff;
use crate::fem::{DiscreteField, LoadQuadrature, NeumannSystem};
use crate::geometry::{IsothermalChart, LocationTag, SurfacePoint};
use crate::green::GreenFunction;
use crate::quadrature::{integrate_1d, integrate_chart, QuadratureRule, Region};
use crate::reduced::Configuration;
use crate::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

/// The scaled Liouville bubble `U_{tau,xi}(x) = log(8 tau^2 / (tau^2 +
/// |y_xi(x)|^2)^2)` in the chart at `xi`.
pub fn bubble_u(tau: f64, chart: &IsothermalChart, x: &SurfacePoint) -> Result<f64> {
    let y = chart.forward(x)?;
    let q = tau * tau + y[0] * y[0] + y[1] * y[1];
    Ok((8.0 * tau * tau / (q * q)).ln())
}

/// Kernel functions of the linearized Liouville operator.
pub fn kernel_z(j: usize, y: [f64; 2]) -> f64 {
    let r2 = y[0] * y[0] + y[1] * y[1];
    match j {
        0 => 2.0 * (1.0 - r2) / (1.0 + r2),
        1 => 4.0 * y[0] / (1.0 + r2),
        2 => 4.0 * y[1] / (1.0 + r2),
        _ => panic!("kernel index {j}"),
    }
}

/// Weighted-norm parameters: `kappa in (0, 1)` (default 0.3) and the
/// cutoff scale `r0`.
#[derive(Clone, Copy, Debug)]
pub struct StarNormParams {
    pub kappa: f64,
    pub r0: f64,
}

impl StarNormParams {
    pub fn new(kappa: f64, r0: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa}")));
        }
        Ok(StarNormParams { kappa, r0 })
    }
}

/// The finite-dimensional reduction state: configuration, scales and the
/// per-point derived data.
pub struct BubbleConfig {
    pub config: Configuration,
    pub rho: f64,
    pub lambda: f64,
    pub r0: f64,
    /// tau_i(xi_i)
    pub tau: Vec<f64>,
    /// rho_i = rho sqrt(tau_i)
    pub rho_i: Vec<f64>,
    /// concentration weights rho_w(xi_i)
    pub rho_w: Vec<f64>,
    pub charts: Vec<IsothermalChart>,
}

impl BubbleConfig {
    pub fn new(
        green: &GreenFunction,
        config: Configuration,
        rho: f64,
        lambda: f64,
        r0: f64,
    ) -> Result<Self> {
        config.validate(2.0 * r0)?;
        let surface = &config.surface;
        let mut tau = Vec::new();
        let mut rho_i = Vec::new();
        let mut rho_w = Vec::new();
        let mut charts = Vec::new();
        for (i, xi) in config.points.iter().enumerate() {
            let chart = surface.chart_at(xi)?;
            if chart.radius < 2.0 * r0 {
                return Err(Error::ScaleTooLarge { rho: 2.0 * r0, limit: chart.radius });
            }
            let t = crate::reduced::tau(green, &config, i)?.value;
            tau.push(t);
            rho_i.push(rho * t.sqrt());
            rho_w.push(crate::geometry::rho_weight(surface, xi)?);
            charts.push(chart);
        }
        // the lambda window |lambda - lambda_km| <= C rho^2 |log rho| is
        // checked by the expansion layer, not here: projections are defined
        // for every rho
        Ok(BubbleConfig { config, rho, lambda, r0, tau, rho_i, rho_w, charts })
    }

    pub fn lambda_km(&self) -> f64 {
        self.config.lambda_km()
    }
}

/// Everything needed to evaluate one projected bubble `PU_i` and its
/// asymptotic expansion.
pub struct ProjectedBubble {
    pub chart_index: usize,
    pub rho_i: f64,
    pub rho_w: f64,
    pub r0: f64,
    /// exact mass `int chi e^{-phi} e^{U_i} dv_g`
    pub mass: f64,
    /// the constant `h_{rho,xi}` of the expansion
    pub h_const: f64,
    /// discrete remainder `eta = PU - chi (U - log 8 rho^2) - rho_w H`
    pub eta: DiscreteField,
    /// mean of eta demanded by the projection (`2 int chi log(1 + rho^2 /
    /// |y|^2) dv_g`)
    pub eta_mean: f64,
}

/// The assembled approximation `W = sum_i PU_i` with its evaluators.
pub struct BubbleAnsatz {
    pub cfg: BubbleConfig,
    pub green: Arc<GreenFunction>,
    pub system: Arc<NeumannSystem>,
    pub bubbles: Vec<ProjectedBubble>,
    /// shared corrector F_xi per point (scaled by -2 rho_i^2 in the
    /// expansion)
    pub correctors: Vec<DiscreteField>,
}

/// Plane mass of the cutoff bubble, `int chi(|y|/r0) 8 rho^2 / (rho^2 +
/// |y|^2)^2 dy` over the (half) disk of radius `2 r0`.
pub fn cutoff_bubble_mass(tag: LocationTag, rho: f64, r0: f64) -> Result<f64> {
    let angle = match tag {
        LocationTag::Interior => 2.0 * PI,
        LocationTag::Boundary => PI,
    };
    let f = |s: f64| -> Result<f64> {
        let q = rho * rho + s * s;
        Ok(cutoff::chi(s / r0) * 8.0 * rho * rho * s / (q * q))
    };
    let (v, _) = integrate_1d(&f, 0.0, 2.0 * r0, &QuadratureRule::default())?;
    Ok(angle * v)
}

/// The chart-geometry integrals `I1 = int chi (e^phi - 1)/|y|^2 dy` and
/// `I2 = int (1/r0) chi' log|y|/|y| e^phi dy` entering the expansion
/// constants.
fn geometry_integrals(
    surface: &crate::geometry::SurfaceModel,
    chart: &IsothermalChart,
    tag: LocationTag,
    r0: f64,
) -> Result<(f64, f64)> {
    let region = Region::for_center(tag, 2.0 * r0);
    let rule = QuadratureRule::with_tol(1e-12, 1e-11);
    let phi = |y: [f64; 2]| chart.conformal_factor(surface, y).unwrap_or(f64::NAN);
    let f1 = |y: [f64; 2]| {
        let r2 = y[0] * y[0] + y[1] * y[1];
        if r2 < 1e-26 {
            // e^phi - 1 = O(|y|) so the integrand is integrable; the polar
            // substitution has already removed the singular weight
            return 0.0;
        }
        cutoff::chi(r2.sqrt() / r0) * (phi(y).exp() - 1.0) / r2
    };
    let (i1, _) = integrate_chart(&f1, region, &rule)?;
    let f2 = |y: [f64; 2]| {
        let r = y[0].hypot(y[1]);
        if r < 1e-13 {
            return 0.0;
        }
        cutoff::chi_d1(r / r0) / r0 * r.ln() / r * phi(y).exp()
    };
    let (i2, _) = integrate_chart(&f2, region, &rule)?;
    Ok((i1, i2))
}

/// The three expansion constants `h`, `h^1`, `h^2` at scale `rho` for one
/// bubble.
pub struct ExpansionConstants {
    pub h: f64,
    pub h1: f64,
    pub h2: f64,
}

pub fn expansion_constants(
    surface: &crate::geometry::SurfaceModel,
    chart: &IsothermalChart,
    tag: LocationTag,
    rho_w: f64,
    r0: f64,
    rho: f64,
) -> Result<ExpansionConstants> {
    let (i1, i2) = geometry_integrals(surface, chart, tag, r0)?;
    let area = surface.area;
    let h = -rho_w * rho * rho * rho.ln() / (2.0 * area)
        + 2.0 * rho * rho / area * (rho_w / 8.0 + i1 - i2);
    let h1 = -rho_w * rho * rho * rho.ln() / area + 4.0 * rho * rho / area * (i1 - i2);
    let h2 = h1 - rho_w * rho * rho / area;
    Ok(ExpansionConstants { h, h1, h2 })
}

impl BubbleAnsatz {
    /// Build the projection data for every bubble on a shared mesh system.
    pub fn build(
        green: Arc<GreenFunction>,
        system: Arc<NeumannSystem>,
        cfg: BubbleConfig,
    ) -> Result<BubbleAnsatz> {
        let mut bubbles = Vec::new();
        let mut correctors = Vec::new();
        for i in 0..cfg.config.points.len() {
            bubbles.push(project_bubble_split(&green, &system, &cfg, i)?);
            correctors.push(solve_corrector(&system, &cfg, i)?);
        }
        Ok(BubbleAnsatz { cfg, green, system, bubbles, correctors })
    }

    /// `PU_i(x)`.
    pub fn pu(&self, i: usize, x: &SurfacePoint) -> Result<f64> {
        let cfg = &self.cfg;
        let b = &self.bubbles[i];
        let chart = &cfg.charts[i];
        let xi = &cfg.config.points[i];
        let mut v = b.rho_w * self.green.regular_part(x, xi)?;
        v += b
            .eta
            .eval(x.coords)
            .ok_or_else(|| Error::MalformedPoint("x outside mesh".into()))?;
        if let Ok(y) = chart.forward(x) {
            let r = y[0].hypot(y[1]);
            if r < 2.0 * cfg.r0 {
                let q = b.rho_i * b.rho_i + r * r;
                // chi (U - log 8 rho^2) = -2 chi log(rho^2 + |y|^2)
                v += cutoff::chi(r / cfg.r0) * (-2.0) * q.ln();
            }
        }
        Ok(v)
    }

    /// The expansion evaluator: `chi (U - log 8 rho^2) + rho_w H + h_const
    /// - 2 rho_i^2 F_xi`.
    pub fn pu_asymptotic(&self, i: usize, x: &SurfacePoint) -> Result<f64> {
        let cfg = &self.cfg;
        let b = &self.bubbles[i];
        let chart = &cfg.charts[i];
        let xi = &cfg.config.points[i];
        let mut v = b.rho_w * self.green.regular_part(x, xi)? + b.h_const;
        v -= 2.0
            * b.rho_i
            * b.rho_i
            * self.correctors[i]
                .eval(x.coords)
                .ok_or_else(|| Error::MalformedPoint("x outside mesh".into()))?;
        if let Ok(y) = chart.forward(x) {
            let r = y[0].hypot(y[1]);
            if r < 2.0 * cfg.r0 {
                let q = b.rho_i * b.rho_i + r * r;
                v += cutoff::chi(r / cfg.r0) * (-2.0) * q.ln();
            }
        }
        Ok(v)
    }

    /// `W(x) = sum_i PU_i(x)`.
    pub fn w(&self, x: &SurfacePoint) -> Result<f64> {
        let mut v = 0.0;
        for i in 0..self.bubbles.len() {
            v += self.pu(i, x)?;
        }
        Ok(v)
    }

    /// Nodal interpolant of W on the mesh.
    pub fn w_field(&self) -> Result<DiscreteField> {
        let mesh = self.system.mesh.clone();
        let mut values = Vec::with_capacity(mesh.n_nodes());
        for i in 0..mesh.n_nodes() {
            let p = mesh.node_point(i)?;
            values.push(self.w(&p)?);
        }
        Ok(DiscreteField::new(mesh, values))
    }

    /// Continuum Laplacian of W at a point: by construction
    /// `Delta_g W = sum_i (-chi_i e^{-phi_i} e^{U_i} + mass_i / |S|)`.
    pub fn laplacian_w(&self, x: &SurfacePoint) -> Result<f64> {
        let cfg = &self.cfg;
        let area = cfg.config.surface.area;
        let mut v = 0.0;
        for (i, b) in self.bubbles.iter().enumerate() {
            v += b.mass / area;
            let chart = &cfg.charts[i];
            if let Ok(y) = chart.forward(x) {
                let r = y[0].hypot(y[1]);
                if r < 2.0 * cfg.r0 {
                    let q = b.rho_i * b.rho_i + r * r;
                    let phi = chart.conformal_factor(&cfg.config.surface, y)?;
                    v -= cutoff::chi(r / cfg.r0) * (-phi).exp() * 8.0 * b.rho_i * b.rho_i
                        / (q * q);
                }
            }
        }
        Ok(v)
    }

    /// `int_Sigma V e^W dv_g`: chart quadrature near the bubbles, mesh
    /// quadrature far away.
    pub fn mass_integral(&self) -> Result<f64> {
        let cfg = &self.cfg;
        let surface = &cfg.config.surface;
        let mut total = 0.0;
        // near parts
        for i in 0..self.bubbles.len() {
            let chart = &cfg.charts[i];
            let region = Region::for_center(cfg.config.points[i].tag, 2.0 * cfg.r0);
            let f = |y: [f64; 2]| -> f64 {
                let p = match chart.inverse(surface, clamp_half(chart, y)) {
                    Ok(p) => p,
                    Err(_) => return f64::NAN,
                };
                let w = match self.w(&p) {
                    Ok(w) => w,
                    Err(_) => return f64::NAN,
                };
                let phi = chart.conformal_factor(surface, y).unwrap_or(f64::NAN);
                surface.potential.eval(p.coords) * w.exp() * phi.exp()
            };
            let (v, _) = integrate_chart(&f, region, &QuadratureRule::with_tol(1e-10, 1e-8))?;
            total += v;
        }
        // far part over mesh triangles, zeroing quadrature points inside
        // the chart disks
        let mesh = &self.system.mesh;
        let far = |coords: [f64; 2]| -> f64 {
            let p = match mesh.surface.classify(coords, 1e-12) {
                Ok(p) => p,
                Err(_) => return 0.0,
            };
            for (i, chart) in cfg.charts.iter().enumerate() {
                let _ = i;
                if let Ok(y) = chart.forward(&p) {
                    if y[0].hypot(y[1]) < 2.0 * cfg.r0 {
                        return 0.0;
                    }
                }
            }
            match self.w(&p) {
                Ok(w) => mesh.surface.potential.eval(coords) * w.exp(),
                Err(_) => 0.0,
            }
        };
        let loads = self.system.load(&far, LoadQuadrature::Degree5);
        total += loads.iter().sum::<f64>();
        Ok(total)
    }

    /// Pointwise residual `R(x) = Delta_g W + lambda (V e^W / beta -
    /// 1/|S|)`, with `beta` passed in so sweeps can reuse it.
    pub fn residual_at(&self, x: &SurfacePoint, beta: f64) -> Result<f64> {
        let s = &self.cfg.config.surface;
        let lam = self.cfg.lambda;
        Ok(self.laplacian_w(x)?
            + lam * (s.potential.eval(x.coords) * self.w(x)?.exp() / beta - 1.0 / s.area))
    }
}

fn clamp_half(chart: &IsothermalChart, y: [f64; 2]) -> [f64; 2] {
    if chart.kind == crate::geometry::ChartKind::BoundaryHalfDisk {
        [y[0], y[1].max(0.0)]
    } else {
        y
    }
}

/// Solve for the remainder `eta_i` of one projected bubble; the bubble
/// profile itself never touches the mesh.
fn project_bubble_split(
    green: &GreenFunction,
    system: &Arc<NeumannSystem>,
    cfg: &BubbleConfig,
    i: usize,
) -> Result<ProjectedBubble> {
    let surface = &cfg.config.surface;
    let xi = &cfg.config.points[i];
    let chart = &cfg.charts[i];
    let rho_i = cfg.rho_i[i];
    let rho_w = cfg.rho_w[i];
    let r0 = cfg.r0;
    // the Green split must use the same cutoff as the ansatz
    let gamma_probe = {
        let probe_y = [1.5 * r0, 0.0];
        let p = chart.inverse(surface, probe_y)?;
        green.gamma(xi, &p)?
    };
    let expected = -(4.0 / rho_w) * cutoff::chi(1.5) * (1.5 * r0).ln();
    if (gamma_probe - expected).abs() > 1e-10 * (1.0 + expected.abs()) {
        return Err(Error::InvalidConfig(
            "Green cutoff scale differs from the ansatz cutoff r0; build the Green \
             function with cutoff_scale = r0 and charts large enough to hold it"
                .into(),
        ));
    }
    let mass = cutoff_bubble_mass(xi.tag, rho_i, r0)?;
    let area = surface.area;
    // -Delta eta = (rho_w - mass)/|S| - 2 (Delta_g chi) L - 4 <grad chi,
    // grad L>_g with L = log(1 + rho^2/|y|^2)
    let const_term = (rho_w - mass) / area;
    let rhs = |coords: [f64; 2]| -> f64 {
        let y = match chart.forward_coords(coords) {
            Ok(y) => y,
            Err(_) => return const_term,
        };
        let r = y[0].hypot(y[1]);
        if r <= r0 || r >= 2.0 * r0 {
            return const_term;
        }
        let phi = chart.conformal_factor(surface, y).unwrap_or(0.0);
        let l = (1.0 + rho_i * rho_i / (r * r)).ln();
        let lp = -2.0 * rho_i * rho_i / (r * (rho_i * rho_i + r * r));
        let lap_chi = cutoff::chi_d2(r / r0) / (r0 * r0) + cutoff::chi_d1(r / r0) / (r0 * r);
        let grad_term = cutoff::chi_d1(r / r0) / r0 * lp;
        const_term - (-phi).exp() * (2.0 * lap_chi * l + 4.0 * grad_term)
    };
    let load = system.load(&rhs, LoadQuadrature::Degree5);
    let mut eta = system.solve_neumann_meanzero(&load, true)?;
    // required mean: 2 int chi log(1 + rho^2/|y|^2) dv_g
    let region = Region::for_center(xi.tag, 2.0 * r0);
    let f = |y: [f64; 2]| {
        let r2 = y[0] * y[0] + y[1] * y[1];
        if r2 < 1e-28 {
            return 0.0;
        }
        let phi = chart.conformal_factor(surface, y).unwrap_or(f64::NAN);
        2.0 * cutoff::chi(r2.sqrt() / r0) * (1.0 + rho_i * rho_i / r2).ln() * phi.exp()
    };
    let (eta_mean, _) = integrate_chart(&f, region, &QuadratureRule::with_tol(1e-11, 1e-10))?;
    let shift = eta_mean / area;
    for v in eta.values.iter_mut() {
        *v += shift;
    }
    eta.mean_zero = false;
    let consts = expansion_constants(surface, chart, xi.tag, rho_w, r0, rho_i)?;
    Ok(ProjectedBubble {
        chart_index: i,
        rho_i,
        rho_w,
        r0,
        mass,
        h_const: consts.h,
        eta,
        eta_mean,
    })
}

/// The corrector `F_xi`: `-Delta F = f_xi`, zero Neumann data, zero mean,
/// with `f_xi = (1/|y|^2) Delta_g chi + 2 <grad chi, grad |y|^{-2}>_g +
/// (2/|S|) int (1/r0) chi' e^{-phi} |y|^{-3} dv_g`.
pub fn solve_corrector(
    system: &Arc<NeumannSystem>,
    cfg: &BubbleConfig,
    i: usize,
) -> Result<DiscreteField> {
    let surface = &cfg.config.surface;
    let xi = &cfg.config.points[i];
    let chart = &cfg.charts[i];
    let r0 = cfg.r0;
    let angle = match xi.tag {
        LocationTag::Interior => 2.0 * PI,
        LocationTag::Boundary => PI,
    };
    // plane integral: conformal factors cancel against dv_g
    let f = |s: f64| -> Result<f64> { Ok(cutoff::chi_d1(s / r0) / r0 * s.powf(-2.0)) };
    let (ring, _) = integrate_1d(&f, r0, 2.0 * r0, &QuadratureRule::default())?;
    let const_term = 2.0 / surface.area * angle * ring;
    let rhs = |coords: [f64; 2]| -> f64 {
        let y = match chart.forward_coords(coords) {
            Ok(y) => y,
            Err(_) => return const_term,
        };
        let r = y[0].hypot(y[1]);
        if r <= r0 || r >= 2.0 * r0 {
            return const_term;
        }
        let phi = chart.conformal_factor(surface, y).unwrap_or(0.0);
        let lap_chi = cutoff::chi_d2(r / r0) / (r0 * r0) + cutoff::chi_d1(r / r0) / (r0 * r);
        // 2 <grad chi, grad |y|^{-2}> = -4 chi' / (r0 r^3)
        let flat = lap_chi / (r * r) - 4.0 * cutoff::chi_d1(r / r0) / (r0 * r * r * r);
        const_term + (-phi).exp() * flat
    };
    let load = system.load(&rhs, LoadQuadrature::Degree5);
    // int f_xi = 0 analytically; the discrete defect is the O(h^2)
    // polygonal-domain error of the constant part, projected out below
    let defect: f64 = load.iter().sum();
    let scale: f64 = load.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
    if defect.abs() > 5e-3 * scale {
        return Err(Error::IncompatibleData(defect));
    }
    system.solve_neumann_meanzero(&load, true)
}

/// Direct FEM projection of the cutoff bubble (no splitting); requires the
/// mesh to resolve `rho_i` near the center.
pub fn project_bubble_direct(
    system: &Arc<NeumannSystem>,
    cfg: &BubbleConfig,
    i: usize,
) -> Result<DiscreteField> {
    let surface = &cfg.config.surface;
    let chart = &cfg.charts[i];
    let rho_i = cfg.rho_i[i];
    let r0 = cfg.r0;
    let local_h = core_mesh_size(system, cfg, i);
    if local_h > rho_i / 4.0 {
        return Err(Error::ScaleTooLarge { rho: local_h, limit: rho_i / 4.0 });
    }
    let w = |coords: [f64; 2]| -> f64 {
        let y = match chart.forward_coords(coords) {
            Ok(y) => y,
            Err(_) => return 0.0,
        };
        let r = y[0].hypot(y[1]);
        if r >= 2.0 * r0 {
            return 0.0;
        }
        let phi = chart.conformal_factor(surface, y).unwrap_or(0.0);
        let q = rho_i * rho_i + r * r;
        cutoff::chi(r / r0) * (-phi).exp() * 8.0 * rho_i * rho_i / (q * q)
    };
    let load = system.load(&w, LoadQuadrature::Adaptive { tol: 1e-11, max_depth: 10 });
    system.solve_neumann_meanzero(&load, true)
}

fn core_mesh_size(system: &Arc<NeumannSystem>, cfg: &BubbleConfig, i: usize) -> f64 {
    let mesh = &system.mesh;
    let center = cfg.config.points[i].coords;
    match mesh.locate(center) {
        Some((t, _)) => {
            let p = mesh.coords(t);
            let mut h: f64 = 0.0;
            for e in 0..3 {
                let l = (p[e][0] - p[(e + 1) % 3][0]).hypot(p[e][1] - p[(e + 1) % 3][1]);
                h = h.max(l);
            }
            h
        }
        None => f64::INFINITY,
    }
}

/// One kernel projection `PZ_ij` in split form.
pub struct KernelProjection {
    pub i: usize,
    pub j: usize,
    pub rho_i: f64,
    /// smooth remainder solved on the mesh
    pub eta: DiscreteField,
    /// additive constant making the total mean zero
    pub shift: f64,
}

/// Project `Z_ij(x) = z_j(y_{xi_i}(x) / rho_i)`; `j` ranges over
/// `0..=i(xi_i)` with `i(xi) = 2` interior, `1` boundary.
pub fn project_kernel(
    system: &Arc<NeumannSystem>,
    cfg: &BubbleConfig,
    i: usize,
    j: usize,
) -> Result<KernelProjection> {
    let xi = &cfg.config.points[i];
    let admitted = match xi.tag {
        LocationTag::Interior => 2,
        LocationTag::Boundary => 1,
    };
    if j > admitted {
        return Err(Error::KernelIndex { index: j, admitted });
    }
    let surface = &cfg.config.surface;
    let chart = &cfg.charts[i];
    let rho = cfg.rho_i[i];
    let r0 = cfg.r0;
    let region = Region::for_center(xi.tag, 2.0 * r0);
    // main profile: chi (Z + 2) for j = 0, chi Z for j >= 1
    // avg(chi Delta_g Z): plane integral of chi Delta_y Z
    let lap_z = move |y: [f64; 2]| -> f64 {
        let q = rho * rho + y[0] * y[0] + y[1] * y[1];
        let scaled = [y[0] / rho, y[1] / rho];
        -(8.0 * rho * rho / (q * q)) * kernel_z(j, scaled)
    };
    let avg = {
        let f = |y: [f64; 2]| cutoff::chi_scaled(y, r0) * lap_z(y);
        let (v, _) = integrate_chart(&f, region, &QuadratureRule::with_tol(1e-12, 1e-10))?;
        v / surface.area
    };
    // profile in the annulus and its gradient
    let profile = move |y: [f64; 2]| -> f64 {
        let q = rho * rho + y[0] * y[0] + y[1] * y[1];
        match j {
            0 => 4.0 * rho * rho / q,
            _ => 4.0 * rho * y[j - 1] / q,
        }
    };
    let grad_profile = move |y: [f64; 2]| -> [f64; 2] {
        let q = rho * rho + y[0] * y[0] + y[1] * y[1];
        match j {
            0 => {
                let c = -8.0 * rho * rho / (q * q);
                [c * y[0], c * y[1]]
            }
            _ => {
                let k = j - 1;
                let mut g = [
                    -8.0 * rho * y[k] * y[0] / (q * q),
                    -8.0 * rho * y[k] * y[1] / (q * q),
                ];
                g[k] += 4.0 * rho / q;
                g
            }
        }
    };
    let rhs = |coords: [f64; 2]| -> f64 {
        let y = match chart.forward_coords(coords) {
            Ok(y) => y,
            Err(_) => return avg,
        };
        let r = y[0].hypot(y[1]);
        if r <= r0 || r >= 2.0 * r0 {
            return avg;
        }
        let phi = chart.conformal_factor(surface, y).unwrap_or(0.0);
        let lap_chi = cutoff::chi_scaled_laplacian(y, r0);
        let gchi = cutoff::chi_scaled_grad(y, r0);
        let gz = grad_profile(y);
        avg + (-phi).exp() * (lap_chi * profile(y) + 2.0 * (gchi[0] * gz[0] + gchi[1] * gz[1]))
    };
    let load = system.load(&rhs, LoadQuadrature::Degree5);
    let eta = system.solve_neumann_meanzero(&load, true)?;
    // mean of the carried profile, to be subtracted from the total
    let mf = |y: [f64; 2]| {
        let phi = chart.conformal_factor(surface, y).unwrap_or(f64::NAN);
        cutoff::chi_scaled(y, r0)
            * (profile(y) - if j == 0 { 0.0 } else { 0.0 })
            * phi.exp()
    };
    let (profile_mean, _) = integrate_chart(&mf, region, &QuadratureRule::with_tol(1e-11, 1e-10))?;
    Ok(KernelProjection {
        i,
        j,
        rho_i: rho,
        eta,
        shift: -profile_mean / surface.area,
    })
}

impl KernelProjection {
    /// Evaluate `PZ_ij(x)` using the chart of its bubble.
    pub fn eval(&self, cfg: &BubbleConfig, x: &SurfacePoint) -> Result<f64> {
        let chart = &cfg.charts[self.i];
        let mut v = self.shift
            + self
                .eta
                .eval(x.coords)
                .ok_or_else(|| Error::MalformedPoint("x outside mesh".into()))?;
        if let Ok(y) = chart.forward(x) {
            let r = y[0].hypot(y[1]);
            if r < 2.0 * cfg.r0 {
                let q = self.rho_i * self.rho_i + r * r;
                v += cutoff::chi(r / cfg.r0)
                    * match self.j {
                        0 => 4.0 * self.rho_i * self.rho_i / q,
                        _ => 4.0 * self.rho_i * y[self.j - 1] / q,
                    };
            }
        }
        Ok(v)
    }
}

/// Dirichlet Gram matrix `<PZ_ij, PZ_lt>_g`, computed through the defining
/// identity `<PZ_ij, PZ_lt> = -int chi_i (Delta_g Z_ij) PZ_lt dv_g` by
/// chart quadrature (the kernels live on the bubble scale, which the mesh
/// does not resolve).
pub fn gram_pz(
    cfg: &BubbleConfig,
    projections: &[KernelProjection],
) -> Result<Vec<Vec<f64>>> {
    let n = projections.len();
    let mut gram = vec![vec![0.0; n]; n];
    for (a, pa) in projections.iter().enumerate() {
        let i = pa.i;
        let chart = &cfg.charts[i];
        let rho = pa.rho_i;
        let region = Region::for_center(cfg.config.points[i].tag, 2.0 * cfg.r0);
        for (b, pb) in projections.iter().enumerate() {
            if b < a {
                gram[a][b] = gram[b][a];
                continue;
            }
            let j = pa.j;
            let f = |y: [f64; 2]| -> f64 {
                let q = rho * rho + y[0] * y[0] + y[1] * y[1];
                let scaled = [y[0] / rho, y[1] / rho];
                let minus_lap = (8.0 * rho * rho / (q * q)) * kernel_z(j, scaled);
                let x = match chart.inverse(&cfg.config.surface, clamp_half(chart, y)) {
                    Ok(x) => x,
                    Err(_) => return f64::NAN,
                };
                let pz = match pb.eval(cfg, &x) {
                    Ok(v) => v,
                    Err(_) => return f64::NAN,
                };
                cutoff::chi_scaled(y, cfg.r0) * minus_lap * pz
            };
            let (v, _) = integrate_chart(&f, region, &QuadratureRule::with_tol(3e-7, 1e-7))?;
            gram[a][b] = v;
        }
    }
    Ok(gram)
}

/// The bubble-weighted supremum norm of a sampled function: `sup |h| /
/// weight` with `weight = sum_i rho_i^kappa (rho_i^2 + |y_i|^2 1_{U_r0} +
/// r0^2 1_else)^{-1-kappa/2}`, realized over mesh nodes plus rings around
/// each bubble.
pub fn star_norm<F: Fn(&SurfacePoint) -> Result<f64>>(
    h: &F,
    cfg: &BubbleConfig,
    params: &StarNormParams,
    mesh_nodes: &crate::fem::TriMesh,
) -> Result<f64> {
    let weight = |x: &SurfacePoint| -> f64 {
        let mut w = 0.0;
        for (i, chart) in cfg.charts.iter().enumerate() {
            let rho = cfg.rho_i[i];
            let inside = chart
                .forward(x)
                .ok()
                .map(|y| y[0].hypot(y[1]))
                .filter(|r| *r < params.r0);
            let base = match inside {
                Some(r) => rho * rho + r * r,
                None => rho * rho + params.r0 * params.r0,
            };
            w += rho.powf(params.kappa) * base.powf(-1.0 - params.kappa / 2.0);
        }
        w
    };
    let mut sup: f64 = 0.0;
    let mut check = |x: &SurfacePoint| -> Result<()> {
        let v = h(x)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand(x.coords[0], x.coords[1]));
        }
        sup = sup.max(v.abs() / weight(x));
        Ok(())
    };
    for idx in 0..mesh_nodes.n_nodes() {
        let p = mesh_nodes.node_point(idx)?;
        check(&p)?;
    }
    // ring samples at dyadic radii around each bubble
    for (i, chart) in cfg.charts.iter().enumerate() {
        let mut r = cfg.rho_i[i];
        let (a0, a1) = match cfg.config.points[i].tag {
            LocationTag::Interior => (0.0, 2.0 * PI),
            LocationTag::Boundary => (0.0, PI),
        };
        // include the center itself
        check(&cfg.config.points[i])?;
        while r < params.r0 {
            for k in 0..16 {
                let a = a0 + (a1 - a0) * k as f64 / 16.0;
                let y = [r * a.cos(), r * a.sin()];
                if let Ok(x) = chart.inverse(&cfg.config.surface, clamp_half(chart, y)) {
                    check(&x)?;
                }
            }
            r *= 2.0;
        }
    }
    Ok(sup)
}

/// Residual report: the weighted norm, the nodal residual field (weak
/// Laplacian over lumped mass) and the sample location of the maximum
/// weighted value.
pub struct ResidualReport {
    pub star_norm: f64,
    pub beta: f64,
    pub nodal: DiscreteField,
    pub max_location: [f64; 2],
}

/// The residual of `W` as an approximate solution at `lambda`.
pub fn residual(ansatz: &BubbleAnsatz, params: &StarNormParams) -> Result<ResidualReport> {
    let beta = ansatz.mass_integral()?;
    let cfg = &ansatz.cfg;
    let h = |x: &SurfacePoint| ansatz.residual_at(x, beta);
    let norm = star_norm(&h, cfg, params, &ansatz.system.mesh)?;
    // nodal functional version for export
    let mesh = ansatz.system.mesh.clone();
    let w_nodal = ansatz.w_field()?;
    let sw = ansatz.system.stiffness.matvec(&w_nodal.values);
    let surface = &cfg.config.surface;
    let mut nodal = vec![0.0; mesh.n_nodes()];
    let mut max_loc = [0.0, 0.0];
    let mut max_val = -1.0;
    for idx in 0..mesh.n_nodes() {
        let p = mesh.node_point(idx)?;
        let v = surface.potential.eval(p.coords);
        let f = -sw[idx]
            + cfg.lambda
                * (v * w_nodal.values[idx].exp() / beta - 1.0 / surface.area)
                * ansatz.system.mass_vector[idx];
        nodal[idx] = f / ansatz.system.mass_vector[idx].max(1e-300);
        let hv = h(&p)?.abs();
        if hv > max_val {
            max_val = hv;
            max_loc = p.coords;
        }
    }
    Ok(ResidualReport {
        star_norm: norm,
        beta,
        nodal: DiscreteField::new(mesh, nodal),
        max_location: max_loc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_functions_satisfy_linearized_equation() {
        // -Delta z = 8 z / (1 + |y|^2)^2 by finite differences
        let h = 1e-3;
        for j in 0..3 {
            for y in [[0.3, 0.2], [-0.7, 0.5], [1.2, -0.4]] {
                let lap = (kernel_z(j, [y[0] + h, y[1]])
                    + kernel_z(j, [y[0] - h, y[1]])
                    + kernel_z(j, [y[0], y[1] + h])
                    + kernel_z(j, [y[0], y[1] - h])
                    - 4.0 * kernel_z(j, y))
                    / (h * h);
                let q = 1.0 + y[0] * y[0] + y[1] * y[1];
                let rhs = 8.0 * kernel_z(j, y) / (q * q);
                assert!((-lap - rhs).abs() < 1e-5, "z_{j} residual {}", -lap - rhs);
            }
        }
    }

    #[test]
    fn bubble_mass_is_weight() {
        // int chi e^{U} -> rho_w as rho -> 0
        let m = cutoff_bubble_mass(LocationTag::Interior, 0.01, 0.2).unwrap();
        assert!((m - 8.0 * PI).abs() < 8.0 * PI * 0.01, "interior mass {m}");
        let mb = cutoff_bubble_mass(LocationTag::Boundary, 0.01, 0.2).unwrap();
        assert!((mb - 4.0 * PI).abs() < 4.0 * PI * 0.01, "boundary mass {mb}");
    }
}
