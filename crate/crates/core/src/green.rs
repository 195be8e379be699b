//! Green functions of the Neumann problem `-Delta_g G = delta_xi - 1/|S|`,
//! their regular parts `H = G + (4/rho_w) chi log|y_xi|` and Robin values
//! `R(xi) = H(xi, xi)`.
//!
//! Three backends: the method-of-images closed form on the unit disk, a
//! resummed Fourier/image series on the flat cylinder, and a finite-element
//! solve of the regular part on any catalog surface. The closed forms
//! double as oracles for the FEM path.

use crate::cutoff;
use crate::fem::{assemble, DiscreteField, LoadQuadrature, NeumannSystem, TriMesh};
use crate::geometry::{IsothermalChart, LocationTag, SurfaceKind, SurfaceModel, SurfacePoint};
use crate::quadrature::{integrate_chart, QuadratureRule, Region};
use crate::{Error, Result};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

/// Which evaluation path backs a [`GreenFunction`].
pub enum GreenBackend {
    DiskImages,
    CylinderSeries,
    Fem(Arc<NeumannSystem>),
}

struct CachedSource {
    chart: IsothermalChart,
    /// effective cutoff scale for this source (shrunk to fit the chart)
    c: f64,
    /// FEM regular part, normalized to `int H = (4/rho_w) int chi log|y|`.
    h_field: Option<DiscreteField>,
}

/// Evaluator for `G`, `H` and the Robin function on one surface.
pub struct GreenFunction {
    pub surface: SurfaceModel,
    pub backend: GreenBackend,
    /// Cutoff scale of the `Gamma` split: `chi_xi = chi(|y_xi| / scale)`,
    /// supported on `|y| <= 2 scale`.
    pub cutoff_scale: f64,
    cache: Mutex<HashMap<(i64, i64, bool), Arc<CachedSource>>>,
}

fn source_key(p: &SurfacePoint) -> (i64, i64, bool) {
    (
        (p.coords[0] * 1e12).round() as i64,
        (p.coords[1] * 1e12).round() as i64,
        p.is_boundary(),
    )
}

impl GreenFunction {
    /// Closed-form backend for the surface when one exists, FEM otherwise.
    pub fn oracle(surface: &SurfaceModel, cutoff_scale: f64) -> Result<GreenFunction> {
        let backend = match surface.kind {
            SurfaceKind::Disk => GreenBackend::DiskImages,
            SurfaceKind::Cylinder { .. } => GreenBackend::CylinderSeries,
            SurfaceKind::Cap { .. } => {
                return Err(Error::InvalidParameter(
                    "no closed-form Green backend for the cap; use the FEM backend".into(),
                ))
            }
        };
        Ok(GreenFunction {
            surface: surface.clone(),
            backend,
            cutoff_scale,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn fem(mesh: &Arc<TriMesh>, cutoff_scale: f64) -> Result<GreenFunction> {
        let system = Arc::new(assemble(mesh)?);
        Ok(GreenFunction {
            surface: mesh.surface.clone(),
            backend: GreenBackend::Fem(system),
            cutoff_scale,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn fem_from_system(system: Arc<NeumannSystem>, cutoff_scale: f64) -> GreenFunction {
        GreenFunction {
            surface: system.mesh.surface.clone(),
            backend: GreenBackend::Fem(system),
            cutoff_scale,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn cached_source(&self, xi: &SurfacePoint) -> Result<Arc<CachedSource>> {
        let key = source_key(xi);
        if let Some(c) = self.cache.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let chart = self.surface.chart_at(xi)?;
        // the split is chi-independent, so the cutoff may shrink per source
        // to fit inside the chart
        let c = self.cutoff_scale.min(0.45 * chart.radius);
        let h_field = match &self.backend {
            GreenBackend::Fem(system) => Some(self.solve_regular_part(system, xi, &chart, c)?),
            _ => None,
        };
        let cached = Arc::new(CachedSource { chart, c, h_field });
        self.cache.lock().unwrap().insert(key, cached.clone());
        Ok(cached)
    }

    /// `G(x, xi)`.
    pub fn eval(&self, x: &SurfacePoint, xi: &SurfacePoint) -> Result<f64> {
        if self.surface.point_distance(x, xi) < 1e-14 {
            return Err(Error::GreenSingularity);
        }
        match &self.backend {
            GreenBackend::DiskImages => Ok(disk_green(x.coords, xi.coords)),
            GreenBackend::CylinderSeries => {
                let length = match self.surface.kind {
                    SurfaceKind::Cylinder { length } => length,
                    _ => unreachable!(),
                };
                Ok(cylinder_green(length, x.coords, xi.coords))
            }
            GreenBackend::Fem(_) => {
                let src = self.cached_source(xi)?;
                let h = src
                    .h_field
                    .as_ref()
                    .unwrap()
                    .eval(x.coords)
                    .ok_or_else(|| Error::MalformedPoint("x outside mesh".into()))?;
                Ok(h + gamma_split(&self.surface, &src.chart, src.c, xi, x)?)
            }
        }
    }

    /// The singular split part `Gamma_xi(x) = -(4/rho_w) chi log|y_xi(x)|`
    /// with this source's effective cutoff.
    pub fn gamma(&self, xi: &SurfacePoint, x: &SurfacePoint) -> Result<f64> {
        let src = self.cached_source(xi)?;
        gamma_split(&self.surface, &src.chart, src.c, xi, x)
    }

    /// Regular part `H(x, xi)` (evaluator form; FEM interpolates its field).
    pub fn regular_part(&self, x: &SurfacePoint, xi: &SurfacePoint) -> Result<f64> {
        let src = self.cached_source(xi)?;
        if let Some(field) = &src.h_field {
            return field
                .eval(x.coords)
                .ok_or_else(|| Error::MalformedPoint("x outside mesh".into()));
        }
        if self.surface.point_distance(x, xi) < 1e-11 {
            return self.robin(xi);
        }
        Ok(self.eval(x, xi)? - gamma_split(&self.surface, &src.chart, src.c, xi, x)?)
    }

    /// Robin value `R(xi) = H(xi, xi)`.
    pub fn robin(&self, xi: &SurfacePoint) -> Result<f64> {
        match &self.backend {
            GreenBackend::DiskImages => Ok(disk_robin(xi)),
            GreenBackend::CylinderSeries => {
                let length = match self.surface.kind {
                    SurfaceKind::Cylinder { length } => length,
                    _ => unreachable!(),
                };
                Ok(cylinder_robin(length, xi))
            }
            GreenBackend::Fem(_) => {
                let src = self.cached_source(xi)?;
                src.h_field
                    .as_ref()
                    .unwrap()
                    .eval(xi.coords)
                    .ok_or_else(|| Error::MalformedPoint("xi outside mesh".into()))
            }
        }
    }

    /// Gradient of `G(x, .)` in the source, global coordinates. Closed-form
    /// backends differentiate analytically; the FEM backend uses central
    /// differences of cached regular parts (step 1e-4 in chart units,
    /// boundary sources move along the boundary only).
    pub fn grad_source(&self, x: &SurfacePoint, xi: &SurfacePoint) -> Result<[f64; 2]> {
        match &self.backend {
            GreenBackend::DiskImages => Ok(disk_green_grad_source(x.coords, xi.coords)),
            GreenBackend::CylinderSeries => {
                let length = match self.surface.kind {
                    SurfaceKind::Cylinder { length } => length,
                    _ => unreachable!(),
                };
                Ok(cylinder_green_grad_source(length, x.coords, xi.coords))
            }
            GreenBackend::Fem(_) => {
                let h = 1e-4;
                let mut grad = [0.0, 0.0];
                match xi.tag {
                    LocationTag::Interior => {
                        for d in 0..2 {
                            let mut cp = xi.coords;
                            cp[d] += h;
                            let xp = self.surface.interior_point(cp)?;
                            let mut cm = xi.coords;
                            cm[d] -= h;
                            let xm = self.surface.interior_point(cm)?;
                            grad[d] = (self.eval(x, &xp)? - self.eval(x, &xm)?) / (2.0 * h);
                        }
                    }
                    LocationTag::Boundary => {
                        let arc = xi.arc.unwrap_or(0.0);
                        let comp = self.boundary_component_of(xi);
                        let xp = self.surface.boundary_point(comp, arc + h)?;
                        let xm = self.surface.boundary_point(comp, arc - h)?;
                        let da = (self.eval(x, &xp)? - self.eval(x, &xm)?) / (2.0 * h);
                        // tangential direction in global coordinates
                        let t = [
                            (xp.coords[0] - xm.coords[0]) / (2.0 * h),
                            (xp.coords[1] - xm.coords[1]) / (2.0 * h),
                        ];
                        let n2 = (t[0] * t[0] + t[1] * t[1]).max(1e-300);
                        grad = [da * t[0] / n2, da * t[1] / n2];
                    }
                }
                Ok(grad)
            }
        }
    }

    pub fn boundary_component_of(&self, p: &SurfacePoint) -> usize {
        match self.surface.kind {
            SurfaceKind::Cylinder { length } => {
                if p.coords[0] < length / 2.0 {
                    0
                } else {
                    1
                }
            }
            _ => 0,
        }
    }

    /// The normalization `int H` required by the construction,
    /// `(4/rho_w) int chi log|y_xi| dv_g`. With this normalization
    /// `int G = 0` holds automatically.
    pub fn h_mean_target(&self, xi: &SurfacePoint) -> Result<f64> {
        let src = self.cached_source(xi)?;
        self.h_mean_target_with_chart(xi, &src.chart, src.c)
    }

    fn h_mean_target_with_chart(
        &self,
        xi: &SurfacePoint,
        chart: &IsothermalChart,
        c: f64,
    ) -> Result<f64> {
        let rho_w = crate::geometry::rho_weight(&self.surface, xi)?;
        let region = Region::for_center(xi.tag, 2.0 * c);
        let phi = |y: [f64; 2]| chart.conformal_factor(&self.surface, y).unwrap_or(f64::NAN);
        let f = |y: [f64; 2]| {
            let r = y[0].hypot(y[1]);
            if r < 1e-300 {
                return 0.0;
            }
            cutoff::chi(r / c) * r.ln() * phi(y).exp()
        };
        let (v, _) = integrate_chart(&f, region, &QuadratureRule::default())?;
        Ok((4.0 / rho_w) * v)
    }

    fn solve_regular_part(
        &self,
        system: &Arc<NeumannSystem>,
        xi: &SurfacePoint,
        chart: &IsothermalChart,
        c: f64,
    ) -> Result<DiscreteField> {
        let rho_w = crate::geometry::rho_weight(&self.surface, xi)?;
        let area = self.surface.area;
        // Delta_g H = (4/rho_w)(Delta_g chi) log|y| + (8/rho_w)<grad chi,
        // grad log|y|>_g + 1/|S|; the Neumann data vanishes identically in
        // the refined chart. We solve -Delta_g H = -RHS.
        let rhs_fn = |coords: [f64; 2]| -> f64 {
            let base = 1.0 / area;
            let y = match chart.forward_coords(coords) {
                Ok(y) => y,
                Err(_) => return -base,
            };
            let r = y[0].hypot(y[1]);
            if r >= 2.0 * c || r < 1e-14 {
                return -base;
            }
            let phi = chart.conformal_factor(&self.surface, y).unwrap_or(0.0);
            let lap_chi = cutoff::chi_d2(r / c) / (c * c) + cutoff::chi_d1(r / c) / (c * r);
            let cross = cutoff::chi_d1(r / c) / (c * r);
            let flat = lap_chi * r.ln() + 2.0 * cross;
            -(base + (4.0 / rho_w) * (-phi).exp() * flat)
        };
        let load = system.load(&rhs_fn, LoadQuadrature::Degree5);
        let mut h = system.solve_neumann_meanzero(&load, true)?;
        // the solve returns the mean-zero representative; shift it so that
        // int H = (4/rho_w) int chi log|y| (which makes int G = 0)
        let target = self.h_mean_target_with_chart(xi, chart, c)?;
        let shift = target / area;
        for v in h.values.iter_mut() {
            *v += shift;
        }
        h.mean_zero = false;
        Ok(h)
    }
}

fn gamma_split(
    surface: &SurfaceModel,
    chart: &IsothermalChart,
    c: f64,
    xi: &SurfacePoint,
    x: &SurfacePoint,
) -> Result<f64> {
    let rho_w = crate::geometry::rho_weight(surface, xi)?;
    match chart.forward(x) {
        Ok(y) => {
            let r = y[0].hypot(y[1]);
            if r >= 2.0 * c {
                return Ok(0.0);
            }
            if r < 1e-300 {
                return Err(Error::GreenSingularity);
            }
            Ok(-(4.0 / rho_w) * cutoff::chi(r / c) * r.ln())
        }
        Err(_) => Ok(0.0),
    }
}

// ---------------------------------------------------------------------------
// unit disk: method of images
// ---------------------------------------------------------------------------

/// Neumann Green function of the unit disk with background `-1/pi`,
/// zero flux and zero mean:
/// `G = -(1/2pi)[log|x-xi| + log| |xi| x - xi/|xi| |] + (|x|^2+|xi|^2)/4pi - 3/8pi`.
pub fn disk_green(x: [f64; 2], xi: [f64; 2]) -> f64 {
    let dx = [x[0] - xi[0], x[1] - xi[1]];
    let d = dx[0].hypot(dx[1]);
    let rxi = xi[0].hypot(xi[1]);
    let image = if rxi < 1e-14 {
        1.0
    } else {
        let q = [rxi * x[0] - xi[0] / rxi, rxi * x[1] - xi[1] / rxi];
        q[0].hypot(q[1])
    };
    -(d.ln() + image.ln()) / (2.0 * PI)
        + (x[0] * x[0] + x[1] * x[1] + xi[0] * xi[0] + xi[1] * xi[1]) / (4.0 * PI)
        - 3.0 / (8.0 * PI)
}

/// Source gradient of [`disk_green`] in global coordinates.
pub fn disk_green_grad_source(x: [f64; 2], xi: [f64; 2]) -> [f64; 2] {
    let dx = [x[0] - xi[0], x[1] - xi[1]];
    let d2 = dx[0] * dx[0] + dx[1] * dx[1];
    let x2 = x[0] * x[0] + x[1] * x[1];
    let q2 = {
        let rxi2 = xi[0] * xi[0] + xi[1] * xi[1];
        rxi2 * x2 - 2.0 * (x[0] * xi[0] + x[1] * xi[1]) + 1.0
    };
    let mut g = [0.0; 2];
    for k in 0..2 {
        let d_log_d = (xi[k] - x[k]) / d2;
        let d_log_image = (xi[k] * x2 - x[k]) / q2;
        g[k] = -(d_log_d + d_log_image) / (2.0 * PI) + xi[k] / (2.0 * PI);
    }
    g
}

/// Robin function of the disk: interior
/// `R = -(1/2pi) log(1-|xi|^2) + |xi|^2/2pi - 3/8pi`; boundary `R = 1/8pi`.
pub fn disk_robin(xi: &SurfacePoint) -> f64 {
    match xi.tag {
        LocationTag::Interior => {
            let r2 = xi.coords[0] * xi.coords[0] + xi.coords[1] * xi.coords[1];
            -((1.0 - r2).ln()) / (2.0 * PI) + r2 / (2.0 * PI) - 3.0 / (8.0 * PI)
        }
        LocationTag::Boundary => 1.0 / (8.0 * PI),
    }
}

// ---------------------------------------------------------------------------
// flat cylinder [0, L] x (R / 2 pi Z): resummed image series
// ---------------------------------------------------------------------------

/// `M(d, sigma) = sum_k e^{-kd} cos(k sigma) / k
///             = -(1/2) log(1 - 2 e^{-d} cos sigma + e^{-2d})`.
fn m_kernel(d: f64, sigma: f64) -> f64 {
    let e = (-d).exp();
    -0.5 * (1.0 - 2.0 * e * sigma.cos() + e * e).ln()
}

/// Image distances of the cylinder Green function: the four families
/// `{a, b, 2L-a, 2L-b} + 2nL` with `a = |t-t0|`, `b = t+t0`.
fn cylinder_images(length: f64, t: f64, t0: f64) -> Vec<f64> {
    let a = (t - t0).abs();
    let b = t + t0;
    let mut out = Vec::new();
    let mut shift = 0.0;
    while shift < 40.0 {
        for d in [a + shift, b + shift, 2.0 * length - a + shift, 2.0 * length - b + shift] {
            out.push(d);
        }
        shift += 2.0 * length;
    }
    out
}

fn cylinder_mode0(length: f64, t: f64, t0: f64) -> f64 {
    let c0 = -(length * length / 6.0 - (length - t0) * (length - t0) / 2.0) / length;
    (t * t / (2.0 * length) - (t - t0).max(0.0) + c0) / (2.0 * PI)
}

pub fn cylinder_green(length: f64, x: [f64; 2], xi: [f64; 2]) -> f64 {
    let (t, s) = (x[0], x[1]);
    let (t0, s0) = (xi[0], xi[1]);
    let sigma = s - s0;
    let mut g = cylinder_mode0(length, t, t0);
    for d in cylinder_images(length, t, t0) {
        g += m_kernel(d, sigma) / (2.0 * PI);
    }
    g
}

pub fn cylinder_green_grad_source(length: f64, x: [f64; 2], xi: [f64; 2]) -> [f64; 2] {
    let (t, s) = (x[0], x[1]);
    let (t0, s0) = (xi[0], xi[1]);
    let sigma = s - s0;
    // mode-0 part
    let mut gt0 = (if t > t0 { 1.0 } else { 0.0 } - (length - t0) / length) / (2.0 * PI);
    let mut gs0 = 0.0;
    let a = (t - t0).abs();
    let sa = if t >= t0 { -1.0 } else { 1.0 }; // da/dt0
    let mut shift = 0.0;
    while shift < 40.0 {
        // (distance, d(distance)/dt0)
        for (d, dd) in [
            (a + shift, sa),
            (t + t0 + shift, 1.0),
            (2.0 * length - a + shift, -sa),
            (2.0 * length - (t + t0) + shift, -1.0),
        ] {
            let e = (-d).exp();
            let en = 1.0 - 2.0 * e * sigma.cos() + e * e;
            let dm_dd = -0.5 * (2.0 * e * sigma.cos() - 2.0 * e * e) / en;
            let dm_dsigma = -0.5 * (2.0 * e * sigma.sin()) / en;
            gt0 += dm_dd * dd / (2.0 * PI);
            gs0 += dm_dsigma * (-1.0) / (2.0 * PI);
        }
        shift += 2.0 * length;
    }
    [gt0, gs0]
}

pub fn cylinder_robin(length: f64, xi: &SurfacePoint) -> f64 {
    let t0 = xi.coords[0];
    let mut r = cylinder_mode0(length, t0, t0);
    match xi.tag {
        LocationTag::Interior => {
            // skip the n = 0 term of the a-family (its renormalized limit
            // vanishes in the translation chart)
            let mut shift = 0.0;
            let mut first = true;
            while shift < 40.0 {
                if !first {
                    r += m_kernel(shift, 0.0) / (2.0 * PI);
                }
                r += m_kernel(2.0 * t0 + shift, 0.0) / (2.0 * PI);
                r += m_kernel(2.0 * length - 2.0 * t0 + shift, 0.0) / (2.0 * PI);
                r += m_kernel(2.0 * length + shift, 0.0) / (2.0 * PI);
                first = false;
                shift += 2.0 * length;
            }
            r
        }
        LocationTag::Boundary => {
            // both singular families renormalize to zero; all four families
            // collapse onto distances 2nL, n >= 1, each counted once
            let mut shift = 2.0 * length;
            while shift < 40.0 {
                r += 4.0 * m_kernel(shift, 0.0) / (2.0 * PI);
                shift += 2.0 * length;
            }
            r
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surface_catalog;
    use std::collections::BTreeMap;

    fn disk() -> SurfaceModel {
        surface_catalog("disk", &BTreeMap::new()).unwrap()
    }

    fn cylinder(l: f64) -> SurfaceModel {
        let mut p = BTreeMap::new();
        p.insert("L".to_string(), l);
        surface_catalog("cylinder", &p).unwrap()
    }

    #[test]
    fn disk_center_value() {
        // G((1/2, 0), 0) = -(1/2pi) ln(1/2) + 1/(16 pi) - 3/(8 pi)
        let g = disk_green([0.5, 0.0], [0.0, 0.0]);
        let expect = -(0.5f64).ln() / (2.0 * PI) + 1.0 / (16.0 * PI) - 3.0 / (8.0 * PI);
        assert!((g - expect).abs() < 1e-14, "{g} vs {expect}");
        assert!((expect - 0.010846).abs() < 1e-5);
    }

    #[test]
    fn disk_pde_flux_mean() {
        // -Delta G = -1/pi away from the source (5-point stencil at step
        // 1e-3, one Richardson pass)
        for (x, xi) in [([0.3, 0.2], [0.0, 0.0]), ([0.1, -0.4], [0.35, 0.1])] {
            let stencil = |h: f64| {
                (disk_green([x[0] + h, x[1]], xi)
                    + disk_green([x[0] - h, x[1]], xi)
                    + disk_green([x[0], x[1] + h], xi)
                    + disk_green([x[0], x[1] - h], xi)
                    - 4.0 * disk_green(x, xi))
                    / (h * h)
            };
            let lap = (4.0 * stencil(5e-4) - stencil(1e-3)) / 3.0;
            assert!((-lap + 1.0 / PI).abs() < 1e-6, "Delta residual {}", -lap - (-1.0 / PI));
        }
        // boundary flux at 100 samples
        for k in 0..100 {
            let a = 2.0 * PI * k as f64 / 100.0;
            let xb = [a.cos(), a.sin()];
            let xi = [0.3, -0.1];
            let hr = 1e-4;
            let inner = [(1.0 - hr) * xb[0], (1.0 - hr) * xb[1]];
            let inner2 = [(1.0 - 2.0 * hr) * xb[0], (1.0 - 2.0 * hr) * xb[1]];
            // one-sided derivative along the outward radial direction
            let flux = (3.0 * disk_green(xb, xi) - 4.0 * disk_green(inner, xi)
                + disk_green(inner2, xi))
                / (2.0 * hr);
            assert!(flux.abs() < 1e-6, "flux {flux} at angle {a}");
        }
        // zero mean by quadrature
        let xi = [0.25, 0.15];
        let f = |y: [f64; 2]| disk_green(y, xi);
        let (v, _) = integrate_chart(&f, Region::Disk(1.0), &QuadratureRule::with_tol(1e-10, 1e-9))
            .unwrap();
        assert!(v.abs() < 1e-7, "mean {v}");
    }

    #[test]
    fn disk_symmetry() {
        let mut state = 0x12345678u64;
        let mut rng = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let x = [0.9 * (rng() - 0.5), 0.9 * (rng() - 0.5)];
            let xi = [0.9 * (rng() - 0.5), 0.9 * (rng() - 0.5)];
            if (x[0] - xi[0]).hypot(x[1] - xi[1]) < 0.05 {
                continue;
            }
            let a = disk_green(x, xi);
            let b = disk_green(xi, x);
            assert!((a - b).abs() < 1e-12, "symmetry {a} vs {b}");
        }
    }

    #[test]
    fn disk_robin_values() {
        let d = disk();
        let center = d.interior_point([0.0, 0.0]).unwrap();
        assert!((disk_robin(&center) + 3.0 / (8.0 * PI)).abs() < 1e-15);
        // rotation invariance
        let a = d.interior_point([0.4, 0.0]).unwrap();
        let b = d.interior_point([0.0, 0.4]).unwrap();
        assert!((disk_robin(&a) - disk_robin(&b)).abs() < 1e-14);
        // consistency with the x -> xi limit of G + (1/2pi) log|x-xi|
        let xi = [0.3, 0.1];
        let eps = 1e-6;
        let x = [xi[0] + eps, xi[1]];
        let lim = disk_green(x, xi) + (eps).ln() / (2.0 * PI);
        let rx = disk_robin(&d.interior_point(xi).unwrap());
        assert!((lim - rx).abs() < 1e-5, "{lim} vs {rx}");
    }

    #[test]
    fn disk_grad_source_matches_fd() {
        let x = [0.5, -0.2];
        let xi = [0.1, 0.3];
        let g = disk_green_grad_source(x, xi);
        let h = 1e-6;
        for k in 0..2 {
            let mut p = xi;
            p[k] += h;
            let mut m = xi;
            m[k] -= h;
            let fd = (disk_green(x, p) - disk_green(x, m)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "component {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn cylinder_pde_and_symmetry() {
        let length = 2.0;
        let xi = [0.7, 1.3];
        let h = 1e-3;
        for x in [[1.2, 2.0], [0.3, 0.5], [1.9, 4.0]] {
            let lap = (cylinder_green(length, [x[0] + h, x[1]], xi)
                + cylinder_green(length, [x[0] - h, x[1]], xi)
                + cylinder_green(length, [x[0], x[1] + h], xi)
                + cylinder_green(length, [x[0], x[1] - h], xi)
                - 4.0 * cylinder_green(length, x, xi))
                / (h * h);
            let background = 1.0 / (4.0 * PI);
            assert!((-lap + background).abs() < 1e-6, "residual {}", -lap - (-background));
        }
        for (x, y) in [([1.2, 2.0], [0.7, 1.3]), ([0.2, 0.1], [1.5, 3.0])] {
            let a = cylinder_green(length, x, y);
            let b = cylinder_green(length, y, x);
            assert!((a - b).abs() < 1e-12, "cylinder symmetry {a} vs {b}");
        }
        // Neumann flux at t = 0
        let flux = (cylinder_green(length, [2e-4, 2.0], xi)
            - cylinder_green(length, [0.0, 2.0], xi))
            / 2e-4;
        assert!(flux.abs() < 1e-5, "cylinder flux {flux}");
        // zero mean: the oscillatory modes have exact zero s-average, so
        // the s-average must match the mode-0 profile, whose t-integral
        // vanishes by the choice of additive constant
        for t in [0.25, 1.1, 1.8] {
            let g = |s: f64| -> crate::Result<f64> { Ok(cylinder_green(length, [t, s], xi)) };
            let (avg, _) = crate::quadrature::integrate_1d(
                &g,
                0.0,
                2.0 * PI,
                &QuadratureRule::with_tol(1e-10, 1e-10),
            )
            .unwrap();
            let mode0 = cylinder_mode0(length, t, xi[0]);
            assert!(
                (avg / (2.0 * PI) - mode0).abs() < 1e-9,
                "s-average {} vs mode0 {mode0}",
                avg / (2.0 * PI)
            );
        }
        let f = |t: f64| -> crate::Result<f64> { Ok(cylinder_mode0(length, t, xi[0])) };
        let (total, _) =
            crate::quadrature::integrate_1d(&f, 0.0, length, &QuadratureRule::with_tol(1e-12, 1e-12))
                .unwrap();
        assert!(total.abs() < 1e-10, "mode-0 integral {total}");
    }

    #[test]
    fn cylinder_robin_consistent_with_limit() {
        let length = 2.0;
        let c = cylinder(length);
        let xi = c.interior_point([0.8, 1.0]).unwrap();
        let r = cylinder_robin(length, &xi);
        let eps = 1e-6;
        let lim = cylinder_green(length, [0.8 + eps, 1.0], xi.coords) + eps.ln() / (2.0 * PI);
        assert!((r - lim).abs() < 1e-5, "robin {r} vs limit {lim}");

        let xb = c.boundary_point(0, 1.0).unwrap();
        let rb = cylinder_robin(length, &xb);
        let limb = cylinder_green(length, [eps, 1.0], xb.coords) + eps.ln() / PI;
        assert!((rb - limb).abs() < 1e-4, "boundary robin {rb} vs limit {limb}");
    }

    #[test]
    fn cylinder_grad_source_matches_fd() {
        let length = 2.0;
        let x = [1.2, 2.4];
        let xi = [0.6, 1.1];
        let g = cylinder_green_grad_source(length, x, xi);
        let h = 1e-6;
        for k in 0..2 {
            let mut p = xi;
            p[k] += h;
            let mut m = xi;
            m[k] -= h;
            let fd =
                (cylinder_green(length, x, p) - cylinder_green(length, x, m)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "component {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn oracle_interface_and_singularity() {
        let d = disk();
        let gf = GreenFunction::oracle(&d, 0.2).unwrap();
        let xi = d.interior_point([0.0, 0.0]).unwrap();
        let x = d.interior_point([0.5, 0.0]).unwrap();
        assert!((gf.eval(&x, &xi).unwrap() - 0.010846).abs() < 1e-5);
        assert!(matches!(gf.eval(&xi, &xi), Err(Error::GreenSingularity)));
        assert!((gf.robin(&xi).unwrap() + 3.0 / (8.0 * PI)).abs() < 1e-14);
        // H is continuous through the cutoff region and H(xi,xi) = R
        let hnear = gf
            .regular_part(&d.interior_point([1e-7, 0.0]).unwrap(), &xi)
            .unwrap();
        assert!((hnear - gf.robin(&xi).unwrap()).abs() < 1e-5);
    }
}
