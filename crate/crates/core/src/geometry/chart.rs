//! Refined isothermal charts. Each chart is a closed-form conformal map
//! from the global coordinate patch onto a disk (interior center) or half
//! disk (boundary center), normalized so that
//!
//! * `phi(0) = 0`,
//! * `grad phi(0) = 0` for interior centers,
//! * `grad phi(0) = (0, -2 k_g)` for boundary centers,
//!
//! where `phi` is the conformal factor of the chart. Normalization is done
//! by composing a base map with the polynomial `T(w) = B w + c w^2`, which
//! is holomorphic (hence conformal where `T' != 0`). For boundary centers
//! `B` and `c` stay real so the boundary line is preserved.

use super::surface::{LocationTag, SurfaceKind, SurfaceModel, SurfacePoint};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

type C64 = Complex64;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ChartKind {
    InteriorDisk,
    BoundaryHalfDisk,
}

/// Closed-form conformal maps from global coordinates to a plane
/// neighborhood of a chosen anchor. Boundary variants flatten the boundary
/// onto `{Im w = 0}` with the interior going to `{Im w > 0}`.
#[derive(Clone, Debug)]
enum BaseMap {
    /// `w = R (x - c)`, `R` a plane isometry; flat surfaces. The optional
    /// period applies to the second coordinate difference (cylinder).
    FlatRigid { center: [f64; 2], rot: [[f64; 2]; 2], wrap_second: bool },
    /// Unit-disk boundary flattening at angle alpha:
    /// `w = 2 i (1 - z e^{-i alpha}) / (1 + z e^{-i alpha})`.
    DiskMobius { alpha: f64 },
    /// Cap interior: stereographic translation `w = p - p0`.
    CapShift { p0: [f64; 2] },
    /// Cap boundary flattening at angle alpha with patch radius `r0`:
    /// `w = kappa i (r0 - p e^{-i alpha}) / (r0 + p e^{-i alpha})`,
    /// `kappa = 4 r0 / (1 + r0^2)`.
    CapMobius { alpha: f64, r0: f64 },
}

impl BaseMap {
    fn forward(&self, coords: [f64; 2]) -> Option<C64> {
        match self {
            BaseMap::FlatRigid { center, rot, wrap_second } => {
                let mut d = [coords[0] - center[0], coords[1] - center[1]];
                if *wrap_second {
                    d[1] = d[1].rem_euclid(2.0 * PI);
                    if d[1] > PI {
                        d[1] -= 2.0 * PI;
                    }
                }
                Some(C64::new(
                    rot[0][0] * d[0] + rot[0][1] * d[1],
                    rot[1][0] * d[0] + rot[1][1] * d[1],
                ))
            }
            BaseMap::DiskMobius { alpha } => {
                let z = C64::new(coords[0], coords[1]) * C64::from_polar(1.0, -alpha);
                let den = 1.0 + z;
                if den.norm() < 1e-14 {
                    return None;
                }
                Some(C64::new(0.0, 2.0) * (1.0 - z) / den)
            }
            BaseMap::CapShift { p0 } => {
                Some(C64::new(coords[0] - p0[0], coords[1] - p0[1]))
            }
            BaseMap::CapMobius { alpha, r0 } => {
                let p = C64::new(coords[0], coords[1]) * C64::from_polar(1.0, -alpha);
                let den = r0 + p;
                if den.norm() < 1e-14 {
                    return None;
                }
                let kappa = 4.0 * r0 / (1.0 + r0 * r0);
                Some(C64::new(0.0, kappa) * (r0 - p) / den)
            }
        }
    }

    fn inverse(&self, w: C64) -> Option<[f64; 2]> {
        match self {
            BaseMap::FlatRigid { center, rot, .. } => {
                // rot is orthogonal: inverse = transpose
                let d = [
                    rot[0][0] * w.re + rot[1][0] * w.im,
                    rot[0][1] * w.re + rot[1][1] * w.im,
                ];
                Some([center[0] + d[0], center[1] + d[1]])
            }
            BaseMap::DiskMobius { alpha } => {
                let two_i = C64::new(0.0, 2.0);
                let den = two_i + w;
                if den.norm() < 1e-14 {
                    return None;
                }
                let z = C64::from_polar(1.0, *alpha) * (two_i - w) / den;
                Some([z.re, z.im])
            }
            BaseMap::CapShift { p0 } => Some([w.re + p0[0], w.im + p0[1]]),
            BaseMap::CapMobius { alpha, r0 } => {
                let kappa = 4.0 * r0 / (1.0 + r0 * r0);
                let ki = C64::new(0.0, kappa);
                let den = ki + w;
                if den.norm() < 1e-14 {
                    return None;
                }
                let p = r0 * (ki - w) / den * C64::from_polar(1.0, *alpha);
                Some([p.re, p.im])
            }
        }
    }

    /// Conformal factor of the base chart as a function of w, i.e. the
    /// metric is `e^{phi_b(w)} |dw|^2`.
    fn phi(&self, surface: &SurfaceModel, w: C64) -> f64 {
        match self {
            BaseMap::FlatRigid { .. } => 0.0,
            BaseMap::DiskMobius { .. } => 2.0 * (4.0f64).ln() - 4.0 * (C64::new(0.0, 2.0) + w).norm().ln(),
            BaseMap::CapShift { p0 } => {
                let p = [w.re + p0[0], w.im + p0[1]];
                surface.conformal_factor(p)
            }
            BaseMap::CapMobius { alpha, r0 } => {
                let kappa = 4.0 * r0 / (1.0 + r0 * r0);
                let ki = C64::new(0.0, kappa);
                let den = ki + w;
                let pp = r0 * (ki - w) / den;
                let _ = alpha; // |p| is rotation invariant
                (4.0f64).ln() - 2.0 * (1.0 + pp.norm_sqr()).ln()
                    + 2.0 * (2.0 * kappa * r0).ln()
                    - 4.0 * den.norm().ln()
            }
        }
    }

    /// Gradient of phi_b as the complex number `d1 phi + i d2 phi`.
    fn phi_grad(&self, surface: &SurfaceModel, w: C64) -> C64 {
        match self {
            BaseMap::FlatRigid { .. } => C64::new(0.0, 0.0),
            BaseMap::DiskMobius { .. } => {
                let q = C64::new(0.0, 2.0) + w;
                -4.0 * q / q.norm_sqr()
            }
            BaseMap::CapShift { p0 } => {
                let _ = surface;
                let p = C64::new(w.re + p0[0], w.im + p0[1]);
                -4.0 * p / (1.0 + p.norm_sqr())
            }
            BaseMap::CapMobius { r0, .. } => {
                let kappa = 4.0 * r0 / (1.0 + r0 * r0);
                let ki = C64::new(0.0, kappa);
                let den = ki + w;
                let pp = r0 * (ki - w) / den;
                let dpp = -2.0 * ki * r0 / (den * den);
                // phi = const - 2 log(1 + |pp|^2) - 4 log|den|
                let g1 = dpp.conj() * (-4.0 * pp / (1.0 + pp.norm_sqr()));
                let g2 = (-4.0 / den).conj();
                g1 + g2
            }
        }
    }

    fn kind(&self) -> ChartKind {
        match self {
            BaseMap::FlatRigid { rot, .. } => {
                // boundary variants carry a reflection/rotation that sends
                // the boundary tangent to the first axis; interior ones are
                // the identity. Tag is stored on the chart instead.
                let _ = rot;
                ChartKind::InteriorDisk
            }
            BaseMap::DiskMobius { .. } | BaseMap::CapMobius { .. } => ChartKind::BoundaryHalfDisk,
            BaseMap::CapShift { .. } => ChartKind::InteriorDisk,
        }
    }
}

/// A refined isothermal chart around `center`.
#[derive(Clone, Debug)]
pub struct IsothermalChart {
    pub center: SurfacePoint,
    pub kind: ChartKind,
    /// The chart map is a diffeomorphism on `{|y| < radius}` (intersected
    /// with the upper half plane for boundary charts).
    pub radius: f64,
    surface_kind: SurfaceKind,
    base: BaseMap,
    /// Base coordinates of the center, `y0 = base(center)`.
    y0: C64,
    /// Refinement `T(u) = B u + c u^2` applied to `u = base(x) - y0`.
    b: C64,
    c: C64,
}

impl IsothermalChart {
    /// Chart coordinates of a surface point.
    pub fn forward(&self, x: &SurfacePoint) -> Result<[f64; 2]> {
        self.forward_coords(x.coords)
    }

    /// Chart coordinates from global coordinates.
    pub fn forward_coords(&self, coords: [f64; 2]) -> Result<[f64; 2]> {
        let w = self.base.forward(coords).ok_or(Error::DegenerateChart(
            "point at the base map pole".into(),
        ))?;
        let u = w - self.y0;
        let y = self.b * u + self.c * u * u;
        Ok([y.re, y.im])
    }

    /// Global coordinates from chart coordinates (Newton on the quadratic).
    pub fn inverse_coords(&self, y: [f64; 2]) -> Result<[f64; 2]> {
        let target = C64::new(y[0], y[1]);
        let r = target.norm();
        if r > self.radius * (1.0 + 1e-9) {
            return Err(Error::ChartDomain { radius_requested: r, radius: self.radius });
        }
        let mut u = target / self.b;
        for _ in 0..40 {
            let f = self.b * u + self.c * u * u - target;
            let df = self.b + 2.0 * self.c * u;
            if df.norm() < 1e-14 {
                return Err(Error::DegenerateChart("T' vanished during inversion".into()));
            }
            let step = f / df;
            u -= step;
            if step.norm() < 1e-15 * (1.0 + u.norm()) {
                break;
            }
        }
        let w = self.y0 + u;
        self.base
            .inverse(w)
            .ok_or(Error::DegenerateChart("base map inverse pole".into()))
    }

    /// Map chart coordinates back to a classified surface point.
    pub fn inverse(&self, surface: &SurfaceModel, y: [f64; 2]) -> Result<SurfacePoint> {
        let coords = self.inverse_coords(y)?;
        let coords = surface.normalize_coords(coords);
        let near_boundary = self.kind == ChartKind::BoundaryHalfDisk && y[1].abs() < 1e-12;
        if near_boundary {
            surface.classify(coords, 1e-9)
        } else {
            surface.interior_point(coords).or_else(|_| surface.classify(coords, 1e-9))
        }
    }

    /// Conformal factor of the chart at chart coordinates y.
    pub fn conformal_factor(&self, surface: &SurfaceModel, y: [f64; 2]) -> Result<f64> {
        let target = C64::new(y[0], y[1]);
        let mut u = target / self.b;
        for _ in 0..40 {
            let f = self.b * u + self.c * u * u - target;
            let df = self.b + 2.0 * self.c * u;
            if df.norm() < 1e-14 {
                return Err(Error::DegenerateChart("T' vanished".into()));
            }
            let step = f / df;
            u -= step;
            if step.norm() < 1e-15 * (1.0 + u.norm()) {
                break;
            }
        }
        let w = self.y0 + u;
        let tp = self.b + 2.0 * self.c * u;
        Ok(self.base.phi(surface, w) - 2.0 * tp.norm().ln())
    }

    /// |y_xi(x)| for a surface point, the chart distance to the center.
    pub fn chart_norm(&self, x: &SurfacePoint) -> Result<f64> {
        let y = self.forward(x)?;
        Ok(y[0].hypot(y[1]))
    }
}

/// Build the refined chart at `xi` from a base chart anchored nearby. For
/// catalog surfaces the base chart is synthesized internally, so routine
/// callers use [`SurfaceModel::refined_chart_at`]-style construction via
/// this function with `theta = 0`.
pub fn refined_chart(
    surface: &SurfaceModel,
    xi: &SurfacePoint,
    theta: f64,
) -> Result<IsothermalChart> {
    if xi.chart != surface.kind.global_chart() {
        return Err(Error::MalformedPoint("chart id does not match surface".into()));
    }
    let base = base_map_for(surface, xi)?;
    let y0 = base
        .forward(xi.coords)
        .ok_or(Error::DegenerateChart("center at base pole".into()))?;
    let phi0 = base.phi(surface, y0);
    let gamma = base.phi_grad(surface, y0);
    let (b, c, kind) = match xi.tag {
        LocationTag::Interior => {
            let b = C64::from_polar((phi0 / 2.0).exp(), -theta);
            let c = b * gamma.conj() / 4.0;
            (b, c, ChartKind::InteriorDisk)
        }
        LocationTag::Boundary => {
            if base.kind() != ChartKind::BoundaryHalfDisk && !matches!(base, BaseMap::FlatRigid { .. }) {
                return Err(Error::DegenerateChart("boundary center needs a flattening base".into()));
            }
            if y0.im.abs() > 1e-9 {
                return Err(Error::DegenerateChart(format!(
                    "boundary center maps off the boundary line (Im y0 = {:.2e})",
                    y0.im
                )));
            }
            let b = C64::new((phi0 / 2.0).exp(), 0.0);
            // only the tangential derivative is corrected; the normal one
            // becomes -2 k_g automatically
            let c = b * C64::new(gamma.re / 4.0, 0.0);
            (b, c, ChartKind::BoundaryHalfDisk)
        }
    };
    if b.norm() < 1e-12 {
        return Err(Error::DegenerateChart("vanishing scale factor".into()));
    }
    let mut chart = IsothermalChart {
        center: xi.clone(),
        kind,
        radius: f64::INFINITY,
        surface_kind: surface.kind.clone(),
        base,
        y0,
        b,
        c,
    };
    chart.radius = select_radius(surface, &chart)?;
    Ok(chart)
}

fn base_map_for(surface: &SurfaceModel, xi: &SurfacePoint) -> Result<BaseMap> {
    match (&surface.kind, xi.tag) {
        (SurfaceKind::Disk, LocationTag::Interior) => Ok(BaseMap::FlatRigid {
            center: xi.coords,
            rot: [[1.0, 0.0], [0.0, 1.0]],
            wrap_second: false,
        }),
        (SurfaceKind::Disk, LocationTag::Boundary) => {
            let alpha = xi.coords[1].atan2(xi.coords[0]);
            Ok(BaseMap::DiskMobius { alpha })
        }
        (SurfaceKind::Cylinder { .. }, LocationTag::Interior) => Ok(BaseMap::FlatRigid {
            center: xi.coords,
            rot: [[1.0, 0.0], [0.0, 1.0]],
            wrap_second: true,
        }),
        (SurfaceKind::Cylinder { length }, LocationTag::Boundary) => {
            // map the boundary tangent to the first axis and the inward
            // normal to the second
            if xi.coords[0] < length / 2.0 {
                Ok(BaseMap::FlatRigid {
                    center: xi.coords,
                    rot: [[0.0, 1.0], [1.0, 0.0]],
                    wrap_second: true,
                })
            } else {
                Ok(BaseMap::FlatRigid {
                    center: xi.coords,
                    rot: [[0.0, 1.0], [-1.0, 0.0]],
                    wrap_second: true,
                })
            }
        }
        (SurfaceKind::Cap { .. }, LocationTag::Interior) => {
            Ok(BaseMap::CapShift { p0: xi.coords })
        }
        (SurfaceKind::Cap { theta0 }, LocationTag::Boundary) => {
            let alpha = xi.coords[1].atan2(xi.coords[0]);
            Ok(BaseMap::CapMobius { alpha, r0: (theta0 / 2.0).tan() })
        }
    }
}

/// Largest chart radius keeping the composed map a diffeomorphism with area
/// distortion e^{-phi} in [1/2, 2] and the image inside the surface.
fn select_radius(surface: &SurfaceModel, chart: &IsothermalChart) -> Result<f64> {
    let upper = match chart.surface_kind {
        SurfaceKind::Cylinder { length } => {
            // stay away from the opposite boundary and the periodic wrap
            let t = chart.center.coords[0];
            let clearance = match chart.center.tag {
                LocationTag::Interior => t.min(length - t),
                LocationTag::Boundary => length,
            };
            clearance.min(PI * 0.9)
        }
        SurfaceKind::Disk | SurfaceKind::Cap { .. } => match chart.center.tag {
            LocationTag::Interior => {
                let d = surface.distance_to_boundary(chart.center.coords);
                // conformal rescale to chart units at the center
                d * chart.b.norm() / (surface.conformal_factor(chart.center.coords) / 2.0).exp()
            }
            LocationTag::Boundary => 4.0,
        },
    };
    let mut r = upper;
    'shrink: while r > 1e-6 {
        let n = 16;
        for i in 0..=n {
            let angle = if chart.kind == ChartKind::BoundaryHalfDisk {
                PI * i as f64 / n as f64
            } else {
                2.0 * PI * i as f64 / n as f64
            };
            for frac in [0.5, 1.0] {
                let y = [frac * r * angle.cos(), frac * r * angle.sin()];
                let ok = (|| -> Option<bool> {
                    let coords = chart.inverse_coords(y).ok()?;
                    if !surface.contains(coords) {
                        return Some(false);
                    }
                    if chart.kind == ChartKind::InteriorDisk
                        && surface.distance_to_boundary(coords) <= 0.0
                    {
                        return Some(false);
                    }
                    let phi = chart.conformal_factor(surface, y).ok()?;
                    if !((-std::f64::consts::LN_2..=std::f64::consts::LN_2).contains(&phi)) {
                        return Some(false);
                    }
                    // round trip accuracy
                    let back = chart.forward_coords(coords).ok()?;
                    let err = (back[0] - y[0]).hypot(back[1] - y[1]);
                    Some(err < 1e-8 * (1.0 + r))
                })()
                .unwrap_or(false);
                if !ok {
                    r *= 0.94;
                    continue 'shrink;
                }
            }
        }
        return Ok(r);
    }
    Err(Error::ChartRadius(format!(
        "center ({:.4}, {:.4})",
        chart.center.coords[0], chart.center.coords[1]
    )))
}

/// Validation report for a chart, comparing the conformal factor against the
/// curvature identities by finite differences.
#[derive(Debug, Clone)]
pub struct ChartValidation {
    pub max_gauss_residual: f64,
    pub max_boundary_residual: f64,
    pub grad_at_center: [f64; 2],
    pub phi_at_center: f64,
    pub pass: bool,
}

/// Check `-Delta phi = 2 K e^{phi}` on interior samples and
/// `d phi / d y2 = -2 k_g e^{phi/2}` on boundary samples.
pub fn chart_validate(
    surface: &SurfaceModel,
    chart: &IsothermalChart,
    tol: f64,
    step: f64,
) -> Result<ChartValidation> {
    let r = chart.radius * 0.6;
    let phi = |y: [f64; 2]| chart.conformal_factor(surface, y);
    let mut max_gauss: f64 = 0.0;
    let n = 4;
    for i in -n..=n {
        for j in 0..=n {
            let y = [r * i as f64 / n as f64, r * j as f64 / n as f64];
            if y[0].hypot(y[1]) > r {
                continue;
            }
            if chart.kind == ChartKind::BoundaryHalfDisk && y[1] < step * 1.5 {
                continue;
            }
            if chart.kind == ChartKind::InteriorDisk && j == 0 && i < 0 {
                continue;
            }
            let lap = (phi([y[0] + step, y[1]])? + phi([y[0] - step, y[1]])?
                + phi([y[0], y[1] + step])?
                + phi([y[0], y[1] - step])?
                - 4.0 * phi(y)?)
                / (step * step);
            let x = chart.inverse(surface, y)?;
            let k = surface.gauss_curvature(&x);
            let res = (-lap - 2.0 * k * phi(y)?.exp()).abs();
            max_gauss = max_gauss.max(res);
        }
    }
    let mut max_boundary: f64 = 0.0;
    if chart.kind == ChartKind::BoundaryHalfDisk {
        for i in -n..=n {
            let y1 = r * i as f64 / n as f64;
            // one-sided second-order derivative into the half disk
            let d = (-3.0 * phi([y1, 0.0])? + 4.0 * phi([y1, step])? - phi([y1, 2.0 * step])?)
                / (2.0 * step);
            let x = surface.classify(chart.inverse_coords([y1, 0.0])?, 1e-7)?;
            let kg = surface.geodesic_curvature(&x)?;
            let res = (d + 2.0 * kg * (phi([y1, 0.0])? / 2.0).exp()).abs();
            max_boundary = max_boundary.max(res);
        }
    }
    let gc = [
        (phi([step, 0.0])? - phi([-step, 0.0])?) / (2.0 * step),
        if chart.kind == ChartKind::BoundaryHalfDisk {
            (-3.0 * phi([0.0, 0.0])? + 4.0 * phi([0.0, step])? - phi([0.0, 2.0 * step])?)
                / (2.0 * step)
        } else {
            (phi([0.0, step])? - phi([0.0, -step])?) / (2.0 * step)
        },
    ];
    Ok(ChartValidation {
        max_gauss_residual: max_gauss,
        max_boundary_residual: max_boundary,
        grad_at_center: gc,
        phi_at_center: phi([0.0, 0.0])?,
        pass: max_gauss <= tol && max_boundary <= tol,
    })
}

impl SurfaceModel {
    /// The refined chart at `xi` with default orientation.
    pub fn chart_at(&self, xi: &SurfacePoint) -> Result<IsothermalChart> {
        refined_chart(self, xi, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surface::surface_catalog;
    use std::collections::BTreeMap;

    #[test]
    fn disk_interior_chart_is_translation() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let xi = d.interior_point([0.3, -0.2]).unwrap();
        let ch = d.chart_at(&xi).unwrap();
        assert_eq!(ch.kind, ChartKind::InteriorDisk);
        assert!((ch.b - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(ch.c.norm() < 1e-14);
        let y = ch.forward(&d.interior_point([0.4, 0.1]).unwrap()).unwrap();
        assert!((y[0] - 0.1).abs() < 1e-14 && (y[1] - 0.3).abs() < 1e-14);
        assert!((ch.conformal_factor(&d, [0.05, 0.02]).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn disk_boundary_chart_normalization() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        for alpha in [0.0, 1.1, 4.0] {
            let xi = d.boundary_point(0, alpha).unwrap();
            let ch = d.chart_at(&xi).unwrap();
            assert_eq!(ch.kind, ChartKind::BoundaryHalfDisk);
            let v = chart_validate(&d, &ch, 1e-4, 1e-4).unwrap();
            assert!(v.phi_at_center.abs() < 1e-12, "phi(0) = {}", v.phi_at_center);
            assert!(v.grad_at_center[0].abs() < 1e-6, "d1 phi = {}", v.grad_at_center[0]);
            // k_g = 1 on the unit circle
            assert!(
                (v.grad_at_center[1] + 2.0).abs() < 1e-5,
                "d2 phi = {}",
                v.grad_at_center[1]
            );
            assert!(v.pass, "residuals {} {}", v.max_gauss_residual, v.max_boundary_residual);
        }
    }

    #[test]
    fn cylinder_boundary_chart_flat() {
        let mut params = BTreeMap::new();
        params.insert("L".to_string(), 2.0);
        let c = surface_catalog("cylinder", &params).unwrap();
        for comp in [0, 1] {
            let xi = c.boundary_point(comp, 0.7).unwrap();
            let ch = c.chart_at(&xi).unwrap();
            let v = chart_validate(&c, &ch, 1e-9, 1e-4).unwrap();
            assert!(v.pass);
            assert!(v.grad_at_center[0].abs() < 1e-9);
            assert!(v.grad_at_center[1].abs() < 1e-9, "k_g = 0 on the cylinder");
            // interior goes to y2 > 0
            let y = [0.0, 0.05];
            let p = ch.inverse(&c, y).unwrap();
            assert_eq!(p.tag, LocationTag::Interior);
        }
    }

    #[test]
    fn cap_charts_satisfy_curvature_identities() {
        let mut params = BTreeMap::new();
        params.insert("theta0".to_string(), 1.2);
        let cap = surface_catalog("cap", &params).unwrap();

        let xi = cap.interior_point([0.2, 0.1]).unwrap();
        let ch = cap.chart_at(&xi).unwrap();
        let v = chart_validate(&cap, &ch, 1e-4, 1e-3).unwrap();
        assert!(v.phi_at_center.abs() < 1e-12);
        assert!(v.grad_at_center[0].abs() < 2e-6 && v.grad_at_center[1].abs() < 2e-6);
        assert!(v.pass, "gauss residual {}", v.max_gauss_residual);

        let xb = cap.boundary_point(0, 0.8).unwrap();
        let chb = cap.chart_at(&xb).unwrap();
        let vb = chart_validate(&cap, &chb, 1e-3, 1e-3).unwrap();
        let kg = 1.0 / (1.2f64).tan();
        assert!(vb.phi_at_center.abs() < 1e-12);
        assert!((vb.grad_at_center[1] + 2.0 * kg).abs() < 1e-4, "normal derivative {}", vb.grad_at_center[1]);
        assert!(vb.pass, "residuals {} {}", vb.max_gauss_residual, vb.max_boundary_residual);
    }

    #[test]
    fn zero_tolerance_fails() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let xi = d.boundary_point(0, 0.0).unwrap();
        let ch = d.chart_at(&xi).unwrap();
        let v = chart_validate(&d, &ch, 0.0, 1e-3).unwrap();
        assert!(!v.pass);
        assert!(v.max_gauss_residual > 0.0 || v.max_boundary_residual > 0.0);
    }

    #[test]
    fn round_trip_and_rotation() {
        let mut params = BTreeMap::new();
        params.insert("theta0".to_string(), 1.2);
        let cap = surface_catalog("cap", &params).unwrap();
        let xi = cap.interior_point([0.15, -0.22]).unwrap();
        for theta in [0.0, 0.7] {
            let ch = refined_chart(&cap, &xi, theta).unwrap();
            for y in [[0.01, 0.02], [-0.05, 0.03], [0.1, -0.07]] {
                let coords = ch.inverse_coords(y).unwrap();
                let back = ch.forward_coords(coords).unwrap();
                assert!((back[0] - y[0]).abs() < 1e-10 && (back[1] - y[1]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn transition_maps_are_conformal() {
        // Cauchy-Riemann residual of the transition between two nearby
        // refined charts
        let mut params = BTreeMap::new();
        params.insert("theta0".to_string(), 1.2);
        let cap = surface_catalog("cap", &params).unwrap();
        let a = cap.interior_point([0.10, 0.05]).unwrap();
        let b = cap.interior_point([0.16, 0.02]).unwrap();
        let ca = cap.chart_at(&a).unwrap();
        let cb = cap.chart_at(&b).unwrap();
        let trans = |y: [f64; 2]| -> [f64; 2] {
            let coords = ca.inverse_coords(y).unwrap();
            cb.forward_coords(coords).unwrap()
        };
        let h = 1e-5;
        for y in [[0.01, 0.01], [0.03, -0.02]] {
            let px = trans([y[0] + h, y[1]]);
            let mx = trans([y[0] - h, y[1]]);
            let py = trans([y[0], y[1] + h]);
            let my = trans([y[0], y[1] - h]);
            let du = [(px[0] - mx[0]) / (2.0 * h), (py[0] - my[0]) / (2.0 * h)];
            let dv = [(px[1] - mx[1]) / (2.0 * h), (py[1] - my[1]) / (2.0 * h)];
            // u_x = v_y, u_y = -v_x (or the reflected pair)
            let cr1 = (du[0] - dv[1]).abs() + (du[1] + dv[0]).abs();
            let cr2 = (du[0] + dv[1]).abs() + (du[1] - dv[0]).abs();
            assert!(cr1.min(cr2) < 1e-6, "CR residual {}", cr1.min(cr2));
        }
    }
}
