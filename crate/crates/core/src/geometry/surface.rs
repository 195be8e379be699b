//! The three catalog surfaces and their global isothermal coordinate
//! patches. Every surface is described in a single global chart in which the
//! metric is conformally Euclidean, `g = e^{phi} (dy1^2 + dy2^2)`:
//!
//! * unit disk: the plane patch itself, `phi = 0`,
//! * flat cylinder `[0, L] x (R / 2 pi Z)`: the strip `(t, s)`, `phi = 0`,
//!   `s` periodic,
//! * spherical cap of polar angle `theta0`: stereographic coordinates on the
//!   disk of radius `R0 = tan(theta0 / 2)`, `phi = log(4 / (1 + |p|^2)^2)`.

use super::Potential;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Identifier of the global coordinate patch a point lives in.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GlobalChart {
    DiskPlane,
    CylinderStrip,
    CapStereo,
}

impl GlobalChart {
    pub fn id(self) -> &'static str {
        match self {
            GlobalChart::DiskPlane => "disk-plane",
            GlobalChart::CylinderStrip => "cylinder-strip",
            GlobalChart::CapStereo => "cap-stereo",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LocationTag {
    Interior,
    Boundary,
}

/// A point of the surface, carried in global chart coordinates. Boundary
/// points additionally know their arc-length parameter along their boundary
/// component.
#[derive(Clone, Debug)]
pub struct SurfacePoint {
    pub tag: LocationTag,
    pub chart: GlobalChart,
    pub coords: [f64; 2],
    pub arc: Option<f64>,
}

impl SurfacePoint {
    pub fn is_boundary(&self) -> bool {
        self.tag == LocationTag::Boundary
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceKind {
    Disk,
    Cylinder { length: f64 },
    Cap { theta0: f64 },
}

impl SurfaceKind {
    pub fn global_chart(&self) -> GlobalChart {
        match self {
            SurfaceKind::Disk => GlobalChart::DiskPlane,
            SurfaceKind::Cylinder { .. } => GlobalChart::CylinderStrip,
            SurfaceKind::Cap { .. } => GlobalChart::CapStereo,
        }
    }

    /// Radius of the coordinate patch boundary circle (disk/cap).
    pub fn patch_radius(&self) -> Option<f64> {
        match self {
            SurfaceKind::Disk => Some(1.0),
            SurfaceKind::Cap { theta0 } => Some((theta0 / 2.0).tan()),
            SurfaceKind::Cylinder { .. } => None,
        }
    }
}

/// A catalog surface: geometry, curvature and the potential V.
#[derive(Clone, Debug)]
pub struct SurfaceModel {
    pub name: String,
    pub kind: SurfaceKind,
    pub area: f64,
    pub potential: Potential,
}

/// The concentration weight: `8 pi` at interior points, `4 pi` on the
/// boundary.
pub fn rho_weight(surface: &SurfaceModel, p: &SurfacePoint) -> Result<f64> {
    if p.chart != surface.kind.global_chart() {
        return Err(Error::MalformedPoint(format!(
            "chart id `{}` does not belong to surface `{}`",
            p.chart.id(),
            surface.name
        )));
    }
    Ok(match p.tag {
        LocationTag::Interior => 8.0 * PI,
        LocationTag::Boundary => 4.0 * PI,
    })
}

/// Build one of the three catalog surfaces. Parameters: `L` for the
/// cylinder (default 2), `theta0` for the cap (default pi/2).
pub fn surface_catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<SurfaceModel> {
    match name {
        "disk" => Ok(SurfaceModel {
            name: "disk".into(),
            kind: SurfaceKind::Disk,
            area: PI,
            potential: Potential::One,
        }),
        "cylinder" => {
            let length = params.get("L").copied().unwrap_or(2.0);
            if !(length > 0.0) {
                return Err(Error::InvalidParameter(format!("cylinder length L = {length}")));
            }
            Ok(SurfaceModel {
                name: "cylinder".into(),
                kind: SurfaceKind::Cylinder { length },
                area: 2.0 * PI * length,
                potential: Potential::One,
            })
        }
        "cap" => {
            let theta0 = params.get("theta0").copied().unwrap_or(PI / 2.0);
            if !(theta0 > 0.0 && theta0 < PI) {
                return Err(Error::InvalidParameter(format!("cap angle theta0 = {theta0}")));
            }
            Ok(SurfaceModel {
                name: "cap".into(),
                kind: SurfaceKind::Cap { theta0 },
                area: 2.0 * PI * (1.0 - theta0.cos()),
                potential: Potential::One,
            })
        }
        other => Err(Error::UnknownSurface(other.to_string())),
    }
}

impl SurfaceModel {
    pub fn with_potential(mut self, v: Potential) -> Result<Self> {
        // sample positivity over the coordinate patch
        let n = 24;
        for i in 0..n {
            for j in 0..n {
                let coords = self.sample_coords(i, j, n);
                let value = v.eval(coords);
                if !(value > 0.0) {
                    return Err(Error::NonPositivePotential {
                        value,
                        x: coords[0],
                        y: coords[1],
                    });
                }
            }
        }
        self.potential = v;
        Ok(self)
    }

    fn sample_coords(&self, i: usize, j: usize, n: usize) -> [f64; 2] {
        match self.kind {
            SurfaceKind::Disk | SurfaceKind::Cap { .. } => {
                let rmax = self.kind.patch_radius().unwrap();
                let r = rmax * (i as f64 + 0.5) / n as f64;
                let a = 2.0 * PI * j as f64 / n as f64;
                [r * a.cos(), r * a.sin()]
            }
            SurfaceKind::Cylinder { length } => {
                [length * i as f64 / (n - 1) as f64, 2.0 * PI * j as f64 / n as f64]
            }
        }
    }

    /// Conformal factor phi of the global chart at the given coordinates.
    pub fn conformal_factor(&self, coords: [f64; 2]) -> f64 {
        match self.kind {
            SurfaceKind::Disk | SurfaceKind::Cylinder { .. } => 0.0,
            SurfaceKind::Cap { .. } => {
                let r2 = coords[0] * coords[0] + coords[1] * coords[1];
                (4.0f64).ln() - 2.0 * (1.0 + r2).ln()
            }
        }
    }

    /// Gaussian curvature at a point.
    pub fn gauss_curvature(&self, _p: &SurfacePoint) -> f64 {
        match self.kind {
            SurfaceKind::Disk | SurfaceKind::Cylinder { .. } => 0.0,
            SurfaceKind::Cap { .. } => 1.0,
        }
    }

    /// Geodesic curvature of the boundary at a boundary point.
    pub fn geodesic_curvature(&self, p: &SurfacePoint) -> Result<f64> {
        if !p.is_boundary() {
            return Err(Error::MalformedPoint("geodesic curvature needs a boundary point".into()));
        }
        Ok(match self.kind {
            SurfaceKind::Disk => 1.0,
            SurfaceKind::Cylinder { .. } => 0.0,
            SurfaceKind::Cap { theta0 } => 1.0 / theta0.tan(),
        })
    }

    pub fn potential_at(&self, p: &SurfacePoint) -> f64 {
        self.potential.eval(p.coords)
    }

    /// Number of boundary components (cylinder has two).
    pub fn boundary_components(&self) -> usize {
        match self.kind {
            SurfaceKind::Cylinder { .. } => 2,
            _ => 1,
        }
    }

    /// Metric length of a boundary component.
    pub fn boundary_length(&self, component: usize) -> f64 {
        match self.kind {
            SurfaceKind::Disk => 2.0 * PI,
            SurfaceKind::Cylinder { .. } => {
                let _ = component;
                2.0 * PI
            }
            SurfaceKind::Cap { theta0 } => 2.0 * PI * theta0.sin(),
        }
    }

    /// An interior point from global coordinates.
    pub fn interior_point(&self, coords: [f64; 2]) -> Result<SurfacePoint> {
        let ok = match self.kind {
            SurfaceKind::Disk | SurfaceKind::Cap { .. } => {
                let rmax = self.kind.patch_radius().unwrap();
                coords[0].hypot(coords[1]) < rmax * (1.0 - 1e-12)
            }
            SurfaceKind::Cylinder { length } => coords[0] > 0.0 && coords[0] < length,
        };
        if !ok {
            return Err(Error::MalformedPoint(format!(
                "({}, {}) is not strictly inside `{}`",
                coords[0], coords[1], self.name
            )));
        }
        let coords = self.normalize_coords(coords);
        Ok(SurfacePoint {
            tag: LocationTag::Interior,
            chart: self.kind.global_chart(),
            coords,
            arc: None,
        })
    }

    /// A boundary point from its arc-length parameter on a component.
    pub fn boundary_point(&self, component: usize, arc: f64) -> Result<SurfacePoint> {
        if component >= self.boundary_components() {
            return Err(Error::MalformedPoint(format!(
                "boundary component {component} on `{}`",
                self.name
            )));
        }
        let len = self.boundary_length(component);
        let arc = arc.rem_euclid(len);
        let coords = match self.kind {
            SurfaceKind::Disk => [arc.cos(), arc.sin()],
            SurfaceKind::Cylinder { length } => {
                let t = if component == 0 { 0.0 } else { length };
                [t, arc]
            }
            SurfaceKind::Cap { theta0 } => {
                let r0 = (theta0 / 2.0).tan();
                let alpha = arc / theta0.sin();
                [r0 * alpha.cos(), r0 * alpha.sin()]
            }
        };
        Ok(SurfacePoint {
            tag: LocationTag::Boundary,
            chart: self.kind.global_chart(),
            coords,
            arc: Some(arc),
        })
    }

    /// Wrap periodic coordinates into the fundamental domain.
    pub fn normalize_coords(&self, coords: [f64; 2]) -> [f64; 2] {
        match self.kind {
            SurfaceKind::Cylinder { .. } => [coords[0], coords[1].rem_euclid(2.0 * PI)],
            _ => coords,
        }
    }

    /// Coordinate displacement b - a, wrap-aware for the cylinder.
    pub fn coord_delta(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        match self.kind {
            SurfaceKind::Cylinder { .. } => {
                let mut ds = (b[1] - a[1]).rem_euclid(2.0 * PI);
                if ds > PI {
                    ds -= 2.0 * PI;
                }
                [b[0] - a[0], ds]
            }
            _ => [b[0] - a[0], b[1] - a[1]],
        }
    }

    /// A coordinate-level distance proxy (exact for the flat surfaces,
    /// conformally weighted for the cap). Used for separation margins.
    pub fn point_distance(&self, a: &SurfacePoint, b: &SurfacePoint) -> f64 {
        let d = self.coord_delta(a.coords, b.coords);
        let flat = d[0].hypot(d[1]);
        match self.kind {
            SurfaceKind::Cap { .. } => {
                let mid = [(a.coords[0] + b.coords[0]) / 2.0, (a.coords[1] + b.coords[1]) / 2.0];
                flat * (self.conformal_factor(mid) / 2.0).exp()
            }
            _ => flat,
        }
    }

    /// Distance from a point to the boundary of the coordinate patch (used
    /// for chart radius selection).
    pub fn distance_to_boundary(&self, coords: [f64; 2]) -> f64 {
        match self.kind {
            SurfaceKind::Disk | SurfaceKind::Cap { .. } => {
                let rmax = self.kind.patch_radius().unwrap();
                (rmax - coords[0].hypot(coords[1])).max(0.0)
            }
            SurfaceKind::Cylinder { length } => coords[0].min(length - coords[0]).max(0.0),
        }
    }

    /// True if the coordinates lie in the closed coordinate patch.
    pub fn contains(&self, coords: [f64; 2]) -> bool {
        match self.kind {
            SurfaceKind::Disk | SurfaceKind::Cap { .. } => {
                coords[0].hypot(coords[1]) <= self.kind.patch_radius().unwrap() * (1.0 + 1e-10)
            }
            SurfaceKind::Cylinder { length } => {
                coords[0] >= -1e-12 && coords[0] <= length + 1e-12
            }
        }
    }

    /// Classify coordinates, tagging near-boundary points as boundary when
    /// within `tol` of it.
    pub fn classify(&self, coords: [f64; 2], tol: f64) -> Result<SurfacePoint> {
        if !self.contains(coords) {
            return Err(Error::MalformedPoint(format!(
                "({}, {}) outside `{}`",
                coords[0], coords[1], self.name
            )));
        }
        if self.distance_to_boundary(coords) <= tol {
            match self.kind {
                SurfaceKind::Disk => {
                    let alpha = coords[1].atan2(coords[0]).rem_euclid(2.0 * PI);
                    self.boundary_point(0, alpha)
                }
                SurfaceKind::Cap { theta0 } => {
                    let alpha = coords[1].atan2(coords[0]).rem_euclid(2.0 * PI);
                    self.boundary_point(0, alpha * theta0.sin())
                }
                SurfaceKind::Cylinder { length } => {
                    let component = if coords[0] < length / 2.0 { 0 } else { 1 };
                    self.boundary_point(component, coords[1])
                }
            }
        } else {
            self.interior_point(coords)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> SurfaceModel {
        surface_catalog("disk", &BTreeMap::new()).unwrap()
    }

    #[test]
    fn catalog_surfaces() {
        let d = disk();
        assert!((d.area - PI).abs() < 1e-15);
        let p = d.boundary_point(0, 0.3).unwrap();
        assert_eq!(d.geodesic_curvature(&p).unwrap(), 1.0);
        assert_eq!(d.gauss_curvature(&p), 0.0);

        let mut params = BTreeMap::new();
        params.insert("L".to_string(), 2.0);
        let c = surface_catalog("cylinder", &params).unwrap();
        assert!((c.area - 4.0 * PI).abs() < 1e-12);
        assert_eq!(c.geodesic_curvature(&c.boundary_point(0, 1.0).unwrap()).unwrap(), 0.0);

        let mut params = BTreeMap::new();
        params.insert("theta0".to_string(), PI / 2.0);
        let cap = surface_catalog("cap", &params).unwrap();
        assert!((cap.area - 2.0 * PI).abs() < 1e-12);
        let bp = cap.boundary_point(0, 0.0).unwrap();
        assert!(cap.geodesic_curvature(&bp).unwrap().abs() < 1e-12);
        assert_eq!(cap.gauss_curvature(&bp), 1.0);

        assert!(surface_catalog("torus", &BTreeMap::new()).is_err());
        let mut bad = BTreeMap::new();
        bad.insert("L".to_string(), -1.0);
        assert!(surface_catalog("cylinder", &bad).is_err());
    }

    #[test]
    fn rho_weight_values() {
        let d = disk();
        let inner = d.interior_point([0.2, 0.1]).unwrap();
        let outer = d.boundary_point(0, 1.0).unwrap();
        assert!((rho_weight(&d, &inner).unwrap() - 8.0 * PI).abs() < 1e-12);
        assert!((rho_weight(&d, &outer).unwrap() - 4.0 * PI).abs() < 1e-12);

        // a point carrying a foreign chart id is rejected
        let mut alien = inner.clone();
        alien.chart = GlobalChart::CapStereo;
        assert!(rho_weight(&d, &alien).is_err());
    }

    #[test]
    fn cylinder_wrap() {
        let mut params = BTreeMap::new();
        params.insert("L".to_string(), 2.0);
        let c = surface_catalog("cylinder", &params).unwrap();
        let d = c.coord_delta([1.0, 0.1], [1.0, 2.0 * PI - 0.1]);
        assert!((d[1] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn positivity_check() {
        let d = disk();
        assert!(d.clone().with_potential(Potential::parse("x").unwrap()).is_err());
        assert!(d.with_potential(Potential::parse("exp(x)").unwrap()).is_ok());
    }
}
