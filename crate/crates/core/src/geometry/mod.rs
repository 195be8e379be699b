//! Surface models with boundary, refined isothermal charts and curvature
//! data. Everything downstream (Green functions, bubbles, the reduced
//! energy) consumes points and charts from here.

mod chart;
mod potential;
mod surface;

pub use chart::{ChartKind, IsothermalChart, chart_validate, refined_chart, ChartValidation};
pub use potential::{Potential, PotentialExpr};
pub use surface::{
    rho_weight, surface_catalog, GlobalChart, LocationTag, SurfaceKind, SurfaceModel,
    SurfacePoint,
};
