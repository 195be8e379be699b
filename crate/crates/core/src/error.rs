use thiserror::Error;

/// Errors produced by the geometry, quadrature, FEM and solver layers.
#[derive(Error, Debug)]
pub enum Error {
    #[error("unknown surface `{0}`")]
    UnknownSurface(String),
    #[error("invalid surface parameter: {0}")]
    InvalidParameter(String),
    #[error("point does not belong to the surface: {0}")]
    MalformedPoint(String),
    #[error("point outside chart domain (|y| = {radius_requested:.4e}, chart radius {radius:.4e})")]
    ChartDomain { radius_requested: f64, radius: f64 },
    #[error("no admissible chart radius at the requested center: {0}")]
    ChartRadius(String),
    #[error("degenerate chart Jacobian: {0}")]
    DegenerateChart(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergent(String),
    #[error("integrand returned a non-finite value at ({0:.6}, {1:.6})")]
    NonFiniteIntegrand(f64, f64),
    #[error("mesh node budget exceeded (requested ~{requested}, limit {limit})")]
    NodeBudget { requested: usize, limit: usize },
    #[error("degenerate mesh element: {0}")]
    DegenerateElement(String),
    #[error("linear solver breakdown: {0}")]
    SolverBreakdown(String),
    #[error("incompatible Neumann data (defect {0:.3e}); pass mean correction to project it out")]
    IncompatibleData(f64),
    #[error("evaluation at the Green function singularity x = xi")]
    GreenSingularity,
    #[error("configuration touches the thick diagonal: points {0} and {1} too close")]
    ThickDiagonal(usize, usize),
    #[error("kernel index {index} not admitted for this point (i(xi) = {admitted})")]
    KernelIndex { index: usize, admitted: usize },
    #[error("scale parameter too large for the chart: rho_i = {rho:.3e}, limit {limit:.3e}")]
    ScaleTooLarge { rho: f64, limit: f64 },
    #[error("lambda window violated: |lambda - lambda_km| = {gap:.3e} > {bound:.3e}")]
    LambdaWindow { gap: f64, bound: f64 },
    #[error("no sign change of the scale equation on [{0:.3e}, {1:.3e}]")]
    NoBracket(f64, f64),
    #[error("wrong side of lambda_km for the detected sign case: {0}")]
    WrongSide(String),
    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),
    #[error("maximum iterations ({0}) exceeded")]
    MaxIterations(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("potential must be positive; V = {value:.3e} at ({x:.4}, {y:.4})")]
    NonPositivePotential { value: f64, x: f64, y: f64 },
    #[error("expression parse error at byte {at}: {message}")]
    ExprParse { at: usize, message: String },
    #[error("non-convergent r-limit in the B coefficient: values {0:.6e} vs {1:.6e}")]
    NonConvergentLimit(f64, f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
