//! Nonlinear solves of the mean field equation by Newton's method on the
//! FEM discretization, continuation in `lambda` toward the critical value,
//! and blow-up concentration diagnostics.

use crate::ansatz::{BubbleAnsatz, BubbleConfig};
use crate::fem::{woodbury_solve, BandFactor, Csr, DiscreteField, NeumannSystem};
use crate::green::GreenFunction;
use crate::reduced::{select_rho, Configuration, ReducedCoefficients};
use crate::{Error, Result};
use std::sync::Arc;

/// Result of one Newton solve.
#[derive(Debug)]
pub struct SolveResult {
    pub lambda: f64,
    pub u: DiscreteField,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub max_u: f64,
    pub peak: [f64; 2],
    /// smallest-to-largest pivot magnitude of the last Jacobian factor
    pub pivot_ratio: f64,
    pub negative_pivots: usize,
}

// degree-5 quadrature shared with the load assembly
const Q5: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.101_286_507_323_456_3, 0.101_286_507_323_456_3, 0.797_426_985_353_087_4], 0.125_939_180_544_827_1),
    ([0.101_286_507_323_456_3, 0.797_426_985_353_087_4, 0.101_286_507_323_456_3], 0.125_939_180_544_827_1),
    ([0.797_426_985_353_087_4, 0.101_286_507_323_456_3, 0.101_286_507_323_456_3], 0.125_939_180_544_827_1),
    ([0.470_142_064_105_115_1, 0.470_142_064_105_115_1, 0.059_715_871_789_769_8], 0.132_394_152_788_506_2),
    ([0.470_142_064_105_115_1, 0.059_715_871_789_769_8, 0.470_142_064_105_115_1], 0.132_394_152_788_506_2),
    ([0.059_715_871_789_769_8, 0.470_142_064_105_115_1, 0.470_142_064_105_115_1], 0.132_394_152_788_506_2),
];

/// Per-iteration nonlinear data: `beta = int V e^u`, the dual vector
/// `bvec_i = int V e^u psi_i / beta` and the weighted mass matrix
/// `W_ij = int V e^u psi_i psi_j`, all under one consistent quadrature.
struct NonlinearData {
    beta: f64,
    bvec: Vec<f64>,
    wmat: Csr,
}

fn assemble_nonlinear(system: &NeumannSystem, u: &DiscreteField, shift: f64) -> NonlinearData {
    let mesh = &system.mesh;
    let n = mesh.n_nodes();
    let mut beta = 0.0;
    let mut bvec = vec![0.0; n];
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(9 * mesh.tris.len());
    for t in 0..mesh.tris.len() {
        let tri = mesh.tris[t];
        let p = mesh.coords(t);
        let area = mesh.area_of(t);
        let mut local = [[0.0f64; 3]; 3];
        let mut lvec = [0.0f64; 3];
        for (bary, wq) in Q5.iter() {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let xn = mesh.surface.normalize_coords(x);
            let uval = bary[0] * u.values[tri[0]]
                + bary[1] * u.values[tri[1]]
                + bary[2] * u.values[tri[2]];
            let weight = mesh.surface.potential.eval(xn)
                * (uval - shift).exp()
                * mesh.surface.conformal_factor(xn).exp()
                * wq
                * area;
            beta += weight;
            for i in 0..3 {
                lvec[i] += weight * bary[i];
                for j in 0..3 {
                    local[i][j] += weight * bary[i] * bary[j];
                }
            }
        }
        for i in 0..3 {
            bvec[tri[i]] += lvec[i];
            for j in 0..3 {
                triplets.push((tri[i], tri[j], local[i][j]));
            }
        }
    }
    for v in bvec.iter_mut() {
        *v /= beta;
    }
    let wmat = Csr::from_triplets_pub(n, &mut triplets);
    NonlinearData { beta, bvec, wmat }
}

/// Newton solve of `-Delta_g u = lambda (V e^u / int V e^u - 1/|S|)` with
/// the exact Jacobian of the discretization (the rank-one normalization
/// term included) and residual-decrease damping.
pub fn newton_solve(
    system: &Arc<NeumannSystem>,
    lambda: f64,
    u0: &DiscreteField,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    let n = system.mesh.n_nodes();
    let mut u = u0.clone();
    system.project_mean_zero(&mut u);
    let mvec = &system.mass_vector;
    let area = system.area;
    let residual = |u: &DiscreteField, data: &NonlinearData| -> Vec<f64> {
        let su = system.stiffness.matvec(&u.values);
        (0..n)
            .map(|i| su[i] - lambda * (data.bvec[i] - mvec[i] / area))
            .collect()
    };
    let dual_norm = |r: &[f64]| -> f64 {
        r.iter()
            .zip(mvec.iter())
            .map(|(v, m)| v * v / m.max(1e-300))
            .sum::<f64>()
            .sqrt()
    };
    let mut history = Vec::new();
    let mut pivot_ratio = 1.0;
    let mut negative_pivots = 0;
    let mut data = assemble_nonlinear(system, &u, u.max());
    let mut r = residual(&u, &data);
    let mut rnorm = dual_norm(&r);
    history.push(rnorm);
    let mut iterations = 0;
    // Levenberg parameter: the linearization has near-kernel directions
    // (the bubble scale and translation modes), so full Newton steps
    // overshoot far from the root. nu shifts the spectrum through the mass
    // matrix and is driven to zero as the iteration enters the basin.
    let mut nu = 0.0f64;
    while rnorm > tol {
        if iterations >= max_iter {
            return Err(Error::MaxIterations(max_iter));
        }
        iterations += 1;
        let scale = lambda / data.beta;
        let stiff = &system.stiffness;
        let mass = &system.mass;
        let wmat = &data.wmat;
        let alpha = 1.0 / area;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut accepted = false;
        for _attempt in 0..24 {
            // K = S - (lambda/beta) W + nu M (the e^{u - max} shift in W
            // and beta cancels exactly)
            let factor = BandFactor::factor(&system.layout, |i, j| {
                stiff.entry(i, j) - scale * wmat.entry(i, j) + nu * mass.entry(i, j)
            })
            .map_err(|e| Error::SolverBreakdown(format!("Jacobian factorization: {e}")))?;
            pivot_ratio = factor.pivot_ratio();
            negative_pivots = factor.negative_pivots();
            // J = K + lambda b b^T (+ gauge term alpha m m^T)
            let step = woodbury_solve(
                &factor,
                &[(lambda, &data.bvec), (alpha, mvec)],
                &neg_r,
            )?;
            let mut trial = u.clone();
            trial.axpy(1.0, &DiscreteField::new(system.mesh.clone(), step.clone()));
            system.project_mean_zero(&mut trial);
            let tdata = assemble_nonlinear(system, &trial, trial.max());
            let tr = residual(&trial, &tdata);
            let tnorm = dual_norm(&tr);
            if tnorm.is_finite() && tnorm < rnorm {
                u = trial;
                data = tdata;
                r = tr;
                rnorm = tnorm;
                accepted = true;
                nu = if nu > 1e-10 { nu / 3.0 } else { 0.0 };
                break;
            }
            nu = (4.0 * nu).max(1e-3);
        }
        if !accepted {
            return Err(Error::NewtonDiverged(format!(
                "no residual decrease at iteration {iterations} (residual {rnorm:.3e}, \
                 pivot ratio {pivot_ratio:.3e}, nu {nu:.3e})"
            )));
        }
        if std::env::var_os("MF_NEWTON_TRACE").is_some() {
            eprintln!(
                "newton it {iterations}: residual {rnorm:.6e} nu {nu:.2e} neg_pivots {negative_pivots} max_u {:.4}",
                u.max()
            );
        }
        history.push(rnorm);
    }
    let (_, peak) = u.argmax();
    Ok(SolveResult {
        lambda,
        max_u: u.max(),
        peak,
        u,
        iterations,
        residual: rnorm,
        residual_history: history,
        pivot_ratio,
        negative_pivots,
    })
}

/// One step of the height-pinned bordered system: find `(u, lambda)` with
/// `r(u, lambda) = 0` and `u[peak] = height`. Near blow-up the map
/// `lambda -> u` is nearly singular along the bubble-scale mode while
/// `height -> (u, lambda)` is well conditioned, so the branch is walked in
/// height and the schedule value of `lambda` is matched afterwards.
pub fn bordered_height_solve(
    system: &Arc<NeumannSystem>,
    u0: &DiscreteField,
    lambda0: f64,
    peak: usize,
    height: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(DiscreteField, f64, f64)> {
    let n = system.mesh.n_nodes();
    let mvec = &system.mass_vector;
    let area = system.area;
    let mut u = u0.clone();
    let mut lambda = lambda0;
    let dual_norm = |r: &[f64]| -> f64 {
        r.iter().zip(mvec.iter()).map(|(v, m)| v * v / m.max(1e-300)).sum::<f64>().sqrt()
    };
    let mut rnorm;
    // merit combines the PDE residual with the height-pin violation so the
    // walk can leave an already-converged state toward a new height
    let merit = |rn: f64, hgap: f64| (rn * rn + hgap * hgap).sqrt();
    let mut mnorm;
    let mut data = assemble_nonlinear(system, &u, u.max());
    for _it in 0..max_iter {
        let su = system.stiffness.matvec(&u.values);
        let r: Vec<f64> =
            (0..n).map(|i| su[i] - lambda * (data.bvec[i] - mvec[i] / area)).collect();
        rnorm = dual_norm(&r);
        mnorm = merit(rnorm, u.values[peak] - height);
        if rnorm < tol && (u.values[peak] - height).abs() < 1e-8 * (1.0 + height.abs()) {
            return Ok((u, lambda, rnorm));
        }
        let scale = lambda / data.beta;
        let stiff = &system.stiffness;
        let wmat = &data.wmat;
        let factor = BandFactor::factor(&system.layout, |i, j| {
            stiff.entry(i, j) - scale * wmat.entry(i, j)
        })
        .map_err(|e| Error::SolverBreakdown(format!("bordered factorization: {e}")))?;
        let alpha = 1.0 / area;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let d_lam: Vec<f64> = (0..n).map(|i| data.bvec[i] - mvec[i] / area).collect();
        let xr = woodbury_solve(&factor, &[(lambda, &data.bvec), (alpha, mvec)], &neg_r)?;
        let xd = woodbury_solve(&factor, &[(lambda, &data.bvec), (alpha, mvec)], &d_lam)?;
        if xd[peak].abs() < 1e-14 {
            return Err(Error::SolverBreakdown("degenerate height border".into()));
        }
        let dlam = (height - u.values[peak] - xr[peak]) / xd[peak];
        let mut accepted = false;
        let mut step_frac = 1.0;
        for _ in 0..14 {
            let mut trial = u.clone();
            for i in 0..n {
                trial.values[i] += step_frac * (xr[i] + dlam * xd[i]);
            }
            let tl = lambda + step_frac * dlam;
            let tdata = assemble_nonlinear(system, &trial, trial.max());
            let tsu = system.stiffness.matvec(&trial.values);
            let tr: Vec<f64> =
                (0..n).map(|i| tsu[i] - tl * (tdata.bvec[i] - mvec[i] / area)).collect();
            let tn = merit(dual_norm(&tr), trial.values[peak] - height);
            if tn.is_finite() && tn < mnorm {
                u = trial;
                lambda = tl;
                data = tdata;
                accepted = true;
                break;
            }
            step_frac /= 2.0;
        }
        if !accepted {
            // at the rounding floor a final non-improving step is fine as
            // long as the height pin has been reached
            if rnorm < 50.0 * tol && (u.values[peak] - height).abs() < 1e-6 * (1.0 + height.abs())
            {
                return Ok((u, lambda, rnorm));
            }
            return Err(Error::NewtonDiverged(format!(
                "bordered solve stalled at residual {rnorm:.3e}"
            )));
        }
        if std::env::var_os("MF_NEWTON_TRACE").is_some() {
            eprintln!(
                "  bordered it {_it}: res {rnorm:.3e} lambda {lambda:.8} h-gap {:.3e}",
                u.values[peak] - height
            );
        }
    }
    let su = system.stiffness.matvec(&u.values);
    let r: Vec<f64> = (0..n).map(|i| su[i] - lambda * (data.bvec[i] - mvec[i] / area)).collect();
    let rn = dual_norm(&r);
    if rn < 50.0 * tol && (u.values[peak] - height).abs() < 1e-6 * (1.0 + height.abs()) {
        Ok((u, lambda, rn))
    } else {
        Err(Error::MaxIterations(max_iter))
    }
}

/// Solve at an exact target `lambda` near the critical value by walking the
/// branch in peak height (secant on `log(lambda(h) - lambda_km)`) and
/// polishing with the fixed-lambda Newton solve.
pub fn solve_at_lambda(
    system: &Arc<NeumannSystem>,
    lambda_target: f64,
    lambda_star: f64,
    warm: &DiscreteField,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    let lambda_km = lambda_star;
    let (peak, _) = warm.argmax();
    let side = if lambda_target >= lambda_km { 1.0 } else { -1.0 };
    let gap_t = (lambda_target - lambda_km) * side;
    let mut h = warm.values[peak];
    let solve =
        |h: f64, u0: &DiscreteField, l0: f64| -> Result<(DiscreteField, f64, f64)> {
            walk_to_height(system, u0, l0, peak, h, tol.max(1e-10), max_iter)
        };
    let (mut u, mut lam, _) = solve(h, warm, lambda_target)?;
    let mut gap = (lam - lambda_km) * side;
    // first move from the log-gap model, then secant on (h, lambda)
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..40 {
        if gap <= 0.0 {
            // overshot past the critical value: retreat in height
            prev = Some((h, lam));
            h -= 0.5;
            let r = solve(h, &u, lam.max(lambda_km + 1e-6 * side))?;
            u = r.0;
            lam = r.1;
            gap = (lam - lambda_km) * side;
            continue;
        }
        if (lam - lambda_target).abs() < 1e-9 * (1.0 + lambda_target.abs()) {
            break;
        }
        let dh = match prev {
            Some((hp, lp)) if (lam - lp).abs() > 1e-13 => {
                ((lambda_target - lam) * (h - hp) / (lam - lp)).clamp(-1.5, 1.5)
            }
            _ => (gap / gap_t).ln().clamp(-1.0, 1.0),
        };
        prev = Some((h, lam));
        h += dh;
        if std::env::var_os("MF_NEWTON_TRACE").is_some() {
            eprintln!("height walk: h -> {h:.4} (gap {gap:.5e} target {gap_t:.5e})");
        }
        let r = solve(h, &u, lam)?;
        u = r.0;
        lam = r.1;
        gap = (lam - lambda_km) * side;
    }
    if (lam - lambda_target).abs() > 1e-6 * (1.0 + lambda_target.abs()) {
        return Err(Error::NewtonDiverged(format!(
            "height walk missed the target lambda: reached {lam:.9} vs {lambda_target:.9}"
        )));
    }
    newton_solve(system, lambda_target, &u, tol, max_iter)
}

/// Local concentration masses `mu_i(r) = lambda int_{U_r(xi_i)} V e^u /
/// int V e^u` plus the far-field remainder; the identity `sum mu_i(r) +
/// remainder(r) = lambda` holds by construction.
pub struct ConcentrationReport {
    pub radii: Vec<f64>,
    /// masses[i][j] = mu_i(radii[j])
    pub masses: Vec<Vec<f64>>,
    pub remainders: Vec<f64>,
    pub peak_drift: Vec<f64>,
}

pub fn concentration_diagnostics(
    system: &Arc<NeumannSystem>,
    result: &SolveResult,
    cfg: &Configuration,
    radii: &[f64],
) -> Result<ConcentrationReport> {
    let mesh = &system.mesh;
    let s = &cfg.surface;
    let mut charts = Vec::new();
    for xi in cfg.points.iter() {
        charts.push(s.chart_at(xi)?);
    }
    let shift = result.u.max();
    // quadrature-consistent local masses: accumulate per quadrature point
    let mut near = vec![vec![0.0f64; radii.len()]; cfg.m()];
    let mut beta = 0.0;
    for t in 0..mesh.tris.len() {
        let tri = mesh.tris[t];
        let p = mesh.coords(t);
        let area = mesh.area_of(t);
        for (bary, wq) in Q5.iter() {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let xn = mesh.surface.normalize_coords(x);
            let uval = bary[0] * result.u.values[tri[0]]
                + bary[1] * result.u.values[tri[1]]
                + bary[2] * result.u.values[tri[2]];
            let weight = s.potential.eval(xn)
                * (uval - shift).exp()
                * s.conformal_factor(xn).exp()
                * wq
                * area;
            beta += weight;
            for (i, chart) in charts.iter().enumerate() {
                if let Ok(y) = chart.forward_coords(xn) {
                    let r = y[0].hypot(y[1]);
                    for (j, &rad) in radii.iter().enumerate() {
                        if r < rad {
                            near[i][j] += weight;
                        }
                    }
                }
            }
        }
    }
    let lambda = result.lambda;
    let masses: Vec<Vec<f64>> = near
        .iter()
        .map(|row| row.iter().map(|v| lambda * v / beta).collect())
        .collect();
    let remainders: Vec<f64> = (0..radii.len())
        .map(|j| lambda - masses.iter().map(|row| row[j]).sum::<f64>())
        .collect();
    let peak_drift = cfg
        .points
        .iter()
        .map(|xi| {
            let d = s.coord_delta(xi.coords, result.peak);
            d[0].hypot(d[1])
        })
        .collect();
    Ok(ConcentrationReport { radii: radii.to_vec(), masses, remainders, peak_drift })
}

/// One record of a continuation family.
pub struct FamilyStep {
    pub lambda: f64,
    pub rho: f64,
    pub result: SolveResult,
    pub concentration: ConcentrationReport,
    pub warm_start_gap: f64,
}

pub struct FamilyRecord {
    pub steps: Vec<FamilyStep>,
    /// the calibrated discrete critical value the schedule is anchored to
    pub lambda_star: f64,
    pub truncated: Option<String>,
}

/// Continuation parameters.
pub struct FamilyParams {
    pub r0: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// gap schedule relative to the (calibrated) critical value:
    /// `lambda_n = lambda* + side * epsilon 2^{-n}`, n = 0..steps
    pub epsilon: f64,
    pub steps: usize,
    /// measure the discrete critical value of the mesh before scheduling;
    /// without calibration the continuum `lambda_km` is used directly
    pub calibrate: bool,
}

impl Default for FamilyParams {
    fn default() -> Self {
        // the mass-weighted dual norm has a rounding floor ~ 1e-9 on graded
        // meshes (core rows carry masses ~ h_core^2); the tolerance stays
        // above it
        FamilyParams { r0: 0.2, tol: 1e-8, max_iter: 60, epsilon: 0.1, steps: 7, calibrate: true }
    }
}


/// Walk the branch to a target peak height in sub-steps the corrector can
/// absorb (intermediate solves at a loose tolerance, the final one tight).
pub fn walk_to_height(
    system: &Arc<NeumannSystem>,
    u: &DiscreteField,
    lambda: f64,
    peak: usize,
    h_target: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(DiscreteField, f64, f64)> {
    let mut cur = u.clone();
    let mut lam = lambda;
    let mut rn = 0.0;
    loop {
        let h_now = cur.values[peak];
        let remaining = h_target - h_now;
        if remaining.abs() < 1e-12 * (1.0 + h_target.abs()) {
            // converge tightly at the target
            let (uu, ll, r) = bordered_height_solve(system, &cur, lam, peak, h_target, tol, max_iter)?;
            return Ok((uu, ll, r));
        }
        let dh = remaining.clamp(-0.45, 0.45);
        let last = (remaining - dh).abs() < 1e-12;
        let step_tol = if last { tol } else { (tol * 100.0).min(1e-5) };
        let (uu, ll, r) = bordered_height_solve(system, &cur, lam, peak, h_now + dh, step_tol, max_iter)?;
        cur = uu;
        lam = ll;
        rn = r;
        if last {
            return Ok((cur, lam, rn));
        }
    }
}

/// The discrete critical value of the mesh: four branch points are fitted
/// to the asymptotic form `lambda(h) = lambda* + e^{-h}(a + b h)` (the
/// bubble scale satisfies `rho^2 ~ e^{-h}` and the gap is
/// `A2 rho^2 |log rho| + O(rho^2)`). The blow-up asymptote of the discrete
/// problem differs from `lambda_km` by an O(h^2 |log h|) eigenvalue bias,
/// which this calibration measures.
pub fn calibrate_lambda_star(
    system: &Arc<NeumannSystem>,
    warm: &DiscreteField,
    lambda0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, DiscreteField, f64)> {
    let (peak, _) = warm.argmax();
    let h0 = warm.values[peak];
    let mut u = warm.clone();
    let mut lam = lambda0;
    let mut pts = Vec::new();
    for dh in [0.0, 2.0, 4.0, 6.0] {
        let (uu, ll, _) = walk_to_height(system, &u, lam, peak, h0 + dh, tol, max_iter)?;
        u = uu;
        lam = ll;
        pts.push((h0 + dh, ll));
    }
    // least squares on the basis {1, e^{-h}, h e^{-h}}; scale the
    // exponentials by e^{h0} to keep the normal equations conditioned
    let basis = |h: f64| [1.0, (-(h - h0)).exp(), h * (-(h - h0)).exp()];
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(h, l) in &pts {
        let row = basis(h);
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * l;
        }
    }
    let coeffs = solve3(ata, atb)
        .ok_or_else(|| Error::SolverBreakdown("degenerate critical-value fit".into()))?;
    Ok((coeffs[0], u, lam))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let mut piv = c;
        for r in c + 1..3 {
            if a[r][c].abs() > a[piv][c].abs() {
                piv = r;
            }
        }
        if a[piv][c].abs() < 1e-14 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0f64; 3];
    for c in (0..3).rev() {
        let mut s = b[c];
        for k in c + 1..3 {
            s -= a[c][k] * x[k];
        }
        x[c] = s / a[c][c];
    }
    Some(x)
}

/// Continue the blow-up family toward the critical value from the side
/// dictated by the coefficient signs. Each scheduled `lambda` is reached by
/// walking the branch in peak height (the well-conditioned parametrization
/// near blow-up) and certified by the fixed-lambda Newton solve.
pub fn continue_family(
    green: Arc<GreenFunction>,
    system: Arc<NeumannSystem>,
    cfg_star: &Configuration,
    coeffs: &ReducedCoefficients,
    params: &FamilyParams,
) -> Result<FamilyRecord> {
    let lambda_km = cfg_star.lambda_km();
    let side = match coeffs.case {
        crate::reduced::SignCase::A2Driven => coeffs.a2 > 0.0,
        crate::reduced::SignCase::BDriven => coeffs.b > 0.0,
        crate::reduced::SignCase::None => {
            return Err(Error::WrongSide("no sign case at the critical point".into()))
        }
    };
    let sgn = if side { 1.0 } else { -1.0 };
    // anchor the walk at the largest scheduled gap
    let lambda_anchor = lambda_km + sgn * params.epsilon;
    let rho_anchor = match select_rho(coeffs, lambda_km, lambda_anchor)? {
        Some(r) => r,
        None => {
            return Ok(FamilyRecord {
                steps: Vec::new(),
                lambda_star: lambda_km,
                truncated: Some(format!(
                    "no scale bracket at the anchor lambda = {lambda_anchor:.6}"
                )),
            })
        }
    };
    let warm = build_warm_start(&green, &system, cfg_star, rho_anchor, lambda_anchor, params.r0)?;
    let (lambda_star, mut current, mut current_lambda) = if params.calibrate {
        calibrate_lambda_star(&system, &warm, lambda_anchor, params.tol, params.max_iter)?
    } else {
        (lambda_km, warm.clone(), lambda_anchor)
    };
    let mut steps = Vec::new();
    let mut truncated = None;
    for n in 0..params.steps {
        let gap = params.epsilon * 0.5f64.powi(n as i32);
        let lambda = lambda_star + sgn * gap;
        let rho = select_rho(coeffs, lambda_km, lambda_km + sgn * gap)?.unwrap_or(rho_anchor);
        let solve = match solve_at_lambda(
            &system,
            lambda,
            lambda_star,
            &current,
            params.tol,
            params.max_iter,
        ) {
            Ok(s) => s,
            Err(e) => {
                truncated = Some(format!("solve failed at lambda = {lambda:.8}: {e}"));
                break;
            }
        };
        let _ = current_lambda;
        current = solve.u.clone();
        current_lambda = lambda;
        let warm_gap = annulus_gap(&system, &solve.u, &warm, cfg_star, params.r0);
        let conc = concentration_diagnostics(
            &system,
            &solve,
            cfg_star,
            &[params.r0 / 2.0, params.r0 / 4.0],
        )?;
        steps.push(FamilyStep {
            lambda,
            rho,
            result: solve,
            concentration: conc,
            warm_start_gap: warm_gap,
        });
    }
    Ok(FamilyRecord { steps, lambda_star, truncated })
}

/// Nodal warm start `W = sum PU_i` for the Newton solve.
pub fn build_warm_start(
    green: &Arc<GreenFunction>,
    system: &Arc<NeumannSystem>,
    cfg: &Configuration,
    rho: f64,
    lambda: f64,
    r0: f64,
) -> Result<DiscreteField> {
    let bc = BubbleConfig::new(green, cfg.clone(), rho, lambda, r0)?;
    let ansatz = BubbleAnsatz::build(green.clone(), system.clone(), bc)?;
    let mut w = ansatz.w_field()?;
    system.project_mean_zero(&mut w);
    Ok(w)
}

/// Relative L_inf gap between two fields on the annuli `rho <= |y_i| <= r0`.
fn annulus_gap(
    system: &Arc<NeumannSystem>,
    u: &DiscreteField,
    w: &DiscreteField,
    cfg: &Configuration,
    r0: f64,
) -> f64 {
    let mesh = &system.mesh;
    let mut charts = Vec::new();
    for xi in cfg.points.iter() {
        match cfg.surface.chart_at(xi) {
            Ok(c) => charts.push(c),
            Err(_) => return f64::NAN,
        }
    }
    let mut gap = 0.0f64;
    let mut scale = 0.0f64;
    for (idx, x) in mesh.nodes.iter().enumerate() {
        for chart in &charts {
            if let Ok(y) = chart.forward_coords(*x) {
                let r = y[0].hypot(y[1]);
                if r > r0 / 8.0 && r < r0 {
                    gap = gap.max((u.values[idx] - w.values[idx]).abs());
                    scale = scale.max(u.values[idx].abs());
                }
            }
        }
    }
    gap / scale.max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, build_mesh};
    use crate::geometry::surface_catalog;
    use std::collections::BTreeMap;

    #[test]
    fn lambda_zero_is_trivial() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let mesh = build_mesh(&d, 0.15).unwrap();
        let system = Arc::new(assemble(&mesh).unwrap());
        let u0 = DiscreteField::zeros(mesh.clone());
        let r = newton_solve(&system, 0.0, &u0, 1e-12, 5).unwrap();
        assert_eq!(r.iterations, 0, "u = 0 is exact at lambda = 0");
        assert!(r.max_u.abs() < 1e-13);
    }

    #[test]
    fn constant_potential_keeps_zero_solution() {
        // V constant: V e^0 / int V = 1/|S| for every lambda, so u = 0
        // solves exactly and Newton stays there
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let mesh = build_mesh(&d, 0.15).unwrap();
        let system = Arc::new(assemble(&mesh).unwrap());
        let u0 = DiscreteField::zeros(mesh.clone());
        let r = newton_solve(&system, 1.0, &u0, 1e-11, 8).unwrap();
        assert!(r.max_u.abs() < 1e-10, "max u {}", r.max_u);
        assert!(r.residual < 1e-11);
    }

    #[test]
    fn newton_converges_from_perturbation() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let mesh = build_mesh(&d, 0.12).unwrap();
        let system = Arc::new(assemble(&mesh).unwrap());
        let u0 = DiscreteField::from_fn(mesh.clone(), |x| 0.5 * (3.0 * x[0]).sin() * x[1]);
        let r = newton_solve(&system, 2.0, &u0, 1e-10, 30).unwrap();
        // subcritical lambda with V = 1: the solution is u = 0
        assert!(r.max_u.abs() < 1e-8, "max u {}", r.max_u);
        // quadratic tail: the last contraction orders
        let h = &r.residual_history;
        if h.len() >= 3 {
            let order = (h[h.len() - 1] / h[h.len() - 2]).ln()
                / (h[h.len() - 2] / h[h.len() - 3]).ln();
            assert!(order > 1.5, "Newton order {order} from {h:?}");
        }
    }
}
