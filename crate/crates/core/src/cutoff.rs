//! The radial cutoff used by the Green function split and the bubble
//! projections: `chi(s) = 1` for `s <= 1`, `chi(s) = 0` for `s >= 2`,
//! joined by a quintic so the spline is C^2.

/// chi(s): quintic smoothstep on [1, 2], constant elsewhere.
pub fn chi(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let u = s - 1.0;
        1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }
}

/// chi'(s) for s >= 0.
pub fn chi_d1(s: f64) -> f64 {
    let s = s.abs();
    if !(1.0..=2.0).contains(&s) {
        0.0
    } else {
        let u = s - 1.0;
        -u * u * (30.0 - 60.0 * u + 30.0 * u * u)
    }
}

/// chi''(s) for s >= 0.
pub fn chi_d2(s: f64) -> f64 {
    let s = s.abs();
    if !(1.0..=2.0).contains(&s) {
        0.0
    } else {
        let u = s - 1.0;
        -u * (60.0 - 180.0 * u + 120.0 * u * u)
    }
}

/// The scaled cutoff chi(|y|/c) as a function of the chart coordinate.
pub fn chi_scaled(y: [f64; 2], c: f64) -> f64 {
    chi(y[0].hypot(y[1]) / c)
}

/// Laplacian of y -> chi(|y|/c) (radial: f'' + f'/r with f(r) = chi(r/c)).
pub fn chi_scaled_laplacian(y: [f64; 2], c: f64) -> f64 {
    let r = y[0].hypot(y[1]);
    if r == 0.0 {
        return 0.0;
    }
    chi_d2(r / c) / (c * c) + chi_d1(r / c) / (c * r)
}

/// Gradient of y -> chi(|y|/c).
pub fn chi_scaled_grad(y: [f64; 2], c: f64) -> [f64; 2] {
    let r = y[0].hypot(y[1]);
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let d = chi_d1(r / c) / (c * r);
    [d * y[0], d * y[1]]
}
