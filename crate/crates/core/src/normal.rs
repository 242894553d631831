//! Standard normal density, distribution function and partial moments.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

pub fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// P(a < X < b) for X ~ N(0,1), evaluated on the tail that avoids cancellation.
pub fn interval_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (erfc(a * FRAC_1_SQRT_2) - erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        cdf(b) - cdf(a)
    } else {
        1.0 - cdf(a) - 0.5 * erfc(b * FRAC_1_SQRT_2)
    }
}

/// Zeroth, first and second partial moments of N(0,1) on (a, b).
///
/// Infinite endpoints are allowed.
pub fn partial_moments(a: f64, b: f64) -> (f64, f64, f64) {
    let mass = interval_mass(a, b);
    let (pa, pb) = (pdf(a), pdf(b));
    let first = pa - pb;
    let apa = if a.is_finite() { a * pa } else { 0.0 };
    let bpb = if b.is_finite() { b * pb } else { 0.0 };
    (mass, first, mass + apa - bpb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_line_moments() {
        let (m0, m1, m2) = partial_moments(0.0, f64::INFINITY);
        assert!((m0 - 0.5).abs() < 1e-15);
        assert!((m1 - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((m2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn moments_match_quadrature() {
        let (a, b) = (-0.7, 1.9);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let mut q = [0.0; 3];
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * h;
            let w = pdf(x) * h;
            q[0] += w;
            q[1] += w * x;
            q[2] += w * x * x;
        }
        let (m0, m1, m2) = partial_moments(a, b);
        assert!((m0 - q[0]).abs() < 1e-10);
        assert!((m1 - q[1]).abs() < 1e-10);
        assert!((m2 - q[2]).abs() < 1e-10);
    }

    #[test]
    fn far_tail_mass_is_positive() {
        assert!(interval_mass(9.0, 10.0) > 0.0);
        assert!(interval_mass(-10.0, -9.0) > 0.0);
    }
}
