//! Small special-function helpers: log-gamma at integer and half-integer
//! arguments, sphere surface areas, and spherical-harmonic multiplicities.

pub(crate) fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `ln Gamma(a)` for `a = two_a / 2` with `two_a >= 1`; exact recurrences for
/// the integer and half-integer arguments used throughout.
pub fn ln_gamma_half(two_a: u64) -> f64 {
    assert!(two_a >= 1, "argument must be at least 1/2");
    if two_a.is_multiple_of(2) {
        ln_factorial(two_a / 2 - 1)
    } else {
        let m = (two_a - 1) / 2;
        0.5 * std::f64::consts::PI.ln() + (0..m).map(|j| (j as f64 + 0.5).ln()).sum::<f64>()
    }
}

/// Surface area of the unit sphere `S^{d-1}`: `2 pi^{d/2} / Gamma(d/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    assert!(d >= 1);
    (std::f64::consts::LN_2 + 0.5 * d as f64 * std::f64::consts::PI.ln() - ln_gamma_half(d as u64))
        .exp()
}

/// Dimension of the space of degree-`ell` spherical harmonics on `S^{d-1}`:
/// `N(0, d) = 1`, `N(ell, d) = (2 ell + d - 2)/ell * C(ell + d - 3, ell - 1)`.
pub fn harmonic_multiplicity(ell: usize, d: usize) -> f64 {
    assert!(d >= 2);
    if ell == 0 {
        return 1.0;
    }
    let l = ell as f64;
    let df = d as f64;
    let mut binom = 1.0f64;
    // C(ell + d - 3, ell - 1) as a running product.
    for j in 1..=(ell - 1) {
        binom *= (df - 2.0 + j as f64) / j as f64;
    }
    (2.0 * l + df - 2.0) / l * binom
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_half_known_values() {
        assert_relative_eq!(ln_gamma_half(2), 0.0, epsilon = 1e-15); // Gamma(1)
        assert_relative_eq!(
            ln_gamma_half(1),
            0.5 * std::f64::consts::PI.ln(),
            epsilon = 1e-15
        );
        assert_relative_eq!(ln_gamma_half(8), 6.0f64.ln(), epsilon = 1e-12); // Gamma(4) = 6
        assert_relative_eq!(
            ln_gamma_half(3),
            (0.5f64 * std::f64::consts::PI.sqrt()).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert_relative_eq!(unit_sphere_area(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(unit_sphere_area(2), 2.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(unit_sphere_area(4), 2.0 * PI * PI, epsilon = 1e-13);
    }

    #[test]
    fn multiplicities() {
        assert_eq!(harmonic_multiplicity(0, 5), 1.0);
        for d in 2..8 {
            assert_relative_eq!(harmonic_multiplicity(1, d), d as f64, epsilon = 1e-12);
        }
        for ell in 1..10 {
            assert_relative_eq!(
                harmonic_multiplicity(ell, 3),
                (2 * ell + 1) as f64,
                epsilon = 1e-10
            );
            assert_relative_eq!(harmonic_multiplicity(ell, 2), 2.0, epsilon = 1e-12);
        }
    }
}
