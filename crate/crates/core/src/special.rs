//! Special functions (log-gamma, normal and Student-t tails) for [`Real`]
//! scalars in double precision. Normal tails use `libm`'s erfc, which is
//! accurate to a few ulps where `statrs`' is not.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use libm::erfc;
use statrs::function::gamma;

use crate::scalar::Real;

/// Largest |z| returned by the quantile helpers; Φ(-37.5) is below the
/// smallest positive double.
pub const Z_CAP: f64 = 37.5;

pub fn ln_gamma<T: Real>(x: T) -> T {
    T::of(gamma::ln_gamma(x.f64()))
}

/// Standard normal CDF.
pub fn normal_cdf<T: Real>(z: T) -> T {
    T::of(0.5 * erfc(-z.f64() / std::f64::consts::SQRT_2))
}

/// Upper tail 1 - Φ(z), accurate far into the tail.
pub fn normal_sf<T: Real>(z: T) -> T {
    T::of(0.5 * erfc(z.f64() / std::f64::consts::SQRT_2))
}

/// Two-sided normal p-value `2(1 - Φ(|z|))`.
pub fn two_sided_normal_pvalue<T: Real>(z: T) -> T {
    let p = 2.0 * normal_sf(z.abs()).f64();
    T::of(p.min(1.0))
}

/// Φ⁻¹(p), clamped to ±[`Z_CAP`] at the boundaries.
pub fn normal_quantile<T: Real>(p: T) -> T {
    let p = p.f64();
    if p <= 0.0 {
        return T::of(-Z_CAP);
    }
    if p >= 1.0 {
        return T::of(Z_CAP);
    }
    let std = Normal::standard();
    // Work in the smaller tail for precision.
    let z = if p < 0.5 {
        std.inverse_cdf(p)
    } else {
        -std.inverse_cdf(1.0 - p)
    };
    T::of(z.clamp(-Z_CAP, Z_CAP))
}

/// Φ⁻¹(1 - q) computed from the upper-tail probability `q` without forming
/// `1 - q`.
pub fn normal_upper_quantile<T: Real>(q: T) -> T {
    let q = q.f64();
    if q <= 0.0 {
        return T::of(Z_CAP);
    }
    if q >= 1.0 {
        return T::of(-Z_CAP);
    }
    let std = Normal::standard();
    let z = if q < 0.5 {
        -std.inverse_cdf(q)
    } else {
        std.inverse_cdf(1.0 - q)
    };
    T::of(z.clamp(-Z_CAP, Z_CAP))
}

/// Upper tail probability P(T > |t|) of a Student-t with `df` degrees of
/// freedom.
pub fn student_t_upper_tail(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    dist.sf(t.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tails_match_known_values() {
        assert!((normal_cdf(1.959963984540054f64) - 0.975).abs() < 1e-12);
        assert!((normal_sf(8.0f64) - 6.220960574271785e-16).abs() < 1e-25);
        assert!((two_sided_normal_pvalue(0.0f64) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantiles_invert_tails() {
        for &q in &[1e-300, 1e-12, 0.01, 0.3, 0.5, 0.9] {
            let z: f64 = normal_upper_quantile(q);
            let back: f64 = normal_sf(z);
            assert!((back - q).abs() <= 1e-9 * q.max(1e-300), "q={q}");
        }
        assert_eq!(normal_quantile(0.0f64), -Z_CAP);
        assert_eq!(normal_upper_quantile(0.0f64), Z_CAP);
    }

    #[test]
    fn ln_gamma_small_integers() {
        assert!((ln_gamma(5.0f64) - 24f64.ln()).abs() < 1e-12);
        assert!(ln_gamma(1.0f32).abs() < 1e-6);
    }

    #[test]
    fn student_t_approaches_normal() {
        let t = student_t_upper_tail(2.0, 1e6);
        assert!((t - normal_sf(2.0f64)).abs() < 1e-6);
    }
}
