//! Within-group Stouffer combination.

use crate::scalar::Real;

/// For each condition k, combines the scores of all conditions sharing
/// e^{(k)}'s status: Σ wᵢψᵢ / sqrt(Σ wᵢ²).
pub fn stouffer_integrate<T: Real>(psi: &[T], e: &[i8], weights: &[f64]) -> Vec<T> {
    let out = stouffer_f64(&to_f64(psi), e, weights);
    out.into_iter().map(T::of).collect()
}

pub(crate) fn to_f64<T: Real>(psi: &[T]) -> Vec<f64> {
    psi.iter().map(|v| v.f64()).collect()
}

pub(crate) fn stouffer_f64(psi: &[f64], e: &[i8], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; psi.len()];
    stouffer_into(psi, e, weights, &mut out);
    out
}

/// Writes the integrated vector for configuration `e` into `out`.
pub(crate) fn stouffer_into(psi: &[f64], e: &[i8], weights: &[f64], out: &mut [f64]) {
    debug_assert_eq!(psi.len(), e.len());
    // Statuses are −1, 0, 1: index by status + 1.
    let mut num = [0.0f64; 3];
    let mut den = [0.0f64; 3];
    for ((&v, &s), &w) in psi.iter().zip(e).zip(weights) {
        let g = (s + 1) as usize;
        num[g] += w * v;
        den[g] += w * w;
    }
    let mut val = [0.0f64; 3];
    for g in 0..3 {
        if den[g] > 0.0 {
            val[g] = num[g] / den[g].sqrt();
        }
    }
    for (o, &s) in out.iter_mut().zip(e) {
        *o = val[(s + 1) as usize];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        let w = [1.0; 3];
        let all = stouffer_integrate(&[2.0f64, 2.0, 2.0], &[1, 1, 1], &w);
        for v in all {
            assert!((v - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        }
        let mixed = stouffer_integrate(&[0.1f64, 3.0, 4.0], &[0, 1, 1], &w);
        assert!((mixed[0] - 0.1).abs() < 1e-15);
        assert!((mixed[1] - 4.949747468305833).abs() < 1e-12);
        assert_eq!(mixed[1], mixed[2]);
        assert_eq!(stouffer_integrate(&[-1.7f64], &[0], &[1.0]), vec![-1.7]);
    }
}
