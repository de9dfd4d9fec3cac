//! Log prior factors over status configurations after integrating out the
//! change probability.

use serde::{Deserialize, Serialize};

use super::{Arity, MixtureHyperparams};
use crate::special::ln_gamma;

/// Dependence structure between conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    /// Statuses change between adjacent conditions (ordered conditions).
    Temporal,
    /// Statuses deviate from the across-condition mode (exchangeable conditions).
    Spatial,
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PriorKind::Temporal => "temporal",
            PriorKind::Spatial => "spatial",
        })
    }
}

impl std::str::FromStr for PriorKind {
    type Err = crate::error::FbiaError;
    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "temporal" => Ok(PriorKind::Temporal),
            "spatial" => Ok(PriorKind::Spatial),
            other => Err(crate::error::FbiaError::Parameter(format!("unknown prior '{other}'"))),
        }
    }
}

/// Modal status; ties prefer 0, then 1, then −1.
pub fn mode(e: &[i8]) -> i8 {
    let count = |v: i8| e.iter().filter(|&&x| x == v).count();
    let mut best = 0i8;
    let mut best_count = count(0);
    for v in [1i8, -1] {
        let c = count(v);
        if c > best_count {
            best = v;
            best_count = c;
        }
    }
    best
}

/// Counts of change magnitudes 0, 1, 2: between adjacent conditions
/// (temporal) or from the mode (spatial).
pub fn change_counts(e: &[i8], prior: PriorKind) -> [usize; 3] {
    let mut counts = [0usize; 3];
    match prior {
        PriorKind::Temporal => {
            for w in e.windows(2) {
                counts[(w[1] - w[0]).unsigned_abs() as usize] += 1;
            }
        }
        PriorKind::Spatial => {
            let m = mode(e);
            for &x in e {
                counts[(x - m).unsigned_abs() as usize] += 1;
            }
        }
    }
    counts
}

/// Log prior factor of a configuration.
///
/// Two components: lnΓ(a₁+k₁) + lnΓ(b₁+k₂) − lnΓ(a₁+k₁+b₁+k₂), with k₁ the
/// number of changes and k₂ the number of non-changes. Three components: the
/// Dirichlet analogue over change magnitudes 0, 1, 2.
pub fn log_prior(e: &[i8], prior: PriorKind, arity: Arity, hp: &MixtureHyperparams) -> f64 {
    let counts = change_counts(e, prior);
    match arity {
        Arity::Two => {
            let k1 = counts[1] as f64;
            let k2 = counts[0] as f64;
            ln_gamma(hp.a1 + k1) + ln_gamma(hp.b1 + k2) - ln_gamma(hp.a1 + k1 + hp.b1 + k2)
        }
        Arity::Three => {
            // Concentration alpha[0] goes with "no change".
            let mut total = 0.0;
            let mut acc = 0.0;
            for (alpha, &n) in hp.alpha.iter().zip(&counts) {
                acc += ln_gamma(alpha + n as f64);
                total += alpha + n as f64;
            }
            acc - ln_gamma(total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_tie_breaking() {
        assert_eq!(mode(&[0, 1]), 0);
        assert_eq!(mode(&[1, -1]), 1);
        assert_eq!(mode(&[-1, -1, 1]), -1);
        assert_eq!(mode(&[1, 1, 0]), 1);
    }

    #[test]
    fn single_condition_prior() {
        let hp = MixtureHyperparams::default();
        let h = log_prior(&[0], PriorKind::Temporal, Arity::Two, &hp);
        let expect = ln_gamma(1.0) + ln_gamma(10.0) - ln_gamma(11.0);
        assert!((h - expect).abs() < 1e-12);
    }

    #[test]
    fn constant_configuration_has_largest_temporal_prior() {
        let hp = MixtureHyperparams::default();
        let h0 = log_prior(&[0, 0, 0, 0], PriorKind::Temporal, Arity::Two, &hp);
        for d in 1..16u32 {
            let e: Vec<i8> = (0..4).map(|k| ((d >> (3 - k)) & 1) as i8).collect();
            let h = log_prior(&e, PriorKind::Temporal, Arity::Two, &hp);
            assert!(h <= h0 + 1e-12, "{e:?}");
            let comp: Vec<i8> = e.iter().map(|x| 1 - x).collect();
            assert_eq!(h, log_prior(&comp, PriorKind::Temporal, Arity::Two, &hp));
        }
    }
}
