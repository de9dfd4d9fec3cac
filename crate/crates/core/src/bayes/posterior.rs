//! Closed-form marginal posterior of a status configuration and exact
//! enumeration over all configurations.

use std::f64::consts::PI;

use super::prior::{log_prior, PriorKind};
use super::stouffer::{stouffer_into, to_f64};
use super::{Arity, EdgeConfiguration, EdgePosterior, MixtureHyperparams, PosteriorMethod};
use crate::error::{FbiaError, Result};
use crate::scalar::Real;
use crate::special::ln_gamma;

/// Sufficient statistics of one status group.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct GroupStats {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl GroupStats {
    pub fn add(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }
}

/// Log marginal likelihood of one nonempty group after integrating out its
/// mean (flat) and variance (inverse gamma). With `pinned` the mean is fixed
/// at zero instead.
pub(crate) fn log_group_term(g: &GroupStats, hp: &MixtureHyperparams, pinned: bool) -> f64 {
    if g.count == 0 {
        return 0.0;
    }
    let n = g.count as f64;
    let ig_norm = hp.a2 * hp.b2.ln() - ln_gamma(hp.a2);
    if pinned {
        let shape = n / 2.0 + hp.a2;
        let rate = 0.5 * g.sum_sq + hp.b2;
        return -(n / 2.0) * (2.0 * PI).ln() + ln_gamma(shape) - shape * rate.ln() + ig_norm;
    }
    // Centered sum of squares; never negative mathematically.
    let centered = (g.sum_sq - g.sum * g.sum / n).max(0.0);
    let rate = 0.5 * centered + hp.b2;
    assert!(rate > 0.0, "inverse-gamma rate must be positive");
    let shape = (n - 1.0) / 2.0 + hp.a2;
    -0.5 * n.ln() - (n / 2.0) * (2.0 * PI).ln() + ln_gamma(shape) - shape * rate.ln() + ig_norm
}

/// Group statistics indexed by status + 1.
pub(crate) fn group_stats(psi: &[f64], e: &[i8]) -> [GroupStats; 3] {
    let mut g = [GroupStats::default(); 3];
    for (&v, &s) in psi.iter().zip(e) {
        g[(s + 1) as usize].add(v);
    }
    g
}

pub(crate) fn log_marginal_f64(
    psi: &[f64],
    e: &[i8],
    prior: PriorKind,
    arity: Arity,
    hp: &MixtureHyperparams,
    pin_null_mean: bool,
) -> f64 {
    let groups = group_stats(psi, e);
    let mut lm = log_prior(e, prior, arity, hp);
    for (idx, g) in groups.iter().enumerate() {
        lm += log_group_term(g, hp, pin_null_mean && idx == 1);
    }
    lm
}

/// Log unnormalized posterior of configuration `e` for one edge's scores.
pub fn log_marginal_config<T: Real>(
    psi: &[T],
    e: &EdgeConfiguration,
    prior: PriorKind,
    arity: Arity,
    hp: &MixtureHyperparams,
    pin_null_mean: bool,
) -> f64 {
    log_marginal_f64(&to_f64(psi), &e.0, prior, arity, hp, pin_null_mean)
}

/// Number of configurations `arity^K`, saturating.
pub fn configuration_count(arity: Arity, k: usize) -> u128 {
    (arity.values().len() as u128).saturating_pow(k.min(127) as u32)
}

/// Writes configuration number `d` into `e`; condition 0 is the most
/// significant digit.
pub(crate) fn decode(d: u64, arity: Arity, e: &mut [i8]) {
    let values = arity.values();
    let base = values.len() as u64;
    let mut rest = d;
    for slot in e.iter_mut().rev() {
        *slot = values[(rest % base) as usize];
        rest /= base;
    }
}

/// All configurations in enumeration order.
pub fn configurations(arity: Arity, k: usize) -> impl Iterator<Item = EdgeConfiguration> {
    let total = configuration_count(arity, k) as u64;
    (0..total).map(move |d| {
        let mut e = vec![0i8; k];
        decode(d, arity, &mut e);
        EdgeConfiguration(e)
    })
}

pub(crate) fn check_cap(arity: Arity, k: usize, cap: u64) -> Result<u64> {
    let count = configuration_count(arity, k);
    if count > cap as u128 {
        return Err(FbiaError::Capacity {
            configurations: count,
            cap,
        });
    }
    Ok(count as u64)
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let mx = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + values.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
}

/// Exact posterior over every configuration.
#[allow(clippy::too_many_arguments)]
pub fn enumerate_posterior<T: Real>(
    edge: (usize, usize),
    psi: &[T],
    prior: PriorKind,
    arity: Arity,
    hp: &MixtureHyperparams,
    weights: &[f64],
    pin_null_mean: bool,
    cap: u64,
) -> Result<EdgePosterior<T>> {
    let k = psi.len();
    let total = check_cap(arity, k, cap)?;
    let x = to_f64(psi);
    let mut e = vec![0i8; k];
    let mut configs = Vec::with_capacity(total as usize);
    let mut logs = Vec::with_capacity(total as usize);
    for d in 0..total {
        decode(d, arity, &mut e);
        logs.push(log_marginal_f64(&x, &e, prior, arity, hp, pin_null_mean));
        configs.push(EdgeConfiguration(e.clone()));
    }
    let lse = log_sum_exp(&logs);
    let probs: Vec<f64> = logs.iter().map(|l| (l - lse).exp()).collect();
    let mut buf = vec![0.0; k];
    let integrated = configs
        .iter()
        .map(|c| {
            stouffer_into(&x, &c.0, weights, &mut buf);
            buf.iter().map(|&v| T::of(v)).collect()
        })
        .collect();
    Ok(EdgePosterior {
        edge,
        configs,
        probs,
        integrated,
        method: PosteriorMethod::Exact,
    })
}

/// ψ̂ for one row by streaming through all configurations without storing
/// them.
pub(crate) fn exact_average(
    psi: &[f64],
    prior: PriorKind,
    arity: Arity,
    hp: &MixtureHyperparams,
    weights: &[f64],
    pin_null_mean: bool,
    cap: u64,
) -> Result<Vec<f64>> {
    let k = psi.len();
    let total = check_cap(arity, k, cap)?;
    let mut e = vec![0i8; k];
    let mut logs = Vec::with_capacity(total as usize);
    for d in 0..total {
        decode(d, arity, &mut e);
        logs.push(log_marginal_f64(psi, &e, prior, arity, hp, pin_null_mean));
    }
    let lse = log_sum_exp(&logs);
    let mut acc = vec![0.0; k];
    let mut buf = vec![0.0; k];
    for (d, l) in logs.iter().enumerate() {
        let w = (l - lse).exp();
        if w == 0.0 {
            continue;
        }
        decode(d as u64, arity, &mut e);
        stouffer_into(psi, &e, weights, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += w * b;
        }
    }
    Ok(acc)
}
