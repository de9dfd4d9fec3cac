//! Bayesian clustering of each edge's K scores into status configurations,
//! followed by Stouffer integration within status groups and posterior
//! averaging over configurations.
//!
//! Per edge, scores with the same status are modeled as draws from a common
//! normal with unknown mean and variance. The mean (flat prior) and variance
//! (inverse gamma) are integrated out in closed form, as is the change
//! probability of the prior over configurations. Everything is computed in
//! log space.

pub mod gibbs;
pub mod posterior;
pub mod prior;
pub mod stouffer;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gibbs::{edge_seed, gibbs_posterior, GibbsEstimator, GibbsSettings};
pub use posterior::{configuration_count, configurations, enumerate_posterior, log_marginal_config};
pub use prior::{change_counts, log_prior, mode, PriorKind};
pub use stouffer::stouffer_integrate;

use crate::edges::EdgeIndex;
use crate::error::{FbiaError, Result, Stage};
use crate::psi_scores::PsiScoreMatrix;
use crate::scalar::Real;

/// Number of mixture components per edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arity {
    /// Statuses {0, 1}: absent / present.
    #[serde(rename = "2")]
    Two,
    /// Statuses {−1, 0, 1}: negative / absent / positive.
    #[serde(rename = "3")]
    Three,
}

impl Arity {
    pub fn values(self) -> &'static [i8] {
        match self {
            Arity::Two => &[0, 1],
            Arity::Three => &[-1, 0, 1],
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arity::Two => "2",
            Arity::Three => "3",
        })
    }
}

impl FromStr for Arity {
    type Err = FbiaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" => Ok(Arity::Two),
            "3" => Ok(Arity::Three),
            other => Err(FbiaError::Parameter(format!("arity must be 2 or 3, got '{other}'"))),
        }
    }
}

/// Prior hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureHyperparams {
    /// Beta prior on the change probability.
    pub a1: f64,
    pub b1: f64,
    /// Inverse-gamma prior on each group variance.
    pub a2: f64,
    pub b2: f64,
    /// Dirichlet prior over change magnitudes 0, 1, 2 (three components).
    pub alpha: [f64; 3],
}

impl Default for MixtureHyperparams {
    fn default() -> Self {
        MixtureHyperparams {
            a1: 1.0,
            b1: 10.0,
            a2: 1.0,
            b2: 1.0,
            alpha: [10.0, 1.0, 1.0],
        }
    }
}

impl MixtureHyperparams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a1, self.b1, self.a2, self.b2, self.alpha[0], self.alpha[1], self.alpha[2]];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(FbiaError::Parameter(format!("hyperparameters must be positive: {self:?}")))
        }
    }
}

/// Status vector of one edge across the K conditions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeConfiguration(pub Vec<i8>);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorMethod {
    Exact,
    Gibbs,
}

/// Posterior of one edge over the configurations it supports (all of them
/// for enumeration, the visited ones for Gibbs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgePosterior<T> {
    pub edge: (usize, usize),
    pub configs: Vec<EdgeConfiguration>,
    pub probs: Vec<f64>,
    /// Stouffer-integrated K-vector per configuration.
    pub integrated: Vec<Vec<T>>,
    pub method: PosteriorMethod,
}

impl<T: Real> EdgePosterior<T> {
    /// Up to `m` configurations by descending probability.
    pub fn top(&self, m: usize) -> Vec<(&EdgeConfiguration, f64)> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        idx.into_iter().take(m).map(|d| (&self.configs[d], self.probs[d])).collect()
    }

    /// Marginal probability that condition `k` has status `status`.
    pub fn marginal(&self, k: usize, status: i8) -> f64 {
        self.configs
            .iter()
            .zip(&self.probs)
            .filter(|(c, _)| c.0[k] == status)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Probability-weighted average of the integrated vectors.
pub fn bayes_average<T: Real>(ep: &EdgePosterior<T>) -> Vec<T> {
    let k = ep.integrated.first().map_or(0, |v| v.len());
    let mut acc = vec![0.0f64; k];
    for (v, &p) in ep.integrated.iter().zip(&ep.probs) {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += p * x.f64();
        }
    }
    acc.into_iter().map(T::of).collect()
}

/// Posterior engine selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Enumerate when arity^K fits under the cap, Gibbs otherwise.
    #[default]
    Auto,
    Exact,
    Gibbs,
}

impl FromStr for Engine {
    type Err = FbiaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Engine::Auto),
            "exact" => Ok(Engine::Exact),
            "gibbs" => Ok(Engine::Gibbs),
            other => Err(FbiaError::Parameter(format!("unknown engine '{other}'"))),
        }
    }
}

pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub prior: PriorKind,
    pub arity: Arity,
    pub hyperparams: MixtureHyperparams,
    pub engine: Engine,
    pub enumeration_cap: u64,
    pub gibbs: GibbsSettings,
    /// Master seed for per-edge Gibbs streams.
    pub seed: u64,
    /// Stouffer weights per condition; `None` means all ones.
    pub weights: Option<Vec<f64>>,
    /// Fix the mean of the status-0 group at zero.
    pub pin_null_mean: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            prior: PriorKind::Temporal,
            arity: Arity::Two,
            hyperparams: MixtureHyperparams::default(),
            engine: Engine::Auto,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            gibbs: GibbsSettings::default(),
            seed: 0,
            weights: None,
            pin_null_mean: false,
        }
    }
}

impl IntegrationConfig {
    pub fn resolved_weights(&self, k: usize) -> Result<Vec<f64>> {
        match &self.weights {
            None => Ok(vec![1.0; k]),
            Some(w) if w.len() == k && w.iter().all(|v| v.is_finite() && *v > 0.0) => Ok(w.clone()),
            Some(w) => Err(FbiaError::Parameter(format!(
                "need {k} positive Stouffer weights, got {w:?}"
            ))),
        }
    }

    /// Whether rows of K scores go through enumeration.
    pub fn uses_enumeration(&self, k: usize) -> Result<bool> {
        let fits = configuration_count(self.arity, k) <= self.enumeration_cap as u128;
        match self.engine {
            Engine::Auto => Ok(fits),
            Engine::Gibbs => Ok(false),
            Engine::Exact if fits => Ok(true),
            Engine::Exact => Err(FbiaError::Capacity {
                configurations: configuration_count(self.arity, k),
                cap: self.enumeration_cap,
            }),
        }
    }
}

/// N × K matrix of integrated scores.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedScores<T> {
    pub edge_index: EdgeIndex,
    pub scores: Array2<T>,
}

/// Integrates one row of K scores into ψ̂.
pub fn integrate_row<T: Real>(psi: &[T], edge: usize, config: &IntegrationConfig) -> Result<Vec<T>> {
    let k = psi.len();
    if k == 1 {
        return Ok(psi.to_vec());
    }
    let weights = config.resolved_weights(k)?;
    let x: Vec<f64> = psi.iter().map(|v| v.f64()).collect();
    let hp = &config.hyperparams;
    let avg = if config.uses_enumeration(k)? {
        posterior::exact_average(&x, config.prior, config.arity, hp, &weights, config.pin_null_mean, config.enumeration_cap)?
    } else {
        gibbs::gibbs_average(
            &x,
            config.prior,
            config.arity,
            hp,
            &weights,
            config.pin_null_mean,
            &config.gibbs,
            edge_seed(config.seed, edge),
        )
    };
    // Each integrated vector obeys |ψ̄| ≤ √K·max|ψ|, so the average does too;
    // the clamp only removes rounding excess.
    let bound = (k as f64).sqrt() * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(avg.into_iter().map(|v| T::of(v.clamp(-bound, bound))).collect())
}

/// Applies the per-edge integration to every row.
pub fn integrate_matrix<T: Real>(psi: &PsiScoreMatrix<T>, config: &IntegrationConfig) -> Result<IntegratedScores<T>> {
    config.hyperparams.validate()?;
    let (n_edges, k) = psi.scores.dim();
    config.resolved_weights(k)?;
    if k > 1 {
        config.uses_enumeration(k)?;
    }
    let rows: Vec<Result<Vec<T>>> = (0..n_edges)
        .into_par_iter()
        .map(|l| {
            let row: Vec<T> = psi.scores.row(l).to_vec();
            integrate_row(&row, l, config).map_err(|e| e.at_edge(l, 0))
        })
        .collect();
    let mut scores = Array2::zeros((n_edges, k));
    for (l, row) in rows.into_iter().enumerate() {
        let row = row.map_err(|e| e.in_stage(Stage::Integration))?;
        for (c, v) in row.into_iter().enumerate() {
            scores[[l, c]] = v;
        }
    }
    Ok(IntegratedScores {
        edge_index: psi.edge_index,
        scores,
    })
}

/// Full posterior of row `l`, enumerated or sampled according to `config`.
pub fn edge_posterior<T: Real>(psi: &PsiScoreMatrix<T>, l: usize, config: &IntegrationConfig) -> Result<EdgePosterior<T>> {
    let row: Vec<T> = psi.scores.row(l).to_vec();
    let k = row.len();
    let weights = config.resolved_weights(k)?;
    let edge = psi.edge_index.pair(l);
    if config.uses_enumeration(k)? {
        enumerate_posterior(
            edge,
            &row,
            config.prior,
            config.arity,
            &config.hyperparams,
            &weights,
            config.pin_null_mean,
            config.enumeration_cap,
        )
    } else {
        gibbs_posterior(
            edge,
            &row,
            config.prior,
            config.arity,
            &config.hyperparams,
            &weights,
            config.pin_null_mean,
            &config.gibbs,
            edge_seed(config.seed, l),
        )
    }
}

/// JSON record of an edge's most probable configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDump {
    pub i: usize,
    pub j: usize,
    pub method: PosteriorMethod,
    pub top: Vec<DumpEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub configuration: Vec<i8>,
    pub probability: f64,
    pub integrated: Vec<f64>,
}

/// Top-10 configurations of an edge posterior.
pub fn posterior_dump<T: Real>(ep: &EdgePosterior<T>) -> PosteriorDump {
    let mut idx: Vec<usize> = (0..ep.probs.len()).collect();
    idx.sort_by(|&a, &b| ep.probs[b].total_cmp(&ep.probs[a]).then(a.cmp(&b)));
    PosteriorDump {
        i: ep.edge.0,
        j: ep.edge.1,
        method: ep.method,
        top: idx
            .into_iter()
            .take(10)
            .map(|d| DumpEntry {
                configuration: ep.configs[d].0.clone(),
                probability: ep.probs[d],
                integrated: ep.integrated[d].iter().map(|v| v.f64()).collect(),
            })
            .collect(),
    }
}
