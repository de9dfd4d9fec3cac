//! TOML configuration files and flag/file/default resolution.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

/// Keys accepted under `[simulate]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub kind: Option<String>,
    pub p: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub lineage: Option<String>,
    pub frac: Option<f64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub magnitude: Option<f64>,
    pub hub_group_size: Option<usize>,
    pub ridge: Option<f64>,
}

/// Keys accepted under `[fit]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub prior: Option<String>,
    pub arity: Option<u8>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub a1: Option<f64>,
    pub b1: Option<f64>,
    pub a2: Option<f64>,
    pub b2: Option<f64>,
    pub dirichlet: Option<[f64; 3]>,
    pub engine: Option<String>,
    pub method: Option<String>,
    pub screen_method: Option<String>,
    pub xi: Option<f64>,
    pub sweeps: Option<usize>,
    pub burn_in: Option<usize>,
    pub gibbs_estimator: Option<String>,
    pub seed: Option<u64>,
    pub adjust_covariates: Option<bool>,
    pub unsigned_adjusted: Option<bool>,
    pub pin_null_mean: Option<bool>,
    pub two_step: Option<bool>,
    pub weights: Option<Vec<f64>>,
    pub standardize: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub simulate: SimulateFile,
    #[serde(default)]
    pub fit: FitFile,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}

/// Flag value, else config-file value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
