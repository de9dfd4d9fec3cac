//! End-to-end runs: screening, ψ-scores, integration and detection, plus the
//! separated baseline, the two-step group × time integration, edge-change
//! reports, the on-disk cache and artifact writing.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayes::{edge_posterior, integrate_matrix, posterior_dump, IntegratedScores, IntegrationConfig, PriorKind};
use crate::data_ingest::{standardize, ConditionedDataset};
use crate::edge_detection::{detect_edges, GraphEstimate, MixtureFit, TestMethod};
use crate::error::{FbiaError, Result, Stage};
use crate::formats;
use crate::psi_scores::{compute_psi_matrix, PsiOptions, PsiScoreMatrix};
use crate::scalar::Real;
use crate::screening::{screen_condition, write_screened_csv, ScreeningConfig, ScreeningResult};

/// Everything a fit needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub screening: ScreeningConfig,
    pub psi: PsiOptions,
    pub integration: IntegrationConfig,
    pub alpha2: f64,
    pub test_method: TestMethod,
    /// Center and scale each condition before screening.
    pub standardize: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            screening: ScreeningConfig::default(),
            psi: PsiOptions::default(),
            integration: IntegrationConfig::default(),
            alpha2: 0.05,
            test_method: TestMethod::EmpiricalBayes,
            standardize: true,
        }
    }
}

/// Per-condition screening statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningDiagnostics {
    pub label: String,
    pub n: usize,
    pub screened_pairs: usize,
    pub neighborhood_cap: usize,
    pub mean_neighborhood: f64,
    pub mean_separator: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub screening: Vec<ScreeningDiagnostics>,
    pub enumeration: bool,
    pub detection_method: TestMethod,
    pub mixture: Option<MixtureFit>,
    pub psi_cache_hit: bool,
    pub integration_cache_hit: bool,
}

#[derive(Clone, Debug)]
pub struct FitResult<T> {
    pub psi: PsiScoreMatrix<T>,
    pub integrated: IntegratedScores<T>,
    pub graph: GraphEstimate<T>,
    pub screening: Vec<ScreeningResult<T>>,
    pub diagnostics: Diagnostics,
}

fn prepare<T: Real>(ds: &ConditionedDataset<T>, config: &FitConfig) -> Result<ConditionedDataset<T>> {
    if config.standardize {
        standardize(ds).map_err(|e| e.in_stage(Stage::Ingest))
    } else {
        Ok(ds.clone())
    }
}

fn run_screening<T: Real>(ds: &ConditionedDataset<T>, config: &ScreeningConfig) -> Result<Vec<ScreeningResult<T>>> {
    ds.conditions()
        .iter()
        .enumerate()
        .map(|(k, block)| screen_condition(block, k, config))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage(Stage::Screening))
}

fn psi_matrix<T: Real>(
    ds: &ConditionedDataset<T>,
    screening: &[ScreeningResult<T>],
    options: PsiOptions,
) -> Result<PsiScoreMatrix<T>> {
    let pairs: Vec<_> = screening.iter().map(|s| (&s.summary, &s.neighborhoods)).collect();
    compute_psi_matrix(ds, &pairs, options)
}

fn screening_diagnostics<T: Real>(
    ds: &ConditionedDataset<T>,
    screening: &[ScreeningResult<T>],
    psi: &PsiScoreMatrix<T>,
) -> Vec<ScreeningDiagnostics> {
    screening
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let p = s.neighborhoods.neighbors.len().max(1);
            let nb: usize = s.neighborhoods.neighbors.iter().map(|v| v.len()).sum();
            let seps = psi.separator_sizes.column(k);
            ScreeningDiagnostics {
                label: ds.condition(k).label.clone(),
                n: s.summary.n,
                screened_pairs: s.screened.len(),
                neighborhood_cap: s.neighborhoods.cap_used,
                mean_neighborhood: nb as f64 / p as f64,
                mean_separator: seps.iter().map(|&v| v as f64).sum::<f64>() / seps.len().max(1) as f64,
            }
        })
        .collect()
}

/// Screening → ψ-scores → integration → detection.
pub fn fbia_fit<T: Real>(ds: &ConditionedDataset<T>, config: &FitConfig) -> Result<FitResult<T>> {
    fit_with_cache(ds, config, None)
}

/// Like [`fbia_fit`], reusing ψ-score and integrated matrices stored under
/// `cache_dir` when the inputs that determine them are unchanged.
pub fn fit_with_cache<T: Real>(
    ds: &ConditionedDataset<T>,
    config: &FitConfig,
    cache_dir: Option<&Path>,
) -> Result<FitResult<T>> {
    let data = prepare(ds, config)?;
    let screening = run_screening(&data, &config.screening)?;

    let psi_key = cache_key(&data, &[&serde_json::to_value(config.screening)?, &serde_json::to_value(config.psi)?]);
    let psi_path = cache_dir.map(|d| d.join(format!("psi_{psi_key}.bin")));
    let (psi, psi_hit) = match psi_path.as_deref().filter(|p| p.exists()) {
        Some(path) => (formats::psi_from_cache(formats::read_cache(path)?)?, true),
        None => {
            let psi = psi_matrix(&data, &screening, config.psi)?;
            if let Some(path) = &psi_path {
                formats::write_cache(path, &formats::psi_to_cache(&psi)).map_err(|e| e.in_stage(Stage::Output))?;
            }
            (psi, false)
        }
    };

    let int_key = hash_strings(&[&psi_key, &serde_json::to_string(&config.integration)?]);
    let int_path = cache_dir.map(|d| d.join(format!("integrated_{int_key}.bin")));
    let (integrated, int_hit) = match int_path.as_deref().filter(|p| p.exists()) {
        Some(path) => (formats::integrated_from_cache(formats::read_cache(path)?), true),
        None => {
            let integrated = integrate_matrix(&psi, &config.integration)?;
            if let Some(path) = &int_path {
                formats::write_cache(path, &formats::integrated_to_cache(&integrated))
                    .map_err(|e| e.in_stage(Stage::Output))?;
            }
            (integrated, false)
        }
    };

    let graph = detect_edges(
        &integrated,
        config.alpha2,
        config.test_method,
        data.variable_names(),
        &data.labels(),
    )
    .map_err(|e| e.in_stage(Stage::Detection))?;

    let enumeration = data.k() == 1 || config.integration.uses_enumeration(data.k())?;
    let diagnostics = Diagnostics {
        screening: screening_diagnostics(&data, &screening, &psi),
        enumeration,
        detection_method: graph.method,
        mixture: graph.fit,
        psi_cache_hit: psi_hit,
        integration_cache_hit: int_hit,
    };
    Ok(FitResult {
        psi,
        integrated,
        graph,
        screening,
        diagnostics,
    })
}

/// Separated analysis: each condition's ψ-scores are used as they are and
/// tested on their own.
pub fn separated_fit<T: Real>(ds: &ConditionedDataset<T>, config: &FitConfig) -> Result<FitResult<T>> {
    let data = prepare(ds, config)?;
    let screening = run_screening(&data, &config.screening)?;
    let psi = psi_matrix(&data, &screening, config.psi)?;
    let integrated = IntegratedScores {
        edge_index: psi.edge_index,
        scores: psi.scores.clone(),
    };
    let names = data.variable_names();
    let labels = data.labels();
    let mut conditions = Vec::with_capacity(data.k());
    let mut method = config.test_method;
    for k in 0..data.k() {
        let column = IntegratedScores {
            edge_index: psi.edge_index,
            scores: psi.scores.slice(ndarray::s![.., k..k + 1]).to_owned(),
        };
        let g = detect_edges(&column, config.alpha2, config.test_method, names, &labels[k..k + 1])
            .map_err(|e| e.in_stage(Stage::Detection))?;
        method = g.method;
        conditions.extend(g.conditions);
    }
    let graph = GraphEstimate {
        p: data.p(),
        variable_names: names.to_vec(),
        conditions,
        alpha: config.alpha2,
        method,
        fit: None,
    };
    let diagnostics = Diagnostics {
        screening: screening_diagnostics(&data, &screening, &psi),
        enumeration: true,
        detection_method: method,
        mixture: None,
        psi_cache_hit: false,
        integration_cache_hit: false,
    };
    Ok(FitResult {
        psi,
        integrated,
        graph,
        screening,
        diagnostics,
    })
}

/// Output of the two-step group × time integration.
#[derive(Clone, Debug)]
pub struct TwoStepResult<T> {
    pub psi: [PsiScoreMatrix<T>; 2],
    /// Within-group integration over time.
    pub stage1: [IntegratedScores<T>; 2],
    /// N × 2K: group one's K time points, then group two's.
    pub stage2: IntegratedScores<T>,
    pub graph: GraphEstimate<T>,
}

/// Integrates over time within each group, then across the two groups at
/// each time point with a K = 2 temporal prior, and detects edges over all
/// 2K columns at once.
pub fn two_step_integration<T: Real>(
    groups: [&ConditionedDataset<T>; 2],
    group_names: [&str; 2],
    config: &FitConfig,
) -> Result<TwoStepResult<T>> {
    let k = groups[0].k();
    if groups[1].k() != k {
        return Err(FbiaError::Shape(format!(
            "groups have {} and {} time points",
            k,
            groups[1].k()
        )));
    }
    if groups[0].variable_names() != groups[1].variable_names() {
        return Err(FbiaError::Shape("groups measure different variables".into()));
    }
    let mut psis = Vec::with_capacity(2);
    let mut stage1 = Vec::with_capacity(2);
    for (g, ds) in groups.iter().enumerate() {
        let data = prepare(ds, config)?;
        let screening = run_screening(&data, &config.screening)?;
        let psi = psi_matrix(&data, &screening, config.psi)?;
        let mut cfg = config.integration.clone();
        cfg.prior = PriorKind::Temporal;
        cfg.seed = crate::bayes::gibbs::splitmix64(config.integration.seed ^ (g as u64 + 1));
        stage1.push(integrate_matrix(&psi, &cfg)?);
        psis.push(psi);
    }
    let edge_index = stage1[0].edge_index;
    let n_edges = edge_index.len();
    let mut stage2 = Array2::zeros((n_edges, 2 * k));
    for t in 0..k {
        let mut pair = Array2::zeros((n_edges, 2));
        pair.column_mut(0).assign(&stage1[0].scores.column(t));
        pair.column_mut(1).assign(&stage1[1].scores.column(t));
        let psi_t = PsiScoreMatrix::from_scores(edge_index.p(), pair)?;
        let mut cfg = config.integration.clone();
        cfg.prior = PriorKind::Temporal;
        cfg.seed = crate::bayes::gibbs::splitmix64(config.integration.seed ^ (0x100 + t as u64));
        let out = integrate_matrix(&psi_t, &cfg)?;
        stage2.column_mut(t).assign(&out.scores.column(0));
        stage2.column_mut(k + t).assign(&out.scores.column(1));
    }
    let stage2 = IntegratedScores { edge_index, scores: stage2 };
    let labels: Vec<String> = group_names
        .iter()
        .zip(groups)
        .flat_map(|(name, ds)| ds.labels().into_iter().map(move |l| format!("{name}:{l}")))
        .collect();
    let graph = detect_edges(&stage2, config.alpha2, config.test_method, groups[0].variable_names(), &labels)
        .map_err(|e| e.in_stage(Stage::Detection))?;
    let [a, b]: [PsiScoreMatrix<T>; 2] = psis.try_into().map_err(|_| FbiaError::Shape("two groups".into()))?;
    let [s1, s2]: [IntegratedScores<T>; 2] = stage1.try_into().map_err(|_| FbiaError::Shape("two groups".into()))?;
    Ok(TwoStepResult {
        psi: [a, b],
        stage1: [s1, s2],
        stage2,
        graph,
    })
}

/// Edge-status changes from one condition to the next.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeChange {
    pub from: String,
    pub to: String,
    /// In `to` but not in `from`.
    pub new: Vec<(usize, usize)>,
    /// In both.
    pub persisting: Vec<(usize, usize)>,
    /// In `from` but not in `to`.
    pub disappearing: Vec<(usize, usize)>,
}

pub fn edge_changes<T: Real>(graph: &GraphEstimate<T>) -> Vec<EdgeChange> {
    let sets = graph.edge_sets();
    (1..sets.len())
        .map(|k| {
            let prev: &BTreeSet<_> = &sets[k - 1];
            let cur = &sets[k];
            EdgeChange {
                from: graph.conditions[k - 1].label.clone(),
                to: graph.conditions[k].label.clone(),
                new: cur.difference(prev).copied().collect(),
                persisting: cur.intersection(prev).copied().collect(),
                disappearing: prev.difference(cur).copied().collect(),
            }
        })
        .collect()
}

/// Hex digest prefix over the dataset values and serialized settings.
pub fn cache_key<T: Real>(ds: &ConditionedDataset<T>, settings: &[&serde_json::Value]) -> String {
    let mut h = Sha256::new();
    h.update(b"fbia-cache-v1");
    h.update((ds.p() as u64).to_le_bytes());
    for name in ds.variable_names() {
        h.update(name.as_bytes());
        h.update([0]);
    }
    for block in ds.conditions() {
        h.update((block.n() as u64).to_le_bytes());
        for v in block.data.iter() {
            h.update(v.f64().to_le_bytes());
        }
        if let Some(cov) = &block.covariates {
            for v in cov.values.iter() {
                h.update(v.f64().to_le_bytes());
            }
        }
    }
    for s in settings {
        h.update(s.to_string().as_bytes());
    }
    hex16(&h.finalize())
}

fn hash_strings(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    hex16(&h.finalize())
}

fn hex16(bytes: &[u8]) -> String {
    bytes.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

/// Options for [`write_fit_outputs`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputOptions {
    /// Dump each condition's screened network.
    pub screening_debug: bool,
    /// Number of edges (largest max |ψ̂|) whose top configurations are dumped.
    pub posterior_dumps: usize,
    /// Hubs listed per condition in the graph summary.
    pub hubs: usize,
}

/// Writes scores, edge lists, summaries and diagnostics under `dir`;
/// returns the files written, relative to `dir`.
pub fn write_fit_outputs<T: Real>(
    dir: &Path,
    fit: &FitResult<T>,
    config: &FitConfig,
    options: &OutputOptions,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut rel = |p: &str| {
        written.push(PathBuf::from(p));
        dir.join(p)
    };
    formats::write_psi_csv(&rel("psi_scores.csv"), &fit.psi)?;
    formats::write_integrated_csv(&rel("integrated_scores.csv"), &fit.integrated)?;
    for k in 0..fit.graph.k() {
        formats::write_edges_csv(&rel(&format!("edges/cond_{}.csv", k + 1)), &fit.graph, k)?;
    }
    formats::write_json(&rel("graph_summary.json"), &formats::graph_summary(&fit.graph, options.hubs.max(1)))?;
    formats::write_json(&rel("edge_changes.json"), &edge_changes(&fit.graph))?;
    formats::write_json(&rel("diagnostics.json"), &fit.diagnostics)?;
    if options.screening_debug {
        for (k, s) in fit.screening.iter().enumerate() {
            let path = rel(&format!("screening/screened_cond_{}.csv", k + 1));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| FbiaError::io(parent, e))?;
            }
            write_screened_csv(&path, &s.summary, &s.screened)?;
        }
    }
    if options.posterior_dumps > 0 && fit.psi.k() > 1 {
        let mut order: Vec<(usize, f64)> = (0..fit.integrated.scores.nrows())
            .map(|l| {
                let m = fit.integrated.scores.row(l).iter().fold(0.0f64, |a, v| a.max(v.f64().abs()));
                (l, m)
            })
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let dumps = order
            .into_iter()
            .take(options.posterior_dumps)
            .map(|(l, _)| edge_posterior(&fit.psi, l, &config.integration).map(|ep| posterior_dump(&ep)))
            .collect::<Result<Vec<_>>>()?;
        formats::write_json(&rel("posteriors.json"), &dumps)?;
    }
    Ok(written)
}

/// PR sweep that reruns detection at each α₂ instead of thresholding |ψ̂|.
pub fn alpha_sweep_points<T: Real>(
    integrated: &IntegratedScores<T>,
    truth: &[BTreeSet<(usize, usize)>],
    alphas: &[f64],
    method: TestMethod,
) -> Result<Vec<crate::evaluation::PrPoint>> {
    let p = integrated.edge_index.p();
    let names: Vec<String> = (0..p).map(|i| i.to_string()).collect();
    let labels: Vec<String> = (0..integrated.scores.ncols()).map(|k| k.to_string()).collect();
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for a in sorted {
        let g = detect_edges(integrated, a, method, &names, &labels)?;
        let c = crate::evaluation::confusion(&g.edge_sets(), truth, p)?;
        if c.cumulated.tp + c.cumulated.fp == 0 {
            continue;
        }
        out.push(crate::evaluation::PrPoint {
            threshold: a,
            recall: c.cumulated.recall(),
            precision: c.cumulated.precision(),
        });
    }
    Ok(out)
}

