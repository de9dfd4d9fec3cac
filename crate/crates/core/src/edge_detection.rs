//! Joint edge detection: a multiple hypothesis test over z-like scores and
//! assembly of per-condition graph estimates.
//!
//! Two tests are available. `EmpiricalBayes` fits a two-group mixture by EM,
//! with a free normal null `N(μ₀, σ₀²)` and a non-null made of two normals
//! (symmetric about zero by default), and rejects the largest set whose mean
//! local false discovery rate stays below α. `BenjaminiYekutieli` applies the
//! step-up rule with the Σ1/i correction to two-sided N(0,1) p-values; it is
//! conservative for integrated scores whose null variance exceeds one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes::IntegratedScores;
use crate::error::{FbiaError, Result};
use crate::scalar::Real;
use crate::special::{normal_cdf, two_sided_normal_pvalue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    EmpiricalBayes,
    BenjaminiYekutieli,
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestMethod::EmpiricalBayes => "empirical-bayes",
            TestMethod::BenjaminiYekutieli => "benjamini-yekutieli",
        })
    }
}

impl FromStr for TestMethod {
    type Err = FbiaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "empirical-bayes" | "eb" | "lfdr" => Ok(TestMethod::EmpiricalBayes),
            "benjamini-yekutieli" | "by" => Ok(TestMethod::BenjaminiYekutieli),
            other => Err(FbiaError::Parameter(format!("unknown test method '{other}'"))),
        }
    }
}

/// EM settings for the two-group fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Tie the two non-null components to ±μ₁ with a shared variance and weight.
    pub symmetric: bool,
    /// Keep the null component at the median and MAD scale of the scores
    /// instead of re-estimating it. A free null is not identifiable when
    /// there is little signal: EM can shrink it to a narrow spike and call
    /// the rest of the null bulk non-null.
    pub robust_null: bool,
}

impl Default for EmSettings {
    fn default() -> Self {
        EmSettings {
            max_iterations: 10_000,
            tolerance: 1e-8,
            symmetric: true,
            robust_null: true,
        }
    }
}

/// Fitted two-group mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub null_weight: f64,
    pub null_mean: f64,
    pub null_sd: f64,
    pub pos_weight: f64,
    pub pos_mean: f64,
    pub pos_sd: f64,
    pub neg_weight: f64,
    pub neg_mean: f64,
    pub neg_sd: f64,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl MixtureFit {
    /// Local false discovery rate π₀φ₀(z) / f(z).
    pub fn lfdr(&self, z: f64) -> f64 {
        if self.pos_weight + self.neg_weight <= 0.0 {
            return 1.0;
        }
        let f0 = self.null_weight * normal_pdf(z, self.null_mean, self.null_sd);
        let f1 = self.pos_weight * normal_pdf(z, self.pos_mean, self.pos_sd)
            + self.neg_weight * normal_pdf(z, self.neg_mean, self.neg_sd);
        let total = f0 + f1;
        if total > 0.0 {
            (f0 / total).clamp(0.0, 1.0)
        } else {
            // Both densities underflow far in the tails; the wider one wins.
            let d0 = (z - self.null_mean).abs() / self.null_sd;
            let d1 = ((z - self.pos_mean).abs() / self.pos_sd)
                .min((z - self.neg_mean).abs() / self.neg_sd);
            if d0 <= d1 {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn normal_pdf(z: f64, mean: f64, sd: f64) -> f64 {
    let u = (z - mean) / sd;
    (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipleTestResult {
    /// Local FDR (empirical Bayes) or BY-adjusted p-value, per item.
    pub values: Vec<f64>,
    pub rejected: Vec<bool>,
    pub alpha: f64,
    pub requested: TestMethod,
    /// Method actually applied (differs from `requested` after an EM fallback).
    pub method: TestMethod,
    pub fit: Option<MixtureFit>,
}

impl MultipleTestResult {
    pub fn rejections(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }
}

/// Multiple test over z-like scores at level `alpha`.
pub fn multiple_test<T: Real>(scores: &[T], alpha: f64, method: TestMethod) -> Result<MultipleTestResult> {
    multiple_test_with(scores, alpha, method, &EmSettings::default())
}

pub fn multiple_test_with<T: Real>(
    scores: &[T],
    alpha: f64,
    method: TestMethod,
    em: &EmSettings,
) -> Result<MultipleTestResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FbiaError::Parameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let z: Vec<f64> = scores.iter().map(|s| s.f64()).collect();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(FbiaError::Parameter("scores must be finite".into()));
    }
    match method {
        TestMethod::BenjaminiYekutieli => Ok(by_result(&z, alpha, method)),
        TestMethod::EmpiricalBayes => {
            if z.is_empty() {
                return Ok(MultipleTestResult {
                    values: vec![],
                    rejected: vec![],
                    alpha,
                    requested: method,
                    method,
                    fit: None,
                });
            }
            let first = z[0];
            if z.iter().all(|&v| v == first) {
                // No spread to fit a mixture to; nothing stands out.
                return Ok(MultipleTestResult {
                    values: vec![1.0; z.len()],
                    rejected: vec![false; z.len()],
                    alpha,
                    requested: method,
                    method,
                    fit: None,
                });
            }
            match fit_two_group(&z, em) {
                Some(fit) => {
                    let values: Vec<f64> = z.iter().map(|&v| fit.lfdr(v)).collect();
                    let rejected = reject_by_mean_lfdr(&values, alpha);
                    Ok(MultipleTestResult {
                        values,
                        rejected,
                        alpha,
                        requested: method,
                        method,
                        fit: Some(fit),
                    })
                }
                None => {
                    log::warn!(
                        "two-group EM did not converge in {} iterations; falling back to Benjamini-Yekutieli",
                        em.max_iterations
                    );
                    let mut res = by_result(&z, alpha, TestMethod::BenjaminiYekutieli);
                    res.requested = method;
                    Ok(res)
                }
            }
        }
    }
}

fn by_result(z: &[f64], alpha: f64, requested: TestMethod) -> MultipleTestResult {
    let p: Vec<f64> = z.iter().map(|&v| two_sided_normal_pvalue(v)).collect();
    let adjusted = benjamini_yekutieli_adjust(&p);
    let rejected = adjusted.iter().map(|&q| q <= alpha).collect();
    MultipleTestResult {
        values: adjusted,
        rejected,
        alpha,
        requested,
        method: TestMethod::BenjaminiYekutieli,
        fit: None,
    }
}

/// BY-adjusted p-values: q₍ᵢ₎ = min_{j ≥ i} min(1, m·c(m)·p₍ⱼ₎ / j) with
/// c(m) = Σ_{i≤m} 1/i. Rejecting q ≤ α is the BY step-up rule at level α.
pub fn benjamini_yekutieli_adjust(pvalues: &[f64]) -> Vec<f64> {
    let m = pvalues.len();
    if m == 0 {
        return vec![];
    }
    let cm: f64 = (1..=m).map(|i| 1.0 / i as f64).sum();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let mut adjusted = vec![1.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let idx = order[rank];
        let q = (m as f64 * cm * pvalues[idx] / (rank + 1) as f64).min(1.0);
        running = running.min(q);
        adjusted[idx] = running;
    }
    adjusted
}

/// Rejects the largest group of smallest lfdr values whose mean is ≤ α.
/// Items with equal lfdr are rejected together or not at all.
pub fn reject_by_mean_lfdr(lfdr: &[f64], alpha: f64) -> Vec<bool> {
    let m = lfdr.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| lfdr[a].total_cmp(&lfdr[b]).then(a.cmp(&b)));
    let mut sum = 0.0;
    let mut accepted_upto = 0;
    let mut pos = 0;
    while pos < m {
        let v = lfdr[order[pos]];
        let mut end = pos;
        while end < m && lfdr[order[end]] == v {
            sum += v;
            end += 1;
        }
        if sum / end as f64 <= alpha {
            accepted_upto = end;
        } else {
            break;
        }
        pos = end;
    }
    let mut rejected = vec![false; m];
    for &idx in &order[..accepted_upto] {
        rejected[idx] = true;
    }
    rejected
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Half-width, in null standard deviations, of the band used to estimate π₀
/// under [`EmSettings::robust_null`].
pub const CENTRAL_BAND: f64 = 1.5;

/// Fits the two-group mixture by EM. Returns `None` when the iteration cap
/// is reached before the log-likelihood settles.
pub fn fit_two_group(z: &[f64], settings: &EmSettings) -> Option<MixtureFit> {
    let n = z.len();
    let nf = n as f64;
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mean = z.iter().sum::<f64>() / nf;
    let total_sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
    let sd_floor = (1e-6 * total_sd).max(1e-12);
    let mad = 1.4826 * median(&dev);
    let mut s0 = if mad > sd_floor { mad } else { total_sd.max(sd_floor) };
    let mut m0 = med;
    let spread = dev[((0.95 * nf) as usize).min(n - 1)].max(3.0 * s0);

    let mut w0: f64 = 0.9;
    let (mut wp, mut wn): (f64, f64) = (0.05, 0.05);
    let (mut mp, mut mn) = (spread, -spread);
    let (mut sp, mut sn) = (1.5 * s0, 1.5 * s0);
    if settings.robust_null {
        // Central matching: the scores within ±c·σ₀ of the median are taken
        // to be null, so π₀ is their count over the null mass of that band.
        let c = CENTRAL_BAND;
        let inside = z.iter().filter(|v| (*v - m0).abs() <= c * s0).count() as f64;
        w0 = (inside / (nf * (2.0 * normal_cdf(c) - 1.0))).min(1.0);
        wp = 0.5 * (1.0 - w0);
        wn = wp;
    }

    let mut r0 = vec![0.0; n];
    let mut rp = vec![0.0; n];
    let mut rn = vec![0.0; n];
    let mut prev_ll = f64::NEG_INFINITY;
    for iter in 1..=settings.max_iterations {
        // E-step in log space so far-tail points keep a defined responsibility.
        let mut ll = 0.0;
        for i in 0..n {
            let l0 = w0.ln() + log_normal_pdf(z[i], m0, s0);
            let lp = if wp > 0.0 { wp.ln() + log_normal_pdf(z[i], mp, sp) } else { f64::NEG_INFINITY };
            let ln = if wn > 0.0 { wn.ln() + log_normal_pdf(z[i], mn, sn) } else { f64::NEG_INFINITY };
            let mx = l0.max(lp).max(ln);
            let e0 = (l0 - mx).exp();
            let ep = (lp - mx).exp();
            let en = (ln - mx).exp();
            let tot = e0 + ep + en;
            r0[i] = e0 / tot;
            rp[i] = ep / tot;
            rn[i] = en / tot;
            ll += mx + tot.ln();
        }

        // M-step.
        let n0: f64 = r0.iter().sum();
        let np: f64 = rp.iter().sum();
        let nn: f64 = rn.iter().sum();
        if n0 <= 0.0 {
            return None;
        }
        if !settings.robust_null {
            m0 = r0.iter().zip(z).map(|(r, v)| r * v).sum::<f64>() / n0;
            s0 = (r0.iter().zip(z).map(|(r, v)| r * (v - m0).powi(2)).sum::<f64>() / n0)
                .sqrt()
                .max(sd_floor);
        }
        if !settings.robust_null {
            w0 = n0 / nf;
        }
        let alt_total = 1.0 - w0;
        if settings.symmetric {
            let na = np + nn;
            if na > 1e-12 {
                let mu = (rp.iter().zip(z).map(|(r, v)| r * v).sum::<f64>()
                    - rn.iter().zip(z).map(|(r, v)| r * v).sum::<f64>())
                    / na;
                let var = (rp.iter().zip(z).map(|(r, v)| r * (v - mu).powi(2)).sum::<f64>()
                    + rn.iter().zip(z).map(|(r, v)| r * (v + mu).powi(2)).sum::<f64>())
                    / na;
                mp = mu;
                mn = -mu;
                sp = var.sqrt().max(s0);
                sn = sp;
                if !settings.robust_null {
                    wp = 0.5 * na / nf;
                    wn = wp;
                }
            } else if !settings.robust_null {
                wp = 0.0;
                wn = 0.0;
            }
        } else {
            if np > 1e-12 {
                mp = rp.iter().zip(z).map(|(r, v)| r * v).sum::<f64>() / np;
                sp = (rp.iter().zip(z).map(|(r, v)| r * (v - mp).powi(2)).sum::<f64>() / np)
                    .sqrt()
                    .max(s0);
            }
            if nn > 1e-12 {
                mn = rn.iter().zip(z).map(|(r, v)| r * v).sum::<f64>() / nn;
                sn = (rn.iter().zip(z).map(|(r, v)| r * (v - mn).powi(2)).sum::<f64>() / nn)
                    .sqrt()
                    .max(s0);
            }
            if settings.robust_null {
                if np + nn > 0.0 {
                    wp = alt_total * np / (np + nn);
                    wn = alt_total * nn / (np + nn);
                }
            } else {
                wp = np / nf;
                wn = nn / nf;
            }
        }

        if (ll - prev_ll).abs() <= settings.tolerance * (1.0 + ll.abs()) {
            return Some(MixtureFit {
                null_weight: w0,
                null_mean: m0,
                null_sd: s0,
                pos_weight: wp,
                pos_mean: mp,
                pos_sd: sp,
                neg_weight: wn,
                neg_mean: mn,
                neg_sd: sn,
                iterations: iter,
                log_likelihood: ll,
            });
        }
        prev_ll = ll;
    }
    None
}

fn log_normal_pdf(z: f64, mean: f64, sd: f64) -> f64 {
    let u = (z - mean) / sd;
    -0.5 * u * u - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// One detected edge in one condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedEdge<T> {
    pub i: usize,
    pub j: usize,
    /// Integrated score; its sign is the estimated sign of the partial correlation.
    pub score: T,
    /// Local FDR or adjusted p-value of this item.
    pub uncertainty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionGraph<T> {
    pub label: String,
    pub edges: Vec<DetectedEdge<T>>,
}

impl<T: Real> ConditionGraph<T> {
    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|e| (e.i, e.j)).collect()
    }

    pub fn degrees(&self, p: usize) -> Vec<usize> {
        let mut deg = vec![0; p];
        for e in &self.edges {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }
}

/// Per-condition detected edge sets with a common threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEstimate<T> {
    pub p: usize,
    pub variable_names: Vec<String>,
    pub conditions: Vec<ConditionGraph<T>>,
    pub alpha: f64,
    pub method: TestMethod,
    pub fit: Option<MixtureFit>,
}

/// Node ranked by degree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubEntry {
    pub node: usize,
    pub name: String,
    pub degree: usize,
}

impl<T: Real> GraphEstimate<T> {
    pub fn k(&self) -> usize {
        self.conditions.len()
    }

    pub fn edge_sets(&self) -> Vec<BTreeSet<(usize, usize)>> {
        self.conditions.iter().map(|c| c.edge_set()).collect()
    }

    /// Nodes by descending degree, ties broken by name.
    pub fn hub_ranking(&self, k: usize) -> Vec<HubEntry> {
        let deg = self.conditions[k].degrees(self.p);
        let mut hubs: Vec<HubEntry> = deg
            .iter()
            .enumerate()
            .map(|(node, &degree)| HubEntry {
                node,
                name: self.variable_names[node].clone(),
                degree,
            })
            .collect();
        hubs.sort_by(|a, b| b.degree.cmp(&a.degree).then_with(|| a.name.cmp(&b.name)));
        hubs
    }

    /// Edge density per condition: |E_k| / N.
    pub fn densities(&self) -> Vec<f64> {
        let n = (self.p * (self.p - 1) / 2) as f64;
        self.conditions.iter().map(|c| c.edges.len() as f64 / n).collect()
    }
}

/// Pools all N·K integrated scores into one test and assembles the
/// per-condition edge sets from the rejected items.
pub fn detect_edges<T: Real>(
    integrated: &IntegratedScores<T>,
    alpha2: f64,
    method: TestMethod,
    variable_names: &[String],
    labels: &[String],
) -> Result<GraphEstimate<T>> {
    let (n_edges, k) = integrated.scores.dim();
    if labels.len() != k {
        return Err(FbiaError::Shape(format!("{} labels for {k} conditions", labels.len())));
    }
    let p = integrated.edge_index.p();
    if variable_names.len() != p {
        return Err(FbiaError::Shape(format!(
            "{} variable names for p = {p}",
            variable_names.len()
        )));
    }
    let pooled: Vec<T> = integrated.scores.iter().copied().collect();
    let test = multiple_test(&pooled, alpha2, method)?;
    let mut per_condition: BTreeMap<usize, Vec<DetectedEdge<T>>> = BTreeMap::new();
    for l in 0..n_edges {
        let (i, j) = integrated.edge_index.pair(l);
        for kk in 0..k {
            let item = l * k + kk;
            if test.rejected[item] {
                per_condition.entry(kk).or_default().push(DetectedEdge {
                    i,
                    j,
                    score: integrated.scores[[l, kk]],
                    uncertainty: test.values[item],
                });
            }
        }
    }
    let conditions = labels
        .iter()
        .enumerate()
        .map(|(kk, label)| ConditionGraph {
            label: label.clone(),
            edges: per_condition.remove(&kk).unwrap_or_default(),
        })
        .collect();
    Ok(GraphEstimate {
        p,
        variable_names: variable_names.to_vec(),
        conditions,
        alpha: alpha2,
        method: test.method,
        fit: test.fit,
    })
}
