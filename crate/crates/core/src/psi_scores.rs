//! Edge-wise ψ-scores: partial correlations given a separator drawn from the
//! reduced neighborhoods, their Fisher transform, and a regression-based
//! variant that adjusts for external covariates.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_ingest::{ConditionBlock, ConditionedDataset};
use crate::edges::EdgeIndex;
use crate::error::{FbiaError, Result, Stage};
use crate::linalg::SquareMatrix;
use crate::scalar::{atanh_odd, clamp_correlation, Real};
use crate::screening::{CorrelationSummary, ReducedNeighborhoods};
use crate::special::{normal_upper_quantile, student_t_upper_tail};

/// Ridge added to a singular correlation submatrix before giving up.
pub const RIDGE: f64 = 1e-8;

/// N × K ψ-scores with per-entry separator sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiScoreMatrix<T> {
    pub edge_index: EdgeIndex,
    pub scores: Array2<T>,
    pub separator_sizes: Array2<u32>,
    /// n_k − |S| − 3.
    pub effective_n: Array2<u32>,
}

impl<T: Real> PsiScoreMatrix<T> {
    /// Wraps a score matrix without separator bookkeeping (sizes zero).
    pub fn from_scores(p: usize, scores: Array2<T>) -> Result<Self> {
        let edge_index = EdgeIndex::new(p);
        if scores.nrows() != edge_index.len() {
            return Err(FbiaError::Shape(format!(
                "{} rows for p = {p} ({} pairs)",
                scores.nrows(),
                edge_index.len()
            )));
        }
        let dim = scores.dim();
        Ok(PsiScoreMatrix {
            edge_index,
            scores,
            separator_sizes: Array2::zeros(dim),
            effective_n: Array2::zeros(dim),
        })
    }

    pub fn n_edges(&self) -> usize {
        self.scores.nrows()
    }

    pub fn k(&self) -> usize {
        self.scores.ncols()
    }
}

/// S_ij = (neighbors(i) ∪ neighbors(j)) \ {i, j}, sorted by node index.
/// When `n − |S| − 3 < 1` the members least correlated with the pair are
/// dropped until it fits.
pub fn separator<T: Real>(i: usize, j: usize, rn: &ReducedNeighborhoods, cs: &CorrelationSummary<T>) -> Vec<usize> {
    let mut s: Vec<usize> = rn.neighbors[i]
        .iter()
        .chain(&rn.neighbors[j])
        .copied()
        .filter(|&m| m != i && m != j)
        .collect();
    s.sort_unstable();
    s.dedup();
    let max_size = cs.n.saturating_sub(4);
    if s.len() > max_size {
        let strength = |m: usize| cs.corr[[i, m]].abs().max(cs.corr[[j, m]].abs());
        s.sort_by(|&a, &b| {
            strength(b)
                .partial_cmp(&strength(a))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        s.truncate(max_size);
        s.sort_unstable();
    }
    s
}

/// ρ_{ij|S} from a full correlation matrix.
///
/// The submatrix is ordered `[S, i, j]`; its Cholesky factor's trailing 2×2
/// block is the factor of the conditional covariance of (i, j) given S.
pub fn partial_correlation_from<T: Real>(corr: &Array2<T>, i: usize, j: usize, s: &[usize]) -> Result<T> {
    let order: Vec<usize> = s.iter().copied().chain([i, j]).collect();
    let m = order.len();
    let mut sub = SquareMatrix::from_fn(m, |a, b| corr[[order[a], order[b]]]);
    let chol = match sub.cholesky() {
        Some(c) => c,
        None => {
            sub.add_to_diagonal(T::of(RIDGE));
            sub.cholesky().ok_or(FbiaError::DegenerateSeparator { i, j })?
        }
    };
    let lji = chol.l(m - 1, m - 2);
    let ljj = chol.l(m - 1, m - 1);
    let r = lji / (lji * lji + ljj * ljj).sqrt();
    Ok(clamp_correlation(r))
}

/// ρ_{ij|S} from the raw columns of one condition.
pub fn partial_correlation<T: Real>(block: &ConditionBlock<T>, i: usize, j: usize, s: &[usize]) -> Result<T> {
    if i == j || s.contains(&i) || s.contains(&j) {
        return Err(FbiaError::Parameter(format!("separator for ({i}, {j}) must exclude both nodes")));
    }
    if s.len() + 2 > block.n().saturating_sub(1) {
        return Err(FbiaError::Parameter(format!(
            "separator of size {} too large for n = {}",
            s.len(),
            block.n()
        )));
    }
    let nodes: Vec<usize> = s.iter().copied().chain([i, j]).collect();
    let cols = block.data.select(ndarray::Axis(1), &nodes);
    let corr = crate::screening::correlation_matrix(&cols);
    let m = nodes.len();
    let local: Vec<usize> = (0..m - 2).collect();
    partial_correlation_from(&corr, m - 2, m - 1, &local)
}

/// Fisher-transformed score `sqrt(n−|S|−3)/2 · ln((1+ψ̃)/(1−ψ̃))`.
#[inline]
pub fn psi_score<T: Real>(psi_tilde: T, n: usize, s_size: usize) -> T {
    debug_assert!(n >= s_size + 4);
    let r = clamp_correlation(psi_tilde);
    T::of_usize(n - s_size - 3).sqrt() * atanh_odd(r)
}

/// How a regression p-value becomes a score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjustedScoreForm {
    /// sign(β̂)·Φ⁻¹(1 − p/2): two-sided, keeps the direction of the effect.
    #[default]
    Signed,
    /// Φ⁻¹(1 − p): nonnegative up to p > 1/2.
    Unsigned,
}

/// Covariate-adjusted score for the pair (i, j): OLS of X_i on an intercept,
/// the covariates, X_j and X_S, converted from the t-test p-value of X_j.
pub fn adjusted_psi_score<T: Real>(
    block: &ConditionBlock<T>,
    i: usize,
    j: usize,
    s: &[usize],
    form: AdjustedScoreForm,
) -> Result<T> {
    let n = block.n();
    let col = |c: usize| -> Vec<f64> { block.data.column(c).iter().map(|v| v.f64()).collect() };
    let y = col(i);

    // Columns in the order they enter the Gram-Schmidt sweep. X_j goes last
    // so its coefficient and standard error come straight out of R.
    let mut design: Vec<(Vec<f64>, Role)> = vec![(vec![1.0; n], Role::Intercept)];
    if let Some(cov) = &block.covariates {
        for (c, name) in cov.names.iter().enumerate() {
            let v = cov.values.column(c).iter().map(|x| x.f64()).collect();
            design.push((v, Role::Covariate(name.clone())));
        }
    }
    for &m in s {
        design.push((col(m), Role::Separator(m)));
    }
    design.push((col(j), Role::Target));

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(design.len());
    let mut last_diag = 0.0;
    for (v, role) in design {
        let norm0 = dot(&v, &v).sqrt();
        let mut w = v;
        // Two passes of modified Gram-Schmidt for stability.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm <= 1e-10 * norm0.max(f64::MIN_POSITIVE) || norm == 0.0 {
            match role {
                Role::Intercept => {}
                Role::Covariate(name) => {
                    log::warn!("covariate '{name}' is collinear with earlier columns for pair ({i}, {j}); dropped");
                }
                Role::Separator(m) => {
                    log::warn!("separator node {m} is collinear with earlier columns for pair ({i}, {j}); dropped");
                }
                Role::Target => {
                    return Err(FbiaError::DegenerateRegression {
                        i,
                        j,
                        reason: format!("column {j} is collinear with the covariates and separator"),
                    });
                }
            }
            continue;
        }
        w.iter_mut().for_each(|a| *a /= norm);
        if matches!(role, Role::Target) {
            last_diag = norm;
        }
        basis.push(w);
    }
    let rank = basis.len();
    if n <= rank {
        return Err(FbiaError::DegenerateRegression {
            i,
            j,
            reason: format!("no residual degrees of freedom (n = {n}, rank = {rank})"),
        });
    }
    let df = (n - rank) as f64;
    let mut resid = y.clone();
    let mut proj_target = 0.0;
    for (idx, q) in basis.iter().enumerate() {
        let c = dot(q, &resid);
        if idx == rank - 1 {
            proj_target = c;
        }
        resid.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
    }
    let y_norm = dot(&y, &y).sqrt();
    let rss = dot(&resid, &resid);
    // An effect indistinguishable from rounding is treated as exactly zero.
    let p = if proj_target.abs() <= 1e-12 * y_norm.max(f64::MIN_POSITIVE) {
        1.0
    } else if rss <= 0.0 {
        0.0
    } else {
        let sigma = (rss / df).sqrt();
        let beta = proj_target / last_diag;
        let se = sigma / last_diag;
        (2.0 * student_t_upper_tail(beta / se, df)).min(1.0)
    };
    let sign = proj_target.signum();
    let score = match form {
        AdjustedScoreForm::Signed => {
            if p >= 1.0 {
                0.0
            } else {
                sign * normal_upper_quantile(p / 2.0)
            }
        }
        AdjustedScoreForm::Unsigned => normal_upper_quantile(p),
    };
    Ok(T::of(score))
}

enum Role {
    Intercept,
    Covariate(String),
    Separator(usize),
    Target,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How entries of the ψ-score matrix are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsiOptions {
    /// Use the covariate-adjusted regression score.
    pub adjust: bool,
    pub form: AdjustedScoreForm,
}

/// Fills all N × K ψ-scores. `screening[k]` pairs the correlation summary
/// and reduced neighborhoods of condition k.
pub fn compute_psi_matrix<T: Real>(
    ds: &ConditionedDataset<T>,
    screening: &[(&CorrelationSummary<T>, &ReducedNeighborhoods)],
    options: PsiOptions,
) -> Result<PsiScoreMatrix<T>> {
    let k = ds.k();
    if screening.len() != k {
        return Err(FbiaError::Shape(format!("{} screening results for {k} conditions", screening.len())));
    }
    let edge_index = EdgeIndex::new(ds.p());
    let n_edges = edge_index.len();
    let rows: Vec<Result<Vec<(T, u32, u32)>>> = (0..n_edges)
        .into_par_iter()
        .map(|l| {
            let (i, j) = edge_index.pair(l);
            (0..k)
                .map(|c| {
                    let (cs, rn) = screening[c];
                    let block = ds.condition(c);
                    let s = separator(i, j, rn, cs);
                    let n = block.n();
                    let score = if options.adjust {
                        adjusted_psi_score(block, i, j, &s, options.form)
                    } else {
                        partial_correlation_from(&cs.corr, i, j, &s).map(|r| psi_score(r, n, s.len()))
                    }
                    .map_err(|e| e.at_edge(l, c))?;
                    Ok((score, s.len() as u32, (n - s.len() - 3) as u32))
                })
                .collect()
        })
        .collect();
    let mut scores = Array2::zeros((n_edges, k));
    let mut separator_sizes = Array2::zeros((n_edges, k));
    let mut effective_n = Array2::zeros((n_edges, k));
    for (l, row) in rows.into_iter().enumerate() {
        let row = row.map_err(|e| e.in_stage(Stage::PsiScores))?;
        for (c, (score, size, eff)) in row.into_iter().enumerate() {
            scores[[l, c]] = score;
            separator_sizes[[l, c]] = size;
            effective_n[[l, c]] = eff;
        }
    }
    Ok(PsiScoreMatrix {
        edge_index,
        scores,
        separator_sizes,
        effective_n,
    })
}
