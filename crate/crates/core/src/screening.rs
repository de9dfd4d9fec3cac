//! Correlation screening: empirical correlation network per condition, a
//! multiple test on Fisher z statistics, and capped reduced neighborhoods.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_ingest::ConditionBlock;
use crate::edge_detection::{multiple_test, TestMethod};
use crate::edges::EdgeIndex;
use crate::error::{FbiaError, Result};
use crate::scalar::{atanh_odd, clamp_correlation, Real};
use crate::special::two_sided_normal_pvalue;

/// Empirical correlation matrix of one condition.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSummary<T> {
    pub condition_index: usize,
    /// p × p, symmetric with unit diagonal.
    pub corr: Array2<T>,
    pub n: usize,
}

impl<T: Real> CorrelationSummary<T> {
    pub fn p(&self) -> usize {
        self.corr.nrows()
    }

    pub fn edge_index(&self) -> EdgeIndex {
        EdgeIndex::new(self.p())
    }
}

/// Pearson correlations of the columns of `block.data`.
pub fn empirical_correlations<T: Real>(block: &ConditionBlock<T>, condition_index: usize) -> CorrelationSummary<T> {
    CorrelationSummary {
        condition_index,
        corr: correlation_matrix(&block.data),
        n: block.n(),
    }
}

/// Pearson correlation matrix of the columns of an n × p matrix.
pub fn correlation_matrix<T: Real>(data: &Array2<T>) -> Array2<T> {
    let (n, p) = data.dim();
    let nf = T::of_usize(n);
    // Centered columns, stored contiguously.
    let cols: Vec<Vec<T>> = (0..p)
        .map(|c| {
            let col = data.column(c);
            let mean = col.iter().copied().sum::<T>() / nf;
            col.iter().map(|&v| v - mean).collect()
        })
        .collect();
    let norms: Vec<T> = cols
        .iter()
        .map(|c| c.iter().map(|&v| v * v).sum::<T>().sqrt())
        .collect();
    let upper: Vec<Vec<T>> = (0..p)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..p)
                .map(|j| {
                    let dot: T = cols[i].iter().zip(&cols[j]).map(|(&a, &b)| a * b).sum();
                    let denom = norms[i] * norms[j];
                    if denom > T::zero() {
                        (dot / denom).max(-T::one()).min(T::one())
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect();
    let mut corr = Array2::from_elem((p, p), T::one());
    for (i, row) in upper.iter().enumerate() {
        for (off, &r) in row.iter().enumerate() {
            let j = i + 1 + off;
            corr[[i, j]] = r;
            corr[[j, i]] = r;
        }
    }
    corr
}

/// Fisher z statistic `sqrt(n−3)·atanh(r)`, with |r| clamped below 1.
#[inline]
pub fn fisher_z<T: Real>(r: T, n: usize) -> T {
    let r = clamp_correlation(r);
    T::of_usize(n - 3).sqrt() * atanh_odd(r)
}

/// Fisher z statistics for every pair, in edge-index order.
pub fn correlation_zscores<T: Real>(cs: &CorrelationSummary<T>) -> Vec<T> {
    cs.edge_index().pairs().map(|(i, j)| fisher_z(cs.corr[[i, j]], cs.n)).collect()
}

/// Two-sided p-values for H₀: r = 0, in edge-index order.
pub fn correlation_pvalues<T: Real>(cs: &CorrelationSummary<T>) -> Vec<T> {
    correlation_zscores(cs).into_iter().map(two_sided_normal_pvalue).collect()
}

/// Pairs passing the screening test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScreenedEdges {
    pub edge_index: EdgeIndex,
    /// One flag per edge row.
    pub flags: Vec<bool>,
}

impl ScreenedEdges {
    pub fn len(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.flags[self.edge_index.index(i, j)]
    }

    pub fn pairs(&self) -> BTreeSet<(usize, usize)> {
        self.edge_index
            .pairs()
            .zip(&self.flags)
            .filter(|(_, &f)| f)
            .map(|(pair, _)| pair)
            .collect()
    }
}

/// Screens pairs by a multiple test at level `alpha1` on their Fisher z
/// statistics (`zscores` in edge-index order over `p` nodes).
pub fn screen_edges<T: Real>(zscores: &[T], p: usize, alpha1: f64, method: TestMethod) -> Result<ScreenedEdges> {
    let edge_index = EdgeIndex::new(p);
    if zscores.len() != edge_index.len() {
        return Err(FbiaError::Shape(format!(
            "{} statistics for p = {p} ({} pairs)",
            zscores.len(),
            edge_index.len()
        )));
    }
    let test = multiple_test(zscores, alpha1, method)?;
    Ok(ScreenedEdges {
        edge_index,
        flags: test.rejected,
    })
}

/// Capped neighbor lists per node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedNeighborhoods {
    pub condition_index: usize,
    /// Per node, neighbors ordered by |r̂| descending, then node index.
    pub neighbors: Vec<Vec<usize>>,
    pub cap_used: usize,
}

/// `floor(n / (xi · ln n))`.
pub fn neighborhood_cap(n: usize, xi: f64) -> usize {
    let nf = n as f64;
    (nf / (xi * nf.ln())).floor() as usize
}

/// Keeps, for every node, its strongest screened neighbors up to the cap.
pub fn reduce_neighborhoods<T: Real>(
    cs: &CorrelationSummary<T>,
    screened: &ScreenedEdges,
    xi: f64,
) -> Result<ReducedNeighborhoods> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(FbiaError::Parameter(format!("xi must be positive, got {xi}")));
    }
    let p = cs.p();
    let cap = neighborhood_cap(cs.n, xi);
    let neighbors = (0..p)
        .map(|i| {
            let mut nb: Vec<usize> = (0..p).filter(|&j| j != i && screened.contains(i, j)).collect();
            nb.sort_by(|&a, &b| {
                let ra = cs.corr[[i, a]].abs();
                let rb = cs.corr[[i, b]].abs();
                rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
            });
            nb.truncate(cap);
            nb
        })
        .collect();
    Ok(ReducedNeighborhoods {
        condition_index: cs.condition_index,
        neighbors,
        cap_used: cap,
    })
}

/// Settings for the screening step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningConfig {
    pub alpha1: f64,
    pub method: TestMethod,
    pub xi: f64,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig {
            alpha1: 0.2,
            method: TestMethod::EmpiricalBayes,
            xi: 1.0,
        }
    }
}

/// Everything the screening step produces for one condition.
#[derive(Clone, Debug)]
pub struct ScreeningResult<T> {
    pub summary: CorrelationSummary<T>,
    pub screened: ScreenedEdges,
    pub neighborhoods: ReducedNeighborhoods,
}

pub fn screen_condition<T: Real>(
    block: &ConditionBlock<T>,
    condition_index: usize,
    config: &ScreeningConfig,
) -> Result<ScreeningResult<T>> {
    let summary = empirical_correlations(block, condition_index);
    let z = correlation_zscores(&summary);
    let screened = screen_edges(&z, summary.p(), config.alpha1, config.method)?;
    let neighborhoods = reduce_neighborhoods(&summary, &screened, config.xi)?;
    Ok(ScreeningResult {
        summary,
        screened,
        neighborhoods,
    })
}

/// Writes the screened network as `i,j,r,p` rows.
pub fn write_screened_csv<T: Real>(path: &Path, cs: &CorrelationSummary<T>, screened: &ScreenedEdges) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "i,j,r,p").expect("write to memory");
    for (i, j) in screened.pairs() {
        let r = cs.corr[[i, j]];
        let pv = two_sided_normal_pvalue(fisher_z(r, cs.n));
        writeln!(out, "{i},{j},{},{}", r.f64(), pv.f64()).expect("write to memory");
    }
    std::fs::write(path, out).map_err(|e| FbiaError::io(path, e))
}
