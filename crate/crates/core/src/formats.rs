//! On-disk formats: score matrices as CSV and as a versioned binary cache,
//! per-condition edge lists, and the JSON graph summary.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bayes::IntegratedScores;
use crate::edge_detection::{GraphEstimate, HubEntry, TestMethod};
use crate::edges::EdgeIndex;
use crate::error::{FbiaError, Result};
use crate::psi_scores::PsiScoreMatrix;
use crate::scalar::Real;

pub const CACHE_MAGIC: &[u8; 8] = b"FBIACACH";
pub const CACHE_VERSION: u32 = 1;

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| FbiaError::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| FbiaError::io(path, e))
}

/// `i,j,cond_1..cond_K,sep_1..sep_K`, nodes 0-based.
pub fn write_psi_csv<T: Real>(path: &Path, m: &PsiScoreMatrix<T>) -> Result<()> {
    let k = m.k();
    let mut s = String::from("i,j");
    for c in 1..=k {
        let _ = write!(s, ",cond_{c}");
    }
    for c in 1..=k {
        let _ = write!(s, ",sep_{c}");
    }
    s.push('\n');
    for (l, (i, j)) in m.edge_index.pairs().enumerate() {
        let _ = write!(s, "{i},{j}");
        for c in 0..k {
            let _ = write!(s, ",{}", m.scores[[l, c]].f64());
        }
        for c in 0..k {
            let _ = write!(s, ",{}", m.separator_sizes[[l, c]]);
        }
        s.push('\n');
    }
    write_file(path, s)
}

/// `i,j,cond_1..cond_K`.
pub fn write_integrated_csv<T: Real>(path: &Path, m: &IntegratedScores<T>) -> Result<()> {
    let k = m.scores.ncols();
    let mut s = String::from("i,j");
    for c in 1..=k {
        let _ = write!(s, ",cond_{c}");
    }
    s.push('\n');
    for (l, (i, j)) in m.edge_index.pairs().enumerate() {
        let _ = write!(s, "{i},{j}");
        for c in 0..k {
            let _ = write!(s, ",{}", m.scores[[l, c]].f64());
        }
        s.push('\n');
    }
    write_file(path, s)
}

/// Reads a score CSV written by [`write_psi_csv`] or
/// [`write_integrated_csv`]; returns the score columns and p.
pub fn read_score_csv(path: &Path) -> Result<(usize, Array2<f64>)> {
    let fmt_err = |msg: String| FbiaError::Format(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| fmt_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| fmt_err(e.to_string()))?.clone();
    let k = headers.iter().filter(|h| h.starts_with("cond_")).count();
    if headers.get(0) != Some("i") || headers.get(1) != Some("j") || k == 0 {
        return Err(fmt_err("expected header i,j,cond_1,...".into()));
    }
    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
        let get = |c: usize| -> Result<&str> { rec.get(c).ok_or_else(|| fmt_err(format!("row {} is short", r + 2))) };
        let bad = |c: usize| fmt_err(format!("bad value at row {}, column {}", r + 2, c + 1));
        let i: usize = get(0)?.parse().map_err(|_| bad(0))?;
        let j: usize = get(1)?.parse().map_err(|_| bad(1))?;
        let vals = (0..k)
            .map(|c| get(2 + c)?.parse::<f64>().map_err(|_| bad(2 + c)))
            .collect::<Result<Vec<_>>>()?;
        rows.push((i, j, vals));
    }
    let p = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    let idx = EdgeIndex::new(p);
    if rows.len() != idx.len() {
        return Err(fmt_err(format!("{} rows, expected {} for p = {p}", rows.len(), idx.len())));
    }
    let mut scores = Array2::zeros((idx.len(), k));
    for (i, j, vals) in rows {
        let l = idx.index(i, j);
        for (c, v) in vals.into_iter().enumerate() {
            scores[[l, c]] = v;
        }
    }
    Ok((p, scores))
}

/// Binary cache payload.
#[derive(Clone, Debug, PartialEq)]
pub struct CachedMatrix {
    pub p: usize,
    pub scores: Array2<f64>,
    /// Separator sizes and effective sample sizes, present for ψ-score caches.
    pub separator_sizes: Option<Array2<u32>>,
    pub effective_n: Option<Array2<u32>>,
}

/// Layout: magic, version (u32), p (u64), K (u64), flag (u8), N·K f64
/// scores, then N·K u32 separator sizes and N·K u32 effective sizes when the
/// flag is 1. Little endian throughout.
pub fn encode_cache(m: &CachedMatrix) -> Vec<u8> {
    let (n, k) = m.scores.dim();
    let mut out = Vec::with_capacity(32 + n * k * 16);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.p as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    let extras = m.separator_sizes.as_ref().zip(m.effective_n.as_ref());
    out.push(u8::from(extras.is_some()));
    for v in m.scores.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some((s, e)) = extras {
        for v in s.iter().chain(e.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_cache(bytes: &[u8]) -> Result<CachedMatrix> {
    let err = |m: &str| FbiaError::Format(format!("cache: {m}"));
    let mut pos = 0usize;
    let mut take = |len: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + len).ok_or_else(|| err("truncated"))?;
        pos += len;
        Ok(s)
    };
    if take(8)? != CACHE_MAGIC {
        return Err(err("bad magic bytes"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
    if version != CACHE_VERSION {
        return Err(err(&format!("unsupported version {version}")));
    }
    let p = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let k = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let flag = take(1)?[0];
    let n = EdgeIndex::new(p).len();
    let mut scores = Array2::zeros((n, k));
    for v in scores.iter_mut() {
        *v = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
    }
    let (separator_sizes, effective_n) = if flag == 1 {
        let mut s = Array2::zeros((n, k));
        for v in s.iter_mut() {
            *v = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        }
        let mut e = Array2::zeros((n, k));
        for v in e.iter_mut() {
            *v = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        }
        (Some(s), Some(e))
    } else {
        (None, None)
    };
    if pos != bytes.len() {
        return Err(err("trailing bytes"));
    }
    Ok(CachedMatrix {
        p,
        scores,
        separator_sizes,
        effective_n,
    })
}

pub fn psi_to_cache<T: Real>(m: &PsiScoreMatrix<T>) -> CachedMatrix {
    CachedMatrix {
        p: m.edge_index.p(),
        scores: m.scores.mapv(|v| v.f64()),
        separator_sizes: Some(m.separator_sizes.clone()),
        effective_n: Some(m.effective_n.clone()),
    }
}

pub fn psi_from_cache<T: Real>(c: CachedMatrix) -> Result<PsiScoreMatrix<T>> {
    let (Some(separator_sizes), Some(effective_n)) = (c.separator_sizes, c.effective_n) else {
        return Err(FbiaError::Format("cache: ψ-score cache lacks separator sizes".into()));
    };
    Ok(PsiScoreMatrix {
        edge_index: EdgeIndex::new(c.p),
        scores: c.scores.mapv(T::of),
        separator_sizes,
        effective_n,
    })
}

pub fn integrated_to_cache<T: Real>(m: &IntegratedScores<T>) -> CachedMatrix {
    CachedMatrix {
        p: m.edge_index.p(),
        scores: m.scores.mapv(|v| v.f64()),
        separator_sizes: None,
        effective_n: None,
    }
}

pub fn integrated_from_cache<T: Real>(c: CachedMatrix) -> IntegratedScores<T> {
    IntegratedScores {
        edge_index: EdgeIndex::new(c.p),
        scores: c.scores.mapv(T::of),
    }
}

pub fn write_cache(path: &Path, m: &CachedMatrix) -> Result<()> {
    write_file(path, encode_cache(m))
}

pub fn read_cache(path: &Path) -> Result<CachedMatrix> {
    let bytes = std::fs::read(path).map_err(|e| FbiaError::io(path, e))?;
    decode_cache(&bytes)
}

/// `i,j,name_i,name_j,score,lfdr,status` for condition `k`. The `lfdr`
/// column holds the adjusted p-value when the BY test was used.
pub fn write_edges_csv<T: Real>(path: &Path, graph: &GraphEstimate<T>, k: usize) -> Result<()> {
    let mut s = String::from("i,j,name_i,name_j,score,lfdr,status\n");
    for e in &graph.conditions[k].edges {
        let status = if e.score >= T::zero() { "positive" } else { "negative" };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            e.i,
            e.j,
            graph.variable_names[e.i],
            graph.variable_names[e.j],
            e.score.f64(),
            e.uncertainty,
            status
        );
    }
    write_file(path, s)
}

/// Reads the `(i, j)` pairs of an edge CSV.
pub fn read_edges_csv(path: &Path) -> Result<Vec<(usize, usize)>> {
    let fmt_err = |msg: String| FbiaError::Format(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| fmt_err(e.to_string()))?;
    let mut out = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
        let node = |c: usize| -> Result<usize> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| fmt_err(format!("bad node index at row {}, column {}", r + 2, c + 1)))
        };
        let (i, j) = (node(0)?, node(1)?);
        out.push((i.min(j), i.max(j)));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDegree {
    pub name: String,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub label: String,
    pub edges: usize,
    pub density: f64,
    pub degrees: Vec<NodeDegree>,
    /// Nodes by descending degree, ties by name.
    pub hubs: Vec<HubEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub alpha: f64,
    pub method: TestMethod,
    pub conditions: Vec<ConditionSummary>,
}

pub fn graph_summary<T: Real>(graph: &GraphEstimate<T>, hubs: usize) -> GraphSummary {
    let densities = graph.densities();
    GraphSummary {
        alpha: graph.alpha,
        method: graph.method,
        conditions: graph
            .conditions
            .iter()
            .enumerate()
            .map(|(k, c)| ConditionSummary {
                label: c.label.clone(),
                edges: c.edges.len(),
                density: densities[k],
                degrees: c
                    .degrees(graph.p)
                    .into_iter()
                    .zip(&graph.variable_names)
                    .map(|(degree, name)| NodeDegree {
                        name: name.clone(),
                        degree,
                    })
                    .collect(),
                hubs: graph.hub_ranking(k).into_iter().take(hubs).collect(),
            })
            .collect(),
    }
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_file(path, text + "\n")
}
