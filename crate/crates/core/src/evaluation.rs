//! Scoring estimated graphs against ground truth: confusion counts,
//! precision-recall curves with AUPRC, power-law degree fits, and replicate
//! summaries. Double precision only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::edges::EdgeIndex;
use crate::error::{FbiaError, Result};

type EdgeSet = BTreeSet<(usize, usize)>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        let d = self.tp + self.fp;
        if d == 0 {
            1.0
        } else {
            self.tp as f64 / d as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let d = self.tp + self.fn_;
        if d == 0 {
            1.0
        } else {
            self.tp as f64 / d as f64
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn add(&mut self, o: &Confusion) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub per_condition: Vec<Confusion>,
    pub cumulated: Confusion,
}

/// Confusion counts over all N pairs, per condition and summed.
pub fn confusion(estimate: &[EdgeSet], truth: &[EdgeSet], p: usize) -> Result<ConfusionReport> {
    if estimate.len() != truth.len() {
        return Err(FbiaError::Shape(format!(
            "{} estimated conditions vs {} true conditions",
            estimate.len(),
            truth.len()
        )));
    }
    let n = EdgeIndex::new(p).len();
    let mut per_condition = Vec::with_capacity(estimate.len());
    let mut cumulated = Confusion::default();
    for (est, tru) in estimate.iter().zip(truth) {
        if est.iter().chain(tru).any(|&(i, j)| i >= j || j >= p) {
            return Err(FbiaError::Shape(format!("edge outside 0..{p} or not ordered i < j")));
        }
        let tp = est.intersection(tru).count();
        let fp = est.len() - tp;
        let fn_ = tru.len() - tp;
        let c = Confusion {
            tp,
            fp,
            fn_,
            tn: n - tp - fp - fn_,
        };
        cumulated.add(&c);
        per_condition.push(c);
    }
    Ok(ConfusionReport {
        per_condition,
        cumulated,
    })
}

/// Thresholds for a PR sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    /// Every distinct |score|.
    Auto,
    Thresholds(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// Ordered by decreasing threshold, so recall is non-decreasing.
    pub points: Vec<PrPoint>,
    pub auprc: f64,
    /// Set when the sweep produced a single point.
    pub degenerate: bool,
}

/// PR curve of the rule |score| ≥ t, with counts cumulated over conditions.
/// `scores` is N × K in edge-index order.
pub fn pr_curve(scores: &Array2<f64>, truth: &[EdgeSet], grid: &Grid) -> Result<PrCurve> {
    let (n_edges, k) = scores.dim();
    if truth.len() != k {
        return Err(FbiaError::Shape(format!("{k} score columns vs {} truth sets", truth.len())));
    }
    let idx = edge_index_for(n_edges)?;
    let mut items: Vec<(f64, bool)> = Vec::with_capacity(n_edges * k);
    for l in 0..n_edges {
        let pair = idx.pair(l);
        for (c, tru) in truth.iter().enumerate() {
            items.push((scores[[l, c]].abs(), tru.contains(&pair)));
        }
    }
    let positives = items.iter().filter(|x| x.1).count();
    if positives == 0 {
        return Err(FbiaError::InsufficientSupport("truth has no edges".into()));
    }
    items.sort_by(|a, b| b.0.total_cmp(&a.0));

    let thresholds: Vec<f64> = match grid {
        Grid::Auto => {
            let mut t: Vec<f64> = items.iter().map(|x| x.0).collect();
            t.dedup();
            t
        }
        Grid::Thresholds(t) => {
            if t.is_empty() {
                return Err(FbiaError::Parameter("threshold grid is empty".into()));
            }
            let mut t = t.clone();
            t.sort_by(|a, b| b.total_cmp(a));
            t.dedup();
            t
        }
    };

    let mut points = Vec::with_capacity(thresholds.len());
    let (mut tp, mut fp, mut pos) = (0usize, 0usize, 0usize);
    for &t in &thresholds {
        while pos < items.len() && items[pos].0 >= t {
            if items[pos].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            pos += 1;
        }
        if tp + fp == 0 {
            continue;
        }
        points.push(PrPoint {
            threshold: t,
            recall: tp as f64 / positives as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    if points.is_empty() {
        return Err(FbiaError::InsufficientSupport("no threshold selects any edge".into()));
    }
    let auprc = trapezoid_auprc(&points);
    Ok(PrCurve {
        degenerate: points.len() == 1,
        points,
        auprc,
    })
}

fn edge_index_for(n_edges: usize) -> Result<EdgeIndex> {
    // Solve p(p−1)/2 = N.
    let p = ((1.0 + (1.0 + 8.0 * n_edges as f64).sqrt()) / 2.0).round() as usize;
    let idx = EdgeIndex::new(p);
    if idx.len() != n_edges {
        return Err(FbiaError::Shape(format!("{n_edges} rows is not p(p−1)/2 for any p")));
    }
    Ok(idx)
}

/// Trapezoid area under recall-ordered points, starting from recall 0 at
/// the first point's precision.
pub fn trapezoid_auprc(points: &[PrPoint]) -> f64 {
    let mut sorted: Vec<(f64, f64)> = points.iter().map(|p| (p.recall, p.precision)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut area = 0.0;
    let mut prev = (0.0, sorted[0].1);
    for &(r, p) in &sorted {
        area += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    area.clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// υ in P(X = x) ∝ x^{−υ}.
    pub exponent: f64,
    pub r_squared: f64,
    /// (degree, frequency) pairs used in the fit.
    pub points: Vec<(f64, f64)>,
}

/// Log-log least-squares fit of degree frequencies over nodes with positive
/// degree.
pub fn powerlaw_fit(degrees: &[usize]) -> Result<PowerLawFit> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in degrees.iter().filter(|&&d| d > 0) {
        *counts.entry(d).or_insert(0) += 1;
    }
    let total: usize = counts.values().sum();
    let pts: Vec<(f64, f64)> = counts
        .into_iter()
        .map(|(d, c)| (d as f64, c as f64 / total.max(1) as f64))
        .collect();
    powerlaw_fit_counts(&pts)
}

/// Same fit on explicit (degree, frequency) pairs.
pub fn powerlaw_fit_counts(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|&(x, f)| x > 0.0 && f > 0.0).collect();
    let distinct: BTreeSet<u64> = pts.iter().map(|p| p.0.to_bits()).collect();
    if distinct.len() < 3 {
        return Err(FbiaError::InsufficientSupport(format!(
            "power-law fit needs at least 3 distinct positive degrees, got {}",
            distinct.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok(PowerLawFit {
        exponent: -slope,
        r_squared,
        points: pts,
    })
}

/// Mean, standard deviation and standard error over replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub label: String,
    pub replicates: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

pub fn summarize(label: &str, values: &[f64]) -> ReplicateSummary {
    let n = values.len();
    let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    ReplicateSummary {
        label: label.to_string(),
        replicates: n,
        mean,
        sd,
        se: if n > 0 { sd / (n as f64).sqrt() } else { f64::NAN },
    }
}

pub fn write_pr_csv(path: &Path, curve: &PrCurve) -> Result<()> {
    let mut s = String::from("threshold,recall,precision\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{},{}", p.threshold, p.recall, p.precision);
    }
    std::fs::write(path, s).map_err(|e| FbiaError::io(path, e))
}

pub fn write_summary_csv(path: &Path, rows: &[ReplicateSummary]) -> Result<()> {
    let mut s = String::from("method,replicates,mean_auprc,sd,se\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.label, r.replicates, r.mean, r.sd, r.se);
    }
    std::fs::write(path, s).map_err(|e| FbiaError::io(path, e))
}

/// Self-contained SVG line plot of one or more PR curves.
pub fn pr_svg(curves: &[(&str, &PrCurve)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let x = |r: f64| M + r * (W - 2.0 * M);
    let y = |p: f64| H - M - p * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{v}</text>"#, x(v), H - M + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#, M - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">recall</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">precision</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (c, (name, curve)) in curves.iter().enumerate() {
        let color = colors[c % colors.len()];
        let mut pts = String::new();
        if let Some(first) = curve.points.first() {
            let _ = write!(pts, "{:.2},{:.2} ", x(0.0), y(first.precision));
        }
        for p in &curve.points {
            let _ = write!(pts, "{:.2},{:.2} ", x(p.recall), y(p.precision));
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{} (AUPRC {:.3})</text>"#,
            M + 8.0,
            M + 16.0 + 14.0 * c as f64,
            xml_escape(name),
            curve.auprc
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[(usize, usize)]) -> EdgeSet {
        v.iter().copied().collect()
    }

    #[test]
    fn confusion_edge_cases() {
        let truth = vec![set(&[(0, 1), (1, 2)])];
        let same = confusion(&truth, &truth, 4).unwrap();
        assert_eq!(same.cumulated, Confusion { tp: 2, fp: 0, fn_: 0, tn: 4 });
        let empty = confusion(&[EdgeSet::new()], &truth, 4).unwrap();
        assert_eq!((empty.cumulated.tp, empty.cumulated.fp, empty.cumulated.fn_), (0, 0, 2));
        let all: EdgeSet = EdgeIndex::new(4).pairs().collect();
        let comp: EdgeSet = all.difference(&truth[0]).copied().collect();
        let c = confusion(&[comp], &truth, 4).unwrap();
        assert_eq!((c.cumulated.tp, c.cumulated.fp), (0, 4));
        assert!(confusion(&truth, &[], 4).is_err());
    }

    #[test]
    fn perfect_ranking_has_unit_area() {
        let idx = EdgeIndex::new(6);
        let truth = set(&[(0, 1), (2, 3), (4, 5)]);
        let scores = Array2::from_shape_fn((idx.len(), 1), |(l, _)| {
            if truth.contains(&idx.pair(l)) {
                5.0 + l as f64
            } else {
                -(l as f64) / 100.0
            }
        });
        let curve = pr_curve(&scores, &[truth], &Grid::Auto).unwrap();
        assert!((curve.auprc - 1.0).abs() < 1e-12);
        assert!(curve.points.windows(2).all(|w| w[0].recall <= w[1].recall));
    }

    #[test]
    fn single_threshold_is_degenerate() {
        let truth = set(&[(0, 1)]);
        let scores = Array2::from_shape_vec((3, 1), vec![1.0, 0.5, 0.2]).unwrap();
        let curve = pr_curve(&scores, &[truth], &Grid::Thresholds(vec![0.6])).unwrap();
        assert!(curve.degenerate);
        assert_eq!(curve.points.len(), 1);
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..=10).map(|x| (x as f64, (x as f64).powi(-2))).collect();
        let fit = powerlaw_fit_counts(&pts).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-10);
        assert!(fit.r_squared > 0.999);
        assert!(matches!(powerlaw_fit(&[1, 1, 1, 1]), Err(FbiaError::InsufficientSupport(_))));
    }

    #[test]
    fn summary_statistics() {
        let s = summarize("x", &[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.sd - 1.0).abs() < 1e-15);
        assert!((s.se - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }
}
