//! Ground-truth precision-matrix families and Gaussian samples drawn from
//! them. Double precision only.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes::gibbs::splitmix64;
use crate::data_ingest::{write_block, ConditionBlock, ConditionedDataset, Manifest, ManifestCondition};
use crate::error::{FbiaError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    Ar2,
    ScaleFree,
    Hub,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Ar2 => "ar2",
            GraphKind::ScaleFree => "scalefree",
            GraphKind::Hub => "hub",
        })
    }
}

impl FromStr for GraphKind {
    type Err = FbiaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "ar2" => Ok(GraphKind::Ar2),
            "scalefree" => Ok(GraphKind::ScaleFree),
            "hub" => Ok(GraphKind::Hub),
            other => Err(FbiaError::Parameter(format!("unknown graph kind '{other}'"))),
        }
    }
}

/// How the K precision matrices relate to each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lineage {
    /// Each matrix perturbs the previous one.
    Temporal,
    /// Each matrix independently perturbs a shared base.
    Spatial,
}

impl fmt::Display for Lineage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lineage::Temporal => "temporal",
            Lineage::Spatial => "spatial",
        })
    }
}

impl FromStr for Lineage {
    type Err = FbiaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "temporal" => Ok(Lineage::Temporal),
            "spatial" => Ok(Lineage::Spatial),
            other => Err(FbiaError::Parameter(format!("unknown lineage '{other}'"))),
        }
    }
}

/// Tunable constants of the generators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    /// Off-diagonal magnitude of scale-free and hub graphs before repair.
    pub magnitude: f64,
    pub hub_group_size: usize,
    /// Constant added on top of the diagonal shift during PD repair.
    pub ridge: f64,
    /// Magnitude range of entries added by perturbation.
    pub value_range: (f64, f64),
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            magnitude: 0.3,
            hub_group_size: 20,
            ridge: 0.1,
            value_range: (0.1, 0.3),
        }
    }
}

/// Banded precision: 1 on the diagonal, 0.5 and 0.25 on the first two bands.
pub fn ar2_precision(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.5,
        2 => 0.25,
        _ => 0.0,
    })
}

/// Off-diagonal support `{(i, j): Ω_ij ≠ 0, i < j}`.
pub fn edge_set(omega: &DMatrix<f64>) -> BTreeSet<(usize, usize)> {
    let p = omega.nrows();
    let mut out = BTreeSet::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if omega[(i, j)] != 0.0 {
                out.insert((i, j));
            }
        }
    }
    out
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Sets every diagonal entry to |λ_min| of the off-diagonal part plus
/// `ridge`, doubling the ridge (up to five attempts) if the result is not
/// safely positive definite.
pub fn pd_repair(omega: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let mut off = omega.clone();
    off.fill_diagonal(0.0);
    let shift = min_eigenvalue(&off).abs();
    let mut r = ridge;
    for _ in 0..5 {
        let mut out = off.clone();
        out.fill_diagonal(shift + r);
        if min_eigenvalue(&out) > 1e-10 {
            return Ok(out);
        }
        r *= 2.0;
    }
    Err(FbiaError::NotPositiveDefinite(format!(
        "diagonal repair failed after 5 attempts (last ridge {r})"
    )))
}

fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// Scale-free (preferential-attachment tree) or hub precision matrix.
pub fn structured_precision(kind: GraphKind, p: usize, seed: u64, settings: &SimSettings) -> Result<DMatrix<f64>> {
    if p < 10 {
        return Err(FbiaError::Parameter(format!("structured graphs need p ≥ 10, got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    match kind {
        GraphKind::ScaleFree => {
            // Node t attaches to an earlier node chosen with probability
            // proportional to its degree.
            let mut endpoints: Vec<usize> = vec![0, 1];
            edges.push((0, 1));
            for t in 2..p {
                let target = endpoints[rng.random_range(0..endpoints.len())];
                edges.push((target, t));
                endpoints.push(target);
                endpoints.push(t);
            }
        }
        GraphKind::Hub => {
            let g = settings.hub_group_size.max(2);
            for start in (0..p).step_by(g) {
                for member in (start + 1)..(start + g).min(p) {
                    edges.push((start, member));
                }
            }
        }
        GraphKind::Ar2 => return Ok(ar2_precision(p)),
    }
    let mut omega = DMatrix::zeros(p, p);
    for (i, j) in edges {
        let v = settings.magnitude * random_sign(&mut rng);
        omega[(i, j)] = v;
        omega[(j, i)] = v;
    }
    pd_repair(&omega, settings.ridge)
}

/// Removes round(frac·|E|) random edges, adds as many at random zero
/// positions, then repairs the diagonal.
pub fn perturb(omega: &DMatrix<f64>, frac: f64, settings: &SimSettings, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&frac) {
        return Err(FbiaError::Parameter(format!("perturbation fraction must lie in [0, 1), got {frac}")));
    }
    let p = omega.nrows();
    let edges: Vec<(usize, usize)> = edge_set(omega).into_iter().collect();
    let m = (frac * edges.len() as f64).round() as usize;
    let mut zeros = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if omega[(i, j)] == 0.0 {
                zeros.push((i, j));
            }
        }
    }
    if m > edges.len() || m > zeros.len() {
        return Err(FbiaError::Parameter(format!(
            "cannot swap {m} edges in a graph with {} edges and {} free positions",
            edges.len(),
            zeros.len()
        )));
    }
    let mut out = omega.clone();
    for idx in sample_indices(rng, edges.len(), m).into_vec() {
        let (i, j) = edges[idx];
        out[(i, j)] = 0.0;
        out[(j, i)] = 0.0;
    }
    let (lo, hi) = settings.value_range;
    for idx in sample_indices(rng, zeros.len(), m).into_vec() {
        let (i, j) = zeros[idx];
        let v = rng.random_range(lo..=hi) * random_sign(rng);
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    pd_repair(&out, settings.ridge)
}

/// K related precision matrices with their edge sets.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionFamily {
    pub omegas: Vec<DMatrix<f64>>,
    pub truth_edges: Vec<BTreeSet<(usize, usize)>>,
    pub lineage: Lineage,
    /// Shared base of a spatial family (not one of the conditions).
    pub base: Option<DMatrix<f64>>,
    pub seed: u64,
}

impl PrecisionFamily {
    pub fn p(&self) -> usize {
        self.omegas[0].nrows()
    }

    pub fn k(&self) -> usize {
        self.omegas.len()
    }
}

pub fn base_precision(kind: GraphKind, p: usize, seed: u64, settings: &SimSettings) -> Result<DMatrix<f64>> {
    match kind {
        GraphKind::Ar2 => {
            if p < 5 {
                return Err(FbiaError::Parameter(format!("AR(2) needs p ≥ 5, got {p}")));
            }
            Ok(ar2_precision(p))
        }
        _ => structured_precision(kind, p, seed, settings),
    }
}

pub fn make_family(
    kind: GraphKind,
    p: usize,
    k: usize,
    lineage: Lineage,
    frac: f64,
    seed: u64,
    settings: &SimSettings,
) -> Result<PrecisionFamily> {
    if k == 0 {
        return Err(FbiaError::Parameter("K must be at least 1".into()));
    }
    let base = base_precision(kind, p, splitmix64(seed), settings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5EED));
    let (omegas, base) = match lineage {
        Lineage::Temporal => {
            let mut omegas = vec![base];
            for _ in 1..k {
                let next = perturb(omegas.last().expect("nonempty"), frac, settings, &mut rng)?;
                omegas.push(next);
            }
            (omegas, None)
        }
        Lineage::Spatial => {
            if k == 1 {
                (vec![base], None)
            } else {
                let omegas = (0..k)
                    .map(|_| perturb(&base, frac, settings, &mut rng))
                    .collect::<Result<Vec<_>>>()?;
                (omegas, Some(base))
            }
        }
    };
    let truth_edges = omegas.iter().map(edge_set).collect();
    Ok(PrecisionFamily {
        omegas,
        truth_edges,
        lineage,
        base,
        seed,
    })
}

/// n draws from N(0, Ω⁻¹): x = L⁻ᵀz with Ω = LLᵀ.
pub fn sample_mvn(omega: &DMatrix<f64>, n: usize, seed: u64) -> Result<Array2<f64>> {
    let p = omega.nrows();
    let chol = omega
        .clone()
        .cholesky()
        .ok_or_else(|| FbiaError::NotPositiveDefinite("Cholesky factorization of the precision matrix failed".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Column r of z holds observation r.
    let mut z = DMatrix::zeros(p, n);
    for r in 0..n {
        for c in 0..p {
            z[(c, r)] = StandardNormal.sample(&mut rng);
        }
    }
    let x = chol
        .l()
        .tr_solve_lower_triangular(&z)
        .ok_or_else(|| FbiaError::NotPositiveDefinite("singular Cholesky factor".into()))?;
    Ok(Array2::from_shape_fn((n, p), |(r, c)| x[(c, r)]))
}

pub fn variable_names(p: usize) -> Vec<String> {
    let width = p.to_string().len();
    (1..=p).map(|i| format!("X{i:0width$}")).collect()
}

/// One dataset per condition of the family, `n` rows each.
pub fn sample_family(family: &PrecisionFamily, n: usize, seed: u64) -> Result<ConditionedDataset<f64>> {
    let blocks = family
        .omegas
        .iter()
        .enumerate()
        .map(|(k, omega)| {
            let data = sample_mvn(omega, n, splitmix64(seed.wrapping_add(k as u64 + 1)))?;
            Ok(ConditionBlock::new(format!("cond_{}", k + 1), data))
        })
        .collect::<Result<Vec<_>>>()?;
    ConditionedDataset::new(variable_names(family.p()), blocks)
}

/// Writes a square matrix as headerless CSV.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| FbiaError::io(path, e))
}

/// Writes `i,j,value` rows for the nonzero off-diagonal entries.
pub fn write_edge_list(path: &Path, omega: &DMatrix<f64>) -> Result<()> {
    let mut s = String::from("i,j,value\n");
    for (i, j) in edge_set(omega) {
        s.push_str(&format!("{i},{j},{}\n", omega[(i, j)]));
    }
    std::fs::write(path, s).map_err(|e| FbiaError::io(path, e))
}

/// Reads an `i,j,...` edge list; extra columns are ignored.
pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| FbiaError::Format(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| FbiaError::Format(format!("{}: {e}", path.display())))?;
        let field = |c: usize| -> Result<&str> {
            rec.get(c).ok_or_else(|| FbiaError::Format(format!("{}: row {} is short", path.display(), row + 2)))
        };
        let parse_err = |c: usize| FbiaError::Format(format!("{}: bad value at row {}, column {}", path.display(), row + 2, c + 1));
        let i: usize = field(0)?.trim().parse().map_err(|_| parse_err(0))?;
        let j: usize = field(1)?.trim().parse().map_err(|_| parse_err(1))?;
        let v: f64 = match rec.get(2) {
            Some(s) => s.trim().parse().map_err(|_| parse_err(2))?,
            None => 1.0,
        };
        out.push((i.min(j), i.max(j), v));
    }
    Ok(out)
}

/// Simulation parameters recorded in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub kind: GraphKind,
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub lineage: Lineage,
    pub frac: f64,
    pub seed: u64,
    pub settings: SimSettings,
}

/// A generated family with data drawn from it.
#[derive(Clone, Debug)]
pub struct Replicate {
    pub family: PrecisionFamily,
    pub dataset: ConditionedDataset<f64>,
}

pub fn simulate(spec: &SimulationSpec) -> Result<Replicate> {
    let family = make_family(spec.kind, spec.p, spec.k, spec.lineage, spec.frac, spec.seed, &spec.settings)?;
    let dataset = sample_family(&family, spec.n, splitmix64(spec.seed ^ 0xDA7A))?;
    Ok(Replicate { family, dataset })
}

/// Writes `manifest.json`, `data/cond_k.csv`, `truth/precision_k.csv` and
/// `truth/edges_k.csv` under `dir`.
pub fn write_replicate(dir: &Path, rep: &Replicate, spec: &SimulationSpec) -> Result<Manifest> {
    let data_dir = dir.join("data");
    let truth_dir = dir.join("truth");
    for d in [&data_dir, &truth_dir] {
        std::fs::create_dir_all(d).map_err(|e| FbiaError::io(d, e))?;
    }
    let names = rep.dataset.variable_names();
    let mut conditions = Vec::new();
    for (k, block) in rep.dataset.conditions().iter().enumerate() {
        let c = k + 1;
        let data = format!("data/cond_{c}.csv");
        let precision = format!("truth/precision_{c}.csv");
        let edges = format!("truth/edges_{c}.csv");
        write_block(&dir.join(&data), names, &block.data)?;
        write_matrix_csv(&dir.join(&precision), &rep.family.omegas[k])?;
        write_edge_list(&dir.join(&edges), &rep.family.omegas[k])?;
        conditions.push(ManifestCondition {
            label: block.label.clone(),
            data: data.into(),
            covariates: None,
            group: None,
            truth_edges: Some(edges.into()),
            precision: Some(precision.into()),
        });
    }
    let manifest = Manifest {
        conditions,
        schema: Default::default(),
        metadata: Some(serde_json::to_value(spec)?),
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar2_bands() {
        let o = ar2_precision(200);
        assert_eq!((o[(0, 1)], o[(0, 2)], o[(0, 3)]), (0.5, 0.25, 0.0));
        assert_eq!(edge_set(&ar2_precision(5)).len(), 7);
        assert!(min_eigenvalue(&ar2_precision(500)) > 0.0);
    }

    #[test]
    fn structured_edge_counts() {
        let s = SimSettings::default();
        let sf = structured_precision(GraphKind::ScaleFree, 100, 3, &s).unwrap();
        assert_eq!(edge_set(&sf).len(), 99);
        let hub = structured_precision(GraphKind::Hub, 100, 3, &s).unwrap();
        assert_eq!(edge_set(&hub).len(), 95);
        assert!(min_eigenvalue(&sf) > 0.0 && min_eigenvalue(&hub) > 0.0);
    }

    #[test]
    fn perturbation_preserves_edge_count() {
        let s = SimSettings::default();
        let base = ar2_precision(200);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = perturb(&base, 0.05, &s, &mut rng).unwrap();
        let before = edge_set(&base);
        let after = edge_set(&out);
        assert_eq!(after.len(), 397);
        assert_eq!(before.difference(&after).count(), 20);
        assert_eq!(out, out.transpose());
    }

    #[test]
    fn zero_swap_only_repairs_diagonal() {
        let base = ar2_precision(10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = perturb(&base, 0.01, &SimSettings::default(), &mut rng).unwrap();
        assert_eq!(edge_set(&out), edge_set(&base));
        assert_ne!(out[(0, 0)], 1.0);
    }

    #[test]
    fn sampling_is_seeded() {
        let o = ar2_precision(6);
        assert_eq!(sample_mvn(&o, 20, 5).unwrap(), sample_mvn(&o, 20, 5).unwrap());
        assert_ne!(sample_mvn(&o, 20, 5).unwrap(), sample_mvn(&o, 20, 6).unwrap());
    }
}
