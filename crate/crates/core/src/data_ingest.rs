//! Loading, validation and per-condition standardization of multi-condition
//! datasets.
//!
//! Each condition is one delimited text file (comma for `.csv`, tab for
//! `.tsv`) with a header row of column names. Columns can be variables,
//! covariates or ignored; covariates can alternatively come from a sidecar
//! file with matching row order. Condition order is significant: the
//! temporal prior links adjacent conditions.
//!
//! Values are taken as they are written; no log transform or imputation is
//! applied, and missing cells are rejected.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{FbiaError, Result};
use crate::scalar::Real;

/// Minimum observations per condition.
pub const MIN_SAMPLES: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct Covariates<T> {
    pub names: Vec<String>,
    /// n_k × q values.
    pub values: Array2<T>,
}

/// Observations for one condition.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionBlock<T> {
    pub label: String,
    /// n_k × p observations, columns in the dataset's variable order.
    pub data: Array2<T>,
    pub covariates: Option<Covariates<T>>,
}

impl<T: Real> ConditionBlock<T> {
    pub fn new(label: impl Into<String>, data: Array2<T>) -> Self {
        ConditionBlock {
            label: label.into(),
            data,
            covariates: None,
        }
    }

    pub fn with_covariates(mut self, covariates: Covariates<T>) -> Self {
        self.covariates = Some(covariates);
        self
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }
}

/// K ordered conditions over a shared set of p variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionedDataset<T> {
    conditions: Vec<ConditionBlock<T>>,
    variable_names: Vec<String>,
}

impl<T: Real> ConditionedDataset<T> {
    /// Validates and assembles a dataset.
    pub fn new(variable_names: Vec<String>, conditions: Vec<ConditionBlock<T>>) -> Result<Self> {
        if conditions.is_empty() {
            return Err(FbiaError::Schema("at least one condition is required".into()));
        }
        let p = variable_names.len();
        if p < 2 {
            return Err(FbiaError::Schema(format!(
                "at least two variables are required, found {p}"
            )));
        }
        let mut seen = HashSet::new();
        for name in &variable_names {
            if !seen.insert(name.as_str()) {
                return Err(FbiaError::Schema(format!("duplicate variable name '{name}'")));
            }
        }
        for block in &conditions {
            if block.data.ncols() != p {
                return Err(FbiaError::Schema(format!(
                    "condition '{}' has {} variables, expected {p}",
                    block.label,
                    block.data.ncols()
                )));
            }
            if block.n() < MIN_SAMPLES {
                return Err(FbiaError::Size {
                    condition: block.label.clone(),
                    n: block.n(),
                    min: MIN_SAMPLES,
                });
            }
            if block.data.iter().any(|v| !v.is_finite()) {
                return Err(FbiaError::Schema(format!(
                    "condition '{}' contains non-finite values",
                    block.label
                )));
            }
            if let Some(cov) = &block.covariates {
                if cov.values.nrows() != block.n() {
                    return Err(FbiaError::Schema(format!(
                        "condition '{}': {} covariate rows for {} observations",
                        block.label,
                        cov.values.nrows(),
                        block.n()
                    )));
                }
                if cov.values.ncols() != cov.names.len() {
                    return Err(FbiaError::Schema(format!(
                        "condition '{}': covariate names do not match covariate columns",
                        block.label
                    )));
                }
                if cov.values.iter().any(|v| !v.is_finite()) {
                    return Err(FbiaError::Schema(format!(
                        "condition '{}' has non-finite covariates",
                        block.label
                    )));
                }
            }
        }
        Ok(ConditionedDataset {
            conditions,
            variable_names,
        })
    }

    pub fn conditions(&self) -> &[ConditionBlock<T>] {
        &self.conditions
    }

    pub fn condition(&self, k: usize) -> &ConditionBlock<T> {
        &self.conditions[k]
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn labels(&self) -> Vec<String> {
        self.conditions.iter().map(|c| c.label.clone()).collect()
    }

    /// Number of variables p.
    pub fn p(&self) -> usize {
        self.variable_names.len()
    }

    /// Number of conditions K.
    pub fn k(&self) -> usize {
        self.conditions.len()
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        self.conditions.iter().map(|c| c.n()).collect()
    }

    pub fn has_covariates(&self) -> bool {
        self.conditions.iter().all(|c| c.covariates.is_some())
    }
}

/// Column roles inside condition files.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    /// Columns read as covariates instead of variables.
    #[serde(default)]
    pub covariate_columns: Vec<String>,
    /// Columns dropped entirely (sample ids and the like).
    #[serde(default)]
    pub ignore_columns: Vec<String>,
}

/// Where one condition's data lives on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSource {
    pub label: String,
    pub data: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<PathBuf>,
}

impl ConditionSource {
    pub fn new(label: impl Into<String>, data: impl Into<PathBuf>) -> Self {
        ConditionSource {
            label: label.into(),
            data: data.into(),
            covariates: None,
        }
    }

    /// Derives a label from the file stem.
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "condition".into());
        ConditionSource::new(label, path)
    }
}

/// One entry of a JSON manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestCondition {
    pub label: String,
    pub data: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<PathBuf>,
    /// Group name for two-step (group × time) integration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Ground-truth edge list written by the simulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_edges: Option<PathBuf>,
    /// Ground-truth precision matrix written by the simulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<PathBuf>,
}

/// Ordered list of condition files; relative paths resolve against the
/// manifest's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub conditions: Vec<ManifestCondition>,
    #[serde(default)]
    pub schema: Schema,
    /// Free-form generator metadata (simulation parameters, seeds).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| FbiaError::io(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for c in &mut manifest.conditions {
            c.data = resolve(base, &c.data);
            c.covariates = c.covariates.as_ref().map(|p| resolve(base, p));
            c.truth_edges = c.truth_edges.as_ref().map(|p| resolve(base, p));
            c.precision = c.precision.as_ref().map(|p| resolve(base, p));
        }
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| FbiaError::io(path, e))
    }

    pub fn sources(&self) -> Vec<ConditionSource> {
        self.conditions
            .iter()
            .map(|c| ConditionSource {
                label: c.label.clone(),
                data: c.data.clone(),
                covariates: c.covariates.clone(),
            })
            .collect()
    }

    /// Distinct group names in first-appearance order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.conditions {
            if let Some(g) = &c.group {
                if !out.contains(g) {
                    out.push(g.clone());
                }
            }
        }
        out
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

struct RawTable<T> {
    header: Vec<String>,
    rows: Vec<Vec<T>>,
}

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("tab") => b'\t',
        _ => b',',
    }
}

fn read_table<T: Real>(path: &Path, skip: &HashSet<&str>) -> Result<RawTable<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&c| !skip.contains(header[c].as_str()))
        .collect();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let mut row = Vec::with_capacity(keep.len());
        for &c in &keep {
            let cell = record.get(c).unwrap_or("");
            let value = parse_cell::<T>(cell).ok_or_else(|| FbiaError::Parse {
                file: path.to_path_buf(),
                row: r + 1,
                column: c + 1,
                name: header[c].clone(),
                message: format!("'{cell}' is not a finite number"),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    let header = keep.iter().map(|&c| header[c].clone()).collect();
    Ok(RawTable { header, rows })
}

fn parse_cell<T: Real>(cell: &str) -> Option<T> {
    let v: f64 = cell.parse().ok()?;
    if v.is_finite() {
        T::from_f64(v).filter(|t| t.is_finite())
    } else {
        None
    }
}

fn csv_error(path: &Path, e: csv::Error) -> FbiaError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => FbiaError::io(path, io),
        other => FbiaError::Format(format!("{}: {:?}", path.display(), other)),
    }
}

fn to_array<T: Real>(rows: &[Vec<T>], cols: &[usize]) -> Array2<T> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(r, c)| rows[r][cols[c]])
}

/// Loads one file per condition, realigning variable columns by name to the
/// first condition's order.
pub fn load_dataset<T: Real>(
    sources: &[ConditionSource],
    schema: &Schema,
) -> Result<ConditionedDataset<T>> {
    if sources.is_empty() {
        return Err(FbiaError::Schema("no condition files given".into()));
    }
    let skip: HashSet<&str> = schema.ignore_columns.iter().map(String::as_str).collect();
    let covariate_names: HashSet<&str> =
        schema.covariate_columns.iter().map(String::as_str).collect();

    let mut variable_names: Option<Vec<String>> = None;
    let mut blocks = Vec::with_capacity(sources.len());
    for src in sources {
        let table = read_table::<T>(&src.data, &skip)?;
        let var_cols: Vec<usize> = (0..table.header.len())
            .filter(|&c| !covariate_names.contains(table.header[c].as_str()))
            .collect();
        let names: Vec<String> = var_cols.iter().map(|&c| table.header[c].clone()).collect();

        let order: Vec<usize> = match &variable_names {
            None => {
                variable_names = Some(names.clone());
                var_cols.clone()
            }
            Some(reference) => {
                let by_name: HashMap<&str, usize> = names
                    .iter()
                    .zip(&var_cols)
                    .map(|(n, &c)| (n.as_str(), c))
                    .collect();
                if by_name.len() != reference.len()
                    || reference.iter().any(|n| !by_name.contains_key(n.as_str()))
                {
                    return Err(FbiaError::Schema(format!(
                        "condition '{}' ({}) does not have the same variables as the first condition",
                        src.label,
                        src.data.display()
                    )));
                }
                reference.iter().map(|n| by_name[n.as_str()]).collect()
            }
        };
        let data = to_array(&table.rows, &order);

        let mut covariates = None;
        let inline_cov: Vec<usize> = schema
            .covariate_columns
            .iter()
            .filter_map(|name| table.header.iter().position(|h| h == name))
            .collect();
        if !inline_cov.is_empty() {
            covariates = Some(Covariates {
                names: inline_cov.iter().map(|&c| table.header[c].clone()).collect(),
                values: to_array(&table.rows, &inline_cov),
            });
        }
        if let Some(cov_path) = &src.covariates {
            let cov = read_table::<T>(cov_path, &skip)?;
            let cols: Vec<usize> = (0..cov.header.len()).collect();
            let sidecar = Covariates {
                names: cov.header.clone(),
                values: to_array(&cov.rows, &cols),
            };
            covariates = Some(match covariates {
                None => sidecar,
                Some(inline) => {
                    if inline.values.nrows() != sidecar.values.nrows() {
                        return Err(FbiaError::Schema(format!(
                            "condition '{}': covariate file row count does not match data",
                            src.label
                        )));
                    }
                    let mut names = inline.names;
                    names.extend(sidecar.names);
                    let values = ndarray::concatenate(
                        Axis(1),
                        &[inline.values.view(), sidecar.values.view()],
                    )
                    .map_err(|e| FbiaError::Shape(e.to_string()))?;
                    Covariates { names, values }
                }
            });
        }
        let mut block = ConditionBlock::new(src.label.clone(), data);
        block.covariates = covariates;
        blocks.push(block);
    }
    ConditionedDataset::new(variable_names.unwrap_or_default(), blocks)
}

/// Centers and scales every variable within every condition to mean 0 and
/// sample standard deviation 1 (denominator n − 1). Covariates are left
/// untouched.
pub fn standardize<T: Real>(ds: &ConditionedDataset<T>) -> Result<ConditionedDataset<T>> {
    let mut blocks = Vec::with_capacity(ds.k());
    for block in ds.conditions() {
        let n = block.n();
        let mut data = block.data.clone();
        for (j, mut col) in data.axis_iter_mut(Axis(1)).enumerate() {
            let mean = col.iter().copied().sum::<T>() / T::of_usize(n);
            col.mapv_inplace(|v| v - mean);
            let ss: T = col.iter().map(|&v| v * v).sum();
            let sd = (ss / T::of_usize(n - 1)).sqrt();
            let scale = col
                .iter()
                .fold(T::zero(), |m, &v| m.max(v.abs()))
                .max(mean.abs());
            if !(sd > T::epsilon() * T::of(16.0) * scale) || sd == T::zero() {
                return Err(FbiaError::DegenerateVariable {
                    variable: ds.variable_names()[j].clone(),
                    condition: block.label.clone(),
                });
            }
            col.mapv_inplace(|v| v / sd);
        }
        blocks.push(ConditionBlock {
            label: block.label.clone(),
            data,
            covariates: block.covariates.clone(),
        });
    }
    ConditionedDataset::new(ds.variable_names().to_vec(), blocks)
}

/// Writes an n × p block with a header row. Values use Rust's shortest
/// round-trip formatting, so a reload reproduces them bit for bit.
pub fn write_block<T: Real>(path: &Path, names: &[String], data: &Array2<T>) -> Result<()> {
    let delim = if delimiter_for(path) == b'\t' { "\t" } else { "," };
    let mut out = String::with_capacity(data.len() * 20);
    out.push_str(&names.join(delim));
    out.push('\n');
    for row in data.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push_str(delim);
            }
            first = false;
            out.push_str(&format!("{}", v.f64()));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| FbiaError::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| FbiaError::io(path, e))
}

/// Writes every condition as `<dir>/<label>.csv` and returns the sources.
pub fn write_dataset<T: Real>(ds: &ConditionedDataset<T>, dir: &Path) -> Result<Vec<ConditionSource>> {
    fs::create_dir_all(dir).map_err(|e| FbiaError::io(dir, e))?;
    let mut sources = Vec::with_capacity(ds.k());
    for block in ds.conditions() {
        let path = dir.join(format!("{}.csv", block.label));
        write_block(&path, ds.variable_names(), &block.data)?;
        let mut src = ConditionSource::new(block.label.clone(), path);
        if let Some(cov) = &block.covariates {
            let cov_path = dir.join(format!("{}.covariates.csv", block.label));
            write_block(&cov_path, &cov.names, &cov.values)?;
            src.covariates = Some(cov_path);
        }
        sources.push(src);
    }
    Ok(sources)
}
