//! CSV ingestion, equal-frequency discretization and seeded train/test splits.
//!
//! Categorical tokens are encoded densely in order of first appearance.
//! Numeric columns stay raw in a [`Table`] until [`Table::discretize`] turns
//! them into bin codes, producing a fully discrete [`Dataset`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

impl ColumnKind {
    /// Parse a comma-separated schema such as `c,n,categorical,numeric`.
    pub fn parse_list(spec: &str) -> Result<Vec<ColumnKind>> {
        spec.split(',')
            .map(|t| match t.trim().to_ascii_lowercase().as_str() {
                "c" | "cat" | "categorical" => Ok(ColumnKind::Categorical),
                "n" | "num" | "numeric" => Ok(ColumnKind::Numeric),
                other => Err(Error::invalid(format!("unknown column kind `{other}`"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub cardinality: usize,
    pub labels: Vec<String>,
}

impl VariableMeta {
    pub fn new(name: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::invalid(format!("duplicate label `{l}`")));
            }
        }
        Ok(VariableMeta {
            name: name.into(),
            cardinality: labels.len(),
            labels,
        })
    }

    /// A variable whose labels are `0..cardinality`.
    pub fn indexed(name: impl Into<String>, cardinality: usize) -> Self {
        VariableMeta {
            name: name.into(),
            cardinality,
            labels: (0..cardinality).map(|i| i.to_string()).collect(),
        }
    }
}

/// Fully discrete data: `n_rows × n_vars` state codes, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    variables: Vec<VariableMeta>,
    codes: Vec<usize>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(variables: Vec<VariableMeta>, rows: &[Vec<usize>]) -> Result<Self> {
        let n_vars = variables.len();
        let mut codes = Vec::with_capacity(rows.len() * n_vars);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_vars {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: n_vars,
                    found: row.len(),
                });
            }
            codes.extend_from_slice(row);
        }
        Self::from_flat(variables, codes)
    }

    pub fn from_flat(variables: Vec<VariableMeta>, codes: Vec<usize>) -> Result<Self> {
        let n_vars = variables.len();
        if n_vars == 0 {
            if !codes.is_empty() {
                return Err(Error::invalid("codes given for a dataset without variables"));
            }
            return Ok(Dataset {
                variables,
                codes,
                n_rows: 0,
            });
        }
        if !codes.len().is_multiple_of(n_vars) {
            return Err(Error::invalid("code buffer is not a whole number of rows"));
        }
        for (k, &c) in codes.iter().enumerate() {
            let card = variables[k % n_vars].cardinality;
            if c >= card {
                return Err(Error::StateOutOfRange {
                    state: c,
                    cardinality: card,
                });
            }
        }
        let n_rows = codes.len() / n_vars;
        Ok(Dataset {
            variables,
            codes,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.variables[var].cardinality
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn row(&self, i: usize) -> &[usize] {
        let n = self.n_vars();
        &self.codes[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn value(&self, row: usize, var: usize) -> usize {
        self.codes[row * self.n_vars() + var]
    }

    /// Copy the given rows, in the given order, into a new dataset.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut codes = Vec::with_capacity(rows.len() * self.n_vars());
        for &r in rows {
            codes.extend_from_slice(self.row(r));
        }
        Dataset {
            variables: self.variables.clone(),
            codes,
            n_rows: rows.len(),
        }
    }

    /// Labels of a row, i.e. the original tokens or bin descriptors.
    pub fn decode_row(&self, i: usize) -> Vec<&str> {
        self.row(i)
            .iter()
            .zip(&self.variables)
            .map(|(&c, v)| v.labels[c].as_str())
            .collect()
    }

    /// Write the dataset as a header + label CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.variables.iter().map(|v| v.name.as_str()))?;
        for i in 0..self.n_rows {
            w.write_record(self.decode_row(i))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Categorical { codes: Vec<usize>, labels: Vec<String> },
    Numeric(Vec<f64>),
}

/// Parsed CSV contents before discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<RawColumn>,
    pub n_rows: usize,
    /// Rows discarded because at least one field was empty.
    pub dropped_rows: usize,
}

/// Read a CSV file. `schema = None` treats every column as categorical.
pub fn load_csv(path: &Path, schema: Option<&[ColumnKind]>, header: bool) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, header)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    schema: Option<&[ColumnKind]>,
    header: bool,
) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut names: Vec<String> = if header {
        rdr.headers()?.iter().map(str::to_owned).collect()
    } else {
        Vec::new()
    };

    let mut records: Vec<csv::StringRecord> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if names.is_empty() && !header && i == 0 {
            names = (1..=rec.len()).map(|k| format!("V{k}")).collect();
        }
        if rec.len() != names.len() {
            return Err(Error::RaggedRow {
                row: i,
                expected: names.len(),
                found: rec.len(),
            });
        }
        records.push(rec);
    }

    let kinds: Vec<ColumnKind> = match schema {
        Some(s) if s.len() != names.len() => {
            return Err(Error::invalid(format!(
                "schema has {} entries but the file has {} columns",
                s.len(),
                names.len()
            )))
        }
        Some(s) => s.to_vec(),
        None => vec![ColumnKind::Categorical; names.len()],
    };

    let total = records.len();
    records.retain(|r| r.iter().all(|f| !f.is_empty()));
    let dropped_rows = total - records.len();

    let mut columns = Vec::with_capacity(names.len());
    for (j, kind) in kinds.iter().enumerate() {
        let col = match kind {
            ColumnKind::Categorical => {
                let mut lookup: HashMap<&str, usize> = HashMap::new();
                let mut labels = Vec::new();
                let codes = records
                    .iter()
                    .map(|r| {
                        let tok = &r[j];
                        *lookup.entry(tok).or_insert_with(|| {
                            labels.push(tok.to_owned());
                            labels.len() - 1
                        })
                    })
                    .collect();
                RawColumn::Categorical { codes, labels }
            }
            ColumnKind::Numeric => {
                let values = records
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let tok = &r[j];
                        tok.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| Error::NotNumeric {
                                column: names[j].clone(),
                                row: i,
                                token: tok.to_owned(),
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                RawColumn::Numeric(values)
            }
        };
        columns.push(col);
    }

    Ok(Table {
        names,
        columns,
        n_rows: records.len(),
        dropped_rows,
    })
}

/// Result of equal-frequency binning of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub codes: Vec<usize>,
    /// Upper (inclusive) edges of every bin but the last, strictly increasing.
    pub cut_points: Vec<f64>,
    /// `cut_points.len() + 1`; smaller than the requested bin count when ties
    /// collapsed some bins.
    pub effective_bins: usize,
}

impl Discretization {
    pub fn labels(&self) -> Vec<String> {
        let k = self.cut_points.len();
        (0..=k)
            .map(|b| {
                let lo = if b == 0 {
                    "-inf".to_owned()
                } else {
                    format!("{}", self.cut_points[b - 1])
                };
                let hi = if b == k {
                    "inf)".to_owned()
                } else {
                    format!("{}]", self.cut_points[b])
                };
                format!("({lo},{hi}")
            })
            .collect()
    }
}

/// Equal-frequency binning.
///
/// The `k`-th cut is the order statistic at 1-based index `ceil(k n / bins)`;
/// a value falls in the bin whose interval `(lower, upper]` contains it. Cuts
/// that coincide, or equal the maximum, are merged.
pub fn discretize_equal_frequency(values: &[f64], bins: usize) -> Result<Discretization> {
    if bins < 2 {
        return Err(Error::invalid("at least two bins are required"));
    }
    if values.is_empty() {
        return Err(Error::invalid("cannot discretize an empty column"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in numeric column"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let max = sorted[n - 1];

    let mut cut_points: Vec<f64> = Vec::with_capacity(bins - 1);
    for k in 1..bins {
        let idx = (k * n).div_ceil(bins);
        let c = sorted[idx.max(1) - 1];
        if c < max && cut_points.last().is_none_or(|&last| c > last) {
            cut_points.push(c);
        }
    }
    let effective_bins = cut_points.len() + 1;
    if effective_bins < 2 {
        return Err(Error::DegenerateBins {
            requested: bins,
            effective: effective_bins,
        });
    }
    let codes = values
        .iter()
        .map(|v| cut_points.partition_point(|c| c < v))
        .collect();
    Ok(Discretization {
        codes,
        cut_points,
        effective_bins,
    })
}

impl Table {
    /// Discretize numeric columns into `bins` equal-frequency bins and return
    /// the discrete dataset plus the cut points of each numeric column.
    pub fn discretize(&self, bins: usize) -> Result<(Dataset, Vec<Option<Discretization>>)> {
        let mut vars = Vec::with_capacity(self.columns.len());
        let mut cols: Vec<Vec<usize>> = Vec::with_capacity(self.columns.len());
        let mut cuts = Vec::with_capacity(self.columns.len());
        for (name, col) in self.names.iter().zip(&self.columns) {
            match col {
                RawColumn::Categorical { codes, labels } => {
                    vars.push(VariableMeta::new(name.clone(), labels.clone())?);
                    cols.push(codes.clone());
                    cuts.push(None);
                }
                RawColumn::Numeric(values) if values.is_empty() => {
                    vars.push(VariableMeta::new(name.clone(), Vec::new())?);
                    cols.push(Vec::new());
                    cuts.push(None);
                }
                RawColumn::Numeric(values) => {
                    let d = discretize_equal_frequency(values, bins)?;
                    vars.push(VariableMeta::new(name.clone(), d.labels())?);
                    cols.push(d.codes.clone());
                    cuts.push(Some(d));
                }
            }
        }
        let n_vars = vars.len();
        let mut flat = vec![0usize; self.n_rows * n_vars];
        for (j, col) in cols.iter().enumerate() {
            for (i, &c) in col.iter().enumerate() {
                flat[i * n_vars + j] = c;
            }
        }
        Ok((Dataset::from_flat(vars, flat)?, cuts))
    }

    /// Convert a table with no numeric columns.
    pub fn into_dataset(self) -> Result<Dataset> {
        if self
            .columns
            .iter()
            .any(|c| matches!(c, RawColumn::Numeric(v) if !v.is_empty()))
        {
            return Err(Error::invalid("table has numeric columns; discretize first"));
        }
        Ok(self.discretize(2)?.0)
    }
}

/// Render the cut-point sidecar: one `name: c1,c2,...` line per numeric column.
pub fn format_cut_points(names: &[String], cuts: &[Option<Discretization>]) -> String {
    let mut out = String::new();
    for (name, d) in names.iter().zip(cuts) {
        if let Some(d) = d {
            let list: Vec<String> = d.cut_points.iter().map(|c| format!("{c:?}")).collect();
            let _ = writeln!(out, "{name}: {}", list.join(","));
        }
    }
    out
}

/// Load a CSV whose columns are all categorical.
pub fn load_categorical_csv(path: &Path) -> Result<Dataset> {
    load_csv(path, None, true)?.into_dataset()
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Draw `n` training rows uniformly without replacement; the rest form the
/// test set, optionally capped at `test_cap` rows by a second uniform draw.
pub fn subsample(ds: &Dataset, n: usize, seed: u64, test_cap: Option<usize>) -> Result<Split> {
    let total = ds.n_rows();
    if n > total {
        return Err(Error::invalid(format!(
            "cannot draw {n} training rows from {total}"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let mut train_rows = index::sample(&mut rng, total, n).into_vec();
    train_rows.sort_unstable();

    let mut in_train = vec![false; total];
    for &r in &train_rows {
        in_train[r] = true;
    }
    let mut test_rows: Vec<usize> = (0..total).filter(|&r| !in_train[r]).collect();
    if let Some(cap) = test_cap {
        if test_rows.len() > cap {
            let mut rng = stream_rng(seed, 1);
            let mut keep: Vec<usize> = index::sample(&mut rng, test_rows.len(), cap)
                .into_iter()
                .map(|k| test_rows[k])
                .collect();
            keep.sort_unstable();
            test_rows = keep;
        }
    }
    Ok(Split {
        train: ds.select_rows(&train_rows),
        test: ds.select_rows(&test_rows),
        train_rows,
        test_rows,
    })
}
