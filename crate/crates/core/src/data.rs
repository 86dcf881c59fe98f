//! Multi-label tabular datasets: loading, validation, row subsets and fold plans.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Feature matrix plus binary label matrix, with column names.
///
/// Construction goes through [`Dataset::new`], which enforces the shape,
/// naming and binary-label invariants; the value is immutable afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    features: Array2<f64>,
    feature_names: Vec<String>,
    labels: Array2<u8>,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        feature_names: Vec<String>,
        labels: Array2<u8>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() != labels.nrows() {
            return Err(Error::InvalidDataset(format!(
                "{} feature rows but {} label rows",
                features.nrows(),
                labels.nrows()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} feature columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        if label_names.len() != labels.ncols() {
            return Err(Error::InvalidDataset(format!(
                "{} label names for {} label columns",
                label_names.len(),
                labels.ncols()
            )));
        }
        check_unique(&feature_names, "feature")?;
        check_unique(&label_names, "label")?;
        let mut all = HashSet::new();
        for n in feature_names.iter().chain(&label_names) {
            if !all.insert(n.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "name '{n}' used for both a feature and a label"
                )));
            }
        }
        if let Some(((r, c), v)) = labels.indexed_iter().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidDataset(format!(
                "label not binary: value {v} at row {r}, label '{}'",
                label_names[c]
            )));
        }
        if let Some(((r, c), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature value at row {r}, feature '{}'",
                feature_names[c]
            )));
        }
        // Row-major storage lets rows be borrowed as plain slices.
        let features = features.as_standard_layout().into_owned();
        let labels = labels.as_standard_layout().into_owned();
        Ok(Dataset {
            name: name.into(),
            features,
            feature_names,
            labels,
            label_names,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array2<u8> {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    /// `(instances, features, labels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_instances(), self.n_features(), self.n_labels())
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        self.features
            .row(i)
            .to_slice()
            .expect("features are stored row-major")
    }

    pub fn label_row(&self, i: usize) -> &[u8] {
        self.labels
            .row(i)
            .to_slice()
            .expect("labels are stored row-major")
    }

    pub fn label_column(&self, l: usize) -> ArrayView1<'_, u8> {
        self.labels.column(l)
    }

    /// Rows selected by `indices`, in the requested order.
    pub fn split(&self, indices: &[usize]) -> Result<Dataset> {
        let n = self.n_instances();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        Ok(Dataset {
            name: self.name.clone(),
            features: self.features.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
            labels: self.labels.select(Axis(0), indices),
            label_names: self.label_names.clone(),
        })
    }

    /// A copy of the dataset restricted to (and reordered by) the given label columns.
    pub fn select_labels(&self, label_indices: &[usize]) -> Result<Dataset> {
        let l = self.n_labels();
        if let Some(&bad) = label_indices.iter().find(|&&i| i >= l) {
            return Err(Error::IndexOutOfRange { index: bad, len: l });
        }
        Dataset::new(
            self.name.clone(),
            self.features.clone(),
            self.feature_names.clone(),
            self.labels.select(Axis(1), label_indices),
            label_indices
                .iter()
                .map(|&i| self.label_names[i].clone())
                .collect(),
        )
    }

    /// Writes features then labels as CSV with a header row.
    ///
    /// Values use the shortest representation that parses back to the same
    /// `f64`, so reloading with [`load_csv`] reproduces the dataset exactly.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let header: Vec<&str> = self
            .feature_names
            .iter()
            .chain(&self.label_names)
            .map(String::as_str)
            .collect();
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for i in 0..self.n_instances() {
            let record: Vec<String> = self
                .feature_row(i)
                .iter()
                .map(|v| v.to_string())
                .chain(self.label_row(i).iter().map(|v| v.to_string()))
                .collect();
            w.write_record(&record).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::InvalidDataset(format!(
                "duplicate {what} name '{n}'"
            )));
        }
    }
    Ok(())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(line, format!("{}: {other:?}", path.display())),
    }
}

/// Which attributes of an ARFF file are labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSpec {
    /// The last `n` attributes (Mulan convention).
    Trailing(usize),
    /// The first `n` attributes (MEKA convention).
    Leading(usize),
    /// Attributes with these names, in this order.
    Names(Vec<String>),
}

#[derive(Debug, Clone)]
enum AttrType {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Debug, Clone)]
struct Attribute {
    name: String,
    kind: AttrType,
}

/// Loads the dense ARFF subset: `@relation`, `@attribute name numeric|{..}`,
/// `@data` with comma-separated rows, `%` comments and `?` for missing.
///
/// Label attributes must take only the values 0 and 1. Nominal feature
/// attributes are encoded by the position of the value in their declaration.
pub fn load_arff(path: impl AsRef<Path>, label_spec: &LabelSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let default_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_arff(&text, label_spec, &default_name)
}

pub fn parse_arff(text: &str, label_spec: &LabelSpec, default_name: &str) -> Result<Dataset> {
    let mut relation: Option<String> = None;
    let mut attributes: Vec<Attribute> = Vec::new();
    let mut rows: Vec<(usize, Vec<Option<String>>)> = Vec::new();
    let mut in_data = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            if line.starts_with('{') {
                return Err(Error::parse(line_no, "sparse ARFF rows are not supported"));
            }
            let cells = split_arff_row(line, line_no)?;
            if cells.len() != attributes.len() {
                return Err(Error::parse(
                    line_no,
                    format!(
                        "row has {} values but {} attributes are declared",
                        cells.len(),
                        attributes.len()
                    ),
                ));
            }
            rows.push((line_no, cells));
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            let (name, _) = take_token(line["@relation".len()..].trim(), line_no)?;
            relation = Some(name);
        } else if lower.starts_with("@attribute") {
            attributes.push(parse_attribute(&line["@attribute".len()..], line_no)?);
        } else if lower.starts_with("@data") {
            if attributes.is_empty() {
                return Err(Error::parse(line_no, "@data before any @attribute"));
            }
            in_data = true;
        } else {
            return Err(Error::parse(
                line_no,
                format!("unexpected header line '{line}'"),
            ));
        }
    }
    if !in_data {
        return Err(Error::parse(text.lines().count(), "missing @data section"));
    }

    let n_attr = attributes.len();
    let label_idx: Vec<usize> = match label_spec {
        LabelSpec::Trailing(n) => (n_attr.saturating_sub(*n)..n_attr).collect(),
        LabelSpec::Leading(n) => (0..(*n).min(n_attr)).collect(),
        LabelSpec::Names(names) => names
            .iter()
            .map(|n| {
                attributes
                    .iter()
                    .position(|a| &a.name == n)
                    .ok_or_else(|| Error::InvalidDataset(format!("no attribute named '{n}'")))
            })
            .collect::<Result<_>>()?,
    };
    let requested = match label_spec {
        LabelSpec::Trailing(n) | LabelSpec::Leading(n) => *n,
        LabelSpec::Names(names) => names.len(),
    };
    if requested == 0 || requested >= n_attr {
        return Err(Error::InvalidDataset(format!(
            "label spec selects {requested} of {n_attr} attributes; need at least 1 and fewer than all"
        )));
    }
    let label_set: HashSet<usize> = label_idx.iter().copied().collect();
    let feature_idx: Vec<usize> = (0..n_attr).filter(|i| !label_set.contains(i)).collect();

    for &li in &label_idx {
        if let AttrType::Nominal(values) = &attributes[li].kind {
            let mut sorted: Vec<&str> = values.iter().map(String::as_str).collect();
            sorted.sort_unstable();
            if sorted != ["0", "1"] {
                return Err(Error::InvalidDataset(format!(
                    "label not binary: attribute '{}' declares {{{}}}",
                    attributes[li].name,
                    values.join(",")
                )));
            }
        }
    }

    let n = rows.len();
    let mut features: Vec<Option<f64>> = Vec::with_capacity(n * feature_idx.len());
    let mut labels: Vec<u8> = Vec::with_capacity(n * label_idx.len());
    for (line_no, cells) in &rows {
        for &fi in &feature_idx {
            let attr = &attributes[fi];
            let value = match cells[fi].as_deref() {
                None => None,
                Some(cell) => Some(match &attr.kind {
                    AttrType::Numeric => cell.parse::<f64>().map_err(|_| {
                        Error::parse(
                            *line_no,
                            format!("non-numeric value '{cell}' for attribute '{}'", attr.name),
                        )
                    })?,
                    AttrType::Nominal(values) => {
                        values.iter().position(|v| v == cell).ok_or_else(|| {
                            Error::parse(
                                *line_no,
                                format!(
                                    "value '{cell}' not declared for attribute '{}'",
                                    attr.name
                                ),
                            )
                        })? as f64
                    }
                }),
            };
            features.push(value);
        }
        for &li in &label_idx {
            let attr = &attributes[li];
            let v = match cells[li].as_deref() {
                None => {
                    return Err(Error::parse(
                        *line_no,
                        format!("missing value for label '{}'", attr.name),
                    ))
                }
                Some(cell) => parse_binary(cell).ok_or_else(|| {
                    Error::parse(
                        *line_no,
                        format!("label not binary: value '{cell}' for label '{}'", attr.name),
                    )
                })?,
            };
            labels.push(v);
        }
    }

    let features = impute_column_means(features, n, feature_idx.len());
    let features = Array2::from_shape_vec((n, feature_idx.len()), features)
        .expect("row-major buffer matches shape");
    let labels = Array2::from_shape_vec((n, label_idx.len()), labels)
        .expect("row-major buffer matches shape");
    let name = relation
        .map(|r| r.split(':').next().unwrap_or("").trim().to_string())
        .filter(|r| !r.is_empty())
        .unwrap_or_else(|| default_name.to_string());
    Dataset::new(
        name,
        features,
        feature_idx
            .iter()
            .map(|&i| attributes[i].name.clone())
            .collect(),
        labels,
        label_idx
            .iter()
            .map(|&i| attributes[i].name.clone())
            .collect(),
    )
}

fn parse_binary(cell: &str) -> Option<u8> {
    match cell {
        "0" => Some(0),
        "1" => Some(1),
        other => match other.parse::<f64>() {
            Ok(0.0) => Some(0),
            Ok(1.0) => Some(1),
            _ => None,
        },
    }
}

/// Reads one possibly quoted token, returning it and the unconsumed rest.
fn take_token(s: &str, line_no: usize) -> Result<(String, &str)> {
    let s = s.trim_start();
    let mut chars = s.char_indices();
    match chars.next() {
        None => Err(Error::parse(line_no, "expected a name")),
        Some((_, q)) if q == '\'' || q == '"' => {
            let mut out = String::new();
            let mut escaped = false;
            for (i, c) in chars {
                if escaped {
                    out.push(c);
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    return Ok((out, &s[i + 1..]));
                } else {
                    out.push(c);
                }
            }
            Err(Error::parse(line_no, "unterminated quoted name"))
        }
        Some(_) => {
            let end = s
                .find(|c: char| c.is_whitespace() || c == '{')
                .unwrap_or(s.len());
            Ok((s[..end].to_string(), &s[end..]))
        }
    }
}

fn parse_attribute(rest: &str, line_no: usize) -> Result<Attribute> {
    let (name, rest) = take_token(rest, line_no)?;
    let ty = rest.trim();
    let kind = if ty.starts_with('{') {
        let inner = ty
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or_else(|| Error::parse(line_no, format!("malformed nominal type '{ty}'")))?;
        let values: Vec<String> = inner
            .split(',')
            .map(|v| unquote(v.trim()).to_string())
            .collect();
        if values.iter().any(String::is_empty) {
            return Err(Error::parse(
                line_no,
                format!("empty nominal value in '{ty}'"),
            ));
        }
        AttrType::Nominal(values)
    } else {
        match ty.to_ascii_lowercase().as_str() {
            "numeric" | "real" | "integer" => AttrType::Numeric,
            other => {
                return Err(Error::parse(
                    line_no,
                    format!("unsupported attribute type '{other}' for '{name}'"),
                ))
            }
        }
    };
    Ok(Attribute { name, kind })
}

fn unquote(s: &str) -> &str {
    for q in ['\'', '"'] {
        if let Some(inner) = s.strip_prefix(q).and_then(|t| t.strip_suffix(q)) {
            return inner;
        }
    }
    s
}

fn split_arff_row(line: &str, line_no: usize) -> Result<Vec<Option<String>>> {
    let mut cells = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut was_quoted = false;
    for c in line.chars() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => current.push(c),
            None if c == '\'' || c == '"' => {
                quote = Some(c);
                was_quoted = true;
            }
            None if c == ',' => {
                cells.push(finish_cell(&current, was_quoted));
                current.clear();
                was_quoted = false;
            }
            None => current.push(c),
        }
    }
    if quote.is_some() {
        return Err(Error::parse(line_no, "unterminated quote in data row"));
    }
    cells.push(finish_cell(&current, was_quoted));
    Ok(cells)
}

fn finish_cell(raw: &str, was_quoted: bool) -> Option<String> {
    let cell = if was_quoted { raw } else { raw.trim() };
    if !was_quoted && (cell == "?" || cell.is_empty()) {
        None
    } else {
        Some(cell.to_string())
    }
}

/// Replaces missing entries by the mean of the observed entries in their column.
///
/// A column with no observed values at all becomes 0.
fn impute_column_means(values: Vec<Option<f64>>, rows: usize, cols: usize) -> Vec<f64> {
    let mut sums = vec![0.0; cols];
    let mut counts = vec![0usize; cols];
    for r in 0..rows {
        for c in 0..cols {
            if let Some(v) = values[r * cols + c] {
                sums[c] += v;
                counts[c] += 1;
            }
        }
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.unwrap_or(means[i % cols]))
        .collect()
}

/// Loads a headed CSV file. The columns picked by `label_spec` become labels;
/// every other column is a numeric feature. Empty feature cells are imputed
/// with the column mean.
pub fn load_csv(path: impl AsRef<Path>, label_spec: &LabelSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_spec, &name)
}

pub fn read_csv(reader: impl std::io::Read, label_spec: &LabelSpec, name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_names: Vec<String> = match label_spec {
        LabelSpec::Names(names) => names.clone(),
        LabelSpec::Trailing(n) | LabelSpec::Leading(n) if *n >= header.len() => {
            return Err(Error::InvalidDataset(format!(
                "{n} label columns requested but the file has {} columns",
                header.len()
            )))
        }
        LabelSpec::Trailing(n) => header[header.len() - n..].to_vec(),
        LabelSpec::Leading(n) => header[..*n].to_vec(),
    };
    if label_names.is_empty() {
        return Err(Error::InvalidDataset("no label columns given".into()));
    }
    let label_cols: Vec<usize> = label_names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::InvalidDataset(format!("missing column '{n}'")))
        })
        .collect::<Result<_>>()?;
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|c| !label_cols.contains(c))
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::InvalidDataset("no feature columns left".into()));
    }

    let mut features: Vec<Option<f64>> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line_no = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(n + 2);
        if record.len() != header.len() {
            return Err(Error::parse(
                line_no,
                format!("{} cells but {} columns", record.len(), header.len()),
            ));
        }
        for &c in &feature_cols {
            let cell = record[c].trim();
            if cell.is_empty() {
                features.push(None);
            } else {
                let v = cell.parse::<f64>().map_err(|_| {
                    Error::parse(
                        line_no,
                        format!("non-numeric value '{cell}' in column '{}'", header[c]),
                    )
                })?;
                features.push(Some(v));
            }
        }
        for &c in &label_cols {
            let cell = record[c].trim();
            if cell.is_empty() {
                return Err(Error::parse(
                    line_no,
                    format!("missing value for label '{}'", header[c]),
                ));
            }
            labels.push(parse_binary(cell).ok_or_else(|| {
                Error::parse(
                    line_no,
                    format!("label not binary: value '{cell}' in column '{}'", header[c]),
                )
            })?);
        }
        n += 1;
    }
    let features = impute_column_means(features, n, feature_cols.len());
    Dataset::new(
        name,
        Array2::from_shape_vec((n, feature_cols.len()), features).expect("shape"),
        feature_cols.iter().map(|&c| header[c].clone()).collect(),
        Array2::from_shape_vec((n, label_cols.len()), labels).expect("shape"),
        label_names,
    )
}

/// One train/test split of a fold plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Repeated k-fold assignment of instance indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_instances: usize,
    pub repetitions: usize,
    pub folds_per_rep: usize,
    pub seed: u64,
    /// `assignments[rep][fold]`.
    pub assignments: Vec<Vec<Fold>>,
}

impl FoldPlan {
    pub fn folds(&self) -> impl Iterator<Item = &Fold> {
        self.assignments.iter().flatten()
    }

    pub fn n_folds_total(&self) -> usize {
        self.repetitions * self.folds_per_rep
    }
}

/// Shuffles `0..n_instances` once per repetition and cuts it into `k`
/// folds whose sizes differ by at most one.
pub fn make_folds(n_instances: usize, repetitions: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if k > n_instances {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the number of instances ({n_instances})"
        )));
    }
    if repetitions == 0 {
        return Err(Error::InvalidParameter(
            "repetitions must be at least 1".into(),
        ));
    }
    let assignments = (0..repetitions)
        .map(|rep| {
            let mut order: Vec<usize> = (0..n_instances).collect();
            let mut rng = seed::rng_for(seed, seed::STREAM_FOLDS + rep as u64);
            order.shuffle(&mut rng);
            let base = n_instances / k;
            let extra = n_instances % k;
            let mut start = 0;
            (0..k)
                .map(|f| {
                    let size = base + usize::from(f < extra);
                    let mut test = order[start..start + size].to_vec();
                    start += size;
                    test.sort_unstable();
                    let mut in_test = vec![false; n_instances];
                    for &t in &test {
                        in_test[t] = true;
                    }
                    let train = (0..n_instances).filter(|&i| !in_test[i]).collect();
                    Fold { train, test }
                })
                .collect()
        })
        .collect();
    Ok(FoldPlan {
        n_instances,
        repetitions,
        folds_per_rep: k,
        seed,
        assignments,
    })
}
