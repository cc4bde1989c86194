//! Raw CSV ingestion, binarization, train/test splitting and row-subset views.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_FEATURES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    Label,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaColumn {
    pub name: String,
    pub kind: ColumnKind,
}

/// Sidecar JSON declaring the kind of every CSV column.
///
/// ```json
/// {"columns": [{"name": "color", "kind": "categorical"},
///              {"name": "class", "kind": "label"}]}
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<SchemaColumn>,
}

impl Schema {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(file)?)
    }

    pub fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.kind)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RawValues {
    Categorical(Vec<String>),
    Numeric(Vec<f64>),
}

impl RawValues {
    pub fn len(&self) -> usize {
        match self {
            RawValues::Categorical(v) => v.len(),
            RawValues::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub values: RawValues,
}

/// Parsed but not yet binarized data. Labels are canonical class indices.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    columns: Vec<RawColumn>,
    labels: Vec<u32>,
    class_names: Vec<String>,
}

impl RawDataset {
    /// Builds a dataset from raw label strings, canonicalizing classes by
    /// order of first appearance.
    pub fn new(columns: Vec<RawColumn>, raw_labels: &[String]) -> Result<Self> {
        if raw_labels.is_empty() {
            return Err(Error::NoRows);
        }
        if let Some(c) = columns.iter().find(|c| c.values.len() != raw_labels.len()) {
            return Err(Error::Schema(format!(
                "column {} has {} rows, expected {}",
                c.name,
                c.values.len(),
                raw_labels.len()
            )));
        }
        let mut index: HashMap<&str, u32> = HashMap::new();
        let mut class_names = Vec::new();
        let labels = raw_labels
            .iter()
            .map(|l| {
                *index.entry(l.as_str()).or_insert_with(|| {
                    class_names.push(l.clone());
                    (class_names.len() - 1) as u32
                })
            })
            .collect();
        Ok(Self {
            columns,
            labels,
            class_names,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn columns(&self) -> &[RawColumn] {
        &self.columns
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }
}

/// Reads a raw CSV file (header row required) according to `schema`.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_csv(file, path, schema)
}

/// Same as [`load_csv`] over any reader; `source` only labels error messages.
pub fn parse_csv<R: Read>(reader: R, source: &Path, schema: &Schema) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();

    for col in &schema.columns {
        if !header.contains(&col.name) {
            return Err(Error::Schema(format!("unknown column `{}`", col.name)));
        }
    }
    let kinds = header
        .iter()
        .map(|h| {
            schema
                .kind_of(h)
                .ok_or_else(|| Error::Schema(format!("header column `{h}` missing from schema")))
        })
        .collect::<Result<Vec<_>>>()?;
    let label_cols: Vec<usize> = (0..kinds.len())
        .filter(|&i| kinds[i] == ColumnKind::Label)
        .collect();
    let label_col = match label_cols.as_slice() {
        [one] => *one,
        _ => {
            return Err(Error::Schema(format!(
                "expected exactly one label column, found {}",
                label_cols.len()
            )))
        }
    };

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (i, record) in rdr.records().enumerate() {
        // data rows are numbered from 1; the header is row 0
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            path: source.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                path: source.to_path_buf(),
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            cells[j].push(field.to_owned());
        }
    }
    if cells[label_col].is_empty() {
        return Err(Error::NoRows);
    }

    let mut columns = Vec::new();
    for (j, name) in header.iter().enumerate() {
        let values = match kinds[j] {
            ColumnKind::Label => continue,
            ColumnKind::Categorical => RawValues::Categorical(std::mem::take(&mut cells[j])),
            ColumnKind::Numeric => {
                let parsed = cells[j]
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| Error::Parse {
                                path: source.to_path_buf(),
                                row: i + 1,
                                message: format!("column `{name}`: `{s}` is not a finite number"),
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                RawValues::Numeric(parsed)
            }
        };
        columns.push(RawColumn {
            name: name.clone(),
            values,
        });
    }
    RawDataset::new(columns, &cells[label_col])
}

/// Immutable n×d binary matrix with class labels, stored column-major as bitsets.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryDataset {
    n: usize,
    columns: Vec<BitSet>,
    labels: Vec<u32>,
    n_classes: usize,
    class_masks: Vec<BitSet>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl BinaryDataset {
    /// `columns[f]` holds feature `f` for every row.
    pub fn from_columns(
        columns: Vec<BitSet>,
        labels: Vec<u32>,
        feature_names: Option<Vec<String>>,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::NoRows);
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::Contract(format!(
                "column length {} does not match {} labels",
                c.len(),
                n
            )));
        }
        let max_label = *labels.iter().max().expect("nonempty") as usize;
        let class_names =
            class_names.unwrap_or_else(|| (0..=max_label).map(|c| c.to_string()).collect());
        let n_classes = class_names.len().max(max_label + 1);
        let feature_names =
            feature_names.unwrap_or_else(|| (0..columns.len()).map(|f| format!("x{f}")).collect());
        if feature_names.len() != columns.len() {
            return Err(Error::Contract("feature name count mismatch".into()));
        }
        let class_masks = (0..n_classes)
            .map(|c| BitSet::from_bools(labels.iter().map(|&l| l as usize == c)))
            .collect();
        Ok(Self {
            n,
            columns,
            labels,
            n_classes,
            class_masks,
            feature_names,
            class_names,
        })
    }

    /// Row-major convenience constructor.
    pub fn from_rows(rows: &[Vec<bool>], labels: Vec<u32>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::Contract("row and label counts differ".into()));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Contract("ragged rows".into()));
        }
        let columns = (0..d)
            .map(|f| BitSet::from_bools(rows.iter().map(|r| r[f])))
            .collect();
        Self::from_columns(columns, labels, None, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> u32 {
        self.labels[row]
    }

    pub fn column(&self, feature: usize) -> &BitSet {
        &self.columns[feature]
    }

    pub fn class_mask(&self, class: usize) -> &BitSet {
        &self.class_masks[class]
    }

    pub fn bit(&self, row: usize, feature: usize) -> bool {
        self.columns[feature].get(row)
    }

    pub fn row(&self, row: usize) -> Vec<bool> {
        self.columns.iter().map(|c| c.get(row)).collect()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// View over every row with no features queried.
    pub fn view(&self) -> DatasetView<'_> {
        DatasetView::with_rows(self, BitSet::full(self.n))
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| BitSet::from_bools(rows.iter().map(|&r| c.get(r))))
            .collect();
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        let mut out = Self::from_columns(
            columns,
            labels,
            Some(self.feature_names.clone()),
            Some(self.class_names.clone()),
        )?;
        // keep the class universe of the parent even when a class is absent
        out.n_classes = self.n_classes;
        out.class_masks
            .resize_with(self.n_classes, || BitSet::new(rows.len()));
        Ok(out)
    }

    /// Keeps the first `count` features in column order.
    pub fn take_features(&self, count: usize) -> Result<Self> {
        if count > self.d() {
            return Err(Error::Config(format!(
                "requested {count} features but dataset has {}",
                self.d()
            )));
        }
        let mut out = self.clone();
        out.columns.truncate(count);
        out.feature_names.truncate(count);
        Ok(out)
    }

    /// Writes the binarized CSV format: feature-name header, 0/1 cells, final `label` column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.feature_names.clone();
        header.push("label".into());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.d() + 1);
        for r in 0..self.n {
            record.clear();
            record.extend(
                self.columns
                    .iter()
                    .map(|c| if c.get(r) { "1" } else { "0" }.to_string()),
            );
            record.push(self.labels[r].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomically(path.as_ref(), |f| self.write_csv(f))
    }

    pub fn read_csv<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header.last().map(String::as_str) != Some("label") {
            return Err(Error::Schema(
                "binarized CSV must end with a `label` column".into(),
            ));
        }
        let d = header.len() - 1;
        let mut bits: Vec<Vec<bool>> = vec![Vec::new(); d];
        let mut labels = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let parse_err = |message: String| Error::Parse {
                path: source.to_path_buf(),
                row,
                message,
            };
            let record = record.map_err(|e| parse_err(e.to_string()))?;
            if record.len() != d + 1 {
                return Err(parse_err(format!(
                    "expected {} fields, found {}",
                    d + 1,
                    record.len()
                )));
            }
            for (f, cell) in record.iter().take(d).enumerate() {
                bits[f].push(match cell {
                    "0" => false,
                    "1" => true,
                    other => return Err(parse_err(format!("cell `{other}` is not 0 or 1"))),
                });
            }
            labels.push(record[d].parse::<u32>().map_err(|_| {
                parse_err(format!(
                    "label `{}` is not a non-negative integer",
                    &record[d]
                ))
            })?);
        }
        if labels.is_empty() {
            return Err(Error::NoRows);
        }
        let columns = bits.into_iter().map(BitSet::from_bools).collect();
        let mut names = header;
        names.truncate(d);
        Self::from_columns(columns, labels, Some(names), None)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read_csv(File::open(path)?, path)
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomically<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut File) -> Result<()>,
{
    let mut tmp: PathBuf = path.to_path_buf();
    let name = path
        .file_name()
        .map(|n| format!(".{}.tmp", n.to_string_lossy()))
        .unwrap_or_else(|| ".out.tmp".into());
    tmp.set_file_name(name);
    let mut file = File::create(&tmp)?;
    body(&mut file)?;
    file.sync_all()?;
    drop(file);
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeEncoding {
    /// One indicator column per listed value.
    Categorical { name: String, values: Vec<String> },
    /// One column per threshold, bit = `value >= threshold`.
    Numeric { name: String, thresholds: Vec<f64> },
}

impl AttributeEncoding {
    pub fn name(&self) -> &str {
        match self {
            AttributeEncoding::Categorical { name, .. }
            | AttributeEncoding::Numeric { name, .. } => name,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            AttributeEncoding::Categorical { values, .. } => values.len(),
            AttributeEncoding::Numeric { thresholds, .. } => thresholds.len(),
        }
    }
}

/// Per-attribute rules turning a [`RawDataset`] into binary features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarizationMap {
    pub attributes: Vec<AttributeEncoding>,
}

impl BinarizationMap {
    pub fn width(&self) -> usize {
        self.attributes.iter().map(AttributeEncoding::width).sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for attr in &self.attributes {
            match attr {
                AttributeEncoding::Categorical { name, values } => {
                    names.extend(values.iter().map(|v| format!("{name}={v}")))
                }
                AttributeEncoding::Numeric { name, thresholds } => {
                    names.extend(thresholds.iter().map(|t| format!("{name}>={t}")))
                }
            }
        }
        names
    }

    /// Encodes `raw` with these rules. Unseen categories encode as all zeros.
    pub fn apply(&self, raw: &RawDataset) -> Result<BinaryDataset> {
        let mut columns = Vec::with_capacity(self.width());
        for attr in &self.attributes {
            let col = raw
                .columns
                .iter()
                .find(|c| c.name == attr.name())
                .ok_or_else(|| Error::Schema(format!("attribute `{}` not in data", attr.name())))?;
            match (attr, &col.values) {
                (AttributeEncoding::Categorical { values, .. }, RawValues::Categorical(cells)) => {
                    for v in values {
                        columns.push(BitSet::from_bools(cells.iter().map(|c| c == v)));
                    }
                }
                (AttributeEncoding::Numeric { thresholds, .. }, RawValues::Numeric(cells)) => {
                    for &t in thresholds {
                        columns.push(BitSet::from_bools(cells.iter().map(|&x| x >= t)));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "attribute `{}` has a different kind than the map",
                        attr.name()
                    )))
                }
            }
        }
        BinaryDataset::from_columns(
            columns,
            raw.labels.clone(),
            Some(self.feature_names()),
            Some(raw.class_names.clone()),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomically(path.as_ref(), |f| {
            serde_json::to_writer_pretty(&mut *f, self)?;
            Ok(())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// Thresholds at equal-frequency quantiles of the sorted distinct values,
/// each placed midway between two consecutive distinct values.
pub fn quantile_thresholds(values: &[f64], budget: usize) -> Vec<f64> {
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let m = distinct.len();
    if m < 2 || budget == 0 {
        return Vec::new();
    }
    let cuts: BTreeSet<usize> = if budget >= m - 1 {
        (1..m).collect()
    } else {
        (1..=budget)
            .map(|j| (j * m / (budget + 1)).clamp(1, m - 1))
            .collect()
    };
    cuts.into_iter()
        .map(|i| distinct[i - 1] + (distinct[i] - distinct[i - 1]) / 2.0)
        .collect()
}

/// Binarizes `raw`: one indicator per category, and numeric attributes share
/// what remains of `max_features` as quantile thresholds.
pub fn binarize(raw: &RawDataset, max_features: usize) -> Result<(BinaryDataset, BinarizationMap)> {
    if max_features == 0 {
        return Err(Error::Config("max_features must be positive".into()));
    }
    let mut categorical_width = 0;
    let mut numeric_count = 0;
    for col in &raw.columns {
        match &col.values {
            RawValues::Categorical(cells) => {
                let distinct: BTreeSet<&String> = cells.iter().collect();
                if distinct.len() > 1 {
                    categorical_width += distinct.len();
                }
            }
            RawValues::Numeric(_) => numeric_count += 1,
        }
    }
    if categorical_width > max_features {
        return Err(Error::Config(format!(
            "categorical attributes expand to {categorical_width} columns, above the cap of {max_features}"
        )));
    }
    let remaining = max_features - categorical_width;
    let (per_numeric, leftover) = if numeric_count == 0 {
        (0, 0)
    } else {
        if remaining < numeric_count {
            return Err(Error::Config(format!(
                "{remaining} columns left for {numeric_count} numeric attributes; need at least one each"
            )));
        }
        (remaining / numeric_count, remaining % numeric_count)
    };

    let mut attributes = Vec::with_capacity(raw.columns.len());
    let mut numeric_index = 0;
    for col in &raw.columns {
        match &col.values {
            RawValues::Categorical(cells) => {
                let distinct: BTreeSet<&String> = cells.iter().collect();
                let values = if distinct.len() > 1 {
                    distinct.into_iter().cloned().collect()
                } else {
                    Vec::new()
                };
                attributes.push(AttributeEncoding::Categorical {
                    name: col.name.clone(),
                    values,
                });
            }
            RawValues::Numeric(cells) => {
                let budget = per_numeric + usize::from(numeric_index < leftover);
                numeric_index += 1;
                attributes.push(AttributeEncoding::Numeric {
                    name: col.name.clone(),
                    thresholds: quantile_thresholds(cells, budget),
                });
            }
        }
    }
    let map = BinarizationMap { attributes };
    let ds = map.apply(raw)?;
    Ok((ds, map))
}

/// Seeded shuffle of `0..n` split into sorted (train, test) index lists.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction {fraction} not in (0,1)"
        )));
    }
    if n < 2 {
        return Err(Error::Config("need at least two rows to split".into()));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "fraction {fraction} of {n} rows leaves one part empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(
    ds: &BinaryDataset,
    fraction: f64,
    seed: u64,
) -> Result<(BinaryDataset, BinaryDataset)> {
    let (train, test) = split_indices(ds.n(), fraction, seed)?;
    Ok((ds.select_rows(&train)?, ds.select_rows(&test)?))
}

/// The rows of a dataset reachable along one branch path.
///
/// The path doubles as the itemset: `(feature, bit)` pairs sorted by feature.
#[derive(Clone, Debug)]
pub struct DatasetView<'a> {
    base: &'a BinaryDataset,
    rows: BitSet,
    path: Vec<(usize, bool)>,
    counts: Vec<u32>,
    len: usize,
}

impl<'a> DatasetView<'a> {
    /// Arbitrary row subset with nothing queried.
    pub fn with_rows(base: &'a BinaryDataset, rows: BitSet) -> Self {
        Self::build(base, rows, Vec::new())
    }

    fn build(base: &'a BinaryDataset, rows: BitSet, path: Vec<(usize, bool)>) -> Self {
        let counts: Vec<u32> = (0..base.n_classes())
            .map(|c| rows.and_count(base.class_mask(c)) as u32)
            .collect();
        let len = counts.iter().map(|&c| c as usize).sum();
        Self {
            base,
            rows,
            path,
            counts,
            len,
        }
    }

    pub fn base(&self) -> &'a BinaryDataset {
        self.base
    }

    pub fn rows(&self) -> &BitSet {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Per-class row counts.
    pub fn class_counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn is_pure(&self) -> bool {
        self.counts.iter().filter(|&&c| c > 0).count() <= 1
    }

    /// Majority class; ties go to the smallest class index.
    pub fn majority(&self) -> u32 {
        majority_class(&self.counts)
    }

    /// Sorted `(feature, bit)` assignments fixed on the way here.
    pub fn itemset(&self) -> &[(usize, bool)] {
        &self.path
    }

    pub fn is_queried(&self, feature: usize) -> bool {
        self.path
            .binary_search_by_key(&feature, |&(f, _)| f)
            .is_ok()
    }

    pub fn unqueried(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.base.d()).filter(move |&f| !self.is_queried(f))
    }

    pub fn unqueried_count(&self) -> usize {
        self.base.d() - self.path.len()
    }

    /// Rows where `feature == value`, with `feature` marked as queried.
    pub fn restrict(&self, feature: usize, value: bool) -> Result<DatasetView<'a>> {
        if feature >= self.base.d() {
            return Err(Error::Contract(format!(
                "feature {feature} out of range (d = {})",
                self.base.d()
            )));
        }
        let pos = match self.path.binary_search_by_key(&feature, |&(f, _)| f) {
            Ok(_) => {
                return Err(Error::Contract(format!(
                    "feature {feature} already queried on this path"
                )))
            }
            Err(pos) => pos,
        };
        let column = self.base.column(feature);
        let rows = if value {
            self.rows.and(column)
        } else {
            self.rows.and_not(column)
        };
        let mut path = self.path.clone();
        path.insert(pos, (feature, value));
        Ok(Self::build(self.base, rows, path))
    }
}

pub(crate) fn majority_class(counts: &[u32]) -> u32 {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(cols: &[(&str, ColumnKind)]) -> Schema {
        Schema {
            columns: cols
                .iter()
                .map(|(n, k)| SchemaColumn {
                    name: n.to_string(),
                    kind: *k,
                })
                .collect(),
        }
    }

    fn parse(text: &str, s: &Schema) -> Result<RawDataset> {
        parse_csv(text.as_bytes(), Path::new("mem.csv"), s)
    }

    #[test]
    fn loads_four_row_categorical_file() {
        let s = schema(&[
            ("color", ColumnKind::Categorical),
            ("label", ColumnKind::Label),
        ]);
        let raw = parse("color,label\nred,yes\nblue,no\nred,no\ngreen,yes\n", &s).unwrap();
        assert_eq!(raw.n(), 4);
        assert_eq!(raw.labels(), &[0, 1, 1, 0]);
        assert_eq!(raw.class_names(), &["yes".to_string(), "no".to_string()]);
    }

    #[test]
    fn empty_data_section_is_rejected() {
        let s = schema(&[
            ("color", ColumnKind::Categorical),
            ("label", ColumnKind::Label),
        ]);
        assert!(matches!(parse("color,label\n", &s), Err(Error::NoRows)));
    }

    #[test]
    fn missing_field_names_the_row() {
        let s = schema(&[
            ("color", ColumnKind::Categorical),
            ("label", ColumnKind::Label),
        ]);
        match parse("color,label\nred,yes\nblue\n", &s) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_schema_column_is_a_schema_error() {
        let s = schema(&[
            ("colour", ColumnKind::Categorical),
            ("label", ColumnKind::Label),
        ]);
        assert!(matches!(
            parse("color,label\nred,yes\n", &s),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn categorical_expands_to_one_column_per_value() {
        let s = schema(&[("c", ColumnKind::Categorical), ("y", ColumnKind::Label)]);
        let raw = parse("c,y\na,0\nb,1\nc,0\na,1\n", &s).unwrap();
        let (ds, map) = binarize(&raw, 100).unwrap();
        assert_eq!(ds.d(), 3);
        assert_eq!(map.width(), 3);
        assert_eq!(ds.feature_names(), &["c=a", "c=b", "c=c"]);
        assert_eq!(ds.row(3), vec![true, false, false]);
    }

    #[test]
    fn single_numeric_threshold_is_the_median_midpoint() {
        assert_eq!(quantile_thresholds(&[1.0, 2.0, 3.0, 4.0], 1), vec![2.5]);
        let s = schema(&[("v", ColumnKind::Numeric), ("y", ColumnKind::Label)]);
        let raw = parse("v,y\n1,0\n2,0\n3,1\n4,1\n", &s).unwrap();
        let (ds, _) = binarize(&raw, 1).unwrap();
        assert_eq!(ds.d(), 1);
        let col: Vec<bool> = (0..4).map(|r| ds.bit(r, 0)).collect();
        assert_eq!(col, vec![false, false, true, true]);
    }

    #[test]
    fn constant_column_contributes_nothing() {
        let s = schema(&[
            ("v", ColumnKind::Numeric),
            ("c", ColumnKind::Categorical),
            ("y", ColumnKind::Label),
        ]);
        let raw = parse("v,c,y\n5,a,0\n5,a,1\n5,a,0\n", &s).unwrap();
        let (ds, _) = binarize(&raw, 10).unwrap();
        assert_eq!(ds.d(), 0);
    }

    #[test]
    fn budget_below_one_per_numeric_is_config_error() {
        let s = schema(&[
            ("a", ColumnKind::Numeric),
            ("b", ColumnKind::Numeric),
            ("y", ColumnKind::Label),
        ]);
        let raw = parse("a,b,y\n1,2,0\n3,4,1\n", &s).unwrap();
        assert!(matches!(binarize(&raw, 1), Err(Error::Config(_))));
    }

    #[test]
    fn leftover_budget_goes_to_earlier_attributes() {
        let s = schema(&[
            ("a", ColumnKind::Numeric),
            ("b", ColumnKind::Numeric),
            ("y", ColumnKind::Label),
        ]);
        let mut text = String::from("a,b,y\n");
        for i in 0..20 {
            text.push_str(&format!("{i},{},{}\n", 100 - i, i % 2));
        }
        let raw = parse(&text, &s).unwrap();
        let (_, map) = binarize(&raw, 5).unwrap();
        assert_eq!(map.attributes[0].width(), 3);
        assert_eq!(map.attributes[1].width(), 2);
    }

    #[test]
    fn split_is_deterministic_disjoint_and_sized() {
        let (a, b) = split_indices(10, 0.8, 0).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert!(a.iter().all(|i| !b.contains(i)));
        assert_eq!(split_indices(10, 0.8, 0).unwrap(), (a, b));
        let (s0, _) = split_indices(1000, 0.8, 0).unwrap();
        let (s1, _) = split_indices(1000, 0.8, 1).unwrap();
        assert_ne!(s0, s1);
    }

    #[test]
    fn split_rejects_empty_parts() {
        assert!(split_indices(3, 0.1, 0).is_err());
        assert!(split_indices(1, 0.5, 0).is_err());
        assert!(split_indices(10, 1.0, 0).is_err());
    }

    #[test]
    fn restrict_follows_the_column() {
        let ds = BinaryDataset::from_rows(
            &[vec![false], vec![false], vec![true], vec![true]],
            vec![0, 1, 0, 1],
        )
        .unwrap();
        let v = ds.view();
        let one = v.restrict(0, true).unwrap();
        assert_eq!(one.rows().ones().collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(one.itemset(), &[(0, true)]);
        assert!(matches!(one.restrict(0, false), Err(Error::Contract(_))));
        let zero = v.restrict(0, false).unwrap();
        assert_eq!(zero.len() + one.len(), v.len());
    }

    #[test]
    fn restricting_all_zero_column_on_one_is_empty() {
        let ds = BinaryDataset::from_rows(&[vec![false], vec![false]], vec![0, 1]).unwrap();
        let v = ds.view().restrict(0, true).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn majority_breaks_ties_low() {
        assert_eq!(majority_class(&[1, 1]), 0);
        assert_eq!(majority_class(&[1, 2]), 1);
        assert_eq!(majority_class(&[0, 0, 3]), 2);
    }

    #[test]
    fn binarized_csv_round_trips() {
        let ds = BinaryDataset::from_rows(
            &[vec![true, false], vec![false, true], vec![true, true]],
            vec![2, 0, 1],
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,label\n"));
        let back = BinaryDataset::read_csv(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, ds);
    }
}
