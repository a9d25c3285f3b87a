//! Dataset ingestion and preparation: svmlight-style parsing, batch-count
//! validation against the published registry, z-score normalization, and a
//! seeded two-domain synthetic generator for tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::densela::Matrix;
use crate::error::{Error, Result};
use crate::scatter::LabeledDataset;

/// Feature dimension of the 16-sensor, 8-features-per-sensor batch files.
pub const UCSD_DIM: usize = 128;

/// Gas names in registry column order; file label `g` refers to
/// `UCSD_GAS_NAMES[g - 1]`.
pub const UCSD_GAS_NAMES: [&str; 6] = [
    "Ethanol",
    "Ethylene",
    "Ammonia",
    "Acetaldehyde",
    "Acetone",
    "Toluene",
];

/// Environment variable pointing at the directory with `batch1.dat` ..
/// `batch10.dat`.
pub const DATA_DIR_ENV: &str = "DRIFTLENS_DATA";

/// Standard deviations below this floor are treated as zero variance.
pub const STD_FLOOR: f64 = 1e-12;

/// Expected per-batch totals and per-gas sample counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchRegistry {
    pub batches: Vec<BatchExpectation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchExpectation {
    pub total: usize,
    pub per_gas: [usize; 6],
}

impl BatchRegistry {
    /// The published counts for the ten drift batches.
    pub fn ucsd() -> BatchRegistry {
        let rows: [[usize; 6]; 10] = [
            [90, 98, 83, 30, 70, 74],
            [164, 334, 100, 109, 532, 5],
            [365, 490, 216, 240, 275, 0],
            [64, 43, 12, 30, 12, 0],
            [28, 40, 20, 46, 63, 0],
            [514, 574, 110, 29, 606, 467],
            [649, 662, 360, 744, 630, 568],
            [30, 30, 40, 33, 143, 18],
            [61, 55, 100, 75, 78, 101],
            [600, 600, 600, 600, 600, 600],
        ];
        BatchRegistry {
            batches: rows
                .iter()
                .map(|per_gas| BatchExpectation {
                    total: per_gas.iter().sum(),
                    per_gas: *per_gas,
                })
                .collect(),
        }
    }

    pub fn grand_total(&self) -> usize {
        self.batches.iter().map(|b| b.total).sum()
    }
}

/// Order-stable bijection from original label values onto dense 1..=c.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LabelMap {
    dense_to_original: Vec<i64>,
}

impl LabelMap {
    pub fn new() -> LabelMap {
        LabelMap::default()
    }

    /// Dense 1-based id for `original`, registering it on first appearance.
    pub fn map(&mut self, original: i64) -> usize {
        match self.dense_to_original.iter().position(|&v| v == original) {
            Some(i) => i + 1,
            None => {
                self.dense_to_original.push(original);
                self.dense_to_original.len()
            }
        }
    }

    pub fn original(&self, dense: usize) -> Option<i64> {
        self.dense_to_original.get(dense.checked_sub(1)?).copied()
    }

    /// Dense id for `original` without registering, if known.
    pub fn dense(&self, original: i64) -> Option<usize> {
        self.dense_to_original
            .iter()
            .position(|&v| v == original)
            .map(|i| i + 1)
    }

    pub fn len(&self) -> usize {
        self.dense_to_original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dense_to_original.is_empty()
    }
}

/// Parses an svmlight-style file (`label idx:val ...`, 1-based indices) into
/// a dense dataset with a fresh label map.
///
/// `dim`: expected feature dimension; `None` infers it from the largest
/// index seen. Concentration annotations appended to the label with `;` are
/// parsed and discarded.
pub fn parse_svmlight(path: &Path, dim: Option<usize>) -> Result<(LabeledDataset, LabelMap)> {
    let mut map = LabelMap::new();
    let data = parse_svmlight_with_map(path, dim, &mut map)?;
    Ok((data, map))
}

/// Like [`parse_svmlight`] but remaps labels through a shared map, keeping
/// class ids consistent across several files.
pub fn parse_svmlight_with_map(
    path: &Path,
    dim: Option<usize>,
    map: &mut LabelMap,
) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    let mut samples: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = || Error::MalformedLine {
            line: lineno,
            text: line.to_string(),
        };
        let mut fields = line.split_whitespace();
        let label_field = fields.next().ok_or_else(malformed)?;
        // the extended distribution appends the concentration: "label;conc"
        let label_text = label_field.split(';').next().ok_or_else(malformed)?;
        let original: i64 = label_text.parse().map_err(|_| malformed())?;
        let dense = map.map(original);

        let mut entries = Vec::new();
        for field in fields {
            let (idx_text, val_text) = field.split_once(':').ok_or_else(malformed)?;
            let index: usize = idx_text.parse().map_err(|_| malformed())?;
            if index == 0 {
                return Err(malformed());
            }
            if let Some(d) = dim {
                if index > d {
                    return Err(Error::IndexOutOfRange {
                        line: lineno,
                        index,
                        max: d,
                    });
                }
            }
            let value: f64 = val_text.parse().map_err(|_| malformed())?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    location: format!("line {}", lineno),
                });
            }
            max_index = max_index.max(index);
            entries.push((index, value));
        }
        samples.push((dense, entries));
    }

    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = dim.unwrap_or(max_index.max(1));
    let n = samples.len();
    let mut features = Matrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    for (j, (label, entries)) in samples.iter().enumerate() {
        labels.push(*label);
        for &(index, value) in entries {
            features[(index - 1, j)] = value;
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    LabeledDataset::new(name, features, Some(labels))
}

/// Serializes a labeled dataset back to the svmlight text form (all features
/// written, including zeros, so a round-trip is exact).
pub fn write_svmlight(data: &LabeledDataset, map: &LabelMap, path: &Path) -> Result<()> {
    let labels = data.require_labels()?;
    let mut out = String::new();
    for (j, &label) in labels.iter().enumerate() {
        let original = map.original(label).unwrap_or(label as i64);
        out.push_str(&original.to_string());
        for i in 0..data.dim() {
            out.push_str(&format!(" {}:{}", i + 1, data.features()[(i, j)]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Loads `batch1.dat` .. `batch10.dat` with one shared label map so class
/// ids agree across batches.
pub fn load_ucsd_batches(dir: &Path) -> Result<(Vec<LabeledDataset>, LabelMap)> {
    let mut map = LabelMap::new();
    let mut batches = Vec::with_capacity(10);
    for b in 1..=10 {
        let path = dir.join(format!("batch{}.dat", b));
        let data = parse_svmlight_with_map(&path, Some(UCSD_DIM), &mut map)?;
        let n = data.num_samples();
        batches.push(data.with_batch_ids(vec![b; n])?);
    }
    Ok((batches, map))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountKind {
    Total,
    Gas,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub batch: usize,
    pub kind: CountKind,
    /// Gas name for per-gas entries, "total" otherwise.
    pub subject: String,
    pub expected: usize,
    pub found: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    pub grand_total_expected: usize,
    pub grand_total_found: usize,
    /// True iff every per-batch total matches exactly.
    pub pass: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            if e.kind == CountKind::Total || !e.ok {
                writeln!(
                    f,
                    "batch {:2} {:<12} expected {:5} found {:5} {}",
                    e.batch,
                    e.subject,
                    e.expected,
                    e.found,
                    if e.ok { "ok" } else { "MISMATCH" }
                )?;
            }
        }
        writeln!(
            f,
            "grand total expected {} found {} -> {}",
            self.grand_total_expected,
            self.grand_total_found,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Checks parsed batches against the registry. Count mismatches become
/// report entries, never errors; `pass` reflects the per-batch totals.
pub fn validate_batches(
    datasets: &[LabeledDataset],
    map: &LabelMap,
    registry: &BatchRegistry,
) -> ValidationReport {
    let mut entries = Vec::new();
    let mut found_grand = 0usize;
    let mut pass = datasets.len() == registry.batches.len();
    for (b, expect) in registry.batches.iter().enumerate() {
        let data = datasets.get(b);
        let found_total = data.map_or(0, |d| d.num_samples());
        found_grand += found_total;
        let total_ok = found_total == expect.total;
        pass &= total_ok;
        entries.push(ValidationEntry {
            batch: b + 1,
            kind: CountKind::Total,
            subject: "total".into(),
            expected: expect.total,
            found: found_total,
            ok: total_ok,
        });
        for (g, &expected) in expect.per_gas.iter().enumerate() {
            let original = (g + 1) as i64;
            let found = match (data, map.dense(original)) {
                (Some(d), Some(dense)) => d
                    .labels()
                    .map_or(0, |ls| ls.iter().filter(|&&l| l == dense).count()),
                _ => 0,
            };
            entries.push(ValidationEntry {
                batch: b + 1,
                kind: CountKind::Gas,
                subject: UCSD_GAS_NAMES[g].into(),
                expected,
                found,
                ok: found == expected,
            });
        }
    }
    ValidationReport {
        entries,
        grand_total_expected: registry.grand_total(),
        grand_total_found: found_grand,
        pass,
    }
}

/// Per-feature mean and (population) standard deviation of a source matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Floored at [`STD_FLOOR`]; features at the floor are mapped to zero.
    pub std: Vec<f64>,
}

pub fn zscore_fit(source: &Matrix) -> Result<NormStats> {
    if source.cols() == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = source.cols() as f64;
    let mut mean = Vec::with_capacity(source.rows());
    let mut std = Vec::with_capacity(source.rows());
    for i in 0..source.rows() {
        let row = source.row(i);
        let m = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        mean.push(m);
        std.push(var.sqrt().max(STD_FLOOR));
    }
    Ok(NormStats { mean, std })
}

pub fn zscore_apply(stats: &NormStats, x: &Matrix) -> Result<Matrix> {
    if stats.mean.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: (stats.mean.len(), x.cols()),
            got: x.shape(),
        });
    }
    let mut out = x.clone();
    for i in 0..x.rows() {
        if stats.std[i] <= STD_FLOOR {
            for j in 0..x.cols() {
                out[(i, j)] = 0.0;
            }
        } else {
            for j in 0..x.cols() {
                out[(i, j)] = (x[(i, j)] - stats.mean[i]) / stats.std[i];
            }
        }
    }
    Ok(out)
}

/// Zero-pads the feature dimension up to `dim`; in the sparse input format
/// an unmentioned feature index is an implicit zero, so two files of the
/// same feature space may infer different dimensions.
pub fn pad_feature_dim(data: &LabeledDataset, dim: usize) -> Result<LabeledDataset> {
    if dim < data.dim() {
        return Err(Error::DimensionMismatch {
            expected: (data.dim(), data.num_samples()),
            got: (dim, data.num_samples()),
        });
    }
    if dim == data.dim() {
        return Ok(data.clone());
    }
    let mut features = Matrix::zeros(dim, data.num_samples());
    for j in 0..data.num_samples() {
        for i in 0..data.dim() {
            features[(i, j)] = data.features()[(i, j)];
        }
    }
    data.with_features(features)
}

/// Drift vector of Euclidean length `magnitude`, spread evenly over all
/// coordinates.
pub fn uniform_drift(dim: usize, magnitude: f64) -> Vec<f64> {
    vec![magnitude / (dim as f64).sqrt(); dim]
}

/// Seeded two-domain fixture: per-class Gaussian blobs (unit spread, class
/// centers 4 units apart on the coordinate axes) and a target domain drawn
/// from the same blobs shifted by `drift`.
pub fn synth_two_domain(
    seed: u64,
    n_per_class: usize,
    classes: usize,
    dim: usize,
    drift: &[f64],
) -> Result<(LabeledDataset, LabeledDataset)> {
    if drift.len() != dim {
        return Err(Error::LengthMismatch {
            left: drift.len(),
            right: dim,
        });
    }
    if n_per_class == 0 || classes == 0 || dim == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|l| {
            let mut c = vec![0.0; dim];
            c[l % dim] = 4.0 * (1.0 + (l / dim) as f64);
            c
        })
        .collect();

    let mut draw = |shift: &[f64]| -> (Matrix, Vec<usize>) {
        let n = n_per_class * classes;
        let mut features = Matrix::zeros(dim, n);
        let mut labels = Vec::with_capacity(n);
        let mut j = 0;
        for (l, center) in centers.iter().enumerate() {
            for _ in 0..n_per_class {
                for i in 0..dim {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    features[(i, j)] = center[i] + noise + shift[i];
                }
                labels.push(l + 1);
                j += 1;
            }
        }
        (features, labels)
    };

    let zero = vec![0.0; dim];
    let (xs, ls) = draw(&zero);
    let (xt, lt) = draw(drift);
    Ok((
        LabeledDataset::new("synth-source", xs, Some(ls))?,
        LabeledDataset::new("synth-target", xt, Some(lt))?,
    ))
}
