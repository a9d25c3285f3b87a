//! Statistical building blocks for drift-corrected subspace learning: domain
//! means, the rank-1 mean-discrepancy matrix, uncentered second moments, and
//! the normalized within/between-class scatter matrices.

use serde::{Deserialize, Serialize};

use crate::densela::Matrix;
use crate::error::{Error, Result};

/// A feature matrix (D rows, one sample per column) with optional dense
/// 1..=c labels and optional per-sample batch ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub name: String,
    features: Matrix,
    labels: Option<Vec<usize>>,
    batch_ids: Option<Vec<usize>>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Option<Vec<usize>>,
    ) -> Result<LabeledDataset> {
        if !features.all_finite() {
            return Err(Error::NonFiniteValue {
                location: "feature matrix".into(),
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != features.cols() {
                return Err(Error::LengthMismatch {
                    left: labels.len(),
                    right: features.cols(),
                });
            }
            for (i, &l) in labels.iter().enumerate() {
                if l == 0 {
                    return Err(Error::InvalidLabel {
                        position: i,
                        value: 0,
                    });
                }
            }
        }
        Ok(LabeledDataset {
            name: name.into(),
            features,
            labels,
            batch_ids: None,
        })
    }

    pub fn unlabeled(name: impl Into<String>, features: Matrix) -> Result<LabeledDataset> {
        LabeledDataset::new(name, features, None)
    }

    pub fn with_batch_ids(mut self, batch_ids: Vec<usize>) -> Result<LabeledDataset> {
        if batch_ids.len() != self.features.cols() {
            return Err(Error::LengthMismatch {
                left: batch_ids.len(),
                right: self.features.cols(),
            });
        }
        self.batch_ids = Some(batch_ids);
        Ok(self)
    }

    /// Replaces the feature matrix, keeping labels and batch metadata.
    /// The new matrix must have the same number of samples.
    pub fn with_features(&self, features: Matrix) -> Result<LabeledDataset> {
        if features.cols() != self.features.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.features.shape(),
                got: features.shape(),
            });
        }
        Ok(LabeledDataset {
            name: self.name.clone(),
            features,
            labels: self.labels.clone(),
            batch_ids: self.batch_ids.clone(),
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels.as_deref().ok_or(Error::MissingLabels)
    }

    pub fn batch_ids(&self) -> Option<&[usize]> {
        self.batch_ids.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.features.rows()
    }

    pub fn num_samples(&self) -> usize {
        self.features.cols()
    }

    /// Highest label value, i.e. the class count c for dense labels.
    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().copied().max().unwrap_or(0))
    }

    /// Concatenates datasets column-wise, tagging every sample with the
    /// 1-based index of its source dataset as batch id.
    pub fn concat(parts: &[LabeledDataset], name: impl Into<String>) -> Result<LabeledDataset> {
        let first = parts.first().ok_or(Error::EmptyDataset)?;
        let dim = first.dim();
        let total: usize = parts.iter().map(|p| p.num_samples()).sum();
        let mut features = Matrix::zeros(dim, total);
        let mut labels = Vec::with_capacity(total);
        let mut batch_ids = Vec::with_capacity(total);
        let all_labeled = parts.iter().all(|p| p.labels.is_some());
        let mut offset = 0;
        for (b, part) in parts.iter().enumerate() {
            if part.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: (dim, part.num_samples()),
                    got: part.features.shape(),
                });
            }
            for j in 0..part.num_samples() {
                for i in 0..dim {
                    features[(i, offset + j)] = part.features[(i, j)];
                }
                batch_ids.push(b + 1);
            }
            if all_labeled {
                labels.extend_from_slice(part.labels.as_ref().unwrap());
            }
            offset += part.num_samples();
        }
        LabeledDataset::new(name, features, all_labeled.then_some(labels))?
            .with_batch_ids(batch_ids)
    }
}

/// Per-class means and counts for a labeled dataset with dense 1..=c labels.
pub struct ClassStats {
    pub class_means: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl ClassStats {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }
}

pub fn class_stats(data: &LabeledDataset) -> Result<ClassStats> {
    let labels = data.require_labels()?;
    let c = data.num_classes();
    let d = data.dim();
    let mut sums = vec![vec![0.0; d]; c];
    let mut counts = vec![0usize; c];
    for (j, &l) in labels.iter().enumerate() {
        counts[l - 1] += 1;
        for (i, s) in sums[l - 1].iter_mut().enumerate() {
            *s += data.features()[(i, j)];
        }
    }
    for (l, count) in counts.iter().enumerate() {
        if *count == 0 {
            return Err(Error::EmptyClass { class: l + 1 });
        }
        for v in sums[l].iter_mut() {
            *v /= *count as f64;
        }
    }
    Ok(ClassStats {
        class_means: sums,
        counts,
    })
}

/// Per-feature mean over the columns of `X`.
pub fn mean_vector(x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = x.cols() as f64;
    Ok((0..x.rows())
        .map(|i| x.row(i).iter().sum::<f64>() / n)
        .collect())
}

/// Rank-1 mean-discrepancy matrix `u u^T` with `u = mean_src - mean_tgt`.
pub fn mdd_matrix(mean_src: &[f64], mean_tgt: &[f64]) -> Result<Matrix> {
    if mean_src.len() != mean_tgt.len() {
        return Err(Error::DimensionMismatch {
            expected: (mean_src.len(), 1),
            got: (mean_tgt.len(), 1),
        });
    }
    let u: Vec<f64> = mean_src
        .iter()
        .zip(mean_tgt)
        .map(|(s, t)| s - t)
        .collect();
    Ok(outer(&u, 1.0))
}

/// `scale * X X^T`, the (uncentered) second moment of the columns of `X`.
pub fn scaled_second_moment(x: &Matrix, scale: f64) -> Result<Matrix> {
    if x.cols() == 0 {
        return Err(Error::EmptyDataset);
    }
    if scale <= 0.0 {
        return Err(Error::NonPositiveScale);
    }
    Ok(x.gram_scaled(scale))
}

/// Within-class scatter with per-term weight `1 / (c * n_l)`.
pub fn within_class_scatter(data: &LabeledDataset) -> Result<Matrix> {
    let stats = class_stats(data)?;
    let labels = data.require_labels()?;
    let c = stats.num_classes() as f64;
    let d = data.dim();
    let mut out = Matrix::zeros(d, d);
    let mut dev = vec![0.0; d];
    for (j, &l) in labels.iter().enumerate() {
        let mean_l = &stats.class_means[l - 1];
        for i in 0..d {
            dev[i] = data.features()[(i, j)] - mean_l[i];
        }
        let w = 1.0 / (c * stats.counts[l - 1] as f64);
        accumulate_outer(&mut out, &dev, w);
    }
    mirror_upper(&mut out);
    Ok(out)
}

/// Between-class scatter with per-class weight `n_l / c`.
pub fn between_class_scatter(data: &LabeledDataset) -> Result<Matrix> {
    let stats = class_stats(data)?;
    let global = mean_vector(data.features())?;
    let c = stats.num_classes() as f64;
    let d = data.dim();
    let mut out = Matrix::zeros(d, d);
    let mut dev = vec![0.0; d];
    for (l, mean_l) in stats.class_means.iter().enumerate() {
        for i in 0..d {
            dev[i] = mean_l[i] - global[i];
        }
        let w = stats.counts[l] as f64 / c;
        accumulate_outer(&mut out, &dev, w);
    }
    mirror_upper(&mut out);
    Ok(out)
}

/// Classical (per-sample, unnormalized) within-class scatter
/// `sum_l sum_j (x - xbar_l)(x - xbar_l)^T`, used by LDA.
pub fn classical_within_scatter(data: &LabeledDataset) -> Result<Matrix> {
    let stats = class_stats(data)?;
    let labels = data.require_labels()?;
    let d = data.dim();
    let mut out = Matrix::zeros(d, d);
    let mut dev = vec![0.0; d];
    for (j, &l) in labels.iter().enumerate() {
        let mean_l = &stats.class_means[l - 1];
        for i in 0..d {
            dev[i] = data.features()[(i, j)] - mean_l[i];
        }
        accumulate_outer(&mut out, &dev, 1.0);
    }
    mirror_upper(&mut out);
    Ok(out)
}

/// Classical between-class scatter `sum_l n_l (xbar_l - xbar)(xbar_l - xbar)^T`.
pub fn classical_between_scatter(data: &LabeledDataset) -> Result<Matrix> {
    let stats = class_stats(data)?;
    let global = mean_vector(data.features())?;
    let d = data.dim();
    let mut out = Matrix::zeros(d, d);
    let mut dev = vec![0.0; d];
    for (l, mean_l) in stats.class_means.iter().enumerate() {
        for i in 0..d {
            dev[i] = mean_l[i] - global[i];
        }
        accumulate_outer(&mut out, &dev, stats.counts[l] as f64);
    }
    mirror_upper(&mut out);
    Ok(out)
}

/// All D x D statistics a drift-corrected fit needs, computed in one pass
/// over a labeled source and an unlabeled target feature matrix.
#[derive(Debug, Clone)]
pub struct ScatterSet {
    /// `(1/N_s) X_s X_s^T`
    pub source_moment: Matrix,
    /// `(1/N_t) X_t X_t^T`
    pub target_moment: Matrix,
    /// `(xbar_s - xbar_t)(xbar_s - xbar_t)^T`
    pub mdd: Matrix,
    pub d_wc: Matrix,
    pub d_bc: Matrix,
    pub mean_src: Vec<f64>,
    pub mean_tgt: Vec<f64>,
    pub class_means: Vec<Vec<f64>>,
}

impl ScatterSet {
    pub fn compute(source: &LabeledDataset, target_features: &Matrix) -> Result<ScatterSet> {
        if target_features.rows() != source.dim() {
            return Err(Error::DimensionMismatch {
                expected: (source.dim(), target_features.cols()),
                got: target_features.shape(),
            });
        }
        let stats = class_stats(source)?;
        let mean_src = mean_vector(source.features())?;
        let mean_tgt = mean_vector(target_features)?;
        let n_s = source.num_samples() as f64;
        let n_t = target_features.cols() as f64;
        Ok(ScatterSet {
            source_moment: scaled_second_moment(source.features(), 1.0 / n_s)?,
            target_moment: scaled_second_moment(target_features, 1.0 / n_t)?,
            mdd: mdd_matrix(&mean_src, &mean_tgt)?,
            d_wc: within_class_scatter(source)?,
            d_bc: between_class_scatter(source)?,
            mean_src,
            mean_tgt,
            class_means: stats.class_means,
        })
    }
}

fn outer(v: &[f64], w: f64) -> Matrix {
    let mut out = Matrix::zeros(v.len(), v.len());
    accumulate_outer(&mut out, v, w);
    mirror_upper(&mut out);
    out
}

/// Adds `w * v v^T` to the upper triangle of `out`.
fn accumulate_outer(out: &mut Matrix, v: &[f64], w: f64) {
    for i in 0..v.len() {
        let vi = w * v[i];
        for j in i..v.len() {
            out[(i, j)] += vi * v[j];
        }
    }
}

fn mirror_upper(m: &mut Matrix) {
    for i in 0..m.rows() {
        for j in (i + 1)..m.cols() {
            m[(j, i)] = m[(i, j)];
        }
    }
}
