//! Projection-model fitting: PCA and LDA baselines, drift-regularized
//! component analysis (DRCA), and its label-aware extension (D-DRCA).
//!
//! All four fits reduce to a (generalized) symmetric eigenproblem. DRCA and
//! D-DRCA maximize projected variance against the rank-1 mean-discrepancy
//! matrix of the two domains; the discriminative variant adds within- and
//! between-class scatter terms from the labeled source. Because the
//! mean-discrepancy matrix is rank 1, the denominator is ridge-regularized
//! (`B = mdd + eps I` with a relative `eps`) so the problem stays
//! symmetric-definite and is solvable by Cholesky congruence.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::densela::{gen_eig_sym_def, jacobi_eig_sym, EigPairs, Matrix, DEFAULT_EIG_TOL};
use crate::error::{Error, Result};
use crate::scatter::{
    classical_between_scatter, classical_within_scatter, mdd_matrix, mean_vector, LabeledDataset,
    ScatterSet,
};

/// Default relative ridge applied to the mean-discrepancy denominator.
pub const DEFAULT_RIDGE_TAU: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Lda,
    Drca,
    Ddrca,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pca, Method::Lda, Method::Drca, Method::Ddrca];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Lda => "lda",
            Method::Drca => "drca",
            Method::Ddrca => "ddrca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Method, String> {
        match s {
            "pca" => Ok(Method::Pca),
            "lda" => Ok(Method::Lda),
            "drca" => Ok(Method::Drca),
            "ddrca" => Ok(Method::Ddrca),
            other => Err(format!(
                "unknown method {:?} (expected pca|lda|drca|ddrca)",
                other
            )),
        }
    }
}

/// Subspace dimension and the trade-off weights of the drift-corrected
/// objective: `lambda` scales target variance, `kappa` the within-class
/// penalty, `mu` the between-class reward; `ridge_tau` is the relative ridge
/// on the mean-discrepancy denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub d: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub mu: f64,
    pub ridge_tau: f64,
}

impl HyperParams {
    pub fn new(d: usize) -> HyperParams {
        HyperParams {
            d,
            lambda: 1.0,
            kappa: 1.0,
            mu: 1.0,
            ridge_tau: DEFAULT_RIDGE_TAU,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.d < 1 || self.d > dim {
            return Err(Error::RankDeficient {
                requested: self.d,
                available: dim,
            });
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidHyperParam {
                name: "lambda",
                value: self.lambda,
            });
        }
        if self.kappa < 0.0 || !self.kappa.is_finite() {
            return Err(Error::InvalidHyperParam {
                name: "kappa",
                value: self.kappa,
            });
        }
        if self.mu < 0.0 || !self.mu.is_finite() {
            return Err(Error::InvalidHyperParam {
                name: "mu",
                value: self.mu,
            });
        }
        if self.ridge_tau <= 0.0 || !self.ridge_tau.is_finite() {
            return Err(Error::InvalidHyperParam {
                name: "ridge_tau",
                value: self.ridge_tau,
            });
        }
        Ok(())
    }
}

/// A fitted projection: `projection` holds the top-d (generalized)
/// eigenvectors as columns, `eigenvalues` the matching spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubspaceModel {
    pub method: Method,
    pub params: HyperParams,
    pub projection: Matrix,
    pub eigenvalues: Vec<f64>,
    pub source_mean: Vec<f64>,
    pub target_mean: Vec<f64>,
}

impl SubspaceModel {
    pub fn dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.projection.cols()
    }

    /// Projects `x` (D x N) into the subspace as `P^T x` (d x N).
    /// PCA models center with the stored source mean first.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.projection.rows() {
            return Err(Error::DimensionMismatch {
                expected: (self.projection.rows(), x.cols()),
                got: x.shape(),
            });
        }
        let pt = self.projection.transpose();
        match self.method {
            Method::Pca => pt.matmul(&x.sub_col_vector(&self.source_mean)?),
            _ => pt.matmul(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format_version: MODEL_FORMAT_VERSION,
            method: self.method,
            params: self.params,
            dim: self.dim(),
            subspace_dim: self.subspace_dim(),
            projection: self.projection.clone(),
            eigenvalues: self.eigenvalues.clone(),
            source_mean: self.source_mean.clone(),
            target_mean: self.target_mean.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<SubspaceModel> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::DataInvalid {
                report: format!(
                    "unsupported model format version {} (expected {})",
                    doc.format_version, MODEL_FORMAT_VERSION
                ),
            });
        }
        if doc.projection.shape() != (doc.dim, doc.subspace_dim)
            || doc.eigenvalues.len() != doc.subspace_dim
        {
            return Err(Error::DataInvalid {
                report: "model document has inconsistent shapes".into(),
            });
        }
        Ok(SubspaceModel {
            method: doc.method,
            params: doc.params,
            projection: doc.projection,
            eigenvalues: doc.eigenvalues,
            source_mean: doc.source_mean,
            target_mean: doc.target_mean,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SubspaceModel> {
        SubspaceModel::from_json(&std::fs::read_to_string(path)?)
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    method: Method,
    params: HyperParams,
    dim: usize,
    subspace_dim: usize,
    projection: Matrix,
    eigenvalues: Vec<f64>,
    source_mean: Vec<f64>,
    target_mean: Vec<f64>,
}

/// PCA on the centered covariance `(1/N)(X - xbar)(X - xbar)^T`.
pub fn fit_pca(x: &Matrix, d: usize) -> Result<SubspaceModel> {
    let (pairs, mean) = pca_full_pairs(x)?;
    if d < 1 || d > x.rows() {
        return Err(Error::RankDeficient {
            requested: d,
            available: x.rows(),
        });
    }
    Ok(model_from_pairs(
        Method::Pca,
        HyperParams {
            d,
            lambda: 0.0,
            kappa: 0.0,
            mu: 0.0,
            ridge_tau: DEFAULT_RIDGE_TAU,
        },
        &pairs,
        d,
        mean.clone(),
        mean,
    ))
}

/// Classical LDA: `gen_eig(S_b, S_w + gamma I)` with per-sample scatter
/// weights and ridge `gamma = 1e-6 tr(S_w)/D`. Subspace dimension is capped
/// at c - 1.
pub fn fit_lda(data: &LabeledDataset, d: usize) -> Result<SubspaceModel> {
    let c = data.require_labels().map(|ls| {
        ls.iter().copied().max().unwrap_or(0)
    })?;
    if d < 1 {
        return Err(Error::RankDeficient {
            requested: d,
            available: c.saturating_sub(1),
        });
    }
    if c < 2 || d > c - 1 {
        return Err(Error::DimensionTooLarge {
            requested: d,
            max: c.saturating_sub(1),
        });
    }
    let (pairs, mean) = lda_full_pairs(data)?;
    Ok(model_from_pairs(
        Method::Lda,
        HyperParams {
            d,
            lambda: 0.0,
            kappa: 0.0,
            mu: 0.0,
            ridge_tau: DEFAULT_RIDGE_TAU,
        },
        &pairs,
        d,
        mean.clone(),
        mean,
    ))
}

/// DRCA: maximize `P^T (X_s X_s^T + lambda X_t X_t^T) P` against the
/// ridge-regularized mean-discrepancy denominator.
pub fn fit_drca(
    x_s: &Matrix,
    x_t: &Matrix,
    d: usize,
    lambda: f64,
    ridge_tau: f64,
) -> Result<SubspaceModel> {
    let params = HyperParams {
        d,
        lambda,
        kappa: 0.0,
        mu: 0.0,
        ridge_tau,
    };
    params.validate(x_s.rows())?;
    let (pairs, mean_src, mean_tgt) = drca_full_pairs(x_s, x_t, lambda, ridge_tau)?;
    Ok(model_from_pairs(
        Method::Drca,
        params,
        &pairs,
        d,
        mean_src,
        mean_tgt,
    ))
}

/// D-DRCA: the discriminative extension of DRCA. The numerator combines the
/// normalized domain moments with the within-class penalty and between-class
/// reward of the labeled source; the denominator is the same regularized
/// mean-discrepancy matrix.
pub fn fit_ddrca(
    source: &LabeledDataset,
    x_t: &Matrix,
    params: &HyperParams,
) -> Result<SubspaceModel> {
    params.validate(source.dim())?;
    let sc = ScatterSet::compute(source, x_t)?;
    let pairs = ddrca_full_pairs(&sc, params.lambda, params.kappa, params.mu, params.ridge_tau)?;
    Ok(model_from_pairs(
        Method::Ddrca,
        *params,
        &pairs,
        params.d,
        sc.mean_src,
        sc.mean_tgt,
    ))
}

/// Shorthand for `model.transform(x)`.
pub fn transform(model: &SubspaceModel, x: &Matrix) -> Result<Matrix> {
    model.transform(x)
}

// ---------------------------------------------------------------------------
// Full-spectrum fits. The grid search reuses one eigendecomposition across
// every subspace dimension in the sweep, so the fits below solve at full D
// and `model_from_pairs` truncates.
// ---------------------------------------------------------------------------

pub(crate) fn pca_full_pairs(x: &Matrix) -> Result<(EigPairs, Vec<f64>)> {
    let mean = mean_vector(x)?;
    let centered = x.sub_col_vector(&mean)?;
    let cov = centered.gram_scaled(1.0 / x.cols() as f64);
    let pairs = jacobi_eig_sym(&cov, DEFAULT_EIG_TOL)?;
    Ok((pairs, mean))
}

pub(crate) fn lda_full_pairs(data: &LabeledDataset) -> Result<(EigPairs, Vec<f64>)> {
    let s_w = classical_within_scatter(data)?;
    let s_b = classical_between_scatter(data)?;
    let gamma = 1e-6 * s_w.trace() / data.dim() as f64;
    let pairs = gen_eig_sym_def(&s_b, &s_w.add_diag(gamma))?;
    let mean = mean_vector(data.features())?;
    Ok((pairs, mean))
}

pub(crate) fn drca_full_pairs(
    x_s: &Matrix,
    x_t: &Matrix,
    lambda: f64,
    ridge_tau: f64,
) -> Result<(EigPairs, Vec<f64>, Vec<f64>)> {
    if x_s.rows() != x_t.rows() {
        return Err(Error::DimensionMismatch {
            expected: (x_s.rows(), x_t.cols()),
            got: x_t.shape(),
        });
    }
    if x_s.cols() == 0 || x_t.cols() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mean_src = mean_vector(x_s)?;
    let mean_tgt = mean_vector(x_t)?;
    let numerator = x_s
        .gram_scaled(1.0)
        .add(&x_t.gram_scaled(lambda))?
        .symmetrized();
    let mdd = mdd_matrix(&mean_src, &mean_tgt)?;
    let b = ridged_denominator(&mdd, ridge_tau);
    let pairs = gen_eig_sym_def(&numerator, &b)?;
    Ok((pairs, mean_src, mean_tgt))
}

pub(crate) fn ddrca_full_pairs(
    sc: &ScatterSet,
    lambda: f64,
    kappa: f64,
    mu: f64,
    ridge_tau: f64,
) -> Result<EigPairs> {
    let numerator = sc
        .source_moment
        .add(&sc.target_moment.scale(lambda))?
        .sub(&sc.d_wc.scale(kappa))?
        .add(&sc.d_bc.scale(mu))?
        .symmetrized();
    let b = ridged_denominator(&sc.mdd, ridge_tau);
    gen_eig_sym_def(&numerator, &b)
}

/// `mdd + eps I` with `eps = ridge_tau * tr(mdd)/D + 1e-12`. The absolute
/// floor keeps the matrix definite even when source and target means
/// coincide exactly.
pub(crate) fn ridged_denominator(mdd: &Matrix, ridge_tau: f64) -> Matrix {
    let eps = ridge_tau * mdd.trace() / mdd.rows() as f64 + 1e-12;
    mdd.add_diag(eps)
}

pub(crate) fn model_from_pairs(
    method: Method,
    params: HyperParams,
    pairs: &EigPairs,
    d: usize,
    source_mean: Vec<f64>,
    target_mean: Vec<f64>,
) -> SubspaceModel {
    let top = pairs.truncated(d);
    SubspaceModel {
        method,
        params,
        projection: top.vectors,
        eigenvalues: top.values,
        source_mean,
        target_mean,
    }
}
