//! Principal component analysis by eigendecomposition of the sample
//! covariance, used both for feature-space reduction before
//! classification and for two-component corpus scatter plots.
//!
//! Mean-centering only, no variance scaling. When the feature dimension
//! exceeds the sample count the decomposition runs on the n-by-n Gram
//! matrix instead of the d-by-d covariance, which is what makes
//! package-mode inputs (116,281 features) tractable.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("need at least 2 rows to fit, got {0}")]
    TooFewRows(usize),
    #[error("component count {k} out of range (min(n, d) = {max})")]
    KOutOfRange { k: usize, max: usize },
    #[error("rows have inconsistent dimensions")]
    RaggedRows,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// A fitted projection: orthonormal components over mean-centered inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k row vectors of length d, pairwise orthogonal, unit norm, signed so
    /// the largest-magnitude coefficient is positive.
    pub components: Vec<Vec<f64>>,
    /// Sample variance captured by each component, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Fractions of total variance, each in [0, 1], summing to at most 1.
    pub explained_variance_ratio: Vec<f64>,
    /// Set when the data had (numerically) zero variance along some kept
    /// component, whose direction is then an arbitrary orthonormal fill.
    pub degenerate: bool,
}

const EIGENVALUE_TOL: f64 = 1e-12;

pub fn fit_pca(rows: &[Vec<f64>], k: usize) -> Result<PcaModel, PcaError> {
    let n = rows.len();
    if n < 2 {
        return Err(PcaError::TooFewRows(n));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PcaError::RaggedRows);
    }
    let max_k = n.min(d);
    if k == 0 || k > max_k {
        return Err(PcaError::KOutOfRange { k, max: max_k });
    }

    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let denom = (n - 1) as f64;
    let total_variance: f64 = centered.iter().map(|v| v * v).sum::<f64>() / denom;

    // (eigenvalue, component) pairs sorted by descending eigenvalue
    let mut pairs: Vec<(f64, Vec<f64>)> = if d <= n {
        let cov = centered.transpose() * &centered / denom;
        let eig = SymmetricEigen::new(cov);
        (0..d)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
            .collect()
    } else {
        let gram = &centered * centered.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        (0..n)
            .map(|i| {
                let u = eig.eigenvectors.column(i);
                // v = Xc^T u, normalized, is the covariance eigenvector for
                // the same eigenvalue
                let mut v: Vec<f64> = (centered.transpose() * u).iter().copied().collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for x in &mut v {
                        *x /= norm;
                    }
                }
                (eig.eigenvalues[i], v)
            })
            .collect()
    };
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let tol = EIGENVALUE_TOL * total_variance.max(1.0);
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    let mut degenerate = false;
    for (lambda, v) in pairs.into_iter().take(k) {
        let lambda = lambda.max(0.0);
        if lambda <= tol {
            degenerate = true;
            components.push(orthonormal_fill(&components, d));
            explained_variance.push(0.0);
        } else {
            components.push(v);
            explained_variance.push(lambda);
        }
    }
    while components.len() < k {
        degenerate = true;
        components.push(orthonormal_fill(&components, d));
        explained_variance.push(0.0);
    }

    for c in &mut components {
        fix_sign(c);
    }

    let explained_variance_ratio = explained_variance
        .iter()
        .map(|&l| if total_variance > tol { l / total_variance } else { 0.0 })
        .collect();

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        explained_variance_ratio,
        degenerate: degenerate || total_variance <= tol,
    })
}

/// Deterministic unit vector orthogonal to the ones collected so far:
/// Gram-Schmidt over the standard basis, first direction that survives.
fn orthonormal_fill(existing: &[Vec<f64>], d: usize) -> Vec<f64> {
    for axis in 0..d {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for e in existing {
            let dot: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
            for (x, &y) in v.iter_mut().zip(e) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.5 {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
    unreachable!("fewer than d orthonormal vectors can always be extended")
}

/// Deterministic sign convention: the largest-magnitude coefficient of each
/// component is positive (first such index on ties).
fn fix_sign(component: &mut [f64]) {
    let mut best = 0;
    for (i, &v) in component.iter().enumerate() {
        if v.abs() > component[best].abs() {
            best = i;
        }
    }
    if component[best] < 0.0 {
        for v in component.iter_mut() {
            *v = -*v;
        }
    }
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// Projects a vector: components · (x − mean).
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, PcaError> {
        if x.len() != self.mean.len() {
            return Err(PcaError::Dimension {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(ci, (xi, mi))| ci * (xi - mi))
                    .sum()
            })
            .collect())
    }

    pub fn transform_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, PcaError> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}
