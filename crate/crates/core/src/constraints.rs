//! Weighted zero-sum constraints on the spatial effects.
//!
//! One row per level `h` of every additive factor, with weights `n_hk` equal to
//! the number of respondents at that level in area `k`. Spatial effects are
//! kept on the subspace `{theta : A theta = 0}` by orthogonal projection.

use log::{debug, warn};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::model::{CellTable, ModelSpec};

/// A row is dropped as redundant when its component orthogonal to the rows
/// already kept is this small relative to its norm.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ConstraintSet {
    labels: Vec<String>,
    weights: Vec<Vec<f64>>,
    basis: Vec<Vec<f64>>,
    dropped: Vec<String>,
    dim: usize,
}

impl ConstraintSet {
    /// Builds the projector from labelled weight rows over `dim` areas.
    ///
    /// All-zero rows are ignored; rows in the span of earlier rows are dropped
    /// with a warning.
    pub fn new(rows: Vec<(String, Vec<f64>)>, dim: usize) -> Self {
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut dropped = Vec::new();
        for (label, row) in rows {
            assert_eq!(row.len(), dim, "constraint row has wrong length");
            let norm = dot(&row, &row).sqrt();
            if norm == 0.0 {
                debug!("constraint '{label}' has no weight and is skipped");
                continue;
            }
            let mut v: Vec<f64> = row.iter().map(|x| x / norm).collect();
            // Two Gram-Schmidt passes for numerical orthogonality.
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &v);
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= c * qi;
                    }
                }
            }
            let residual = dot(&v, &v).sqrt();
            if residual < RANK_TOL {
                warn!("constraint '{label}' is implied by earlier constraints and is dropped");
                dropped.push(label.clone());
            } else {
                v.iter_mut().for_each(|x| *x /= residual);
                basis.push(v);
            }
            labels.push(label);
            weights.push(row);
        }
        ConstraintSet {
            labels,
            weights,
            basis,
            dropped,
            dim,
        }
    }

    /// Constraint rows implied by a compiled survey: `n_hk` per additive factor
    /// level, or plain per-area respondent counts when the model has no
    /// additive factors.
    pub fn from_cells(cells: &CellTable, spec: &ModelSpec, dim: usize) -> Self {
        let levels = spec.additive_levels();
        let mut rows = Vec::new();
        if levels.is_empty() {
            let mut row = vec![0.0; dim];
            for cell in &cells.cells {
                row[cell.area] += cell.n as f64;
            }
            rows.push(("n_k".to_string(), row));
        } else {
            for (f, &count) in levels.iter().enumerate() {
                let factor = &spec.factors[spec.additive_factor_indices()[f]];
                for h in 0..count {
                    let mut row = vec![0.0; dim];
                    for cell in cells.cells.iter().filter(|c| c.additive[f] == h) {
                        row[cell.area] += cell.n as f64;
                    }
                    rows.push((format!("{}={}", factor.name, factor.levels[h]), row));
                }
            }
        }
        ConstraintSet::new(rows, dim)
    }

    pub fn none(dim: usize) -> Self {
        ConstraintSet::new(Vec::new(), dim)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Dimension of the constraint subspace.
    pub fn free_dim(&self) -> usize {
        self.dim - self.rank()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    /// `theta - A'(AA')^{-1} A theta`.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = theta.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, theta: &mut [f64]) {
        for _ in 0..2 {
            for q in &self.basis {
                let c = dot(q, theta);
                for (t, qi) in theta.iter_mut().zip(q) {
                    *t -= c * qi;
                }
            }
        }
    }

    /// Eigenvalues of `B' M B`, where the columns of `B` are an orthonormal
    /// basis of the constraint subspace. `M` must be symmetric `dim x dim`.
    pub fn restricted_eigenvalues(&self, m: &DMatrix<f64>) -> Vec<f64> {
        assert_eq!(m.nrows(), self.dim, "matrix does not match constraint dimension");
        if self.basis.is_empty() {
            let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            return ev;
        }
        let mut projector = DMatrix::<f64>::identity(self.dim, self.dim);
        for q in &self.basis {
            let q = nalgebra::DVector::from_column_slice(q);
            projector -= &q * q.transpose();
        }
        let eig = SymmetricEigen::new(projector);
        let cols: Vec<_> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.5)
            .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
            .collect();
        if cols.is_empty() {
            return Vec::new();
        }
        let b = DMatrix::from_columns(&cols);
        let restricted = b.transpose() * m * &b;
        let mut ev: Vec<f64> = SymmetricEigen::new(restricted).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Largest absolute weighted sum `|sum_k A[h,k] theta_k|` over all rows.
    pub fn max_violation(&self, theta: &[f64]) -> f64 {
        self.weights
            .iter()
            .map(|row| dot(row, theta).abs())
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
