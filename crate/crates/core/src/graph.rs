//! Area adjacency structure and the Leroux CAR prior.
//!
//! The structure matrix `R = D - W` is eigen-decomposed once when the graph is
//! built. Every later LCAR log-density then costs `O(K + |E|)`:
//!
//! ```text
//! Q(sigma, lambda) = sigma^-2 * (lambda * R + (1 - lambda) * I)
//! log det Q        = -2 K log sigma + sum_i log(lambda * e_i + 1 - lambda)
//! theta' Q theta   = sigma^-2 * (lambda * sum_edges (theta_i - theta_j)^2 + (1 - lambda) * |theta|^2)
//! ```

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard keeping `lambda` inside the open unit interval.
pub const LAMBDA_EPS: f64 = 1e-6;

/// Default upper bound of the uniform prior on `sigma`.
pub const DEFAULT_SIGMA_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    area_ids: Vec<String>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    r_eigenvalues: Vec<f64>,
    components: usize,
}

/// Hyperparameters of the Leroux CAR prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcarHyper {
    pub sigma: f64,
    pub lambda: f64,
}

impl LcarHyper {
    pub fn new(sigma: f64, lambda: f64) -> Result<Self> {
        let hyper = LcarHyper { sigma, lambda };
        hyper.validate()?;
        Ok(hyper)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::domain(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.lambda.is_finite() && self.lambda < 1.0 && self.lambda >= 0.0) {
            return Err(Error::domain(format!(
                "lambda must lie in [0, 1), got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Mixing parameter clamped to `[LAMBDA_EPS, 1 - LAMBDA_EPS]`.
    pub fn clamped_lambda(&self) -> f64 {
        self.lambda.clamp(LAMBDA_EPS, 1.0 - LAMBDA_EPS)
    }
}

impl SpatialGraph {
    /// Builds the graph from an ordered area list and unordered neighbor pairs.
    ///
    /// Duplicate edges (in either orientation) are merged.
    pub fn new<A, E>(areas: &[A], edges: &[(E, E)]) -> Result<Self>
    where
        A: AsRef<str>,
        E: AsRef<str>,
    {
        let mut index = HashMap::with_capacity(areas.len());
        let mut area_ids = Vec::with_capacity(areas.len());
        for (k, id) in areas.iter().enumerate() {
            let id = id.as_ref().to_string();
            if index.insert(id.clone(), k).is_some() {
                return Err(Error::input(format!("duplicate area id '{id}'")));
            }
            area_ids.push(id);
        }

        let mut unique = BTreeSet::new();
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let ia = *index
                .get(a)
                .ok_or_else(|| Error::input(format!("edge references unknown area '{a}'")))?;
            let ib = *index
                .get(b)
                .ok_or_else(|| Error::input(format!("edge references unknown area '{b}'")))?;
            if ia == ib {
                return Err(Error::input(format!("self-loop edge on area '{a}'")));
            }
            unique.insert((ia.min(ib), ia.max(ib)));
        }
        let edges: Vec<(usize, usize)> = unique.into_iter().collect();

        let k = area_ids.len();
        let mut neighbors = vec![Vec::new(); k];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let mut graph = SpatialGraph {
            area_ids,
            index,
            neighbors,
            edges,
            r_eigenvalues: Vec::new(),
            components: 0,
        };
        graph.components = graph.count_components();
        graph.r_eigenvalues = graph.structure_eigenvalues();
        Ok(graph)
    }

    /// Rook-contiguity lattice with `rows * cols` areas named `A001`, `A002`, ...
    /// in row-major order.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::input("grid dimensions must be positive"));
        }
        let width = (rows * cols).to_string().len().max(3);
        let ids: Vec<String> = (0..rows * cols)
            .map(|k| format!("A{:0width$}", k + 1))
            .collect();
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let k = r * cols + c;
                if c + 1 < cols {
                    edges.push((ids[k].clone(), ids[k + 1].clone()));
                }
                if r + 1 < rows {
                    edges.push((ids[k].clone(), ids[k + cols].clone()));
                }
            }
        }
        SpatialGraph::new(&ids, &edges)
    }

    fn count_components(&self) -> usize {
        let k = self.len();
        let mut seen = vec![false; k];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..k {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    fn structure_eigenvalues(&self) -> Vec<f64> {
        if self.is_empty() {
            return Vec::new();
        }
        let eig = SymmetricEigen::new(self.structure_matrix());
        let mut values: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(0.0)).collect();
        values.sort_by(f64::total_cmp);
        values
    }

    /// Dense `R = D - W`.
    pub fn structure_matrix(&self) -> DMatrix<f64> {
        let k = self.len();
        let mut r = DMatrix::zeros(k, k);
        for (i, list) in self.neighbors.iter().enumerate() {
            r[(i, i)] = list.len() as f64;
        }
        for &(i, j) in &self.edges {
            r[(i, j)] = -1.0;
            r[(j, i)] = -1.0;
        }
        r
    }

    pub fn len(&self) -> usize {
        self.area_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.area_ids.is_empty()
    }

    pub fn area_ids(&self) -> &[String] {
        &self.area_ids
    }

    pub fn area_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Edges as index pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn r_eigenvalues(&self) -> &[f64] {
        &self.r_eigenvalues
    }

    pub fn connected_components(&self) -> usize {
        self.components
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn precision(&self, hyper: &LcarHyper) -> LcarPrecision {
        let lambda = hyper.clamped_lambda();
        let inv_var = 1.0 / (hyper.sigma * hyper.sigma);
        let diagonal = self
            .neighbors
            .iter()
            .map(|list| inv_var * (lambda * list.len() as f64 + 1.0 - lambda))
            .collect();
        LcarPrecision {
            diagonal,
            off_diagonal: -lambda * inv_var,
            edges: self.edges.clone(),
        }
    }

    /// `log det Q` from the cached spectrum of `R`.
    pub fn lcar_log_det(&self, hyper: &LcarHyper) -> f64 {
        let lambda = hyper.clamped_lambda();
        let spectral: f64 = self
            .r_eigenvalues
            .iter()
            .map(|&e| (lambda * e + 1.0 - lambda).ln())
            .sum();
        -2.0 * self.len() as f64 * hyper.sigma.ln() + spectral
    }

    /// Sufficient statistics of `theta` for the LCAR quadratic form.
    pub fn quadratic_stats(&self, theta: &[f64]) -> QuadStats {
        let sum_sq = theta.iter().map(|t| t * t).sum();
        let edge_sq = self
            .edges
            .iter()
            .map(|&(i, j)| {
                let d = theta[i] - theta[j];
                d * d
            })
            .sum();
        QuadStats { sum_sq, edge_sq }
    }

    /// LCAR log-density given precomputed quadratic statistics.
    pub fn lcar_logdensity_stats(&self, stats: &QuadStats, hyper: &LcarHyper) -> f64 {
        let lambda = hyper.clamped_lambda();
        let quad = (lambda * stats.edge_sq + (1.0 - lambda) * stats.sum_sq)
            / (hyper.sigma * hyper.sigma);
        0.5 * self.lcar_log_det(hyper) - 0.5 * self.len() as f64 * (2.0 * PI).ln() - 0.5 * quad
    }

    /// Zero-mean Gaussian log-density of `theta` under `Q(sigma, lambda)`.
    pub fn lcar_logdensity(&self, theta: &[f64], hyper: &LcarHyper) -> Result<f64> {
        hyper.validate()?;
        if theta.len() != self.len() {
            return Err(Error::input(format!(
                "theta has length {}, graph has {} areas",
                theta.len(),
                self.len()
            )));
        }
        Ok(self.lcar_logdensity_stats(&self.quadratic_stats(theta), hyper))
    }

    /// Moran's I of `values` under the 0/1 contiguity weights.
    pub fn morans_i(&self, values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
        let denom: f64 = dev.iter().map(|d| d * d).sum();
        let w_total = 2.0 * self.edges.len() as f64;
        if denom == 0.0 || w_total == 0.0 {
            return 0.0;
        }
        let cross: f64 = self
            .edges
            .iter()
            .map(|&(i, j)| 2.0 * dev[i] * dev[j])
            .sum();
        (n / w_total) * cross / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadStats {
    pub sum_sq: f64,
    pub edge_sq: f64,
}

impl QuadStats {
    pub fn scaled(&self, factor: f64) -> QuadStats {
        QuadStats {
            sum_sq: self.sum_sq * factor * factor,
            edge_sq: self.edge_sq * factor * factor,
        }
    }
}

/// Sparse LCAR precision: a diagonal plus one shared value on every edge.
#[derive(Debug, Clone)]
pub struct LcarPrecision {
    pub diagonal: Vec<f64>,
    pub off_diagonal: f64,
    pub edges: Vec<(usize, usize)>,
}

impl LcarPrecision {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let diag: f64 = self
            .diagonal
            .iter()
            .zip(x)
            .map(|(d, v)| d * v * v)
            .sum();
        let off: f64 = self.edges.iter().map(|&(i, j)| x[i] * x[j]).sum();
        diag + 2.0 * self.off_diagonal * off
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.diagonal.clone()));
        for &(i, j) in &self.edges {
            q[(i, j)] = self.off_diagonal;
            q[(j, i)] = self.off_diagonal;
        }
        q
    }
}
