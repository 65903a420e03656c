use nalgebra::{Cholesky, DMatrix, DVector};
use proptest::prelude::*;
use spatial_ordinal::graph::{LcarHyper, SpatialGraph};

fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=30).prop_flat_map(|k| {
        let edges = prop::collection::vec((0..k, 0..k), 0..(2 * k));
        (Just(k), edges)
    })
}

fn build(k: usize, edges: &[(usize, usize)]) -> SpatialGraph {
    let ids: Vec<String> = (0..k).map(|i| format!("r{i}")).collect();
    let pairs: Vec<(String, String)> = edges
        .iter()
        .filter(|(a, b)| a != b)
        .map(|&(a, b)| (ids[a].clone(), ids[b].clone()))
        .collect();
    SpatialGraph::new(&ids, &pairs).unwrap()
}

fn hyper() -> impl Strategy<Value = LcarHyper> {
    (0.05f64..5.0, 0.0f64..0.999).prop_map(|(s, l)| LcarHyper::new(s, l).unwrap())
}

/// Dense Gaussian log-pdf, computed without the graph's own shortcuts.
fn dense_logpdf(q: &DMatrix<f64>, theta: &[f64]) -> f64 {
    let k = theta.len() as f64;
    let x = DVector::from_column_slice(theta);
    let chol = Cholesky::new(q.clone()).expect("positive definite");
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    0.5 * log_det - 0.5 * k * (2.0 * std::f64::consts::PI).ln() - 0.5 * (x.transpose() * q * &x)[0]
}

proptest! {
    #[test]
    fn precision_is_positive_definite((k, edges) in random_graph(), h in hyper()) {
        let g = build(k, &edges);
        let q = g.precision(&h).to_dense();
        prop_assert_eq!(&q, &q.transpose());
        let chol = Cholesky::new(q.clone());
        prop_assert!(chol.is_some());
        let min_eig = q.symmetric_eigenvalues().min();
        let bound = (1.0 - h.lambda) / (h.sigma * h.sigma);
        prop_assert!(min_eig >= bound * (1.0 - 1e-9) - 1e-12);
    }

    #[test]
    fn eigen_log_det_matches_dense((k, edges) in random_graph(), h in hyper()) {
        let g = build(k, &edges);
        let q = g.precision(&h).to_dense();
        let dense = 2.0 * Cholesky::new(q).unwrap().l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        prop_assert!((g.lcar_log_det(&h) - dense).abs() < 1e-8, "{} vs {}", g.lcar_log_det(&h), dense);
    }

    #[test]
    fn density_matches_dense_oracle((k, edges) in random_graph(), h in hyper(), seed in any::<u64>()) {
        let g = build(k, &edges);
        let theta: Vec<f64> = (0..k).map(|i| ((seed.wrapping_add(i as u64) % 1000) as f64 / 250.0) - 2.0).collect();
        let dense = dense_logpdf(&g.precision(&h).to_dense(), &theta);
        let fast = g.lcar_logdensity(&theta, &h).unwrap();
        prop_assert!((fast - dense).abs() < 1e-8 * dense.abs().max(1.0));
    }

    #[test]
    fn density_invariant_under_relabeling(
        (k, edges) in random_graph(),
        h in hyper(),
        perm_seed in any::<u64>(),
    ) {
        let g = build(k, &edges);
        // Fisher-Yates with a tiny LCG keeps the permutation reproducible.
        let mut perm: Vec<usize> = (0..k).collect();
        let mut s = perm_seed;
        for i in (1..k).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let relabeled_edges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let g2 = build(k, &relabeled_edges);
        let theta: Vec<f64> = (0..k).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut theta2 = vec![0.0; k];
        for i in 0..k {
            theta2[perm[i]] = theta[i];
        }
        let a = g.lcar_logdensity(&theta, &h).unwrap();
        let b = g2.lcar_logdensity(&theta2, &h).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn path3_density_against_dense_oracle() {
    let g = SpatialGraph::new(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
    let h = LcarHyper::new(1.0, 0.5).unwrap();
    let q = DMatrix::from_row_slice(3, 3, &[1.0, -0.5, 0.0, -0.5, 1.5, -0.5, 0.0, -0.5, 1.0]);
    let theta = [1.0, 0.0, -1.0];
    // det Q = 1 and theta'Q theta = 2, so the density is -1.5 log(2 pi) - 1.
    let expected = -1.5 * (2.0 * std::f64::consts::PI).ln() - 1.0;
    assert!((dense_logpdf(&q, &theta) - expected).abs() < 1e-12);
    assert!((g.lcar_logdensity(&theta, &h).unwrap() - expected).abs() < 1e-12);
}
