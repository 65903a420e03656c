use proptest::prelude::*;
use spatial_ordinal::constraints::ConstraintSet;
use spatial_ordinal::cutpoints::{delta_to_kappa, delta_to_sticks, kappa_to_delta, sticks_to_delta};
use spatial_ordinal::diagnostics::{effective_sample_size, gelman_rubin, summarize_column};

fn simplex() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 2..9).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    })
}

fn chains() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..5, 20usize..80).prop_flat_map(|(m, n)| {
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), m)
    })
}

proptest! {
    #[test]
    fn kappa_strictly_increasing(delta in simplex()) {
        let kappa = delta_to_kappa(&delta).unwrap();
        prop_assert_eq!(kappa.len(), delta.len() - 1);
        prop_assert!(kappa.windows(2).all(|w| w[0] < w[1]));
        let back = kappa_to_delta(&kappa).unwrap();
        for (a, b) in back.iter().zip(&delta) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sticks_round_trip(omega in prop::collection::vec(1e-6f64..(1.0 - 1e-6), 1..8)) {
        let delta = sticks_to_delta(&omega).unwrap();
        prop_assert!((delta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let back = delta_to_sticks(&delta).unwrap();
        for (a, b) in back.iter().zip(&omega) {
            prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
        }
    }

    #[test]
    fn projection_satisfies_constraints_and_is_idempotent(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..20.0, 8), 1..4),
        theta in prop::collection::vec(-2.0f64..2.0, 8),
    ) {
        let labelled = rows.into_iter().enumerate().map(|(i, r)| (format!("c{i}"), r)).collect();
        let cons = ConstraintSet::new(labelled, 8);
        let p = cons.project(&theta);
        prop_assert!(cons.max_violation(&p) < 1e-10);
        let pp = cons.project(&p);
        for (a, b) in p.iter().zip(&pp) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rhat_affine_invariant(c in chains(), a in prop::sample::select(vec![-3.0, -0.5, 0.25, 7.0]), b in -10.0f64..10.0) {
        let t: Vec<Vec<f64>> = c.iter().map(|ch| ch.iter().map(|x| a * x + b).collect()).collect();
        let r1 = gelman_rubin(&c).unwrap();
        let r2 = gelman_rubin(&t).unwrap();
        prop_assert!((r1 - r2).abs() < 1e-8 * r1.max(1.0));
    }

    #[test]
    fn ess_affine_invariant_and_bounded(c in chains(), a in prop::sample::select(vec![-2.0, 0.5, 3.0]), b in -5.0f64..5.0) {
        let total: usize = c.iter().map(Vec::len).sum();
        let t: Vec<Vec<f64>> = c.iter().map(|ch| ch.iter().map(|x| a * x + b).collect()).collect();
        let e1 = effective_sample_size(&c).unwrap().value;
        let e2 = effective_sample_size(&t).unwrap().value;
        prop_assert!((e1 - e2).abs() < 1e-6 * e1.max(1.0));
        prop_assert!(e1 <= 1.05 * total as f64);
    }

    #[test]
    fn summary_is_deterministic(c in chains()) {
        prop_assert_eq!(summarize_column("x", &c, false), summarize_column("x", &c, false));
    }
}

#[test]
fn projection_examples() {
    let cons = ConstraintSet::new(vec![("n".into(), vec![1.0, 1.0])], 2);
    let p = cons.project(&[1.0, 3.0]);
    assert!((p[0] + 1.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);

    let cons = ConstraintSet::new(vec![("n".into(), vec![1.0, 3.0])], 2);
    let p = cons.project(&[1.0, 1.0]);
    assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] + 0.2).abs() < 1e-12);
    assert!((p[0] + 3.0 * p[1]).abs() < 1e-12);
}

#[test]
fn redundant_constraint_rows_are_dropped() {
    let rows = vec![
        ("a".to_string(), vec![1.0, 2.0, 0.0]),
        ("b".to_string(), vec![2.0, 4.0, 0.0]),
        ("zero".to_string(), vec![0.0; 3]),
    ];
    let cons = ConstraintSet::new(rows, 3);
    assert_eq!(cons.rank(), 1);
    assert_eq!(cons.dropped(), ["b".to_string()]);
    assert_eq!(cons.free_dim(), 2);
}
