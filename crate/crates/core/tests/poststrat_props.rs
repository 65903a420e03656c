use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spatial_ordinal::graph::{LcarHyper, SpatialGraph};
use spatial_ordinal::mcmc::{ChainDraws, ParamLayout, PosteriorDraws};
use spatial_ordinal::model::{AlphaConstraint, Factor, ModelSpec, ParameterState};
use spatial_ordinal::poststrat::{
    area_shares, poststratify, relevance, CellKey, PopulationRow, PopulationTable,
};

fn cdf(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Two cut-point groups, a two-level additive factor, three areas.
fn toy() -> (ModelSpec, SpatialGraph) {
    let spec = ModelSpec::new(
        3,
        vec![Factor::new("sex", &["M", "F"]), Factor::new("d", &["x", "y"])],
        &["sex"],
        &["d"],
        AlphaConstraint::ZeroSum,
        true,
    )
    .unwrap();
    let graph = SpatialGraph::new(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
    (spec, graph)
}

fn state(kappa: Vec<Vec<f64>>, alpha: f64, theta: Vec<f64>) -> ParameterState {
    ParameterState {
        omega: vec![vec![0.5, 0.5]; kappa.len()],
        kappa,
        alpha: vec![vec![-alpha, alpha]],
        theta,
        hyper: LcarHyper { sigma: 1.0, lambda: 0.5 },
    }
}

fn toy_population(counts: &[f64; 12]) -> PopulationTable {
    let mut rows = Vec::new();
    let mut i = 0;
    for area in 0..3 {
        for group in 0..2 {
            for d in 0..2 {
                rows.push(PopulationRow {
                    key: CellKey { area, group, additive: Some(vec![d]) },
                    count: counts[i],
                });
                i += 1;
            }
        }
    }
    PopulationTable::new(rows, 3).unwrap()
}

fn draws_of(states: &[ParameterState], spec: &ModelSpec, graph: &SpatialGraph) -> PosteriorDraws {
    let layout = ParamLayout::new(spec, graph);
    let rows: Vec<Vec<f64>> = states.iter().map(|s| layout.pack(s)).collect();
    PosteriorDraws {
        chains: vec![ChainDraws {
            iterations: (0..rows.len()).collect(),
            loglik: vec![0.0; rows.len()],
            rows,
            blocks: vec![],
        }],
        layout,
    }
}

fn increasing2() -> impl Strategy<Value = Vec<f64>> {
    (-3.0f64..1.0, 0.05f64..3.0).prop_map(|(a, g)| vec![a, a + g])
}

proptest! {
    /// Expected category shares computed person by person agree with the
    /// weighted cell formula.
    #[test]
    fn matches_per_person_enumeration(
        k0 in increasing2(),
        k1 in increasing2(),
        alpha in -1.0f64..1.0,
        theta in prop::collection::vec(-1.0f64..1.0, 3),
        counts in prop::array::uniform12(0u32..6),
    ) {
        prop_assume!(counts.chunks(4).all(|c| c.iter().sum::<u32>() > 0));
        let (spec, _) = toy();
        let s = state(vec![k0.clone(), k1.clone()], alpha, theta.clone());
        let pop = toy_population(&counts.map(f64::from));
        let shares = area_shares(&s, &pop, spec.categories);

        let kappas = [k0, k1];
        for area in 0..3 {
            let mut expected = [0.0; 3];
            let mut people = 0.0;
            for group in 0..2 {
                for d in 0..2 {
                    let eta = if d == 0 { -alpha } else { alpha } + theta[area];
                    for _person in 0..counts[area * 4 + group * 2 + d] {
                        let g1 = cdf(kappas[group][0] + eta);
                        let g2 = cdf(kappas[group][1] + eta);
                        expected[0] += g1;
                        expected[1] += g2 - g1;
                        expected[2] += 1.0 - g2;
                        people += 1.0;
                    }
                }
            }
            let got = shares[area].as_ref().unwrap();
            for j in 0..3 {
                prop_assert!((got[j] - expected[j] / people).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shares_close_and_accumulate_monotonically(
        k0 in increasing2(),
        k1 in increasing2(),
        alpha in -2.0f64..2.0,
        theta in prop::collection::vec(-2.0f64..2.0, 3),
        counts in prop::array::uniform12(1u32..500),
    ) {
        let (spec, _) = toy();
        let s = state(vec![k0, k1], alpha, theta);
        let pop = toy_population(&counts.map(f64::from));
        for shares in area_shares(&s, &pop, spec.categories) {
            let shares = shares.unwrap();
            prop_assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let mut cum = 0.0;
            for p in shares {
                prop_assert!(p >= 0.0);
                let next = cum + p;
                prop_assert!(next >= cum);
                cum = next;
            }
        }
    }

    #[test]
    fn equal_counts_give_unweighted_mean(
        k0 in increasing2(),
        k1 in increasing2(),
        alpha in -1.0f64..1.0,
        theta in prop::collection::vec(-1.0f64..1.0, 3),
        n in 1u32..100,
    ) {
        let (spec, _) = toy();
        let s = state(vec![k0.clone(), k1.clone()], alpha, theta.clone());
        let pop = toy_population(&[f64::from(n); 12]);
        let shares = area_shares(&s, &pop, spec.categories);
        for area in 0..3 {
            let mut mean = 0.0;
            for kappa in [&k0, &k1] {
                for eta in [-alpha, alpha] {
                    mean += cdf(kappa[0] + eta + theta[area]) / 4.0;
                }
            }
            prop_assert!((shares[area].as_ref().unwrap()[0] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn relevance_flips_with_sign(thetas in prop::collection::vec(prop::sample::select(vec![-1.5, -0.2, 0.3, 0.9, 2.0]), 1..40)) {
        let (spec, graph) = toy();
        let kappa = vec![vec![-1.0, 1.0]; 2];
        let pos: Vec<_> = thetas.iter().map(|&t| state(kappa.clone(), 0.0, vec![t, 0.0, 0.0])).collect();
        let neg: Vec<_> = thetas.iter().map(|&t| state(kappa.clone(), 0.0, vec![-t, 0.0, 0.0])).collect();
        let r = relevance(&draws_of(&pos, &spec, &graph), 0);
        let r_flipped = relevance(&draws_of(&neg, &spec, &graph), 0);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!((r + r_flipped - 1.0).abs() < 1e-12);
    }
}

#[test]
fn relevance_examples() {
    let (spec, graph) = toy();
    let kappa = vec![vec![-1.0, 1.0]; 2];
    let constant: Vec<_> = (0..10).map(|_| state(kappa.clone(), 0.0, vec![-0.3, 0.0, 0.0])).collect();
    assert_eq!(relevance(&draws_of(&constant, &spec, &graph), 0), 1.0);

    let antithetic: Vec<_> = (0..20)
        .map(|i| {
            let t = if i % 2 == 0 { 0.1 + i as f64 } else { -(0.1 + (i - 1) as f64) };
            state(kappa.clone(), 0.0, vec![t, 0.0, 0.0])
        })
        .collect();
    assert_eq!(relevance(&draws_of(&antithetic, &spec, &graph), 0), 0.5);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.5, 1.0).unwrap();
    let draws: Vec<_> = (0..1000)
        .map(|_| state(kappa.clone(), 0.0, vec![normal.sample(&mut rng), 0.0, 0.0]))
        .collect();
    // Phi(-0.5)
    let r = relevance(&draws_of(&draws, &spec, &graph), 0);
    assert!((r - 0.308538).abs() < 0.05, "{r}");
}

#[test]
fn unsampled_area_estimates_are_defined() {
    let (spec, graph) = toy();
    let s = state(vec![vec![-1.0, 1.0]; 2], 0.2, vec![0.4, -0.1, -0.3]);
    let mut counts = [3.0; 12];
    counts[8..].fill(0.0);
    let pop = toy_population(&counts);
    let est = poststratify(&draws_of(&[s], &spec, &graph), &pop, &spec, &graph).unwrap();
    assert_eq!(est.not_applicable, vec!["c".to_string()]);
    assert_eq!(est.estimates.len(), 6);
    assert_eq!(est.relevance.len(), 3);
}
