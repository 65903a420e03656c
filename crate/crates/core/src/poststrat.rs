//! Post-stratified small-area estimates, relevance probabilities and the
//! posterior predictive check.
//!
//! For each stored draw the category shares of area `k` are the
//! population-weighted average of cell probabilities,
//! `P[j,k] = sum_c N_c pi[j,c] / N_k`; summaries are taken across draws
//! afterwards.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::diagnostics::{mean, quantiles, sd};
use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::mcmc::PosteriorDraws;
use crate::model::{compile_cells, fill_category_probs, ModelSpec, ParameterState, SurveyDataset};

/// Relevance above this flags an area as credibly below zero.
pub const RELEVANCE_HIGH: f64 = 0.8;
/// Relevance below this flags an area as credibly above zero.
pub const RELEVANCE_LOW: f64 = 0.2;

/// A post-stratification cell. `additive` is `None` when the population is
/// not broken down by the additive factors; such cells use zero additive
/// effect, which is the average level under a zero-sum constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub area: usize,
    pub group: usize,
    pub additive: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRow {
    pub key: CellKey,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTable {
    pub rows: Vec<PopulationRow>,
    areas: usize,
}

impl PopulationTable {
    pub fn new(rows: Vec<PopulationRow>, areas: usize) -> Result<Self> {
        for row in &rows {
            if !(row.count >= 0.0 && row.count.is_finite()) {
                return Err(Error::input(format!(
                    "population count {} must be a nonnegative number",
                    row.count
                )));
            }
            if row.key.area >= areas {
                return Err(Error::input(format!("population area index {} out of range", row.key.area)));
            }
        }
        Ok(PopulationTable { rows, areas })
    }

    /// `N_k` per area.
    pub fn area_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.areas];
        for row in &self.rows {
            totals[row.key.area] += row.count;
        }
        totals
    }

    pub fn areas(&self) -> usize {
        self.areas
    }
}

/// Category probabilities of the requested cells under one draw.
pub fn cell_probabilities(
    state: &ParameterState,
    spec: &ModelSpec,
    keys: &[CellKey],
) -> Result<Vec<Vec<f64>>> {
    let levels = spec.additive_levels();
    keys.iter()
        .map(|key| {
            if key.area >= state.theta.len() {
                return Err(Error::input(format!("unknown area index {}", key.area)));
            }
            if key.group >= state.kappa.len() {
                return Err(Error::input(format!("unknown cut-point group {}", key.group)));
            }
            if let Some(add) = &key.additive {
                if add.len() != levels.len() || add.iter().zip(&levels).any(|(a, n)| a >= n) {
                    return Err(Error::input(format!("invalid additive levels {add:?}")));
                }
            }
            let mut pi = vec![0.0; spec.categories];
            fill_category_probs(&state.kappa[key.group], shift_of(state, key), &mut pi);
            Ok(pi)
        })
        .collect()
}

fn shift_of(state: &ParameterState, key: &CellKey) -> f64 {
    match &key.additive {
        Some(add) => state.shift(add, key.area),
        None => state.theta[key.area],
    }
}

/// Post-stratified category shares per area for a single draw; `None` for
/// areas with zero population.
pub fn area_shares(state: &ParameterState, pop: &PopulationTable, categories: usize) -> Vec<Option<Vec<f64>>> {
    let mut sums = vec![vec![0.0; categories]; pop.areas];
    let mut pi = vec![0.0; categories];
    for row in &pop.rows {
        if row.count == 0.0 {
            continue;
        }
        fill_category_probs(&state.kappa[row.key.group], shift_of(state, &row.key), &mut pi);
        for (s, p) in sums[row.key.area].iter_mut().zip(&pi) {
            *s += row.count * p;
        }
    }
    pop.area_totals()
        .into_iter()
        .zip(sums)
        .map(|(n, s)| (n > 0.0).then(|| s.into_iter().map(|v| v / n).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaCategoryEstimate {
    pub area: String,
    pub category: usize,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Relevance {
    pub area: String,
    pub prob: f64,
    pub flag: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaEstimates {
    pub estimates: Vec<AreaCategoryEstimate>,
    pub relevance: Vec<Relevance>,
    /// Areas without population, reported as not applicable.
    pub not_applicable: Vec<String>,
}

pub fn poststratify(
    draws: &PosteriorDraws,
    pop: &PopulationTable,
    spec: &ModelSpec,
    graph: &SpatialGraph,
) -> Result<AreaEstimates> {
    if draws.total_draws() == 0 {
        return Err(Error::input("no stored draws to post-stratify"));
    }
    if pop.areas != graph.len() {
        return Err(Error::input("population table does not cover the graph's areas"));
    }
    let j = spec.categories;
    let states = draws.states()?;
    // per_area[k][j] holds the share of category j in area k, one entry per draw.
    let mut per_area = vec![vec![Vec::with_capacity(states.len()); j]; graph.len()];
    let mut empty = vec![false; graph.len()];
    for state in &states {
        for (k, shares) in area_shares(state, pop, j).into_iter().enumerate() {
            match shares {
                Some(s) => s.into_iter().enumerate().for_each(|(c, v)| per_area[k][c].push(v)),
                None => empty[k] = true,
            }
        }
    }

    let mut estimates = Vec::new();
    let mut not_applicable = Vec::new();
    for (k, id) in graph.area_ids().iter().enumerate() {
        if empty[k] {
            warn!("area '{id}' has no population; estimate not applicable");
            not_applicable.push(id.clone());
            continue;
        }
        for (c, values) in per_area[k].iter().enumerate() {
            let q = quantiles(values, &[0.025, 0.5, 0.975]);
            estimates.push(AreaCategoryEstimate {
                area: id.clone(),
                category: c + 1,
                mean: mean(values),
                sd: sd(values),
                q025: q[0],
                q50: q[1],
                q975: q[2],
            });
        }
    }

    let relevance = graph
        .area_ids()
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let prob = relevance_of(&states, k);
            Relevance {
                area: id.clone(),
                prob,
                flag: relevance_flag(prob),
            }
        })
        .collect();

    Ok(AreaEstimates {
        estimates,
        relevance,
        not_applicable,
    })
}

/// Fraction of draws with `theta[k] < 0`.
pub fn relevance(draws: &PosteriorDraws, k: usize) -> f64 {
    let col = draws.layout.theta_offset() + k;
    let total = draws.total_draws();
    let below = draws.rows().filter(|r| r[col] < 0.0).count();
    below as f64 / total as f64
}

fn relevance_of(states: &[ParameterState], k: usize) -> f64 {
    let below = states.iter().filter(|s| s.theta[k] < 0.0).count();
    below as f64 / states.len() as f64
}

pub fn relevance_flag(prob: f64) -> &'static str {
    if prob > RELEVANCE_HIGH {
        "high"
    } else if prob < RELEVANCE_LOW {
        "low"
    } else {
        "-"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpcRow {
    pub area: String,
    pub category: usize,
    pub pred_mean: f64,
    pub pred_lo: f64,
    pub pred_hi: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpcTable {
    pub rows: Vec<PpcRow>,
    pub excluded: Vec<String>,
    /// Simulated percentages, `[area][draw][category]`, for the included areas.
    pub simulated: Vec<Vec<Vec<f64>>>,
}

/// Multinomial draw by sequential conditional binomials.
pub fn sample_multinomial<R: rand::Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut remaining = n;
    let mut mass = 1.0;
    for (j, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if j + 1 == probs.len() {
            out[j] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let draw = Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng);
        out[j] = draw;
        remaining -= draw;
        mass -= p;
    }
    out
}

/// Posterior predictive category percentages for the requested areas.
///
/// For every stored draw, each sampled cell of an area is re-simulated with
/// its observed size, and the simulated counts are pooled to area-level
/// percentages. Areas without respondents are excluded with a warning.
pub fn posterior_predictive_check(
    draws: &PosteriorDraws,
    data: &SurveyDataset,
    spec: &ModelSpec,
    graph: &SpatialGraph,
    areas: &[String],
    seed: u64,
) -> Result<PpcTable> {
    let cells = compile_cells(data, spec, graph)?;
    let states = draws.states()?;
    let j = spec.categories;
    let mut table = PpcTable {
        rows: Vec::new(),
        excluded: Vec::new(),
        simulated: Vec::new(),
    };
    for id in areas {
        let k = graph
            .area_index(id)
            .ok_or_else(|| Error::input(format!("unknown area '{id}'")))?;
        let area_cells: Vec<_> = cells.cells.iter().filter(|c| c.area == k).collect();
        let n_area: u64 = area_cells.iter().map(|c| c.n as u64).sum();
        if n_area == 0 {
            warn!("area '{id}' has no respondents; excluded from the predictive check");
            table.excluded.push(id.clone());
            continue;
        }
        let mut observed = vec![0u64; j];
        for cell in &area_cells {
            for (o, &c) in observed.iter_mut().zip(&cell.counts) {
                *o += c as u64;
            }
        }
        let mut simulated = Vec::with_capacity(states.len());
        let mut pi = vec![0.0; j];
        for (d, state) in states.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(d as u64));
            rng.set_stream(k as u64);
            let mut counts = vec![0u64; j];
            for cell in &area_cells {
                fill_category_probs(
                    &state.kappa[cell.group],
                    state.shift(&cell.additive, cell.area),
                    &mut pi,
                );
                for (c, s) in counts
                    .iter_mut()
                    .zip(sample_multinomial(cell.n as u64, &pi, &mut rng))
                {
                    *c += s;
                }
            }
            simulated.push(
                counts
                    .iter()
                    .map(|&c| 100.0 * c as f64 / n_area as f64)
                    .collect::<Vec<f64>>(),
            );
        }
        for c in 0..j {
            let values: Vec<f64> = simulated.iter().map(|s| s[c]).collect();
            let q = quantiles(&values, &[0.025, 0.975]);
            table.rows.push(PpcRow {
                area: id.clone(),
                category: c + 1,
                pred_mean: mean(&values),
                pred_lo: q[0],
                pred_hi: q[1],
                observed: 100.0 * observed[c] as f64 / n_area as f64,
            });
        }
        table.simulated.push(simulated);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LcarHyper;
    use crate::model::AlphaConstraint;

    fn state(kappa: Vec<Vec<f64>>, theta: Vec<f64>) -> ParameterState {
        ParameterState {
            omega: vec![],
            kappa,
            alpha: vec![],
            theta,
            hyper: LcarHyper { sigma: 1.0, lambda: 0.5 },
        }
    }

    fn key(area: usize, group: usize) -> CellKey {
        CellKey { area, group, additive: None }
    }

    #[test]
    fn uniform_draw_gives_uniform_cells() {
        let spec = ModelSpec::new(5, vec![], &[], &[], AlphaConstraint::Corner, true).unwrap();
        let kappa = crate::cutpoints::delta_to_kappa(&[0.2; 5]).unwrap();
        let s = state(vec![kappa], vec![0.0; 3]);
        let probs = cell_probabilities(&s, &spec, &[key(0, 0), key(2, 0)]).unwrap();
        for pi in probs {
            assert!(pi.iter().all(|p| (p - 0.2).abs() < 1e-12));
        }
    }

    #[test]
    fn spatial_shift_changes_probabilities() {
        let spec = ModelSpec::new(3, vec![], &[], &[], AlphaConstraint::Corner, true).unwrap();
        let s = state(vec![vec![-1.0, 1.0]], vec![1.0, 0.0]);
        let probs = cell_probabilities(&s, &spec, &[key(0, 0), key(1, 0)]).unwrap();
        assert!((probs[0][0] - 0.5).abs() < 1e-12);
        assert!((probs[0][1] - 0.380797078).abs() < 1e-9);
        assert!((probs[1][1] - 0.462117157).abs() < 1e-9);
    }

    #[test]
    fn unknown_area_is_input_error() {
        let spec = ModelSpec::new(3, vec![], &[], &[], AlphaConstraint::Corner, true).unwrap();
        let s = state(vec![vec![-1.0, 1.0]], vec![0.0]);
        assert!(cell_probabilities(&s, &spec, &[key(4, 0)]).unwrap_err().is_input());
    }

    #[test]
    fn weighted_average_of_two_cells() {
        // Group 0 has pi_1 = 0.5, group 1 has pi_1 = 0.1.
        let s = state(vec![vec![0.0], vec![crate::cutpoints::logit(0.1)]], vec![0.0]);
        let pop = PopulationTable::new(
            vec![
                PopulationRow { key: key(0, 0), count: 30.0 },
                PopulationRow { key: key(0, 1), count: 70.0 },
            ],
            1,
        )
        .unwrap();
        let shares = area_shares(&s, &pop, 2);
        let p = shares[0].as_ref().unwrap();
        assert!((p[0] - 0.22).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_cells_identity() {
        let s = state(vec![vec![-0.4, 0.9]], vec![0.3]);
        let pop = PopulationTable::new(
            vec![
                PopulationRow { key: key(0, 0), count: 50.0 },
                PopulationRow { key: key(0, 0), count: 50.0 },
            ],
            1,
        )
        .unwrap();
        let p = area_shares(&s, &pop, 3)[0].clone().unwrap();
        let (_, pi) = crate::model::category_probs(&[-0.4, 0.9], 0.3).unwrap();
        for (a, b) in p.iter().zip(&pi) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_population_area_is_none() {
        let s = state(vec![vec![0.0]], vec![0.0, 0.0]);
        let pop = PopulationTable::new(vec![PopulationRow { key: key(0, 0), count: 5.0 }], 2).unwrap();
        let shares = area_shares(&s, &pop, 2);
        assert!(shares[0].is_some() && shares[1].is_none());
    }

    #[test]
    fn negative_count_rejected() {
        assert!(PopulationTable::new(vec![PopulationRow { key: key(0, 0), count: -1.0 }], 1).is_err());
    }

    #[test]
    fn flags() {
        assert_eq!(relevance_flag(0.9), "high");
        assert_eq!(relevance_flag(0.1), "low");
        assert_eq!(relevance_flag(0.5), "-");
        assert_eq!(relevance_flag(0.8), "-");
    }

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [0u64, 1, 7, 250] {
            let c = sample_multinomial(n, &[0.1, 0.2, 0.3, 0.4], &mut rng);
            assert_eq!(c.iter().sum::<u64>(), n);
        }
        assert_eq!(sample_multinomial(12, &[1.0, 0.0, 0.0], &mut rng), vec![12, 0, 0]);
    }
}
