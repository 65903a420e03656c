//! Synthetic populations and stratified two-stage surveys with known truth.

use nalgebra::{Cholesky, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::cutpoints::delta_to_kappa;
use crate::error::{Error, Result};
use crate::graph::{LcarHyper, SpatialGraph};
use crate::mcmc::ParamLayout;
use crate::model::{
    fill_category_probs, AlphaConstraint, Factor, ModelSpec, ParameterState, Respondent,
    SurveyDataset,
};
use crate::poststrat::{CellKey, PopulationRow, PopulationTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    pub sigma: f64,
    pub lambda: f64,
    /// Standard deviation of the additive effects before centring.
    pub alpha_sd: f64,
    /// Dirichlet concentration of each group's true category shares.
    pub cut_concentration: f64,
    /// Range of population counts per cell, before the area size multiplier.
    pub cell_min: u32,
    pub cell_max: u32,
    /// Range of the per-area size multiplier.
    pub area_scale_min: f64,
    pub area_scale_max: f64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        TruthConfig {
            sigma: 0.5,
            lambda: 0.7,
            alpha_sd: 0.3,
            cut_concentration: 4.0,
            cell_min: 20,
            cell_max: 100,
            area_scale_min: 0.5,
            area_scale_max: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FirstStage {
    /// Simple random sampling within each (area, stratum) with a fixed
    /// fraction per stratum level (one fraction when `stratum` is absent).
    Fraction {
        stratum: Option<String>,
        fractions: Vec<f64>,
    },
    /// Fixed number of respondents per area.
    PerArea { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subsample {
    pub factor: String,
    pub level: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyDesign {
    pub first_stage: FirstStage,
    #[serde(default)]
    pub second_stage: Vec<Subsample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub spec: ModelSpec,
    pub graph: SpatialGraph,
    pub state: ParameterState,
    /// Largest `|sum_k n_hk theta_k| / sum_k n_hk` under the sample-weighted
    /// constraints, set once a survey has been drawn.
    pub sample_constraint_gap: Option<f64>,
}

impl SyntheticTruth {
    /// `(name, value)` pairs using the same names as the draw files.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let layout = ParamLayout::new(&self.spec, &self.graph);
        layout.names().into_iter().zip(layout.pack(&self.state)).collect()
    }

    /// Records how far the true spatial effects are from satisfying the
    /// constraints induced by the drawn sample.
    pub fn record_sample_gap(&mut self, data: &SurveyDataset) -> Result<f64> {
        let cells = crate::model::compile_cells(data, &self.spec, &self.graph)?;
        let cons = ConstraintSet::from_cells(&cells, &self.spec, self.graph.len());
        let gap = cons
            .weights()
            .iter()
            .map(|row| {
                let n: f64 = row.iter().sum();
                let s: f64 = row.iter().zip(&self.state.theta).map(|(w, t)| w * t).sum();
                (s / n).abs()
            })
            .fold(0.0, f64::max);
        self.sample_constraint_gap = Some(gap);
        Ok(gap)
    }
}

/// Level index per declared factor of a population cell.
fn cell_factor_levels(spec: &ModelSpec, group: usize, additive: &[usize]) -> Vec<usize> {
    let mut levels = vec![0; spec.factors.len()];
    for (slot, &i) in spec.cut_factor_indices().iter().enumerate() {
        levels[i] = spec.group_levels(group)[slot];
    }
    for (slot, &i) in spec.additive_factor_indices().iter().enumerate() {
        levels[i] = additive[slot];
    }
    levels
}

fn additive_combinations(levels: &[usize]) -> Vec<Vec<usize>> {
    let mut combos = vec![Vec::new()];
    for &n in levels {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                (0..n).map(move |l| {
                    let mut next = c.clone();
                    next.push(l);
                    next
                })
            })
            .collect();
    }
    combos
}

/// Draws a true parameter state and population cell counts.
pub fn generate_population(
    graph: &SpatialGraph,
    spec: &ModelSpec,
    config: &TruthConfig,
    seed: u64,
) -> Result<(SyntheticTruth, PopulationTable)> {
    if spec.categories < 2 {
        return Err(Error::input("synthetic data needs at least two categories"));
    }
    if graph.is_empty() {
        return Err(Error::input("synthetic data needs at least one area"));
    }
    let hyper = LcarHyper::new(config.sigma, config.lambda)?;
    if config.cell_min > config.cell_max || config.area_scale_min > config.area_scale_max {
        return Err(Error::input("population ranges must satisfy min <= max"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Population counts.
    let combos = additive_combinations(&spec.additive_levels());
    let mut rows = Vec::new();
    for k in 0..graph.len() {
        let scale = rng.random_range(config.area_scale_min..=config.area_scale_max);
        for g in 0..spec.n_groups() {
            for combo in &combos {
                let base = rng.random_range(config.cell_min..=config.cell_max) as f64;
                rows.push(PopulationRow {
                    key: CellKey {
                        area: k,
                        group: g,
                        additive: Some(combo.clone()),
                    },
                    count: (base * scale).round(),
                });
            }
        }
    }
    let pop = PopulationTable::new(rows, graph.len())?;

    // Cut points per group from Dirichlet category shares.
    let gamma = Gamma::new(config.cut_concentration, 1.0)
        .map_err(|e| Error::input(format!("cut_concentration: {e}")))?;
    let mut kappa = Vec::with_capacity(spec.n_groups());
    let mut omega = Vec::with_capacity(spec.n_groups());
    for _ in 0..spec.n_groups() {
        let raw: Vec<f64> = (0..spec.categories).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = raw.iter().sum();
        let delta: Vec<f64> = raw.iter().map(|x| x / total).collect();
        omega.push(crate::cutpoints::delta_to_sticks(&delta)?);
        kappa.push(delta_to_kappa(&delta)?);
    }

    // Additive effects under the model's constraint.
    let normal = Normal::new(0.0, config.alpha_sd.max(0.0))
        .map_err(|e| Error::input(format!("alpha_sd: {e}")))?;
    let alpha = spec
        .additive_levels()
        .iter()
        .map(|&h| {
            let free: Vec<f64> = (1..h).map(|_| normal.sample(&mut rng)).collect();
            let first = match spec.alpha_constraint {
                AlphaConstraint::Corner => 0.0,
                AlphaConstraint::ZeroSum => -free.iter().sum::<f64>(),
            };
            std::iter::once(first).chain(free).collect()
        })
        .collect();

    // Spatial field from the LCAR prior, projected onto the
    // population-weighted constraints.
    let theta = if spec.include_spatial {
        let raw = sample_lcar(graph, &hyper, &mut rng)?;
        population_constraints(spec, &pop, graph.len()).project(&raw)
    } else {
        vec![0.0; graph.len()]
    };

    let truth = SyntheticTruth {
        spec: spec.clone(),
        graph: graph.clone(),
        state: ParameterState {
            omega,
            kappa,
            alpha,
            theta,
            hyper,
        },
        sample_constraint_gap: None,
    };
    Ok((truth, pop))
}

fn population_constraints(spec: &ModelSpec, pop: &PopulationTable, areas: usize) -> ConstraintSet {
    let levels = spec.additive_levels();
    let mut rows = Vec::new();
    if levels.is_empty() {
        let totals = pop.area_totals();
        rows.push(("N_k".to_string(), totals));
    } else {
        for (f, &n) in levels.iter().enumerate() {
            for h in 0..n {
                let mut row = vec![0.0; areas];
                for r in &pop.rows {
                    if r.key.additive.as_ref().is_some_and(|a| a[f] == h) {
                        row[r.key.area] += r.count;
                    }
                }
                rows.push((format!("N[{f}][{h}]"), row));
            }
        }
    }
    ConstraintSet::new(rows, areas)
}

/// One draw from the zero-mean LCAR prior via the Cholesky factor of `Q`.
pub fn sample_lcar<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    hyper: &LcarHyper,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let q = graph.precision(hyper).to_dense();
    let chol = Cholesky::new(q).ok_or_else(|| Error::numeric("LCAR precision is not positive definite"))?;
    let z = DVector::from_iterator(graph.len(), (0..graph.len()).map(|_| rng.sample(StandardNormal)));
    let theta = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::numeric("triangular solve failed"))?;
    Ok(theta.iter().copied().collect())
}

/// Draws respondents from the population according to `design` and
/// simulates their outcomes from the truth.
pub fn draw_survey(
    truth: &SyntheticTruth,
    pop: &PopulationTable,
    design: &SurveyDesign,
    seed: u64,
) -> Result<SurveyDataset> {
    let spec = &truth.spec;
    let graph = &truth.graph;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let stratum_factor = match &design.first_stage {
        FirstStage::Fraction {
            stratum: Some(name),
            fractions,
        } => {
            let f = spec
                .factor_index(name)
                .ok_or_else(|| Error::input(format!("unknown stratum factor '{name}'")))?;
            if fractions.len() != spec.factors[f].levels.len() {
                return Err(Error::input(format!(
                    "stratum '{name}' needs one fraction per level"
                )));
            }
            Some(f)
        }
        FirstStage::Fraction {
            stratum: None,
            fractions,
        } if fractions.len() != 1 => {
            return Err(Error::input("unstratified design needs exactly one fraction"));
        }
        _ => None,
    };
    if let FirstStage::Fraction { fractions, .. } = &design.first_stage {
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::input("sampling fractions must lie in [0, 1]"));
        }
    }
    let subsample: Vec<(usize, usize, f64)> = design
        .second_stage
        .iter()
        .map(|s| {
            let f = spec
                .factor_index(&s.factor)
                .ok_or_else(|| Error::input(format!("unknown factor '{}'", s.factor)))?;
            let l = spec.factors[f]
                .level_index(&s.level)
                .ok_or_else(|| Error::input(format!("unknown level '{}' of '{}'", s.level, s.factor)))?;
            if !(0.0..=1.0).contains(&s.rate) {
                return Err(Error::input("second-stage rates must lie in [0, 1]"));
            }
            Ok((f, l, s.rate))
        })
        .collect::<Result<_>>()?;

    // Population cells grouped by area, with their factor levels.
    let mut by_area: Vec<Vec<(usize, Vec<usize>, Vec<usize>, u64)>> = vec![Vec::new(); graph.len()];
    for row in &pop.rows {
        let additive = row
            .key
            .additive
            .clone()
            .ok_or_else(|| Error::input("survey simulation needs a fully stratified population"))?;
        let levels = cell_factor_levels(spec, row.key.group, &additive);
        by_area[row.key.area].push((row.key.group, additive, levels, row.count as u64));
    }

    let mut data = SurveyDataset::new(spec.categories, spec.factors.clone());
    let mut pi = vec![0.0; spec.categories];
    for (k, cells) in by_area.iter().enumerate() {
        let strata: Vec<Option<usize>> = match stratum_factor {
            Some(f) => (0..spec.factors[f].levels.len()).map(Some).collect(),
            None => vec![None],
        };
        for stratum in strata {
            let members: Vec<usize> = (0..cells.len())
                .filter(|&c| stratum.is_none_or(|s| cells[c].2[stratum_factor.unwrap()] == s))
                .collect();
            let size: u64 = members.iter().map(|&c| cells[c].3).sum();
            let wanted = match &design.first_stage {
                FirstStage::Fraction { fractions, .. } => {
                    let f = fractions[stratum.unwrap_or(0)];
                    (f * size as f64).round() as u64
                }
                FirstStage::PerArea { size } => *size as u64,
            };
            if wanted > size {
                return Err(Error::input(format!(
                    "requested {wanted} respondents from area '{}' with population {size}",
                    graph.area_ids()[k]
                )));
            }
            let picked = index::sample(&mut rng, size as usize, wanted as usize);
            let mut picked: Vec<usize> = picked.into_iter().collect();
            picked.sort_unstable();
            // Map individual positions back to cells.
            let mut selected: Vec<usize> = Vec::with_capacity(picked.len());
            let mut cursor = 0;
            let mut upper = 0u64;
            for &m in &members {
                upper += cells[m].3;
                while cursor < picked.len() && (picked[cursor] as u64) < upper {
                    selected.push(m);
                    cursor += 1;
                }
            }
            for &(f, l, rate) in &subsample {
                let eligible: Vec<usize> = (0..selected.len())
                    .filter(|&i| cells[selected[i]].2[f] == l)
                    .collect();
                let keep = (rate * eligible.len() as f64).round() as usize;
                let mut retain = vec![true; selected.len()];
                eligible.iter().for_each(|&i| retain[i] = false);
                for i in index::sample(&mut rng, eligible.len(), keep) {
                    retain[eligible[i]] = true;
                }
                selected = selected
                    .iter()
                    .zip(&retain)
                    .filter(|(_, &r)| r)
                    .map(|(&c, _)| c)
                    .collect();
            }
            for c in selected {
                let (group, additive, levels, _) = &cells[c];
                fill_category_probs(
                    &truth.state.kappa[*group],
                    truth.state.shift(additive, k),
                    &mut pi,
                );
                let outcome = sample_category(&pi, &mut rng);
                data.records.push(Respondent {
                    id: format!("R{:06}", data.records.len() + 1),
                    area: graph.area_ids()[k].clone(),
                    levels: levels.clone(),
                    outcome,
                });
            }
        }
    }
    Ok(data)
}

fn sample_category<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return j + 1;
        }
    }
    pi.len()
}

/// Factor schema mimicking a sex x age-group x dwelling-stratum survey.
pub fn benchmark_factors() -> Vec<Factor> {
    vec![
        Factor::new("sex", &["M", "F"]),
        Factor::new("age", &["15-44", "45-64", "65-74", "75-84", "85+"]),
        Factor::new("dwelling", &["D1", "D2", "D3", "D4"]),
    ]
}

/// Five categories, cut points indexed by sex x age, additive dwelling
/// effects under a zero-sum constraint.
pub fn benchmark_spec() -> ModelSpec {
    ModelSpec::new(
        5,
        benchmark_factors(),
        &["sex", "age"],
        &["dwelling"],
        AlphaConstraint::ZeroSum,
        true,
    )
    .expect("benchmark spec is valid")
}

/// Proportional stratified sampling by dwelling, then half of the
/// respondents aged 15-64 retained.
pub fn benchmark_design() -> SurveyDesign {
    SurveyDesign {
        first_stage: FirstStage::Fraction {
            stratum: Some("dwelling".into()),
            fractions: vec![0.052; 4],
        },
        second_stage: vec![
            Subsample {
                factor: "age".into(),
                level: "15-44".into(),
                rate: 0.5,
            },
            Subsample {
                factor: "age".into(),
                level: "45-64".into(),
                rate: 0.5,
            },
        ],
    }
}

/// Everything produced by one synthetic benchmark replicate.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub graph: SpatialGraph,
    pub spec: ModelSpec,
    pub truth: SyntheticTruth,
    pub population: PopulationTable,
    pub survey: SurveyDataset,
}

/// The default 10 x 5 grid benchmark (K = 50, J = 5, n close to 5000).
pub fn benchmark(seed: u64) -> Result<Benchmark> {
    let graph = SpatialGraph::grid(10, 5)?;
    let spec = benchmark_spec();
    let (mut truth, population) = generate_population(&graph, &spec, &TruthConfig::default(), seed)?;
    let survey = draw_survey(&truth, &population, &benchmark_design(), seed.wrapping_add(1))?;
    truth.record_sample_gap(&survey)?;
    Ok(Benchmark {
        graph,
        spec,
        truth,
        population,
        survey,
    })
}
