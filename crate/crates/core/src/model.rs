//! Cumulative-logit model for ordinal outcomes over collapsed cell counts.
//!
//! For a respondent in cut-point group `g`, additive levels `h` and area `k`,
//!
//! ```text
//! logit P(Y <= j) = kappa[g][j] + sum_f alpha[f][h_f] + theta[k],   j = 1..J-1
//! ```
//!
//! Cut-point groups are the full interaction of the cut factors; every group
//! carries its own increasing cut-point vector, so category probabilities are
//! positive by construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cutpoints::{check_increasing, logistic};
use crate::error::{Error, Result};
use crate::graph::{LcarHyper, SpatialGraph};

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
}

impl Factor {
    pub fn new(name: impl Into<String>, levels: &[&str]) -> Self {
        Factor {
            name: name.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaConstraint {
    /// First level fixed at zero.
    Corner,
    /// First level equals minus the sum of the others.
    ZeroSum,
}

/// Which factors index the cut points and which enter as additive shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub categories: usize,
    pub factors: Vec<Factor>,
    pub cut_factors: Vec<String>,
    pub additive_factors: Vec<String>,
    pub alpha_constraint: AlphaConstraint,
    pub include_spatial: bool,
    #[serde(skip)]
    cut_idx: Vec<usize>,
    #[serde(skip)]
    additive_idx: Vec<usize>,
}

impl ModelSpec {
    pub fn new(
        categories: usize,
        factors: Vec<Factor>,
        cut_factors: &[&str],
        additive_factors: &[&str],
        alpha_constraint: AlphaConstraint,
        include_spatial: bool,
    ) -> Result<Self> {
        if categories < 2 {
            return Err(Error::input("need at least two outcome categories"));
        }
        let lookup = |name: &str| -> Result<usize> {
            factors
                .iter()
                .position(|f| f.name == name)
                .ok_or_else(|| Error::input(format!("model references undeclared factor '{name}'")))
        };
        for (i, f) in factors.iter().enumerate() {
            if f.levels.is_empty() {
                return Err(Error::input(format!("factor '{}' has no levels", f.name)));
            }
            if factors[..i].iter().any(|o| o.name == f.name) {
                return Err(Error::input(format!("factor '{}' declared twice", f.name)));
            }
        }
        let cut_idx = cut_factors.iter().map(|n| lookup(n)).collect::<Result<Vec<_>>>()?;
        let additive_idx = additive_factors
            .iter()
            .map(|n| lookup(n))
            .collect::<Result<Vec<_>>>()?;
        if let Some(dup) = cut_idx.iter().find(|i| additive_idx.contains(i)) {
            return Err(Error::input(format!(
                "factor '{}' cannot be both a cut factor and an additive factor",
                factors[*dup].name
            )));
        }
        Ok(ModelSpec {
            categories,
            cut_factors: cut_factors.iter().map(|s| s.to_string()).collect(),
            additive_factors: additive_factors.iter().map(|s| s.to_string()).collect(),
            factors,
            alpha_constraint,
            include_spatial,
            cut_idx,
            additive_idx,
        })
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    /// Number of cut-point groups (1 when no cut factors are declared).
    pub fn n_groups(&self) -> usize {
        self.cut_idx
            .iter()
            .map(|&i| self.factors[i].levels.len())
            .product()
    }

    /// Level counts of the additive factors, in declaration order.
    pub fn additive_levels(&self) -> Vec<usize> {
        self.additive_idx
            .iter()
            .map(|&i| self.factors[i].levels.len())
            .collect()
    }

    /// Group index of a respondent given one level index per declared factor.
    pub fn group_of(&self, levels: &[usize]) -> usize {
        self.cut_idx.iter().fold(0, |acc, &i| {
            acc * self.factors[i].levels.len() + levels[i]
        })
    }

    pub fn additive_of(&self, levels: &[usize]) -> Vec<usize> {
        self.additive_idx.iter().map(|&i| levels[i]).collect()
    }

    /// Level indices of the cut factors for group `g`.
    pub fn group_levels(&self, mut g: usize) -> Vec<usize> {
        let mut out = vec![0; self.cut_idx.len()];
        for (slot, &i) in self.cut_idx.iter().enumerate().rev() {
            let n = self.factors[i].levels.len();
            out[slot] = g % n;
            g /= n;
        }
        out
    }

    pub fn group_label(&self, g: usize) -> String {
        if self.cut_idx.is_empty() {
            return "all".to_string();
        }
        self.group_levels(g)
            .iter()
            .zip(&self.cut_idx)
            .map(|(&l, &i)| format!("{}={}", self.factors[i].name, self.factors[i].levels[l]))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn cut_factor_indices(&self) -> &[usize] {
        &self.cut_idx
    }

    pub fn additive_factor_indices(&self) -> &[usize] {
        &self.additive_idx
    }

    /// Re-derives cached indices after deserialization.
    pub fn revalidated(self) -> Result<Self> {
        let cut: Vec<&str> = self.cut_factors.iter().map(String::as_str).collect();
        let add: Vec<&str> = self.additive_factors.iter().map(String::as_str).collect();
        ModelSpec::new(
            self.categories,
            self.factors.clone(),
            &cut,
            &add,
            self.alpha_constraint,
            self.include_spatial,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Respondent {
    pub id: String,
    pub area: String,
    /// One level index per factor of the dataset schema.
    pub levels: Vec<usize>,
    /// Outcome category in `1..=J`.
    pub outcome: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDataset {
    pub categories: usize,
    pub factors: Vec<Factor>,
    pub records: Vec<Respondent>,
}

impl SurveyDataset {
    pub fn new(categories: usize, factors: Vec<Factor>) -> Self {
        SurveyDataset {
            categories,
            factors,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks outcomes, factor levels and area ids.
    pub fn validate(&self, graph: &SpatialGraph) -> Result<()> {
        let mut missing = Vec::new();
        for r in &self.records {
            if r.outcome < 1 || r.outcome > self.categories {
                return Err(Error::input(format!(
                    "respondent '{}' has outcome {} outside 1..={}",
                    r.id, r.outcome, self.categories
                )));
            }
            if r.levels.len() != self.factors.len() {
                return Err(Error::input(format!(
                    "respondent '{}' has {} factor values, expected {}",
                    r.id,
                    r.levels.len(),
                    self.factors.len()
                )));
            }
            for (f, &l) in self.factors.iter().zip(&r.levels) {
                if l >= f.levels.len() {
                    return Err(Error::input(format!(
                        "respondent '{}' has invalid level index {l} for factor '{}'",
                        r.id, f.name
                    )));
                }
            }
            if graph.area_index(&r.area).is_none() && !missing.contains(&r.area) {
                missing.push(r.area.clone());
            }
        }
        if !missing.is_empty() {
            missing.sort();
            return Err(Error::input(format!(
                "survey references areas absent from the adjacency: {}",
                missing.join(", ")
            )));
        }
        Ok(())
    }

    /// Respondent counts per area, in graph order.
    pub fn area_counts(&self, graph: &SpatialGraph) -> Vec<usize> {
        let mut counts = vec![0; graph.len()];
        for r in &self.records {
            if let Some(k) = graph.area_index(&r.area) {
                counts[k] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub group: usize,
    /// Level index per additive factor.
    pub additive: Vec<usize>,
    pub area: usize,
    /// Respondents per outcome category.
    pub counts: Vec<u32>,
    pub n: u32,
}

/// Survey data collapsed to per-(group, additive levels, area) category counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable {
    pub categories: usize,
    pub cells: Vec<Cell>,
    by_group: Vec<Vec<usize>>,
}

impl CellTable {
    pub fn empty(spec: &ModelSpec) -> Self {
        CellTable {
            categories: spec.categories,
            cells: Vec::new(),
            by_group: vec![Vec::new(); spec.n_groups()],
        }
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().map(|c| c.n as u64).sum()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Indices of the cells belonging to cut-point group `g`.
    pub fn group_cells(&self, g: usize) -> &[usize] {
        &self.by_group[g]
    }
}

/// Collapses respondents into cells. Cell order is deterministic
/// (sorted by group, additive levels, area).
pub fn compile_cells(
    data: &SurveyDataset,
    spec: &ModelSpec,
    graph: &SpatialGraph,
) -> Result<CellTable> {
    if data.categories != spec.categories {
        return Err(Error::input(format!(
            "dataset has {} categories, model expects {}",
            data.categories, spec.categories
        )));
    }
    // Map model factors onto dataset columns by name.
    let column: Vec<usize> = spec
        .factors
        .iter()
        .map(|f| {
            data.factors
                .iter()
                .position(|d| d.name == f.name && d.levels == f.levels)
                .ok_or_else(|| {
                    Error::input(format!(
                        "factor '{}' missing from the survey or declared with different levels",
                        f.name
                    ))
                })
        })
        .collect::<Result<_>>()?;

    let mut tally: BTreeMap<(usize, Vec<usize>, usize), Vec<u32>> = BTreeMap::new();
    let mut levels = vec![0; spec.factors.len()];
    for r in &data.records {
        for (slot, &c) in column.iter().enumerate() {
            levels[slot] = r.levels[c];
        }
        let area = graph
            .area_index(&r.area)
            .ok_or_else(|| Error::input(format!("unknown area '{}'", r.area)))?;
        if r.outcome < 1 || r.outcome > spec.categories {
            return Err(Error::input(format!(
                "respondent '{}' has outcome {} outside 1..={}",
                r.id, r.outcome, spec.categories
            )));
        }
        let key = (spec.group_of(&levels), spec.additive_of(&levels), area);
        tally.entry(key).or_insert_with(|| vec![0; spec.categories])[r.outcome - 1] += 1;
    }

    let mut table = CellTable::empty(spec);
    for ((group, additive, area), counts) in tally {
        table.by_group[group].push(table.cells.len());
        let n = counts.iter().sum();
        table.cells.push(Cell {
            group,
            additive,
            area,
            counts,
            n,
        });
    }
    Ok(table)
}

/// Cumulative (`gamma`, length `J-1`) and category (`pi`, length `J`)
/// probabilities for cut points shifted by `shift`.
pub fn category_probs(kappa: &[f64], shift: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_increasing(kappa)?;
    if !shift.is_finite() {
        return Err(Error::numeric(format!("non-finite linear predictor shift {shift}")));
    }
    let gamma: Vec<f64> = kappa.iter().map(|k| logistic(k + shift)).collect();
    let mut pi = vec![0.0; kappa.len() + 1];
    fill_category_probs(kappa, shift, &mut pi);
    Ok((gamma, pi))
}

/// Writes category probabilities into `out` (length `J`) without validation.
pub fn fill_category_probs(kappa: &[f64], shift: f64, out: &mut [f64]) {
    let mut previous = 0.0;
    for (slot, k) in out.iter_mut().zip(kappa) {
        let gamma = logistic(k + shift);
        *slot = gamma - previous;
        previous = gamma;
    }
    out[kappa.len()] = 1.0 - previous;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    /// Stick proportions per cut-point group.
    pub omega: Vec<Vec<f64>>,
    /// Cut points derived from `omega`.
    pub kappa: Vec<Vec<f64>>,
    /// Full effect vectors per additive factor (constraint already applied).
    pub alpha: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub hyper: LcarHyper,
}

impl ParameterState {
    /// Additive linear-predictor shift of a cell.
    #[inline]
    pub fn shift(&self, additive: &[usize], area: usize) -> f64 {
        let fixed: f64 = self
            .alpha
            .iter()
            .zip(additive)
            .map(|(a, &h)| a[h])
            .sum();
        fixed + self.theta[area]
    }

    pub fn is_finite(&self) -> bool {
        let all = |v: &[Vec<f64>]| v.iter().flatten().all(|x| x.is_finite());
        all(&self.omega)
            && all(&self.kappa)
            && all(&self.alpha)
            && self.theta.iter().all(|x| x.is_finite())
            && self.hyper.sigma.is_finite()
            && self.hyper.lambda.is_finite()
    }
}

#[inline]
pub(crate) fn cell_loglik(kappa: &[f64], shift: f64, counts: &[u32]) -> f64 {
    let mut total = 0.0;
    let mut previous = 0.0;
    let last = kappa.len();
    for (j, &c) in counts.iter().enumerate() {
        let gamma = if j < last { logistic(kappa[j] + shift) } else { 1.0 };
        if c > 0 {
            total += c as f64 * (gamma - previous).max(PROB_FLOOR).ln();
        }
        previous = gamma;
    }
    total
}

/// Log-likelihood restricted to the listed cells.
pub(crate) fn loglik_subset(state: &ParameterState, cells: &CellTable, subset: &[usize]) -> f64 {
    subset
        .iter()
        .map(|&i| {
            let cell = &cells.cells[i];
            cell_loglik(
                &state.kappa[cell.group],
                state.shift(&cell.additive, cell.area),
                &cell.counts,
            )
        })
        .sum()
}

pub(crate) fn loglik_unchecked(state: &ParameterState, cells: &CellTable) -> f64 {
    cells
        .cells
        .iter()
        .map(|cell| {
            cell_loglik(
                &state.kappa[cell.group],
                state.shift(&cell.additive, cell.area),
                &cell.counts,
            )
        })
        .sum()
}

/// Categorical log-likelihood summed over cells.
pub fn loglik(state: &ParameterState, cells: &CellTable) -> Result<f64> {
    if !state.is_finite() {
        return Err(Error::numeric("parameter state contains NaN or infinite values"));
    }
    let value = loglik_unchecked(state, cells);
    if value.is_nan() {
        return Err(Error::numeric("log-likelihood evaluated to NaN"));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutpoints::logit;

    fn state_with(kappa: Vec<f64>, k: usize) -> ParameterState {
        ParameterState {
            omega: vec![vec![0.5; kappa.len()]],
            kappa: vec![kappa],
            alpha: vec![],
            theta: vec![0.0; k],
            hyper: LcarHyper::new(1.0, 0.5).unwrap(),
        }
    }

    #[test]
    fn three_category_probs() {
        let (gamma, pi) = category_probs(&[-1.0, 1.0], 0.0).unwrap();
        let g1 = 1.0 / (1.0 + 1f64.exp());
        let g2 = 1.0 / (1.0 + (-1f64).exp());
        assert!((gamma[0] - g1).abs() < 1e-15 && (gamma[1] - g2).abs() < 1e-15);
        assert!((pi[0] - 0.268941421).abs() < 1e-9);
        assert!((pi[1] - 0.462117157).abs() < 1e-9);
        assert!((pi[2] - 0.268941421).abs() < 1e-9);
    }

    #[test]
    fn uniform_five_categories() {
        let kappa: Vec<f64> = [0.2, 0.4, 0.6, 0.8].iter().map(|&p| logit(p)).collect();
        let (_, pi) = category_probs(&kappa, 0.0).unwrap();
        assert!(pi.iter().all(|p| (p - 0.2).abs() < 1e-12));
    }

    #[test]
    fn positive_shift_favours_low_categories() {
        let (_, pi) = category_probs(&[-1.0, 1.0], 1.0).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15);
        assert!((pi[1] - 0.380797078).abs() < 1e-9);
        assert!((pi[2] - 0.119202922).abs() < 1e-9);
    }

    #[test]
    fn non_increasing_rejected() {
        assert!(matches!(category_probs(&[1.0, -1.0], 0.0), Err(Error::Domain(_))));
    }

    fn one_area_spec() -> (ModelSpec, SpatialGraph) {
        let spec = ModelSpec::new(3, vec![], &[], &[], AlphaConstraint::Corner, true).unwrap();
        let graph = SpatialGraph::new::<_, &str>(&["a"], &[]).unwrap();
        (spec, graph)
    }

    fn respondent(outcome: usize) -> Respondent {
        Respondent {
            id: format!("r{outcome}"),
            area: "a".into(),
            levels: vec![],
            outcome,
        }
    }

    #[test]
    fn identical_respondents_collapse() {
        let (spec, graph) = one_area_spec();
        let mut data = SurveyDataset::new(3, vec![]);
        data.records = vec![respondent(1), respondent(1), respondent(2)];
        let cells = compile_cells(&data, &spec, &graph).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells.cells[0].counts, vec![2, 1, 0]);
        assert_eq!(cells.total(), 3);
    }

    #[test]
    fn empty_table_has_zero_loglik() {
        let (spec, graph) = one_area_spec();
        let cells = compile_cells(&SurveyDataset::new(3, vec![]), &spec, &graph).unwrap();
        assert!(cells.is_empty());
        assert_eq!(loglik(&state_with(vec![-1.0, 1.0], 1), &cells).unwrap(), 0.0);
    }

    #[test]
    fn single_respondent_loglik() {
        let (spec, graph) = one_area_spec();
        let mut data = SurveyDataset::new(3, vec![]);
        data.records = vec![respondent(2)];
        let cells = compile_cells(&data, &spec, &graph).unwrap();
        let ll = loglik(&state_with(vec![-1.0, 1.0], 1), &cells).unwrap();
        // ln(tanh(1/2)), the middle-category mass
        assert!((ll - (-0.7719368329)).abs() < 1e-9, "{ll}");
    }

    #[test]
    fn nan_state_is_numeric_error() {
        let (spec, graph) = one_area_spec();
        let cells = compile_cells(&SurveyDataset::new(3, vec![]), &spec, &graph).unwrap();
        let mut state = state_with(vec![-1.0, 1.0], 1);
        state.theta[0] = f64::NAN;
        assert!(matches!(loglik(&state, &cells), Err(Error::Numeric(_))));
    }

    #[test]
    fn group_indexing_round_trips() {
        let factors = vec![
            Factor::new("sex", &["M", "F"]),
            Factor::new("age", &["1", "2", "3", "4", "5"]),
            Factor::new("dwelling", &["D1", "D2", "D3", "D4"]),
        ];
        let spec = ModelSpec::new(
            5,
            factors,
            &["sex", "age"],
            &["dwelling"],
            AlphaConstraint::ZeroSum,
            true,
        )
        .unwrap();
        assert_eq!(spec.n_groups(), 10);
        assert_eq!(spec.additive_levels(), vec![4]);
        let g = spec.group_of(&[1, 3, 2]);
        assert_eq!(g, 8);
        assert_eq!(spec.group_levels(g), vec![1, 3]);
        assert_eq!(spec.group_label(g), "sex=F;age=4");
        assert_eq!(spec.additive_of(&[1, 3, 2]), vec![2]);
    }

    #[test]
    fn overlapping_factor_roles_rejected() {
        let factors = vec![Factor::new("sex", &["M", "F"])];
        let err = ModelSpec::new(3, factors, &["sex"], &["sex"], AlphaConstraint::Corner, true);
        assert!(err.unwrap_err().is_input());
    }
}
