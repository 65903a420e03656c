//! Command implementations shared by the binary and the tests.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::diagnostics::{self, ConvergenceReport};
use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::io::{self, ChainManifest, RunConfig, RunManifest};
use crate::mcmc;
use crate::model::{ModelSpec, SurveyDataset};
use crate::poststrat::{self, AreaEstimates, PopulationTable, PpcTable};
use crate::synth;

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub chains: Option<usize>,
    pub iterations: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub force: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            config.mcmc.seed = seed;
            if let Some(sim) = config.simulate.as_mut() {
                sim.seed = seed;
            }
        }
        if let Some(v) = self.chains {
            config.mcmc.chains = v;
        }
        if let Some(v) = self.iterations {
            config.mcmc.iterations = v;
        }
        if let Some(v) = self.burnin {
            config.mcmc.burnin = v;
        }
        if let Some(v) = self.thin {
            config.mcmc.thin = v;
        }
        config.mcmc.validate()
    }
}

fn exists_nonempty(dir: &Path) -> bool {
    fs::read_dir(dir).is_ok_and(|mut d| d.next().is_some())
}

fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if exists_nonempty(dir) && !force {
        return Err(Error::input(format!(
            "output directory '{}' is not empty; pass --force to overwrite",
            dir.display()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Files written by [`simulate`].
#[derive(Debug, Clone)]
pub struct SimulatedFiles {
    pub survey: PathBuf,
    pub population: PathBuf,
    pub adjacency: PathBuf,
    pub truth: PathBuf,
    pub respondents: usize,
    pub population_rows: usize,
}

fn target_path(config: &RunConfig, configured: &Path, out: Option<&Path>) -> PathBuf {
    match out {
        Some(dir) => dir.join(configured.file_name().unwrap_or(configured.as_os_str())),
        None => config.resolve(configured),
    }
}

/// Generates a grid benchmark from the `[simulate]` block and writes the
/// survey, population, adjacency and truth files.
pub fn simulate(config: &RunConfig, out: Option<&Path>, force: bool) -> Result<SimulatedFiles> {
    let sim = config
        .simulate
        .as_ref()
        .ok_or_else(|| Error::input("config has no [simulate] section"))?;
    let spec = config.model.to_spec()?;
    let population_path = config
        .data
        .population
        .as_deref()
        .ok_or_else(|| Error::input("simulate needs data.population in the config"))?;
    let survey = target_path(config, &config.data.survey, out);
    let population = target_path(config, population_path, out);
    let adjacency = target_path(config, &config.data.adjacency, out);
    let truth = survey.with_file_name("truth.csv");
    let targets = [&survey, &population, &adjacency, &truth];
    if !force {
        if let Some(p) = targets.iter().find(|p| p.exists()) {
            return Err(Error::input(format!(
                "'{}' already exists; pass --force to overwrite",
                p.display()
            )));
        }
    }
    for p in targets {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }

    let graph = SpatialGraph::grid(sim.rows, sim.cols)?;
    let (mut state, pop) = synth::generate_population(&graph, &spec, &sim.truth, sim.seed)?;
    let data = synth::draw_survey(&state, &pop, &sim.design, sim.seed.wrapping_add(1))?;
    let gap = state.record_sample_gap(&data)?;
    info!("simulated {} respondents; sample constraint gap {gap:.4}", data.len());

    io::write_survey(&survey, &data)?;
    io::write_population(&population, &pop, &spec, &graph)?;
    io::write_adjacency(&adjacency, &graph)?;
    io::write_truth(&truth, &state)?;
    Ok(SimulatedFiles {
        survey,
        population,
        adjacency,
        truth,
        respondents: data.len(),
        population_rows: pop.rows.len(),
    })
}

/// Inputs resolved from a config: graph, survey and optional population.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub spec: ModelSpec,
    pub graph: SpatialGraph,
    pub survey: SurveyDataset,
    pub population: Option<PopulationTable>,
    pub hashes: BTreeMap<String, String>,
}

/// Builds the area graph. Areas come from the adjacency file followed by any
/// further areas listed only in the population file.
pub fn load_graph(config: &RunConfig) -> Result<SpatialGraph> {
    let adj_path = config.resolve(&config.data.adjacency);
    let adj = io::read_adjacency(&adj_path)?;
    let mut areas = adj.areas.clone();
    if let Some(pop) = &config.data.population {
        let pop_areas = io::population_areas(&config.resolve(pop))?;
        let known: HashSet<&String> = adj.areas.iter().collect();
        let extra: Vec<&String> = pop_areas.iter().filter(|a| !known.contains(a)).collect();
        if config.strict_areas {
            let listed: HashSet<&String> = pop_areas.iter().collect();
            let missing: Vec<&String> = adj.areas.iter().filter(|a| !listed.contains(a)).collect();
            if !extra.is_empty() || !missing.is_empty() {
                return Err(Error::input(format!(
                    "area sets differ: only in population {extra:?}, only in adjacency {missing:?}"
                )));
            }
        }
        areas.extend(extra.into_iter().cloned());
    }
    SpatialGraph::new(&areas, &adj.edges)
}

pub fn load_inputs(config: &RunConfig) -> Result<Inputs> {
    let spec = config.model.to_spec()?;
    let graph = load_graph(config)?;
    let survey_path = config.resolve(&config.data.survey);
    let survey = io::read_survey(&survey_path, &spec.factors, spec.categories)?;
    survey.validate(&graph)?;
    let mut hashes = BTreeMap::new();
    hashes.insert("survey".to_string(), io::file_hash(&survey_path)?);
    hashes.insert(
        "adjacency".to_string(),
        io::file_hash(&config.resolve(&config.data.adjacency))?,
    );
    let population = match &config.data.population {
        Some(p) => {
            let path = config.resolve(p);
            hashes.insert("population".to_string(), io::file_hash(&path)?);
            Some(io::read_population(&path, &spec, &graph)?)
        }
        None => None,
    };
    Ok(Inputs {
        spec,
        graph,
        survey,
        population,
        hashes,
    })
}

/// Output directory for a fit: `--out` or `data.output`.
pub fn output_dir(config: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    match (out, &config.data.output) {
        (Some(dir), _) => Ok(dir.to_path_buf()),
        (None, Some(dir)) => Ok(config.resolve(dir)),
        (None, None) => Err(Error::input("no output directory: set data.output or pass --out")),
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub dir: PathBuf,
    pub report: ConvergenceReport,
    pub warnings: Vec<String>,
    pub stored_draws: usize,
}

/// Runs the sampler and writes draw files, the manifest and the report.
pub fn fit(config: &RunConfig, out: Option<&Path>, force: bool) -> Result<FitOutcome> {
    let dir = output_dir(config, out)?;
    let inputs = load_inputs(config)?;
    prepare_dir(&dir, force)?;
    let fit = mcmc::run_with(&inputs.survey, &inputs.spec, &inputs.graph, &config.mcmc, &config.monitor)?;

    for (c, chain) in fit.draws.chains.iter().enumerate() {
        io::write_chain(&io::chain_file(&dir, c), &fit.draws.layout, chain)?;
    }
    let manifest = RunManifest {
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.to_toml(),
        spec: inputs.spec.clone(),
        spec_hash: io::spec_hash(&inputs.spec),
        layout: fit.draws.layout.clone(),
        input_hashes: inputs.hashes,
        area_ids: inputs.graph.area_ids().to_vec(),
        group_labels: (0..inputs.spec.n_groups())
            .map(|g| inputs.spec.group_label(g))
            .collect(),
        constraint_rank: fit.constraints.rank(),
        dropped_constraints: fit.constraints.dropped().to_vec(),
        chains: fit
            .draws
            .chains
            .iter()
            .enumerate()
            .map(|(c, chain)| ChainManifest {
                chain: c,
                stored: chain.rows.len(),
                blocks: chain.blocks.clone(),
            })
            .collect(),
        warnings: fit.warnings.clone(),
    };
    io::write_manifest(&dir, &manifest)?;
    io::write_report(&dir.join(io::REPORT_FILE), &fit.report)?;
    Ok(FitOutcome {
        dir,
        stored_draws: fit.draws.total_draws(),
        report: fit.report,
        warnings: fit.warnings,
    })
}

/// Loads draws and checks they were produced under the config's model.
fn load_fit(config: &RunConfig, draws_dir: &Path) -> Result<(RunManifest, mcmc::PosteriorDraws, ModelSpec)> {
    let (manifest, draws) = io::read_draws(draws_dir)?;
    let spec = config.model.to_spec()?;
    if io::spec_hash(&spec) != manifest.spec_hash {
        return Err(Error::input(format!(
            "draws in '{}' were fitted under a different model specification",
            draws_dir.display()
        )));
    }
    Ok((manifest, draws, spec))
}

fn check_areas(graph: &SpatialGraph, manifest: &RunManifest) -> Result<()> {
    if graph.area_ids() != manifest.area_ids.as_slice() {
        return Err(Error::input("area list differs from the one the draws were fitted on"));
    }
    Ok(())
}

/// Writes `area_estimates.csv` and `relevance.csv` into `out`.
pub fn poststratify(config: &RunConfig, draws_dir: &Path, out: &Path) -> Result<AreaEstimates> {
    let (manifest, draws, spec) = load_fit(config, draws_dir)?;
    let pop_path = config
        .data
        .population
        .as_ref()
        .map(|p| config.resolve(p))
        .ok_or_else(|| Error::input("post-stratification needs data.population"))?;
    if !pop_path.exists() {
        return Err(Error::input(format!(
            "population file '{}' does not exist",
            pop_path.display()
        )));
    }
    let graph = load_graph(config)?;
    check_areas(&graph, &manifest)?;
    let pop = io::read_population(&pop_path, &spec, &graph)?;
    let estimates = poststrat::poststratify(&draws, &pop, &spec, &graph)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::write_area_estimates(out, &estimates)?;
    Ok(estimates)
}

/// The `n` areas with the most respondents, ties broken by area order.
pub fn most_sampled_areas(data: &SurveyDataset, graph: &SpatialGraph, n: usize) -> Vec<String> {
    let counts = data.area_counts(graph);
    let mut order: Vec<usize> = (0..graph.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(n)
        .map(|k| graph.area_ids()[k].clone())
        .collect()
}

/// Writes `ppc.csv` for `areas`, or for the four most sampled areas when
/// none are given.
pub fn ppc(config: &RunConfig, draws_dir: &Path, out: &Path, areas: &[String]) -> Result<PpcTable> {
    let (manifest, draws, spec) = load_fit(config, draws_dir)?;
    let graph = load_graph(config)?;
    check_areas(&graph, &manifest)?;
    let survey = io::read_survey(&config.resolve(&config.data.survey), &spec.factors, spec.categories)?;
    survey.validate(&graph)?;
    let areas = if areas.is_empty() {
        most_sampled_areas(&survey, &graph, 4)
    } else {
        areas.to_vec()
    };
    let table =
        poststrat::posterior_predictive_check(&draws, &survey, &spec, &graph, &areas, config.mcmc.seed)?;
    for area in &table.excluded {
        warn!("area '{area}' has no respondents and was left out of the check");
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::write_ppc(&out.join("ppc.csv"), &table)?;
    Ok(table)
}

/// Recomputes the convergence report from stored draw files.
pub fn diagnose(config: Option<&RunConfig>, draws_dir: &Path, out: &Path) -> Result<(ConvergenceReport, Vec<String>)> {
    let (manifest, draws) = io::read_draws(draws_dir)?;
    let monitor = match config {
        Some(c) => c.monitor.clone(),
        None => RunConfig::parse(&manifest.config)?.monitor,
    };
    let report = diagnostics::summarize(&draws, &monitor.monitors, monitor.split_rhat)?;
    let warnings = report.threshold_warnings(monitor.rhat_max, monitor.ess_min);
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::write_report(&out.join(io::REPORT_FILE), &report)?;
    Ok((report, warnings))
}

/// Table layout with categories as columns: mean, interval and observed
/// percentage per area.
pub fn format_ppc_table(table: &PpcTable, categories: usize) -> String {
    let mut out = format!("{:<10}", "area");
    for j in 1..=categories {
        out.push_str(&format!(" | {:^24}", format!("category {j}")));
    }
    out.push('\n');
    let mut by_area: Vec<(&str, Vec<&poststrat::PpcRow>)> = Vec::new();
    for row in &table.rows {
        match by_area.last_mut() {
            Some((a, rows)) if *a == row.area => rows.push(row),
            _ => by_area.push((&row.area, vec![row])),
        }
    }
    for (area, rows) in by_area {
        out.push_str(&format!("{area:<10}"));
        for r in rows {
            out.push_str(&format!(
                " | {:>5.1} [{:>5.1},{:>5.1}] {:>5.1}",
                r.pred_mean, r.pred_lo, r.pred_hi, r.observed
            ));
        }
        out.push('\n');
    }
    out
}
