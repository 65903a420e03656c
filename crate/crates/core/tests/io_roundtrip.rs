use std::fs;
use std::path::Path;

use spatial_ordinal::commands::{self, Overrides};
use spatial_ordinal::graph::SpatialGraph;
use spatial_ordinal::io::{self, RunConfig};
use spatial_ordinal::mcmc::{self, McmcConfig};
use spatial_ordinal::synth;

const CONFIG: &str = r#"
[data]
survey = "sim/survey.csv"
adjacency = "sim/adjacency.txt"
population = "sim/population.csv"
output = "fit"

[model]
categories = 4
cut_factors = ["sex"]
additive_factors = ["d"]

[[model.factors]]
name = "sex"
levels = ["M", "F"]

[[model.factors]]
name = "d"
levels = ["x", "y", "z"]

[mcmc]
chains = 2
iterations = 300
burnin = 100
thin = 5
seed = 9

[simulate]
rows = 3
cols = 3
seed = 5

[simulate.design.first_stage]
kind = "per-area"
size = 40
"#;

fn setup(dir: &Path) -> RunConfig {
    let path = dir.join("run.toml");
    fs::write(&path, CONFIG).unwrap();
    RunConfig::load(&path).unwrap()
}

#[test]
fn simulated_files_parse_back_to_originals() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let files = commands::simulate(&config, None, false).unwrap();
    assert_eq!(files.respondents, 9 * 40);

    let sim = config.simulate.as_ref().unwrap();
    let spec = config.model.to_spec().unwrap();
    let graph = SpatialGraph::grid(3, 3).unwrap();
    let (mut truth, pop) = synth::generate_population(&graph, &spec, &sim.truth, sim.seed).unwrap();
    let data = synth::draw_survey(&truth, &pop, &sim.design, sim.seed + 1).unwrap();
    truth.record_sample_gap(&data).unwrap();

    let loaded_graph = commands::load_graph(&config).unwrap();
    assert_eq!(loaded_graph, graph);
    let loaded = io::read_survey(&files.survey, &spec.factors, spec.categories).unwrap();
    assert_eq!(loaded, data);
    let loaded_pop = io::read_population(&files.population, &spec, &graph).unwrap();
    assert_eq!(loaded_pop, pop);
    let loaded_truth = io::read_truth(&files.truth).unwrap();
    for (name, value) in truth.named_values() {
        assert_eq!(loaded_truth[&name], value, "{name}");
    }
}

#[test]
fn simulation_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = commands::simulate(&setup(a.path()), None, false).unwrap();
    let fb = commands::simulate(&setup(b.path()), None, false).unwrap();
    for (x, y) in [
        (&fa.survey, &fb.survey),
        (&fa.population, &fb.population),
        (&fa.adjacency, &fb.adjacency),
        (&fa.truth, &fb.truth),
    ] {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn simulate_refuses_to_overwrite_and_reports_unwritable_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    commands::simulate(&config, None, false).unwrap();
    assert!(commands::simulate(&config, None, false).unwrap_err().is_input());
    commands::simulate(&config, None, true).unwrap();

    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let err = commands::simulate(&config, Some(&blocker.join("sub")), false).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}

#[test]
fn draw_files_round_trip_exactly() {
    let b = synth::benchmark(3).unwrap();
    let config = McmcConfig {
        chains: 2,
        iterations: 60,
        burnin: 20,
        thin: 4,
        ..Default::default()
    };
    let fit = mcmc::run(&b.survey, &b.spec, &b.graph, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (c, chain) in fit.draws.chains.iter().enumerate() {
        let path = io::chain_file(dir.path(), c);
        io::write_chain(&path, &fit.draws.layout, chain).unwrap();
        let mut back = io::read_chain(&path, &fit.draws.layout).unwrap();
        back.blocks = chain.blocks.clone();
        assert_eq!(&back, chain);
    }
}

#[test]
fn fit_writes_outputs_and_guards_directory() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    commands::simulate(&config, None, false).unwrap();
    let outcome = commands::fit(&config, None, false).unwrap();
    assert_eq!(outcome.stored_draws, 2 * 40);
    for name in ["chain_1.csv", "chain_2.csv", "manifest.json", "report.csv"] {
        assert!(outcome.dir.join(name).exists(), "{name}");
    }
    let manifest = io::read_manifest(&outcome.dir).unwrap();
    assert_eq!(manifest.input_hashes.len(), 3);
    assert_eq!(manifest.spec_hash, io::spec_hash(&config.model.to_spec().unwrap()));
    let header = fs::read_to_string(outcome.dir.join("chain_1.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("iter,kappa[1][1],"));
    assert!(header.ends_with(",theta[9],sigma,lambda,loglik"));

    let err = commands::fit(&config, None, false).unwrap_err();
    assert!(err.to_string().contains("--force"));
    commands::fit(&config, None, true).unwrap();

    let est = commands::poststratify(&config, &outcome.dir, &outcome.dir).unwrap();
    assert_eq!(est.estimates.len(), 9 * 4);
    assert!(outcome.dir.join("area_estimates.csv").exists());
    assert!(outcome.dir.join("relevance.csv").exists());

    let table = commands::ppc(&config, &outcome.dir, &outcome.dir, &[]).unwrap();
    assert_eq!(table.rows.len(), 4 * 4);

    let (report, _) = commands::diagnose(None, &outcome.dir, &outcome.dir).unwrap();
    assert_eq!(report.rows, outcome.report.rows);
}

#[test]
fn poststratify_rejects_other_model_and_missing_population() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    commands::simulate(&config, None, false).unwrap();
    let outcome = commands::fit(&config, None, false).unwrap();

    let mut other = config.clone();
    other.model.alpha_constraint = spatial_ordinal::AlphaConstraint::Corner;
    let err = commands::poststratify(&other, &outcome.dir, &outcome.dir).unwrap_err();
    assert!(err.to_string().contains("different model"));

    let mut missing = config.clone();
    missing.data.population = Some("nowhere.csv".into());
    assert!(commands::poststratify(&missing, &outcome.dir, &outcome.dir).is_err());
}

#[test]
fn survey_area_missing_from_adjacency_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let files = commands::simulate(&config, None, false).unwrap();
    let text = fs::read_to_string(&files.survey).unwrap();
    fs::write(&files.survey, text.replacen(",A005,", ",Z999,", 1)).unwrap();
    let err = commands::fit(&config, None, false).unwrap_err();
    assert!(err.is_input());
    assert!(err.to_string().contains("Z999"), "{err}");
}

#[test]
fn overrides_apply_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(dir.path());
    Overrides {
        seed: Some(77),
        chains: Some(3),
        thin: Some(2),
        ..Default::default()
    }
    .apply(&mut config)
    .unwrap();
    assert_eq!(config.mcmc.seed, 77);
    assert_eq!(config.simulate.as_ref().unwrap().seed, 77);
    assert_eq!(config.mcmc.chains, 3);
    let bad = Overrides {
        burnin: Some(10_000),
        ..Default::default()
    };
    assert!(bad.apply(&mut config).is_err());
}
