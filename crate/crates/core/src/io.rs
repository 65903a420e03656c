//! Delimited-text file formats and the run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::mcmc::{BlockSummary, ChainDraws, McmcConfig, MonitorConfig, ParamLayout, PosteriorDraws};
use crate::model::{AlphaConstraint, Factor, ModelSpec, Respondent, SurveyDataset};
use crate::poststrat::{AreaEstimates, CellKey, PopulationRow, PopulationTable, PpcTable};
use crate::diagnostics::ConvergenceReport;
use crate::synth::{SurveyDesign, SyntheticTruth, TruthConfig};

pub const SURVEY_ID: &str = "id";
pub const SURVEY_AREA: &str = "area";
pub const SURVEY_OUTCOME: &str = "outcome";
pub const POP_COUNT: &str = "count";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub survey: PathBuf,
    pub adjacency: PathBuf,
    #[serde(default)]
    pub population: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub categories: usize,
    pub factors: Vec<Factor>,
    #[serde(default)]
    pub cut_factors: Vec<String>,
    #[serde(default)]
    pub additive_factors: Vec<String>,
    #[serde(default = "default_constraint")]
    pub alpha_constraint: AlphaConstraint,
    #[serde(default = "default_true")]
    pub include_spatial: bool,
}

fn default_constraint() -> AlphaConstraint {
    AlphaConstraint::ZeroSum
}

fn default_true() -> bool {
    true
}

impl ModelConfig {
    pub fn to_spec(&self) -> Result<ModelSpec> {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub truth: TruthConfig,
    pub design: SurveyDesign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataPaths,
    pub model: ModelConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub monitor: MonitorConfig,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    /// Require the adjacency and population area sets to coincide.
    #[serde(default)]
    pub strict_areas: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::input(format!("invalid config: {e}")))?;
        config.model.to_spec()?;
        config.mcmc.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Resolves a configured path against the config file's directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn spec_hash(spec: &ModelSpec) -> String {
    sha256_hex(serde_json::to_string(spec).expect("spec serializes").as_bytes())
}

/// Adjacency file contents: declared areas in order of first appearance, and
/// neighbor pairs. A line with a single id declares an area without
/// neighbors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Adjacency {
    pub areas: Vec<String>,
    pub edges: Vec<(String, String)>,
}

pub fn read_adjacency(path: &Path) -> Result<Adjacency> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut adj = Adjacency::default();
    let mut seen = std::collections::HashSet::new();
    let mut declare = |id: &str, adj: &mut Adjacency| {
        if seen.insert(id.to_string()) {
            adj.areas.push(id.to_string());
        }
    };
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parts: Vec<&str> = content.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [a] if !a.is_empty() => declare(a, &mut adj),
            [a, b] if !a.is_empty() && !b.is_empty() => {
                declare(a, &mut adj);
                declare(b, &mut adj);
                adj.edges.push((a.to_string(), b.to_string()));
            }
            _ => {
                return Err(Error::input(format!(
                    "{}:{}: expected 'areaA,areaB', got '{content}'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(adj)
}

pub fn write_adjacency(path: &Path, graph: &SpatialGraph) -> Result<()> {
    let mut out = String::from("# areas\n");
    for id in graph.area_ids() {
        out.push_str(id);
        out.push('\n');
    }
    out.push_str("# contiguity pairs\n");
    for &(i, j) in graph.edges() {
        out.push_str(&format!("{},{}\n", graph.area_ids()[i], graph.area_ids()[j]));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::input(format!("{}: missing column '{name}'", path.display())))
}

pub fn read_survey(path: &Path, factors: &[Factor], categories: usize) -> Result<SurveyDataset> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let id_col = column(&headers, SURVEY_ID, path)?;
    let area_col = column(&headers, SURVEY_AREA, path)?;
    let outcome_col = column(&headers, SURVEY_OUTCOME, path)?;
    let factor_cols = factors
        .iter()
        .map(|f| column(&headers, &f.name, path))
        .collect::<Result<Vec<_>>>()?;

    let mut data = SurveyDataset::new(categories, factors.to_vec());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let row = line + 2;
        let levels = factors
            .iter()
            .zip(&factor_cols)
            .map(|(f, &c)| {
                let label = &record[c];
                f.level_index(label).ok_or_else(|| {
                    Error::input(format!(
                        "{}:{row}: unknown level '{label}' for factor '{}'",
                        path.display(),
                        f.name
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let outcome: usize = record[outcome_col].parse().map_err(|_| {
            Error::input(format!(
                "{}:{row}: outcome '{}' is not an integer",
                path.display(),
                &record[outcome_col]
            ))
        })?;
        if outcome < 1 || outcome > categories {
            return Err(Error::input(format!(
                "{}:{row}: outcome {outcome} outside 1..={categories}",
                path.display()
            )));
        }
        data.records.push(Respondent {
            id: record[id_col].to_string(),
            area: record[area_col].to_string(),
            levels,
            outcome,
        });
    }
    Ok(data)
}

pub fn write_survey(path: &Path, data: &SurveyDataset) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec![SURVEY_ID.to_string(), SURVEY_AREA.to_string()];
    header.extend(data.factors.iter().map(|f| f.name.clone()));
    header.push(SURVEY_OUTCOME.to_string());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for r in &data.records {
        let mut row = vec![r.id.clone(), r.area.clone()];
        row.extend(
            data.factors
                .iter()
                .zip(&r.levels)
                .map(|(f, &l)| f.levels[l].clone()),
        );
        row.push(r.outcome.to_string());
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Area ids listed in a population file, in order of first appearance.
pub fn population_areas(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let area_col = column(&headers, SURVEY_AREA, path)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        if seen.insert(record[area_col].to_string()) {
            out.push(record[area_col].to_string());
        }
    }
    Ok(out)
}

/// Reads a population table. All cut factors must be present; additive
/// factors are either all present or all absent.
pub fn read_population(path: &Path, spec: &ModelSpec, graph: &SpatialGraph) -> Result<PopulationTable> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let area_col = column(&headers, SURVEY_AREA, path)?;
    let count_col = column(&headers, POP_COUNT, path)?;
    let cut_cols = spec
        .cut_factor_indices()
        .iter()
        .map(|&i| column(&headers, &spec.factors[i].name, path))
        .collect::<Result<Vec<_>>>()?;
    let add_cols: Vec<Option<usize>> = spec
        .additive_factor_indices()
        .iter()
        .map(|&i| headers.iter().position(|h| h == spec.factors[i].name))
        .collect();
    let with_additive = add_cols.iter().all(Option::is_some);
    if !with_additive && add_cols.iter().any(Option::is_some) {
        return Err(Error::input(format!(
            "{}: additive factor columns must be all present or all absent",
            path.display()
        )));
    }

    let level = |factor: usize, label: &str, row: usize| -> Result<usize> {
        spec.factors[factor].level_index(label).ok_or_else(|| {
            Error::input(format!(
                "{}:{row}: unknown level '{label}' for factor '{}'",
                path.display(),
                spec.factors[factor].name
            ))
        })
    };

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let row = line + 2;
        let area = graph.area_index(&record[area_col]).ok_or_else(|| {
            Error::input(format!("{}:{row}: unknown area '{}'", path.display(), &record[area_col]))
        })?;
        let mut levels = vec![0; spec.factors.len()];
        for (&i, &c) in spec.cut_factor_indices().iter().zip(&cut_cols) {
            levels[i] = level(i, &record[c], row)?;
        }
        let additive = if with_additive {
            Some(
                spec.additive_factor_indices()
                    .iter()
                    .zip(&add_cols)
                    .map(|(&i, c)| level(i, &record[c.unwrap()], row))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let count: f64 = record[count_col].parse().map_err(|_| {
            Error::input(format!("{}:{row}: count '{}' is not a number", path.display(), &record[count_col]))
        })?;
        rows.push(PopulationRow {
            key: CellKey {
                area,
                group: spec.group_of(&levels),
                additive,
            },
            count,
        });
    }
    PopulationTable::new(rows, graph.len())
}

pub fn write_population(
    path: &Path,
    pop: &PopulationTable,
    spec: &ModelSpec,
    graph: &SpatialGraph,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    let with_additive = pop.rows.iter().all(|r| r.key.additive.is_some());
    let mut header = vec![SURVEY_AREA.to_string()];
    header.extend(spec.cut_factor_indices().iter().map(|&i| spec.factors[i].name.clone()));
    if with_additive {
        header.extend(
            spec.additive_factor_indices()
                .iter()
                .map(|&i| spec.factors[i].name.clone()),
        );
    }
    header.push(POP_COUNT.to_string());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for r in &pop.rows {
        let mut row = vec![graph.area_ids()[r.key.area].clone()];
        for (slot, &i) in spec.cut_factor_indices().iter().enumerate() {
            row.push(spec.factors[i].levels[spec.group_levels(r.key.group)[slot]].clone());
        }
        if let (true, Some(add)) = (with_additive, &r.key.additive) {
            for (&i, &l) in spec.additive_factor_indices().iter().zip(add) {
                row.push(spec.factors[i].levels[l].clone());
            }
        }
        row.push(r.count.to_string());
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_truth(path: &Path, truth: &SyntheticTruth) -> Result<()> {
    let mut out = String::from("parameter,value\n");
    for (name, value) in truth.named_values() {
        out.push_str(&format!("{name},{value}\n"));
    }
    if let Some(gap) = truth.sample_constraint_gap {
        out.push_str(&format!(
            "# identifiability: largest weighted mean of true theta under sample constraints = {gap}\n"
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv_reader(path)?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let value: f64 = record[1]
            .parse()
            .map_err(|_| Error::input(format!("{}: bad value '{}'", path.display(), &record[1])))?;
        out.insert(record[0].to_string(), value);
    }
    Ok(out)
}

pub fn chain_file(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("chain_{}.csv", chain + 1))
}

/// Writes one chain's stored draws. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_chain(path: &Path, layout: &ParamLayout, chain: &ChainDraws) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut header = vec!["iter".to_string()];
    header.extend(layout.names());
    header.push("loglik".into());
    let io_err = |e| Error::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for ((iter, row), ll) in chain.iterations.iter().zip(&chain.rows).zip(&chain.loglik) {
        write!(out, "{iter}").map_err(io_err)?;
        for v in row {
            write!(out, ",{v}").map_err(io_err)?;
        }
        writeln!(out, ",{ll}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_chain(path: &Path, layout: &ParamLayout) -> Result<ChainDraws> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let expected = layout.width() + 2;
    if headers.len() != expected {
        return Err(Error::input(format!(
            "{}: expected {expected} columns, found {}",
            path.display(),
            headers.len()
        )));
    }
    let mut chain = ChainDraws {
        iterations: Vec::new(),
        rows: Vec::new(),
        loglik: Vec::new(),
        blocks: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::input(format!("{}: bad number '{s}'", path.display())))
        };
        chain.iterations.push(
            record[0]
                .parse()
                .map_err(|_| Error::input(format!("{}: bad iteration '{}'", path.display(), &record[0])))?,
        );
        let values = (1..expected - 1)
            .map(|i| parse(&record[i]))
            .collect::<Result<Vec<_>>>()?;
        chain.rows.push(values);
        chain.loglik.push(parse(&record[expected - 1])?);
    }
    Ok(chain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainManifest {
    pub chain: usize,
    pub stored: usize,
    pub blocks: Vec<BlockSummary>,
}

/// Everything needed to reproduce and reinterpret a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    pub config: String,
    pub spec: ModelSpec,
    pub spec_hash: String,
    pub layout: ParamLayout,
    pub input_hashes: BTreeMap<String, String>,
    pub area_ids: Vec<String>,
    pub group_labels: Vec<String>,
    pub constraint_rank: usize,
    pub dropped_constraints: Vec<String>,
    pub chains: Vec<ChainManifest>,
    pub warnings: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.csv";

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    manifest.spec = manifest.spec.revalidated()?;
    Ok(manifest)
}

/// Loads every chain listed in the manifest.
pub fn read_draws(dir: &Path) -> Result<(RunManifest, PosteriorDraws)> {
    let manifest = read_manifest(dir)?;
    let chains = manifest
        .chains
        .iter()
        .map(|c| {
            let mut chain = read_chain(&chain_file(dir, c.chain), &manifest.layout)?;
            chain.blocks = c.blocks.clone();
            Ok(chain)
        })
        .collect::<Result<Vec<_>>>()?;
    let draws = PosteriorDraws {
        layout: manifest.layout.clone(),
        chains,
    };
    Ok((manifest, draws))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn write_report(path: &Path, report: &ConvergenceReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["parameter", "rhat", "ess", "ess_degenerate", "mean", "sd", "q2.5", "q50", "q97.5"])
        .map_err(|e| Error::csv(path, e))?;
    for r in &report.rows {
        w.write_record([
            r.name.clone(),
            opt(r.rhat),
            r.ess.to_string(),
            r.ess_degenerate.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.q025.to_string(),
            r.q50.to_string(),
            r.q975.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_area_estimates(dir: &Path, est: &AreaEstimates) -> Result<()> {
    let path = dir.join("area_estimates.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["area", "category", "mean", "sd", "q2.5", "q50", "q97.5"])
        .map_err(|e| Error::csv(&path, e))?;
    for e in &est.estimates {
        w.write_record([
            e.area.clone(),
            e.category.to_string(),
            e.mean.to_string(),
            e.sd.to_string(),
            e.q025.to_string(),
            e.q50.to_string(),
            e.q975.to_string(),
        ])
        .map_err(|err| Error::csv(&path, err))?;
    }
    for area in &est.not_applicable {
        w.write_record([area.as_str(), "NA", "NA", "NA", "NA", "NA", "NA"])
            .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("relevance.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["area", "prob", "flag"]).map_err(|e| Error::csv(&path, e))?;
    for r in &est.relevance {
        w.write_record([r.area.clone(), r.prob.to_string(), r.flag.to_string()])
            .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

pub fn write_ppc(path: &Path, table: &PpcTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["area", "category", "pred_mean", "pred_lo", "pred_hi", "observed"])
        .map_err(|e| Error::csv(path, e))?;
    for r in &table.rows {
        w.write_record([
            r.area.clone(),
            r.category.to_string(),
            r.pred_mean.to_string(),
            r.pred_lo.to_string(),
            r.pred_hi.to_string(),
            r.observed.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacency_comments_and_isolated_areas() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adj.txt");
        fs::write(&path, "# header\na, b  # trailing\n\nb,c\nd\n").unwrap();
        let adj = read_adjacency(&path).unwrap();
        assert_eq!(adj.areas, vec!["a", "b", "c", "d"]);
        assert_eq!(adj.edges.len(), 2);
    }

    #[test]
    fn adjacency_malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adj.txt");
        fs::write(&path, "a,b,c\n").unwrap();
        assert!(read_adjacency(&path).unwrap_err().is_input());
    }

    #[test]
    fn survey_unknown_level_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        fs::write(&path, "id,area,sex,outcome\n1,a,M,2\n2,a,X,1\n").unwrap();
        let factors = vec![Factor::new("sex", &["M", "F"])];
        let err = read_survey(&path, &factors, 3).unwrap_err();
        assert!(err.to_string().contains("unknown level 'X'"));
    }

    #[test]
    fn survey_outcome_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        fs::write(&path, "id,area,outcome\n1,a,4\n").unwrap();
        assert!(read_survey(&path, &[], 3).unwrap_err().is_input());
    }

    #[test]
    fn config_defaults() {
        let text = r#"
            [data]
            survey = "s.csv"
            adjacency = "a.txt"

            [model]
            categories = 3
            factors = [{ name = "d", levels = ["x", "y"] }]
            additive_factors = ["d"]
        "#;
        let config = RunConfig::parse(text).unwrap();
        assert_eq!(config.mcmc, McmcConfig::default());
        assert_eq!(config.monitor.rhat_max, 1.10);
        assert_eq!(config.model.alpha_constraint, AlphaConstraint::ZeroSum);
        let again = RunConfig::parse(&config.to_toml()).unwrap();
        assert_eq!(again, config);
    }

    #[test]
    fn config_rejects_unknown_factor() {
        let text = r#"
            [data]
            survey = "s.csv"
            adjacency = "a.txt"
            [model]
            categories = 3
            factors = []
            cut_factors = ["age"]
        "#;
        assert!(RunConfig::parse(text).unwrap_err().is_input());
    }
}
