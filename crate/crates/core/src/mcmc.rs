//! Adaptive Metropolis-within-Gibbs sampler.
//!
//! Every sweep updates, in a fixed order, the stick proportions of each
//! cut-point group, the free effects of each additive factor, the spatial
//! effects, `sigma`, a joint rescaling of `(sigma, theta)`, and `lambda`. All
//! updates are Gaussian random walks; proposal scales adapt toward a target
//! acceptance rate during burn-in and are frozen afterwards.

use std::collections::BTreeMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::cutpoints::{log_prior_omega, prior_mean_sticks, sticks_to_kappa, OMEGA_EPS};
use crate::diagnostics::{self, ConvergenceReport};
use crate::error::{Error, Result};
use crate::graph::{LcarHyper, QuadStats, SpatialGraph, DEFAULT_SIGMA_MAX, LAMBDA_EPS};
use crate::model::{
    compile_cells, loglik_subset, loglik_unchecked, AlphaConstraint, CellTable, ModelSpec,
    ParameterState, SurveyDataset,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Iterations between proposal-scale adaptations during burn-in.
    pub adapt_window: usize,
    pub target_accept_scalar: f64,
    pub target_accept_vector: f64,
    pub sigma_max: f64,
    /// Random-walk updates of the spatial block per sweep.
    pub theta_substeps: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chains: 5,
            iterations: 6000,
            burnin: 1000,
            thin: 25,
            seed: 20240101,
            adapt_window: 50,
            target_accept_scalar: 0.44,
            target_accept_vector: 0.234,
            sigma_max: DEFAULT_SIGMA_MAX,
            theta_substeps: 5,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::input("chains must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::input("thin must be at least 1"));
        }
        if self.burnin >= self.iterations {
            return Err(Error::input(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burnin, self.iterations
            )));
        }
        if self.stored_per_chain() == 0 {
            return Err(Error::input("configuration stores no draws"));
        }
        if self.adapt_window == 0 || self.theta_substeps == 0 {
            return Err(Error::input("adapt_window and theta_substeps must be positive"));
        }
        if !(self.sigma_max > 0.0 && self.sigma_max.is_finite()) {
            return Err(Error::input("sigma_max must be positive"));
        }
        Ok(())
    }

    pub fn stored_per_chain(&self) -> usize {
        self.iterations.saturating_sub(self.burnin) / self.thin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    Omega(usize),
    Alpha(usize),
    Theta,
    Sigma,
    /// Joint move `sigma -> sigma'`, `theta -> theta * sigma' / sigma`.
    SpatialScale,
    Lambda,
}

impl Block {
    pub fn name(&self) -> String {
        match self {
            Block::Omega(g) => format!("omega[{}]", g + 1),
            Block::Alpha(f) => format!("alpha[{}]", f + 1),
            Block::Theta => "theta".into(),
            Block::Sigma => "sigma".into(),
            Block::SpatialScale => "sigma_theta_scale".into(),
            Block::Lambda => "lambda".into(),
        }
    }

    fn is_vector(&self) -> bool {
        matches!(self, Block::Omega(_) | Block::Alpha(_) | Block::Theta)
    }
}

/// Immutable inputs shared by all chains.
#[derive(Debug, Clone)]
pub struct Target<'a> {
    pub spec: &'a ModelSpec,
    pub cells: &'a CellTable,
    pub graph: &'a SpatialGraph,
    pub constraints: &'a ConstraintSet,
    pub sigma_max: f64,
    /// Spectrum of `R` restricted to the constraint subspace.
    restricted_spectrum: Vec<f64>,
}

/// A parameter state with cached log-likelihood and LCAR terms.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub params: ParameterState,
    pub loglik: f64,
    quad: QuadStats,
}

pub fn init_state(spec: &ModelSpec, graph: &SpatialGraph, _seed: u64) -> ParameterState {
    let omega = vec![prior_mean_sticks(spec.categories); spec.n_groups()];
    let kappa = omega
        .iter()
        .map(|w| sticks_to_kappa(w).expect("prior means are interior"))
        .collect();
    ParameterState {
        omega,
        kappa,
        alpha: spec.additive_levels().iter().map(|&h| vec![0.0; h]).collect(),
        theta: vec![0.0; graph.len()],
        hyper: LcarHyper {
            sigma: 0.1,
            lambda: 0.5,
        },
    }
}

/// Free coordinates of an additive effect vector (levels `2..=H`).
fn alpha_free(alpha: &[f64]) -> &[f64] {
    &alpha[1..]
}

fn alpha_full(free: &[f64], constraint: AlphaConstraint) -> Vec<f64> {
    let first = match constraint {
        AlphaConstraint::Corner => 0.0,
        AlphaConstraint::ZeroSum => -free.iter().sum::<f64>(),
    };
    std::iter::once(first).chain(free.iter().copied()).collect()
}

impl<'a> Target<'a> {
    pub fn new(
        spec: &'a ModelSpec,
        cells: &'a CellTable,
        graph: &'a SpatialGraph,
        constraints: &'a ConstraintSet,
        sigma_max: f64,
    ) -> Self {
        let restricted_spectrum = if spec.include_spatial {
            constraints
                .restricted_eigenvalues(&graph.structure_matrix())
                .into_iter()
                .map(|e| e.max(0.0))
                .collect()
        } else {
            Vec::new()
        };
        Target {
            spec,
            cells,
            graph,
            constraints,
            sigma_max,
            restricted_spectrum,
        }
    }

    /// Blocks updated by one sweep, in sweep order.
    pub fn blocks(&self) -> Vec<Block> {
        let mut blocks: Vec<Block> = (0..self.spec.n_groups()).map(Block::Omega).collect();
        for (f, &h) in self.spec.additive_levels().iter().enumerate() {
            if h > 1 {
                blocks.push(Block::Alpha(f));
            }
        }
        if self.spec.include_spatial {
            blocks.extend([Block::Theta, Block::Sigma, Block::SpatialScale, Block::Lambda]);
        }
        blocks
    }

    fn block_dim(&self, block: Block) -> usize {
        match block {
            Block::Omega(_) => self.spec.categories - 1,
            Block::Alpha(f) => self.spec.additive_levels()[f] - 1,
            Block::Theta => self.graph.len(),
            _ => 1,
        }
    }

    /// LCAR log-density of theta restricted to the constraint subspace, up
    /// to a constant. The full-rank normalization would add a `sigma^-rank`
    /// factor that makes the posterior improper near zero.
    fn lcar(&self, quad: &QuadStats, hyper: &LcarHyper) -> f64 {
        if !self.spec.include_spatial {
            return 0.0;
        }
        let lambda = hyper.clamped_lambda();
        let log_det: f64 = self
            .restricted_spectrum
            .iter()
            .map(|&e| (lambda * e + 1.0 - lambda).ln())
            .sum();
        let form = (lambda * quad.edge_sq + (1.0 - lambda) * quad.sum_sq) / (hyper.sigma * hyper.sigma);
        0.5 * log_det - self.restricted_spectrum.len() as f64 * hyper.sigma.ln() - 0.5 * form
    }

    fn in_support(&self, hyper: &LcarHyper) -> bool {
        hyper.sigma > 0.0
            && hyper.sigma <= self.sigma_max
            && hyper.lambda > LAMBDA_EPS
            && hyper.lambda < 1.0 - LAMBDA_EPS
    }

    /// Full log-posterior up to a constant.
    pub fn log_posterior(&self, state: &ChainState) -> f64 {
        let p = &state.params;
        if !self.in_support(&p.hyper) {
            return f64::NEG_INFINITY;
        }
        let prior_kappa: f64 = p.omega.iter().map(|w| log_prior_omega(w)).sum();
        state.loglik + prior_kappa + self.lcar(&state.quad, &p.hyper)
    }

    pub fn chain_state(&self, params: ParameterState) -> Result<ChainState> {
        if params.theta.len() != self.graph.len() {
            return Err(Error::input("theta length does not match the graph"));
        }
        let loglik = loglik_unchecked(&params, self.cells);
        let quad = self.graph.quadratic_stats(&params.theta);
        let state = ChainState {
            params,
            loglik,
            quad,
        };
        if !self.log_posterior(&state).is_finite() {
            return Err(Error::numeric("log-posterior is not finite at the initial state"));
        }
        Ok(state)
    }

    /// One Metropolis-Hastings update of `block`.
    ///
    /// `shape` holds per-coordinate proposal multipliers for vector blocks.
    /// Proposals outside the prior support are rejected.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        block: Block,
        rng: &mut R,
        scale: f64,
        shape: Option<&[f64]>,
    ) -> bool {
        if scale == 0.0 {
            return true;
        }
        let mut noise = |i: usize| -> f64 {
            let z: f64 = rng.sample(StandardNormal);
            scale * shape.map_or(1.0, |s| s[i]) * z
        };
        let p = &state.params;
        match block {
            Block::Omega(g) => {
                let proposal: Vec<f64> = p.omega[g]
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w + noise(i))
                    .collect();
                if proposal.iter().any(|&w| !(w > OMEGA_EPS && w < 1.0 - OMEGA_EPS)) {
                    return false;
                }
                let Ok(kappa) = sticks_to_kappa(&proposal) else {
                    return false;
                };
                let subset = self.cells.group_cells(g);
                let old_ll = loglik_subset(p, self.cells, subset);
                let mut next = p.clone();
                next.omega[g] = proposal;
                next.kappa[g] = kappa;
                let new_ll = loglik_subset(&next, self.cells, subset);
                let delta = new_ll - old_ll + log_prior_omega(&next.omega[g])
                    - log_prior_omega(&p.omega[g]);
                if accept(rng, delta) {
                    state.loglik += new_ll - old_ll;
                    state.params = next;
                    return true;
                }
                false
            }
            Block::Alpha(f) => {
                let free: Vec<f64> = alpha_free(&p.alpha[f])
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a + noise(i))
                    .collect();
                let mut next = p.clone();
                next.alpha[f] = alpha_full(&free, self.spec.alpha_constraint);
                let new_ll = loglik_unchecked(&next, self.cells);
                if accept(rng, new_ll - state.loglik) {
                    state.loglik = new_ll;
                    state.params = next;
                    return true;
                }
                false
            }
            Block::Theta => {
                let sigma = p.hyper.sigma;
                let mut theta: Vec<f64> = p
                    .theta
                    .iter()
                    .enumerate()
                    .map(|(i, t)| t + sigma * noise(i))
                    .collect();
                self.constraints.project_in_place(&mut theta);
                let mut next = p.clone();
                next.theta = theta;
                let new_ll = loglik_unchecked(&next, self.cells);
                let new_quad = self.graph.quadratic_stats(&next.theta);
                let delta = new_ll - state.loglik + self.lcar(&new_quad, &p.hyper)
                    - self.lcar(&state.quad, &p.hyper);
                if accept(rng, delta) {
                    state.loglik = new_ll;
                    state.quad = new_quad;
                    state.params = next;
                    return true;
                }
                false
            }
            Block::Sigma => {
                let hyper = LcarHyper {
                    sigma: p.hyper.sigma + noise(0),
                    ..p.hyper
                };
                if !self.in_support(&hyper) {
                    return false;
                }
                let delta = self.lcar(&state.quad, &hyper) - self.lcar(&state.quad, &p.hyper);
                if accept(rng, delta) {
                    state.params.hyper = hyper;
                    return true;
                }
                false
            }
            Block::Lambda => {
                let hyper = LcarHyper {
                    lambda: p.hyper.lambda + noise(0),
                    ..p.hyper
                };
                if !self.in_support(&hyper) {
                    return false;
                }
                let delta = self.lcar(&state.quad, &hyper) - self.lcar(&state.quad, &p.hyper);
                if accept(rng, delta) {
                    state.params.hyper = hyper;
                    return true;
                }
                false
            }
            Block::SpatialScale => {
                let hyper = LcarHyper {
                    sigma: p.hyper.sigma + noise(0),
                    ..p.hyper
                };
                if !self.in_support(&hyper) {
                    return false;
                }
                let ratio = hyper.sigma / p.hyper.sigma;
                let mut next = p.clone();
                next.hyper = hyper;
                next.theta.iter_mut().for_each(|t| *t *= ratio);
                let new_ll = loglik_unchecked(&next, self.cells);
                let new_quad = state.quad.scaled(ratio);
                // Jacobian of the rescaling restricted to the constraint subspace.
                let jacobian = self.constraints.free_dim() as f64 * ratio.ln();
                let delta = new_ll - state.loglik + self.lcar(&new_quad, &hyper)
                    - self.lcar(&state.quad, &p.hyper)
                    + jacobian;
                if accept(rng, delta) {
                    state.loglik = new_ll;
                    state.quad = new_quad;
                    state.params = next;
                    return true;
                }
                false
            }
        }
    }
}

fn accept<R: Rng + ?Sized>(rng: &mut R, log_ratio: f64) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    if log_ratio >= 0.0 {
        // Still consume a uniform so the stream does not depend on the branch.
        let _: f64 = rng.random();
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// Proposal tuning state of one block.
#[derive(Debug, Clone)]
struct Adapter {
    log_scale: f64,
    shape: Option<Vec<f64>>,
    target: f64,
    window_accepted: u32,
    window_tried: u32,
    windows: u32,
    tried: u64,
    accepted: u64,
    moments: Option<Moments>,
}

/// Running per-coordinate mean and variance.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Moments {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: impl Iterator<Item = f64>) {
        self.n += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / self.n;
            *s += d * (v - *m);
        }
    }

    fn sds(&self) -> Option<Vec<f64>> {
        if self.n < 20.0 {
            return None;
        }
        let sds: Vec<f64> = self.m2.iter().map(|s| (s / (self.n - 1.0)).sqrt()).collect();
        if sds.iter().all(|s| s.is_finite() && *s > 0.0) {
            Some(sds)
        } else {
            None
        }
    }
}

const INITIAL_SCALES: [(&str, f64); 6] = [
    ("omega", 0.05),
    ("alpha", 0.05),
    ("theta", 0.3),
    ("sigma", 0.05),
    ("scale", 0.05),
    ("lambda", 0.2),
];

impl Adapter {
    fn new(block: Block, dim: usize, config: &McmcConfig) -> Self {
        let key = match block {
            Block::Omega(_) => "omega",
            Block::Alpha(_) => "alpha",
            Block::Theta => "theta",
            Block::Sigma => "sigma",
            Block::SpatialScale => "scale",
            Block::Lambda => "lambda",
        };
        let initial = INITIAL_SCALES.iter().find(|(k, _)| *k == key).unwrap().1;
        let vector = block.is_vector();
        Adapter {
            log_scale: initial.ln(),
            shape: vector.then(|| vec![1.0; dim]),
            target: if vector && dim > 1 {
                config.target_accept_vector
            } else {
                config.target_accept_scalar
            },
            window_accepted: 0,
            window_tried: 0,
            windows: 0,
            tried: 0,
            accepted: 0,
            moments: vector.then(|| Moments::new(dim)),
        }
    }

    fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    fn record(&mut self, accepted: bool) {
        self.window_tried += 1;
        self.tried += 1;
        if accepted {
            self.window_accepted += 1;
            self.accepted += 1;
        }
    }

    /// Robbins-Monro step on the log scale plus a diagonal shape refresh.
    fn adapt(&mut self) {
        if self.window_tried == 0 {
            return;
        }
        self.windows += 1;
        let rate = self.window_accepted as f64 / self.window_tried as f64;
        let gain = 2.0 / (self.windows as f64).sqrt();
        self.log_scale += gain * (rate - self.target);
        self.window_accepted = 0;
        self.window_tried = 0;
        if let (Some(shape), Some(sds)) = (
            self.shape.as_mut(),
            self.moments.as_ref().and_then(Moments::sds),
        ) {
            let log_mean = sds.iter().map(|s| s.ln()).sum::<f64>() / sds.len() as f64;
            for (slot, s) in shape.iter_mut().zip(&sds) {
                *slot = (s.ln() - log_mean).exp();
            }
        }
    }

    fn reset_counts(&mut self) {
        self.window_accepted = 0;
        self.window_tried = 0;
        self.tried = 0;
        self.accepted = 0;
    }

    fn acceptance_rate(&self) -> f64 {
        if self.tried == 0 {
            0.0
        } else {
            self.accepted as f64 / self.tried as f64
        }
    }
}

/// Column layout of stored draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub groups: usize,
    pub categories: usize,
    pub alpha_levels: Vec<usize>,
    pub areas: usize,
}

impl ParamLayout {
    pub fn new(spec: &ModelSpec, graph: &SpatialGraph) -> Self {
        ParamLayout {
            groups: spec.n_groups(),
            categories: spec.categories,
            alpha_levels: spec.additive_levels(),
            areas: graph.len(),
        }
    }

    /// Parameter names, excluding the trailing `loglik` column.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for g in 0..self.groups {
            for j in 0..self.categories - 1 {
                names.push(format!("kappa[{}][{}]", g + 1, j + 1));
            }
        }
        for (f, &h) in self.alpha_levels.iter().enumerate() {
            for l in 0..h {
                names.push(format!("alpha[{}][{}]", f + 1, l + 1));
            }
        }
        for k in 0..self.areas {
            names.push(format!("theta[{}]", k + 1));
        }
        names.push("sigma".into());
        names.push("lambda".into());
        names
    }

    pub fn width(&self) -> usize {
        self.groups * (self.categories - 1)
            + self.alpha_levels.iter().sum::<usize>()
            + self.areas
            + 2
    }

    pub fn theta_offset(&self) -> usize {
        self.groups * (self.categories - 1) + self.alpha_levels.iter().sum::<usize>()
    }

    pub fn pack(&self, state: &ParameterState) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.width());
        state.kappa.iter().for_each(|k| row.extend_from_slice(k));
        state.alpha.iter().for_each(|a| row.extend_from_slice(a));
        row.extend_from_slice(&state.theta);
        row.push(state.hyper.sigma);
        row.push(state.hyper.lambda);
        row
    }

    /// Rebuilds a parameter state from a packed row. Stick proportions are
    /// recovered from the cut points.
    pub fn unpack(&self, row: &[f64]) -> Result<ParameterState> {
        if row.len() < self.width() {
            return Err(Error::input("draw row is shorter than the parameter layout"));
        }
        let cuts = self.categories - 1;
        let mut at = 0;
        let mut kappa = Vec::with_capacity(self.groups);
        let mut omega = Vec::with_capacity(self.groups);
        for _ in 0..self.groups {
            let k = row[at..at + cuts].to_vec();
            let delta = crate::cutpoints::kappa_to_delta(&k)?;
            omega.push(crate::cutpoints::delta_to_sticks(&delta)?);
            kappa.push(k);
            at += cuts;
        }
        let mut alpha = Vec::with_capacity(self.alpha_levels.len());
        for &h in &self.alpha_levels {
            alpha.push(row[at..at + h].to_vec());
            at += h;
        }
        let theta = row[at..at + self.areas].to_vec();
        at += self.areas;
        Ok(ParameterState {
            omega,
            kappa,
            alpha,
            theta,
            hyper: LcarHyper {
                sigma: row[at],
                lambda: row[at + 1],
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub block: String,
    pub final_scale: f64,
    pub acceptance_rate: f64,
}

/// Stored draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub iterations: Vec<usize>,
    /// Packed parameter rows, see [`ParamLayout::pack`].
    pub rows: Vec<Vec<f64>>,
    pub loglik: Vec<f64>,
    pub blocks: Vec<BlockSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub layout: ParamLayout,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn names(&self) -> Vec<String> {
        self.layout.names()
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.rows.len()).sum()
    }

    /// Column `col` of every chain.
    pub fn column(&self, col: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.rows.iter().map(|r| r[col]).collect())
            .collect()
    }

    /// All stored rows across chains, chain-major.
    pub fn rows(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flat_map(|c| c.rows.iter())
    }

    pub fn states(&self) -> Result<Vec<ParameterState>> {
        self.rows().map(|r| self.layout.unpack(r)).collect()
    }
}

/// Per-chain RNG stream derived from the master seed.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64 + 1);
    rng
}

/// Runs one chain from the deterministic initial state.
pub fn run_chain(target: &Target<'_>, config: &McmcConfig, chain: usize) -> Result<ChainDraws> {
    config.validate()?;
    let mut rng = chain_rng(config.seed, chain);
    let mut state = target.chain_state(init_state(target.spec, target.graph, config.seed))?;
    let layout = ParamLayout::new(target.spec, target.graph);
    let blocks = target.blocks();
    let mut adapters: Vec<Adapter> = blocks
        .iter()
        .map(|&b| Adapter::new(b, target.block_dim(b), config))
        .collect();

    let stored = config.stored_per_chain();
    let mut out = ChainDraws {
        iterations: Vec::with_capacity(stored),
        rows: Vec::with_capacity(stored),
        loglik: Vec::with_capacity(stored),
        blocks: Vec::new(),
    };

    for iter in 1..=config.iterations {
        let burning = iter <= config.burnin;
        for (block, adapter) in blocks.iter().zip(adapters.iter_mut()) {
            let repeats = if *block == Block::Theta {
                config.theta_substeps
            } else {
                1
            };
            for _ in 0..repeats {
                let accepted = target.step(
                    &mut state,
                    *block,
                    &mut rng,
                    adapter.scale(),
                    adapter.shape.as_deref(),
                );
                adapter.record(accepted);
            }
            if burning && iter > config.burnin / 5 {
                if let Some(m) = adapter.moments.as_mut() {
                    let p = &state.params;
                    match block {
                        Block::Omega(g) => m.push(p.omega[*g].iter().copied()),
                        Block::Alpha(f) => m.push(alpha_free(&p.alpha[*f]).iter().copied()),
                        Block::Theta => {
                            let s = p.hyper.sigma;
                            m.push(p.theta.iter().map(|t| t / s))
                        }
                        _ => {}
                    }
                }
            }
        }
        if burning && iter % config.adapt_window == 0 {
            adapters.iter_mut().for_each(Adapter::adapt);
        }
        if iter == config.burnin {
            adapters.iter_mut().for_each(Adapter::reset_counts);
        }
        if !burning && (iter - config.burnin) % config.thin == 0 {
            if !state.loglik.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite log-likelihood at iteration {iter} of chain {}",
                    chain + 1
                )));
            }
            out.iterations.push(iter);
            out.rows.push(layout.pack(&state.params));
            out.loglik.push(state.loglik);
        }
    }
    out.blocks = blocks
        .iter()
        .zip(&adapters)
        .map(|(b, a)| BlockSummary {
            block: b.name(),
            final_scale: a.scale(),
            acceptance_rate: a.acceptance_rate(),
        })
        .collect();
    Ok(out)
}

/// Runs all chains concurrently over shared immutable inputs.
pub fn run_chains(target: &Target<'_>, config: &McmcConfig) -> Result<PosteriorDraws> {
    config.validate()?;
    let chains: Vec<Result<ChainDraws>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.chains)
            .map(|c| scope.spawn(move || run_chain(target, config, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    });
    Ok(PosteriorDraws {
        layout: ParamLayout::new(target.spec, target.graph),
        chains: chains.into_iter().collect::<Result<_>>()?,
    })
}

/// Thresholds and monitored names for the convergence report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub monitors: Vec<String>,
    pub rhat_max: f64,
    pub ess_min: f64,
    pub split_rhat: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            monitors: vec![
                "kappa[*]".into(),
                "alpha[*]".into(),
                "theta[*]".into(),
                "sigma".into(),
                "lambda".into(),
            ],
            rhat_max: 1.10,
            ess_min: 100.0,
            split_rhat: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub draws: PosteriorDraws,
    pub cells: CellTable,
    pub constraints: ConstraintSet,
    pub report: ConvergenceReport,
    pub warnings: Vec<String>,
}

pub fn run(
    data: &SurveyDataset,
    spec: &ModelSpec,
    graph: &SpatialGraph,
    config: &McmcConfig,
) -> Result<Fit> {
    run_with(data, spec, graph, config, &MonitorConfig::default())
}

/// Compiles cells and constraints, runs the chains and attaches the
/// convergence report. Threshold violations become warnings.
pub fn run_with(
    data: &SurveyDataset,
    spec: &ModelSpec,
    graph: &SpatialGraph,
    config: &McmcConfig,
    monitor: &MonitorConfig,
) -> Result<Fit> {
    config.validate()?;
    data.validate(graph)?;
    let cells = compile_cells(data, spec, graph)?;
    let constraints = ConstraintSet::from_cells(&cells, spec, graph.len());
    let target = Target::new(spec, &cells, graph, &constraints, config.sigma_max);
    let draws = run_chains(&target, config)?;
    let report = diagnostics::summarize(&draws, &monitor.monitors, monitor.split_rhat)?;
    let warnings = report.threshold_warnings(monitor.rhat_max, monitor.ess_min);
    for w in &warnings {
        warn!("{w}");
    }
    Ok(Fit {
        draws,
        cells,
        constraints,
        report,
        warnings,
    })
}

/// Acceptance rates per block name, averaged over chains.
pub fn mean_acceptance(draws: &PosteriorDraws) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for chain in &draws.chains {
        for b in &chain.blocks {
            let e = sums.entry(b.block.clone()).or_insert((0.0, 0));
            e.0 += b.acceptance_rate;
            e.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}
