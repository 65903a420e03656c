//! Convergence diagnostics and posterior summaries.

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mcmc::PosteriorDraws;

/// Classic potential scale reduction factor over `M` chains of equal length.
///
/// Returns `None` (not applicable) for fewer than two chains, fewer than two
/// draws per chain, or zero within-chain variance.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let t = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m < 2 || t < 2 {
        return None;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..t])).collect();
    let within = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| sample_variance(&c[..t], mu))
        .sum::<f64>()
        / m as f64;
    if !(within > 0.0) {
        return None;
    }
    let grand = mean(&means);
    // B / T: variance of the chain means.
    let between_over_t = sample_variance(&means, grand);
    let tf = t as f64;
    let pooled = (tf - 1.0) / tf * within + between_over_t;
    Some((pooled / within).sqrt())
}

/// R-hat after splitting each chain into two halves (odd middle draw dropped).
pub fn split_gelman_rubin(chains: &[Vec<f64>]) -> Option<f64> {
    let t = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = t / 2;
    let split: Vec<Vec<f64>> = chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[t - half..t].to_vec()])
        .collect();
    gelman_rubin(&split)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ess {
    pub value: f64,
    /// Set when some chain had zero variance and contributed its raw length.
    pub degenerate: bool,
}

/// Effective sample size, summed over chains.
///
/// Each chain uses Geyer's initial positive sequence: autocorrelations are
/// summed in adjacent pairs until the first non-positive pair. Per-chain
/// values are capped at the chain length.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Result<Ess> {
    let total: usize = chains.iter().map(Vec::len).sum();
    if total < 10 {
        return Err(Error::domain(format!(
            "effective sample size needs at least 10 draws, got {total}"
        )));
    }
    let mut value = 0.0;
    let mut degenerate = false;
    for chain in chains {
        match chain_ess(chain) {
            Some(e) => value += e,
            None => {
                degenerate = true;
                value += chain.len() as f64;
            }
        }
    }
    Ok(Ess { value, degenerate })
}

fn chain_ess(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mu = mean(x);
    let dev: Vec<f64> = x.iter().map(|v| v - mu).collect();
    let autocov = |lag: usize| -> f64 {
        dev[..n - lag]
            .iter()
            .zip(&dev[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if !(c0 > 0.0) {
        return None;
    }
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    let ess = n as f64 / tau;
    Some(ess.min(n as f64))
}

/// Empirical quantile with linear interpolation between order statistics
/// at position `(n - 1) p` (inclusive convention).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantiles(values: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64], mu: f64) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn sd(x: &[f64]) -> f64 {
    sample_variance(x, mean(x)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub rhat: Option<f64>,
    pub ess: f64,
    pub ess_degenerate: bool,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ParamSummary>,
    pub unmatched: Vec<String>,
}

impl ConvergenceReport {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Human-readable warnings for parameters failing the thresholds.
    /// Degenerate (constant) parameters are skipped.
    pub fn threshold_warnings(&self, rhat_max: f64, ess_min: f64) -> Vec<String> {
        let mut out = Vec::new();
        for row in &self.rows {
            if row.ess_degenerate {
                continue;
            }
            if let Some(r) = row.rhat {
                if r > rhat_max {
                    out.push(format!("{}: R-hat {:.3} exceeds {}", row.name, r, rhat_max));
                }
            }
            if row.ess < ess_min {
                out.push(format!("{}: ESS {:.1} below {}", row.name, row.ess, ess_min));
            }
        }
        out
    }

    pub fn max_rhat(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.rhat).reduce(f64::max)
    }

    pub fn min_ess(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| !r.ess_degenerate)
            .map(|r| r.ess)
            .reduce(f64::min)
    }
}

/// Glob match supporting `*` as "any sequence"; every other character is literal.
pub fn glob_match(pattern: &str, name: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let s: Vec<char> = name.chars().collect();
    let (mut pi, mut si) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while si < s.len() {
        if pi < p.len() && p[pi] == '*' {
            star = Some((pi, si));
            pi += 1;
        } else if pi < p.len() && p[pi] == s[si] {
            pi += 1;
            si += 1;
        } else if let Some((sp, ss)) = star {
            pi = sp + 1;
            si = ss + 1;
            star = Some((sp, ss + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

pub fn summarize_column(name: &str, chains: &[Vec<f64>], split: bool) -> ParamSummary {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let rhat = if split {
        split_gelman_rubin(chains)
    } else {
        gelman_rubin(chains)
    };
    let ess = effective_sample_size(chains).unwrap_or(Ess {
        value: pooled.len() as f64,
        degenerate: true,
    });
    let q = quantiles(&pooled, &[0.025, 0.5, 0.975]);
    ParamSummary {
        name: name.to_string(),
        rhat,
        ess: ess.value,
        ess_degenerate: ess.degenerate,
        mean: mean(&pooled),
        sd: sd(&pooled),
        q025: q[0],
        q50: q[1],
        q975: q[2],
    }
}

/// Summaries for every parameter whose name matches one of `monitors`.
pub fn summarize(
    draws: &PosteriorDraws,
    monitors: &[String],
    split: bool,
) -> Result<ConvergenceReport> {
    if draws.total_draws() == 0 {
        return Err(Error::input("no stored draws to summarize"));
    }
    let names = draws.names();
    let mut unmatched = Vec::new();
    for pattern in monitors {
        if !names.iter().any(|n| glob_match(pattern, n)) {
            warn!("monitor pattern '{pattern}' matches no parameter");
            unmatched.push(pattern.clone());
        }
    }
    let rows = names
        .iter()
        .enumerate()
        .filter(|(_, n)| monitors.iter().any(|p| glob_match(p, n)))
        .map(|(col, n)| summarize_column(n, &draws.column(col), split))
        .collect();
    Ok(ConvergenceReport { rows, unmatched })
}
