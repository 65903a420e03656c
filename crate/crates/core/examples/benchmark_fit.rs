//! Fits the synthetic grid benchmark and prints convergence summaries.

use std::time::Instant;

use spatial_ordinal::mcmc::{self, McmcConfig};
use spatial_ordinal::synth;

fn main() -> spatial_ordinal::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let b = synth::benchmark(seed)?;
    println!("n = {}", b.survey.len());
    let config = McmcConfig::default();
    let start = Instant::now();
    let fit = mcmc::run(&b.survey, &b.spec, &b.graph, &config)?;
    println!("elapsed {:.1?}", start.elapsed());
    for (block, rate) in mcmc::mean_acceptance(&fit.draws) {
        println!("accept {block:<20} {rate:.3}");
    }
    println!(
        "max rhat {:?}, min ess {:?}",
        fit.report.max_rhat(),
        fit.report.min_ess()
    );
    let mut worst: Vec<_> = fit.report.rows.iter().collect();
    worst.sort_by(|a, b| a.ess.partial_cmp(&b.ess).unwrap());
    for r in worst.iter().take(8) {
        println!("{:<14} rhat {:?} ess {:.0} mean {:.3}", r.name, r.rhat, r.ess, r.mean);
    }
    let truth = b.truth.named_values();
    for name in ["sigma", "lambda"] {
        let t = truth.iter().find(|(n, _)| n == name).unwrap().1;
        let r = fit.report.get(name).unwrap();
        println!("{name}: truth {t:.3} post {:.3} [{:.3}, {:.3}]", r.mean, r.q025, r.q975);
    }
    Ok(())
}
