//! Runs the joint optimization on desk-scale drops and prints the WSSE trace,
//! final rates and constraint slacks.
//!
//! `cargo run --release --example single_drop -- [first_seed] [n_drops]`

use std::time::Instant;

use sibris::bcd::{self, BcdConfig};
use sibris::channel::{draw_channels, draw_scenario, ScenarioTemplate};
use sibris::system::SystemParams;

fn main() -> sibris::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let first = args.first().copied().unwrap_or(0);
    let count = args.get(1).copied().unwrap_or(1);
    let template = ScenarioTemplate::desk();
    let params = SystemParams::defaults(template.n_ris);
    for seed in first..first + count {
        let scenario = draw_scenario(&template, seed)?;
        let ch = draw_channels(&scenario, seed)?;
        let start = Instant::now();
        match bcd::run(&ch, &params, &BcdConfig::default()) {
            Ok(rep) => {
                let trace: Vec<String> = rep.wsse_trace.iter().map(|v| format!("{v:.5}")).collect();
                println!(
                    "seed {seed}: {:?} after {} outer iterations, {:.2} s",
                    rep.status,
                    rep.counts.outer,
                    start.elapsed().as_secs_f64()
                );
                println!("  wsse trace   {}", trace.join(" "));
                println!("  RIS rates    {:?}", rep.final_rates);
                println!("  PU rate      {:.4} (threshold {})", rep.pu_rate, params.rate_threshold);
                println!("  inner SDPs   refl {:?} beam {:?}", rep.counts.reflection, rep.counts.beam);
                println!(
                    "  worst slack  {:.3e}, max rank gap {:.3e}, failures {}",
                    rep.constraint_report.worst_relative_slack(),
                    rep.rank_gaps.iter().copied().fold(0.0, f64::max),
                    rep.subproblem_failures
                );
            }
            Err(e) => println!("seed {seed}: {e}"),
        }
    }
    Ok(())
}
