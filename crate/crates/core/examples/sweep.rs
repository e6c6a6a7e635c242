//! Runs a small transmit-power sweep through the experiment harness and
//! prints the median WSSE per scheme.
//!
//! `cargo run --release --example sweep -- [n_drops]`

use sibris::baselines::SchemeId;
use sibris::channel::ScenarioTemplate;
use sibris::experiment::{self, ExperimentConfig, SweepVar};

fn main() {
    let n_drops = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let cfg = ExperimentConfig {
        template: ScenarioTemplate::desk(),
        schemes: vec![SchemeId::Proposed, SchemeId::Sud, SchemeId::Tdma],
        n_drops,
        master_seed: 1,
        ..ExperimentConfig::default()
    }
    .with_sweep(SweepVar::PDbm, vec![28.0, 32.0, 36.0])
    .expect("valid sweep");

    let rows = match experiment::run_rows(&cfg, 0) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let mut csv = Vec::new();
    experiment::write_csv(&rows, &mut csv).expect("writing to memory");
    println!("{} CSV rows ({} bytes)", rows.len(), csv.len());
    for (scheme, p_dbm, med) in experiment::median_wsse(&rows) {
        println!("{scheme:<10} P = {p_dbm:>4} dBm  median WSSE {med:.4}");
    }
}
