//! Runs every scheme on one desk-scale drop and prints WSSE and PU rate.
//!
//! `cargo run --release --example baselines -- [seed]`

use sibris::baselines::{self, AA_ANTENNAS};
use sibris::bcd::{self, BcdConfig};
use sibris::channel::{dbm_to_watts, draw_active_channels, draw_channels, draw_scenario, ScenarioTemplate};
use sibris::system::SystemParams;

fn main() -> sibris::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let template = ScenarioTemplate::desk();
    let params = SystemParams::defaults(template.n_ris);
    let cfg = BcdConfig::default();
    let s = draw_scenario(&template, seed)?;
    let ch = draw_channels(&s, seed)?;
    println!("PU rate threshold {} bits/s/Hz", params.rate_threshold);
    println!("{:<16} {:>10} {:>10}", "scheme", "WSSE", "PU rate");

    let proposed = bcd::run(&ch, &params, &cfg)?;
    println!("{:<16} {:>10.4} {:>10.4}", "proposed", proposed.final_wsse(), proposed.pu_rate);
    let sud = baselines::run_sud(&ch, &params, &cfg)?;
    println!("{:<16} {:>10.4} {:>10.4}", "sud", sud.final_wsse(), sud.pu_rate);
    let tdma = baselines::tdma(&ch, &params, &cfg)?;
    println!("{:<16} {:>10.4} {:>10.4}", "tdma", tdma.wsse, tdma.pu_rate);
    match baselines::quantize_run(proposed, &ch, &params, &cfg) {
        Ok(q) => println!("{:<16} {:>10.4} {:>10.4}{}", "proposed_2bit", q.wsse, q.pu_rate, if q.repaired { " (beam repaired)" } else { "" }),
        Err(e) => println!("{:<16} {e}", "proposed_2bit"),
    }
    let act = draw_active_channels(&s, seed, AA_ANTENNAS)?;
    for dbm in [15.0, 20.0] {
        let label = format!("aa_noma {dbm} dBm");
        match baselines::aa_noma(&ch, &act, &params, dbm_to_watts(dbm)) {
            Ok(r) => println!("{label:<16} {:>10.4} {:>10.4} (power scale {:.3})", r.wsse, r.pu_rate, r.scale),
            Err(e) => println!("{label:<16} {e}"),
        }
    }
    Ok(())
}
