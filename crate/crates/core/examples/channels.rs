//! Draws random topologies and prints geometry plus channel strengths.
//!
//! `cargo run --release --example channels -- [n_drops]`

use sibris::channel::{draw_channels, draw_scenario, ScenarioTemplate};
use sibris::system::{self, SystemParams};

fn main() -> sibris::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let template = ScenarioTemplate::default();
    let params = SystemParams::defaults(template.n_ris);
    println!(
        "M = {}, K = {}, N = {}, kappa = {}",
        template.n_ris, template.elements_per_ris, template.n_pt_antennas, template.rician_kappa
    );
    for seed in 0..n {
        let s = draw_scenario(&template, seed)?;
        let ch = draw_channels(&s, seed)?;
        println!("drop {seed}: PU at ({:.1}, {:.1}, {:.1}), RIS layout {}x{}", s.pu.x, s.pu.y, s.pu.z, s.ris_rows, s.ris_columns);
        println!("  ||h||^2 = {:.3e}, ||h_p||^2 = {:.3e}", ch.h.norm_squared(), ch.h_p.norm_squared());
        for j in 0..ch.n_ris() {
            let r = s.ris[j];
            println!(
                "  RIS {j} at ({:.1}, {:.1}, {:.1}): ||F||_F^2 = {:.3e}, ||g||^2 = {:.3e}, ||g_p||^2 = {:.3e}",
                r.x,
                r.y,
                r.z,
                ch.f[j].norm_squared(),
                ch.g[j].norm_squared(),
                ch.g_p[j].norm_squared()
            );
        }
        println!("  SIC order by reference gain: {:?}", system::decoding_order(&ch, &params).as_slice());
    }
    Ok(())
}
