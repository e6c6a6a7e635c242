//! Solves a small max-cut style SDP with the built-in interior-point solver
//! and rounds the result to a rank-one phase vector.
//!
//! `cargo run --release --example sdp -- [dim]`

use sibris::conic::{max_eigpair, solve_sdp, HermitianMatrix, LinearForm, SdpProblem, DEFAULT_EPS_FEAS, DEFAULT_MAX_ITERS};
use sibris::{CMatrix, C64};

fn main() -> sibris::Result<()> {
    let dim: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(6);
    // Deterministic Hermitian objective without pulling in an RNG.
    let c = CMatrix::from_fn(dim, dim, |r, k| {
        let t = (r * 7 + k * 3) as f64;
        C64::new(t.sin(), (t * 0.5).cos() - 0.3)
    });
    let c = HermitianMatrix::from_hermitian_part(&c);

    // maximize tr(C X)  s.t.  X_ii = 1, X >= 0
    let mut p = SdpProblem::new(dim);
    p.set_objective(LinearForm::on(0, c.clone()));
    for i in 0..dim {
        p.add_eq(LinearForm::on(0, HermitianMatrix::diagonal_selector(dim, i)), 1.0);
    }
    let sol = solve_sdp(&p, DEFAULT_EPS_FEAS, DEFAULT_MAX_ITERS)?;
    println!(
        "status {:?} after {} iterations: objective {:.6}, primal residual {:.1e}, psd residual {:.1e}",
        sol.status, sol.iterations, sol.objective_value, sol.primal_residual, sol.psd_residual
    );

    let (sigma, v) = max_eigpair(sol.x());
    println!("largest eigenvalue {sigma:.4} of trace {:.4}", sol.x().trace());
    let phases = v.map(|z| if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) });
    println!("rank-one rounding objective {:.6} (upper bound {:.6})", c.quadratic_form(&phases), sol.objective_value);
    Ok(())
}
