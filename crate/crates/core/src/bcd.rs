//! Outer block-coordinate ascent: auxiliary update, reflection, beamforming
//! and power splitting, repeated until the relative WSSE gain is small.
//!
//! Every block update is accepted only if it keeps the state feasible and
//! does not decrease the surrogate at fixed auxiliaries. Since the surrogate
//! touches `sum w_j ln(1 + gamma_j)` at the auxiliary point, the WSSE trace is
//! nondecreasing by construction.

use crate::error::{Error, Result};
use crate::fp::{self, AuxVars};
use crate::conic::{max_eigpair, HermitianMatrix};
use crate::linalg::{c64, conj_hadamard, CMatrix, CVector, C64};
use crate::ps::{self, DELTA_MAX, DELTA_MIN};
use crate::refl::{self, InnerConfig, ACCEPT_TOL};
use crate::system::{self, constraint_report, ConstraintReport, Decoder, NetworkState, SystemParams};
use crate::{beam, channel::ChannelSet};

#[derive(Debug, Clone, PartialEq)]
pub struct BcdConfig {
    /// Stop when `(R_t - R_{t-1}) / R_{t-1}` falls to this value.
    pub outer_rel_tol: f64,
    /// Absolute floor on the WSSE gain, for traces near zero.
    pub outer_abs_tol: f64,
    pub max_outer: usize,
    pub refl: InnerConfig,
    pub beam: InnerConfig,
    /// Initial `delta_j` as a fraction of its EH upper bound.
    pub init_delta_fraction: f64,
    /// Relative complementarity tolerance of the power-splitting solver.
    pub ps_tol: f64,
    /// Also start from a beamformer focused on each RIS and keep the best
    /// run.
    pub multi_start: bool,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self {
            outer_rel_tol: 0.01,
            outer_abs_tol: 1e-6,
            max_outer: 50,
            refl: InnerConfig::default(),
            beam: InnerConfig::default(),
            init_delta_fraction: 0.9,
            ps_tol: 1e-10,
            multi_start: true,
        }
    }
}

impl BcdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_rel_tol > 0.0) || !(self.outer_abs_tol > 0.0) || !(self.ps_tol > 0.0) {
            return Err(Error::InvalidArgument("BCD tolerances must be positive".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidArgument("max_outer must be at least 1".into()));
        }
        if !(self.init_delta_fraction > 0.0 && self.init_delta_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "init_delta_fraction must lie in (0, 1], got {}",
                self.init_delta_fraction
            )));
        }
        self.refl.validate()?;
        self.beam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxOuter,
}

/// Work counters: outer iterations and the SDP count of every inner loop.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationCounts {
    pub outer: usize,
    /// One entry per outer iteration; 0 when the subproblem failed.
    pub reflection: Vec<usize>,
    pub beam: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// WSSE in bits/s/Hz; entry 0 is the initial point, entry `t` follows
    /// outer iteration `t`.
    pub wsse_trace: Vec<f64>,
    pub final_state: NetworkState,
    pub decoder: Decoder,
    /// `log2(1 + gamma_j)` per RIS at the final state.
    pub final_rates: Vec<f64>,
    pub pu_rate: f64,
    pub counts: IterationCounts,
    /// Largest relative rank gap of each DC loop that produced a solution.
    pub rank_gaps: Vec<f64>,
    /// `|f1(aux*) - sum w_j ln(1 + gamma_j)|` at every auxiliary update.
    pub fp_gaps: Vec<f64>,
    /// Subproblems that failed and kept the previous iterate.
    pub subproblem_failures: usize,
    pub constraint_report: ConstraintReport,
    pub status: RunStatus,
}

impl RunReport {
    pub fn final_wsse(&self) -> f64 {
        *self.wsse_trace.last().expect("trace holds the initial point")
    }

    /// Largest drop between consecutive trace entries (0 for a monotone
    /// trace).
    pub fn max_decrease(&self) -> f64 {
        self.wsse_trace.windows(2).map(|p| p[0] - p[1]).fold(0.0, f64::max)
    }
}

/// `sqrt(1 - mu K / (chi ||F_j w||^2))`, capped at [`DELTA_MAX`]; `None` when
/// the incident power cannot cover the circuit.
fn delta_upper(j: usize, w: &CVector, ch: &ChannelSet, params: &SystemParams) -> Option<f64> {
    let mu_k = params.element_power * ch.n_elements() as f64;
    if mu_k == 0.0 {
        return Some(DELTA_MAX);
    }
    let incident = params.eh_efficiency * (&ch.f[j] * w).norm_squared();
    let room = 1.0 - mu_k / incident;
    (room > 0.0).then(|| room.sqrt().min(DELTA_MAX))
}

/// Full-power reference beamformer, all-ones reflections and `delta` at a
/// fixed fraction of its EH bound. When that point violates a constraint,
/// one beamforming pass with a zero-rate objective looks for a feasible
/// beamformer.
pub fn initialize(ch: &ChannelSet, params: &SystemParams, decoder: &Decoder, cfg: &BcdConfig) -> Result<NetworkState> {
    ch.validate()?;
    params.validate(ch.n_ris())?;
    cfg.validate()?;
    let w = system::reference_beamformer(ch.n_antennas(), params.power_budget);
    let phi = vec![CVector::from_element(ch.n_elements(), C64::new(1.0, 0.0)); ch.n_ris()];
    complete_start(w, phi, None, ch, params, decoder, cfg)
}

/// Adds the power split to a beamformer and reflections and repairs the
/// beamformer if the point is infeasible. With `solo = Some(j)` every other
/// RIS starts at the minimum split, so it barely reflects.
fn complete_start(
    w: CVector,
    phi: Vec<CVector>,
    solo: Option<usize>,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
    cfg: &BcdConfig,
) -> Result<NetworkState> {
    let delta = (0..ch.n_ris())
        .map(|j| match delta_upper(j, &w, ch, params) {
            Some(_) if solo.is_some_and(|s| s != j) => DELTA_MIN,
            Some(hi) => (cfg.init_delta_fraction * hi).max(DELTA_MIN),
            None => DELTA_MIN,
        })
        .collect();
    let state = NetworkState { w, phi, delta };
    if constraint_report(&state, ch, params).is_feasible(ACCEPT_TOL) {
        return Ok(state);
    }
    match beam::seek_feasible_beam(&state, ch, params, decoder, &cfg.beam) {
        Ok(out) if out.report.accepted => Ok(NetworkState { w: out.w, ..state }),
        Ok(_) | Err(Error::SubproblemInfeasible(_) | Error::SolverFailed(_)) => Err(Error::InitInfeasible),
        Err(e) => Err(e),
    }
}

/// Full-power beamformer along the principal eigenvector of
/// `F_j^H diag(|g_j|^2) F_j`, the direction that maximizes the power RIS `j`
/// can reflect to the AP when its phases are free.
pub fn focused_beamformer(j: usize, ch: &ChannelSet, params: &SystemParams) -> CVector {
    let weighted = CMatrix::from_fn(ch.n_elements(), ch.n_antennas(), |k, n| ch.f[j][(k, n)] * ch.g[j][k].norm());
    let gram = HermitianMatrix::from_hermitian_part(&(weighted.adjoint() * &weighted));
    let (_, v) = max_eigpair(&gram);
    let scale = params.power_budget.sqrt() / v.norm();
    v * c64(scale, 0.0)
}

/// Phases that make every cascaded term `g_jk^* (F_j w)_k phi_jk` real and
/// nonnegative.
pub fn aligned_reflections(w: &CVector, ch: &ChannelSet) -> Vec<CVector> {
    (0..ch.n_ris())
        .map(|j| {
            let row = conj_hadamard(&ch.g[j], &(&ch.f[j] * w));
            row.map(|e| if e.norm() > 0.0 { e.conj() / e.norm() } else { c64(1.0, 0.0) })
        })
        .collect()
}

/// Feasible start points: the reference point of [`initialize`], then for
/// each RIS a focused beamformer with aligned reflections, once with every
/// RIS active and once (when M > 1) with only that RIS active. Starts that
/// cannot be made feasible are dropped.
pub fn start_points(ch: &ChannelSet, params: &SystemParams, decoder: &Decoder, cfg: &BcdConfig) -> Result<Vec<NetworkState>> {
    let m = ch.n_ris();
    let mut starts = Vec::with_capacity(2 * m + 1);
    let mut keep = |r: Result<NetworkState>| match r {
        Ok(s) => {
            starts.push(s);
            Ok(())
        }
        Err(Error::InitInfeasible) => Ok(()),
        Err(e) => Err(e),
    };
    keep(initialize(ch, params, decoder, cfg))?;
    let solos: &[bool] = if m > 1 { &[false, true] } else { &[false] };
    for &solo in solos {
        for j in 0..m {
            let w = focused_beamformer(j, ch, params);
            let phi = aligned_reflections(&w, ch);
            keep(complete_start(w, phi, solo.then_some(j), ch, params, decoder, cfg))?;
        }
    }
    Ok(starts)
}

/// Runs the full loop with the strongest-first SIC order.
pub fn run(ch: &ChannelSet, params: &SystemParams, cfg: &BcdConfig) -> Result<RunReport> {
    let decoder = Decoder::Sic(system::decoding_order(ch, params));
    run_with_decoder(ch, params, &decoder, cfg)
}

/// Runs the loop from every start point (only the reference point when
/// `multi_start` is off) and keeps the run with the highest final WSSE;
/// ties keep the earlier start.
pub fn run_with_decoder(ch: &ChannelSet, params: &SystemParams, decoder: &Decoder, cfg: &BcdConfig) -> Result<RunReport> {
    let starts = if cfg.multi_start {
        start_points(ch, params, decoder, cfg)?
    } else {
        vec![initialize(ch, params, decoder, cfg)?]
    };
    let mut best: Option<RunReport> = None;
    for start in starts {
        let rep = run_from(ch, params, decoder, start, cfg)?;
        if best.as_ref().is_none_or(|b| rep.final_wsse() > b.final_wsse()) {
            best = Some(rep);
        }
    }
    best.ok_or(Error::InitInfeasible)
}

/// Runs the loop from a given feasible state with a given decoder.
pub fn run_from(
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
    init: NetworkState,
    cfg: &BcdConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    params.validate(ch.n_ris())?;
    init.check_dims(ch)?;
    if !constraint_report(&init, ch, params).is_feasible(ACCEPT_TOL) {
        return Err(Error::InitInfeasible);
    }

    let mut state = init;
    let mut trace = vec![system::wsse(&state, ch, params, decoder)];
    let mut counts = IterationCounts::default();
    let mut rank_gaps = Vec::new();
    let mut fp_gaps = Vec::new();
    let mut failures = 0;
    let mut status = RunStatus::MaxOuter;

    for _ in 0..cfg.max_outer {
        let aux = fp::update_aux(&state, ch, params, decoder);
        fp_gaps.push(fixed_point_gap(&aux, &state, ch, params, decoder));

        match refl::solve_reflection(&aux, &state, ch, params, decoder, &cfg.refl) {
            Ok(out) => {
                counts.reflection.push(out.report.iterations);
                rank_gaps.push(out.report.max_rank_gap());
                state.phi = out.phi;
            }
            Err(e) if recoverable(&e) => {
                counts.reflection.push(0);
                failures += 1;
            }
            Err(e) => return Err(e),
        }

        match beam::solve_beam(&aux, &state, ch, params, decoder, &cfg.beam) {
            Ok(out) => {
                counts.beam.push(out.report.iterations);
                rank_gaps.push(out.report.max_rank_gap());
                state.w = out.w;
            }
            Err(e) if recoverable(&e) => {
                counts.beam.push(0);
                failures += 1;
            }
            Err(e) => return Err(e),
        }

        match power_splitting_step(&aux, &state, ch, params, decoder, cfg.ps_tol) {
            Ok(Some(delta)) => state.delta = delta,
            Ok(None) => {}
            Err(e) if recoverable(&e) => failures += 1,
            Err(e) => return Err(e),
        }

        counts.outer += 1;
        let prev = *trace.last().expect("nonempty");
        let next = system::wsse(&state, ch, params, decoder);
        trace.push(next);
        let gain = next - prev;
        if gain <= cfg.outer_abs_tol || gain <= cfg.outer_rel_tol * prev.abs() {
            status = RunStatus::Converged;
            break;
        }
    }

    let gammas = system::sinrs(&state, ch, params, decoder);
    Ok(RunReport {
        wsse_trace: trace,
        final_rates: gammas.iter().map(|g| g.ln_1p() / std::f64::consts::LN_2).collect(),
        pu_rate: system::pu_rate(&state, ch, params),
        constraint_report: constraint_report(&state, ch, params),
        final_state: state,
        decoder: decoder.clone(),
        counts,
        rank_gaps,
        fp_gaps,
        subproblem_failures: failures,
        status,
    })
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::SubproblemInfeasible(_)
            | Error::SolverFailed(_)
            | Error::PsInfeasible
            | Error::EhInfeasible(_)
            | Error::QosInfeasible
    )
}

/// `|f1(aux, x) - sum w_j ln(1 + gamma_j(x))|`; zero when `aux` is the
/// maximizer at `x`.
pub fn fixed_point_gap(
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
) -> f64 {
    let gammas = system::sinrs(state, ch, params, decoder);
    let exact: f64 = params.weights.iter().zip(&gammas).map(|(w, g)| w * g.ln_1p()).sum();
    (fp::f1(aux, state, ch, params, decoder) - exact).abs()
}

/// Solves the power-splitting QP; returns the new split when it keeps the
/// state feasible without lowering `f1`.
fn power_splitting_step(
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
    tol: f64,
) -> Result<Option<Vec<f64>>> {
    let qp = ps::build_ps_qp(aux, state, ch, params, decoder)?;
    let sol = ps::solve_ps(&qp, tol)?;
    let candidate = NetworkState { delta: sol.delta, ..state.clone() };
    let ok = constraint_report(&candidate, ch, params).is_feasible(ACCEPT_TOL)
        && fp::f1(aux, &candidate, ch, params, decoder) >= fp::f1(aux, state, ch, params, decoder);
    Ok(ok.then_some(candidate.delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channels, draw_scenario, ScenarioTemplate};

    fn desk(seed: u64) -> (ChannelSet, SystemParams) {
        let s = draw_scenario(&ScenarioTemplate::desk(), seed).unwrap();
        (draw_channels(&s, seed).unwrap(), SystemParams::defaults(2))
    }

    #[test]
    fn init_respects_eh_bound_by_construction() {
        for seed in 0..5 {
            let (ch, params) = desk(seed);
            let dec = Decoder::Sic(system::decoding_order(&ch, &params));
            let cfg = BcdConfig::default();
            let st = initialize(&ch, &params, &dec, &cfg).unwrap();
            let rep = constraint_report(&st, &ch, &params);
            assert!(rep.is_feasible(ACCEPT_TOL), "seed {seed}: {rep:?}");
            assert!(rep.eh_slack.iter().all(|s| *s > 0.0));
            assert_eq!(st, initialize(&ch, &params, &dec, &cfg).unwrap());
        }
    }

    #[test]
    fn zero_circuit_power_init_is_feasible() {
        let (ch, mut params) = desk(11);
        params.element_power = 0.0;
        params.rate_threshold = 0.0;
        let dec = Decoder::Sud;
        let st = initialize(&ch, &params, &dec, &BcdConfig::default()).unwrap();
        assert!(st.delta.iter().all(|d| (*d - 0.9 * DELTA_MAX).abs() < 1e-15));
    }

    #[test]
    fn bad_config_is_rejected() {
        let (ch, params) = desk(0);
        let cfg = BcdConfig { init_delta_fraction: 1.5, ..BcdConfig::default() };
        assert!(matches!(run(&ch, &params, &cfg), Err(Error::InvalidArgument(_))));
        let cfg = BcdConfig { max_outer: 0, ..BcdConfig::default() };
        assert!(run(&ch, &params, &cfg).is_err());
    }

    #[test]
    fn desk_run_is_monotone_and_feasible() {
        let (ch, params) = desk(1);
        let rep = run(&ch, &params, &BcdConfig::default()).unwrap();
        assert!(rep.max_decrease() <= 1e-6, "{:?}", rep.wsse_trace);
        assert!(rep.counts.outer <= 30);
        assert_eq!(rep.counts.reflection.len(), rep.counts.outer);
        assert_eq!(rep.counts.beam.len(), rep.counts.outer);
        assert_eq!(rep.wsse_trace.len(), rep.counts.outer + 1);
        assert!(rep.constraint_report.worst_relative_slack() >= -1e-6);
        assert!(rep.fp_gaps.iter().all(|g| *g <= 1e-9));
        assert!(rep.rank_gaps.iter().all(|g| *g <= 1e-3), "{:?}", rep.rank_gaps);
        assert!(rep.final_wsse() >= rep.wsse_trace[0]);

        let again = run_from(&ch, &params, &rep.decoder, rep.final_state.clone(), &BcdConfig::default()).unwrap();
        assert_eq!(again.counts.outer, 1);
        assert_eq!(again.status, RunStatus::Converged);
    }

    #[test]
    fn start_points_are_feasible_and_well_formed() {
        for seed in 0..5 {
            let (ch, params) = desk(seed);
            let dec = Decoder::Sic(system::decoding_order(&ch, &params));
            let starts = start_points(&ch, &params, &dec, &BcdConfig::default()).unwrap();
            assert!(!starts.is_empty() && starts.len() <= 5);
            assert_eq!(starts[0], initialize(&ch, &params, &dec, &BcdConfig::default()).unwrap());
            for st in &starts {
                assert!(constraint_report(st, &ch, &params).is_feasible(ACCEPT_TOL));
            }
            for j in 0..2 {
                let w = focused_beamformer(j, &ch, &params);
                assert!((w.norm_squared() - params.power_budget).abs() <= 1e-12 * params.power_budget);
                let phi = aligned_reflections(&w, &ch);
                let probe = NetworkState { w, phi, delta: vec![1.0, 1.0] };
                let terms = conj_hadamard(&ch.g[j], &(&ch.f[j] * &probe.w)).component_mul(&probe.phi[j]);
                assert!(terms.iter().all(|t| t.im.abs() <= 1e-12 * t.norm().max(1e-300) && t.re >= 0.0));
            }
        }
    }

    #[test]
    fn single_start_matches_reference_run() {
        let (ch, params) = desk(2);
        let cfg = BcdConfig { multi_start: false, ..BcdConfig::default() };
        let dec = Decoder::Sic(system::decoding_order(&ch, &params));
        let init = initialize(&ch, &params, &dec, &cfg).unwrap();
        assert_eq!(run(&ch, &params, &cfg).unwrap(), run_from(&ch, &params, &dec, init, &cfg).unwrap());
        assert!(run(&ch, &params, &BcdConfig::default()).unwrap().final_wsse() >= run(&ch, &params, &cfg).unwrap().final_wsse());
    }
}
