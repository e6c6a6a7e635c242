//! Reflection subproblem and the penalized difference-of-convex (DC) loop
//! shared with the beamforming subproblem.
//!
//! Each reflection vector is lifted to `Phi_j = [phi_j; 1][phi_j; 1]^H`, which
//! turns every quadratic form of the surrogate into a trace. The rank-one
//! requirement `Tr(Phi) - sigma_max(Phi) = 0` is a DC constraint; it is
//! replaced by its linearization at the previous iterate plus a slack `eta`
//! that is penalized with an increasing weight `rho`.

use crate::channel::ChannelSet;
use crate::conic::{max_eigpair, solve_sdp, HermitianMatrix, LinearForm, SdpProblem, SdpStatus};
use crate::error::{Error, Result};
use crate::fp::{self, AuxVars};
use crate::linalg::{c64, homogenize, lift_row, outer, pad_corner, CVector};
use crate::system::{self, constraint_report, Decoder, NetworkState, SystemParams};

/// Relative slack tolerated when checking a candidate iterate for
/// feasibility before accepting it.
pub const ACCEPT_TOL: f64 = 1e-9;

/// Relative tightening of the scaled inequality constraints inside the
/// SDPs, so that rank-one extraction errors cannot cause violations.
pub const CONSTRAINT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySchedule {
    pub rho0: f64,
    pub scale_c: f64,
    pub rho_max: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self { rho0: 1e-3, scale_c: 10.0, rho_max: 1e6 }
    }
}

impl PenaltySchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.scale_c > 1.0 && self.rho_max >= self.rho0) {
            return Err(Error::InvalidArgument(format!("invalid penalty schedule {self:?}")));
        }
        Ok(())
    }

    pub fn next(&self, rho: f64) -> f64 {
        (rho * self.scale_c).min(self.rho_max)
    }
}

/// Settings of one penalized DC loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub schedule: PenaltySchedule,
    /// Stop when the relative change of the SDP objective is at most this...
    pub inner_tol: f64,
    /// ...and every lifted block has `(Tr - sigma_max) / Tr` at most this.
    pub rank_tol: f64,
    pub max_inner: usize,
    pub sdp_tol: f64,
    pub sdp_max_iters: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            schedule: PenaltySchedule::default(),
            inner_tol: 1e-4,
            rank_tol: 1e-6,
            max_inner: 30,
            sdp_tol: crate::conic::DEFAULT_EPS_FEAS,
            sdp_max_iters: 300,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.inner_tol > 0.0 && self.rank_tol > 0.0 && self.sdp_tol > 0.0) || self.max_inner == 0 {
            return Err(Error::InvalidArgument(format!("invalid inner-loop settings {self:?}")));
        }
        Ok(())
    }
}

/// What happened inside one DC loop.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InnerReport {
    /// Penalized SDP objective in surrogate units; entry 0 is the warm
    /// start.
    pub objectives: Vec<f64>,
    /// Number of SDPs solved.
    pub iterations: usize,
    /// Penalty slacks after each SDP, one entry per lifted block.
    pub slacks: Vec<Vec<f64>>,
    /// `(Tr - sigma_max) / Tr` of every lifted block at loop exit.
    pub rank_gaps: Vec<f64>,
    /// Total interior-point iterations.
    pub sdp_iterations: usize,
    /// Whether the extracted iterate replaced the incoming one.
    pub accepted: bool,
}

impl InnerReport {
    pub fn max_rank_gap(&self) -> f64 {
        self.rank_gaps.iter().copied().fold(0.0, f64::max)
    }
}

/// `Tr(X) - sigma_max(X)`, clamped at zero.
pub fn rank_one_gap(x: &HermitianMatrix) -> f64 {
    let (lmax, _) = max_eigpair(x);
    (x.trace() - lmax).max(0.0)
}

/// `rank_one_gap(x) / Tr(x)`, zero for a zero matrix.
pub fn relative_rank_gap(x: &HermitianMatrix) -> f64 {
    let t = x.trace();
    if t > 0.0 {
        rank_one_gap(x) / t
    } else {
        0.0
    }
}

/// Affine minorant of `sigma_max` at an anchor point `X_l`:
/// `sigma_max(X) >= sigma + v^H (X - X_l) v`.
#[derive(Debug, Clone, PartialEq)]
pub struct DcMinorant {
    pub sigma: f64,
    pub v: CVector,
    anchor_form: f64,
}

impl DcMinorant {
    pub fn value(&self, x: &HermitianMatrix) -> f64 {
        self.sigma + x.quadratic_form(&self.v) - self.anchor_form
    }

    pub fn projector(&self) -> HermitianMatrix {
        HermitianMatrix::outer(&self.v)
    }
}

pub fn dc_linearization(anchor: &HermitianMatrix) -> DcMinorant {
    let (sigma, v) = max_eigpair(anchor);
    let anchor_form = anchor.quadratic_form(&v);
    DcMinorant { sigma, v, anchor_form }
}

/// Runs the penalized DC loop on `base`, whose blocks are all lifted
/// variables that must become rank one. A penalty slack block is appended
/// for each of them on every pass.
pub(crate) fn run_dc_loop(
    base: &SdpProblem,
    warm: Vec<HermitianMatrix>,
    cfg: &InnerConfig,
    what: &str,
) -> Result<(Vec<HermitianMatrix>, InnerReport)> {
    let l = base.block_dims().len();
    // Penalty weights act on the objective normalized to unit coefficient
    // norm, so the schedule does not depend on the units of the surrogate.
    let scale = base.objective().norm();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut normalized = base.clone();
    let mut unit_objective = LinearForm::new();
    for t in base.objective().terms() {
        unit_objective.push(t.block, t.matrix.scaled(1.0 / scale));
    }
    normalized.set_objective(unit_objective);

    let mut rho = cfg.schedule.rho0;
    let mut current = warm;
    let mut report = InnerReport::default();
    let warm_gap: f64 = current.iter().map(rank_one_gap).sum();
    report.objectives.push(base.objective_value(&current) - scale * rho * warm_gap);

    for it in 0..cfg.max_inner {
        let mut p = normalized.clone();
        let mut objective = p.objective().clone();
        for (j, x) in current.iter().enumerate() {
            let m = dc_linearization(x);
            let eta = p.add_block(1);
            objective.push(eta, HermitianMatrix::from_diagonal(&[-rho]));
            let complement = &HermitianMatrix::identity(x.dim()) - &m.projector();
            p.add_le(
                LinearForm::on(j, complement).with(eta, HermitianMatrix::from_diagonal(&[-1.0])),
                m.sigma - m.anchor_form,
            );
        }
        p.set_objective(objective);

        let sol = solve_sdp(&p, cfg.sdp_tol, cfg.sdp_max_iters)?;
        report.sdp_iterations += sol.iterations;
        match sol.status {
            SdpStatus::Optimal => {}
            SdpStatus::Infeasible => return Err(Error::SubproblemInfeasible(what.to_string())),
            SdpStatus::MaxIters if it == 0 => {
                return Err(Error::SolverFailed(format!("{what}: iteration budget exhausted")))
            }
            SdpStatus::MaxIters => break,
        }
        report.iterations += 1;
        current = sol.blocks[..l].to_vec();
        report.slacks.push(sol.blocks[l..].iter().map(|b| b.trace()).collect());
        let value = scale * sol.objective_value;
        let prev = *report.objectives.last().expect("warm start recorded");
        report.objectives.push(value);
        let change = (value - prev).abs() / prev.abs().max(1e-12 * scale);
        let gap = current.iter().map(relative_rank_gap).fold(0.0, f64::max);
        rho = cfg.schedule.next(rho);
        if change <= cfg.inner_tol && gap <= cfg.rank_tol {
            break;
        }
    }
    report.rank_gaps = current.iter().map(relative_rank_gap).collect();
    Ok((current, report))
}

/// Trace-form coefficient matrices of the reflection subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftMatrices {
    /// `Tr(Lambda_j Phi_j) = 2 sqrt(w_j (1 + alpha_j)) Re{beta_j^* eps_j phi_j}`.
    pub lambda: Vec<HermitianMatrix>,
    /// `Tr(Omega_j Phi_j) = |eps_j phi_j|^2`.
    pub omega: Vec<HermitianMatrix>,
    /// `Tr(Omega_jp Phi_j) = |eps_jp phi_j|^2`.
    pub omega_pu: Vec<HermitianMatrix>,
}

pub fn build_lift_matrices(
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
) -> Result<LiftMatrices> {
    state.check_dims(ch)?;
    if aux.alpha.len() != state.n_ris() || aux.beta.len() != state.n_ris() || params.weights.len() != state.n_ris() {
        return Err(Error::Dimension("auxiliaries or weights do not match the RIS count".into()));
    }
    let factors = aux.signal_factors(&params.weights);
    let mut out = LiftMatrices { lambda: Vec::new(), omega: Vec::new(), omega_pu: Vec::new() };
    for j in 0..state.n_ris() {
        let eps = system::cascaded_row(j, state, ch);
        let eps_p = system::cascaded_row_pu(j, state, ch);
        let scaled = &eps * (aux.beta[j].conj() * factors[j]);
        out.lambda.push(HermitianMatrix::from_hermitian_part(&lift_row(&scaled)));
        out.omega.push(HermitianMatrix::from_hermitian_part(&pad_corner(&outer(&eps.conjugate()))));
        out.omega_pu.push(HermitianMatrix::from_hermitian_part(&pad_corner(&outer(&eps_p.conjugate()))));
    }
    Ok(out)
}

/// `[phi; 1][phi; 1]^H`.
pub fn lift_reflection(phi: &CVector) -> HermitianMatrix {
    HermitianMatrix::outer(&homogenize(phi))
}

/// Principal eigenvector, de-rotated by its homogenization entry and
/// projected entrywise onto the unit circle.
pub fn extract_reflection(lifted: &HermitianMatrix) -> CVector {
    let (_, u) = max_eigpair(lifted);
    let k = u.len() - 1;
    let reference = u[k].conj();
    CVector::from_fn(k, |i, _| {
        let z = u[i] * reference;
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            c64(1.0, 0.0)
        }
    })
}

/// SDP of one reflection pass without the DC rows: lifted blocks only.
pub fn reflection_sdp(
    mats: &LiftMatrices,
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
) -> Result<SdpProblem> {
    let m = state.n_ris();
    let dim = ch.n_elements() + 1;
    let q = aux.interference_weights(decoder);
    let mut p = SdpProblem::with_blocks(vec![dim; m]);
    let mut objective = LinearForm::new();
    for j in 0..m {
        objective.push(j, &mats.lambda[j] - &mats.omega[j].scaled(q[j]));
        for k in 0..dim {
            p.add_eq(LinearForm::on(j, HermitianMatrix::diagonal_selector(dim, k)), 1.0);
        }
    }
    p.set_objective(objective);

    let gamma_th = params.qos_sinr();
    if gamma_th > 0.0 {
        let cap = ch.h_p.dotc(&state.w).norm_sqr() / gamma_th - params.noise_power;
        if !(cap > 0.0) {
            return Err(Error::SubproblemInfeasible("PU target unreachable at the current beamformer".into()));
        }
        let mut qos = LinearForm::new();
        for j in 0..m {
            qos.push(j, mats.omega_pu[j].scaled(1.0 / cap));
        }
        p.add_le(qos, 1.0 - CONSTRAINT_MARGIN);
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionOutcome {
    pub phi: Vec<CVector>,
    pub report: InnerReport,
}

/// One reflection update. The returned vectors replace the incoming ones only
/// when the new state is feasible and `f1` does not decrease; otherwise the
/// incoming vectors are returned with `report.accepted == false`.
pub fn solve_reflection(
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
    cfg: &InnerConfig,
) -> Result<ReflectionOutcome> {
    cfg.validate()?;
    let mats = build_lift_matrices(aux, state, ch, params)?;
    let base = reflection_sdp(&mats, aux, state, ch, params, decoder)?;
    let warm = state.phi.iter().map(lift_reflection).collect();
    let (lifted, mut report) = run_dc_loop(&base, warm, cfg, "reflection")?;

    let candidate = NetworkState { phi: lifted.iter().map(extract_reflection).collect(), ..state.clone() };
    let before = fp::f1(aux, state, ch, params, decoder);
    let after = fp::f1(aux, &candidate, ch, params, decoder);
    report.accepted = after >= before && constraint_report(&candidate, ch, params).is_feasible(ACCEPT_TOL);
    let phi = if report.accepted { candidate.phi } else { state.phi.clone() };
    Ok(ReflectionOutcome { phi, report })
}
