//! Transmit-beamforming subproblem.
//!
//! The PT beamformer is lifted to `W = [w; 1][w; 1]^H`. Every term of the
//! surrogate and every constraint that involves `w` is then linear in `W`,
//! and the rank-one requirement is handled by the same penalized DC loop as
//! the reflection subproblem.

use crate::channel::ChannelSet;
use crate::conic::{max_eigpair, HermitianMatrix, LinearForm, SdpProblem};
use crate::error::{Error, Result};
use crate::fp::{self, AuxVars};
use crate::linalg::{c64, homogenize, lift_row, outer, pad_corner, CMatrix, CVector};
use crate::refl::{run_dc_loop, InnerConfig, InnerReport, ACCEPT_TOL, CONSTRAINT_MARGIN};
use crate::system::{constraint_report, Decoder, NetworkState, SystemParams};

/// Trace-form coefficient matrices of the beamforming subproblem, all of
/// size `(N + 1) x (N + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMatrices {
    /// `Tr(N_j W) = 2 Re{beta_j^* xi_j w}`.
    pub n: Vec<HermitianMatrix>,
    /// `Tr(M_j W) = |xi_j w|^2`.
    pub m: Vec<HermitianMatrix>,
    /// `Tr(M_jp W) = |xi_jp w|^2`.
    pub m_pu: Vec<HermitianMatrix>,
    /// `Tr(T_j W) = ||F_j w||^2`.
    pub t: Vec<HermitianMatrix>,
    /// `Tr(H W) = |h^H w|^2`.
    pub h: HermitianMatrix,
    /// `Tr(H_p W) = |h_p^H w|^2`.
    pub h_pu: HermitianMatrix,
    /// `Tr(Xi W) = ||w||^2`.
    pub xi: HermitianMatrix,
}

/// Entries of the row `delta_j g^H diag(phi_j) F_j`.
fn beam_row(g: &CVector, phi: &CVector, f: &CMatrix, delta: f64) -> CVector {
    f.transpose() * g.zip_map(phi, |a, p| a.conj() * p) * c64(delta, 0.0)
}

fn padded(m: &CMatrix) -> HermitianMatrix {
    HermitianMatrix::from_hermitian_part(&pad_corner(m))
}

pub fn build_beam_matrices(
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
) -> Result<BeamMatrices> {
    state.check_dims(ch)?;
    if aux.beta.len() != state.n_ris() || params.weights.len() != state.n_ris() {
        return Err(Error::Dimension("auxiliaries or weights do not match the RIS count".into()));
    }
    let n_ant = ch.n_antennas();
    let mut out = BeamMatrices {
        n: Vec::new(),
        m: Vec::new(),
        m_pu: Vec::new(),
        t: Vec::new(),
        h: padded(&outer(&ch.h)),
        h_pu: padded(&outer(&ch.h_p)),
        xi: padded(&CMatrix::identity(n_ant, n_ant)),
    };
    for j in 0..state.n_ris() {
        let xi = beam_row(&ch.g[j], &state.phi[j], &ch.f[j], state.delta[j]);
        let xi_p = beam_row(&ch.g_p[j], &state.phi[j], &ch.f[j], state.delta[j]);
        out.n.push(HermitianMatrix::from_hermitian_part(&lift_row(&(&xi * aux.beta[j].conj()))));
        out.m.push(padded(&outer(&xi.conjugate())));
        out.m_pu.push(padded(&outer(&xi_p.conjugate())));
        out.t.push(padded(&(ch.f[j].adjoint() * &ch.f[j])));
    }
    Ok(out)
}

/// `[w; 1][w; 1]^H`.
pub fn lift_beam(w: &CVector) -> HermitianMatrix {
    HermitianMatrix::outer(&homogenize(w))
}

/// Principal eigenvector divided by its homogenization entry.
pub fn extract_beam(lifted: &HermitianMatrix) -> CVector {
    let (lmax, u) = max_eigpair(lifted);
    let n = u.len() - 1;
    let corner = u[n];
    if corner.norm() > 1e-12 {
        CVector::from_fn(n, |i, _| u[i] / corner)
    } else {
        CVector::from_fn(n, |i, _| u[i] * lmax.max(0.0).sqrt())
    }
}

/// SDP of one beamforming pass without the DC rows. Every inequality is
/// scaled so its right-hand side is one, then tightened by
/// [`CONSTRAINT_MARGIN`].
pub fn beam_sdp(
    mats: &BeamMatrices,
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
) -> Result<SdpProblem> {
    let dim = ch.n_antennas() + 1;
    let factors = aux.signal_factors(&params.weights);
    let q = aux.interference_weights(decoder);
    let mut p = SdpProblem::new(dim);

    let mut objective = mats.h.scaled(-aux.total_beta_power());
    for j in 0..state.n_ris() {
        objective = &objective + &mats.n[j].scaled(factors[j]);
        objective = &objective - &mats.m[j].scaled(q[j]);
    }
    p.set_objective(LinearForm::on(0, objective));

    p.add_eq(LinearForm::on(0, HermitianMatrix::diagonal_selector(dim, dim - 1)), 1.0);
    p.add_le(LinearForm::on(0, mats.xi.scaled(1.0 / params.power_budget)), 1.0 - CONSTRAINT_MARGIN);

    let mu_k = params.element_power * ch.n_elements() as f64;
    if mu_k > 0.0 {
        for j in 0..state.n_ris() {
            let coeff = params.eh_efficiency * (1.0 - state.delta[j].powi(2)) / mu_k;
            if !(coeff > 0.0) {
                return Err(Error::EhInfeasible(j));
            }
            p.add_ge(LinearForm::on(0, mats.t[j].scaled(coeff)), 1.0 + CONSTRAINT_MARGIN);
        }
    }

    let gamma_th = params.qos_sinr();
    if gamma_th > 0.0 {
        let mut qos = mats.h_pu.clone();
        for mp in &mats.m_pu {
            qos = &qos - &mp.scaled(gamma_th);
        }
        p.add_ge(
            LinearForm::on(0, qos.scaled(1.0 / (gamma_th * params.noise_power))),
            1.0 + CONSTRAINT_MARGIN,
        );
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutcome {
    pub w: CVector,
    pub report: InnerReport,
}

fn run_beam(
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
    cfg: &InnerConfig,
    require_ascent: bool,
) -> Result<BeamOutcome> {
    cfg.validate()?;
    let mats = build_beam_matrices(aux, state, ch, params)?;
    let base = beam_sdp(&mats, aux, state, ch, params, decoder)?;
    let (lifted, mut report) = run_dc_loop(&base, vec![lift_beam(&state.w)], cfg, "beamforming")?;

    let mut w = extract_beam(&lifted[0]);
    let power = w.norm_squared();
    if power > params.power_budget {
        w *= c64((params.power_budget / power).sqrt(), 0.0);
    }
    let candidate = NetworkState { w, ..state.clone() };
    let feasible = constraint_report(&candidate, ch, params).is_feasible(ACCEPT_TOL);
    let ascent = !require_ascent
        || fp::f1(aux, &candidate, ch, params, decoder) >= fp::f1(aux, state, ch, params, decoder);
    report.accepted = feasible && ascent;
    let w = if report.accepted { candidate.w } else { state.w.clone() };
    Ok(BeamOutcome { w, report })
}

/// One beamforming update. The returned beamformer replaces the incoming one
/// only when the new state is feasible and `f1` does not decrease.
pub fn solve_beam(
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
    cfg: &InnerConfig,
) -> Result<BeamOutcome> {
    run_beam(aux, state, ch, params, decoder, cfg, true)
}

/// Beamforming pass that accepts any feasible result, for an incoming state
/// that violates a constraint (so ascent against it means nothing).
pub fn repair_beam(
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
    cfg: &InnerConfig,
) -> Result<BeamOutcome> {
    run_beam(aux, state, ch, params, decoder, cfg, false)
}

/// Beamforming pass with a zero-rate surrogate, used to reach a feasible
/// point when the incoming beamformer violates a constraint.
pub fn seek_feasible_beam(
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
    cfg: &InnerConfig,
) -> Result<BeamOutcome> {
    run_beam(&AuxVars::zero(state.n_ris()), state, ch, params, decoder, cfg, false)
}
