//! Benchmark schemes: single-user decoding (SUD), TDMA, 2-bit phase
//! shifters and active-antenna secondary transmitters (AA-NOMA).

use std::f64::consts::{FRAC_PI_2, LN_2, TAU};
use std::fmt;

use crate::bcd::{self, BcdConfig, RunReport};
use crate::beam;
use crate::channel::{ActiveChannelSet, ChannelSet};
use crate::error::{Error, Result};
use crate::fp;
use crate::linalg::{c64, CVector, C64};
use crate::ps;
use crate::refl::ACCEPT_TOL;
use crate::system::{self, constraint_report, Decoder, NetworkState, SystemParams};

/// Transmit antennas per secondary transmitter in AA-NOMA.
pub const AA_ANTENNAS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeId {
    Proposed,
    Sud,
    Tdma,
    Proposed2bit,
    /// Active secondary transmitters with per-ST power budget in watts.
    AaNoma(f64),
}

impl SchemeId {
    /// Name used in result files.
    pub fn name(&self) -> &'static str {
        match self {
            SchemeId::Proposed => "proposed",
            SchemeId::Sud => "sud",
            SchemeId::Tdma => "tdma",
            SchemeId::Proposed2bit => "proposed_2bit",
            SchemeId::AaNoma(_) => "aa_noma",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SchemeId::AaNoma(p) if !(*p > 0.0 && p.is_finite()) => {
                Err(Error::InvalidArgument(format!("AA-NOMA power must be positive, got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// Parses a name from [`SchemeId::name`]; `aa_noma` takes `aa_power_w`.
    pub fn from_name(name: &str, aa_power_w: f64) -> Result<Self> {
        let s = match name {
            "proposed" => SchemeId::Proposed,
            "sud" => SchemeId::Sud,
            "tdma" => SchemeId::Tdma,
            "proposed_2bit" => SchemeId::Proposed2bit,
            "aa_noma" => SchemeId::AaNoma(aa_power_w),
            other => return Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        };
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// WSSE when every RIS treats all other RIS signals as noise.
pub fn sud_wsse(state: &NetworkState, ch: &ChannelSet, params: &SystemParams) -> f64 {
    system::wsse(state, ch, params, &Decoder::Sud)
}

/// The joint optimization with single-user decoding at the AP.
pub fn run_sud(ch: &ChannelSet, params: &SystemParams, cfg: &BcdConfig) -> Result<RunReport> {
    bcd::run_with_decoder(ch, params, &Decoder::Sud, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdmaReport {
    /// `(1/M) sum_j w_j log2(1 + gamma_j)`.
    pub wsse: f64,
    /// Weighted rate of each slot; 0 for a slot without a feasible point.
    pub slot_wsse: Vec<f64>,
    /// Lowest PU rate over the feasible slots.
    pub pu_rate: f64,
    pub outer_iterations: usize,
    pub failed_slots: usize,
    /// Every feasible slot met the outer stopping rule.
    pub all_converged: bool,
}

/// One slot per RIS, each optimized as a single-RIS problem with all
/// constraints.
pub fn tdma(ch: &ChannelSet, params: &SystemParams, cfg: &BcdConfig) -> Result<TdmaReport> {
    params.validate(ch.n_ris())?;
    let m = ch.n_ris();
    let mut slot_wsse = Vec::with_capacity(m);
    let mut pu_rate = f64::INFINITY;
    let mut outer_iterations = 0;
    let mut failed_slots = 0;
    let mut all_converged = true;
    for j in 0..m {
        let slot_ch = ch.subset(&[j])?;
        match bcd::run(&slot_ch, &params.subset(&[j]), cfg) {
            Ok(rep) => {
                slot_wsse.push(rep.final_wsse());
                pu_rate = pu_rate.min(rep.pu_rate);
                outer_iterations += rep.counts.outer;
                all_converged &= rep.status == bcd::RunStatus::Converged;
            }
            Err(Error::InitInfeasible) => {
                slot_wsse.push(0.0);
                failed_slots += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if failed_slots == m {
        return Err(Error::InitInfeasible);
    }
    Ok(TdmaReport {
        wsse: slot_wsse.iter().sum::<f64>() / m as f64,
        slot_wsse,
        pu_rate,
        outer_iterations,
        failed_slots,
        all_converged,
    })
}

/// Snaps every phase to the nearest of {0, pi/2, pi, 3pi/2} by circular
/// distance; exact ties go to the smaller level.
pub fn quantize_2bit(phi: &CVector) -> CVector {
    const LEVELS: [C64; 4] = [c64(1.0, 0.0), c64(0.0, 1.0), c64(-1.0, 0.0), c64(0.0, -1.0)];
    phi.map(|z| {
        let theta = z.arg().rem_euclid(TAU);
        let q = theta / FRAC_PI_2;
        let k = q.floor();
        let k = if q - k > 0.5 { k + 1.0 } else { k };
        LEVELS[(k as usize) % 4]
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoBitReport {
    pub continuous: RunReport,
    pub state: NetworkState,
    pub wsse: f64,
    pub pu_rate: f64,
    /// Whether a beamforming pass was needed to restore PU QoS.
    pub repaired: bool,
}

/// Continuous optimization, then 2-bit quantization of every reflection
/// vector followed by a power-splitting re-optimization. When the quantized
/// reflections break PU QoS, one beamforming pass restores it first.
pub fn proposed_2bit(ch: &ChannelSet, params: &SystemParams, cfg: &BcdConfig) -> Result<TwoBitReport> {
    let continuous = bcd::run(ch, params, cfg)?;
    quantize_run(continuous, ch, params, cfg)
}

/// The quantization stage of [`proposed_2bit`] applied to a finished
/// continuous run.
pub fn quantize_run(
    continuous: RunReport,
    ch: &ChannelSet,
    params: &SystemParams,
    cfg: &BcdConfig,
) -> Result<TwoBitReport> {
    let decoder = continuous.decoder.clone();
    let mut state = NetworkState {
        phi: continuous.final_state.phi.iter().map(quantize_2bit).collect(),
        ..continuous.final_state.clone()
    };

    let mut repaired = false;
    let feasible = |s: &NetworkState| constraint_report(s, ch, params).is_feasible(ACCEPT_TOL);
    let resplit = |s: &NetworkState| -> Option<Vec<f64>> {
        let aux = fp::update_aux(s, ch, params, &decoder);
        let qp = ps::build_ps_qp(&aux, s, ch, params, &decoder).ok()?;
        let sol = ps::solve_ps(&qp, cfg.ps_tol).ok()?;
        let candidate = NetworkState { delta: sol.delta, ..s.clone() };
        feasible(&candidate).then_some(candidate.delta)
    };

    match resplit(&state) {
        Some(delta) => state.delta = delta,
        None => {
            let aux = fp::update_aux(&state, ch, params, &decoder);
            let fixed = match beam::repair_beam(&aux, &state, ch, params, &decoder, &cfg.beam) {
                Ok(out) if out.report.accepted => out.w,
                Ok(_) | Err(Error::SubproblemInfeasible(_) | Error::SolverFailed(_)) => {
                    return Err(Error::QosInfeasible)
                }
                Err(e) => return Err(e),
            };
            state.w = fixed;
            repaired = true;
            if let Some(delta) = resplit(&state) {
                state.delta = delta;
            }
        }
    }
    if !feasible(&state) {
        return Err(Error::QosInfeasible);
    }
    Ok(TwoBitReport {
        wsse: system::wsse(&state, ch, params, &decoder),
        pu_rate: system::pu_rate(&state, ch, params),
        state,
        continuous,
        repaired,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaNomaReport {
    pub wsse: f64,
    pub pu_rate: f64,
    /// Common power-scaling factor in [0, 1] applied to every ST.
    pub scale: f64,
    pub order: system::DecodingOrder,
}

/// Active-antenna benchmark. Each ST sends with maximum-ratio transmission
/// towards the AP at power `scale * p_st`; the PT serves the PU with
/// full-power maximum-ratio transmission. `scale` is the largest value in
/// [0, 1] that keeps the PU rate at its threshold. The AP decodes with SIC,
/// strongest received ST first.
pub fn aa_noma(ch: &ChannelSet, act: &ActiveChannelSet, params: &SystemParams, p_st: f64) -> Result<AaNomaReport> {
    SchemeId::AaNoma(p_st).validate()?;
    let m = act.to_ap.len();
    params.validate(m)?;
    if act.to_pu.len() != m {
        return Err(Error::Dimension("ST channel lists differ in length".into()));
    }
    let hp_norm = ch.h_p.norm();
    if hp_norm == 0.0 {
        return Err(Error::QosInfeasible);
    }
    let w = &ch.h_p * c64(params.power_budget.sqrt() / hp_norm, 0.0);
    let pu_signal = ch.h_p.dotc(&w).norm_sqr();
    let ap_floor = ch.h.dotc(&w).norm_sqr() + params.noise_power;

    // Unit-power MRT: received power ||h||^2 at the AP, |h_pu^H h|^2 / ||h||^2
    // leaked to the PU.
    let at_ap: Vec<f64> = act.to_ap.iter().map(|h| p_st * h.norm_squared()).collect();
    let at_pu: f64 = act
        .to_ap
        .iter()
        .zip(&act.to_pu)
        .map(|(h, g)| if h.norm() > 0.0 { p_st * g.dotc(h).norm_sqr() / h.norm_squared() } else { 0.0 })
        .sum();

    let gamma_th = params.qos_sinr();
    let scale = if gamma_th == 0.0 {
        1.0
    } else {
        let room = pu_signal / gamma_th - params.noise_power;
        if room < 0.0 {
            return Err(Error::QosInfeasible);
        }
        if at_pu > 0.0 {
            (room / at_pu).min(1.0)
        } else {
            1.0
        }
    };

    let s: Vec<f64> = at_ap.iter().map(|p| scale * p).collect();
    let order = system::order_from_gains(&s);
    let gammas = system::sinrs_from_powers(&s, ap_floor, &Decoder::Sic(order.clone()));
    let pu_sinr = pu_signal / (scale * at_pu + params.noise_power);
    Ok(AaNomaReport {
        wsse: system::wsse_from_sinrs(&params.weights, &gammas),
        pu_rate: pu_sinr.ln_1p() / LN_2,
        scale,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_active_channels, draw_channels, draw_scenario, ScenarioTemplate};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn phase(theta: f64) -> CVector {
        CVector::from_element(1, C64::from_polar(1.0, theta))
    }

    #[test]
    fn quantizer_examples() {
        assert_eq!(quantize_2bit(&phase(0.6))[0], c64(1.0, 0.0));
        assert_eq!(quantize_2bit(&phase(FRAC_PI_4))[0], c64(1.0, 0.0));
        assert_eq!(quantize_2bit(&phase(3.0))[0], c64(-1.0, 0.0));
        assert_eq!(quantize_2bit(&phase(FRAC_PI_2))[0], c64(0.0, 1.0));
        assert_eq!(quantize_2bit(&phase(-0.2))[0], c64(1.0, 0.0));
        assert_eq!(quantize_2bit(&phase(-1.3))[0], c64(0.0, -1.0));
        assert_eq!(quantize_2bit(&phase(7.0 * PI / 4.0 + 1e-9))[0], c64(1.0, 0.0));
    }

    #[test]
    fn sud_two_user_example() {
        let s = [3.0, 1.0];
        let g = system::sinrs_from_powers(&s, 1.0, &Decoder::Sud);
        assert_relative_eq!(g[0], 1.5, epsilon = 1e-15);
        assert_relative_eq!(g[1], 0.25, epsilon = 1e-15);
        let wsse = system::wsse_from_sinrs(&[1.0, 1.0], &g);
        assert_relative_eq!(wsse, 2.5f64.log2() + 1.25f64.log2(), epsilon = 1e-14);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [SchemeId::Proposed, SchemeId::Sud, SchemeId::Tdma, SchemeId::Proposed2bit, SchemeId::AaNoma(0.5)] {
            assert_eq!(SchemeId::from_name(s.name(), 0.5).unwrap(), s);
        }
        assert!(SchemeId::from_name("noma", 1.0).is_err());
        assert!(SchemeId::from_name("aa_noma", 0.0).is_err());
    }

    fn desk_active(seed: u64, m: usize) -> (ChannelSet, ActiveChannelSet) {
        let t = ScenarioTemplate { n_ris: m, ..ScenarioTemplate::desk() };
        let s = draw_scenario(&t, seed).unwrap();
        (draw_channels(&s, seed).unwrap(), draw_active_channels(&s, seed, AA_ANTENNAS).unwrap())
    }

    #[test]
    fn aa_single_st_matches_mrt_snr() {
        let (ch, act) = desk_active(2, 1);
        let params = SystemParams { rate_threshold: 0.0, ..SystemParams::defaults(1) };
        let p = 0.01;
        let rep = aa_noma(&ch, &act, &params, p).unwrap();
        let w = &ch.h_p * c64(params.power_budget.sqrt() / ch.h_p.norm(), 0.0);
        let d = ch.h.dotc(&w).norm_sqr() + params.noise_power;
        assert_eq!(rep.scale, 1.0);
        assert_relative_eq!(rep.wsse, (1.0 + p * act.to_ap[0].norm_squared() / d).log2(), max_relative = 1e-12);
    }

    #[test]
    fn aa_scale_is_largest_feasible() {
        let mut binding = 0;
        for seed in 0..10 {
            let (ch, act) = desk_active(seed, 2);
            let params = SystemParams { rate_threshold: 4.0, ..SystemParams::defaults(2) };
            let p = 10.0;
            let Ok(rep) = aa_noma(&ch, &act, &params, p) else { continue };
            assert!(rep.pu_rate >= params.rate_threshold - 1e-9);
            if rep.scale < 1.0 {
                binding += 1;
                let signal = params.power_budget * ch.h_p.norm_squared();
                let leak: f64 = act
                    .to_ap
                    .iter()
                    .zip(&act.to_pu)
                    .map(|(h, g)| p * g.dotc(h).norm_sqr() / h.norm_squared())
                    .sum();
                let rate = |s: f64| (1.0 + signal / (s * leak + params.noise_power)).log2();
                assert_relative_eq!(rate(rep.scale), params.rate_threshold, max_relative = 1e-9);
                assert!(rate(1.01 * rep.scale) < params.rate_threshold);
            }
        }
        assert!(binding > 0, "no drop exercised a binding PU constraint");
        let (ch, act) = desk_active(0, 2);
        let zero = aa_noma(&ch, &act, &SystemParams::defaults(2), 1e-30).unwrap();
        assert!(zero.wsse < 1e-12);
    }
}
