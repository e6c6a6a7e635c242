//! Decision variables and every physical quantity of the model: harvested
//! power, PU SINR, per-RIS SIC SINRs, weighted sum spectral efficiency (WSSE)
//! and the constraint residuals.
//!
//! Powers are in watts throughout. RIS indices are 0-based.

use crate::channel::{dbm_to_watts, ChannelSet};
use crate::error::{Error, Result};
use crate::linalg::{c64, conj_hadamard, row_dot, CVector, C64};

/// PT beamformer `w`, per-RIS reflection vectors and power-splitting
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub w: CVector,
    pub phi: Vec<CVector>,
    pub delta: Vec<f64>,
}

impl NetworkState {
    pub fn n_ris(&self) -> usize {
        self.phi.len()
    }

    pub fn check_dims(&self, ch: &ChannelSet) -> Result<()> {
        if self.w.len() != ch.n_antennas()
            || self.phi.len() != ch.n_ris()
            || self.delta.len() != ch.n_ris()
            || self.phi.iter().any(|p| p.len() != ch.n_elements())
        {
            return Err(Error::Dimension(format!(
                "state (N={}, M={}) does not match channels (N={}, M={}, K={})",
                self.w.len(),
                self.phi.len(),
                ch.n_antennas(),
                ch.n_ris(),
                ch.n_elements()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// PT power budget `P` (W).
    pub power_budget: f64,
    /// Noise power `sigma^2` (W).
    pub noise_power: f64,
    /// Energy-harvesting efficiency `chi`.
    pub eh_efficiency: f64,
    /// Per-element consumption `mu` (W).
    pub element_power: f64,
    /// PU rate threshold (bits/s/Hz).
    pub rate_threshold: f64,
    /// Priority weights, one per RIS.
    pub weights: Vec<f64>,
}

impl SystemParams {
    /// P = 34 dBm, sigma^2 = -80 dBW, chi = 0.8, mu = 1e-6 W, R^TH = 1.5,
    /// unit weights.
    pub fn defaults(n_ris: usize) -> Self {
        Self {
            power_budget: dbm_to_watts(34.0),
            noise_power: 1e-8,
            eh_efficiency: 0.8,
            element_power: 1e-6,
            rate_threshold: 1.5,
            weights: vec![1.0; n_ris],
        }
    }

    /// SINR the PU needs: `2^R_TH - 1`.
    pub fn qos_sinr(&self) -> f64 {
        self.rate_threshold.exp2() - 1.0
    }

    /// Same parameters with weights restricted to the listed RIS.
    pub fn subset(&self, ris: &[usize]) -> Self {
        Self { weights: ris.iter().map(|&j| self.weights[j]).collect(), ..self.clone() }
    }

    pub fn validate(&self, n_ris: usize) -> Result<()> {
        let positive = [
            ("power budget", self.power_budget),
            ("noise power", self.noise_power),
            ("EH efficiency", self.eh_efficiency),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.element_power >= 0.0) || !(self.rate_threshold >= 0.0) {
            return Err(Error::InvalidArgument("mu and R_TH must be nonnegative".into()));
        }
        if self.weights.len() != n_ris {
            return Err(Error::Dimension(format!("{} weights for {n_ris} RIS", self.weights.len())));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Fixed SIC decoding order: `order[p]` is the RIS decoded at position `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodingOrder {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl DecodingOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let m = order.len();
        let mut position = vec![usize::MAX; m];
        for (p, &j) in order.iter().enumerate() {
            if j >= m || position[j] != usize::MAX {
                return Err(Error::InvalidArgument(format!("{order:?} is not a permutation")));
            }
            position[j] = p;
        }
        Ok(Self { order, position })
    }

    pub fn identity(m: usize) -> Self {
        Self::new((0..m).collect()).expect("identity is a permutation")
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Decoding position of RIS `j`.
    pub fn position(&self, j: usize) -> usize {
        self.position[j]
    }
}

/// How the AP separates the superimposed backscatter signals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoder {
    /// Successive interference cancellation in a fixed order.
    Sic(DecodingOrder),
    /// Single-user decoding: every other RIS is noise.
    Sud,
}

impl Decoder {
    /// Whether RIS `i`'s signal power enters the quadratic-transform
    /// denominator `B_j` of RIS `j` (always true for `i == j`).
    pub fn in_denominator(&self, j: usize, i: usize) -> bool {
        match self {
            Decoder::Sic(order) => order.position(i) >= order.position(j),
            Decoder::Sud => true,
        }
    }
}

/// Entries of the row `eps_j = delta_j g_j^H diag(F_j w)`.
pub fn cascaded_row(j: usize, state: &NetworkState, ch: &ChannelSet) -> CVector {
    let fw = &ch.f[j] * &state.w;
    conj_hadamard(&ch.g[j], &fw) * c64(state.delta[j], 0.0)
}

/// Entries of `eps_jp = delta_j g_pj^H diag(F_j w)`.
pub fn cascaded_row_pu(j: usize, state: &NetworkState, ch: &ChannelSet) -> CVector {
    let fw = &ch.f[j] * &state.w;
    conj_hadamard(&ch.g_p[j], &fw) * c64(state.delta[j], 0.0)
}

fn check_index(j: usize, state: &NetworkState) -> Result<()> {
    if j >= state.n_ris() {
        return Err(Error::IndexOutOfRange { index: j, len: state.n_ris() });
    }
    Ok(())
}

/// `A_j = delta_j g_j^H diag(F_j w) phi_j`.
pub fn effective_gain(j: usize, state: &NetworkState, ch: &ChannelSet) -> Result<C64> {
    check_index(j, state)?;
    Ok(row_dot(&cascaded_row(j, state, ch), &state.phi[j]))
}

/// `S_j = |A_j|^2` for every RIS.
pub fn signal_powers(state: &NetworkState, ch: &ChannelSet) -> Vec<f64> {
    (0..state.n_ris())
        .map(|j| row_dot(&cascaded_row(j, state, ch), &state.phi[j]).norm_sqr())
        .collect()
}

/// Backscatter interference powers at the PU, one per RIS.
pub fn pu_interference_powers(state: &NetworkState, ch: &ChannelSet) -> Vec<f64> {
    (0..state.n_ris())
        .map(|j| row_dot(&cascaded_row_pu(j, state, ch), &state.phi[j]).norm_sqr())
        .collect()
}

/// `|h^H w|^2 + sigma^2`, the part of every SIC denominator that does not
/// depend on the RIS.
pub fn direct_plus_noise(state: &NetworkState, ch: &ChannelSet, params: &SystemParams) -> f64 {
    ch.h.dotc(&state.w).norm_sqr() + params.noise_power
}

/// `chi (1 - delta_j^2) ||F_j w||^2`.
pub fn harvested_power(j: usize, state: &NetworkState, ch: &ChannelSet, params: &SystemParams) -> Result<f64> {
    check_index(j, state)?;
    let incident = (&ch.f[j] * &state.w).norm_squared();
    Ok(params.eh_efficiency * (1.0 - state.delta[j].powi(2)) * incident)
}

pub fn pu_sinr(state: &NetworkState, ch: &ChannelSet, params: &SystemParams) -> f64 {
    let signal = ch.h_p.dotc(&state.w).norm_sqr();
    let interference: f64 = pu_interference_powers(state, ch).iter().sum();
    signal / (interference + params.noise_power)
}

pub fn pu_rate(state: &NetworkState, ch: &ChannelSet, params: &SystemParams) -> f64 {
    pu_sinr(state, ch, params).ln_1p() / std::f64::consts::LN_2
}

/// SINRs from signal powers `s` and the common term `d = |h^H w|^2 + sigma^2`.
pub fn sinrs_from_powers(s: &[f64], d: f64, decoder: &Decoder) -> Vec<f64> {
    (0..s.len())
        .map(|j| {
            let interference: f64 = (0..s.len())
                .filter(|&i| i != j && decoder.in_denominator(j, i))
                .map(|i| s[i])
                .sum();
            s[j] / (interference + d)
        })
        .collect()
}

pub fn sinrs(state: &NetworkState, ch: &ChannelSet, params: &SystemParams, decoder: &Decoder) -> Vec<f64> {
    sinrs_from_powers(&signal_powers(state, ch), direct_plus_noise(state, ch, params), decoder)
}

/// Per-RIS SINRs under SIC with the given order, indexed by RIS.
pub fn sic_sinrs(
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    order: &DecodingOrder,
) -> Result<Vec<f64>> {
    if order.len() != state.n_ris() {
        return Err(Error::InvalidArgument(format!(
            "order has {} entries for {} RIS",
            order.len(),
            state.n_ris()
        )));
    }
    Ok(sinrs(state, ch, params, &Decoder::Sic(order.clone())))
}

/// `sum_j w_j log2(1 + gamma_j)`.
pub fn wsse_from_sinrs(weights: &[f64], gammas: &[f64]) -> f64 {
    weights
        .iter()
        .zip(gammas)
        .map(|(w, g)| w * g.ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

pub fn wsse(state: &NetworkState, ch: &ChannelSet, params: &SystemParams, decoder: &Decoder) -> f64 {
    wsse_from_sinrs(&params.weights, &sinrs(state, ch, params, decoder))
}

/// Signed constraint residuals; a constraint holds when its slack is
/// nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    /// `P - ||w||^2`.
    pub power_slack: f64,
    /// `chi (1 - delta_j^2) ||F_j w||^2 - mu K` per RIS.
    pub eh_slack: Vec<f64>,
    /// `log2(1 + gamma_p) - R_TH`.
    pub pu_rate_slack: f64,
    /// `max_{j,k} | |phi_jk| - 1 |`.
    pub unit_modulus_error: f64,
    /// `0 < delta_j < 1` for all j.
    pub delta_bounds_ok: bool,
    power_scale: f64,
    eh_scale: f64,
    rate_scale: f64,
}

impl ConstraintReport {
    /// Feasibility with slacks measured relative to their natural scale
    /// (`P`, `mu K`, `R_TH`).
    pub fn is_feasible(&self, rel_tol: f64) -> bool {
        self.power_slack >= -rel_tol * self.power_scale
            && self.eh_slack.iter().all(|s| *s >= -rel_tol * self.eh_scale)
            && self.pu_rate_slack >= -rel_tol * self.rate_scale
            && self.unit_modulus_error <= 1e-9
            && self.delta_bounds_ok
    }

    /// Smallest slack divided by its scale (negative when violated).
    pub fn worst_relative_slack(&self) -> f64 {
        let eh = self.eh_slack.iter().map(|s| s / self.eh_scale).fold(f64::INFINITY, f64::min);
        (self.power_slack / self.power_scale)
            .min(eh)
            .min(self.pu_rate_slack / self.rate_scale)
    }

    pub fn relative_eh_slack(&self, j: usize) -> f64 {
        self.eh_slack[j] / self.eh_scale
    }

    pub fn relative_power_slack(&self) -> f64 {
        self.power_slack / self.power_scale
    }

    pub fn relative_pu_rate_slack(&self) -> f64 {
        self.pu_rate_slack / self.rate_scale
    }
}

pub fn constraint_report(state: &NetworkState, ch: &ChannelSet, params: &SystemParams) -> ConstraintReport {
    let mu_k = params.element_power * ch.n_elements() as f64;
    let eh_slack = (0..state.n_ris())
        .map(|j| harvested_power(j, state, ch, params).expect("index in range") - mu_k)
        .collect();
    let unit_modulus_error = state
        .phi
        .iter()
        .flat_map(|p| p.iter())
        .map(|z| (z.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    ConstraintReport {
        power_slack: params.power_budget - state.w.norm_squared(),
        eh_slack,
        pu_rate_slack: pu_rate(state, ch, params) - params.rate_threshold,
        unit_modulus_error,
        delta_bounds_ok: state.delta.iter().all(|d| *d > 0.0 && *d < 1.0),
        power_scale: params.power_budget,
        eh_scale: mu_k.max(f64::MIN_POSITIVE),
        rate_scale: params.rate_threshold.max(1e-3),
    }
}

/// Full-power beamformer with identical real and imaginary parts on every
/// antenna: `sqrt(P/N) (1 + j) / sqrt(2)`.
pub fn reference_beamformer(n: usize, power_budget: f64) -> CVector {
    let a = (power_budget / n as f64).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_element(n, c64(a, a))
}

/// Indices sorted by descending gain, ties by ascending index.
pub fn order_from_gains(gains: &[f64]) -> DecodingOrder {
    let mut idx: Vec<usize> = (0..gains.len()).collect();
    idx.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    DecodingOrder::new(idx).expect("sorted indices form a permutation")
}

/// Reference gains `|g_j^H diag(F_j w0) 1|` with `delta = 1`.
pub fn reference_gains(ch: &ChannelSet, params: &SystemParams) -> Vec<f64> {
    let w0 = reference_beamformer(ch.n_antennas(), params.power_budget);
    (0..ch.n_ris())
        .map(|j| {
            let fw = &ch.f[j] * &w0;
            conj_hadamard(&ch.g[j], &fw).iter().sum::<C64>().norm()
        })
        .collect()
}

/// The fixed SIC order, strongest reference gain first.
pub fn decoding_order(ch: &ChannelSet, params: &SystemParams) -> DecodingOrder {
    order_from_gains(&reference_gains(ch, params))
}
