//! Fractional-programming surrogate of the WSSE.
//!
//! The Lagrangian dual transform moves each SINR out of its logarithm with an
//! auxiliary `alpha_j`, and the quadratic transform then decouples the
//! remaining ratio `|A_j|^2 / B_j` with a complex auxiliary `beta_j`. The
//! resulting objective `f1` is concave in each block of decision variables
//! once the auxiliaries are fixed, and both auxiliaries have closed-form
//! maximizers. All values here use natural logarithms.

use crate::channel::ChannelSet;
use crate::linalg::{c64, C64};
use crate::system::{self, Decoder, NetworkState, SystemParams};

/// Lower clamp on `alpha_j` so the transform stays finite at zero SINR.
pub const ALPHA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AuxVars {
    pub alpha: Vec<f64>,
    pub beta: Vec<C64>,
}

impl AuxVars {
    /// `alpha = floor`, `beta = 0`: the surrogate of a zero-rate network.
    pub fn zero(m: usize) -> Self {
        Self { alpha: vec![ALPHA_FLOOR; m], beta: vec![c64(0.0, 0.0); m] }
    }

    /// `sqrt(w_j (1 + alpha_j))`, the factor multiplying `Re{beta_j^* A_j}`
    /// (without the 2).
    pub fn signal_factors(&self, weights: &[f64]) -> Vec<f64> {
        weights.iter().zip(&self.alpha).map(|(w, a)| (w * (1.0 + a)).sqrt()).collect()
    }

    /// `q_i = sum over j with S_i inside B_j of |beta_j|^2`, the weight
    /// of each signal power in the penalty term of `f1`.
    pub fn interference_weights(&self, decoder: &Decoder) -> Vec<f64> {
        let m = self.beta.len();
        (0..m)
            .map(|i| {
                (0..m)
                    .filter(|&j| decoder.in_denominator(j, i))
                    .map(|j| self.beta[j].norm_sqr())
                    .sum()
            })
            .collect()
    }

    /// `sum_j |beta_j|^2`, the weight of the direct link and noise.
    pub fn total_beta_power(&self) -> f64 {
        self.beta.iter().map(|b| b.norm_sqr()).sum()
    }

    /// `sum_j w_j [ln(1 + alpha_j) - alpha_j]`.
    pub fn constant_term(&self, weights: &[f64]) -> f64 {
        weights
            .iter()
            .zip(&self.alpha)
            .map(|(w, a)| w * (a.ln_1p() - a))
            .sum()
    }
}

/// Quadratic-transform denominators `B_j = sum_{i in B(j)} S_i + |h^H w|^2
/// + sigma^2`, where `B(j)` holds RIS `j` and every RIS it is still exposed to.
pub fn transform_denominators(
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
) -> Vec<f64> {
    let s = system::signal_powers(state, ch);
    let d = system::direct_plus_noise(state, ch, params);
    (0..s.len())
        .map(|j| {
            (0..s.len())
                .filter(|&i| decoder.in_denominator(j, i))
                .map(|i| s[i])
                .sum::<f64>()
                + d
        })
        .collect()
}

/// Closed-form maximizers: `alpha_j = gamma_j` and
/// `beta_j = sqrt(w_j (1 + alpha_j)) A_j / B_j`.
pub fn update_aux(state: &NetworkState, ch: &ChannelSet, params: &SystemParams, decoder: &Decoder) -> AuxVars {
    let gammas = system::sinrs(state, ch, params, decoder);
    let b = transform_denominators(state, ch, params, decoder);
    let alpha: Vec<f64> = gammas.iter().map(|g| g.max(ALPHA_FLOOR)).collect();
    let beta = (0..alpha.len())
        .map(|j| {
            let a = system::effective_gain(j, state, ch).expect("index in range");
            a * ((params.weights[j] * (1.0 + alpha[j])).sqrt() / b[j])
        })
        .collect();
    AuxVars { alpha, beta }
}

/// The surrogate `f1(alpha, beta, state)`.
pub fn f1(aux: &AuxVars, state: &NetworkState, ch: &ChannelSet, params: &SystemParams, decoder: &Decoder) -> f64 {
    let factors = aux.signal_factors(&params.weights);
    let b = transform_denominators(state, ch, params, decoder);
    let coupling: f64 = (0..aux.beta.len())
        .map(|j| {
            let a = system::effective_gain(j, state, ch).expect("index in range");
            2.0 * factors[j] * (aux.beta[j].conj() * a).re - aux.beta[j].norm_sqr() * b[j]
        })
        .sum();
    aux.constant_term(&params.weights) + coupling
}

/// `ln(1 + alpha) - alpha + (1 + alpha) gamma / (1 + gamma)`; at most
/// `ln(1 + gamma)` with equality at `alpha = gamma`.
pub fn dual_transform_value(alpha: f64, gamma: f64) -> f64 {
    alpha.ln_1p() - alpha + (1.0 + alpha) * gamma / (1.0 + gamma)
}

/// Single quadratic-transform term `2 sqrt(w (1 + alpha)) Re{beta^* a} -
/// |beta|^2 b`.
pub fn quadratic_transform_term(weight: f64, alpha: f64, beta: C64, a: C64, b: f64) -> f64 {
    2.0 * (weight * (1.0 + alpha)).sqrt() * (beta.conj() * a).re - beta.norm_sqr() * b
}
