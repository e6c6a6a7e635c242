//! Power-splitting subproblem.
//!
//! With the auxiliaries, `w` and every `phi_j` fixed, the surrogate is a
//! separable concave quadratic in `delta`:
//!
//! ```text
//! maximize    sum_j a_j delta_j - sum_j c_j delta_j^2
//! subject to  lo <= delta_j <= min(u_j, hi)
//!             sum_j k_j delta_j^2 <= C
//! ```
//!
//! The single coupling constraint is handled by bisection on its multiplier;
//! for a fixed multiplier every coordinate has a clipped closed form.

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::fp::AuxVars;
use crate::linalg::{conj_hadamard, row_dot, CVector, C64};
use crate::system::{Decoder, NetworkState, SystemParams};

/// Lower end of the closed interval that stands in for `delta > 0`.
pub const DELTA_MIN: f64 = 1e-6;
/// Upper end of the closed interval that stands in for `delta < 1`.
pub const DELTA_MAX: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PsQp {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    /// Upper bounds implied by the energy-harvesting constraints.
    pub box_upper: Vec<f64>,
    pub qos_k: Vec<f64>,
    /// Right-hand side of the PU constraint; infinite when the PU has no
    /// rate requirement.
    pub qos_c: f64,
}

impl PsQp {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn objective(&self, delta: &[f64]) -> f64 {
        delta
            .iter()
            .enumerate()
            .map(|(j, d)| self.a[j] * d - self.c[j] * d * d)
            .sum()
    }

    /// Effective box `[DELTA_MIN, min(u_j, DELTA_MAX)]` of coordinate `j`.
    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (DELTA_MIN, self.box_upper[j].min(DELTA_MAX))
    }

    pub fn qos_load(&self, delta: &[f64]) -> f64 {
        delta.iter().zip(&self.qos_k).map(|(d, k)| k * d * d).sum()
    }

    /// Maximizer of the Lagrangian for multiplier `lambda` on the PU
    /// constraint.
    pub fn coordinate_maximizer(&self, lambda: f64) -> Vec<f64> {
        (0..self.len())
            .map(|j| {
                let (lo, hi) = self.bounds(j);
                let curvature = self.c[j] + lambda * self.qos_k[j];
                if curvature > 0.0 {
                    (self.a[j] / (2.0 * curvature)).clamp(lo, hi)
                } else if self.a[j] > 0.0 {
                    hi
                } else if self.a[j] < 0.0 {
                    lo
                } else {
                    0.5 * (lo + hi)
                }
            })
            .collect()
    }
}

/// `g_j^H diag(phi_j) F_j w` for every RIS, i.e. the gain before the
/// power-splitting factor.
fn unit_gains(state: &NetworkState, ch: &ChannelSet, to_pu: bool) -> Vec<C64> {
    (0..state.n_ris())
        .map(|j| {
            let fw = &ch.f[j] * &state.w;
            let g: &CVector = if to_pu { &ch.g_p[j] } else { &ch.g[j] };
            row_dot(&conj_hadamard(g, &fw), &state.phi[j])
        })
        .collect()
}

pub fn build_ps_qp(
    aux: &AuxVars,
    state: &NetworkState,
    ch: &ChannelSet,
    params: &SystemParams,
    decoder: &Decoder,
) -> Result<PsQp> {
    state.check_dims(ch)?;
    let factors = aux.signal_factors(&params.weights);
    let q = aux.interference_weights(decoder);
    let u = unit_gains(state, ch, false);
    let u_p = unit_gains(state, ch, true);
    let mu_k = params.element_power * ch.n_elements() as f64;

    let mut box_upper = Vec::with_capacity(state.n_ris());
    for j in 0..state.n_ris() {
        if mu_k == 0.0 {
            box_upper.push(1.0);
            continue;
        }
        let incident = params.eh_efficiency * (&ch.f[j] * &state.w).norm_squared();
        let room = 1.0 - mu_k / incident;
        if !(room > 0.0) {
            return Err(Error::EhInfeasible(j));
        }
        box_upper.push(room.sqrt());
    }

    let gamma_th = params.qos_sinr();
    let qos_c = if gamma_th > 0.0 {
        ch.h_p.dotc(&state.w).norm_sqr() / gamma_th - params.noise_power
    } else {
        f64::INFINITY
    };
    if !(qos_c > 0.0) {
        return Err(Error::QosInfeasible);
    }

    Ok(PsQp {
        a: (0..u.len()).map(|j| 2.0 * factors[j] * (aux.beta[j].conj() * u[j]).re).collect(),
        c: (0..u.len()).map(|i| u[i].norm_sqr() * q[i]).collect(),
        box_upper,
        qos_k: u_p.iter().map(|z| z.norm_sqr()).collect(),
        qos_c,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsSolution {
    pub delta: Vec<f64>,
    pub objective: f64,
    /// Multiplier of the PU constraint.
    pub lambda: f64,
    /// `lambda * (C - sum k delta^2) / C`, the only KKT condition not met
    /// exactly by construction.
    pub kkt_residual: f64,
}

/// Maximizes the QP. `tol` bounds the relative complementarity residual.
pub fn solve_ps(qp: &PsQp, tol: f64) -> Result<PsSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let m = qp.len();
    if qp.c.len() != m || qp.box_upper.len() != m || qp.qos_k.len() != m {
        return Err(Error::Dimension("QP coefficient vectors differ in length".into()));
    }
    if qp.c.iter().chain(&qp.qos_k).any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("c and k must be nonnegative".into()));
    }
    for j in 0..m {
        let (lo, hi) = qp.bounds(j);
        if hi < lo {
            return Err(Error::PsInfeasible);
        }
    }
    let floor: Vec<f64> = vec![DELTA_MIN; m];
    if qp.qos_load(&floor) > qp.qos_c {
        return Err(Error::PsInfeasible);
    }

    let finish = |delta: Vec<f64>, lambda: f64| {
        let slack = qp.qos_c - qp.qos_load(&delta);
        let kkt_residual = if lambda > 0.0 { lambda * slack.abs() / qp.qos_c } else { 0.0 };
        PsSolution { objective: qp.objective(&delta), delta, lambda, kkt_residual }
    };

    let free = qp.coordinate_maximizer(0.0);
    if qp.qos_load(&free) <= qp.qos_c {
        return Ok(finish(free, 0.0));
    }

    let mut hi = 1.0 / qp.qos_c.max(f64::MIN_POSITIVE);
    let mut guard = 0;
    while qp.qos_load(&qp.coordinate_maximizer(hi)) > qp.qos_c {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::PsInfeasible);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if qp.qos_load(&qp.coordinate_maximizer(mid)) > qp.qos_c {
            lo = mid;
        } else {
            hi = mid;
        }
        let delta = qp.coordinate_maximizer(hi);
        if hi * (qp.qos_c - qp.qos_load(&delta)) / qp.qos_c <= tol * 1e-3 {
            break;
        }
    }
    Ok(finish(qp.coordinate_maximizer(hi), hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn qp(a: &[f64], c: &[f64], u: &[f64], k: &[f64], cap: f64) -> PsQp {
        PsQp { a: a.to_vec(), c: c.to_vec(), box_upper: u.to_vec(), qos_k: k.to_vec(), qos_c: cap }
    }

    #[test]
    fn clipped_unconstrained_maximum() {
        let s = solve_ps(&qp(&[2.0], &[1.0], &[0.9], &[0.0], 1.0), 1e-9).unwrap();
        assert_relative_eq!(s.delta[0], 0.9);
    }

    #[test]
    fn interior_maximum() {
        let s = solve_ps(&qp(&[1.0], &[1.0], &[1.0], &[0.0], 1.0), 1e-9).unwrap();
        assert_relative_eq!(s.delta[0], 0.5);
    }

    #[test]
    fn flat_objective_returns_box_midpoint() {
        let s = solve_ps(&qp(&[0.0], &[0.0], &[0.5], &[0.0], 1.0), 1e-9).unwrap();
        assert_relative_eq!(s.delta[0], 0.5 * (DELTA_MIN + 0.5));
    }

    #[test]
    fn linear_objective_goes_to_upper_bound() {
        let s = solve_ps(&qp(&[1.0], &[0.0], &[1.0], &[0.0], 1.0), 1e-9).unwrap();
        assert_relative_eq!(s.delta[0], DELTA_MAX);
    }

    #[test]
    fn binding_qos_constraint() {
        // maximize d1 + d2 with d1^2 + d2^2 <= 0.5 -> d = (0.5, 0.5).
        let s = solve_ps(&qp(&[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0], &[1.0, 1.0], 0.5), 1e-10).unwrap();
        assert_relative_eq!(s.delta[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(s.delta[1], 0.5, epsilon = 1e-9);
        assert!(s.lambda > 0.0);
        assert!(s.kkt_residual <= 1e-10);
    }

    #[test]
    fn infeasible_qps_rejected() {
        assert_eq!(solve_ps(&qp(&[1.0], &[1.0], &[1e-7], &[0.0], 1.0), 1e-9), Err(Error::PsInfeasible));
        assert_eq!(solve_ps(&qp(&[1.0], &[1.0], &[1.0], &[1.0], 1e-13), 1e-9), Err(Error::PsInfeasible));
    }

    fn scalar_drop(incident: f64) -> (ChannelSet, NetworkState) {
        use crate::linalg::{c64, CMatrix};
        let one = c64(1.0, 0.0);
        let ch = ChannelSet {
            h: CVector::from_element(1, c64(0.0, 0.0)),
            h_p: CVector::from_element(1, one),
            f: vec![CMatrix::from_element(1, 1, one)],
            g: vec![CVector::from_element(1, c64(0.3, 0.1))],
            g_p: vec![CVector::from_element(1, c64(0.01, 0.0))],
        };
        let st = NetworkState {
            w: CVector::from_element(1, c64(incident.sqrt(), 0.0)),
            phi: vec![CVector::from_element(1, one)],
            delta: vec![0.5],
        };
        (ch, st)
    }

    #[test]
    fn eh_box_examples() {
        let (ch, st) = scalar_drop(1e-4);
        let mut params = SystemParams::defaults(1);
        params.rate_threshold = 0.0;
        params.element_power = 1e-5;
        let aux = crate::fp::update_aux(&st, &ch, &params, &Decoder::Sud);
        let q = build_ps_qp(&aux, &st, &ch, &params, &Decoder::Sud).unwrap();
        assert_relative_eq!(q.box_upper[0], 0.875f64.sqrt(), epsilon = 1e-12);
        assert!(q.qos_c.is_infinite());

        params.element_power = 0.0;
        let q = build_ps_qp(&aux, &st, &ch, &params, &Decoder::Sud).unwrap();
        assert_eq!(q.box_upper, vec![1.0]);

        params.element_power = 1e-3;
        assert_eq!(build_ps_qp(&aux, &st, &ch, &params, &Decoder::Sud), Err(Error::EhInfeasible(0)));
    }

    #[test]
    fn zero_beta_zeroes_objective() {
        let (ch, st) = scalar_drop(1e-4);
        let params = SystemParams::defaults(1);
        let aux = AuxVars::zero(1);
        let q = build_ps_qp(&aux, &st, &ch, &params, &Decoder::Sud).unwrap();
        assert_eq!(q.a, vec![0.0]);
        assert_eq!(q.c, vec![0.0]);
    }

    #[test]
    fn unmeetable_pu_target_rejected() {
        let (ch, st) = scalar_drop(1e-12);
        let mut params = SystemParams::defaults(1);
        params.element_power = 0.0;
        let aux = AuxVars::zero(1);
        assert_eq!(build_ps_qp(&aux, &st, &ch, &params, &Decoder::Sud), Err(Error::QosInfeasible));
    }

    #[test]
    fn solution_matches_surrogate_in_delta() {
        // The QP objective differs from f1 only by terms independent of delta.
        let (ch, st) = scalar_drop(1e-4);
        let params = SystemParams::defaults(1);
        let aux = crate::fp::update_aux(&st, &ch, &params, &Decoder::Sud);
        let q = build_ps_qp(&aux, &st, &ch, &params, &Decoder::Sud).unwrap();
        let f = |d: f64| {
            let s = NetworkState { delta: vec![d], ..st.clone() };
            crate::fp::f1(&aux, &s, &ch, &params, &Decoder::Sud)
        };
        let shift = f(0.5) - q.objective(&[0.5]);
        for d in [0.1, 0.3, 0.9] {
            assert_relative_eq!(f(d) - q.objective(&[d]), shift, epsilon = 1e-9 * shift.abs().max(1.0));
        }
    }

    fn grid_best(q: &PsQp) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let (lo0, hi0) = q.bounds(0);
        let (lo1, hi1) = q.bounds(1);
        let steps = |lo: f64, hi: f64| {
            let n = ((hi - lo) / 0.005).floor() as usize;
            (0..=n).map(move |i| lo + i as f64 * 0.005).chain(std::iter::once(hi))
        };
        for d0 in steps(lo0, hi0) {
            for d1 in steps(lo1, hi1) {
                let d = [d0, d1];
                if q.qos_load(&d) <= q.qos_c {
                    best = best.max(q.objective(&d));
                }
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn matches_grid_oracle(
            a in prop::array::uniform2(-1.0f64..3.0),
            c in prop::array::uniform2(0.0f64..2.0),
            u in prop::array::uniform2(0.2f64..1.0),
            k in prop::array::uniform2(0.0f64..2.0),
            cap in 0.05f64..2.0,
        ) {
            let q = qp(&a, &c, &u, &k, cap);
            let s = solve_ps(&q, 1e-9).unwrap();
            prop_assert!(s.objective >= grid_best(&q) - 1e-3);
            prop_assert!(q.qos_load(&s.delta) <= q.qos_c * (1.0 + 1e-9));
            for j in 0..2 {
                let (lo, hi) = q.bounds(j);
                prop_assert!(s.delta[j] >= lo && s.delta[j] <= hi);
            }
        }

        #[test]
        fn objective_is_concave_along_coordinates(
            a in -2.0f64..2.0, c in 0.0f64..3.0, x in 0.0f64..1.0, h in 1e-3f64..0.1,
        ) {
            let q = qp(&[a], &[c], &[1.0], &[0.0], 1.0);
            let second = q.objective(&[x + h]) - 2.0 * q.objective(&[x]) + q.objective(&[x - h]);
            prop_assert!(second <= 1e-12);
        }
    }
}
