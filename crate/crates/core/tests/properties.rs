use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sibris::baselines::{self, quantize_2bit};
use sibris::bcd::{self, BcdConfig};
use sibris::channel::{draw_channels, draw_scenario, ChannelSet, ScenarioTemplate};
use sibris::ps::{self, PsQp, DELTA_MAX, DELTA_MIN};
use sibris::system::{self, Decoder, DecodingOrder, NetworkState, SystemParams};
use sibris::{CVector, C64};

fn channels(m: usize, seed: u64) -> ChannelSet {
    let template = ScenarioTemplate { n_ris: m, ..ScenarioTemplate::desk() };
    draw_channels(&draw_scenario(&template, seed).unwrap(), seed).unwrap()
}

fn random_state(ch: &ChannelSet, seed: u64) -> NetworkState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ch.n_antennas();
    let w = CVector::from_fn(n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let phi = (0..ch.n_ris())
        .map(|_| CVector::from_fn(ch.n_elements(), |_, _| C64::from_polar(1.0, rng.random::<f64>() * TAU)))
        .collect();
    let delta = (0..ch.n_ris()).map(|_| rng.random_range(DELTA_MIN..DELTA_MAX)).collect();
    NetworkState { w: &w * C64::new(2.0, 0.0), phi, delta }
}

fn shuffled(m: usize, seed: u64) -> DecodingOrder {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    DecodingOrder::new(order).unwrap()
}

fn sum_se(gammas: &[f64]) -> f64 {
    gammas.iter().map(|g| g.ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sic_sum_rate_ignores_the_order(m in 1usize..=4, seed in any::<u64>(), o1 in any::<u64>(), o2 in any::<u64>()) {
        let ch = channels(m, seed % 1000);
        let params = SystemParams::defaults(m);
        let st = random_state(&ch, seed);
        let a = sum_se(&system::sinrs(&st, &ch, &params, &Decoder::Sic(shuffled(m, o1))));
        let b = sum_se(&system::sinrs(&st, &ch, &params, &Decoder::Sic(shuffled(m, o2))));
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
    }

    #[test]
    fn sud_never_beats_noma_at_equal_weights(m in 1usize..=4, seed in any::<u64>(), o in any::<u64>()) {
        let ch = channels(m, seed % 1000);
        let params = SystemParams::defaults(m);
        let st = random_state(&ch, seed);
        let noma = system::wsse(&st, &ch, &params, &Decoder::Sic(shuffled(m, o)));
        let sud = baselines::sud_wsse(&st, &ch, &params);
        prop_assert!(sud <= noma * (1.0 + 1e-9));
    }

    #[test]
    fn quantizer_is_idempotent_and_unit_modulus(phases in prop::collection::vec(-10.0f64..10.0, 1..32)) {
        let phi = CVector::from_iterator(phases.len(), phases.iter().map(|p| C64::from_polar(1.0, *p)));
        let q = quantize_2bit(&phi);
        prop_assert!(q.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-15));
        prop_assert!(q.iter().all(|z| (z.re.abs() == 1.0 && z.im == 0.0) || (z.im.abs() == 1.0 && z.re == 0.0)));
        prop_assert_eq!(quantize_2bit(&q), q.clone());
        // Nearest level: no other level is strictly closer on the circle.
        for (z, p) in q.iter().zip(&phi) {
            prop_assert!((z - p).norm() <= (z * C64::i() - p).norm() + 1e-12);
            prop_assert!((z - p).norm() <= (z * -C64::i() - p).norm() + 1e-12);
        }
    }

    #[test]
    fn effective_gain_matches_the_cascaded_row(m in 1usize..=3, seed in any::<u64>()) {
        let ch = channels(m, seed % 1000);
        let st = random_state(&ch, seed);
        for j in 0..m {
            let a = system::effective_gain(j, &st, &ch).unwrap();
            // delta_j g_j^H diag(phi_j) F_j w, evaluated element by element.
            let fw = &ch.f[j] * &st.w;
            let direct: C64 = (0..ch.n_elements()).map(|k| ch.g[j][k].conj() * st.phi[j][k] * fw[k]).sum::<C64>() * st.delta[j];
            prop_assert!((a - direct).norm() <= 1e-12 * direct.norm().max(1e-300));
            let s = system::signal_powers(&st, &ch)[j];
            prop_assert!((a.norm_sqr() - s).abs() <= 1e-12 * s.max(1e-300));
        }
    }

    #[test]
    fn ps_solution_is_feasible_and_beats_random_points(seed in any::<u64>(), m in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = PsQp {
            a: (0..m).map(|_| rng.random_range(-1.0..3.0)).collect(),
            c: (0..m).map(|_| rng.random_range(0.0..2.0)).collect(),
            box_upper: (0..m).map(|_| rng.random_range(0.2..DELTA_MAX)).collect(),
            qos_k: (0..m).map(|_| rng.random_range(0.0..2.0)).collect(),
            qos_c: rng.random_range(0.5..3.0),
        };
        prop_assume!(qp.qos_load(&vec![DELTA_MIN; m]) <= qp.qos_c);
        let sol = ps::solve_ps(&qp, 1e-10).unwrap();
        prop_assert!(qp.qos_load(&sol.delta) <= qp.qos_c * (1.0 + 1e-9));
        for (j, d) in sol.delta.iter().enumerate() {
            let (lo, hi) = qp.bounds(j);
            prop_assert!(*d >= lo && *d <= hi);
        }
        for _ in 0..200 {
            let d: Vec<f64> = (0..m).map(|j| { let (lo, hi) = qp.bounds(j); rng.random_range(lo..=hi) }).collect();
            if qp.qos_load(&d) <= qp.qos_c {
                prop_assert!(qp.objective(&d) <= sol.objective + 1e-9 * sol.objective.abs().max(1.0));
            }
        }
    }
}

#[test]
fn single_slot_tdma_equals_proposed() {
    let cfg = BcdConfig::default();
    for seed in 0..3 {
        let ch = channels(1, seed);
        let params = SystemParams::defaults(1);
        let proposed = bcd::run(&ch, &params, &cfg).unwrap();
        let tdma = baselines::tdma(&ch, &params, &cfg).unwrap();
        assert_eq!(tdma.wsse.to_bits(), proposed.final_wsse().to_bits());
    }
}
