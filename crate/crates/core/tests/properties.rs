use proptest::prelude::*;

use espar_cr::antenna::{mean_gain, wrap_angle, BeamPatternModel};
use espar_cr::beamsel_sr::{beam_probabilities, SelectionDiversityDistribution};
use espar_cr::metrics::{outage_probability, symbol_error_probability};
use espar_cr::optimizer::{
    solve_fixed_sensing, Constraints, OptimizerSettings, PowerPolicy, QuantizedPowerPolicy, Quantizer, SensingState,
};
use espar_cr::special::db_to_linear;

fn deltas() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..5.0, 2..=8)
}

fn state() -> impl Strategy<Value = SensingState> {
    (0.3f64..0.7, 0.0f64..0.05, 0.01f64..1.0, 0.5f64..1.0).prop_map(|(alpha0, beta0, b0, d_t)| SensingState {
        alpha0,
        beta0,
        pihat0: alpha0 + beta0,
        b0,
        d_t,
        sigma_w2: 1.0,
        sigma_p2: 1.0,
    })
}

fn caps() -> impl Strategy<Value = Constraints> {
    (-5.0f64..30.0, -15.0f64..5.0).prop_map(|(p, i)| Constraints::new(db_to_linear(p), db_to_linear(i)).unwrap())
}

fn scaled(policy: &PowerPolicy, s: f64) -> PowerPolicy {
    match policy {
        PowerPolicy::Quantized(q) => PowerPolicy::Quantized(QuantizedPowerPolicy {
            n_b: q.n_b,
            mu: q.mu.clone(),
            power: q.power.iter().map(|p| p * s).collect(),
        }),
        p => p.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pattern_is_periodic_and_bounded(a0 in 0.2f64..3.0, a1 in 0.0f64..0.2, w in 5.0f64..60.0, phi in -10.0f64..10.0) {
        let m = BeamPatternModel::from_degrees(a0, a1, w, 8).unwrap();
        let g = m.base_gain(phi);
        prop_assert!((g - m.base_gain(phi + std::f64::consts::TAU)).abs() < 1e-12);
        prop_assert!(g >= a1 - 1e-15 && g <= a0 + a1 + 1e-15);
        prop_assert!((m.base_gain(phi) - m.base_gain(-phi)).abs() < 1e-12);
        let w = wrap_angle(phi);
        prop_assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&w));
    }

    #[test]
    fn mean_gain_matches_riemann_sum(a0 in 0.2f64..3.0, a1 in 0.0f64..0.2, w in 5.0f64..60.0) {
        let m = BeamPatternModel::from_degrees(a0, a1, w, 8).unwrap();
        let n = 200_000;
        let riemann: f64 = (0..n)
            .map(|k| m.base_gain(std::f64::consts::TAU * (k as f64 + 0.5) / n as f64))
            .sum::<f64>() / n as f64;
        let e = mean_gain(&m).unwrap();
        prop_assert!((e - riemann).abs() <= 1e-6 * e);
    }

    #[test]
    fn selection_probabilities_sum_to_one(d in deltas()) {
        let dist = SelectionDiversityDistribution::new(d).unwrap();
        let psi = beam_probabilities(&dist);
        prop_assert!((psi.total() - 1.0).abs() < 1e-8);
        prop_assert!(psi.psi.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn strongest_gain_law_is_consistent(d in deltas(), x in 0.0f64..20.0) {
        let dist = SelectionDiversityDistribution::new(d).unwrap();
        let (f, s) = (dist.cdf(x), dist.sf(x));
        prop_assert!((f + s - 1.0).abs() < 1e-12);
        prop_assert!(dist.cdf(x * 1.1 + 1e-3) >= f);
        prop_assert!(dist.pdf(x) >= 0.0);
        let h = 1e-5 * (1.0 + x);
        let numeric = (dist.cdf(x + h) - dist.cdf((x - h).max(0.0))) / (x + h - (x - h).max(0.0));
        prop_assert!((numeric - dist.pdf(x)).abs() < 1e-4 * (1.0 + dist.pdf(x)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn optimized_policy_satisfies_kkt_and_caps(d in deltas(), st in state(), c in caps(), bits in 1u32..=3) {
        let dist = SelectionDiversityDistribution::new(d).unwrap();
        let sol = solve_fixed_sensing(&st, &dist, &c, Quantizer::Bits(bits), &OptimizerSettings::default()).unwrap();
        let r = &sol.report;
        prop_assert!(r.converged, "{:?}", r.diagnostic);
        prop_assert!(r.power_slack >= -1e-4 && r.interference_slack >= -1e-4);
        prop_assert!(r.complementary_slackness.iter().all(|&x| x < 1e-6));
        prop_assert!(r.kkt_residual < 1e-8, "KKT residual {}", r.kkt_residual);
        prop_assert!(r.lambda >= 0.0 && r.vartheta >= 0.0);
        prop_assert!(r.lagrangian_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
        if let PowerPolicy::Quantized(q) = &sol.policy {
            prop_assert!(q.mu.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(q.power.windows(2).all(|w| w[1] >= w[0]));
            prop_assert_eq!(q.power[0], 0.0);
        }
    }

    #[test]
    fn perfect_csi_dominates_quantized(d in deltas(), st in state(), c in caps()) {
        let dist = SelectionDiversityDistribution::new(d).unwrap();
        let s = OptimizerSettings::default();
        let q = solve_fixed_sensing(&st, &dist, &c, Quantizer::Bits(2), &s).unwrap();
        let p = solve_fixed_sensing(&st, &dist, &c, Quantizer::PerfectCsi, &s).unwrap();
        prop_assert!(p.report.c_lb >= q.report.c_lb - 1e-6 * p.report.c_lb.max(1.0));
    }

    #[test]
    fn more_power_lowers_symbol_errors(d in deltas(), st in state(), c in caps(), s in 1.0f64..4.0) {
        let dist = SelectionDiversityDistribution::new(d).unwrap();
        let sol = solve_fixed_sensing(&st, &dist, &c, Quantizer::Bits(2), &OptimizerSettings::default()).unwrap();
        let pe = |p: &PowerPolicy| symbol_error_probability(p, &dist, st.alpha0, st.beta0, 4.0, 1.0, 1.0).unwrap();
        let base = pe(&sol.policy);
        let more = pe(&scaled(&sol.policy, s));
        prop_assert!(more <= base + 1e-15);
        // Outage depends on thresholds only.
        prop_assert_eq!(outage_probability(&sol.policy, &dist), outage_probability(&scaled(&sol.policy, s), &dist));
    }
}
