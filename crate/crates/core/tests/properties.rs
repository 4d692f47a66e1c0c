use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use lbes_core::costs::CostField;
use lbes_core::engine::{simulate, EngineConfig};
use lbes_core::measurement::MeasurementSchedule;
use lbes_core::schemes::{alpha, SchemeConfig, SchemeKind, SchemeParams};
use lbes_core::signals::{common_period_of, gamma_matrix, DitherBank, DitherSignal, Multiplier};
use proptest::prelude::*;

fn multiplier() -> impl Strategy<Value = Multiplier> {
    (1u64..12, 1u64..12).prop_map(|(n, d)| Multiplier::new(n, d).unwrap())
}

proptest! {
    #[test]
    fn multipliers_print_and_parse_back(k in multiplier()) {
        prop_assert_eq!(k.to_string().parse::<Multiplier>().unwrap(), k);
    }

    #[test]
    fn builtin_dithers_are_bounded_and_periodic(phase in -1e3f64..1e3, sine in any::<bool>()) {
        let d = if sine { DitherSignal::sine(Multiplier::one()) } else { DitherSignal::cosine(Multiplier::one()) };
        let v = d.value(phase);
        prop_assert!(v.abs() <= 1.0);
        prop_assert!((d.value(phase + TAU) - v).abs() < 1e-9);
    }

    #[test]
    fn common_period_is_a_whole_number_of_periods_of_every_dither(a in multiplier(), b in multiplier()) {
        let c = common_period_of(&[a, b]).unwrap();
        for k in [a, b] {
            let periods = c * k.value() / TAU;
            prop_assert!((periods - periods.round()).abs() < 1e-9, "{} periods of k = {}", periods, k);
        }
    }

    #[test]
    fn gamma_is_antisymmetric(a in multiplier(), b in multiplier(), omega in 1.0f64..500.0) {
        let bank = DitherBank::new(vec![DitherSignal::cosine(a), DitherSignal::sine(b)]).unwrap();
        let g = gamma_matrix(&bank, omega, 128).unwrap();
        prop_assert!(g.antisymmetry_defect() < 1e-9);
    }

    #[test]
    fn measurement_is_the_cost_or_exactly_zero(t in -50.0f64..50.0, x in -20.0f64..20.0, eps in 0.01f64..1.0) {
        let s = MeasurementSchedule::new(1.0, eps).unwrap();
        let h = CostField::case_study();
        let m = s.measure(&h, t, &[x]).unwrap();
        prop_assert!(m == 0.0 || m == h.value(&[x]));
        prop_assert_eq!(m != 0.0, s.phase(t) < eps);
        prop_assert!(s.phase(t) >= 0.0 && s.phase(t) < 1.0);
    }

    #[test]
    fn alpha_lies_in_the_unit_interval(norm in 0.0f64..1e6, a in 1e-8f64..1.0, gap in 1e-6f64..10.0) {
        let v = alpha(norm, a, a + gap).unwrap();
        prop_assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn next_edge_is_strictly_later(t in -100.0f64..100.0, eps in 0.01f64..0.99) {
        let s = MeasurementSchedule::new(1.0, eps).unwrap();
        let e = s.next_edge(t);
        prop_assert!(e.time > t);
        prop_assert!(e.time - t <= 1.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn freeze_state_is_constant_during_breaks(x0 in -3.0f64..5.0, tau0 in 0.0f64..0.1) {
        let mut p = SchemeParams::case_study(SchemeKind::Freeze);
        p.tau0 = tau0;
        let c = SchemeConfig::new(p).unwrap();
        let s = MeasurementSchedule::case_study(0.17).unwrap();
        let traj = simulate(&c, &s, &CostField::case_study(), &EngineConfig::new(0.0, 3.0), &[x0]).unwrap();
        for k in 1..traj.len() {
            let (t0, t1) = (traj.times()[k - 1], traj.times()[k]);
            if !s.is_transmitting(0.5 * (t0 + t1)) {
                prop_assert_eq!(traj.x(k), traj.x(k - 1));
                prop_assert_eq!(traj.tau()[k], traj.tau()[k - 1]);
            }
        }
        // τ advances by exactly the transmitted time: three pulses of 0.17 s
        assert_relative_eq!(traj.tau()[traj.len() - 1] - tau0, 3.0 * 0.17, max_relative = 1e-9);
    }

    #[test]
    fn runs_are_bitwise_reproducible(x0 in -3.0f64..5.0, k in 1u32..4) {
        let c = SchemeConfig::new(
            SchemeParams::case_study(SchemeKind::GradientHold).with_omega(20.0 * PI * k as f64),
        )
        .unwrap();
        let s = MeasurementSchedule::case_study(0.17).unwrap();
        let run = || simulate(&c, &s, &CostField::case_study(), &EngineConfig::new(0.0, 2.5), &[x0]).unwrap();
        prop_assert!(run().same_samples(&run()));
    }
}
