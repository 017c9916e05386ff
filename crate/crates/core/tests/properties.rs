//! Property-based invariants across modules.

use std::f64::consts::PI;

use advcal::calibration::{inner_risk, RiskQuery};
use advcal::distributions::{eta_of, sample, CounterRng, Distribution, FlipCircle};
use advcal::hypotheses::{adversarial_loss, margins_linear};
use advcal::losses::{parse_loss, MarginLoss};
use proptest::prelude::*;

fn builtins() -> Vec<MarginLoss> {
    vec![
        MarginLoss::hinge_shifted(),
        MarginLoss::ramp_shifted(),
        MarginLoss::sigmoid_shifted(),
        MarginLoss::logistic_shifted(),
        MarginLoss::phi1(0.2).unwrap(),
        MarginLoss::rho_margin(0.7).unwrap(),
        MarginLoss::hinge_plain(),
        MarginLoss::logistic_plain(),
        MarginLoss::zero_one(),
    ]
}

proptest! {
    #[test]
    fn losses_are_nonnegative(t in -50.0f64..50.0, idx in 0usize..9) {
        let loss = &builtins()[idx];
        prop_assert!(loss.eval(t) >= 0.0);
    }

    #[test]
    fn inner_risk_label_symmetry(eta in 0.0f64..=1.0, t in -5.0f64..5.0, idx in 0usize..9) {
        // Swapping the label weight and negating the score is an identity.
        let loss = &builtins()[idx];
        let a = inner_risk(loss, &RiskQuery::new(eta, t).unwrap());
        let b = inner_risk(loss, &RiskQuery::new(1.0 - eta, -t).unwrap());
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn linear_margins_are_ordered_and_collapse(
        angle in 0.0f64..(2.0 * PI),
        px in -0.7f64..0.7,
        py in -0.7f64..0.7,
        gamma in 0.0f64..0.99,
    ) {
        let w = [angle.cos(), angle.sin()];
        let m = margins_linear(&w, &[px, py], gamma).unwrap();
        prop_assert!(m.lower() <= m.upper());
        if gamma == 0.0 {
            prop_assert_eq!(m.lower(), m.upper());
        }
        prop_assert!((m.upper() - m.lower() - 2.0 * gamma).abs() <= 1e-12);
    }

    #[test]
    fn adversarial_error_monotone_in_budget(
        angle in 0.0f64..(2.0 * PI),
        px in -0.7f64..0.7,
        py in -0.7f64..0.7,
        g1 in 0.0f64..0.99,
        g2 in 0.0f64..0.99,
        y in prop_oneof![Just(1i8), Just(-1i8)],
    ) {
        let (g1, g2) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let w = [angle.cos(), angle.sin()];
        let l1 = adversarial_loss(&margins_linear(&w, &[px, py], g1).unwrap(), y).unwrap();
        let l2 = adversarial_loss(&margins_linear(&w, &[px, py], g2).unwrap(), y).unwrap();
        prop_assert!(l1 <= l2);
    }

    #[test]
    fn rho_margin_descriptor_round_trips(rho in 0.001f64..10.0) {
        let loss = parse_loss(&format!("rho_margin(rho={rho})")).unwrap();
        prop_assert_eq!(loss.rho(), Some(rho));
        let reparsed = parse_loss(loss.name()).unwrap();
        prop_assert_eq!(reparsed.rho(), Some(rho));
    }

    #[test]
    fn flip_circle_eta_is_three_valued(sigma in 0.05f64..3.0, theta in 0.0f64..(2.0 * PI)) {
        let fc = FlipCircle::new(sigma).unwrap();
        let x = [theta.cos(), theta.sin()];
        let eta = eta_of(&Distribution::FlipCircle(fc), x).unwrap();
        prop_assert!(eta == 0.0 || eta == 0.25 || eta == 1.0);
    }

    #[test]
    fn counter_rng_streams_are_pure_functions(seed in any::<u64>(), stream in any::<u64>(), k in 0u64..1000) {
        let a = CounterRng::new(seed, stream).word(k);
        let b = CounterRng::new(seed, stream).word(k);
        prop_assert_eq!(a, b);
        let v = CounterRng::new(seed, stream).u01(k);
        prop_assert!((0.0..1.0).contains(&v));
    }
}

#[test]
fn batches_restrict_to_declared_support() {
    let fc = Distribution::FlipCircle(FlipCircle::new(1.3).unwrap());
    let batch = sample(&fc, 5000, 99).unwrap();
    for (p, y) in batch.points.iter().zip(&batch.labels) {
        assert!(*y == 1 || *y == -1);
        assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() <= 1e-12);
        // Every sampled point is on-support for the conditional law.
        eta_of(&fc, *p).unwrap();
    }
}
