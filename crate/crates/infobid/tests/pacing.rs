use approx::assert_abs_diff_eq;
use infobid::pacing::*;
use proptest::prelude::*;

fn controller(budget: f64, periods: usize) -> PacingController {
    PacingController::new(&PacingConfig { budget, total_periods: periods, ..Default::default() }).unwrap()
}

#[test]
fn paced_budget_examples() {
    let c = controller(600.0, 6);
    assert_eq!(c.paced_budget(3), 300.0);
    assert_eq!(c.paced_budget(0), 0.0);
    assert_eq!(c.paced_budget(6), 600.0);
}

#[test]
fn controller_validation() {
    let ok = PacingConfig::default();
    assert!(PacingController::new(&ok).is_ok());
    assert!(PacingController::new(&PacingConfig { eta: 0.0, ..ok.clone() }).is_err());
    assert!(PacingController::new(&PacingConfig { lambda0: 200.0, ..ok.clone() }).is_err());
    assert!(PacingController::new(&PacingConfig { lambda_min: 0.0, ..ok.clone() }).is_err());
    assert!(PacingController::new(&PacingConfig { budget: -1.0, ..ok.clone() }).is_err());
    assert!(PacingController::new(&PacingConfig { period_len: 0, ..ok }).is_err());
}

#[test]
fn period_update_on_pace_leaves_lambda_alone() {
    let mut c = controller(600.0, 6);
    c.dual_lambda = 0.7;
    c.update_dual_period(100.0);
    assert_eq!(c.dual_lambda, 0.7);
    assert_eq!(c.period_index, 1);
}

#[test]
fn period_update_example() {
    let mut c = PacingController::new(&PacingConfig {
        lambda0: 1.0,
        eta: 0.1,
        budget: 100.0,
        total_periods: 4,
        ..Default::default()
    })
    .unwrap();
    // paced budget after one of four periods is 25; overspend by B/2
    c.update_dual_period(75.0);
    assert_abs_diff_eq!(c.dual_lambda, 0.05f64.exp(), epsilon = 1e-15);
    assert_abs_diff_eq!(c.dual_lambda, 1.0513, epsilon = 1e-4);
}

#[test]
fn sustained_overspend_raises_lambda_to_the_cap() {
    let mut c =
        PacingController::new(&PacingConfig { eta: 5.0, budget: 10.0, total_periods: 1000, ..Default::default() })
            .unwrap();
    let mut prev = c.dual_lambda;
    let mut hit_cap = false;
    for _ in 0..200 {
        c.update_dual_period(c.budget);
        if c.dual_lambda == c.lambda_max {
            hit_cap = true;
            assert!(c.saturated);
            break;
        }
        assert!(c.dual_lambda > prev);
        prev = c.dual_lambda;
    }
    assert!(hit_cap);
    c.update_dual_period(c.budget);
    assert_eq!(c.dual_lambda, c.lambda_max);
}

#[test]
fn underspend_is_floored() {
    let mut c = PacingController::new(&PacingConfig { eta: 50.0, budget: 1.0, total_periods: 2, ..Default::default() })
        .unwrap();
    c.update_dual_period(0.0);
    c.update_dual_period(0.0);
    assert_eq!(c.dual_lambda, c.lambda_min);
    assert!(c.saturated);
}

#[test]
fn perwin_loss_is_a_no_op() {
    let mut c = controller(600.0, 6);
    c.update_dual_perwin(0.0);
    assert_eq!(c.dual_lambda, 0.01);
}

#[test]
fn perwin_updates_telescope() {
    let cfg = PacingConfig { lambda0: 0.01, eta: 0.1, budget: 1.0, ..Default::default() };
    let mut c = PacingController::new(&cfg).unwrap();
    let mut spent = 0.0;
    for h in [0.3, 0.0, 1.1, 2.5, 0.01, 7.0] {
        c.update_dual_perwin(h);
        spent += h;
        assert_abs_diff_eq!(spent, cfg.budget / cfg.eta * (c.dual_lambda / cfg.lambda0).ln(), epsilon = 1e-9);
    }
    assert!(!c.saturated);
}

#[test]
fn perwin_saturation_point() {
    assert_abs_diff_eq!(saturation_spend(1.0, 100.0, 0.01, 0.1), 92.10340371976183, epsilon = 1e-10);
    let mut c =
        PacingController::new(&PacingConfig { lambda0: 0.01, eta: 0.1, budget: 1.0, ..Default::default() }).unwrap();
    let mut spent = 0.0;
    while !c.saturated {
        c.update_dual_perwin(0.5);
        if !c.saturated {
            spent += 0.5;
        }
    }
    assert!(spent <= 92.1035);
    assert!(spent > 92.1035 - 0.5);
    assert_eq!(c.dual_lambda, 100.0);
}

#[test]
fn fpa_examples() {
    let w = WinCurve::uniform(0.0, 1.0).unwrap();
    assert_eq!(optimal_bid_fpa(0.0, 1.0, &w, None), 0.0);
    assert_eq!(optimal_bid_fpa(-2.0, 1.0, &w, None), 0.0);
    assert_eq!(optimal_bid_fpa(1.5, 1.0, &w, None), 0.75);
    assert_eq!(optimal_bid_fpa(4.0, 1.0, &w, None), 1.0);
    assert_eq!(optimal_bid_fpa_grid(4.0, 1.0, &w, None), 1.0);
    assert_abs_diff_eq!(optimal_bid_fpa_grid(1.5, 1.0, &w, None), 0.75, epsilon = 1e-4);
}

#[test]
fn fpa_on_a_custom_curve_uses_the_grid() {
    // W(b) = b² on [0, 1]: surplus b²(Δ − λb) peaks at 2Δ/(3λ)
    let w = WinCurve::custom(|b: f64| b.clamp(0.0, 1.0).powi(2), 1.0);
    assert_abs_diff_eq!(optimal_bid_fpa(0.9, 1.0, &w, None), 0.6, epsilon = 1e-4);
    assert_eq!(optimal_bid_fpa(-0.1, 1.0, &w, None), 0.0);
}

#[test]
fn spa_examples() {
    assert_eq!(optimal_bid_spa(0.5, 2.0), 0.25);
    assert_eq!(optimal_bid_spa(0.0, 3.0), 0.0);
    assert_eq!(optimal_bid_spa(-1.0, 3.0), 0.0);
    assert_eq!(optimal_bid_spa(0.37, 1.0), 0.37);
}

#[test]
fn eta_and_slack_examples() {
    assert_abs_diff_eq!(recommended_eta(std::f64::consts::E, 1.0, 100, 1.0), 0.1, epsilon = 1e-15);
    let a = recommended_eta(100.0, 0.01, 1000, 2.0);
    assert_abs_diff_eq!(recommended_eta(100.0, 0.01, 4000, 2.0), a / 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(recommended_eta(100.0, 0.01, 5000, 1.0), 0.0429, epsilon = 1e-4);
    assert_eq!(feasibility_slack(3.0, 3.0, 0.1), 0.0);
    assert_abs_diff_eq!(feasibility_slack(100.0, 0.01, 0.1), 92.10, epsilon = 1e-2);
    assert_abs_diff_eq!(
        feasibility_slack(100.0, 0.01, 0.2),
        feasibility_slack(100.0, 0.01, 0.1) / 2.0,
        epsilon = 1e-12
    );
}

#[test]
fn controller_json_keys() {
    let mut c = controller(600.0, 6);
    c.record_spend(12.5);
    let v: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["budget", "eta", "lambda", "period_index", "spent"]);
    assert_eq!(v["spent"], 12.5);
    assert_eq!(v["lambda"], 0.01);
}

#[test]
fn exhausted_controller_has_nothing_left() {
    let mut c = controller(10.0, 1);
    c.record_spend(9.0);
    assert_eq!(c.remaining(), 1.0);
    assert!(!c.exhausted());
    c.record_spend(1.5);
    assert_eq!(c.remaining(), 0.0);
    assert!(c.exhausted());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fpa_closed_form_matches_the_grid(delta in 1e-3f64..5.0, lambda in 0.05f64..10.0) {
        let w = WinCurve::uniform(0.0, 1.0).unwrap();
        let closed = (delta / (2.0 * lambda)).min(1.0);
        prop_assert_eq!(optimal_bid_fpa(delta, lambda, &w, None), closed);
        let grid = optimal_bid_fpa_grid(delta, lambda, &w, Some(1e-4));
        prop_assert!((grid - closed).abs() <= 1e-4 + 1e-12, "grid {} closed {}", grid, closed);
    }

    #[test]
    fn nonpositive_utility_abstains(delta in -10.0f64..=0.0, lambda in 1e-3f64..10.0) {
        let w = WinCurve::uniform(0.0, 1.0).unwrap();
        prop_assert_eq!(optimal_bid_fpa(delta, lambda, &w, None), 0.0);
        prop_assert_eq!(optimal_bid_fpa_grid(delta, lambda, &w, Some(1e-3)), 0.0);
        prop_assert_eq!(optimal_bid_spa(delta, lambda), 0.0);
    }

    #[test]
    fn bids_fall_in_lambda_and_rise_in_delta(
        d1 in 0.0f64..5.0, d2 in 0.0f64..5.0, l1 in 0.01f64..10.0, l2 in 0.01f64..10.0,
        lo in 0.0f64..0.5,
    ) {
        let w = WinCurve::uniform(lo, lo + 1.0).unwrap();
        let (dl, dh) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (ll, lh) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        prop_assert!(optimal_bid_fpa(dl, ll, &w, None) <= optimal_bid_fpa(dh, ll, &w, None));
        prop_assert!(optimal_bid_fpa(dl, lh, &w, None) <= optimal_bid_fpa(dl, ll, &w, None));
        prop_assert!(optimal_bid_spa(dl, ll) <= optimal_bid_spa(dh, ll));
        prop_assert!(optimal_bid_spa(dl, lh) <= optimal_bid_spa(dl, ll));
    }

    #[test]
    fn period_update_follows_the_pacing_error(
        lambda in 1e-3f64..50.0, eta in 1e-3f64..2.0, cost in 0.0f64..1200.0, k in 0usize..6,
    ) {
        let mut c = PacingController::new(&PacingConfig { lambda0: lambda, eta, budget: 600.0, total_periods: 6, ..Default::default() }).unwrap();
        c.period_index = k;
        let paced = c.paced_budget(k + 1);
        c.update_dual_period(cost);
        if cost > paced {
            prop_assert!(c.dual_lambda > lambda);
        } else if cost < paced {
            prop_assert!(c.dual_lambda < lambda);
        } else {
            prop_assert_eq!(c.dual_lambda, lambda);
        }
        prop_assert!(c.dual_lambda >= c.lambda_min && c.dual_lambda <= c.lambda_max);
    }

    #[test]
    fn telescoping_holds_on_random_cost_streams(
        costs in prop::collection::vec(0.0f64..2.0, 1..300), eta in 0.01f64..1.0, budget in 1.0f64..100.0,
    ) {
        let mut c = PacingController::new(&PacingConfig { lambda0: 0.01, lambda_max: 1e12, eta, budget, ..Default::default() }).unwrap();
        let mut spent = 0.0;
        for h in costs {
            c.update_dual_perwin(h);
            spent += h;
        }
        prop_assume!(!c.saturated);
        let predicted = budget / eta * (c.dual_lambda / 0.01).ln();
        prop_assert!((spent - predicted).abs() < 1e-9 * spent.max(1.0));
    }
}
