use levy_fbsde_cli::config::{apply_override, from_value};
use levy_fbsde_cli::oracles::{black_scholes_call, heat_bump, jump_call, risk_neutral_intensity};
use levy_fbsde_cli::output::num;
use proptest::prelude::*;
use serde_json::json;

proptest! {
    #[test]
    fn csv_numbers_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn black_scholes_respects_no_arbitrage_bounds(
        s0 in 1.0..500.0f64,
        strike in 1.0..500.0f64,
        r in 0.0..0.2f64,
        vol in 0.01..1.0f64,
        t in 0.01..3.0f64,
    ) {
        let c = black_scholes_call(s0, strike, r, vol, t);
        let lower = (s0 - strike * (-r * t).exp()).max(0.0);
        prop_assert!(c >= lower - 1e-9 * s0 && c <= s0 + 1e-9 * s0, "{c} outside [{lower}, {s0}]");
    }

    #[test]
    fn jump_call_is_a_discounted_martingale_price(
        s0 in 50.0..150.0f64,
        r in 0.01..0.1f64,
        kappa in 0.05..0.3f64,
        lam in 0.1..3.0f64,
        t in 0.1..1.0f64,
    ) {
        // A zero strike prices the asset itself.
        let b = r - lam * (kappa.exp() - 1.0);
        let intensity = risk_neutral_intensity(r, b, kappa);
        prop_assert!((intensity - lam).abs() < 1e-9 * lam);
        let c = jump_call(s0, 0.0, r, b, kappa, intensity, t);
        prop_assert!((c - s0).abs() < 1e-8 * s0, "{c} vs {s0}");
    }

    #[test]
    fn heat_bump_never_exceeds_its_initial_peak(s in 0.0..2.0f64, tau in 0.0..2.0f64, x in -5.0..5.0f64) {
        let v = heat_bump(s, tau, x);
        prop_assert!(v > 0.0 && v <= 1.0 + 1e-15);
    }

    #[test]
    fn numeric_overrides_land_where_addressed(tol in 1e-14..1e-2f64, n in 8usize..2000) {
        let mut tree = json!({"grid": [{"lo": -1.0, "hi": 1.0, "n": 16}]});
        apply_override(&mut tree, &format!("solver.fp_tol={tol:e}")).unwrap();
        apply_override(&mut tree, &format!("grid.0.n={n}")).unwrap();
        let config = from_value(tree).unwrap();
        prop_assert_eq!(config.solver.fp_tol, tol);
        prop_assert_eq!(config.grid[0].n, n);
    }
}
