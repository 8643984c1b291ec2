mod common;

use proptest::prelude::*;

use kfog::maps::{
    fog_deriv, fog_step, gof_deriv, gof_step, logistic_step, tent_step, GofVariant, MapCoeffs,
    MapKind, Params,
};
use kfog::numerics::{ExtCtx, ExtFloat, Real};

fn coeffs(mu: f64, gamma: f64) -> MapCoeffs<f64> {
    MapCoeffs::new(&Params::new(mu, gamma).unwrap(), ())
}

/// Central difference evaluated at 512 bits with `h = 2^-100`.
fn extended_fd(map: MapKind, mu: f64, gamma: f64, x: f64) -> (f64, f64) {
    let ctx = ExtCtx::new(512);
    let c = MapCoeffs::<ExtFloat>::new(&Params::new(mu, gamma).unwrap(), ctx);
    let h = 2f64.powi(-100);
    let he = ExtFloat::from_f64_exact(ctx, h);
    let xe = ExtFloat::from_f64_exact(ctx, x);
    let fd = map.step(&xe.add(&he), &c).sub(&map.step(&xe.sub(&he), &c)).to_f64() / (2.0 * h);
    (fd, map.deriv(&xe, &c).to_f64())
}

#[test]
fn binary64_derivatives_match_coarse_finite_differences() {
    let c = coeffs(3.7, 1.6);
    for x in [0.1, 0.2, 0.33, 0.6, 0.8, 0.95] {
        let fd = common::central_difference(|t| common::fog(3.7, 1.6, t), x, 1e-7);
        let d = fog_deriv(&x, &c);
        assert!(((fd - d) / d).abs() < 1e-6, "x={x}: {d} vs {fd}");
    }
}

#[test]
fn as_printed_variant_differs_from_corrected() {
    let c = coeffs(4.0, 2.0);
    let x = 0.7;
    let corrected = gof_step(&x, &c, GofVariant::Corrected);
    let printed = gof_step(&x, &c, GofVariant::AsPrinted);
    let y = common::logistic(4.0, x);
    assert_eq!(corrected, common::tent(2.0, y));
    assert_eq!(printed, 2.0 * (1.0 - y));
    assert!(gof_step(&0.2, &c, GofVariant::AsPrinted) > 1.0);
    assert!(!MapKind::GofAsPrinted.preserves_unit_interval());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn fog_matches_independent_oracle(x in 0.0f64..=1.0, mu in 0.0f64..=4.0, g in 0.0f64..=2.0) {
        let c = coeffs(mu, g);
        prop_assert_eq!(fog_step(&x, &c), common::fog(mu, g, x));
        prop_assert_eq!(gof_step(&x, &c, GofVariant::Corrected), common::tent(g, common::logistic(mu, x)));
        prop_assert_eq!(fog_step(&x, &c), logistic_step(&tent_step(&x, &c), &c));
    }

    #[test]
    fn extended_composition_is_exact(x in 0.0f64..=1.0, mu in 0.0f64..=4.0, g in 0.0f64..=2.0) {
        let ctx = ExtCtx::new(256);
        let c = MapCoeffs::<ExtFloat>::new(&Params::new(mu, g).unwrap(), ctx);
        let xe = ExtFloat::from_f64_exact(ctx, x);
        prop_assert_eq!(fog_step(&xe, &c), logistic_step(&tent_step(&xe, &c), &c));
        prop_assert_eq!(
            gof_step(&xe, &c, GofVariant::Corrected),
            tent_step(&logistic_step(&xe, &c), &c)
        );
    }

    #[test]
    fn outputs_stay_in_unit_interval(x in 0.0f64..=1.0, mu in 0.0f64..=4.0, g in 0.0f64..=2.0) {
        let c = coeffs(mu, g);
        for m in [MapKind::Logistic, MapKind::Tent, MapKind::Fog, MapKind::Gof] {
            let y = m.step(&x, &c);
            prop_assert!((0.0..=1.0).contains(&y), "{} at {}: {}", m, x, y);
        }
    }

    #[test]
    fn fog_is_symmetric(i in 0u64..=(1u64 << 52), mu in 0.0f64..=4.0, g in 0.0f64..=2.0) {
        // Dyadic grid points keep 1 - x exact.
        let x = i as f64 / (1u64 << 52) as f64;
        let c = coeffs(mu, g);
        prop_assert_eq!(fog_step(&x, &c), fog_step(&(1.0 - x), &c));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn derivatives_match_extended_finite_differences(
        x in 0.001f64..0.999,
        mu in 0.5f64..=4.0,
        g in 0.5f64..=2.0,
    ) {
        prop_assume!((x - 0.5).abs() > 1e-3);
        prop_assume!((common::logistic(mu, x) - 0.5).abs() > 1e-3);
        for m in [MapKind::Fog, MapKind::Gof] {
            let (fd, d) = extended_fd(m, mu, g, x);
            let rel = if d == 0.0 { fd.abs() } else { ((fd - d) / d).abs() };
            prop_assert!(rel < 1e-6, "{} x={} mu={} g={}: {} vs {}", m, x, mu, g, d, fd);
        }
        let c = coeffs(mu, g);
        let v = GofVariant::Corrected;
        prop_assert!(gof_deriv(&x, &c, v).is_finite());
    }
}
