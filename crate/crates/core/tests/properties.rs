use std::sync::OnceLock;

use finsler_twist::chaos_analysis::{island_area_at, metric_entropy_estimate};
use finsler_twist::geodesics::{conjugacy_g, conjugacy_g_inverse};
use finsler_twist::*;
use proptest::prelude::*;

fn model() -> &'static FinslerModel {
    static MODEL: OnceLock<FinslerModel> = OnceLock::new();
    MODEL.get_or_init(|| FinslerModel::new(SuspensionSpec::new(0.3, 2.0).unwrap()).unwrap())
}

fn twist() -> &'static TwistMap {
    static MAP: OnceLock<TwistMap> = OnceLock::new();
    MAP.get_or_init(|| TwistMapSpec::new(0.3, 2.0).unwrap().build().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn finsler_is_positively_homogeneous(
        t in 0.0..1.0f64, x in 0.0..1.0f64, angle in 0.0..std::f64::consts::TAU, lambda in 0.05..20.0f64,
    ) {
        let (v1, v2) = (angle.cos(), angle.sin());
        let m = model();
        let f = m.finsler_eval(t, x, v1, v2).unwrap();
        let scaled = m.finsler_eval(t, x, lambda * v1, lambda * v2).unwrap();
        prop_assert!(f > 0.0);
        prop_assert!((scaled - lambda * f).abs() <= 1e-12 * lambda.max(1.0) * f);
    }

    #[test]
    fn fundamental_tensor_is_positive_definite(
        t in 0.0..1.0f64, x in 0.0..1.0f64, angle in 0.0..std::f64::consts::TAU,
    ) {
        let g = model().fundamental_tensor(t, x, angle.cos(), angle.sin()).unwrap();
        prop_assert!((g[(0, 1)] - g[(1, 0)]).abs() < 1e-12);
        prop_assert!(g[(0, 0)] > 0.0 && g.determinant() > 0.0);
    }

    #[test]
    fn conjugacy_round_trip(x in 0.0..1.0f64, y in -6.0..6.0f64) {
        let m = model();
        let s = conjugacy_g_inverse(m, CylinderPoint::new(x, y)).unwrap();
        prop_assert!((m.finsler_eval(0.0, s.h, s.v1, s.v2).unwrap() - 1.0).abs() <= 1e-12);
        let back = conjugacy_g(&s).unwrap();
        prop_assert!((back.x() - x).abs() <= 1e-12 && (back.y() - y).abs() <= 1e-12);
    }

    #[test]
    fn legendre_round_trip_and_duality(t in 0.0..1.0f64, x in 0.0..1.0f64, v in -2.5..2.5f64) {
        let s = &model().suspension;
        let lp = s.legendre_transform(t, x, v).unwrap();
        let jet = s.jet(t, x, lp.momentum);
        prop_assert!((jet.partial(0, 0, 1) - v).abs() <= 1e-10);
        let h = s.hamiltonian_eval(t, x, lp.momentum);
        prop_assert!((lp.lagrangian + h - lp.momentum * v).abs() <= 1e-12 * (1.0 + h.abs()));
    }

    #[test]
    fn twist_map_preserves_area_and_twists(x in 0.0..1.0f64, y in -2.2..2.2f64) {
        let s = twist().step(CylinderPoint::new(x, y)).unwrap();
        prop_assert!((s.jacobian.determinant() - 1.0).abs() <= 1e-9);
        prop_assert!(s.jacobian[(0, 1)] > 0.0);
    }

    #[test]
    fn island_area_is_monotone(values in proptest::collection::vec(-0.5..2.0f64, 16), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let grid = GridSpec::new((0.0, 1.0), (-1.0, 1.0), 4, 4).unwrap();
        let field = FtleField { grid, n_iter: 1, threshold: 0.05, values };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(island_area_at(&field, hi) <= island_area_at(&field, lo));
        prop_assert!(metric_entropy_estimate(&field) >= lo * island_area_at(&field, lo) - 1e-15);
    }
}
