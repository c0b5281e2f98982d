use std::f64::consts::PI;

use proptest::prelude::*;
use vortexrate_core::gaussian_model::{build_2d, build_3d};
use vortexrate_core::linalg::{identity, mat_mul, max_abs_diff};
use vortexrate_core::quadrature::{contour_integral, ContourSpec, Shift};
use vortexrate_core::rates::{contour_constants, ratio_lower_bound, rates_3d_by_residues};
use vortexrate_core::spectra::{Ring, SpectrumKind};
use vortexrate_core::{rate_2d, rates_3d, Dimension, SpectralMoments, Spectrum};

/// Moments of a random mixture of three to six rings with spread frequencies.
fn ring_moments(d: Dimension) -> impl Strategy<Value = SpectralMoments> {
    prop::collection::vec((0.1f64..1.0, 0.3f64..3.0, -3.0f64..3.0), 3..7).prop_map(move |rings| {
        let rings = rings.into_iter().map(|(weight, k, omega)| Ring { weight, k, omega }).collect();
        Spectrum::new(d, SpectrumKind::RingMixture(rings)).moments().unwrap()
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn rates_scale_with_units(m in ring_moments(Dimension::Three), lambda in 0.2f64..5.0, mu in 0.2f64..5.0) {
        let a = rates_3d(&m).unwrap();
        let b = rates_3d(&m.rescaled(lambda, mu)).unwrap();
        let s = lambda.powi(3) * mu;
        prop_assert!(rel(b.reconnection.unwrap(), s * a.reconnection.unwrap()) < 1e-12);
        prop_assert!((b.birth_plus_death() - s * a.birth_plus_death()).abs() < 1e-11 * b.total());
    }

    #[test]
    fn planar_rate_scales_with_units(m in ring_moments(Dimension::Two), lambda in 0.2f64..5.0, mu in 0.2f64..5.0) {
        let a = rate_2d(&m).unwrap().total();
        let b = rate_2d(&m.rescaled(lambda, mu)).unwrap().total();
        prop_assert!(rel(b, lambda * lambda * mu * a) < 1e-12);
    }

    #[test]
    fn rates_ignore_field_variance_and_mixed_moment(m in ring_moments(Dimension::Three), f2 in 0.01f64..100.0, wk2 in -5.0f64..5.0) {
        let base = rates_3d(&m).unwrap();
        let other = rates_3d(&SpectralMoments { wk2, ..m }.with_field_variance(f2)).unwrap();
        prop_assert_eq!(base.reconnection, other.reconnection);
        prop_assert_eq!(base.birth, other.birth);
        // the matrix route does see both, and must still agree
        let r = rates_3d_by_residues(&m.with_field_variance(f2)).unwrap();
        prop_assert!(rel(r.reconnection.unwrap(), base.reconnection.unwrap()) < 1e-9);
    }

    #[test]
    fn birth_death_ratio_is_bounded(m in ring_moments(Dimension::Three)) {
        let r = rates_3d(&m).unwrap();
        let ratio = r.birth_plus_death() / r.reconnection.unwrap();
        prop_assert!(ratio >= ratio_lower_bound() - 1e-12);
        prop_assert!(ratio < 1.0);
        prop_assert_eq!(r.birth, r.death);
    }

    #[test]
    fn inverses_are_inverses(m3 in ring_moments(Dimension::Three), m2 in ring_moments(Dimension::Two)) {
        let a = build_3d(&m3).unwrap();
        let p = a.gamma.unwrap();
        prop_assert!(max_abs_diff(&mat_mul(&a.corr, &p), &identity()) < 1e-10 * p.iter().flatten().fold(1.0f64, |x, v| x.max(v.abs())));
        let b = build_2d(&m2).unwrap();
        let q = b.gamma.unwrap();
        prop_assert!(max_abs_diff(&mat_mul(&b.corr, &q), &identity()) < 1e-10 * q.iter().flatten().fold(1.0f64, |x, v| x.max(v.abs())));
    }

    #[test]
    fn structural_identities(m in ring_moments(Dimension::Three), f2 in 0.1f64..10.0) {
        let model = build_3d(&m.with_field_variance(f2)).unwrap();
        let g = model.inverse().unwrap();
        prop_assert!(rel(g.a(), 0.5 * g.gxy) < 1e-9);
        prop_assert!(rel(model.jacobi_ratio().unwrap(), 1.0 / f2) < 1e-9);
        prop_assert!(contour_constants(&model).is_ok());
    }

    #[test]
    fn planar_closed_form_inverse(m in ring_moments(Dimension::Two)) {
        let report = build_2d(&m).unwrap().closed_form_report().unwrap();
        prop_assert!(report.iter().all(|c| c.matches()), "{report:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn contour_shifts_reproduce_residues(m in ring_moments(Dimension::Three)) {
        let c = contour_constants(&build_3d(&m).unwrap()).unwrap();
        let exact = rates_3d(&m).unwrap();
        let spec = ContourSpec::default();
        let up = contour_integral(c, &spec, Shift::Up).unwrap().value;
        let down = contour_integral(c, &spec, Shift::Down).unwrap().value;
        prop_assert!((up - exact.reconnection.unwrap()).abs() < 1e-6 * exact.total().max(1.0));
        prop_assert!((down - exact.birth_plus_death()).abs() < 1e-6 * exact.total().max(1.0));
        prop_assert!((down - up + PI * c.q * (1.0 / c.a + 0.5 / c.b)).abs() < 1e-6 * exact.total().max(1.0));
    }
}
