use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symspinor::distance::{geodesic_oracle, spectral_distance, Solver, SurfaceMesh};
use symspinor::fock::{FiberAlgebra, FiberOperator, C64, I};
use symspinor::geometry::{GeometryModel, ModelKind, ModelPreset};
use symspinor::heat::a_kahler2d_exact;
use symspinor::rational::{int, rat, to_string};
use symspinor::spectrum::{cp1_coefficients, heat_trace, heat_trace_from_spectrum};
use symspinor::unrep::{check_trace_pair, r_q, TraceMode, UnAlgebraElement};

fn components(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 2 * n)
}

fn element(n: usize, seed: u64) -> UnAlgebraElement {
    UnAlgebraElement::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn clifford_commutator_is_symplectic_form(v in components(2), w in components(2)) {
        let alg = FiberAlgebra::with_cutoff(2, 5).unwrap();
        let omega: f64 = (0..2).map(|j| v[j] * w[j + 2] - v[j + 2] * w[j]).sum();
        let lhs = alg.clifford_components(&v).unwrap().commutator(&alg.clifford_components(&w).unwrap());
        let target = FiberOperator::identity(alg.basis()).scale(-I * omega);
        prop_assert!(lhs.guarded_residual(&target).unwrap() < 1e-12);
    }

    #[test]
    fn rq_is_linear(s1 in 0u64..1000, s2 in 0u64..1000, c in -3.0..3.0f64) {
        let alg = FiberAlgebra::with_cutoff(2, 5).unwrap();
        let (a, b) = (element(2, s1), element(2, s2));
        let lhs = r_q(&alg, &a.scale(c).add(&b)).unwrap();
        let rhs = &r_q(&alg, &a).unwrap().scale(C64::new(c, 0.0)) + &r_q(&alg, &b).unwrap();
        prop_assert!(lhs.guarded_residual(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn rq_preserves_brackets(s1 in 0u64..1000, s2 in 0u64..1000) {
        let alg = FiberAlgebra::with_cutoff(2, 6).unwrap();
        let (a, b) = (element(2, s1), element(2, s2));
        let lhs = r_q(&alg, &a).unwrap().commutator(&r_q(&alg, &b).unwrap());
        let rhs = r_q(&alg, &a.commutator(&b)).unwrap();
        prop_assert!(lhs.guarded_residual(&rhs).unwrap() < 1e-11);
    }

    #[test]
    fn pair_traces_match_brute_force(s1 in 0u64..1000, s2 in 0u64..1000, l in 1usize..3) {
        let alg = FiberAlgebra::with_cutoff(2, l + 4).unwrap();
        let (a, b) = (element(2, s1), element(2, s2));
        for mode in [TraceMode::U1, TraceMode::Traceless, TraceMode::Full] {
            prop_assert!(check_trace_pair(&alg, &a, &b, l, mode).unwrap().residual < 1e-10);
        }
    }

    #[test]
    fn spectrum_sum_matches_series(t in 1e-3..0.05f64, l in 0u64..4) {
        let certified = heat_trace(l, t, 1e-13).unwrap();
        let direct = heat_trace_from_spectrum(l, t, certified.last_index + 50);
        prop_assert!((certified.value - direct).abs() <= 1e-10 * direct.abs());
    }

    #[test]
    fn sphere_geodesics_form_a_metric(
        p in (0.05..3.1f64, 0.0..TAU),
        q in (0.05..3.1f64, 0.0..TAU),
        r in (0.05..3.1f64, 0.0..TAU),
    ) {
        let model = GeometryModel::new(ModelKind::cp1(), 4).unwrap();
        let d = |a: (f64, f64), b: (f64, f64)| geodesic_oracle(&model, &[a.0, a.1], &[b.0, b.1]).unwrap();
        prop_assert!((d(p, q) - d(q, p)).abs() < 1e-14);
        prop_assert!(d(p, r) <= d(p, q) + d(q, r) + 1e-12);
        prop_assert!(d(p, q) <= std::f64::consts::PI / 2.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spectral_distance_is_symmetric(x in 0usize..64, y in 0usize..64) {
        let model = GeometryModel::new(ModelKind::FlatTorus { periods: vec![1.0, 1.0] }, 4).unwrap();
        let mesh = SurfaceMesh::new(&model, 8).unwrap();
        let dxy = spectral_distance(&mesh, x, y, Solver::ProjectedAscent).unwrap();
        let dyx = spectral_distance(&mesh, y, x, Solver::ProjectedAscent).unwrap();
        prop_assert!((dxy - dyx).abs() <= 1e-8 * dxy.max(1.0));
        prop_assert_eq!(dxy == 0.0, x == y);
    }
}

#[test]
fn closed_forms_agree_with_euler_maclaurin_across_levels() {
    for l in 0..20u64 {
        let series = cp1_coefficients(l, 1).unwrap();
        let closed = a_kahler2d_exact(l as usize, &int(1), &int(8), &int(64));
        assert_eq!(series[..3], closed, "level {l}");
    }
}

#[test]
fn rationals_serialize_as_fractions() {
    assert_eq!(to_string(&rat(679, 15)), "679/15");
    assert_eq!(to_string(&rat(-2, 4)), "-1/2");
    assert_eq!(to_string(&int(3)), "3");
}

#[test]
fn presets_reject_unknown_keys() {
    assert!(ModelPreset::from_toml("kind = \"sphere\"\nradius = 2.0").is_ok());
    assert!(ModelPreset::from_toml("kind = \"sphere\"\ncolour = 1").is_err());
    assert!(ModelPreset::named("moebius").is_err());
}
