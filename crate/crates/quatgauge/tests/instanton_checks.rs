//! Cross-module checks: ADHM families against the curvature diagnostics
//! and the wire format round trip.

use quatgauge::adhm::{
    core_from_adhm, one_instanton, perturb, two_column_example, validate, AdhmData,
};
use quatgauge::curvature::{instanton_residual, ym_density, DiffEngine};
use quatgauge::geometry::sample_harmonic_point;
use quatgauge::quatlin::Quaternion;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Q = Quaternion<f64>;

#[test]
fn one_instanton_residual_small_at_sampled_points() {
    let data = one_instanton::<f64>(1, &[Q::zero()], 1.0).unwrap();
    let core = core_from_adhm(&data);
    let eng = DiffEngine::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let hp = sample_harmonic_point(1, 1.0, &mut rng);
        let res = instanton_residual(&core, &hp, &eng).unwrap();
        assert!(res < 1e-6, "residual {res:e}");
    }
}

#[test]
fn two_column_family_is_valid_and_self_dual() {
    let data = two_column_example::<f64>(1, Q::i()).unwrap();
    let rep = validate(&data, 1e-10);
    assert!(rep.valid, "{rep:?}");
    let core = core_from_adhm(&data);
    let eng = DiffEngine::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let hp = sample_harmonic_point(1, 1.0, &mut rng);
        let res = instanton_residual(&core, &hp, &eng).unwrap();
        assert!(res < 1e-6, "residual {res:e}");
    }
}

#[test]
fn perturbed_two_column_family_breaks_both_checks() {
    let data = two_column_example::<f64>(1, Q::i()).unwrap();
    let eng = DiffEngine::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pts: Vec<_> = (0..10).map(|_| sample_harmonic_point(1, 1.0, &mut rng)).collect();
    let mut broken = 0;
    for seed in 0..20u64 {
        let bad = perturb(&data, 0.3, seed);
        let rep = validate(&bad, 1e-3);
        let core = core_from_adhm(&bad);
        let max = pts
            .iter()
            .map(|p| instanton_residual(&core, p, &eng).unwrap())
            .fold(0.0f64, f64::max);
        if !rep.valid && max > 0.05 {
            broken += 1;
        }
    }
    assert!(broken >= 19, "only {broken}/20 seeds broke the checks");
}

#[test]
fn ym_density_positive_for_instanton_zero_for_flat() {
    let data = one_instanton::<f64>(1, &[Q::zero()], 1.0).unwrap();
    let core = core_from_adhm(&data);
    let eng = DiffEngine::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let hp = sample_harmonic_point::<f64, _>(1, 0.5, &mut rng);
    let d = ym_density(&core, &hp.base, &eng).unwrap();
    assert!(d > 1e-3, "density {d:e}");
    let flat = quatgauge::gauge::Core::constant(1, quatgauge::quatlin::CMatrix::zeros(2, 2));
    let d0 = ym_density(&flat, &hp.base, &eng).unwrap();
    assert!(d0.abs() < 1e-10, "flat density {d0:e}");
}

#[test]
fn wire_round_trip_preserves_data() {
    let data = one_instanton::<f64>(2, &[Q::i(), Q::new(0.3, 0.0, -0.2, 0.1)], 1.5).unwrap();
    let wire = data.to_wire();
    let text = serde_json::to_string(&wire).unwrap();
    let back: quatgauge::adhm::AdhmWire<f64> = serde_json::from_str(&text).unwrap();
    let data2 = AdhmData::from_wire(&back).unwrap();
    assert_eq!(data, data2);
}
