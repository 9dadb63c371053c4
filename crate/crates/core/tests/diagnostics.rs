mod common;

use std::f64::consts::PI;

use common::random_tensor;
use proptest::prelude::*;
use steinmetz::diagnostics::{
    argmax, covariance_comparison, latent_orthogonality, lpq_norm, mag_phase_mse,
    wrapped_angle_diff, CovBlocks,
};
use steinmetz::rng::Rng;
use steinmetz::tensor::Tensor;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_ignores_constant_shift(row in prop::collection::vec(-5.0..5.0f64, 1..12), c in -100.0..100.0f64) {
        let shifted: Vec<f64> = row.iter().map(|v| v + c).collect();
        prop_assert_eq!(argmax(&row), argmax(&shifted));
    }

    #[test]
    fn phase_error_ignores_full_turns(a in -PI..PI, b in -PI..PI, turns in -3i32..3) {
        let d = wrapped_angle_diff(a, b);
        let d2 = wrapped_angle_diff(a + 2.0 * PI * turns as f64, b);
        prop_assert!((d - d2).abs() < 1e-9);
        prop_assert!(d > -PI - 1e-12 && d <= PI + 1e-12);
    }

    #[test]
    fn orthogonality_is_scale_invariant(seed in any::<u64>(), s in 0.01..100.0f64, t in 0.01..100.0f64) {
        let mut rng = Rng::seed_from_u64(seed);
        let (a, b) = (random_tensor(&mut rng, 6, 8), random_tensor(&mut rng, 6, 8));
        let base = latent_orthogonality(&a, &b).unwrap().mean_abs_cosine;
        let scaled = latent_orthogonality(&a.map(|v| v * s), &b.map(|v| -v * t)).unwrap().mean_abs_cosine;
        prop_assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn zeroing_cross_blocks_never_increases_norm(seed in any::<u64>(), p in 1.0..4.0f64, q in 1.0..4.0f64) {
        let mut rng = Rng::seed_from_u64(seed);
        let (a, b) = (random_tensor(&mut rng, 20, 4), random_tensor(&mut rng, 20, 4));
        let c = covariance_comparison(&a, &b, p, q).unwrap();
        prop_assert!(c.norm_j >= c.norm_s);
    }

    #[test]
    fn lpq_norm_shrinks_when_a_block_is_zeroed(seed in any::<u64>(), p in 1.0..4.0f64, q in 1.0..4.0f64) {
        let mut rng = Rng::seed_from_u64(seed);
        let a = random_tensor(&mut rng, 6, 6);
        let mut z = a.clone();
        for i in 0..3 {
            for j in 3..6 {
                z.data_mut()[i * 6 + j] = 0.0;
            }
        }
        prop_assert!(lpq_norm(&z, p, q).unwrap() <= lpq_norm(&a, p, q).unwrap());
    }
}

#[test]
fn independent_latents_have_unit_ratio() {
    let mut rng = Rng::seed_from_u64(31);
    let n = 10_000;
    let draw =
        |rng: &mut Rng| Tensor::matrix(n, 8, (0..n * 8).map(|_| rng.normal()).collect()).unwrap();
    let (a, b) = (draw(&mut rng), draw(&mut rng));
    let c = covariance_comparison(&a, &b, 2.0, 2.0).unwrap();
    assert!((c.ratio - 1.0).abs() <= 0.05, "ratio {}", c.ratio);
}

#[test]
fn covariance_matches_two_pass_estimate() {
    let mut rng = Rng::seed_from_u64(2);
    let (a, b) = (random_tensor(&mut rng, 9, 3), random_tensor(&mut rng, 9, 3));
    let blocks = CovBlocks::estimate(&a, &b).unwrap();
    let mean = |t: &Tensor, j: usize| (0..9).map(|i| t.get(i, j)).sum::<f64>() / 9.0;
    for j in 0..3 {
        for l in 0..3 {
            let want = (0..9)
                .map(|i| (a.get(i, j) - mean(&a, j)) * (b.get(i, l) - mean(&b, l)))
                .sum::<f64>()
                / 8.0;
            assert!((blocks.k_ri.get(j, l) - want).abs() < 1e-12);
        }
    }
    assert!(CovBlocks::estimate(&a.select_rows(&[0]), &b.select_rows(&[0])).is_err());
}

#[test]
fn mixed_norm_reference_values() {
    let a = Tensor::from_rows(&[vec![3.0, -4.0], vec![0.0, 1.0]]).unwrap();
    // rows: ‖(3,4)‖₂ = 5, ‖(0,1)‖₂ = 1; outer ℓ1 = 6
    assert!((lpq_norm(&a, 1.0, 2.0).unwrap() - 6.0).abs() < 1e-12);
    assert!((lpq_norm(&a, 2.0, 2.0).unwrap() - 26f64.sqrt()).abs() < 1e-12);
    assert!(lpq_norm(&a, 0.5, 2.0).is_err());
}

#[test]
fn magnitude_and_phase_errors() {
    let pred = Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let target = Tensor::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
    let e = mag_phase_mse(&pred, &target).unwrap();
    // row 0: |i| = 1 vs 1, phase π/2 vs 0; row 1: 0 vs 1, phase 0 (degenerate) vs π
    assert!((e.mag_mse - 0.5).abs() < 1e-12);
    assert!((e.phase_mse - (PI * PI / 4.0 + PI * PI) / 2.0).abs() < 1e-12);
    assert_eq!(e.degenerate_phases, 1);
}
