mod common;

use common::{fixed_pair, gaussian, ssim_oracle};
use dgmm_core::eval::{mse, pcc, screen_voxels, ssim, MetricReport};
use dgmm_core::math::RngState;
use proptest::prelude::*;

#[test]
fn ssim_matches_oracle_on_fixed_pair() {
    let (a, b) = fixed_pair();
    let got = ssim(&a, &b, 16, 16, 1.0).unwrap();
    let want = ssim_oracle(&a, &b, 16, 16, 1.0);
    assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
    assert!(got < 1.0);
}

#[test]
fn ssim_global_mode_for_small_images() {
    let a = [0.1, 0.5, 0.9, 0.3];
    let b = [0.2, 0.4, 0.8, 0.5];
    let (ma, mb) = (0.45, 0.475);
    let va = a.iter().map(|v| (v - ma) * (v - ma)).sum::<f64>() / 4.0;
    let vb = b.iter().map(|v| (v - mb) * (v - mb)).sum::<f64>() / 4.0;
    let cab = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / 4.0;
    let (c1, c2) = (1e-4, 9e-4);
    let want = (2.0 * ma * mb + c1) * (2.0 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    assert!((ssim(&a, &b, 2, 2, 1.0).unwrap() - want).abs() < 1e-14);
}

#[test]
fn mse_against_loop() {
    let mut rng = RngState::new(4);
    let a: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
    let b: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
    let mut s = 0.0;
    for i in 0..50 {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    assert!((mse(&a, &b).unwrap() - s / 50.0).abs() < 1e-14);
}

#[test]
fn report_aggregates_recompute() {
    let mut rng = RngState::new(8);
    let truth = gaussian(&mut rng, 5, 16, 1.0);
    let pred = gaussian(&mut rng, 5, 16, 1.0);
    let r = MetricReport::compute(&pred, &truth, 4, 4, 6.0).unwrap();
    let m = r.pcc.iter().sum::<f64>() / 5.0;
    assert!((r.pcc_summary().mean - m).abs() < 1e-15);
    assert!(r.to_csv().lines().count() == 6);
    assert!(r.summary_table().contains("SSIM"));
    assert!(MetricReport::compute(&pred, &truth.select_rows(&[0]), 4, 4, 1.0).is_err());
}

#[test]
fn noiseless_linear_voxels_are_selected() {
    let mut rng = RngState::new(21);
    let x = gaussian(&mut rng, 200, 16, 1.0);
    let w = gaussian(&mut rng, 16, 5, 1.0);
    let y = x.matmul(&w);
    let rep = screen_voxels(&x, &y, 10).unwrap();
    assert!(rep.r2.iter().all(|&r| r >= 0.99), "{:?}", rep.r2);
    assert_eq!(rep.selected, (0..5).collect::<Vec<_>>());
}

#[test]
fn pure_noise_voxels_are_mostly_excluded() {
    let mut excluded = 0;
    for seed in 0..50 {
        let mut rng = RngState::new(1000 + seed);
        let x = gaussian(&mut rng, 100, 16, 1.0);
        let y = gaussian(&mut rng, 100, 1, 1.0);
        if screen_voxels(&x, &y, 10).unwrap().selected.is_empty() {
            excluded += 1;
        }
    }
    assert!(excluded >= 45, "{excluded} of 50 excluded");
}

#[test]
fn selection_follows_voxel_permutation() {
    let mut rng = RngState::new(5);
    let x = gaussian(&mut rng, 60, 8, 1.0);
    let mut y = gaussian(&mut rng, 60, 6, 1.0);
    let signal = x.matmul(&gaussian(&mut rng, 8, 6, 1.0));
    for j in [0, 3] {
        y.set_col(j, &signal.col(j));
    }
    let perm = [5, 4, 3, 2, 1, 0];
    let a = screen_voxels(&x, &y, 5).unwrap();
    let b = screen_voxels(&x, &y.select_cols(&perm), 5).unwrap();
    for (new, &old) in perm.iter().enumerate() {
        assert_eq!(a.r2[old], b.r2[new]);
        assert_eq!(a.is_selected(old), b.is_selected(new));
    }
}

proptest! {
    #[test]
    fn pcc_positive_affine_invariance(
        a in prop::collection::vec(-10.0f64..10.0, 3..40),
        alpha in 0.01f64..100.0,
        beta in -50.0f64..50.0,
        seed in 0u64..1000,
    ) {
        let mut rng = RngState::new(seed);
        let b: Vec<f64> = a.iter().map(|v| v + rng.normal()).collect();
        if let (Ok(r), Ok(r2)) = (pcc(&a, &b), pcc(&a.iter().map(|v| alpha * v + beta).collect::<Vec<_>>(), &b)) {
            prop_assert!((r - r2).abs() <= 1e-12 * (1.0 + alpha.max(1.0 / alpha)));
        }
    }

    #[test]
    fn pcc_in_unit_interval(a in prop::collection::vec(-1e3f64..1e3, 2..30), seed in 0u64..1000) {
        let mut rng = RngState::new(seed);
        let b: Vec<f64> = a.iter().map(|_| rng.normal()).collect();
        let r = pcc(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
    }

    #[test]
    fn ssim_self_is_one_and_symmetric(w in 1usize..20, h in 1usize..20, seed in 0u64..1000) {
        let mut rng = RngState::new(seed);
        let a: Vec<f64> = (0..w * h).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..w * h).map(|_| rng.uniform()).collect();
        prop_assert!((ssim(&a, &a, w, h, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let (ab, ba) = (ssim(&a, &b, w, h, 1.0).unwrap(), ssim(&b, &a, w, h, 1.0).unwrap());
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }
}
