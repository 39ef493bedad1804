mod common;

use common::to_na;
use dgmm_core::data::{
    generate_synthetic, load_dataset, load_ground_truth, save_dataset, save_ground_truth, zscore_voxels, MapKind,
    SyntheticConfig,
};

fn config(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n: 40,
        n_test: 10,
        d1: 9,
        d2: 12,
        k: 2,
        k_bar: 3,
        seed,
        ..SyntheticConfig::default()
    }
}

#[test]
fn voxel_covariance_matches_generative_moments() {
    let cfg = SyntheticConfig {
        n: 10_000,
        n_test: 1,
        d1: 4,
        d2: 3,
        k: 2,
        k_bar: 2,
        voxel_precision: 4.0,
        seed: 5,
        ..SyntheticConfig::default()
    };
    let (ds, t) = generate_synthetic(&cfg).unwrap();
    let b = to_na(&t.b);
    let h = to_na(&t.h);
    let model = b.transpose() * &b + h.transpose() * &h + nalgebra::DMatrix::identity(3, 3) * 0.25;
    let y = to_na(&ds.y);
    let n = y.nrows() as f64;
    let mean = y.row_mean();
    let centered = nalgebra::DMatrix::from_fn(y.nrows(), 3, |i, j| y[(i, j)] - mean[j]);
    let sample = centered.transpose() * &centered / (n - 1.0);
    for i in 0..3 {
        for j in 0..3 {
            // standard error of a sample covariance ≈ sqrt((σ_ii σ_jj + σ_ij²) / n)
            let se = ((model[(i, i)] * model[(j, j)] + model[(i, j)].powi(2)) / n).sqrt();
            assert!((sample[(i, j)] - model[(i, j)]).abs() < 5.0 * se, "({i},{j})");
        }
    }
}

#[test]
fn noiseless_voxels_have_low_rank() {
    let cfg = SyntheticConfig {
        voxel_precision: f64::INFINITY,
        ..config(2)
    };
    let (ds, _) = generate_synthetic(&cfg).unwrap();
    let sv = to_na(&ds.y).singular_values();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    assert!(sv[4] > 1e-6);
    assert!(sv[5..].iter().all(|&s| s < 1e-8), "{sv:?}");
}

#[test]
fn dataset_and_truth_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    for map in [MapKind::Linear, MapKind::Mlp { hidden: 5 }] {
        let (ds, t) = generate_synthetic(&SyntheticConfig { map, ..config(3) }).unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        save_ground_truth(&t, &dir.path().join("truth")).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
        assert_eq!(load_ground_truth(&dir.path().join("truth")).unwrap(), t);
    }
}

#[test]
fn different_seeds_differ() {
    let (a, _) = generate_synthetic(&config(1)).unwrap();
    let (b, _) = generate_synthetic(&config(2)).unwrap();
    assert_ne!(a.y, b.y);
}

#[test]
fn standardized_test_rows_use_training_statistics() {
    let (ds, _) = generate_synthetic(&config(4)).unwrap();
    let (z, t) = zscore_voxels(&ds).unwrap();
    let train = ds.train_y();
    for j in 0..ds.y.cols() {
        let col = train.col(j);
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
        for &i in &ds.test {
            assert!((z.y[(i, j)] - (ds.y[(i, j)] - m) / sd).abs() < 1e-12);
        }
        assert!((t.mean[j] - m).abs() < 1e-12);
    }
}
