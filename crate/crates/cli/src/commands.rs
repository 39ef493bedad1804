use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dgmm_core::data::{
    generate_synthetic, load_dataset, read_matrix_csv, save_dataset, save_ground_truth, write_matrix_csv,
    zscore_voxels, PixelRange, TwoViewDataset, VoxelTransform,
};
use dgmm_core::eval::{screen_voxels_with_penalty, MetricReport};
use dgmm_core::kv::KvFile;
use dgmm_core::math::Matrix;
use dgmm_core::predict::{Predictor, RhoChoice};
use dgmm_core::vb::{load_model, log_to_csv, save_model, train, TrainedModel};
use dgmm_core::Error as CoreError;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

const SNAPSHOT: &str = "config.txt";
const SEED_FILE: &str = "seed.txt";
const TRANSFORM: &str = "voxel_transform.csv";
const SOURCE: &str = "source.txt";
const RECONSTRUCTIONS: &str = "reconstructions.csv";
const ROWS: &str = "rows.txt";

fn create_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn snapshot(cfg: &RunConfig, seed: u64, out: &Path) -> CliResult<()> {
    cfg.to_kv().write(&out.join(SNAPSHOT))?;
    write_text(&out.join(SEED_FILE), &format!("{seed}\n"))
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn load_data(path: &Path) -> CliResult<TwoViewDataset> {
    let ds = load_dataset(path)?;
    if ds.train.is_empty() {
        return Err(CoreError::EmptyTrainingSet.into());
    }
    Ok(ds)
}

pub fn generate(mut cfg: RunConfig, seed: Option<u64>, out: &Path) -> CliResult<()> {
    if let Some(s) = seed {
        cfg.generate.seed = s;
    }
    let (ds, truth) = generate_synthetic(&cfg.generate)?;
    create_out(out)?;
    save_dataset(&ds, out)?;
    save_ground_truth(&truth, &out.join("truth"))?;
    snapshot(&cfg, cfg.generate.seed, out)?;
    log::info!(
        "wrote {} rows ({} train, {} test) to {}",
        ds.x.rows(),
        ds.train.len(),
        ds.test.len(),
        out.display()
    );
    Ok(())
}

/// Standardization followed by optional screening, as one column map from
/// raw voxels to model inputs.
fn fit_voxel_map(cfg: &RunConfig, ds: &TwoViewDataset, out: &Path) -> CliResult<VoxelTransform> {
    let (zs, zt) = zscore_voxels(ds)?;
    if !cfg.screen.enabled {
        return Ok(zt);
    }
    let report = screen_voxels_with_penalty(&zs.train_x(), &zs.train_y(), cfg.screen.folds, cfg.screen.penalty)?;
    write_text(&out.join("screening.csv"), &report.to_csv())?;
    if report.selected.is_empty() {
        return Err(CliError::Numerical("no voxel has positive cross-validated R²".into()));
    }
    log::info!("screening kept {} of {} voxels", report.selected.len(), zt.kept.len());
    Ok(VoxelTransform {
        kept: report.selected.iter().map(|&j| zt.kept[j]).collect(),
        mean: report.selected.iter().map(|&j| zt.mean[j]).collect(),
        std: report.selected.iter().map(|&j| zt.std[j]).collect(),
    })
}

pub fn train_cmd(mut cfg: RunConfig, seed: Option<u64>, out: &Path) -> CliResult<()> {
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let data = absolute(cfg.data_path()?);
    cfg.data_path = Some(data.clone());
    let ds = load_data(&data)?;
    if let Some(dk) = ds.manifest.k.filter(|&dk| dk != cfg.train.k) {
        return Err(CliError::DimensionMismatch(format!(
            "model.k={} but the dataset manifest declares K={dk}",
            cfg.train.k
        )));
    }
    create_out(out)?;
    let map = fit_voxel_map(&cfg, &ds, out)?;
    let x = ds.train_x();
    let y = map.apply(&ds.train_y());

    let outcome = match train(&x, &y, &cfg.train) {
        Ok(o) => o,
        Err(CoreError::Diverged { epoch, checkpoint }) => {
            save_model(&checkpoint, &out.join("checkpoint"))?;
            return Err(CliError::Numerical(format!(
                "training diverged at epoch {epoch}; checkpoint written to {}",
                out.join("checkpoint").display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    save_model(&outcome.model, out)?;
    map.save(&out.join(TRANSFORM))?;
    let mut source = KvFile::new();
    source.set("d1", ds.manifest.d1);
    source.set("d2", ds.y.cols());
    source.set("n_train", ds.train.len());
    source.write(&out.join(SOURCE))?;
    write_text(&out.join("train_log.csv"), &log_to_csv(&outcome.log))?;
    snapshot(&cfg, cfg.train.seed, out)?;
    if !outcome.converged {
        log::warn!("stopped at the epoch cap before the bound converged");
    }
    if let Some(last) = outcome.log.last() {
        log::info!("epoch {}: bound {:.6e}", last.epoch, last.bound);
    }
    Ok(())
}

/// Dimensions of `ds` against what `model` was trained on.
fn check_dims(model: &TrainedModel, model_dir: &Path, ds: &TwoViewDataset) -> CliResult<()> {
    let k = model.recog.output_dim();
    if let Some(dk) = ds.manifest.k {
        if dk != k {
            return Err(CliError::DimensionMismatch(format!(
                "model has K={k} but the dataset manifest declares K={dk}"
            )));
        }
    }
    if let Some(dk) = ds.manifest.k_bar {
        if dk != model.vb.k_bar() {
            return Err(CliError::DimensionMismatch(format!(
                "model has K̄={} but the dataset manifest declares K̄={dk}",
                model.vb.k_bar()
            )));
        }
    }
    let src = KvFile::read(&model_dir.join(SOURCE))?;
    let origin = model_dir.join(SOURCE).display().to_string();
    for (key, found) in [("d1", ds.x.cols()), ("d2", ds.y.cols()), ("n_train", ds.train.len())] {
        let want: usize = src.parse_value(key, &origin)?;
        if want != found {
            return Err(CliError::DimensionMismatch(format!(
                "model expects {key}={want}, dataset has {found}"
            )));
        }
    }
    Ok(())
}

pub fn reconstruct(
    mut cfg: RunConfig,
    seed: Option<u64>,
    model_dir: &Path,
    dataset: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    if let Some(s) = seed {
        cfg.predict.seed = s;
    }
    if let Some(d) = dataset {
        cfg.data_path = Some(d.to_path_buf());
    }
    let data = absolute(cfg.data_path()?);
    cfg.data_path = Some(data.clone());
    if !model_dir.join("manifest.txt").exists() {
        return Err(CliError::Config(format!("no model in {}", model_dir.display())));
    }
    let model = load_model(model_dir)?;
    let ds = load_data(&data)?;
    check_dims(&model, model_dir, &ds)?;
    let map = VoxelTransform::load(&model_dir.join(TRANSFORM))?;
    if map.kept.iter().any(|&j| j >= ds.y.cols()) || map.kept.len() != model.vb.d2() {
        return Err(CliError::DimensionMismatch(format!(
            "voxel map selects {} columns, model has D₂={}",
            map.kept.len(),
            model.vb.d2()
        )));
    }

    let y_train = map.apply(&ds.train_y());
    let p = Predictor::new(&model, &y_train)?;
    let s = &cfg.predict;
    let bw = p.bandwidth(s.bandwidth)?;
    let rho = match &s.rho {
        RhoChoice::Fixed(r) => *r,
        RhoChoice::CrossValidate { grid, folds } => {
            let sel = p.select_rho(&ds.train_x(), grid, *folds, s.neighbors, bw, s.samples, s.seed)?;
            log::info!("cross-validated rho = {} (mean PCC {:?})", sel.rho, sel.mean_pcc);
            sel.rho
        }
    };
    if matches!(s.rho, RhoChoice::CrossValidate { .. }) {
        cfg.rho_selected = Some(rho);
    }
    let rec = p.reconstruct_rows(&map.apply(&ds.test_y()), s.neighbors, bw, rho, s.samples, s.seed)?;

    create_out(out)?;
    write_matrix_csv(&out.join(RECONSTRUCTIONS), &rec)?;
    let rows: Vec<String> = ds.test.iter().map(|i| i.to_string()).collect();
    write_text(&out.join(ROWS), &(rows.join("\n") + "\n"))?;
    let m = &ds.manifest;
    if m.width == m.height && m.width > 1 {
        let dir = out.join("images");
        create_out(&dir)?;
        for (r, &row) in ds.test.iter().enumerate() {
            write_pgm(&dir.join(format!("row{row}.pgm")), rec.row(r), m.width, m.pixel_range)?;
        }
    }
    snapshot(&cfg, cfg.predict.seed, out)
}

/// 8-bit binary PGM. Bounded pixels are clipped to [0, 1]; unbounded ones are
/// stretched over the image's own range.
fn write_pgm(path: &Path, pixels: &[f64], side: usize, range: PixelRange) -> CliResult<()> {
    let (lo, hi) = match range {
        PixelRange::Bounded01 => (0.0, 1.0),
        PixelRange::Unbounded => pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
    };
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = format!("P5\n{side} {side}\n255\n").into_bytes();
    bytes.extend(pixels.iter().map(|&v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8));
    let mut f = fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn evaluate(mut cfg: RunConfig, recon_dir: &Path, dataset: Option<&Path>, out: &Path) -> CliResult<String> {
    if let Some(d) = dataset {
        cfg.data_path = Some(d.to_path_buf());
    }
    let data = absolute(cfg.data_path()?);
    cfg.data_path = Some(data.clone());
    let ds = load_dataset(&data)?;
    let rows_path = recon_dir.join(ROWS);
    let rows_text = fs::read_to_string(&rows_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", rows_path.display())))?;
    let rows: Vec<usize> = rows_text
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| CliError::Io(format!("{}: bad row index {t:?}", rows_path.display()))))
        .collect::<CliResult<_>>()?;
    if let Some(&bad) = rows.iter().find(|&&r| r >= ds.x.rows()) {
        return Err(CliError::DimensionMismatch(format!(
            "row {bad} is out of range for a dataset of {} rows",
            ds.x.rows()
        )));
    }
    let pred: Matrix = read_matrix_csv(&recon_dir.join(RECONSTRUCTIONS), None)?;
    if pred.shape() != (rows.len(), ds.manifest.d1) {
        return Err(CliError::DimensionMismatch(format!(
            "reconstructions are {}x{}, expected {}x{}",
            pred.rows(),
            pred.cols(),
            rows.len(),
            ds.manifest.d1
        )));
    }
    let truth = ds.x.select_rows(&rows);
    let m = &ds.manifest;
    let report = MetricReport::compute(&pred, &truth, m.width, m.height, m.dynamic_range)?;
    create_out(out)?;
    write_text(&out.join("metrics.csv"), &report.to_csv())?;
    let summary = report.summary_table();
    write_text(&out.join("summary.txt"), &summary)?;
    snapshot(&cfg, cfg.predict.seed, out)?;
    Ok(summary)
}
