use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::math::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PixelRange {
    /// Pixels lie in [0, 1].
    Bounded01,
    Unbounded,
}

impl PixelRange {
    pub fn name(self) -> &'static str {
        match self {
            PixelRange::Bounded01 => "bounded01",
            PixelRange::Unbounded => "unbounded",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "bounded01" => Some(PixelRange::Bounded01),
            "unbounded" => Some(PixelRange::Unbounded),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub name: String,
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    pub width: usize,
    pub height: usize,
    pub pixel_range: PixelRange,
    /// Dynamic range used for SSIM.
    pub dynamic_range: f64,
    pub seed: Option<u64>,
    /// Latent sizes the data was generated with, when known.
    pub k: Option<usize>,
    pub k_bar: Option<usize>,
    /// Original indices of voxel columns removed by standardization.
    pub dropped_voxels: Vec<usize>,
}

impl Manifest {
    fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("name", &self.name);
        kv.set("n", self.n);
        kv.set("d1", self.d1);
        kv.set("d2", self.d2);
        kv.set("width", self.width);
        kv.set("height", self.height);
        kv.set("pixel_range", self.pixel_range.name());
        kv.set("dynamic_range", format!("{:.16e}", self.dynamic_range));
        if let Some(s) = self.seed {
            kv.set("seed", s);
        }
        if let Some(k) = self.k {
            kv.set("k", k);
        }
        if let Some(k) = self.k_bar {
            kv.set("k_bar", k);
        }
        let dropped: Vec<String> = self.dropped_voxels.iter().map(ToString::to_string).collect();
        kv.set("dropped_voxels", dropped.join(","));
        kv
    }

    fn from_kv(kv: &KvFile, origin: &str) -> Result<Self> {
        let optional = |key: &str| -> Result<Option<usize>> {
            kv.get(key).map(|_| kv.parse_value(key, origin)).transpose()
        };
        let pixel_range = kv.require("pixel_range", origin)?;
        let dropped_voxels = match kv.get("dropped_voxels") {
            None | Some("") => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    file: origin.to_string(),
                    detail: format!("bad dropped_voxels list {list:?}"),
                })?,
        };
        Ok(Self {
            name: kv.require("name", origin)?.to_string(),
            n: kv.parse_value("n", origin)?,
            d1: kv.parse_value("d1", origin)?,
            d2: kv.parse_value("d2", origin)?,
            width: kv.parse_value("width", origin)?,
            height: kv.parse_value("height", origin)?,
            pixel_range: PixelRange::from_name(pixel_range).ok_or_else(|| Error::Parse {
                file: origin.to_string(),
                detail: format!("unknown pixel_range {pixel_range:?}"),
            })?,
            dynamic_range: kv.parse_value("dynamic_range", origin)?,
            seed: kv.get("seed").map(|_| kv.parse_value("seed", origin)).transpose()?,
            k: optional("k")?,
            k_bar: optional("k_bar")?,
            dropped_voxels,
        })
    }
}

/// Paired images (`x`, one row per instance) and voxel responses (`y`).
#[derive(Clone, Debug, PartialEq)]
pub struct TwoViewDataset {
    pub x: Matrix,
    pub y: Matrix,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub manifest: Manifest,
}

impl TwoViewDataset {
    pub fn new(x: Matrix, y: Matrix, train: Vec<usize>, test: Vec<usize>, manifest: Manifest) -> Result<Self> {
        let ds = Self {
            x,
            y,
            train,
            test,
            manifest,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if self.x.shape() != (m.n, m.d1) {
            return Err(Error::shape("dataset images", format!("{}x{}", m.n, m.d1), format!("{:?}", self.x.shape())));
        }
        if self.y.shape() != (m.n, m.d2) {
            return Err(Error::shape("dataset voxels", format!("{}x{}", m.n, m.d2), format!("{:?}", self.y.shape())));
        }
        if m.width * m.height != m.d1 {
            return Err(Error::InvalidConfig(format!(
                "image {}x{} does not match {} pixels",
                m.width, m.height, m.d1
            )));
        }
        let mut seen = vec![false; m.n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= m.n || seen[i] {
                return Err(Error::InvalidConfig(format!(
                    "split index {i} out of range or repeated (n = {})",
                    m.n
                )));
            }
            seen[i] = true;
        }
        Ok(())
    }

    pub fn train_x(&self) -> Matrix {
        self.x.select_rows(&self.train)
    }

    pub fn train_y(&self) -> Matrix {
        self.y.select_rows(&self.train)
    }

    pub fn test_x(&self) -> Matrix {
        self.x.select_rows(&self.test)
    }

    pub fn test_y(&self) -> Matrix {
        self.y.select_rows(&self.test)
    }
}

/// Writes a matrix as headerless CSV with 17 significant digits.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for r in 0..m.rows() {
        w.write_record(m.row(r).iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless numeric CSV. With `expect` set, the shape must match.
pub fn read_matrix_csv(path: &Path, expect: Option<(usize, usize)>) -> Result<Matrix> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for record in reader.records() {
        let record = record?;
        if let Some((_, want)) = expect {
            if record.len() != want {
                return Err(Error::ShapeMismatchWithManifest {
                    file,
                    detail: format!("row {rows} has {} columns, manifest declares {want}", record.len()),
                });
            }
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse {
                    file,
                    detail: format!("row {rows} has {} columns, expected {c}", record.len()),
                })
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                file: file.clone(),
                detail: format!("row {rows}, column {col}: not a number {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { file, row: rows, col });
            }
            data.push(v);
        }
        rows += 1;
    }
    if let Some((want, _)) = expect {
        if rows != want {
            return Err(Error::ShapeMismatchWithManifest {
                file,
                detail: format!("{rows} rows, manifest declares {want}"),
            });
        }
    }
    let cols = cols.or(expect.map(|e| e.1)).unwrap_or(0);
    Matrix::new(rows, cols, data)
}

fn write_indices(path: &Path, idx: &[usize]) -> Result<()> {
    let text: String = idx.iter().map(|i| format!("{i}\n")).collect();
    fs::write(path, text)?;
    Ok(())
}

fn read_indices(path: &Path) -> Result<Vec<usize>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse().map_err(|_| Error::Parse {
                file: path.display().to_string(),
                detail: format!("bad row index {l:?}"),
            })
        })
        .collect()
}

/// Writes `manifest.txt`, `X.csv`, `Y.csv` and the split files into `dir`.
pub fn save_dataset(ds: &TwoViewDataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir)?;
    ds.manifest.to_kv().write(&dir.join("manifest.txt"))?;
    write_matrix_csv(&dir.join("X.csv"), &ds.x)?;
    write_matrix_csv(&dir.join("Y.csv"), &ds.y)?;
    write_indices(&dir.join("split_train.txt"), &ds.train)?;
    write_indices(&dir.join("split_test.txt"), &ds.test)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<TwoViewDataset> {
    let manifest_path = dir.join("manifest.txt");
    let kv = KvFile::read(&manifest_path)?;
    let manifest = Manifest::from_kv(&kv, &manifest_path.display().to_string())?;
    let x = read_matrix_csv(&dir.join("X.csv"), Some((manifest.n, manifest.d1)))?;
    let y = read_matrix_csv(&dir.join("Y.csv"), Some((manifest.n, manifest.d2)))?;
    let train = read_indices(&dir.join("split_train.txt"))?;
    let test = read_indices(&dir.join("split_test.txt"))?;
    TwoViewDataset::new(x, y, train, test, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TwoViewDataset {
        let x = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 / 11.0);
        let y = Matrix::from_fn(3, 2, |i, j| 0.1 + i as f64 - j as f64 / 3.0);
        let manifest = Manifest {
            name: "tiny".into(),
            n: 3,
            d1: 4,
            d2: 2,
            width: 2,
            height: 2,
            pixel_range: PixelRange::Bounded01,
            dynamic_range: 1.0,
            seed: Some(9),
            k: Some(1),
            k_bar: None,
            dropped_voxels: vec![4, 7],
        };
        TwoViewDataset::new(x, y, vec![0, 2], vec![1], manifest).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny();
        save_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn column_count_disagreeing_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        fs::write(dir.path().join("X.csv"), "1,2,3\n4,5,6\n7,8,9\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::ShapeMismatchWithManifest { .. })
        ));
    }

    #[test]
    fn non_finite_cell_is_located() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny(), dir.path()).unwrap();
        fs::write(dir.path().join("Y.csv"), "1,2\n3,NaN\n5,6\n").unwrap();
        match load_dataset(dir.path()) {
            Err(Error::NonFiniteEntry { row, col, .. }) => assert_eq!((row, col), (1, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::MissingFile(_))));
    }

    #[test]
    fn overlapping_split_rejected() {
        let ds = tiny();
        let r = TwoViewDataset::new(ds.x, ds.y, vec![0, 1], vec![1], ds.manifest);
        assert!(r.is_err());
    }
}
