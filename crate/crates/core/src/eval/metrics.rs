use crate::error::{Error, Result};
use crate::eval::ssim::ssim;
use crate::math::Matrix;

/// Pearson correlation of two equal-length vectors. If exactly one input is
/// constant the correlation is taken as 0.
pub fn pcc(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("pcc", a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::Precondition("pcc needs at least two values".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    match (saa > 0.0, sbb > 0.0) {
        (false, false) => Err(Error::ZeroVariance),
        (true, true) => Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)),
        _ => Ok(0.0),
    }
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("mse", a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::Precondition("mse of empty vectors".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

impl Aggregate {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Per-instance PCC/MSE/SSIM between reconstructions and ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub pcc: Vec<f64>,
    pub mse: Vec<f64>,
    pub ssim: Vec<f64>,
}

impl MetricReport {
    /// Rows of `pred` and `truth` are vectorized `width x height` images.
    pub fn compute(pred: &Matrix, truth: &Matrix, width: usize, height: usize, dynamic_range: f64) -> Result<Self> {
        if pred.shape() != truth.shape() {
            return Err(Error::shape(
                "MetricReport",
                format!("{}x{}", truth.rows(), truth.cols()),
                format!("{}x{}", pred.rows(), pred.cols()),
            ));
        }
        if pred.rows() == 0 {
            return Err(Error::Precondition("no instances to evaluate".into()));
        }
        let mut report = Self {
            pcc: Vec::with_capacity(pred.rows()),
            mse: Vec::with_capacity(pred.rows()),
            ssim: Vec::with_capacity(pred.rows()),
        };
        for i in 0..pred.rows() {
            let (p, t) = (pred.row(i), truth.row(i));
            report.pcc.push(pcc(p, t)?);
            report.mse.push(mse(p, t)?);
            report.ssim.push(ssim(p, t, width, height, dynamic_range)?);
        }
        Ok(report)
    }

    pub fn pcc_summary(&self) -> Aggregate {
        Aggregate::of(&self.pcc)
    }

    pub fn mse_summary(&self) -> Aggregate {
        Aggregate::of(&self.mse)
    }

    pub fn ssim_summary(&self) -> Aggregate {
        Aggregate::of(&self.ssim)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("instance,pcc,mse,ssim\n");
        for i in 0..self.pcc.len() {
            s.push_str(&format!(
                "{i},{:.17e},{:.17e},{:.17e}\n",
                self.pcc[i], self.mse[i], self.ssim[i]
            ));
        }
        s
    }

    pub fn summary_table(&self) -> String {
        let row = |name: &str, a: Aggregate| format!("{name:<6} {:>12.6} {:>12.6}\n", a.mean, a.std);
        let mut s = format!("{:<6} {:>12} {:>12}\n", "metric", "mean", "std");
        s.push_str(&row("PCC", self.pcc_summary()));
        s.push_str(&row("MSE", self.mse_summary()));
        s.push_str(&row("SSIM", self.ssim_summary()));
        s.push_str(&format!("n = {}\n", self.pcc.len()));
        s
    }
}
