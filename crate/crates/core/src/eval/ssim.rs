use crate::error::{Error, Result};

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Normalized 11x11 Gaussian window (σ = 1.5), row-major.
pub fn gaussian_window() -> Vec<f64> {
    let c = (WINDOW / 2) as f64;
    let mut w: Vec<f64> = (0..WINDOW * WINDOW)
        .map(|idx| {
            let (r, col) = ((idx / WINDOW) as f64 - c, (idx % WINDOW) as f64 - c);
            (-(r * r + col * col) / (2.0 * SIGMA * SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn ssim_from_stats(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Mean structural similarity of two `width x height` row-major images.
///
/// Images at least 11 pixels on both sides use the 11x11 Gaussian window over
/// every fully-contained position; smaller images fall back to one window
/// covering the whole image with uniform weights.
pub fn ssim(a: &[f64], b: &[f64], width: usize, height: usize, dynamic_range: f64) -> Result<f64> {
    if a.len() != b.len() || a.len() != width * height {
        return Err(Error::shape(
            "ssim",
            format!("{} pixels ({width}x{height})", width * height),
            format!("{} and {}", a.len(), b.len()),
        ));
    }
    if a.is_empty() || !(dynamic_range > 0.0) {
        return Err(Error::Precondition("ssim needs a non-empty image and positive range".into()));
    }
    let c1 = (K1 * dynamic_range).powi(2);
    let c2 = (K2 * dynamic_range).powi(2);

    if width < WINDOW || height < WINDOW {
        let n = a.len() as f64;
        let mx = a.iter().sum::<f64>() / n;
        let my = b.iter().sum::<f64>() / n;
        let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            vx += (x - mx) * (x - mx);
            vy += (y - my) * (y - my);
            cxy += (x - mx) * (y - my);
        }
        return Ok(ssim_from_stats(mx, my, vx / n, vy / n, cxy / n, c1, c2));
    }

    let w = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for top in 0..=(height - WINDOW) {
        for left in 0..=(width - WINDOW) {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in 0..WINDOW {
                let base = (top + r) * width + left;
                for c in 0..WINDOW {
                    let wt = w[r * WINDOW + c];
                    let (x, y) = (a[base + c], b[base + c]);
                    mx += wt * x;
                    my += wt * y;
                    sxx += wt * x * x;
                    syy += wt * y * y;
                    sxy += wt * x * y;
                }
            }
            total += ssim_from_stats(mx, my, sxx - mx * mx, syy - my * my, sxy - mx * my, c1, c2);
            count += 1;
        }
    }
    Ok(total / count as f64)
}
