use super::{Image, QuantizeError};

pub const SSIM_WINDOW: usize = 7;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const L: f64 = 255.0;

fn same_dims(a: &Image, b: &Image) -> Result<(), QuantizeError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(QuantizeError::Dimensions(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean squared difference over every channel value, in 0-255 units.
pub fn image_mse(a: &Image, b: &Image) -> Result<f64, QuantizeError> {
    same_dims(a, b)?;
    if a.data().is_empty() {
        return Err(QuantizeError::EmptyImage);
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g1: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let mut w: Vec<f64> = g1.iter().flat_map(|a| g1.iter().map(move |b| a * b)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// SSIM on BT.601 luma with a 7x7 Gaussian window (sigma 1.5), averaged over
/// every position where the window fits inside the image.
pub fn image_ssim(a: &Image, b: &Image) -> Result<f64, QuantizeError> {
    same_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(QuantizeError::Dimensions(format!("{w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")));
    }
    let (x, y) = (a.luma(), b.luma());
    let win = gaussian_window();
    let c1 = (K1 * L) * (K1 * L);
    let c2 = (K2 * L) * (K2 * L);
    let mut total = 0.0;
    let mut count = 0usize;
    for oy in 0..=h - SSIM_WINDOW {
        for ox in 0..=w - SSIM_WINDOW {
            let (mut mx, mut my, mut exx, mut eyy, mut exy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                for dx in 0..SSIM_WINDOW {
                    let g = win[dy * SSIM_WINDOW + dx];
                    let i = (oy + dy) * w + ox + dx;
                    mx += g * x[i];
                    my += g * y[i];
                    exx += g * x[i] * x[i];
                    eyy += g * y[i] * y[i];
                    exy += g * x[i] * y[i];
                }
            }
            let vx = exx - mx * mx;
            let vy = eyy - my * my;
            let cov = exy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}
