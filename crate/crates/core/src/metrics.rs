//! Image quality metrics: PSNR, SSIM and CNR.

use crate::error::{Error, Result};
use crate::Matrix;

fn same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: vec![a.nrows(), a.ncols()],
            actual: vec![b.nrows(), b.ncols()],
        });
    }
    Ok(())
}

pub fn mse(reference: &Matrix, test: &Matrix) -> Result<f64> {
    same_shape(reference, test)?;
    let n = reference.len() as f64;
    Ok(reference
        .iter()
        .zip(test.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// `10 log10(peak^2 / MSE)` in dB. Identical images give `f64::INFINITY`.
pub fn psnr(reference: &Matrix, test: &Matrix, peak: f64) -> Result<f64> {
    if peak.is_nan() || peak <= 0.0 {
        return Err(Error::InvalidConfig(format!("peak must be positive, got {peak}")));
    }
    let mse = mse(reference, test)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// SSIM settings. The defaults are an 8x8 uniform window moved one pixel at
/// a time, `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`, and population (divide by
/// N) window moments; `L` is `data_range`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl SsimParams {
    pub fn with_range(data_range: f64) -> Self {
        Self {
            data_range,
            ..Self::default()
        }
    }
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 8,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

/// Summed-area table with a zero border row and column.
fn integral(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    let mut s = Matrix::zeros(rows + 1, cols + 1);
    for c in 0..cols {
        for r in 0..rows {
            s[(r + 1, c + 1)] = m[(r, c)] + s[(r, c + 1)] + s[(r + 1, c)] - s[(r, c)];
        }
    }
    s
}

fn box_sum(s: &Matrix, r: usize, c: usize, w: usize) -> f64 {
    s[(r + w, c + w)] - s[(r, c + w)] - s[(r + w, c)] + s[(r, c)]
}

/// Mean local SSIM over all window positions.
pub fn ssim(reference: &Matrix, test: &Matrix, params: &SsimParams) -> Result<f64> {
    same_shape(reference, test)?;
    let w = params.window;
    if w == 0 || reference.nrows() < w || reference.ncols() < w {
        return Err(Error::InvalidShape {
            shape: vec![reference.nrows(), reference.ncols()],
            reason: format!("image is smaller than the {w}x{w} SSIM window"),
        });
    }
    let c1 = (params.k1 * params.data_range).powi(2);
    let c2 = (params.k2 * params.data_range).powi(2);
    // center on the reference mean to limit cancellation in the moments
    let shift = reference.mean();
    let x = reference.map(|v| v - shift);
    let y = test.map(|v| v - shift);
    let sx = integral(&x);
    let sy = integral(&y);
    let sxx = integral(&x.component_mul(&x));
    let syy = integral(&y.component_mul(&y));
    let sxy = integral(&x.component_mul(&y));
    let n = (w * w) as f64;
    let (nr, nc) = (reference.nrows() - w + 1, reference.ncols() - w + 1);
    let mut total = 0.0;
    for c in 0..nc {
        for r in 0..nr {
            let mx = box_sum(&sx, r, c, w) / n;
            let my = box_sum(&sy, r, c, w) / n;
            let vx = (box_sum(&sxx, r, c, w) / n - mx * mx).max(0.0);
            let vy = (box_sum(&syy, r, c, w) / n - my * my).max(0.0);
            let cov = box_sum(&sxy, r, c, w) / n - mx * my;
            let (ux, uy) = (mx + shift, my + shift);
            total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
    }
    Ok(total / (nr * nc) as f64)
}

/// Axis-aligned rectangle, `(row, col)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn new(row: usize, col: usize, height: usize, width: usize) -> Self {
        Self {
            row,
            col,
            height,
            width,
        }
    }

    fn check(&self, m: &Matrix) -> Result<()> {
        if self.height == 0
            || self.width == 0
            || self.row + self.height > m.nrows()
            || self.col + self.width > m.ncols()
        {
            return Err(Error::InvalidConfig(format!(
                "region {self:?} does not lie inside the {}x{} image",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }

    /// Mean and population standard deviation over the rectangle.
    pub fn stats(&self, m: &Matrix) -> Result<(f64, f64)> {
        self.check(m)?;
        let view = m.view((self.row, self.col), (self.height, self.width));
        let n = view.len() as f64;
        let mean = view.sum() / n;
        let var = view.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok((mean, var.sqrt()))
    }
}

/// Foreground regions measured against one shared background region.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiSpec {
    pub foreground: Vec<Rect>,
    pub background: Rect,
}

/// `|mu_f - mu_b| / sqrt((sigma_f^2 + sigma_b^2) / 2)` averaged over the
/// foreground regions.
pub fn cnr(image: &Matrix, roi: &RoiSpec) -> Result<f64> {
    if roi.foreground.is_empty() {
        return Err(Error::InvalidConfig("CNR needs at least one foreground region".into()));
    }
    let (mb, sb) = roi.background.stats(image)?;
    let mut total = 0.0;
    for fg in &roi.foreground {
        let (mf, sf) = fg.stats(image)?;
        let den = (0.5 * (sf * sf + sb * sb)).sqrt();
        if den == 0.0 {
            return Err(Error::Degenerate(format!(
                "foreground {fg:?} and background are both constant"
            )));
        }
        total += (mf - mb).abs() / den;
    }
    Ok(total / roi.foreground.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_examples() {
        let a = Matrix::from_fn(4, 4, |r, c| (r * c) as f64);
        assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
        let zero = Matrix::zeros(5, 5);
        let tenth = Matrix::from_element(5, 5, 25.5);
        assert!((psnr(&zero, &tenth, 255.0).unwrap() - 20.0).abs() < 1e-12);
        assert!(psnr(&zero, &a, 1.0).is_err());
        assert!(psnr(&zero, &zero, 0.0).is_err());
    }

    #[test]
    fn ssim_identity_and_inverse() {
        let x = Matrix::from_fn(16, 16, |r, c| if (r / 3 + c / 2) % 2 == 0 { 1.0 } else { 0.0 });
        let p = SsimParams::default();
        assert!((ssim(&x, &x, &p).unwrap() - 1.0).abs() < 1e-12);
        let inv = x.map(|v| 1.0 - v);
        assert!(ssim(&x, &inv, &p).unwrap() < 0.2);
        assert!(ssim(&Matrix::zeros(4, 4), &Matrix::zeros(4, 4), &p).is_err());
    }

    #[test]
    fn ssim_is_symmetric() {
        let x = Matrix::from_fn(12, 10, |r, c| ((r * 7 + c * 3) % 11) as f64 / 10.0);
        let y = Matrix::from_fn(12, 10, |r, c| ((r * 5 + c * 2) % 9) as f64 / 8.0);
        let p = SsimParams::default();
        assert!((ssim(&x, &y, &p).unwrap() - ssim(&y, &x, &p).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn cnr_closed_form() {
        // foreground {3, 5}: mean 4, sd 1; background {1, 3}: mean 2, sd 1
        let m = Matrix::from_row_slice(2, 2, &[3.0, 5.0, 1.0, 3.0]);
        let roi = RoiSpec {
            foreground: vec![Rect::new(0, 0, 1, 2)],
            background: Rect::new(1, 0, 1, 2),
        };
        assert!((cnr(&m, &roi).unwrap() - 2.0).abs() < 1e-12);
        let same = RoiSpec {
            foreground: vec![Rect::new(0, 0, 1, 2)],
            background: Rect::new(0, 0, 1, 2),
        };
        assert_eq!(cnr(&m, &same).unwrap(), 0.0);
    }

    #[test]
    fn cnr_errors() {
        let flat = Matrix::from_element(4, 4, 1.0);
        let roi = RoiSpec {
            foreground: vec![Rect::new(0, 0, 2, 2)],
            background: Rect::new(2, 2, 2, 2),
        };
        assert!(matches!(cnr(&flat, &roi), Err(Error::Degenerate(_))));
        let outside = RoiSpec {
            foreground: vec![Rect::new(3, 3, 2, 2)],
            background: Rect::new(0, 0, 2, 2),
        };
        assert!(cnr(&flat, &outside).is_err());
        let empty = RoiSpec {
            foreground: vec![],
            background: Rect::new(0, 0, 2, 2),
        };
        assert!(cnr(&flat, &empty).is_err());
    }
}
