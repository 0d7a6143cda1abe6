//! Row-wise cubic spline interpolation of missing columns.
//!
//! Uses the not-a-knot end condition, so any cubic through the samples is
//! reproduced exactly. Positions outside the sampled range are extrapolated
//! with the end pieces.

use nalgebra::{DVector, LU};

use crate::error::{Error, Result};
use crate::Matrix;

/// Interpolated image plus whether the linear fallback (fewer than four
/// samples per row) was used.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnInterpolation {
    pub image: Matrix,
    pub linear_fallback: bool,
}

/// Fills a `rows x width` matrix from the sampled columns.
///
/// `samples` holds one column per entry of `positions`, which must be
/// strictly increasing and smaller than `width`. Sampled columns are copied
/// verbatim.
pub fn interpolate_columns(samples: &Matrix, positions: &[usize], width: usize) -> Result<ColumnInterpolation> {
    if samples.ncols() != positions.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![samples.nrows(), positions.len()],
            actual: vec![samples.nrows(), samples.ncols()],
        });
    }
    if positions.is_empty() {
        return Err(Error::InvalidConfig("no observed columns to interpolate from".into()));
    }
    if positions.windows(2).any(|w| w[0] >= w[1]) || positions[positions.len() - 1] >= width {
        return Err(Error::InvalidConfig(format!(
            "sample positions must increase strictly and stay below {width}"
        )));
    }
    let knots: Vec<f64> = positions.iter().map(|&p| p as f64).collect();
    let rows = samples.nrows();
    let mut image = Matrix::zeros(rows, width);
    let linear_fallback = positions.len() < 4;
    if linear_fallback {
        for c in 0..width {
            let col = linear_column(samples, &knots, c as f64);
            image.set_column(c, &col);
        }
    } else {
        let second = not_a_knot_second_derivatives(samples, &knots)?;
        for c in 0..width {
            let x = c as f64;
            let seg = segment(&knots, x);
            let (x0, x1) = (knots[seg], knots[seg + 1]);
            let h = x1 - x0;
            let (a, b) = (x1 - x, x - x0);
            for r in 0..rows {
                let (y0, y1) = (samples[(r, seg)], samples[(r, seg + 1)]);
                let (m0, m1) = (second[(seg, r)], second[(seg + 1, r)]);
                image[(r, c)] = m0 * a * a * a / (6.0 * h)
                    + m1 * b * b * b / (6.0 * h)
                    + (y0 / h - m0 * h / 6.0) * a
                    + (y1 / h - m1 * h / 6.0) * b;
            }
        }
    }
    for (k, &p) in positions.iter().enumerate() {
        image.set_column(p, &samples.column(k));
    }
    Ok(ColumnInterpolation {
        image,
        linear_fallback,
    })
}

/// Index of the knot interval used for `x`; end intervals extend outward.
fn segment(knots: &[f64], x: f64) -> usize {
    let last = knots.len() - 2;
    match knots.iter().rposition(|&k| k <= x) {
        None => 0,
        Some(i) => i.min(last),
    }
}

fn linear_column(samples: &Matrix, knots: &[f64], x: f64) -> DVector<f64> {
    if knots.len() == 1 {
        return samples.column(0).into_owned();
    }
    let seg = segment(knots, x);
    let t = (x - knots[seg]) / (knots[seg + 1] - knots[seg]);
    samples.column(seg) * (1.0 - t) + samples.column(seg + 1) * t
}

/// Second derivatives at the knots, one column per sample row.
fn not_a_knot_second_derivatives(samples: &Matrix, knots: &[f64]) -> Result<Matrix> {
    let n = knots.len();
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let mut a = Matrix::zeros(n, n);
    // third derivative continuous across the second and penultimate knots
    a[(0, 0)] = h[1];
    a[(0, 1)] = -(h[0] + h[1]);
    a[(0, 2)] = h[0];
    a[(n - 1, n - 3)] = h[n - 2];
    a[(n - 1, n - 2)] = -(h[n - 3] + h[n - 2]);
    a[(n - 1, n - 1)] = h[n - 3];
    for i in 1..n - 1 {
        a[(i, i - 1)] = h[i - 1];
        a[(i, i)] = 2.0 * (h[i - 1] + h[i]);
        a[(i, i + 1)] = h[i];
    }
    let rows = samples.nrows();
    let rhs = Matrix::from_fn(n, rows, |i, r| {
        if i == 0 || i == n - 1 {
            0.0
        } else {
            let s = |k: usize| samples[(r, k)];
            6.0 * ((s(i + 1) - s(i)) / h[i] - (s(i) - s(i - 1)) / h[i - 1])
        }
    });
    LU::new(a)
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("singular spline system".into()))
}
