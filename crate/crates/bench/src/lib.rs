//! Deterministic inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trsr_core::{DenseTensor, Mask, Matrix, TensorRing};

/// Smooth image with a separable texture, values roughly in `[0, 1]`.
pub fn textured_image(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freq: Vec<(f64, f64)> = (0..4)
        .map(|_| (rng.random_range(0.02..0.08), rng.random_range(0.3..0.6)))
        .collect();
    Matrix::from_fn(rows, cols, |r, c| {
        let (r, c) = (r as f64, c as f64);
        0.5 + 0.15 * (r / 30.0).sin() * (c / 40.0).cos()
            + freq.iter().map(|(a, b)| 0.07 * (a * r).cos() * (b * c).cos()).sum::<f64>()
    })
}

/// `image` with every other column blanked, plus the matching mask.
pub fn half_columns(image: &Matrix) -> (Matrix, Mask) {
    let mask = Mask::strided(image.nrows(), image.ncols(), 2).expect("non-empty image");
    let observed = mask.merge(image, &Matrix::zeros(image.nrows(), image.ncols())).expect("same shape");
    (observed, mask)
}

pub fn random_ring(shape: &[usize], rank: usize, seed: u64) -> TensorRing {
    let bonds = vec![rank; shape.len()];
    TensorRing::random(shape, &bonds, &mut ChaCha8Rng::seed_from_u64(seed)).expect("valid shape")
}

pub fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0)).expect("valid shape")
}
