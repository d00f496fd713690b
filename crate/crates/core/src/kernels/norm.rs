use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;

/// Layer normalization over contiguous slices of length `width`.
/// Returns `(y, mean, rstd)` with one mean/rstd per slice.
pub fn layer_norm<T: Real>(
    x: &[T],
    gamma: &[T],
    beta: &[T],
    width: usize,
    eps: T,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let rows = x.len() / width;
    let mut y = vec![T::ZERO; x.len()];
    let mut means = Vec::with_capacity(rows);
    let mut rstds = Vec::with_capacity(rows);
    let w = T::from_usize(width);
    for r in 0..rows {
        let s = &x[r * width..(r + 1) * width];
        let mean = s.iter().copied().sum::<T>() / w;
        let var = s.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / w;
        let rstd = T::ONE / (var + eps).sqrt();
        for (j, out) in y[r * width..(r + 1) * width].iter_mut().enumerate() {
            *out = (s[j] - mean) * rstd * gamma[j] + beta[j];
        }
        means.push(mean);
        rstds.push(rstd);
    }
    (y, means, rstds)
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn layer_norm_backward<T: Real>(
    x: &[T],
    gamma: &[T],
    means: &[T],
    rstds: &[T],
    dy: &[T],
    width: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut dx = vec![T::ZERO; x.len()];
    let mut dgamma = vec![T::ZERO; width];
    let mut dbeta = vec![T::ZERO; width];
    let w = T::from_usize(width);
    let mut xhat = vec![T::ZERO; width];
    let mut dxhat = vec![T::ZERO; width];
    for r in 0..means.len() {
        let s = &x[r * width..(r + 1) * width];
        let g = &dy[r * width..(r + 1) * width];
        let (mean, rstd) = (means[r], rstds[r]);
        let mut sum_d = T::ZERO;
        let mut sum_dx = T::ZERO;
        for j in 0..width {
            xhat[j] = (s[j] - mean) * rstd;
            dxhat[j] = g[j] * gamma[j];
            dgamma[j] += g[j] * xhat[j];
            dbeta[j] += g[j];
            sum_d += dxhat[j];
            sum_dx += dxhat[j] * xhat[j];
        }
        let mean_d = sum_d / w;
        let mean_dx = sum_dx / w;
        for (j, out) in dx[r * width..(r + 1) * width].iter_mut().enumerate() {
            *out = rstd * (dxhat[j] - mean_d - xhat[j] * mean_dx);
        }
    }
    (dx, dgamma, dbeta)
}
