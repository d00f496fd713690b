use alloc::vec::Vec;

use crate::real::Real;

pub fn relu<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| if v > T::ZERO { v } else { T::ZERO }).collect()
}

pub fn relu_backward<T: Real>(x: &[T], dy: &[T]) -> Vec<T> {
    x.iter()
        .zip(dy)
        .map(|(&v, &g)| if v > T::ZERO { g } else { T::ZERO })
        .collect()
}

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
// 1/sqrt(2π)
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact (erf) GELU: `x·Φ(x)`.
pub fn gelu<T: Real>(x: &[T]) -> Vec<T> {
    let half = T::from_f64(0.5);
    let k = T::from_f64(FRAC_1_SQRT_2);
    x.iter()
        .map(|&v| half * v * (T::ONE + (v * k).erf()))
        .collect()
}

pub fn gelu_backward<T: Real>(x: &[T], dy: &[T]) -> Vec<T> {
    let half = T::from_f64(0.5);
    let k = T::from_f64(FRAC_1_SQRT_2);
    let c = T::from_f64(INV_SQRT_2PI);
    x.iter()
        .zip(dy)
        .map(|(&v, &g)| {
            let cdf = half * (T::ONE + (v * k).erf());
            let pdf = c * (-half * v * v).exp();
            g * (cdf + v * pdf)
        })
        .collect()
}

/// Splits a shape around `axis` into `(outer, len, inner)`.
pub fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Softmax along one axis of a row-major block `outer × len × inner`.
/// Each slice is shifted by its maximum before exponentiation.
pub fn softmax<T: Real>(x: &[T], outer: usize, len: usize, inner: usize) -> Vec<T> {
    let mut y = x.to_vec();
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let mut m = T::NEG_INFINITY;
            for j in 0..len {
                m = m.max(x[base + j * inner]);
            }
            let mut s = T::ZERO;
            for j in 0..len {
                let e = (x[base + j * inner] - m).exp();
                y[base + j * inner] = e;
                s += e;
            }
            for j in 0..len {
                y[base + j * inner] /= s;
            }
        }
    }
    y
}

pub fn softmax_backward<T: Real>(
    y: &[T],
    dy: &[T],
    outer: usize,
    len: usize,
    inner: usize,
) -> Vec<T> {
    let mut dx = alloc::vec![T::ZERO; y.len()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let mut dot = T::ZERO;
            for j in 0..len {
                let k = base + j * inner;
                dot += y[k] * dy[k];
            }
            for j in 0..len {
                let k = base + j * inner;
                dx[k] = y[k] * (dy[k] - dot);
            }
        }
    }
    dx
}

/// Mean cross-entropy of `logits[n×classes]` against integer labels, in
/// log-sum-exp form. Returns `(loss, probabilities)`.
pub fn cross_entropy<T: Real>(logits: &[T], labels: &[usize], classes: usize) -> (T, Vec<T>) {
    let n = labels.len();
    let mut probs = alloc::vec![T::ZERO; logits.len()];
    let mut total = T::ZERO;
    for (r, &label) in labels.iter().enumerate() {
        let row = &logits[r * classes..(r + 1) * classes];
        let m = row.iter().fold(T::NEG_INFINITY, |a, &b| a.max(b));
        let s: T = row.iter().map(|&v| (v - m).exp()).sum();
        let lse = m + s.ln();
        total += lse - row[label];
        for (c, p) in probs[r * classes..(r + 1) * classes].iter_mut().enumerate() {
            *p = (row[c] - lse).exp();
        }
    }
    (total / T::from_usize(n), probs)
}

pub fn cross_entropy_backward<T: Real>(probs: &[T], labels: &[usize], classes: usize, dloss: T) -> Vec<T> {
    let scale = dloss / T::from_usize(labels.len());
    let mut dx: Vec<T> = probs.iter().map(|&p| p * scale).collect();
    for (r, &label) in labels.iter().enumerate() {
        dx[r * classes + label] -= scale;
    }
    dx
}
