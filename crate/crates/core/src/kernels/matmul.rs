use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`.
pub fn matmul_acc<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av != T::ZERO {
                axpy(av, &b[p * n..(p + 1) * n], row);
            }
        }
    }
}

pub fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; m * n];
    matmul_acc(a, b, &mut out, m, k, n);
    out
}

pub fn transpose<T: Real>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// Gradients of `c = a·b` given `dc`: returns `(da, db)`.
pub fn matmul_backward<T: Real>(
    a: &[T],
    b: &[T],
    dc: &[T],
    m: usize,
    k: usize,
    n: usize,
) -> (Vec<T>, Vec<T>) {
    // da = dc · bᵀ
    let bt = transpose(b, k, n);
    let da = matmul(dc, &bt, m, n, k);
    // db = aᵀ · dc
    let at = transpose(a, m, k);
    let db = matmul(&at, dc, k, m, n);
    (da, db)
}
