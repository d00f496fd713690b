use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;

pub fn pool_output(input: [usize; 3], window: [usize; 3], stride: [usize; 3]) -> Result<[usize; 3]> {
    if window.contains(&0) || stride.contains(&0) {
        return Err(Error::InvalidArgument("pool window and stride must be positive".into()));
    }
    let mut out = [0; 3];
    for d in 0..3 {
        if window[d] > input[d] {
            return Err(Error::WindowExceedsInput {
                window: window.to_vec(),
                input: input.to_vec(),
            });
        }
        out[d] = (input[d] - window[d]) / stride[d] + 1;
    }
    Ok(out)
}

/// Windowed maximum over the last three axes of `[planes × T × H × W]`.
/// Returns the pooled values and, per output, the flat input index of the
/// maximum (first in scan order on ties).
pub fn max_pool3d<T: Real>(
    x: &[T],
    planes: usize,
    input: [usize; 3],
    window: [usize; 3],
    stride: [usize; 3],
    output: [usize; 3],
) -> (Vec<T>, Vec<usize>) {
    let [ti, hi, wi] = input;
    let [to, ho, wo] = output;
    let plane_in = ti * hi * wi;
    let total = planes * to * ho * wo;
    let mut vals = Vec::with_capacity(total);
    let mut arg = Vec::with_capacity(total);
    for pl in 0..planes {
        let base = pl * plane_in;
        for ot in 0..to {
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut best = T::NEG_INFINITY;
                    let mut best_idx = usize::MAX;
                    for dt in 0..window[0] {
                        for dh in 0..window[1] {
                            for dw in 0..window[2] {
                                let idx = base
                                    + ((ot * stride[0] + dt) * hi + oh * stride[1] + dh) * wi
                                    + ow * stride[2]
                                    + dw;
                                if best_idx == usize::MAX || x[idx] > best {
                                    best = x[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                    }
                    vals.push(best);
                    arg.push(best_idx);
                }
            }
        }
    }
    (vals, arg)
}
