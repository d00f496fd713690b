use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::matmul::{matmul_acc, transpose};
use crate::real::Real;

/// Resolved geometry of one 3D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv3dGeom {
    pub batch: usize,
    pub in_channels: usize,
    pub input: [usize; 3],
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
    pub output: [usize; 3],
}

impl Conv3dGeom {
    pub fn new(
        input_shape: &[usize],
        weight_shape: &[usize],
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Result<Self> {
        if input_shape.len() != 5 || weight_shape.len() != 5 || input_shape[1] != weight_shape[1] {
            return Err(Error::DimensionMismatch {
                op: "conv3d",
                lhs: input_shape.to_vec(),
                rhs: weight_shape.to_vec(),
            });
        }
        if stride.contains(&0) {
            return Err(Error::InvalidArgument("conv3d stride must be positive".into()));
        }
        let mut output = [0; 3];
        let mut padded = [0; 3];
        for d in 0..3 {
            padded[d] = input_shape[2 + d] + 2 * padding[d];
            if weight_shape[2 + d] > padded[d] {
                return Err(Error::KernelTooLarge {
                    kernel: weight_shape[2..].to_vec(),
                    padded: padded.to_vec(),
                });
            }
            output[d] = (padded[d] - weight_shape[2 + d]) / stride[d] + 1;
        }
        Ok(Self {
            batch: input_shape[0],
            in_channels: input_shape[1],
            input: [input_shape[2], input_shape[3], input_shape[4]],
            out_channels: weight_shape[0],
            kernel: [weight_shape[2], weight_shape[3], weight_shape[4]],
            stride,
            padding,
            output,
        })
    }

    pub fn output_shape(&self) -> [usize; 5] {
        [
            self.batch,
            self.out_channels,
            self.output[0],
            self.output[1],
            self.output[2],
        ]
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }

    fn positions(&self) -> usize {
        self.output.iter().product()
    }

    fn input_len(&self) -> usize {
        self.in_channels * self.input.iter().product::<usize>()
    }

    /// Calls `f(row, col, src)` for every in-bounds (patch row, output position)
    /// pair, where `src` indexes one sample's input volume.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [t_in, h_in, w_in] = self.input;
        let [kt, kh, kw] = self.kernel;
        let [ot, oh, ow] = self.output;
        let [st, sh, sw] = self.stride;
        let [pt, ph, pw] = self.padding;
        let cols = self.positions();
        for c in 0..self.in_channels {
            for dt in 0..kt {
                for dh in 0..kh {
                    for dw in 0..kw {
                        let row = ((c * kt + dt) * kh + dh) * kw + dw;
                        for to in 0..ot {
                            let ti = (to * st + dt) as isize - pt as isize;
                            if ti < 0 || ti >= t_in as isize {
                                continue;
                            }
                            for ho in 0..oh {
                                let hi = (ho * sh + dh) as isize - ph as isize;
                                if hi < 0 || hi >= h_in as isize {
                                    continue;
                                }
                                let src_row = ((c * t_in + ti as usize) * h_in + hi as usize) * w_in;
                                let col_row = (to * oh + ho) * ow;
                                for wo in 0..ow {
                                    let wi = (wo * sw + dw) as isize - pw as isize;
                                    if wi < 0 || wi >= w_in as isize {
                                        continue;
                                    }
                                    f(row * cols, col_row + wo, src_row + wi as usize);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn im2col<T: Real>(&self, sample: &[T], cols: &mut [T]) {
        cols.fill(T::ZERO);
        self.for_each_tap(|row_off, col, src| cols[row_off + col] = sample[src]);
    }

    fn col2im<T: Real>(&self, cols: &[T], sample_grad: &mut [T]) {
        self.for_each_tap(|row_off, col, src| sample_grad[src] += cols[row_off + col]);
    }
}

/// Cross-correlation (no kernel flip) with zero padding.
pub fn conv3d<T: Real>(geom: &Conv3dGeom, input: &[T], weight: &[T], bias: Option<&[T]>) -> Vec<T> {
    let k = geom.patch_len();
    let p = geom.positions();
    let o = geom.out_channels;
    let mut out = vec![T::ZERO; geom.batch * o * p];
    let mut cols = vec![T::ZERO; k * p];
    let in_len = geom.input_len();
    for n in 0..geom.batch {
        geom.im2col(&input[n * in_len..(n + 1) * in_len], &mut cols);
        let dst = &mut out[n * o * p..(n + 1) * o * p];
        if let Some(b) = bias {
            for (oc, chunk) in dst.chunks_exact_mut(p).enumerate() {
                chunk.fill(b[oc]);
            }
        }
        matmul_acc(weight, &cols, dst, o, k, p);
    }
    out
}

/// Returns `(d_input, d_weight, d_bias)`.
pub fn conv3d_backward<T: Real>(
    geom: &Conv3dGeom,
    input: &[T],
    weight: &[T],
    dout: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let k = geom.patch_len();
    let p = geom.positions();
    let o = geom.out_channels;
    let in_len = geom.input_len();
    let mut dinput = vec![T::ZERO; input.len()];
    let mut dweight = vec![T::ZERO; weight.len()];
    let mut dbias = vec![T::ZERO; o];
    let wt = transpose(weight, o, k);
    let mut cols = vec![T::ZERO; k * p];
    let mut dcols = vec![T::ZERO; k * p];
    for n in 0..geom.batch {
        let g = &dout[n * o * p..(n + 1) * o * p];
        for (oc, chunk) in g.chunks_exact(p).enumerate() {
            dbias[oc] += chunk.iter().copied().sum::<T>();
        }
        geom.im2col(&input[n * in_len..(n + 1) * in_len], &mut cols);
        let cols_t = transpose(&cols, k, p);
        matmul_acc(g, &cols_t, &mut dweight, o, p, k);
        dcols.fill(T::ZERO);
        matmul_acc(&wt, g, &mut dcols, k, o, p);
        geom.col2im(&dcols, &mut dinput[n * in_len..(n + 1) * in_len]);
    }
    (dinput, dweight, dbias)
}
