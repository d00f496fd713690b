//! 3D window geometry: partitioning, cyclic shifts, shifted-window masks and
//! relative position indices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::GATHER_ZERO;
use crate::real::Real;
use crate::tensor::Tensor;

fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Window layout of one attention stage over a `T'×H'×W'` token grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowGeom {
    /// Unpadded token extent.
    pub extent: [usize; 3],
    /// Effective window (the configured window clipped to the extent).
    pub window: [usize; 3],
    /// Configured window, which sizes the relative position table.
    pub table_window: [usize; 3],
    /// Cyclic shift applied in shifted blocks.
    pub shift: [usize; 3],
}

impl WindowGeom {
    /// Clips the window to the extent on any axis where the extent is not
    /// larger than the window; those axes are never shifted.
    pub fn new(extent: [usize; 3], window: [usize; 3]) -> Result<Self> {
        if extent.contains(&0) || window.contains(&0) {
            return Err(Error::Config("window and extent must be positive".into()));
        }
        let mut eff = window;
        let mut shift = [0; 3];
        for d in 0..3 {
            if extent[d] <= window[d] {
                eff[d] = extent[d];
            } else {
                shift[d] = window[d] / 2;
            }
        }
        Ok(Self {
            extent,
            window: eff,
            table_window: window,
            shift,
        })
    }

    pub fn padded(&self) -> [usize; 3] {
        core::array::from_fn(|d| div_ceil(self.extent[d], self.window[d]) * self.window[d])
    }

    pub fn has_padding(&self) -> bool {
        self.padded() != self.extent
    }

    pub fn grid(&self) -> [usize; 3] {
        let p = self.padded();
        core::array::from_fn(|d| p[d] / self.window[d])
    }

    pub fn num_windows(&self) -> usize {
        self.grid().iter().product()
    }

    pub fn window_len(&self) -> usize {
        self.window.iter().product()
    }

    /// Padded-grid coordinate of slot `local` in window `win`.
    pub fn slot_coord(&self, win: usize, local: usize) -> [usize; 3] {
        let [_, gh, gw] = self.grid();
        let [wt, wh, ww] = self.window;
        let (bt, bh, bw) = (win / (gh * gw), (win / gw) % gh, win % gw);
        let (lt, lh, lw) = (local / (wh * ww), (local / ww) % wh, local % ww);
        [bt * wt + lt, bh * wh + lh, bw * ww + lw]
    }

    /// `(window, local)` slot holding padded-grid coordinate `p`.
    pub fn slot_of(&self, p: [usize; 3]) -> (usize, usize) {
        let [_, gh, gw] = self.grid();
        let [wt, wh, ww] = self.window;
        let win = ((p[0] / wt) * gh + p[1] / wh) * gw + p[2] / ww;
        let local = ((p[0] % wt) * wh + p[1] % wh) * ww + p[2] % ww;
        (win, local)
    }

    /// Source coordinate (in the unshifted padded grid) of shifted-grid
    /// position `p`, rolling by `-shift`.
    fn unshifted(&self, p: [usize; 3], shifted: bool) -> [usize; 3] {
        if !shifted {
            return p;
        }
        let pad = self.padded();
        core::array::from_fn(|d| (p[d] + self.shift[d]) % pad[d])
    }

    fn is_pad(&self, o: [usize; 3]) -> bool {
        (0..3).any(|d| o[d] >= self.extent[d])
    }

    fn token_offset(&self, o: [usize; 3]) -> usize {
        (o[0] * self.extent[1] + o[1]) * self.extent[2] + o[2]
    }

    /// Gather index taking `[N×T'×H'×W'×D]` tokens to windows
    /// `[N·nW × L × D]`, applying padding and (optionally) the cyclic shift.
    pub fn partition_gather(&self, batch: usize, dim: usize, shifted: bool) -> Vec<usize> {
        let (nw, l) = (self.num_windows(), self.window_len());
        let per_sample: usize = self.extent.iter().product();
        let mut index = Vec::with_capacity(batch * nw * l * dim);
        for n in 0..batch {
            for win in 0..nw {
                for local in 0..l {
                    let o = self.unshifted(self.slot_coord(win, local), shifted);
                    if self.is_pad(o) {
                        index.extend(core::iter::repeat_n(GATHER_ZERO, dim));
                    } else {
                        let base = (n * per_sample + self.token_offset(o)) * dim;
                        index.extend(base..base + dim);
                    }
                }
            }
        }
        index
    }

    /// Inverse of [`WindowGeom::partition_gather`]: windows back to the
    /// unpadded, unshifted token grid.
    pub fn reverse_gather(&self, batch: usize, dim: usize, shifted: bool) -> Vec<usize> {
        let (nw, l) = (self.num_windows(), self.window_len());
        let pad = self.padded();
        let [t, h, w] = self.extent;
        let mut index = Vec::with_capacity(batch * t * h * w * dim);
        for n in 0..batch {
            for ot in 0..t {
                for oh in 0..h {
                    for ow in 0..w {
                        let o = [ot, oh, ow];
                        let p: [usize; 3] = if shifted {
                            core::array::from_fn(|d| (o[d] + pad[d] - self.shift[d]) % pad[d])
                        } else {
                            o
                        };
                        let (win, local) = self.slot_of(p);
                        let base = ((n * nw + win) * l + local) * dim;
                        index.extend(base..base + dim);
                    }
                }
            }
        }
        index
    }

    /// Per-window attention permission matrix `[nW × L × L]`: `true` where a
    /// query may attend to a key. Keys from a different pre-shift region, or
    /// padding keys for real queries, are forbidden.
    pub fn attention_mask(&self, shifted: bool) -> Vec<bool> {
        let (nw, l) = (self.num_windows(), self.window_len());
        let pad = self.padded();
        let region = |p: [usize; 3]| -> usize {
            let mut id = 0;
            for d in 0..3 {
                let r = if !shifted || self.shift[d] == 0 || p[d] < pad[d] - self.window[d] {
                    0
                } else if p[d] < pad[d] - self.shift[d] {
                    1
                } else {
                    2
                };
                id = id * 3 + r;
            }
            id
        };
        let mut mask = Vec::with_capacity(nw * l * l);
        for win in 0..nw {
            let keys: Vec<(usize, bool)> = (0..l)
                .map(|local| {
                    let p = self.slot_coord(win, local);
                    (region(p), self.is_pad(self.unshifted(p, shifted)))
                })
                .collect();
            for i in 0..l {
                for j in 0..l {
                    mask.push(keys[i] == keys[j]);
                }
            }
        }
        mask
    }

    pub fn needs_mask(&self, shifted: bool) -> bool {
        self.has_padding() || (shifted && self.shift != [0, 0, 0])
    }

    pub fn table_rows(&self) -> usize {
        self.table_window.iter().map(|&w| 2 * w - 1).product()
    }

    /// Relative position table row for every `(query, key)` pair of one window.
    pub fn relative_index(&self) -> Vec<usize> {
        let l = self.window_len();
        let [ct, ch, cw] = self.table_window;
        let mut out = Vec::with_capacity(l * l);
        for i in 0..l {
            let a = self.slot_coord(0, i);
            for j in 0..l {
                let b = self.slot_coord(0, j);
                let dt = a[0] + ct - 1 - b[0];
                let dh = a[1] + ch - 1 - b[1];
                let dw = a[2] + cw - 1 - b[2];
                out.push((dt * (2 * ch - 1) + dh) * (2 * cw - 1) + dw);
            }
        }
        out
    }
}

fn grid_shape(shape: &[usize]) -> Result<(usize, [usize; 3], usize)> {
    match *shape {
        [t, h, w, d] => Ok((1, [t, h, w], d)),
        [n, t, h, w, d] => Ok((n, [t, h, w], d)),
        _ => Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "expected [T, H, W, D] or [N, T, H, W, D]".into(),
        }),
    }
}

fn apply_gather<T: Real>(src: &[T], index: &[usize]) -> Vec<T> {
    index
        .iter()
        .map(|&i| if i == GATHER_ZERO { T::ZERO } else { src[i] })
        .collect()
}

/// Splits a `[T'×H'×W'×D]` (optionally batched) grid into non-overlapping
/// windows `[nW × L × D]` in row-major window order.
pub fn window_partition_3d<T: Real>(x: &Tensor<T>, window: [usize; 3]) -> Result<Tensor<T>> {
    let (n, extent, d) = grid_shape(x.shape())?;
    if (0..3).any(|k| window[k] == 0 || extent[k] % window[k] != 0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "extent {extent:?} not divisible by window {window:?}"
        )));
    }
    let geom = WindowGeom {
        extent,
        window,
        table_window: window,
        shift: [0; 3],
    };
    let idx = geom.partition_gather(n, d, false);
    Tensor::new(&[n * geom.num_windows(), geom.window_len(), d], apply_gather(x.data(), &idx))
}

/// Exact inverse of [`window_partition_3d`].
pub fn window_reverse_3d<T: Real>(
    windows: &Tensor<T>,
    window: [usize; 3],
    extent: [usize; 3],
    batch: usize,
) -> Result<Tensor<T>> {
    if (0..3).any(|k| window[k] == 0 || !extent[k].is_multiple_of(window[k])) {
        return Err(Error::InvalidArgument(alloc::format!(
            "extent {extent:?} not divisible by window {window:?}"
        )));
    }
    let geom = WindowGeom {
        extent,
        window,
        table_window: window,
        shift: [0; 3],
    };
    let s = windows.shape();
    if s.len() != 3 || s[0] != batch * geom.num_windows() || s[1] != geom.window_len() {
        return Err(Error::InvalidShape {
            shape: s.to_vec(),
            reason: alloc::format!("windows do not tile {extent:?} with {window:?}"),
        });
    }
    let d = s[2];
    let idx = geom.reverse_gather(batch, d, false);
    let shape: Vec<usize> = if batch == 1 {
        vec![extent[0], extent[1], extent[2], d]
    } else {
        vec![batch, extent[0], extent[1], extent[2], d]
    };
    Tensor::new(&shape, apply_gather(windows.data(), &idx))
}

/// Torus roll of a `[T'×H'×W'×D]` (optionally batched) grid:
/// `out[p] = x[(p − offset) mod extent]` per axis.
pub fn cyclic_shift_3d<T: Real>(x: &Tensor<T>, offsets: [isize; 3]) -> Result<Tensor<T>> {
    let (n, [t, h, w], d) = grid_shape(x.shape())?;
    let ext = [t as isize, h as isize, w as isize];
    let src = |p: usize, k: usize| -> usize { (p as isize - offsets[k]).rem_euclid(ext[k]) as usize };
    let mut out = Vec::with_capacity(x.numel());
    let data = x.data();
    for b in 0..n {
        for pt in 0..t {
            for ph in 0..h {
                for pw in 0..w {
                    let base = (((b * t + src(pt, 0)) * h + src(ph, 1)) * w + src(pw, 2)) * d;
                    out.extend_from_slice(&data[base..base + d]);
                }
            }
        }
    }
    Tensor::new(x.shape(), out)
}
