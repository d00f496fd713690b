use std::collections::BTreeMap;

use lsptm_core::dataset::{MotifParams, SynthSpec, TriLabel};

/// `[normal, benign, malignant]` clip counts.
pub fn spec(counts: [usize; 3], frames: usize, side: usize, seed: u64) -> SynthSpec {
    SynthSpec {
        n_per_class: TriLabel::ALL.into_iter().zip(counts).collect::<BTreeMap<_, _>>(),
        frames,
        resolution: (side, side),
        seed,
        motif: MotifParams::default(),
    }
}
