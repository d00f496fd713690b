//! The three video backbones behind one configuration enum.

pub mod c3d;
pub mod timesformer;
pub mod videoswin;
pub mod window;

use serde::{Deserialize, Serialize};

pub use c3d::{c3d_forward, c3d_init, C3dConfig};
pub use timesformer::{tsf_forward, tsf_init, TsfConfig};
pub use videoswin::{swin_forward, swin_init, SwinConfig};

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{Bound, ModelParams};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    C3d,
    Timesformer,
    Videoswin,
}

impl BackboneKind {
    pub fn id(self) -> &'static str {
        match self {
            Self::C3d => "c3d",
            Self::Timesformer => "timesformer",
            Self::Videoswin => "videoswin",
        }
    }

    /// Display name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Self::C3d => "C3D",
            Self::Timesformer => "TimeSformer",
            Self::Videoswin => "Video-Swin-Transformer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "c3d" => Some(Self::C3d),
            "timesformer" => Some(Self::Timesformer),
            "videoswin" => Some(Self::Videoswin),
            _ => None,
        }
    }

    pub fn toy(self) -> BackboneConfig {
        match self {
            Self::C3d => BackboneConfig::C3d(C3dConfig::toy()),
            Self::Timesformer => BackboneConfig::Timesformer(TsfConfig::toy()),
            Self::Videoswin => BackboneConfig::Videoswin(SwinConfig::toy()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backbone", rename_all = "lowercase")]
pub enum BackboneConfig {
    C3d(C3dConfig),
    Timesformer(TsfConfig),
    Videoswin(SwinConfig),
}

impl BackboneConfig {
    pub fn kind(&self) -> BackboneKind {
        match self {
            Self::C3d(_) => BackboneKind::C3d,
            Self::Timesformer(_) => BackboneKind::Timesformer,
            Self::Videoswin(_) => BackboneKind::Videoswin,
        }
    }

    /// Clip extent `(T, H, W)` the backbone consumes.
    pub fn input(&self) -> [usize; 3] {
        match self {
            Self::C3d(c) => c.input,
            Self::Timesformer(c) => c.input,
            Self::Videoswin(c) => c.input,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Self::C3d(c) => c.num_classes,
            Self::Timesformer(c) => c.num_classes,
            Self::Videoswin(c) => c.num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::C3d(c) => c.validate(),
            Self::Timesformer(c) => c.validate(),
            Self::Videoswin(c) => c.validate(),
        }
    }

    pub fn init<T: Real>(&self, seed: u64) -> Result<ModelParams<T>> {
        match self {
            Self::C3d(c) => c3d_init(c, seed),
            Self::Timesformer(c) => tsf_init(c, seed),
            Self::Videoswin(c) => swin_init(c, seed),
        }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, bound: &Bound, batch: Var) -> Result<Var> {
        match self {
            Self::C3d(c) => c3d_forward(g, c, bound, batch),
            Self::Timesformer(c) => tsf_forward(g, c, bound, batch),
            Self::Videoswin(c) => swin_forward(g, c, bound, batch),
        }
    }
}
