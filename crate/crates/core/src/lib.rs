//! Sub-pixel coordinate codecs for heatmap-based facial landmark localization
//! and tools to measure the quantization error each one leaves behind.
//!
//! The five codecs are DIRECT (plain argmax), WSM (quarter-pixel shift toward
//! the second maximum), WOV (argmax plus a per-landmark offset pair), WOM
//! (argmax plus shared offset maps) and HIH (an integer heatmap plus a
//! decimal heatmap whose extent covers one integer pixel).
//!
//! Modules, bottom-up:
//!
//! - [`geometry`]: points, landmark sets and the raw → input crop transform.
//! - [`heatmap`]: grids, truncated-Gaussian rendering, argmax and top-2.
//! - [`codecs`]: encoders/decoders and the encode → decode round trip.
//! - [`metrics`]: NME, CED, AUC and failure rate.
//! - [`datasets`]: `.pts`, WFLW list and canonical JSON annotation I/O.
//! - [`bench`]: ideal-condition benchmark over datasets or Monte-Carlo draws.
//! - [`wire`]: sparse JSON form of an encoded sample.

pub mod bench;
pub mod codecs;
pub mod datasets;
pub mod error;
pub mod geometry;
pub mod heatmap;
pub mod metrics;
pub mod wire;

pub use codecs::{CodecConfig, DecodeResult, EncodedSample, OobPolicy, Scheme};
pub use error::{Error, Result};
pub use geometry::{AffineTransform, FaceSample, LandmarkSet, Point2, Space};
pub use heatmap::{GaussianSpec, GridPoint, HeatmapGrid};
