//! Moving cast shadow detection.
//!
//! Five detectors share one calling convention: given a frame, a background
//! reference and a foreground mask they label every foreground pixel as
//! [`Label::Object`] or [`Label::Shadow`]. The crate also carries the GMM
//! background extractor that produces those inputs, pixel-level and
//! tracking-level scoring, and the sequence pipeline used by the
//! `shadow-bench` binary.

pub mod background;
pub mod chromacity;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod imaging;
pub mod methods;
pub mod physical;
pub mod pipeline;
pub mod synth;
pub mod texture_lr;
pub mod texture_sr;
pub mod tracking;

pub use error::{Error, Result};
pub use imaging::{BinaryMask, Frame, GreyImage, Label, TriMask};
