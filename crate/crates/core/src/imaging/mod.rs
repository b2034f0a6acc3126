//! Raster types and the low-level image operations shared by every detector.

pub mod colour;
pub mod components;
pub mod gradient;
pub mod io;
pub mod morphology;
pub mod raster;

pub use colour::{desaturate, hsv_to_rgb, hue_distance, luma, rgb_to_hsv, to_grey, HsvPixel};
pub use components::{connected_components, label_components, BoundingBox, Region};
pub use gradient::{gradient_field, GradientField};
pub use raster::{BinaryMask, Frame, GreyImage, Label, TriMask};
