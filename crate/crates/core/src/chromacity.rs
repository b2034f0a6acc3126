//! HSV chromacity shadow test with a square voting window.
//!
//! A foreground pixel votes "shadow" when its value drops by a bounded ratio,
//! its saturation does not rise by more than `tau_s` and its hue stays within
//! `tau_h` degrees of the background. The final label is a strict majority of
//! the votes cast by foreground pixels in the window.

use crate::error::{Error, Result};
use crate::imaging::colour::{hue_distance, rgb_to_hsv, HsvPixel};
use crate::imaging::raster::{check_dims, BinaryMask, Frame, Label, TriMask};

#[derive(Debug, Clone, PartialEq)]
pub struct ChromacityParams {
    pub beta1: f64,
    pub beta2: f64,
    pub tau_s: f64,
    /// Degrees.
    pub tau_h: f64,
    /// Odd side length of the voting window.
    pub window: usize,
}

impl Default for ChromacityParams {
    fn default() -> Self {
        Self {
            beta1: 0.4,
            beta2: 0.9,
            tau_s: 0.1,
            tau_h: 60.0,
            window: 5,
        }
    }
}

impl ChromacityParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.beta1 > 0.0 && self.beta1 < self.beta2 && self.beta2 <= 1.0) {
            return Err(Error::param(
                format!("{prefix}.beta1/{prefix}.beta2"),
                "need 0 < beta1 < beta2 <= 1",
            ));
        }
        if !(-1.0..=1.0).contains(&self.tau_s) {
            return Err(Error::param(format!("{prefix}.tau_s"), "must be in [-1, 1]"));
        }
        if !(0.0..=180.0).contains(&self.tau_h) {
            return Err(Error::param(format!("{prefix}.tau_h"), "must be in [0, 180]"));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::param(format!("{prefix}.window"), "must be odd and >= 1"));
        }
        Ok(())
    }
}

/// The three-condition per-pixel test.
#[inline]
pub fn is_shadow_vote(f: HsvPixel, b: HsvPixel, p: &ChromacityParams) -> bool {
    if b.v <= 0.0 {
        return false;
    }
    let ratio = f.v / b.v;
    p.beta1 <= ratio
        && ratio <= p.beta2
        && (f.s - b.s) <= p.tau_s
        && hue_distance(f.h, b.h) <= p.tau_h
}

/// Raw per-pixel votes over the foreground (no window aggregation).
pub fn shadow_votes(
    frame: &Frame,
    background: &Frame,
    foreground: &BinaryMask,
    p: &ChromacityParams,
) -> Result<BinaryMask> {
    check_dims(frame.dims(), background.dims())?;
    check_dims(frame.dims(), foreground.dims())?;
    let (w, h) = frame.dims();
    let votes = foreground
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &fg)| {
            fg && is_shadow_vote(rgb_to_hsv(frame.at(i)), rgb_to_hsv(background.at(i)), p)
        })
        .collect();
    BinaryMask::from_vec(w, h, votes)
}

pub fn classify_chromacity(
    frame: &Frame,
    background: &Frame,
    foreground: &BinaryMask,
    p: &ChromacityParams,
) -> Result<TriMask> {
    p.validate("chromacity")?;
    let votes = shadow_votes(frame, background, foreground, p)?;
    Ok(majority_filter(foreground, &votes, p.window))
}

/// Labels each foreground pixel Shadow when strictly more than half of the
/// foreground pixels in its window voted shadow.
pub(crate) fn majority_filter(foreground: &BinaryMask, votes: &BinaryMask, window: usize) -> TriMask {
    let (w, h) = foreground.dims();
    let mut out = TriMask::new(w, h);
    if window == 1 {
        for (i, l) in out.as_mut_slice().iter_mut().enumerate() {
            if foreground.as_slice()[i] {
                *l = if votes.as_slice()[i] { Label::Shadow } else { Label::Object };
            }
        }
        return out;
    }
    let fg_sum = integral(foreground, w, h);
    let vote_sum = integral(votes, w, h);
    let r = window / 2;
    let stride = w + 1;
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r + 1).min(h);
        for x in 0..w {
            if !foreground.get(x, y) {
                continue;
            }
            let x0 = x.saturating_sub(r);
            let x1 = (x + r + 1).min(w);
            let sum = |t: &[u32]| {
                t[y1 * stride + x1] + t[y0 * stride + x0] - t[y0 * stride + x1] - t[y1 * stride + x0]
            };
            let label = if 2 * sum(&vote_sum) > sum(&fg_sum) {
                Label::Shadow
            } else {
                Label::Object
            };
            out.set(x, y, label);
        }
    }
    out
}

fn integral(mask: &BinaryMask, w: usize, h: usize) -> Vec<u32> {
    let stride = w + 1;
    let mut t = vec![0u32; stride * (h + 1)];
    let src = mask.as_slice();
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += u32::from(src[y * w + x]);
            t[(y + 1) * stride + x + 1] = t[y * stride + x + 1] + row;
        }
    }
    t
}
