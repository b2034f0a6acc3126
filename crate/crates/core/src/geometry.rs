//! Geometry-based shadow detection for upright people.
//!
//! Blobs are split into per-person parts at the valleys of their top-profile
//! (one part per head peak). Inside a part the shadow starts at the row below
//! the centre of gravity where the per-row pixel count changes the most;
//! below it, pixels farther than half the body width from the body axis form
//! the shadow candidate `R₂`. A Gaussian in elliptical coordinates and grey
//! level is fitted to `R₂` and every pixel of the part is tested against it.

use crate::error::{Error, Result};
use crate::imaging::colour::to_grey;
use crate::imaging::components::{connected_components, Region};
use crate::imaging::raster::{check_dims, BinaryMask, Frame, GreyImage, Label, TriMask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryStats {
    pub centroid: (f64, f64),
    /// Radians in `(-π/2, π/2]`, measured from the +x axis (image y points down).
    pub orientation: f64,
    pub mu11: f64,
    pub mu20: f64,
    pub mu02: f64,
}

/// Centroid, unnormalised second-order central moments and orientation
/// `½·atan2(2μ₁₁, μ₂₀ − μ₀₂)`. A tie (`μ₁₁ = 0`, `μ₂₀ = μ₀₂`) gives 0.
pub fn region_stats(pixels: &[(usize, usize)]) -> Result<GeometryStats> {
    if pixels.len() < 2 {
        return Err(Error::RegionTooSmall(pixels.len()));
    }
    let n = pixels.len() as f64;
    let (sx, sy) = pixels
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x as f64, b + y as f64));
    let (cx, cy) = (sx / n, sy / n);
    let (mut mu11, mut mu20, mut mu02) = (0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        mu11 += dx * dy;
        mu20 += dx * dx;
        mu02 += dy * dy;
    }
    let orientation = if mu11 == 0.0 && mu20 == mu02 {
        0.0
    } else {
        let t = 0.5 * (2.0 * mu11).atan2(mu20 - mu02);
        // atan2 may return -π, fold it into the half-open range
        if t <= -std::f64::consts::FRAC_PI_2 {
            t + std::f64::consts::PI
        } else {
            t
        }
    };
    Ok(GeometryStats {
        centroid: (cx, cy),
        orientation,
        mu11,
        mu20,
        mu02,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    /// Minimum head-peak prominence as a fraction of the blob height.
    pub prominence: f64,
    /// Width of the moving-average filter applied to the top profile.
    pub smoothing: usize,
    /// Smallest per-row count change (pixels) that can start a shadow.
    pub min_row_change: usize,
    pub weight_s: f64,
    pub weight_t: f64,
    pub weight_g: f64,
    /// Pixels with `G ≥ threshold` are shadow.
    pub threshold: f64,
    /// Shadow candidates smaller than this are ignored.
    pub min_shadow_pixels: usize,
    /// Blobs smaller than this are labelled Object without analysis.
    pub min_blob_pixels: usize,
    /// Floor on the grey-level variance of the model (grey levels²).
    pub min_intensity_variance: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            prominence: 0.3,
            smoothing: 3,
            min_row_change: 2,
            weight_s: 1.0 / 3.0,
            weight_t: 1.0 / 3.0,
            weight_g: 0.5,
            threshold: 0.2,
            min_shadow_pixels: 8,
            min_blob_pixels: 10,
            min_intensity_variance: 4.0,
        }
    }
}

impl GeometryParams {
    pub fn validate(&self) -> Result<()> {
        let p = |n: &str, r: &str| Err(Error::param(format!("geometry.{n}"), r));
        if !(self.prominence > 0.0 && self.prominence <= 1.0) {
            return p("prominence", "must be in (0, 1]");
        }
        if self.smoothing == 0 || self.smoothing % 2 == 0 {
            return p("smoothing", "must be odd and >= 1");
        }
        if [self.weight_s, self.weight_t, self.weight_g].iter().any(|w| !(*w >= 0.0)) {
            return p("weight_*", "weights must be >= 0");
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return p("threshold", "must be in (0, 1]");
        }
        if !(self.min_intensity_variance > 0.0) {
            return p("min_intensity_variance", "must be positive");
        }
        Ok(())
    }
}

/// One person-shadow split of a blob.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonShadowPair {
    /// The blob part attributed to this head (person and shadow together).
    pub part: Region,
    /// Shadow candidate `R₂`; empty when no shadow start was found.
    pub shadow: Vec<(usize, usize)>,
}

/// Columns of the smoothed top profile that are prominent local maxima.
fn head_peaks(profile: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = profile.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        // plateau [i, j)
        let mut j = i + 1;
        while j < n && profile[j] == profile[i] {
            j += 1;
        }
        let left_lower = i == 0 || profile[i - 1] < profile[i];
        let right_lower = j == n || profile[j] < profile[i];
        if left_lower && right_lower && profile[i] > 0.0 {
            // prominence against the lowest point before a higher one (or the
            // zero-height surroundings of the blob)
            let h = profile[i];
            let mut left_min = h;
            let mut k = i;
            while k > 0 {
                k -= 1;
                if profile[k] > h {
                    break;
                }
                left_min = left_min.min(profile[k]);
            }
            if k == 0 && profile[0] <= h {
                left_min = 0.0;
            }
            let mut right_min = h;
            let mut k = j;
            let mut escaped = true;
            while k < n {
                if profile[k] > h {
                    escaped = false;
                    break;
                }
                right_min = right_min.min(profile[k]);
                k += 1;
            }
            if escaped {
                right_min = 0.0;
            }
            if h - left_min.max(right_min) >= min_prominence {
                peaks.push((i + j - 1) / 2);
            }
        }
        i = j;
    }
    peaks
}

fn smooth(values: &[f64], width: usize) -> Vec<f64> {
    let r = width / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Splits a blob at the valleys between head peaks and locates the shadow
/// candidate of each part. A blob without any head peak yields one pair with
/// an empty shadow.
pub fn split_person_shadow(blob: &Region, params: &GeometryParams) -> Vec<PersonShadowPair> {
    if blob.is_empty() {
        return Vec::new();
    }
    let bb = blob.bbox;
    let w = bb.width();
    // top profile: height of the highest blob pixel above the blob bottom
    let mut top = vec![usize::MAX; w];
    for &(x, y) in &blob.pixels {
        let c = x - bb.x_min;
        top[c] = top[c].min(y);
    }
    let profile: Vec<f64> = top
        .iter()
        .map(|&t| if t == usize::MAX { 0.0 } else { (bb.y_max + 1 - t) as f64 })
        .collect();
    let profile = smooth(&profile, params.smoothing);
    let peaks = head_peaks(&profile, params.prominence * bb.height() as f64);

    if peaks.is_empty() {
        return vec![PersonShadowPair {
            part: blob.clone(),
            shadow: Vec::new(),
        }];
    }

    // cut columns at the profile minimum between consecutive peaks
    let mut cuts = vec![bb.x_min];
    for pair in peaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let valley = (a..=b)
            .min_by(|&i, &j| profile[i].total_cmp(&profile[j]).then(i.cmp(&j)))
            .expect("non-empty range");
        cuts.push(bb.x_min + valley);
    }
    cuts.push(bb.x_max + 1);

    let mut pairs = Vec::with_capacity(peaks.len());
    for (k, span) in cuts.windows(2).enumerate() {
        let (lo, hi) = (span[0], span[1]);
        let part_pixels: Vec<(usize, usize)> =
            blob.pixels.iter().copied().filter(|&(x, _)| x >= lo && x < hi).collect();
        let Some(part) = Region::from_pixels(k as u32 + 1, part_pixels) else {
            continue;
        };
        let shadow = shadow_candidate(&part, params);
        pairs.push(PersonShadowPair { part, shadow });
    }
    pairs
}

fn shadow_candidate(part: &Region, params: &GeometryParams) -> Vec<(usize, usize)> {
    let Ok(stats) = region_stats(&part.pixels) else {
        return Vec::new();
    };
    let bb = part.bbox;
    let mut rows = vec![0usize; bb.height()];
    for &(_, y) in &part.pixels {
        rows[y - bb.y_min] += 1;
    }
    let below = stats.centroid.1.floor() as usize + 1;
    let start = (below.max(bb.y_min + 1)..=bb.y_max)
        .map(|y| {
            let r = y - bb.y_min;
            (y, rows[r].abs_diff(rows[r - 1]))
        })
        .filter(|&(_, d)| d >= params.min_row_change)
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(y, _)| y);
    let Some(start) = start else {
        return Vec::new();
    };

    // body axis from the pixels above the shadow start
    let person: Vec<(usize, usize)> = part.pixels.iter().copied().filter(|&(_, y)| y < start).collect();
    let Ok(body) = region_stats(&person) else {
        return Vec::new();
    };
    let body_height = (start - person.iter().map(|p| p.1).min().unwrap_or(start)) as f64;
    let half_width = 0.5 * person.len() as f64 / body_height.max(1.0);
    let (dx, dy) = (body.orientation.cos(), body.orientation.sin());
    let (bx, by) = body.centroid;
    part.pixels
        .iter()
        .copied()
        .filter(|&(x, y)| {
            y >= start && {
                let (rx, ry) = (x as f64 - bx, y as f64 - by);
                (rx * dy - ry * dx).abs() > half_width
            }
        })
        .collect()
}

/// Gaussian in elliptical coordinates and intensity:
/// `G = exp(-(w_s s²/σ_s² + w_t t²/σ_t² + w_g (g − μ_g)²/σ_g²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowGaussianModel {
    pub origin: (f64, f64),
    pub rotation: f64,
    pub var_s: f64,
    pub var_t: f64,
    pub mean_g: f64,
    pub var_g: f64,
    pub weight_s: f64,
    pub weight_t: f64,
    pub weight_g: f64,
}

impl ShadowGaussianModel {
    /// Fits the model to `R₂`: origin and rotation from its moments, `σ_s²`
    /// and `σ_t²` its variances along and across the major axis, `μ_g` and
    /// `σ_g²` its grey-level statistics.
    pub fn fit(shadow: &[(usize, usize)], grey: &GreyImage, params: &GeometryParams) -> Result<Self> {
        let stats = region_stats(shadow)?;
        let n = shadow.len() as f64;
        let (c, s) = (stats.orientation.cos(), stats.orientation.sin());
        let var_s = (stats.mu20 * c * c + 2.0 * stats.mu11 * s * c + stats.mu02 * s * s) / n;
        let var_t = (stats.mu20 * s * s - 2.0 * stats.mu11 * s * c + stats.mu02 * c * c) / n;
        let mean_g = shadow.iter().map(|&(x, y)| f64::from(grey.get(x, y))).sum::<f64>() / n;
        let var_g = shadow
            .iter()
            .map(|&(x, y)| (f64::from(grey.get(x, y)) - mean_g).powi(2))
            .sum::<f64>()
            / n;
        Ok(Self {
            origin: stats.centroid,
            rotation: stats.orientation,
            // a one-pixel-wide strip still has the spread of a unit pixel
            var_s: var_s.max(1.0 / 12.0),
            var_t: var_t.max(1.0 / 12.0),
            mean_g,
            var_g: var_g.max(params.min_intensity_variance),
            weight_s: params.weight_s,
            weight_t: params.weight_t,
            weight_g: params.weight_g,
        })
    }

    pub fn elliptical(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.origin.0, y - self.origin.1);
        let (c, s) = (self.rotation.cos(), self.rotation.sin());
        (dx * c + dy * s, -dx * s + dy * c)
    }

    pub fn evaluate(&self, s: f64, t: f64, g: f64) -> f64 {
        (-(self.weight_s * s * s / self.var_s
            + self.weight_t * t * t / self.var_t
            + self.weight_g * (g - self.mean_g).powi(2) / self.var_g))
            .exp()
    }

    pub fn at_pixel(&self, x: usize, y: usize, grey: &GreyImage) -> f64 {
        let (s, t) = self.elliptical(x as f64, y as f64);
        self.evaluate(s, t, f64::from(grey.get(x, y)))
    }
}

/// Labels every pixel of the blob. Pixels of a part whose `R₂` is too small
/// stay Object.
pub fn classify_geometry(
    pairs: &[PersonShadowPair],
    grey: &GreyImage,
    params: &GeometryParams,
) -> Vec<((usize, usize), Label)> {
    let mut out = Vec::new();
    for pair in pairs {
        let model = (pair.shadow.len() >= params.min_shadow_pixels)
            .then(|| ShadowGaussianModel::fit(&pair.shadow, grey, params).ok())
            .flatten();
        for &(x, y) in &pair.part.pixels {
            let label = match &model {
                Some(m) if m.at_pixel(x, y, grey) >= params.threshold => Label::Shadow,
                _ => Label::Object,
            };
            out.push(((x, y), label));
        }
    }
    out
}

pub fn classify_geometry_frame(
    frame: &Frame,
    foreground: &BinaryMask,
    params: &GeometryParams,
) -> Result<TriMask> {
    params.validate()?;
    check_dims(frame.dims(), foreground.dims())?;
    let grey = to_grey(frame);
    let mut out = TriMask::from_foreground(foreground);
    for blob in connected_components(foreground) {
        if blob.len() < params.min_blob_pixels {
            continue;
        }
        let pairs = split_person_shadow(&blob, params);
        for ((x, y), label) in classify_geometry(&pairs, &grey, params) {
            out.set(x, y, label);
        }
    }
    Ok(out)
}
