//! Small-region texture method: a photometric-gain weak detector followed by
//! a comparison of Gabor projections of the frame and background
//! neighbourhoods around each candidate pixel.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::colour::to_grey;
use crate::imaging::raster::{check_dims, BinaryMask, Frame, GreyImage, Label, TriMask};

#[derive(Debug, Clone, PartialEq)]
pub struct GaborConfig {
    /// Odd side length of every kernel.
    pub size: usize,
    pub wavelengths: Vec<f64>,
    /// Number of orientations evenly spaced over `[0, π)`.
    pub orientations: usize,
    /// Phase offsets in radians.
    pub phases: Vec<f64>,
    /// Envelope σ as a multiple of the wavelength.
    pub sigma_ratio: f64,
}

impl Default for GaborConfig {
    /// The full 48-kernel bank.
    fn default() -> Self {
        Self {
            size: 9,
            wavelengths: vec![3.0, 4.0, 6.0, 8.0],
            orientations: 6,
            phases: vec![0.0, std::f64::consts::FRAC_PI_2],
            sigma_ratio: 0.56,
        }
    }
}

impl GaborConfig {
    /// The reduced 16-kernel bank.
    pub fn reduced() -> Self {
        Self {
            wavelengths: vec![4.0, 8.0],
            orientations: 4,
            ..Self::default()
        }
    }

    pub fn kernel_count(&self) -> usize {
        self.wavelengths.len() * self.orientations * self.phases.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.size % 2 == 0 {
            return Err(Error::param("sr.kernel_size", "must be odd and >= 1"));
        }
        if self.size < 3 {
            return Err(Error::param("sr.kernel_size", "must be at least 3"));
        }
        if self.kernel_count() == 0 {
            return Err(Error::param("sr.bank", "the kernel grid is empty"));
        }
        if self.wavelengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::param("sr.wavelengths", "must be positive"));
        }
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio.is_finite()) {
            return Err(Error::param("sr.sigma_ratio", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel {
    pub orientation: f64,
    pub wavelength: f64,
    pub phase: f64,
    pub sigma: f64,
    /// Row-major `size × size` weights, zero mean and unit L2 norm.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborBank {
    size: usize,
    kernels: Vec<GaborKernel>,
}

impl GaborBank {
    pub fn build(config: &GaborConfig) -> Result<Self> {
        config.validate()?;
        let n = config.size;
        let r = (n / 2) as f64;
        let mut kernels = Vec::with_capacity(config.kernel_count());
        for &wavelength in &config.wavelengths {
            let sigma = config.sigma_ratio * wavelength;
            for o in 0..config.orientations {
                let orientation = std::f64::consts::PI * o as f64 / config.orientations as f64;
                let (c, s) = (orientation.cos(), orientation.sin());
                for &phase in &config.phases {
                    let mut weights: Vec<f64> = (0..n * n)
                        .map(|i| {
                            let x = (i % n) as f64 - r;
                            let y = (i / n) as f64 - r;
                            let u = x * c + y * s;
                            let v = -x * s + y * c;
                            (-(u * u + v * v) / (2.0 * sigma * sigma)).exp()
                                * (std::f64::consts::TAU * u / wavelength + phase).cos()
                        })
                        .collect();
                    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
                    weights.iter_mut().for_each(|w| *w -= mean);
                    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                    if norm < 1e-12 {
                        return Err(Error::param(
                            "sr.bank",
                            format!("kernel λ={wavelength} θ={orientation:.3} φ={phase:.3} vanishes"),
                        ));
                    }
                    weights.iter_mut().for_each(|w| *w /= norm);
                    kernels.push(GaborKernel {
                        orientation,
                        wavelength,
                        phase,
                        sigma,
                        weights,
                    });
                }
            }
        }
        Ok(Self { size: n, kernels })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kernels(&self) -> &[GaborKernel] {
        &self.kernels
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// Keeps the kernels at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let kernels = indices
            .iter()
            .map(|&i| {
                self.kernels
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::param("sr.subset", format!("kernel {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            size: self.size,
            kernels,
        })
    }

    /// Projections of a row-major `size × size` patch onto every kernel.
    pub fn project(&self, patch: &[f64]) -> Vec<f64> {
        debug_assert_eq!(patch.len(), self.size * self.size);
        self.kernels
            .iter()
            .map(|k| dot(&k.weights, patch))
            .collect()
    }

    /// Projections of the neighbourhood centred on `(x, y)`, or `None` when it
    /// leaves the image.
    pub fn project_at(&self, img: &GreyImage, x: usize, y: usize) -> Option<Vec<f64>> {
        let mut patch = Vec::with_capacity(self.size * self.size);
        let mut out = Vec::with_capacity(self.kernels.len());
        self.project_into(img, x, y, &mut patch, &mut out).then_some(out)
    }

    /// Buffer-reusing form of [`project_at`](Self::project_at).
    fn project_into(&self, img: &GreyImage, x: usize, y: usize, patch: &mut Vec<f64>, out: &mut Vec<f64>) -> bool {
        let r = self.size / 2;
        let (w, h) = img.dims();
        if x < r || y < r || x + r >= w || y + r >= h {
            return false;
        }
        patch.clear();
        for py in y - r..=y + r {
            let start = py * w + x - r;
            patch.extend(img.as_raw()[start..start + self.size].iter().map(|&v| f64::from(v)));
        }
        out.clear();
        out.extend(self.kernels.iter().map(|k| dot(&k.weights, patch)));
        true
    }
}

/// Four independent accumulators let the compiler vectorise the sum.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrParams {
    pub bank: GaborConfig,
    /// Largest normalised feature distance still labelled Shadow.
    pub tau_d: f64,
    /// Lower (exclusive) bound on the frame/background intensity ratio.
    pub gain_lo: f64,
    pub epsilon: f64,
}

impl Default for SrParams {
    fn default() -> Self {
        Self {
            bank: GaborConfig::default(),
            tau_d: 0.35,
            gain_lo: 0.1,
            epsilon: 1e-6,
        }
    }
}

impl SrParams {
    pub fn validate(&self) -> Result<()> {
        self.bank.validate()?;
        if !(self.tau_d >= 0.0 && self.tau_d.is_finite()) {
            return Err(Error::param("sr.tau_d", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.gain_lo) {
            return Err(Error::param("sr.gain_lo", "must be in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param("sr.epsilon", "must be positive"));
        }
        Ok(())
    }
}

/// Foreground pixels darker than the background by a ratio in `(gain_lo, 1)`.
pub fn photometric_gain_candidates(
    frame: &GreyImage,
    background: &GreyImage,
    foreground: &BinaryMask,
    gain_lo: f64,
) -> Result<BinaryMask> {
    check_dims(frame.dims(), background.dims())?;
    check_dims(frame.dims(), foreground.dims())?;
    let (w, h) = frame.dims();
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        foreground.get(x, y) && gain_in_range(frame.get(x, y), background.get(x, y), gain_lo)
    }))
}

fn gain_in_range(frame: u8, background: u8, gain_lo: f64) -> bool {
    if background == 0 {
        return false;
    }
    let ratio = f64::from(frame) / f64::from(background);
    ratio > gain_lo && ratio < 1.0
}

/// `‖a − b‖ / (‖b‖ + ε)`.
pub fn feature_distance(frame_feat: &[f64], background_feat: &[f64], epsilon: f64) -> f64 {
    let diff = frame_feat
        .iter()
        .zip(background_feat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = background_feat.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / (norm + epsilon)
}

pub fn classify_texture_sr(
    frame: &GreyImage,
    background: &GreyImage,
    foreground: &BinaryMask,
    bank: &GaborBank,
    params: &SrParams,
) -> Result<TriMask> {
    params.validate()?;
    let (w, h) = frame.dims();
    if w < bank.size() || h < bank.size() {
        return Err(Error::ImageTooSmall(format!(
            "{w}x{h} frame is smaller than the {0}x{0} kernel",
            bank.size()
        )));
    }
    check_dims(frame.dims(), background.dims())?;
    check_dims(frame.dims(), foreground.dims())?;
    let mut out = TriMask::from_foreground(foreground);
    out.as_mut_slice()
        .par_chunks_mut(w)
        .zip(foreground.as_slice().par_chunks(w))
        .enumerate()
        .for_each(|(y, (row, fg_row))| {
            if !fg_row.contains(&true) {
                return;
            }
            let mut patch = Vec::with_capacity(bank.size() * bank.size());
            let (mut ff, mut fb) = (Vec::with_capacity(bank.len()), Vec::with_capacity(bank.len()));
            for (x, label) in row.iter_mut().enumerate() {
                let i = y * w + x;
                if fg_row[x]
                    && gain_in_range(frame.as_raw()[i], background.as_raw()[i], params.gain_lo)
                    && bank.project_into(frame, x, y, &mut patch, &mut ff)
                    && bank.project_into(background, x, y, &mut patch, &mut fb)
                    && feature_distance(&ff, &fb, params.epsilon) <= params.tau_d
                {
                    *label = Label::Shadow;
                }
            }
        });
    Ok(out)
}

/// Frame-level entry point working on BT.601 grey levels.
pub fn classify_texture_sr_frame(
    frame: &Frame,
    background: &Frame,
    foreground: &BinaryMask,
    bank: &GaborBank,
    params: &SrParams,
) -> Result<TriMask> {
    check_dims(frame.dims(), background.dims())?;
    classify_texture_sr(&to_grey(frame), &to_grey(background), foreground, bank, params)
}

/// Kernel indices sorted by decreasing mean squared response over the
/// interior pixels of `mask` (all interior pixels when the mask is empty).
/// Ties keep the bank order.
pub fn rank_by_energy(bank: &GaborBank, calibration: &GreyImage, mask: Option<&BinaryMask>) -> Result<Vec<usize>> {
    if let Some(m) = mask {
        check_dims(calibration.dims(), m.dims())?;
    }
    let (w, h) = calibration.dims();
    let mut energy = vec![0.0; bank.len()];
    let mut samples = 0usize;
    for y in 0..h {
        for x in 0..w {
            if mask.is_some_and(|m| m.count() > 0 && !m.get(x, y)) {
                continue;
            }
            if let Some(f) = bank.project_at(calibration, x, y) {
                energy.iter_mut().zip(&f).for_each(|(e, v)| *e += v * v);
                samples += 1;
            }
        }
    }
    if samples == 0 {
        return Err(Error::ImageTooSmall("no interior pixel to calibrate on".into()));
    }
    let mut order: Vec<usize> = (0..bank.len()).collect();
    order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]));
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bank48() -> GaborBank {
        GaborBank::build(&GaborConfig::default()).unwrap()
    }

    #[test]
    fn bank_sizes() {
        assert_eq!(bank48().len(), 48);
        assert_eq!(GaborBank::build(&GaborConfig::reduced()).unwrap().len(), 16);
        let even = GaborConfig { size: 8, ..GaborConfig::default() };
        assert!(GaborBank::build(&even).is_err());
    }

    #[test]
    fn kernels_are_unit_norm_and_dc_free() {
        for k in bank48().kernels() {
            let dot: f64 = k.weights.iter().map(|w| w * w).sum();
            assert!((dot - 1.0).abs() < 1e-6);
            assert!(k.weights.iter().sum::<f64>().abs() < 1e-9);
            assert_eq!(k.weights.len(), 81);
        }
    }

    #[test]
    fn bank_is_reproducible() {
        assert_eq!(bank48(), bank48());
    }

    #[test]
    fn gain_examples() {
        let fg = BinaryMask::from_fn(3, 1, |_, _| true);
        let b = GreyImage::from_fn(3, 1, |_, _| 100);
        let f = GreyImage::from_fn(3, 1, |x, _| [100, 50, 150][x]);
        let c = photometric_gain_candidates(&f, &b, &fg, 0.1).unwrap();
        assert_eq!(c.as_slice(), &[false, true, false]);
        let black = GreyImage::from_fn(3, 1, |_, _| 0);
        assert_eq!(photometric_gain_candidates(&f, &black, &fg, 0.1).unwrap().count(), 0);
    }

    fn textured(w: usize, h: usize, scale: f64) -> GreyImage {
        GreyImage::from_fn(w, h, |x, y| {
            let v = 120.0 + 60.0 * ((x as f64 * 1.3).sin() * (y as f64 * 0.7).cos());
            (v * scale).round() as u8
        })
    }

    #[test]
    fn identical_patch_is_shadow_at_zero_distance() {
        // identical pixels are not photometric candidates, so check the
        // distance directly
        let bank = bank48();
        let b = textured(20, 20, 1.0);
        let fb = bank.project_at(&b, 10, 10).unwrap();
        assert_eq!(feature_distance(&fb, &fb, 1e-6), 0.0);
    }

    #[test]
    fn half_scaled_patch_distance() {
        let bank = bank48();
        let patch: Vec<f64> = (0..81).map(|i| ((i * 37) % 17) as f64 * 10.0).collect();
        let half: Vec<f64> = patch.iter().map(|p| p * 0.5).collect();
        let fb = bank.project(&patch);
        let ff = bank.project(&half);
        // explicit dot products for the first kernel
        let k0 = &bank.kernels()[0].weights;
        let d0: f64 = k0.iter().zip(&patch).map(|(a, b)| a * b).sum();
        assert_relative_eq!(fb[0], d0, max_relative = 1e-12);
        assert_relative_eq!(feature_distance(&ff, &fb, 0.0), 0.5, max_relative = 1e-9);

        // end to end on images: the 0.5 ratio is a photometric candidate
        let b = GreyImage::from_fn(21, 21, |x, y| 100 + 2 * ((x * 7 + y * 3) % 50) as u8);
        let f = GreyImage::from_fn(21, 21, |x, y| b.get(x, y) / 2);
        let fg = BinaryMask::from_fn(21, 21, |_, _| true);
        let loose = SrParams { tau_d: 0.55, ..SrParams::default() };
        let tight = SrParams { tau_d: 0.45, ..SrParams::default() };
        let a = classify_texture_sr(&f, &b, &fg, &bank, &loose).unwrap();
        let t = classify_texture_sr(&f, &b, &fg, &bank, &tight).unwrap();
        assert_eq!(a.get(10, 10), Label::Shadow);
        assert_eq!(t.get(10, 10), Label::Object);
    }

    #[test]
    fn flat_frame_on_checkerboard_is_object() {
        let bank = bank48();
        let b = GreyImage::from_fn(15, 15, |x, y| if (x + y) % 2 == 0 { 200 } else { 100 });
        let f = GreyImage::from_fn(15, 15, |_, _| 90);
        let fb = bank.project_at(&b, 7, 7).unwrap();
        let ff = bank.project_at(&f, 7, 7).unwrap();
        assert!(ff.iter().all(|v| v.abs() < 1e-9));
        let d = feature_distance(&ff, &fb, 1e-6);
        assert!((d - 1.0).abs() < 1e-6, "{d}");
        let fg = BinaryMask::from_fn(15, 15, |_, _| true);
        let out = classify_texture_sr(&f, &b, &fg, &bank, &SrParams::default()).unwrap();
        assert_eq!(out.get(7, 7), Label::Object);
    }

    #[test]
    fn border_pixels_are_object() {
        let bank = bank48();
        let b = GreyImage::from_fn(12, 12, |_, _| 100);
        let f = GreyImage::from_fn(12, 12, |_, _| 50);
        let fg = BinaryMask::from_fn(12, 12, |_, _| true);
        let out = classify_texture_sr(&f, &b, &fg, &bank, &SrParams::default()).unwrap();
        assert_eq!(out.get(0, 0), Label::Object);
        assert_eq!(out.get(3, 11), Label::Object);
        // flat frame and background: 0 / ε, so interior pixels are shadow
        assert_eq!(out.get(5, 5), Label::Shadow);
        let tiny = GreyImage::from_fn(5, 5, |_, _| 0);
        assert!(matches!(
            classify_texture_sr(&tiny, &tiny, &BinaryMask::new(5, 5), &bank, &SrParams::default()),
            Err(Error::ImageTooSmall(_))
        ));
    }

    #[test]
    fn ranking_prefers_matching_wavelength() {
        let bank = bank48();
        // vertical stripes with period 8: the horizontal λ=8 kernels respond most
        let img = GreyImage::from_fn(40, 40, |x, _| (128.0 + 100.0 * (std::f64::consts::TAU * x as f64 / 8.0).cos()) as u8);
        let order = rank_by_energy(&bank, &img, None).unwrap();
        let best = &bank.kernels()[order[0]];
        assert_eq!(best.wavelength, 8.0);
        assert_eq!(best.orientation, 0.0);
        let sub = bank.subset(&order[..16]).unwrap();
        assert_eq!(sub.len(), 16);
        assert!(bank.subset(&[99]).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_linear(patch in proptest::collection::vec(0.0f64..255.0, 81), a in -4.0f64..4.0) {
            let bank = bank48();
            let f = bank.project(&patch);
            let scaled: Vec<f64> = patch.iter().map(|p| a * p).collect();
            let fs = bank.project(&scaled);
            for (x, y) in f.iter().zip(&fs) {
                prop_assert!((a * x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn projection_ignores_offsets(patch in proptest::collection::vec(0.0f64..255.0, 81), c in -100.0f64..100.0) {
            let bank = bank48();
            let f = bank.project(&patch);
            let shifted: Vec<f64> = patch.iter().map(|p| p + c).collect();
            let fs = bank.project(&shifted);
            for (x, y) in f.iter().zip(&fs) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
