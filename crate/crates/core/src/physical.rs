//! Physical shadow model: an unsupervised Gaussian mixture over the
//! attenuation and direction of the background-minus-frame colour vector.
//!
//! For a pixel with frame colour `F` and background `BG`, `v = BG − F` and the
//! feature is `[‖v‖/‖BG‖, atan2(v_G, v_R), acos(v_B/‖v‖)]`. Pixels passing a
//! weak shadow test feed the mixture once per frame; the learning rate of a
//! pixel is damped when the frame is more textured than the background there.
//! Foreground pixels are labelled Shadow when the confident components own
//! most of the posterior at their feature.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::imaging::colour::{rgb_to_hsv, to_grey};
use crate::imaging::gradient::{gradient_field, GradientField};
use crate::imaging::raster::{check_dims, BinaryMask, Frame, Label, TriMask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColourFeature {
    /// `‖v‖ / ‖BG‖`.
    pub attenuation: f64,
    /// Azimuth of `v` in the R–G plane, radians in `[-π, π]`.
    pub azimuth: f64,
    /// Polar angle of `v` from the B axis, radians in `[0, π]`.
    pub polar: f64,
}

impl ColourFeature {
    fn as_array(self) -> [f64; 3] {
        [self.attenuation, self.azimuth, self.polar]
    }
}

/// `None` when the background is black or the frame equals the background.
pub fn colour_feature(frame: [u8; 3], background: [u8; 3]) -> Option<ColourFeature> {
    let bg = background.map(f64::from);
    let v = [
        bg[0] - f64::from(frame[0]),
        bg[1] - f64::from(frame[1]),
        bg[2] - f64::from(frame[2]),
    ];
    let bg_norm = (bg[0] * bg[0] + bg[1] * bg[1] + bg[2] * bg[2]).sqrt();
    let v_norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if bg_norm == 0.0 || v_norm == 0.0 {
        return None;
    }
    Some(ColourFeature {
        attenuation: v_norm / bg_norm,
        azimuth: v[1].atan2(v[0]),
        polar: (v[2] / v_norm).clamp(-1.0, 1.0).acos(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Maximum number of mixture components.
    pub components: usize,
    pub learning_rate: f64,
    /// Gradient-excess scale of the learning-rate penalty (grey levels).
    pub gradient_sigma: f64,
    pub posterior_threshold: f64,
    /// Components with at least this weight count as confident.
    pub confident_weight: f64,
    pub warmup_frames: usize,
    /// Open interval on the frame/background value ratio.
    pub v_lo: f64,
    pub v_hi: f64,
    /// Bound on `|ΔS|`.
    pub s_max: f64,
    pub match_sigma: f64,
    pub min_variance: [f64; 3],
    pub initial_variance: [f64; 3],
    /// Flat density of the non-shadow hypothesis in the posterior.
    pub outlier_density: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            components: 5,
            learning_rate: 0.05,
            gradient_sigma: 10.0,
            posterior_threshold: 0.5,
            confident_weight: 0.1,
            warmup_frames: 25,
            v_lo: 0.1,
            v_hi: 0.95,
            s_max: 0.2,
            match_sigma: 2.5,
            min_variance: [1e-4, 1e-3, 1e-3],
            initial_variance: [0.0025, 0.01, 0.01],
            // uniform over attenuation [0, 2] x azimuth [-π, π] x polar [0, π]
            outlier_density: 1.0 / (2.0 * TAU * PI),
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let p = |n: &str, r: &str| Err(Error::param(format!("physical.{n}"), r));
        if !(1..=32).contains(&self.components) {
            return p("components", "must be in 1..=32");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return p("learning_rate", "must be in (0, 1]");
        }
        if !(self.gradient_sigma > 0.0) {
            return p("gradient_sigma", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.posterior_threshold) {
            return p("posterior_threshold", "must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.confident_weight) {
            return p("confident_weight", "must be in [0, 1]");
        }
        if !(0.0 <= self.v_lo && self.v_lo < self.v_hi && self.v_hi <= 1.0) {
            return p("v_lo/v_hi", "need 0 <= v_lo < v_hi <= 1");
        }
        if !(0.0..=1.0).contains(&self.s_max) {
            return p("s_max", "must be in [0, 1]");
        }
        if !(self.match_sigma > 0.0) {
            return p("match_sigma", "must be positive");
        }
        if self.min_variance.iter().any(|&v| !(v > 0.0))
            || self
                .initial_variance
                .iter()
                .zip(self.min_variance)
                .any(|(&i, m)| !(i >= m))
        {
            return p("initial_variance", "variances must be positive and above the floor");
        }
        if !(self.outlier_density >= 0.0) {
            return p("outlier_density", "must be non-negative");
        }
        Ok(())
    }

    /// Learning rate after the gradient penalty.
    #[inline]
    pub fn effective_rate(&self, frame_gradient: f64, background_gradient: f64) -> f64 {
        let excess = (frame_gradient - background_gradient).max(0.0);
        self.learning_rate * (-excess / self.gradient_sigma).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureComponent {
    pub weight: f64,
    pub mean: [f64; 3],
    pub variance: [f64; 3],
}

impl FeatureComponent {
    fn deviation(&self, x: &[f64; 3]) -> [f64; 3] {
        [
            x[0] - self.mean[0],
            wrap_angle(x[1] - self.mean[1]),
            x[2] - self.mean[2],
        ]
    }

    fn mahalanobis2(&self, x: &[f64; 3]) -> f64 {
        let d = self.deviation(x);
        (0..3).map(|i| d[i] * d[i] / self.variance[i]).sum()
    }

    fn density(&self, x: &[f64; 3]) -> f64 {
        let det: f64 = self.variance.iter().product();
        (-0.5 * self.mahalanobis2(x)).exp() / ((TAU).powf(1.5) * det.sqrt())
    }
}

#[inline]
fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Scene-level mixture over [`ColourFeature`]s.
///
/// A fresh model has no components; after the first learning step the weights
/// always sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowAppearanceModel {
    params: PhysicalParams,
    components: Vec<FeatureComponent>,
    frames_learned: usize,
}

/// One learning sample: a feature and its (penalised) learning rate.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub feature: ColourFeature,
    pub rate: f64,
}

impl ShadowAppearanceModel {
    pub fn new(params: PhysicalParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            components: Vec::new(),
            frames_learned: 0,
        })
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn components(&self) -> &[FeatureComponent] {
        &self.components
    }

    pub fn frames_learned(&self) -> usize {
        self.frames_learned
    }

    pub fn is_warmed_up(&self) -> bool {
        self.frames_learned >= self.params.warmup_frames
    }

    /// One batched online update from the samples of a single frame.
    ///
    /// With `n` samples of rates `r_i`, the mean rate is `ρ̄ = Σr_i/n`. Every
    /// weight decays by `1 − ρ̄` and a component gains `Σ_{i→k} r_i / n` from
    /// the samples it matches. Its mean and variance move toward the
    /// rate-weighted statistics of those samples with step
    /// `min(1, (Σ_{i→k} r_i / n) / w_k)`. Unmatched samples spawn new
    /// components (see `spawn`), replacing the weakest component when the
    /// mixture is full and the new mass exceeds it.
    pub fn learn(&mut self, samples: &[Sample]) {
        if samples.is_empty() {
            return;
        }
        self.frames_learned += 1;
        let n = samples.len() as f64;
        let gate = self.params.match_sigma * self.params.match_sigma;

        let k_len = self.components.len();
        let mut mass = vec![0.0; k_len];
        let mut first = vec![[0.0; 3]; k_len];
        let mut second = vec![[0.0; 3]; k_len];
        let mut unmatched: Vec<([f64; 3], f64)> = Vec::new();
        let mut unmatched_mass = 0.0;
        let mut total_rate = 0.0;

        for s in samples {
            let x = s.feature.as_array();
            total_rate += s.rate;
            let best = self
                .components
                .iter()
                .enumerate()
                .filter(|(_, c)| {
                    let d = c.deviation(&x);
                    (0..3).all(|i| d[i] * d[i] <= gate * c.variance[i])
                })
                .map(|(k, c)| (k, c.mahalanobis2(&x)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| k);
            match best {
                Some(k) => {
                    let d = self.components[k].deviation(&x);
                    mass[k] += s.rate;
                    for i in 0..3 {
                        first[k][i] += s.rate * d[i];
                        second[k][i] += s.rate * d[i] * d[i];
                    }
                }
                None => {
                    unmatched.push((x, s.rate));
                    unmatched_mass += s.rate;
                }
            }
        }

        let mean_rate = total_rate / n;
        for (k, c) in self.components.iter_mut().enumerate() {
            c.weight = (1.0 - mean_rate) * c.weight + mass[k] / n;
            if mass[k] <= 0.0 {
                continue;
            }
            let step = ((mass[k] / n) / c.weight).min(1.0);
            for i in 0..3 {
                let shift = step * first[k][i] / mass[k];
                // E[(x - μ_new)²] from moments about the old mean
                let m2 = second[k][i] / mass[k] - 2.0 * shift * first[k][i] / mass[k] + shift * shift;
                c.mean[i] += shift;
                c.variance[i] += step * (m2 - c.variance[i]);
                c.variance[i] = c.variance[i].max(self.params.min_variance[i]);
            }
            c.mean[1] = wrap_angle(c.mean[1]);
        }

        if unmatched_mass > 0.0 {
            self.spawn(unmatched, n);
        }

        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if total > 0.0 {
            for c in &mut self.components {
                c.weight /= total;
            }
        }
    }

    /// Greedy mode seeding over the unmatched samples of one frame: the
    /// sample with the most rate-weighted neighbours (within the gate of a
    /// fresh component) seeds a component that absorbs those neighbours; repeat
    /// on what is left.
    fn spawn(&mut self, mut pool: Vec<([f64; 3], f64)>, n: f64) {
        const PROBES: usize = 64;
        let gate = self.params.match_sigma * self.params.match_sigma;
        let var0 = self.params.initial_variance;
        let within = |a: &[f64; 3], b: &[f64; 3]| {
            let d = [a[0] - b[0], wrap_angle(a[1] - b[1]), a[2] - b[2]];
            (0..3).all(|i| d[i] * d[i] <= gate * var0[i])
        };
        for _ in 0..self.params.components {
            if pool.is_empty() {
                break;
            }
            let stride = pool.len().div_ceil(PROBES);
            let probes: Vec<&([f64; 3], f64)> = pool.iter().step_by(stride).collect();
            let seed = probes
                .iter()
                .map(|(p, _)| {
                    let support: f64 = probes.iter().filter(|(q, _)| within(p, q)).map(|(_, r)| r).sum();
                    (*p, support)
                })
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(p, _)| p)
                .expect("pool is not empty");

            let mut mass = 0.0;
            let mut first = [0.0; 3];
            pool.retain(|(x, r)| {
                if !within(x, &seed) {
                    return true;
                }
                mass += r;
                first[0] += r * (x[0] - seed[0]);
                first[1] += r * wrap_angle(x[1] - seed[1]);
                first[2] += r * (x[2] - seed[2]);
                false
            });
            if mass <= 0.0 {
                continue;
            }
            let fresh = FeatureComponent {
                weight: mass / n,
                mean: [
                    seed[0] + first[0] / mass,
                    wrap_angle(seed[1] + first[1] / mass),
                    seed[2] + first[2] / mass,
                ],
                variance: var0,
            };
            if self.components.len() < self.params.components {
                self.components.push(fresh);
                continue;
            }
            let weakest = self
                .components
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.weight.total_cmp(&b.1.weight))
                .map(|(i, c)| (i, c.weight));
            match weakest {
                Some((i, w)) if fresh.weight > w => self.components[i] = fresh,
                _ => break,
            }
        }
    }

    /// Posterior mass of the confident components at `feature`, against the
    /// whole mixture plus a flat non-shadow density.
    pub fn shadow_posterior(&self, feature: ColourFeature) -> f64 {
        let x = feature.as_array();
        let mut confident = 0.0;
        let mut total = self.params.outlier_density;
        for c in &self.components {
            let p = c.weight * c.density(&x);
            total += p;
            if c.weight >= self.params.confident_weight {
                confident += p;
            }
        }
        if total > 0.0 {
            confident / total
        } else {
            0.0
        }
    }

    /// Serialises the mixture as one line per component:
    /// `weight mean_α mean_θ mean_φ var_α var_θ var_φ`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.components {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                c.weight, c.mean[0], c.mean[1], c.mean[2], c.variance[0], c.variance[1], c.variance[2]
            );
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output into a warm-started model.
    /// Blank lines and `#` comments are skipped.
    pub fn from_text(text: &str, params: PhysicalParams) -> Result<Self> {
        let mut model = Self::new(params)?;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::parse("model", line_no + 1, format!("`{t}`: {e}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != 7 {
                return Err(Error::parse(
                    "model",
                    line_no + 1,
                    format!("expected 7 values, found {}", values.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse("model", line_no + 1, "non-finite value"));
            }
            if values[0] < 0.0 || values[4..].iter().any(|&v| v <= 0.0) {
                return Err(Error::parse(
                    "model",
                    line_no + 1,
                    "weights must be >= 0 and variances > 0",
                ));
            }
            if model.components.len() == model.params.components {
                return Err(Error::parse(
                    "model",
                    line_no + 1,
                    format!("more than {} components", model.params.components),
                ));
            }
            model.components.push(FeatureComponent {
                weight: values[0],
                mean: [values[1], values[2], values[3]],
                variance: [values[4], values[5], values[6]],
            });
        }
        let total: f64 = model.components.iter().map(|c| c.weight).sum();
        if !model.components.is_empty() {
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::parse(
                    "model",
                    0,
                    format!("weights sum to {total}, expected 1"),
                ));
            }
            model.frames_learned = model.params.warmup_frames;
        }
        Ok(model)
    }
}

/// Foreground pixels with reduced value and similar saturation.
pub fn weak_shadow_candidates(
    frame: &Frame,
    background: &Frame,
    foreground: &BinaryMask,
    params: &PhysicalParams,
) -> Result<BinaryMask> {
    check_dims(frame.dims(), background.dims())?;
    check_dims(frame.dims(), foreground.dims())?;
    let (w, h) = frame.dims();
    let data = foreground
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &fg)| {
            if !fg {
                return false;
            }
            let f = rgb_to_hsv(frame.at(i));
            let b = rgb_to_hsv(background.at(i));
            if b.v <= 0.0 {
                return false;
            }
            let ratio = f.v / b.v;
            ratio > params.v_lo && ratio < params.v_hi && (f.s - b.s).abs() <= params.s_max
        })
        .collect();
    BinaryMask::from_vec(w, h, data)
}

/// Feeds the candidates of one frame into the model.
pub fn update_model(
    model: &mut ShadowAppearanceModel,
    frame: &Frame,
    background: &Frame,
    candidates: &BinaryMask,
    frame_gradient: &GradientField,
    background_gradient: &GradientField,
) -> Result<()> {
    check_dims(frame.dims(), background.dims())?;
    check_dims(frame.dims(), candidates.dims())?;
    check_dims(frame.dims(), frame_gradient.dims())?;
    check_dims(frame.dims(), background_gradient.dims())?;
    let samples: Vec<Sample> = candidates
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c)
        .filter_map(|(i, _)| {
            let feature = colour_feature(frame.at(i), background.at(i))?;
            let rate = model
                .params
                .effective_rate(frame_gradient.magnitude_at(i), background_gradient.magnitude_at(i));
            Some(Sample { feature, rate })
        })
        .collect();
    model.learn(&samples);
    Ok(())
}

/// Shadow iff weak candidate with a defined feature whose confident
/// posterior exceeds the threshold.
pub fn classify_physical(
    frame: &Frame,
    background: &Frame,
    foreground: &BinaryMask,
    model: &ShadowAppearanceModel,
) -> Result<TriMask> {
    let candidates = weak_shadow_candidates(frame, background, foreground, &model.params)?;
    Ok(label_with_model(frame, background, foreground, &candidates, model))
}

fn label_with_model(
    frame: &Frame,
    background: &Frame,
    foreground: &BinaryMask,
    candidates: &BinaryMask,
    model: &ShadowAppearanceModel,
) -> TriMask {
    let (w, h) = frame.dims();
    let mut out = TriMask::from_foreground(foreground);
    for i in 0..w * h {
        if !candidates.as_slice()[i] {
            continue;
        }
        let shadow = colour_feature(frame.at(i), background.at(i))
            .is_some_and(|x| model.shadow_posterior(x) > model.params.posterior_threshold);
        if shadow {
            out.as_mut_slice()[i] = Label::Shadow;
        }
    }
    out
}

/// Stateful per-sequence detector: learn from the frame, then classify it.
/// Until the warm-up is complete the weak detector's verdict is returned.
#[derive(Debug, Clone)]
pub struct PhysicalDetector {
    model: ShadowAppearanceModel,
}

impl PhysicalDetector {
    pub fn new(params: PhysicalParams) -> Result<Self> {
        Ok(Self {
            model: ShadowAppearanceModel::new(params)?,
        })
    }

    pub fn with_model(model: ShadowAppearanceModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &ShadowAppearanceModel {
        &self.model
    }

    pub fn process(&mut self, frame: &Frame, background: &Frame, foreground: &BinaryMask) -> Result<TriMask> {
        let candidates = weak_shadow_candidates(frame, background, foreground, &self.model.params)?;
        let gf = gradient_field(&to_grey(frame))?;
        let gb = gradient_field(&to_grey(background))?;
        update_model(&mut self.model, frame, background, &candidates, &gf, &gb)?;
        if !self.model.is_warmed_up() {
            let mut out = TriMask::from_foreground(foreground);
            for (l, &c) in out.as_mut_slice().iter_mut().zip(candidates.as_slice()) {
                if c {
                    *l = Label::Shadow;
                }
            }
            return Ok(out);
        }
        Ok(label_with_model(frame, background, foreground, &candidates, &self.model))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn equal_channel_feature() {
        let x = colour_feature([50, 50, 50], [100, 100, 100]).unwrap();
        assert_relative_eq!(x.attenuation, 0.5, max_relative = 1e-12);
        assert_relative_eq!(x.azimuth, PI / 4.0, max_relative = 1e-12);
        assert_relative_eq!(x.polar, (1.0 / 3f64.sqrt()).acos(), max_relative = 1e-12);
    }

    #[test]
    fn polar_angle_of_three_zero_four() {
        // v = BG - F = (3, 0, 4)
        let x = colour_feature([97, 100, 96], [100, 100, 100]).unwrap();
        assert_relative_eq!(x.polar, 0.8f64.acos(), max_relative = 1e-12);
        assert_relative_eq!(x.polar, 0.643_501_108_793_284_4, max_relative = 1e-12);
        assert_relative_eq!(x.attenuation, 5.0 / (3.0 * 100f64 * 100.0).sqrt(), max_relative = 1e-12);
        assert_eq!(x.azimuth, 0.0);
    }

    #[test]
    fn azimuth_uses_the_full_quadrant() {
        // v_R < 0, v_G > 0: second quadrant
        let x = colour_feature([110, 90, 100], [100, 100, 100]).unwrap();
        assert_relative_eq!(x.azimuth, 10f64.atan2(-10.0), max_relative = 1e-12);
        assert!(x.azimuth > PI / 2.0);
    }

    #[test]
    fn undefined_features() {
        assert!(colour_feature([10, 20, 30], [10, 20, 30]).is_none());
        assert!(colour_feature([10, 20, 30], [0, 0, 0]).is_none());
    }

    #[test]
    fn gradient_penalty() {
        let p = PhysicalParams::default();
        assert_eq!(p.effective_rate(3.0, 8.0), p.learning_rate);
        assert_relative_eq!(
            p.effective_rate(8.0 + p.gradient_sigma, 8.0),
            p.learning_rate / std::f64::consts::E,
            max_relative = 1e-12
        );
    }

    fn one_pixel(rgb: [u8; 3]) -> Frame {
        Frame::filled(1, 1, rgb)
    }

    #[test]
    fn weak_detector_examples() {
        let p = PhysicalParams::default();
        let fg = BinaryMask::from_fn(1, 1, |_, _| true);
        let bg = one_pixel([200, 100, 100]);
        // brightened
        assert_eq!(weak_shadow_candidates(&one_pixel([250, 125, 125]), &bg, &fg, &p).unwrap().count(), 0);
        // half value, same saturation
        assert_eq!(weak_shadow_candidates(&one_pixel([100, 50, 50]), &bg, &fg, &p).unwrap().count(), 1);
        // not foreground
        let none = BinaryMask::new(1, 1);
        assert_eq!(weak_shadow_candidates(&one_pixel([100, 50, 50]), &bg, &none, &p).unwrap().count(), 0);
        // saturation jump beyond s_max
        assert_eq!(weak_shadow_candidates(&one_pixel([100, 10, 10]), &bg, &fg, &p).unwrap().count(), 0);
    }

    fn feature(a: f64, t: f64, f: f64) -> ColourFeature {
        ColourFeature { attenuation: a, azimuth: t, polar: f }
    }

    #[test]
    fn identical_samples_follow_the_geometric_recurrence() {
        let p = PhysicalParams::default();
        let rho = p.learning_rate;
        let mut m = ShadowAppearanceModel::new(p).unwrap();
        let start = feature(0.50, 0.70, 1.00);
        m.learn(&[Sample { feature: start, rate: rho }]);
        assert_eq!(m.components().len(), 1);
        for (a, b) in m.components()[0].mean.iter().zip([0.50, 0.70, 1.00]) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }

        // within the gate of the seeded component
        let target = [0.52, 0.75, 1.05];
        let x = feature(target[0], target[1], target[2]);
        let batch = vec![Sample { feature: x, rate: rho }; 50];
        for t in 1..=200 {
            m.learn(&batch);
            // single component keeps weight 1, so the step is ρ each frame:
            // μ_t = x + (μ_0 − x)(1 − ρ)^t
            let c = m.components()[0];
            assert_relative_eq!(c.weight, 1.0, max_relative = 1e-12);
            for i in 0..3 {
                let expect = target[i] + ([0.50, 0.70, 1.00][i] - target[i]) * (1.0 - rho).powi(t);
                assert_relative_eq!(c.mean[i], expect, max_relative = 1e-9);
            }
        }
        assert!((m.components()[0].mean[0] - target[0]).abs() < 1e-5);
    }

    #[test]
    fn posterior_examples() {
        let mut m = ShadowAppearanceModel::new(PhysicalParams::default()).unwrap();
        m.components = vec![
            FeatureComponent { weight: 0.8, mean: [0.4, 0.7, 1.0], variance: [4e-4, 4e-3, 4e-3] },
            FeatureComponent { weight: 0.2, mean: [0.8, -2.0, 2.5], variance: [4e-4, 4e-3, 4e-3] },
        ];
        assert!(m.shadow_posterior(feature(0.4, 0.7, 1.0)) > 0.5);
        // far from everything: the flat hypothesis wins
        assert!(m.shadow_posterior(feature(1.5, 3.0, 0.1)) < 0.01);

        let empty = ShadowAppearanceModel::new(PhysicalParams::default()).unwrap();
        assert_eq!(empty.shadow_posterior(feature(0.4, 0.7, 1.0)), 0.0);
        let f = Frame::filled(3, 3, [50, 50, 50]);
        let b = Frame::filled(3, 3, [100, 100, 100]);
        let fg = BinaryMask::from_fn(3, 3, |_, _| true);
        let out = classify_physical(&f, &b, &fg, &empty).unwrap();
        assert_eq!(out.count(Label::Object), 9);
    }

    #[test]
    fn model_text_round_trip_and_errors() {
        let mut m = ShadowAppearanceModel::new(PhysicalParams::default()).unwrap();
        m.learn(&[
            Sample { feature: feature(0.4, 0.7, 1.0), rate: 0.05 },
            Sample { feature: feature(0.41, 0.71, 1.01), rate: 0.05 },
        ]);
        let text = m.to_text();
        let back = ShadowAppearanceModel::from_text(&text, PhysicalParams::default()).unwrap();
        assert_eq!(back.components(), m.components());
        assert!(back.is_warmed_up());

        for bad in [
            "1 2 3",
            "1 0 0 0 1 1 x",
            "1 0 0 0 0 1 1",
            "0.5 0 0 0 1 1 1",
            "1 0 0 0 1 1 inf",
        ] {
            assert!(
                ShadowAppearanceModel::from_text(bad, PhysicalParams::default()).is_err(),
                "{bad}"
            );
        }
        let too_many = "0.2 0 0 0 1 1 1\n".repeat(6);
        assert!(ShadowAppearanceModel::from_text(&too_many, PhysicalParams::default()).is_err());
    }

    /// Flat background: shadows are a plain 0.5 scaling, objects a
    /// textured checkerboard with a different colour direction.
    #[test]
    fn separates_shadows_from_objects_after_warmup() {
        let (w, h) = (40, 20);
        let bg = Frame::filled(w, h, [160, 140, 120]);
        let mut det = PhysicalDetector::new(PhysicalParams::default()).unwrap();
        let mut last = None;
        for t in 0..40 {
            let frame = Frame::from_fn(w, h, |x, y| {
                if x < 20 {
                    // shadow, slight noise
                    let k = 0.5 + 0.01 * (((x + y + t) % 3) as f64 - 1.0);
                    [(160.0 * k) as u8, (140.0 * k) as u8, (120.0 * k) as u8]
                } else {
                    // textured dark object with a bluish cast
                    if (x + y) % 2 == 0 { [60, 70, 90] } else { [95, 105, 135] }
                }
            });
            let fg = BinaryMask::from_fn(w, h, |_, _| true);
            last = Some(det.process(&frame, &bg, &fg).unwrap());
        }
        let out = last.unwrap();
        for y in 0..h {
            for x in 0..w {
                let want = if x < 20 { Label::Shadow } else { Label::Object };
                assert_eq!(out.get(x, y), want, "({x},{y}) {:?}", det.model().components());
            }
        }
        let total: f64 = det.model().components().iter().map(|c| c.weight).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn weights_stay_normalised(
            feats in proptest::collection::vec((0.0f64..1.5, -3.1f64..3.1, 0.0f64..3.1, 0.0f64..0.05), 1..60),
            frames in 1usize..6,
        ) {
            let mut m = ShadowAppearanceModel::new(PhysicalParams::default()).unwrap();
            for f in 0..frames {
                let batch: Vec<Sample> = feats
                    .iter()
                    .skip(f)
                    .map(|&(a, t, p, r)| Sample { feature: feature(a, t, p), rate: r })
                    .collect();
                m.learn(&batch);
                let total: f64 = m.components().iter().map(|c| c.weight).sum();
                if !m.components().is_empty() && total > 0.0 {
                    prop_assert!((total - 1.0).abs() < 1e-6);
                }
                prop_assert!(m.components().len() <= 5);
                for c in m.components() {
                    for i in 0..3 {
                        prop_assert!(c.variance[i] >= m.params().min_variance[i]);
                    }
                }
            }
        }

        #[test]
        fn shadow_set_within_candidates(
            f in proptest::collection::vec(any::<u8>(), 8 * 8 * 3),
            b in proptest::collection::vec(any::<u8>(), 8 * 8 * 3),
            m in proptest::collection::vec(any::<bool>(), 64),
        ) {
            let f = Frame::new(8, 8, f).unwrap();
            let b = Frame::new(8, 8, b).unwrap();
            let m = BinaryMask::from_vec(8, 8, m).unwrap();
            let mut det = PhysicalDetector::new(PhysicalParams { warmup_frames: 0, ..Default::default() }).unwrap();
            let out = det.process(&f, &b, &m).unwrap();
            let cand = weak_shadow_candidates(&f, &b, &m, det.model().params()).unwrap();
            for i in 0..64 {
                let l = out.as_slice()[i];
                prop_assert_eq!(l.is_foreground(), m.as_slice()[i]);
                if l == Label::Shadow {
                    prop_assert!(cand.as_slice()[i]);
                }
            }
        }
    }
}
