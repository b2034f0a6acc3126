//! Per-pixel Gaussian mixture background model (Stauffer–Grimson).
//!
//! Each pixel keeps up to `components` isotropic RGB Gaussians. A sample
//! matches a component when its squared distance to the mean is within
//! `match_sigma²·σ²` on every channel; the matched component is pulled toward
//! the sample at rate `learning_rate / weight`. Components are ranked by
//! `weight / σ` and the top ones covering `background_ratio` of the weight
//! form the background.

use crate::error::{Error, Result};
use crate::imaging::morphology;
use crate::imaging::raster::{check_dims, BinaryMask, Frame};

#[derive(Debug, Clone, PartialEq)]
pub struct GmmConfig {
    pub components: usize,
    pub learning_rate: f64,
    pub match_sigma: f64,
    pub background_ratio: f64,
    pub min_variance: f64,
    pub initial_variance: f64,
    /// Weight given to a freshly created component.
    pub initial_weight: f64,
    /// 3x3 open then close on every foreground mask.
    pub morphology: bool,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            components: 5,
            learning_rate: 0.01,
            match_sigma: 2.5,
            background_ratio: 0.7,
            min_variance: 15.0,
            initial_variance: 36.0,
            initial_weight: 0.05,
            morphology: true,
        }
    }
}

impl GmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=16).contains(&self.components) {
            return Err(Error::param("gmm.components", "must be in 1..=16"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::param("gmm.learning_rate", "must be in (0, 1]"));
        }
        if !(self.match_sigma > 0.0) {
            return Err(Error::param("gmm.match_sigma", "must be positive"));
        }
        if !(self.background_ratio > 0.0 && self.background_ratio <= 1.0) {
            return Err(Error::param("gmm.background_ratio", "must be in (0, 1]"));
        }
        if !(self.min_variance > 0.0) {
            return Err(Error::param("gmm.min_variance", "must be positive"));
        }
        if !(self.initial_variance >= self.min_variance) {
            return Err(Error::param(
                "gmm.initial_variance",
                "must be at least gmm.min_variance",
            ));
        }
        if !(self.initial_weight > 0.0 && self.initial_weight < 1.0) {
            return Err(Error::param("gmm.initial_weight", "must be in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: [f64; 3],
    pub variance: f64,
}

impl Component {
    fn rank(&self) -> f64 {
        self.weight / self.variance.sqrt()
    }
}

/// Mixture of one pixel, kept sorted by decreasing `weight / σ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PixelMixture {
    components: Vec<Component>,
}

impl PixelMixture {
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    fn seed(&mut self, rgb: [f64; 3], cfg: &GmmConfig) {
        self.components.clear();
        self.components.push(Component {
            weight: 1.0,
            mean: rgb,
            variance: cfg.initial_variance,
        });
    }

    /// Updates the mixture with one sample; returns true when the sample is
    /// explained by a background component.
    fn update(&mut self, x: [f64; 3], cfg: &GmmConfig) -> bool {
        let gate = cfg.match_sigma * cfg.match_sigma;
        let matched = self.components.iter().position(|c| {
            (0..3).all(|ch| {
                let d = x[ch] - c.mean[ch];
                d * d <= gate * c.variance
            })
        });

        // background set is decided on the ranking before this update
        let is_background = matched.is_some_and(|k| {
            let mut cumulative = 0.0;
            for (i, c) in self.components.iter().enumerate() {
                if i == k {
                    return true;
                }
                cumulative += c.weight;
                if cumulative > cfg.background_ratio {
                    return false;
                }
            }
            false
        });

        let rho = cfg.learning_rate;
        match matched {
            Some(k) => {
                for (i, c) in self.components.iter_mut().enumerate() {
                    c.weight = (1.0 - rho) * c.weight + if i == k { rho } else { 0.0 };
                }
                let c = &mut self.components[k];
                let step = (rho / c.weight).min(1.0);
                let mut dist2 = 0.0;
                for ch in 0..3 {
                    c.mean[ch] += step * (x[ch] - c.mean[ch]);
                    let d = x[ch] - c.mean[ch];
                    dist2 += d * d;
                }
                c.variance += step * (dist2 / 3.0 - c.variance);
                c.variance = c.variance.max(cfg.min_variance);
            }
            None => {
                let fresh = Component {
                    weight: cfg.initial_weight,
                    mean: x,
                    variance: cfg.initial_variance,
                };
                if self.components.len() < cfg.components {
                    self.components.push(fresh);
                } else {
                    let weakest = self
                        .components
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.weight.total_cmp(&b.1.weight))
                        .map(|(i, _)| i)
                        .expect("mixture is never empty after seeding");
                    self.components[weakest] = fresh;
                }
            }
        }

        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        for c in &mut self.components {
            c.weight /= total;
        }
        self.components
            .sort_by(|a, b| b.rank().total_cmp(&a.rank()));
        is_background
    }

    fn dominant_mean(&self) -> Option<[f64; 3]> {
        self.components
            .iter()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .map(|c| c.mean)
    }
}

#[derive(Debug, Clone)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    config: GmmConfig,
    mixtures: Vec<PixelMixture>,
    frames_seen: usize,
    pinned: Option<Frame>,
}

impl BackgroundModel {
    pub fn new(width: usize, height: usize, config: GmmConfig) -> Result<Self> {
        config.validate()?;
        if width == 0 || height == 0 {
            return Err(Error::ImageTooSmall(format!("{width}x{height}")));
        }
        Ok(Self {
            width,
            height,
            config,
            mixtures: vec![PixelMixture::default(); width * height],
            frames_seen: 0,
            pinned: None,
        })
    }

    /// Bypass mode: the supplied clean background seeds every mixture and is
    /// returned verbatim by [`background_image`](Self::background_image).
    /// The first observed frame therefore already yields a foreground mask.
    pub fn with_background(background: &Frame, config: GmmConfig) -> Result<Self> {
        let mut model = Self::new(background.width(), background.height(), config)?;
        model.seed(background);
        model.pinned = Some(background.clone());
        Ok(model)
    }

    pub fn config(&self) -> &GmmConfig {
        &self.config
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    pub fn is_bypass(&self) -> bool {
        self.pinned.is_some()
    }

    pub fn mixture(&self, x: usize, y: usize) -> &PixelMixture {
        &self.mixtures[y * self.width + x]
    }

    fn seed(&mut self, frame: &Frame) {
        for (m, p) in self.mixtures.iter_mut().zip(frame.pixels()) {
            m.seed(p.map(f64::from), &self.config);
        }
        self.frames_seen = 1;
    }

    /// Updates the model with `frame` and returns its foreground mask.
    /// The very first frame of a cold-started model only seeds it and yields an
    /// empty mask.
    pub fn observe(&mut self, frame: &Frame) -> Result<BinaryMask> {
        check_dims((self.width, self.height), frame.dims())?;
        if self.frames_seen == 0 {
            self.seed(frame);
            return Ok(BinaryMask::new(self.width, self.height));
        }
        let cfg = &self.config;
        let fg: Vec<bool> = self
            .mixtures
            .iter_mut()
            .zip(frame.pixels())
            .map(|(m, p)| !m.update(p.map(f64::from), cfg))
            .collect();
        self.frames_seen += 1;
        let mask = BinaryMask::from_vec(self.width, self.height, fg)?;
        Ok(if self.config.morphology {
            morphology::close(&morphology::open(&mask))
        } else {
            mask
        })
    }

    /// Mean of each pixel's highest-weight component, or the pinned image in
    /// bypass mode.
    pub fn background_image(&self) -> Result<Frame> {
        if let Some(bg) = &self.pinned {
            return Ok(bg.clone());
        }
        if self.frames_seen == 0 {
            return Err(Error::Unobserved);
        }
        let mut data = Vec::with_capacity(self.width * self.height * 3);
        for m in &self.mixtures {
            let mean = m.dominant_mean().ok_or(Error::Unobserved)?;
            data.extend(mean.iter().map(|&v| crate::imaging::colour::to_u8(v)));
        }
        Frame::new(self.width, self.height, data)
    }
}
