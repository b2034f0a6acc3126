//! Large-region texture method.
//!
//! A relaxed chromacity test proposes candidate pixels. Their connected
//! components, optionally cut along edges present in the frame but not in
//! the background, are verified by how many of their strongly textured
//! pixels keep the background gradient direction.

use rayon::prelude::*;

use crate::chromacity::{shadow_votes, ChromacityParams};
use crate::error::{Error, Result};
use crate::imaging::colour::to_grey;
use crate::imaging::components::{label_components, Region};
use crate::imaging::gradient::{gradient_field, GradientField};
use crate::imaging::morphology::dilate;
use crate::imaging::raster::{check_dims, BinaryMask, Frame, Label, TriMask};

#[derive(Debug, Clone, PartialEq)]
pub struct LrParams {
    pub weak: ChromacityParams,
    /// Gradient magnitude floor, grey levels per pixel.
    pub tau_m: f64,
    /// Radians.
    pub tau_a: f64,
    /// Correlation threshold. Zero accepts every candidate region unchecked.
    pub tau_c: f64,
    pub edge_split: bool,
    /// Magnitude a pixel needs to count as an edge when splitting.
    pub edge_threshold: f64,
    pub min_region: usize,
}

impl Default for LrParams {
    fn default() -> Self {
        Self {
            weak: ChromacityParams {
                beta1: 0.3,
                beta2: 0.99,
                tau_s: 0.15,
                tau_h: 90.0,
                window: 1,
            },
            tau_m: 5.0,
            tau_a: std::f64::consts::FRAC_PI_6,
            tau_c: 0.6,
            edge_split: true,
            edge_threshold: 20.0,
            min_region: 16,
        }
    }
}

impl LrParams {
    pub fn validate(&self) -> Result<()> {
        self.weak.validate("lr")?;
        if self.weak.window != 1 {
            return Err(Error::param("lr.window", "the weak detector is per pixel, window must be 1"));
        }
        if !(self.tau_m >= 0.0 && self.tau_m.is_finite()) {
            return Err(Error::param("lr.tau_m", "must be >= 0"));
        }
        if !(self.tau_a > 0.0 && self.tau_a < std::f64::consts::PI) {
            return Err(Error::param("lr.tau_a", "must be in (0, pi)"));
        }
        if !(0.0..=1.0).contains(&self.tau_c) {
            return Err(Error::param("lr.tau_c", "must be in [0, 1]"));
        }
        if !(self.edge_threshold >= 0.0 && self.edge_threshold.is_finite()) {
            return Err(Error::param("lr.edge_threshold", "must be >= 0"));
        }
        Ok(())
    }

    fn verifies(&self) -> bool {
        self.tau_c > 0.0
    }
}

/// Angle between the frame and background gradients at `(x, y)`, or `None`
/// when either magnitude is at most `tau_m`.
pub fn direction_difference(gf: &GradientField, gb: &GradientField, x: usize, y: usize, tau_m: f64) -> Option<f64> {
    let mf = gf.magnitude(x, y);
    let mb = gb.magnitude(x, y);
    if mf <= tau_m || mb <= tau_m {
        return None;
    }
    let (fx, fy) = gf.vector(x, y);
    let (bx, by) = gb.vector(x, y);
    Some(((fx * bx + fy * by) / (mf * mb)).clamp(-1.0, 1.0).acos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    /// Fraction of selected pixels within `tau_a`; `None` when none was selected.
    pub value: Option<f64>,
    /// Pixels whose frame and background magnitudes both exceed `tau_m`.
    pub selected: usize,
}

pub fn region_correlation(
    pixels: &[(usize, usize)],
    gf: &GradientField,
    gb: &GradientField,
    tau_m: f64,
    tau_a: f64,
) -> Correlation {
    let (mut selected, mut similar) = (0usize, 0usize);
    for &(x, y) in pixels {
        if let Some(d) = direction_difference(gf, gb, x, y, tau_m) {
            selected += 1;
            if d < tau_a {
                similar += 1;
            }
        }
    }
    Correlation {
        value: (selected > 0).then(|| similar as f64 / selected as f64),
        selected,
    }
}

/// Thin edges: magnitude above `threshold` and not smaller than either
/// neighbour along the quantised gradient direction.
pub fn thin_edges(g: &GradientField, threshold: f64) -> BinaryMask {
    let (w, h) = g.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        let m = g.magnitude(x, y);
        if m <= threshold {
            return false;
        }
        let angle = g.direction(x, y).rem_euclid(std::f64::consts::PI);
        let sector = ((angle / std::f64::consts::FRAC_PI_4).round() as usize) % 4;
        let (dx, dy): (isize, isize) = [(1, 0), (1, 1), (0, 1), (-1, 1)][sector];
        let neighbour = |sx: isize, sy: isize| {
            let nx = x as isize + sx;
            let ny = y as isize + sy;
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                0.0
            } else {
                g.magnitude(nx as usize, ny as usize)
            }
        };
        m >= neighbour(dx, dy) && m >= neighbour(-dx, -dy)
    })
}

/// Frame edges with no background edge in their 3x3 neighbourhood, grown by
/// one pixel.
pub fn frame_only_edges(gf: &GradientField, gb: &GradientField, threshold: f64) -> BinaryMask {
    let ef = thin_edges(gf, threshold);
    let eb = dilate(&thin_edges(gb, threshold));
    let (w, h) = ef.dims();
    dilate(&BinaryMask::from_fn(w, h, |x, y| ef.get(x, y) && !eb.get(x, y)))
}

const REATTACH_PASSES: usize = 2;

fn regions_from_labels(labels: &[u32], count: u32, w: usize) -> Vec<Region> {
    let mut buckets: Vec<Vec<(usize, usize)>> = vec![Vec::new(); count as usize];
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            buckets[l as usize - 1].push((i % w, i / w));
        }
    }
    buckets
        .into_iter()
        .enumerate()
        .filter_map(|(k, px)| Region::from_pixels(k as u32 + 1, px))
        .collect()
}

/// Candidate pixels of the weak detector grouped into regions.
fn candidates(
    frame: &Frame,
    background: &Frame,
    foreground: &BinaryMask,
    gf: &GradientField,
    gb: &GradientField,
    p: &LrParams,
) -> Result<Vec<Region>> {
    let weak = shadow_votes(frame, background, foreground, &p.weak)?;
    let (w, _) = weak.dims();
    Ok(if p.edge_split {
        let cut = frame_only_edges(gf, gb, p.edge_threshold);
        let kept = BinaryMask::from_vec(
            w,
            weak.height(),
            weak.as_slice().iter().zip(cut.as_slice()).map(|(&c, &e)| c && !e).collect(),
        )?;
        let (mut labels, count) = label_components(&kept);
        reattach(&weak, &mut labels);
        regions_from_labels(&labels, count, w)
    } else {
        let (labels, count) = label_components(&weak);
        regions_from_labels(&labels, count, w)
    })
}

/// Gives unlabelled candidate pixels the most common label among their
/// labelled 8-neighbours (smallest label on ties).
fn reattach(candidates: &BinaryMask, labels: &mut [u32]) {
    let (w, h) = candidates.dims();
    for _ in 0..REATTACH_PASSES {
        let snapshot = labels.to_vec();
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if !candidates.get(x, y) || snapshot[i] != 0 {
                    continue;
                }
                let mut seen: Vec<(u32, usize)> = Vec::with_capacity(8);
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let l = snapshot[ny * w + nx];
                        if l == 0 {
                            continue;
                        }
                        match seen.iter_mut().find(|(k, _)| *k == l) {
                            Some((_, n)) => *n += 1,
                            None => seen.push((l, 1)),
                        }
                    }
                }
                if let Some(&(l, _)) = seen.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))) {
                    labels[i] = l;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

pub fn candidate_regions(frame: &Frame, background: &Frame, foreground: &BinaryMask, p: &LrParams) -> Result<Vec<Region>> {
    p.validate()?;
    check_dims(frame.dims(), background.dims())?;
    let gf = gradient_field(&to_grey(frame))?;
    let gb = gradient_field(&to_grey(background))?;
    let regions = candidates(frame, background, foreground, &gf, &gb, p)?;
    Ok(regions.into_iter().filter(|r| r.len() >= p.min_region).collect())
}

/// Strictly above `tau_c`; a region without selected pixels keeps the weak
/// detector's shadow verdict.
pub fn region_is_shadow(c: Correlation, tau_c: f64) -> bool {
    c.value.map_or(true, |v| v > tau_c)
}

pub fn classify_texture_lr(frame: &Frame, background: &Frame, foreground: &BinaryMask, p: &LrParams) -> Result<TriMask> {
    p.validate()?;
    check_dims(frame.dims(), background.dims())?;
    check_dims(frame.dims(), foreground.dims())?;
    let gf = gradient_field(&to_grey(frame))?;
    let gb = gradient_field(&to_grey(background))?;
    let regions = candidates(frame, background, foreground, &gf, &gb, p)?;
    let shadows: Vec<&Region> = regions
        .par_iter()
        .filter(|r| {
            !p.verifies()
                || (r.len() >= p.min_region
                    && region_is_shadow(region_correlation(&r.pixels, &gf, &gb, p.tau_m, p.tau_a), p.tau_c))
        })
        .collect();
    let mut out = TriMask::from_foreground(foreground);
    for r in shadows {
        for &(x, y) in &r.pixels {
            out.set(x, y, Label::Shadow);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::raster::GreyImage;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn field(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> GradientField {
        gradient_field(&GreyImage::from_fn(w, h, f)).unwrap()
    }

    #[test]
    fn direction_examples() {
        // gradients (10,0), (0,10) and (10,10) at the origin
        let gx = field(2, 2, |x, _| if x == 1 { 10 } else { 0 });
        let gy = field(2, 2, |_, y| if y == 1 { 10 } else { 0 });
        let gd = field(2, 2, |x, y| 10 * (x + y) as u8);
        assert_eq!(direction_difference(&gx, &gx, 0, 0, 5.0), Some(0.0));
        assert_relative_eq!(direction_difference(&gx, &gy, 0, 0, 5.0).unwrap(), FRAC_PI_2);
        assert_relative_eq!(direction_difference(&gx, &gd, 0, 0, 5.0).unwrap(), FRAC_PI_4, max_relative = 1e-12);
        assert_eq!(direction_difference(&gx, &gx, 0, 0, 10.0), None);
    }

    #[test]
    fn correlation_counts() {
        let ramp = field(12, 2, |x, _| (x * 10) as u8);
        let pixels: Vec<_> = (0..10).map(|x| (x, 0)).collect();
        let c = region_correlation(&pixels, &ramp, &ramp, 5.0, 0.5);
        assert_eq!(c, Correlation { value: Some(1.0), selected: 10 });

        let rotated = field(12, 2, |_, y| (y * 10) as u8);
        let c = region_correlation(&pixels, &ramp, &rotated, 5.0, 0.5);
        assert_eq!(c.value, Some(0.0));

        // 7 of 10 aligned
        let mixed = field(12, 2, |x, y| if x < 8 { (x * 10) as u8 } else { (y * 80) as u8 });
        let c = region_correlation(&pixels, &ramp, &mixed, 5.0, 0.5);
        assert_eq!(c.selected, 10);
        assert_relative_eq!(c.value.unwrap(), 0.7);

        let flat = field(12, 2, |_, _| 9);
        assert_eq!(region_correlation(&pixels, &flat, &ramp, 5.0, 0.5).value, None);
    }

    fn textured_bg(w: usize, h: usize) -> Frame {
        Frame::from_fn(w, h, |x, y| {
            let t = 40.0 * ((x as f64 * 0.9).sin() + (y as f64 * 0.6).cos());
            let v = |base: f64| (base + t).clamp(0.0, 255.0) as u8;
            [v(160.0), v(140.0), v(120.0)]
        })
    }

    fn darken(frame: &Frame, mask: &BinaryMask, k: f64) -> Frame {
        let (w, h) = frame.dims();
        Frame::from_fn(w, h, |x, y| {
            let p = frame.pixel(x, y);
            if mask.get(x, y) {
                p.map(|c| (f64::from(c) * k).round() as u8)
            } else {
                p
            }
        })
    }

    #[test]
    fn empty_foreground_has_no_regions() {
        let b = textured_bg(20, 20);
        assert!(candidate_regions(&b, &b, &BinaryMask::new(20, 20), &LrParams::default()).unwrap().is_empty());
    }

    #[test]
    fn shadow_on_textured_ground_is_one_shadow_region() {
        let b = textured_bg(40, 30);
        let fg = BinaryMask::from_fn(40, 30, |x, y| (8..30).contains(&x) && (6..22).contains(&y));
        let f = darken(&b, &fg, 0.6);
        let regions = candidate_regions(&f, &b, &fg, &LrParams::default()).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].len(), fg.count());
        let out = classify_texture_lr(&f, &b, &fg, &LrParams::default()).unwrap();
        assert_eq!(out.count(Label::Shadow), fg.count());
    }

    #[test]
    fn dark_object_is_split_off() {
        let bg = Frame::filled(40, 40, [150, 140, 130]);
        let fg = BinaryMask::from_fn(40, 40, |x, y| (5..35).contains(&x) && (5..35).contains(&y));
        let inner = BinaryMask::from_fn(40, 40, |x, y| (14..26).contains(&x) && (14..26).contains(&y));
        let f = Frame::from_fn(40, 40, |x, y| {
            let k = if inner.get(x, y) { 0.4 } else if fg.get(x, y) { 0.75 } else { 1.0 };
            bg.pixel(x, y).map(|c| (f64::from(c) * k).round() as u8)
        });
        let regions = candidate_regions(&f, &bg, &fg, &LrParams::default()).unwrap();
        assert!(regions.len() >= 2, "{} regions", regions.len());
        let no_split = LrParams { edge_split: false, ..LrParams::default() };
        assert_eq!(candidate_regions(&f, &bg, &fg, &no_split).unwrap().len(), 1);
    }

    #[test]
    fn textured_object_over_textured_ground_is_object() {
        let b = textured_bg(40, 30);
        let fg = BinaryMask::from_fn(40, 30, |x, y| (8..30).contains(&x) && (6..22).contains(&y));
        // same colour family, darker, with a texture rotated against the ground
        let f = Frame::from_fn(40, 30, |x, y| {
            if !fg.get(x, y) {
                return b.pixel(x, y);
            }
            let t = 30.0 * ((y as f64 * 1.1).sin() - (x as f64 * 0.5).cos());
            let v = |base: f64| (base + t).clamp(0.0, 255.0) as u8;
            [v(100.0), v(88.0), v(75.0)]
        });
        let out = classify_texture_lr(&f, &b, &fg, &LrParams::default()).unwrap();
        assert_eq!(out.count(Label::Shadow), 0);
        assert_eq!(out.count(Label::Object), fg.count());
    }

    #[test]
    fn verdict_is_strict_with_flat_fallback() {
        let c = Correlation { value: Some(0.6), selected: 10 };
        assert!(!region_is_shadow(c, 0.6));
        assert!(region_is_shadow(c, 0.59));
        assert!(region_is_shadow(Correlation { value: None, selected: 0 }, 0.6));
    }

    #[test]
    fn flat_candidate_stays_shadow() {
        let bg = Frame::filled(30, 30, [150, 140, 130]);
        let fg = BinaryMask::from_fn(30, 30, |x, y| (5..25).contains(&x) && (5..25).contains(&y));
        let f = darken(&bg, &fg, 0.7);
        let out = classify_texture_lr(&f, &bg, &fg, &LrParams::default()).unwrap();
        assert_eq!(out.count(Label::Shadow), fg.count());
    }

    #[test]
    fn invalid_params() {
        for p in [
            LrParams { tau_a: 0.0, ..LrParams::default() },
            LrParams { tau_c: 1.5, ..LrParams::default() },
            LrParams { tau_m: -1.0, ..LrParams::default() },
        ] {
            assert!(p.validate().is_err());
        }
    }

    fn arb_scene() -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<bool>)> {
        (
            proptest::collection::vec(any::<u8>(), 16 * 16 * 3),
            proptest::collection::vec(any::<u8>(), 16 * 16 * 3),
            proptest::collection::vec(any::<bool>(), 16 * 16),
        )
    }

    proptest! {
        #[test]
        fn reduces_to_weak_chromacity((f, b, m) in arb_scene()) {
            let f = Frame::new(16, 16, f).unwrap();
            let b = Frame::new(16, 16, b).unwrap();
            let m = BinaryMask::from_vec(16, 16, m).unwrap();
            let p = LrParams { edge_split: false, tau_c: 0.0, ..LrParams::default() };
            let out = classify_texture_lr(&f, &b, &m, &p).unwrap();
            let weak = shadow_votes(&f, &b, &m, &p.weak).unwrap();
            for y in 0..16 {
                for x in 0..16 {
                    let expect = if !m.get(x, y) {
                        Label::Background
                    } else if weak.get(x, y) {
                        Label::Shadow
                    } else {
                        Label::Object
                    };
                    prop_assert_eq!(out.get(x, y), expect);
                }
            }
        }

        #[test]
        fn regions_are_all_or_nothing((f, b, m) in arb_scene()) {
            let f = Frame::new(16, 16, f).unwrap();
            let b = Frame::new(16, 16, b).unwrap();
            let m = BinaryMask::from_vec(16, 16, m).unwrap();
            let p = LrParams { min_region: 1, ..LrParams::default() };
            let out = classify_texture_lr(&f, &b, &m, &p).unwrap();
            for r in candidate_regions(&f, &b, &m, &p).unwrap() {
                let first = out.get(r.pixels[0].0, r.pixels[0].1);
                prop_assert!(r.pixels.iter().all(|&(x, y)| out.get(x, y) == first));
            }
        }

        /// Rows vary only along x and columns only along y, so a monotone
        /// remap keeps every gradient direction.
        #[test]
        fn correlation_survives_gamma(
            prof in proptest::collection::vec(20u8..235, 24),
            gamma in 0.5f64..2.0,
        ) {
            let bg = GreyImage::from_fn(24, 24, |x, y| if y < 12 { prof[x] } else { prof[y] });
            let fr = GreyImage::from_fn(24, 24, |x, y| {
                let v = if y < 12 { prof[x] } else { prof[y] };
                (255.0 * (f64::from(v) / 255.0).powf(gamma)).round() as u8
            });
            let gb = gradient_field(&bg).unwrap();
            let g_id = gradient_field(&bg).unwrap();
            let g_gamma = gradient_field(&fr).unwrap();
            let pixels: Vec<_> = (0..23).flat_map(|y| (0..23).map(move |x| (x, y))).filter(|&(_, y)| y != 11).collect();
            let sel = |g: &GradientField| pixels.iter().map(|&(x, y)| g.magnitude(x, y) > 5.0).collect::<Vec<_>>();
            prop_assume!(sel(&g_id) == sel(&g_gamma));
            let a = region_correlation(&pixels, &g_id, &gb, 5.0, 0.5);
            let c = region_correlation(&pixels, &g_gamma, &gb, 5.0, 0.5);
            prop_assert_eq!(a, c);
            if let Some(v) = c.value {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
