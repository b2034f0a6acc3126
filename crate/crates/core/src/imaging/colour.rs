//! HSV conversion, circular hue arithmetic, luma and desaturation.

use crate::error::{Error, Result};
use crate::imaging::raster::{Frame, GreyImage};

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    /// Degrees in `[0, 360)`.
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Hexcone RGB to HSV. Achromatic pixels get the canonical hue 0.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> HsvPixel {
    let r = f64::from(rgb[0]);
    let g = f64::from(rgb[1]);
    let b = f64::from(rgb[2]);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max / 255.0;
    if max == 0.0 || delta == 0.0 {
        return HsvPixel { h: 0.0, s: 0.0, v };
    }
    let s = delta / max;
    let sextant = if max == r {
        (g - b) / delta
    } else if max == g {
        2.0 + (b - r) / delta
    } else {
        4.0 + (r - g) / delta
    };
    let mut h = 60.0 * sextant;
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    HsvPixel { h, s, v }
}

/// Inverse hexcone conversion, rounded half away from zero.
pub fn hsv_to_rgb(p: HsvPixel) -> [u8; 3] {
    let c = p.v * p.s;
    let hp = (p.h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = p.v - c;
    [
        to_u8((r1 + m) * 255.0),
        to_u8((g1 + m) * 255.0),
        to_u8((b1 + m) * 255.0),
    ]
}

/// Circular distance between two hues, in degrees, within `[0, 180]`.
#[inline]
pub fn hue_distance(h1: f64, h2: f64) -> f64 {
    let d = (h1 - h2).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

#[inline]
pub fn luma(rgb: [u8; 3]) -> f64 {
    LUMA_WEIGHTS[0] * f64::from(rgb[0])
        + LUMA_WEIGHTS[1] * f64::from(rgb[1])
        + LUMA_WEIGHTS[2] * f64::from(rgb[2])
}

/// Float to 8-bit with round-half-away-from-zero and saturation.
#[inline]
pub fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn to_grey(frame: &Frame) -> GreyImage {
    // luma is within [0, 255], where adding 0.5 and truncating equals to_u8
    let data = frame.pixels().map(|p| (luma(p) + 0.5) as u8).collect();
    GreyImage::new(frame.width(), frame.height(), data).expect("dimensions come from a valid frame")
}

/// Blend each pixel toward its own luma: `(1 - λ)·orig + λ·grey`.
pub fn desaturate(frame: &Frame, lambda: f64) -> Result<Frame> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param(
            "lambda",
            format!("desaturation rate {lambda} outside [0, 1]"),
        ));
    }
    if lambda == 0.0 {
        return Ok(frame.clone());
    }
    let mut out = Vec::with_capacity(frame.as_raw().len());
    for p in frame.pixels() {
        let grey = luma(p);
        for c in p {
            out.push(to_u8((1.0 - lambda) * f64::from(c) + lambda * grey));
        }
    }
    Frame::new(frame.width(), frame.height(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn hsv_examples() {
        let red = rgb_to_hsv([255, 0, 0]);
        assert_eq!((red.h, red.s, red.v), (0.0, 1.0, 1.0));
        let black = rgb_to_hsv([0, 0, 0]);
        assert_eq!((black.h, black.s, black.v), (0.0, 0.0, 0.0));
        let grey = rgb_to_hsv([128, 128, 128]);
        assert_eq!((grey.h, grey.s), (0.0, 0.0));
        assert_abs_diff_eq!(grey.v, 128.0 / 255.0);
    }

    #[test]
    fn hue_distance_examples() {
        assert_eq!(hue_distance(359.0, 2.0), 3.0);
        assert_eq!(hue_distance(10.0, 10.0), 0.0);
        assert_eq!(hue_distance(0.0, 180.0), 180.0);
    }

    #[test]
    fn desaturate_half_matches_scalar_evaluation() {
        let f = Frame::filled(1, 1, [100, 200, 0]);
        // grey = 0.299*100 + 0.587*200 = 147.3
        let grey = 0.299 * 100.0 + 0.587 * 200.0 + 0.114 * 0.0;
        let expect: Vec<u8> = [100.0, 200.0, 0.0]
            .iter()
            .map(|c: &f64| (0.5 * c + 0.5 * grey).round() as u8)
            .collect();
        assert_eq!(expect, vec![124, 174, 74]);
        assert_eq!(desaturate(&f, 0.5).unwrap().pixel(0, 0), [124, 174, 74]);
    }

    #[test]
    fn desaturate_endpoints_and_range() {
        let f = Frame::from_fn(7, 5, |x, y| [(x * 30) as u8, (y * 40) as u8, 200]);
        assert_eq!(desaturate(&f, 0.0).unwrap(), f);
        for p in desaturate(&f, 1.0).unwrap().pixels() {
            assert!(p[0] == p[1] && p[1] == p[2]);
        }
        assert!(desaturate(&f, -0.1).is_err());
        assert!(desaturate(&f, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn grey_matches_rounded_luma(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
            let grey = to_grey(&Frame::filled(1, 1, [r, g, b]));
            prop_assert_eq!(grey.get(0, 0), to_u8(luma([r, g, b])));
        }

        #[test]
        fn hsv_round_trip(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
            let back = hsv_to_rgb(rgb_to_hsv([r, g, b]));
            for (a, o) in back.iter().zip([r, g, b]) {
                prop_assert!((i16::from(*a) - i16::from(o)).abs() <= 1);
            }
        }

        #[test]
        fn hsv_ranges(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
            let p = rgb_to_hsv([r, g, b]);
            prop_assert!((0.0..360.0).contains(&p.h));
            prop_assert!((0.0..=1.0).contains(&p.s));
            prop_assert!((0.0..=1.0).contains(&p.v));
            if p.s == 0.0 {
                prop_assert_eq!(p.h, 0.0);
            }
        }

        #[test]
        fn hue_distance_is_a_circle_metric(a in 0.0f64..360.0, b in 0.0f64..360.0, c in 0.0f64..360.0) {
            let ab = hue_distance(a, b);
            prop_assert!((0.0..=180.0).contains(&ab));
            prop_assert_eq!(ab, hue_distance(b, a));
            prop_assert!(ab <= hue_distance(a, c) + hue_distance(c, b) + 1e-9);
        }

        #[test]
        fn desaturation_moves_monotonically_toward_grey(
            r in 0u8..=255, g in 0u8..=255, b in 0u8..=255,
            l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let f = Frame::filled(1, 1, [r, g, b]);
            let grey = luma([r, g, b]);
            let a = desaturate(&f, lo).unwrap().pixel(0, 0);
            let z = desaturate(&f, hi).unwrap().pixel(0, 0);
            for c in 0..3 {
                // rounding may add at most half a level on each side
                prop_assert!((f64::from(z[c]) - grey).abs() <= (f64::from(a[c]) - grey).abs() + 1.0);
            }
        }
    }
}
