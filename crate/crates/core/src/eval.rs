//! Shadow detection (η) and discrimination (ξ) rates.

use std::ops::{Add, AddAssign};

use crate::error::Result;
use crate::imaging::raster::{check_dims, Label, TriMask};

/// Pixel tallies over the ground-truth foreground.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EvalCounts {
    pub tp_s: u64,
    pub fn_s: u64,
    pub tp_f: u64,
    pub fn_f: u64,
}

impl EvalCounts {
    /// `None` when the frame has no ground-truth shadow pixel.
    pub fn eta(&self) -> Option<f64> {
        ratio(self.tp_s, self.tp_s + self.fn_s)
    }

    /// `None` when the frame has no ground-truth object pixel.
    pub fn xi(&self) -> Option<f64> {
        ratio(self.tp_f, self.tp_f + self.fn_f)
    }
}

impl Add for EvalCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp_s: self.tp_s + o.tp_s,
            fn_s: self.fn_s + o.fn_s,
            tp_f: self.tp_f + o.tp_f,
            fn_f: self.fn_f + o.fn_f,
        }
    }
}

impl AddAssign for EvalCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for EvalCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Tallies `pred` against `gt` on the ground-truth foreground only.
///
/// A shadow pixel predicted as background has been removed from the object
/// and counts as detected; an object pixel predicted as background has been
/// lost and counts against discrimination.
pub fn score_masks(pred: &TriMask, gt: &TriMask) -> Result<EvalCounts> {
    check_dims(gt.dims(), pred.dims())?;
    let mut c = EvalCounts::default();
    for (&g, &p) in gt.as_slice().iter().zip(pred.as_slice()) {
        match (g, p) {
            (Label::Background, _) => {}
            (Label::Shadow, Label::Object) => c.fn_s += 1,
            (Label::Shadow, _) => c.tp_s += 1,
            (Label::Object, Label::Object) => c.tp_f += 1,
            (Label::Object, _) => c.fn_f += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodScore {
    pub eta: Option<f64>,
    pub xi: Option<f64>,
    pub ms_per_frame: Option<f64>,
    pub frames_scored: usize,
}

impl MethodScore {
    /// Mean of η and ξ; undefined unless both are.
    pub fn avg(&self) -> Option<f64> {
        Some((self.eta? + self.xi?) / 2.0)
    }
}

/// Pixel-pooled rates over all frames.
pub fn aggregate(frames: &[EvalCounts]) -> MethodScore {
    let total: EvalCounts = frames.iter().copied().sum();
    MethodScore {
        eta: total.eta(),
        xi: total.xi(),
        ms_per_frame: None,
        frames_scored: frames.len(),
    }
}

/// Per-frame rates averaged over the frames where each is defined.
pub fn macro_average(frames: &[EvalCounts]) -> MethodScore {
    let mean = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    MethodScore {
        eta: mean(frames.iter().filter_map(EvalCounts::eta).collect()),
        xi: mean(frames.iter().filter_map(EvalCounts::xi).collect()),
        ms_per_frame: None,
        frames_scored: frames.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels() -> impl Strategy<Value = Vec<Label>> {
        proptest::collection::vec(
            prop_oneof![Just(Label::Background), Just(Label::Object), Just(Label::Shadow)],
            64,
        )
    }

    #[test]
    fn perfect_prediction() {
        let gt = TriMask::from_vec(3, 1, vec![Label::Shadow, Label::Object, Label::Background]).unwrap();
        let c = score_masks(&gt, &gt).unwrap();
        assert_eq!((c.fn_s, c.fn_f), (0, 0));
        assert_eq!((c.eta(), c.xi()), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn eight_of_ten_shadow_pixels() {
        let gt = TriMask::from_vec(10, 1, vec![Label::Shadow; 10]).unwrap();
        let mut pred = gt.clone();
        pred.set(0, 0, Label::Object);
        pred.set(1, 0, Label::Object);
        assert_eq!(score_masks(&pred, &gt).unwrap().eta(), Some(0.8));
    }

    #[test]
    fn pooled_single_frame() {
        let c = EvalCounts { tp_s: 8, fn_s: 2, tp_f: 9, fn_f: 1 };
        let s = aggregate(&[c]);
        assert_eq!((s.eta, s.xi), (Some(0.8), Some(0.9)));
        assert!((s.avg().unwrap() - 0.85).abs() < 1e-12);
        assert_eq!(macro_average(&[c]).eta, s.eta);
    }

    #[test]
    fn shadow_free_frames_leave_eta_undefined() {
        let c = EvalCounts { tp_s: 0, fn_s: 0, tp_f: 5, fn_f: 5 };
        let s = aggregate(&[c, c]);
        assert_eq!(s.eta, None);
        assert_eq!(s.xi, Some(0.5));
        assert_eq!(s.avg(), None);
        assert_eq!(aggregate(&[]).xi, None);
    }

    #[test]
    fn pooling_differs_from_macro_average() {
        let a = EvalCounts { tp_s: 1, fn_s: 0, tp_f: 1, fn_f: 0 };
        let b = EvalCounts { tp_s: 0, fn_s: 3, tp_f: 1, fn_f: 0 };
        assert_eq!(aggregate(&[a, b]).eta, Some(0.25));
        assert_eq!(macro_average(&[a, b]).eta, Some(0.5));
    }

    #[test]
    fn mismatched_dims() {
        assert!(score_masks(&TriMask::new(2, 2), &TriMask::new(2, 3)).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(p in labels(), g in labels()) {
            let pred = TriMask::from_vec(8, 8, p.clone()).unwrap();
            let gt = TriMask::from_vec(8, 8, g.clone()).unwrap();
            let c = score_masks(&pred, &gt).unwrap();
            let n = |gl: Label, ok: &dyn Fn(Label) -> bool| {
                g.iter().zip(&p).filter(|(a, b)| **a == gl && ok(**b)).count() as u64
            };
            prop_assert_eq!(c.tp_s, n(Label::Shadow, &|l| l != Label::Object));
            prop_assert_eq!(c.fn_s, n(Label::Shadow, &|l| l == Label::Object));
            prop_assert_eq!(c.tp_f, n(Label::Object, &|l| l == Label::Object));
            prop_assert_eq!(c.fn_f, n(Label::Object, &|l| l != Label::Object));
        }

        #[test]
        fn background_relabelling_is_ignored(p in labels(), g in labels(), r in labels()) {
            let gt = TriMask::from_vec(8, 8, g.clone()).unwrap();
            let pred = TriMask::from_vec(8, 8, p.clone()).unwrap();
            let relabelled: Vec<Label> = g.iter().zip(p.iter().zip(&r))
                .map(|(gl, (pl, rl))| if *gl == Label::Background { *rl } else { *pl })
                .collect();
            let pred2 = TriMask::from_vec(8, 8, relabelled).unwrap();
            prop_assert_eq!(score_masks(&pred, &gt).unwrap(), score_masks(&pred2, &gt).unwrap());
        }

        #[test]
        fn rates_are_in_range(frames in proptest::collection::vec((0u64..50, 0u64..50, 0u64..50, 0u64..50), 1..10)) {
            let counts: Vec<EvalCounts> = frames.iter()
                .map(|&(a, b, c, d)| EvalCounts { tp_s: a, fn_s: b, tp_f: c, fn_f: d })
                .collect();
            for s in [aggregate(&counts), macro_average(&counts)] {
                for v in [s.eta, s.xi].into_iter().flatten() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
