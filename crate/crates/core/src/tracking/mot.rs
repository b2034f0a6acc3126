//! CLEAR-MOT accuracy and precision.

use std::collections::{BTreeMap, HashMap};

use super::hungarian::hungarian;
use super::{Observation, Track};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MotCounts {
    pub misses: u64,
    pub false_positives: u64,
    pub mismatches: u64,
    /// Ground-truth object-frames.
    pub objects: u64,
    pub matches: u64,
    pub distance_sum: f64,
}

impl MotCounts {
    pub fn mota(&self) -> Option<f64> {
        (self.objects > 0).then(|| {
            1.0 - (self.misses + self.false_positives + self.mismatches) as f64 / self.objects as f64
        })
    }

    pub fn motp(&self) -> Option<f64> {
        (self.matches > 0).then(|| self.distance_sum / self.matches as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotScore {
    pub counts: MotCounts,
    pub mota: Option<f64>,
    pub motp: Option<f64>,
}

/// Match gate used when none is configured: a tenth of the frame diagonal.
pub fn default_gate(width: usize, height: usize) -> f64 {
    0.1 * (width as f64).hypot(height as f64)
}

fn by_frame(tracks: &[Track]) -> BTreeMap<usize, Vec<(u32, Observation)>> {
    let mut out: BTreeMap<usize, Vec<(u32, Observation)>> = BTreeMap::new();
    for t in tracks {
        for o in &t.observations {
            out.entry(o.frame).or_default().push((t.id, *o));
        }
    }
    out
}

/// Scores hypotheses against ground truth over the frames spanned by the
/// ground truth. Correspondences from the previous frame are kept while
/// within `gate`; the rest are assigned by minimum total centroid distance,
/// rejecting pairs farther than `gate`.
pub fn score_mot(hypotheses: &[Track], truth: &[Track], gate: f64) -> MotScore {
    let gt = by_frame(truth);
    let hyp = by_frame(hypotheses);
    let mut counts = MotCounts::default();
    let (Some(&first), Some(&last)) = (gt.keys().next(), gt.keys().next_back()) else {
        return MotScore { counts, mota: None, motp: None };
    };
    let empty = Vec::new();
    // gt id -> hypothesis id of its most recent match
    let mut last_match: HashMap<u32, u32> = HashMap::new();
    let mut previous: HashMap<u32, u32> = HashMap::new();

    for frame in first..=last {
        let g = gt.get(&frame).unwrap_or(&empty);
        let h = hyp.get(&frame).unwrap_or(&empty);
        counts.objects += g.len() as u64;

        let mut g_used = vec![false; g.len()];
        let mut h_used = vec![false; h.len()];
        let mut matched: Vec<(usize, usize)> = Vec::new();

        for (gi, (gid, go)) in g.iter().enumerate() {
            let Some(hid) = previous.get(gid) else { continue };
            if let Some(hi) = h.iter().position(|(id, _)| id == hid) {
                if !h_used[hi] && go.distance(&h[hi].1) <= gate {
                    g_used[gi] = true;
                    h_used[hi] = true;
                    matched.push((gi, hi));
                }
            }
        }

        let g_free: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let h_free: Vec<usize> = (0..h.len()).filter(|&i| !h_used[i]).collect();
        if !g_free.is_empty() && !h_free.is_empty() {
            // out-of-gate pairs get a cost no in-gate assignment can reach
            let big = gate * (g_free.len().max(h_free.len()) as f64 + 1.0) + 1.0;
            let cost: Vec<Vec<f64>> = g_free
                .iter()
                .map(|&gi| {
                    h_free
                        .iter()
                        .map(|&hi| {
                            let d = g[gi].1.distance(&h[hi].1);
                            if d <= gate { d } else { big }
                        })
                        .collect()
                })
                .collect();
            for (r, c) in hungarian(&cost).into_iter().enumerate() {
                let Some(c) = c else { continue };
                if cost[r][c] <= gate {
                    let (gi, hi) = (g_free[r], h_free[c]);
                    g_used[gi] = true;
                    h_used[hi] = true;
                    matched.push((gi, hi));
                    if last_match.get(&g[gi].0).is_some_and(|&prev| prev != h[hi].0) {
                        counts.mismatches += 1;
                    }
                }
            }
        }

        previous.clear();
        for &(gi, hi) in &matched {
            let (gid, go) = &g[gi];
            let (hid, ho) = &h[hi];
            counts.matches += 1;
            counts.distance_sum += go.distance(ho);
            last_match.insert(*gid, *hid);
            previous.insert(*gid, *hid);
        }
        counts.misses += g_used.iter().filter(|u| !**u).count() as u64;
        counts.false_positives += h_used.iter().filter(|u| !**u).count() as u64;
    }

    MotScore {
        counts,
        mota: counts.mota(),
        motp: counts.motp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track(id: u32, pts: &[(usize, f64, f64)]) -> Track {
        Track {
            id,
            observations: pts.iter().map(|&(frame, x, y)| Observation { frame, x, y, w: 4.0, h: 4.0 }).collect(),
        }
    }

    fn line(id: u32, frames: std::ops::Range<usize>, x0: f64, y: f64) -> Track {
        track(id, &frames.map(|f| (f, x0 + f as f64, y)).collect::<Vec<_>>())
    }

    #[test]
    fn identical_tracks() {
        let gt = vec![line(1, 0..10, 0.0, 5.0), line(2, 0..10, 50.0, 30.0)];
        let s = score_mot(&gt, &gt, 10.0);
        assert_eq!(s.mota, Some(1.0));
        assert_eq!(s.motp, Some(0.0));
    }

    #[test]
    fn misses_and_false_positives() {
        // 10 object-frames, the hypothesis skips 2 and adds 1 spurious
        let gt = vec![line(1, 0..10, 0.0, 5.0)];
        let mut h = line(7, 0..10, 0.0, 5.0);
        h.observations.retain(|o| o.frame != 3 && o.frame != 4);
        let spurious = track(8, &[(6, 80.0, 80.0)]);
        let s = score_mot(&[h, spurious], &gt, 10.0);
        assert_eq!(s.counts.objects, 10);
        assert_eq!((s.counts.misses, s.counts.false_positives, s.counts.mismatches), (2, 1, 0));
        assert!((s.mota.unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn motp_is_mean_distance() {
        let gt = vec![track(1, &[(0, 0.0, 0.0), (1, 0.0, 0.0), (2, 0.0, 0.0), (3, 0.0, 0.0), (4, 0.0, 0.0)])];
        let h = vec![track(1, &[(0, 1.0, 0.0), (1, 0.0, 2.0), (2, 3.0, 0.0), (3, 0.0, 4.0), (4, 3.0, 4.0)])];
        assert_eq!(score_mot(&h, &gt, 10.0).motp, Some(3.0));
    }

    #[test]
    fn identity_switch_is_a_mismatch() {
        let gt = vec![line(1, 0..6, 0.0, 5.0)];
        let mut a = line(10, 0..3, 0.0, 5.0);
        let b = line(11, 3..6, 0.0, 5.0);
        a.observations.truncate(3);
        let s = score_mot(&[a, b], &gt, 10.0);
        assert_eq!(s.counts.mismatches, 1);
        assert!((s.mota.unwrap() - (1.0 - 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn correspondence_persists_over_a_closer_rival() {
        // hypothesis 20 drifts 4 px off, 21 appears exactly on the object:
        // the existing correspondence is kept, no mismatch
        let gt = vec![line(1, 0..4, 0.0, 5.0)];
        let h20 = track(20, &[(0, 0.0, 5.0), (1, 1.0, 5.0), (2, 2.0, 9.0), (3, 3.0, 9.0)]);
        let h21 = track(21, &[(2, 2.0, 5.0), (3, 3.0, 5.0)]);
        let s = score_mot(&[h20, h21], &gt, 10.0);
        assert_eq!(s.counts.mismatches, 0);
        assert_eq!(s.counts.false_positives, 2);
    }

    #[test]
    fn undefined_scores() {
        let s = score_mot(&[], &[], 10.0);
        assert_eq!((s.mota, s.motp), (None, None));
        let gt = vec![line(1, 0..3, 0.0, 0.0)];
        let s = score_mot(&[], &gt, 10.0);
        assert_eq!(s.mota, Some(0.0));
        assert_eq!(s.motp, None);
    }

    #[test]
    fn gate_is_a_tenth_of_the_diagonal() {
        assert!((default_gate(300, 400) - 50.0).abs() < 1e-12);
    }

    fn arb_tracks() -> impl Strategy<Value = Vec<Track>> {
        proptest::collection::vec(
            (0usize..6, 1usize..8, 0.0f64..60.0, 0.0f64..60.0, -3.0f64..3.0),
            0..5,
        )
        .prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (start, len, x, y, vx))| {
                    track(i as u32 + 1, &(start..start + len).map(|f| (f, x + vx * f as f64, y)).collect::<Vec<_>>())
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn invariant_under_id_relabelling(h in arb_tracks(), g in arb_tracks(), shift in 1u32..100) {
            let relabel = |ts: &[Track]| -> Vec<Track> {
                ts.iter().map(|t| Track { id: t.id * 7 + shift, observations: t.observations.clone() }).collect()
            };
            let a = score_mot(&h, &g, 12.0);
            let b = score_mot(&relabel(&h), &relabel(&g), 12.0);
            prop_assert_eq!(a.counts.misses, b.counts.misses);
            prop_assert_eq!(a.counts.false_positives, b.counts.false_positives);
            prop_assert_eq!(a.counts.mismatches, b.counts.mismatches);
            prop_assert!((a.counts.distance_sum - b.counts.distance_sum).abs() < 1e-9);
        }

        #[test]
        fn mota_at_most_one(h in arb_tracks(), g in arb_tracks()) {
            let s = score_mot(&h, &g, 12.0);
            if let Some(m) = s.mota {
                prop_assert!(m <= 1.0);
            }
            prop_assert!(s.counts.matches <= s.counts.objects);
        }

        #[test]
        fn fewer_errors_never_lower_mota(m in 0u64..20, fp in 0u64..20, mme in 0u64..20, g in 1u64..50, dm in 0u64..5) {
            let c = MotCounts { misses: m + dm, false_positives: fp, mismatches: mme, objects: g, ..Default::default() };
            let better = MotCounts { misses: m, ..c };
            prop_assert!(better.mota().unwrap() >= c.mota().unwrap());
        }
    }
}
