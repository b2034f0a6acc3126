//! Connected-component blob tracker with greedy nearest-centroid association.

use super::{Observation, Track};
use crate::error::{Error, Result};
use crate::imaging::components::connected_components;
use crate::imaging::raster::BinaryMask;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerParams {
    /// Blobs with fewer pixels are ignored.
    pub min_area: usize,
    /// Largest centroid jump, in pixels, that can continue a track.
    pub gate: f64,
    /// A track ends once it has gone this many consecutive frames unmatched.
    pub max_missed: usize,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            min_area: 30,
            gate: 25.0,
            max_missed: 5,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gate > 0.0 && self.gate.is_finite()) {
            return Err(Error::param("tracker.gate", "must be positive"));
        }
        if self.max_missed == 0 {
            return Err(Error::param("tracker.max_missed", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug)]
struct Live {
    track: Track,
    missed: usize,
}

#[derive(Debug)]
pub struct BlobTracker {
    params: TrackerParams,
    live: Vec<Live>,
    finished: Vec<Track>,
    next_id: u32,
}

/// Blobs of a mask as box-centre observations.
pub fn blob_observations(frame: usize, mask: &BinaryMask, min_area: usize) -> Vec<Observation> {
    connected_components(mask)
        .into_iter()
        .filter(|r| r.len() >= min_area)
        .map(|r| {
            let b = r.bbox;
            Observation {
                frame,
                x: (b.x_min + b.x_max) as f64 / 2.0,
                y: (b.y_min + b.y_max) as f64 / 2.0,
                w: b.width() as f64,
                h: b.height() as f64,
            }
        })
        .collect()
}

impl BlobTracker {
    pub fn new(params: TrackerParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            live: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
        })
    }

    pub fn update(&mut self, frame: usize, mask: &BinaryMask) {
        let obs = blob_observations(frame, mask, self.params.min_area);
        self.update_observations(obs);
    }

    pub fn update_observations(&mut self, obs: Vec<Observation>) {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, live) in self.live.iter().enumerate() {
            let last = live.track.observations.last().expect("live tracks are never empty");
            for (oi, o) in obs.iter().enumerate() {
                let d = last.distance(o);
                if d <= self.params.gate {
                    pairs.push((d, ti, oi));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_taken = vec![false; self.live.len()];
        let mut obs_taken = vec![false; obs.len()];
        for (_, ti, oi) in pairs {
            if track_taken[ti] || obs_taken[oi] {
                continue;
            }
            track_taken[ti] = true;
            obs_taken[oi] = true;
            self.live[ti].track.observations.push(obs[oi]);
            self.live[ti].missed = 0;
        }

        let max_missed = self.params.max_missed;
        let mut still = Vec::with_capacity(self.live.len());
        for (live, taken) in self.live.drain(..).zip(track_taken) {
            let mut live = live;
            if !taken {
                live.missed += 1;
            }
            if live.missed >= max_missed {
                self.finished.push(live.track);
            } else {
                still.push(live);
            }
        }
        self.live = still;

        for (o, taken) in obs.into_iter().zip(obs_taken) {
            if !taken {
                self.live.push(Live {
                    track: Track {
                        id: self.next_id,
                        observations: vec![o],
                    },
                    missed: 0,
                });
                self.next_id += 1;
            }
        }
    }

    /// All tracks, ordered by id.
    pub fn finish(mut self) -> Vec<Track> {
        self.finished.extend(self.live.drain(..).map(|l| l.track));
        self.finished.sort_by_key(|t| t.id);
        self.finished
    }
}

/// Tracks blobs over `(frame index, mask)` pairs given in frame order.
pub fn track_blobs<'a>(
    masks: impl IntoIterator<Item = (usize, &'a BinaryMask)>,
    params: &TrackerParams,
) -> Result<Vec<Track>> {
    let mut tracker = BlobTracker::new(params.clone())?;
    for (frame, mask) in masks {
        tracker.update(frame, mask);
    }
    Ok(tracker.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_at(cx: usize, cy: usize) -> impl Fn(usize, usize) -> bool {
        move |x, y| x.abs_diff(cx) <= 3 && y.abs_diff(cy) <= 3
    }

    #[test]
    fn single_moving_blob() {
        let masks: Vec<BinaryMask> = (0..20).map(|t| BinaryMask::from_fn(80, 30, square_at(10 + 2 * t, 15))).collect();
        let tracks = track_blobs(masks.iter().enumerate(), &TrackerParams::default()).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].observations.len(), 20);
        assert_eq!(tracks[0].at(3).unwrap().x, 16.0);
    }

    #[test]
    fn crossing_blobs_keep_identity() {
        let params = TrackerParams { gate: 10.0, ..TrackerParams::default() };
        let masks: Vec<BinaryMask> = (0..30)
            .map(|t| {
                let a = square_at(5 + 3 * t, 10);
                let b = square_at(95 - 3 * t, 40);
                BinaryMask::from_fn(100, 50, |x, y| a(x, y) || b(x, y))
            })
            .collect();
        let tracks = track_blobs(masks.iter().enumerate(), &params).unwrap();
        assert_eq!(tracks.len(), 2);
        for t in &tracks {
            assert_eq!(t.observations.len(), 30);
            let y0 = t.observations[0].y;
            assert!(t.observations.iter().all(|o| o.y == y0));
        }
    }

    #[test]
    fn long_gap_starts_a_new_track() {
        let k = TrackerParams::default().max_missed;
        let frames = |gap: usize| -> Vec<BinaryMask> {
            (0..10 + gap + 5)
                .map(|t| {
                    if (10..10 + gap).contains(&t) {
                        BinaryMask::new(40, 40)
                    } else {
                        BinaryMask::from_fn(40, 40, square_at(20, 20))
                    }
                })
                .collect()
        };
        let long = frames(k + 1);
        assert_eq!(track_blobs(long.iter().enumerate(), &TrackerParams::default()).unwrap().len(), 2);
        let short = frames(k - 1);
        assert_eq!(track_blobs(short.iter().enumerate(), &TrackerParams::default()).unwrap().len(), 1);
    }

    #[test]
    fn small_blobs_are_ignored() {
        let mask = BinaryMask::from_fn(20, 20, |x, y| x < 2 && y < 2);
        assert!(track_blobs([(0, &mask)], &TrackerParams::default()).unwrap().is_empty());
    }
}
