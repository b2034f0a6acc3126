//! Blob tracking and multiple-object tracking metrics.

pub mod gt;
pub mod hungarian;
pub mod mot;
pub mod tracker;

pub use gt::{parse_tracks, write_tracks};
pub use hungarian::hungarian;
pub use mot::{score_mot, MotCounts, MotScore};
pub use tracker::{track_blobs, BlobTracker, TrackerParams};

/// One sighting of a tracked object: its box centre and size in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Observation {
    pub fn distance(&self, other: &Observation) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    /// Strictly increasing in `frame`.
    pub observations: Vec<Observation>,
}

impl Track {
    pub fn at(&self, frame: usize) -> Option<&Observation> {
        self.observations
            .binary_search_by_key(&frame, |o| o.frame)
            .ok()
            .map(|i| &self.observations[i])
    }

    pub fn first_frame(&self) -> Option<usize> {
        self.observations.first().map(|o| o.frame)
    }

    pub fn last_frame(&self) -> Option<usize> {
        self.observations.last().map(|o| o.frame)
    }
}
