//! Plain-text track files: one `frame_index track_id x y w h` line per
//! observation, whitespace separated. `x y` is the box centre. Blank lines
//! and lines starting with `#` are skipped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Observation, Track};
use crate::error::{Error, Result};

pub fn parse_tracks(text: &str, source_name: &str) -> Result<Vec<Track>> {
    let mut by_id: BTreeMap<u32, Vec<Observation>> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = n + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::parse(source_name, lineno, format!("expected 6 fields, found {}", fields.len())));
        }
        let frame: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(source_name, lineno, format!("bad frame index {:?}", fields[0])))?;
        let id: u32 = fields[1]
            .parse()
            .map_err(|_| Error::parse(source_name, lineno, format!("bad track id {:?}", fields[1])))?;
        let mut nums = [0.0; 4];
        for (slot, f) in nums.iter_mut().zip(&fields[2..]) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(source_name, lineno, format!("bad number {f:?}")))?;
        }
        let [x, y, w, h] = nums;
        if w < 0.0 || h < 0.0 {
            return Err(Error::parse(source_name, lineno, "negative box size"));
        }
        by_id.entry(id).or_default().push(Observation { frame, x, y, w, h });
    }
    by_id
        .into_iter()
        .map(|(id, mut observations)| {
            observations.sort_by_key(|o| o.frame);
            if let Some(pair) = observations.windows(2).find(|p| p[0].frame == p[1].frame) {
                return Err(Error::parse(
                    source_name,
                    0,
                    format!("track {id} has two observations in frame {}", pair[0].frame),
                ));
            }
            Ok(Track { id, observations })
        })
        .collect()
}

pub fn load_tracks(path: &Path) -> Result<Vec<Track>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::GroundTruth(format!("{}: {e}", path.display())))?;
    parse_tracks(&text, &path.display().to_string())
}

/// Serialises tracks ordered by frame, then id.
pub fn write_tracks(tracks: &[Track]) -> String {
    let mut rows: Vec<(usize, u32, &Observation)> = tracks
        .iter()
        .flat_map(|t| t.observations.iter().map(move |o| (o.frame, t.id, o)))
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::new();
    for (frame, id, o) in rows {
        let _ = writeln!(out, "{frame} {id} {} {} {} {}", o.x, o.y, o.w, o.h);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_groups() {
        let text = "# frame id x y w h\n0 1 10 20 4 8\n1 1 12 20 4 8\n\n0 2 50.5 60 3 3\n";
        let t = parse_tracks(text, "t").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].id, 1);
        assert_eq!(t[0].observations.len(), 2);
        assert_eq!(t[1].at(0).unwrap().x, 50.5);
    }

    #[test]
    fn rejects_malformed_lines() {
        for (text, line) in [
            ("0 1 10 20 4\n", 1),
            ("0 1 10 20 4 8\nx 1 1 1 1 1\n", 2),
            ("0 -1 10 20 4 8\n", 1),
            ("0 1 10 NaN 4 8\n", 1),
            ("0 1 10 20 -4 8\n", 1),
        ] {
            match parse_tracks(text, "t") {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
        assert!(parse_tracks("3 1 0 0 1 1\n3 1 5 5 1 1\n", "t").is_err());
    }

    proptest! {
        #[test]
        fn write_then_parse(obs in proptest::collection::btree_map((0usize..50, 0u32..5), (0u16..500, 0u16..500, 1u16..50, 1u16..50), 0..40)) {
            let mut by_id: BTreeMap<u32, Vec<Observation>> = BTreeMap::new();
            for (&(frame, id), &(x, y, w, h)) in &obs {
                by_id.entry(id).or_default().push(Observation {
                    frame, x: f64::from(x) / 2.0, y: f64::from(y), w: f64::from(w), h: f64::from(h),
                });
            }
            let tracks: Vec<Track> = by_id.into_iter().map(|(id, observations)| Track { id, observations }).collect();
            let back = parse_tracks(&write_tracks(&tracks), "rt").unwrap();
            prop_assert_eq!(back, tracks);
        }

        #[test]
        fn never_panics(text in "\\PC{0,200}") {
            let _ = parse_tracks(&text, "fuzz");
        }
    }
}
