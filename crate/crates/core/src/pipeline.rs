//! Sequence ingestion and the benchmark runs built on the detectors.
//!
//! A sequence is a directory:
//!
//! ```text
//! <name>/
//!   frames/000000.png ...   numbered RGB frames (required)
//!   background.png          empty-scene image; seeds and pins the GMM (optional)
//!   gt/000030.png ...       ground-truth masks named like their frame (optional)
//!   tracks.txt              ground-truth tracks (optional)
//!   config.txt              per-sequence configuration overrides (optional)
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{info, warn};
use rayon::prelude::*;

use crate::background::BackgroundModel;
use crate::config::BenchConfig;
use crate::error::{Error, Result};
use crate::eval::{aggregate, macro_average, score_masks, EvalCounts, MethodScore};
use crate::imaging::colour::desaturate;
use crate::imaging::io::{load_frame, load_trimask, save_trimask};
use crate::imaging::raster::{BinaryMask, Frame, TriMask};
use crate::methods::Method;
use crate::tracking::gt::load_tracks;
use crate::tracking::mot::default_gate;
use crate::tracking::{score_mot, track_blobs, MotScore, Track};

pub const EVAL_HEADER: [&str; 8] = ["sequence", "method", "lambda", "eta", "xi", "avg", "ms_per_frame", "frames_scored"];
pub const TRACK_HEADER: [&str; 5] = ["sequence", "shadow_method", "tracker", "mota", "motp"];
pub const TIMING_HEADER: [&str; 4] = ["sequence", "method", "ms_per_frame", "frames_timed"];
/// Sequence name used for rows averaging over sequences.
pub const SUMMARY_NAME: &str = "ALL";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.txt";

#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: String,
    pub dir: PathBuf,
    /// `(index, path)` in strictly increasing index order.
    pub frames: Vec<(usize, PathBuf)>,
    pub background: Option<PathBuf>,
    pub ground_truth: BTreeMap<usize, PathBuf>,
    pub tracks: Option<PathBuf>,
    /// Contents of `config.txt`.
    pub overrides: Option<String>,
}

fn numbered_pngs(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let seq_err = |reason: String| Error::Sequence {
        path: dir.to_path_buf(),
        reason,
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| seq_err(e.to_string()))? {
        let path = entry.map_err(|e| seq_err(e.to_string()))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let index = stem
            .parse::<usize>()
            .map_err(|_| seq_err(format!("{} is not a numbered frame", path.display())))?;
        out.push((index, path));
    }
    out.sort();
    if let Some(w) = out.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(seq_err(format!("frame index {} appears twice", w[0].0)));
    }
    Ok(out)
}

impl Sequence {
    pub fn open(dir: &Path) -> Result<Self> {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Sequence {
                path: dir.to_path_buf(),
                reason: "not a sequence directory".into(),
            })?
            .to_string();
        let frames_dir = dir.join("frames");
        if !frames_dir.is_dir() {
            return Err(Error::Sequence {
                path: dir.to_path_buf(),
                reason: "missing frames/ directory".into(),
            });
        }
        let frames = numbered_pngs(&frames_dir)?;
        if frames.is_empty() {
            return Err(Error::Sequence {
                path: dir.to_path_buf(),
                reason: "frames/ holds no numbered PNG".into(),
            });
        }
        let gt_dir = dir.join("gt");
        let mut ground_truth = BTreeMap::new();
        if gt_dir.is_dir() {
            for (index, path) in numbered_pngs(&gt_dir).map_err(|e| Error::GroundTruth(e.to_string()))? {
                if frames.binary_search_by_key(&index, |f| f.0).is_err() {
                    return Err(Error::GroundTruth(format!(
                        "{} has no matching frame",
                        path.display()
                    )));
                }
                ground_truth.insert(index, path);
            }
        }
        let optional = |p: PathBuf| p.is_file().then_some(p);
        let overrides = match optional(dir.join("config.txt")) {
            Some(p) => Some(std::fs::read_to_string(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?),
            None => None,
        };
        Ok(Self {
            name,
            dir: dir.to_path_buf(),
            frames,
            background: optional(dir.join("background.png")),
            ground_truth,
            tracks: optional(dir.join("tracks.txt")),
            overrides,
        })
    }

    /// The global configuration with this sequence's overrides applied, and
    /// whether there were any.
    pub fn effective_config(&self, global: &BenchConfig) -> Result<(BenchConfig, bool)> {
        match &self.overrides {
            Some(text) => Ok((
                global.merged(text, &self.dir.join("config.txt").display().to_string())?,
                true,
            )),
            None => Ok((global.clone(), false)),
        }
    }

    pub fn load_ground_truth(&self, index: usize) -> Result<Option<TriMask>> {
        self.ground_truth
            .get(&index)
            .map(|p| load_trimask(p).map_err(|e| Error::GroundTruth(e.to_string())))
            .transpose()
    }

    pub fn load_tracks(&self) -> Result<Vec<Track>> {
        let path = self
            .tracks
            .as_ref()
            .ok_or_else(|| Error::GroundTruth(format!("{}: no tracks.txt", self.dir.display())))?;
        load_tracks(path).map_err(|e| match e {
            Error::GroundTruth(_) => e,
            other => Error::GroundTruth(other.to_string()),
        })
    }
}

/// Per-frame result handed to the caller of [`run_sequence`].
#[derive(Debug)]
pub struct FrameOutput {
    pub index: usize,
    pub foreground: BinaryMask,
    /// Foreground split into Object and Shadow, or all Object without a method.
    pub labels: TriMask,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub frames: usize,
    /// Mean detector time over the frames after the timing warm-up.
    pub ms_per_frame: Option<f64>,
    pub frames_timed: usize,
}

/// Runs background subtraction and, when `method` is given, shadow
/// detection over every frame in order, with frames and background
/// desaturated by `lambda`.
pub fn run_sequence(
    seq: &Sequence,
    method: Option<Method>,
    config: &BenchConfig,
    lambda: f64,
    mut sink: impl FnMut(FrameOutput) -> Result<()>,
) -> Result<RunStats> {
    let mut detector = method.map(|m| m.build(config)).transpose()?;
    let mut gmm: Option<BackgroundModel> = None;
    let pinned = seq
        .background
        .as_ref()
        .map(|p| load_frame(p).and_then(|f| desaturate(&f, lambda)))
        .transpose()?;
    let mut timed = Duration::ZERO;
    let mut frames_timed = 0usize;
    for (n, (index, path)) in seq.frames.iter().enumerate() {
        let frame = desaturate(&load_frame(path)?, lambda)?;
        let model = match &mut gmm {
            Some(m) => m,
            None => gmm.insert(match &pinned {
                Some(bg) => BackgroundModel::with_background(bg, config.gmm.clone())?,
                None => BackgroundModel::new(frame.width(), frame.height(), config.gmm.clone())?,
            }),
        };
        let foreground = model.observe(&frame)?;
        let background: Frame = model.background_image()?;
        let labels = match &mut detector {
            Some(d) => {
                let start = Instant::now();
                let out = d.detect(&frame, &background, &foreground)?;
                if n >= config.timing_warmup {
                    timed += start.elapsed();
                    frames_timed += 1;
                }
                out
            }
            None => TriMask::from_foreground(&foreground),
        };
        sink(FrameOutput {
            index: *index,
            foreground,
            labels,
        })?;
    }
    Ok(RunStats {
        frames: seq.frames.len(),
        ms_per_frame: (frames_timed > 0).then(|| timed.as_secs_f64() * 1e3 / frames_timed as f64),
        frames_timed,
    })
}

fn method_label(method: Method, overridden: bool) -> String {
    if overridden {
        format!("{method}*")
    } else {
        method.to_string()
    }
}

pub fn mask_dir(out: &Path, seq: &Sequence, method: Method, lambda: f64) -> PathBuf {
    let base = out.join(&seq.name);
    if lambda == 0.0 {
        base.join(method.name())
    } else {
        base.join(format!("{}-desat{lambda}", method.name()))
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Sequence {
        path: path.to_path_buf(),
        reason: format!("cannot create output directory: {e}"),
    })
}

/// Writes every mask of one run; returns the timing.
pub fn run_detect(seq: &Sequence, method: Method, global: &BenchConfig, out: &Path) -> Result<RunStats> {
    let (config, _) = seq.effective_config(global)?;
    let dir = mask_dir(out, seq, method, 0.0);
    create_dir(&dir)?;
    run_sequence(seq, Some(method), &config, 0.0, |f| {
        save_trimask(&f.labels, &dir.join(format!("{:06}.png", f.index)))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub sequence: String,
    pub method: String,
    pub lambda: f64,
    /// Pixel-pooled rates.
    pub pooled: MethodScore,
    /// Per-frame rates averaged.
    pub per_frame: MethodScore,
    pub counts: Vec<EvalCounts>,
}

/// Runs one method on one sequence and scores the labelled frames. With
/// `out` set, every mask is written under [`mask_dir`].
pub fn evaluate(
    seq: &Sequence,
    method: Method,
    global: &BenchConfig,
    lambda: f64,
    out: Option<&Path>,
) -> Result<EvalRow> {
    let (config, overridden) = seq.effective_config(global)?;
    let dir = out.map(|o| mask_dir(o, seq, method, lambda));
    if let Some(d) = &dir {
        create_dir(d)?;
    }
    let mut counts = Vec::new();
    let stats = run_sequence(seq, Some(method), &config, lambda, |f| {
        if let Some(d) = &dir {
            save_trimask(&f.labels, &d.join(format!("{:06}.png", f.index)))?;
        }
        if let Some(gt) = seq.load_ground_truth(f.index)? {
            counts.push(score_masks(&f.labels, &gt)?);
        }
        Ok(())
    })?;
    if counts.is_empty() {
        warn!("{}: no labelled frame, scores left empty", seq.name);
    }
    let with_time = |mut s: MethodScore| {
        s.ms_per_frame = stats.ms_per_frame;
        s
    };
    Ok(EvalRow {
        sequence: seq.name.clone(),
        method: method_label(method, overridden),
        lambda,
        pooled: with_time(aggregate(&counts)),
        per_frame: with_time(macro_average(&counts)),
        counts,
    })
}

/// Evaluates every (sequence, method, λ) combination concurrently. Rows come
/// back ordered by sequence, method, then λ.
pub fn evaluate_all(
    seqs: &[Sequence],
    methods: &[Method],
    lambdas: &[f64],
    config: &BenchConfig,
    out: Option<&Path>,
) -> Result<Vec<EvalRow>> {
    if let Some(o) = out {
        create_dir(o)?;
        std::fs::write(o.join(EFFECTIVE_CONFIG_FILE), config.to_text())?;
    }
    let jobs: Vec<(&Sequence, Method, f64)> = seqs
        .iter()
        .flat_map(|s| methods.iter().flat_map(move |&m| lambdas.iter().map(move |&l| (s, m, l))))
        .collect();
    jobs.into_par_iter()
        .map(|(s, m, l)| {
            info!("evaluating {} with {m} at lambda {l}", s.name);
            evaluate(s, m, config, l, out)
        })
        .collect()
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// One row per (method, λ) averaging the sequence scores, in first-seen order.
pub fn summary_rows(rows: &[EvalRow], pick: impl Fn(&EvalRow) -> MethodScore) -> Vec<(String, f64, MethodScore)> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in rows {
        let base = r.method.trim_end_matches('*').to_string();
        if !keys.iter().any(|(m, l)| *m == base && *l == r.lambda) {
            keys.push((base, r.lambda));
        }
    }
    keys.into_iter()
        .map(|(m, l)| {
            let group: Vec<MethodScore> = rows
                .iter()
                .filter(|r| r.method.trim_end_matches('*') == m && r.lambda == l)
                .map(&pick)
                .collect();
            let score = MethodScore {
                eta: mean(group.iter().map(|s| s.eta)),
                xi: mean(group.iter().map(|s| s.xi)),
                ms_per_frame: mean(group.iter().map(|s| s.ms_per_frame)),
                frames_scored: group.iter().map(|s| s.frames_scored).sum(),
            };
            (m, l, score)
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn score_record(sequence: &str, method: &str, lambda: f64, s: &MethodScore) -> Vec<String> {
    vec![
        sequence.to_string(),
        method.to_string(),
        lambda.to_string(),
        opt(s.eta),
        opt(s.xi),
        opt(s.avg()),
        opt(s.ms_per_frame),
        s.frames_scored.to_string(),
    ]
}

/// Writes per-sequence rows followed by the summary rows.
pub fn write_eval_csv(path: &Path, rows: &[EvalRow], pick: impl Fn(&EvalRow) -> MethodScore + Copy) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EVAL_HEADER)?;
    for r in rows {
        w.write_record(score_record(&r.sequence, &r.method, r.lambda, &pick(r)))?;
    }
    for (m, l, s) in summary_rows(rows, pick) {
        w.write_record(score_record(SUMMARY_NAME, &m, l, &s))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRow {
    pub sequence: String,
    /// `none` for the baseline without shadow removal.
    pub shadow_method: String,
    pub tracker: String,
    pub score: MotScore,
}

/// Tracks the foreground with and without each shadow method. The baseline
/// row comes first and is always present.
pub fn run_trackeval(seq: &Sequence, methods: &[Method], global: &BenchConfig) -> Result<Vec<TrackRow>> {
    let (config, overridden) = seq.effective_config(global)?;
    let truth = seq.load_tracks()?;
    let options: Vec<Option<Method>> = std::iter::once(None).chain(methods.iter().copied().map(Some)).collect();
    options
        .into_par_iter()
        .map(|m| {
            let mut masks = Vec::with_capacity(seq.frames.len());
            let mut dims = (0, 0);
            run_sequence(seq, m, &config, 0.0, |f| {
                dims = f.labels.dims();
                // without a method the whole foreground is tracked
                masks.push((f.index, f.labels.object_mask()));
                Ok(())
            })?;
            let hyp = track_blobs(masks.iter().map(|(i, m)| (*i, m)), &config.tracker)?;
            let gate = if config.mot_gate > 0.0 {
                config.mot_gate
            } else {
                default_gate(dims.0, dims.1)
            };
            Ok(TrackRow {
                sequence: seq.name.clone(),
                shadow_method: m.map_or_else(|| "none".to_string(), |m| method_label(m, overridden)),
                tracker: "cc".to_string(),
                score: score_mot(&hyp, &truth, gate),
            })
        })
        .collect()
}

pub fn write_track_csv(path: &Path, rows: &[TrackRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACK_HEADER)?;
    for r in rows {
        w.write_record([
            r.sequence.clone(),
            r.shadow_method.clone(),
            r.tracker.clone(),
            opt(r.score.mota),
            opt(r.score.motp),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub sequence: String,
    pub method: String,
    pub stats: RunStats,
}

/// Times each method on each sequence, one run at a time so runs do not
/// compete for cores.
pub fn bench_time(seqs: &[Sequence], methods: &[Method], global: &BenchConfig) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for seq in seqs {
        let (config, overridden) = seq.effective_config(global)?;
        if seq.frames.len() < config.timing_warmup + 1 {
            warn!("{}: too few frames to time", seq.name);
        }
        for &m in methods {
            let stats = run_sequence(seq, Some(m), &config, 0.0, |_| Ok(()))?;
            rows.push(TimingRow {
                sequence: seq.name.clone(),
                method: method_label(m, overridden),
                stats,
            });
        }
    }
    Ok(rows)
}

pub fn write_timing_csv(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TIMING_HEADER)?;
    for r in rows {
        w.write_record([
            r.sequence.clone(),
            r.method.clone(),
            opt(r.stats.ms_per_frame),
            r.stats.frames_timed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
