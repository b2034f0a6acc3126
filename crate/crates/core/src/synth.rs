//! Deterministic synthetic sequences with exact ground truth.
//!
//! Every scene is a static textured ground plane crossed by people or
//! vehicles that cast linearly attenuated shadows (a sheared projection of
//! their silhouette), optionally with dark ground-coloured distractor objects
//! that cast none.
//! Frames carry Gaussian camera noise; the background image is noise free.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imaging::colour::to_u8;
use crate::imaging::io::{save_frame, save_trimask};
use crate::imaging::raster::{Frame, Label, TriMask};
use crate::tracking::{write_tracks, Observation, Track};

pub const WIDTH: usize = 320;
pub const HEIGHT: usize = 240;
pub const FRAMES: usize = 80;
/// Ground truth is labelled every `GT_STEP` frames starting at `GT_START`.
pub const GT_START: usize = 30;
pub const GT_STEP: usize = 4;
const NOISE_SIGMA: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SceneKind {
    /// Mildly textured ground, deep shadows, people whose clothes differ from
    /// the ground mostly in hue and saturation.
    Hue,
    /// Strongly textured ground with dark ground-coloured textured objects.
    Textured,
    /// Strongly textured road with vehicles casting broad, faint shadows.
    Weak,
    /// Two people walking past each other with long shadows that reach the
    /// other person.
    Crossing,
}

impl SceneKind {
    pub const ALL: [SceneKind; 4] = [SceneKind::Hue, SceneKind::Textured, SceneKind::Weak, SceneKind::Crossing];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Hue => "synth-hue",
            SceneKind::Textured => "synth-textured",
            SceneKind::Weak => "synth-weak",
            SceneKind::Crossing => "synth-crossing",
        }
    }

    fn seed(self) -> u64 {
        match self {
            SceneKind::Hue => 0x5eed_0001,
            SceneKind::Textured => 0x5eed_0002,
            SceneKind::Weak => 0x5eed_0003,
            SceneKind::Crossing => 0x5eed_0004,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub name: String,
    pub background: Frame,
    pub frames: Vec<Frame>,
    /// Labelled frames by index.
    pub ground_truth: BTreeMap<usize, TriMask>,
    /// Box centres of the visible part of every object (shadows excluded).
    pub tracks: Vec<Track>,
}

impl SyntheticSequence {
    /// Writes the standard sequence layout: `frames/`, `background.png`,
    /// `gt/` and `tracks.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Sequence {
            path: dir.to_path_buf(),
            reason: e.to_string(),
        };
        std::fs::create_dir_all(dir.join("frames")).map_err(io)?;
        std::fs::create_dir_all(dir.join("gt")).map_err(io)?;
        save_frame(&self.background, &dir.join("background.png"))?;
        for (i, f) in self.frames.iter().enumerate() {
            save_frame(f, &dir.join("frames").join(frame_file_name(i)))?;
        }
        for (i, m) in &self.ground_truth {
            save_trimask(m, &dir.join("gt").join(frame_file_name(*i)))?;
        }
        std::fs::write(dir.join("tracks.txt"), write_tracks(&self.tracks)).map_err(io)?;
        Ok(())
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("{index:06}.png")
}

/// Smooth noise in `[-1, 1]`: bilinear interpolation of random values on a
/// square lattice.
struct ValueNoise {
    cell: f64,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, cell: f64) -> Self {
        let cols = (WIDTH as f64 / cell) as usize + 2;
        let rows = (HEIGHT as f64 / cell) as usize + 2;
        let lattice = (0..cols * rows).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self { cell, cols, lattice }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        let fx = x as f64 / self.cell;
        let fy = y as f64 / self.cell;
        let (ix, iy) = (fx as usize, fy as usize);
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let v = |cx: usize, cy: usize| self.lattice[cy * self.cols + cx];
        let top = v(ix, iy) * (1.0 - tx) + v(ix + 1, iy) * tx;
        let bottom = v(ix, iy + 1) * (1.0 - tx) + v(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    /// Upright person: round head over a body with a stride gap between the legs.
    Person { height: f64, width: f64 },
    Block { width: f64, height: f64 },
}

#[derive(Debug, Clone)]
struct Mover {
    id: u32,
    shape: Shape,
    x0: f64,
    vx: f64,
    /// Image row of the ground contact line.
    base: f64,
    /// Two colours alternating in a stripe pattern that moves with the object.
    paint: [[f64; 3]; 2],
    /// Attenuation and displacement per pixel of height of the cast shadow.
    shadow: Option<(f64, (f64, f64))>,
}

impl Mover {
    fn centre_x(&self, t: usize) -> f64 {
        self.x0 + self.vx * t as f64
    }

    fn size(&self) -> (f64, f64) {
        match self.shape {
            Shape::Person { height, width } | Shape::Block { width, height } => (width, height),
        }
    }

    /// Whether the pixel centre `(px, py)` lies on the object.
    fn covers(&self, t: usize, px: f64, py: f64) -> bool {
        let cx = self.centre_x(t);
        let (width, height) = self.size();
        let top = self.base - height;
        let in_box = py >= top && py <= self.base && (px - cx).abs() <= width / 2.0;
        match self.shape {
            Shape::Block { .. } => in_box,
            Shape::Person { .. } => {
                let head_r = width * 0.3;
                if (px - cx).hypot(py - (top + head_r)) <= head_r {
                    return true;
                }
                if !in_box || py < top + 2.0 * head_r {
                    return false;
                }
                // legs: a gap in the lower third that opens and closes with the stride
                let leg_zone = self.base - height / 3.0;
                let gap = 1.0 + (t as f64 * 0.4).sin().abs() * 4.0;
                !(py > leg_zone && (px - cx).abs() < gap / 2.0)
            }
        }
    }

    fn bbox(&self, t: usize) -> (f64, f64, f64, f64) {
        let cx = self.centre_x(t);
        let (width, height) = self.size();
        (cx - width / 2.0 - 1.0, self.base - height - 1.0, cx + width / 2.0 + 1.0, self.base + 1.0)
    }

    fn colour_at(&self, t: usize, x: usize, y: usize) -> [f64; 3] {
        let cx = self.centre_x(t).round() as i64;
        let stripe = ((y as i64 / 2) + (x as i64 - cx).div_euclid(3)).rem_euclid(2);
        self.paint[stripe as usize]
    }
}

struct Scene {
    ground: [f64; 3],
    texture: ValueNoise,
    texture_amp: f64,
    movers: Vec<Mover>,
}

impl Scene {
    fn background_at(&self, x: usize, y: usize) -> [f64; 3] {
        let f = 1.0 + self.texture_amp * self.texture.at(x, y);
        self.ground.map(|c| c * f)
    }

    fn background(&self) -> Vec<[f64; 3]> {
        (0..WIDTH * HEIGHT).map(|i| self.background_at(i % WIDTH, i / WIDTH)).collect()
    }

    /// Later movers are drawn in front of earlier ones.
    fn object_at(&self, t: usize, x: usize, y: usize) -> Option<(u32, [f64; 3])> {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        self.movers
            .iter()
            .rev()
            .find(|m| m.covers(t, px, py))
            .map(|m| (m.id, m.colour_at(t, x, y)))
    }

    /// Shadow attenuation per pixel (1 = lit). Overlapping shadows keep the
    /// darkest factor.
    fn shadow_map(&self, t: usize) -> Vec<f64> {
        let mut map = vec![1.0f64; WIDTH * HEIGHT];
        for m in &self.movers {
            let Some((k, (a, b))) = m.shadow else { continue };
            let (x0, y0, x1, y1) = m.bbox(t);
            let mut sy = y0;
            while sy <= y1 {
                let mut sx = x0;
                while sx <= x1 {
                    if m.covers(t, sx, sy) {
                        let h = m.base - sy;
                        let (qx, qy) = (sx + a * h, m.base + b * h);
                        if qx >= 0.0 && qy >= 0.0 && (qx as usize) < WIDTH && (qy as usize) < HEIGHT {
                            let i = qy as usize * WIDTH + qx as usize;
                            map[i] = map[i].min(k);
                        }
                    }
                    sx += 0.25;
                }
                sy += 0.25;
            }
        }
        map
    }
}

fn build_scene(kind: SceneKind, rng: &mut ChaCha8Rng) -> Scene {
    let ground = [150.0, 130.0, 110.0];
    let blue = [[60.0, 80.0, 140.0], [52.0, 70.0, 122.0]];
    let green = [[70.0, 130.0, 60.0], [60.0, 112.0, 52.0]];
    let person = |id: u32, x0, vx, base, shadow| Mover {
        id,
        shape: Shape::Person { height: 64.0, width: 22.0 },
        x0,
        vx,
        base,
        paint: if id % 2 == 1 { blue } else { green },
        shadow: Some(shadow),
    };
    let dark = |k: f64| [ground.map(|c| c * k * 1.2), ground.map(|c| c * k * 0.8)];
    match kind {
        SceneKind::Hue => Scene {
            ground,
            texture: ValueNoise::new(rng, 3.0),
            texture_amp: 0.1,
            movers: vec![
                person(1, 20.0, 2.0, 100.0, (0.55, (0.6, 0.5))),
                person(2, 300.0, -1.8, 200.0, (0.55, (0.6, 0.5))),
            ],
        },
        SceneKind::Textured => {
            let blocks = [(3, -20.0, 2.2, 128.0, 34.0, 22.0), (4, 330.0, -1.6, 126.0, 28.0, 18.0)];
            let mut movers = vec![
                person(1, 20.0, 2.0, 86.0, (0.7, (0.6, 0.4))),
                person(2, 300.0, -1.8, 210.0, (0.7, (0.6, 0.4))),
            ];
            for (id, x0, vx, base, width, height) in blocks {
                movers.push(Mover {
                    id,
                    shape: Shape::Block { width, height },
                    x0,
                    vx,
                    base,
                    paint: dark(rng.gen_range(0.55..0.8)),
                    shadow: None,
                });
            }
            Scene {
                ground,
                texture: ValueNoise::new(rng, 2.0),
                texture_amp: 0.15,
                movers,
            }
        }
        SceneKind::Weak => {
            let red = [[150.0, 45.0, 40.0], [120.0, 36.0, 32.0]];
            let vehicle = |id, x0, vx, base, paint| Mover {
                id,
                shape: Shape::Block { width: 90.0, height: 40.0 },
                x0,
                vx,
                base,
                paint,
                shadow: Some((0.78, (0.3, 1.1))),
            };
            Scene {
                ground,
                texture: ValueNoise::new(rng, 2.0),
                texture_amp: 0.2,
                movers: vec![vehicle(1, 20.0, 2.5, 72.0, red), vehicle(2, 300.0, -2.5, 176.0, blue)],
            }
        }
        SceneKind::Crossing => Scene {
            ground,
            texture: ValueNoise::new(rng, 2.0),
            texture_amp: 0.15,
            movers: vec![
                person(1, 30.0, 2.0, 90.0, (0.6, (1.4, 0.9))),
                person(2, 290.0, -2.0, 165.0, (0.6, (1.4, 0.9))),
            ],
        },
    }
}

fn frame_rng(kind: SceneKind, t: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(kind.seed() ^ ((t as u64 + 1) << 32))
}

pub fn generate(kind: SceneKind) -> SyntheticSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(kind.seed());
    let scene = build_scene(kind, &mut rng);
    let bg = scene.background();
    let background = Frame::from_fn(WIDTH, HEIGHT, |x, y| bg[y * WIDTH + x].map(to_u8));
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");

    let mut frames = Vec::with_capacity(FRAMES);
    let mut ground_truth = BTreeMap::new();
    let mut boxes: BTreeMap<u32, Vec<Observation>> = BTreeMap::new();
    for t in 0..FRAMES {
        let shadow = scene.shadow_map(t);
        let mut labels = vec![Label::Background; WIDTH * HEIGHT];
        let mut extent: BTreeMap<u32, (usize, usize, usize, usize)> = BTreeMap::new();
        let mut rng = frame_rng(kind, t);
        let frame = Frame::from_fn(WIDTH, HEIGHT, |x, y| {
            let i = y * WIDTH + x;
            let clean = match scene.object_at(t, x, y) {
                Some((id, c)) => {
                    labels[i] = Label::Object;
                    let e = extent.entry(id).or_insert((x, y, x, y));
                    *e = (e.0.min(x), e.1.min(y), e.2.max(x), e.3.max(y));
                    c
                }
                None if shadow[i] < 1.0 => {
                    labels[i] = Label::Shadow;
                    bg[i].map(|c| c * shadow[i])
                }
                None => bg[i],
            };
            clean.map(|c| to_u8(c + noise.sample(&mut rng)))
        });
        for (id, (x0, y0, x1, y1)) in extent {
            boxes.entry(id).or_default().push(Observation {
                frame: t,
                x: (x0 + x1) as f64 / 2.0,
                y: (y0 + y1) as f64 / 2.0,
                w: (x1 - x0 + 1) as f64,
                h: (y1 - y0 + 1) as f64,
            });
        }
        if t >= GT_START && (t - GT_START) % GT_STEP == 0 {
            ground_truth.insert(t, TriMask::from_vec(WIDTH, HEIGHT, labels).expect("sized"));
        }
        frames.push(frame);
    }
    SyntheticSequence {
        name: kind.name().to_string(),
        background,
        frames,
        ground_truth,
        tracks: boxes.into_iter().map(|(id, observations)| Track { id, observations }).collect(),
    }
}
