//! 8-connected component labelling.

use crate::imaging::raster::BinaryMask;

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    fn grow(&mut self, x: usize, y: usize) {
        self.x_min = self.x_min.min(x);
        self.y_min = self.y_min.min(y);
        self.x_max = self.x_max.max(x);
        self.y_max = self.y_max.max(y);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub id: u32,
    /// Raster-ordered `(x, y)` coordinates.
    pub pixels: Vec<(usize, usize)>,
    pub bbox: BoundingBox,
}

impl Region {
    /// Builds a region from arbitrary pixels; the bounding box is recomputed.
    /// Returns `None` for an empty pixel set. Connectivity is not checked.
    pub fn from_pixels(id: u32, mut pixels: Vec<(usize, usize)>) -> Option<Self> {
        let &(x0, y0) = pixels.first()?;
        let mut bbox = BoundingBox {
            x_min: x0,
            y_min: y0,
            x_max: x0,
            y_max: y0,
        };
        for &(x, y) in &pixels {
            bbox.grow(x, y);
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        Some(Self { id, pixels, bbox })
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (sx, sy) = self
            .pixels
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        (sx / n, sy / n)
    }
}

/// Per-pixel component labels, `0` for background, `1..=count` otherwise.
/// Labels are assigned in raster order of each component's first pixel.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, u32) {
    let (w, h) = mask.dims();
    let fg = mask.as_slice();
    let mut parent: Vec<u32> = vec![0];
    let mut labels = vec![0u32; w * h];

    fn find(parent: &mut [u32], mut a: u32) -> u32 {
        while parent[a as usize] != a {
            parent[a as usize] = parent[parent[a as usize] as usize];
            a = parent[a as usize];
        }
        a
    }

    fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
        let ra = find(parent, a);
        let rb = find(parent, b);
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
        lo
    }

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !fg[i] {
                continue;
            }
            let mut current = 0u32;
            // already-visited neighbours: W, NW, N, NE
            let mut visit = |nx: isize, ny: isize, labels: &[u32], parent: &mut Vec<u32>| {
                if nx < 0 || ny < 0 || nx as usize >= w {
                    return;
                }
                let l = labels[ny as usize * w + nx as usize];
                if l == 0 {
                    return;
                }
                current = if current == 0 {
                    find(parent, l)
                } else {
                    union(parent, current, l)
                };
            };
            let (xi, yi) = (x as isize, y as isize);
            visit(xi - 1, yi, &labels, &mut parent);
            visit(xi - 1, yi - 1, &labels, &mut parent);
            visit(xi, yi - 1, &labels, &mut parent);
            visit(xi + 1, yi - 1, &labels, &mut parent);
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[i] = current;
        }
    }

    // Compact roots to 1..=count in order of first appearance.
    let mut remap = vec![0u32; parent.len()];
    let mut count = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l) as usize;
        if remap[root] == 0 {
            count += 1;
            remap[root] = count;
        }
        *l = remap[root];
    }
    (labels, count)
}

/// Partition of the mask's foreground into 8-connected regions, ordered by
/// the raster position of each region's first pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Region> {
    let w = mask.width();
    let (labels, count) = label_components(mask);
    let mut pixels: Vec<Vec<(usize, usize)>> = vec![Vec::new(); count as usize];
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            pixels[l as usize - 1].push((i % w, i / w));
        }
    }
    pixels
        .into_iter()
        .enumerate()
        .filter_map(|(i, px)| Region::from_pixels(i as u32 + 1, px))
        .collect()
}
