//! 3x3 binary morphology. Pixels outside the raster count as background.

use crate::imaging::raster::BinaryMask;

pub fn dilate(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    BinaryMask::from_fn(w, h, |x, y| any_in_window(mask, x, y, true))
}

pub fn erode(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    BinaryMask::from_fn(w, h, |x, y| !any_in_window(mask, x, y, false))
}

pub fn open(mask: &BinaryMask) -> BinaryMask {
    dilate(&erode(mask))
}

pub fn close(mask: &BinaryMask) -> BinaryMask {
    erode(&dilate(mask))
}

fn any_in_window(mask: &BinaryMask, x: usize, y: usize, value: bool) -> bool {
    let (w, h) = mask.dims();
    let y0 = y.saturating_sub(1);
    let y1 = (y + 1).min(h - 1);
    let x0 = x.saturating_sub(1);
    let x1 = (x + 1).min(w - 1);
    // erosion: window cells past the border are background
    if !value && (x == 0 || y == 0 || x + 1 == w || y + 1 == h) {
        return true;
    }
    (y0..=y1).any(|yy| (x0..=x1).any(|xx| mask.get(xx, yy) == value))
}
