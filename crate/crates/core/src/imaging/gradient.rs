use crate::error::{Error, Result};
use crate::imaging::raster::GreyImage;

/// Forward-difference gradient of a grey image.
///
/// `gx` is the difference to the next column, `gy` to the next row. The last
/// column and last row carry a zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl GradientField {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn vector(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.gx[i], self.gy[i])
    }

    #[inline]
    pub fn magnitude(&self, x: usize, y: usize) -> f64 {
        let (gx, gy) = self.vector(x, y);
        gx.hypot(gy)
    }

    /// Radians in `[-π, π]`; only meaningful where the magnitude is positive.
    #[inline]
    pub fn direction(&self, x: usize, y: usize) -> f64 {
        let (gx, gy) = self.vector(x, y);
        gy.atan2(gx)
    }

    #[inline]
    pub(crate) fn magnitude_at(&self, idx: usize) -> f64 {
        self.gx[idx].hypot(self.gy[idx])
    }
}

pub fn gradient_field(grey: &GreyImage) -> Result<GradientField> {
    let (w, h) = grey.dims();
    if w < 2 || h < 2 {
        return Err(Error::ImageTooSmall(format!(
            "gradient needs at least 2x2 pixels, got {w}x{h}"
        )));
    }
    let src = grey.as_raw();
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let i = y * w + x;
            let v = f64::from(src[i]);
            gx[i] = f64::from(src[i + 1]) - v;
            gy[i] = f64::from(src[i + w]) - v;
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
    })
}
