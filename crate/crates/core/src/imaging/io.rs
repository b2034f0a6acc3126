//! PNG load/save for frames, grey images and label masks.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::imaging::raster::{Frame, GreyImage, Label, TriMask};

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    frame_from_dynamic(img)
}


/// Decodes an RGB frame from encoded image bytes (any enabled format).
pub fn decode_frame(bytes: &[u8]) -> Result<Frame> {
    let img = image::load_from_memory(bytes).map_err(|e| image_err(Path::new("<memory>"), e))?;
    frame_from_dynamic(img)
}

fn frame_from_dynamic(img: DynamicImage) -> Result<Frame> {
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    Frame::new(w as usize, h as usize, rgb.into_raw())
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let img = RgbImage::from_raw(
        frame.width() as u32,
        frame.height() as u32,
        frame.as_raw().to_vec(),
    )
    .expect("frame buffer length matches its dimensions");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| image_err(path, e))
}

pub fn load_grey(path: &Path) -> Result<GreyImage> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.into_luma8();
    let (w, h) = img.dimensions();
    GreyImage::new(w as usize, h as usize, img.into_raw())
}

pub fn save_grey(grey: &GreyImage, path: &Path) -> Result<()> {
    image::save_buffer_with_format(
        path,
        grey.as_raw(),
        grey.width() as u32,
        grey.height() as u32,
        image::ExtendedColorType::L8,
        ImageFormat::Png,
    )
    .map_err(|e| image_err(path, e))
}

/// Decodes a label mask from PNG bytes. Only the grey levels 0, 128 and 255
/// are accepted; anything else is reported with its pixel position.
pub fn decode_trimask(bytes: &[u8]) -> Result<TriMask> {
    let img = image::load(Cursor::new(bytes), ImageFormat::Png)
        .map_err(|e| image_err(Path::new("<memory>"), e))?;
    trimask_from_grey(img.into_luma8(), "<memory>")
}

fn trimask_from_grey(img: image::GrayImage, name: &str) -> Result<TriMask> {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::ImageTooSmall(format!("{name}: empty mask")));
    }
    let mut labels = Vec::with_capacity((w * h) as usize);
    for (i, &v) in img.as_raw().iter().enumerate() {
        let label = Label::from_grey(v).ok_or_else(|| {
            Error::param(
                "mask",
                format!(
                    "{name}: grey level {v} at ({}, {}) is not one of 0/128/255",
                    i % w as usize,
                    i / w as usize
                ),
            )
        })?;
        labels.push(label);
    }
    TriMask::from_vec(w as usize, h as usize, labels)
}

pub fn load_trimask(path: &Path) -> Result<TriMask> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.into_luma8();
    trimask_from_grey(img, &path.display().to_string())
}

pub fn encode_trimask(mask: &TriMask) -> Vec<u8> {
    let grey: Vec<u8> = mask.as_slice().iter().map(|l| l.to_grey()).collect();
    let mut out = Vec::new();
    image::write_buffer_with_format(
        &mut Cursor::new(&mut out),
        &grey,
        mask.width() as u32,
        mask.height() as u32,
        image::ExtendedColorType::L8,
        ImageFormat::Png,
    )
    .expect("encoding to memory cannot fail");
    out
}

pub fn save_trimask(mask: &TriMask, path: &Path) -> Result<()> {
    std::fs::write(path, encode_trimask(mask))?;
    Ok(())
}
