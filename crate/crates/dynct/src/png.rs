use std::path::Path;

use dynct_core::Image;

use crate::error::{Error, Result};

/// 8-bit gray levels, min–max normalized; a constant image maps to 0.
/// Row `i` of the image becomes row `i` of the picture.
pub fn to_gray8(image: &Image) -> Vec<u8> {
    let (lo, hi) = image
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![0; image.values().len()];
    }
    let scale = 255.0 / (hi - lo);
    image.values().iter().map(|&v| ((v - lo) * scale).round().clamp(0.0, 255.0) as u8).collect()
}

pub fn export_png(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = image.grid().n_pix() as u32;
    let buf = image::GrayImage::from_raw(n, n, to_gray8(image)).expect("buffer matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Png { path: path.to_path_buf(), message: e.to_string() })
}
