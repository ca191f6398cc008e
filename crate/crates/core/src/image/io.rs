use std::path::Path;

use super::GrayImage;
use crate::error::ImageError;

/// Reads any PNG and converts it to 8-bit luma, mapped linearly to [0, 1].
pub fn load_png(path: &Path) -> Result<GrayImage, ImageError> {
    let luma = ::image::open(path)?.into_luma8();
    let (w, h) = luma.dimensions();
    let pixels = luma
        .into_raw()
        .into_iter()
        .map(|v| v as f32 / 255.0)
        .collect();
    GrayImage::from_pixels(w as usize, h as usize, pixels)
}

/// Writes an 8-bit grayscale PNG, rounding to the nearest level.
pub fn save_png(img: &GrayImage, path: &Path) -> Result<(), ImageError> {
    let raw: Vec<u8> = img
        .pixels()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let buf = ::image::GrayImage::from_raw(img.width() as u32, img.height() as u32, raw)
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, ::image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_on_8bit_levels() {
        let img = GrayImage::from_fn(17, 9, |x, y| ((x * 13 + y * 7) % 256) as f32 / 255.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        save_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(load_png(Path::new("/nonexistent/none.png")).is_err());
    }
}
