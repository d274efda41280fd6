//! 8-bit grayscale PNG / PGM (P5) reading and writing.
//!
//! Intensities map linearly between `0..=255` and `[0, 1]`; writing rounds
//! half-up so a save/load cycle is exact to within 1/510. Masks are stored
//! as 0/255 and read back with a threshold at 128.

use std::fs::File;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use super::image::{BinaryMask, GrayImage};
use crate::error::{Error, Result};

/// Largest raster accepted from disk (pixels).
const MAX_PIXELS: u64 = 1 << 28;

fn load_luma8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let (w, h) = reader.into_dimensions().map_err(|e| Error::Codec {
        path: path.into(),
        message: e.to_string(),
    })?;
    if u64::from(w) * u64::from(h) > MAX_PIXELS {
        return Err(Error::DimensionOverflow {
            width: w.into(),
            height: h.into(),
        });
    }
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| Error::Codec {
        path: path.into(),
        message: e.to_string(),
    })?;
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok((w as usize, h as usize, buf.into_raw()))
        }
        other => Err(Error::UnsupportedFormat {
            path: path.into(),
            detail: format!(
                "expected 8-bit grayscale, found {:?}",
                color_name(other.color())
            ),
        }),
    }
}

fn color_name(c: ColorType) -> String {
    format!("{c:?}")
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let (w, h, bytes) = load_luma8(path.as_ref())?;
    GrayImage::new(w, h, bytes.into_iter().map(|b| f64::from(b) / 255.0).collect())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let (w, h, bytes) = load_luma8(path.as_ref())?;
    BinaryMask::new(w, h, bytes.into_iter().map(|b| b >= 128).collect())
}

/// Quantize an intensity to a byte, rounding half up.
pub fn intensity_to_byte(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

fn image_bytes(img: &GrayImage) -> Vec<u8> {
    img.data().iter().map(|&v| intensity_to_byte(v)).collect()
}

fn mask_bytes(mask: &BinaryMask) -> Vec<u8> {
    mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect()
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("pgm"))
        .unwrap_or(false)
}

fn save_luma8(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let writer = BufWriter::new(file);
    let result = if is_pgm(path) {
        PnmEncoder::new(writer)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(bytes, width as u32, height as u32, ExtendedColorType::L8)
    } else {
        PngEncoder::new(writer).write_image(
            bytes,
            width as u32,
            height as u32,
            ExtendedColorType::L8,
        )
    };
    result.map_err(|e| Error::Codec {
        path: path.into(),
        message: e.to_string(),
    })
}

/// Writes PNG unless the extension is `.pgm`.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    save_luma8(path.as_ref(), img.width(), img.height(), &image_bytes(img))
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    save_luma8(path.as_ref(), mask.width(), mask.height(), &mask_bytes(mask))
}

fn encode_png(width: usize, height: usize, bytes: &[u8], color: ExtendedColorType) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new(Cursor::new(&mut out))
        .write_image(bytes, width as u32, height as u32, color)
        .expect("in-memory PNG encoding cannot fail for consistent buffers");
    out
}

pub fn encode_png_gray(img: &GrayImage) -> Vec<u8> {
    encode_png(img.width(), img.height(), &image_bytes(img), ExtendedColorType::L8)
}

/// SEM image with the mask alpha-blended in red (`alpha` in `[0, 1]`), as RGB PNG bytes.
pub fn encode_overlay_png(img: &GrayImage, mask: &BinaryMask, alpha: f64) -> Result<Vec<u8>> {
    if !img.same_dims(mask) {
        return Err(Error::DimensionMismatch(format!(
            "overlay image {}x{} vs mask {}x{}",
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    let mut rgb = Vec::with_capacity(img.width() * img.height() * 3);
    for (v, m) in img.data().iter().zip(mask.data()) {
        let g = *v;
        if *m {
            rgb.push(intensity_to_byte(g * (1.0 - alpha) + alpha));
            rgb.push(intensity_to_byte(g * (1.0 - alpha)));
            rgb.push(intensity_to_byte(g * (1.0 - alpha)));
        } else {
            let b = intensity_to_byte(g);
            rgb.extend_from_slice(&[b, b, b]);
        }
    }
    Ok(encode_png(
        img.width(),
        img.height(),
        &rgb,
        ExtendedColorType::Rgb8,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn zero_pgm_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.pgm");
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend_from_slice(&[0u8; 16]);
        std::fs::write(&path, bytes).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.width(), img.height()), (4, 4));
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn byte_mapping_boundaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.pgm");
        let mut bytes = b"P5\n3 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 128, 127]);
        std::fs::write(&path, bytes).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.get(0, 0), 1.0);
        let mask = load_mask(&path).unwrap();
        assert!(mask.get(0, 0));
        assert!(mask.get(1, 0));
        assert!(!mask.get(2, 0));
    }

    #[test]
    fn round_trip_within_half_step() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Rng::new(11);
        for (k, ext) in ["png", "pgm"].iter().enumerate() {
            let img = GrayImage::from_fn(8, 8, |_, _| rng.uniform());
            let path = dir.path().join(format!("r{k}.{ext}"));
            save_image(&img, &path).unwrap();
            let back = load_image(&path).unwrap();
            for (a, b) in img.data().iter().zip(back.data()) {
                assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mask = BinaryMask::from_fn(5, 4, |x, y| (x + y) % 3 == 0);
        let path = dir.path().join("m.png");
        save_mask(&mask, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);
    }

    #[test]
    fn missing_file_errors() {
        assert!(matches!(
            load_image("/definitely/not/here.png"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn sixteen_bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.pgm");
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 255, 255]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_image(&path),
            Err(Error::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn color_png_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        image::save_buffer(&path, &[0u8; 12], 2, 2, ExtendedColorType::Rgb8).unwrap();
        assert!(matches!(
            load_mask(&path),
            Err(Error::UnsupportedFormat { .. })
        ));
    }
}
