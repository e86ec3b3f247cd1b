//! 8-bit PNG reading and writing.

use std::path::Path;

use crate::color::RgbImage;
use crate::container::write_atomic;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Decodes an 8-bit PNG into `[0, 1]` RGB. Alpha is dropped; gray and palette images
/// are expanded to three channels.
pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::UnsupportedImage(e.to_string()))?;
    let info = reader.info();
    if info.bit_depth == png::BitDepth::Sixteen {
        return Err(Error::UnsupportedImage(
            "16-bit PNG is not supported; convert to 8-bit".into(),
        ));
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::UnsupportedImage(e.to_string()))?;
    if frame.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedImage(format!(
            "unsupported bit depth {:?}",
            frame.bit_depth
        )));
    }
    let (w, h) = (frame.width as usize, frame.height as usize);
    let stride = frame.line_size;
    let channels = match frame.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedImage(
                "palette PNG was not expanded".into(),
            ));
        }
    };
    let mut t = Tensor::zeros(3, h, w);
    for y in 0..h {
        let row = &buf[y * stride..y * stride + w * channels];
        for x in 0..w {
            let px = &row[x * channels..(x + 1) * channels];
            let rgb = if channels < 3 {
                [px[0]; 3]
            } else {
                [px[0], px[1], px[2]]
            };
            for (c, &b) in rgb.iter().enumerate() {
                t.set(c, y, x, f32::from(b) / 255.0);
            }
        }
    }
    RgbImage::new(t)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes).map_err(|e| match e {
        Error::UnsupportedImage(m) => Error::UnsupportedImage(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::UnsupportedImage(e.to_string()))?;
    writer
        .write_image_data(data)
        .map_err(|e| Error::UnsupportedImage(e.to_string()))?;
    writer
        .finish()
        .map_err(|e| Error::UnsupportedImage(e.to_string()))?;
    Ok(out)
}

/// Encodes as 8-bit RGB with `round(clamp(v, 0, 1) * 255)`.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let (h, w) = (img.height(), img.width());
    let mut data = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            data.extend(img.pixel(y, x).map(to_byte));
        }
    }
    encode(w, h, png::ColorType::Rgb, &data)
}

/// Encodes a single-channel plane, already scaled to `[0, 1]`, as 8-bit grayscale.
pub fn encode_gray_png(plane: &Tensor) -> Result<Vec<u8>> {
    if plane.channels() != 1 {
        return Err(Error::contract(format!(
            "grayscale export needs one channel, got {}",
            plane.channels()
        )));
    }
    let data: Vec<u8> = plane.data().iter().map(|&v| to_byte(v)).collect();
    encode(
        plane.width(),
        plane.height(),
        png::ColorType::Grayscale,
        &data,
    )
}

pub fn save_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_png(img)?)
}

pub fn save_gray(plane: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_gray_png(plane)?)
}

/// Reads a grayscale PNG back as a single plane in `[0, 1]`.
pub fn load_gray(path: impl AsRef<Path>) -> Result<Tensor> {
    Ok(load_image(path)?.tensor().channel(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw_png(
        w: u32,
        h: u32,
        color: png::ColorType,
        depth: png::BitDepth,
        data: &[u8],
    ) -> Vec<u8> {
        let mut out = Vec::new();
        let mut e = png::Encoder::new(&mut out, w, h);
        e.set_color(color);
        e.set_depth(depth);
        let mut wr = e.write_header().unwrap();
        wr.write_image_data(data).unwrap();
        wr.finish().unwrap();
        out
    }

    #[test]
    fn byte_mapping() {
        let bytes = raw_png(
            2,
            1,
            png::ColorType::Rgb,
            png::BitDepth::Eight,
            &[255, 128, 0, 1, 2, 3],
        );
        let img = decode_png(&bytes).unwrap();
        assert_eq!(img.pixel(0, 0), [1.0, 128.0 / 255.0, 0.0]);
        assert!((img.pixel(0, 0)[1] - 0.50196).abs() < 1e-5);
        assert_eq!(encode_png(&img).unwrap(), bytes);
    }

    #[test]
    fn alpha_is_dropped_and_gray_is_expanded() {
        let rgba = raw_png(
            1,
            1,
            png::ColorType::Rgba,
            png::BitDepth::Eight,
            &[10, 20, 30, 40],
        );
        assert_eq!(
            decode_png(&rgba).unwrap().pixel(0, 0),
            [10.0 / 255.0, 20.0 / 255.0, 30.0 / 255.0]
        );
        let gray = raw_png(1, 1, png::ColorType::Grayscale, png::BitDepth::Eight, &[51]);
        assert_eq!(decode_png(&gray).unwrap().pixel(0, 0), [0.2; 3]);
    }

    #[test]
    fn sixteen_bit_is_rejected() {
        let bytes = raw_png(1, 1, png::ColorType::Rgb, png::BitDepth::Sixteen, &[0; 6]);
        let err = decode_png(&bytes).unwrap_err();
        assert!(matches!(err, Error::UnsupportedImage(ref m) if m.contains("16-bit")));
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(matches!(
            decode_png(b"not a png"),
            Err(Error::UnsupportedImage(_))
        ));
    }

    #[test]
    fn gray_export_round_trips() {
        let plane = Tensor::from_fn(1, 3, 4, |_, y, x| (y * 4 + x) as f32 / 11.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.png");
        save_gray(&plane, &path).unwrap();
        let back = load_gray(&path).unwrap();
        assert!(back.max_abs_diff(&plane) <= 0.5 / 255.0 + 1e-6);
        assert!(encode_gray_png(&Tensor::zeros(2, 2, 2)).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_image("/nonexistent/in.png").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    proptest! {
        #[test]
        fn byte_aligned_round_trip(bytes in proptest::collection::vec(any::<u8>(), 3 * 5 * 4)) {
            let png_bytes = raw_png(5, 4, png::ColorType::Rgb, png::BitDepth::Eight, &bytes);
            let img = decode_png(&png_bytes).unwrap();
            let again = decode_png(&encode_png(&img).unwrap()).unwrap();
            prop_assert!(again.tensor().bitwise_eq(img.tensor()));
            prop_assert_eq!(encode_png(&img).unwrap(), png_bytes);
        }
    }
}
