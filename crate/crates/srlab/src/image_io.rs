//! Image file I/O and color-space handling.
//!
//! Supported formats: 8-bit PNG (gray/RGB) and binary PPM (P6) / PGM (P5).
//! Color conversion uses BT.601 studio-swing YCbCr, the convention behind
//! the luminance-channel evaluation protocol; full-swing constants would
//! shift PSNR baselines.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// 8-bit image with interleaved samples, 1 (gray) or 3 (RGB) channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageU8 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::config(format!(
                "unsupported channel count {} (must be 1 or 3)",
                channels
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "image data length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(ImageU8 {
            channels,
            height,
            width,
            data,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorSpace {
    Gray,
    Rgb,
    YCbCr,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            _ => 3,
        }
    }
}

/// Loads a PNG, PPM, or PGM image, sniffing the format from its magic bytes.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageU8> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(&bytes)
    } else {
        Err(Error::format(format!(
            "{}: not a PNG, PPM, or PGM file",
            path.display()
        )))
    }
}

/// Saves as PNG, PPM, or PGM depending on the file extension. PPM requires
/// 3 channels and PGM requires 1.
pub fn save_image(path: impl AsRef<Path>, img: &ImageU8) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "png" => save_png(path, img),
        "ppm" => {
            if img.channels != 3 {
                return Err(Error::config("PPM requires a 3-channel image"));
            }
            save_pnm(path, img, b"P6")
        }
        "pgm" => {
            if img.channels != 1 {
                return Err(Error::config("PGM requires a 1-channel image"));
            }
            save_pnm(path, img, b"P5")
        }
        other => Err(Error::format(format!(
            "unsupported output extension '{}' (use png, ppm, or pgm)",
            other
        ))),
    }
}

fn decode_png(bytes: &[u8]) -> Result<ImageU8> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::format(format!("PNG decode failed: {}", e)))?;
    use image::DynamicImage::*;
    let (channels, w, h, data) = match img {
        ImageLuma8(g) => (1, g.width(), g.height(), g.into_raw()),
        ImageRgb8(c) => (3, c.width(), c.height(), c.into_raw()),
        // Alpha is dropped; everything else (16-bit, palettes already
        // expanded by the decoder) is out of scope.
        ImageLumaA8(g) => {
            let (w, h) = (g.width(), g.height());
            let flat = image::DynamicImage::ImageLumaA8(g).to_luma8().into_raw();
            (1, w, h, flat)
        }
        ImageRgba8(c) => {
            let (w, h) = (c.width(), c.height());
            let flat = image::DynamicImage::ImageRgba8(c).to_rgb8().into_raw();
            (3, w, h, flat)
        }
        other => {
            return Err(Error::format(format!(
                "unsupported PNG sample format {:?} (8-bit gray/RGB only)",
                other.color()
            )))
        }
    };
    ImageU8::new(channels, h as usize, w as usize, data)
}

fn save_png(path: &Path, img: &ImageU8) -> Result<()> {
    let file = fs::File::create(path)?;
    let enc = image::codecs::png::PngEncoder::new(std::io::BufWriter::new(file));
    let color = match img.channels {
        1 => image::ExtendedColorType::L8,
        _ => image::ExtendedColorType::Rgb8,
    };
    image::ImageEncoder::write_image(enc, &img.data, img.width as u32, img.height as u32, color)
        .map_err(|e| Error::format(format!("PNG encode failed: {}", e)))
}

fn decode_pnm(bytes: &[u8]) -> Result<ImageU8> {
    let channels = if bytes.starts_with(b"P6") { 3 } else { 1 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Skip whitespace and '#' comments between header fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_digit() => break,
                _ => return Err(Error::format("PNM header truncated")),
            }
        }
        let mut v = 0usize;
        while let Some(b) = bytes.get(pos).filter(|b| b.is_ascii_digit()) {
            v = v * 10 + (b - b'0') as usize;
            pos += 1;
        }
        *field = v;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format(format!(
            "PNM maxval {} unsupported (8-bit only)",
            maxval
        )));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format("PNM header missing terminator")),
    }
    let need = channels * width * height;
    let payload = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::format("PNM payload truncated"))?;
    ImageU8::new(channels, height, width, payload.to_vec())
}

fn save_pnm(path: &Path, img: &ImageU8, magic: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(img.data.len() + 32);
    out.extend_from_slice(magic);
    write!(out, "\n{} {}\n255\n", img.width, img.height)?;
    out.extend_from_slice(&img.data);
    fs::write(path, out)?;
    Ok(())
}

/// Interleaved 8-bit samples to a planar tensor in `[0,1]`.
pub fn to_float<S: Scalar>(img: &ImageU8) -> Tensor<S> {
    Tensor::from_fn(img.channels, img.height, img.width, |c, y, x| {
        let v = img.data[(y * img.width + x) * img.channels + c];
        S::from_f64(v as f64 / 255.0)
    })
}

/// Planar `[0,1]` tensor to interleaved 8-bit samples: clamp, scale by 255,
/// round half away from zero.
pub fn to_u8<S: Scalar>(t: &Tensor<S>) -> Result<ImageU8> {
    let (c, h, w) = t.shape();
    if c != 1 && c != 3 {
        return Err(Error::config(format!("cannot write {}-channel image", c)));
    }
    let mut data = vec![0u8; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let v = t.get(ch, y, x).as_f64().clamp(0.0, 1.0) * 255.0;
                data[(y * w + x) * c + ch] = v.round() as u8;
            }
        }
    }
    ImageU8::new(c, h, w, data)
}

// BT.601 studio swing: Y in [16, 235], Cb/Cr in [16, 240], all over 255.
const RGB_TO_YCBCR: [[f64; 3]; 3] = [
    [65.481, 128.553, 24.966],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
];
const YCBCR_OFFSET: [f64; 3] = [16.0, 128.0, 128.0];

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let c = |r: usize, c: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
        m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
    };
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for cc in 0..3 {
            // Transposed cofactor over determinant.
            inv[r][cc] = c(cc, r) / det;
        }
    }
    inv
}

fn convert3<S: Scalar>(img: &Tensor<S>, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Result<Tensor<S>> {
    let (c, h, w) = img.shape();
    if c != 3 {
        return Err(Error::config(format!(
            "color conversion requires 3 channels, got {}",
            c
        )));
    }
    let n = h * w;
    let (p0, p1, p2) = (img.plane(0), img.plane(1), img.plane(2));
    let mut data = vec![S::zero(); 3 * n];
    for i in 0..n {
        let out = f(p0[i].as_f64(), p1[i].as_f64(), p2[i].as_f64());
        data[i] = S::from_f64(out[0]);
        data[n + i] = S::from_f64(out[1]);
        data[2 * n + i] = S::from_f64(out[2]);
    }
    Tensor::new(3, h, w, data)
}

/// RGB in `[0,1]` to (Y, Cb, Cr), each still on the `[0,1]` scale.
pub fn rgb_to_ycbcr<S: Scalar>(img: &Tensor<S>) -> Result<Tensor<S>> {
    convert3(img, |r, g, b| {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let m = &RGB_TO_YCBCR[k];
            *o = (YCBCR_OFFSET[k] + m[0] * r + m[1] * g + m[2] * b) / 255.0;
        }
        out
    })
}

/// Inverse of [`rgb_to_ycbcr`]; composes to identity within 1e-6.
pub fn ycbcr_to_rgb<S: Scalar>(img: &Tensor<S>) -> Result<Tensor<S>> {
    let inv = invert3(&RGB_TO_YCBCR);
    convert3(img, |y, cb, cr| {
        let v = [
            y * 255.0 - YCBCR_OFFSET[0],
            cb * 255.0 - YCBCR_OFFSET[1],
            cr * 255.0 - YCBCR_OFFSET[2],
        ];
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = inv[k][0] * v[0] + inv[k][1] * v[1] + inv[k][2] * v[2];
        }
        out
    })
}

/// Luminance channel of an image tensor: gray images pass through, RGB is
/// converted to YCbCr and the Y plane extracted.
pub fn luminance<S: Scalar>(img: &Tensor<S>) -> Result<Tensor<S>> {
    match img.channels() {
        1 => Ok(img.clone()),
        3 => Ok(rgb_to_ycbcr(img)?.channel(0)),
        c => Err(Error::config(format!("luminance of {}-channel image", c))),
    }
}
