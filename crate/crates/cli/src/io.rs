//! Image and kernel file formats.
//!
//! Binary PGM (P5) and PPM (P6) are handled here; PNG goes through the
//! `image` crate. Samples map to `[0, 1]` as `v / maxval` on read and are
//! written as 8-bit `round(255 v)`.

use std::io::Cursor;
use std::path::Path;

use fracblind::{ColorImage, Image, Kernel};

use crate::CliError;

/// A decoded image file: one plane or three.
#[derive(Debug, Clone, PartialEq)]
pub enum Raster {
    Gray(Image<f64>),
    Color(ColorImage<f64>),
}

impl Raster {
    pub fn width(&self) -> usize {
        match self {
            Raster::Gray(g) => g.width(),
            Raster::Color(c) => c.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Raster::Gray(g) => g.height(),
            Raster::Color(c) => c.height(),
        }
    }

    /// The plane itself, or the luminance of a color image.
    pub fn luminance(&self) -> Image<f64> {
        match self {
            Raster::Gray(g) => g.clone(),
            Raster::Color(c) => c.luminance(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Pgm,
    Ppm,
    Png,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("pgm") => Ok(Format::Pgm),
            Some("ppm") => Ok(Format::Ppm),
            Some("png") => Ok(Format::Png),
            _ => Err(CliError::Unsupported(format!("{} (use .pgm, .ppm or .png)", path.display()))),
        }
    }
}

pub fn read_image(path: &Path) -> Result<Raster, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Read { path: path.display().to_string(), source })?;
    decode(&bytes)
}

/// Decodes by content, not by file name.
pub fn decode(bytes: &[u8]) -> Result<Raster, CliError> {
    if bytes.starts_with(b"\x89PNG") {
        return decode_png(bytes);
    }
    match bytes.get(..2) {
        Some(b"P5") => Ok(Raster::Gray(decode_pnm(bytes, 1)?.remove(0))),
        Some(b"P6") => {
            let mut planes = decode_pnm(bytes, 3)?;
            let b = planes.pop().unwrap();
            let g = planes.pop().unwrap();
            let r = planes.pop().unwrap();
            Ok(Raster::Color(ColorImage::new(r, g, b)?))
        }
        Some([b'P', _]) => Err(CliError::BadMagic(format!(
            "'{}' (only binary P5/P6 are supported)",
            String::from_utf8_lossy(&bytes[..2])
        ))),
        _ => Err(CliError::BadMagic("file does not start with P5, P6 or a PNG signature".into())),
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, CliError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(CliError::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::MalformedHeader(format!("{what} out of range")))
    }
}

fn decode_pnm(bytes: &[u8], channels: usize) -> Result<Vec<Image<f64>>, CliError> {
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(CliError::MalformedHeader(format!("zero-sized image {width}x{height}")));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(CliError::MalformedHeader(format!("maxval {maxval} outside 1..=65535")));
    }
    if !bytes.get(rd.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(CliError::MalformedHeader("missing whitespace before pixel data".into()));
    }
    let payload = &bytes[rd.pos + 1..];
    let depth = if maxval < 256 { 1 } else { 2 };
    let count = width * height * channels;
    let expected = count * depth;
    if payload.len() < expected {
        return Err(CliError::Truncated { expected, found: payload.len() });
    }
    let scale = maxval as f64;
    let sample = |i: usize| -> f64 {
        let v = if depth == 1 { payload[i] as u32 } else { u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as u32 };
        (v.min(maxval as u32)) as f64 / scale
    };
    (0..channels)
        .map(|ch| {
            let data = (0..width * height).map(|p| sample(p * channels + ch)).collect();
            Image::new(width, height, data).map_err(CliError::from)
        })
        .collect()
}

fn decode_png(bytes: &[u8]) -> Result<Raster, CliError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| CliError::MalformedHeader(format!("png: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        let plane = |ch: usize| {
            Image::new(w, h, rgb.pixels().map(|p| p.0[ch] as f64 / 255.0).collect()).map_err(CliError::from)
        };
        Ok(Raster::Color(ColorImage::new(plane(0)?, plane(1)?, plane(2)?)?))
    } else {
        let gray = img.to_luma8();
        Ok(Raster::Gray(Image::new(w, h, gray.pixels().map(|p| p.0[0] as f64 / 255.0).collect())?))
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes for the format implied by the file extension.
pub fn encode(path: &Path, raster: &Raster) -> Result<Vec<u8>, CliError> {
    match (Format::from_path(path)?, raster) {
        (Format::Pgm, Raster::Gray(g)) => Ok(encode_pnm(b"P5", g.width(), g.height(), g.data().iter().map(|&v| quantize(v)))),
        (Format::Pgm, Raster::Color(c)) => {
            let l = c.luminance();
            Ok(encode_pnm(b"P5", l.width(), l.height(), l.data().iter().map(|&v| quantize(v))))
        }
        (Format::Ppm, raster) => {
            let [r, g, b] = color_planes(raster);
            let samples = (0..r.len()).flat_map(|i| [r.data()[i], g.data()[i], b.data()[i]]).map(quantize);
            Ok(encode_pnm(b"P6", r.width(), r.height(), samples))
        }
        (Format::Png, Raster::Gray(g)) => {
            let buf = image::GrayImage::from_raw(g.width() as u32, g.height() as u32, g.data().iter().map(|&v| quantize(v)).collect())
                .expect("buffer matches dimensions");
            png_bytes(image::DynamicImage::ImageLuma8(buf))
        }
        (Format::Png, raster) => {
            let [r, g, b] = color_planes(raster);
            let samples = (0..r.len()).flat_map(|i| [r.data()[i], g.data()[i], b.data()[i]]).map(quantize).collect();
            let buf = image::RgbImage::from_raw(r.width() as u32, r.height() as u32, samples).expect("buffer matches dimensions");
            png_bytes(image::DynamicImage::ImageRgb8(buf))
        }
    }
}

fn color_planes(raster: &Raster) -> [Image<f64>; 3] {
    match raster {
        Raster::Gray(g) => [g.clone(), g.clone(), g.clone()],
        Raster::Color(c) => c.channels().clone(),
    }
}

fn encode_pnm(magic: &[u8], width: usize, height: usize, samples: impl Iterator<Item = u8>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(format!("\n{width} {height}\n255\n").as_bytes());
    out.extend(samples);
    out
}

fn png_bytes(img: image::DynamicImage) -> Result<Vec<u8>, CliError> {
    let mut cur = Cursor::new(Vec::new());
    img.write_to(&mut cur, image::ImageFormat::Png).map_err(|e| CliError::Unsupported(format!("png encoding: {e}")))?;
    Ok(cur.into_inner())
}

/// Kernel as an image scaled so its largest weight maps to 1.
pub fn kernel_image(k: &Kernel<f64>) -> Image<f64> {
    let peak = k.weights().iter().cloned().fold(0.0, f64::max);
    let img = k.to_image();
    if peak > 0.0 {
        img.map(|v| v / peak)
    } else {
        img
    }
}

/// One row per line, weights separated by spaces, full precision.
pub fn kernel_to_text(k: &Kernel<f64>) -> String {
    let mut out = String::new();
    for r in 0..k.rows() {
        let row: Vec<String> = (0..k.cols()).map(|c| format!("{}", k.get(r, c))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn kernel_from_text(text: &str) -> Result<Kernel<f64>, CliError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| CliError::Usage(format!("kernel text line {}: bad number '{t}'", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Usage("kernel text must be a non-empty rectangular grid".into()));
    }
    let n = rows.len();
    Ok(Kernel::new(n, cols, rows.into_iter().flatten().collect())?)
}
