//! Synthetic limited-data image sets and image file I/O.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Array;

/// Height, width and channel count of one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn gray(height: usize, width: usize) -> Self {
        ImageShape {
            height,
            width,
            channels: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticFamily {
    GaussBlobs,
    Rings,
    Bars,
}

impl fmt::Display for SyntheticFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticFamily::GaussBlobs => "gauss-blobs",
            SyntheticFamily::Rings => "rings",
            SyntheticFamily::Bars => "bars",
        })
    }
}

impl FromStr for SyntheticFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-blobs" => Ok(SyntheticFamily::GaussBlobs),
            "rings" => Ok(SyntheticFamily::Rings),
            "bars" => Ok(SyntheticFamily::Bars),
            _ => Err(Error::invalid(format!("unknown synthetic family {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub family: SyntheticFamily,
    pub n: usize,
    pub size: usize,
    pub seed: u64,
}

/// Images in `[-1, 1]` with a disjoint train/validation split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    shape: ImageShape,
    images: Vec<Array>,
    train: Vec<usize>,
    val: Vec<usize>,
    spec: SyntheticSpec,
}

impl Dataset {
    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Image `i` flattened row-major with channels fastest.
    pub fn image(&self, i: usize) -> &Array {
        &self.images[i]
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn val_indices(&self) -> &[usize] {
        &self.val
    }

    pub fn spec(&self) -> SyntheticSpec {
        self.spec
    }

    /// Stacks the given images into a `[n, h*w*c]` batch.
    pub fn batch(&self, indices: &[usize]) -> Result<Array> {
        let rows: Vec<Array> = indices.iter().map(|&i| self.images[i].clone()).collect();
        Array::stack(&rows)
    }
}

/// Procedurally renders `n` grayscale images of side `size` (16 or 32).
///
/// Pose and position are randomized per image; the result depends only on
/// the arguments. One image in ten (at least one) goes to validation.
pub fn make_synthetic(family: SyntheticFamily, n: usize, size: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 images for a split, got {n}")));
    }
    if size != 16 && size != 32 {
        return Err(Error::invalid(format!("image size must be 16 or 32, got {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images: Vec<Array> = (0..n)
        .map(|_| {
            let intensity = match family {
                SyntheticFamily::GaussBlobs => render_blobs(&mut rng, size),
                SyntheticFamily::Rings => render_ring(&mut rng, size),
                SyntheticFamily::Bars => render_bar(&mut rng, size),
            };
            Array::vector(intensity.into_iter().map(|v| 2.0 * v.clamp(0.0, 1.0) - 1.0).collect())
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = (n / 10).max(1);
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok(Dataset {
        shape: ImageShape::gray(size, size),
        images,
        train,
        val,
        spec: SyntheticSpec { family, n, size, seed },
    })
}

fn render(size: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            out.push(f(r as f64, c as f64));
        }
    }
    out
}

fn render_blobs(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let s = size as f64;
    let count = rng.random_range(1..=3);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|i| {
            let cy = rng.random_range(0.2 * s..0.8 * s);
            let cx = rng.random_range(0.2 * s..0.8 * s);
            let sigma = rng.random_range(1.5..3.0) * s / 16.0;
            let amp = if i == 0 { 1.0 } else { rng.random_range(0.5..1.0) };
            (cy, cx, sigma, amp)
        })
        .collect();
    // snap the first blob to a pixel centre so every image reaches full intensity
    let (cy0, cx0) = (blobs[0].0.round(), blobs[0].1.round());
    render(size, |r, c| {
        blobs
            .iter()
            .enumerate()
            .map(|(i, &(cy, cx, sigma, amp))| {
                let (cy, cx) = if i == 0 { (cy0, cx0) } else { (cy, cx) };
                let d2 = (r - cy).powi(2) + (c - cx).powi(2);
                amp * (-d2 / (2.0 * sigma * sigma)).exp()
            })
            .sum()
    })
}

fn render_ring(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let s = size as f64;
    let cy = rng.random_range(0.35 * s..0.65 * s);
    let cx = rng.random_range(0.35 * s..0.65 * s);
    let radius = rng.random_range(0.15 * s..0.3 * s);
    let width = rng.random_range(0.8..1.6) * s / 16.0;
    render(size, |r, c| {
        let d = ((r - cy).powi(2) + (c - cx).powi(2)).sqrt();
        (-(d - radius).powi(2) / (2.0 * width * width)).exp()
    })
}

fn render_bar(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let s = size as f64;
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let (sin, cos) = angle.sin_cos();
    let cy = rng.random_range(0.3 * s..0.7 * s);
    let cx = rng.random_range(0.3 * s..0.7 * s);
    let half_len = rng.random_range(0.25 * s..0.45 * s);
    let width = rng.random_range(0.8..1.8) * s / 16.0;
    render(size, |r, c| {
        let (dy, dx) = (r - cy, c - cx);
        let along = dx * cos + dy * sin;
        let across = -dx * sin + dy * cos;
        let fall = (along.abs() - half_len).max(0.0);
        (-(across * across + fall * fall) / (2.0 * width * width)).exp()
    })
}

/// Decoded image: `height x width x channels` values, row-major with
/// channels fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageData {
    pub shape: ImageShape,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
    Csv,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("pgm") => Ok(ImageFormat::Pgm),
            Some("png") => Ok(ImageFormat::Png),
            Some("csv") => Ok(ImageFormat::Csv),
            _ => Err(Error::invalid(format!(
                "cannot infer image format of {} (expected .pgm, .png or .csv)",
                path.display()
            ))),
        }
    }
}

/// Loads an image. 8-bit samples map to `[0, 1]` by `/255` (PGM divides by
/// its declared maxval); CSV values are taken as-is, one row per line.
pub fn load_image(path: &Path, format: ImageFormat) -> Result<ImageData> {
    match format {
        ImageFormat::Pgm => load_pgm(path),
        ImageFormat::Png => load_png(path),
        ImageFormat::Csv => load_csv(path),
    }
}

fn format_err(format: &'static str, path: &Path, detail: impl Into<String>) -> Error {
    Error::Format {
        format,
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn load_pgm(path: &Path) -> Result<ImageData> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::read(path, e))?;
    let err = |d: &str| format_err("PGM", path, d);
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(&bytes).ok_or_else(|| err("empty file"))?;
    let mut header = [0usize; 3];
    for h in &mut header {
        *h = token(&bytes)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err("malformed header"))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(err("invalid dimensions or maxval"));
    }
    let n = width * height;
    let samples: Vec<u32> = match magic.as_str() {
        "P2" => (0..n)
            .map(|_| token(&bytes).and_then(|t| t.parse().ok()))
            .collect::<Option<_>>()
            .ok_or_else(|| err("truncated or non-numeric pixel data"))?,
        "P5" => {
            let start = pos + 1;
            let wide = maxval > 255;
            let need = n * if wide { 2 } else { 1 };
            let raw = bytes
                .get(start..start + need)
                .ok_or_else(|| err("truncated pixel data"))?;
            if wide {
                raw.chunks(2).map(|c| u32::from(c[0]) << 8 | u32::from(c[1])).collect()
            } else {
                raw.iter().map(|&b| u32::from(b)).collect()
            }
        }
        other => return Err(err(&format!("unsupported magic {other:?}"))),
    };
    if samples.iter().any(|&s| s as usize > maxval) {
        return Err(err("sample exceeds maxval"));
    }
    Ok(ImageData {
        shape: ImageShape::gray(height, width),
        values: samples.iter().map(|&s| s as f64 / maxval as f64).collect(),
    })
}

fn load_png(path: &Path) -> Result<ImageData> {
    let err = |d: String| format_err("PNG", path, d);
    let decoder = png::Decoder::new(BufReader::new(File::open(path).map_err(|e| Error::read(path, e))?));
    let mut reader = decoder.read_info().map_err(|e| err(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| err("image too large".into()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| err(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(err(format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(err(format!("unsupported color type {other:?}"))),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut values = Vec::with_capacity(w * h * channels);
    for row in buf[..info.buffer_size()].chunks(info.line_size) {
        values.extend(row[..w * channels].iter().map(|&b| b as f64 / 255.0));
    }
    Ok(ImageData {
        shape: ImageShape {
            height: h,
            width: w,
            channels,
        },
        values,
    })
}

fn load_csv(path: &Path) -> Result<ImageData> {
    let err = |d: String| format_err("CSV", path, d);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for record in reader.records() {
        let record = record.map_err(|e| err(e.to_string()))?;
        if width.is_some_and(|w| w != record.len()) {
            return Err(err(format!("row {height} has {} columns, expected {}", record.len(), width.unwrap())));
        }
        width = Some(record.len());
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| err(format!("not a number: {field:?}")))?;
            values.push(v);
        }
        height += 1;
    }
    let width = width.ok_or_else(|| err("empty file".into()))?;
    Ok(ImageData {
        shape: ImageShape::gray(height, width),
        values,
    })
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn require_gray(img: &ImageData, what: &str) -> Result<()> {
    if img.shape.channels != 1 || img.values.len() != img.shape.len() {
        return Err(Error::invalid(format!("{what} writer needs a single-channel image")));
    }
    Ok(())
}

/// Writes a binary (P5) 8-bit PGM; values are clamped to `[0, 1]`.
pub fn save_pgm(path: &Path, img: &ImageData) -> Result<()> {
    require_gray(img, "PGM")?;
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", img.shape.width, img.shape.height)?;
    let bytes: Vec<u8> = img.values.iter().map(|&v| to_u8(v)).collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Writes an 8-bit grayscale PNG; values are clamped to `[0, 1]`.
pub fn save_png(path: &Path, img: &ImageData) -> Result<()> {
    require_gray(img, "PNG")?;
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, img.shape.width as u32, img.shape.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| Error::Io(std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(to_io)?;
    let bytes: Vec<u8> = img.values.iter().map(|&v| to_u8(v)).collect();
    writer.write_image_data(&bytes).map_err(to_io)?;
    writer.finish().map_err(to_io)?;
    Ok(())
}

/// Writes one image row per line using the shortest round-tripping decimal
/// form of each value.
pub fn save_csv(path: &Path, img: &ImageData) -> Result<()> {
    require_gray(img, "CSV")?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for row in img.values.chunks(img.shape.width) {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}
