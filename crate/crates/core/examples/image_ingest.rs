//! Writes an image in every supported format, reads each back and compares
//! the descriptors.
//!
//! `cargo run --example image_ingest -- [out_dir]`

use std::path::PathBuf;

use ms3d::data::{load_image, save_csv, save_pgm, save_png, ImageData, ImageFormat, ImageShape};
use ms3d::rgflow::{descriptor, RgFilter};

fn main() -> ms3d::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let img = ImageData {
        shape: ImageShape::gray(20, 12),
        values: (0..240).map(|i| ((i * 37 % 255) as f64) / 255.0).collect(),
    };
    let original = descriptor(&img.values, img.shape.dims(), 2, RgFilter::Kadanoff)?.total;
    println!("in memory    {}x{}  total {original:.6}", img.shape.height, img.shape.width);
    for ext in ["pgm", "png", "csv"] {
        let path = dir.join(format!("ms3d-ingest.{ext}"));
        match ext {
            "pgm" => save_pgm(&path, &img)?,
            "png" => save_png(&path, &img)?,
            _ => save_csv(&path, &img)?,
        }
        let back = load_image(&path, ImageFormat::from_path(&path)?)?;
        let total = descriptor(&back.values, back.shape.dims(), 2, RgFilter::Kadanoff)?.total;
        println!("{:<12} {}x{}  total {total:.6}", path.display(), back.shape.height, back.shape.width);
    }
    Ok(())
}
