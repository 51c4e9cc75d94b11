//! Descriptor of an image file, or of a few built-in patterns when no path
//! is given.
//!
//! `cargo run --example descriptor -- [image.pgm|png|csv] [zeta]`

use std::path::PathBuf;

use ms3d::data::{load_image, ImageFormat};
use ms3d::rgflow::{descriptor, RgFilter};

fn report(name: &str, raw: &[f64], dims: [usize; 3], zeta: usize) -> ms3d::Result<()> {
    for filter in [RgFilter::Kadanoff, RgFilter::gaussian()] {
        let p = descriptor(raw, dims, zeta, filter)?;
        let steps: Vec<String> = p.per_scale.iter().map(|v| format!("{v:.5}")).collect();
        println!("{name:<12} {filter:<16} total {:.5}  [{}]", p.total, steps.join(", "));
    }
    Ok(())
}

fn main() -> ms3d::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from);
    let zeta = args.next().map_or(2, |z| z.parse().expect("integer zeta"));
    if let Some(path) = path {
        let img = load_image(&path, ImageFormat::from_path(&path)?)?;
        return report(&path.display().to_string(), &img.values, img.shape.dims(), zeta);
    }
    let mut single = vec![0.0; 16];
    single[0] = 1.0;
    report("single cell", &single, [4, 4, 1], zeta)?;
    let stripes: Vec<f64> = (0..256).map(|i| ((i % 16) % 2) as f64).collect();
    report("stripes", &stripes, [16, 16, 1], zeta)?;
    let ramp: Vec<f64> = (0..256).map(|i| (i % 16) as f64 / 15.0).collect();
    report("ramp", &ramp, [16, 16, 1], zeta)?;
    report("constant", &[0.4; 256], [16, 16, 1], zeta)
}
