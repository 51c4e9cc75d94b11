//! Aggregation of magnitude maps at a few thresholds and both
//! connectivities.
//!
//! `cargo run --example aggregation`

use ms3d::diagnostics::{field_aggregation, Connectivity};

fn main() -> ms3d::Result<()> {
    let blob: Vec<f64> = (0..256)
        .map(|i| {
            let (r, c) = ((i / 16) as f64 - 7.5, (i % 16) as f64 - 7.5);
            (-(r * r + c * c) / 10.0).exp()
        })
        .collect();
    let checker: Vec<f64> = (0..256).map(|i| ((i / 16 + i % 16) % 2) as f64).collect();
    let diagonal: Vec<f64> = (0..256).map(|i| if i / 16 == i % 16 { 1.0 } else { 0.05 }).collect();
    for (name, field) in [("blob", &blob), ("checker", &checker), ("diagonal", &diagonal)] {
        for tau in [0.1, 0.2, 0.5] {
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let a = field_aggregation(field, [16, 16, 1], tau, conn)?;
                println!("{name:<9} tau {tau:.1} {conn}-conn: n_agg {:>3} r_agg {:.4}", a.n_agg, a.r_agg);
            }
        }
    }
    Ok(())
}
