//! Walks an RG chain and shows the energy of each level and the
//! self-dissimilarity between neighbours.
//!
//! `cargo run --example rg_chain`

use ms3d::rgflow::{build_chain, inner_product, normalize, sd_step, Field2D, RgFilter};

fn main() -> ms3d::Result<()> {
    let field = normalize(&Field2D::from_fn(16, |r, c| {
        let (dr, dc) = (r as f64 - 5.5, c as f64 - 9.5);
        (-(dr * dr + dc * dc) / 8.0).exp()
    }))?;
    for filter in [RgFilter::Kadanoff, RgFilter::gaussian()] {
        let chain = build_chain(&field, 2, filter)?;
        println!("{filter}: {} steps", chain.steps());
        for (s, w) in chain.fields().windows(2).enumerate() {
            println!(
                "  {s}->{}: <s|s> {:.5}  <s|s+1> {:.5}  <s+1|s+1> {:.5}  sd {:.5}",
                s + 1,
                inner_product(&w[0], &w[0])?,
                inner_product(&w[0], &w[1])?,
                inner_product(&w[1], &w[1])?,
                sd_step(&w[0], &w[1])?
            );
        }
    }
    Ok(())
}
