//! Discriminator loss on a filter-normalized 2-D slice around freshly
//! initialized weights, printed as a table.
//!
//! `cargo run --release --example loss_landscape -- [lambda]`

use ms3d::cli::{landscape_batches, landscape_loss};
use ms3d::data::{make_synthetic, SyntheticFamily};
use ms3d::diagnostics::{filter_normalized_directions, loss_slice};
use ms3d::gan::{GanModel, LossKind, ModelSpec};
use ms3d::model::Critic;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ms3d::Result<()> {
    let lambda: f64 = std::env::args().nth(1).map_or(0.0, |l| l.parse().expect("numeric lambda"));
    let data = make_synthetic(SyntheticFamily::GaussBlobs, 24, 16, 0)?;
    let model = GanModel::init(&ModelSpec::default(), 0)?;
    let (real, fake) = landscape_batches(&model, &data, 8, 1)?;
    let params = model.discriminator.params();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d1 = filter_normalized_directions(params, &mut rng);
    let d2 = filter_normalized_directions(params, &mut rng);
    let grid = loss_slice(params, |p| landscape_loss(&model, p, &real, &fake, LossKind::Ns, lambda), &d1, &d2, 9, 1.0)?;
    print!("{:>7}", "");
    for b in &grid.coords {
        print!("{b:>8.2}");
    }
    println!();
    for (i, a) in grid.coords.iter().enumerate() {
        print!("{a:>7.2}");
        for j in 0..grid.n {
            match grid.get(i, j) {
                Some(v) => print!("{v:>8.4}"),
                None => print!("{:>8}", "-"),
            }
        }
        println!();
    }
    Ok(())
}
