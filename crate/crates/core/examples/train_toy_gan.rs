//! Trains the toy GAN with and without the penalty and compares the
//! final-window descriptor and Fisher trace.
//!
//! `cargo run --release --example train_toy_gan -- [steps] [seed...]`

use ms3d::data::{make_synthetic, SyntheticFamily};
use ms3d::gan::{train, MetricRecord, NullSink, TrainConfig};

fn tail_mean(records: &[MetricRecord], f: impl Fn(&MetricRecord) -> f64) -> f64 {
    let k = (records.len() / 5).max(1);
    let tail = &records[records.len() - k..];
    tail.iter().map(f).sum::<f64>() / k as f64
}

fn main() -> ms3d::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let steps = args.first().copied().unwrap_or(2000) as usize;
    let seeds = if args.len() > 1 { args[1..].to_vec() } else { vec![0, 1, 2] };
    for seed in seeds {
        let data = make_synthetic(SyntheticFamily::GaussBlobs, 56, 16, seed)?;
        for lambda in [0.0, 10.0] {
            let cfg = TrainConfig {
                lambda,
                steps,
                seed,
                data_budget: Some(50),
                ..TrainConfig::default()
            };
            let start = std::time::Instant::now();
            let out = train(&cfg, &data, &mut NullSink)?;
            println!(
                "seed {seed} lambda {lambda:>4}: ms3d {:.5} fisher {:.4} r_agg {:.4} d_train {:.3} d_val {:.3} ({:.1?}, {:?})",
                tail_mean(&out.records, |r| r.ms3d),
                tail_mean(&out.records, |r| r.fisher),
                tail_mean(&out.records, |r| r.r_agg),
                tail_mean(&out.records, |r| r.d_train),
                tail_mean(&out.records, |r| r.d_val),
                start.elapsed(),
                out.status,
            );
        }
    }
    Ok(())
}
