//! Patch statistics accumulate shard by shard and merge in any order.
//!
//! cargo run --release --example streaming_stats

use patch_ot::patch::unfold;
use patch_ot::pipeline::accumulate_latent;
use patch_ot::{LatentTensor, StatsAccumulator};

fn main() -> patch_ot::Result<()> {
    let latents: Vec<_> = (0..6)
        .map(|k| LatentTensor::from_fn(3, 12, 10, |c, y, x| ((c * 7 + y * 3 + x * k) % 11) as f64 / 11.0))
        .collect::<patch_ot::Result<_>>()?;

    let mut serial = StatsAccumulator::new(3 * 2 * 2);
    for l in &latents {
        serial.update(&unfold(l, 2)?)?;
    }

    let mut shards = latents.iter().map(|l| accumulate_latent(l, 2)).collect::<patch_ot::Result<Vec<_>>>()?;
    shards.reverse();
    let mut merged = StatsAccumulator::new(12);
    for s in &shards {
        merged.merge_from(s)?;
    }

    let (a, b) = (serial.finalize()?, merged.finalize()?);
    println!("{} rows of dimension {}", a.count(), a.dim());
    println!("max covariance difference serial vs merged: {:.2e}", (a.cov().matrix() - b.cov().matrix()).amax());
    Ok(())
}
