//! Blends a smooth estimate with a transported one and prints the
//! perception/distortion curve.
//!
//! cargo run --release --example pd_sweep

use patch_ot::pipeline::{default_alpha_grid, sweep_curve};
use patch_ot::rng::stream_rng;
use patch_ot::{ImageTensor, LatentTensor};
use rand::Rng;
use rand_distr::StandardNormal;

fn textured(index: u64, amplitude: f64, seed: u64) -> ImageTensor {
    let mut rng = stream_rng(seed, 0, index);
    let noise: Vec<f64> = (0..3 * 24 * 24).map(|_| rng.sample(StandardNormal)).collect();
    let t = LatentTensor::from_fn(3, 24, 24, |c, y, x| {
        let base = 0.5 + 0.2 * ((x + index as usize) as f64 / 4.0).sin() * ((y + c) as f64 / 5.0).cos();
        base + amplitude * noise[c * 576 + y * 24 + x]
    })
    .unwrap();
    ImageTensor::clamped(t)
}

fn main() -> patch_ot::Result<()> {
    let truth: Vec<_> = (0..8).map(|i| textured(i, 0.08, 1)).collect();
    let reference: Vec<_> = (100..108).map(|i| textured(i, 0.08, 2)).collect();
    // smooth estimate, and a sharper one with texture that does not match the truth
    let x_star: Vec<_> = (0..8).map(|i| textured(i, 0.0, 1)).collect();
    let x_hat0: Vec<_> = (0..8).map(|i| textured(i, 0.08, 3)).collect();

    let curve = sweep_curve(&x_star, &x_hat0, Some(&truth), &reference, &default_alpha_grid(), 3)?;
    print!("{}", patch_ot::metrics::curve_to_csv(&curve));
    Ok(())
}
