//! Exact W2 between equal-size point clouds through optimal assignment,
//! compared against the Gaussian (Gelbrich) proxy.
//!
//! cargo run --release --example discrete_w2

use patch_ot::linalg::gelbrich_distance;
use patch_ot::metrics::{gaussian_fit, w2_exact_small};
use patch_ot::rng::stream_rng;
use patch_ot::SampleCloud;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> patch_ot::Result<()> {
    let n = 1000;
    let mut rng = stream_rng(5, 0, 0);
    let a: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
    // bimodal cloud with the same first two moments along x
    let b: Vec<f64> = (0..n)
        .flat_map(|i| {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            [side * 0.9 + 0.44 * rng.sample::<f64, _>(StandardNormal), rng.sample(StandardNormal)]
        })
        .collect();
    let (a, b) = (SampleCloud::new(2, a)?, SampleCloud::new(2, b)?);
    println!("exact W2 on {n} points: {:.4}", w2_exact_small(&a, &b)?);
    println!("Gelbrich of the Gaussian fits: {:.4}", gelbrich_distance(&gaussian_fit(&a)?, &gaussian_fit(&b)?)?);
    Ok(())
}
