//! Two-dimensional Gaussian-mixture denoising with a closed-form posterior.
//! Compares the MMSE estimate, the posterior sampler and the transported MMSE
//! estimate, then prints the blend curve.
//!
//! cargo run --release --example gmm_demo [-- n]

use patch_ot::gmm::{run_demo, DemoConfig};

fn main() -> patch_ot::Result<()> {
    let mut cfg = DemoConfig::builtin();
    if let Some(n) = std::env::args().nth(1) {
        cfg.sampling.n = n.parse().map_err(|_| patch_ot::Error::Config(format!("bad sample count {n}")))?;
        cfg.sweep.w2_points = cfg.sweep.w2_points.min(cfg.sampling.n);
    }
    let out = run_demo(&cfg)?;
    let s = &out.summary;
    println!("n = {}, sigma = {}", s.n, s.sigma);
    println!("MSE  observation {:.4}  mmse {:.4}  posterior {:.4}  transported {:.4}", s.mse_observation, s.mse_mmse, s.mse_posterior, s.mse_hat0);
    for c in &s.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    print!("{}", patch_ot::metrics::curve_to_csv(&out.curve));
    Ok(())
}
