//! Writes a latent to `.npy`, reads it back and saves/loads fitted statistics.
//!
//! cargo run --release --example npy_roundtrip

use patch_ot::io::container::{load_stats, save_stats};
use patch_ot::io::npy::{read_npy, write_npy};
use patch_ot::io::Dtype;
use patch_ot::pipeline::fit_stats;
use patch_ot::LatentTensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let x = LatentTensor::from_fn(4, 8, 8, |c, y, x| (c as f64 - 1.5) * 0.25 + (y * 8 + x) as f64 / 64.0)?;

    for dtype in [Dtype::F64, Dtype::F32] {
        let path = dir.path().join(format!("latent_{dtype:?}.npy"));
        write_npy(&path, &x, dtype)?;
        let back = read_npy(&path)?;
        let err = x.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{dtype:?}: shape {:?}, max round-trip error {err:.1e}", back.shape());
    }

    let stats = fit_stats([x].iter(), 3)?;
    let path = dir.path().join("stats.bin");
    save_stats(&path, &stats)?;
    let back = load_stats(&path)?;
    println!("statistics round trip exact: {}", back == stats);
    Ok(())
}
