//! A rank-deficient source cannot be mapped deterministically onto a full-rank
//! target. The operator then adds Gaussian noise; its output covariance still
//! matches the target.
//!
//! cargo run --release --example stochastic_fallback

use nalgebra::{DMatrix, DVector};
use patch_ot::linalg::mvg_transport;
use patch_ot::metrics::gaussian_fit;
use patch_ot::rng::stream_rng;
use patch_ot::{GaussianStats, SampleCloud, SymMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> patch_ot::Result<()> {
    let d = 4;
    // source lives on a 2-dimensional subspace
    let basis = DMatrix::from_row_slice(d, 2, &[1.0, 0.0, 0.5, 1.0, 0.0, -0.7, 0.3, 0.2]);
    let src = GaussianStats::new(DVector::zeros(d), SymMatrix::symmetrize(&(&basis * basis.transpose())), 1000)?;
    let tgt_cov = SymMatrix::from_row_slice(
        d,
        &[2.0, 0.3, 0.0, 0.1, 0.3, 1.0, 0.2, 0.0, 0.0, 0.2, 1.5, -0.4, 0.1, 0.0, -0.4, 0.8],
    )?;
    let tgt = GaussianStats::new(DVector::from_vec(vec![1.0, -1.0, 0.5, 0.0]), tgt_cov, 1000)?;

    let op = mvg_transport(&src, &tgt, None)?;
    println!("kind: {:?}, source rank 2 of {d}", op.kind());

    let n = 200_000;
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        let mut rng = stream_rng(3, 0, i as u64);
        let z = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &basis * z;
        data.extend(op.apply(x.as_slice(), &mut rng)?);
    }
    let fit = gaussian_fit(&SampleCloud::new(d, data)?)?;
    let rel = (fit.cov().matrix() - tgt.cov().matrix()).norm() / tgt.cov().matrix().norm();
    println!("empirical output covariance within {:.2}% of the target (Frobenius)", rel * 100.0);
    Ok(())
}
