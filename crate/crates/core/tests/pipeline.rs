use nalgebra::{DMatrix, DVector};
use patch_ot::linalg::gelbrich_distance;
use patch_ot::patch::coverage_counts;
use patch_ot::pipeline::{build_transport, fit_stats, transport_latent, FlattenOrder, LatentGeometry};
use patch_ot::rng::stream_rng;
use patch_ot::{FittedTransport, GaussianStats, LatentTensor, TransportKind, TransportOperator};
use rand::Rng;
use rand_distr::StandardNormal;

// symmetric positive definite, so the per-pixel map is itself an OT map
const MIX: [[f64; 4]; 4] = [
    [1.4, 0.3, 0.0, 0.1],
    [0.3, 0.9, 0.2, 0.0],
    [0.0, 0.2, 1.1, -0.3],
    [0.1, 0.0, -0.3, 0.7],
];

fn white(seed: u64, index: u64, c: usize, size: usize) -> LatentTensor {
    let mut rng = stream_rng(seed, 0, index);
    LatentTensor::new(c, size, size, (0..c * size * size).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn blurred(seed: u64, index: u64, size: usize) -> LatentTensor {
    let (c, pad) = (4, size + 2);
    let mut rng = stream_rng(seed, 0, index);
    let white: Vec<f64> = (0..c * pad * pad).map(|_| rng.sample(StandardNormal)).collect();
    LatentTensor::from_fn(c, size, size, |ch, y, x| {
        let mut acc = 0.0;
        for dy in 0..3 {
            for dx in 0..3 {
                acc += white[ch * pad * pad + (y + dy) * pad + x + dx];
            }
        }
        acc / 3.0
    })
    .unwrap()
}

fn mixed(x: &LatentTensor) -> LatentTensor {
    LatentTensor::from_fn(4, x.height(), x.width(), |ch, y, xx| {
        0.5 - 0.2 * ch as f64 + (0..4).map(|j| MIX[ch][j] * x.get(j, y, xx)).sum::<f64>()
    })
    .unwrap()
}

fn max_diff(a: &LatentTensor, b: &LatentTensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

#[test]
fn constant_latent_has_zero_covariance() {
    let stats = fit_stats([LatentTensor::filled(2, 5, 6, 0.75)].iter(), 2).unwrap();
    assert_eq!(stats.dim(), 8);
    assert!(stats.mean().iter().all(|&m| (m - 0.75).abs() <= 1e-12));
    assert!(stats.cov().max_abs() <= 1e-12);
}

#[test]
fn white_noise_pixels_fit_identity() {
    let latents: Vec<_> = (0..10).map(|i| white(4, i, 4, 64)).collect();
    let stats = fit_stats(latents.iter(), 1).unwrap();
    assert!(stats.mean().amax() <= 0.03);
    assert!((stats.cov().matrix() - DMatrix::identity(4, 4)).amax() <= 0.03);
}

#[test]
fn few_shot_fit_has_patch_dimension() {
    let nat: Vec<_> = (0..10).map(|i| mixed(&blurred(1, i, 32))).collect();
    let res: Vec<_> = (0..10).map(|i| blurred(2, i, 32)).collect();
    for set in [&nat, &res] {
        let s = fit_stats(set.iter(), 3).unwrap();
        assert_eq!(s.dim(), 36);
        assert_eq!(s.count(), 10 * 30 * 30);
    }
}

#[test]
fn equal_stats_give_identity() {
    let latents: Vec<_> = (0..10).map(|i| blurred(3, i, 16)).collect();
    let s = fit_stats(latents.iter(), 3).unwrap();
    let geometry = LatentGeometry { channels: 4, patch: 3 };
    let t = build_transport(&s, &s, geometry, None).unwrap();
    assert_eq!(t.kind(), TransportKind::Deterministic);
    assert_eq!(t.operator(), &TransportOperator::identity(36));
    let moved = transport_latent(&latents[0], &t, 0).unwrap();
    assert!(max_diff(&moved, &latents[0]) <= 1e-12);
}

#[test]
fn disjoint_halves_are_close_to_identity() {
    let latents: Vec<_> = (0..40).map(|i| mixed(&blurred(5, i, 32))).collect();
    let a = fit_stats(latents[..20].iter(), 3).unwrap();
    let b = fit_stats(latents[20..].iter(), 3).unwrap();
    let t = build_transport(&a, &b, LatentGeometry { channels: 4, patch: 3 }, None).unwrap();
    let dev = (t.operator().linear() - DMatrix::identity(36, 36)).norm();
    eprintln!("disjoint halves: |A - I|_F = {dev:.4}");
    assert!(dev.is_finite());
}

#[test]
fn large_patches_from_few_images_fall_back_to_stochastic() {
    // 10 images × 36 patches < 900 dimensions, so the source is rank deficient
    let geometry = LatentGeometry { channels: 4, patch: 15 };
    let res: Vec<_> = (0..10).map(|i| blurred(6, i, 20)).collect();
    let nat: Vec<_> = (0..40).map(|i| mixed(&blurred(7, i, 48))).collect();
    let src = fit_stats(res.iter(), 15).unwrap();
    let tgt = fit_stats(nat.iter(), 15).unwrap();
    let t = build_transport(&src, &tgt, geometry, None).unwrap();
    assert_eq!(t.kind(), TransportKind::Stochastic);
    let a = transport_latent(&res[0], &t, 9).unwrap();
    assert_eq!(a, transport_latent(&res[0], &t, 9).unwrap());
    assert_ne!(a, transport_latent(&res[0], &t, 10).unwrap());
}

#[test]
fn pure_shift_moves_pixels_by_covering_average() {
    let (c, p, h, w) = (2, 3, 7, 9);
    let d = c * p * p;
    let delta: Vec<f64> = (0..d).map(|k| (k as f64 * 0.37).sin()).collect();
    let latents: Vec<_> = (0..4).map(|i| white(8, i, c, 12)).collect();
    let src = fit_stats(latents.iter(), p).unwrap();
    let tgt = GaussianStats::new(src.mean() + DVector::from_vec(delta.clone()), src.cov().clone(), src.count()).unwrap();
    let op = TransportOperator::from_parts(DMatrix::identity(d, d), DVector::from_vec(delta.clone()), None, 0.0).unwrap();
    let t = FittedTransport::from_parts(op, LatentGeometry { channels: c, patch: p }, FlattenOrder::ChannelRowColumn, src, tgt)
        .unwrap();

    let x = LatentTensor::from_fn(c, h, w, |ch, y, xx| (ch * 31 + y * 7 + xx) as f64 * 0.01).unwrap();
    let moved = transport_latent(&x, &t, 0).unwrap();
    let counts = coverage_counts(h, w, p).unwrap();
    for ch in 0..c {
        for y in 0..h {
            for xx in 0..w {
                let mut sum = 0.0;
                for dy in 0..p {
                    for dx in 0..p {
                        if y >= dy && xx >= dx && y - dy + p <= h && xx - dx + p <= w {
                            sum += delta[ch * p * p + dy * p + dx];
                        }
                    }
                }
                let expected = x.get(ch, y, xx) + sum / counts[y * w + xx] as f64;
                assert!((moved.get(ch, y, xx) - expected).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn transport_matches_patch_statistics() {
    let geometry = LatentGeometry { channels: 4, patch: 3 };
    let res: Vec<_> = (0..40).map(|i| blurred(11, i, 32)).collect();
    let nat: Vec<_> = (0..40).map(|i| mixed(&blurred(12, i, 32))).collect();
    let src = fit_stats(res.iter(), 3).unwrap();
    let tgt = fit_stats(nat.iter(), 3).unwrap();
    let t = build_transport(&src, &tgt, geometry, None).unwrap();
    let moved: Vec<_> = res.iter().map(|x| transport_latent(x, &t, 0).unwrap()).collect();
    let before = gelbrich_distance(&src, &tgt).unwrap();
    let after = gelbrich_distance(&fit_stats(moved.iter(), 3).unwrap(), &tgt).unwrap();
    assert!(after <= 0.1 * before, "before {before:.4}, after {after:.4}");
}
