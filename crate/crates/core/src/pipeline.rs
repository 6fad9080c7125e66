//! Fitting and applying patch transports, and walking the tradeoff curve.
//!
//! Training is two independent passes: one over natural-image latents and one
//! over restored latents. Each pass unfolds every latent into `c·p²`-dimensional
//! patch vectors and accumulates a single Gaussian. The transport between the
//! two Gaussians is then applied patch by patch to new restored latents and the
//! overlapping outputs are folded back by averaging.
//!
//! Interpolation happens on decoded images: `(1 − α)·x̂₀ + α·x*`, clamped to
//! `[0, 1]`, for `α ∈ [−1, 2]`.

use std::borrow::Borrow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::container::stats_fingerprint;
use crate::linalg::{self, gelbrich_distance, Certificate, TransportKind, TransportOperator};
use crate::metrics::{self, SampleCloud};
use crate::patch::{fold, unfold, LatentTensor, PatchBatch};
use crate::rng::{domain, stream_rng};
use crate::stats::{GaussianStats, StatsAccumulator};

/// Allowed interpolation range.
pub const ALPHA_MIN: f64 = -1.0;
pub const ALPHA_MAX: f64 = 2.0;

/// Default patch size in latent space.
pub const DEFAULT_PATCH_SIZE: usize = 3;

/// Flatten order of patch vectors. Part of the operator file format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlattenOrder {
    /// Channel outermost, then patch row, then patch column.
    ChannelRowColumn,
}

impl FlattenOrder {
    pub fn tag(self) -> u8 {
        match self {
            FlattenOrder::ChannelRowColumn => 0,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(FlattenOrder::ChannelRowColumn),
            t => Err(Error::Format(format!("unknown flatten order tag {t}"))),
        }
    }
}

/// Latent channel count and patch size an operator was fitted for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentGeometry {
    pub channels: usize,
    pub patch: usize,
}

impl LatentGeometry {
    pub fn dim(&self) -> usize {
        self.channels * self.patch * self.patch
    }
}

/// A transport operator together with everything needed to apply and audit it.
#[derive(Clone, Debug)]
pub struct FittedTransport {
    operator: TransportOperator,
    geometry: LatentGeometry,
    order: FlattenOrder,
    source: GaussianStats,
    target: GaussianStats,
    source_fingerprint: [u8; 32],
    target_fingerprint: [u8; 32],
    certificate: Certificate,
}

impl FittedTransport {
    /// Validates geometry and fingerprints and re-checks both certificates.
    pub fn from_parts(
        operator: TransportOperator,
        geometry: LatentGeometry,
        order: FlattenOrder,
        source: GaussianStats,
        target: GaussianStats,
    ) -> Result<Self> {
        if operator.dim() != geometry.dim() {
            return Err(Error::DimensionMismatch {
                expected: geometry.dim(),
                found: operator.dim(),
            });
        }
        let certificate = operator.verify(&source, &target)?;
        Ok(Self {
            source_fingerprint: stats_fingerprint(&source),
            target_fingerprint: stats_fingerprint(&target),
            operator,
            geometry,
            order,
            source,
            target,
            certificate,
        })
    }

    pub fn operator(&self) -> &TransportOperator {
        &self.operator
    }

    pub fn geometry(&self) -> LatentGeometry {
        self.geometry
    }

    pub fn flatten_order(&self) -> FlattenOrder {
        self.order
    }

    pub fn source(&self) -> &GaussianStats {
        &self.source
    }

    pub fn target(&self) -> &GaussianStats {
        &self.target
    }

    pub fn source_fingerprint(&self) -> &[u8; 32] {
        &self.source_fingerprint
    }

    pub fn target_fingerprint(&self) -> &[u8; 32] {
        &self.target_fingerprint
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    pub fn kind(&self) -> TransportKind {
        self.operator.kind()
    }
}

/// Decoded image with values in `[0, 1]`, usually 3 channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor(LatentTensor);

impl ImageTensor {
    pub fn new(tensor: LatentTensor) -> Self {
        Self(tensor)
    }

    /// Clamps every value into `[0, 1]`.
    pub fn clamped(tensor: LatentTensor) -> Self {
        let (c, h, w) = tensor.shape();
        let data = tensor.into_data().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self(LatentTensor::new(c, h, w, data).expect("shape unchanged"))
    }

    pub fn tensor(&self) -> &LatentTensor {
        &self.0
    }

    pub fn into_tensor(self) -> LatentTensor {
        self.0
    }
}

/// Patch statistics of one latent.
pub fn accumulate_latent(latent: &LatentTensor, p: usize) -> Result<StatsAccumulator> {
    let batch = unfold(latent, p)?;
    let mut acc = StatsAccumulator::new(batch.width());
    acc.update(&batch)?;
    Ok(acc)
}

/// Merges accumulators in iteration order.
pub fn merge_accumulators<I>(accs: I) -> Result<StatsAccumulator>
where
    I: IntoIterator<Item = StatsAccumulator>,
{
    let mut iter = accs.into_iter();
    let mut total = iter.next().ok_or_else(|| Error::Empty("no latents to fit".into()))?;
    for acc in iter {
        total.merge_from(&acc)?;
    }
    Ok(total)
}

fn check_channels(expected: &mut Option<usize>, latent: &LatentTensor) -> Result<()> {
    match *expected {
        Some(c) if c != latent.channels() => Err(Error::ChannelMismatch {
            expected: c,
            found: latent.channels(),
        }),
        Some(_) => Ok(()),
        None => {
            *expected = Some(latent.channels());
            Ok(())
        }
    }
}

/// Streams latents through one accumulator and finalizes. Latents may differ in
/// spatial size but must share their channel count.
pub fn fit_stats<I>(latents: I, p: usize) -> Result<GaussianStats>
where
    I: IntoIterator,
    I::Item: Borrow<LatentTensor>,
{
    let mut channels = None;
    let mut acc: Option<StatsAccumulator> = None;
    for latent in latents {
        let latent = latent.borrow();
        check_channels(&mut channels, latent)?;
        let batch = unfold(latent, p)?;
        acc.get_or_insert_with(|| StatsAccumulator::new(batch.width())).update(&batch)?;
    }
    acc.ok_or_else(|| Error::Empty("no latents to fit".into()))?.finalize()
}

/// Parallel variant of [`fit_stats`]: one accumulator per latent, merged in
/// input order. The result does not depend on the thread count.
pub fn fit_stats_sharded(latents: &[LatentTensor], p: usize) -> Result<GaussianStats> {
    let mut channels = None;
    for latent in latents {
        check_channels(&mut channels, latent)?;
    }
    let accs = latents
        .par_iter()
        .map(|l| accumulate_latent(l, p))
        .collect::<Result<Vec<_>>>()?;
    merge_accumulators(accs)?.finalize()
}

/// Builds and certifies the transport from restored-patch statistics `src`
/// to natural-patch statistics `tgt`.
pub fn build_transport(
    src: &GaussianStats,
    tgt: &GaussianStats,
    geometry: LatentGeometry,
    stab_eps: Option<f64>,
) -> Result<FittedTransport> {
    for s in [src, tgt] {
        if s.dim() != geometry.dim() {
            return Err(Error::DimensionMismatch {
                expected: geometry.dim(),
                found: s.dim(),
            });
        }
    }
    let operator = linalg::mvg_transport(src, tgt, stab_eps)?;
    FittedTransport::from_parts(
        operator,
        geometry,
        FlattenOrder::ChannelRowColumn,
        src.clone(),
        tgt.clone(),
    )
}

/// Applies the operator to every row of `batch` in place. Row `r` draws its
/// noise from stream `r` under `seed`.
pub fn transport_batch(batch: &mut PatchBatch, op: &TransportOperator, seed: u64) -> Result<()> {
    let d = batch.width();
    if d != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: d,
        });
    }
    batch.data_mut().par_chunks_mut(d).enumerate().for_each_init(
        || vec![0.0; d],
        |scratch, (r, row)| {
            op.apply_mean_into(row, scratch);
            if op.kind() == TransportKind::Stochastic {
                let mut rng = stream_rng(seed, domain::TRANSPORT, r as u64);
                op.add_noise(scratch, &mut rng);
            }
            row.copy_from_slice(scratch);
        },
    );
    Ok(())
}

/// Unfold, transport every patch, fold.
pub fn transport_latent(x: &LatentTensor, t: &FittedTransport, seed: u64) -> Result<LatentTensor> {
    if x.channels() != t.geometry.channels {
        return Err(Error::ChannelMismatch {
            expected: t.geometry.channels,
            found: x.channels(),
        });
    }
    let mut batch = unfold(x, t.geometry.patch)?;
    transport_batch(&mut batch, &t.operator, seed)?;
    fold(&batch)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(ALPHA_MIN..=ALPHA_MAX).contains(&alpha) {
        return Err(Error::Contract(format!(
            "alpha {alpha} outside [{ALPHA_MIN}, {ALPHA_MAX}]"
        )));
    }
    Ok(())
}

fn blend_values(x_star: &[f64], x_hat0: &[f64], alpha: f64) -> Vec<f64> {
    x_hat0
        .iter()
        .zip(x_star)
        .map(|(h, s)| (1.0 - alpha) * h + alpha * s)
        .collect()
}

/// `(1 − α)·x̂₀ + α·x*`, clamped to `[0, 1]`.
pub fn interpolate(x_star: &ImageTensor, x_hat0: &ImageTensor, alpha: f64) -> Result<ImageTensor> {
    check_alpha(alpha)?;
    let (a, b) = (x_star.tensor(), x_hat0.tensor());
    if a.shape() != b.shape() {
        return Err(Error::Contract(format!(
            "shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (c, h, w) = a.shape();
    let blended = LatentTensor::new(c, h, w, blend_values(a.data(), b.data(), alpha))?;
    Ok(ImageTensor::clamped(blended))
}

/// Blend of two clouds without clamping.
pub fn interpolate_cloud(x_star: &SampleCloud, x_hat0: &SampleCloud, alpha: f64) -> Result<SampleCloud> {
    check_alpha(alpha)?;
    if x_star.dim() != x_hat0.dim() || x_star.len() != x_hat0.len() {
        return Err(Error::Contract(format!(
            "cloud shape mismatch: {}x{} vs {}x{}",
            x_star.len(),
            x_star.dim(),
            x_hat0.len(),
            x_hat0.dim()
        )));
    }
    SampleCloud::new(x_star.dim(), blend_values(x_star.data(), x_hat0.data(), alpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexKind {
    Gelbrich,
    ExactW2,
}

impl IndexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::Gelbrich => "gelbrich",
            IndexKind::ExactW2 => "w2_exact",
        }
    }
}

/// One point of a perception/distortion curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DPPoint {
    pub alpha: f64,
    /// Mean MSE against ground truth, when ground truth is available.
    pub mse: Option<f64>,
    /// Mean per-item PSNR (peak 1), for image sweeps with ground truth.
    pub psnr: Option<f64>,
    pub perceptual_index: f64,
    pub index_kind: IndexKind,
}

/// Perceptual index for cloud sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudIndex {
    Gelbrich,
    /// Exact W2 on the first `points` points of each cloud.
    ExactW2 { points: usize },
}

fn sorted_alphas(alphas: &[f64]) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return Err(Error::Empty("alpha list is empty".into()));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// `α ∈ {−1, −0.8, …, 2}` (16 values).
pub fn default_alpha_grid() -> Vec<f64> {
    (0..16).map(|i| (2 * i as i32 - 10) as f64 / 10.0).collect()
}

/// Sweeps image sets. `x_star[i]`, `x_hat0[i]` and `truth[i]` refer to the same
/// scene; `reference` is an unpaired natural set. The perceptual index is the
/// Gelbrich distance between patch statistics (patch size `index_patch`) of the
/// blended set and of the reference set. Points come back in ascending α.
pub fn sweep_curve(
    x_star: &[ImageTensor],
    x_hat0: &[ImageTensor],
    truth: Option<&[ImageTensor]>,
    reference: &[ImageTensor],
    alphas: &[f64],
    index_patch: usize,
) -> Result<Vec<DPPoint>> {
    let alphas = sorted_alphas(alphas)?;
    if x_star.is_empty() {
        return Err(Error::Empty("no images to sweep".into()));
    }
    if x_star.len() != x_hat0.len() || truth.is_some_and(|t| t.len() != x_star.len()) {
        return Err(Error::Contract("x_star, x_hat0 and ground-truth sets must be aligned".into()));
    }
    let ref_stats = fit_stats(reference.iter().map(ImageTensor::tensor), index_patch)?;

    alphas
        .par_iter()
        .map(|&alpha| {
            let blended = x_star
                .iter()
                .zip(x_hat0)
                .map(|(s, h)| interpolate(s, h, alpha))
                .collect::<Result<Vec<_>>>()?;
            let (mse, psnr) = match truth {
                Some(truth) => {
                    let errs = blended
                        .iter()
                        .zip(truth)
                        .map(|(b, t)| metrics::mse(b, t))
                        .collect::<Result<Vec<_>>>()?;
                    let n = errs.len() as f64;
                    let mean_mse = errs.iter().sum::<f64>() / n;
                    let mean_psnr = errs.iter().map(|&e| metrics::psnr_from_mse(e, 1.0)).sum::<f64>() / n;
                    (Some(mean_mse), Some(mean_psnr))
                }
                None => (None, None),
            };
            let stats = fit_stats(blended.iter().map(ImageTensor::tensor), index_patch)?;
            Ok(DPPoint {
                alpha,
                mse,
                psnr,
                perceptual_index: gelbrich_distance(&stats, &ref_stats)?,
                index_kind: IndexKind::Gelbrich,
            })
        })
        .collect()
}

/// Sweeps point clouds (no clamping, no PSNR). Points come back in ascending α.
pub fn sweep_clouds(
    x_star: &SampleCloud,
    x_hat0: &SampleCloud,
    truth: Option<&SampleCloud>,
    reference: &SampleCloud,
    alphas: &[f64],
    index: CloudIndex,
) -> Result<Vec<DPPoint>> {
    let alphas = sorted_alphas(alphas)?;
    let ref_stats = metrics::gaussian_fit(reference)?;
    alphas
        .par_iter()
        .map(|&alpha| {
            let blended = interpolate_cloud(x_star, x_hat0, alpha)?;
            let mse = truth.map(|t| metrics::mse(&blended, t)).transpose()?;
            let (perceptual_index, index_kind) = match index {
                CloudIndex::Gelbrich => (
                    gelbrich_distance(&metrics::gaussian_fit(&blended)?, &ref_stats)?,
                    IndexKind::Gelbrich,
                ),
                CloudIndex::ExactW2 { points } => (
                    metrics::w2_exact_small(&blended.head(points), &reference.head(points))?,
                    IndexKind::ExactW2,
                ),
            };
            Ok(DPPoint {
                alpha,
                mse,
                psnr: None,
                perceptual_index,
                index_kind,
            })
        })
        .collect()
}
