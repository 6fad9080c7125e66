//! Two-dimensional Gaussian-mixture denoising experiment.
//!
//! Clean points `x` come from a mixture, observations are `y = x + σ·n`. For a
//! mixture prior the posterior `p(x | y)` is again a mixture with closed-form
//! weights, means and covariances, which gives the MMSE estimator `x*` and an
//! exact posterior sampler. Transporting `x*` onto the distribution of `x` with
//! the Gaussian transport yields `x̂₀`, and blending the two traces the
//! perception/distortion curve.

use std::path::Path;

use nalgebra::{Cholesky, Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::linalg::{gelbrich_distance, mvg_transport, TransportKind};
use crate::metrics::{self, curve_to_csv, gaussian_fit, w2_exact_small, SampleCloud};
use crate::pipeline::{sweep_clouds, CloudIndex, DPPoint};
use crate::rng::{domain, stream_rng};

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    chol: Matrix2<f64>,
}

impl GmmComponent {
    pub fn new(weight: f64, mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let cov = Matrix2::new(cov[0][0], cov[0][1], cov[1][0], cov[1][1]);
        if (cov[(0, 1)] - cov[(1, 0)]).abs() > 1e-12 * cov.amax() {
            return Err(Error::Config("component covariance is not symmetric".into()));
        }
        let chol = Cholesky::new(cov)
            .ok_or_else(|| Error::Config("component covariance is not positive definite".into()))?
            .l();
        Ok(Self {
            weight,
            mean: Vector2::new(mean[0], mean[1]),
            cov,
            chol,
        })
    }
}

/// Mixture prior on `R²`.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel {
    components: Vec<GmmComponent>,
}

impl GmmModel {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        if components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(Error::Config("mixture weights must be nonnegative".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Config(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    /// Overall mean and covariance of the mixture.
    pub fn moments(&self) -> (Vector2<f64>, Matrix2<f64>) {
        let mean: Vector2<f64> = self.components.iter().map(|c| c.mean * c.weight).sum();
        let cov = self
            .components
            .iter()
            .map(|c| {
                let d = c.mean - mean;
                (c.cov + d * d.transpose()) * c.weight
            })
            .sum();
        (mean, cov)
    }
}

fn pick<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, w) in weights.enumerate() {
        if w > 0.0 {
            last = k;
        }
        acc += w;
        if u < acc && w > 0.0 {
            return k;
        }
    }
    last
}

fn gaussian2<R: Rng + ?Sized>(mean: &Vector2<f64>, chol: &Matrix2<f64>, rng: &mut R) -> Vector2<f64> {
    let z = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    mean + chol * z
}

fn cloud_from(points: Vec<Vector2<f64>>) -> Result<SampleCloud> {
    SampleCloud::new(2, points.iter().flat_map(|p| [p[0], p[1]]).collect())
}

fn to_vec2(p: &[f64]) -> Vector2<f64> {
    Vector2::new(p[0], p[1])
}

/// `n` i.i.d. draws; point `i` uses its own stream under `seed`.
pub fn gmm_sample(model: &GmmModel, n: usize, seed: u64) -> Result<SampleCloud> {
    if n == 0 {
        return Err(Error::Contract("sample count must be positive".into()));
    }
    let points = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, domain::GMM_SOURCE, i as u64);
            let c = &model.components[pick(model.components.iter().map(|c| c.weight), &mut rng)];
            gaussian2(&c.mean, &c.chol, &mut rng)
        })
        .collect();
    cloud_from(points)
}

/// `y = x + N(0, σ² I)` per point.
pub fn degrade_awgn(x: &SampleCloud, sigma: f64, seed: u64) -> Result<SampleCloud> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Contract(format!("noise level must be positive, got {sigma}")));
    }
    let data = x
        .data()
        .par_chunks(x.dim())
        .enumerate()
        .flat_map_iter(|(i, p)| {
            let mut rng = stream_rng(seed, domain::GMM_NOISE, i as u64);
            p.iter()
                .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<_>>()
        })
        .collect();
    SampleCloud::new(x.dim(), data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorComponent {
    pub weight: f64,
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

/// `p(x | y)` for one observation.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorGmm {
    pub components: Vec<PosteriorComponent>,
}

/// Closed-form posterior of the mixture prior under additive white noise:
/// `w'_k ∝ w_k N(y; μ_k, Σ_k + σ²I)`, `m'_k = μ_k + Σ_k (Σ_k + σ²I)⁻¹ (y − μ_k)`,
/// `S'_k = σ² Σ_k (Σ_k + σ²I)⁻¹`.
pub fn posterior(model: &GmmModel, y: [f64; 2], sigma: f64) -> Result<PosteriorGmm> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Contract(format!("noise level must be positive, got {sigma}")));
    }
    let y = Vector2::new(y[0], y[1]);
    let s2 = sigma * sigma;
    let mut log_w = Vec::with_capacity(model.components.len());
    let mut parts = Vec::with_capacity(model.components.len());
    for c in &model.components {
        let marginal = c.cov + Matrix2::identity() * s2;
        let inv = marginal
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular marginal covariance".into()))?;
        let r = y - c.mean;
        let maha = (r.transpose() * inv * r)[(0, 0)];
        let lw = if c.weight > 0.0 {
            c.weight.ln() - 0.5 * maha - 0.5 * marginal.determinant().ln()
        } else {
            f64::NEG_INFINITY
        };
        log_w.push(lw);
        let gain = c.cov * inv;
        let cov = gain * s2;
        parts.push((c.mean + gain * r, (cov + cov.transpose()) * 0.5));
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    Ok(PosteriorGmm {
        components: unnorm
            .into_iter()
            .zip(parts)
            .map(|(w, (mean, cov))| PosteriorComponent {
                weight: w / total,
                mean,
                cov,
            })
            .collect(),
    })
}

/// Posterior mean `Σ_k w'_k m'_k`.
pub fn mmse_estimate(post: &PosteriorGmm) -> [f64; 2] {
    let m: Vector2<f64> = post.components.iter().map(|c| c.mean * c.weight).sum();
    [m[0], m[1]]
}

/// Mean of the most probable posterior component.
pub fn hard_assignment_estimate(post: &PosteriorGmm) -> [f64; 2] {
    let best = post
        .components
        .iter()
        .max_by(|a, b| a.weight.total_cmp(&b.weight))
        .expect("posterior has components");
    [best.mean[0], best.mean[1]]
}

/// Best affine estimator of `x` from `y` using only the mixture's first two moments.
pub fn global_lmmse_estimate(model: &GmmModel, y: [f64; 2], sigma: f64) -> [f64; 2] {
    let (mean, cov) = model.moments();
    let gain = cov * (cov + Matrix2::identity() * sigma * sigma).try_inverse().expect("PD");
    let m = mean + gain * (Vector2::new(y[0], y[1]) - mean);
    [m[0], m[1]]
}

/// One draw from `p(x | y)`.
pub fn posterior_sample<R: Rng + ?Sized>(post: &PosteriorGmm, rng: &mut R) -> [f64; 2] {
    let c = &post.components[pick(post.components.iter().map(|c| c.weight), rng)];
    let chol = Cholesky::new(c.cov).map(|ch| ch.l()).unwrap_or_else(Matrix2::zeros);
    let v = gaussian2(&c.mean, &chol, rng);
    [v[0], v[1]]
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub components: Vec<ComponentConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub n: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    /// Points used for the exact W2 index.
    pub w2_points: usize,
}

/// Demo configuration, read from TOML.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub model: ModelConfig,
    pub noise: NoiseConfig,
    pub sampling: SamplingConfig,
    pub sweep: SweepConfig,
}

impl DemoConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DemoConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Default configuration shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml(include_str!("../configs/gmm_default.toml")).expect("bundled config is valid")
    }

    pub fn model(&self) -> Result<GmmModel> {
        GmmModel::new(
            self.model
                .components
                .iter()
                .map(|c| GmmComponent::new(c.weight, c.mean, c.cov))
                .collect::<Result<_>>()?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        if !(self.noise.sigma > 0.0 && self.noise.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.noise.sigma)));
        }
        if self.sampling.n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        if self.sweep.alphas.is_empty() {
            return Err(Error::Config("alpha grid is empty".into()));
        }
        if let Some(a) = self.sweep.alphas.iter().find(|a| !(-1.0..=2.0).contains(*a)) {
            return Err(Error::Config(format!("alpha {a} outside [-1, 2]")));
        }
        if self.sweep.w2_points == 0 || self.sweep.w2_points > self.sampling.n.min(metrics::W2_EXACT_MAX_POINTS) {
            return Err(Error::Config(format!(
                "w2_points must be in 1..={}",
                self.sampling.n.min(metrics::W2_EXACT_MAX_POINTS)
            )));
        }
        Ok(())
    }
}

/// Acceptance thresholds for the demo summary.
pub mod thresholds {
    pub const POSTERIOR_RATIO: f64 = 2.0;
    pub const POSTERIOR_RATIO_TOL: f64 = 0.1;
    pub const HAT0_ENVELOPE: f64 = 2.1;
    pub const GELBRICH_REDUCTION: f64 = 0.01;
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoSummary {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub transport_kind: String,
    pub mse_observation: f64,
    pub mse_mmse: f64,
    pub mse_posterior: f64,
    pub mse_hat0: f64,
    pub mse_hard_assignment: f64,
    pub mse_global_lmmse: f64,
    pub posterior_to_mmse_ratio: f64,
    pub gelbrich_mmse: f64,
    pub gelbrich_hat0: f64,
    pub gelbrich_posterior: f64,
    pub w2_points: usize,
    pub w2_mmse: f64,
    pub w2_hat0: f64,
    pub w2_posterior: f64,
    pub checks: Vec<Check>,
}

impl DemoSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Everything the demo produces.
#[derive(Clone, Debug)]
pub struct DemoOutput {
    pub x: SampleCloud,
    pub y: SampleCloud,
    pub x_star: SampleCloud,
    pub x_posterior: SampleCloud,
    pub x_hat0: SampleCloud,
    pub curve: Vec<DPPoint>,
    pub summary: DemoSummary,
}

fn monotone(points: &[&DPPoint], key: impl Fn(&DPPoint) -> f64, nonincreasing: bool) -> bool {
    points.windows(2).all(|w| {
        let (a, b) = (key(w[0]), key(w[1]));
        if nonincreasing {
            b <= a
        } else {
            b >= a
        }
    })
}

/// Runs the full experiment.
pub fn run_demo(config: &DemoConfig) -> Result<DemoOutput> {
    config.validate()?;
    let model = config.model()?;
    let (n, sigma, seed) = (config.sampling.n, config.noise.sigma, config.sampling.seed);

    let x = gmm_sample(&model, n, seed)?;
    let y = degrade_awgn(&x, sigma, seed)?;

    let per_point = y
        .data()
        .par_chunks(2)
        .enumerate()
        .map(|(i, yi)| {
            let yi = [yi[0], yi[1]];
            let post = posterior(&model, yi, sigma)?;
            let mut rng = stream_rng(seed, domain::GMM_POSTERIOR, i as u64);
            Ok([
                mmse_estimate(&post),
                posterior_sample(&post, &mut rng),
                hard_assignment_estimate(&post),
                global_lmmse_estimate(&model, yi, sigma),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let column = |k: usize| SampleCloud::new(2, per_point.iter().flat_map(|r| r[k]).collect());
    let x_star = column(0)?;
    let x_posterior = column(1)?;
    let x_hard = column(2)?;
    let x_lmmse = column(3)?;

    let stats_x = gaussian_fit(&x)?;
    let stats_star = gaussian_fit(&x_star)?;
    let op = mvg_transport(&stats_star, &stats_x, None)?;
    op.verify(&stats_star, &stats_x)?;
    let hat0 = x_star
        .data()
        .par_chunks(2)
        .enumerate()
        .map(|(i, p)| {
            let mut rng = stream_rng(seed, domain::TRANSPORT, i as u64);
            op.apply(p, &mut rng).map(|v| to_vec2(&v))
        })
        .collect::<Result<Vec<_>>>()?;
    let x_hat0 = cloud_from(hat0)?;

    let mse_mmse = metrics::mse(&x_star, &x)?;
    let mse_posterior = metrics::mse(&x_posterior, &x)?;
    let mse_hat0 = metrics::mse(&x_hat0, &x)?;
    let ratio = mse_posterior / mse_mmse;

    let gelbrich_mmse = gelbrich_distance(&stats_star, &stats_x)?;
    let gelbrich_hat0 = gelbrich_distance(&gaussian_fit(&x_hat0)?, &stats_x)?;
    let gelbrich_posterior = gelbrich_distance(&gaussian_fit(&x_posterior)?, &stats_x)?;

    let m = config.sweep.w2_points;
    let x_ref = x.head(m);
    let w2_mmse = w2_exact_small(&x_star.head(m), &x_ref)?;
    let w2_hat0 = w2_exact_small(&x_hat0.head(m), &x_ref)?;
    let w2_posterior = w2_exact_small(&x_posterior.head(m), &x_ref)?;

    let curve = sweep_clouds(
        &x_star,
        &x_hat0,
        Some(&x),
        &x_ref,
        &config.sweep.alphas,
        CloudIndex::ExactW2 { points: m },
    )?;
    let unit: Vec<&DPPoint> = curve.iter().filter(|p| (0.0..=1.0).contains(&p.alpha)).collect();
    let mse_monotone = monotone(&unit, |p| p.mse.unwrap_or(f64::NAN), true);
    let index_monotone = monotone(&unit, |p| p.perceptual_index, false);

    use thresholds::*;
    let checks = vec![
        Check {
            name: "posterior_mse_ratio",
            passed: (ratio - POSTERIOR_RATIO).abs() <= POSTERIOR_RATIO_TOL,
            detail: format!("MSE(posterior)/MSE(mmse) = {ratio:.4}, expected {POSTERIOR_RATIO} ± {POSTERIOR_RATIO_TOL}"),
        },
        Check {
            name: "hat0_mse_envelope",
            passed: mse_hat0 <= HAT0_ENVELOPE * mse_mmse,
            detail: format!(
                "MSE(hat0) = {mse_hat0:.6}, bound {HAT0_ENVELOPE}·MSE(mmse) = {:.6}",
                HAT0_ENVELOPE * mse_mmse
            ),
        },
        Check {
            name: "moment_matching",
            passed: gelbrich_hat0 <= GELBRICH_REDUCTION * gelbrich_mmse,
            detail: format!(
                "Gelbrich(hat0, x) = {gelbrich_hat0:.3e}, bound {GELBRICH_REDUCTION}·Gelbrich(mmse, x) = {:.3e}",
                GELBRICH_REDUCTION * gelbrich_mmse
            ),
        },
        Check {
            name: "w2_improvement",
            passed: w2_hat0 < w2_mmse,
            detail: format!("W2(hat0, x) = {w2_hat0:.5} vs W2(mmse, x) = {w2_mmse:.5} on {m} points"),
        },
        Check {
            name: "curve_shape",
            passed: mse_monotone && index_monotone,
            detail: format!("MSE nonincreasing in alpha: {mse_monotone}; W2 nondecreasing in alpha: {index_monotone}"),
        },
    ];

    let summary = DemoSummary {
        n,
        sigma,
        seed,
        transport_kind: match op.kind() {
            TransportKind::Deterministic => "deterministic".into(),
            TransportKind::Stochastic => "stochastic".into(),
        },
        mse_observation: metrics::mse(&y, &x)?,
        mse_mmse,
        mse_posterior,
        mse_hat0,
        mse_hard_assignment: metrics::mse(&x_hard, &x)?,
        mse_global_lmmse: metrics::mse(&x_lmmse, &x)?,
        posterior_to_mmse_ratio: ratio,
        gelbrich_mmse,
        gelbrich_hat0,
        gelbrich_posterior,
        w2_points: m,
        w2_mmse,
        w2_hat0,
        w2_posterior,
        checks,
    };

    Ok(DemoOutput {
        x,
        y,
        x_star,
        x_posterior,
        x_hat0,
        curve,
        summary,
    })
}

/// Cloud as CSV with an `x,y` header.
pub fn cloud_to_csv(cloud: &SampleCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 40 + 4);
    out.push_str("x,y\n");
    for p in cloud.points() {
        out.push_str(&format!("{},{}\n", p[0], p[1]));
    }
    out
}

/// Writes the clouds, `curve.csv` and `summary.json` into `dir`.
pub fn write_demo(dir: impl AsRef<Path>, out: &DemoOutput) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, cloud) in [
        ("x.csv", &out.x),
        ("y.csv", &out.y),
        ("x_star.csv", &out.x_star),
        ("posterior.csv", &out.x_posterior),
        ("x_hat0.csv", &out.x_hat0),
    ] {
        write_atomic(&dir.join(name), cloud_to_csv(cloud).as_bytes())?;
    }
    write_atomic(&dir.join("curve.csv"), curve_to_csv(&out.curve).as_bytes())?;
    let json = serde_json::to_string_pretty(&out.summary).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&dir.join("summary.json"), json.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_model() -> GmmModel {
        GmmModel::new(vec![GmmComponent::new(1.0, [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap()]).unwrap()
    }

    #[test]
    fn single_component_conditioning() {
        let post = posterior(&unit_model(), [0.8, -0.4], 1.0).unwrap();
        assert_eq!(post.components.len(), 1);
        let c = &post.components[0];
        assert!((c.weight - 1.0).abs() < 1e-15);
        assert!((c.mean - Vector2::new(0.4, -0.2)).amax() < 1e-15);
        assert!((c.cov - Matrix2::identity() * 0.5).amax() < 1e-15);
        assert_eq!(mmse_estimate(&post), [c.mean[0], c.mean[1]]);
    }

    #[test]
    fn far_component_dominates() {
        let model = GmmModel::new(vec![
            GmmComponent::new(0.5, [-50.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap(),
            GmmComponent::new(0.5, [50.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap(),
        ])
        .unwrap();
        let post = posterior(&model, [50.0, 0.0], 0.5).unwrap();
        assert!(post.components[1].weight > 1.0 - 1e-12);
    }

    #[test]
    fn symmetric_posterior_mean_is_midpoint() {
        let post = PosteriorGmm {
            components: vec![
                PosteriorComponent {
                    weight: 0.5,
                    mean: Vector2::new(-1.0, 2.0),
                    cov: Matrix2::identity(),
                },
                PosteriorComponent {
                    weight: 0.5,
                    mean: Vector2::new(1.0, -2.0),
                    cov: Matrix2::identity(),
                },
            ],
        };
        assert_eq!(mmse_estimate(&post), [0.0, 0.0]);
    }

    #[test]
    fn posterior_covariance_is_dominated_by_prior() {
        let cfg = DemoConfig::builtin();
        let model = cfg.model().unwrap();
        let post = posterior(&model, [0.3, -0.7], 0.8).unwrap();
        let total: f64 = post.components.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (pc, c) in post.components.iter().zip(model.components()) {
            assert!(Cholesky::new(pc.cov).is_some());
            // Σ − S' must be PSD
            let gap = c.cov - pc.cov;
            assert!(gap.symmetric_eigenvalues().min() >= -1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(posterior(&unit_model(), [0.0, 0.0], 0.0).is_err());
        assert!(GmmModel::new(vec![GmmComponent::new(0.7, [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap()]).is_err());
        assert!(GmmComponent::new(1.0, [0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(degrade_awgn(&SampleCloud::new(2, vec![0.0, 0.0]).unwrap(), -1.0, 0).is_err());
    }

    #[test]
    fn degenerate_weights_use_first_component() {
        let model = GmmModel::new(vec![
            GmmComponent::new(1.0, [10.0, 10.0], [[0.01, 0.0], [0.0, 0.01]]).unwrap(),
            GmmComponent::new(0.0, [-10.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap(),
            GmmComponent::new(0.0, [0.0, -10.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap(),
            GmmComponent::new(0.0, [-10.0, -10.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap(),
        ])
        .unwrap();
        let cloud = gmm_sample(&model, 2000, 1).unwrap();
        assert!(cloud.points().all(|p| p[0] > 8.0 && p[1] > 8.0));
    }

    #[test]
    fn sampling_is_reproducible() {
        let model = DemoConfig::builtin().model().unwrap();
        assert_eq!(gmm_sample(&model, 500, 42).unwrap(), gmm_sample(&model, 500, 42).unwrap());
        assert_ne!(gmm_sample(&model, 500, 42).unwrap(), gmm_sample(&model, 500, 43).unwrap());
        let x = gmm_sample(&model, 500, 42).unwrap();
        assert_eq!(degrade_awgn(&x, 0.3, 9).unwrap(), degrade_awgn(&x, 0.3, 9).unwrap());
    }

    #[test]
    fn malformed_config_is_rejected() {
        assert!(matches!(DemoConfig::from_toml("[model]\ncomponents = []\n"), Err(Error::Config(_))));
        let mut cfg = DemoConfig::builtin();
        cfg.noise.sigma = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = DemoConfig::builtin();
        cfg.sweep.alphas = vec![3.0];
        assert!(cfg.validate().is_err());
    }
}
