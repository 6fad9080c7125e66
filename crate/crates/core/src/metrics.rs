//! Distortion and perceptual indices.
//!
//! Distortion is plain MSE/PSNR. The perceptual index is either the Gelbrich
//! distance between Gaussian fits or, for small equal-size clouds, the exact
//! empirical W2 obtained from an optimal assignment.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::patch::LatentTensor;
use crate::pipeline::{DPPoint, ImageTensor};
use crate::stats::{GaussianStats, StatsAccumulator};

/// Largest cloud accepted by [`w2_exact_small`].
pub const W2_EXACT_MAX_POINTS: usize = 4096;

/// Header of the tradeoff-curve CSV.
pub const CURVE_CSV_HEADER: &str = "alpha,mse,psnr,perceptual_index,index_kind";

/// `n` points in `R^d`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCloud {
    dim: usize,
    data: Vec<f64>,
}

impl SampleCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::Contract(format!(
                "cloud of {} values cannot hold points of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("cloud has non-finite values".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Result<Self> {
        Self::new(D, points.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The first `n` points (all of them if `n >= len`).
    pub fn head(&self, n: usize) -> SampleCloud {
        let n = n.min(self.len());
        Self {
            dim: self.dim,
            data: self.data[..n * self.dim].to_vec(),
        }
    }
}

/// Anything that can be compared entrywise.
pub trait Samples {
    fn values(&self) -> &[f64];
    fn shape(&self) -> Vec<usize>;
}

impl Samples for SampleCloud {
    fn values(&self) -> &[f64] {
        &self.data
    }
    fn shape(&self) -> Vec<usize> {
        vec![self.len(), self.dim]
    }
}

impl Samples for LatentTensor {
    fn values(&self) -> &[f64] {
        self.data()
    }
    fn shape(&self) -> Vec<usize> {
        let (c, h, w) = LatentTensor::shape(self);
        vec![c, h, w]
    }
}

impl Samples for ImageTensor {
    fn values(&self) -> &[f64] {
        self.tensor().data()
    }
    fn shape(&self) -> Vec<usize> {
        Samples::shape(self.tensor())
    }
}

impl Samples for [f64] {
    fn values(&self) -> &[f64] {
        self
    }
    fn shape(&self) -> Vec<usize> {
        vec![self.len()]
    }
}

/// Mean squared difference over all entries.
pub fn mse<T: Samples + ?Sized>(a: &T, b: &T) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Contract(format!(
            "shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (va, vb) = (a.values(), b.values());
    if va.is_empty() {
        return Err(Error::Empty("mse of empty inputs".into()));
    }
    let sum: f64 = va.iter().zip(vb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / va.len() as f64)
}

/// `10 · log10(peak² / mse)`; `+∞` when `mse == 0`.
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

pub fn psnr<T: Samples + ?Sized>(a: &T, b: &T, peak: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

/// Mean and unbiased covariance of the points of a cloud.
pub fn gaussian_fit(cloud: &SampleCloud) -> Result<GaussianStats> {
    let mut acc = StatsAccumulator::new(cloud.dim());
    acc.update_rows(cloud.data(), cloud.len())?;
    acc.finalize()
}

/// Optimal assignment for a dense `n × n` row-major cost matrix
/// (Hungarian method with potentials, O(n³)). Returns `assignment[row] = column`.
pub fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    // 1-based with a virtual column 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Squared-Euclidean cost matrix between two clouds of equal size.
pub fn squared_distance_matrix(a: &SampleCloud, b: &SampleCloud) -> Vec<f64> {
    let n = a.len();
    let mut cost = Vec::with_capacity(n * b.len());
    for pa in a.points() {
        for pb in b.points() {
            cost.push(pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum());
        }
    }
    cost
}

/// Exact W2 between the uniform empirical measures of two equal-size clouds.
pub fn w2_exact_small(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "exact W2 needs equal-size clouds, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n > W2_EXACT_MAX_POINTS {
        return Err(Error::Contract(format!(
            "{n} points exceed the exact W2 cap of {W2_EXACT_MAX_POINTS}; use the Gelbrich distance instead"
        )));
    }
    let cost = squared_distance_matrix(a, b);
    let assignment = solve_assignment(&cost, n);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total / n as f64).max(0.0).sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => if x > 0.0 { "inf".into() } else { "-inf".into() },
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Renders points as CSV with [`CURVE_CSV_HEADER`]. Missing values are empty
/// cells; infinite PSNR is written as `inf`.
pub fn curve_to_csv(points: &[DPPoint]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.alpha,
            fmt_opt(p.mse),
            fmt_opt(p.psnr),
            p.perceptual_index,
            p.index_kind.as_str()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_basics() {
        let a = SampleCloud::new(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let zeros = LatentTensor::zeros(3, 2, 2);
        let ones = LatentTensor::filled(3, 2, 2, 1.0);
        assert_eq!(mse(&zeros, &ones).unwrap(), 1.0);
        let x = [0.1, -0.3, 0.7, 2.0];
        let y = [0.4, 0.3, -0.2, 1.5];
        let direct = (0.09 + 0.36 + 0.81 + 0.25) / 4.0;
        assert!((mse(&x[..], &y[..]).unwrap() - direct).abs() < 1e-15);
        assert!(mse(&x[..], &y[..3]).is_err());
    }

    #[test]
    fn psnr_values() {
        assert_eq!(psnr_from_mse(0.0, 1.0), f64::INFINITY);
        assert!((psnr_from_mse(0.01, 1.0) - 20.0).abs() < 1e-12);
        let x = [0.2, 0.5, 0.9];
        let y = [0.25, 0.4, 1.0];
        let m: f64 = (0.0025 + 0.01 + 0.01) / 3.0;
        assert!((psnr(&x[..], &y[..], 1.0).unwrap() - 10.0 * (1.0 / m).log10()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_fit_small_clouds() {
        let c = SampleCloud::from_points(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let g = gaussian_fit(&c).unwrap();
        assert_eq!(g.mean().as_slice(), &[1.0, 0.0]);
        assert_eq!(g.cov().to_row_major(), vec![2.0, 0.0, 0.0, 0.0]);
        let line = SampleCloud::from_points(&[[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [-1.0, -2.0]]).unwrap();
        let g = gaussian_fit(&line).unwrap();
        let spec = g.cov().eigen().unwrap();
        assert!(spec.min().abs() < 1e-12 && spec.max() > 1.0);
    }

    #[test]
    fn w2_trivial_cases() {
        let a = SampleCloud::from_points(&[[0.0, 1.0], [3.0, -1.0], [2.0, 2.0]]).unwrap();
        let b = SampleCloud::from_points(&[[2.0, 2.0], [0.0, 1.0], [3.0, -1.0]]).unwrap();
        assert_eq!(w2_exact_small(&a, &b).unwrap(), 0.0);
        let p = SampleCloud::new(1, vec![0.0]).unwrap();
        let q = SampleCloud::new(1, vec![3.0]).unwrap();
        assert_eq!(w2_exact_small(&p, &q).unwrap(), 3.0);
        assert!(w2_exact_small(&a, &a.head(2)).is_err());
    }

    #[test]
    fn w2_rejects_oversized_clouds() {
        let big = SampleCloud::new(1, vec![0.0; W2_EXACT_MAX_POINTS + 1]).unwrap();
        let err = w2_exact_small(&big, &big).unwrap_err();
        assert!(err.to_string().contains("Gelbrich"));
    }
}
