//! Streaming estimation of patch mean and covariance.
//!
//! [`StatsAccumulator`] keeps raw first and second moments in `f64`, so
//! accumulators built on disjoint shards of the data can be merged by plain
//! addition. [`StatsAccumulator::finalize`] applies the `N / (N − 1)`
//! correction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::patch::PatchBatch;

/// Diagonal entries of a finalized covariance may dip this far below zero.
const DIAG_TOL: f64 = 1e-12;

/// Fitted Gaussian: sample count, mean and (unbiased) covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats {
    count: u64,
    mean: DVector<f64>,
    cov: SymMatrix,
}

impl GaussianStats {
    pub fn new(mean: DVector<f64>, cov: SymMatrix, count: u64) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        if count < 2 {
            return Err(Error::InsufficientSamples { count });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("mean has non-finite entries".into()));
        }
        let scale = cov.max_abs().max(1.0);
        if let Some(i) = (0..cov.dim()).find(|&i| cov.matrix()[(i, i)] < -DIAG_TOL * scale) {
            return Err(Error::Numerical(format!(
                "covariance diagonal entry {i} is negative ({:e})",
                cov.matrix()[(i, i)]
            )));
        }
        Ok(Self { count, mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }
}

/// Mergeable raw-moment accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct StatsAccumulator {
    dim: usize,
    count: u64,
    sum: Vec<f64>,
    // row-major, kept symmetric
    sum_outer: Vec<f64>,
}

impl StatsAccumulator {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "accumulator dimension must be positive");
        Self {
            dim,
            count: 0,
            sum: vec![0.0; dim],
            sum_outer: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    pub fn sum_outer(&self) -> &[f64] {
        &self.sum_outer
    }

    fn add_row_upper(&mut self, row: &[f64]) {
        let d = self.dim;
        for (s, v) in self.sum.iter_mut().zip(row) {
            *s += v;
        }
        for i in 0..d {
            let ri = row[i];
            let dst = &mut self.sum_outer[i * d + i..(i + 1) * d];
            for (o, rj) in dst.iter_mut().zip(&row[i..]) {
                *o += ri * rj;
            }
        }
        self.count += 1;
    }

    fn mirror(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in (i + 1)..d {
                self.sum_outer[j * d + i] = self.sum_outer[i * d + j];
            }
        }
    }

    /// Adds one sample.
    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        self.update_rows(row, 1)
    }

    /// Adds `rows` samples laid out row-major in `data`.
    pub fn update_rows(&mut self, data: &[f64], rows: usize) -> Result<()> {
        if data.len() != rows * self.dim {
            return Err(Error::DimensionMismatch {
                expected: rows * self.dim,
                found: data.len(),
            });
        }
        for row in data.chunks_exact(self.dim) {
            self.add_row_upper(row);
        }
        self.mirror();
        Ok(())
    }

    /// Adds every row of a patch batch.
    pub fn update(&mut self, batch: &PatchBatch) -> Result<()> {
        if batch.width() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: batch.width(),
            });
        }
        self.update_rows(batch.data(), batch.rows())
    }

    /// Fieldwise sum of two accumulators.
    pub fn merge(&self, other: &StatsAccumulator) -> Result<StatsAccumulator> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &StatsAccumulator) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_outer.iter_mut().zip(&other.sum_outer) {
            *a += b;
        }
        Ok(())
    }

    /// `μ = sum / N`, `Σ = (sum_outer − N μ μᵀ) / (N − 1)`.
    pub fn finalize(&self) -> Result<GaussianStats> {
        if self.count < 2 {
            return Err(Error::InsufficientSamples { count: self.count });
        }
        let n = self.count as f64;
        let d = self.dim;
        let mean = DVector::from_iterator(d, self.sum.iter().map(|s| s / n));
        let cov = DMatrix::from_fn(d, d, |i, j| (self.sum_outer[i * d + j] - n * mean[i] * mean[j]) / (n - 1.0));
        GaussianStats::new(mean, SymMatrix::symmetrize(&cov), self.count)
    }
}
