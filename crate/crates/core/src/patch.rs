//! Stride-1 overlapping patch extraction and averaging reassembly.
//!
//! Rows of a [`PatchBatch`] are ordered by patch offset `(i, j)` in row-major
//! order. Inside a row the patch is flattened channel first, then patch row,
//! then patch column. Only valid patches are produced (no padding), so border
//! pixels are covered by fewer patches than interior ones.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// A `(channels, height, width)` array stored in C order.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl LatentTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Contract(format!(
                "tensor shape ({channels}, {height}, {width}) has an empty axis"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::DimensionMismatch {
                expected: channels * height * width,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("tensor has non-finite values".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Self::new(channels, height, width, vec![value; channels * height * width]).expect("valid shape")
    }

    /// Builds a tensor from `f(channel, row, column)`.
    pub fn from_fn(channels: usize, height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

/// Shape information needed to fold a batch back into a tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub patch: usize,
}

impl PatchGeometry {
    pub fn new(channels: usize, height: usize, width: usize, patch: usize) -> Result<Self> {
        if patch == 0 || patch > height.min(width) {
            return Err(Error::Contract(format!(
                "patch size {patch} does not fit a {height}x{width} tensor"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            patch,
        })
    }

    pub fn rows_along_height(&self) -> usize {
        self.height - self.patch + 1
    }

    pub fn rows_along_width(&self) -> usize {
        self.width - self.patch + 1
    }

    /// `(H − p + 1) · (W − p + 1)`.
    pub fn patch_count(&self) -> usize {
        self.rows_along_height() * self.rows_along_width()
    }

    /// `c · p²`.
    pub fn row_width(&self) -> usize {
        self.channels * self.patch * self.patch
    }
}

/// Flattened patches, one per row, with the geometry they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchBatch {
    geometry: PatchGeometry,
    data: Vec<f64>,
}

impl PatchBatch {
    pub fn new(geometry: PatchGeometry, data: Vec<f64>) -> Result<Self> {
        let expected = geometry.patch_count() * geometry.row_width();
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> PatchGeometry {
        self.geometry
    }

    pub fn rows(&self) -> usize {
        self.geometry.patch_count()
    }

    pub fn width(&self) -> usize {
        self.geometry.row_width()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.data[r * w..(r + 1) * w]
    }
}

/// Extracts every `(c, p, p)` patch of `x`.
pub fn unfold(x: &LatentTensor, p: usize) -> Result<PatchBatch> {
    let geom = PatchGeometry::new(x.channels, x.height, x.width, p)?;
    let (rows_w, width) = (geom.rows_along_width(), geom.row_width());
    let mut data = vec![0.0; geom.patch_count() * width];
    data.par_chunks_mut(width).enumerate().for_each(|(r, row)| {
        let (i, j) = (r / rows_w, r % rows_w);
        let mut k = 0;
        for c in 0..x.channels {
            for dy in 0..p {
                let start = (c * x.height + i + dy) * x.width + j;
                row[k..k + p].copy_from_slice(&x.data[start..start + p]);
                k += p;
            }
        }
    });
    PatchBatch::new(geom, data)
}

/// Reassembles a batch by averaging every entry that lands on the same pixel.
///
/// Each pixel is a running mean over the covering patches in row order, so a
/// batch of identical overlapping values folds back bit-exactly.
pub fn fold(b: &PatchBatch) -> Result<LatentTensor> {
    let g = b.geometry;
    let (h, w, p) = (g.height, g.width, g.patch);
    let (rows_h, rows_w, width) = (g.rows_along_height(), g.rows_along_width(), g.row_width());
    let mut data = vec![0.0; g.channels * h * w];
    data.par_chunks_mut(w).enumerate().for_each(|(cy, out_row)| {
        let (c, y) = (cy / h, cy % h);
        let i_lo = y.saturating_sub(p - 1);
        let i_hi = y.min(rows_h - 1);
        for (x, out) in out_row.iter_mut().enumerate() {
            let j_lo = x.saturating_sub(p - 1);
            let j_hi = x.min(rows_w - 1);
            let mut mean = 0.0;
            let mut n = 0.0;
            for i in i_lo..=i_hi {
                for j in j_lo..=j_hi {
                    let r = i * rows_w + j;
                    let v = b.data[r * width + (c * p + (y - i)) * p + (x - j)];
                    n += 1.0;
                    mean += (v - mean) / n;
                }
            }
            *out = mean;
        }
    });
    LatentTensor::new(g.channels, h, w, data)
}

/// Number of patches covering each pixel of an `h × w` plane.
pub fn coverage_counts(height: usize, width: usize, p: usize) -> Result<Vec<usize>> {
    PatchGeometry::new(1, height, width, p)?;
    let along = |i: usize, n: usize| (i + 1).min(p).min(n - i).min(n - p + 1);
    Ok((0..height)
        .flat_map(|y| (0..width).map(move |x| along(y, height) * along(x, width)))
        .collect())
}
