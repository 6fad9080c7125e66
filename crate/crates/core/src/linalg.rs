//! Symmetric-matrix primitives and closed-form Gaussian transport.
//!
//! Everything here works in `f64` on dense [`nalgebra::DMatrix`] storage. Square
//! roots and pseudo-inverses go through a symmetric eigendecomposition so that
//! slightly negative eigenvalues produced by round-off can be clamped
//! explicitly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::stats::GaussianStats;

/// Relative asymmetry tolerated by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// `λ_min <= SINGULAR_REL_TOL · λ_max` marks a covariance as numerically singular.
pub const SINGULAR_REL_TOL: f64 = 1e-10;
/// Relative entrywise tolerance of the covariance certificate.
pub const COV_CERT_TOL: f64 = 1e-6;
/// Tolerance of the mean certificate, relative to `max(1, |μ|∞)`.
pub const MEAN_CERT_TOL: f64 = 1e-9;

const EIGEN_EPS: f64 = f64::EPSILON;
const EIGEN_MAX_ITER: usize = 100_000;

/// A real symmetric matrix stored in full.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `V · diag(f(λ)) · Vᵀ`, symmetrized.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let scaled = DVector::from_iterator(self.values.len(), self.values.iter().map(|&l| f(l)));
        let mut weighted = self.vectors.clone();
        for (mut col, s) in weighted.column_iter_mut().zip(scaled.iter()) {
            col *= *s;
        }
        SymMatrix::symmetrize(&(weighted * self.vectors.transpose()))
    }
}

impl SymMatrix {
    /// Wraps `m` after checking squareness, finiteness and symmetry within
    /// [`SYMMETRY_TOL`] of its largest entry. The stored matrix is exactly
    /// symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Contract(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("matrix has non-finite entries".into()));
        }
        let scale = m.amax();
        let mut asym = 0.0f64;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Contract(format!(
                "matrix is not symmetric: max |S - Sᵀ| = {asym:e}, max |S| = {scale:e}"
            )));
        }
        Ok(Self::symmetrize(&m))
    }

    /// `(m + mᵀ) / 2` without any tolerance check.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self((m + m.transpose()) * 0.5)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `self + shift · I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        Self(m)
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn eigen(&self) -> Result<Spectrum> {
        let d = self.dim();
        if d == 0 {
            return Ok(Spectrum {
                values: Vec::new(),
                vectors: DMatrix::zeros(0, 0),
            });
        }
        let eig = SymmetricEigen::try_new(self.0.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
            Error::Numerical(format!(
                "symmetric eigendecomposition did not converge (dim {d}, max |S| = {:e}, trace = {:e})",
                self.max_abs(),
                self.trace()
            ))
        })?;
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Spectrum { values, vectors })
    }

    /// `λ_max / λ_min` with negative eigenvalues clamped to zero; infinite
    /// for singular matrices.
    pub fn condition_number(&self) -> Result<f64> {
        let s = self.eigen()?;
        let hi = s.max().max(0.0);
        let lo = s.min().max(0.0);
        Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
    }
}

/// Symmetric PSD square root; eigenvalues below `clamp_tol` are treated as zero.
pub fn sqrtm_psd(s: &SymMatrix, clamp_tol: f64) -> Result<SymMatrix> {
    let spec = s.eigen()?;
    Ok(spec.reconstruct(|l| if l < clamp_tol { 0.0 } else { l.sqrt() }))
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix. Eigenvalues at or
/// below `rel_tol · λ_max` are dropped.
pub fn pinv_psd(s: &SymMatrix, rel_tol: f64) -> Result<SymMatrix> {
    let spec = s.eigen()?;
    let cut = rel_tol * spec.max().max(0.0);
    Ok(spec.reconstruct(|l| if l <= cut || l <= 0.0 { 0.0 } else { 1.0 / l }))
}

/// Pseudo-inverse square root, with the same cut-off rule as [`pinv_psd`].
pub fn inv_sqrtm_psd(s: &SymMatrix, rel_tol: f64) -> Result<SymMatrix> {
    let spec = s.eigen()?;
    let cut = rel_tol * spec.max().max(0.0);
    Ok(spec.reconstruct(|l| if l <= cut || l <= 0.0 { 0.0 } else { 1.0 / l.sqrt() }))
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues set to zero).
pub fn project_psd(s: &SymMatrix) -> Result<SymMatrix> {
    Ok(s.eigen()?.reconstruct(|l| l.max(0.0)))
}

/// Default diagonal stabilization: `1e-9 · tr(Σ) / d`.
pub fn default_stab_eps(cov: &SymMatrix) -> f64 {
    if cov.dim() == 0 {
        return 0.0;
    }
    1e-9 * cov.trace().max(0.0) / cov.dim() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportKind {
    Deterministic,
    Stochastic,
}

/// Affine transport `v ↦ A·v + b`, plus `w ~ N(0, Σ_w)` when stochastic.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportOperator {
    linear: DMatrix<f64>,
    shift: DVector<f64>,
    noise_cov: Option<SymMatrix>,
    noise_factor: Option<DMatrix<f64>>,
    kind: TransportKind,
    stabilization: f64,
    // row-major copy of `linear` for the per-row hot loop
    linear_rows: Vec<f64>,
}

/// Residuals of the two operator certificates.
#[derive(Clone, Copy, Debug)]
pub struct Certificate {
    /// `max|A Σ_src Aᵀ + Σ_w − Σ_tgt| / max|Σ_tgt|`.
    pub cov_residual: f64,
    /// `max|A μ_src + b − μ_tgt| / max(1, |μ_tgt|∞)`.
    pub mean_residual: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.score() <= 1.0
    }

    /// Largest residual in units of its tolerance.
    pub fn score(&self) -> f64 {
        (self.cov_residual / COV_CERT_TOL).max(self.mean_residual / MEAN_CERT_TOL)
    }
}

impl TransportOperator {
    /// Assembles an operator from its parts. A noise covariance makes the
    /// operator stochastic.
    pub fn from_parts(
        linear: DMatrix<f64>,
        shift: DVector<f64>,
        noise_cov: Option<SymMatrix>,
        stabilization: f64,
    ) -> Result<Self> {
        let d = shift.len();
        if linear.nrows() != d || linear.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: linear.nrows().max(linear.ncols()),
            });
        }
        if linear.iter().chain(shift.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("transport operator has non-finite entries".into()));
        }
        let noise_factor = match &noise_cov {
            Some(n) => {
                if n.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: n.dim(),
                    });
                }
                Some(sqrtm_psd(n, 0.0)?.into_inner())
            }
            None => None,
        };
        let kind = if noise_cov.is_some() {
            TransportKind::Stochastic
        } else {
            TransportKind::Deterministic
        };
        let linear_rows = linear.transpose().as_slice().to_vec();
        Ok(Self {
            linear,
            shift,
            noise_cov,
            noise_factor,
            kind,
            stabilization,
            linear_rows,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(DMatrix::identity(dim, dim), DVector::zeros(dim), None, 0.0)
            .expect("identity operator is well formed")
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn kind(&self) -> TransportKind {
        self.kind
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn noise_cov(&self) -> Option<&SymMatrix> {
        self.noise_cov.as_ref()
    }

    /// Diagonal shift added to the source covariance while building, 0 if none.
    pub fn stabilization(&self) -> f64 {
        self.stabilization
    }

    /// Writes `A·v + b` into `out`.
    pub fn apply_mean_into(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(v.len(), d);
        debug_assert_eq!(out.len(), d);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.linear_rows[i * d..(i + 1) * d];
            let mut acc = self.shift[i];
            for (a, x) in row.iter().zip(v) {
                acc += a * x;
            }
            *o = acc;
        }
    }

    /// Adds a draw from `N(0, Σ_w)` to `out`; no-op for deterministic operators.
    pub fn add_noise<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        if let Some(factor) = &self.noise_factor {
            let d = self.dim();
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, zk) in z.iter().enumerate() {
                    acc += factor[(i, k)] * zk;
                }
                *o += acc;
            }
        }
    }

    /// `A·v + b`, plus noise when stochastic. Deterministic operators never
    /// touch `rng`.
    pub fn apply<R: Rng + ?Sized>(&self, v: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        let mut out = vec![0.0; v.len()];
        self.apply_mean_into(v, &mut out);
        self.add_noise(&mut out, rng);
        Ok(out)
    }

    /// Measures both certificates against `src` and `tgt`.
    pub fn certificate(&self, src: &GaussianStats, tgt: &GaussianStats) -> Result<Certificate> {
        let d = self.dim();
        for s in [src, tgt] {
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: s.dim(),
                });
            }
        }
        let mut pushed = &self.linear * src.cov().matrix() * self.linear.transpose();
        if let Some(n) = &self.noise_cov {
            pushed += n.matrix();
        }
        let tgt_scale = tgt.cov().max_abs().max(f64::MIN_POSITIVE);
        let cov_residual = (pushed - tgt.cov().matrix()).amax() / tgt_scale;

        let mean = &self.linear * src.mean() + &self.shift;
        let mean_scale = tgt.mean().amax().max(1.0);
        let mean_residual = (mean - tgt.mean()).amax() / mean_scale;
        Ok(Certificate {
            cov_residual,
            mean_residual,
        })
    }

    /// Like [`certificate`](Self::certificate) but fails when either bound is
    /// exceeded.
    pub fn verify(&self, src: &GaussianStats, tgt: &GaussianStats) -> Result<Certificate> {
        let cert = self.certificate(src, tgt)?;
        if !cert.holds() {
            return Err(Error::Certificate(format!(
                "covariance residual {:e} (limit {COV_CERT_TOL:e}), mean residual {:e} (limit {MEAN_CERT_TOL:e})",
                cert.cov_residual, cert.mean_residual
            )));
        }
        Ok(cert)
    }
}

fn check_dims(src: &GaussianStats, tgt: &GaussianStats) -> Result<()> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch {
            expected: src.dim(),
            found: tgt.dim(),
        });
    }
    Ok(())
}

fn shift_for(linear: &DMatrix<f64>, src: &GaussianStats, tgt: &GaussianStats) -> DVector<f64> {
    tgt.mean() - linear * src.mean()
}

fn clamped_target(tgt: &GaussianStats) -> Result<SymMatrix> {
    let spec = tgt.cov().eigen()?;
    let scale = spec.max().abs().max(f64::MIN_POSITIVE);
    if spec.min() < -SINGULAR_REL_TOL * scale {
        log::warn!(
            "target covariance is indefinite (λ_min = {:e}, λ_max = {:e}); clamping negative eigenvalues",
            spec.min(),
            spec.max()
        );
    }
    Ok(spec.reconstruct(|l| l.max(0.0)))
}

/// `Σ_s^{-1/2} (Σ_s^{1/2} Σ_t Σ_s^{1/2})^{1/2} Σ_s^{-1/2}` for PD `Σ_s`.
fn deterministic_linear(src_cov: &SymMatrix, tgt_cov: &SymMatrix) -> Result<DMatrix<f64>> {
    let spec = src_cov.eigen()?;
    let root = spec.reconstruct(f64::sqrt);
    let inv_root = spec.reconstruct(|l| 1.0 / l.sqrt());
    let middle = SymMatrix::symmetrize(&(root.matrix() * tgt_cov.matrix() * root.matrix()));
    let middle_root = sqrtm_psd(&middle, 0.0)?;
    let linear = inv_root.matrix() * middle_root.matrix() * inv_root.matrix();
    Ok(SymMatrix::symmetrize(&linear).into_inner())
}

/// Closed-form W2-optimal map between two Gaussians.
///
/// A well-conditioned source (`λ_min > 1e-10 · λ_max`) yields the exact
/// deterministic map. A positive but ill-conditioned source is shifted by
/// `stab_eps · I` (default [`default_stab_eps`]); if that makes it numerically
/// positive definite the map is built from the shifted covariance and the
/// residual `Σ_tgt − A Σ_src Aᵀ = stab_eps · A Aᵀ` is carried as noise so the
/// covariance certificate still holds. Anything else falls back to
/// [`stochastic_transport`].
pub fn mvg_transport(
    src: &GaussianStats,
    tgt: &GaussianStats,
    stab_eps: Option<f64>,
) -> Result<TransportOperator> {
    check_dims(src, tgt)?;
    if let Some(eps) = stab_eps {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Contract(format!("stab_eps must be finite and nonnegative, got {eps}")));
        }
    }
    if src.mean() == tgt.mean() && src.cov() == tgt.cov() {
        return Ok(TransportOperator::identity(src.dim()));
    }
    let tgt_cov = clamped_target(tgt)?;
    let spec = src.cov().eigen()?;
    let (lo, hi) = (spec.min(), spec.max());

    if hi > 0.0 && lo > SINGULAR_REL_TOL * hi {
        let linear = deterministic_linear(src.cov(), &tgt_cov)?;
        let shift = shift_for(&linear, src, tgt);
        return TransportOperator::from_parts(linear, shift, None, 0.0);
    }

    let eps = stab_eps.unwrap_or_else(|| default_stab_eps(src.cov()));
    let shiftable = hi > 0.0 && lo > 0.0 && eps > 0.0 && lo + eps > SINGULAR_REL_TOL * (hi + eps);
    let first = if shiftable {
        log::debug!("source covariance stabilized with eps = {eps:e}");
        stabilized_transport(src, tgt, &src.cov().shifted(eps), &tgt_cov, eps)?
    } else {
        log::debug!("source covariance singular (λ_min = {lo:e}, λ_max = {hi:e}); using stochastic transport");
        stochastic_transport(src, tgt)?
    };
    let first_cert = first.certificate(src, tgt)?;
    if first_cert.holds() || !(hi > 0.0 && eps > 0.0) {
        return Ok(first);
    }
    // Tiny shifts and pseudo-inverses of near-zero spectra both amplify round-off.
    let second = if shiftable {
        stochastic_transport(src, tgt)?
    } else {
        stabilized_transport(src, tgt, &project_psd(src.cov())?.shifted(eps), &tgt_cov, eps)?
    };
    let second_cert = second.certificate(src, tgt)?;
    if second_cert.score() < first_cert.score() {
        log::debug!("certificate failed ({first_cert:?}); using {:?} transport instead", second.kind());
        return Ok(second);
    }
    Ok(first)
}

fn stabilized_transport(
    src: &GaussianStats,
    tgt: &GaussianStats,
    stabilized: &SymMatrix,
    tgt_cov: &SymMatrix,
    eps: f64,
) -> Result<TransportOperator> {
    let linear = deterministic_linear(stabilized, tgt_cov)?;
    let shift = shift_for(&linear, src, tgt);
    let pushed = &linear * src.cov().matrix() * linear.transpose();
    let residual = project_psd(&SymMatrix::symmetrize(&(tgt_cov.matrix() - pushed)))?;
    TransportOperator::from_parts(linear, shift, Some(residual), eps)
}

/// One-to-many transport for a possibly singular source:
/// `A = Σ_t^{1/2} (Σ_t^{1/2} Σ_s Σ_t^{1/2})^{1/2} Σ_t^{-1/2} Σ_s^†`,
/// with noise covariance `Σ_t − A Σ_s Aᵀ` projected onto the PSD cone.
pub fn stochastic_transport(src: &GaussianStats, tgt: &GaussianStats) -> Result<TransportOperator> {
    check_dims(src, tgt)?;
    let tgt_cov = clamped_target(tgt)?;
    let tgt_spec = tgt_cov.eigen()?;
    if tgt_spec.max() <= 0.0 {
        return Err(Error::Numerical(
            "cannot whiten target: target covariance is fully degenerate".into(),
        ));
    }
    let tgt_cut = SINGULAR_REL_TOL * tgt_spec.max();
    let tgt_root = tgt_spec.reconstruct(|l| l.max(0.0).sqrt());
    let tgt_inv_root = tgt_spec.reconstruct(|l| if l <= tgt_cut { 0.0 } else { 1.0 / l.sqrt() });

    // Drop the numerically-null part of the source consistently in both the
    // middle term and the pseudo-inverse.
    let src_spec = src.cov().eigen()?;
    let src_cut = SINGULAR_REL_TOL * src_spec.max().max(0.0);
    let src_proj = src_spec.reconstruct(|l| if l <= src_cut || l <= 0.0 { 0.0 } else { l });
    let src_pinv = src_spec.reconstruct(|l| if l <= src_cut || l <= 0.0 { 0.0 } else { 1.0 / l });

    let middle = SymMatrix::symmetrize(&(tgt_root.matrix() * src_proj.matrix() * tgt_root.matrix()));
    let middle_root = sqrtm_psd(&middle, 0.0)?;
    let linear = tgt_root.matrix() * middle_root.matrix() * tgt_inv_root.matrix() * src_pinv.matrix();
    let shift = shift_for(&linear, src, tgt);
    let pushed = &linear * src.cov().matrix() * linear.transpose();
    let noise = project_psd(&SymMatrix::symmetrize(&(tgt_cov.matrix() - pushed)))?;
    TransportOperator::from_parts(linear, shift, Some(noise), 0.0)
}

/// Free-standing form of [`TransportOperator::apply`].
pub fn apply_operator<R: Rng + ?Sized>(op: &TransportOperator, v: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    op.apply(v, rng)
}

/// W2 distance between the Gaussians sharing the first two moments of `g1`
/// and `g2`.
pub fn gelbrich_distance(g1: &GaussianStats, g2: &GaussianStats) -> Result<f64> {
    check_dims(g1, g2)?;
    let mean_term = (g1.mean() - g2.mean()).norm_squared();
    let root = sqrtm_psd(g1.cov(), 0.0)?;
    let middle = SymMatrix::symmetrize(&(root.matrix() * g2.cov().matrix() * root.matrix()));
    let cross: f64 = middle.eigen()?.values.iter().map(|l| l.max(0.0).sqrt()).sum();
    let cov_term = g1.cov().trace() + g2.cov().trace() - 2.0 * cross;
    Ok((mean_term + cov_term).max(0.0).sqrt())
}
