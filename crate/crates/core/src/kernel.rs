//! RBF kernel, Gram matrices and truncated feature maps.
//!
//! A [`FeatureMap`] is a finite map `x -> phi(x)` with
//! `phi(x)·phi(x') ≈ k(x, x')`. Three backends exist:
//!
//! * **Nyström**: eigendecomposition of the Gram matrix over a set of anchor
//!   points, extended out of sample by kernel sums against the anchors.
//! * **Random Fourier**: `sqrt(2ζ²/m)·cos(Wx + b)` with frequencies drawn from
//!   the RBF spectral density.
//! * **Analytic**: caller-supplied eigenpairs.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative threshold below which an eigenvalue is treated as zero.
pub const EIGEN_CUTOFF_REL: f64 = 1e-10;

/// Default truncation level `m*`.
pub const DEFAULT_M_STAR: usize = 256;

/// Default Gram-matrix jitter, relative to `ζ²`.
pub const DEFAULT_JITTER_REL: f64 = 1e-8;

/// Kernel amplitude, per-axis length scales and observation noise.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub zeta: f64,
    pub length_scales: Vec<f64>,
    pub noise_sigma: f64,
}

impl HyperParams {
    pub fn new(zeta: f64, length_scales: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        let hp = HyperParams { zeta, length_scales, noise_sigma };
        hp.validate()?;
        Ok(hp)
    }

    /// Isotropic convenience constructor.
    pub fn isotropic(zeta: f64, length_scale: f64, dim: usize, noise_sigma: f64) -> Result<Self> {
        Self::new(zeta, vec![length_scale; dim], noise_sigma)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.zeta) {
            return Err(Error::invalid(format!("zeta must be positive, got {}", self.zeta)));
        }
        if !ok(self.noise_sigma) {
            return Err(Error::invalid(format!("noise_sigma must be positive, got {}", self.noise_sigma)));
        }
        if self.length_scales.is_empty() {
            return Err(Error::invalid("length_scales must not be empty"));
        }
        if let Some(l) = self.length_scales.iter().find(|&&l| !ok(l)) {
            return Err(Error::invalid(format!("length scales must be positive, got {l}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// `(log ζ, log ℓ₁, …, log ℓ_d, log σ)`.
    pub fn to_log_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim() + 2);
        v.push(self.zeta.ln());
        v.extend(self.length_scales.iter().map(|l| l.ln()));
        v.push(self.noise_sigma.ln());
        v
    }

    pub fn from_log_params(psi: &[f64]) -> Result<Self> {
        if psi.len() < 3 {
            return Err(Error::invalid(format!("need at least 3 log-parameters, got {}", psi.len())));
        }
        let d = psi.len() - 2;
        Self::new(psi[0].exp(), psi[1..=d].iter().map(|v| v.exp()).collect(), psi[d + 1].exp())
    }

    pub fn signal_variance(&self) -> f64 {
        self.zeta * self.zeta
    }
}

/// Compact box `[lower, upper]` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "domain bounds must be non-empty and equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::invalid(format!("domain axis {i}: need lower < upper, got [{l}, {u}]")));
            }
        }
        Ok(Domain { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.width(i)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &t)| self.lower[i] + t * self.width(i))
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.lower[i] + rng.random::<f64>() * self.width(i))
            .collect()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!("point has dimension {}, domain has {}", x.len(), self.dim())));
        }
        if !self.contains(x) {
            return Err(Error::invalid(format!("point {x:?} lies outside the domain")));
        }
        Ok(())
    }
}

#[inline]
fn rbf_with(x: &[f64], y: &[f64], inv_ls2: &[f64], zeta2: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let d = x[i] - y[i];
        s += d * d * inv_ls2[i];
    }
    zeta2 * (-0.5 * s).exp()
}

fn inv_sq(hp: &HyperParams) -> Vec<f64> {
    hp.length_scales.iter().map(|l| 1.0 / (l * l)).collect()
}

/// `ζ² exp(-½ Σ (xᵢ - x'ᵢ)² / ℓᵢ²)`.
pub fn rbf_kernel(x: &[f64], x_prime: &[f64], hp: &HyperParams) -> Result<f64> {
    if x.len() != hp.dim() || x_prime.len() != hp.dim() {
        return Err(Error::invalid(format!(
            "kernel arguments have dimensions {} and {}, length scales have {}",
            x.len(),
            x_prime.len(),
            hp.dim()
        )));
    }
    Ok(rbf_with(x, x_prime, &inv_sq(hp), hp.signal_variance()))
}

/// `K_ij = k(x_i, x_j) + jitter·[i = j]`.
pub fn gram_matrix(points: &[Vec<f64>], hp: &HyperParams, jitter: f64) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::invalid("gram_matrix needs at least one point"));
    }
    if jitter < 0.0 || !jitter.is_finite() {
        return Err(Error::invalid(format!("jitter must be non-negative, got {jitter}")));
    }
    if let Some(p) = points.iter().find(|p| p.len() != hp.dim()) {
        return Err(Error::invalid(format!("point of dimension {} with {}-d length scales", p.len(), hp.dim())));
    }
    let n = points.len();
    let inv = inv_sq(hp);
    let z2 = hp.signal_variance();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = z2 + jitter;
        for j in 0..i {
            let v = rbf_with(&points[i], &points[j], &inv, z2);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `min(m*, #{i : λᵢ > 1e-10·λ₁})` for eigenvalues sorted non-increasing.
pub fn truncation_level(eigenvalues: &[f64], m_star: usize) -> Result<usize> {
    if m_star == 0 {
        return Err(Error::invalid("m_star must be at least 1"));
    }
    if eigenvalues.windows(2).any(|w| w[1] > w[0] + 1e-12 * w[0].abs().max(1.0)) {
        return Err(Error::invalid("eigenvalues must be sorted non-increasing"));
    }
    let top = match eigenvalues.first() {
        Some(&v) if v > 0.0 && v.is_finite() => v,
        _ => return Err(Error::DegenerateKernel),
    };
    let cutoff = EIGEN_CUTOFF_REL * top;
    let positive = eigenvalues.iter().take_while(|&&v| v > cutoff).count();
    Ok(positive.min(m_star))
}

/// Which construction produced a [`FeatureMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Nystrom,
    RandomFourier,
    Analytic,
}

/// Evaluates `ψ₁(x), …, ψ_m(x)` into the output slice.
pub type EigenFunctions = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum Inner {
    Nystrom {
        hp: HyperParams,
        inv_ls2: Vec<f64>,
        /// n×d, row-major.
        anchors: Vec<f64>,
        n: usize,
        eigenvalues: Vec<f64>,
        /// n×m; column i is `u_i / sqrt(n λ_i)`.
        projection: DMatrix<f64>,
    },
    Fourier {
        /// m×d frequencies.
        freqs: DMatrix<f64>,
        phases: Vec<f64>,
        scale: f64,
    },
    Analytic {
        sqrt_eigenvalues: Vec<f64>,
        eigenvalues: Vec<f64>,
        eigenfunctions: EigenFunctions,
    },
}

/// Truncated feature map `x ↦ φ(x) ∈ R^m`.
///
/// Every backend factors as `φ(x) = Pᵀ b(x)` for a basis vector `b(x)` and a
/// fixed projection `P` (identity except for Nyström, where `b(x)` holds the
/// kernel values against the anchors). Sampled functions `φ(x)ᵀθ` are
/// therefore evaluated as `b(x)ᵀ(Pθ)`, see [`FeatureMap::surface`].
#[derive(Clone)]
pub struct FeatureMap {
    dim: usize,
    m: usize,
    inner: Inner,
}

impl fmt::Debug for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureMap")
            .field("backend", &self.backend())
            .field("dim", &self.dim)
            .field("m", &self.m)
            .finish()
    }
}

/// Nyström map over `anchors` for `k_η`, truncated at `m*`.
///
/// The eigenpairs `(λ̃ᵢ, uᵢ)` of `K/n` give `φᵢ(x) = Σⱼ uⱼᵢ k(x, xⱼ) / sqrt(n λ̃ᵢ)`,
/// which reproduces `K` exactly on the anchors when nothing is truncated.
pub fn nystrom_feature_map(anchors: &[Vec<f64>], hp: &HyperParams, m_star: usize) -> Result<FeatureMap> {
    hp.validate()?;
    let k = gram_matrix(anchors, hp, 0.0)?;
    let n = anchors.len();
    let eig = (k / n as f64).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let m = truncation_level(&sorted, m_star)?;
    let mut projection = DMatrix::zeros(n, m);
    for (col, &src) in order.iter().take(m).enumerate() {
        let s = 1.0 / (n as f64 * sorted[col]).sqrt();
        for r in 0..n {
            projection[(r, col)] = eig.eigenvectors[(r, src)] * s;
        }
    }
    Ok(FeatureMap {
        dim: hp.dim(),
        m,
        inner: Inner::Nystrom {
            hp: hp.clone(),
            inv_ls2: inv_sq(hp),
            anchors: anchors.iter().flatten().copied().collect(),
            n,
            eigenvalues: sorted[..m].to_vec(),
            projection,
        },
    })
}

/// Random Fourier map with `m` features; deterministic given the generator state.
pub fn rff_feature_map<R: Rng + ?Sized>(hp: &HyperParams, m: usize, rng: &mut R) -> Result<FeatureMap> {
    hp.validate()?;
    if m == 0 {
        return Err(Error::invalid("random Fourier map needs m >= 1"));
    }
    let d = hp.dim();
    let mut freqs = DMatrix::zeros(m, d);
    for i in 0..m {
        for j in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            freqs[(i, j)] = z / hp.length_scales[j];
        }
    }
    let phases = (0..m).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    Ok(FeatureMap {
        dim: d,
        m,
        inner: Inner::Fourier { freqs, phases, scale: (2.0 * hp.signal_variance() / m as f64).sqrt() },
    })
}

impl FeatureMap {
    /// Map built from known eigenpairs: `φᵢ(x) = sqrt(λᵢ) ψᵢ(x)`.
    pub fn analytic(dim: usize, eigenvalues: Vec<f64>, eigenfunctions: EigenFunctions) -> Result<Self> {
        if dim == 0 || eigenvalues.is_empty() {
            return Err(Error::invalid("analytic map needs dim >= 1 and at least one eigenpair"));
        }
        if eigenvalues.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("analytic eigenvalues must be strictly positive"));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("analytic eigenvalues must be non-increasing"));
        }
        Ok(FeatureMap {
            dim,
            m: eigenvalues.len(),
            inner: Inner::Analytic {
                sqrt_eigenvalues: eigenvalues.iter().map(|v| v.sqrt()).collect(),
                eigenvalues,
                eigenfunctions,
            },
        })
    }

    /// Truncation level `m_t`.
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn backend(&self) -> Backend {
        match self.inner {
            Inner::Nystrom { .. } => Backend::Nystrom,
            Inner::Fourier { .. } => Backend::RandomFourier,
            Inner::Analytic { .. } => Backend::Analytic,
        }
    }

    /// Retained eigenvalues, non-increasing. Empty for random Fourier maps.
    pub fn eigenvalues(&self) -> &[f64] {
        match &self.inner {
            Inner::Nystrom { eigenvalues, .. } | Inner::Analytic { eigenvalues, .. } => eigenvalues,
            Inner::Fourier { .. } => &[],
        }
    }

    /// Length of the basis vector `b(x)`.
    pub fn basis_len(&self) -> usize {
        match &self.inner {
            Inner::Nystrom { n, .. } => *n,
            _ => self.m,
        }
    }

    /// Writes `b(x)` into `out` (length [`basis_len`](Self::basis_len)).
    pub fn basis_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        match &self.inner {
            Inner::Nystrom { hp, inv_ls2, anchors, n, .. } => {
                let z2 = hp.signal_variance();
                for j in 0..*n {
                    out[j] = rbf_with(x, &anchors[j * self.dim..(j + 1) * self.dim], inv_ls2, z2);
                }
            }
            Inner::Fourier { freqs, phases, scale } => {
                for i in 0..self.m {
                    let mut a = phases[i];
                    for j in 0..self.dim {
                        a += freqs[(i, j)] * x[j];
                    }
                    out[i] = scale * a.cos();
                }
            }
            Inner::Analytic { sqrt_eigenvalues, eigenfunctions, .. } => {
                eigenfunctions(x, out);
                for (o, s) in out.iter_mut().zip(sqrt_eigenvalues) {
                    *o *= s;
                }
            }
        }
    }

    /// `φ(x)`.
    pub fn features(&self, x: &[f64]) -> DVector<f64> {
        let mut b = vec![0.0; self.basis_len()];
        self.basis_into(x, &mut b);
        match &self.inner {
            Inner::Nystrom { projection, .. } => projection.tr_mul(&DVector::from_vec(b)),
            _ => DVector::from_vec(b),
        }
    }

    /// Rows `φ(xᵢ)ᵀ` for every point.
    pub fn feature_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let basis = self.basis_matrix(points);
        match &self.inner {
            Inner::Nystrom { projection, .. } => basis * projection,
            _ => basis,
        }
    }

    /// Rows `b(xᵢ)ᵀ`.
    pub fn basis_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let p = self.basis_len();
        let mut row = vec![0.0; p];
        let mut out = DMatrix::zeros(points.len(), p);
        for (i, x) in points.iter().enumerate() {
            self.basis_into(x, &mut row);
            for (j, v) in row.iter().enumerate() {
                out[(i, j)] = *v;
            }
        }
        out
    }

    /// `Pθ`, the weights of `φ(·)ᵀθ` on the basis.
    pub fn coefficients(&self, theta: &DVector<f64>) -> DVector<f64> {
        assert_eq!(theta.len(), self.m, "weight vector length must equal m_t");
        match &self.inner {
            Inner::Nystrom { projection, .. } => projection * theta,
            _ => theta.clone(),
        }
    }

    /// The function `x ↦ φ(x)ᵀθ`.
    pub fn surface(&self, theta: &DVector<f64>) -> Surface<'_> {
        Surface { map: self, coefficients: self.coefficients(theta) }
    }
}

/// A sampled function `g(x) = φ(x)ᵀθ`.
#[derive(Debug, Clone)]
pub struct Surface<'a> {
    map: &'a FeatureMap,
    coefficients: DVector<f64>,
}

impl Surface<'_> {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut b = vec![0.0; self.map.basis_len()];
        self.eval_with(x, &mut b)
    }

    /// Like [`eval`](Self::eval) with caller-provided scratch space.
    pub fn eval_with(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        self.map.basis_into(x, scratch);
        scratch.iter().zip(self.coefficients.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }
}
