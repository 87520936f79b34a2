//! Dense complex linear algebra used by the subspace methods.

use nalgebra::linalg::SymmetricEigen;

use crate::error::{invalid_arg, Error, Result};
use crate::{CMatrix, C64};

/// Relative singular-value threshold below which a column basis is treated
/// as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Eigenvalues within this relative gap are considered tied.
const TIE_TOL: f64 = 1e-12;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Unitary; column `i` belongs to `values[i]`.
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `U Λ Uᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(l);
        }
        scaled * self.vectors.adjoint()
    }
}

fn check_square(r: &CMatrix) -> Result<()> {
    if r.nrows() == 0 || r.nrows() != r.ncols() {
        return Err(invalid_arg(format!("expected a non-empty square matrix, got {}x{}", r.nrows(), r.ncols())));
    }
    Ok(())
}

/// Hermitian eigen-decomposition.
///
/// The input is symmetrized as `(R + Rᴴ)/2` first. Each eigenvector is
/// rotated so its first non-negligible component is real and positive, which
/// makes the output reproducible across runs.
pub fn hermitian_eigen(r: &CMatrix) -> Result<EigenDecomposition> {
    check_square(r)?;
    let herm = (r + r.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);

    let n = r.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        if let Some(pivot) = col.iter().find(|z| z.norm() > 1e-10).copied() {
            let rot = pivot.conj() / pivot.norm();
            for z in col.iter_mut() {
                *z *= rot;
            }
        }
        vectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// `R = Y Yᴴ / T`.
pub fn sample_covariance(y: &CMatrix) -> Result<CMatrix> {
    if y.nrows() == 0 || y.ncols() == 0 {
        return Err(invalid_arg("sample covariance of an empty data matrix"));
    }
    let t = y.ncols() as f64;
    Ok((y * y.adjoint()).unscale(t))
}

/// Dominant `K`-dimensional eigenspace of a covariance matrix.
#[derive(Debug, Clone)]
pub struct SignalSubspace {
    /// `M×K`, orthonormal columns.
    pub basis: CMatrix,
    /// Remaining `M×(M−K)` eigenvectors.
    pub noise: CMatrix,
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues `K` and `K+1` coincide, so the split is not unique.
    pub degenerate: bool,
}

/// Splits the eigenvectors of `r` into the top-`k` signal subspace and the
/// complementary noise subspace.
pub fn signal_subspace(r: &CMatrix, k: usize) -> Result<SignalSubspace> {
    check_square(r)?;
    let m = r.nrows();
    if k == 0 || k >= m {
        return Err(invalid_arg(format!("signal dimension must satisfy 1 <= K < M, got K={k}, M={m}")));
    }
    let eig = hermitian_eigen(r)?;
    Ok(split(eig, k))
}

/// Like [`signal_subspace`] but accepts `k = 0` (empty signal subspace).
pub fn split_subspaces(r: &CMatrix, k: usize) -> Result<SignalSubspace> {
    check_square(r)?;
    if k >= r.nrows() {
        return Err(invalid_arg(format!("K={k} leaves no noise subspace for M={}", r.nrows())));
    }
    Ok(split(hermitian_eigen(r)?, k))
}

fn split(eig: EigenDecomposition, k: usize) -> SignalSubspace {
    let m = eig.dim();
    let degenerate = k > 0 && {
        let (a, b) = (eig.values[k - 1], eig.values[k]);
        (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    };
    SignalSubspace {
        basis: eig.vectors.columns(0, k).into_owned(),
        noise: eig.vectors.columns(k, m - k).into_owned(),
        eigenvalues: eig.values,
        degenerate,
    }
}

/// Orthonormalizes `k` columns of length `m` stored column-major in `cols`,
/// in place, by Gram–Schmidt with one re-orthogonalization pass.
///
/// On rank deficiency returns the condition estimate
/// `max column norm / min orthogonal residual`.
pub(crate) fn orthonormalize(cols: &mut [C64], m: usize, k: usize, rank_tol: f64) -> Result<(), f64> {
    debug_assert_eq!(cols.len(), m * k);
    let mut max_norm = 0.0f64;
    for j in 0..k {
        let (done, rest) = cols.split_at_mut(j * m);
        let v = &mut rest[..m];
        max_norm = max_norm.max(norm(v));
        for _ in 0..2 {
            for q in done.chunks_exact(m) {
                let c = dotc(q, v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let r = norm(v);
        if !(r > rank_tol * max_norm) {
            let cond = if r > 0.0 { max_norm / r } else { f64::INFINITY };
            return Err(cond);
        }
        let inv = 1.0 / r;
        for vi in v.iter_mut() {
            *vi *= inv;
        }
    }
    Ok(())
}

/// `Σ conj(a_i)·b_i`.
#[inline]
pub(crate) fn dotc(a: &[C64], b: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

#[inline]
pub(crate) fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// Orthonormal basis `Q` (`M×K`) for the column space of `a`.
pub fn orthonormal_basis(a: &CMatrix) -> Result<CMatrix> {
    let (m, k) = a.shape();
    if m == 0 || k == 0 || k > m {
        return Err(invalid_arg(format!("cannot build a column basis from a {m}x{k} matrix")));
    }
    let mut buf = a.as_slice().to_vec();
    orthonormalize(&mut buf, m, k, RANK_TOL).map_err(|condition| Error::IllConditionedBasis { condition })?;
    Ok(CMatrix::from_column_slice(m, k, &buf))
}

/// Orthogonal projector `A(AᴴA)⁻¹Aᴴ` onto the column space of `a`.
///
/// Built as `QQᴴ` from a Gram–Schmidt factorization `A = QR`, which is
/// algebraically identical and avoids forming the Gram inverse.
pub fn column_projector(a: &CMatrix) -> Result<CMatrix> {
    let q = orthonormal_basis(a)?;
    Ok(&q * q.adjoint())
}

/// `Y − a(aᴴY)/(aᴴa)`: removes the component of every column along `a`.
pub fn residual_project(y: &CMatrix, a: &[C64]) -> Result<CMatrix> {
    if a.len() != y.nrows() {
        return Err(invalid_arg(format!("vector length {} does not match {} rows", a.len(), y.nrows())));
    }
    let energy = norm_sqr(a);
    if !(energy > 0.0) {
        return Err(invalid_arg("cannot project out a zero vector"));
    }
    let mut out = y.clone();
    let m = y.nrows();
    for col in out.as_mut_slice().chunks_exact_mut(m) {
        let c = dotc(a, col) / energy;
        for (yi, ai) in col.iter_mut().zip(a) {
            *yi -= ai * c;
        }
    }
    Ok(out)
}
