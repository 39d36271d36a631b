//! Dense complex Hermitian primitives: PSD checks, square roots, range
//! isometries, spectral decompositions and numerical kernels.
//!
//! Eigen- and singular value decompositions are delegated to `nalgebra`.
//! All tolerances are relative to the scale of the matrix they are applied to.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{creal, lit, scaled_tol, to_f64, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Largest entry modulus.
pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.modulus()))
}

pub fn is_finite<T: Real>(m: &CMatrix<T>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Tolerance of the Hermitian invariant: `|M - M^H|_max <= tol * (1 + |M|_max)`.
fn hermitian_tol<T: Real>() -> T {
    scaled_tol(1e-12, 64.0)
}

/// A square complex matrix equal to its own adjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMatrix<T: Real>(CMatrix<T>);

impl<T: Real> HermMatrix<T> {
    /// Accepts `m` if it is square, finite and Hermitian within tolerance.
    /// The stored matrix is the exact Hermitian part of `m`.
    pub fn new(m: CMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if !is_finite(&m) {
            return Err(Error::NonFinite);
        }
        let deviation = max_abs(&(&m - m.adjoint()));
        if deviation > hermitian_tol::<T>() * (T::one() + max_abs(&m)) {
            return Err(Error::NotHermitian {
                deviation: to_f64(deviation),
            });
        }
        Ok(Self::hermitize_unchecked(m))
    }

    /// `(M + M^H) / 2` without the closeness check.
    pub(crate) fn hermitize_unchecked(m: CMatrix<T>) -> Self {
        let half = creal(lit::<T>(0.5));
        let sym = (&m + m.adjoint()) * half;
        Self(sym)
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[T]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| creal(x)));
        Self(CMatrix::from_diagonal(&d))
    }

    /// `|v><v|`.
    pub fn outer(v: &CVector<T>) -> Self {
        Self::hermitize_unchecked(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.0
    }

    pub fn trace(&self) -> T {
        self.0
            .diagonal()
            .iter()
            .fold(T::zero(), |acc, z| acc + z.re)
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.0)
    }

    pub fn frobenius(&self) -> T {
        self.0.norm()
    }

    pub fn scale(&self, s: T) -> Self {
        Self(&self.0 * creal(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: T, other: &Self) {
        self.0 += &other.0 * creal(s);
    }

    /// `A M A^H` for any (possibly rectangular) `A`.
    pub fn congruence(&self, a: &CMatrix<T>) -> Self {
        Self::hermitize_unchecked(a * &self.0 * a.adjoint())
    }

    /// `Re tr(self * other)`, which is the full trace for Hermitian operands.
    pub fn trace_product(&self, other: &Self) -> T {
        let (a, b) = (&self.0, &other.0);
        let n = a.nrows();
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc += (a[(i, j)] * b[(j, i)]).re;
            }
        }
        acc
    }
}

/// `(M + M^H) / 2`.
pub fn hermitize<T: Real>(m: &CMatrix<T>) -> Result<HermMatrix<T>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    Ok(HermMatrix::hermitize_unchecked(m.clone()))
}

/// Eigenvalues in ascending order and the unitary whose columns are the
/// matching eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomp<T: Real> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: CMatrix<T>,
}

impl<T: Real> SpectralDecomp<T> {
    pub fn min(&self) -> T {
        self.eigenvalues.first().copied().unwrap_or_else(T::zero)
    }

    pub fn max(&self) -> T {
        self.eigenvalues.last().copied().unwrap_or_else(T::zero)
    }

    pub fn spectral_radius(&self) -> T {
        self.min().abs().max(self.max().abs())
    }

    /// `V f(Λ) V^H`.
    pub fn apply(&self, f: impl Fn(T) -> T) -> HermMatrix<T> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(lam));
        }
        HermMatrix::hermitize_unchecked(scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> HermMatrix<T> {
        self.apply(|x| x)
    }
}

pub fn eig_hermitian<T: Real>(m: &HermMatrix<T>) -> Result<SpectralDecomp<T>> {
    let n = m.dim();
    if n == 0 {
        return Ok(SpectralDecomp {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let eig =
        m.0.clone()
            .try_symmetric_eigen(lit(T::EPS), 1000 * n)
            .ok_or(Error::EigenFailed)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomp {
        eigenvalues,
        eigenvectors,
    })
}

fn psd_floor<T: Real>(decomp: &SpectralDecomp<T>, tol: T) -> T {
    -tol * (T::one() + decomp.spectral_radius())
}

/// True iff the smallest eigenvalue is at least `-tol * (1 + max|λ|)`.
pub fn is_psd<T: Real>(m: &HermMatrix<T>, tol: T) -> Result<bool> {
    let decomp = eig_hermitian(m)?;
    Ok(decomp.min() >= psd_floor(&decomp, tol))
}

/// Principal square root. Eigenvalues in `[-tol * (1 + max|λ|), 0)` are
/// clamped to zero; anything more negative is rejected.
pub fn psd_sqrt<T: Real>(m: &HermMatrix<T>, tol: T) -> Result<HermMatrix<T>> {
    let decomp = eig_hermitian(m)?;
    if decomp.min() < psd_floor(&decomp, tol) {
        return Err(Error::NotPsd {
            min_eigenvalue: to_f64(decomp.min()),
        });
    }
    Ok(decomp.apply(|x| x.max(T::zero()).sqrt()))
}

/// Inverse square root of a positive definite matrix.
pub fn pd_inv_sqrt<T: Real>(m: &HermMatrix<T>, rel_floor: T) -> Result<HermMatrix<T>> {
    let decomp = eig_hermitian(m)?;
    if decomp.min() <= rel_floor * decomp.max().max(T::zero()) || decomp.min() <= T::zero() {
        return Err(Error::NotPsd {
            min_eigenvalue: to_f64(decomp.min()),
        });
    }
    Ok(decomp.apply(|x| T::one() / x.sqrt()))
}

/// Orthonormal basis of the dominant eigenspace of a PSD matrix together
/// with the retained eigenvalues (descending).
#[derive(Clone, Debug)]
pub struct Range<T: Real> {
    /// `d x r`, orthonormal columns.
    pub basis: CMatrix<T>,
    pub eigenvalues: Vec<T>,
}

impl<T: Real> Range<T> {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(sqrt(λ))`, i.e. `sqrt(M) V`.
    pub fn sqrt_factor(&self) -> CMatrix<T> {
        let mut f = self.basis.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            f.column_mut(j).scale_mut(lam.sqrt());
        }
        f
    }
}

/// Keeps eigenvectors whose eigenvalue exceeds `tol * max(λ_max, 1)`.
pub fn range_isometry<T: Real>(m: &HermMatrix<T>, tol: T) -> Result<Range<T>> {
    let decomp = eig_hermitian(m)?;
    let d = m.dim();
    let threshold = tol * decomp.max().max(T::one());
    let keep: Vec<usize> = (0..d)
        .rev()
        .filter(|&j| decomp.eigenvalues[j] > threshold)
        .collect();
    let basis = CMatrix::from_fn(d, keep.len(), |r, c| decomp.eigenvectors[(r, keep[c])]);
    let eigenvalues = keep.iter().map(|&j| decomp.eigenvalues[j]).collect();
    Ok(Range { basis, eigenvalues })
}

/// Singular spectrum and numerical null space of a rectangular matrix.
#[derive(Clone, Debug)]
pub struct NullSpace<T: Real> {
    /// Descending, one per column (zeros appended for wide matrices).
    pub singular_values: Vec<T>,
    /// `σ <= threshold` places a right singular vector in the kernel.
    pub threshold: T,
    /// Ordered by ascending singular value.
    pub basis: Vec<CVector<T>>,
}

impl<T: Real> NullSpace<T> {
    pub fn sigma_max(&self) -> T {
        self.singular_values
            .first()
            .copied()
            .unwrap_or_else(T::zero)
    }

    pub fn sigma_min(&self) -> T {
        self.singular_values.last().copied().unwrap_or_else(T::zero)
    }
}

/// SVD-based null space: right singular vectors with
/// `σ <= tol * σ_max * max(rows, cols)`.
pub fn null_space<T: Real>(a: &CMatrix<T>, tol: T) -> Result<NullSpace<T>> {
    let (rows, cols) = a.shape();
    null_space_by(a, |sigma_max| tol * sigma_max * lit(rows.max(cols) as f64))
}

/// Null space with a caller-chosen absolute threshold `σ <= threshold`.
pub fn null_space_below<T: Real>(a: &CMatrix<T>, threshold: T) -> Result<NullSpace<T>> {
    null_space_by(a, |_| threshold)
}

fn null_space_by<T: Real>(a: &CMatrix<T>, threshold: impl FnOnce(T) -> T) -> Result<NullSpace<T>> {
    let (rows, cols) = a.shape();
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    if cols == 0 {
        return Ok(NullSpace {
            singular_values: Vec::new(),
            threshold: T::zero(),
            basis: Vec::new(),
        });
    }
    // A thin SVD of a wide matrix only yields `rows` right singular vectors;
    // zero padding to square keeps the kernel and exposes all of them.
    let padded;
    let work = if rows < cols {
        let mut p = CMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        padded = p;
        &padded
    } else {
        a
    };
    let n = work.nrows().max(work.ncols());
    let svd = work
        .clone()
        .try_svd(false, true, lit(T::EPS), 1000 * n)
        .ok_or(Error::SvdFailed)?;
    let v_t = svd.v_t.ok_or(Error::SvdFailed)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&x, &y| {
        sv[y]
            .partial_cmp(&sv[x])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let singular_values: Vec<T> = order.iter().map(|&i| sv[i]).collect();
    let threshold = threshold(singular_values[0]);
    let basis = order
        .iter()
        .rev()
        .filter(|&&i| sv[i] <= threshold)
        .map(|&i| v_t.row(i).adjoint())
        .collect();
    Ok(NullSpace {
        singular_values,
        threshold,
        basis,
    })
}

/// Orthonormal basis of the numerical null space; empty means injective.
pub fn kernel_basis<T: Real>(a: &CMatrix<T>, tol: T) -> Result<Vec<CVector<T>>> {
    Ok(null_space(a, tol)?.basis)
}

/// `|U^H U - I|_max`.
pub fn unitarity_defect<T: Real>(u: &CMatrix<T>) -> T {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

pub mod pauli {
    use super::*;
    use crate::scalar::cplx;

    pub fn x<T: Real>() -> HermMatrix<T> {
        let (o, l) = (T::zero(), T::one());
        HermMatrix(CMatrix::from_row_slice(
            2,
            2,
            &[cplx(o, o), cplx(l, o), cplx(l, o), cplx(o, o)],
        ))
    }

    pub fn y<T: Real>() -> HermMatrix<T> {
        let (o, l) = (T::zero(), T::one());
        HermMatrix(CMatrix::from_row_slice(
            2,
            2,
            &[cplx(o, o), cplx(o, -l), cplx(o, l), cplx(o, o)],
        ))
    }

    pub fn z<T: Real>() -> HermMatrix<T> {
        HermMatrix::from_real_diagonal(&[T::one(), -T::one()])
    }

    /// `w * (I + n . σ)`.
    pub fn bloch<T: Real>(weight: T, n: [T; 3]) -> HermMatrix<T> {
        let mut m = HermMatrix::identity(2);
        m.axpy(n[0], &x());
        m.axpy(n[1], &y());
        m.axpy(n[2], &z());
        m.scale(weight)
    }
}
