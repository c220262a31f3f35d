//! Dense real linear algebra kernels: symmetric eigendecomposition, positive
//! semidefinite functional calculus, Kronecker products, column-stacking
//! vectorization, condition numbers, the QRAM row-norm parameter, and
//! Moore-Penrose pseudo-inverses.
//!
//! Conventions used throughout the crate:
//! - matrices are row-major `f64`, immutable after construction;
//! - `vec` stacks columns, so `vec([[1,2],[3,4]]) = (1,3,2,4)`;
//! - every operation expecting a symmetric input symmetrizes it as
//!   `(M + M^T)/2` first;
//! - positive definiteness is decided against an absolute eigenvalue floor
//!   (`DEFAULT_PSD_FLOOR`) to separate boundary-of-cone failures from
//!   roundoff.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Absolute eigenvalue floor below which a matrix is treated as not strictly
/// positive definite.
pub const DEFAULT_PSD_FLOOR: f64 = 1e-12;

/// Relative singular value threshold below which a matrix counts as singular
/// to working precision.
pub const SINGULARITY_RTOL: f64 = 1e-14;

/// Size cap (total entries) for Kronecker products; larger requests are
/// refused instead of exhausting memory.
pub const KRON_MAX_ENTRIES: usize = 1 << 24;

/// Step of the default exponent grid used by [`mu_param`].
pub const MU_GRID_STEP: f64 = 0.05;

/// Dense row-major matrix of `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    /// Build from row-major entries; `entries.len()` must equal `rows * cols`.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Self {
        assert_eq!(
            entries.len(),
            rows * cols,
            "entry count {} does not match {}x{}",
            entries.len(),
            rows,
            cols
        );
        let m = DenseMatrix { rows, cols, entries };
        m.debug_check_finite();
        m
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = DenseMatrix::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Build from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            entries.extend_from_slice(row);
        }
        DenseMatrix::new(r, c, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Copy out as nested rows (used by the JSON writers).
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.entries[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out.debug_check_finite();
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "vector length must match columns");
        (0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        let entries = self.entries.iter().map(|v| v * s).collect();
        DenseMatrix::new(self.rows, self.cols, entries)
    }

    /// In-place `self += s * other`; used to accumulate constraint sums.
    pub fn add_scaled_assign(&mut self, other: &DenseMatrix, s: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.entries.iter_mut().zip(other.entries.iter()) {
            *a += s * b;
        }
    }

    /// Replace by `(M + M^T)/2`; the canonical symmetric representative.
    pub fn symmetrize(&self) -> DenseMatrix {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        singular_values(self).into_iter().fold(0.0, f64::max)
    }

    /// Frobenius norm of the asymmetric part, as a fraction of the norm.
    pub fn asymmetry(&self) -> f64 {
        let diff = self.sub(&self.transpose()).frobenius_norm();
        let scale = self.frobenius_norm();
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    fn zip(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(other.entries.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        DenseMatrix::new(self.rows, self.cols, entries)
    }

    fn debug_check_finite(&self) {
        debug_assert!(
            self.entries.iter().all(|v| v.is_finite()),
            "matrix contains a non-finite entry"
        );
    }

    pub(crate) fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }

    /// Validating constructor from nested rows; rejects ragged input.
    pub fn try_from_rows(rows: Vec<Vec<f64>>) -> std::result::Result<Self, String> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut entries = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                ));
            }
            entries.extend_from_slice(row);
        }
        Ok(DenseMatrix {
            rows: r,
            cols: c,
            entries,
        })
    }

    pub(crate) fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }
}

impl serde::Serialize for DenseMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for DenseMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        DenseMatrix::try_from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm of a slice.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Column-stacking vectorization of a square matrix:
/// `vec(M)[j*n + i] = M[i][j]`.
pub fn vec(m: &DenseMatrix) -> Vec<f64> {
    assert!(m.is_square(), "vec needs a square matrix");
    let n = m.rows();
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(m.get(i, j));
        }
    }
    out
}

/// Inverse of [`vec`]: rebuild the `n x n` matrix from its column stack.
pub fn unvec(v: &[f64], n: usize) -> DenseMatrix {
    assert_eq!(v.len(), n * n, "length must be n^2");
    let mut out = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            out.set(i, j, v[j * n + i]);
        }
    }
    out
}

/// Kronecker product `A (x) B`; satisfies `(A (x) B) vec(X) = vec(B X A^T)`
/// for conforming `X` under column-stacking vectorization.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let rows = a.rows().checked_mul(b.rows());
    let cols = a.cols().checked_mul(b.cols());
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some_and(|t| t <= KRON_MAX_ENTRIES) => (r, c),
        _ => {
            return Err(Error::InstanceTooLarge {
                rows: a.rows() * b.rows(),
                cols: a.cols() * b.cols(),
            })
        }
    };
    let mut out = DenseMatrix::zeros(rows, cols);
    for ia in 0..a.rows() {
        for ja in 0..a.cols() {
            let s = a.get(ia, ja);
            if s == 0.0 {
                continue;
            }
            for ib in 0..b.rows() {
                for jb in 0..b.cols() {
                    out.set(ia * b.rows() + ib, ja * b.cols() + jb, s * b.get(ib, jb));
                }
            }
        }
    }
    Ok(out)
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// descending and orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `eigenvalues`.
    pub eigenvectors: DenseMatrix,
}

impl SymEig {
    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("empty decomposition")
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.first().expect("empty decomposition")
    }

    /// Rebuild `Q diag(f(lambda)) Q^T`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        let mut out = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let fl = f(self.eigenvalues[k]);
            if fl == 0.0 {
                continue;
            }
            for i in 0..n {
                let qik = q.get(i, k);
                if qik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + fl * qik * q.get(j, k);
                    out.set(i, j, v);
                }
            }
        }
        out.symmetrize()
    }

    /// Rebuild the original matrix `Q Lambda Q^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.apply(|l| l)
    }

    /// `Q diag(f(lambda)) Q^T x` without materializing the matrix.
    pub fn apply_to_vec(&self, f: impl Fn(f64) -> f64, x: &[f64]) -> Vec<f64> {
        let n = self.eigenvalues.len();
        assert_eq!(x.len(), n);
        let q = &self.eigenvectors;
        // coords = f(Lambda) Q^T x
        let coords: Vec<f64> = (0..n)
            .map(|k| {
                let s: f64 = x.iter().enumerate().map(|(i, xi)| q.get(i, k) * xi).sum();
                f(self.eigenvalues[k]) * s
            })
            .collect();
        (0..n)
            .map(|i| {
                coords
                    .iter()
                    .enumerate()
                    .map(|(k, c)| q.get(i, k) * c)
                    .sum()
            })
            .collect()
    }
}

/// Symmetric eigendecomposition. The input is symmetrized as `(M + M^T)/2`
/// first; callers must not pass matrices with relative asymmetry above 1e-8.
pub fn sym_eig(m: &DenseMatrix) -> Result<SymEig> {
    assert!(m.is_square(), "sym_eig needs a square matrix");
    debug_assert!(
        m.asymmetry() <= 1e-8,
        "input relative asymmetry {:e} exceeds 1e-8",
        m.asymmetry()
    );
    let sym = m.symmetrize();
    let eig = nalgebra::SymmetricEigen::try_new(sym.to_na(), f64::EPSILON, 4096)
        .ok_or(Error::EigFailed)?;
    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("non-finite eigenvalue")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors.set(i, dst, eig.eigenvectors[(i, src)]);
        }
    }
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Matrix power of a symmetric positive definite matrix for
/// `p in {-1, -1/2, 1/2}`, via functional calculus on [`sym_eig`].
pub fn psd_power(m: &DenseMatrix, p: f64) -> Result<DenseMatrix> {
    psd_power_with_floor(m, p, DEFAULT_PSD_FLOOR)
}

/// [`psd_power`] with an explicit positive definiteness floor.
pub fn psd_power_with_floor(m: &DenseMatrix, p: f64, floor: f64) -> Result<DenseMatrix> {
    assert!(
        p == -1.0 || p == -0.5 || p == 0.5,
        "unsupported exponent {p}"
    );
    let eig = sym_eig(m)?;
    if eig.min_eigenvalue() < floor {
        return Err(Error::NotPositiveDefinite {
            min_eig: eig.min_eigenvalue(),
            floor,
        });
    }
    Ok(eig.apply(|l| l.powf(p)))
}

/// All singular values of a general matrix (unordered).
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    let svd = nalgebra::SVD::try_new(m.to_na(), false, false, f64::EPSILON, 4096)
        .expect("svd did not converge");
    svd.singular_values.iter().copied().collect()
}

/// Ratio of the extreme singular values; `+inf` when the matrix is singular
/// to working precision (`sigma_min < 1e-14 * sigma_max`).
pub fn condition_number(m: &DenseMatrix) -> f64 {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 || min < SINGULARITY_RTOL * max {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Row q-norm parameter `s_q(A) = max_i sum_j |a_ij|^q`, counting only
/// nonzero entries (so `0^0` contributes nothing and `s_0` is the max row
/// support size).
fn row_power_sum(m: &DenseMatrix, q: f64) -> f64 {
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .filter(|&&v| v != 0.0)
                .map(|&v| v.abs().powf(q))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// QRAM normalization parameter: the minimum of the Frobenius norm and
/// `sqrt(s_{2p}(A) * s_{1-2p}(A^T))` over an exponent grid `p in [0, 1]`.
/// Grid evaluation upper-bounds the continuous minimum and tightens
/// monotonically as the grid refines.
pub fn mu_param(m: &DenseMatrix, p_grid: Option<&[f64]>) -> f64 {
    let default_grid: Vec<f64>;
    let grid = match p_grid {
        Some(g) => {
            assert!(!g.is_empty(), "exponent grid must be nonempty");
            g
        }
        None => {
            let steps = (1.0 / MU_GRID_STEP).round() as usize;
            default_grid = (0..=steps).map(|k| k as f64 * MU_GRID_STEP).collect();
            &default_grid
        }
    };
    let t = m.transpose();
    let mut best = m.frobenius_norm();
    for &p in grid {
        debug_assert!((0.0..=1.0).contains(&p), "grid exponent out of [0,1]");
        let cand = (row_power_sum(m, 2.0 * p) * row_power_sum(&t, 1.0 - 2.0 * p)).sqrt();
        if cand < best {
            best = cand;
        }
    }
    best
}

/// Moore-Penrose pseudo-inverse via SVD with singular values below
/// `1e-12 * sigma_max` truncated to zero.
pub fn pinv(m: &DenseMatrix) -> DenseMatrix {
    let svd = nalgebra::SVD::try_new(m.to_na(), true, true, f64::EPSILON, 4096)
        .expect("svd did not converge");
    let u = svd.u.as_ref().expect("svd requested with u");
    let v_t = svd.v_t.as_ref().expect("svd requested with v_t");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = 1e-12 * smax;
    let k = svd.singular_values.len();
    let mut inv_sigma = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cut {
            inv_sigma[(i, i)] = 1.0 / s;
        }
    }
    let p = v_t.transpose() * inv_sigma * u.transpose();
    DenseMatrix::from_na(&p)
}

/// Smallest factor `alpha >= 1` with
/// `alpha^{-1} * Base <= Other <= alpha * Base` in the semidefinite order,
/// computed from the eigenvalues of `Base^{-1/2} Other Base^{-1/2}`.
/// Fails with `NotComparable` when a generalized eigenvalue is nonpositive.
pub fn loewner_factor(base: &DenseMatrix, other: &DenseMatrix) -> Result<f64> {
    let r = psd_power(base, -0.5)?;
    let t = r.matmul(other).matmul(&r).symmetrize();
    let eig = sym_eig(&t)?;
    let min = eig.min_eigenvalue();
    if min <= 0.0 {
        return Err(Error::NotComparable { min_eig: min });
    }
    Ok(f64::max(eig.max_eigenvalue(), 1.0 / min))
}
