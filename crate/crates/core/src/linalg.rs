//! Small dense matrices (dimension at most [`MAX_DIM`]) and the symmetric
//! eigen-solver behind the diffusion coefficient `σ = √a`.

use std::ops::{Index, IndexMut};

use crate::error::{invalid, CoreError, Result};
use crate::scalar::{lit, Real};

/// Largest spatial dimension supported by the fixed-capacity matrix type.
pub const MAX_DIM: usize = 8;

/// Square matrix of dimension `dim <= MAX_DIM`, stored row-major inline so
/// that per-step coefficient evaluation never allocates.
#[derive(Clone, Copy, PartialEq)]
pub struct Matrix<T> {
    dim: usize,
    data: [T; MAX_DIM * MAX_DIM],
}

impl<T: Real> std::fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: Vec<Vec<T>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)]).collect())
            .collect();
        f.debug_struct("Matrix")
            .field("dim", &self.dim)
            .field("rows", &rows)
            .finish()
    }
}

impl<T: Real> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "matrix dimension {dim} out of range");
        Self {
            dim,
            data: [T::zero(); MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, s: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = s;
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[&[T]]) -> Self {
        let mut m = Self::zeros(rows.len());
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), rows.len(), "matrix rows must be square");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Builds a matrix from an `f64` row-major slice.
    pub fn from_f64(dim: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), dim * dim);
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = lit(values[i * dim + j]);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc += self[(i, k)] * rhs[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// `out = self · x`.
    #[inline]
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        let n = self.dim;
        for i in 0..n {
            let mut acc = T::zero();
            for k in 0..n {
                acc += self[(i, k)] * x[k];
            }
            out[i] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] -= rhs[(i, j)];
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] *= s;
            }
        }
        out
    }

    pub fn frobenius(&self) -> T {
        let mut acc = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self[(i, j)] * self[(i, j)];
            }
        }
        acc.sqrt()
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max(self[(i, j)].abs());
            }
        }
        m
    }

    /// Largest `|m_ij - m_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> T {
        let scale = self.max_abs();
        if scale == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self[(i, j)].is_finite()))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * MAX_DIM + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * MAX_DIM + j]
    }
}

/// Eigen-decomposition `A = V diag(λ) Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone, Copy)]
pub struct SymmetricEigen<T: Real> {
    /// Eigenvalues in ascending order.
    pub values: [T; MAX_DIM],
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: Matrix<T>,
    pub dim: usize,
}

impl<T: Real> SymmetricEigen<T> {
    pub fn eigenvalues(&self) -> &[T] {
        &self.values[..self.dim]
    }

    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        self.values[self.dim - 1]
    }

    /// Reassembles `V diag(g(λ)) Vᵀ`, symmetrised.
    pub fn map(&self, g: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.dim;
        let v = &self.vectors;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc += v[(i, k)] * g(self.values[k]) * v[(j, k)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }
}

/// Cyclic Jacobi eigen-solver. The input is assumed symmetric; only the
/// upper triangle drives the rotations.
pub fn symmetric_eigen<T: Real>(a: &Matrix<T>) -> SymmetricEigen<T> {
    let n = a.dim();
    let mut m = *a;
    let mut v = Matrix::identity(n);
    let scale = a.frobenius();
    let tiny = T::epsilon() * T::epsilon() * scale * scale;

    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off <= tiny {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (lit::<T>(2.0) * apq);
                let t = if theta.abs() > lit(1e150) {
                    T::one() / (lit::<T>(2.0) * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: [usize; MAX_DIM] = [0, 1, 2, 3, 4, 5, 6, 7];
    order[..n].sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let mut values = [T::zero(); MAX_DIM];
    let mut vectors = Matrix::zeros(n);
    for (dst, &src) in order[..n].iter().enumerate() {
        values[dst] = m[(src, src)];
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    SymmetricEigen {
        values,
        vectors,
        dim: n,
    }
}

fn check_symmetric<T: Real>(a: &Matrix<T>) -> Result<()> {
    if !a.is_finite() {
        return invalid("matrix has non-finite entries");
    }
    let asym = a.asymmetry();
    if asym > T::symmetry_tol() {
        return invalid(format!("matrix is not symmetric (relative asymmetry {asym:e})"));
    }
    Ok(())
}

/// Principal symmetric square root of a symmetric positive-definite matrix.
pub fn sqrt_spd<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    check_symmetric(a)?;
    if a.dim() == 1 {
        let v = a[(0, 0)];
        if v <= T::zero() {
            return Err(CoreError::Ellipticity(format!("eigenvalue {v:e} is not positive")));
        }
        return Ok(Matrix::scaled_identity(1, v.sqrt()));
    }
    let eig = symmetric_eigen(a);
    if eig.min() <= T::zero() {
        return Err(CoreError::Ellipticity(format!(
            "eigenvalue {:e} is not positive",
            eig.min()
        )));
    }
    Ok(eig.map(|l| l.sqrt()))
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
pub fn cholesky<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.dim();
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) {
            return Err(CoreError::Ellipticity(format!(
                "matrix is not positive definite (pivot {j} = {d:e})"
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` in place given the Cholesky factor.
pub fn cholesky_solve_in_place<T: Real>(l: &Matrix<T>, b: &mut [T]) {
    let n = l.dim();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_root_is_identity() {
        let s = sqrt_spd(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(s, Matrix::identity(3));
    }

    #[test]
    fn diagonal_root() {
        let s = sqrt_spd(&Matrix::<f64>::from_diag(&[4.0, 9.0])).unwrap();
        assert!((s[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((s[(1, 1)] - 3.0).abs() < 1e-15);
        assert_eq!(s[(0, 1)], 0.0);
    }

    #[test]
    fn two_by_two_root_matches_closed_form() {
        // eigenpairs (1, (1,-1)/√2), (3, (1,1)/√2): root = ((√3+1)/2, (√3-1)/2; ...)
        let r3 = 3f64.sqrt();
        let (diag, off) = ((r3 + 1.0) / 2.0, (r3 - 1.0) / 2.0);
        let s = sqrt_spd(&Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        for (i, j, want) in [(0, 0, diag), (0, 1, off), (1, 0, off), (1, 1, diag)] {
            assert!((s[(i, j)] - want).abs() < 1e-14, "({i},{j}) = {}", s[(i, j)]);
        }
        assert!((diag - 1.36603).abs() < 1e-5 && (off - 0.36603).abs() < 1e-5);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let asym = Matrix::from_rows(&[&[2.0, 1.0], &[0.5, 2.0]]);
        assert!(matches!(sqrt_spd(&asym), Err(CoreError::Validation(_))));
        let indef = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(sqrt_spd(&indef), Err(CoreError::Ellipticity(_))));
        assert!(matches!(
            sqrt_spd(&Matrix::from_diag(&[-1.0])),
            Err(CoreError::Ellipticity(_))
        ));
    }

    #[test]
    fn eigen_of_rotated_diagonal() {
        let c = 0.6f64;
        let s = 0.8f64;
        let q = Matrix::from_rows(&[&[c, -s, 0.0], &[s, c, 0.0], &[0.0, 0.0, 1.0]]);
        let a = q.matmul(&Matrix::from_diag(&[5.0, 0.5, 2.0])).matmul(&q.transpose());
        let eig = symmetric_eigen(&a);
        let want = [0.5, 2.0, 5.0];
        for (got, want) in eig.eigenvalues().iter().zip(want) {
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn cholesky_solve_roundtrip() {
        let a = Matrix::<f64>::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]);
        let l = cholesky(&a).unwrap();
        let x = [1.0, -2.0, 0.5];
        let mut b = a.mul_vec(&x);
        cholesky_solve_in_place(&l, &mut b);
        for (got, want) in b.iter().zip(x) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let s = sqrt_spd(&Matrix::<f32>::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        let back = s.matmul(&s);
        assert!((back[(0, 0)] - 2.0).abs() < 1e-5);
        assert!((back[(0, 1)] - 1.0).abs() < 1e-5);
    }
}
