//! Small dense kernels on row-major square matrices.
//!
//! The separators handled here are at most a few dozen nodes wide, so a
//! plain Cholesky factorization is all the partial-correlation and
//! regression code needs.

use crate::scalar::Real;

/// Row-major square matrix used for small symmetric systems.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SquareMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn add_to_diagonal(&mut self, v: T) {
        for i in 0..self.n {
            self.data[i * self.n + i] = self.data[i * self.n + i] + v;
        }
    }

    /// Lower Cholesky factor `L` with `A = L Lᵀ`, or `None` when a pivot is
    /// not strictly positive relative to the diagonal scale.
    pub fn cholesky(&self) -> Option<CholeskyFactor<T>> {
        let n = self.n;
        let mut l = vec![T::zero(); n * n];
        let scale = (0..n)
            .map(|i| self.get(i, i).abs())
            .fold(T::zero(), T::max)
            .max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::of_usize(n.max(1));
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            if !(d > tiny) {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(CholeskyFactor { n, l })
    }
}

/// Lower-triangular Cholesky factor.
#[derive(Clone, Debug)]
pub struct CholeskyFactor<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> CholeskyFactor<T> {
    #[inline]
    pub fn l(&self, i: usize, j: usize) -> T {
        self.l[i * self.n + j]
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s = s - self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Diagonal of `A⁻¹`.
    pub fn inverse_diagonal(&self) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n];
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = T::zero());
            col[j] = T::one();
            self.solve_in_place(&mut col);
            out[j] = col[j];
        }
        out
    }

    /// Full inverse `A⁻¹`.
    pub fn inverse(&self) -> SquareMatrix<T> {
        let n = self.n;
        let mut inv = SquareMatrix::zeros(n);
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = T::zero());
            col[j] = T::one();
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = SquareMatrix::from_fn(3, |i, j| [[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]][i][j]);
        let chol = a.cholesky().unwrap();
        let mut x = vec![1.0, 2.0, 3.0];
        chol.solve_in_place(&mut x);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a.get(i, j) * x[j]).sum();
            assert!((ax - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let inv = chol.inverse();
        let diag = chol.inverse_diagonal();
        for i in 0..3 {
            assert!((inv.get(i, i) - diag[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = SquareMatrix::from_fn(2, |_, _| 1.0f64);
        assert!(a.cholesky().is_none());
        let mut b = a.clone();
        b.add_to_diagonal(1e-8);
        assert!(b.cholesky().is_some());
    }
}
