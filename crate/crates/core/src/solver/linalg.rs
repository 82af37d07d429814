//! Dense LU factorisation with partial pivoting.

use num_complex::{Complex64, ComplexFloat};

use crate::error::{Error, Result};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: ComplexFloat<Real = f64>> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// `P A = L U` with unit lower-triangular `L`, packed in place.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: ComplexFloat<Real = f64>> Lu<T> {
    pub fn factor(mut a: Matrix<T>) -> Result<Self> {
        let n = a.n;
        let scale = a.max_abs();
        let tiny = scale * n as f64 * f64::EPSILON;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot_abs) =
                (k..n)
                    .map(|i| (i, a[(i, k)].abs()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if !(pivot_abs > tiny) || pivot_abs == 0.0 {
                return Err(Error::Singular {
                    column: k,
                    pivot: pivot_abs.max(0.0),
                });
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = T::one() / a[(k, k)];
            let (upper, lower) = a.data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n + k + 1..k * n + n];
            for row in lower.chunks_exact_mut(n) {
                let l = row[k] * inv;
                row[k] = l;
                if l != T::zero() {
                    for (x, &u) in row[k + 1..].iter_mut().zip(pivot_row) {
                        *x = *x - l * u;
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn n(&self) -> usize {
        self.lu.n
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.lu.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - row[j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - row[j] * x[j];
            }
            x[i] = acc / row[i];
        }
        Ok(x)
    }
}

/// Solution of `A x = b` with its relative residual `‖Ax − b‖∞ / ‖b‖∞`.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub x: Vec<Complex64>,
    pub relative_residual: f64,
}

fn residual<T: ComplexFloat<Real = f64>>(a: &Matrix<T>, x: &[T], b: &[T]) -> (Vec<T>, f64) {
    let ax = a.mul_vec(x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let rn = r.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
    (r, rn)
}

/// Solves a dense complex system by LU with partial pivoting, with one round
/// of iterative refinement when the residual exceeds `1e-10 ‖b‖`.
pub fn solve_linear(a: &Matrix<Complex64>, b: &[Complex64]) -> Result<LinearSolution> {
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: b.len(),
        });
    }
    let lu = Lu::factor(a.clone())?;
    let mut x = lu.solve(b)?;
    let bn = b.iter().fold(0.0, |acc: f64, v| acc.max(v.norm()));
    let (r, mut rn) = residual(a, &x, b);
    if rn > 1e-10 * bn {
        let dx = lu.solve(&r)?;
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        rn = residual(a, &x, b).1;
    }
    let relative_residual = if bn > 0.0 { rn / bn } else { rn };
    Ok(LinearSolution {
        x,
        relative_residual,
    })
}
