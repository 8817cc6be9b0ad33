//! Dense complex linear algebra over any [`CScalar`].
//!
//! The matrices here are small (at most a few dozen rows), so partial-pivot
//! LU and Jacobi sweeps are entirely adequate, and staying generic keeps the
//! arbitrary-precision path uniform.

use crate::error::{PrymError, Result};
use crate::scalar::{CScalar, RScalar};

#[derive(Debug, Clone, PartialEq)]
pub struct CMat<C: CScalar> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<C>,
}

impl<C: CScalar> CMat<C> {
    pub fn zeros(model: &C, rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![model.zero_like(); rows * cols],
        }
    }

    pub fn identity(model: &C, n: usize) -> Self {
        let mut m = CMat::zeros(model, n, n);
        for i in 0..n {
            *m.at_mut(i, i) = model.one_like();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C>>) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        assert!(rows.iter().all(|x| x.len() == c));
        CMat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn at(&self, i: usize, j: usize) -> &C {
        &self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut C {
        &mut self.data[i * self.cols + j]
    }

    pub fn model(&self) -> &C {
        &self.data[0]
    }

    pub fn transpose(&self) -> Self {
        let mut out = CMat::zeros(self.model(), self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = CMat::zeros(self.model(), self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k).clone();
                for j in 0..other.cols {
                    *out.at_mut(i, j) += a.clone() * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= b;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        out
    }

    pub fn scale(&self, s: &C) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn max_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.abs().to_f64())
            .fold(0.0f64, f64::max)
    }

    /// Max-norm of the antisymmetric part, for symmetry checks.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = (self.at(i, j).clone() - self.at(j, i)).abs().to_f64();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn map_c64(&self) -> Vec<Vec<num_complex::Complex64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j).to_c64()).collect())
            .collect()
    }

    /// Imaginary part as a real symmetric matrix in f64 (for reporting).
    pub fn imag_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j).to_c64().im).collect())
            .collect()
    }
}

pub struct Lu<C: CScalar> {
    lu: CMat<C>,
    perm: Vec<usize>,
    sign_flips: usize,
    /// max |pivot| / min |pivot|, a cheap conditioning proxy.
    pub pivot_ratio: f64,
}

pub fn lu_decompose<C: CScalar>(a: &CMat<C>) -> Result<Lu<C>> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign_flips = 0;
    let mut max_piv = 0.0f64;
    let mut min_piv = f64::INFINITY;
    for col in 0..n {
        // partial pivot
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, lu.at(r, col).abs().to_f64()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if pivot_abs == 0.0 {
            return Err(PrymError::RankDeficiency(format!(
                "zero pivot in column {col}"
            )));
        }
        max_piv = max_piv.max(pivot_abs);
        min_piv = min_piv.min(pivot_abs);
        if pivot_row != col {
            for j in 0..n {
                let tmp = lu.at(col, j).clone();
                *lu.at_mut(col, j) = lu.at(pivot_row, j).clone();
                *lu.at_mut(pivot_row, j) = tmp;
            }
            perm.swap(col, pivot_row);
            sign_flips += 1;
        }
        let piv = lu.at(col, col).clone();
        for r in (col + 1)..n {
            let factor = lu.at(r, col).clone() / &piv;
            *lu.at_mut(r, col) = factor.clone();
            for j in (col + 1)..n {
                let s = factor.clone() * lu.at(col, j);
                *lu.at_mut(r, j) -= s;
            }
        }
    }
    Ok(Lu {
        lu,
        perm,
        sign_flips,
        pivot_ratio: max_piv / min_piv.max(1e-300),
    })
}

impl<C: CScalar> Lu<C> {
    pub fn solve_vec(&self, b: &[C]) -> Vec<C> {
        let n = self.lu.rows;
        let mut y: Vec<C> = (0..n).map(|i| b[self.perm[i]].clone()).collect();
        for i in 1..n {
            for j in 0..i {
                let s = self.lu.at(i, j).clone() * &y[j];
                y[i] -= s;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let s = self.lu.at(i, j).clone() * &y[j];
                y[i] -= s;
            }
            y[i] = y[i].clone() / self.lu.at(i, i);
        }
        y
    }

    /// Solves A X = B columnwise.
    pub fn solve_mat(&self, b: &CMat<C>) -> CMat<C> {
        let n = self.lu.rows;
        let mut out = CMat::zeros(b.model(), n, b.cols);
        for j in 0..b.cols {
            let col: Vec<C> = (0..n).map(|i| b.at(i, j).clone()).collect();
            let sol = self.solve_vec(&col);
            for i in 0..n {
                *out.at_mut(i, j) = sol[i].clone();
            }
        }
        out
    }

    pub fn det(&self) -> C {
        let n = self.lu.rows;
        let mut d = self.lu.model().one_like();
        for i in 0..n {
            d *= self.lu.at(i, i).clone();
        }
        if self.sign_flips % 2 == 1 {
            d = -d;
        }
        d
    }
}

pub fn solve<C: CScalar>(a: &CMat<C>, b: &CMat<C>) -> Result<CMat<C>> {
    Ok(lu_decompose(a)?.solve_mat(b))
}

pub fn inverse<C: CScalar>(a: &CMat<C>) -> Result<CMat<C>> {
    let id = CMat::identity(a.model(), a.rows);
    solve(a, &id)
}

pub fn det<C: CScalar>(a: &CMat<C>) -> Result<C> {
    Ok(lu_decompose(a)?.det())
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi sweeps.
pub fn symmetric_eigenvalues<R: RScalar>(mat: &[Vec<R>]) -> Vec<f64> {
    let n = mat.len();
    let mut a: Vec<Vec<f64>> = mat
        .iter()
        .map(|row| row.iter().map(|x| x.to_f64()).collect())
        .collect();
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frob(&a)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

fn frob(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}
