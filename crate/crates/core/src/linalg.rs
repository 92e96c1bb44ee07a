//! Dense row-major matrices and the handful of products the crate needs.
//!
//! This is deliberately minimal: everything downstream (the autodiff tape,
//! the OT solvers, the metrics) funnels through these few routines so that
//! the same arithmetic runs everywhere, in the same order — a precondition
//! for the bit-identical replay contract.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    /// Rows of `self` selected by `idx`, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Column means.
    pub fn mean_rows(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.cols];
        for r in self.row_iter() {
            for (m, v) in mu.iter_mut().zip(r) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        for m in &mut mu {
            *m /= n;
        }
        mu
    }

    /// Sample covariance with the 1/(n-1) normalizer.
    pub fn covariance(&self) -> Matrix {
        let mu = self.mean_rows();
        let d = self.cols;
        let mut cov = Matrix::zeros(d, d);
        for r in self.row_iter() {
            for a in 0..d {
                let da = r[a] - mu[a];
                for b in 0..d {
                    cov.data[a * d + b] += da * (r[b] - mu[b]);
                }
            }
        }
        let denom = (self.rows - 1) as f64;
        for v in &mut cov.data {
            *v /= denom;
        }
        cov
    }
}

/// `C = A · B` for row-major slices, shapes (r×k)·(k×c).
pub fn matmul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), r * k);
    debug_assert_eq!(b.len(), k * c);
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * c..(p + 1) * c];
            let orow = &mut out[i * c..(i + 1) * c];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `C = A · Bᵀ`, shapes (r×k)·(c×k)ᵀ.
pub fn matmul_nt(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), r * k);
    debug_assert_eq!(b.len(), c * k);
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..c {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for (av, bv) in arow.iter().zip(brow) {
                s += av * bv;
            }
            out[i * c + j] = s;
        }
    }
    out
}

/// `C = Aᵀ · B`, shapes (k×r)ᵀ·(k×c).
pub fn matmul_tn(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), k * r);
    debug_assert_eq!(b.len(), k * c);
    let mut out = vec![0.0; r * c];
    for p in 0..k {
        let arow = &a[p * r..(p + 1) * r];
        let brow = &b[p * c..(p + 1) * c];
        for i in 0..r {
            let av = arow[i];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * c..(i + 1) * c];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        // [[1,2],[3,4]] · [[1],[1]] = [[3],[7]]
        let c = matmul(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0], 2, 2, 1);
        assert_eq!(c, vec![3.0, 7.0]);
    }

    #[test]
    fn transposed_products_agree() {
        let a = [1.0, -2.0, 0.5, 3.0, 4.0, -1.0]; // 2x3
        let b = [2.0, 1.0, 0.0, -1.0, 1.0, 5.0]; // 3x2
        let direct = matmul(&a, &b, 2, 3, 2);
        let bt: Vec<f64> = Matrix::new(3, 2, b.to_vec()).unwrap().transpose().into_data();
        let via_nt = matmul_nt(&a, &bt, 2, 3, 2);
        assert_eq!(direct, via_nt);
        let at: Vec<f64> = Matrix::new(2, 3, a.to_vec()).unwrap().transpose().into_data();
        let via_tn = matmul_tn(&at, &b, 2, 3, 2);
        assert_eq!(direct, via_tn);
    }

    #[test]
    fn covariance_of_constant_rows_is_zero() {
        let m = Matrix::from_rows(&[vec![2.0, -1.0], vec![2.0, -1.0], vec![2.0, -1.0]]).unwrap();
        let cov = m.covariance();
        assert!(cov.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn covariance_matches_hand_computation() {
        // points (0,0), (2,2): mean (1,1), cov = [[2,2],[2,2]] with 1/(n-1)
        let m = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let cov = m.covariance();
        for &v in cov.data() {
            assert!((v - 2.0).abs() < 1e-15);
        }
    }
}
