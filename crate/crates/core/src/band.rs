//! LU factorizations with partial pivoting (dense and banded) behind one
//! interface, plus a 1-norm condition estimate.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, LabResult};

/// A factorized square matrix that can solve with itself and its transpose.
pub trait Factorization {
    fn dim(&self) -> usize;
    fn solve(&self, b: &mut [f64]);
    fn solve_transpose(&self, b: &mut [f64]);
}

/// Dense LU with partial pivoting.
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    l: DMatrix<f64>,
    u: DMatrix<f64>,
}

impl DenseLu {
    pub fn factor(a: DMatrix<f64>) -> LabResult<Self> {
        if !a.is_square() {
            return Err(LabError::Numerical("LU needs a square matrix".into()));
        }
        let lu = a.lu();
        let u = lu.u();
        if u.diagonal().iter().any(|d| *d == 0.0 || !d.is_finite()) {
            return Err(LabError::Numerical("matrix is singular to working precision".into()));
        }
        let l = lu.l();
        Ok(Self { lu, l, u })
    }
}

impl Factorization for DenseLu {
    fn dim(&self) -> usize {
        self.u.nrows()
    }

    fn solve(&self, b: &mut [f64]) {
        let mut v = DVector::from_column_slice(b);
        self.lu.solve_mut(&mut v);
        b.copy_from_slice(v.as_slice());
    }

    fn solve_transpose(&self, b: &mut [f64]) {
        // P A = L U, so A^T x = b is U^T L^T (P x) = b.
        let v = DVector::from_column_slice(b);
        let y = self.u.tr_solve_upper_triangular(&v).expect("nonsingular U");
        let mut z = self.l.tr_solve_lower_triangular(&y).expect("unit L");
        self.lu.p().inv_permute_rows(&mut z);
        b.copy_from_slice(z.as_slice());
    }
}

/// Band matrix with `kl` sub-diagonals and `ku` super-diagonals, stored row
/// by row with room for the fill-in produced by row interchanges.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku + self.kl || j >= self.n {
            None
        } else {
            Some(i * self.width + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Sets an entry inside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside the band");
        let s = self.slot(i, j).unwrap();
        self.data[s] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + self.kl).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn norm1(&self) -> f64 {
        let mut cols = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku + self.kl).min(self.n - 1);
            for (j, c) in cols.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *c += self.get(i, j).abs();
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// Banded LU with partial pivoting; multipliers are kept in the
/// sub-diagonal slots.
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn factor(mut m: BandMatrix) -> LabResult<Self> {
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let p = (k..=last)
                .max_by(|&a, &b| m.get(a, k).abs().total_cmp(&m.get(b, k).abs()))
                .unwrap();
            piv[k] = p;
            let ucol = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=ucol {
                    let (sa, sb) = (m.slot(k, j).unwrap(), m.slot(p, j).unwrap());
                    m.data.swap(sa, sb);
                }
            }
            let pivot = m.get(k, k);
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(LabError::Numerical("matrix is singular to working precision".into()));
            }
            for i in k + 1..=last {
                let si = m.slot(i, k).unwrap();
                let l = m.data[si] / pivot;
                m.data[si] = l;
                if l != 0.0 {
                    for j in k + 1..=ucol {
                        let (sk, sij) = (m.slot(k, j).unwrap(), m.slot(i, j).unwrap());
                        m.data[sij] -= l * m.data[sk];
                    }
                }
            }
        }
        Ok(Self { m, piv })
    }
}

impl Factorization for BandLu {
    fn dim(&self) -> usize {
        self.m.n
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.m.n, self.m.kl, self.m.ku);
        for k in 0..n {
            b.swap(k, self.piv[k]);
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.m.get(i, k) * b[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + ku + kl).min(n - 1) {
                s -= self.m.get(i, j) * b[j];
            }
            b[i] = s / self.m.get(i, i);
        }
    }

    fn solve_transpose(&self, b: &mut [f64]) {
        // A = P0 L0 P1 L1 ... U, so A^T x = b is solved by U^T first and then
        // the elementary factors in reverse order.
        let (n, kl, ku) = (self.m.n, self.m.kl, self.m.ku);
        for j in 0..n {
            let mut s = b[j];
            for i in j.saturating_sub(ku + kl)..j {
                s -= self.m.get(i, j) * b[i];
            }
            b[j] = s / self.m.get(j, j);
        }
        for k in (0..n).rev() {
            let mut s = 0.0;
            for i in k + 1..=(k + kl).min(n - 1) {
                s += self.m.get(i, k) * b[i];
            }
            b[k] -= s;
            b.swap(k, self.piv[k]);
        }
    }
}

/// Hager's estimate of ||A^-1||_1 from a factorization.
pub fn inverse_norm1_estimate(f: &dyn Factorization) -> f64 {
    let n = f.dim();
    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0;
    for _ in 0..5 {
        let mut y = x.clone();
        f.solve(&mut y);
        est = y.iter().map(|v| v.abs()).sum();
        let mut z: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        f.solve_transpose(&mut z);
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.abs()))
            .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if zmax <= ztx {
            break;
        }
        x = vec![0.0; n];
        x[jmax] = 1.0;
    }
    est
}
