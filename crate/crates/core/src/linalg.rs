//! Banded matrices with an in-place LU factorisation (no pivoting).
//!
//! Every system assembled in this crate is a backward-Euler Jacobian or a
//! discrete Dirichlet form on a structured grid: diagonally dominant and
//! with half-bandwidth 1 (one-dimensional grids) or about `n_x` (rectangles).

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    half_band: usize,
    // row-major, row i holds columns i-k ..= i+k
    data: Vec<f64>,
    factored: bool,
}

impl BandedMatrix {
    pub fn zeros(n: usize, half_band: usize) -> Self {
        BandedMatrix {
            n,
            half_band,
            data: vec![0.0; n * (2 * half_band + 1)],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_band(&self) -> usize {
        self.half_band
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.half_band, "({i},{j}) outside band {}", self.half_band);
        i * (2 * self.half_band + 1) + (j + self.half_band - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.half_band {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
        self.factored = false;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored, "product with a factored matrix");
        let k = self.half_band;
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(k);
                let hi = (i + k).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Doolittle LU in place; the unit lower factor overwrites the sub-diagonal band.
    pub fn factor(&mut self) -> Result<()> {
        let (n, k) = (self.n, self.half_band);
        for i in 0..n {
            let piv = self.data[self.idx(i, i)];
            if !(piv.abs() > 0.0) || !piv.is_finite() {
                return Err(Error::invalid(format!("singular pivot {piv} in banded LU at row {i}")));
            }
            let hi = (i + k).min(n - 1);
            for r in (i + 1)..=hi {
                let ri = self.idx(r, i);
                let l = self.data[ri] / piv;
                if l == 0.0 {
                    continue;
                }
                self.data[ri] = l;
                for c in (i + 1)..=hi {
                    let ic = self.data[self.idx(i, c)];
                    let rc = self.idx(r, c);
                    self.data[rc] -= l * ic;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves with a factored matrix, overwriting `b` by the solution.
    pub fn solve_factored(&self, b: &mut [f64]) {
        assert!(self.factored, "solve_factored before factor");
        let (n, k) = (self.n, self.half_band);
        for i in 0..n {
            let lo = i.saturating_sub(k);
            let mut s = b[i];
            for j in lo..i {
                s -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + k).min(n - 1);
            let mut s = b[i];
            for j in (i + 1)..=hi {
                s -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
    }

    pub fn solve(&mut self, b: &mut [f64]) -> Result<()> {
        self.factor()?;
        self.solve_factored(b);
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve() {
        let n = 6;
        let mut a = BandedMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 4.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -2.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let mut b = a.mul_vec(&x);
        a.solve(&mut b).unwrap();
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn wide_band_solve() {
        let n = 20;
        let k = 4;
        let mut a = BandedMatrix::zeros(n, k);
        for i in 0..n {
            a.add(i, i, 10.0);
            for d in 1..=k {
                if i + d < n {
                    a.add(i, i + d, -1.0 / d as f64);
                    a.add(i + d, i, -0.5 / d as f64);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.1 - 1.0).collect();
        let mut b = a.mul_vec(&x);
        a.solve(&mut b).unwrap();
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_an_error() {
        let mut a = BandedMatrix::zeros(2, 1);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        assert!(a.factor().is_err());
    }
}
