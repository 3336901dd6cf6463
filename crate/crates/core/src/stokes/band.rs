//! Symmetric banded storage and Cholesky factorisation.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix: `lower[r * (bw + 1) + d] = A[r][r - d]`.
#[derive(Debug, Clone)]
pub(crate) struct SymBand {
    n: usize,
    bw: usize,
    lower: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            lower: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        let d = r - c;
        if d > self.bw {
            0.0
        } else {
            self.lower[r * (self.bw + 1) + d]
        }
    }

    /// Stores `A[r][c]` for `r >= c`.
    #[inline]
    pub fn set_lower(&mut self, r: usize, c: usize, value: f64) {
        debug_assert!(r >= c && r - c <= self.bw);
        self.lower[r * (self.bw + 1) + (r - c)] = value;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let w = self.bw + 1;
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.n {
            let row = &self.lower[r * w..(r + 1) * w];
            y[r] += row[0] * x[r];
            for d in 1..=self.bw.min(r) {
                let a = row[d];
                if a != 0.0 {
                    let c = r - d;
                    y[r] += a * x[c];
                    y[c] += a * x[r];
                }
            }
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |r, c| self.get(r, c))
    }

    /// In-place-free Cholesky factor `A = L L^T`, same band.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut s = self.lower[j * w];
            for k in k0..j {
                let ljk = l[j * w + (j - k)];
                s -= ljk * ljk;
            }
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::Numerical {
                    what: "banded Cholesky (matrix not positive definite)".into(),
                    residual: s,
                });
            }
            let djj = s.sqrt();
            l[j * w] = djj;
            for i in j + 1..(j + w).min(n) {
                let k0 = i.saturating_sub(bw);
                let mut s = self.lower[i * w + (i - j)];
                for k in k0..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                l[i * w + (i - j)] = s / djj;
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.l[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for r in i + 1..(i + w).min(self.n) {
                s -= self.l[r * w + (r - i)] * x[r];
            }
            x[i] = s / self.l[i * w];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_banded_spd() {
        let n = 40;
        let bw = 3;
        let mut a = SymBand::zeros(n, bw);
        for r in 0..n {
            a.set_lower(r, r, 6.0 + (r % 3) as f64);
            for d in 1..=bw.min(r) {
                a.set_lower(r, r - d, -1.0 / d as f64);
            }
        }
        let b: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut x = b.clone();
        a.cholesky().unwrap().solve_in_place(&mut x);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        let err = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut a = SymBand::zeros(3, 1);
        a.set_lower(0, 0, 1.0);
        a.set_lower(1, 1, -1.0);
        a.set_lower(2, 2, 1.0);
        assert!(a.cholesky().is_err());
    }
}
