//! Symmetric positive-definite band matrices with in-place Cholesky.
//!
//! Structured grid meshes give the reduced stiffness a half-bandwidth of
//! about twice the column height, so the factorization costs O(n b^2)
//! instead of O(n^3). Storage is the lower band by columns: entry (j + k, j)
//! for k in 0..=hbw lives at `data[j * (hbw + 1) + k]`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    hbw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        BandedSpd {
            n,
            hbw: half_bandwidth,
            data: vec![0.0; n * (half_bandwidth + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.hbw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i - j <= self.hbw);
        j * (self.hbw + 1) + (i - j)
    }

    /// Add to entry (i, j); only the lower triangle is stored, callers pass
    /// each unordered pair once.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(hi, lo);
        self.data[k] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.hbw {
            return 0.0;
        }
        self.data[self.idx(hi, lo)]
    }

    /// Symmetric matrix-vector product.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for j in 0..self.n {
            let diag = self.data[j * (self.hbw + 1)];
            y[j] += diag * x[j];
            let top = (self.hbw).min(self.n - 1 - j);
            for k in 1..=top {
                let a = self.data[j * (self.hbw + 1) + k];
                y[j + k] += a * x[j];
                y[j] += a * x[j + k];
            }
        }
        y
    }

    /// Expand to a dense matrix (tests and diagnostics).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            let top = (self.hbw).min(self.n - 1 - j);
            for k in 0..=top {
                let a = self.data[j * (self.hbw + 1) + k];
                m[(j + k, j)] = a;
                m[(j, j + k)] = a;
            }
        }
        m
    }

    /// In-place Cholesky `A = L L^T`; fails on loss of positive
    /// definiteness.
    pub fn cholesky(mut self) -> Option<BandedCholesky> {
        let w = self.hbw + 1;
        for j in 0..self.n {
            let start = j.saturating_sub(self.hbw);
            let mut d = self.data[j * w];
            for t in start..j {
                let l_jt = self.data[t * w + (j - t)];
                d -= l_jt * l_jt;
            }
            if !(d > 0.0) {
                return None;
            }
            let l_jj = d.sqrt();
            self.data[j * w] = l_jj;
            let top = (self.hbw).min(self.n - 1 - j);
            for k in 1..=top {
                let i = j + k;
                let mut s = self.data[j * w + k];
                let t0 = i.saturating_sub(self.hbw).max(start);
                for t in t0..j {
                    s -= self.data[t * w + (i - t)] * self.data[t * w + (j - t)];
                }
                self.data[j * w + k] = s / l_jj;
            }
        }
        Some(BandedCholesky { band: self })
    }
}

/// Cholesky factor stored in the band layout.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    band: BandedSpd,
}

impl BandedCholesky {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.band.n;
        let hbw = self.band.hbw;
        let w = hbw + 1;
        let mut x = b.clone();
        // forward: L y = b
        for i in 0..n {
            let start = i.saturating_sub(hbw);
            let mut s = x[i];
            for t in start..i {
                s -= self.band.data[t * w + (i - t)] * x[t];
            }
            x[i] = s / self.band.data[i * w];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let top = hbw.min(n - 1 - i);
            let mut s = x[i];
            for k in 1..=top {
                s -= self.band.data[i * w + k] * x[i + k];
            }
            x[i] = s / self.band.data[i * w];
        }
        x
    }
}
