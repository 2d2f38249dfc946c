//! Symmetric positive definite banded matrices and their Cholesky factors.

/// Lower band of a symmetric matrix: entry `(i, j)` with `j <= i <= j + bw`
/// is stored at `i * (bw + 1) + (i - j)`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
    pub value: f64,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, band: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` to entry `(i, j)`, `i >= j`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.band[i * (self.bw + 1) + (i - j)] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.band[i * (self.bw + 1) + (i - j)]
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let w = self.bw + 1;
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.band[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for d in 1..=self.bw.min(i) {
                let j = i - d;
                y[i] += row[d] * x[j];
                y[j] += row[d] * x[i];
            }
        }
        y
    }

    /// Band Cholesky `A = L L^T`, in place.
    pub fn factor(mut self) -> Result<BandCholesky, NotPositiveDefinite> {
        let w = self.bw + 1;
        let bw = self.bw;
        let b = &mut self.band;
        for j in 0..self.n {
            let lo = j.saturating_sub(bw);
            let mut s = b[j * w];
            for k in lo..j {
                let l = b[j * w + (j - k)];
                s -= l * l;
            }
            if !(s > 0.0) {
                return Err(NotPositiveDefinite { pivot: j, value: s });
            }
            let d = s.sqrt();
            b[j * w] = d;
            for i in j + 1..(j + bw + 1).min(self.n) {
                let lo_i = i.saturating_sub(bw);
                let mut s = b[i * w + (i - j)];
                for k in lo_i.max(lo)..j {
                    s -= b[i * w + (i - k)] * b[j * w + (j - k)];
                }
                b[i * w + (i - j)] = s / d;
            }
        }
        Ok(BandCholesky { n: self.n, bw: self.bw, band: self.band })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandCholesky {
    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        let b = &self.band;
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= b[i * w + (i - k)] * x[k];
            }
            x[i] = s / b[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + self.bw + 1).min(self.n) {
                s -= b[k * w + (k - i)] * x[k];
            }
            x[i] = s / b[i * w];
        }
    }
}
