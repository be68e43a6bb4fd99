//! Dense-band Cholesky factorization for symmetric positive definite systems.
//!
//! Regular grid meshes numbered along their short side have a narrow,
//! fully populated band, so a plain band factorization beats a general
//! sparse solver here and is bit-for-bit deterministic.

/// Lower band of a symmetric matrix stored row by row: row `i` holds
/// columns `i - bw ..= i`.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

/// Index of the first non-positive pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ZeroPivot(pub usize);

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn width(&self) -> usize {
        self.bw + 1
    }

    /// Adds `v` at `(i, j)`; requires `j <= i` and `i - j <= bw`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        let w = self.width();
        self.data[i * w + j + self.bw - i] += v;
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            return 0.0;
        }
        self.data[i * self.width() + j + self.bw - i]
    }

    /// Zeroes row/column `i` and puts 1 on the diagonal.
    pub fn pin(&mut self, i: usize) {
        let w = self.width();
        let lo = i.saturating_sub(self.bw);
        for j in lo..i {
            self.data[i * w + j + self.bw - i] = 0.0;
        }
        for k in i + 1..(i + self.bw + 1).min(self.n) {
            self.data[k * w + i + self.bw - k] = 0.0;
        }
        self.data[i * w + self.bw] = 1.0;
    }

    /// In-place factorization `A = L Lᵀ`. A pivot is rejected when it drops
    /// below `rel_tol` times the original diagonal entry.
    pub fn factorize(&mut self, rel_tol: f64) -> Result<(), ZeroPivot> {
        let (n, bw, w) = (self.n, self.bw, self.width());
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let (head, tail) = self.data.split_at_mut(i * w);
                let row_i = &tail[..w];
                let s = if j < i {
                    let row_j = &head[j * w..(j + 1) * w];
                    let a = &row_i[lo + bw - i..j + bw - i];
                    let b = &row_j[lo + bw - j..bw];
                    row_i[j + bw - i] - dot(a, b)
                } else {
                    let a = &row_i[lo + bw - i..bw];
                    row_i[bw] - dot(a, a)
                };
                if j < i {
                    let pivot = head[j * w + bw];
                    tail[j + bw - i] = s / pivot;
                } else {
                    let diag = tail[bw];
                    if !(s > rel_tol * diag.abs()) || !s.is_finite() {
                        return Err(ZeroPivot(i));
                    }
                    tail[bw] = s.sqrt();
                }
            }
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = b` in place after [`factorize`](Self::factorize).
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.width());
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.data[i * w..(i + 1) * w];
            let s = b[i] - dot(&row[lo + bw - i..bw], &b[lo..i]);
            b[i] = s / row[bw];
        }
        for i in (0..n).rev() {
            let lo = i.saturating_sub(bw);
            let row = &self.data[i * w..(i + 1) * w];
            let xi = b[i] / row[bw];
            b[i] = xi;
            for (bk, l) in b[lo..i].iter_mut().zip(&row[lo + bw - i..bw]) {
                *bk -= l * xi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}
