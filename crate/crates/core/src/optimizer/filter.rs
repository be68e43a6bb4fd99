//! Linear-hat density filter over element centres.

use crate::error::{Error, Result};
use crate::fea::Mesh;

/// Sparse weight table `w(r_ij) = max(0, r_min - r_ij)` stored row-wise.
#[derive(Debug, Clone)]
pub struct FilterKernel {
    r_min: f64,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    norms: Vec<f64>,
}

impl FilterKernel {
    pub fn new(mesh: &Mesh, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min.is_finite()) {
            return Err(Error::param("r_min", format!("filter radius must be positive, got {r_min}")));
        }
        let (nelx, nely) = (mesh.nelx(), mesh.nely());
        let reach = r_min.ceil() as usize;
        let n = nelx * nely;
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        let mut norms = Vec::with_capacity(n);
        offsets.push(0);
        for i1 in 0..nelx {
            for j1 in 0..nely {
                let mut norm = 0.0;
                for i2 in i1.saturating_sub(reach)..(i1 + reach + 1).min(nelx) {
                    for j2 in j1.saturating_sub(reach)..(j1 + reach + 1).min(nely) {
                        let dx = i1 as f64 - i2 as f64;
                        let dy = j1 as f64 - j2 as f64;
                        let w = r_min - (dx * dx + dy * dy).sqrt();
                        if w > 0.0 {
                            cols.push(mesh.element(i2, j2));
                            weights.push(w);
                            norm += w;
                        }
                    }
                }
                norms.push(norm);
                offsets.push(cols.len());
            }
        }
        Ok(Self {
            r_min,
            offsets,
            cols,
            weights,
            norms,
        })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// `(j, w_ij)` pairs in element `i`'s stencil.
    pub fn stencil(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    pub fn normalizer(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.len());
        for (i, o) in out.iter_mut().enumerate() {
            let r = self.offsets[i]..self.offsets[i + 1];
            let s: f64 = self.cols[r.clone()]
                .iter()
                .zip(&self.weights[r])
                .map(|(&j, &w)| w * x[j])
                .sum();
            *o = s / self.norms[i];
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fea::Mesh;
    use rand::{rngs::StdRng, RngExt, SeedableRng};

    /// O(N²) evaluation straight from the weight definition.
    fn brute_force(nelx: usize, nely: usize, r_min: f64, x: &[f64]) -> Vec<f64> {
        let centre = |e: usize| ((e / nely) as f64 + 0.5, (e % nely) as f64 + 0.5);
        let n = nelx * nely;
        (0..n)
            .map(|i| {
                let (xi, yi) = centre(i);
                let (mut num, mut den) = (0.0, 0.0);
                for j in 0..n {
                    let (xj, yj) = centre(j);
                    let r = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                    let w = (r_min - r).max(0.0);
                    num += w * x[j];
                    den += w;
                }
                num / den
            })
            .collect()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0.0..1.0)).collect()
    }

    #[test]
    fn constant_field_unchanged() {
        let mesh = Mesh::new(9, 7).unwrap();
        let k = FilterKernel::new(&mesh, 2.5).unwrap();
        for v in k.apply(&vec![0.37; 63]).unwrap() {
            assert!((v - 0.37).abs() < 1e-15);
        }
    }

    #[test]
    fn small_radius_is_identity() {
        let mesh = Mesh::new(5, 4).unwrap();
        let k = FilterKernel::new(&mesh, 1.0).unwrap();
        let x = pseudo_random(20, 3);
        assert_eq!(k.apply(&x).unwrap(), x);
    }

    #[test]
    fn spike_spreads_to_neighbours() {
        let (nelx, nely) = (7, 7);
        let mesh = Mesh::new(nelx, nely).unwrap();
        let k = FilterKernel::new(&mesh, 2.0).unwrap();
        let mut x = vec![0.0; 49];
        let c = mesh.element(3, 3);
        x[c] = 1.0;
        let got = k.apply(&x).unwrap();
        let want = brute_force(nelx, nely, 2.0, &x);
        let touched = got.iter().filter(|&&v| v > 0.0).count();
        assert_eq!(touched, 9, "self plus the 8-neighbour ring");
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
        assert!((k.normalizer(c) - (2.0 + 4.0 * 1.0 + 4.0 * (2.0 - 2f64.sqrt()))).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_up_to_10x10() {
        for (nelx, nely, r) in [(10, 10, 2.0), (6, 9, 1.5), (10, 3, 3.2), (4, 4, 0.7)] {
            let mesh = Mesh::new(nelx, nely).unwrap();
            let k = FilterKernel::new(&mesh, r).unwrap();
            let x = pseudo_random(nelx * nely, (nelx * 31 + nely) as u64);
            let got = k.apply(&x).unwrap();
            let want = brute_force(nelx, nely, r, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
            let (lo, hi) = x.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            assert!(got.iter().all(|&v| v >= lo - 1e-15 && v <= hi + 1e-15));
        }
    }

    #[test]
    fn stencils_are_symmetric() {
        let mesh = Mesh::new(8, 5).unwrap();
        let k = FilterKernel::new(&mesh, 2.3).unwrap();
        for i in 0..k.len() {
            let own: Vec<_> = k.stencil(i).collect();
            assert!(own.iter().any(|&(j, w)| j == i && (w - 2.3).abs() < 1e-15));
            for (j, w) in own {
                assert!(w > 0.0);
                assert!(k.stencil(j).any(|(back, wb)| back == i && wb == w));
            }
        }
    }

    #[test]
    fn rejects_non_positive_radius() {
        let mesh = Mesh::new(2, 2).unwrap();
        assert!(FilterKernel::new(&mesh, 0.0).is_err());
    }
}
