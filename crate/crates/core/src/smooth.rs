//! Smooth-boundary post-processing of an element-based design.
//!
//! The element field is bilinearly interpolated between element centres onto
//! a fine pixel grid, thresholded at the level `ls` that preserves the design
//! volume, and the resulting 0/1 pixel design is projected back onto the mesh
//! as per-element volume fractions `v`. One ersatz-model analysis of `v`
//! gives the smooth design's compliance.

use crate::contour::{extract_contours, Polyline};
use crate::error::{Error, Result};
use crate::fea::FeaSolver;

pub const DEFAULT_NGRID: usize = 20;
/// Level threshold bisection stops once the bracket is narrower than this.
pub const LEVEL_TOL: f64 = 1e-6;

/// Bilinear interpolant of an element field sampled at `ngrid` points per
/// element spacing, spanning the element centres.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelField {
    nelx: usize,
    nely: usize,
    ngrid: usize,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl PixelField {
    #[cfg(test)]
    pub(crate) fn from_raw(nx: usize, ny: usize, ngrid: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), nx * ny);
        Self {
            nelx: (nx - 1) / ngrid + 1,
            nely: (ny - 1) / ngrid + 1,
            ngrid,
            nx,
            ny,
            values,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn ngrid(&self) -> usize {
        self.ngrid
    }

    pub fn nelx(&self) -> usize {
        self.nelx
    }

    pub fn nely(&self) -> usize {
        self.nely
    }

    /// Sample in column `a` (x direction) and row `b` (y, top to bottom).
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[b * self.nx + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Position of sample `(a, b)` in element coordinates, where element
    /// `(ix, iy)` covers `[ix, ix + 1] × [iy, iy + 1]`.
    pub fn position(&self, a: usize, b: usize) -> (f64, f64) {
        let g = self.ngrid as f64;
        (0.5 + a as f64 / g, 0.5 + b as f64 / g)
    }
}

/// Linear weights along one axis: `(lower element, fraction)` per sample.
fn axis_weights(nel: usize, ngrid: usize) -> Vec<(usize, f64)> {
    let n = ngrid * (nel - 1) + 1;
    (0..n)
        .map(|a| {
            if nel == 1 {
                return (0, 0.0);
            }
            let (i0, r) = (a / ngrid, a % ngrid);
            if i0 >= nel - 1 {
                (nel - 2, 1.0)
            } else {
                (i0, r as f64 / ngrid as f64)
            }
        })
        .collect()
}

/// Element field `x` (indexed `ix * nely + iy`) to pixel field.
pub fn upsample(x: &[f64], nelx: usize, nely: usize, ngrid: usize) -> Result<PixelField> {
    if ngrid < 2 {
        return Err(Error::param("ngrid", format!("need at least 2 samples per element, got {ngrid}")));
    }
    if x.len() != nelx * nely || x.is_empty() {
        return Err(Error::LengthMismatch {
            expected: nelx * nely,
            actual: x.len(),
        });
    }
    let wx = axis_weights(nelx, ngrid);
    let wy = axis_weights(nely, ngrid);
    let (nx, ny) = (wx.len(), wy.len());
    let at = |ix: usize, iy: usize| x[ix * nely + iy];
    let mut values = Vec::with_capacity(nx * ny);
    for &(j0, ty) in &wy {
        let j1 = (j0 + 1).min(nely - 1);
        for &(i0, tx) in &wx {
            let i1 = (i0 + 1).min(nelx - 1);
            let top = (1.0 - tx) * at(i0, j0) + tx * at(i1, j0);
            let bottom = (1.0 - tx) * at(i0, j1) + tx * at(i1, j1);
            values.push((1.0 - ty) * top + ty * bottom);
        }
    }
    Ok(PixelField {
        nelx,
        nely,
        ngrid,
        nx,
        ny,
        values,
    })
}

/// Half-open pixel index range counted for the element centred at sample
/// `centre`: `ngrid - 1` samples for even `ngrid`.
fn window(centre: usize, ngrid: usize) -> std::ops::Range<usize> {
    let half = ngrid / 2;
    centre + 1 - half..centre + half
}

/// Per-element volume fractions of the pixel design thresholded at `ls`.
///
/// Only elements off the mesh border are recomputed; a border element keeps
/// its design value. Each counted pixel contributes 1 when above `ls` and
/// `x_min` otherwise.
pub fn back_project_volume_fractions(pixels: &PixelField, ls: f64, x: &[f64], x_min: f64) -> Vec<f64> {
    let (nelx, nely, ngrid) = (pixels.nelx, pixels.nely, pixels.ngrid);
    let mut v = x.to_vec();
    let count = ((ngrid - 1) * (ngrid - 1)) as f64;
    for ix in 1..nelx.saturating_sub(1) {
        let cols = window(ngrid * ix, ngrid);
        for iy in 1..nely.saturating_sub(1) {
            let mut above = 0usize;
            for b in window(ngrid * iy, ngrid) {
                let row = &pixels.values[b * pixels.nx..(b + 1) * pixels.nx];
                above += row[cols.clone()].iter().filter(|&&p| p > ls).count();
            }
            let below = count - above as f64;
            v[ix * nely + iy] = (above as f64 + below * x_min) / count;
        }
    }
    v
}

/// Level `ls` at which the back-projected volume matches `target_sum`.
///
/// The back-projected volume is non-increasing in `ls`; bisection over
/// `[0, 1]` returns the midpoint of the final bracket.
pub fn find_level_threshold(pixels: &PixelField, x: &[f64], target_sum: f64, x_min: f64) -> Result<f64> {
    let volume = |ls: f64| back_project_volume_fractions(pixels, ls, x, x_min).iter().sum::<f64>();
    let slack = 1e-9 * target_sum.abs().max(1.0);
    let (vmax, vmin) = (volume(0.0), volume(1.0));
    if target_sum > vmax + slack || target_sum < vmin - slack {
        return Err(Error::Config(format!(
            "smooth design volume {target_sum} outside achievable range [{vmin}, {vmax}]"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > LEVEL_TOL {
        let th = 0.5 * (lo + hi);
        if volume(th) < target_sum {
            hi = th;
        } else {
            lo = th;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `|C(v) - C(x)| / C(x)`.
pub fn tau(smooth_compliance: f64, element_compliance: f64) -> f64 {
    ((smooth_compliance - element_compliance) / element_compliance).abs()
}

#[derive(Debug, Clone)]
pub struct SmoothDesign {
    pub ls: f64,
    pub v: Vec<f64>,
    /// Compliance of `v` under the ersatz model.
    pub compliance: f64,
    pub pixels: PixelField,
}

impl SmoothDesign {
    /// Level-set value `φ = pixel − ls` at sample `(a, b)`.
    pub fn phi(&self, a: usize, b: usize) -> f64 {
        self.pixels.get(a, b) - self.ls
    }

    pub fn contours(&self) -> Vec<Polyline> {
        extract_contours(&self.pixels, self.ls)
    }
}

/// Analyses `v` with `E_i = v_i E¹` regardless of the optimizer's model.
pub fn evaluate_smooth(solver: &mut FeaSolver<'_>, v: &[f64], young: f64) -> Result<f64> {
    let moduli: Vec<f64> = v.iter().map(|&vi| vi * young).collect();
    Ok(solver.solve(&moduli)?.compliance)
}

/// Full pipeline: upsample, threshold, back-project, analyse.
pub fn smooth_design(
    solver: &mut FeaSolver<'_>,
    x: &[f64],
    x_min: f64,
    young: f64,
    ngrid: usize,
) -> Result<SmoothDesign> {
    let mesh = solver.mesh();
    let pixels = upsample(x, mesh.nelx(), mesh.nely(), ngrid)?;
    let target: f64 = x.iter().sum();
    let ls = find_level_threshold(&pixels, x, target, x_min)?;
    let v = back_project_volume_fractions(&pixels, ls, x, x_min);
    let compliance = evaluate_smooth(solver, &v, young)?;
    Ok(SmoothDesign {
        ls,
        v,
        compliance,
        pixels,
    })
}
