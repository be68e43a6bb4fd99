//! Sensitivities, damping and the optimality-criteria design update.

use super::filter::FilterKernel;
use super::projection::floating_projection_into;
use crate::error::{Error, Result};
use crate::material::MaterialModel;

/// Upper end of the update multiplier bracket.
pub const MULTIPLIER_UPPER: f64 = 1e6;
/// Bisection stops once the multiplier bracket is narrower than this.
pub const MULTIPLIER_TOL: f64 = 1e-6;
/// Largest accepted gap between the updated mean density and its target.
pub const VOLUME_TOL: f64 = 1e-4;

/// Intermediate band: `x_min + 0.01 <= x <= 0.99`.
pub const INTERMEDIATE_MARGIN: f64 = 0.01;

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// `∂C/∂x_i = -E'(x_i) / E¹ · ce_i`.
pub fn compute_sensitivities(x: &[f64], ce: &[f64], model: &MaterialModel) -> Result<Vec<f64>> {
    check_len(x.len(), ce.len())?;
    x.iter()
        .zip(ce)
        .map(|(&xi, &c)| Ok(-model.modulus_derivative(xi)? / model.young() * c))
        .collect()
}

/// Averages with the previous iteration's (already damped) sensitivities
/// from the second iteration on.
pub fn damp_sensitivities(current: &[f64], previous: Option<&[f64]>, it: usize) -> Result<Vec<f64>> {
    match previous {
        Some(prev) if it > 1 => {
            check_len(current.len(), prev.len())?;
            Ok(current.iter().zip(prev).map(|(a, b)| 0.5 * (a + b)).collect())
        }
        _ => Ok(current.to_vec()),
    }
}

/// Mean absolute change between two designs.
pub fn convergence_epsilon(new: &[f64], old: &[f64]) -> Result<f64> {
    check_len(new.len(), old.len())?;
    if new.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = new.iter().zip(old).map(|(a, b)| (a - b).abs()).sum();
    Ok(s / new.len() as f64)
}

pub fn count_intermediate(x: &[f64], x_min: f64) -> usize {
    let lo = x_min + INTERMEDIATE_MARGIN;
    let hi = 1.0 - INTERMEDIATE_MARGIN;
    x.iter().filter(|&&v| v >= lo && v <= hi).count()
}

#[derive(Debug, Clone, Copy)]
pub struct UpdateParams {
    pub volfrac: f64,
    pub x_min: f64,
    pub move_limit: f64,
}

#[derive(Debug, Clone)]
pub struct OcUpdate {
    pub x: Vec<f64>,
    /// Lagrange multiplier of the volume constraint, `Λ` in
    /// `x_i ← (-∂C/∂x_i / (Λ V_i)) x_i`.
    pub lambda: f64,
    /// Projection threshold used for the returned field.
    pub threshold: f64,
}

struct Scratch {
    raw: Vec<f64>,
    filtered: Vec<f64>,
    projected: Vec<f64>,
    x: Vec<f64>,
}

/// One design update: multiplicative OC step, bound clamp, density filter,
/// floating projection, move limit; the volume multiplier is found by
/// bisection around all of it.
///
/// The bisection runs on `μ = 1 / (Λ · N)` over `[0, 1e6]` (all elements
/// have unit volume) down to a bracket of `1e-6`, and further while the
/// volume is still more than `VOLUME_TOL` short. The returned field is the
/// one at the lower end of the final bracket, so its mean never exceeds
/// `volfrac`.
pub fn oc_update(
    prev_x: &[f64],
    sensitivities: &[f64],
    kernel: &FilterKernel,
    beta: f64,
    params: &UpdateParams,
) -> Result<OcUpdate> {
    let n = prev_x.len();
    check_len(n, sensitivities.len())?;
    check_len(n, kernel.len())?;
    if let Some(i) = sensitivities.iter().position(|&s| s > 0.0 || s.is_nan()) {
        return Err(Error::param(
            "sensitivities",
            format!("entry {i} is {} (compliance sensitivities must be <= 0)", sensitivities[i]),
        ));
    }
    let UpdateParams {
        volfrac,
        x_min,
        move_limit,
    } = *params;
    let scale = n as f64;

    let mut s = Scratch {
        raw: vec![0.0; n],
        filtered: vec![0.0; n],
        projected: vec![0.0; n],
        x: vec![0.0; n],
    };
    let eval = |mu: f64, s: &mut Scratch| -> Result<(f64, f64)> {
        for ((r, &p), &dc) in s.raw.iter_mut().zip(prev_x).zip(sensitivities) {
            *r = (p * mu * scale * -dc).clamp(x_min, 1.0);
        }
        kernel.apply_into(&s.raw, &mut s.filtered);
        let th = floating_projection_into(&s.filtered, beta, x_min, &mut s.projected)?;
        let mut sum = 0.0;
        for ((xi, &p), &q) in s.x.iter_mut().zip(prev_x).zip(&s.projected) {
            *xi = x_min.max((p - move_limit).max(q.min(p + move_limit).min(1.0)));
            sum += *xi;
        }
        Ok((sum / scale, th))
    };

    let (mut lo, mut hi) = (0.0, MULTIPLIER_UPPER);
    let mut best: Option<(f64, f64, f64, Vec<f64>)> = None;
    let mut last = (0.0, 0.0, 0.0);
    let gap_ok = |best: &Option<(f64, f64, f64, Vec<f64>)>| {
        best.as_ref().is_some_and(|b| volfrac - b.2 <= VOLUME_TOL)
    };
    // The absolute width is coarse when μ itself is small (large meshes,
    // stiff problems); keep halving until the volume gap closes too.
    while hi - lo > MULTIPLIER_TOL || (!gap_ok(&best) && hi - lo > f64::EPSILON * hi) {
        let mu = 0.5 * (lo + hi);
        let (vol, th) = eval(mu, &mut s)?;
        last = (mu, vol, th);
        if vol < volfrac {
            lo = mu;
            match &mut best {
                Some((m, t, v, x)) => {
                    *m = mu;
                    *t = th;
                    *v = vol;
                    x.copy_from_slice(&s.x);
                }
                None => best = Some((mu, th, vol, s.x.clone())),
            }
        } else {
            hi = mu;
        }
    }

    let reachable = gap_ok(&best);
    let (mu, th, _, x) = match best {
        Some(b) => b,
        None => (last.0, last.2, last.1, s.x.clone()),
    };
    let vol = x.iter().sum::<f64>() / scale;
    if !reachable && (vol - volfrac).abs() > VOLUME_TOL {
        let (min, _) = eval(0.0, &mut s)?;
        let (max, _) = eval(MULTIPLIER_UPPER, &mut s)?;
        // A jump in the volume response lands here too; only a target
        // outside the reachable range is an error.
        if volfrac < min - VOLUME_TOL || volfrac > max + VOLUME_TOL {
            return Err(Error::VolumeUnreachable {
                target: volfrac,
                min,
                max,
            });
        }
    }
    let lambda = if mu > 0.0 { 1.0 / (mu * scale) } else { f64::INFINITY };
    Ok(OcUpdate {
        x,
        lambda,
        threshold: th,
    })
}
