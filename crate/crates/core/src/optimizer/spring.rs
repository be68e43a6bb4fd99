//! Two-spring compliance toy: minimize `(x₁ᵖ + 0.9)⁻¹ + (x₂ᵖ + 1)⁻¹` with
//! `x₁ + x₂ = 1`, `0 ≤ x_i ≤ 1`. Small enough to solve by scanning, which
//! makes it a handy check on how penalization moves the optimum to 0/1.

const SCAN_POINTS: usize = 10_000;

pub fn two_spring_objective(x1: f64, p: f64) -> f64 {
    1.0 / (x1.powf(p) + 0.9) + 1.0 / ((1.0 - x1).powf(p) + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpringOptimum {
    /// Global minimizer over `[0, 1]`.
    pub x1: f64,
    pub objective: f64,
    /// Every local minimizer found by the scan, in increasing `x₁`.
    pub local_minima: Vec<f64>,
}

/// Dense scan over `[0, 1]` followed by bisection on the derivative around
/// each interior local minimum.
pub fn two_spring_toy(p: f64) -> SpringOptimum {
    let f = |x: f64| two_spring_objective(x, p);
    let h = 1.0 / SCAN_POINTS as f64;
    let values: Vec<f64> = (0..=SCAN_POINTS).map(|k| f(k as f64 * h)).collect();

    let mut local_minima = Vec::new();
    for k in 0..=SCAN_POINTS {
        let left = if k == 0 { f64::INFINITY } else { values[k - 1] };
        let right = if k == SCAN_POINTS { f64::INFINITY } else { values[k + 1] };
        if values[k] <= left && values[k] < right {
            let x = k as f64 * h;
            let refined = if k == 0 || k == SCAN_POINTS {
                x
            } else {
                refine(p, (x - h).max(0.0), (x + h).min(1.0))
            };
            local_minima.push(refined);
        }
    }
    let x1 = local_minima
        .iter()
        .copied()
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(0.0);
    SpringOptimum {
        x1,
        objective: f(x1),
        local_minima,
    }
}

fn derivative(x1: f64, p: f64) -> f64 {
    let x2 = 1.0 - x1;
    -p * x1.powf(p - 1.0) / (x1.powf(p) + 0.9).powi(2) + p * x2.powf(p - 1.0) / (x2.powf(p) + 1.0).powi(2)
}

fn refine(p: f64, mut a: f64, mut b: f64) -> f64 {
    if derivative(a, p) >= 0.0 || derivative(b, p) <= 0.0 {
        return 0.5 * (a + b);
    }
    // bisect down to floating-point resolution
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return m;
        }
        let d = derivative(m, p);
        if d == 0.0 {
            return m;
        } else if d < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
}
