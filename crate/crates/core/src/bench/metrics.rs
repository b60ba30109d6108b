//! Error, regret and rate metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bench::objectives::Objective;
use crate::engine::RunTrace;
use crate::error::{Error, Result};

/// Lower clamp of [`error_metric`].
pub const ERROR_FLOOR: f64 = -12.0;

/// Error level that counts as converged (relative error 0.1).
pub const CONVERGED_ERROR: f64 = -2.0;

/// `2·log₁₀(‖x_t - x*‖ / ‖x*‖)`, floored at −12.
pub fn error_metric(x_t: &[f64], x_star: &[f64]) -> Result<f64> {
    if x_t.len() != x_star.len() {
        return Err(Error::invalid(format!("dimension mismatch: {} vs {}", x_t.len(), x_star.len())));
    }
    let ref_norm = x_star.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ref_norm == 0.0 {
        return Err(Error::invalid("relative error is undefined for a maximizer at the origin"));
    }
    let err = x_t.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok((2.0 * (err / ref_norm).log10()).max(ERROR_FLOOR))
}

/// Per-stage error of the posterior-mean maximizer.
pub fn error_series(trace: &RunTrace, obj: &Objective) -> Result<Vec<f64>> {
    trace.stages.iter().map(|s| error_metric(&s.mode_estimate, obj.true_argmax())).collect()
}

/// Average cumulative regret `R_T/T` after each chosen point (the starting
/// point is not counted), using noiseless values.
pub fn average_regret(trace: &RunTrace, obj: &Objective) -> Vec<f64> {
    let best = obj.max_value();
    let mut sum = 0.0;
    trace
        .chosen_points()
        .enumerate()
        .map(|(i, x)| {
            sum += (best - obj.evaluate(x)).max(0.0);
            sum / (i + 1) as f64
        })
        .collect()
}

/// First stage (1-based) from which the series stays at or below
/// `threshold` for the rest of the run.
pub fn stages_to_threshold(errors: &[f64], threshold: f64) -> Option<usize> {
    let last_bad = errors.iter().rposition(|&e| !(e <= threshold));
    match last_bad {
        None if errors.is_empty() => None,
        None => Some(1),
        Some(i) if i + 1 == errors.len() => None,
        Some(i) => Some(i + 2),
    }
}

/// Median of stage counts where `None` (never converged) ranks as +∞.
pub fn median_stages(values: &[Option<usize>]) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|s| s.map_or(f64::INFINITY, |n| n as f64)).collect();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// `inf_{‖x - x*‖ ≥ ε} f(x*) - f(x)` over the objective's domain, by dense
/// grid search plus boundary sampling and local refinement.
pub fn delta_epsilon(obj: &Objective, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let dom = obj.domain();
    let d = dom.dim();
    let star = obj.true_argmax();
    let best = obj.max_value();
    let outside = |x: &[f64]| {
        x.iter().zip(star).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= epsilon
    };

    let per_axis = ((1e5f64).powf(1.0 / d as f64).round() as usize).max(2);
    let mut cands: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let x: Vec<f64> = (0..d)
            .map(|i| dom.lower()[i] + dom.width(i) * idx[i] as f64 / (per_axis - 1) as f64)
            .collect();
        if outside(&x) {
            cands.push((best - obj.evaluate(&x), x));
        }
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    // the infimum often sits on the sphere ‖x - x*‖ = ε
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let sphere = if d == 1 { 2 } else { 20_000 };
    for k in 0..sphere {
        let dir: Vec<f64> = if d == 1 {
            vec![if k == 0 { 1.0 } else { -1.0 }]
        } else {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            z.into_iter().map(|v| v / n).collect()
        };
        let x: Vec<f64> = star.iter().zip(&dir).map(|(s, u)| s + epsilon * u).collect();
        if dom.contains(&x) {
            cands.push((best - obj.evaluate(&x), x));
        }
    }
    if cands.is_empty() {
        return Err(Error::invalid("no domain point lies at distance epsilon or more from the maximizer"));
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));

    // compass search restricted to the feasible set
    let mut result = cands[0].0;
    for (gap0, x0) in cands.iter().take(5) {
        let mut x = x0.clone();
        let mut gap = *gap0;
        let mut step: Vec<f64> = (0..d).map(|i| dom.width(i) / per_axis as f64).collect();
        while step.iter().any(|&s| s > 1e-12) {
            let mut improved = false;
            for i in 0..d {
                for sign in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] = (y[i] + sign * step[i]).clamp(dom.lower()[i], dom.upper()[i]);
                    if outside(&y) {
                        let g = best - obj.evaluate(&y);
                        if g < gap {
                            gap = g;
                            x = y;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                for s in step.iter_mut() {
                    *s *= 0.5;
                }
            }
        }
        result = result.min(gap);
    }
    Ok(result.max(0.0))
}

/// `exp(-½(δ + m + sqrt(2δm + m²)))`, the stated tail bound for
/// `P(Z > m + δ)` with `Z ~ χ²_m`.
pub fn chi_square_tail_bound(m: usize, delta: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("chi-square degrees of freedom must be at least 1"));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid(format!("delta must be non-negative, got {delta}")));
    }
    let m = m as f64;
    Ok((-0.5 * (delta + m + (2.0 * delta * m + m * m).sqrt())).exp())
}

/// Least-squares line through a per-stage error series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of error against stage index (1-based), skipping
/// the first 20% of stages and any non-finite entries.
pub fn decay_rate_fit(errors: &[f64]) -> Result<DecayFit> {
    let finite = errors.iter().filter(|e| e.is_finite()).count();
    if finite < 10 {
        return Err(Error::InsufficientData { needed: 10, got: finite });
    }
    let burn_in = errors.len() / 5;
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .skip(burn_in)
        .filter(|(_, e)| e.is_finite())
        .map(|(i, &e)| ((i + 1) as f64, e))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 0.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit { slope, intercept, r_squared })
}
