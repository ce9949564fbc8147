//! Least-squares calibration of the locus power law and the hardening curve.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fits `ε̄f = c · h^k` by linear least squares on `(ln h, ln ε̄f)`.
/// Returns `(c, k)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: points.len() });
    }
    if let Some(&(h, e)) = points.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0)) {
        return Err(Error::DegenerateData(format!("nonpositive point ({h}, {e})")));
    }
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (h, e)| (sx + h.ln(), sy + e.ln()));
    let (mx, my) = (mx / n, my / n);
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(sxx, sxy), (h, e)| {
        let dx = h.ln() - mx;
        (sxx + dx * dx, sxy + dx * (e.ln() - my))
    });
    if sxx <= f64::EPSILON * f64::EPSILON * n {
        return Err(Error::DegenerateData("all h values are equal".into()));
    }
    let k = sxy / sxx;
    Ok(((my - k * mx).exp(), k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardeningFit {
    pub a: f64,
    pub b: f64,
    pub n: f64,
    /// Root-mean-square residual in stress units.
    pub rms_residual: f64,
    pub iterations: usize,
}

const LM_MAX_ITERS: usize = 500;

/// Fits `σ̄ = A + B ε̄pⁿ` by damped Gauss-Newton (Levenberg-Marquardt),
/// starting from `A = min σ̄`, `B = max σ̄ - min σ̄`, `n = 0.5`.
pub fn fit_hardening(points: &[(f64, f64)]) -> Result<HardeningFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: points.len() });
    }
    if points.iter().any(|(e, s)| !(*e >= 0.0) || !s.is_finite() || !e.is_finite()) {
        return Err(Error::DegenerateData("strains must be finite and nonnegative".into()));
    }
    let distinct = points.iter().filter(|(e, _)| *e > 0.0 && (e - points[0].0).abs() > 0.0).count();
    if distinct < 2 {
        return Err(Error::DegenerateData("need at least three distinct strains".into()));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, s)| (lo.min(s), hi.max(s)));
    let mut x = Vector3::new(lo, (hi - lo).max(f64::EPSILON * hi.abs().max(1.0)), 0.5);

    let cost = |x: &Vector3<f64>| -> f64 {
        points.iter().map(|&(e, s)| (model(x, e) - s).powi(2)).sum()
    };
    let mut c = cost(&x);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < LM_MAX_ITERS {
        iterations += 1;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for &(e, s) in points {
            let pw = if e > 0.0 { e.powf(x[2]) } else { 0.0 };
            let j = Vector3::new(1.0, pw, if e > 0.0 { x[1] * pw * e.ln() } else { 0.0 });
            let r = x[0] + x[1] * pw - s;
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let scale = Vector3::new(jtj[(0, 0)], jtj[(1, 1)], jtj[(2, 2)]).map(|d| d.max(1e-300));
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj;
            for i in 0..3 {
                a[(i, i)] += lambda * scale[i];
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = x + step;
            let ct = if trial[2] > 0.0 { cost(&trial) } else { f64::INFINITY };
            if ct <= c {
                let small = step.iter().zip(x.iter()).all(|(d, v)| d.abs() <= 1e-14 * v.abs().max(1e-12));
                x = trial;
                let drop = c - ct;
                c = ct;
                lambda = (lambda * 0.3).max(1e-15);
                accepted = true;
                if small || drop <= 1e-30 * c.max(1e-300) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left: the current point is stationary to
            // working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged || !x.iter().all(|v| v.is_finite()) {
        return Err(Error::FitNonConvergence { iterations });
    }
    Ok(HardeningFit {
        a: x[0],
        b: x[1],
        n: x[2],
        rms_residual: (c / points.len() as f64).sqrt(),
        iterations,
    })
}

fn model(x: &Vector3<f64>, e: f64) -> f64 {
    if e > 0.0 {
        x[0] + x[1] * e.powf(x[2])
    } else {
        x[0]
    }
}
