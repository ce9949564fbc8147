//! Yield-surface polar sweeps and damage-locus tables.

use std::f64::consts::{FRAC_PI_3, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{fracture_strain, run_path_partial, PathSpec};
use crate::error::{Error, Result};
use crate::material::{flow_correction, stress_state_param_h, MaterialParams};
use crate::tensors::{lode_angle, lode_parameter};

/// Power-law locus coefficient and exponent.
pub const LOCUS_COEFFICIENT: f64 = 0.44717;
pub const LOCUS_EXPONENT: f64 = -1.72555;

/// One sample of the yield surface in the deviatoric plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub theta0: f64,
    /// Lode angle in `[0, π/3]`.
    pub theta: f64,
    /// `σy / σ̄`.
    pub radius: f64,
}

/// Normalised yield radius over `θ0 ∈ [-1, 1]`, sampled uniformly from
/// `θ0 = 1` down to `θ0 = -1`.
///
/// The ratio `σy/σ̄` does not depend on `ε̄p`; the argument is accepted so
/// callers can record where the surface was taken.
pub fn yield_surface_sweep(params: &MaterialParams, _ebar_p: f64, eta: f64, samples: usize) -> Result<Vec<PolarPoint>> {
    if samples < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples, got {samples}")));
    }
    Ok((0..samples)
        .map(|i| {
            let theta0 = 1.0 - 2.0 * i as f64 / (samples - 1) as f64;
            PolarPoint { theta0, theta: lode_angle(theta0), radius: flow_correction(eta, theta0, params) }
        })
        .collect())
}

/// Full deviatoric-plane curve `(φ, r)` over `φ ∈ [0, 2π)` built from the
/// `π/3` sector by mirror and threefold symmetry. `φ = 0` is the tensile
/// meridian.
pub fn polar_unfold(params: &MaterialParams, eta: f64, samples: usize) -> Vec<(f64, f64)> {
    (0..samples)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / samples as f64;
            (phi, polar_radius(params, eta, phi))
        })
        .collect()
}

/// Normalised yield radius at deviatoric-plane angle `phi`.
pub fn polar_radius(params: &MaterialParams, eta: f64, phi: f64) -> f64 {
    let t = phi.rem_euclid(2.0 * FRAC_PI_3);
    let theta = t.min(2.0 * FRAC_PI_3 - t);
    flow_correction(eta, lode_parameter(theta), params)
}

/// `ε̄f = 0.44717 · h^-1.72555`.
pub fn locus_from_h(h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::NonPositiveH(h));
    }
    Ok(LOCUS_COEFFICIENT * h.powf(LOCUS_EXPONENT))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LocusMode {
    PowerLaw,
    /// Proportional paths driven to `max_strain` on the lead principal
    /// component in `steps` increments.
    Simulated { steps: usize, max_strain: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusRow {
    pub eta: f64,
    pub theta0: f64,
    pub h: f64,
    /// `None` when the cell failed or never fractured.
    pub ebar_f: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusTable {
    pub rows: Vec<LocusRow>,
}

impl LocusTable {
    pub fn get(&self, eta: f64, theta0: f64) -> Option<&LocusRow> {
        self.rows
            .iter()
            .find(|r| (r.eta - eta).abs() < 1e-12 && (r.theta0 - theta0).abs() < 1e-12)
    }
}

/// `η ∈ [-0.6, 1.0]` in steps of 0.05.
pub fn default_eta_grid() -> Vec<f64> {
    (0..=32).map(|i| -0.6 + 0.05 * i as f64).collect()
}

pub fn default_theta0_grid() -> Vec<f64> {
    vec![-1.0, -0.5, 0.0, 0.5, 1.0]
}

/// Fracture strain over every `(η, θ0)` cell. Cells are independent and run
/// in parallel; a failing cell is recorded and the sweep continues.
pub fn damage_locus_sweep(
    params: &MaterialParams,
    eta_grid: &[f64],
    theta0_grid: &[f64],
    mode: LocusMode,
) -> Result<LocusTable> {
    if eta_grid.is_empty() || theta0_grid.is_empty() {
        return Err(Error::InvalidArgument("locus grids must be nonempty".into()));
    }
    params.validate()?;
    let cells: Vec<(f64, f64)> = eta_grid
        .iter()
        .flat_map(|&eta| theta0_grid.iter().map(move |&t| (eta, t)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(eta, theta0)| locus_cell(params, eta, theta0, mode))
        .collect();
    Ok(LocusTable { rows })
}

fn locus_cell(params: &MaterialParams, eta: f64, theta0: f64, mode: LocusMode) -> LocusRow {
    let h = stress_state_param_h(eta, theta0, params);
    let outcome = match mode {
        LocusMode::PowerLaw => locus_from_h(h).map_err(|e| e.to_string()),
        LocusMode::Simulated { steps, max_strain } => {
            let path = PathSpec::proportional(eta, theta0, max_strain, steps);
            match run_path_partial(params, &path) {
                Ok(run) => match (fracture_strain(&run.records, params.dc), run.failure) {
                    (Some(e), _) => Ok(e),
                    (None, Some(err)) => Err(err.to_string()),
                    (None, None) => Err("no fracture within the path".to_string()),
                },
                Err(e) => Err(e.to_string()),
            }
        }
    };
    match outcome {
        Ok(e) => LocusRow { eta, theta0, h, ebar_f: Some(e), failure: None },
        Err(msg) => LocusRow { eta, theta0, h, ebar_f: None, failure: Some(msg) },
    }
}
