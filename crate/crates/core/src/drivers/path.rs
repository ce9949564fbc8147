//! Mixed strain/stress controlled load paths for a single material point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{return_map, MaterialState, StepResult};
use crate::material::MaterialParams;
use crate::tensors::{stress_state, SymTensor};

/// Accepted stress error on controlled components, relative to `E`.
pub const STRESS_TOLERANCE: f64 = 1e-6;
/// Level the mixed-control Newton iteration aims for before stopping.
const STRESS_TARGET: f64 = 1e-11;
const MAX_CONTROL_ITERS: usize = 40;
/// Iterations with the consistent tangent before switching to a
/// difference-quotient Jacobian.
const TANGENT_ITERS: usize = 20;

/// Control mode of one tensor component. Targets are final values reached
/// linearly over the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Control {
    Strain(f64),
    Stress(f64),
    /// Stress held proportional to the stress of a strain-controlled lead
    /// component: `σ_i = ratio · σ_lead`.
    StressRatio { lead: usize, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub steps: usize,
    /// Components in the order `(11, 22, 33, 12, 23, 13)`.
    pub controls: [Control; 6],
}

pub const PATH_PRESETS: [&str; 3] = ["uniaxial_tension", "uniaxial_compression", "simple_shear"];

impl PathSpec {
    /// Axial strain `ε11` driven to `strain` with free lateral contraction.
    pub fn uniaxial(steps: usize, strain: f64) -> Self {
        use Control::*;
        PathSpec {
            steps,
            controls: [Strain(strain), Stress(0.0), Stress(0.0), Strain(0.0), Strain(0.0), Strain(0.0)],
        }
    }

    pub fn uniaxial_tension(steps: usize) -> Self {
        Self::uniaxial(steps, 0.7)
    }

    pub fn uniaxial_compression(steps: usize) -> Self {
        Self::uniaxial(steps, -0.7)
    }

    /// Shear strain `ε12` driven with every other stress component held at
    /// zero, giving a pure shear stress state.
    pub fn simple_shear(steps: usize) -> Self {
        use Control::*;
        PathSpec {
            steps,
            controls: [Stress(0.0), Stress(0.0), Stress(0.0), Strain(0.5), Stress(0.0), Stress(0.0)],
        }
    }

    pub fn preset(name: &str, steps: usize) -> Option<Self> {
        match name {
            "uniaxial_tension" => Some(Self::uniaxial_tension(steps)),
            "uniaxial_compression" => Some(Self::uniaxial_compression(steps)),
            "simple_shear" => Some(Self::simple_shear(steps)),
            _ => None,
        }
    }

    /// Proportional stress path with fixed triaxiality and Lode angle
    /// parameter. The principal component of largest magnitude is strain
    /// driven to `max_strain` (with its sign); the other two principal
    /// stresses follow in fixed ratio and the shear strains stay zero.
    pub fn proportional(eta: f64, theta0: f64, max_strain: f64, steps: usize) -> Self {
        let dir = crate::tensors::principal_direction(eta, theta0);
        let lead = (0..3)
            .max_by(|&a, &b| dir[a].abs().total_cmp(&dir[b].abs()))
            .unwrap_or(0);
        let mut controls = [Control::Strain(0.0); 6];
        for i in 0..3 {
            controls[i] = if i == lead {
                Control::Strain(max_strain.abs() * dir[lead].signum())
            } else {
                Control::StressRatio { lead, ratio: dir[i] / dir[lead] }
            };
        }
        PathSpec { steps, controls }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidPath("steps must be at least 1".into()));
        }
        if !self.controls.iter().any(|c| matches!(c, Control::Strain(_))) {
            return Err(Error::InvalidPath("at least one component must be strain controlled".into()));
        }
        for (i, c) in self.controls.iter().enumerate() {
            match *c {
                Control::Strain(v) | Control::Stress(v) if !v.is_finite() => {
                    return Err(Error::InvalidPath(format!("component {i} has a non-finite target")));
                }
                Control::StressRatio { lead, ratio } => {
                    if lead >= 6 || !matches!(self.controls[lead], Control::Strain(_)) {
                        return Err(Error::InvalidPath(format!(
                            "component {i} must follow a strain-controlled lead"
                        )));
                    }
                    if !ratio.is_finite() {
                        return Err(Error::InvalidPath(format!("component {i} has a non-finite ratio")));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One row of a simulated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub step: usize,
    pub eps: SymTensor,
    pub sigma: SymTensor,
    pub ebar_p: f64,
    pub d: f64,
    pub h: f64,
    pub eta: f64,
    pub theta0: f64,
    pub f_residual: f64,
    pub plastic: bool,
    pub fractured: bool,
}

impl SimRecord {
    fn new(step: usize, eps: SymTensor, state: &MaterialState, f_residual: f64, plastic: bool) -> Self {
        let st = stress_state(&state.sigma);
        SimRecord {
            step,
            eps,
            sigma: state.sigma,
            ebar_p: state.ebar_p,
            d: state.d,
            h: state.h,
            eta: st.eta,
            theta0: st.theta0,
            f_residual,
            plastic,
            fractured: state.fractured,
        }
    }

    pub fn sigma_eq(&self) -> f64 {
        stress_state(&self.sigma).sigma_eq
    }
}

/// Records produced before the path ended, and the error that ended it early
/// if any.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRun {
    pub records: Vec<SimRecord>,
    pub failure: Option<Error>,
}

/// Runs a load path, failing on the first non-converged step.
pub fn run_path(params: &MaterialParams, path: &PathSpec) -> Result<Vec<SimRecord>> {
    let run = run_path_partial(params, path)?;
    match run.failure {
        Some(e) => Err(e),
        None => Ok(run.records),
    }
}

/// Runs a load path and keeps the records written before any failure.
/// Invalid inputs are still reported as errors.
pub fn run_path_partial(params: &MaterialParams, path: &PathSpec) -> Result<PathRun> {
    params.validate()?;
    path.validate()?;
    let state = MaterialState::virgin(params);
    let mut records = vec![SimRecord::new(0, SymTensor::ZERO, &state, -params.a, false)];
    let mut cursor = Cursor { state, eps: SymTensor::ZERO, last_increment: SymTensor::ZERO, last_step: None, plastic: false };

    for step in 1..=path.steps {
        let from = (step - 1) as f64 / path.steps as f64;
        let to = step as f64 / path.steps as f64;
        cursor.plastic = false;
        match advance(params, path, &cursor, from, to, 0, step) {
            Ok(next) => {
                cursor = next;
                let last = cursor.last_step.as_ref().expect("advance always records a step");
                records.push(SimRecord::new(step, cursor.eps, &cursor.state, last.f_residual, cursor.plastic));
                if cursor.state.fractured {
                    break;
                }
            }
            Err(e) => return Ok(PathRun { records, failure: Some(e) }),
        }
    }
    Ok(PathRun { records, failure: None })
}

/// Converged point state between increments.
#[derive(Clone)]
struct Cursor {
    state: MaterialState,
    eps: SymTensor,
    last_increment: SymTensor,
    last_step: Option<StepResult>,
    /// Whether any sub-increment of the current step was plastic.
    plastic: bool,
}

/// Halvings allowed when an increment fails to converge.
const MAX_SUBDIVISION: u32 = 6;

/// Advances the path from load fraction `from` to `to`, halving the
/// increment when the mixed-control or local solve fails.
fn advance(
    params: &MaterialParams,
    path: &PathSpec,
    cursor: &Cursor,
    from: f64,
    to: f64,
    depth: u32,
    step: usize,
) -> Result<Cursor> {
    let attempt = control_step(
        params,
        path,
        &cursor.state,
        &cursor.eps,
        to,
        &cursor.last_increment,
        cursor.last_step.as_ref(),
        step,
    );
    match attempt {
        Ok((deps, result)) => Ok(Cursor {
            state: result.state.clone(),
            eps: cursor.eps + deps,
            last_increment: deps,
            plastic: cursor.plastic || result.plastic,
            last_step: Some(result),
        }),
        Err(e) if depth >= MAX_SUBDIVISION => Err(e),
        Err(_) => {
            let mid = 0.5 * (from + to);
            let mut half = cursor.clone();
            half.last_increment = cursor.last_increment * 0.5;
            let first = advance(params, path, &half, from, mid, depth + 1, step)?;
            if first.state.fractured {
                return Ok(first);
            }
            advance(params, path, &first, mid, to, depth + 1, step)
        }
    }
}

/// Solves one increment for the unknown strain components.
#[allow(clippy::too_many_arguments)]
fn control_step(
    params: &MaterialParams,
    path: &PathSpec,
    state: &MaterialState,
    eps: &SymTensor,
    frac: f64,
    last_increment: &SymTensor,
    last_step: Option<&StepResult>,
    step: usize,
) -> Result<(SymTensor, StepResult)> {
    let free: Vec<usize> = (0..6).filter(|&i| !matches!(path.controls[i], Control::Strain(_))).collect();
    let mut deps = SymTensor::ZERO;
    for i in 0..6 {
        deps[i] = match path.controls[i] {
            Control::Strain(target) => target * frac - eps[i],
            _ => last_increment[i],
        };
    }

    let residual = |result: &StepResult| -> Vec<f64> {
        let s = &result.state.sigma;
        free.iter()
            .map(|&i| match path.controls[i] {
                Control::Stress(target) => s[i] - target * frac,
                Control::StressRatio { lead, ratio } => s[i] - ratio * s[lead],
                Control::Strain(_) => 0.0,
            })
            .collect()
    };
    let jacobian_from = |t: &nalgebra::Matrix6<f64>| -> DMatrix<f64> {
        DMatrix::from_fn(free.len(), free.len(), |r, c| {
            let (i, j) = (free[r], free[c]);
            match path.controls[i] {
                Control::StressRatio { lead, ratio } => t[(i, j)] - ratio * t[(lead, j)],
                _ => t[(i, j)],
            }
        })
    };

    if free.is_empty() {
        let result = return_map(state, &deps, params)?;
        return Ok((deps, result));
    }

    // Predictor from the previous tangent.
    if let Some(prev) = last_step {
        let t = &prev.tangent.matrix;
        let j = jacobian_from(t);
        let mut rhs = DVector::zeros(free.len());
        let mut fixed = SymTensor::ZERO;
        for i in 0..6 {
            if matches!(path.controls[i], Control::Strain(_)) {
                fixed[i] = deps[i];
            }
        }
        let sigma = &state.sigma;
        for (r, &i) in free.iter().enumerate() {
            let predicted: f64 = (0..6).map(|k| t[(i, k)] * fixed[k]).sum();
            rhs[r] = match path.controls[i] {
                Control::Stress(target) => target * frac - sigma[i] - predicted,
                Control::StressRatio { lead, ratio } => {
                    let lead_pred: f64 = (0..6).map(|k| t[(lead, k)] * fixed[k]).sum();
                    ratio * (sigma[lead] + lead_pred) - sigma[i] - predicted
                }
                Control::Strain(_) => 0.0,
            };
        }
        if let Some(x) = j.lu().solve(&rhs) {
            for (r, &i) in free.iter().enumerate() {
                if x[r].is_finite() {
                    deps[i] = x[r];
                }
            }
        }
    }

    let scale = params.e;
    let mut result = match return_map(state, &deps, params) {
        Ok(r) => r,
        Err(_) => {
            // The predictor overshot; restart from the previous increment.
            for &i in &free {
                deps[i] = last_increment[i];
            }
            return_map(state, &deps, params)?
        }
    };
    let mut r = residual(&result);
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for it in 0..MAX_CONTROL_ITERS {
        if norm(&r) <= STRESS_TARGET * scale {
            break;
        }
        let jac = if it < TANGENT_ITERS {
            jacobian_from(&result.tangent.matrix)
        } else {
            match difference_jacobian(params, state, &deps, &free, &r, &residual) {
                Ok(j) => j,
                Err(_) => break,
            }
        };
        let rhs = DVector::from_iterator(free.len(), r.iter().map(|v| -v));
        let Some(dx) = jac.lu().solve(&rhs) else { break };
        let mut damping = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let mut trial = deps;
            for (k, &i) in free.iter().enumerate() {
                trial[i] += damping * dx[k];
            }
            if let Ok(res) = return_map(state, &trial, params) {
                let rn = residual(&res);
                if norm(&rn) < norm(&r) {
                    deps = trial;
                    result = res;
                    r = rn;
                    improved = true;
                    break;
                }
            }
            damping *= 0.5;
        }
        if !improved || result.state.fractured {
            break;
        }
    }

    let worst = r
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, v)| (free[k], v.abs()))
        .unwrap_or((0, 0.0));
    if worst.1 > STRESS_TOLERANCE * scale && !result.state.fractured {
        return Err(Error::MixedControlNonConvergence { step, component: worst.0, error: worst.1 });
    }
    Ok((deps, result))
}

fn difference_jacobian(
    params: &MaterialParams,
    state: &MaterialState,
    deps: &SymTensor,
    free: &[usize],
    r0: &[f64],
    residual: &dyn Fn(&StepResult) -> Vec<f64>,
) -> Result<DMatrix<f64>> {
    let mut jac = DMatrix::zeros(free.len(), free.len());
    for (c, &j) in free.iter().enumerate() {
        let h = 1e-9f64.max(1e-6 * deps[j].abs());
        let mut pert = *deps;
        pert[j] += h;
        let res = return_map(state, &pert, params)?;
        let r1 = residual(&res);
        for row in 0..free.len() {
            jac[(row, c)] = (r1[row] - r0[row]) / h;
        }
    }
    Ok(jac)
}

/// Equivalent plastic strain at fracture, linearly interpolated to `D = Dc`
/// between the last intact record and the first fractured one.
pub fn fracture_strain(records: &[SimRecord], dc: f64) -> Option<f64> {
    let k = records.iter().position(|r| r.fractured)?;
    let last = &records[k];
    if k == 0 {
        return Some(last.ebar_p);
    }
    let prev = &records[k - 1];
    if last.d <= prev.d {
        return Some(last.ebar_p);
    }
    let t = ((dc - prev.d) / (last.d - prev.d)).clamp(0.0, 1.0);
    Some(prev.ebar_p + t * (last.ebar_p - prev.ebar_p))
}

/// Record with the largest equivalent stress.
pub fn peak_stress(records: &[SimRecord]) -> Option<&SimRecord> {
    records.iter().max_by(|a, b| a.sigma_eq().total_cmp(&b.sigma_eq()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_validation() {
        let mut p = PathSpec::uniaxial_tension(10);
        p.validate().unwrap();
        p.steps = 0;
        assert!(p.validate().is_err());
        let all_stress = PathSpec { steps: 5, controls: [Control::Stress(1.0); 6] };
        assert!(all_stress.validate().is_err());
        let bad_lead = PathSpec {
            steps: 5,
            controls: [
                Control::Strain(0.1),
                Control::StressRatio { lead: 2, ratio: 0.5 },
                Control::Stress(0.0),
                Control::Strain(0.0),
                Control::Strain(0.0),
                Control::Strain(0.0),
            ],
        };
        assert!(bad_lead.validate().is_err());
        for name in PATH_PRESETS {
            PathSpec::preset(name, 3).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn elastic_path_has_no_plastic_rows() {
        let p = MaterialParams::al2024();
        let recs = run_path(&p, &PathSpec::uniaxial(20, 0.004)).unwrap();
        assert_eq!(recs.len(), 21);
        assert!(recs.iter().all(|r| !r.plastic && r.d == 0.0));
        let last = recs.last().unwrap();
        assert!((last.sigma[0] - p.e * 0.004).abs() < 1e-6);
        assert!((last.eps[1] + p.nu * 0.004).abs() < 1e-12);
    }

    #[test]
    fn tension_lateral_stresses_controlled() {
        let p = MaterialParams::al2024();
        let recs = run_path(&p, &PathSpec::uniaxial(200, 0.1)).unwrap();
        for r in &recs {
            assert!(r.sigma[1].abs() <= STRESS_TOLERANCE * p.e);
            assert!(r.sigma[2].abs() <= STRESS_TOLERANCE * p.e);
        }
        assert!(recs.last().unwrap().ebar_p > 0.05);
    }

    #[test]
    fn fracture_readout_interpolates() {
        let mk = |ebar_p: f64, d: f64, fractured: bool| SimRecord {
            step: 0,
            eps: SymTensor::ZERO,
            sigma: SymTensor::ZERO,
            ebar_p,
            d,
            h: 1.0,
            eta: 0.0,
            theta0: 0.0,
            f_residual: 0.0,
            plastic: true,
            fractured,
        };
        let recs = vec![mk(0.0, 0.0, false), mk(0.5, 0.9, false), mk(0.6, 1.0, true)];
        let e = fracture_strain(&recs, 0.99).unwrap();
        assert!((e - 0.59).abs() < 1e-12);
        assert!(fracture_strain(&recs[..2], 0.99).is_none());
    }
}
