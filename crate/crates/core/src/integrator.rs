//! Strain-driven update of a single material point.
//!
//! Each increment runs an elastic predictor and, when the trial state violates
//! the yield condition, a fully implicit (backward Euler) return mapping. All
//! stress-state quantities (`η`, `θ0`, `h`) and the flow direction are taken at
//! the end-of-step stress. The local system is solved by Newton iteration with
//! a line search; a bisection on the plastic multiplier is the fallback.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{
    self, damage_potential_rate, df_dd, df_debar, df_dsigma, df_dsigma_full, dh_dsigma_full,
    elastic_constants, energy_release_y, h_of_stress, hardening, yield_function_f, yield_stress,
    MaterialParams,
};
use crate::tensors::{stress_state, SymTensor, VOIGT_WEIGHTS};

/// Margin below `hD = 1` at which a point is declared fractured.
pub const SATURATION_MARGIN: f64 = 1e-6;
/// `hD` above which a failed sub-solve is read as damage runaway.
const RUNAWAY_HD: f64 = 0.5;
/// `hD` (stiffness below 1% of virgin) at which a local breakdown counts as
/// fracture.
pub const BREAKDOWN_HD: f64 = 0.99;

const LINE_SEARCH_CUTS: usize = 10;
const BISECTION_ITERS: usize = 200;
/// Residual level at which the local Newton iteration stops early.
const TIGHT: f64 = 1e-13;

/// Internal state of one material point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialState {
    pub eps_e: SymTensor,
    pub ebar_p: f64,
    pub d: f64,
    pub sigma: SymTensor,
    pub h: f64,
    pub fractured: bool,
}

impl MaterialState {
    pub fn virgin(p: &MaterialParams) -> Self {
        MaterialState {
            eps_e: SymTensor::ZERO,
            ebar_p: 0.0,
            d: 0.0,
            sigma: SymTensor::ZERO,
            h: h_of_stress(&SymTensor::ZERO, p),
            fractured: false,
        }
    }
}

/// Fourth-order tangent stored as a 6×6 matrix acting on tensor components:
/// `Δσ[i] = Σ_j matrix[(i, j)] Δε[j]`, with shear entries of `Δε` being
/// tensor (not engineering) components.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub matrix: Matrix6<f64>,
    /// Elastoplastic modulus `H_ep`; `None` on the elastic branch.
    pub h_ep: Option<f64>,
    /// Set when `H_ep <= 0`.
    pub softening: bool,
}

impl Tangent {
    pub fn apply(&self, deps: &SymTensor) -> SymTensor {
        let v = self.matrix * Vector6::from(deps.0);
        SymTensor([v[0], v[1], v[2], v[3], v[4], v[5]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: MaterialState,
    pub plastic: bool,
    pub delta_lambda: f64,
    pub iterations: usize,
    /// Yield function at the returned state (MPa).
    pub f_residual: f64,
    pub tangent: Tangent,
}

/// Elastic predictor output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub eps_e: SymTensor,
    pub sigma: SymTensor,
    pub h: f64,
    pub f: f64,
}

/// Isotropic elasticity matrix in the tensor-component convention.
pub fn elasticity_matrix(p: &MaterialParams) -> Matrix6<f64> {
    let (lambda, mu) = elastic_constants(p);
    let mut c = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lambda;
        }
        c[(i, i)] += 2.0 * mu;
        c[(i + 3, i + 3)] = 2.0 * mu;
    }
    c
}

fn col(t: &SymTensor) -> Vector6<f64> {
    Vector6::from(t.0)
}

/// Row vector `a` such that `a · x = t : x` for tensor-component `x`.
fn contraction_row(t: &SymTensor) -> nalgebra::RowVector6<f64> {
    let mut r = nalgebra::RowVector6::zeros();
    for i in 0..6 {
        r[i] = VOIGT_WEIGHTS[i] * t[i];
    }
    r
}

/// Stress and `h` for a given elastic strain and damage.
///
/// `h(σ)` depends on `σ` only through `η` and `θ0`, which do not change under
/// the positive scaling `σ = (1 - hD) C:εe`, so `h` follows directly from the
/// undamaged stress and the predictor fixed point closes in one sweep.
pub fn damaged_stress(eps_e: &SymTensor, d: f64, p: &MaterialParams) -> Result<(SymTensor, f64)> {
    let undamaged = material::undamaged_stress(eps_e, p);
    let h = h_of_stress(&undamaged, p);
    let sigma = material::elastic_stress(eps_e, d, h, p)?;
    Ok((sigma, h))
}

pub fn trial_step(state: &MaterialState, delta_eps: &SymTensor, p: &MaterialParams) -> Result<Trial> {
    if state.fractured {
        return Err(Error::Fractured);
    }
    let eps_e = state.eps_e + *delta_eps;
    let (sigma, h) = damaged_stress(&eps_e, state.d, p)?;
    let f = yield_function_f(&sigma, state.ebar_p, state.d, p)?;
    Ok(Trial { eps_e, sigma, h, f })
}

/// Converged (or candidate) solution of the local plastic system.
#[derive(Debug, Clone)]
struct LocalSolution {
    eps_e: SymTensor,
    ebar_p: f64,
    d: f64,
    delta_lambda: f64,
}

struct LocalProblem<'a> {
    p: &'a MaterialParams,
    eps_trial: SymTensor,
    ebar_n: f64,
    d_n: f64,
    /// Stress scale used to normalise stress unknowns and residuals.
    s_ref: f64,
}

impl LocalProblem<'_> {
    /// Residuals of the flow rule, equivalent plastic strain update, yield
    /// condition and damage update for unknowns `(σ/s_ref, ε̄p, Δλ, D)`.
    fn residual(&self, x: &[f64; 9]) -> Result<[f64; 9]> {
        let p = self.p;
        let sigma = SymTensor([x[0], x[1], x[2], x[3], x[4], x[5]]) * self.s_ref;
        let (ebar, dl, d) = (x[6], x[7], x[8]);
        if ebar < 0.0 {
            return Err(Error::NegativeStrain(ebar));
        }
        let n = df_dsigma(&sigma, ebar, d, p)?;
        let q = (2.0 / 3.0 * n.ddot(&n)).sqrt();
        let eps_e = self.eps_trial - n * dl;
        let (sigma_e, h) = damaged_stress(&eps_e, d, p)?;
        let f = yield_function_f(&sigma, ebar, d, p)?;
        let y = energy_release_y(&eps_e, h, p);
        let rate = damage_potential_rate(y, d, h, p)?;
        let rs = (sigma - sigma_e) * (1.0 / self.s_ref);
        Ok([
            rs[0],
            rs[1],
            rs[2],
            rs[3],
            rs[4],
            rs[5],
            ebar - self.ebar_n - dl * q,
            f / self.s_ref,
            d - self.d_n - dl * rate,
        ])
    }

    fn fd_steps(&self, x: &[f64; 9]) -> [f64; 9] {
        // Stress steps stay well above the Lode singularity guard so the
        // difference quotient sees the smoothed Lode term near θ0 = ±1.
        [
            1e-5,
            1e-5,
            1e-5,
            1e-5,
            1e-5,
            1e-5,
            1e-7 * x[6].abs().max(1e-4),
            1e-7 * x[7].abs().max(1e-6),
            1e-9,
        ]
    }

    /// Unknowns that are solved for; the multiplier is dropped when it is
    /// prescribed (bisection fallback).
    fn solve(
        &self,
        x0: [f64; 9],
        active: &[usize],
        max_iter: usize,
        tol_f_rel: f64,
    ) -> (std::result::Result<[f64; 9], [f64; 9]>, usize) {
        let mut x = x0;
        let mut r = match self.residual(&x) {
            Ok(r) => r,
            Err(_) => return (Err(x), 0),
        };
        let merit = |r: &[f64; 9]| active.iter().map(|&i| r[i] * r[i]).sum::<f64>();
        let converged = |r: &[f64; 9]| {
            active.iter().all(|&i| {
                if i == 7 {
                    r[i].abs() <= tol_f_rel
                } else {
                    r[i].abs() <= 1e-11
                }
            })
        };
        let tight = |r: &[f64; 9]| active.iter().all(|&i| r[i].abs() <= TIGHT);
        let k = active.len();
        for it in 1..=max_iter {
            if tight(&r) {
                return (Ok(x), it - 1);
            }
            let steps = self.fd_steps(&x);
            let mut jac = DMatrix::<f64>::zeros(k, k);
            for (c, &j) in active.iter().enumerate() {
                let mut xp = x;
                let mut xm = x;
                xp[j] += steps[j];
                xm[j] -= steps[j];
                let (rp, rm, h) = match (self.residual(&xp), self.residual(&xm)) {
                    (Ok(rp), Ok(rm)) => (rp, rm, 2.0 * steps[j]),
                    (Ok(rp), Err(_)) => (rp, r, steps[j]),
                    (Err(_), Ok(rm)) => (r, rm, steps[j]),
                    _ => return (Err(x), it),
                };
                for (row, &i) in active.iter().enumerate() {
                    jac[(row, c)] = (rp[i] - rm[i]) / h;
                }
            }
            let rhs = DVector::from_iterator(k, active.iter().map(|&i| -r[i]));
            let Some(dx) = jac.lu().solve(&rhs) else {
                return (Err(x), it);
            };
            let m0 = merit(&r);
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=LINE_SEARCH_CUTS {
                let mut xn = x;
                for (c, &j) in active.iter().enumerate() {
                    xn[j] += scale * dx[c];
                }
                if let Ok(rn) = self.residual(&xn) {
                    if merit(&rn) < m0 || converged(&rn) && tight(&rn) {
                        accepted = Some((xn, rn));
                        break;
                    }
                }
                scale *= 0.5;
            }
            match accepted {
                Some((xn, rn)) => {
                    x = xn;
                    r = rn;
                }
                None => {
                    return if converged(&r) { (Ok(x), it) } else { (Err(x), it) };
                }
            }
        }
        if converged(&r) {
            (Ok(x), max_iter)
        } else {
            (Err(x), max_iter)
        }
    }

    fn unpack(&self, x: &[f64; 9]) -> Result<LocalSolution> {
        let sigma = SymTensor([x[0], x[1], x[2], x[3], x[4], x[5]]) * self.s_ref;
        let n = df_dsigma(&sigma, x[6], x[8], self.p)?;
        Ok(LocalSolution {
            eps_e: self.eps_trial - n * x[7],
            ebar_p: x[6],
            d: x[8],
            delta_lambda: x[7],
        })
    }
}

enum LocalOutcome {
    Converged(LocalSolution, usize),
    /// No admissible solution below damage saturation: the point breaks.
    Runaway(Option<LocalSolution>, usize),
}

/// Strain-driven update of one material point.
pub fn return_map(state: &MaterialState, delta_eps: &SymTensor, p: &MaterialParams) -> Result<StepResult> {
    let trial = match trial_step(state, delta_eps, p) {
        Ok(t) => t,
        Err(Error::SaturatedDamage { .. }) => return Ok(saturated_step(state, delta_eps, p)?),
        Err(e) => return Err(e),
    };
    if trial.f <= 0.0 {
        let new_state = MaterialState {
            eps_e: trial.eps_e,
            ebar_p: state.ebar_p,
            d: state.d,
            sigma: trial.sigma,
            h: trial.h,
            fractured: false,
        };
        let tangent = tangent_at(&new_state, false, p)?;
        return Ok(StepResult {
            state: new_state,
            plastic: false,
            delta_lambda: 0.0,
            iterations: 0,
            f_residual: trial.f,
            tangent,
        });
    }

    let outcome = match solve_plastic(state, &trial, p) {
        Ok(o) => o,
        // With h > 1/Dc the damage can only creep towards hD = 1 and the
        // multiplier collapses; once the stiffness is nearly gone a failed
        // local solve means the point has broken.
        Err(Error::ReturnMapNonConvergence { iterations, .. }) if trial.h * state.d >= BREAKDOWN_HD => {
            LocalOutcome::Runaway(None, iterations)
        }
        Err(e) => return Err(e),
    };
    let (solution, iterations, runaway) = match outcome {
        LocalOutcome::Converged(s, it) => (Some(s), it, false),
        LocalOutcome::Runaway(s, it) => (s, it, true),
    };
    let solution = solution.unwrap_or(LocalSolution {
        eps_e: trial.eps_e,
        ebar_p: state.ebar_p,
        d: state.d,
        delta_lambda: 0.0,
    });

    let undamaged = material::undamaged_stress(&solution.eps_e, p);
    let h = h_of_stress(&undamaged, p);
    let saturated_d = (1.0 - SATURATION_MARGIN) / h;
    let fractured = runaway || solution.d >= p.dc || h * solution.d >= 1.0 - SATURATION_MARGIN;
    let d = if fractured {
        solution.d.min(p.dc).min(saturated_d).max(state.d)
    } else {
        solution.d
    };
    if h * d >= 1.0 - SATURATION_MARGIN {
        // Damage cannot heal, and the new stress state saturates it.
        let mut step = saturated_step(state, &(solution.eps_e - state.eps_e), p)?;
        step.state.ebar_p = solution.ebar_p.max(state.ebar_p);
        step.plastic = solution.delta_lambda > 0.0;
        step.delta_lambda = solution.delta_lambda;
        step.iterations = iterations;
        return Ok(step);
    }
    let sigma = material::elastic_stress(&solution.eps_e, d, h, p)?;
    let new_state = MaterialState {
        eps_e: solution.eps_e,
        ebar_p: solution.ebar_p.max(state.ebar_p),
        d,
        sigma,
        h,
        fractured,
    };
    let f_residual = yield_function_f(&sigma, new_state.ebar_p, d, p)?;
    let tangent = tangent_at(&new_state, !fractured, p)?;
    Ok(StepResult {
        state: new_state,
        plastic: solution.delta_lambda > 0.0,
        delta_lambda: solution.delta_lambda,
        iterations,
        f_residual,
        tangent,
    })
}

/// The increment rotates the stress into a state whose `h` saturates the
/// existing damage: the point has lost its load-bearing capacity.
fn saturated_step(state: &MaterialState, delta_eps: &SymTensor, p: &MaterialParams) -> Result<StepResult> {
    let eps_e = state.eps_e + *delta_eps;
    let undamaged = material::undamaged_stress(&eps_e, p);
    let new_state = MaterialState {
        eps_e,
        ebar_p: state.ebar_p,
        d: state.d,
        sigma: undamaged * SATURATION_MARGIN,
        h: h_of_stress(&undamaged, p),
        fractured: true,
    };
    let tangent = Tangent {
        matrix: elasticity_matrix(p) * SATURATION_MARGIN,
        h_ep: None,
        softening: false,
    };
    Ok(StepResult { state: new_state, plastic: false, delta_lambda: 0.0, iterations: 0, f_residual: 0.0, tangent })
}

fn solve_plastic(state: &MaterialState, trial: &Trial, p: &MaterialParams) -> Result<LocalOutcome> {
    let st = stress_state(&trial.sigma);
    let sy_trial = yield_stress(state.ebar_p, st.eta, st.theta0, p)?;
    let problem = LocalProblem {
        p,
        eps_trial: trial.eps_e,
        ebar_n: state.ebar_p,
        d_n: state.d,
        s_ref: sy_trial.abs().max(p.a.abs()).max(1.0),
    };
    let tol_f_rel = p.tol_f * sy_trial.abs().max(1e-12) / problem.s_ref;
    let x0 = initial_guess(state, trial, &problem)?;
    let all: Vec<usize> = (0..9).collect();
    let (res, it) = problem.solve(x0, &all, p.max_iter, tol_f_rel);
    match res {
        Ok(x) => {
            if x[7] >= 0.0 && x[8] >= state.d - 1e-15 && admissible(&problem, &x, tol_f_rel) {
                let mut sol = problem.unpack(&x)?;
                sol.d = sol.d.max(state.d);
                sol.delta_lambda = sol.delta_lambda.max(0.0);
                return Ok(LocalOutcome::Converged(sol, it));
            }
        }
        Err(x) => {
            // Newton stalled on the way to damage saturation.
            if let Ok(sol) = problem.unpack(&x) {
                let saturating = x[7] >= 0.0
                    && sol.d >= state.d
                    && h_of_stress(&material::undamaged_stress(&sol.eps_e, p), p) * sol.d >= BREAKDOWN_HD;
                if saturating {
                    return Ok(LocalOutcome::Runaway(Some(sol), it));
                }
            }
        }
    }
    bisect_multiplier(state, trial, &problem, x0, it, tol_f_rel)
}

/// Rechecks the yield condition on the stress recomputed from the elastic
/// strain, which is what gets stored.
fn admissible(problem: &LocalProblem, x: &[f64; 9], tol_f_rel: f64) -> bool {
    let Ok(sol) = problem.unpack(x) else { return false };
    let Ok((sigma, _)) = damaged_stress(&sol.eps_e, sol.d, problem.p) else { return false };
    match yield_function_f(&sigma, sol.ebar_p, sol.d, problem.p) {
        Ok(f) => (f / problem.s_ref).abs() <= tol_f_rel,
        Err(_) => false,
    }
}

fn initial_guess(state: &MaterialState, trial: &Trial, problem: &LocalProblem) -> Result<[f64; 9]> {
    let p = problem.p;
    let n = df_dsigma(&trial.sigma, state.ebar_p, state.d, p)?;
    let c = elasticity_matrix(p);
    let w = 1.0 - trial.h * state.d;
    let cn = c * col(&n) * w;
    let nf = df_dsigma_full(&trial.sigma, state.ebar_p, state.d, p)?;
    let stiffness = (contraction_row(&nf) * cn)[0];
    let st = stress_state(&trial.sigma);
    let q = (2.0 / 3.0 * n.ddot(&n)).sqrt();
    let hardening_mod = -df_debar(state.ebar_p, st.eta, st.theta0, p)? * q;
    let dl = (trial.f / (stiffness + hardening_mod.max(0.0))).max(0.0);
    let y = energy_release_y(&trial.eps_e, trial.h, p);
    let rate = damage_potential_rate(y, state.d, trial.h, p)?;
    let mut d = state.d + dl * rate;
    if trial.h * d >= 1.0 - SATURATION_MARGIN {
        d = state.d;
    }
    let eps_e = trial.eps_e - n * dl;
    let Ok((sigma, _)) = damaged_stress(&eps_e, d, p).or_else(|_| damaged_stress(&eps_e, state.d, p)) else {
        // The linearised return saturates the damage; start from the trial.
        let s = trial.sigma * (1.0 / problem.s_ref);
        return Ok([s[0], s[1], s[2], s[3], s[4], s[5], state.ebar_p, 0.0, state.d]);
    };
    let s = sigma * (1.0 / problem.s_ref);
    Ok([s[0], s[1], s[2], s[3], s[4], s[5], state.ebar_p + dl * q, dl, d])
}

/// Fallback: for a prescribed multiplier the remaining unknowns are solved by
/// Newton, and the multiplier is bisected on the sign of the yield function.
/// The bracket is capped by the largest multiplier for which a solution below
/// damage saturation exists.
fn bisect_multiplier(
    state: &MaterialState,
    trial: &Trial,
    problem: &LocalProblem,
    x0: [f64; 9],
    iterations_so_far: usize,
    tol_f_rel: f64,
) -> Result<LocalOutcome> {
    let p = problem.p;
    let sub: Vec<usize> = vec![0, 1, 2, 3, 4, 5, 6, 8];
    let iterations = std::cell::Cell::new(iterations_so_far);
    // Solve the sub-system at a fixed multiplier, warm-started from `guess`.
    let solve_at = |dl: f64, guess: &[f64; 9]| -> Option<([f64; 9], f64)> {
        let mut x = *guess;
        x[7] = dl;
        let (res, it) = problem.solve(x, &sub, p.max_iter, tol_f_rel);
        iterations.set(iterations.get() + it);
        let x = res.ok()?;
        if x[8] < state.d - 1e-12 {
            return None;
        }
        let r = problem.residual(&x).ok()?;
        Some((x, r[7]))
    };

    let mut lo_x = x0;
    lo_x[7] = 0.0;
    lo_x[6] = state.ebar_p;
    lo_x[8] = state.d;
    let s = trial.sigma * (1.0 / problem.s_ref);
    lo_x[..6].copy_from_slice(&s.0);
    let mut lo = 0.0;

    // Expand until the yield function changes sign or the sub-system fails.
    let mut hi = x0[7].max(1e-10);
    let mut hi_x = None;
    let mut failed_at = None;
    for _ in 0..200 {
        match solve_at(hi, &lo_x) {
            Some((x, f)) if f <= 0.0 => {
                hi_x = Some(x);
                break;
            }
            Some((x, _)) => {
                lo = hi;
                lo_x = x;
                hi *= 2.0;
            }
            None => {
                failed_at = Some(hi);
                break;
            }
        }
    }

    if let Some(mut upper) = failed_at {
        // Locate the saturation bound, keeping the best solvable iterate.
        for _ in 0..BISECTION_ITERS {
            if upper - lo <= 1e-14 * upper.max(1e-300) {
                break;
            }
            let mid = 0.5 * (lo + upper);
            match solve_at(mid, &lo_x) {
                Some((x, f)) if f <= 0.0 => {
                    hi_x = Some(x);
                    hi = mid;
                    break;
                }
                Some((x, _)) => {
                    lo = mid;
                    lo_x = x;
                }
                None => upper = mid,
            }
        }
        if hi_x.is_none() {
            // Only a bound close to saturation means the point breaks; a
            // sub-solve failure far from it is a plain non-convergence.
            let sol = if lo > 0.0 { problem.unpack(&lo_x).ok() } else { None };
            let near_saturation = sol.as_ref().is_some_and(|s| {
                damaged_stress(&s.eps_e, s.d, p).is_ok_and(|(_, h)| h * s.d >= RUNAWAY_HD || s.d >= p.dc)
            });
            if !near_saturation {
                return Err(Error::ReturnMapNonConvergence { iterations: iterations.get(), residual: f64::NAN });
            }
            return Ok(LocalOutcome::Runaway(sol, iterations.get()));
        }
    }

    let Some(mut hi_x) = hi_x else {
        return Err(Error::ReturnMapNonConvergence { iterations: iterations.get(), residual: f64::NAN });
    };
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let (x, f) = solve_at(mid, &lo_x).ok_or(Error::ReturnMapNonConvergence {
            iterations: iterations.get(),
            residual: f64::NAN,
        })?;
        if f.abs() <= tol_f_rel && admissible(problem, &x, tol_f_rel) {
            return Ok(LocalOutcome::Converged(problem.unpack(&x)?, iterations.get()));
        }
        if f > 0.0 {
            lo = mid;
            lo_x = x;
        } else {
            hi = mid;
            hi_x = x;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let r = problem.residual(&hi_x)?;
    if r[7].abs() <= tol_f_rel {
        return Ok(LocalOutcome::Converged(problem.unpack(&hi_x)?, iterations.get()));
    }
    Err(Error::ReturnMapNonConvergence { iterations: iterations.get(), residual: r[7].abs() * problem.s_ref })
}

/// Plastic hardening modulus `h_p = -∂f/∂ε̄p · dε̄p/dλ - ∂f/∂D · dD/dλ`.
pub fn plastic_modulus(state: &MaterialState, p: &MaterialParams) -> Result<f64> {
    let sigma = &state.sigma;
    let st = stress_state(sigma);
    let n = df_dsigma(sigma, state.ebar_p, state.d, p)?;
    let q = (2.0 / 3.0 * n.ddot(&n)).sqrt();
    let y = energy_release_y(&state.eps_e, state.h, p);
    let rate = damage_potential_rate(y, state.d, state.h, p)?;
    let f_e = df_debar(state.ebar_p, st.eta, st.theta0, p)?;
    let f_d = df_dd(sigma, state.d, p)?;
    Ok(-f_e * q - f_d * rate)
}

/// Consistent tangent of a converged step.
pub fn consistent_tangent(step: &StepResult, p: &MaterialParams) -> Result<Tangent> {
    tangent_at(&step.state, step.plastic && !step.state.fractured, p)
}

/// Tangent at a converged state.
///
/// The elastic operator linearises `σ = (1 - h(σ)D) C:εe`, which reduces to
/// `(1 - hD) C` whenever `D = 0` or `σ = 0`. On the plastic branch
///
/// ```text
/// dσ = Ce (dε - dλ n) + ∂σ/∂D · dλ ∂F/∂Y
/// H_ep = h_p + nf : Ce : n - nf : ∂σ/∂D · ∂F/∂Y
/// T = Ce - (Ce n - ∂σ/∂D ∂F/∂Y) ⊗ (nf : Ce) / H_ep
/// ```
///
/// where `n` is the deviatoric flow direction and `nf` the complete stress
/// gradient of `f` used in the consistency condition.
fn tangent_at(state: &MaterialState, plastic: bool, p: &MaterialParams) -> Result<Tangent> {
    let c = elasticity_matrix(p);
    let w = 1.0 - state.h * state.d;
    if w <= 0.0 {
        return Err(Error::SaturatedDamage { hd: state.h * state.d });
    }
    let mut ce = c * w;
    let degenerate = stress_state(&state.sigma).degenerate;
    if state.d != 0.0 && !degenerate {
        let gh = dh_dsigma_full(&state.sigma, p)?;
        ce -= col(&state.sigma) * (contraction_row(&gh) * c) * state.d;
    }
    if !plastic || degenerate {
        return Ok(Tangent { matrix: ce, h_ep: None, softening: false });
    }
    let sigma = &state.sigma;
    let n = df_dsigma(sigma, state.ebar_p, state.d, p)?;
    let nf = df_dsigma_full(sigma, state.ebar_p, state.d, p)?;
    let y = energy_release_y(&state.eps_e, state.h, p);
    let rate = damage_potential_rate(y, state.d, state.h, p)?;
    let h_p = plastic_modulus(state, p)?;
    let dsig_dd = col(sigma) * (-state.h / w);
    let b = ce * col(&n) - dsig_dd * rate;
    let a = contraction_row(&nf) * ce;
    let h_ep = h_p + (a * col(&n))[0] - (contraction_row(&nf) * dsig_dd)[0] * rate;
    let matrix = ce - b * a / h_ep;
    Ok(Tangent { matrix, h_ep: Some(h_ep), softening: h_ep <= 0.0 })
}

/// Current yield stress of a state.
pub fn current_yield_stress(state: &MaterialState, p: &MaterialParams) -> Result<f64> {
    let st = stress_state(&state.sigma);
    yield_stress(state.ebar_p, st.eta, st.theta0, p)
}

/// Slope of the hardening curve at the state's `ε̄p`.
pub fn hardening_slope(state: &MaterialState, p: &MaterialParams) -> Result<f64> {
    Ok(hardening(state.ebar_p, p)?.1)
}
