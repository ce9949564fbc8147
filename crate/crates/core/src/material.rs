//! Constitutive laws: hardening, stress-state corrected flow stress, the
//! stress-state damage parameter `h`, damaged elasticity, damage energy
//! release rate, damage potential, and the derivatives of the yield function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensors::{self, stress_state, SymTensor};

/// Floor on `ε̄p` when evaluating the hardening slope, which diverges at zero
/// for `n < 1`.
pub const SLOPE_STRAIN_FLOOR: f64 = 1e-8;

/// Material constants and numerical controls of one material point.
///
/// Defaults are the 2024-T351 aluminium constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    /// Young's modulus (MPa).
    pub e: f64,
    /// Poisson's ratio.
    pub nu: f64,
    /// Initial yield stress of the hardening law (MPa).
    pub a: f64,
    /// Hardening coefficient (MPa).
    pub b: f64,
    /// Hardening exponent.
    pub n: f64,
    /// Damage threshold on the energy release rate (MPa).
    pub y0: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Damage strength (MPa). `f64::INFINITY` switches damage growth off.
    pub gamma: f64,
    /// Triaxiality sensitivity of the flow stress.
    pub c_eta: f64,
    pub c_theta_t: f64,
    pub c_theta_s: f64,
    pub c_theta_c: f64,
    pub d_eta_t: f64,
    pub d_theta_s: f64,
    pub d_eta_c: f64,
    /// Smoothing exponent of the Lode weight.
    pub m: u32,
    /// Reference triaxiality.
    pub eta0: f64,
    /// Critical damage at which the point is considered fractured.
    pub dc: f64,
    /// Yield residual tolerance relative to the current yield stress.
    pub tol_f: f64,
    pub max_iter: usize,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            e: 71150.0,
            nu: 0.3,
            a: 370.0,
            b: 620.0,
            n: 0.396,
            y0: 0.0,
            alpha: 2.0,
            beta: 1.0,
            gamma: 12.8,
            c_eta: 0.09,
            c_theta_t: 1.0,
            c_theta_s: 0.855,
            c_theta_c: 0.9,
            d_eta_t: 1.3,
            d_theta_s: 0.55,
            d_eta_c: 0.6,
            m: 6,
            eta0: 0.4,
            dc: 0.99,
            tol_f: 1e-8,
            max_iter: 50,
        }
    }
}

/// Names accepted by [`MaterialParams::preset`].
pub const PRESET_NAMES: [&str; 4] = ["al2024", "yield_demo", "uncorrected", "classical"];

impl MaterialParams {
    /// 2024-T351 aluminium calibration.
    pub fn al2024() -> Self {
        Self::default()
    }

    /// Lode-shape demonstration constants `(1, 0.92, 1.05, m = 6)` with the
    /// triaxiality correction switched off.
    pub fn yield_demo() -> Self {
        MaterialParams {
            c_eta: 0.0,
            c_theta_t: 1.0,
            c_theta_s: 0.92,
            c_theta_c: 1.05,
            m: 6,
            ..Self::default()
        }
    }

    /// Every stress-state correction disabled (von Mises yield, `h = 1`);
    /// damage still evolves.
    pub fn uncorrected() -> Self {
        Self::default().without_corrections()
    }

    /// Corrections and damage both disabled: textbook J2 plasticity with
    /// power-law hardening.
    pub fn classical() -> Self {
        Self::default().without_corrections().without_damage()
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "al2024" => Some(Self::al2024()),
            "yield_demo" => Some(Self::yield_demo()),
            "uncorrected" => Some(Self::uncorrected()),
            "classical" => Some(Self::classical()),
            _ => None,
        }
    }

    pub fn without_corrections(mut self) -> Self {
        self.c_eta = 0.0;
        self.c_theta_t = 1.0;
        self.c_theta_s = 1.0;
        self.c_theta_c = 1.0;
        self.d_eta_t = 0.0;
        self.d_theta_s = 0.0;
        self.d_eta_c = 0.0;
        self
    }

    pub fn without_damage(mut self) -> Self {
        self.gamma = f64::INFINITY;
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: &str) -> Result<()> {
            Err(Error::InvalidParameter { name, reason: reason.to_string() })
        }
        let finite = [
            ("e", self.e),
            ("nu", self.nu),
            ("a", self.a),
            ("b", self.b),
            ("n", self.n),
            ("y0", self.y0),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("c_eta", self.c_eta),
            ("c_theta_t", self.c_theta_t),
            ("c_theta_s", self.c_theta_s),
            ("c_theta_c", self.c_theta_c),
            ("d_eta_t", self.d_eta_t),
            ("d_theta_s", self.d_theta_s),
            ("d_eta_c", self.d_eta_c),
            ("eta0", self.eta0),
            ("dc", self.dc),
            ("tol_f", self.tol_f),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return bad(name, "must be finite");
            }
        }
        if self.e <= 0.0 {
            return bad("e", "must be positive");
        }
        if !(self.nu > -1.0 && self.nu < 0.5) {
            return bad("nu", "must lie in (-1, 0.5)");
        }
        if self.n <= 0.0 {
            return bad("n", "must be positive");
        }
        if self.alpha < 0.0 {
            return bad("alpha", "must be nonnegative");
        }
        if self.beta < 0.0 {
            return bad("beta", "must be nonnegative");
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return bad("gamma", "must be positive");
        }
        if self.m < 1 {
            return bad("m", "must be at least 1");
        }
        if !(self.dc > 0.0 && self.dc <= 1.0) {
            return bad("dc", "must lie in (0, 1]");
        }
        if self.tol_f <= 0.0 {
            return bad("tol_f", "must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be at least 1");
        }
        Ok(())
    }

    pub fn damage_enabled(&self) -> bool {
        self.gamma.is_finite()
    }

    /// `c_θ^ax`: tension branch for `θ0 >= 0`, compression branch otherwise.
    pub fn c_theta_axial(&self, theta0: f64) -> f64 {
        if theta0 >= 0.0 {
            self.c_theta_t
        } else {
            self.c_theta_c
        }
    }

    /// `d_η^ax`: tension branch for `θ0 >= 0`, compression branch otherwise.
    /// At `θ0 = 0` the Lode weight vanishes so the branch is irrelevant.
    pub fn d_eta_axial(&self, theta0: f64) -> f64 {
        if theta0 >= 0.0 {
            self.d_eta_t
        } else {
            self.d_eta_c
        }
    }

    /// Parameter echo used in output file headers.
    pub fn echo(&self) -> String {
        format!(
            "e={} nu={} a={} b={} n={} y0={} alpha={} beta={} gamma={} c_eta={} c_theta_t={} \
             c_theta_s={} c_theta_c={} d_eta_t={} d_theta_s={} d_eta_c={} m={} eta0={} dc={} \
             tol_f={} max_iter={}",
            self.e,
            self.nu,
            self.a,
            self.b,
            self.n,
            self.y0,
            self.alpha,
            self.beta,
            self.gamma,
            self.c_eta,
            self.c_theta_t,
            self.c_theta_s,
            self.c_theta_c,
            self.d_eta_t,
            self.d_theta_s,
            self.d_eta_c,
            self.m,
            self.eta0,
            self.dc,
            self.tol_f,
            self.max_iter
        )
    }
}

/// Smoothed Lode shape function `g(θ0) = θ0² - (θ0²)^(m+1)/(m+1)` and its
/// derivative `2θ0 [1 - (θ0²)^m]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LodeWeight {
    pub g: f64,
    pub dg_dtheta0: f64,
}

impl LodeWeight {
    pub fn new(theta0: f64, m: u32) -> Self {
        let t2 = theta0 * theta0;
        let t2m = t2.powi(m as i32);
        LodeWeight {
            g: t2 - t2m * t2 / (m as f64 + 1.0),
            dg_dtheta0: 2.0 * theta0 * (1.0 - t2m),
        }
    }
}

/// Lamé constants `(λe, μe)`.
pub fn elastic_constants(p: &MaterialParams) -> (f64, f64) {
    let lambda = p.nu * p.e / ((1.0 + p.nu) * (1.0 - 2.0 * p.nu));
    let mu = p.e / (2.0 * (1.0 + p.nu));
    (lambda, mu)
}

/// Power-law hardening `σ̄ = A + B ε̄pⁿ` and its slope.
pub fn hardening(ebar_p: f64, p: &MaterialParams) -> Result<(f64, f64)> {
    if ebar_p < 0.0 || ebar_p.is_nan() {
        return Err(Error::NegativeStrain(ebar_p));
    }
    let sigma_bar = p.a + p.b * ebar_p.powf(p.n);
    let e = ebar_p.max(SLOPE_STRAIN_FLOOR);
    let slope = p.n * p.b * e.powf(p.n - 1.0);
    Ok((sigma_bar, slope))
}

/// Pressure factor `1 - c_η (η - η0)`.
fn pressure_factor(eta: f64, p: &MaterialParams) -> f64 {
    1.0 - p.c_eta * (eta - p.eta0)
}

/// Lode factor `c_θ^s + (c_θ^ax - c_θ^s) g(θ0)`.
fn lode_factor(theta0: f64, p: &MaterialParams) -> f64 {
    let w = LodeWeight::new(theta0, p.m);
    p.c_theta_s + (p.c_theta_axial(theta0) - p.c_theta_s) * w.g
}

/// Stress-state correction multiplying the hardening curve.
pub fn flow_correction(eta: f64, theta0: f64, p: &MaterialParams) -> f64 {
    pressure_factor(eta, p) * lode_factor(theta0, p)
}

/// Stress-state dependent yield stress `σy(ε̄p, η, θ0)`.
pub fn yield_stress(ebar_p: f64, eta: f64, theta0: f64, p: &MaterialParams) -> Result<f64> {
    let (sigma_bar, _) = hardening(ebar_p, p)?;
    Ok(sigma_bar * flow_correction(eta, theta0, p))
}

/// Stress-state damage parameter `h(η, θ0)`.
pub fn stress_state_param_h(eta: f64, theta0: f64, p: &MaterialParams) -> f64 {
    let w = LodeWeight::new(theta0, p.m);
    1.0 + p.d_theta_s + (p.d_eta_axial(theta0) * (eta - p.eta0) - p.d_theta_s) * w.g
}

/// `h` evaluated at the stress state of `sigma` (degenerate stress uses the
/// conventional `η = 0, θ0 = 1`).
pub fn h_of_stress(sigma: &SymTensor, p: &MaterialParams) -> f64 {
    let st = stress_state(sigma);
    stress_state_param_h(st.eta, st.theta0, p)
}

fn check_saturation(h: f64, d: f64) -> Result<f64> {
    let hd = h * d;
    if hd >= 1.0 || hd.is_nan() {
        return Err(Error::SaturatedDamage { hd });
    }
    Ok(1.0 - hd)
}

/// Undamaged elastic stress `C : εe`.
pub fn undamaged_stress(eps_e: &SymTensor, p: &MaterialParams) -> SymTensor {
    let (lambda, mu) = elastic_constants(p);
    *eps_e * (2.0 * mu) + SymTensor::IDENTITY * (lambda * eps_e.trace())
}

/// Damaged stress `σ = (1 - hD) [2μe εe + λe tr(εe) 1]`.
pub fn elastic_stress(eps_e: &SymTensor, d: f64, h: f64, p: &MaterialParams) -> Result<SymTensor> {
    let w = check_saturation(h, d)?;
    Ok(undamaged_stress(eps_e, p) * w)
}

/// Damage energy release rate `Y = h [μe εe:εe + λe/2 (tr εe)²]`.
pub fn energy_release_y(eps_e: &SymTensor, h: f64, p: &MaterialParams) -> f64 {
    let (lambda, mu) = elastic_constants(p);
    let tr = eps_e.trace();
    h * (mu * eps_e.ddot(eps_e) + 0.5 * lambda * tr * tr)
}

/// Yield function `f = σeq/√(1 - hD) - σy(ε̄p, η, θ0)` with `h` taken from
/// the stress state of `sigma`.
pub fn yield_function_f(sigma: &SymTensor, ebar_p: f64, d: f64, p: &MaterialParams) -> Result<f64> {
    let st = stress_state(sigma);
    let h = stress_state_param_h(st.eta, st.theta0, p);
    let w = check_saturation(h, d)?;
    Ok(st.sigma_eq / w.sqrt() - yield_stress(ebar_p, st.eta, st.theta0, p)?)
}

/// `∂F_Y/∂Y = (1 - hD)^(-β) ⟨(Y - Y0)/γ⟩^α`.
pub fn damage_potential_rate(y: f64, d: f64, h: f64, p: &MaterialParams) -> Result<f64> {
    let w = check_saturation(h, d)?;
    let excess = y - p.y0;
    if excess <= 0.0 || !p.damage_enabled() {
        return Ok(0.0);
    }
    Ok((excess / p.gamma).powf(p.alpha) / w.powf(p.beta))
}

/// Derivative of [`damage_potential_rate`] with respect to `Y`.
pub fn damage_potential_rate_dy(y: f64, d: f64, h: f64, p: &MaterialParams) -> Result<f64> {
    let w = check_saturation(h, d)?;
    let excess = y - p.y0;
    if excess <= 0.0 || !p.damage_enabled() || p.alpha == 0.0 {
        return Ok(0.0);
    }
    Ok(p.alpha / p.gamma * (excess / p.gamma).powf(p.alpha - 1.0) / w.powf(p.beta))
}

/// `∂f/∂D = h σeq / (2 (1 - hD)^(3/2))`.
pub fn df_dd(sigma: &SymTensor, d: f64, p: &MaterialParams) -> Result<f64> {
    let st = stress_state(sigma);
    let h = stress_state_param_h(st.eta, st.theta0, p);
    let w = check_saturation(h, d)?;
    Ok(h * st.sigma_eq / (2.0 * w.powf(1.5)))
}

/// `∂f/∂ε̄p` at fixed stress state: `-[1 - c_η(η-η0)]{c_θ^s + (c_θ^ax - c_θ^s)g} dσ̄/dε̄p`.
pub fn df_debar(ebar_p: f64, eta: f64, theta0: f64, p: &MaterialParams) -> Result<f64> {
    let (_, slope) = hardening(ebar_p, p)?;
    Ok(-flow_correction(eta, theta0, p) * slope)
}

/// Stress gradient of `h`, built from the smoothed Lode chain and the given
/// triaxiality gradient.
fn dh_dsigma(theta0: f64, eta: f64, deta: &SymTensor, lode: &SymTensor, p: &MaterialParams) -> SymTensor {
    let w = LodeWeight::new(theta0, p.m);
    let d_ax = p.d_eta_axial(theta0);
    *lode * (2.0 * theta0 * (d_ax * (eta - p.eta0) - p.d_theta_s)) + *deta * (d_ax * w.g)
}

/// Complete stress gradient of `h(σ)`, hydrostatic part included.
pub fn dh_dsigma_full(sigma: &SymTensor, p: &MaterialParams) -> Result<SymTensor> {
    let st = stress_state(sigma);
    let deta = tensors::deta_dsigma_full(sigma)?;
    let lode = tensors::smoothed_lode_gradient(sigma, p.m)?;
    Ok(dh_dsigma(st.theta0, st.eta, &deta, &lode, p))
}

/// Stress gradient of `σy` at fixed `ε̄p`.
fn dsy_dsigma(
    sigma_bar: f64,
    theta0: f64,
    eta: f64,
    deta: &SymTensor,
    lode: &SymTensor,
    p: &MaterialParams,
) -> SymTensor {
    let c_ax = p.c_theta_axial(theta0);
    *lode * (sigma_bar * pressure_factor(eta, p) * 2.0 * theta0 * (c_ax - p.c_theta_s))
        - *deta * (sigma_bar * p.c_eta * lode_factor(theta0, p))
}

fn gradient_of_f(sigma: &SymTensor, ebar_p: f64, d: f64, p: &MaterialParams, full: bool) -> Result<SymTensor> {
    let dseq = tensors::dseq_dsigma(sigma)?;
    let st = stress_state(sigma);
    let h = stress_state_param_h(st.eta, st.theta0, p);
    let w = check_saturation(h, d)?;
    let deta = if full {
        tensors::deta_dsigma_full(sigma)?
    } else {
        tensors::deta_dsigma(sigma)?
    };
    let lode = tensors::smoothed_lode_gradient(sigma, p.m)?;
    let (sigma_bar, _) = hardening(ebar_p, p)?;
    let dh = dh_dsigma(st.theta0, st.eta, &deta, &lode, p);
    let dsy = dsy_dsigma(sigma_bar, st.theta0, st.eta, &deta, &lode, p);
    Ok(dseq * (1.0 / w.sqrt()) + dh * (d * st.sigma_eq / (2.0 * w.powf(1.5))) - dsy)
}

/// Flow direction `∂f/∂σ` with deviatoric associativity: the hydrostatic
/// contribution of the triaxiality dependence is dropped, so the result is
/// traceless.
pub fn df_dsigma(sigma: &SymTensor, ebar_p: f64, d: f64, p: &MaterialParams) -> Result<SymTensor> {
    gradient_of_f(sigma, ebar_p, d, p, false)
}

/// Complete stress gradient of `f`, including the hydrostatic part that
/// enters through `η`. Used for the consistency condition.
pub fn df_dsigma_full(sigma: &SymTensor, ebar_p: f64, d: f64, p: &MaterialParams) -> Result<SymTensor> {
    gradient_of_f(sigma, ebar_p, d, p, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn al2024() -> MaterialParams {
        MaterialParams::al2024()
    }

    #[test]
    fn defaults_and_presets() {
        let p = al2024();
        assert_eq!((p.e, p.nu, p.a, p.b, p.n), (71150.0, 0.3, 370.0, 620.0, 0.396));
        assert_eq!((p.y0, p.alpha, p.beta, p.gamma), (0.0, 2.0, 1.0, 12.8));
        assert_eq!((p.c_eta, p.c_theta_t, p.c_theta_s, p.c_theta_c), (0.09, 1.0, 0.855, 0.9));
        assert_eq!((p.d_eta_t, p.d_theta_s, p.d_eta_c, p.m, p.eta0), (1.3, 0.55, 0.6, 6, 0.4));
        p.validate().unwrap();
        for name in PRESET_NAMES {
            MaterialParams::preset(name).unwrap().validate().unwrap();
        }
        assert!(MaterialParams::preset("nope").is_none());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let cases: Vec<Box<dyn Fn(&mut MaterialParams)>> = vec![
            Box::new(|p| p.e = 0.0),
            Box::new(|p| p.nu = 0.5),
            Box::new(|p| p.n = -1.0),
            Box::new(|p| p.gamma = 0.0),
            Box::new(|p| p.m = 0),
            Box::new(|p| p.dc = 1.5),
            Box::new(|p| p.alpha = -1.0),
        ];
        for mutate in cases {
            let mut p = al2024();
            mutate(&mut p);
            assert!(matches!(p.validate(), Err(Error::InvalidParameter { .. })));
        }
        MaterialParams::classical().validate().unwrap();
    }

    #[test]
    fn lame_constants() {
        let (l, m) = elastic_constants(&al2024());
        assert!((l - 41048.08).abs() < 5e-3);
        assert!((m - 27365.38).abs() < 5e-3);
        let p = MaterialParams { nu: 0.0, ..al2024() };
        let (l, m) = elastic_constants(&p);
        assert_eq!(l, 0.0);
        assert_eq!(m, p.e / 2.0);
        let p = MaterialParams { e: 1.0, nu: 0.25, ..al2024() };
        let (l, m) = elastic_constants(&p);
        assert_relative_eq!(l, 0.4, max_relative = 1e-14);
        assert_relative_eq!(m, 0.4, max_relative = 1e-14);
    }

    #[test]
    fn hardening_values() {
        let p = al2024();
        assert_eq!(hardening(0.0, &p).unwrap().0, 370.0);
        assert_relative_eq!(hardening(1.0, &p).unwrap().0, 990.0, max_relative = 1e-14);
        assert!((hardening(0.47, &p).unwrap().0 - 829.772).abs() < 1e-3);
        let (_, s0) = hardening(0.0, &p).unwrap();
        assert!(s0.is_finite() && s0 > 0.0);
        assert!(matches!(hardening(-1e-3, &p), Err(Error::NegativeStrain(_))));
    }

    #[test]
    fn lode_weight_properties() {
        let m = 6;
        assert_eq!(LodeWeight::new(0.0, m).g, 0.0);
        for t in [-1.0, 1.0] {
            let w = LodeWeight::new(t, m);
            assert_relative_eq!(w.g, 6.0 / 7.0, max_relative = 1e-14);
            assert_eq!(w.dg_dtheta0, 0.0);
        }
        let mut prev = -1.0;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let w = LodeWeight::new(t, m);
            assert!((0.0..=1.0).contains(&w.g));
            assert_eq!(w.g, LodeWeight::new(-t, m).g);
            assert!(w.g >= prev);
            prev = w.g;
        }
    }

    #[test]
    fn yield_stress_cases() {
        let p = al2024();
        assert!((yield_stress(0.0, p.eta0, 0.0, &p).unwrap() - 316.35).abs() < 1e-9);
        assert!((yield_stress(0.0, p.eta0, 1.0, &p).unwrap() - 362.34).abs() < 5e-3);
        let off = MaterialParams::uncorrected();
        for &(eta, t) in &[(-0.5, -1.0), (0.0, 0.3), (0.9, 1.0)] {
            assert_relative_eq!(
                yield_stress(0.2, eta, t, &off).unwrap(),
                hardening(0.2, &off).unwrap().0,
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn h_against_tabulated_states() {
        let p = al2024();
        assert!((stress_state_param_h(0.0124, 0.0355, &p) - 1.54867).abs() < 1e-4);
        assert!((stress_state_param_h(0.9274, 0.9984, &p) - 1.6663).abs() < 5e-4);
        assert!((stress_state_param_h(0.1173, 0.3381, &p) - 1.4451).abs() < 5e-4);
        assert_relative_eq!(stress_state_param_h(p.eta0, 0.0, &p), 1.55, max_relative = 1e-15);
    }

    #[test]
    fn h_limits_for_large_m() {
        let p = MaterialParams { m: 200, ..al2024() };
        for eta in [-0.5, 0.1, 0.9] {
            let t = 1.0 + p.d_eta_t * (eta - p.eta0);
            let c = 1.0 + p.d_eta_c * (eta - p.eta0);
            // g(±1) = m/(m+1), so the gap is |dθs - dη(η-η0)|/(m+1).
            assert!((stress_state_param_h(eta, 1.0, &p) - t).abs() <= 1e-2);
            assert!((stress_state_param_h(eta, -1.0, &p) - c).abs() <= 1e-2);
            assert_eq!(stress_state_param_h(eta, 0.0, &p), 1.0 + p.d_theta_s);
        }
    }

    #[test]
    fn damaged_elasticity() {
        let p = al2024();
        assert_eq!(elastic_stress(&SymTensor::ZERO, 0.2, 1.1, &p).unwrap(), SymTensor::ZERO);
        // Uniaxial strain: σ11 = (λ + 2μ) ε, σ22 = λ ε.
        let (l, m) = elastic_constants(&p);
        let s = elastic_stress(&SymTensor::diag(1e-3, 0.0, 0.0), 0.0, 1.3, &p).unwrap();
        assert_relative_eq!(s[0], (l + 2.0 * m) * 1e-3, max_relative = 1e-14);
        assert_relative_eq!(s[1], l * 1e-3, max_relative = 1e-14);

        let eps = SymTensor::new(1e-3, -2e-4, 3e-4, 5e-4, 0.0, -1e-4);
        let full = elastic_stress(&eps, 0.0, 1.0, &p).unwrap();
        let half = elastic_stress(&eps, 0.5, 1.0, &p).unwrap();
        assert!((half - full * 0.5).norm() < 1e-12);
        assert!(matches!(elastic_stress(&eps, 1.0, 1.0, &p), Err(Error::SaturatedDamage { .. })));

        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let n = elastic_stress(&eps, i as f64 / 100.0, 1.0, &p).unwrap().norm();
            assert!(n < prev);
            prev = n;
        }
    }

    #[test]
    fn energy_release_rate() {
        let p = al2024();
        assert_eq!(energy_release_y(&SymTensor::ZERO, 1.0, &p), 0.0);
        let eps = SymTensor::diag(0.001, -0.0003, -0.0003);
        assert_eq!(energy_release_y(&eps, 0.0, &p), 0.0);
        assert!((energy_release_y(&eps, 1.0, &p) - 0.035575).abs() < 5e-7);
    }

    #[test]
    fn yield_function_cases() {
        let p = al2024();
        let f = yield_function_f(&SymTensor::ZERO, 0.0, 0.0, &p).unwrap();
        assert!(f < 0.0);
        // Zero stress sits at the conventional (η, θ0) = (0, 1).
        assert_relative_eq!(f, -yield_stress(0.0, 0.0, 1.0, &p).unwrap(), max_relative = 1e-14);

        let off = MaterialParams::uncorrected();
        let sb = hardening(0.1, &off).unwrap().0;
        let f = yield_function_f(&SymTensor::diag(sb, 0.0, 0.0), 0.1, 0.0, &off).unwrap();
        assert!(f.abs() < 1e-12);

        let sy = hardening(0.1, &off).unwrap().0;
        let f = yield_function_f(&SymTensor::diag(0.9 * sy, 0.0, 0.0), 0.1, 0.19, &off).unwrap();
        assert!(f.abs() < 1e-10);
    }

    #[test]
    fn damage_potential_cases() {
        let p = al2024();
        let hi_y0 = MaterialParams { y0: 1.0, ..al2024() };
        assert_eq!(damage_potential_rate(0.5, 0.0, 1.0, &hi_y0).unwrap(), 0.0);
        assert_relative_eq!(damage_potential_rate(p.gamma, 0.0, 1.0, &p).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(damage_potential_rate(2.0 * p.gamma, 0.5, 1.0, &p).unwrap(), 8.0, max_relative = 1e-14);
        assert_eq!(damage_potential_rate(3.0, 0.1, 1.0, &MaterialParams::classical()).unwrap(), 0.0);
        assert!(damage_potential_rate(1.0, 1.0, 1.0, &p).is_err());
    }

    #[test]
    fn df_dd_against_difference() {
        let p = al2024();
        let sigma = SymTensor::new(400.0, 120.0, -30.0, 80.0, 20.0, -60.0);
        let h = h_of_stress(&sigma, &p);
        let seq = stress_state(&sigma).sigma_eq;
        assert_relative_eq!(df_dd(&sigma, 0.0, &p).unwrap(), h * seq / 2.0, max_relative = 1e-14);
        let zero_h = MaterialParams { d_theta_s: -1.0, ..al2024() };
        let shear = SymTensor::new(0.0, 0.0, 0.0, 100.0, 0.0, 0.0);
        assert!(df_dd(&shear, 0.3, &zero_h).unwrap().abs() < 1e-12);

        let d = 0.2;
        let step = 1e-6;
        let fd = (yield_function_f(&sigma, 0.1, d + step, &p).unwrap()
            - yield_function_f(&sigma, 0.1, d - step, &p).unwrap())
            / (2.0 * step);
        assert_relative_eq!(df_dd(&sigma, d, &p).unwrap(), fd, max_relative = 1e-6);
    }

    #[test]
    fn df_debar_against_difference() {
        let off = MaterialParams::uncorrected();
        let e = 0.2;
        assert_relative_eq!(
            df_debar(e, 0.1, 0.5, &off).unwrap(),
            -off.n * off.b * e.powf(off.n - 1.0),
            max_relative = 1e-14
        );
        let p = al2024();
        let (eta, t0) = (0.6, -0.4);
        let step = 1e-6;
        let fd = -(yield_stress(e + step, eta, t0, &p).unwrap() - yield_stress(e - step, eta, t0, &p).unwrap())
            / (2.0 * step);
        assert_relative_eq!(df_debar(e, eta, t0, &p).unwrap(), fd, max_relative = 1e-6);

        for i in 0..20 {
            for j in 0..=10 {
                let eta = -1.0 + i as f64 * (p.eta0 + 1.0 / p.c_eta + 1.0) / 20.0;
                let t0 = -1.0 + 0.2 * j as f64;
                assert!(df_debar(0.05 + 0.05 * j as f64, eta, t0, &p).unwrap() <= 0.0);
            }
        }
    }

    #[test]
    fn flow_direction_reductions() {
        let off = MaterialParams::uncorrected();
        let sigma = SymTensor::new(300.0, -50.0, 20.0, 70.0, -10.0, 30.0);
        let n = df_dsigma(&sigma, 0.1, 0.0, &off).unwrap();
        let vm = tensors::dseq_dsigma(&sigma).unwrap();
        assert!((n - vm).norm() < 1e-14);

        let p = al2024();
        let uni = SymTensor::diag(500.0, 0.0, 0.0);
        let n = df_dsigma(&uni, 0.1, 0.05, &p).unwrap();
        assert!(n.is_finite());
        assert!(n.trace().abs() < 1e-12);
        assert!(df_dsigma(&SymTensor::ZERO, 0.1, 0.0, &p).is_err());
    }
}
