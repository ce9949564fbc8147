//! Symmetric second-order tensors, stress invariants and Lode-angle geometry.
//!
//! Components are stored in the order `(11, 22, 33, 12, 23, 13)` as true
//! tensor components. Shear entries are NOT doubled engineering strains, so
//! the double contraction weights them by two explicitly.

use std::f64::consts::{FRAC_PI_3, PI};
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contraction weights for the stored components.
pub const VOIGT_WEIGHTS: [f64; 6] = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0];

/// Guard on `|sin 3θ|` below which the raw Lode gradient is considered singular.
pub const LODE_SINGULARITY_GUARD: f64 = 1e-6;

const AXIAL_SNAP: f64 = 1e-14;

/// Relative threshold on the equivalent stress below which a tensor is treated
/// as having no deviatoric part.
const DEGENERATE_RELATIVE: f64 = 1e-12;

/// Symmetric second-order tensor `(t11, t22, t33, t12, t23, t13)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymTensor(pub [f64; 6]);

impl SymTensor {
    pub const ZERO: SymTensor = SymTensor([0.0; 6]);
    pub const IDENTITY: SymTensor = SymTensor([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);

    pub fn new(t11: f64, t22: f64, t33: f64, t12: f64, t23: f64, t13: f64) -> Self {
        SymTensor([t11, t22, t33, t12, t23, t13])
    }

    pub fn diag(t11: f64, t22: f64, t33: f64) -> Self {
        SymTensor([t11, t22, t33, 0.0, 0.0, 0.0])
    }

    pub fn components(&self) -> [f64; 6] {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    /// Deviatoric part `a - tr(a)/3 · 1`.
    pub fn deviator(&self) -> SymTensor {
        let m = self.trace() / 3.0;
        let mut d = *self;
        d.0[0] -= m;
        d.0[1] -= m;
        d.0[2] -= m;
        d
    }

    /// Double contraction `a : b`.
    pub fn ddot(&self, other: &SymTensor) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .zip(VOIGT_WEIGHTS.iter())
            .map(|((a, b), w)| w * a * b)
            .sum()
    }

    /// Frobenius norm `sqrt(a : a)`.
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn det(&self) -> f64 {
        let [a11, a22, a33, a12, a23, a13] = self.0;
        a11 * (a22 * a33 - a23 * a23) - a12 * (a12 * a33 - a23 * a13) + a13 * (a12 * a23 - a22 * a13)
    }

    /// Matrix square `a · a`, which stays symmetric.
    pub fn square(&self) -> SymTensor {
        let [a11, a22, a33, a12, a23, a13] = self.0;
        SymTensor([
            a11 * a11 + a12 * a12 + a13 * a13,
            a12 * a12 + a22 * a22 + a23 * a23,
            a13 * a13 + a23 * a23 + a33 * a33,
            a11 * a12 + a12 * a22 + a13 * a23,
            a12 * a13 + a22 * a23 + a23 * a33,
            a11 * a13 + a12 * a23 + a13 * a33,
        ])
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let [a11, a22, a33, a12, a23, a13] = self.0;
        Matrix3::new(a11, a12, a13, a12, a22, a23, a13, a23, a33)
    }

    /// Builds a tensor from the symmetric part of `m`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        SymTensor([
            m[(0, 0)],
            m[(1, 1)],
            m[(2, 2)],
            0.5 * (m[(0, 1)] + m[(1, 0)]),
            0.5 * (m[(1, 2)] + m[(2, 1)]),
            0.5 * (m[(0, 2)] + m[(2, 0)]),
        ])
    }

    /// Returns `Qᵀ a Q`.
    pub fn rotated(&self, q: &Matrix3<f64>) -> SymTensor {
        SymTensor::from_matrix(&(q.transpose() * self.to_matrix() * q))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let eig = SymmetricEigen::new(self.to_matrix());
        let mut v = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Index<usize> for SymTensor {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for SymTensor {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for SymTensor {
    type Output = SymTensor;
    fn add(mut self, rhs: SymTensor) -> SymTensor {
        self += rhs;
        self
    }
}

impl AddAssign for SymTensor {
    fn add_assign(&mut self, rhs: SymTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for SymTensor {
    type Output = SymTensor;
    fn sub(mut self, rhs: SymTensor) -> SymTensor {
        self -= rhs;
        self
    }
}

impl SubAssign for SymTensor {
    fn sub_assign(&mut self, rhs: SymTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
    }
}

impl Mul<f64> for SymTensor {
    type Output = SymTensor;
    fn mul(self, k: f64) -> SymTensor {
        SymTensor(self.0.map(|a| a * k))
    }
}

impl Mul<SymTensor> for f64 {
    type Output = SymTensor;
    fn mul(self, t: SymTensor) -> SymTensor {
        t * self
    }
}

impl Neg for SymTensor {
    type Output = SymTensor;
    fn neg(self) -> SymTensor {
        self * -1.0
    }
}

/// Scalar descriptors of a stress tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressState {
    pub sigma_m: f64,
    pub sigma_eq: f64,
    pub r: f64,
    /// Stress triaxiality.
    pub eta: f64,
    /// Normalized third deviatoric invariant, `cos 3θ`.
    pub chi: f64,
    /// Lode angle in `[0, π/3]`.
    pub theta: f64,
    /// Lode angle parameter in `[-1, 1]`: 1 tension, 0 shear, -1 compression.
    pub theta0: f64,
    /// Set when the tensor has no deviatoric part and the angular fields are
    /// the conventional defaults.
    pub degenerate: bool,
}

/// `(I1, J2, J3)`.
pub fn invariants(sigma: &SymTensor) -> (f64, f64, f64) {
    let s = sigma.deviator();
    (sigma.trace(), 0.5 * s.ddot(&s), s.det())
}

/// `(σm, σeq, r)` with `r` the real (sign-preserving) cube root of `27 J3 / 2`.
pub fn derived_quantities(sigma: &SymTensor) -> (f64, f64, f64) {
    let (i1, j2, j3) = invariants(sigma);
    (i1 / 3.0, (3.0 * j2).sqrt(), (13.5 * j3).cbrt())
}

fn is_degenerate(sigma: &SymTensor, sigma_eq: f64) -> bool {
    sigma_eq <= DEGENERATE_RELATIVE * sigma.norm() || sigma_eq == 0.0
}

pub fn stress_state(sigma: &SymTensor) -> StressState {
    let (i1, j2, j3) = invariants(sigma);
    let sigma_m = i1 / 3.0;
    let sigma_eq = (3.0 * j2).sqrt();
    let r = (13.5 * j3).cbrt();
    if is_degenerate(sigma, sigma_eq) {
        return StressState {
            sigma_m,
            sigma_eq,
            r,
            eta: 0.0,
            chi: 1.0,
            theta: 0.0,
            theta0: 1.0,
            degenerate: true,
        };
    }
    // (r/σeq)³ evaluated without the round trip through the cube root.
    let mut chi = (13.5 * j3 / (sigma_eq * sigma_eq * sigma_eq)).clamp(-1.0, 1.0);
    // Rounding leaves axisymmetric states a few ulps inside ±1, which acos
    // amplifies to ~1e-8 rad; snap them onto the meridian.
    if 1.0 - chi.abs() < AXIAL_SNAP {
        chi = chi.signum();
    }
    let theta = chi.acos() / 3.0;
    StressState {
        sigma_m,
        sigma_eq,
        r,
        eta: sigma_m / sigma_eq,
        chi,
        theta,
        theta0: lode_parameter(theta),
        degenerate: false,
    }
}

/// Lode angle parameter `θ0 = 1 - 6θ/π`.
pub fn lode_parameter(theta: f64) -> f64 {
    1.0 - 6.0 * theta / PI
}

/// Inverse of [`lode_parameter`].
pub fn lode_angle(theta0: f64) -> f64 {
    (1.0 - theta0) * PI / 6.0
}

/// Principal stresses (descending) of a state with unit equivalent stress and
/// the given triaxiality and Lode angle parameter.
pub fn principal_direction(eta: f64, theta0: f64) -> [f64; 3] {
    let theta = lode_angle(theta0);
    let two_thirds = 2.0 / 3.0;
    [
        eta + two_thirds * theta.cos(),
        eta + two_thirds * (2.0 * FRAC_PI_3 - theta).cos(),
        eta + two_thirds * (2.0 * FRAC_PI_3 + theta).cos(),
    ]
}

fn require_deviator(sigma: &SymTensor) -> Result<(SymTensor, f64)> {
    let s = sigma.deviator();
    let sigma_eq = (1.5 * s.ddot(&s)).sqrt();
    if is_degenerate(sigma, sigma_eq) {
        return Err(Error::DegenerateStress { sigma_eq });
    }
    Ok((s, sigma_eq))
}

/// `∂σeq/∂σ = 3/2 · s/σeq`.
pub fn dseq_dsigma(sigma: &SymTensor) -> Result<SymTensor> {
    let (s, sigma_eq) = require_deviator(sigma)?;
    Ok(s * (1.5 / sigma_eq))
}

/// Deviatoric part of the triaxiality gradient, `-3η/(2σeq²) · s`.
pub fn deta_dsigma(sigma: &SymTensor) -> Result<SymTensor> {
    let (s, sigma_eq) = require_deviator(sigma)?;
    let eta = sigma.trace() / (3.0 * sigma_eq);
    Ok(s * (-1.5 * eta / (sigma_eq * sigma_eq)))
}

/// Full triaxiality gradient including the hydrostatic part `1/(3σeq) · 1`.
pub fn deta_dsigma_full(sigma: &SymTensor) -> Result<SymTensor> {
    let (_, sigma_eq) = require_deviator(sigma)?;
    Ok(deta_dsigma(sigma)? + SymTensor::IDENTITY * (1.0 / (3.0 * sigma_eq)))
}

/// Gradient of the Lode angle parameter.
///
/// Assembled by the chain rule through `χ = 27 J3 / (2 σeq³)`, `θ = arccos(χ)/3`
/// and `θ0 = 1 - 6θ/π`:
///
/// ```text
/// ∂θ0/∂σ = 9/(π σeq sin 3θ) · [ 3/σeq² · (s·s - 2/3 J2 1) - cos 3θ/σeq · s ]
/// ```
///
/// Fails when `|sin 3θ| <= LODE_SINGULARITY_GUARD`; callers that only need the
/// product with the smoothing factor should use [`smoothed_lode_gradient`].
pub fn dtheta0_dsigma(sigma: &SymTensor) -> Result<SymTensor> {
    let (s, sigma_eq) = require_deviator(sigma)?;
    let state = stress_state(sigma);
    let sin3 = (3.0 * state.theta).sin();
    if sin3.abs() <= LODE_SINGULARITY_GUARD {
        return Err(Error::LodeSingular { sin_3theta: sin3 });
    }
    Ok(lode_gradient_unchecked(&s, sigma_eq, state.chi, sin3))
}

fn lode_gradient_unchecked(s: &SymTensor, sigma_eq: f64, chi: f64, sin3: f64) -> SymTensor {
    let j2 = 0.5 * s.ddot(s);
    let dj3 = s.square() - SymTensor::IDENTITY * (2.0 / 3.0 * j2);
    let bracket = dj3 * (3.0 / (sigma_eq * sigma_eq)) - *s * (chi / sigma_eq);
    bracket * (9.0 / (PI * sigma_eq * sin3))
}

/// `[1 - (θ0²)^m] · ∂θ0/∂σ`.
///
/// The smoothing factor and `sin 3θ` vanish together on the meridians
/// `θ0 = ±1`, with ratio tending to `4m/π`. Inside the singularity guard the
/// ratio is replaced by that limit, so the product stays smooth across the
/// meridian instead of jumping to zero slope.
pub fn smoothed_lode_gradient(sigma: &SymTensor, m: u32) -> Result<SymTensor> {
    let (s, sigma_eq) = require_deviator(sigma)?;
    let state = stress_state(sigma);
    let sin3 = (3.0 * state.theta).sin();
    let ratio = if sin3.abs() <= LODE_SINGULARITY_GUARD {
        4.0 * m as f64 / PI
    } else {
        (1.0 - (state.theta0 * state.theta0).powi(m as i32)) / sin3
    };
    Ok(lode_gradient_unchecked(&s, sigma_eq, state.chi, 1.0) * ratio)
}
