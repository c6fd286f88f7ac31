//! Physical configuration and the closed-form small parameters built from it.
//!
//! Units: the natural linewidth is the unit of frequency (Γ = 1) and 1/Γ the
//! unit of time. The atomic mass and the probe wavenumber never appear on their
//! own; they enter only through the recoil frequency ω_R = ħk²/2m, and the
//! oscillator length only through the squared Lamb-Dicke parameter
//! η² = k²l² = ω_R/ω_ho.
//!
//! The thermal state of each trap is described either by its mean occupation
//! n̄ or by θ = ħω_ho/k_BT, related through n̄ = 1/(e^θ − 1).
//!
//! # Thermal velocity convention
//!
//! The classical Doppler parameter ξ_cl = 2 k v_rms/|γ| is evaluated with the
//! per-axis rms velocity, v_rms² = k_BT/m. This is the only reading under which
//! it coincides with the θ → 0 limit of the thermal trap parameter:
//!
//! ```text
//! ξ² = coth(θ/2) ζ² → (2/θ) · 4 ω_R ω_ho / |γ|² = 4 k² (k_BT/m) / |γ|²
//! ```
//!
//! A three-dimensional ⟨v²⟩ = 3k_BT/m would make ξ_cl² three times larger than
//! the quantity that actually controls the visibility.

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::Real;

/// Trap frequencies at or above this value (in units of Γ) are outside the
/// shallow-trap regime the asymptotic formulas assume.
pub const SHALLOW_TRAP_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("trap frequency omega_ho must be positive and finite, got {0}")]
    TrapFrequency(f64),
    #[error("recoil frequency omega_R must be non-negative and finite, got {0}")]
    RecoilFrequency(f64),
    #[error("geometry cosine mu must lie in [-1, 1], got {0}")]
    GeometryCosine(f64),
    #[error("mean occupation nbar must be non-negative and finite, got {0}")]
    Occupation(f64),
    #[error("scaled inverse temperature theta must be positive, got {0}")]
    InverseTemperature(f64),
    #[error("detuning delta must be finite, got {0}")]
    Detuning(f64),
    #[error(
        "requested thermal trap parameter xi^2 = {requested} is below its zero-temperature floor zeta^2 = {floor}"
    )]
    BelowZeroPointFloor { requested: f64, floor: f64 },
}

/// Thermal state of the (identical, isotropic) traps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Thermal<T> {
    /// Mean phonon number n̄ ≥ 0. `Occupation(0)` is the ground state.
    Occupation(T),
    /// θ = βħω_ho > 0.
    InverseTemperature(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysParams<T> {
    /// Probe detuning δ = ω_in − ω₀.
    pub delta: T,
    /// Trap frequency ω_ho.
    pub omega_ho: T,
    /// Recoil frequency ω_R.
    pub omega_r: T,
    pub thermal: Thermal<T>,
    /// μ = n̂·k̂_in, cosine between the inter-atomic axis and the probe.
    pub mu: T,
}

impl<T: Real> PhysParams<T> {
    pub fn new(
        delta: T,
        omega_ho: T,
        omega_r: T,
        thermal: Thermal<T>,
        mu: T,
    ) -> Result<Self, ParamError> {
        let p = Self {
            delta,
            omega_ho,
            omega_r,
            thermal,
            mu,
        };
        p.validate()?;
        Ok(p)
    }

    /// Ground-state traps (n̄ = 0).
    pub fn zero_temperature(delta: T, omega_ho: T, omega_r: T, mu: T) -> Result<Self, ParamError> {
        Self::new(delta, omega_ho, omega_r, Thermal::Occupation(T::zero()), mu)
    }

    /// Builds parameters whose thermal trap parameter ξ² = coth(θ/2)ζ² equals
    /// `xi_sq`, holding δ, ω_ho, ω_R and μ fixed and solving for n̄.
    pub fn with_thermal_trap_parameter(
        delta: T,
        omega_ho: T,
        omega_r: T,
        mu: T,
        xi_sq: T,
    ) -> Result<Self, ParamError> {
        let ground = Self::zero_temperature(delta, omega_ho, omega_r, mu)?;
        let zeta_sq = ground.zeta_sq();
        if !(xi_sq >= zeta_sq) || !xi_sq.is_finite() {
            return Err(ParamError::BelowZeroPointFloor {
                requested: xi_sq.to_f64_lossy(),
                floor: zeta_sq.to_f64_lossy(),
            });
        }
        // coth(θ/2) = 2n̄ + 1
        let nbar = (xi_sq / zeta_sq - T::one()) / T::lit(2.0);
        Self::new(delta, omega_ho, omega_r, Thermal::Occupation(nbar), mu)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let f = |x: T| x.to_f64_lossy();
        if !self.delta.is_finite() {
            return Err(ParamError::Detuning(f(self.delta)));
        }
        if !(self.omega_ho > T::zero()) || !self.omega_ho.is_finite() {
            return Err(ParamError::TrapFrequency(f(self.omega_ho)));
        }
        if !(self.omega_r >= T::zero()) || !self.omega_r.is_finite() {
            return Err(ParamError::RecoilFrequency(f(self.omega_r)));
        }
        if !(self.mu.abs() <= T::one()) {
            return Err(ParamError::GeometryCosine(f(self.mu)));
        }
        match self.thermal {
            Thermal::Occupation(n) if !(n >= T::zero()) || !n.is_finite() => {
                Err(ParamError::Occupation(f(n)))
            }
            Thermal::InverseTemperature(th) if !(th > T::zero()) => {
                Err(ParamError::InverseTemperature(f(th)))
            }
            _ => Ok(()),
        }
    }

    /// Mean occupation n̄ of each oscillator mode.
    pub fn nbar(&self) -> T {
        match self.thermal {
            Thermal::Occupation(n) => n,
            Thermal::InverseTemperature(th) => T::one() / th.exp_m1(),
        }
    }

    /// θ = βħω_ho; infinite for the ground state.
    pub fn theta(&self) -> T {
        match self.thermal {
            Thermal::InverseTemperature(th) => th,
            Thermal::Occupation(n) if n == T::zero() => T::infinity(),
            Thermal::Occupation(n) => (T::one() / n).ln_1p(),
        }
    }

    /// coth(θ/2) = 2n̄ + 1.
    pub fn coth_half_theta(&self) -> T {
        T::lit(2.0) * self.nbar() + T::one()
    }

    /// Complex detuning γ = δ + i/2.
    pub fn gamma(&self) -> Complex<T> {
        Complex::new(self.delta, T::lit(0.5))
    }

    /// |γ|² = δ² + 1/4.
    pub fn gamma_sq(&self) -> T {
        self.delta * self.delta + T::lit(0.25)
    }

    /// Squared Lamb-Dicke parameter η² = ω_R/ω_ho.
    pub fn eta_sq(&self) -> T {
        self.omega_r / self.omega_ho
    }

    /// ζ² = 4 ω_R ω_ho / |γ|².
    pub fn zeta_sq(&self) -> T {
        T::lit(4.0) * self.omega_r * self.omega_ho / self.gamma_sq()
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.nbar() == T::zero()
    }

    pub fn regime(&self) -> RegimeFlags {
        let d = derive(self).expect("validated parameters");
        let theta = self.theta();
        RegimeFlags {
            shallow_trap: self.omega_ho < T::lit(SHALLOW_TRAP_LIMIT),
            small_chi: d.chi <= T::lit(0.05),
            small_zeta: d.zeta_sq.sqrt() <= T::lit(0.05),
            small_xi: d.xi_cl_sq <= T::lit(0.1),
            classical_motion: theta <= T::lit(0.1),
            recoil_negligible: d.xi_cl_sq > T::zero() && d.chi / d.xi_cl_sq <= T::lit(0.01),
        }
    }
}

impl PhysParams<f64> {
    /// Convenience constructor with plain `f64` values and an occupation.
    pub fn from_occupation(
        delta: f64,
        omega_ho: f64,
        omega_r: f64,
        nbar: f64,
        mu: f64,
    ) -> Result<Self, ParamError> {
        Self::new(delta, omega_ho, omega_r, Thermal::Occupation(nbar), mu)
    }
}

/// Where a parameter point sits relative to the expansions' validity ranges.
///
/// Flags annotate results; nothing refuses to compute outside these ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeFlags {
    /// ω_ho < 0.1 Γ.
    pub shallow_trap: bool,
    /// χ ≤ 0.05.
    pub small_chi: bool,
    /// ζ ≤ 0.05.
    pub small_zeta: bool,
    /// ξ_cl² ≤ 0.1, where V² ≈ 1 − 2ξ_cl² applies.
    pub small_xi: bool,
    /// θ ≤ 0.1, the classical (highly excited) trap limit.
    pub classical_motion: bool,
    /// χ/ξ_cl² ≤ 0.01: the free-recoil contribution is negligible at finite T.
    pub recoil_negligible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams<T> {
    /// |γ|².
    pub gamma_sq: T,
    /// χ = ω_R/|γ|.
    pub chi: T,
    /// ζ² = 4 ω_R ω_ho/|γ|².
    pub zeta_sq: T,
    /// ξ² = coth(θ/2) ζ².
    pub xi_sq: T,
    /// ξ_cl² = 2ζ²/θ, the classical thermal Doppler parameter.
    pub xi_cl_sq: T,
    /// η² = ω_R/ω_ho.
    pub eta_sq: T,
    /// ρ = 4 μ (δ/|γ|) χ, the a-priori path imbalance from recoil.
    pub rho: T,
}

/// Evaluates the closed-form small parameters.
pub fn derive<T: Real>(p: &PhysParams<T>) -> Result<DerivedParams<T>, ParamError> {
    p.validate()?;
    let gamma_sq = p.gamma_sq();
    let gamma_abs = gamma_sq.sqrt();
    let chi = p.omega_r / gamma_abs;
    let zeta_sq = p.zeta_sq();
    let theta = p.theta();
    let xi_cl_sq = if theta.is_infinite() {
        T::zero()
    } else {
        T::lit(2.0) * zeta_sq / theta
    };
    Ok(DerivedParams {
        gamma_sq,
        chi,
        zeta_sq,
        xi_sq: p.coth_half_theta() * zeta_sq,
        xi_cl_sq,
        eta_sq: p.eta_sq(),
        rho: T::lit(4.0) * p.mu * (p.delta / gamma_abs) * chi,
    })
}

/// Resonant cross section relative to its peak, σ(δ)/σ₀ = 1/(1 + 4δ²).
pub fn cross_section_ratio<T: Real>(delta: T) -> T {
    T::one() / (T::one() + T::lit(4.0) * delta * delta)
}

/// Recoil displacement of the first scatterer during the double-scattering
/// time 2/|γ|, in units of the oscillator length: Δx/l_ho = 2ζ.
pub fn recoil_displacement_ratio<T: Real>(p: &PhysParams<T>) -> T {
    T::lit(2.0) * p.zeta_sq().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(delta: f64, omega_ho: f64, omega_r: f64, nbar: f64, mu: f64) -> PhysParams<f64> {
        PhysParams::from_occupation(delta, omega_ho, omega_r, nbar, mu).unwrap()
    }

    #[test]
    fn chi_at_resonance() {
        let d = derive(&p(0.0, 1e-4, 0.001, 3.0, 0.3)).unwrap();
        assert_relative_eq!(d.chi, 0.002, max_relative = 1e-14);
    }

    #[test]
    fn no_recoil_means_no_small_parameters() {
        let d = derive(&p(0.7, 1e-3, 0.0, 5.0, 1.0)).unwrap();
        assert_eq!(d.chi, 0.0);
        assert_eq!(d.zeta_sq, 0.0);
        assert_eq!(d.xi_sq, 0.0);
        assert_eq!(d.rho, 0.0);
    }

    #[test]
    fn ground_state_xi_equals_zeta() {
        let d = derive(&p(0.3, 1e-3, 0.02, 0.0, 0.0)).unwrap();
        assert_eq!(d.xi_sq, d.zeta_sq);
        assert_eq!(d.xi_cl_sq, 0.0);
        let q = PhysParams::new(0.3, 1e-3, 0.02, Thermal::InverseTemperature(60.0), 0.0).unwrap();
        let dq = derive(&q).unwrap();
        assert_relative_eq!(dq.xi_sq, d.zeta_sq, max_relative = 1e-15);
    }

    #[test]
    fn classical_limit_of_xi() {
        for theta in [1e-2, 1e-3, 1e-4] {
            let q = PhysParams::new(0.5, 1e-4, 1e-3, Thermal::InverseTemperature(theta), 0.0).unwrap();
            let d = derive(&q).unwrap();
            // coth(θ/2) = 2/θ + θ/6 + O(θ³)
            assert_relative_eq!(d.xi_sq / d.xi_cl_sq, 1.0 + theta * theta / 12.0, max_relative = 1e-9);
            assert!(d.xi_sq >= d.zeta_sq);
        }
    }

    #[test]
    fn occupation_and_theta_agree() {
        let q = PhysParams::new(0.0, 1e-3, 1e-3, Thermal::InverseTemperature(0.37), 0.0).unwrap();
        let r = p(0.0, 1e-3, 1e-3, q.nbar(), 0.0);
        assert_relative_eq!(r.theta(), 0.37, max_relative = 1e-13);
        assert_relative_eq!(r.coth_half_theta(), 1.0 / (0.37f64 / 2.0).tanh(), max_relative = 1e-13);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(matches!(
            PhysParams::from_occupation(0.0, 0.0, 1e-3, 0.0, 0.0),
            Err(ParamError::TrapFrequency(_))
        ));
        assert!(matches!(
            PhysParams::from_occupation(0.0, 1e-3, -1e-3, 0.0, 0.0),
            Err(ParamError::RecoilFrequency(_))
        ));
        assert!(matches!(
            PhysParams::from_occupation(0.0, 1e-3, 1e-3, -0.5, 0.0),
            Err(ParamError::Occupation(_))
        ));
        assert!(matches!(
            PhysParams::from_occupation(0.0, 1e-3, 1e-3, 0.0, 1.01),
            Err(ParamError::GeometryCosine(_))
        ));
        assert!(matches!(
            PhysParams::new(0.0, 1e-3, 1e-3, Thermal::InverseTemperature(0.0), 0.0),
            Err(ParamError::InverseTemperature(_))
        ));
        let mut bad = p(0.0, 1e-3, 1e-3, 0.0, 0.0);
        bad.omega_ho = -1.0;
        assert!(derive(&bad).is_err());
    }

    #[test]
    fn cross_section_values() {
        assert_eq!(cross_section_ratio(0.0), 1.0);
        assert_relative_eq!(cross_section_ratio(0.5), 0.5);
        assert!(cross_section_ratio(1e8) < 1e-16);
    }

    #[test]
    fn recoil_displacement_values() {
        assert_eq!(recoil_displacement_ratio(&p(0.0, 1e-3, 0.0, 0.0, 0.0)), 0.0);
        let r = recoil_displacement_ratio(&p(0.0, 0.001, 0.01, 0.0, 0.0));
        assert_relative_eq!(r, 2.0 * (4.0 * 0.01 * 0.001 / 0.25f64).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(r, 0.025298, max_relative = 1e-4);
        let r4 = recoil_displacement_ratio(&p(0.0, 0.004, 0.01, 0.0, 0.0));
        assert_relative_eq!(r4, 2.0 * r, max_relative = 1e-14);
    }

    #[test]
    fn rho_parities_and_cross_section_identity() {
        for &(delta, mu, wr) in &[(0.3, 0.7, 1e-3), (1.2, -0.4, 2e-2), (0.05, 1.0, 5e-3)] {
            let a = derive(&p(delta, 1e-4, wr, 0.0, mu)).unwrap().rho;
            let b = derive(&p(delta, 1e-4, wr, 0.0, -mu)).unwrap().rho;
            let c = derive(&p(-delta, 1e-4, wr, 0.0, mu)).unwrap().rho;
            assert_eq!(a, -b);
            assert_eq!(a, -c);
            assert!(a.signum() == (mu * delta).signum());
            // |Δσ/σ| = Δω · 2|δ|/|γ|² with Δω = 2μω_R
            let q = p(delta, 1e-4, wr, 0.0, mu);
            let shift = 2.0 * mu.abs() * wr * 2.0 * delta.abs() / q.gamma_sq();
            assert_relative_eq!(shift, a.abs(), max_relative = 1e-14);
        }
    }

    #[test]
    fn back_solve_thermal_trap_parameter() {
        let q = PhysParams::with_thermal_trap_parameter(0.0, 1e-4, 1e-3, 0.0, 0.05).unwrap();
        let d = derive(&q).unwrap();
        assert_relative_eq!(d.xi_sq, 0.05, max_relative = 1e-12);
        assert_relative_eq!(d.xi_cl_sq, 0.05, max_relative = 1e-6);
        assert!(matches!(
            PhysParams::with_thermal_trap_parameter(0.0, 1e-4, 1e-3, 0.0, 1e-9),
            Err(ParamError::BelowZeroPointFloor { .. })
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let q = PhysParams::<f32>::new(0.0, 1e-3, 1e-3, Thermal::Occupation(2.0), 0.0).unwrap();
        let d = derive(&q).unwrap();
        assert!((d.chi - 0.002).abs() < 1e-7);
    }

    #[test]
    fn regime_flags() {
        let f = p(0.0, 0.2, 1e-3, 0.0, 0.0).regime();
        assert!(!f.shallow_trap);
        let q = PhysParams::with_thermal_trap_parameter(0.0, 1e-4, 1e-5, 0.0, 0.05).unwrap();
        let g = q.regime();
        assert!(g.shallow_trap && g.small_xi && g.classical_motion && g.recoil_negligible);
    }
}
