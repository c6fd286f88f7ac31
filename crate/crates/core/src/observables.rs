//! Visibility, predictability and distinguishability, from quadrature and from
//! the closed-form asymptotics.
//!
//! With I_A = ⟨T_A†T_A⟩, I_B = ⟨T_B†T_B⟩ and INT = ⟨T_A†T_B⟩ (all time
//! integrated):
//!
//! ```text
//! V = 2|INT| / (I_A + I_B),    P = |I_A − I_B| / (I_A + I_B)
//! ```
//!
//! The distinguishability is only available in closed form:
//! D² = ρ² + 2ζ² for ground-state traps and D = (2/√π)(|δ|/|γ|) ξ_cl in the
//! classical regime. The fock module checks the latter against a direct
//! trace-norm evaluation.

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::amplitudes::TraceIntegrand;
use crate::params::{derive, DerivedParams, ParamError, PhysParams, RegimeFlags};
use crate::quadrature::{integrate4d_vec, QuadError, QuadMethod, QuadResult, QuadratureSpec};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservableError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Which closed-form distinguishability applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Ground-state traps, D² = ρ² + 2ζ².
    ZeroT,
    /// Classical thermal motion, D = (2/√π)(|δ|/|γ|) ξ_cl.
    FiniteT,
}

impl Regime {
    pub fn for_params<T: Real>(p: &PhysParams<T>) -> Regime {
        if p.is_zero_temperature() {
            Regime::ZeroT
        } else {
            Regime::FiniteT
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

/// The three integrated traces at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct Traces<T> {
    pub i_a: QuadResult<T>,
    pub i_b: QuadResult<T>,
    pub interference: QuadResult<T>,
    /// Monte Carlo estimator covariance over
    /// (Re I_A, Im I_A, Re I_B, Im I_B, Re INT, Im INT), row-major 6 × 6.
    pub covariance: Option<Vec<T>>,
}

impl<T: Real> Traces<T> {
    pub fn converged(&self) -> bool {
        self.i_a.converged && self.i_b.converged && self.interference.converged
    }

    pub fn evaluations(&self) -> u64 {
        self.i_a.evaluations
    }

    fn parts(&self) -> (T, T, Complex<T>) {
        (self.i_a.value.re, self.i_b.value.re, self.interference.value)
    }

    /// Propagates either the estimator covariance (delta method) or, for the
    /// deterministic rules, the per-trace error estimates added linearly.
    fn propagate(&self, grad: [T; 6]) -> T {
        match &self.covariance {
            Some(cov) => {
                let mut var = T::zero();
                for a in 0..6 {
                    for b in 0..6 {
                        var += grad[a] * cov[a * 6 + b] * grad[b];
                    }
                }
                var.max(T::zero()).sqrt()
            }
            None => {
                let e = [
                    self.i_a.abs_error_estimate,
                    self.i_b.abs_error_estimate,
                    self.interference.abs_error_estimate,
                ];
                (0..3)
                    .map(|k| (grad[2 * k].abs() + grad[2 * k + 1].abs()) * e[k])
                    .fold(T::zero(), |a, b| a + b)
            }
        }
    }

    pub fn visibility(&self) -> Estimate<T> {
        let (a, b, x) = self.parts();
        let sum = a + b;
        let value = T::lit(2.0) * x.norm() / sum;
        let (gx_re, gx_im) = if x.norm() > T::zero() {
            (
                T::lit(2.0) * x.re / (x.norm() * sum),
                T::lit(2.0) * x.im / (x.norm() * sum),
            )
        } else {
            (T::lit(2.0) / sum, T::lit(2.0) / sum)
        };
        let g_ab = -value / sum;
        let error = self.propagate([g_ab, T::zero(), g_ab, T::zero(), gx_re, gx_im]);
        Estimate { value, error }
    }

    pub fn predictability(&self) -> Estimate<T> {
        let (a, b, _) = self.parts();
        let sum = a + b;
        let value = (a - b).abs() / sum;
        let sign = if a >= b { T::one() } else { -T::one() };
        let ga = sign / sum - value / sum;
        let gb = -sign / sum - value / sum;
        let error = self.propagate([ga, T::zero(), gb, T::zero(), T::zero(), T::zero()]);
        Estimate { value, error }
    }
}

/// Integrates I_A, I_B and INT on a shared set of nodes.
pub fn compute_traces<T: Real>(
    p: &PhysParams<T>,
    spec: &QuadratureSpec,
) -> Result<Traces<T>, ObservableError> {
    p.validate()?;
    let integrand = TraceIntegrand::new(p);
    let batch = integrate4d_vec(|x: &[T; 4]| integrand.eval_all(x), spec)?;
    let [i_a, i_b, interference] = batch.results;
    Ok(Traces {
        i_a,
        i_b,
        interference,
        covariance: batch.covariance,
    })
}

/// V = 2|INT|/(I_A + I_B) by quadrature.
pub fn visibility<T: Real>(
    p: &PhysParams<T>,
    spec: &QuadratureSpec,
) -> Result<Estimate<T>, ObservableError> {
    Ok(compute_traces(p, spec)?.visibility())
}

/// P = |I_A − I_B|/(I_A + I_B) by quadrature.
pub fn predictability<T: Real>(
    p: &PhysParams<T>,
    spec: &QuadratureSpec,
) -> Result<Estimate<T>, ObservableError> {
    Ok(compute_traces(p, spec)?.predictability())
}

fn derived<T: Real>(p: &PhysParams<T>) -> DerivedParams<T> {
    derive(p).expect("parameters are validated on construction")
}

/// Closed-form which-path distinguishability, clamped at 1 where the
/// expansion leaves its range.
pub fn distinguishability_analytic<T: Real>(p: &PhysParams<T>, regime: Regime) -> T {
    let d = derived(p);
    let value = match regime {
        Regime::ZeroT => (d.rho * d.rho + T::lit(2.0) * d.zeta_sq).sqrt(),
        Regime::FiniteT => {
            let ratio = p.delta.abs() / d.gamma_sq.sqrt();
            T::lit(2.0) / T::PI().sqrt() * ratio * d.xi_cl_sq.sqrt()
        }
    };
    value.min(T::one())
}

/// 1 − 2[1 − (2/π) δ²/|γ|²] ξ_cl², the classical-regime value of V² + D².
pub fn duality_sum_analytic<T: Real>(p: &PhysParams<T>) -> T {
    let d = derived(p);
    let bracket = T::one() - T::lit(2.0) / T::PI() * p.delta * p.delta / d.gamma_sq;
    T::one() - T::lit(2.0) * bracket * d.xi_cl_sq
}

/// Leading-order visibility: √(1 − ρ² − 2ζ²) or √(1 − 2ξ_cl²), clamped at 0.
pub fn visibility_asymptotic<T: Real>(p: &PhysParams<T>, regime: Regime) -> T {
    let d = derived(p);
    let v_sq = match regime {
        Regime::ZeroT => T::one() - d.rho * d.rho - T::lit(2.0) * d.zeta_sq,
        Regime::FiniteT => T::one() - T::lit(2.0) * d.xi_cl_sq,
    };
    v_sq.max(T::zero()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport<T> {
    #[serde(rename = "V")]
    pub visibility: T,
    #[serde(rename = "V_err")]
    pub visibility_err: T,
    #[serde(rename = "P")]
    pub predictability: T,
    #[serde(rename = "P_err")]
    pub predictability_err: T,
    #[serde(rename = "D_analytic")]
    pub distinguishability: T,
    pub regime: Regime,
    /// V² + D_analytic².
    pub duality_sum: T,
    pub duality_sum_err: T,
    pub duality_sum_analytic: T,
    #[serde(rename = "V_asymptotic")]
    pub visibility_asymptotic: T,
    #[serde(rename = "I_A")]
    pub i_a: T,
    #[serde(rename = "I_A_err")]
    pub i_a_err: T,
    #[serde(rename = "I_B")]
    pub i_b: T,
    #[serde(rename = "I_B_err")]
    pub i_b_err: T,
    #[serde(rename = "INT_re")]
    pub int_re: T,
    #[serde(rename = "INT_im")]
    pub int_im: T,
    #[serde(rename = "INT_err")]
    pub int_err: T,
    pub method: QuadMethod,
    pub evaluations: u64,
    pub converged: bool,
    pub flags: RegimeFlags,
    pub derived: DerivedParams<T>,
}

pub fn full_report<T: Real>(
    p: &PhysParams<T>,
    spec: &QuadratureSpec,
) -> Result<DualityReport<T>, ObservableError> {
    let traces = compute_traces(p, spec)?;
    Ok(report_from_traces(p, spec.method, &traces))
}

pub fn report_from_traces<T: Real>(
    p: &PhysParams<T>,
    method: QuadMethod,
    traces: &Traces<T>,
) -> DualityReport<T> {
    let regime = Regime::for_params(p);
    let v = traces.visibility();
    let pr = traces.predictability();
    let dist = distinguishability_analytic(p, regime);
    DualityReport {
        visibility: v.value,
        visibility_err: v.error,
        predictability: pr.value,
        predictability_err: pr.error,
        distinguishability: dist,
        regime,
        duality_sum: v.value * v.value + dist * dist,
        duality_sum_err: T::lit(2.0) * v.value * v.error,
        duality_sum_analytic: duality_sum_analytic(p),
        visibility_asymptotic: visibility_asymptotic(p, regime),
        i_a: traces.i_a.value.re,
        i_a_err: traces.i_a.abs_error_estimate,
        i_b: traces.i_b.value.re,
        i_b_err: traces.i_b.abs_error_estimate,
        int_re: traces.interference.value.re,
        int_im: traces.interference.value.im,
        int_err: traces.interference.abs_error_estimate,
        method,
        evaluations: traces.evaluations(),
        converged: traces.converged(),
        flags: p.regime(),
        derived: derived(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Thermal;
    use approx::assert_relative_eq;

    fn small_spec() -> QuadratureSpec {
        QuadratureSpec {
            order: 16,
            ..QuadratureSpec::default()
        }
    }

    #[test]
    fn no_recoil_is_fully_coherent() {
        let p = PhysParams::from_occupation(0.0, 1e-4, 0.0, 0.0, 0.0).unwrap();
        let r = full_report(&p, &small_spec()).unwrap();
        assert_eq!(r.visibility, 1.0);
        assert_eq!(r.predictability, 0.0);
        assert_eq!(r.distinguishability, 0.0);
        assert_eq!(r.duality_sum, 1.0);
        assert_relative_eq!(r.i_a, 16.0, max_relative = 1e-10);
    }

    #[test]
    fn zero_temperature_closed_forms() {
        // δ = 1/2, ω_R = 0.01, μ = 1: ρ = 4(1/√2)(0.01√2) = 0.04.
        let p = PhysParams::from_occupation(0.5, 0.01, 0.01, 0.0, 1.0).unwrap();
        let d = derive(&p).unwrap();
        assert_relative_eq!(d.rho, 0.04, max_relative = 1e-12);
        // ζ² = 4(0.01)(0.01)/0.5 = 0.0008.
        assert_relative_eq!(d.zeta_sq, 0.0008, max_relative = 1e-12);
        assert_relative_eq!(distinguishability_analytic(&p, Regime::ZeroT), 0.0565685, max_relative = 1e-5);
        assert_relative_eq!(visibility_asymptotic(&p, Regime::ZeroT), 0.998399, max_relative = 1e-5);
    }

    #[test]
    fn finite_temperature_closed_forms() {
        let p = PhysParams::<f64>::with_thermal_trap_parameter(0.5, 1e-4, 1e-3, 0.0, 0.01).unwrap();
        let d = distinguishability_analytic(&p, Regime::FiniteT);
        let xi_cl = derive(&p).unwrap().xi_cl_sq.sqrt();
        assert_relative_eq!(d / xi_cl * 0.1, 0.0797885, max_relative = 1e-5);

        let q = PhysParams::new(0.0, 1e-4, 1e-3, Thermal::InverseTemperature(0.01), 0.3).unwrap();
        assert_eq!(distinguishability_analytic(&q, Regime::FiniteT), 0.0);
        let xi_cl_sq = derive(&q).unwrap().xi_cl_sq;
        assert_relative_eq!(duality_sum_analytic(&q), 1.0 - 2.0 * xi_cl_sq, max_relative = 1e-14);
    }

    #[test]
    fn asymptotic_visibility_at_five_percent() {
        let p = PhysParams::<f64>::new(0.0, 1e-4, 1e-3, Thermal::InverseTemperature(1.0), 0.0).unwrap();
        let mut q = p;
        // ξ_cl² = 8 ω_R ω_ho / (θ|γ|²) = 0.05 → θ = 3.2e-5.
        q.thermal = Thermal::InverseTemperature(8.0 * 1e-3 * 1e-4 / 0.25 / 0.05);
        assert_relative_eq!(visibility_asymptotic(&q, Regime::FiniteT), 0.948683, max_relative = 1e-6);
        assert_eq!(visibility_asymptotic(&p, Regime::ZeroT), (1.0 - 2.0 * p.zeta_sq()).sqrt());
    }

    #[test]
    fn duality_bracket_range() {
        for delta in [0.0, 0.3, 1.0, 10.0, 1e4] {
            let p = PhysParams::with_thermal_trap_parameter(delta, 1e-4, 1e-3, 0.0, 0.1).unwrap();
            let xi_cl_sq = derive(&p).unwrap().xi_cl_sq;
            let bracket = (1.0 - duality_sum_analytic(&p)) / (2.0 * xi_cl_sq);
            assert!(bracket > 1.0 - 2.0 / std::f64::consts::PI && bracket <= 1.0);
        }
    }

    #[test]
    fn symmetric_geometry_has_no_predictability() {
        let p = PhysParams::from_occupation(0.7, 1e-3, 0.01, 0.5, 0.0).unwrap();
        let r = full_report(&p, &small_spec()).unwrap();
        assert!(r.predictability < 1e-14);
        assert!(r.visibility < 1.0 && r.visibility > 0.9);
    }

    #[test]
    fn mu_parity() {
        let spec = small_spec();
        let a = full_report(&PhysParams::from_occupation(0.4, 1e-3, 0.01, 0.2, 0.6).unwrap(), &spec).unwrap();
        let b = full_report(&PhysParams::from_occupation(0.4, 1e-3, 0.01, 0.2, -0.6).unwrap(), &spec).unwrap();
        assert_relative_eq!(a.visibility, b.visibility, max_relative = 1e-12);
        assert_relative_eq!(a.predictability, b.predictability, max_relative = 1e-10);
        assert_relative_eq!(a.i_a, b.i_b, max_relative = 1e-12);
    }

    #[test]
    fn monte_carlo_error_uses_covariance() {
        let p = PhysParams::from_occupation(0.3, 1e-3, 0.02, 1.0, 1.0).unwrap();
        let spec = QuadratureSpec {
            samples: 40_000,
            ..QuadratureSpec::with_method(QuadMethod::MonteCarlo)
        };
        let t = compute_traces(&p, &spec).unwrap();
        assert!(t.covariance.is_some());
        let v = t.visibility();
        assert!(v.error > 0.0 && v.error < 0.05);
        let exact = visibility(&p, &small_spec()).unwrap();
        assert!((v.value - exact.value).abs() < 5.0 * v.error);
    }
}
