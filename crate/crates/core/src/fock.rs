//! Brute-force checks in a truncated Fock space.
//!
//! Each atom's motion in the plane spanned by k̂_in and n̂ is two independent
//! oscillator modes. The oracle builds every displacement factor as an explicit
//! matrix, multiplies them in operator order and traces against a thermal
//! state, without using the Gaussian closed form at any point.
//!
//! Works in `f64` only.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::correlator::{Atom, EventList};
use crate::params::PhysParams;

/// Thermal weight beyond the cutoff that raises the truncation flag.
pub const THERMAL_TAIL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("Fock dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("mean occupation must be non-negative and finite, got {0}")]
    Occupation(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockOp {
    pub dim: usize,
    pub matrix: DMatrix<Complex64>,
    pub tag: String,
    /// Set when the cutoff is too small for the operator to be trusted.
    pub truncated: bool,
}

impl FockOp {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: DMatrix::identity(dim, dim),
            tag: "identity".into(),
            truncated: false,
        }
    }

    /// max |(U†U − I)_mn|.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.matrix.adjoint() * &self.matrix - DMatrix::<Complex64>::identity(self.dim, self.dim);
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// A value computed on a truncated space, with its truncation flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue<T> {
    pub value: T,
    pub dim: usize,
    pub truncated: bool,
}

fn check_dim(n: usize) -> Result<(), FockError> {
    if n < 2 {
        Err(FockError::Dimension(n))
    } else {
        Ok(())
    }
}

/// Annihilation operator a on the first N number states.
pub fn annihilation(n: usize) -> Result<FockOp, FockError> {
    check_dim(n)?;
    let mut m = DMatrix::zeros(n, n);
    for k in 1..n {
        m[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    Ok(FockOp {
        dim: n,
        matrix: m,
        tag: "a".into(),
        truncated: false,
    })
}

/// Dimensionless momentum quadrature i(a† − a)/√2.
pub fn momentum_quadrature(n: usize) -> Result<FockOp, FockError> {
    let a = annihilation(n)?.matrix;
    let m = (a.adjoint() - a) * Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    Ok(FockOp {
        dim: n,
        matrix: m,
        tag: "p".into(),
        truncated: false,
    })
}

/// ⟨m|D(c)|n⟩ for m ≥ n, normalized so the recurrence stays O(1):
/// √(n!/m!) c^{m−n} e^{−|c|²/2} L_n^{(m−n)}(|c|²).
fn displacement_lower(c: Complex64, x: f64, m: usize, n: usize) -> Complex64 {
    let alpha = (m - n) as f64;
    // g_k = √(k! α! / (k+α)!) L_k^{(α)}(x), which obeys a three-term
    // recurrence with O(1) coefficients.
    let (mut g0, mut g1) = (1.0, 0.0);
    if n >= 1 {
        g1 = (1.0 + alpha - x) / (1.0 + alpha).sqrt();
    }
    let mut g = if n == 0 { g0 } else { g1 };
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * g1 - (kf * (kf + alpha)).sqrt() * g0)
            / ((kf + 1.0) * (kf + 1.0 + alpha)).sqrt();
        g0 = g1;
        g1 = next;
        g = next;
    }
    if alpha == 0.0 {
        return Complex64::new(g * (-x / 2.0).exp(), 0.0);
    }
    let log_mag = alpha * c.norm().ln() - x / 2.0 - 0.5 * ln_gamma(alpha + 1.0);
    Complex64::from_polar(g * log_mag.exp(), alpha * c.arg())
}

/// Matrix of D(c) = exp(c a† − c* a) from the closed-form elements. Flagged
/// when |c|² > N.
pub fn displacement_matrix(c: Complex64, n: usize) -> Result<FockOp, FockError> {
    check_dim(n)?;
    let x = c.norm_sqr();
    let matrix = if c == Complex64::new(0.0, 0.0) {
        DMatrix::identity(n, n)
    } else {
        DMatrix::from_fn(n, n, |row, col| {
            if row >= col {
                displacement_lower(c, x, row, col)
            } else {
                displacement_lower(-c.conj(), x, col, row)
            }
        })
    };
    Ok(FockOp {
        dim: n,
        matrix,
        tag: format!("D({c})"),
        truncated: x > n as f64,
    })
}

/// Boltzmann populations (1 − r) rⁿ with r = n̄/(n̄ + 1), renormalized after
/// truncation. Flagged when the discarded weight r^N exceeds
/// [`THERMAL_TAIL_TOLERANCE`].
pub fn thermal_state(nbar: f64, n: usize) -> Result<FockOp, FockError> {
    check_dim(n)?;
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(FockError::Occupation(nbar));
    }
    let r = nbar / (nbar + 1.0);
    let weights: Vec<f64> = (0..n).map(|k| r.powi(k as i32)).collect();
    let total: f64 = weights.iter().sum();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(weights[i] / total, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(FockOp {
        dim: n,
        matrix,
        tag: format!("thermal(nbar={nbar})"),
        truncated: r.powi(n as i32) > THERMAL_TAIL_TOLERANCE,
    })
}

/// Sum of singular values.
pub fn trace_norm(x: &FockOp) -> f64 {
    x.matrix.singular_values().iter().sum()
}

/// Components of a wavevector on the two orthonormal axes of one atom's
/// motion plane, e₁ = k̂_in and e₂ = (n̂ − μk̂_in)/√(1 − μ²). The second axis
/// is absent when n̂ ∥ k̂_in.
fn mode_components(along_k: f64, along_n: f64, mu: f64) -> [Option<f64>; 2] {
    let s = (1.0 - mu * mu).max(0.0).sqrt();
    [Some(along_k + mu * along_n), (s > 0.0).then_some(along_n * s)]
}

/// Cutoff for a thermal state of occupation `nbar` pushed around by factors
/// whose displacement amplitudes add up to at most `max_shift`: the thermal
/// tail beyond the cutoff is below [`THERMAL_TAIL_TOLERANCE`] and the cutoff
/// clears the displaced distribution by eight standard deviations.
pub fn recommended_dim(nbar: f64, max_shift: f64) -> usize {
    let tail = if nbar > 0.0 {
        let r = nbar / (nbar + 1.0);
        (THERMAL_TAIL_TOLERANCE.ln() / r.ln()).ceil()
    } else {
        0.0
    };
    let reach = ((nbar + 0.5).sqrt() * 2.0 + max_shift + 8.0).powi(2);
    (40.0 * (nbar + 1.0)).max(tail).max(reach).ceil() as usize
}

/// Displacement arguments c = i (q·e) η e^{iω_ho t} of the factors acting on
/// one mode, in operator order.
fn mode_factors(events: &EventList<f64>, p: &PhysParams<f64>, atom: Atom, axis: usize) -> Vec<Complex64> {
    let eta = p.eta_sq().sqrt();
    events
        .iter()
        .filter(|e| e.atom == atom)
        .filter_map(|e| {
            let comp = mode_components(f64::from(e.q.along_k), f64::from(e.q.along_n), p.mu)[axis]?;
            (comp != 0.0).then(|| Complex64::from_polar(comp * eta, p.omega_ho * e.time) * Complex64::i())
        })
        .collect()
}

/// Largest displacement amplitude reached by any partial product of the
/// factors, taken from either end.
fn partial_shift(factors: &[Complex64]) -> f64 {
    let sweep = |it: &mut dyn Iterator<Item = &Complex64>| {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut max: f64 = 0.0;
        for c in it {
            acc += c;
            max = max.max(acc.norm());
        }
        max
    };
    sweep(&mut factors.iter()).max(sweep(&mut factors.iter().rev()))
}

/// [`recommended_dim`] for the most displaced mode of an event list.
pub fn oracle_dim(events: &EventList<f64>, p: &PhysParams<f64>) -> usize {
    let mut shift: f64 = 0.0;
    for atom in [Atom::One, Atom::Two] {
        for axis in 0..2 {
            shift = shift.max(partial_shift(&mode_factors(events, p, atom, axis)));
        }
    }
    recommended_dim(p.nbar(), shift)
}

/// Brute-force ⟨e^{X_1} ⋯ e^{X_N}⟩ on a cutoff of `dim` states per mode.
/// Neutrality is not required.
pub fn oracle_correlator(
    events: &EventList<f64>,
    p: &PhysParams<f64>,
    dim: usize,
) -> Result<OracleValue<Complex64>, FockError> {
    check_dim(dim)?;
    let rho = thermal_state(p.nbar(), dim)?;
    let mut truncated = rho.truncated;
    let mut value = Complex64::new(1.0, 0.0);
    for atom in [Atom::One, Atom::Two] {
        for axis in 0..2 {
            let factors = mode_factors(events, p, atom, axis);
            if factors.is_empty() {
                continue;
            }
            truncated |= recommended_dim(p.nbar(), partial_shift(&factors)) > dim;
            let mut product = DMatrix::<Complex64>::identity(dim, dim);
            for c in factors {
                let d = displacement_matrix(c, dim)?;
                truncated |= d.truncated;
                product = product * d.matrix;
            }
            value *= (&rho.matrix * product).trace();
        }
    }
    Ok(OracleValue { value, dim, truncated })
}

/// Distinguishability from the trace norm of the thermally weighted momentum
/// of the antisymmetric mode b = (a₁ − a₂)/√2:
///
/// ```text
/// D = (4|δ|/|γ|²) √(ω_R ω_ho) · θ · tr|e^{−θ b†b} P|,   P = i(b† − b)/√2
/// ```
///
/// As θ → 0 this tends to (2/√π)(|δ|/|γ|) ξ_cl. The weight is not normalized
/// by the partition function; θ plays that role to leading order. Flags the
/// result when θ > 0.1 or the discarded thermal weight e^{−θN} exceeds 10⁻¹⁰.
pub fn oracle_distinguishability(p: &PhysParams<f64>, dim: usize) -> Result<OracleValue<f64>, FockError> {
    check_dim(dim)?;
    let theta = p.theta();
    let prefactor = 4.0 * p.delta.abs() / p.gamma_sq() * (p.omega_r * p.omega_ho).sqrt() * theta;
    if prefactor == 0.0 || !theta.is_finite() {
        return Ok(OracleValue {
            value: 0.0,
            dim,
            truncated: false,
        });
    }
    // e^{−θn} i(b† − b)/√2 = i R with R real. R only links neighbouring
    // number states, so it maps even states to odd ones and back; its singular
    // values are those of the two parity blocks.
    let entry = |row: usize, col: usize| {
        let w = (-theta * row as f64).exp() * std::f64::consts::FRAC_1_SQRT_2;
        if row == col + 1 {
            w * (row as f64).sqrt()
        } else if col == row + 1 {
            -w * (col as f64).sqrt()
        } else {
            0.0
        }
    };
    let evens = dim.div_ceil(2);
    let odds = dim / 2;
    let odd_from_even = DMatrix::<f64>::from_fn(odds, evens, |i, j| entry(2 * i + 1, 2 * j));
    let even_from_odd = DMatrix::<f64>::from_fn(evens, odds, |i, j| entry(2 * i, 2 * j + 1));
    let norm: f64 = odd_from_even.singular_values().iter().sum::<f64>()
        + even_from_odd.singular_values().iter().sum::<f64>();
    Ok(OracleValue {
        value: prefactor * norm,
        dim,
        truncated: (-theta * dim as f64).exp() > 1e-10 || theta > 0.1,
    })
}
