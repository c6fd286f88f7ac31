//! Double-scattering transition operators and the trace integrands built from
//! them.
//!
//! Way A (first atom 1, then atom 2), read left to right as an operator
//! product, after a photon absorbed at time −s−t, re-emitted towards the other
//! atom at −s and finally emitted backwards at 0:
//!
//! ```text
//! T_A(s, t) = e^{i k·u_2(0)} e^{i n·u_2(−s)} e^{−i n·u_1(−s)} e^{i k·u_1(−s−t)}
//! ```
//!
//! Way B swaps the atoms and reverses n̂. The integrands below are the
//! time-domain kernels of tr{T_Y ρ T_X†} = ⟨T_X† T_Y⟩ with the resonant
//! propagators e^{iγ(s+t)} attached.

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::correlator::{
    log_correlator, Atom, CorrelatorError, Event, EventList, ThermalKernel, Wavevector,
};
use crate::params::PhysParams;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PathLabel {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TraceKind {
    /// ⟨T_A† T_A⟩
    IntensityA,
    /// ⟨T_B† T_B⟩
    IntensityB,
    /// ⟨T_A† T_B⟩
    Interference,
}

impl TraceKind {
    pub const ALL: [TraceKind; 3] = [
        TraceKind::IntensityA,
        TraceKind::IntensityB,
        TraceKind::Interference,
    ];

    /// (bra path, ket path).
    pub fn paths(self) -> (PathLabel, PathLabel) {
        match self {
            TraceKind::IntensityA => (PathLabel::A, PathLabel::A),
            TraceKind::IntensityB => (PathLabel::B, PathLabel::B),
            TraceKind::Interference => (PathLabel::A, PathLabel::B),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AmplitudeError {
    #[error("scattering delays must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    Correlator(#[from] CorrelatorError),
}

/// Time slots of one amplitude: 0 → 0, 1 → −s, 2 → −s−t.
const SLOTS_PER_AMPLITUDE: usize = 3;

fn slot_events(path: PathLabel) -> [(Atom, Wavevector, usize); 4] {
    let k = Wavevector::PROBE;
    let n = Wavevector::AXIS;
    match path {
        PathLabel::A => [
            (Atom::Two, k, 0),
            (Atom::Two, n, 1),
            (Atom::One, -n, 1),
            (Atom::One, k, 2),
        ],
        PathLabel::B => [
            (Atom::One, k, 0),
            (Atom::One, -n, 1),
            (Atom::Two, n, 1),
            (Atom::Two, k, 2),
        ],
    }
}

/// Factors of T_path(s, t) in operator order.
pub fn events_t<T: Real>(path: PathLabel, s: T, t: T) -> Result<EventList<T>, AmplitudeError> {
    for x in [s, t] {
        if !(x >= T::zero()) {
            return Err(AmplitudeError::NegativeTime(x.to_f64_lossy()));
        }
    }
    let times = [T::zero(), -s, -s - t];
    Ok(slot_events(path)
        .into_iter()
        .map(|(atom, q, slot)| Event::new(atom, q, times[slot]))
        .collect())
}

/// Event list of the adjoint operator: order reversed, every q negated.
pub fn adjoint_reversed<T: Real>(e: &EventList<T>) -> EventList<T> {
    e.iter()
        .rev()
        .map(|ev| Event::new(ev.atom, -ev.q, ev.time))
        .collect()
}

/// e^{iγ(s+t)} e^{−iγ*(s′+t′)} ⟨T_bra(s′,t′)† T_ket(s,t)⟩.
pub fn trace_integrand_paths<T: Real>(
    bra: PathLabel,
    ket: PathLabel,
    s: T,
    t: T,
    s_p: T,
    t_p: T,
    p: &PhysParams<T>,
) -> Result<Complex<T>, AmplitudeError> {
    let events = adjoint_reversed(&events_t(bra, s_p, t_p)?).concat(&events_t(ket, s, t)?);
    let log_g = log_correlator(&events, p)?;
    let i = Complex::new(T::zero(), T::one());
    let gamma = p.gamma();
    let phase = i * gamma * (s + t) - i * gamma.conj() * (s_p + t_p);
    Ok((phase + log_g).exp())
}

pub fn trace_integrand<T: Real>(
    kind: TraceKind,
    s: T,
    t: T,
    s_p: T,
    t_p: T,
    p: &PhysParams<T>,
) -> Result<Complex<T>, AmplitudeError> {
    let (bra, ket) = kind.paths();
    trace_integrand_paths(bra, ket, s, t, s_p, t_p, p)
}

/// Number of distinct slot pairs among the six time slots of a trace.
const PAIRS: usize = 15;

/// Precomputed form of the three trace integrands for fixed parameters.
///
/// Slots 0..3 carry the ket times (0, −s, −s−t) and slots 3..6 the bra times
/// (0, −s′, −s′−t′). For every slot pair (i, j), i < j, the exponent collects
/// terms of the form K(τ_i − τ_j) and K(τ_j − τ_i) = conj K(τ_i − τ_j), so
///
/// ```text
/// log G = Σ_{i<j} re_ij · Re K(τ_i − τ_j) + i · im_ij · Im K(τ_i − τ_j)
/// ```
///
/// with real coefficients fixed by the event bookkeeping and μ.
#[derive(Debug, Clone)]
pub struct TraceIntegrand<T> {
    kernel: ThermalKernel<T>,
    delta: T,
    pairs: [(usize, usize); PAIRS],
    coeff_re: [[T; PAIRS]; 3],
    coeff_im: [[T; PAIRS]; 3],
}

impl<T: Real> TraceIntegrand<T> {
    pub fn new(p: &PhysParams<T>) -> Self {
        let mut pairs = [(0, 0); PAIRS];
        let mut idx = 0;
        for i in 0..2 * SLOTS_PER_AMPLITUDE {
            for j in i + 1..2 * SLOTS_PER_AMPLITUDE {
                pairs[idx] = (i, j);
                idx += 1;
            }
        }
        let pair_index = |i: usize, j: usize| pairs.iter().position(|&x| x == (i, j)).unwrap();

        let mut coeff_re = [[T::zero(); PAIRS]; 3];
        let mut coeff_im = [[T::zero(); PAIRS]; 3];
        for (k, kind) in TraceKind::ALL.into_iter().enumerate() {
            let (bra, ket) = kind.paths();
            let mut slots: Vec<(Atom, Wavevector, usize)> = slot_events(bra)
                .into_iter()
                .rev()
                .map(|(a, q, s)| (a, -q, s + SLOTS_PER_AMPLITUDE))
                .collect();
            slots.extend(slot_events(ket));
            for (x, &(atom_a, qa, sa)) in slots.iter().enumerate() {
                for &(atom_b, qb, sb) in &slots[x + 1..] {
                    if atom_a != atom_b || sa == sb {
                        continue;
                    }
                    // −q_a·q_b K(τ_a − τ_b)
                    let w = -qa.dot(qb, p.mu);
                    let (i, j, conj) = if sa < sb { (sa, sb, false) } else { (sb, sa, true) };
                    // Slots 0 and 3 both sit at time zero.
                    if (i, j) == (0, 3) {
                        continue;
                    }
                    let m = pair_index(i, j);
                    coeff_re[k][m] += w;
                    coeff_im[k][m] += if conj { -w } else { w };
                }
            }
        }
        Self {
            kernel: ThermalKernel::new(p),
            delta: p.delta,
            pairs,
            coeff_re,
            coeff_im,
        }
    }

    /// Envelope-factored integrands e^{iδ(s+t−s′−t′)} G for
    /// [I_A, I_B, INT] at x = (s, t, s′, t′). Multiplying by
    /// e^{−(s+t+s′+t′)/2} gives [`trace_integrand`].
    #[inline]
    pub fn eval_all(&self, x: &[T; 4]) -> [Complex<T>; 3] {
        let [s, t, s_p, t_p] = *x;
        let tau = [T::zero(), -s, -s - t, T::zero(), -s_p, -s_p - t_p];
        let mut k_re = [T::zero(); PAIRS];
        let mut k_im = [T::zero(); PAIRS];
        for (m, &(i, j)) in self.pairs.iter().enumerate() {
            let k = self.kernel.eval(tau[i] - tau[j]);
            k_re[m] = k.re;
            k_im[m] = k.im;
        }
        let phase = self.delta * (s + t - s_p - t_p);
        let mut out = [Complex::new(T::zero(), T::zero()); 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut re = T::zero();
            let mut im = phase;
            for m in 0..PAIRS {
                re += self.coeff_re[k][m] * k_re[m];
                im += self.coeff_im[k][m] * k_im[m];
            }
            *o = Complex::from_polar(re.exp(), im);
        }
        out
    }
}
