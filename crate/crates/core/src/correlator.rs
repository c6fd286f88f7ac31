//! Thermal expectation values of ordered products of displacement exponentials.
//!
//! Every factor of a transition operator has the form e^{i q·u_j(t)}, where
//! u_j(t) = l (a_j† e^{iω_ho t} + a_j e^{−iω_ho t}) is the interaction-picture
//! displacement of atom j. Because all commutators of such exponents are
//! c-numbers, the thermal average of an ordered product is Gaussian:
//!
//! ```text
//! log ⟨e^{X_1} ⋯ e^{X_N}⟩ = Σ_{a<b} ⟨X_a X_b⟩ + ½ Σ_a ⟨X_a²⟩,   X_a = i q_a·u(t_a)
//! ```
//!
//! with `a < b` meaning that factor `a` stands to the left of factor `b`.
//! Factors on different atoms are uncorrelated. When the wavevectors acting on
//! each atom sum to zero, the equal-time pieces C(0) cancel exactly and
//!
//! ```text
//! log G = Σ_{a<b, same atom} (−q_a·q_b) K(t_a − t_b),
//! K(τ) = η² [(n̄+1)(e^{−iω_ho τ} − 1) + n̄(e^{iω_ho τ} − 1)].
//! ```
//!
//! Only kernel differences are ever formed, so the free-atom limit ω_ho → 0
//! (where C(0) diverges like 1/ω_ho) is reached without cancellation.

use std::ops::Neg;

use num_complex::Complex;
use serde::Serialize;
use smallvec::SmallVec;
use thiserror::Error;

use crate::params::PhysParams;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Atom {
    One,
    Two,
}

impl Atom {
    pub fn index(self) -> usize {
        match self {
            Atom::One => 0,
            Atom::Two => 1,
        }
    }

    pub fn other(self) -> Atom {
        match self {
            Atom::One => Atom::Two,
            Atom::Two => Atom::One,
        }
    }
}

/// Wavevector q = along_k·k̂_in + along_n·n̂ in units of k_in, with integer
/// coefficients in {−1, 0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Wavevector {
    pub along_k: i8,
    pub along_n: i8,
}

impl Wavevector {
    /// k̂_in.
    pub const PROBE: Wavevector = Wavevector {
        along_k: 1,
        along_n: 0,
    };
    /// n̂, the unit vector from atom 1 to atom 2.
    pub const AXIS: Wavevector = Wavevector {
        along_k: 0,
        along_n: 1,
    };

    /// `None` for coefficients outside {−1, 0, 1} or the null vector.
    pub fn new(along_k: i8, along_n: i8) -> Option<Self> {
        let ok = (-1..=1).contains(&along_k) && (-1..=1).contains(&along_n);
        (ok && (along_k, along_n) != (0, 0)).then_some(Self { along_k, along_n })
    }

    pub fn is_null(self) -> bool {
        self.along_k == 0 && self.along_n == 0
    }

    /// q·q′ in units of k_in², given μ = n̂·k̂_in.
    #[inline]
    pub fn dot<T: Real>(self, other: Wavevector, mu: T) -> T {
        let kk = i32::from(self.along_k) * i32::from(other.along_k)
            + i32::from(self.along_n) * i32::from(other.along_n);
        let kn = i32::from(self.along_k) * i32::from(other.along_n)
            + i32::from(self.along_n) * i32::from(other.along_k);
        T::lit(f64::from(kk)) + mu * T::lit(f64::from(kn))
    }
}

impl Neg for Wavevector {
    type Output = Wavevector;

    fn neg(self) -> Wavevector {
        Wavevector {
            along_k: -self.along_k,
            along_n: -self.along_n,
        }
    }
}

/// One factor e^{i q·u_atom(time)}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event<T> {
    pub atom: Atom,
    pub q: Wavevector,
    pub time: T,
}

impl<T> Event<T> {
    pub fn new(atom: Atom, q: Wavevector, time: T) -> Self {
        Self { atom, q, time }
    }
}

/// Ordered operator product; element 0 is the leftmost factor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventList<T> {
    events: SmallVec<[Event<T>; 8]>,
}

impl<T: Real> EventList<T> {
    pub fn new() -> Self {
        Self {
            events: SmallVec::new(),
        }
    }

    /// Appends a factor on the right. Null wavevectors are identities and are
    /// dropped.
    pub fn push(&mut self, event: Event<T>) {
        if !event.q.is_null() {
            self.events.push(event);
        }
    }

    /// Operator product `self · other`.
    pub fn concat(&self, other: &EventList<T>) -> EventList<T> {
        let mut out = self.clone();
        out.events.extend(other.events.iter().copied());
        out
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event<T>> {
        self.events.iter()
    }

    pub fn as_slice(&self) -> &[Event<T>] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Integer coefficients (along k̂_in, along n̂) of the summed wavevector on
    /// `atom`.
    pub fn net_wavevector(&self, atom: Atom) -> (i32, i32) {
        self.events
            .iter()
            .filter(|e| e.atom == atom)
            .fold((0, 0), |(k, n), e| {
                (k + i32::from(e.q.along_k), n + i32::from(e.q.along_n))
            })
    }

    /// Whether Σq = 0 on each atom. For |μ| = 1 the two basis vectors are
    /// parallel and cancellation between them counts.
    pub fn neutrality(&self, mu: T) -> [bool; 2] {
        [Atom::One, Atom::Two].map(|atom| {
            let (k, n) = self.net_wavevector(atom);
            let (k, n) = (T::lit(f64::from(k)), T::lit(f64::from(n)));
            let norm_sq = k * k + n * n + T::lit(2.0) * mu * k * n;
            norm_sq.abs() <= T::lit(16.0) * T::epsilon() * (k * k + n * n)
        })
    }

    pub fn is_neutral(&self, mu: T) -> bool {
        self.neutrality(mu).iter().all(|&b| b)
    }
}

impl<T: Real> FromIterator<Event<T>> for EventList<T> {
    fn from_iter<I: IntoIterator<Item = Event<T>>>(iter: I) -> Self {
        let mut list = EventList::new();
        for e in iter {
            list.push(e);
        }
        list
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CorrelatorError {
    #[error("wavevectors acting on atom {atom:?} do not sum to zero")]
    NeutralityViolation { atom: Atom },
}

/// K(τ) for fixed trap parameters, with the per-call constants hoisted.
#[derive(Debug, Clone, Copy)]
pub struct ThermalKernel<T> {
    eta_sq: T,
    coth_half_theta: T,
    omega: T,
}

impl<T: Real> ThermalKernel<T> {
    pub fn new(p: &PhysParams<T>) -> Self {
        Self {
            eta_sq: p.eta_sq(),
            coth_half_theta: p.coth_half_theta(),
            omega: p.omega_ho,
        }
    }

    /// K(τ) = η² [(2n̄+1)(cos ω_ho τ − 1) − i sin ω_ho τ], with cos − 1 taken
    /// as −2 sin²(ω_ho τ/2).
    #[inline]
    pub fn eval(&self, tau: T) -> Complex<T> {
        let (sh, ch) = (self.omega * tau * T::lit(0.5)).sin_cos();
        let re = -T::lit(2.0) * self.coth_half_theta * sh * sh;
        let im = -T::lit(2.0) * sh * ch;
        Complex::new(self.eta_sq * re, self.eta_sq * im)
    }
}

/// K(τ) ≡ k_in² [C(τ) − C(0)] for a thermal oscillator, dimensionless.
pub fn kernel_diff<T: Real>(dt: T, p: &PhysParams<T>) -> Complex<T> {
    ThermalKernel::new(p).eval(dt)
}

/// log G for a per-atom neutral event list.
pub fn log_correlator<T: Real>(
    events: &EventList<T>,
    p: &PhysParams<T>,
) -> Result<Complex<T>, CorrelatorError> {
    let kernel = ThermalKernel::new(p);
    log_correlator_with(events, p.mu, |tau| kernel.eval(tau))
}

/// [`log_correlator`] with a caller-supplied kernel. Used to evaluate
/// deliberately broken kernels in the validation harness.
pub fn log_correlator_with<T, K>(
    events: &EventList<T>,
    mu: T,
    kernel: K,
) -> Result<Complex<T>, CorrelatorError>
where
    T: Real,
    K: Fn(T) -> Complex<T>,
{
    let neutral = events.neutrality(mu);
    for atom in [Atom::One, Atom::Two] {
        if !neutral[atom.index()] {
            return Err(CorrelatorError::NeutralityViolation { atom });
        }
    }
    Ok(log_correlator_unchecked(events.as_slice(), mu, kernel))
}

/// Pair sum without the neutrality check. Callers must guarantee neutrality.
#[inline]
pub(crate) fn log_correlator_unchecked<T, K>(events: &[Event<T>], mu: T, kernel: K) -> Complex<T>
where
    T: Real,
    K: Fn(T) -> Complex<T>,
{
    let mut acc = Complex::new(T::zero(), T::zero());
    for (i, a) in events.iter().enumerate() {
        for b in &events[i + 1..] {
            if a.atom != b.atom {
                continue;
            }
            let qq = a.q.dot(b.q, mu);
            if qq == T::zero() {
                continue;
            }
            acc = acc - kernel(a.time - b.time) * qq;
        }
    }
    acc
}
