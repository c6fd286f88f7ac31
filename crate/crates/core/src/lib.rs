//! Interference visibility, which-path distinguishability and predictability
//! for a photon scattered twice by two harmonically trapped atoms, observed in
//! the exact backscattering direction.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`). The aliases below fix it to `f64`, which is what the
//! command-line front end and the validation suites use.

pub mod amplitudes;
pub mod correlator;
pub mod fock;
pub mod observables;
pub mod params;
pub mod quadrature;
pub mod scalar;

pub use amplitudes::{PathLabel, TraceKind};
pub use correlator::{Atom, CorrelatorError, Wavevector};
pub use observables::{ObservableError, Regime};
pub use params::{ParamError, RegimeFlags, Thermal};
pub use quadrature::{QuadError, QuadMethod, QuadratureSpec};
pub use scalar::Real;

pub type Params = params::PhysParams<f64>;
pub type Derived = params::DerivedParams<f64>;
pub type Event = correlator::Event<f64>;
pub type EventList = correlator::EventList<f64>;
pub type QuadResult = quadrature::QuadResult<f64>;
pub type Traces = observables::Traces<f64>;
pub type DualityReport = observables::DualityReport<f64>;
pub type Estimate = observables::Estimate<f64>;
pub type Complex = num_complex::Complex<f64>;
