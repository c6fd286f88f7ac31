//! Self-checks run by `cbs validate`.

use std::fmt;

use cbs_core::amplitudes::{adjoint_reversed, events_t};
use cbs_core::correlator::{kernel_diff, log_correlator, log_correlator_with};
use cbs_core::fock::{oracle_correlator, oracle_dim, oracle_distinguishability};
use cbs_core::observables::{distinguishability_analytic, full_report};
use cbs_core::params::derive;
use cbs_core::{
    Atom, Event, EventList, Params, PathLabel, QuadratureSpec, Regime, Thermal, Wavevector,
};
use clap::ValueEnum;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::inputs::ParamArgs;
use crate::output::TableRow;
use crate::sweep::{evaluate, tensor_order_for};
use crate::CliError;

/// Closed form against Fock space, relative.
pub const ORACLE_TOLERANCE: f64 = 1e-8;
/// Frozen constant of the zero-temperature saturation bound.
pub const SATURATION_CONSTANT: f64 = 10.0;
/// Error-bar multiple allowed above V² + D² = 1.
pub const DUALITY_ERROR_MULTIPLE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    OracleEquivalence,
    DualityInequality,
    Saturation,
    Convergence,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::OracleEquivalence,
        Suite::DualityInequality,
        Suite::Saturation,
        Suite::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::OracleEquivalence => "oracle-equivalence",
            Suite::DualityInequality => "duality-inequality",
            Suite::Saturation => "saturation",
            Suite::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{} measured={:.3e} limit={:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite.name(),
            self.name,
            self.measured,
            self.limit
        )?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub suites: Vec<Suite>,
    pub cases: usize,
    pub seed: u64,
    /// Overrides every per-case Fock cutoff.
    pub fock_dim: Option<usize>,
    /// Mutation hook: evaluates the closed form with the kernel negated.
    pub flip_kernel_sign: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            suites: Suite::ALL.to_vec(),
            cases: 128,
            seed: QuadratureSpec::default().seed,
            fock_dim: None,
            flip_kernel_sign: false,
        }
    }
}

pub fn run(opts: &Options) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    for suite in Suite::ALL {
        if !opts.suites.contains(&suite) {
            continue;
        }
        match suite {
            Suite::OracleEquivalence => checks.push(oracle_equivalence(opts)?),
            Suite::DualityInequality => checks.extend(duality_inequality()?),
            Suite::Saturation => checks.push(saturation()?),
            Suite::Convergence => checks.extend(convergence(opts)?),
        }
    }
    Ok(checks)
}

/// A neutral event list together with parameters for it.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub events: EventList,
    pub params: Params,
}

/// One to four pairs of opposite factors on random atoms at random times,
/// shuffled; η² ≤ 0.3, n̄ ≤ 2.
pub fn random_case(rng: &mut ChaCha8Rng) -> OracleCase {
    let pairs = rng.random_range(1..=4);
    let mut events = Vec::with_capacity(2 * pairs);
    for _ in 0..pairs {
        let atom = if rng.random::<bool>() { Atom::One } else { Atom::Two };
        let q = loop {
            if let Some(q) = Wavevector::new(rng.random_range(-1..=1), rng.random_range(-1..=1)) {
                break q;
            }
        };
        events.push(Event::new(atom, q, -rng.random_range(0.0..15.0)));
        events.push(Event::new(atom, -q, -rng.random_range(0.0..15.0)));
    }
    events.shuffle(rng);
    let delta = rng.random_range(-1.0..1.0);
    let omega_ho = rng.random_range(0.01..0.5);
    let eta_sq = rng.random_range(0.0..=0.3);
    let nbar = rng.random_range(0.0..=2.0);
    let mu = rng.random_range(-1.0..=1.0);
    let params = Params::from_occupation(delta, omega_ho, eta_sq * omega_ho, nbar, mu)
        .expect("sampled parameters are in range");
    OracleCase {
        events: events.into_iter().collect(),
        params,
    }
}

/// Relative gap between closed form and oracle, and the oracle's truncation
/// flag.
pub fn oracle_gap(case: &OracleCase, dim: Option<usize>, flip_kernel_sign: bool) -> Result<(f64, bool), CliError> {
    let p = &case.params;
    let log_g = if flip_kernel_sign {
        log_correlator_with(&case.events, p.mu, |tau| -kernel_diff(tau, p))
    } else {
        log_correlator(&case.events, p)
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let dim = dim.unwrap_or_else(|| oracle_dim(&case.events, p));
    let oracle = oracle_correlator(&case.events, p, dim)?;
    let gap = (log_g.exp() - oracle.value).norm() / oracle.value.norm();
    Ok((gap, oracle.truncated))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSummary {
    pub cases: usize,
    pub max_gap: f64,
    pub truncated: usize,
}

pub fn oracle_suite(cases: usize, seed: u64, dim: Option<usize>, flip: bool) -> Result<OracleSummary, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let suite: Vec<_> = (0..cases).map(|_| random_case(&mut rng)).collect();
    let gaps = suite
        .par_iter()
        .map(|c| oracle_gap(c, dim, flip))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OracleSummary {
        cases,
        max_gap: gaps.iter().map(|g| g.0).fold(0.0, f64::max),
        truncated: gaps.iter().filter(|g| g.1).count(),
    })
}

fn oracle_equivalence(opts: &Options) -> Result<Check, CliError> {
    let s = oracle_suite(opts.cases, opts.seed, opts.fock_dim, opts.flip_kernel_sign)?;
    Ok(Check {
        suite: Suite::OracleEquivalence,
        name: "correlator".into(),
        passed: s.max_gap <= ORACLE_TOLERANCE && s.truncated == 0,
        measured: s.max_gap,
        limit: ORACLE_TOLERANCE,
        detail: format!("cases={} truncated={} seed={}", s.cases, s.truncated, opts.seed),
    })
}

fn duality_inequality() -> Result<Vec<Check>, CliError> {
    // The one δ = 2 point needs a 96-point rule and dominates the run time.
    let mut grid: Vec<(f64, f64)> = Vec::new();
    for delta in [0.0, 0.5, 1.0] {
        for xi_cl_sq in [1e-3, 1e-2, 1e-1] {
            grid.push((delta, xi_cl_sq));
        }
    }
    grid.push((2.0, 1e-1));
    let points: Vec<_> = grid
        .into_iter()
        .map(|(delta, xi_cl_sq)| ParamArgs {
            delta: Some(delta),
            omega_r: Some(1e-5),
            xi_cl_sq: Some(xi_cl_sq),
            ..Default::default()
        })
        .collect();
    let rows = tensor_rows(&points);
    if let Some(bad) = rows.iter().find(|r| r.is_failed()) {
        return Err(CliError::Usage(bad.status.clone()));
    }
    let excess = rows
        .iter()
        .map(|r| r.duality_sum - 1.0 - DUALITY_ERROR_MULTIPLE * r.duality_sum_err)
        .fold(f64::NEG_INFINITY, f64::max);
    let converged = rows.iter().filter(|r| r.converged).count();

    // μ only enters through recoil, so this grid uses a recoil frequency
    // large enough to make P visible. Gaps are in units of ten combined
    // error bars.
    let points: Vec<_> = [-1.0, -0.5, 0.0, 0.5, 1.0]
        .into_iter()
        .map(|mu| ParamArgs {
            delta: Some(0.5),
            omega_r: Some(1e-2),
            mu: Some(mu),
            xi_cl_sq: Some(1e-2),
            ..Default::default()
        })
        .collect();
    let block = tensor_rows(&points);
    let mut parity = 0.0f64;
    for (a, b) in [(0, 4), (1, 3)] {
        let (x, y) = (&block[a], &block[b]);
        let gap = (x.visibility - y.visibility).abs().max((x.predictability - y.predictability).abs());
        let tol = 10.0 * (x.visibility_err + y.visibility_err + x.predictability_err + y.predictability_err);
        parity = parity.max(gap / (tol + 1e-12));
    }
    parity = parity.max(block[2].predictability / (10.0 * block[2].predictability_err + 1e-12));
    Ok(vec![
        Check {
            suite: Suite::DualityInequality,
            name: "V2+D2<=1".into(),
            passed: excess <= 0.0,
            measured: excess,
            limit: 0.0,
            detail: format!("points={} converged={converged} (max of V²+D²-1-10·err)", rows.len()),
        },
        Check {
            suite: Suite::DualityInequality,
            name: "mu-parity".into(),
            passed: parity <= 1.0,
            measured: parity,
            limit: 1.0,
            detail: format!(
                "P(mu=1)={:.3e}; max of |V(mu)-V(-mu)|, |P(mu)-P(-mu)| and P(0) over 10 error bars",
                block[4].predictability
            ),
        },
    ])
}

/// Tensor rule at the order [`tensor_order_for`] picks for each row.
fn tensor_rows(points: &[ParamArgs]) -> Vec<TableRow> {
    points
        .iter()
        .map(|a| {
            let spec = QuadratureSpec {
                order: tensor_order_for(a.delta.unwrap_or(0.0)),
                ..QuadratureSpec::default()
            };
            evaluate(a, &spec)
        })
        .collect()
}

/// One zero-temperature point on the saturation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationPoint {
    pub chi: f64,
    pub delta: f64,
    pub mu: f64,
    pub visibility: f64,
    pub visibility_err: f64,
    pub predictability: f64,
    pub predictability_err: f64,
    pub rho: f64,
    pub zeta_sq: f64,
    /// (1 − V²) − (ρ² + 2ζ²).
    pub residual: f64,
    /// max(ζ⁴, χ³, ζ²χ).
    pub scale: f64,
    pub converged: bool,
}

/// Ground-state traps at ω_ho = 10⁻⁴ with ω_R chosen to give `chi`.
pub fn saturation_point(chi: f64, delta: f64, mu: f64, spec: &QuadratureSpec) -> Result<SaturationPoint, CliError> {
    let gamma_abs = (delta * delta + 0.25f64).sqrt();
    let p = Params::zero_temperature(delta, 1e-4, chi * gamma_abs, mu)?;
    let r = full_report(&p, spec)?;
    let d = derive(&p)?;
    let v = r.visibility;
    Ok(SaturationPoint {
        chi: d.chi,
        delta,
        mu,
        visibility: v,
        visibility_err: r.visibility_err,
        predictability: r.predictability,
        predictability_err: r.predictability_err,
        rho: d.rho,
        zeta_sq: d.zeta_sq,
        residual: (1.0 - v * v) - (d.rho * d.rho + 2.0 * d.zeta_sq),
        scale: (d.zeta_sq * d.zeta_sq).max(d.chi.powi(3)).max(d.zeta_sq * d.chi),
        converged: r.converged,
    })
}

fn saturation() -> Result<Check, CliError> {
    let spec = QuadratureSpec::default();
    let mut worst = 0.0f64;
    let mut n = 0;
    for chi in [0.005, 0.01, 0.02] {
        for mu in [0.0, 1.0] {
            let s = saturation_point(chi, 0.5, mu, &spec)?;
            worst = worst.max(s.residual.abs() / s.scale);
            n += 1;
        }
    }
    Ok(Check {
        suite: Suite::Saturation,
        name: "zero-temperature".into(),
        passed: worst <= SATURATION_CONSTANT,
        measured: worst,
        limit: SATURATION_CONSTANT,
        detail: format!("points={n}, delta=0.5, chi<=0.02 (|residual|/max(zeta^4, chi^3, zeta^2 chi))"),
    })
}

fn convergence(opts: &Options) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();

    let p = ParamArgs {
        delta: Some(0.5),
        xi_cl_sq: Some(0.05),
        mu: Some(0.5),
        ..Default::default()
    }
    .resolve()?;
    let v = |order| -> Result<f64, CliError> {
        let spec = QuadratureSpec {
            order,
            ..QuadratureSpec::default()
        };
        Ok(full_report(&p, &spec)?.visibility)
    };
    let gap = (v(32)? - v(48)?).abs();
    checks.push(Check {
        suite: Suite::Convergence,
        name: "quadrature-order".into(),
        passed: gap <= 1e-8,
        measured: gap,
        limit: 1e-8,
        detail: "|V(order 32) - V(order 48)| at delta=0.5, xi_cl_sq=0.05".into(),
    });

    let p = Params::from_occupation(0.3, 0.2, 0.06, 2.0, 0.5)?;
    let events = adjoint_reversed(&events_t(PathLabel::A, 1.5, 2.5).expect("non-negative times"))
        .concat(&events_t(PathLabel::B, 3.0, 0.5).expect("non-negative times"));
    let n = opts.fock_dim.unwrap_or_else(|| oracle_dim(&events, &p));
    let a = oracle_correlator(&events, &p, n)?;
    let b = oracle_correlator(&events, &p, 2 * n)?;
    let gap = (a.value - b.value).norm() / b.value.norm();
    checks.push(Check {
        suite: Suite::Convergence,
        name: "fock-cutoff-correlator".into(),
        passed: gap <= 1e-10 && !a.truncated,
        measured: gap,
        limit: 1e-10,
        detail: format!("N={n} truncated={}", a.truncated),
    });

    // δ = 1/2, θ = 0.05, ξ_cl = 0.1 with ω_R = 10⁻³.
    let theta = 0.05;
    let omega_ho = 0.01 * theta * 0.5 / (8.0 * 1e-3);
    let p = Params::new(0.5, omega_ho, 1e-3, Thermal::InverseTemperature(theta), 0.0)?;
    let n = opts.fock_dim.unwrap_or((25.0 / theta).ceil() as usize);
    let a = oracle_distinguishability(&p, n)?;
    let b = oracle_distinguishability(&p, 2 * n)?;
    let gap = (a.value - b.value).abs() / b.value;
    let closed = distinguishability_analytic(&p, Regime::FiniteT);
    checks.push(Check {
        suite: Suite::Convergence,
        name: "fock-cutoff-distinguishability".into(),
        passed: gap <= 1e-6 && !a.truncated,
        measured: gap,
        limit: 1e-6,
        detail: format!(
            "N={n} truncated={} D={:.6} closed_form={closed:.6}",
            a.truncated, a.value
        ),
    });
    Ok(checks)
}
