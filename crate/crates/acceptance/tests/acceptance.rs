//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances are fixed below.

use std::process::ExitCode;
use std::time::Instant;

use cbs_cli::fig2b::Fig2b;
use cbs_cli::inputs::ParamArgs;
use cbs_cli::sweep::{evaluate, tensor_order_for};
use cbs_cli::validate::{oracle_suite, saturation_point, SaturationPoint};
use cbs_core::fock::oracle_distinguishability;
use cbs_core::observables::{compute_traces, distinguishability_analytic, full_report};
use cbs_core::params::derive;
use cbs_core::quadrature::integrate4d;
use cbs_core::{Complex, Params, QuadMethod, QuadResult, QuadratureSpec, Regime, Thermal};
use cbs_validation::{slope, Outcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Coefficient of ξ_cl⁴ in the low-temperature visibility bound.
const LAW_XI4: f64 = 3.0;
/// Multiple of the quadrature error added to the law bounds.
const LAW_ERR: f64 = 5.0;
/// Frozen constant of the zero-temperature saturation bound.
const SATURATION_C: f64 = 10.0;
/// Smallest accepted log–log exponent of P(δ=0) against χ.
const P_CHI_EXPONENT_MIN: f64 = 1.9;
const TAIL_SLOPE: f64 = -2.0;
const TAIL_SLOPE_TOL: f64 = 0.1;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_CASES: usize = 128;
const ORACLE_SEED: u64 = 20_240_601;
const CHAIN_DIM: usize = 400;
const CHAIN_FINAL_REL: f64 = 0.01;
const DUALITY_ERR: f64 = 10.0;
const SEPARABLE_REL: f64 = 1e-10;
/// Standard deviations allowed between tensor and Monte Carlo traces.
const MC_SIGMAS: f64 = 3.0;
const MC_POINTS: usize = 10;
const MC_SEED: u64 = 7;

fn gamma_sq(delta: f64) -> f64 {
    delta * delta + 0.25
}

/// |V² − (1 − 2ξ_cl²)| and its bound, given V and the error of V².
fn law(v: f64, v_sq_err: f64, xi_cl_sq: f64) -> (f64, f64) {
    let residual = (v * v - (1.0 - 2.0 * xi_cl_sq)).abs();
    (residual, LAW_XI4 * xi_cl_sq * xi_cl_sq + LAW_ERR * v_sq_err)
}

fn c1() -> Outcome {
    let mut o = Outcome::new("C1", "low-temperature visibility law", Some(60));
    let start = Instant::now();
    let (theta, omega_r) = (0.01, 1e-3);
    for xi_cl_sq in [0.01, 0.02, 0.05] {
        // ξ_cl² = 8 ω_R ω_ho / (θ|γ|²)
        let omega_ho = xi_cl_sq * theta * gamma_sq(0.0) / (8.0 * omega_r);
        let p = Params::new(0.0, omega_ho, omega_r, Thermal::InverseTemperature(theta), 0.0).unwrap();
        let r = full_report(&p, &QuadratureSpec::default()).unwrap();
        let (residual, bound) = law(r.visibility, r.duality_sum_err, xi_cl_sq);
        o.check(
            &format!("xi_cl^2={xi_cl_sq}"),
            residual <= bound,
            residual,
            bound,
            format!("V={:.8} residual/xi^4={:.3}", r.visibility, residual / (xi_cl_sq * xi_cl_sq)),
        );
    }
    o.finish(start.elapsed());
    o
}

const SAT_CHIS: [f64; 3] = [0.01, 0.02, 0.05];
const SAT_DELTAS: [f64; 2] = [0.0, 0.5];

fn saturation_grid() -> Vec<SaturationPoint> {
    let spec = QuadratureSpec::default();
    let mut out = Vec::new();
    for delta in SAT_DELTAS {
        for chi in SAT_CHIS {
            for mu in [0.0, 1.0] {
                out.push(saturation_point(chi, delta, mu, &spec).unwrap());
            }
        }
    }
    out
}

fn c2(grid: &[SaturationPoint], secs: f64) -> Outcome {
    let mut o = Outcome::new("C2", "zero-temperature duality saturation", Some(120));
    for s in grid {
        let ratio = s.residual.abs() / s.scale;
        o.check(
            &format!("chi={} delta={} mu={}", s.chi, s.delta, s.mu),
            ratio <= SATURATION_C,
            ratio,
            SATURATION_C,
            format!("residual={:.3e} zeta^2={:.2e}", s.residual, s.zeta_sq),
        );
    }
    o.finish(std::time::Duration::from_secs_f64(secs));
    o
}

fn c3(grid: &[SaturationPoint], secs: f64) -> Outcome {
    let mut o = Outcome::new("C3", "predictability mechanism", Some(120));
    for s in grid {
        let gap = (s.predictability - s.rho.abs()).abs();
        let bound = (s.chi * s.chi).max(s.zeta_sq);
        o.check(
            &format!("|P-|rho|| chi={} delta={} mu={}", s.chi, s.delta, s.mu),
            gap <= bound,
            gap,
            bound,
            format!("P={:.4e} rho={:.4e}", s.predictability, s.rho),
        );
    }
    for s in grid.iter().filter(|s| s.mu == 0.0) {
        o.check(
            &format!("P(mu=0) chi={} delta={}", s.chi, s.delta),
            s.predictability <= s.predictability_err,
            s.predictability,
            s.predictability_err,
            "",
        );
    }
    let resonant: Vec<_> = grid.iter().filter(|s| s.delta == 0.0 && s.mu == 1.0).collect();
    let x: Vec<f64> = resonant.iter().map(|s| s.chi.ln()).collect();
    let y: Vec<f64> = resonant.iter().map(|s| s.predictability.ln()).collect();
    let exponent = slope(&x, &y);
    let coeffs: Vec<String> = resonant
        .iter()
        .map(|s| format!("{:.2}", s.predictability / (s.chi * s.chi)))
        .collect();
    o.check(
        "P(delta=0) exponent in chi",
        exponent >= P_CHI_EXPONENT_MIN,
        exponent,
        P_CHI_EXPONENT_MIN,
        format!("P/chi^2 = [{}]", coeffs.join(", ")),
    );
    o.finish(std::time::Duration::from_secs_f64(secs));
    o
}

fn c4() -> Outcome {
    let mut o = Outcome::new("C4", "visibility against thermal Doppler parameter", Some(300));
    let start = Instant::now();
    let fig = Fig2b::default();
    let grid = fig.axis().unwrap().values();
    let rows = fig.run().unwrap();
    let failed = rows.iter().filter(|r| r.is_failed()).count();
    o.check("failed rows", failed == 0, failed as f64, 0.0, "");
    let rises = rows.windows(2).filter(|w| !(w[1].visibility < w[0].visibility)).count();
    o.check("non-decreasing steps", rises == 0, rises as f64, 0.0, format!("rows={}", rows.len()));

    let first = &rows[0];
    let (residual, bound) = law(first.visibility, first.duality_sum_err, first.xi_cl_sq);
    o.check(
        &format!("small-end law xi_cl^2={}", grid[0]),
        residual <= bound,
        residual,
        bound,
        format!("V={:.8}", first.visibility),
    );

    // Rows report the derived ξ_cl², which sits a hair below the requested
    // grid value; select on the grid.
    let tail: Vec<_> = rows
        .iter()
        .zip(&grid)
        .filter(|(_, x)| (25.0..=100.0).contains(*x))
        .map(|(r, _)| r)
        .collect();
    let x: Vec<f64> = tail.iter().map(|r| r.xi_cl_sq.sqrt().ln()).collect();
    let y: Vec<f64> = tail.iter().map(|r| r.visibility.ln()).collect();
    let s = slope(&x, &y);
    o.check(
        "tail slope d ln V / d ln xi_cl",
        (s - TAIL_SLOPE).abs() <= TAIL_SLOPE_TOL,
        s,
        TAIL_SLOPE,
        format!("points={} tolerance={TAIL_SLOPE_TOL}", tail.len()),
    );
    o.finish(start.elapsed());
    o
}

fn c5() -> Outcome {
    let mut o = Outcome::new("C5", "correlator oracle equivalence", Some(120));
    let start = Instant::now();
    let s = oracle_suite(ORACLE_CASES, ORACLE_SEED, None, false).unwrap();
    o.check(
        "max relative gap",
        s.max_gap <= ORACLE_TOL,
        s.max_gap,
        ORACLE_TOL,
        format!("cases={}", s.cases),
    );
    o.check("truncated cases", s.truncated == 0, s.truncated as f64, 0.0, "");
    o.finish(start.elapsed());
    o
}

fn c6() -> Outcome {
    let mut o = Outcome::new("C6", "distinguishability chain", Some(60));
    let start = Instant::now();
    let (delta, omega_r, xi_cl) = (0.5, 1e-3, 0.1);
    let mut rels = Vec::new();
    for theta in [0.1, 0.05, 0.02, 0.01] {
        let omega_ho = xi_cl * xi_cl * theta * gamma_sq(delta) / (8.0 * omega_r);
        let p = Params::new(delta, omega_ho, omega_r, Thermal::InverseTemperature(theta), 0.0).unwrap();
        let d = oracle_distinguishability(&p, CHAIN_DIM).unwrap();
        let target = distinguishability_analytic(&p, Regime::FiniteT);
        let rel = (d.value / target - 1.0).abs();
        o.note(format!(
            "theta={theta} D={:.6} closed_form={target:.6} rel={rel:.3e} truncated={}",
            d.value, d.truncated
        ));
        rels.push(rel);
    }
    let elapsed = start.elapsed();
    // Informational: the same chain with a cutoff that keeps e^{−θN} negligible.
    let wide: Vec<String> = [0.1, 0.05, 0.02, 0.01]
        .into_iter()
        .map(|theta| {
            let omega_ho = xi_cl * xi_cl * theta * gamma_sq(delta) / (8.0 * omega_r);
            let p = Params::new(delta, omega_ho, omega_r, Thermal::InverseTemperature(theta), 0.0).unwrap();
            let n = (25.0 / theta).ceil() as usize;
            let d = oracle_distinguishability(&p, n).unwrap();
            let target = distinguishability_analytic(&p, Regime::FiniteT);
            format!("{:.3e}@N={n}", (d.value / target - 1.0).abs())
        })
        .collect();
    o.note(format!("wide cutoff rel errors: {}", wide.join(", ")));
    let rises = rels.windows(2).filter(|w| !(w[1] < w[0])).count();
    o.check("non-decreasing error steps", rises == 0, rises as f64, 0.0, "");
    let last = *rels.last().unwrap();
    o.check("final relative error", last <= CHAIN_FINAL_REL, last, CHAIN_FINAL_REL, "");
    o.finish(elapsed);
    o
}

fn c7() -> Outcome {
    let mut o = Outcome::new("C7", "duality inequality and classical duality sum", Some(300));
    let start = Instant::now();
    for delta in [0.0, 0.25, 0.5, 1.0, 2.0] {
        for xi_cl_sq in [0.01, 0.05, 0.1] {
            let args = ParamArgs {
                delta: Some(delta),
                omega_r: Some(1e-5),
                xi_cl_sq: Some(xi_cl_sq),
                ..Default::default()
            };
            let spec = QuadratureSpec {
                order: tensor_order_for(delta),
                ..QuadratureSpec::default()
            };
            let r = evaluate(&args, &spec);
            assert!(!r.is_failed(), "{}", r.status);
            let label = format!("delta={delta} xi_cl^2={xi_cl_sq}");
            let excess = r.duality_sum - 1.0;
            let allowed = DUALITY_ERR * r.duality_sum_err;
            o.check(
                &format!("V2+D2<=1 {label}"),
                excess <= allowed,
                excess,
                allowed,
                format!("converged={}", r.converged),
            );
            let gap = (r.duality_sum - r.duality_sum_analytic).abs();
            let bound = LAW_XI4 * xi_cl_sq * xi_cl_sq + LAW_ERR * r.duality_sum_err;
            o.check(
                &format!("sum law {label}"),
                gap <= bound,
                gap,
                bound,
                format!("V2+D2={:.6} analytic={:.6}", r.duality_sum, r.duality_sum_analytic),
            );
        }
    }
    o.finish(start.elapsed());
    o
}

fn c8() -> Outcome {
    let mut o = Outcome::new("C8", "quadrature self-validation", None);
    let start = Instant::now();

    // ∫ e^{iγ(s+t)} e^{−iγ*(s′+t′)} over the orthant is 1/|γ|⁴; the rule
    // supplies the e^{−(s+t+s′+t′)/2} envelope.
    let delta = 0.7;
    let exact = 1.0 / gamma_sq(delta).powi(2);
    let r = integrate4d(
        |x: &[f64; 4]| Complex::from_polar(1.0, delta * (x[0] + x[1] - x[2] - x[3])),
        &QuadratureSpec::default(),
    )
    .unwrap();
    let rel = (r.value - exact).norm() / exact;
    o.check("separable integral order 48", rel <= SEPARABLE_REL, rel, SEPARABLE_REL, format!("delta={delta}"));

    let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
    let tensor = QuadratureSpec::default();
    let mc = QuadratureSpec::with_method(QuadMethod::MonteCarlo);
    for i in 0..MC_POINTS {
        let delta = rng.random_range(-1.0..=1.0);
        let xi_sq = rng.random_range(0.01..=4.0);
        let mu = rng.random_range(-1.0..=1.0);
        let p = Params::with_thermal_trap_parameter(delta, 1e-4, 1e-3, mu, xi_sq).unwrap();
        let t = compute_traces(&p, &tensor).unwrap();
        let m = compute_traces(&p, &mc).unwrap();
        let pairs: [(&str, &QuadResult, &QuadResult); 3] = [
            ("I_A", &t.i_a, &m.i_a),
            ("I_B", &t.i_b, &m.i_b),
            ("INT", &t.interference, &m.interference),
        ];
        let worst = pairs
            .iter()
            .map(|(_, a, b)| {
                let sigma = a.abs_error_estimate.hypot(b.abs_error_estimate);
                (a.value - b.value).norm() / sigma
            })
            .fold(0.0, f64::max);
        let chi = derive(&p).unwrap().chi;
        o.check(
            &format!("tensor vs mc point {i}"),
            worst <= MC_SIGMAS,
            worst,
            MC_SIGMAS,
            format!("delta={delta:.3} xi^2={xi_sq:.3} mu={mu:.3} chi={chi:.1e} (sigmas)"),
        );
    }
    o.finish(start.elapsed());
    o
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    let mut run = |o: Outcome| {
        println!("{o}");
        outcomes.push(o.passed);
    };
    run(c1());
    let start = Instant::now();
    let grid = saturation_grid();
    let secs = start.elapsed().as_secs_f64();
    run(c2(&grid, secs));
    run(c3(&grid, secs));
    run(c4());
    run(c5());
    run(c6());
    run(c7());
    run(c8());
    let failed = outcomes.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
