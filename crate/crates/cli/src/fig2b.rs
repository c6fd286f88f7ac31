//! Resonant visibility against the thermal Doppler parameter ξ_cl², on a
//! log grid, for a semi-log plot.

use cbs_core::{QuadMethod, QuadratureSpec};
use rayon::prelude::*;

use crate::inputs::{ParamArgs, SweepParam, DEFAULT_OMEGA_HO};
use crate::output::TableRow;
use crate::sweep::{evaluate, Axis, Spacing};
use crate::CliError;

/// Largest χ/ξ_cl² for which the free-recoil contribution is dropped.
pub const MAX_RECOIL_RATIO: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2b {
    pub omega_r: f64,
    pub omega_ho: f64,
    pub mu: f64,
    pub xi_cl_sq_min: f64,
    pub xi_cl_sq_max: f64,
    pub count: usize,
    /// Rule for ξ_cl² ≤ `switch_at`.
    pub low: QuadratureSpec,
    /// Rule above `switch_at`, where the correlator is a narrow Gaussian in
    /// the time differences and the tensor rule under-resolves it.
    pub high: QuadratureSpec,
    pub switch_at: f64,
}

impl Default for Fig2b {
    fn default() -> Self {
        Self {
            omega_r: 1e-5,
            omega_ho: DEFAULT_OMEGA_HO,
            mu: 0.0,
            xi_cl_sq_min: 1e-2,
            xi_cl_sq_max: 1e2,
            count: 41,
            low: QuadratureSpec::default(),
            high: QuadratureSpec {
                target_rel: 1e-4,
                ..QuadratureSpec::with_method(QuadMethod::Adaptive)
            },
            switch_at: 1.0,
        }
    }
}

impl Fig2b {
    /// χ/ξ_cl² at the low end of the grid, where it is largest.
    pub fn recoil_ratio(&self) -> f64 {
        // χ = ω_R/|γ| with |γ| = 1/2 at resonance.
        2.0 * self.omega_r / self.xi_cl_sq_min
    }

    pub fn axis(&self) -> Result<Axis, CliError> {
        let ratio = self.recoil_ratio();
        if !(ratio <= MAX_RECOIL_RATIO) {
            return Err(CliError::Usage(format!(
                "chi/xi_cl_sq = {ratio:e} at xi_cl_sq = {} exceeds {MAX_RECOIL_RATIO}; lower --omega-r or raise the grid minimum",
                self.xi_cl_sq_min
            )));
        }
        self.low.validate()?;
        self.high.validate()?;
        Axis::new(
            SweepParam::XiClSq,
            self.xi_cl_sq_min,
            self.xi_cl_sq_max,
            self.count,
            Spacing::Log,
        )
        .map_err(CliError::Usage)
    }

    pub fn run(&self) -> Result<Vec<TableRow>, CliError> {
        let values = self.axis()?.values();
        Ok(values
            .par_iter()
            .map(|&xi_cl_sq| {
                let args = ParamArgs {
                    delta: Some(0.0),
                    omega_ho: Some(self.omega_ho),
                    omega_r: Some(self.omega_r),
                    mu: Some(self.mu),
                    xi_cl_sq: Some(xi_cl_sq),
                    ..Default::default()
                };
                let spec = if xi_cl_sq <= self.switch_at { &self.low } else { &self.high };
                evaluate(&args, spec)
            })
            .collect())
    }
}
