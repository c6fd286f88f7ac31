//! Flag groups shared by the subcommands and their resolution into
//! [`Params`] and [`QuadratureSpec`].

use std::path::PathBuf;

use cbs_core::{Params, QuadMethod, QuadratureSpec, Thermal};
use clap::{Args, ValueEnum};

use crate::config::Config;
use crate::CliError;

/// Trap frequency used when none is given.
pub const DEFAULT_OMEGA_HO: f64 = 1e-4;
/// Recoil frequency used when none is given.
pub const DEFAULT_OMEGA_R: f64 = 1e-3;

const THERMAL_KEYS: [&str; 4] = ["nbar", "theta", "xi-cl-sq", "xi-cl"];

/// Physical parameters, all in units of the natural linewidth.
///
/// The thermal state is given by at most one of `--nbar`, `--theta`,
/// `--xi-cl-sq`, `--xi-cl`; without any the traps are in their ground state.
/// The last two hold δ, ω_R and ω_ho fixed and solve for the temperature.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct ParamArgs {
    /// Probe detuning δ.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Trap frequency ω_ho [default: 1e-4].
    #[arg(long)]
    pub omega_ho: Option<f64>,
    /// Recoil frequency ω_R [default: 1e-3].
    #[arg(long = "omega-r")]
    pub omega_r: Option<f64>,
    /// Mean phonon number.
    #[arg(long)]
    pub nbar: Option<f64>,
    /// Scaled inverse temperature ħω_ho/k_BT.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Cosine between the inter-atomic axis and the probe direction.
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Thermal trap parameter ξ² to reach by adjusting the temperature.
    #[arg(long)]
    pub xi_cl_sq: Option<f64>,
    /// Square root of --xi-cl-sq.
    #[arg(long)]
    pub xi_cl: Option<f64>,
}

impl ParamArgs {
    fn has_thermal(&self) -> bool {
        self.nbar.is_some() || self.theta.is_some() || self.xi_cl_sq.is_some() || self.xi_cl.is_some()
    }

    fn clear_thermal(&mut self) {
        self.nbar = None;
        self.theta = None;
        self.xi_cl_sq = None;
        self.xi_cl = None;
    }

    /// Takes unset values from `cfg`. The thermal keys form one group: an
    /// explicit thermal flag shadows all of them.
    pub fn merge_config(&mut self, cfg: &mut Config) -> Result<(), CliError> {
        cfg.fill(&mut self.delta, "delta")?;
        cfg.fill(&mut self.omega_ho, "omega-ho")?;
        cfg.fill(&mut self.omega_r, "omega-r")?;
        cfg.fill(&mut self.mu, "mu")?;
        if self.has_thermal() {
            for key in THERMAL_KEYS {
                cfg.discard(key);
            }
        } else {
            cfg.fill(&mut self.nbar, "nbar")?;
            cfg.fill(&mut self.theta, "theta")?;
            cfg.fill(&mut self.xi_cl_sq, "xi-cl-sq")?;
            cfg.fill(&mut self.xi_cl, "xi-cl")?;
        }
        Ok(())
    }

    /// Sets one sweepable parameter, replacing any other thermal setting.
    pub fn set(&mut self, name: SweepParam, value: f64) {
        match name {
            SweepParam::Delta => self.delta = Some(value),
            SweepParam::OmegaHo => self.omega_ho = Some(value),
            SweepParam::OmegaR => self.omega_r = Some(value),
            SweepParam::Mu => self.mu = Some(value),
            SweepParam::Nbar => {
                self.clear_thermal();
                self.nbar = Some(value);
            }
            SweepParam::Theta => {
                self.clear_thermal();
                self.theta = Some(value);
            }
            SweepParam::XiClSq => {
                self.clear_thermal();
                self.xi_cl_sq = Some(value);
            }
        }
    }

    pub fn resolve(&self) -> Result<Params, CliError> {
        let delta = self.delta.unwrap_or(0.0);
        let omega_ho = self.omega_ho.unwrap_or(DEFAULT_OMEGA_HO);
        let omega_r = self.omega_r.unwrap_or(DEFAULT_OMEGA_R);
        let mu = self.mu.unwrap_or(0.0);
        let xi_sq = match (self.xi_cl_sq, self.xi_cl) {
            (Some(_), Some(_)) => return Err(conflict("--xi-cl-sq", "--xi-cl")),
            (Some(x), None) => Some(x),
            (None, Some(x)) if x >= 0.0 => Some(x * x),
            (None, Some(x)) => return Err(CliError::Usage(format!("--xi-cl must be non-negative, got {x}"))),
            (None, None) => None,
        };
        let p = match (self.nbar, self.theta, xi_sq) {
            (None, None, None) => Params::zero_temperature(delta, omega_ho, omega_r, mu)?,
            (Some(n), None, None) => Params::new(delta, omega_ho, omega_r, Thermal::Occupation(n), mu)?,
            (None, Some(t), None) => {
                Params::new(delta, omega_ho, omega_r, Thermal::InverseTemperature(t), mu)?
            }
            (None, None, Some(x)) => Params::with_thermal_trap_parameter(delta, omega_ho, omega_r, mu, x)?,
            _ => return Err(conflict("--nbar, --theta", "--xi-cl-sq/--xi-cl")),
        };
        Ok(p)
    }
}

fn conflict(a: &str, b: &str) -> CliError {
    CliError::Usage(format!("the thermal state is over-specified: give only one of {a} and {b}"))
}

/// Quadrature overrides; unset fields keep the subcommand's defaults.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct QuadArgs {
    /// tensor-laguerre, adaptive or monte-carlo.
    #[arg(long)]
    pub quad_method: Option<QuadMethod>,
    /// Gauss–Laguerre points per axis.
    #[arg(long)]
    pub quad_order: Option<usize>,
    /// Target relative error for the adaptive rule.
    #[arg(long)]
    pub quad_target: Option<f64>,
    /// Region budget for the adaptive rule.
    #[arg(long)]
    pub max_subdivisions: Option<usize>,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Monte Carlo seed (also seeds the validation suites).
    #[arg(long)]
    pub seed: Option<u64>,
}

impl QuadArgs {
    pub fn merge_config(&mut self, cfg: &mut Config) -> Result<(), CliError> {
        cfg.fill(&mut self.quad_method, "quad-method")?;
        cfg.fill(&mut self.quad_order, "quad-order")?;
        cfg.fill(&mut self.quad_target, "quad-target")?;
        cfg.fill(&mut self.max_subdivisions, "max-subdivisions")?;
        cfg.fill(&mut self.mc_samples, "mc-samples")?;
        cfg.fill(&mut self.seed, "seed")?;
        Ok(())
    }

    pub fn spec(&self, base: QuadratureSpec) -> Result<QuadratureSpec, CliError> {
        let spec = QuadratureSpec {
            method: self.quad_method.unwrap_or(base.method),
            order: self.quad_order.unwrap_or(base.order),
            samples: self.mc_samples.unwrap_or(base.samples),
            seed: self.seed.unwrap_or(base.seed),
            target_rel: self.quad_target.unwrap_or(base.target_rel),
            max_subdivisions: self.max_subdivisions.unwrap_or(base.max_subdivisions),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

/// Flags every subcommand accepts.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Common {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    /// Fock-space cutoff for the oracle checks (default: chosen per case).
    #[arg(long)]
    pub fock_dim: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Print the output schema and exit.
    #[arg(long)]
    pub schema: bool,
    /// key = value file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    /// Merges the `--config` file, if any, under the explicit flags.
    pub fn apply_config(&mut self) -> Result<(), CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        let mut cfg = Config::load(&path)?;
        self.params.merge_config(&mut cfg)?;
        self.quad.merge_config(&mut cfg)?;
        cfg.fill(&mut self.fock_dim, "fock-dim")?;
        cfg.fill(&mut self.out, "out")?;
        cfg.fill(&mut self.format, "format")?;
        cfg.finish()
    }
}

/// The parameters a sweep axis may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    Delta,
    OmegaHo,
    OmegaR,
    Nbar,
    Theta,
    Mu,
    XiClSq,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::Delta,
        SweepParam::OmegaHo,
        SweepParam::OmegaR,
        SweepParam::Nbar,
        SweepParam::Theta,
        SweepParam::Mu,
        SweepParam::XiClSq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Delta => "delta",
            SweepParam::OmegaHo => "omega_ho",
            SweepParam::OmegaR => "omega_R",
            SweepParam::Nbar => "nbar",
            SweepParam::Theta => "theta",
            SweepParam::Mu => "mu",
            SweepParam::XiClSq => "xi_cl_sq",
        }
    }

    pub fn is_thermal(self) -> bool {
        matches!(self, SweepParam::Nbar | SweepParam::Theta | SweepParam::XiClSq)
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.replace('-', "_");
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(&key))
            .ok_or_else(|| {
                let names: Vec<_> = SweepParam::ALL.iter().map(|p| p.name()).collect();
                format!("unknown parameter '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_ground_state() {
        let p = ParamArgs::default().resolve().unwrap();
        assert_eq!((p.delta, p.omega_ho, p.omega_r, p.mu), (0.0, 1e-4, 1e-3, 0.0));
        assert!(p.is_zero_temperature());
    }

    #[test]
    fn thermal_trap_parameter_is_back_solved() {
        let args = ParamArgs {
            delta: Some(0.5),
            xi_cl: Some(0.1),
            ..Default::default()
        };
        let p = args.resolve().unwrap();
        let xi_sq = p.coth_half_theta() * p.zeta_sq();
        assert!((xi_sq - 0.01).abs() < 1e-15);
        assert_eq!((p.omega_r, p.omega_ho), (DEFAULT_OMEGA_R, DEFAULT_OMEGA_HO));
    }

    #[test]
    fn over_specified_thermal_state_is_rejected() {
        let args = ParamArgs {
            nbar: Some(1.0),
            theta: Some(0.1),
            ..Default::default()
        };
        assert!(matches!(args.resolve(), Err(CliError::Usage(_))));
        let args = ParamArgs {
            xi_cl: Some(0.1),
            xi_cl_sq: Some(0.01),
            ..Default::default()
        };
        assert!(args.resolve().is_err());
    }

    #[test]
    fn set_replaces_thermal_group() {
        let mut args = ParamArgs {
            nbar: Some(3.0),
            ..Default::default()
        };
        args.set(SweepParam::Theta, 0.2);
        assert_eq!((args.nbar, args.theta), (None, Some(0.2)));
    }

    #[test]
    fn config_thermal_group_is_shadowed() {
        let mut cfg = Config::parse("c", "nbar = 2\ndelta = 0.4\nmu = 1").unwrap();
        let mut args = ParamArgs {
            theta: Some(0.1),
            mu: Some(0.0),
            ..Default::default()
        };
        args.merge_config(&mut cfg).unwrap();
        assert!(cfg.is_empty());
        assert_eq!((args.nbar, args.theta, args.delta, args.mu), (None, Some(0.1), Some(0.4), Some(0.0)));
    }

    #[test]
    fn sweep_param_names() {
        assert_eq!("omega_r".parse::<SweepParam>(), Ok(SweepParam::OmegaR));
        assert_eq!("xi-cl-sq".parse::<SweepParam>(), Ok(SweepParam::XiClSq));
        assert!("gamma".parse::<SweepParam>().is_err());
    }
}
