//! Parameter grids evaluated row by row.

use std::str::FromStr;

use cbs_core::observables::full_report;
use cbs_core::QuadratureSpec;
use rayon::prelude::*;

use crate::inputs::{ParamArgs, SweepParam};
use crate::output::TableRow;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// `name:min:max:count[:lin|log]`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn new(param: SweepParam, min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Self, String> {
        if count < 2 {
            return Err(format!("axis {} needs count >= 2, got {count}", param.name()));
        }
        if !min.is_finite() || !max.is_finite() {
            return Err(format!("axis {} bounds must be finite", param.name()));
        }
        if spacing == Spacing::Log && !(min > 0.0 && max > 0.0) {
            return Err(format!("axis {} uses log spacing, which needs positive bounds", param.name()));
        }
        Ok(Self {
            param,
            min,
            max,
            count,
            spacing,
        })
    }

    /// Grid values with both end points hit exactly.
    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == self.count - 1 {
                    return self.max;
                }
                let f = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * f,
                    Spacing::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * f).exp(),
                }
            })
            .collect()
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(format!("expected name:min:max:count[:lin|log], got '{s}'"));
        }
        let param: SweepParam = parts[0].parse()?;
        let num = |x: &str| x.parse::<f64>().map_err(|e| format!("bad bound '{x}': {e}"));
        let count = parts[3]
            .parse::<usize>()
            .map_err(|e| format!("bad count '{}': {e}", parts[3]))?;
        let spacing = match parts.get(4).copied() {
            None | Some("lin") | Some("linear") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(other) => return Err(format!("spacing must be lin or log, got '{other}'")),
        };
        Axis::new(param, num(parts[1])?, num(parts[2])?, count, spacing)
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    pub base: ParamArgs,
    pub quad: QuadratureSpec,
    /// Pick the tensor order per row from |δ| instead of `quad.order`.
    pub auto_order: bool,
}

impl SweepSpec {
    pub fn new(axes: Vec<Axis>, base: ParamArgs, quad: QuadratureSpec) -> Result<Self, CliError> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(CliError::Usage("a sweep takes one or two axes".into()));
        }
        if axes.len() == 2 {
            let (a, b) = (axes[0].param, axes[1].param);
            if a == b {
                return Err(CliError::Usage(format!("both axes sweep {}", a.name())));
            }
            if a.is_thermal() && b.is_thermal() {
                return Err(CliError::Usage(format!(
                    "axes {} and {} both set the temperature",
                    a.name(),
                    b.name()
                )));
            }
        }
        quad.validate()?;
        Ok(Self {
            axes,
            base,
            quad,
            auto_order: false,
        })
    }

    /// Inputs for every grid point, the last axis varying fastest.
    pub fn points(&self) -> Vec<ParamArgs> {
        let mut points = vec![self.base.clone()];
        for axis in &self.axes {
            let values = axis.values();
            points = points
                .iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.set(axis.param, v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// Evaluates all rows in parallel; the result is in grid order.
    pub fn run(&self) -> Vec<TableRow> {
        self.points()
            .par_iter()
            .map(|args| {
                if self.auto_order {
                    let quad = QuadratureSpec {
                        order: tensor_order_for(args.delta.unwrap_or(0.0)),
                        ..self.quad.clone()
                    };
                    evaluate(args, &quad)
                } else {
                    evaluate(args, &self.quad)
                }
            })
            .collect()
    }
}

/// Gauss–Laguerre points per axis that keep the e^{iδs} oscillation
/// resolved to about 10⁻⁸ relative on the separable four-fold integral.
pub fn tensor_order_for(delta: f64) -> usize {
    match delta.abs() {
        d if d <= 1.0 => 48,
        d if d <= 2.0 => 96,
        _ => 128,
    }
}

/// One row; parameter and quadrature failures are reported in the row.
pub fn evaluate(args: &ParamArgs, quad: &QuadratureSpec) -> TableRow {
    let p = match args.resolve() {
        Ok(p) => p,
        Err(e) => return TableRow::failed(args, quad.method, &e.to_string()),
    };
    match full_report(&p, quad) {
        Ok(r) => TableRow::from_report(&p, &r),
        Err(e) => TableRow::failed(args, quad.method, &e.to_string()),
    }
}
