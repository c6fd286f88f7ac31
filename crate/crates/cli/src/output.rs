//! Output records, their serialization, and the published schema.

use std::io::Write;
use std::path::Path;

use cbs_core::{DualityReport, Params, QuadMethod, Regime};
use serde::Serialize;

use crate::inputs::{Format, ParamArgs, DEFAULT_OMEGA_HO, DEFAULT_OMEGA_R};
use crate::CliError;

/// Bumped whenever a column or key is renamed, removed or reordered.
pub const SCHEMA_VERSION: &str = "cbs/1";

/// Columns of a `point --format csv`, `sweep` or `fig2b` table, in order.
pub const TABLE_COLUMNS: [&str; 38] = [
    "delta",
    "omega_ho",
    "omega_R",
    "nbar",
    "theta",
    "mu",
    "chi",
    "zeta_sq",
    "xi_sq",
    "xi_cl_sq",
    "rho",
    "V",
    "V_err",
    "P",
    "P_err",
    "D_analytic",
    "duality_sum",
    "duality_sum_err",
    "duality_sum_analytic",
    "V_asymptotic",
    "I_A",
    "I_A_err",
    "I_B",
    "I_B_err",
    "INT_re",
    "INT_im",
    "INT_err",
    "method",
    "evaluations",
    "converged",
    "regime",
    "shallow_trap",
    "small_chi",
    "small_zeta",
    "small_xi",
    "classical_motion",
    "recoil_negligible",
    "status",
];

/// Top-level keys of the `point --format json` object, in order.
pub const POINT_KEYS: [&str; 24] = [
    "schema",
    "params",
    "V",
    "V_err",
    "P",
    "P_err",
    "D_analytic",
    "regime",
    "duality_sum",
    "duality_sum_err",
    "duality_sum_analytic",
    "V_asymptotic",
    "I_A",
    "I_A_err",
    "I_B",
    "I_B_err",
    "INT_re",
    "INT_im",
    "INT_err",
    "method",
    "evaluations",
    "converged",
    "flags",
    "derived",
];

/// Row status values.
pub const STATUS_OK: &str = "ok";
pub const STATUS_NOT_CONVERGED: &str = "not-converged";

/// One evaluated parameter point. Missing numbers (failed rows, θ at zero
/// temperature) are NaN in CSV and null in JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub delta: f64,
    pub omega_ho: f64,
    #[serde(rename = "omega_R")]
    pub omega_r: f64,
    pub nbar: f64,
    pub theta: f64,
    pub mu: f64,
    pub chi: f64,
    pub zeta_sq: f64,
    pub xi_sq: f64,
    pub xi_cl_sq: f64,
    pub rho: f64,
    #[serde(rename = "V")]
    pub visibility: f64,
    #[serde(rename = "V_err")]
    pub visibility_err: f64,
    #[serde(rename = "P")]
    pub predictability: f64,
    #[serde(rename = "P_err")]
    pub predictability_err: f64,
    #[serde(rename = "D_analytic")]
    pub distinguishability: f64,
    pub duality_sum: f64,
    pub duality_sum_err: f64,
    pub duality_sum_analytic: f64,
    #[serde(rename = "V_asymptotic")]
    pub visibility_asymptotic: f64,
    #[serde(rename = "I_A")]
    pub i_a: f64,
    #[serde(rename = "I_A_err")]
    pub i_a_err: f64,
    #[serde(rename = "I_B")]
    pub i_b: f64,
    #[serde(rename = "I_B_err")]
    pub i_b_err: f64,
    #[serde(rename = "INT_re")]
    pub int_re: f64,
    #[serde(rename = "INT_im")]
    pub int_im: f64,
    #[serde(rename = "INT_err")]
    pub int_err: f64,
    pub method: QuadMethod,
    pub evaluations: u64,
    pub converged: bool,
    pub regime: Option<Regime>,
    pub shallow_trap: bool,
    pub small_chi: bool,
    pub small_zeta: bool,
    pub small_xi: bool,
    pub classical_motion: bool,
    pub recoil_negligible: bool,
    pub status: String,
}

fn finite_or_nan(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::NAN
    }
}

impl TableRow {
    pub fn from_report(p: &Params, r: &DualityReport) -> Self {
        let d = &r.derived;
        Self {
            delta: p.delta,
            omega_ho: p.omega_ho,
            omega_r: p.omega_r,
            nbar: p.nbar(),
            theta: finite_or_nan(p.theta()),
            mu: p.mu,
            chi: d.chi,
            zeta_sq: d.zeta_sq,
            xi_sq: d.xi_sq,
            xi_cl_sq: finite_or_nan(d.xi_cl_sq),
            rho: d.rho,
            visibility: r.visibility,
            visibility_err: r.visibility_err,
            predictability: r.predictability,
            predictability_err: r.predictability_err,
            distinguishability: r.distinguishability,
            duality_sum: r.duality_sum,
            duality_sum_err: r.duality_sum_err,
            duality_sum_analytic: r.duality_sum_analytic,
            visibility_asymptotic: r.visibility_asymptotic,
            i_a: r.i_a,
            i_a_err: r.i_a_err,
            i_b: r.i_b,
            i_b_err: r.i_b_err,
            int_re: r.int_re,
            int_im: r.int_im,
            int_err: r.int_err,
            method: r.method,
            evaluations: r.evaluations,
            converged: r.converged,
            regime: Some(r.regime),
            shallow_trap: r.flags.shallow_trap,
            small_chi: r.flags.small_chi,
            small_zeta: r.flags.small_zeta,
            small_xi: r.flags.small_xi,
            classical_motion: r.flags.classical_motion,
            recoil_negligible: r.flags.recoil_negligible,
            status: if r.converged { STATUS_OK } else { STATUS_NOT_CONVERGED }.to_string(),
        }
    }

    /// A row for a point that could not be evaluated; only the inputs are
    /// filled in.
    pub fn failed(args: &ParamArgs, method: QuadMethod, message: &str) -> Self {
        let nan = f64::NAN;
        let or_nan = |x: Option<f64>| x.unwrap_or(nan);
        Self {
            delta: args.delta.unwrap_or(0.0),
            omega_ho: args.omega_ho.unwrap_or(DEFAULT_OMEGA_HO),
            omega_r: args.omega_r.unwrap_or(DEFAULT_OMEGA_R),
            nbar: or_nan(args.nbar),
            theta: or_nan(args.theta),
            mu: args.mu.unwrap_or(0.0),
            chi: nan,
            zeta_sq: nan,
            xi_sq: nan,
            xi_cl_sq: or_nan(args.xi_cl_sq.or(args.xi_cl.map(|x| x * x))),
            rho: nan,
            visibility: nan,
            visibility_err: nan,
            predictability: nan,
            predictability_err: nan,
            distinguishability: nan,
            duality_sum: nan,
            duality_sum_err: nan,
            duality_sum_analytic: nan,
            visibility_asymptotic: nan,
            i_a: nan,
            i_a_err: nan,
            i_b: nan,
            i_b_err: nan,
            int_re: nan,
            int_im: nan,
            int_err: nan,
            method,
            evaluations: 0,
            converged: false,
            regime: None,
            shallow_trap: false,
            small_chi: false,
            small_zeta: false,
            small_xi: false,
            classical_motion: false,
            recoil_negligible: false,
            status: format!("error: {message}"),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.status.starts_with("error")
    }
}

/// Input parameters as echoed in the point JSON.
#[derive(Debug, Clone, Serialize)]
pub struct ParamRecord {
    pub delta: f64,
    pub omega_ho: f64,
    #[serde(rename = "omega_R")]
    pub omega_r: f64,
    pub nbar: f64,
    /// Null at zero temperature.
    pub theta: Option<f64>,
    pub mu: f64,
}

impl From<&Params> for ParamRecord {
    fn from(p: &Params) -> Self {
        let theta = p.theta();
        Self {
            delta: p.delta,
            omega_ho: p.omega_ho,
            omega_r: p.omega_r,
            nbar: p.nbar(),
            theta: theta.is_finite().then_some(theta),
            mu: p.mu,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord<'a> {
    pub schema: &'static str,
    pub params: ParamRecord,
    #[serde(flatten)]
    pub report: &'a DualityReport,
}

pub fn point_json(p: &Params, report: &DualityReport) -> Result<Vec<u8>, CliError> {
    let record = PointRecord {
        schema: SCHEMA_VERSION,
        params: p.into(),
        report,
    };
    let mut out = serde_json::to_vec_pretty(&record).map_err(|e| CliError::Output(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// CSV with a header line, or one JSON object per line.
pub fn table(rows: &[TableRow], format: Format) -> Result<Vec<u8>, CliError> {
    let err = |e: &dyn std::fmt::Display| CliError::Output(e.to_string());
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            if rows.is_empty() {
                w.write_record(TABLE_COLUMNS).map_err(|e| err(&e))?;
            }
            for row in rows {
                w.serialize(row).map_err(|e| err(&e))?;
            }
            w.into_inner().map_err(|e| err(&e))
        }
        Format::Json => {
            let mut out = Vec::new();
            for row in rows {
                serde_json::to_writer(&mut out, row).map_err(|e| err(&e))?;
                out.push(b'\n');
            }
            Ok(out)
        }
    }
}

/// The machine-readable schema printed by `--schema`.
pub fn schema() -> serde_json::Value {
    serde_json::json!({
        "schema": SCHEMA_VERSION,
        "point": {
            "format": "json object",
            "keys": POINT_KEYS.as_slice(),
            "params": ["delta", "omega_ho", "omega_R", "nbar", "theta", "mu"],
            "flags": ["shallow_trap", "small_chi", "small_zeta", "small_xi", "classical_motion", "recoil_negligible"],
            "derived": ["gamma_sq", "chi", "zeta_sq", "xi_sq", "xi_cl_sq", "eta_sq", "rho"],
        },
        "table": {
            "format": "csv with header, or json lines",
            "columns": TABLE_COLUMNS.as_slice(),
            "row_order": "axis 1 slowest, axis 2 fastest",
            "missing": "NaN in csv, null in json",
            "status": [STATUS_OK, STATUS_NOT_CONVERGED, "error: <message>"],
        },
        "validate": {
            "format": "one line per check: PASS|FAIL suite/check measured=<x> limit=<y> detail",
        },
        "exit_codes": {"0": "ok", "1": "usage or parameter error", "2": "quadrature not converged", "3": "validation failure"},
    })
}

pub fn schema_bytes() -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&schema()).expect("static schema serializes");
    out.push(b'\n');
    out
}

pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cbs_core::observables::full_report;
    use cbs_core::QuadratureSpec;

    fn sample() -> (Params, DualityReport) {
        let p = Params::from_occupation(0.3, 1e-4, 0.0, 0.0, 0.5).unwrap();
        let spec = QuadratureSpec {
            order: 8,
            ..QuadratureSpec::default()
        };
        let r = full_report(&p, &spec).unwrap();
        (p, r)
    }

    #[test]
    fn csv_header_matches_published_columns() {
        let (p, r) = sample();
        let bytes = table(&[TableRow::from_report(&p, &r)], Format::Csv).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text.lines().next().unwrap(), TABLE_COLUMNS.join(","));
        let empty = String::from_utf8(table(&[], Format::Csv).unwrap()).unwrap();
        assert_eq!(empty.trim_end(), TABLE_COLUMNS.join(","));
    }

    #[test]
    fn json_keys_match_published_lists() {
        let (p, r) = sample();
        let point: serde_json::Value = serde_json::from_slice(&point_json(&p, &r).unwrap()).unwrap();
        let keys: Vec<_> = point.as_object().unwrap().keys().cloned().collect();
        let mut expected: Vec<_> = POINT_KEYS.iter().map(|s| s.to_string()).collect();
        let mut got = keys.clone();
        expected.sort();
        got.sort();
        assert_eq!(got, expected);
        // θ is infinite at zero temperature and must not break the JSON.
        assert!(point["params"]["theta"].is_null());

        let line = table(&[TableRow::from_report(&p, &r)], Format::Json).unwrap();
        let row: serde_json::Value = serde_json::from_slice(&line).unwrap();
        let mut got: Vec<_> = row.as_object().unwrap().keys().cloned().collect();
        let mut expected: Vec<_> = TABLE_COLUMNS.iter().map(|s| s.to_string()).collect();
        got.sort();
        expected.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn failed_rows_serialize() {
        let args = ParamArgs {
            mu: Some(3.0),
            ..Default::default()
        };
        let row = TableRow::failed(&args, QuadMethod::Adaptive, "mu out of range, really");
        assert!(row.is_failed());
        let csv = String::from_utf8(table(&[row.clone()], Format::Csv).unwrap()).unwrap();
        assert!(csv.contains("\"error: mu out of range, really\""), "{csv}");
        let json = String::from_utf8(table(&[row], Format::Json).unwrap()).unwrap();
        assert!(json.contains("\"V\":null"));
    }
}
