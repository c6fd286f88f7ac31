//! Reporting helpers for the acceptance run.

use std::fmt;
use std::time::Duration;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub elapsed: Duration,
    /// Wall-time limit, when the criterion states one.
    pub budget: Option<Duration>,
    /// One line per sub-check.
    pub details: Vec<String>,
}

impl Outcome {
    pub fn new(id: &'static str, name: &'static str, budget_secs: Option<u64>) -> Self {
        Self {
            id,
            name,
            passed: true,
            elapsed: Duration::ZERO,
            budget: budget_secs.map(Duration::from_secs),
            details: Vec::new(),
        }
    }

    /// Records a sub-check; any failing sub-check fails the criterion.
    pub fn check(&mut self, label: &str, passed: bool, measured: f64, limit: f64, note: impl fmt::Display) {
        self.passed &= passed;
        let tag = if passed { "ok  " } else { "FAIL" };
        self.details
            .push(format!("{tag} {label}: measured={measured:.4e} limit={limit:.4e} {note}"));
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.details.push(format!("     {}", line.into()));
    }

    /// Closes the criterion with its wall time, which must fit the budget.
    pub fn finish(&mut self, elapsed: Duration) {
        self.elapsed = elapsed;
        if let Some(budget) = self.budget {
            let (secs, budget) = (elapsed.as_secs_f64(), budget.as_secs_f64());
            self.check("runtime", secs < budget, secs, budget, "s");
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.details {
            writeln!(f, "    {d}")?;
        }
        write!(
            f,
            "{} {} {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Least-squares slope of y against x.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
