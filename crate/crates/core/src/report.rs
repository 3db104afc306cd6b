//! Structured pass/fail records with residuals and tolerances.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// One verified identity: name, sample count, worst residual, the tolerance
/// it was held to, and provenance notes (seed, path, family).
///
/// `pass` is equivalent to `max_residual <= tolerance`; exact checks use a
/// zero tolerance and report residual 0 on success or infinity on failure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub notes: String,
}

impl VerificationReport {
    pub fn numeric(
        check: impl Into<String>,
        samples: usize,
        max_residual: f64,
        tolerance: f64,
        notes: impl Into<String>,
    ) -> Self {
        VerificationReport {
            check: check.into(),
            samples,
            max_residual,
            tolerance,
            pass: max_residual <= tolerance,
            notes: notes.into(),
        }
    }

    pub fn exact(check: impl Into<String>, samples: usize, pass: bool, notes: impl Into<String>) -> Self {
        VerificationReport {
            check: check.into(),
            samples,
            max_residual: if pass { 0.0 } else { f64::INFINITY },
            tolerance: 0.0,
            pass,
            notes: notes.into(),
        }
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<52} samples={:<5} residual={:<10} tol={:<8} {}",
            if self.pass { "ok" } else { "FAIL" },
            self.check,
            self.samples,
            format_residual(self.max_residual),
            format_residual(self.tolerance),
            self.notes
        )
    }
}

fn format_residual(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.3e}")
    }
}

/// A batch of reports from one verification run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ReportSet {
    pub checks: Vec<VerificationReport>,
}

impl ReportSet {
    pub fn push(&mut self, r: VerificationReport) {
        self.checks.push(r);
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = VerificationReport>) {
        self.checks.extend(rs);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&VerificationReport> {
        self.checks.iter().find(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl fmt::Display for ReportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        write!(f, "{passed}/{} checks passed", self.checks.len())
    }
}

/// Numeric tolerances used by the verification kernels.
///
/// The identities themselves are exact mathematics; every threshold here is
/// an engineering choice for double-precision evaluation and is carried into
/// each report so runs are self-describing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToleranceProfile {
    /// Absolute tolerance for adaptive quadrature.
    pub quad_abs_tol: f64,
    /// Step for central-difference Jacobians.
    pub fd_step: f64,
    /// Residual tolerances keyed by check name; `residual_default` applies
    /// to checks without an explicit entry.
    pub residual: BTreeMap<String, f64>,
    pub residual_default: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        let mut residual = BTreeMap::new();
        let defaults: &[(&str, f64)] = &[
            // Groupoid axioms: the double family is algebraic, the spray and
            // blow-up families go through exp/log.
            ("axioms-spray", 1e-9),
            ("axioms-blowup", 1e-9),
            ("axioms-double", 1e-12),
            ("sigma-omega-inverse", 1e-10),
            ("volume-normalization", 1e-10),
            // Finite-difference limited checks.
            ("multiplicativity", 1e-6),
            ("poisson-map", 1e-7),
            ("poisson-lifted", 1e-6),
            ("anchor-poisson", 1e-7),
            // Hamiltonian structure.
            ("mutation-vs-flow", 1e-12),
            ("mutation-vs-flow-lifted", 1e-10),
            ("mutation-involution", 1e-10),
            ("conserved-quantity", 1e-11),
            ("flow-composition", 1e-12),
            ("hamiltonian-two-route", 1e-10),
            ("hamiltonian-li2", 1e-9),
            ("lift-intertwines-base", 1e-9),
            // Periodicity and separation.
            ("chart-periodicity", 1e-9),
            ("groupoid-periodicity", 1e-8),
            ("groupoid-separation", 1e-8),
            ("dilogarithm-identity", 1e-8),
            ("boundary-continuity", 1e-5),
        ];
        for (k, v) in defaults {
            residual.insert((*k).to_string(), *v);
        }
        ToleranceProfile {
            quad_abs_tol: 1e-11,
            fd_step: 1e-5,
            residual,
            residual_default: 1e-7,
        }
    }
}

impl ToleranceProfile {
    pub fn residual_for(&self, check: &str) -> f64 {
        self.residual
            .get(check)
            .copied()
            .unwrap_or(self.residual_default)
    }

    pub fn set_residual(&mut self, check: &str, value: f64) {
        self.residual.insert(check.to_string(), value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_json_round_trips() {
        let mut set = ReportSet::default();
        set.push(VerificationReport::numeric("demo", 10, 1e-9, 1e-7, "seed=1"));
        set.push(VerificationReport::exact("exact-demo", 4, true, "path=[1, 2]"));
        let back = ReportSet::from_json(&set.to_json()).unwrap();
        assert_eq!(back.checks.len(), 2);
        assert_eq!(back.checks[0].check, set.checks[0].check);
        assert_eq!(back.checks[0].max_residual, set.checks[0].max_residual);
        assert_eq!(back.checks[1].pass, true);
        assert!(set.all_pass());
    }

    #[test]
    fn pass_flag_matches_residual_rule() {
        let r = VerificationReport::numeric("x", 1, 2e-7, 1e-7, "");
        assert!(!r.pass);
        let r = VerificationReport::numeric("x", 1, 1e-8, 1e-7, "");
        assert!(r.pass);
    }

    #[test]
    fn profile_lookup_falls_back_to_default() {
        let p = ToleranceProfile::default();
        assert_eq!(p.residual_for("axioms-double"), 1e-12);
        assert_eq!(p.residual_for("unknown-check"), 1e-7);
    }
}
