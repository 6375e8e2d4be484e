//! Report accumulation and serialization (JSON plus CSV tables).

use std::collections::BTreeMap;

use serde::Serialize;

use super::audit::AuditReport;
use super::convergence::StudyReport;

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceCase {
    pub mesh: String,
    pub cells: usize,
    pub k: usize,
    pub m: usize,
    pub coefficient: String,
    pub source: String,
    pub gap: f64,
    pub mhm_residual: f64,
    pub cond_moment_max: f64,
    pub cond_gram_max: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Report {
    pub equivalence: Vec<EquivalenceCase>,
    pub audits: Vec<AuditReport>,
    pub studies: Vec<StudyReport>,
    /// Wall-clock timings in milliseconds, keyed by stage.
    pub timings_ms: BTreeMap<String, f64>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV table of the studies: `H,k,m,error,slope` with the fitted slope
    /// repeated on each row of its study.
    pub fn studies_csv(&self) -> String {
        let mut out = String::from("H,k,m,error,slope\n");
        for s in &self.studies {
            let slope = s.slope.map(|v| v.to_string()).unwrap_or_default();
            for p in &s.points {
                out.push_str(&format!("{},{},{},{:.17e},{}\n", p.h, s.k, s.m, p.error, slope));
            }
        }
        out
    }

    /// True when every recorded audit passed.
    pub fn all_audits_pass(&self) -> bool {
        self.audits.iter().all(|a| a.pass)
    }
}
