//! Structured report documents with a fixed field order:
//! `command, inputs, results, verdicts, seed, version`.

use serde::Serialize;

use crate::identities::{IdentityRecord, Verdict};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictEntry {
    pub name: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<I, R> {
    pub command: String,
    pub inputs: I,
    pub results: Vec<R>,
    pub verdicts: Vec<VerdictEntry>,
    pub seed: Option<u64>,
    pub version: &'static str,
}

impl<I, R> Report<I, R> {
    pub fn new(command: &str, inputs: I, seed: Option<u64>) -> Self {
        Report {
            command: command.to_string(),
            inputs,
            results: Vec::new(),
            verdicts: Vec::new(),
            seed,
            version: VERSION,
        }
    }

    pub fn result(mut self, r: R) -> Self {
        self.results.push(r);
        self
    }

    pub fn verdict(mut self, name: impl Into<String>, verdict: Verdict) -> Self {
        self.verdicts.push(VerdictEntry {
            name: name.into(),
            verdict,
        });
        self
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.verdict == Verdict::Pass)
    }
}

impl<I> Report<I, IdentityRecord> {
    /// One result and one verdict per identity record.
    pub fn from_records(
        command: &str,
        inputs: I,
        seed: Option<u64>,
        records: Vec<IdentityRecord>,
    ) -> Self {
        let verdicts = records
            .iter()
            .map(|r| VerdictEntry {
                name: format!("{}/{}:{}", r.suite, r.name, mode_name(r)),
                verdict: r.verdict,
            })
            .collect();
        Report {
            results: records,
            verdicts,
            ..Report::new(command, inputs, seed)
        }
    }
}

fn mode_name(r: &IdentityRecord) -> &'static str {
    match r.mode {
        crate::identities::CheckMode::Exact => "exact",
        crate::identities::CheckMode::Symbolic => "symbolic",
        crate::identities::CheckMode::Numeric => "numeric",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identities::{run_suite, Suite, VerifyOptions};

    #[test]
    fn field_order_is_stable() {
        let r: Report<&str, u32> = Report::new("derive", "E[X]", None)
            .result(1)
            .verdict("mean-zero", Verdict::Pass);
        let text = serde_json::to_string(&r).unwrap();
        let keys = [
            "\"command\"",
            "\"inputs\"",
            "\"results\"",
            "\"verdicts\"",
            "\"seed\"",
            "\"version\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
        assert!(r.passed());
    }

    #[test]
    fn records_become_verdicts() {
        let recs = run_suite(Suite::Jacobi, &VerifyOptions::new(3, 1));
        let r = Report::from_records("verify", "jacobi", Some(1), recs);
        assert_eq!(r.verdicts.len(), r.results.len());
        assert_eq!(r.verdicts[0].name, "jacobi/jacobi-identity:exact");
        assert!(r.passed());
    }
}
