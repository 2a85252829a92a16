//! Runs named checks and prints one PASS/FAIL line for each.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

#[derive(Default)]
pub struct Report {
    outcomes: Vec<(String, bool)>,
}

impl Report {
    /// `check` returns a short summary on success or the reason for failure.
    /// A panic counts as a failure.
    pub fn run(&mut self, name: &str, check: impl FnOnce() -> Result<String, String>) {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into())));
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} {name}: {detail} [{secs:.2}s]");
        self.outcomes.push((name.into(), outcome.is_ok()));
    }

    pub fn failures(&self) -> Vec<&str> {
        self.outcomes.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect()
    }

    /// Prints the tally and exits non-zero if anything failed.
    pub fn finish(self) {
        let failed = self.failures();
        println!("acceptance: {} passed, {} failed", self.outcomes.len() - failed.len(), failed.len());
        if !failed.is_empty() {
            std::process::exit(1);
        }
    }
}

/// Turns a condition into a check result.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}
