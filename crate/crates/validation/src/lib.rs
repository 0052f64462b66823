//! Pass/fail bookkeeping for the acceptance run: each criterion collects
//! named checks and prints one line.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};

#[derive(Debug)]
pub struct Verdict {
    pub id: u32,
    pub title: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Verdict {
    pub fn new(id: u32, title: &'static str) -> Self {
        Verdict { id, title, failures: Vec::new(), notes: Vec::new() }
    }

    /// Records a failure described by `what` unless `ok`.
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn fail(&mut self, what: impl Into<String>) {
        self.failures.push(what.into());
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} {status}  {}", self.id, self.title)?;
        let mut parts = self.failures.clone();
        parts.extend(self.notes.iter().cloned());
        if !parts.is_empty() {
            write!(f, ": {}", parts.join("; "))?;
        }
        Ok(())
    }
}

/// Runs one criterion. Errors and panics count as failures so that the
/// remaining criteria still report.
pub fn run<E: fmt::Display>(id: u32, title: &'static str, body: impl FnOnce(&mut Verdict) -> Result<(), E>) -> Verdict {
    let mut v = Verdict::new(id, title);
    match catch_unwind(AssertUnwindSafe(|| body(&mut v))) {
        Ok(Ok(())) => {}
        Ok(Err(e)) => v.fail(format!("error: {e}")),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            v.fail(format!("panic: {msg}"));
        }
    }
    v
}
