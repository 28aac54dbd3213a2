use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use hypersim::machine::RunOutcome;
use hypersim::{parse, Machine};
use serde::Serialize;
use serde_json::{json, Value};

use crate::Format;

pub const HALTED: u8 = 0;
pub const PROVEN: u8 = 2;
pub const BUDGET: u8 = 3;

/// What a subcommand produced: a JSON document, its text rendering and the
/// exit status.
pub struct Report {
    pub json: Value,
    pub text: String,
    pub code: u8,
}

impl Report {
    pub fn new(json: Value, text: impl Into<String>) -> Self {
        Report {
            json,
            text: text.into(),
            code: 0,
        }
    }

    /// A serialisable value whose text form is the pretty JSON itself.
    pub fn value<T: Serialize>(v: &T) -> Self {
        let json = serde_json::to_value(v).expect("reports serialise");
        let text = serde_json::to_string_pretty(&json).expect("reports serialise");
        Report::new(json, text)
    }

    pub fn with_code(mut self, code: u8) -> Self {
        self.code = code;
        self
    }

    pub fn print(&self, format: Format) {
        let body = match format {
            Format::Text => self.text.trim_end().to_string(),
            Format::Json => serde_json::to_string_pretty(&self.json).expect("reports serialise"),
        };
        // A closed pipe (`| head`) is not an error worth a panic.
        let _ = writeln!(std::io::stdout().lock(), "{body}");
    }
}

/// A configuration, parse or run error; always exit 1.
#[derive(Debug)]
pub struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    pub fn config(message: impl Display) -> Self {
        Failure {
            kind: "config",
            message: message.to_string(),
        }
    }

    pub fn run(message: impl Display) -> Self {
        Failure {
            kind: "run",
            message: message.to_string(),
        }
    }

    pub fn print(&self, format: Format) {
        match format {
            Format::Text => eprintln!("error ({}): {}", self.kind, self.message),
            Format::Json => println!(
                "{}",
                serde_json::to_string_pretty(&json!({"error": self.kind, "message": self.message})).unwrap()
            ),
        }
    }
}

/// Exit status for a plain run outcome.
pub fn outcome_code(o: &RunOutcome) -> u8 {
    match o {
        RunOutcome::Halted { .. } => HALTED,
        RunOutcome::NonHaltingProven { .. } => PROVEN,
        RunOutcome::BudgetExceeded { .. } => BUDGET,
    }
}

/// Bundled figures may be named without their directory.
fn resolve(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../figures");
    for candidate in [Path::new("figures").join(path), bundled.join(path)] {
        if candidate.exists() {
            return candidate;
        }
    }
    path.to_path_buf()
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    let p = resolve(path);
    std::fs::read_to_string(&p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))
}

pub fn load_machine(path: &Path) -> Result<Machine, Failure> {
    let text = read_text(path)?;
    parse(&text).map_err(|e| Failure::config(format!("{}:\n{e}", path.display())))
}

/// `"1,2,5"` or `"3..7"` (half open), comma-joined.
pub fn parse_list(text: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad range start in {part:?}"))?;
            let b: u64 = b.trim().parse().map_err(|_| format!("bad range end in {part:?}"))?;
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| format!("not a number: {part:?}"))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list("1, 2,5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_list("0..3,9").unwrap(), vec![0, 1, 2, 9]);
        assert_eq!(parse_list("").unwrap(), Vec::<u64>::new());
        assert!(parse_list("x").is_err());
    }
}
