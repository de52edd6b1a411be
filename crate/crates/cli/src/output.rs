//! Rendering helpers shared by the subcommands.
//!
//! Numbers are formatted with `Display`, which prints the shortest string
//! that round-trips — no precision is lost and equal values print equally.

use serde::Serialize;

use crate::CliError;

/// Prints a report as pretty JSON on stdout.
pub fn emit_json<T: Serialize>(report: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::input(format!("cannot serialize report: {e}")))?;
    println!("{text}");
    Ok(())
}

/// `(a, b, c)` with shortest round-trip digits.
pub fn seq(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(", "))
}

/// The standard first line of every text report.
pub fn headline(version: &str, instance: &str) {
    println!("netmpc {version}  model {instance}");
}
