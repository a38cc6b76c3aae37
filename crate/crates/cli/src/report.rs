use std::collections::BTreeMap;
use std::io::IsTerminal;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use susyfin::report::Check;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub results: Value,
    /// Seconds; `null` unless timing was requested, so that reports stay
    /// byte-identical across runs.
    pub wall_time: Option<f64>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            schema: SCHEMA,
            command: command.to_string(),
            parameters: BTreeMap::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            results: Value::Null,
            wall_time: None,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters
            .insert(key.to_string(), serde_json::to_value(value).expect("serializable parameter"));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(path, text)
    }

    pub fn print_checks(&self) {
        let color = std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal();
        for c in &self.checks {
            let tag = match (c.pass, color) {
                (true, true) => "\x1b[32mPASS\x1b[0m",
                (false, true) => "\x1b[31mFAIL\x1b[0m",
                (true, false) => "PASS",
                (false, false) => "FAIL",
            };
            let detail = c.detail.as_deref().map(|d| format!("  ({d})")).unwrap_or_default();
            println!("{tag} {:<36} {:>14.6e} tol {:>12.4e}{detail}", c.name, c.measured, c.tolerance);
        }
    }
}

/// 17 significant digits, no locale.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
