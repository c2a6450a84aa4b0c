//! The report every subcommand emits, in JSON or plain text.

use std::collections::BTreeMap;
use std::fmt::Write;

use qvhs::report::{Certificate, CheckItem};
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA: &str = "qvhs-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Error => 2,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub inputs: Vec<String>,
    pub flags: BTreeMap<String, String>,
    pub status: Status,
    pub exit_code: i32,
    pub checks: Vec<CheckItem>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub payload: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn new(command: &str, inputs: Vec<String>, flags: BTreeMap<String, String>) -> Self {
        Report {
            schema: SCHEMA,
            command: command.to_string(),
            inputs,
            flags,
            status: Status::Pass,
            exit_code: 0,
            checks: Vec::new(),
            payload: BTreeMap::new(),
            error: None,
        }
    }

    pub fn finish(mut self, checks: Certificate, payload: BTreeMap<String, Value>) -> Self {
        self.status = if checks.passed() { Status::Pass } else { Status::Fail };
        self.exit_code = self.status.exit_code();
        self.checks = checks.items;
        self.payload = payload;
        self
    }

    pub fn input_error(mut self, message: String) -> Self {
        self.status = Status::Error;
        self.exit_code = Status::Error.exit_code();
        self.error = Some(message);
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.schema);
        let mut echo = vec![self.command.clone()];
        echo.extend(self.inputs.iter().cloned());
        echo.extend(self.flags.iter().map(|(k, v)| format!("--{} {}", k, v)));
        let _ = writeln!(out, "command: {}", echo.join(" "));
        let status = serde_json::to_value(self.status).expect("status serializes");
        let _ = writeln!(out, "status: {} (exit {})", status.as_str().unwrap_or("?"), self.exit_code);
        if let Some(e) = &self.error {
            let _ = writeln!(out, "error: {}", e);
        }
        let checks = Certificate { items: self.checks.clone() };
        out.push_str(&checks.to_string());
        for (name, value) in &self.payload {
            match value {
                Value::String(s) => {
                    let _ = writeln!(out, "{}: {}", name, s);
                }
                Value::Array(items) if items.iter().all(Value::is_string) => {
                    let _ = writeln!(out, "{}:", name);
                    for item in items {
                        let _ = writeln!(out, "  {}", item.as_str().unwrap_or_default());
                    }
                }
                other => {
                    let pretty = serde_json::to_string_pretty(other).expect("payload serializes");
                    let _ = writeln!(out, "{}:\n{}", name, pretty);
                }
            }
        }
        out
    }
}
