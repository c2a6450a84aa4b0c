//! Itemized pass/fail records used by validators and certificates.

use std::fmt;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

/// An ordered list of named checks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub items: Vec<CheckItem>,
}

pub type ValidationReport = Certificate;

impl Certificate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pass(&mut self, name: impl Into<String>) {
        self.items.push(CheckItem {
            name: name.into(),
            passed: true,
            witness: None,
        });
    }

    pub fn fail(&mut self, name: impl Into<String>, witness: impl Into<String>) {
        self.items.push(CheckItem {
            name: name.into(),
            passed: false,
            witness: Some(witness.into()),
        });
    }

    /// Record `name` as passing unless `witness` is given.
    pub fn record(&mut self, name: impl Into<String>, witness: Option<String>) {
        match witness {
            None => self.pass(name),
            Some(w) => self.fail(name, w),
        }
    }

    pub fn extend(&mut self, prefix: &str, other: Certificate) {
        for mut item in other.items {
            item.name = format!("{}.{}", prefix, item.name);
            self.items.push(item);
        }
    }

    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckItem> {
        self.items.iter().find(|i| !i.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            write!(f, "{} {}", if item.passed { "ok  " } else { "FAIL" }, item.name)?;
            if let Some(w) = &item.witness {
                write!(f, ": {}", w)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
