use std::fmt::Write as _;

use crate::{Error, Result};

/// One value per mesh vertex, with a label and an optional exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
    pub label: String,
    pub p: Option<f64>,
}

impl NodalField {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at vertex {i}")));
        }
        Ok(Self {
            values,
            label: label.into(),
            p: None,
        })
    }

    pub fn constant(n: usize, value: f64, label: impl Into<String>) -> Self {
        Self {
            values: vec![value; n],
            label: label.into(),
            p: None,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `field N`, then one value per line, then `p <value> label <label>`.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(26 * self.values.len() + 64);
        let _ = writeln!(out, "field {}", self.values.len());
        for v in &self.values {
            let _ = writeln!(out, "{v:.17e}");
        }
        let p = self.p.map_or("none".to_string(), |p| format!("{p}"));
        let label = if self.label.is_empty() { "-" } else { &self.label };
        let _ = writeln!(out, "p {p} label {label}");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let head = lines.next().ok_or_else(|| Error::Format("empty field file".into()))?;
        let n: usize = head
            .strip_prefix("field ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::Format(format!("bad field header `{head}`")))?;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| Error::Format("truncated field file".into()))?;
            values.push(line.parse().map_err(|_| Error::Format(format!("bad value `{line}`")))?);
        }
        let meta = lines.next().ok_or_else(|| Error::Format("missing metadata line".into()))?;
        let parts: Vec<&str> = meta.splitn(4, ' ').collect();
        if parts.len() != 4 || parts[0] != "p" || parts[2] != "label" {
            return Err(Error::Format(format!("bad metadata line `{meta}`")));
        }
        let p = match parts[1] {
            "none" => None,
            s => Some(s.parse().map_err(|_| Error::Format(format!("bad exponent `{s}`")))?),
        };
        let label = if parts[3] == "-" { String::new() } else { parts[3].to_string() };
        let mut f = NodalField::new(values, label)?;
        f.p = p;
        Ok(f)
    }
}
