//! CSV and JSON rendering shared by every command.
//!
//! CSV files start with `#` metadata lines, then a mandatory header row, then
//! data rows, then a trailing `# summary=` line. The only line that varies
//! between identical runs is `# generated_at_unix=`; JSON keeps the same
//! field under a top-level `header` object.

use serde_json::{json, Map, Value};

use super::config::{ExperimentConfig, OutputFormat};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(x) => json!(x),
            Cell::Text(s) => json!(s),
        }
    }
}

/// `.` decimal separator, no grouping, scientific notation below `1e-4` in
/// magnitude.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Value,
}

impl Report {
    pub fn render(&self, config: &ExperimentConfig, generated_at_unix: u64) -> String {
        match config.format {
            OutputFormat::Csv => self.render_csv(config, generated_at_unix),
            OutputFormat::Json => self.render_json(config, generated_at_unix),
        }
    }

    fn render_csv(&self, config: &ExperimentConfig, generated_at_unix: u64) -> String {
        let mut out = String::new();
        out.push_str(&format!("# faultq {VERSION} {}\n", config.command));
        out.push_str(&format!("# generated_at_unix={generated_at_unix}\n"));
        out.push_str(&format!("# seed={}\n", config.seed));
        out.push_str(&format!("# config_hash={}\n", config.hash()));
        out.push_str(&format!("# config={}\n", config.echo()));
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out.push_str(&format!("# summary={}\n", self.summary));
        out
    }

    fn render_json(&self, config: &ExperimentConfig, generated_at_unix: u64) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> =
                    self.columns.iter().zip(row).map(|(c, cell)| (c.to_string(), cell.json())).collect();
                Value::Object(obj)
            })
            .collect();
        let doc = json!({
            "header": { "generated_at_unix": generated_at_unix },
            "version": VERSION,
            "command": config.command.to_string(),
            "seed": config.seed,
            "config": config.echo(),
            "config_hash": config.hash(),
            "rows": rows,
            "summary": self.summary,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Drops the timestamp so two payloads can be compared byte for byte.
pub fn strip_timestamp(payload: &str) -> String {
    if payload.trim_start().starts_with('{') {
        let mut doc: Value = match serde_json::from_str(payload) {
            Ok(doc) => doc,
            Err(_) => return payload.to_string(),
        };
        if let Some(obj) = doc.as_object_mut() {
            obj.remove("header");
        }
        return serde_json::to_string_pretty(&doc).expect("value serializes");
    }
    payload.lines().filter(|l| !l.starts_with("# generated_at_unix=")).map(|l| format!("{l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{CommandKind, Settings};

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(0.25), "0.25");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(12345.5), "12345.5");
        assert_eq!(format_float(1.5e-5), "1.5e-5");
        assert_eq!(format_float(-2e-10), "-2e-10");
        assert_eq!(format_float(1e-4), "0.0001");
    }

    fn sample() -> (Report, ExperimentConfig) {
        let config = ExperimentConfig::resolve(CommandKind::Walk, Settings::default()).unwrap();
        let report = Report {
            columns: vec!["a", "b", "c"],
            rows: vec![vec![Cell::Int(1), Cell::Float(0.5), Cell::Text("x".into())]],
            summary: json!({"ok": true}),
        };
        (report, config)
    }

    #[test]
    fn csv_layout() {
        let (report, config) = sample();
        let text = report.render(&config, 123);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "# generated_at_unix=123");
        assert_eq!(lines[2], "# seed=42");
        assert_eq!(lines[5], "a,b,c");
        assert_eq!(lines[6], "1,0.5,x");
        assert_eq!(lines[7], "# summary={\"ok\":true}");
    }

    #[test]
    fn timestamp_is_isolated() {
        let (report, mut config) = sample();
        let a = report.render(&config, 1);
        let b = report.render(&config, 2);
        assert_ne!(a, b);
        assert_eq!(strip_timestamp(&a), strip_timestamp(&b));

        config.format = OutputFormat::Json;
        let a = report.render(&config, 1);
        let b = report.render(&config, 2);
        assert_ne!(a, b);
        assert_eq!(strip_timestamp(&a), strip_timestamp(&b));
        let doc: Value = serde_json::from_str(&a).unwrap();
        for key in ["version", "seed", "config", "rows", "summary"] {
            assert!(doc.get(key).is_some(), "missing {key}");
        }
        assert_eq!(doc["rows"][0]["c"], "x");
    }
}
