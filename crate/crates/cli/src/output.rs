//! Report rendering: CSV with a header row and `key=value` trailer lines, or
//! JSON with `config`, `rows` and `summary` keys. Numbers are serialized as
//! shortest round-trip decimals.

use std::path::Path;

use serde_json::{json, Value};

pub enum Cell {
    F(f64),
    U(u64),
    S(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => x.to_string(),
            Cell::U(n) => n.to_string(),
            Cell::S(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => json!(x),
            Cell::U(n) => json!(n),
            Cell::S(s) => json!(s),
        }
    }
}

pub struct Report {
    pub config: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(String, Value)>,
    /// Single-value commands print just this line in CSV mode.
    pub scalar: Option<String>,
}

impl Report {
    pub fn emit(&self, format: &str, out: Option<&Path>) -> Result<(), String> {
        let text = match format {
            "csv" => self.render_csv(),
            "json" => self.render_json(),
            other => return Err(format!("unknown format `{other}` (use csv or json)")),
        };
        match out {
            None => {
                print!("{text}");
                Ok(())
            }
            Some(path) => std::fs::write(path, text)
                .map_err(|e| format!("cannot write {}: {e}", path.display())),
        }
    }

    fn render_csv(&self) -> String {
        if let Some(s) = &self.scalar {
            return format!("{s}\n");
        }
        let mut text = String::new();
        text.push_str(&self.columns.join(","));
        text.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        for (k, v) in &self.summary {
            let vs = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            text.push_str(&format!("{k}={vs}\n"));
        }
        text
    }

    fn render_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    obj.insert((*name).to_string(), cell.json());
                }
                Value::Object(obj)
            })
            .collect();
        let mut summary = serde_json::Map::new();
        for (k, v) in &self.summary {
            summary.insert(k.clone(), v.clone());
        }
        let doc = json!({
            "config": self.config,
            "rows": rows,
            "summary": Value::Object(summary),
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }
}
