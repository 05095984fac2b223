//! JSON envelope and CSV rendering.

use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA: &str = "dcrep/1";

/// A table for CSV output.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    /// Rows as JSON objects keyed by column.
    pub fn records(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect(),
        )
    }
}

/// A JSON number, or a string for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(float(x)))
}

pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.to_string()
            } else if let Some(u) = n.as_u64() {
                u.to_string()
            } else {
                float(n.as_f64().unwrap_or(f64::NAN))
            }
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Vec<Vec<Value>>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_into(&p, x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten_into(&format!("{prefix}[{i}]"), x, out);
            }
        }
        _ => out.push(vec![Value::String(prefix.to_string()), v.clone()]),
    }
}

/// Key/value rows of a JSON value, one per leaf.
pub fn flatten(v: &Value) -> Table {
    let mut rows = Vec::new();
    flatten_into("", v, &mut rows);
    Table { columns: vec!["key".into(), "value".into()], rows }
}

pub fn envelope<C: Serialize, R: Serialize>(config: &C, result: &R) -> Value {
    json!({ "schema": SCHEMA, "config": config, "result": result })
}

pub fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// CSV with `#` header lines carrying the schema and the config echo.
pub fn render_csv<C: Serialize>(config: &C, table: &Table) -> String {
    let mut s = format!("# schema: {SCHEMA}\n# config: {}\n", serde_json::to_string(config).expect("config serializes"));
    s.push_str(&table.columns.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","));
    s.push('\n');
    for row in &table.rows {
        s.push_str(&row.iter().map(|c| quote(&scalar(c))).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}
