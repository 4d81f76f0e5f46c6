//! JSON-lines records with 17-significant-digit floats.

use crate::inference::json_number;

/// One flat JSON object; values are stored already encoded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    fields: Vec<(String, String)>,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl Record {
    pub fn new(record: &str) -> Self {
        Record::default().str("record", record)
    }

    fn raw(mut self, key: &str, value: String) -> Self {
        self.fields.push((key.to_string(), value));
        self
    }

    pub fn str(self, key: &str, value: &str) -> Self {
        self.raw(key, escape(value))
    }

    pub fn num(self, key: &str, value: f64) -> Self {
        self.raw(key, json_number(value))
    }

    pub fn int(self, key: &str, value: u64) -> Self {
        self.raw(key, value.to_string())
    }

    pub fn flag(self, key: &str, value: bool) -> Self {
        self.raw(key, value.to_string())
    }

    pub fn nums(self, key: &str, values: &[f64]) -> Self {
        let items: Vec<String> = values.iter().map(|v| json_number(*v)).collect();
        self.raw(key, format!("[{}]", items.join(",")))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_json(&self) -> String {
        let body: Vec<String> = self
            .fields
            .iter()
            .map(|(k, v)| format!("{}:{}", escape(k), v))
            .collect();
        format!("{{{}}}", body.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_as_json() {
        let r = Record::new("row")
            .str("name", "a\"b")
            .num("x", 0.1)
            .num("bad", f64::NAN)
            .int("n", 3)
            .flag("ok", true)
            .nums("v", &[1.0, -2.5]);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["name"], "a\"b");
        assert_eq!(v["x"].as_f64(), Some(0.1));
        assert_eq!(v["bad"], "NaN");
        assert_eq!(v["v"][1].as_f64(), Some(-2.5));
        assert_eq!(r.get("n"), Some("3"));
    }
}
