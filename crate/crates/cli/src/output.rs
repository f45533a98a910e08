//! Artifact formatting: 12-significant-digit numbers, CSV with headers,
//! JSON with a schema field.

use serde::Serialize;
use serde_json::{json, Map, Value};

/// `x` with 12 significant digits, in the shorter of fixed and scientific
/// notation, trailing zeros removed (like C's `%.12g`).
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to 12 significant digits, as a JSON number (`null` when not
/// finite).
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(fmt12(x).parse::<f64>().expect("fmt12 output parses"))
    } else {
        Value::Null
    }
}

pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { buf: header.join(",") + "\n", columns: header.len() }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        debug_assert_eq!(cells.len(), self.columns);
        let mut first = true;
        for c in cells {
            if !first {
                self.buf.push(',');
            }
            self.buf.push_str(c.as_ref());
            first = false;
        }
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

/// A file to be written into the output directory.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn csv(name: impl Into<String>, csv: Csv) -> Self {
        Self { name: name.into(), bytes: csv.into_bytes() }
    }

    /// JSON object with `schema` as its first field.
    pub fn json(name: impl Into<String>, schema: &str, body: Map<String, Value>) -> Self {
        let mut obj = Map::new();
        obj.insert("schema".into(), json!(schema));
        obj.extend(body);
        let mut bytes = serde_json::to_vec_pretty(&Value::Object(obj)).expect("JSON values serialize");
        bytes.push(b'\n');
        Self { name: name.into(), bytes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(1.0), "1");
        assert_eq!(fmt12(2.338107410459767), "2.33810741046");
        assert_eq!(fmt12(-0.7012108227206912), "-0.701210822721");
        assert_eq!(fmt12(1e6), "1000000");
        assert_eq!(fmt12(1e12), "1e12");
        assert_eq!(fmt12(1.5e-7), "1.5e-7");
        assert_eq!(fmt12(123456.0000004), "123456");
        assert_eq!(fmt12(0.00012345678901234), "0.000123456789012");
        assert_eq!(fmt12(f64::NAN), "nan");
        for x in [std::f64::consts::PI, 1e-300, 6.02214076e23, -0.1] {
            let y: f64 = fmt12(x).parse().unwrap();
            assert!(((y - x) / x).abs() < 1e-11);
        }
    }

    #[test]
    fn csv_and_json_shapes() {
        let mut c = Csv::new(&["x", "value"]);
        c.row(&[fmt12(0.5), fmt12(2.0)]);
        assert_eq!(String::from_utf8(c.into_bytes()).unwrap(), "x,value\n0.5,2\n");
        let mut m = Map::new();
        m.insert("a".into(), num(1.0 / 3.0));
        let a = Artifact::json("a.json", "test/1", m);
        let s = String::from_utf8(a.bytes).unwrap();
        assert!(s.starts_with("{\n  \"schema\": \"test/1\""));
        assert!(s.contains("0.333333333333"));
    }
}
