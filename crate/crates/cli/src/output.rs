//! Deterministic artifact encoding.
//!
//! JSON keeps struct field order and prints every float in scientific
//! notation with 17 significant digits, so reruns are byte-identical.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// `{:.16e}`, with spellings for the non-finite values.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "Infinity".into() } else { "-Infinity".into() }
    } else {
        format!("{v:.16e}")
    }
}

struct Fixed17<'a>(PrettyFormatter<'a>);

impl Formatter for Fixed17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fixed17(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// A CSV table built in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// One cell of a table row.
pub enum Cell {
    F(f64),
    U(usize),
    B(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format_f64(*v),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
        }
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[Cell]) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row.iter().map(Cell::render).collect());
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> csv::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        #[derive(Serialize)]
        struct S {
            b: f64,
            a: Vec<f64>,
            n: usize,
        }
        let s = S { b: 0.1, a: vec![2.0, -1e-300], n: 3 };
        let text = String::from_utf8(to_json(&s).unwrap()).unwrap();
        assert_eq!(
            text,
            "{\n  \"b\": 1.0000000000000001e-1,\n  \"a\": [\n    2.0000000000000000e0,\n    -1.0000000000000000e-300\n  ],\n  \"n\": 3\n}\n"
        );
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn non_finite_spellings() {
        assert_eq!(format_f64(f64::INFINITY), "Infinity");
        assert_eq!(format_f64(f64::NEG_INFINITY), "-Infinity");
        assert_eq!(format_f64(f64::NAN), "NaN");
    }

    #[test]
    fn csv_rows() {
        let mut t = Table::new(&["t", "n", "ok"]);
        t.push(&[Cell::F(0.5), Cell::U(2), Cell::B(true)]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "t,n,ok\n5.0000000000000000e-1,2,true\n");
    }
}
