//! Report serialization. JSON carries the full nested report; CSV has one row
//! per (check, cycle, s-sample). Floats are written with 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::suite::{CheckResult, RunReport};

/// Pretty JSON with every float in `{:.16e}` form.
struct SciFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Serialize any value with the report float format.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(e.to_string()))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::Io(e.to_string()))
}

pub fn report_json(report: &RunReport) -> Result<String> {
    to_json(report)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub const CSV_HEADER: [&str; 16] = [
    "check",
    "suite",
    "p",
    "status",
    "cycle",
    "s",
    "raw_re",
    "raw_im",
    "reduced_re",
    "reduced_im",
    "residual",
    "tolerance",
    "order",
    "asserted",
    "passed",
    "error",
];

fn rows(c: &CheckResult) -> Vec<Vec<String>> {
    let order = c.order.map(|o| match o.value() {
        Some(q) => num(q),
        None => "exact".into(),
    });
    let head = |cycle: String, s: Option<f64>| {
        vec![
            c.index.to_string(),
            c.suite.name(),
            c.p.to_string(),
            serde_json::to_value(c.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            cycle,
            opt(s),
        ]
    };
    let tail = |residual: Option<f64>| {
        vec![
            opt(residual),
            num(c.tolerance),
            order.clone().unwrap_or_default(),
            c.asserted.to_string(),
            c.passed.to_string(),
            c.error.clone().unwrap_or_default(),
        ]
    };
    if c.values.is_empty() {
        let mut row = head(String::new(), None);
        row.extend(std::iter::repeat_n(String::new(), 4));
        row.extend(tail(c.residual));
        return vec![row];
    }
    c.values
        .iter()
        .map(|v| {
            let mut row = head(v.cycle.clone(), v.s);
            row.extend([
                num(v.value.raw.re),
                num(v.value.raw.im),
                num(v.value.value.re),
                num(v.value.value.im),
            ]);
            row.extend(tail(v.residual.or(c.residual)));
            row
        })
        .collect()
}

pub fn report_csv(report: &RunReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io_err)?;
    for c in &report.checks {
        for row in rows(c) {
            w.write_record(&row).map_err(io_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}
