//! Report and table writers.
//!
//! JSON reports print every float with 17 significant digits so they read
//! back bit-exactly. CSV tables use 12, which is plenty for plotting.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter, Serializer};

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "disclosure-report/1";

/// Forwards to an inner formatter but writes floats as `d.dddddddddddddddde±x`.
struct FullPrecision<F>(F);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for FullPrecision<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(sig17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

/// `value` with 17 significant digits in scientific notation.
pub fn sig17(value: f64) -> String {
    format!("{value:.16e}")
}

/// `value` with 12 significant digits in scientific notation.
pub fn sig12(value: f64) -> String {
    format!("{value:.11e}")
}

pub fn to_json<T: Serialize>(value: &T, pretty: bool) -> String {
    let mut buf = Vec::new();
    if pretty {
        let mut ser = Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
        value
            .serialize(&mut ser)
            .expect("reports serialize infallibly");
        buf.push(b'\n');
    } else {
        let mut ser = Serializer::with_formatter(&mut buf, FullPrecision(CompactFormatter));
        value
            .serialize(&mut ser)
            .expect("reports serialize infallibly");
    }
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<(), CliError> {
    write_file(path, to_json(value, pretty).as_bytes())
}

/// A headered table with a fixed column order.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            out.write_record(row).expect("in-memory write");
        }
        String::from_utf8(out.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, self.to_csv().as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::write(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::write(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_floats_round_trip_exactly() {
        let values = vec![
            0.1 + 0.2,
            1e-10,
            0.31373502701490885,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            0.0,
            f64::MIN_POSITIVE,
        ];
        for pretty in [false, true] {
            let text = to_json(&values, pretty);
            let back: Vec<f64> = serde_json::from_str(&text).unwrap();
            assert_eq!(back, values);
        }
        assert_eq!(to_json(&0.5, false), "5.0000000000000000e-1");
        assert_eq!(to_json(&f64::NAN, false), "null");
    }

    #[test]
    fn pretty_layout_is_kept() {
        #[derive(Serialize)]
        struct Row {
            a: f64,
            b: Vec<u32>,
        }
        let text = to_json(
            &Row {
                a: 1.0,
                b: vec![1, 2],
            },
            true,
        );
        assert_eq!(
            text,
            "{\n  \"a\": 1.0000000000000000e0,\n  \"b\": [\n    1,\n    2\n  ]\n}\n"
        );
    }

    #[test]
    fn csv_has_header_and_fixed_width() {
        let mut t = Table::new(["w", "H"]);
        t.push(vec![sig12(0.5), sig12(1.0 / 3.0)]);
        assert_eq!(t.to_csv(), "w,H\n5.00000000000e-1,3.33333333333e-1\n");
    }
}
