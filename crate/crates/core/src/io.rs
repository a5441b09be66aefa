//! CSV and JSON writers shared by the command-line front end.
//!
//! CSV files have a single header row, `,` separators, `.` decimals and `\n`
//! line endings. Floats are printed with 17 significant digits so they
//! parse back to the same `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::Result;

/// 17 significant digits in scientific notation; non-finite values as
/// `NaN`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Minimal CSV writer over any `Write`.
pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl CsvWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self> {
        let file = File::create(path)?;
        CsvWriter::new(BufWriter::new(file), header)
    }
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[&str]) -> Result<Self> {
        out.write_all(header.join(",").as_bytes())?;
        out.write_all(b"\n")?;
        Ok(CsvWriter {
            out,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, fields: &[Field<'_>]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        let text: Vec<String> = fields.iter().map(Field::render).collect();
        self.out.write_all(text.join(",").as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// One CSV cell.
#[derive(Debug, Clone, Copy)]
pub enum Field<'a> {
    Int(i64),
    Uint(usize),
    Float(f64),
    Text(&'a str),
    Empty,
}

impl Field<'_> {
    fn render(&self) -> String {
        match *self {
            Field::Int(v) => v.to_string(),
            Field::Uint(v) => v.to_string(),
            Field::Float(v) => fmt_f64(v),
            Field::Text(s) => s.to_string(),
            Field::Empty => String::new(),
        }
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.984375, 1.0 / 3.0, -2.5e-300, 0.0, 1e300, std::f64::consts::PI] {
            let text = fmt_f64(x);
            assert_eq!(text.parse::<f64>().unwrap(), x, "{text}");
        }
        assert_eq!(fmt_f64(0.984375), "9.8437500000000000e-1");
    }

    #[test]
    fn csv_layout() {
        let mut w = CsvWriter::new(Vec::new(), &["t", "G", "note"]).unwrap();
        w.row(&[Field::Float(0.0), Field::Float(0.5), Field::Text("x")]).unwrap();
        w.row(&[Field::Uint(3), Field::Int(-1), Field::Empty]).unwrap();
        let out = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(
            out,
            "t,G,note\n0.0000000000000000e0,5.0000000000000000e-1,x\n3,-1,\n"
        );
    }
}
