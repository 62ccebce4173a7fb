//! CSV output with lossless float formatting and strict, loss-free loading.
//!
//! Floats are written in scientific notation with 17 significant digits, which
//! round-trips every f64 exactly; `t` and flag columns are plain integers. The
//! readers parse the exact schemas written here so that parse → emit is a
//! fixpoint.

use std::fmt::Write as _;
use std::path::Path;

/// 17-significant-digit scientific formatting; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64, String> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse::<f64>().map_err(|_| format!("invalid number `{s}`")),
    }
}

/// A rectangular CSV table with a header, all data cells numeric.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Column layout: `int_cols` leading-or-anywhere columns are written as
    /// integers (times, counts, flags); everything else as 17-digit floats.
    pub fn to_csv(&self, int_cols: &[usize]) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for (c, &v) in row.iter().enumerate() {
                if !first {
                    out.push(',');
                }
                first = false;
                if int_cols.contains(&c) {
                    let _ = write!(out, "{}", v as i64);
                } else {
                    out.push_str(&fmt_f64(v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path, int_cols: &[usize]) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv(int_cols))
    }

    /// Strict read: every line must have as many cells as the header.
    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::read_str(&text)
    }

    pub fn read_str(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or("empty CSV")?
            .split(',')
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(parse_f64)
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| format!("line {}: {e}", i + 2))?;
            if row.len() != header.len() {
                return Err(format!("line {}: expected {} cells", i + 2, header.len()));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips_exactly() {
        for &x in &[
            0.0,
            -0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1e-300,
            -3.1234567890123456e300,
            f64::MIN_POSITIVE,
            f64::NAN,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ] {
            let s = fmt_f64(x);
            let back = parse_f64(&s).unwrap();
            if x.is_nan() {
                assert!(back.is_nan());
            } else {
                assert_eq!(x.to_bits(), back.to_bits(), "{s}");
            }
        }
    }

    #[test]
    fn emit_parse_emit_is_a_fixpoint() {
        let mut t = Table::new(&["t", "x", "flag"]);
        t.push(vec![1.0, 0.1234567890123456789, 1.0]);
        t.push(vec![2.0, f64::NAN, 0.0]);
        let csv1 = t.to_csv(&[0, 2]);
        let parsed = Table::read_str(&csv1).unwrap();
        let csv2 = parsed.to_csv(&[0, 2]);
        assert_eq!(csv1, csv2);
    }
}
