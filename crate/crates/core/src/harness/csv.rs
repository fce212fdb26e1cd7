//! CSV emission: UTF-8, one header row, LF line endings, no quoting.
//! Floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::HarnessError;

/// Formats a float with 17 significant digits (`d.dddddddddddddddde±x`).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    columns: usize,
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Table {
            columns: header.len(),
            text,
        }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut count = 0;
        for (i, f) in fields.into_iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let f = f.as_ref();
            debug_assert!(!f.contains([',', '\n', '"']), "field needs quoting: {f}");
            self.text.push_str(f);
            count += 1;
        }
        assert_eq!(count, self.columns, "row width does not match header");
        self.text.push('\n');
    }

    /// Appends rendered rows (each ending in `\n`) verbatim.
    pub fn push_rendered(&mut self, rows: &str) {
        self.text.push_str(rows);
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        fs::write(path, &self.text).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Renders one row without a table (for per-realization chunks built in workers).
pub fn render_row(out: &mut String, fields: &[&dyn std::fmt::Display]) {
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{f}").expect("writing to a String cannot fail");
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [1.0 / 3.0, -737.25, 1e-300, 0.0, 6.02214076e23] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.replace('.', "").len(), 17);
        }
        assert_eq!(fmt_f64(1.0 / 3.0), "3.3333333333333331e-1");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.row(["1", "x"]);
        assert_eq!(t.as_str(), "a,b\n1,x\n");
    }
}
