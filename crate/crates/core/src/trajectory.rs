//! Uniformly sampled time series and their CSV form.
//!
//! The CSV layout is: optional `# `-prefixed comment lines, a header row
//! starting with `t`, then one row per recorded time. Floats are written with
//! 17 significant digits so a write/read cycle is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Trajectory {
    pub fn new(times: Vec<f64>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if let Some(index) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotoneGrid { index: index + 1 });
        }
        for (name, values) in &columns {
            if values.len() != times.len() {
                return Err(Error::MalformedTrajectory(format!(
                    "column `{name}` has {} values, expected {}",
                    values.len(),
                    times.len()
                )));
            }
            if name.is_empty() || name.contains([',', '"', '\n']) || name == "t" {
                return Err(Error::MalformedTrajectory(format!(
                    "invalid column name `{name}`"
                )));
            }
        }
        Ok(Trajectory { times, columns })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|(n, _)| n == name)
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if self.has_column(&name) {
            return Err(Error::MalformedTrajectory(format!(
                "duplicate column `{name}`"
            )));
        }
        let mut columns = std::mem::take(&mut self.columns);
        columns.push((name, values));
        *self = Trajectory::new(std::mem::take(&mut self.times), columns)?;
        Ok(())
    }

    /// Spacing between consecutive samples (first interval).
    pub fn sample_period(&self) -> Option<f64> {
        match self.times.as_slice() {
            [a, b, ..] => Some(b - a),
            _ => None,
        }
    }

    /// Index range of samples with `from <= t <= to`, allowing a relative
    /// slack of 1e-9 sample periods at both ends.
    pub fn window(&self, from: f64, to: f64) -> Result<std::ops::Range<usize>> {
        let slack = self.sample_period().unwrap_or(0.0) * 1e-9;
        let lo = self.times.partition_point(|&t| t < from - slack);
        let hi = self.times.partition_point(|&t| t <= to + slack);
        if lo >= hi {
            return Err(Error::EmptyWindow { from, to });
        }
        Ok(lo..hi)
    }

    pub fn write_csv<W: Write>(&self, out: W, comment: &str) -> Result<()> {
        let mut out = BufWriter::new(out);
        for line in comment.lines() {
            if line.is_empty() {
                writeln!(out, "#")?;
            } else {
                writeln!(out, "# {line}")?;
            }
        }
        write!(out, "t")?;
        for (name, _) in &self.columns {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (j, t) in self.times.iter().enumerate() {
            out.write_all(fmt_f64(*t).as_bytes())?;
            for (_, values) in &self.columns {
                out.write_all(b",")?;
                out.write_all(fmt_f64(values[j]).as_bytes())?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, comment: &str) -> Result<()> {
        self.write_csv(File::create(path)?, comment)
    }

    /// Reads a trajectory CSV, returning it with the leading comment block
    /// (prefix `# ` stripped).
    pub fn load_csv(path: &Path) -> Result<(Trajectory, String)> {
        let file = File::open(path)?;
        let mut comment = String::new();
        for line in BufReader::new(&file).lines() {
            let line = line?;
            match line.strip_prefix('#') {
                Some(rest) => {
                    comment.push_str(rest.strip_prefix(' ').unwrap_or(rest));
                    comment.push('\n');
                }
                None => break,
            }
        }

        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(csv_err)?;
        let headers = reader.headers().map_err(csv_err)?.clone();
        if headers.get(0) != Some("t") {
            return Err(Error::MalformedTrajectory(
                "first column must be `t`".into(),
            ));
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let parse = |i: usize| -> Result<f64> {
                let field = record.get(i).unwrap_or("");
                field.trim().parse::<f64>().map_err(|_| {
                    Error::MalformedTrajectory(format!("row {}: bad number `{field}`", row + 1))
                })
            };
            times.push(parse(0)?);
            for (i, col) in columns.iter_mut().enumerate() {
                col.push(parse(i + 1)?);
            }
        }
        Ok((
            Trajectory::new(times, names.into_iter().zip(columns).collect())?,
            comment,
        ))
    }
}
