//! Per-step simulation records and their CSV form.
//!
//! Column order: `k`, then `x1..xn`, `u1..um`, `u_a1..u_am`, `y1..yp`,
//! `y_a1..y_ap`, `r1..rp`, `r_u1..r_um`, `J`, `J_u`, `J_th`, `J_th_u`,
//! `flag_J`, `flag_Ju`, `label`. Floats are written with 17 significant
//! digits, flags as `0`/`1`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use dualguard_core::detectors::DecisionLabel;
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trace CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace CSV line {line}: {message}")]
    Format { line: u64, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: u64,
    pub x: DVector<f64>,
    /// Input computed by the controller.
    pub u: DVector<f64>,
    /// Input applied to the plant, after transmission noise and attack.
    pub u_a: DVector<f64>,
    /// Measured output.
    pub y: DVector<f64>,
    /// Output received by the controller.
    pub y_a: DVector<f64>,
    pub r: DVector<f64>,
    pub r_u: DVector<f64>,
    pub j: f64,
    pub j_u: f64,
    pub j_th: f64,
    pub j_th_u: f64,
    pub raw_j: bool,
    pub raw_ju: bool,
    pub flag_j: bool,
    pub flag_ju: bool,
    pub label: DecisionLabel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub records: Vec<StepRecord>,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl SimulationTrace {
    pub fn new(n: usize, m: usize, p: usize) -> Self {
        Self {
            n,
            m,
            p,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn j_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.j).collect()
    }

    pub fn ju_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.j_u).collect()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["k".to_string()];
        for (name, count) in [
            ("x", self.n),
            ("u", self.m),
            ("u_a", self.m),
            ("y", self.p),
            ("y_a", self.p),
            ("r", self.p),
            ("r_u", self.m),
        ] {
            h.extend((1..=count).map(|i| format!("{name}{i}")));
        }
        h.extend(
            ["J", "J_u", "J_th", "J_th_u", "flag_J", "flag_Ju", "label"]
                .iter()
                .map(|s| s.to_string()),
        );
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TraceError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(self.header())?;
        for rec in &self.records {
            let mut row = vec![rec.k.to_string()];
            for v in [&rec.x, &rec.u, &rec.u_a, &rec.y, &rec.y_a, &rec.r, &rec.r_u] {
                row.extend(v.iter().map(|&x| fmt(x)));
            }
            row.extend([rec.j, rec.j_u, rec.j_th, rec.j_th_u].map(fmt));
            row.push(u8::from(rec.flag_j).to_string());
            row.push(u8::from(rec.flag_ju).to_string());
            row.push(rec.label.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let path = path.as_ref();
        let io = |source| TraceError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let file = File::create(path).map_err(io)?;
        self.write_csv(BufWriter::new(file))
    }

    /// Reads a trace written by [`Self::write_csv`]. Raw flags are restored
    /// as `J > J_th`.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, TraceError> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rd.headers()?.clone();
        let count = |prefix: &str| {
            header
                .iter()
                .filter(|h| h.trim_end_matches(|c: char| c.is_ascii_digit()) == prefix && h.len() > prefix.len())
                .count()
        };
        let (n, m, p) = (count("x"), count("u"), count("y"));
        let mut trace = Self::new(n, m, p);
        let expected = trace.header();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(TraceError::Format {
                line: 1,
                message: format!("unexpected header; expected `{}`", expected.join(",")),
            });
        }
        for row in rd.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let bad = |message: String| TraceError::Format { line, message };
            let num = |i: usize| -> Result<f64, TraceError> {
                row[i]
                    .parse::<f64>()
                    .map_err(|e| bad(format!("column {}: {e}", expected[i])))
            };
            let mut col = 1;
            let mut vec = |len: usize| -> Result<DVector<f64>, TraceError> {
                let v = (col..col + len).map(num).collect::<Result<Vec<_>, _>>()?;
                col += len;
                Ok(DVector::from_vec(v))
            };
            let (x, u, u_a, y, y_a, r, r_u) = (vec(n)?, vec(m)?, vec(m)?, vec(p)?, vec(p)?, vec(p)?, vec(m)?);
            let flag = |i: usize| match &row[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(bad(format!("column {}: expected 0 or 1, got `{other}`", expected[i]))),
            };
            let (j, j_u, j_th, j_th_u) = (num(col)?, num(col + 1)?, num(col + 2)?, num(col + 3)?);
            trace.records.push(StepRecord {
                k: row[0].parse().map_err(|e| bad(format!("column k: {e}")))?,
                x,
                u,
                u_a,
                y,
                y_a,
                r,
                r_u,
                j,
                j_u,
                j_th,
                j_th_u,
                raw_j: j > j_th,
                raw_ju: j_u > j_th_u,
                flag_j: flag(col + 4)?,
                flag_ju: flag(col + 5)?,
                label: row[col + 6].parse().map_err(|e| bad(format!("{e}")))?,
            });
        }
        Ok(trace)
    }

    pub fn import_csv(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| TraceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file)
    }
}
