//! CSV tables and the text model file.
//!
//! Every real number is written with 17 significant digits (`{:.16e}`), which
//! round-trips an `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::factor::FactorModel;
use crate::linalg::Matrix;
use crate::reducers::{FilterBank, Method};
use crate::stats::DataMatrix;

const MODEL_MAGIC: &str = "cpcapp-model v1";

/// Formats `v` with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| format_f64(v)).collect::<Vec<_>>().join(",")
}

/// A rectangular table of finite reals, one sample per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn columns(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Samples as columns of an `M×N` matrix. With `transpose`, rows of the
    /// table are features instead.
    pub fn to_data(&self, transpose: bool) -> Result<DataMatrix> {
        if self.rows.is_empty() {
            return Err(Error::parse(1, "table has no data rows"));
        }
        let (r, c) = (self.rows.len(), self.columns());
        let m = if transpose {
            Matrix::from_fn(r, c, |i, j| self.rows[i][j])
        } else {
            Matrix::from_fn(c, r, |i, j| self.rows[j][i])
        };
        DataMatrix::new(m)
    }

    /// One row per column of `m` (samples as rows).
    pub fn from_matrix(m: &Matrix, header: Option<Vec<String>>) -> Self {
        let rows = (0..m.cols()).map(|j| m.column(j)).collect();
        Self { header, rows }
    }

    pub fn parse(reader: impl Read) -> Result<CsvTable> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut table = CsvTable::default();
        let mut width = None;
        for (idx, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(idx + 1, |p| p.line() as usize);
                Error::parse(line, e.to_string())
            })?;
            let line = record.position().map_or(idx + 1, |p| p.line() as usize);
            if record.iter().all(str::is_empty) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, usize> = record
                .iter()
                .enumerate()
                .map(|(j, cell)| cell.parse::<f64>().map_err(|_| j))
                .collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if idx == 0 => {
                    width = Some(record.len());
                    table.header = Some(record.iter().map(str::to_string).collect());
                    continue;
                }
                Err(j) => {
                    return Err(Error::parse(
                        line,
                        format!("non-numeric cell {:?} in column {}", &record[j], j + 1),
                    ))
                }
            };
            if let Some(j) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::parse(line, format!("non-finite value in column {}", j + 1)));
            }
            match width {
                None => width = Some(values.len()),
                Some(w) if w != values.len() => {
                    return Err(Error::parse(
                        line,
                        format!("row has {} fields, expected {w}", values.len()),
                    ))
                }
                Some(_) => {}
            }
            table.rows.push(values);
        }
        Ok(table)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<CsvTable> {
        CsvTable::parse(File::open(path)?)
    }

    pub fn write_to(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        if let Some(h) = &self.header {
            w.write_record(h).map_err(csv_err)?;
        }
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| format_f64(v))).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }
}

/// Reads samples-as-rows CSV into an `M×N` data matrix.
pub fn read_csv(path: impl AsRef<Path>, transpose: bool) -> Result<DataMatrix> {
    CsvTable::read(path)?.to_data(transpose)
}

/// Writes the columns of `m` as CSV rows.
pub fn write_csv(path: impl AsRef<Path>, m: &Matrix, header: Option<Vec<String>>) -> Result<()> {
    CsvTable::from_matrix(m, header).write(path)
}

/// A filter bank plus, optionally, its recovered basis `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub bank: FilterBank,
    pub factor: Option<FactorModel>,
}

impl ModelFile {
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        let b = &self.bank;
        let alpha = b.alpha.map_or_else(|| "none".to_string(), format_f64);
        writeln!(out, "{MODEL_MAGIC}")?;
        writeln!(out, "{} {} {} {} {}", b.method, b.features(), b.k(), alpha, format_f64(b.loading))?;
        writeln!(out, "{}", join(&b.train_mean_bg))?;
        writeln!(out, "{}", join(&b.train_mean_fg))?;
        writeln!(out, "{}", join(&b.eigenvalues))?;
        for i in 0..b.features() {
            writeln!(out, "{}", join(b.f.row(i)))?;
        }
        if let Some(fm) = &self.factor {
            writeln!(out, "W")?;
            writeln!(out, "{}", join(&fm.lambda_diag))?;
            for i in 0..fm.features() {
                writeln!(out, "{}", join(fm.w.row(i)))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn parse(reader: impl Read) -> Result<ModelFile> {
        let mut lines = Lines::new(reader);
        let magic = lines.next_line()?;
        if magic.trim() != MODEL_MAGIC {
            return Err(Error::parse(1, format!("expected {MODEL_MAGIC:?}, found {magic:?}")));
        }
        let head = lines.next_line()?;
        let fields: Vec<&str> = head.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(lines.error("expected `method M K alpha loading`"));
        }
        let method: Method = fields[0].parse().map_err(|_| lines.error("unknown method"))?;
        let m: usize = fields[1].parse().map_err(|_| lines.error("invalid M"))?;
        let k: usize = fields[2].parse().map_err(|_| lines.error("invalid K"))?;
        let alpha = match fields[3] {
            "none" => None,
            s => Some(s.parse::<f64>().map_err(|_| lines.error("invalid alpha"))?),
        };
        let loading: f64 = fields[4].parse().map_err(|_| lines.error("invalid loading"))?;
        if m == 0 || k == 0 || k > m {
            return Err(lines.error(format!("invalid dimensions {m}x{k}")));
        }
        let train_mean_bg = lines.floats(m)?;
        let train_mean_fg = lines.floats(m)?;
        let eigenvalues = lines.floats(k)?;
        let f = lines.matrix(m, k)?;
        let bank = FilterBank {
            method,
            f,
            eigenvalues,
            train_mean_bg,
            train_mean_fg,
            alpha,
            loading,
        };
        bank.validate()
            .map_err(|e| Error::parse(lines.line, format!("inconsistent model: {e}")))?;
        let factor = match lines.next_nonempty()? {
            None => None,
            Some(tag) if tag.trim() == "W" => {
                let lambda_diag = lines.floats(k)?;
                let w = lines.matrix(m, k)?;
                if lines.next_nonempty()?.is_some() {
                    return Err(lines.error("trailing content after W block"));
                }
                Some(FactorModel {
                    w,
                    f: bank.f.clone(),
                    lambda_diag,
                })
            }
            Some(_) => return Err(lines.error("expected `W` or end of file")),
        };
        Ok(ModelFile { bank, factor })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelFile> {
        ModelFile::parse(File::open(path)?)
    }
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    line: usize,
}

impl<R: Read> Lines<R> {
    fn new(reader: R) -> Self {
        Self {
            inner: BufReader::new(reader).lines(),
            line: 0,
        }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line, msg)
    }

    fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.error("unexpected end of file")),
        }
    }

    fn next_nonempty(&mut self) -> Result<Option<String>> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l?;
            if !l.trim().is_empty() {
                return Ok(Some(l));
            }
        }
        Ok(None)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let l = self.next_line()?;
        let values: Vec<f64> = l
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.error("non-numeric value"))?;
        if values.len() != n {
            return Err(self.error(format!("expected {n} values, found {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(self.error("non-finite value"));
        }
        Ok(values)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.floats(cols)?);
        }
        Matrix::new(rows, cols, data)
    }
}
