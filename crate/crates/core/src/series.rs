//! The p × N sample type and its on-disk formats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DNTS";
const HEADER_LEN: usize = 16;

/// A p-variate series of N observations.
///
/// Backed by a p × N column-major matrix, so each time sample `x(n)` is a
/// contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesSample {
    data: DMatrix<f64>,
}

impl TimeSeriesSample {
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        let (p, n) = data.shape();
        if p < 1 {
            return Err(Error::InvalidInput("a sample needs at least one variable".into()));
        }
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "a sample needs at least two observations, got {n}"
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at variable {}, time {}",
                idx % p,
                idx / p
            )));
        }
        Ok(Self { data })
    }

    /// Builds a sample from one vector per variable.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if p == 0 {
            return Err(Error::InvalidInput("a sample needs at least one variable".into()));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("rows have unequal lengths".into()));
        }
        Self::from_matrix(DMatrix::from_fn(p, n, |i, t| rows[i][t]))
    }

    /// Builds a sample from a time-major buffer `[x(0), x(1), ...]`.
    pub fn from_time_major(p: usize, values: Vec<f64>) -> Result<Self> {
        if p == 0 || values.len() % p != 0 {
            return Err(Error::InvalidInput(format!(
                "buffer of {} values does not split into {p} variables",
                values.len()
            )));
        }
        let n = values.len() / p;
        Self::from_matrix(DMatrix::from_vec(p, n, values))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Time-major view of all values.
    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    /// Observation vector at time `n`.
    pub fn at(&self, n: usize) -> &[f64] {
        let p = self.dim();
        &self.data.as_slice()[n * p..(n + 1) * p]
    }

    /// Values of variable `i` across time.
    pub fn variable(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    pub fn row_means(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim())
            .map(|i| self.data.row(i).iter().sum::<f64>() / n)
            .collect()
    }

    /// Applies `a` (k × p) to every observation.
    pub fn transform(&self, a: &DMatrix<f64>) -> Result<Self> {
        if a.ncols() != self.dim() {
            return Err(Error::Dimension { expected: a.ncols(), got: self.dim() });
        }
        Self::from_matrix(a * &self.data)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        w.write_record(&header)?;
        for n in 0..self.len() {
            w.write_record(self.at(n).iter().map(|v| format!("{v:?}")))?;
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv_from(File::open(path)?)
    }

    pub fn read_csv_from<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let p = r.headers()?.len();
        let mut values = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != p {
                return Err(Error::Format(format!(
                    "row {} has {} fields, header has {p}",
                    line + 1,
                    rec.len()
                )));
            }
            for field in rec.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Format(format!("row {}: cannot parse {field:?}", line + 1)))?;
                values.push(v);
            }
        }
        Self::from_time_major(p, values)
    }

    /// Binary dump: `DNTS`, u32 p, u32 N, 4 reserved zero bytes, then
    /// little-endian f64 values in time-major order.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_binary_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_binary_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let p = u32::try_from(self.dim()).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
        let n = u32::try_from(self.len()).map_err(|_| Error::Format("length exceeds u32".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&p.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&[0u8; 4])?;
        for v in self.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_binary_from(BufReader::new(File::open(path)?))
    }

    pub fn read_binary_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| Error::Format("truncated header".into()))?;
        if &header[0..4] != MAGIC {
            return Err(Error::Format("bad magic, expected DNTS".into()));
        }
        let p = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let count = p
            .checked_mul(n)
            .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != count * 8 {
            return Err(Error::Format(format!(
                "payload holds {} bytes, header promises {}",
                payload.len(),
                count * 8
            )));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_time_major(p, values)
    }

    /// Reads CSV for `.csv` paths and the binary dump otherwise.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if is_csv(path) {
            Self::read_csv(path)
        } else {
            Self::read_binary(path)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if is_csv(path) {
            self.write_csv(path)
        } else {
            self.write_binary(path)
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false)
}

/// Subtracts each variable's empirical mean.
pub fn center(x: &TimeSeriesSample) -> TimeSeriesSample {
    let means = x.row_means();
    let mut data = x.data.clone();
    for (i, m) in means.iter().enumerate() {
        data.row_mut(i).add_scalar_mut(-m);
    }
    TimeSeriesSample { data }
}
