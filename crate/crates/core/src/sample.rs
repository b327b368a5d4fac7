//! Row-major sample storage shared by samplers, order tests and the CLI.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub seed: u64,
    pub stream: u64,
    pub spec_digest: String,
}

/// `rows` d-vectors stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    dim: usize,
    data: Vec<f64>,
    pub provenance: Option<Provenance>,
}

impl SampleMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("sample dimension must be positive");
        }
        if data.len() % dim != 0 {
            return invalid(format!(
                "data length {} is not a multiple of dimension {dim}",
                data.len()
            ));
        }
        Ok(Self { dim, data, provenance: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if dim == 0 {
            return invalid("need at least one nonempty row");
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return invalid(format!("row {i} has length {} (expected {dim})", r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn from_scalars(values: Vec<f64>) -> Self {
        Self { dim: 1, data: values, provenance: None }
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = Some(p);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    /// Concatenates rows of `self` and `other` side by side.
    pub fn hstack(&self, other: &SampleMatrix) -> Result<SampleMatrix> {
        if self.rows() != other.rows() {
            return invalid("hstack needs equal row counts");
        }
        let dim = self.dim + other.dim;
        let mut data = Vec::with_capacity(self.rows() * dim);
        for (a, b) in self.iter_rows().zip(other.iter_rows()) {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        SampleMatrix::new(dim, data)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.iter_rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let n = self.rows().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Writes little-endian f64 values row-major plus a `<path>.json` sidecar.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let sidecar = BinarySidecar {
            rows: self.rows(),
            dim: self.dim,
            layout: "row-major little-endian f64".to_string(),
            provenance: self.provenance.clone(),
        };
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        fs::write(side, serde_json::to_string_pretty(&sidecar)? + "\n")?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<SampleMatrix> {
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        let sidecar: BinarySidecar = serde_json::from_str(&fs::read_to_string(side)?)?;
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() != sidecar.rows * sidecar.dim * 8 {
            return invalid(format!(
                "binary file has {} bytes, sidecar declares {}x{} f64",
                bytes.len(),
                sidecar.rows,
                sidecar.dim
            ));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let mut m = SampleMatrix::new(sidecar.dim, data)?;
        m.provenance = sidecar.provenance;
        Ok(m)
    }

    /// CSV with header `x0,x1,...`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        let header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for r in self.iter_rows() {
            let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a numeric CSV. A first line that does not parse as numbers is
    /// treated as a header.
    pub fn read_csv(path: &Path) -> Result<SampleMatrix> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut rows = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                trimmed.split(',').map(|s| s.trim().parse::<f64>()).collect();
            match parsed {
                Ok(v) => rows.push(v),
                Err(_) if rows.is_empty() && lineno == 0 => continue,
                Err(e) => {
                    return Err(Error::InvalidArgument(format!(
                        "{}:{}: {e}",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        SampleMatrix::from_rows(&rows)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BinarySidecar {
    rows: usize,
    dim: usize,
    layout: String,
    provenance: Option<Provenance>,
}
