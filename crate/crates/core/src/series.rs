//! Time series containers, CSV ingestion/emission and delay embedding.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

/// A named scalar channel sampled at a uniform interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    values: Vec<f64>,
    dt: f64,
}

impl TimeSeries {
    /// Builds a series with the default sampling interval of 1.
    ///
    /// Rejects empty input and non-finite samples; there is no imputation.
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::TooShort(format!("channel {name:?} has no samples")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "channel {name:?} has a non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            name,
            values,
            dt: 1.0,
        })
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sampling interval must be positive and finite, got {dt}"
            )));
        }
        self.dt = dt;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Zero mean, unit (population) variance copy. Constant series are only
    /// centred.
    pub fn standardized(&self) -> Self {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let var = self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        let values = self
            .values
            .iter()
            .map(|v| if sd > 0.0 { (v - mean) / sd } else { v - mean })
            .collect();
        Self {
            name: self.name.clone(),
            values,
            dt: self.dt,
        }
    }

    /// Copy with every sample passed through `f`.
    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i, v))
            .collect();
        Self::new(self.name.clone(), values)?.with_dt(self.dt)
    }

    /// Cyclic left shift by `offset` samples.
    pub fn rotated(&self, offset: usize) -> Self {
        let mut values = self.values.clone();
        if !values.is_empty() {
            values.rotate_left(offset % self.values.len());
        }
        Self {
            name: self.name.clone(),
            values,
            dt: self.dt,
        }
    }
}

/// Equal-length channels with unique names, in column order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    channels: Vec<TimeSeries>,
}

impl Dataset {
    pub fn new(channels: Vec<TimeSeries>) -> Result<Self> {
        let mut seen = HashSet::new();
        for ch in &channels {
            if !seen.insert(ch.name()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate channel name {:?}",
                    ch.name()
                )));
            }
        }
        if let Some(first) = channels.first() {
            if let Some(bad) = channels.iter().find(|c| c.len() != first.len()) {
                return Err(Error::Misaligned(format!(
                    "channel {:?} has {} samples, {:?} has {}",
                    bad.name(),
                    bad.len(),
                    first.name(),
                    first.len()
                )));
            }
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[TimeSeries] {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Option<&TimeSeries> {
        self.channels.iter().find(|c| c.name() == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.name()).collect()
    }

    /// Number of channels.
    pub fn width(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel (0 for an empty dataset).
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn standardized(&self) -> Self {
        Self {
            channels: self.channels.iter().map(|c| c.standardized()).collect(),
        }
    }

    pub fn into_channels(self) -> Vec<TimeSeries> {
        self.channels
    }
}

/// Reads a headed CSV file with one numeric column per channel.
///
/// Rows and columns in error messages are 1-based file positions, so the
/// first data row is row 2.
pub fn load_csv(path: impl AsRef<Path>, delimiter: u8) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let names: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "missing header row".into(),
        });
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = record.position().map_or(i + 2, |p| p.line() as usize);
        if record.len() != names.len() {
            return Err(Error::RaggedRow {
                row,
                expected: names.len(),
                found: record.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => columns[j].push(v),
                _ => {
                    return Err(Error::BadCell {
                        row,
                        column: j + 1,
                        cell: cell.to_owned(),
                    })
                }
            }
        }
    }
    if columns[0].len() < 2 {
        return Err(Error::TooShort(format!(
            "{} has {} data rows, need at least 2",
            path.display(),
            columns[0].len()
        )));
    }

    let channels = names
        .into_iter()
        .zip(columns)
        .map(|(name, values)| TimeSeries::new(name, values))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(channels)
}

/// Writes `dataset` as comma-separated text. Floats use the shortest
/// representation that parses back to the identical double.
pub fn write_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("cannot write an empty dataset".into()));
    }
    let to_err = |e: csv::Error| Error::Csv {
        path: "<writer>".into(),
        message: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(dataset.names()).map_err(to_err)?;
    let mut row = Vec::with_capacity(dataset.width());
    for i in 0..dataset.len() {
        row.clear();
        row.extend(dataset.channels().iter().map(|c| c.values()[i].to_string()));
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<writer>".into(),
        source,
    })
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("cannot write an empty dataset".into()));
    }
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(dataset, BufWriter::new(file))
}

/// Delay-embedded states paired with the scalar value that follows each.
///
/// `source_indices[i]` is the time index of the most recent coordinate of
/// state `i`; its successor is the sample at `source_indices[i] + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSeries {
    states: Vec<f64>,
    successors: Vec<f64>,
    source_indices: Vec<usize>,
    dim: usize,
    tau: usize,
}

impl StateSeries {
    /// Assembles a state series from row-major states.
    pub fn from_parts(
        states: Vec<f64>,
        successors: Vec<f64>,
        source_indices: Vec<usize>,
        dim: usize,
        tau: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("state dimension must be positive".into()));
        }
        let n = successors.len();
        if states.len() != n * dim || source_indices.len() != n {
            return Err(Error::Misaligned(format!(
                "{} state values, {} successors, {} indices at dimension {dim}",
                states.len(),
                n,
                source_indices.len()
            )));
        }
        Ok(Self {
            states,
            successors,
            source_indices,
            dim,
            tau,
        })
    }

    pub fn len(&self) -> usize {
        self.successors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.successors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major N×d state matrix.
    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn successors(&self) -> &[f64] {
        &self.successors
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    /// Keeps only the given columns, in the given order.
    pub fn project(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() || columns.iter().any(|&c| c >= self.dim) {
            return Err(Error::InvalidParameter(format!(
                "projection columns {columns:?} out of range for dimension {}",
                self.dim
            )));
        }
        let states = (0..self.len())
            .flat_map(|i| {
                let row = self.state(i);
                columns.iter().map(move |&c| row[c])
            })
            .collect();
        Self::from_parts(
            states,
            self.successors.clone(),
            self.source_indices.clone(),
            columns.len(),
            self.tau,
        )
    }
}

/// Takens delay embedding: state `i` is `(v[i], v[i+tau], …, v[i+(d-1)tau])`
/// and its successor is `v[i+(d-1)tau+1]`.
pub fn delay_embed(series: &TimeSeries, dim: usize, tau: usize) -> Result<StateSeries> {
    if dim == 0 || tau == 0 {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension and delay must be positive, got d={dim}, tau={tau}"
        )));
    }
    let span = (dim - 1) * tau;
    let len = series.len();
    if len < span + 2 {
        return Err(Error::TooShort(format!(
            "channel {:?} has {len} samples, embedding d={dim}, tau={tau} needs at least {}",
            series.name(),
            span + 2
        )));
    }
    let v = series.values();
    let n = len - span - 1;
    let mut states = Vec::with_capacity(n * dim);
    for i in 0..n {
        states.extend((0..dim).map(|j| v[i + j * tau]));
    }
    let successors = v[span + 1..].to_vec();
    let source_indices = (span..span + n).collect();
    StateSeries::from_parts(states, successors, source_indices, dim, tau)
}

/// Concatenates two time-aligned state series row by row. Successors come
/// from `cond_a`.
pub fn joint_embed(cond_a: &StateSeries, cond_b: &StateSeries) -> Result<StateSeries> {
    if cond_a.len() != cond_b.len() {
        return Err(Error::Misaligned(format!(
            "state series lengths differ: {} vs {}",
            cond_a.len(),
            cond_b.len()
        )));
    }
    if let Some(i) = cond_a
        .source_indices()
        .iter()
        .zip(cond_b.source_indices())
        .position(|(a, b)| a != b)
    {
        return Err(Error::Misaligned(format!(
            "state {i} refers to time {} in one series and {} in the other",
            cond_a.source_indices()[i],
            cond_b.source_indices()[i]
        )));
    }
    let dim = cond_a.dim() + cond_b.dim();
    let mut states = Vec::with_capacity(cond_a.len() * dim);
    for i in 0..cond_a.len() {
        states.extend_from_slice(cond_a.state(i));
        states.extend_from_slice(cond_b.state(i));
    }
    StateSeries::from_parts(
        states,
        cond_a.successors().to_vec(),
        cond_a.source_indices().to_vec(),
        dim,
        cond_a.tau(),
    )
}
