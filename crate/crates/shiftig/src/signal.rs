//! Core multi-lead segment types, per-lead normalization, and CSV I/O.
//!
//! A segment is a C×T matrix: one row per lead, one column per sample.
//! All types are immutable after construction and validated on entry, so
//! downstream numeric code never has to re-check for NaNs or ragged shapes.

use std::io;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// A multi-lead segment: C leads by T samples, plus lead labels and the
/// sampling rate.
///
/// Invariants enforced at construction: C ≥ 1, T ≥ 2, every entry finite,
/// one label per lead, positive finite sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadTimeMatrix {
    data: Array2<f64>,
    lead_names: Vec<String>,
    sample_rate_hz: f64,
}

impl LeadTimeMatrix {
    pub fn new(data: Array2<f64>, lead_names: Vec<String>, sample_rate_hz: f64) -> Result<Self> {
        let (c, t) = data.dim();
        if c < 1 || t < 2 {
            return Err(Error::InvalidConfig(format!(
                "segment must be at least 1x2, got {c}x{t}"
            )));
        }
        if lead_names.len() != c {
            return Err(Error::InvalidConfig(format!(
                "{} lead names for {c} leads",
                lead_names.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            data,
            lead_names,
            sample_rate_hz,
        })
    }

    /// Builds a matrix with leads labeled `L1..LC`.
    pub fn with_default_names(data: Array2<f64>, sample_rate_hz: f64) -> Result<Self> {
        let names = (1..=data.nrows()).map(|i| format!("L{i}")).collect();
        Self::new(data, names, sample_rate_hz)
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn lead(&self, index: usize) -> ArrayView1<'_, f64> {
        self.data.row(index)
    }

    pub fn lead_names(&self) -> &[String] {
        &self.lead_names
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// (C, T).
    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn num_leads(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Resolves a lead selector: first by exact label, then as a 0-based index.
    pub fn lead_index(&self, selector: &str) -> Result<usize> {
        if let Some(i) = self.lead_names.iter().position(|n| n == selector) {
            return Ok(i);
        }
        if let Ok(i) = selector.parse::<usize>() {
            if i < self.num_leads() {
                return Ok(i);
            }
        }
        Err(Error::LeadNotFound(selector.to_string()))
    }

    pub(crate) fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            let (er, ec) = self.shape();
            let (r, c) = other.shape();
            return Err(Error::ShapeMismatch {
                expected_rows: er,
                expected_cols: ec,
                rows: r,
                cols: c,
            });
        }
        Ok(())
    }
}

/// Elementwise deviation of a segment from its baseline (same C×T shape).
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMatrix {
    data: Array2<f64>,
}

impl DeltaMatrix {
    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn lead(&self, index: usize) -> ArrayView1<'_, f64> {
        self.data.row(index)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }
}

/// Result of [`normalize`]: the rescaled segment plus the indices of any
/// constant leads that were flattened to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub signal: LeadTimeMatrix,
    pub constant_leads: Vec<usize>,
}

impl Normalized {
    pub fn has_warnings(&self) -> bool {
        !self.constant_leads.is_empty()
    }
}

/// Per-lead min-max scaling to [0, 1].
///
/// Every non-constant lead ends up with min 0 and max 1 exactly. Constant
/// leads carry no deviation information, so they map to all zeros and are
/// reported in `constant_leads`.
pub fn normalize(x: &LeadTimeMatrix) -> Result<Normalized> {
    let (c, t) = x.shape();
    let mut out = Array2::<f64>::zeros((c, t));
    let mut constant_leads = Vec::new();
    for i in 0..c {
        let lead = x.lead(i);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in lead.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi > lo {
            let span = hi - lo;
            for (j, &v) in lead.iter().enumerate() {
                out[(i, j)] = (v - lo) / span;
            }
        } else {
            constant_leads.push(i);
        }
    }
    let signal = LeadTimeMatrix::new(out, x.lead_names().to_vec(), x.sample_rate_hz())?;
    Ok(Normalized {
        signal,
        constant_leads,
    })
}

/// Elementwise `x − x_base`.
///
/// Requires identical shapes and sample rates.
pub fn delta(x: &LeadTimeMatrix, x_base: &LeadTimeMatrix) -> Result<DeltaMatrix> {
    x.same_shape(x_base)?;
    if x.sample_rate_hz() != x_base.sample_rate_hz() {
        return Err(Error::SampleRateMismatch {
            a: x.sample_rate_hz(),
            b: x_base.sample_rate_hz(),
        });
    }
    Ok(DeltaMatrix {
        data: &x.data - &x_base.data,
    })
}

/// Reads a segment from CSV with header `time,<lead1>,...,<leadC>`.
///
/// The time column must be strictly increasing and is used only to infer the
/// sample rate (median reciprocal spacing); the data columns become leads.
pub fn read_csv<R: io::Read>(reader: R) -> Result<LeadTimeMatrix> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers[0].trim() != "time" {
        return Err(Error::CsvFormat(
            "first header column must be `time`".to_string(),
        ));
    }
    let lead_names: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if lead_names.is_empty() {
        return Err(Error::CsvFormat("no lead columns".to_string()));
    }

    let mut times = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); lead_names.len()];
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != lead_names.len() + 1 {
            return Err(Error::CsvFormat(format!(
                "row {} has {} fields, expected {}",
                row_idx + 2,
                record.len(),
                lead_names.len() + 1
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::CsvFormat(format!("cannot parse `{s}` as a number")))
        };
        let t = parse(&record[0])?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::CsvFormat(format!(
                    "time column not strictly increasing at row {}",
                    row_idx + 2
                )));
            }
        }
        times.push(t);
        for (col, slot) in columns.iter_mut().enumerate() {
            slot.push(parse(&record[col + 1])?);
        }
    }
    if times.len() < 2 {
        return Err(Error::CsvFormat("need at least 2 samples".to_string()));
    }

    let mut rates: Vec<f64> = times.windows(2).map(|w| 1.0 / (w[1] - w[0])).collect();
    rates.sort_by(|a, b| a.total_cmp(b));
    let sample_rate = if rates.len() % 2 == 1 {
        rates[rates.len() / 2]
    } else {
        0.5 * (rates[rates.len() / 2 - 1] + rates[rates.len() / 2])
    };

    let t_len = times.len();
    let c = lead_names.len();
    let mut data = Array2::<f64>::zeros((c, t_len));
    for (i, col) in columns.into_iter().enumerate() {
        for (j, v) in col.into_iter().enumerate() {
            data[(i, j)] = v;
        }
    }
    LeadTimeMatrix::new(data, lead_names, sample_rate)
}

/// Writes a segment in the same CSV format `read_csv` accepts.
///
/// Times are `i / sample_rate`. Output is byte-deterministic for identical
/// inputs.
pub fn write_csv<W: io::Write>(x: &LeadTimeMatrix, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string()];
    header.extend(x.lead_names().iter().cloned());
    wtr.write_record(&header)?;
    let (c, t) = x.shape();
    for j in 0..t {
        let mut row = Vec::with_capacity(c + 1);
        row.push(format!("{}", j as f64 / x.sample_rate_hz()));
        for i in 0..c {
            row.push(format!("{}", x.data[(i, j)]));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
