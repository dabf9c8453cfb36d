//! Simulated traces and their CSV form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::Sample;
use crate::error::Result;

/// One simulated sample: the measured columns plus simulator truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// Measured current (noisy).
    pub i: f64,
    /// Measured terminal voltage (noisy).
    pub v: f64,
    pub soc_true: f64,
    pub i_sc_true: f64,
    pub fault_active: bool,
    /// Noise-free load current.
    pub i_true: f64,
    pub ocv_real: f64,
    pub u_polar: f64,
    pub r0_true: f64,
}

impl TraceRow {
    pub fn sample(&self) -> Sample {
        Sample {
            t: self.t,
            i: self.i,
            v: self.v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    dt: f64,
    rows: Vec<TraceRow>,
}

#[derive(Serialize)]
struct CsvRow {
    t_s: f64,
    i_a: f64,
    v_v: f64,
    soc_true: f64,
    i_sc_true: f64,
    fault_active: bool,
}

#[derive(Deserialize)]
struct SampleRow {
    t_s: f64,
    i_a: f64,
    v_v: f64,
}

impl Trace {
    pub fn new(dt: f64, rows: Vec<TraceRow>) -> Self {
        Self { dt, rows }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = Sample> + '_ {
        self.rows.iter().map(TraceRow::sample)
    }

    /// Writes `t_s,i_a,v_v,soc_true,i_sc_true,fault_active`.
    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in &self.rows {
            wtr.serialize(CsvRow {
                t_s: r.t,
                i_a: r.i,
                v_v: r.v,
                soc_true: r.soc_true,
                i_sc_true: r.i_sc_true,
                fault_active: r.fault_active,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_writer(BufWriter::new(File::create(path)?))
    }
}

/// Reads the `t_s,i_a,v_v` columns of a trace CSV; other columns are ignored.
pub fn read_samples<R: Read>(reader: R) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let SampleRow { t_s, i_a, v_v } = row?;
        out.push(Sample {
            t: t_s,
            i: i_a,
            v: v_v,
        });
    }
    Ok(out)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    read_samples(BufReader::new(File::open(path)?))
}
