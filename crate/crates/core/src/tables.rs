//! Offline SOC lookup tables: the ohmic resistance map R0(SOC) and the
//! open-circuit voltage map OCV(SOC).
//!
//! Tables are piecewise-linear and clamp outside their breakpoint range.
//! Clamping is reported through [`Interp::clamped`] rather than treated as
//! an error, so a detector whose SOC estimate drifts stays defined.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which physical quantity a table stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableKind {
    /// Open-circuit voltage, volts.
    Ocv,
    /// Ohmic resistance, ohms.
    R0,
}

/// Result of a table lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interp {
    pub value: f64,
    /// The query fell outside the breakpoint range and was clamped.
    pub clamped: bool,
}

/// Anything the detector can query for R0 at a given SOC.
///
/// Implemented by [`LookupTable1D`]; tests wrap it to count lookups.
pub trait SocLookup {
    fn lookup(&self, soc: f64) -> Interp;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable1D {
    kind: TableKind,
    soc: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    soc: f64,
    value: f64,
}

impl LookupTable1D {
    /// Builds a validated table from matching breakpoint and value vectors.
    pub fn new(kind: TableKind, soc: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if soc.is_empty() {
            return Err(Error::EmptyTable);
        }
        if soc.len() != values.len() || soc.len() < 2 {
            return Err(Error::TooFewBreakpoints(soc.len().min(values.len())));
        }
        for (row, &s) in soc.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::SocOutOfRange(s));
            }
            if row > 0 && s <= soc[row - 1] {
                return Err(Error::NonMonotoneBreakpoints {
                    row,
                    prev: soc[row - 1],
                    next: s,
                });
            }
        }
        for (row, &value) in values.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                let reason = match kind {
                    TableKind::R0 => "resistance must be positive",
                    TableKind::Ocv => "voltage must be positive",
                };
                return Err(Error::InvalidTableValue { row, value, reason });
            }
            if kind == TableKind::Ocv && row > 0 && value < values[row - 1] {
                return Err(Error::InvalidTableValue {
                    row,
                    value,
                    reason: "OCV must be non-decreasing in SOC",
                });
            }
        }
        Ok(Self { kind, soc, values })
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.soc
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.soc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soc.is_empty()
    }

    /// SOC range covered by the breakpoints.
    pub fn range(&self) -> (f64, f64) {
        (self.soc[0], self.soc[self.soc.len() - 1])
    }

    pub fn interp(&self, soc: f64) -> Interp {
        interp_sorted(&self.soc, &self.values, soc)
    }

    /// Parses the two-column `soc,value` CSV format.
    pub fn from_reader<R: Read>(reader: R, kind: TableKind) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut soc = Vec::new();
        let mut values = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            soc.push(row.soc);
            values.push(row.value);
        }
        Self::new(kind, soc, values)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for (&soc, &value) in self.soc.iter().zip(&self.values) {
            wtr.serialize(Row { soc, value })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_writer(File::create(path)?)
    }
}

impl SocLookup for LookupTable1D {
    #[inline]
    fn lookup(&self, soc: f64) -> Interp {
        self.interp(soc)
    }
}

impl<T: SocLookup + ?Sized> SocLookup for &T {
    #[inline]
    fn lookup(&self, soc: f64) -> Interp {
        (**self).lookup(soc)
    }
}

impl<T: SocLookup + ?Sized> SocLookup for std::sync::Arc<T> {
    #[inline]
    fn lookup(&self, soc: f64) -> Interp {
        (**self).lookup(soc)
    }
}

/// Loads and validates a table file.
pub fn load_table(path: impl AsRef<Path>, kind: TableKind) -> Result<LookupTable1D> {
    LookupTable1D::from_reader(File::open(path)?, kind)
}

fn interp_sorted(xs: &[f64], ys: &[f64], x: f64) -> Interp {
    let last = xs.len() - 1;
    if x.is_nan() {
        return Interp {
            value: ys[0],
            clamped: true,
        };
    }
    if x <= xs[0] {
        return Interp {
            value: ys[0],
            clamped: x < xs[0],
        };
    }
    if x >= xs[last] {
        return Interp {
            value: ys[last],
            clamped: x > xs[last],
        };
    }
    // first index with xs[hi] > x; 1 <= hi <= last here
    let hi = xs.partition_point(|&b| b <= x);
    let lo = hi - 1;
    let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    Interp {
        value: ys[lo] + w * (ys[hi] - ys[lo]),
        clamped: false,
    }
}

fn validate_curve(curve: &[(f64, f64)]) -> Result<()> {
    if curve.len() < 2 {
        return Err(Error::TooFewBreakpoints(curve.len()));
    }
    for (row, w) in curve.windows(2).enumerate() {
        let ((s0, v0), (s1, v1)) = (w[0], w[1]);
        if s1 <= s0 {
            return Err(Error::NonMonotoneBreakpoints {
                row: row + 1,
                prev: s0,
                next: s1,
            });
        }
        if v1 < v0 {
            return Err(Error::InvalidTableValue {
                row: row + 1,
                value: v1,
                reason: "curve voltage must be non-decreasing in SOC",
            });
        }
    }
    Ok(())
}

/// Builds an OCV table by averaging a low-rate charge curve and a low-rate
/// discharge curve.
///
/// The output grid is the union of both SOC grids restricted to their common
/// range; each value is the mean of the two curves interpolated there.
pub fn build_ocv_table(charge: &[(f64, f64)], discharge: &[(f64, f64)]) -> Result<LookupTable1D> {
    validate_curve(charge)?;
    validate_curve(discharge)?;
    let lo = charge[0].0.max(discharge[0].0);
    let hi = charge[charge.len() - 1]
        .0
        .min(discharge[discharge.len() - 1].0);
    if lo >= hi {
        return Err(Error::DisjointRanges);
    }

    let mut grid: Vec<f64> = charge
        .iter()
        .chain(discharge)
        .map(|&(s, _)| s)
        .filter(|&s| s >= lo && s <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let (cs, cv): (Vec<f64>, Vec<f64>) = charge.iter().copied().unzip();
    let (ds, dv): (Vec<f64>, Vec<f64>) = discharge.iter().copied().unzip();
    let values = grid
        .iter()
        .map(|&s| 0.5 * (interp_sorted(&cs, &cv, s).value + interp_sorted(&ds, &dv, s).value))
        .collect();
    LookupTable1D::new(TableKind::Ocv, grid, values)
}
