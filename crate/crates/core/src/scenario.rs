//! Drive-cycle current profiles and fault schedules.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};

/// Load current sampled at a fixed period, discharge-positive amperes.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentProfile {
    dt: f64,
    samples: Vec<f64>,
}

impl CurrentProfile {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        positive("dt", dt)?;
        if let Some(k) = samples.iter().position(|i| !i.is_finite()) {
            return Err(Error::NonFiniteSample(k as f64 * dt));
        }
        Ok(Self { dt, samples })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time span covered, `len * dt`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// Reads a `t_s,i_a` CSV with uniform time spacing.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t_s: f64,
            i_a: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let rows: Vec<Row> = rdr.deserialize().collect::<Result<_, _>>()?;
        if rows.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: rows.len(),
            });
        }
        let dt = rows[1].t_s - rows[0].t_s;
        positive("profile dt", dt)?;
        for w in rows.windows(2) {
            let step = w[1].t_s - w[0].t_s;
            if (step - dt).abs() > 1e-6 * dt {
                return Err(Error::InvalidParameter {
                    name: "profile t_s",
                    value: w[1].t_s,
                    reason: "profile samples must be uniformly spaced",
                });
            }
        }
        Self::new(dt, rows.into_iter().map(|r| r.i_a).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(File::open(path)?)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t_s", "i_a"])?;
        for (k, i) in self.samples.iter().enumerate() {
            wtr.serialize((k as f64 * self.dt, i))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum FaultKind {
    /// Resistor across the cell terminals, inside the current sensor.
    ShortResistor { ohms: f64 },
    /// Extra load current seen by the sensor; no internal short.
    ExtraDischargePulse { amps: f64 },
}

impl FaultKind {
    pub fn is_real_fault(&self) -> bool {
        matches!(self, FaultKind::ShortResistor { .. })
    }

    pub fn short_ohms(&self) -> Option<f64> {
        match *self {
            FaultKind::ShortResistor { ohms } => Some(ohms),
            FaultKind::ExtraDischargePulse { .. } => None,
        }
    }
}

/// One scheduled event, active on `[t_on, t_off)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub t_on: f64,
    pub t_off: f64,
    pub label: String,
}

impl FaultSpec {
    pub fn short(t_on: f64, t_off: f64, ohms: f64, label: impl Into<String>) -> Self {
        Self {
            kind: FaultKind::ShortResistor { ohms },
            t_on,
            t_off,
            label: label.into(),
        }
    }

    pub fn pulse(t_on: f64, t_off: f64, amps: f64, label: impl Into<String>) -> Self {
        Self {
            kind: FaultKind::ExtraDischargePulse { amps },
            t_on,
            t_off,
            label: label.into(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_off - self.t_on
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_on <= t && t < self.t_off
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_on.is_finite()
            && self.t_off.is_finite()
            && self.t_on >= 0.0
            && self.t_off > self.t_on)
        {
            return Err(Error::InvalidParameter {
                name: "t_off",
                value: self.t_off,
                reason: "fault window needs 0 <= t_on < t_off",
            });
        }
        match self.kind {
            FaultKind::ShortResistor { ohms } => {
                positive("ohms", ohms)?;
            }
            FaultKind::ExtraDischargePulse { amps } if !amps.is_finite() => {
                return Err(Error::InvalidParameter {
                    name: "amps",
                    value: amps,
                    reason: "must be finite",
                });
            }
            FaultKind::ExtraDischargePulse { .. } => {}
        }
        Ok(())
    }
}

/// Non-overlapping events sorted by onset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct FaultSchedule {
    events: Vec<FaultSpec>,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    events: Vec<FaultSpec>,
}

impl TryFrom<RawSchedule> for FaultSchedule {
    type Error = Error;
    fn try_from(raw: RawSchedule) -> Result<Self> {
        FaultSchedule::new(raw.events)
    }
}

impl From<FaultSchedule> for RawSchedule {
    fn from(s: FaultSchedule) -> Self {
        RawSchedule { events: s.events }
    }
}

impl FaultSchedule {
    pub fn new(mut events: Vec<FaultSpec>) -> Result<Self> {
        for ev in &events {
            ev.validate()?;
        }
        events.sort_by(|a, b| a.t_on.total_cmp(&b.t_on));
        for w in events.windows(2) {
            if w[1].t_on < w[0].t_off {
                return Err(Error::OverlappingFaults {
                    first: w[0].label.clone(),
                    second: w[1].label.clone(),
                });
            }
        }
        Ok(Self { events })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[FaultSpec] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn active_at(&self, t: f64) -> impl Iterator<Item = &FaultSpec> {
        self.events.iter().filter(move |e| e.contains(t))
    }

    /// Events that represent a real internal short.
    pub fn real_faults(&self) -> impl Iterator<Item = &FaultSpec> {
        self.events.iter().filter(|e| e.kind.is_real_fault())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub const SEVERE_FAULT_OHMS: f64 = 0.07;
pub const MODERATE_FAULT_OHMS: f64 = 0.10;
pub const HIDDEN_FAULT_OHMS: f64 = 0.25;
pub const FALSE_FAULT_AMPS: f64 = 50.0;

/// The eleven-event replay schedule: four severe, four moderate and two
/// hidden shorts plus one false-fault discharge pulse (#11).
pub fn table1_schedule() -> FaultSchedule {
    let events = vec![
        FaultSpec::short(377.0, 406.0, HIDDEN_FAULT_OHMS, "#1"),
        FaultSpec::short(1640.0, 1672.0, MODERATE_FAULT_OHMS, "#2"),
        FaultSpec::short(2927.0, 2955.0, SEVERE_FAULT_OHMS, "#3"),
        FaultSpec::short(4489.0, 4518.0, HIDDEN_FAULT_OHMS, "#4"),
        FaultSpec::short(6083.0, 6113.0, MODERATE_FAULT_OHMS, "#5"),
        FaultSpec::short(7708.0, 7738.0, SEVERE_FAULT_OHMS, "#6"),
        FaultSpec::short(9075.0, 9103.0, MODERATE_FAULT_OHMS, "#7"),
        FaultSpec::short(10319.0, 10350.0, SEVERE_FAULT_OHMS, "#8"),
        FaultSpec::short(12235.0, 12264.0, MODERATE_FAULT_OHMS, "#9"),
        FaultSpec::short(15299.0, 15328.0, SEVERE_FAULT_OHMS, "#10"),
        FaultSpec::pulse(13910.0, 13920.0, FALSE_FAULT_AMPS, "#11"),
    ];
    FaultSchedule::new(events).expect("replay schedule is well-formed")
}

/// Duration that covers every replay event.
pub const TABLE1_DURATION_S: f64 = 16000.0;

/// Windows where the replay schedule injects its hidden faults.
pub fn table1_hidden_windows() -> Vec<(f64, f64)> {
    table1_schedule()
        .events()
        .iter()
        .filter(|e| e.kind.short_ohms() == Some(HIDDEN_FAULT_OHMS))
        .map(|e| (e.t_on, e.t_off))
        .collect()
}

/// Charge-pulse current planted under each hidden-fault window.
pub const PEAK_CHARGE_AMPS: f64 = -45.0;
const PEAK_CHARGE_LEAD_S: f64 = 10.0;
const PEAK_CHARGE_TAIL_S: f64 = 5.0;

// Net discharged charge (Ah) beyond which the generator forces the opposite sign.
const BALANCE_AH: f64 = 3.0;

/// Pseudo-random piecewise-constant drive cycle standing in for FUDS.
///
/// Segments last 5-60 s with amplitudes in [-30, +60] A and occasional rest.
/// Sign choice is biased to keep the net charge near zero over long runs.
/// A peak charge pulse ([`PEAK_CHARGE_AMPS`]) covers each hidden-fault window
/// of [`table1_schedule`] that falls inside `duration`.
pub fn synth_drive_cycle(duration: f64, dt: f64, seed: u64) -> Result<CurrentProfile> {
    synth_drive_cycle_with(duration, dt, seed, &table1_hidden_windows())
}

/// As [`synth_drive_cycle`], with explicit charge-pulse windows.
pub fn synth_drive_cycle_with(
    duration: f64,
    dt: f64,
    seed: u64,
    charge_windows: &[(f64, f64)],
) -> Result<CurrentProfile> {
    positive("dt", dt)?;
    positive("duration", duration)?;
    let n = (duration / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    let mut net_ah = 0.0;
    while samples.len() < n {
        let seg_s = rng.random_range(5..=60) as f64;
        let seg_n = ((seg_s / dt).round() as usize).max(1);
        let amps = if rng.random_bool(0.1) {
            0.0
        } else {
            let discharge = if net_ah > BALANCE_AH {
                false
            } else if net_ah < -BALANCE_AH {
                true
            } else {
                rng.random_bool(1.0 / 3.0)
            };
            if discharge {
                rng.random_range(5.0..=60.0)
            } else {
                rng.random_range(-30.0..=-5.0)
            }
        };
        let take = seg_n.min(n - samples.len());
        samples.extend(std::iter::repeat_n(amps, take));
        net_ah += amps * take as f64 * dt / 3600.0;
    }
    for &(t_on, t_off) in charge_windows {
        let start = ((t_on - PEAK_CHARGE_LEAD_S).max(0.0) / dt).floor() as usize;
        let stop = (((t_off + PEAK_CHARGE_TAIL_S) / dt).ceil() as usize).min(n);
        if start < stop {
            samples[start..stop].fill(PEAK_CHARGE_AMPS);
        }
    }
    CurrentProfile::new(dt, samples)
}
