//! Streaming pseudo-OCV difference detector.
//!
//! Per sample the detector adds the measured-current ohmic drop back onto
//! the terminal voltage, differences it against the previous sample and
//! compares the difference with the relaxed quantile thresholds:
//!
//! ```text
//! ocv_pseudo(k) = v(k) + R0(soc(k)) * i(k)
//! delta(k)      = ocv_pseudo(k) - ocv_pseudo(k - 1)
//! delta(k) < relaxed_minus  -> onset    (Healthy -> InFault)
//! delta(k) > relaxed_plus   -> clearance (InFault -> Healthy)
//! ```
//!
//! A hidden short current `i_sc` leaves a residual `-R0 * i_sc` in the
//! pseudo-OCV, so the onset step gives `i_sc ~ |delta| / R0` and
//! `r_sc ~ v * R0 / |delta|`.
//!
//! Each step costs one R0 lookup, one multiply and a handful of adds and
//! compares. State is fixed-size and nothing is allocated after construction.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::calibrate::Thresholds;
use crate::error::{positive, Error, Result};
use crate::tables::SocLookup;

/// One measurement: time (s), current (A, discharge-positive), voltage (V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub i: f64,
    pub v: f64,
}

pub fn pseudo_ocv<T: SocLookup + ?Sized>(sample: &Sample, soc: f64, r0_table: &T) -> f64 {
    sample.v + r0_table.lookup(soc).value * sample.i
}

/// Coulomb-counts `soc` over `dt` at current `i`; returns the new SOC and
/// whether it had to be clamped into [0, 1].
#[inline]
pub fn update_soc(soc: f64, i: f64, dt: f64, capacity_ah: f64) -> (f64, bool) {
    let next = soc - i * dt / (3600.0 * capacity_ah);
    let clamped = next.clamp(0.0, 1.0);
    (clamped, clamped != next)
}

fn onset_delta(delta_at_onset: f64) -> Result<f64> {
    if delta_at_onset.is_finite() && delta_at_onset != 0.0 {
        Ok(delta_at_onset.abs())
    } else {
        Err(Error::InvalidParameter {
            name: "delta_at_onset",
            value: delta_at_onset,
            reason: "must be finite and non-zero",
        })
    }
}

/// Short-circuit current implied by the onset step: `|delta| / r0`.
pub fn estimate_isc(delta_at_onset: f64, r0: f64) -> Result<f64> {
    positive("r0", r0)?;
    Ok(onset_delta(delta_at_onset)? / r0)
}

/// Short-circuit resistance: `v_meas * r0 / |delta|`.
pub fn estimate_rsc(v_meas: f64, r0: f64, delta_at_onset: f64) -> Result<f64> {
    positive("r0", r0)?;
    positive("v_meas", v_meas)?;
    Ok(v_meas * r0 / onset_delta(delta_at_onset)?)
}

/// Pseudo-OCV value for one sample and its difference to the previous one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoPoint {
    pub ocv_pseudo: f64,
    /// `None` for the first sample of a stream.
    pub delta: Option<f64>,
    pub soc: f64,
    pub r0: f64,
}

/// The recursion shared by calibration and detection: SOC by coulomb
/// counting the measured current, pseudo-OCV and its first difference.
#[derive(Debug, Clone)]
pub struct PseudoOcvStream<T> {
    r0_table: T,
    capacity_ah: f64,
    soc_est: f64,
    prev: Option<Prev>,
    clamped: bool,
}

#[derive(Debug, Clone, Copy)]
struct Prev {
    t: f64,
    i: f64,
    ocv_pseudo: f64,
}

impl<T: SocLookup> PseudoOcvStream<T> {
    pub fn new(r0_table: T, capacity_ah: f64, soc_init: f64) -> Result<Self> {
        positive("capacity_ah", capacity_ah)?;
        if !(0.0..=1.0).contains(&soc_init) {
            return Err(Error::InvalidParameter {
                name: "soc_init",
                value: soc_init,
                reason: "must lie in [0, 1]",
            });
        }
        Ok(Self {
            r0_table,
            capacity_ah,
            soc_est: soc_init,
            prev: None,
            clamped: false,
        })
    }

    /// Consumes one sample. The SOC is advanced with the previous sample's
    /// current over the elapsed interval before the R0 lookup.
    #[inline]
    pub fn push(&mut self, s: Sample) -> Result<PseudoPoint> {
        if !(s.t.is_finite() && s.i.is_finite() && s.v.is_finite()) {
            return Err(Error::NonFiniteSample(s.t));
        }
        if let Some(prev) = self.prev {
            if s.t <= prev.t {
                return Err(Error::OutOfOrder {
                    prev: prev.t,
                    next: s.t,
                });
            }
            let (soc, clamped) = update_soc(self.soc_est, prev.i, s.t - prev.t, self.capacity_ah);
            self.soc_est = soc;
            self.clamped |= clamped;
        }
        let lookup = self.r0_table.lookup(self.soc_est);
        self.clamped |= lookup.clamped;
        let ocv_pseudo = s.v + lookup.value * s.i;
        let delta = self.prev.map(|p| ocv_pseudo - p.ocv_pseudo);
        self.prev = Some(Prev {
            t: s.t,
            i: s.i,
            ocv_pseudo,
        });
        Ok(PseudoPoint {
            ocv_pseudo,
            delta,
            soc: self.soc_est,
            r0: lookup.value,
        })
    }

    pub fn soc_est(&self) -> f64 {
        self.soc_est
    }

    /// Set once any SOC update or table lookup was clamped.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    pub fn prev_ocv_pseudo(&self) -> Option<f64> {
        self.prev.map(|p| p.ocv_pseudo)
    }

    pub fn table(&self) -> &T {
        &self.r0_table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Healthy,
    InFault,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Healthy => "healthy",
            Phase::InFault => "in_fault",
        })
    }
}

/// A detected fault: onset, optional clearance and the onset estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEvent {
    /// Sequence number within the stream, starting at 1.
    pub id: u32,
    pub t_onset: f64,
    pub t_clear: Option<f64>,
    pub delta_at_onset: f64,
    pub i_sc_est: f64,
    pub r_sc_est: f64,
}

impl FaultEvent {
    pub fn label(&self) -> String {
        format!("E{}", self.id)
    }

    pub fn duration(&self) -> Option<f64> {
        self.t_clear.map(|c| c - self.t_onset)
    }
}

/// Edge emitted by a detector step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emission {
    Onset(FaultEvent),
    Clearance(FaultEvent),
    /// Upper crossing with no open event; reported, never turned into an event.
    StrayClearance {
        t: f64,
        delta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub ocv_pseudo: f64,
    pub delta: Option<f64>,
    /// Phase after this sample.
    pub phase: Phase,
    pub emission: Option<Emission>,
}

/// One detector instance owns one stream.
#[derive(Debug, Clone)]
pub struct Detector<T> {
    stream: PseudoOcvStream<T>,
    thresholds: Thresholds,
    open_event: Option<FaultEvent>,
    events_opened: u32,
}

impl<T: SocLookup> Detector<T> {
    pub fn new(
        r0_table: T,
        thresholds: Thresholds,
        capacity_ah: f64,
        soc_init: f64,
    ) -> Result<Self> {
        thresholds.validate()?;
        Ok(Self {
            stream: PseudoOcvStream::new(r0_table, capacity_ah, soc_init)?,
            thresholds,
            open_event: None,
            events_opened: 0,
        })
    }

    pub fn phase(&self) -> Phase {
        if self.open_event.is_some() {
            Phase::InFault
        } else {
            Phase::Healthy
        }
    }

    pub fn open_event(&self) -> Option<&FaultEvent> {
        self.open_event.as_ref()
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn stream(&self) -> &PseudoOcvStream<T> {
        &self.stream
    }

    pub fn step(&mut self, sample: Sample) -> Result<StepOutput> {
        let point = self.stream.push(sample)?;
        let emission = match point.delta {
            Some(delta) => self.apply_rule(sample, delta, point.r0)?,
            None => None,
        };
        Ok(StepOutput {
            ocv_pseudo: point.ocv_pseudo,
            delta: point.delta,
            phase: self.phase(),
            emission,
        })
    }

    fn apply_rule(&mut self, sample: Sample, delta: f64, r0: f64) -> Result<Option<Emission>> {
        match self.open_event {
            None if delta < self.thresholds.relaxed_minus => {
                // the R0 used for the estimates is the one from this sample's lookup
                let event = FaultEvent {
                    id: self.events_opened + 1,
                    t_onset: sample.t,
                    t_clear: None,
                    delta_at_onset: delta,
                    i_sc_est: estimate_isc(delta, r0)?,
                    r_sc_est: estimate_rsc(sample.v, r0, delta)?,
                };
                self.events_opened += 1;
                self.open_event = Some(event);
                Ok(Some(Emission::Onset(event)))
            }
            None if delta > self.thresholds.relaxed_plus => {
                Ok(Some(Emission::StrayClearance { t: sample.t, delta }))
            }
            Some(mut event) if delta > self.thresholds.relaxed_plus => {
                event.t_clear = Some(sample.t);
                self.open_event = None;
                Ok(Some(Emission::Clearance(event)))
            }
            _ => Ok(None),
        }
    }

    /// Ends the stream, returning an event still open at the last sample.
    pub fn finish(self) -> Option<FaultEvent> {
        self.open_event
    }
}

/// Everything a full pass over a stream produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Detection {
    /// Completed events, plus a trailing unclosed one if the stream ended
    /// in fault.
    pub events: Vec<FaultEvent>,
    pub stray_clearances: Vec<(f64, f64)>,
}

/// Streams `samples` through a fresh detector.
pub fn detect<T: SocLookup>(
    samples: impl IntoIterator<Item = Sample>,
    r0_table: T,
    thresholds: Thresholds,
    capacity_ah: f64,
    soc_init: f64,
) -> Result<Detection> {
    let mut det = Detector::new(r0_table, thresholds, capacity_ah, soc_init)?;
    let mut out = Detection::default();
    for s in samples {
        match det.step(s)?.emission {
            Some(Emission::Clearance(e)) => out.events.push(e),
            Some(Emission::StrayClearance { t, delta }) => out.stray_clearances.push((t, delta)),
            Some(Emission::Onset(_)) | None => {}
        }
    }
    out.events.extend(det.finish());
    Ok(out)
}

/// Whole-trace evaluation of the same rule: the pseudo-OCV series and its
/// differences are computed first, then thresholded in one sweep.
pub fn detect_offline<T: SocLookup>(
    samples: &[Sample],
    r0_table: &T,
    thresholds: &Thresholds,
    capacity_ah: f64,
    soc_init: f64,
) -> Result<Detection> {
    thresholds.validate()?;
    positive("capacity_ah", capacity_ah)?;
    for (k, s) in samples.iter().enumerate() {
        if !(s.t.is_finite() && s.i.is_finite() && s.v.is_finite()) {
            return Err(Error::NonFiniteSample(s.t));
        }
        if k > 0 && s.t <= samples[k - 1].t {
            return Err(Error::OutOfOrder {
                prev: samples[k - 1].t,
                next: s.t,
            });
        }
    }

    let mut soc = Vec::with_capacity(samples.len());
    let mut current = soc_init;
    for (k, s) in samples.iter().enumerate() {
        if k > 0 {
            let prev = &samples[k - 1];
            current = update_soc(current, prev.i, s.t - prev.t, capacity_ah).0;
        }
        soc.push(current);
    }
    let r0: Vec<f64> = soc.iter().map(|&x| r0_table.lookup(x).value).collect();
    let pseudo: Vec<f64> = samples
        .iter()
        .zip(&r0)
        .map(|(s, &r)| s.v + r * s.i)
        .collect();
    let deltas: Vec<f64> = pseudo.windows(2).map(|w| w[1] - w[0]).collect();

    let mut out = Detection::default();
    let mut open: Option<FaultEvent> = None;
    for (j, &d) in deltas.iter().enumerate() {
        let k = j + 1;
        let s = samples[k];
        if open.is_none() && d < thresholds.relaxed_minus {
            open = Some(FaultEvent {
                id: out.events.len() as u32 + 1,
                t_onset: s.t,
                t_clear: None,
                delta_at_onset: d,
                i_sc_est: estimate_isc(d, r0[k])?,
                r_sc_est: estimate_rsc(s.v, r0[k], d)?,
            });
        } else if d > thresholds.relaxed_plus {
            match open.take() {
                Some(mut e) => {
                    e.t_clear = Some(s.t);
                    out.events.push(e);
                }
                None => out.stray_clearances.push((s.t, d)),
            }
        }
    }
    out.events.extend(open);
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    t_onset_s: f64,
    t_clear_s: Option<f64>,
    delta_v: f64,
    i_sc_a: f64,
    r_sc_ohm: f64,
    label: String,
}

/// Writes `t_onset_s,t_clear_s,delta_v,i_sc_a,r_sc_ohm,label`; an unclosed
/// event leaves `t_clear_s` empty.
pub fn write_events<W: Write>(writer: W, events: &[FaultEvent]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    if events.is_empty() {
        wtr.write_record([
            "t_onset_s",
            "t_clear_s",
            "delta_v",
            "i_sc_a",
            "r_sc_ohm",
            "label",
        ])?;
    }
    for e in events {
        wtr.serialize(EventRow {
            t_onset_s: e.t_onset,
            t_clear_s: e.t_clear,
            delta_v: e.delta_at_onset,
            i_sc_a: e.i_sc_est,
            r_sc_ohm: e.r_sc_est,
            label: e.label(),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_events<R: Read>(reader: R) -> Result<Vec<FaultEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize().enumerate() {
        let row: EventRow = row?;
        let id = row
            .label
            .strip_prefix('E')
            .and_then(|n| n.parse().ok())
            .unwrap_or(k as u32 + 1);
        out.push(FaultEvent {
            id,
            t_onset: row.t_onset_s,
            t_clear: row.t_clear_s,
            delta_at_onset: row.delta_v,
            i_sc_est: row.i_sc_a,
            r_sc_est: row.r_sc_ohm,
        });
    }
    Ok(out)
}

/// Streams the `t_s,ocv_pseudo_v,delta_v,phase` plotting CSV.
pub struct DiagnosticsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(["t_s", "ocv_pseudo_v", "delta_v", "phase"])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, t: f64, step: &StepOutput) -> Result<()> {
        self.inner
            .serialize((t, step.ocv_pseudo, step.delta, step.phase.to_string()))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
