//! Scoring detector output against a known fault schedule.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::detector::FaultEvent;
use crate::error::Result;
use crate::scenario::FaultSchedule;

/// Default onset matching tolerance, seconds.
pub const DEFAULT_TOL_S: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventScore {
    pub label: String,
    /// Detected onset minus scheduled onset.
    pub onset_error_s: f64,
    /// Detected clearance minus scheduled end; `None` if never cleared.
    pub clear_error_s: Option<f64>,
    pub r_sc_true: Option<f64>,
    pub r_sc_est: f64,
    pub r_sc_rel_err: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub true_positives: usize,
    pub missed: usize,
    pub false_alarms: usize,
    /// One row per matched real fault, in schedule order.
    pub per_event: Vec<EventScore>,
    pub missed_labels: Vec<String>,
    /// Onset times of detected events that matched nothing.
    pub false_alarm_onsets: Vec<f64>,
}

impl EvalReport {
    pub fn real_faults(&self) -> usize {
        self.true_positives + self.missed
    }

    pub fn is_perfect(&self) -> bool {
        self.missed == 0 && self.false_alarms == 0
    }
}

/// Greedy one-to-one matching of detected onsets to real-fault onsets.
///
/// Only short-resistor events count as real faults; a detection near an
/// extra-discharge pulse (or anywhere else) is a false alarm. Pairs are
/// taken closest-first, so the result does not depend on the order of
/// `detected`.
pub fn match_events(detected: &[FaultEvent], schedule: &FaultSchedule, tol: f64) -> EvalReport {
    let mut det: Vec<&FaultEvent> = detected.iter().collect();
    det.sort_by(|a, b| {
        a.t_onset
            .total_cmp(&b.t_onset)
            .then_with(|| {
                a.t_clear
                    .unwrap_or(f64::INFINITY)
                    .total_cmp(&b.t_clear.unwrap_or(f64::INFINITY))
            })
            .then_with(|| a.r_sc_est.total_cmp(&b.r_sc_est))
            .then_with(|| a.delta_at_onset.total_cmp(&b.delta_at_onset))
    });
    let real: Vec<_> = schedule.real_faults().collect();

    let mut pairs = Vec::new();
    for (di, d) in det.iter().enumerate() {
        for (wi, w) in real.iter().enumerate() {
            let dist = (d.t_onset - w.t_on).abs();
            if dist <= tol {
                pairs.push((dist, wi, di));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut det_used = vec![false; det.len()];
    let mut win_match: Vec<Option<usize>> = vec![None; real.len()];
    for (_, wi, di) in pairs {
        if !det_used[di] && win_match[wi].is_none() {
            det_used[di] = true;
            win_match[wi] = Some(di);
        }
    }

    let mut report = EvalReport::default();
    for (w, m) in real.iter().zip(&win_match) {
        match *m {
            Some(di) => {
                let d = det[di];
                let r_sc_true = w.kind.short_ohms();
                report.true_positives += 1;
                report.per_event.push(EventScore {
                    label: w.label.clone(),
                    onset_error_s: d.t_onset - w.t_on,
                    clear_error_s: d.t_clear.map(|c| c - w.t_off),
                    r_sc_true,
                    r_sc_est: d.r_sc_est,
                    r_sc_rel_err: r_sc_true.map(|r| (d.r_sc_est - r).abs() / r),
                });
            }
            None => {
                report.missed += 1;
                report.missed_labels.push(w.label.clone());
            }
        }
    }
    for (d, used) in det.iter().zip(&det_used) {
        if !used {
            report.false_alarms += 1;
            report.false_alarm_onsets.push(d.t_onset);
        }
    }
    report
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

/// Human-readable fixed-column summary.
pub fn summarize(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}/{} detected, {} missed, {} false",
        report.true_positives,
        report.real_faults(),
        report.missed,
        report.false_alarms
    );
    let _ = writeln!(
        out,
        "{:<6} {:>10} {:>10} {:>10} {:>10} {:>9}",
        "event", "onset_err", "clear_err", "rsc_true", "rsc_est", "rsc_err%"
    );
    for e in &report.per_event {
        let _ = writeln!(
            out,
            "{:<6} {:>10.1} {:>10} {:>10} {:>10.4} {:>9}",
            e.label,
            e.onset_error_s,
            opt(e.clear_error_s, 1),
            opt(e.r_sc_true, 4),
            e.r_sc_est,
            opt(e.r_sc_rel_err.map(|x| 100.0 * x), 2),
        );
    }
    if !report.missed_labels.is_empty() {
        let _ = writeln!(out, "missed: {}", report.missed_labels.join(" "));
    }
    if !report.false_alarm_onsets.is_empty() {
        let onsets: Vec<String> = report
            .false_alarm_onsets
            .iter()
            .map(|t| format!("{t}"))
            .collect();
        let _ = writeln!(out, "false alarms at t = {} s", onsets.join(", "));
    }
    out
}

/// Per-event rows as CSV.
pub fn write_report_csv<W: Write>(writer: W, report: &EvalReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "label",
        "onset_error_s",
        "clear_error_s",
        "r_sc_true",
        "r_sc_est",
        "r_sc_rel_err",
    ])?;
    for e in &report.per_event {
        wtr.serialize((
            &e.label,
            e.onset_error_s,
            e.clear_error_s,
            e.r_sc_true,
            e.r_sc_est,
            e.r_sc_rel_err,
        ))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{table1_schedule, FaultSpec};

    fn ev(t_onset: f64, t_clear: f64, r: f64) -> FaultEvent {
        FaultEvent {
            id: 0,
            t_onset,
            t_clear: Some(t_clear),
            delta_at_onset: -0.05,
            i_sc_est: 50.0,
            r_sc_est: r,
        }
    }

    fn perfect() -> Vec<FaultEvent> {
        table1_schedule()
            .real_faults()
            .map(|w| ev(w.t_on, w.t_off, w.kind.short_ohms().unwrap()))
            .collect()
    }

    #[test]
    fn empty_report() {
        let r = match_events(&[], &FaultSchedule::empty(), 3.0);
        assert_eq!(r, EvalReport::default());
        let text = summarize(&r);
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn perfect_detection() {
        let r = match_events(&perfect(), &table1_schedule(), 3.0);
        assert_eq!((r.true_positives, r.missed, r.false_alarms), (10, 0, 0));
        assert!(r.per_event.iter().all(|e| e.r_sc_rel_err == Some(0.0)));
        let text = summarize(&r);
        assert!(text.starts_with("10/10 detected, 0 missed, 0 false"));
        assert_eq!(text.lines().count(), 12);
    }

    #[test]
    fn pulse_window_detection_is_false_alarm() {
        let r = match_events(&[ev(13910.0, 13920.0, 0.1)], &table1_schedule(), 3.0);
        assert_eq!(r.false_alarms, 1);
        assert_eq!(r.missed, 10);
    }

    #[test]
    fn tolerance_is_respected() {
        let sched = FaultSchedule::new(vec![FaultSpec::short(100.0, 130.0, 0.1, "a")]).unwrap();
        let d = [ev(103.5, 130.0, 0.1)];
        assert_eq!(match_events(&d, &sched, 3.0).true_positives, 0);
        assert_eq!(match_events(&d, &sched, 4.0).true_positives, 1);
    }

    #[test]
    fn one_to_one() {
        let sched = FaultSchedule::new(vec![FaultSpec::short(100.0, 130.0, 0.1, "a")]).unwrap();
        let d = [ev(101.0, 130.0, 0.1), ev(100.0, 130.0, 0.1)];
        let r = match_events(&d, &sched, 3.0);
        assert_eq!((r.true_positives, r.false_alarms), (1, 1));
        assert_eq!(r.per_event[0].onset_error_s, 0.0);
        assert_eq!(r.false_alarm_onsets, vec![101.0]);
    }

    #[test]
    fn summary_is_deterministic_and_csv_has_rows() {
        let r = match_events(&perfect(), &table1_schedule(), 3.0);
        assert_eq!(summarize(&r), summarize(&r.clone()));
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &r).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 11);
    }
}
