//! End-to-end replay: simulate healthy and faulted runs, calibrate on the
//! healthy one, detect on the faulted one, score against the schedule.

use crate::calibrate::{
    calibrate_thresholds, collect_deltas, Thresholds, DEFAULT_GAMMA, DEFAULT_P,
};
use crate::detector::{detect, Detection};
use crate::error::Result;
use crate::eval::{match_events, EvalReport, DEFAULT_TOL_S};
use crate::scenario::{
    synth_drive_cycle, table1_schedule, CurrentProfile, FaultSchedule, TABLE1_DURATION_S,
};
use crate::sim::{run_scenario, CellParams, NoiseSpec};
use crate::trace::Trace;

#[derive(Debug, Clone)]
pub struct ReplayConfig {
    pub params: CellParams,
    pub duration_s: f64,
    pub dt: f64,
    pub noise: NoiseSpec,
    pub p: f64,
    pub gamma: f64,
    pub tol_s: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            params: CellParams::synthetic(),
            duration_s: TABLE1_DURATION_S,
            dt: 1.0,
            noise: NoiseSpec::default(),
            p: DEFAULT_P,
            gamma: DEFAULT_GAMMA,
            tol_s: DEFAULT_TOL_S,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub healthy: Trace,
    pub faulty: Trace,
    pub thresholds: Thresholds,
    pub detection: Detection,
    pub report: EvalReport,
}

/// Runs the replay schedule on the seeded synthetic cycle. `seed` drives the
/// profile and the measurement noise; both runs share the same profile.
pub fn run_replay(cfg: &ReplayConfig, seed: u64) -> Result<Replay> {
    let profile = synth_drive_cycle(cfg.duration_s, cfg.dt, seed)?;
    run_replay_with(cfg, &profile, &table1_schedule(), seed)
}

pub fn run_replay_with(
    cfg: &ReplayConfig,
    profile: &CurrentProfile,
    schedule: &FaultSchedule,
    seed: u64,
) -> Result<Replay> {
    let noise = NoiseSpec { seed, ..cfg.noise };
    let healthy = run_scenario(&cfg.params, profile, &FaultSchedule::empty(), &noise)?;
    let faulty = run_scenario(&cfg.params, profile, schedule, &noise)?;
    let p = &cfg.params;
    let deltas = collect_deltas(healthy.samples(), &p.r0_table, p.capacity_ah, p.soc_init)?;
    let thresholds = calibrate_thresholds(&deltas, cfg.p, cfg.gamma)?;
    let detection = detect(
        faulty.samples(),
        &p.r0_table,
        thresholds,
        p.capacity_ah,
        p.soc_init,
    )?;
    let report = match_events(&detection.events, schedule, cfg.tol_s);
    Ok(Replay {
        healthy,
        faulty,
        thresholds,
        detection,
        report,
    })
}
