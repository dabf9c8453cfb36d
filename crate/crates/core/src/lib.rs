//! Transient internal-short-circuit detection for single Li-ion cells.
//!
//! The detector needs only measured terminal voltage, measured current and
//! an offline R0(SOC) table. It differences the pseudo open-circuit voltage
//! `v + R0 * i` sample to sample and flags drops below a calibrated quantile
//! threshold as short-circuit onsets. An equivalent-circuit simulator with a
//! switchable short branch provides traces with known ground truth.
//!
//! Module map:
//! - [`tables`]: R0/OCV lookup tables, OCV table construction
//! - [`sim`]: equivalent-circuit cell with fault branch
//! - [`scenario`]: drive-cycle profiles and fault schedules
//! - [`calibrate`]: quantile thresholds
//! - [`detector`]: the streaming detector
//! - [`eval`]: scoring against ground truth
//! - [`pipeline`], [`batch`]: end-to-end replays, parallel sweeps

pub mod batch;
pub mod calibrate;
pub mod detector;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod scenario;
pub mod sim;
pub mod tables;
pub mod trace;

pub use calibrate::{calibrate_thresholds, collect_deltas, quantile, Thresholds};
pub use detector::{
    detect, detect_offline, estimate_isc, estimate_rsc, pseudo_ocv, update_soc, Detection,
    Detector, Emission, FaultEvent, Phase, Sample,
};
pub use error::{Error, Result};
pub use eval::{match_events, summarize, EvalReport};
pub use scenario::{
    synth_drive_cycle, table1_schedule, CurrentProfile, FaultKind, FaultSchedule, FaultSpec,
};
pub use sim::{run_scenario, solve_terminal, step_cell, CellParams, CellState, NoiseSpec};
pub use tables::{build_ocv_table, load_table, LookupTable1D, SocLookup, TableKind};
pub use trace::{Trace, TraceRow};
