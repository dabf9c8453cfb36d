//! Equivalent-circuit cell simulator with a switchable internal short branch.
//!
//! The cell is an OCV source, an ohmic resistance R0 and a chain of RC
//! polarization pairs. A short-circuit resistance, when engaged, sits across
//! the terminals inside the current sensor, so the measured current is only
//! the external load current `i_t` while R0 carries `i_t + i_sc`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::scenario::{CurrentProfile, FaultKind, FaultSchedule};
use crate::tables::{build_ocv_table, LookupTable1D, TableKind};
use crate::trace::{Trace, TraceRow};

/// One RC polarization pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcPair {
    /// Ohms.
    pub resistance: f64,
    /// Farads.
    pub capacitance: f64,
}

impl RcPair {
    pub fn from_tau(resistance: f64, tau_s: f64) -> Self {
        Self {
            resistance,
            capacitance: tau_s / resistance,
        }
    }

    pub fn tau(&self) -> f64 {
        self.resistance * self.capacitance
    }
}

/// Default polarization: charge transfer (~5 s) and diffusion (~120 s).
pub const DEFAULT_RC_PAIRS: [RcPair; 2] = [
    RcPair {
        resistance: 0.15e-3,
        capacitance: 5.0 / 0.15e-3,
    },
    RcPair {
        resistance: 0.5e-3,
        capacitance: 120.0 / 0.5e-3,
    },
];

/// Nominal capacity of the reference cell, Ah.
pub const REFERENCE_CAPACITY_AH: f64 = 40.2;

#[derive(Debug, Clone)]
pub struct CellParams {
    pub capacity_ah: f64,
    pub ocv_table: LookupTable1D,
    pub r0_table: LookupTable1D,
    pub rc_pairs: Vec<RcPair>,
    pub soc_init: f64,
    pub coulombic_efficiency: f64,
}

impl CellParams {
    pub fn new(
        capacity_ah: f64,
        ocv_table: LookupTable1D,
        r0_table: LookupTable1D,
        rc_pairs: Vec<RcPair>,
        soc_init: f64,
        coulombic_efficiency: f64,
    ) -> Result<Self> {
        let p = Self {
            capacity_ah,
            ocv_table,
            r0_table,
            rc_pairs,
            soc_init,
            coulombic_efficiency,
        };
        p.validate()?;
        Ok(p)
    }

    /// Synthetic 40.2 Ah NCM-like cell with the bundled tables.
    pub fn synthetic() -> Self {
        Self {
            capacity_ah: REFERENCE_CAPACITY_AH,
            ocv_table: synthetic_ocv_table(),
            r0_table: synthetic_r0_table(),
            rc_pairs: DEFAULT_RC_PAIRS.to_vec(),
            soc_init: 0.6,
            coulombic_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("capacity_ah", self.capacity_ah)?;
        if !(0.0..=1.0).contains(&self.soc_init) {
            return Err(Error::InvalidParameter {
                name: "soc_init",
                value: self.soc_init,
                reason: "must lie in [0, 1]",
            });
        }
        let eta = self.coulombic_efficiency;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "coulombic_efficiency",
                value: eta,
                reason: "must lie in (0, 1]",
            });
        }
        for rc in &self.rc_pairs {
            positive("rc.resistance", rc.resistance)?;
            positive("rc.capacitance", rc.capacitance)?;
        }
        if self.ocv_table.kind() != TableKind::Ocv || self.r0_table.kind() != TableKind::R0 {
            return Err(Error::InvalidParameter {
                name: "tables",
                value: f64::NAN,
                reason: "table kinds do not match their roles",
            });
        }
        Ok(())
    }

    pub fn initial_state(&self) -> CellState {
        CellState {
            soc: self.soc_init,
            u_polar: vec![0.0; self.rc_pairs.len()],
            fault: None,
        }
    }
}

/// Simulator truth at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub soc: f64,
    /// Volts across each RC pair, positive while discharging.
    pub u_polar: Vec<f64>,
    /// Resistance of the engaged short branch, if any.
    pub fault: Option<f64>,
}

impl CellState {
    pub fn u_polar_total(&self) -> f64 {
        self.u_polar.iter().sum()
    }
}

/// Measurement noise added to recorded voltage and current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_v: f64,
    pub sigma_i: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const fn none() -> Self {
        Self {
            sigma_v: 0.0,
            sigma_i: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_v", self.sigma_v), ("sigma_i", self.sigma_i)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be finite and >= 0",
                });
            }
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma_v: 1.0e-3,
            sigma_i: 50.0e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalSolution {
    pub v_meas: f64,
    pub i_sc: f64,
}

/// Solves the terminal network for one instant.
///
/// `ocv_eff` is OCV minus total polarization. With a short branch of
/// resistance `r_sc` across the terminals,
///
/// ```text
/// v = ocv_eff - r0 * (i_t + i_sc),   i_sc = v / r_sc
/// => v = (ocv_eff - r0 * i_t) * r_sc / (r_sc + r0)
/// ```
pub fn solve_terminal(
    ocv_eff: f64,
    r0: f64,
    i_t: f64,
    r_sc: Option<f64>,
) -> Result<TerminalSolution> {
    positive("r0", r0)?;
    let open = ocv_eff - r0 * i_t;
    match r_sc {
        None => Ok(TerminalSolution {
            v_meas: open,
            i_sc: 0.0,
        }),
        Some(r_sc) => {
            positive("r_sc", r_sc)?;
            let v_meas = open * r_sc / (r_sc + r0);
            Ok(TerminalSolution {
                v_meas,
                i_sc: v_meas / r_sc,
            })
        }
    }
}

/// Instantaneous terminal quantities for a state and load current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOutput {
    pub v_meas: f64,
    pub i_sc: f64,
    pub ocv_real: f64,
    pub u_polar: f64,
    pub r0: f64,
}

pub fn cell_output(params: &CellParams, state: &CellState, i_t: f64) -> Result<CellOutput> {
    let ocv_real = params.ocv_table.interp(state.soc).value;
    let r0 = params.r0_table.interp(state.soc).value;
    let u_polar = state.u_polar_total();
    let sol = solve_terminal(ocv_real - u_polar, r0, i_t, state.fault)?;
    Ok(CellOutput {
        v_meas: sol.v_meas,
        i_sc: sol.i_sc,
        ocv_real,
        u_polar,
        r0,
    })
}

// Rounding slack before a bound crossing counts as depletion/overcharge.
const SOC_EPS: f64 = 1e-12;

/// Advances the cell by `dt` seconds with load current `i_t` held constant.
///
/// Returns the next state and the terminal voltage at the start of the
/// interval. SOC integrates the total cell current `i_t + i_sc`; each RC
/// pair relaxes toward `(i_t + i_sc) * R` with the exact exponential update.
pub fn step_cell(
    params: &CellParams,
    state: &CellState,
    i_t: f64,
    dt: f64,
) -> Result<(CellState, f64)> {
    let out = cell_output(params, state, i_t)?;
    let next = advance(params, state, i_t + out.i_sc, dt)?;
    Ok((next, out.v_meas))
}

fn advance(params: &CellParams, state: &CellState, i_total: f64, dt: f64) -> Result<CellState> {
    positive("dt", dt)?;
    let charge = if i_total >= 0.0 {
        i_total
    } else {
        params.coulombic_efficiency * i_total
    };
    let mut soc = state.soc - charge * dt / (3600.0 * params.capacity_ah);
    if !(-SOC_EPS..=1.0 + SOC_EPS).contains(&soc) {
        return Err(Error::SocBounds { t: f64::NAN, soc });
    }
    soc = soc.clamp(0.0, 1.0);
    let u_polar = params
        .rc_pairs
        .iter()
        .zip(&state.u_polar)
        .map(|(rc, &u)| {
            let decay = (-dt / rc.tau()).exp();
            u * decay + i_total * rc.resistance * (1.0 - decay)
        })
        .collect();
    Ok(CellState {
        soc,
        u_polar,
        fault: state.fault,
    })
}

/// Simulates a full scenario at the profile's sampling period.
///
/// Sample `k` sits at `t = k * dt`; a fault window `[t_on, t_off)` is active
/// for every sample inside it. Extra discharge pulses are added to the load
/// current (and so are measured); short resistors only engage the branch.
/// Noise is applied to the recorded `i`/`v` columns only.
pub fn run_scenario(
    params: &CellParams,
    profile: &CurrentProfile,
    schedule: &FaultSchedule,
    noise: &NoiseSpec,
) -> Result<Trace> {
    params.validate()?;
    noise.validate()?;
    let dt = profile.dt();
    let end = profile.duration();
    if let Some(last) = schedule
        .events()
        .iter()
        .max_by(|a, b| a.t_off.total_cmp(&b.t_off))
    {
        if last.t_off > end {
            return Err(Error::ProfileTooShort {
                label: last.label.clone(),
                t_off: last.t_off,
                profile_end: end,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(1);

    let n = profile.len();
    let mut rows = Vec::with_capacity(n);
    let mut state = params.initial_state();
    for (k, &base) in profile.samples().iter().enumerate() {
        let t = k as f64 * dt;
        let mut i_t = base;
        state.fault = None;
        for ev in schedule.active_at(t) {
            match ev.kind {
                FaultKind::ShortResistor { ohms } => state.fault = Some(ohms),
                FaultKind::ExtraDischargePulse { amps } => i_t += amps,
            }
        }
        let out = cell_output(params, &state, i_t)?;
        let nv: f64 = StandardNormal.sample(&mut rng);
        let ni: f64 = StandardNormal.sample(&mut rng);
        rows.push(TraceRow {
            t,
            i: i_t + noise.sigma_i * ni,
            v: out.v_meas + noise.sigma_v * nv,
            soc_true: state.soc,
            i_sc_true: out.i_sc,
            fault_active: state.fault.is_some(),
            i_true: i_t,
            ocv_real: out.ocv_real,
            u_polar: out.u_polar,
            r0_true: out.r0,
        });
        if k + 1 < n {
            state = advance(params, &state, i_t + out.i_sc, dt).map_err(|e| match e {
                Error::SocBounds { soc, .. } => Error::SocBounds { t, soc },
                e => e,
            })?;
        }
    }
    Ok(Trace::new(dt, rows))
}

/// Synthetic NCM-like OCV curve, volts. Strictly increasing in SOC.
pub fn synthetic_ocv(soc: f64) -> f64 {
    3.30 + 0.62 * soc + 0.18 * soc.powi(3) - 0.35 * (-soc / 0.04).exp()
}

/// OCV table built the way a lab would: average a 0.05 C charge curve and a
/// 0.05 C discharge curve sampled every 5 % SOC. The synthetic curves sit
/// 15 mV either side of [`synthetic_ocv`].
pub fn synthetic_ocv_table() -> LookupTable1D {
    let grid = (0..=20).map(|k| k as f64 * 0.05);
    let charge: Vec<_> = grid
        .clone()
        .map(|s| (s, synthetic_ocv(s) + 0.015))
        .collect();
    let discharge: Vec<_> = grid.map(|s| (s, synthetic_ocv(s) - 0.015)).collect();
    build_ocv_table(&charge, &discharge).expect("synthetic curves are valid")
}

/// R0 at 5 % SOC steps, ohms: flat near 1.8 mOhm mid-range, rising at low SOC.
pub const SYNTHETIC_R0_MOHM: [f64; 21] = [
    2.70, 2.35, 2.15, 2.03, 1.95, 1.90, 1.86, 1.84, 1.82, 1.81, 1.80, 1.80, 1.80, 1.80, 1.80, 1.81,
    1.81, 1.82, 1.83, 1.85, 1.88,
];

pub fn synthetic_r0_table() -> LookupTable1D {
    let soc = (0..=20).map(|k| k as f64 * 0.05).collect();
    let values = SYNTHETIC_R0_MOHM.iter().map(|m| m * 1e-3).collect();
    LookupTable1D::new(TableKind::R0, soc, values).expect("synthetic R0 table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CurrentProfile, FaultSpec};

    /// Fixed-point iteration of the two defining equations.
    fn fixed_point(ocv_eff: f64, r0: f64, i_t: f64, r_sc: f64) -> (f64, f64) {
        let mut v = ocv_eff - r0 * i_t;
        loop {
            let next = ocv_eff - r0 * (i_t + v / r_sc);
            if (next - v).abs() < 1e-9 {
                return (next, next / r_sc);
            }
            v = next;
        }
    }

    #[test]
    fn open_circuit_and_ohmic_drop() {
        let s = solve_terminal(3.70, 2.0e-3, 0.0, None).unwrap();
        assert_eq!(
            s,
            TerminalSolution {
                v_meas: 3.70,
                i_sc: 0.0
            }
        );
        let s = solve_terminal(3.70, 2.0e-3, 50.0, None).unwrap();
        assert!((s.v_meas - 3.60).abs() < 1e-12);
        assert_eq!(s.i_sc, 0.0);
    }

    #[test]
    fn faulted_terminal_matches_fixed_point() {
        let (v_fp, i_fp) = fixed_point(3.70, 2.0e-3, 0.0, 0.07);
        // frozen from the iteration: 3.597222..., 51.3889...
        assert!((v_fp - 3.5972).abs() < 1e-4);
        assert!((i_fp - 51.39).abs() < 1e-2);
        let s = solve_terminal(3.70, 2.0e-3, 0.0, Some(0.07)).unwrap();
        assert!((s.v_meas - v_fp).abs() < 1e-6);
        assert!((s.i_sc - i_fp).abs() < 1e-4);
    }

    #[test]
    fn rejects_nonphysical_resistance() {
        assert!(solve_terminal(3.7, 2e-3, 0.0, Some(0.0)).is_err());
        assert!(solve_terminal(3.7, 2e-3, 0.0, Some(-0.1)).is_err());
        assert!(solve_terminal(3.7, 0.0, 0.0, None).is_err());
    }

    #[test]
    fn rest_is_equilibrium() {
        let p = CellParams::synthetic();
        let s0 = p.initial_state();
        let (s1, v) = step_cell(&p, &s0, 0.0, 1.0).unwrap();
        assert_eq!(s1, s0);
        assert_eq!(v, p.ocv_table.interp(p.soc_init).value);
    }

    #[test]
    fn coulomb_counting_identity() {
        let mut p = CellParams::synthetic();
        p.soc_init = 1.0;
        p.rc_pairs.clear();
        let s0 = CellState {
            soc: 1.0,
            u_polar: vec![],
            fault: None,
        };
        let (s1, _) = step_cell(&p, &s0, 40.2, 3600.0).unwrap();
        assert!(s1.soc.abs() < 1e-12);
        // one more second drives it below zero
        let err = step_cell(&p, &s1, 40.2, 1.0).unwrap_err();
        assert!(matches!(err, Error::SocBounds { .. }));
    }

    #[test]
    fn overcharge_is_an_error() {
        let p = CellParams::synthetic();
        let s = CellState {
            soc: 1.0,
            u_polar: vec![0.0; 2],
            fault: None,
        };
        assert!(step_cell(&p, &s, -1.0, 1.0).is_err());
    }

    #[test]
    fn coulombic_efficiency_scales_charge_only() {
        let mut p = CellParams::synthetic();
        p.coulombic_efficiency = 0.9;
        let s = CellState {
            soc: 0.5,
            u_polar: vec![0.0; 2],
            fault: None,
        };
        let (c, _) = step_cell(&p, &s, -40.2, 360.0).unwrap();
        assert!((c.soc - 0.59).abs() < 1e-12);
        let (d, _) = step_cell(&p, &s, 40.2, 360.0).unwrap();
        assert!((d.soc - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rc_update_is_exact_exponential() {
        let p = CellParams::synthetic();
        let s = CellState {
            soc: 0.5,
            u_polar: vec![0.0; 2],
            fault: None,
        };
        let (n, _) = step_cell(&p, &s, 10.0, 5.0).unwrap();
        let rc = p.rc_pairs[0];
        let expect = 10.0 * rc.resistance * (1.0 - (-1.0f64).exp());
        assert!((n.u_polar[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn short_drops_voltage_by_tens_of_millivolts() {
        let p = CellParams::synthetic();
        let healthy = CellState {
            soc: 0.5,
            u_polar: vec![0.0; 2],
            fault: None,
        };
        let faulted = CellState {
            fault: Some(0.07),
            ..healthy.clone()
        };
        let (_, v0) = step_cell(&p, &healthy, 10.0, 1.0).unwrap();
        let (_, v1) = step_cell(&p, &faulted, 10.0, 1.0).unwrap();
        let drop = v0 - v1;
        assert!((0.020..=0.100).contains(&drop), "drop = {drop}");
    }

    #[test]
    fn synthetic_tables_are_valid() {
        let ocv = synthetic_ocv_table();
        assert_eq!(ocv.len(), 21);
        assert!((ocv.interp(0.5).value - synthetic_ocv(0.5)).abs() < 1e-12);
        assert_eq!(synthetic_r0_table().len(), 21);
    }

    #[test]
    fn rest_trace_equals_ocv() {
        let p = CellParams::synthetic();
        let profile = CurrentProfile::new(1.0, vec![0.0; 50]).unwrap();
        let trace =
            run_scenario(&p, &profile, &FaultSchedule::empty(), &NoiseSpec::none()).unwrap();
        let ocv = p.ocv_table.interp(p.soc_init).value;
        assert_eq!(trace.len(), 50);
        assert!(trace.rows().iter().all(|r| r.v == ocv && !r.fault_active));
    }

    #[test]
    fn schedule_past_profile_end_is_rejected() {
        let p = CellParams::synthetic();
        let profile = CurrentProfile::new(1.0, vec![0.0; 50]).unwrap();
        let sched = FaultSchedule::new(vec![FaultSpec::short(40.0, 60.0, 0.1, "late")]).unwrap();
        let err = run_scenario(&p, &profile, &sched, &NoiseSpec::none()).unwrap_err();
        assert!(matches!(err, Error::ProfileTooShort { .. }));
    }
}
