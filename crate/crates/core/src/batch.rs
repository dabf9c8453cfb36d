//! Data-parallel drivers for independent scenarios and seed sweeps.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] fans out
//! over the rayon pool; without it every call runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;
use crate::eval::EvalReport;
use crate::pipeline::{run_replay, ReplayConfig};
use crate::scenario::{CurrentProfile, FaultSchedule};
use crate::sim::{run_scenario, CellParams, NoiseSpec};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Order-preserving map over `items`.
pub fn map<I, O, F>(exec: Execution, items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// One independent simulation.
#[derive(Debug, Clone)]
pub struct ScenarioJob {
    pub profile: CurrentProfile,
    pub schedule: FaultSchedule,
    pub noise: NoiseSpec,
}

pub fn simulate_many(
    params: &CellParams,
    jobs: &[ScenarioJob],
    exec: Execution,
) -> Vec<Result<Trace>> {
    map(exec, jobs, |j| {
        run_scenario(params, &j.profile, &j.schedule, &j.noise)
    })
}

/// Headline numbers from one seeded replay.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub seed: u64,
    pub report: EvalReport,
    pub relaxed_minus: f64,
    pub relaxed_plus: f64,
}

/// Runs the full replay for every seed.
pub fn sweep_seeds(
    cfg: &ReplayConfig,
    seeds: &[u64],
    exec: Execution,
) -> Vec<Result<SweepOutcome>> {
    map(exec, seeds, |&seed| {
        let r = run_replay(cfg, seed)?;
        Ok(SweepOutcome {
            seed,
            report: r.report,
            relaxed_minus: r.thresholds.relaxed_minus,
            relaxed_plus: r.thresholds.relaxed_plus,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::synth_drive_cycle;

    #[test]
    fn map_preserves_order_in_both_modes() {
        let xs: Vec<u64> = (0..1000).collect();
        let seq = map(Execution::Sequential, &xs, |x| x * x);
        let par = map(Execution::Parallel, &xs, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[999], 999 * 999);
    }

    #[test]
    fn simulate_many_matches_sequential() {
        let params = CellParams::synthetic();
        let jobs: Vec<ScenarioJob> = (0..4)
            .map(|s| ScenarioJob {
                profile: synth_drive_cycle(300.0, 1.0, s).unwrap(),
                schedule: FaultSchedule::empty(),
                noise: NoiseSpec {
                    seed: s,
                    ..NoiseSpec::default()
                },
            })
            .collect();
        let a: Vec<Trace> = simulate_many(&params, &jobs, Execution::Sequential)
            .into_iter()
            .collect::<Result<_>>()
            .unwrap();
        let b: Vec<Trace> = simulate_many(&params, &jobs, Execution::Parallel)
            .into_iter()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(a, b);
    }
}
