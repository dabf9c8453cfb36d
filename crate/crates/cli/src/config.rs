use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use isc_detect::calibrate::{DEFAULT_GAMMA, DEFAULT_P};
use isc_detect::eval::DEFAULT_TOL_S;
use isc_detect::scenario::TABLE1_DURATION_S;
use isc_detect::sim::{RcPair, DEFAULT_RC_PAIRS, REFERENCE_CAPACITY_AH};
use isc_detect::{load_table, CellParams, NoiseSpec, TableKind};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub cell: CellConfig,
    pub simulation: SimulationConfig,
    pub noise: NoiseConfig,
    pub detector: DetectorConfig,
    pub evaluate: EvaluateConfig,
    pub paths: Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConfig {
    /// `soc,value` CSV; the bundled synthetic table when absent.
    pub ocv_table: Option<PathBuf>,
    pub r0_table: Option<PathBuf>,
    pub capacity_ah: f64,
    pub soc_init: f64,
    pub coulombic_efficiency: f64,
    pub rc_pairs: Vec<RcConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcConfig {
    pub resistance_ohm: f64,
    pub tau_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub sampling_dt: f64,
    pub duration_s: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_v: f64,
    pub sigma_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub p: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub tol_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub healthy_trace: PathBuf,
    pub fault_trace: PathBuf,
    pub thresholds: PathBuf,
    pub events: PathBuf,
    pub diagnostics: PathBuf,
    pub report: PathBuf,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            ocv_table: None,
            r0_table: None,
            capacity_ah: REFERENCE_CAPACITY_AH,
            soc_init: 0.6,
            coulombic_efficiency: 1.0,
            rc_pairs: DEFAULT_RC_PAIRS
                .iter()
                .map(|rc| RcConfig {
                    resistance_ohm: rc.resistance,
                    tau_s: rc.tau(),
                })
                .collect(),
        }
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            sampling_dt: 1.0,
            duration_s: TABLE1_DURATION_S,
            seed: 0,
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let n = NoiseSpec::default();
        Self {
            sigma_v: n.sigma_v,
            sigma_i: n.sigma_i,
        }
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            p: DEFAULT_P,
            gamma: DEFAULT_GAMMA,
        }
    }
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            tol_s: DEFAULT_TOL_S,
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        let out = PathBuf::from("out");
        Self {
            healthy_trace: out.join("healthy.csv"),
            fault_trace: out.join("fault.csv"),
            thresholds: out.join("thresholds.json"),
            events: out.join("events.csv"),
            diagnostics: out.join("diagnostics.csv"),
            report: out.join("report.csv"),
        }
    }
}

impl Config {
    /// Reads a TOML config. Relative paths inside it resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: Config = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.cell.ocv_table.as_mut() {
            fix(p);
        }
        if let Some(p) = self.cell.r0_table.as_mut() {
            fix(p);
        }
        let paths = &mut self.paths;
        for p in [
            &mut paths.healthy_trace,
            &mut paths.fault_trace,
            &mut paths.thresholds,
            &mut paths.events,
            &mut paths.diagnostics,
            &mut paths.report,
        ] {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.detector;
        if !(d.p > 0.0 && d.p < 0.5) {
            return Err(CliError::Validation(format!(
                "detector.p = {} must lie in (0, 0.5)",
                d.p
            )));
        }
        if !(d.gamma > 1.0) {
            return Err(CliError::Validation(format!(
                "detector.gamma = {} must be > 1",
                d.gamma
            )));
        }
        if !(self.simulation.sampling_dt > 0.0) {
            return Err(CliError::Validation(
                "simulation.sampling_dt must be > 0".into(),
            ));
        }
        if !(self.evaluate.tol_s >= self.simulation.sampling_dt) {
            return Err(CliError::Validation(
                "evaluate.tol_s must be at least the sampling period".into(),
            ));
        }
        Ok(())
    }

    pub fn noise(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            sigma_v: self.noise.sigma_v,
            sigma_i: self.noise.sigma_i,
            seed,
        }
    }

    pub fn cell_params(&self) -> Result<CellParams, CliError> {
        let ocv = match &self.cell.ocv_table {
            Some(p) => load_table(p, TableKind::Ocv).map_err(|e| CliError::at(p, e))?,
            None => isc_detect::sim::synthetic_ocv_table(),
        };
        let r0 = match &self.cell.r0_table {
            Some(p) => load_table(p, TableKind::R0).map_err(|e| CliError::at(p, e))?,
            None => isc_detect::sim::synthetic_r0_table(),
        };
        let rc = self
            .cell
            .rc_pairs
            .iter()
            .map(|rc| RcPair::from_tau(rc.resistance_ohm, rc.tau_s))
            .collect();
        Ok(CellParams::new(
            self.cell.capacity_ah,
            ocv,
            r0,
            rc,
            self.cell.soc_init,
            self.cell.coulombic_efficiency,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = Config::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: Config = toml::from_str("[detector]\ngamma = 3.0\n").unwrap();
        assert_eq!(cfg.detector.gamma, 3.0);
        assert_eq!(cfg.detector.p, DEFAULT_P);
        assert!(toml::from_str::<Config>("[detector]\nbogus = 1\n").is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut cfg = Config::default();
        cfg.detector.gamma = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = Config::default();
        cfg.detector.p = 0.6;
        assert!(cfg.validate().is_err());
    }
}
