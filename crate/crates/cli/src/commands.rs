use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use log::warn;

use isc_detect::batch::{sweep_seeds, Execution};
use isc_detect::calibrate::exceedance;
use isc_detect::detector::{read_events, write_events, DiagnosticsWriter};
use isc_detect::eval::write_report_csv;
use isc_detect::pipeline::ReplayConfig;
use isc_detect::trace::load_samples;
use isc_detect::{
    calibrate_thresholds, collect_deltas, match_events, run_scenario, summarize, synth_drive_cycle,
    table1_schedule, CurrentProfile, Detector, Emission, FaultSchedule, Thresholds,
};

use crate::config::Config;
use crate::{Cli, CliError, Command, ScheduleArgs};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.simulation.seed);
    match cli.command {
        Command::Simulate {
            schedule,
            profile,
            out,
        } => simulate(&cfg, seed, &schedule, profile.as_deref(), out),
        Command::Calibrate { trace, out } => calibrate(&cfg, trace, out),
        Command::Detect {
            trace,
            thresholds,
            events,
            diagnostics,
        } => detect(&cfg, trace, thresholds, events, diagnostics),
        Command::Evaluate {
            schedule,
            events,
            tol,
            report,
        } => evaluate(&cfg, &schedule, events, tol, report),
        Command::Sweep { seeds, sequential } => sweep(&cfg, seeds, sequential),
        Command::Tables { out_dir } => tables(&out_dir),
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
        }
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    ensure_parent(path)?;
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn load_schedule(args: &ScheduleArgs) -> Result<Option<FaultSchedule>, CliError> {
    if args.table1 {
        Ok(Some(table1_schedule()))
    } else if let Some(path) = &args.schedule {
        FaultSchedule::load(path)
            .map(Some)
            .map_err(|e| CliError::at(path, e))
    } else {
        Ok(None)
    }
}

fn simulate(
    cfg: &Config,
    seed: u64,
    schedule_args: &ScheduleArgs,
    profile: Option<&Path>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let params = cfg.cell_params()?;
    let schedule = load_schedule(schedule_args)?;
    let profile = match profile {
        Some(path) => CurrentProfile::load(path).map_err(|e| CliError::at(path, e))?,
        None => synth_drive_cycle(cfg.simulation.duration_s, cfg.simulation.sampling_dt, seed)?,
    };
    let out = out.unwrap_or_else(|| match schedule {
        Some(_) => cfg.paths.fault_trace.clone(),
        None => cfg.paths.healthy_trace.clone(),
    });
    let schedule = schedule.unwrap_or_default();
    let trace = run_scenario(&params, &profile, &schedule, &cfg.noise(seed))?;
    trace
        .to_writer(create(&out)?)
        .map_err(|e| CliError::at(&out, e))?;

    let faulted = trace.rows().iter().filter(|r| r.fault_active).count();
    println!(
        "wrote {} samples ({} s, seed {seed}) to {}",
        trace.len(),
        profile.duration(),
        out.display()
    );
    println!(
        "{} scheduled events, {} faulted samples",
        schedule.len(),
        faulted
    );
    for ev in schedule.events() {
        println!(
            "  {:<4} {:>8.1}-{:<8.1} {:?}",
            ev.label, ev.t_on, ev.t_off, ev.kind
        );
    }
    Ok(())
}

fn calibrate(cfg: &Config, trace: Option<PathBuf>, out: Option<PathBuf>) -> Result<(), CliError> {
    let params = cfg.cell_params()?;
    let trace = trace.unwrap_or_else(|| cfg.paths.healthy_trace.clone());
    let out = out.unwrap_or_else(|| cfg.paths.thresholds.clone());
    let samples = load_samples(&trace).map_err(|e| CliError::at(&trace, e))?;
    let deltas = collect_deltas(
        samples,
        &params.r0_table,
        params.capacity_ah,
        params.soc_init,
    )
    .map_err(|e| CliError::at(&trace, e))?;
    let thr = calibrate_thresholds(&deltas, cfg.detector.p, cfg.detector.gamma)
        .map_err(|e| CliError::at(&trace, e))?;
    ensure_parent(&out)?;
    thr.save(&out).map_err(|e| CliError::at(&out, e))?;

    let (below, above) = exceedance(&deltas, thr.theta_minus, thr.theta_plus);
    println!(
        "calibrated on {} differences from {}",
        deltas.len(),
        trace.display()
    );
    println!(
        "theta- = {:.6} V, theta+ = {:.6} V (p = {})",
        thr.theta_minus, thr.theta_plus, thr.p
    );
    println!(
        "relaxed: [{:.6}, {:.6}] V (gamma = {})",
        thr.relaxed_minus, thr.relaxed_plus, thr.gamma
    );
    println!(
        "exceedance outside [theta-, theta+]: {:.3} %",
        100.0 * (below + above)
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn detect(
    cfg: &Config,
    trace: Option<PathBuf>,
    thresholds: Option<PathBuf>,
    events: Option<PathBuf>,
    diagnostics: Option<PathBuf>,
) -> Result<(), CliError> {
    let params = cfg.cell_params()?;
    let trace = trace.unwrap_or_else(|| cfg.paths.fault_trace.clone());
    let thr_path = thresholds.unwrap_or_else(|| cfg.paths.thresholds.clone());
    let events_path = events.unwrap_or_else(|| cfg.paths.events.clone());
    let diag_path = diagnostics.unwrap_or_else(|| cfg.paths.diagnostics.clone());

    let thr = Thresholds::load(&thr_path).map_err(|e| CliError::at(&thr_path, e))?;
    let samples = load_samples(&trace).map_err(|e| CliError::at(&trace, e))?;
    let mut det = Detector::new(&params.r0_table, thr, params.capacity_ah, params.soc_init)?;
    let mut diag =
        DiagnosticsWriter::new(create(&diag_path)?).map_err(|e| CliError::at(&diag_path, e))?;
    let mut found = Vec::new();
    for s in samples {
        let step = det.step(s).map_err(|e| CliError::at(&trace, e))?;
        diag.write(s.t, &step)
            .map_err(|e| CliError::at(&diag_path, e))?;
        match step.emission {
            Some(Emission::Clearance(e)) => found.push(e),
            Some(Emission::StrayClearance { t, delta }) => {
                warn!("clearance-level rise at t = {t} s (delta = {delta:.6} V) with no open fault; ignored")
            }
            Some(Emission::Onset(_)) | None => {}
        }
    }
    found.extend(det.finish());
    diag.finish().map_err(|e| CliError::at(&diag_path, e))?;
    write_events(create(&events_path)?, &found).map_err(|e| CliError::at(&events_path, e))?;

    println!("{} events", found.len());
    for e in &found {
        let clear = e
            .t_clear
            .map_or_else(|| "open".to_string(), |c| format!("{c}"));
        println!(
            "  {:<4} onset {:>8} clear {:>8}  delta {:>9.5} V  i_sc {:>7.2} A  r_sc {:.4} ohm",
            e.label(),
            e.t_onset,
            clear,
            e.delta_at_onset,
            e.i_sc_est,
            e.r_sc_est
        );
    }
    println!(
        "wrote {} and {}",
        events_path.display(),
        diag_path.display()
    );
    Ok(())
}

fn evaluate(
    cfg: &Config,
    schedule_args: &ScheduleArgs,
    events: Option<PathBuf>,
    tol: Option<f64>,
    report: Option<PathBuf>,
) -> Result<(), CliError> {
    let schedule = load_schedule(schedule_args)?.unwrap_or_else(table1_schedule);
    let events_path = events.unwrap_or_else(|| cfg.paths.events.clone());
    let report_path = report.unwrap_or_else(|| cfg.paths.report.clone());
    let tol = tol.unwrap_or(cfg.evaluate.tol_s);
    if !(tol >= cfg.simulation.sampling_dt) {
        return Err(CliError::Validation(format!(
            "--tol {tol} must be at least the sampling period {}",
            cfg.simulation.sampling_dt
        )));
    }
    let file = File::open(&events_path).map_err(|e| CliError::io(&events_path, e))?;
    let detected = read_events(BufReader::new(file)).map_err(|e| CliError::at(&events_path, e))?;
    let rep = match_events(&detected, &schedule, tol);
    print!("{}", summarize(&rep));
    write_report_csv(create(&report_path)?, &rep).map_err(|e| CliError::at(&report_path, e))?;
    println!("wrote {}", report_path.display());
    Ok(())
}

fn sweep(cfg: &Config, n: u64, sequential: bool) -> Result<(), CliError> {
    let replay = ReplayConfig {
        params: cfg.cell_params()?,
        duration_s: cfg.simulation.duration_s,
        dt: cfg.simulation.sampling_dt,
        noise: cfg.noise(0),
        p: cfg.detector.p,
        gamma: cfg.detector.gamma,
        tol_s: cfg.evaluate.tol_s,
    };
    let base = cfg.simulation.seed;
    let seeds: Vec<u64> = (base..base + n).collect();
    let exec = if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let outcomes = sweep_seeds(&replay, &seeds, exec);

    let (mut tp, mut real, mut fa, mut perfect) = (0, 0, 0, 0);
    let mut worst_rsc: f64 = 0.0;
    println!(
        "{:>6} {:>4} {:>6} {:>6} {:>10}",
        "seed", "tp", "missed", "false", "rsc_err%"
    );
    for o in outcomes {
        let o = o?;
        let r = &o.report;
        let w = r
            .per_event
            .iter()
            .filter_map(|e| e.r_sc_rel_err)
            .fold(0.0, f64::max);
        worst_rsc = worst_rsc.max(w);
        tp += r.true_positives;
        real += r.real_faults();
        fa += r.false_alarms;
        perfect += usize::from(r.is_perfect());
        println!(
            "{:>6} {:>4} {:>6} {:>6} {:>10.2}",
            o.seed,
            r.true_positives,
            r.missed,
            r.false_alarms,
            100.0 * w
        );
    }
    println!(
        "{tp}/{real} detected, {fa} false alarms, {perfect}/{n} perfect runs, worst r_sc error {:.2} %",
        100.0 * worst_rsc
    );
    Ok(())
}

fn tables(out_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    for (name, table) in [
        ("ocv_soc.csv", isc_detect::sim::synthetic_ocv_table()),
        ("r0_soc.csv", isc_detect::sim::synthetic_r0_table()),
    ] {
        let path = out_dir.join(name);
        table.save(&path).map_err(|e| CliError::at(&path, e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
