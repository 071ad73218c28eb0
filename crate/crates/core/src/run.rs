//! Run orchestration: flow, observables, analysis and artifacts.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::blowup::{
    classify, classify_homogeneous, dichotomy_report, rescale, volume_energy_check,
    volume_energy_check_homogeneous, BlowupEvent, BlowupReport, ClassifyResult, RunningMax, Verdict,
};
use crate::config::{config_from_value, Backend, Scenario, ScenarioConfig};
use crate::error::{LabError, Result};
use crate::homogeneous::{self, HomogeneousMetric};
use crate::observables::{
    measure_with, rmin_comparison, volume_rate_check, write_series_csv, FlowObservables, RminComparison,
    VolumeRateCheck,
};
use crate::warped::{
    default_cap, derive_geometry, make_dumbbell, make_round, write_snapshot_csv, StepControl, StepOutcome,
    WarpedProfile, WarpedSolver,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    CapReached,
    MaxSteps,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEnergySummary {
    pub checked: usize,
    pub failures: usize,
    /// Smallest `lhs / rhs` seen.
    pub min_margin: f64,
}

/// Diagnostics reported next to the verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checks {
    pub steps: usize,
    pub termination: Termination,
    pub final_time: f64,
    pub rmin_comparison: RminComparison,
    pub volume_rate: VolumeRateCheck,
    pub volume_energy: VolumeEnergySummary,
    pub gradient_warnings: usize,
    /// `max / min` of the homogeneous coefficients at the end of the run.
    pub final_anisotropy: Option<f64>,
}

/// Snapshot attached to a blow-up event.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Warped(WarpedProfile),
    Homogeneous(HomogeneousMetric),
}

/// Everything a run produces before it is written to disk.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub history: Vec<FlowObservables>,
    pub events: Vec<BlowupEvent<Snapshot>>,
    pub classification: ClassifyResult,
    pub report: BlowupReport,
    pub checks: Checks,
    /// Periodic snapshots `(step, profile)`, warped backend only.
    pub snapshots: Vec<(usize, WarpedProfile)>,
    pub final_state: Snapshot,
    /// Homogeneous states with their observables; empty for the warped backend.
    pub trajectory: Vec<(HomogeneousMetric, FlowObservables)>,
    /// Engine error that ended the run early.
    pub failure: Option<String>,
}

impl Simulation {
    pub fn verdict(&self) -> Verdict {
        self.report.verdict
    }
}

fn control(cfg: &ScenarioConfig, initial_sup: f64) -> Result<StepControl> {
    let cap = cfg.curvature_cap.unwrap_or_else(|| default_cap(initial_sup));
    StepControl::new(cfg.sigma, cap, cfg.max_steps)
}

pub fn initial_profile(cfg: &ScenarioConfig) -> Result<WarpedProfile> {
    match cfg.scenario {
        Scenario::Round { r } => make_round(r, cfg.n),
        Scenario::Dumbbell { a, w } => make_dumbbell(a, w, cfg.n),
        Scenario::Berger { .. } => Err(LabError::Config("berger has no warped profile".into())),
    }
}

pub fn initial_metric(cfg: &ScenarioConfig) -> Result<HomogeneousMetric> {
    match cfg.scenario {
        Scenario::Round { r } => HomogeneousMetric::new(r * r, r * r, r * r),
        Scenario::Berger { a, b, c } => HomogeneousMetric::new(a, b, c),
        Scenario::Dumbbell { .. } => Err(LabError::Config("dumbbell has no homogeneous metric".into())),
    }
}

/// Runs the flow and the analysis without touching the file system.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Simulation> {
    match cfg.backend {
        Backend::Warped => simulate_warped(cfg),
        Backend::Homogeneous => simulate_homogeneous(cfg),
    }
}

fn simulate_warped(cfg: &ScenarioConfig) -> Result<Simulation> {
    let p0 = initial_profile(cfg)?;
    let geo0 = derive_geometry(&p0)?;
    let solver = WarpedSolver::new(cfg.n, control(cfg, geo0.sup_rm())?, cfg.gauge);
    let mut tracker = RunningMax::new(cfg.event_factor)?;
    let mut history = Vec::new();
    let mut snapshots = Vec::new();
    let mut warnings = 0;
    let mut failure = None;
    let mut p = p0;
    let termination = loop {
        let geo = match solver.geometry(&p) {
            Ok(g) => g,
            Err(e) => {
                failure = Some(e.to_string());
                break Termination::Failed;
            }
        };
        let mut obs = measure_with(&p, &geo)?;
        tracker.observe(p.time, geo.argmax_rm(), obs.sup_rm, || Snapshot::Warped(p.clone()));
        let step = history.len();
        if cfg.emit_snapshots_every > 0 && step % cfg.emit_snapshots_every == 0 {
            snapshots.push((step, p.clone()));
        }
        if step >= cfg.max_steps {
            history.push(obs);
            break Termination::MaxSteps;
        }
        match solver.step(&p) {
            Ok(StepOutcome::CapReached { .. }) => {
                history.push(obs);
                break Termination::CapReached;
            }
            Ok(StepOutcome::Advanced(next, info)) => {
                obs.dt = info.dt;
                warnings += usize::from(info.gradient_warning);
                history.push(obs);
                p = next;
            }
            Err(e) => {
                history.push(obs);
                failure = Some(e.to_string());
                break Termination::Failed;
            }
        }
    };

    let events = tracker.finish();
    let mut ve = VolumeEnergySummary {
        checked: 0,
        failures: 0,
        min_margin: f64::INFINITY,
    };
    let mut classification = None;
    for ev in &events {
        let Snapshot::Warped(snap) = &ev.snapshot else { continue };
        let normalized = rescale(snap, ev.q)?;
        let chk = volume_energy_check(&normalized)?;
        ve.checked += 1;
        ve.failures += usize::from(!chk.holds);
        ve.min_margin = ve.min_margin.min(chk.lhs / chk.rhs);
        classification = Some(classify(&normalized, &cfg.detector)?);
    }
    let classification = classification.ok_or_else(|| LabError::Config("run produced no events".into()))?;
    let mut sim = finish(cfg, history, events, classification, ve, warnings, termination, Snapshot::Warped(p))?;
    sim.snapshots = snapshots;
    sim.failure = failure;
    Ok(sim)
}

fn simulate_homogeneous(cfg: &ScenarioConfig) -> Result<Simulation> {
    let m0 = initial_metric(cfg)?;
    let run = homogeneous::integrate_with(m0, &control(cfg, m0.sup_rm())?, cfg.max_dt)?;
    let mut tracker = RunningMax::new(cfg.event_factor)?;
    for (m, o) in &run.trajectory {
        tracker.observe(m.time, 0, o.sup_rm, || Snapshot::Homogeneous(*m));
    }
    let events = tracker.finish();
    let mut ve = VolumeEnergySummary {
        checked: 0,
        failures: 0,
        min_margin: f64::INFINITY,
    };
    let mut classification = None;
    for ev in &events {
        let Snapshot::Homogeneous(m) = &ev.snapshot else { continue };
        let normalized = m.scaled(ev.q);
        let chk = volume_energy_check_homogeneous(&normalized)?;
        ve.checked += 1;
        ve.failures += usize::from(!chk.holds);
        ve.min_margin = ve.min_margin.min(chk.lhs / chk.rhs);
        classification = Some(classify_homogeneous(&normalized, &cfg.detector));
    }
    let classification = classification.ok_or_else(|| LabError::Config("run produced no events".into()))?;
    let termination = match run.termination {
        homogeneous::Termination::CapReached => Termination::CapReached,
        homogeneous::Termination::MaxSteps => Termination::MaxSteps,
    };
    let (last, _) = *run.trajectory.last().expect("trajectory is never empty");
    let history = run.trajectory.iter().map(|(_, o)| *o).collect();
    let mut sim = finish(cfg, history, events, classification, ve, 0, termination, Snapshot::Homogeneous(last))?;
    sim.trajectory = run.trajectory;
    Ok(sim)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    cfg: &ScenarioConfig,
    history: Vec<FlowObservables>,
    events: Vec<BlowupEvent<Snapshot>>,
    classification: ClassifyResult,
    volume_energy: VolumeEnergySummary,
    gradient_warnings: usize,
    termination: Termination,
    final_state: Snapshot,
) -> Result<Simulation> {
    let report = dichotomy_report(&events, &classification, &history, cfg.energy_ceiling_factor)?;
    let last = history.last().expect("history is never empty");
    let checks = Checks {
        steps: history.len() - 1,
        termination,
        final_time: last.time,
        rmin_comparison: rmin_comparison(&history),
        volume_rate: volume_rate_check(&history),
        volume_energy,
        gradient_warnings,
        final_anisotropy: match final_state {
            Snapshot::Homogeneous(m) => Some(m.anisotropy()),
            Snapshot::Warped(_) => None,
        },
    };
    Ok(Simulation {
        history,
        events,
        classification,
        report,
        checks,
        snapshots: Vec::new(),
        final_state,
        trajectory: Vec::new(),
        failure: None,
    })
}

/// Paths written by [`write_artifacts`].
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub series: PathBuf,
    pub report: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub trajectory: Option<PathBuf>,
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// The report document; everything outside `meta` is deterministic.
pub fn report_json(sim: &Simulation, config_echo: &Value) -> Result<Value> {
    let mut doc = serde_json::to_value(&sim.report)?;
    doc["checks"] = serde_json::to_value(&sim.checks)?;
    doc["classification_detail"] = serde_json::to_value(&sim.classification)?;
    if let Some(f) = &sim.failure {
        doc["failure"] = json!(f);
    }
    doc["meta"] = json!({
        "config": config_echo,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp": timestamp(),
    });
    Ok(doc)
}

pub fn write_artifacts(sim: &Simulation, cfg: &ScenarioConfig, dir: &Path, config_echo: &Value) -> Result<Artifacts> {
    fs::create_dir_all(dir)?;
    let series = dir.join("series.csv");
    let k = cfg.series_every;
    let last = sim.history.len() - 1;
    let rows = sim
        .history
        .iter()
        .enumerate()
        .filter(|(i, _)| i % k == 0 || *i == last)
        .map(|(_, o)| o);
    write_series_csv(BufWriter::new(File::create(&series)?), rows)?;

    let mut snapshots = Vec::new();
    let mut trajectory = None;
    match &sim.final_state {
        Snapshot::Warped(p) => {
            let sdir = dir.join("snapshots");
            fs::create_dir_all(&sdir)?;
            for (step, snap) in &sim.snapshots {
                let path = sdir.join(format!("{step:04}.csv"));
                write_snapshot_csv(BufWriter::new(File::create(&path)?), snap)?;
                snapshots.push(path);
            }
            let path = sdir.join("final.csv");
            write_snapshot_csv(BufWriter::new(File::create(&path)?), p)?;
            snapshots.push(path);
            if let Some(Snapshot::Warped(s)) = sim.events.last().map(|e| &e.snapshot) {
                let q = sim.events.last().map_or(1.0, |e| e.q);
                let path = sdir.join("final_event_rescaled.csv");
                write_snapshot_csv(BufWriter::new(File::create(&path)?), &rescale(s, q)?)?;
                snapshots.push(path);
            }
        }
        Snapshot::Homogeneous(_) => {
            let path = dir.join("trajectory.csv");
            let rows: Vec<_> = sim
                .trajectory
                .iter()
                .enumerate()
                .filter(|(i, _)| i % k == 0 || *i == last)
                .map(|(_, r)| *r)
                .collect();
            homogeneous::write_trajectory_csv(BufWriter::new(File::create(&path)?), &rows)?;
            trajectory = Some(path);
        }
    }

    let report = dir.join("report.json");
    let doc = report_json(sim, config_echo)?;
    fs::write(&report, serde_json::to_string_pretty(&doc)? + "\n")?;
    if let Some(f) = &sim.failure {
        fs::write(dir.join("PARTIAL"), format!("{f}\n"))?;
    }
    Ok(Artifacts {
        dir: dir.to_path_buf(),
        series,
        report,
        snapshots,
        trajectory,
    })
}

/// Simulates and writes artifacts into `dir`. An engine failure still
/// writes the partial artifacts (with a `PARTIAL` marker) before it is
/// returned as an error.
pub fn run(cfg: &ScenarioConfig, dir: &Path, config_echo: &Value) -> Result<(Simulation, Artifacts)> {
    let sim = simulate(cfg)?;
    let art = write_artifacts(&sim, cfg, dir, config_echo)?;
    if let Some(f) = &sim.failure {
        return Err(LabError::DegenerateProfile(format!("run stopped early: {f}")));
    }
    Ok((sim, art))
}

/// One point of a sweep grid.
pub type GridPoint = BTreeMap<String, f64>;

/// Cartesian product of `{"key": [values...]}`, keys in sorted order.
/// An empty object or an empty value list yields no points.
pub fn parse_grid(text: &str) -> Result<Vec<GridPoint>> {
    let raw: BTreeMap<String, Vec<f64>> =
        serde_json::from_str(text).map_err(|e| LabError::Config(format!("grid: {e}")))?;
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    let mut points = vec![GridPoint::new()];
    for (key, values) in &raw {
        points = points
            .iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(key.clone(), *v);
                    q
                })
            })
            .collect();
    }
    if points.len() > 1000 {
        return Err(LabError::Config(format!("grid has {} points (max 1000)", points.len())));
    }
    Ok(points)
}

/// Writes a grid value into the config: scenario parameters first, then
/// top-level keys.
pub fn apply_point(template: &Value, point: &GridPoint) -> Result<Value> {
    let mut v = template.clone();
    for (key, val) in point {
        let scen = v
            .get_mut("scenario")
            .and_then(Value::as_object_mut)
            .and_then(|o| o.values_mut().next())
            .and_then(Value::as_object_mut);
        match scen {
            Some(s) if s.contains_key(key) => {
                s.insert(key.clone(), json!(val));
            }
            _ => {
                let top = v
                    .as_object_mut()
                    .ok_or_else(|| LabError::Config("config must be an object".into()))?;
                let num = if matches!(key.as_str(), "n" | "max_steps" | "emit_snapshots_every" | "series_every") {
                    json!(*val as u64)
                } else {
                    json!(val)
                };
                top.insert(key.clone(), num);
            }
        }
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub point: GridPoint,
    pub verdict: Option<Verdict>,
    pub classification: Option<crate::blowup::Classification>,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_energy: f64,
    pub max_q: f64,
    pub neck_multiples: f64,
    pub ratio_at_argmax: f64,
    pub error: Option<String>,
}

/// Runs every grid point (in parallel) under `root/run_NNNN`.
pub fn sweep(template: &Value, points: &[GridPoint], root: &Path) -> Vec<SweepRow> {
    points
        .par_iter()
        .enumerate()
        .map(|(index, point)| {
            let attempt = || -> Result<Simulation> {
                let v = apply_point(template, point)?;
                let cfg = config_from_value(v.clone())?;
                let (sim, _) = run(&cfg, &root.join(format!("run_{index:04}")), &v)?;
                Ok(sim)
            };
            match attempt() {
                Ok(sim) => SweepRow {
                    index,
                    point: point.clone(),
                    verdict: Some(sim.report.verdict),
                    classification: Some(sim.report.classification),
                    initial_energy: sim.report.initial_energy,
                    final_energy: sim.report.final_energy,
                    max_energy: sim.report.max_energy,
                    max_q: sim.report.final_q,
                    neck_multiples: sim.classification.neck.map_or(0.0, |n| n.multiples),
                    ratio_at_argmax: sim.classification.ratio_at_argmax,
                    error: None,
                },
                Err(e) => SweepRow {
                    index,
                    point: point.clone(),
                    verdict: None,
                    classification: None,
                    initial_energy: f64::NAN,
                    final_energy: f64::NAN,
                    max_energy: f64::NAN,
                    max_q: f64::NAN,
                    neck_multiples: f64::NAN,
                    ratio_at_argmax: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(out: W, keys: &[String], rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["index".into()];
    header.extend(keys.iter().cloned());
    header.extend(
        [
            "verdict",
            "classification",
            "initial_energy",
            "final_energy",
            "max_energy",
            "energy_ratio",
            "max_q",
            "neck_multiples",
            "ratio_at_argmax",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(keys.iter().map(|k| r.point.get(k).map_or(String::new(), |v| v.to_string())));
        rec.push(r.verdict.map_or(String::new(), |v| format!("{v:?}")));
        rec.push(r.classification.map_or(String::new(), |c| format!("{c:?}")));
        for v in [
            r.initial_energy,
            r.final_energy,
            r.max_energy,
            r.max_energy / r.initial_energy,
            r.max_q,
            r.neck_multiples,
            r.ratio_at_argmax,
        ] {
            rec.push(v.to_string());
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
