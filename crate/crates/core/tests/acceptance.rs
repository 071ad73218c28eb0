//! One PASS/FAIL line per acceptance criterion; exits nonzero on any failure.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde_json::Value;

use common::{capped_cylinder, dumbbell_residuals};
use ricci_lab::blowup::{
    neck_energy, rescale, volume_energy_check_homogeneous, Classification, Verdict,
};
use ricci_lab::config::parse_config;
use ricci_lab::curvature::{integrate_eigenvalues, CurvatureEigenvalues};
use ricci_lab::homogeneous::{integrate_with, HomogeneousMetric};
use ricci_lab::observables::measure;
use ricci_lab::properties::run_properties;
use ricci_lab::run::{run, Simulation, Termination};
use ricci_lab::warped::{make_dumbbell, make_round, StepControl};

const ROUND: &str = r#"{"scenario":{"round":{"r":1}},"n":400,"series_every":100}"#;
const DUMBBELL: &str = r#"{"scenario":{"dumbbell":{"a":0.8,"w":0.01}},"n":800,"series_every":100}"#;
const BERGER: &str = r#"{"scenario":{"berger":{"a":1,"b":1,"c":0.5}},"series_every":100}"#;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Acceptance {
    name: &'static str,
    config: &'static str,
    sim: Simulation,
    dir: PathBuf,
}

fn run_into(name: &'static str, config: &'static str, dir: &Path) -> Acceptance {
    let echo: Value = serde_json::from_str(config).unwrap();
    let cfg = parse_config(config).unwrap();
    let (sim, art) = run(&cfg, dir, &echo).unwrap_or_else(|e| panic!("{name}: {e}"));
    Acceptance {
        name,
        config,
        sim,
        dir: art.dir,
    }
}

fn criterion_1(round: &Simulation) -> Outcome {
    let exact = 290.142;
    let mut worst = 0.0_f64;
    for o in round.history.iter().take_while(|o| o.r_max <= 1e3) {
        worst = worst.max((o.r_max * (1.0 - 4.0 * o.time) / 6.0 - 1.0).abs());
    }
    let t_end = round.checks.final_time;
    let capped = round.checks.termination == Termination::CapReached;
    let drift = round
        .history
        .iter()
        .fold(0.0_f64, |m, o| m.max((o.energy / exact - 1.0).abs()));
    outcome(
        worst <= 0.01 && capped && (t_end - 0.25).abs() <= 0.002 && drift <= 0.02,
        format!("R_max rel err {worst:.2e}, cap at t = {t_end:.6}, energy drift {drift:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let m0 = HomogeneousMetric::new(1.0, 1.0, 1.0).unwrap();
    let ctl = StepControl::new(0.01, 1e3, usize::MAX).unwrap();
    let traj = integrate_with(m0, &ctl, Some(1e-5)).unwrap().trajectory;
    let e0 = traj[0].1.energy;
    let mut err = 0.0_f64;
    let mut drift = 0.0_f64;
    let mut dt = 0.0_f64;
    for (m, o) in &traj {
        for v in m.coefficients() {
            err = err.max((v - (1.0 - 4.0 * m.time)).abs());
        }
        drift = drift.max((o.energy / e0 - 1.0).abs());
        dt = dt.max(o.dt);
    }
    outcome(
        err <= 1e-6 && drift <= 1e-3 && dt <= 1e-5,
        format!("max |a - (1 - 4t)| {err:.2e}, energy drift {drift:.2e}, {} steps", traj.len()),
    )
}

fn criterion_3() -> Outcome {
    let mut e_worst = 0.0_f64;
    let mut r_worst = 0.0_f64;
    for p in [make_round(1.0, 400).unwrap(), make_dumbbell(0.8, 0.01, 400).unwrap()] {
        let m0 = measure(&p).unwrap();
        for q in [0.1, 1.0, 10.0, 137.0] {
            let m = measure(&rescale(&p, q).unwrap()).unwrap();
            e_worst = e_worst.max((m.energy / m0.energy - 1.0).abs());
            r_worst = r_worst.max((m.r_max * q / m0.r_max - 1.0).abs());
        }
    }
    outcome(
        e_worst <= 1e-10 && r_worst <= 1e-12,
        format!("energy rel change {e_worst:.2e}, r_max scaling rel err {r_worst:.2e}"),
    )
}

fn criteria_4_5() -> (Outcome, Outcome) {
    let rep = run_properties(0, 10_000, 10_000, 1_000).unwrap();
    let traj = integrate_eigenvalues(CurvatureEigenvalues::new(1.0, 1.0, 1.0), 0.25, 1e-4, 1e12).unwrap();
    let (t, m) = *traj.last().unwrap();
    let ode_err = m.as_array().iter().fold(0.0_f64, |e, v| e.max((v - 2.0).abs()));
    let ident = rep.sum_identity_max_rel.max(rep.third_rate_max_rel).max(rep.quotient_identity_max_rel);
    let c4 = outcome(
        ident <= 1e-10 && t == 0.25 && ode_err <= 1e-6,
        format!("identity rel err {ident:.2e} over {} triples, m(0.25) err {ode_err:.2e}", rep.triples),
    );
    let c5 = outcome(
        rep.convexity_counterexamples == 0 && rep.cone_violations == 0,
        format!(
            "{} counterexamples in {} pairs, {} violations in {} steps of {} trajectories",
            rep.convexity_counterexamples, rep.pairs, rep.cone_violations, rep.cone_steps, rep.trajectories
        ),
    );
    (c4, c5)
}

fn criterion_6(runs: &[Acceptance]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let c = &r.sim.checks;
        let rmin = c.rmin_comparison.worst_violation / c.rmin_comparison.max_abs_rhs;
        let ok = c.rmin_comparison.passes(0.05) && c.volume_rate.passes(0.05);
        pass &= ok;
        parts.push(format!(
            "{} rmin {rmin:+.3} vol {:.2e}",
            r.name, c.volume_rate.worst_rel_mismatch
        ));
    }
    let (e, orders) = dumbbell_residuals();
    pass &= orders.iter().all(|o| *o >= 1.8);
    let fmt = |v: &[f64], f: fn(&f64) -> String| v.iter().map(f).collect::<Vec<_>>().join(", ");
    parts.push(format!(
        "residual [{}] orders [{}]",
        fmt(&e, |x| format!("{x:.3e}")),
        fmt(&orders, |x| format!("{x:.2}"))
    ));
    outcome(pass, parts.join("; "))
}

fn criterion_7(runs: &[Acceptance]) -> Outcome {
    let checked: usize = runs.iter().map(|r| r.sim.checks.volume_energy.checked).sum();
    let failures: usize = runs.iter().map(|r| r.sim.checks.volume_energy.failures).sum();
    let v = volume_energy_check_homogeneous(&HomogeneousMetric::new(1.0, 1.0, 1.0).unwrap()).unwrap();
    let eq = (v.lhs / v.rhs - 1.0).abs();
    outcome(
        failures == 0 && checked > 0 && v.holds && eq <= 1e-9,
        format!("{failures} failures in {checked} normalized snapshots, R = 6 equality {eq:.1e}"),
    )
}

fn criterion_8() -> Outcome {
    let (rho, eps) = (1.0, 0.1);
    let p = capped_cylinder(rho, 60.0, 4001);
    let ds = p.phi[0] * p.h();
    let half = (rho / eps / ds).round() as usize;
    let mid = p.len() / 2;
    let e = neck_energy(&p, mid - half, mid + half).unwrap();
    let exact = 2f64.powf(2.5) * 4.0 * PI / eps;
    let round = measure(&make_round(1.0, 400).unwrap()).unwrap().energy;
    outcome(
        (e / exact - 1.0).abs() <= 0.01 && e > round,
        format!("neck energy {e:.3} vs {exact:.3}, round {round:.3}"),
    )
}

fn criterion_9(round: &Simulation, dumbbell: &Simulation, berger: &Simulation) -> Outcome {
    let r = &dumbbell.report;
    let growth = r.max_energy / r.initial_energy;
    let aniso = berger.checks.final_anisotropy.unwrap_or(f64::NAN);
    let any_inconsistent = [round, dumbbell, berger].iter().any(|s| s.verdict() == Verdict::Inconsistent);
    let pass = round.verdict() == Verdict::ConsistentRound
        && r.verdict == Verdict::ConsistentNeck
        && r.classification == Classification::Neck
        && growth > 5.0
        && r.ratio_at_argmax <= 0.1
        && berger.verdict() == Verdict::ConsistentRound
        && (aniso - 1.0).abs() <= 1e-3
        && !any_inconsistent;
    outcome(
        pass,
        format!(
            "round {:?}; dumbbell {:?}/{:?} energy x{growth:.2} ratio {:.3} neck multiples {:.2}; berger {:?} anisotropy {aniso:.6}",
            round.verdict(),
            r.verdict,
            r.classification,
            r.ratio_at_argmax,
            r.neck.map_or(0.0, |n| n.multiples),
            berger.verdict(),
        ),
    )
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(files(&p));
        } else {
            v.push(p);
        }
    }
    v.sort();
    v
}

fn without_meta(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("meta");
    v
}

fn criterion_10(runs: &[Acceptance], scratch: &Path) -> Outcome {
    let mut diffs = Vec::new();
    let mut compared = 0;
    for r in runs {
        let again = run_into(r.name, r.config, &scratch.join(format!("{}_again", r.name)));
        let a = files(&r.dir);
        let b = files(&again.dir);
        let rel = |d: &Path, f: &PathBuf| f.strip_prefix(d).unwrap().to_path_buf();
        if a.iter().map(|f| rel(&r.dir, f)).ne(b.iter().map(|f| rel(&again.dir, f))) {
            diffs.push(format!("{}: file sets differ", r.name));
            continue;
        }
        for (fa, fb) in a.iter().zip(&b) {
            compared += 1;
            let same = if fa.file_name().is_some_and(|n| n == "report.json") {
                without_meta(fa) == without_meta(fb)
            } else {
                fs::read(fa).unwrap() == fs::read(fb).unwrap()
            };
            if !same {
                diffs.push(format!("{}: {}", r.name, rel(&r.dir, fa).display()));
            }
        }
    }
    outcome(
        diffs.is_empty(),
        if diffs.is_empty() {
            format!("{compared} artifacts identical")
        } else {
            format!("differences in {}", diffs.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().unwrap();
    let runs = vec![
        run_into("round", ROUND, &scratch.path().join("round")),
        run_into("dumbbell", DUMBBELL, &scratch.path().join("dumbbell")),
        run_into("berger", BERGER, &scratch.path().join("berger")),
    ];
    let (round, dumbbell, berger) = (&runs[0].sim, &runs[1].sim, &runs[2].sim);
    let (c4, c5) = criteria_4_5();
    let results = [
        ("round-sphere oracle (warped)", criterion_1(round)),
        ("round-sphere oracle (homogeneous)", criterion_2()),
        ("scale invariance", criterion_3()),
        ("eigenvalue ODE identities", c4),
        ("cone properties", c5),
        ("differential checks", criterion_6(&runs)),
        ("volume-energy inequality", criterion_7(&runs)),
        ("neck energy", criterion_8()),
        ("dichotomy", criterion_9(round, dumbbell, berger)),
        ("determinism", criterion_10(&runs, scratch.path())),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("criterion {}: {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
