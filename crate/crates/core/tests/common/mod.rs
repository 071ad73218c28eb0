#![allow(dead_code)]

use std::f64::consts::PI;

use ricci_lab::observables::scalar_evolution_residual;
use ricci_lab::warped::{make_dumbbell, Gauge, StepControl, StepOutcome, WarpedProfile, WarpedSolver};

/// Cylinder of radius `rho` and length `span` closed by two hemispheres,
/// parametrized proportionally to arclength.
pub fn capped_cylinder(rho: f64, span: f64, n: usize) -> WarpedProfile {
    let cap = 0.5 * PI * rho;
    let total = 2.0 * cap + span;
    let last = n + 1;
    let psi = (0..=last)
        .map(|j| {
            let d = j.min(last - j) as f64 / last as f64 * total;
            if d < cap {
                rho * (d / rho).sin()
            } else {
                rho
            }
        })
        .collect();
    WarpedProfile::new(n, 0.0, vec![total; n + 2], psi).unwrap()
}

pub fn solver(n: usize, cap: f64) -> WarpedSolver {
    WarpedSolver::new(n, StepControl::new(0.25, cap, usize::MAX).unwrap(), Gauge::default())
}

/// Steps until `stop` holds or the cap is reached; returns the last profile.
pub fn evolve_until(s: &WarpedSolver, mut p: WarpedProfile, mut stop: impl FnMut(&WarpedProfile) -> bool) -> WarpedProfile {
    while !stop(&p) {
        match s.step(&p).unwrap() {
            StepOutcome::Advanced(next, _) => p = next,
            StepOutcome::CapReached { .. } => break,
        }
    }
    p
}

/// Evolves with the default gauge to `t_end`; panics at the cap.
pub fn evolve_to(p: WarpedProfile, t_end: f64) -> WarpedProfile {
    let s = solver(p.n, f64::INFINITY);
    evolve_until(&s, p, |p| p.time >= t_end)
}

/// Max residual of the scalar-curvature evolution over one short
/// fixed-gauge step taken from `p`.
pub fn residual_probe(p: &WarpedProfile) -> f64 {
    let n = p.n;
    let s = WarpedSolver::new(n, StepControl::new(0.25, f64::INFINITY, usize::MAX).unwrap(), Gauge::Fixed);
    let after = s.step_with_dt(p, 1e-3 / (n * n) as f64).unwrap();
    scalar_evolution_residual(p, &after).unwrap().max_norm
}

/// Residual orders over `n = 100, 200, 400` for the dumbbell `(0.5, 0.01)`
/// evolved to `t = 0.002`.
pub fn dumbbell_residuals() -> (Vec<f64>, Vec<f64>) {
    let e: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| residual_probe(&evolve_to(make_dumbbell(0.5, 0.01, n).unwrap(), 0.002)))
        .collect();
    let orders = e.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    (e, orders)
}
