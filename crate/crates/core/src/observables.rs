//! Scalar monitors along a flow and the two differential checks on `R`.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::blowup::kappa_ratio;
use crate::error::{LabError, Result};
use crate::warped::{derive_geometry, GeometryFields, WarpedProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowObservables {
    pub time: f64,
    /// `max(|m1|, |m3|)` over all nodes.
    pub sup_rm: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub vol: f64,
    /// `int |R|^{3/2} dV`.
    pub energy: f64,
    /// `energy^{2/3}`, the L^{3/2} norm of `R`.
    pub r_norm: f64,
    /// Minimum of `(m1 + m2) / m3` over nodes with `m3 > 0`; NaN if there are none.
    pub min_pinch_ratio: f64,
    pub kappa: f64,
    /// `int R dV`.
    pub r_integral: f64,
    /// Step taken from this state; 0 for a terminal state.
    pub dt: f64,
}

fn volume_density(p: &WarpedProfile, j: usize) -> f64 {
    4.0 * PI * p.psi[j] * p.psi[j] * p.phi[j]
}

/// Trapezoid rule for `int F dV` with `dV = 4 pi psi^2 phi dx`.
pub fn integrate_dv(p: &WarpedProfile, field: impl Fn(usize) -> f64) -> f64 {
    let last = p.len() - 1;
    let mut sum = 0.0;
    for j in 0..=last {
        let w = if j == 0 || j == last { 0.5 } else { 1.0 };
        sum += w * field(j) * volume_density(p, j);
    }
    sum * p.h()
}

/// Minimum of the parabola through the smallest node value and its two
/// neighbours (mirrored at a pole), so that the minimum does not jump as
/// nodes slide past it.
fn subgrid_min(s: &[f64], r: &[f64]) -> f64 {
    let last = r.len() - 1;
    let j = (0..=last).fold(0, |k, j| if r[j] < r[k] { j } else { k });
    let (sm, rm) = if j == 0 { (-s[1], r[1]) } else { (s[j - 1], r[j - 1]) };
    let (sp, rp) = if j == last { (2.0 * s[last] - s[last - 1], r[last - 1]) } else { (s[j + 1], r[j + 1]) };
    let (a, b) = (s[j] - sm, sp - s[j]);
    // Fit r = r_j + c1 (x - s_j) + c2 (x - s_j)^2.
    let c2 = ((rp - r[j]) / b + (rm - r[j]) / a) / (a + b);
    let c1 = (rp - r[j]) / b - c2 * b;
    if !(c2 > 0.0) {
        return r[j];
    }
    (r[j] - c1 * c1 / (4.0 * c2)).min(r[j])
}

pub fn measure(p: &WarpedProfile) -> Result<FlowObservables> {
    let geo = derive_geometry(p)?;
    measure_with(p, &geo)
}

/// As [`measure`] with precomputed geometry.
pub fn measure_with(p: &WarpedProfile, geo: &GeometryFields) -> Result<FlowObservables> {
    let r = &geo.r_scalar;
    let r_min = subgrid_min(&p.arclength(), r);
    let r_max = r.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let vol = integrate_dv(p, |_| 1.0);
    let energy = integrate_dv(p, |j| r[j].abs().powf(1.5));
    let r_integral = integrate_dv(p, |j| r[j]);
    let min_pinch_ratio = (1..=p.n)
        .filter_map(|j| geo.eigenvalues(j).pinching_ratio())
        .fold(f64::NAN, f64::min);
    let sup_rm = geo.sup_rm();
    let node = geo.argmax_rm();
    let radius = sup_rm.powf(-0.5).min(0.5 * p.diameter());
    let kappa = kappa_ratio(p, node, radius)?;
    let out = FlowObservables {
        time: p.time,
        sup_rm,
        r_min,
        r_max,
        vol,
        energy,
        r_norm: energy.powf(2.0 / 3.0),
        min_pinch_ratio,
        kappa,
        r_integral,
        dt: 0.0,
    };
    if [vol, energy, r_min, r_max, kappa].iter().any(|v| !v.is_finite()) {
        return Err(LabError::DegenerateProfile("non-finite observable".into()));
    }
    Ok(out)
}

/// Result of the forward-difference test
/// `(R_min(t + dt) - R_min(t)) / dt >= (2/3) R_min(t)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RminComparison {
    /// Most negative `LHS - RHS` over the history (positive if never violated).
    pub worst_violation: f64,
    pub max_abs_rhs: f64,
}

impl RminComparison {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.worst_violation >= -rel_tol * self.max_abs_rhs
    }
}

pub fn rmin_comparison(history: &[FlowObservables]) -> RminComparison {
    let mut worst = f64::INFINITY;
    let mut max_rhs = 0.0_f64;
    for w in history.windows(2) {
        let dt = w[1].time - w[0].time;
        if !(dt > 0.0) {
            continue;
        }
        let lhs = (w[1].r_min - w[0].r_min) / dt;
        let rhs = 2.0 / 3.0 * w[0].r_min * w[0].r_min;
        worst = worst.min(lhs - rhs);
        max_rhs = max_rhs.max(rhs.abs());
    }
    RminComparison {
        worst_violation: if worst.is_finite() { worst } else { 0.0 },
        max_abs_rhs: max_rhs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeRateCheck {
    /// Largest `|dVol/dt + int R dV| / |int R dV|` over consecutive pairs,
    /// with `int R dV` averaged over the pair.
    pub worst_rel_mismatch: f64,
    /// Steps with `r_min > 0` at both ends where the volume did not decrease.
    pub monotonicity_violations: usize,
}

impl VolumeRateCheck {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.monotonicity_violations == 0 && self.worst_rel_mismatch <= rel_tol
    }
}

pub fn volume_rate_check(history: &[FlowObservables]) -> VolumeRateCheck {
    let mut worst = 0.0_f64;
    let mut bad = 0;
    for w in history.windows(2) {
        let dt = w[1].time - w[0].time;
        if !(dt > 0.0) {
            continue;
        }
        if w[0].r_min > 0.0 && w[1].r_min > 0.0 && !(w[1].vol < w[0].vol) {
            bad += 1;
        }
        let rate = (w[1].vol - w[0].vol) / dt;
        let target = -0.5 * (w[0].r_integral + w[1].r_integral);
        if target != 0.0 {
            worst = worst.max(((rate - target) / target).abs());
        }
    }
    VolumeRateCheck {
        worst_rel_mismatch: worst,
        monotonicity_violations: bad,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    /// Residual at interior nodes `1..=n`.
    pub values: Vec<f64>,
    pub max_norm: f64,
}

/// `(R_after - R_before) / dt - [Delta R + 2 |Ric|^2]`, the bracket averaged
/// over both snapshots. Both snapshots must use the same material `x`, i.e.
/// come from the fixed gauge.
pub fn scalar_evolution_residual(before: &WarpedProfile, after: &WarpedProfile) -> Result<ResidualField> {
    if before.n != after.n {
        return Err(LabError::GridMismatch(format!(
            "snapshots have n = {} and n = {}",
            before.n, after.n
        )));
    }
    let dt = after.time - before.time;
    if !(dt > 0.0) {
        return Err(LabError::GridMismatch(format!("non-increasing time (dt = {dt})")));
    }
    let g0 = derive_geometry(before)?;
    let g1 = derive_geometry(after)?;
    let f0 = evolution_rhs(before, &g0);
    let f1 = evolution_rhs(after, &g1);
    let values: Vec<f64> = (1..=before.n)
        .map(|j| (g1.r_scalar[j] - g0.r_scalar[j]) / dt - 0.5 * (f0[j - 1] + f1[j - 1]))
        .collect();
    let max_norm = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(ResidualField { values, max_norm })
}

/// `Delta R + 2 |Ric|^2` at interior nodes, with `|Ric|^2 = 4 k1^2 + 2 (k1 + k2)^2`.
fn evolution_rhs(p: &WarpedProfile, geo: &GeometryFields) -> Vec<f64> {
    let h = p.h();
    let r = &geo.r_scalar;
    (1..=p.n)
        .map(|j| {
            let phi_p = 0.5 * (p.phi[j] + p.phi[j + 1]);
            let phi_m = 0.5 * (p.phi[j] + p.phi[j - 1]);
            let r_ss = ((r[j + 1] - r[j]) / phi_p - (r[j] - r[j - 1]) / phi_m) / (h * h * p.phi[j]);
            let r_s = (r[j + 1] - r[j - 1]) / (2.0 * h * p.phi[j]);
            let lap = r_ss + 2.0 * geo.psi_s[j] / p.psi[j] * r_s;
            let (k1, k2) = (geo.k1[j], geo.k2[j]);
            lap + 2.0 * (4.0 * k1 * k1 + 2.0 * (k1 + k2) * (k1 + k2))
        })
        .collect()
}

/// Columns `t, sup_rm, r_min, r_max, vol, energy, r_norm, min_pinch_ratio, kappa, r_integral, dt`.
pub fn write_series_csv<'a, W: Write>(
    out: W,
    rows: impl IntoIterator<Item = &'a FlowObservables>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "sup_rm",
        "r_min",
        "r_max",
        "vol",
        "energy",
        "r_norm",
        "min_pinch_ratio",
        "kappa",
        "r_integral",
        "dt",
    ])?;
    for o in rows {
        let row = [
            o.time,
            o.sup_rm,
            o.r_min,
            o.r_max,
            o.vol,
            o.energy,
            o.r_norm,
            o.min_pinch_ratio,
            o.kappa,
            o.r_integral,
            o.dt,
        ];
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
