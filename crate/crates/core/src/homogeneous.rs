//! Left-invariant metrics `a X1^2 + b X2^2 + c X3^2` on SU(2), with the
//! frame normalised by `[X2, X3] = 2 X1` (and cyclic). The unit round S^3 is
//! `(1, 1, 1)`.

use std::f64::consts::PI;
use std::io::Write;

use crate::curvature::{eigenvalues_from_ricci, CurvatureEigenvalues};
use crate::error::{domain, LabError, Result};
use crate::observables::FlowObservables;
use crate::warped::StepControl;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousMetric {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub time: f64,
}

impl HomogeneousMetric {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("c", c)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(format!("{name} must be > 0 (got {v})")));
            }
        }
        Ok(Self { a, b, c, time: 0.0 })
    }

    pub fn coefficients(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn eigenvalues(&self) -> CurvatureEigenvalues {
        let [r1, r2, r3] = ricci_coefficients(self);
        eigenvalues_from_ricci(r1, r2, r3)
    }

    pub fn sup_rm(&self) -> f64 {
        self.eigenvalues().norm()
    }

    pub fn scalar(&self) -> f64 {
        ricci_coefficients(self).iter().sum()
    }

    /// `2 pi^2 sqrt(abc)`.
    pub fn volume(&self) -> f64 {
        2.0 * PI * PI * (self.a * self.b * self.c).sqrt()
    }

    /// `|R|^{3/2} Vol`.
    pub fn energy(&self) -> f64 {
        self.scalar().abs().powf(1.5) * self.volume()
    }

    /// `max(a, b, c) / min(a, b, c)`.
    pub fn anisotropy(&self) -> f64 {
        let v = self.coefficients();
        let hi = v.iter().fold(f64::MIN, |m, x| m.max(*x));
        let lo = v.iter().fold(f64::MAX, |m, x| m.min(*x));
        hi / lo
    }

    /// Metric scaled by `q`: every coefficient is multiplied by `q`.
    pub fn scaled(&self, q: f64) -> Self {
        Self {
            a: q * self.a,
            b: q * self.b,
            c: q * self.c,
            time: self.time,
        }
    }

    pub fn observables(&self, dt: f64) -> FlowObservables {
        let m = self.eigenvalues();
        let r = m.scalar();
        let vol = self.volume();
        let energy = self.energy();
        let sup_rm = m.norm();
        FlowObservables {
            time: self.time,
            sup_rm,
            r_min: r,
            r_max: r,
            vol,
            energy,
            r_norm: energy.powf(2.0 / 3.0),
            min_pinch_ratio: m.pinching_ratio().unwrap_or(f64::NAN),
            kappa: vol * sup_rm.powf(1.5),
            r_integral: r * vol,
            dt,
        }
    }
}

/// Orthonormal-frame Ricci eigenvalues `r_i = 2 mu_j mu_k` with
/// `mu_1 = (b + c - a) / sqrt(abc)` and cyclic.
pub fn ricci_coefficients(m: &HomogeneousMetric) -> [f64; 3] {
    let (a, b, c) = (m.a, m.b, m.c);
    let s = (a * b * c).sqrt();
    let mu1 = (b + c - a) / s;
    let mu2 = (a + c - b) / s;
    let mu3 = (a + b - c) / s;
    [2.0 * mu2 * mu3, 2.0 * mu1 * mu3, 2.0 * mu1 * mu2]
}

/// `da/dt = -4 (a^2 - (b - c)^2) / (bc)` and cyclic.
pub fn flow_rhs(m: &HomogeneousMetric) -> [f64; 3] {
    rhs([m.a, m.b, m.c])
}

fn rhs([a, b, c]: [f64; 3]) -> [f64; 3] {
    [
        -4.0 * (a * a - (b - c) * (b - c)) / (b * c),
        -4.0 * (b * b - (a - c) * (a - c)) / (a * c),
        -4.0 * (c * c - (a - b) * (a - b)) / (a * b),
    ]
}

fn rk4(y: [f64; 3], h: f64) -> [f64; 3] {
    let add = |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    let k1 = rhs(y);
    let k2 = rhs(add(y, k1, 0.5 * h));
    let k3 = rhs(add(y, k2, 0.5 * h));
    let k4 = rhs(add(y, k3, h));
    [0, 1, 2].map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Default safety factor for this backend.
pub const DEFAULT_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    CapReached,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct HomogeneousRun {
    /// States with their observables; `dt` is the step taken from each state.
    pub trajectory: Vec<(HomogeneousMetric, FlowObservables)>,
    pub termination: Termination,
}

pub fn integrate(m0: HomogeneousMetric, control: &StepControl) -> Result<HomogeneousRun> {
    integrate_with(m0, control, None)
}

/// RK4 with `dt = min(sigma / (sup|Rm| + 1), max_dt)`.
pub fn integrate_with(
    m0: HomogeneousMetric,
    control: &StepControl,
    max_dt: Option<f64>,
) -> Result<HomogeneousRun> {
    let mut m = HomogeneousMetric::new(m0.a, m0.b, m0.c)?;
    m.time = m0.time;
    let mut trajectory = Vec::new();
    let termination = loop {
        let rm = m.sup_rm();
        if rm >= control.curvature_cap {
            trajectory.push((m, m.observables(0.0)));
            break Termination::CapReached;
        }
        if trajectory.len() >= control.max_steps {
            trajectory.push((m, m.observables(0.0)));
            break Termination::MaxSteps;
        }
        let mut dt = control.sigma / (rm + 1.0);
        if let Some(cap) = max_dt {
            dt = dt.min(cap);
        }
        trajectory.push((m, m.observables(dt)));
        let [a, b, c] = rk4(m.coefficients(), dt);
        let t = m.time + dt;
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(LabError::PositivityViolation { t });
        }
        m = HomogeneousMetric { a, b, c, time: t };
    };
    Ok(HomogeneousRun {
        trajectory,
        termination,
    })
}

/// Columns `t, a, b, c, r1, r2, r3, R, vol, energy, ratio`.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &[(HomogeneousMetric, FlowObservables)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "a", "b", "c", "r1", "r2", "r3", "R", "vol", "energy", "ratio"])?;
    for (m, o) in traj {
        let [r1, r2, r3] = ricci_coefficients(m);
        let row = [m.time, m.a, m.b, m.c, r1, r2, r3, r1 + r2 + r3, o.vol, o.energy, o.min_pinch_ratio];
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
