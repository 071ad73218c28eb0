//! Discrete Ricci flow of `phi^2 dx^2 + psi^2 g_S2` in regular variables.
//!
//! With `f = sin(pi x)`, `c = cos(pi x)` the state is carried as
//!
//! * `q = psi / f` (even across both poles, `q = phi / pi` at a pole),
//! * `lam = phi f / (pi psi)` (even, `lam = 1` at a pole).
//!
//! The conformal coordinate `sigma` with `d sigma = phi dx / psi` satisfies
//! `d sigma / dx = pi lam / f`, so `lam` measures how the x-grid is spread in
//! `sigma` relative to the round sphere. Both curvatures stay free of `0/0`
//! terms at the poles in these variables.
//!
//! The flow is Ricci flow plus the Lie derivative along a tangential field
//! `W = V f`. `V` is chosen from the prescribed rate of `lam`:
//! `(lam V)_x = (lam (k1 - k2) + lam_t) / f`, anchored at `x = 1/2`.
//! The fixed gauge takes `lam_t = -lam (k1 - k2)`, so `V = 0`; the frozen gauge
//! sets `lam_t = 0`. The adaptive gauge relaxes `lam` towards the map that
//! equidistributes `(k2^2 + k0^2)^(1/4) + w pi / L` in arclength, with
//! `k0 = (pi / L)^2` and `L` the diameter.

use std::f64::consts::PI;

use super::grid::{cumulative_from_center, diff_even, diff_even4, smooth_even, trapezoid, Grid};

#[derive(Debug, Clone)]
pub(crate) struct Curv {
    pub phi: Vec<f64>,
    pub qx: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
}

impl Curv {
    pub fn sup_rm(&self) -> f64 {
        self.k1
            .iter()
            .zip(&self.k2)
            .fold(0.0_f64, |m, (a, b)| m.max(a.abs()).max(b.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.k1.iter().chain(&self.k2).all(|v| v.is_finite())
    }
}

pub(crate) fn regular_vars(grid: &Grid, phi: &[f64], psi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let last = grid.last();
    let mut q = vec![0.0; last + 1];
    let mut lam = vec![1.0; last + 1];
    q[0] = phi[0] / PI;
    q[last] = phi[last] / PI;
    for j in 1..last {
        q[j] = psi[j] / grid.f[j];
        lam[j] = phi[j] / (PI * q[j]);
    }
    (q, lam)
}

pub(crate) fn profile_vars(grid: &Grid, q: &[f64], lam: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let phi = q.iter().zip(lam).map(|(q, l)| PI * l * q).collect();
    let psi = q.iter().zip(&grid.f).map(|(q, f)| q * f).collect();
    (phi, psi)
}

pub(crate) fn curvature(grid: &Grid, q: &[f64], lam: &[f64]) -> Curv {
    let last = grid.last();
    let h = grid.h;
    let phi: Vec<f64> = q.iter().zip(lam).map(|(q, l)| PI * l * q).collect();
    let mut qx = vec![0.0; last + 1];
    diff_even(q, h, &mut qx);
    let ratio: Vec<f64> = q.iter().zip(&phi).map(|(q, p)| q / p).collect();
    let mut rx = vec![0.0; last + 1];
    diff_even(&ratio, h, &mut rx);
    let g: Vec<f64> = (0..=last).map(|j| rx[j] + qx[j] / phi[j]).collect();

    let mut k1 = vec![0.0; last + 1];
    let mut k2 = vec![0.0; last + 1];
    for j in 0..=last {
        let jm = if j == 0 { 1 } else { j - 1 };
        let jp = if j == last { last - 1 } else { j + 1 };
        let fp = 0.5 * (phi[j] + phi[jp]);
        let fm = 0.5 * (phi[j] + phi[jm]);
        let lap = ((q[jp] - q[j]) / fp - (q[j] - q[jm]) / fm) / (h * h);
        let cot = if j == 0 {
            g[1] / h
        } else if j == last {
            -g[last - 1] / h
        } else {
            PI * grid.c[j] / grid.f[j] * g[j]
        };
        k1[j] = -(-PI * PI * q[j] / phi[j] + cot + lap) / (phi[j] * q[j]);
    }
    k2[0] = k1[0];
    k2[last] = k1[last];
    for j in 1..last {
        let mu = 1.0 / lam[j];
        let (f, c) = (grid.f[j], grid.c[j]);
        let a = qx[j] / phi[j];
        k2[j] = ((1.0 - mu * mu) / (f * f) + mu * mu - 2.0 * c * mu * a / f - a * a) / (q[j] * q[j]);
    }
    Curv { phi, qx, k1, k2 }
}

/// `psi_s = c / lam + f q_x / phi`.
pub(crate) fn psi_s(grid: &Grid, lam: &[f64], cv: &Curv) -> Vec<f64> {
    (0..grid.len())
        .map(|j| grid.c[j] / lam[j] + grid.f[j] * cv.qx[j] / cv.phi[j])
        .collect()
}

/// Tangential-gauge settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gauge {
    /// No tangential term: `x` is a fixed material coordinate.
    Fixed,
    /// `lam` held fixed in time.
    Frozen,
    /// `lam` relaxed towards an equidistributing map.
    Adaptive(AdaptiveGauge),
}

impl Default for Gauge {
    fn default() -> Self {
        Gauge::Adaptive(AdaptiveGauge::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveGauge {
    /// Relaxation rate in units of `sup|Rm| + 1`.
    pub relax: f64,
    /// Weight `w` of the arclength-uniform part of the monitor.
    pub uniform_weight: f64,
    /// Passes of the (1,2,1) filter applied to the monitor and the target.
    pub smoothing: usize,
}

impl Default for AdaptiveGauge {
    fn default() -> Self {
        Self {
            relax: 4.0,
            uniform_weight: 10.0,
            smoothing: 2,
        }
    }
}

/// Pointwise `lam` whose grid spacing equidistributes the smoothed monitor.
pub(crate) fn target_lam(grid: &Grid, q: &[f64], cv: &Curv, g: &AdaptiveGauge) -> Vec<f64> {
    let last = grid.last();
    let h = grid.h;
    let len = trapezoid(&cv.phi, h);
    let k0 = (PI / len).powi(2);
    let mut rho: Vec<f64> = (0..=last)
        .map(|j| (cv.k2[j] * cv.k2[j] + k0 * k0).sqrt().sqrt() + g.uniform_weight * PI / len)
        .collect();
    for _ in 0..g.smoothing {
        smooth_even(&mut rho);
    }
    let dm: Vec<f64> = (0..=last).map(|j| rho[j] * cv.phi[j]).collect();
    let m_tot = trapezoid(&dm, h);
    (0..=last).map(|j| m_tot / (PI * q[j] * rho[j])).collect()
}

/// Time derivatives of `(q, lam)` together with the curvature they used.
pub(crate) struct Rates {
    pub dq: Vec<f64>,
    pub dlam: Vec<f64>,
    pub v: Vec<f64>,
    pub curv: Curv,
    pub sup_rm: f64,
}

pub(crate) fn rates(grid: &Grid, q: &[f64], lam: &[f64], gauge: &Gauge) -> Rates {
    let last = grid.last();
    let curv = curvature(grid, q, lam);
    let sup_rm = curv.sup_rm();
    let dlam = match gauge {
        Gauge::Frozen => vec![0.0; last + 1],
        Gauge::Fixed => (0..=last).map(|j| -lam[j] * (curv.k1[j] - curv.k2[j])).collect(),
        Gauge::Adaptive(a) => {
            let target = target_lam(grid, q, &curv, a);
            let rate = a.relax * (sup_rm + 1.0);
            // The f^2 weight cancels the 1/f^2 sensitivity of k2 to lam near
            // the poles, which otherwise makes the relaxation stiff there.
            let mut d: Vec<f64> = (0..=last)
                .map(|j| rate * grid.f[j] * grid.f[j] * (target[j] - lam[j]))
                .collect();
            d[0] = 0.0;
            d[last] = 0.0;
            d
        }
    };
    let v = gauge_velocity(grid, lam, &curv, &dlam);
    let mut qx4 = vec![0.0; last + 1];
    diff_even4(q, grid.h, &mut qx4);
    let mut dq = vec![0.0; last + 1];
    for j in 0..=last {
        let advect = PI * grid.c[j] * q[j] + grid.f[j] * qx4[j];
        dq[j] = -q[j] * (curv.k1[j] + curv.k2[j]) + v[j] * advect;
    }
    Rates {
        dq,
        dlam,
        v,
        curv,
        sup_rm,
    }
}

pub(crate) fn gauge_velocity(grid: &Grid, lam: &[f64], cv: &Curv, dlam: &[f64]) -> Vec<f64> {
    let last = grid.last();
    let mut g = vec![0.0; last + 1];
    for j in 1..last {
        g[j] = (lam[j] * (cv.k1[j] - cv.k2[j]) + dlam[j]) / grid.f[j];
    }
    let c = cumulative_from_center(&g, grid.h);
    c.iter().zip(lam).map(|(c, l)| c / l).collect()
}
