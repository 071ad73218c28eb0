//! Rotationally symmetric metrics `g = phi^2 dx^2 + psi^2 g_S2` on S^3.
//!
//! Nodes are `x_j = j / (n + 1)`, `j = 0..=n+1`; the two end nodes are the
//! poles where `psi = 0`. Curvatures are computed in the regular variables of
//! [`scheme`], which keeps both sectional curvatures smooth up to the poles.

mod grid;
mod scheme;

use std::f64::consts::PI;
use std::io::{Read, Write};

pub use grid::Grid;
pub use scheme::{AdaptiveGauge, Gauge};

use crate::curvature::{eigenvalues_from_sectional, CurvatureEigenvalues};
use crate::error::{domain, LabError, Result};
use scheme::{curvature, profile_vars, psi_s, rates, regular_vars};

/// Tolerance on `|psi_s| - 1` above which a step reports a gradient warning.
pub const GRADIENT_TOL: f64 = 1e-3;

/// Factor in the default curvature cap `1e6 * (sup|Rm|_0 + 1)`.
pub const DEFAULT_CAP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct WarpedProfile {
    /// Number of interior nodes.
    pub n: usize,
    pub time: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl WarpedProfile {
    /// Builds a profile and checks its invariants.
    pub fn new(n: usize, time: f64, phi: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        let p = Self { n, time, phi, psi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.n + 2;
        if self.phi.len() != len || self.psi.len() != len {
            return Err(LabError::GridMismatch(format!(
                "expected {len} nodes, got phi {} / psi {}",
                self.phi.len(),
                self.psi.len()
            )));
        }
        if self.psi[0] != 0.0 || self.psi[len - 1] != 0.0 {
            return Err(LabError::DegenerateProfile("psi must vanish at the poles".into()));
        }
        if let Some(j) = (1..len - 1).find(|&j| !(self.psi[j] > 0.0)) {
            return Err(LabError::DegenerateProfile(format!(
                "psi = {} at interior node {j}",
                self.psi[j]
            )));
        }
        if let Some(j) = (0..len).find(|&j| !(self.phi[j] > 0.0) || !self.phi[j].is_finite()) {
            return Err(LabError::DegenerateProfile(format!("phi = {} at node {j}", self.phi[j])));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n + 2
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n + 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        if j == self.n + 1 {
            1.0
        } else {
            j as f64 * self.h()
        }
    }

    /// Arclength from the `x = 0` pole at every node.
    pub fn arclength(&self) -> Vec<f64> {
        let h = self.h();
        let mut s = vec![0.0; self.len()];
        for j in 1..self.len() {
            s[j] = s[j - 1] + 0.5 * h * (self.phi[j - 1] + self.phi[j]);
        }
        s
    }

    /// Pole-to-pole arclength.
    pub fn diameter(&self) -> f64 {
        grid::trapezoid(&self.phi, self.h())
    }

    /// Parabolic rescaling `g -> q g`: lengths scale by `sqrt(q)`.
    pub fn scaled(&self, q: f64) -> Self {
        let s = q.sqrt();
        Self {
            n: self.n,
            time: self.time,
            phi: self.phi.iter().map(|v| v * s).collect(),
            psi: self.psi.iter().map(|v| v * s).collect(),
        }
    }
}

/// Round sphere of radius `r`: `phi = r pi`, `psi = r sin(pi x)`.
pub fn make_round(r: f64, n: usize) -> Result<WarpedProfile> {
    if !(r > 0.0) {
        return Err(domain(format!("r must be > 0 (got {r})")));
    }
    check_n(n)?;
    let g = Grid::new(n);
    Ok(WarpedProfile {
        n,
        time: 0.0,
        phi: vec![r * PI; n + 2],
        psi: g.f.iter().map(|f| r * f).collect(),
    })
}

/// Dumbbell `psi = sin(pi x) (1 - a exp(-(x - 1/2)^2 / w))`, `phi = pi`.
pub fn make_dumbbell(a: f64, w: f64, n: usize) -> Result<WarpedProfile> {
    if !(a < 1.0) {
        return Err(domain(format!("a must be < 1 (got {a})")));
    }
    if !(a >= 0.0) {
        return Err(domain(format!("a must be >= 0 (got {a})")));
    }
    if !(w > 0.0) {
        return Err(domain(format!("w must be > 0 (got {w})")));
    }
    check_n(n)?;
    let g = Grid::new(n);
    let last = g.last();
    let psi = (0..=last)
        .map(|j| {
            // Distance to the centre, mirrored exactly.
            let d = (2 * j).abs_diff(last) as f64 * 0.5 * g.h;
            g.f[j] * (1.0 - a * (-d * d / w).exp())
        })
        .collect();
    Ok(WarpedProfile {
        n,
        time: 0.0,
        phi: vec![PI; n + 2],
        psi,
    })
}

fn check_n(n: usize) -> Result<()> {
    if n < 16 {
        return Err(domain(format!("n must be >= 16 (got {n})")));
    }
    Ok(())
}

/// Curvature data at every node; pole entries hold the smooth limits.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryFields {
    pub psi_s: Vec<f64>,
    pub psi_ss: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub r_scalar: Vec<f64>,
}

impl GeometryFields {
    pub fn eigenvalues(&self, j: usize) -> CurvatureEigenvalues {
        eigenvalues_from_sectional(self.k1[j], self.k2[j])
    }

    /// `max_j max(|k1|, |k2|)`, which equals `max(|m1|, |m3|)`.
    pub fn sup_rm(&self) -> f64 {
        self.k1
            .iter()
            .zip(&self.k2)
            .fold(0.0_f64, |m, (a, b)| m.max(a.abs()).max(b.abs()))
    }

    /// Node of largest `max(|k1|, |k2|)`; ties go to the lowest index.
    pub fn argmax_rm(&self) -> usize {
        let mut best = 0;
        let mut val = -1.0;
        for j in 0..self.k1.len() {
            let v = self.k1[j].abs().max(self.k2[j].abs());
            if v > val {
                val = v;
                best = j;
            }
        }
        best
    }
}

pub fn derive_geometry(p: &WarpedProfile) -> Result<GeometryFields> {
    let g = Grid::new(p.n);
    geometry_on(&g, p)
}

pub(crate) fn geometry_on(g: &Grid, p: &WarpedProfile) -> Result<GeometryFields> {
    let (q, lam) = regular_vars(g, &p.phi, &p.psi);
    let cv = curvature(g, &q, &lam);
    if !cv.is_finite() {
        return Err(LabError::DegenerateProfile("non-finite curvature".into()));
    }
    let ps = psi_s(g, &lam, &cv);
    let psi_ss = (0..g.len()).map(|j| -cv.k1[j] * p.psi[j]).collect();
    let r_scalar = (0..g.len()).map(|j| 4.0 * cv.k1[j] + 2.0 * cv.k2[j]).collect();
    Ok(GeometryFields {
        psi_s: ps,
        psi_ss,
        k1: cv.k1,
        k2: cv.k2,
        r_scalar,
    })
}

/// Ricci flow without tangential terms:
/// `psi_t = psi_ss - (1 - psi_s^2) / psi = -(k1 + k2) psi`,
/// `phi_t = 2 (psi_ss / psi) phi = -2 k1 phi`.
pub fn flow_rhs(p: &WarpedProfile) -> Result<(Vec<f64>, Vec<f64>)> {
    let geo = derive_geometry(p)?;
    let dphi = (0..p.len()).map(|j| -2.0 * geo.k1[j] * p.phi[j]).collect();
    let dpsi = (0..p.len())
        .map(|j| -(geo.k1[j] + geo.k2[j]) * p.psi[j])
        .collect();
    Ok((dphi, dpsi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub sigma: f64,
    pub curvature_cap: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn new(sigma: f64, curvature_cap: f64, max_steps: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 0.5) {
            return Err(domain(format!("sigma must lie in (0, 0.5] (got {sigma})")));
        }
        if !(curvature_cap > 0.0) {
            return Err(domain(format!("curvature_cap must be > 0 (got {curvature_cap})")));
        }
        Ok(Self {
            sigma,
            curvature_cap,
            max_steps,
        })
    }
}

/// `1e6 * (sup|Rm| + 1)`.
pub fn default_cap(initial_sup_rm: f64) -> f64 {
    DEFAULT_CAP_FACTOR * (initial_sup_rm + 1.0)
}

/// `min(sigma (min_j phi_j dx)^2, sigma / (sup|Rm| + 1))`.
pub fn cfl_dt(p: &WarpedProfile, c: &StepControl) -> f64 {
    let g = Grid::new(p.n);
    let (q, lam) = regular_vars(&g, &p.phi, &p.psi);
    let rm = curvature(&g, &q, &lam).sup_rm();
    cfl_bound(p, c.sigma, rm)
}

fn cfl_bound(p: &WarpedProfile, sigma: f64, sup_rm: f64) -> f64 {
    let h = p.h();
    let phi_min = p.phi[1..=p.n].iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let spatial = sigma * (phi_min * h).powi(2);
    spatial.min(sigma / (sup_rm + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    /// `sup|Rm|` of the input profile.
    pub sup_rm: f64,
    pub max_abs_psi_s: f64,
    /// `|psi_s| > 1 + GRADIENT_TOL` somewhere in the output.
    pub gradient_warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Advanced(WarpedProfile, StepInfo),
    /// `sup|Rm|` of the input already reached the cap; nothing was done.
    CapReached { sup_rm: f64 },
}

/// Explicit second-order (Heun) stepper with a tangential gauge.
#[derive(Debug, Clone)]
pub struct WarpedSolver {
    grid: Grid,
    pub control: StepControl,
    pub gauge: Gauge,
}

impl WarpedSolver {
    pub fn new(n: usize, control: StepControl, gauge: Gauge) -> Self {
        Self {
            grid: Grid::new(n),
            control,
            gauge,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn geometry(&self, p: &WarpedProfile) -> Result<GeometryFields> {
        geometry_on(&self.grid, p)
    }

    /// Gauge velocity `V` (so that `W = V sin(pi x)`) at the given profile.
    pub fn gauge_velocity(&self, p: &WarpedProfile) -> Vec<f64> {
        let (q, lam) = regular_vars(&self.grid, &p.phi, &p.psi);
        rates(&self.grid, &q, &lam, &self.gauge).v
    }

    /// Advances by the stable step. Besides the CFL bound the step also
    /// keeps the gauge advection number and the relaxation factor below
    /// `sigma` and 1 respectively.
    pub fn step(&self, p: &WarpedProfile) -> Result<StepOutcome> {
        self.check_grid(p)?;
        let (q, lam) = regular_vars(&self.grid, &p.phi, &p.psi);
        let r1 = rates(&self.grid, &q, &lam, &self.gauge);
        if !r1.curv.is_finite() {
            return Err(LabError::DegenerateProfile("non-finite curvature".into()));
        }
        if r1.sup_rm >= self.control.curvature_cap {
            return Ok(StepOutcome::CapReached { sup_rm: r1.sup_rm });
        }
        let sigma = self.control.sigma;
        let mut dt = cfl_bound(p, sigma, r1.sup_rm);
        let wmax = (0..self.grid.len()).fold(0.0_f64, |m, j| m.max((r1.v[j] * self.grid.f[j]).abs()));
        if wmax > 0.0 {
            dt = dt.min(sigma * self.grid.h / wmax);
        }
        if let Gauge::Adaptive(a) = self.gauge {
            dt = dt.min(1.0 / (a.relax * (r1.sup_rm + 1.0)));
        }
        let sup_rm = r1.sup_rm;
        let out = self.heun(p, &q, &lam, r1, dt)?;
        let (max_ps, warn) = self.gradient_check(&out)?;
        Ok(StepOutcome::Advanced(
            out,
            StepInfo {
                dt,
                sup_rm,
                max_abs_psi_s: max_ps,
                gradient_warning: warn,
            },
        ))
    }

    /// One Heun step with a caller-supplied `dt` (no cap check).
    pub fn step_with_dt(&self, p: &WarpedProfile, dt: f64) -> Result<WarpedProfile> {
        self.check_grid(p)?;
        let (q, lam) = regular_vars(&self.grid, &p.phi, &p.psi);
        let r1 = rates(&self.grid, &q, &lam, &self.gauge);
        self.heun(p, &q, &lam, r1, dt)
    }

    fn check_grid(&self, p: &WarpedProfile) -> Result<()> {
        if p.n != self.grid.n || p.phi.len() != p.n + 2 || p.psi.len() != p.n + 2 {
            return Err(LabError::GridMismatch(format!(
                "solver has n = {}, profile has n = {}",
                self.grid.n, p.n
            )));
        }
        Ok(())
    }

    fn heun(
        &self,
        p: &WarpedProfile,
        q: &[f64],
        lam: &[f64],
        r1: scheme::Rates,
        dt: f64,
    ) -> Result<WarpedProfile> {
        let len = self.grid.len();
        let q1: Vec<f64> = (0..len).map(|j| q[j] + dt * r1.dq[j]).collect();
        let l1: Vec<f64> = (0..len).map(|j| lam[j] + dt * r1.dlam[j]).collect();
        self.check_positive(&q1, &l1, p.time + dt)?;
        let r2 = rates(&self.grid, &q1, &l1, &self.gauge);
        let q2: Vec<f64> = (0..len)
            .map(|j| q[j] + 0.5 * dt * (r1.dq[j] + r2.dq[j]))
            .collect();
        let l2: Vec<f64> = (0..len)
            .map(|j| lam[j] + 0.5 * dt * (r1.dlam[j] + r2.dlam[j]))
            .collect();
        self.check_positive(&q2, &l2, p.time + dt)?;
        let (phi, psi) = profile_vars(&self.grid, &q2, &l2);
        Ok(WarpedProfile {
            n: p.n,
            time: p.time + dt,
            phi,
            psi,
        })
    }

    fn check_positive(&self, q: &[f64], lam: &[f64], t: f64) -> Result<()> {
        let last = self.grid.last();
        if let Some(j) = (1..last).find(|&j| !(q[j] > 0.0)) {
            return Err(LabError::Instability { node: j, t });
        }
        if !(q[0] > 0.0 && q[last] > 0.0) {
            return Err(LabError::DegenerateProfile(format!("phi <= 0 at a pole (t = {t})")));
        }
        if let Some(j) = (0..=last).find(|&j| !(lam[j] > 0.0) || !lam[j].is_finite()) {
            return Err(LabError::DegenerateProfile(format!(
                "coordinate map degenerated at node {j} (t = {t})"
            )));
        }
        Ok(())
    }

    fn gradient_check(&self, p: &WarpedProfile) -> Result<(f64, bool)> {
        let geo = self.geometry(p)?;
        let m = geo.psi_s[1..=p.n].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok((m, m > 1.0 + GRADIENT_TOL))
    }
}

/// One step with the default adaptive gauge.
pub fn step(p: &WarpedProfile, c: &StepControl) -> Result<StepOutcome> {
    WarpedSolver::new(p.n, *c, Gauge::default()).step(p)
}

/// Writes `x, phi, psi, k1, k2, R` with round-trip precision.
pub fn write_snapshot_csv<W: Write>(out: W, p: &WarpedProfile) -> Result<()> {
    let geo = derive_geometry(p)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "phi", "psi", "k1", "k2", "R"])?;
    for j in 0..p.len() {
        w.write_record([
            p.x(j).to_string(),
            p.phi[j].to_string(),
            p.psi[j].to_string(),
            geo.k1[j].to_string(),
            geo.k2[j].to_string(),
            geo.r_scalar[j].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot_csv`]. Curvature columns are
/// ignored; the time is set to 0.
pub fn read_snapshot_csv<R: Read>(input: R) -> Result<WarpedProfile> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LabError::GridMismatch(format!("missing column {name}")))
    };
    let (ix, iphi, ipsi) = (col("x")?, col("phi")?, col("psi")?);
    let mut xs = Vec::new();
    let mut phi = Vec::new();
    let mut psi = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| LabError::GridMismatch(format!("bad number: {e}")))
        };
        xs.push(parse(ix)?);
        phi.push(parse(iphi)?);
        psi.push(parse(ipsi)?);
    }
    if xs.len() < 18 {
        return Err(LabError::GridMismatch(format!("too few rows: {}", xs.len())));
    }
    let n = xs.len() - 2;
    let h = 1.0 / (n + 1) as f64;
    if let Some(j) = (0..xs.len()).find(|&j| (xs[j] - j as f64 * h).abs() > 1e-12) {
        return Err(LabError::GridMismatch(format!("non-uniform x at row {j}")));
    }
    WarpedProfile::new(n, 0.0, phi, psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_curvature_is_one() {
        let p = make_round(1.0, 100).unwrap();
        let geo = derive_geometry(&p).unwrap();
        for j in 0..p.len() {
            assert!((geo.k1[j] - 1.0).abs() < 1e-10, "k1[{j}] = {}", geo.k1[j]);
            assert!((geo.k2[j] - 1.0).abs() < 1e-10, "k2[{j}] = {}", geo.k2[j]);
            assert!((geo.r_scalar[j] - 6.0).abs() < 1e-9);
        }
        let p = make_round(2.0, 64).unwrap();
        let geo = derive_geometry(&p).unwrap();
        assert!(geo.r_scalar.iter().all(|r| (r - 1.5).abs() < 1e-9));
    }

    #[test]
    fn cfl_example() {
        // n = 99 gives dx = 0.01.
        let p = make_round(1.0, 99).unwrap();
        let c = StepControl::new(0.25, 1e6, 10).unwrap();
        let dt = cfl_dt(&p, &c);
        assert!((dt - 0.25 * (PI * 0.01_f64).powi(2)).abs() < 1e-15);
        assert!((dt - 2.467e-4).abs() < 1e-7);
    }

    #[test]
    fn dumbbell_domain() {
        assert!(make_dumbbell(1.2, 0.01, 100).is_err());
        let e = make_dumbbell(1.0, 0.01, 100).unwrap_err();
        assert_eq!(e.to_string(), "a must be < 1 (got 1)");
        assert!(make_dumbbell(0.5, 0.0, 100).is_err());
        let p = make_dumbbell(0.8, 0.01, 99).unwrap();
        assert!((p.psi[50] - 0.2).abs() < 1e-15);
        assert_eq!(make_dumbbell(0.0, 0.01, 40).unwrap(), make_round(1.0, 40).unwrap());
    }

    #[test]
    fn snapshot_round_trip() {
        let p = make_dumbbell(0.6, 0.02, 40).unwrap();
        let mut buf = Vec::new();
        write_snapshot_csv(&mut buf, &p).unwrap();
        let back = read_snapshot_csv(buf.as_slice()).unwrap();
        assert_eq!(back, p);
    }
}
