//! Pointwise algebra of the 3-dimensional curvature operator.
//!
//! Eigenvalues are kept sorted, `m1 <= m2 <= m3`. Under Ricci flow the
//! reaction part of the curvature evolution acts on them as
//! `dm_i/dt = m_i^2 + m_j m_k`.

use std::io::Write;

use crate::error::{domain, LabError, Result};

/// Default blow-up cap for [`integrate_eigenvalues`].
pub const EIGEN_CAP: f64 = 1e12;

/// Sorted triple of curvature-operator eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureEigenvalues {
    m1: f64,
    m2: f64,
    m3: f64,
}

impl CurvatureEigenvalues {
    /// Builds a triple, sorting the inputs.
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        let mut v = [a, b, c];
        v.sort_by(f64::total_cmp);
        Self {
            m1: v[0],
            m2: v[1],
            m3: v[2],
        }
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn m3(&self) -> f64 {
        self.m3
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.m1, self.m2, self.m3]
    }

    pub fn trace(&self) -> f64 {
        self.m1 + self.m2 + self.m3
    }

    /// Scalar curvature, `R = 2 (m1 + m2 + m3)`.
    pub fn scalar(&self) -> f64 {
        2.0 * self.trace()
    }

    /// `max(|m1|, |m3|)`.
    pub fn norm(&self) -> f64 {
        self.m1.abs().max(self.m3.abs())
    }

    /// Pinching ratio `(m1 + m2) / m3`, `None` unless `m3 > 0`.
    pub fn pinching_ratio(&self) -> Option<f64> {
        (self.m3 > 0.0).then(|| (self.m1 + self.m2) / self.m3)
    }

    /// Ricci eigenvalues `r_i = m_j + m_k` in the eigenbasis order.
    pub fn ricci(&self) -> [f64; 3] {
        [self.m2 + self.m3, self.m1 + self.m3, self.m1 + self.m2]
    }
}

/// Cone `Z = { m1 + m2 >= c1, (m1 + m2) / m3 >= c2 }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinchingCone {
    pub c1: f64,
    pub c2: f64,
}

impl PinchingCone {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0) {
            return Err(domain(format!("c1 must be > 0 (got {c1})")));
        }
        if !(c2 > 0.0 && c2 <= 2.0) {
            return Err(domain(format!("c2 must lie in (0, 2] (got {c2})")));
        }
        Ok(Self { c1, c2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinchingGapParams {
    pub k: f64,
    pub delta: f64,
}

impl PinchingGapParams {
    pub fn new(k: f64, delta: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(domain(format!("k must be > 0 (got {k})")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(domain(format!("delta must lie in (0, 1) (got {delta})")));
        }
        Ok(Self { k, delta })
    }
}

/// Outcome of a cone membership test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeMembership {
    Inside,
    Outside,
    /// `m3 <= 0`: the ratio is undefined and the point is not a member.
    Degenerate,
}

impl ConeMembership {
    pub fn is_member(self) -> bool {
        self == ConeMembership::Inside
    }
}

/// Reaction terms `(m1^2 + m2 m3, m2^2 + m1 m3, m3^2 + m1 m2)`.
pub fn eigenvalue_rhs(m: &CurvatureEigenvalues) -> (f64, f64, f64) {
    let [a, b, c] = m.as_array();
    (a * a + b * c, b * b + a * c, c * c + a * b)
}

/// Rate of the pinching ratio, `[m1^2 (m3 - m2) + m2^2 (m3 - m1)] / m3^2`.
pub fn ratio_rate(m: &CurvatureEigenvalues) -> Result<f64> {
    let [a, b, c] = m.as_array();
    if c == 0.0 {
        return Err(LabError::DivisionByZero("ratio_rate requires m3 != 0"));
    }
    Ok((a * a * (c - b) + b * b * (c - a)) / (c * c))
}

fn rk4(y: [f64; 3], dt: f64) -> [f64; 3] {
    let f = |v: [f64; 3]| {
        [
            v[0] * v[0] + v[1] * v[2],
            v[1] * v[1] + v[0] * v[2],
            v[2] * v[2] + v[0] * v[1],
        ]
    };
    let add = |v: [f64; 3], k: [f64; 3], s: f64| [v[0] + s * k[0], v[1] + s * k[1], v[2] + s * k[2]];
    let k1 = f(y);
    let k2 = f(add(y, k1, 0.5 * dt));
    let k3 = f(add(y, k2, 0.5 * dt));
    let k4 = f(add(y, k3, dt));
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates the eigenvalue ODE with classical RK4 at fixed `dt` up to
/// `t_end`, halting early once some `|m_i|` exceeds `cap`.
///
/// The returned trajectory starts with `(0, m0)`. A step that breaks the
/// ordering by more than rounding is rejected with [`LabError::StepTooLarge`].
pub fn integrate_eigenvalues(
    m0: CurvatureEigenvalues,
    t_end: f64,
    dt: f64,
    cap: f64,
) -> Result<Vec<(f64, CurvatureEigenvalues)>> {
    if !(dt > 0.0) {
        return Err(domain(format!("dt must be > 0 (got {dt})")));
    }
    let mut out = vec![(0.0, m0)];
    let mut y = m0.as_array();
    let mut k: u64 = 0;
    let mut t = 0.0;
    while t < t_end && y.iter().all(|v| v.abs() <= cap) {
        let h = dt.min(t_end - t);
        let next = rk4(y, h);
        let scale = next.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        let tol = 1e-12 * scale;
        if !next.iter().all(|v| v.is_finite()) || next[0] - next[1] > tol || next[1] - next[2] > tol {
            return Err(LabError::StepTooLarge { t, dt: h });
        }
        k += 1;
        t = if h < dt { t_end } else { (k as f64 * dt).min(t_end) };
        let m = CurvatureEigenvalues::new(next[0], next[1], next[2]);
        y = m.as_array();
        out.push((t, m));
    }
    Ok(out)
}

/// RK4 with `dt = sigma / max|m_i|` until some `|m_i|` exceeds `cap`.
///
/// Unlike [`integrate_eigenvalues`] this resolves the approach to blow-up,
/// so trajectories can be followed up to large caps.
pub fn integrate_eigenvalues_to_cap(
    m0: CurvatureEigenvalues,
    sigma: f64,
    cap: f64,
    max_steps: usize,
) -> Result<Vec<(f64, CurvatureEigenvalues)>> {
    if !(sigma > 0.0 && sigma <= 0.5) {
        return Err(domain(format!("sigma must lie in (0, 0.5] (got {sigma})")));
    }
    let mut out = vec![(0.0, m0)];
    let mut y = m0.as_array();
    let mut t = 0.0;
    while out.len() <= max_steps {
        let scale = y.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        if scale > cap || scale == 0.0 {
            break;
        }
        let dt = sigma / scale;
        let next = rk4(y, dt);
        let tol = 1e-12 * next.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        if !next.iter().all(|v| v.is_finite()) || next[0] - next[1] > tol || next[1] - next[2] > tol {
            return Err(LabError::StepTooLarge { t, dt });
        }
        t += dt;
        let m = CurvatureEigenvalues::new(next[0], next[1], next[2]);
        y = m.as_array();
        out.push((t, m));
    }
    Ok(out)
}

/// Membership in the pinching cone, boundary inclusive.
pub fn in_cone(m: &CurvatureEigenvalues, z: &PinchingCone) -> ConeMembership {
    let Some(ratio) = m.pinching_ratio() else {
        return ConeMembership::Degenerate;
    };
    if m.m1 + m.m2 >= z.c1 && ratio >= z.c2 {
        ConeMembership::Inside
    } else {
        ConeMembership::Outside
    }
}

/// Symmetric 3x3 operator stored by its six independent entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricOperator {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl SymmetricOperator {
    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Self {
            xx: a,
            yy: b,
            zz: c,
            xy: 0.0,
            xz: 0.0,
            yz: 0.0,
        }
    }

    /// Accepts a full matrix whose off-diagonal pairs agree to `1e-12`
    /// relative to the largest entry; the pair average is stored.
    pub fn from_matrix(a: [[f64; 3]; 3]) -> Result<Self> {
        let scale = a.iter().flatten().fold(1.0_f64, |s, v| s.max(v.abs()));
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * scale {
                return Err(domain(format!(
                    "matrix not symmetric: entries ({i},{j}) = {} and ({j},{i}) = {}",
                    a[i][j], a[j][i]
                )));
            }
        }
        Ok(Self {
            xx: a[0][0],
            yy: a[1][1],
            zz: a[2][2],
            xy: 0.5 * (a[0][1] + a[1][0]),
            xz: 0.5 * (a[0][2] + a[2][0]),
            yz: 0.5 * (a[1][2] + a[2][1]),
        })
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    /// `r A r^T` for a rotation `r`. Symmetry is restored by averaging.
    pub fn conjugated(&self, r: &[[f64; 3]; 3]) -> Self {
        let a = self.to_matrix();
        let mut ra = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                ra[i][j] = (0..3).map(|k| r[i][k] * a[k][j]).sum();
            }
        }
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| ra[i][k] * r[j][k]).sum();
            }
        }
        Self {
            xx: out[0][0],
            yy: out[1][1],
            zz: out[2][2],
            xy: 0.5 * (out[0][1] + out[1][0]),
            xz: 0.5 * (out[0][2] + out[2][0]),
            yz: 0.5 * (out[1][2] + out[2][1]),
        }
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn blend(&self, other: &Self, lambda: f64) -> Self {
        let mix = |a: f64, b: f64| lambda * a + (1.0 - lambda) * b;
        Self {
            xx: mix(self.xx, other.xx),
            yy: mix(self.yy, other.yy),
            zz: mix(self.zz, other.zz),
            xy: mix(self.xy, other.xy),
            xz: mix(self.xz, other.xz),
            yz: mix(self.yz, other.yz),
        }
    }

    /// Eigenvalues by the trigonometric solution of the characteristic cubic.
    pub fn eigenvalues(&self) -> CurvatureEigenvalues {
        let p1 = self.xy * self.xy + self.xz * self.xz + self.yz * self.yz;
        if p1 == 0.0 {
            return CurvatureEigenvalues::new(self.xx, self.yy, self.zz);
        }
        let q = (self.xx + self.yy + self.zz) / 3.0;
        let (dx, dy, dz) = (self.xx - q, self.yy - q, self.zz - q);
        let p2 = dx * dx + dy * dy + dz * dz + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let (bxx, byy, bzz) = (dx / p, dy / p, dz / p);
        let (bxy, bxz, byz) = (self.xy / p, self.xz / p, self.yz / p);
        let det = bxx * (byy * bzz - byz * byz) - bxy * (bxy * bzz - byz * bxz)
            + bxz * (bxy * byz - byy * bxz);
        let r = (0.5 * det).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let hi = q + 2.0 * p * phi.cos();
        let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let mid = 3.0 * q - hi - lo;
        CurvatureEigenvalues::new(lo, mid, hi)
    }
}

/// Membership bit of `lambda * t0 + (1 - lambda) * t1` in `z`.
pub fn cone_convexity_witness(
    t0: &SymmetricOperator,
    t1: &SymmetricOperator,
    z: &PinchingCone,
    lambda: f64,
) -> bool {
    in_cone(&t0.blend(t1, lambda).eigenvalues(), z).is_member()
}

/// Evaluates `m3 - m1 <= K (m1 + m2 + m3)^(1 - delta)`.
pub fn pinching_gap_holds(m: &CurvatureEigenvalues, p: &PinchingGapParams) -> Result<bool> {
    let tr = m.trace();
    if !(tr > 0.0) {
        return Err(domain(format!("pinching gap needs a positive trace (got {tr})")));
    }
    Ok(m.m3 - m.m1 <= p.k * tr.powf(1.0 - p.delta))
}

/// Curvature operator of `ds^2 + psi^2 g_S2`: the multiset `{k1, k1, k2}`.
pub fn eigenvalues_from_sectional(k1: f64, k2: f64) -> CurvatureEigenvalues {
    CurvatureEigenvalues::new(k1, k1, k2)
}

/// Inverts `r_i = m_j + m_k`.
pub fn eigenvalues_from_ricci(r1: f64, r2: f64, r3: f64) -> CurvatureEigenvalues {
    CurvatureEigenvalues::new(
        0.5 * (r2 + r3 - r1),
        0.5 * (r1 + r3 - r2),
        0.5 * (r1 + r2 - r3),
    )
}

/// Writes `t, m1, m2, m3, ratio`; the ratio column is empty when `m3 <= 0`.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &[(f64, CurvatureEigenvalues)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "m1", "m2", "m3", "ratio"])?;
    for (t, m) in traj {
        let ratio = m.pinching_ratio().map(|r| r.to_string()).unwrap_or_default();
        w.write_record([
            t.to_string(),
            m.m1.to_string(),
            m.m2.to_string(),
            m.m3.to_string(),
            ratio,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(a: f64, b: f64, c: f64) -> CurvatureEigenvalues {
        CurvatureEigenvalues::new(a, b, c)
    }

    #[test]
    fn constructor_sorts() {
        assert_eq!(ev(3.0, 1.0, 2.0).as_array(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(eigenvalue_rhs(&ev(1.0, 1.0, 1.0)), (2.0, 2.0, 2.0));
        assert_eq!(eigenvalue_rhs(&ev(0.0, 0.0, 1.0)), (0.0, 0.0, 1.0));
        let (a, b, c) = eigenvalue_rhs(&ev(1.0, 2.0, 3.0));
        assert_eq!((a, b, c), (7.0, 7.0, 11.0));
        assert_eq!(a + b, 1.0 + 4.0 + 3.0 * 3.0);
    }

    #[test]
    fn ratio_rate_examples() {
        assert_eq!(ratio_rate(&ev(1.0, 2.0, 3.0)).unwrap(), 1.0);
        assert_eq!(ratio_rate(&ev(1.0, 1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(ratio_rate(&ev(0.0, 0.0, 1.0)).unwrap(), 0.0);
        assert!(matches!(
            ratio_rate(&ev(-1.0, 0.0, 0.0)),
            Err(LabError::DivisionByZero(_))
        ));
    }

    #[test]
    fn round_point_blows_up_like_one_over_one_minus_two_t() {
        let traj = integrate_eigenvalues(ev(1.0, 1.0, 1.0), 0.25, 1e-5, EIGEN_CAP).unwrap();
        let (t, m) = traj.last().unwrap();
        assert_eq!(*t, 0.25);
        for v in m.as_array() {
            assert!((v - 2.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn cylinder_point_keeps_zeros() {
        let traj = integrate_eigenvalues(ev(0.0, 0.0, 1.0), 0.5, 1e-4, EIGEN_CAP).unwrap();
        let (t, m) = traj.last().unwrap();
        assert_eq!(m.m1(), 0.0);
        assert_eq!(m.m2(), 0.0);
        assert!((m.m3() - 1.0 / (1.0 - t)).abs() < 1e-9);
    }

    #[test]
    fn ratio_non_decreasing_from_1_2_3() {
        let traj = integrate_eigenvalues(ev(1.0, 2.0, 3.0), 1.0, 1e-4, 1e6).unwrap();
        let ratios: Vec<f64> = traj.iter().map(|(_, m)| m.pinching_ratio().unwrap()).collect();
        assert!(ratios.windows(2).all(|w| w[1] >= w[0] - 1e-14));
        assert!(traj.last().unwrap().1.m3() > 1e6);
    }

    #[test]
    fn oversized_step_is_rejected() {
        // A large step overshoots near blow-up and scrambles the ordering.
        let r = integrate_eigenvalues(ev(-3.0, 0.5, 1.0), 2.0, 0.9, EIGEN_CAP);
        assert!(matches!(r, Err(LabError::StepTooLarge { .. })), "{r:?}");
    }

    #[test]
    fn cone_examples() {
        let z = PinchingCone::new(1.0, 0.5).unwrap();
        assert_eq!(in_cone(&ev(1.0, 1.0, 1.0), &z), ConeMembership::Inside);
        assert_eq!(in_cone(&ev(0.0, 0.0, 1.0), &z), ConeMembership::Outside);
        let z = PinchingCone::new(3.0, 1.0).unwrap();
        assert_eq!(in_cone(&ev(1.0, 2.0, 3.0), &z), ConeMembership::Inside);
        assert_eq!(in_cone(&ev(-1.0, -1.0, 0.0), &z), ConeMembership::Degenerate);
    }

    #[test]
    fn convexity_examples() {
        let z = PinchingCone::new(1.0, 0.5).unwrap();
        let t0 = SymmetricOperator::diag(0.0, 1.0, 1.0);
        let t1 = SymmetricOperator::diag(1.0, 1.0, 0.0);
        let mid = t0.blend(&t1, 0.5).eigenvalues();
        assert_eq!(mid.as_array(), [0.5, 0.5, 1.0]);
        assert!(cone_convexity_witness(&t0, &t1, &z, 0.5));
        assert!(cone_convexity_witness(&t0, &t0, &z, 0.3));
    }

    #[test]
    fn trig_eigenvalues_match_rotated_diagonal() {
        let (c, s) = (0.6_f64, 0.8_f64);
        let r = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let a = SymmetricOperator::diag(-1.0, 2.0, 5.0).conjugated(&r);
        let e = a.eigenvalues().as_array();
        for (got, want) in e.iter().zip([-1.0, 2.0, 5.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let m = [[1.0, 2.0, 0.0], [2.0 + 1e-6, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(SymmetricOperator::from_matrix(m).is_err());
        let m = [[1.0, 2.0, 0.0], [2.0 + 1e-14, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(SymmetricOperator::from_matrix(m).is_ok());
    }

    #[test]
    fn pinching_gap_examples() {
        let p = PinchingGapParams::new(1.0, 0.5).unwrap();
        assert!(pinching_gap_holds(&ev(1.0, 1.0, 1.0), &p).unwrap());
        assert!(pinching_gap_holds(&ev(0.0, 0.0, 1.0), &p).unwrap());
        assert!(!pinching_gap_holds(&ev(0.0, 0.0, 4.0), &p).unwrap());
        assert!(pinching_gap_holds(&ev(-1.0, 0.0, 1.0), &p).is_err());
    }

    #[test]
    fn bridges() {
        assert_eq!(eigenvalues_from_sectional(1.0, 1.0).as_array(), [1.0, 1.0, 1.0]);
        assert_eq!(eigenvalues_from_sectional(0.0, 1.0).as_array(), [0.0, 0.0, 1.0]);
        assert_eq!(eigenvalues_from_sectional(-0.5, 2.0).as_array(), [-0.5, -0.5, 2.0]);
        assert_eq!(eigenvalues_from_ricci(2.0, 2.0, 2.0).as_array(), [1.0, 1.0, 1.0]);
        assert_eq!(eigenvalues_from_ricci(2.0, 2.0, 0.0).as_array(), [0.0, 0.0, 2.0]);
        let eps = 0.25;
        let m = eigenvalues_from_ricci(2.0 * (2.0 - eps), 2.0 * (2.0 - eps), 2.0 * eps);
        assert_eq!(m.as_array(), [eps, eps, 4.0 - 3.0 * eps]);
    }

    #[test]
    fn trajectory_csv_header() {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[(0.0, ev(1.0, 1.0, 1.0))]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t,m1,m2,m3,ratio\n0,1,1,1,2\n");
    }
}
