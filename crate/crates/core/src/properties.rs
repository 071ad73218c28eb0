//! Seeded randomized checks of the curvature-operator algebra.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curvature::{
    cone_convexity_witness, eigenvalue_rhs, eigenvalues_from_ricci, in_cone,
    integrate_eigenvalues_to_cap, ratio_rate, CurvatureEigenvalues, PinchingCone, SymmetricOperator,
    EIGEN_CAP,
};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub triples: usize,
    /// Max of `|(rhs_1 + rhs_2) - (m1^2 + m2^2 + m3 (m1 + m2))| / scale^2`.
    pub sum_identity_max_rel: f64,
    /// Max of `|rhs_3 - (m3^2 + m1 m2)| / scale^2`.
    pub third_rate_max_rel: f64,
    /// Max of `|ratio_rate m3 + ratio (m3^2 + m1 m2) - d(m1 + m2)/dt| / scale^2`.
    pub quotient_identity_max_rel: f64,
    pub ricci_roundtrip_max_rel: f64,
    pub pairs: usize,
    pub convexity_counterexamples: usize,
    pub trajectories: usize,
    pub cone_steps: usize,
    pub cone_violations: usize,
}

impl PropertyReport {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.sum_identity_max_rel <= rel_tol
            && self.third_rate_max_rel <= rel_tol
            && self.quotient_identity_max_rel <= rel_tol
            && self.ricci_roundtrip_max_rel <= rel_tol
            && self.convexity_counterexamples == 0
            && self.cone_violations == 0
    }
}

fn random_triple(rng: &mut ChaCha8Rng) -> CurvatureEigenvalues {
    let s: f64 = 10f64.powf(rng.random_range(-3.0..3.0));
    CurvatureEigenvalues::new(
        s * rng.random_range(-1.0..1.0),
        s * rng.random_range(-1.0..1.0),
        s * rng.random_range(-1.0..1.0),
    )
}

fn random_cone(rng: &mut ChaCha8Rng) -> PinchingCone {
    PinchingCone {
        c1: rng.random_range(0.05..2.0),
        c2: rng.random_range(0.05..1.9),
    }
}

/// Rejection sample of a member of `z` with entries of order one to ten.
fn random_member(rng: &mut ChaCha8Rng, z: &PinchingCone) -> CurvatureEigenvalues {
    loop {
        let m = CurvatureEigenvalues::new(
            rng.random_range(-2.0..10.0),
            rng.random_range(-2.0..10.0),
            rng.random_range(0.0..10.0),
        );
        if in_cone(&m, z).is_member() {
            return m;
        }
    }
}

/// Rotation matrix of a uniformly random unit quaternion.
fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let (w, x, y, z) = loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = v.iter().map(|a| a * a).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            break (v[0] / n, v[1] / n, v[2] / n, v[3] / n);
        }
    };
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Runs every randomized property with a fixed seed.
pub fn run_properties(seed: u64, triples: usize, pairs: usize, trajectories: usize) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut sum_rel = 0.0_f64;
    let mut third_rel = 0.0_f64;
    let mut quot_rel = 0.0_f64;
    let mut ricci_rel = 0.0_f64;
    for _ in 0..triples {
        let m = random_triple(&mut rng);
        let [a, b, c] = m.as_array();
        let scale = a.abs().max(b.abs()).max(c.abs());
        let s2 = scale * scale;
        let (d1, d2, d3) = eigenvalue_rhs(&m);
        let ds = a * a + b * b + c * (a + b);
        sum_rel = sum_rel.max(((d1 + d2) - ds).abs() / s2);
        third_rel = third_rel.max((d3 - (c * c + a * b)).abs() / s2);
        if c != 0.0 {
            let rebuilt = ratio_rate(&m)? * c + (a + b) / c * (c * c + a * b);
            quot_rel = quot_rel.max((rebuilt - ds).abs() / s2);
        }
        let [r1, r2, r3] = m.ricci();
        let back = eigenvalues_from_ricci(r1, r2, r3).as_array();
        for (x, y) in back.iter().zip(m.as_array()) {
            ricci_rel = ricci_rel.max((x - y).abs() / scale);
        }
    }

    let mut counter = 0;
    for _ in 0..pairs {
        let z = random_cone(&mut rng);
        let build = |rng: &mut ChaCha8Rng| {
            let m = random_member(rng, &z);
            let [a, b, c] = m.as_array();
            SymmetricOperator::diag(a, b, c).conjugated(&random_rotation(rng))
        };
        let t0 = build(&mut rng);
        let t1 = build(&mut rng);
        let lambda = rng.random_range(0.0..=1.0);
        let ends = in_cone(&t0.eigenvalues(), &z).is_member() && in_cone(&t1.eigenvalues(), &z).is_member();
        if ends && !cone_convexity_witness(&t0, &t1, &z, lambda) {
            counter += 1;
        }
    }

    let mut steps = 0;
    let mut violations = 0;
    for _ in 0..trajectories {
        let z = random_cone(&mut rng);
        let m0 = random_member(&mut rng, &z);
        let traj = integrate_eigenvalues_to_cap(m0, 0.01, EIGEN_CAP, 1_000_000)?;
        steps += traj.len();
        violations += traj.iter().filter(|(_, m)| !in_cone(m, &z).is_member()).count();
    }

    Ok(PropertyReport {
        seed,
        triples,
        sum_identity_max_rel: sum_rel,
        third_rate_max_rel: third_rel,
        quotient_identity_max_rel: quot_rel,
        ricci_roundtrip_max_rel: ricci_rel,
        pairs,
        convexity_counterexamples: counter,
        trajectories,
        cone_steps: steps,
        cone_violations: violations,
    })
}
