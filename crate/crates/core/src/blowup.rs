//! Blow-up analysis: running-max events, parabolic rescaling, noncollapsing
//! ratio, limit classification and the energy dichotomy.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{domain, LabError, Result};
use crate::homogeneous::HomogeneousMetric;
use crate::observables::{integrate_dv, FlowObservables};
use crate::warped::{derive_geometry, WarpedProfile};

/// Default ratio between consecutive event rungs.
pub const DEFAULT_EVENT_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupEvent<S = ()> {
    pub t: f64,
    pub node: usize,
    pub q: f64,
    #[serde(skip)]
    pub snapshot: S,
}

/// Incremental form of [`track_running_max`].
///
/// The first sample opens an event. Later samples open one whenever the
/// running max reaches the next rung `q0 * factor^k`. [`RunningMax::finish`]
/// appends the global max if it lies above the last rung event.
#[derive(Debug, Clone)]
pub struct RunningMax<S> {
    factor: f64,
    next_rung: f64,
    events: Vec<BlowupEvent<S>>,
    best: Option<BlowupEvent<S>>,
}

impl<S: Clone> RunningMax<S> {
    pub fn new(factor: f64) -> Result<Self> {
        if !(factor > 1.0) {
            return Err(domain(format!("event factor must be > 1 (got {factor})")));
        }
        Ok(Self {
            factor,
            next_rung: f64::NAN,
            events: Vec::new(),
            best: None,
        })
    }

    /// Feeds one sample. `snap` is only called when the sample is a new max.
    pub fn observe(&mut self, t: f64, node: usize, q: f64, snap: impl FnOnce() -> S) {
        let is_max = self.best.as_ref().is_none_or(|b| q > b.q);
        if !is_max {
            return;
        }
        let ev = BlowupEvent {
            t,
            node,
            q,
            snapshot: snap(),
        };
        if self.events.is_empty() {
            self.next_rung = q * self.factor;
            self.events.push(ev.clone());
        } else if q >= self.next_rung {
            while self.next_rung <= q {
                self.next_rung *= self.factor;
            }
            self.events.push(ev.clone());
        }
        self.best = Some(ev);
    }

    pub fn events(&self) -> &[BlowupEvent<S>] {
        &self.events
    }

    pub fn finish(mut self) -> Vec<BlowupEvent<S>> {
        if let (Some(best), Some(last)) = (self.best, self.events.last()) {
            if best.q > last.q {
                self.events.push(best);
            }
        }
        self.events
    }
}

/// Events from a `(time, node, sup|Rm|)` history.
pub fn track_running_max(history: &[(f64, usize, f64)], factor: f64) -> Result<Vec<BlowupEvent>> {
    let mut rm = RunningMax::new(factor)?;
    for &(t, node, q) in history {
        rm.observe(t, node, q, || ());
    }
    Ok(rm.finish())
}

/// `g -> q g` with the time origin moved to the snapshot.
pub fn rescale(p: &WarpedProfile, q: f64) -> Result<WarpedProfile> {
    if !(q > 0.0) {
        return Err(domain(format!("q must be > 0 (got {q})")));
    }
    let mut out = p.scaled(q);
    out.time = 0.0;
    Ok(out)
}

/// `Vol({|s - s_node| <= r}) / r^3`.
///
/// The tube volume integrates `4 pi psi^2 ds` with `psi` linear in `s` on
/// each cell, so a window ending inside a cell is handled exactly for
/// piecewise-linear `psi`.
pub fn kappa_ratio(p: &WarpedProfile, node: usize, r: f64) -> Result<f64> {
    let s = p.arclength();
    let total = s[s.len() - 1];
    if !(r > 0.0 && r <= 0.5 * total) || node >= p.len() {
        return Err(LabError::WindowOutOfRange { r, max: 0.5 * total });
    }
    let (lo, hi) = (s[node] - r, s[node] + r);
    let mut vol = 0.0;
    for j in 0..p.len() - 1 {
        let (a, b) = (s[j].max(lo), s[j + 1].min(hi));
        if b <= a {
            continue;
        }
        let ds = s[j + 1] - s[j];
        let at = |x: f64| p.psi[j] + (p.psi[j + 1] - p.psi[j]) * (x - s[j]) / ds;
        let (pa, pb) = (at(a), at(b));
        vol += (b - a) * (pa * pa + pa * pb + pb * pb) / 3.0;
    }
    Ok(4.0 * PI * vol / (r * r * r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeckDetectorConfig {
    pub epsilon: f64,
    /// Required neck length in units of `2 psi_bar / epsilon`.
    pub min_neck_multiples: f64,
}

impl NeckDetectorConfig {
    pub fn new(epsilon: f64, min_neck_multiples: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(domain(format!("epsilon must lie in (0, 0.5) (got {epsilon})")));
        }
        if !(min_neck_multiples >= 2.0) {
            return Err(domain(format!(
                "min_neck_multiples must be >= 2 (got {min_neck_multiples})"
            )));
        }
        Ok(Self {
            epsilon,
            min_neck_multiples,
        })
    }
}

impl Default for NeckDetectorConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            min_neck_multiples: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Round,
    Neck,
    Cap,
    Unknown,
}

/// Maximal run of nodes with `|psi_s| <= eps` and `|k1 / k2| <= eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeckInterval {
    pub start: usize,
    pub end: usize,
    pub length: f64,
    /// Arclength mean of `psi` (the node value for a single-node run).
    pub mean_psi: f64,
    /// `length / (2 mean_psi / eps)`.
    pub multiples: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyResult {
    pub classification: Classification,
    pub argmax: usize,
    /// `(m1 + m2) / m3` at the argmax node.
    pub ratio_at_argmax: f64,
    pub min_ratio: f64,
    /// `diameter * sqrt(R_max / 6)`, equal to `pi` for a round sphere.
    pub scaled_diameter: f64,
    /// Neck run through the argmax node, qualifying or not.
    pub neck: Option<NeckInterval>,
}

fn neck_runs(p: &WarpedProfile, cfg: &NeckDetectorConfig) -> Result<Vec<NeckInterval>> {
    let geo = derive_geometry(p)?;
    let s = p.arclength();
    let eps = cfg.epsilon;
    let ok: Vec<bool> = (0..p.len())
        .map(|j| geo.psi_s[j].abs() <= eps && geo.k2[j] != 0.0 && (geo.k1[j] / geo.k2[j]).abs() <= eps)
        .collect();
    let mut runs = Vec::new();
    let mut j = 0;
    while j < p.len() {
        if !ok[j] {
            j += 1;
            continue;
        }
        let start = j;
        while j + 1 < p.len() && ok[j + 1] {
            j += 1;
        }
        let end = j;
        let length = s[end] - s[start];
        let mean_psi = if end > start {
            (start..end)
                .map(|k| 0.5 * (p.psi[k] + p.psi[k + 1]) * (s[k + 1] - s[k]))
                .sum::<f64>()
                / length
        } else {
            p.psi[start]
        };
        runs.push(NeckInterval {
            start,
            end,
            length,
            mean_psi,
            multiples: length * eps / (2.0 * mean_psi),
        });
        j += 1;
    }
    Ok(runs)
}

/// Classifies a (rescaled) profile. All criteria are scale invariant.
///
/// * Round: `min (m1 + m2) / m3 >= 2 - eps` and `|diameter sqrt(R_max / 6) - pi| <= eps`.
/// * Neck: a neck run of length `>= min_neck_multiples * 2 psi_bar / eps`
///   contains a node with `|Rm| >= (1 - eps) sup|Rm|`.
/// * Cap: such a neck exists, the near-max nodes lie outside it and the
///   ratio stays nonnegative between the argmax node and the neck.
pub fn classify(p: &WarpedProfile, cfg: &NeckDetectorConfig) -> Result<ClassifyResult> {
    let geo = derive_geometry(p)?;
    let eps = cfg.epsilon;
    let ratio = |j: usize| geo.eigenvalues(j).pinching_ratio().unwrap_or(f64::NEG_INFINITY);
    let min_ratio = (1..=p.n).map(ratio).fold(f64::INFINITY, f64::min);
    let r_max = geo.r_scalar.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let scaled_diameter = p.diameter() * (r_max.max(0.0) / 6.0).sqrt();
    let argmax = geo.argmax_rm();
    let sup = geo.sup_rm();
    let near_max = |j: usize| geo.k1[j].abs().max(geo.k2[j].abs()) >= (1.0 - eps) * sup;

    let runs = neck_runs(p, cfg)?;
    let neck = runs.iter().find(|r| r.start <= argmax && argmax <= r.end).copied();
    let qualifies = |r: &NeckInterval| r.multiples >= cfg.min_neck_multiples;

    let classification = if min_ratio >= 2.0 - eps && (scaled_diameter - PI).abs() <= eps {
        Classification::Round
    } else if runs.iter().any(|r| qualifies(r) && (r.start..=r.end).any(near_max)) {
        Classification::Neck
    } else if runs.iter().filter(|r| qualifies(r)).any(|r| {
        let (a, b) = if argmax < r.start { (argmax, r.start) } else { (r.end, argmax) };
        (a..=b).all(|j| ratio(j) >= 0.0)
    }) {
        Classification::Cap
    } else {
        Classification::Unknown
    };
    Ok(ClassifyResult {
        classification,
        argmax,
        ratio_at_argmax: ratio(argmax),
        min_ratio,
        scaled_diameter,
        neck,
    })
}

/// Homogeneous metrics are spatially constant: Round iff the pinching ratio
/// is at least `2 - eps`.
pub fn classify_homogeneous(m: &HomogeneousMetric, cfg: &NeckDetectorConfig) -> ClassifyResult {
    let ratio = m.eigenvalues().pinching_ratio().unwrap_or(f64::NEG_INFINITY);
    let classification = if ratio >= 2.0 - cfg.epsilon {
        Classification::Round
    } else {
        Classification::Unknown
    };
    ClassifyResult {
        classification,
        argmax: 0,
        ratio_at_argmax: ratio,
        min_ratio: ratio,
        scaled_diameter: f64::NAN,
        neck: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEnergyCheck {
    /// `Vol`.
    pub lhs: f64,
    /// `(||R||_{3/2} / 6)^{3/2}`.
    pub rhs: f64,
    pub holds: bool,
}

const NORMALIZED_TOL: f64 = 1e-9;

fn volume_energy(vol: f64, energy: f64) -> VolumeEnergyCheck {
    let rhs = (energy.powf(2.0 / 3.0) / 6.0).powf(1.5);
    VolumeEnergyCheck {
        lhs: vol,
        rhs,
        holds: vol >= rhs * (1.0 - 1e-12),
    }
}

/// `Vol >= (||R||_{3/2} / 6)^{3/2}` for a profile with `sup|Rm| <= 1`.
pub fn volume_energy_check(p: &WarpedProfile) -> Result<VolumeEnergyCheck> {
    let geo = derive_geometry(p)?;
    let sup = geo.sup_rm();
    if sup > 1.0 + NORMALIZED_TOL {
        return Err(LabError::NotNormalized(sup));
    }
    let vol = integrate_dv(p, |_| 1.0);
    let energy = integrate_dv(p, |j| geo.r_scalar[j].abs().powf(1.5));
    Ok(volume_energy(vol, energy))
}

pub fn volume_energy_check_homogeneous(m: &HomogeneousMetric) -> Result<VolumeEnergyCheck> {
    let sup = m.sup_rm();
    if sup > 1.0 + NORMALIZED_TOL {
        return Err(LabError::NotNormalized(sup));
    }
    Ok(volume_energy(m.volume(), m.energy()))
}

/// `int |R|^{3/2} dV` over the nodes `start..=end`.
pub fn neck_energy(p: &WarpedProfile, start: usize, end: usize) -> Result<f64> {
    if start > end || end >= p.len() {
        return Err(domain(format!("bad interval {start}..={end}")));
    }
    let geo = derive_geometry(p)?;
    let h = p.h();
    let dens = |j: usize| geo.r_scalar[j].abs().powf(1.5) * 4.0 * PI * p.psi[j] * p.psi[j] * p.phi[j];
    Ok((start..end).map(|j| 0.5 * h * (dens(j) + dens(j + 1))).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ConsistentRound,
    ConsistentNeck,
    Inconsistent,
    Inconclusive,
}

impl Verdict {
    pub fn from_parts(energy_bounded: bool, c: Classification) -> Self {
        use Classification::*;
        match (energy_bounded, c) {
            (true, Round) => Verdict::ConsistentRound,
            (false, Neck | Cap) => Verdict::ConsistentNeck,
            (true, Neck) | (false, Round) => Verdict::Inconsistent,
            _ => Verdict::Inconclusive,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::ConsistentRound | Verdict::ConsistentNeck => 0,
            Verdict::Inconsistent => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub events: Vec<BlowupEvent>,
    pub classification: Classification,
    pub energy_bounded: bool,
    pub verdict: Verdict,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_energy: f64,
    pub energy_ceiling: f64,
    pub final_q: f64,
    pub ratio_at_argmax: f64,
    pub min_ratio: f64,
    pub neck: Option<NeckInterval>,
}

/// Assembles the report. `energy_bounded` means the energy never exceeded
/// `ceiling_factor` times its initial value.
pub fn dichotomy_report<S>(
    events: &[BlowupEvent<S>],
    class: &ClassifyResult,
    history: &[FlowObservables],
    ceiling_factor: f64,
) -> Result<BlowupReport> {
    let (first, last) = match (history.first(), history.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(domain("empty history")),
    };
    let max_energy = history.iter().fold(f64::NEG_INFINITY, |m, o| m.max(o.energy));
    let ceiling = ceiling_factor * first.energy;
    let energy_bounded = max_energy <= ceiling;
    Ok(BlowupReport {
        events: events
            .iter()
            .map(|e| BlowupEvent {
                t: e.t,
                node: e.node,
                q: e.q,
                snapshot: (),
            })
            .collect(),
        classification: class.classification,
        energy_bounded,
        verdict: Verdict::from_parts(energy_bounded, class.classification),
        initial_energy: first.energy,
        final_energy: last.energy,
        max_energy,
        energy_ceiling: ceiling,
        final_q: events.last().map_or(f64::NAN, |e| e.q),
        ratio_at_argmax: class.ratio_at_argmax,
        min_ratio: class.min_ratio,
        neck: class.neck,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warped::make_round;

    #[test]
    fn constant_history_gives_one_event() {
        let h: Vec<_> = (0..10).map(|k| (k as f64, 3, 1.0)).collect();
        let ev = track_running_max(&h, 2.0).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].t, ev[0].node), (0.0, 3));
    }

    #[test]
    fn rungs_double_and_final_is_global_max() {
        let h: Vec<_> = (0..100).map(|k| (k as f64, 0, 1.0 + k as f64 * 0.1)).collect();
        let ev = track_running_max(&h, 2.0).unwrap();
        let qs: Vec<f64> = ev.iter().map(|e| e.q).collect();
        assert!(qs.windows(2).all(|w| w[1] > w[0]));
        assert!((qs[1] - 2.0).abs() < 1e-12 && (qs[2] - 4.0).abs() < 1e-12);
        assert_eq!(*qs.last().unwrap(), 1.0 + 99.0 * 0.1);
    }

    #[test]
    fn rescale_round() {
        let p = make_round(1.0, 64).unwrap();
        assert_eq!(rescale(&p, 1.0).unwrap(), p);
        let q = rescale(&p, 4.0).unwrap();
        assert_eq!(q, make_round(2.0, 64).unwrap());
        assert!(rescale(&p, 0.0).is_err());
    }

    #[test]
    fn kappa_window_range() {
        let p = make_round(1.0, 100).unwrap();
        assert!(matches!(kappa_ratio(&p, 50, 2.0), Err(LabError::WindowOutOfRange { .. })));
        assert!(kappa_ratio(&p, 50, 0.0).is_err());
        // Small ball at a pole: Euclidean ratio 4 pi / 3, up to the chord error
        // of the linear interpolant of psi in the first cell.
        let k = kappa_ratio(&p, 0, 0.01).unwrap();
        assert!((k / (4.0 * PI / 3.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn verdict_table() {
        use Classification::*;
        assert_eq!(Verdict::from_parts(true, Round), Verdict::ConsistentRound);
        assert_eq!(Verdict::from_parts(false, Neck), Verdict::ConsistentNeck);
        assert_eq!(Verdict::from_parts(false, Cap), Verdict::ConsistentNeck);
        assert_eq!(Verdict::from_parts(true, Neck), Verdict::Inconsistent);
        assert_eq!(Verdict::from_parts(false, Round), Verdict::Inconsistent);
        assert_eq!(Verdict::from_parts(true, Cap), Verdict::Inconclusive);
        assert_eq!(Verdict::from_parts(true, Unknown), Verdict::Inconclusive);
        assert_eq!(Verdict::from_parts(false, Unknown), Verdict::Inconclusive);
        assert_eq!(Verdict::Inconsistent.exit_code(), 2);
        assert_eq!(Verdict::Inconclusive.exit_code(), 3);
    }

    #[test]
    fn detector_config_domain() {
        assert!(NeckDetectorConfig::new(0.5, 2.0).is_err());
        assert!(NeckDetectorConfig::new(0.1, 1.5).is_err());
        assert!(NeckDetectorConfig::new(0.1, 2.0).is_ok());
    }
}
