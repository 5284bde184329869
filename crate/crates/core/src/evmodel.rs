//! Three-phase EV charging as an allocation instance.
//!
//! The charger draws `z_{j,p}` watts on phase `p` during interval `j`, on top
//! of a household baseload `q_{j,p}`. The schedule minimizes
//!
//! ```text
//!     sum_j W1 * (sum_p (q + z)_{j,p})^2 + W2 * unbalance(q_j, z_j)
//! ```
//!
//! subject to the required energy, per-phase power bounds and per-interval
//! total power bounds. Expanding the squares gives an instance with one
//! subset per interval and three variables per subset; the parts that only
//! depend on `q` are returned separately as a constant.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;

pub const PHASES: usize = 3;

/// Phase angles of the three-phase phasors.
pub const PHASE_ANGLES: [f64; PHASES] = [11.0 * PI / 6.0, 7.0 * PI / 6.0, PI / 2.0];

/// A per-phase power bound: one value for everything, one per interval
/// (same on all phases), or one per interval and phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseBound {
    Scalar(f64),
    PerInterval(Vec<f64>),
    PerPhase(Vec<[f64; PHASES]>),
}

impl PhaseBound {
    fn at(&self, j: usize, p: usize) -> f64 {
        match self {
            PhaseBound::Scalar(v) => *v,
            PhaseBound::PerInterval(v) => v[j],
            PhaseBound::PerPhase(v) => v[j][p],
        }
    }

    fn check(&self, m: usize, name: &str) -> Result<()> {
        let len = match self {
            PhaseBound::Scalar(_) => return Ok(()),
            PhaseBound::PerInterval(v) => v.len(),
            PhaseBound::PerPhase(v) => v.len(),
        };
        if len != m {
            return Err(Error::Scenario(format!("{name} has {len} intervals, expected {m}")));
        }
        Ok(())
    }
}

/// A per-interval total power bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntervalBound {
    Scalar(f64),
    PerInterval(Vec<f64>),
}

impl IntervalBound {
    fn at(&self, j: usize) -> f64 {
        match self {
            IntervalBound::Scalar(v) => *v,
            IntervalBound::PerInterval(v) => v[j],
        }
    }

    fn check(&self, m: usize, name: &str) -> Result<()> {
        match self {
            IntervalBound::PerInterval(v) if v.len() != m => Err(Error::Scenario(format!(
                "{name} has {} intervals, expected {m}",
                v.len()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvScenario {
    pub m: usize,
    pub dt_hours: f64,
    /// Baseload per interval and phase (W).
    pub q: Vec<[f64; PHASES]>,
    #[serde(rename = "W1")]
    pub w1: f64,
    #[serde(rename = "W2")]
    pub w2: f64,
    /// Energy to charge (Wh).
    #[serde(rename = "R_wh")]
    pub energy_wh: f64,
    pub l_phase: PhaseBound,
    pub u_phase: PhaseBound,
    #[serde(rename = "L_total")]
    pub lower_total: IntervalBound,
    #[serde(rename = "U_total")]
    pub upper_total: IntervalBound,
}

#[derive(Debug, Clone)]
pub struct EvInstance {
    pub instance: Instance,
    /// Objective terms that only depend on the baseload.
    pub constant: f64,
}

impl EvScenario {
    pub fn with_weights(&self, w1: f64, w2: f64) -> Self {
        EvScenario {
            w1,
            w2,
            ..self.clone()
        }
    }

    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Scenario(msg));
        if !(self.w1 > 0.0 && self.w2 > 0.0) {
            return fail(format!("weights must be positive, got W1 = {}, W2 = {}", self.w1, self.w2));
        }
        if self.dt_hours.is_nan() || self.dt_hours <= 0.0 {
            return fail(format!("dt_hours must be positive, got {}", self.dt_hours));
        }
        if self.m == 0 {
            return fail("m must be at least 1".into());
        }
        if self.q.len() != self.m {
            return fail(format!("q has {} rows, expected {}", self.q.len(), self.m));
        }
        if !self.energy_wh.is_finite() {
            return fail("R_wh must be finite".into());
        }
        self.l_phase.check(self.m, "l_phase")?;
        self.u_phase.check(self.m, "u_phase")?;
        self.lower_total.check(self.m, "L_total")?;
        self.upper_total.check(self.m, "U_total")
    }
}

pub fn build_instance(s: &EvScenario) -> Result<EvInstance> {
    s.check()?;
    let m = s.m;
    let n = PHASES * m;
    let w = 2.0 * s.w1 - s.w2;
    let a = 3.0 * s.w2;
    let mut b = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut constant = 0.0;
    for j in 0..m {
        let row = s.q[j];
        let total: f64 = row.iter().sum();
        let squares: f64 = row.iter().map(|v| v * v).sum();
        constant += (s.w1 - 0.5 * s.w2) * total * total + 1.5 * s.w2 * squares;
        for (p, &load) in row.iter().enumerate() {
            b.push(w * total + a * load);
            l.push(s.l_phase.at(j, p));
            u.push(s.u_phase.at(j, p));
        }
    }
    let instance = Instance::with_blocks(
        &vec![PHASES; m],
        vec![a; n],
        b,
        vec![w; m],
        l,
        u,
        (0..m).map(|j| s.lower_total.at(j)).collect(),
        (0..m).map(|j| s.upper_total.at(j)).collect(),
        s.energy_wh / s.dt_hours,
    )?;
    Ok(EvInstance { instance, constant })
}

/// Squared norm of the resultant phasor, via the sum-of-squares form.
pub fn unbalance(q: &[f64; PHASES], z: &[f64; PHASES]) -> f64 {
    let v: Vec<f64> = (0..PHASES).map(|p| q[p] + z[p]).collect();
    let total: f64 = v.iter().sum();
    1.5 * v.iter().map(|x| x * x).sum::<f64>() - 0.5 * total * total
}

/// Squared norm of the resultant phasor, computed directly.
pub fn unbalance_phasor(q: &[f64; PHASES], z: &[f64; PHASES]) -> f64 {
    let (re, im) = (0..PHASES).fold((0.0, 0.0), |(re, im), p| {
        let v = q[p] + z[p];
        (re + v * PHASE_ANGLES[p].cos(), im + v * PHASE_ANGLES[p].sin())
    });
    re * re + im * im
}

/// Full EV objective of a schedule `z` laid out interval-major.
pub fn ev_objective(s: &EvScenario, z: &[f64]) -> f64 {
    (0..s.m)
        .map(|j| {
            let zj = [z[PHASES * j], z[PHASES * j + 1], z[PHASES * j + 2]];
            let total: f64 = (0..PHASES).map(|p| s.q[j][p] + zj[p]).sum();
            s.w1 * total * total + s.w2 * unbalance(&s.q[j], &zj)
        })
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalReport {
    pub total: f64,
    pub unbalance: f64,
}

pub fn interval_report(s: &EvScenario, z: &[f64]) -> Vec<IntervalReport> {
    (0..s.m)
        .map(|j| {
            let zj = [z[PHASES * j], z[PHASES * j + 1], z[PHASES * j + 2]];
            IntervalReport {
                total: (0..PHASES).map(|p| s.q[j][p] + zj[p]).sum(),
                unbalance: unbalance(&s.q[j], &zj),
            }
        })
        .collect()
}

/// Intervals per day at the profile resolution of 15 minutes.
pub const INTERVALS_PER_DAY: usize = 96;

/// Synthetic household baseload, summed per phase, at 15-minute resolution
/// (`days * 96` rows, watts).
///
/// Each household gets a constant standby load of 80-250 W, a morning bump
/// around 07:00 of up to 800 W, an evening bump around 19:00 of up to 1.5 kW,
/// multiplicative noise, and occasional appliance runs of 1-3 kW lasting up
/// to an hour. Households are assigned to a uniformly random phase.
pub fn synth_profiles(households: usize, days: usize, seed: u64) -> Vec<[f64; PHASES]> {
    let len = days * INTERVALS_PER_DAY;
    let mut q = vec![[0.0; PHASES]; len];
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..households {
        let phase = rng.gen_range(0..PHASES);
        let standby = rng.gen_range(80.0..250.0);
        let morning = rng.gen_range(100.0..800.0);
        let evening = rng.gen_range(300.0..1500.0);
        let shift = rng.gen_range(-1.0..1.0);
        let mut appliance_left = 0usize;
        let mut appliance_power = 0.0;
        for (k, row) in q.iter_mut().enumerate() {
            let hour = (k % INTERVALS_PER_DAY) as f64 / 4.0;
            let bump = |centre: f64, width: f64| (-((hour - centre - shift) / width).powi(2)).exp();
            let shape = standby + morning * bump(7.0, 1.0) + evening * bump(19.0, 2.0);
            let noise = rng.gen_range(0.85..1.15);
            if appliance_left == 0 && rng.gen::<f64>() < 0.01 {
                appliance_left = rng.gen_range(1..=4);
                appliance_power = rng.gen_range(1000.0..3000.0);
            }
            let extra = if appliance_left > 0 {
                appliance_left -= 1;
                appliance_power
            } else {
                0.0
            };
            row[phase] += shape * noise + extra;
        }
    }
    q
}

/// Overnight charging scenario: 56 quarter-hours from 18:00, 160 kWh
/// required, 11.5 kW connection split evenly over the phases, phase power
/// may be shifted between phases down to -11.5/3 kW.
pub fn desk_scenario(households: usize, seed: u64, w1: f64, w2: f64) -> EvScenario {
    let m = 56;
    let start = 72;
    let q = synth_profiles(households, 2, seed)[start..start + m].to_vec();
    let cap = 11_500.0;
    EvScenario {
        m,
        dt_hours: 0.25,
        q,
        w1,
        w2,
        energy_wh: 160_000.0,
        l_phase: PhaseBound::Scalar(-cap / 3.0),
        u_phase: PhaseBound::Scalar(cap / 3.0),
        lower_total: IntervalBound::Scalar(0.0),
        upper_total: IntervalBound::Scalar(cap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;

    #[test]
    fn unit_weights_mapping() {
        let s = desk_scenario(0, 1, 1.0, 1.0);
        let ev = build_instance(&s).unwrap();
        assert!(ev.instance.w().iter().all(|&w| w == 1.0));
        assert!(ev.instance.a().iter().all(|&a| a == 3.0));
        assert_eq!(ev.instance.resource(), 640_000.0);
        assert_eq!(ev.instance.n(), 168);
        let report = model::validate(&ev.instance);
        assert!(report.ok, "{report:?}");
        assert!(report.convexity_margins.iter().all(|&g| (g - 2.0).abs() < 1e-12));
    }

    #[test]
    fn zero_baseload_gives_zero_linear_terms() {
        let s = desk_scenario(0, 1, 0.5, 1.0);
        let ev = build_instance(&s).unwrap();
        assert!(ev.instance.b().iter().all(|&b| b == 0.0));
        assert_eq!(ev.constant, 0.0);
    }

    #[test]
    fn unbalance_examples() {
        let zero = [0.0; 3];
        assert_eq!(unbalance(&[1.0, 0.0, 0.0], &zero), 1.0);
        assert_eq!(unbalance(&[1.0, 1.0, 0.0], &zero), 1.0);
        assert_eq!(unbalance(&[2.0, 2.0, 2.0], &zero), 0.0);
        assert!((unbalance_phasor(&[1.0, 0.0, 0.0], &zero) - 1.0).abs() < 1e-15);
        assert!((unbalance_phasor(&[1.0, 1.0, 0.0], &zero) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn profiles_are_deterministic_and_nonnegative() {
        assert!(synth_profiles(0, 1, 3).iter().flatten().all(|&v| v == 0.0));
        let p = synth_profiles(40, 1, 7);
        assert_eq!(p, synth_profiles(40, 1, 7));
        assert_eq!(p.len(), INTERVALS_PER_DAY);
        assert!(p.iter().flatten().all(|&v| v >= 0.0));
        assert_eq!(desk_scenario(40, 7, 1.0, 1.0).q.len(), 56);
    }

    #[test]
    fn scenario_json_keys() {
        let s = desk_scenario(2, 1, 1.0, 100.0);
        let v = serde_json::to_value(&s).unwrap();
        for key in ["m", "dt_hours", "q", "W1", "W2", "R_wh", "l_phase", "u_phase", "L_total", "U_total"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: EvScenario = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn bad_scenarios_are_rejected() {
        let s = desk_scenario(0, 1, 1.0, 1.0);
        assert!(build_instance(&s.with_weights(0.0, 1.0)).is_err());
        let mut short = s.clone();
        short.q.pop();
        assert!(build_instance(&short).is_err());
    }
}
