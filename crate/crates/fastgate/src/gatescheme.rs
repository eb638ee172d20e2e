//! FRAG pulse schedules, RF phase locking and finite repetition-rate
//! expansion into individual kicks.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Relative group sizes of the FRAG sequence.
pub const FRAG_PATTERN: [i64; 6] = [-1, 2, -2, 2, -2, 1];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("invalid timing: {0}")]
    InvalidTiming(String),
    #[error("kick groups at tau = {first} and tau = {second} overlap at repetition rate {rate}")]
    GroupOverlap { first: f64, second: f64, rate: f64 },
}

/// A momentum impulse of `count` unit kicks (signed) at time `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub time: f64,
    pub count: f64,
}

/// Impulses together with the RF phase at `tau = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseSequence {
    pub impulses: Vec<Impulse>,
    pub phi_rf: f64,
}

impl ImpulseSequence {
    pub fn empty(phi_rf: f64) -> Self {
        ImpulseSequence {
            impulses: Vec::new(),
            phi_rf,
        }
    }

    /// RF phase at time `tau` for a trap with COM exponent `beta`.
    pub fn rf_phase_at(&self, tau: f64, beta: f64) -> f64 {
        4.0 * PI * tau / beta + self.phi_rf
    }

    /// Impulses ordered by time (stable for equal times).
    pub fn sorted(&self) -> Vec<Impulse> {
        let mut v = self.impulses.clone();
        v.sort_by(|a, b| a.time.total_cmp(&b.time));
        v
    }

    pub fn start(&self) -> f64 {
        self.impulses.iter().map(|k| k.time).fold(f64::INFINITY, f64::min)
    }

    pub fn end(&self) -> f64 {
        self.impulses.iter().map(|k| k.time).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Six antisymmetric groups of counter-propagating pulse pairs.
///
/// Times are in COM secular periods about the gate centre. `phi_rf` is the
/// RF drive phase at the gate centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    /// `(tau_1, tau_2, tau_3)`; groups sit at `(-tau_1, -tau_2, -tau_3, tau_3, tau_2, tau_1)`.
    pub tau: [f64; 3],
    pub scale_n: u32,
    pub phi_rf: f64,
}

impl PulseSchedule {
    pub fn group_times(&self) -> [f64; 6] {
        let [t1, t2, t3] = self.tau;
        [-t1, -t2, -t3, t3, t2, t1]
    }

    pub fn group_counts(&self) -> [i64; 6] {
        FRAG_PATTERN.map(|z| z * self.scale_n as i64)
    }

    /// Total gate duration `2 max tau_i`.
    pub fn gate_time(&self) -> f64 {
        2.0 * self.tau.iter().fold(0.0f64, |m, &t| m.max(t))
    }

    pub fn sequence(&self) -> ImpulseSequence {
        ImpulseSequence {
            impulses: self
                .group_times()
                .iter()
                .zip(self.group_counts())
                .map(|(&time, z)| Impulse {
                    time,
                    count: z as f64,
                })
                .collect(),
            phi_rf: self.phi_rf,
        }
    }
}

/// Build a FRAG schedule.
pub fn frag_schedule(tau: [f64; 3], n: u32, phi_rf: f64) -> Result<PulseSchedule, GateError> {
    if n == 0 {
        return Err(GateError::InvalidTiming("n must be positive".into()));
    }
    if let Some(t) = tau.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(GateError::InvalidTiming(format!("group time {t} must be positive and finite")));
    }
    if !phi_rf.is_finite() {
        return Err(GateError::InvalidTiming("RF phase must be finite".into()));
    }
    Ok(PulseSchedule {
        tau,
        scale_n: n,
        phi_rf,
    })
}

/// Snap a non-negative time to the lattice `m beta / 2`, never to zero.
pub fn snap_to_lattice(tau: f64, beta: f64) -> f64 {
    let period = 0.5 * beta;
    let m = (tau / period).round().max(1.0);
    m * period
}

/// Lock the schedule to the RF drive: the gate centre is placed at RF phase
/// pi and every group time is moved to the nearest instant where the RF
/// phase is again pi. Returns the locked schedule and the largest shift.
pub fn phase_lock(schedule: &PulseSchedule, beta: f64) -> (PulseSchedule, f64) {
    let mut out = *schedule;
    out.phi_rf = PI;
    let mut max_shift: f64 = 0.0;
    for t in out.tau.iter_mut() {
        let snapped = snap_to_lattice(*t, beta);
        max_shift = max_shift.max((snapped - *t).abs());
        *t = snapped;
    }
    (out, max_shift)
}

/// Individual unit kicks at a finite repetition rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KickTrain {
    /// Time-ordered `(time, sign)` kicks.
    pub kicks: Vec<(f64, i8)>,
    /// Kicks per secular period.
    pub repetition_rate: f64,
    pub phi_rf: f64,
}

impl KickTrain {
    pub fn sequence(&self) -> ImpulseSequence {
        ImpulseSequence {
            impulses: self
                .kicks
                .iter()
                .map(|&(time, s)| Impulse {
                    time,
                    count: s as f64,
                })
                .collect(),
            phi_rf: self.phi_rf,
        }
    }

    /// Time between the first and last kick.
    pub fn footprint(&self) -> f64 {
        match (self.kicks.first(), self.kicks.last()) {
            (Some(a), Some(b)) => b.0 - a.0,
            _ => 0.0,
        }
    }
}

/// Spread each group into `|z|` consecutive kicks at spacing `1 / rate`,
/// centred on the group time. An infinite rate keeps each group's kicks
/// coincident.
pub fn expand_finite_rep(schedule: &PulseSchedule, rate: f64) -> Result<KickTrain, GateError> {
    if !(rate > 0.0) {
        return Err(GateError::InvalidTiming(format!("repetition rate {rate} must be positive")));
    }
    let spacing = 1.0 / rate;
    let mut groups: Vec<(f64, i64)> = schedule
        .group_times()
        .iter()
        .copied()
        .zip(schedule.group_counts())
        .collect();
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = |z: i64| 0.5 * (z.unsigned_abs() as f64 - 1.0) * spacing;
    for w in groups.windows(2) {
        let (ta, za) = w[0];
        let (tb, zb) = w[1];
        let gap = (tb - half(zb)) - (ta + half(za));
        if gap < spacing * (1.0 - 1e-9) {
            return Err(GateError::GroupOverlap {
                first: ta,
                second: tb,
                rate,
            });
        }
    }
    let mut kicks = Vec::new();
    for (t, z) in groups {
        let count = z.unsigned_abs();
        let sign = z.signum() as i8;
        for m in 0..count {
            let offset = if rate.is_infinite() {
                0.0
            } else {
                (m as f64 - 0.5 * (count as f64 - 1.0)) * spacing
            };
            kicks.push((t + offset, sign));
        }
    }
    Ok(KickTrain {
        kicks,
        repetition_rate: rate,
        phi_rf: schedule.phi_rf,
    })
}
