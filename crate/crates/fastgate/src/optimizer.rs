//! Multi-start local optimisation of FRAG pulse timings.
//!
//! Each local search is a projected Levenberg-Marquardt iteration on the
//! residual form of the quadratic infidelity, which copes far better with
//! the narrow valleys of this objective than a plain gradient method.
//! Starts come from a shifted Halton sequence and are reduced
//! deterministically, so results do not depend on the thread count.

use crate::fidelity::{GateModel, LaserConfig, ThermalState, DEFAULT_OCCUPATION};
use crate::gatescheme::{frag_schedule, GateError, PulseSchedule};
use crate::mathieu::{q_for_mu, MathieuError, MathieuParams};
use crate::trapmodel::{mode_spectrum, Trap, TrapError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::f64::consts::PI;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_STARTS: usize = 512;
pub const GRADIENT_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 500;
/// Smallest allowed group time, keeping groups off the gate centre.
pub const MIN_TAU: f64 = 1e-6;
/// Lattices up to this many points per axis are searched exhaustively.
pub const EXHAUSTIVE_LATTICE: usize = 160;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error(transparent)]
    Trap(#[from] TrapError),
    #[error(transparent)]
    Mathieu(#[from] MathieuError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("invalid optimisation config: {0}")]
    Config(String),
    #[error("RF lattice has no points inside the time bound {0}")]
    EmptyLattice(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMode {
    WithMicromotion,
    WithoutMicromotion,
}

/// How micromotion-aware schedules are tied to the RF drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockMode {
    /// Continuous times, every kick assumed to arrive at RF phase pi.
    Idealized,
    /// Times restricted to the instants where the RF phase is pi.
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    /// Upper bound on the gate time `2 max tau_i`, in secular periods.
    pub time_bound: f64,
    pub n: u32,
    pub starts: usize,
    pub seed: u64,
    pub mu_mode: MuMode,
    pub lock: LockMode,
    pub target_sign: i8,
    pub n_bar: f64,
}

impl OptimizationConfig {
    pub fn new(time_bound: f64, n: u32) -> Self {
        OptimizationConfig {
            time_bound,
            n,
            starts: DEFAULT_STARTS,
            seed: 1,
            mu_mode: MuMode::WithoutMicromotion,
            lock: LockMode::Idealized,
            target_sign: 1,
            n_bar: DEFAULT_OCCUPATION,
        }
    }

    fn validate(&self) -> Result<(), OptimizerError> {
        if !(self.time_bound > 2.0 * MIN_TAU) || !self.time_bound.is_finite() {
            return Err(OptimizerError::Config(format!(
                "time bound {} must be positive",
                self.time_bound
            )));
        }
        if self.starts == 0 {
            return Err(OptimizerError::Config("at least one start is needed".into()));
        }
        if self.n == 0 {
            return Err(OptimizerError::Config("n must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalOptimum {
    pub tau: [f64; 3],
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_schedule: PulseSchedule,
    /// Quadratic infidelity of the best schedule.
    pub infidelity: f64,
    pub achieved_gate_time: f64,
    pub starts_converged: usize,
    pub starts: usize,
    /// Per-mode enhancement factors used by the objective.
    pub mu: Vec<f64>,
    pub lock: LockMode,
}

fn clamp(x: f64, hi: f64) -> f64 {
    x.clamp(MIN_TAU, hi)
}

/// Projected Levenberg-Marquardt descent from `initial`.
pub fn local_search(
    initial: [f64; 3],
    model: &GateModel,
    n: u32,
    time_bound: f64,
    thermal: &ThermalState,
) -> LocalOptimum {
    let hi = 0.5 * time_bound;
    let mut x = initial.map(|v| clamp(v, hi));
    let mut cur = model.frag_residuals(x, n, thermal);
    let mut f = cur.objective();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut g = [0.0; 3];
        let mut h = [[0.0; 3]; 3];
        for (r, row) in cur.residuals.iter().zip(&cur.jacobian) {
            for i in 0..3 {
                g[i] += row[i] * r;
                for j in 0..3 {
                    h[i][j] += row[i] * row[j];
                }
            }
        }
        // gradient of the objective, with bound-active components dropped
        let mut pg = 0.0f64;
        for i in 0..3 {
            let gi = 2.0 * g[i];
            let blocked = (x[i] <= MIN_TAU && gi > 0.0) || (x[i] >= hi && gi < 0.0);
            if !blocked {
                pg += gi * gi;
            }
        }
        if pg.sqrt() < GRADIENT_TOL || f < 1e-30 {
            converged = true;
            break;
        }
        let mut improved = false;
        while lambda < 1e20 {
            let mut a = h;
            for i in 0..3 {
                a[i][i] += lambda * (h[i][i] + 1e-12);
            }
            let Some(step) = solve3(a, g.map(|v| -v)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [0, 1, 2].map(|i| clamp(x[i] + step[i], hi));
            if trial == x {
                break;
            }
            let next = model.frag_residuals(trial, n, thermal);
            let fn_ = next.objective();
            if fn_ < f {
                x = trial;
                cur = next;
                f = fn_;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // no descent direction left at working precision
            converged = true;
            break;
        }
    }
    LocalOptimum {
        tau: x,
        objective: f,
        converged,
        iterations,
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j]);
    let v = nalgebra::Vector3::from_column_slice(&b);
    let s = m.cholesky()?.solve(&v);
    if s.iter().all(|x| x.is_finite()) {
        Some([s[0], s[1], s[2]])
    } else {
        None
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Low-discrepancy starting points in `(0, time_bound / 2]^3`.
pub fn start_points(count: usize, time_bound: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let hi = 0.5 * time_bound;
    (0..count as u64)
        .map(|k| {
            let h = [
                radical_inverse(k + 1, 2),
                radical_inverse(k + 1, 3),
                radical_inverse(k + 1, 5),
            ];
            [0, 1, 2].map(|i| {
                let u = (h[i] + shift[i]).fract();
                clamp((1.0 - u) * hi, hi)
            })
        })
        .collect()
}

fn better(a: &LocalOptimum, b: &LocalOptimum) -> Ordering {
    a.objective
        .total_cmp(&b.objective)
        .then_with(|| {
            a.tau
                .iter()
                .zip(&b.tau)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
}

fn run_starts(
    starts: &[[f64; 3]],
    model: &GateModel,
    config: &OptimizationConfig,
    thermal: &ThermalState,
) -> Vec<LocalOptimum> {
    let job = |s: &[f64; 3]| local_search(*s, model, config.n, config.time_bound, thermal);
    #[cfg(feature = "parallel")]
    {
        starts.par_iter().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        starts.iter().map(job).collect()
    }
}

/// Multi-start optimisation of a given closed-form model with continuous
/// times. `warm` adds extra starting points ahead of the generated ones.
pub fn optimize_model(
    model: &GateModel,
    config: &OptimizationConfig,
    warm: &[[f64; 3]],
) -> Result<OptimizationResult, OptimizerError> {
    config.validate()?;
    let thermal = ThermalState::uniform(config.n_bar, model.terms.len());
    let mut starts: Vec<[f64; 3]> = warm
        .iter()
        .filter(|w| 2.0 * w.iter().fold(0.0f64, |m, &t| m.max(t)) <= config.time_bound)
        .copied()
        .collect();
    starts.extend(start_points(config.starts, config.time_bound, config.seed));
    let results = run_starts(&starts, model, config, &thermal);
    let converged = results.iter().filter(|r| r.converged).count();
    let best = results.iter().min_by(|a, b| better(a, b)).expect("at least one start");
    let schedule = frag_schedule(best.tau, config.n, PI)?;
    Ok(OptimizationResult {
        best_schedule: schedule,
        infidelity: best.objective,
        achieved_gate_time: schedule.gate_time(),
        starts_converged: converged,
        starts: starts.len(),
        mu: model.terms.iter().map(|t| t.mu).collect(),
        lock: LockMode::Idealized,
    })
}

fn lattice_time(m: usize, family: usize, period: f64) -> f64 {
    (m as f64 + 0.5 * family as f64) * period
}

/// Best schedule with every kick at RF phase pi. Two lattices qualify:
/// integer multiples of the RF period `beta / 2` about a gate centre at
/// phase pi, and half-integer multiples about a centre at phase 0.
pub fn optimize_lattice(
    model: &GateModel,
    beta: f64,
    config: &OptimizationConfig,
) -> Result<OptimizationResult, OptimizerError> {
    config.validate()?;
    let period = 0.5 * beta;
    let hi = 0.5 * config.time_bound;
    let thermal = ThermalState::uniform(config.n_bar, model.terms.len());
    let mut best: Option<(f64, [f64; 3], usize)> = None;
    let mut evaluated = 0;
    for family in 0..2 {
        // lattice indices start at 1 for the integer family (tau > 0)
        let first = 1 - family;
        let count = ((hi / period - 0.5 * family as f64) + 1e-9).floor() as i64 + 1 - first as i64;
        if count <= 0 {
            continue;
        }
        let points = count as usize;
        let tau_of = |m: [usize; 3]| m.map(|k| lattice_time(k + first, family, period));
        let eval = |m: [usize; 3]| {
            (
                model.frag_residuals(tau_of(m), config.n, &thermal).objective(),
                m,
            )
        };
        let pick = |a: (f64, [usize; 3]), b: (f64, [usize; 3])| {
            if b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)) == Ordering::Less {
                b
            } else {
                a
            }
        };
        let init = (f64::INFINITY, [0, 0, 0]);
        let found = if points <= EXHAUSTIVE_LATTICE {
            let row = |i: usize| {
                let mut acc = init;
                for j in 0..points {
                    for k in 0..points {
                        acc = pick(acc, eval([i, j, k]));
                    }
                }
                acc
            };
            evaluated += points.pow(3);
            #[cfg(feature = "parallel")]
            let b = (0..points).into_par_iter().map(row).reduce(|| init, pick);
            #[cfg(not(feature = "parallel"))]
            let b = (0..points).map(row).fold(init, pick);
            b
        } else {
            // refine snapped continuous optima by discrete neighbourhood descent
            let starts = start_points(config.starts, config.time_bound, config.seed);
            let cont = run_starts(&starts, model, config, &thermal);
            let seeds: Vec<[usize; 3]> = cont
                .iter()
                .map(|r| {
                    r.tau.map(|t| {
                        let k = (t / period - 0.5 * family as f64).round() as i64 - first as i64;
                        k.clamp(0, points as i64 - 1) as usize
                    })
                })
                .collect();
            evaluated += seeds.len();
            let descend = |mut m: [usize; 3]| {
                let mut cur = eval(m);
                loop {
                    let mut next = cur;
                    for di in -2i64..=2 {
                        for dj in -2i64..=2 {
                            for dk in -2i64..=2 {
                                let c = [di, dj, dk];
                                let cand = [0, 1, 2].map(|i| {
                                    (m[i] as i64 + c[i]).clamp(0, points as i64 - 1) as usize
                                });
                                next = pick(next, eval(cand));
                            }
                        }
                    }
                    if next.1 == cur.1 {
                        return cur;
                    }
                    cur = next;
                    m = cur.1;
                }
            };
            #[cfg(feature = "parallel")]
            let b = seeds.par_iter().map(|m| descend(*m)).reduce(|| init, pick);
            #[cfg(not(feature = "parallel"))]
            let b = seeds.iter().map(|m| descend(*m)).fold(init, pick);
            b
        };
        let cand = (found.0, tau_of(found.1), family);
        let replace = match &best {
            None => true,
            Some(b) => cand.0 < b.0,
        };
        if replace {
            best = Some(cand);
        }
    }
    let (f, tau, family) = best.ok_or(OptimizerError::EmptyLattice(config.time_bound))?;
    let centre_phase = if family == 0 { PI } else { 0.0 };
    let schedule = frag_schedule(tau, config.n, centre_phase)?;
    Ok(OptimizationResult {
        best_schedule: schedule,
        infidelity: f,
        achieved_gate_time: schedule.gate_time(),
        starts_converged: evaluated,
        starts: evaluated,
        mu: model.terms.iter().map(|t| t.mu).collect(),
        lock: LockMode::Lattice,
    })
}

/// Closed-form model of a trap for the given micromotion mode. Without
/// micromotion the harmonic counterpart of the trap is used.
pub fn gate_model(trap: &Trap, mu_mode: MuMode, laser: &LaserConfig) -> Result<GateModel, OptimizerError> {
    Ok(match mu_mode {
        MuMode::WithoutMicromotion => GateModel::harmonic(&mode_spectrum(&trap.harmonic()?)?, laser),
        MuMode::WithMicromotion => GateModel::per_mode(&mode_spectrum(trap)?, PI, laser)?,
    })
}

/// Optimise a FRAG gate for a trap.
pub fn optimize_gate(
    trap: &Trap,
    config: &OptimizationConfig,
    laser: &LaserConfig,
) -> Result<OptimizationResult, OptimizerError> {
    let model = gate_model(trap, config.mu_mode, laser)?;
    match (config.mu_mode, config.lock) {
        (MuMode::WithMicromotion, LockMode::Lattice) => optimize_lattice(&model, trap.beta()?, config),
        _ => optimize_model(&model, config, &[]),
    }
}

/// Trap with the same secular frequency and geometry whose COM `mu` at RF
/// phase pi equals `mu` (`a = 0`); `mu = 1` gives the harmonic trap.
pub fn trap_for_mu(trap: &Trap, mu: f64) -> Result<Trap, OptimizerError> {
    if mu == 1.0 {
        return Ok(trap.harmonic()?);
    }
    let q = q_for_mu(0.0, mu, PI, 0.9)?;
    Ok(trap.with_mathieu(MathieuParams::new(0.0, q))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub time_bound: f64,
    pub gate_time: f64,
    pub infidelity: f64,
    pub mu: f64,
    pub n: u32,
    pub tau: [f64; 3],
    pub converged_starts: usize,
}

/// Best infidelity against gate-time bound for each `mu`. Each bound is
/// warm-started from the previous best, so the envelope never rises.
pub fn sweep_gate_time(
    trap: &Trap,
    config: &OptimizationConfig,
    bounds: &[f64],
    mu_values: &[f64],
    laser: &LaserConfig,
) -> Result<Vec<SweepRow>, OptimizerError> {
    if bounds.windows(2).any(|w| w[1] < w[0]) {
        return Err(OptimizerError::Config("bounds must be increasing".into()));
    }
    let mut rows = Vec::new();
    for &mu in mu_values {
        let t = trap_for_mu(trap, mu)?;
        let mode = if mu == 1.0 {
            MuMode::WithoutMicromotion
        } else {
            MuMode::WithMicromotion
        };
        let model = gate_model(&t, mode, laser)?;
        let mut warm: Vec<[f64; 3]> = Vec::new();
        for &b in bounds {
            let cfg = OptimizationConfig {
                time_bound: b,
                mu_mode: mode,
                lock: LockMode::Idealized,
                ..config.clone()
            };
            let res = optimize_model(&model, &cfg, &warm)?;
            warm = vec![res.best_schedule.tau];
            rows.push(SweepRow {
                time_bound: b,
                gate_time: res.achieved_gate_time,
                infidelity: res.infidelity,
                mu,
                n: config.n,
                tau: res.best_schedule.tau,
                converged_starts: res.starts_converged,
            });
        }
    }
    Ok(rows)
}
