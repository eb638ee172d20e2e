//! WebAssembly bindings for the browser demo: a stability map of the
//! micromotion factor, a phase-locked gate with its ion trajectories, and
//! the sensitivity of an ideal gate to the RF phase.
//!
//! Each export has a plain Rust counterpart returning `Result<_, String>`
//! so the computations can be tested natively.

use fastgate::fidelity::{LaserConfig, ThermalState, DEFAULT_OCCUPATION};
use fastgate::gatescheme::PulseSchedule;
use fastgate::mathieu::{floquet_solution, MathieuParams};
use fastgate::odeoracle::{run_oracle, BasisState, OracleConfig, HBAR};
use fastgate::optimizer::{optimize_gate, trap_for_mu, LockMode, MuMode, OptimizationConfig};
use fastgate::robustness::sweep_phase_offset;
use fastgate::trapmodel::{mode_spectrum, MicrotrapArray, Trap, CA40_MASS};
use serde::Serialize;
use std::f64::consts::PI;
use wasm_bindgen::prelude::*;

const SECULAR_HZ: f64 = 1e6;
const SEPARATION: f64 = 100e-6;
const WAVELENGTH: f64 = 397e-9;
const DEMO_STARTS: usize = 64;
const MAX_POINTS: usize = 1500;

fn omega() -> f64 {
    2.0 * PI * SECULAR_HZ
}

/// Lamb-Dicke parameter of the demo ion and laser.
pub fn demo_eta() -> f64 {
    2.0 * PI / WAVELENGTH * (HBAR / (2.0 * CA40_MASS * omega())).sqrt()
}

fn demo_trap(q: f64) -> Result<Trap, String> {
    MicrotrapArray::from_secular(SEPARATION, omega(), MathieuParams::new(0.0, q), CA40_MASS)
        .map(Trap::Microtrap)
        .map_err(|e| e.to_string())
}

fn thermal() -> ThermalState {
    ThermalState::uniform(DEFAULT_OCCUPATION, 2)
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `mu` at RF phase `phi` on an `a_points x q_points` grid, `a`-major.
/// Unstable points are NaN.
pub fn mu_grid(a_min: f64, a_max: f64, a_points: usize, q_min: f64, q_max: f64, q_points: usize, phi: f64) -> Vec<f64> {
    let qs = grid(q_min, q_max, q_points);
    grid(a_min, a_max, a_points)
        .into_iter()
        .flat_map(|a| {
            qs.iter()
                .map(move |&q| floquet_solution(MathieuParams::new(a, q)).and_then(|s| s.mu(phi)).unwrap_or(f64::NAN))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GateSummary {
    pub tau: [f64; 3],
    pub n: u32,
    pub phi_rf: f64,
    pub infidelity: f64,
}

impl GateSummary {
    fn new(s: &PulseSchedule, infidelity: f64) -> Self {
        GateSummary {
            tau: s.tau,
            n: s.scale_n,
            phi_rf: s.phi_rf,
            infidelity,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryDemo {
    pub gate: GateSummary,
    pub mu: f64,
    pub oracle_infidelity: f64,
    pub time: Vec<f64>,
    /// Displacement of each ion in units of the ground-state width, for the
    /// state with opposite spins.
    pub ion1: Vec<f64>,
    pub ion2: Vec<f64>,
}

/// Optimise a gate whose pulses all arrive at RF phase pi on a microtrap
/// with the given `q`, then integrate the ions through it.
pub fn trajectory_demo(q: f64, n: u32, time_bound: f64) -> Result<TrajectoryDemo, String> {
    let trap = demo_trap(q)?;
    let laser = LaserConfig {
        lamb_dicke_eta: demo_eta(),
    };
    let cfg = OptimizationConfig {
        starts: DEMO_STARTS,
        mu_mode: MuMode::WithMicromotion,
        lock: LockMode::Lattice,
        ..OptimizationConfig::new(time_bound, n)
    };
    let r = optimize_gate(&trap, &cfg, &laser).map_err(|e| e.to_string())?;
    let seq = r.best_schedule.sequence();
    let (res, trajs) = run_oracle(&trap, &seq, &thermal(), &OracleConfig::new(demo_eta())).map_err(|e| e.to_string())?;
    let traj = trajs
        .iter()
        .find(|t| t.basis_state == BasisState::UpDown)
        .ok_or("missing trajectory")?;
    let x0 = (HBAR / (2.0 * CA40_MASS * omega())).sqrt();
    let unit = trap.length_unit().map_err(|e| e.to_string())? / x0;
    let stride = traj.samples.len().div_ceil(MAX_POINTS).max(1);
    let picked: Vec<_> = traj.samples.iter().step_by(stride).collect();
    Ok(TrajectoryDemo {
        gate: GateSummary::new(&r.best_schedule, r.infidelity),
        mu: r.mu[0],
        oracle_infidelity: res.report.infidelity,
        time: picked.iter().map(|s| s.time).collect(),
        ion1: picked.iter().map(|s| s.position[0] * unit).collect(),
        ion2: picked.iter().map(|s| s.position[1] * unit).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseCurve {
    pub gate: GateSummary,
    pub q: f64,
    pub offsets: Vec<f64>,
    pub infidelity: Vec<f64>,
}

/// Optimise an ideal gate for a microtrap with enhancement `mu`, then
/// evaluate it with every pulse's RF phase shifted by each offset in
/// `[-pi/4, pi/4]`.
pub fn phase_curve(mu: f64, n: u32, time_bound: f64, points: usize) -> Result<PhaseCurve, String> {
    let base = demo_trap(0.2)?;
    let trap = trap_for_mu(&base, mu).map_err(|e| e.to_string())?;
    let laser = LaserConfig {
        lamb_dicke_eta: demo_eta(),
    };
    let cfg = OptimizationConfig {
        starts: DEMO_STARTS,
        mu_mode: MuMode::WithMicromotion,
        ..OptimizationConfig::new(time_bound, n)
    };
    let r = optimize_gate(&trap, &cfg, &laser).map_err(|e| e.to_string())?;
    let spectrum = mode_spectrum(&trap).map_err(|e| e.to_string())?;
    let offsets = grid(-PI / 4.0, PI / 4.0, points.max(2));
    let rows = sweep_phase_offset(&spectrum, &r.best_schedule, &laser, &thermal(), &offsets, None).map_err(|e| e.to_string())?;
    Ok(PhaseCurve {
        gate: GateSummary::new(&r.best_schedule, r.infidelity),
        q: trap.mathieu().q,
        offsets,
        infidelity: rows.iter().map(|r| r.analytic.unwrap_or(f64::NAN)).collect(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string())))
}

#[wasm_bindgen]
pub fn mu_map(a_min: f64, a_max: f64, a_points: usize, q_min: f64, q_max: f64, q_points: usize, phi: f64) -> Vec<f64> {
    mu_grid(a_min, a_max, a_points, q_min, q_max, q_points, phi)
}

/// JSON-encoded [`TrajectoryDemo`].
#[wasm_bindgen]
pub fn gate_trajectory(q: f64, n: u32, time_bound: f64) -> Result<String, JsError> {
    to_js(trajectory_demo(q, n, time_bound))
}

/// JSON-encoded [`PhaseCurve`].
#[wasm_bindgen]
pub fn phase_offset_curve(mu: f64, n: u32, time_bound: f64, points: usize) -> Result<String, JsError> {
    to_js(phase_curve(mu, n, time_bound, points))
}
