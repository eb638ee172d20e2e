//! Sensitivity of a fixed gate to experimental imperfections.
//!
//! Every sweep evaluates an unchanged schedule on a perturbed model or trap.
//! Grid points are independent and evaluated concurrently; rows come back
//! in grid order. A zero perturbation reproduces the unperturbed evaluation
//! exactly.

use crate::fidelity::{thermal_scaling, FidelityReport, FloquetModel, GateModel, LaserConfig, ThermalState};
use crate::gatescheme::{expand_finite_rep, GateError, PulseSchedule};
use crate::mathieu::{a_for_beta, characteristic_exponent, MathieuError, MathieuParams};
use crate::odeoracle::{run_oracle, OracleConfig, OracleError};
use crate::trapmodel::{mode_spectrum, ModeSpectrum, Trap, TrapError};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobustnessError {
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("sweep grid must be sorted ascending")]
    UnsortedGrid,
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Trap(#[from] TrapError),
    #[error(transparent)]
    Mathieu(#[from] MathieuError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Gate(#[from] GateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    PhaseOffset,
    ChiError,
    RepRate,
    ThermalN,
    StrayField,
    QValue,
}

impl SweepParameter {
    /// Grid spanning the range of the corresponding published figure.
    pub fn default_grid(self) -> Vec<f64> {
        let lin = |a: f64, b: f64, n: usize| (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect::<Vec<_>>();
        let log = |a: f64, b: f64, n: usize| {
            (0..n)
                .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
                .collect::<Vec<_>>()
        };
        match self {
            SweepParameter::PhaseOffset => lin(-PI / 4.0, PI / 4.0, 41),
            SweepParameter::ChiError => lin(-0.04, 0.04, 41),
            SweepParameter::RepRate => log(1.0, 3.0, 41),
            SweepParameter::ThermalN => log(-1.0, 2.0, 31),
            SweepParameter::StrayField => lin(-2e-3, 2e-3, 21),
            SweepParameter::QValue => vec![0.05, 0.1, 0.15, 0.2],
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            SweepParameter::PhaseOffset => "offset_rad",
            SweepParameter::ChiError => "chi_error",
            SweepParameter::RepRate => "rep_rate",
            SweepParameter::ThermalN => "n_bar",
            SweepParameter::StrayField => "frequency_offset",
            SweepParameter::QValue => "q",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, grid: Vec<f64>) -> Result<Self, RobustnessError> {
        check_grid(&grid)?;
        Ok(SweepSpec { parameter, grid })
    }
}

fn check_grid(grid: &[f64]) -> Result<(), RobustnessError> {
    if grid.is_empty() {
        return Err(RobustnessError::EmptyGrid);
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(RobustnessError::UnsortedGrid);
    }
    Ok(())
}

/// One grid point. `analytic` is the closed-form or linear-response value,
/// `oracle` the trajectory value; either may be absent for a given sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub analytic: Option<f64>,
    pub oracle: Option<f64>,
    /// Set when the point could not be evaluated (for example overlapping groups).
    pub flag: Option<String>,
}

fn map_grid<F>(grid: &[f64], f: F) -> Result<Vec<SweepRow>, RobustnessError>
where
    F: Fn(f64) -> Result<SweepRow, RobustnessError> + Sync + Send,
{
    check_grid(grid)?;
    #[cfg(feature = "parallel")]
    let rows = grid.par_iter().map(|&v| f(v)).collect();
    #[cfg(not(feature = "parallel"))]
    let rows = grid.iter().map(|&v| f(v)).collect();
    rows
}

/// Shift the RF phase of every pulse by each offset. The analytic value
/// uses each mode's enhancement factor at the shifted phase; the oracle, if
/// requested, integrates the shifted schedule on `trap`.
pub fn sweep_phase_offset(
    spectrum: &ModeSpectrum,
    schedule: &PulseSchedule,
    laser: &LaserConfig,
    thermal: &ThermalState,
    offsets: &[f64],
    oracle: Option<(&Trap, &OracleConfig)>,
) -> Result<Vec<SweepRow>, RobustnessError> {
    map_grid(offsets, |d| {
        let model = GateModel::per_mode(spectrum, schedule.phi_rf + d, laser)?;
        let seq = schedule.sequence();
        let analytic = model.report(&seq, thermal).infidelity;
        let oracle = match oracle {
            Some((trap, cfg)) => {
                let mut shifted = *schedule;
                shifted.phi_rf += d;
                Some(run_oracle(trap, &shifted.sequence(), thermal, cfg)?.0.report.infidelity)
            }
            None => None,
        };
        Ok(SweepRow {
            value: d,
            analytic: Some(analytic),
            oracle,
            flag: None,
        })
    })
}

/// Evaluate the schedule on models whose true splitting is
/// `chi (1 + fraction)` while the gate was designed for `chi`.
pub fn sweep_chi_error(
    model: &GateModel,
    schedule: &PulseSchedule,
    thermal: &ThermalState,
    fractions: &[f64],
) -> Result<Vec<SweepRow>, RobustnessError> {
    let chi = model.chi();
    let seq = schedule.sequence();
    map_grid(fractions, |f| {
        let report = if f == 0.0 {
            model.report(&seq, thermal)
        } else {
            model.with_chi(chi * (1.0 + f)).report(&seq, thermal)
        };
        Ok(SweepRow {
            value: f,
            analytic: Some(report.infidelity),
            oracle: None,
            flag: None,
        })
    })
}

/// Spread each pulse group into kicks at each repetition rate (kicks per
/// secular period) and evaluate with the exact linear-response model and
/// the trajectory oracle, both in full form. An infinite rate is the
/// instantaneous schedule. Rates at which groups overlap are flagged.
pub fn sweep_rep_rate(
    trap: &Trap,
    schedule: &PulseSchedule,
    thermal: &ThermalState,
    rates: &[f64],
    laser: &LaserConfig,
    oracle: Option<&OracleConfig>,
) -> Result<Vec<SweepRow>, RobustnessError> {
    let floquet = FloquetModel::new(&mode_spectrum(trap)?, laser);
    map_grid(rates, |r| {
        let train = match expand_finite_rep(schedule, r) {
            Ok(t) => t,
            Err(e @ GateError::GroupOverlap { .. }) => {
                return Ok(SweepRow {
                    value: r,
                    analytic: None,
                    oracle: None,
                    flag: Some(e.to_string()),
                })
            }
            Err(e) => return Err(e.into()),
        };
        let seq = if r.is_infinite() { schedule.sequence() } else { train.sequence() };
        let analytic = floquet.report(&seq, thermal).full_infidelity;
        let oracle = match oracle {
            Some(cfg) => Some(run_oracle(trap, &seq, thermal, cfg)?.0.report.infidelity),
            None => None,
        };
        Ok(SweepRow {
            value: r,
            analytic: Some(analytic),
            oracle,
            flag: None,
        })
    })
}

/// Rescale a report to uniform occupations `n_bar`.
pub fn sweep_thermal(base: &FidelityReport, from: &ThermalState, n_bars: &[f64]) -> Result<Vec<SweepRow>, RobustnessError> {
    let modes = base.restoration_terms.len();
    map_grid(n_bars, |n| {
        let to = ThermalState::uniform(n, modes);
        let report = if &to == from { base.clone() } else { thermal_scaling(base, from, &to) };
        Ok(SweepRow {
            value: n,
            analytic: Some(report.infidelity),
            oracle: None,
            flag: None,
        })
    })
}

/// Microtrap array whose second trap has its secular frequency scaled by
/// `1 + offset`, as a slowly varying stray field would.
pub fn with_frequency_offset(trap: &Trap, offset: f64) -> Result<Trap, RobustnessError> {
    let Trap::Microtrap(m) = trap else {
        return Err(RobustnessError::Unsupported("frequency offsets apply to microtrap arrays".into()));
    };
    let mut out = m.clone();
    if offset == 0.0 {
        return Ok(Trap::Microtrap(out));
    }
    let p = m.mathieu;
    let beta = characteristic_exponent(p)?;
    let target = beta * (1.0 + offset);
    let a = if p.q == 0.0 {
        target * target
    } else {
        a_for_beta(p.q, target)?
    };
    out.static_offsets[1] += a - p.a;
    // confirm the shifted trap is stable
    characteristic_exponent(MathieuParams::new(p.a + out.static_offsets[1], p.q))?;
    Ok(Trap::Microtrap(out))
}

/// Offset one microtrap's secular frequency and evaluate with the oracle,
/// which re-derives the (now asymmetric) modes from the trajectories.
pub fn sweep_stray_field(
    trap: &Trap,
    schedule: &PulseSchedule,
    thermal: &ThermalState,
    offsets: &[f64],
    cfg: &OracleConfig,
) -> Result<Vec<SweepRow>, RobustnessError> {
    let seq = schedule.sequence();
    map_grid(offsets, |d| {
        let t = with_frequency_offset(trap, d)?;
        let (res, _) = run_oracle(&t, &seq, thermal, cfg)?;
        Ok(SweepRow {
            value: d,
            analytic: None,
            oracle: Some(res.report.infidelity),
            flag: None,
        })
    })
}

/// Relative stray field corresponding to a relative frequency offset,
/// `dE/E = (dw/w) / sqrt(2)`.
pub fn field_from_frequency_offset(relative_frequency: f64) -> f64 {
    relative_frequency / 2f64.sqrt()
}

/// One point of a micromotion-unaware gate evaluated across `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPhaseRow {
    pub q: f64,
    pub a: f64,
    /// RF phase at the first pulse.
    pub offset: f64,
    pub infidelity: f64,
}

/// Evaluate a schedule on traps with each `q`, choosing `a` to keep the RF
/// frequency at `rf_ratio` times the secular frequency, against the RF phase
/// at the first pulse. Uses the exact linear-response model with
/// instantaneous groups.
pub fn sweep_q_phase(
    trap: &Trap,
    schedule: &PulseSchedule,
    laser: &LaserConfig,
    thermal: &ThermalState,
    q_values: &[f64],
    rf_ratio: f64,
    offsets: &[f64],
) -> Result<Vec<QPhaseRow>, RobustnessError> {
    check_grid(q_values)?;
    check_grid(offsets)?;
    let beta = 2.0 / rf_ratio;
    let first = -schedule.tau.iter().fold(0.0f64, |m, &t| m.max(t));
    let mut out = Vec::with_capacity(q_values.len() * offsets.len());
    for &q in q_values {
        let a = a_for_beta(q, beta)?;
        let t = trap.with_mathieu(MathieuParams::new(a, q))?;
        let model = FloquetModel::new(&mode_spectrum(&t)?, laser);
        let eval = |off: f64| {
            let mut s = *schedule;
            s.phi_rf = off - 4.0 * PI * first / beta;
            QPhaseRow {
                q,
                a,
                offset: off,
                infidelity: model.report(&s.sequence(), thermal).full_infidelity,
            }
        };
        #[cfg(feature = "parallel")]
        let rows: Vec<QPhaseRow> = offsets.par_iter().map(|&o| eval(o)).collect();
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<QPhaseRow> = offsets.iter().map(|&o| eval(o)).collect();
        out.extend(rows);
    }
    Ok(out)
}
