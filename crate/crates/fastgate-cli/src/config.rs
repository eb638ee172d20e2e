//! Run configuration: the TOML input schema and its resolved form.
//!
//! The input allows alternatives (secular or RF frequency, `q` or `mu`,
//! `eta` or a wavelength); resolution checks that at most one of each is
//! given and fills in the rest, so the resolved config embedded in output
//! records is complete.

use fastgate::fidelity::{DEFAULT_ETA, DEFAULT_OCCUPATION};
use fastgate::mathieu::{characteristic_exponent, floquet_solution, q_for_mu, MathieuError, MathieuParams, ATOMIC_MASS_UNIT};
use fastgate::odeoracle::{OracleConfig, DEFAULT_KICK_SCALE, DEFAULT_MAX_STEP, DEFAULT_STEPS_PER_RF, HBAR};
use fastgate::optimizer::{LockMode, MuMode, OptimizationConfig, DEFAULT_STARTS};
use fastgate::robustness::SweepParameter;
use fastgate::trapmodel::{MicrotrapArray, PaulTrap, Trap};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    /// Parameters that parse but have no stable trap solution.
    #[error("{field}: {source}")]
    Mathieu { field: String, source: MathieuError },
}

fn mathieu(field: &str, source: MathieuError) -> ConfigError {
    ConfigError::Mathieu {
        field: field.into(),
        source,
    }
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapKind {
    Microtrap,
    Paul,
}

/// Ion species with known masses, in unified atomic mass units.
const SPECIES: &[(&str, f64)] = &[
    ("Be9", 9.012_182),
    ("Mg24", 23.985_042),
    ("Ca40", 39.962_6),
    ("Ca43", 42.958_767),
    ("Sr88", 87.905_612),
    ("Ba138", 137.905_247),
    ("Yb171", 170.936_326),
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrap {
    kind: TrapKind,
    species: Option<String>,
    mass_amu: Option<f64>,
    separation: Option<f64>,
    kappa: Option<f64>,
    #[serde(default)]
    a: f64,
    q: Option<f64>,
    mu: Option<f64>,
    secular_frequency_hz: Option<f64>,
    rf_frequency_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaser {
    eta: Option<f64>,
    wavelength_nm: Option<f64>,
    rep_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGate {
    n: Option<u32>,
    time_bound: Option<f64>,
    target_sign: Option<i8>,
    micromotion: Option<bool>,
    lock: Option<LockMode>,
    n_bar: Option<f64>,
    bounds: Option<Vec<f64>>,
    mu_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    starts: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    kick_scale: Option<f64>,
    steps_per_rf: Option<usize>,
    max_step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: SweepParameter,
    grid: Option<Vec<f64>>,
    #[serde(default)]
    oracle: bool,
    rf_ratio: Option<f64>,
    offsets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    a_min: Option<f64>,
    a_max: Option<f64>,
    a_points: Option<usize>,
    q_min: Option<f64>,
    q_max: Option<f64>,
    q_points: Option<usize>,
    phi: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    trap: RawTrap,
    #[serde(default)]
    laser: RawLaser,
    #[serde(default)]
    gate: RawGate,
    #[serde(default)]
    optimizer: RawOptimizer,
    #[serde(default)]
    oracle: RawOracle,
    sweep: Option<RawSweep>,
    #[serde(default)]
    map: RawMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapSection {
    pub kind: TrapKind,
    pub species: Option<String>,
    pub mass_amu: f64,
    /// Microtrap separation in m.
    pub separation: Option<f64>,
    /// Paul-trap axial to radial frequency ratio.
    pub kappa: Option<f64>,
    pub a: f64,
    pub q: f64,
    /// COM enhancement factor at RF phase pi.
    pub mu: f64,
    pub beta: f64,
    pub secular_frequency_hz: f64,
    pub rf_frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserSection {
    pub eta: f64,
    pub wavelength_nm: Option<f64>,
    /// Kicks per secular period; absent means instantaneous groups.
    pub rep_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSection {
    pub n: u32,
    pub time_bound: f64,
    pub target_sign: i8,
    pub micromotion: bool,
    pub lock: LockMode,
    pub n_bar: f64,
    /// Gate-time bounds for an envelope sweep; empty for a single run.
    pub bounds: Vec<f64>,
    pub mu_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSection {
    pub starts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSection {
    pub kick_scale: f64,
    pub steps_per_rf: usize,
    pub max_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub oracle: bool,
    /// RF to secular frequency ratio held fixed by the `q_value` sweep.
    pub rf_ratio: f64,
    /// RF phases at the first pulse for the `q_value` sweep.
    pub offsets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSection {
    pub a_min: f64,
    pub a_max: f64,
    pub a_points: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub q_points: usize,
    pub phi: f64,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub trap: TrapSection,
    pub laser: LaserSection,
    pub gate: GateSection,
    pub optimizer: OptimizerSection,
    pub oracle: OracleSection,
    pub sweep: Option<SweepSection>,
    pub map: MapSection,
}

fn positive(field: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(field, format!("must be positive and finite, got {x}")))
    }
}

fn one_of<T>(a: (&str, Option<T>), b: (&str, Option<T>)) -> Result<Option<Result<T, T>>, ConfigError> {
    match (a.1, b.1) {
        (Some(_), Some(_)) => Err(invalid(a.0, format!("give at most one of {} and {}", a.0, b.0))),
        (Some(x), None) => Ok(Some(Ok(x))),
        (None, Some(y)) => Ok(Some(Err(y))),
        (None, None) => Ok(None),
    }
}

fn sorted(field: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return Err(invalid(field, "must not be empty"));
    }
    if v.iter().any(|x| x.is_nan()) || v.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid(field, "must be sorted ascending"));
    }
    Ok(())
}

fn resolve_trap(raw: RawTrap) -> Result<TrapSection, ConfigError> {
    let mass_amu = match (raw.species.as_deref(), raw.mass_amu) {
        (Some(_), Some(_)) => return Err(invalid("trap.species", "give at most one of trap.species and trap.mass_amu")),
        (Some(name), None) => SPECIES
            .iter()
            .find(|(s, _)| *s == name)
            .map(|(_, m)| *m)
            .ok_or_else(|| {
                let known: Vec<&str> = SPECIES.iter().map(|(s, _)| *s).collect();
                invalid("trap.species", format!("unknown species {name:?}; known: {}", known.join(", ")))
            })?,
        (None, Some(m)) => positive("trap.mass_amu", m)?,
        (None, None) => return Err(invalid("trap.species", "give trap.species or trap.mass_amu")),
    };
    match raw.kind {
        TrapKind::Microtrap => {
            positive("trap.separation", raw.separation.ok_or_else(|| invalid("trap.separation", "required for a microtrap"))?)?;
            if raw.kappa.is_some() {
                return Err(invalid("trap.kappa", "only applies to a Paul trap"));
            }
        }
        TrapKind::Paul => {
            positive("trap.kappa", raw.kappa.ok_or_else(|| invalid("trap.kappa", "required for a Paul trap"))?)?;
            if raw.separation.is_some() {
                return Err(invalid("trap.separation", "only applies to a microtrap"));
            }
        }
    }
    if !raw.a.is_finite() {
        return Err(invalid("trap.a", "must be finite"));
    }
    let q = match one_of(("trap.q", raw.q), ("trap.mu", raw.mu))? {
        Some(Ok(q)) if q >= 0.0 && q.is_finite() => q,
        Some(Ok(q)) => return Err(invalid("trap.q", format!("must be non-negative, got {q}"))),
        Some(Err(mu)) => {
            positive("trap.mu", mu)?;
            if mu == 1.0 {
                0.0
            } else {
                q_for_mu(raw.a, mu, PI, 0.9).map_err(|e| mathieu("trap.mu", e))?
            }
        }
        None => 0.0,
    };
    let params = MathieuParams::new(raw.a, q);
    let beta = characteristic_exponent(params).map_err(|e| mathieu("trap.q", e))?;
    let mu = floquet_solution(params).and_then(|f| f.mu(PI)).map_err(|e| mathieu("trap.q", e))?;
    let (secular, rf) = match one_of(
        ("trap.secular_frequency_hz", raw.secular_frequency_hz),
        ("trap.rf_frequency_hz", raw.rf_frequency_hz),
    )? {
        Some(Ok(w)) => {
            let w = positive("trap.secular_frequency_hz", w)?;
            (w, 2.0 * w / beta)
        }
        Some(Err(r)) => {
            let r = positive("trap.rf_frequency_hz", r)?;
            (0.5 * beta * r, r)
        }
        None => {
            return Err(invalid(
                "trap.secular_frequency_hz",
                "give trap.secular_frequency_hz or trap.rf_frequency_hz",
            ))
        }
    };
    Ok(TrapSection {
        kind: raw.kind,
        species: raw.species,
        mass_amu,
        separation: raw.separation,
        kappa: raw.kappa,
        a: raw.a,
        q,
        mu,
        beta,
        secular_frequency_hz: secular,
        rf_frequency_hz: rf,
    })
}

fn linspace_default(min: Option<f64>, max: Option<f64>, points: Option<usize>, d: (f64, f64, usize)) -> (f64, f64, usize) {
    (min.unwrap_or(d.0), max.unwrap_or(d.1), points.unwrap_or(d.2))
}

impl RunConfig {
    /// Parse and resolve a TOML document. `origin` names the source in errors.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })?;
        Self::resolve(raw)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    fn resolve(raw: RawConfig) -> Result<Self, ConfigError> {
        let trap = resolve_trap(raw.trap)?;

        let eta = match one_of(("laser.eta", raw.laser.eta), ("laser.wavelength_nm", raw.laser.wavelength_nm))? {
            Some(Ok(e)) => positive("laser.eta", e)?,
            Some(Err(l)) => {
                let l = positive("laser.wavelength_nm", l)?;
                let omega = 2.0 * PI * trap.secular_frequency_hz;
                2.0 * PI / (l * 1e-9) * (HBAR / (2.0 * trap.mass_amu * ATOMIC_MASS_UNIT * omega)).sqrt()
            }
            None => DEFAULT_ETA,
        };
        if let Some(r) = raw.laser.rep_rate {
            positive("laser.rep_rate", r)?;
        }
        let laser = LaserSection {
            eta,
            wavelength_nm: raw.laser.wavelength_nm,
            rep_rate: raw.laser.rep_rate,
        };

        let g = raw.gate;
        let n = g.n.unwrap_or(12);
        if n == 0 {
            return Err(invalid("gate.n", "must be positive"));
        }
        let target_sign = g.target_sign.unwrap_or(1);
        if target_sign != 1 && target_sign != -1 {
            return Err(invalid("gate.target_sign", "must be 1 or -1"));
        }
        let n_bar = g.n_bar.unwrap_or(DEFAULT_OCCUPATION);
        if !(n_bar >= 0.0 && n_bar.is_finite()) {
            return Err(invalid("gate.n_bar", "must be non-negative"));
        }
        let bounds = g.bounds.unwrap_or_default();
        if !bounds.is_empty() {
            sorted("gate.bounds", &bounds)?;
            for b in &bounds {
                positive("gate.bounds", *b)?;
            }
        }
        let mu_values = g.mu_values.unwrap_or_else(|| vec![trap.mu]);
        for m in &mu_values {
            positive("gate.mu_values", *m)?;
        }
        let gate = GateSection {
            n,
            time_bound: positive("gate.time_bound", g.time_bound.unwrap_or(2.0))?,
            target_sign,
            micromotion: g.micromotion.unwrap_or(trap.q > 0.0),
            lock: g.lock.unwrap_or(LockMode::Idealized),
            n_bar,
            bounds,
            mu_values,
        };

        let optimizer = OptimizerSection {
            starts: raw.optimizer.starts.unwrap_or(DEFAULT_STARTS),
            seed: raw.optimizer.seed.unwrap_or(1),
        };
        if optimizer.starts == 0 {
            return Err(invalid("optimizer.starts", "must be positive"));
        }

        let oracle = OracleSection {
            kick_scale: positive("oracle.kick_scale", raw.oracle.kick_scale.unwrap_or(DEFAULT_KICK_SCALE))?,
            steps_per_rf: raw.oracle.steps_per_rf.unwrap_or(DEFAULT_STEPS_PER_RF),
            max_step: positive("oracle.max_step", raw.oracle.max_step.unwrap_or(DEFAULT_MAX_STEP))?,
        };
        if oracle.steps_per_rf == 0 {
            return Err(invalid("oracle.steps_per_rf", "must be positive"));
        }

        let sweep = match raw.sweep {
            None => None,
            Some(s) => {
                let grid = s.grid.unwrap_or_else(|| s.parameter.default_grid());
                sorted("sweep.grid", &grid)?;
                let offsets = s
                    .offsets
                    .unwrap_or_else(|| (0..=32).map(|k| 2.0 * PI * k as f64 / 32.0).collect());
                sorted("sweep.offsets", &offsets)?;
                let rf_ratio = positive("sweep.rf_ratio", s.rf_ratio.unwrap_or(2.0 / trap.beta))?;
                if s.oracle && matches!(s.parameter, SweepParameter::ChiError | SweepParameter::ThermalN | SweepParameter::QValue) {
                    return Err(invalid("sweep.oracle", "this sweep has no oracle evaluation"));
                }
                if s.parameter == SweepParameter::StrayField && trap.kind != TrapKind::Microtrap {
                    return Err(invalid("sweep.parameter", "stray_field applies to microtrap arrays"));
                }
                Some(SweepSection {
                    parameter: s.parameter,
                    grid,
                    oracle: s.oracle || s.parameter == SweepParameter::StrayField,
                    rf_ratio,
                    offsets,
                })
            }
        };

        let m = raw.map;
        let (a_min, a_max, a_points) = linspace_default(m.a_min, m.a_max, m.a_points, (-0.1, 0.1, 41));
        let (q_min, q_max, q_points) = linspace_default(m.q_min, m.q_max, m.q_points, (0.0, 0.9, 46));
        if a_points < 1 || q_points < 1 {
            return Err(invalid("map.a_points", "grids need at least one point"));
        }
        if !(a_min <= a_max) {
            return Err(invalid("map.a_min", "must not exceed map.a_max"));
        }
        if !(q_min <= q_max) || q_min < 0.0 {
            return Err(invalid("map.q_min", "must be non-negative and not exceed map.q_max"));
        }
        let map = MapSection {
            a_min,
            a_max,
            a_points,
            q_min,
            q_max,
            q_points,
            phi: m.phi.unwrap_or(PI),
        };

        Ok(RunConfig {
            trap,
            laser,
            gate,
            optimizer,
            oracle,
            sweep,
            map,
        })
    }

    pub fn trap(&self) -> Result<Trap, fastgate::trapmodel::TrapError> {
        let t = &self.trap;
        let params = MathieuParams::new(t.a, t.q);
        let omega = 2.0 * PI * t.secular_frequency_hz;
        let mass = t.mass_amu * ATOMIC_MASS_UNIT;
        Ok(match t.kind {
            TrapKind::Microtrap => Trap::Microtrap(MicrotrapArray::from_secular(
                t.separation.unwrap_or_default(),
                omega,
                params,
                mass,
            )?),
            TrapKind::Paul => Trap::Paul(PaulTrap::from_secular(omega, params, t.kappa.unwrap_or_default(), mass)?),
        })
    }

    pub fn laser(&self) -> fastgate::fidelity::LaserConfig {
        fastgate::fidelity::LaserConfig {
            lamb_dicke_eta: self.laser.eta,
        }
    }

    pub fn optimization(&self) -> OptimizationConfig {
        OptimizationConfig {
            time_bound: self.gate.time_bound,
            n: self.gate.n,
            starts: self.optimizer.starts,
            seed: self.optimizer.seed,
            mu_mode: if self.gate.micromotion {
                MuMode::WithMicromotion
            } else {
                MuMode::WithoutMicromotion
            },
            lock: self.gate.lock,
            target_sign: self.gate.target_sign,
            n_bar: self.gate.n_bar,
        }
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            kick_scale: self.oracle.kick_scale,
            steps_per_rf: self.oracle.steps_per_rf,
            max_step: self.oracle.max_step,
            eta: self.laser.eta,
        }
    }
}
