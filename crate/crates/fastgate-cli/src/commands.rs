//! The five subcommands. Each writes a CSV file with a sidecar JSON record
//! into the output directory and prints a short summary.

use crate::config::{ConfigError, RunConfig};
use crate::output::{num, opt, write_record, CsvSink, Record};
use crate::schedule::ScheduleFile;
use crate::CliError;
use fastgate::fidelity::{FidelityReport, FloquetModel, GateErrors, GateModel, ThermalState};
use fastgate::gatescheme::{expand_finite_rep, ImpulseSequence, PulseSchedule};
use fastgate::mathieu::{characteristic_exponent, floquet_solution, MathieuParams};
use fastgate::odeoracle::{export_rows, run_oracle, GeometricPhaseResult, OracleResult};
use fastgate::optimizer::{gate_model, optimize_gate, sweep_gate_time, LockMode, MuMode, OptimizationResult};
use fastgate::robustness::{
    sweep_chi_error, sweep_phase_offset, sweep_q_phase, sweep_rep_rate, sweep_stray_field, sweep_thermal, SweepParameter,
    SweepRow,
};
use fastgate::trapmodel::{
    chi_microtrap, crystal_ode_residual, find_periodic_crystal, mode_spectrum, ModeKind, Trap,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Inputs shared by all subcommands.
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    /// Schedule file for `evaluate`, `sweep` and `oracle`.
    pub schedule: Option<PathBuf>,
    /// Also export oracle trajectories from `optimize`.
    pub trajectory: bool,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn thermal(&self) -> ThermalState {
        ThermalState::uniform(self.config.gate.n_bar, 2)
    }

    fn load_schedule(&self) -> Result<ScheduleFile, CliError> {
        let path = self.schedule.clone().unwrap_or_else(|| self.path("schedule.toml"));
        Ok(ScheduleFile::load(&path)?)
    }

    fn require_frag(&self, file: &ScheduleFile) -> Result<PulseSchedule, CliError> {
        file.frag_schedule().ok_or_else(|| {
            ConfigError::Invalid {
                field: "frag".into(),
                message: "this command needs a FRAG schedule".into(),
            }
            .into()
        })
    }

    /// Sequence of the schedule, spread over the configured repetition rate.
    fn sequence(&self, file: &ScheduleFile) -> Result<ImpulseSequence, CliError> {
        match (self.config.laser.rep_rate, file.frag_schedule()) {
            (Some(rate), Some(s)) => Ok(expand_finite_rep(&s, rate)?.sequence()),
            _ => Ok(file.sequence()),
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub kind: ModeKind,
    pub a: f64,
    pub q: f64,
    pub beta: f64,
    pub freq_ratio: f64,
    pub frequency_hz: f64,
    pub coupling: [f64; 2],
    pub mu_pi: f64,
    pub mu_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalReport {
    pub iterations: usize,
    pub residual: f64,
    pub ode_residual: f64,
    /// Largest micromotion excursion of ion 1 in m.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizeReport {
    pub beta: f64,
    pub stable: bool,
    pub secular_frequency_hz: f64,
    pub rf_frequency_hz: f64,
    pub chi: f64,
    pub xi: Option<f64>,
    /// Closed-form splitting of a static microtrap pair at this `xi`.
    pub chi_static: Option<f64>,
    pub modes: Vec<ModeReport>,
    /// `(phi_rf, mu)` of the COM mode.
    pub mu_phase: Vec<[f64; 2]>,
    pub crystal: Option<CrystalReport>,
}

const MAP_COLUMNS: [&str; 5] = ["a", "q", "stable", "beta", "mu"];

pub fn characterize(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let trap = cfg.trap()?;
    let spectrum = mode_spectrum(&trap)?;
    let modes = spectrum
        .modes
        .iter()
        .map(|m| {
            Ok(ModeReport {
                kind: m.kind,
                a: m.mathieu.a,
                q: m.mathieu.q,
                beta: m.beta,
                freq_ratio: m.freq_ratio,
                frequency_hz: m.frequency / (2.0 * PI),
                coupling: m.coupling,
                mu_pi: m.mu(PI)?,
                mu_zero: m.mu(0.0)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mu_phase = (0..=32)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / 32.0;
            Ok([phi, spectrum.modes[0].mu(phi)?])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let (xi, chi_static, crystal) = match &trap {
        Trap::Microtrap(m) => {
            let xi = m.xi()?;
            let crystal = if m.coulomb {
                let c = find_periodic_crystal(&trap)?;
                let ode_residual = crystal_ode_residual(&trap, &c)?;
                let amplitude = (0..64)
                    .map(|k| c.position(2.0 * PI * k as f64 / 64.0)[0].abs() * c.length_unit)
                    .fold(0.0, f64::max);
                Some(CrystalReport {
                    iterations: c.iterations,
                    residual: c.residual,
                    ode_residual,
                    amplitude,
                })
            } else {
                None
            };
            (Some(xi), Some(chi_microtrap(xi)), crystal)
        }
        Trap::Paul(_) => (None, None, None),
    };
    let report = CharacterizeReport {
        beta: spectrum.beta,
        stable: true,
        secular_frequency_hz: cfg.trap.secular_frequency_hz,
        rf_frequency_hz: cfg.trap.rf_frequency_hz,
        chi: spectrum.chi(),
        xi,
        chi_static,
        modes,
        mu_phase,
        crystal,
    };
    write_record(&ctx.path("characterize.json"), &Record::new("characterize", cfg, &[], &report))?;

    let m = &cfg.map;
    let mut sink = CsvSink::create(&ctx.path("mu_map.csv"), &MAP_COLUMNS)?;
    let step = |lo: f64, hi: f64, n: usize, k: usize| if n > 1 { lo + (hi - lo) * k as f64 / (n - 1) as f64 } else { lo };
    for i in 0..m.a_points {
        let a = step(m.a_min, m.a_max, m.a_points, i);
        for j in 0..m.q_points {
            let q = step(m.q_min, m.q_max, m.q_points, j);
            let p = MathieuParams::new(a, q);
            let point = characteristic_exponent(p).ok().and_then(|b| {
                let mu = floquet_solution(p).ok()?.mu(m.phi).ok()?;
                Some((b, mu))
            });
            sink.row(vec![
                num(a),
                num(q),
                point.is_some().to_string(),
                opt(point.map(|x| x.0)),
                opt(point.map(|x| x.1)),
            ])?;
        }
    }
    write_record(&ctx.path("mu_map.json"), &Record::new("characterize", cfg, &MAP_COLUMNS, ()))?;

    println!("beta        {}", num(report.beta));
    println!("secular     {} Hz", num(report.secular_frequency_hz));
    println!("rf          {} Hz", num(report.rf_frequency_hz));
    println!("chi         {}", num(report.chi));
    if let Some(xi) = report.xi {
        println!("xi          {}", num(xi));
    }
    for mode in &report.modes {
        println!(
            "mode {:<14} ratio {} mu(pi) {} mu(0) {}",
            format!("{:?}", mode.kind),
            num(mode.freq_ratio),
            num(mode.mu_pi),
            num(mode.mu_zero)
        );
    }
    if let Some(c) = &report.crystal {
        println!("crystal     {} iterations, residual {}, ode residual {}", c.iterations, num(c.residual), num(c.ode_residual));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeMetadata {
    pub mu_mode: MuMode,
    pub lock: LockMode,
    /// COM enhancement factor of the configured trap at RF phase pi.
    pub mu: f64,
    pub a: f64,
    pub q: f64,
    /// RF phase at the gate centre.
    pub lock_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub metadata: OptimizeMetadata,
    pub result: OptimizationResult,
    pub envelope: Vec<fastgate::optimizer::SweepRow>,
}

const OPTIMIZE_COLUMNS: [&str; 9] = [
    "time_bound",
    "mu",
    "gate_time",
    "infidelity",
    "tau1",
    "tau2",
    "tau3",
    "phi_rf",
    "converged_starts",
];

fn optimize_schedule(ctx: &Context, trap: &Trap) -> Result<OptimizationResult, CliError> {
    Ok(optimize_gate(trap, &ctx.config.optimization(), &ctx.config.laser())?)
}

pub fn optimize(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let trap = cfg.trap()?;
    let result = optimize_schedule(ctx, &trap)?;
    let mut sink = CsvSink::create(&ctx.path("optimize.csv"), &OPTIMIZE_COLUMNS)?;
    let s = result.best_schedule;
    sink.row(vec![
        num(cfg.gate.time_bound),
        num(cfg.trap.mu),
        num(result.achieved_gate_time),
        num(result.infidelity),
        num(s.tau[0]),
        num(s.tau[1]),
        num(s.tau[2]),
        num(s.phi_rf),
        result.starts_converged.to_string(),
    ])?;
    let envelope = if cfg.gate.bounds.is_empty() {
        Vec::new()
    } else {
        let rows = sweep_gate_time(&trap, &cfg.optimization(), &cfg.gate.bounds, &cfg.gate.mu_values, &cfg.laser())?;
        let mut env = CsvSink::create(&ctx.path("envelope.csv"), &OPTIMIZE_COLUMNS)?;
        for r in &rows {
            env.row(vec![
                num(r.time_bound),
                num(r.mu),
                num(r.gate_time),
                num(r.infidelity),
                num(r.tau[0]),
                num(r.tau[1]),
                num(r.tau[2]),
                num(PI),
                r.converged_starts.to_string(),
            ])?;
        }
        rows
    };
    let record = OptimizeResult {
        metadata: OptimizeMetadata {
            mu_mode: cfg.optimization().mu_mode,
            lock: result.lock,
            mu: cfg.trap.mu,
            a: cfg.trap.a,
            q: cfg.trap.q,
            lock_phase: s.phi_rf,
        },
        result: result.clone(),
        envelope,
    };
    write_record(&ctx.path("optimize.json"), &Record::new("optimize", cfg, &OPTIMIZE_COLUMNS, &record))?;
    let schedule_path = ctx.path("schedule.toml");
    std::fs::write(&schedule_path, ScheduleFile::from_schedule(&s).to_toml()).map_err(|e| CliError::Io {
        path: schedule_path.display().to_string(),
        message: e.to_string(),
    })?;
    if ctx.trajectory {
        export_trajectories(ctx, &trap, &s.sequence())?;
    }
    println!("infidelity  {}", num(result.infidelity));
    println!("gate time   {}", num(result.achieved_gate_time));
    println!("tau         {} {} {}", num(s.tau[0]), num(s.tau[1]), num(s.tau[2]));
    println!("phi_rf      {}", num(s.phi_rf));
    println!("converged   {}/{}", result.starts_converged, result.starts);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub source: String,
    pub errors: Option<GateErrors>,
    pub report: FidelityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResult {
    pub schedule: ScheduleFile,
    pub kicks: usize,
    pub reports: Vec<SourceReport>,
}

const EVALUATE_COLUMNS: [&str; 6] = ["source", "infidelity", "full_infidelity", "phase_term", "restoration", "signed_phase"];

/// Closed-form model matching the configured micromotion treatment, at the
/// schedule's RF phase.
fn closed_form(ctx: &Context, trap: &Trap, phi_rf: f64) -> Result<GateModel, CliError> {
    let cfg = &ctx.config;
    Ok(if cfg.gate.micromotion {
        GateModel::per_mode(&mode_spectrum(trap)?, phi_rf, &cfg.laser())?
    } else {
        gate_model(trap, MuMode::WithoutMicromotion, &cfg.laser())?
    })
}

pub fn evaluate(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let trap = cfg.trap()?;
    let file = ctx.load_schedule()?;
    let seq = ctx.sequence(&file)?;
    let thermal = ctx.thermal();
    let model = closed_form(ctx, &trap, file.phi_rf)?;
    let closed = SourceReport {
        source: "closed_form".into(),
        errors: Some(model.errors(&seq, cfg.gate.target_sign)),
        report: model.report(&seq, &thermal),
    };
    let floquet = FloquetModel::new(&mode_spectrum(&trap)?, &cfg.laser());
    // the exact response can leave the quadratic regime, so report the full form
    let mut linear_report = floquet.report(&seq, &thermal);
    linear_report.infidelity = linear_report.full_infidelity;
    let linear = SourceReport {
        source: "linear_response".into(),
        errors: Some(floquet.errors(&seq, cfg.gate.target_sign)),
        report: linear_report,
    };
    let (oracle, _) = run_oracle(&trap, &seq, &thermal, &cfg.oracle_config())?;
    let oracle_src = SourceReport {
        source: "oracle".into(),
        errors: None,
        report: oracle.report.clone(),
    };
    let mut sink = CsvSink::create(&ctx.path("evaluate.csv"), &EVALUATE_COLUMNS)?;
    let phases = [
        closed.errors.as_ref().map(|e| e.signed_phase),
        linear.errors.as_ref().map(|e| e.signed_phase),
        Some(oracle.signed_phase),
    ];
    let reports = vec![closed, linear, oracle_src];
    for (r, phase) in reports.iter().zip(phases) {
        sink.row(vec![
            r.source.clone(),
            num(r.report.infidelity),
            num(r.report.full_infidelity),
            num(r.report.phase_term),
            num(r.report.restoration_terms.iter().sum()),
            opt(phase),
        ])?;
        println!("{:<16} {}", r.source, num(r.report.infidelity));
    }
    let result = EvaluateResult {
        schedule: file,
        kicks: seq.impulses.len(),
        reports,
    };
    write_record(&ctx.path("evaluate.json"), &Record::new("evaluate", cfg, &EVALUATE_COLUMNS, &result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub schedule: ScheduleFile,
    pub rows: usize,
}

/// Schedule for a sweep: the given file, or a fresh optimisation that is
/// also written to the output directory.
fn sweep_schedule(ctx: &Context, trap: &Trap) -> Result<(ScheduleFile, PulseSchedule), CliError> {
    if ctx.schedule.is_some() {
        let file = ctx.load_schedule()?;
        let s = ctx.require_frag(&file)?;
        return Ok((file, s));
    }
    let s = optimize_schedule(ctx, trap)?.best_schedule;
    let file = ScheduleFile::from_schedule(&s);
    let path = ctx.path("schedule.toml");
    std::fs::write(&path, file.to_toml()).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok((file, s))
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let spec = cfg.sweep.clone().ok_or_else(|| ConfigError::Invalid {
        field: "sweep".into(),
        message: "a [sweep] section is required".into(),
    })?;
    let trap = cfg.trap()?;
    let (file, schedule) = sweep_schedule(ctx, &trap)?;
    let thermal = ctx.thermal();
    let laser = cfg.laser();
    let ocfg = cfg.oracle_config();

    if spec.parameter == SweepParameter::QValue {
        let columns = ["q", "a", "offset_rad", "infidelity_analytic"];
        let mut sink = CsvSink::create(&ctx.path("sweep.csv"), &columns)?;
        let mut count = 0;
        for &q in &spec.grid {
            for r in sweep_q_phase(&trap, &schedule, &laser, &thermal, &[q], spec.rf_ratio, &spec.offsets)? {
                sink.row(vec![num(r.q), num(r.a), num(r.offset), num(r.infidelity)])?;
                count += 1;
            }
        }
        let result = SweepResult {
            parameter: spec.parameter,
            schedule: file,
            rows: count,
        };
        return write_record(&ctx.path("sweep.json"), &Record::new("sweep", cfg, &columns, &result));
    }

    let columns = [spec.parameter.column(), "infidelity_analytic", "infidelity_oracle", "flag"];
    let mut sink = CsvSink::create(&ctx.path("sweep.csv"), &columns)?;
    let spectrum = mode_spectrum(&trap)?;
    let model = closed_form(ctx, &trap, schedule.phi_rf)?;
    let base = model.report(&schedule.sequence(), &thermal);
    let eval = |chunk: &[f64]| -> Result<Vec<SweepRow>, CliError> {
        Ok(match spec.parameter {
            SweepParameter::PhaseOffset => {
                let o = spec.oracle.then_some((&trap, &ocfg));
                sweep_phase_offset(&spectrum, &schedule, &laser, &thermal, chunk, o)?
            }
            SweepParameter::ChiError => sweep_chi_error(&model, &schedule, &thermal, chunk)?,
            SweepParameter::RepRate => {
                sweep_rep_rate(&trap, &schedule, &thermal, chunk, &laser, spec.oracle.then_some(&ocfg))?
            }
            SweepParameter::ThermalN => sweep_thermal(&base, &thermal, chunk)?,
            SweepParameter::StrayField => sweep_stray_field(&trap, &schedule, &thermal, chunk, &ocfg)?,
            SweepParameter::QValue => unreachable!("handled above"),
        })
    };
    // chunks keep the library's parallelism while rows reach disk as they finish
    let width = rayon::current_num_threads().max(1);
    let mut count = 0;
    for chunk in spec.grid.chunks(width) {
        for r in eval(chunk)? {
            sink.row(vec![num(r.value), opt(r.analytic), opt(r.oracle), r.flag.unwrap_or_default()])?;
            count += 1;
        }
    }
    println!("{count} rows written to {}", ctx.path("sweep.csv").display());
    let result = SweepResult {
        parameter: spec.parameter,
        schedule: file,
        rows: count,
    };
    write_record(&ctx.path("sweep.json"), &Record::new("sweep", cfg, &columns, &result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub schedule: ScheduleFile,
    pub result: OracleResult,
}

const ORACLE_COLUMNS: [&str; 5] = ["state", "phase", "work_phase", "displacement_mode1", "displacement_mode2"];
const TRAJECTORY_COLUMNS: [&str; 10] = [
    "state", "time", "x1", "v1", "x2", "v2", "mode1_x", "mode1_v", "mode2_x", "mode2_v",
];

fn state_row(s: &GeometricPhaseResult) -> Vec<String> {
    let d = |k: usize| s.mode_displacements.get(k).copied().unwrap_or(f64::NAN);
    vec![s.basis_state.label().to_string(), num(s.phase), num(s.work_phase), num(d(0)), num(d(1))]
}

fn export_trajectories(ctx: &Context, trap: &Trap, seq: &ImpulseSequence) -> Result<OracleResult, CliError> {
    let cfg = &ctx.config;
    let (result, trajs) = run_oracle(trap, seq, &ctx.thermal(), &cfg.oracle_config())?;
    let couplings: Vec<[f64; 2]> = result.modes.iter().map(|m| m.coupling).collect();
    let rf_period = 0.5 * trap.beta()?;
    let mut sink = CsvSink::create(&ctx.path("trajectory.csv"), &TRAJECTORY_COLUMNS)?;
    for t in &trajs {
        for r in export_rows(t, &couplings, rf_period) {
            let m = |v: &Vec<f64>, k: usize| v.get(k).copied().unwrap_or(f64::NAN);
            sink.row(vec![
                t.basis_state.label().to_string(),
                num(r.time),
                num(r.x1),
                num(r.v1),
                num(r.x2),
                num(r.v2),
                num(m(&r.mode_x, 0)),
                num(m(&r.mode_v, 0)),
                num(m(&r.mode_x, 1)),
                num(m(&r.mode_v, 1)),
            ])?;
        }
    }
    write_record(&ctx.path("trajectory.json"), &Record::new("trajectory", cfg, &TRAJECTORY_COLUMNS, ()))?;
    Ok(result)
}

pub fn oracle(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let trap = cfg.trap()?;
    let file = ctx.load_schedule()?;
    let seq = ctx.sequence(&file)?;
    let result = export_trajectories(ctx, &trap, &seq)?;
    let mut sink = CsvSink::create(&ctx.path("oracle.csv"), &ORACLE_COLUMNS)?;
    for s in &result.states {
        sink.row(state_row(s))?;
    }
    println!("phase       {}", num(result.signed_phase));
    println!("infidelity  {}", num(result.report.infidelity));
    for m in &result.modes {
        println!("mode ratio  {}", num(m.freq_ratio));
    }
    let record = OracleRecord { schedule: file, result };
    write_record(&ctx.path("oracle.json"), &Record::new("oracle", cfg, &ORACLE_COLUMNS, &record))
}
