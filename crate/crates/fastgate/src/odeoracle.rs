//! Ground truth by direct integration of the classical equations of motion.
//!
//! Each qubit basis state pushes the ions with state-dependent kicks along
//! the gate axis. The kicked crystal and the unkicked reference are
//! integrated in lockstep under the full time-dependent trap and Coulomb
//! forces, so their difference is the motion driven by the gate. Kicks are
//! applied at a small scale `kick_scale` and results are rescaled, which
//! isolates the linear response that carries the geometric phase while the
//! integration itself never linearises the forces.
//!
//! Floquet modes are taken from the numerically computed one-period
//! monodromy of the crystal, so asymmetric traps get their own mode vectors
//! and frequencies.

use crate::fidelity::{infidelity_from_parts, FidelityReport, FidelitySource, ThermalState};
use crate::gatescheme::{Impulse, ImpulseSequence};
use crate::integrate::{step_count, Dynamics, Yoshida6};
use crate::trapmodel::{find_periodic_crystal, Trap, TrapError};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Default kick magnitude in dimensionless velocity units.
pub const DEFAULT_KICK_SCALE: f64 = 1e-6;
pub const DEFAULT_STEPS_PER_RF: usize = 200;
/// Largest step in secular periods, independent of the RF period.
pub const DEFAULT_MAX_STEP: f64 = 1.0 / 400.0;
/// Physical displacement beyond which the linear picture is abandoned,
/// in units of the trap length scale.
pub const ESCAPE_BOUND: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Trap(#[from] TrapError),
    #[error("integration broke down at tau = {time}")]
    StepFailure { time: f64 },
    #[error("ion {ion} displaced by {displacement:e} at tau = {time}, beyond the linear regime")]
    EscapedIon {
        ion: usize,
        time: f64,
        displacement: f64,
    },
    #[error("Floquet analysis failed: {0}")]
    Floquet(String),
    #[error("invalid oracle config: {0}")]
    Config(String),
}

/// Qubit basis state; each spin sets the sign of the kick on its ion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisState {
    UpUp,
    UpDown,
    DownUp,
    DownDown,
}

impl BasisState {
    pub const ALL: [BasisState; 4] = [
        BasisState::UpUp,
        BasisState::UpDown,
        BasisState::DownUp,
        BasisState::DownDown,
    ];

    pub fn spins(self) -> [f64; 2] {
        match self {
            BasisState::UpUp => [1.0, 1.0],
            BasisState::UpDown => [1.0, -1.0],
            BasisState::DownUp => [-1.0, 1.0],
            BasisState::DownDown => [-1.0, -1.0],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BasisState::UpUp => "uu",
            BasisState::UpDown => "ud",
            BasisState::DownUp => "du",
            BasisState::DownDown => "dd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub kick_scale: f64,
    pub steps_per_rf: usize,
    pub max_step: f64,
    /// Lamb-Dicke parameter setting the phase and kick scale.
    pub eta: f64,
}

impl OracleConfig {
    pub fn new(eta: f64) -> Self {
        OracleConfig {
            kick_scale: DEFAULT_KICK_SCALE,
            steps_per_rf: DEFAULT_STEPS_PER_RF,
            max_step: DEFAULT_MAX_STEP,
            eta,
        }
    }

    fn validate(&self) -> Result<(), OracleError> {
        if !(self.kick_scale > 0.0 && self.kick_scale.is_finite()) {
            return Err(OracleError::Config("kick_scale must be positive".into()));
        }
        if self.steps_per_rf == 0 || !(self.max_step > 0.0) {
            return Err(OracleError::Config("step controls must be positive".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(OracleError::Config("eta must be positive".into()));
        }
        Ok(())
    }
}

/// Per-ion, per-axis confinement `(a, q)` of one trap axis.
#[derive(Debug, Clone, Copy)]
struct Axis {
    a: f64,
    q: f64,
}

/// Full equations of motion in `tau` for two ions, one or two axes each.
/// Coordinates are displacements from each ion's trap centre in the trap
/// length unit, ion-major, which keeps small gate-driven motion well above
/// rounding error.
#[derive(Debug, Clone)]
pub struct IonSystem {
    axes: usize,
    confinement: [[Axis; 2]; 2],
    centres: [[f64; 2]; 2],
    coulomb: f64,
    beta: f64,
    phi_rf: f64,
}

impl IonSystem {
    pub fn new(trap: &Trap, phi_rf: f64) -> Result<Self, OracleError> {
        let beta = trap.beta()?;
        let p = trap.mathieu();
        let coulomb = trap.coulomb_strength()?;
        let ion_a = trap.ion_a();
        let zero = Axis { a: 0.0, q: 0.0 };
        Ok(match trap {
            Trap::Microtrap(_) => IonSystem {
                axes: 1,
                confinement: [[Axis { a: ion_a[0], q: p.q }, zero], [Axis { a: ion_a[1], q: p.q }, zero]],
                centres: [[-0.5, 0.0], [0.5, 0.0]],
                coulomb,
                beta,
                phi_rf,
            },
            Trap::Paul(t) => {
                let axial = Axis {
                    a: (t.kappa * beta).powi(2),
                    q: 0.0,
                };
                IonSystem {
                    axes: 2,
                    confinement: [[Axis { a: ion_a[0], q: p.q }, axial], [Axis { a: ion_a[1], q: p.q }, axial]],
                    centres: [[0.0, 0.0], [0.0, 0.0]],
                    coulomb,
                    beta,
                    phi_rf,
                }
            }
        })
    }

    pub fn rf_phase(&self, tau: f64) -> f64 {
        4.0 * PI * tau / self.beta + self.phi_rf
    }

    /// RF period in secular periods.
    pub fn rf_period(&self) -> f64 {
        0.5 * self.beta
    }

    fn index(&self, ion: usize, axis: usize) -> usize {
        ion * self.axes + axis
    }

    fn stiffness(&self, tau: f64) -> [[f64; 2]; 2] {
        let w = (2.0 * PI / self.beta).powi(2);
        let c = self.rf_phase(tau).cos();
        let mut k = [[0.0; 2]; 2];
        for i in 0..2 {
            for d in 0..self.axes {
                let ax = self.confinement[i][d];
                k[i][d] = w * (ax.a - 2.0 * ax.q * c);
            }
        }
        k
    }

    fn separation(&self, x: &[f64]) -> ([f64; 2], f64) {
        let mut r = [0.0; 2];
        for (d, rd) in r.iter_mut().enumerate().take(self.axes) {
            *rd = x[self.index(1, d)] + self.centres[1][d] - x[self.index(0, d)] - self.centres[0][d];
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        (r, norm)
    }

    /// Linearised acceleration `J(tau, x) y`.
    pub fn tangent(&self, tau: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        let k = self.stiffness(tau);
        for i in 0..2 {
            for d in 0..self.axes {
                let n = self.index(i, d);
                out[n] = -k[i][d] * y[n];
            }
        }
        if self.coulomb == 0.0 {
            return;
        }
        let (r, norm) = self.separation(x);
        let mut dy = [0.0; 2];
        for (d, v) in dy.iter_mut().enumerate().take(self.axes) {
            *v = y[self.index(1, d)] - y[self.index(0, d)];
        }
        let r3 = norm.powi(3);
        let rdy: f64 = (0..self.axes).map(|d| r[d] * dy[d]).sum();
        for d in 0..self.axes {
            let f = self.coulomb * (dy[d] / r3 - 3.0 * r[d] * rdy / (r3 * norm * norm));
            out[self.index(1, d)] += f;
            out[self.index(0, d)] -= f;
        }
    }


    /// Total energy for a static trap (`q = 0`), which the flow conserves.
    pub fn energy(&self, x: &[f64], v: &[f64]) -> f64 {
        let k = self.stiffness(0.0);
        let mut e = 0.0;
        for i in 0..2 {
            for d in 0..self.axes {
                let n = self.index(i, d);
                let u = x[n];
                e += 0.5 * v[n] * v[n] + 0.5 * k[i][d] * u * u;
            }
        }
        if self.coulomb != 0.0 {
            e += self.coulomb / self.separation(x).1;
        }
        e
    }

    /// Reference state at `tau`: the periodic crystal at rest in the
    /// secular frame.
    fn reference_state(&self, trap: &Trap, tau: f64) -> Result<(Vec<f64>, Vec<f64>), OracleError> {
        let n = 2 * self.axes;
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; n];
        match trap {
            Trap::Microtrap(_) => {
                let crystal = find_periodic_crystal(trap)?;
                let th = self.rf_phase(tau);
                let pos = crystal.position(th);
                let vel = crystal.velocity(th);
                for i in 0..2 {
                    x[i] = pos[i];
                    v[i] = vel[i] * 4.0 * PI / self.beta;
                }
            }
            Trap::Paul(_) => {
                x[self.index(0, 1)] = -0.5;
                x[self.index(1, 1)] = 0.5;
            }
        }
        Ok((x, v))
    }
}

impl Dynamics for IonSystem {
    fn dim(&self) -> usize {
        2 * self.axes
    }

    fn accel(&self, tau: f64, x: &[f64], out: &mut [f64]) {
        let k = self.stiffness(tau);
        for i in 0..2 {
            for d in 0..self.axes {
                out[self.index(i, d)] = -k[i][d] * x[self.index(i, d)];
            }
        }
        if self.coulomb == 0.0 {
            return;
        }
        let (r, norm) = self.separation(x);
        let r3 = norm.powi(3);
        for (d, rd) in r.iter().enumerate().take(self.axes) {
            let f = self.coulomb * rd / r3;
            out[self.index(1, d)] += f;
            out[self.index(0, d)] -= f;
        }
    }
}

/// The reference crystal carried alongside copies that are either full
/// trajectories or tangent vectors.
struct Lockstep<'a> {
    sys: &'a IonSystem,
    copies: usize,
    tangent: bool,
}

impl Dynamics for Lockstep<'_> {
    fn dim(&self) -> usize {
        self.sys.dim() * (1 + self.copies)
    }

    fn accel(&self, tau: f64, x: &[f64], out: &mut [f64]) {
        let n = self.sys.dim();
        let (x_ref, rest) = x.split_at(n);
        let (o_ref, o_rest) = out.split_at_mut(n);
        self.sys.accel(tau, x_ref, o_ref);
        for (y, o) in rest.chunks(n).zip(o_rest.chunks_mut(n)) {
            if self.tangent {
                self.sys.tangent(tau, x_ref, y, o);
            } else {
                self.sys.accel(tau, y, o);
            }
        }
    }
}

fn step_limit(sys: &IonSystem, cfg: &OracleConfig) -> f64 {
    (sys.rf_period() / cfg.steps_per_rf as f64).min(cfg.max_step)
}

/// Merge coincident impulses and order them in time.
fn merged(seq: &ImpulseSequence) -> Vec<Impulse> {
    let mut out: Vec<Impulse> = Vec::new();
    for k in seq.sorted() {
        match out.last_mut() {
            Some(last) if last.time == k.time => last.count += k.count,
            _ => out.push(k),
        }
    }
    out
}

/// One recorded state; positions and velocities along the gate axis are
/// displacements from the unkicked crystal, scaled to physical kicks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub basis_state: BasisState,
    /// Physical velocity change per unit kick, in length units per secular period.
    pub kick_velocity: f64,
    pub samples: Vec<TrajectorySample>,
    /// Kicked-minus-reference state just after each kick, per unit kick
    /// velocity: `(time, x, v)` over all coordinates.
    #[serde(skip)]
    kick_states: Vec<(f64, Vec<f64>, Vec<f64>)>,
    /// Kick work `sum_k dv_k . dx(t_k)`, per unit kick velocity squared.
    pub kick_work: f64,
}

/// Physical velocity change of one pulse pair in dimensionless units,
/// `8 pi eta x0 / L` with `x0 = sqrt(hbar / (2 M omega))`.
pub fn physical_kick_velocity(trap: &Trap, eta: f64) -> Result<f64, OracleError> {
    let omega = trap.secular_omega()?;
    let x0 = (HBAR / (2.0 * trap.ion_mass() * omega)).sqrt();
    Ok(8.0 * PI * eta * x0 / trap.length_unit()?)
}

/// Integrate one basis state through the impulse sequence.
pub fn integrate_trajectories(
    trap: &Trap,
    seq: &ImpulseSequence,
    basis_state: BasisState,
    cfg: &OracleConfig,
) -> Result<Trajectory, OracleError> {
    cfg.validate()?;
    let sys = IonSystem::new(trap, seq.phi_rf)?;
    let kicks = merged(seq);
    let kick_velocity = physical_kick_velocity(trap, cfg.eta)?;
    let n = sys.dim();
    let spins = basis_state.spins();
    let mut out = Trajectory {
        basis_state,
        kick_velocity,
        samples: Vec::new(),
        kick_states: Vec::new(),
        kick_work: 0.0,
    };
    let Some(first) = kicks.first() else {
        return Ok(out);
    };
    let t0 = first.time;
    let (xr, vr) = sys.reference_state(trap, t0)?;
    let mut x = [xr.clone(), xr].concat();
    let mut v = [vr.clone(), vr].concat();
    let lock = Lockstep {
        sys: &sys,
        copies: 1,
        tangent: false,
    };
    let mut yos = Yoshida6::new(2 * n);
    let h_max = step_limit(&sys, cfg);
    let scale = kick_velocity / cfg.kick_scale;
    let ka = 0;
    let record = |t: f64, x: &[f64], v: &[f64], out: &mut Trajectory| -> Result<(), OracleError> {
        let mut s = TrajectorySample {
            time: t,
            position: [0.0; 2],
            velocity: [0.0; 2],
        };
        for i in 0..2 {
            let m = sys.index(i, ka);
            s.position[i] = (x[n + m] - x[m]) * scale;
            s.velocity[i] = (v[n + m] - v[m]) * scale;
            if !s.position[i].is_finite() || !x[m].is_finite() {
                return Err(OracleError::StepFailure { time: t });
            }
            if s.position[i].abs() > ESCAPE_BOUND {
                return Err(OracleError::EscapedIon {
                    ion: i,
                    time: t,
                    displacement: s.position[i].abs(),
                });
            }
        }
        out.samples.push(s);
        Ok(())
    };
    let mut t = t0;
    for (idx, k) in kicks.iter().enumerate() {
        if k.time > t {
            let steps = step_count(k.time - t, h_max);
            let h = (k.time - t) / steps as f64;
            let start = t;
            for s in 0..steps {
                yos.step(&lock, &mut t, &mut x, &mut v, h);
                t = if s + 1 == steps { k.time } else { start + h * (s + 1) as f64 };
                if s + 1 < steps {
                    record(t, &x, &v, &mut out)?;
                }
            }
        }
        // work done by the kick against the motion from earlier kicks
        let mut dx = vec![0.0; n];
        for (m, d) in dx.iter_mut().enumerate() {
            *d = (x[n + m] - x[m]) / cfg.kick_scale;
        }
        for i in 0..2 {
            let m = sys.index(i, ka);
            out.kick_work += k.count * spins[i] * dx[m];
            v[n + m] += cfg.kick_scale * k.count * spins[i];
        }
        let dv: Vec<f64> = (0..n).map(|m| (v[n + m] - v[m]) / cfg.kick_scale).collect();
        out.kick_states.push((k.time, dx, dv));
        record(t, &x, &v, &mut out)?;
        if idx + 1 == kicks.len() {
            break;
        }
    }
    Ok(out)
}

/// Symplectic form `x_a . v_b - v_a . x_b` on complex phase-space vectors.
fn omega_form(ax: &[Complex64], av: &[Complex64], bx: &[Complex64], bv: &[Complex64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for m in 0..ax.len() {
        s += ax[m] * bv[m] - av[m] * bx[m];
    }
    s
}

/// One Floquet mode of the crystal along the gate axis, tracked through the
/// gate as a complex solution of the linearised equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericMode {
    /// `omega_p / omega` from the monodromy eigenvalue.
    pub freq_ratio: f64,
    /// Ion participation along the gate axis, unit norm, `b^1 >= 0`.
    pub coupling: [f64; 2],
    /// `Im Omega(U*, U) / 2`, the conserved normalisation of the solution.
    pub invariant: f64,
    /// Solution `(tau, x, v)` at each kick time.
    #[serde(skip)]
    samples: Vec<(f64, Vec<Complex64>, Vec<Complex64>)>,
}

fn monodromy(sys: &IonSystem, trap: &Trap, t0: f64, cfg: &OracleConfig) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>), OracleError> {
    let n = sys.dim();
    let (xr, vr) = sys.reference_state(trap, t0)?;
    let mut x = xr.clone();
    let mut v = vr.clone();
    for j in 0..2 * n {
        let mut tx = vec![0.0; n];
        let mut tv = vec![0.0; n];
        if j < n {
            tx[j] = 1.0;
        } else {
            tv[j - n] = 1.0;
        }
        x.extend(tx);
        v.extend(tv);
    }
    let lock = Lockstep {
        sys,
        copies: 2 * n,
        tangent: true,
    };
    let mut yos = Yoshida6::new(lock.dim());
    let period = sys.rf_period();
    yos.advance(&lock, t0, t0 + period, &mut x, &mut v, step_limit(sys, cfg));
    let m = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let base = n * (1 + c);
        if r < n {
            x[base + r]
        } else {
            v[base + r - n]
        }
    });
    if m.iter().any(|e| !e.is_finite()) {
        return Err(OracleError::StepFailure { time: t0 + period });
    }
    Ok((m, xr, vr))
}

/// Null vector of `M - lambda I` by complex SVD.
fn eigenvector(m: &DMatrix<f64>, lambda: Complex64) -> DVector<Complex64> {
    let n = m.nrows();
    let a = DMatrix::from_fn(n, n, |r, c| {
        Complex64::new(m[(r, c)], 0.0) - if r == c { lambda } else { Complex64::new(0.0, 0.0) }
    });
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    DVector::from_iterator(n, vt.row(k).iter().map(|z| z.conj()))
}

/// Floquet modes along the gate axis for a sequence starting at `t0` and
/// sampled at `times`.
pub fn numeric_modes(trap: &Trap, phi_rf: f64, t0: f64, times: &[f64], cfg: &OracleConfig) -> Result<Vec<NumericMode>, OracleError> {
    let sys = IonSystem::new(trap, phi_rf)?;
    let n = sys.dim();
    let (m, xr, vr) = monodromy(&sys, trap, t0, cfg)?;
    let eig = m.complex_eigenvalues();
    // one eigenvalue per conjugate pair, then pick the gate-axis modes
    let upper: Vec<Complex64> = eig.iter().copied().filter(|l| l.im > 0.0).collect();
    for (i, a) in upper.iter().enumerate() {
        if upper[i + 1..].iter().any(|b| (a - b).norm() < 1e-10) {
            return Err(OracleError::Floquet("degenerate modes; the mode basis is not unique".into()));
        }
    }
    let mut cands: Vec<(f64, DVector<Complex64>)> = Vec::new();
    for lam in eig.iter() {
        if lam.im <= 0.0 {
            continue;
        }
        if (lam.norm() - 1.0).abs() > 1e-6 {
            return Err(OracleError::Floquet(format!("monodromy eigenvalue {lam} off the unit circle")));
        }
        let u = eigenvector(&m, *lam);
        let axis_weight: f64 = (0..2).map(|i| u[sys.index(i, 0)].norm_sqr()).sum();
        let total: f64 = (0..n).map(|j| u[j].norm_sqr()).sum();
        cands.push((axis_weight / total.max(1e-300), u));
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    if cands.len() < 2 || cands[1].0 < 0.5 {
        return Err(OracleError::Floquet("gate-axis modes not found".into()));
    }
    cands.truncate(2);
    let period = sys.rf_period();
    let mut modes = Vec::new();
    for (_, u) in cands {
        let ux: Vec<Complex64> = (0..n).map(|j| u[j]).collect();
        let uv: Vec<Complex64> = (0..n).map(|j| u[n + j]).collect();
        let conj = |z: &[Complex64]| z.iter().map(|c| c.conj()).collect::<Vec<_>>();
        let mut inv = (omega_form(&conj(&ux), &conj(&uv), &ux, &uv) / Complex64::new(0.0, 2.0)).re;
        let (ux, uv) = if inv < 0.0 {
            inv = -inv;
            (conj(&ux), conj(&uv))
        } else {
            (ux, uv)
        };
        let lam = (m.clone().map(|e| Complex64::new(e, 0.0)) * DVector::from_iterator(2 * n, ux.iter().chain(uv.iter()).copied()))
            .dot(&DVector::from_iterator(2 * n, ux.iter().chain(uv.iter()).map(|c| c.conj())))
            / (ux.iter().chain(uv.iter()).map(|c| c.norm_sqr()).sum::<f64>());
        let mut arg = lam.arg();
        if arg < 0.0 {
            arg += 2.0 * PI;
        }
        // the argument fixes omega_p modulo the RF frequency; pick the branch
        // nearest the COM secular frequency
        let rf_ratio = 1.0 / period;
        let base = arg / (2.0 * PI * period);
        let k = ((1.0 - base) / rf_ratio).round();
        let freq_ratio = (base + k * rf_ratio).abs();
        let phase = ux[sys.index(0, 0)].arg();
        let rot = Complex64::from_polar(1.0, -phase);
        let mut b = [(ux[sys.index(0, 0)] * rot).re, (ux[sys.index(1, 0)] * rot).re];
        let norm = (b[0] * b[0] + b[1] * b[1]).sqrt();
        b = [b[0] / norm, b[1] / norm];
        modes.push((freq_ratio, b, inv, ux, uv));
    }
    modes.sort_by(|a, b| {
        let com = |m: &(f64, [f64; 2], f64, Vec<Complex64>, Vec<Complex64>)| m.1[0] * m.1[1] < 0.0;
        com(a).cmp(&com(b))
    });
    // propagate each mode through the gate as real and imaginary tangents
    let copies = 2 * modes.len();
    let mut x = xr.clone();
    let mut v = vr.clone();
    for md in &modes {
        x.extend(md.3.iter().map(|c| c.re));
        v.extend(md.4.iter().map(|c| c.re));
        x.extend(md.3.iter().map(|c| c.im));
        v.extend(md.4.iter().map(|c| c.im));
    }
    let lock = Lockstep {
        sys: &sys,
        copies,
        tangent: true,
    };
    let mut yos = Yoshida6::new(lock.dim());
    let h_max = step_limit(&sys, cfg);
    let mut out: Vec<NumericMode> = modes
        .iter()
        .map(|md| NumericMode {
            freq_ratio: md.0,
            coupling: md.1,
            invariant: md.2,
            samples: Vec::with_capacity(times.len()),
        })
        .collect();
    let mut t = t0;
    for &target in times {
        yos.advance(&lock, t, target, &mut x, &mut v, h_max);
        t = target;
        for (p, md) in out.iter_mut().enumerate() {
            let re = n * (1 + 2 * p);
            let im = n * (2 + 2 * p);
            let ux: Vec<Complex64> = (0..n).map(|j| Complex64::new(x[re + j], x[im + j])).collect();
            let uv: Vec<Complex64> = (0..n).map(|j| Complex64::new(v[re + j], v[im + j])).collect();
            md.samples.push((t, ux, uv));
        }
    }
    Ok(out)
}

/// Geometric phase and residual displacement for one basis state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricPhaseResult {
    pub basis_state: BasisState,
    /// Phase from the signed area enclosed in each mode's phase space.
    pub phase: f64,
    /// Phase from the work done by the kicks, an independent route.
    pub work_phase: f64,
    /// Distance of each mode from the origin at the end of the gate.
    pub mode_displacements: Vec<f64>,
}

/// Geometric phase of one basis-state trajectory.
pub fn geometric_phase(traj: &Trajectory, modes: &[NumericMode], cfg: &OracleConfig) -> GeometricPhaseResult {
    let eta2 = cfg.eta * cfg.eta;
    let mut area = 0.0;
    let mut disp = Vec::with_capacity(modes.len());
    for md in modes {
        // amplitude of the mode after each kick, constant between kicks
        let mut prev = Complex64::new(0.0, 0.0);
        let mut enclosed = 0.0;
        for ((_, dx, dv), (_, ux, uv)) in traj.kick_states.iter().zip(&md.samples) {
            let dxc: Vec<Complex64> = dx.iter().map(|&r| Complex64::new(r, 0.0)).collect();
            let dvc: Vec<Complex64> = dv.iter().map(|&r| Complex64::new(r, 0.0)).collect();
            let uxc: Vec<Complex64> = ux.iter().map(|c| c.conj()).collect();
            let uvc: Vec<Complex64> = uv.iter().map(|c| c.conj()).collect();
            let alpha = omega_form(&uxc, &uvc, &dxc, &dvc);
            enclosed += (prev.conj() * alpha).im;
            prev = alpha;
        }
        area -= enclosed / md.invariant;
        let e = prev.norm() / md.invariant.sqrt();
        disp.push(2.0 * (2.0 * PI).sqrt() * e);
    }
    GeometricPhaseResult {
        basis_state: traj.basis_state,
        phase: 16.0 * PI * eta2 * area,
        work_phase: 16.0 * PI * eta2 * traj.kick_work,
        mode_displacements: disp,
    }
}

/// Oracle evaluation of a gate over all four basis states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub states: Vec<GeometricPhaseResult>,
    pub modes: Vec<NumericMode>,
    /// Relative phase `(phi_uu + phi_dd - phi_ud - phi_du) / 4`.
    pub signed_phase: f64,
    pub phase_error: f64,
    /// Per-mode displacement averaged over the basis states.
    pub mode_displacements: Vec<f64>,
    pub report: FidelityReport,
}

/// Combine basis-state results into the gate's phase, displacements and
/// full infidelity.
pub fn oracle_infidelity(states: &[GeometricPhaseResult], modes: &[NumericMode], thermal: &ThermalState) -> OracleResult {
    let mut phase = 0.0;
    let p = modes.len();
    let mut msq = vec![0.0; p];
    for s in states {
        let sp = s.basis_state.spins();
        phase += 0.25 * sp[0] * sp[1] * s.phase;
        for (acc, d) in msq.iter_mut().zip(&s.mode_displacements) {
            *acc += d * d / states.len().max(1) as f64;
        }
    }
    let disp: Vec<f64> = msq.iter().map(|v| v.sqrt()).collect();
    let couplings: Vec<[f64; 2]> = modes.iter().map(|m| m.coupling).collect();
    let phase_error = phase.abs() - FRAC_PI_4;
    let mut report = infidelity_from_parts(phase_error, &disp, &couplings, thermal);
    report.infidelity = report.full_infidelity;
    report.source = FidelitySource::Oracle;
    OracleResult {
        states: states.to_vec(),
        modes: modes.to_vec(),
        signed_phase: phase,
        phase_error,
        mode_displacements: disp,
        report,
    }
}

/// Integrate all four basis states and evaluate the gate.
pub fn run_oracle(trap: &Trap, seq: &ImpulseSequence, thermal: &ThermalState, cfg: &OracleConfig) -> Result<(OracleResult, Vec<Trajectory>), OracleError> {
    cfg.validate()?;
    let kicks = merged(seq);
    let t0 = kicks.first().map(|k| k.time).unwrap_or(0.0);
    let times: Vec<f64> = kicks.iter().map(|k| k.time).collect();
    let modes = numeric_modes(trap, seq.phi_rf, t0, &times, cfg)?;
    let run = |b: &BasisState| integrate_trajectories(trap, seq, *b, cfg);
    #[cfg(feature = "parallel")]
    let trajs: Result<Vec<Trajectory>, OracleError> = BasisState::ALL.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let trajs: Result<Vec<Trajectory>, OracleError> = BasisState::ALL.iter().map(run).collect();
    let trajs = trajs?;
    let states: Vec<GeometricPhaseResult> = trajs.iter().map(|t| geometric_phase(t, &modes, cfg)).collect();
    Ok((oracle_infidelity(&states, &modes, thermal), trajs))
}

/// Boxcar average of a sampled signal over a window of `width`, evaluated
/// at each sample time with the trapezoidal rule.
pub fn boxcar_average(times: &[f64], values: &[f64], width: f64) -> Vec<f64> {
    let n = times.len();
    let mut out = Vec::with_capacity(n);
    let mut lo = 0;
    let mut hi = 0;
    for i in 0..n {
        let (a, b) = (times[i] - 0.5 * width, times[i] + 0.5 * width);
        while lo < n && times[lo] < a {
            lo += 1;
        }
        while hi + 1 < n && times[hi + 1] <= b {
            hi += 1;
        }
        let mut area = 0.0;
        let mut span = 0.0;
        for k in lo..hi {
            let dt = times[k + 1] - times[k];
            area += 0.5 * (values[k] + values[k + 1]) * dt;
            span += dt;
        }
        out.push(if span > 0.0 { area / span } else { values[i] });
    }
    out
}

/// Columnar export row: the raw sample plus micromotion-averaged mode
/// projections `(X_p, V_p)` onto each mode's ion participation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub time: f64,
    pub x1: f64,
    pub v1: f64,
    pub x2: f64,
    pub v2: f64,
    pub mode_x: Vec<f64>,
    pub mode_v: Vec<f64>,
}

pub fn export_rows(traj: &Trajectory, couplings: &[[f64; 2]], rf_period: f64) -> Vec<ExportRow> {
    let times: Vec<f64> = traj.samples.iter().map(|s| s.time).collect();
    let proj = |b: [f64; 2], f: &dyn Fn(&TrajectorySample) -> [f64; 2]| -> Vec<f64> {
        let raw: Vec<f64> = traj
            .samples
            .iter()
            .map(|s| {
                let y = f(s);
                b[0] * y[0] + b[1] * y[1]
            })
            .collect();
        boxcar_average(&times, &raw, rf_period)
    };
    let xs: Vec<Vec<f64>> = couplings.iter().map(|b| proj(*b, &|s| s.position)).collect();
    let vs: Vec<Vec<f64>> = couplings.iter().map(|b| proj(*b, &|s| s.velocity)).collect();
    traj.samples
        .iter()
        .enumerate()
        .map(|(i, s)| ExportRow {
            time: s.time,
            x1: s.position[0],
            v1: s.velocity[0],
            x2: s.position[1],
            v2: s.velocity[1],
            mode_x: xs.iter().map(|c| c[i]).collect(),
            mode_v: vs.iter().map(|c| c[i]).collect(),
        })
        .collect()
}
