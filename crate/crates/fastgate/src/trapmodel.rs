//! Trap geometries, two-ion crystals and their normal modes.
//!
//! Dynamics are expressed in dimensionless form: time `tau` in units of the
//! COM secular period `2 pi / omega`, and lengths in a trap-specific unit
//! (the microtrap separation `d`, or the equilibrium ion spacing in a Paul
//! trap). The RF phase at time `tau` is `theta = 4 pi tau / beta + theta_0`.

use crate::integrate::{Dynamics, Yoshida6};
use crate::mathieu::{
    characteristic_exponent, floquet_solution, FloquetSolution, MathieuError, MathieuParams,
    ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE,
};
use crate::quadrature::{self, QuadratureFailure};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use thiserror::Error;

/// Vacuum permittivity in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Mass of a 40Ca+ ion in kg.
pub const CA40_MASS: f64 = 39.9626 * ATOMIC_MASS_UNIT;

/// Crystal coefficients are converged when successive iterates differ by
/// less than this fraction of the static displacement.
pub const CRYSTAL_TOL: f64 = 1e-12;
const CRYSTAL_MAX_ITER: usize = 400;
const CRYSTAL_SAMPLES: usize = 64;
const CRYSTAL_STEPS_PER_SAMPLE: usize = 4;
const CRYSTAL_HARMONICS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrapError {
    #[error(transparent)]
    Mathieu(#[from] MathieuError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureFailure),
    #[error("no static equilibrium found")]
    NoEquilibrium,
    #[error("periodic crystal did not converge after {iterations} iterations (last change {change:e})")]
    ResonantCrystal { iterations: usize, change: f64 },
    #[error("gate operations need exactly two ions, got {0}")]
    UnsupportedIonCount(usize),
    #[error("invalid trap: {0}")]
    Invalid(String),
}

/// Coulomb constant `e^2 / (4 pi eps0 M)` in m^3/s^2.
pub fn coulomb_constant(ion_mass: f64) -> f64 {
    ELEMENTARY_CHARGE.powi(2) / (4.0 * PI * VACUUM_PERMITTIVITY * ion_mass)
}

/// Dimensionless trap strength `xi = d^3 omega^2 / alpha`.
pub fn xi_param(separation: f64, secular_omega: f64, ion_mass: f64) -> f64 {
    separation.powi(3) * secular_omega.powi(2) / coulomb_constant(ion_mass)
}

/// Fractional breathing-mode splitting of two ions in neighbouring
/// harmonic microtraps.
pub fn chi_microtrap(xi: f64) -> f64 {
    let root = 3f64.sqrt() * (27.0 + 2.0 * xi).sqrt();
    let b = 9.0 - root;
    let g = 1.0 + 3.0 * (9.0 + root) / xi;
    // b (g^(2/3) - g^(1/3)) suffers cancellation at large xi
    let c = g.cbrt();
    let diff = c * (g - 1.0) / (c * c + c + 1.0);
    ((9.0 + b * diff) / 3.0).sqrt() - 1.0
}

/// Logarithmic sensitivities `(d ln chi / d ln d, d ln chi / d ln omega)`.
pub fn chi_sensitivity(separation: f64, secular_omega: f64, ion_mass: f64) -> (f64, f64) {
    let h = 1e-6;
    let f = |d: f64, w: f64| chi_microtrap(xi_param(d, w, ion_mass)).ln();
    let dd = (f(separation * (1.0 + h), secular_omega) - f(separation * (1.0 - h), secular_omega))
        / ((1.0 + h).ln() - (1.0 - h).ln());
    let dw = (f(separation, secular_omega * (1.0 + h)) - f(separation, secular_omega * (1.0 - h)))
        / ((1.0 + h).ln() - (1.0 - h).ln());
    (dd, dw)
}

/// Two ions in neighbouring RF microtraps, kicked along the array axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrotrapArray {
    /// Trap separation `d` in m.
    pub separation: f64,
    pub mathieu: MathieuParams,
    pub rf_angular_frequency: f64,
    pub ion_mass: f64,
    pub ion_count: usize,
    /// Disables the Coulomb interaction; used to isolate single-ion physics.
    pub coulomb: bool,
    /// Additive shift of `a` for each trap, modelling a local stray field.
    pub static_offsets: [f64; 2],
}

impl MicrotrapArray {
    /// Array with the given COM secular frequency; the RF frequency follows
    /// from `omega = beta omega_rf / 2`.
    pub fn from_secular(
        separation: f64,
        secular_omega: f64,
        mathieu: MathieuParams,
        ion_mass: f64,
    ) -> Result<Self, TrapError> {
        let beta = characteristic_exponent(mathieu)?;
        Ok(MicrotrapArray {
            separation,
            mathieu,
            rf_angular_frequency: 2.0 * secular_omega / beta,
            ion_mass,
            ion_count: 2,
            coulomb: true,
            static_offsets: [0.0, 0.0],
        })
    }

    pub fn xi(&self) -> Result<f64, TrapError> {
        let omega = Trap::Microtrap(self.clone()).secular_omega()?;
        Ok(xi_param(self.separation, omega, self.ion_mass))
    }
}

/// Two ions in a linear Paul trap, kicked along a radial axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaulTrap {
    /// Radial Mathieu parameters.
    pub mathieu: MathieuParams,
    /// Ratio of axial to radial secular frequency.
    pub kappa: f64,
    pub rf_angular_frequency: f64,
    pub ion_mass: f64,
    pub ion_count: usize,
    pub coulomb: bool,
}

impl PaulTrap {
    pub fn from_secular(
        secular_omega: f64,
        mathieu: MathieuParams,
        kappa: f64,
        ion_mass: f64,
    ) -> Result<Self, TrapError> {
        let beta = characteristic_exponent(mathieu)?;
        Ok(PaulTrap {
            mathieu,
            kappa,
            rf_angular_frequency: 2.0 * secular_omega / beta,
            ion_mass,
            ion_count: 2,
            coulomb: true,
        })
    }

    /// Axial Mathieu parameter `a_z = kappa^2 beta^2` (no axial RF).
    pub fn axial_a(&self) -> Result<f64, TrapError> {
        let beta = characteristic_exponent(self.mathieu)?;
        Ok((self.kappa * beta).powi(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trap {
    Microtrap(MicrotrapArray),
    Paul(PaulTrap),
}

impl Trap {
    pub fn mathieu(&self) -> MathieuParams {
        match self {
            Trap::Microtrap(m) => m.mathieu,
            Trap::Paul(p) => p.mathieu,
        }
    }

    pub fn rf_angular_frequency(&self) -> f64 {
        match self {
            Trap::Microtrap(m) => m.rf_angular_frequency,
            Trap::Paul(p) => p.rf_angular_frequency,
        }
    }

    pub fn ion_mass(&self) -> f64 {
        match self {
            Trap::Microtrap(m) => m.ion_mass,
            Trap::Paul(p) => p.ion_mass,
        }
    }

    pub fn ion_count(&self) -> usize {
        match self {
            Trap::Microtrap(m) => m.ion_count,
            Trap::Paul(p) => p.ion_count,
        }
    }

    pub fn coulomb(&self) -> bool {
        match self {
            Trap::Microtrap(m) => m.coulomb,
            Trap::Paul(p) => p.coulomb,
        }
    }

    pub fn beta(&self) -> Result<f64, TrapError> {
        Ok(characteristic_exponent(self.mathieu())?)
    }

    /// COM secular angular frequency `beta omega_rf / 2`.
    pub fn secular_omega(&self) -> Result<f64, TrapError> {
        Ok(0.5 * self.beta()? * self.rf_angular_frequency())
    }

    /// Same trap with new Mathieu parameters, keeping the secular frequency
    /// and geometry fixed (the RF frequency is adjusted).
    pub fn with_mathieu(&self, mathieu: MathieuParams) -> Result<Trap, TrapError> {
        let omega = self.secular_omega()?;
        let beta = characteristic_exponent(mathieu)?;
        let rf = 2.0 * omega / beta;
        Ok(match self {
            Trap::Microtrap(m) => Trap::Microtrap(MicrotrapArray {
                mathieu,
                rf_angular_frequency: rf,
                ..m.clone()
            }),
            Trap::Paul(p) => Trap::Paul(PaulTrap {
                mathieu,
                rf_angular_frequency: rf,
                ..p.clone()
            }),
        })
    }

    /// Harmonic counterpart with no RF (q = 0) at the same secular frequency.
    /// A small `beta` is kept so that time steps stay tied to a nominal RF
    /// period.
    pub fn harmonic(&self) -> Result<Trap, TrapError> {
        let beta = self.beta()?;
        self.with_mathieu(MathieuParams::new(beta * beta, 0.0))
    }

    /// Harmonic counterpart with the same normal-mode frequencies along the
    /// gate axis: the microtrap separation or the Paul-trap axial ratio is
    /// retuned so that the mode splitting is preserved without RF.
    pub fn equivalent_harmonic(&self) -> Result<Trap, TrapError> {
        let spectrum = mode_spectrum(self)?;
        let ratio = spectrum.modes[1].freq_ratio;
        let harmonic = self.harmonic()?;
        Ok(match harmonic {
            Trap::Paul(mut p) => {
                let k2 = 1.0 - ratio * ratio;
                if !(k2 > 0.0) {
                    return Err(TrapError::Invalid(format!("rocking ratio {ratio} has no harmonic match")));
                }
                p.kappa = k2.sqrt();
                Trap::Paul(p)
            }
            Trap::Microtrap(mut m) => {
                if !m.coulomb {
                    return Ok(Trap::Microtrap(m));
                }
                let target = ratio - 1.0;
                let omega = spectrum.secular_omega;
                // chi falls monotonically with xi; bisect in log xi
                let xi0 = m.xi()?;
                let (mut lo, mut hi) = (xi0.ln() - 20.0, xi0.ln() + 20.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if chi_microtrap(mid.exp()) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let xi = (0.5 * (lo + hi)).exp();
                m.separation = (xi * coulomb_constant(m.ion_mass) / (omega * omega)).cbrt();
                Trap::Microtrap(m)
            }
        })
    }

    fn check_two_ions(&self) -> Result<(), TrapError> {
        match self.ion_count() {
            2 => Ok(()),
            n => Err(TrapError::UnsupportedIonCount(n)),
        }
    }

    /// Per-ion Mathieu `a` along the kick axis.
    pub fn ion_a(&self) -> [f64; 2] {
        match self {
            Trap::Microtrap(m) => [
                m.mathieu.a + m.static_offsets[0],
                m.mathieu.a + m.static_offsets[1],
            ],
            Trap::Paul(p) => [p.mathieu.a; 2],
        }
    }

    /// Coulomb acceleration prefactor in dimensionless units.
    pub fn coulomb_strength(&self) -> Result<f64, TrapError> {
        if !self.coulomb() {
            return Ok(0.0);
        }
        Ok(match self {
            Trap::Microtrap(m) => (2.0 * PI).powi(2) / m.xi()?,
            Trap::Paul(p) => 0.5 * (2.0 * PI * p.kappa).powi(2),
        })
    }

    /// Length unit of the dimensionless dynamics in m.
    pub fn length_unit(&self) -> Result<f64, TrapError> {
        Ok(match self {
            Trap::Microtrap(m) => m.separation,
            Trap::Paul(p) => {
                let wa = p.kappa * self.secular_omega()?;
                (2.0 * coulomb_constant(p.ion_mass) / (wa * wa)).cbrt()
            }
        })
    }

    /// Static equilibrium in the time-averaged potential, as positions
    /// along the crystal axis in m relative to the trap centre.
    pub fn equilibrium_positions(&self) -> Result<Vec<f64>, TrapError> {
        self.check_two_ions()?;
        let ell = self.length_unit()?;
        match self {
            Trap::Microtrap(_) => {
                let x = self.static_displacements()?;
                Ok(vec![(-0.5 + x[0]) * ell, (0.5 + x[1]) * ell])
            }
            Trap::Paul(_) => Ok(vec![-0.5 * ell, 0.5 * ell]),
        }
    }

    /// Microtrap ion displacements from their trap centres, in units of `d`,
    /// in the time-averaged potential.
    pub fn static_displacements(&self) -> Result<[f64; 2], TrapError> {
        let c = self.coulomb_strength()?;
        let beta = self.beta()?;
        let q = self.mathieu().q;
        let mut k = [0.0; 2];
        for (ki, ai) in k.iter_mut().zip(self.ion_a()) {
            let bi = characteristic_exponent(MathieuParams::new(ai, q))?;
            *ki = (2.0 * PI * bi / beta).powi(2);
        }
        if c == 0.0 {
            return Ok([0.0, 0.0]);
        }
        // Newton on k_i x_i -/+ c / (1 + x2 - x1)^2 = 0
        let mut x = [-c / k[0], c / k[1]];
        for _ in 0..100 {
            let r = 1.0 + x[1] - x[0];
            let f = c / (r * r);
            let df = -2.0 * c / (r * r * r);
            let g = [k[0] * x[0] + f, k[1] * x[1] - f];
            // jacobian of g
            let j = [[k[0] - df, df], [df, k[1] - df]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                return Err(TrapError::NoEquilibrium);
            }
            let dx0 = (g[0] * j[1][1] - g[1] * j[0][1]) / det;
            let dx1 = (j[0][0] * g[1] - j[1][0] * g[0]) / det;
            x[0] -= dx0;
            x[1] -= dx1;
            if dx0.abs().max(dx1.abs()) <= 1e-17 * x[0].abs().max(x[1].abs()).max(1e-300) {
                break;
            }
        }
        if !(1.0 + x[1] - x[0] > 0.0) {
            return Err(TrapError::NoEquilibrium);
        }
        Ok(x)
    }
}

/// Time-periodic two-ion configuration, as Fourier series in the RF phase
/// `theta` for each ion's displacement from its trap centre. Lengths are in
/// units of `length_unit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCrystal {
    pub harmonics: usize,
    /// Cosine coefficients `u_{j,i}`, `j = 0..=harmonics`.
    pub cos: Vec<[f64; 2]>,
    /// Sine coefficients `w_{j,i}` (`w_0 = 0`).
    pub sin: Vec<[f64; 2]>,
    /// Length unit in m.
    pub length_unit: f64,
    pub iterations: usize,
    /// Maximum ODE residual relative to the Coulomb force scale.
    pub residual: f64,
}

impl PeriodicCrystal {
    pub fn position(&self, theta: f64) -> [f64; 2] {
        let mut x = self.cos[0];
        for j in 1..=self.harmonics {
            let (s, c) = (j as f64 * theta).sin_cos();
            for i in 0..2 {
                x[i] += self.cos[j][i] * c + self.sin[j][i] * s;
            }
        }
        x
    }

    /// Derivative with respect to theta.
    pub fn velocity(&self, theta: f64) -> [f64; 2] {
        let mut v = [0.0; 2];
        for j in 1..=self.harmonics {
            let jf = j as f64;
            let (s, c) = (jf * theta).sin_cos();
            for i in 0..2 {
                v[i] += jf * (-self.cos[j][i] * s + self.sin[j][i] * c);
            }
        }
        v
    }

    pub fn acceleration(&self, theta: f64) -> [f64; 2] {
        let mut a = [0.0; 2];
        for j in 1..=self.harmonics {
            let jf = j as f64;
            let (s, c) = (jf * theta).sin_cos();
            for i in 0..2 {
                a[i] -= jf * jf * (self.cos[j][i] * c + self.sin[j][i] * s);
            }
        }
        a
    }

    fn coefficient_vector(&self) -> Vec<f64> {
        self.cos
            .iter()
            .chain(self.sin.iter())
            .flat_map(|c| c.iter().copied())
            .collect()
    }
}

// Microtrap axial dynamics with theta as the independent variable.
struct CrystalDynamics {
    a: [f64; 2],
    q: f64,
    coulomb: f64,
}

impl CrystalDynamics {
    fn force(&self, theta: f64, x: &[f64]) -> ([f64; 2], f64) {
        let r = 1.0 + x[1] - x[0];
        let fc = self.coulomb / (r * r);
        let cq = 2.0 * self.q * theta.cos();
        (
            [
                -0.25 * (self.a[0] - cq) * x[0] - fc,
                -0.25 * (self.a[1] - cq) * x[1] + fc,
            ],
            fc,
        )
    }
}

impl Dynamics for CrystalDynamics {
    fn dim(&self) -> usize {
        2
    }
    fn accel(&self, theta: f64, x: &[f64], out: &mut [f64]) {
        let (f, _) = self.force(theta, x);
        out[0] = f[0];
        out[1] = f[1];
    }
}

/// Find the RF-periodic two-ion configuration by fixed-point iteration on
/// its Fourier coefficients, starting from the static equilibrium.
pub fn find_periodic_crystal(trap: &Trap) -> Result<PeriodicCrystal, TrapError> {
    trap.check_two_ions()?;
    let length_unit = trap.length_unit()?;
    let h = CRYSTAL_HARMONICS;
    let zero = PeriodicCrystal {
        harmonics: h,
        cos: vec![[0.0; 2]; h + 1],
        sin: vec![[0.0; 2]; h + 1],
        length_unit,
        iterations: 0,
        residual: 0.0,
    };
    let Trap::Microtrap(_) = trap else {
        // the radial crystal of a linear Paul trap sits on the RF null
        return Ok(zero);
    };
    let beta = trap.beta()?;
    let xs = trap.static_displacements()?;
    let mut crystal = zero;
    crystal.cos[0] = xs;
    let p = trap.mathieu();
    let sys = CrystalDynamics {
        a: trap.ion_a(),
        q: p.q,
        coulomb: trap.coulomb_strength()? * (beta / (4.0 * PI)).powi(2),
    };
    if p.q == 0.0 || sys.coulomb == 0.0 {
        crystal.residual = crystal_residual(&crystal, &sys);
        return Ok(crystal);
    }
    let scale = xs[0].abs().max(xs[1].abs());
    let periods = ((8.0 / beta).round() as usize).max(1);
    let n = periods * CRYSTAL_SAMPLES;
    let dtheta = 2.0 * PI / CRYSTAL_SAMPLES as f64;
    let mut yos = Yoshida6::new(2);
    let mut change = f64::INFINITY;
    for it in 1..=CRYSTAL_MAX_ITER {
        let mut x = crystal.position(0.0).to_vec();
        let mut v = crystal.velocity(0.0).to_vec();
        let mut cos_acc = vec![[0.0; 2]; h + 1];
        let mut sin_acc = vec![[0.0; 2]; h + 1];
        let mut theta = 0.0;
        for k in 0..n {
            let ph = k as f64 * dtheta;
            for j in 0..=h {
                let (s, c) = (j as f64 * ph).sin_cos();
                for i in 0..2 {
                    cos_acc[j][i] += x[i] * c;
                    sin_acc[j][i] += x[i] * s;
                }
            }
            for _ in 0..CRYSTAL_STEPS_PER_SAMPLE {
                yos.step(&sys, &mut theta, &mut x, &mut v, dtheta / CRYSTAL_STEPS_PER_SAMPLE as f64);
            }
            theta = (k + 1) as f64 * dtheta;
        }
        let old = crystal.coefficient_vector();
        for j in 0..=h {
            let norm = if j == 0 { 1.0 } else { 2.0 } / n as f64;
            for i in 0..2 {
                crystal.cos[j][i] = 0.5 * crystal.cos[j][i] + 0.5 * norm * cos_acc[j][i];
                crystal.sin[j][i] = if j == 0 {
                    0.0
                } else {
                    0.5 * crystal.sin[j][i] + 0.5 * norm * sin_acc[j][i]
                };
            }
        }
        change = crystal
            .coefficient_vector()
            .iter()
            .zip(&old)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        crystal.iterations = it;
        if change <= CRYSTAL_TOL * scale {
            crystal.residual = crystal_residual(&crystal, &sys);
            return Ok(crystal);
        }
    }
    Err(TrapError::ResonantCrystal {
        iterations: CRYSTAL_MAX_ITER,
        change,
    })
}

fn crystal_residual(crystal: &PeriodicCrystal, sys: &CrystalDynamics) -> f64 {
    let m = 512;
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for k in 0..m {
        let th = 2.0 * PI * k as f64 / m as f64;
        let x = crystal.position(th);
        let acc = crystal.acceleration(th);
        let (f, fc) = sys.force(th, &x);
        peak = peak.max(fc.abs());
        for i in 0..2 {
            worst = worst.max((acc[i] - f[i]).abs());
        }
    }
    if peak == 0.0 {
        worst
    } else {
        worst / peak
    }
}

/// Relative ODE residual of a crystal for the given trap.
pub fn crystal_ode_residual(trap: &Trap, crystal: &PeriodicCrystal) -> Result<f64, TrapError> {
    let beta = trap.beta()?;
    let sys = CrystalDynamics {
        a: trap.ion_a(),
        q: trap.mathieu().q,
        coulomb: trap.coulomb_strength()? * (beta / (4.0 * PI)).powi(2),
    };
    Ok(crystal_residual(crystal, &sys))
}

/// Breathing-mode curvature in Mathieu units along the crystal,
/// `K(theta) = 4 beta^2 / (xi (1 + r0(theta))^3)`.
pub fn breathing_curvature<'a>(trap: &Trap, crystal: &'a PeriodicCrystal) -> Result<impl Fn(f64) -> f64 + 'a, TrapError> {
    let beta = trap.beta()?;
    let c = trap.coulomb_strength()? * (beta / (2.0 * PI)).powi(2);
    Ok(move |theta: f64| {
        let x = crystal.position(theta);
        let r = 1.0 + x[1] - x[0];
        4.0 * c / (r * r * r)
    })
}

/// Fourier coefficients of the breathing-mode curvature: `h_0` is its mean
/// over one RF period, `h_j = (1/pi) int K cos(j theta)` for `j >= 1`.
pub fn hill_coefficients(trap: &Trap, crystal: &PeriodicCrystal, j_max: usize) -> Result<Vec<f64>, TrapError> {
    let k = breathing_curvature(trap, crystal)?;
    let scale = k(0.0).abs().max(1e-300);
    let mut out = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let jf = j as f64;
        let val = quadrature::integrate(|t| k(t) * (jf * t).cos(), 0.0, 2.0 * PI, 1e-13 * scale)?;
        out.push(if j == 0 { val / (2.0 * PI) } else { val / PI });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    CentreOfMass,
    Breathing,
    Rocking,
}

/// One motional mode along the kick axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub kind: ModeKind,
    pub mathieu: MathieuParams,
    pub beta: f64,
    /// `omega_p / omega` with omega the COM secular frequency.
    pub freq_ratio: f64,
    /// Angular frequency in rad/s.
    pub frequency: f64,
    /// Participation `b_p^i` of each ion.
    pub coupling: [f64; 2],
    pub floquet: FloquetSolution,
}

impl Mode {
    /// Micromotion enhancement factor for a kick at RF phase `phi`.
    pub fn mu(&self, phi: f64) -> Result<f64, MathieuError> {
        self.floquet.mu(phi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    /// COM characteristic exponent; sets the RF period `beta / 2` in tau.
    pub beta: f64,
    pub secular_omega: f64,
    pub modes: Vec<Mode>,
}

impl ModeSpectrum {
    /// Fractional splitting `omega_2 / omega_1 - 1`.
    pub fn chi(&self) -> f64 {
        self.modes[1].freq_ratio / self.modes[0].freq_ratio - 1.0
    }

    /// RF period in units of the secular period.
    pub fn rf_period(&self) -> f64 {
        0.5 * self.beta
    }
}

fn make_mode(kind: ModeKind, params: MathieuParams, beta_com: f64, omega: f64, coupling: [f64; 2]) -> Result<Mode, TrapError> {
    let floquet = floquet_solution(params)?;
    let beta = floquet.beta;
    Ok(Mode {
        kind,
        mathieu: params,
        beta,
        freq_ratio: beta / beta_com,
        frequency: omega * beta / beta_com,
        coupling,
        floquet,
    })
}

/// Normal modes of a symmetric two-ion system along the kick axis.
pub fn mode_spectrum(trap: &Trap) -> Result<ModeSpectrum, TrapError> {
    trap.check_two_ions()?;
    if let Trap::Microtrap(m) = trap {
        if m.static_offsets != [0.0, 0.0] {
            return Err(TrapError::Invalid(
                "mode spectrum needs identical traps; use the trajectory oracle".into(),
            ));
        }
    }
    let p = trap.mathieu();
    let beta = trap.beta()?;
    let omega = trap.secular_omega()?;
    let com = make_mode(
        ModeKind::CentreOfMass,
        p,
        beta,
        omega,
        [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
    )?;
    let (kind, second) = match trap {
        Trap::Microtrap(_) => {
            let params = if trap.coulomb() {
                let crystal = find_periodic_crystal(trap)?;
                let h = hill_coefficients(trap, &crystal, 1)?;
                MathieuParams::new(p.a + h[0], p.q - 0.5 * h[1])
            } else {
                p
            };
            (ModeKind::Breathing, params)
        }
        Trap::Paul(t) => {
            let shift = if trap.coulomb() { (t.kappa * beta).powi(2) } else { 0.0 };
            (ModeKind::Rocking, MathieuParams::new(p.a - shift, p.q))
        }
    };
    let other = make_mode(kind, second, beta, omega, [FRAC_1_SQRT_2, -FRAC_1_SQRT_2])?;
    Ok(ModeSpectrum {
        beta,
        secular_omega: omega,
        modes: vec![com, other],
    })
}
