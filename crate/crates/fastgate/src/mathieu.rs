//! Floquet analysis of the Mathieu equation `y'' + (a - 2q cos 2s) y = 0`.
//!
//! The characteristic exponent comes from the trace of the one-period
//! monodromy matrix, which stays well behaved across the whole first
//! stability region. The Fourier coefficients of the Floquet solution are
//! then obtained by solving the three-term recurrence with two-sided
//! truncation, and from them the micromotion enhancement factor `mu`.

use crate::integrate::{Dynamics, Yoshida6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Elementary charge in coulombs.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Atomic mass unit in kilograms.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Tolerance on `|trace| - 2` used to classify stability. Boundary points
/// are reported as unstable.
pub const STABILITY_EPS: f64 = 1e-9;

/// Relative size of the outermost retained coefficient above which a
/// truncation is rejected.
pub const TRUNCATION_TOL: f64 = 1e-6;

/// Harmonic cut-off tried first, and the one escalated to on failure.
pub const DEFAULT_HARMONICS: usize = 5;
pub const ESCALATED_HARMONICS: usize = 8;

const MONODROMY_STEPS: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathieuError {
    #[error("parameters (a = {a}, q = {q}) are outside the first stability region (trace = {trace})")]
    Unstable { a: f64, q: f64, trace: f64 },
    #[error("parameters (a = {a}, q = {q}) lie in a higher stability region")]
    HigherStabilityRegion { a: f64, q: f64 },
    #[error("Fourier series truncated at J = {harmonics} is insufficient (|C_J/C_0| = {ratio:e})")]
    TruncationInsufficient { harmonics: usize, ratio: f64 },
    #[error("coefficient recurrence is singular at j = {index}")]
    SingularRecurrence { index: i64 },
    #[error("micromotion denominator vanishes")]
    SingularDenominator,
    #[error("invalid drive: {0}")]
    InvalidDrive(String),
}

/// Dimensionless Mathieu parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MathieuParams {
    pub a: f64,
    pub q: f64,
}

impl MathieuParams {
    pub fn new(a: f64, q: f64) -> Self {
        MathieuParams { a, q }
    }
}

/// Physical description of an RF trap drive along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapDrive {
    pub charge_number: i32,
    /// Static potential curvature `U alpha` in V/m^2.
    pub static_voltage_term: f64,
    /// RF potential curvature `U~ alpha'` in V/m^2.
    pub dynamic_voltage_term: f64,
    /// Ion mass in kg.
    pub ion_mass: f64,
    /// RF angular frequency in rad/s.
    pub rf_angular_frequency: f64,
    /// RF phase in rad.
    pub rf_phase: f64,
}

/// Mathieu parameters together with the RF phase that goes with a
/// non-negative `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub params: MathieuParams,
    pub rf_phase: f64,
}

impl TrapDrive {
    /// Convert to Mathieu parameters. A negative `q` is reported by its
    /// magnitude with the RF phase advanced by pi.
    pub fn params(&self) -> Result<DriveParams, MathieuError> {
        if !(self.ion_mass > 0.0) {
            return Err(MathieuError::InvalidDrive("ion mass must be positive".into()));
        }
        if !(self.rf_angular_frequency > 0.0) {
            return Err(MathieuError::InvalidDrive(
                "RF frequency must be positive".into(),
            ));
        }
        if self.charge_number == 0 {
            return Err(MathieuError::InvalidDrive("charge number is zero".into()));
        }
        let scale = self.charge_number as f64 * ELEMENTARY_CHARGE
            / (self.ion_mass * self.rf_angular_frequency.powi(2));
        let a = 4.0 * scale * self.static_voltage_term;
        let q = -2.0 * scale * self.dynamic_voltage_term;
        let (q, rf_phase) = if q < 0.0 {
            (-q, (self.rf_phase + PI).rem_euclid(2.0 * PI))
        } else {
            (q, self.rf_phase)
        };
        Ok(DriveParams {
            params: MathieuParams { a, q },
            rf_phase,
        })
    }

    /// Drive that realises the given Mathieu parameters.
    pub fn for_params(
        params: MathieuParams,
        charge_number: i32,
        ion_mass: f64,
        rf_angular_frequency: f64,
        rf_phase: f64,
    ) -> Self {
        let scale =
            charge_number as f64 * ELEMENTARY_CHARGE / (ion_mass * rf_angular_frequency.powi(2));
        TrapDrive {
            charge_number,
            static_voltage_term: params.a / (4.0 * scale),
            dynamic_voltage_term: -params.q / (2.0 * scale),
            ion_mass,
            rf_angular_frequency,
            rf_phase,
        }
    }
}

struct Hill {
    a: f64,
    q: f64,
}

impl Dynamics for Hill {
    fn dim(&self) -> usize {
        2
    }
    fn accel(&self, s: f64, x: &[f64], out: &mut [f64]) {
        let k = self.a - 2.0 * self.q * (2.0 * s).cos();
        out[0] = -k * x[0];
        out[1] = -k * x[1];
    }
}

/// Trace of the monodromy matrix over one period `s in [0, pi]`.
pub fn monodromy_trace(p: MathieuParams) -> f64 {
    let sys = Hill { a: p.a, q: p.q };
    let mut x = [1.0, 0.0];
    let mut v = [0.0, 1.0];
    let mut yos = Yoshida6::new(2);
    yos.advance(&sys, 0.0, PI, &mut x, &mut v, PI / MONODROMY_STEPS as f64);
    x[0] + v[1]
}

fn exponent_from_trace(p: MathieuParams, trace: f64) -> Result<f64, MathieuError> {
    if !trace.is_finite() || trace.abs() >= 2.0 - STABILITY_EPS {
        return Err(MathieuError::Unstable {
            a: p.a,
            q: p.q,
            trace,
        });
    }
    let half = 0.5 * trace;
    // arccos loses precision near +1; use the half-angle form there
    let beta = if half > 0.5 {
        2.0 / PI * (0.5 * (1.0 - half)).sqrt().asin()
    } else {
        half.acos() / PI
    };
    Ok(beta)
}

/// Characteristic exponent `beta in (0, 1)` of the first stability region.
pub fn characteristic_exponent(p: MathieuParams) -> Result<f64, MathieuError> {
    if !p.a.is_finite() || !p.q.is_finite() {
        return Err(MathieuError::InvalidDrive("non-finite parameters".into()));
    }
    if p.q == 0.0 {
        if p.a <= 0.0 {
            return Err(MathieuError::Unstable {
                a: p.a,
                q: p.q,
                trace: 2.0 * (p.a.abs().sqrt() * PI).cosh(),
            });
        }
        let beta = p.a.sqrt();
        if beta >= 1.0 {
            return Err(MathieuError::HigherStabilityRegion { a: p.a, q: p.q });
        }
        return Ok(beta);
    }
    let beta = exponent_from_trace(p, monodromy_trace(p))?;
    // the trace fixes beta only modulo reflection; the first region is the
    // branch whose Floquet series is dominated by the central harmonic
    let sol = solve_coefficients(p, beta, ESCALATED_HARMONICS)?;
    if sol.iter().any(|c| c.abs() > 1.0) {
        return Err(MathieuError::HigherStabilityRegion { a: p.a, q: p.q });
    }
    Ok(beta)
}

/// Stability in the first region, i.e. whether a valid exponent exists.
pub fn is_stable(p: MathieuParams) -> bool {
    characteristic_exponent(p).is_ok()
}

// Coefficients C_{-J..=J} with C_0 = 1, from continued-fraction sweeps of
// the recurrence rows j != 0 with C_{+-(J+1)} = 0.
fn solve_coefficients(p: MathieuParams, beta: f64, harmonics: usize) -> Result<Vec<f64>, MathieuError> {
    let jmax = harmonics as i64;
    let mut c = vec![0.0; 2 * harmonics + 1];
    c[harmonics] = 1.0;
    if p.q == 0.0 {
        return Ok(c);
    }
    let d = |j: i64| (p.a - (2.0 * j as f64 + beta).powi(2)) / p.q;
    let mut up = vec![0.0; harmonics + 2];
    let mut down = vec![0.0; harmonics + 2];
    for j in (1..=jmax).rev() {
        let denom = d(j) - up[j as usize + 1];
        let denom_neg = d(-j) - down[j as usize + 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(MathieuError::SingularRecurrence { index: j });
        }
        if denom_neg == 0.0 || !denom_neg.is_finite() {
            return Err(MathieuError::SingularRecurrence { index: -j });
        }
        up[j as usize] = 1.0 / denom;
        down[j as usize] = 1.0 / denom_neg;
    }
    for j in 1..=harmonics {
        c[harmonics + j] = c[harmonics + j - 1] * up[j];
        c[harmonics - j] = c[harmonics - j + 1] * down[j];
    }
    Ok(c)
}

/// Floquet solution `u(s) = exp(i beta s) sum_j C_j exp(2 i j s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSolution {
    pub params: MathieuParams,
    pub beta: f64,
    pub harmonics: usize,
    /// `C_{-J}, ..., C_J`.
    pub coefficients: Vec<f64>,
}

impl FloquetSolution {
    /// Coefficient `C_j`, zero outside the retained range.
    pub fn coefficient(&self, j: i64) -> f64 {
        let idx = j + self.harmonics as i64;
        if idx < 0 || idx as usize >= self.coefficients.len() {
            0.0
        } else {
            self.coefficients[idx as usize]
        }
    }

    fn indexed(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let off = self.harmonics as i64;
        self.coefficients
            .iter()
            .enumerate()
            .map(move |(k, &c)| ((k as i64 - off) as f64, c))
    }

    /// Periodic factor `F(theta) = sum_j C_j exp(i j theta)`, where theta is
    /// the RF phase (`theta = 2 s`).
    pub fn periodic(&self, theta: f64) -> Complex64 {
        self.indexed()
            .map(|(j, c)| Complex64::from_polar(c, j * theta))
            .sum()
    }

    /// Derivative of `F` with respect to theta.
    pub fn periodic_derivative(&self, theta: f64) -> Complex64 {
        self.indexed()
            .map(|(j, c)| Complex64::new(0.0, j) * Complex64::from_polar(c, j * theta))
            .sum()
    }

    /// Wronskian-like invariant `Im(u* du/ds)`, equal to
    /// `beta sum C_j^2 + 2 sum j C_j^2` for real coefficients.
    pub fn wronskian(&self) -> f64 {
        self.indexed()
            .map(|(j, c)| (self.beta + 2.0 * j) * c * c)
            .sum()
    }

    /// Residual of the recurrence `q C_{j+1} - (a - (2j + beta)^2) C_j + q C_{j-1}`.
    pub fn recurrence_residual(&self, j: i64) -> f64 {
        let p = self.params;
        p.q * self.coefficient(j + 1) - (p.a - (2.0 * j as f64 + self.beta).powi(2)) * self.coefficient(j)
            + p.q * self.coefficient(j - 1)
    }

    /// Micromotion sums at RF phase `phi`.
    pub fn micromotion_sums(&self, phi: f64) -> MicromotionSums {
        micromotion_sums(self, phi)
    }

    /// Micromotion enhancement factor at RF phase `phi`.
    pub fn mu(&self, phi: f64) -> Result<f64, MathieuError> {
        mu_factor(&self.micromotion_sums(phi), self.beta)
    }
}

/// Fourier coefficients of the Floquet solution truncated at `harmonics`.
pub fn fourier_coefficients(
    p: MathieuParams,
    beta: f64,
    harmonics: usize,
) -> Result<FloquetSolution, MathieuError> {
    let coefficients = solve_coefficients(p, beta, harmonics)?;
    let sol = FloquetSolution {
        params: p,
        beta,
        harmonics,
        coefficients,
    };
    if harmonics > 0 && p.q != 0.0 {
        let ratio = sol
            .coefficient(harmonics as i64)
            .abs()
            .max(sol.coefficient(-(harmonics as i64)).abs());
        if ratio >= TRUNCATION_TOL {
            return Err(MathieuError::TruncationInsufficient { harmonics, ratio });
        }
    }
    Ok(sol)
}

/// Exponent and coefficients, escalating the harmonic cut-off once if the
/// default truncation is insufficient.
pub fn floquet_solution(p: MathieuParams) -> Result<FloquetSolution, MathieuError> {
    let beta = characteristic_exponent(p)?;
    match fourier_coefficients(p, beta, DEFAULT_HARMONICS) {
        Err(MathieuError::TruncationInsufficient { .. }) => {
            fourier_coefficients(p, beta, ESCALATED_HARMONICS)
        }
        other => other,
    }
}

/// Trigonometric sums of the Floquet coefficients at one RF phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicromotionSums {
    pub sigma_c: f64,
    pub sigma_s: f64,
    pub zeta_c: f64,
    pub zeta_s: f64,
    /// Normalisation `4 pi (sigma_c (beta sigma_c + 2 zeta_c) + sigma_s (beta sigma_s + 2 zeta_s))`.
    pub rho: f64,
    pub phi: f64,
}

/// Evaluate the micromotion sums of a Floquet solution at RF phase `phi`.
pub fn micromotion_sums(sol: &FloquetSolution, phi: f64) -> MicromotionSums {
    let (mut sc, mut ss, mut zc, mut zs) = (0.0, 0.0, 0.0, 0.0);
    for (j, c) in sol.indexed() {
        let (s, co) = (j * phi).sin_cos();
        sc += c * co;
        ss += c * s;
        zc += j * c * co;
        zs += j * c * s;
    }
    let b = sol.beta;
    let rho = 4.0 * PI * (sc * (b * sc + 2.0 * zc) + ss * (b * ss + 2.0 * zs));
    MicromotionSums {
        sigma_c: sc,
        sigma_s: ss,
        zeta_c: zc,
        zeta_s: zs,
        rho,
        phi,
    }
}

/// Ratio of the kick response with micromotion to the harmonic response.
pub fn mu_factor(sums: &MicromotionSums, beta: f64) -> Result<f64, MathieuError> {
    let den = sums.sigma_c * (beta * sums.sigma_c + 2.0 * sums.zeta_c)
        + sums.sigma_s * (beta * sums.sigma_s + 2.0 * sums.zeta_s);
    if den.abs() < 1e-300 || !den.is_finite() {
        return Err(MathieuError::SingularDenominator);
    }
    Ok(beta * (sums.sigma_c.powi(2) + sums.sigma_s.powi(2)) / den)
}

/// Closed-form approximation of `mu` keeping only `C_{+-1}` to first order in `q`.
pub fn mu_approx(p: MathieuParams, beta: f64, phi: f64) -> f64 {
    let b2 = beta * beta;
    (1.0 - 2.0 * (b2 + 4.0) * p.q * phi.cos() / (b2 - 4.0).powi(2)).powi(2)
}

/// Find `q` such that `mu(phi) = target` at fixed `a`, searching `q` in
/// `(0, q_max]` along the first stability region.
pub fn q_for_mu(a: f64, target: f64, phi: f64, q_max: f64) -> Result<f64, MathieuError> {
    let f = |q: f64| -> Result<f64, MathieuError> {
        Ok(floquet_solution(MathieuParams::new(a, q))?.mu(phi)? - target)
    };
    // march outward until the sign changes or stability is lost
    let steps = 200;
    let mut lo = q_max / steps as f64;
    let mut flo = f(lo)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    let mut hi = lo;
    let mut fhi = flo;
    for k in 2..=steps {
        let q = q_max * k as f64 / steps as f64;
        let fq = match f(q) {
            Ok(v) => v,
            Err(_) => break,
        };
        if fq.signum() != flo.signum() {
            hi = q;
            fhi = fq;
            break;
        }
        lo = q;
        flo = fq;
    }
    if fhi.signum() == flo.signum() {
        return Err(MathieuError::InvalidDrive(format!(
            "mu = {target} is not reached for q <= {q_max} at a = {a}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 || (hi - lo) < 1e-15 * hi {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Find `a` such that the characteristic exponent equals `beta` at fixed `q`.
pub fn a_for_beta(q: f64, beta: f64) -> Result<f64, MathieuError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(MathieuError::InvalidDrive(format!("beta = {beta} outside (0, 1)")));
    }
    // beta increases monotonically with a across the first region
    let mut lo = -q - 0.5;
    let mut hi = 1.0;
    let g = |a: f64| -> f64 {
        match characteristic_exponent(MathieuParams::new(a, q)) {
            Ok(b) => b - beta,
            Err(MathieuError::HigherStabilityRegion { .. }) => 1.0,
            // beta -> 0 where the trace exits through +2, beta -> 1 through -2
            Err(MathieuError::Unstable { trace, .. }) if trace > 0.0 => -1.0,
            Err(_) => 1.0,
        }
    };
    while g(lo) > 0.0 {
        lo -= 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let a = 0.5 * (lo + hi);
    characteristic_exponent(MathieuParams::new(a, q))?;
    Ok(a)
}
