//! Analytic gate errors and infidelity.
//!
//! [`GateModel`] evaluates the closed-form phase and displacement sums in
//! which micromotion enters as a per-mode factor `mu` (all kicks at one RF
//! phase). [`FloquetModel`] evaluates the exact linear response of the
//! Floquet modes to kicks at arbitrary RF phases, which is what a gate that
//! ignores micromotion actually experiences.

use crate::gatescheme::{Impulse, ImpulseSequence};
use crate::mathieu::{FloquetSolution, MathieuError};
use crate::trapmodel::ModeSpectrum;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};

pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_OCCUPATION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserConfig {
    pub lamb_dicke_eta: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        LaserConfig {
            lamb_dicke_eta: DEFAULT_ETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub mean_occupation: Vec<f64>,
}

impl ThermalState {
    pub fn uniform(n_bar: f64, modes: usize) -> Self {
        ThermalState {
            mean_occupation: vec![n_bar; modes],
        }
    }

    fn occupation(&self, p: usize) -> f64 {
        self.mean_occupation.get(p).copied().unwrap_or(DEFAULT_OCCUPATION)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateErrors {
    /// `|Phi| - pi/4`.
    pub phase_error: f64,
    /// Acquired relative phase `Phi` with its sign.
    pub signed_phase: f64,
    /// Whether the sign of `Phi` agrees with the requested target.
    pub matches_target: bool,
    pub mode_displacements: Vec<f64>,
    /// Per-mode enhancement factor used (1 for a micromotion-free model).
    pub mu_used: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelitySource {
    Analytic,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Quadratic estimate `phase_term + sum restoration_terms` for an
    /// analytic report; the full expression for an oracle report.
    pub infidelity: f64,
    pub phase_term: f64,
    pub restoration_terms: Vec<f64>,
    /// `1 - (2 + exp(-R) cos(2 dphi)) / 3`, bounded by 2/3, whose
    /// second-order expansion is the quadratic estimate.
    pub full_infidelity: f64,
    pub source: FidelitySource,
}

/// Participation weight `(b^1)^2 + (b^2)^2`.
fn weight(coupling: [f64; 2]) -> f64 {
    coupling[0] * coupling[0] + coupling[1] * coupling[1]
}

/// `(1 - exp(-r) cos(2 dphi)) / 3`, accurate for tiny arguments.
fn full_form(r: f64, dphi: f64) -> f64 {
    let s = dphi.sin();
    (-(-r).exp_m1() + (-r).exp() * 2.0 * s * s) / 3.0
}

/// Quadratic and full infidelity from phase error and mode displacements.
pub fn infidelity_from_parts(
    phase_error: f64,
    displacements: &[f64],
    couplings: &[[f64; 2]],
    thermal: &ThermalState,
) -> FidelityReport {
    let phase_term = 2.0 / 3.0 * phase_error * phase_error;
    let restoration_terms: Vec<f64> = displacements
        .iter()
        .zip(couplings)
        .enumerate()
        .map(|(p, (dp, b))| 4.0 / 3.0 * (0.5 + thermal.occupation(p)) * weight(*b) * dp * dp)
        .collect();
    let r: f64 = 3.0 * restoration_terms.iter().sum::<f64>();
    let full = full_form(r, phase_error);
    FidelityReport {
        infidelity: phase_term + restoration_terms.iter().sum::<f64>(),
        phase_term,
        restoration_terms,
        full_infidelity: full,
        source: FidelitySource::Analytic,
    }
}

/// Quadratic infidelity of the given errors.
pub fn infidelity(errors: &GateErrors, thermal: &ThermalState, spectrum: &ModeSpectrum) -> FidelityReport {
    let couplings: Vec<[f64; 2]> = spectrum.modes.iter().map(|m| m.coupling).collect();
    infidelity_from_parts(errors.phase_error, &errors.mode_displacements, &couplings, thermal)
}

/// Rescale the restoration terms from one thermal occupation to another.
pub fn thermal_scaling(report: &FidelityReport, from: &ThermalState, to: &ThermalState) -> FidelityReport {
    let restoration_terms: Vec<f64> = report
        .restoration_terms
        .iter()
        .enumerate()
        .map(|(p, t)| t * (0.5 + to.occupation(p)) / (0.5 + from.occupation(p)))
        .collect();
    let total: f64 = restoration_terms.iter().sum();
    // recover the phase error from the phase term to rebuild the full form
    let dphi = (1.5 * report.phase_term).sqrt();
    let full = full_form(3.0 * total, dphi);
    FidelityReport {
        infidelity: report.phase_term + total,
        phase_term: report.phase_term,
        restoration_terms,
        full_infidelity: full,
        source: report.source,
    }
}

/// Fidelity after `pulse_pairs` imperfect pulse pairs with error `epsilon` each.
pub fn imperfect_pulse_fidelity(f0: f64, pulse_pairs: u64, epsilon: f64) -> f64 {
    (1.0 - 2.0 * pulse_pairs as f64 * epsilon) * f0
}

/// Largest per-pulse error keeping the infidelity below `target` for a
/// perfect gate with `pulse_pairs` pulse pairs.
pub fn max_pulse_error(pulse_pairs: u64, target: f64) -> f64 {
    target / (2.0 * pulse_pairs as f64)
}

/// One mode of the closed-form model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeTerm {
    /// `omega_p / omega`.
    pub freq_ratio: f64,
    pub coupling: [f64; 2],
    pub mu: f64,
}

/// Closed-form phase and displacement sums with a per-mode `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateModel {
    pub terms: Vec<ModeTerm>,
    pub eta: f64,
}

/// Residual vector and Jacobian with respect to `(tau_1, tau_2, tau_3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FragResiduals {
    pub residuals: Vec<f64>,
    pub jacobian: Vec<[f64; 3]>,
}

impl FragResiduals {
    pub fn objective(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

const TAU_INDEX: [(usize, f64); 6] = [(0, -1.0), (1, -1.0), (2, -1.0), (2, 1.0), (1, 1.0), (0, 1.0)];

impl GateModel {
    /// Same `mu` on every mode.
    pub fn uniform(spectrum: &ModeSpectrum, mu: f64, laser: &LaserConfig) -> Self {
        GateModel {
            terms: spectrum
                .modes
                .iter()
                .map(|m| ModeTerm {
                    freq_ratio: m.freq_ratio,
                    coupling: m.coupling,
                    mu,
                })
                .collect(),
            eta: laser.lamb_dicke_eta,
        }
    }

    /// Micromotion-free model (`mu = 1`).
    pub fn harmonic(spectrum: &ModeSpectrum, laser: &LaserConfig) -> Self {
        Self::uniform(spectrum, 1.0, laser)
    }

    /// Each mode's own `mu` for kicks at RF phase `phi`.
    pub fn per_mode(spectrum: &ModeSpectrum, phi: f64, laser: &LaserConfig) -> Result<Self, MathieuError> {
        let terms = spectrum
            .modes
            .iter()
            .map(|m| {
                Ok(ModeTerm {
                    freq_ratio: m.freq_ratio,
                    coupling: m.coupling,
                    mu: m.mu(phi)?,
                })
            })
            .collect::<Result<Vec<_>, MathieuError>>()?;
        Ok(GateModel {
            terms,
            eta: laser.lamb_dicke_eta,
        })
    }

    /// Model with the splitting of the second mode replaced by `chi`.
    pub fn with_chi(&self, chi: f64) -> Self {
        let mut out = self.clone();
        let base = out.terms[0].freq_ratio;
        out.terms[1].freq_ratio = base * (1.0 + chi);
        out
    }

    pub fn chi(&self) -> f64 {
        self.terms[1].freq_ratio / self.terms[0].freq_ratio - 1.0
    }

    pub fn couplings(&self) -> Vec<[f64; 2]> {
        self.terms.iter().map(|t| t.coupling).collect()
    }

    /// Acquired relative phase `Phi` (signed).
    pub fn signed_phase(&self, impulses: &[Impulse]) -> f64 {
        let mut total = 0.0;
        for t in &self.terms {
            let w = 2.0 * PI * t.freq_ratio;
            let mut s = 0.0;
            for (i, a) in impulses.iter().enumerate() {
                for b in &impulses[i + 1..] {
                    s += a.count * b.count * (w * (a.time - b.time).abs()).sin();
                }
            }
            total += 8.0 * self.eta * self.eta * t.mu / t.freq_ratio * t.coupling[0] * t.coupling[1] * 2.0 * s;
        }
        total
    }

    /// Residual mode displacements `2 mu sqrt(omega / omega_p) sum z_k sin(omega_p t_k)`.
    pub fn displacements(&self, impulses: &[Impulse]) -> Vec<f64> {
        self.terms
            .iter()
            .map(|t| {
                let w = 2.0 * PI * t.freq_ratio;
                let s: f64 = impulses.iter().map(|k| k.count * (w * k.time).sin()).sum();
                2.0 * t.mu / t.freq_ratio.sqrt() * s
            })
            .collect()
    }

    pub fn errors(&self, seq: &ImpulseSequence, target_sign: i8) -> GateErrors {
        let phi = self.signed_phase(&seq.impulses);
        GateErrors {
            phase_error: phi.abs() - FRAC_PI_4,
            signed_phase: phi,
            matches_target: phi * target_sign as f64 >= 0.0,
            mode_displacements: self.displacements(&seq.impulses),
            mu_used: self.terms.iter().map(|t| t.mu).collect(),
        }
    }

    pub fn report(&self, seq: &ImpulseSequence, thermal: &ThermalState) -> FidelityReport {
        let e = self.errors(seq, 1);
        infidelity_from_parts(e.phase_error, &e.mode_displacements, &self.couplings(), thermal)
    }

    /// Residuals whose squared sum is the quadratic infidelity of the FRAG
    /// schedule with group times `tau` and scale `n`, with their Jacobian.
    pub fn frag_residuals(&self, tau: [f64; 3], n: u32, thermal: &ThermalState) -> FragResiduals {
        let nf = n as f64;
        let times: [f64; 6] = TAU_INDEX.map(|(i, s)| s * tau[i]);
        let z: [f64; 6] = crate::gatescheme::FRAG_PATTERN.map(|v| v as f64 * nf);
        let mut phi = 0.0;
        let mut dphi = [0.0; 6];
        let mut residuals = Vec::with_capacity(1 + self.terms.len());
        let mut jacobian = Vec::with_capacity(1 + self.terms.len());
        let mut disp = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let w = 2.0 * PI * t.freq_ratio;
            let pref = 8.0 * self.eta * self.eta * t.mu / t.freq_ratio * t.coupling[0] * t.coupling[1] * 2.0;
            for i in 0..6 {
                for j in (i + 1)..6 {
                    let dt = times[i] - times[j];
                    let (s, c) = (w * dt.abs()).sin_cos();
                    let zz = z[i] * z[j] * pref;
                    phi += zz * s;
                    let g = zz * w * c * dt.signum();
                    dphi[i] += g;
                    dphi[j] -= g;
                }
            }
            let dpref = 2.0 * t.mu / t.freq_ratio.sqrt();
            let mut p = 0.0;
            let mut dp = [0.0; 6];
            for k in 0..6 {
                let (s, c) = (w * times[k]).sin_cos();
                p += dpref * z[k] * s;
                dp[k] = dpref * z[k] * w * c;
            }
            disp.push((p, dp, t.coupling));
        }
        let chain = |d: [f64; 6]| -> [f64; 3] {
            let mut out = [0.0; 3];
            for (k, (i, s)) in TAU_INDEX.iter().enumerate() {
                out[*i] += s * d[k];
            }
            out
        };
        let sp = (2.0f64 / 3.0).sqrt();
        let sign = if phi >= 0.0 { 1.0 } else { -1.0 };
        residuals.push(sp * (phi.abs() - FRAC_PI_4));
        jacobian.push(chain(dphi).map(|v| sp * sign * v));
        for (p, (val, d, b)) in disp.into_iter().enumerate() {
            let c = (4.0 / 3.0 * (0.5 + thermal.occupation(p)) * weight(b)).sqrt();
            residuals.push(c * val);
            jacobian.push(chain(d).map(|v| c * v));
        }
        FragResiduals { residuals, jacobian }
    }
}

/// Displacement of each mode for a uniform `mu`.
pub fn mode_displacement(seq: &ImpulseSequence, spectrum: &ModeSpectrum, mu: f64) -> Vec<f64> {
    GateModel::uniform(spectrum, mu, &LaserConfig::default()).displacements(&seq.impulses)
}

/// Phase error `|Phi| - pi/4` for a uniform `mu`.
pub fn phase_error(seq: &ImpulseSequence, spectrum: &ModeSpectrum, mu: f64, laser: &LaserConfig, target_sign: i8) -> f64 {
    GateModel::uniform(spectrum, mu, laser).errors(seq, target_sign).phase_error
}

/// One Floquet mode in the exact linear-response model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetTerm {
    pub floquet: FloquetSolution,
    pub coupling: [f64; 2],
}

/// Exact linear response of the Floquet modes to kicks at arbitrary times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetModel {
    pub terms: Vec<FloquetTerm>,
    /// COM exponent, fixing the RF period `beta / 2`.
    pub beta: f64,
    pub eta: f64,
}

impl FloquetModel {
    pub fn new(spectrum: &ModeSpectrum, laser: &LaserConfig) -> Self {
        FloquetModel {
            terms: spectrum
                .modes
                .iter()
                .map(|m| FloquetTerm {
                    floquet: m.floquet.clone(),
                    coupling: m.coupling,
                })
                .collect(),
            beta: spectrum.beta,
            eta: laser.lamb_dicke_eta,
        }
    }

    /// Mode function `u_p(tau)` for a sequence with RF phase `phi_rf` at `tau = 0`.
    pub fn mode_function(&self, p: usize, tau: f64, phi_rf: f64) -> Complex64 {
        let f = &self.terms[p].floquet;
        let theta = 4.0 * PI * tau / self.beta + phi_rf;
        Complex64::from_polar(1.0, 0.5 * f.beta * theta) * f.periodic(theta)
    }

    /// `Im(conj(u) du/dtau)`, constant in time.
    pub fn invariant(&self, p: usize) -> f64 {
        2.0 * PI / self.beta * self.terms[p].floquet.wronskian()
    }

    /// Response at `later` to a unit velocity kick at `earlier`.
    pub fn green(&self, p: usize, later: f64, earlier: f64, phi_rf: f64) -> f64 {
        let a = self.mode_function(p, later, phi_rf);
        let b = self.mode_function(p, earlier, phi_rf);
        (b.conj() * a).im / self.invariant(p)
    }

    pub fn errors(&self, seq: &ImpulseSequence, target_sign: i8) -> GateErrors {
        let kicks = seq.sorted();
        let mut phi = 0.0;
        let mut disp = Vec::with_capacity(self.terms.len());
        for (p, t) in self.terms.iter().enumerate() {
            let inv = self.invariant(p);
            let mut prefix = Complex64::new(0.0, 0.0);
            let mut s = 0.0;
            for k in &kicks {
                let u = self.mode_function(p, k.time, seq.phi_rf);
                s += k.count * (prefix * u).im;
                prefix += k.count * u.conj();
            }
            phi += 8.0 * self.eta * self.eta * 2.0 * PI * t.coupling[0] * t.coupling[1] * 2.0 * s / inv;
            disp.push(2.0 * (2.0 * PI / inv).sqrt() * prefix.norm());
        }
        GateErrors {
            phase_error: phi.abs() - FRAC_PI_4,
            signed_phase: phi,
            matches_target: phi * target_sign as f64 >= 0.0,
            mode_displacements: disp,
            mu_used: self
                .terms
                .iter()
                .map(|t| t.floquet.mu(PI).unwrap_or(f64::NAN))
                .collect(),
        }
    }

    pub fn report(&self, seq: &ImpulseSequence, thermal: &ThermalState) -> FidelityReport {
        let e = self.errors(seq, 1);
        let couplings: Vec<[f64; 2]> = self.terms.iter().map(|t| t.coupling).collect();
        infidelity_from_parts(e.phase_error, &e.mode_displacements, &couplings, thermal)
    }
}
