#![allow(dead_code)]

use fastgate::fidelity::{LaserConfig, ThermalState};
use fastgate::mathieu::MathieuParams;
use fastgate::trapmodel::{coulomb_constant, MicrotrapArray, PaulTrap, Trap, CA40_MASS};
use std::f64::consts::PI;

pub const OMEGA: f64 = 2.0 * PI * 1e6;

pub fn paul(a: f64, q: f64) -> Trap {
    Trap::Paul(PaulTrap::from_secular(OMEGA, MathieuParams::new(a, q), 1.0 / 6.0, CA40_MASS).unwrap())
}

pub fn microtrap(q: f64) -> Trap {
    Trap::Microtrap(MicrotrapArray::from_secular(100e-6, OMEGA, MathieuParams::new(0.0, q), CA40_MASS).unwrap())
}

pub fn laser(eta: f64) -> LaserConfig {
    LaserConfig { lamb_dicke_eta: eta }
}

pub fn thermal() -> ThermalState {
    ThermalState::uniform(0.1, 2)
}

/// Breathing-mode splitting of two ions in harmonic wells `d` apart, from
/// the equilibrium `omega^2 (r - d) = 2 k / r^2` and `omega_b^2 = omega^2 + 4 k / r^3`.
pub fn microtrap_chi(d: f64, omega: f64, mass: f64) -> f64 {
    let k = coulomb_constant(mass);
    let w2 = omega * omega;
    let mut r = d;
    for _ in 0..50 {
        let f = w2 * (r - d) - 2.0 * k / (r * r);
        let df = w2 + 4.0 * k / (r * r * r);
        r -= f / df;
    }
    (1.0 + 4.0 * k / (r * r * r * w2)).sqrt() - 1.0
}

/// RK4 monodromy trace of `y'' + (a - 2 q cos 2s) y = 0` over `s in [0, pi]`.
pub fn rk4_trace(p: MathieuParams, steps: usize) -> f64 {
    let h = PI / steps as f64;
    let f = |s: f64, y: [f64; 2]| [y[1], -(p.a - 2.0 * p.q * (2.0 * s).cos()) * y[0]];
    let mut trace = 0.0;
    for (k, init) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
        let mut y = init;
        for i in 0..steps {
            let s = i as f64 * h;
            let k1 = f(s, y);
            let k2 = f(s + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f(s + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f(s + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for d in 0..2 {
                y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
        }
        trace += y[k];
    }
    trace
}
