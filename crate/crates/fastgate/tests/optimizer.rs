mod common;

use common::{laser, microtrap, paul};
use fastgate::mathieu::*;
use fastgate::optimizer::*;
use fastgate::trapmodel::mode_spectrum;
use proptest::prelude::*;
use std::f64::consts::PI;

const ETA: f64 = 0.178;

fn quick(bound: f64, n: u32) -> OptimizationConfig {
    OptimizationConfig {
        starts: 48,
        ..OptimizationConfig::new(bound, n)
    }
}

proptest! {
    #[test]
    fn starts_are_seeded_and_bounded(count in 1usize..200, bound in 0.1f64..4.0, seed in any::<u64>()) {
        let a = start_points(count, bound, seed);
        prop_assert_eq!(a.len(), count);
        prop_assert_eq!(&a, &start_points(count, bound, seed));
        for p in &a {
            prop_assert!(p.iter().all(|&t| t >= MIN_TAU && 2.0 * t <= bound + 1e-12));
        }
    }
}

#[test]
fn harmonic_baseline_reaches_numerical_zero() {
    let r = optimize_gate(&paul(0.0, 0.2), &quick(2.0, 12), &laser(ETA)).unwrap();
    assert!(r.infidelity < 1e-20, "{}", r.infidelity);
    assert!(r.achieved_gate_time <= 2.0);
    assert_eq!(r.mu, vec![1.0, 1.0]);
    assert_eq!(r.best_schedule.phi_rf, PI);
    assert!(r.starts_converged > 0);
}

#[test]
fn seed_determines_the_result() {
    let cfg = quick(1.2, 20);
    let a = optimize_gate(&microtrap(0.2), &cfg, &laser(ETA)).unwrap();
    let b = optimize_gate(&microtrap(0.2), &cfg, &laser(ETA)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn optimum_is_a_local_minimum() {
    let cfg = OptimizationConfig {
        mu_mode: MuMode::WithMicromotion,
        ..quick(0.8, 10)
    };
    let trap = microtrap(0.3);
    let model = gate_model(&trap, cfg.mu_mode, &laser(ETA)).unwrap();
    let r = optimize_gate(&trap, &cfg, &laser(ETA)).unwrap();
    let th = fastgate::fidelity::ThermalState::uniform(cfg.n_bar, 2);
    let f0 = model.frag_residuals(r.best_schedule.tau, cfg.n, &th).objective();
    assert!((f0 - r.infidelity).abs() <= 1e-12 * f0.max(1e-300));
    for j in 0..3 {
        for h in [-1e-4, 1e-4] {
            let mut t = r.best_schedule.tau;
            t[j] += h;
            if 2.0 * t[j] > cfg.time_bound || t[j] < MIN_TAU {
                continue;
            }
            let f = model.frag_residuals(t, cfg.n, &th).objective();
            assert!(f >= f0 * (1.0 - 1e-9), "tau{j} {h:+}: {f} < {f0}");
        }
    }
}

#[test]
fn lattice_gates_only_use_locked_times() {
    let trap = paul(a_for_beta(0.2, 2.0 / 12.0).unwrap(), 0.2);
    let cfg = OptimizationConfig {
        mu_mode: MuMode::WithMicromotion,
        lock: LockMode::Lattice,
        ..OptimizationConfig::new(2.5, 5)
    };
    let r = optimize_gate(&trap, &cfg, &laser(ETA)).unwrap();
    let beta = mode_spectrum(&trap).unwrap().beta;
    let seq = r.best_schedule.sequence();
    for k in &seq.impulses {
        let th = seq.rf_phase_at(k.time, beta);
        let w = (th - PI).rem_euclid(2.0 * PI);
        assert!(w.min(2.0 * PI - w) < 1e-9, "kick at phase {th}");
    }
    assert_eq!(r.lock, LockMode::Lattice);
    // a constrained search cannot beat the continuous one
    let free = optimize_gate(&trap, &OptimizationConfig { lock: LockMode::Idealized, ..cfg }, &laser(ETA)).unwrap();
    assert!(free.infidelity <= r.infidelity, "{} vs {}", free.infidelity, r.infidelity);
}

#[test]
fn envelope_never_rises() {
    let bounds = [0.4, 0.6, 0.8, 1.0, 1.4];
    let rows = sweep_gate_time(&microtrap(0.2), &quick(1.0, 30), &bounds, &[1.0, 2.31], &laser(ETA)).unwrap();
    assert_eq!(rows.len(), 10);
    for mu_rows in rows.chunks(5) {
        for w in mu_rows.windows(2) {
            assert!(w[1].infidelity <= w[0].infidelity, "{} then {}", w[0].infidelity, w[1].infidelity);
        }
    }
    // stronger kicks win at short gate times
    assert!(rows[5].infidelity < rows[0].infidelity);
}

#[test]
fn mu_trap_retuning() {
    let t = trap_for_mu(&microtrap(0.2), 2.31).unwrap();
    let s = mode_spectrum(&t).unwrap();
    assert!((s.modes[0].mu(PI).unwrap() - 2.31).abs() < 1e-9);
    assert_eq!(trap_for_mu(&microtrap(0.2), 1.0).unwrap().mathieu().q, 0.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let t = paul(0.0, 0.2);
    let l = laser(ETA);
    assert!(matches!(optimize_gate(&t, &OptimizationConfig::new(0.0, 3), &l), Err(OptimizerError::Config(_))));
    assert!(matches!(optimize_gate(&t, &OptimizationConfig::new(1.0, 0), &l), Err(OptimizerError::Config(_))));
    let none = OptimizationConfig {
        starts: 0,
        ..OptimizationConfig::new(1.0, 3)
    };
    assert!(optimize_gate(&t, &none, &l).is_err());
    assert!(sweep_gate_time(&t, &quick(1.0, 3), &[1.0, 0.5], &[1.0], &l).is_err());
}
