mod common;

use common::{microtrap, microtrap_chi, paul, OMEGA};
use fastgate::mathieu::MathieuParams;
use fastgate::trapmodel::*;
use proptest::prelude::*;

#[test]
fn harmonic_microtrap_splitting_matches_two_well_model() {
    for d in [30e-6, 60e-6, 100e-6, 200e-6] {
        let t = Trap::Microtrap(MicrotrapArray::from_secular(d, OMEGA, MathieuParams::new(0.0, 0.2), CA40_MASS).unwrap());
        let chi = mode_spectrum(&t.harmonic().unwrap()).unwrap().chi();
        let expected = microtrap_chi(d, OMEGA, CA40_MASS);
        assert!((chi - expected).abs() < 1e-9 * expected.max(1e-6), "d {d}: {chi} vs {expected}");
        let xi = xi_param(d, OMEGA, CA40_MASS);
        assert!((chi_microtrap(xi) - expected).abs() < 1e-6 * expected, "closed form at d {d}");
    }
}

#[test]
fn harmonic_paul_rocking_mode() {
    let s = mode_spectrum(&paul(0.02, 0.0)).unwrap();
    let kappa: f64 = 1.0 / 6.0;
    assert!((s.chi() - ((1.0 - kappa * kappa).sqrt() - 1.0)).abs() < 1e-12);
    assert_eq!(s.modes[1].kind, ModeKind::Rocking);
}

#[test]
fn paul_equilibrium_balances_coulomb_and_axial_force() {
    let t = paul(0.0, 0.2);
    let x = t.equilibrium_positions().unwrap();
    let r = x[1] - x[0];
    let wz = OMEGA / 6.0;
    assert!((r.powi(3) - 2.0 * coulomb_constant(CA40_MASS) / (wz * wz)).abs() < 1e-12 * r.powi(3));
    assert!((x[0] + x[1]).abs() < 1e-20);
}

#[test]
fn microtrap_equilibrium_balances_coulomb_and_trap_force() {
    let t = microtrap(0.2);
    let d = 100e-6;
    let x = t.equilibrium_positions().unwrap();
    let shift = x[1] - 0.5 * d;
    let r = x[1] - x[0];
    let k = coulomb_constant(CA40_MASS);
    assert!((OMEGA * OMEGA * shift - k / (r * r)).abs() < 1e-9 * OMEGA * OMEGA * shift);
    let s = t.static_displacements().unwrap();
    assert!((s[1] * d - shift).abs() < 1e-12 * shift);
}

#[test]
fn periodic_crystal_solves_the_equations_of_motion() {
    for q in [0.1, 0.3, 0.6] {
        let t = microtrap(q);
        let c = find_periodic_crystal(&t).unwrap();
        assert!(c.residual < 1e-8, "q {q}: {}", c.residual);
        assert!(crystal_ode_residual(&t, &c).unwrap() < 1e-8);
        // symmetric about the array midpoint
        for th in [0.0, 1.0, 2.5] {
            let p = c.position(th);
            assert!((p[0] + p[1]).abs() < 1e-15);
        }
    }
}

#[test]
fn static_crystal_without_rf() {
    let t = microtrap(0.2).harmonic().unwrap();
    let c = find_periodic_crystal(&t).unwrap();
    let s = t.static_displacements().unwrap();
    for th in [0.0, 2.0, 4.0] {
        let p = c.position(th);
        assert!((p[1] - s[1]).abs() < 1e-12 * s[1].abs());
        assert!(c.velocity(th)[1].abs() < 1e-15);
    }
}

#[test]
fn mode_couplings_are_orthonormal() {
    for t in [paul(0.0, 0.2), microtrap(0.3)] {
        let s = mode_spectrum(&t).unwrap();
        let b0 = s.modes[0].coupling;
        let b1 = s.modes[1].coupling;
        assert!((b0[0] * b1[0] + b0[1] * b1[1]).abs() < 1e-15);
        assert!((b0[0].hypot(b0[1]) - 1.0).abs() < 1e-15);
        assert_eq!(s.modes[0].freq_ratio, 1.0);
        assert!((s.modes[0].frequency - OMEGA).abs() < 1e-6);
        assert!((s.rf_period() - 0.5 * s.beta).abs() < 1e-15);
    }
}

#[test]
fn equivalent_harmonic_keeps_the_splitting() {
    for t in [paul(0.0, 0.2), microtrap(0.4)] {
        let chi = mode_spectrum(&t).unwrap().chi();
        let h = t.equivalent_harmonic().unwrap();
        assert_eq!(h.mathieu().q, 0.0);
        assert!((mode_spectrum(&h).unwrap().chi() - chi).abs() < 1e-9);
    }
}

#[test]
fn axial_parameter_follows_kappa() {
    let Trap::Paul(p) = paul(0.0, 0.2) else { unreachable!() };
    let beta = Trap::Paul(p.clone()).beta().unwrap();
    assert!((p.axial_a().unwrap() - (beta / 6.0).powi(2)).abs() < 1e-15);
}

#[test]
fn wrong_ion_count_is_rejected() {
    let Trap::Microtrap(mut m) = microtrap(0.2) else { unreachable!() };
    m.ion_count = 3;
    assert!(matches!(mode_spectrum(&Trap::Microtrap(m)), Err(TrapError::UnsupportedIonCount(3))));
}

#[test]
fn stray_offsets_need_the_oracle() {
    let Trap::Microtrap(mut m) = microtrap(0.2) else { unreachable!() };
    m.static_offsets = [1e-4, 0.0];
    assert!(matches!(mode_spectrum(&Trap::Microtrap(m)), Err(TrapError::Invalid(_))));
}

#[test]
fn unstable_trap_is_rejected() {
    assert!(PaulTrap::from_secular(OMEGA, MathieuParams::new(0.3, 0.95), 0.2, CA40_MASS).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn retuning_keeps_secular_frequency(q in 0.0f64..0.6, a in 0.0f64..0.05) {
        let t = microtrap(0.2);
        let r = t.with_mathieu(MathieuParams::new(a, q));
        prop_assume!(r.is_ok());
        let r = r.unwrap();
        prop_assert!((r.secular_omega().unwrap() - OMEGA).abs() < 1e-6 * OMEGA);
        prop_assert!((r.rf_angular_frequency() * r.beta().unwrap() / 2.0 - OMEGA).abs() < 1e-6 * OMEGA);
    }

    #[test]
    fn paul_splitting_is_negative(q in 0.05f64..0.5, kappa in 0.05f64..0.4) {
        let t = Trap::Paul(PaulTrap::from_secular(OMEGA, MathieuParams::new(0.0, q), kappa, CA40_MASS).unwrap());
        let s = mode_spectrum(&t).unwrap();
        prop_assert!(s.chi() < 0.0);
        prop_assert!(s.chi() > -kappa * kappa);
    }
}
