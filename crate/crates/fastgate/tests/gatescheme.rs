use fastgate::gatescheme::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn taus() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(0.01f64..1.5)
}

proptest! {
    #[test]
    fn frag_sequence_is_antisymmetric(tau in taus(), n in 1u32..50, phi in -4.0f64..4.0) {
        let s = frag_schedule(tau, n, phi).unwrap();
        let seq = s.sequence();
        prop_assert_eq!(seq.impulses.len(), 6);
        let total: f64 = seq.impulses.iter().map(|k| k.count).sum();
        prop_assert_eq!(total, 0.0);
        for k in 0..3 {
            let a = seq.impulses[k];
            let b = seq.impulses[5 - k];
            prop_assert_eq!(a.time, -b.time);
            prop_assert_eq!(a.count, -b.count);
        }
        prop_assert_eq!(s.gate_time(), 2.0 * tau.iter().cloned().fold(0.0, f64::max));
        prop_assert_eq!(seq.phi_rf, phi);
    }

    #[test]
    fn lattice_snap_is_nearest_nonzero_multiple(tau in 0.0f64..3.0, beta in 0.05f64..0.9) {
        let s = snap_to_lattice(tau, beta);
        let period = 0.5 * beta;
        let m = s / period;
        prop_assert!((m - m.round()).abs() < 1e-9);
        prop_assert!(m.round() >= 1.0);
        if tau >= 0.5 * period {
            prop_assert!((s - tau).abs() <= 0.5 * period + 1e-12);
        }
    }

    #[test]
    fn locked_groups_sit_at_rf_phase_pi(tau in taus(), beta in 0.05f64..0.9, phi in -4.0f64..4.0) {
        let s = frag_schedule(tau, 3, phi).unwrap();
        let (locked, shift) = phase_lock(&s, beta);
        prop_assert!(shift <= 0.25 * beta + 1e-12 || tau.iter().any(|&t| t < 0.25 * beta));
        let seq = locked.sequence();
        for k in &seq.impulses {
            let th = seq.rf_phase_at(k.time, beta);
            let wrapped = (th - PI).rem_euclid(2.0 * PI);
            prop_assert!(wrapped.min(2.0 * PI - wrapped) < 1e-9, "phase {th}");
        }
    }

    #[test]
    fn expansion_preserves_group_centroids(tau in taus(), n in 1u32..6, rate in 50.0f64..2000.0) {
        let s = frag_schedule(tau, n, 0.0).unwrap();
        let Ok(train) = expand_finite_rep(&s, rate) else { return Ok(()); };
        let total: usize = s.group_counts().iter().map(|z| z.unsigned_abs() as usize).sum();
        prop_assert_eq!(train.kicks.len(), total);
        prop_assert!(train.kicks.windows(2).all(|w| w[0].0 < w[1].0));
        let weighted: f64 = train.kicks.iter().map(|&(t, s)| t * s as f64).sum();
        let expected: f64 = s.group_times().iter().zip(s.group_counts()).map(|(t, z)| t * z as f64).sum();
        prop_assert!((weighted - expected).abs() < 1e-9);
    }

    #[test]
    fn halving_the_rate_never_shrinks_the_footprint(tau in taus(), n in 1u32..6, rate in 200.0f64..4000.0) {
        let s = frag_schedule(tau, n, 0.0).unwrap();
        let fast = expand_finite_rep(&s, rate);
        let slow = expand_finite_rep(&s, 0.5 * rate);
        if let (Ok(f), Ok(sl)) = (fast, slow) {
            prop_assert!(sl.footprint() >= f.footprint());
            prop_assert!(f.footprint() >= s.gate_time() - 1e-12);
        }
    }
}

#[test]
fn infinite_rate_keeps_groups_coincident() {
    let s = frag_schedule([0.3, 0.2, 0.1], 4, 0.0).unwrap();
    let train = expand_finite_rep(&s, f64::INFINITY).unwrap();
    assert_eq!(train.footprint(), s.gate_time());
    assert_eq!(train.kicks.len(), 40);
}

#[test]
fn slow_rate_reports_overlap() {
    let s = frag_schedule([0.3, 0.2, 0.1], 10, 0.0).unwrap();
    assert!(matches!(expand_finite_rep(&s, 20.0), Err(GateError::GroupOverlap { .. })));
    assert!(matches!(expand_finite_rep(&s, 0.0), Err(GateError::InvalidTiming(_))));
}

#[test]
fn invalid_schedules_are_rejected() {
    assert!(frag_schedule([0.1, 0.2, 0.3], 0, 0.0).is_err());
    assert!(frag_schedule([0.1, -0.2, 0.3], 1, 0.0).is_err());
    assert!(frag_schedule([0.1, f64::NAN, 0.3], 1, 0.0).is_err());
    assert!(frag_schedule([0.1, 0.2, 0.3], 1, f64::INFINITY).is_err());
}

#[test]
fn group_pattern() {
    let s = frag_schedule([0.3, 0.2, 0.1], 5, 0.0).unwrap();
    assert_eq!(s.group_counts(), [-5, 10, -10, 10, -10, 5]);
    assert_eq!(s.group_times(), [-0.3, -0.2, -0.1, 0.1, 0.2, 0.3]);
    let seq = s.sequence();
    assert_eq!(seq.start(), -0.3);
    assert_eq!(seq.end(), 0.3);
    assert_eq!(ImpulseSequence::empty(1.0).impulses.len(), 0);
}
