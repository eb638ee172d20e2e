use fastgate::integrate::{step_count, Dynamics, Yoshida6};
use fastgate::quadrature::integrate;
use proptest::prelude::*;
use std::f64::consts::PI;

/// Driven oscillator `x'' = -x + cos(2 t)` with exact solution for
/// `x(0) = 0, x'(0) = 1`: `sin t + (cos t - cos 2t) / 3`.
struct Driven;

impl Dynamics for Driven {
    fn dim(&self) -> usize {
        1
    }
    fn accel(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = -x[0] + (2.0 * t).cos();
    }
}

fn error_with_steps(steps: usize) -> f64 {
    let mut x = [0.0];
    let mut v = [1.0];
    let t1 = 2.0;
    Yoshida6::new(1).advance(&Driven, 0.0, t1, &mut x, &mut v, t1 / steps as f64);
    let exact = t1.sin() + (t1.cos() - (2.0 * t1).cos()) / 3.0;
    (x[0] - exact).abs()
}

#[test]
fn integrator_is_sixth_order_with_explicit_time() {
    let coarse = error_with_steps(10);
    let fine = error_with_steps(20);
    let order = (coarse / fine).log2();
    assert!(order > 5.5 && order < 6.8, "order {order}");
    assert!(error_with_steps(400) < 1e-13);
}

#[test]
fn steps_cover_the_span() {
    assert_eq!(step_count(1.0, 0.25), 4);
    assert_eq!(step_count(1.0, 0.3), 4);
    assert_eq!(step_count(0.0, 0.3), 1);
}

#[test]
fn quadrature_of_known_integrals() {
    assert!((integrate(|x| x.sin(), 0.0, PI, 1e-13).unwrap() - 2.0).abs() < 1e-12);
    assert!((integrate(|x| (-x * x).exp(), -6.0, 6.0, 1e-13).unwrap() - PI.sqrt()).abs() < 1e-12);
    let periodic = integrate(|t| (3.0 * t).cos().powi(2), 0.0, 2.0 * PI, 1e-13).unwrap();
    assert!((periodic - PI).abs() < 1e-12);
}

proptest! {
    #[test]
    fn polynomial_quadrature_is_exact(c in prop::array::uniform4(-5.0f64..5.0), a in -3.0f64..0.0, b in 0.0f64..3.0) {
        let f = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
        let prim = |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0;
        let got = integrate(f, a, b, 1e-12).unwrap();
        prop_assert!((got - (prim(b) - prim(a))).abs() < 1e-10);
    }
}
