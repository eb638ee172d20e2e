//! Sixth-order symplectic integration of `x'' = f(t, x)`.
//!
//! The scheme is Yoshida's triple-jump composition of kick-drift-kick
//! leapfrog. Explicit time dependence is carried by the drift, so a
//! periodically driven force is sampled at consistent stage times.

/// A second-order system whose acceleration depends on time and position.
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn accel(&self, t: f64, x: &[f64], out: &mut [f64]);
}

const W1: f64 = -1.177_679_984_178_87;
const W2: f64 = 0.235_573_213_359_357;
const W3: f64 = 0.784_513_610_477_560;
const W0: f64 = 1.0 - 2.0 * (W1 + W2 + W3);
const WEIGHTS: [f64; 7] = [W3, W2, W1, W0, W1, W2, W3];

/// Reusable integrator state for a fixed dimension.
pub struct Yoshida6 {
    acc: Vec<f64>,
}

impl Yoshida6 {
    pub fn new(dim: usize) -> Self {
        Yoshida6 {
            acc: vec![0.0; dim],
        }
    }

    /// Advance `(t, x, v)` by one step of size `h`.
    pub fn step<D: Dynamics + ?Sized>(
        &mut self,
        sys: &D,
        t: &mut f64,
        x: &mut [f64],
        v: &mut [f64],
        h: f64,
    ) {
        let t0 = *t;
        let mut tc = t0;
        for w in WEIGHTS {
            let hw = h * w;
            sys.accel(tc, x, &mut self.acc);
            for (vi, ai) in v.iter_mut().zip(&self.acc) {
                *vi += 0.5 * hw * ai;
            }
            for (xi, vi) in x.iter_mut().zip(v.iter()) {
                *xi += hw * vi;
            }
            tc += hw;
            sys.accel(tc, x, &mut self.acc);
            for (vi, ai) in v.iter_mut().zip(&self.acc) {
                *vi += 0.5 * hw * ai;
            }
        }
        *t = t0 + h;
    }

    /// Integrate from `t0` to `t1` with at most `h_max` per step, landing
    /// exactly on `t1`.
    pub fn advance<D: Dynamics + ?Sized>(
        &mut self,
        sys: &D,
        t0: f64,
        t1: f64,
        x: &mut [f64],
        v: &mut [f64],
        h_max: f64,
    ) {
        let span = t1 - t0;
        if span == 0.0 {
            return;
        }
        let steps = (span.abs() / h_max).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let mut t = t0;
        for k in 0..steps {
            self.step(sys, &mut t, x, v, h);
            t = t0 + span * (k + 1) as f64 / steps as f64;
        }
    }
}

/// Number of equal steps needed to cover `span` with steps no longer than `h_max`.
pub fn step_count(span: f64, h_max: f64) -> usize {
    (span.abs() / h_max).ceil().max(1.0) as usize
}
