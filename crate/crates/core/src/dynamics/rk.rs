//! Dormand–Prince 5(4) with FSAL, elementary step control and exact landing on
//! the requested output times.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qops::{C64, ZERO};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth- minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Hard cap on attempted steps per integration.
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-11, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// RMS of `err_i / (atol + rtol·max(|y_i|, |z_i|))`.
fn error_norm(err: &[C64], y: &[C64], z: &[C64], tol: &Tolerances) -> f64 {
    let mut acc = 0.0;
    for ((e, a), b) in err.iter().zip(y).zip(z) {
        let scale = tol.atol + tol.rtol * a.norm().max(b.norm());
        let r = e.norm() / scale;
        acc += r * r;
    }
    (acc / err.len().max(1) as f64).sqrt()
}

fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = ZERO;
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o = y[i] + acc * h;
    }
}

/// Integrates the autonomous system `y' = f(y)` and calls `observe` at each
/// output time (the first being the start time) with the current state.
pub fn integrate<F, O>(mut f: F, y0: &[C64], times: &[f64], tol: &Tolerances, mut observe: O) -> Result<StepStats>
where
    F: FnMut(&[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    let Some(&t0) = times.first() else {
        return Ok(stats);
    };
    observe(0, t0, &y)?;
    if times.len() == 1 {
        return Ok(stats);
    }

    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut k5 = vec![ZERO; n];
    let mut k6 = vec![ZERO; n];
    let mut k7 = vec![ZERO; n];
    let mut tmp = vec![ZERO; n];
    let mut ynew = vec![ZERO; n];
    let mut err = vec![ZERO; n];

    f(&y, &mut k1);
    stats.rhs_evals += 1;
    let span = times[times.len() - 1] - t0;
    let mut h = initial_step(&mut f, &y, &k1, span, tol, &mut stats);
    let mut t = t0;
    let mut attempts = 0usize;

    for (idx, &target) in times.iter().enumerate().skip(1) {
        while t < target {
            attempts += 1;
            if attempts > tol.max_steps {
                return Err(Error::Numeric(format!("step limit {} reached at t = {t}", tol.max_steps)));
            }
            let remaining = target - t;
            let landing = h >= remaining;
            let step = if landing { remaining } else { h };

            combine(&mut tmp, &y, step, &[(A21, &k1)]);
            f(&tmp, &mut k2);
            combine(&mut tmp, &y, step, &[(A31, &k1), (A32, &k2)]);
            f(&tmp, &mut k3);
            combine(&mut tmp, &y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            f(&tmp, &mut k4);
            combine(&mut tmp, &y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            f(&tmp, &mut k5);
            combine(&mut tmp, &y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            f(&tmp, &mut k6);
            combine(&mut ynew, &y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            f(&ynew, &mut k7);
            stats.rhs_evals += 6;

            for i in 0..n {
                err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * step;
            }
            let e = error_norm(&err, &y, &ynew, tol);
            if !e.is_finite() {
                return Err(Error::Numeric(format!("non-finite error estimate at t = {t}")));
            }
            if e <= 1.0 {
                stats.accepted += 1;
                t = if landing { target } else { t + step };
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                let factor = if e == 0.0 { MAX_FACTOR } else { (SAFETY * e.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR) };
                // a step shortened to land on an output time says nothing about h
                let proposed = step * factor;
                h = if landing { h.max(proposed) } else { proposed };
            } else {
                stats.rejected += 1;
                h = step * (SAFETY * e.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Numeric(format!("step size underflow at t = {t}")));
                }
            }
        }
        observe(idx, target, &y)?;
    }
    Ok(stats)
}

/// Starting step from the derivative scales (Hairer, Nørsett & Wanner).
fn initial_step<F>(f: &mut F, y: &[C64], f0: &[C64], span: f64, tol: &Tolerances, stats: &mut StepStats) -> f64
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = y.len();
    let zeros = vec![ZERO; n];
    let d0 = error_norm(y, y, &zeros, tol);
    let d1 = error_norm(f0, y, &zeros, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span.abs());
    let y1: Vec<C64> = y.iter().zip(f0).map(|(a, b)| a + b * h0).collect();
    let mut f1 = vec![ZERO; n];
    f(&y1, &mut f1);
    stats.rhs_evals += 1;
    let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = error_norm(&diff, y, &zeros, tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span.abs()).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_and_rotation() {
        // y' = (−0.3 + 2i) y
        let rate = C64::new(-0.3, 2.0);
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let mut got = Vec::new();
        let stats = integrate(
            |y, out| out[0] = rate * y[0],
            &[C64::new(1.0, 0.0)],
            &times,
            &Tolerances::default(),
            |_, t, y| {
                got.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(got.len(), times.len());
        for (t, y) in got {
            let exact = (rate * t).exp();
            assert!((y - exact).norm() < 1e-8, "t={t}: {y} vs {exact}");
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn tighter_tolerance_gives_smaller_global_error() {
        let run = |rtol: f64| {
            let tol = Tolerances { rtol, atol: rtol * 1e-2, ..Tolerances::default() };
            let mut last = ZERO;
            integrate(
                |y, out| {
                    out[0] = y[1];
                    out[1] = -y[0];
                },
                &[C64::new(1.0, 0.0), ZERO],
                &[0.0, 10.0],
                &tol,
                |_, _, y| {
                    last = y[0];
                    Ok(())
                },
            )
            .unwrap();
            (last - C64::new(10f64.cos(), 0.0)).norm()
        };
        let coarse = run(1e-5);
        let fine = run(1e-9);
        assert!(fine < coarse);
        assert!(fine < 1e-8);
    }

    #[test]
    fn lands_exactly_on_output_times() {
        let times = [0.0, 0.1, 0.35, 1.0];
        let mut seen = Vec::new();
        integrate(
            |y, out| out[0] = -y[0],
            &[C64::new(1.0, 0.0)],
            &times,
            &Tolerances::default(),
            |_, t, _| {
                seen.push(t);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen, times);
    }
}
