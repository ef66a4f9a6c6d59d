//! Adaptive explicit time integration.
//!
//! Embedded Dormand-Prince 5(4) pair with FSAL, PI step-size control and
//! fourth-order dense output, following the classical formulation. Run at a
//! tight tolerance the temporal error is negligible next to the spatial
//! error, which is all the experiments require of it.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct IntegratorConfig {
    pub reltol: f64,
    pub abstol: f64,
    pub max_steps: usize,
    /// `None` selects the starting step automatically.
    pub initial_dt: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            reltol: 1e-9,
            abstol: 1e-11,
            max_steps: 50_000_000,
            initial_dt: None,
        }
    }
}

impl IntegratorConfig {
    pub fn with_reltol(reltol: f64) -> Self {
        IntegratorConfig {
            reltol,
            abstol: reltol * 1e-2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-13..=1e-2).contains(&self.reltol) {
            return Err(Error::InvalidInput(format!(
                "reltol {} outside [1e-13, 1e-2]",
                self.reltol
            )));
        }
        if !(self.abstol >= 0.0) {
            return Err(Error::InvalidInput("abstol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Error weights (5th-order minus embedded 4th-order solution).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

struct DenseSegment {
    t_old: f64,
    h: f64,
    cont: [Vec<f64>; 5],
}

impl DenseSegment {
    fn eval(&self, t: f64) -> Vec<f64> {
        let theta = (t - self.t_old) / self.h;
        let th1 = 1.0 - theta;
        (0..self.cont[0].len())
            .map(|i| {
                self.cont[0][i]
                    + theta
                        * (self.cont[1][i]
                            + th1
                                * (self.cont[2][i]
                                    + theta * (self.cont[3][i] + th1 * self.cont[4][i])))
            })
            .collect()
    }
}

fn wrms(err: &[f64], y0: &[f64], y1: &[f64], atol: f64, rtol: f64) -> f64 {
    let n = err.len().max(1);
    let mut acc = 0.0;
    for i in 0..err.len() {
        let sk = atol + rtol * y0[i].abs().max(y1[i].abs());
        let e = err[i] / sk;
        acc += e * e;
    }
    (acc / n as f64).sqrt()
}

/// Integrate `dy/dt = rhs(t, y)` from `t0` to `t1`.
///
/// The observer is called at every requested output time (ascending, within
/// `[t0, t1]`) using dense output; the returned state is the solution at
/// `t1` (the final step is clamped to hit it exactly).
pub fn integrate<F, O>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
    output_times: &[f64],
    mut observer: O,
) -> Result<(Vec<f64>, StepStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    O: FnMut(f64, &[f64]),
{
    config.validate()?;
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!(
            "integration span [{t0}, {t1}] is empty"
        )));
    }
    let span = t1 - t0;
    let (rtol, atol) = (config.reltol, config.abstol);
    let mut stats = StepStats::default();
    let n = y0.len();

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut out_idx = 0;
    while out_idx < output_times.len() && output_times[out_idx] <= t0 {
        observer(output_times[out_idx], &y);
        out_idx += 1;
    }

    let mut k1 = rhs(t, &y)?;
    stats.rhs_evals += 1;

    // Starting step: compare the sizes of y and f, probe one Euler step.
    let mut dt = match config.initial_dt {
        Some(h) => h.min(span),
        None => {
            let d0 = wrms(&y, &y, &y, atol, rtol);
            let d1 = wrms(&k1, &y, &y, atol, rtol);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * (d0 / d1)
            }
            .min(span);
            let y1: Vec<f64> = (0..n).map(|i| y[i] + h0 * k1[i]).collect();
            match rhs(t + h0, &y1) {
                Ok(f1) => {
                    stats.rhs_evals += 1;
                    let diff: Vec<f64> = (0..n).map(|i| (f1[i] - k1[i]) / h0).collect();
                    let d2 = wrms(&diff, &y, &y, atol, rtol);
                    let h1 = if d1.max(d2) <= 1e-15 {
                        (h0 * 1e-3).max(1e-6)
                    } else {
                        (0.01 / d1.max(d2)).powf(0.2)
                    };
                    (100.0 * h0).min(h1).min(span)
                }
                Err(_) => h0,
            }
        }
    };

    // PI controller constants (classical DOPRI5 values).
    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;
    let safe = 0.9;
    let (facmin, facmax) = (0.2, 10.0);
    let mut facold: f64 = 1e-4;

    let mut k = vec![vec![0.0; n]; 7];
    loop {
        if stats.accepted + stats.rejected >= config.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: config.max_steps,
                t,
            });
        }
        if dt.abs() < 1e-14 * span {
            return Err(Error::StepUnderflow { dt, t });
        }
        let mut last = false;
        if t + dt >= t1 {
            dt = t1 - t;
            last = true;
        }

        // Stages (k1 carried over, FSAL).
        k[0].copy_from_slice(&k1);
        let mut failed_stage = false;
        let mut ytmp = vec![0.0; n];
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                ytmp[i] = y[i] + dt * acc;
            }
            match rhs(t + C[s] * dt, &ytmp) {
                Ok(f) => {
                    stats.rhs_evals += 1;
                    k[s] = f;
                }
                Err(_) => {
                    failed_stage = true;
                    break;
                }
            }
        }
        if failed_stage {
            stats.rejected += 1;
            dt *= 0.5;
            continue;
        }
        // 5th-order solution is stage 7's argument (ytmp holds it after the
        // last stage because a7j are the b-weights).
        let y_new = ytmp.clone();
        let err_vec: Vec<f64> = (0..n)
            .map(|i| {
                dt * (E[0] * k[0][i]
                    + E[2] * k[2][i]
                    + E[3] * k[3][i]
                    + E[4] * k[4][i]
                    + E[5] * k[5][i]
                    + E[6] * k[6][i])
            })
            .collect();
        let err = wrms(&err_vec, &y, &y_new, atol, rtol);

        if !err.is_finite() {
            stats.rejected += 1;
            dt *= 0.5;
            continue;
        }
        if err > 1.0 {
            // Reject; shrink with the plain controller.
            stats.rejected += 1;
            let fac11 = err.powf(expo1);
            dt /= (fac11 / safe).min(1.0 / facmin);
            continue;
        }

        // Accept.
        stats.accepted += 1;
        let segment = if out_idx < output_times.len() && output_times[out_idx] <= t + dt + 1e-14 * span
        {
            let ydiff: Vec<f64> = (0..n).map(|i| y_new[i] - y[i]).collect();
            let bspl: Vec<f64> = (0..n).map(|i| dt * k[0][i] - ydiff[i]).collect();
            let cont4: Vec<f64> = (0..n).map(|i| ydiff[i] - dt * k[6][i] - bspl[i]).collect();
            let cont5: Vec<f64> = (0..n)
                .map(|i| {
                    dt * (D[0] * k[0][i]
                        + D[2] * k[2][i]
                        + D[3] * k[3][i]
                        + D[4] * k[4][i]
                        + D[5] * k[5][i]
                        + D[6] * k[6][i])
                })
                .collect();
            Some(DenseSegment {
                t_old: t,
                h: dt,
                cont: [y.clone(), ydiff, bspl, cont4, cont5],
            })
        } else {
            None
        };

        let t_new = t + dt;
        if let Some(seg) = &segment {
            while out_idx < output_times.len() && output_times[out_idx] <= t_new + 1e-14 * span {
                let tau = output_times[out_idx].min(t_new);
                observer(tau, &seg.eval(tau));
                out_idx += 1;
            }
        }

        k1.copy_from_slice(&k[6]); // FSAL
        y = y_new;
        t = t_new;
        if last {
            while out_idx < output_times.len() {
                observer(output_times[out_idx].min(t1), &y);
                out_idx += 1;
            }
            return Ok((y, stats));
        }

        // PI step-size update.
        let fac11 = err.max(1e-32).powf(expo1);
        let fac = (fac11 / facold.powf(beta) / safe).clamp(1.0 / facmax, 1.0 / facmin);
        facold = err.max(1e-4);
        dt /= fac;
    }
}
