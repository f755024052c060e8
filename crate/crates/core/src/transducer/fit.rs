//! Damped least-squares fit of the simplified three-parameter model.
//!
//! Parameters are searched as `(ln R_E, ln C_E, Re'(Z_S))`, which keeps the
//! two dielectric parameters positive and balances their scales. The
//! Jacobian of the simplified model is analytic:
//!
//! ```text
//! Re Z = T + Re',  T = 1/(R_E ω² C_E²)     ∂/∂lnR = −T,  ∂/∂lnC = −2T,  ∂/∂Re' = 1
//! Im Z = −1/(ω C_E)                        ∂/∂lnR = 0,   ∂/∂lnC = 1/(ωC_E)
//! ```

use std::f64::consts::TAU;

use super::{simplified_unchecked, ImpedanceSweep, PztCircuitParams};
use crate::error::FitFailure;
use crate::{Error, Result};

/// Per-sample weighting of the complex residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitWeighting {
    /// Minimize `Σ |Z_model − Z_meas|²`.
    Absolute,
    /// Minimize `Σ |Z_model − Z_meas|² / |Z_meas|²`, suited to noise that
    /// scales with the measured magnitude.
    #[default]
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub weighting: FitWeighting,
    /// Iteration budget per start.
    pub max_iterations: usize,
    /// Number of log-spaced initial `C_E` guesses.
    pub starts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            weighting: FitWeighting::Relative,
            max_iterations: 500,
            starts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: PztCircuitParams,
    /// `sqrt(Σ|ΔZ|² / Σ|Z_meas|²)` at the solution.
    pub residual: f64,
    pub iterations: usize,
}

/// Fits `(R_E, C_E, Re'(Z_S))` with the default options.
pub fn fit_params(sweep: &ImpedanceSweep) -> Result<FitReport> {
    fit_params_with(sweep, &FitOptions::default())
}

pub fn fit_params_with(sweep: &ImpedanceSweep, options: &FitOptions) -> Result<FitReport> {
    if sweep.len() < 3 {
        return Err(Error::param(format!(
            "fitting needs at least 3 sweep points, got {}",
            sweep.len()
        )));
    }
    if options.starts == 0 || options.max_iterations == 0 {
        return Err(Error::param("fit needs at least one start and one iteration"));
    }
    let problem = Problem::new(sweep, options.weighting);

    let c_guess = problem.capacitance_guess();
    let x_max = problem.omegas.iter().map(|w| 1.0 / (w * c_guess)).fold(0.0, f64::max);
    let r0 = (100.0 * x_max).max(1.0);
    let re0 = problem.meas.iter().map(|z| z.0).fold(f64::INFINITY, f64::min).max(0.0);

    let mut best: Option<Outcome> = None;
    let n = options.starts;
    for s in 0..n {
        // Log-spaced over two decades centred on the reactance-based guess.
        let offset = if n == 1 {
            0.0
        } else {
            -1.0 + 2.0 * s as f64 / (n - 1) as f64
        };
        let start = [r0.ln(), (c_guess * 10f64.powf(offset)).ln(), re0];
        let outcome = levenberg_marquardt(&problem, start, options.max_iterations);
        if best.as_ref().is_none_or(|b| outcome.cost < b.cost) {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one start");
    let params = PztCircuitParams {
        r_e: best.x[0].exp(),
        c_e: best.x[1].exp(),
        re_zs_eff: best.x[2],
        mechanical: None,
    };
    let residual = problem.relative_residual(&params);
    // A capacitance six decades away from the reactance guess, or a vanishing
    // R_E, means the iterate ran off to a degenerate boundary.
    let z_scale = problem
        .meas
        .iter()
        .map(|z| z.0.hypot(z.1))
        .fold(f64::INFINITY, f64::min);
    let runaway = (params.c_e / c_guess).log10().abs() > 6.0 || params.r_e < 1e-6 * z_scale;
    if !best.converged || runaway || params.validate().is_err() {
        return Err(Error::Fit(Box::new(FitFailure {
            best: params,
            residual,
            iterations: best.iterations,
        })));
    }
    Ok(FitReport {
        params,
        residual,
        iterations: best.iterations,
    })
}

struct Problem {
    omegas: Vec<f64>,
    /// Measured (re, im).
    meas: Vec<(f64, f64)>,
    weights: Vec<f64>,
    freqs: Vec<f64>,
}

struct Outcome {
    x: [f64; 3],
    cost: f64,
    converged: bool,
    iterations: usize,
}

impl Problem {
    fn new(sweep: &ImpedanceSweep, weighting: FitWeighting) -> Self {
        let freqs: Vec<f64> = sweep.frequencies().collect();
        let omegas = freqs.iter().map(|f| TAU * f).collect();
        let meas = sweep.entries().iter().map(|(_, z)| (z.re, z.im)).collect();
        let weights = sweep
            .entries()
            .iter()
            .map(|(_, z)| match weighting {
                FitWeighting::Absolute => 1.0,
                FitWeighting::Relative => 1.0 / z.norm().max(f64::MIN_POSITIVE),
            })
            .collect();
        Self {
            omegas,
            meas,
            weights,
            freqs,
        }
    }

    /// Median of `1/(ω·|X|)` over samples with capacitive reactance.
    fn capacitance_guess(&self) -> f64 {
        let mut cs: Vec<f64> = self
            .omegas
            .iter()
            .zip(&self.meas)
            .filter(|(_, m)| m.1 < 0.0)
            .map(|(w, m)| 1.0 / (w * -m.1))
            .collect();
        if cs.is_empty() {
            // No capacitive sample; fall back to the magnitude.
            cs = self
                .omegas
                .iter()
                .zip(&self.meas)
                .map(|(w, m)| 1.0 / (w * m.0.hypot(m.1).max(1e-12)))
                .collect();
        }
        cs.sort_by(f64::total_cmp);
        cs[cs.len() / 2]
    }

    fn cost(&self, x: &[f64; 3]) -> f64 {
        let (r, c) = (x[0].exp(), x[1].exp());
        self.omegas
            .iter()
            .zip(&self.meas)
            .zip(&self.weights)
            .map(|((w, m), wt)| {
                let wc = w * c;
                let dr = 1.0 / (r * wc * wc) + x[2] - m.0;
                let di = -1.0 / wc - m.1;
                wt * wt * (dr * dr + di * di)
            })
            .sum()
    }

    /// Normal equations `JᵀJ` and `Jᵀr` at `x`.
    fn normal_equations(&self, x: &[f64; 3]) -> ([[f64; 3]; 3], [f64; 3]) {
        let (r, c) = (x[0].exp(), x[1].exp());
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for ((w, m), wt) in self.omegas.iter().zip(&self.meas).zip(&self.weights) {
            let wc = w * c;
            let t = 1.0 / (r * wc * wc);
            let xc = 1.0 / wc;
            let rows = [
                ([-t * wt, -2.0 * t * wt, *wt], (t + x[2] - m.0) * wt),
                ([0.0, xc * wt, 0.0], (-xc - m.1) * wt),
            ];
            for (j, res) in rows {
                for a in 0..3 {
                    jtr[a] += j[a] * res;
                    for b in 0..3 {
                        jtj[a][b] += j[a] * j[b];
                    }
                }
            }
        }
        (jtj, jtr)
    }

    fn relative_residual(&self, params: &PztCircuitParams) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (f, m) in self.freqs.iter().zip(&self.meas) {
            let z = simplified_unchecked(params, *f);
            num += (z.re - m.0).powi(2) + (z.im - m.1).powi(2);
            den += m.0 * m.0 + m.1 * m.1;
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        }
    }
}

fn levenberg_marquardt(problem: &Problem, start: [f64; 3], max_iterations: usize) -> Outcome {
    let mut x = start;
    let mut cost = problem.cost(&x);
    let scale = problem
        .meas
        .iter()
        .zip(&problem.weights)
        .map(|(m, w)| w * w * (m.0 * m.0 + m.1 * m.1))
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iterations {
        iterations += 1;
        if cost <= 1e-30 * scale {
            converged = true;
            break;
        }
        let (mut jtj, mut jtr) = problem.normal_equations(&x);
        // Re' pinned at its bound with the descent direction pointing out of
        // the feasible set: hold it fixed for this step.
        if x[2] <= 0.0 && jtr[2] > 0.0 {
            jtj[2] = [0.0; 3];
            for row in jtj.iter_mut() {
                row[2] = 0.0;
            }
            jtj[2][2] = 1.0;
            jtr[2] = 0.0;
        }
        let grad_norm = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm <= 1e-14 * scale.sqrt() * cost.sqrt().max(f64::MIN_POSITIVE).sqrt() {
            converged = true;
            break;
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for (d, row) in a.iter_mut().enumerate() {
                row[d] += lambda * jtj[d][d].max(1e-300);
            }
            let rhs = [-jtr[0], -jtr[1], -jtr[2]];
            let Some(step) = solve3(a, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = [x[0] + step[0], x[1] + step[1], x[2] + step[2]];
            if trial[2] < 0.0 {
                trial[2] = 0.0;
            }
            let trial_cost = problem.cost(&trial);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel_drop = (cost - trial_cost) / cost;
                let step_size = (0..3)
                    .map(|i| (trial[i] - x[i]).abs() / (1.0 + x[i].abs()))
                    .fold(0.0, f64::max);
                x = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_drop < 1e-15 || step_size < 1e-14 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left at any damping: a stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Outcome {
        x,
        cost,
        converged,
        iterations,
    }
}

/// Gaussian elimination with partial pivoting on a 3×3 system.
#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_freqs(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn solve3_identity() {
        let x = solve3([[2.0, 0.0, 0.0], [0.0, 4.0, 0.0], [1.0, 0.0, 1.0]], [2.0, 8.0, 4.0]).unwrap();
        assert_eq!(x, [1.0, 2.0, 3.0]);
        assert!(solve3([[0.0; 3]; 3], [1.0; 3]).is_none());
    }

    #[test]
    fn noiseless_roundtrip() {
        let truth = PztCircuitParams::new(200e3, 22e-9, 450.0).unwrap();
        let sweep = ImpedanceSweep::from_model(&truth, &log_freqs(200.0, 200e3, 60)).unwrap();
        let fit = fit_params(&sweep).unwrap();
        assert!(fit.residual < 1e-9, "residual {}", fit.residual);
        assert!((fit.params.r_e / truth.r_e - 1.0).abs() < 1e-6);
        assert!((fit.params.c_e / truth.c_e - 1.0).abs() < 1e-6);
        assert!((fit.params.re_zs_eff / truth.re_zs_eff - 1.0).abs() < 1e-6);
    }

    #[test]
    fn too_few_points_rejected() {
        let truth = PztCircuitParams::new(200e3, 22e-9, 450.0).unwrap();
        let sweep = ImpedanceSweep::from_model(&truth, &[1e3, 2e3]).unwrap();
        assert!(matches!(fit_params(&sweep), Err(Error::Parameter(_))));
    }

    #[test]
    fn inductive_data_is_a_fit_error() {
        let entries = [1e3, 2e3, 4e3]
            .iter()
            .map(|&f| (f, num_complex::Complex64::new(100.0, f / 20.0)))
            .collect();
        let sweep = ImpedanceSweep::new(entries).unwrap();
        assert!(matches!(fit_params(&sweep), Err(Error::Fit(_))));
    }

    #[test]
    fn iteration_budget_exhaustion_reports_best() {
        let truth = PztCircuitParams::new(200e3, 22e-9, 450.0).unwrap();
        let sweep = ImpedanceSweep::from_model(&truth, &log_freqs(200.0, 200e3, 40)).unwrap();
        let opts = FitOptions {
            max_iterations: 1,
            ..FitOptions::default()
        };
        match fit_params_with(&sweep, &opts) {
            Err(Error::Fit(failure)) => {
                assert!(failure.residual.is_finite());
                assert_eq!(failure.iterations, 1);
            }
            other => panic!("expected fit error, got {other:?}"),
        }
    }
}
