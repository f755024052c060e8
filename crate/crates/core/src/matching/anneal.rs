//! Simulated annealing over `(log10 c, log10 l)` for one matching tier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    /// Starting temperature, on the scale of the normalized cost (mean |Γ|³).
    pub initial_temperature: f64,
    /// Geometric cooling factor in (0, 1).
    pub cooling_factor: f64,
    pub iterations_per_temperature: usize,
    pub temperature_levels: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Gaussian step standard deviation in decades at temperature 1.
    pub step_decades: f64,
    /// Search box for log10 of the series capacitance (F).
    pub log10_c_bounds: (f64, f64),
    /// Search box for log10 of the shunt inductance (H).
    pub log10_l_bounds: (f64, f64),
    /// Polish each restart's best point with a bounded simplex search.
    pub refine: bool,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            initial_temperature: 1.0,
            cooling_factor: 0.95,
            iterations_per_temperature: 200,
            temperature_levels: 20,
            restarts: 8,
            seed: 42,
            step_decades: 0.5,
            log10_c_bounds: (-9.0, -4.0),
            log10_l_bounds: (-5.0, 1.0),
            refine: true,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_temperature.is_finite() && self.initial_temperature > 0.0) {
            return Err(Error::param("initial temperature must be > 0"));
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return Err(Error::param("cooling factor must lie in (0, 1)"));
        }
        if self.iterations_per_temperature == 0 || self.temperature_levels == 0 || self.restarts == 0 {
            return Err(Error::param("anneal counts must all be >= 1"));
        }
        if !(self.step_decades.is_finite() && self.step_decades > 0.0) {
            return Err(Error::param("step size must be > 0"));
        }
        for (name, (lo, hi)) in [("c", self.log10_c_bounds), ("l", self.log10_l_bounds)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::param(format!("invalid log10 {name} bounds ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    fn bounds(&self) -> [(f64, f64); 2] {
        [self.log10_c_bounds, self.log10_l_bounds]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AnnealOutcome {
    /// Best point in `(log10 c, log10 l)`.
    pub point: [f64; 2],
    pub cost: f64,
    pub restart: usize,
    pub accepted: usize,
    pub evaluations: usize,
}

/// Minimizes `cost` independently from every restart and keeps the lowest
/// cost, ties going to the lowest restart index.
pub(crate) fn anneal<F>(config: &AnnealConfig, cost: F) -> Result<AnnealOutcome>
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    config.validate()?;
    let runs: Vec<AnnealOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut out = run_chain(config, r, &cost);
            if config.refine {
                let (point, value, evaluations) = nelder_mead(out.point, &config.bounds(), &cost);
                out.evaluations += evaluations;
                if value < out.cost {
                    out.point = point;
                    out.cost = value;
                }
            }
            out
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.cost < a.cost { b } else { a })
        .expect("restarts >= 1");
    Ok(best)
}

fn chain_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let mut y = (x - lo).rem_euclid(2.0 * width);
    if y > width {
        y = 2.0 * width - y;
    }
    lo + y
}

fn run_chain<F>(config: &AnnealConfig, restart: usize, cost: &F) -> AnnealOutcome
where
    F: Fn([f64; 2]) -> f64,
{
    let mut rng = chain_rng(config.seed, restart);
    let bounds = config.bounds();
    let mut current = [
        rng.random_range(bounds[0].0..bounds[0].1),
        rng.random_range(bounds[1].0..bounds[1].1),
    ];
    let mut current_cost = sanitize(cost(current));
    let mut best = current;
    let mut best_cost = current_cost;
    let mut accepted = 0;
    let mut evaluations = 1;

    let mut temperature = config.initial_temperature;
    for _ in 0..config.temperature_levels {
        let sigma = config.step_decades * temperature;
        for _ in 0..config.iterations_per_temperature {
            let mut candidate = current;
            for (d, (lo, hi)) in bounds.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                candidate[d] = reflect(current[d] + sigma * z, *lo, *hi);
            }
            let candidate_cost = sanitize(cost(candidate));
            evaluations += 1;
            let delta = candidate_cost - current_cost;
            let u: f64 = rng.random();
            if delta <= 0.0 || u < (-delta / temperature).exp() {
                current = candidate;
                current_cost = candidate_cost;
                accepted += 1;
                if current_cost < best_cost {
                    best = current;
                    best_cost = current_cost;
                }
            }
        }
        temperature *= config.cooling_factor;
    }
    AnnealOutcome {
        point: best,
        cost: best_cost,
        restart,
        accepted,
        evaluations,
    }
}

const SIMPLEX_STEP: f64 = 0.05;
const SIMPLEX_MAX_ITER: usize = 2000;
const SIMPLEX_XTOL: f64 = 1e-12;

/// Bounded Nelder–Mead from `start`; returns the best vertex, its cost and
/// the number of evaluations.
fn nelder_mead<F>(start: [f64; 2], bounds: &[(f64, f64); 2], cost: &F) -> ([f64; 2], f64, usize)
where
    F: Fn([f64; 2]) -> f64,
{
    let clamp = |p: [f64; 2]| {
        [
            p[0].clamp(bounds[0].0, bounds[0].1),
            p[1].clamp(bounds[1].0, bounds[1].1),
        ]
    };
    let mut evals = 0;
    let mut eval = |p: [f64; 2]| {
        evals += 1;
        sanitize(cost(p))
    };
    let mut simplex: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    for d in 0..3 {
        let mut p = start;
        if d > 0 {
            let i = d - 1;
            p[i] += if p[i] + SIMPLEX_STEP <= bounds[i].1 {
                SIMPLEX_STEP
            } else {
                -SIMPLEX_STEP
            };
        }
        let p = clamp(p);
        simplex.push((p, eval(p)));
    }
    for _ in 0..SIMPLEX_MAX_ITER {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| (p[0] - simplex[0].0[0]).abs().max((p[1] - simplex[0].0[1]).abs()))
            .fold(0.0, f64::max);
        if size < SIMPLEX_XTOL {
            break;
        }
        let (best, worst) = (simplex[0], simplex[2]);
        let centroid = [
            (simplex[0].0[0] + simplex[1].0[0]) / 2.0,
            (simplex[0].0[1] + simplex[1].0[1]) / 2.0,
        ];
        let along = |t: f64| {
            clamp([
                centroid[0] + t * (worst.0[0] - centroid[0]),
                centroid[1] + t * (worst.0[1] - centroid[1]),
            ])
        };
        let r = along(-1.0);
        let fr = eval(r);
        if fr < best.1 {
            let e = along(-2.0);
            let fe = eval(e);
            simplex[2] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (r, fr);
        } else {
            let c = if fr < worst.1 { along(-0.5) } else { along(0.5) };
            let fc = eval(c);
            if fc < worst.1.min(fr) {
                simplex[2] = (c, fc);
            } else {
                for v in simplex.iter_mut().skip(1) {
                    let p = [(v.0[0] + best.0[0]) / 2.0, (v.0[1] + best.0[1]) / 2.0];
                    *v = (p, eval(p));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, evals)
}

fn sanitize(c: f64) -> f64 {
    if c.is_nan() {
        f64::INFINITY
    } else {
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_stays_in_bounds() {
        for x in [-7.5, -3.0, 0.0, 2.2, 9.9, -100.0] {
            let y = reflect(x, -1.0, 1.0);
            assert!((-1.0..=1.0).contains(&y), "{x} -> {y}");
        }
        assert_eq!(reflect(0.5, -1.0, 1.0), 0.5);
        assert!((reflect(1.25, -1.0, 1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn finds_quadratic_minimum() {
        let cfg = AnnealConfig::default();
        let out = anneal(&cfg, |p| ((p[0] + 7.0).powi(2) + (p[1] + 2.0).powi(2)) / 50.0).unwrap();
        assert!((out.point[0] + 7.0).abs() < 0.1, "{:?}", out.point);
        assert!((out.point[1] + 2.0).abs() < 0.1, "{:?}", out.point);
    }

    #[test]
    fn simplex_polishes_to_tolerance() {
        let bounds = [(-9.0, -4.0), (-5.0, 1.0)];
        let f = |p: [f64; 2]| (p[0] + 7.3).powi(2) + 3.0 * (p[1] - 0.2).powi(2) + 0.5 * (p[0] + 7.3) * (p[1] - 0.2);
        let (p, v, _) = nelder_mead([-6.0, -1.0], &bounds, &f);
        assert!((p[0] + 7.3).abs() < 1e-6 && (p[1] - 0.2).abs() < 1e-6, "{p:?}");
        assert!(v < 1e-12);
        // Minimum outside the box lands on the boundary.
        let (p, _, _) = nelder_mead([-5.0, 0.0], &bounds, &|p: [f64; 2]| (p[0] + 3.0).powi(2) + p[1].powi(2));
        assert!((p[0] + 4.0).abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = AnnealConfig {
            restarts: 4,
            iterations_per_temperature: 50,
            ..AnnealConfig::default()
        };
        let f = |p: [f64; 2]| (p[0] * 3.0).sin().abs() + (p[1] + 1.0).abs();
        assert_eq!(anneal(&cfg, f).unwrap(), anneal(&cfg, f).unwrap());
    }

    #[test]
    fn config_validation() {
        let d = AnnealConfig::default;
        assert!(AnnealConfig {
            cooling_factor: 1.0,
            ..d()
        }
        .validate()
        .is_err());
        assert!(AnnealConfig { restarts: 0, ..d() }.validate().is_err());
        assert!(AnnealConfig {
            log10_l_bounds: (1.0, -1.0),
            ..d()
        }
        .validate()
        .is_err());
    }
}
