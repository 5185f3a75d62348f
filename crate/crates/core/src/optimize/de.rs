//! Seeded DE/rand/1/bin.
//!
//! All random draws of a generation (donor indices, crossover mask) are made
//! on the calling thread before the trial vectors are evaluated, so results
//! depend only on the seed and never on how evaluations are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl Bound {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
        }
    }

    fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Folds `x` back into the interval by mirror reflection at both ends.
    fn reflect(&self, x: f64) -> f64 {
        let w = self.width();
        if w == 0.0 {
            return self.lower;
        }
        let period = 2.0 * w;
        let y = (x - self.lower).rem_euclid(period);
        let y = if y > w { period - y } else { y };
        (self.lower + y).clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    bounds: Vec<Bound>,
}

impl SearchSpace {
    /// A box `lower ≤ x ≤ upper` per dimension; `lower == upper` pins it.
    pub fn new(bounds: Vec<Bound>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidSpace("no dimensions".into()));
        }
        for b in &bounds {
            if !(b.lower.is_finite() && b.upper.is_finite()) || b.lower > b.upper {
                return Err(Error::InvalidSpace(format!(
                    "bound '{}' = [{}, {}] is not a finite interval",
                    b.name, b.lower, b.upper
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.bounds.iter().map(|b| b.name.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub population_size: usize,
    /// Differential weight F.
    pub weight: f64,
    /// Crossover probability CR.
    pub crossover: f64,
    pub max_generations: usize,
    /// Stop once the population's value spread is below
    /// `tolerance·max(1, |best|)`.
    pub tolerance: f64,
    pub seed: u64,
    /// Number of independent runs; the best one is reported.
    pub restarts: usize,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            weight: 0.8,
            crossover: 0.9,
            max_generations: 300,
            tolerance: 1e-8,
            seed: 0x5eed,
            restarts: 4,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.population_size < 8 {
            return bad(format!("population size must be ≥ 8, got {}", self.population_size));
        }
        if !(self.weight > 0.0 && self.weight <= 2.0) {
            return bad(format!("differential weight must lie in (0, 2], got {}", self.weight));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return bad(format!("crossover must lie in [0, 1], got {}", self.crossover));
        }
        if self.max_generations == 0 || self.restarts == 0 {
            return bad("max_generations and restarts must be ≥ 1".into());
        }
        if !(self.tolerance >= 0.0) {
            return bad(format!("tolerance must be ≥ 0, got {}", self.tolerance));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub names: Vec<String>,
    pub best_params: Vec<f64>,
    pub best_value: f64,
    /// Objective evaluations over all restarts.
    pub evaluations: usize,
    /// Whether the winning run met the spread tolerance.
    pub converged: bool,
    /// Best value after each generation of the winning run.
    pub trace: Vec<f64>,
    /// Best value of every run, in restart order.
    pub restart_values: Vec<f64>,
}

impl OptResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.best_params[i])
    }
}

struct Run {
    best: Vec<f64>,
    value: f64,
    evaluations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

fn evaluate_all<F>(objective: &F, points: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    points.par_iter().map(|x| sanitize(objective(x))).collect()
}

fn run_once<F>(objective: &F, space: &SearchSpace, cfg: &DeConfig, stream: u64) -> Run
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let np = cfg.population_size;
    let dim = space.dim();
    let bounds = space.bounds();

    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            bounds
                .iter()
                .map(|b| if b.width() == 0.0 { b.lower } else { rng.random_range(b.lower..=b.upper) })
                .collect()
        })
        .collect();
    let mut values = evaluate_all(objective, &pop);
    let mut evaluations = np;
    let mut trace = Vec::with_capacity(cfg.max_generations);
    let mut converged = false;

    for _ in 0..cfg.max_generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut pick = |exclude: &[usize]| loop {
                    let k = rng.random_range(0..np);
                    if !exclude.contains(&k) {
                        break k;
                    }
                };
                let a = pick(&[i]);
                let b = pick(&[i, a]);
                let c = pick(&[i, a, b]);
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|j| {
                        let cross = rng.random::<f64>() < cfg.crossover || j == forced;
                        if cross {
                            let v = pop[a][j] + cfg.weight * (pop[b][j] - pop[c][j]);
                            bounds[j].reflect(v)
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();

        let trial_values = evaluate_all(objective, &trials);
        evaluations += np;
        for (i, (x, v)) in trials.into_iter().zip(trial_values).enumerate() {
            if v >= values[i] {
                pop[i] = x;
                values[i] = v;
            }
        }

        let (best, worst) = values
            .iter()
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &v| (hi.max(v), lo.min(v)));
        trace.push(best);
        if best.is_finite() && worst.is_finite() && best - worst <= cfg.tolerance * best.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    let best_idx = argmax(&values);
    Run {
        best: pop[best_idx].clone(),
        value: values[best_idx],
        evaluations,
        converged,
        trace,
    }
}

fn argmax(values: &[f64]) -> usize {
    // First maximum, for a deterministic tie-break.
    let mut idx = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[idx] {
            idx = i;
        }
    }
    idx
}

/// Maximises `objective` over `space`.
///
/// Non-finite objective values are treated as −∞. Each restart uses its own
/// ChaCha stream of `cfg.seed`, so any subset of restarts can be reproduced.
pub fn differential_evolution<F>(objective: F, space: &SearchSpace, cfg: &DeConfig) -> Result<OptResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let runs: Vec<Run> = (0..cfg.restarts as u64).map(|r| run_once(&objective, space, cfg, r)).collect();
    let restart_values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let winner = runs
        .into_iter()
        .reduce(|best, r| if r.value > best.value { r } else { best })
        .expect("at least one restart");
    Ok(OptResult {
        names: space.names(),
        best_params: winner.best,
        best_value: winner.value,
        evaluations,
        converged: winner.converged,
        trace: winner.trace,
        restart_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sphere(x: &[f64]) -> f64 {
        -x.iter().map(|v| v * v).sum::<f64>()
    }

    fn neg_rastrigin(x: &[f64]) -> f64 {
        -(10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (TAU * v).cos()).sum::<f64>())
    }

    fn cube(d: usize, lo: f64, hi: f64) -> SearchSpace {
        SearchSpace::new((0..d).map(|i| Bound::new(format!("x{i}"), lo, hi)).collect()).unwrap()
    }

    #[test]
    fn sphere_reaches_origin() {
        let cfg = DeConfig {
            max_generations: 200,
            restarts: 1,
            ..DeConfig::default()
        };
        let r = differential_evolution(sphere, &cube(3, -5.0, 5.0), &cfg).unwrap();
        assert!(r.best_value >= -1e-6, "{}", r.best_value);
        assert_eq!(r.best_value, sphere(&r.best_params));
    }

    #[test]
    fn rastrigin_global_optimum_with_restarts() {
        let cfg = DeConfig {
            restarts: 3,
            ..DeConfig::default()
        };
        let r = differential_evolution(neg_rastrigin, &cube(2, -5.12, 5.12), &cfg).unwrap();
        assert!(r.best_value >= -1e-4, "{}", r.best_value);
        assert_eq!(r.restart_values.len(), 3);
        assert!(r.restart_values.iter().all(|&v| r.best_value >= v));
    }

    #[test]
    fn pinned_bounds_return_the_point() {
        let space = SearchSpace::new(vec![Bound::new("a", 1.5, 1.5), Bound::new("b", -2.0, -2.0)]).unwrap();
        let cfg = DeConfig {
            restarts: 1,
            ..DeConfig::default()
        };
        let r = differential_evolution(sphere, &space, &cfg).unwrap();
        assert_eq!(r.best_params, vec![1.5, -2.0]);
        assert!(r.converged);
    }

    #[test]
    fn invalid_spaces_and_configs_rejected() {
        assert!(SearchSpace::new(vec![]).is_err());
        assert!(SearchSpace::new(vec![Bound::new("a", 1.0, 0.0)]).is_err());
        assert!(SearchSpace::new(vec![Bound::new("a", 0.0, f64::INFINITY)]).is_err());
        let space = cube(1, 0.0, 1.0);
        let small = DeConfig {
            population_size: 4,
            ..DeConfig::default()
        };
        assert!(differential_evolution(sphere, &space, &small).is_err());
    }

    #[test]
    fn non_finite_values_are_pruned() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { -(x[0] - 0.3).powi(2) };
        let cfg = DeConfig {
            restarts: 1,
            ..DeConfig::default()
        };
        let r = differential_evolution(f, &cube(1, -1.0, 1.0), &cfg).unwrap();
        assert!((r.best_params[0] - 0.3).abs() < 1e-3);
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = DeConfig {
            restarts: 2,
            max_generations: 50,
            ..DeConfig::default()
        };
        let a = differential_evolution(neg_rastrigin, &cube(3, -5.12, 5.12), &cfg).unwrap();
        let b = differential_evolution(neg_rastrigin, &cube(3, -5.12, 5.12), &cfg).unwrap();
        assert_eq!(a, b);
        let c = differential_evolution(
            neg_rastrigin,
            &cube(3, -5.12, 5.12),
            &DeConfig { seed: 99, ..cfg },
        )
        .unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn reflection_stays_inside() {
        let b = Bound::new("x", -1.0, 2.0);
        assert_eq!(b.reflect(0.5), 0.5);
        assert!((b.reflect(2.5) - 1.5).abs() < 1e-12);
        assert!((b.reflect(-1.25) + 0.75).abs() < 1e-12);
        for x in [-100.0, -7.3, 9.9, 1e6] {
            let y = b.reflect(x);
            assert!((-1.0..=2.0).contains(&y));
        }
    }
}
