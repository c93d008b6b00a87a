use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::registry::Registry;
use crate::seed::rng_from_seed;
use crate::tuner::space::{Assignment, ParamDef, SearchSpace};

/// A finished trial as seen by a sampler. Failed trials carry `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub params: Assignment,
    pub value: f64,
}

/// Hyperparameter proposal strategy.
pub trait Sampler: Send + Sync {
    fn name(&self) -> &'static str;

    fn suggest(&self, history: &[Observation], space: &SearchSpace, seed: u64) -> Assignment;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomSampler;

impl Sampler for RandomSampler {
    fn name(&self) -> &'static str {
        "random"
    }

    fn suggest(&self, _history: &[Observation], space: &SearchSpace, seed: u64) -> Assignment {
        space.sample_uniform(&mut rng_from_seed(seed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
        }
    }
}

/// Size of the good set for `n` finished trials.
pub fn n_good(n: usize, gamma: f64) -> usize {
    ((gamma * n as f64).ceil() as usize).clamp(1, n.max(1))
}

/// Tree-structured Parzen estimator with independent dimensions.
///
/// History is split at the `gamma` quantile of the objective into good and
/// bad trials. Per dimension, each set defines a mixture of Gaussians
/// truncated to the bounds (in log space for log-scaled parameters), one
/// kernel per trial plus a wide prior kernel centred on the range. The kernel
/// width of a point is the larger gap to its sorted neighbours (bounds
/// included), clipped to `[range / min(100, n + 1), range]`. Candidates are
/// drawn from the good mixture and the one maximizing `l(x) / g(x)` wins.
#[derive(Debug, Clone, Copy, Default)]
pub struct TpeSampler {
    pub config: TpeConfig,
}

impl TpeSampler {
    pub fn new(config: TpeConfig) -> Self {
        Self { config }
    }
}

struct Parzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    /// Probability mass of each kernel inside the bounds.
    mass: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Parzen {
    fn fit(points: &[f64], lo: f64, hi: f64) -> Self {
        let range = hi - lo;
        let mut mus: Vec<f64> = points.to_vec();
        mus.push(0.5 * (lo + hi));
        let n = points.len();
        let min_sigma = range / (100.0f64).min(n as f64 + 1.0);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| points[a].total_cmp(&points[b]).then(a.cmp(&b)));
        let mut sigmas = vec![range; n + 1];
        for (rank, &i) in order.iter().enumerate() {
            let left = if rank == 0 { lo } else { points[order[rank - 1]] };
            let right = if rank + 1 == n { hi } else { points[order[rank + 1]] };
            let gap = (points[i] - left).max(right - points[i]);
            sigmas[i] = gap.clamp(min_sigma, range);
        }
        let std = Normal::standard();
        let mass = mus
            .iter()
            .zip(&sigmas)
            .map(|(m, s)| std.cdf((hi - m) / s) - std.cdf((lo - m) / s))
            .collect();
        Self { mus, sigmas, mass, lo, hi }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let std = Normal::standard();
        let k = rng.gen_range(0..self.mus.len());
        let (m, s) = (self.mus[k], self.sigmas[k]);
        let a = std.cdf((self.lo - m) / s);
        let b = std.cdf((self.hi - m) / s);
        let u = a + rng.gen::<f64>() * (b - a);
        let u = u.clamp(1e-300, 1.0 - 1e-16);
        (m + s * std.inverse_cdf(u)).clamp(self.lo, self.hi)
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let std = Normal::standard();
        let k = self.mus.len() as f64;
        let total: f64 = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .zip(&self.mass)
            .map(|((m, s), z)| std.pdf((x - m) / s) / (s * z))
            .sum();
        (total / k).ln()
    }
}

impl Sampler for TpeSampler {
    fn name(&self) -> &'static str {
        "tpe"
    }

    fn suggest(&self, history: &[Observation], space: &SearchSpace, seed: u64) -> Assignment {
        let mut rng = rng_from_seed(seed);
        let finite = history.iter().filter(|o| o.value.is_finite()).count();
        if history.len() < self.config.n_startup || finite == 0 {
            return space.sample_uniform(&mut rng);
        }
        let mut order: Vec<usize> = (0..history.len()).collect();
        order.sort_by(|&a, &b| history[a].value.total_cmp(&history[b].value).then(a.cmp(&b)));
        let split = n_good(history.len(), self.config.gamma).min(finite);
        let (good, bad) = order.split_at(split);

        let n_cand = self.config.n_candidates.max(1);
        let mut candidates: Vec<Vec<f64>> = vec![Vec::with_capacity(space.params.len()); n_cand];
        let mut scores = vec![0.0; n_cand];
        for p in &space.params {
            let (lo, hi) = p.internal_bounds();
            let pts = |idx: &[usize]| -> Vec<f64> { idx.iter().filter_map(|&i| internal(p, &history[i].params)).collect() };
            let l = Parzen::fit(&pts(good), lo, hi);
            let g = Parzen::fit(&pts(bad), lo, hi);
            for (c, score) in candidates.iter_mut().zip(scores.iter_mut()) {
                let x = l.sample(&mut rng);
                let ratio = l.log_pdf(x) - g.log_pdf(x);
                if ratio.is_finite() {
                    *score += ratio;
                    c.push(x);
                } else {
                    c.push(rng.gen_range(lo..hi));
                }
            }
        }
        let mut best = 0;
        for i in 1..n_cand {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        space
            .params
            .iter()
            .zip(&candidates[best])
            .map(|(p, z)| (p.name.clone(), p.from_internal(*z)))
            .collect()
    }
}

fn internal(p: &ParamDef, a: &Assignment) -> Option<f64> {
    a.get(&p.name).map(|v| p.to_internal(*v)).filter(|z| z.is_finite())
}

pub type SamplerRegistry = Registry<dyn Sampler>;

pub fn default_samplers() -> SamplerRegistry {
    let mut reg = SamplerRegistry::new("sampler");
    reg.register("tpe", Arc::new(TpeSampler::default()));
    reg.register("random", Arc::new(RandomSampler));
    reg
}

pub fn samplers() -> &'static SamplerRegistry {
    static REG: OnceLock<SamplerRegistry> = OnceLock::new();
    REG.get_or_init(default_samplers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_seed;
    use crate::tuner::space::ParamKind;

    fn line() -> SearchSpace {
        SearchSpace {
            params: vec![ParamDef::new("x", ParamKind::Float, -10.0, 10.0)],
        }
    }

    fn run(sampler: &dyn Sampler, seed: u64, trials: usize) -> f64 {
        let space = line();
        let mut hist = Vec::new();
        for t in 0..trials {
            let a = sampler.suggest(&hist, &space, derive_seed(seed, "suggest", t as u64));
            let v = 1.0 + (a["x"] - 3.0).powi(2);
            hist.push(Observation { params: a, value: v });
        }
        hist.iter().map(|o| o.value).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn good_set_size() {
        assert_eq!(n_good(8, 0.25), 2);
        assert_eq!(n_good(1, 0.25), 1);
        assert_eq!(n_good(10, 0.25), 3);
    }

    #[test]
    fn empty_history_is_uniform_and_in_bounds() {
        let s = SearchSpace::for_architecture("MLPReducedLinearOLS", 900).unwrap();
        let a = TpeSampler::default().suggest(&[], &s, 1);
        assert_eq!(a, RandomSampler.suggest(&[], &s, 1));
        assert!(s.contains(&a));
    }

    #[test]
    fn suggestions_respect_bounds_with_history() {
        let s = SearchSpace::for_architecture("MLPReducedLinear", 400).unwrap();
        let tpe = TpeSampler::default();
        let mut hist = Vec::new();
        for t in 0..40u64 {
            let a = tpe.suggest(&hist, &s, t);
            assert!(s.contains(&a), "{a:?}");
            let v = if t % 7 == 3 { f64::INFINITY } else { (a["lr_init"].ln() + 5.0).abs() + a["d_up"] };
            hist.push(Observation { params: a, value: v });
        }
    }

    #[test]
    fn tpe_beats_random_on_quadratic() {
        let tpe: Vec<f64> = (0..10).map(|s| run(&TpeSampler::default(), s, 100)).collect();
        let rnd: Vec<f64> = (0..10).map(|s| run(&RandomSampler, s, 100)).collect();
        let hits = tpe.iter().filter(|v| **v <= 1.05).count();
        assert!(hits >= 8, "{tpe:?}");
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&tpe) < mean(&rnd));
    }

    #[test]
    fn deterministic_given_seed() {
        let tpe = TpeSampler::default();
        assert_eq!(run(&tpe, 5, 30), run(&tpe, 5, 30));
    }

    #[test]
    fn registry_has_both() {
        assert_eq!(samplers().names().collect::<Vec<_>>(), vec!["random", "tpe"]);
    }
}
