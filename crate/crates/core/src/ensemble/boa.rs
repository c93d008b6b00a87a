use serde::{Deserialize, Serialize};

use crate::ensemble::ensemble_predict;
use crate::error::{EpfError, Result};
use crate::marketdata::{DayHours, HOURS};

/// Largest learning rate, reached when an expert has never incurred regret.
const ETA_MAX: f64 = 1e150;

/// Fully adaptive BOA state, one independent track per hour.
///
/// For each hour, with ensemble forecast `yhat` and expert forecast `f_k`:
///
/// ```text
/// l_k   = |f_k - y| - |yhat - y|
/// E_k   = max(E_k, |l_k|)
/// V_k  += l_k^2
/// eta_k = min(1 / (2 E_k), sqrt(ln K / V_k))
/// R_k  += l_k + eta_k l_k^2
/// w_k   ∝ eta_k exp(-eta_k R_k)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoaState {
    pub weights: Vec<[f64; HOURS]>,
    pub regret: Vec<[f64; HOURS]>,
    pub eta: Vec<[f64; HOURS]>,
    pub sq_regret: Vec<[f64; HOURS]>,
    pub range: Vec<[f64; HOURS]>,
    pub rounds: usize,
}

impl BoaState {
    /// Uniform weights and zero accumulators.
    pub fn new(k: usize) -> Self {
        Self {
            weights: vec![[1.0 / k as f64; HOURS]; k],
            regret: vec![[0.0; HOURS]; k],
            eta: vec![[0.0; HOURS]; k],
            sq_regret: vec![[0.0; HOURS]; k],
            range: vec![[0.0; HOURS]; k],
            rounds: 0,
        }
    }

    pub fn n_experts(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, experts: &[DayHours]) -> Result<DayHours> {
        ensemble_predict(&self.weights, experts)
    }

    /// Reveals one day of realized prices.
    pub fn update(&mut self, experts: &[DayHours], realized: &DayHours) -> Result<()> {
        let k = self.n_experts();
        if experts.len() != k {
            return Err(EpfError::dim(k, experts.len(), "expert count"));
        }
        if experts.iter().flatten().chain(realized).any(|v| !v.is_finite()) {
            return Err(EpfError::Numerical("non-finite forecast or price in BOA update".into()));
        }
        let log_k = (k as f64).ln();
        let combined = self.predict(experts)?;
        let mut logw = vec![0.0; k];
        for h in 0..HOURS {
            let y = realized[h];
            let ens_loss = (combined[h] - y).abs();
            for (i, f) in experts.iter().enumerate() {
                let l = (f[h] - y).abs() - ens_loss;
                self.range[i][h] = self.range[i][h].max(l.abs());
                self.sq_regret[i][h] += l * l;
                let e = self.range[i][h];
                let v = self.sq_regret[i][h];
                let by_range = if e > 0.0 { 1.0 / (2.0 * e) } else { ETA_MAX };
                let by_var = if v > 0.0 { (log_k / v).sqrt() } else { ETA_MAX };
                let eta = by_range.min(by_var).min(ETA_MAX);
                self.eta[i][h] = eta;
                self.regret[i][h] += l + eta * l * l;
            }
            if k == 1 {
                self.weights[0][h] = 1.0;
                continue;
            }
            for i in 0..k {
                let eta = self.eta[i][h];
                logw[i] = if eta > 0.0 { eta.ln() - eta * self.regret[i][h] } else { f64::NEG_INFINITY };
            }
            let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for i in 0..k {
                let w = (logw[i] - max).exp();
                self.weights[i][h] = w;
                total += w;
            }
            for i in 0..k {
                self.weights[i][h] /= total;
            }
        }
        self.rounds += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_experts_stay_uniform() {
        let mut s = BoaState::new(2);
        for d in 0..50 {
            let f = [d as f64; HOURS];
            s.update(&[f, f], &[d as f64 + 3.0; HOURS]).unwrap();
        }
        assert!(s.weights.iter().all(|w| w.iter().all(|v| *v == 0.5)));
    }

    #[test]
    fn single_expert_weight_one() {
        let mut s = BoaState::new(1);
        for d in 0..10 {
            s.update(&[[d as f64; HOURS]], &[1.0; HOURS]).unwrap();
            assert_eq!(s.weights[0], [1.0; HOURS]);
        }
    }

    #[test]
    fn first_update_by_hand() {
        // experts at error 0 and 1, uniform start: ensemble error 0.5
        // l = (-0.5, 0.5), E = 0.5, V = 0.25, eta = min(1, sqrt(ln 2 / 0.25)) = 1
        // R = (-0.25, 0.75), w_A = e^0.25 / (e^0.25 + e^-0.75)
        let mut s = BoaState::new(2);
        s.update(&[[10.0; HOURS], [11.0; HOURS]], &[10.0; HOURS]).unwrap();
        let expected = 0.25f64.exp() / (0.25f64.exp() + (-0.75f64).exp());
        assert!((s.weights[0][5] - expected).abs() < 1e-14);
        assert_eq!(s.eta[0][5], 1.0);
        assert_eq!(s.regret[1][5], 0.75);
    }

    #[test]
    fn dominant_expert_wins() {
        let mut s = BoaState::new(2);
        for _ in 0..500 {
            s.update(&[[0.0; HOURS], [1.0; HOURS]], &[0.0; HOURS]).unwrap();
        }
        assert!(s.weights[0].iter().all(|w| *w > 0.99));
    }

    #[test]
    fn simplex_and_permutation_equivariance() {
        let mut rng = crate::seed::rng_from_seed(3);
        let mut s = BoaState::new(3);
        let mut p = BoaState::new(3);
        for _ in 0..300 {
            let f: Vec<DayHours> = (0..3).map(|_| std::array::from_fn(|_| rng.gen_range(0.0..100.0))).collect();
            let y: DayHours = std::array::from_fn(|_| rng.gen_range(0.0..100.0));
            s.update(&f, &y).unwrap();
            p.update(&[f[2], f[0], f[1]], &y).unwrap();
            for h in 0..HOURS {
                let sum: f64 = s.weights.iter().map(|w| w[h]).sum();
                assert!((sum - 1.0).abs() <= 1e-12);
                assert!(s.weights.iter().all(|w| w[h] >= 0.0));
                // equal up to summation order
                assert!((p.weights[0][h] - s.weights[2][h]).abs() < 1e-12);
                assert!((p.weights[1][h] - s.weights[0][h]).abs() < 1e-12);
            }
        }
        assert!(s.update(&[[f64::NAN; HOURS], [0.0; HOURS], [0.0; HOURS]], &[0.0; HOURS]).is_err());
        assert!(s.update(&[[0.0; HOURS]], &[0.0; HOURS]).is_err());
    }

    #[test]
    fn ensemble_no_worse_than_worst_expert() {
        let mut rng = crate::seed::rng_from_seed(4);
        let mut s = BoaState::new(4);
        let bias = [0.0, 3.0, -5.0, 10.0];
        let mut ens = 0.0;
        let mut per = [0.0; 4];
        for _ in 0..400 {
            let y: DayHours = std::array::from_fn(|_| rng.gen_range(20.0..80.0));
            let f: Vec<DayHours> = bias
                .iter()
                .map(|b| std::array::from_fn(|h| y[h] + b + rng.gen_range(-4.0..4.0)))
                .collect();
            let c = s.predict(&f).unwrap();
            for h in 0..HOURS {
                ens += (c[h] - y[h]).abs();
                for k in 0..4 {
                    per[k] += (f[k][h] - y[h]).abs();
                }
            }
            s.update(&f, &y).unwrap();
        }
        let worst = per.iter().copied().fold(0.0, f64::max);
        let best = per.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(ens <= worst);
        assert!(ens < 1.2 * best);
    }
}
