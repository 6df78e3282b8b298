//! Monte Carlo evaluation of stationary policies on fully observed grid MDPs.

use alloc::vec::Vec;

use crate::mdp::GridMdp;
use crate::rng::{replication_rng, sample_index};
use crate::{Error, Result};

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Per-replication samples with their mean and a 95% normal-approximation
/// confidence interval for the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator; 0 for one sample).
    pub sd: f64,
    pub ci: (f64, f64),
    /// `(1/N) sum_t c(x_t, a_t)` per replication, when recorded.
    pub running_averages: Vec<f64>,
}

impl SimulationSummary {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let n = samples.len();
        if n == 0 {
            return SimulationSummary { samples, mean: 0.0, sd: 0.0, ci: (0.0, 0.0), running_averages: Vec::new() };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            libm::sqrt(samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64)
        } else {
            0.0
        };
        let half = Z_95 * sd / libm::sqrt(n as f64);
        SimulationSummary { samples, mean, sd, ci: (mean - half, mean + half), running_averages: Vec::new() }
    }

    /// Whether `[target - allowance, target + allowance]` meets the interval.
    pub fn covers(&self, target: f64, allowance: f64) -> bool {
        self.ci.0 - allowance <= target && target <= self.ci.1 + allowance
    }
}

/// Simulates `x_{t+1} ~ P(. | x_t, phi(x_t))` from grid position `x0` for
/// `horizon` steps, `reps` times. Each sample is the discounted total
/// `sum_t alpha^t c(x_t, a_t)`; the undiscounted averages go into
/// `running_averages`. Replication `r` draws from stream `r` of the
/// generator seeded with `seed`.
pub fn simulate_policy(
    m: &GridMdp,
    phi: &[usize],
    x0: usize,
    horizon: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    if x0 >= m.n_states() {
        return Err(Error::InvalidParameter { name: "x0", reason: "outside the grid" });
    }
    if let Some(x) = (0..m.n_states()).find(|&x| phi[x] >= m.n_actions() || !m.is_feasible(x, phi[x])) {
        return Err(Error::InfeasibleAction { action: phi[x] });
    }
    let mut samples = Vec::with_capacity(reps);
    let mut averages = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = replication_rng(seed, rep as u64);
        let mut x = x0;
        let mut discounted = 0.0;
        let mut plain = 0.0;
        let mut weight = 1.0;
        for _ in 0..horizon {
            let a = phi[x];
            let c = m.cost(x, a);
            discounted += weight * c;
            plain += c;
            weight *= alpha;
            let (next, prob) = m.row(x, a);
            x = next[sample_index(&mut rng, prob.iter())] as usize;
        }
        samples.push(discounted);
        averages.push(if horizon == 0 { 0.0 } else { plain / horizon as f64 });
    }
    let mut summary = SimulationSummary::from_samples(samples);
    summary.running_averages = averages;
    Ok(summary)
}

/// Smallest `N` with `alpha^N max_cost / (1 - alpha) <= eps`.
pub fn truncation_horizon(alpha: f64, max_cost: f64, eps: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter { name: "alpha", reason: "must lie in [0, 1)" });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter { name: "eps", reason: "must be positive" });
    }
    let scale = libm::fabs(max_cost) / (1.0 - alpha);
    let mut n = 0usize;
    let mut tail = scale;
    while tail > eps {
        tail *= alpha;
        n += 1;
    }
    Ok(n)
}

/// Truncation bias bound `alpha^N max_cost / (1 - alpha)`.
pub fn truncation_allowance(alpha: f64, max_cost: f64, horizon: usize) -> f64 {
    libm::pow(alpha, horizon as f64) * libm::fabs(max_cost) / (1.0 - alpha)
}
