//! Vanishing-discount diagnostics: discount ladders, the relative-value
//! surrogate, average-cost optimality inequalities and long-run averages.

use alloc::vec;
use alloc::vec::Vec;

use crate::costs::CostModel;
use crate::lattice::Lattice;
use crate::mdp::{evaluate_policy, infinite_horizon_vi, relative_value_iteration, GridMdp, ViOptions};
use crate::{Error, Result, TIE_TOL};

pub const DEFAULT_LADDER: [f64; 5] = [0.9, 0.95, 0.99, 0.995, 0.999];
pub const DEFAULT_K_TAIL: usize = 3;

/// Discount factors with `1 - alpha` below this are solved by relative value
/// iteration instead of plain value iteration.
pub const RELATIVE_SWITCH: f64 = 0.05;

/// Floor on the span tolerance used by relative value iteration.
pub const MIN_SPAN_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct LadderEntry {
    pub alpha: f64,
    /// `m_alpha = min_x v_alpha(x)`; infinite for `alpha = 1`.
    pub m_alpha: f64,
    /// `(1 - alpha) m_alpha`, computed without cancellation for alpha near 1.
    pub scaled_min: f64,
    /// `u_alpha = v_alpha - m_alpha`.
    pub u: Vec<f64>,
    /// Positions with `u_alpha <= TIE_TOL`.
    pub x_alpha: Vec<usize>,
    pub argmin_sets: Vec<Vec<usize>>,
    pub iterations: usize,
}

impl LadderEntry {
    pub fn x_alpha_range(&self) -> (usize, usize) {
        (self.x_alpha[0], *self.x_alpha.last().unwrap())
    }

    pub fn greedy(&self) -> Vec<usize> {
        self.argmin_sets.iter().map(|s| s[0]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountLadder {
    pub entries: Vec<LadderEntry>,
}

impl DiscountLadder {
    /// Smallest interval of positions containing every `X_alpha`.
    pub fn x_alpha_envelope(&self) -> (usize, usize) {
        self.entries.iter().fold((usize::MAX, 0), |(lo, hi), e| {
            let (a, b) = e.x_alpha_range();
            (lo.min(a), hi.max(b))
        })
    }

    /// `(max - min) / |last|` of `(1 - alpha) m_alpha` over the last `k` entries.
    pub fn tail_spread(&self, k: usize) -> f64 {
        let tail = &self.entries[self.entries.len().saturating_sub(k)..];
        let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.scaled_min), hi.max(e.scaled_min))
        });
        let last = tail.last().map_or(0.0, |e| e.scaled_min);
        if hi == lo {
            0.0
        } else {
            (hi - lo) / libm::fabs(last)
        }
    }
}

/// Solves the discounted problem at every `alpha` in `alphas` (strictly
/// increasing, in `[0, 1]`) so that `u_alpha` is accurate to about `eps`.
///
/// Each entry uses plain value iteration while `1 - alpha >= RELATIVE_SWITCH`
/// and relative value iteration above that, where plain iteration would need
/// on the order of `1 / (1 - alpha)` sweeps and loses `m_alpha` to rounding.
pub fn solve_ladder(m: &GridMdp, alphas: &[f64], eps: f64) -> Result<DiscountLadder> {
    if alphas.is_empty() {
        return Err(Error::EmptyInput);
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter { name: "alphas", reason: "must be strictly increasing" });
    }
    let opts = ViOptions::default();
    let mut entries = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter { name: "alphas", reason: "must lie in [0, 1]" });
        }
        let entry = if 1.0 - alpha >= RELATIVE_SWITCH {
            let sol = infinite_horizon_vi(m, alpha, eps)?;
            let m_alpha = sol.values.iter().copied().fold(f64::INFINITY, f64::min);
            let u: Vec<f64> = sol.values.iter().map(|v| v - m_alpha).collect();
            LadderEntry {
                alpha,
                m_alpha,
                scaled_min: (1.0 - alpha) * m_alpha,
                x_alpha: level_set(&u),
                u,
                argmin_sets: sol.argmin_sets,
                iterations: sol.iterations,
            }
        } else {
            let span_tol = (eps * (1.0 - alpha) / (2.0 * alpha)).max(MIN_SPAN_TOL);
            let sol = relative_value_iteration(m, alpha, span_tol, &opts)?;
            let u = sol.u();
            LadderEntry {
                alpha,
                m_alpha: sol.m_alpha(),
                scaled_min: sol.scaled_min(),
                x_alpha: level_set(&u),
                u,
                argmin_sets: sol.argmin_sets,
                iterations: sol.iterations,
            }
        };
        entries.push(entry);
    }
    Ok(DiscountLadder { entries })
}

fn level_set(u: &[f64]) -> Vec<usize> {
    (0..u.len()).filter(|&i| u[i] <= TIE_TOL).collect()
}

/// Relative-value surrogate and bracketing cost rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeValue {
    pub u: Vec<f64>,
    pub w_lower: f64,
    pub w_upper: f64,
}

/// Pointwise minimum of `u_alpha` over the last `k_tail` ladder entries;
/// `w_lower` / `w_upper` bracket `(1 - alpha) m_alpha` over the same tail.
pub fn relative_value(ladder: &DiscountLadder, k_tail: usize) -> Result<RelativeValue> {
    let n = ladder.entries.len();
    if k_tail == 0 || k_tail > n {
        return Err(Error::InvalidParameter { name: "k_tail", reason: "must lie in 1..=ladder length" });
    }
    let tail = &ladder.entries[n - k_tail..];
    let mut u = tail[0].u.clone();
    let mut w_lower = f64::INFINITY;
    let mut w_upper = f64::NEG_INFINITY;
    for e in tail {
        for (a, b) in u.iter_mut().zip(&e.u) {
            *a = a.min(*b);
        }
        w_lower = w_lower.min(e.scaled_min);
        w_upper = w_upper.max(e.scaled_min);
    }
    Ok(RelativeValue { u, w_lower, w_upper })
}

/// `w + u(x) - c(x, phi(x)) - sum_y u(y) P(y | x, phi(x))` at every state.
pub fn optimality_slacks(m: &GridMdp, u: &[f64], w: f64, phi: &[usize]) -> Vec<f64> {
    (0..m.n_states()).map(|x| w + u[x] - m.q_value(x, phi[x], u, 1.0)).collect()
}

/// Minimum of [`optimality_slacks`]; `>= -tol` certifies the inequality.
pub fn check_optimality_inequality(m: &GridMdp, u: &[f64], w: f64, phi: &[usize]) -> f64 {
    optimality_slacks(m, u, w, phi).into_iter().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPolicy {
    /// Smallest minimizer of `c(x, a) + sum_y u(y) P(y | x, a)`.
    pub actions: Vec<usize>,
    /// All minimizers within [`TIE_TOL`].
    pub argmin_sets: Vec<Vec<usize>>,
    /// Actions with `w_upper + u(x) >= c(x, a) + sum_y u(y) P(y | x, a)`.
    pub a_star_sets: Vec<Vec<usize>>,
}

pub fn greedy_policy(m: &GridMdp, u: &[f64], w_upper: f64) -> GreedyPolicy {
    let n = m.n_states();
    let mut argmin_sets = vec![Vec::new(); n];
    let mut a_star_sets = Vec::with_capacity(n);
    for x in 0..n {
        m.backup_state(x, u, 1.0, TIE_TOL, &mut argmin_sets[x]);
        a_star_sets.push(
            (0..m.n_actions())
                .filter(|&a| m.is_feasible(x, a) && w_upper + u[x] >= m.q_value(x, a, u, 1.0) - TIE_TOL)
                .collect(),
        );
    }
    let actions = argmin_sets.iter().map(|s| s[0]).collect();
    GreedyPolicy { actions, argmin_sets, a_star_sets }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionBReport {
    /// `sup_alpha u_alpha(x)` over the ladder.
    pub sup_u: Vec<f64>,
    /// Positions where `u_alpha` grows roughly like `1 / (1 - alpha)` between
    /// the last two ladder entries.
    pub growth_flags: Vec<usize>,
    pub envelope: (usize, usize),
    /// `(alpha, position, u_alpha(x), bound)` where the order-up-to bound fails.
    pub bound_violations: Vec<(f64, usize, f64, f64)>,
    pub bound_checks: usize,
}

/// Finiteness diagnostics for the relative values along a ladder.
///
/// Growth: between the last two entries `1 - alpha` shrinks by a factor
/// `r`; a state is flagged when `u_alpha` grows by more than half of that,
/// i.e. `u_last > u_prev (1 + (r - 1) / 2)` (and `u_last > 1e-6`).
///
/// With a cost model, every `x` left of the `X_alpha` envelope is checked
/// against `u_alpha(x) <= K + c (x_alpha - x) + u_alpha(x_alpha) + slack_tol`
/// with `x_alpha = min X_alpha`, the cost of ordering straight up to what
/// the optimal policy orders at `x_alpha`. This implies the weaker envelope
/// bound `K + c (x*_U - x)`.
pub fn assumption_b_diagnostic(
    ladder: &DiscountLadder,
    lattice: &Lattice,
    cost: Option<&CostModel>,
    slack_tol: f64,
) -> AssumptionBReport {
    let n = lattice.len();
    let mut sup_u = vec![0.0f64; n];
    for e in &ladder.entries {
        for (s, u) in sup_u.iter_mut().zip(&e.u) {
            *s = s.max(*u);
        }
    }
    let mut growth_flags = Vec::new();
    if let [.., prev, last] = &ladder.entries[..] {
        if last.alpha < 1.0 {
            let r = (1.0 - prev.alpha) / (1.0 - last.alpha);
            for x in 0..n {
                if last.u[x] > 1e-6 && last.u[x] > prev.u[x] * (1.0 + 0.5 * (r - 1.0)) {
                    growth_flags.push(x);
                }
            }
        }
    }
    let envelope = ladder.x_alpha_envelope();
    let mut bound_violations = Vec::new();
    let mut bound_checks = 0;
    if let Some(c) = cost {
        for e in &ladder.entries {
            let xa = e.x_alpha[0];
            let base = c.setup() + e.u[xa] + slack_tol;
            for x in 0..envelope.0 {
                let bound = base + c.unit() * (lattice.value(xa) - lattice.value(x));
                bound_checks += 1;
                if e.u[x] > bound {
                    bound_violations.push((e.alpha, x, e.u[x], bound));
                }
            }
        }
    }
    AssumptionBReport { sup_u, growth_flags, envelope, bound_violations, bound_checks }
}

/// `(1/N) v^phi_{N,1}(x)` for every start state.
pub fn long_run_average(m: &GridMdp, phi: &[usize], n: usize) -> Vec<f64> {
    assert!(n >= 1, "horizon must be positive");
    evaluate_policy(m, phi, 1.0, n).into_iter().map(|v| v / n as f64).collect()
}
