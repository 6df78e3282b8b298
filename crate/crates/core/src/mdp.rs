//! Grid MDPs built from stochastic-equation dynamics, and value iteration.
//!
//! States are the positions of a [`Lattice`]; actions are the lattice
//! multiples `0, step, ..., a_max`. A `(state, action)` pair with infinite
//! cost is infeasible and carries no transition row. Successors that fall
//! outside the grid are clamped to the nearest edge and the clamped mass is
//! recorded per pair.

use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::Lattice;
use crate::{Error, Result, TIE_TOL};

/// Next-state map `F(x, a, shock)` in lattice levels.
#[derive(Clone, Copy)]
pub enum Dynamics<'a> {
    /// `x + a - D`
    Backorder,
    /// `(x + a - D)^+`
    LostSales,
    Custom(&'a dyn Fn(i64, i64, i64) -> i64),
}

impl Dynamics<'_> {
    pub fn next(&self, x: i64, a: i64, shock: i64) -> i64 {
        match self {
            Dynamics::Backorder => x + a - shock,
            Dynamics::LostSales => (x + a - shock).max(0),
            Dynamics::Custom(f) => f(x, a, shock),
        }
    }
}

impl core::fmt::Debug for Dynamics<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Dynamics::Backorder => f.write_str("Backorder"),
            Dynamics::LostSales => f.write_str("LostSales"),
            Dynamics::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// What to do when a finite-cost pair sends mass past the grid edge.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Clamping {
    /// Clamp and record the lost mass in [`GridMdp::mass_loss`].
    #[default]
    Record,
    /// Fail with `GridTooNarrow` if any single shock atom with probability
    /// above `mass_tol` is clamped.
    Reject { mass_tol: f64 },
}

/// Finite MDP on a lattice grid with a shared action lattice.
#[derive(Debug, Clone)]
pub struct GridMdp {
    lattice: Lattice,
    n_actions: usize,
    costs: Vec<f64>,
    row_ptr: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
    mass_loss: Vec<f64>,
    min_cost: f64,
}

impl GridMdp {
    /// Builds transition rows `P(y | x, a) = sum{p_i : clamp(F(x, a, v_i)) = y}`
    /// over the shock atoms `(level, probability)`.
    ///
    /// `cost_fn` receives inventory values `(x, a)` and returns `+inf` for
    /// infeasible pairs.
    pub fn build(
        dynamics: Dynamics<'_>,
        shocks: &[(i64, f64)],
        lattice: Lattice,
        a_max: i64,
        clamping: Clamping,
        cost_fn: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if a_max < 0 {
            return Err(Error::InvalidParameter { name: "a_max", reason: "must be >= 0" });
        }
        if shocks.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = lattice.len();
        let n_actions = a_max as usize + 1;
        let mut costs = Vec::with_capacity(n * n_actions);
        let mut row_ptr = Vec::with_capacity(n * n_actions + 1);
        let mut next = Vec::new();
        let mut prob = Vec::new();
        let mut mass_loss = Vec::with_capacity(n * n_actions);
        let mut scratch: Vec<(u32, f64)> = Vec::with_capacity(shocks.len());
        row_ptr.push(0);
        for i in 0..n {
            let x = lattice.level(i);
            for a in 0..n_actions as i64 {
                let c = cost_fn(lattice.value_of_level(x), lattice.value_of_level(a));
                if c.is_nan() || c == f64::NEG_INFINITY {
                    return Err(Error::InvalidCost("cost must be a number bounded below"));
                }
                costs.push(c);
                let mut lost = 0.0;
                if c.is_finite() {
                    scratch.clear();
                    for &(shock, p) in shocks {
                        let (y, clamped) = lattice.clamp(dynamics.next(x, a, shock));
                        if clamped {
                            if let Clamping::Reject { mass_tol } = clamping {
                                if p > mass_tol {
                                    return Err(Error::GridTooNarrow {
                                        state: lattice.value_of_level(x),
                                        action: lattice.value_of_level(a),
                                        mass: p,
                                    });
                                }
                            }
                            lost += p;
                        }
                        scratch.push((y as u32, p));
                    }
                    scratch.sort_by_key(|e| e.0);
                    let start = next.len();
                    for &(y, p) in scratch.iter() {
                        if next.len() > start && next[next.len() - 1] == y {
                            *prob.last_mut().unwrap() += p;
                        } else {
                            next.push(y);
                            prob.push(p);
                        }
                    }
                }
                mass_loss.push(lost);
                row_ptr.push(next.len());
            }
        }
        GridMdp::finish(lattice, n_actions, costs, row_ptr, next, prob, mass_loss)
    }

    /// Generic tabular constructor: `costs[x * n_actions + a]` and one
    /// sparse row `(next position, probability)` per pair (ignored when the
    /// cost is infinite).
    pub fn from_tabular(
        lattice: Lattice,
        n_actions: usize,
        costs: Vec<f64>,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        let n = lattice.len();
        if n_actions == 0 || costs.len() != n * n_actions || rows.len() != n * n_actions {
            return Err(Error::InvalidParameter { name: "rows", reason: "shape does not match grid x actions" });
        }
        let mut row_ptr = vec![0];
        let mut next = Vec::new();
        let mut prob = Vec::new();
        for (pair, row) in rows.into_iter().enumerate() {
            if costs[pair].is_finite() {
                let mut row = row;
                row.sort_by_key(|e| e.0);
                for (y, p) in row {
                    if y >= n || !(p.is_finite() && p >= 0.0) {
                        return Err(Error::BadRow { state: pair / n_actions, action: pair % n_actions, sum: f64::NAN });
                    }
                    if p == 0.0 {
                        continue;
                    }
                    if next.len() > row_ptr[pair] && next[next.len() - 1] == y as u32 {
                        *prob.last_mut().unwrap() += p;
                    } else {
                        next.push(y as u32);
                        prob.push(p);
                    }
                }
            }
            row_ptr.push(next.len());
        }
        let mass_loss = vec![0.0; n * n_actions];
        GridMdp::finish(lattice, n_actions, costs, row_ptr, next, prob, mass_loss)
    }

    fn finish(
        lattice: Lattice,
        n_actions: usize,
        costs: Vec<f64>,
        row_ptr: Vec<usize>,
        next: Vec<u32>,
        prob: Vec<f64>,
        mass_loss: Vec<f64>,
    ) -> Result<Self> {
        let mut min_cost = f64::INFINITY;
        for x in 0..lattice.len() {
            let mut any = false;
            for a in 0..n_actions {
                let pair = x * n_actions + a;
                let c = costs[pair];
                if c.is_nan() || c == f64::NEG_INFINITY {
                    return Err(Error::InvalidCost("cost must be a number bounded below"));
                }
                if c.is_finite() {
                    any = true;
                    min_cost = min_cost.min(c);
                    let sum: f64 = prob[row_ptr[pair]..row_ptr[pair + 1]].iter().sum();
                    if (sum - 1.0).abs() > 1e-12 {
                        return Err(Error::BadRow { state: x, action: a, sum });
                    }
                }
            }
            if !any {
                return Err(Error::NoFiniteAction { state: lattice.value(x) });
            }
        }
        Ok(GridMdp { lattice, n_actions, costs, row_ptr, next, prob, mass_loss, min_cost })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n_states(&self) -> usize {
        self.lattice.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Inventory value of action index `a`.
    pub fn action_value(&self, a: usize) -> f64 {
        a as f64 * self.lattice.step()
    }

    pub fn cost(&self, x: usize, a: usize) -> f64 {
        self.costs[x * self.n_actions + a]
    }

    pub fn is_feasible(&self, x: usize, a: usize) -> bool {
        self.cost(x, a).is_finite()
    }

    /// Transition row of `(x, a)` as parallel (successor, probability) slices.
    pub fn row(&self, x: usize, a: usize) -> (&[u32], &[f64]) {
        let pair = x * self.n_actions + a;
        let r = self.row_ptr[pair]..self.row_ptr[pair + 1];
        (&self.next[r.clone()], &self.prob[r])
    }

    /// Probability mass of `(x, a)` that was clamped to a grid edge.
    pub fn mass_loss(&self, x: usize, a: usize) -> f64 {
        self.mass_loss[x * self.n_actions + a]
    }

    /// Feasible pairs with nonzero clamped mass.
    pub fn clamped_pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_states()).flat_map(move |x| {
            (0..self.n_actions).filter_map(move |a| {
                let m = self.mass_loss(x, a);
                (self.is_feasible(x, a) && m > 0.0).then_some((x, a, m))
            })
        })
    }

    pub fn min_cost(&self) -> f64 {
        self.min_cost
    }

    /// Largest finite one-step cost.
    pub fn max_finite_cost(&self) -> f64 {
        self.costs.iter().copied().filter(|c| c.is_finite()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sum_y v(y) P(y | x, a)`; infinite if the row reaches an infinite value.
    pub fn expect(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        let (next, prob) = self.row(x, a);
        next.iter().zip(prob).map(|(&y, &p)| p * v[y as usize]).sum()
    }

    /// `c(x, a) + alpha sum_y v(y) P(y | x, a)`.
    pub fn q_value(&self, x: usize, a: usize, v: &[f64], alpha: f64) -> f64 {
        let c = self.cost(x, a);
        if !c.is_finite() || alpha == 0.0 {
            return c;
        }
        c + alpha * self.expect(x, a, v)
    }

    /// One Bellman backup at `x`: the minimum and the actions within `tie_tol`.
    pub fn backup_state(&self, x: usize, v: &[f64], alpha: f64, tie_tol: f64, set: &mut Vec<usize>) -> f64 {
        let mut best = f64::INFINITY;
        set.clear();
        for a in 0..self.n_actions {
            if !self.is_feasible(x, a) {
                continue;
            }
            let q = self.q_value(x, a, v, alpha);
            if q < best - tie_tol {
                best = q;
                set.clear();
                set.push(a);
            } else if q <= best + tie_tol {
                if q < best {
                    best = q;
                }
                set.push(a);
            }
        }
        // ties found before a later, slightly lower minimum may drift out of range
        if set.len() > 1 {
            set.retain(|&a| self.q_value(x, a, v, alpha) <= best + tie_tol);
        }
        best
    }

    fn backup(&self, v: &[f64], alpha: f64, tie_tol: f64, out: &mut [f64], sets: &mut [Vec<usize>]) {
        for x in 0..self.n_states() {
            out[x] = self.backup_state(x, v, alpha, tie_tol, &mut sets[x]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViOptions {
    /// Argmin sets keep every action within this distance of the minimum.
    pub tie_tol: f64,
    pub max_iterations: usize,
}

impl Default for ViOptions {
    fn default() -> Self {
        ViOptions { tie_tol: TIE_TOL, max_iterations: 50_000_000 }
    }
}

/// Values and argmin sets after a sequence of Bellman backups.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub values: Vec<f64>,
    /// Optimal action indices per state; empty when no backup was performed.
    pub argmin_sets: Vec<Vec<usize>>,
    /// Sup-norm of the last update.
    pub residual: f64,
    pub iterations: usize,
}

impl ValueSolution {
    /// Smallest optimal action at every state.
    pub fn greedy(&self) -> Vec<usize> {
        self.argmin_sets.iter().map(|s| s.first().copied().unwrap_or(0)).collect()
    }
}

/// `v_0 = terminal`, `v_{t+1} = min_a { c + alpha P v_t }` for `t < n`.
/// Element `t` of the result holds `v_t` and the argmin sets of the backup
/// that produced it.
pub fn finite_horizon_vi(m: &GridMdp, n: usize, alpha: f64, terminal: &[f64]) -> Vec<ValueSolution> {
    finite_horizon_vi_with(m, n, alpha, terminal, &ViOptions::default())
}

pub fn finite_horizon_vi_with(
    m: &GridMdp,
    n: usize,
    alpha: f64,
    terminal: &[f64],
    opts: &ViOptions,
) -> Vec<ValueSolution> {
    assert_eq!(terminal.len(), m.n_states(), "terminal must cover the grid");
    let mut out = Vec::with_capacity(n + 1);
    out.push(ValueSolution { values: terminal.to_vec(), argmin_sets: Vec::new(), residual: 0.0, iterations: 0 });
    for t in 0..n {
        let prev = &out[t].values;
        let mut values = vec![0.0; m.n_states()];
        let mut sets = vec![Vec::new(); m.n_states()];
        m.backup(prev, alpha, opts.tie_tol, &mut values, &mut sets);
        let residual = sup_diff(&values, prev);
        out.push(ValueSolution { values, argmin_sets: sets, residual, iterations: t + 1 });
    }
    out
}

/// Discounted value iteration from `v = 0`, stopped once successive iterates
/// are within `eps (1 - alpha) / (2 alpha)`, so `|values - v_alpha| <= eps`.
pub fn infinite_horizon_vi(m: &GridMdp, alpha: f64, eps: f64) -> Result<ValueSolution> {
    infinite_horizon_vi_with(m, alpha, eps, &ViOptions::default())
}

pub fn infinite_horizon_vi_with(m: &GridMdp, alpha: f64, eps: f64, opts: &ViOptions) -> Result<ValueSolution> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter { name: "alpha", reason: "must lie in [0, 1)" });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter { name: "eps", reason: "must be positive" });
    }
    let n = m.n_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut sets = vec![Vec::new(); n];
    if alpha == 0.0 {
        m.backup(&v, 0.0, opts.tie_tol, &mut next, &mut sets);
        return Ok(ValueSolution { values: next, argmin_sets: sets, residual: 0.0, iterations: 1 });
    }
    let threshold = eps * (1.0 - alpha) / (2.0 * alpha);
    for it in 1..=opts.max_iterations {
        m.backup(&v, alpha, opts.tie_tol, &mut next, &mut sets);
        let residual = sup_diff(&next, &v);
        core::mem::swap(&mut v, &mut next);
        if residual <= threshold {
            return Ok(ValueSolution { values: v, argmin_sets: sets, residual, iterations: it });
        }
    }
    Err(Error::NotConverged { iterations: opts.max_iterations })
}

/// Discounted values kept as `v_alpha = relative + gain / (1 - alpha)`.
///
/// Produced by relative value iteration: every backup is shifted so the
/// reference state stays at zero. Usable for `alpha` arbitrarily close to
/// (and including) 1, where the sup-norm stopping rule would need far too
/// many iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeSolution {
    pub alpha: f64,
    pub relative: Vec<f64>,
    pub gain: f64,
    pub argmin_sets: Vec<Vec<usize>>,
    /// Span of the last update of `relative`.
    pub span: f64,
    pub iterations: usize,
}

impl RelativeSolution {
    /// `u_alpha = v_alpha - min v_alpha`.
    pub fn u(&self) -> Vec<f64> {
        let lo = self.relative.iter().copied().fold(f64::INFINITY, f64::min);
        self.relative.iter().map(|r| r - lo).collect()
    }

    /// `(1 - alpha) m_alpha`, computed without forming `m_alpha`.
    pub fn scaled_min(&self) -> f64 {
        let lo = self.relative.iter().copied().fold(f64::INFINITY, f64::min);
        (1.0 - self.alpha) * lo + self.gain
    }

    /// `m_alpha`; infinite for `alpha = 1`.
    pub fn m_alpha(&self) -> f64 {
        let lo = self.relative.iter().copied().fold(f64::INFINITY, f64::min);
        lo + self.gain / (1.0 - self.alpha)
    }

    pub fn values(&self) -> Vec<f64> {
        let shift = self.gain / (1.0 - self.alpha);
        self.relative.iter().map(|r| r + shift).collect()
    }
}

/// Relative value iteration for `alpha` in `(0, 1]`, stopped when the span
/// of successive relative iterates falls to `span_tol`.
pub fn relative_value_iteration(
    m: &GridMdp,
    alpha: f64,
    span_tol: f64,
    opts: &ViOptions,
) -> Result<RelativeSolution> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter { name: "alpha", reason: "must lie in (0, 1]" });
    }
    let n = m.n_states();
    let reference = 0;
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut sets = vec![Vec::new(); n];
    for it in 1..=opts.max_iterations {
        m.backup(&h, alpha, opts.tie_tol, &mut next, &mut sets);
        let gain = next[reference];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (nx, hx) in next.iter_mut().zip(&h) {
            *nx -= gain;
            let d = *nx - hx;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        core::mem::swap(&mut h, &mut next);
        let span = hi - lo;
        if span <= span_tol {
            return Ok(RelativeSolution { alpha, relative: h, gain, argmin_sets: sets, span, iterations: it });
        }
    }
    Err(Error::NotConverged { iterations: opts.max_iterations })
}

/// `max_x |v(x) - c(x, phi(x)) - alpha sum_y v(y) P(y | x, phi(x))|`.
pub fn check_stationary_optimality(m: &GridMdp, phi: &[usize], v: &[f64], alpha: f64) -> f64 {
    (0..m.n_states())
        .map(|x| {
            let q = m.q_value(x, phi[x], v, alpha);
            if q.is_finite() {
                (v[x] - q).abs()
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// `n`-step discounted cost of the stationary policy `phi` from every state.
pub fn evaluate_policy(m: &GridMdp, phi: &[usize], alpha: f64, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; m.n_states()];
    let mut next = vec![0.0; m.n_states()];
    for _ in 0..n {
        for x in 0..m.n_states() {
            next[x] = m.q_value(x, phi[x], &v, alpha);
        }
        core::mem::swap(&mut v, &mut next);
    }
    v
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() })
        .fold(0.0, f64::max)
}
