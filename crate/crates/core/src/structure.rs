//! (s,S) thresholds, regime classification and structural verification
//! against dynamic-programming argmin sets.

use alloc::vec;
use alloc::vec::Vec;

use crate::costs::{CostModel, NAlpha};
use crate::inventory::{GFunction, InventoryModel};
use crate::lattice::Lattice;
use crate::mdp::{infinite_horizon_vi, ValueSolution};
use crate::{Error, Result, TIE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// An (s,S) policy is optimal at every step.
    GbSs,
    /// Never order in the last `N_alpha` steps, (s,S) before that.
    Hybrid,
    NeverOrder,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::GbSs => "GB_SS",
            Regime::Hybrid => "HYBRID",
            Regime::NeverOrder => "NEVER_ORDER",
        }
    }
}

impl core::fmt::Display for Regime {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.label())
    }
}

/// An (s,S) pair in lattice levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Thresholds {
    pub s: i64,
    pub big_s: i64,
}

impl Thresholds {
    /// Order up to `S` below `s`, otherwise order nothing (levels).
    pub fn action(&self, x: i64) -> i64 {
        if x < self.s {
            self.big_s - x
        } else {
            0
        }
    }

    pub fn values(&self, step: f64) -> (f64, f64) {
        (self.s as f64 * step, self.big_s as f64 * step)
    }

    /// Stationary policy on `lattice` as action indices (levels).
    pub fn policy(&self, lattice: &Lattice) -> Vec<usize> {
        (0..lattice.len()).map(|i| self.action(lattice.level(i)) as usize).collect()
    }
}

/// `S` = smallest grid argmin of `g` (ties within [`TIE_TOL`]),
/// `s` = smallest grid point `x <= S` with `g(x) <= K + g(S) + TIE_TOL`.
///
/// Fails with `ArgminAtEdge` if the smallest argmin sits on either grid edge,
/// since the true minimizer may then lie outside the grid.
pub fn extract_ss(lattice: &Lattice, g: &[f64], k: f64) -> Result<Thresholds> {
    assert_eq!(g.len(), lattice.len(), "g must cover the grid");
    let min = g.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::InvalidParameter { name: "g", reason: "must be finite" });
    }
    let pos = g.iter().position(|&v| v <= min + TIE_TOL).unwrap();
    if pos == 0 || pos == g.len() - 1 {
        return Err(Error::ArgminAtEdge { level: lattice.value(pos) });
    }
    Ok(Thresholds { s: extract_s_given(lattice, g, k, pos), big_s: lattice.level(pos) })
}

/// `s` for a caller-chosen argmin position `S`.
pub fn extract_s_given(lattice: &Lattice, g: &[f64], k: f64, s_pos: usize) -> i64 {
    let bound = k + g[s_pos] + TIE_TOL;
    let i = g[..=s_pos].iter().position(|&v| v <= bound).unwrap_or(s_pos);
    lattice.level(i)
}

/// Thresholds of a G-function.
pub fn extract_ss_g(g: &GFunction, k: f64) -> Result<Thresholds> {
    extract_ss(&g.lattice, &g.values, k)
}

/// Regime constants and horizon data for one `(cost model, alpha)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStructure {
    pub regime: Regime,
    pub alpha: f64,
    pub alpha_star: f64,
    pub n_alpha: NAlpha,
}

impl PolicyStructure {
    /// `max(alpha*, 0)`.
    pub fn alpha_prime(&self) -> f64 {
        self.alpha_star.max(0.0)
    }
}

pub fn classify_regime(c: &CostModel, alpha: f64) -> PolicyStructure {
    let alpha_star = c.regime_constants().alpha_star;
    let regime = if alpha_star < 0.0 {
        Regime::GbSs
    } else if alpha <= alpha_star {
        Regime::NeverOrder
    } else {
        Regime::Hybrid
    };
    PolicyStructure { regime, alpha, alpha_star, n_alpha: c.n_alpha(alpha) }
}

/// What the structure theory prescribes at one step of an `N`-step problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    NeverOrder,
    /// (s,S) from the G-function built on the value-to-go after this step.
    Threshold,
}

/// Per-step prescription with zero terminal values, steps `t = 0..N`.
pub fn predict_finite_horizon(ps: &PolicyStructure, n: usize) -> Vec<StepRule> {
    match ps.regime {
        Regime::GbSs => vec![StepRule::Threshold; n],
        Regime::NeverOrder => vec![StepRule::NeverOrder; n],
        Regime::Hybrid => {
            let tail = match ps.n_alpha {
                NAlpha::Finite(k) => (k as usize).min(n),
                NAlpha::Infinite => n,
            };
            let mut rules = vec![StepRule::Threshold; n - tail];
            rules.resize(n, StepRule::NeverOrder);
            rules
        }
    }
}

/// Per-step prescription when the terminal value is the `K = 0` value
/// function: thresholds at every step once `alpha` exceeds `alpha*`.
pub fn predict_with_v0_terminal(ps: &PolicyStructure, n: usize) -> Vec<StepRule> {
    if ps.alpha > ps.alpha_star {
        vec![StepRule::Threshold; n]
    } else {
        vec![StepRule::NeverOrder; n]
    }
}

/// A prescribed action outside the DP argmin set.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub t: usize,
    pub x: f64,
    pub predicted: f64,
    pub argmin: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    /// Thresholds used at each step (`None` for never-order steps).
    pub thresholds: Vec<Option<Thresholds>>,
    pub violations: Vec<Violation>,
}

/// Per-step action prescriptions (lattice levels) and the thresholds behind
/// them, for the `N`-step solution `sols` (as returned by
/// [`crate::mdp::finite_horizon_vi`]).
pub fn prescriptions(
    model: &InventoryModel,
    sols: &[ValueSolution],
    rules: &[StepRule],
    alpha: f64,
) -> Result<(Vec<Vec<i64>>, Vec<Option<Thresholds>>)> {
    let n = sols.len() - 1;
    assert_eq!(rules.len(), n, "one rule per step");
    let lattice = model.lattice();
    let mut actions = Vec::with_capacity(n);
    let mut thresholds = Vec::with_capacity(n);
    for (t, rule) in rules.iter().enumerate() {
        match rule {
            StepRule::NeverOrder => {
                actions.push(vec![0; lattice.len()]);
                thresholds.push(None);
            }
            StepRule::Threshold => {
                let g = model.g_function(&sols[n - t - 1].values, alpha);
                let th = extract_ss_g(&g, model.cost().setup())?;
                actions.push((0..lattice.len()).map(|i| th.action(lattice.level(i))).collect());
                thresholds.push(Some(th));
            }
        }
    }
    Ok((actions, thresholds))
}

/// Checks that `actions[t][x]` lies in the argmin set of step `t`, i.e. of
/// the backup producing `v_{N-t}`.
pub fn check_prescriptions(lattice: &Lattice, sols: &[ValueSolution], actions: &[Vec<i64>]) -> Vec<Violation> {
    let n = sols.len() - 1;
    let step = lattice.step();
    let mut out = Vec::new();
    for (t, row) in actions.iter().enumerate() {
        let sets = &sols[n - t].argmin_sets;
        for (x, &a) in row.iter().enumerate() {
            let ok = a >= 0 && sets[x].contains(&(a as usize));
            if !ok {
                out.push(Violation {
                    t,
                    x: lattice.value(x),
                    predicted: a as f64 * step,
                    argmin: sets[x].iter().map(|&b| b as f64 * step).collect(),
                });
            }
        }
    }
    out
}

pub fn verify_structure(
    model: &InventoryModel,
    sols: &[ValueSolution],
    rules: &[StepRule],
    alpha: f64,
) -> Result<StructureReport> {
    let (actions, thresholds) = prescriptions(model, sols, rules, alpha)?;
    let violations = check_prescriptions(model.lattice(), sols, &actions);
    Ok(StructureReport { thresholds, violations })
}

/// Infinite-horizon values of the `K = 0` version of `model`.
pub fn v0_terminal(model: &InventoryModel, alpha: f64, eps: f64) -> Result<Vec<f64>> {
    let m = model.with_setup(0.0)?.build_mdp()?;
    Ok(infinite_horizon_vi(&m, alpha, eps)?.values)
}

/// Envelope and recurring tail pairs of a threshold sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdLimits {
    pub s_range: (i64, i64),
    pub big_s_range: (i64, i64),
    /// Distinct pairs in the last third that recur there within one lattice step.
    pub candidates: Vec<Thresholds>,
}

pub fn threshold_limits(pairs: &[Thresholds]) -> Option<ThresholdLimits> {
    if pairs.is_empty() {
        return None;
    }
    let mut s_range = (i64::MAX, i64::MIN);
    let mut big_s_range = (i64::MAX, i64::MIN);
    for p in pairs {
        s_range = (s_range.0.min(p.s), s_range.1.max(p.s));
        big_s_range = (big_s_range.0.min(p.big_s), big_s_range.1.max(p.big_s));
    }
    let tail = &pairs[pairs.len() - pairs.len().div_ceil(3)..];
    let close = |a: &Thresholds, b: &Thresholds| (a.s - b.s).abs() <= 1 && (a.big_s - b.big_s).abs() <= 1;
    let mut candidates: Vec<Thresholds> = Vec::new();
    for (i, p) in tail.iter().enumerate() {
        let recurs = tail.len() == 1 || tail.iter().enumerate().any(|(j, q)| j != i && close(p, q));
        if recurs && !candidates.contains(p) {
            candidates.push(*p);
        }
    }
    candidates.sort();
    Some(ThresholdLimits { s_range, big_s_range, candidates })
}

/// The common pair if the last `len` entries are identical.
pub fn tail_constant(pairs: &[Thresholds], len: usize) -> Option<Thresholds> {
    if len == 0 || pairs.len() < len {
        return None;
    }
    let tail = &pairs[pairs.len() - len..];
    tail.iter().all(|p| *p == tail[0]).then_some(tail[0])
}
