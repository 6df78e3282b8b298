//! Container observations, exact Bayes filtering and belief-tree value
//! iteration for partially observed grid MDPs.
//!
//! The grid is cut into intervals ("containers"). Inside a transparent
//! container the exact state is observed; inside a nontransparent one only
//! its representative point is. Representatives are grid points of their own
//! container, so every observation is identified with a grid position.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::{level_of, Lattice};
use crate::mdp::GridMdp;
use crate::rng::{replication_rng, sample_index};
use crate::simulate::SimulationSummary;
use crate::{Error, Result, TIE_TOL};

/// Default cap on the number of belief-tree nodes.
pub const DEFAULT_MAX_NODES: usize = 1_000_000;

/// Quantization used to merge equal beliefs at one depth.
const MERGE_TOL: f64 = 1e-10;

/// One container `[lo, hi]` in inventory units; which endpoint belongs to it
/// is decided by the partition's [`BoundaryConvention`].
#[derive(Debug, Clone, PartialEq)]
pub struct ContainerSpec {
    pub lo: f64,
    pub hi: f64,
    pub transparent: bool,
    /// Representative of a nontransparent container; defaults to the
    /// midpoint rounded to the grid.
    pub rep: Option<f64>,
}

/// Which container owns a shared boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryConvention {
    /// `[lo, hi)`, with the topmost container also owning the grid top.
    #[default]
    LowerClosed,
    /// `(lo, hi]`, with the bottom container also owning the grid bottom.
    UpperClosed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub lo: i64,
    pub hi: i64,
    pub transparent: bool,
    /// Grid position of the representative (nontransparent only).
    pub rep: Option<usize>,
    /// Grid positions owned by this container.
    pub states: core::ops::Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerPartition {
    lattice: Lattice,
    containers: Vec<Container>,
    owner: Vec<usize>,
    psi: Vec<usize>,
    convention: BoundaryConvention,
}

impl ContainerPartition {
    /// Validates that the containers tile the grid without gaps or overlaps,
    /// hold at least two grid points each, and have interior representatives.
    /// All problems are collected into one error message.
    pub fn new(lattice: Lattice, specs: &[ContainerSpec], convention: BoundaryConvention) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidPartition(String::from("no containers")));
        }
        let step = lattice.step();
        let mut problems: Vec<String> = Vec::new();
        let mut bounds = Vec::with_capacity(specs.len());
        for (i, c) in specs.iter().enumerate() {
            match (level_of(c.lo, step), level_of(c.hi, step)) {
                (Ok(lo), Ok(hi)) if lo < hi => bounds.push((lo, hi, i)),
                (Ok(_), Ok(_)) => problems.push(format!("container {i}: lo must be below hi")),
                _ => problems.push(format!("container {i}: bounds off the grid lattice")),
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidPartition(problems.join("; ")));
        }
        bounds.sort();
        let (glo, ghi) = (lattice.lo(), lattice.hi());
        if bounds[0].0 > glo {
            problems.push(format!("gap [{}, {}) not covered", glo as f64 * step, bounds[0].0 as f64 * step));
        }
        for w in bounds.windows(2) {
            if w[0].1 < w[1].0 {
                problems.push(format!(
                    "gap [{}, {}) not covered",
                    w[0].1 as f64 * step,
                    w[1].0 as f64 * step
                ));
            } else if w[0].1 > w[1].0 {
                problems.push(format!("containers overlap on [{}, {}]", w[1].0 as f64 * step, w[0].1 as f64 * step));
            }
        }
        let last = bounds[bounds.len() - 1].1;
        if last < ghi {
            problems.push(format!("gap ({}, {}] not covered", last as f64 * step, ghi as f64 * step));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidPartition(problems.join("; ")));
        }

        let n = lattice.len();
        let k = bounds.len();
        let mut containers = Vec::with_capacity(k);
        let mut owner = vec![usize::MAX; n];
        for (ci, &(lo, hi, spec_idx)) in bounds.iter().enumerate() {
            // owned levels [first, last]
            let (mut first, mut last) = match convention {
                BoundaryConvention::LowerClosed => (lo, hi - 1),
                BoundaryConvention::UpperClosed => (lo + 1, hi),
            };
            if ci == 0 {
                first = first.min(glo);
            }
            if ci == k - 1 {
                last = last.max(ghi);
            }
            let first = first.max(glo);
            let last = last.min(ghi);
            let states = if first > last {
                0..0
            } else {
                lattice.position(first).unwrap()..lattice.position(last).unwrap() + 1
            };
            if states.len() < 2 {
                problems.push(format!(
                    "container [{}, {}] holds fewer than two grid points",
                    lo as f64 * step,
                    hi as f64 * step
                ));
            }
            for p in states.clone() {
                owner[p] = ci;
            }
            let spec = &specs[spec_idx];
            let rep = if spec.transparent || states.is_empty() {
                None
            } else {
                let level = match spec.rep {
                    Some(r) => match level_of(r, step) {
                        Ok(l) => l,
                        Err(_) => {
                            problems.push(format!("representative {r} off the grid lattice"));
                            continue;
                        }
                    },
                    None => {
                        let mid = libm::floor((lo + hi) as f64 / 2.0 + 0.5) as i64;
                        mid.clamp(lo + 1, hi - 1)
                    }
                };
                let inside = level > lo && level < hi;
                match lattice.position(level) {
                    Some(p) if inside && states.contains(&p) => Some(p),
                    _ => {
                        problems.push(format!(
                            "representative {} not strictly inside [{}, {}]",
                            level as f64 * step,
                            lo as f64 * step,
                            hi as f64 * step
                        ));
                        None
                    }
                }
            };
            containers.push(Container { lo, hi, transparent: spec.transparent, rep, states });
        }
        if !problems.is_empty() {
            return Err(Error::InvalidPartition(problems.join("; ")));
        }
        let psi = (0..n)
            .map(|p| {
                let c = &containers[owner[p]];
                if c.transparent {
                    p
                } else {
                    c.rep.unwrap()
                }
            })
            .collect();
        Ok(ContainerPartition { lattice, containers, owner, psi, convention })
    }

    /// A single container covering the grid.
    pub fn single(lattice: Lattice, transparent: bool) -> Result<Self> {
        let spec = ContainerSpec {
            lo: lattice.value_of_level(lattice.lo()),
            hi: lattice.value_of_level(lattice.hi()),
            transparent,
            rep: None,
        };
        ContainerPartition::new(lattice, &[spec], BoundaryConvention::LowerClosed)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn containers(&self) -> &[Container] {
        &self.containers
    }

    pub fn convention(&self) -> BoundaryConvention {
        self.convention
    }

    /// Index of the container owning grid position `p`.
    pub fn container_of(&self, p: usize) -> usize {
        self.owner[p]
    }

    /// Label with the container holding inventory level 0 as `1`, counting
    /// up to the right and down to the left.
    pub fn label(&self, container: usize) -> Option<i64> {
        let zero = self.lattice.position(0)?;
        Some(container as i64 - self.owner[zero] as i64 + 1)
    }

    /// Observation position `Psi(p)`.
    pub fn psi(&self, p: usize) -> usize {
        self.psi[p]
    }

    /// `Psi(x)` in inventory units.
    pub fn observe_psi(&self, x: f64) -> Result<f64> {
        let p = self
            .lattice
            .position(self.lattice.level_of_value(x)?)
            .ok_or(Error::InvalidParameter { name: "x", reason: "outside the grid" })?;
        Ok(self.lattice.value(self.psi[p]))
    }
}

/// Probability vector over grid positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput);
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidBelief("masses must be finite and nonnegative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidBelief("masses must sum to 1"));
        }
        Ok(Belief { probs })
    }

    pub fn point_mass(n: usize, p: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[p] = 1.0;
        Belief { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Belief { probs: vec![1.0 / n as f64; n] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate().filter(|e| e.1 > 0.0)
    }
}

/// `c(z, a) = sum_x z(x) c(x, a)`; infinite if any supported state is infeasible at `a`.
pub fn comdp_cost(m: &GridMdp, z: &Belief, a: usize) -> f64 {
    let mut total = 0.0;
    for (x, p) in z.support() {
        let c = m.cost(x, a);
        if !c.is_finite() {
            return f64::INFINITY;
        }
        total += p * c;
    }
    total
}

/// One-step predictive law `sum_x z(x) P(. | x, a)`.
pub fn predictive(m: &GridMdp, z: &Belief, a: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; m.n_states()];
    for (x, p) in z.support() {
        if !m.is_feasible(x, a) {
            return Err(Error::InfeasibleAction { action: a });
        }
        let (next, prob) = m.row(x, a);
        for (&y, &q) in next.iter().zip(prob) {
            out[y as usize] += p * q;
        }
    }
    Ok(out)
}

/// Observation law `R'(y | z, a)` as `(observation position, mass)` pairs
/// sorted by position, zero masses dropped.
pub fn observation_marginal(m: &GridMdp, part: &ContainerPartition, z: &Belief, a: usize) -> Result<Vec<(usize, f64)>> {
    let pred = predictive(m, z, a)?;
    Ok(split_observations(part, &pred).into_iter().map(|(y, mass, _)| (y, mass)).collect())
}

/// Groups the predictive law by observation: `(y, R'(y), states mapping to y)`.
fn split_observations(part: &ContainerPartition, pred: &[f64]) -> Vec<(usize, f64, Vec<usize>)> {
    let mut groups: BTreeMap<usize, (f64, Vec<usize>)> = BTreeMap::new();
    for (x, &p) in pred.iter().enumerate() {
        if p > 0.0 {
            let e = groups.entry(part.psi(x)).or_insert((0.0, Vec::new()));
            e.0 += p;
            e.1.push(x);
        }
    }
    groups.into_iter().map(|(y, (mass, xs))| (y, mass, xs)).collect()
}

/// Posterior after acting with `a` and observing position `y`.
pub fn bayes_filter(m: &GridMdp, part: &ContainerPartition, z: &Belief, a: usize, y: usize) -> Result<Belief> {
    let pred = predictive(m, z, a)?;
    let mass: f64 = (0..pred.len()).filter(|&x| part.psi(x) == y).map(|x| pred[x]).sum();
    if !(mass > 0.0) {
        return Err(Error::ImpossibleObservation { observation: part.lattice().value(y) });
    }
    let probs = pred
        .iter()
        .enumerate()
        .map(|(x, &p)| if part.psi(x) == y { p / mass } else { 0.0 })
        .collect();
    Ok(Belief { probs })
}

/// Actions with finite belief cost at `z`.
fn feasible_actions<'a>(m: &'a GridMdp, z: &'a [(u32, f64)]) -> impl Iterator<Item = usize> + 'a {
    (0..m.n_actions()).filter(move |&a| z.iter().all(|&(x, _)| m.is_feasible(x as usize, a)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNode {
    pub depth: usize,
    /// Sparse belief `(position, mass)`.
    pub support: Vec<(u32, f64)>,
    /// Optimal value with `horizon - depth` steps to go.
    pub value: f64,
    /// Optimal first actions (empty at the leaves).
    pub best_actions: Vec<usize>,
    /// Per feasible action: `(action, [(observation, mass, child node)])`.
    pub children: Vec<(usize, Vec<(usize, f64, usize)>)>,
}

/// The reachable belief tree of an `N`-step problem, solved by backward
/// induction. Node `0` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefTree {
    pub nodes: Vec<BeliefNode>,
    pub horizon: usize,
    pub alpha: f64,
    n_states: usize,
}

impl BeliefTree {
    pub fn value(&self) -> f64 {
        self.nodes[0].value
    }

    pub fn root_actions(&self) -> &[usize] {
        &self.nodes[0].best_actions
    }

    pub fn belief(&self, node: usize) -> Belief {
        let mut probs = vec![0.0; self.n_states];
        for &(x, p) in &self.nodes[node].support {
            probs[x as usize] = p;
        }
        Belief { probs }
    }

    /// Child reached by acting with `a` and observing `y`.
    pub fn child(&self, node: usize, a: usize, y: usize) -> Option<usize> {
        let (_, branches) = self.nodes[node].children.iter().find(|c| c.0 == a)?;
        branches.iter().find(|b| b.0 == y).map(|b| b.2)
    }
}

fn merge_key(support: &[(u32, f64)]) -> Vec<(u32, i64)> {
    support
        .iter()
        .map(|&(x, p)| (x, libm::round(p / MERGE_TOL) as i64))
        .filter(|e| e.1 != 0)
        .collect()
}

/// Exact finite-horizon belief value iteration over the beliefs reachable
/// from `p0`. Beliefs at the same depth that agree within `1e-10` are merged.
pub fn belief_value_iteration(
    m: &GridMdp,
    part: &ContainerPartition,
    p0: &Belief,
    horizon: usize,
    alpha: f64,
    max_nodes: usize,
) -> Result<BeliefTree> {
    if p0.len() != m.n_states() {
        return Err(Error::InvalidBelief("prior must cover the grid"));
    }
    let root: Vec<(u32, f64)> = p0.support().map(|(x, p)| (x as u32, p)).collect();
    let mut nodes = vec![BeliefNode { depth: 0, support: root, value: 0.0, best_actions: Vec::new(), children: Vec::new() }];
    let mut level = vec![0usize];
    for depth in 0..horizon {
        let mut index: BTreeMap<Vec<(u32, i64)>, usize> = BTreeMap::new();
        let mut next_level = Vec::new();
        for &node in &level {
            let z = Belief { probs: {
                let mut probs = vec![0.0; m.n_states()];
                for &(x, p) in &nodes[node].support {
                    probs[x as usize] = p;
                }
                probs
            } };
            let actions: Vec<usize> = feasible_actions(m, &nodes[node].support).collect();
            let mut children = Vec::with_capacity(actions.len());
            for a in actions {
                let pred = predictive(m, &z, a)?;
                let mut branches = Vec::new();
                for (y, mass, xs) in split_observations(part, &pred) {
                    let support: Vec<(u32, f64)> = xs.iter().map(|&x| (x as u32, pred[x] / mass)).collect();
                    let key = merge_key(&support);
                    let child = match index.get(&key) {
                        Some(&c) if linf(&nodes[c].support, &support) <= MERGE_TOL => c,
                        _ => {
                            if nodes.len() >= max_nodes {
                                return Err(Error::TreeTooLarge { cap: max_nodes });
                            }
                            let c = nodes.len();
                            nodes.push(BeliefNode {
                                depth: depth + 1,
                                support,
                                value: 0.0,
                                best_actions: Vec::new(),
                                children: Vec::new(),
                            });
                            index.insert(key, c);
                            next_level.push(c);
                            c
                        }
                    };
                    branches.push((y, mass, child));
                }
                children.push((a, branches));
            }
            nodes[node].children = children;
        }
        level = next_level;
    }
    // children always have larger indices, so a reverse sweep is a valid backward induction
    for i in (0..nodes.len()).rev() {
        if nodes[i].depth == horizon {
            continue;
        }
        let mut best = f64::INFINITY;
        let mut qs = Vec::with_capacity(nodes[i].children.len());
        for (a, branches) in &nodes[i].children {
            let mut q = 0.0;
            for &(x, p) in &nodes[i].support {
                q += p * m.cost(x as usize, *a);
            }
            if alpha != 0.0 {
                q += alpha * branches.iter().map(|&(_, mass, c)| mass * nodes[c].value).sum::<f64>();
            }
            best = best.min(q);
            qs.push((*a, q));
        }
        nodes[i].value = best;
        nodes[i].best_actions = qs.into_iter().filter(|&(_, q)| q <= best + TIE_TOL).map(|e| e.0).collect();
    }
    Ok(BeliefTree { nodes, horizon, alpha, n_states: m.n_states() })
}

fn linf(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let mut i = 0;
    let mut j = 0;
    let mut worst = 0.0f64;
    while i < a.len() || j < b.len() {
        let (xa, xb) = (a.get(i).map(|e| e.0), b.get(j).map(|e| e.0));
        let d = match (xa, xb) {
            (Some(p), Some(q)) if p == q => {
                i += 1;
                j += 1;
                a[i - 1].1 - b[j - 1].1
            }
            (Some(p), Some(q)) if p < q => {
                i += 1;
                a[i - 1].1
            }
            (Some(_), None) => {
                i += 1;
                a[i - 1].1
            }
            _ => {
                j += 1;
                b[j - 1].1
            }
        };
        worst = worst.max(d.abs());
    }
    worst
}

/// How actions are chosen along a simulated trajectory.
pub enum BeliefPolicy<'a> {
    /// Smallest optimal action of the solved tree, following the observed branch.
    Tree(&'a BeliefTree),
    /// Any rule on `(step, filtered belief)`.
    Function(&'a dyn Fn(usize, &Belief) -> usize),
}

/// Simulates the hidden chain from `p0`: the state is sampled from the
/// prior, actions come from `policy`, observations from `Psi`, and
/// non-tree policies see the exact Bayes posterior. Replication `r` uses
/// its own stream of the seeded generator.
#[allow(clippy::too_many_arguments)]
pub fn pomdp_simulate(
    m: &GridMdp,
    part: &ContainerPartition,
    policy: &BeliefPolicy<'_>,
    p0: &Belief,
    horizon: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    if let BeliefPolicy::Tree(tree) = policy {
        if tree.horizon < horizon {
            return Err(Error::InvalidParameter { name: "horizon", reason: "exceeds the solved tree" });
        }
    }
    let mut samples = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = replication_rng(seed, rep as u64);
        let mut x = sample_index(&mut rng, p0.probs().iter());
        let mut z = p0.clone();
        let mut node = 0usize;
        let mut total = 0.0;
        let mut weight = 1.0;
        for t in 0..horizon {
            let a = match policy {
                BeliefPolicy::Tree(tree) => tree.nodes[node].best_actions[0],
                BeliefPolicy::Function(f) => f(t, &z),
            };
            let c = m.cost(x, a);
            if !c.is_finite() {
                return Err(Error::InfeasibleAction { action: a });
            }
            total += weight * c;
            weight *= alpha;
            let (next, prob) = m.row(x, a);
            x = next[sample_index(&mut rng, prob.iter())] as usize;
            let y = part.psi(x);
            match policy {
                BeliefPolicy::Tree(tree) => {
                    node = tree.child(node, a, y).ok_or(Error::ImpossibleObservation {
                        observation: part.lattice().value(y),
                    })?;
                }
                BeliefPolicy::Function(_) => z = bayes_filter(m, part, &z, a, y)?,
            }
        }
        samples.push(total);
    }
    Ok(SimulationSummary::from_samples(samples))
}
