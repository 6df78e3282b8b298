//! Instance generators and brute-force oracles shared by integration tests.
//!
//! The oracles work from the model primitives (demand atoms, slopes,
//! setup and unit cost) and never touch the library's transition rows.
#![allow(dead_code)]

use invdp_core::demand::Demand;
use invdp_core::{CostModel, HoldingCost, InventoryDynamics, InventoryModel, Lattice};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }
}

/// Plain description of an inventory instance.
#[derive(Debug, Clone)]
pub struct Spec {
    pub setup: f64,
    pub unit: f64,
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    pub demand: Vec<(f64, f64)>,
    pub lo: i64,
    pub hi: i64,
    /// Action cap in lattice steps.
    pub a_max: i64,
}

impl Spec {
    pub fn model(&self) -> InventoryModel {
        let h = HoldingCost::new(self.breakpoints.clone(), self.slopes.clone()).unwrap();
        let cost = CostModel::new(self.setup, self.unit, h).unwrap();
        let d = Demand::from_atoms(&self.demand, 1.0).unwrap();
        let lat = Lattice::new(self.lo, self.hi, 1.0).unwrap();
        InventoryModel::new(cost, d, lat, self.a_max, InventoryDynamics::Backorder).unwrap()
    }

    pub fn k_h(&self) -> f64 {
        -self.slopes[0]
    }

    /// Holding cost as the integral of the slope from 0.
    pub fn h(&self, x: f64) -> f64 {
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend(&self.breakpoints);
        edges.push(f64::INFINITY);
        let mut total = 0.0;
        for (i, &s) in self.slopes.iter().enumerate() {
            let (a, b) = (edges[i], edges[i + 1]);
            // signed length of [0, x] intersected with [a, b]
            let (lo, hi) = if x >= 0.0 { (0.0, x) } else { (x, 0.0) };
            let len = (hi.min(b) - lo.max(a)).max(0.0);
            total += if x >= 0.0 { s * len } else { -s * len };
        }
        total
    }

    pub fn n(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn x(&self, i: usize) -> f64 {
        (self.lo + i as i64) as f64
    }

    pub fn one_step(&self, x: f64, a: f64) -> f64 {
        if x + a > self.hi as f64 {
            return f64::INFINITY;
        }
        let fixed = if a > 0.0 { self.setup } else { 0.0 };
        fixed + self.unit * a + self.demand.iter().map(|&(d, p)| p * self.h(x + a - d)).sum::<f64>()
    }

    /// Clamped successor position of level `y`.
    pub fn clamp(&self, y: f64) -> usize {
        let y = y.max(self.lo as f64).min(self.hi as f64);
        (y as i64 - self.lo) as usize
    }

    pub fn q(&self, x: usize, a: usize, v: &[f64], alpha: f64) -> f64 {
        let c = self.one_step(self.x(x), a as f64);
        if !c.is_finite() || alpha == 0.0 {
            return c;
        }
        let cont: f64 = self.demand.iter().map(|&(d, p)| p * v[self.clamp(self.x(x) + a as f64 - d)]).sum();
        c + alpha * cont
    }

    /// Finite-horizon values and argmin sets `(v_t, A_t)` for `t = 0..=n`.
    pub fn oracle_dp(&self, n: usize, alpha: f64) -> Vec<(Vec<f64>, Vec<Vec<usize>>)> {
        let mut out = vec![(vec![0.0; self.n()], vec![])];
        for _ in 0..n {
            let prev = &out.last().unwrap().0;
            let mut v = Vec::with_capacity(self.n());
            let mut sets = Vec::with_capacity(self.n());
            for x in 0..self.n() {
                let qs: Vec<f64> = (0..=self.a_max as usize).map(|a| self.q(x, a, prev, alpha)).collect();
                let best = qs.iter().copied().fold(f64::INFINITY, f64::min);
                sets.push((0..qs.len()).filter(|&a| qs[a] <= best + 1e-9).collect());
                v.push(best);
            }
            out.push((v, sets));
        }
        out
    }

    pub fn max_demand(&self) -> f64 {
        self.demand.iter().map(|d| d.0).fold(0.0, f64::max)
    }
}

/// Random instance satisfying the growth condition: leftmost slope between
/// 1.5 and 3 times the unit cost.
pub fn random_gb(rng: &mut Rng, adjacent_atoms: bool) -> Spec {
    let unit = rng.range(1.0, 2.0);
    let k_h = unit * rng.range(1.5, 3.0);
    let h_plus = rng.range(0.2, 2.0);
    let (breakpoints, slopes) = if rng.unit() < 0.5 {
        (vec![0.0], vec![-k_h, h_plus])
    } else {
        let b = -(2.0 + rng.below(4) as f64);
        (vec![b, 0.0], vec![-k_h, -k_h * rng.range(0.2, 0.8), h_plus])
    };
    let setup = rng.range(0.0, 8.0);
    let n_atoms = 1 + rng.below(6);
    let mut values: Vec<f64> = (0..6).map(|v| v as f64).collect();
    for i in (1..values.len()).rev() {
        let j = rng.below(i + 1);
        values.swap(i, j);
    }
    let mut chosen: Vec<f64> = values[..n_atoms].to_vec();
    if adjacent_atoms {
        for v in [0.0, 1.0] {
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
    }
    if chosen.iter().all(|&v| v == 0.0) {
        chosen.push(1.0 + rng.below(5) as f64);
    }
    chosen.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let weights: Vec<f64> = chosen.iter().map(|_| rng.range(0.1, 1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut demand: Vec<(f64, f64)> = chosen.iter().zip(&weights).map(|(&v, &w)| (v, w / total)).collect();
    let sum: f64 = demand.iter().map(|d| d.1).sum();
    demand[0].1 += 1.0 - sum;
    Spec { setup, unit, breakpoints, slopes, demand, lo: -60, hi: 40, a_max: 100 }
}

/// Brute-force belief-MDP value over all observation paths, with its own
/// Bayes filter and no belief merging.
pub struct BeliefOracle<'a> {
    pub spec: &'a Spec,
    /// Observation label per grid position.
    pub psi: Vec<usize>,
    pub alpha: f64,
}

impl BeliefOracle<'_> {
    pub fn value(&self, z: &[f64], steps: usize) -> f64 {
        if steps == 0 {
            return 0.0;
        }
        let n = self.spec.n();
        let mut best = f64::INFINITY;
        for a in 0..=self.spec.a_max as usize {
            let mut cost = 0.0;
            let mut feasible = true;
            for x in 0..n {
                if z[x] > 0.0 {
                    let c = self.spec.one_step(self.spec.x(x), a as f64);
                    if !c.is_finite() {
                        feasible = false;
                        break;
                    }
                    cost += z[x] * c;
                }
            }
            if !feasible {
                continue;
            }
            // joint mass over (next state) by enumerating (x, demand)
            let mut pred = vec![0.0; n];
            for x in 0..n {
                if z[x] > 0.0 {
                    for &(d, p) in &self.spec.demand {
                        pred[self.spec.clamp(self.spec.x(x) + a as f64 - d)] += z[x] * p;
                    }
                }
            }
            let mut cont = 0.0;
            let mut labels: Vec<usize> = (0..n).filter(|&y| pred[y] > 0.0).map(|y| self.psi[y]).collect();
            labels.sort();
            labels.dedup();
            for obs in labels {
                let mass: f64 = (0..n).filter(|&y| self.psi[y] == obs).map(|y| pred[y]).sum();
                let post: Vec<f64> =
                    (0..n).map(|y| if self.psi[y] == obs { pred[y] / mass } else { 0.0 }).collect();
                cont += mass * self.value(&post, steps - 1);
            }
            best = best.min(cost + self.alpha * cont);
        }
        best
    }
}
