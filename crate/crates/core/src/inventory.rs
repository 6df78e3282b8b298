//! The periodic-review inventory model as a grid MDP, and its G-functions.

use alloc::vec::Vec;

use crate::costs::CostModel;
use crate::demand::Demand;
use crate::lattice::Lattice;
use crate::mdp::{Clamping, Dynamics, GridMdp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InventoryDynamics {
    /// `x + a - D`
    #[default]
    Backorder,
    /// `(x + a - D)^+`
    LostSales,
}

impl InventoryDynamics {
    pub fn as_dynamics(self) -> Dynamics<'static> {
        match self {
            InventoryDynamics::Backorder => Dynamics::Backorder,
            InventoryDynamics::LostSales => Dynamics::LostSales,
        }
    }
}

/// Cost model, demand, grid and action cap of one inventory instance.
///
/// Orders that would push the post-order level above the grid top get
/// infinite cost, so upward clamping never happens; the grid top therefore
/// acts as a storage capacity.
#[derive(Debug, Clone)]
pub struct InventoryModel {
    cost: CostModel,
    demand: Demand,
    lattice: Lattice,
    a_max: i64,
    dynamics: InventoryDynamics,
    clamping: Clamping,
}

impl InventoryModel {
    /// `a_max` is in lattice steps.
    pub fn new(
        cost: CostModel,
        demand: Demand,
        lattice: Lattice,
        a_max: i64,
        dynamics: InventoryDynamics,
    ) -> Result<Self> {
        if libm::fabs(demand.step() - lattice.step()) > 1e-12 * lattice.step() {
            return Err(Error::InvalidGrid("grid step must equal the demand step"));
        }
        if a_max < 0 {
            return Err(Error::InvalidParameter { name: "a_max", reason: "must be >= 0" });
        }
        Ok(InventoryModel { cost, demand, lattice, a_max, dynamics, clamping: Clamping::Record })
    }

    pub fn with_clamping(mut self, clamping: Clamping) -> Self {
        self.clamping = clamping;
        self
    }

    /// Same instance with a different setup cost `K`.
    pub fn with_setup(&self, setup: f64) -> Result<Self> {
        let mut m = self.clone();
        m.cost = self.cost.with_setup(setup)?;
        Ok(m)
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn demand(&self) -> &Demand {
        &self.demand
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn a_max(&self) -> i64 {
        self.a_max
    }

    pub fn dynamics(&self) -> InventoryDynamics {
        self.dynamics
    }

    /// `c(x, a) = K 1{a > 0} + c a + E h(x + a - D)`, or `+inf` above the grid top.
    pub fn one_step(&self, x: f64, a: f64) -> f64 {
        let top = self.lattice.value_of_level(self.lattice.hi());
        if x + a > top + 1e-9 * self.lattice.step() {
            f64::INFINITY
        } else {
            self.cost.one_step(x, a, &self.demand)
        }
    }

    pub fn build_mdp(&self) -> Result<GridMdp> {
        GridMdp::build(
            self.dynamics.as_dynamics(),
            self.demand.atoms(),
            self.lattice,
            self.a_max,
            self.clamping,
            |x, a| self.one_step(x, a),
        )
    }

    /// `G(x) = c x + E h(x - D) + alpha E v(F(x, 0, D))`, with successors
    /// clamped exactly as in [`InventoryModel::build_mdp`]. For backorder
    /// dynamics `Q(x, a) = K 1{a > 0} - c x + G(x + a)` holds on the grid.
    pub fn g_function(&self, v: &[f64], alpha: f64) -> GFunction {
        assert_eq!(v.len(), self.lattice.len(), "v must cover the grid");
        let dyn_ = self.dynamics.as_dynamics();
        let c = self.cost.unit();
        let mut values = Vec::with_capacity(v.len());
        let mut clamped_mass = Vec::with_capacity(v.len());
        for i in 0..self.lattice.len() {
            let x = self.lattice.level(i);
            let xv = self.lattice.value(i);
            let mut cont = 0.0;
            let mut lost = 0.0;
            for &(d, p) in self.demand.atoms() {
                let (y, clamped) = self.lattice.clamp(dyn_.next(x, 0, d));
                if clamped {
                    lost += p;
                }
                cont += p * v[y];
            }
            let mut g = c * xv + self.cost.expected_holding(xv, &self.demand);
            if alpha != 0.0 {
                g += alpha * cont;
            }
            values.push(g);
            clamped_mass.push(lost);
        }
        GFunction { lattice: self.lattice, values, clamped_mass }
    }
}

/// A G-function on the grid along with the demand mass clamped at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct GFunction {
    pub lattice: Lattice,
    pub values: Vec<f64>,
    pub clamped_mass: Vec<f64>,
}

impl GFunction {
    /// First position from which no demand outcome is clamped. Left of it,
    /// `G` is distorted by the grid edge rather than by the model.
    pub fn clean_start(&self) -> usize {
        self.clamped_mass.iter().rposition(|&m| m > 0.0).map_or(0, |i| i + 1)
    }

    /// Values on the clamp-free window.
    pub fn clean_values(&self) -> &[f64] {
        &self.values[self.clean_start()..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::HoldingCost;
    use alloc::vec;

    fn model(c: f64, lo: i64, hi: i64) -> InventoryModel {
        let cost = CostModel::new(0.0, c, HoldingCost::linear(1.0, 1.0).unwrap()).unwrap();
        let d = Demand::point_mass(1, 1.0);
        InventoryModel::new(cost, d, Lattice::new(lo, hi, 1.0).unwrap(), hi - lo, InventoryDynamics::Backorder)
            .unwrap()
    }

    #[test]
    fn g_function_examples() {
        let m = model(1.0, -3, 3);
        let g = m.g_function(&vec![10.0; 7], 0.5);
        assert_eq!(g.values[4], 6.0);
        let g0 = m.g_function(&vec![0.0; 7], 0.7);
        for i in 0..7 {
            let x = m.lattice().value(i);
            assert_eq!(g0.values[i], x + m.cost().expected_holding(x, m.demand()));
        }
        let a = m.g_function(&vec![3.0; 7], 0.0);
        let b = m.g_function(&vec![-8.0; 7], 0.0);
        assert_eq!(a.values, b.values);
        assert_eq!(a.clean_start(), 1);
    }

    #[test]
    fn q_decomposes_through_g() {
        let m = model(1.5, -4, 4).with_setup(2.0).unwrap();
        let mdp = m.build_mdp().unwrap();
        let v: Vec<f64> = (0..9).map(|i| (i as f64 - 3.0) * (i as f64 - 3.0)).collect();
        let g = m.g_function(&v, 0.9);
        for x in 0..9 {
            for a in 0..mdp.n_actions() {
                let q = mdp.q_value(x, a, &v, 0.9);
                if x + a < 9 {
                    let k = if a > 0 { 2.0 } else { 0.0 };
                    let pred = k - 1.5 * m.lattice().value(x) + g.values[x + a];
                    assert!((q - pred).abs() < 1e-12);
                } else {
                    assert!(q.is_infinite());
                }
            }
        }
    }

    #[test]
    fn step_mismatch_rejected() {
        let cost = CostModel::new(0.0, 1.0, HoldingCost::linear(1.0, 1.0).unwrap()).unwrap();
        let d = Demand::point_mass(1, 1.0);
        let r = InventoryModel::new(cost, d, Lattice::new(0, 4, 0.5).unwrap(), 2, InventoryDynamics::Backorder);
        assert!(r.is_err());
    }
}
