//! Inventory cost model and the scalar constants that decide the structure
//! of optimal policies: `k_h`, `alpha*`, growth condition GB, and `N_alpha`.

use alloc::vec::Vec;

use crate::demand::Demand;
use crate::{Error, Result};

/// Inequality checks absorb this much float roundoff.
pub const CHECK_TOL: f64 = 1e-9;

/// Convex piecewise-linear holding/backorder cost anchored at `h(0) = 0`.
///
/// `slopes[i]` applies on the piece between `breakpoints[i-1]` and
/// `breakpoints[i]` (unbounded at the ends), so there is one more slope than
/// breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldingCost {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
}

impl HoldingCost {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidHolding("need exactly one more slope than breakpoints"));
        }
        if breakpoints.iter().chain(&slopes).any(|v| !v.is_finite()) {
            return Err(Error::InvalidHolding("breakpoints and slopes must be finite"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidHolding("breakpoints must be strictly increasing"));
        }
        if slopes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidHolding("slopes must be nondecreasing"));
        }
        if slopes[0] >= 0.0 {
            return Err(Error::InvalidHolding("leftmost slope must be negative"));
        }
        if slopes[slopes.len() - 1] <= 0.0 {
            return Err(Error::InvalidHolding("rightmost slope must be positive"));
        }
        let h = HoldingCost { breakpoints, slopes };
        let probes = h.breakpoints.iter().flat_map(|&b| [b - 1.0, b, b + 1.0]);
        if probes.chain([-1.0, 1.0]).any(|x| h.eval(x) < -1e-12) {
            return Err(Error::InvalidHolding("h must be nonnegative with h(0) = 0"));
        }
        Ok(h)
    }

    /// `h(x) = h_plus * x` for `x >= 0`, `-h_minus * x` otherwise.
    pub fn linear(h_plus: f64, h_minus: f64) -> Result<Self> {
        HoldingCost::new(alloc::vec![0.0], alloc::vec![-h_minus, h_plus])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// `h(x) = integral of the slope from 0 to x`.
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
        let mut total = 0.0;
        let mut left = f64::NEG_INFINITY;
        for (i, &slope) in self.slopes.iter().enumerate() {
            let right = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
            let lo = if a > left { a } else { left };
            let hi = if b < right { b } else { right };
            if hi > lo {
                total += slope * (hi - lo);
            }
            left = right;
        }
        sign * total
    }

    /// `E h(x - D)` as an exact finite sum.
    pub fn expected(&self, x: f64, d: &Demand) -> f64 {
        d.value_atoms().map(|(v, p)| p * self.eval(x - v)).sum()
    }

    /// `k_h = -lim h(x)/x` as `x -> -inf`, exact for piecewise-linear `h`.
    pub fn k_h(&self) -> f64 {
        -self.slopes[0]
    }

    pub fn min_breakpoint(&self) -> f64 {
        self.breakpoints.first().copied().unwrap_or(0.0)
    }
}

/// Setup cost `K`, per-unit cost `c`, and holding cost `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    setup: f64,
    unit: f64,
    holding: HoldingCost,
}

impl CostModel {
    pub fn new(setup: f64, unit: f64, holding: HoldingCost) -> Result<Self> {
        if !(setup.is_finite() && setup >= 0.0) {
            return Err(Error::InvalidCost("setup cost K must be >= 0"));
        }
        if !(unit.is_finite() && unit > 0.0) {
            return Err(Error::InvalidCost("unit cost must be > 0"));
        }
        Ok(CostModel { setup, unit, holding })
    }

    pub fn setup(&self) -> f64 {
        self.setup
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn holding(&self) -> &HoldingCost {
        &self.holding
    }

    /// Same model with a different setup cost.
    pub fn with_setup(&self, setup: f64) -> Result<Self> {
        CostModel::new(setup, self.unit, self.holding.clone())
    }

    /// `K 1{a > 0} + c a + E h(x + a - D)`.
    pub fn one_step(&self, x: f64, a: f64, d: &Demand) -> f64 {
        let fixed = if a > 0.0 { self.setup } else { 0.0 };
        fixed + self.unit * a + self.holding.expected(x + a, d)
    }

    pub fn regime_constants(&self) -> RegimeConstants {
        let k_h = self.holding.k_h();
        RegimeConstants { k_h, alpha_star: 1.0 - k_h / self.unit }
    }

    /// Alias for [`HoldingCost::expected`].
    pub fn expected_holding(&self, x: f64, d: &Demand) -> f64 {
        self.holding.expected(x, d)
    }

    /// Searches lattice pairs `z < y` in `[lo, hi]` for a chord of
    /// `E h(. - D)` steeper than `-c`. Returns the leftmost witness.
    pub fn check_gb(&self, d: &Demand, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let step = d.step();
        let first = libm::ceil(lo / step - 1e-9) as i64;
        let last = libm::floor(hi / step + 1e-9) as i64;
        if last <= first {
            return None;
        }
        let eh: Vec<f64> = (first..=last).map(|k| self.holding.expected(k as f64 * step, d)).collect();
        for i in 0..eh.len() {
            for j in i + 1..eh.len() {
                let width = (j - i) as f64 * step;
                if (eh[j] - eh[i]) / width < -self.unit {
                    return Some(((first + i as i64) as f64 * step, (first + j as i64) as f64 * step));
                }
            }
        }
        None
    }

    /// Probe interval reaching past every breakpoint by the demand range, so
    /// that the leftmost chord sees the asymptotic slope.
    pub fn default_gb_probe(&self, d: &Demand, grid_lo: f64, grid_hi: f64) -> (f64, f64) {
        let reach = self.holding.min_breakpoint().min(0.0) - 10.0 * (d.max_value() + d.step());
        (grid_lo.min(reach), grid_hi.max(0.0))
    }

    /// `f_{t,alpha}(x) = c x + sum_{i=0}^{t} alpha^i E h(x - S_{i+1})`.
    pub fn f_t_alpha(&self, d: &Demand, t: usize, alpha: f64, x: f64) -> Result<f64> {
        let mut total = self.unit * x;
        let mut sum_law = Demand::point_mass(0, d.step());
        let mut weight = 1.0;
        for _ in 0..=t {
            sum_law = sum_law.convolve(d);
            total += weight * self.holding.expected(x, &sum_law);
            weight *= alpha;
        }
        Ok(total)
    }

    /// Smallest `t` with `k_h * sum_{i<=t} alpha^i > c`; infinite iff `alpha <= alpha*`.
    pub fn n_alpha(&self, alpha: f64) -> NAlpha {
        let RegimeConstants { k_h, alpha_star } = self.regime_constants();
        if alpha <= alpha_star {
            return NAlpha::Infinite;
        }
        let mut partial = 0.0;
        let mut weight = 1.0;
        let mut t = 0u64;
        loop {
            partial += k_h * weight;
            if partial > self.unit {
                return NAlpha::Finite(t);
            }
            let next_weight = weight * alpha;
            if next_weight == 0.0 || k_h * next_weight + partial == partial {
                // alpha barely above alpha*: partial sums stall in floating point
                return NAlpha::Infinite;
            }
            weight = next_weight;
            t += 1;
        }
    }

    /// `N_alpha` by probing `f_{t,alpha}` one step left of a far-left point:
    /// the first `t` whose increment `f(x - step) - f(x)` exceeds `tol`.
    pub fn n_alpha_by_probe(&self, d: &Demand, alpha: f64, t_max: usize, tol: f64) -> Result<NAlpha> {
        for t in 0..=t_max {
            let x = self.far_left_probe(d, t);
            let inc = self.f_t_alpha(d, t, alpha, x - d.step())? - self.f_t_alpha(d, t, alpha, x)?;
            if inc > tol {
                return Ok(NAlpha::Finite(t as u64));
            }
        }
        Ok(NAlpha::Infinite)
    }

    /// A lattice point left of every kink of `f_{t,alpha}`.
    pub fn far_left_probe(&self, d: &Demand, t: usize) -> f64 {
        let kinks = self.holding.min_breakpoint().min(0.0);
        let level = libm::floor(kinks / d.step()) as i64 - (t as i64 + 1) * d.max_level() - 10;
        level as f64 * d.step()
    }
}

/// `k_h` and the critical discount factor `alpha* = 1 - k_h / c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeConstants {
    pub k_h: f64,
    pub alpha_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NAlpha {
    Finite(u64),
    Infinite,
}

impl NAlpha {
    pub fn finite(self) -> Option<u64> {
        match self {
            NAlpha::Finite(n) => Some(n),
            NAlpha::Infinite => None,
        }
    }
}

impl core::fmt::Display for NAlpha {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NAlpha::Finite(n) => write!(f, "{n}"),
            NAlpha::Infinite => f.write_str("inf"),
        }
    }
}

/// First lattice triple `x < m < y` (positions into `g`) where
/// `g(m) > (1-l) g(x) + l g(y) + l K` beyond [`CHECK_TOL`], `l = (m-x)/(y-x)`.
/// Brute force over all triples.
pub fn k_convexity_violation(g: &[f64], k: f64) -> Option<(usize, usize, usize)> {
    let n = g.len();
    for x in 0..n {
        for m in x + 1..n {
            for y in m + 1..n {
                let lambda = (m - x) as f64 / (y - x) as f64;
                let rhs = (1.0 - lambda) * g[x] + lambda * g[y] + lambda * k;
                if g[m] > rhs + CHECK_TOL {
                    return Some((x, m, y));
                }
            }
        }
    }
    None
}

pub fn is_k_convex(g: &[f64], k: f64) -> bool {
    k_convexity_violation(g, k).is_none()
}
