use crate::{Error, Result};

/// Contiguous grid of lattice levels `lo..=hi`; level `k` is the inventory
/// value `k * step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    lo: i64,
    hi: i64,
    step: f64,
}

impl Lattice {
    pub fn new(lo: i64, hi: i64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidGrid("step must be positive"));
        }
        if lo > hi {
            return Err(Error::InvalidGrid("lo exceeds hi"));
        }
        Ok(Lattice { lo, hi, step })
    }

    /// Grid from inventory values; both ends must sit on the lattice.
    pub fn from_values(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidGrid("step must be positive"));
        }
        let lo = level_of(lo, step)?;
        let hi = level_of(hi, step)?;
        Lattice::new(lo, hi, step)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice level of grid position `i`.
    pub fn level(&self, i: usize) -> i64 {
        self.lo + i as i64
    }

    /// Inventory value of grid position `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.level(i) as f64 * self.step
    }

    pub fn value_of_level(&self, level: i64) -> f64 {
        level as f64 * self.step
    }

    pub fn position(&self, level: i64) -> Option<usize> {
        (self.lo..=self.hi).contains(&level).then(|| (level - self.lo) as usize)
    }

    /// Position of `level` clamped into the grid, and whether clamping occurred.
    pub fn clamp(&self, level: i64) -> (usize, bool) {
        if level < self.lo {
            (0, true)
        } else if level > self.hi {
            (self.len() - 1, true)
        } else {
            ((level - self.lo) as usize, false)
        }
    }

    pub fn level_of_value(&self, value: f64) -> Result<i64> {
        level_of(value, self.step)
    }
}

/// Lattice level of `value`, rejecting values more than 1e-9 steps off.
pub(crate) fn level_of(value: f64, step: f64) -> Result<i64> {
    if !value.is_finite() {
        return Err(Error::OffLattice { value, step });
    }
    let q = value / step;
    let k = libm::round(q);
    if libm::fabs(q - k) > 1e-9 * libm::fmax(1.0, libm::fabs(q)) {
        return Err(Error::OffLattice { value, step });
    }
    Ok(k as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_and_clamping() {
        let g = Lattice::from_values(-1.0, 1.5, 0.5).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.lo(), -2);
        assert_eq!(g.value(0), -1.0);
        assert_eq!(g.position(3), Some(5));
        assert_eq!(g.clamp(-7), (0, true));
        assert_eq!(g.clamp(9), (5, true));
        assert_eq!(g.clamp(0), (2, false));
    }

    #[test]
    fn rejects_off_lattice_ends() {
        assert!(matches!(Lattice::from_values(0.25, 2.0, 0.5), Err(Error::OffLattice { .. })));
        assert!(Lattice::from_values(0.3, 0.9, 0.1).is_ok());
        assert!(Lattice::new(2, 1, 1.0).is_err());
    }
}
