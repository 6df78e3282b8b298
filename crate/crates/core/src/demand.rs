//! Finite discrete demand laws on the inventory lattice.

use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::level_of;
use crate::{Error, Result};

/// Probabilities must sum to one within this tolerance.
pub const PROB_TOL: f64 = 1e-12;

/// Default cap on the support size of convolution powers.
pub const DEFAULT_SUPPORT_CAP: usize = 1 << 20;

/// Demand law with atoms at lattice levels (value = level * step).
///
/// Atoms are sorted, unique and carry positive mass summing to one. Laws
/// built through [`Demand::from_atoms`] or [`Demand::quantize`] also have
/// positive mass above zero; convolution results (e.g. `S_0 = 0`) are exempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    atoms: Vec<(i64, f64)>,
    step: f64,
}

impl Demand {
    pub fn from_atoms(pairs: &[(f64, f64)], step: f64) -> Result<Self> {
        check_step(step)?;
        if pairs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut atoms = Vec::with_capacity(pairs.len());
        for &(value, p) in pairs {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::BadProbability { value: p });
            }
            if value < 0.0 {
                return Err(Error::NegativeValue { value });
            }
            let level = level_of(value, step)?;
            if p > 0.0 {
                atoms.push((level, p));
            }
        }
        let sum: f64 = pairs.iter().map(|&(_, p)| p).sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::ProbSum { sum });
        }
        let d = Demand { atoms: merge_sorted(atoms), step };
        d.require_positive_mass()?;
        Ok(d)
    }

    /// Maps a sampled CDF onto the lattice: each increment goes to the
    /// nearest lattice point (ties round up), then the law is renormalized.
    pub fn quantize(cdf_samples: &[(f64, f64)], step: f64) -> Result<Self> {
        check_step(step)?;
        if cdf_samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut prev_value = f64::NEG_INFINITY;
        let mut prev_cum = 0.0;
        let mut atoms = Vec::with_capacity(cdf_samples.len());
        for (index, &(value, cum)) in cdf_samples.iter().enumerate() {
            if !value.is_finite() || !cum.is_finite() || value < prev_value || cum < prev_cum {
                return Err(Error::NonMonotoneCdf { index });
            }
            let mass = cum - prev_cum;
            if mass > 0.0 {
                let level = libm::floor(value / step + 0.5) as i64;
                if level < 0 {
                    return Err(Error::NegativeValue { value });
                }
                atoms.push((level, mass));
            }
            prev_value = value;
            prev_cum = cum;
        }
        if (prev_cum - 1.0).abs() > 1e-9 {
            return Err(Error::ProbSum { sum: prev_cum });
        }
        let mut atoms = merge_sorted(atoms);
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        for a in &mut atoms {
            a.1 /= total;
        }
        let d = Demand { atoms, step };
        d.require_positive_mass()?;
        Ok(d)
    }

    /// Point mass at lattice level `level` (no nontriviality check).
    pub fn point_mass(level: i64, step: f64) -> Self {
        Demand { atoms: vec![(level, 1.0)], step }
    }

    /// Atoms as (lattice level, probability).
    pub fn atoms(&self) -> &[(i64, f64)] {
        &self.atoms
    }

    /// Atoms as (inventory value, probability).
    pub fn value_atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().map(move |&(k, p)| (k as f64 * self.step, p))
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn min_level(&self) -> i64 {
        self.atoms[0].0
    }

    pub fn max_level(&self) -> i64 {
        self.atoms[self.atoms.len() - 1].0
    }

    pub fn max_value(&self) -> f64 {
        self.max_level() as f64 * self.step
    }

    pub fn mean(&self) -> f64 {
        self.value_atoms().map(|(v, p)| v * p).sum()
    }

    /// Probability at lattice level `level`.
    pub fn prob(&self, level: i64) -> f64 {
        self.atoms
            .binary_search_by_key(&level, |a| a.0)
            .map(|i| self.atoms[i].1)
            .unwrap_or(0.0)
    }

    /// Law of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &Demand) -> Demand {
        let lo = self.min_level() + other.min_level();
        let hi = self.max_level() + other.max_level();
        let mut dense = vec![0.0; (hi - lo + 1) as usize];
        for &(a, p) in &self.atoms {
            for &(b, q) in &other.atoms {
                dense[(a + b - lo) as usize] += p * q;
            }
        }
        let atoms = dense
            .into_iter()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
            .map(|(i, p)| (lo + i as i64, p))
            .collect();
        Demand { atoms, step: self.step }
    }

    /// Law of `S_t`, the sum of `t` i.i.d. draws; `S_0` is the point mass at 0.
    pub fn convolve_power(&self, t: usize) -> Result<Demand> {
        self.convolve_power_capped(t, DEFAULT_SUPPORT_CAP)
    }

    pub fn convolve_power_capped(&self, t: usize, cap: usize) -> Result<Demand> {
        let width = (self.max_level() - self.min_level()) as usize;
        let size = width.saturating_mul(t).saturating_add(1);
        if size > cap {
            return Err(Error::SupportTooLarge { size, cap });
        }
        let mut acc = Demand::point_mass(0, self.step);
        let mut base = self.clone();
        let mut n = t;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.convolve(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.convolve(&base);
            }
        }
        Ok(acc)
    }

    fn require_positive_mass(&self) -> Result<()> {
        if self.atoms.iter().any(|&(k, _)| k > 0) {
            Ok(())
        } else {
            Err(Error::AllMassAtZero)
        }
    }
}

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "step", reason: "must be positive" })
    }
}

fn merge_sorted(mut atoms: Vec<(i64, f64)>) -> Vec<(i64, f64)> {
    atoms.sort_by_key(|a| a.0);
    let mut out: Vec<(i64, f64)> = Vec::with_capacity(atoms.len());
    for (k, p) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += p,
            _ => out.push((k, p)),
        }
    }
    out
}
