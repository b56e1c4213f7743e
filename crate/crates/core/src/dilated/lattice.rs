use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default memory budget in complex entries (dense dilated operators).
pub const DEFAULT_BUDGET: usize = 1 << 26;

/// One Stinespring register: site j, slice tau (1-based), M levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub site: usize,
    pub tau: usize,
    pub levels: usize,
}

/// Physical qudits followed by Stinespring registers, in that tensor order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeLattice {
    pub n: usize,
    pub q: usize,
    pub registers: Vec<Register>,
    pub budget: usize,
}

impl SpacetimeLattice {
    pub fn new(n: usize, q: usize, registers: Vec<Register>) -> Result<Self> {
        let l = SpacetimeLattice { n, q, registers, budget: DEFAULT_BUDGET };
        l.check()?;
        Ok(l)
    }

    pub fn physical(n: usize, q: usize) -> Result<Self> {
        Self::new(n, q, vec![])
    }

    /// `slices` uniform slices, each with one `levels`-level register per listed site.
    pub fn with_slices(n: usize, q: usize, sites: &[usize], slices: usize, levels: usize) -> Result<Self> {
        let mut regs = Vec::new();
        for tau in 1..=slices {
            for &site in sites {
                regs.push(Register { site, tau, levels });
            }
        }
        Self::new(n, q, regs)
    }

    pub fn with_budget(mut self, budget: usize) -> Result<Self> {
        self.budget = budget;
        self.check()?;
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::InvalidDimension(self.q));
        }
        for r in &self.registers {
            if r.levels == 0 {
                return Err(Error::InvalidParameter("register with zero levels".into()));
            }
            if r.site >= self.n {
                return Err(Error::InvalidParameter(format!("register on missing site {}", r.site)));
            }
        }
        let d = self.dim_checked().ok_or(Error::BudgetExceeded { dim: usize::MAX, budget: self.budget })?;
        if d > self.budget {
            return Err(Error::BudgetExceeded { dim: d, budget: self.budget });
        }
        Ok(())
    }

    fn dim_checked(&self) -> Option<usize> {
        let mut d: usize = 1;
        for x in self.dims() {
            d = d.checked_mul(x)?;
        }
        Some(d)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.q; self.n];
        d.extend(self.registers.iter().map(|r| r.levels));
        d
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn physical_dim(&self) -> usize {
        self.q.pow(self.n as u32)
    }

    pub fn register_dim(&self) -> usize {
        self.registers.iter().map(|r| r.levels).product()
    }

    /// Tensor factor of register `r`.
    pub fn factor(&self, r: usize) -> Result<usize> {
        if r < self.registers.len() {
            Ok(self.n + r)
        } else {
            Err(Error::UnknownRegister(r))
        }
    }

    pub fn register_at(&self, site: usize, tau: usize) -> Option<usize> {
        self.registers.iter().position(|r| r.site == site && r.tau == tau)
    }

    pub fn slices(&self) -> usize {
        self.registers.iter().map(|r| r.tau).max().unwrap_or(0)
    }

    /// Dense operators of dimension D x D must fit the budget.
    pub fn check_dense(&self) -> Result<()> {
        let d = self.dim();
        match d.checked_mul(d) {
            Some(e) if e <= self.budget => Ok(()),
            _ => Err(Error::BudgetExceeded { dim: d, budget: self.budget }),
        }
    }

    /// Lattice with the listed registers removed.
    pub fn without(&self, regs: &[usize]) -> SpacetimeLattice {
        SpacetimeLattice {
            n: self.n,
            q: self.q,
            registers: self
                .registers
                .iter()
                .enumerate()
                .filter(|(i, _)| !regs.contains(i))
                .map(|(_, r)| *r)
                .collect(),
            budget: self.budget,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_and_budget() {
        let l = SpacetimeLattice::with_slices(3, 2, &[0, 1, 2], 2, 2).unwrap();
        assert_eq!(l.dim(), 8 * 64);
        assert_eq!(l.slices(), 2);
        assert_eq!(l.register_at(1, 2), Some(4));
        assert!(l.check_dense().is_ok());
        assert!(SpacetimeLattice::with_slices(20, 2, &[0], 100, 2).is_err());
        assert!(SpacetimeLattice::new(2, 2, vec![Register { site: 5, tau: 1, levels: 2 }]).is_err());
        assert!(SpacetimeLattice::new(2, 2, vec![Register { site: 0, tau: 1, levels: 0 }]).is_err());
    }
}
