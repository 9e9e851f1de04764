use faer::c64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Two-component wave function `(phi, chi)` sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoComponentState {
    pub grid: Grid,
    pub upper: Vec<c64>,
    pub lower: Vec<c64>,
}

impl TwoComponentState {
    pub fn new(grid: Grid, upper: Vec<c64>, lower: Vec<c64>) -> Result<Self> {
        if upper.len() != grid.size() || lower.len() != grid.size() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, upper, lower })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.size();
        Self {
            grid,
            upper: vec![c64::new(0.0, 0.0); n],
            lower: vec![c64::new(0.0, 0.0); n],
        }
    }

    pub fn upper_only(grid: Grid, upper: Vec<c64>) -> Result<Self> {
        let lower = vec![c64::new(0.0, 0.0); upper.len()];
        Self::new(grid, upper, lower)
    }

    /// Pseudo-norm `<Psi|Psi> = sum(|phi|^2 - |chi|^2) dV`; real by construction.
    pub fn pseudo_norm(&self) -> f64 {
        let dv = self.grid.cell_volume();
        let s: f64 = self
            .upper
            .iter()
            .zip(&self.lower)
            .map(|(u, l)| u.norm_sqr() - l.norm_sqr())
            .sum();
        s * dv
    }

    /// Positive-definite `L2` norm over both components.
    pub fn l2_norm(&self) -> f64 {
        let dv = self.grid.cell_volume();
        let s: f64 = self
            .upper
            .iter()
            .chain(&self.lower)
            .map(|z| z.norm_sqr())
            .sum();
        (s * dv).sqrt()
    }

    pub fn scale(&mut self, c: c64) {
        for z in self.upper.iter_mut().chain(self.lower.iter_mut()) {
            *z *= c;
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let d = |a: &[c64], b: &[c64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Ok(Self {
            grid: self.grid,
            upper: d(&self.upper, &other.upper),
            lower: d(&self.lower, &other.lower),
        })
    }

    /// Stacked `[upper; lower]` vector (component-major).
    pub fn stacked(&self) -> Vec<c64> {
        self.upper.iter().chain(&self.lower).copied().collect()
    }

    pub fn from_stacked(grid: Grid, v: &[c64]) -> Result<Self> {
        let n = grid.size();
        if v.len() != 2 * n {
            return Err(Error::GridMismatch);
        }
        Self::new(grid, v[..n].to_vec(), v[n..].to_vec())
    }
}

/// Pseudoscalar product `int a^dagger rho_3 b dV`.
pub fn pseudo_inner(a: &TwoComponentState, b: &TwoComponentState) -> Result<c64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let dot = |x: &[c64], y: &[c64]| -> c64 { x.iter().zip(y).map(|(p, q)| p.conj() * q).sum() };
    Ok((dot(&a.upper, &b.upper) - dot(&a.lower, &b.lower)) * a.grid.cell_volume())
}

/// Plain `L2` inner product of single-component arrays with cell weighting.
pub fn l2_inner(grid: &Grid, a: &[c64], b: &[c64]) -> c64 {
    let s: c64 = a.iter().zip(b).map(|(p, q)| p.conj() * q).sum();
    s * grid.cell_volume()
}
