use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest supported basis size (points^dim) for the dense operator layer.
pub const MAX_BASIS: usize = 4096;

/// Periodic uniform lattice on `[-L/2, L/2)^dim` with its dual momentum lattice.
///
/// Sites are ordered with the x index running fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    points: usize,
    length: f64,
}

impl Grid {
    pub fn new(dim: usize, points: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if points < 4 {
            return Err(Error::InvalidGrid(format!(
                "{points} points per axis; at least 4 are required"
            )));
        }
        if points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "{points} points per axis; an even count is required"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length {length} must be positive")));
        }
        let size = points
            .checked_pow(dim as u32)
            .filter(|s| *s <= MAX_BASIS)
            .ok_or_else(|| {
                Error::InvalidGrid(format!(
                    "{points}^{dim} sites exceeds the dense basis cap of {MAX_BASIS}"
                ))
            })?;
        debug_assert!(size > 0);
        Ok(Self { dim, points, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of lattice sites, `points^dim`.
    pub fn size(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of index `j` along any axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    /// Centered integer wave numbers `-n/2 .. n/2-1`.
    pub fn wave_numbers(&self) -> impl Iterator<Item = i64> {
        let half = (self.points / 2) as i64;
        -half..half
    }

    /// Lattice momenta `2 pi k / L` for the centered wave numbers.
    pub fn momenta(&self) -> Vec<f64> {
        let dk = 2.0 * PI / self.length;
        self.wave_numbers().map(|k| k as f64 * dk).collect()
    }

    pub fn max_momentum(&self) -> f64 {
        PI * self.points as f64 / self.length
    }

    /// Per-axis indices of a site.
    pub fn unravel(&self, site: usize) -> [usize; 3] {
        let n = self.points;
        let mut idx = [0; 3];
        let mut rest = site;
        for slot in idx.iter_mut().take(self.dim) {
            *slot = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        let n = self.points;
        (0..self.dim).rev().fold(0, |acc, a| acc * n + idx[a])
    }

    /// Position of a site; axes beyond `dim` are zero.
    pub fn position(&self, site: usize) -> [f64; 3] {
        let idx = self.unravel(site);
        let mut r = [0.0; 3];
        for a in 0..self.dim {
            r[a] = self.coordinate(idx[a]);
        }
        r
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        (0..self.size()).map(|s| self.position(s)).collect()
    }

    /// Minimum-image displacement `r - center` on the periodic cell.
    pub fn wrap_displacement(&self, r: f64, center: f64) -> f64 {
        let l = self.length;
        let d = r - center;
        d - l * (d / l).round()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_lattice_for_two_pi_cell() {
        let g = Grid::new(1, 8, 2.0 * PI).unwrap();
        let p = g.momenta();
        let expected = [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((g.max_momentum() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn two_dimensional_sizes() {
        let g = Grid::new(2, 16, 10.0).unwrap();
        assert_eq!(g.size(), 256);
        assert!((g.spacing() - 0.625).abs() < 1e-15);
        assert!((g.cell_volume() - 0.390625).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_point_counts() {
        assert!(matches!(Grid::new(1, 3, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(1, 2, 1.0), Err(Error::InvalidGrid(_))));
        assert!(Grid::new(1, 8, 0.0).is_err());
        assert!(Grid::new(4, 8, 1.0).is_err());
        assert!(Grid::new(3, 32, 1.0).is_err());
    }

    #[test]
    fn ravel_roundtrip() {
        let g = Grid::new(3, 4, 1.0).unwrap();
        for s in 0..g.size() {
            assert_eq!(g.ravel(g.unravel(s)), s);
        }
        assert_eq!(g.unravel(1), [1, 0, 0]);
        assert_eq!(g.unravel(4), [0, 1, 0]);
    }
}
