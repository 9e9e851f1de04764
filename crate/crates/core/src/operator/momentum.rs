//! Spectral (plane-wave) momentum operators `p = -i d/dx`.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::{c64, Mat};

use super::grid::Grid;
use super::linop::LinearOperator;
use crate::error::{Error, Result};
use crate::exec;

/// One-dimensional spectral derivative matrix times `-i`:
/// `D[j, l] = (1/n) sum_k p_k exp(i p_k (x_j - x_l))` over the centered lattice.
pub fn momentum_matrix_1d(grid: &Grid) -> Mat<c64> {
    let n = grid.points();
    let momenta = grid.momenta();
    let dx = grid.spacing();
    // Entries depend only on j - l (mod n).
    let kernel: Vec<c64> = exec::map_range(n, |d| {
        let mut acc = c64::new(0.0, 0.0);
        for p in &momenta {
            acc += c64::from_polar(*p, p * d as f64 * dx);
        }
        acc / n as f64
    });
    // Stored exactly Hermitian.
    let mut m = Mat::from_fn(n, n, |j, l| kernel[(j + n - l) % n]);
    for j in 0..n {
        m[(j, j)] = c64::new(m[(j, j)].re, 0.0);
        for l in 0..j {
            m[(l, j)] = m[(j, l)].conj();
        }
    }
    m
}

/// Grid-level matrix of `p_axis` on the full lattice.
pub fn momentum_matrix(grid: &Grid, axis: usize) -> Result<Mat<c64>> {
    if axis >= grid.dim() {
        return Err(Error::AxisOutOfRange { axis, dim: grid.dim() });
    }
    let d1 = momentum_matrix_1d(grid);
    let size = grid.size();
    let idx: Vec<[usize; 3]> = (0..size).map(|s| grid.unravel(s)).collect();
    Ok(Mat::from_fn(size, size, |s, t| {
        let (a, b) = (idx[s], idx[t]);
        if (0..grid.dim()).all(|k| k == axis || a[k] == b[k]) {
            d1[(a[axis], b[axis])]
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

/// `1 (x) p_axis` on the two-component space.
pub fn momentum_operator(grid: &Grid, axis: usize) -> Result<LinearOperator> {
    let m = momentum_matrix(grid, axis)?;
    Ok(LinearOperator::scalar(*grid, &Arc::new(m)))
}

/// Plane wave `exp(i p x_axis)` for the lattice wave number `k`.
pub fn plane_wave(grid: &Grid, axis: usize, k: i64) -> Vec<c64> {
    let p = 2.0 * PI * k as f64 / grid.length();
    (0..grid.size())
        .map(|s| c64::from_polar(1.0, p * grid.position(s)[axis]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::linop::commutator;

    #[test]
    fn plane_waves_are_eigenfunctions() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        let p = momentum_operator(&g, 0).unwrap();
        for k in g.wave_numbers() {
            let v = plane_wave(&g, 0, k);
            let out = p.apply_upper(&v);
            let pk = 2.0 * PI * k as f64 / g.length();
            let err = out.iter().zip(&v).map(|(o, x)| (o - x * pk).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "k={k} err={err}");
        }
        let ones = vec![c64::new(1.0, 0.0); 16];
        assert!(p.apply_upper(&ones).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn axes_commute_in_2d() {
        let g = Grid::new(2, 6, 4.0).unwrap();
        let px = momentum_operator(&g, 0).unwrap();
        let py = momentum_operator(&g, 1).unwrap();
        assert!(commutator(&px, &py).norm() < 1e-12);
        assert!(momentum_operator(&g, 2).is_err());
        let v = plane_wave(&g, 1, 2);
        let out = py.apply_upper(&v);
        let p = 2.0 * PI * 2.0 / 4.0;
        assert!(out.iter().zip(&v).all(|(o, x)| (o - x * p).norm() < 1e-12));
        assert!(px.apply_upper(&v).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn matrix_is_hermitian() {
        let g = Grid::new(1, 10, 2.0).unwrap();
        let m = momentum_matrix_1d(&g);
        assert!((&m - m.adjoint()).norm_l2() == 0.0);
    }
}
