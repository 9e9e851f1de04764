//! Gaussian wavepackets and expectation values on the grid.

use faer::{c64, Mat};

use crate::fields::Vec3;
use crate::operator::{l2_inner, Grid};

/// `exp(-|r - center|^2 / (4 width^2) + i momentum.(r - center))` over the grid
/// axes (minimum-image displacement), normalised to unit L2 norm.
pub fn gaussian(grid: &Grid, center: Vec3, momentum: Vec3, width: f64) -> Vec<c64> {
    let mut v: Vec<c64> = (0..grid.size())
        .map(|s| {
            let r = grid.position(s);
            let mut re = 0.0;
            let mut ph = 0.0;
            for a in 0..grid.dim() {
                let d = grid.wrap_displacement(r[a], center[a]);
                re -= d * d / (4.0 * width * width);
                ph += momentum[a] * d;
            }
            c64::from_polar(re.exp(), ph)
        })
        .collect();
    normalize(grid, &mut v);
    v
}

pub fn norm(grid: &Grid, v: &[c64]) -> f64 {
    l2_inner(grid, v, v).re.sqrt()
}

pub fn normalize(grid: &Grid, v: &mut [c64]) {
    let n = norm(grid, v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
}

pub fn mat_vec(m: &Mat<c64>, v: &[c64]) -> Vec<c64> {
    let out = m.as_ref() * faer::ColRef::from_slice(v);
    (0..out.nrows()).map(|i| out[i]).collect()
}

/// `<v|M|v> / <v|v>`
pub fn expectation(grid: &Grid, m: &Mat<c64>, v: &[c64]) -> c64 {
    let mv = mat_vec(m, v);
    l2_inner(grid, v, &mv) / l2_inner(grid, v, v)
}

/// Position centroid using the minimum-image displacement from `reference`.
pub fn centroid(grid: &Grid, v: &[c64], reference: Vec3) -> Vec3 {
    let mut acc = [0.0; 3];
    let mut w = 0.0;
    for (s, z) in v.iter().enumerate() {
        let p = z.norm_sqr();
        let r = grid.position(s);
        for a in 0..grid.dim() {
            acc[a] += p * (reference[a] + grid.wrap_displacement(r[a], reference[a]));
        }
        w += p;
    }
    if w > 0.0 {
        for x in acc.iter_mut() {
            *x /= w;
        }
    }
    acc
}

/// `count` Gaussian packets near the cell centre. The width balances the
/// packet tail at the cell boundary against its momentum tail at the Nyquist
/// wave number, so derived quantities such as `x^k psi` stay band-limited.
pub fn interior_packets(grid: &Grid, count: usize, momentum: Vec3) -> Vec<Vec<c64>> {
    let l = grid.length();
    let spread = l / 32.0;
    let offset = 0.5 * (count.max(1) as f64 - 1.0) * spread;
    let k0 = momentum.iter().take(grid.dim()).fold(0.0f64, |a, k| a.max(k.abs()));
    let reach = 0.5 * l - offset;
    let band = (grid.max_momentum() - k0).max(grid.max_momentum() * 0.25);
    let width = (reach * reach / (4.0 * band * band)).powf(0.25);
    (0..count)
        .map(|i| {
            let shift = (i as f64 - 0.5 * (count as f64 - 1.0)) * spread;
            let mut c = [0.0; 3];
            for (a, x) in c.iter_mut().enumerate().take(grid.dim()) {
                *x = shift * if a == 0 { 1.0 } else { -0.5 };
            }
            gaussian(grid, c, momentum, width)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_normalised_and_centred() {
        let g = Grid::new(2, 24, 24.0).unwrap();
        let v = gaussian(&g, [1.0, -0.5, 0.0], [0.3, 0.0, 0.0], 1.2);
        assert!((norm(&g, &v) - 1.0).abs() < 1e-14);
        let c = centroid(&g, &v, [1.0, -0.5, 0.0]);
        assert!((c[0] - 1.0).abs() < 1e-8 && (c[1] + 0.5).abs() < 1e-8);
    }
}
