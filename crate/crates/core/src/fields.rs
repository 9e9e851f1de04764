//! Analytic stationary electromagnetic fields and their grid sampling.
//!
//! Every builtin is a degree-two scalar potential plus a uniform magnetic
//! field: `phi = phi0 + g.r + r.K.r/2`, `H` constant. Hence `E = -g - K r`,
//! `dE[i][j] = dE_j/dx_i = -K[i][j]`, and the vector potential is linear.
//!
//! On a periodic grid the polynomial potential cannot be periodic, so grid
//! sampling multiplies `phi` by a smooth window that reaches zero at the cell
//! boundary. The window is applied with exact derivatives (product rule), so
//! sampled `E` and `dE` remain the exact gradients of the sampled `phi`.
//! The vector potential is never windowed.

use std::sync::Arc;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::operator::{momentum_matrix, Grid};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    #[default]
    Free,
    #[serde(rename = "uniform_E")]
    UniformE,
    #[serde(rename = "uniform_B")]
    UniformB,
    HarmonicScalar,
    #[serde(rename = "crossed_EH")]
    CrossedEH,
    Polynomial,
}

impl FieldKind {
    pub const ALL: [FieldKind; 6] = [
        FieldKind::Free,
        FieldKind::UniformE,
        FieldKind::UniformB,
        FieldKind::HarmonicScalar,
        FieldKind::CrossedEH,
        FieldKind::Polynomial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Free => "free",
            FieldKind::UniformE => "uniform_E",
            FieldKind::UniformB => "uniform_B",
            FieldKind::HarmonicScalar => "harmonic_scalar",
            FieldKind::CrossedEH => "crossed_EH",
            FieldKind::Polynomial => "polynomial",
        }
    }
}

/// Gauge of the vector potential for the uniform magnetic field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// `A = H x r / 2`
    #[default]
    Symmetric,
    /// `A = (Hy z, Hz x, Hx y)`
    Landau,
}

/// Validated field specification.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldConfig {
    pub kind: FieldKind,
    pub phi0: f64,
    /// Gradient of `phi` at the origin (`-E` for uniform fields).
    pub grad: Vec3,
    /// Hessian of `phi` (symmetric).
    pub hess: Mat3,
    pub h: Vec3,
    pub gauge: Gauge,
    /// Taper width for grid sampling; `None` means `L/8`, zero disables it.
    pub window_width: Option<f64>,
    pub stationary: bool,
}

/// Potentials, fields and the field-gradient tensor at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub phi: f64,
    pub a: Vec3,
    pub e: Vec3,
    pub h: Vec3,
    /// `de[i][j] = dE_j / dx_i`
    pub de: Mat3,
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl FieldSample {
    pub fn e_cross_h(&self) -> Vec3 {
        cross(self.e, self.h)
    }
}

const ZERO3: Vec3 = [0.0; 3];
const ZERO33: Mat3 = [[0.0; 3]; 3];

impl FieldConfig {
    fn base(kind: FieldKind) -> Self {
        Self {
            kind,
            phi0: 0.0,
            grad: ZERO3,
            hess: ZERO33,
            h: ZERO3,
            gauge: Gauge::Symmetric,
            window_width: None,
            stationary: true,
        }
    }

    pub fn free() -> Self {
        Self::base(FieldKind::Free)
    }

    pub fn uniform_e(e: Vec3) -> Self {
        Self { grad: e.map(|x| -x), ..Self::base(FieldKind::UniformE) }
    }

    pub fn uniform_b(h: Vec3) -> Self {
        Self { h, ..Self::base(FieldKind::UniformB) }
    }

    /// `phi = k |r|^2 / 2`
    pub fn harmonic_scalar(k: f64) -> Self {
        let mut hess = ZERO33;
        for (i, row) in hess.iter_mut().enumerate() {
            row[i] = k;
        }
        Self { hess, ..Self::base(FieldKind::HarmonicScalar) }
    }

    pub fn crossed(e: Vec3, h: Vec3) -> Self {
        Self { grad: e.map(|x| -x), h, ..Self::base(FieldKind::CrossedEH) }
    }

    pub fn polynomial(phi0: f64, grad: Vec3, hess: Mat3, h: Vec3) -> Result<Self> {
        let f = Self { phi0, grad, hess, h, ..Self::base(FieldKind::Polynomial) };
        f.validate()?;
        Ok(f)
    }

    pub fn with_window(mut self, width: f64) -> Self {
        self.window_width = Some(width);
        self
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.phi0.is_finite()
            && self.grad.iter().chain(self.h.iter()).all(|x| x.is_finite())
            && self.hess.iter().flatten().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidField("non-finite parameter".into()));
        }
        for i in 0..3 {
            for j in 0..i {
                if self.hess[i][j] != self.hess[j][i] {
                    return Err(Error::InvalidField("hessian must be symmetric".into()));
                }
            }
        }
        if let Some(w) = self.window_width {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidField(format!("window_width {w} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Fails unless the field is stationary.
    pub fn require_stationary(&self, what: &'static str) -> Result<()> {
        if self.stationary {
            Ok(())
        } else {
            Err(Error::NonStationary(what))
        }
    }

    /// Uniform electric field at the origin.
    pub fn e0(&self) -> Vec3 {
        self.grad.map(|x| -x)
    }

    pub fn vector_potential(&self, r: Vec3) -> Vec3 {
        let h = self.h;
        match self.gauge {
            Gauge::Symmetric => cross(h, r).map(|x| 0.5 * x),
            Gauge::Landau => [h[1] * r[2], h[2] * r[0], h[0] * r[1]],
        }
    }

    /// Unwindowed analytic evaluation. Builtins are stationary, so `t` only
    /// documents the evaluation time.
    pub fn eval(&self, r: Vec3, _t: f64) -> FieldSample {
        let kr = mat_vec(&self.hess, r);
        let phi = self.phi0 + dot(self.grad, r) + 0.5 * dot(r, kr);
        let e = [0, 1, 2].map(|i| -self.grad[i] - kr[i]);
        let de = self.hess.map(|row| row.map(|x| -x));
        FieldSample { phi, a: self.vector_potential(r), e, h: self.h, de }
    }

    fn window_width_for(&self, grid: &Grid) -> f64 {
        self.window_width.unwrap_or(grid.length() / 8.0)
    }

    /// Evaluation with `phi` tapered towards the cell boundary of `grid`.
    pub fn eval_windowed(&self, grid: &Grid, r: Vec3) -> FieldSample {
        let raw = self.eval(r, 0.0);
        let width = self.window_width_for(grid);
        if width == 0.0 || self.is_phi_zero() {
            return raw;
        }
        let (w, dw, ddw) = window(grid, width, r);
        let phi = raw.phi;
        let g = raw.e.map(|x| -x); // grad phi
        let mut e = ZERO3;
        let mut de = ZERO33;
        for i in 0..3 {
            e[i] = -(w * g[i] + phi * dw[i]);
            for j in 0..3 {
                de[i][j] = -(w * self.hess[i][j] + dw[i] * g[j] + dw[j] * g[i] + phi * ddw[i][j]);
            }
        }
        FieldSample { phi: w * phi, a: raw.a, e, h: raw.h, de }
    }

    fn is_phi_zero(&self) -> bool {
        self.phi0 == 0.0 && self.grad == ZERO3 && self.hess == ZERO33
    }
}

fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [0, 1, 2].map(|i| dot(m[i], v))
}

fn bump(u: f64) -> (f64, f64, f64) {
    // f(u) = exp(-1/u) and its first two derivatives.
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let f = (-1.0 / u).exp();
    let u2 = u * u;
    (f, f / u2, f * (1.0 / (u2 * u2) - 2.0 / (u2 * u)))
}

/// Smooth step `s(u) = f(u) / (f(u) + f(1-u))` with `s'` and `s''`.
fn smooth_step(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (g, g1, g2) = bump(u);
    let (h, h1, h2) = bump(1.0 - u);
    let (h1, h2) = (-h1, h2);
    let d = g + h;
    let d1 = g1 + h1;
    let d2 = g2 + h2;
    let s = g / d;
    let num1 = g1 * d - g * d1;
    let s1 = num1 / (d * d);
    let s2 = (g2 * d - g * d2) / (d * d) - 2.0 * d1 * num1 / (d * d * d);
    (s, s1, s2)
}

/// Per-axis taper for coordinate `x` in `[-L/2, L/2)`: value and x-derivatives.
fn axis_window(length: f64, width: f64, x: f64) -> (f64, f64, f64) {
    let left = (x + 0.5 * length) / width;
    let right = (0.5 * length - x) / width;
    let (a, a1, a2) = smooth_step(left);
    let (b, b1, b2) = smooth_step(right);
    let inv = 1.0 / width;
    // d/dx left = +1/w, d/dx right = -1/w
    let (a1, a2) = (a1 * inv, a2 * inv * inv);
    let (b1, b2) = (-b1 * inv, b2 * inv * inv);
    (a * b, a1 * b + a * b1, a2 * b + 2.0 * a1 * b1 + a * b2)
}

/// Product window over the grid axes with gradient and Hessian.
fn window(grid: &Grid, width: f64, r: Vec3) -> (f64, Vec3, Mat3) {
    let mut s = [(1.0, 0.0, 0.0); 3];
    for (a, slot) in s.iter_mut().enumerate().take(grid.dim()) {
        *slot = axis_window(grid.length(), width, r[a]);
    }
    let w = s[0].0 * s[1].0 * s[2].0;
    let mut dw = ZERO3;
    let mut ddw = ZERO33;
    for i in 0..3 {
        let others = |skip: &[usize]| -> f64 {
            (0..3).filter(|k| !skip.contains(k)).map(|k| s[k].0).product()
        };
        dw[i] = s[i].1 * others(&[i]);
        for j in 0..3 {
            ddw[i][j] = if i == j {
                s[i].2 * others(&[i])
            } else {
                s[i].1 * s[j].1 * others(&[i, j])
            };
        }
    }
    (w, dw, ddw)
}

/// Field data sampled on a grid together with the kinetic momenta
/// `pi_a = p_a - e A_a` for a given charge.
pub struct GridField {
    pub grid: Grid,
    pub charge: f64,
    pub field: FieldConfig,
    pub samples: Vec<FieldSample>,
    /// `pi_a` for the three Cartesian axes; `None` when identically zero.
    pub pi: [Option<Arc<Mat<c64>>>; 3],
    /// `pi^2 = sum_a pi_a^2`
    pub pi2: Arc<Mat<c64>>,
}

impl GridField {
    pub fn new(grid: &Grid, field: &FieldConfig, charge: f64) -> Result<Self> {
        field.validate()?;
        let positions = grid.positions();
        let samples = exec::map(&positions, |r| field.eval_windowed(grid, *r));
        let n = grid.size();
        let pi: [Option<Arc<Mat<c64>>>; 3] = std::array::from_fn(|a| {
            let diag_zero = samples.iter().all(|s| charge * s.a[a] == 0.0);
            let p = if a < grid.dim() { Some(momentum_matrix(grid, a).expect("axis < dim")) } else { None };
            if p.is_none() && diag_zero {
                return None;
            }
            let mut m = p.unwrap_or_else(|| Mat::zeros(n, n));
            for (s, smp) in samples.iter().enumerate() {
                m[(s, s)] -= c64::new(charge * smp.a[a], 0.0);
            }
            Some(Arc::new(m))
        });
        let mut pi2 = Mat::<c64>::zeros(n, n);
        for m in pi.iter().flatten() {
            pi2 += m.as_ref() * m.as_ref();
        }
        Ok(Self { grid: *grid, charge, field: field.clone(), samples, pi, pi2: Arc::new(pi2) })
    }

    /// Site values of a scalar function of the sample, as a diagonal grid matrix.
    pub fn diagonal(&self, f: impl Fn(&FieldSample) -> f64) -> Arc<Mat<c64>> {
        let n = self.grid.size();
        let mut m = Mat::<c64>::zeros(n, n);
        for (s, smp) in self.samples.iter().enumerate() {
            m[(s, s)] = c64::new(f(smp), 0.0);
        }
        Arc::new(m)
    }

    /// `e phi` as a diagonal grid matrix.
    pub fn coulomb(&self) -> Arc<Mat<c64>> {
        let e = self.charge;
        self.diagonal(|s| e * s.phi)
    }

    pub fn has_scalar_potential(&self) -> bool {
        self.charge != 0.0 && self.samples.iter().any(|s| s.phi != 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn builtins() -> Vec<FieldConfig> {
        vec![
            FieldConfig::free(),
            FieldConfig::uniform_e([0.01, -0.02, 0.03]),
            FieldConfig::uniform_b([0.1, -0.2, 0.3]),
            FieldConfig::uniform_b([0.1, -0.2, 0.3]).with_gauge(Gauge::Landau),
            FieldConfig::harmonic_scalar(1.3),
            FieldConfig::crossed([0.01, 0.0, 0.0], [0.0, 0.0, 0.1]),
            FieldConfig::polynomial(0.2, [0.1, 0.0, -0.3], [[0.5, 0.1, 0.0], [0.1, -0.2, 0.3], [0.0, 0.3, 0.7]], [0.0, 0.4, 0.0])
                .unwrap(),
        ]
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    /// E = -grad phi, H = curl A, dE = grad E by central differences.
    fn check_fd(sample: impl Fn(Vec3) -> FieldSample, r: Vec3, check_h: bool) {
        let h = 1e-5;
        let s = sample(r);
        for i in 0..3 {
            let mut rp = r;
            let mut rm = r;
            rp[i] += h;
            rm[i] -= h;
            let (sp, sm) = (sample(rp), sample(rm));
            let e_fd = -(sp.phi - sm.phi) / (2.0 * h);
            assert!(rel_err(s.e[i], e_fd) < 1e-6, "E_{i}: {} vs {}", s.e[i], e_fd);
            for j in 0..3 {
                let de_fd = (sp.e[j] - sm.e[j]) / (2.0 * h);
                assert!(rel_err(s.de[i][j], de_fd) < 1e-6, "dE_{i}{j}");
            }
        }
        if check_h {
            let da = |i: usize, j: usize| {
                let mut rp = r;
                let mut rm = r;
                rp[i] += h;
                rm[i] -= h;
                (sample(rp).a[j] - sample(rm).a[j]) / (2.0 * h)
            };
            let curl = [da(1, 2) - da(2, 1), da(2, 0) - da(0, 2), da(0, 1) - da(1, 0)];
            for k in 0..3 {
                assert!(rel_err(s.h[k], curl[k]) < 1e-6);
            }
        }
    }

    #[test]
    fn fields_are_derivatives_of_potentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in builtins() {
            for _ in 0..100 {
                let r = [0, 1, 2].map(|_| rng.random_range(-3.0..3.0));
                check_fd(|x| f.eval(x, 0.0), r, true);
            }
        }
    }

    #[test]
    fn windowed_fields_are_derivatives_of_windowed_potential() {
        let grid = Grid::new(3, 4, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for f in builtins() {
            for _ in 0..100 {
                let r = [0, 1, 2].map(|_| rng.random_range(-4.99..4.99));
                check_fd(|x| f.eval_windowed(&grid, x), r, false);
            }
        }
    }

    #[test]
    fn window_is_identity_in_the_interior_and_zero_at_edges() {
        let grid = Grid::new(1, 8, 8.0).unwrap();
        let f = FieldConfig::harmonic_scalar(1.0);
        let r = [2.9, 0.0, 0.0];
        assert_eq!(f.eval_windowed(&grid, r), f.eval(r, 0.0));
        let edge = f.eval_windowed(&grid, [-4.0, 0.0, 0.0]);
        assert_eq!(edge.phi, 0.0);
        assert_eq!(edge.e, [0.0; 3]);
    }

    #[test]
    fn documented_examples() {
        let f = FieldConfig::uniform_e([0.01, 0.0, 0.0]);
        let s = f.eval([1.0, 2.0, 3.0], 0.0);
        assert_eq!(s.e, [0.01, 0.0, 0.0]);
        assert_eq!(s.h, [0.0; 3]);
        assert_eq!(s.de, ZERO33);

        let s = FieldConfig::uniform_b([0.0, 0.0, 0.1]).eval([2.0, 4.0, 0.0], 0.0);
        assert_eq!(s.h, [0.0, 0.0, 0.1]);
        assert_eq!(s.e, [0.0; 3]);
        assert!((s.a[0] + 0.1 * 4.0 / 2.0).abs() < 1e-15);
        assert!((s.a[1] - 0.1 * 2.0 / 2.0).abs() < 1e-15);

        let s = FieldConfig::harmonic_scalar(2.0).eval([0.5, 0.0, 0.0], 0.0);
        assert_eq!(s.e, [-1.0, 0.0, 0.0]);
        assert_eq!(s.de, [[-2.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, -2.0]]);
        assert_eq!(s.phi, 0.25);

        let s = FieldConfig::crossed([0.01, 0.0, 0.0], [0.0, 0.0, 0.1]).eval([0.0; 3], 0.0);
        let v = s.e_cross_h();
        assert!((v[1] + 0.001).abs() < 1e-18);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn kinetic_momentum_in_absent_axis_is_diagonal() {
        let grid = Grid::new(1, 8, 4.0).unwrap();
        let gf = GridField::new(&grid, &FieldConfig::uniform_b([0.0, 0.0, 0.5]), 1.0).unwrap();
        let py = gf.pi[1].as_ref().unwrap();
        for s in 0..8 {
            let x = grid.coordinate(s);
            assert!((py[(s, s)].re + 0.25 * x).abs() < 1e-15);
        }
        assert!(gf.pi[2].is_none());
    }
}
