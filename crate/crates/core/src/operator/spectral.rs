//! Matrix functions through full eigendecomposition.
//!
//! Block-diagonal operators are decomposed block by block (once per shared
//! grid matrix); anything else falls back to the stacked `2n x 2n` matrix.
//! Self-adjoint blocks use the Hermitian solver, other blocks are accepted only
//! when their spectrum is real, and are reconstructed as `V f(L) V^-1`.

use std::sync::Arc;

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, Side};

use super::grid::Grid;
use super::linop::{Block, LinearOperator};
use crate::error::{Error, Result};

/// Lower bound imposed on the spectrum of the argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Floor {
    /// No restriction (the function must be defined on the whole spectrum).
    None,
    /// Every eigenvalue must exceed `factor * max |lambda|`.
    Relative(f64),
    /// Every eigenvalue must exceed the given value.
    Absolute(f64),
}

/// Default floor guarding square roots and inverse powers.
pub const DEFAULT_FLOOR: Floor = Floor::Relative(1e-10);

#[derive(Clone, Copy, Debug)]
pub struct SpectralOptions {
    pub floor: Floor,
    /// Eigenvalues with `|lambda| <= null_filter * max |lambda|` are mapped to
    /// zero instead of tripping the floor (zero-momentum exclusion).
    pub null_filter: Option<f64>,
    /// Relative anti-Hermitian part tolerated before switching to the general path.
    pub hermitian_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { floor: DEFAULT_FLOOR, null_filter: None, hermitian_tol: 1e-10 }
    }
}

impl SpectralOptions {
    pub fn unrestricted() -> Self {
        Self { floor: Floor::None, ..Self::default() }
    }

    pub fn with_null_filter(mut self, rel: f64) -> Self {
        self.null_filter = Some(rel);
        self
    }
}

struct Hermitian {
    values: Vec<f64>,
    vectors: Mat<c64>,
}

struct General {
    values: Vec<f64>,
    vectors: Mat<c64>,
    inverse: Mat<c64>,
}

#[derive(Clone)]
enum Part {
    Identity(f64),
    Hermitian { coef: f64, dec: Arc<Hermitian> },
    General(Arc<General>),
}

impl Part {
    fn eigenvalues(&self, n: usize) -> Vec<f64> {
        match self {
            Part::Identity(c) => vec![*c; n],
            Part::Hermitian { coef, dec } => dec.values.iter().map(|v| coef * v).collect(),
            Part::General(dec) => dec.values.clone(),
        }
    }
}

enum Kind {
    BlockDiagonal([Part; 2]),
    Full(Part),
}

/// Eigendecomposition of an operator, reusable for several functions.
pub struct Spectral {
    grid: Grid,
    kind: Kind,
    null_cut: f64,
}

/// Relative anti-Hermitian residual `|M - M^H| / |M|`.
pub fn hermitian_residual(m: &Mat<c64>) -> f64 {
    let n = m.nrows();
    let mut num = 0.0;
    for j in 0..n {
        for i in 0..n {
            num += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    let den = m.norm_l2();
    if den == 0.0 {
        0.0
    } else {
        num.sqrt() / den
    }
}

/// Eigenvalues (ascending) and eigenvectors of a self-adjoint grid matrix.
pub fn hermitian_eigen(m: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
    let values = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((values, evd.U().to_owned()))
}

fn decompose_general(m: &Mat<c64>, tol: f64) -> Result<General> {
    let evd = m.eigen().map_err(|_| Error::Eigen)?;
    let s = evd.S().column_vector();
    let scale = s.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let worst_imag = s.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_imag > tol.max(1e-9) * scale {
        return Err(Error::NotHermitian { residual: worst_imag / scale });
    }
    let vectors = evd.U().to_owned();
    let inverse = vectors.partial_piv_lu().inverse();
    Ok(General { values: s.iter().map(|z| z.re).collect(), vectors, inverse })
}

fn decompose_block(
    b: &Block,
    tol: f64,
    cache: &mut Vec<(usize, Arc<Hermitian>)>,
) -> Result<Part> {
    match b {
        Block::Zero => Ok(Part::Identity(0.0)),
        Block::Identity(c) => {
            if c.im.abs() > tol * c.norm() {
                return Err(Error::NotHermitian { residual: c.im.abs() / c.norm() });
            }
            Ok(Part::Identity(c.re))
        }
        Block::Dense { coef, mat } => {
            let real_coef = coef.im.abs() <= tol * coef.norm();
            if real_coef && hermitian_residual(mat) <= tol {
                let key = Arc::as_ptr(mat) as usize;
                if let Some((_, dec)) = cache.iter().find(|(k, _)| *k == key) {
                    return Ok(Part::Hermitian { coef: coef.re, dec: Arc::clone(dec) });
                }
                let (values, vectors) = hermitian_eigen(mat)?;
                let dec = Arc::new(Hermitian { values, vectors });
                cache.push((key, Arc::clone(&dec)));
                return Ok(Part::Hermitian { coef: coef.re, dec });
            }
            let n = mat.nrows();
            let full = b.to_mat(n);
            Ok(Part::General(Arc::new(decompose_general(&full, tol)?)))
        }
    }
}

impl Spectral {
    pub fn new(a: &LinearOperator, opts: SpectralOptions) -> Result<Self> {
        let grid = *a.grid();
        let n = grid.size();
        let kind = if a.is_block_diagonal() {
            let mut cache = Vec::new();
            let upper = decompose_block(a.block(0, 0), opts.hermitian_tol, &mut cache)?;
            let lower = decompose_block(a.block(1, 1), opts.hermitian_tol, &mut cache)?;
            Kind::BlockDiagonal([upper, lower])
        } else {
            let dense = a.to_dense();
            if hermitian_residual(&dense) <= opts.hermitian_tol {
                let (values, vectors) = hermitian_eigen(&dense)?;
                Kind::Full(Part::Hermitian { coef: 1.0, dec: Arc::new(Hermitian { values, vectors }) })
            } else {
                Kind::Full(Part::General(Arc::new(decompose_general(&dense, opts.hermitian_tol)?)))
            }
        };
        let mut s = Spectral { grid, kind, null_cut: -1.0 };
        let values = s.eigenvalues_unsorted(n);
        let max_abs = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if let Some(rel) = opts.null_filter {
            s.null_cut = rel * max_abs;
        }
        let floor = match opts.floor {
            Floor::None => None,
            Floor::Relative(r) => Some(r * max_abs),
            Floor::Absolute(f) => Some(f),
        };
        if let Some(floor) = floor {
            let min = values
                .iter()
                .copied()
                .filter(|v| v.abs() > s.null_cut)
                .fold(f64::INFINITY, f64::min);
            if min <= floor {
                return Err(Error::Singular { min, floor });
            }
        }
        Ok(s)
    }

    fn eigenvalues_unsorted(&self, n: usize) -> Vec<f64> {
        match &self.kind {
            Kind::BlockDiagonal([u, l]) => {
                let mut v = u.eigenvalues(n);
                v.extend(l.eigenvalues(n));
                v
            }
            Kind::Full(p) => p.eigenvalues(2 * n),
        }
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v = self.eigenvalues_unsorted(self.grid.size());
        v.sort_by(f64::total_cmp);
        v
    }

    fn map_value(&self, f: &dyn Fn(f64) -> c64, x: f64) -> c64 {
        if x.abs() <= self.null_cut {
            c64::new(0.0, 0.0)
        } else {
            f(x)
        }
    }

    fn map_part(&self, part: &Part, f: &dyn Fn(f64) -> c64) -> Mat<c64> {
        let (vectors, values, right): (&Mat<c64>, Vec<c64>, Option<&Mat<c64>>) = match part {
            Part::Identity(_) => unreachable!("identity handled by caller"),
            Part::Hermitian { coef, dec } => (
                &dec.vectors,
                dec.values.iter().map(|v| self.map_value(f, coef * v)).collect(),
                None,
            ),
            Part::General(dec) => (
                &dec.vectors,
                dec.values.iter().map(|v| self.map_value(f, *v)).collect(),
                Some(&dec.inverse),
            ),
        };
        let m = vectors.nrows();
        let scaled = Mat::from_fn(m, m, |i, j| vectors[(i, j)] * values[j]);
        match right {
            None => scaled * vectors.adjoint(),
            Some(inv) => scaled * inv,
        }
    }

    fn part_block(&self, part: &Part, f: &dyn Fn(f64) -> c64) -> Block {
        match part {
            Part::Identity(c) => {
                let v = self.map_value(f, *c);
                if v == c64::new(0.0, 0.0) {
                    Block::Zero
                } else {
                    Block::Identity(v)
                }
            }
            _ => Block::dense(self.map_part(part, f)),
        }
    }

    /// `f(A)` evaluated on the spectrum.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> LinearOperator {
        self.apply_complex(move |x| c64::new(f(x), 0.0))
    }

    /// `f(A)` for a complex-valued `f` (e.g. `exp(-i A t)`).
    pub fn apply_complex(&self, f: impl Fn(f64) -> c64) -> LinearOperator {
        let f: &dyn Fn(f64) -> c64 = &f;
        match &self.kind {
            Kind::BlockDiagonal([u, l]) => {
                let upper = self.part_block(u, f);
                let same = match (u, l) {
                    (Part::Hermitian { coef: a, dec: d1 }, Part::Hermitian { coef: b, dec: d2 }) => {
                        a == b && Arc::ptr_eq(d1, d2)
                    }
                    _ => false,
                };
                let lower = if same { upper.clone() } else { self.part_block(l, f) };
                LinearOperator::from_blocks(self.grid, [upper, Block::Zero, Block::Zero, lower])
                    .expect("blocks sized by construction")
            }
            Kind::Full(p) => {
                let m = self.map_part(p, f);
                LinearOperator::from_dense(self.grid, &m).expect("blocks sized by construction")
            }
        }
    }
}

/// `f(A)` via full eigendecomposition.
pub fn matrix_function(
    a: &LinearOperator,
    f: impl Fn(f64) -> f64,
    opts: SpectralOptions,
) -> Result<LinearOperator> {
    Ok(Spectral::new(a, opts)?.apply(f))
}

/// Principal square root; the spectrum must clear the default floor.
pub fn sqrt_op(a: &LinearOperator) -> Result<LinearOperator> {
    matrix_function(a, f64::sqrt, SpectralOptions::default())
}

/// Inverse principal square root; the spectrum must clear the default floor.
pub fn inv_sqrt_op(a: &LinearOperator) -> Result<LinearOperator> {
    matrix_function(a, |x| 1.0 / x.sqrt(), SpectralOptions::default())
}

/// Complex eigenvalues of an arbitrary operator (blockwise when block diagonal).
pub fn eigenvalues(a: &LinearOperator) -> Result<Vec<c64>> {
    let n = a.grid().size();
    let block_eigs = |b: &Block| -> Result<Vec<c64>> {
        match b {
            Block::Zero => Ok(vec![c64::new(0.0, 0.0); n]),
            Block::Identity(c) => Ok(vec![*c; n]),
            Block::Dense { coef, mat } => {
                if hermitian_residual(mat) <= 1e-12 {
                    let v = mat.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)?;
                    Ok(v.into_iter().map(|x| coef * x).collect())
                } else {
                    let v = mat.eigenvalues().map_err(|_| Error::Eigen)?;
                    Ok(v.into_iter().map(|x| coef * x).collect())
                }
            }
        }
    };
    if a.is_block_diagonal() {
        let mut v = block_eigs(a.block(0, 0))?;
        v.extend(block_eigs(a.block(1, 1))?);
        Ok(v)
    } else {
        a.to_dense().eigenvalues().map_err(|_| Error::Eigen)
    }
}

/// Real parts of [`eigenvalues`], ascending, after checking the imaginary parts
/// are negligible relative to the spectral radius.
pub fn real_spectrum(a: &LinearOperator, tol: f64) -> Result<Vec<f64>> {
    let ev = eigenvalues(a)?;
    let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let worst = ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst > tol * scale {
        return Err(Error::NotHermitian { residual: worst / scale });
    }
    let mut v: Vec<f64> = ev.into_iter().map(|z| z.re).collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}
