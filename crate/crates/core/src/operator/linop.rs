//! Dense operators on `grid (x) C^2`, stored as a 2x2 array of grid blocks.
//!
//! The stacked (component-major) matrix is
//!
//! ```text
//! [ uu  ul ]
//! [ lu  ll ]
//! ```
//!
//! Each block is zero, a multiple of the identity, or a coefficient times a
//! shared dense grid matrix. Pauli structure (`rho_i (x) X`) therefore costs a
//! single grid matrix, and products memoise repeated grid-level multiplies.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use faer::{c64, Mat};

use super::grid::Grid;
use super::state::TwoComponentState;
use crate::error::{Error, Result};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };
const I: c64 = c64 { re: 0.0, im: 1.0 };

/// One grid-sized block of a [`LinearOperator`].
#[derive(Clone, Debug)]
pub enum Block {
    Zero,
    /// `coef * 1`
    Identity(c64),
    /// `coef * mat`
    Dense { coef: c64, mat: Arc<Mat<c64>> },
}

impl Block {
    pub fn dense(mat: Mat<c64>) -> Self {
        Block::Dense { coef: ONE, mat: Arc::new(mat) }
    }

    pub fn shared(mat: &Arc<Mat<c64>>) -> Self {
        Block::Dense { coef: ONE, mat: Arc::clone(mat) }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Block::Zero => true,
            Block::Identity(c) => *c == ZERO,
            Block::Dense { coef, .. } => *coef == ZERO,
        }
    }

    pub fn scaled(&self, c: c64) -> Block {
        if c == ZERO {
            return Block::Zero;
        }
        match self {
            Block::Zero => Block::Zero,
            Block::Identity(a) => Block::Identity(a * c),
            Block::Dense { coef, mat } => Block::Dense { coef: coef * c, mat: Arc::clone(mat) },
        }
    }

    pub fn to_mat(&self, n: usize) -> Mat<c64> {
        match self {
            Block::Zero => Mat::zeros(n, n),
            Block::Identity(c) => Mat::from_fn(n, n, |i, j| if i == j { *c } else { ZERO }),
            Block::Dense { coef, mat } => {
                let mut m = mat.as_ref().to_owned();
                if *coef != ONE {
                    scale_in_place(&mut m, *coef);
                }
                m
            }
        }
    }

    pub fn frobenius(&self, n: usize) -> f64 {
        match self {
            Block::Zero => 0.0,
            Block::Identity(c) => c.norm() * (n as f64).sqrt(),
            Block::Dense { coef, mat } => coef.norm() * mat.norm_l2(),
        }
    }

    /// Hermitian adjoint; reuses the shared matrix when it is exactly self-adjoint.
    pub fn adjoint(&self) -> Block {
        match self {
            Block::Zero => Block::Zero,
            Block::Identity(c) => Block::Identity(c.conj()),
            Block::Dense { coef, mat } => {
                if is_exactly_hermitian(mat) {
                    Block::Dense { coef: coef.conj(), mat: Arc::clone(mat) }
                } else {
                    Block::Dense {
                        coef: coef.conj(),
                        mat: Arc::new(mat.adjoint().to_owned()),
                    }
                }
            }
        }
    }

    /// `out += self * v`
    fn apply_add(&self, v: &[c64], out: &mut [c64]) {
        match self {
            Block::Zero => {}
            Block::Identity(c) => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += c * x;
                }
            }
            Block::Dense { coef, mat } => {
                let col = faer::ColRef::from_slice(v);
                let y = mat.as_ref() * col;
                for (i, o) in out.iter_mut().enumerate() {
                    *o += coef * y[i];
                }
            }
        }
    }
}

fn is_exactly_hermitian(m: &Mat<c64>) -> bool {
    let n = m.nrows();
    (0..n).all(|j| (j..n).all(|i| m[(i, j)] == m[(j, i)].conj()))
}

fn scale_in_place(m: &mut Mat<c64>, c: c64) {
    for j in 0..m.ncols() {
        for z in m.col_as_slice_mut(j) {
            *z *= c;
        }
    }
}

/// Linear combination `id * 1 + sum coef_k * mat_k` awaiting materialisation.
#[derive(Default)]
struct Combo {
    id: c64,
    terms: Vec<(c64, Arc<Mat<c64>>)>,
}

impl Combo {
    fn push(&mut self, b: Block, c: c64) {
        match b {
            Block::Zero => {}
            Block::Identity(a) => self.id += a * c,
            Block::Dense { coef, mat } => self.terms.push((coef * c, mat)),
        }
    }
}

type SumKey = (u64, u64, Vec<(usize, u64, u64)>);

/// Per-call cache of grid-level products and materialised sums.
#[derive(Default)]
struct Memo {
    products: HashMap<(usize, usize), Arc<Mat<c64>>>,
    sums: HashMap<SumKey, Arc<Mat<c64>>>,
}

impl Memo {
    fn product(&mut self, a: &Arc<Mat<c64>>, b: &Arc<Mat<c64>>) -> Arc<Mat<c64>> {
        let key = (Arc::as_ptr(a) as usize, Arc::as_ptr(b) as usize);
        Arc::clone(
            self.products
                .entry(key)
                .or_insert_with(|| Arc::new(a.as_ref() * b.as_ref())),
        )
    }

    fn block_product(&mut self, a: &Block, b: &Block) -> Block {
        match (a, b) {
            (Block::Zero, _) | (_, Block::Zero) => Block::Zero,
            (Block::Identity(x), other) | (other, Block::Identity(x)) => other.scaled(*x),
            (Block::Dense { coef: ca, mat: ma }, Block::Dense { coef: cb, mat: mb }) => Block::Dense {
                coef: ca * cb,
                mat: self.product(ma, mb),
            },
        }
    }

    fn materialise(&mut self, mut combo: Combo, n: usize) -> Block {
        combo.terms.sort_by_key(|(_, m)| Arc::as_ptr(m) as usize);
        let mut merged: Vec<(c64, Arc<Mat<c64>>)> = Vec::with_capacity(combo.terms.len());
        for (c, m) in combo.terms {
            match merged.last_mut() {
                Some((lc, lm)) if Arc::ptr_eq(lm, &m) => *lc += c,
                _ => merged.push((c, m)),
            }
        }
        merged.retain(|(c, _)| *c != ZERO);
        match (merged.len(), combo.id == ZERO) {
            (0, true) => return Block::Zero,
            (0, false) => return Block::Identity(combo.id),
            (1, true) => {
                let (coef, mat) = merged.pop().unwrap();
                return Block::Dense { coef, mat };
            }
            _ => {}
        }
        // Normalise by the leading coefficient so that blocks differing only by
        // an overall factor share storage.
        let lead = merged[0].0;
        let id = combo.id / lead;
        let key: SumKey = (
            id.re.to_bits(),
            id.im.to_bits(),
            merged
                .iter()
                .map(|(c, m)| {
                    let r = c / lead;
                    (Arc::as_ptr(m) as usize, r.re.to_bits(), r.im.to_bits())
                })
                .collect(),
        );
        if let Some(m) = self.sums.get(&key) {
            return Block::Dense { coef: lead, mat: Arc::clone(m) };
        }
        let mut out = Mat::<c64>::zeros(n, n);
        for (c, m) in &merged {
            let r = c / lead;
            for j in 0..n {
                let src = m.col_as_slice(j);
                let dst = out.col_as_slice_mut(j);
                if r == ONE {
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                } else {
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += r * s;
                    }
                }
            }
        }
        if id != ZERO {
            for i in 0..n {
                out[(i, i)] += id;
            }
        }
        let arc = Arc::new(out);
        self.sums.insert(key, Arc::clone(&arc));
        Block::Dense { coef: lead, mat: arc }
    }
}

/// The Pauli matrices acting on the two components, plus the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliBlock {
    Identity,
    Rho1,
    Rho2,
    Rho3,
}

impl PauliBlock {
    pub fn matrix(self) -> [[c64; 2]; 2] {
        match self {
            PauliBlock::Identity => [[ONE, ZERO], [ZERO, ONE]],
            PauliBlock::Rho1 => [[ZERO, ONE], [ONE, ZERO]],
            PauliBlock::Rho2 => [[ZERO, -I], [I, ZERO]],
            PauliBlock::Rho3 => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

/// Dense complex operator on the two-component grid space.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    grid: Grid,
    blocks: [Block; 4],
}

impl LinearOperator {
    /// Blocks in the order `[uu, ul, lu, ll]`.
    pub fn from_blocks(grid: Grid, blocks: [Block; 4]) -> Result<Self> {
        let n = grid.size();
        for b in &blocks {
            if let Block::Dense { mat, .. } = b {
                if mat.nrows() != n || mat.ncols() != n {
                    return Err(Error::GridMismatch);
                }
            }
        }
        Ok(Self { grid, blocks })
    }

    pub fn zero(grid: Grid) -> Self {
        Self { grid, blocks: [Block::Zero, Block::Zero, Block::Zero, Block::Zero] }
    }

    pub fn identity(grid: Grid) -> Self {
        Self::pauli(grid, PauliBlock::Identity)
    }

    pub fn pauli(grid: Grid, p: PauliBlock) -> Self {
        let m = p.matrix();
        let b = |z: c64| if z == ZERO { Block::Zero } else { Block::Identity(z) };
        Self { grid, blocks: [b(m[0][0]), b(m[0][1]), b(m[1][0]), b(m[1][1])] }
    }

    /// `p (x) mat` for a grid matrix.
    pub fn kron(grid: Grid, p: PauliBlock, mat: &Arc<Mat<c64>>) -> Self {
        let m = p.matrix();
        let b = |z: c64| {
            if z == ZERO {
                Block::Zero
            } else {
                Block::Dense { coef: z, mat: Arc::clone(mat) }
            }
        };
        Self { grid, blocks: [b(m[0][0]), b(m[0][1]), b(m[1][0]), b(m[1][1])] }
    }

    /// `1 (x) mat`
    pub fn scalar(grid: Grid, mat: &Arc<Mat<c64>>) -> Self {
        Self::kron(grid, PauliBlock::Identity, mat)
    }

    /// `1 (x) diag(values)`
    pub fn diagonal(grid: Grid, values: &[c64]) -> Self {
        let n = grid.size();
        let m = Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO });
        Self::scalar(grid, &Arc::new(m))
    }

    /// Splits a stacked `2n x 2n` matrix into blocks.
    pub fn from_dense(grid: Grid, m: &Mat<c64>) -> Result<Self> {
        let n = grid.size();
        if m.nrows() != 2 * n || m.ncols() != 2 * n {
            return Err(Error::GridMismatch);
        }
        let sub = |r: usize, c: usize| Block::dense(m.as_ref().submatrix(r * n, c * n, n, n).to_owned());
        Ok(Self { grid, blocks: [sub(0, 0), sub(0, 1), sub(1, 0), sub(1, 1)] })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn blocks(&self) -> &[Block; 4] {
        &self.blocks
    }

    /// Block at component row `r`, column `c` (0 = upper, 1 = lower).
    pub fn block(&self, r: usize, c: usize) -> &Block {
        &self.blocks[2 * r + c]
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let n = self.grid.size();
        let mut out = Mat::<c64>::zeros(2 * n, 2 * n);
        for r in 0..2 {
            for c in 0..2 {
                let b = self.block(r, c);
                if b.is_zero() {
                    continue;
                }
                out.as_mut().submatrix_mut(r * n, c * n, n, n).copy_from(b.to_mat(n).as_ref());
            }
        }
        out
    }

    pub fn scale(&self, c: c64) -> Self {
        Self {
            grid: self.grid,
            blocks: self.blocks.clone().map(|b| b.scaled(c)),
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(c64::new(c, 0.0))
    }

    fn check_grid(&self, other: &Self) {
        assert_eq!(self.grid, other.grid, "operators live on different grids");
    }

    /// `self * alpha + other * beta`
    pub fn combine(&self, alpha: c64, other: &Self, beta: c64) -> Self {
        self.check_grid(other);
        let n = self.grid.size();
        let mut memo = Memo::default();
        let blocks = std::array::from_fn(|k| {
            let mut c = Combo::default();
            c.push(self.blocks[k].clone(), alpha);
            c.push(other.blocks[k].clone(), beta);
            memo.materialise(c, n)
        });
        Self { grid: self.grid, blocks }
    }

    /// Sum of several scaled operators in one pass.
    pub fn linear_combination(grid: Grid, terms: &[(c64, &LinearOperator)]) -> Self {
        let n = grid.size();
        let mut memo = Memo::default();
        let blocks = std::array::from_fn(|k| {
            let mut c = Combo::default();
            for (coef, op) in terms {
                op.check_grid(&LinearOperator::zero(grid));
                c.push(op.blocks[k].clone(), *coef);
            }
            memo.materialise(c, n)
        });
        Self { grid, blocks }
    }

    /// Adds `c * 1` to the operator.
    pub fn add_identity(&self, c: c64) -> Self {
        self.combine(ONE, &Self::identity(self.grid), c)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        self.check_grid(other);
        let n = self.grid.size();
        let mut memo = Memo::default();
        let mut out: [Block; 4] = [Block::Zero, Block::Zero, Block::Zero, Block::Zero];
        for r in 0..2 {
            for c in 0..2 {
                let mut combo = Combo::default();
                for k in 0..2 {
                    let p = memo.block_product(self.block(r, k), other.block(k, c));
                    combo.push(p, ONE);
                }
                out[2 * r + c] = memo.materialise(combo, n);
            }
        }
        Self { grid: self.grid, blocks: out }
    }

    pub fn adjoint(&self) -> Self {
        let [uu, ul, lu, ll] = &self.blocks;
        Self {
            grid: self.grid,
            blocks: [uu.adjoint(), lu.adjoint(), ul.adjoint(), ll.adjoint()],
        }
    }

    /// `rho_3 A^dagger rho_3`
    pub fn pseudo_adjoint(&self) -> Self {
        let a = self.adjoint();
        let [uu, ul, lu, ll] = a.blocks;
        Self {
            grid: self.grid,
            blocks: [uu, ul.scaled(-ONE), lu.scaled(-ONE), ll],
        }
    }

    /// Part commuting with `rho_3` (block diagonal).
    pub fn even_part(&self) -> Self {
        let [uu, _, _, ll] = &self.blocks;
        Self { grid: self.grid, blocks: [uu.clone(), Block::Zero, Block::Zero, ll.clone()] }
    }

    /// Part anticommuting with `rho_3` (block off-diagonal).
    pub fn odd_part(&self) -> Self {
        let [_, ul, lu, _] = &self.blocks;
        Self { grid: self.grid, blocks: [Block::Zero, ul.clone(), lu.clone(), Block::Zero] }
    }

    pub fn is_block_diagonal(&self) -> bool {
        self.blocks[1].is_zero() && self.blocks[2].is_zero()
    }

    /// Frobenius norm of the stacked matrix.
    pub fn norm(&self) -> f64 {
        let n = self.grid.size();
        self.blocks.iter().map(|b| b.frobenius(n).powi(2)).sum::<f64>().sqrt()
    }

    /// Spectral norm (largest singular value) of the stacked matrix.
    pub fn op_norm(&self) -> Result<f64> {
        let sv = self.to_dense().singular_values().map_err(|_| Error::Eigen)?;
        Ok(sv.first().copied().unwrap_or(0.0))
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }

    pub fn apply(&self, psi: &TwoComponentState) -> TwoComponentState {
        assert_eq!(self.grid, psi.grid, "state and operator live on different grids");
        let n = self.grid.size();
        let mut upper = vec![ZERO; n];
        let mut lower = vec![ZERO; n];
        self.blocks[0].apply_add(&psi.upper, &mut upper);
        self.blocks[1].apply_add(&psi.lower, &mut upper);
        self.blocks[2].apply_add(&psi.upper, &mut lower);
        self.blocks[3].apply_add(&psi.lower, &mut lower);
        TwoComponentState { grid: self.grid, upper, lower }
    }

    /// Applies the upper-left block to a single-component array.
    pub fn apply_upper(&self, v: &[c64]) -> Vec<c64> {
        let mut out = vec![ZERO; v.len()];
        self.blocks[0].apply_add(v, &mut out);
        out
    }
}

impl Add for &LinearOperator {
    type Output = LinearOperator;
    fn add(self, rhs: Self) -> LinearOperator {
        self.combine(ONE, rhs, ONE)
    }
}

impl Sub for &LinearOperator {
    type Output = LinearOperator;
    fn sub(self, rhs: Self) -> LinearOperator {
        self.combine(ONE, rhs, -ONE)
    }
}

impl Mul for &LinearOperator {
    type Output = LinearOperator;
    fn mul(self, rhs: Self) -> LinearOperator {
        self.matmul(rhs)
    }
}

impl Neg for &LinearOperator {
    type Output = LinearOperator;
    fn neg(self) -> LinearOperator {
        self.scale(-ONE)
    }
}

/// `AB - BA`
pub fn commutator(a: &LinearOperator, b: &LinearOperator) -> LinearOperator {
    &(a * b) - &(b * a)
}

/// `AB + BA`
pub fn anticommutator(a: &LinearOperator, b: &LinearOperator) -> LinearOperator {
    &(a * b) + &(b * a)
}

/// Returns `(ok, residual)` with residual `|rho_3 U^dagger rho_3 U - 1|_F`.
/// `|rho_3 H^dagger rho_3 - H| / |H|`
pub fn pseudo_hermitian_residual(h: &LinearOperator) -> f64 {
    h.pseudo_adjoint().distance(h) / h.norm().max(f64::MIN_POSITIVE)
}

pub fn check_pseudo_unitary(u: &LinearOperator, tol: f64) -> (bool, f64) {
    let prod = &u.pseudo_adjoint() * u;
    let residual = prod.distance(&LinearOperator::identity(*u.grid()));
    (residual <= tol, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(1, 4, 1.0).unwrap()
    }

    fn random_mat(rng: &mut ChaCha8Rng, n: usize) -> Arc<Mat<c64>> {
        Arc::new(Mat::from_fn(n, n, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
    }

    fn random_op(seed: u64) -> LinearOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid();
        let blocks = std::array::from_fn(|_| Block::Dense { coef: ONE, mat: random_mat(&mut rng, 4) });
        LinearOperator::from_blocks(g, blocks).unwrap()
    }

    fn dense_mul(a: &LinearOperator, b: &LinearOperator) -> Mat<c64> {
        a.to_dense() * b.to_dense()
    }

    #[test]
    fn block_product_matches_dense_product() {
        let a = random_op(1);
        let b = random_op(2);
        let d = (&a * &b).to_dense() - dense_mul(&a, &b);
        assert!(d.norm_l2() < 1e-12);
    }

    #[test]
    fn pauli_algebra() {
        let g = grid();
        let r1 = LinearOperator::pauli(g, PauliBlock::Rho1);
        let r2 = LinearOperator::pauli(g, PauliBlock::Rho2);
        let r3 = LinearOperator::pauli(g, PauliBlock::Rho3);
        let id = LinearOperator::identity(g);
        for r in [&r1, &r2, &r3] {
            assert!((r * r).distance(&id) == 0.0);
        }
        assert!((&r1 * &r2).distance(&r3.scale(I)) == 0.0);
        assert!((&r2 * &r3).distance(&r1.scale(I)) == 0.0);
        assert!((&r3 * &r1).distance(&r2.scale(I)) == 0.0);
    }

    #[test]
    fn pseudo_adjoint_examples() {
        let g = grid();
        let r3 = LinearOperator::pauli(g, PauliBlock::Rho3);
        assert_eq!(r3.pseudo_adjoint().distance(&r3), 0.0);
        // rho_3 (i rho_2 s)^dagger rho_3 = i rho_2 s for real s
        let s = 0.7;
        let a = LinearOperator::pauli(g, PauliBlock::Rho2).scale(I * s);
        assert!(a.pseudo_adjoint().distance(&a) < 1e-15);
        // 2x2 oracle: rho_3 * conj(transpose([[0, s],[-s, 0]])) * rho_3
        let m = [[0.0, s], [-s, 0.0]];
        let adj = [[m[0][0], m[1][0]], [m[0][1], m[1][1]]];
        let sign = [1.0, -1.0];
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(sign[r] * adj[r][c] * sign[c], m[r][c]);
            }
        }
    }

    #[test]
    fn pseudo_unitary_checks() {
        let g = grid();
        let id = LinearOperator::identity(g);
        let (ok, res) = check_pseudo_unitary(&id, 1e-14);
        assert!(ok && res == 0.0);
        let u = &LinearOperator::pauli(g, PauliBlock::Rho1) + &LinearOperator::pauli(g, PauliBlock::Rho3).scale_real(0.1);
        // 2x2 oracle: U = [[0.1, 1], [1, -0.1]]; rho3 U^dag rho3 U = [[0.1,-1],[-1,-0.1]] U
        let p = [[0.1 * 0.1 - 1.0, 0.1 + 0.1], [-0.1 - 0.1, -1.0 + 0.01]];
        let expected = ((p[0][0] - 1.0f64).powi(2) + p[0][1].powi(2) + p[1][0].powi(2) + (p[1][1] - 1.0f64).powi(2)).sqrt();
        let (ok, res) = check_pseudo_unitary(&u, 1e-10);
        assert!(!ok);
        assert!((res - expected * 2.0).abs() < 1e-12, "{res} vs {}", expected * 2.0);
    }

    #[test]
    fn identical_blocks_share_storage() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_mat(&mut rng, 4);
        let a = LinearOperator::kron(g, PauliBlock::Rho3, &x);
        let sq = &a * &a;
        match (sq.block(0, 0), sq.block(1, 1)) {
            (Block::Dense { mat: m1, .. }, Block::Dense { mat: m2, .. }) => assert!(Arc::ptr_eq(m1, m2)),
            _ => panic!("expected dense blocks"),
        }
        let o = LinearOperator::kron(g, PauliBlock::Rho2, &x).scale(I);
        let osq = &o * &o;
        assert!(osq.is_block_diagonal());
        let diff = osq.to_dense() - dense_mul(&o, &o);
        assert!(diff.norm_l2() < 1e-12);
    }

    #[test]
    fn random_pseudo_adjoint_is_involution() {
        for seed in 0..8 {
            let a = random_op(seed);
            assert_eq!(a.pseudo_adjoint().pseudo_adjoint().distance(&a), 0.0);
            let dense = a.to_dense();
            let r3 = LinearOperator::pauli(grid(), PauliBlock::Rho3).to_dense();
            let oracle = &r3 * dense.adjoint() * &r3;
            assert!((a.pseudo_adjoint().to_dense() - oracle).norm_l2() < 1e-14);
        }
    }

    #[test]
    fn commutators() {
        let a = random_op(3);
        let b = random_op(4);
        let c = commutator(&a, &b).to_dense();
        let ac = anticommutator(&a, &b).to_dense();
        let ab = dense_mul(&a, &b);
        let ba = dense_mul(&b, &a);
        assert!((c - (&ab - &ba)).norm_l2() < 1e-12);
        assert!((ac - (&ab + &ba)).norm_l2() < 1e-12);
    }
}
