//! Foldy-Wouthuysen transformations of the two-component Hamiltonian.
//!
//! * [`exact_fw`]: closed-form block diagonalisation when `[M, O] = [Ecal, O] = 0`.
//! * [`fw_step_operator`] / [`fw_first_stage`]: the first, `N`-dependent
//!   transformation `U = (eps + N + rho_1 (eps - N)) / (2 sqrt(eps N))`, which
//!   leaves `rho_3 eps + Ecal' + O'`.
//! * [`fw_hamiltonian_staged`]: the second (perturbative) stage applied to the
//!   numerically transformed `U H U^-1`.
//! * [`fw_hamiltonian_numeric`]: the series form with the nested commutators
//!   `[pi^2, F]`, `[pi^2, [pi^2, F]]` evaluated as matrices.
//! * [`fw_hamiltonian_closed`]: the same corrections written through `E`, `H`
//!   and `dE/dx`, each product Weyl-symmetrised.
//!
//! Only stationary fields are supported, for which `F = Ecal = e phi`.

use std::sync::Arc;

use faer::{c64, Mat};
use serde::Serialize;

use crate::cffv::{check_charge, split_meo, MeoSplit, ParticleParams};
use crate::error::{Error, Result};
use crate::exec;
use crate::fields::{cross, dot, GridField, Vec3};
use crate::operator::{
    anticommutator, Block, Grid, LinearOperator, PauliBlock, Spectral, SpectralOptions,
};
use crate::packet;

const ONE: c64 = c64 { re: 1.0, im: 0.0 };
const I: c64 = c64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug)]
pub struct FwOptions {
    pub spectral: SpectralOptions,
    /// Relative tolerance on `[M, O]` and `[Ecal, O]` for the exact transformation.
    pub commute_tol: f64,
    /// Map the zero-momentum mode to zero in every function of `eps`
    /// instead of failing on the eigenvalue floor (massless particles).
    pub exclude_zero_mode: bool,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self { spectral: SpectralOptions::default(), commute_tol: 1e-10, exclude_zero_mode: false }
    }
}

impl FwOptions {
    pub fn massless() -> Self {
        Self { exclude_zero_mode: true, ..Self::default() }
    }

    fn spectral(&self) -> SpectralOptions {
        if self.exclude_zero_mode {
            self.spectral.with_null_filter(1e-12)
        } else {
            self.spectral
        }
    }
}

fn require_positive_n(p: &ParticleParams) -> Result<()> {
    if p.n > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "the FW transformation is built for N > 0 (got N = {}); N < 0 exchanges the roles of the two components",
            p.n
        )))
    }
}

fn scalar_op(grid: Grid, m: Mat<c64>) -> LinearOperator {
    LinearOperator::scalar(grid, &Arc::new(m))
}

fn kron(grid: Grid, p: PauliBlock, m: &Arc<Mat<c64>>) -> LinearOperator {
    LinearOperator::kron(grid, p, m)
}

fn comm(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    a * b - b * a
}

fn anti(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    a * b + b * a
}


/// Functions of `eps = sqrt(eps^2)` from one eigendecomposition.
pub struct Epsilon {
    grid: Grid,
    spectrum: Spectral,
}

impl Epsilon {
    /// From the squared energy operator (block diagonal, both blocks equal).
    pub fn from_square(eps2: &LinearOperator, opts: &FwOptions) -> Result<Self> {
        Ok(Self { grid: *eps2.grid(), spectrum: Spectral::new(eps2, opts.spectral())? })
    }

    /// `eps^2 = M^2 + O^2` from a split.
    pub fn from_split(meo: &MeoSplit, opts: &FwOptions) -> Result<Self> {
        let eps2 = &(&meo.m * &meo.m) + &(&meo.o * &meo.o);
        Self::from_square(&eps2, opts)
    }

    /// `eps^2 = pi^2 + m^2` directly.
    pub fn from_kinetic(gf: &GridField, mass: f64, opts: &FwOptions) -> Result<Self> {
        let k = crate::cffv::kinetic_matrix(gf, mass);
        Self::from_square(&LinearOperator::scalar(gf.grid, &k), opts)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `1 (x) eps^a`
    pub fn pow_op(&self, a: f64) -> LinearOperator {
        self.spectrum.apply(move |x| x.powf(0.5 * a))
    }

    /// `eps^a` as a grid matrix.
    pub fn pow(&self, a: f64) -> Arc<Mat<c64>> {
        let op = self.pow_op(a);
        match op.block(0, 0) {
            Block::Dense { coef, mat } if *coef == ONE => Arc::clone(mat),
            b => Arc::new(b.to_mat(self.grid.size())),
        }
    }

    /// Eigenvalues of `eps` (one block), ascending.
    pub fn values(&self) -> Vec<f64> {
        let v = self.spectrum.eigenvalues();
        let n = self.grid.size();
        // Both blocks carry the same spectrum; keep every other value.
        v.iter().step_by(2).take(n).map(|x| x.max(0.0).sqrt()).collect()
    }
}

/// Output of the exact transformation.
pub struct ExactFw {
    pub u: LinearOperator,
    pub u_inv: LinearOperator,
    pub h_fw: LinearOperator,
    /// `rho_3 eps + Ecal`, the closed form of `h_fw`.
    pub expected: LinearOperator,
    /// `|odd part of h_fw| / |h_fw|`
    pub off_diagonal: f64,
    /// `|h_fw - expected| / |h_fw|`
    pub residual: f64,
}

/// `U = (eps + M + rho_3 O) / sqrt(2 eps (eps + M))`, valid when `O`
/// commutes with `M` and `Ecal`.
pub fn exact_fw(meo: &MeoSplit, stationary: bool, opts: &FwOptions) -> Result<ExactFw> {
    if !stationary {
        return Err(Error::NonStationary("the exact FW transformation"));
    }
    meo.require_commuting(opts.commute_tol)?;
    let g = *meo.grid();
    let eps = Epsilon::from_split(meo, opts)?;
    let eps_op = eps.pow_op(1.0);
    let e_plus_m = &eps_op + &meo.m;
    let denom = &(&eps_op * &e_plus_m).scale_real(2.0);
    let inv_sqrt = Spectral::new(denom, opts.spectral())?.apply(|x| 1.0 / x.sqrt());
    let rho3 = LinearOperator::pauli(g, PauliBlock::Rho3);
    let r3o = &rho3 * &meo.o;
    let u = &(&e_plus_m + &r3o) * &inv_sqrt;
    let u_inv = &(&e_plus_m - &r3o) * &inv_sqrt;
    let h = meo.hamiltonian();
    let h_fw = &(&u * &h) * &u_inv;
    let expected = &(&rho3 * &eps_op) + &meo.ecal;
    let norm = h_fw.norm().max(f64::MIN_POSITIVE);
    let off_diagonal = h_fw.odd_part().norm() / norm;
    let residual = h_fw.distance(&expected) / norm;
    Ok(ExactFw { u, u_inv, h_fw, expected, off_diagonal, residual })
}

/// The first transformation and its inverse.
pub struct StepOperator {
    pub u: LinearOperator,
    pub u_inv: LinearOperator,
    pub eps: Epsilon,
}

fn step_from_eps(eps: Epsilon, n: f64) -> StepOperator {
    let g = *eps.grid();
    let sqrt_n = n.sqrt();
    // a = (eps + N)/(2 sqrt(eps N)), b = (eps - N)/(2 sqrt(eps N)), both
    // functions of eps: a = (u + 1/u)/2, b = (u - 1/u)/2 with u = sqrt(eps/N).
    let half = eps.pow(0.5);
    let inv_half = eps.pow(-0.5);
    let nrm = half.nrows();
    let a = Mat::from_fn(nrm, nrm, |i, j| 0.5 * (half[(i, j)] / sqrt_n + inv_half[(i, j)] * sqrt_n));
    let b = Mat::from_fn(nrm, nrm, |i, j| 0.5 * (half[(i, j)] / sqrt_n - inv_half[(i, j)] * sqrt_n));
    let a = Arc::new(a);
    let b = Arc::new(b);
    let aop = kron(g, PauliBlock::Identity, &a);
    let bop = kron(g, PauliBlock::Rho1, &b);
    StepOperator { u: &aop + &bop, u_inv: &aop - &bop, eps }
}

/// `U = (eps + N + rho_1 (eps - N)) / (2 sqrt(eps N))` with `eps = sqrt(pi^2 + m^2)`.
pub fn fw_step_operator(gf: &GridField, p: &ParticleParams, opts: &FwOptions) -> Result<StepOperator> {
    check_charge(gf, p)?;
    require_positive_n(p)?;
    let eps = Epsilon::from_kinetic(gf, p.mass, opts)?;
    Ok(step_from_eps(eps, p.n))
}

/// Even and odd remainders after the first transformation.
pub struct FirstStage {
    /// `Ecal' = F + (1/(2 sqrt eps)) [sqrt eps, [sqrt eps, F]] (1/sqrt eps)`
    pub ecal_prime: LinearOperator,
    /// `O' = rho_1 (1/(2 sqrt eps)) [eps, F] (1/sqrt eps)`
    pub o_prime: LinearOperator,
    /// `Ecal'` from the symmetric-product form `(sqrt eps F eps^-1/2 + eps^-1/2 F sqrt eps)/2`.
    pub ecal_prime_alt: LinearOperator,
    /// `O'` from `rho_1 (sqrt eps F eps^-1/2 - eps^-1/2 F sqrt eps)/2`.
    pub o_prime_alt: LinearOperator,
    /// `U H U^-1` computed directly.
    pub transformed: LinearOperator,
    pub eps: Epsilon,
}

impl FirstStage {
    /// `|Ecal'_alt - Ecal'| + |O'_alt - O'|`, relative to `|Ecal'| + |O'|`.
    pub fn form_agreement(&self) -> f64 {
        let d = self.ecal_prime_alt.distance(&self.ecal_prime) + self.o_prime_alt.distance(&self.o_prime);
        d / (self.ecal_prime.norm() + self.o_prime.norm()).max(f64::MIN_POSITIVE)
    }

    /// `|U H U^-1 - (rho_3 eps + Ecal' + O')| / |U H U^-1|`
    pub fn transform_residual(&self) -> f64 {
        let g = *self.eps.grid();
        let kin = kron(g, PauliBlock::Rho3, &self.eps.pow(1.0));
        let sum = LinearOperator::linear_combination(
            g,
            &[(ONE, &kin), (ONE, &self.ecal_prime), (ONE, &self.o_prime)],
        );
        self.transformed.distance(&sum) / self.transformed.norm().max(f64::MIN_POSITIVE)
    }
}

pub fn fw_first_stage(gf: &GridField, p: &ParticleParams, opts: &FwOptions) -> Result<FirstStage> {
    gf.field.require_stationary("the FW transformation")?;
    let step = fw_step_operator(gf, p, opts)?;
    let h = split_meo(gf, p)?.hamiltonian();
    let transformed = &(&step.u * &h) * &step.u_inv;
    let g = gf.grid;
    let f = gf.coulomb();
    let sq = step.eps.pow(0.5);
    let isq = step.eps.pow(-0.5);
    let e1 = step.eps.pow(1.0);
    let inner = comm(&sq, &comm(&sq, &f));
    let ecal = &*f + &(0.5 * (&*isq * &inner * &*isq));
    let x26 = 0.5 * (&*isq * comm(&e1, &f) * &*isq);
    let left = &*sq * &*f * &*isq;
    let right = &*isq * &*f * &*sq;
    let ecal_alt = 0.5 * (&left + &right);
    let x25 = 0.5 * (&left - &right);
    Ok(FirstStage {
        ecal_prime: scalar_op(g, ecal),
        o_prime: kron(g, PauliBlock::Rho1, &Arc::new(x26)),
        ecal_prime_alt: scalar_op(g, ecal_alt),
        o_prime_alt: kron(g, PauliBlock::Rho1, &Arc::new(x25)),
        transformed,
        eps: step.eps,
    })
}

/// `rho_3 eps + Ecal' + (rho_3/4) {1/eps, O'^2}`
fn second_stage(eps: &Epsilon, even: &LinearOperator, odd: &LinearOperator) -> LinearOperator {
    let g = *eps.grid();
    let kin = kron(g, PauliBlock::Rho3, &eps.pow(1.0));
    let inv = LinearOperator::scalar(g, &eps.pow(-1.0));
    let o2 = odd * odd;
    let rho3 = LinearOperator::pauli(g, PauliBlock::Rho3);
    let corr = &rho3 * &anticommutator(&inv, &o2);
    LinearOperator::linear_combination(g, &[(ONE, &kin), (ONE, even), (c64::new(0.25, 0.0), &corr)])
}

/// Both stages applied to the actual `N`-dependent operators: `eps` from
/// `M^2 + O^2`, `H' = U H U^-1`, then the second stage on the even and odd
/// parts of `H'`.
pub fn fw_hamiltonian_staged(gf: &GridField, p: &ParticleParams, opts: &FwOptions) -> Result<LinearOperator> {
    Ok(staged_pipeline(gf, p, opts)?.h_fw)
}

struct Staged {
    h: LinearOperator,
    h_prime: LinearOperator,
    h_fw: LinearOperator,
    series: LinearOperator,
}

fn staged_pipeline(gf: &GridField, p: &ParticleParams, opts: &FwOptions) -> Result<Staged> {
    check_charge(gf, p)?;
    require_positive_n(p)?;
    gf.field.require_stationary("the FW transformation")?;
    let meo = split_meo(gf, p)?;
    let h = meo.hamiltonian();
    let eps = Epsilon::from_split(&meo, opts)?;
    let series = series_from_eps(gf, p, &eps).total();
    let step = step_from_eps(eps, p.n);
    let h_prime = &(&step.u * &h) * &step.u_inv;
    let g = gf.grid;
    let kin = kron(g, PauliBlock::Rho3, &step.eps.pow(1.0));
    let even = &h_prime.even_part() - &kin;
    let odd = h_prime.odd_part();
    let h_fw = second_stage(&step.eps, &even, &odd);
    Ok(Staged { h, h_prime, h_fw, series })
}

/// The five terms of the FW Hamiltonian; numbers in semiclassical mode.
#[derive(Clone, Debug, Serialize)]
pub struct FwTerms<T> {
    pub kinetic: T,
    pub coulomb: T,
    pub quadrupole: T,
    pub mixed: T,
    pub electric: T,
}

impl FwTerms<f64> {
    pub fn total(&self) -> f64 {
        self.kinetic + self.coulomb + self.quadrupole + self.mixed + self.electric
    }

    /// `eps + e phi`
    pub fn classical(&self) -> f64 {
        self.kinetic + self.coulomb
    }

    pub fn quantum(&self) -> f64 {
        self.quadrupole + self.mixed + self.electric
    }
}

impl FwTerms<LinearOperator> {
    pub fn total(&self) -> LinearOperator {
        let g = *self.kinetic.grid();
        LinearOperator::linear_combination(
            g,
            &[
                (ONE, &self.kinetic),
                (ONE, &self.coulomb),
                (ONE, &self.quadrupole),
                (ONE, &self.mixed),
                (ONE, &self.electric),
            ],
        )
    }

    pub fn quantum(&self) -> LinearOperator {
        let g = *self.kinetic.grid();
        LinearOperator::linear_combination(
            g,
            &[(ONE, &self.quadrupole), (ONE, &self.mixed), (ONE, &self.electric)],
        )
    }
}

/// Terms of the series Hamiltonian. The nested commutator does not separate
/// into quadrupole and mixed parts without the closed forms, so the series
/// route keeps its two correction terms as they are.
pub struct SeriesTerms {
    pub kinetic: LinearOperator,
    pub coulomb: LinearOperator,
    /// `(hbar^2/64) {eps^-4, [pi^2, [pi^2, F]]}`
    pub double_commutator: LinearOperator,
    /// `(rho_3 hbar^2/64) {eps^-5, [pi^2, F]^2}`
    pub square: LinearOperator,
}

impl SeriesTerms {
    pub fn total(&self) -> LinearOperator {
        let g = *self.kinetic.grid();
        LinearOperator::linear_combination(
            g,
            &[(ONE, &self.kinetic), (ONE, &self.coulomb), (ONE, &self.double_commutator), (ONE, &self.square)],
        )
    }

    pub fn quantum(&self) -> LinearOperator {
        &self.double_commutator + &self.square
    }
}

fn series_from_eps(gf: &GridField, p: &ParticleParams, eps: &Epsilon) -> SeriesTerms {
    let g = gf.grid;
    let hb2 = p.hbar_scale * p.hbar_scale;
    let f = gf.coulomb();
    let pi2 = &gf.pi2;
    // Each commutator with pi^2 carries one factor of hbar.
    let c1 = comm(pi2, &f);
    let c2 = comm(pi2, &c1);
    let e4 = eps.pow(-4.0);
    let e5 = eps.pow(-5.0);
    let t3 = (hb2 / 64.0) * anti(&e4, &c2);
    let c1sq = &c1 * &c1;
    let t4 = (hb2 / 64.0) * anti(&e5, &c1sq);
    SeriesTerms {
        kinetic: kron(g, PauliBlock::Rho3, &eps.pow(1.0)),
        coulomb: LinearOperator::scalar(g, &f),
        double_commutator: scalar_op(g, t3),
        square: kron(g, PauliBlock::Rho3, &Arc::new(t4)),
    }
}

/// Series FW Hamiltonian with `eps` taken from `M^2 + O^2` of the `N`-dependent split.
pub fn fw_hamiltonian_numeric(gf: &GridField, p: &ParticleParams, opts: &FwOptions) -> Result<SeriesTerms> {
    check_charge(gf, p)?;
    gf.field.require_stationary("the FW transformation")?;
    let meo = split_meo(gf, p)?;
    let eps = Epsilon::from_split(&meo, opts)?;
    Ok(series_from_eps(gf, p, &eps))
}

/// Grid matrices entering the closed-form corrections.
struct ClosedPieces {
    /// `S = (1/2) sum_i {pi_i, E_i}`
    s: Mat<c64>,
    /// `Q = sum_ij pi_i dE_j/dx_i pi_j`
    q: Mat<c64>,
    /// `W = (1/2) sum_i {pi_i, (E x H)_i}`
    w: Mat<c64>,
}

fn closed_pieces(gf: &GridField) -> ClosedPieces {
    let n = gf.grid.size();
    let mut s = Mat::<c64>::zeros(n, n);
    let mut q = Mat::<c64>::zeros(n, n);
    let mut w = Mat::<c64>::zeros(n, n);
    for i in 0..3 {
        let Some(pi) = &gf.pi[i] else { continue };
        let ei = gf.diagonal(|smp| smp.e[i]);
        s += 0.5 * anti(pi, &ei);
        let vi = gf.diagonal(|smp| smp.e_cross_h()[i]);
        w += 0.5 * anti(pi, &vi);
        for j in 0..3 {
            let Some(pj) = &gf.pi[j] else { continue };
            if gf.samples.iter().all(|smp| smp.de[i][j] == 0.0) {
                continue;
            }
            let dij = gf.diagonal(|smp| smp.de[i][j]);
            q += &**pi * &*dij * &**pj;
        }
    }
    ClosedPieces { s, q, w }
}

/// Closed-form FW Hamiltonian on the grid with symmetrised operator products:
/// quadrupole `(e hbar^2/8) (1/2){eps^-4, Q}`, mixed
/// `-(e^2 hbar^2/8) (1/2){eps^-4, W}`, electric `-rho_3 (e^2 hbar^2/8) (1/2){eps^-5, S^2}`.
pub fn fw_hamiltonian_closed(
    gf: &GridField,
    p: &ParticleParams,
    opts: &FwOptions,
) -> Result<FwTerms<LinearOperator>> {
    check_charge(gf, p)?;
    gf.field.require_stationary("the FW transformation")?;
    if p.mass == 0.0 && !opts.exclude_zero_mode {
        return Err(Error::Massless(
            "eps = |pi| vanishes on the zero-momentum mode; enable the zero-mode exclusion",
        ));
    }
    let g = gf.grid;
    let eps = Epsilon::from_kinetic(gf, p.mass, opts)?;
    let e = p.charge;
    let hb2 = p.hbar_scale * p.hbar_scale;
    let pieces = closed_pieces(gf);
    let e4 = eps.pow(-4.0);
    let e5 = eps.pow(-5.0);
    let quad = (e * hb2 / 16.0) * anti(&e4, &pieces.q);
    let mixed = (-e * e * hb2 / 16.0) * anti(&e4, &pieces.w);
    let s2 = &pieces.s * &pieces.s;
    let elec = (-e * e * hb2 / 16.0) * anti(&e5, &s2);
    Ok(FwTerms {
        kinetic: kron(g, PauliBlock::Rho3, &eps.pow(1.0)),
        coulomb: LinearOperator::scalar(g, &gf.coulomb()),
        quadrupole: scalar_op(g, quad),
        mixed: scalar_op(g, mixed),
        electric: kron(g, PauliBlock::Rho3, &Arc::new(elec)),
    })
}

/// Semiclassical value of the FW Hamiltonian (upper component) at `(r, pi)`.
pub fn fw_closed_semiclassical(
    sample: &crate::fields::FieldSample,
    pi: Vec3,
    p: &ParticleParams,
) -> Result<FwTerms<f64>> {
    let eps = (p.mass * p.mass + dot(pi, pi)).sqrt();
    if eps == 0.0 {
        return Err(Error::Massless("eps = |pi| = 0 for a massless particle at rest"));
    }
    let e = p.charge;
    let hb2 = p.hbar_scale * p.hbar_scale;
    let mut pdp = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            pdp += pi[i] * sample.de[i][j] * pi[j];
        }
    }
    let pe = dot(pi, sample.e);
    let pv = dot(pi, cross(sample.e, sample.h));
    let e4 = eps.powi(4);
    Ok(FwTerms {
        kinetic: eps,
        coulomb: e * sample.phi,
        quadrupole: e * hb2 / (8.0 * e4) * pdp,
        mixed: -e * e * hb2 / (8.0 * e4) * pv,
        electric: -e * e * hb2 / (8.0 * e4 * eps) * pe * pe,
    })
}

/// Massless form with the direction of motion `l = pi/|pi|` as the x axis.
#[derive(Clone, Debug, Serialize)]
pub struct MasslessReport {
    pub eps: f64,
    pub direction: Vec3,
    /// `e hbar^2/(8 eps^2) dE_x/dx`
    pub quadrupole: f64,
    /// `-e^2 hbar^2/(8 eps^3) (E x H)_x`
    pub mixed: f64,
    /// `-e^2 hbar^2/(8 eps^3) E_x^2`
    pub electric: f64,
}

pub fn massless_report(
    sample: &crate::fields::FieldSample,
    pi: Vec3,
    p: &ParticleParams,
) -> Result<MasslessReport> {
    if p.mass != 0.0 {
        return Err(Error::Precondition("the massless specialization requires m = 0".into()));
    }
    let eps = dot(pi, pi).sqrt();
    if eps == 0.0 {
        return Err(Error::Massless("direction of motion undefined at pi = 0"));
    }
    let l = pi.map(|x| x / eps);
    let e = p.charge;
    let hb2 = p.hbar_scale * p.hbar_scale;
    let mut ldl = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            ldl += l[i] * sample.de[i][j] * l[j];
        }
    }
    let le = dot(l, sample.e);
    Ok(MasslessReport {
        eps,
        direction: l,
        quadrupole: e * hb2 / (8.0 * eps * eps) * ldl,
        mixed: -e * e * hb2 / (8.0 * eps.powi(3)) * dot(l, sample.e_cross_h()),
        electric: -e * e * hb2 / (8.0 * eps.powi(3)) * le * le,
    })
}

/// Residuals of the commutator identities on interior wavepackets.
#[derive(Clone, Debug, Serialize)]
pub struct CommutatorReport {
    /// `max |[pi^2, e phi] psi - i e (pi.E + E.pi) psi| / |i e (pi.E + E.pi) psi|`
    pub single: f64,
    /// Same for `[pi^2, [pi^2, e phi]] = 4 e sum pi_i dE_j/dx_i pi_j - 2 e^2 sum {pi_i, (E x H)_i}`.
    /// When the right-hand side vanishes identically (uniform `E`, no `H`) the
    /// residual is measured against `|pi^2 [pi^2, e phi] psi|`, the size of the
    /// terms that must cancel.
    pub double: f64,
    /// Norm of the `E x H` piece relative to the whole double commutator.
    pub cross_share: f64,
    pub packets: usize,
}

fn rel(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den.max(f64::MIN_POSITIVE)
    }
}

fn vec_norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vec_sub(a: &[c64], b: &[c64]) -> Vec<c64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn verify_commutator_identities(gf: &GridField, packets: &[Vec<c64>]) -> Result<CommutatorReport> {
    gf.field.require_stationary("the commutator identities")?;
    let e = gf.charge;
    let pieces = closed_pieces(gf);
    let f = gf.coulomb();
    let pi2 = &gf.pi2;
    let mv = packet::mat_vec;
    let mut single = 0.0f64;
    let mut double = 0.0f64;
    let mut cross_share = 0.0f64;
    for psi in packets {
        if psi.len() != gf.grid.size() {
            return Err(Error::GridMismatch);
        }
        // [pi^2, F] psi and [pi^2, [pi^2, F]] psi by matrix-vector products only.
        let fpsi = mv(&f, psi);
        let c1 = vec_sub(&mv(pi2, &fpsi), &mv(&f, &mv(pi2, psi)));
        let c1_of = |v: &[c64]| vec_sub(&mv(pi2, &mv(&f, v)), &mv(&f, &mv(pi2, v)));
        let c2 = vec_sub(&mv(pi2, &c1), &c1_of(&mv(pi2, psi)));
        let rhs1: Vec<c64> = mv(&pieces.s, psi).into_iter().map(|z| z * (2.0 * e) * I).collect();
        let qpsi = mv(&pieces.q, psi);
        let wpsi = mv(&pieces.w, psi);
        let rhs2: Vec<c64> = qpsi.iter().zip(&wpsi).map(|(q, w)| 4.0 * e * q - 4.0 * e * e * w).collect();
        let rhs1_norm = vec_norm(&rhs1);
        let den1 = if rhs1_norm > 0.0 { rhs1_norm } else { vec_norm(&mv(pi2, &fpsi)) };
        single = single.max(rel(vec_norm(&vec_sub(&c1, &rhs1)), den1));
        let rhs2_norm = vec_norm(&rhs2);
        let den2 = if rhs2_norm > 0.0 { rhs2_norm } else { vec_norm(&mv(pi2, &c1)) };
        double = double.max(rel(vec_norm(&vec_sub(&c2, &rhs2)), den2));
        cross_share = cross_share.max(rel(4.0 * e * e * vec_norm(&wpsi), vec_norm(&rhs2)));
    }
    Ok(CommutatorReport { single, double, cross_share, packets: packets.len() })
}

/// Result of an `N` sweep.
#[derive(Clone, Debug, Serialize)]
pub struct NIndependenceReport {
    pub n_values: Vec<f64>,
    /// Both stages applied to the `N`-dependent operators.
    pub staged: f64,
    /// Series Hamiltonian with `eps` from `M^2 + O^2`.
    pub series: f64,
    /// `U H U^-1` after the first stage alone.
    pub first_stage: f64,
    /// Negative control: the untransformed Hamiltonians.
    pub cffv: f64,
    pub tol: f64,
    pub pass: bool,
}

fn max_pairwise(ops: &[LinearOperator]) -> f64 {
    let scale = ops.iter().map(|o| o.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            worst = worst.max(ops[i].distance(&ops[j]) / scale);
        }
    }
    worst
}

pub fn verify_n_independence(
    gf: &GridField,
    p: &ParticleParams,
    n_list: &[f64],
    tol: f64,
    opts: &FwOptions,
) -> Result<NIndependenceReport> {
    let mut distinct = n_list.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Precondition("the N sweep needs at least two distinct values".into()));
    }
    let runs: Vec<Result<Staged>> = exec::map(n_list, |n| {
        let pn = p.with_n(*n)?;
        staged_pipeline(gf, &pn, opts)
    });
    let runs: Vec<Staged> = runs.into_iter().collect::<Result<_>>()?;
    let pick = |f: &dyn Fn(&Staged) -> LinearOperator| runs.iter().map(f).collect::<Vec<_>>();
    let staged = max_pairwise(&pick(&|s| s.h_fw.clone()));
    let series = max_pairwise(&pick(&|s| s.series.clone()));
    let first_stage = max_pairwise(&pick(&|s| s.h_prime.clone()));
    let cffv = max_pairwise(&pick(&|s| s.h.clone()));
    let pass = staged <= tol && series <= tol && first_stage <= tol;
    Ok(NIndependenceReport { n_values: n_list.to_vec(), staged, series, first_stage, cffv, tol, pass })
}

/// Distinct positive levels of the upper block of a block-diagonal FW
/// Hamiltonian, keeping only eigenvectors with at least `min_weight` of their
/// probability inside the central box `|x_a| < interior * L` (states pinned
/// to the seam of a non-periodic vector potential are discarded). Levels are
/// clusters of eigenvalues closer than `rel_gap` relative.
pub fn interior_levels(
    h_fw: &LinearOperator,
    count: usize,
    interior: f64,
    min_weight: f64,
    rel_gap: f64,
) -> Result<Vec<f64>> {
    if h_fw.odd_part().norm() > 1e-8 * h_fw.norm() {
        return Err(Error::Precondition("level extraction needs a block-diagonal Hamiltonian".into()));
    }
    let g = *h_fw.grid();
    let up = h_fw.block(0, 0).to_mat(g.size());
    let (ev, vecs) = crate::operator::spectral::hermitian_eigen(&up)?;
    let pos = g.positions();
    let box_half = interior * g.length();
    let inside: Vec<bool> = pos.iter().map(|r| (0..g.dim()).all(|a| r[a].abs() < box_half)).collect();
    let mut levels: Vec<(f64, usize)> = Vec::new();
    for (i, &e) in ev.iter().enumerate() {
        if e <= 0.0 {
            continue;
        }
        let col = vecs.col(i);
        let (mut w, mut tot) = (0.0, 0.0);
        for s in 0..g.size() {
            let a = col[s].norm_sqr();
            tot += a;
            if inside[s] {
                w += a;
            }
        }
        if w < min_weight * tot {
            continue;
        }
        match levels.last_mut() {
            Some((v, k)) if (e - *v / *k as f64).abs() <= rel_gap * e => {
                *v += e;
                *k += 1;
            }
            _ => {
                if levels.len() == count {
                    break;
                }
                levels.push((e, 1));
            }
        }
    }
    Ok(levels.into_iter().map(|(v, k)| v / k as f64).collect())
}

/// `sqrt(m^2 + (2n + 1) |e H|)`
pub fn landau_level(mass: f64, charge: f64, h: f64, n: usize) -> f64 {
    (mass * mass + (2 * n + 1) as f64 * (charge * h).abs()).sqrt()
}
