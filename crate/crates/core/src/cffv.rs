//! Two-component first-order form of the Klein-Gordon equation with a free
//! nonzero parameter `N`, its Hamiltonian, even/odd split, and time evolution.
//!
//! With `K = pi^2 + m^2` the Hamiltonian is
//!
//! ```text
//! H = rho_3 (K + N^2)/(2N) + e phi + i rho_2 (K - N^2)/(2N)
//! ```
//!
//! acting on `Psi = (phi_u, chi_l)` with `psi = phi_u + chi_l`.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::fields::GridField;
use crate::operator::{commutator, Grid, LinearOperator, PauliBlock, TwoComponentState};

const I: c64 = c64 { re: 0.0, im: 1.0 };

/// Particle mass, charge, transformation parameter `N` and the factor
/// multiplying every explicit `hbar` in the quantum corrections.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleParams {
    pub mass: f64,
    pub charge: f64,
    pub n: f64,
    pub hbar_scale: f64,
}

impl ParticleParams {
    /// `n = None` selects `N = max(m, 1)`.
    pub fn new(mass: f64, charge: f64, n: Option<f64>, hbar_scale: f64) -> Result<Self> {
        let p = Self { mass, charge, n: n.unwrap_or(mass.max(1.0)), hbar_scale };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass >= 0.0) {
            return Err(Error::InvalidParams(format!("mass {} must be finite and >= 0", self.mass)));
        }
        if !self.charge.is_finite() {
            return Err(Error::InvalidParams("charge must be finite".into()));
        }
        if !(self.n.is_finite() && self.n != 0.0) {
            return Err(Error::InvalidParams(format!("N = {} must be finite and nonzero", self.n)));
        }
        // Zero is allowed so that the classical limit can be taken.
        if !(self.hbar_scale.is_finite() && self.hbar_scale >= 0.0) {
            return Err(Error::InvalidParams(format!("hbar_scale {} must be >= 0", self.hbar_scale)));
        }
        Ok(())
    }

    pub fn with_n(self, n: f64) -> Result<Self> {
        let p = Self { n, ..self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_hbar_scale(self, hbar_scale: f64) -> Result<Self> {
        let p = Self { hbar_scale, ..self };
        p.validate()?;
        Ok(p)
    }
}

pub(crate) fn check_charge(gf: &GridField, p: &ParticleParams) -> Result<()> {
    p.validate()?;
    if gf.charge != p.charge {
        return Err(Error::InvalidParams(format!(
            "grid field sampled for charge {} but particle charge is {}",
            gf.charge, p.charge
        )));
    }
    Ok(())
}

/// `H = rho_3 M + Ecal + O` with `M`, `Ecal` even and `O` odd.
#[derive(Clone, Debug)]
pub struct MeoSplit {
    /// `1 (x) M`, `M = (K + N^2)/(2N)`
    pub m: LinearOperator,
    /// `1 (x) e phi`
    pub ecal: LinearOperator,
    /// `i rho_2 (x) G`, `G = (K - N^2)/(2N)`
    pub o: LinearOperator,
    /// `K = pi^2 + m^2` on the grid.
    pub k: Arc<Mat<c64>>,
    pub n: f64,
}

/// Parity residuals of a split.
#[derive(Clone, Copy, Debug)]
pub struct ParityReport {
    pub m_even: f64,
    pub ecal_even: f64,
    pub o_odd: f64,
    pub reconstruction: f64,
}

impl MeoSplit {
    pub fn grid(&self) -> &Grid {
        self.m.grid()
    }

    pub fn hamiltonian(&self) -> LinearOperator {
        let g = *self.grid();
        let rho3 = LinearOperator::pauli(g, PauliBlock::Rho3);
        let one = c64::new(1.0, 0.0);
        let rho3m = &rho3 * &self.m;
        LinearOperator::linear_combination(g, &[(one, &rho3m), (one, &self.ecal), (one, &self.o)])
    }

    /// `|rho_3 X - X rho_3|` for the even parts, `|rho_3 O + O rho_3|` for `O`,
    /// and `|rho_3 M + Ecal + O - H|`.
    pub fn parity(&self, h: &LinearOperator) -> ParityReport {
        let rho3 = LinearOperator::pauli(*self.grid(), PauliBlock::Rho3);
        ParityReport {
            m_even: commutator(&rho3, &self.m).norm(),
            ecal_even: commutator(&rho3, &self.ecal).norm(),
            o_odd: crate::operator::anticommutator(&rho3, &self.o).norm(),
            reconstruction: self.hamiltonian().distance(h),
        }
    }

    /// `(|[M, O]|, |[Ecal, O]|)`, Frobenius.
    pub fn commutator_norms(&self) -> (f64, f64) {
        (commutator(&self.m, &self.o).norm(), commutator(&self.ecal, &self.o).norm())
    }

    /// Fails unless both commutators vanish relative to `tol |X| |O|`.
    pub fn require_commuting(&self, tol: f64) -> Result<()> {
        let (mo, eo) = self.commutator_norms();
        let on = self.o.norm();
        if mo > tol * self.m.norm() * on || eo > tol * self.ecal.norm().max(1.0) * on {
            return Err(Error::CommutationViolated { m_o: mo, e_o: eo, tol });
        }
        Ok(())
    }
}

/// `K = pi^2 + m^2` as a grid matrix.
pub fn kinetic_matrix(gf: &GridField, mass: f64) -> Arc<Mat<c64>> {
    let mut k = gf.pi2.as_ref().clone();
    let m2 = c64::new(mass * mass, 0.0);
    for i in 0..k.nrows() {
        k[(i, i)] += m2;
    }
    Arc::new(k)
}

pub fn split_meo(gf: &GridField, p: &ParticleParams) -> Result<MeoSplit> {
    check_charge(gf, p)?;
    let g = gf.grid;
    let k = kinetic_matrix(gf, p.mass);
    let kop = LinearOperator::scalar(g, &k);
    let n = p.n;
    let id = LinearOperator::identity(g);
    let m = LinearOperator::linear_combination(
        g,
        &[(c64::new(0.5 / n, 0.0), &kop), (c64::new(0.5 * n, 0.0), &id)],
    );
    let gmat = LinearOperator::linear_combination(
        g,
        &[(c64::new(0.5 / n, 0.0), &kop), (c64::new(-0.5 * n, 0.0), &id)],
    );
    let irho2 = LinearOperator::pauli(g, PauliBlock::Rho2).scale(I);
    let o = &irho2 * &gmat;
    let ecal = if gf.has_scalar_potential() {
        LinearOperator::scalar(g, &gf.coulomb())
    } else {
        LinearOperator::zero(g)
    };
    Ok(MeoSplit { m, ecal, o, k, n })
}

pub fn build_cffv_hamiltonian(gf: &GridField, p: &ParticleParams) -> Result<LinearOperator> {
    Ok(split_meo(gf, p)?.hamiltonian())
}

/// `phi_u = (psi + (i dt psi - e phi psi)/N)/2`, `chi_l = (psi - ...)/2`.
pub fn lift_kg_state(
    psi: &[c64],
    dt_psi: &[c64],
    gf: &GridField,
    p: &ParticleParams,
) -> Result<TwoComponentState> {
    check_charge(gf, p)?;
    let n = gf.grid.size();
    if psi.len() != n || dt_psi.len() != n {
        return Err(Error::GridMismatch);
    }
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    for s in 0..n {
        let ephi = p.charge * gf.samples[s].phi;
        let w = (I * dt_psi[s] - psi[s] * ephi) / p.n;
        upper.push(0.5 * (psi[s] + w));
        lower.push(0.5 * (psi[s] - w));
    }
    TwoComponentState::new(gf.grid, upper, lower)
}

/// `psi = phi_u + chi_l`
pub fn project_kg(state: &TwoComponentState) -> Vec<c64> {
    state.upper.iter().zip(&state.lower).map(|(a, b)| a + b).collect()
}

/// Time derivative `d psi/dt` recovered from a two-component state:
/// `i dt psi = N (phi_u - chi_l) + e phi psi`.
pub fn kg_time_derivative(state: &TwoComponentState, gf: &GridField, p: &ParticleParams) -> Vec<c64> {
    (0..gf.grid.size())
        .map(|s| {
            let psi = state.upper[s] + state.lower[s];
            let rhs = (state.upper[s] - state.lower[s]) * p.n + psi * (p.charge * gf.samples[s].phi);
            -I * rhs
        })
        .collect()
}

/// Implicit-midpoint (Cayley) propagator `(1 + i dt H/2)^-1 (1 - i dt H/2)`.
pub struct Propagator {
    grid: Grid,
    dt: f64,
    matrix: Mat<c64>,
}

impl Propagator {
    pub fn cayley(h: &LinearOperator, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Precondition(format!("time step {dt} must be positive")));
        }
        let hd = h.to_dense();
        let n2 = hd.nrows();
        let half = I * (0.5 * dt);
        let a = Mat::from_fn(n2, n2, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) } + half * hd[(i, j)]);
        let b = Mat::from_fn(n2, n2, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) } - half * hd[(i, j)]);
        let matrix = a.partial_piv_lu().solve(&b);
        if matrix.norm_l2().is_nan() {
            return Err(Error::Unstable { t: 0.0, reason: "singular Cayley denominator".into() });
        }
        Ok(Self { grid: *h.grid(), dt, matrix })
    }

    /// Exact propagator `exp(-i H dt)` from the eigendecomposition of `H`
    /// (real spectrum required). Free of time-step error, so it is used where
    /// long horizons would otherwise accumulate the Cayley phase error.
    pub fn exact(h: &LinearOperator, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Precondition(format!("time step {dt} must be positive")));
        }
        let opts = crate::operator::SpectralOptions { floor: crate::operator::Floor::None, ..Default::default() };
        let sp = crate::operator::Spectral::new(h, opts)?;
        let u = sp.apply_complex(|x| c64::from_polar(1.0, -x * dt));
        Ok(Self { grid: *h.grid(), dt, matrix: u.to_dense() })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &TwoComponentState) -> TwoComponentState {
        let v = psi.stacked();
        let out = self.matrix.as_ref() * faer::ColRef::from_slice(&v);
        let out: Vec<c64> = (0..out.nrows()).map(|i| out[i]).collect();
        TwoComponentState::from_stacked(self.grid, &out).expect("sizes fixed by construction")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    /// Keep every `record_every`-th state (the initial and final states are always kept).
    pub record_every: usize,
    /// Abort when `|<Psi|Psi>(t) - <Psi|Psi>(0)|` exceeds this times `|Psi0|^2`.
    pub drift_threshold: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { record_every: 1, drift_threshold: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<TwoComponentState>,
    /// Largest relative pseudo-norm drift seen during the run.
    pub max_drift: f64,
}

/// Runs `steps` propagator steps with drift monitoring.
pub fn evolve_with(
    prop: &Propagator,
    psi0: &TwoComponentState,
    steps: usize,
    opts: EvolveOptions,
) -> Result<Evolution> {
    if psi0.grid != prop.grid {
        return Err(Error::GridMismatch);
    }
    let every = opts.record_every.max(1);
    let scale = psi0.l2_norm().powi(2).max(f64::MIN_POSITIVE);
    let n0 = psi0.pseudo_norm();
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let mut current = psi0.clone();
    let mut max_drift = 0.0f64;
    for k in 1..=steps {
        current = prop.step(&current);
        let drift = (current.pseudo_norm() - n0).abs() / scale;
        max_drift = max_drift.max(drift);
        if !(drift <= opts.drift_threshold) {
            return Err(Error::NormDrift { step: k, drift, threshold: opts.drift_threshold });
        }
        if k % every == 0 || k == steps {
            times.push(k as f64 * prop.dt);
            states.push(current.clone());
        }
    }
    Ok(Evolution { times, states, max_drift })
}

/// Evolves `i dPsi/dt = H Psi` with the Cayley propagator.
pub fn evolve_cffv(
    psi0: &TwoComponentState,
    h: &LinearOperator,
    dt: f64,
    steps: usize,
    opts: EvolveOptions,
) -> Result<Evolution> {
    let prop = Propagator::cayley(h, dt)?;
    evolve_with(&prop, psi0, steps, opts)
}

/// Largest relative residual of the Klein-Gordon equation
/// `(i d/dt - e phi)^2 psi = (pi^2 + m^2) psi` over consecutive triples of an
/// equally spaced history, with central time differences.
pub fn kg_residual(history: &[Vec<c64>], dt: f64, gf: &GridField, p: &ParticleParams) -> Result<f64> {
    check_charge(gf, p)?;
    if history.len() < 3 {
        return Err(Error::Precondition("KG residual needs at least three samples".into()));
    }
    let k = kinetic_matrix(gf, p.mass);
    let ephi: Vec<f64> = gf.samples.iter().map(|s| p.charge * s.phi).collect();
    let mut worst = 0.0f64;
    for w in history.windows(3) {
        let (prev, cur, next) = (&w[0], &w[1], &w[2]);
        let kpsi = k.as_ref() * faer::ColRef::from_slice(cur);
        let mut num = 0.0;
        let mut den = 0.0;
        for s in 0..cur.len() {
            let d2 = (next[s] - 2.0 * cur[s] + prev[s]) / (dt * dt);
            let d1 = (next[s] - prev[s]) / (2.0 * dt);
            let lhs = -d2 - 2.0 * I * ephi[s] * d1 + cur[s] * ephi[s] * ephi[s];
            num += (lhs - kpsi[s]).norm_sqr();
            den += kpsi[s].norm_sqr();
        }
        worst = worst.max((num / den.max(f64::MIN_POSITIVE)).sqrt());
    }
    Ok(worst)
}
