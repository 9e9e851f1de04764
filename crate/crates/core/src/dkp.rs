//! Five-component Duffin-Kemmer-Petiau form for spin-0 particles.
//!
//! `(beta^mu D_mu - m) Phi = 0` with `D_mu = d_mu + i e A_mu`, `A_mu = (phi, -A)`.
//! On the grid `D_k = i pi_k` and `D_0 = d/dt + i e phi`. Eliminating
//! `Phi_2..Phi_4` and substituting `Phi_1 = phi - chi`, `Phi_5 = -i (phi + chi)`
//! gives the two-component operator
//! `rho_3 (m - D^2/(2m)) - i rho_2 D^2/(2m) + e phi`.

use std::sync::Arc;

use faer::{c64, Mat};
use serde::Serialize;

use crate::cffv::{build_cffv_hamiltonian, check_charge, evolve_with, EvolveOptions, ParticleParams, Propagator};
use crate::error::{Error, Result};
use crate::fields::GridField;
use crate::operator::{LinearOperator, PauliBlock, TwoComponentState};
use crate::packet::mat_vec;

const I: c64 = c64 { re: 0.0, im: 1.0 };

pub type Beta = [[f64; 5]; 5];

/// `beta^0 .. beta^3`
pub fn dkp_betas() -> [Beta; 4] {
    let mut b = [[[0.0; 5]; 5]; 4];
    b[0][0][4] = -1.0;
    b[0][4][0] = 1.0;
    for k in 1..4 {
        b[k][k][4] = 1.0;
        b[k][4][k] = 1.0;
    }
    b
}

fn mul(a: &Beta, b: &Beta) -> Beta {
    let mut c = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            c[i][j] = (0..5).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// Largest entry of `b^mu b^nu b^la + b^la b^nu b^mu - g^{nu la} b^mu - g^{nu mu} b^la`
/// over all index triples, for a diagonal metric.
pub fn trilinear_residual(betas: &[Beta; 4], metric: [f64; 4]) -> f64 {
    let mut worst = 0.0f64;
    for mu in 0..4 {
        for nu in 0..4 {
            for la in 0..4 {
                let lhs1 = mul(&mul(&betas[mu], &betas[nu]), &betas[la]);
                let lhs2 = mul(&mul(&betas[la], &betas[nu]), &betas[mu]);
                let g_nl = if nu == la { metric[nu] } else { 0.0 };
                let g_nm = if nu == mu { metric[nu] } else { 0.0 };
                for i in 0..5 {
                    for j in 0..5 {
                        let r = lhs1[i][j] + lhs2[i][j] - g_nl * betas[mu][i][j] - g_nm * betas[la][i][j];
                        worst = worst.max(r.abs());
                    }
                }
            }
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaAlgebraReport {
    /// Residual with metric `diag(1, -1, -1, -1)`.
    pub residual_mostly_minus: f64,
    /// Residual with metric `diag(-1, 1, 1, 1)`.
    pub residual_mostly_plus: f64,
    pub max_trace: f64,
}

impl BetaAlgebraReport {
    /// The algebra closes for one of the two sign conventions.
    pub fn closes(&self) -> bool {
        self.residual_mostly_minus == 0.0 || self.residual_mostly_plus == 0.0
    }
}

pub fn beta_algebra() -> BetaAlgebraReport {
    let b = dkp_betas();
    let max_trace = b.iter().map(|m| (0..5).map(|i| m[i][i]).sum::<f64>().abs()).fold(0.0, f64::max);
    BetaAlgebraReport {
        residual_mostly_minus: trilinear_residual(&b, [1.0, -1.0, -1.0, -1.0]),
        residual_mostly_plus: trilinear_residual(&b, [-1.0, 1.0, 1.0, 1.0]),
        max_trace,
    }
}

fn require_mass(p: &ParticleParams) -> Result<()> {
    if p.mass > 0.0 {
        Ok(())
    } else {
        Err(Error::Massless("the DKP equation is inapplicable to massless particles (its reduction divides by m)"))
    }
}

/// `D_k = i pi_k` for the three axes (`None` when identically zero).
fn spatial_d(gf: &GridField) -> [Option<Mat<c64>>; 3] {
    std::array::from_fn(|k| gf.pi[k].as_ref().map(|pi| pi.as_ref() * faer::Scale(I)))
}

/// `D^2 = D_1^2 + D_2^2 + D_3^2`
fn d_squared(gf: &GridField) -> Mat<c64> {
    let n = gf.grid.size();
    let mut d2 = Mat::<c64>::zeros(n, n);
    for d in spatial_d(gf).iter().flatten() {
        d2 += d * d;
    }
    d2
}

/// Reduced two-component DKP operator
/// `rho_3 (m - D^2/(2m)) - i rho_2 D^2/(2m) + e phi`.
pub fn build_dkp_reduced(gf: &GridField, p: &ParticleParams) -> Result<LinearOperator> {
    check_charge(gf, p)?;
    require_mass(p)?;
    let g = gf.grid;
    let m = p.mass;
    let d2 = d_squared(gf);
    let n = g.size();
    let diag = Mat::from_fn(n, n, |i, j| {
        let id = if i == j { c64::new(m, 0.0) } else { c64::new(0.0, 0.0) };
        id - d2[(i, j)] / (2.0 * m)
    });
    let off = Arc::new(&d2 * faer::Scale(c64::new(1.0 / (2.0 * m), 0.0)));
    let rho3 = LinearOperator::kron(g, PauliBlock::Rho3, &Arc::new(diag));
    let rho2 = LinearOperator::kron(g, PauliBlock::Rho2, &off);
    let coul = LinearOperator::scalar(g, &gf.coulomb());
    let one = c64::new(1.0, 0.0);
    Ok(LinearOperator::linear_combination(g, &[(one, &rho3), (-I, &rho2), (one, &coul)]))
}

/// `Phi_1 .. Phi_5` on the grid.
#[derive(Clone, Debug)]
pub struct DkpState {
    pub components: [Vec<c64>; 5],
}

impl DkpState {
    /// Builds all five components from a reduced state: `Phi_1 = phi - chi`,
    /// `Phi_5 = -i (phi + chi)`, `Phi_{k+1} = D_k Phi_5 / m`.
    pub fn from_reduced(psi: &TwoComponentState, gf: &GridField, p: &ParticleParams) -> Result<Self> {
        require_mass(p)?;
        if psi.grid != gf.grid {
            return Err(Error::GridMismatch);
        }
        let phi1: Vec<c64> = psi.upper.iter().zip(&psi.lower).map(|(a, b)| a - b).collect();
        let phi5: Vec<c64> = psi.upper.iter().zip(&psi.lower).map(|(a, b)| -I * (a + b)).collect();
        let ds = spatial_d(gf);
        let n = phi5.len();
        let comp = |k: usize| match &ds[k] {
            Some(d) => mat_vec(d, &phi5).into_iter().map(|z| z / p.mass).collect(),
            None => vec![c64::new(0.0, 0.0); n],
        };
        Ok(Self { components: [phi1, comp(0), comp(1), comp(2), phi5] })
    }

    /// `phi = (Phi_1 + i Phi_5)/2`, `chi = (i Phi_5 - Phi_1)/2`
    pub fn to_reduced(&self, gf: &GridField) -> Result<TwoComponentState> {
        let [p1, _, _, _, p5] = &self.components;
        let upper = p1.iter().zip(p5).map(|(a, b)| 0.5 * (a + I * b)).collect();
        let lower = p1.iter().zip(p5).map(|(a, b)| 0.5 * (I * b - a)).collect();
        TwoComponentState::new(gf.grid, upper, lower)
    }

    /// `max_k |Phi_{k+1} - D_k Phi_5 / m| / |Phi_5|`
    pub fn constraint_residual(&self, gf: &GridField, p: &ParticleParams) -> f64 {
        let ds = spatial_d(gf);
        let p5 = &self.components[4];
        let scale = norm(p5).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for k in 0..3 {
            let target: Vec<c64> = match &ds[k] {
                Some(d) => mat_vec(d, p5).into_iter().map(|z| z / p.mass).collect(),
                None => vec![c64::new(0.0, 0.0); p5.len()],
            };
            worst = worst.max(norm(&diff(&self.components[k + 1], &target)) / scale);
        }
        worst
    }

    /// Residuals of the two rows of the first-order system that involve time,
    /// `-D_0 Phi_5 = m Phi_1` and `D_0 Phi_1 + sum_k D_k Phi_{k+1} = m Phi_5`,
    /// given `d Phi/dt`. Relative to `m |Phi_1|` and `m |Phi_5|`.
    pub fn equation_residuals(&self, dt_phi: &DkpState, gf: &GridField, p: &ParticleParams) -> [f64; 2] {
        let [p1, p2, p3, p4, p5] = &self.components;
        let m = p.mass;
        let ephi: Vec<f64> = gf.samples.iter().map(|s| p.charge * s.phi).collect();
        let d0 = |x: &[c64], dx: &[c64]| -> Vec<c64> {
            x.iter().zip(dx).zip(&ephi).map(|((a, da), v)| da + I * v * a).collect()
        };
        let r1: Vec<c64> = d0(p5, &dt_phi.components[4]).iter().zip(p1).map(|(a, b)| -a - m * b).collect();
        let mut r5 = d0(p1, &dt_phi.components[0]);
        let ds = spatial_d(gf);
        for (d, comp) in ds.iter().zip([p2, p3, p4]) {
            if let Some(d) = d {
                for (r, z) in r5.iter_mut().zip(mat_vec(d, comp)) {
                    *r += z;
                }
            }
        }
        for (r, z) in r5.iter_mut().zip(p5) {
            *r -= m * z;
        }
        [
            norm(&r1) / (m * norm(p1)).max(f64::MIN_POSITIVE),
            norm(&r5) / (m * norm(p5)).max(f64::MIN_POSITIVE),
        ]
    }
}

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn diff(a: &[c64], b: &[c64]) -> Vec<c64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `d Phi/dt` of the five-component state carried by a reduced state evolving
/// under `h` (`i dPsi/dt = h Psi`).
pub fn dkp_time_derivative(
    psi: &TwoComponentState,
    h: &LinearOperator,
    gf: &GridField,
    p: &ParticleParams,
) -> Result<DkpState> {
    let mut dpsi = h.apply(psi);
    dpsi.scale(-I);
    DkpState::from_reduced(&dpsi, gf, p)
}

#[derive(Clone, Debug, Serialize)]
pub struct DkpEquivalenceReport {
    /// `|H_dkp - H_cffv(N)|_2 / |H_cffv(N)|_2` (spectral norms).
    pub operator_distance: f64,
    /// `max_t |Psi_dkp - Psi_cffv|_2 / |Psi_0|_2`
    pub state_discrepancy: f64,
    /// `max_t |<d, d>|` for `d = Psi_dkp - Psi_cffv` under the `rho_3` metric, relative to `|Psi_0|^2`.
    pub pseudo_discrepancy: f64,
    /// Largest five-component residual seen along the DKP run.
    pub constraint_residual: f64,
    pub equation_residual: f64,
    pub n: f64,
    pub steps: usize,
}

/// Twin evolution of the reduced DKP system and the two-component system with
/// the `N` stored in `p` (equal to `m` for the equivalence, different for a
/// negative control) from the same initial state.
pub fn check_dkp_cffv_equivalence(
    gf: &GridField,
    p: &ParticleParams,
    psi0: &TwoComponentState,
    dt: f64,
    steps: usize,
) -> Result<DkpEquivalenceReport> {
    gf.field.require_stationary("the DKP equivalence check")?;
    let h_dkp = build_dkp_reduced(gf, p)?;
    let h_cffv = build_cffv_hamiltonian(gf, p)?;
    let operator_distance = (&h_dkp - &h_cffv).op_norm()? / h_cffv.op_norm()?.max(f64::MIN_POSITIVE);
    let opts = EvolveOptions { record_every: 1, drift_threshold: f64::INFINITY };
    let (dkp_run, cffv_run) = crate::exec::join(
        || Propagator::cayley(&h_dkp, dt).and_then(|pr| evolve_with(&pr, psi0, steps, opts)),
        || Propagator::cayley(&h_cffv, dt).and_then(|pr| evolve_with(&pr, psi0, steps, opts)),
    );
    let (dkp_run, cffv_run) = (dkp_run?, cffv_run?);
    let scale = psi0.l2_norm().max(f64::MIN_POSITIVE);
    let mut state_discrepancy = 0.0f64;
    let mut pseudo_discrepancy = 0.0f64;
    let mut constraint_residual = 0.0f64;
    let mut equation_residual = 0.0f64;
    for (a, b) in dkp_run.states.iter().zip(&cffv_run.states) {
        let d = a.sub(b)?;
        state_discrepancy = state_discrepancy.max(d.l2_norm() / scale);
        pseudo_discrepancy = pseudo_discrepancy.max(d.pseudo_norm().abs() / (scale * scale));
        let five = DkpState::from_reduced(a, gf, p)?;
        constraint_residual = constraint_residual.max(five.constraint_residual(gf, p));
        let dt_five = dkp_time_derivative(a, &h_dkp, gf, p)?;
        let [r1, r5] = five.equation_residuals(&dt_five, gf, p);
        equation_residual = equation_residual.max(r1).max(r5);
    }
    Ok(DkpEquivalenceReport {
        operator_distance,
        state_discrepancy,
        pseudo_discrepancy,
        constraint_residual,
        equation_residual,
        n: p.n,
        steps,
    })
}
