//! Semiclassical dynamics with the leading quantum corrections.
//!
//! `H_s = eps + e phi + (e hbar^2/8 eps^4) pi.D.pi - (e^2 hbar^2/8 eps^4) pi.(E x H)
//!  - (e^2 hbar^2/8 eps^5) (pi.E)^2` with `D_ij = dE_j/dx_i`. Positions follow
//! `dr/dt = dH_s/dpi`; momenta follow the corrected Lorentz force
//! [`force`]. The force is not derived from `H_s`, so the difference to
//! Hamilton's equations is reported along every trajectory.

use std::io::Write;

use faer::c64;
use serde::Serialize;

use crate::cffv::{build_cffv_hamiltonian, check_charge, evolve_with, EvolveOptions, ParticleParams, Propagator};
use crate::error::{Error, Result};
use crate::fields::{cross, dot, FieldConfig, FieldSample, GridField, Vec3};
use crate::fw::{fw_closed_semiclassical, fw_step_operator, FwOptions, FwTerms};
use crate::operator::{Grid, TwoComponentState};
use crate::packet;

/// Field evaluation for point particles, optionally with the grid window so
/// that trajectories see the same potential as the wave equation.
#[derive(Clone, Debug)]
pub struct FieldModel {
    pub field: FieldConfig,
    pub grid: Option<Grid>,
}

impl FieldModel {
    pub fn raw(field: FieldConfig) -> Self {
        Self { field, grid: None }
    }

    pub fn windowed(field: FieldConfig, grid: Grid) -> Self {
        Self { field, grid: Some(grid) }
    }

    pub fn sample(&self, r: Vec3) -> FieldSample {
        match &self.grid {
            Some(g) => self.field.eval_windowed(g, r),
            None => self.field.eval(r, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhasePoint {
    pub r: Vec3,
    pub pi: Vec3,
    pub t: f64,
}

impl PhasePoint {
    pub fn new(r: Vec3, pi: Vec3) -> Self {
        Self { r, pi, t: 0.0 }
    }

    fn check(&self) -> Result<()> {
        if self.r.iter().chain(&self.pi).chain([&self.t]).all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParams("phase point has non-finite components".into()))
        }
    }
}

fn energy(p: &ParticleParams, pi: Vec3) -> f64 {
    (p.mass * p.mass + dot(pi, pi)).sqrt()
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// `(D pi)_i = sum_j D_ij pi_j`
fn d_pi(s: &FieldSample, pi: Vec3) -> Vec3 {
    std::array::from_fn(|i| (0..3).map(|j| s.de[i][j] * pi[j]).sum())
}

/// `(pi . grad) E`, i.e. `sum_i pi_i D_ij`
fn pi_grad_e(s: &FieldSample, pi: Vec3) -> Vec3 {
    std::array::from_fn(|j| (0..3).map(|i| pi[i] * s.de[i][j]).sum())
}

fn require_stationary(model: &FieldModel) -> Result<()> {
    model.field.require_stationary("semiclassical dynamics")
}

/// Terms of `H_s` at a phase point.
pub fn hs_energy(pt: &PhasePoint, model: &FieldModel, p: &ParticleParams) -> Result<FwTerms<f64>> {
    pt.check()?;
    p.validate()?;
    fw_closed_semiclassical(&model.sample(pt.r), pt.pi, p)
}

fn hs_from_sample(s: &FieldSample, pi: Vec3, p: &ParticleParams) -> Result<f64> {
    Ok(fw_closed_semiclassical(s, pi, p)?.total())
}

/// Induced electric and magnetic dipoles `d = dH_s/dE`, `mu = dH_s/dH`:
/// `d = (e^2 hbar^2/8 eps^4) pi x H - (e^2 hbar^2/4 eps^5) pi (pi.E)`,
/// `mu = -(e^2 hbar^2/8 eps^4) pi x E`.
pub fn induced_dipoles(pt: &PhasePoint, model: &FieldModel, p: &ParticleParams) -> Result<(Vec3, Vec3)> {
    pt.check()?;
    let s = model.sample(pt.r);
    let eps = energy(p, pt.pi);
    if eps == 0.0 {
        return Err(Error::Massless("eps = 0 for a massless particle at rest"));
    }
    let c = p.charge * p.charge * p.hbar_scale * p.hbar_scale;
    let pe = dot(pt.pi, s.e);
    let d = sub(scale(cross(pt.pi, s.h), c / (8.0 * eps.powi(4))), scale(pt.pi, c * pe / (4.0 * eps.powi(5))));
    let mu = scale(cross(pt.pi, s.e), -c / (8.0 * eps.powi(4)));
    Ok((d, mu))
}

/// Central differences of `H_s` with respect to the uniform `E` and `H`
/// components (the potential and the field gradient held fixed), with step `h`.
pub fn dipoles_finite_difference(
    pt: &PhasePoint,
    model: &FieldModel,
    p: &ParticleParams,
    h: f64,
) -> Result<(Vec3, Vec3)> {
    let s0 = model.sample(pt.r);
    let mut d = [0.0; 3];
    let mut mu = [0.0; 3];
    for k in 0..3 {
        let mut plus = s0;
        let mut minus = s0;
        plus.e[k] += h;
        minus.e[k] -= h;
        d[k] = (hs_from_sample(&plus, pt.pi, p)? - hs_from_sample(&minus, pt.pi, p)?) / (2.0 * h);
        let mut plus = s0;
        let mut minus = s0;
        plus.h[k] += h;
        minus.h[k] -= h;
        mu[k] = (hs_from_sample(&plus, pt.pi, p)? - hs_from_sample(&minus, pt.pi, p)?) / (2.0 * h);
    }
    Ok((d, mu))
}

/// `dr/dt = dH_s/dpi`
pub fn velocity(pt: &PhasePoint, model: &FieldModel, p: &ParticleParams) -> Result<Vec3> {
    let s = model.sample(pt.r);
    velocity_at(&s, pt.pi, p)
}

fn velocity_at(s: &FieldSample, pi: Vec3, p: &ParticleParams) -> Result<Vec3> {
    let eps = energy(p, pi);
    if eps == 0.0 {
        return Err(Error::Massless("velocity undefined at pi = 0 for m = 0"));
    }
    let e = p.charge;
    let hb2 = p.hbar_scale * p.hbar_scale;
    let a = e * hb2 / 8.0;
    let b = -e * e * hb2 / 8.0;
    let v = s.e_cross_h();
    let dp = d_pi(s, pi);
    let pd = pi_grad_e(s, pi);
    let sym = add(dp, pd);
    let pdp = dot(pi, dp);
    let pv = dot(pi, v);
    let pe = dot(pi, s.e);
    let (e4, e5, e6, e7) = (eps.powi(4), eps.powi(5), eps.powi(6), eps.powi(7));
    let mut out = scale(pi, 1.0 / eps);
    out = add(out, scale(add(scale(pi, -4.0 * pdp / e6), scale(sym, 1.0 / e4)), a));
    out = add(out, scale(add(scale(pi, -4.0 * pv / e6), scale(v, 1.0 / e4)), b));
    out = add(out, scale(add(scale(pi, -5.0 * pe * pe / e7), scale(s.e, 2.0 * pe / e5)), b));
    Ok(out)
}

/// The five contributions to `dpi/dt`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ForceTerms {
    /// `e E`
    pub electric: Vec3,
    /// `(e/eps) pi x H`
    pub magnetic: Vec3,
    /// `(e^2 hbar^2/8 eps^4) [(pi.grad)(E x H) - (H x grad)(pi.E)]`
    pub gradient: Vec3,
    /// `(e^3 hbar^2/8 eps^4) [H^2 E - H (E.H)]`
    pub field_product: Vec3,
    /// `-(e^3 hbar^2/4 eps^5) (pi.E) (E x H)`
    pub polarization: Vec3,
}

impl ForceTerms {
    pub fn lorentz(&self) -> Vec3 {
        add(self.electric, self.magnetic)
    }

    pub fn corrections(&self) -> Vec3 {
        add(add(self.gradient, self.field_product), self.polarization)
    }

    pub fn total(&self) -> Vec3 {
        add(self.lorentz(), self.corrections())
    }
}

pub fn force_terms(pt: &PhasePoint, model: &FieldModel, p: &ParticleParams) -> Result<ForceTerms> {
    require_stationary(model)?;
    pt.check()?;
    let s = model.sample(pt.r);
    force_at(&s, pt.pi, p)
}

fn force_at(s: &FieldSample, pi: Vec3, p: &ParticleParams) -> Result<ForceTerms> {
    let eps = energy(p, pi);
    if eps == 0.0 {
        return Err(Error::Massless("eps = 0 for a massless particle at rest"));
    }
    let e = p.charge;
    let hb2 = p.hbar_scale * p.hbar_scale;
    let h = s.h;
    let v = s.e_cross_h();
    // H is uniform, so (pi.grad)(E x H) = ((pi.grad) E) x H and
    // (H x grad)(pi.E) = H x grad(pi.E) = H x (D pi).
    let bracket = sub(cross(pi_grad_e(s, pi), h), cross(h, d_pi(s, pi)));
    let e4 = eps.powi(4);
    Ok(ForceTerms {
        electric: scale(s.e, e),
        magnetic: scale(cross(pi, h), e / eps),
        gradient: scale(bracket, e * e * hb2 / (8.0 * e4)),
        field_product: scale(sub(scale(s.e, dot(h, h)), scale(h, dot(s.e, h))), e.powi(3) * hb2 / (8.0 * e4)),
        polarization: scale(v, -e.powi(3) * hb2 * dot(pi, s.e) / (4.0 * e4 * eps)),
    })
}

/// Corrected Lorentz force `dpi/dt`.
pub fn force(pt: &PhasePoint, model: &FieldModel, p: &ParticleParams) -> Result<Vec3> {
    Ok(force_terms(pt, model, p)?.total())
}

/// `dpi/dt` from Hamilton's equations of `H_s` in kinetic variables,
/// `-dH_s/dr + e (dH_s/dpi) x H`, with the `r` derivative of the quantum
/// terms taken by central differences of step `h`.
pub fn hamilton_force(pt: &PhasePoint, model: &FieldModel, p: &ParticleParams, h: f64) -> Result<Vec3> {
    let s = model.sample(pt.r);
    let vel = velocity_at(&s, pt.pi, p)?;
    let quantum = |r: Vec3| -> Result<f64> { Ok(fw_closed_semiclassical(&model.sample(r), pt.pi, p)?.quantum()) };
    let mut grad = [0.0; 3];
    for (k, g) in grad.iter_mut().enumerate() {
        let mut rp = pt.r;
        let mut rm = pt.r;
        rp[k] += h;
        rm[k] -= h;
        *g = (quantum(rp)? - quantum(rm)?) / (2.0 * h);
    }
    let e = p.charge;
    Ok(add(sub(scale(s.e, e), grad), scale(cross(vel, s.h), e)))
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySample {
    pub point: PhasePoint,
    pub terms: FwTerms<f64>,
    pub d: Vec3,
    pub mu: Vec3,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// `max_t |H_s(t) - H_s(0)| / |H_s(0)|`
    pub energy_drift: f64,
    /// `energy_drift / t_end`
    pub drift_rate: f64,
    /// `max_t |force - hamilton_force| / |force|`
    pub force_mismatch: f64,
}

pub const TRAJECTORY_HEADER: [&str; 19] = [
    "t", "x", "y", "z", "pi_x", "pi_y", "pi_z", "kinetic", "coulomb", "quadrupole", "mixed", "electric",
    "total", "d_x", "d_y", "d_z", "mu_x", "mu_y", "mu_z",
];

impl Trajectory {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRAJECTORY_HEADER)?;
        for s in &self.samples {
            let t = &s.terms;
            let row: Vec<f64> = [s.point.t]
                .into_iter()
                .chain(s.point.r)
                .chain(s.point.pi)
                .chain([t.kinetic, t.coulomb, t.quadrupole, t.mixed, t.electric, t.total()])
                .chain(s.d)
                .chain(s.mu)
                .collect();
            out.write_record(row.iter().map(|x| x.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("a trajectory holds at least the initial sample")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrajectoryOptions {
    /// Keep every `record_every`-th step (the first and last are always kept).
    pub record_every: usize,
    /// Abort when the relative energy drift exceeds this.
    pub max_drift: f64,
    /// Required number of steps per cyclotron period.
    pub min_steps_per_turn: f64,
    /// Step for the position derivative in the force diagnostic.
    pub fd_step: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self { record_every: 1, max_drift: 1e-2, min_steps_per_turn: 50.0, fd_step: 1e-4 }
    }
}

/// `2 pi eps / |e H|`, infinite without a magnetic field.
pub fn cyclotron_period(pt: &PhasePoint, model: &FieldModel, p: &ParticleParams) -> f64 {
    let eh = (p.charge * norm(model.sample(pt.r).h)).abs();
    if eh == 0.0 {
        f64::INFINITY
    } else {
        2.0 * std::f64::consts::PI * energy(p, pt.pi) / eh
    }
}

fn sample_at(pt: PhasePoint, model: &FieldModel, p: &ParticleParams) -> Result<TrajectorySample> {
    let terms = hs_energy(&pt, model, p)?;
    let (d, mu) = induced_dipoles(&pt, model, p)?;
    Ok(TrajectorySample { point: pt, terms, d, mu })
}

/// Fixed-step RK4 integration of `(dr/dt, dpi/dt) = (dH_s/dpi, force)`.
/// The step is adjusted down so that `t_end` is hit exactly.
pub fn integrate_trajectory(
    pt0: &PhasePoint,
    model: &FieldModel,
    p: &ParticleParams,
    t_end: f64,
    dt: f64,
    opts: TrajectoryOptions,
) -> Result<Trajectory> {
    require_stationary(model)?;
    p.validate()?;
    pt0.check()?;
    if !(t_end > 0.0 && t_end.is_finite() && dt > 0.0 && dt.is_finite()) {
        return Err(Error::Precondition(format!("need t_end > 0 and dt > 0 (got {t_end}, {dt})")));
    }
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let period = cyclotron_period(pt0, model, p);
    if h * opts.min_steps_per_turn > period {
        return Err(Error::Precondition(format!(
            "dt = {h} does not resolve the cyclotron period {period} ({} steps per turn required)",
            opts.min_steps_per_turn
        )));
    }
    let deriv = |r: Vec3, pi: Vec3| -> Result<(Vec3, Vec3)> {
        let s = model.sample(r);
        Ok((velocity_at(&s, pi, p)?, force_at(&s, pi, p)?.total()))
    };
    let first = sample_at(PhasePoint { t: pt0.t, ..*pt0 }, model, p)?;
    let e0 = first.terms.total();
    let e_scale = e0.abs().max(f64::MIN_POSITIVE);
    let mut samples = vec![first];
    let mut energy_drift = 0.0f64;
    let mut force_mismatch = 0.0f64;
    let (mut r, mut pi) = (pt0.r, pt0.pi);
    let every = opts.record_every.max(1);
    for k in 1..=steps {
        let (k1r, k1p) = deriv(r, pi)?;
        let (k2r, k2p) = deriv(add(r, scale(k1r, h / 2.0)), add(pi, scale(k1p, h / 2.0)))?;
        let (k3r, k3p) = deriv(add(r, scale(k2r, h / 2.0)), add(pi, scale(k2p, h / 2.0)))?;
        let (k4r, k4p) = deriv(add(r, scale(k3r, h)), add(pi, scale(k3p, h)))?;
        let comb = |a: Vec3, b: Vec3, c: Vec3, d: Vec3| scale(add(add(a, scale(add(b, c), 2.0)), d), h / 6.0);
        r = add(r, comb(k1r, k2r, k3r, k4r));
        pi = add(pi, comb(k1p, k2p, k3p, k4p));
        let t = pt0.t + k as f64 * h;
        let pt = PhasePoint { r, pi, t };
        if pt.check().is_err() {
            return Err(Error::Unstable { t, reason: "non-finite phase point".into() });
        }
        let en = hs_energy(&pt, model, p)?.total();
        let drift = (en - e0).abs() / e_scale;
        energy_drift = energy_drift.max(drift);
        if drift > opts.max_drift {
            return Err(Error::Unstable { t, reason: format!("energy drift {drift:.3e} exceeds {}", opts.max_drift) });
        }
        if k % every == 0 || k == steps {
            let f = force(&pt, model, p)?;
            let fh = hamilton_force(&pt, model, p, opts.fd_step)?;
            force_mismatch = force_mismatch.max(norm(sub(f, fh)) / norm(f).max(f64::MIN_POSITIVE));
            samples.push(sample_at(pt, model, p)?);
        }
    }
    Ok(Trajectory { samples, energy_drift, drift_rate: energy_drift / t_end, force_mismatch })
}

/// `count` reproducible phase points with positions in `[-r_max, r_max]^dim`
/// and momenta in `[-pi_max, pi_max]^dim` (remaining axes zero).
pub fn sample_points(seed: u64, count: usize, dim: usize, r_max: f64, pi_max: f64) -> Vec<PhasePoint> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut pt = PhasePoint::new([0.0; 3], [0.0; 3]);
            for a in 0..dim.min(3) {
                pt.r[a] = rng.random_range(-r_max..=r_max);
                pt.pi[a] = rng.random_range(-pi_max..=pi_max);
            }
            pt
        })
        .collect()
}

/// Gaussian wavepacket parameters.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PacketSpec {
    pub center: Vec3,
    pub momentum: Vec3,
    pub width: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct EhrenfestOptions {
    pub t_end: f64,
    /// Number of comparison times after `t = 0`.
    pub samples: usize,
    pub tol: f64,
    /// RK4 step of the classical trajectory.
    pub dt_classical: f64,
}

impl Default for EhrenfestOptions {
    fn default() -> Self {
        Self { t_end: 5.0, samples: 10, tol: 0.02, dt_classical: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EhrenfestSample {
    pub t: f64,
    pub r_quantum: Vec3,
    pub pi_quantum: Vec3,
    pub r_classical: Vec3,
    pub pi_classical: Vec3,
}

#[derive(Clone, Debug, Serialize)]
pub struct EhrenfestReport {
    pub samples: Vec<EhrenfestSample>,
    /// `max_t |r_q - r_c| / max_t |r_c(t) - r_c(0)|`
    pub position_deviation: f64,
    /// `max_t |pi_q - pi_c|` relative to the larger of `max_t |pi_c(t) - pi_c(0)|`
    /// and `max_t |pi_c(t)|`.
    pub momentum_deviation: f64,
    /// Reduced de Broglie wavelength `hbar / max_t |pi_c(t)|`.
    pub de_broglie: f64,
    /// Field inhomogeneity length `|E| / |dE/dx|` at the initial centroid
    /// (infinite for uniform fields).
    pub inhomogeneity_length: f64,
    /// Share of the state outside the positive FW branch, largest over time.
    pub negative_branch: f64,
    pub tol: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Quantum centroid dynamics versus the semiclassical trajectory. The
/// initial state is a Gaussian in the upper FW component mapped back with
/// `U^-1`; at each comparison time the state is transformed with `U` and the
/// centroid and mean kinetic momentum of the upper component are taken. The
/// state is propagated with the exact propagator `exp(-i H t)`.
pub fn ehrenfest_compare(
    grid: &Grid,
    field: &FieldConfig,
    p: &ParticleParams,
    spec: &PacketSpec,
    opts: &EhrenfestOptions,
) -> Result<EhrenfestReport> {
    field.require_stationary("the Ehrenfest comparison")?;
    if opts.samples == 0 || !(opts.t_end > 0.0) {
        return Err(Error::Precondition("Ehrenfest comparison needs t_end > 0 and samples >= 1".into()));
    }
    let gf = GridField::new(grid, field, p.charge)?;
    check_charge(&gf, p)?;
    let h = build_cffv_hamiltonian(&gf, p)?;
    let step = fw_step_operator(&gf, p, &FwOptions::default())?;
    let g0 = packet::gaussian(grid, spec.center, spec.momentum, spec.width);
    let n = grid.size();
    let fw0 = TwoComponentState::new(*grid, g0, vec![c64::new(0.0, 0.0); n])?;
    let psi0 = step.u_inv.apply(&fw0);
    let dt = opts.t_end / opts.samples as f64;
    let prop = Propagator::exact(&h, dt)?;
    let run = evolve_with(&prop, &psi0, opts.samples, EvolveOptions { record_every: 1, drift_threshold: 1e-6 })?;

    let observe = |state: &TwoComponentState, reference: Vec3| -> (Vec3, Vec3, f64) {
        let fw = step.u.apply(state);
        let up = &fw.upper;
        let r = packet::centroid(grid, up, reference);
        let mut pi = [0.0; 3];
        for (a, m) in gf.pi.iter().enumerate() {
            if let Some(m) = m {
                pi[a] = packet::expectation(grid, m, up).re;
            }
        }
        let pu = packet::norm(grid, up).powi(2);
        let pl = packet::norm(grid, &fw.lower).powi(2);
        (r, pi, pl / (pu + pl).max(f64::MIN_POSITIVE))
    };

    let (r0, pi0, neg0) = observe(&run.states[0], spec.center);
    let model = FieldModel::windowed(field.clone(), *grid);
    let traj_opts = TrajectoryOptions { record_every: 1, ..TrajectoryOptions::default() };
    let dt_c = opts.dt_classical.min(dt);
    let traj = integrate_trajectory(&PhasePoint::new(r0, pi0), &model, p, opts.t_end, dt_c, traj_opts)?;
    let classical_at = |t: f64| -> TrajectorySample {
        traj.samples
            .iter()
            .min_by(|a, b| (a.point.t - t).abs().total_cmp(&(b.point.t - t).abs()))
            .cloned()
            .expect("trajectory not empty")
    };

    let mut samples = Vec::new();
    let mut negative_branch = neg0;
    let mut dr_max = 0.0f64;
    let mut dp_max = 0.0f64;
    let mut r_scale = 0.0f64;
    let mut p_scale = norm(pi0);
    let mut p_extent = 0.0f64;
    let mut last_r = r0;
    for (t, state) in run.times.iter().zip(&run.states) {
        let (rq, pq, neg) = observe(state, last_r);
        last_r = rq;
        negative_branch = negative_branch.max(neg);
        let c = classical_at(*t);
        dr_max = dr_max.max(norm(sub(rq, c.point.r)));
        dp_max = dp_max.max(norm(sub(pq, c.point.pi)));
        r_scale = r_scale.max(norm(sub(c.point.r, r0)));
        p_scale = p_scale.max(norm(c.point.pi));
        p_extent = p_extent.max(norm(sub(c.point.pi, pi0)));
        samples.push(EhrenfestSample { t: *t, r_quantum: rq, pi_quantum: pq, r_classical: c.point.r, pi_classical: c.point.pi });
    }
    let position_deviation = dr_max / r_scale.max(f64::MIN_POSITIVE);
    let momentum_deviation = dp_max / p_scale.max(p_extent).max(f64::MIN_POSITIVE);
    let pass = position_deviation <= opts.tol && momentum_deviation <= opts.tol;
    let p_max = traj.samples.iter().map(|s| norm(s.point.pi)).fold(0.0, f64::max);
    let de_broglie = if p_max > 0.0 { p.hbar_scale.max(1.0) / p_max } else { f64::INFINITY };
    let s0 = model.sample(r0);
    let grad = s0.de.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let inhomogeneity_length = if grad == 0.0 { f64::INFINITY } else { norm(s0.e) / grad };
    let mut warnings = Vec::new();
    if 10.0 * de_broglie > inhomogeneity_length {
        warnings.push(format!(
            "de Broglie wavelength {de_broglie:.3e} is not small against the field inhomogeneity length {inhomogeneity_length:.3e}"
        ));
    }
    Ok(EhrenfestReport {
        samples,
        position_deviation,
        momentum_deviation,
        de_broglie,
        inhomogeneity_length,
        negative_branch,
        tol: opts.tol,
        pass,
        warnings,
    })
}
