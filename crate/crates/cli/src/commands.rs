use std::path::Path;

use anyhow::Result;
use serde_json::{json, Value};

use kgfw_core::c64;
use kgfw_core::cffv::{
    build_cffv_hamiltonian, evolve_cffv, split_meo, EvolveOptions, ParticleParams,
};
use kgfw_core::config::{Config, HamiltonianKind};
use kgfw_core::dkp::{beta_algebra, check_dkp_cffv_equivalence};
use kgfw_core::fields::{FieldConfig, FieldKind, GridField};
use kgfw_core::fw::{
    exact_fw, fw_closed_semiclassical, fw_hamiltonian_closed, fw_hamiltonian_numeric, fw_step_operator,
    interior_levels, landau_level, verify_commutator_identities, verify_n_independence, FwOptions,
};
use kgfw_core::operator::spectral::real_spectrum;
use kgfw_core::operator::{
    check_pseudo_unitary, plane_wave, pseudo_hermitian_residual, pseudo_inner, Grid, TwoComponentState,
};
use kgfw_core::packet;
use kgfw_core::semiclassical::{
    cyclotron_period, dipoles_finite_difference, ehrenfest_compare, force_terms, induced_dipoles,
    integrate_trajectory, sample_points, EhrenfestOptions, FieldModel, PacketSpec, PhasePoint, TrajectoryOptions,
};

use crate::report::{num, Check, RunReport, Table};
use crate::{OutputFormat, Suite};

/// Parsed configuration with the derived objects every command needs.
pub struct Setup {
    pub cfg: Config,
    pub grid: Grid,
    pub field: FieldConfig,
    pub params: ParticleParams,
    pub seed: u64,
    pub format: OutputFormat,
}

impl Setup {
    pub fn new(cfg: Config, field: FieldConfig, seed: u64, format: OutputFormat) -> Result<Self> {
        let grid = cfg.grid()?;
        let p = &cfg.particle;
        let params = ParticleParams::new(p.mass, p.charge, p.cffv_n, p.hbar_scale)?;
        Ok(Self { cfg, grid, field, params, seed, format })
    }

    fn grid_field(&self) -> Result<GridField> {
        Ok(GridField::new(&self.grid, &self.field, self.params.charge)?)
    }

    fn fw_options(&self) -> FwOptions {
        if self.params.mass == 0.0 || self.cfg.spectrum.exclude_zero_mode {
            FwOptions::massless()
        } else {
            FwOptions::default()
        }
    }

    fn windowed(&self) -> bool {
        self.field.window_width != Some(0.0)
    }

    fn initial_state(&self, gf: &GridField) -> Result<TwoComponentState> {
        let pk = &self.cfg.packet;
        let n = self.grid.size();
        let upper = if pk.width <= 0.0 {
            plane_wave_state(&self.grid, pk.momentum)
        } else {
            packet::gaussian(&self.grid, pk.center, pk.momentum, pk.width)
        };
        let fw = TwoComponentState::new(self.grid, upper, vec![c64::new(0.0, 0.0); n])?;
        let step = fw_step_operator(gf, &self.params.with_n(self.params.n.abs())?, &self.fw_options())?;
        Ok(step.u_inv.apply(&fw))
    }
}

/// Product of lattice plane waves with the wave numbers closest to `k`.
fn plane_wave_state(grid: &Grid, k: [f64; 3]) -> Vec<c64> {
    let dk = 2.0 * std::f64::consts::PI / grid.length();
    let mut v = vec![c64::new(1.0, 0.0); grid.size()];
    for (a, ka) in k.iter().enumerate().take(grid.dim()) {
        let w = plane_wave(grid, a, (ka / dk).round() as i64);
        v.iter_mut().zip(w).for_each(|(x, y)| *x *= y);
    }
    packet::normalize(grid, &mut v);
    v
}

fn lattice_momentum(grid: &Grid, k: [f64; 3]) -> [f64; 3] {
    let dk = 2.0 * std::f64::consts::PI / grid.length();
    let mut out = [0.0; 3];
    for a in 0..grid.dim() {
        out[a] = (k[a] / dk).round() * dk;
    }
    out
}

fn branch(e: f64, scale: f64) -> &'static str {
    if e.abs() <= 1e-6 * scale.max(1.0) {
        "zero"
    } else if e > 0.0 {
        "positive"
    } else {
        "negative"
    }
}

pub fn spectrum(s: &Setup, out: &Path, report: &mut RunReport) -> Result<()> {
    let gf = s.grid_field()?;
    let p = s.params;
    let (values, tol_label) = match s.cfg.spectrum.hamiltonian {
        HamiltonianKind::Cffv => (real_spectrum(&build_cffv_hamiltonian(&gf, &p)?, 1e-6)?, "cffv"),
        HamiltonianKind::FwExact => {
            let meo = split_meo(&gf, &p)?;
            let x = exact_fw(&meo, s.field.stationary, &s.fw_options())?;
            report.check(Check::at_most("fw-exact off-diagonal blocks", x.off_diagonal, 1e-10));
            let levels = s.cfg.spectrum.levels;
            let hmag = s.field.h.iter().map(|x| x * x).sum::<f64>().sqrt();
            if hmag > 0.0 && !gf.has_scalar_potential() && levels > 0 {
                let found = interior_levels(&x.h_fw, levels, 0.3, 0.9, 1e-4)?;
                let mut table = Table::new(&["n", "numeric", "landau", "relative_error"]);
                let mut worst = 0.0f64;
                for (n, e) in found.iter().enumerate() {
                    let want = landau_level(p.mass, p.charge, hmag, n);
                    let rel = (e - want).abs() / want;
                    worst = worst.max(rel);
                    table.push(vec![json!(n), num(*e), num(want), num(rel)]);
                }
                report.check(Check::at_least("Landau levels found", found.len() as f64, levels as f64));
                report.check(Check::at_most("Landau levels relative error", worst, 0.01));
                report.outputs.push(table.write(out, "landau", s.format)?.display().to_string());
            }
            (real_spectrum(&x.h_fw, 1e-10)?, "fw-exact")
        }
        HamiltonianKind::FwClosed => {
            let terms = fw_hamiltonian_closed(&gf, &p, &s.fw_options())?;
            (real_spectrum(&terms.total(), 1e-10)?, "fw-closed")
        }
    };
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut table = Table::new(&["index", "eigenvalue", "branch"]);
    for (i, v) in values.iter().enumerate() {
        table.push(vec![json!(i), num(*v), json!(branch(*v, scale))]);
    }
    if s.field.kind == FieldKind::Free || p.charge == 0.0 {
        // Closed form: +-sqrt(m^2 + p^2) per lattice momentum.
        let mut want: Vec<f64> = lattice_energies(&s.grid, p.mass).into_iter().flat_map(|e| [e, -e]).collect();
        want.sort_by(f64::total_cmp);
        let skip_zero = p.mass == 0.0;
        let mut worst = 0.0f64;
        for (a, b) in values.iter().zip(&want) {
            if skip_zero && *b == 0.0 {
                continue;
            }
            worst = worst.max((a - b).abs() / b.abs());
        }
        report.check(Check::at_most("free spectrum vs sqrt(m^2 + p^2)", worst, 1e-10));
    }
    report.outputs.push(table.write(out, "spectrum", s.format)?.display().to_string());
    report.results = json!({
        "hamiltonian": tol_label,
        "count": values.len(),
        "positive": values.iter().filter(|v| branch(**v, scale) == "positive").count(),
        "negative": values.iter().filter(|v| branch(**v, scale) == "negative").count(),
        "lowest_positive": values.iter().copied().filter(|v| branch(*v, scale) == "positive").fold(f64::INFINITY, f64::min),
    });
    Ok(())
}

fn lattice_energies(grid: &Grid, mass: f64) -> Vec<f64> {
    let ks = grid.momenta();
    (0..grid.size())
        .map(|site| {
            let idx = grid.unravel(site);
            let p2: f64 = (0..grid.dim()).map(|a| ks[idx[a]].powi(2)).sum();
            (mass * mass + p2).sqrt()
        })
        .collect()
}

pub fn verify(s: &Setup, suite: Suite, out: &Path, report: &mut RunReport) -> Result<()> {
    match suite {
        Suite::Pseudo => verify_pseudo(s, report),
        Suite::Nindep => verify_nindep(s, report),
        Suite::Commutators => verify_commutators(s, report),
        Suite::Dkp => verify_dkp(s, report),
        Suite::Hbar => verify_hbar(s, out, report),
    }
}

fn random_state(grid: &Grid, seed: u64) -> TwoComponentState {
    // Deterministic pseudo-random smooth state: packets at seeded positions.
    let pts = sample_points(seed, 2, grid.dim(), grid.length() / 8.0, 1.0);
    let w = grid.length() / 12.0;
    let up = packet::gaussian(grid, pts[0].r, pts[0].pi, w);
    let lo = packet::gaussian(grid, pts[1].r, pts[1].pi, w);
    TwoComponentState::new(*grid, up, lo).expect("sizes match")
}

fn verify_pseudo(s: &Setup, report: &mut RunReport) -> Result<()> {
    let gf = s.grid_field()?;
    let p = s.params;
    let h = build_cffv_hamiltonian(&gf, &p)?;
    let herm = pseudo_hermitian_residual(&h);
    report.check(Check::at_most("pseudo-Hermiticity of H", herm, 1e-12));
    let mut results = json!({ "pseudo_hermitian_residual": herm });
    let a = random_state(&s.grid, s.seed);
    let b = random_state(&s.grid, s.seed.wrapping_add(1));
    let step_p = p.with_n(p.n.abs())?;
    let mut ops = vec![("first FW transformation", fw_step_operator(&gf, &step_p, &s.fw_options())?.u)];
    let meo = split_meo(&gf, &step_p)?;
    if meo.require_commuting(1e-10).is_ok() && s.field.stationary {
        ops.push(("exact FW transformation", exact_fw(&meo, true, &s.fw_options())?.u));
    }
    for (name, u) in ops {
        let (_, res) = check_pseudo_unitary(&u, 1e-10);
        report.check(Check::at_most(format!("pseudo-unitarity of the {name}"), res, 1e-10));
        let before = pseudo_inner(&a, &b)?;
        let after = pseudo_inner(&u.apply(&a), &u.apply(&b))?;
        let rel = (after - before).norm() / (a.l2_norm() * b.l2_norm());
        report.check(Check::at_most(format!("pseudo-inner product invariance under the {name}"), rel, 1e-10));
        results[name] = json!({ "pseudo_unitary_residual": res, "inner_product_change": rel });
    }
    report.results = results;
    Ok(())
}

fn default_n_list(p: &ParticleParams) -> Vec<f64> {
    if p.mass > 0.0 {
        vec![p.mass, 2.0 * p.mass, 5.0 * p.mass]
    } else {
        vec![0.5, 1.0, 3.0]
    }
}

fn verify_nindep(s: &Setup, report: &mut RunReport) -> Result<()> {
    let gf = s.grid_field()?;
    let list = if s.cfg.verify.n_list.is_empty() { default_n_list(&s.params) } else { s.cfg.verify.n_list.clone() };
    let tol = s.cfg.verify.tol;
    let r = verify_n_independence(&gf, &s.params, &list, tol, &s.fw_options())?;
    report.check(Check::at_most("N-independence of the staged FW Hamiltonian", r.staged, tol));
    report.check(Check::at_most("N-independence of the series FW Hamiltonian", r.series, tol));
    report.check(Check::at_most("N-independence after the first transformation", r.first_stage, tol));
    if s.params.charge != 0.0 || s.field.kind != FieldKind::Free {
        report.check(Check::at_least("two-component Hamiltonians differ across N (control)", r.cffv, 1e-2));
    }
    report.results = serde_json::to_value(&r)?;
    Ok(())
}

fn verify_commutators(s: &Setup, report: &mut RunReport) -> Result<()> {
    let gf = s.grid_field()?;
    let packets = packet::interior_packets(&s.grid, 3, lattice_momentum(&s.grid, s.cfg.packet.momentum));
    let r = verify_commutator_identities(&gf, &packets)?;
    let tol = if s.windowed() { 1e-4 } else { 1e-8 };
    report.check(Check::at_most("[pi^2, e phi] identity", r.single, tol));
    report.check(Check::at_most("[pi^2, [pi^2, e phi]] identity", r.double, tol));
    report.results = json!({ "report": r, "windowed": s.windowed(), "tolerance": tol });
    Ok(())
}

fn verify_dkp(s: &Setup, report: &mut RunReport) -> Result<()> {
    let alg = beta_algebra();
    report.check(Check::at_most("beta matrices have zero trace", alg.max_trace, 0.0));
    report.check(Check::at_most(
        "trilinear beta algebra (best metric sign convention)",
        alg.residual_mostly_minus.min(alg.residual_mostly_plus),
        0.0,
    ));
    let gf = s.grid_field()?;
    let p = s.params.with_n(s.params.mass.max(f64::MIN_POSITIVE))?;
    let psi0 = random_state(&s.grid, s.seed);
    let v = &s.cfg.verify;
    let twin = check_dkp_cffv_equivalence(&gf, &p, &psi0, v.dt, v.steps)?;
    report.check(Check::at_most("reduced DKP operator equals two-component N = m", twin.operator_distance, 1e-10));
    report.check(Check::at_most("twin evolution discrepancy", twin.state_discrepancy, 1e-8));
    report.check(Check::at_most("five-component constraints along the run", twin.constraint_residual, 1e-10));
    report.check(Check::at_most("five-component equations along the run", twin.equation_residual, 1e-8));
    let control = check_dkp_cffv_equivalence(&gf, &p.with_n(2.0 * p.mass)?, &psi0, v.dt, v.steps)?;
    report.check(Check::at_least("mismatched N = 2m diverges (control)", control.state_discrepancy, 1e-6));
    report.results = json!({ "algebra": alg, "twin": twin, "control": control });
    Ok(())
}

fn verify_hbar(s: &Setup, out: &Path, report: &mut RunReport) -> Result<()> {
    let p1 = s.params.with_hbar_scale(1.0)?;
    let p2 = s.params.with_hbar_scale(2.0)?;
    let model = FieldModel::windowed(s.field.clone(), s.grid);
    let pts = sample_points(s.seed, s.cfg.verify.samples.max(1), s.grid.dim(), s.grid.length() / 8.0, 1.5);
    let mut worst_hs = 0.0f64;
    let mut worst_force = 0.0f64;
    let mut table = Table::new(&["x", "y", "z", "pi_x", "pi_y", "pi_z", "quantum_1", "quantum_2", "ratio"]);
    for pt in &pts {
        if s.params.mass == 0.0 && pt.pi == [0.0; 3] {
            continue;
        }
        let a = fw_closed_semiclassical(&model.sample(pt.r), pt.pi, &p1)?;
        let b = fw_closed_semiclassical(&model.sample(pt.r), pt.pi, &p2)?;
        for (x, y) in [(a.quadrupole, b.quadrupole), (a.mixed, b.mixed), (a.electric, b.electric)] {
            if x != 0.0 {
                worst_hs = worst_hs.max((y / x - 4.0).abs() / 4.0);
            }
        }
        if s.field.stationary {
            let fa = force_terms(pt, &model, &p1)?.corrections();
            let fb = force_terms(pt, &model, &p2)?.corrections();
            for k in 0..3 {
                if fa[k] != 0.0 {
                    worst_force = worst_force.max((fb[k] / fa[k] - 4.0).abs() / 4.0);
                }
            }
        }
        let ratio = if a.quantum() != 0.0 { b.quantum() / a.quantum() } else { f64::NAN };
        table.push(
            pt.r.iter().chain(&pt.pi).map(|x| num(*x)).chain([num(a.quantum()), num(b.quantum()), num(ratio)]).collect(),
        );
    }
    report.check(Check::at_most("semiclassical quantum terms scale as hbar^2", worst_hs, 1e-12));
    report.check(Check::at_most("force corrections scale as hbar^2", worst_force, 1e-12));
    let gf = s.grid_field()?;
    let opts = s.fw_options();
    let mut numeric = Value::Null;
    if s.field.stationary {
        let q1 = fw_hamiltonian_numeric(&gf, &p1, &opts)?.quantum();
        let q2 = fw_hamiltonian_numeric(&gf, &p2, &opts)?.quantum();
        let n1 = q1.norm();
        let rel = if n1 > 0.0 { q2.distance(&q1.scale_real(4.0)) / (4.0 * n1) } else { 0.0 };
        report.check(Check::at_most("series correction terms scale as hbar^2", rel, 1e-6));
        numeric = json!({ "series_relative_deviation": rel, "series_norm": n1 });
    }
    report.outputs.push(table.write(out, "hbar_scaling", s.format)?.display().to_string());
    report.results = json!({ "points": pts.len(), "semiclassical_worst": worst_hs, "force_worst": worst_force, "numeric": numeric });
    Ok(())
}

pub fn evolve(s: &Setup, out: &Path, report: &mut RunReport) -> Result<()> {
    let gf = s.grid_field()?;
    let p = s.params;
    let ev = &s.cfg.evolve;
    let h = build_cffv_hamiltonian(&gf, &p)?;
    let psi0 = s.initial_state(&gf)?;
    let opts = EvolveOptions { record_every: ev.record_every, drift_threshold: ev.drift_threshold };
    let run = evolve_cffv(&psi0, &h, ev.dt, ev.steps, opts)?;
    report.check(Check::at_most("pseudo-norm drift", run.max_drift, ev.drift_threshold));

    let mut obs = Table::new(&["t", "pseudo_norm", "l2_norm", "x", "y", "z", "overlap_re", "overlap_im"]);
    let mut states = Table::new(&["t", "site", "x", "y", "z", "upper_re", "upper_im", "lower_re", "lower_im"]);
    let n0 = psi0.pseudo_norm();
    let mut phase_error = 0.0f64;
    let free_plane = s.cfg.packet.width <= 0.0 && (p.charge == 0.0 || s.field.kind == FieldKind::Free);
    let k = lattice_momentum(&s.grid, s.cfg.packet.momentum);
    let energy = (p.mass * p.mass + k.iter().map(|x| x * x).sum::<f64>()).sqrt();
    // The implicit-midpoint step advances the phase by 2 atan(E dt / 2) per step.
    let cayley_rate = 2.0 * (energy * ev.dt / 2.0).atan() / ev.dt;
    let mut last = s.cfg.packet.center;
    for (t, st) in run.times.iter().zip(&run.states) {
        let overlap = pseudo_inner(&psi0, st)? / n0;
        let c = packet::centroid(&s.grid, &kgfw_core::cffv::project_kg(st), last);
        last = c;
        obs.push(vec![
            num(*t),
            num(st.pseudo_norm()),
            num(st.l2_norm()),
            num(c[0]),
            num(c[1]),
            num(c[2]),
            num(overlap.re),
            num(overlap.im),
        ]);
        if free_plane {
            let want = c64::from_polar(1.0, -cayley_rate * t);
            phase_error = phase_error.max((overlap - want).norm());
        }
        for site in 0..s.grid.size() {
            let r = s.grid.position(site);
            states.push(vec![
                num(*t),
                json!(site),
                num(r[0]),
                num(r[1]),
                num(r[2]),
                num(st.upper[site].re),
                num(st.upper[site].im),
                num(st.lower[site].re),
                num(st.lower[site].im),
            ]);
        }
    }
    if free_plane {
        report.check(Check::at_most("plane-wave phase vs exact midpoint phase", phase_error, 1e-10));
    }
    report.outputs.push(obs.write(out, "evolve_observables", s.format)?.display().to_string());
    report.outputs.push(states.write(out, "evolve_states", s.format)?.display().to_string());
    report.results = json!({
        "steps": ev.steps,
        "dt": ev.dt,
        "max_drift": run.max_drift,
        "plane_wave": free_plane,
        "plane_wave_energy": if free_plane { num(energy) } else { Value::Null },
    });
    Ok(())
}

pub fn trajectory(s: &Setup, out: &Path, report: &mut RunReport) -> Result<()> {
    let tr = &s.cfg.trajectory;
    let model = FieldModel::windowed(s.field.clone(), s.grid);
    let pt0 = PhasePoint::new(tr.r0, tr.pi0);
    let traj = integrate_trajectory(&pt0, &model, &s.params, tr.t_end, tr.dt, TrajectoryOptions::default())?;
    let path = out.join("trajectory.csv");
    traj.write_csv(std::fs::File::create(&path)?)?;
    report.outputs.push(path.display().to_string());
    report.check(Check::at_most("energy drift per unit time", traj.drift_rate, 1e-6));
    let period = cyclotron_period(&pt0, &model, &s.params);
    let last = traj.last();
    report.results = json!({
        "samples": traj.samples.len(),
        "energy_drift": traj.energy_drift,
        "drift_rate": traj.drift_rate,
        "force_vs_hamilton_mismatch": traj.force_mismatch,
        "cyclotron_period": if period.is_finite() { num(period) } else { Value::Null },
        "final": last.point,
    });
    Ok(())
}

pub fn ehrenfest(s: &Setup, out: &Path, report: &mut RunReport) -> Result<()> {
    let e = &s.cfg.ehrenfest;
    let pk = &s.cfg.packet;
    let spec = PacketSpec { center: pk.center, momentum: pk.momentum, width: pk.width };
    let opts = EhrenfestOptions { t_end: e.t_end, samples: e.samples, tol: e.tol, dt_classical: e.dt };
    let r = ehrenfest_compare(&s.grid, &s.field, &s.params, &spec, &opts)?;
    report.check(Check::at_most("centroid position deviation", r.position_deviation, e.tol));
    report.check(Check::at_most("centroid momentum deviation", r.momentum_deviation, e.tol));
    let mut slope = Value::Null;
    if s.field.kind == FieldKind::UniformE && r.samples.len() > 2 {
        // Least-squares slope of <pi> along the field against the force eE.
        let e0 = s.field.e0();
        let axis = (0..3).max_by(|a, b| e0[*a].abs().total_cmp(&e0[*b].abs())).unwrap_or(0);
        let n = r.samples.len() as f64;
        let tm = r.samples.iter().map(|x| x.t).sum::<f64>() / n;
        let pm = r.samples.iter().map(|x| x.pi_quantum[axis]).sum::<f64>() / n;
        let num_: f64 = r.samples.iter().map(|x| (x.t - tm) * (x.pi_quantum[axis] - pm)).sum();
        let den: f64 = r.samples.iter().map(|x| (x.t - tm).powi(2)).sum();
        let want = s.params.charge * e0[axis];
        let rel = (num_ / den - want).abs() / want.abs();
        report.check(Check::at_most("centroid momentum slope vs eE", rel, 0.01));
        slope = json!({ "measured": num(num_ / den), "expected": num(want) });
    }
    let mut table = Table::new(&[
        "t", "x_q", "y_q", "z_q", "pi_x_q", "pi_y_q", "pi_z_q", "x_c", "y_c", "z_c", "pi_x_c", "pi_y_c", "pi_z_c",
    ]);
    for smp in &r.samples {
        let row = [smp.t]
            .into_iter()
            .chain(smp.r_quantum)
            .chain(smp.pi_quantum)
            .chain(smp.r_classical)
            .chain(smp.pi_classical)
            .map(num)
            .collect();
        table.push(row);
    }
    report.outputs.push(table.write(out, "ehrenfest", s.format)?.display().to_string());
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    report.results = json!({
        "position_deviation": r.position_deviation,
        "momentum_deviation": r.momentum_deviation,
        "de_broglie": num(r.de_broglie),
        "inhomogeneity_length": num(r.inhomogeneity_length),
        "negative_branch": r.negative_branch,
        "warnings": r.warnings,
        "momentum_slope": slope,
    });
    Ok(())
}

pub fn dipoles(s: &Setup, out: &Path, report: &mut RunReport) -> Result<()> {
    let model = FieldModel::windowed(s.field.clone(), s.grid);
    let pts = sample_points(s.seed, s.cfg.verify.samples.max(1), 3, s.grid.length() / 8.0, 1.5);
    let mut table = Table::new(&[
        "x", "y", "z", "pi_x", "pi_y", "pi_z", "d_x", "d_y", "d_z", "mu_x", "mu_y", "mu_z", "fd_error",
    ]);
    let mut worst = 0.0f64;
    for pt in &pts {
        let (d, mu) = induced_dipoles(pt, &model, &s.params)?;
        let (dn, mun) = dipoles_finite_difference(pt, &model, &s.params, 1e-4)?;
        // Relative to the size of each dipole vector.
        let mut err = 0.0f64;
        for (a, b) in [(d, dn), (mu, mun)] {
            let size = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            if size > 0.0 {
                err = err.max((0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt() / size);
            }
        }
        worst = worst.max(err);
        table.push(pt.r.iter().chain(&pt.pi).chain(&d).chain(&mu).map(|x| num(*x)).chain([num(err)]).collect());
    }
    report.check(Check::at_most("dipoles match finite differences of H_s", worst, 1e-6));
    report.outputs.push(table.write(out, "dipoles", s.format)?.display().to_string());
    report.results = json!({ "points": pts.len(), "worst_relative_error": worst });
    Ok(())
}
