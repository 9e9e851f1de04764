use proptest::prelude::*;

use kgfw_core::c64;
use kgfw_core::cffv::{
    build_cffv_hamiltonian, evolve_cffv, kg_residual, project_kg, split_meo, EvolveOptions, ParticleParams,
};
use kgfw_core::dkp::{build_dkp_reduced, check_dkp_cffv_equivalence};
use kgfw_core::fields::{FieldConfig, GridField, Vec3};
use kgfw_core::fw::{exact_fw, fw_hamiltonian_numeric, fw_step_operator, FwOptions};
use kgfw_core::operator::spectral::{real_spectrum, sqrt_op};
use kgfw_core::operator::{
    check_pseudo_unitary, commutator, momentum_operator, plane_wave, pseudo_hermitian_residual, pseudo_inner, Grid,
    LinearOperator, TwoComponentState,
};
use kgfw_core::packet;
use kgfw_core::semiclassical::{
    dipoles_finite_difference, force_terms, hs_energy, induced_dipoles, integrate_trajectory, FieldModel, PhasePoint,
    TrajectoryOptions,
};

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    [-r..r, -r..r, -r..r]
}

fn sym3(r: f64) -> impl Strategy<Value = [[f64; 3]; 3]> {
    [-r..r, -r..r, -r..r, -r..r, -r..r, -r..r]
        .prop_map(|[a, b, c, d, e, f]| [[a, d, e], [d, b, f], [e, f, c]])
}

/// Every builtin kind with random parameters.
fn any_field() -> impl Strategy<Value = FieldConfig> {
    prop_oneof![
        Just(FieldConfig::free()),
        vec3(0.05).prop_map(FieldConfig::uniform_e),
        vec3(0.4).prop_map(FieldConfig::uniform_b),
        (0.0005..0.01f64).prop_map(FieldConfig::harmonic_scalar),
        (vec3(0.05), vec3(0.4)).prop_map(|(e, h)| FieldConfig::crossed(e, h)),
        (-0.2..0.2f64, vec3(0.05), sym3(0.01), vec3(0.3))
            .prop_map(|(p0, g, k, h)| FieldConfig::polynomial(p0, g, k, h).unwrap()),
    ]
}

/// Builtins without a magnetic field, for one-dimensional grids.
fn electric_field() -> impl Strategy<Value = FieldConfig> {
    prop_oneof![
        Just(FieldConfig::free()),
        (-0.05..0.05f64).prop_map(|e| FieldConfig::uniform_e([e, 0.0, 0.0])),
        (0.0005..0.01f64).prop_map(FieldConfig::harmonic_scalar),
        (-0.2..0.2f64, -0.05..0.05f64, 0.0..0.01f64)
            .prop_map(|(p0, g, k)| FieldConfig::polynomial(p0, [g, 0.0, 0.0], [[k, 0.0, 0.0], [0.0; 3], [0.0; 3]], [0.0; 3]).unwrap()),
    ]
}

fn random_state(g: &Grid, seed: [f64; 6]) -> TwoComponentState {
    let l = g.length();
    TwoComponentState::new(
        *g,
        packet::gaussian(g, [seed[0] * l / 8.0, 0.0, 0.0], [seed[1], 0.0, 0.0], l / 12.0),
        packet::gaussian(g, [seed[2] * l / 8.0, seed[3], 0.0], [seed[4], seed[5], 0.0], l / 10.0),
    )
    .unwrap()
}

fn unit6() -> impl Strategy<Value = [f64; 6]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn pseudo_adjoint_is_an_involution(entries in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 64)) {
        let g = Grid::new(1, 4, 4.0).unwrap();
        let m = faer::Mat::from_fn(8, 8, |i, j| {
            let (re, im) = entries[8 * i + j];
            c64::new(re, im)
        });
        let a = LinearOperator::from_dense(g, &m).unwrap();
        let back = a.pseudo_adjoint().pseudo_adjoint();
        prop_assert_eq!(back.to_dense(), a.to_dense());
    }

    #[test]
    fn pseudo_unitary_maps_keep_pseudo_inner_products(
        f in electric_field(), n in 0.3..5.0f64, m in 0.5..2.0f64, s1 in unit6(), s2 in unit6()
    ) {
        let g = Grid::new(1, 32, 24.0).unwrap();
        let gf = GridField::new(&g, &f, 1.0).unwrap();
        let u = fw_step_operator(&gf, &ParticleParams::new(m, 1.0, Some(n), 1.0).unwrap(), &FwOptions::default()).unwrap().u;
        let (ok, res) = check_pseudo_unitary(&u, 1e-10);
        prop_assert!(ok, "{}", res);
        let (a, b) = (random_state(&g, s1), random_state(&g, s2));
        let before = pseudo_inner(&a, &b).unwrap();
        let after = pseudo_inner(&u.apply(&a), &u.apply(&b)).unwrap();
        prop_assert!((after - before).norm() <= 1e-10 * a.l2_norm() * b.l2_norm());
    }

    #[test]
    fn square_root_squares_back_and_commutes(entries in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16)) {
        let g = Grid::new(1, 4, 4.0).unwrap();
        let b = faer::Mat::from_fn(4, 4, |i, j| {
            let (re, im) = entries[4 * i + j];
            c64::new(re, im)
        });
        // Positive definite Hermitian grid block, times the identity in component space.
        let a = b.adjoint() * &b + faer::Mat::<c64>::identity(4, 4);
        let a = LinearOperator::scalar(g, &std::sync::Arc::new(a));
        let r = sqrt_op(&a).unwrap();
        prop_assert!(r.matmul(&r).distance(&a) <= 1e-10 * a.norm());
        prop_assert!(commutator(&r, &a).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn momentum_is_diagonal_on_plane_waves(k in -7i64..8, axis in 0usize..2) {
        let g = Grid::new(2, 16, 9.0).unwrap();
        let p = momentum_operator(&g, axis).unwrap();
        let w = plane_wave(&g, axis, k);
        let pw = p.apply_upper(&w);
        let q = 2.0 * std::f64::consts::PI * k as f64 / g.length();
        for (a, b) in pw.iter().zip(&w) {
            prop_assert!((a - b * q).norm() < 1e-12);
        }
    }

    #[test]
    fn cffv_hamiltonians_are_pseudo_hermitian(f in any_field(), n in prop_oneof![0.2..5.0f64, -5.0..-0.2f64], m in 0.0..2.0f64) {
        let g = Grid::new(2, 8, 8.0).unwrap();
        let gf = GridField::new(&g, &f, 1.0).unwrap();
        let h = build_cffv_hamiltonian(&gf, &ParticleParams::new(m, 1.0, Some(n), 1.0).unwrap()).unwrap();
        prop_assert!(pseudo_hermitian_residual(&h) <= 1e-12);
    }

    #[test]
    fn free_spectrum_does_not_depend_on_n(n1 in 0.2..5.0f64, n2 in 0.2..5.0f64, m in 0.2..2.0f64) {
        let g = Grid::new(1, 16, 10.0).unwrap();
        let gf = GridField::new(&g, &FieldConfig::free(), 0.0).unwrap();
        let a = real_spectrum(&build_cffv_hamiltonian(&gf, &ParticleParams::new(m, 0.0, Some(n1), 1.0).unwrap()).unwrap(), 1e-10).unwrap();
        let b = real_spectrum(&build_cffv_hamiltonian(&gf, &ParticleParams::new(m, 0.0, Some(n2), 1.0).unwrap()).unwrap(), 1e-10).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs());
        }
    }

    #[test]
    fn evolution_solves_klein_gordon_and_keeps_pseudo_inner_products(
        f in electric_field(), n in 0.5..3.0f64, s1 in unit6(), s2 in unit6()
    ) {
        let g = Grid::new(1, 32, 24.0).unwrap();
        let gf = GridField::new(&g, &f, 1.0).unwrap();
        let p = ParticleParams::new(1.0, 1.0, Some(n), 1.0).unwrap();
        let h = build_cffv_hamiltonian(&gf, &p).unwrap();
        let (a, b) = (random_state(&g, s1), random_state(&g, s2));
        let dt = 1e-3;
        let opts = EvolveOptions { record_every: 1, drift_threshold: 1e-8 };
        let ra = evolve_cffv(&a, &h, dt, 40, opts).unwrap();
        let rb = evolve_cffv(&b, &h, dt, 40, opts).unwrap();
        let history: Vec<Vec<c64>> = ra.states.iter().map(project_kg).collect();
        let res = kg_residual(&history, dt, &gf, &p).unwrap();
        prop_assert!(res <= 1e-6, "KG residual {}", res);
        let before = pseudo_inner(&a, &b).unwrap();
        let after = pseudo_inner(ra.states.last().unwrap(), rb.states.last().unwrap()).unwrap();
        prop_assert!((after - before).norm() <= 1e-10 * a.l2_norm() * b.l2_norm());
    }

    #[test]
    fn fw_hamiltonian_does_not_depend_on_n(f in electric_field(), n1 in 0.3..5.0f64, n2 in 0.3..5.0f64) {
        let g = Grid::new(1, 32, 24.0).unwrap();
        let gf = GridField::new(&g, &f, 1.0).unwrap();
        let h = |n: f64| fw_hamiltonian_numeric(&gf, &ParticleParams::new(1.0, 1.0, Some(n), 1.0).unwrap(), &FwOptions::default()).unwrap().total();
        let (a, b) = (h(n1), h(n2));
        prop_assert!(a.distance(&b) <= 1e-9 * a.norm());
    }

    #[test]
    fn numeric_corrections_scale_as_hbar_squared(f in electric_field(), hbar in 0.1..3.0f64) {
        let g = Grid::new(1, 32, 24.0).unwrap();
        let gf = GridField::new(&g, &f, 1.0).unwrap();
        let q = |s: f64| fw_hamiltonian_numeric(&gf, &ParticleParams::new(1.0, 1.0, None, s).unwrap(), &FwOptions::default()).unwrap().quantum();
        let (q1, qs) = (q(1.0), q(hbar));
        let n1 = q1.norm();
        prop_assume!(n1 > 0.0);
        prop_assert!(qs.distance(&q1.scale_real(hbar * hbar)) <= 1e-6 * hbar * hbar * n1);
    }

    #[test]
    fn reduced_dkp_operator_is_cffv_at_n_equal_m(f in any_field(), m in 0.3..3.0f64) {
        let g = Grid::new(2, 8, 8.0).unwrap();
        let gf = GridField::new(&g, &f, 1.0).unwrap();
        let p = ParticleParams::new(m, 1.0, Some(m), 1.0).unwrap();
        let d = build_dkp_reduced(&gf, &p).unwrap();
        let c = build_cffv_hamiltonian(&gf, &p).unwrap();
        prop_assert!(d.distance(&c) <= 1e-12 * c.norm());
    }

    #[test]
    fn dkp_constraints_hold_along_evolution(f in electric_field(), s in unit6()) {
        let g = Grid::new(1, 32, 24.0).unwrap();
        let gf = GridField::new(&g, &f, 1.0).unwrap();
        let p = ParticleParams::new(1.2, 1.0, Some(1.2), 1.0).unwrap();
        let r = check_dkp_cffv_equivalence(&gf, &p, &random_state(&g, s), 0.01, 30).unwrap();
        prop_assert!(r.constraint_residual <= 1e-10);
        prop_assert!(r.equation_residual <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn sampled_fields_are_derivatives_of_the_potentials(f in any_field(), r in vec3(5.0), t in -10.0..10.0f64) {
        let s = f.eval(r, 0.0);
        let h = 1e-4;
        let at = |k: usize, d: f64| {
            let mut q = r;
            q[k] += d;
            f.eval(q, 0.0)
        };
        let mut e_fd = [0.0; 3];
        let mut da = [[0.0; 3]; 3]; // da[k][j] = dA_j/dx_k
        for k in 0..3 {
            let (p, m) = (at(k, h), at(k, -h));
            e_fd[k] = -(p.phi - m.phi) / (2.0 * h);
            for j in 0..3 {
                da[k][j] = (p.a[j] - m.a[j]) / (2.0 * h);
            }
        }
        let h_fd = [da[1][2] - da[2][1], da[2][0] - da[0][2], da[0][1] - da[1][0]];
        let close = |a: Vec3, b: Vec3| {
            let d = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt();
            let n = (0..3).map(|k| b[k] * b[k]).sum::<f64>().sqrt();
            d <= 1e-6 * n.max(1e-6)
        };
        prop_assert!(close(e_fd, s.e));
        prop_assert!(close(h_fd, s.h));
        // Stationary: no explicit time dependence.
        let later = f.eval(r, t);
        prop_assert_eq!(later.phi, s.phi);
        prop_assert_eq!(later.a, s.a);
    }
}

fn phase_point() -> impl Strategy<Value = PhasePoint> {
    (vec3(3.0), vec3(1.5)).prop_map(|(r, pi)| PhasePoint::new(r, pi))
}

/// Fields whose force-law field-product term `H^2 E - H (E.H)` vanishes.
fn no_transverse_e_field() -> impl Strategy<Value = FieldConfig> {
    prop_oneof![
        vec3(0.05).prop_map(FieldConfig::uniform_e),
        vec3(0.4).prop_map(FieldConfig::uniform_b),
        (0.0005..0.05f64).prop_map(FieldConfig::harmonic_scalar),
        (vec3(0.3), -0.2..0.2f64).prop_map(|(h, s)| FieldConfig::crossed(h.map(|x| x * s), h)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn dipoles_are_field_gradients_of_hs(f in any_field(), pt in phase_point()) {
        let model = FieldModel::raw(f);
        let p = ParticleParams::new(1.0, 1.0, None, 1.0).unwrap();
        let (d, mu) = induced_dipoles(&pt, &model, &p).unwrap();
        let (dn, mun) = dipoles_finite_difference(&pt, &model, &p, 1e-4).unwrap();
        for (a, b) in [(d, dn), (mu, mun)] {
            let diff = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt();
            let size = (0..3).map(|k| a[k] * a[k]).sum::<f64>().sqrt();
            prop_assert!(diff <= 1e-6 * size.max(1e-12), "{:?} vs {:?}", a, b);
        }
    }

    #[test]
    fn classical_limit_is_the_lorentz_force(f in any_field(), pt in phase_point()) {
        let model = FieldModel::raw(f);
        let p = ParticleParams::new(1.0, 1.0, None, 0.0).unwrap();
        let t = force_terms(&pt, &model, &p).unwrap();
        prop_assert_eq!(t.total(), t.lorentz());
        let e = hs_energy(&pt, &model, &p).unwrap();
        prop_assert_eq!(e.quantum(), 0.0);
    }

    #[test]
    fn rest_particles_have_no_hamiltonian_corrections(f in any_field(), r in vec3(3.0), m in 0.2..3.0f64) {
        let model = FieldModel::raw(f);
        let p = ParticleParams::new(m, 1.0, None, 1.0).unwrap();
        let t = hs_energy(&PhasePoint::new(r, [0.0; 3]), &model, &p).unwrap();
        prop_assert_eq!((t.quadrupole, t.mixed, t.electric), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rest_particles_have_no_force_corrections_without_transverse_e(f in no_transverse_e_field(), r in vec3(3.0)) {
        let model = FieldModel::raw(f);
        let p = ParticleParams::new(1.0, 1.0, None, 1.0).unwrap();
        let c = force_terms(&PhasePoint::new(r, [0.0; 3]), &model, &p).unwrap().corrections();
        let eh = model.sample(r);
        let scale = eh.e.iter().chain(&eh.h).map(|x| x.abs()).fold(0.0, f64::max).powi(3);
        prop_assert!(c.iter().all(|x| x.abs() <= 1e-15 * scale.max(1e-300)), "{:?}", c);
    }

    #[test]
    fn quantum_terms_scale_as_hbar_squared(f in any_field(), pt in phase_point(), s in 0.1..4.0f64) {
        let model = FieldModel::raw(f);
        let p1 = ParticleParams::new(1.0, 1.0, None, 1.0).unwrap();
        let ps = p1.with_hbar_scale(s).unwrap();
        let (a, b) = (hs_energy(&pt, &model, &p1).unwrap(), hs_energy(&pt, &model, &ps).unwrap());
        let s2 = s * s;
        for (x, y) in [(a.quadrupole, b.quadrupole), (a.mixed, b.mixed), (a.electric, b.electric)] {
            prop_assert!((y - s2 * x).abs() <= 1e-14 * (s2 * x).abs());
        }
        prop_assert_eq!((a.kinetic, a.coulomb), (b.kinetic, b.coulomb));
        let (fa, fb) = (force_terms(&pt, &model, &p1).unwrap(), force_terms(&pt, &model, &ps).unwrap());
        for (x, y) in [(fa.gradient, fb.gradient), (fa.field_product, fb.field_product), (fa.polarization, fb.polarization)] {
            for k in 0..3 {
                prop_assert!((y[k] - s2 * x[k]).abs() <= 1e-14 * (s2 * x[k]).abs());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn energy_is_conserved_along_trajectories(
        e in vec3(0.03), h in vec3(0.3), pt in phase_point()
    ) {
        let model = FieldModel::raw(FieldConfig::crossed(e, h));
        let p = ParticleParams::new(1.0, 1.0, None, 1.0).unwrap();
        let tr = integrate_trajectory(&pt, &model, &p, 5.0, 5e-3, TrajectoryOptions { record_every: 100, ..TrajectoryOptions::default() }).unwrap();
        prop_assert!(tr.energy_drift <= 1e-6, "drift {}", tr.energy_drift);
    }
}

#[test]
fn rest_particle_force_in_crossed_fields_follows_the_field_product_term() {
    // The force law carries e^3 hbar^2 (H^2 E - H (E.H)) / (8 eps^4), which does
    // not vanish at pi = 0 when E has a component normal to H.
    let (e, h, m) = ([0.05, 0.0, 0.0], [0.0, 0.0, 0.3], 1.5);
    let model = FieldModel::raw(FieldConfig::crossed(e, h));
    let p = ParticleParams::new(m, 1.0, None, 1.0).unwrap();
    let t = force_terms(&PhasePoint::new([0.4, -0.2, 0.0], [0.0; 3]), &model, &p).unwrap();
    let want = 0.09 * 0.05 / (8.0 * m.powi(4));
    assert!((t.field_product[0] - want).abs() < 1e-18);
    assert_eq!(t.gradient, [0.0; 3]);
    assert_eq!(t.polarization, [0.0; 3]);
    let hs = hs_energy(&PhasePoint::new([0.4, -0.2, 0.0], [0.0; 3]), &model, &p).unwrap();
    assert_eq!(hs.quantum(), 0.0);
}

#[test]
fn massless_free_fw_levels_are_momentum_magnitudes() {
    let g = Grid::new(1, 16, 10.0).unwrap();
    let gf = GridField::new(&g, &FieldConfig::free(), 0.0).unwrap();
    for n in [0.5, 1.0, 3.0] {
        let p = ParticleParams::new(0.0, 0.0, Some(n), 1.0).unwrap();
        let x = exact_fw(&split_meo(&gf, &p).unwrap(), true, &FwOptions::massless()).unwrap();
        let got = real_spectrum(&x.h_fw, 1e-10).unwrap();
        let mut want: Vec<f64> = (0..16)
            .map(|j| (2.0 * std::f64::consts::PI * (j as f64 - 8.0) / 10.0).abs())
            .filter(|k| *k > 0.0)
            .flat_map(|k| [k, -k])
            .collect();
        want.sort_by(f64::total_cmp);
        let nonzero: Vec<f64> = got.into_iter().filter(|v| v.abs() > 1e-9).collect();
        assert_eq!(nonzero.len(), want.len());
        for (a, b) in nonzero.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
        }
    }
}
