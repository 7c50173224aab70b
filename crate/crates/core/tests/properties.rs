use h4bp::acceptance::stm_fd_error;
use h4bp::continuation::{continue_family, seed_family, ContinuationOptions, FamilySeed, Limits};
use h4bp::dynamics::{PhaseState, SystemParams};
use h4bp::periodic::SymmetryClass;
use h4bp::propagation::{
    propagate, propagate_regularized, propagate_spatial_reference, propagate_variational, IntegratorConfig,
    VariationalState,
};
use h4bp::regularization::{from_regularized, reg_hamiltonian, to_regularized, Branch, RegState};
use proptest::prelude::*;

fn sj() -> SystemParams {
    SystemParams::new(0.00095).unwrap()
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

/// Perturbed circular orbits close to the tertiary, direct or retrograde.
fn bounded_orbit() -> impl Strategy<Value = PhaseState> {
    (0.08f64..0.3, 0.0f64..std::f64::consts::TAU, any::<bool>(), 0.97f64..1.03).prop_map(|(r, th, direct, k)| {
        let v = k * if direct { r.powf(-0.5) - r } else { -r.powf(-0.5) - r };
        PhaseState::planar(r * th.cos(), r * th.sin(), -v * th.sin(), v * th.cos())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn jacobi_drift_over_100_time_units(s in bounded_orbit()) {
        let p = sj();
        let c0 = p.jacobi_constant(&s).unwrap();
        let e = propagate(&p, &cfg(), &s, 100.0).unwrap().final_state();
        prop_assert!((p.jacobi_constant(&e).unwrap() - c0).abs() < 1e-11);
    }

    #[test]
    fn stm_matches_finite_differences(s in bounded_orbit(), t in 0.5f64..3.0) {
        let p = sj();
        prop_assert!(stm_fd_error(&p, &cfg(), &s, t).unwrap() < 1e-5);
        let v = propagate_variational(&p, &cfg(), &VariationalState::identity(s), t).unwrap();
        prop_assert!((v.stm.determinant() - 1.0).abs() < 1e-9);
        prop_assert!((v.vstm.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vertical_trace_matches_spatial_reference(s in bounded_orbit(), t in 0.5f64..3.0) {
        let p = sj();
        let v = propagate_variational(&p, &cfg(), &VariationalState::identity(s), t).unwrap();
        let m6 = propagate_spatial_reference(&p, &cfg(), &s, t).unwrap();
        prop_assert!((v.vstm.trace() - (m6[(2, 2)] + m6[(5, 5)])).abs() < 1e-9);
    }

    #[test]
    fn regularized_flow_equals_physical(s in bounded_orbit(), tau in 0.2f64..1.0, minus in any::<bool>()) {
        let p = sj();
        let branch = if minus { Branch::Minus } else { Branch::Plus };
        let r = to_regularized(&p, &s, branch).unwrap();
        let rf = propagate_regularized(&p, &cfg(), &r, tau).unwrap().final_reg_state();
        prop_assert!(reg_hamiltonian(&p, &rf).abs() < 1e-10);
        let img = from_regularized(&rf).unwrap();
        let phys = propagate(&p, &cfg(), &s, rf.t_phys).unwrap().final_state();
        for (a, b) in img.planar_array().iter().zip(phys.planar_array()) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn collision_momentum_norm(c in 3.0f64..6.0, angle in 0.0f64..std::f64::consts::TAU, tau in 0.1f64..0.8) {
        let p = sj();
        let r0 = RegState::collision(c, angle);
        let rf = propagate_regularized(&p, &cfg(), &r0, tau).unwrap().final_reg_state();
        let back = propagate_regularized(&p, &cfg(), &rf, -tau).unwrap().final_reg_state();
        prop_assert!(back.q1.hypot(back.q2) < 1e-8);
        prop_assert!((back.p1 * back.p1 + back.p2 * back.p2 - 8.0).abs() < 1e-8);
    }

    #[test]
    fn hill_limit_vector_field(s in bounded_orbit()) {
        let f = SystemParams::hill().eom(&s).unwrap();
        let r3 = s.radius().powi(3);
        let ax = 2.0 * s.vy + 3.0 * s.x - s.x / r3;
        let ay = -2.0 * s.vx - s.y / r3;
        prop_assert!((f.dvx - ax).abs() <= 4.0 * f64::EPSILON * ax.abs().max(1.0));
        prop_assert!((f.dvy - ay).abs() <= 4.0 * f64::EPSILON * ay.abs().max(1.0));
    }
}

#[test]
fn converged_orbits_have_unit_pair_and_equal_diagonal() {
    let p = sj();
    for seed in [FamilySeed::G, FamilySeed::F, FamilySeed::A, FamilySeed::A2, FamilySeed::Short, FamilySeed::Long] {
        let first = seed_family(&p, seed).unwrap();
        let opts = ContinuationOptions {
            limits: Limits { c_min: first.c - 2.0, c_max: first.c + 2.0, max_members: 60 },
            detect_events: false,
            ..Default::default()
        };
        let rec = continue_family(&p, seed.name(), &first, seed.default_heading(), &opts).unwrap();
        for o in &rec.members {
            assert!(o.unit_pair_error < 1e-6, "{seed} at C = {}: {}", o.c, o.unit_pair_error);
            if o.symmetry != SymmetryClass::Asymmetric {
                assert!((o.half_a - o.half_d).abs() < 1e-8, "{seed} at C = {}", o.c);
            }
        }
    }
}

#[test]
fn g_seed_converges_at_zero_mass() {
    let hill = SystemParams::hill();
    let o = seed_family(&hill, FamilySeed::G).unwrap();
    assert!(o.closure_error(&hill, &cfg()).unwrap() < 1e-9);
}
