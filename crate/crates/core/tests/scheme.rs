use std::sync::Arc;

use boussinesq::fem::sparse::{norm2, TripletBuilder};
use boussinesq::fem::{build_fe_system, FeSystem, Space};
use boussinesq::hopf::{build_hopf_extension, HopfExtension};
use boussinesq::linalg::LuCache;
use boussinesq::mesh::{generate_graded_mesh, generate_uniform_mesh, CavityPreset, GradingParams};
use boussinesq::scheme::{init_state, solve_saddle, Scheme, SchemeConfig, Stepper};

fn uniform(n: usize) -> FeSystem {
    build_fe_system(&generate_uniform_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), n).unwrap()).unwrap()
}

fn graded(n_core: usize) -> FeSystem {
    let params = GradingParams { n_core, delta: 1e-2, n_layers: GradingParams::layers_to_core(1e-2, 1.0 / n_core as f64, 2.0), stretch: 2.0 };
    build_fe_system(&generate_graded_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), &params).unwrap()).unwrap()
}

fn cold_walls(sys: &FeSystem) -> HopfExtension {
    build_hopf_extension(sys, &sys.temperature_wall_data(0.0, 0.0).unwrap()).unwrap()
}

fn bump(x: [f64; 2]) -> f64 {
    16.0 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])
}

#[test]
fn saddle_solve_reproduces_quadratic_stokes_flow() {
    // u = (y^2, x^2) is divergence free, p = x - 1/2 has mean zero and
    // -Pr lap u + grad p = (1 - 2 Pr, -2 Pr).
    let sys = uniform(3);
    let pr = 0.71;
    let n = sys.n_p2();
    let mut k = TripletBuilder::new(2 * n, 2 * n);
    k.push_block(0, 0, sys.stiffness(), pr);
    k.push_block(n, n, sys.stiffness(), pr);
    let rhs = sys.load_vector(|_| [1.0 - 2.0 * pr, -2.0 * pr]);
    let exact_u = sys.interpolate_velocity(|x| [x[1] * x[1], x[0] * x[0]]);
    let exact_p = sys.interpolate_scalar(Space::Pressure, |x| x[0] - 0.5);
    let fixed: Vec<_> = sys
        .dirichlet_mask(Space::Velocity)
        .iter()
        .enumerate()
        .filter(|(_, d)| **d)
        .map(|(i, _)| (i, exact_u.coeffs()[i]))
        .collect();
    let np = sys.n_dofs(Space::Pressure);
    let (u, p) = solve_saddle(&k.build(), sys.divergence(), sys.pressure_integrals(), &rhs, &vec![0.0; np], &fixed, &mut LuCache::default()).unwrap();
    let eu = u.iter().zip(exact_u.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ep = p.iter().zip(exact_p.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(eu < 1e-11 && ep < 1e-10, "velocity error {eu}, pressure error {ep}");
}

#[test]
fn saddle_solve_of_zero_data_is_zero_with_mean_free_pressure() {
    let sys = uniform(4);
    let n = sys.n_p2();
    let np = sys.n_dofs(Space::Pressure);
    let k = sys.velocity_stiffness();
    let (u, p) = solve_saddle(&k, sys.divergence(), sys.pressure_integrals(), &vec![0.0; 2 * n], &vec![0.0; np], &sys.homogeneous_velocity_values(), &mut LuCache::default()).unwrap();
    assert!(u.iter().chain(&p).all(|v| *v == 0.0));

    // A pure gradient force is balanced by pressure alone.
    let rhs = sys.load_vector(|x| [1.0 + 0.0 * x[0], 0.0]);
    let (u, p) = solve_saddle(&k, sys.divergence(), sys.pressure_integrals(), &rhs, &vec![0.0; np], &sys.homogeneous_velocity_values(), &mut LuCache::default()).unwrap();
    assert!(norm2(&u) < 1e-12);
    let mean: f64 = p.iter().zip(sys.pressure_integrals()).map(|(a, b)| a * b).sum();
    assert!(mean.abs() <= 1e-12);
    let expected = sys.interpolate_scalar(Space::Pressure, |x| x[0] - 0.5);
    assert!(p.iter().zip(expected.coeffs()).all(|(a, b)| (a - b).abs() < 1e-10));
}

#[test]
fn zero_state_is_a_fixed_point_of_every_scheme() {
    let sys = graded(4);
    let hopf = cold_walls(&sys);
    for scheme in Scheme::ALL {
        let config = SchemeConfig::new(scheme, 0.05, 4, 0.71, 1e3, [0.0, 1.0]);
        let mut stepper = Stepper::new(&sys, config, &hopf).unwrap();
        let mut state = init_state(&sys, |_| [0.0, 0.0], |_| 0.0, &hopf.boundary_data);
        for _ in 0..4 {
            state = stepper.step(&state).unwrap().0;
        }
        assert_eq!(state.n, 4);
        assert!(state.u.max_abs() == 0.0 && state.t.max_abs() == 0.0 && state.p.max_abs() == 0.0, "{scheme}");
        assert_eq!(state.first_order_startup, scheme.is_bdf2());
    }
}

#[test]
fn linearly_implicit_decay_is_monotone() {
    let sys = graded(4);
    let hopf = cold_walls(&sys);
    for scheme in Scheme::ALL {
        let config = SchemeConfig::new(scheme, 0.01, 30, 0.71, 1e3, [0.0, 1.0]);
        let mut stepper = Stepper::new(&sys, config, &hopf).unwrap();
        let mut state = init_state(&sys, |_| [0.0, 0.0], bump, &hopf.boundary_data);
        let mut last = sys.l2_norm(&state.t);
        for _ in 0..30 {
            let (next, info) = stepper.step(&state).unwrap();
            if scheme.is_linearly_implicit() {
                assert_eq!(info.linear_solves, 2);
                assert_eq!(info.picard_iterations, 0);
            }
            let now = sys.l2_norm(&next.t);
            assert!(now < last, "{scheme} at step {}: {now} >= {last}", next.n);
            last = now;
            state = next;
        }
    }
}

#[test]
fn every_step_keeps_the_velocity_discretely_divergence_free() {
    let sys = graded(4);
    let hopf = build_hopf_extension(&sys, &sys.heated_wall_data().unwrap()).unwrap();
    let config = SchemeConfig::new(Scheme::Bdf2, 0.01, 10, 0.71, 1e3, [0.0, 1.0]);
    let mut stepper = Stepper::new(&sys, config, &hopf).unwrap();
    let mut state = init_state(&sys, |_| [0.0, 0.0], |x| 1.0 - x[0], &hopf.boundary_data);
    for _ in 0..10 {
        let (next, info) = stepper.step(&state).unwrap();
        assert!(info.picard_iterations >= 1);
        let div = norm2(&sys.divergence().mul_vec(next.u.coeffs()));
        assert!(div <= 1e-10 * sys.l2_norm(&next.u), "{div}");
        assert!(sys.integral(&next.p).abs() <= 1e-12);
        for &(i, v) in &hopf.boundary_data {
            assert_eq!(next.t.coeffs()[i], v);
        }
        state = next;
    }
    assert!(state.u.max_abs() > 0.0);
}

#[test]
fn trajectories_are_deterministic() {
    let sys = graded(4);
    let hopf = build_hopf_extension(&sys, &sys.heated_wall_data().unwrap()).unwrap();
    let run = || {
        let mut config = SchemeConfig::new(Scheme::LiBdf2, 0.02, 5, 0.71, 1e3, [0.0, 1.0]);
        config.forcing.gamma = Some(Arc::new(|x, t| x[1] * t));
        let mut stepper = Stepper::new(&sys, config, &hopf).unwrap();
        let mut state = init_state(&sys, |_| [0.0, 0.0], |x| 1.0 - x[0], &hopf.boundary_data);
        for _ in 0..5 {
            state = stepper.step(&state).unwrap().0;
        }
        state
    };
    let (a, b) = (run(), run());
    assert_eq!(a.u, b.u);
    assert_eq!(a.t, b.t);
    assert_eq!(a.p, b.p);
}

#[test]
fn picard_failure_reports_its_history() {
    let sys = graded(4);
    let hopf = build_hopf_extension(&sys, &sys.heated_wall_data().unwrap()).unwrap();
    let mut config = SchemeConfig::new(Scheme::Bdf1, 0.05, 1, 0.71, 1e3, [0.0, 1.0]);
    config.picard.max_iters = 2;
    config.picard.tol_rel = 1e-15;
    let mut stepper = Stepper::new(&sys, config, &hopf).unwrap();
    let state = init_state(&sys, |_| [0.0, 0.0], |x| 1.0 - x[0], &hopf.boundary_data);
    match stepper.step(&state) {
        Err(boussinesq::scheme::SchemeError::PicardDivergence { iterations, history }) => {
            assert_eq!(iterations, 2);
            assert_eq!(history.len(), 2);
        }
        other => panic!("expected Picard failure, got {:?}", other.map(|s| s.0.n)),
    }
}
