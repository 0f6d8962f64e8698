mod common;

use boussinesq::fem::{build_fe_system, FeSystem, FieldVector, Space};
use boussinesq::mesh::{generate_graded_mesh, generate_uniform_mesh, CavityPreset, GradingParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn graded(n_core: usize) -> FeSystem {
    let params = GradingParams { n_core, delta: 1e-3, n_layers: GradingParams::layers_to_core(1e-3, 1.0 / n_core as f64, 2.0), stretch: 2.0 };
    build_fe_system(&generate_graded_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), &params).unwrap()).unwrap()
}

fn random_field(sys: &FeSystem, space: Space, zero_on_dirichlet: bool, rng: &mut ChaCha8Rng) -> FieldVector {
    let mask = sys.dirichlet_mask(space);
    let c = mask
        .iter()
        .map(|&d| {
            let z: f64 = StandardNormal.sample(rng);
            if d && zero_on_dirichlet { 0.0 } else { z }
        })
        .collect();
    FieldVector::new(space, c)
}

#[test]
fn skew_form_matches_independent_quadrature() {
    let sys = graded(4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let a = random_field(&sys, Space::Velocity, false, &mut rng);
        let v = random_field(&sys, Space::Velocity, false, &mut rng);
        let w = random_field(&sys, Space::Velocity, false, &mut rng);
        let lib = sys.trilinear_b(&a, &v, &w).unwrap();
        let oracle = common::p2::skew_form(&sys, &a, &v, &w);
        let scale = common::p2::skew_form(&sys, &a, &v, &v).abs().max(lib.abs()).max(1.0);
        assert!((lib - oracle).abs() <= 1e-11 * scale, "{lib} vs {oracle}");
    }
}

#[test]
fn convective_form_agrees_for_advection_vanishing_on_the_boundary() {
    let sys = graded(4);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let a = random_field(&sys, Space::Velocity, true, &mut rng);
        let v = random_field(&sys, Space::Velocity, false, &mut rng);
        let w = random_field(&sys, Space::Velocity, false, &mut rng);
        let lib = sys.trilinear_b(&a, &v, &w).unwrap();
        let alt = common::p2::convective_form(&sys, &a, &v, &w);
        let scale = common::p2::convective_form(&sys, &a, &v, &v).abs().max(lib.abs());
        assert!((lib - alt).abs() <= 1e-11 * scale, "{lib} vs {alt}");
        let t = random_field(&sys, Space::Temperature, false, &mut rng);
        let s = random_field(&sys, Space::Temperature, false, &mut rng);
        let lib = sys.trilinear_b_star(&a, &t, &s).unwrap();
        let alt = common::p2::convective_form(&sys, &a, &t, &s);
        assert!((lib - alt).abs() <= 1e-11 * lib.abs().max(alt.abs()), "{lib} vs {alt}");
    }
}

#[test]
fn convective_form_differs_when_advection_has_a_trace() {
    let sys = graded(4);
    let a = sys.interpolate_velocity(|x| [1.0 + x[1], x[0]]);
    let t = sys.interpolate_scalar(Space::Temperature, |x| x[0]);
    let s = sys.interpolate_scalar(Space::Temperature, |_| 1.0);
    // (a . grad x, 1) + 0 = integral of (1 + y) = 3/2, while b* = 1/2 (a . grad x, 1) = 3/4.
    let lib = sys.trilinear_b_star(&a, &t, &s).unwrap();
    assert!((lib - 0.75).abs() < 1e-13, "{lib}");
    assert!((common::p2::convective_form(&sys, &a, &t, &s) - 1.5).abs() < 1e-12);
}

#[test]
fn gradient_norms_match_oracle() {
    let sys = graded(4);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let u = random_field(&sys, Space::Velocity, false, &mut rng);
    let t = random_field(&sys, Space::Temperature, false, &mut rng);
    for f in [&u, &t] {
        let g = sys.grad_inner(f, f);
        assert!((g - common::p2::grad_norm_sq(&sys, f)).abs() <= 1e-11 * g);
        let m = sys.l2_inner(f, f);
        assert!((m - common::p2::l2_norm_sq(&sys, f)).abs() <= 1e-11 * m);
    }
}

#[test]
fn continuity_constant_is_stable_under_refinement() {
    let mut constants = Vec::new();
    for n in [4, 8, 16] {
        let sys = build_fe_system(&generate_uniform_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), n).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let a = random_field(&sys, Space::Velocity, true, &mut rng);
            let t = random_field(&sys, Space::Temperature, true, &mut rng);
            let s = random_field(&sys, Space::Temperature, true, &mut rng);
            let b = sys.trilinear_b_star(&a, &t, &s).unwrap().abs();
            worst = worst.max(b / (sys.grad_norm(&a) * sys.grad_norm(&t) * sys.grad_norm(&s)));
        }
        constants.push(worst);
    }
    assert!(constants[1] <= 2.0 * constants[0] && constants[2] <= 2.0 * constants[0], "{constants:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn b_star_matrix_is_antisymmetric(seed in any::<u64>()) {
        let sys = graded(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_field(&sys, Space::Velocity, false, &mut rng);
        let t = random_field(&sys, Space::Temperature, false, &mut rng);
        let s = random_field(&sys, Space::Temperature, false, &mut rng);
        let n = sys.trilinear_b_star_matrix(&a).unwrap();
        let st = n.bilinear(s.coeffs(), t.coeffs());
        let ts = n.bilinear(t.coeffs(), s.coeffs());
        prop_assert!((st + ts).abs() <= 1e-12 * st.abs().max(1.0));
        let tt = n.bilinear(t.coeffs(), t.coeffs());
        prop_assert!(tt.abs() <= 1e-12 * sys.grad_norm(&a) * sys.grad_norm(&t).powi(2));
    }

    #[test]
    fn b_vanishes_on_repeated_argument(seed in any::<u64>()) {
        let sys = graded(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_field(&sys, Space::Velocity, false, &mut rng);
        let v = random_field(&sys, Space::Velocity, false, &mut rng);
        let bvv = sys.trilinear_b(&a, &v, &v).unwrap();
        prop_assert!(bvv.abs() <= 1e-12 * sys.l2_norm(&a) * sys.grad_norm(&v).powi(2));
        let n = sys.trilinear_b_matrix(&a).unwrap();
        let w = random_field(&sys, Space::Velocity, false, &mut rng);
        let direct = sys.trilinear_b(&a, &v, &w).unwrap();
        let via = n.bilinear(w.coeffs(), v.coeffs());
        prop_assert!((direct - via).abs() <= 1e-12 * direct.abs().max(sys.grad_norm(&a) * sys.grad_norm(&v) * sys.grad_norm(&w)));
    }

    #[test]
    fn tau_shift_drops_out(seed in any::<u64>()) {
        // b*(u, theta + tau, theta) = b*(u, tau, theta) for theta vanishing on the Dirichlet walls.
        let sys = graded(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_field(&sys, Space::Velocity, true, &mut rng);
        let theta = random_field(&sys, Space::Temperature, true, &mut rng);
        let tau = boussinesq::hopf::build_hopf_extension(&sys, &sys.heated_wall_data().unwrap()).unwrap().coefficients;
        let lhs = sys.trilinear_b_star(&u, &theta.lincomb(1.0, &tau, 1.0), &theta).unwrap();
        let rhs = sys.trilinear_b_star(&u, &tau, &theta).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * sys.grad_norm(&u) * sys.grad_norm(&theta) * (sys.grad_norm(&theta) + sys.grad_norm(&tau)));
    }
}
