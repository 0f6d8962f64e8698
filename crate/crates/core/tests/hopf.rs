use boussinesq::fem::{build_fe_system, FeSystem, Space};
use boussinesq::hopf::{build_hopf_extension, estimate_hopf_bound_constant, HopfBoundOptions};
use boussinesq::mesh::{generate_graded_mesh, CavityPreset, GradingParams};
use proptest::prelude::*;

fn graded(rb: bool, n_core: usize, delta: f64) -> Option<FeSystem> {
    let params = GradingParams { n_core, delta, n_layers: GradingParams::layers_to_core(delta, 1.0 / n_core as f64, 2.0), stretch: 2.0 };
    let preset = if rb { CavityPreset::rayleigh_benard(1.0, 1.0) } else { CavityPreset::heated_sidewalls(1.0, 1.0) };
    build_fe_system(&generate_graded_mesh(&preset, &params).ok()?).ok()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lift_matches_data_and_stays_in_its_layer(
        rb in any::<bool>(),
        n_core in 4usize..9,
        log_delta in -3.0f64..-1.0,
        seed in any::<u64>(),
        scale in 0.0f64..10.0,
    ) {
        let Some(sys) = graded(rb, n_core, 10f64.powf(log_delta)) else { return Ok(()); };
        let mask = sys.dirichlet_mask(Space::Temperature);
        // Cheap deterministic nonnegative data from the seed.
        let mut s = seed;
        let data: Vec<(usize, f64)> = (0..sys.n_p2()).filter(|&i| mask[i]).map(|i| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (i, scale * (s >> 11) as f64 / (1u64 << 53) as f64)
        }).collect();
        let hi = data.iter().map(|d| d.1).fold(0.0, f64::max);
        let tau = build_hopf_extension(&sys, &data).unwrap();
        tau.verify(&sys).map_err(TestCaseError::fail)?;
        let c = tau.coefficients.coeffs();
        prop_assert!(c.iter().all(|&v| (0.0..=hi).contains(&v)));
        for &(i, v) in &data {
            prop_assert_eq!(c[i], v);
        }
        // Recompute the layer from the mesh: nonzero coefficients only on
        // triangles that have a node on the Dirichlet walls.
        for (t, cell) in sys.dofs().cells.iter().enumerate() {
            let touches = cell.iter().any(|&i| mask[i]);
            prop_assert_eq!(touches, tau.support_elements.binary_search(&t).is_ok());
            if !touches {
                prop_assert!(cell.iter().all(|&i| c[i] == 0.0));
            }
        }
        let layer = tau.support_elements.iter().map(|&t| sys.mesh().diameter(t)).fold(0.0, f64::max);
        prop_assert_eq!(tau.layer_diameter, layer);
    }
}

/// Refining the core at a fixed wall layer must not make the sampled
/// constant grow beyond sampling noise.
#[test]
fn bound_constant_does_not_grow_under_interior_refinement() {
    let delta = 1e-2;
    let mut medians = Vec::new();
    for n_core in [6, 8, 12] {
        let sys = graded(false, n_core, delta).unwrap();
        let tau = build_hopf_extension(&sys, &sys.heated_wall_data().unwrap()).unwrap();
        let est = estimate_hopf_bound_constant(&sys, &tau, HopfBoundOptions { n_samples: 200, seed: 7, chi2_off_support: false }).unwrap();
        medians.push(est.median);
    }
    eprintln!("{medians:?}");
    for k in 1..medians.len() {
        assert!(medians[k] <= 1.1 * medians[k - 1], "{medians:?}");
    }
}
