use boussinesq::mesh::{generate_graded_mesh, generate_uniform_mesh, validate_mesh, CavityPreset, GradingParams};
use proptest::prelude::*;

fn preset(kind: usize, w: f64, h: f64) -> CavityPreset {
    if kind == 0 {
        CavityPreset::heated_sidewalls(w, h)
    } else {
        CavityPreset::rayleigh_benard(w, h)
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn graded_meshes_tile_the_cavity(
        kind in 0usize..2,
        w in 0.5f64..3.0,
        h in 0.5f64..3.0,
        n_core in 4usize..20,
        log_delta in -4.0f64..-1.5,
        stretch in 1.0f64..3.0,
    ) {
        let delta = 10f64.powf(log_delta);
        let core = w.min(h) / n_core as f64;
        let params = GradingParams { n_core, delta, n_layers: GradingParams::layers_to_core(delta, core, stretch), stretch };
        let p = preset(kind, w, h);
        let Ok(mesh) = generate_graded_mesh(&p, &params) else {
            // Infeasible gradings are rejected, never half-built.
            return Ok(());
        };
        let report = validate_mesh(&mesh).unwrap();
        let area: f64 = (0..mesh.n_triangles()).map(|t| mesh.signed_area(t)).sum();
        prop_assert!((area - w * h).abs() <= 1e-12 * w * h, "area {} vs {}", area, w * h);
        prop_assert!((report.area - w * h).abs() <= 1e-12 * w * h);
        let layer_max = mesh.dirichlet_layer().into_iter().map(|t| mesh.diameter(t)).fold(0.0, f64::max);
        prop_assert_eq!(report.delta, layer_max);
        prop_assert_eq!(report.first_line, delta);
        let again = generate_graded_mesh(&p, &params).unwrap();
        prop_assert_eq!(again, mesh);
    }

    #[test]
    fn uniform_meshes_tile_the_cavity(kind in 0usize..2, w in 0.2f64..4.0, h in 0.2f64..4.0, n in 1usize..24) {
        let mesh = generate_uniform_mesh(&preset(kind, w, h), n).unwrap();
        let report = validate_mesh(&mesh).unwrap();
        prop_assert!((report.area - w * h).abs() <= 1e-12 * w * h);
        prop_assert_eq!(mesh.n_triangles(), 2 * n * n);
        prop_assert_eq!(generate_uniform_mesh(&preset(kind, w, h), n).unwrap(), mesh);
    }
}
