use std::sync::Arc;

use proptest::prelude::*;
use roughlayer::fem::quadrature::{gauss_legendre, triangle_degree5};
use roughlayer::fem::{apply_bcs, assemble_laplace, solve, BcSpec, BoundaryCondition, FeSpace};
use roughlayer::geometry::{build_cell_mesh, build_unit_square_mesh, BoundaryLabel, DomainSpec, RoughProfile};

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn stiffness_rows_sum_to_zero(amp in 0.0f64..0.45, h in 0.08f64..0.2, order in 1usize..3) {
        let spec = DomainSpec::cell(RoughProfile::sine_with(-1.0, amp), 2.0);
        let space = FeSpace::new(Arc::new(build_cell_mesh(&spec, h).unwrap()), order).unwrap();
        let a = assemble_laplace(&space).unwrap().matrix;
        let scale = a.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
        for i in 0..a.n_rows {
            prop_assert!(a.row(i).map(|(_, v)| v).sum::<f64>().abs() <= 1e-12 * scale);
        }
        prop_assert!(a.asymmetry() <= 1e-13 * scale);
        prop_assert!(a.diagonal().iter().all(|d| *d > 0.0));
    }

    #[test]
    fn degree5_rule_integrates_barycentric_monomials(
        p in prop::array::uniform3(prop::array::uniform2(-3.0f64..3.0)),
        a in 0u32..6, b in 0u32..6, c in 0u32..6,
    ) {
        prop_assume!(a + b + c <= 5);
        let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
        prop_assume!(area > 1e-3);
        let quad: f64 = triangle_degree5()
            .iter()
            .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
            .sum::<f64>() * area;
        let exact = 2.0 * area * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
        prop_assert!((quad - exact).abs() <= 1e-13 * area, "{quad} vs {exact}");
    }

    #[test]
    fn gauss_rules_are_exact_to_degree(n in 1usize..6, k in 0i32..10) {
        prop_assume!(k < 2 * n as i32);
        let q: f64 = gauss_legendre(n).iter().map(|(t, w)| w * t.powi(k)).sum();
        prop_assert!((q - 1.0 / (k + 1) as f64).abs() < 1e-14);
    }

    #[test]
    fn robin_strip_is_affine(alpha in 0.01f64..2.0, top in -2.0f64..2.0, order in 1usize..3) {
        let space = FeSpace::new(Arc::new(build_unit_square_mesh(0.25).unwrap()), order).unwrap();
        let bcs = BcSpec::new()
            .with(BoundaryLabel::Bottom, BoundaryCondition::Robin { alpha })
            .with(BoundaryLabel::Top, BoundaryCondition::dirichlet(move |_| top))
            .with(BoundaryLabel::Left, BoundaryCondition::Natural)
            .with(BoundaryLabel::Right, BoundaryCondition::Natural);
        let u = solve(&apply_bcs(assemble_laplace(&space).unwrap(), &bcs).unwrap()).unwrap();
        for (c, x) in u.coefficients.iter().zip(space.dof_coords()) {
            prop_assert!((c - top * (x[1] + alpha) / (1.0 + alpha)).abs() < 1e-10);
        }
    }

    #[test]
    fn square_mesh_tiles_the_square(h in 0.05f64..0.6) {
        let mesh = build_unit_square_mesh(h).unwrap();
        let total: f64 = (0..mesh.num_triangles()).map(|t| mesh.area(t)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!((0..mesh.num_triangles()).all(|t| mesh.area(t) > 0.0));
        prop_assert!(mesh.stats().h_max <= h * 2f64.sqrt() + 1e-12);
    }

    #[test]
    fn profile_mirror_reflects(amp in 0.0f64..0.9, y in -3.0f64..3.0) {
        let p = RoughProfile::sine_with(-1.0, amp);
        let m = p.mirrored();
        prop_assert!((m.eval(y) - p.eval(-y)).abs() < 1e-14);
        prop_assert!((p.eval(y + 1.0) - p.eval(y)).abs() < 1e-12);
    }
}
