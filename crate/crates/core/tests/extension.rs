use halfspace::extension::{
    extend_neumann, extension_residual, neumann_boundary_flux, neumann_flux_constant,
    BoundaryFunction, ExtensionKind, ExtensionOptions, FluxLimitOptions,
};
use halfspace::{Point, WeightExponent};

fn wa(a: f64) -> WeightExponent {
    WeightExponent::new(a).unwrap()
}

fn probe_grid(n: usize) -> Vec<Point> {
    let mut pts = Vec::new();
    for &t in &[-0.6, 0.0, 0.6] {
        for &y in &[0.3, 0.8, 1.5] {
            pts.push(if n == 2 {
                Point::new2(t, y)
            } else {
                Point::new3(t, 0.5 * t, y)
            });
        }
    }
    pts
}

#[test]
fn neumann_extension_is_positive_at_unit_height() {
    let f = BoundaryFunction::gaussian(1.0, &[0.0, 0.0], 1.0).unwrap();
    let v = extend_neumann(&f, wa(0.5), &[Point::new3(0.0, 0.0, 1.0)], &ExtensionOptions::default())
        .unwrap();
    assert!(v[0].value.is_finite() && v[0].value > 0.0, "{v:?}");
}

#[test]
fn extensions_solve_the_equation() {
    let opts = ExtensionOptions {
        abs_tol: 1e-13,
        ..ExtensionOptions::default()
    };
    let h = 1.0 / 64.0;
    let cases = [
        (ExtensionKind::Neumann, 3, 0.5),
        (ExtensionKind::Dirichlet, 2, 0.0),
        (ExtensionKind::Dirichlet, 2, -0.5),
        (ExtensionKind::Dirichlet, 3, 0.5),
    ];
    for (kind, n, a) in cases {
        let center = vec![0.0; n - 1];
        let f = BoundaryFunction::gaussian(1.0, &center, 1.0).unwrap();
        let r = extension_residual(kind, &f, wa(a), &probe_grid(n), h, &opts).unwrap();
        assert!(r <= 1e-6, "{kind:?} n={n} a={a}: residual {r:.3e}");
    }
}

#[test]
fn neumann_flux_is_consistent_across_data() {
    let a = wa(0.5);
    let kappa = neumann_flux_constant(a, 3).unwrap();
    let opts = FluxLimitOptions::default();
    let data = [
        (BoundaryFunction::gaussian(1.0, &[0.0, 0.0], 1.0).unwrap(), [0.0, 0.0]),
        (BoundaryFunction::gaussian(2.0, &[0.5, -0.3], 0.7).unwrap(), [0.2, 0.1]),
    ];
    for (f, x) in &data {
        let r = neumann_boundary_flux(f, a, x, &opts).unwrap();
        let ratio = -r.value / f.value(x);
        assert!((ratio / kappa - 1.0).abs() <= 1e-3, "ratio {ratio}, κ {kappa}");
    }
}
