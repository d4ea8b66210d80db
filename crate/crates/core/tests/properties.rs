use halfspace::extension::{extend_dirichlet, BoundaryFunction, ExtensionOptions};
use halfspace::field::{HalfSpaceFunction, TestFunction};
use halfspace::grid::{HalfSpaceGrid, NodeKind};
use halfspace::kernels::{eval_kernel, eval_kernel_at, KernelSpec};
use halfspace::liouville::{uniqueness_experiment, ExperimentConfig, Scenario};
use halfspace::operator::{BoundaryDatum, Stencil};
use halfspace::solver::{max_principle_check, solve, InitialGuess, SolveConfig};
use halfspace::transform::{kelvin, MoebiusMap};
use halfspace::{Point, WeightExponent};
use proptest::prelude::*;

fn wa(a: f64) -> WeightExponent {
    WeightExponent::new(a).unwrap()
}

fn point(n: usize) -> impl Strategy<Value = Point> {
    (prop::collection::vec(-3.0..3.0f64, n - 1), 0.05..3.0f64).prop_map(|(t, xn)| Point::from_parts(&t, xn).unwrap())
}

fn dim_and_point() -> impl Strategy<Value = (usize, Point)> {
    (2usize..=3).prop_flat_map(|n| (Just(n), point(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn poisson_kernel_positive_and_homogeneous((n, x) in dim_and_point(), a in -0.9..0.9f64, t in 0.1..10.0f64) {
        let spec = KernelSpec::poisson(a, n).unwrap();
        let v = eval_kernel_at(&spec, &x).unwrap();
        prop_assert!(v > 0.0);
        let scaled = eval_kernel_at(&spec, &(t * x)).unwrap();
        let expect = t.powf(1.0 - n as f64) * v;
        prop_assert!((scaled - expect).abs() <= 1e-12 * expect.abs());
    }

    #[test]
    fn radial_symmetry((n, x) in dim_and_point(), a in -0.9..0.9f64, phi in 0.01..3.13f64) {
        // Rotate within the (x_1, x_n) plane, keeping |x| and x_n > 0.
        let r = (x.get(0).powi(2) + x.xn().powi(2)).sqrt();
        let y = x.with(0, r * phi.cos()).with_xn(r * phi.sin());
        let gn = KernelSpec::gamma_n(a, n).unwrap();
        let gd = KernelSpec::gamma_d(a, n).unwrap();
        let p = 1.0 - a;
        let (a1, a2) = (eval_kernel_at(&gn, &x).unwrap(), eval_kernel_at(&gn, &y).unwrap());
        prop_assert!((a1 - a2).abs() <= 1e-12 * a1.abs());
        let b1 = eval_kernel_at(&gd, &x).unwrap() / x.xn().powf(p);
        let b2 = eval_kernel_at(&gd, &y).unwrap() / y.xn().powf(p);
        prop_assert!((b1 - b2).abs() <= 1e-11 * b1.abs());
    }

    #[test]
    fn inversion_is_an_involution((n, y) in dim_and_point(), c in -2.0..2.0f64, lam in 0.1..3.0f64) {
        let center = vec![c; n - 1];
        let map = MoebiusMap::at_boundary(&center, lam).unwrap();
        prop_assume!((y - map.center()).norm() > 1e-3);
        let back = map.invert_point(&map.invert_point(&y).unwrap()).unwrap();
        prop_assert!((back - y).norm() <= 1e-12 * (1.0 + y.norm()));
    }

    #[test]
    fn sphere_is_fixed(n in 2usize..=3, c in -2.0..2.0f64, lam in 0.1..3.0f64, theta in 0.05..3.09f64, phi in 0.0..std::f64::consts::TAU) {
        let center = vec![c; n - 1];
        let map = MoebiusMap::at_boundary(&center, lam).unwrap();
        let dir = if n == 2 {
            Point::new2(theta.cos(), theta.sin())
        } else {
            Point::new3(theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin())
        };
        let y = map.center() + lam * dir;
        let img = map.invert_point(&y).unwrap();
        prop_assert!((img - y).norm() <= 1e-12 * (1.0 + y.norm()));
    }

    #[test]
    fn kelvin_twice_is_identity((n, y) in dim_and_point(), a in -0.9..0.9f64, lam in 0.2..2.0f64) {
        prop_assume!((wa(a).value() - (2.0 - n as f64)).abs() > 1e-9);
        let map = MoebiusMap::at_boundary(&vec![0.3; n - 1], lam).unwrap();
        prop_assume!((y - map.center()).norm() > 1e-2);
        let u = TestFunction::Rational;
        let twice = kelvin(kelvin(u, map, wa(a)), map, wa(a));
        let (lhs, rhs) = (twice.value(&y), u.value(&y));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn kelvin_of_gamma_n_is_one((n, y) in dim_and_point(), a in -0.9..0.9f64) {
        prop_assume!((a - (2.0 - n as f64)).abs() > 1e-9);
        let spec = KernelSpec::gamma_n(a, n).unwrap();
        let g = halfspace::field::FnField(move |p: &Point| eval_kernel_at(&spec, p).unwrap());
        let map = MoebiusMap::at_boundary(&vec![0.0; n - 1], 1.0).unwrap();
        let v = kelvin(g, map, wa(a)).eval(&y).unwrap();
        prop_assert!((v - 1.0).abs() <= 1e-12);
    }
}

fn small_grid() -> impl Strategy<Value = HalfSpaceGrid> {
    (2usize..=3, 2usize..=4).prop_map(|(n, m)| {
        let nodes = 2 * m + 1;
        HalfSpaceGrid::cube(n, 1.0, nodes).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stencil_is_symmetric_and_negative(g in small_grid(), a in -0.9..0.9f64, seed in any::<u64>()) {
        let stencil = Stencil::new(g, wa(a));
        let mut s = seed;
        let mut draw = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let free: Vec<bool> = (0..g.len()).map(|i| g.kind(i) != NodeKind::Truncation).collect();
        let u: Vec<f64> = free.iter().map(|&f| if f { draw() } else { 0.0 }).collect();
        let v: Vec<f64> = free.iter().map(|&f| if f { draw() } else { 0.0 }).collect();
        let form = |x: &[f64], y: &[f64]| -> f64 {
            (0..g.len()).filter(|&i| free[i]).map(|i| stencil.edge_sum(x, i) * y[i]).sum()
        };
        let (uv, vu) = (form(&u, &v), form(&v, &u));
        prop_assert!((uv - vu).abs() <= 1e-12 * (1.0 + uv.abs()));
        prop_assert!(form(&u, &u) <= 1e-14);
        for k in 0..g.vertical_nodes() {
            prop_assert!(stencil.tangential(k) > 0.0);
            if k + 1 < g.vertical_nodes() {
                prop_assert!(stencil.vertical(k) > 0.0);
            }
        }
    }
}

fn trig_data(c: [f64; 3]) -> impl Fn(&Point) -> f64 + Clone + Send + Sync + 'static {
    move |p: &Point| c[0] * (2.0 * p.get(0)).cos() + c[1] * (3.0 * p.xn()).sin() + c[2] * p.get(0) * p.xn()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solves_agree_across_initial_guesses(a in -0.9..0.9f64, c in prop::array::uniform3(-1.0..1.0f64), k in -2.0..2.0f64) {
        let g = HalfSpaceGrid::cube(2, 1.0, 17).unwrap();
        let f = trig_data(c);
        let data = BoundaryDatum::dirichlet(f.clone(), f);
        let base = SolveConfig { tolerance: 1e-11, ..SolveConfig::default() };
        let (u1, _) = solve(g, wa(a), &data, &SolveConfig { initial_guess: InitialGuess::Zero, ..base }).unwrap();
        let (u2, _) = solve(g, wa(a), &data, &SolveConfig { initial_guess: InitialGuess::Constant(k), ..base }).unwrap();
        let scale = u1.values().iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        let diff = u1.difference(&u2).unwrap();
        let worst = diff.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(worst <= 10.0 * base.tolerance * scale, "{worst}");
        prop_assert!(max_principle_check(&u1, &data, base.tolerance).ok);
    }

    #[test]
    fn symmetric_data_gives_symmetric_solution(a in -0.9..0.9f64, c in prop::array::uniform2(-1.0..1.0f64)) {
        let g = HalfSpaceGrid::cube(2, 1.0, 17).unwrap();
        let f = move |p: &Point| c[0] * (2.0 * p.get(0)).cos() + c[1] * p.xn() * p.get(0).powi(2);
        let data = BoundaryDatum::dirichlet(f, f);
        let cfg = SolveConfig { tolerance: 1e-12, ..SolveConfig::default() };
        let (u, _) = solve(g, wa(a), &data, &cfg).unwrap();
        let m = g.tangential_nodes();
        let scale = u.values().iter().fold(1e-300f64, |s, v| s.max(v.abs()));
        for k in 0..g.vertical_nodes() {
            for t in 0..m {
                let l = u.values()[g.index(&[t], k)];
                let r = u.values()[g.index(&[m - 1 - t], k)];
                prop_assert!((l - r).abs() <= 1e-9 * scale);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn extension_is_linear_positive_and_translation_equivariant(
        a in -0.5..0.5f64,
        alpha in -2.0..2.0f64,
        beta in -2.0..2.0f64,
        shift in -1.0..1.0f64,
        x in -1.0..1.0f64,
        y in 0.2..2.0f64,
    ) {
        let opts = ExtensionOptions::default();
        let f = BoundaryFunction::gaussian(1.0, &[0.0], 1.0).unwrap();
        let g = BoundaryFunction::gaussian(0.5, &[0.7], 0.6).unwrap();
        let p = [Point::new2(x, y)];
        let ef = extend_dirichlet(&f, wa(a), &p, &opts).unwrap()[0].value;
        let eg = extend_dirichlet(&g, wa(a), &p, &opts).unwrap()[0].value;
        let comb = BoundaryFunction::combine(alpha, &f, beta, &g).unwrap();
        let ec = extend_dirichlet(&comb, wa(a), &p, &opts).unwrap()[0].value;
        prop_assert!((ec - (alpha * ef + beta * eg)).abs() <= 1e-7);
        prop_assert!(ef > 0.0 && eg > 0.0);
        let moved = f.translated(&[shift]).unwrap();
        let em = extend_dirichlet(&moved, wa(a), &[Point::new2(x + shift, y)], &opts).unwrap()[0].value;
        prop_assert!((em - ef).abs() <= 1e-7);
    }
}

#[test]
fn poisson_kernel_matches_point_form() {
    let spec = KernelSpec::poisson(0.3, 3).unwrap();
    let p = Point::new3(0.2, -0.4, 0.7);
    assert_eq!(
        eval_kernel(&spec, &[0.2, -0.4], 0.7).unwrap(),
        eval_kernel_at(&spec, &p).unwrap()
    );
}

#[test]
fn uniqueness_is_stable_under_refinement() {
    let cfg = ExperimentConfig::default();
    for (n, a) in [(2, 0.5), (2, -0.5), (3, 0.0)] {
        let coarse = HalfSpaceGrid::cube(n, 1.0, 17).unwrap();
        let fine = coarse.refined().unwrap();
        let scenario = Scenario::Dirichlet { c_star: 1.5, c2: -0.5 };
        let (_, r1) = uniqueness_experiment(scenario, wa(a), coarse, &cfg).unwrap();
        let (_, r2) = uniqueness_experiment(scenario, wa(a), fine, &cfg).unwrap();
        assert!((r1.fit.c_star - r2.fit.c_star).abs() <= 1e-8, "{r1:?} {r2:?}");
        assert!((r1.fit.c2 - r2.fit.c2).abs() <= 1e-8);
    }
}
