use genfrac::noether::{
    bilinear_d, bilinear_i, check_invariance, conserved_quantity, conserved_quantity_nodal, noether_residual,
    relative_stdev, Generator,
};
use genfrac::variational::{el_residual, solve_fundamental};
use genfrac::{
    power_derivative_kernel, profile_kernel, Boundary, Error, Grid, GridFunction, LagrangianSpec, OperatorHandle, PSet,
    ProblemSpec, Profile,
};
use proptest::prelude::*;
use statrs::function::gamma::gamma;

fn unit_op() -> OperatorHandle {
    OperatorHandle::new(PSet::left(0.0, 1.0).unwrap(), profile_kernel(Profile::Constant(1.0), None)).unwrap()
}

fn caputo(alpha: f64) -> OperatorHandle {
    OperatorHandle::new(PSet::left(0.0, 1.0).unwrap(), power_derivative_kernel(alpha).unwrap()).unwrap()
}

fn square_by() -> LagrangianSpec {
    LagrangianSpec::new("x4^2", |x| x.by * x.by)
        .with_gradient(|x| [0.0, 0.0, 0.0, 2.0 * x.by])
        .with_dependencies([false, false, false, true])
}

/// `(x4 - phi(t))^2` with `phi` the Caputo derivative of `t^2`.
fn tracking_by(alpha: f64) -> LagrangianSpec {
    let c = 2.0 / gamma(3.0 - alpha);
    let phi = move |t: f64| c * t.powf(2.0 - alpha);
    LagrangianSpec::new("(x4-phi)^2", move |x| (x.by - phi(x.t)).powi(2))
        .with_gradient(move |x| [0.0, 0.0, 0.0, 2.0 * (x.by - phi(x.t))])
        .with_dependencies([false, false, false, true])
}

fn solve(f: LagrangianSpec, op: &OperatorHandle, n: usize, left: Option<f64>, right: f64) -> GridFunction {
    let spec = ProblemSpec {
        lagrangian: f,
        op: op.clone(),
        boundary: Boundary { left, right },
        constraints: vec![],
        grid: Grid::new(0.0, 1.0, n).unwrap(),
    };
    solve_fundamental(&spec).unwrap().y
}

#[test]
fn bilinear_d_of_constants_differentiates_dual_integral() {
    let g = Grid::new(0.0, 1.0, 512).unwrap();
    let one = GridFunction::constant(g, 1.0);
    let d = bilinear_d(&one, &one, &caputo(0.5)).unwrap();
    let j = g.node_index(0.75).unwrap();
    let exact = -2.0 / std::f64::consts::PI.sqrt();
    assert!((d.values[j] - exact).abs() <= 1e-4, "{} vs {exact}", d.values[j]);
}

#[test]
fn bilinear_d_on_diagonal_unfolds() {
    let g = Grid::new(0.0, 1.0, 64).unwrap();
    let op = caputo(0.3);
    let f = GridFunction::from_fn(g, |t| (2.0 * t).sin());
    let d = bilinear_d(&f, &f, &op).unwrap();
    let disc = op.discretize(&g).unwrap();
    let a = disc.apply_a_dual(&f.values);
    let b = disc.apply_b(&f.values);
    for j in 0..g.len() {
        assert!((d.values[j] - f.values[j] * (a[j] + b[j])).abs() < 1e-12);
    }
}

#[test]
fn bilinear_i_vanishes_on_diagonal_for_symmetric_sets() {
    let g = Grid::new(0.0, 1.0, 64).unwrap();
    let op = OperatorHandle::new(PSet::new(0.0, 1.0, 0.7, 0.7).unwrap(), power_derivative_kernel(0.4).unwrap()).unwrap();
    let f = GridFunction::from_fn(g, |t| 1.0 + t * t);
    assert!(bilinear_i(&f, &f, &op).unwrap().max_abs() < 1e-13);
}

#[test]
fn translation_leaves_by_lagrangian_exactly_invariant() {
    let g = Grid::new(0.0, 1.0, 128).unwrap();
    let y = GridFunction::from_fn(g, |t| t.sin() + t * t);
    for op in [caputo(0.5), unit_op()] {
        for c in [1.0, -2.5] {
            let r = check_invariance(&tracking_by(0.5), &Generator::constant(c, 1e-2).unwrap(), &op, &y).unwrap();
            assert!(r.exact && r.invariant(), "{r:?}");
        }
    }
}

#[test]
fn shift_of_value_is_detected() {
    let g = Grid::new(0.0, 1.0, 32).unwrap();
    let y = GridFunction::from_fn(g, |t| 1.0 + t);
    let f = LagrangianSpec::new("x1^2", |x| x.y * x.y).with_dependencies([true, false, false, false]);
    let r = check_invariance(&f, &Generator::constant(1.0, 1e-2).unwrap(), &unit_op(), &y).unwrap();
    assert!(!r.invariant());
    assert!((r.linear_coefficient - 4.0).abs() < 1e-10, "{}", r.linear_coefficient);
    assert!((r.quadratic_coefficient - 1.0).abs() < 1e-8);
}

#[test]
fn shift_leaves_kinetic_lagrangian_invariant() {
    let g = Grid::new(0.0, 1.0, 32).unwrap();
    let y = GridFunction::from_fn(g, |t| t.exp());
    let f = LagrangianSpec::new("x3^2", |x| x.dy * x.dy).with_dependencies([false, false, true, false]);
    let r = check_invariance(&f, &Generator::constant(0.3, 1e-2).unwrap(), &unit_op(), &y).unwrap();
    assert!(r.invariant(), "{r:?}");
}

#[test]
fn tracking_extremal_is_not_a_noether_case() {
    let g = Grid::new(0.0, 1.0, 128).unwrap();
    let op = OperatorHandle::new(PSet::left(0.0, 1.0).unwrap(), profile_kernel(Profile::Exponential { rate: -1.0 }, None))
        .unwrap();
    let f = LagrangianSpec::new("(x2+t)^2", |x| (x.ky + x.t).powi(2)).with_dependencies([false, true, false, false]);
    let gen = Generator::constant(1.0, 1e-2).unwrap();
    let generic = GridFunction::from_fn(g, |t| t);
    assert!(!check_invariance(&f, &gen, &op, &generic).unwrap().invariant());
    assert!(noether_residual(&f, &gen, &op, &generic).unwrap().max_abs > 1e-2);
    // every partial vanishes on the extremal itself, so both diagnostics degenerate there
    let extremal = GridFunction::from_fn(g, |t| -1.0 - t);
    assert!(check_invariance(&f, &gen, &op, &extremal).unwrap().first_order);
    assert!(noether_residual(&f, &gen, &op, &extremal).unwrap().max_abs < 1e-3);
}

#[test]
fn noether_residual_vanishes_on_solver_extremal() {
    let alpha = 0.5;
    let op = caputo(alpha);
    let f = tracking_by(alpha);
    let y = solve(f.clone(), &op, 512, Some(0.0), 1.0);
    let el = el_residual(&f, &op, &y).unwrap().max_abs;
    let r = noether_residual(&f, &Generator::constant(1.0, 1e-2).unwrap(), &op, &y).unwrap();
    assert!(r.max_abs <= 5e-4, "noether {} el {el}", r.max_abs);
    // dF/dx3 = dF/dx2 = 0, so the Noether residual is the Euler-Lagrange residual up to sign
    assert!(r.max_abs <= el * (1.0 + 1e-12) + 1e-14, "noether {} el {el}", r.max_abs);
}

#[test]
fn conserved_quantity_constant_on_unit_kernel_extremal() {
    let op = unit_op();
    let y = solve(square_by(), &op, 256, Some(0.0), 1.0);
    let q = conserved_quantity(&square_by(), &op, &y).unwrap();
    assert!(relative_stdev(&q) <= 1e-3, "{}", relative_stdev(&q));
    assert!(relative_stdev(&conserved_quantity_nodal(&square_by(), &op, &y).unwrap()) <= 1e-3);
}

#[test]
fn conserved_quantity_on_singular_caputo_extremal() {
    // K*[g] = C forces dF/dx4 = C (1-t)^(alpha-1)/Gamma(alpha); y(1) = 1 gives C = 2 (2 alpha - 1) Gamma(alpha)^2
    let alpha = 0.75;
    let op = caputo(alpha);
    let exact = gamma(alpha).powi(2) * (2.0 * alpha - 1.0) * 2.0;
    let mut errors = vec![];
    for n in [64, 256] {
        let y = solve(square_by(), &op, n, Some(0.0), 1.0);
        let q = conserved_quantity(&square_by(), &op, &y).unwrap();
        assert!(relative_stdev(&q) <= 1e-3, "n={n}: {}", relative_stdev(&q));
        let mean = q.values.iter().sum::<f64>() / q.values.len() as f64;
        errors.push((mean - exact).abs());
    }
    assert!(errors[1] < 0.6 * errors[0] && errors[1] < 1e-2, "{errors:?}");
}

#[test]
fn conserved_quantity_of_constant_is_zero() {
    let g = Grid::new(0.0, 1.0, 32).unwrap();
    let q = conserved_quantity(&square_by(), &caputo(0.5), &GridFunction::constant(g, 3.0)).unwrap();
    assert_eq!(q.max_abs(), 0.0);
}

#[test]
fn conserved_quantity_negative_control() {
    let g = Grid::new(0.0, 1.0, 256).unwrap();
    let y = GridFunction::from_fn(g, |t| t * t);
    let exact = |t: f64| 2.0 / 3.0 * (1.0 - t.powi(3));
    for q in [
        conserved_quantity(&square_by(), &unit_op(), &y).unwrap(),
        conserved_quantity_nodal(&square_by(), &unit_op(), &y).unwrap(),
    ] {
        for (t, v) in g.nodes().iter().zip(&q.values) {
            assert!((v - exact(*t)).abs() <= 1e-4, "t={t}: {v}");
        }
        assert!(relative_stdev(&q) > 0.1);
    }
}

#[test]
fn conserved_quantity_requires_by_only_lagrangian() {
    let g = Grid::new(0.0, 1.0, 16).unwrap();
    let f = LagrangianSpec::new("x1*x4", |x| x.y * x.by).with_dependencies([true, false, false, true]);
    assert!(matches!(
        conserved_quantity(&f, &unit_op(), &GridFunction::zeros(g)),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn derivative_of_conserved_quantity_is_dual_derivative() {
    let g = Grid::new(0.0, 1.0, 128).unwrap();
    let op = caputo(0.4);
    let f = tracking_by(0.4);
    let y = GridFunction::from_fn(g, |t| t.powi(3) + t);
    let q = conserved_quantity_nodal(&f, &op, &y).unwrap();
    let disc = op.discretize(&g).unwrap();
    let dq = disc.derivative(&q.values);
    let traj = genfrac::variational::Trajectory::new(&disc, &y.values);
    let [_, _, _, d4] = traj.partials(&f).unwrap();
    let a = disc.apply_a_dual(&d4);
    for j in 1..g.n {
        assert!((dq[j] - a[j]).abs() <= 1e-10 * (1.0 + a[j].abs()), "j={j}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bilinear_operators_are_bilinear(
        c1 in prop::collection::vec(-2.0..2.0f64, 3),
        c2 in prop::collection::vec(-2.0..2.0f64, 3),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        alpha in 0.1..0.9f64,
    ) {
        let g = Grid::new(0.0, 1.0, 32).unwrap();
        let op = OperatorHandle::new(PSet::new(0.0, 1.0, 0.6, 0.4).unwrap(), power_derivative_kernel(alpha).unwrap()).unwrap();
        let f1 = GridFunction::from_fn(g, |t| c1[0] + c1[1] * t + c1[2] * t * t);
        let f2 = GridFunction::from_fn(g, |t| c2[0] + c2[1] * (3.0 * t).sin() + c2[2] * t.exp());
        let h = GridFunction::from_fn(g, |t| 1.0 + t);
        let mix = f1.zip_with(&f2, |u, v| a * u + b * v).unwrap();
        for op_fn in [bilinear_d, bilinear_i] {
            let lhs = op_fn(&mix, &h, &op).unwrap();
            let r1 = op_fn(&f1, &h, &op).unwrap();
            let r2 = op_fn(&f2, &h, &op).unwrap();
            let lhs2 = op_fn(&h, &mix, &op).unwrap();
            let s1 = op_fn(&h, &f1, &op).unwrap();
            let s2 = op_fn(&h, &f2, &op).unwrap();
            for j in 0..g.len() {
                let want = a * r1.values[j] + b * r2.values[j];
                prop_assert!((lhs.values[j] - want).abs() <= 1e-10 * (1.0 + want.abs()));
                let want2 = a * s1.values[j] + b * s2.values[j];
                prop_assert!((lhs2.values[j] - want2).abs() <= 1e-10 * (1.0 + want2.abs()));
            }
        }
    }
}
