use mpray::catalog;
use mpray::flow::{self, PhasePoint};
use mpray::geometry::Metric;
use mpray::reduction;
use mpray::transform::{mp_ray, TensorTriple};
use mpray::{parse, Expr, MpSystem};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0usize..3).prop_map(Expr::var),
        (-2.0f64..2.0).prop_map(|c| Expr::constant((c * 100.0).round() / 100.0)),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(Expr::sin),
            inner.clone().prop_map(Expr::cos),
            inner.clone().prop_map(|a| Expr::tanh(a).exp()),
            inner.clone().prop_map(|a| a.powi(2)),
            inner.prop_map(|a| (Expr::one() + a.powi(2)).sqrt()),
        ]
    })
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-0.6f64..0.6)
}

/// Conformal metric `exp(2λ|x|²)`, linear-plus-rotation magnetic potential and
/// quadratic potential, all with random coefficients.
fn random_system() -> impl Strategy<Value = MpSystem> {
    (
        0.0f64..0.1,
        -0.3f64..0.3,
        -0.2f64..0.2,
        0.0f64..0.15,
        -0.05f64..0.05,
    )
        .prop_map(|(lambda, b, c, eps, d)| {
            let metric =
                Metric::Conformal(parse(&format!("exp(2*{lambda}*(x1^2 + x2^2))")).unwrap());
            let alpha = vec![
                parse(&format!("-{b}/2*x2 + {c}*x1*x2")).unwrap(),
                parse(&format!("{b}/2*x1")).unwrap(),
            ];
            let potential = parse(&format!("{eps}*(x1^2 + x2^2) + {d}*x1")).unwrap();
            MpSystem::new(2, 1.0, metric, alpha, potential, 0.5).unwrap()
        })
}

fn inward_start(sys: &MpSystem, theta: f64, angle: f64) -> PhasePoint {
    let x = [theta.cos(), theta.sin()];
    let d = [-(theta + angle).cos(), -(theta + angle).sin()];
    let v = flow::shell_velocity(sys, &x, &d).unwrap();
    PhasePoint::new(&x, &v[..2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jets_match_finite_differences(e in expr(), x in point()) {
        let jet = e.eval_jet1(&x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h);
            prop_assert!((fd - jet.grad[i]).abs() <= 1e-6 * (1.0 + jet.grad[i].abs()));
        }
    }

    #[test]
    fn printed_expressions_reparse(e in expr(), x in point()) {
        let again = parse(&e.to_string()).unwrap();
        let (a, b) = (e.eval(&x).unwrap(), again.eval(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} : {} vs {}", e, a, b);
    }

    #[test]
    fn lorentz_force_is_skew(sys in random_system(), x in point(), u in point(), w in point()) {
        let geo = sys.local(&x[..2]).unwrap();
        let u = [u[0], u[1], 0.0];
        let w = [w[0], w[1], 0.0];
        prop_assert!((geo.omega[0][1] + geo.omega[1][0]).abs() < 1e-15);
        let a = geo.inner(&geo.apply_lorentz(&u), &w);
        let b = geo.inner(&u, &geo.apply_lorentz(&w));
        prop_assert!((a + b).abs() < 1e-13);
        let omega_uw: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| geo.omega[i][j] * u[i] * w[j]).sum();
        prop_assert!((a - omega_uw).abs() < 1e-13);
    }

    #[test]
    fn christoffel_symbols_are_symmetric(sys in random_system(), x in point()) {
        let geo = sys.local(&x[..2]).unwrap();
        for i in 0..2 {
            prop_assert!((geo.gamma[i][0][1] - geo.gamma[i][1][0]).abs() < 1e-15);
        }
    }

    #[test]
    fn energy_is_conserved(sys in random_system(), theta in 0.0f64..std::f64::consts::TAU, angle in -1.4f64..1.4) {
        let traj = flow::integrate(&sys, &inward_start(&sys, theta, angle), None).unwrap();
        traj.tau().unwrap();
        prop_assert!(traj.energy_drift <= 1e-9, "drift {}", traj.energy_drift);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ray_transform_is_linear(
        sys in random_system(),
        theta in 0.0f64..std::f64::consts::TAU,
        angle in -1.3f64..1.3,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let f = TensorTriple::new(
            vec![vec![parse("x1").unwrap(), parse("x2^2").unwrap()], vec![parse("x2^2").unwrap(), Expr::one()]],
            vec![parse("x1*x2").unwrap(), Expr::zero()],
            parse("sin(x1)").unwrap(),
        ).unwrap();
        let g = TensorTriple::new(
            vec![vec![Expr::zero(), parse("x1").unwrap()], vec![parse("x1").unwrap(), parse("x2").unwrap()]],
            vec![Expr::one(), parse("x1^2").unwrap()],
            parse("x1 + x2").unwrap(),
        ).unwrap();
        let start = inward_start(&sys, theta, angle);
        let (x, v) = (&start.x[..2], &start.v[..2]);
        let lhs = mp_ray(&sys, &f.linear_combination(a, &g, b), x, v).unwrap();
        let rhs = a * mp_ray(&sys, &f, x, v).unwrap() + b * mp_ray(&sys, &g, x, v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()));
    }

    #[test]
    fn reduced_flow_follows_the_same_curve(sys in random_system(), theta in 0.0f64..std::f64::consts::TAU, angle in -1.3f64..1.3) {
        let (dist, speed) = reduction::correspondence_residual(&sys, &inward_start(&sys, theta, angle), 20).unwrap();
        prop_assert!(dist <= 1e-7 && speed <= 1e-7, "{} {}", dist, speed);
    }
}

#[test]
fn catalog_systems_are_valid_and_named() {
    let names: Vec<String> = catalog::standard().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["SYS-E", "SYS-B(0.2)", "SYS-U(0.1)", "SYS-C(0.05)"]);
    for n in &names {
        catalog::by_name(n).unwrap().validate().unwrap();
    }
    assert!(catalog::by_name("SYS-Q").is_err());
}

#[test]
fn three_dimensional_chord() {
    let sys = catalog::sys_e_dim(3).unwrap();
    let x = [0.0, 0.0, -1.0];
    let y = [0.6, 0.0, 0.8];
    let shot = mpray::action::shoot(&sys, &x, &y).unwrap();
    let d = (0.36f64 + 3.24).sqrt();
    assert!(shot.miss <= 1e-10);
    assert!((shot.trajectory.tau().unwrap() - d).abs() < 1e-9);
}
