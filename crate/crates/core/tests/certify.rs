use fracvar_core::certify::{
    check_convexity, excess, verify_field_minimizer, ConvexBox, FieldVerdict,
};
use fracvar_core::expr::parse;
use fracvar_core::fracops::{build_left_rlfi, gamma, Grid, SampledFn};
use fracvar_core::varproblem::evaluate_functional;
use fracvar_core::{ExactField, FracOrder, VarProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn region(u: (f64, f64), v: (f64, f64)) -> ConvexBox {
    ConvexBox {
        x: (0.0, 1.0),
        u,
        v,
    }
}

#[test]
fn convexity_verdicts_for_reference_lagrangians() {
    let b = region((-1.0, 1.0), (-1.0, 1.0));
    for (src, convex) in [("v^2", true), ("-(v^2)", false), ("u^2 + v^2 + u*v", true)] {
        let l = parse(src).unwrap();
        let r = check_convexity(&l, b, 9).unwrap();
        assert_eq!(r.convex, convex, "{src}");
        if let Some(c) = r.counterexample {
            assert!(c.violation < -1e-9);
            assert!((c.reevaluate(&l).unwrap() - c.violation).abs() <= 1e-9);
        }
        assert_eq!(r.counterexample.is_none(), convex);
    }
}

#[test]
fn convexity_is_inherited_by_sub_boxes() {
    let outer = region((-2.0, 2.0), (-2.0, 2.0));
    let inner = [
        region((-1.0, 1.0), (-1.0, 1.0)),
        region((0.0, 2.0), (-2.0, 0.0)),
        region((0.5, 0.75), (1.0, 1.9)),
    ];
    for src in ["v^2 + u^2", "exp(v) + u^2 - x*u", "(u + v)^2 + v^4"] {
        let l = parse(src).unwrap();
        assert!(check_convexity(&l, outer, 7).unwrap().convex, "{src}");
        for b in inner {
            assert!(check_convexity(&l, b, 7).unwrap().convex, "{src} on {b:?}");
        }
    }
}

#[test]
fn excess_is_nonnegative_for_v_convex_lagrangians() {
    let b = region((-2.0, 2.0), (-2.0, 2.0));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for src in ["v^2/2", "exp(v) + u^2", "(v - u)^2 + v^4 + x"] {
        let l = parse(src).unwrap();
        assert!(check_convexity(&l, b, 7).unwrap().convex, "{src}");
        let mut min = f64::INFINITY;
        for _ in 0..10_000 {
            let x = rng.gen_range(b.x.0..=b.x.1);
            let u = rng.gen_range(b.u.0..=b.u.1);
            let z = rng.gen_range(b.v.0..=b.v.1);
            let w = rng.gen_range(b.v.0..=b.v.1);
            min = min.min(excess(&l, x, u, z, w).unwrap());
        }
        assert!(min >= -1e-9, "{src}: {min}");
    }
}

fn field(phi: &str, s: &str) -> ExactField {
    ExactField::new(
        parse(phi).unwrap(),
        parse(s).unwrap(),
        (0.0, 1.0),
        (-1.0, 3.0),
    )
    .unwrap()
}

fn half() -> FracOrder {
    FracOrder::new(0.5).unwrap()
}

#[test]
fn exact_field_value_formula() {
    let grid = Grid::new(0.0, 1.0, 1024).unwrap();
    let g15 = gamma(1.5).unwrap();
    let l = parse("v^2/2").unwrap();
    for (c, phi, s, tol) in [(1.0, "1", "y - x/2", 1e-2), (2.0, "2", "2*y - 2*x", 4e-2)] {
        let y0 = grid.sample(|x| c * x.sqrt() / g15);
        let r = verify_field_minimizer(&l, &field(phi, s), &y0, half()).unwrap();
        assert_eq!(r.verdict, FieldVerdict::Minimizer, "c={c}: {r:?}");
        let want = c * c / 2.0;
        assert!((r.j - want).abs() <= tol, "c={c}: J={}", r.j);
        assert!(
            (r.field_value - want).abs() <= tol,
            "c={c}: S={}",
            r.field_value
        );
        assert!(r.gap <= tol);
        assert!(r.min_excess >= -1e-9);
    }
}

#[test]
fn zero_curve_is_not_a_field_trajectory() {
    let grid = Grid::new(0.0, 1.0, 256).unwrap();
    let l = parse("v^2/2").unwrap();
    let r = verify_field_minimizer(&l, &field("1", "y - x/2"), &SampledFn::zeros(grid), half())
        .unwrap();
    assert_eq!(r.verdict, FieldVerdict::NotFieldTrajectory);
    assert!(
        (r.field_residual_norm - 1.0).abs() < 0.1,
        "{}",
        r.field_residual_norm
    );
}

#[test]
fn bad_field_is_reported() {
    let grid = Grid::new(0.0, 1.0, 64).unwrap();
    let y0 = grid.sample(|x| x.sqrt() / gamma(1.5).unwrap());
    let r =
        verify_field_minimizer(&parse("v^2/2").unwrap(), &field("1", "y"), &y0, half()).unwrap();
    assert_eq!(r.verdict, FieldVerdict::FieldCheckFailed);
}

#[test]
fn field_trajectory_beats_perturbations_with_equal_endpoint_channel() {
    let grid = Grid::new(0.0, 1.0, 1024).unwrap();
    let g15 = gamma(1.5).unwrap();
    let l = parse("v^2/2").unwrap();
    let y0 = grid.sample(|x| x.sqrt() / g15);
    let report = verify_field_minimizer(&l, &field("1", "y - x/2"), &y0, half()).unwrap();
    assert_eq!(report.verdict, FieldVerdict::Minimizer);

    let p = VarProblem::basic(0.0, 1.0, 0.5, 0.5, l).unwrap();
    let j0 = evaluate_functional(&p, std::slice::from_ref(&y0), &grid).unwrap();
    let int = build_left_rlfi(grid, half()).unwrap();
    let last = grid.n_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let bump = |rng: &mut ChaCha8Rng| {
        let (k, c, s) = (
            rng.gen_range(1.0..6.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.0..1.0),
        );
        grid.sample(move |x| c * (k * x + s).sin() * x)
    };
    for _ in 0..20 {
        // Combine two bumps so that I^{1/2} of the sum vanishes at b.
        let b1 = bump(&mut rng);
        let b2 = bump(&mut rng);
        let i1 = int.apply(b1.values()).unwrap()[last];
        let i2 = int.apply(b2.values()).unwrap()[last];
        if i2.abs() < 1e-6 {
            continue;
        }
        let y: Vec<f64> = y0
            .values()
            .iter()
            .zip(b1.values().iter().zip(b2.values()))
            .map(|(y, (p, q))| y + p - i1 / i2 * q)
            .collect();
        let iy = int.apply(&y).unwrap();
        assert!((iy[last] - report.integral_channel[last]).abs() <= 1e-12);
        let y = SampledFn::new(grid, y).unwrap();
        let j = evaluate_functional(&p, &[y], &grid).unwrap();
        assert!(j >= j0 - 5e-2, "{j} < {j0}");
    }
}
