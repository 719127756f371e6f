use fracvar_core::fracops::{
    build_left_rlfd, build_left_rlfi, build_right_adjoint, build_right_rlfd, build_right_rlfi,
    gamma, FracOperator, FracOrder, Grid,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SQRT_PI: f64 = 1.772_453_850_905_516;

fn order(v: f64) -> FracOrder {
    FracOrder::new(v).unwrap()
}

fn unit(n: usize) -> Grid {
    Grid::new(0.0, 1.0, n).unwrap()
}

/// `ln Γ(z)` by shifting to `z + k >= 40` and summing the Stirling series.
fn ln_gamma_oracle(z: f64) -> f64 {
    let mut shift = 0.0;
    let mut w = z;
    while w < 40.0 {
        shift += w.ln();
        w += 1.0;
    }
    let w2 = w * w;
    let series = 1.0 / (12.0 * w) - 1.0 / (360.0 * w * w2) + 1.0 / (1260.0 * w * w2 * w2)
        - 1.0 / (1680.0 * w * w2 * w2 * w2)
        + 1.0 / (1188.0 * w * w2 * w2 * w2 * w2);
    (w - 0.5) * w.ln() - w + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - shift
}

#[test]
fn gamma_matches_stirling_oracle_on_0_20() {
    let mut worst: f64 = 0.0;
    for i in 1..=4000 {
        let z = i as f64 * 0.005;
        let got = gamma(z).unwrap();
        let want = ln_gamma_oracle(z).exp();
        worst = worst.max(((got - want) / want).abs());
    }
    assert!(worst <= 1e-12, "worst relative error {worst:e}");
}

#[test]
fn gamma_spot_values() {
    assert!((gamma(0.5).unwrap() - SQRT_PI).abs() <= 1e-12 * SQRT_PI);
    assert!((gamma(1.5).unwrap() - 0.886_226_925_452_758).abs() <= 1e-12);
    assert!((gamma(1.0).unwrap() - 1.0).abs() <= 1e-14);
    assert!(gamma(0.0).is_err() && gamma(-1.5).is_err() && gamma(f64::NAN).is_err());
}

#[test]
fn left_rlfi_oracles() {
    let g = unit(1024);
    let op = build_left_rlfi(g, order(0.5)).unwrap();
    let one = op.apply(&vec![1.0; g.len()]).unwrap();
    let max_err = g
        .nodes()
        .zip(&one)
        .map(|(x, v)| (v - 2.0 * x.sqrt() / SQRT_PI).abs())
        .fold(0.0, f64::max);
    assert!(max_err <= 1e-5, "{max_err:e}");
    assert!((one[1024] - std::f64::consts::FRAC_2_SQRT_PI).abs() <= 1e-6);

    let t = op.apply(&g.sample(|x| x).into_values()).unwrap();
    assert!((t[1024] - 0.752_252_778_1).abs() <= 1e-6);
}

#[test]
fn left_rlfd_oracles() {
    let g = unit(1024);
    let op = build_left_rlfd(g, order(0.5)).unwrap();
    let d = op.apply(&g.sample(f64::sqrt).into_values()).unwrap();
    let g15 = gamma(1.5).unwrap();
    for i in g.interior() {
        assert!(((d[i] - g15) / g15).abs() <= 2e-2, "node {i}: {}", d[i]);
    }

    let d1 = op.apply(&vec![1.0; g.len()]).unwrap();
    let want = 1.0 / SQRT_PI;
    assert!(((d1[1024] - want) / want).abs() <= 2e-2);
    // Values grow toward the left endpoint.
    assert!(d1[1] > d1[2] && d1[2] > d1[8] && d1[8] > d1[64]);
}

#[test]
fn rlfd_blow_up_ratio_at_first_node() {
    let beta = 0.4;
    let first = |n: usize| {
        let op = build_left_rlfd(unit(n), order(beta)).unwrap();
        op.apply(&vec![1.0; n + 1]).unwrap()[1]
    };
    for n in [64, 256, 1024] {
        let ratio = first(2 * n) / first(n);
        let target = 2f64.powf(beta);
        assert!((ratio - target).abs() <= 0.2 * target, "n={n}: {ratio}");
    }
}

fn error_at_b(op: &FracOperator, nu: f64, exact: f64) -> f64 {
    let g = *op.grid();
    let v = op.apply(&g.sample(|x| x.powf(nu)).into_values()).unwrap();
    (v[g.n_cells()] - exact).abs()
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

const SIZES: [usize; 4] = [128, 256, 512, 1024];

#[test]
fn rlfi_converges_at_second_order_for_smooth_monomials() {
    let a = 0.5;
    let nu = 2.0;
    let exact = gamma(nu + 1.0).unwrap() / gamma(nu + a + 1.0).unwrap();
    let errs: Vec<f64> = SIZES
        .iter()
        .map(|&n| error_at_b(&build_left_rlfi(unit(n), order(a)).unwrap(), nu, exact))
        .collect();
    let ord = orders(&errs);
    assert!(ord.iter().all(|&p| p >= 1.8), "{errs:?} {ord:?}");

    // Linear functions are integrated exactly.
    let exact = 1.0 / gamma(2.0 + a).unwrap();
    for n in SIZES {
        assert!(error_at_b(&build_left_rlfi(unit(n), order(a)).unwrap(), 1.0, exact) <= 1e-13);
    }
}

#[test]
fn rlfi_of_sqrt_converges_at_reduced_order() {
    // t^{1/2} is not C² at 0, so the rate drops to about 1.5.
    let a = 0.5;
    let exact = gamma(1.5).unwrap() / gamma(2.0).unwrap();
    let errs: Vec<f64> = SIZES
        .iter()
        .map(|&n| error_at_b(&build_left_rlfi(unit(n), order(a)).unwrap(), 0.5, exact))
        .collect();
    let ord = orders(&errs);
    assert!(ord.iter().all(|&p| p >= 1.4), "{ord:?}");
}

#[test]
fn rlfd_converges_at_first_order() {
    let b = 0.5;
    for nu in [1.0, 2.0] {
        let exact = gamma(nu + 1.0).unwrap() / gamma(nu - b + 1.0).unwrap();
        let errs: Vec<f64> = SIZES
            .iter()
            .map(|&n| error_at_b(&build_left_rlfd(unit(n), order(b)).unwrap(), nu, exact))
            .collect();
        let ord = orders(&errs);
        assert!(ord.iter().all(|&p| p >= 0.8), "nu={nu}: {ord:?}");
    }
}

#[test]
fn semigroup_spot_check() {
    let err = |n: usize| {
        let g = unit(n);
        let f = g.sample(|x| x).into_values();
        let a = build_left_rlfi(g, order(0.3)).unwrap();
        let b = build_left_rlfi(g, order(0.4)).unwrap();
        let c = build_left_rlfi(g, order(0.7)).unwrap();
        let two = a.apply(&b.apply(&f).unwrap()).unwrap();
        let one = c.apply(&f).unwrap();
        g.interior()
            .map(|i| (two[i] - one[i]).abs())
            .fold(0.0, f64::max)
    };
    let errs: Vec<f64> = [64, 128, 256, 512].into_iter().map(err).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] < 1e-4);
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn adjoint_ibp_is_exact_for_random_pairs() {
    let g = unit(256);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lefts = [
        build_left_rlfi(g, order(0.5)).unwrap(),
        build_left_rlfi(g, order(0.2)).unwrap(),
        build_left_rlfd(g, order(0.5)).unwrap(),
        build_left_rlfd(g, order(0.85)).unwrap(),
    ];
    for l in &lefts {
        let r = build_right_adjoint(l).unwrap();
        for _ in 0..100 {
            let f = random_vec(&mut rng, g.len());
            let h = random_vec(&mut rng, g.len());
            let lhs = g.inner(&h, &l.apply(&f).unwrap());
            let rhs = g.inner(&f, &r.apply(&h).unwrap());
            let scale = g.norm(&h) * g.norm(&l.apply(&f).unwrap())
                + g.norm(&f) * g.norm(&r.apply(&h).unwrap());
            assert!(
                (lhs - rhs).abs() <= 1e-12 * scale.max(1.0),
                "{}: {lhs} vs {rhs}",
                l.kind()
            );
        }
    }
}

#[test]
fn ibp_with_constant_functions_matches_quadrature_oracle() {
    let g = unit(1024);
    let l = build_left_rlfi(g, order(0.5)).unwrap();
    let r = build_right_adjoint(&l).unwrap();
    let one = vec![1.0; g.len()];
    let want = 4.0 / (3.0 * SQRT_PI);
    let lhs = g.inner(&one, &l.apply(&one).unwrap());
    let rhs = g.inner(&one, &r.apply(&one).unwrap());
    assert!((lhs - want).abs() <= 1e-5 && (rhs - want).abs() <= 1e-5);
}

#[test]
fn mirrored_right_rlfi_endpoint_oracle() {
    let g = unit(1024);
    let r = build_right_rlfi(g, order(0.5)).unwrap();
    let v = r.apply(&vec![1.0; g.len()]).unwrap();
    assert!((v[0] - std::f64::consts::FRAC_2_SQRT_PI).abs() <= 1e-6);
    assert!(build_right_rlfd(g, order(0.5))
        .unwrap()
        .apply(&vec![0.0; g.len()])
        .unwrap()
        .iter()
        .all(|&x| x == 0.0));
}

#[test]
fn adjoint_right_rlfi_converges_at_the_endpoint() {
    // The adjoint's x=a row carries O(h^α) error; interior nodes are accurate.
    let exact0 = std::f64::consts::FRAC_2_SQRT_PI;
    let mut prev = f64::INFINITY;
    for n in [256, 1024, 4096] {
        let g = unit(n);
        let r = build_right_adjoint(&build_left_rlfi(g, order(0.5)).unwrap()).unwrap();
        let v = r.apply(&vec![1.0; g.len()]).unwrap();
        let err = (v[0] - exact0).abs();
        assert!(err < prev, "n={n}: {err}");
        prev = err;
        let interior = g
            .interior()
            .map(|i| (v[i] - 2.0 * (1.0 - g.node(i)).sqrt() / SQRT_PI).abs())
            .fold(0.0, f64::max);
        assert!(interior <= 1e-3, "n={n}: {interior}");
    }
}

#[test]
fn direct_and_adjoint_right_operators_converge_together() {
    for (kind, build_l, build_r) in [
        (
            "rlfi",
            build_left_rlfi as fn(Grid, FracOrder) -> _,
            build_right_rlfi as fn(Grid, FracOrder) -> _,
        ),
        ("rlfd", build_left_rlfd, build_right_rlfd),
    ] {
        let gap = |n: usize| {
            let g = unit(n);
            let f = g.sample(|x| (3.0 * x).cos()).into_values();
            let direct = build_r(g, order(0.5)).unwrap().apply(&f).unwrap();
            let adjoint = build_right_adjoint(&build_l(g, order(0.5)).unwrap())
                .unwrap()
                .apply(&f)
                .unwrap();
            g.interior()
                .map(|i| (direct[i] - adjoint[i]).abs())
                .fold(0.0, f64::max)
        };
        let gaps: Vec<f64> = [128, 256, 512].into_iter().map(gap).collect();
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{kind}: {gaps:?}");
    }
}

#[test]
fn left_operators_are_causal() {
    let g = unit(40);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for op in [
        build_left_rlfi(g, order(0.35)).unwrap(),
        build_left_rlfd(g, order(0.65)).unwrap(),
    ] {
        let f = random_vec(&mut rng, g.len());
        let base = op.apply(&f).unwrap();
        for j in 0..g.len() {
            let mut p = f.clone();
            p[j] += 1.0;
            let out = op.apply(&p).unwrap();
            assert!((0..j).all(|i| out[i] == base[i]), "{} node {j}", op.kind());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operators_are_linear(
        alpha in 0.05f64..0.95,
        c in -3.0f64..3.0,
        d in -3.0f64..3.0,
        f in prop::collection::vec(-1.0f64..1.0, 33),
        h in prop::collection::vec(-1.0f64..1.0, 33),
    ) {
        let g = unit(32);
        let ops = [
            build_left_rlfi(g, order(alpha)).unwrap(),
            build_left_rlfd(g, order(alpha)).unwrap(),
            build_right_rlfi(g, order(alpha)).unwrap(),
            build_right_adjoint(&build_left_rlfd(g, order(alpha)).unwrap()).unwrap(),
        ];
        let mix: Vec<f64> = f.iter().zip(&h).map(|(a, b)| c * a + d * b).collect();
        for op in &ops {
            let lf = op.apply(&f).unwrap();
            let lh = op.apply(&h).unwrap();
            let lm = op.apply(&mix).unwrap();
            for i in 0..g.len() {
                let want = c * lf[i] + d * lh[i];
                let scale = (c * lf[i]).abs() + (d * lh[i]).abs() + 1.0;
                prop_assert!((lm[i] - want).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn quadrature_weights_sum_to_length(a in -5.0f64..5.0, len in 0.01f64..10.0, n in 1usize..2000) {
        let g = Grid::new(a, a + len, n).unwrap();
        let s: f64 = g.weights().iter().sum();
        prop_assert!((s - len).abs() <= 1e-12 * len);
        prop_assert_eq!(g.node(n), a + len);
    }
}
