use advi_core::autodiff::{log_sum_exp, Graph, Primitive, Real, Var};
use proptest::prelude::*;

const H: f64 = 1e-5;

/// Evaluate `op` on plain values through a throwaway graph.
fn value_of(op: Primitive, xs: &[f64]) -> f64 {
    let g = Graph::new();
    let vars = g.variables(xs).unwrap();
    g.apply(op, &vars).unwrap().value()
}

/// Compare every backward partial of `op` at `xs` with a central difference.
fn check_primitive(op: Primitive, xs: &[f64]) -> Result<(), TestCaseError> {
    let g = Graph::new();
    let vars = g.variables(xs).unwrap();
    let out = g.apply(op, &vars).unwrap();
    let grads = g.backward(&out);
    for (i, v) in vars.iter().enumerate() {
        let mut hi = xs.to_vec();
        let mut lo = xs.to_vec();
        hi[i] += H;
        lo[i] -= H;
        let fd = (value_of(op, &hi) - value_of(op, &lo)) / (2.0 * H);
        let ad = grads.wrt(v);
        prop_assert!(
            (ad - fd).abs() <= 1e-6 * fd.abs().max(1.0),
            "{op} at {xs:?}, operand {i}: backward {ad} vs difference {fd}"
        );
    }
    Ok(())
}

fn small() -> impl Strategy<Value = f64> {
    -3.0..3.0f64
}

fn positive() -> impl Strategy<Value = f64> {
    0.2..8.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn add_matches_difference(a in small(), b in small()) {
        check_primitive(Primitive::Add, &[a, b])?;
    }

    #[test]
    fn sub_matches_difference(a in small(), b in small()) {
        check_primitive(Primitive::Sub, &[a, b])?;
    }

    #[test]
    fn mul_matches_difference(a in small(), b in small()) {
        check_primitive(Primitive::Mul, &[a, b])?;
    }

    #[test]
    fn div_matches_difference(a in small(), b in positive(), flip in any::<bool>()) {
        let b = if flip { -b } else { b };
        check_primitive(Primitive::Div, &[a, b])?;
    }

    #[test]
    fn neg_matches_difference(a in small()) {
        check_primitive(Primitive::Neg, &[a])?;
    }

    #[test]
    fn log_matches_difference(a in positive()) {
        check_primitive(Primitive::Log, &[a])?;
    }

    #[test]
    fn exp_matches_difference(a in small()) {
        check_primitive(Primitive::Exp, &[a])?;
    }

    #[test]
    fn sqrt_matches_difference(a in positive()) {
        check_primitive(Primitive::Sqrt, &[a])?;
    }

    #[test]
    fn pow_matches_difference(base in positive(), exponent in -2.5..2.5f64) {
        check_primitive(Primitive::Pow, &[base, exponent])?;
    }

    #[test]
    fn logistic_matches_difference(a in -8.0..8.0f64) {
        check_primitive(Primitive::Logistic, &[a])?;
    }

    #[test]
    fn log_gamma_matches_difference(a in 0.2..30.0f64) {
        check_primitive(Primitive::LogGamma, &[a])?;
    }

    #[test]
    fn log_sum_exp_matches_difference(xs in prop::collection::vec(-20.0..20.0f64, 1..6)) {
        check_primitive(Primitive::LogSumExp, &xs)?;
    }

    #[test]
    fn dot_matches_difference(pairs in prop::collection::vec((small(), small()), 1..5)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        check_primitive(Primitive::Dot, &[a, b].concat())?;
    }

    #[test]
    fn sum_matches_difference(xs in prop::collection::vec(small(), 1..6)) {
        check_primitive(Primitive::Sum, &xs)?;
    }

    #[test]
    fn log_sum_exp_is_shift_invariant(
        xs in prop::collection::vec(-30.0..30.0f64, 1..8),
        c in -700.0..700.0f64,
    ) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let lhs = log_sum_exp(&shifted);
        let rhs = log_sum_exp(&xs) + c;
        prop_assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");

        let g = Graph::new();
        let vars = g.variables(&shifted).unwrap();
        let taped = <Var as Real>::log_sum_exp(&vars).value();
        prop_assert!((taped - rhs).abs() <= 1e-12);
    }

    #[test]
    fn rebuilt_graphs_are_bit_identical(xs in prop::collection::vec(positive(), 4)) {
        let run = || {
            let g = Graph::new();
            let v = g.variables(&xs).unwrap();
            let y = (v[0] * v[1]).ln() + v[2].sqrt() / v[3] - Var::log_sum_exp(&v) + v[0].ln_gamma();
            let grads = g.backward(&y).leaf_partials();
            (y.value().to_bits(), grads.iter().map(|d| d.to_bits()).collect::<Vec<_>>())
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn log_sum_exp_survives_extremes() {
    assert_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln());
    assert_eq!(log_sum_exp(&[-1000.0, -1000.0]), -1000.0 + 2f64.ln());
    assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]), 0.0);
}

#[test]
fn composite_expression_gradient() {
    // f(x, y) = x·exp(y) + log(x)/y; hand-derived partials.
    let (x0, y0) = (1.7, 0.4);
    let g = Graph::new();
    let x = g.variable(x0).unwrap();
    let y = g.variable(y0).unwrap();
    let f = x * y.exp() + x.ln() / y;
    let grads = g.backward(&f);
    let dx = y0.exp() + 1.0 / (x0 * y0);
    let dy = x0 * y0.exp() - x0.ln() / (y0 * y0);
    assert!((grads.wrt(&x) - dx).abs() < 1e-14);
    assert!((grads.wrt(&y) - dy).abs() < 1e-14);
}

#[test]
fn operands_precede_results() {
    let g = Graph::new();
    let v = g.variables(&[0.5, 1.5, 2.5]).unwrap();
    let y = Var::sum(&[v[0] * v[1], v[2].exp(), v[1]]);
    for i in 0..g.len() {
        assert!(g.operands_of(i).iter().all(|&p| p < i));
    }
    assert_eq!(y.index(), Some(g.len() - 1));
}
