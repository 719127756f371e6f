//! Symbolic partial derivatives.
//!
//! Results are tidied by constant folding and the 0/1 identities only
//! (`0 + e`, `1 * e`, `e ^ 1`, ...). No other rewriting is done, so printed
//! derivatives are predictable.

use super::{BinOp, Expr, Func};

/// Raised when `f ^ g` has an exponent depending on the differentiation
/// variable. The derivative then uses `f^g (g' log f + g f'/f)`, which is
/// only valid where `f > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffWarning {
    pub subexpr: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Differentiated {
    pub expr: Expr,
    pub warnings: Vec<DiffWarning>,
}

impl Expr {
    /// Partial derivative with respect to `var`.
    pub fn differentiate(&self, var: &str) -> Expr {
        self.differentiate_checked(var).expr
    }

    /// Like [`Expr::differentiate`], also reporting exp-log rewrites of
    /// powers whose base may be non-positive.
    pub fn differentiate_checked(&self, var: &str) -> Differentiated {
        let mut warnings = Vec::new();
        let expr = d(self, var, &mut warnings);
        Differentiated { expr, warnings }
    }
}

fn d(e: &Expr, var: &str, warn: &mut Vec<DiffWarning>) -> Expr {
    if !e.depends_on(var) {
        return Expr::Num(0.0);
    }
    match e {
        Expr::Num(_) => Expr::Num(0.0),
        Expr::Var(_) => Expr::Num(1.0),
        Expr::Neg(a) => neg(d(a, var, warn)),
        Expr::Bin(op, a, b) => {
            let (a, b) = (a.as_ref(), b.as_ref());
            match op {
                BinOp::Add => add(d(a, var, warn), d(b, var, warn)),
                BinOp::Sub => sub(d(a, var, warn), d(b, var, warn)),
                BinOp::Mul => add(
                    mul(d(a, var, warn), b.clone()),
                    mul(a.clone(), d(b, var, warn)),
                ),
                BinOp::Div => {
                    if !b.depends_on(var) {
                        div(d(a, var, warn), b.clone())
                    } else {
                        div(
                            sub(
                                mul(d(a, var, warn), b.clone()),
                                mul(a.clone(), d(b, var, warn)),
                            ),
                            pow(b.clone(), Expr::Num(2.0)),
                        )
                    }
                }
                BinOp::Pow => {
                    if !b.depends_on(var) {
                        // b * a^(b-1) * a'
                        mul(
                            mul(b.clone(), pow(a.clone(), sub(b.clone(), Expr::Num(1.0)))),
                            d(a, var, warn),
                        )
                    } else {
                        if !matches!(a.as_num(), Some(c) if c > 0.0) {
                            warn.push(DiffWarning {
                                subexpr: e.to_string(),
                            });
                        }
                        let log_a = call(Func::Log, a.clone());
                        let inner = if a.depends_on(var) {
                            add(
                                mul(d(b, var, warn), log_a),
                                div(mul(b.clone(), d(a, var, warn)), a.clone()),
                            )
                        } else {
                            mul(d(b, var, warn), log_a)
                        };
                        mul(e.clone(), inner)
                    }
                }
            }
        }
        Expr::Call(func, a) => {
            let da = d(a, var, warn);
            let a = a.as_ref().clone();
            let outer = match func {
                Func::Sin => call(Func::Cos, a),
                Func::Cos => neg(call(Func::Sin, a)),
                Func::Exp => call(Func::Exp, a),
                Func::Log => return div(da, a),
                Func::Sqrt => return div(da, mul(Expr::Num(2.0), call(Func::Sqrt, a))),
            };
            mul(outer, da)
        }
    }
}

fn is(e: &Expr, v: f64) -> bool {
    e.as_num() == Some(v)
}

fn folded(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Num(v))
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        if let Some(e) = folded(x + y) {
            return e;
        }
    }
    if is(&a, 0.0) {
        return b;
    }
    if is(&b, 0.0) {
        return a;
    }
    Expr::bin(BinOp::Add, a, b)
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        if let Some(e) = folded(x - y) {
            return e;
        }
    }
    if is(&b, 0.0) {
        return a;
    }
    if is(&a, 0.0) {
        return neg(b);
    }
    Expr::bin(BinOp::Sub, a, b)
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        if let Some(e) = folded(x * y) {
            return e;
        }
    }
    if is(&a, 0.0) || is(&b, 0.0) {
        return Expr::Num(0.0);
    }
    if is(&a, 1.0) {
        return b;
    }
    if is(&b, 1.0) {
        return a;
    }
    Expr::bin(BinOp::Mul, a, b)
}

fn div(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        if y != 0.0 {
            if let Some(e) = folded(x / y) {
                return e;
            }
        }
    }
    if is(&a, 0.0) {
        return Expr::Num(0.0);
    }
    if is(&b, 1.0) {
        return a;
    }
    Expr::bin(BinOp::Div, a, b)
}

fn pow(a: Expr, b: Expr) -> Expr {
    if is(&b, 1.0) {
        return a;
    }
    if is(&b, 0.0) {
        return Expr::Num(1.0);
    }
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        if let Some(e) = folded(x.powf(y)) {
            return e;
        }
    }
    Expr::bin(BinOp::Pow, a, b)
}

fn call(func: Func, a: Expr) -> Expr {
    if let Some(x) = a.as_num() {
        let v = match func {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log if x > 0.0 => x.ln(),
            Func::Sqrt if x >= 0.0 => x.sqrt(),
            _ => f64::NAN,
        };
        if let Some(e) = folded(v) {
            return e;
        }
    }
    Expr::call(func, a)
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, VarBinding};

    use super::*;

    #[test]
    fn power_rule() {
        let e = parse("v^2").unwrap().differentiate("v");
        assert_eq!(e, Expr::bin(BinOp::Mul, Expr::num(2.0), Expr::var("v")));
        assert_eq!(e.to_string(), "2*v");
    }

    #[test]
    fn product_with_free_terms() {
        let e = parse("u*v + sin(x)").unwrap().differentiate("u");
        assert_eq!(e, Expr::var("v"));
    }

    #[test]
    fn shifted_square_matches_central_difference() {
        let e = parse("(v-1)^2").unwrap();
        let de = e.differentiate("v");
        let at = |v: f64| e.eval(&VarBinding::new().with("v", v)).unwrap();
        let h = 1e-5;
        let fd = (at(2.0 + h) - at(2.0 - h)) / (2.0 * h);
        let exact = de.eval(&VarBinding::new().with("v", 2.0)).unwrap();
        assert_eq!(exact, 2.0);
        assert!((fd - exact).abs() < 1e-8);
    }

    #[test]
    fn variable_exponent_is_flagged() {
        let out = parse("u^v").unwrap().differentiate_checked("v");
        assert_eq!(out.warnings.len(), 1);
        let out = parse("2^v").unwrap().differentiate_checked("v");
        assert!(out.warnings.is_empty());
        let env = VarBinding::new().with("v", 1.5);
        let val = out.expr.eval(&env).unwrap();
        assert!((val - 2f64.powf(1.5) * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn elementary_functions() {
        let env = VarBinding::new().with("x", 0.7);
        for (src, expect) in [
            ("sin(x)", 0.7f64.cos()),
            ("cos(x)", -(0.7f64.sin())),
            ("exp(2*x)", 2.0 * (1.4f64).exp()),
            ("log(x)", 1.0 / 0.7),
            ("sqrt(x)", 0.5 / 0.7f64.sqrt()),
            ("1/x", -1.0 / 0.49),
        ] {
            let got = parse(src).unwrap().differentiate("x").eval(&env).unwrap();
            assert!((got - expect).abs() < 1e-12, "{src}: {got} vs {expect}");
        }
    }

    #[test]
    fn folding_only_touches_constants() {
        assert_eq!(parse("3*x + 2").unwrap().differentiate("x"), Expr::num(3.0));
        assert_eq!(parse("x*y").unwrap().differentiate("z"), Expr::num(0.0));
        assert_eq!(
            parse("-(v^3)").unwrap().differentiate("v").to_string(),
            "-(3*v^2)"
        );
    }
}
