use thiserror::Error;

use super::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable {0:?}")]
    Unbound(String),
    #[error("{reason} in `{subexpr}`")]
    Domain {
        reason: &'static str,
        subexpr: String,
    },
}

/// Variable assignment used during evaluation.
///
/// Backed by a short vector; expressions here only ever see a handful of
/// variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarBinding {
    entries: Vec<(String, f64)>,
}

impl VarBinding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, value: f64) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((name.to_string(), value)),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    /// Position of `name`, for repeated updates through [`VarBinding::set_slot`].
    pub fn slot(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn set_slot(&mut self, slot: usize, value: f64) {
        self.entries[slot].1 = value;
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find_map(|(n, v)| (n == name).then_some(*v))
    }
}

impl<'a> FromIterator<(&'a str, f64)> for VarBinding {
    fn from_iter<T: IntoIterator<Item = (&'a str, f64)>>(iter: T) -> Self {
        let mut b = Self::new();
        for (n, v) in iter {
            b.set(n, v);
        }
        b
    }
}

fn domain(reason: &'static str, e: &Expr) -> EvalError {
    EvalError::Domain {
        reason,
        subexpr: e.to_string(),
    }
}

impl Expr {
    pub fn eval(&self, env: &VarBinding) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(name) => env
                .get(name)
                .ok_or_else(|| EvalError::Unbound(name.clone())),
            Expr::Neg(e) => Ok(-e.eval(env)?),
            Expr::Bin(op, l, r) => {
                let a = l.eval(env)?;
                let b = r.eval(env)?;
                let out = match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(domain("division by zero", self));
                        }
                        a / b
                    }
                    BinOp::Pow => pow(a, b),
                };
                if out.is_finite() || !(a.is_finite() && b.is_finite()) {
                    Ok(out)
                } else {
                    Err(domain("non-finite result", self))
                }
            }
            Expr::Call(func, arg) => {
                let a = arg.eval(env)?;
                let out = match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(domain("log of non-positive value", self));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(domain("sqrt of negative value", self));
                        }
                        a.sqrt()
                    }
                };
                if out.is_finite() || !a.is_finite() {
                    Ok(out)
                } else {
                    Err(domain("non-finite result", self))
                }
            }
        }
    }
}

/// `a^b`, using repeated multiplication for small integer exponents so that
/// `v^2` evaluates bit-identically to `v*v`.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 16.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    use super::*;

    fn eval(src: &str, env: &[(&str, f64)]) -> Result<f64, EvalError> {
        parse(src).unwrap().eval(&env.iter().copied().collect())
    }

    #[test]
    fn basic_values() {
        assert_eq!(eval("u", &[("u", 7.0)]).unwrap(), 7.0);
        assert_eq!(eval("v^2/2", &[("v", 3.0)]).unwrap(), 4.5);
        assert_eq!(eval("exp(0) + log(1)", &[]).unwrap(), 1.0);
        assert_eq!(eval("(v - 1)^2", &[("v", 3.0)]).unwrap(), 4.0);
        assert_eq!(
            eval("sin(x)*u + v/2", &[("x", 0.0), ("u", 5.0), ("v", 2.0)]).unwrap(),
            1.0
        );
    }

    #[test]
    fn unbound_variable() {
        assert_eq!(
            eval("u + w", &[("u", 1.0)]),
            Err(EvalError::Unbound("w".into()))
        );
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let err = eval("1 + log(u - 2)", &[("u", 1.0)]).unwrap_err();
        match err {
            EvalError::Domain { subexpr, .. } => assert_eq!(subexpr, "log(u - 2)"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            eval("1/(v - v)", &[("v", 1.0)]),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(
            eval("sqrt(-1)", &[]),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(
            eval("(-2)^0.5", &[]),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(
            eval("exp(1000)", &[]),
            Err(EvalError::Domain { .. })
        ));
    }

    #[test]
    fn binding_overwrites() {
        let mut b = VarBinding::new().with("u", 1.0);
        b.set("u", 2.0);
        assert_eq!(b.get("u"), Some(2.0));
        assert_eq!(b.get("v"), None);
    }
}
