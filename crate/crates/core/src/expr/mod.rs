//! Coefficient functions a(t), b(t), gamma(t) given as text.

mod ast;
mod parser;

use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};
use thiserror::Error;

pub use ast::{BinOp, Constant, Expr, Func};
pub use parser::{ParseError, ParseErrorKind};

use crate::coefficient::{Coef, Coefficient};
use crate::error::Result;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error at t = {t} in `{subexpr}`: {reason}")]
pub struct EvalError {
    pub t: f64,
    pub subexpr: String,
    pub reason: String,
}

/// A parsed function of `t`. Immutable and cheap to evaluate from many
/// threads at once.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFn {
    source: String,
    ast: Expr,
    constant: Option<f64>,
}

pub fn parse(src: &str) -> Result<CoefficientFn, ParseError> {
    CoefficientFn::parse(src)
}

impl CoefficientFn {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let ast = parser::parse_expr(src)?;
        let constant = if ast.is_constant() { eval_node::<f64>(&ast, 0.0).ok() } else { None };
        Ok(Self { source: src.to_string(), ast, constant })
    }

    pub fn from_expr(ast: Expr) -> Self {
        let source = ast.to_string();
        let constant = if ast.is_constant() { eval_node::<f64>(&ast, 0.0).ok() } else { None };
        Self { source, ast, constant }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn eval_at<T: Real>(&self, t: T) -> Result<T, EvalError> {
        eval_node(&self.ast, t)
    }

    pub fn shared<T: Real>(self) -> Coef<T> {
        Arc::new(self)
    }
}

impl fmt::Display for CoefficientFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for CoefficientFn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl std::str::FromStr for CoefficientFn {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, ParseError> {
        Self::parse(s)
    }
}

impl<T: Real> Coefficient<T> for CoefficientFn {
    fn eval(&self, t: T) -> Result<T> {
        Ok(self.eval_at(t)?)
    }

    fn constant_value(&self) -> Option<T> {
        self.constant.map(T::lit)
    }

    fn describe(&self) -> String {
        self.source.clone()
    }
}

fn domain_error<T: Real>(node: &Expr, t: T, reason: &str) -> EvalError {
    EvalError { t: t.as_f64(), subexpr: node.to_string(), reason: reason.to_string() }
}

fn eval_node<T: Real>(node: &Expr, t: T) -> Result<T, EvalError> {
    let v = match node {
        Expr::Num(x) => T::lit(*x),
        Expr::Var => t,
        Expr::Const(Constant::Pi) => T::PI(),
        Expr::Const(Constant::E) => T::E(),
        Expr::Neg(e) => -eval_node(e, t)?,
        Expr::Binary { op, lhs, rhs } => {
            let x = eval_node(lhs, t)?;
            let y = eval_node(rhs, t)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == T::zero() {
                        return Err(domain_error(node, t, "division by zero"));
                    }
                    x / y
                }
                BinOp::Pow => {
                    if x < T::zero() && y.fract() != T::zero() {
                        return Err(domain_error(node, t, "negative base with fractional exponent"));
                    }
                    if x == T::zero() && y < T::zero() {
                        return Err(domain_error(node, t, "zero raised to a negative power"));
                    }
                    x.powf(y)
                }
            }
        }
        Expr::Call { func, arg } => {
            let x = eval_node(arg, t)?;
            match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Ln => {
                    if x <= T::zero() {
                        return Err(domain_error(node, t, "logarithm of a non-positive value"));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x < T::zero() {
                        return Err(domain_error(node, t, "square root of a negative value"));
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain_error(node, t, "non-finite result"))
    }
}

/// Sampled range of a coefficient. These are estimates from point samples,
/// not certified bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientBounds<T> {
    pub lower: T,
    pub upper: T,
    pub t0: T,
    pub t1: T,
    pub samples: usize,
    pub certified: bool,
}

impl<T: Real> CoefficientBounds<T> {
    pub fn contains(&self, v: T) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Min/max of `f` over `n` uniform samples of `[t0, t1]` and the midpoints
/// between them.
pub fn bounds_estimate<T: Real, C: Coefficient<T> + ?Sized>(
    f: &C,
    t0: T,
    t1: T,
    n: usize,
) -> Result<CoefficientBounds<T>> {
    if !(t0 < t1) {
        return Err(crate::Error::invalid(format!("bounds_estimate needs t0 < t1, got [{t0}, {t1}]")));
    }
    if n < 2 {
        return Err(crate::Error::invalid("bounds_estimate needs n >= 2"));
    }
    let step = (t1 - t0) / T::lit((n - 1) as f64);
    let half = step / T::lit(2.0);
    let mut lower = T::infinity();
    let mut upper = T::neg_infinity();
    let mut samples = 0;
    for i in 0..n {
        let t = if i + 1 == n { t1 } else { t0 + step * T::lit(i as f64) };
        let mut visit = |s: T| -> Result<()> {
            let v = f.eval(s)?;
            lower = lower.min(v);
            upper = upper.max(v);
            samples += 1;
            Ok(())
        };
        visit(t)?;
        if i + 1 < n {
            visit(t + half)?;
        }
    }
    Ok(CoefficientBounds { lower, upper, t0, t1, samples, certified: false })
}
