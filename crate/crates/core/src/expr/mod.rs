//! Scalar expressions over chart coordinates.
//!
//! Metric components, time orientations, one-forms and parametric curves are
//! all written in this small language. Expressions are parsed once and then
//! evaluated either as plain numbers or as forward-mode jets ([`Jet1`],
//! [`Jet2`]) that carry exact first and second partial derivatives.

mod jet;
mod parse;

use std::fmt;

pub use jet::{packed, Jet1, Jet2, Scalar, HESS_LEN, MAX_DIM};
pub use parse::{parse_expr, ParseError, ParseErrorKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedConst {
    Pi,
    E,
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::Pi => std::f64::consts::PI,
            NamedConst::E => std::f64::consts::E,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NamedConst::Pi => "pi",
            NamedConst::E => "e",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        match name {
            "pi" => Some(NamedConst::Pi),
            "e" => Some(NamedConst::E),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Value, first and second derivative at `x`, or a domain complaint.
    fn derivatives(self, x: f64) -> Result<(f64, f64, f64), &'static str> {
        Ok(match self {
            Func::Sin => {
                let (s, c) = x.sin_cos();
                (s, c, -s)
            }
            Func::Cos => {
                let (s, c) = x.sin_cos();
                (c, -s, -c)
            }
            Func::Tan => {
                let t = x.tan();
                let sec2 = 1.0 + t * t;
                (t, sec2, 2.0 * t * sec2)
            }
            Func::Exp => {
                let v = x.exp();
                (v, v, v)
            }
            Func::Log => {
                if x <= 0.0 {
                    return Err("logarithm of a nonpositive number");
                }
                (x.ln(), 1.0 / x, -1.0 / (x * x))
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err("square root of a negative number");
                }
                let r = x.sqrt();
                (r, 0.5 / r, -0.25 / (r * x))
            }
            Func::Abs => {
                let s = if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                (x.abs(), s, 0.0)
            }
            Func::Sinh => (x.sinh(), x.cosh(), x.sinh()),
            Func::Cosh => (x.cosh(), x.sinh(), x.cosh()),
            Func::Tanh => {
                let t = x.tanh();
                let d = 1.0 - t * t;
                (t, d, -2.0 * t * d)
            }
        })
    }
}

/// Expression tree. Variables refer to coordinates by index and keep their name
/// for printing.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Named(NamedConst),
    Var { index: usize, name: String },
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Evaluation failure inside the real domain of an expression.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{reason} in `{subexpr}`")]
pub struct EvalError {
    pub reason: String,
    pub subexpr: String,
}

impl EvalError {
    fn at(reason: &str, e: &Expr) -> Self {
        EvalError {
            reason: reason.to_string(),
            subexpr: e.to_string(),
        }
    }
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(index: usize, name: impl Into<String>) -> Self {
        Expr::Var {
            index,
            name: name.into(),
        }
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// `c * self`, folding the trivial factors 0 and 1.
    pub fn scaled(self, c: f64) -> Self {
        if c == 0.0 {
            Expr::Const(0.0)
        } else if c == 1.0 {
            self
        } else {
            Expr::binary(BinOp::Mul, Expr::Const(c), self)
        }
    }

    /// True if the tree is a literal zero.
    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Named(_) => None,
            Expr::Var { index, .. } => Some(*index),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// True if coordinate `index` occurs in the tree.
    pub fn depends_on(&self, index: usize) -> bool {
        match self {
            Expr::Const(_) | Expr::Named(_) => false,
            Expr::Var { index: i, .. } => *i == index,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(index),
            Expr::Binary(_, a, b) => a.depends_on(index) || b.depends_on(index),
        }
    }

    /// Generic evaluation with one scalar per coordinate.
    pub fn eval_with<S: Scalar>(&self, vars: &[S]) -> Result<S, EvalError> {
        let out = match self {
            Expr::Const(c) => S::constant(*c),
            Expr::Named(k) => S::constant(k.value()),
            Expr::Var { index, .. } => *vars
                .get(*index)
                .ok_or_else(|| EvalError::at("coordinate index out of range", self))?,
            Expr::Neg(a) => -a.eval_with(vars)?,
            Expr::Binary(op, a, b) => {
                let x = a.eval_with(vars)?;
                let y = b.eval_with(vars)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        let d = y.value();
                        if d == 0.0 {
                            return Err(EvalError::at("division by zero", self));
                        }
                        x * y.chain(1.0 / d, -1.0 / (d * d), 2.0 / (d * d * d))
                    }
                }
            }
            Expr::Pow(a, k) => {
                let x = a.eval_with(vars)?;
                let v = x.value();
                if v == 0.0 && *k < 0 {
                    return Err(EvalError::at("negative power of zero", self));
                }
                let k = *k;
                let f = v.powi(k);
                let d1 = if k == 0 { 0.0 } else { k as f64 * v.powi(k - 1) };
                let d2 = if k == 0 || k == 1 {
                    0.0
                } else {
                    (k as f64) * (k as f64 - 1.0) * v.powi(k - 2)
                };
                x.chain(f, d1, d2)
            }
            Expr::Call(func, a) => {
                let x = a.eval_with(vars)?;
                let (f, d1, d2) = func
                    .derivatives(x.value())
                    .map_err(|reason| EvalError::at(reason, self))?;
                x.chain(f, d1, d2)
            }
        };
        if !out.is_finite() {
            return Err(EvalError::at("non-finite result", self));
        }
        Ok(out)
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64, EvalError> {
        self.eval_with(p)
    }

    pub fn eval_jet1(&self, p: &[f64]) -> Result<Jet1, EvalError> {
        let vars: Vec<Jet1> = p
            .iter()
            .enumerate()
            .map(|(i, &x)| Jet1::variable(x, i))
            .collect();
        self.eval_with(&vars)
    }

    /// Value, gradient and Hessian at `p`, exact up to rounding.
    pub fn eval_jet2(&self, p: &[f64]) -> Result<Jet2, EvalError> {
        let vars: Vec<Jet2> = p
            .iter()
            .enumerate()
            .map(|(i, &x)| Jet2::variable(x, i))
            .collect();
        self.eval_with(&vars)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Pow(_, _) => 4,
            _ => 5,
        }
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_sign_negative() {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{c:?}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_const(f, *c),
            Expr::Named(k) => f.write_str(k.name()),
            Expr::Var { name, .. } => f.write_str(name),
            Expr::Neg(a) => {
                if a.precedence() < 3 {
                    write!(f, "-({a})")
                } else {
                    write!(f, "-{a}")
                }
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                if a.precedence() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // operators are left-associative, so equal precedence on the
                // right needs parentheses to survive a reparse
                if b.precedence() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Pow(a, k) => {
                if a.precedence() < 5 {
                    write!(f, "({a})^{k}")
                } else {
                    write!(f, "{a}^{k}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn zero_literal() {
        let e = parse_expr("0", &["t".into(), "x".into()]).unwrap();
        assert_eq!(e, Expr::Const(0.0));
        assert!(e.is_zero_literal());
    }

    #[test]
    fn clifton_pohl_component_is_a_division() {
        let e = parse_expr("1/(x^2+y^2)", &xy()).unwrap();
        match &e {
            Expr::Binary(BinOp::Div, num, den) => {
                assert_eq!(**num, Expr::Const(1.0));
                assert!(matches!(**den, Expr::Binary(BinOp::Add, _, _)));
            }
            other => panic!("expected a division, got {other:?}"),
        }
    }

    #[test]
    fn negated_difference() {
        let e = parse_expr("-(1-t)", &["t".into()]).unwrap();
        match e {
            Expr::Neg(inner) => assert!(matches!(*inner, Expr::Binary(BinOp::Sub, _, _))),
            other => panic!("expected negation, got {other:?}"),
        }
    }

    #[test]
    fn square_jet() {
        let e = parse_expr("x^2", &["x".into()]).unwrap();
        let j = e.eval_jet2(&[3.0]).unwrap();
        assert_eq!(j.value, 9.0);
        assert_eq!(j.grad[0], 6.0);
        assert_eq!(j.hess_at(0, 0), 2.0);
    }

    #[test]
    fn inverse_radius_squared_jet() {
        // d/dx (x^2+y^2)^-1 = -2x/(x^2+y^2)^2, which is -2 at (1, 0)
        let e = parse_expr("1/(x^2+y^2)", &xy()).unwrap();
        let j = e.eval_jet2(&[1.0, 0.0]).unwrap();
        assert_eq!(j.value, 1.0);
        assert!((j.grad[0] + 2.0).abs() < 1e-15);
        assert!(j.grad[1].abs() < 1e-15);
        // second derivatives by hand: d2/dx2 = (6x^2 - 2y^2)/r^6 = 6, d2/dy2 = -2, mixed 0
        assert!((j.hess_at(0, 0) - 6.0).abs() < 1e-14);
        assert!((j.hess_at(1, 1) + 2.0).abs() < 1e-14);
        assert!(j.hess_at(0, 1).abs() < 1e-14);
    }

    #[test]
    fn sine_jet_at_zero() {
        let e = parse_expr("sin(x)", &["x".into()]).unwrap();
        let j = e.eval_jet2(&[0.0]).unwrap();
        assert_eq!(j.value, 0.0);
        assert_eq!(j.grad[0], 1.0);
        assert_eq!(j.hess_at(0, 0), 0.0);
    }

    #[test]
    fn domain_violations_name_the_subexpression() {
        let e = parse_expr("1 + 1/(x-1)", &["x".into()]).unwrap();
        let err = e.eval(&[1.0]).unwrap_err();
        assert_eq!(err.reason, "division by zero");
        assert_eq!(err.subexpr, "1.0 / (x - 1.0)");

        let e = parse_expr("log(x)", &["x".into()]).unwrap();
        assert!(e.eval_jet1(&[-1.0]).is_err());
        let e = parse_expr("sqrt(x)", &["x".into()]).unwrap();
        assert!(e.eval(&[-0.5]).is_err());
        // derivative of sqrt blows up at zero
        assert!(e.eval_jet1(&[0.0]).is_err());
        let e = parse_expr("x^-1", &["x".into()]).unwrap();
        assert!(e.eval(&[0.0]).is_err());
    }

    #[test]
    fn printing_respects_associativity() {
        let coords = vec!["a".into(), "b".into(), "c".into()];
        for src in ["a-(b-c)", "a/(b*c)", "(a-b)-c", "-a^2", "(-a)^2", "-(a*b)", "a--b"] {
            let e = parse_expr(src, &coords).unwrap();
            let again = parse_expr(&e.to_string(), &coords).unwrap();
            assert_eq!(e, again, "{src} printed as {e}");
        }
    }

    #[test]
    fn scaled_folds_trivial_factors() {
        let x = Expr::var(0, "x");
        assert!(x.clone().scaled(0.0).is_zero_literal());
        assert_eq!(x.clone().scaled(1.0), x);
        assert_eq!(x.clone().scaled(2.0).eval(&[3.0]).unwrap(), 6.0);
    }
}
