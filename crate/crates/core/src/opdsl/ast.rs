use std::fmt;

use crate::jetcore::MultiIndex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Conj,
    Re,
    Im,
    Abs2,
    Exp,
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Conj => "conj",
            Func::Re => "re",
            Func::Im => "im",
            Func::Abs2 => "abs2",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "conj" => Func::Conj,
            "re" => Func::Re,
            "im" => Func::Im,
            "abs2" => Func::Abs2,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }

    /// True for the functions that are not complex-differentiable.
    pub fn is_antiholomorphic_part(self) -> bool {
        matches!(self, Func::Conj | Func::Re | Func::Im | Func::Abs2)
    }
}

/// Jet variable `u[A_1,…,A_p]((I_1);…;(I_p))`: the entry `a^{A_1…A_p}_{I_1…I_p}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JetVar {
    pub internal: Vec<usize>,
    pub derivs: Vec<MultiIndex>,
}

/// Operator body. Parentheses in source text do not produce nodes.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(f64),
    ImagUnit,
    /// `x[p].k`; a missing component is only accepted when `d = 1`.
    Coord {
        particle: usize,
        component: Option<usize>,
    },
    Var(JetVar),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Pow {
        base: Box<Expr>,
        exponent: u32,
    },
    Call {
        func: Func,
        arg: Box<Expr>,
    },
}

pub type OperatorExpr = Expr;

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Number(_) | Expr::ImagUnit | Expr::Coord { .. } | Expr::Var(_) => vec![],
            Expr::Neg(e) | Expr::Pow { base: e, .. } | Expr::Call { arg: e, .. } => vec![e],
            Expr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
        }
    }

    /// Visits every node with its path (`$`, `$/0`, `$/1/0`, …).
    pub fn walk(&self, visit: &mut impl FnMut(&str, &Expr)) {
        fn go(e: &Expr, path: &mut String, visit: &mut impl FnMut(&str, &Expr)) {
            visit(path, e);
            for (k, child) in e.children().into_iter().enumerate() {
                let len = path.len();
                path.push('/');
                path.push_str(&k.to_string());
                go(child, path, visit);
                path.truncate(len);
            }
        }
        let mut path = String::from("$");
        go(self, &mut path, visit);
    }

    /// True when no `conj`, `re`, `im` or `abs2` occurs.
    pub fn is_holomorphic(&self) -> bool {
        let mut ok = true;
        self.walk(&mut |_, e| {
            if let Expr::Call { func, .. } = e {
                ok &= !func.is_antiholomorphic_part();
            }
        });
        ok
    }

    /// Linearity class with respect to the jet variables.
    pub fn degree(&self) -> Degree {
        use Degree::*;
        match self {
            Expr::Number(v) if *v == 0.0 => Zero,
            Expr::Number(_) | Expr::ImagUnit | Expr::Coord { .. } => Constant,
            Expr::Var(_) => Linear,
            Expr::Neg(e) => e.degree(),
            Expr::Binary { op, lhs, rhs } => {
                let (l, r) = (lhs.degree(), rhs.degree());
                match op {
                    BinOp::Add | BinOp::Sub => match (l, r) {
                        (Zero, x) | (x, Zero) => x,
                        (Constant, Constant) => Constant,
                        (Linear, Linear) => Linear,
                        _ => Nonlinear,
                    },
                    BinOp::Mul => match (l, r) {
                        (Zero, _) | (_, Zero) => Zero,
                        (Constant, x) | (x, Constant) => x,
                        _ => Nonlinear,
                    },
                    BinOp::Div => match (l, r) {
                        (_, Zero) => Nonlinear,
                        (x, Constant) => x,
                        _ => Nonlinear,
                    },
                }
            }
            Expr::Pow { base, exponent } => match (base.degree(), exponent) {
                (_, 0) => Constant,
                (x, 1) => x,
                (Zero, _) => Zero,
                (Constant, _) => Constant,
                _ => Nonlinear,
            },
            Expr::Call { arg, .. } => match arg.degree() {
                Zero | Constant => Constant,
                _ => Nonlinear,
            },
        }
    }
}

/// How an expression depends on the jet variables. `Linear` means complex
/// linear; an affine body counts as `Nonlinear`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Degree {
    Zero,
    Constant,
    Linear,
    Nonlinear,
}

impl Degree {
    pub fn is_linear(self) -> bool {
        matches!(self, Degree::Zero | Degree::Linear)
    }
}

const ATOM: u8 = 5;
const POW: u8 = 4;
const UNARY: u8 = 3;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => op.precedence(),
        Expr::Neg(_) => UNARY,
        Expr::Pow { .. } => POW,
        _ => ATOM,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    // Debug formatting is shortest-roundtrip and always carries a '.' or exponent
    write!(f, "{v:?}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => write_number(f, *v),
            Expr::ImagUnit => f.write_str("i"),
            Expr::Coord { particle, component } => {
                write!(f, "x[{particle}]")?;
                if let Some(k) = component {
                    write!(f, ".{k}")?;
                }
                Ok(())
            }
            Expr::Var(v) => write!(f, "{v}"),
            // unary := "-" unary | atom, so a power or binary operand needs parentheses
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_wrapped(f, e, precedence(e) < UNARY || matches!(**e, Expr::Pow { .. }))
            }
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                write_wrapped(f, lhs, precedence(lhs) < p)?;
                write!(f, " {} ", op.symbol())?;
                write_wrapped(f, rhs, precedence(rhs) <= p)
            }
            // factor := unary ("^" uint)?, so the base is a unary or an atom
            Expr::Pow { base, exponent } => {
                write_wrapped(f, base, precedence(base) < UNARY || matches!(**base, Expr::Pow { .. }))?;
                write!(f, "^{exponent}")
            }
            Expr::Call { func, arg } => write!(f, "{}({arg})", func.name()),
        }
    }
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("u[")?;
        for (k, a) in self.internal.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("](")?;
        for (k, idx) in self.derivs.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write!(f, "{idx}")?;
        }
        f.write_str(")")
    }
}
