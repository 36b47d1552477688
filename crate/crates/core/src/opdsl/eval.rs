use num_complex::Complex64;
use thiserror::Error;

use super::ast::{BinOp, Expr, Func};
use crate::jetcore::{Jet, MultiIndex};
use crate::tensor::ParticleJet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("domain error at {path}: {message}")]
    Domain { path: String, message: String },
    #[error("jet entry {var} at {path} is not in the table")]
    Unbound { path: String, var: String },
    #[error("coordinate x[{particle}].{component} at {path} is not available")]
    Coordinate { path: String, particle: usize, component: usize },
    #[error("hierarchy has no operator of arity {0}")]
    MissingArity(usize),
    #[error("jet table has arity {got}, operator expects {expected}")]
    TableArity { expected: usize, got: usize },
    #[error("jet table spec does not match the hierarchy")]
    TableSpec,
}

/// Values bound to jet variables and coordinates during evaluation.
pub trait JetTable {
    fn arity(&self) -> usize;
    fn entry(&self, internal: &[usize], derivs: &[MultiIndex]) -> Option<Complex64>;
    fn coordinate(&self, particle: usize, component: usize) -> Option<f64>;
}

impl JetTable for ParticleJet {
    fn arity(&self) -> usize {
        ParticleJet::arity(self)
    }

    fn entry(&self, internal: &[usize], derivs: &[MultiIndex]) -> Option<Complex64> {
        self.get(internal, derivs)
    }

    fn coordinate(&self, particle: usize, component: usize) -> Option<f64> {
        self.basepoints().get(particle)?.get(component).copied()
    }
}

impl JetTable for Jet {
    fn arity(&self) -> usize {
        1
    }

    fn entry(&self, internal: &[usize], derivs: &[MultiIndex]) -> Option<Complex64> {
        match (internal, derivs) {
            ([a], [idx]) => self.get(*a, idx),
            _ => None,
        }
    }

    fn coordinate(&self, particle: usize, component: usize) -> Option<f64> {
        if particle == 0 {
            self.basepoint().get(component).copied()
        } else {
            None
        }
    }
}

fn path_string(path: &[usize]) -> String {
    let mut s = String::from("$");
    for k in path {
        s.push('/');
        s.push_str(&k.to_string());
    }
    s
}

/// Evaluates `expr` with jet variables and coordinates bound from `table`.
pub fn eval_expr<T: JetTable + ?Sized>(expr: &Expr, table: &T) -> Result<Complex64, EvalError> {
    let mut path = Vec::new();
    eval_at(expr, table, &mut path)
}

fn eval_at<T: JetTable + ?Sized>(expr: &Expr, table: &T, path: &mut Vec<usize>) -> Result<Complex64, EvalError> {
    let child = |k: usize, e: &Expr, path: &mut Vec<usize>| {
        path.push(k);
        let v = eval_at(e, table, path);
        path.pop();
        v
    };
    let value = match expr {
        Expr::Number(v) => Complex64::new(*v, 0.0),
        Expr::ImagUnit => Complex64::i(),
        Expr::Coord { particle, component } => {
            let component = component.unwrap_or(0);
            let x = table.coordinate(*particle, component).ok_or_else(|| EvalError::Coordinate {
                path: path_string(path),
                particle: *particle,
                component,
            })?;
            Complex64::new(x, 0.0)
        }
        Expr::Var(v) => table
            .entry(&v.internal, &v.derivs)
            .ok_or_else(|| EvalError::Unbound { path: path_string(path), var: v.to_string() })?,
        Expr::Neg(e) => -child(0, e, path)?,
        Expr::Binary { op, lhs, rhs } => {
            let a = child(0, lhs, path)?;
            let b = child(1, rhs, path)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b.norm_sqr() == 0.0 {
                        return Err(EvalError::Domain { path: path_string(path), message: "division by zero".into() });
                    }
                    a / b
                }
            }
        }
        Expr::Pow { base, exponent } => {
            let b = child(0, base, path)?;
            // repeated multiplication keeps polynomial bodies exact up to rounding
            (0..*exponent).fold(Complex64::new(1.0, 0.0), |acc, _| acc * b)
        }
        Expr::Call { func, arg } => {
            let z = child(0, arg, path)?;
            match func {
                Func::Conj => z.conj(),
                Func::Re => Complex64::new(z.re, 0.0),
                Func::Im => Complex64::new(z.im, 0.0),
                Func::Abs2 => Complex64::new(z.norm_sqr(), 0.0),
                Func::Exp => z.exp(),
                Func::Log => {
                    if z.norm_sqr() == 0.0 {
                        return Err(EvalError::Domain {
                            path: path_string(path),
                            message: "log of a zero-modulus value".into(),
                        });
                    }
                    z.ln()
                }
            }
        }
    };
    if !value.is_finite() {
        return Err(EvalError::Domain { path: path_string(path), message: "non-finite result".into() });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcore::{random_jet, JetSpec};
    use crate::opdsl::parse_operator;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn linear_and_cubic_bodies() {
        let spec = JetSpec::new(1, 2, 1).unwrap();
        let jet = Jet::zeros(spec, vec![0.0]).with_value(0, &mi(&[2]), c(5.0, 1.0));
        assert_eq!(eval_expr(&parse_operator("u[0]((2))").unwrap(), &jet).unwrap(), c(5.0, 1.0));

        let jet = Jet::zeros(spec, vec![0.0]).with_value(0, &mi(&[0]), c(2.0, 0.0));
        let cubic = parse_operator("-u[0]((2)) + abs2(u[0]((0)))*u[0]((0))").unwrap();
        assert_eq!(eval_expr(&cubic, &jet).unwrap(), c(8.0, 0.0));
    }

    #[test]
    fn log_of_zero_reports_path() {
        let spec = JetSpec::new(1, 2, 1).unwrap();
        let jet = Jet::zeros(spec, vec![0.0]);
        let e = parse_operator("1 + log(u[0]((1)))").unwrap();
        match eval_expr(&e, &jet) {
            Err(EvalError::Domain { path, .. }) => assert_eq!(path, "$/1"),
            other => panic!("{other:?}"),
        }
        let e = parse_operator("u[0]((2)) / u[0]((0))").unwrap();
        assert!(matches!(eval_expr(&e, &jet), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn functions_and_coordinates() {
        let spec = JetSpec::new(2, 1, 1).unwrap();
        let jet = Jet::zeros(spec, vec![0.5, -2.0]).with_value(0, &mi(&[0, 0]), c(1.0, 2.0));
        let eval = |t: &str| eval_expr(&parse_operator(t).unwrap(), &jet).unwrap();
        assert_eq!(eval("conj(u[0]((0,0)))"), c(1.0, -2.0));
        assert_eq!(eval("re(u[0]((0,0)))"), c(1.0, 0.0));
        assert_eq!(eval("im(u[0]((0,0)))"), c(2.0, 0.0));
        assert_eq!(eval("abs2(u[0]((0,0)))"), c(5.0, 0.0));
        assert_eq!(eval("x[0].0 * x[0].1"), c(-1.0, 0.0));
        assert_eq!(eval("i^2"), c(-1.0, 0.0));
        assert!((eval("exp(log(u[0]((0,0))))") - c(1.0, 2.0)).norm() < 1e-15);
        assert!(eval_expr(&parse_operator("x[1].0").unwrap(), &jet).is_err());
    }

    /// Straight-line interpreter over a postfix program: an independent route
    /// for polynomial bodies.
    fn straight_line(expr: &Expr, jet: &Jet) -> Complex64 {
        fn emit(e: &Expr, out: &mut Vec<Expr>) {
            match e {
                Expr::Neg(a) | Expr::Pow { base: a, .. } | Expr::Call { arg: a, .. } => emit(a, out),
                Expr::Binary { lhs, rhs, .. } => {
                    emit(lhs, out);
                    emit(rhs, out);
                }
                _ => {}
            }
            out.push(e.clone());
        }
        let mut program = Vec::new();
        emit(expr, &mut program);
        let mut stack: Vec<Complex64> = Vec::new();
        for op in program {
            let v = match op {
                Expr::Number(v) => c(v, 0.0),
                Expr::ImagUnit => c(0.0, 1.0),
                Expr::Coord { particle, component } => {
                    c(jet.coordinate(particle, component.unwrap_or(0)).unwrap(), 0.0)
                }
                Expr::Var(v) => jet.entry(&v.internal, &v.derivs).unwrap(),
                Expr::Neg(_) => -stack.pop().unwrap(),
                Expr::Pow { exponent, .. } => {
                    let b = stack.pop().unwrap();
                    let mut acc = c(1.0, 0.0);
                    for _ in 0..exponent {
                        acc *= b;
                    }
                    acc
                }
                Expr::Binary { op, .. } => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    match op {
                        BinOp::Add => a + b,
                        BinOp::Sub => a - b,
                        BinOp::Mul => a * b,
                        BinOp::Div => a / b,
                    }
                }
                Expr::Call { func, .. } => {
                    let z = stack.pop().unwrap();
                    match func {
                        Func::Conj => z.conj(),
                        Func::Re => c(z.re, 0.0),
                        Func::Im => c(z.im, 0.0),
                        Func::Abs2 => c(z.norm_sqr(), 0.0),
                        Func::Exp => z.exp(),
                        Func::Log => z.ln(),
                    }
                }
            };
            stack.push(v);
        }
        stack.pop().unwrap()
    }

    #[test]
    fn polynomial_bodies_match_straight_line_interpreter() {
        let spec = JetSpec::new(1, 2, 2).unwrap();
        let bodies = [
            "u[0]((0))^3 - 2.5*u[1]((1))*conj(u[0]((2))) + x[0]*i",
            "(u[0]((0)) + u[1]((0)))^2 * (u[0]((1)) - 0.125) - abs2(u[1]((2)))",
            "-(-u[0]((2)))^2 + re(u[1]((0)))*im(u[0]((1)))",
        ];
        for seed in 0..50 {
            let jet = random_jet(&spec, &[0.3], seed, 2.0);
            for body in bodies {
                let e = parse_operator(body).unwrap();
                let a = eval_expr(&e, &jet).unwrap();
                let b = straight_line(&e, &jet);
                assert!((a - b).norm() <= 1e-14 * b.norm().max(1.0), "{body}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn linear_bodies_are_linear_in_the_table() {
        let spec = JetSpec::new(1, 2, 1).unwrap();
        let e = parse_operator("2*u[0]((2)) + (0.5 - i)*u[0]((0)) + u[0]((1))").unwrap();
        let a = random_jet(&spec, &[0.0], 1, 1.0);
        let b = random_jet(&spec, &[0.0], 2, 1.0);
        let s = c(0.7, -1.3);
        let lhs = eval_expr(&e, &a.add_scaled(s, &b)).unwrap();
        let rhs = eval_expr(&e, &a).unwrap() + s * eval_expr(&e, &b).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
