use num_complex::Complex64;

use super::ast::{BinOp, Expr, Func, JetVar};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Const(Complex64),
    Coord { particle: usize, component: usize },
    Var(usize),
    Neg,
    Bin(BinOp),
    Pow(u32),
    Call(Func),
}

/// Operator bodies flattened to postfix programs over a shared list of
/// distinct jet variables. Evaluation performs the same floating-point
/// operations in the same order as [`super::eval_expr`], so results agree
/// bit for bit; it reports only *whether* a domain error occurred, and
/// callers re-run the tree evaluator to locate it.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledOperator {
    vars: Vec<JetVar>,
    bodies: Vec<Vec<Op>>,
}

impl CompiledOperator {
    pub fn new(bodies: &[Expr]) -> Self {
        let mut vars = Vec::new();
        let bodies = bodies
            .iter()
            .map(|b| {
                let mut ops = Vec::new();
                emit(b, &mut vars, &mut ops);
                ops
            })
            .collect();
        Self { vars, bodies }
    }

    /// Distinct jet variables; `values[k]` in [`Self::eval_into`] binds
    /// `vars()[k]`.
    pub fn vars(&self) -> &[JetVar] {
        &self.vars
    }

    pub fn outputs(&self) -> usize {
        self.bodies.len()
    }

    /// Evaluates every body into `out`. Returns `false` on a division by
    /// zero, a logarithm of zero or a non-finite intermediate.
    pub fn eval_into(
        &self,
        values: &[Complex64],
        coordinate: impl Fn(usize, usize) -> f64,
        stack: &mut Vec<Complex64>,
        out: &mut [Complex64],
    ) -> bool {
        for (ops, slot) in self.bodies.iter().zip(out.iter_mut()) {
            stack.clear();
            for op in ops {
                let v = match *op {
                    Op::Const(c) => c,
                    Op::Coord { particle, component } => Complex64::new(coordinate(particle, component), 0.0),
                    Op::Var(k) => values[k],
                    Op::Neg => -stack.pop().expect("operand"),
                    Op::Bin(bin) => {
                        let b = stack.pop().expect("operand");
                        let a = stack.pop().expect("operand");
                        match bin {
                            BinOp::Add => a + b,
                            BinOp::Sub => a - b,
                            BinOp::Mul => a * b,
                            BinOp::Div => {
                                if b.norm_sqr() == 0.0 {
                                    return false;
                                }
                                a / b
                            }
                        }
                    }
                    Op::Pow(e) => {
                        let b = stack.pop().expect("operand");
                        (0..e).fold(Complex64::new(1.0, 0.0), |acc, _| acc * b)
                    }
                    Op::Call(func) => {
                        let z = stack.pop().expect("operand");
                        match func {
                            Func::Conj => z.conj(),
                            Func::Re => Complex64::new(z.re, 0.0),
                            Func::Im => Complex64::new(z.im, 0.0),
                            Func::Abs2 => Complex64::new(z.norm_sqr(), 0.0),
                            Func::Exp => z.exp(),
                            Func::Log => {
                                if z.norm_sqr() == 0.0 {
                                    return false;
                                }
                                z.ln()
                            }
                        }
                    }
                };
                if !v.is_finite() {
                    return false;
                }
                stack.push(v);
            }
            *slot = stack.pop().expect("result");
        }
        true
    }
}

fn emit(e: &Expr, vars: &mut Vec<JetVar>, ops: &mut Vec<Op>) {
    match e {
        Expr::Number(v) => ops.push(Op::Const(Complex64::new(*v, 0.0))),
        Expr::ImagUnit => ops.push(Op::Const(Complex64::i())),
        Expr::Coord { particle, component } => {
            ops.push(Op::Coord { particle: *particle, component: component.unwrap_or(0) })
        }
        Expr::Var(v) => {
            let k = vars.iter().position(|w| w == v).unwrap_or_else(|| {
                vars.push(v.clone());
                vars.len() - 1
            });
            ops.push(Op::Var(k));
        }
        Expr::Neg(a) => {
            emit(a, vars, ops);
            ops.push(Op::Neg);
        }
        Expr::Binary { op, lhs, rhs } => {
            emit(lhs, vars, ops);
            emit(rhs, vars, ops);
            ops.push(Op::Bin(*op));
        }
        Expr::Pow { base, exponent } => {
            emit(base, vars, ops);
            ops.push(Op::Pow(*exponent));
        }
        Expr::Call { func, arg } => {
            emit(arg, vars, ops);
            ops.push(Op::Call(*func));
        }
    }
}
