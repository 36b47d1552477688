use std::fmt;

use super::ast::{BinOp, Expr, Func};
use crate::jetcore::JetSpec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    InternalIndexOutOfRange { index: usize, m: usize },
    DerivativeOrderExceedsK { order: u32, max_order: u32 },
    MultiIndexDimension { got: usize, d: usize },
    ParticleCount { got: usize, arity: usize },
    CoordParticleOutOfRange { particle: usize, arity: usize },
    CoordComponentOutOfRange { component: usize, d: usize },
    MissingCoordComponent { d: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InternalIndexOutOfRange { index, m } => {
                write!(f, "internal index out of range ({index} >= m = {m})")
            }
            Violation::DerivativeOrderExceedsK { order, max_order } => {
                write!(f, "derivative order exceeds K ({order} > {max_order})")
            }
            Violation::MultiIndexDimension { got, d } => write!(f, "multi-index has length {got}, expected d = {d}"),
            Violation::ParticleCount { got, arity } => {
                write!(f, "jet variable addresses {got} particles, operator arity is {arity}")
            }
            Violation::CoordParticleOutOfRange { particle, arity } => {
                write!(f, "coordinate particle {particle} out of range for arity {arity}")
            }
            Violation::CoordComponentOutOfRange { component, d } => {
                write!(f, "coordinate component {component} out of range for d = {d}")
            }
            Violation::MissingCoordComponent { d } => write!(f, "coordinate needs an explicit component when d = {d}"),
        }
    }
}

/// One failed check, located by node path (`$`, `$/0`, `$/1/0`, …).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationIssue {
    pub path: String,
    pub violation: Violation,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.violation)
    }
}

/// Result of a successful validation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Validated {
    /// Paths of `log` calls and divisions whose operands must be nonzero
    /// at evaluation time.
    pub domain_restricted: Vec<String>,
}

pub fn validate(expr: &Expr, spec: &JetSpec, arity: usize) -> Result<Validated, Vec<ValidationIssue>> {
    let mut issues = Vec::new();
    let mut restricted = Vec::new();
    expr.walk(&mut |path, node| {
        let mut report = |violation| issues.push(ValidationIssue { path: path.to_string(), violation });
        match node {
            Expr::Var(v) => {
                if v.internal.len() != arity {
                    report(Violation::ParticleCount { got: v.internal.len(), arity });
                }
                if v.derivs.len() != arity {
                    report(Violation::ParticleCount { got: v.derivs.len(), arity });
                }
                for &a in &v.internal {
                    if a >= spec.m {
                        report(Violation::InternalIndexOutOfRange { index: a, m: spec.m });
                    }
                }
                for idx in &v.derivs {
                    if idx.dim() != spec.d {
                        report(Violation::MultiIndexDimension { got: idx.dim(), d: spec.d });
                    }
                    if idx.order() > spec.order {
                        report(Violation::DerivativeOrderExceedsK { order: idx.order(), max_order: spec.order });
                    }
                }
            }
            Expr::Coord { particle, component } => {
                if *particle >= arity {
                    report(Violation::CoordParticleOutOfRange { particle: *particle, arity });
                }
                match component {
                    Some(k) if *k >= spec.d => report(Violation::CoordComponentOutOfRange { component: *k, d: spec.d }),
                    None if spec.d > 1 => report(Violation::MissingCoordComponent { d: spec.d }),
                    _ => {}
                }
            }
            Expr::Call { func: Func::Log, .. } => restricted.push(path.to_string()),
            Expr::Binary { op: BinOp::Div, .. } => restricted.push(path.to_string()),
            _ => {}
        }
    });
    if issues.is_empty() {
        Ok(Validated { domain_restricted: restricted })
    } else {
        Err(issues)
    }
}
