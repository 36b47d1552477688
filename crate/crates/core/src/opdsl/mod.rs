//! Expression language for possibly nonlinear differential operators
//! `H_n(x_1,…,x_n, a_{I_1…I_n})`, with evaluation on jet tables and
//! numerical Wirtinger derivatives.

mod ast;
mod compile;
mod eval;
mod hierarchy;
mod parser;
pub mod presets;
mod validate;

pub use ast::{BinOp, Degree, Expr, Func, JetVar, OperatorExpr};
pub use compile::CompiledOperator;
pub use eval::{eval_expr, EvalError, JetTable};
pub use hierarchy::{
    eval_operator, wirtinger_directional, wirtinger_grad, wirtinger_grad_at, Hierarchy, HierarchyDoc, HierarchyError,
    WIRTINGER_STEP,
};
pub use parser::{parse_operator, ParseError};
pub use presets::Preset;
pub use validate::{validate, Validated, ValidationIssue, Violation};
