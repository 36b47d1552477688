use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::Expr;
use super::eval::{eval_expr, EvalError, JetTable};
use super::parser::{parse_operator, ParseError};
use super::validate::{validate, ValidationIssue};
use crate::jetcore::{JetError, JetSpec, MultiIndex};
use crate::tensor::{ParticleJet, Statistics, TensorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("malformed hierarchy document: {0}")]
    Json(String),
    #[error(transparent)]
    Spec(#[from] JetError),
    #[error(transparent)]
    Statistics(#[from] TensorError),
    #[error("operator key `{0}` is not a positive particle number")]
    BadArity(String),
    #[error("arity {arity} needs {expected} components (m^n), got {got}")]
    ComponentCount { arity: usize, expected: usize, got: usize },
    #[error("arity {arity}, component {component}: {error}")]
    Parse { arity: usize, component: usize, error: ParseError },
    #[error("arity {arity}, component {component}: {}", format_issues(.issues))]
    Invalid { arity: usize, component: usize, issues: Vec<ValidationIssue> },
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// On-disk form: `{"f":0|1, "d":…, "K":…, "m":…, "operators": {"1": [body…], …}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyDoc {
    pub f: u8,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: u32,
    pub m: usize,
    pub operators: BTreeMap<String, Vec<String>>,
}

/// A family of operators `H_n`, one body per output internal multi-index
/// `(A_1,…,A_n)` (flattened in base `m`, slot 0 most significant).
#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    stats: Statistics,
    spec: JetSpec,
    operators: BTreeMap<usize, Vec<Expr>>,
}

impl Hierarchy {
    pub fn new(
        stats: Statistics,
        spec: JetSpec,
        operators: BTreeMap<usize, Vec<Expr>>,
    ) -> Result<Self, HierarchyError> {
        for (&arity, bodies) in &operators {
            if arity == 0 {
                return Err(HierarchyError::BadArity("0".into()));
            }
            let expected = spec.m.pow(arity as u32);
            if bodies.len() != expected {
                return Err(HierarchyError::ComponentCount { arity, expected, got: bodies.len() });
            }
            for (component, body) in bodies.iter().enumerate() {
                validate(body, &spec, arity).map_err(|issues| HierarchyError::Invalid { arity, component, issues })?;
            }
        }
        Ok(Self { stats, spec, operators })
    }

    pub fn from_doc(doc: &HierarchyDoc) -> Result<Self, HierarchyError> {
        let stats = Statistics::try_from(doc.f)?;
        let spec = JetSpec::new(doc.d, doc.k, doc.m)?;
        let mut operators = BTreeMap::new();
        for (key, bodies) in &doc.operators {
            let arity: usize = key.parse().map_err(|_| HierarchyError::BadArity(key.clone()))?;
            let parsed = bodies
                .iter()
                .enumerate()
                .map(|(component, text)| {
                    parse_operator(text).map_err(|error| HierarchyError::Parse { arity, component, error })
                })
                .collect::<Result<Vec<_>, _>>()?;
            operators.insert(arity, parsed);
        }
        Self::new(stats, spec, operators)
    }

    pub fn from_json(text: &str) -> Result<Self, HierarchyError> {
        let doc: HierarchyDoc = serde_json::from_str(text).map_err(|e| HierarchyError::Json(e.to_string()))?;
        Self::from_doc(&doc)
    }

    pub fn to_doc(&self) -> HierarchyDoc {
        HierarchyDoc {
            f: self.stats.fermi_number(),
            d: self.spec.d,
            k: self.spec.order,
            m: self.spec.m,
            operators: self
                .operators
                .iter()
                .map(|(n, bodies)| (n.to_string(), bodies.iter().map(ToString::to_string).collect()))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("hierarchy documents serialize")
    }

    pub fn stats(&self) -> Statistics {
        self.stats
    }

    pub fn spec(&self) -> &JetSpec {
        &self.spec
    }

    /// Same operators under the other statistics.
    pub fn with_stats(&self, stats: Statistics) -> Hierarchy {
        Hierarchy { stats, ..self.clone() }
    }

    pub fn arities(&self) -> impl Iterator<Item = usize> + '_ {
        self.operators.keys().copied()
    }

    pub fn operator(&self, arity: usize) -> Option<&[Expr]> {
        self.operators.get(&arity).map(Vec::as_slice)
    }

    pub fn require(&self, arity: usize) -> Result<&[Expr], EvalError> {
        self.operator(arity).ok_or(EvalError::MissingArity(arity))
    }

    /// Every component of `H_n` is complex linear in the jet variables.
    pub fn is_linear(&self, arity: usize) -> bool {
        self.operator(arity).is_some_and(|bodies| bodies.iter().all(|b| b.degree().is_linear()))
    }

    /// Some component of `H_n` contains a `log` or a division.
    pub fn is_domain_restricted(&self, arity: usize) -> bool {
        self.operator(arity).is_some_and(|bodies| {
            bodies
                .iter()
                .any(|b| !validate(b, &self.spec, arity).map(|v| v.domain_restricted.is_empty()).unwrap_or(true))
        })
    }

    /// `H_n` evaluated on an `n`-particle jet table, one value per output
    /// internal multi-index.
    pub fn eval<T: JetTable + ?Sized>(&self, arity: usize, table: &T) -> Result<Vec<Complex64>, EvalError> {
        let bodies = self.require(arity)?;
        if table.arity() != arity {
            return Err(EvalError::TableArity { expected: arity, got: table.arity() });
        }
        bodies.iter().map(|b| eval_expr(b, table)).collect()
    }
}

pub fn eval_operator<T: JetTable + ?Sized>(
    hier: &Hierarchy,
    arity: usize,
    table: &T,
) -> Result<Vec<Complex64>, EvalError> {
    hier.eval(arity, table)
}

/// Default relative step for the Wirtinger central differences.
pub const WIRTINGER_STEP: f64 = 1e-5;

/// `∂H_n/∂a` for the jet entry at flat position `flat`, using
/// `∂/∂a = ½(∂/∂Re a − i ∂/∂Im a)` with central differences of step
/// `relative_step · max(1, |a|)` on each real direction.
pub fn wirtinger_grad_at(
    hier: &Hierarchy,
    arity: usize,
    jet: &ParticleJet,
    flat: usize,
    relative_step: f64,
) -> Result<Vec<Complex64>, EvalError> {
    if jet.spec() != hier.spec() {
        return Err(EvalError::TableSpec);
    }
    let entry = jet.value_at(flat);
    let h = relative_step * entry.norm().max(1.0);
    let at = |delta: Complex64| hier.eval(arity, &jet.with_value_at(flat, entry + delta));
    let re_plus = at(Complex64::new(h, 0.0))?;
    let re_minus = at(Complex64::new(-h, 0.0))?;
    let im_plus = at(Complex64::new(0.0, h))?;
    let im_minus = at(Complex64::new(0.0, -h))?;
    Ok((0..re_plus.len())
        .map(|k| {
            let d_re = (re_plus[k] - re_minus[k]) / (2.0 * h);
            let d_im = (im_plus[k] - im_minus[k]) / (2.0 * h);
            (d_re - Complex64::i() * d_im) * 0.5
        })
        .collect())
}

/// Wirtinger gradient with respect to the entry `a^{internal}_{derivs}`.
pub fn wirtinger_grad(
    hier: &Hierarchy,
    arity: usize,
    jet: &ParticleJet,
    internal: &[usize],
    derivs: &[MultiIndex],
) -> Result<Vec<Complex64>, EvalError> {
    let flat = jet
        .index(internal, derivs)
        .ok_or_else(|| EvalError::Unbound { path: "$".into(), var: format!("{internal:?}{derivs:?}") })?;
    wirtinger_grad_at(hier, arity, jet, flat, WIRTINGER_STEP)
}

/// `Σ_k v_k ∂H_n/∂a_k` over every table entry: the vector field of a flow
/// along `direction` applied to `H_n`.
pub fn wirtinger_directional(
    hier: &Hierarchy,
    arity: usize,
    jet: &ParticleJet,
    direction: &ParticleJet,
) -> Result<Vec<Complex64>, EvalError> {
    let components = hier.spec().m.pow(arity as u32);
    let mut acc = vec![Complex64::new(0.0, 0.0); components];
    for (flat, v) in direction.values().iter().enumerate() {
        if *v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let grad = wirtinger_grad_at(hier, arity, jet, flat, WIRTINGER_STEP)?;
        for (a, g) in acc.iter_mut().zip(grad) {
            *a += v * g;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcore::{random_jet, Jet};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_body(body: &str) -> Hierarchy {
        let doc = HierarchyDoc {
            f: 0,
            d: 1,
            k: 2,
            m: 1,
            operators: [("1".to_string(), vec![body.to_string()])].into_iter().collect(),
        };
        Hierarchy::from_doc(&doc).unwrap()
    }

    fn jet_with_zeroth(v: Complex64) -> ParticleJet {
        let spec = JetSpec::new(1, 2, 1).unwrap();
        let jet = Jet::zeros(spec, vec![0.0]).with_value(0, &MultiIndex::new(vec![0]), v);
        ParticleJet::from(&jet)
    }

    #[test]
    fn wirtinger_of_modulus_squared() {
        let h = one_body("abs2(u[0]((0)))");
        let g = wirtinger_grad(&h, 1, &jet_with_zeroth(c(1.0, 2.0)), &[0], &[MultiIndex::new(vec![0])]).unwrap();
        assert!((g[0] - c(1.0, -2.0)).norm() < 1e-8);
    }

    #[test]
    fn wirtinger_of_holomorphic_and_conjugate() {
        let jet = jet_with_zeroth(c(0.3, -0.4));
        let zero = [MultiIndex::new(vec![0])];
        let g = wirtinger_grad(&one_body("u[0]((0))"), 1, &jet, &[0], &zero).unwrap();
        assert!((g[0] - c(1.0, 0.0)).norm() < 1e-10);
        let g = wirtinger_grad(&one_body("conj(u[0]((0)))"), 1, &jet, &[0], &zero).unwrap();
        assert!(g[0].norm() < 1e-10);
    }

    #[test]
    fn wirtinger_matches_analytic_derivative_on_holomorphic_bodies() {
        // d/du of u^3 + exp(u) * u' is 3u^2 + exp(u) u'
        let h = one_body("u[0]((0))^3 + exp(u[0]((0))) * u[0]((1))");
        assert!(h.operator(1).unwrap()[0].is_holomorphic());
        let spec = JetSpec::new(1, 2, 1).unwrap();
        for seed in 0..20 {
            let jet = ParticleJet::from(&random_jet(&spec, &[0.0], seed, 1.0));
            let u = jet.values()[0];
            let du = jet.values()[1];
            let g = wirtinger_grad_at(&h, 1, &jet, 0, WIRTINGER_STEP).unwrap();
            let want = u * u * 3.0 + u.exp() * du;
            assert!((g[0] - want).norm() < 1e-8, "{} vs {want}", g[0]);
        }
    }

    #[test]
    fn json_round_trip_and_errors() {
        let text =
            r#"{"f":1,"d":1,"K":2,"m":1,"operators":{"1":["-u[0]((2))"],"2":["-u[0,0]((2);(0)) - u[0,0]((0);(2))"]}}"#;
        let h = Hierarchy::from_json(text).unwrap();
        assert_eq!(h.stats(), Statistics::Fermi);
        assert!(h.is_linear(1) && h.is_linear(2));
        assert_eq!(Hierarchy::from_json(&h.to_json()).unwrap(), h);

        let bad_count = r#"{"f":0,"d":1,"K":2,"m":2,"operators":{"1":["u[0]((0))"]}}"#;
        assert!(matches!(Hierarchy::from_json(bad_count), Err(HierarchyError::ComponentCount { .. })));
        let bad_f = r#"{"f":2,"d":1,"K":2,"m":1,"operators":{}}"#;
        assert!(matches!(Hierarchy::from_json(bad_f), Err(HierarchyError::Statistics(_))));
        let bad_body = r#"{"f":0,"d":1,"K":1,"m":1,"operators":{"1":["u[0]((2))"]}}"#;
        assert!(matches!(Hierarchy::from_json(bad_body), Err(HierarchyError::Invalid { .. })));
        let bad_syntax = r#"{"f":0,"d":1,"K":1,"m":1,"operators":{"1":["u[0]((0)"]}}"#;
        assert!(matches!(Hierarchy::from_json(bad_syntax), Err(HierarchyError::Parse { .. })));
        assert!(matches!(Hierarchy::from_json("{"), Err(HierarchyError::Json(_))));
    }

    #[test]
    fn eval_checks_arity() {
        let h = one_body("u[0]((0))");
        let jet = jet_with_zeroth(c(1.0, 0.0));
        assert!(matches!(h.eval(2, &jet), Err(EvalError::MissingArity(2))));
        assert_eq!(eval_operator(&h, 1, &jet).unwrap(), vec![c(1.0, 0.0)]);
    }

    #[test]
    fn linearity_classification() {
        for (body, linear) in [
            ("u[0]((2))", true),
            ("0", true),
            ("2*u[0]((0)) - x[0]*u[0]((1))/3", true),
            ("u[0]((0)) + 1", false),
            ("conj(u[0]((0)))", false),
            ("u[0]((0))*u[0]((1))", false),
            ("u[0]((0))/u[0]((1))", false),
            ("abs2(u[0]((0)))*u[0]((0))", false),
            ("0*abs2(u[0]((0)))", true),
        ] {
            assert_eq!(one_body(body).is_linear(1), linear, "{body}");
        }
    }
}
