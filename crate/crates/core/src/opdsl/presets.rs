//! Builtin hierarchies, all built by lifting a one-particle body slot by
//! slot: `H_n = Σ_j (H_1 acting in slot j)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hierarchy::{Hierarchy, HierarchyError};
use super::parser::parse_operator;
use crate::jetcore::{JetError, JetSpec, MultiIndex};
use crate::tensor::Statistics;

/// Default largest arity generated for presets (enough for the `N = 2`
/// conglomerate check, which needs `H_2` and `H_4`).
pub const DEFAULT_MAX_ARITY: usize = 4;

/// View of one slot `j` of an `n`-particle operator component.
pub struct Slot<'a> {
    slot: usize,
    out: &'a [usize],
    d: usize,
}

impl Slot<'_> {
    /// Internal index of the output component in this slot.
    pub fn internal(&self) -> usize {
        self.out[self.slot]
    }

    /// Jet variable with internal index `c` and multi-index `idx` in this
    /// slot; every other slot keeps the output internal index and order 0.
    pub fn var(&self, c: usize, idx: &MultiIndex) -> String {
        let internal: Vec<String> = self
            .out
            .iter()
            .enumerate()
            .map(|(k, a)| if k == self.slot { c.to_string() } else { a.to_string() })
            .collect();
        let zero = MultiIndex::zero(self.d);
        let derivs: Vec<String> =
            (0..self.out.len()).map(|k| if k == self.slot { idx.to_string() } else { zero.to_string() }).collect();
        format!("u[{}]({})", internal.join(","), derivs.join(";"))
    }

    pub fn value(&self, c: usize) -> String {
        self.var(c, &MultiIndex::zero(self.d))
    }

    pub fn coord(&self, k: usize) -> String {
        format!("x[{}].{k}", self.slot)
    }

    /// `Σ_k ∂_k² u^c` in this slot.
    pub fn laplacian(&self, c: usize) -> String {
        (0..self.d).map(|k| self.var(c, &MultiIndex::axis(self.d, k, 2))).collect::<Vec<_>>().join(" + ")
    }
}

/// Lifts a one-particle body template to arities `1..=max_arity`.
pub fn lift(
    spec: JetSpec,
    stats: Statistics,
    max_arity: usize,
    body: impl Fn(&Slot) -> String,
) -> Result<Hierarchy, HierarchyError> {
    let mut operators = BTreeMap::new();
    for arity in 1..=max_arity {
        let count = spec.m.pow(arity as u32);
        let mut bodies = Vec::with_capacity(count);
        for flat in 0..count {
            let mut out = vec![0; arity];
            let mut rest = flat;
            for k in (0..arity).rev() {
                out[k] = rest % spec.m;
                rest /= spec.m;
            }
            let text = (0..arity)
                .map(|slot| format!("({})", body(&Slot { slot, out: &out, d: spec.d })))
                .collect::<Vec<_>>()
                .join(" + ");
            let expr =
                parse_operator(&text).map_err(|error| HierarchyError::Parse { arity, component: flat, error })?;
            bodies.push(expr);
        }
        operators.insert(arity, bodies);
    }
    Hierarchy::new(stats, spec, operators)
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Named builtin hierarchy with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    /// `H_1 u^A = -Δu^A + ω² |x|² u^A`.
    LinearSchrodinger {
        #[serde(default = "default_omega2")]
        omega2: f64,
    },
    /// `H_1 u^A = -Δu^A + g (Σ_C |u^C|²) u^A`.
    CubicNls {
        #[serde(default = "default_coupling")]
        coupling: f64,
    },
    /// `H_1 u^A = -Δu^A + iγ (Δρ/ρ) u^A`, `ρ = Σ_C |u^C|²`.
    DoebnerGoldin { gamma: f64 },
}

fn default_omega2() -> f64 {
    0.5
}

fn default_coupling() -> f64 {
    1.0
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::LinearSchrodinger { .. } => "linear_schrodinger",
            Preset::CubicNls { .. } => "cubic_nls",
            Preset::DoebnerGoldin { .. } => "doebner_goldin",
        }
    }

    pub fn build(&self, spec: JetSpec, stats: Statistics, max_arity: usize) -> Result<Hierarchy, HierarchyError> {
        if spec.order < 2 {
            return Err(HierarchyError::Spec(JetError::InvalidSpec(format!(
                "preset {} needs K >= 2, got {}",
                self.name(),
                spec.order
            ))));
        }
        match *self {
            Preset::LinearSchrodinger { omega2 } => lift(spec, stats, max_arity, |s| {
                let a = s.internal();
                let mut body = format!("-({})", s.laplacian(a));
                if omega2 != 0.0 {
                    let r2: Vec<String> = (0..spec.d).map(|k| format!("{}^2", s.coord(k))).collect();
                    body += &format!(" + {} * ({}) * {}", num(omega2), r2.join(" + "), s.value(a));
                }
                body
            }),
            Preset::CubicNls { coupling } => lift(spec, stats, max_arity, |s| {
                let a = s.internal();
                let rho: Vec<String> = (0..spec.m).map(|c| format!("abs2({})", s.value(c))).collect();
                format!("-({}) + {} * ({}) * {}", s.laplacian(a), num(coupling), rho.join(" + "), s.value(a))
            }),
            Preset::DoebnerGoldin { gamma } => lift(spec, stats, max_arity, |s| {
                let a = s.internal();
                let rho: Vec<String> = (0..spec.m).map(|c| format!("abs2({})", s.value(c))).collect();
                // Δ|u|² expanded by the product rule in jet entries
                let mut lap_rho = Vec::new();
                for c in 0..spec.m {
                    for k in 0..spec.d {
                        let second = s.var(c, &MultiIndex::axis(spec.d, k, 2));
                        let first = s.var(c, &MultiIndex::axis(spec.d, k, 1));
                        let value = s.value(c);
                        lap_rho
                            .push(format!("{second} * conj({value}) + 2 * abs2({first}) + {value} * conj({second})"));
                    }
                }
                format!(
                    "-({}) + i * {} * ({}) / ({}) * {}",
                    s.laplacian(a),
                    num(gamma),
                    lap_rho.join(" + "),
                    rho.join(" + "),
                    s.value(a)
                )
            }),
        }
    }
}

pub fn linear_schrodinger(spec: JetSpec, stats: Statistics, omega2: f64) -> Result<Hierarchy, HierarchyError> {
    Preset::LinearSchrodinger { omega2 }.build(spec, stats, DEFAULT_MAX_ARITY)
}

pub fn cubic_nls(spec: JetSpec, stats: Statistics, coupling: f64) -> Result<Hierarchy, HierarchyError> {
    Preset::CubicNls { coupling }.build(spec, stats, DEFAULT_MAX_ARITY)
}

pub fn doebner_goldin(spec: JetSpec, stats: Statistics, gamma: f64) -> Result<Hierarchy, HierarchyError> {
    Preset::DoebnerGoldin { gamma }.build(spec, stats, DEFAULT_MAX_ARITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcore::{random_jet, Jet};
    use num_complex::Complex64;

    #[test]
    fn lifted_bodies_have_expected_text() {
        let spec = JetSpec::new(1, 2, 1).unwrap();
        let h = Preset::LinearSchrodinger { omega2: 0.0 }.build(spec, Statistics::Bose, 2).unwrap();
        assert_eq!(h.operator(1).unwrap()[0].to_string(), "-u[0]((2))");
        assert_eq!(h.operator(2).unwrap()[0].to_string(), "-u[0,0]((2);(0)) + -u[0,0]((0);(2))");
        assert!(h.is_linear(1) && h.is_linear(2));
        assert_eq!(h.arities().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn component_counts_and_linearity_flags() {
        let spec = JetSpec::new(2, 2, 2).unwrap();
        for stats in [Statistics::Bose, Statistics::Fermi] {
            let lin = linear_schrodinger(spec, stats, 0.5).unwrap();
            let cubic = cubic_nls(spec, stats, 1.0).unwrap();
            let dg = doebner_goldin(spec, stats, 0.3).unwrap();
            for n in 1..=DEFAULT_MAX_ARITY {
                assert_eq!(lin.operator(n).unwrap().len(), 2usize.pow(n as u32));
                assert!(lin.is_linear(n));
                assert!(!cubic.is_linear(n));
                assert!(!dg.is_linear(n));
                assert!(dg.is_domain_restricted(n));
                assert!(!lin.is_domain_restricted(n));
            }
        }
    }

    #[test]
    fn presets_need_second_derivatives() {
        let spec = JetSpec::new(1, 1, 1).unwrap();
        assert!(linear_schrodinger(spec, Statistics::Bose, 0.0).is_err());
    }

    #[test]
    fn doebner_goldin_matches_hand_evaluation() {
        // Δρ/ρ from the product rule, evaluated directly on the jet entries
        let gamma = 0.3;
        let spec = JetSpec::new(2, 2, 1).unwrap();
        let h = doebner_goldin(spec, Statistics::Bose, gamma).unwrap();
        for seed in 0..25 {
            let jet = random_jet(&spec, &[0.2, -0.1], seed, 1.0);
            let at = |e: &[u32]| jet.value(0, &MultiIndex::new(e.to_vec()));
            let u = at(&[0, 0]);
            let (ux, uy) = (at(&[1, 0]), at(&[0, 1]));
            let (uxx, uyy) = (at(&[2, 0]), at(&[0, 2]));
            let rho = u.norm_sqr();
            let lap_rho =
                2.0 * (uxx * u.conj()).re + 2.0 * ux.norm_sqr() + 2.0 * (uyy * u.conj()).re + 2.0 * uy.norm_sqr();
            let want = -(uxx + uyy) + Complex64::i() * gamma * lap_rho / rho * u;
            let got = h.eval(1, &jet).unwrap()[0];
            assert!((got - want).norm() < 1e-13 * want.norm().max(1.0));
        }
    }

    #[test]
    fn linear_preset_uses_the_coordinate() {
        let spec = JetSpec::new(1, 2, 1).unwrap();
        let h = linear_schrodinger(spec, Statistics::Bose, 2.0).unwrap();
        let jet = Jet::zeros(spec, vec![3.0]).with_value(0, &MultiIndex::new(vec![0]), Complex64::new(1.0, 0.0));
        assert_eq!(h.eval(1, &jet).unwrap()[0], Complex64::new(18.0, 0.0));
    }

    #[test]
    fn preset_config_form() {
        let p: Preset = serde_json::from_str(r#"{"preset":"doebner_goldin","gamma":0.3}"#).unwrap();
        assert_eq!(p, Preset::DoebnerGoldin { gamma: 0.3 });
        let p: Preset = serde_json::from_str(r#"{"preset":"linear_schrodinger"}"#).unwrap();
        assert_eq!(p, Preset::LinearSchrodinger { omega2: 0.5 });
        assert!(serde_json::from_str::<Preset>(r#"{"preset":"nope"}"#).is_err());
    }
}
