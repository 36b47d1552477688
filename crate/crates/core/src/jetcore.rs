//! Multi-indices, finite jets and their polynomial realizations.
//!
//! A [`Jet`] is the table of partial derivatives `∂_I ψ^A(x)` of a (possibly
//! vector-valued) wave function at a single basepoint, truncated at total
//! order `K`. Any such table is realized exactly by the Taylor polynomial
//! returned from [`borel_realize`], and [`jet_of_poly`] recovers the table
//! by exact differentiation of a coefficient table.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("invalid jet spec: {0}")]
    InvalidSpec(String),
    #[error("expected {expected} values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("basepoint has dimension {got}, expected {expected}")]
    Basepoint { expected: usize, got: usize },
    #[error("non-finite jet value at position {0}")]
    NonFinite(usize),
    #[error("polynomial term has exponent of dimension {got}, expected {expected}")]
    ExponentDimension { expected: usize, got: usize },
}

/// Exponent / differentiation multi-index `I = (i_1, …, i_d)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    /// `order` derivatives along axis `axis`.
    pub fn axis(d: usize, axis: usize, order: u32) -> Self {
        let mut entries = vec![0; d];
        entries[axis] = order;
        Self(entries)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|I|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `I! = i_1! ⋯ i_d!`
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&i| factorial(i)).product()
    }

    /// Componentwise `self ≤ other`.
    pub fn divides(&self, other: &MultiIndex) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn concat(&self, other: &MultiIndex) -> MultiIndex {
        let mut entries = self.0.clone();
        entries.extend_from_slice(&other.0);
        MultiIndex(entries)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&i| i == 0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str(")")
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Binomial coefficient for the small arguments used in table sizing.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All multi-indices of dimension `d` with `|I| ≤ max_order`, in graded
/// lexicographic order: by total order, then by descending first entry.
///
/// `(d=2, K=2)` gives `(0,0) (1,0) (0,1) (2,0) (1,1) (0,2)`.
pub fn enum_multi_indices(d: usize, max_order: u32) -> Vec<MultiIndex> {
    assert!(d >= 1, "dimension must be at least 1");
    let mut out = Vec::with_capacity(binomial(d + max_order as usize, d));
    let mut prefix = Vec::with_capacity(d);
    for grade in 0..=max_order {
        compositions(grade, d, &mut prefix, &mut out);
    }
    out
}

fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if parts == 1 {
        prefix.push(total);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Position of `idx` in [`enum_multi_indices`] for its own dimension.
pub fn multi_index_rank(idx: &MultiIndex) -> usize {
    let d = idx.dim();
    let grade = idx.order() as usize;
    // everything of strictly lower order comes first
    let mut rank = if grade == 0 { 0 } else { binomial(grade - 1 + d, d) };
    let mut remaining = grade;
    for (pos, &e) in idx.0.iter().enumerate() {
        let after = d - pos - 1;
        if after == 0 {
            break;
        }
        let e = e as usize;
        for first in (e + 1)..=remaining {
            rank += binomial(remaining - first + after - 1, after - 1);
        }
        remaining -= e;
    }
    rank
}

/// Dimension, truncation order and internal range of a jet table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JetSpec {
    pub d: usize,
    #[serde(rename = "K")]
    pub order: u32,
    pub m: usize,
}

impl JetSpec {
    pub fn new(d: usize, order: u32, m: usize) -> Result<Self, JetError> {
        if d == 0 {
            return Err(JetError::InvalidSpec("d must be >= 1".into()));
        }
        if m == 0 {
            return Err(JetError::InvalidSpec("m must be >= 1".into()));
        }
        Ok(Self { d, order, m })
    }

    /// Number of multi-indices with `|I| ≤ K`.
    pub fn index_count(&self) -> usize {
        binomial(self.d + self.order as usize, self.d)
    }

    pub fn value_count(&self) -> usize {
        self.m * self.index_count()
    }

    pub fn indices(&self) -> Vec<MultiIndex> {
        enum_multi_indices(self.d, self.order)
    }

    /// Table position of `idx`, or `None` if it has the wrong dimension or
    /// exceeds the truncation order.
    pub fn position(&self, idx: &MultiIndex) -> Option<usize> {
        if idx.dim() != self.d || idx.order() > self.order {
            return None;
        }
        Some(multi_index_rank(idx))
    }
}

/// Derivative table `ψ^A_I` at one basepoint. Layout is internal-major:
/// entry `(A, I)` lives at `A · index_count + rank(I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    spec: JetSpec,
    basepoint: Vec<f64>,
    values: Vec<Complex64>,
}

impl Jet {
    pub fn new(spec: JetSpec, basepoint: Vec<f64>, values: Vec<Complex64>) -> Result<Self, JetError> {
        if basepoint.len() != spec.d {
            return Err(JetError::Basepoint { expected: spec.d, got: basepoint.len() });
        }
        if values.len() != spec.value_count() {
            return Err(JetError::ValueCount { expected: spec.value_count(), got: values.len() });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(JetError::NonFinite(pos));
        }
        Ok(Self { spec, basepoint, values })
    }

    pub fn zeros(spec: JetSpec, basepoint: Vec<f64>) -> Self {
        assert_eq!(basepoint.len(), spec.d, "basepoint dimension");
        let values = vec![Complex64::new(0.0, 0.0); spec.value_count()];
        Self { spec, basepoint, values }
    }

    pub fn spec(&self) -> &JetSpec {
        &self.spec
    }

    pub fn basepoint(&self) -> &[f64] {
        &self.basepoint
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, a: usize, idx: &MultiIndex) -> Option<Complex64> {
        if a >= self.spec.m {
            return None;
        }
        let pos = self.spec.position(idx)?;
        Some(self.values[a * self.spec.index_count() + pos])
    }

    /// Like [`Jet::get`] but panics on an out-of-range entry.
    pub fn value(&self, a: usize, idx: &MultiIndex) -> Complex64 {
        self.get(a, idx).unwrap_or_else(|| panic!("jet entry ({a}, {idx}) out of range"))
    }

    /// Zeroth-order value `ψ^A_0`.
    pub fn zeroth(&self, a: usize) -> Complex64 {
        self.values[a * self.spec.index_count()]
    }

    pub fn with_value(mut self, a: usize, idx: &MultiIndex, value: Complex64) -> Self {
        let pos = self.spec.position(idx).expect("multi-index within spec");
        self.values[a * self.spec.index_count() + pos] = value;
        self
    }

    pub fn scaled(&self, s: Complex64) -> Jet {
        Jet { spec: self.spec, basepoint: self.basepoint.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    /// `self + s · other`; both jets must share spec and basepoint.
    pub fn add_scaled(&self, s: Complex64, other: &Jet) -> Jet {
        assert_eq!(self.spec, other.spec, "jet specs differ");
        assert_eq!(self.basepoint, other.basepoint, "jet basepoints differ");
        Jet {
            spec: self.spec,
            basepoint: self.basepoint.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect(),
        }
    }
}

/// The four αβ-quantities: `alpha`, `beta` at `x` and their tilde
/// counterparts at `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ABQuadruple {
    pub alpha: Jet,
    pub beta: Jet,
    pub alpha_t: Jet,
    pub beta_t: Jet,
}

impl ABQuadruple {
    pub fn new(alpha: Jet, beta: Jet, alpha_t: Jet, beta_t: Jet) -> Result<Self, JetError> {
        let spec = alpha.spec;
        for j in [&beta, &alpha_t, &beta_t] {
            if j.spec != spec {
                return Err(JetError::InvalidSpec("quadruple jets must share one spec".into()));
            }
        }
        if alpha.basepoint != beta.basepoint || alpha_t.basepoint != beta_t.basepoint {
            return Err(JetError::InvalidSpec("alpha/beta and their tilde partners must share basepoints".into()));
        }
        Ok(Self { alpha, beta, alpha_t, beta_t })
    }

    pub fn spec(&self) -> &JetSpec {
        &self.alpha.spec
    }
}

fn uniform_complex(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    Complex64::new(rng.random_range(-scale..=scale), rng.random_range(-scale..=scale))
}

/// Fills `count` blocks of `block` entries with uniform complex samples and
/// redraws the first entry of each block until its modulus exceeds
/// `0.1 · scale`.
pub(crate) fn generic_values(seed: u64, scale: f64, count: usize, block: usize) -> Vec<Complex64> {
    assert!(scale > 0.0 && scale.is_finite(), "scale must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<Complex64> = (0..count * block).map(|_| uniform_complex(&mut rng, scale)).collect();
    for b in 0..count {
        while values[b * block].norm() <= 0.1 * scale {
            values[b * block] = uniform_complex(&mut rng, scale);
        }
    }
    values
}

/// Seeded generic jet: entries uniform in `[-scale, scale] + i[-scale, scale]`,
/// with every zeroth-order entry bounded away from zero.
pub fn random_jet(spec: &JetSpec, basepoint: &[f64], seed: u64, scale: f64) -> Jet {
    assert_eq!(basepoint.len(), spec.d, "basepoint dimension");
    let values = generic_values(seed, scale, spec.m, spec.index_count());
    Jet { spec: *spec, basepoint: basepoint.to_vec(), values }
}

/// Vector-valued polynomial in powers of `(x - center)`, one sparse
/// coefficient table per internal component.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    center: Vec<f64>,
    components: Vec<BTreeMap<MultiIndex, Complex64>>,
}

impl Polynomial {
    pub fn new(center: Vec<f64>, components: Vec<BTreeMap<MultiIndex, Complex64>>) -> Result<Self, JetError> {
        let d = center.len();
        if d == 0 || components.is_empty() {
            return Err(JetError::InvalidSpec("polynomial needs d >= 1 and m >= 1".into()));
        }
        for exp in components.iter().flat_map(|c| c.keys()) {
            if exp.dim() != d {
                return Err(JetError::ExponentDimension { expected: d, got: exp.dim() });
            }
        }
        Ok(Self { center, components })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn components(&self) -> usize {
        self.components.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn coefficients(&self, a: usize) -> &BTreeMap<MultiIndex, Complex64> {
        &self.components[a]
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().flat_map(|c| c.keys()).map(MultiIndex::order).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim(), "evaluation point dimension");
        let shift: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.components.iter().map(|terms| terms.iter().map(|(e, c)| c * monomial(&shift, e.entries())).sum()).collect()
    }

    /// Product in disjoint variables: `(P ⊗ Q)^{A m_Q + B}(x, y) = P^A(x) Q^B(y)`.
    pub fn outer(&self, other: &Polynomial) -> Polynomial {
        let mut center = self.center.clone();
        center.extend_from_slice(&other.center);
        let mut components = Vec::with_capacity(self.components() * other.components());
        for p in &self.components {
            for q in &other.components {
                let mut terms = BTreeMap::new();
                for (ep, cp) in p {
                    for (eq, cq) in q {
                        *terms.entry(ep.concat(eq)).or_insert(Complex64::new(0.0, 0.0)) += cp * cq;
                    }
                }
                components.push(terms);
            }
        }
        Polynomial { center, components }
    }

    /// `self + s · other` (same center and shape).
    pub fn add_scaled(&self, s: Complex64, other: &Polynomial) -> Polynomial {
        assert_eq!(self.center, other.center, "polynomial centers differ");
        assert_eq!(self.components(), other.components(), "component counts differ");
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(p, q)| {
                let mut terms = p.clone();
                for (e, c) in q {
                    *terms.entry(e.clone()).or_insert(Complex64::new(0.0, 0.0)) += s * c;
                }
                terms
            })
            .collect();
        Polynomial { center: self.center.clone(), components }
    }
}

fn monomial(shift: &[f64], exps: &[u32]) -> f64 {
    shift.iter().zip(exps).map(|(s, &e)| s.powi(e as i32)).product()
}

/// Taylor polynomial realizing `jet` exactly at its basepoint:
/// `P^A(x) = Σ_I ψ^A_I (x - x₀)^I / I!`.
pub fn borel_realize(jet: &Jet) -> Polynomial {
    let indices = jet.spec.indices();
    let n = jet.spec.index_count();
    let components = (0..jet.spec.m)
        .map(|a| {
            indices
                .iter()
                .enumerate()
                .filter(|(pos, _)| jet.values[a * n + pos] != Complex64::new(0.0, 0.0))
                .map(|(pos, idx)| (idx.clone(), jet.values[a * n + pos] / idx.factorial()))
                .collect()
        })
        .collect();
    Polynomial { center: jet.basepoint.clone(), components }
}

/// Exact derivative table of `poly` at `point` up to order `max_order`.
pub fn jet_of_poly(poly: &Polynomial, point: &[f64], max_order: u32) -> Result<Jet, JetError> {
    if point.len() != poly.dim() {
        return Err(JetError::Basepoint { expected: poly.dim(), got: point.len() });
    }
    let spec = JetSpec::new(poly.dim(), max_order, poly.components())?;
    let shift: Vec<f64> = point.iter().zip(&poly.center).map(|(a, c)| a - c).collect();
    let indices = spec.indices();
    let mut values = Vec::with_capacity(spec.value_count());
    for terms in &poly.components {
        for idx in &indices {
            let mut acc = Complex64::new(0.0, 0.0);
            for (exp, coeff) in terms {
                if !idx.divides(exp) {
                    continue;
                }
                let mut weight = 1.0;
                let mut rest = Vec::with_capacity(exp.dim());
                for (&e, &i) in exp.entries().iter().zip(idx.entries()) {
                    weight *= falling_factorial(e, i);
                    rest.push(e - i);
                }
                acc += coeff * weight * monomial(&shift, &rest);
            }
            values.push(acc);
        }
    }
    Jet::new(spec, point.to_vec(), values)
}

fn falling_factorial(n: u32, k: u32) -> f64 {
    ((n - k + 1)..=n).map(f64::from).product()
}
