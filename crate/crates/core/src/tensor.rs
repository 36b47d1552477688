//! Plain, (anti-)symmetrized and conglomerate tensor products.
//!
//! Products are provided at two levels: on [`ParticleTable`]s (sampled
//! multi-particle functions, one slot `ξ = (x, A)` per particle) and on
//! [`ParticleJet`]s (derivative tables at a tuple of basepoints).

use std::fmt;

use itertools::Itertools;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jetcore::{generic_values, ABQuadruple, Jet, JetSpec, MultiIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("factor is not {expected} under swap of slots {slot} and {next} (deviation {deviation:.3e})")]
    Symmetry { expected: &'static str, slot: usize, next: usize, deviation: f64 },
    #[error("fermi number must be 0 or 1, got {0}")]
    FermiNumber(u8),
}

/// Particle statistics, carried as the Fermi number `f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Statistics {
    Bose,
    Fermi,
}

impl Statistics {
    pub fn fermi_number(self) -> u8 {
        match self {
            Statistics::Bose => 0,
            Statistics::Fermi => 1,
        }
    }

    /// `(-1)^f`.
    pub fn exchange_sign(self) -> f64 {
        self.sign(1)
    }

    /// `(-1)^{f · parity}`.
    pub fn sign(self, parity: usize) -> f64 {
        match self {
            Statistics::Fermi if parity % 2 == 1 => -1.0,
            _ => 1.0,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Statistics::Bose => "symmetric",
            Statistics::Fermi => "antisymmetric",
        }
    }
}

impl TryFrom<u8> for Statistics {
    type Error = TensorError;

    fn try_from(f: u8) -> Result<Self, Self::Error> {
        match f {
            0 => Ok(Statistics::Bose),
            1 => Ok(Statistics::Fermi),
            other => Err(TensorError::FermiNumber(other)),
        }
    }
}

impl From<Statistics> for u8 {
    fn from(s: Statistics) -> u8 {
        s.fermi_number()
    }
}

impl fmt::Display for Statistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f={}", self.fermi_number())
    }
}

/// Number of inversions in `seq`.
pub fn inversions(seq: &[usize]) -> usize {
    let mut count = 0;
    for i in 0..seq.len() {
        for j in (i + 1)..seq.len() {
            if seq[i] > seq[j] {
                count += 1;
            }
        }
    }
    count
}

/// One term of the ascending-subset expansion: the subset `I`, its
/// complement `J`, and the parity of `(1,…,n+m) ↦ (I, J)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetTerm {
    pub chosen: Vec<usize>,
    pub rest: Vec<usize>,
    pub parity: usize,
}

/// All ascending `n`-subsets of `0..n+m` with complements and parities.
pub fn subset_terms(n: usize, m: usize) -> Vec<SubsetTerm> {
    (0..n + m)
        .combinations(n)
        .map(|chosen| {
            let rest: Vec<usize> = (0..n + m).filter(|k| !chosen.contains(k)).collect();
            let seq: Vec<usize> = chosen.iter().chain(&rest).copied().collect();
            SubsetTerm { parity: inversions(&seq) % 2, chosen, rest }
        })
        .collect()
}

/// Normalizing factor `n! m! / (n+m)!` of the symmetrized product.
pub fn sym_prefactor(n: usize, m: usize) -> f64 {
    1.0 / crate::jetcore::binomial(n + m, n) as f64
}

/// Sampled `p`-particle function. Every slot ranges over `points` grid
/// points and `internal` internal-index values; slot `k` contributes the
/// digit `x_k · internal + A_k` (radix `points · internal`), slot 0 most
/// significant.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleTable {
    particles: usize,
    points: usize,
    internal: usize,
    data: Vec<Complex64>,
}

impl ParticleTable {
    pub fn new(particles: usize, points: usize, internal: usize, data: Vec<Complex64>) -> Result<Self, TensorError> {
        if particles == 0 || points == 0 || internal == 0 {
            return Err(TensorError::Shape("particles, points and internal must be positive".into()));
        }
        let expected = (points * internal).pow(particles as u32);
        if data.len() != expected {
            return Err(TensorError::Shape(format!("expected {expected} entries, got {}", data.len())));
        }
        Ok(Self { particles, points, internal, data })
    }

    /// One-particle table from a sampling function `(x index, A) ↦ value`.
    pub fn from_fn(points: usize, internal: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let data = (0..points).flat_map(|x| (0..internal).map(move |a| (x, a))).map(|(x, a)| f(x, a)).collect();
        Self { particles: 1, points, internal, data }
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn internal(&self) -> usize {
        self.internal
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn radix(&self) -> usize {
        self.points * self.internal
    }

    pub fn same_shape(&self, other: &ParticleTable) -> bool {
        self.particles == other.particles && self.points == other.points && self.internal == other.internal
    }

    /// Flat position of the slot tuple `(x_k, A_k)`.
    pub fn position(&self, xs: &[usize], internal: &[usize]) -> usize {
        debug_assert_eq!(xs.len(), self.particles);
        debug_assert_eq!(internal.len(), self.particles);
        xs.iter().zip(internal).fold(0, |acc, (&x, &a)| acc * self.radix() + x * self.internal + a)
    }

    pub fn get(&self, xs: &[usize], internal: &[usize]) -> Complex64 {
        self.data[self.position(xs, internal)]
    }

    /// Slot digits of a flat position.
    pub fn digits(&self, mut flat: usize) -> Vec<usize> {
        let r = self.radix();
        let mut digits = vec![0; self.particles];
        for k in (0..self.particles).rev() {
            digits[k] = flat % r;
            flat /= r;
        }
        digits
    }

    fn flat_of_digits(&self, digits: impl Iterator<Item = usize>) -> usize {
        let r = self.radix();
        digits.fold(0, |acc, dg| acc * r + dg)
    }

    pub fn scaled(&self, s: Complex64) -> ParticleTable {
        ParticleTable { data: self.data.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `out(ξ_1,…,ξ_p) = self(ξ_{perm[0]},…,ξ_{perm[p-1]})`.
    pub fn permute_slots(&self, perm: &[usize]) -> ParticleTable {
        assert_eq!(perm.len(), self.particles, "permutation length");
        let data = (0..self.data.len())
            .map(|flat| {
                let digits = self.digits(flat);
                self.data[self.flat_of_digits(perm.iter().map(|&k| digits[k]))]
            })
            .collect();
        ParticleTable { data, ..self.clone() }
    }

    pub fn swap_slots(&self, i: usize, j: usize) -> ParticleTable {
        let mut perm: Vec<usize> = (0..self.particles).collect();
        perm.swap(i, j);
        self.permute_slots(&perm)
    }

    /// Checks `(-1)^f` behaviour under every adjacent slot swap, to
    /// `tolerance` relative to the largest entry.
    pub fn check_symmetry(&self, stats: Statistics, tolerance: f64) -> Result<(), TensorError> {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let sign = stats.exchange_sign();
        for k in 0..self.particles.saturating_sub(1) {
            let swapped = self.swap_slots(k, k + 1);
            let deviation =
                swapped.data.iter().zip(&self.data).map(|(s, v)| (s - v * sign).norm()).fold(0.0, f64::max) / scale;
            if deviation > tolerance {
                return Err(TensorError::Symmetry { expected: stats.label(), slot: k, next: k + 1, deviation });
            }
        }
        Ok(())
    }
}

fn check_compatible(phi: &ParticleTable, psi: &ParticleTable) -> Result<(), TensorError> {
    if phi.points != psi.points || phi.internal != psi.internal {
        return Err(TensorError::Shape(format!(
            "factor shapes differ: {} points x {} internal vs {} x {}",
            phi.points, phi.internal, psi.points, psi.internal
        )));
    }
    Ok(())
}

/// `(φ ⊗ ψ)(ξ_1…ξ_n, ξ_{n+1}…ξ_{n+m}) = φ(ξ_1…ξ_n) ψ(ξ_{n+1}…ξ_{n+m})`.
pub fn simple_tensor(phi: &ParticleTable, psi: &ParticleTable) -> Result<ParticleTable, TensorError> {
    check_compatible(phi, psi)?;
    let data = phi.data.iter().flat_map(|a| psi.data.iter().map(move |b| a * b)).collect();
    Ok(ParticleTable { particles: phi.particles + psi.particles, points: phi.points, internal: phi.internal, data })
}

/// Options for [`sym_tensor_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymOptions {
    /// Verify the permutation symmetry of both factors first.
    pub check_inputs: bool,
    pub tolerance: f64,
}

impl Default for SymOptions {
    fn default() -> Self {
        Self { check_inputs: false, tolerance: 1e-10 }
    }
}

/// (Anti-)symmetrized product: the prefactor `n!m!/(n+m)!` times the sum
/// over ascending `n`-subsets `I` of `(-1)^{f p(I)} φ(ξ_I) ψ(ξ_J)`.
pub fn sym_tensor(phi: &ParticleTable, psi: &ParticleTable, stats: Statistics) -> Result<ParticleTable, TensorError> {
    sym_tensor_with(phi, psi, stats, SymOptions::default())
}

pub fn sym_tensor_with(
    phi: &ParticleTable,
    psi: &ParticleTable,
    stats: Statistics,
    options: SymOptions,
) -> Result<ParticleTable, TensorError> {
    check_compatible(phi, psi)?;
    if options.check_inputs {
        phi.check_symmetry(stats, options.tolerance)?;
        psi.check_symmetry(stats, options.tolerance)?;
    }
    let (n, m) = (phi.particles, psi.particles);
    let terms: Vec<(f64, SubsetTerm)> = subset_terms(n, m).into_iter().map(|t| (stats.sign(t.parity), t)).collect();
    let prefactor = sym_prefactor(n, m);
    let out_shape = ParticleTable { particles: n + m, points: phi.points, internal: phi.internal, data: Vec::new() };
    let len = phi.radix().pow((n + m) as u32);
    let data = (0..len)
        .map(|flat| {
            let digits = out_shape.digits(flat);
            let sum: Complex64 = terms
                .iter()
                .map(|(sign, t)| {
                    let a = phi.data[phi.flat_of_digits(t.chosen.iter().map(|&k| digits[k]))];
                    let b = psi.data[psi.flat_of_digits(t.rest.iter().map(|&k| digits[k]))];
                    a * b * *sign
                })
                .sum();
            sum * prefactor
        })
        .collect();
    Ok(ParticleTable { data, ..out_shape })
}

/// Product of two `N`-particle states viewed as two conglomerate particles.
/// The expansion is the ascending-subset sum with prefactor `N!²/(2N)!`;
/// internal indices travel with their coordinates.
pub fn conglomerate_sym_tensor(
    phi: &ParticleTable,
    psi: &ParticleTable,
    stats: Statistics,
) -> Result<ParticleTable, TensorError> {
    if phi.particles != psi.particles {
        return Err(TensorError::Shape(format!(
            "conglomerate factors need equal particle counts, got {} and {}",
            phi.particles, psi.particles
        )));
    }
    sym_tensor(phi, psi, stats)
}

/// Full (anti-)symmetrizer: mean over all slot permutations weighted by
/// `(-1)^{f · parity}`.
pub fn symmetrize(table: &ParticleTable, stats: Statistics) -> ParticleTable {
    let p = table.particles;
    let mut acc = vec![Complex64::new(0.0, 0.0); table.data.len()];
    let mut count = 0usize;
    for perm in (0..p).permutations(p) {
        let sign = stats.sign(inversions(&perm) % 2);
        let permuted = table.permute_slots(&perm);
        for (a, v) in acc.iter_mut().zip(&permuted.data) {
            *a += v * sign;
        }
        count += 1;
    }
    let norm = 1.0 / count as f64;
    ParticleTable { data: acc.into_iter().map(|v| v * norm).collect(), ..table.clone() }
}

/// Derivative table of a `p`-particle function at a tuple of basepoints:
/// entries `a^{A_1…A_p}_{I_1…I_p}` with every `|I_k| ≤ K`.
///
/// Layout: flat internal index `(A_1…A_p)` in base `m` times `n_I^p` plus
/// the flat multi-index rank tuple in base `n_I`, slot 0 most significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleJet {
    spec: JetSpec,
    basepoints: Vec<Vec<f64>>,
    values: Vec<Complex64>,
}

/// Two-particle jet table, the argument of `H_2`.
pub type PairJet = ParticleJet;

impl ParticleJet {
    pub fn new(spec: JetSpec, basepoints: Vec<Vec<f64>>, values: Vec<Complex64>) -> Result<Self, TensorError> {
        if basepoints.is_empty() || basepoints.iter().any(|b| b.len() != spec.d) {
            return Err(TensorError::Shape("each basepoint must have dimension d".into()));
        }
        let p = basepoints.len() as u32;
        let expected = spec.m.pow(p) * spec.index_count().pow(p);
        if values.len() != expected {
            return Err(TensorError::Shape(format!("expected {expected} jet values, got {}", values.len())));
        }
        Ok(Self { spec, basepoints, values })
    }

    pub fn zeros(spec: JetSpec, basepoints: Vec<Vec<f64>>) -> Self {
        let p = basepoints.len() as u32;
        let len = spec.m.pow(p) * spec.index_count().pow(p);
        Self::new(spec, basepoints, vec![Complex64::new(0.0, 0.0); len]).expect("consistent shape")
    }

    pub fn arity(&self) -> usize {
        self.basepoints.len()
    }

    pub fn spec(&self) -> &JetSpec {
        &self.spec
    }

    pub fn basepoints(&self) -> &[Vec<f64>] {
        &self.basepoints
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn internal_count(&self) -> usize {
        self.spec.m.pow(self.arity() as u32)
    }

    pub fn deriv_count(&self) -> usize {
        self.spec.index_count().pow(self.arity() as u32)
    }

    pub fn index(&self, internal: &[usize], derivs: &[MultiIndex]) -> Option<usize> {
        if internal.len() != self.arity() || derivs.len() != self.arity() {
            return None;
        }
        let mut inner = 0;
        for &a in internal {
            if a >= self.spec.m {
                return None;
            }
            inner = inner * self.spec.m + a;
        }
        let n = self.spec.index_count();
        let mut deriv = 0;
        for idx in derivs {
            deriv = deriv * n + self.spec.position(idx)?;
        }
        Some(inner * self.deriv_count() + deriv)
    }

    pub fn get(&self, internal: &[usize], derivs: &[MultiIndex]) -> Option<Complex64> {
        self.index(internal, derivs).map(|k| self.values[k])
    }

    pub fn value_at(&self, flat: usize) -> Complex64 {
        self.values[flat]
    }

    pub fn with_value_at(&self, flat: usize, value: Complex64) -> ParticleJet {
        let mut out = self.clone();
        out.values[flat] = value;
        out
    }

    /// Zeroth-order entry for flat internal index `internal_flat`.
    pub fn zeroth(&self, internal_flat: usize) -> Complex64 {
        self.values[internal_flat * self.deriv_count()]
    }

    pub fn scaled(&self, s: Complex64) -> ParticleJet {
        ParticleJet { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn add_scaled(&self, s: Complex64, other: &ParticleJet) -> ParticleJet {
        assert_eq!(self.spec, other.spec, "jet specs differ");
        assert_eq!(self.basepoints, other.basepoints, "jet basepoints differ");
        ParticleJet { values: self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect(), ..self.clone() }
    }

    /// Reads `(A, I)` out of a single-particle table.
    pub fn to_jet(&self) -> Option<Jet> {
        if self.arity() != 1 {
            return None;
        }
        Jet::new(self.spec, self.basepoints[0].clone(), self.values.clone()).ok()
    }
}

impl From<&Jet> for ParticleJet {
    fn from(jet: &Jet) -> Self {
        ParticleJet { spec: *jet.spec(), basepoints: vec![jet.basepoint().to_vec()], values: jet.values().to_vec() }
    }
}

/// Seeded generic `p`-particle jet; for `p = 1` it coincides with
/// [`crate::jetcore::random_jet`] on the same seed.
pub fn random_particle_jet(spec: &JetSpec, basepoints: &[Vec<f64>], seed: u64, scale: f64) -> ParticleJet {
    let p = basepoints.len() as u32;
    let values = generic_values(seed, scale, spec.m.pow(p), spec.index_count().pow(p));
    ParticleJet::new(*spec, basepoints.to_vec(), values).expect("consistent shape")
}

/// `Σ_t c_t · (left_t ⊗ right_t)` on jets: output basepoints are the left
/// basepoints followed by the right ones.
pub fn combine_products(terms: &[(Complex64, &ParticleJet, &ParticleJet)]) -> Result<ParticleJet, TensorError> {
    let (_, left0, right0) = terms.first().ok_or_else(|| TensorError::Shape("no product terms".into()))?;
    for (_, l, r) in terms {
        if l.spec != left0.spec || r.spec != left0.spec {
            return Err(TensorError::Shape("product factors must share one jet spec".into()));
        }
        if l.basepoints != left0.basepoints || r.basepoints != right0.basepoints {
            return Err(TensorError::Shape("product factors must share basepoints per side".into()));
        }
    }
    let spec = left0.spec;
    let mut basepoints = left0.basepoints.clone();
    basepoints.extend(right0.basepoints.iter().cloned());
    let mut out = ParticleJet::zeros(spec, basepoints);
    let (li, ld) = (left0.internal_count(), left0.deriv_count());
    let (ri, rd) = (right0.internal_count(), right0.deriv_count());
    let out_d = out.deriv_count();
    for a in 0..li {
        for b in 0..ri {
            let inner = a * ri + b;
            for i in 0..ld {
                for j in 0..rd {
                    let slot = inner * out_d + i * rd + j;
                    out.values[slot] =
                        terms.iter().map(|(c, l, r)| c * l.values[a * ld + i] * r.values[b * rd + j]).sum();
                }
            }
        }
    }
    Ok(out)
}

/// Plain product jet `a^{AB}_{I,J} = α^A_I β̃^B_J`.
pub fn plain_product_jet(alpha: &ParticleJet, beta_t: &ParticleJet) -> Result<ParticleJet, TensorError> {
    combine_products(&[(Complex64::new(1.0, 0.0), alpha, beta_t)])
}

/// Constrained pair jet `â^{AB}_{I,J} = ½(α^A_I β̃^B_J + (-1)^f β^A_I α̃^B_J)`.
pub fn sym_product_jet(ab: &ABQuadruple, stats: Statistics) -> PairJet {
    let alpha = ParticleJet::from(&ab.alpha);
    let beta = ParticleJet::from(&ab.beta);
    let alpha_t = ParticleJet::from(&ab.alpha_t);
    let beta_t = ParticleJet::from(&ab.beta_t);
    combine_products(&[
        (Complex64::new(0.5, 0.0), &alpha, &beta_t),
        (Complex64::new(0.5 * stats.exchange_sign(), 0.0), &beta, &alpha_t),
    ])
    .expect("quadruple invariants guarantee compatible factors")
}
