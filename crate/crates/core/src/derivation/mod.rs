//! Jet-level separation residuals.
//!
//! For a hierarchy `{H_n}` the plain tensor-derivation property reads
//! `H_2(α ⊗ β̃) = H_1(α) β̃_0 + α_0 H_1(β̃)` on jets, and the
//! (anti-)symmetric one
//!
//! ```text
//! 2 H_2(â) = H_1(α) β̃_0 + α_0 H_1(β̃) + (−1)^f H_1(β) α̃_0 + (−1)^f β_0 H_1(α̃)
//! ```
//!
//! with `â = ½(α β̃ + (−1)^f β α̃)`. The residuals below are the differences
//! of the two sides, componentwise over the output internal indices
//! `(A, B)`. All of them are normalized by the largest contributing term so
//! that tolerances do not depend on the overall scale of the sample.

mod certificate;
mod flows;
mod sweep;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jetcore::{ABQuadruple, Jet, JetSpec};
use crate::opdsl::{wirtinger_directional, EvalError, Hierarchy};
use crate::tensor::{combine_products, random_particle_jet, sym_prefactor, ParticleJet, Statistics};

pub use certificate::{linearity_certificate, normalized_bracket, LinearityCertificate, Verdict};
pub use flows::{apply_flow, FlowKind};
pub use sweep::{
    conglomerate_reduce, flow_field_sweep, flow_invariance_sweep, plain_sweep, sym_sweep, ResidualReport, Sweep,
    Witness,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DerivationError {
    #[error("sample {sample}: {source}")]
    Eval {
        sample: usize,
        witness: Box<Witness>,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Operator(#[from] EvalError),
    #[error("scale flow needs a nonzero parameter")]
    ZeroScale,
    #[error("hierarchy lacks arity {0}")]
    MissingArity(usize),
    #[error("jet spec does not match the hierarchy")]
    SpecMismatch,
    #[error("every sample has a zeroth-order entry below the genericity floor")]
    Degenerate,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// Residual components over `(A, B)` together with the largest magnitude
/// among the terms that were subtracted.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub values: Vec<Complex64>,
    pub scale: f64,
}

impl Residual {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |residual| / max |term|` (zero when every term vanishes).
    pub fn normalized(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.max_abs() / self.scale
        }
    }
}

/// αβ-quantities for `N`-particle factors (`N = 1` is the ordinary
/// [`ABQuadruple`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleQuadruple {
    pub alpha: ParticleJet,
    pub beta: ParticleJet,
    pub alpha_t: ParticleJet,
    pub beta_t: ParticleJet,
}

impl ParticleQuadruple {
    pub fn particles(&self) -> usize {
        self.alpha.arity()
    }

    pub fn spec(&self) -> &JetSpec {
        self.alpha.spec()
    }

    pub fn to_ab(&self) -> Option<ABQuadruple> {
        ABQuadruple::new(self.alpha.to_jet()?, self.beta.to_jet()?, self.alpha_t.to_jet()?, self.beta_t.to_jet()?).ok()
    }
}

impl From<&ABQuadruple> for ParticleQuadruple {
    fn from(ab: &ABQuadruple) -> Self {
        Self {
            alpha: (&ab.alpha).into(),
            beta: (&ab.beta).into(),
            alpha_t: (&ab.alpha_t).into(),
            beta_t: (&ab.beta_t).into(),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sample `index` in a sweep seeded with `seed`; independent of
/// scheduling order.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Generic quadruple of `N`-particle jets at random basepoint tuples
/// `x, y ∈ [-1, 1]^{N d}`.
pub fn random_quadruple(spec: &JetSpec, particles: usize, seed: u64, scale: f64) -> ParticleQuadruple {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = || -> Vec<Vec<f64>> {
        (0..particles).map(|_| (0..spec.d).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect()
    };
    let x = points();
    let y = points();
    let jet = |bases: &[Vec<f64>], k: u64| random_particle_jet(spec, bases, sample_seed(seed, k), scale);
    ParticleQuadruple { alpha: jet(&x, 1), beta: jet(&x, 2), alpha_t: jet(&y, 3), beta_t: jet(&y, 4) }
}

fn zeroth_vector(jet: &ParticleJet) -> Vec<Complex64> {
    (0..jet.internal_count()).map(|a| jet.zeroth(a)).collect()
}

fn outer(left: &[Complex64], right: &[Complex64]) -> Vec<Complex64> {
    left.iter().flat_map(|l| right.iter().map(move |r| l * r)).collect()
}

fn norm_max(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn check_spec(hier: &Hierarchy, jet: &ParticleJet) -> Result<(), DerivationError> {
    if hier.spec() != jet.spec() {
        return Err(DerivationError::SpecMismatch);
    }
    Ok(())
}

/// `H_2(a) − [H_1^{(A)}(α) β̃_0 + α_0 H_1^{(B)}(β̃)]` with `a = α ⊗ β̃`, for
/// separately supplied factor operators and joint operator.
pub fn plain_residual(
    hier_a: &Hierarchy,
    hier_b: &Hierarchy,
    hier_ab: &Hierarchy,
    alpha: &Jet,
    beta_t: &Jet,
) -> Result<Residual, DerivationError> {
    let alpha = ParticleJet::from(alpha);
    let beta_t = ParticleJet::from(beta_t);
    for (h, j) in [(hier_a, &alpha), (hier_b, &beta_t), (hier_ab, &alpha)] {
        check_spec(h, j)?;
    }
    let joint = combine_products(&[(Complex64::new(1.0, 0.0), &alpha, &beta_t)]).expect("compatible jets");
    let lhs = hier_ab.eval(2, &joint)?;
    let t1 = outer(&hier_a.eval(1, &alpha)?, &zeroth_vector(&beta_t));
    let t2 = outer(&zeroth_vector(&alpha), &hier_b.eval(1, &beta_t)?);
    let values = (0..lhs.len()).map(|k| lhs[k] - t1[k] - t2[k]).collect();
    let scale = [norm_max(&lhs), norm_max(&t1), norm_max(&t2)].into_iter().fold(0.0, f64::max);
    Ok(Residual { values, scale })
}

/// Sign carried by the exchanged term of the conglomerate product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConglomerateSign {
    /// `(−1)^{f N}`: the parity of exchanging two blocks of `N` slots. It
    /// is `+1` for even `N`, where the Fermi sign drops out.
    #[default]
    Parity,
    /// Always `+1`.
    Bosonic,
}

impl ConglomerateSign {
    pub fn sign(self, stats: Statistics, particles: usize) -> f64 {
        match self {
            ConglomerateSign::Parity => stats.sign(particles),
            ConglomerateSign::Bosonic => 1.0,
        }
    }
}

/// Separability residual for two `N`-particle factors:
/// `c⁻¹ H_{2N}(â) − [H_N(α)β̃_0 + α_0 H_N(β̃) + σ H_N(β)α̃_0 + σ β_0 H_N(α̃)]`
/// with `c = N!²/(2N)!` and `â = c(α β̃ + σ β α̃)`.
pub fn block_sym_residual(
    hier: &Hierarchy,
    quad: &ParticleQuadruple,
    sign: ConglomerateSign,
) -> Result<Residual, DerivationError> {
    let n = quad.particles();
    check_spec(hier, &quad.alpha)?;
    for arity in [n, 2 * n] {
        if hier.operator(arity).is_none() {
            return Err(DerivationError::MissingArity(arity));
        }
    }
    let sigma = sign.sign(hier.stats(), n);
    let c = sym_prefactor(n, n);
    let hat = combine_products(&[
        (Complex64::new(c, 0.0), &quad.alpha, &quad.beta_t),
        (Complex64::new(c * sigma, 0.0), &quad.beta, &quad.alpha_t),
    ])
    .expect("compatible jets");
    let lhs: Vec<Complex64> = hier.eval(2 * n, &hat)?.into_iter().map(|v| v / c).collect();
    let t1 = outer(&hier.eval(n, &quad.alpha)?, &zeroth_vector(&quad.beta_t));
    let t2 = outer(&zeroth_vector(&quad.alpha), &hier.eval(n, &quad.beta_t)?);
    let t3: Vec<Complex64> =
        outer(&hier.eval(n, &quad.beta)?, &zeroth_vector(&quad.alpha_t)).into_iter().map(|v| v * sigma).collect();
    let t4: Vec<Complex64> =
        outer(&zeroth_vector(&quad.beta), &hier.eval(n, &quad.alpha_t)?).into_iter().map(|v| v * sigma).collect();
    let values = (0..lhs.len()).map(|k| lhs[k] - (t1[k] + t2[k] + t3[k] + t4[k])).collect();
    let scale = [&lhs, &t1, &t2, &t3, &t4].into_iter().map(|t| norm_max(t)).fold(0.0, f64::max);
    Ok(Residual { values, scale })
}

/// `2 H_2(â) − [H_1(α)β̃_0 + α_0 H_1(β̃) + (−1)^f H_1(β)α̃_0 + (−1)^f β_0 H_1(α̃)]`.
pub fn sym_residual(hier: &Hierarchy, ab: &ABQuadruple) -> Result<Residual, DerivationError> {
    block_sym_residual(hier, &ParticleQuadruple::from(ab), ConglomerateSign::Parity)
}

/// Right-hand side of the one-particle separability condition, as a
/// function of the quadruple.
pub fn separability_rhs(hier: &Hierarchy, ab: &ABQuadruple) -> Result<Vec<Complex64>, DerivationError> {
    let q = ParticleQuadruple::from(ab);
    check_spec(hier, &q.alpha)?;
    let sigma = hier.stats().exchange_sign();
    let t1 = outer(&hier.eval(1, &q.alpha)?, &zeroth_vector(&q.beta_t));
    let t2 = outer(&zeroth_vector(&q.alpha), &hier.eval(1, &q.beta_t)?);
    let t3 = outer(&hier.eval(1, &q.beta)?, &zeroth_vector(&q.alpha_t));
    let t4 = outer(&zeroth_vector(&q.beta), &hier.eval(1, &q.alpha_t)?);
    Ok((0..t1.len()).map(|k| t1[k] + t2[k] + sigma * (t3[k] + t4[k])).collect())
}

/// `Σ_{C,I} v^C_I ∂H_1/∂u^C_I(u) − H_1(v)` at a common basepoint.
pub fn flow_bracket(hier: &Hierarchy, u: &Jet, v: &Jet) -> Result<Vec<Complex64>, DerivationError> {
    let u = ParticleJet::from(u);
    let v = ParticleJet::from(v);
    check_spec(hier, &u)?;
    let directional = wirtinger_directional(hier, 1, &u, &v)?;
    let direct = hier.eval(1, &v)?;
    Ok(directional.iter().zip(direct).map(|(a, b)| a - b).collect())
}

/// The shift-flow vector field applied to the separability right side:
/// `[Σ β ∂H_1/∂α(x,α) − H_1(x,β)] β̃_0 − β_0 [Σ β̃ ∂H_1/∂α̃(y,α̃) − H_1(y,β̃)]`.
pub fn flow_field_residual(hier: &Hierarchy, ab: &ABQuadruple) -> Result<Residual, DerivationError> {
    if hier.operator(1).is_none() {
        return Err(DerivationError::MissingArity(1));
    }
    let m = hier.spec().m;
    let at_x = flow_bracket(hier, &ab.alpha, &ab.beta)?;
    let at_y = flow_bracket(hier, &ab.alpha_t, &ab.beta_t)?;
    let beta0: Vec<Complex64> = (0..m).map(|a| ab.beta.zeroth(a)).collect();
    let beta_t0: Vec<Complex64> = (0..m).map(|b| ab.beta_t.zeroth(b)).collect();
    let first = outer(&at_x, &beta_t0);
    let second = outer(&beta0, &at_y);
    let values = first.iter().zip(&second).map(|(a, b)| a - b).collect();

    // the raw terms entering both brackets
    let pieces = [
        outer(&wirtinger_directional(hier, 1, &(&ab.alpha).into(), &(&ab.beta).into())?, &beta_t0),
        outer(&hier.eval(1, &ab.beta)?, &beta_t0),
        outer(&beta0, &wirtinger_directional(hier, 1, &(&ab.alpha_t).into(), &(&ab.beta_t).into())?),
        outer(&beta0, &hier.eval(1, &ab.beta_t)?),
    ];
    let scale = pieces.iter().map(|p| norm_max(p)).fold(0.0, f64::max);
    Ok(Residual { values, scale })
}
