use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    apply_flow, block_sym_residual, flow_field_residual, normalized_bracket, plain_residual, random_quadruple,
    sample_seed, sym_residual, ConglomerateSign, DerivationError, FlowKind, ParticleQuadruple,
};
use crate::jetcore::{ABQuadruple, Jet};
use crate::opdsl::Hierarchy;
use crate::tensor::{sym_product_jet, Statistics};

/// Sampling parameters shared by all sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Sweep {
    pub fn new(samples: usize, seed: u64, tolerance: f64) -> Self {
        Self { samples, seed, tolerance }
    }
}

/// The inputs of one sample, complete enough to recompute its residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Plain { sample: usize, alpha: Jet, beta_t: Jet },
    Symmetric { sample: usize, quadruple: ABQuadruple },
    FlowField { sample: usize, quadruple: ABQuadruple },
    FlowInvariance { sample: usize, quadruple: ABQuadruple, flow: FlowKind, s: Complex64 },
    Conglomerate { sample: usize, quadruple: ParticleQuadruple, sign: ConglomerateSign },
    Certificate { sample: usize, alpha: Jet, beta: Jet, k_hat: Complex64 },
}

impl Witness {
    pub fn sample(&self) -> usize {
        match self {
            Witness::Plain { sample, .. }
            | Witness::Symmetric { sample, .. }
            | Witness::FlowField { sample, .. }
            | Witness::FlowInvariance { sample, .. }
            | Witness::Conglomerate { sample, .. }
            | Witness::Certificate { sample, .. } => *sample,
        }
    }

    /// Recomputes the residual this witness was recorded with.
    pub fn replay(&self, hier: &Hierarchy) -> Result<f64, DerivationError> {
        match self {
            Witness::Plain { alpha, beta_t, .. } => Ok(plain_residual(hier, hier, hier, alpha, beta_t)?.normalized()),
            Witness::Symmetric { quadruple, .. } => Ok(sym_residual(hier, quadruple)?.normalized()),
            Witness::FlowField { quadruple, .. } => Ok(flow_field_residual(hier, quadruple)?.normalized()),
            Witness::FlowInvariance { quadruple, flow, s, .. } => {
                flow_invariance_error(quadruple, *flow, *s, hier.stats())
            }
            Witness::Conglomerate { quadruple, sign, .. } => {
                Ok(block_sym_residual(hier, quadruple, *sign)?.normalized())
            }
            Witness::Certificate { alpha, beta, k_hat, .. } => Ok(normalized_bracket(hier, alpha, beta)?
                .into_iter()
                .flatten()
                .map(|v| (v - k_hat).norm())
                .fold(0.0, f64::max)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub check: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Number of samples whose residual is at or above the tolerance.
    pub exceed_count: usize,
    /// The sample attaining `max_residual`.
    pub witness: Witness,
}

fn reduce(
    check: &str,
    sweep: &Sweep,
    per_sample: impl Fn(usize, u64) -> Result<(f64, Witness), DerivationError> + Sync,
) -> Result<ResidualReport, DerivationError> {
    if sweep.samples == 0 {
        return Err(DerivationError::TooFewSamples { needed: 1, got: 0 });
    }
    let results: Vec<(f64, Witness)> = (0..sweep.samples)
        .into_par_iter()
        .map(|i| per_sample(i, sample_seed(sweep.seed, i as u64)))
        .collect::<Result<_, _>>()?;
    let exceed_count = results.iter().filter(|(r, _)| r.is_nan() || *r >= sweep.tolerance).count();
    let mut best = 0;
    for (i, (r, _)) in results.iter().enumerate() {
        if *r > results[best].0 || r.is_nan() {
            best = i;
        }
    }
    let (max_residual, witness) = results.into_iter().nth(best).expect("nonempty");
    Ok(ResidualReport {
        check: check.to_string(),
        samples: sweep.samples,
        max_residual,
        tolerance: sweep.tolerance,
        pass: exceed_count == 0,
        exceed_count,
        witness,
    })
}

fn attach(sample: usize, witness: &Witness, err: DerivationError) -> DerivationError {
    match err {
        DerivationError::Operator(source) => {
            DerivationError::Eval { sample, witness: Box::new(witness.clone()), source }
        }
        other => other,
    }
}

fn with_witness(sample: usize, witness: Witness, hier: &Hierarchy) -> Result<(f64, Witness), DerivationError> {
    match witness.replay(hier) {
        Ok(r) => Ok((r, witness)),
        Err(e) => Err(attach(sample, &witness, e)),
    }
}

fn ab_sample(hier: &Hierarchy, seed: u64) -> ABQuadruple {
    random_quadruple(hier.spec(), 1, seed, 1.0).to_ab().expect("one particle")
}

/// Plain derivation residual with the hierarchy's own `H_1` on both
/// factors and its `H_2` as joint operator.
pub fn plain_sweep(hier: &Hierarchy, sweep: &Sweep) -> Result<ResidualReport, DerivationError> {
    reduce("plain-derivation", sweep, |i, seed| {
        let q = ab_sample(hier, seed);
        with_witness(i, Witness::Plain { sample: i, alpha: q.alpha, beta_t: q.beta_t }, hier)
    })
}

pub fn sym_sweep(hier: &Hierarchy, sweep: &Sweep) -> Result<ResidualReport, DerivationError> {
    reduce("sym-derivation", sweep, |i, seed| {
        with_witness(i, Witness::Symmetric { sample: i, quadruple: ab_sample(hier, seed) }, hier)
    })
}

pub fn flow_field_sweep(hier: &Hierarchy, sweep: &Sweep) -> Result<ResidualReport, DerivationError> {
    reduce("flow-field", sweep, |i, seed| {
        with_witness(i, Witness::FlowField { sample: i, quadruple: ab_sample(hier, seed) }, hier)
    })
}

fn flow_invariance_error(
    ab: &ABQuadruple,
    flow: FlowKind,
    s: Complex64,
    stats: Statistics,
) -> Result<f64, DerivationError> {
    let before = sym_product_jet(ab, stats);
    let after = sym_product_jet(&apply_flow(ab, flow, s, stats)?, stats);
    let scale = before.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let diff = before.values().iter().zip(after.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

/// Relative change of the constrained pair jet under a random flow with a
/// random complex parameter `s`, `|s| ≤ 2`.
pub fn flow_invariance_sweep(hier: &Hierarchy, sweep: &Sweep) -> Result<ResidualReport, DerivationError> {
    reduce("flow-invariance", sweep, |i, seed| {
        let quadruple = ab_sample(hier, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66);
        let flow = FlowKind::ALL[rng.random_range(0..FlowKind::ALL.len())];
        let mut s = Complex64::new(0.0, 0.0);
        while s.norm() < 0.1 || s.norm() > 2.0 {
            s = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        }
        with_witness(i, Witness::FlowInvariance { sample: i, quadruple, flow, s }, hier)
    })
}

/// Separability residual for pairs of `N`-particle conglomerates. At
/// `N = 1` the samples and residuals coincide with [`sym_sweep`].
pub fn conglomerate_reduce(
    hier: &Hierarchy,
    particles: usize,
    sweep: &Sweep,
    sign: ConglomerateSign,
) -> Result<ResidualReport, DerivationError> {
    for arity in [particles, 2 * particles] {
        if hier.operator(arity).is_none() {
            return Err(DerivationError::MissingArity(arity));
        }
    }
    reduce("conglomerate", sweep, |i, seed| {
        let quadruple = random_quadruple(hier.spec(), particles, seed, 1.0);
        with_witness(i, Witness::Conglomerate { sample: i, quadruple, sign }, hier)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcore::JetSpec;
    use crate::opdsl::presets::{cubic_nls, doebner_goldin, linear_schrodinger};

    fn spec() -> JetSpec {
        JetSpec::new(1, 2, 1).unwrap()
    }

    #[test]
    fn linear_preset_passes_every_sweep() {
        for stats in [Statistics::Bose, Statistics::Fermi] {
            let h = linear_schrodinger(spec(), stats, 0.5).unwrap();
            let sw = Sweep::new(40, 11, 1e-8);
            assert!(plain_sweep(&h, &sw).unwrap().pass);
            assert!(sym_sweep(&h, &sw).unwrap().pass);
            assert!(flow_field_sweep(&h, &sw).unwrap().pass);
            assert!(flow_invariance_sweep(&h, &Sweep::new(40, 11, 1e-12)).unwrap().pass);
            assert!(conglomerate_reduce(&h, 2, &Sweep::new(10, 11, 1e-9), ConglomerateSign::Parity).unwrap().pass);
        }
    }

    #[test]
    fn doebner_goldin_fails_sym_but_passes_plain() {
        let h = doebner_goldin(spec(), Statistics::Bose, 0.3).unwrap();
        assert!(plain_sweep(&h, &Sweep::new(100, 1, 1e-10)).unwrap().pass);
        let sym = sym_sweep(&h, &Sweep::new(100, 1, 1e-3)).unwrap();
        assert!(sym.exceed_count >= 95, "{}", sym.exceed_count);
        let cong = conglomerate_reduce(&h, 2, &Sweep::new(20, 1, 1e-3), ConglomerateSign::Bosonic).unwrap();
        assert!(cong.exceed_count >= 18, "{}", cong.exceed_count);
    }

    #[test]
    fn conglomerate_at_one_particle_is_the_sym_sweep() {
        for stats in [Statistics::Bose, Statistics::Fermi] {
            let h = cubic_nls(spec(), stats, 1.0).unwrap();
            let sw = Sweep::new(20, 5, 1e-3);
            let a = sym_sweep(&h, &sw).unwrap();
            let b = conglomerate_reduce(&h, 1, &sw, ConglomerateSign::Parity).unwrap();
            assert_eq!(a.max_residual.to_bits(), b.max_residual.to_bits());
            assert_eq!(a.exceed_count, b.exceed_count);
            assert_eq!(a.witness.sample(), b.witness.sample());
        }
    }

    #[test]
    fn witnesses_replay_and_round_trip() {
        let h = doebner_goldin(spec(), Statistics::Fermi, 0.3).unwrap();
        let sw = Sweep::new(12, 3, 1e-3);
        let reports = [
            plain_sweep(&h, &sw).unwrap(),
            sym_sweep(&h, &sw).unwrap(),
            flow_field_sweep(&h, &sw).unwrap(),
            flow_invariance_sweep(&h, &sw).unwrap(),
            conglomerate_reduce(&h, 2, &Sweep::new(3, 3, 1e-3), ConglomerateSign::Parity).unwrap(),
        ];
        for r in reports {
            let json = serde_json::to_string(&r).unwrap();
            let back: ResidualReport = serde_json::from_str(&json).unwrap();
            assert_eq!(back, r);
            let replayed = back.witness.replay(&h).unwrap();
            assert!((replayed - r.max_residual).abs() <= 1e-12, "{}", r.check);
        }
    }

    #[test]
    fn sweeps_are_deterministic() {
        let h = cubic_nls(spec(), Statistics::Bose, 1.0).unwrap();
        let sw = Sweep::new(30, 8, 1e-3);
        assert_eq!(sym_sweep(&h, &sw).unwrap(), sym_sweep(&h, &sw).unwrap());
    }

    #[test]
    fn domain_errors_carry_the_witness() {
        let h = Hierarchy::from_doc(&crate::opdsl::HierarchyDoc {
            f: 0,
            d: 1,
            k: 0,
            m: 1,
            operators: [
                ("1".to_string(), vec!["1 / (u[0]((0)) - u[0]((0)))".to_string()]),
                ("2".to_string(), vec!["u[0,0]((0);(0))".to_string()]),
            ]
            .into_iter()
            .collect(),
        })
        .unwrap();
        match plain_sweep(&h, &Sweep::new(4, 0, 1e-8)) {
            Err(DerivationError::Eval { witness, .. }) => assert!(matches!(*witness, Witness::Plain { .. })),
            other => panic!("{other:?}"),
        }
    }
}
