use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{flow_bracket, random_quadruple, sample_seed, DerivationError, Witness};
use crate::jetcore::Jet;
use crate::opdsl::Hierarchy;

/// Zeroth-order entries below this magnitude are treated as non-generic.
pub const GENERICITY_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "linear-consistent")]
    LinearConsistent,
    #[serde(rename = "nonlinear")]
    Nonlinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearityCertificate {
    pub k_hat: Complex64,
    pub max_dev: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// The sample with the largest deviation from `k_hat`.
    pub witness: Witness,
}

/// `b^A / β_0^A` per output component, where
/// `b = Σ_{C,I} β^C_I ∂H_1/∂α^C_I(α) − H_1(β)`.
///
/// Components whose `β_0^A` lies below the genericity floor are `None`.
pub fn normalized_bracket(
    hier: &Hierarchy,
    alpha: &Jet,
    beta: &Jet,
) -> Result<Vec<Option<Complex64>>, DerivationError> {
    let b = flow_bracket(hier, alpha, beta)?;
    Ok(b.iter()
        .enumerate()
        .map(|(a, v)| {
            let b0 = beta.zeroth(a);
            (b0.norm() >= GENERICITY_FLOOR).then(|| v / b0)
        })
        .collect())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Samples generic `(α, β)` pairs and tests whether the normalized bracket
/// is one constant `k` across samples and components.
pub fn linearity_certificate(
    hier: &Hierarchy,
    sample_count: usize,
    seed: u64,
    tolerance: f64,
) -> Result<LinearityCertificate, DerivationError> {
    if sample_count < 2 {
        return Err(DerivationError::TooFewSamples { needed: 2, got: sample_count });
    }
    if hier.operator(1).is_none() {
        return Err(DerivationError::MissingArity(1));
    }
    let spec = *hier.spec();
    let per_sample: Vec<(Jet, Jet, Vec<Option<Complex64>>)> = (0..sample_count)
        .into_par_iter()
        .map(|i| {
            let q = random_quadruple(&spec, 1, sample_seed(seed, i as u64), 1.0);
            let alpha = q.alpha.to_jet().expect("one particle");
            let beta = q.beta.to_jet().expect("one particle");
            match normalized_bracket(hier, &alpha, &beta) {
                Ok(values) => Ok((alpha, beta, values)),
                Err(DerivationError::Operator(source)) => Err(DerivationError::Eval {
                    sample: i,
                    witness: Box::new(Witness::Certificate { sample: i, alpha, beta, k_hat: Complex64::new(0.0, 0.0) }),
                    source,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;

    let all: Vec<Complex64> = per_sample.iter().flat_map(|(_, _, v)| v.iter().flatten().copied()).collect();
    if all.is_empty() {
        return Err(DerivationError::Degenerate);
    }
    let mut re: Vec<f64> = all.iter().map(|v| v.re).collect();
    let mut im: Vec<f64> = all.iter().map(|v| v.im).collect();
    let k_hat = Complex64::new(median(&mut re), median(&mut im));

    let mut worst = (0, -1.0);
    for (i, (_, _, values)) in per_sample.iter().enumerate() {
        let dev = values.iter().flatten().map(|v| (v - k_hat).norm()).fold(0.0, f64::max);
        if dev > worst.1 {
            worst = (i, dev);
        }
    }
    let (index, max_dev) = worst;
    let max_dev = max_dev.max(0.0);
    let (alpha, beta, _) = per_sample.into_iter().nth(index).expect("sample exists");
    Ok(LinearityCertificate {
        k_hat,
        max_dev,
        samples: sample_count,
        tolerance,
        verdict: if max_dev < tolerance { Verdict::LinearConsistent } else { Verdict::Nonlinear },
        witness: Witness::Certificate { sample: index, alpha, beta, k_hat },
    })
}
