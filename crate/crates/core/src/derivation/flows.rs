use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DerivationError;
use crate::jetcore::ABQuadruple;
use crate::tensor::Statistics;

/// One-parameter transformations of the αβ-quantities that leave the
/// constrained pair jet unchanged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// `α ↦ sα`, `β̃ ↦ s⁻¹β̃`
    Scale,
    /// `β ↦ sβ`, `α̃ ↦ s⁻¹α̃`
    ScaleSwapped,
    /// `α ↦ α + sβ`, `α̃ ↦ α̃ − s(−1)^f β̃`
    Shift,
    /// `β ↦ β + sα`, `β̃ ↦ β̃ − s(−1)^f α̃`
    ShiftSwapped,
}

impl FlowKind {
    pub const ALL: [FlowKind; 4] = [FlowKind::Scale, FlowKind::ScaleSwapped, FlowKind::Shift, FlowKind::ShiftSwapped];
}

pub fn apply_flow(
    ab: &ABQuadruple,
    kind: FlowKind,
    s: Complex64,
    stats: Statistics,
) -> Result<ABQuadruple, DerivationError> {
    let sign = stats.exchange_sign();
    let mut out = ab.clone();
    match kind {
        FlowKind::Scale | FlowKind::ScaleSwapped => {
            if s.norm_sqr() == 0.0 {
                return Err(DerivationError::ZeroScale);
            }
            if kind == FlowKind::Scale {
                out.alpha = ab.alpha.scaled(s);
                out.beta_t = ab.beta_t.scaled(s.inv());
            } else {
                out.beta = ab.beta.scaled(s);
                out.alpha_t = ab.alpha_t.scaled(s.inv());
            }
        }
        FlowKind::Shift => {
            out.alpha = ab.alpha.add_scaled(s, &ab.beta);
            out.alpha_t = ab.alpha_t.add_scaled(-s * sign, &ab.beta_t);
        }
        FlowKind::ShiftSwapped => {
            out.beta = ab.beta.add_scaled(s, &ab.alpha);
            out.beta_t = ab.beta_t.add_scaled(-s * sign, &ab.alpha_t);
        }
    }
    Ok(out)
}
