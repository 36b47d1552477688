use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::{grid_tuple, internal_tuples};
use super::{EvolutionError, GridState, AMPLITUDE_FLOOR};
use crate::jetcore::MultiIndex;
use crate::opdsl::{CompiledOperator, Hierarchy, JetTable, JetVar};

/// Centered periodic difference stencils, as `(offset, weight)` pairs.
/// Order 1 is `[−1, 0, 1]/2h`, order 2 is `[1, −2, 1]/h²`; higher orders
/// are composed as `D1^{k mod 2} D2^{⌊k/2⌋}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencils {
    by_order: Vec<Vec<(isize, f64)>>,
}

fn compose(a: &[(isize, f64)], b: &[(isize, f64)]) -> Vec<(isize, f64)> {
    let mut out: Vec<(isize, f64)> = Vec::new();
    for &(oa, wa) in a {
        for &(ob, wb) in b {
            match out.iter_mut().find(|(o, _)| *o == oa + ob) {
                Some(slot) => slot.1 += wa * wb,
                None => out.push((oa + ob, wa * wb)),
            }
        }
    }
    out.retain(|(_, w)| *w != 0.0);
    out.sort_by_key(|(o, _)| *o);
    out
}

impl Stencils {
    pub fn new(spacing: f64, max_order: u32) -> Self {
        let d1 = vec![(-1, -0.5 / spacing), (1, 0.5 / spacing)];
        let h2 = spacing * spacing;
        let d2 = vec![(-1, 1.0 / h2), (0, -2.0 / h2), (1, 1.0 / h2)];
        let mut by_order = vec![vec![(0, 1.0)]];
        for k in 1..=max_order {
            let next = if k % 2 == 1 {
                compose(&by_order[k as usize - 1], &d1)
            } else {
                compose(&by_order[k as usize - 2], &d2)
            };
            by_order.push(next);
        }
        Self { by_order }
    }

    pub fn order(&self, k: u32) -> &[(isize, f64)] {
        &self.by_order[k as usize]
    }
}

/// Jet table at one grid tuple: derivative entries realized by stencils.
pub struct StencilTable<'a> {
    state: &'a GridState,
    stencils: &'a Stencils,
    point: Vec<usize>,
}

impl<'a> StencilTable<'a> {
    pub fn new(state: &'a GridState, stencils: &'a Stencils, point: Vec<usize>) -> Self {
        Self { state, stencils, point }
    }
}

impl JetTable for StencilTable<'_> {
    fn arity(&self) -> usize {
        self.state.particles()
    }

    fn entry(&self, internal: &[usize], derivs: &[MultiIndex]) -> Option<Complex64> {
        let p = self.arity();
        if internal.len() != p || derivs.len() != p || derivs.iter().any(|d| d.dim() != 1) {
            return None;
        }
        if internal.iter().any(|&a| a >= self.state.internal()) {
            return None;
        }
        let stencils: Vec<&[(isize, f64)]> = derivs
            .iter()
            .map(|d| self.stencils.by_order.get(d.order() as usize).map(|s| s.as_slice()))
            .collect::<Option<_>>()?;
        let n = self.state.grid().points() as isize;
        let table = self.state.table();
        let mut cursor = vec![0usize; p];
        let mut xs = vec![0usize; p];
        let mut sum = Complex64::new(0.0, 0.0);
        loop {
            let mut weight = 1.0;
            for k in 0..p {
                let (offset, w) = stencils[k][cursor[k]];
                weight *= w;
                xs[k] = (self.point[k] as isize + offset).rem_euclid(n) as usize;
            }
            sum += table.get(&xs, internal) * weight;
            // odometer over the stencil product
            let mut k = p;
            loop {
                if k == 0 {
                    return Some(sum);
                }
                k -= 1;
                cursor[k] += 1;
                if cursor[k] < stencils[k].len() {
                    break;
                }
                cursor[k] = 0;
            }
        }
    }

    fn coordinate(&self, particle: usize, component: usize) -> Option<f64> {
        if component != 0 {
            return None;
        }
        self.point.get(particle).map(|&i| self.state.grid().coordinate(i))
    }
}

/// `H_p(Ψ)` at every grid tuple of a `p`-particle state.
pub fn apply_generator(hier: &Hierarchy, state: &GridState) -> Result<GridState, EvolutionError> {
    apply_generator_at_step(hier, state, 0)
}

/// A jet variable realized as a weighted sum of table entries.
struct VarStencil {
    /// Contribution of the internal indices to the flat table position.
    internal_offset: usize,
    /// Per term: `p` grid offsets followed by the weight.
    terms: Vec<(Vec<isize>, f64)>,
}

impl VarStencil {
    fn new(var: &JetVar, stencils: &Stencils, slot_stride: &[usize]) -> Option<Self> {
        let p = slot_stride.len();
        let internal_offset = var.internal.iter().zip(slot_stride).map(|(a, s)| a * s).sum();
        let mut terms = vec![(Vec::with_capacity(p), 1.0)];
        for d in &var.derivs {
            let stencil = stencils.by_order.get(d.order() as usize)?;
            terms = terms
                .into_iter()
                .flat_map(|(offsets, w)| {
                    stencil.iter().map(move |&(o, sw)| {
                        let mut next = offsets.clone();
                        next.push(o);
                        (next, w * sw)
                    })
                })
                .collect();
        }
        Some(Self { internal_offset, terms })
    }
}

pub(crate) fn apply_generator_at_step(
    hier: &Hierarchy,
    state: &GridState,
    step: usize,
) -> Result<GridState, EvolutionError> {
    let p = state.particles();
    let spec = hier.spec();
    if spec.d != 1 {
        return Err(EvolutionError::Dimension(spec.d));
    }
    if spec.m != state.internal() {
        return Err(EvolutionError::State(format!(
            "state has internal dimension {}, hierarchy expects {}",
            state.internal(),
            spec.m
        )));
    }
    let bodies = hier.operator(p).ok_or(EvolutionError::MissingArity(p))?;
    let restricted = hier.is_domain_restricted(p);
    let stencils = Stencils::new(state.grid().spacing(), spec.order);
    let n = state.grid().points();
    let m = state.internal();
    let radix = n * m;
    // flat position = Σ_k (x_k·m + A_k)·radix^{p-1-k}
    let slot_stride: Vec<usize> = (0..p).map(|k| radix.pow((p - 1 - k) as u32)).collect();
    let program = CompiledOperator::new(bodies);
    let var_stencils: Vec<VarStencil> = program
        .vars()
        .iter()
        .map(|v| VarStencil::new(v, &stencils, &slot_stride).expect("validated derivative order"))
        .collect();
    let internal_offsets: Vec<usize> =
        internal_tuples(m, p).map(|a| a.iter().zip(&slot_stride).map(|(a, s)| a * s).sum()).collect();
    let values = state.values();
    let grid = state.grid();
    let outputs = program.outputs();

    let mut buffer = vec![Complex64::new(0.0, 0.0); n.pow(p as u32) * outputs];
    let status: Vec<Result<(), EvolutionError>> = buffer
        .par_chunks_mut(outputs)
        .enumerate()
        .map_init(
            || (Vec::new(), vec![Complex64::new(0.0, 0.0); var_stencils.len()]),
            |(stack, bound), (point, out)| {
                let xs = grid_tuple(point, n, p);
                let base: usize = xs.iter().zip(&slot_stride).map(|(x, s)| x * m * s).sum();
                if restricted {
                    let amp = internal_offsets.iter().map(|o| values[base + o].norm_sqr()).sum::<f64>().sqrt();
                    if amp < AMPLITUDE_FLOOR {
                        return Err(EvolutionError::AmplitudeFloor { step, point: xs, amplitude: amp });
                    }
                }
                for (slot, vs) in bound.iter_mut().zip(&var_stencils) {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for (offsets, w) in &vs.terms {
                        let mut pos = vs.internal_offset;
                        for k in 0..p {
                            let x = (xs[k] as isize + offsets[k]).rem_euclid(n as isize) as usize;
                            pos += x * m * slot_stride[k];
                        }
                        sum += values[pos] * w;
                    }
                    *slot = sum;
                }
                if program.eval_into(bound, |particle, _| grid.coordinate(xs[particle]), stack, out) {
                    return Ok(());
                }
                // locate the failure with the tree evaluator
                let table = StencilTable::new(state, &stencils, xs.clone());
                match hier.eval(p, &table) {
                    Err(source) => Err(EvolutionError::Domain { step, point: xs, source }),
                    Ok(_) => unreachable!("compiled and tree evaluation disagree"),
                }
            },
        )
        .collect();
    // the first failing point in grid order, independent of scheduling
    status.into_iter().collect::<Result<(), _>>()?;
    let mut next = vec![Complex64::new(0.0, 0.0); values.len()];
    for (point, out) in buffer.chunks(outputs).enumerate() {
        let base: usize = grid_tuple(point, n, p).iter().zip(&slot_stride).map(|(x, s)| x * m * s).sum();
        for (o, v) in internal_offsets.iter().zip(out) {
            next[base + o] = *v;
        }
    }
    Ok(state.with_values(next))
}
