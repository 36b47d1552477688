//! Finite-difference time evolution on a periodic grid.
//!
//! States evolve by `∂Ψ/∂t = i H(Ψ)`: a discrete eigenvector of `H` with
//! eigenvalue `ω` picks up the phase `e^{+iωt}`. Derivative entries of
//! operator bodies are realized by centered stencils, one grid dimension
//! per particle.

mod generator;
mod grid;
mod integrate;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::opdsl::{EvalError, Hierarchy};

pub use generator::{apply_generator, StencilTable, Stencils};
pub use grid::{Grid, GridState, Product};
pub use integrate::{evolve, EvolutionMap, Integrator};

/// Local amplitudes below this value are rejected by bodies that divide or
/// take logarithms.
pub const AMPLITUDE_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("grid evolution needs d = 1, hierarchy has d = {0}")]
    Dimension(usize),
    #[error("hierarchy lacks arity {0}")]
    MissingArity(usize),
    #[error("invalid integrator setup: {0}")]
    Integrator(String),
    #[error("step {step}: amplitude {amplitude:e} below floor at grid point {point:?}")]
    AmplitudeFloor { step: usize, point: Vec<usize>, amplitude: f64 },
    #[error("step {step}: at grid point {point:?}: {source}")]
    Domain {
        step: usize,
        point: Vec<usize>,
        #[source]
        source: EvalError,
    },
    #[error("step {step}: linear solve stalled at relative residual {residual:e}")]
    Solver { step: usize, residual: f64 },
}

/// Number of steps of size `dt` reaching `t`.
pub fn step_count(t: f64, dt: f64) -> Result<usize, EvolutionError> {
    if !(t >= 0.0 && dt > 0.0 && t.is_finite()) {
        return Err(EvolutionError::Integrator(format!("need t >= 0 and dt > 0, got t = {t}, dt = {dt}")));
    }
    let steps = (t / dt).round();
    if ((steps * dt) - t).abs() > 1e-9 * t.max(dt) {
        return Err(EvolutionError::Integrator(format!("t = {t} is not a multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}

/// `‖E₂(t)(φ ∘ ψ) − E₁(t)φ ∘ E₁(t)ψ‖ / ‖E₂(t)(φ ∘ ψ)‖` with `∘` the plain
/// or the (anti-)symmetrized product, all evolutions with `emap`'s
/// integrator and step.
pub fn separation_gap_with(
    emap: &EvolutionMap<'_>,
    phi: &GridState,
    psi: &GridState,
    product: Product,
) -> Result<f64, EvolutionError> {
    if phi.particles() != 1 || psi.particles() != 1 {
        return Err(EvolutionError::State("separation gap needs one-particle factors".into()));
    }
    let stats = emap.hierarchy().stats();
    let joint = GridState::product(phi, psi, product, stats)?;
    let (whole, (left, right)) =
        rayon::join(|| emap.evolve(&joint), || rayon::join(|| emap.evolve(phi), || emap.evolve(psi)));
    let whole = whole?;
    let parts = GridState::product(&left?, &right?, product, stats)?;
    Ok(whole.distance(&parts) / whole.norm())
}

/// Separation gap at time `t` with RK4 steps of size `dt`.
pub fn separation_gap(
    hier: &Hierarchy,
    phi: &GridState,
    psi: &GridState,
    t: f64,
    dt: f64,
    product: Product,
) -> Result<f64, EvolutionError> {
    let emap = EvolutionMap::new(hier, Integrator::Rk4, dt, step_count(t, dt)?)?;
    separation_gap_with(&emap, phi, psi, product)
}

/// `1 − σ₁²/Σσ_i²` for the singular values of the coefficient matrix
/// `Ψ(x_i, x_j)` of a scalar two-particle state.
pub fn schmidt_gap(state: &GridState) -> Result<f64, EvolutionError> {
    if state.particles() != 2 || state.internal() != 1 {
        return Err(EvolutionError::State("Schmidt gap needs a scalar two-particle state".into()));
    }
    let n = state.grid().points();
    let matrix = DMatrix::from_row_slice(n, n, state.values());
    let sigma = matrix.singular_values();
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(EvolutionError::State("zero state".into()));
    }
    let top = sigma.iter().fold(0.0_f64, |a, s| a.max(*s));
    Ok((1.0 - top * top / total).max(0.0))
}

/// Observed convergence order from errors at steps `dt`, `dt/2`, `dt/4`:
/// `log₂(|e₁ − e₂| / |e₂ − e₃|)`.
pub fn observed_order(coarse: f64, mid: f64, fine: f64) -> f64 {
    ((coarse - mid).abs() / (mid - fine).abs()).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcore::JetSpec;
    use crate::opdsl::presets::{doebner_goldin, linear_schrodinger};
    use crate::tensor::{ParticleTable, Statistics};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec() -> JetSpec {
        JetSpec::new(1, 2, 1).unwrap()
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(0.01, 1e-4).unwrap(), 100);
        assert!(step_count(0.01, 3e-3).is_err());
    }

    #[test]
    fn schmidt_gap_of_products() {
        let g = Grid::new(Grid::DEFAULT_LENGTH, 16).unwrap();
        let phi = GridState::from_fn(g, 1, |x, _| c(x.sin() + 0.2, x)).unwrap();
        let psi = GridState::from_fn(g, 1, |x, _| c(1.0, x.cos())).unwrap();
        let plain = GridState::product(&phi, &psi, Product::Plain, Statistics::Bose).unwrap();
        assert!(schmidt_gap(&plain).unwrap() < 1e-12);

        // orthonormal modes e^{ix}, e^{2ix}: antisymmetrized weights 1/2, 1/2
        let e1 = GridState::from_fn(g, 1, |x, _| c(0.0, x).exp()).unwrap();
        let e2 = GridState::from_fn(g, 1, |x, _| c(0.0, 2.0 * x).exp()).unwrap();
        let anti = GridState::product(&e1, &e2, Product::Sym, Statistics::Fermi).unwrap();
        assert!((schmidt_gap(&anti).unwrap() - 0.5).abs() < 1e-12);
        assert!(schmidt_gap(&phi).is_err());
    }

    #[test]
    fn linear_gaps_are_small() {
        let g = Grid::new(Grid::DEFAULT_LENGTH, 32).unwrap();
        let h = linear_schrodinger(spec(), Statistics::Bose, 0.5).unwrap();
        let phi = GridState::from_fn(g, 1, |x, _| c(-(x - 0.4).powi(2), x).exp()).unwrap();
        let psi = GridState::from_fn(g, 1, |x, _| c(-(x + 0.7).powi(2), -0.5 * x).exp()).unwrap();
        for product in [Product::Plain, Product::Sym] {
            assert!(separation_gap(&h, &phi, &psi, 0.005, 1e-4, product).unwrap() < 1e-6);
        }
    }

    #[test]
    fn doebner_goldin_gap_plain_versus_sym() {
        let g = Grid::new(Grid::DEFAULT_LENGTH, 32).unwrap();
        let h = doebner_goldin(spec(), Statistics::Bose, 0.3).unwrap();
        let phi = GridState::from_fn(g, 1, |x, _| c(1.0, 0.0) + c(0.0, x).exp() * 0.5).unwrap().normalized();
        let psi = GridState::from_fn(g, 1, |x, _| c(1.0, 0.0) + c(0.0, -x).exp() * 0.5).unwrap().normalized();
        assert!(separation_gap(&h, &phi, &psi, 0.01, 1e-4, Product::Plain).unwrap() < 1e-4);
        assert!(separation_gap(&h, &phi, &psi, 0.01, 1e-4, Product::Sym).unwrap() > 1e-3);
    }

    #[test]
    fn vanishing_states_hit_the_floor_with_step_index() {
        let g = Grid::new(Grid::DEFAULT_LENGTH, 16).unwrap();
        let h = doebner_goldin(spec(), Statistics::Fermi, 0.3).unwrap();
        let phi = GridState::from_fn(g, 1, |x, _| c(1.0, 0.0) + c(0.0, x).exp() * 0.3).unwrap();
        let psi = GridState::from_fn(g, 1, |x, _| c(1.0, 0.0) + c(0.0, -x).exp() * 0.3).unwrap();
        // the antisymmetric product vanishes on the diagonal
        match separation_gap(&h, &phi, &psi, 0.001, 1e-4, Product::Sym) {
            Err(EvolutionError::AmplitudeFloor { step: 0, point, .. }) => assert_eq!(point, vec![0, 0]),
            other => panic!("{other:?}"),
        }
        let t = ParticleTable::new(1, 16, 1, vec![c(0.0, 0.0); 16]).unwrap();
        assert!(GridState::new(g, t).is_err());
    }
}
