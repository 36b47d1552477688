//! Pointwise nonlinear gauge transformations `N: R e^{iS} ↦ R e^{i(λS + γ ln R)}`
//! and the tensor product they deform, `φ ⊗_N ψ = N(N⁻¹φ ⊗̂ N⁻¹ψ)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{step_count, EvolutionError, EvolutionMap, GridState, Integrator, Product, AMPLITUDE_FLOOR};
use crate::opdsl::Hierarchy;
use crate::tensor::Statistics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("lambda must be a nonzero finite number, got {0}")]
    Lambda(f64),
    #[error("gauge transformations act on scalar states (m = 1), got m = {0}")]
    NotScalar(usize),
    #[error("amplitude {amplitude:e} below floor at grid point {point:?}")]
    Amplitude { point: Vec<usize>, amplitude: f64 },
    #[error("intermediate product vanishes at grid point {point:?} (amplitude {amplitude:e})")]
    IntermediateZero { point: Vec<usize>, amplitude: f64 },
    #[error("phase unwrapping is ambiguous at grid point {point:?}: jump {jump:.3} exceeds pi/2")]
    PhaseUnwrap { point: Vec<usize>, jump: f64 },
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeParams {
    gamma: f64,
    lambda: f64,
}

impl GaugeParams {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self, GaugeError> {
        if !(lambda.is_finite() && lambda != 0.0) || !gamma.is_finite() {
            return Err(GaugeError::Lambda(lambda));
        }
        Ok(Self { gamma, lambda })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Phase map on `(S, R)`.
    fn phase(&self, s: f64, r: f64, direction: Direction) -> f64 {
        match direction {
            Direction::Forward => self.lambda * s + self.gamma * r.ln(),
            Direction::Inverse => (s - self.gamma * r.ln()) / self.lambda,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Inverse,
}

fn grid_point(state: &GridState, flat: usize) -> Vec<usize> {
    state.table().digits(flat)
}

/// Phase along the flattened grid with `2π` jumps removed; rejects states
/// whose unwrapped phase jumps by more than `π/2` between neighbours in any
/// slot, wrapping periodically (this includes any nonzero winding).
fn unwrapped_phase(state: &GridState) -> Result<Vec<f64>, GaugeError> {
    let values = state.values();
    let mut phase = Vec::with_capacity(values.len());
    let mut prev = 0.0;
    for (k, v) in values.iter().enumerate() {
        let mut s = v.arg();
        if k > 0 {
            s += TAU * ((prev - s) / TAU).round();
        }
        phase.push(s);
        prev = s;
    }
    let n = state.grid().points();
    let p = state.particles();
    for flat in 0..values.len() {
        let point = grid_point(state, flat);
        for k in 0..p {
            let mut next = point.clone();
            next[k] = (point[k] + 1) % n;
            let other = state.table().position(&next, &vec![0; p]);
            let jump = (phase[other] - phase[flat]).abs();
            if jump > 0.5 * PI {
                return Err(GaugeError::PhaseUnwrap { point, jump });
            }
        }
    }
    Ok(phase)
}

/// `N` (forward) or `N⁻¹` (inverse) applied pointwise to a scalar state
/// that is nowhere below the amplitude floor.
pub fn apply_gauge(params: &GaugeParams, state: &GridState, direction: Direction) -> Result<GridState, GaugeError> {
    if state.internal() != 1 {
        return Err(GaugeError::NotScalar(state.internal()));
    }
    if let Some(flat) = state.values().iter().position(|v| v.norm() < AMPLITUDE_FLOOR) {
        return Err(GaugeError::Amplitude { point: grid_point(state, flat), amplitude: state.values()[flat].norm() });
    }
    // at λ = 1 the map multiplies by e^{±iγ ln R} and no branch choice enters
    let phase =
        if params.lambda == 1.0 { state.values().iter().map(|v| v.arg()).collect() } else { unwrapped_phase(state)? };
    let values = state
        .values()
        .iter()
        .zip(phase)
        .map(|(v, s)| {
            let r = v.norm();
            Complex64::from_polar(r, params.phase(s, r, direction))
        })
        .collect();
    Ok(state.with_values(values))
}

/// `N(N⁻¹φ ⊗̂ N⁻¹ψ)`.
pub fn deformed_tensor(
    params: &GaugeParams,
    phi: &GridState,
    psi: &GridState,
    stats: Statistics,
) -> Result<GridState, GaugeError> {
    let phi0 = apply_gauge(params, phi, Direction::Inverse)?;
    let psi0 = apply_gauge(params, psi, Direction::Inverse)?;
    let joint = GridState::product(&phi0, &psi0, Product::Sym, stats)?;
    apply_gauge(params, &joint, Direction::Forward).map_err(|e| match e {
        GaugeError::Amplitude { point, amplitude } => GaugeError::IntermediateZero { point, amplitude },
        other => other,
    })
}

/// The conjugated evolution `N ∘ E ∘ N⁻¹`.
pub fn gauged_evolve(
    params: &GaugeParams,
    emap: &EvolutionMap<'_>,
    state: &GridState,
) -> Result<GridState, GaugeError> {
    let inner = apply_gauge(params, state, Direction::Inverse)?;
    apply_gauge(params, &emap.evolve(&inner)?, Direction::Forward)
}

/// `H′(Ψ) = (1/i) d/dt N(E(t) N⁻¹Ψ)` at `t = 0`, by a central difference
/// over one RK4 step of `±dt`.
pub fn deformed_generator(
    params: &GaugeParams,
    hier: &Hierarchy,
    state: &GridState,
    dt: f64,
) -> Result<GridState, GaugeError> {
    let emap = EvolutionMap::new(hier, Integrator::Rk4, dt, 1)?;
    let plus = gauged_evolve(params, &emap, state)?;
    let minus = gauged_evolve(params, &emap.reversed(), state)?;
    let scale = Complex64::new(0.0, -1.0 / (2.0 * dt));
    let values = plus.values().iter().zip(minus.values()).map(|(a, b)| (a - b) * scale).collect();
    Ok(state.with_values(values))
}

fn relative_gap(whole: &GridState, parts: &GridState) -> f64 {
    whole.distance(parts) / whole.norm()
}

/// Gap of the gauged hierarchy against the deformed product:
/// `‖E′₂(t)(φ ⊗_N ψ) − E′₁(t)φ ⊗_N E′₁(t)ψ‖ / ‖E′₂(t)(φ ⊗_N ψ)‖`,
/// `E′ = N E N⁻¹`, RK4 with step `dt`.
pub fn deformed_separation_gap(
    params: &GaugeParams,
    hier: &Hierarchy,
    phi: &GridState,
    psi: &GridState,
    t: f64,
    dt: f64,
) -> Result<f64, GaugeError> {
    let emap = EvolutionMap::new(hier, Integrator::Rk4, dt, step_count(t, dt)?)?;
    let stats = hier.stats();
    let joint = deformed_tensor(params, phi, psi, stats)?;
    let (whole, (left, right)) = rayon::join(
        || gauged_evolve(params, &emap, &joint),
        || rayon::join(|| gauged_evolve(params, &emap, phi), || gauged_evolve(params, &emap, psi)),
    );
    let whole = whole?;
    let parts = deformed_tensor(params, &left?, &right?, stats)?;
    Ok(relative_gap(&whole, &parts))
}

/// Gap of the gauged hierarchy against the undeformed `⊗̂`.
pub fn undeformed_separation_gap(
    params: &GaugeParams,
    hier: &Hierarchy,
    phi: &GridState,
    psi: &GridState,
    t: f64,
    dt: f64,
) -> Result<f64, GaugeError> {
    let emap = EvolutionMap::new(hier, Integrator::Rk4, dt, step_count(t, dt)?)?;
    let stats = hier.stats();
    let joint = GridState::product(phi, psi, Product::Sym, stats)?;
    let (whole, (left, right)) = rayon::join(
        || gauged_evolve(params, &emap, &joint),
        || rayon::join(|| gauged_evolve(params, &emap, phi), || gauged_evolve(params, &emap, psi)),
    );
    let whole = whole?;
    let parts = GridState::product(&left?, &right?, Product::Sym, stats)?;
    Ok(relative_gap(&whole, &parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{apply_generator, separation_gap, Grid};
    use crate::jetcore::JetSpec;
    use crate::opdsl::presets::linear_schrodinger;
    use crate::tensor::sym_tensor;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize) -> Grid {
        Grid::new(Grid::DEFAULT_LENGTH, n).unwrap()
    }

    fn wave(g: Grid, a: f64, k: f64) -> GridState {
        GridState::from_fn(g, 1, |x, _| c(1.0, 0.0) + c(0.0, k * x).exp() * a).unwrap().normalized()
    }

    /// Nowhere-vanishing state with a smooth, winding-free random phase.
    fn random_state(g: Grid, seed: u64) -> GridState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, p, q): (f64, f64, f64, f64) =
            (rng.random_range(0.2..0.5), rng.random_range(-1.0..1.0), rng.random(), rng.random_range(-0.8..0.8));
        GridState::from_fn(g, 1, |x, _| c(1.0 + a * (x + 6.0 * p).cos(), b * x.sin() + q * (2.0 * x).cos()).exp())
            .unwrap()
    }

    fn max_rel(a: &GridState, b: &GridState) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm() / y.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn trivial_parameters_are_the_identity() {
        let s = random_state(grid(16), 1);
        let id = GaugeParams::new(0.0, 1.0).unwrap();
        for d in [Direction::Forward, Direction::Inverse] {
            assert!(max_rel(&apply_gauge(&id, &s, d).unwrap(), &s) < 1e-15);
        }
        assert_eq!(GaugeParams::new(0.3, 0.0), Err(GaugeError::Lambda(0.0)));
    }

    #[test]
    fn inverse_undoes_forward_and_keeps_the_modulus() {
        for seed in 0..20 {
            let s = random_state(grid(32), seed);
            for (gamma, lambda) in [(0.3, 1.0), (-0.7, 1.0), (0.3, 1.7), (0.5, -0.6)] {
                let params = GaugeParams::new(gamma, lambda).unwrap();
                let f = apply_gauge(&params, &s, Direction::Forward).unwrap();
                for (x, y) in f.values().iter().zip(s.values()) {
                    assert!((x.norm() - y.norm()).abs() <= 4.0 * f64::EPSILON * y.norm());
                }
                let back = apply_gauge(&params, &f, Direction::Inverse).unwrap();
                assert!(max_rel(&back, &s) < 1e-10, "{gamma} {lambda}");
            }
        }
    }

    #[test]
    fn group_property_in_gamma() {
        let s = random_state(grid(16), 4);
        let n =
            |g: f64, st: &GridState| apply_gauge(&GaugeParams::new(g, 1.0).unwrap(), st, Direction::Forward).unwrap();
        assert!(max_rel(&n(0.2, &n(0.5, &s)), &n(0.7, &s)) < 1e-10);
    }

    #[test]
    fn winding_and_zeros_are_rejected() {
        let g = grid(16);
        let winding = GridState::from_fn(g, 1, |x, _| c(0.0, x).exp()).unwrap();
        let params = GaugeParams::new(0.3, 2.0).unwrap();
        assert!(matches!(apply_gauge(&params, &winding, Direction::Forward), Err(GaugeError::PhaseUnwrap { .. })));
        // λ = 1 has no branch choice
        assert!(apply_gauge(&GaugeParams::new(0.3, 1.0).unwrap(), &winding, Direction::Forward).is_ok());
        let zero = GridState::from_fn(g, 1, |x, _| c(x.sin(), 0.0)).unwrap();
        match apply_gauge(&params, &zero, Direction::Forward) {
            Err(GaugeError::Amplitude { point, .. }) => assert_eq!(point, vec![0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deformed_tensor_contract() {
        let g = grid(16);
        let (phi, psi) = (random_state(g, 7), random_state(g, 8));
        let id = GaugeParams::new(0.0, 1.0).unwrap();
        let plain = sym_tensor(phi.table(), psi.table(), Statistics::Bose).unwrap();
        assert!(
            max_rel(&deformed_tensor(&id, &phi, &psi, Statistics::Bose).unwrap(), &GridState::new(g, plain).unwrap())
                < 1e-14
        );

        for (gamma, lambda) in [(0.3, 1.0), (0.3, 1.5)] {
            let params = GaugeParams::new(gamma, lambda).unwrap();
            let deformed = deformed_tensor(&params, &phi, &psi, Statistics::Bose).unwrap();
            let inner = GridState::product(
                &apply_gauge(&params, &phi, Direction::Inverse).unwrap(),
                &apply_gauge(&params, &psi, Direction::Inverse).unwrap(),
                Product::Sym,
                Statistics::Bose,
            )
            .unwrap();
            for (x, y) in deformed.values().iter().zip(inner.values()) {
                assert!((x.norm() - y.norm()).abs() <= 1e-14 * y.norm());
            }
            let back = apply_gauge(&params, &deformed, Direction::Inverse).unwrap();
            assert!(max_rel(&back, &inner) < 1e-10);
        }
    }

    #[test]
    fn vanishing_intermediate_is_reported() {
        let g = grid(16);
        let (phi, psi) = (wave(g, 0.3, 1.0), wave(g, 0.3, -1.0));
        let params = GaugeParams::new(0.3, 1.0).unwrap();
        match deformed_tensor(&params, &phi, &psi, Statistics::Fermi) {
            Err(GaugeError::IntermediateZero { point, .. }) => assert_eq!(point, vec![0, 0]),
            other => panic!("{other:?}"),
        }
    }

    fn linear() -> Hierarchy {
        linear_schrodinger(JetSpec::new(1, 2, 1).unwrap(), Statistics::Bose, 0.5).unwrap()
    }

    #[test]
    fn identity_gauge_generator_is_the_hamiltonian() {
        let g = grid(32);
        let s = random_state(g, 3);
        let h = linear();
        let direct = apply_generator(&h, &s).unwrap();
        let id = GaugeParams::new(0.0, 1.0).unwrap();
        let errs: Vec<f64> = [1e-3, 5e-4]
            .iter()
            .map(|dt| deformed_generator(&id, &h, &s, *dt).unwrap().distance(&direct) / direct.norm())
            .collect();
        assert!(errs[0] < 1e-4);
        // O(dt²): halving dt divides the error by about four
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
    }

    /// `H′(Ψ) = (1/i) dN_Φ(i H(Φ))`, `Φ = N⁻¹Ψ`, with the differential of
    /// `N` written out in polar variables.
    fn chain_rule_generator(params: &GaugeParams, h: &Hierarchy, s: &GridState) -> GridState {
        let phi = apply_gauge(params, s, Direction::Inverse).unwrap();
        let hphi = apply_generator(h, &phi).unwrap();
        let values = phi
            .values()
            .iter()
            .zip(hphi.values())
            .map(|(f, hf)| {
                let v = Complex64::i() * hf;
                let r = f.norm();
                let dr = (f.conj() * v).re / r;
                let ds = (f.conj() * v).im / (r * r);
                let theta = params.lambda() * f.arg() + params.gamma() * r.ln();
                let dn = Complex64::from_polar(1.0, theta)
                    * Complex64::new(dr, r * (params.lambda() * ds + params.gamma() * dr / r));
                dn / Complex64::i()
            })
            .collect();
        s.with_values(values)
    }

    #[test]
    fn deformed_generator_matches_the_chain_rule() {
        let g = grid(32);
        let h = linear();
        for (seed, (gamma, lambda)) in [(0.3, 1.0), (-0.4, 1.0), (0.3, 1.3)].into_iter().enumerate() {
            let params = GaugeParams::new(gamma, lambda).unwrap();
            let s = random_state(g, 20 + seed as u64);
            let oracle = chain_rule_generator(&params, &h, &s);
            let errs: Vec<f64> = [1e-3, 5e-4]
                .iter()
                .map(|dt| deformed_generator(&params, &h, &s, *dt).unwrap().distance(&oracle) / oracle.norm())
                .collect();
            assert!(errs[0] < 1e-4, "{errs:?}");
            assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
        }
    }

    #[test]
    fn gauged_linear_generator_is_nonlinear_but_homogeneous() {
        let g = grid(32);
        let h = linear();
        let params = GaugeParams::new(0.3, 1.0).unwrap();
        let (a, b) = (random_state(g, 31), random_state(g, 32));
        let sum = a.with_values(a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect());
        let hp = |s: &GridState| deformed_generator(&params, &h, s, 1e-4).unwrap();
        let (ha, hb, hs) = (hp(&a), hp(&b), hp(&sum));
        let parts = ha.with_values(ha.values().iter().zip(hb.values()).map(|(x, y)| x + y).collect());
        assert!(hs.distance(&parts) / hs.norm() > 0.01);
        // N(cΦ) = c e^{iγ ln|c|} N(Φ) makes H′ real-homogeneous
        let h2 = hp(&a.scaled(c(2.0, 0.0)));
        assert!(h2.distance(&ha.scaled(c(2.0, 0.0))) / h2.norm() < 1e-6);
    }

    #[test]
    fn conjugation_identity() {
        let g = grid(16);
        let h = linear();
        let params = GaugeParams::new(0.3, 1.0).unwrap();
        let (phi, psi) = (wave(g, 0.4, 1.0), wave(g, 0.3, -2.0));
        let emap = EvolutionMap::new(&h, Integrator::Rk4, 1e-4, 20).unwrap();
        let lhs =
            gauged_evolve(&params, &emap, &deformed_tensor(&params, &phi, &psi, Statistics::Bose).unwrap()).unwrap();
        let inner = GridState::product(
            &apply_gauge(&params, &phi, Direction::Inverse).unwrap(),
            &apply_gauge(&params, &psi, Direction::Inverse).unwrap(),
            Product::Sym,
            Statistics::Bose,
        )
        .unwrap();
        let rhs = apply_gauge(&params, &emap.evolve(&inner).unwrap(), Direction::Forward).unwrap();
        assert!(max_rel(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn deformed_gap_reduces_to_the_plain_one_without_gauge() {
        let g = grid(16);
        let h = linear();
        let (phi, psi) = (wave(g, 0.4, 1.0), wave(g, 0.3, -2.0));
        let id = GaugeParams::new(0.0, 1.0).unwrap();
        let a = deformed_separation_gap(&id, &h, &phi, &psi, 0.002, 1e-4).unwrap();
        let b = separation_gap(&h, &phi, &psi, 0.002, 1e-4, Product::Sym).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn gauged_linear_hierarchy_separates_only_for_the_deformed_product() {
        let g = grid(32);
        let h = linear();
        let params = GaugeParams::new(0.3, 1.0).unwrap();
        let (phi, psi) = (wave(g, 0.5, 1.0), wave(g, 0.5, -1.0));
        assert!(deformed_separation_gap(&params, &h, &phi, &psi, 0.01, 1e-4).unwrap() < 1e-5);
        assert!(undeformed_separation_gap(&params, &h, &phi, &psi, 0.01, 1e-4).unwrap() > 1e-3);
    }
}
