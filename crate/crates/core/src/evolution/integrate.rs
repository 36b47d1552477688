use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::generator::apply_generator_at_step;
use super::{EvolutionError, GridState};
use crate::opdsl::Hierarchy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Rk4,
    CrankNicolson,
}

/// Time stepping for `∂Ψ/∂t = i H(Ψ)`.
#[derive(Clone, Copy, Debug)]
pub struct EvolutionMap<'a> {
    hier: &'a Hierarchy,
    integrator: Integrator,
    dt: f64,
    steps: usize,
    backward: bool,
}

impl<'a> EvolutionMap<'a> {
    /// Crank–Nicolson is accepted only when every operator of the
    /// hierarchy is linear.
    pub fn new(hier: &'a Hierarchy, integrator: Integrator, dt: f64, steps: usize) -> Result<Self, EvolutionError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(EvolutionError::Integrator(format!("dt must be positive, got {dt}")));
        }
        if integrator == Integrator::CrankNicolson {
            if let Some(n) = hier.arities().find(|&n| !hier.is_linear(n)) {
                return Err(EvolutionError::Integrator(format!(
                    "Crank-Nicolson needs a linear hierarchy; arity {n} is not linear"
                )));
            }
        }
        Ok(Self { hier, integrator, dt, steps, backward: false })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        self.hier
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        Self { steps, ..*self }
    }

    /// The same map run backward in time (steps of `−dt`).
    pub fn reversed(&self) -> Self {
        Self { backward: !self.backward, ..*self }
    }

    fn signed_dt(&self) -> f64 {
        if self.backward {
            -self.dt
        } else {
            self.dt
        }
    }

    pub fn evolve(&self, state: &GridState) -> Result<GridState, EvolutionError> {
        let mut psi = state.clone();
        for step in 0..self.steps {
            psi = match self.integrator {
                Integrator::Rk4 => self.rk4_step(&psi, step)?,
                Integrator::CrankNicolson => self.cn_step(&psi, step)?,
            };
        }
        Ok(psi)
    }

    fn rhs(&self, psi: &[Complex64], like: &GridState, step: usize) -> Result<Vec<Complex64>, EvolutionError> {
        let h = apply_generator_at_step(self.hier, &like.with_values(psi.to_vec()), step)?;
        Ok(h.values().iter().map(|v| v * Complex64::i()).collect())
    }

    fn rk4_step(&self, psi: &GridState, step: usize) -> Result<GridState, EvolutionError> {
        let dt = self.signed_dt();
        let y = psi.values();
        let axpy = |a: f64, k: &[Complex64]| -> Vec<Complex64> { y.iter().zip(k).map(|(y, k)| y + k * a).collect() };
        let k1 = self.rhs(y, psi, step)?;
        let k2 = self.rhs(&axpy(0.5 * dt, &k1), psi, step)?;
        let k3 = self.rhs(&axpy(0.5 * dt, &k2), psi, step)?;
        let k4 = self.rhs(&axpy(dt, &k3), psi, step)?;
        let next = (0..y.len()).map(|j| y[j] + (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (dt / 6.0)).collect();
        Ok(psi.with_values(next))
    }

    /// `(1 − iτH)Ψ' = (1 + iτH)Ψ` with `τ = dt/2`, solved by BiCGSTAB.
    fn cn_step(&self, psi: &GridState, step: usize) -> Result<GridState, EvolutionError> {
        let tau = 0.5 * self.signed_dt();
        let ht = |v: &[Complex64]| -> Result<Vec<Complex64>, EvolutionError> { self.rhs(v, psi, step) };
        let b: Vec<Complex64> = psi.values().iter().zip(ht(psi.values())?).map(|(y, k)| y + k * tau).collect();
        let apply = |v: &[Complex64]| -> Result<Vec<Complex64>, EvolutionError> {
            Ok(v.iter().zip(ht(v)?).map(|(y, k)| y - k * tau).collect())
        };
        let x = bicgstab(apply, &b, step)?;
        Ok(psi.with_values(x))
    }
}

pub fn evolve(emap: &EvolutionMap<'_>, state: &GridState) -> Result<GridState, EvolutionError> {
    emap.evolve(state)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

const SOLVER_TOLERANCE: f64 = 1e-15;
const SOLVER_ACCEPT: f64 = 1e-12;
const SOLVER_MAX_ITER: usize = 500;

fn bicgstab(
    apply: impl Fn(&[Complex64]) -> Result<Vec<Complex64>, EvolutionError>,
    b: &[Complex64],
    step: usize,
) -> Result<Vec<Complex64>, EvolutionError> {
    let zero = Complex64::new(0.0, 0.0);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(vec![zero; b.len()]);
    }
    let mut x = b.to_vec();
    let ax = apply(&x)?;
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) =
        (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    let mut v = vec![zero; b.len()];
    let mut p = vec![zero; b.len()];
    let mut best = (norm(&r), x.clone());
    for _ in 0..SOLVER_MAX_ITER {
        if best.0 <= SOLVER_TOLERANCE * b_norm {
            break;
        }
        let rho_next = dot(&r_hat, &r);
        if rho_next.norm() == 0.0 {
            break;
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for j in 0..p.len() {
            p[j] = r[j] + beta * (p[j] - omega * v[j]);
        }
        v = apply(&p)?;
        let denom = dot(&r_hat, &v);
        if denom.norm() == 0.0 {
            break;
        }
        alpha = rho / denom;
        let s: Vec<Complex64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        let t = apply(&s)?;
        let tt = dot(&t, &t);
        omega = if tt.norm() == 0.0 { zero } else { dot(&t, &s) / tt };
        for j in 0..x.len() {
            x[j] += alpha * p[j] + omega * s[j];
            r[j] = s[j] - omega * t[j];
        }
        let rn = norm(&r);
        if rn < best.0 {
            best = (rn, x.clone());
        }
        if omega.norm() == 0.0 {
            break;
        }
    }
    // the recursive residual drifts; confirm with a true one
    let x = best.1;
    let ax = apply(&x)?;
    let residual = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / b_norm;
    if residual > SOLVER_ACCEPT {
        return Err(EvolutionError::Solver { step, residual });
    }
    Ok(x)
}
