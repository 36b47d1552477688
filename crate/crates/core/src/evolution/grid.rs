use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::EvolutionError;
use crate::tensor::{simple_tensor, sym_tensor, ParticleTable, Statistics};

/// Periodic one-dimensional grid `x_i = −L/2 + i·h`, `h = L/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    points: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 8;
    pub const DEFAULT_LENGTH: f64 = 2.0 * PI;

    pub fn new(length: f64, points: usize) -> Result<Self, EvolutionError> {
        if points < Self::MIN_POINTS {
            return Err(EvolutionError::Grid(format!("need at least {} points, got {points}", Self::MIN_POINTS)));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(EvolutionError::Grid(format!("length must be positive, got {length}")));
        }
        Ok(Self { length, points })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing()
    }

    /// Wave number of the `j`-th periodic Fourier mode.
    pub fn wave_number(&self, j: i64) -> f64 {
        2.0 * PI * j as f64 / self.length
    }
}

/// Which two-particle product a gap is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Product {
    Plain,
    Sym,
}

/// A `p`-particle wave function sampled on `grid` in every slot.
#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    grid: Grid,
    table: ParticleTable,
}

impl GridState {
    pub fn new(grid: Grid, table: ParticleTable) -> Result<Self, EvolutionError> {
        if table.points() != grid.points() {
            return Err(EvolutionError::State(format!(
                "table has {} points per slot, grid has {}",
                table.points(),
                grid.points()
            )));
        }
        if let Some(pos) = table.data().iter().position(|v| !v.is_finite()) {
            return Err(EvolutionError::State(format!("non-finite entry at flat position {pos}")));
        }
        let state = Self { grid, table };
        if state.norm() == 0.0 {
            return Err(EvolutionError::State("zero state".into()));
        }
        Ok(state)
    }

    /// One-particle state from `(x, A) ↦ value`.
    pub fn from_fn(grid: Grid, internal: usize, f: impl Fn(f64, usize) -> Complex64) -> Result<Self, EvolutionError> {
        Self::new(grid, ParticleTable::from_fn(grid.points(), internal, |i, a| f(grid.coordinate(i), a)))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn table(&self) -> &ParticleTable {
        &self.table
    }

    pub fn into_table(self) -> ParticleTable {
        self.table
    }

    pub fn particles(&self) -> usize {
        self.table.particles()
    }

    pub fn internal(&self) -> usize {
        self.table.internal()
    }

    pub fn values(&self) -> &[Complex64] {
        self.table.data()
    }

    /// Same shape and grid, new values (not validated).
    pub(crate) fn with_values(&self, values: Vec<Complex64>) -> GridState {
        let table =
            ParticleTable::new(self.particles(), self.grid.points(), self.internal(), values).expect("same shape");
        GridState { grid: self.grid, table }
    }

    /// Rectangle-rule `L²` norm.
    pub fn norm(&self) -> f64 {
        let weight = self.grid.spacing().powi(self.particles() as i32);
        (weight * self.values().iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn normalized(&self) -> GridState {
        self.with_values(self.values().iter().map(|v| v / self.norm()).collect())
    }

    pub fn scaled(&self, s: Complex64) -> GridState {
        self.with_values(self.values().iter().map(|v| v * s).collect())
    }

    /// `‖self − other‖` with the rectangle rule.
    pub fn distance(&self, other: &GridState) -> f64 {
        assert!(self.table.same_shape(&other.table) && self.grid == other.grid, "shape mismatch");
        let weight = self.grid.spacing().powi(self.particles() as i32);
        let sum: f64 = self.values().iter().zip(other.values()).map(|(a, b)| (a - b).norm_sqr()).sum();
        (weight * sum).sqrt()
    }

    /// Translates every particle by `cells` grid cells (periodically):
    /// `out(x_1 + c, …, x_p + c) = self(x_1, …, x_p)`.
    pub fn shifted(&self, cells: isize) -> GridState {
        let n = self.grid.points() as isize;
        let m = self.internal();
        let values = (0..self.values().len())
            .map(|flat| {
                let digits = self.table.digits(flat);
                let xs: Vec<usize> = digits.iter().map(|d| ((d / m) as isize - cells).rem_euclid(n) as usize).collect();
                let internal: Vec<usize> = digits.iter().map(|d| d % m).collect();
                self.table.get(&xs, &internal)
            })
            .collect();
        self.with_values(values)
    }

    /// Minimum over grid tuples of the local amplitude
    /// `sqrt(Σ_A |Ψ^A(ξ)|²)`, with the grid indices where it occurs.
    pub fn min_amplitude(&self) -> (f64, Vec<usize>) {
        let p = self.particles();
        let n = self.grid.points();
        let mut best = (f64::INFINITY, vec![0; p]);
        for point in 0..n.pow(p as u32) {
            let xs = grid_tuple(point, n, p);
            let amp =
                internal_tuples(self.internal(), p).map(|a| self.table.get(&xs, &a).norm_sqr()).sum::<f64>().sqrt();
            if amp < best.0 {
                best = (amp, xs);
            }
        }
        best
    }

    /// Two-particle product of one-particle states on a shared grid.
    pub fn product(
        phi: &GridState,
        psi: &GridState,
        product: Product,
        stats: Statistics,
    ) -> Result<GridState, EvolutionError> {
        if phi.grid != psi.grid {
            return Err(EvolutionError::State("factors live on different grids".into()));
        }
        let table = match product {
            Product::Plain => simple_tensor(&phi.table, &psi.table),
            Product::Sym => sym_tensor(&phi.table, &psi.table, stats),
        }
        .map_err(|e| EvolutionError::State(e.to_string()))?;
        Ok(GridState { grid: phi.grid, table })
    }

    /// CSV snapshot with columns `x0…x{p-1}` (grid indices), `a0…a{p-1}`
    /// (internal indices), `re`, `im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let p = self.particles();
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..p)
            .map(|k| format!("x{k}"))
            .chain((0..p).map(|k| format!("a{k}")))
            .chain(["re".to_string(), "im".to_string()])
            .collect();
        w.write_record(&header)?;
        let m = self.internal();
        for (flat, v) in self.values().iter().enumerate() {
            let digits = self.table.digits(flat);
            let record: Vec<String> = digits
                .iter()
                .map(|d| (d / m).to_string())
                .chain(digits.iter().map(|d| (d % m).to_string()))
                .chain([v.re.to_string(), v.im.to_string()])
                .collect();
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Grid indices of the `point`-th tuple, slot 0 most significant.
pub(crate) fn grid_tuple(mut point: usize, n: usize, p: usize) -> Vec<usize> {
    let mut xs = vec![0; p];
    for k in (0..p).rev() {
        xs[k] = point % n;
        point /= n;
    }
    xs
}

/// Internal index tuples in flat order, slot 0 most significant.
pub(crate) fn internal_tuples(m: usize, p: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..m.pow(p as u32)).map(move |flat| grid_tuple(flat, m, p))
}
