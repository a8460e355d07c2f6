//! Mesh functions on `{time levels} x {boundary points}`.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Values at every boundary index, stored level-major: entry `(k, b)` lives
/// at `k * points + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySeries {
    levels: usize,
    points: usize,
    values: Vec<f64>,
}

/// Dirichlet temperature control.
pub type BoundaryControl = BoundarySeries;

/// Trace of `p3` (negative outward normal derivative of the adjoint
/// temperature), in original time.
pub type FluxTrace = BoundarySeries;

impl BoundarySeries {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        let levels = grid.time_levels();
        let points = grid.boundary_len();
        Self {
            levels,
            points,
            values: vec![value; levels * points],
        }
    }

    /// Constant-in-time values given per boundary point.
    pub fn steady(grid: &Grid, per_point: &[f64]) -> Result<Self> {
        if per_point.len() != grid.boundary_len() {
            return Err(Error::IncompleteBoundary {
                expected: grid.boundary_len(),
                actual: per_point.len(),
            });
        }
        let levels = grid.time_levels();
        let mut values = Vec::with_capacity(levels * per_point.len());
        for _ in 0..levels {
            values.extend_from_slice(per_point);
        }
        Ok(Self {
            levels,
            points: per_point.len(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(usize, usize) -> f64) -> Self {
        let levels = grid.time_levels();
        let points = grid.boundary_len();
        let mut values = Vec::with_capacity(levels * points);
        for k in 0..levels {
            for b in 0..points {
                values.push(f(k, b));
            }
        }
        Self {
            levels,
            points,
            values,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.time_levels() * grid.boundary_len();
        if values.len() != expected {
            return Err(Error::IncompleteBoundary {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            levels: grid.time_levels(),
            points: grid.boundary_len(),
            values,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, level: usize, point: usize) -> f64 {
        self.values[level * self.points + point]
    }

    pub fn set(&mut self, level: usize, point: usize, value: f64) {
        self.values[level * self.points + point] = value;
    }

    /// All boundary values at one time level.
    pub fn level(&self, level: usize) -> &[f64] {
        &self.values[level * self.points..(level + 1) * self.points]
    }

    pub fn level_mut(&mut self, level: usize) -> &mut [f64] {
        &mut self.values[level * self.points..(level + 1) * self.points]
    }

    /// Time history of one boundary point.
    pub fn series(&self, point: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.levels).map(move |k| self.get(k, point))
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<()> {
        let expected = grid.time_levels() * grid.boundary_len();
        if self.levels != grid.time_levels() || self.points != grid.boundary_len() {
            return Err(Error::IncompleteBoundary {
                expected,
                actual: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.levels == other.levels && self.points == other.points
    }

    /// Plain Euclidean norm of the value vector.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Componentwise sum of products.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert!(self.same_shape(other));
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
