//! Uniform time grids and vector-valued paths sampled on them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vecops;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("interval [{a}, {b}] is degenerate")]
    DegenerateInterval { a: f64, b: f64 },
    #[error("a grid needs at least 2 intervals, got {0}")]
    TooCoarse(usize),
    #[error("path has {got} values, expected {expected}")]
    Length { got: usize, expected: usize },
}

/// `intervals + 1` equispaced nodes from `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    a: f64,
    b: f64,
    intervals: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, intervals: usize) -> Result<Self, GridError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(GridError::DegenerateInterval { a, b });
        }
        if intervals < 2 {
            return Err(GridError::TooCoarse(intervals));
        }
        Ok(Grid { a, b, intervals })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.intervals as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.intervals {
            self.b
        } else {
            self.a + j as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.node(j))
    }

    /// Locates `s` as `(j, theta)` with `s = (1 - theta) t_j + theta t_{j+1}`.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let u = ((s - self.a) / self.step()).clamp(0.0, self.intervals as f64);
        let j = (u.floor() as usize).min(self.intervals - 1);
        (j, u - j as f64)
    }

    pub fn same_interval(&self, other: &Grid) -> bool {
        self.a == other.a && self.b == other.b
    }
}

/// Values `u(t_j)` of an `R^n`-valued function at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn from_fn(grid: Grid, dim: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for t in grid.nodes() {
            let v = f(t);
            assert_eq!(v.len(), dim, "path component count");
            values.extend(v);
        }
        SampledPath { grid, dim, values }
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Self {
        Self::from_fn(grid, value.len(), |_| value.to_vec())
    }

    pub fn from_values(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() * dim {
            return Err(GridError::Length {
                got: values.len(),
                expected: grid.len() * dim,
            });
        }
        Ok(SampledPath { grid, dim, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn node_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first(&self) -> &[f64] {
        self.node(0)
    }

    pub fn last(&self) -> &[f64] {
        self.node(self.grid.intervals())
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.values
            .chunks(self.dim)
            .enumerate()
            .map(move |(j, v)| (self.grid.node(j), v))
    }

    /// `max_j ||u(t_j)||`.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.dim)
            .map(vecops::norm)
            .fold(0.0, f64::max)
    }

    /// Sup-norm of the nodewise difference; grids must coincide.
    pub fn sup_distance(&self, other: &SampledPath) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .chunks(self.dim)
            .zip(other.values.chunks(self.dim))
            .map(|(a, b)| vecops::dist(a, b))
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolation at `s`.
    pub fn interpolate(&self, s: f64) -> Vec<f64> {
        let (j, theta) = self.grid.locate(s);
        let (lo, hi) = (self.node(j), self.node(j + 1));
        lo.iter()
            .zip(hi)
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect()
    }

    /// Running trapezoid integral `F(t_j) = int_a^{t_j} u`, with `F(a) = 0`.
    pub fn cumulative_trapezoid(&self) -> SampledPath {
        let half_h = 0.5 * self.grid.step();
        let mut values = vec![0.0; self.values.len()];
        for j in 1..self.len() {
            for k in 0..self.dim {
                let prev = values[(j - 1) * self.dim + k];
                values[j * self.dim + k] = prev
                    + half_h
                        * (self.values[(j - 1) * self.dim + k] + self.values[j * self.dim + k]);
            }
        }
        SampledPath {
            grid: self.grid,
            dim: self.dim,
            values,
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &SampledPath, beta: f64) -> SampledPath {
        assert_eq!(self.values.len(), other.values.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        SampledPath {
            grid: self.grid,
            dim: self.dim,
            values,
        }
    }

    pub fn map_nodes(&self, mut f: impl FnMut(f64, &[f64]) -> Vec<f64>) -> SampledPath {
        SampledPath::from_fn(self.grid, self.dim, {
            let mut j = 0;
            move |t| {
                let v = f(t, self.node(j));
                j += 1;
                v
            }
        })
    }

    pub fn negated(&self) -> SampledPath {
        SampledPath {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}
