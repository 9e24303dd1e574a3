//! Maps `φ: M → N` sampled on the source grid, the pullback bundle
//! `φ⁻¹TN` with its connection, and the tension fields built from them.

mod kinematics;
mod lagrangian;
mod presets;
mod tension;

pub use kinematics::{Kinematics, MAP_MARGIN_REACHES};
pub use lagrangian::{check_b_partials, check_l_partials, BPreset, LPreset, LagrangianB, LagrangianL};
pub use presets::{random_smooth_field, random_symtensor, smooth_window, MapPreset, RandomFieldSpec};
pub use tension::{BitensionForm, LagrangianFields};

use crate::error::{Error, Result};
use crate::geometry::ChartManifold;
use crate::grid::Grid;
use crate::scalar::Real;

/// Target-chart coordinates `φ^α` at every node of a source grid.
#[derive(Debug, Clone)]
pub struct DiscreteMap<T: Real> {
    grid: Grid<T>,
    target: ChartManifold<T>,
    values: Vec<T>,
    base: Vec<T>,
    mask: Vec<bool>,
}

impl<T: Real> DiscreteMap<T> {
    /// Values are node-major, `values[node * n + α]`. On bounded grids the
    /// base point is the value at the first node and the support mask marks
    /// the nodes differing from it; on a torus every node is in the mask.
    pub fn new(grid: Grid<T>, target: ChartManifold<T>, values: Vec<T>) -> Result<Self> {
        let n = target.dim();
        if values.len() != grid.len() * n {
            return Err(Error::Dimension { expected: grid.len() * n, got: values.len() });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("map value {}", bad.as_f64())));
        }
        for node in 0..grid.len() {
            let y = &values[node * n..(node + 1) * n];
            if !target.contains(y) {
                return Err(Error::OutsideDomain { name: target.name(), point: y.iter().map(|v| v.as_f64()).collect() });
            }
        }
        let base = values[..n].to_vec();
        let mask: Vec<bool> = if grid.is_periodic() {
            vec![true; grid.len()]
        } else {
            (0..grid.len()).map(|node| values[node * n..(node + 1) * n] != base[..]).collect()
        };
        Ok(Self { grid, target, values, base, mask })
    }

    pub fn from_fn<F>(grid: Grid<T>, target: ChartManifold<T>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[T]) -> Vec<T>,
    {
        let n = target.dim();
        let values = grid.sample(n, |x, out| out.copy_from_slice(&f(x)));
        Self::new(grid, target, values)
    }

    pub fn constant(grid: Grid<T>, target: ChartManifold<T>, y0: &[T]) -> Result<Self> {
        let values = (0..grid.len()).flat_map(|_| y0.iter().copied()).collect();
        Self::new(grid, target, values)
    }

    /// Same grid and target with new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(self.grid.clone(), self.target.clone(), values)
    }

    /// The straight-line variation `φ + t v` in target coordinates.
    pub fn perturbed(&self, v: &[T], t: T) -> Result<Self> {
        if v.len() != self.values.len() {
            return Err(Error::Dimension { expected: self.values.len(), got: v.len() });
        }
        self.with_values(self.values.iter().zip(v).map(|(&a, &b)| a + t * b).collect())
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn target(&self) -> &ChartManifold<T> {
        &self.target
    }

    pub fn source_dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn target_dim(&self) -> usize {
        self.target.dim()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn at(&self, node: usize) -> &[T] {
        let n = self.target.dim();
        &self.values[node * n..(node + 1) * n]
    }

    pub fn base_point(&self) -> &[T] {
        &self.base
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Smallest boundary distance (in nodes) of a support node.
    pub fn support_margin(&self) -> usize {
        (0..self.grid.len()).filter(|&k| self.mask[k]).map(|k| self.grid.boundary_distance(k)).min().unwrap_or(usize::MAX)
    }

    /// Rejects supports closer than `width` nodes to the boundary.
    pub fn check_support_margin(&self, width: usize) -> Result<()> {
        if self.support_margin() < width {
            return Err(Error::Margin { required: width });
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        !self.mask.iter().any(|&b| b) || {
            let n = self.target.dim();
            (0..self.grid.len()).all(|k| self.values[k * n..(k + 1) * n] == self.base[..])
        }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a.max(v.abs()))
    }
}

/// A vector field along `φ` in target-chart components, `values[node * n + α]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PullbackSection<T> {
    pub dim: usize,
    pub values: Vec<T>,
}

impl<T: Real> PullbackSection<T> {
    pub fn zeros(dim: usize, nodes: usize) -> Self {
        Self { dim, values: vec![T::zero(); dim * nodes] }
    }

    pub fn at(&self, node: usize) -> &[T] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.dim.max(1)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { dim: self.dim, values: self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { dim: self.dim, values: self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect() }
    }
}
