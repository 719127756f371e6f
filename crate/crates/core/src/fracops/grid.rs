use std::ops::RangeInclusive;

use super::FracError;

/// Uniform partition of `[a, b]` into `n_cells` cells with trapezoid weights.
///
/// Nodes and weights are computed on demand, so a `Grid` is `Copy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    n_cells: usize,
    h: f64,
}

impl Grid {
    pub fn new(a: f64, b: f64, n_cells: usize) -> Result<Self, FracError> {
        if !a.is_finite() || !b.is_finite() || b <= a {
            return Err(FracError::InvalidInterval { a, b });
        }
        if n_cells == 0 {
            return Err(FracError::EmptyGrid);
        }
        let h = (b - a) / n_cells as f64;
        if h <= 0.0 {
            return Err(FracError::InvalidInterval { a, b });
        }
        Ok(Self { a, b, n_cells, h })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of nodes, `n_cells + 1`.
    pub fn len(&self) -> usize {
        self.n_cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Node `x_i`. The last node is `b` exactly.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n_cells);
        if i == self.n_cells {
            self.b
        } else {
            self.a + i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_cells {
            0.5 * self.h
        } else {
            self.h
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Node indices at least `n_cells / 16` (and at least one) away from
    /// either endpoint. Accuracy claims for derivative rows and residuals
    /// are made on this range only.
    pub fn interior(&self) -> RangeInclusive<usize> {
        let margin = (self.n_cells / 16).max(1);
        if 2 * margin > self.n_cells {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        margin..=self.n_cells - margin
    }

    /// Quadrature `Σ ω_i f_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values
            .iter()
            .enumerate()
            .map(|(i, v)| self.weight(i) * v)
            .sum()
    }

    /// Weighted inner product `Σ ω_i f_i g_i`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        f.iter()
            .zip(g)
            .enumerate()
            .map(|(i, (a, b))| self.weight(i) * a * b)
            .sum()
    }

    /// `sqrt(Σ ω_i f_i²)`.
    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Weighted norm restricted to [`Grid::interior`].
    pub fn interior_norm(&self, f: &[f64]) -> f64 {
        self.interior()
            .map(|i| self.weight(i) * f[i] * f[i])
            .sum::<f64>()
            .sqrt()
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> SampledFn {
        SampledFn {
            grid: *self,
            values: self.nodes().map(f).collect(),
        }
    }
}

/// Node values of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFn {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, FracError> {
        if values.len() != grid.len() {
            return Err(FracError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
