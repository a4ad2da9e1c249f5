//! Off-grid interpolation rules used by the history transport.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Nodes `start..start + len` and their interpolation coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub start: usize,
    pub len: usize,
    pub coeffs: [f64; 4],
}

impl Stencil {
    pub fn apply(&self, values: &[f64]) -> f64 {
        values[self.start..self.start + self.len]
            .iter()
            .zip(&self.coeffs)
            .map(|(v, c)| v * c)
            .sum()
    }
}

/// A rule for sampling a nodal profile at an arbitrary point of the grid.
pub trait Interpolator: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Stencil for `x ∈ [grid[0], grid[last]]`; `grid` has at least two nodes.
    fn stencil(&self, grid: &[f64], x: f64) -> Stencil;
}

/// Index `i` of the cell `[grid[i], grid[i + 1])` containing `x`, clamped to the grid.
fn cell_of(grid: &[f64], x: f64) -> usize {
    let cells = grid.len() - 1;
    grid.partition_point(|&g| g <= x).saturating_sub(1).min(cells - 1)
}

/// Piecewise-linear interpolation between the two bracketing nodes.
#[derive(Debug, Clone, Copy, Default)]
pub struct Linear;

impl Interpolator for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn stencil(&self, grid: &[f64], x: f64) -> Stencil {
        let i = cell_of(grid, x);
        let theta = (x - grid[i]) / (grid[i + 1] - grid[i]);
        Stencil {
            start: i,
            len: 2,
            coeffs: [1.0 - theta, theta, 0.0, 0.0],
        }
    }
}

/// Four-point Lagrange interpolation centred on the bracketing cell, shifted
/// inward at the ends of the grid. Falls back to [`Linear`] on grids with
/// fewer than four nodes.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cubic;

impl Interpolator for Cubic {
    fn name(&self) -> &'static str {
        "cubic"
    }

    fn stencil(&self, grid: &[f64], x: f64) -> Stencil {
        if grid.len() < 4 {
            return Linear.stencil(grid, x);
        }
        let i = cell_of(grid, x);
        let start = i.saturating_sub(1).min(grid.len() - 4);
        let nodes = &grid[start..start + 4];
        let mut coeffs = [0.0; 4];
        for (a, c) in coeffs.iter_mut().enumerate() {
            *c = nodes
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, &sb)| (x - sb) / (nodes[a] - sb))
                .product();
        }
        Stencil { start, len: 4, coeffs }
    }
}

/// Registered interpolation rules, by name.
pub const INTERPOLATORS: &[&str] = &["cubic", "linear"];

pub const DEFAULT_INTERPOLATOR: &str = "cubic";

pub fn interpolator(name: &str) -> Result<Arc<dyn Interpolator>> {
    match name {
        "cubic" => Ok(Arc::new(Cubic)),
        "linear" => Ok(Arc::new(Linear)),
        other => Err(Error::config(
            "transport.interpolation",
            format!("unknown interpolation `{other}` (expected one of {INTERPOLATORS:?})"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        vec![0.0, 0.3, 0.5, 1.1, 1.2, 2.0]
    }

    #[test]
    fn linear_reproduces_lines() {
        let g = grid();
        let v: Vec<f64> = g.iter().map(|s| 2.0 * s - 1.0).collect();
        for &x in &[0.0, 0.1, 0.5, 0.77, 1.9, 2.0] {
            let st = Linear.stencil(&g, x);
            assert!((st.apply(&v) - (2.0 * x - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn cubic_reproduces_cubics_near_ends() {
        let g = grid();
        let p = |s: f64| 1.0 - s + 0.5 * s * s - 0.25 * s * s * s;
        let v: Vec<f64> = g.iter().map(|&s| p(s)).collect();
        for &x in &[0.0, 0.05, 0.4, 1.15, 1.7, 2.0] {
            let st = Cubic.stencil(&g, x);
            assert!((st.apply(&v) - p(x)).abs() < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn nodes_are_reproduced() {
        let g = grid();
        let v: Vec<f64> = (0..g.len()).map(|i| (i * i) as f64).collect();
        for (j, &s) in g.iter().enumerate() {
            assert!((Cubic.stencil(&g, s).apply(&v) - v[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(interpolator("linear").unwrap().name(), "linear");
        assert_eq!(interpolator(DEFAULT_INTERPOLATOR).unwrap().name(), "cubic");
        assert!(matches!(interpolator("spline"), Err(Error::Config { .. })));
    }
}
