//! Solution state and Dafermos history `η^t(s) = ∫₀^s u(t - r) dr`.

mod interp;

pub use interp::{interpolator, Cubic, Interpolator, Linear, Stencil, DEFAULT_INTERPOLATOR, INTERPOLATORS};

use crate::basis::ModeBasis;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// Mode coefficients of `u(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub coeffs: Vec<f64>,
}

impl State {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// `η_k(s_j)`, stored mode-major so each mode's age profile is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    n_modes: usize,
    n_nodes: usize,
    values: Vec<f64>,
}

impl History {
    pub fn zeros(n_modes: usize, n_nodes: usize) -> Self {
        Self {
            n_modes,
            n_nodes,
            values: vec![0.0; n_modes * n_nodes],
        }
    }

    /// Builds a history from mode-major values; the `s = 0` column must vanish.
    pub fn from_values(n_modes: usize, n_nodes: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_modes * n_nodes {
            return Err(Error::Shape(format!(
                "{} values for {n_modes} modes × {n_nodes} ages",
                values.len()
            )));
        }
        let h = Self {
            n_modes,
            n_nodes,
            values,
        };
        if n_nodes > 0 && (0..n_modes).any(|k| h.row(k)[0] != 0.0) {
            return Err(Error::Domain("history must vanish at s = 0".into()));
        }
        Ok(h)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_nodes..(k + 1) * self.n_nodes]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.n_nodes..(k + 1) * self.n_nodes]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.n_nodes.max(1))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..*self
        }
    }

    /// `self - other`.
    pub fn difference(&self, other: &History) -> Result<Self> {
        if self.n_modes != other.n_modes || self.n_nodes != other.n_nodes {
            return Err(Error::Shape(format!(
                "histories of shape {}×{} and {}×{}",
                self.n_modes, self.n_nodes, other.n_modes, other.n_nodes
            )));
        }
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            ..*self
        })
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_aligned(&self, kernel: &KernelSpec) -> Result<()> {
        if self.n_nodes != kernel.n_nodes() {
            return Err(Error::Shape(format!(
                "history has {} ages, kernel grid has {}",
                self.n_nodes,
                kernel.n_nodes()
            )));
        }
        Ok(())
    }

    fn check_modes(&self, basis: &ModeBasis) -> Result<()> {
        if self.n_modes != basis.len() {
            return Err(Error::Shape(format!(
                "history has {} modes, basis has {}",
                self.n_modes,
                basis.len()
            )));
        }
        Ok(())
    }
}

/// `η⁰(s) = s u₀`, the history of a past frozen at `u₀`.
pub fn history_from_constant_past(u0: &State, kernel: &KernelSpec) -> History {
    let grid = kernel.s_grid();
    let mut h = History::zeros(u0.len(), grid.len());
    for (k, &c) in u0.coeffs.iter().enumerate() {
        for (v, s) in h.row_mut(k).iter_mut().zip(grid) {
            *v = s * c;
        }
    }
    h
}

/// Cumulative trapezoid integration of time-sorted past samples `(t ≤ 0, u(t))`
/// onto the kernel's age grid. Samples must cover `[-s_max, 0]`.
pub fn history_from_past_trajectory(samples: &[(f64, State)], kernel: &KernelSpec) -> Result<History> {
    if samples.len() < 2 {
        return Err(Error::Domain("at least two past samples are needed".into()));
    }
    let n_modes = samples[0].1.len();
    if samples.iter().any(|(_, u)| u.len() != n_modes) {
        return Err(Error::Shape("past samples have differing mode counts".into()));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Domain("past samples must be strictly increasing in time".into()));
    }
    let s_max = kernel.s_max();
    let slack = 1e-12 * s_max.max(1.0);
    let (t_first, t_last) = (samples[0].0, samples[samples.len() - 1].0);
    if t_last.abs() > slack {
        return Err(Error::Domain(format!("past samples end at t = {t_last}, not at 0")));
    }
    if t_first > -s_max + slack {
        return Err(Error::Domain(format!(
            "past samples start at t = {t_first}, after -s_max = {}",
            -s_max
        )));
    }

    // Ages r = -t in increasing order.
    let ages: Vec<f64> = samples.iter().rev().map(|(t, _)| -t).collect();
    let states: Vec<&State> = samples.iter().rev().map(|(_, u)| u).collect();
    let grid = kernel.s_grid();
    let mut h = History::zeros(n_modes, grid.len());
    let mut seg = 0;
    let mut acc = vec![0.0; n_modes];
    for (j, &s) in grid.iter().enumerate().skip(1) {
        while seg + 1 < ages.len() - 1 && ages[seg + 1] <= s {
            let dr = ages[seg + 1] - ages[seg];
            for (k, a) in acc.iter_mut().enumerate() {
                *a += 0.5 * dr * (states[seg].coeffs[k] + states[seg + 1].coeffs[k]);
            }
            seg += 1;
        }
        // Partial segment from ages[seg] to s under the linear interpolant.
        let (r0, r1) = (ages[seg], ages[seg + 1]);
        let x = (s - r0).min(r1 - r0);
        let theta = x / (r1 - r0);
        for (k, a) in acc.iter().enumerate() {
            let (u0, u1) = (states[seg].coeffs[k], states[seg + 1].coeffs[k]);
            let mid = u0 + 0.5 * theta * (u1 - u0);
            h.row_mut(k)[j] = a + x * mid;
        }
    }
    Ok(h)
}

/// `M_k = ∫₀^{s_max} μ(s) η_k(s) ds` with the kernel's nodal weights.
pub fn memory_integral(h: &History, kernel: &KernelSpec) -> Result<Vec<f64>> {
    h.check_aligned(kernel)?;
    let w = kernel.quad_weights();
    Ok(h.rows().map(|row| dot(w, row)).collect())
}

/// `‖η‖²_{μ,α} = ∫ μ(s) ‖η(s)‖_α² ds`.
pub fn history_norm(h: &History, kernel: &KernelSpec, basis: &ModeBasis, alpha: i32) -> Result<f64> {
    h.check_aligned(kernel)?;
    h.check_modes(basis)?;
    let w = kernel.quad_weights();
    Ok(h
        .rows()
        .zip(basis.eigenvalues())
        .map(|(row, l)| l.powi(alpha) * row.iter().zip(w).map(|(e, w)| w * e * e).sum::<f64>())
        .sum())
}

/// `(η, ∂_s η)_{μ,α}` for the piecewise-linear interpolant of the nodal history,
/// integrated exactly against `μ` cell by cell.
pub fn dafermos_pairing(h: &History, kernel: &KernelSpec, basis: &ModeBasis, alpha: i32) -> Result<f64> {
    h.check_aligned(kernel)?;
    h.check_modes(basis)?;
    if h.n_nodes() < 2 {
        return Err(Error::Domain("pairing needs at least two age nodes".into()));
    }
    let grid = kernel.s_grid();
    let cells = kernel.cell_weights();
    Ok(h
        .rows()
        .zip(basis.eigenvalues())
        .map(|(row, l)| {
            let sum: f64 = cells
                .iter()
                .enumerate()
                .map(|(j, [left, right])| {
                    let slope = (row[j + 1] - row[j]) / (grid[j + 1] - grid[j]);
                    slope * (left * row[j] + right * row[j + 1])
                })
                .sum();
            l.powi(alpha) * sum
        })
        .sum())
}

/// Semi-Lagrangian transport over one step with a frozen source:
/// `η(s) ← η(s - dt) + dt·u_new` for `s ≥ dt` and `s·u_new` below.
pub fn transport_step(
    h: &History,
    u_new: &State,
    dt: f64,
    kernel: &KernelSpec,
    interp: &dyn Interpolator,
) -> Result<History> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step {dt} is not positive")));
    }
    h.check_aligned(kernel)?;
    if h.n_modes() != u_new.len() {
        return Err(Error::Shape(format!(
            "history has {} modes, state has {}",
            h.n_modes(),
            u_new.len()
        )));
    }
    let shift = ShiftOperator::new(kernel, dt, interp);
    let grid = kernel.s_grid();
    let mut out = History::zeros(h.n_modes(), h.n_nodes());
    for (k, &u) in u_new.coeffs.iter().enumerate() {
        let dst = out.row_mut(k);
        shift.apply(h.row(k), dst);
        for (j, v) in dst.iter_mut().enumerate() {
            *v = if j < shift.first_shifted {
                grid[j] * u
            } else {
                *v + dt * u
            };
        }
        dst[0] = 0.0;
    }
    Ok(out)
}

/// Interpolation matrix `η ↦ η(· - τ)` restricted to nodes with `s_j ≥ τ`,
/// together with the kernel weights pulled back through it.
#[derive(Debug, Clone)]
pub(crate) struct ShiftOperator {
    pub tau: f64,
    /// Nodes below this index have `s_j < τ` and are not covered.
    pub first_shifted: usize,
    stencils: Vec<Stencil>,
    /// `Pᵀw`, so that `w · (Pη) = pulled · η`.
    pub pulled_weights: Vec<f64>,
    /// `Σ_{s_j ≥ τ} w_j`.
    pub shifted_mass: f64,
}

impl ShiftOperator {
    pub fn new(kernel: &KernelSpec, tau: f64, interp: &dyn Interpolator) -> Self {
        let grid = kernel.s_grid();
        let first_shifted = grid.partition_point(|&s| s < tau).max(1);
        let stencils: Vec<Stencil> = grid[first_shifted..]
            .iter()
            .map(|&s| interp.stencil(grid, (s - tau).max(0.0)))
            .collect();
        let w = kernel.quad_weights();
        let mut pulled_weights = vec![0.0; grid.len()];
        for (st, &wj) in stencils.iter().zip(&w[first_shifted..]) {
            for (i, c) in st.coeffs[..st.len].iter().enumerate() {
                pulled_weights[st.start + i] += wj * c;
            }
        }
        let shifted_mass = w[first_shifted..].iter().sum();
        Self {
            tau,
            first_shifted,
            stencils,
            pulled_weights,
            shifted_mass,
        }
    }

    /// Writes `η(s_j - τ)` into `dst[j]` for `j ≥ first_shifted`.
    pub fn apply(&self, src: &[f64], dst: &mut [f64]) {
        for (d, st) in dst[self.first_shifted..].iter_mut().zip(&self.stencils) {
            *d = st.apply(src);
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
