//! Memory kernels `μ(s) = Σ c_i e^{-δ_i s}` on a truncated history axis.
//!
//! A [`KernelSpec`] owns the kernel terms, the age grid `0 = s_0 < … < s_J = s_max`
//! and the weights used for every `∫₀^{s_max} μ(s) φ(s) ds` in the crate. The
//! weights integrate `μ` exactly against the piecewise-linear interpolant of
//! `φ`, so `Σ w_j` equals the truncated kernel mass to rounding and linear
//! profiles are integrated without discretization error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the discarded kernel mass `∫_{s_max}^∞ μ`.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;
/// Default number of age intervals.
pub const DEFAULT_S_POINTS: usize = 512;
/// Stretching exponent of the geometric age grid.
const GEOMETRIC_STRETCH: f64 = 3.0;

/// One exponential mode `c e^{-δ s}` of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub amplitude: f64,
    pub rate: f64,
}

impl ExpTerm {
    pub fn new(amplitude: f64, rate: f64) -> Self {
        Self { amplitude, rate }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    #[default]
    Uniform,
    /// Nodes cluster near `s = 0`, where constant-past histories have a kink.
    Geometric,
}

impl GridKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(Self::Uniform),
            "geometric" => Some(Self::Geometric),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub tail_tol: f64,
    pub s_points: usize,
    pub grid: GridKind,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            tail_tol: DEFAULT_TAIL_TOL,
            s_points: DEFAULT_S_POINTS,
            grid: GridKind::Uniform,
        }
    }
}

/// Outcome of one structural check on the kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub condition: String,
    pub passed: bool,
    pub offending_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
    pub delta: f64,
    pub s_max: f64,
    pub tail_mass: f64,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Validated memory kernel together with its discretized age axis.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    terms: Vec<ExpTerm>,
    delta: f64,
    gamma: f64,
    tail_tol: f64,
    grid: GridKind,
    s_grid: Vec<f64>,
    quad_weights: Vec<f64>,
    // (left, right) hat integrals for every cell [s_j, s_{j+1}].
    cell_weights: Vec<[f64; 2]>,
}

impl KernelSpec {
    /// Validates the terms, picks `s_max` from the tail tolerance and builds the grid.
    pub fn new(terms: Vec<ExpTerm>, options: GridOptions) -> Result<Self> {
        let report = validate_kernel(&terms, &options)?;
        if !report.passed {
            let failed: Vec<String> = report
                .failures()
                .map(|c| match c.offending_s {
                    Some(s) => format!("{} (violated at s = {s})", c.condition),
                    None => c.condition.clone(),
                })
                .collect();
            return Err(Error::InvalidKernel(failed.join("; ")));
        }
        let s_grid = build_grid(report.s_max, options.s_points, options.grid)?;
        Self::assemble(terms, s_grid, options.tail_tol, options.grid)
    }

    /// Builds a kernel on an explicit age grid, bypassing the automatic `s_max`.
    pub fn with_grid(terms: Vec<ExpTerm>, s_grid: Vec<f64>, tail_tol: f64) -> Result<Self> {
        check_terms(&terms)?;
        Self::assemble(terms, s_grid, tail_tol, GridKind::Uniform)
    }

    fn assemble(terms: Vec<ExpTerm>, s_grid: Vec<f64>, tail_tol: f64, grid: GridKind) -> Result<Self> {
        check_grid(&s_grid)?;
        let cell_weights = cell_weights(&terms, &s_grid);
        let mut quad_weights = vec![0.0; s_grid.len()];
        for (j, [left, right]) in cell_weights.iter().enumerate() {
            quad_weights[j] += left;
            quad_weights[j + 1] += right;
        }
        let delta = min_rate(&terms);
        Ok(Self {
            terms,
            delta,
            gamma: delta,
            tail_tol,
            grid,
            s_grid,
            quad_weights,
            cell_weights,
        })
    }

    /// Same kernel, age grid rebuilt with `s_points` intervals.
    pub fn refined(&self, s_points: usize) -> Result<Self> {
        let s_grid = build_grid(self.s_max(), s_points, self.grid)?;
        Self::assemble(self.terms.clone(), s_grid, self.tail_tol, self.grid)
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    /// Uniform decay rate `δ = min_i δ_i`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Pairing constant of the history inequality; equal to `δ`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn grid_kind(&self) -> GridKind {
        self.grid
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s_grid
    }

    pub fn s_max(&self) -> f64 {
        *self.s_grid.last().expect("grid has at least two nodes")
    }

    /// Number of age nodes, `J + 1`.
    pub fn n_nodes(&self) -> usize {
        self.s_grid.len()
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub(crate) fn cell_weights(&self) -> &[[f64; 2]] {
        &self.cell_weights
    }

    pub fn mu(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.amplitude * (-t.rate * s).exp()).sum()
    }

    pub fn mu_prime(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| -t.rate * t.amplitude * (-t.rate * s).exp())
            .sum()
    }

    /// `k(0) = ∫₀^∞ μ`.
    pub fn total_mass(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude / t.rate).sum()
    }

    /// Analytic `∫₀^{s_max} μ`.
    pub fn truncated_mass(&self) -> f64 {
        let s_max = self.s_max();
        self.terms
            .iter()
            .map(|t| t.amplitude * -(-t.rate * s_max).exp_m1() / t.rate)
            .sum()
    }

    /// Weighted sum `Σ_j w_j φ(s_j)`.
    pub fn quadrature(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.quad_weights.len() {
            return Err(Error::Shape(format!(
                "{} samples for {} age nodes",
                values.len(),
                self.quad_weights.len()
            )));
        }
        Ok(self.quad_weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }
}

/// Checks the structural kernel hypotheses and reports each one.
///
/// Non-positive decay rates are rejected outright: they make `μ` non-integrable.
pub fn validate_kernel(terms: &[ExpTerm], options: &GridOptions) -> Result<ValidationReport> {
    check_terms(terms)?;
    if !(options.tail_tol > 0.0) {
        return Err(Error::InvalidKernel("tail tolerance must be positive".into()));
    }
    let delta = min_rate(terms);
    let s_max = choose_s_max(terms, options.tail_tol);
    let tail_mass = tail_mass(terms, s_max);
    let grid = build_grid(s_max, options.s_points.max(1), options.grid)?;

    let mu = |s: f64| -> f64 { terms.iter().map(|t| t.amplitude * (-t.rate * s).exp()).sum() };
    let mu_prime = |s: f64| -> f64 {
        terms
            .iter()
            .map(|t| -t.rate * t.amplitude * (-t.rate * s).exp())
            .sum()
    };
    let scale = terms.iter().map(|t| t.amplitude.abs() * t.rate).sum::<f64>().max(f64::MIN_POSITIVE);
    let slack = 64.0 * f64::EPSILON * scale;
    let first_violation = |pred: &dyn Fn(f64) -> bool| grid.iter().copied().find(|&s| !pred(s));

    let nonneg = first_violation(&|s| mu(s) >= -slack);
    let nonincreasing = first_violation(&|s| mu_prime(s) <= slack);
    let exp_dominated = first_violation(&|s| mu_prime(s) + delta * mu(s) <= slack);
    let amplitudes_ok = terms.iter().all(|t| t.amplitude >= 0.0);

    let checks = vec![
        ConditionCheck {
            condition: "μ(s)∈C¹(ℝ⁺)∩L¹(ℝ⁺): every decay rate δ_i > 0".into(),
            passed: true,
            offending_s: None,
        },
        ConditionCheck {
            condition: "μ(s) ≥ 0: every amplitude c_i ≥ 0".into(),
            passed: amplitudes_ok && nonneg.is_none(),
            offending_s: nonneg.or(if amplitudes_ok { None } else { Some(0.0) }),
        },
        ConditionCheck {
            condition: "μ'(s) ≤ 0".into(),
            passed: nonincreasing.is_none(),
            offending_s: nonincreasing,
        },
        ConditionCheck {
            condition: "μ'(s)+δμ(s) ≤ 0".into(),
            passed: exp_dominated.is_none(),
            offending_s: exp_dominated,
        },
        ConditionCheck {
            condition: format!("tail mass ∫_{{s_max}}^∞ μ ≤ {:e}", options.tail_tol),
            passed: tail_mass <= options.tail_tol * (1.0 + 1e-9),
            offending_s: None,
        },
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        checks,
        delta,
        s_max,
        tail_mass,
        passed,
    })
}

/// Kernel tail `k(s) = ∫_s^∞ μ(r) dr`.
pub fn kernel_tail(spec: &KernelSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("kernel tail requested at s = {s} < 0")));
    }
    Ok(tail_mass(spec.terms(), s))
}

/// Product-integration weights of `μ` on an age grid.
pub fn quadrature_weights(terms: &[ExpTerm], s_grid: &[f64]) -> Result<Vec<f64>> {
    check_terms(terms)?;
    check_grid(s_grid)?;
    let mut w = vec![0.0; s_grid.len()];
    for (j, [left, right]) in cell_weights(terms, s_grid).into_iter().enumerate() {
        w[j] += left;
        w[j + 1] += right;
    }
    Ok(w)
}

fn check_terms(terms: &[ExpTerm]) -> Result<()> {
    if terms.is_empty() {
        return Err(Error::InvalidKernel("kernel has no terms".into()));
    }
    for t in terms {
        if !t.amplitude.is_finite() || !t.rate.is_finite() {
            return Err(Error::InvalidKernel(format!("non-finite term {t:?}")));
        }
        if t.rate <= 0.0 {
            return Err(Error::InvalidKernel(format!(
                "condition μ(s)∈C¹(ℝ⁺)∩L¹(ℝ⁺) fails: decay rate {} ≤ 0 is not integrable",
                t.rate
            )));
        }
    }
    Ok(())
}

fn check_grid(s_grid: &[f64]) -> Result<()> {
    if s_grid.len() < 2 {
        return Err(Error::InvalidKernel("age grid needs at least two nodes".into()));
    }
    if s_grid[0] != 0.0 {
        return Err(Error::InvalidKernel("age grid must start at s = 0".into()));
    }
    if let Some(j) = s_grid.windows(2).position(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidKernel(format!(
            "age grid is not strictly increasing at node {}",
            j + 1
        )));
    }
    Ok(())
}

fn min_rate(terms: &[ExpTerm]) -> f64 {
    terms.iter().map(|t| t.rate).fold(f64::INFINITY, f64::min)
}

fn tail_mass(terms: &[ExpTerm], s: f64) -> f64 {
    terms
        .iter()
        .map(|t| t.amplitude * (-t.rate * s).exp() / t.rate)
        .sum()
}

/// Smallest `s_max` for which each term leaves at most `tol / n` behind.
fn choose_s_max(terms: &[ExpTerm], tol: f64) -> f64 {
    let n = terms.len() as f64;
    let s = terms
        .iter()
        .filter(|t| t.amplitude > 0.0)
        .map(|t| ((t.amplitude / t.rate) * n / tol).ln() / t.rate)
        .fold(0.0, f64::max);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn build_grid(s_max: f64, intervals: usize, kind: GridKind) -> Result<Vec<f64>> {
    if intervals < 1 {
        return Err(Error::InvalidKernel("kernel.s_points must be at least 1".into()));
    }
    let n = intervals as f64;
    let grid = match kind {
        GridKind::Uniform => (0..=intervals).map(|j| s_max * j as f64 / n).collect(),
        GridKind::Geometric => {
            let denom = GEOMETRIC_STRETCH.exp_m1();
            (0..=intervals)
                .map(|j| s_max * (GEOMETRIC_STRETCH * j as f64 / n).exp_m1() / denom)
                .collect::<Vec<_>>()
        }
    };
    let mut grid = grid;
    grid[intervals] = s_max;
    Ok(grid)
}

/// `(1 - e^{-y}) / y`.
fn phi1(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        1.0 - y / 2.0 + y * y / 6.0 - y * y * y / 24.0
    } else {
        -(-y).exp_m1() / y
    }
}

/// `(1 - e^{-y}(1 + y)) / y²`.
fn phi2(y: f64) -> f64 {
    if y.abs() < 1e-3 {
        0.5 - y / 3.0 + y * y / 8.0 - y * y * y / 30.0
    } else {
        (-(-y).exp_m1() - y * (-y).exp()) / (y * y)
    }
}

fn cell_weights(terms: &[ExpTerm], s_grid: &[f64]) -> Vec<[f64; 2]> {
    s_grid
        .windows(2)
        .map(|p| {
            let (a, h) = (p[0], p[1] - p[0]);
            terms.iter().fold([0.0, 0.0], |[l, r], t| {
                let base = t.amplitude * (-t.rate * a).exp() * h;
                let y = t.rate * h;
                let right = base * phi2(y);
                let left = base * (phi1(y) - phi2(y));
                [l + left, r + right]
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> Vec<ExpTerm> {
        vec![ExpTerm::new(1.0, 1.0)]
    }

    #[test]
    fn single_exponential_passes_with_unit_delta() {
        let report = validate_kernel(&exp1(), &GridOptions::default()).unwrap();
        assert!(report.passed);
        assert_eq!(report.delta, 1.0);
    }

    #[test]
    fn delta_is_the_slowest_rate() {
        let terms = vec![ExpTerm::new(1.0, 1.0), ExpTerm::new(2.0, 3.0)];
        let report = validate_kernel(&terms, &GridOptions::default()).unwrap();
        assert!(report.passed);
        assert_eq!(report.delta, 1.0);
        assert!(report.tail_mass <= DEFAULT_TAIL_TOL);
    }

    #[test]
    fn negative_rate_is_rejected() {
        let err = validate_kernel(&[ExpTerm::new(1.0, -0.5)], &GridOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidKernel(ref m) if m.contains("L¹")));
    }

    #[test]
    fn empty_terms_rejected() {
        assert!(matches!(
            validate_kernel(&[], &GridOptions::default()),
            Err(Error::InvalidKernel(_))
        ));
    }

    #[test]
    fn negative_amplitude_fails_nonnegativity() {
        let terms = vec![ExpTerm::new(1.0, 1.0), ExpTerm::new(-2.0, 0.5)];
        let report = validate_kernel(&terms, &GridOptions::default()).unwrap();
        assert!(!report.passed);
        assert!(report.failures().any(|c| c.condition.starts_with("μ(s) ≥ 0")));
        assert!(KernelSpec::new(terms, GridOptions::default()).is_err());
    }

    #[test]
    fn tail_closed_forms() {
        let k = KernelSpec::new(exp1(), GridOptions::default()).unwrap();
        assert!((kernel_tail(&k, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let s = 8.0 * 10f64.ln();
        assert!((kernel_tail(&k, s).unwrap() - 1e-8).abs() < 1e-20);
        let k2 = KernelSpec::new(vec![ExpTerm::new(2.0, 2.0)], GridOptions::default()).unwrap();
        assert!((kernel_tail(&k2, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(kernel_tail(&k, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn s_max_matches_log_rule() {
        let k = KernelSpec::new(exp1(), GridOptions::default()).unwrap();
        assert!((k.s_max() - 1e8f64.ln()).abs() < 1e-12);
        assert_eq!(k.n_nodes(), DEFAULT_S_POINTS + 1);
    }

    #[test]
    fn weights_reproduce_truncated_mass() {
        let grid: Vec<f64> = (0..=512).map(|j| 18.42 * j as f64 / 512.0).collect();
        let w = quadrature_weights(&exp1(), &grid).unwrap();
        let sum: f64 = w.iter().sum();
        let exact = 1.0 - (-18.42f64).exp();
        assert!(((sum - exact) / exact).abs() < 1e-6, "{sum} vs {exact}");
        assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn second_moment_is_gamma_three() {
        let grid: Vec<f64> = (0..=2048).map(|j| 18.42 * j as f64 / 2048.0).collect();
        let k = KernelSpec::with_grid(exp1(), grid, 1e-8).unwrap();
        let s2: Vec<f64> = k.s_grid().iter().map(|s| s * s).collect();
        let q = k.quadrature(&s2).unwrap();
        assert!(((q - 2.0) / 2.0).abs() < 1e-4, "{q}");
        let ones = vec![1.0; k.n_nodes()];
        assert_eq!(k.quadrature(&ones).unwrap(), k.quad_weights().iter().sum::<f64>());
    }

    #[test]
    fn non_monotone_grid_rejected() {
        let grid = vec![0.0, 1.0, 0.5, 2.0];
        assert!(matches!(quadrature_weights(&exp1(), &grid), Err(Error::InvalidKernel(_))));
    }

    #[test]
    fn geometric_grid_clusters_near_zero() {
        let opts = GridOptions {
            grid: GridKind::Geometric,
            ..GridOptions::default()
        };
        let k = KernelSpec::new(exp1(), opts).unwrap();
        let g = k.s_grid();
        assert!(g[1] - g[0] < g[g.len() - 1] - g[g.len() - 2]);
        let sum: f64 = k.quad_weights().iter().sum();
        assert!((sum / k.truncated_mass() - 1.0).abs() < 1e-12);
    }
}
