//! Dirichlet sine eigenbasis of `A = -Δ` on a box.
//!
//! Modes are stored in eigenvalue order (lexicographic on the multi-index for
//! ties) with the orthonormal normalization `ω_k(x) = Π_i √(2/L_i) sin(k_i π x_i / L_i)`,
//! so the Euclidean norm of a coefficient vector is the `L²(Ω)` norm.
//!
//! Transforms go through an interior collocation grid `x_j = j L / (n + 1)`,
//! `j = 1..n`, one axis at a time. The forward transform is the trapezoid rule,
//! which is exact for sine products up to total frequency `2(n + 1) - 1`; with
//! `n ≥ 2m` this dealiases cubic nonlinearities of band-limited fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lengths: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 3 {
            return Err(Error::Domain(format!(
                "box must have 1 to 3 dimensions, got {}",
                lengths.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Domain(format!("box length {l} is not positive")));
        }
        Ok(Self { lengths })
    }

    /// The cube `(0, π)^dims`.
    pub fn pi_cube(dims: usize) -> Self {
        Self::new(vec![std::f64::consts::PI; dims]).expect("valid dimension")
    }

    pub fn dims(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }
}

/// Dense per-axis synthesis/analysis pair.
#[derive(Debug, Clone, PartialEq)]
struct AxisTransform {
    modes: usize,
    points: usize,
    // points × modes, row-major: ω_k(x_j)
    synth: Vec<f64>,
    // modes × points, row-major: h ω_k(x_j)
    analysis: Vec<f64>,
}

impl AxisTransform {
    fn identity() -> Self {
        Self {
            modes: 1,
            points: 1,
            synth: vec![1.0],
            analysis: vec![1.0],
        }
    }

    fn sine(length: f64, modes: usize, points: usize) -> Self {
        let h = length / (points + 1) as f64;
        let norm = (2.0 / length).sqrt();
        let mut synth = vec![0.0; points * modes];
        let mut analysis = vec![0.0; modes * points];
        for j in 0..points {
            let x = (j + 1) as f64 * h;
            for k in 0..modes {
                let v = norm * ((k + 1) as f64 * std::f64::consts::PI * x / length).sin();
                synth[j * modes + k] = v;
                analysis[k * points + j] = h * v;
            }
        }
        Self {
            modes,
            points,
            synth,
            analysis,
        }
    }

    fn weight(&self, length: Option<f64>) -> f64 {
        length.map_or(1.0, |l| l / (self.points + 1) as f64)
    }
}

/// Applies `matrix` (rows × cols) along `axis` of a row-major 3-tensor.
fn apply_axis(data: &[f64], shape: [usize; 3], axis: usize, matrix: &[f64], rows: usize) -> (Vec<f64>, [usize; 3]) {
    let cols = shape[axis];
    debug_assert_eq!(matrix.len(), rows * cols);
    let mut out_shape = shape;
    out_shape[axis] = rows;
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        for r in 0..rows {
            let mrow = &matrix[r * cols..(r + 1) * cols];
            let dst = &mut out[(o * rows + r) * inner..(o * rows + r + 1) * inner];
            for (c, &m) in mrow.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let src = &data[(o * cols + c) * inner..(o * cols + c + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
    }
    (out, out_shape)
}

/// One retained eigenmode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// 1-based multi-index; unused axes hold 1.
    pub index: [usize; 3],
    pub eigenvalue: f64,
    tensor_pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    domain: BoxDomain,
    modes_per_dim: Vec<usize>,
    collocation: Vec<usize>,
    modes: Vec<Mode>,
    eigenvalues: Vec<f64>,
    axes: [AxisTransform; 3],
}

impl ModeBasis {
    /// `collocation` defaults to `2 m_i + 1` points per axis.
    pub fn new(domain: BoxDomain, modes_per_dim: Vec<usize>, collocation: Option<Vec<usize>>) -> Result<Self> {
        let d = domain.dims();
        if modes_per_dim.len() != d {
            return Err(Error::Shape(format!(
                "{} mode counts for a {d}-dimensional box",
                modes_per_dim.len()
            )));
        }
        if modes_per_dim.contains(&0) {
            return Err(Error::Domain("every axis needs at least one mode".into()));
        }
        let collocation = collocation.unwrap_or_else(|| modes_per_dim.iter().map(|m| 2 * m + 1).collect());
        if collocation.len() != d {
            return Err(Error::Shape(format!(
                "{} collocation counts for a {d}-dimensional box",
                collocation.len()
            )));
        }
        for (i, (&n, &m)) in collocation.iter().zip(&modes_per_dim).enumerate() {
            if n < 2 * m {
                return Err(Error::Domain(format!(
                    "axis {i}: {n} collocation points cannot dealias {m} modes (need at least {})",
                    2 * m
                )));
            }
        }

        let mut axes = [AxisTransform::identity(), AxisTransform::identity(), AxisTransform::identity()];
        for i in 0..d {
            axes[i] = AxisTransform::sine(domain.lengths()[i], modes_per_dim[i], collocation[i]);
        }

        let m3 = [axes[0].modes, axes[1].modes, axes[2].modes];
        let mut modes = Vec::with_capacity(m3.iter().product());
        for a in 0..m3[0] {
            for b in 0..m3[1] {
                for c in 0..m3[2] {
                    let index = [a + 1, b + 1, c + 1];
                    let eigenvalue = (0..d)
                        .map(|i| {
                            let q = index[i] as f64 * std::f64::consts::PI / domain.lengths()[i];
                            q * q
                        })
                        .sum();
                    modes.push(Mode {
                        index,
                        eigenvalue,
                        tensor_pos: (a * m3[1] + b) * m3[2] + c,
                    });
                }
            }
        }
        // Stable sort keeps the lexicographic enumeration order among ties.
        modes.sort_by(|x, y| x.eigenvalue.total_cmp(&y.eigenvalue));
        let eigenvalues = modes.iter().map(|m| m.eigenvalue).collect();

        Ok(Self {
            domain,
            modes_per_dim,
            collocation,
            modes,
            eigenvalues,
            axes,
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn modes_per_dim(&self) -> &[usize] {
        &self.modes_per_dim
    }

    pub fn collocation(&self) -> &[usize] {
        &self.collocation
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Eigenvalues in storage order (nondecreasing).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `λ_k = Σ (k_i π / L_i)²` for a 1-based multi-index.
    pub fn eigenvalue(&self, k: &[usize]) -> Result<f64> {
        if k.len() != self.domain.dims() {
            return Err(Error::Index(format!(
                "multi-index of length {} for a {}-dimensional box",
                k.len(),
                self.domain.dims()
            )));
        }
        let mut lambda = 0.0;
        for (i, (&ki, &mi)) in k.iter().zip(&self.modes_per_dim).enumerate() {
            if ki < 1 || ki > mi {
                return Err(Error::Index(format!("k[{i}] = {ki} outside 1..={mi}")));
            }
            let q = ki as f64 * std::f64::consts::PI / self.domain.lengths()[i];
            lambda += q * q;
        }
        Ok(lambda)
    }

    /// Storage position of a multi-index.
    pub fn position(&self, k: &[usize]) -> Result<usize> {
        self.eigenvalue(k)?;
        let mut full = [1usize; 3];
        full[..k.len()].copy_from_slice(k);
        Ok(self
            .modes
            .iter()
            .position(|m| m.index == full)
            .expect("validated index is retained"))
    }

    /// Number of collocation nodes.
    pub fn grid_len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    /// Cell volume of the collocation quadrature.
    pub fn grid_weight(&self) -> f64 {
        (0..3)
            .map(|i| self.axes[i].weight(self.domain.lengths().get(i).copied()))
            .product()
    }

    /// Collocation nodes along one axis.
    pub fn axis_points(&self, axis: usize) -> Vec<f64> {
        let l = self.domain.lengths()[axis];
        let n = self.collocation[axis];
        (1..=n).map(|j| j as f64 * l / (n + 1) as f64).collect()
    }

    fn mode_shape(&self) -> [usize; 3] {
        [self.axes[0].modes, self.axes[1].modes, self.axes[2].modes]
    }

    fn grid_shape(&self) -> [usize; 3] {
        [self.axes[0].points, self.axes[1].points, self.axes[2].points]
    }

    /// Inverse transform: mode coefficients to values on the collocation grid.
    pub fn to_grid(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_modes(coeffs)?;
        let mut data = vec![0.0; self.mode_shape().iter().product()];
        for (m, &c) in self.modes.iter().zip(coeffs) {
            data[m.tensor_pos] = c;
        }
        let mut shape = self.mode_shape();
        for axis in 0..self.domain.dims() {
            let a = &self.axes[axis];
            (data, shape) = apply_axis(&data, shape, axis, &a.synth, a.points);
        }
        Ok(data)
    }

    /// Forward transform: Galerkin coefficients `∫ v ω_k` of grid values, truncated
    /// to the retained band.
    pub fn from_grid(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.grid_len() {
            return Err(Error::Shape(format!(
                "{} grid values for a grid of {}",
                values.len(),
                self.grid_len()
            )));
        }
        let mut data = values.to_vec();
        let mut shape = self.grid_shape();
        for axis in 0..self.domain.dims() {
            let a = &self.axes[axis];
            (data, shape) = apply_axis(&data, shape, axis, &a.analysis, a.modes);
        }
        Ok(self.modes.iter().map(|m| data[m.tensor_pos]).collect())
    }

    /// `‖u‖_α² = Σ λ_k^α u_k²`.
    pub fn sobolev_norm_sq(&self, coeffs: &[f64], alpha: i32) -> f64 {
        coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(u, l)| l.powi(alpha) * u * u)
            .sum()
    }

    /// `‖u‖_α`; an empty coefficient vector has norm 0.
    pub fn sobolev_norm(&self, coeffs: &[f64], alpha: i32) -> f64 {
        self.sobolev_norm_sq(coeffs, alpha).sqrt()
    }

    /// `(P_m u, (I - P_m) u)` with `m` counted in eigenvalue order.
    pub fn project_split(&self, coeffs: &[f64], cutoff: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_modes(coeffs)?;
        self.check_cutoff(cutoff)?;
        let mut low = coeffs.to_vec();
        let mut high = coeffs.to_vec();
        low[cutoff..].iter_mut().for_each(|x| *x = 0.0);
        high[..cutoff].iter_mut().for_each(|x| *x = 0.0);
        Ok((low, high))
    }

    /// `λ_{m+1}`, the first eigenvalue above a rank-`m` projection.
    pub fn lambda_after(&self, cutoff: usize) -> Result<f64> {
        self.eigenvalues
            .get(cutoff)
            .copied()
            .ok_or_else(|| Error::Index(format!("no eigenvalue beyond rank {cutoff}")))
    }

    pub(crate) fn check_cutoff(&self, cutoff: usize) -> Result<()> {
        if cutoff > self.len() {
            return Err(Error::Index(format!(
                "cutoff {cutoff} exceeds basis size {}",
                self.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_modes(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for a basis of {} modes",
                coeffs.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn eigenvalue_examples() {
        let b3 = ModeBasis::new(BoxDomain::pi_cube(3), vec![2, 2, 2], None).unwrap();
        assert_eq!(b3.eigenvalue(&[1, 1, 1]).unwrap(), 3.0);
        let b1 = ModeBasis::new(BoxDomain::new(vec![1.0]).unwrap(), vec![3], None).unwrap();
        assert!((b1.eigenvalue(&[1]).unwrap() - PI * PI).abs() < 1e-12);
        let b2 = ModeBasis::new(BoxDomain::pi_cube(2), vec![3, 3], None).unwrap();
        assert!((b2.eigenvalue(&[2, 1]).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(b2.eigenvalue(&[4, 1]), Err(Error::Index(_))));
        assert!(matches!(b2.eigenvalue(&[0, 1]), Err(Error::Index(_))));
    }

    #[test]
    fn ties_break_lexicographically() {
        let b = ModeBasis::new(BoxDomain::pi_cube(2), vec![2, 2], None).unwrap();
        let idx: Vec<[usize; 3]> = b.modes().iter().map(|m| m.index).collect();
        assert_eq!(idx, vec![[1, 1, 1], [1, 2, 1], [2, 1, 1], [2, 2, 1]]);
        assert_eq!(b.lambda1(), 2.0);
    }

    #[test]
    fn single_sine_is_first_unit_vector() {
        let b = ModeBasis::new(BoxDomain::pi_cube(1), vec![4], None).unwrap();
        let grid: Vec<f64> = b.axis_points(0).iter().map(|x| (2.0 / PI).sqrt() * x.sin()).collect();
        let c = b.from_grid(&grid).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14);
        assert!(c[1..].iter().all(|x| x.abs() < 1e-14));
        let z = b.from_grid(&vec![0.0; b.grid_len()]).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn too_few_collocation_points_rejected() {
        let err = ModeBasis::new(BoxDomain::pi_cube(1), vec![8], Some(vec![15])).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let b = ModeBasis::new(BoxDomain::pi_cube(1), vec![4], None).unwrap();
        assert!(matches!(b.to_grid(&[1.0; 3]), Err(Error::Shape(_))));
        assert!(matches!(b.from_grid(&[1.0; 3]), Err(Error::Shape(_))));
    }

    #[test]
    fn norms_of_unit_mode_in_cube() {
        let b = ModeBasis::new(BoxDomain::pi_cube(3), vec![2, 2, 2], None).unwrap();
        let mut u = vec![0.0; b.len()];
        u[0] = 1.0;
        assert!((b.sobolev_norm(&u, 0) - 1.0).abs() < 1e-15);
        assert!((b.sobolev_norm(&u, 1) - 3f64.sqrt()).abs() < 1e-15);
        assert!((b.sobolev_norm(&u, 2) - 3.0).abs() < 1e-15);
        let zero = vec![0.0; b.len()];
        assert_eq!(b.sobolev_norm(&zero, 2), 0.0);
        // modes (1,1,1) with λ=3 and (1,1,2) with λ=6
        u[0] = 2.0;
        u[1] = 1.0;
        assert!((b.sobolev_norm_sq(&u, 1) - 18.0).abs() < 1e-12);
    }

    #[test]
    fn split_edge_cases() {
        let b = ModeBasis::new(BoxDomain::pi_cube(1), vec![5], None).unwrap();
        let u = vec![1.0, -2.0, 3.0, 0.5, 0.25];
        let (low, high) = b.project_split(&u, 5).unwrap();
        assert_eq!(low, u);
        assert!(high.iter().all(|&x| x == 0.0));
        let (low, high) = b.project_split(&u, 0).unwrap();
        assert!(low.iter().all(|&x| x == 0.0));
        assert_eq!(high, u);
        assert!(matches!(b.project_split(&u, 6), Err(Error::Index(_))));
        assert_eq!(b.lambda_after(2).unwrap(), 9.0);
    }
}
