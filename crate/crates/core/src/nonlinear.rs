//! Polynomial nonlinearities `g(u) = a₁u + a₂u² + a₃u³ + a₄u⁴` and their
//! growth and dissipation constants.

use serde::Serialize;

use crate::basis::ModeBasis;
use crate::error::{Error, Result};

pub const SCAN_BOUND: f64 = 1e3;
pub const SCAN_POINTS: usize = 1_000_000;
/// Smallest accepted dissipation margin, as a fraction of `λ₁`.
pub const MARGIN_FLOOR: f64 = 0.01;
pub const MAX_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearitySpec {
    /// `[a₁, a₂, a₃, a₄]`.
    pub coeffs: [f64; 4],
    pub degree: usize,
    pub beta: f64,
    pub growth_c: f64,
    pub nu: f64,
    pub c1: f64,
    pub lambda1: f64,
}

impl NonlinearitySpec {
    pub fn eval(&self, u: f64) -> f64 {
        let [a1, a2, a3, a4] = self.coeffs;
        u * (a1 + u * (a2 + u * (a3 + u * a4)))
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let [a1, a2, a3, a4] = self.coeffs;
        a1 + u * (2.0 * a2 + u * (3.0 * a3 + u * 4.0 * a4))
    }

    /// `G(u) = ∫₀^u g`.
    pub fn potential(&self, u: f64) -> f64 {
        let [a1, a2, a3, a4] = self.coeffs;
        u * u * (a1 / 2.0 + u * (a2 / 3.0 + u * (a3 / 4.0 + u * a4 / 5.0)))
    }

    pub fn is_linear(&self) -> bool {
        self.degree <= 1
    }
}

fn scan_points() -> impl Iterator<Item = f64> {
    let step = 2.0 * SCAN_BOUND / (SCAN_POINTS - 1) as f64;
    (0..SCAN_POINTS).map(move |i| -SCAN_BOUND + i as f64 * step)
}

/// Supremum of `f` over the scan interval: a uniform scan followed by two
/// levels of local refinement around the best point.
fn scan_sup(f: impl Fn(f64) -> f64) -> f64 {
    let mut step = 2.0 * SCAN_BOUND / (SCAN_POINTS - 1) as f64;
    let (mut best_u, mut best) = scan_points().fold((0.0, f64::MIN), |(bu, bv), u| {
        let v = f(u);
        if v > bv {
            (u, v)
        } else {
            (bu, bv)
        }
    });
    for _ in 0..2 {
        let lo = (best_u - step).max(-SCAN_BOUND);
        let hi = (best_u + step).min(SCAN_BOUND);
        let fine = (hi - lo) / 2000.0;
        for i in 0..=2000 {
            let u = lo + i as f64 * fine;
            let v = f(u);
            if v > best {
                best = v;
                best_u = u;
            }
        }
        step = fine;
    }
    best
}

/// Validates `g` given by power coefficients `[a₀, a₁, …]` against the growth and
/// dissipativity hypotheses for the first Dirichlet eigenvalue `lambda1`.
pub fn validate_nonlinearity(coeffs: &[f64], lambda1: f64) -> Result<NonlinearitySpec> {
    if !(lambda1 > 0.0) {
        return Err(Error::Domain(format!("λ₁ = {lambda1} is not positive")));
    }
    if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidNonlinearity(format!("coefficient {c} is not finite")));
    }
    let a0 = coeffs.first().copied().unwrap_or(0.0);
    if a0 != 0.0 {
        return Err(Error::InvalidNonlinearity(format!(
            "g(0) = {a0}, but g ∈ C(ℝ) with g(0) = 0 is required"
        )));
    }
    let degree = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
    if degree > MAX_DEGREE {
        return Err(Error::InvalidNonlinearity(format!(
            "degree {degree} violates the growth condition |g(u)| ≤ C(1+|u|^β) with β < 5"
        )));
    }
    let mut a = [0.0; 4];
    for (i, &c) in coeffs.iter().enumerate().skip(1).take(MAX_DEGREE) {
        a[i - 1] = c;
    }
    let lead = if degree == 0 { 0.0 } else { a[degree - 1] };
    let limsup_msg = "lim sup_{|u|→∞} g(u)/u < λ₁";
    if degree >= 2 && degree % 2 == 0 {
        return Err(Error::InvalidNonlinearity(format!(
            "even leading degree {degree} makes g(u)/u unbounded above, violating {limsup_msg}"
        )));
    }
    if degree == 3 && lead > 0.0 {
        return Err(Error::InvalidNonlinearity(format!(
            "positive leading coefficient {lead} of u³ violates {limsup_msg}"
        )));
    }
    if degree == 1 && lead >= lambda1 {
        return Err(Error::InvalidNonlinearity(format!(
            "slope {lead} ≥ λ₁ = {lambda1} violates {limsup_msg}"
        )));
    }

    let mut spec = NonlinearitySpec {
        coeffs: a,
        degree,
        beta: degree as f64,
        growth_c: 0.0,
        nu: 1.0,
        c1: 0.0,
        lambda1,
    };

    // sup g(u)/u, with the u → 0 limit a₁ included.
    let sup_ratio = scan_sup(|u| if u == 0.0 { a[0] } else { spec.eval(u) / u }).max(a[0]);
    let margin = lambda1 - sup_ratio;
    let floor = MARGIN_FLOOR * lambda1;
    if margin >= floor {
        spec.nu = margin.min(lambda1) / lambda1;
    } else {
        let keep = lambda1 - floor;
        if degree <= 1 {
            return Err(Error::InvalidNonlinearity(format!(
                "slope {} leaves a dissipation margin below {floor} (0.01·λ₁); no admissible (ν, c₁)",
                a[0]
            )));
        }
        spec.nu = MARGIN_FLOOR;
        spec.c1 = scan_sup(|u| u * spec.eval(u) - keep * u * u).max(0.0);
    }

    spec.growth_c = scan_sup(|u| {
        let growth = spec.eval(u).abs() / (1.0 + u.abs().powf(spec.beta));
        let slope = spec.derivative(u).abs() / (1.0 + u.powi(4));
        growth.max(slope)
    });
    Ok(spec)
}

/// Galerkin coefficients of `g(u)`: pointwise evaluation on the collocation grid,
/// forward transform, truncation to the retained band.
pub fn apply_nonlinearity(spec: &NonlinearitySpec, u: &[f64], basis: &ModeBasis) -> Result<Vec<f64>> {
    basis.check_modes(u)?;
    if spec.is_linear() {
        return Ok(u.iter().map(|c| spec.coeffs[0] * c).collect());
    }
    let mut grid = basis.to_grid(u)?;
    grid.iter_mut().for_each(|v| *v = spec.eval(*v));
    basis.from_grid(&grid)
}

/// `∫_Ω G(u) dx` by collocation quadrature.
pub fn potential_integral(spec: &NonlinearitySpec, u: &[f64], basis: &ModeBasis) -> Result<f64> {
    basis.check_modes(u)?;
    let grid = basis.to_grid(u)?;
    Ok(basis.grid_weight() * grid.iter().map(|&v| spec.potential(v)).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BoxDomain;
    use std::f64::consts::PI;

    #[test]
    fn negative_cubic_is_fully_dissipative() {
        let g = validate_nonlinearity(&[0.0, 0.0, 0.0, -1.0], 3.0).unwrap();
        assert_eq!(g.beta, 3.0);
        assert_eq!(g.nu, 1.0);
        assert_eq!(g.c1, 0.0);
    }

    #[test]
    fn margin_oracle_for_u_minus_cubic() {
        let g = validate_nonlinearity(&[0.0, 1.0, 0.0, -1.0], 3.0).unwrap();
        // independent scan of u g(u) - (λ₁ - ε) u² with ε = 2
        let worst = (-2000..=2000)
            .map(|i| i as f64 * 0.01)
            .map(|u| u * (u - u * u * u) - (3.0 - 2.0) * u * u)
            .fold(f64::MIN, f64::max);
        assert!(worst <= 1e-12);
        assert!((g.nu - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(g.c1, 0.0);
    }

    #[test]
    fn steep_linear_is_rejected() {
        let err = validate_nonlinearity(&[0.0, 4.0], 3.0).unwrap_err();
        assert!(err.to_string().contains("lim sup"));
    }

    #[test]
    fn structural_rejections() {
        assert!(validate_nonlinearity(&[1.0, -1.0], 3.0).unwrap_err().to_string().contains("g(0)"));
        assert!(validate_nonlinearity(&[0.0, 0.0, 0.0, 0.0, 0.0, -1.0], 3.0).is_err());
        assert!(validate_nonlinearity(&[0.0, 0.0, 1.0], 3.0).is_err());
        assert!(validate_nonlinearity(&[0.0, 0.0, 0.0, 0.0, -1.0], 3.0).is_err());
        assert!(validate_nonlinearity(&[0.0, 0.0, 0.0, 1.0], 3.0).is_err());
        assert!(validate_nonlinearity(&[0.0, 2.995], 3.0).is_err());
    }

    #[test]
    fn unstable_origin_gets_offset() {
        let g = validate_nonlinearity(&[0.0, 3.0, 0.0, -1.0], 1.0).unwrap();
        assert_eq!(g.nu, MARGIN_FLOOR);
        // sup (2.01 u² - u⁴) = 2.01² / 4
        assert!(g.c1 >= 2.01f64.powi(2) / 4.0 - 1e-12);
        assert!((g.c1 - 2.01f64.powi(2) / 4.0).abs() < 1e-9);
    }

    #[test]
    fn invariants_hold_on_scan() {
        let g = validate_nonlinearity(&[0.0, 0.5, 0.2, -0.7], 1.0).unwrap();
        for i in -5000..=5000 {
            let u = i as f64 * 0.2;
            assert!(g.eval(u).abs() <= g.growth_c * (1.0 + u.abs().powf(g.beta)) * (1.0 + 1e-12));
            assert!(g.derivative(u).abs() <= g.growth_c * (1.0 + u.powi(4)) * (1.0 + 1e-12));
            let bound = (g.lambda1 - g.nu * g.lambda1) * u * u + g.c1;
            assert!(u * g.eval(u) <= bound + 1e-9 * (1.0 + bound.abs()));
        }
    }

    fn line(m: usize) -> ModeBasis {
        ModeBasis::new(BoxDomain::pi_cube(1), vec![m], None).unwrap()
    }

    #[test]
    fn apply_examples() {
        let b = line(8);
        let cubic = validate_nonlinearity(&[0.0, 0.0, 0.0, -1.0], 1.0).unwrap();
        let zero = vec![0.0; 8];
        assert!(apply_nonlinearity(&cubic, &zero, &b).unwrap().iter().all(|&x| x == 0.0));

        let lin = validate_nonlinearity(&[0.0, -2.5], 1.0).unwrap();
        let u: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let gu = apply_nonlinearity(&lin, &u, &b).unwrap();
        assert!(gu.iter().zip(&u).all(|(g, x)| *g == -2.5 * x));

        // -(√(2/π) sin x)³ projected on √(2/π) sin(kx)
        let mut e1 = zero.clone();
        e1[0] = 1.0;
        let gu = apply_nonlinearity(&cubic, &e1, &b).unwrap();
        let n = 20000;
        let h = PI / n as f64;
        let c = (2.0 / PI).sqrt();
        for (k, &gk) in gu.iter().enumerate() {
            let direct: f64 = (1..n)
                .map(|i| {
                    let x = i as f64 * h;
                    -(c * x.sin()).powi(3) * c * ((k + 1) as f64 * x).sin() * h
                })
                .sum();
            assert!((gk - direct).abs() < 1e-8, "mode {k}");
        }
    }

    #[test]
    fn potential_examples() {
        let b = line(6);
        let cubic = validate_nonlinearity(&[0.0, 0.0, 0.0, -1.0], 1.0).unwrap();
        let mut u = vec![0.0; 6];
        assert_eq!(potential_integral(&cubic, &u, &b).unwrap(), 0.0);
        u[0] = 1.0;
        let p = potential_integral(&cubic, &u, &b).unwrap();
        assert!((p + 3.0 / (8.0 * PI)).abs() < 1e-12);
        let u2: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        assert!((potential_integral(&cubic, &u2, &b).unwrap() - 16.0 * p).abs() < 1e-12);
    }
}
