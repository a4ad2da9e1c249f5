use crate::error::{Error, Result};
use crate::kernel::ExpTerm;

/// Closed-form solution of the single-mode linear system with kernel `c e^{-δs}`:
/// `(1+λ)u̇ = -λu - λM + f`, `Ṁ = -δM + (c/δ)u`. Returns `(u(t), M(t))`.
pub fn linear_oracle_solve(lambda: f64, kernel: &[ExpTerm], f: f64, u0: f64, m0: f64, t: f64) -> Result<(f64, f64)> {
    let [term] = kernel else {
        return Err(Error::Unsupported(format!(
            "closed form needs a single exponential, got {} terms",
            kernel.len()
        )));
    };
    if !(lambda > 0.0) || !(term.rate > 0.0) || t < 0.0 {
        return Err(Error::Domain(format!(
            "need λ > 0, δ > 0 and t ≥ 0 (λ = {lambda}, δ = {}, t = {t})",
            term.rate
        )));
    }
    let (c, d) = (term.amplitude, term.rate);
    let r = lambda / (1.0 + lambda);
    let a = [[-r, -r], [c / d, -d]];
    let b = [f / (1.0 + lambda), 0.0];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    // x* = -A⁻¹b
    let xs = [
        -(a[1][1] * b[0] - a[0][1] * b[1]) / det,
        -(-a[1][0] * b[0] + a[0][0] * b[1]) / det,
    ];
    let y0 = [u0 - xs[0], m0 - xs[1]];
    let e = expm2(a, t);
    Ok((
        xs[0] + e[0][0] * y0[0] + e[0][1] * y0[1],
        xs[1] + e[1][0] * y0[0] + e[1][1] * y0[1],
    ))
}

/// Steady state `u* = f / (λ(1 + c/δ²))` of the forced single-mode system.
pub fn linear_steady_state(lambda: f64, term: ExpTerm, f: f64) -> f64 {
    f / (lambda * (1.0 + term.amplitude / (term.rate * term.rate)))
}

/// `e^{At}` for a real 2×2 matrix via `A = mI + B`, `B² = -det(B) I`.
fn expm2(a: [[f64; 2]; 2], t: f64) -> [[f64; 2]; 2] {
    let m = 0.5 * (a[0][0] + a[1][1]);
    let b = [[a[0][0] - m, a[0][1]], [a[1][0], a[1][1] - m]];
    let s2 = -(b[0][0] * b[1][1] - b[0][1] * b[1][0]);
    let (ch, sh) = if s2.abs() * t * t < 1e-8 {
        (1.0 + s2 * t * t / 2.0, t * (1.0 + s2 * t * t / 6.0))
    } else if s2 > 0.0 {
        let s = s2.sqrt();
        ((s * t).cosh(), (s * t).sinh() / s)
    } else {
        let w = (-s2).sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    };
    let g = (m * t).exp();
    [
        [g * (ch + sh * b[0][0]), g * sh * b[0][1]],
        [g * sh * b[1][0], g * (ch + sh * b[1][1])],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Classical RK4 on the 2×2 system with a tiny step.
    fn dense(lambda: f64, c: f64, d: f64, f: f64, u0: f64, m0: f64, t: f64) -> (f64, f64) {
        let rhs = |u: f64, m: f64| ((-lambda * u - lambda * m + f) / (1.0 + lambda), -d * m + c / d * u);
        let n = 20_000;
        let h = t / n as f64;
        let (mut u, mut m) = (u0, m0);
        for _ in 0..n {
            let k1 = rhs(u, m);
            let k2 = rhs(u + h / 2.0 * k1.0, m + h / 2.0 * k1.1);
            let k3 = rhs(u + h / 2.0 * k2.0, m + h / 2.0 * k2.1);
            let k4 = rhs(u + h * k3.0, m + h * k3.1);
            u += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            m += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (u, m)
    }

    #[test]
    fn matches_dense_integration() {
        for &(lambda, c, d, f, u0, m0) in &[
            (1.0, 1.0, 1.0, 0.0, 1.0, 0.0),
            (3.0, 2.0, 0.5, 0.7, -1.0, 0.3),
            (10.0, 0.1, 4.0, 1.0, 0.0, 0.0),
        ] {
            for t in [0.3, 2.0, 7.5] {
                let (u, m) = linear_oracle_solve(lambda, &[ExpTerm::new(c, d)], f, u0, m0, t).unwrap();
                let (ud, md) = dense(lambda, c, d, f, u0, m0, t);
                assert!((u - ud).abs() < 1e-10 && (m - md).abs() < 1e-10, "λ={lambda} t={t}");
            }
        }
    }

    #[test]
    fn unit_case_has_three_quarter_envelope() {
        // A = [[-1/2, -1/2], [1, -1]]: eigenvalues -3/4 ± i√7/4
        let k = [ExpTerm::new(1.0, 1.0)];
        let w = 7f64.sqrt() / 4.0;
        for t in [1.0, 4.0, 9.0] {
            let (u, _) = linear_oracle_solve(1.0, &k, 0.0, 1.0, 0.0, t).unwrap();
            let env = (-0.75 * t).exp();
            // u(t) = e^{-3t/4}(cos ωt + (1/4ω) sin ωt)
            let exact = env * ((w * t).cos() + 0.25 / w * (w * t).sin());
            assert!((u - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let (u, m) = linear_oracle_solve(2.0, &[ExpTerm::new(1.0, 1.0)], 0.0, 0.0, 0.0, 5.0).unwrap();
        assert_eq!((u, m), (0.0, 0.0));
    }

    #[test]
    fn forced_limit_is_steady_state() {
        let term = ExpTerm::new(2.0, 1.5);
        let (u, _) = linear_oracle_solve(1.0, &[term], 0.8, 0.0, 0.0, 200.0).unwrap();
        assert!((u - linear_steady_state(1.0, term, 0.8)).abs() < 1e-12);
    }

    #[test]
    fn multi_term_is_unsupported() {
        let k = [ExpTerm::new(1.0, 1.0), ExpTerm::new(1.0, 2.0)];
        assert!(matches!(
            linear_oracle_solve(1.0, &k, 0.0, 1.0, 0.0, 1.0),
            Err(Error::Unsupported(_))
        ));
    }
}
