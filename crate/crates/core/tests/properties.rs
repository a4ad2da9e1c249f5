use std::f64::consts::PI;

use proptest::prelude::*;

use memdiff::basis::{BoxDomain, ModeBasis};
use memdiff::diagnostics::{energy, gronwall_bound, tail_energy};
use memdiff::field::{history_from_constant_past, State};
use memdiff::kernel::{kernel_tail, ExpTerm, GridOptions, KernelSpec};
use memdiff::nonlinear::validate_nonlinearity;

fn basis_2d(m: usize, n: usize) -> ModeBasis {
    ModeBasis::new(BoxDomain::new(vec![PI, 2.0]).unwrap(), vec![m, n], None).unwrap()
}

fn kernel() -> KernelSpec {
    KernelSpec::new(
        vec![ExpTerm::new(1.0, 1.0), ExpTerm::new(0.5, 2.5)],
        GridOptions {
            s_points: 64,
            ..Default::default()
        },
    )
    .unwrap()
}

/// `Σ_k c_k Π_i √(2/L_i) sin(k_i π x_i / L_i)` evaluated directly.
fn direct_sum(basis: &ModeBasis, coeffs: &[f64], x: &[f64]) -> f64 {
    let lengths = basis.domain().lengths();
    basis
        .modes()
        .iter()
        .zip(coeffs)
        .map(|(mode, c)| {
            let mut v = *c;
            for (axis, &l) in lengths.iter().enumerate() {
                v *= (2.0 / l).sqrt() * (mode.index[axis] as f64 * PI * x[axis] / l).sin();
            }
            v
        })
        .sum()
}

fn coeff_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_matches_direct_sum_and_inverts(coeffs in coeff_vec(12)) {
        let basis = basis_2d(4, 3);
        let grid = basis.to_grid(&coeffs).unwrap();
        let xs = basis.axis_points(0);
        let ys = basis.axis_points(1);
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                let direct = direct_sum(&basis, &coeffs, &[*x, *y]);
                prop_assert!((grid[i * ys.len() + j] - direct).abs() < 1e-12);
            }
        }
        let back = basis.from_grid(&grid).unwrap();
        for (a, b) in back.iter().zip(&coeffs) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn split_is_orthogonal_and_energies_add(coeffs in coeff_vec(12), cutoff in 0usize..=12) {
        let basis = basis_2d(4, 3);
        let (low, high) = basis.project_split(&coeffs, cutoff).unwrap();
        for alpha in 0..3 {
            let whole = basis.sobolev_norm_sq(&coeffs, alpha);
            let parts = basis.sobolev_norm_sq(&low, alpha) + basis.sobolev_norm_sq(&high, alpha);
            prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1.0));
        }
        let inner: f64 = low.iter().zip(&high).map(|(a, b)| a * b).sum();
        prop_assert_eq!(inner, 0.0);
    }

    #[test]
    fn poincare_inequalities(coeffs in coeff_vec(12)) {
        let basis = basis_2d(4, 3);
        let l1 = basis.lambda1();
        let n0 = basis.sobolev_norm_sq(&coeffs, 0);
        let n1 = basis.sobolev_norm_sq(&coeffs, 1);
        let n2 = basis.sobolev_norm_sq(&coeffs, 2);
        prop_assert!(l1 * n0 <= n1 * (1.0 + 1e-12));
        prop_assert!(l1 * n1 <= n2 * (1.0 + 1e-12));
    }

    #[test]
    fn kernel_tail_is_monotone(a in 0.0..30.0f64, b in 0.0..30.0f64) {
        let k = kernel();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(kernel_tail(&k, hi).unwrap() <= kernel_tail(&k, lo).unwrap());
    }

    #[test]
    fn tail_energy_nonincreasing_in_cutoff(coeffs in coeff_vec(12)) {
        let basis = basis_2d(4, 3);
        let k = kernel();
        let u = State::new(coeffs);
        let h = history_from_constant_past(&u, &k);
        let mut prev = f64::INFINITY;
        for m in 0..=12 {
            let t = tail_energy(&u, &h, m, &k, &basis).unwrap();
            prop_assert!(t <= prev);
            prev = t;
        }
        let nl = validate_nonlinearity(&[0.0, 0.0, 0.0, -1.0], basis.lambda1()).unwrap();
        let e2 = energy(&u, &h, &k, &basis, &nl, 0.0, &[]).unwrap().e2;
        prop_assert!((tail_energy(&u, &h, 0, &k, &basis).unwrap() - e2).abs() <= 1e-12 * e2.max(1.0));
    }

    #[test]
    fn gronwall_bound_monotone(
        phi in 0.0..10.0f64, m1 in 0.0..3.0f64, m2 in 0.0..3.0f64,
        t in 0.0..10.0f64, bump in 0.0..1.0f64,
    ) {
        let b = |p: f64, a: f64, c: f64, s: f64| gronwall_bound(p, 1.0, 0.5, a, c, s).unwrap();
        let base = b(phi, m1, m2, t);
        prop_assert!(b(phi + bump, m1, m2, t) >= base);
        prop_assert!(b(phi, m1 + bump, m2, t) >= base);
        prop_assert!(b(phi, m1, m2 + bump, t) >= base);
        prop_assert!(b(phi, m1, m2, t + bump) <= base);
    }
}
