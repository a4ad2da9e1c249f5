//! Energies, absorbing-ball constants, the Gronwall-type bound and tail energies.

mod checks;

pub use checks::{dafermos_inequality_report, dependence_check, DafermosReport, DependenceReport, DependenceSample};

use serde::Serialize;

use crate::basis::ModeBasis;
use crate::error::{Error, Result};
use crate::field::{dafermos_pairing, History, State};
use crate::kernel::KernelSpec;
use crate::nonlinear::{potential_integral, NonlinearitySpec};
use crate::solver::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub u_l2_sq: f64,
    pub u_h1_sq: f64,
    pub u_h2_sq: f64,
    pub eta_mu1_sq: f64,
    pub eta_mu2_sq: f64,
    pub e1: f64,
    pub e2: f64,
    pub lyapunov: f64,
    /// `(η, ∂_s η)_{μ,1}`.
    pub pairing_mu1: f64,
    /// `(m, tail energy above rank m)` per configured cutoff.
    pub tails: Vec<(usize, f64)>,
}

/// `Σ_j w_j η_k(s_j)²` for each mode.
fn history_mode_norms(h: &History, kernel: &KernelSpec) -> Vec<f64> {
    let w = kernel.quad_weights();
    h.rows()
        .map(|row| row.iter().zip(w).map(|(e, w)| w * e * e).sum())
        .collect()
}

fn check_inputs(u: &State, h: &History, kernel: &KernelSpec, basis: &ModeBasis) -> Result<()> {
    basis.check_modes(&u.coeffs)?;
    if h.n_modes() != basis.len() || h.n_nodes() != kernel.n_nodes() {
        return Err(Error::Shape(format!(
            "history of shape {}×{} for {} modes and {} ages",
            h.n_modes(),
            h.n_nodes(),
            basis.len(),
            kernel.n_nodes()
        )));
    }
    Ok(())
}

/// Energy record of `(u, η)` at time `t`.
pub fn energy(
    u: &State,
    h: &History,
    kernel: &KernelSpec,
    basis: &ModeBasis,
    nl: &NonlinearitySpec,
    t: f64,
    cutoffs: &[usize],
) -> Result<EnergyRecord> {
    check_inputs(u, h, kernel, basis)?;
    for &m in cutoffs {
        basis.check_cutoff(m)?;
    }
    let lambdas = basis.eigenvalues();
    let eta = history_mode_norms(h, kernel);
    // Per-mode contributions to ‖w‖₁² + ‖w‖₂² + ‖ξ‖²_{μ,2}.
    let tail_terms: Vec<f64> = u
        .coeffs
        .iter()
        .zip(lambdas)
        .zip(&eta)
        .map(|((c, l), e)| (l + l * l) * c * c + l * l * e)
        .collect();
    let tails = cutoffs
        .iter()
        .map(|&m| (m, tail_terms[m..].iter().sum()))
        .collect();

    let u_l2_sq = basis.sobolev_norm_sq(&u.coeffs, 0);
    let u_h1_sq = basis.sobolev_norm_sq(&u.coeffs, 1);
    let u_h2_sq = basis.sobolev_norm_sq(&u.coeffs, 2);
    let eta_mu1_sq: f64 = eta.iter().zip(lambdas).map(|(e, l)| l * e).sum();
    let eta_mu2_sq: f64 = eta.iter().zip(lambdas).map(|(e, l)| l * l * e).sum();
    let potential = if u.coeffs.iter().all(|&c| c == 0.0) {
        0.0
    } else {
        potential_integral(nl, &u.coeffs, basis)?
    };
    Ok(EnergyRecord {
        t,
        u_l2_sq,
        u_h1_sq,
        u_h2_sq,
        eta_mu1_sq,
        eta_mu2_sq,
        e1: u_l2_sq + u_h1_sq + eta_mu1_sq,
        e2: u_h1_sq + u_h2_sq + eta_mu2_sq,
        lyapunov: u_h1_sq - 2.0 * potential,
        pairing_mu1: dafermos_pairing(h, kernel, basis, 1)?,
        tails,
    })
}

/// `‖w‖₁² + ‖w‖₂² + ‖ξ‖²_{μ,2}` for the parts of `(u, η)` above rank `m`.
pub fn tail_energy(u: &State, h: &History, m: usize, kernel: &KernelSpec, basis: &ModeBasis) -> Result<f64> {
    check_inputs(u, h, kernel, basis)?;
    let (_, w) = basis.project_split(&u.coeffs, m)?;
    let eta = history_mode_norms(h, kernel);
    let xi: f64 = eta[m..]
        .iter()
        .zip(&basis.eigenvalues()[m..])
        .map(|(e, l)| l * l * e)
        .sum();
    Ok(basis.sobolev_norm_sq(&w, 1) + basis.sobolev_norm_sq(&w, 2) + xi)
}

/// `C(ν) = e^ν / (1 - e^{-ν})`.
pub fn gronwall_constant(nu: f64) -> f64 {
    nu.exp() / -(-nu).exp_m1()
}

/// `(1/σ)φ(τ)e^{-ε(t-τ)} + (1/σ)m₁C(ε) + (m₂C(εσ))^{1/σ}`.
pub fn gronwall_bound(phi_tau: f64, eps: f64, sigma: f64, m1: f64, m2: f64, elapsed: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::Domain(format!("σ = {sigma} is outside (0, 1]")));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("ε = {eps} is not positive")));
    }
    if elapsed < 0.0 {
        return Err(Error::Domain(format!("elapsed time {elapsed} is negative")));
    }
    Ok(phi_tau * (-eps * elapsed).exp() / sigma
        + m1 * gronwall_constant(eps) / sigma
        + (m2 * gronwall_constant(eps * sigma)).powf(1.0 / sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorbingEstimate {
    pub lambda1: f64,
    pub nu: f64,
    pub c1: f64,
    pub gamma: f64,
    pub volume: f64,
    pub alpha1: f64,
    pub beta2: f64,
    pub beta: f64,
    pub sigma: f64,
    /// `|f|₂²`.
    pub m1: f64,
    /// Bound on the initial `E₁`.
    pub m1_bound: f64,
    pub rho1_sq: f64,
    /// Entry time into the `E₁` ball; `None` when the ball degenerates to the origin.
    pub t0: Option<f64>,
    pub m2: Option<f64>,
    pub c2: Option<f64>,
    pub rho2_sq: Option<f64>,
}

impl AbsorbingEstimate {
    /// `2c₁|Ω| + |f|₂²/λ₁`.
    pub fn source(&self) -> f64 {
        2.0 * self.c1 * self.volume + self.m1 / self.lambda1
    }

    /// Completes the second ball from a calibrated `m₂`.
    pub fn with_m2(mut self, m2: f64) -> Self {
        let c2 = self.m1 * gronwall_constant(self.beta2) / self.sigma
            + (m2 * gronwall_constant(self.beta2 * self.sigma)).powf(1.0 / self.sigma);
        self.m2 = Some(m2);
        self.c2 = Some(c2);
        self.rho2_sq = Some(2.0 * c2);
        self
    }

    /// Smallest `m₂` for which `E₂(t) ≤ (1/σ)E₂(t₀)e^{-β₂(t-t₀)} + C₂` holds on the samples.
    pub fn fit_m2(&self, samples: &[(f64, f64)], t0: f64) -> f64 {
        let Some(&(_, e2_t0)) = samples.iter().find(|(t, _)| *t >= t0) else {
            return 0.0;
        };
        let required = samples
            .iter()
            .filter(|(t, _)| *t >= t0)
            .map(|&(t, e2)| e2 - e2_t0 * (-self.beta2 * (t - t0)).exp() / self.sigma)
            .fold(0.0, f64::max);
        let excess = required - self.m1 * gronwall_constant(self.beta2) / self.sigma;
        if excess <= 0.0 {
            0.0
        } else {
            excess.powf(self.sigma) / gronwall_constant(self.beta2 * self.sigma)
        }
    }

    /// `(1/β₂) ln(ρ₂²/ε²)`, the wait after `t₁` for the tail to fall below `(1 + 1/β₂)ε²`.
    pub fn tail_wait(&self, eps: f64) -> Option<f64> {
        self.rho2_sq
            .map(|rho2| ((rho2 / (eps * eps)).ln() / self.beta2).max(0.0))
    }
}

/// Absorbing-ball constants for `cfg` with initial energies bounded by `m1_bound`.
pub fn absorbing_estimate(cfg: &SimConfig, m1_bound: f64) -> AbsorbingEstimate {
    let lambda1 = cfg.basis.lambda1();
    let nl = &cfg.nonlinearity;
    let gamma = cfg.kernel.gamma();
    let ratio = lambda1 / (1.0 + lambda1);
    let alpha1 = (ratio * nl.nu).min(gamma);
    let beta2 = ratio.min(gamma);
    let sigma = 1.0 - nl.beta / 5.0;
    let m1 = cfg.forcing.iter().map(|f| f * f).sum();
    let mut est = AbsorbingEstimate {
        lambda1,
        nu: nl.nu,
        c1: nl.c1,
        gamma,
        volume: cfg.basis.domain().volume(),
        alpha1,
        beta2,
        beta: nl.beta,
        sigma,
        m1,
        m1_bound,
        rho1_sq: 0.0,
        t0: None,
        m2: None,
        c2: None,
        rho2_sq: None,
    };
    let source = est.source();
    est.rho1_sq = 2.0 * source / alpha1;
    if source > 0.0 {
        est.t0 = Some(((m1_bound * alpha1 / source).ln() / alpha1).max(0.0));
    }
    est
}
