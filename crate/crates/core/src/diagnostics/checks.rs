use serde::Serialize;

use crate::basis::ModeBasis;
use crate::error::{Error, Result};
use crate::field::{dafermos_pairing, history_norm, History};
use crate::kernel::KernelSpec;
use crate::solver::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceSample {
    pub t: f64,
    /// `‖u₁-u₂‖₁² + ‖u₁-u₂‖₂² + ‖η₁-η₂‖²_{μ,2}`.
    pub separation: f64,
    /// `∫₀^t (1 + ‖u₁‖₂^{2β+2} + ‖u₂‖₂^{2β+2})`.
    pub growth_integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceReport {
    pub samples: Vec<DependenceSample>,
    /// Smallest `C_h` with `S(t) ≤ S(0) exp(C_h ∫₀^t (1 + …))` on every sample.
    pub fitted_c_h: f64,
    /// `max_t [ln S(t) - ln S(0) - C_h ∫h]` for the supplied constant, if any.
    pub max_excess: Option<f64>,
    pub initial_separation: f64,
    pub final_separation: f64,
    pub max_separation_ratio: f64,
}

impl DependenceReport {
    pub fn holds(&self) -> bool {
        self.max_excess.is_none_or(|e| e <= 0.0)
    }
}

/// Compares two runs sampled at the same times with stored histories.
pub fn dependence_check(
    first: &Trajectory,
    second: &Trajectory,
    kernel: &KernelSpec,
    basis: &ModeBasis,
    beta: f64,
    c_h: Option<f64>,
) -> Result<DependenceReport> {
    if first.times != second.times {
        return Err(Error::Alignment(format!(
            "{} and {} samples at differing times",
            first.times.len(),
            second.times.len()
        )));
    }
    if first.histories.len() != first.times.len() || second.histories.len() != second.times.len() {
        return Err(Error::Alignment("history snapshots are missing".into()));
    }
    let power = beta + 1.0;
    let mut samples = Vec::with_capacity(first.times.len());
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..first.times.len() {
        let t = first.times[i];
        let (u1, u2) = (&first.states[i].coeffs, &second.states[i].coeffs);
        let du: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a - b).collect();
        let dh = first.histories[i].difference(&second.histories[i])?;
        let separation = basis.sobolev_norm_sq(&du, 1)
            + basis.sobolev_norm_sq(&du, 2)
            + history_norm(&dh, kernel, basis, 2)?;
        let h = 1.0 + basis.sobolev_norm_sq(u1, 2).powf(power) + basis.sobolev_norm_sq(u2, 2).powf(power);
        if let Some((tp, hp)) = prev {
            integral += 0.5 * (t - tp) * (h + hp);
        }
        prev = Some((t, h));
        samples.push(DependenceSample {
            t,
            separation,
            growth_integral: integral,
        });
    }

    let s0 = samples.first().map_or(0.0, |s| s.separation);
    let final_separation = samples.last().map_or(0.0, |s| s.separation);
    let mut fitted = 0.0f64;
    let mut max_ratio = 0.0f64;
    let mut max_excess: Option<f64> = None;
    if s0 > 0.0 {
        for s in &samples {
            let growth = (s.separation / s0).ln();
            max_ratio = max_ratio.max(s.separation / s0);
            if s.growth_integral > 0.0 {
                fitted = fitted.max(growth.max(0.0) / s.growth_integral);
            }
            if let Some(c) = c_h {
                let excess = growth - c * s.growth_integral;
                max_excess = Some(max_excess.map_or(excess, |m| m.max(excess)));
            }
        }
    } else if c_h.is_some() {
        max_excess = Some(if samples.iter().all(|s| s.separation == 0.0) {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok(DependenceReport {
        samples,
        fitted_c_h: fitted,
        max_excess,
        initial_separation: s0,
        final_separation,
        max_separation_ratio: max_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DafermosReport {
    /// `min_t [(η, η_s)_{μ,α} - (γ/2)‖η‖²_{μ,α}]`.
    pub min_margin: f64,
    pub max_norm: f64,
    pub samples: usize,
}

impl DafermosReport {
    /// Margin relative to the largest norm seen (0 for an all-zero run).
    pub fn relative_margin(&self) -> f64 {
        if self.max_norm > 0.0 {
            self.min_margin / self.max_norm
        } else {
            self.min_margin.min(0.0)
        }
    }
}

pub fn dafermos_inequality_report(
    histories: &[History],
    kernel: &KernelSpec,
    basis: &ModeBasis,
    alpha: i32,
) -> Result<DafermosReport> {
    let mut min_margin = f64::INFINITY;
    let mut max_norm = 0.0f64;
    for h in histories {
        let pairing = dafermos_pairing(h, kernel, basis, alpha)?;
        let norm = history_norm(h, kernel, basis, alpha)?;
        min_margin = min_margin.min(pairing - 0.5 * kernel.gamma() * norm);
        max_norm = max_norm.max(norm);
    }
    if histories.is_empty() {
        min_margin = 0.0;
    }
    Ok(DafermosReport {
        min_margin,
        max_norm,
        samples: histories.len(),
    })
}
