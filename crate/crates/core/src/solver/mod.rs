//! Galerkin time stepping of the mode system
//! `(1+λ_k) u̇_k = -λ_k u_k - λ_k M_k + g_k(u) + f_k`, `M_k = ∫ μ η_k`.
//!
//! The `-Δu_t` term divides every linear rate by `1 + λ_k`, so the linear part
//! has rates in `(-1, 0)` regardless of the mode count and classical explicit
//! RK4 is stable for moderate steps without any implicit treatment.

mod oracle;

pub use oracle::{linear_oracle_solve, linear_steady_state};

use std::sync::Arc;

use crate::basis::ModeBasis;
use crate::diagnostics::{energy, EnergyRecord};
use crate::error::{Error, Result};
use crate::field::{dot, History, Interpolator, ShiftOperator, State};
use crate::kernel::KernelSpec;
use crate::nonlinear::{apply_nonlinearity, NonlinearitySpec};

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub basis: ModeBasis,
    pub kernel: KernelSpec,
    pub nonlinearity: NonlinearitySpec,
    pub forcing: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub seed: u64,
    pub interpolation: Arc<dyn Interpolator>,
    pub tail_cutoffs: Vec<usize>,
    /// Store the full history at every recorded sample.
    pub keep_histories: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("time.dt", format!("{} is not a positive step", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("time.t_end", format!("{} is not a valid horizon", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::config("time.record_every", "must be at least 1"));
        }
        if self.forcing.len() != self.basis.len() {
            return Err(Error::config(
                "forcing.modes",
                format!("{} coefficients for {} modes", self.forcing.len(), self.basis.len()),
            ));
        }
        if let Some(m) = self.tail_cutoffs.iter().find(|&&m| m > self.basis.len()) {
            return Err(Error::config(
                "tail.cutoffs",
                format!("cutoff {m} exceeds the {} retained modes", self.basis.len()),
            ));
        }
        Ok(())
    }

    /// Number of whole steps in `[0, t_end]`.
    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt * (1.0 + 1e-12)).floor() as u64
    }

    pub fn record(&self, u: &State, h: &History, t: f64) -> Result<EnergyRecord> {
        energy(u, h, &self.kernel, &self.basis, &self.nonlinearity, t, &self.tail_cutoffs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub steps: Vec<u64>,
    pub states: Vec<State>,
    pub records: Vec<EnergyRecord>,
    /// One per sample when `keep_histories` is set, otherwise empty.
    pub histories: Vec<History>,
    pub final_step: u64,
    pub final_state: State,
    pub final_history: History,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `η(s)` for `s ∈ [0, h]` from the quadratic `q` on the step with `q(0) = a`,
/// `q(h) = b` and `∫₀^h q = integral`, where `s` is the age at the step's end.
fn in_step_profile(a: f64, b: f64, integral: f64, h: f64, s: f64) -> f64 {
    let slope = (b - a) / h;
    let mean = (integral - a * h) / (h * h);
    let c = (3.0 * slope - 6.0 * mean) / h;
    let bb = 6.0 * mean - 2.0 * slope;
    let q = |r: f64| r * (a + r * (bb / 2.0 + r * c / 3.0));
    q(h) - q(h - s)
}

/// Precomputed transport data for one step size.
#[derive(Debug)]
pub struct Stepper<'a> {
    cfg: &'a SimConfig,
    half: ShiftOperator,
    full: ShiftOperator,
    lambdas: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a SimConfig) -> Result<Self> {
        cfg.validate()?;
        let interp = cfg.interpolation.as_ref();
        Ok(Self {
            cfg,
            half: ShiftOperator::new(&cfg.kernel, 0.5 * cfg.dt, interp),
            full: ShiftOperator::new(&cfg.kernel, cfg.dt, interp),
            lambdas: cfg.basis.eigenvalues().to_vec(),
        })
    }

    fn rhs(&self, u: &[f64], memory: &[f64]) -> Result<Vec<f64>> {
        let g = apply_nonlinearity(&self.cfg.nonlinearity, u, &self.cfg.basis)?;
        Ok(u.iter()
            .zip(memory)
            .zip(&g)
            .zip(&self.cfg.forcing)
            .zip(&self.lambdas)
            .map(|((((u, m), g), f), l)| (-l * (u + m) + g + f) / (1.0 + l))
            .collect())
    }

    /// Memory at a stage lying `shift.tau` after the step start, where the stage
    /// path has value `stage` and integral `increment` over the elapsed part.
    fn stage_memory(&self, shift: &ShiftOperator, pulled: &[f64], u0: &[f64], stage: &[f64], increment: &[f64]) -> Vec<f64> {
        let grid = self.cfg.kernel.s_grid();
        let w = self.cfg.kernel.quad_weights();
        (0..u0.len())
            .map(|k| {
                let low: f64 = (1..shift.first_shifted)
                    .map(|j| w[j] * in_step_profile(u0[k], stage[k], increment[k], shift.tau, grid[j]))
                    .sum();
                pulled[k] + shift.shifted_mass * increment[k] + low
            })
            .collect()
    }

    /// Advances `(u, η)` from time `t` by one step.
    pub fn advance(&self, u: &mut State, h: &mut History, t: f64) -> Result<()> {
        let cfg = self.cfg;
        let dt = cfg.dt;
        let n = u.len();
        if n != cfg.basis.len() || h.n_modes() != n || h.n_nodes() != cfg.kernel.n_nodes() {
            return Err(Error::Shape(format!(
                "state of {n} modes and history {}×{} for a {}-mode basis and {} ages",
                h.n_modes(),
                h.n_nodes(),
                cfg.basis.len(),
                cfg.kernel.n_nodes()
            )));
        }
        let w = cfg.kernel.quad_weights();
        let mut base = Vec::with_capacity(n);
        let mut pulled_half = Vec::with_capacity(n);
        let mut pulled_full = Vec::with_capacity(n);
        for row in h.rows() {
            base.push(dot(w, row));
            pulled_half.push(dot(&self.half.pulled_weights, row));
            pulled_full.push(dot(&self.full.pulled_weights, row));
        }

        let u0 = &u.coeffs;
        let axpy = |a: f64, x: &[f64]| -> Vec<f64> { u0.iter().zip(x).map(|(u, x)| u + a * x).collect() };
        let scale = |a: f64, x: &[f64]| -> Vec<f64> { x.iter().map(|x| a * x).collect() };

        let k1 = self.rhs(u0, &base)?;
        let s2 = axpy(0.5 * dt, &k1);
        let i2 = scale(0.5 * dt, u0);
        let k2 = self.rhs(&s2, &self.stage_memory(&self.half, &pulled_half, u0, &s2, &i2))?;
        let s3 = axpy(0.5 * dt, &k2);
        let i3 = scale(0.5 * dt, &s2);
        let k3 = self.rhs(&s3, &self.stage_memory(&self.half, &pulled_half, u0, &s3, &i3))?;
        let s4 = axpy(dt, &k3);
        let i4 = scale(dt, &s3);
        let k4 = self.rhs(&s4, &self.stage_memory(&self.full, &pulled_full, u0, &s4, &i4))?;

        let mut next = Vec::with_capacity(n);
        let mut integral = Vec::with_capacity(n);
        for k in 0..n {
            next.push(u0[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]));
            integral.push(dt / 6.0 * (u0[k] + 2.0 * s2[k] + 2.0 * s3[k] + s4[k]));
        }
        let t_new = t + dt;
        if let Some(k) = next.iter().position(|v| !v.is_finite()) {
            return Err(divergence(t_new, format!("mode {k} became non-finite")));
        }

        let grid = cfg.kernel.s_grid();
        let mut row_buf = vec![0.0; h.n_nodes()];
        for k in 0..n {
            let row = h.row_mut(k);
            self.full.apply(row, &mut row_buf);
            for j in 1..self.full.first_shifted {
                row_buf[j] = in_step_profile(u0[k], next[k], integral[k], dt, grid[j]);
            }
            for v in &mut row_buf[self.full.first_shifted..] {
                *v += integral[k];
            }
            row_buf[0] = 0.0;
            row.copy_from_slice(&row_buf);
        }
        if !h.is_finite() {
            return Err(divergence(t_new, "history became non-finite".into()));
        }
        u.coeffs = next;
        Ok(())
    }
}

fn divergence(t: f64, reason: String) -> Error {
    Error::Divergence {
        t,
        reason: format!("{reason}; an inadmissible nonlinearity or too large a step can blow up"),
        partial: None,
    }
}

/// One step of size `cfg.dt` from time 0.
pub fn step(u: &State, h: &History, cfg: &SimConfig) -> Result<(State, History)> {
    let stepper = Stepper::new(cfg)?;
    let (mut u, mut h) = (u.clone(), h.clone());
    stepper.advance(&mut u, &mut h, 0.0)?;
    Ok((u, h))
}

/// Runs from `(u0, h0)` at time 0 to `t_end`.
pub fn evolve(cfg: &SimConfig, u0: &State, h0: &History) -> Result<Trajectory> {
    evolve_from(cfg, u0, h0, 0)
}

/// Runs from `(u0, h0)` at step `start_step` (time `start_step·dt`) to `t_end`.
/// Samples are taken at step indices divisible by `record_every`, at the start
/// and at the final step, so a restart reproduces the tail of a longer run.
pub fn evolve_from(cfg: &SimConfig, u0: &State, h0: &History, start_step: u64) -> Result<Trajectory> {
    let stepper = Stepper::new(cfg)?;
    let (mut u, mut h) = (u0.clone(), h0.clone());
    let time_of = |n: u64| n as f64 * cfg.dt;
    let mut traj = Trajectory {
        times: Vec::new(),
        steps: Vec::new(),
        states: Vec::new(),
        records: Vec::new(),
        histories: Vec::new(),
        final_step: start_step,
        final_state: u.clone(),
        final_history: h.clone(),
    };
    let sample = |traj: &mut Trajectory, n: u64, u: &State, h: &History| -> Result<()> {
        let t = time_of(n);
        traj.records.push(cfg.record(u, h, t)?);
        traj.times.push(t);
        traj.steps.push(n);
        traj.states.push(u.clone());
        if cfg.keep_histories {
            traj.histories.push(h.clone());
        }
        Ok(())
    };
    sample(&mut traj, start_step, &u, &h)?;
    let last = cfg.n_steps().max(start_step);
    let every = cfg.record_every as u64;
    for n in start_step..last {
        if let Err(err) = stepper.advance(&mut u, &mut h, time_of(n)) {
            return Err(match err {
                Error::Divergence { t, reason, .. } => {
                    traj.final_step = n;
                    Error::Divergence {
                        t,
                        reason,
                        partial: Some(Box::new(traj)),
                    }
                }
                other => other,
            });
        }
        let done = n + 1;
        if done % every == 0 || done == last {
            sample(&mut traj, done, &u, &h)?;
        }
    }
    traj.final_step = last;
    traj.final_state = u;
    traj.final_history = h;
    Ok(traj)
}
