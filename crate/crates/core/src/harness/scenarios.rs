use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    initial_data, initial_history, member_seed, par_map, random_state, run_member, Assertion, ExperimentReport,
    MemberResult, RunOutcome,
};
use crate::config::{InitialHistory, RunConfig};
use crate::diagnostics::{
    absorbing_estimate, dependence_check, gronwall_bound, gronwall_constant, AbsorbingEstimate, EnergyRecord,
};
use crate::error::{Error, Result};
use crate::field::{memory_integral, History, State};
use crate::kernel::{validate_kernel, GridOptions};
use crate::output::Table;
use crate::plot::{plot_svg, PlotKind};
use crate::solver::{evolve, linear_oracle_solve, linear_steady_state, SimConfig};

/// Allowed relative growth of `E₁` between consecutive samples of a dissipative run.
const MONOTONE_SLACK: f64 = 1e-3;
/// Relative Dafermos deficit tolerated against the largest history norm.
const DAFERMOS_SLACK: f64 = 1e-3;
const EXIT_SLACK: f64 = 1e-3;

fn dafermos_assertion(records: &[EnergyRecord], gamma: f64) -> Assertion {
    let max_norm = records.iter().map(|r| r.eta_mu1_sq).fold(0.0, f64::max);
    let min_margin = records
        .iter()
        .map(|r| r.pairing_mu1 - 0.5 * gamma * r.eta_mu1_sq)
        .fold(f64::INFINITY, f64::min);
    let min_margin = if records.is_empty() { 0.0 } else { min_margin };
    Assertion::new(
        "dafermos",
        min_margin >= -DAFERMOS_SLACK * max_norm,
        format!("min pairing margin {min_margin:e}, max history norm {max_norm:e}"),
    )
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Exponential decay rate of `E₁` fitted over every positive sample.
fn decay_rate(records: &[EnergyRecord]) -> f64 {
    let (ts, ls): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.e1 > 0.0)
        .map(|r| (r.t, r.e1.ln()))
        .unzip();
    -slope(&ts, &ls)
}

fn first_time(records: &[EnergyRecord], from: f64, pred: impl Fn(&EnergyRecord) -> bool) -> Option<usize> {
    records.iter().position(|r| r.t >= from && pred(r))
}

/// Standard per-member bookkeeping: blow-up, Dafermos margin and energy extremes.
fn member_from(index: usize, seed: u64, run: &RunOutcome, sim: &SimConfig) -> MemberResult {
    let mut m = MemberResult::new(index, seed);
    if let Some((t, reason)) = &run.blow_up {
        m.blow_up = Some(*t);
        m.error = Some(format!("diverged at t = {t}: {reason}"));
    }
    m.assertions.push(dafermos_assertion(&run.records, sim.kernel.gamma()));
    if let (Some(first), Some(last)) = (run.records.first(), run.records.last()) {
        m.values.insert("e1_initial".into(), first.e1);
        m.values.insert("e1_final".into(), last.e1);
        m.values.insert("e2_initial".into(), first.e2);
        m.values.insert("e2_final".into(), last.e2);
    }
    m
}

pub fn run_simulate(cfg: &RunConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("simulate", cfg.seed());
    let (u0, h0) = initial_data(cfg, cfg.seed())?;
    let run = run_member(&cfg.sim, &u0, &h0)?;
    let mut member = member_from(0, cfg.seed(), &run, &cfg.sim);
    let est = cfg.absorbing();
    let unforced = cfg.sim.forcing.iter().all(|&f| f == 0.0);
    let e0 = run.records.first().map_or(0.0, |r| r.e1);
    if unforced && cfg.sim.nonlinearity.c1 == 0.0 && run.blow_up.is_none() && e0 > 0.0 {
        let rate = decay_rate(&run.records);
        let target = 0.9 * est.alpha1;
        report.fitted.insert("decay_rate".into(), rate);
        member.assertions.push(Assertion::new(
            "decay_rate",
            rate >= target,
            format!("fitted E1 rate {rate} against 0.9·α₁ = {target}"),
        ));
        let worst_envelope = run
            .records
            .iter()
            .map(|r| (r.e1 - e0 * (-target * r.t).exp() - 1e-6 * e0) / e0)
            .fold(f64::NEG_INFINITY, f64::max);
        member.assertions.push(Assertion::new(
            "decay_envelope",
            worst_envelope <= 0.0,
            format!("max of E1/E1(0) - e^(-0.9α₁t) - 1e-6 is {worst_envelope:e}"),
        ));
        let worst_increase = run
            .records
            .windows(2)
            .map(|w| (w[1].e1 - w[0].e1) / w[0].e1)
            .fold(f64::NEG_INFINITY, f64::max);
        member.assertions.push(Assertion::new(
            "no_increase",
            worst_increase <= MONOTONE_SLACK,
            format!("largest relative E1 increase per sample {worst_increase:e}"),
        ));
    }
    report.fitted.insert("alpha1".into(), est.alpha1);
    report.energy_artifacts("energy", &run.records, cfg.file.output.plots)?;
    report.members.push(member);
    Ok(report.finish())
}

pub fn run_absorbing(cfg: &RunConfig) -> Result<ExperimentReport> {
    let exp = cfg.experiment();
    if exp.members == 0 {
        return Err(Error::Domain("an ensemble needs at least one member".into()));
    }
    if !(exp.m1 > 0.0) {
        return Err(Error::Domain(format!("initial energy bound M1 = {} is not positive", exp.m1)));
    }
    let est = cfg.absorbing();
    let outcomes = par_map(exp.members, |i| -> Result<(u64, RunOutcome)> {
        let seed = member_seed(cfg.seed(), i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = exp.m1 * (0.5 + 0.5 * rng.random::<f64>());
        let u0 = random_state(&cfg.sim, &cfg.history, rng.random(), target)?;
        let h0 = initial_history(&cfg.history, &u0, &cfg.sim.kernel)?;
        Ok((seed, run_member(&cfg.sim, &u0, &h0)?))
    })?;
    let outcomes: Vec<(u64, RunOutcome)> = outcomes.into_iter().collect::<Result<_>>()?;

    let mut report = ExperimentReport::new("absorb", cfg.seed());
    let t0 = est.t0;
    let t_from = t0.unwrap_or(0.0);
    let m2 = outcomes
        .iter()
        .map(|(_, run)| {
            let samples: Vec<(f64, f64)> = run.records.iter().map(|r| (r.t, r.e2)).collect();
            est.fit_m2(&samples, t_from)
        })
        .fold(0.0, f64::max);
    let est2 = est.clone().with_m2(m2);
    let rho1 = est.rho1_sq;
    let rho2 = est2.rho2_sq.unwrap_or(0.0);
    let degenerate = t0.is_none();

    let mut max_entry = 0.0f64;
    let mut measured_m2 = 0.0f64;
    for (i, (seed, run)) in outcomes.iter().enumerate() {
        let mut m = member_from(i, *seed, run, &cfg.sim);
        let recs = &run.records;
        let e0 = recs.first().map_or(0.0, |r| r.e1);
        if let Some(k) = first_time(recs, t_from, |_| true) {
            measured_m2 = measured_m2.max(recs[k].e2);
        }
        // Degenerate ball: every member must instead lose 99% of its energy.
        let (threshold, label) = if degenerate { (1e-2 * e0, "1% of E1(0)") } else { (rho1, "ρ₁²") };
        match first_time(recs, 0.0, |r| r.e1 <= threshold) {
            Some(k) => {
                let entry = recs[k].t;
                max_entry = max_entry.max(entry);
                m.values.insert("e1_entry".into(), entry);
                let exit = recs[k..].iter().map(|r| r.e1).fold(0.0, f64::max);
                m.assertions.push(Assertion::new(
                    "e1_no_exit",
                    exit <= threshold * (1.0 + EXIT_SLACK),
                    format!("entered E1 ≤ {label} = {threshold:e} at t = {entry}; max afterwards {exit:e}"),
                ));
                if let Some(t0) = t0 {
                    m.assertions.push(Assertion::new(
                        "e1_entry_time",
                        entry <= 2.0 * t0,
                        format!("entry {entry} against 2·t₀ = {}", 2.0 * t0),
                    ));
                } else {
                    m.values.insert("decay_rate".into(), decay_rate(recs));
                }
            }
            None => m.assertions.push(Assertion::new(
                "e1_entry",
                false,
                format!("never entered E1 ≤ {label} = {threshold:e} before t = {}", cfg.sim.t_end),
            )),
        }
        if !degenerate {
            match first_time(recs, t_from, |r| r.e2 <= rho2) {
                Some(k) => {
                    let exit = recs[k..].iter().map(|r| r.e2).fold(0.0, f64::max);
                    m.values.insert("e2_entry".into(), recs[k].t);
                    m.assertions.push(Assertion::new(
                        "e2_no_exit",
                        exit <= rho2 * (1.0 + EXIT_SLACK),
                        format!("entered E2 ≤ ρ₂² = {rho2:e} at t = {}; max afterwards {exit:e}", recs[k].t),
                    ));
                }
                None => m.assertions.push(Assertion::new(
                    "e2_entry",
                    false,
                    format!("never entered E2 ≤ ρ₂² = {rho2:e}"),
                )),
            }
        }
        report.energy_artifacts(&format!("member_{i:02}"), recs, cfg.file.output.plots)?;
        report.members.push(m);
    }
    insert_estimate(&mut report.fitted, &est2);
    report.fitted.insert("max_entry_time".into(), max_entry);
    report.fitted.insert("M2".into(), measured_m2);
    if let Some(t0) = t0 {
        report.assert(
            "entry_within_twice_t0",
            max_entry <= 2.0 * t0,
            format!("latest entry {max_entry} against 2·t₀ = {}", 2.0 * t0),
        );
    }
    Ok(report.finish())
}

fn insert_estimate(fitted: &mut BTreeMap<String, f64>, est: &AbsorbingEstimate) {
    fitted.insert("alpha1".into(), est.alpha1);
    fitted.insert("beta2".into(), est.beta2);
    fitted.insert("sigma".into(), est.sigma);
    fitted.insert("rho1_sq".into(), est.rho1_sq);
    if let Some(t0) = est.t0 {
        fitted.insert("t0".into(), t0);
    }
    if let (Some(m2), Some(rho2)) = (est.m2, est.rho2_sq) {
        fitted.insert("m2".into(), m2);
        fitted.insert("rho2_sq".into(), rho2);
    }
}

pub fn run_tail(cfg: &RunConfig) -> Result<ExperimentReport> {
    let cutoffs = &cfg.sim.tail_cutoffs;
    if cutoffs.is_empty() {
        return Err(Error::Domain("tail statistics need at least one cutoff".into()));
    }
    let (u0, h0) = initial_data(cfg, cfg.seed())?;
    let run = run_member(&cfg.sim, &u0, &h0)?;
    let mut report = ExperimentReport::new("tail", cfg.seed());
    let member = member_from(0, cfg.seed(), &run, &cfg.sim);
    let recs = &run.records;
    report.energy_artifacts("energy", recs, cfg.file.output.plots)?;
    report.members.push(member);
    if run.blow_up.is_some() || recs.is_empty() {
        return Ok(report.finish());
    }

    let est = absorbing_estimate(&cfg.sim, recs[0].e1);
    let t0 = est.t0.unwrap_or(0.0);
    let samples: Vec<(f64, f64)> = recs.iter().map(|r| (r.t, r.e2)).collect();
    let est = est.clone().with_m2(est.fit_m2(&samples, t0));
    let rho2 = est.rho2_sq.unwrap_or(0.0);
    insert_estimate(&mut report.fitted, &est);

    let entry = first_time(recs, t0, |r| r.e2 <= rho2);
    let last_t = recs[recs.len() - 1].t;
    let Some(k) = entry.filter(|&k| recs[k].t < last_t) else {
        report.inconclusive = true;
        report.assert(
            "transient",
            false,
            format!("E2 did not settle into ρ₂² = {rho2:e} before the final sample at t = {last_t}"),
        );
        return Ok(report.finish());
    };
    let t1 = recs[k].t;
    report.fitted.insert("t1".into(), t1);

    let mut table = Table::new(vec!["m".into(), "lambda_next".into(), "sup_tail".into()]);
    let mut sups = Vec::with_capacity(cutoffs.len());
    for (c, &m) in cutoffs.iter().enumerate() {
        let sup = recs[k..].iter().map(|r| r.tails[c].1).fold(0.0, f64::max);
        let lambda = if m < cfg.sim.basis.len() {
            cfg.sim.basis.lambda_after(m)?
        } else {
            f64::INFINITY
        };
        table.rows.push(vec![m as f64, lambda, sup]);
        sups.push((m, lambda, sup));
    }
    let mut order = sups.clone();
    order.sort_by_key(|s| s.0);
    let monotone = order.windows(2).all(|w| w[1].2 <= w[0].2);
    report.assert(
        "monotone_in_cutoff",
        monotone,
        format!(
            "sup tails {}",
            order.iter().map(|s| format!("m={}: {:e}", s.0, s.2)).collect::<Vec<_>>().join(", ")
        ),
    );

    let (xs, ys): (Vec<f64>, Vec<f64>) = order
        .iter()
        .filter(|s| s.2 > 0.0 && s.1.is_finite())
        .map(|s| (s.1.ln(), s.2.ln()))
        .unzip();
    if xs.len() >= 2 {
        let fitted = slope(&xs, &ys);
        report.fitted.insert("tail_slope".into(), fitted);
        report.assert(
            "tail_slope",
            fitted <= -0.9,
            format!("log-log slope of sup tail against λ_(m+1) is {fitted}"),
        );
    } else {
        report.assert("tail_slope", true, "fewer than two nonzero tails");
    }
    let c_tail = order
        .iter()
        .filter(|s| s.1.is_finite())
        .map(|s| s.2 * s.1)
        .fold(0.0, f64::max);
    report.fitted.insert("tail_c".into(), c_tail);

    if let Some(eps) = cfg.file.tail.eps {
        let level = (1.0 + 1.0 / est.beta2) * eps * eps;
        let m_eps = order.iter().find(|s| s.2 <= level).map_or(f64::NAN, |s| s.0 as f64);
        report.fitted.insert("m_eps".into(), m_eps);
        if let Some(wait) = est.tail_wait(eps) {
            report.fitted.insert("tail_wait".into(), wait);
        }
    }
    if cfg.file.output.plots {
        report.artifact("tail.svg", plot_svg(&table, PlotKind::Tail)?);
    }
    report.artifact("tail.csv", table.to_csv());
    Ok(report.finish())
}

pub fn run_dependence(cfg: &RunConfig) -> Result<ExperimentReport> {
    let scales = &cfg.experiment().perturb_scales;
    if scales.is_empty() || scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Domain(format!("perturbation scales {scales:?} must be positive")));
    }
    let mut sim = cfg.sim.clone();
    sim.keep_histories = true;
    let kernel = &sim.kernel;
    let (u0, h0) = initial_data(cfg, cfg.seed())?;

    // Unit direction in the norm of the separation functional.
    let direction_history = match cfg.history {
        InitialHistory::Past(_) => InitialHistory::Zero,
        ref other => other.clone(),
    };
    let d = random_state(&sim, &direction_history, member_seed(cfg.seed(), 0), 1.0)?;
    let hd = initial_history(&direction_history, &d, kernel)?;
    let size = sim.record(&d, &hd, 0.0)?.e2;
    if !(size > 0.0) {
        return Err(Error::Domain("perturbation direction vanished".into()));
    }
    let unit = 1.0 / size.sqrt();

    let runs = par_map(scales.len() + 1, |i| -> Result<_> {
        if i == 0 {
            return evolve(&sim, &u0, &h0);
        }
        let a = scales[i - 1] * unit;
        let u = State::new(u0.coeffs.iter().zip(&d.coeffs).map(|(u, d)| u + a * d).collect());
        let dh = hd.scaled(a);
        let values: Vec<f64> = h0.values().iter().zip(dh.values()).map(|(x, y)| x + y).collect();
        let h = History::from_values(h0.n_modes(), h0.n_nodes(), values)?;
        evolve(&sim, &u, &h)
    })?;
    let runs: Vec<_> = runs.into_iter().collect::<Result<_>>()?;
    let base = &runs[0];

    let mut report = ExperimentReport::new("depend", cfg.seed());
    let mut base_member = MemberResult::new(0, cfg.seed());
    base_member.assertions.push(dafermos_assertion(&base.records, kernel.gamma()));
    report.members.push(base_member);
    report.energy_artifacts("base", &base.records, cfg.file.output.plots)?;

    let beta = sim.nonlinearity.beta;
    let c_h = cfg.experiment().growth_constant;
    let mut sep_table = Table::new(
        std::iter::once("t".to_string())
            .chain(scales.iter().map(|s| format!("S_{s:e}")))
            .collect(),
    );
    sep_table.rows = base.times.iter().map(|&t| vec![t]).collect();
    let mut fits = Vec::new();
    let mut amplitudes = Vec::new();
    let mut max_ratio = 0.0f64;
    for (i, run) in runs[1..].iter().enumerate() {
        let dep = dependence_check(base, run, kernel, &sim.basis, beta, c_h)?;
        let mut m = MemberResult::new(i + 1, cfg.seed());
        m.values.insert("scale".into(), scales[i]);
        m.values.insert("fitted_c_h".into(), dep.fitted_c_h);
        m.values.insert("initial_separation".into(), dep.initial_separation);
        m.values.insert("final_separation".into(), dep.final_separation);
        m.values.insert("max_separation_ratio".into(), dep.max_separation_ratio);
        let amplitude = (dep.final_separation / dep.initial_separation).sqrt();
        m.values.insert("amplitude_ratio".into(), amplitude);
        m.assertions.push(dafermos_assertion(&run.records, kernel.gamma()));
        if let Some(excess) = dep.max_excess {
            m.assertions.push(Assertion::new(
                "growth_bound",
                dep.holds(),
                format!("max of ln S(t)/S(0) - C_h∫h is {excess:e}"),
            ));
        }
        for (row, s) in sep_table.rows.iter_mut().zip(&dep.samples) {
            row.push(s.separation);
        }
        fits.push(dep.fitted_c_h);
        amplitudes.push(amplitude);
        max_ratio = max_ratio.max(dep.max_separation_ratio);
        report.members.push(m);
    }

    let spread = |v: &[f64]| {
        let hi = v.iter().copied().fold(0.0, f64::max);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        if hi == 0.0 {
            1.0
        } else {
            hi / lo
        }
    };
    let c_spread = spread(&fits);
    report.fitted.insert("c_h".into(), fits.iter().copied().fold(0.0, f64::max));
    report.fitted.insert("c_h_spread".into(), c_spread);
    report.assert(
        "c_h_stable",
        c_spread <= 2.0,
        format!("fitted C_h {fits:?}, max/min {c_spread}"),
    );
    let a_spread = spread(&amplitudes);
    report.fitted.insert("amplitude_spread".into(), a_spread);
    report.assert(
        "linear_scaling",
        a_spread <= 2.0,
        format!("final/initial separation amplitudes {amplitudes:?}, max/min {a_spread}"),
    );
    if sim.nonlinearity.coeffs.iter().all(|&c| c == 0.0) {
        report.assert(
            "contraction",
            max_ratio <= 1.0 + 1e-9,
            format!("largest S(t)/S(0) is {max_ratio}"),
        );
    }
    report.artifact("separation.csv", sep_table.to_csv());
    Ok(report.finish())
}

/// `M(0)` of the closed-form system for the configured initial history.
fn oracle_memory(cfg: &RunConfig, u0: &State, h0: &History) -> Result<Vec<f64>> {
    let term = cfg.sim.kernel.terms()[0];
    Ok(match cfg.history {
        InitialHistory::ConstantPast => {
            let factor = term.amplitude / (term.rate * term.rate);
            u0.coeffs.iter().map(|u| factor * u).collect()
        }
        InitialHistory::Zero => vec![0.0; u0.len()],
        InitialHistory::Past(_) => memory_integral(h0, &cfg.sim.kernel)?,
    })
}

fn oracle_error(sim: &SimConfig, u: &State, u0: &State, m0: &[f64], t: f64) -> Result<f64> {
    let terms = sim.kernel.terms();
    let mut worst = 0.0f64;
    for k in 0..u.len() {
        let (exact, _) = linear_oracle_solve(sim.basis.eigenvalues()[k], terms, sim.forcing[k], u0.coeffs[k], m0[k], t)?;
        worst = worst.max((u.coeffs[k] - exact).abs());
    }
    Ok(worst)
}

pub fn run_oracle(cfg: &RunConfig) -> Result<ExperimentReport> {
    if !cfg.sim.nonlinearity.is_linear() || cfg.sim.nonlinearity.coeffs.iter().any(|&c| c != 0.0) {
        return Err(Error::Unsupported("the closed-form comparison needs g = 0".into()));
    }
    let terms = cfg.sim.kernel.terms();
    if terms.len() != 1 {
        return Err(Error::Unsupported(format!(
            "the closed-form comparison needs a single exponential, got {} terms",
            terms.len()
        )));
    }
    let term = terms[0];
    let exp = cfg.experiment();
    let (u0, h0) = initial_data(cfg, cfg.seed())?;
    let m0 = oracle_memory(cfg, &u0, &h0)?;
    let traj = evolve(&cfg.sim, &u0, &h0)?;

    let mut report = ExperimentReport::new("oracle", cfg.seed());
    let mut member = MemberResult::new(0, cfg.seed());
    member.assertions.push(dafermos_assertion(&traj.records, term.rate));
    report.members.push(member);

    let mut table = Table::new(vec!["t".into(), "max_error".into()]);
    let mut max_dev = 0.0f64;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let e = oracle_error(&cfg.sim, u, &u0, &m0, *t)?;
        max_dev = max_dev.max(e);
        table.rows.push(vec![*t, e]);
    }
    report.fitted.insert("max_deviation".into(), max_dev);
    report.assert(
        "oracle_deviation",
        max_dev <= exp.oracle_tol,
        format!("max |u - u_exact| = {max_dev:e} against {:e}", exp.oracle_tol),
    );

    if cfg.sim.forcing.iter().any(|&f| f != 0.0) {
        let last = traj.states.last().unwrap_or(&traj.final_state);
        let t_last = traj.times.last().copied().unwrap_or(0.0);
        let worst = last
            .coeffs
            .iter()
            .zip(cfg.sim.basis.eigenvalues())
            .zip(&cfg.sim.forcing)
            .map(|((u, &l), &f)| (u - linear_steady_state(l, term, f)).abs())
            .fold(0.0, f64::max);
        report.fitted.insert("steady_state_error".into(), worst);
        report.assert(
            "steady_state",
            worst <= exp.steady_tol,
            format!("max |u - u*| = {worst:e} at t = {t_last} against {:e}", exp.steady_tol),
        );
    }

    if !exp.refine_dts.is_empty() {
        let kernel = cfg.sim.kernel.refined(exp.refine_s_points)?;
        let mut conv = Table::new(vec!["dt".into(), "error".into(), "order".into()]);
        let mut dts = exp.refine_dts.clone();
        dts.sort_by(|a, b| b.total_cmp(a));
        let m0_fine = match cfg.history {
            InitialHistory::Past(_) => memory_integral(&initial_history(&cfg.history, &u0, &kernel)?, &kernel)?,
            _ => m0.clone(),
        };
        let h_fine = initial_history(&cfg.history, &u0, &kernel)?;
        let errors = par_map(dts.len(), |i| -> Result<f64> {
            let mut sim = cfg.sim.clone();
            sim.kernel = kernel.clone();
            sim.dt = dts[i];
            sim.record_every = 1;
            sim.tail_cutoffs.clear();
            let run = evolve(&sim, &u0, &h_fine)?;
            let mut worst = 0.0f64;
            for (t, u) in run.times.iter().zip(&run.states) {
                worst = worst.max(oracle_error(&sim, u, &u0, &m0_fine, *t)?);
            }
            Ok(worst)
        })?;
        let errors: Vec<f64> = errors.into_iter().collect::<Result<_>>()?;
        let floor = errors.last().copied().unwrap_or(0.0);
        let mut orders = Vec::new();
        for i in 0..errors.len() {
            let order = if i == 0 {
                f64::NAN
            } else {
                (errors[i - 1] / errors[i]).ln() / (dts[i - 1] / dts[i]).ln()
            };
            conv.rows.push(vec![dts[i], errors[i], order]);
            if i > 0 && errors[i] > 10.0 * floor {
                orders.push(order);
            }
        }
        let ok = !orders.is_empty() && orders.iter().all(|&o| o >= exp.min_order);
        report.fitted.insert(
            "min_observed_order".into(),
            orders.iter().copied().fold(f64::INFINITY, f64::min),
        );
        report.assert(
            "convergence_order",
            ok,
            format!(
                "errors {errors:?}; orders above 10× the floor {floor:e}: {orders:?} (need ≥ {})",
                exp.min_order
            ),
        );
        report.artifact("convergence.csv", conv.to_csv());
    }
    report.artifact("oracle.csv", table.to_csv());
    Ok(report.finish())
}

pub fn run_check_kernel(cfg: &RunConfig) -> Result<ExperimentReport> {
    let kernel = &cfg.sim.kernel;
    let options = GridOptions {
        tail_tol: kernel.tail_tol(),
        s_points: cfg.file.kernel.s_points,
        grid: kernel.grid_kind(),
    };
    let validation = validate_kernel(kernel.terms(), &options)?;
    let mut report = ExperimentReport::new("check-kernel", cfg.seed());
    for c in &validation.checks {
        let detail = match c.offending_s {
            Some(s) => format!("violated at s = {s}"),
            None => "holds".into(),
        };
        report.assert(&c.condition, c.passed, detail);
    }
    let weights: f64 = kernel.quad_weights().iter().sum();
    let mass = kernel.truncated_mass();
    let rel = ((weights - mass) / mass).abs();
    report.assert(
        "quadrature_mass",
        rel <= 1e-10,
        format!("Σw = {weights} against ∫₀^s_max μ = {mass}"),
    );
    report.fitted.insert("delta".into(), kernel.delta());
    report.fitted.insert("gamma".into(), kernel.gamma());
    report.fitted.insert("s_max".into(), kernel.s_max());
    report.fitted.insert("total_mass".into(), kernel.total_mass());
    report.fitted.insert("tail_mass".into(), validation.tail_mass);

    let mut table = Table::new(vec!["s".into(), "mu".into(), "weight".into()]);
    for (&s, &w) in kernel.s_grid().iter().zip(kernel.quad_weights()) {
        table.rows.push(vec![s, kernel.mu(s), w]);
    }
    report.artifact("kernel.csv", table.to_csv());
    Ok(report.finish())
}

/// Dense RK4 for `Φ' = r₁ + r₂Φ^{1-σ} - εΦ`; returns the smallest bound margin.
fn gronwall_margin(r1: f64, r2: f64, phi0: f64, eps: f64, sigma: f64, horizon: f64) -> Result<f64> {
    let rhs = |p: f64| r1 + r2 * p.max(0.0).powf(1.0 - sigma) - eps * p;
    let n = (horizon / 1e-3).ceil().max(1.0) as usize;
    let h = horizon / n as f64;
    let mut phi = phi0;
    let mut margin = gronwall_bound(phi0, eps, sigma, r1, r2, 0.0)? - phi0;
    for i in 0..n {
        let k1 = rhs(phi);
        let k2 = rhs(phi + 0.5 * h * k1);
        let k3 = rhs(phi + 0.5 * h * k2);
        let k4 = rhs(phi + h * k3);
        phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t = (i + 1) as f64 * h;
        margin = margin.min(gronwall_bound(phi0, eps, sigma, r1, r2, t)? - phi);
    }
    Ok(margin)
}

pub fn run_gronwall(cfg: &RunConfig) -> Result<ExperimentReport> {
    let exp = cfg.experiment();
    let (eps, sigma) = (exp.gronwall_eps, exp.gronwall_sigma);
    // Validates ε and σ before any draws.
    gronwall_bound(0.0, eps, sigma, 0.0, 0.0, 0.0)?;
    if !(exp.horizon > 0.0) {
        return Err(Error::Domain(format!("horizon {} is not positive", exp.horizon)));
    }
    let mut report = ExperimentReport::new("gronwall", cfg.seed());
    let c1 = gronwall_constant(1.0);
    report.fitted.insert("C(1)".into(), c1);
    report.assert("c_of_one", (c1 - 4.30026).abs() <= 1e-5, format!("C(1) = {c1}"));

    let draws = par_map(exp.draws, |i| -> Result<MemberResult> {
        let seed = member_seed(cfg.seed(), i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = 2.0 * rng.random::<f64>();
        let r2 = 2.0 * rng.random::<f64>();
        let phi0 = 10.0 * rng.random::<f64>();
        let margin = gronwall_margin(r1, r2, phi0, eps, sigma, exp.horizon)?;
        let mut m = MemberResult::new(i, seed);
        m.values.insert("r1".into(), r1);
        m.values.insert("r2".into(), r2);
        m.values.insert("phi0".into(), phi0);
        m.values.insert("min_margin".into(), margin);
        m.assertions.push(Assertion::new(
            "below_bound",
            margin >= 0.0,
            format!("smallest bound - Φ is {margin:e}"),
        ));
        Ok(m)
    })?;
    let mut table = Table::new(vec!["draw".into(), "r1".into(), "r2".into(), "phi0".into(), "min_margin".into()]);
    for m in draws {
        let m = m?;
        table.rows.push(vec![
            m.index as f64,
            m.values["r1"],
            m.values["r2"],
            m.values["phi0"],
            m.values["min_margin"],
        ]);
        report.members.push(m);
    }
    report.artifact("gronwall.csv", table.to_csv());
    Ok(report.finish())
}
