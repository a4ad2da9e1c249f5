//! Experiment drivers over seeded ensembles, selected by name from a registry.

mod scenarios;

pub use scenarios::{
    run_absorbing, run_check_kernel, run_dependence, run_gronwall, run_oracle, run_simulate, run_tail,
};

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{InitialHistory, InitialState, RunConfig};
use crate::diagnostics::EnergyRecord;
use crate::error::{Error, Result};
use crate::field::{history_from_constant_past, history_from_past_trajectory, History, State};
use crate::kernel::KernelSpec;
use crate::output::{energy_csv, parse_csv, write_json};
use crate::plot::{plot_svg, PlotKind};
use crate::solver::{evolve, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberResult {
    pub index: usize,
    pub seed: u64,
    pub passed: bool,
    /// Time of blow-up for a diverged member.
    pub blow_up: Option<f64>,
    pub error: Option<String>,
    pub values: BTreeMap<String, f64>,
    pub assertions: Vec<Assertion>,
}

impl MemberResult {
    pub fn new(index: usize, seed: u64) -> Self {
        Self {
            index,
            seed,
            passed: true,
            blow_up: None,
            error: None,
            values: BTreeMap::new(),
            assertions: Vec::new(),
        }
    }

    fn finish(&mut self) {
        self.passed = self.error.is_none() && self.assertions.iter().all(|a| a.passed);
    }
}

/// A file produced by a scenario, written on emission.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub seed: u64,
    pub passed: bool,
    /// Set when the horizon was too short to decide.
    pub inconclusive: bool,
    pub assertions: Vec<Assertion>,
    pub members: Vec<MemberResult>,
    pub fitted: BTreeMap<String, f64>,
    pub files: Vec<String>,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
}

impl ExperimentReport {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            seed,
            passed: false,
            inconclusive: false,
            assertions: Vec::new(),
            members: Vec::new(),
            fitted: BTreeMap::new(),
            files: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn assert(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion::new(name, passed, detail));
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    fn artifact(&mut self, name: impl Into<String>, contents: String) {
        self.artifacts.push(Artifact {
            name: name.into(),
            contents,
        });
    }

    /// Adds the energy table and, when enabled, its plot.
    fn energy_artifacts(&mut self, stem: &str, records: &[EnergyRecord], plots: bool) -> Result<()> {
        let csv = energy_csv(records);
        if plots && !records.is_empty() {
            let svg = plot_svg(&parse_csv(&csv)?, PlotKind::Energy)?;
            self.artifact(format!("{stem}.svg"), svg);
        }
        self.artifact(format!("{stem}.csv"), csv);
        Ok(())
    }

    fn finish(mut self) -> Self {
        for m in &mut self.members {
            m.finish();
        }
        self.passed = !self.inconclusive
            && self.assertions.iter().all(|a| a.passed)
            && self.members.iter().all(|m| m.passed);
        self
    }

    /// One line per assertion and failed member, for terminal output.
    pub fn summary(&self) -> String {
        let mut lines = vec![format!(
            "{}: {}{}",
            self.scenario,
            if self.passed { "PASS" } else { "FAIL" },
            if self.inconclusive { " (inconclusive)" } else { "" }
        )];
        for a in &self.assertions {
            lines.push(format!("  [{}] {}: {}", if a.passed { "ok" } else { "FAIL" }, a.name, a.detail));
        }
        for m in self.members.iter().filter(|m| !m.passed) {
            let failed: Vec<&str> = m.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
            lines.push(format!(
                "  member {} failed: {}{}",
                m.index,
                failed.join(", "),
                m.error.as_deref().map(|e| format!(" {e}")).unwrap_or_default()
            ));
        }
        lines.join("\n")
    }
}

/// A named experiment.
pub trait Scenario: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport>;
}

struct FnScenario {
    name: &'static str,
    description: &'static str,
    run: fn(&RunConfig) -> Result<ExperimentReport>,
}

impl Scenario for FnScenario {
    fn name(&self) -> &'static str {
        self.name
    }

    fn description(&self) -> &'static str {
        self.description
    }

    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport> {
        (self.run)(cfg)
    }
}

pub struct ScenarioRegistry {
    entries: BTreeMap<&'static str, Box<dyn Scenario>>,
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        let table: [(&'static str, &'static str, fn(&RunConfig) -> Result<ExperimentReport>); 7] = [
            ("simulate", "single run with energy diagnostics", run_simulate),
            ("absorb", "ensemble entry into the absorbing balls", run_absorbing),
            ("tail", "post-transient spectral tail energies", run_tail),
            ("depend", "continuous dependence under small perturbations", run_dependence),
            ("oracle", "linear closed-form comparison and dt refinement", run_oracle),
            ("check-kernel", "kernel hypotheses and quadrature", run_check_kernel),
            ("gronwall", "Gronwall-type bound on a synthetic inequality", run_gronwall),
        ];
        for (name, description, run) in table {
            reg.register(Box::new(FnScenario { name, description, run }));
        }
        reg
    }

    pub fn register(&mut self, scenario: Box<dyn Scenario>) {
        self.entries.insert(scenario.name(), scenario);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Scenario> {
        self.entries
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownScenario(name.into()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

/// Writes the artifacts, `manifest.toml` and `report.json` into `dir`.
pub fn emit_report(report: &mut ExperimentReport, cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    report.files.clear();
    for a in &report.artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
        report.files.push(a.name.clone());
    }
    std::fs::write(dir.join("manifest.toml"), cfg.manifest(&report.fitted)?)?;
    report.files.push("manifest.toml".into());
    report.files.push("report.json".into());
    write_json(&dir.join("report.json"), report)
}

/// Seed of ensemble member `index`, derived from the run seed.
pub fn member_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

/// History matching `u0` under the configured initial-history rule.
pub fn initial_history(kind: &InitialHistory, u0: &State, kernel: &KernelSpec) -> Result<History> {
    match kind {
        InitialHistory::ConstantPast => Ok(history_from_constant_past(u0, kernel)),
        InitialHistory::Zero => Ok(History::zeros(u0.len(), kernel.n_nodes())),
        InitialHistory::Past(rows) => {
            let samples: Vec<(f64, State)> = rows.iter().map(|(t, c)| (*t, State::new(c.clone()))).collect();
            history_from_past_trajectory(&samples, kernel)
        }
    }
}

/// Random state on the lowest third of the modes, each carrying equal expected
/// `E₂`-type energy, scaled so the initial `E₁` equals `energy`.
pub fn random_state(sim: &SimConfig, history: &InitialHistory, seed: u64, energy: f64) -> Result<State> {
    if matches!(history, InitialHistory::Past(_)) {
        return Err(Error::Unsupported(
            "random initial states need a constant-past or zero history".into(),
        ));
    }
    let n = sim.basis.len();
    let band = n.div_ceil(3).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![0.0; n];
    for (c, l) in coeffs.iter_mut().zip(sim.basis.eigenvalues()).take(band) {
        let xi: f64 = rng.sample(StandardNormal);
        *c = xi / l;
    }
    let u = State::new(coeffs);
    let e1 = sim.record(&u, &initial_history(history, &u, &sim.kernel)?, 0.0)?.e1;
    let scale = if e1 > 0.0 { (energy / e1).sqrt() } else { 0.0 };
    Ok(State::new(u.coeffs.iter().map(|c| c * scale).collect()))
}

/// Initial data of a single run with the given seed.
pub fn initial_data(cfg: &RunConfig, seed: u64) -> Result<(State, History)> {
    let u0 = match &cfg.state {
        InitialState::Modes(c) => State::new(c.clone()),
        InitialState::Random { energy } => random_state(&cfg.sim, &cfg.history, seed, *energy)?,
    };
    let h0 = initial_history(&cfg.history, &u0, &cfg.sim.kernel)?;
    Ok((u0, h0))
}

/// Outcome of a run that may have blown up.
pub(crate) struct RunOutcome {
    pub records: Vec<EnergyRecord>,
    pub blow_up: Option<(f64, String)>,
}

pub(crate) fn run_member(sim: &SimConfig, u0: &State, h0: &History) -> Result<RunOutcome> {
    match evolve(sim, u0, h0) {
        Ok(traj) => Ok(RunOutcome {
            records: traj.records,
            blow_up: None,
        }),
        Err(Error::Divergence { t, reason, partial }) => Ok(RunOutcome {
            records: partial.map(|p| p.records).unwrap_or_default(),
            blow_up: Some((t, reason)),
        }),
        Err(e) => Err(e),
    }
}

/// Parallel map over `0..n`, capped by `MEMDIFF_THREADS`; results keep index order.
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MEMDIFF_THREADS") {
        let threads: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::config("MEMDIFF_THREADS", format!("`{v}` is not a thread count")))?;
        builder = builder.num_threads(threads);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    pub(crate) const LINE: &str = r#"
seed = 11

[domain]
dims = 1

[basis]
modes = [12]

[kernel]
terms = [[1.0, 1.0]]
s_points = 128

[nonlinearity]
coeffs = [0.0, 0.0, -1.0, 0.0]

[time]
dt = 0.01
t_end = 1.0
record_every = 10
"#;

    #[test]
    fn registry_lists_and_rejects() {
        let reg = ScenarioRegistry::builtin();
        let names: Vec<_> = reg.names().collect();
        assert_eq!(
            names,
            ["absorb", "check-kernel", "depend", "gronwall", "oracle", "simulate", "tail"]
        );
        assert!(matches!(reg.get("nope"), Err(Error::UnknownScenario(_))));
        assert_eq!(reg.get("tail").unwrap().name(), "tail");
    }

    #[test]
    fn random_state_hits_energy_on_low_band() {
        let cfg = parse_config_str(LINE, Path::new(".")).unwrap();
        let u = random_state(&cfg.sim, &cfg.history, 5, 3.5).unwrap();
        assert!(u.coeffs[4..].iter().all(|&c| c == 0.0));
        assert!(u.coeffs[..4].iter().all(|&c| c != 0.0));
        let h = initial_history(&cfg.history, &u, &cfg.sim.kernel).unwrap();
        let e1 = cfg.sim.record(&u, &h, 0.0).unwrap().e1;
        assert!((e1 - 3.5).abs() < 1e-12);
        assert_eq!(u, random_state(&cfg.sim, &cfg.history, 5, 3.5).unwrap());
        assert_ne!(u, random_state(&cfg.sim, &cfg.history, 6, 3.5).unwrap());
    }

    #[test]
    fn member_seeds_differ() {
        let seeds: Vec<u64> = (0..5).map(|i| member_seed(1, i)).collect();
        let mut sorted = seeds.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 5);
        assert_eq!(member_seed(1, 3), seeds[3]);
    }

    #[test]
    fn par_map_keeps_order() {
        assert_eq!(par_map(6, |i| i * i).unwrap(), vec![0, 1, 4, 9, 16, 25]);
    }
}
