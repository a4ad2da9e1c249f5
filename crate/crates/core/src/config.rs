//! TOML run configuration, validation, and the run manifest.
//!
//! A manifest is the normalized configuration (every default spelled out) plus
//! `[derived]` and `[artifact]` tables. Those two tables are ignored on input, so
//! a manifest parses back to the configuration that produced it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::{BoxDomain, ModeBasis};
use crate::diagnostics::{absorbing_estimate, AbsorbingEstimate};
use crate::error::{Error, Result};
use crate::field::interpolator;
use crate::kernel::{ExpTerm, GridKind, GridOptions, KernelSpec};
use crate::nonlinear::{validate_nonlinearity, MAX_DEGREE};
use crate::solver::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainSection,
    pub basis: BasisSection,
    pub kernel: KernelSection,
    #[serde(default)]
    pub transport: TransportSection,
    #[serde(default)]
    pub nonlinearity: NonlinearitySection,
    #[serde(default)]
    pub forcing: ForcingSection,
    pub time: TimeSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub tail: TailSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing)]
    pub derived: Option<toml::Table>,
    #[serde(default, skip_serializing)]
    pub artifact: Option<toml::Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub modes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collocation: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub terms: Vec<[f64; 2]>,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_s_points")]
    pub s_points: usize,
    #[serde(default = "default_grid")]
    pub grid: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    #[serde(default = "default_interpolation")]
    pub interpolation: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    /// `[a₁, a₂, a₃, a₄]` for `g(u) = a₁u + a₂u² + a₃u³ + a₄u⁴`.
    #[serde(default)]
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    /// Entries `[k₁, …, k_d, value]`.
    #[serde(default)]
    pub modes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub keep_histories: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    /// `"modes"` or `"random"`; unset means random unless the history comes from a file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<String>,
    #[serde(default)]
    pub modes: Vec<Vec<f64>>,
    /// Target `E₁(0)` for random data.
    #[serde(default = "unit")]
    pub energy: f64,
    #[serde(default = "default_history")]
    pub history: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_file: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSection {
    #[serde(default)]
    pub cutoffs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_members")]
    pub members: usize,
    /// Bound `M₁` on the initial `E₁` of ensemble members.
    #[serde(default = "default_m1")]
    pub m1: f64,
    #[serde(default = "default_scales")]
    pub perturb_scales: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_constant: Option<f64>,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
    #[serde(default)]
    pub refine_dts: Vec<f64>,
    #[serde(default = "default_refine_s_points")]
    pub refine_s_points: usize,
    #[serde(default = "default_min_order")]
    pub min_order: f64,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "unit")]
    pub gronwall_eps: f64,
    #[serde(default = "half")]
    pub gronwall_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "yes")]
    pub plots: bool,
}

fn default_tail_tol() -> f64 {
    crate::kernel::DEFAULT_TAIL_TOL
}
fn default_s_points() -> usize {
    crate::kernel::DEFAULT_S_POINTS
}
fn default_grid() -> String {
    "uniform".into()
}
fn default_interpolation() -> String {
    crate::field::DEFAULT_INTERPOLATOR.into()
}
fn default_history() -> String {
    "constant_past".into()
}
fn default_members() -> usize {
    10
}
fn default_m1() -> f64 {
    100.0
}
fn default_scales() -> Vec<f64> {
    vec![1e-4, 1e-6, 1e-8]
}
fn default_oracle_tol() -> f64 {
    1e-4
}
fn default_steady_tol() -> f64 {
    1e-6
}
fn default_refine_s_points() -> usize {
    8192
}
fn default_min_order() -> f64 {
    3.0
}
fn default_draws() -> usize {
    100
}
fn default_horizon() -> f64 {
    10.0
}
fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}

impl Default for TransportSection {
    fn default() -> Self {
        Self {
            interpolation: default_interpolation(),
        }
    }
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            u0: None,
            modes: Vec::new(),
            energy: 1.0,
            history: default_history(),
            trajectory_file: None,
        }
    }
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            members: default_members(),
            m1: default_m1(),
            perturb_scales: default_scales(),
            growth_constant: None,
            oracle_tol: default_oracle_tol(),
            steady_tol: default_steady_tol(),
            refine_dts: Vec::new(),
            refine_s_points: default_refine_s_points(),
            min_order: default_min_order(),
            draws: default_draws(),
            horizon: default_horizon(),
            gronwall_eps: 1.0,
            gronwall_sigma: 0.5,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { plots: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Modes(Vec<f64>),
    Random { energy: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialHistory {
    ConstantPast,
    Zero,
    /// Past samples `(t ≤ 0, coefficients)` read from a trajectory file.
    Past(Vec<(f64, Vec<f64>)>),
}

/// A validated run: simulation parameters plus initial data and experiment options.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Normalized file contents, as echoed into the manifest.
    pub file: FileConfig,
    pub sim: SimConfig,
    pub state: InitialState,
    pub history: InitialHistory,
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.sim.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.file.seed = seed;
        self.sim.seed = seed;
        self
    }

    pub fn experiment(&self) -> &ExperimentSection {
        &self.file.experiment
    }

    /// Normalized configuration text; parses back to an identical run.
    pub fn emit(&self) -> Result<String> {
        toml::to_string(&self.file).map_err(|e| Error::config("(document)", e.to_string()))
    }

    /// Derived constants recorded in the manifest.
    pub fn derived(&self) -> BTreeMap<String, f64> {
        let est = absorbing_estimate(&self.sim, self.file.experiment.m1);
        let nl = &self.sim.nonlinearity;
        let kernel = &self.sim.kernel;
        let mut map = BTreeMap::new();
        map.insert("lambda1".into(), est.lambda1);
        map.insert("nu".into(), nl.nu);
        map.insert("c1".into(), nl.c1);
        map.insert("beta".into(), nl.beta);
        map.insert("growth_c".into(), nl.growth_c);
        map.insert("alpha1".into(), est.alpha1);
        map.insert("beta2".into(), est.beta2);
        map.insert("gamma".into(), kernel.gamma());
        map.insert("delta".into(), kernel.delta());
        map.insert("sigma".into(), est.sigma);
        map.insert("rho1_sq".into(), est.rho1_sq);
        map.insert("s_max".into(), kernel.s_max());
        map.insert("kernel_tail_mass".into(), kernel.total_mass() - kernel.truncated_mass());
        map
    }

    pub fn absorbing(&self) -> AbsorbingEstimate {
        absorbing_estimate(&self.sim, self.file.experiment.m1)
    }

    /// Manifest text: configuration, derived constants, fitted constants and artifact info.
    pub fn manifest(&self, fitted: &BTreeMap<String, f64>) -> Result<String> {
        let mut table = toml::Table::try_from(&self.file).map_err(|e| Error::config("(document)", e.to_string()))?;
        let mut derived: toml::Table = self
            .derived()
            .into_iter()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, v)| (k, toml::Value::Float(v)))
            .collect();
        for (k, v) in fitted {
            if v.is_finite() {
                derived.insert(format!("fitted_{k}"), toml::Value::Float(*v));
            }
        }
        table.insert("derived".into(), toml::Value::Table(derived));
        let mut artifact = toml::Table::new();
        artifact.insert("name".into(), toml::Value::String(env!("CARGO_PKG_NAME").into()));
        artifact.insert("version".into(), toml::Value::String(env!("CARGO_PKG_VERSION").into()));
        table.insert("artifact".into(), toml::Value::Table(artifact));
        toml::to_string(&table).map_err(|e| Error::config("(document)", e.to_string()))
    }
}

/// Reads and validates a configuration file. Relative trajectory files are
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    build(file, base_dir)
}

/// Names the key at the error position: `table.key` from the enclosing header and
/// the assignment on the offending line, or the unknown field itself.
fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let message = err.message().to_string();
    if let Some(field) = message
        .strip_prefix("unknown field `")
        .and_then(|rest| rest.split('`').next())
    {
        let table = err.span().map(|s| enclosing_table(text, s.start)).unwrap_or_default();
        return Error::config(join_key(&table, field), message);
    }
    let key = err
        .span()
        .map(|span| {
            let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
            let line = text[line_start..].lines().next().unwrap_or("");
            let lhs = line.split('=').next().unwrap_or("").trim();
            let table = enclosing_table(text, span.start);
            if line.contains('=') {
                join_key(&table, lhs)
            } else if table.is_empty() {
                "(document)".to_string()
            } else {
                table
            }
        })
        .unwrap_or_else(|| "(document)".into());
    Error::config(key, message)
}

fn enclosing_table(text: &str, offset: usize) -> String {
    text[..offset.min(text.len())]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && !l.starts_with("[["))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
        .unwrap_or_default()
}

fn join_key(table: &str, key: &str) -> String {
    if table.is_empty() {
        key.to_string()
    } else {
        format!("{table}.{key}")
    }
}

fn mode_entries(entries: &[Vec<f64>], basis: &ModeBasis, key: &str) -> Result<Vec<f64>> {
    let d = basis.domain().dims();
    let mut coeffs = vec![0.0; basis.len()];
    for entry in entries {
        if entry.len() != d + 1 {
            return Err(Error::config(
                key,
                format!("entry {entry:?} needs {d} indices and a value"),
            ));
        }
        let mut k = Vec::with_capacity(d);
        for &x in &entry[..d] {
            if x.fract() != 0.0 || x < 1.0 {
                return Err(Error::config(key, format!("index {x} is not a positive integer")));
            }
            k.push(x as usize);
        }
        let pos = basis.position(&k).map_err(|e| Error::config(key, e.to_string()))?;
        coeffs[pos] += entry[d];
    }
    Ok(coeffs)
}

/// Reads a trajectory file: one state per line, `t c₁ … c_N`, whitespace separated,
/// blank lines and `#` comments ignored.
pub fn read_trajectory_file(path: &Path) -> Result<Vec<(f64, Vec<f64>)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let values: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        let values = values.map_err(|e| {
            Error::config("init.trajectory_file", format!("line {}: {e}", i + 1))
        })?;
        if values.len() < 2 {
            return Err(Error::config(
                "init.trajectory_file",
                format!("line {}: expected a time and at least one coefficient", i + 1),
            ));
        }
        rows.push((values[0], values[1..].to_vec()));
    }
    Ok(rows)
}

/// Writes states in the trajectory-file layout with round-trip precision.
pub fn write_trajectory_file(path: &Path, rows: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut out = String::new();
    for (t, coeffs) in rows {
        out.push_str(&t.to_string());
        for c in coeffs {
            out.push(' ');
            out.push_str(&c.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn build(mut file: FileConfig, base_dir: &Path) -> Result<RunConfig> {
    file.derived = None;
    file.artifact = None;

    // domain
    let lengths = match (&file.domain.dims, &file.domain.lengths) {
        (_, Some(l)) => l.clone(),
        (Some(d), None) => vec![std::f64::consts::PI; *d],
        (None, None) => return Err(Error::config("domain", "give domain.dims or domain.lengths")),
    };
    if let Some(d) = file.domain.dims {
        if d != lengths.len() {
            return Err(Error::config(
                "domain.dims",
                format!("{d} does not match {} lengths", lengths.len()),
            ));
        }
    }
    let domain = BoxDomain::new(lengths.clone()).map_err(|e| Error::config("domain.lengths", e.to_string()))?;
    file.domain.dims = Some(lengths.len());
    file.domain.lengths = Some(lengths);

    // basis
    let basis = ModeBasis::new(domain, file.basis.modes.clone(), file.basis.collocation.clone()).map_err(|e| {
        let key = if matches!(e, Error::Domain(ref m) if m.contains("collocation")) {
            "basis.collocation"
        } else {
            "basis.modes"
        };
        Error::config(key, e.to_string())
    })?;
    file.basis.collocation = Some(basis.collocation().to_vec());

    // kernel
    let grid = GridKind::parse(&file.kernel.grid).ok_or_else(|| {
        Error::config(
            "kernel.grid",
            format!("unknown grid `{}` (expected \"uniform\" or \"geometric\")", file.kernel.grid),
        )
    })?;
    let terms: Vec<ExpTerm> = file.kernel.terms.iter().map(|&[c, d]| ExpTerm::new(c, d)).collect();
    let options = GridOptions {
        tail_tol: file.kernel.tail_tol,
        s_points: file.kernel.s_points,
        grid,
    };
    let kernel = KernelSpec::new(terms, options).map_err(|e| Error::config("kernel.terms", e.to_string()))?;

    // nonlinearity
    if file.nonlinearity.coeffs.len() > MAX_DEGREE && file.nonlinearity.coeffs[MAX_DEGREE..].iter().any(|&c| c != 0.0) {
        return Err(Error::config(
            "nonlinearity.coeffs",
            "degree above 4 violates the growth condition |g(u)| ≤ C(1+|u|^β) with β < 5",
        ));
    }
    let mut power = vec![0.0];
    power.extend(&file.nonlinearity.coeffs);
    let nonlinearity = validate_nonlinearity(&power, basis.lambda1())
        .map_err(|e| Error::config("nonlinearity.coeffs", e.to_string()))?;
    let mut coeffs = file.nonlinearity.coeffs.clone();
    coeffs.resize(MAX_DEGREE, 0.0);
    file.nonlinearity.coeffs = coeffs;

    let forcing = mode_entries(&file.forcing.modes, &basis, "forcing.modes")?;
    let interpolation = interpolator(&file.transport.interpolation)?;

    // initial data
    let history = match file.init.history.as_str() {
        "constant_past" => InitialHistory::ConstantPast,
        "zero" => InitialHistory::Zero,
        "trajectory_file" => {
            let name = file.init.trajectory_file.as_deref().ok_or_else(|| {
                Error::config("init.trajectory_file", "required when init.history = \"trajectory_file\"")
            })?;
            let path = resolve(base_dir, name);
            let rows = read_trajectory_file(&path)?;
            if let Some((_, c)) = rows.iter().find(|(_, c)| c.len() != basis.len()) {
                return Err(Error::config(
                    "init.trajectory_file",
                    format!("row with {} coefficients for {} modes", c.len(), basis.len()),
                ));
            }
            InitialHistory::Past(rows)
        }
        other => {
            return Err(Error::config(
                "init.history",
                format!("unknown history `{other}` (expected constant_past, zero or trajectory_file)"),
            ))
        }
    };
    let state = match (file.init.u0.as_deref(), &history) {
        (None, InitialHistory::Past(rows)) => {
            let (t, last) = rows
                .last()
                .ok_or_else(|| Error::config("init.trajectory_file", "file has no rows"))?;
            if *t != 0.0 {
                return Err(Error::config(
                    "init.trajectory_file",
                    format!("last row is at t = {t}; the file must end at t = 0"),
                ));
            }
            InitialState::Modes(last.clone())
        }
        (Some(_), InitialHistory::Past(_)) => {
            return Err(Error::config(
                "init.u0",
                "the initial state comes from the trajectory file; leave init.u0 unset",
            ))
        }
        (None | Some("random"), _) => {
            if !(file.init.energy >= 0.0 && file.init.energy.is_finite()) {
                return Err(Error::config("init.energy", format!("{} is not a valid energy", file.init.energy)));
            }
            InitialState::Random {
                energy: file.init.energy,
            }
        }
        (Some("modes"), _) => InitialState::Modes(mode_entries(&file.init.modes, &basis, "init.modes")?),
        (Some(other), _) => {
            return Err(Error::config(
                "init.u0",
                format!("unknown initial state `{other}` (expected modes or random)"),
            ))
        }
    };
    if file.init.u0.is_none() && !matches!(history, InitialHistory::Past(_)) {
        file.init.u0 = Some("random".into());
    }

    let sim = SimConfig {
        basis,
        kernel,
        nonlinearity,
        forcing,
        dt: file.time.dt,
        t_end: file.time.t_end,
        record_every: file.time.record_every,
        seed: file.seed,
        interpolation,
        tail_cutoffs: file.tail.cutoffs.clone(),
        keep_histories: file.time.keep_histories,
    };
    sim.validate()?;
    if let Some(eps) = file.tail.eps {
        if !(eps > 0.0) {
            return Err(Error::config("tail.eps", format!("{eps} is not positive")));
        }
    }
    Ok(RunConfig {
        file,
        sim,
        state,
        history,
    })
}

fn resolve(base: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
dims = 1

[basis]
modes = [8]

[kernel]
terms = [[1.0, 1.0]]

[nonlinearity]
coeffs = [0.0, 0.0, -1.0, 0.0]

[time]
dt = 0.01
t_end = 1.0
"#;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config_str(text, Path::new("."))
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = parse(MINIMAL).unwrap();
        let d = cfg.derived();
        assert!((d["lambda1"] - 1.0).abs() < 1e-12);
        assert_eq!(d["gamma"], 1.0);
        assert_eq!(cfg.sim.basis.collocation(), &[17]);
        assert_eq!(cfg.state, InitialState::Random { energy: 1.0 });
    }

    #[test]
    fn negative_rate_cites_integrability() {
        let text = MINIMAL.replace("[[1.0, 1.0]]", "[[1.0, -1.0]]");
        let err = parse(&text).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "kernel.terms"));
        assert!(err.to_string().contains("μ(s)∈C¹(ℝ⁺)∩L¹(ℝ⁺)"));
    }

    #[test]
    fn steep_slope_cites_limsup() {
        let text = MINIMAL
            .replace("dims = 1", "dims = 3")
            .replace("modes = [8]", "modes = [2, 2, 2]")
            .replace("[0.0, 0.0, -1.0, 0.0]", "[4.0, 0.0, 0.0, 0.0]");
        let err = parse(&text).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "nonlinearity.coeffs"));
        assert!(err.to_string().contains("lim sup"));
    }

    #[test]
    fn unknown_and_mistyped_keys_are_named() {
        let text = MINIMAL.replace("dt = 0.01", "dt = 0.01\nstep = 3");
        match parse(&text).unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "time.step"),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("t_end = 1.0", "t_end = \"long\"");
        match parse(&text).unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "time.t_end"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn emitted_config_round_trips() {
        let text = format!("{MINIMAL}\n[forcing]\nmodes = [[1, 0.5]]\n[tail]\ncutoffs = [2, 4]\n");
        let cfg = parse(&text).unwrap();
        let emitted = cfg.emit().unwrap();
        let again = parse(&emitted).unwrap();
        assert_eq!(again.file, cfg.file);
        assert_eq!(again.emit().unwrap(), emitted);
        assert_eq!(again.sim.forcing, cfg.sim.forcing);

        let manifest = cfg.manifest(&BTreeMap::new()).unwrap();
        assert!(manifest.contains("[derived]"));
        let from_manifest = parse(&manifest).unwrap();
        assert_eq!(from_manifest.file, cfg.file);
    }

    #[test]
    fn forcing_index_out_of_range() {
        let text = format!("{MINIMAL}\n[forcing]\nmodes = [[9, 0.5]]\n");
        assert!(matches!(parse(&text), Err(Error::Config { key, .. }) if key == "forcing.modes"));
    }

    #[test]
    fn trajectory_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("past.txt");
        let rows = vec![(-30.0, vec![1.0, 0.0]), (-1.5, vec![0.25, 1e-17]), (0.0, vec![0.1, -0.2])];
        write_trajectory_file(&path, &rows).unwrap();
        assert_eq!(read_trajectory_file(&path).unwrap(), rows);

        let text = MINIMAL.replace("modes = [8]", "modes = [2]")
            + "\n[init]\nhistory = \"trajectory_file\"\ntrajectory_file = \"past.txt\"\n";
        let cfg = parse_config_str(&text, dir.path()).unwrap();
        assert_eq!(cfg.state, InitialState::Modes(vec![0.1, -0.2]));
    }
}
