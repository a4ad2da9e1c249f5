//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use memdiff::config::{parse_config_str, RunConfig};
use memdiff::field::{history_from_past_trajectory, State};
use memdiff::harness::{
    emit_report, initial_data, run_absorbing, run_dependence, run_gronwall, run_oracle, run_simulate, run_tail,
    ExperimentReport,
};
use memdiff::solver::evolve;

struct Outcome {
    passed: bool,
    detail: String,
}

fn config(text: &str) -> RunConfig {
    parse_config_str(text, Path::new(".")).expect("acceptance config")
}

fn assertion_detail(report: &ExperimentReport, names: &[&str]) -> String {
    names
        .iter()
        .filter_map(|n| report.assertion(n))
        .map(|a| format!("{} {}", a.name, a.detail))
        .collect::<Vec<_>>()
        .join("; ")
}

fn failed_members(report: &ExperimentReport) -> String {
    let bad: Vec<String> = report
        .members
        .iter()
        .filter(|m| !m.passed)
        .map(|m| {
            let names: Vec<&str> = m.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
            format!("member {}: {}", m.index, names.join(","))
        })
        .collect();
    if bad.is_empty() {
        String::new()
    } else {
        format!("; failed {}", bad.join(" | "))
    }
}

const LINE_ORACLE: &str = r#"
seed = 1
[domain]
dims = 1
[basis]
modes = [1]
[kernel]
terms = [[1.0, 1.0]]
s_points = 512
[nonlinearity]
coeffs = [0.0, 0.0, 0.0, 0.0]
[init]
u0 = "modes"
modes = [[1, 1.0]]
[time]
dt = 0.001
t_end = 10.0
record_every = 1
[experiment]
refine_dts = [0.8, 0.4, 0.2, 0.1, 0.05]
refine_s_points = 8192
"#;

fn criterion_1() -> Outcome {
    let report = run_oracle(&config(LINE_ORACLE)).expect("oracle run");
    Outcome {
        passed: report.passed,
        detail: assertion_detail(&report, &["oracle_deviation", "convergence_order"]),
    }
}

fn criterion_2() -> Outcome {
    let text = LINE_ORACLE
        .replace("modes = [[1, 1.0]]", "modes = [[1, 0.0]]")
        .replace("dt = 0.001", "dt = 0.01")
        .replace("t_end = 10.0", "t_end = 50.0")
        .replace("refine_dts = [0.8, 0.4, 0.2, 0.1, 0.05]", "refine_dts = []")
        + "[forcing]\nmodes = [[1, 1.0]]\n";
    let report = run_oracle(&config(&text)).expect("steady-state run");
    Outcome {
        passed: report.passed,
        detail: assertion_detail(&report, &["steady_state", "oracle_deviation"]),
    }
}

fn criterion_3() -> Outcome {
    let text = r#"
seed = 3
[domain]
dims = 3
[basis]
modes = [8, 8, 8]
[kernel]
terms = [[1.0, 1.0]]
s_points = 256
[nonlinearity]
coeffs = [0.0, 0.0, -1.0, 0.0]
[init]
u0 = "random"
energy = 10.0
[time]
dt = 0.01
t_end = 5.0
record_every = 10
"#;
    let report = run_simulate(&config(text)).expect("3D run");
    let m = &report.members[0];
    let detail = m
        .assertions
        .iter()
        .map(|a| format!("{} {}", a.name, a.detail))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome {
        passed: report.passed && m.assertions.iter().any(|a| a.name == "decay_rate"),
        detail,
    }
}

const FORCED_LINE: &str = r#"
seed = 4
[domain]
dims = 1
[basis]
modes = [32]
[kernel]
terms = [[1.0, 1.0]]
s_points = 512
[nonlinearity]
coeffs = [0.0, 0.0, -1.0, 0.0]
[forcing]
modes = [[1, 1.0]]
[time]
dt = 0.005
t_end = 25.0
record_every = 20
[experiment]
members = 10
m1 = 100.0
"#;

fn criterion_4() -> Outcome {
    let report = run_absorbing(&config(FORCED_LINE)).expect("absorbing ensemble");
    let f = &report.fitted;
    Outcome {
        passed: report.passed && report.members.len() == 10,
        detail: format!(
            "ρ₁² = {}, t₀ = {}, latest entry {}{}",
            f["rho1_sq"],
            f["t0"],
            f["max_entry_time"],
            failed_members(&report)
        ),
    }
}

fn criterion_5() -> Outcome {
    let text = FORCED_LINE
        .replace("modes = [32]", "modes = [64]")
        .replace("seed = 4", "seed = 5")
        .replace("t_end = 25.0", "t_end = 20.0")
        + "[init]\nu0 = \"random\"\nenergy = 10.0\n[tail]\ncutoffs = [4, 8, 16, 32]\n";
    let report = run_tail(&config(&text)).expect("tail run");
    Outcome {
        passed: report.passed,
        detail: format!(
            "{}; t₁ = {}",
            assertion_detail(&report, &["monotone_in_cutoff", "tail_slope", "transient"]),
            report.fitted.get("t1").copied().unwrap_or(f64::NAN)
        ),
    }
}

fn criterion_6() -> Outcome {
    let text = r#"
seed = 6
[domain]
dims = 1
[basis]
modes = [16]
[kernel]
terms = [[1.0, 1.0]]
s_points = 256
[nonlinearity]
coeffs = [3.0, 0.0, -1.0, 0.0]
[init]
u0 = "modes"
modes = [[1, 0.05]]
[time]
dt = 0.01
t_end = 10.0
record_every = 10
[experiment]
perturb_scales = [1e-4, 1e-6, 1e-8]
"#;
    let report = run_dependence(&config(text)).expect("dependence run");
    Outcome {
        passed: report.passed,
        detail: assertion_detail(&report, &["c_h_stable", "linear_scaling"]),
    }
}

fn criterion_7() -> Outcome {
    // Relative deficit max(0, (γ/2)‖η‖² - pairing) / max‖η‖² over a constant-past run.
    let deficit = |points: usize| {
        let text = FORCED_LINE
            .replace("s_points = 512", &format!("s_points = {points}"))
            .replace("t_end = 25.0", "t_end = 5.0")
            + "[init]\nu0 = \"random\"\nenergy = 5.0\n";
        let cfg = config(&text);
        let (u0, h0) = initial_data(&cfg, cfg.seed()).unwrap();
        let records = evolve(&cfg.sim, &u0, &h0).unwrap().records;
        let gamma = cfg.sim.kernel.gamma();
        let max_norm = records.iter().map(|r| r.eta_mu1_sq).fold(0.0, f64::max);
        let worst = records
            .iter()
            .map(|r| 0.5 * gamma * r.eta_mu1_sq - r.pairing_mu1)
            .fold(0.0, f64::max);
        worst / max_norm
    };
    let (coarse, fine) = (deficit(256), deficit(512));
    let shrink = if fine > 0.0 { coarse / fine } else { f64::INFINITY };
    // Every run of the other criteria carries the same margin check per member.
    let runs = run_simulate(&config(&(FORCED_LINE.replace("t_end = 25.0", "t_end = 5.0")))).unwrap();
    let member_ok = runs.members.iter().all(|m| m.assertions.iter().any(|a| a.name == "dafermos" && a.passed));
    Outcome {
        passed: coarse <= 1e-3 && fine <= 1e-3 && shrink >= 2.0 && member_ok,
        detail: format!("relative deficit {coarse:e} at 256 points, {fine:e} at 512, ratio {shrink}"),
    }
}

fn criterion_8() -> Outcome {
    let text = LINE_ORACLE.to_string().replace("refine_dts = [0.8, 0.4, 0.2, 0.1, 0.05]", "draws = 100\nhorizon = 10.0");
    let report = run_gronwall(&config(&text)).expect("gronwall draws");
    let worst = report
        .members
        .iter()
        .map(|m| m.values["min_margin"])
        .fold(f64::INFINITY, f64::min);
    Outcome {
        passed: report.passed && report.members.len() == 100,
        detail: format!("{}; smallest margin over 100 draws {worst:e}", assertion_detail(&report, &["c_of_one"])),
    }
}

fn criterion_9() -> Outcome {
    let text = FORCED_LINE
        .replace("modes = [32]", "modes = [16]")
        .replace("dt = 0.005", "dt = 0.01")
        .replace("t_end = 25.0", "t_end = 10.0")
        .replace("record_every = 20", "record_every = 1")
        + "[init]\nu0 = \"random\"\nenergy = 4.0\n";
    let cfg = config(&text);
    let (u0, h0) = initial_data(&cfg, cfg.seed()).unwrap();
    let traj = evolve(&cfg.sim, &u0, &h0).unwrap();
    let steps = traj.final_step;
    let t_end = *traj.times.last().unwrap();
    let s_max = cfg.sim.kernel.s_max();
    let mut past = vec![(-t_end - s_max, u0.clone())];
    past.extend(traj.times.iter().zip(&traj.states).map(|(t, u)| (t - t_end, u.clone())));
    let rebuilt = history_from_past_trajectory(&past, &cfg.sim.kernel).unwrap();
    let err = rebuilt.difference(&traj.final_history).unwrap().max_abs();
    let max_u = traj
        .states
        .iter()
        .map(|u: &State| u.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let ds = s_max / cfg.sim.kernel.n_nodes().saturating_sub(1) as f64;
    let bound = 5.0 * (ds + cfg.sim.dt) * max_u;
    Outcome {
        passed: steps == 1000 && err <= bound,
        detail: format!("{steps} steps, max |η_rebuilt - η| = {err:e} against {bound:e}"),
    }
}

fn criterion_10() -> Outcome {
    let text = FORCED_LINE
        .replace("members = 10", "members = 3")
        .replace("t_end = 25.0", "t_end = 4.0")
        + "[tail]\ncutoffs = [4, 8]\n";
    let cfg = config(&text);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let mut report = run_absorbing(&cfg).unwrap();
        emit_report(&mut report, &cfg, dir.path()).unwrap();
        let mut report = run_simulate(&cfg).unwrap();
        emit_report(&mut report, &cfg, &dir.path().join("simulate")).unwrap();
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    for sub in ["", "simulate"] {
        let a = dirs[0].path().join(sub);
        for entry in std::fs::read_dir(&a).unwrap() {
            let entry = entry.unwrap();
            if entry.file_type().unwrap().is_dir() {
                continue;
            }
            let name = entry.file_name();
            let first = std::fs::read(entry.path()).unwrap();
            let second = std::fs::read(dirs[1].path().join(sub).join(&name)).unwrap_or_default();
            compared += 1;
            if first != second {
                differing.push(name.to_string_lossy().into_owned());
            }
        }
    }
    Outcome {
        passed: compared > 0 && differing.is_empty(),
        detail: format!("{compared} files compared, differing: {differing:?}"),
    }
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("linear oracle equivalence", 10, criterion_1),
        ("steady-state oracle", 10, criterion_2),
        ("energy dissipation", 120, criterion_3),
        ("absorbing ball", 300, criterion_4),
        ("tail decay", 300, criterion_5),
        ("continuous dependence", 300, criterion_6),
        ("dafermos inequality", 60, criterion_7),
        ("gronwall checker", 10, criterion_8),
        ("history consistency", 60, criterion_9),
        ("determinism", 600, criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let passed = outcome.passed && in_time;
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<26} {} ({:.2}s, limit {}s) {}",
            i + 1,
            name,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit,
            outcome.detail
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
