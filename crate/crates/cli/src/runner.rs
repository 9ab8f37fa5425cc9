//! Subcommand execution: build the scenario, run the diagnostic, write
//! `<out>/<scenario_id>/{trace.csv, report.json}`, and return a verdict.
//!
//! Scenarios in a batch run in parallel (capped by `FOLLMER_KIT_THREADS`),
//! each writing to its own directory; the mathematical work itself is pure
//! and deterministic, so outputs are byte-identical across runs.

use follmer_core::error::{Error, Result};
use follmer_core::ito::{integration_by_parts, ito_verify, weighted_qv_vs_integral, ItoScenario};
use follmer_core::partition::{
    approximates_from_left, condition_c_diagnostic, controls_oscillation, exhausts_jumps,
};
use follmer_core::path::{CadlagPath, FVPath, PathLike};
use follmer_core::quadvar::{qv_limit, scalar_qv, two_variation, QVRequest, QvMode};
use follmer_core::report::{render_csv, trace_rows, TraceRow};
use follmer_core::scenario::{build, BuiltScenario, ScenarioConfig};
use follmer_core::stieltjes::{dominated_bound, if_vs_stieltjes, integrate_left, FVMeasure};
use follmer_core::trace::Verdict;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Default pass threshold on final residuals, overridable per scenario.
const DEFAULT_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Qv,
    TwoVar,
    Integrate,
    ItoCheck,
    IbpCheck,
    PartitionDiag,
    Lemma2gCheck,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Qv => "qv",
            Subcommand::TwoVar => "two-var",
            Subcommand::Integrate => "integrate",
            Subcommand::ItoCheck => "ito-check",
            Subcommand::IbpCheck => "ibp-check",
            Subcommand::PartitionDiag => "partition-diag",
            Subcommand::Lemma2gCheck => "lemma2g-check",
        }
    }
}

/// Outcome of one scenario: written files plus a pass/fail verdict.
pub struct ScenarioOutcome {
    pub scenario_id: String,
    pub passed: bool,
}

fn thread_cap() -> usize {
    std::env::var("FOLLMER_KIT_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Order-preserving parallel map over owned items with a thread cap.
fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    let threads = thread_cap().min(items.len().max(1));
    if threads <= 1 {
        return items.into_iter().map(f).collect();
    }
    let mut slots: Vec<Option<U>> = Vec::new();
    slots.resize_with(items.len(), || None);
    let work: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(work);
    let out = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let item = queue.lock().unwrap().pop();
                let Some((idx, item)) = item else { break };
                let result = f(item);
                out.lock().unwrap()[idx] = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("all slots filled"))
        .collect()
}

/// Run a batch of scenario files. Returns the process exit code:
/// 0 all passed, 1 input/config error, 2 stalled or failed verdicts.
pub fn run_batch(
    cmd: Subcommand,
    configs: &[PathBuf],
    out_dir: &Path,
    nmax_override: Option<usize>,
    seed_override: Option<u64>,
) -> i32 {
    let jobs: Vec<PathBuf> = configs.to_vec();
    let results = par_map(jobs, |path| {
        run_one(cmd, &path, out_dir, nmax_override, seed_override)
            .map_err(|e| format!("{}: {e}", path.display()))
    });
    let mut code = 0;
    for r in results {
        match r {
            Err(msg) => {
                eprintln!("error: {msg}");
                return 1;
            }
            Ok(outcome) => {
                let status = if outcome.passed { "pass" } else { "FAIL" };
                eprintln!("{} {}: {status}", cmd.name(), outcome.scenario_id);
                if !outcome.passed {
                    code = 2;
                }
            }
        }
    }
    code
}

fn run_one(
    cmd: Subcommand,
    config_path: &Path,
    out_dir: &Path,
    nmax_override: Option<usize>,
    seed_override: Option<u64>,
) -> Result<ScenarioOutcome> {
    let raw = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Invalid(format!("cannot read config: {e}")))?;
    let mut config: ScenarioConfig =
        serde_json::from_str(&raw).map_err(|e| Error::Invalid(format!("bad config: {e}")))?;
    if let Some(n) = nmax_override {
        config.n_max = n;
    }
    if let Some(s) = seed_override {
        config.seed = s;
    }
    let built = build(config)?;
    let (csv, report, passed) = dispatch(cmd, &built)?;

    let dir = out_dir.join(&built.config.id);
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::Invalid(format!("cannot create output dir: {e}")))?;
    std::fs::write(dir.join("trace.csv"), csv)
        .map_err(|e| Error::Invalid(format!("cannot write trace.csv: {e}")))?;
    let mut doc = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Invalid(format!("cannot encode report: {e}")))?;
    doc.push('\n');
    std::fs::write(dir.join("report.json"), doc)
        .map_err(|e| Error::Invalid(format!("cannot write report.json: {e}")))?;
    Ok(ScenarioOutcome {
        scenario_id: built.config.id.clone(),
        passed,
    })
}

fn dispatch(cmd: Subcommand, sc: &BuiltScenario) -> Result<(String, Value, bool)> {
    match cmd {
        Subcommand::Qv => run_qv(sc),
        Subcommand::TwoVar => run_two_var(sc),
        Subcommand::Integrate => run_integrate(sc),
        Subcommand::ItoCheck => run_ito_check(sc),
        Subcommand::IbpCheck => run_ibp_check(sc),
        Subcommand::PartitionDiag => run_partition_diag(sc),
        Subcommand::Lemma2gCheck => run_lemma2g(sc),
    }
}

fn grid_of(sc: &BuiltScenario) -> Vec<f64> {
    sc.config
        .t_grid
        .clone()
        .unwrap_or_else(|| follmer_core::quadvar::default_t_grid(&[&sc.x], sc.config.horizon))
}

fn verdict_str(v: Verdict) -> &'static str {
    if v.passed() {
        "converged"
    } else {
        "stalled"
    }
}

fn run_qv(sc: &BuiltScenario) -> Result<(String, Value, bool)> {
    let grid = grid_of(sc);
    let req = QVRequest::new(&sc.x, &sc.x, &sc.bilinear, &sc.seq, sc.config.n_max)?
        .with_t_grid(grid.clone());
    let res = qv_limit(&req)?;
    let scalar = scalar_qv(&sc.x, &sc.seq, &grid, sc.config.n_max)?;
    let mut rows: Vec<TraceRow> = Vec::new();
    for pt in &res.per_t {
        rows.extend(trace_rows(pt.t, &pt.trace));
    }
    let csv = render_csv(sc.bilinear.codomain().dim(), &rows);
    let per_t: Vec<Value> = res
        .per_t
        .iter()
        .map(|p| {
            json!({
                "t": p.t,
                "verdict": verdict_str(p.verdict),
                "limit": p.limit_estimate.as_ref().map(|v| v.coords().to_vec()),
                "uncertainty": p.trace.uncertainty,
                "jump_checks": p.jump_checks,
            })
        })
        .collect();
    let scalar_t: Vec<Value> = scalar
        .per_t
        .iter()
        .map(|p| {
            json!({
                "t": p.t,
                "verdict": verdict_str(p.verdict),
                "limit": p.limit_estimate.as_ref().map(|v| v.coords()[0]),
            })
        })
        .collect();
    let passed = res.passed && scalar.passed;
    let report = json!({
        "scenario_id": sc.config.id,
        "subcommand": "qv",
        "passed": passed,
        "bilinear": per_t,
        "scalar": scalar_t,
    });
    Ok((csv, report, passed))
}

fn run_two_var(sc: &BuiltScenario) -> Result<(String, Value, bool)> {
    let grid = grid_of(sc);
    let mut rows = Vec::new();
    let mut per_t = Vec::new();
    let mut passed = true;
    for &t in &grid {
        let rep = two_variation(&sc.x, &sc.seq, t, sc.config.n_max)?;
        for (n, v) in rep.per_n.iter().enumerate() {
            rows.push(TraceRow {
                n,
                mesh: sc.seq.partition(n)?.mesh(),
                t,
                value: vec![*v],
                delta_norm: if n == 0 {
                    f64::NAN
                } else {
                    v - rep.per_n[n - 1]
                },
            });
        }
        passed &= !rep.growth_flagged;
        per_t.push(json!({
            "t": t,
            "sup": rep.sup,
            "growth_flagged": rep.growth_flagged,
        }));
    }
    let report = json!({
        "scenario_id": sc.config.id,
        "subcommand": "two-var",
        "passed": passed,
        "per_t": per_t,
    });
    Ok((render_csv(1, &rows), report, passed))
}

fn run_integrate(sc: &BuiltScenario) -> Result<(String, Value, bool)> {
    let horizon = sc.config.horizon;
    let mu = FVMeasure::new(FVPath::new(sc.x.clone()));
    let g: &dyn PathLike = &sc.x;
    let value = integrate_left(&mu, g, &sc.bilinear, 0.0, horizon)?;
    let bound = dominated_bound(&mu, g, &sc.bilinear, 0.0, horizon)?;
    let rep = if_vs_stieltjes(&mu, g, &sc.bilinear, &sc.seq, horizon, sc.config.n_max)?;
    let rows = trace_rows(horizon, &rep.trace);
    let passed = rep.monitor_passed
        && rep.verdict.map(|v| v.passed()).unwrap_or(false)
        && bound + 1e-12 >= value.norm();
    let report = json!({
        "scenario_id": sc.config.id,
        "subcommand": "integrate",
        "passed": passed,
        "stieltjes_value": value.coords().to_vec(),
        "dominated_bound": bound,
        "monitor_passed": rep.monitor_passed,
        "verdict": rep.verdict.map(verdict_str),
    });
    Ok((render_csv(1, &rows), report, passed))
}

fn default_ito_grid(horizon: f64) -> Vec<f64> {
    vec![horizon / 4.0, horizon / 2.0, 3.0 * horizon / 4.0, horizon]
}

fn run_ito_check(sc: &BuiltScenario) -> Result<(String, Value, bool)> {
    let f = sc
        .function
        .as_ref()
        .ok_or_else(|| Error::Invalid("ito-check needs a `function` id".into()))?;
    let a = match &sc.a {
        Some(p) => FVPath::new(p.clone()),
        None => FVPath::new(CadlagPath::constant(
            f.domain_a(),
            sc.config.horizon,
            vec![0.0; f.domain_a().dim()],
        )?),
    };
    let t_grid = sc
        .config
        .t_grid
        .clone()
        .unwrap_or_else(|| default_ito_grid(sc.config.horizon));
    let scenario = ItoScenario {
        a: &a,
        x: &sc.x,
        f,
        b: &sc.bilinear,
        seq: &sc.seq,
        t_grid,
        n_max: sc.config.n_max,
        mode: QvMode::Strong,
    };
    let rep = ito_verify(&scenario)?;
    let tol = sc.config.tolerances.residual_or(DEFAULT_RESIDUAL_TOL);
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut passed = rep.qv_established;
    for pt in &rep.per_t {
        for (n, r) in pt.residuals.iter().enumerate() {
            rows.push(TraceRow {
                n,
                mesh: sc.seq.partition(n)?.mesh(),
                t: pt.t,
                value: vec![*r],
                delta_norm: if n == 0 {
                    f64::NAN
                } else {
                    r - pt.residuals[n - 1]
                },
            });
        }
        passed &= pt.final_residual <= tol;
        results.push(json!({
            "t": pt.t,
            "terms": {
                "LHS": pt.terms.lhs,
                "T1": pt.terms.t1,
                "T2": pt.terms.t2,
                "T3": pt.terms.t3,
                "T4": pt.terms.t4,
            },
            "residual_trace": pt.residuals.iter().enumerate()
                .map(|(n, r)| json!([n, r])).collect::<Vec<_>>(),
            "final_residual": pt.final_residual,
            "residual_verdict": verdict_str(pt.residual_verdict),
        }));
    }
    let report = json!({
        "scenario_id": sc.config.id,
        "subcommand": "ito-check",
        "passed": passed,
        "residual_tolerance": tol,
        "results": results,
        "monitors": {
            "conditionC": rep.condition_c.passed,
            "leftApprox": rep.left_approx_passed,
            "qvStatus": if rep.qv_established { "established" } else { "stalled; residual informational" },
        },
        "t1_conventions_agree": rep.t1_conventions_agree,
    });
    Ok((render_csv(1, &rows), report, passed))
}

fn run_ibp_check(sc: &BuiltScenario) -> Result<(String, Value, bool)> {
    let a = match &sc.a {
        Some(p) => FVPath::new(p.clone()),
        None => {
            return Err(Error::Invalid("ibp-check needs `a_path`".into()));
        }
    };
    let t_grid = sc
        .config
        .t_grid
        .clone()
        .unwrap_or_else(|| default_ito_grid(sc.config.horizon));
    let tol = sc.config.tolerances.residual_or(1e-12);
    let mut rows = Vec::new();
    let mut per_t = Vec::new();
    let mut passed = true;
    for &t in &t_grid {
        let rep = integration_by_parts(&a, &sc.x, &sc.seq, t, sc.config.n_max)?;
        for (n, r) in rep.residuals.iter().enumerate() {
            rows.push(TraceRow {
                n,
                mesh: sc.seq.partition(n)?.mesh(),
                t,
                value: vec![*r],
                delta_norm: f64::NAN,
            });
        }
        let worst = rep.residuals.iter().fold(0.0f64, |m, &v| m.max(v));
        passed &= worst <= tol;
        per_t.push(json!({ "t": t, "max_residual": worst }));
    }
    let report = json!({
        "scenario_id": sc.config.id,
        "subcommand": "ibp-check",
        "passed": passed,
        "residual_tolerance": tol,
        "per_t": per_t,
    });
    Ok((render_csv(1, &rows), report, passed))
}

fn run_partition_diag(sc: &BuiltScenario) -> Result<(String, Value, bool)> {
    let horizon = sc.config.horizon;
    let n_max = sc.config.n_max;
    let mesh = sc.seq.mesh_trace(n_max)?;
    let osc = controls_oscillation(&sc.seq, &sc.x, horizon, n_max)?;
    let exhaust = exhausts_jumps(&sc.seq, &sc.x, n_max)?;
    let eps_grid: Vec<f64> = {
        let mj =
            sc.x.jumps()
                .iter()
                .map(|j| sc.space.norm_of(&j.delta).unwrap())
                .fold(0.0f64, f64::max)
                .max(1e-3);
        (1..=6).map(|k| mj * 0.5f64.powi(k)).collect()
    };
    let cond_c = condition_c_diagnostic(&sc.seq, &sc.x, horizon, &eps_grid, n_max)?;
    let mut sample_times: Vec<f64> = sc.x.jump_times();
    sample_times.extend((1..=4).map(|k| horizon * k as f64 / 4.0));
    sample_times.retain(|&t| t > 0.0 && t <= horizon);
    sample_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sample_times.dedup();
    let left = approximates_from_left(&sc.seq, &sc.x, &sample_times, n_max)?;

    let rows = trace_rows(horizon, &osc);
    let passed = osc.verdict.passed() && cond_c.passed && left.passed;
    let report = json!({
        "scenario_id": sc.config.id,
        "subcommand": "partition-diag",
        "passed": passed,
        "mesh_to_zero": verdict_str(mesh.verdict),
        "oscillation_control": verdict_str(osc.verdict),
        "exhausts_jumps": exhaust.iter().map(|(s, b)| json!([s, b])).collect::<Vec<_>>(),
        "condition_c": {
            "passed": cond_c.passed,
            "c1": cond_c.c1,
            "c2": cond_c.c2.iter().map(|r| json!({
                "time": r.time,
                "verdict": verdict_str(r.verdict),
            })).collect::<Vec<_>>(),
            "c3_surrogate": cond_c.c3.surrogate,
            "c3_passed": cond_c.c3.passed,
        },
        "left_approximation": left.passed,
    });
    Ok((render_csv(1, &rows), report, passed))
}

fn run_lemma2g(sc: &BuiltScenario) -> Result<(String, Value, bool)> {
    let xi = sc
        .xi
        .as_ref()
        .ok_or_else(|| Error::Invalid("lemma2g-check needs `xi`".into()))?;
    if sc.bilinear.codomain().dim() != 1 || xi.space().dim() != 1 {
        return Err(Error::Invalid(
            "lemma2g-check drives scalar weights against a scalar-codomain B".into(),
        ));
    }
    let t = sc.config.horizon;
    let rep = weighted_qv_vs_integral(xi, &sc.x, &sc.bilinear, &sc.seq, t, sc.config.n_max)?;
    let mut rows = Vec::new();
    for (n, r) in rep.residuals.iter().enumerate() {
        rows.push(TraceRow {
            n,
            mesh: sc.seq.partition(n)?.mesh(),
            t,
            value: vec![*r],
            delta_norm: f64::NAN,
        });
    }
    let passed = rep.verdict.passed() && rep.condition_c_passed && rep.left_approx_passed;
    let report = json!({
        "scenario_id": sc.config.id,
        "subcommand": "lemma2g-check",
        "passed": passed,
        "stieltjes_value": rep.stieltjes_value.coords().to_vec(),
        "residuals": rep.residuals,
        "verdict": verdict_str(rep.verdict),
        "monitors": {
            "conditionC": rep.condition_c_passed,
            "leftApprox": rep.left_approx_passed,
        },
    });
    Ok((render_csv(1, &rows), report, passed))
}
