//! The subcommand pipelines. Each returns `Ok(())` on success or a
//! [`CliError`] carrying the exit status.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stt_core::geometry::Environment;
use stt_core::sim::{run_batch, MissionResult, Segment, Verdict};
use stt_core::synthesis::{
    certify, make_sampling_plan, solve_sop, verify_dense, Certificate, DenseReport, SopProblem,
};
use stt_core::tube::{BasisSpec, Tube, TubeRecord};

use crate::error::{CliError, CliResult};
use crate::files::{read_trace, write_json, write_text, TubeFile};
use crate::plot::{render_errors, render_scene, PlotTrace};
use crate::scenario::Scenario;

/// Retries with a halved sampling radius after a failed certificate.
pub const EPSILON_RETRIES: usize = 3;

/// Largest dense margin accepted by `verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-6;

/// Dense verification grid as a multiple of the sample count.
pub const VERIFY_DENSITY: usize = 10;

struct Reporter {
    quiet: bool,
}

impl Reporter {
    fn line(&self, s: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", s.as_ref());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSynthesis {
    pub tube: Tube,
    pub certificate: Certificate,
    /// Number of solves, including the first.
    pub attempts: usize,
}

fn synthesize_segment(scenario: &Scenario, env: &Environment, epsilon: f64) -> CliResult<SegmentSynthesis> {
    let horizon = env.horizon;
    let basis = BasisSpec::new(scenario.degree, horizon)?;
    let mut eps = epsilon;
    let mut attempts = 0;
    loop {
        attempts += 1;
        let plan = make_sampling_plan(horizon, eps)?;
        let problem = SopProblem::with_pins(
            env.clone(),
            basis,
            scenario.radius_degree.unwrap_or(scenario.degree),
            plan,
            scenario.r_d,
            env.start,
            env.target,
        )?;
        let outcome = solve_sop(&problem, &scenario.solver);
        let certificate = certify(&outcome.tube, &problem, outcome.eta_star);
        if certificate.valid || attempts > EPSILON_RETRIES {
            return Ok(SegmentSynthesis {
                tube: outcome.tube,
                certificate,
                attempts,
            });
        }
        eps /= 2.0;
    }
}

/// Synthesizes every segment in parallel; results keep segment order.
pub fn synthesize(scenario: &Scenario, epsilon: Option<f64>) -> CliResult<Vec<SegmentSynthesis>> {
    let envs = scenario.environments()?;
    let eps = epsilon.unwrap_or(scenario.epsilon);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::usage(format!("epsilon must be positive, got {eps}")));
    }
    envs.par_iter()
        .enumerate()
        .map(|(k, env)| synthesize_segment(scenario, env, eps).map_err(|e| e.context(format!("segment {k}"))))
        .collect()
}

pub fn tube_file(scenario: &Scenario, segments: &[SegmentSynthesis]) -> TubeFile {
    TubeFile {
        scenario: scenario.name.clone(),
        segments: segments
            .iter()
            .map(|s| TubeRecord::from_tube(&s.tube, Some(s.certificate.record())))
            .collect(),
    }
}

pub fn cmd_synth(scenario_path: &Path, out: &Path, eps: Option<f64>, quiet: bool) -> CliResult<()> {
    let rep = Reporter { quiet };
    let scenario = Scenario::load(scenario_path)?;
    let segments = synthesize(&scenario, eps)?;
    write_json(out, &tube_file(&scenario, &segments))?;
    let mut failed = Vec::new();
    for (k, s) in segments.iter().enumerate() {
        let c = &s.certificate;
        rep.line(format!(
            "segment {k}: eta* = {:.6}  L = {:.6}  epsilon = {}  eta* + L*epsilon = {:.6}  {}",
            c.eta_star,
            c.lipschitz,
            c.epsilon,
            c.slack(),
            if c.valid { "certified" } else { "NOT certified" }
        ));
        if !c.valid {
            failed.push(k);
        }
    }
    rep.line(format!("wrote {}", out.display()));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::failure(format!(
            "no certified tube for segment(s) {failed:?} after {EPSILON_RETRIES} epsilon halvings"
        )))
    }
}

fn load_pair(tube_path: &Path, scenario_path: &Path) -> CliResult<(Scenario, Vec<Environment>, TubeFile, Vec<Tube>)> {
    let scenario = Scenario::load(scenario_path)?;
    let envs = scenario.environments()?;
    let file = TubeFile::load(tube_path)?;
    let tubes = file.tubes().map_err(|e| e.context(tube_path.display()))?;
    if tubes.len() != envs.len() {
        return Err(CliError::usage(format!(
            "{} has {} segment(s) but the scenario has {}",
            tube_path.display(),
            tubes.len(),
            envs.len()
        )));
    }
    for (k, (tube, env)) in tubes.iter().zip(&envs).enumerate() {
        if (tube.t_c - env.horizon).abs() > 1e-9 * env.horizon.max(1.0) {
            return Err(CliError::usage(format!(
                "segment {k}: tube horizon {} differs from scenario horizon {}",
                tube.t_c, env.horizon
            )));
        }
    }
    Ok((scenario, envs, file, tubes))
}

/// Default dense grid: ten times the samples of the recorded sampling radius.
pub fn default_grid(record: &TubeRecord, scenario: &Scenario) -> CliResult<usize> {
    let eps = record.certificate.map(|c| c.epsilon).unwrap_or(scenario.epsilon);
    Ok(make_sampling_plan(record.t_c, eps)?.len() * VERIFY_DENSITY)
}

pub fn verify(tube_path: &Path, scenario_path: &Path, grid: Option<usize>) -> CliResult<Vec<DenseReport>> {
    let (scenario, envs, file, tubes) = load_pair(tube_path, scenario_path)?;
    tubes
        .iter()
        .zip(&envs)
        .zip(&file.segments)
        .map(|((tube, env), record)| {
            let n = match grid {
                Some(n) => n,
                None => default_grid(record, &scenario)?,
            };
            Ok(verify_dense(tube, env, n))
        })
        .collect()
}

pub fn cmd_verify(tube_path: &Path, scenario_path: &Path, grid: Option<usize>, quiet: bool) -> CliResult<()> {
    let rep = Reporter { quiet };
    if grid == Some(0) {
        return Err(CliError::usage("--grid must be positive"));
    }
    let reports = verify(tube_path, scenario_path, grid)?;
    let mut failed = Vec::new();
    let scenario = Scenario::load(scenario_path)?;
    for (k, r) in reports.iter().enumerate() {
        rep.line(format!("segment {k}: {} grid points", r.grid_points));
        rep.line(format!("  workspace  {:+.6e} at t = {:.4}", r.workspace.margin, r.workspace.t));
        rep.line(format!("  radius     {:+.6e} at t = {:.4}", r.radius.margin, r.radius.t));
        if scenario.obstacles.is_empty() {
            rep.line("  obstacle   none");
        } else {
            rep.line(format!("  obstacle   {:+.6e} at t = {:.4}", r.obstacle.margin, r.obstacle.t));
        }
        rep.line(format!("  start      {:+.6e}", r.start));
        rep.line(format!("  target     {:+.6e}", r.target));
        if r.worst() > VERIFY_TOLERANCE {
            failed.push(k);
        }
    }
    if failed.is_empty() {
        rep.line("all tube conditions hold on the dense grid");
        Ok(())
    } else {
        Err(CliError::failure(format!("tube conditions violated in segment(s) {failed:?}")))
    }
}

/// Per-seed verdict document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    pub scenario: String,
    pub seed: u64,
    pub all_true: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default)]
    pub segments: Vec<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

pub fn verdict_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("verdict_seed{seed}.json"))
}

/// Simulates every seed in parallel; results keep seed order.
pub fn simulate(scenario: &Scenario, envs: &[Environment], tubes: &[Tube], seeds: &[u64]) -> Vec<stt_core::Result<MissionResult>> {
    let segments: Vec<Segment> = envs
        .iter()
        .zip(tubes)
        .map(|(env, tube)| Segment {
            env: env.clone(),
            tube: tube.clone(),
        })
        .collect();
    run_batch(&segments, &scenario.controller, &scenario.sim, scenario.initial_state(), seeds)
}

pub fn cmd_simulate(
    tube_path: &Path,
    scenario_path: &Path,
    seeds: Option<&[u64]>,
    out_dir: &Path,
    quiet: bool,
) -> CliResult<()> {
    let rep = Reporter { quiet };
    let (scenario, envs, _, tubes) = load_pair(tube_path, scenario_path)?;
    let seeds = seeds.unwrap_or(&scenario.seeds).to_vec();
    if seeds.is_empty() {
        return Err(CliError::usage("no seeds given"));
    }
    let results = simulate(&scenario, &envs, &tubes, &seeds);
    let mut failed = Vec::new();
    let mut usage = None;
    for (&seed, res) in seeds.iter().zip(results) {
        let doc = match res {
            Ok(m) => {
                write_text(&trace_path(out_dir, seed), &m.trace.to_csv())?;
                VerdictFile {
                    scenario: scenario.name.clone(),
                    seed,
                    all_true: m.verdict.all_true(),
                    verdict: Some(m.verdict),
                    segments: m.segments,
                    error: None,
                }
            }
            Err(e) => {
                if matches!(e, stt_core::Error::Config(_)) && usage.is_none() {
                    usage = Some(e.to_string());
                }
                VerdictFile {
                    scenario: scenario.name.clone(),
                    seed,
                    all_true: false,
                    verdict: None,
                    segments: Vec::new(),
                    error: Some(e.to_string()),
                }
            }
        };
        match (&doc.verdict, &doc.error) {
            (Some(v), _) => rep.line(format!(
                "seed {seed}: reached = {} (t = {})  safe = {}  in tube = {}  min clearance = {:.4}  final distance = {:.4}",
                v.reached_target,
                v.hit_time.map_or("-".to_string(), |t| format!("{t:.3}")),
                v.always_safe,
                v.always_in_tube,
                v.min_clearance,
                v.final_distance
            )),
            (None, Some(e)) => rep.line(format!("seed {seed}: aborted: {e}")),
            (None, None) => {}
        }
        if !doc.all_true {
            failed.push(seed);
        }
        write_json(&verdict_path(out_dir, seed), &doc)?;
    }
    if let Some(msg) = usage {
        return Err(CliError::usage(msg));
    }
    if failed.is_empty() {
        rep.line(format!("{}/{} runs reached the target safely inside the tube", seeds.len(), seeds.len()));
        Ok(())
    } else {
        Err(CliError::failure(format!(
            "{}/{} runs failed: seeds {failed:?}",
            failed.len(),
            seeds.len()
        )))
    }
}

/// Path of the error-funnel image that accompanies `out`.
pub fn errors_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    out.with_file_name(format!("{stem}_errors.svg"))
}

pub fn cmd_plot(trace_paths: &[PathBuf], tube_path: &Path, scenario_path: &Path, out: &Path, quiet: bool) -> CliResult<()> {
    let rep = Reporter { quiet };
    let (scenario, envs, _, tubes) = load_pair(tube_path, scenario_path)?;
    if trace_paths.is_empty() {
        return Err(CliError::usage("no trace files given"));
    }
    let mut traces = Vec::with_capacity(trace_paths.len());
    for p in trace_paths {
        let rows = read_trace(p)?;
        if rows.is_empty() {
            return Err(CliError::usage(format!("{}: trace is empty", p.display())));
        }
        traces.push(PlotTrace {
            label: p.file_stem().and_then(|s| s.to_str()).unwrap_or("trace").to_string(),
            rows,
        });
    }
    write_text(out, &render_scene(&scenario, &envs, &tubes, &traces))?;
    let err_out = errors_path(out);
    write_text(&err_out, &render_errors(&traces))?;
    rep.line(format!("wrote {} and {}", out.display(), err_out.display()));
    Ok(())
}

pub fn cmd_run(
    scenario_path: &Path,
    out_dir: &Path,
    seeds: Option<&[u64]>,
    eps: Option<f64>,
    grid: Option<usize>,
    quiet: bool,
) -> CliResult<()> {
    let rep = Reporter { quiet };
    let tube = out_dir.join("tube.json");
    rep.line("== synth");
    cmd_synth(scenario_path, &tube, eps, quiet)?;
    rep.line("== verify");
    cmd_verify(&tube, scenario_path, grid, quiet)?;
    rep.line("== simulate");
    let scenario = Scenario::load(scenario_path)?;
    let seeds = seeds.unwrap_or(&scenario.seeds).to_vec();
    cmd_simulate(&tube, scenario_path, Some(&seeds), out_dir, quiet)?;
    rep.line("== plot");
    let traces: Vec<PathBuf> = seeds.iter().map(|&s| trace_path(out_dir, s)).collect();
    cmd_plot(&traces, &tube, scenario_path, &out_dir.join("plot.svg"), quiet)
}
