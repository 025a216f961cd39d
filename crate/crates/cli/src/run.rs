//! Seeded instance construction, agent wiring and result files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use cmaxpp::agents::{
    run_repetition_with, Agent, AgentKind, Branch, LargeAgent, LargeConfig, QLearningAgent,
    StepRecord, TabularAgent,
};
use cmaxpp::approx::FeatureMap;
use cmaxpp::envs::{EnvError, GridNavIce, LatticeWorld, LiftGrid, PrimitiveTable};
use cmaxpp::problem::{optimal_values, Dynamics};
use cmaxpp::{Environment, Problem, StateId};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{Approximator, EnvSpec, ExperimentConfig, InitialValues, ScheduleGrid};
use crate::summary::{summarize, RepetitionSummary, ResultRow};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("serializing: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("seeds failed: {0:?}")]
    Seeds(Vec<(u64, String)>),
}

/// Random stream for one instance. Each seed selects its own ChaCha stream
/// of the master seed, so adding seeds leaves existing instances unchanged.
pub fn instance_rng(master_seed: u64, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(seed);
    rng
}

pub enum Instance {
    Grid(GridNavIce),
    Lift(LiftGrid),
    Lattice(LatticeWorld),
}

/// Loads or generates the primitive table once for all lattice seeds.
pub fn primitive_table(spec: &EnvSpec) -> Result<Option<PrimitiveTable>, EnvError> {
    let Some(params) = spec.lattice_params() else {
        return Ok(None);
    };
    let table = match spec {
        EnvSpec::Lattice {
            primitive_cache: Some(dir),
            ..
        } => PrimitiveTable::load_or_generate(&params.primitives, dir)?,
        _ => PrimitiveTable::generate(&params.primitives)?,
    };
    Ok(Some(table))
}

pub fn build_instance(
    spec: &EnvSpec,
    table: Option<&PrimitiveTable>,
    rng: &mut ChaCha8Rng,
) -> Result<Instance, EnvError> {
    Ok(match spec {
        EnvSpec::Lift { columns, heights } => {
            Instance::Lift(LiftGrid::random(*columns, *heights, rng)?)
        }
        EnvSpec::Bottleneck { size } => Instance::Grid(GridNavIce::bottleneck(*size, rng)?),
        EnvSpec::RandomGrid {
            width,
            height,
            density,
        } => Instance::Grid(GridNavIce::random_obstacles(
            *width, *height, *density, rng,
        )?),
        EnvSpec::Ascii { map, optimistic } => {
            let env = GridNavIce::from_ascii(map)?;
            Instance::Grid(if *optimistic {
                env.claiming_optimistic_model()?
            } else {
                env
            })
        }
        EnvSpec::Lattice { .. } => {
            let params = spec.lattice_params().expect("lattice spec");
            let table = match table {
                Some(t) => t.clone(),
                None => PrimitiveTable::generate(&params.primitives)?,
            };
            Instance::Lattice(LatticeWorld::generate_with_table(&params, table, rng)?)
        }
    })
}

#[derive(Serialize)]
struct TraceLine {
    seed: u64,
    repetition: usize,
    t: usize,
    s: StateId,
    a: u16,
    s_pred: StateId,
    s_true: StateId,
    discrepancy: bool,
    branch: Branch,
    value: f64,
    penalized_value: Option<f64>,
}

#[derive(Default)]
struct SeedOutput {
    rows: Vec<ResultRow>,
    trace: Vec<String>,
    snapshot: Option<serde_json::Value>,
    states: usize,
    error: Option<String>,
}

fn drive<E, A>(agent: &mut A, env: &E, config: &ExperimentConfig, seed: u64, out: &mut SeedOutput)
where
    E: Environment + ?Sized,
    A: Agent<E> + ?Sized,
{
    let mut cumulative = 0;
    for i in 1..=config.repetitions {
        let alpha = config.schedule.alpha(i);
        let started = Instant::now();
        let mut t = 0;
        let trace = &mut out.trace;
        let record = run_repetition_with(
            agent,
            env,
            i,
            alpha,
            config.step_cap,
            |step: &StepRecord| {
                if config.trace {
                    let line = TraceLine {
                        seed,
                        repetition: i,
                        t,
                        s: step.state,
                        a: step.action.0,
                        s_pred: step.predicted,
                        s_true: step.next,
                        discrepancy: step.discrepancy,
                        branch: step.branch,
                        value: step.value,
                        penalized_value: step.penalized_value,
                    };
                    trace.push(serde_json::to_string(&line).expect("trace line serializes"));
                }
                t += 1;
            },
        );
        let wall_ms = if config.wall_time {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        cumulative += record.steps;
        out.rows.push(ResultRow {
            seed,
            repetition: i,
            steps: record.steps,
            cost: record.cost,
            success: record.success,
            cumulative_steps: cumulative,
            wall_ms,
        });
        if let Some(e) = record.error {
            log::warn!("seed {seed} repetition {i}: {e}");
        }
        if !record.success && !config.continue_after_failure {
            break;
        }
    }
}

fn run_on<E>(env: &E, config: &ExperimentConfig, seed: u64, rng: &mut ChaCha8Rng) -> SeedOutput
where
    E: Environment + FeatureMap,
{
    let mut out = SeedOutput {
        states: Problem::num_states(env),
        ..SeedOutput::default()
    };
    let initial = match config.initial_values {
        InitialValues::Model => optimal_values(env, Dynamics::Model),
        InitialValues::Zero => vec![0.0; Problem::num_states(env)],
    };
    match (config.approximator, config.agent) {
        (Approximator::Linear, _) => {
            let large = LargeConfig {
                budget: config.budget,
                seed: rng.next_u64(),
                ..config.large.clone()
            };
            let mut agent = LargeAgent::new(env, large);
            drive(&mut agent, env, config, seed, &mut out);
            if config.snapshots {
                out.snapshot = Some(json!({
                    "v": agent.values(),
                    "q": agent.q(),
                    "spheres": agent.spheres().snapshot(),
                }));
            }
        }
        (Approximator::Tabular, AgentKind::Qlearning) => {
            let mut agent = QLearningAgent::new(env, &initial);
            drive(&mut agent, env, config, seed, &mut out);
            if config.snapshots {
                out.snapshot = Some(json!({ "q": agent.q() }));
            }
        }
        (Approximator::Tabular, kind) => {
            let mut agent = TabularAgent::new(kind, env, initial, config.budget);
            if let Some(p) = config.penalty {
                agent = agent.with_penalty(p);
            }
            drive(&mut agent, env, config, seed, &mut out);
            if config.snapshots {
                let mut q: Vec<_> = agent.q().iter().map(|((s, a), v)| (s, a, v)).collect();
                q.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
                out.snapshot = Some(json!({
                    "values": agent.values(),
                    "penalized_values": agent.penalized_values(),
                    "q": q,
                    "incorrect": agent.incorrect().snapshot(),
                }));
            }
        }
    }
    out
}

fn run_seed(config: &ExperimentConfig, table: Option<&PrimitiveTable>, seed: u64) -> SeedOutput {
    let mut rng = instance_rng(config.master_seed, seed);
    match build_instance(&config.env, table, &mut rng) {
        Ok(Instance::Grid(env)) => run_on(&env, config, seed, &mut rng),
        Ok(Instance::Lift(env)) => run_on(&env, config, seed, &mut rng),
        Ok(Instance::Lattice(env)) => run_on(&env, config, seed, &mut rng),
        Err(e) => SeedOutput {
            error: Some(e.to_string()),
            ..SeedOutput::default()
        },
    }
}

pub struct RunReport {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<RepetitionSummary>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every seed and writes `results.csv`, `summary.csv`, `manifest.json`
/// and, when enabled, `trace.jsonl` and `snapshots/`. Results of seeds that
/// did run are written even when other seeds fail.
pub fn run_config(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport, RunError> {
    fs::create_dir_all(out_dir)?;
    let table = primitive_table(&config.env)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()?;
    let outputs: Vec<SeedOutput> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| run_seed(config, table.as_ref(), seed))
            .collect()
    });

    let rows: Vec<ResultRow> = outputs
        .iter()
        .flat_map(|o| o.rows.iter().cloned())
        .collect();
    write_csv(&out_dir.join("results.csv"), &rows)?;
    let summary = summarize(&rows, config.seeds.len(), config.repetitions);
    write_csv(&out_dir.join("summary.csv"), &summary)?;

    if config.trace {
        let mut w = BufWriter::new(File::create(out_dir.join("trace.jsonl"))?);
        for line in outputs.iter().flat_map(|o| &o.trace) {
            writeln!(w, "{line}")?;
        }
        w.flush()?;
    }
    if config.snapshots {
        let dir = out_dir.join("snapshots");
        fs::create_dir_all(&dir)?;
        for (seed, o) in config.seeds.iter().zip(&outputs) {
            if let Some(snap) = &o.snapshot {
                fs::write(
                    dir.join(format!("seed-{seed}.json")),
                    serde_json::to_string(snap)?,
                )?;
            }
        }
    }

    let failed: Vec<(u64, String)> = config
        .seeds
        .iter()
        .zip(&outputs)
        .filter_map(|(s, o)| o.error.clone().map(|e| (*s, e)))
        .collect();
    let instances: Vec<_> = config
        .seeds
        .iter()
        .zip(&outputs)
        .map(|(s, o)| json!({ "seed": s, "states": o.states, "error": o.error }))
        .collect();
    let manifest = json!({
        "schema_version": config.schema_version,
        "version": env!("CARGO_PKG_VERSION"),
        "env": config.env.name(),
        "agent": config.agent.name(),
        "schedule": config.schedule.name(),
        "config": config,
        "instances": instances,
    });
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    if !failed.is_empty() {
        return Err(RunError::Seeds(failed));
    }
    Ok(RunReport { rows, summary })
}

#[derive(Serialize)]
struct SeriesRow<'a> {
    schedule: &'a str,
    seed: u64,
    repetition: usize,
    cumulative_steps: usize,
    success: bool,
}

/// Runs `base` once per schedule in `grid`, each into its own subdirectory,
/// and writes the cumulative-steps series of all runs to `series.csv`.
pub fn sweep_schedules(
    base: &ExperimentConfig,
    grid: &ScheduleGrid,
    out_dir: &Path,
) -> Result<Vec<(String, RunReport)>, RunError> {
    fs::create_dir_all(out_dir)?;
    let mut reports = Vec::new();
    for (i, schedule) in grid.schedule.iter().enumerate() {
        let name = format!("{i:02}-{}", schedule.name());
        let config = ExperimentConfig {
            schedule: schedule.clone(),
            ..base.clone()
        };
        let report = run_config(&config, &out_dir.join(&name))?;
        reports.push((name, report));
    }
    let series: Vec<SeriesRow> = reports
        .iter()
        .flat_map(|(name, r)| {
            r.rows.iter().map(move |row| SeriesRow {
                schedule: name,
                seed: row.seed,
                repetition: row.repetition,
                cumulative_steps: row.cumulative_steps,
                success: row.success,
            })
        })
        .collect();
    write_csv(&out_dir.join("series.csv"), &series)?;
    Ok(reports)
}

#[derive(Serialize)]
struct OracleRow {
    state: u32,
    coordinates: String,
    goal: bool,
    model_value: f64,
    true_value: f64,
}

fn oracle_rows<E: Environment>(env: &E) -> Vec<OracleRow> {
    let model = optimal_values(env, Dynamics::Model);
    let truth = optimal_values(env, Dynamics::True);
    (0..env.num_states())
        .map(|i| {
            let s = StateId(i as u32);
            let coords: Vec<String> = env.coordinates(s).iter().map(|c| c.to_string()).collect();
            OracleRow {
                state: s.0,
                coordinates: coords.join(" "),
                goal: env.is_goal(s),
                model_value: model[i],
                true_value: truth[i],
            }
        })
        .collect()
}

/// Writes exact optimal values under the model and the true dynamics for
/// the instance of `seed` as CSV.
pub fn write_oracle<W: Write>(
    config: &ExperimentConfig,
    seed: u64,
    out: W,
) -> Result<(), RunError> {
    let table = primitive_table(&config.env)?;
    let mut rng = instance_rng(config.master_seed, seed);
    let rows = match build_instance(&config.env, table.as_ref(), &mut rng)? {
        Instance::Grid(env) => oracle_rows(&env),
        Instance::Lift(env) => oracle_rows(&env),
        Instance::Lattice(env) => oracle_rows(&env),
    };
    let mut w = csv::Writer::from_writer(out);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
