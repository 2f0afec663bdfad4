use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{parse_bool, parse_count, parse_f64, parse_sizes, Algorithm, ExperimentConfig, Kind, Preset};
use crate::approx::{ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
use crate::error::{Error, Result};
use crate::game::{build_game, GameTree};
use crate::neural::{
    DeepCfr, DeepCfrConfig, NeuralEd, NeuralEdConfig, NeuralNeurd, NeuralNeurdConfig, Nfsp, NfspConfig, Rcfr,
    RcfrConfig,
};
use crate::psro::{MetaSolver, Psro, PsroConfig, NASH_MAX_ITERATIONS, NASH_TOLERANCE, PRD_GAMMA, PRD_STEP};
use crate::solver::Solver;
use crate::tabular::{Cfr, ExploitabilityDescent, ExternalSamplingMccfr, LrSchedule, PgVariant, PolicyGradient, TabularNeurd, Xfp};

/// One evaluation checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iteration: usize,
    pub nash_conv: f64,
    pub exploitability: f64,
    pub nodes_touched: u64,
    pub wall_ms: u64,
    pub seed: u64,
    pub pool_length: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub records: Vec<RunRecord>,
    pub best_exploitability: f64,
    pub best_iteration: usize,
}

impl RunSummary {
    pub fn last(&self) -> &RunRecord {
        self.records.last().expect("a run always records its final iteration")
    }
}

/// A solver plus the fully resolved settings it was built from.
pub struct BuiltSolver {
    pub solver: Box<dyn Solver>,
    pub resolved: Value,
    /// Keys that were accepted but have no effect on this algorithm.
    pub ignored: Vec<String>,
}

struct Params<'a>(&'a ExperimentConfig);

impl Params<'_> {
    fn f64(&self, key: &str, default: f64) -> f64 {
        self.0.param(key).and_then(parse_f64).unwrap_or(default)
    }

    fn usize(&self, key: &str, default: usize) -> usize {
        self.0.param(key).and_then(parse_count).map_or(default, |n| n as usize)
    }

    fn u64(&self, key: &str, default: u64) -> u64 {
        self.0.param(key).and_then(parse_count).unwrap_or(default)
    }

    fn i64(&self, key: &str, default: i64) -> i64 {
        self.0.param(key).and_then(|v| v.parse().ok()).unwrap_or(default)
    }

    fn bool(&self, key: &str, default: bool) -> bool {
        self.0.param(key).and_then(parse_bool).unwrap_or(default)
    }

    fn sizes(&self, key: &str, default: Vec<usize>) -> Vec<usize> {
        self.0.param(key).and_then(parse_sizes).unwrap_or(default)
    }

    fn parsed<T: std::str::FromStr<Err = Error>>(&self, key: &str, default: T) -> Result<T> {
        self.0.param(key).map_or(Ok(default), str::parse)
    }
}

pub fn build_solver(config: &ExperimentConfig, tree: Arc<GameTree>) -> Result<BuiltSolver> {
    let p = Params(config);
    let seed = config.seed;
    let ignored: Vec<String> = config
        .params
        .keys()
        .filter(|k| config.algorithm.key_kind(k) == Some(Kind::Ignored))
        .cloned()
        .collect();
    let (solver, resolved): (Box<dyn Solver>, Value) = match config.algorithm {
        Algorithm::Cfr => (Box::new(Cfr::new(tree)), json!({})),
        Algorithm::Mccfr => (Box::new(ExternalSamplingMccfr::new(tree, seed)), json!({ "seed": seed })),
        Algorithm::Xfp => (Box::new(Xfp::new(tree)), json!({})),
        Algorithm::Ed => {
            let schedule = LrSchedule { init_lr: p.f64("init_lr", 1.0), lr_scale: p.f64("lr_scale", 0.01) };
            (Box::new(ExploitabilityDescent::new(tree, schedule)), serde_json::to_value(schedule).unwrap())
        }
        Algorithm::EdNn => {
            let d = NeuralEdConfig::default();
            let c = NeuralEdConfig {
                init_lr: p.f64("init_lr", d.init_lr),
                lr_scale: p.f64("lr_scale", d.lr_scale),
                regularizer_scale: p.f64("regularizer_scale", d.regularizer_scale),
                num_hidden: p.usize("num_hidden", d.num_hidden),
                num_layers: p.usize("num_layers", d.num_layers),
                steps_per_br: p.usize("steps_per_br", d.steps_per_br),
                seed,
            };
            let v = serde_json::to_value(&c).unwrap();
            (Box::new(NeuralEd::new(tree, c)?), v)
        }
        Algorithm::Neurd => {
            let (step, thr) = (p.f64("step_size", 1.0), p.f64("threshold", 2.0));
            (Box::new(TabularNeurd::new(tree, step, thr)), json!({ "step_size": step, "threshold": thr }))
        }
        Algorithm::NeurdNn => {
            let d = NeuralNeurdConfig::default();
            let c = NeuralNeurdConfig {
                num_hidden_layers: p.usize("num_hidden_layers", d.num_hidden_layers),
                num_hidden_units: p.usize("num_hidden_units", d.num_hidden_units),
                use_skip_connections: p.bool("use_skip_connections", d.use_skip_connections),
                batch_size: p.usize("batch_size", d.batch_size),
                threshold: p.f64("threshold", d.threshold),
                step_size: p.f64("step_size", d.step_size),
                seed,
            };
            let v = serde_json::to_value(&c).unwrap();
            (Box::new(NeuralNeurd::new(tree, c)?), v)
        }
        Algorithm::Qpg | Algorithm::Rpg | Algorithm::Rmpg => {
            let variant: PgVariant = config.algorithm.as_str().parse()?;
            let (lr, entropy) = (p.f64("pi_learning_rate", 0.01), p.f64("entropy_cost", 0.1));
            let v = json!({ "variant": variant, "pi_learning_rate": lr, "entropy_cost": entropy });
            (Box::new(PolicyGradient::new(tree, variant, lr, entropy)), v)
        }
        Algorithm::Rcfr => {
            let d = RcfrConfig::default();
            let c = RcfrConfig {
                num_hidden_layers: p.usize("num_hidden_layers", d.num_hidden_layers),
                num_hidden_units: p.usize("num_hidden_units", d.num_hidden_units),
                use_skip_connections: p.bool("use_skip_connections", d.use_skip_connections),
                num_epochs: p.usize("num_epochs", d.num_epochs),
                batch_size: p.usize("batch_size", d.batch_size),
                step_size: p.f64("step_size", d.step_size),
                bootstrap: p.bool("bootstrap", d.bootstrap),
                truncate_negative: p.bool("truncate_negative", d.truncate_negative),
                buffer_size: p.i64("buffer_size", d.buffer_size),
                seed,
            };
            let v = serde_json::to_value(&c).unwrap();
            (Box::new(Rcfr::new(tree, c)?), v)
        }
        Algorithm::DeepCfr => {
            let d = match config.preset {
                Preset::Paper => DeepCfrConfig::default(),
                Preset::KuhnDesk => DeepCfrConfig::kuhn_desk(),
            };
            let c = DeepCfrConfig {
                num_traversals: p.usize("num_traversals", d.num_traversals),
                batch_size_advantage: p.usize("batch_size_advantage", d.batch_size_advantage),
                batch_size_strategy: p.usize("batch_size_strategy", d.batch_size_strategy),
                num_hidden: p.usize("num_hidden", d.num_hidden),
                num_layers: p.usize("num_layers", d.num_layers),
                reinitialize_advantage_networks: p.bool("reinitialize_advantage_networks", d.reinitialize_advantage_networks),
                learning_rate: p.f64("learning_rate", d.learning_rate),
                memory_capacity: p.usize("memory_capacity", d.memory_capacity),
                policy_network_train_steps: p.usize("policy_network_train_steps", d.policy_network_train_steps),
                advantage_network_train_steps: p.usize("advantage_network_train_steps", d.advantage_network_train_steps),
                seed,
            };
            let v = serde_json::to_value(&c).unwrap();
            (Box::new(DeepCfr::new(tree, c)?), v)
        }
        Algorithm::Nfsp => {
            let d = match config.preset {
                Preset::Paper => NfspConfig::default(),
                Preset::KuhnDesk => NfspConfig::kuhn_desk(),
            };
            let c = NfspConfig {
                hidden_layers_sizes: p.sizes("hidden_layers_sizes", d.hidden_layers_sizes.clone()),
                replay_buffer_capacity: p.usize("replay_buffer_capacity", d.replay_buffer_capacity),
                reservoir_buffer_capacity: p.usize("reservoir_buffer_capacity", d.reservoir_buffer_capacity),
                min_buffer_size_to_learn: p.usize("min_buffer_size_to_learn", d.min_buffer_size_to_learn),
                anticipatory_param: p.f64("anticipatory_param", d.anticipatory_param),
                batch_size: p.usize("batch_size", d.batch_size),
                learn_every: p.u64("learn_every", d.learn_every),
                rl_learning_rate: p.f64("rl_learning_rate", d.rl_learning_rate),
                sl_learning_rate: p.f64("sl_learning_rate", d.sl_learning_rate),
                optimizer_str: p.parsed("optimizer_str", d.optimizer_str)?,
                update_target_network_every: p.u64("update_target_network_every", d.update_target_network_every),
                discount_factor: p.f64("discount_factor", d.discount_factor),
                epsilon_decay_duration: p.u64("epsilon_decay_duration", d.epsilon_decay_duration),
                epsilon_start: p.f64("epsilon_start", d.epsilon_start),
                epsilon_end: p.f64("epsilon_end", d.epsilon_end),
                seed,
            };
            let v = serde_json::to_value(&c).unwrap();
            (Box::new(Nfsp::new(tree, c)?), v)
        }
        Algorithm::Psro => {
            let d = PsroConfig::default();
            let c = PsroConfig {
                meta_strategy_method: p.parsed::<MetaSolver>("meta_strategy_method", d.meta_strategy_method)?,
                number_policies_selected: p.usize("number_policies_selected", d.number_policies_selected),
                sims_per_entry: p.usize("sims_per_entry", d.sims_per_entry),
                exact_payoffs: p.bool("exact_payoffs", d.exact_payoffs),
                prd_iterations: p.usize("prd_iterations", d.prd_iterations),
                seed,
            };
            let v = serde_json::to_value(&c).unwrap();
            (Box::new(Psro::new(tree, c)?), v)
        }
    };
    Ok(BuiltSolver { solver, resolved, ignored })
}

/// `run.csv` → `run.meta.json`.
pub fn metadata_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

fn metadata(config: &ExperimentConfig, tree: &GameTree, resolved: &Value) -> Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "game": config.game,
        "algorithm": config.algorithm,
        "preset": config.preset,
        "iterations": config.iterations,
        "eval_every": config.eval_every,
        "seed": config.seed,
        "params": config.params,
        "resolved": resolved,
        "pinned": {
            "float": "f64",
            "init": "uniform(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))), zero biases",
            "adam": { "beta1": ADAM_BETA1, "beta2": ADAM_BETA2, "epsilon": ADAM_EPSILON },
            "ed_lr_rule": "init_lr / (1 + lr_scale * t)",
            "nash_meta_solver": { "tolerance": NASH_TOLERANCE, "max_iterations": NASH_MAX_ITERATIONS },
            "prd": { "step": PRD_STEP, "gamma": PRD_GAMMA },
            "feature_width": tree.feature_width(),
        },
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Runs one experiment, evaluating every `eval_every` iterations and after the last.
/// With `config.out` set, rows are written and flushed as they are produced, next to a
/// `.meta.json` sidecar describing the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    let tree = Arc::new(GameTree::new(&build_game(&config.game)?));
    let BuiltSolver { mut solver, resolved, ignored } = build_solver(config, tree.clone())?;
    for key in &ignored {
        log::info!("{} accepts `{key}` for compatibility but does not use it", config.algorithm);
    }
    let mut writer = match &config.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let meta = serde_json::to_string_pretty(&metadata(config, &tree, &resolved)).unwrap() + "\n";
            let meta_path = metadata_path(path);
            std::fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = csv::Writer::from_writer(file);
            let mut header = vec!["iteration", "nash_conv", "exploitability", "nodes_touched", "wall_ms", "seed"];
            if solver.pool_length().is_some() {
                header.push("pool_length");
            }
            w.write_record(&header).map_err(|e| csv_error(path, e))?;
            Some((path.clone(), w))
        }
        None => None,
    };

    let start = Instant::now();
    let mut records = Vec::new();
    for it in 1..=config.iterations {
        solver.step()?;
        if it % config.eval_every != 0 && it != config.iterations {
            continue;
        }
        let report = solver.report()?;
        let record = RunRecord {
            iteration: it,
            nash_conv: report.nash_conv,
            exploitability: report.exploitability,
            nodes_touched: solver.nodes_touched(),
            wall_ms: start.elapsed().as_millis() as u64,
            seed: config.seed,
            pool_length: solver.pool_length(),
        };
        log::debug!("{} iteration {it}: exploitability {}", config.algorithm, record.exploitability);
        if let Some((path, w)) = &mut writer {
            let mut row = vec![
                record.iteration.to_string(),
                record.nash_conv.to_string(),
                record.exploitability.to_string(),
                record.nodes_touched.to_string(),
                record.wall_ms.to_string(),
                record.seed.to_string(),
            ];
            if let Some(n) = record.pool_length {
                row.push(n.to_string());
            }
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
            w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        records.push(record);
    }
    let best = records
        .iter()
        .min_by(|a, b| a.exploitability.total_cmp(&b.exploitability))
        .expect("iterations is positive");
    let summary = RunSummary { best_exploitability: best.exploitability, best_iteration: best.iteration, records: records.clone() };
    log::info!(
        "{} on {}: final exploitability {} at iteration {}, best {} at iteration {}",
        config.algorithm,
        config.game,
        summary.last().exploitability,
        summary.last().iteration,
        summary.best_exploitability,
        summary.best_iteration
    );
    Ok(summary)
}
