use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{ConfigBuilder, ExperimentConfig};
use super::run::{run_experiment, RunSummary};
use crate::error::{Error, Result};

/// Values to try for each key; runs cover the Cartesian product.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepGrid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl SweepGrid {
    /// Parses `key = a | b | c` lines (`#` comments allowed).
    pub fn parse(origin: &str, text: &str) -> Result<Self> {
        let mut axes: Vec<(String, Vec<String>)> = Vec::new();
        for entry in super::config::parse_lines(origin, text)? {
            let values: Vec<String> = entry.value.split('|').map(|v| v.trim().to_string()).collect();
            if values.iter().any(String::is_empty) {
                return Err(Error::config(format!("{}: key `{}`: empty grid value", entry.origin, entry.key)));
            }
            axes.retain(|(k, _)| *k != entry.key);
            axes.push((entry.key, values));
        }
        Ok(SweepGrid { axes })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }

    /// Every assignment in row-major order; an empty grid yields one empty assignment.
    pub fn assignments(&self) -> Vec<Vec<(String, String)>> {
        let mut out = vec![Vec::new()];
        for (key, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut next = prefix.clone();
                        next.push((key.clone(), v.clone()));
                        next
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub run_id: usize,
    pub assignment: Vec<(String, String)>,
    pub config: ExperimentConfig,
    pub result: std::result::Result<RunSummary, String>,
}

pub fn run_csv_path(out_dir: &Path, run_id: usize) -> PathBuf {
    out_dir.join(format!("run_{run_id:03}.csv"))
}

pub fn index_path(out_dir: &Path) -> PathBuf {
    out_dir.join("index.csv")
}

/// Runs every grid assignment on top of `base`, writing `run_NNN.csv` files and an
/// `index.csv` into `out_dir`. Run `k` uses seed `base seed + k` unless the grid sets
/// `seed`. Failed runs are recorded in the index and do not stop the sweep.
pub fn sweep(base: &ConfigBuilder, grid: &SweepGrid, out_dir: &Path, parallelism: usize) -> Result<Vec<SweepOutcome>> {
    let base_config = base.build()?;
    let sets_seed = grid.axes.iter().any(|(k, _)| k == "seed");
    let mut jobs = Vec::new();
    for (run_id, assignment) in grid.assignments().into_iter().enumerate() {
        let mut builder = base.clone();
        if !sets_seed {
            builder = builder.set("seed", base_config.seed + run_id as u64);
        }
        for (k, v) in &assignment {
            builder = builder.set(k, v);
        }
        let config = builder.set("out", run_csv_path(out_dir, run_id).display()).build()?;
        jobs.push((run_id, assignment, config));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let index_file = index_path(out_dir);
    let mut index = csv::Writer::from_path(&index_file).map_err(|e| Error::io(&index_file, e.into()))?;
    index
        .write_record(["run_id", "status", "seed", "csv", "best_exploitability", "params"])
        .and_then(|_| index.flush().map_err(Into::into))
        .map_err(|e| Error::io(&index_file, e.into()))?;
    let index = Mutex::new(index);
    let outcomes = Mutex::new(Vec::with_capacity(jobs.len()));
    let next = AtomicUsize::new(0);
    let write_error = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..parallelism.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some((run_id, assignment, config)) = jobs.get(k) else { break };
                let result = run_experiment(config).map_err(|e| e.to_string());
                let (status, best) = match &result {
                    Ok(summary) => ("ok".to_string(), summary.best_exploitability.to_string()),
                    Err(msg) => (format!("error: {msg}"), String::new()),
                };
                let params = assignment.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
                let csv_name = run_csv_path(Path::new(""), *run_id).display().to_string();
                let row = [run_id.to_string(), status, config.seed.to_string(), csv_name, best, params];
                let mut w = index.lock().unwrap();
                if let Err(e) = w.write_record(&row).and_then(|_| w.flush().map_err(Into::into)) {
                    write_error.lock().unwrap().get_or_insert(e);
                }
                drop(w);
                outcomes.lock().unwrap().push(SweepOutcome {
                    run_id: *run_id,
                    assignment: assignment.clone(),
                    config: config.clone(),
                    result,
                });
            });
        }
    });
    if let Some(e) = write_error.into_inner().unwrap() {
        return Err(Error::io(&index_file, e.into()));
    }
    let mut outcomes = outcomes.into_inner().unwrap();
    outcomes.sort_by_key(|o| o.run_id);
    Ok(outcomes)
}
