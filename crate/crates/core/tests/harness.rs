use std::fs;
use std::path::Path;

use efgsolve::harness::{index_path, metadata_path, run_csv_path, run_experiment, sweep, ConfigBuilder, SweepGrid};

fn builder(alg: &str, iterations: usize, eval_every: usize) -> ConfigBuilder {
    ConfigBuilder::new()
        .set("game", "kuhn")
        .set("algorithm", alg)
        .set("iterations", iterations)
        .set("eval_every", eval_every)
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn cfr_run_writes_header_and_ten_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cfr.csv");
    let config = builder("cfr", 1000, 100).set("out", out.display()).build().unwrap();
    let summary = run_experiment(&config).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    assert!(!text.contains('\r'));
    let rows = read_rows(&out);
    assert_eq!(rows[0].join(","), "iteration,nash_conv,exploitability,nodes_touched,wall_ms,seed");
    assert_eq!(rows.len(), 11);
    let iterations: Vec<usize> = rows[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(iterations, (1..=10).map(|k| k * 100).collect::<Vec<_>>());
    for r in &rows[1..] {
        let nash_conv: f64 = r[1].parse().unwrap();
        let expl: f64 = r[2].parse().unwrap();
        assert!(expl >= -1e-9);
        assert_eq!(expl, nash_conv / 2.0);
    }
    assert_eq!(summary.records.len(), 10);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(metadata_path(&out)).unwrap()).unwrap();
    assert_eq!(meta["algorithm"], "cfr");
    assert_eq!(meta["pinned"]["feature_width"], 11);
}

#[test]
fn trailing_partial_interval_is_recorded() {
    let config = builder("cfr", 250, 100).build().unwrap();
    let summary = run_experiment(&config).unwrap();
    let its: Vec<usize> = summary.records.iter().map(|r| r.iteration).collect();
    assert_eq!(its, vec![100, 200, 250]);
}

fn without_wall_clock(path: &Path) -> Vec<Vec<String>> {
    read_rows(path)
        .into_iter()
        .map(|mut r| {
            r.remove(4);
            r
        })
        .collect()
}

#[test]
fn identical_configs_give_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    for alg in ["mccfr", "nfsp"] {
        let paths: Vec<_> = (0..2).map(|k| dir.path().join(format!("{alg}{k}.csv"))).collect();
        for p in &paths {
            let b = builder(alg, 3000, 1000).set("seed", 11).set("preset", "kuhn_desk").set("out", p.display());
            run_experiment(&b.build().unwrap()).unwrap();
        }
        assert_eq!(without_wall_clock(&paths[0]), without_wall_clock(&paths[1]), "{alg}");
    }
}

#[test]
fn xfp_log_log_shape() {
    let config = builder("xfp", 1000, 1).build().unwrap();
    let summary = run_experiment(&config).unwrap();
    let first = summary.records[0].exploitability;
    assert!(summary.last().exploitability < first / 10.0);
    // A least-squares fit of log exploitability on log iteration slopes downward.
    let pts: Vec<(f64, f64)> = summary.records.iter().map(|r| ((r.iteration as f64).ln(), r.exploitability.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(slope < -0.3, "slope {slope}");
}

#[test]
fn psro_rows_carry_pool_length() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("psro.csv");
    run_experiment(&builder("psro", 3, 1).set("out", out.display()).build().unwrap()).unwrap();
    let rows = read_rows(&out);
    assert_eq!(rows[0].last().unwrap(), "pool_length");
    let pools: Vec<&str> = rows[1..].iter().map(|r| r[6].as_str()).collect();
    assert_eq!(pools, ["4", "6", "8"]);
}

#[test]
fn sweep_runs_every_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let grid = SweepGrid::parse("g", "step_size = .1 | .01 | .001").unwrap();
    let outcomes = sweep(&builder("neurd", 20, 10), &grid, dir.path(), 2).unwrap();
    assert_eq!(outcomes.len(), 3);
    for k in 0..3 {
        assert!(run_csv_path(dir.path(), k).exists());
    }
    assert_eq!(read_rows(&index_path(dir.path())).len(), 4);
}

#[test]
fn empty_grid_is_the_base_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = builder("cfr", 50, 10).set("seed", 9);
    let outcomes = sweep(&base, &SweepGrid::parse("g", "# nothing\n").unwrap(), dir.path(), 4).unwrap();
    assert_eq!(outcomes.len(), 1);
    assert_eq!(outcomes[0].config.seed, 9);
    let direct = run_experiment(&base.build().unwrap()).unwrap();
    let swept = outcomes[0].result.as_ref().unwrap();
    let strip = |s: &efgsolve::harness::RunSummary| s.records.iter().map(|r| (r.iteration, r.exploitability)).collect::<Vec<_>>();
    assert_eq!(strip(swept), strip(&direct));
}

#[test]
fn two_by_three_grid_indexes_six_runs() {
    let dir = tempfile::tempdir().unwrap();
    let grid = SweepGrid::parse("g", "init_lr = 1.0 | 0.5\nlr_scale = .01 | .1 | 0").unwrap();
    sweep(&builder("ed", 10, 5), &grid, dir.path(), 3).unwrap();
    let rows = read_rows(&index_path(dir.path()));
    assert_eq!(rows.len(), 7);
    let mut seeds: Vec<&str> = rows[1..].iter().map(|r| r[2].as_str()).collect();
    seeds.sort();
    seeds.dedup();
    assert_eq!(seeds.len(), 6);
}

#[test]
fn failed_runs_are_indexed_and_the_sweep_continues() {
    let dir = tempfile::tempdir().unwrap();
    let grid = SweepGrid::parse("g", "buffer_size = 5 | -1\nnum_hidden_units = 8\nnum_epochs = 1").unwrap();
    let outcomes = sweep(&builder("rcfr", 2, 1), &grid, dir.path(), 1).unwrap();
    assert!(outcomes[0].result.is_err());
    assert!(outcomes[1].result.is_ok());
    let rows = read_rows(&index_path(dir.path()));
    assert!(rows[1..].iter().any(|r| r[1].starts_with("error")));
    assert!(rows[1..].iter().any(|r| r[1] == "ok"));
}

#[test]
fn grid_keys_are_validated_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let grid = SweepGrid::parse("g", "bogus = 1 | 2").unwrap();
    assert!(sweep(&builder("cfr", 10, 5), &grid, dir.path(), 1).is_err());
    assert!(!index_path(dir.path()).exists());
}
