use std::sync::Arc;

use efgsolve::evaluation::{best_response_dense, expected_returns_dense, exploitability_dense};
use efgsolve::game::{build_game, GameTree, Profile, TreeNode};
use efgsolve::psro::{
    br_oracle, fill_payoff_table, matrix_nash_conv, meta_nash_conv, meta_solve, EmpiricalPayoffTable, MetaSolver,
    MetaStrategy, PayoffMode, PolicyPortfolio, Psro, PsroConfig,
};
use efgsolve::Solver;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kuhn() -> Arc<GameTree> {
    Arc::new(GameTree::new(&build_game("kuhn").unwrap()))
}

fn table(cells: Vec<Vec<f64>>) -> EmpiricalPayoffTable {
    EmpiricalPayoffTable::from_cells(cells).unwrap()
}

/// Maximin row strategy of a 2x2 game by scanning p on a fine grid.
fn grid_maximin(a: &[Vec<f64>]) -> (f64, f64) {
    (0..=100_000)
        .map(|k| {
            let p = k as f64 / 100_000.0;
            let worst = (0..2).map(|c| p * a[0][c] + (1.0 - p) * a[1][c]).fold(f64::INFINITY, f64::min);
            (p, worst)
        })
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

#[test]
fn matching_pennies_equilibrium() {
    let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
    let (p, value) = grid_maximin(&a);
    assert!((p - 0.5).abs() < 1e-9 && value.abs() < 1e-9);
    let meta = meta_solve(&table(a.clone()), MetaSolver::Nash, 0).unwrap();
    for probs in &meta.probs {
        assert!((probs[0] - p).abs() < 1e-4 && (probs[1] - (1.0 - p)).abs() < 1e-4, "{probs:?}");
    }
    // The column player's equilibrium is the row player's maximin of the negated transpose.
    let neg_t = vec![vec![-a[0][0], -a[1][0]], vec![-a[0][1], -a[1][1]]];
    assert!((meta.probs[1][0] - grid_maximin(&neg_t).0).abs() < 1e-4);
}

#[test]
fn dominant_row_takes_all_mass() {
    let a = vec![vec![1.0, 2.0, 0.5], vec![0.5, 1.5, 0.0], vec![-1.0, 1.0, 0.4]];
    let meta = meta_solve(&table(a), MetaSolver::Nash, 0).unwrap();
    assert!(meta.probs[0][0] >= 1.0 - 1e-4, "{:?}", meta.probs[0]);
}

#[test]
fn trivial_and_uniform_methods() {
    for method in [MetaSolver::Uniform, MetaSolver::Nash, MetaSolver::Prd] {
        assert_eq!(meta_solve(&table(vec![vec![-0.2]]), method, 10).unwrap().probs, [vec![1.0], vec![1.0]]);
    }
    let meta = meta_solve(&table(vec![vec![1.0, 0.0, 2.0]; 2]), MetaSolver::Uniform, 0).unwrap();
    assert_eq!(meta, MetaStrategy::uniform(2, 3));
}

fn small_portfolio(tree: &GameTree) -> PolicyPortfolio {
    let uniform = Profile::uniform(tree);
    let br = |p| best_response_dense(tree, &uniform, p).to_profile(tree, &uniform);
    PolicyPortfolio::from_policies(vec![uniform.clone(), br(0)], vec![uniform.clone(), br(1)]).unwrap()
}

#[test]
fn sampled_cells_agree_with_exact_values() {
    let tree = kuhn();
    let portfolio = small_portfolio(&tree);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut exact = EmpiricalPayoffTable::new();
    fill_payoff_table(&tree, &portfolio, &mut exact, PayoffMode::Exact, &mut rng).unwrap();
    let mut sampled = EmpiricalPayoffTable::new();
    let sims = 10_000;
    fill_payoff_table(&tree, &portfolio, &mut sampled, PayoffMode::Sampled { sims_per_entry: sims }, &mut rng).unwrap();
    assert_eq!(sampled.shape(), (2, 2));
    for r in 0..2 {
        for c in 0..2 {
            let mut joint = portfolio.policies(0)[r].clone();
            joint.overwrite_player(&tree, 1, &portfolio.policies(1)[c]);
            // Exact second moment of the player-0 return, from terminal probabilities.
            let (r0, r1) = (tree.player_reach(&joint, 0), tree.player_reach(&joint, 1));
            let mut second = 0.0;
            for (z, ret) in tree.terminals() {
                second += tree.node(z).chance_reach * r0[z] * r1[z] * ret[0] * ret[0];
            }
            let mean = exact.get(r, c);
            assert_eq!(mean, expected_returns_dense(&tree, &joint)[0]);
            let se = ((second - mean * mean) / sims as f64).sqrt();
            assert!((sampled.get(r, c) - mean).abs() < 3.0 * se, "cell ({r},{c}): {} vs {mean}", sampled.get(r, c));
        }
    }
}

#[test]
fn mixture_best_response_beats_behavioral_averaging() {
    let tree = kuhn();
    let mut passive = Profile::uniform(&tree);
    let mut aggressive = Profile::uniform(&tree);
    let openings = tree.player_infosets(0).iter().filter(|&&i| tree.node(tree.infoset(i).nodes[0]).history.len() == 2).count();
    assert_eq!(openings, 3);
    for &i in tree.player_infosets(0) {
        let opening = tree.infoset(i).nodes.iter().all(|&n| tree.node(n).history.len() == 2);
        // Passive checks and then always calls; aggressive always bets and would fold.
        passive.set(i, if opening { vec![1.0, 0.0] } else { vec![0.0, 1.0] });
        aggressive.set(i, if opening { vec![0.0, 1.0] } else { vec![1.0, 0.0] });
    }
    let portfolio = PolicyPortfolio::from_policies(vec![passive.clone(), aggressive.clone()], vec![Profile::uniform(&tree)]).unwrap();
    let meta = MetaStrategy { probs: [vec![0.5, 0.5], vec![1.0]] };
    let value_against_mixture = |br: &Profile| -> f64 {
        [&passive, &aggressive]
            .iter()
            .map(|p0| {
                let mut joint = (*p0).clone();
                joint.overwrite_player(&tree, 1, br);
                0.5 * expected_returns_dense(&tree, &joint)[1]
            })
            .sum()
    };
    let mixture_br = br_oracle(&tree, &portfolio, &meta, 1).unwrap();
    let mut averaged = passive.clone();
    for &i in tree.player_infosets(0) {
        averaged.set(i, passive.probs(i).iter().zip(aggressive.probs(i)).map(|(a, b)| 0.5 * (a + b)).collect());
    }
    let naive_br = best_response_dense(&tree, &averaged, 1).to_profile(&tree, &averaged);
    let (good, naive) = (value_against_mixture(&mixture_br), value_against_mixture(&naive_br));
    assert!(good > naive + 1e-3, "mixture BR {good} vs averaged-policy BR {naive}");
}

fn reachable_infosets(tree: &GameTree, responder: usize, opponent: &Profile) -> Vec<usize> {
    let reach = tree.player_reach(opponent, 1 - responder);
    tree.player_infosets(responder)
        .iter()
        .copied()
        .filter(|&i| tree.infoset(i).nodes.iter().any(|&n| reach[n] * tree.node(n).chance_reach > 0.0))
        .collect()
}

#[test]
fn oracle_policies_are_pure_where_reachable() {
    let tree = kuhn();
    let mut psro = Psro::new(tree.clone(), PsroConfig::default()).unwrap();
    for _ in 0..3 {
        psro.step().unwrap();
    }
    let meta = psro.meta().clone();
    let portfolio = psro.portfolio();
    for responder in 0..2 {
        let br = br_oracle(&tree, portfolio, &meta, responder).unwrap();
        for &i in &reachable_infosets(&tree, responder, &portfolio.policies(1 - responder)[0]) {
            assert!(br.probs(i).iter().all(|&p| p == 0.0 || p == 1.0));
        }
    }
}

#[test]
fn pool_grows_by_two_and_oracle_makes_progress() {
    let tree = kuhn();
    let mut psro = Psro::new(tree.clone(), PsroConfig::default()).unwrap();
    for k in 1..=8 {
        let before = psro.pool_length().unwrap();
        let report = meta_nash_conv(&tree, psro.portfolio(), psro.meta());
        let meta = psro.meta().clone();
        let table = psro.table().clone();
        let meta_value: f64 = (0..table.shape().0)
            .map(|r| (0..table.shape().1).map(|c| meta.probs[0][r] * meta.probs[1][c] * table.get(r, c)).sum::<f64>())
            .sum();
        let mut gains = 0.0;
        for responder in 0..2 {
            let br = br_oracle(&tree, psro.portfolio(), &meta, responder).unwrap();
            let value: f64 = psro
                .portfolio()
                .policies(1 - responder)
                .iter()
                .zip(&meta.probs[1 - responder])
                .map(|(opp, w)| {
                    let mut joint = br.clone();
                    joint.overwrite_player(&tree, 1 - responder, opp);
                    w * expected_returns_dense(&tree, &joint)[responder]
                })
                .sum();
            let own = if responder == 0 { meta_value } else { -meta_value };
            assert!(value >= own - 1e-6, "iteration {k}: BR value below the meta value");
            gains += value - own;
        }
        if report.nash_conv >= 1e-6 {
            assert!(gains > 0.0, "iteration {k}: no player improved");
        }
        psro.step().unwrap();
        assert_eq!(psro.pool_length().unwrap(), before + 2);
    }
}

fn trace(method: MetaSolver, steps: usize) -> Vec<(usize, f64)> {
    let mut psro = Psro::new(kuhn(), PsroConfig { meta_strategy_method: method, ..PsroConfig::default() }).unwrap();
    let mut out = Vec::new();
    for _ in 0..steps {
        psro.step().unwrap();
        out.push((psro.pool_length().unwrap(), psro.report().unwrap().exploitability));
    }
    out
}

#[test]
fn nash_meta_solver_converges_and_dominates_uniform() {
    let nash = trace(MetaSolver::Nash, 10);
    assert!(nash.iter().any(|&(pool, e)| pool <= 12 && e < 0.05), "{nash:?}");
    let uniform = trace(MetaSolver::Uniform, 10);
    let worse = nash.iter().zip(&uniform).filter(|(n, u)| u.1 >= n.1).count();
    assert!(worse as f64 >= 0.6 * nash.len() as f64, "{nash:?} vs {uniform:?}");
}

#[test]
fn meta_profile_reports_match_the_flattened_policy() {
    let mut psro = Psro::new(kuhn(), PsroConfig { meta_strategy_method: MetaSolver::Prd, prd_iterations: 5000, ..PsroConfig::default() }).unwrap();
    for _ in 0..4 {
        psro.step().unwrap();
        let tree = psro.tree().clone();
        let direct = psro.report().unwrap().exploitability;
        assert!((direct - exploitability_dense(&tree, &psro.meta_profile())).abs() < 1e-12);
    }
}

#[test]
fn sampled_mode_runs_end_to_end() {
    let config = PsroConfig { exact_payoffs: false, sims_per_entry: 200, seed: 3, ..PsroConfig::default() };
    let mut a = Psro::new(kuhn(), config.clone()).unwrap();
    let mut b = Psro::new(kuhn(), config).unwrap();
    for _ in 0..3 {
        a.step().unwrap();
        b.step().unwrap();
    }
    assert_eq!(a.table(), b.table());
    assert!(a.table().cells().iter().flatten().all(|v| v.abs() <= a.tree().utility_bound()));
}

#[test]
fn terminal_payoffs_bound_the_table() {
    let tree = kuhn();
    let mut psro = Psro::new(tree.clone(), PsroConfig::default()).unwrap();
    for _ in 0..4 {
        psro.step().unwrap();
    }
    let bound = tree
        .nodes()
        .iter()
        .filter_map(|n| match &n.kind {
            TreeNode::Terminal { returns } => Some(returns[0].abs()),
            _ => None,
        })
        .fold(0.0, f64::max);
    assert!(psro.table().cells().iter().flatten().all(|v| v.abs() <= bound));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn meta_solvers_return_distributions(
        rows in 1usize..5,
        cols in 1usize..5,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let t = table(a.clone());
        for method in [MetaSolver::Uniform, MetaSolver::Nash, MetaSolver::Prd] {
            let meta = meta_solve(&t, method, 2000).unwrap();
            prop_assert_eq!(meta.probs[0].len(), rows);
            prop_assert_eq!(meta.probs[1].len(), cols);
            for probs in &meta.probs {
                prop_assert!(probs.iter().all(|&p| p >= 0.0));
                prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            if method == MetaSolver::Nash {
                prop_assert!(matrix_nash_conv(&a, &meta) < 1e-6);
            }
        }
    }
}
