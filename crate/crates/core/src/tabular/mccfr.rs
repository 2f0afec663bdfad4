use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{regret_matching_into, RegretTable, StrategyAccumulator};
use crate::error::Result;
use crate::evaluation::PolicyTable;
use crate::game::{GameTree, Player, TreeNode};
use crate::solver::Solver;

/// One external-sampling pass for `player`: chance and opponent actions are sampled,
/// the traverser's actions are all enumerated. Returns the number of nodes visited.
pub fn external_sampling_traversal(
    tree: &GameTree,
    regrets: &mut RegretTable,
    acc: &mut StrategyAccumulator,
    player: Player,
    rng: &mut impl Rng,
) -> u64 {
    let mut visited = 0;
    traverse(tree, tree.root(), player, regrets, acc, rng, &mut visited);
    visited
}

fn traverse(
    tree: &GameTree,
    node: usize,
    player: Player,
    regrets: &mut RegretTable,
    acc: &mut StrategyAccumulator,
    rng: &mut impl Rng,
    visited: &mut u64,
) -> f64 {
    *visited += 1;
    match &tree.node(node).kind {
        TreeNode::Terminal { returns } => returns[player],
        TreeNode::Chance { children, probs } => {
            let k = crate::game::sample_index(probs, rng);
            traverse(tree, children[k], player, regrets, acc, rng, visited)
        }
        TreeNode::Decision { player: p, infoset, children } => {
            let mut sigma = vec![0.0; children.len()];
            regret_matching_into(regrets.row(*infoset), &mut sigma);
            if *p == player {
                let values: Vec<f64> = children
                    .iter()
                    .map(|&c| traverse(tree, c, player, regrets, acc, rng, visited))
                    .collect();
                let v: f64 = values.iter().zip(&sigma).map(|(x, s)| x * s).sum();
                for (r, x) in regrets.row_mut(*infoset).iter_mut().zip(&values) {
                    *r += x - v;
                }
                v
            } else {
                // Opponent nodes are reached in proportion to the opponent's reach, so
                // adding the unweighted current strategy yields the average in expectation.
                acc.add(*infoset, 1.0, &sigma);
                let k = crate::game::sample_index(&sigma, rng);
                traverse(tree, children[k], player, regrets, acc, rng, visited)
            }
        }
    }
}

/// One iteration: an external-sampling pass for each player in turn.
pub fn mccfr_external_iteration(
    tree: &GameTree,
    regrets: &mut RegretTable,
    acc: &mut StrategyAccumulator,
    rng: &mut impl Rng,
) -> u64 {
    (0..2)
        .map(|p| external_sampling_traversal(tree, regrets, acc, p, rng))
        .sum()
}

pub struct ExternalSamplingMccfr {
    tree: Arc<GameTree>,
    pub regrets: RegretTable,
    pub acc: StrategyAccumulator,
    rng: ChaCha8Rng,
    iteration: usize,
    nodes: u64,
}

impl ExternalSamplingMccfr {
    pub fn new(tree: Arc<GameTree>, seed: u64) -> Self {
        ExternalSamplingMccfr {
            regrets: RegretTable::zeros(&tree),
            acc: StrategyAccumulator::zeros(&tree),
            tree,
            rng: ChaCha8Rng::seed_from_u64(seed),
            iteration: 0,
            nodes: 0,
        }
    }
}

impl Solver for ExternalSamplingMccfr {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        self.nodes +=
            mccfr_external_iteration(&self.tree, &mut self.regrets, &mut self.acc, &mut self.rng);
        self.iteration += 1;
        Ok(())
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn policy(&mut self) -> Result<PolicyTable> {
        Ok(self.acc.average_profile().to_table(&self.tree))
    }

    fn nodes_touched(&self) -> u64 {
        self.nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::exploitability;
    use crate::game::build_game;
    use crate::tabular::cfr_update_player;

    #[test]
    fn same_seed_same_tables() {
        let tree = Arc::new(GameTree::new(&build_game("kuhn").unwrap()));
        let mut a = ExternalSamplingMccfr::new(tree.clone(), 11);
        let mut b = ExternalSamplingMccfr::new(tree, 11);
        for _ in 0..200 {
            a.step().unwrap();
            b.step().unwrap();
        }
        assert_eq!(a.regrets, b.regrets);
        assert_eq!(a.acc, b.acc);
    }

    #[test]
    fn converges_on_kuhn() {
        let tree = Arc::new(GameTree::new(&build_game("kuhn").unwrap()));
        let mut solver = ExternalSamplingMccfr::new(tree.clone(), 1);
        for _ in 0..10_000 {
            solver.step().unwrap();
        }
        let e = exploitability(&tree, &solver.policy().unwrap()).unwrap();
        assert!(e < 0.05, "exploitability {e}");
    }

    /// The sampled regret update is unbiased for the exact CFR update.
    #[test]
    fn regret_update_matches_cfr_in_expectation() {
        let tree = GameTree::matrix_game(&[vec![3.0, -1.0], vec![-2.0, 1.0]]).unwrap();
        let mut start = RegretTable::zeros(&tree);
        start.row_mut(0).copy_from_slice(&[1.0, 3.0]);
        start.row_mut(1).copy_from_slice(&[2.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for player in 0..2 {
            let infoset = tree.player_infosets(player)[0];
            let mut exact = start.clone();
            cfr_update_player(&tree, &mut exact, &mut StrategyAccumulator::zeros(&tree), player);
            let expected: Vec<f64> = exact
                .row(infoset)
                .iter()
                .zip(start.row(infoset))
                .map(|(a, b)| a - b)
                .collect();

            let n = 100_000;
            let mut sum = [0.0; 2];
            let mut sq = [0.0; 2];
            for _ in 0..n {
                let mut r = start.clone();
                let mut acc = StrategyAccumulator::zeros(&tree);
                external_sampling_traversal(&tree, &mut r, &mut acc, player, &mut rng);
                for a in 0..2 {
                    let d = r.row(infoset)[a] - start.row(infoset)[a];
                    sum[a] += d;
                    sq[a] += d * d;
                }
            }
            for a in 0..2 {
                let mean = sum[a] / n as f64;
                let var = sq[a] / n as f64 - mean * mean;
                let se = (var / n as f64).sqrt();
                assert!(
                    (mean - expected[a]).abs() <= 3.0 * se.max(1e-12),
                    "player {player} action {a}: {mean} vs {} (se {se})",
                    expected[a]
                );
            }
        }
    }
}
