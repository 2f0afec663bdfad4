use std::sync::Arc;

use super::{infoset_values, LogitTable, StrategyAccumulator};
use crate::error::Result;
use crate::evaluation::PolicyTable;
use crate::game::GameTree;
use crate::solver::Solver;

/// Applies `delta` to `logit` only if the result stays inside `[-threshold, threshold]`,
/// then clamps into that interval.
pub fn neurd_gate(logit: f64, delta: f64, threshold: f64) -> f64 {
    let moved = logit + delta;
    let kept = if moved.abs() <= threshold { moved } else { logit };
    kept.clamp(-threshold, threshold)
}

/// One NeuRD iteration with alternating updates. For each player in turn the logits move
/// by `step_size * (q - v)` using exact counterfactual values, gated by `threshold`, and
/// the player's reach-weighted policy is added to `acc` before the update.
pub fn neurd_tabular_iteration(
    tree: &GameTree,
    logits: &mut LogitTable,
    acc: &mut StrategyAccumulator,
    step_size: f64,
    threshold: f64,
) {
    for player in 0..2 {
        let profile = logits.profile();
        let vals = infoset_values(tree, &profile);
        for &i in tree.player_infosets(player) {
            acc.add(i, vals.own_reach[i], profile.probs(i));
            let v = vals.v[i];
            for (y, q) in logits.row_mut(i).iter_mut().zip(&vals.q[i]) {
                *y = neurd_gate(*y, step_size * (q - v), threshold);
            }
        }
    }
}

pub struct TabularNeurd {
    tree: Arc<GameTree>,
    pub logits: LogitTable,
    pub acc: StrategyAccumulator,
    pub step_size: f64,
    pub threshold: f64,
    iteration: usize,
    nodes: u64,
}

impl TabularNeurd {
    pub fn new(tree: Arc<GameTree>, step_size: f64, threshold: f64) -> Self {
        TabularNeurd {
            logits: LogitTable::zeros(&tree),
            acc: StrategyAccumulator::zeros(&tree),
            tree,
            step_size,
            threshold,
            iteration: 0,
            nodes: 0,
        }
    }
}

impl Solver for TabularNeurd {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        neurd_tabular_iteration(&self.tree, &mut self.logits, &mut self.acc, self.step_size, self.threshold);
        self.iteration += 1;
        self.nodes += 2 * self.tree.nodes().len() as u64;
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
