use std::sync::Arc;

use super::{infoset_values, RegretTable, StrategyAccumulator};
use crate::error::Result;
use crate::evaluation::PolicyTable;
use crate::game::{GameTree, Player};
use crate::solver::Solver;

/// Regret and average-strategy update for one player against the current profile.
pub fn cfr_update_player(
    tree: &GameTree,
    regrets: &mut RegretTable,
    acc: &mut StrategyAccumulator,
    player: Player,
) {
    let profile = regrets.current_profile();
    let vals = infoset_values(tree, &profile);
    for &i in tree.player_infosets(player) {
        let v = vals.v[i];
        for (r, q) in regrets.row_mut(i).iter_mut().zip(&vals.q[i]) {
            *r += q - v;
        }
        acc.add(i, vals.own_reach[i], profile.probs(i));
    }
}

/// One vanilla CFR iteration with alternating updates (player 0, then player 1).
pub fn cfr_iteration(tree: &GameTree, regrets: &mut RegretTable, acc: &mut StrategyAccumulator) {
    for p in 0..2 {
        cfr_update_player(tree, regrets, acc, p);
    }
}

pub struct Cfr {
    tree: Arc<GameTree>,
    pub regrets: RegretTable,
    pub acc: StrategyAccumulator,
    iteration: usize,
    nodes: u64,
}

impl Cfr {
    pub fn new(tree: Arc<GameTree>) -> Self {
        Cfr {
            regrets: RegretTable::zeros(&tree),
            acc: StrategyAccumulator::zeros(&tree),
            tree,
            iteration: 0,
            nodes: 0,
        }
    }

    pub fn average_policy(&self) -> PolicyTable {
        self.acc.average_profile().to_table(&self.tree)
    }
}

impl Solver for Cfr {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        cfr_iteration(&self.tree, &mut self.regrets, &mut self.acc);
        self.iteration += 1;
        self.nodes += 2 * self.tree.nodes().len() as u64;
        Ok(())
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn policy(&mut self) -> Result<PolicyTable> {
        Ok(self.average_policy())
    }

    fn nodes_touched(&self) -> u64 {
        self.nodes
    }
}
