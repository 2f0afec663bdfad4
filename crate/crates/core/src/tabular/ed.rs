use std::sync::Arc;

use super::{infoset_values, LogitTable, LrSchedule};
use crate::error::Result;
use crate::evaluation::{best_response_dense, PolicyTable};
use crate::game::{GameTree, Player, Profile};
use crate::solver::Solver;

/// Gradient of `player`'s expected utility under `profile` with respect to the softmax
/// logits at each of its infosets. Rows of the other player are zero.
///
/// Per infoset this is `own_reach * π(b) * (q(b) - v)` with counterfactual `q` and `v`.
pub fn utility_logit_gradient(tree: &GameTree, profile: &Profile, player: Player) -> Vec<Vec<f64>> {
    let vals = infoset_values(tree, profile);
    let mut grad: Vec<Vec<f64>> = tree.infosets().iter().map(|i| vec![0.0; i.num_actions()]).collect();
    for &i in tree.player_infosets(player) {
        let w = vals.own_reach[i];
        let v = vals.v[i];
        for ((g, p), q) in grad[i].iter_mut().zip(profile.probs(i)).zip(&vals.q[i]) {
            *g = w * p * (q - v);
        }
    }
    grad
}

/// Exploitability-descent gradient for `player`: the utility gradient of the softmax
/// policy against a best response of the opponent to the current profile.
pub fn ed_gradient(tree: &GameTree, profile: &Profile, player: Player) -> Vec<Vec<f64>> {
    let br = best_response_dense(tree, profile, 1 - player).to_profile(tree, profile);
    let mut vs_br = profile.clone();
    vs_br.overwrite_player(tree, 1 - player, &br);
    utility_logit_gradient(tree, &vs_br, player)
}

/// One simultaneous ascent step for both players with step size `sched.lr(t)`.
pub fn ed_tabular_iteration(tree: &GameTree, logits: &LogitTable, sched: &LrSchedule, t: usize) -> LogitTable {
    let profile = logits.profile();
    let lr = sched.lr(t);
    let mut next = logits.clone();
    for player in 0..2 {
        let grad = ed_gradient(tree, &profile, player);
        for &i in tree.player_infosets(player) {
            for (y, g) in next.row_mut(i).iter_mut().zip(&grad[i]) {
                *y += lr * g;
            }
        }
    }
    next
}

pub struct ExploitabilityDescent {
    tree: Arc<GameTree>,
    pub logits: LogitTable,
    pub schedule: LrSchedule,
    iteration: usize,
    nodes: u64,
}

impl ExploitabilityDescent {
    pub fn new(tree: Arc<GameTree>, schedule: LrSchedule) -> Self {
        ExploitabilityDescent {
            logits: LogitTable::zeros(&tree),
            tree,
            schedule,
            iteration: 0,
            nodes: 0,
        }
    }
}

impl Solver for ExploitabilityDescent {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        self.logits = ed_tabular_iteration(&self.tree, &self.logits, &self.schedule, self.iteration);
        self.iteration += 1;
        self.nodes += 8 * self.tree.nodes().len() as u64;
        Ok(())
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn policy(&mut self) -> Result<PolicyTable> {
        Ok(self.logits.profile().to_table(&self.tree))
    }

    fn nodes_touched(&self) -> u64 {
        self.nodes
    }
}
