use std::sync::Arc;

use crate::error::Result;
use crate::evaluation::{best_response_dense, PolicyTable};
use crate::game::{GameTree, Player, Profile};
use crate::solver::Solver;

/// Behavioral policy for `player` that realizes the weighted mixture of `parts`.
///
/// At each infoset the components are combined in proportion to weight × the
/// component's own reach of that infoset, which (under perfect recall) reproduces the
/// mixture's distribution over terminal histories. Infosets no component reaches keep
/// the weight-averaged policy. Entries of the other player are copied from `parts[0]`.
pub fn realization_mixture(tree: &GameTree, player: Player, parts: &[(f64, &Profile)]) -> Profile {
    assert!(!parts.is_empty(), "realization_mixture needs at least one component");
    let reaches: Vec<Vec<f64>> = parts.iter().map(|(_, p)| tree.player_reach(p, player)).collect();
    let mut out = parts[0].1.clone();
    for &i in tree.player_infosets(player) {
        let member = tree.infoset(i).nodes[0];
        let n = tree.infoset(i).num_actions();
        let mut num = vec![0.0; n];
        let mut den = 0.0;
        for ((w, profile), reach) in parts.iter().zip(&reaches) {
            let x = w * reach[member];
            den += x;
            for (acc, p) in num.iter_mut().zip(profile.probs(i)) {
                *acc += x * p;
            }
        }
        if den <= 0.0 {
            num.fill(0.0);
            den = 0.0;
            for (w, profile) in parts {
                den += w;
                for (acc, p) in num.iter_mut().zip(profile.probs(i)) {
                    *acc += w * p;
                }
            }
        }
        out.set(i, num.into_iter().map(|x| x / den).collect());
    }
    out
}

/// One extensive-form fictitious play step: both players best-respond to the current
/// average, and the new average realizes `(1 - α) avg + α BR` with `α = 1 / (t + 1)`.
pub fn xfp_iteration(tree: &GameTree, avg: &Profile, t: usize) -> Profile {
    let alpha = 1.0 / (t as f64 + 1.0);
    let mut next = avg.clone();
    for player in 0..2 {
        let br = best_response_dense(tree, avg, player).to_profile(tree, avg);
        let mixed = realization_mixture(tree, player, &[(1.0 - alpha, avg), (alpha, &br)]);
        next.overwrite_player(tree, player, &mixed);
    }
    next
}

pub struct Xfp {
    tree: Arc<GameTree>,
    pub average: Profile,
    iteration: usize,
    nodes: u64,
}

impl Xfp {
    pub fn new(tree: Arc<GameTree>) -> Self {
        Xfp {
            average: Profile::uniform(&tree),
            tree,
            iteration: 0,
            nodes: 0,
        }
    }
}

impl Solver for Xfp {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        self.average = xfp_iteration(&self.tree, &self.average, self.iteration + 1);
        self.iteration += 1;
        // Two best responses plus the reach sweeps of the mixture.
        self.nodes += 6 * self.tree.nodes().len() as u64;
        Ok(())
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn policy(&mut self) -> Result<PolicyTable> {
        Ok(self.average.to_table(&self.tree))
    }

    fn nodes_touched(&self) -> u64 {
        self.nodes
    }
}
