use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{derive_seed, layer_sizes, legal_mask, player_inputs, softmax_readout};
use crate::approx::{stack, LossKind, Mlp, Optimizer, TrainBatch};
use crate::error::{Error, Result};
use crate::evaluation::{best_response_dense, PolicyTable};
use crate::game::{GameTree, Player, Profile};
use crate::solver::Solver;
use crate::tabular::{utility_logit_gradient, LrSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralEdConfig {
    pub init_lr: f64,
    pub lr_scale: f64,
    pub regularizer_scale: f64,
    pub num_hidden: usize,
    pub num_layers: usize,
    /// Gradient steps taken against each best response before recomputing it.
    pub steps_per_br: usize,
    pub seed: u64,
}

impl Default for NeuralEdConfig {
    fn default() -> Self {
        NeuralEdConfig {
            init_lr: 1.0,
            lr_scale: 0.01,
            regularizer_scale: 0.001,
            num_hidden: 256,
            num_layers: 3,
            steps_per_br: 1,
            seed: 0,
        }
    }
}

/// Exploitability descent with one softmax policy network per player.
///
/// Each iteration computes a best response to the current profile for each opponent and
/// takes `steps_per_br` SGD steps on `-u_i(π_i, BR) + regularizer_scale * ½|θ|²`.
pub struct NeuralEd {
    tree: Arc<GameTree>,
    pub config: NeuralEdConfig,
    nets: Vec<Mlp>,
    iteration: usize,
    nodes: u64,
}

impl NeuralEd {
    pub fn new(tree: Arc<GameTree>, config: NeuralEdConfig) -> Result<Self> {
        if config.steps_per_br == 0 {
            return Err(Error::config("steps_per_br must be at least 1"));
        }
        let sizes = layer_sizes(tree.feature_width(), config.num_layers, config.num_hidden, tree.max_actions());
        let nets = (0..2)
            .map(|p| Mlp::new(&sizes, derive_seed(config.seed, &[p]), false))
            .collect::<Result<Vec<_>>>()?;
        Ok(NeuralEd { tree, config, nets, iteration: 0, nodes: 0 })
    }

    pub fn net(&self, player: Player) -> &Mlp {
        &self.nets[player]
    }

    pub fn current_profile(&self) -> Result<Profile> {
        let mut profile = Profile::uniform(&self.tree);
        for player in 0..2 {
            for (&i, probs) in self.tree.player_infosets(player).iter().zip(softmax_readout(&self.tree, &self.nets[player], player)?) {
                profile.set(i, probs);
            }
        }
        Ok(profile)
    }

    fn schedule(&self) -> LrSchedule {
        LrSchedule { init_lr: self.config.init_lr, lr_scale: self.config.lr_scale }
    }

    /// One SGD step for `player` against the fixed opponent policy in `opponent`.
    fn descend(&mut self, player: Player, opponent: &Profile, lr: f64) -> Result<()> {
        let tree = &self.tree;
        let mut profile = opponent.clone();
        for (&i, probs) in tree.player_infosets(player).iter().zip(softmax_readout(tree, &self.nets[player], player)?) {
            profile.set(i, probs);
        }
        let grad = utility_logit_gradient(tree, &profile, player);
        let infosets = tree.player_infosets(player);
        let width = tree.max_actions();
        // Loss gradient is minus the utility gradient; rows are summed, not averaged.
        let n = infosets.len() as f64;
        let signal: Vec<Vec<f64>> = infosets
            .iter()
            .map(|&i| (0..width).map(|c| grad[i].get(c).map_or(0.0, |g| -n * g)).collect())
            .collect();
        let batch = TrainBatch::new(player_inputs(tree, player), stack(&signal)?)?.with_mask(&legal_mask(tree, infosets, width))?;
        let mut opt = Optimizer::sgd().with_l2(self.config.regularizer_scale);
        self.nets[player].train_step(&batch, LossKind::CustomGradient, &mut opt, lr)?;
        Ok(())
    }
}

impl Solver for NeuralEd {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        let profile = self.current_profile()?;
        let lr = self.schedule().lr(self.iteration);
        for player in 0..2 {
            let br = best_response_dense(&self.tree, &profile, 1 - player).to_profile(&self.tree, &profile);
            for _ in 0..self.config.steps_per_br {
                self.descend(player, &br, lr)?;
            }
        }
        self.iteration += 1;
        self.nodes += (4 + 2 * self.config.steps_per_br as u64) * self.tree.nodes().len() as u64;
        Ok(())
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn policy(&mut self) -> Result<PolicyTable> {
        Ok(self.current_profile()?.to_table(&self.tree))
    }

    fn nodes_touched(&self) -> u64 {
        self.nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::build_game;

    #[test]
    fn zero_gradient_leaves_only_shrinkage() {
        // Constant payoffs: every action value is equal, so the utility gradient vanishes.
        let tree = Arc::new(GameTree::matrix_game(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap());
        let config = NeuralEdConfig { num_hidden: 8, num_layers: 1, lr_scale: 0.0, ..NeuralEdConfig::default() };
        let mut ed = NeuralEd::new(tree, config).unwrap();
        let before: Vec<Vec<f64>> = (0..2).map(|p| ed.net(p).params()).collect();
        ed.step().unwrap();
        for p in 0..2 {
            for (a, b) in ed.net(p).params().iter().zip(&before[p]) {
                assert!((a - b * (1.0 - 0.001)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn multi_step_variant_runs() {
        let tree = Arc::new(GameTree::new(&build_game("kuhn").unwrap()));
        let config = NeuralEdConfig { num_hidden: 16, num_layers: 1, steps_per_br: 3, ..NeuralEdConfig::default() };
        let mut ed = NeuralEd::new(tree, config).unwrap();
        ed.step().unwrap();
        assert_eq!(ed.iteration(), 1);
        assert!(NeuralEd::new(ed.tree().clone(), NeuralEdConfig { steps_per_br: 0, ..NeuralEdConfig::default() }).is_err());
    }
}
