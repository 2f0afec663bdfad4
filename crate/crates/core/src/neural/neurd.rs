use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, layer_sizes, legal_mask};
use crate::approx::{stack, LossKind, Mlp, Optimizer, TrainBatch};
use crate::error::{Error, Result};
use crate::evaluation::PolicyTable;
use crate::game::{GameTree, Player, Profile};
use crate::solver::Solver;
use crate::tabular::{infoset_values, softmax, StrategyAccumulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNeurdConfig {
    pub num_hidden_layers: usize,
    pub num_hidden_units: usize,
    pub use_skip_connections: bool,
    pub batch_size: usize,
    pub threshold: f64,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for NeuralNeurdConfig {
    fn default() -> Self {
        NeuralNeurdConfig {
            num_hidden_layers: 2,
            num_hidden_units: 128,
            use_skip_connections: true,
            batch_size: 100,
            threshold: 2.0,
            step_size: 1.0,
            seed: 0,
        }
    }
}

/// Signal injected into the network outputs: minus the advantage, zeroed where the
/// output already sits beyond the threshold and the advantage would push it further out.
pub fn neurd_output_gradient(logits: &[f64], advantages: &[f64], threshold: f64) -> Vec<f64> {
    logits
        .iter()
        .zip(advantages)
        .map(|(&y, &adv)| {
            let outward = (y >= threshold && adv > 0.0) || (y <= -threshold && adv < 0.0);
            if outward {
                0.0
            } else {
                -adv
            }
        })
        .collect()
}

/// NeuRD with a logit network per player, alternating between players. Each update is a
/// single SGD step of size `step_size` on `batch_size` of the player's infosets, with the
/// exact counterfactual advantages as the logit gradient.
pub struct NeuralNeurd {
    tree: Arc<GameTree>,
    pub config: NeuralNeurdConfig,
    nets: Vec<Mlp>,
    pub acc: StrategyAccumulator,
    rng: ChaCha8Rng,
    iteration: usize,
    nodes: u64,
}

impl NeuralNeurd {
    pub fn new(tree: Arc<GameTree>, config: NeuralNeurdConfig) -> Result<Self> {
        if config.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        let sizes = layer_sizes(tree.feature_width(), config.num_hidden_layers, config.num_hidden_units, tree.max_actions());
        let nets = (0..2)
            .map(|p| Mlp::new(&sizes, derive_seed(config.seed, &[p]), config.use_skip_connections))
            .collect::<Result<Vec<_>>>()?;
        Ok(NeuralNeurd {
            acc: StrategyAccumulator::zeros(&tree),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[u64::MAX])),
            tree,
            config,
            nets,
            iteration: 0,
            nodes: 0,
        })
    }

    pub fn net(&self, player: Player) -> &Mlp {
        &self.nets[player]
    }

    fn logits(&self, player: Player) -> Result<Vec<Vec<f64>>> {
        let out = self.nets[player].forward(&super::player_inputs(&self.tree, player))?;
        Ok(self
            .tree
            .player_infosets(player)
            .iter()
            .zip(out.rows())
            .map(|(&i, row)| row.as_slice().unwrap()[..self.tree.infoset(i).num_actions()].to_vec())
            .collect())
    }

    pub fn current_profile(&self) -> Result<Profile> {
        let mut profile = Profile::uniform(&self.tree);
        for player in 0..2 {
            for (&i, y) in self.tree.player_infosets(player).iter().zip(self.logits(player)?) {
                profile.set(i, softmax(&y));
            }
        }
        Ok(profile)
    }

    fn update(&mut self, player: Player) -> Result<()> {
        let profile = self.current_profile()?;
        let vals = infoset_values(&self.tree, &profile);
        let infosets = self.tree.player_infosets(player).to_vec();
        for &i in &infosets {
            self.acc.add(i, vals.own_reach[i], profile.probs(i));
        }
        let logits = self.logits(player)?;
        let n = self.config.batch_size.min(infosets.len());
        let picks = sample(&mut self.rng, infosets.len(), n).into_vec();
        let width = self.tree.max_actions();
        let mut inputs = Vec::with_capacity(n);
        let mut signal = Vec::with_capacity(n);
        let mut chosen = Vec::with_capacity(n);
        for k in picks {
            let i = infosets[k];
            let mut g = neurd_output_gradient(&logits[k], &vals.advantages(i), self.config.threshold);
            g.resize(width, 0.0);
            inputs.push(self.tree.infoset(i).features.clone());
            signal.push(g);
            chosen.push(i);
        }
        let batch = TrainBatch::new(stack(&inputs)?, stack(&signal)?)?.with_mask(&legal_mask(&self.tree, &chosen, width))?;
        self.nets[player].train_step(&batch, LossKind::CustomGradient, &mut Optimizer::sgd(), self.config.step_size)?;
        Ok(())
    }
}

impl Solver for NeuralNeurd {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        for player in 0..2 {
            self.update(player)?;
        }
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
