use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, layer_sizes, legal_mask};
use crate::approx::{LossKind, Mlp, Optimizer, ReservoirBuffer, TrainBatch};
use crate::error::{Error, Result};
use crate::evaluation::PolicyTable;
use crate::game::{sample_index, GameTree, Player, Profile, TreeNode};
use crate::solver::Solver;
use crate::tabular::softmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepCfrConfig {
    pub num_traversals: usize,
    pub batch_size_advantage: usize,
    pub batch_size_strategy: usize,
    pub num_hidden: usize,
    pub num_layers: usize,
    pub reinitialize_advantage_networks: bool,
    pub learning_rate: f64,
    pub memory_capacity: usize,
    pub policy_network_train_steps: usize,
    pub advantage_network_train_steps: usize,
    pub seed: u64,
}

impl DeepCfrConfig {
    /// Desk-scale Kuhn settings.
    pub fn kuhn_desk() -> Self {
        DeepCfrConfig {
            num_traversals: 200,
            batch_size_advantage: 256,
            batch_size_strategy: 256,
            advantage_network_train_steps: 200,
            policy_network_train_steps: 1000,
            memory_capacity: 100_000,
            ..DeepCfrConfig::default()
        }
    }
}

impl Default for DeepCfrConfig {
    fn default() -> Self {
        DeepCfrConfig {
            num_traversals: 1500,
            batch_size_advantage: 2048,
            batch_size_strategy: 2048,
            num_hidden: 64,
            num_layers: 3,
            reinitialize_advantage_networks: true,
            learning_rate: 1e-3,
            memory_capacity: 1_000_000,
            policy_network_train_steps: 5000,
            advantage_network_train_steps: 750,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Sample {
    infoset: usize,
    iteration: usize,
    values: Vec<f64>,
}

/// Deep CFR: external-sampling traversals guided by regret matching on per-player
/// advantage networks, with a policy network fit to the sampled opponent strategies.
pub struct DeepCfr {
    tree: Arc<GameTree>,
    pub config: DeepCfrConfig,
    advantage_nets: Vec<Mlp>,
    advantage_memories: Vec<ReservoirBuffer<Sample>>,
    strategy_memory: ReservoirBuffer<Sample>,
    policy_net: Option<(usize, Mlp)>,
    rng: ChaCha8Rng,
    iteration: usize,
    nodes: u64,
}

impl DeepCfr {
    pub fn new(tree: Arc<GameTree>, config: DeepCfrConfig) -> Result<Self> {
        if config.batch_size_advantage == 0 || config.batch_size_strategy == 0 {
            return Err(Error::config("deep_cfr batch sizes must be positive"));
        }
        let mut solver = DeepCfr {
            advantage_nets: Vec::new(),
            advantage_memories: (0..2).map(|_| ReservoirBuffer::new(config.memory_capacity)).collect(),
            strategy_memory: ReservoirBuffer::new(config.memory_capacity),
            policy_net: None,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[u64::MAX])),
            tree,
            config,
            iteration: 0,
            nodes: 0,
        };
        solver.advantage_nets = (0..2).map(|p| solver.fresh_advantage_net(p, 0)).collect::<Result<_>>()?;
        Ok(solver)
    }

    fn sizes(&self) -> Vec<usize> {
        layer_sizes(self.tree.feature_width(), self.config.num_layers, self.config.num_hidden, self.tree.max_actions())
    }

    /// The initialization an advantage network receives at the start of `iteration`.
    pub fn fresh_advantage_net(&self, player: Player, iteration: usize) -> Result<Mlp> {
        Mlp::new(&self.sizes(), derive_seed(self.config.seed, &[player as u64, iteration as u64]), false)
    }

    pub fn advantage_net(&self, player: Player) -> &Mlp {
        &self.advantage_nets[player]
    }

    pub fn strategy_memory_len(&self) -> usize {
        self.strategy_memory.len()
    }

    pub fn advantage_memory_len(&self, player: Player) -> usize {
        self.advantage_memories[player].len()
    }

    /// Regret matching on the advantage network outputs; when no output is positive the
    /// highest one is played.
    fn advantage_strategies(&self) -> Result<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.tree.num_infosets());
        out.resize(self.tree.num_infosets(), Vec::new());
        for player in 0..2 {
            let y = self.advantage_nets[player].forward(&super::player_inputs(&self.tree, player))?;
            for (&i, row) in self.tree.player_infosets(player).iter().zip(y.rows()) {
                let adv = &row.as_slice().unwrap()[..self.tree.infoset(i).num_actions()];
                let total: f64 = adv.iter().map(|a| a.max(0.0)).sum();
                out[i] = if total > 0.0 {
                    adv.iter().map(|a| a.max(0.0) / total).collect()
                } else {
                    let best = adv.iter().enumerate().fold(0, |b, (k, &a)| if a > adv[b] { k } else { b });
                    (0..adv.len()).map(|k| if k == best { 1.0 } else { 0.0 }).collect()
                };
            }
        }
        Ok(out)
    }

    fn traverse(&mut self, node: usize, player: Player, strategies: &[Vec<f64>]) -> f64 {
        self.nodes += 1;
        let tree = self.tree.clone();
        match &tree.node(node).kind {
            TreeNode::Terminal { returns } => returns[player],
            TreeNode::Chance { children, probs } => {
                let k = sample_index(probs, &mut self.rng);
                self.traverse(children[k], player, strategies)
            }
            TreeNode::Decision { player: p, infoset, children } => {
                let sigma = &strategies[*infoset];
                if *p == player {
                    let values: Vec<f64> = children.iter().map(|&c| self.traverse(c, player, strategies)).collect();
                    let ev: f64 = values.iter().zip(sigma).map(|(v, s)| v * s).sum();
                    let sample = Sample {
                        infoset: *infoset,
                        iteration: self.iteration + 1,
                        values: values.iter().map(|v| v - ev).collect(),
                    };
                    self.advantage_memories[player].add(sample, &mut self.rng);
                    ev
                } else {
                    let sample = Sample { infoset: *infoset, iteration: self.iteration + 1, values: sigma.clone() };
                    self.strategy_memory.add(sample, &mut self.rng);
                    let k = sample_index(sigma, &mut self.rng);
                    self.traverse(children[k], player, strategies)
                }
            }
        }
    }

    /// Iteration-weighted batch over `memory`, or `None` when it is empty.
    fn batch(&mut self, memory: Memory, batch_size: usize) -> Result<Option<TrainBatch>> {
        let width = self.tree.max_actions();
        let buf = match memory {
            Memory::Advantage(p) => &self.advantage_memories[p],
            Memory::Strategy => &self.strategy_memory,
        };
        let Some(rows) = buf.sample(batch_size, &mut self.rng) else {
            return Ok(None);
        };
        let inputs: Vec<Vec<f64>> = rows.iter().map(|s| self.tree.infoset(s.infoset).features.clone()).collect();
        let targets: Vec<Vec<f64>> = rows
            .iter()
            .map(|s| {
                let mut t = s.values.clone();
                t.resize(width, 0.0);
                t
            })
            .collect();
        let t = self.iteration.max(1) as f64;
        let weights: Vec<f64> = rows.iter().map(|s| s.iteration as f64 / t).collect();
        let infosets: Vec<usize> = rows.iter().map(|s| s.infoset).collect();
        Ok(Some(
            TrainBatch::from_rows(&inputs, &targets)?
                .with_weights(weights)?
                .with_mask(&legal_mask(&self.tree, &infosets, width))?,
        ))
    }

    fn train_advantage(&mut self, player: Player) -> Result<()> {
        if self.config.reinitialize_advantage_networks {
            self.advantage_nets[player] = self.fresh_advantage_net(player, self.iteration)?;
        }
        if self.advantage_memories[player].is_empty() {
            log::warn!("advantage memory of player {player} is empty; skipping training");
            return Ok(());
        }
        let mut opt = Optimizer::adam(&self.advantage_nets[player]);
        for _ in 0..self.config.advantage_network_train_steps {
            let batch = self.batch(Memory::Advantage(player), self.config.batch_size_advantage)?.expect("memory is non-empty");
            self.advantage_nets[player].train_step(&batch, LossKind::Mse, &mut opt, self.config.learning_rate)?;
        }
        Ok(())
    }

    /// Fits a fresh policy network to the strategy memory.
    fn train_policy(&mut self) -> Result<Mlp> {
        let mut net = Mlp::new(&self.sizes(), derive_seed(self.config.seed, &[2, self.iteration as u64]), false)?;
        if self.strategy_memory.is_empty() {
            log::warn!("strategy memory is empty; the policy network is untrained");
            return Ok(net);
        }
        let mut opt = Optimizer::adam(&net);
        for _ in 0..self.config.policy_network_train_steps {
            let batch = self.batch(Memory::Strategy, self.config.batch_size_strategy)?.expect("memory is non-empty");
            net.train_step(&batch, LossKind::SoftmaxCrossEntropy, &mut opt, self.config.learning_rate)?;
        }
        Ok(net)
    }

    /// The policy network's softmax over legal actions at every infoset. The network is
    /// trained on demand and reused until the next iteration.
    pub fn average_profile(&mut self) -> Result<Profile> {
        if self.policy_net.as_ref().map(|(t, _)| *t) != Some(self.iteration) {
            let net = self.train_policy()?;
            self.policy_net = Some((self.iteration, net));
        }
        let net = &self.policy_net.as_ref().unwrap().1;
        let mut profile = Profile::uniform(&self.tree);
        for player in 0..2 {
            let y = net.forward(&super::player_inputs(&self.tree, player))?;
            for (&i, row) in self.tree.player_infosets(player).iter().zip(y.rows()) {
                profile.set(i, softmax(&row.as_slice().unwrap()[..self.tree.infoset(i).num_actions()]));
            }
        }
        Ok(profile)
    }
}

#[derive(Clone, Copy)]
enum Memory {
    Advantage(Player),
    Strategy,
}

impl Solver for DeepCfr {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        for player in 0..2 {
            let strategies = self.advantage_strategies()?;
            for _ in 0..self.config.num_traversals {
                let root = self.tree.root();
                self.traverse(root, player, &strategies);
            }
            self.train_advantage(player)?;
        }
        self.iteration += 1;
        Ok(())
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn policy(&mut self) -> Result<PolicyTable> {
        Ok(self.average_profile()?.to_table(&self.tree))
    }

    fn nodes_touched(&self) -> u64 {
        self.nodes
    }
}
