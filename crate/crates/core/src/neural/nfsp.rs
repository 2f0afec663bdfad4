use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, legal_mask};
use crate::approx::{CircularReplayBuffer, LossKind, Mlp, Optimizer, OptimizerKind, ReservoirBuffer, TrainBatch};
use crate::error::{Error, Result};
use crate::evaluation::PolicyTable;
use crate::game::{sample_index, GameTree, Player, Profile, TreeNode};
use crate::solver::Solver;
use crate::tabular::softmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfspConfig {
    pub hidden_layers_sizes: Vec<usize>,
    pub replay_buffer_capacity: usize,
    pub reservoir_buffer_capacity: usize,
    pub min_buffer_size_to_learn: usize,
    pub anticipatory_param: f64,
    pub batch_size: usize,
    pub learn_every: u64,
    pub rl_learning_rate: f64,
    pub sl_learning_rate: f64,
    pub optimizer_str: OptimizerKind,
    pub update_target_network_every: u64,
    pub discount_factor: f64,
    pub epsilon_decay_duration: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub seed: u64,
}

impl Default for NfspConfig {
    fn default() -> Self {
        NfspConfig {
            hidden_layers_sizes: vec![128; 4],
            replay_buffer_capacity: 200_000,
            reservoir_buffer_capacity: 2_000_000,
            min_buffer_size_to_learn: 1000,
            anticipatory_param: 0.1,
            batch_size: 128,
            learn_every: 128,
            rl_learning_rate: 0.01,
            sl_learning_rate: 0.01,
            optimizer_str: OptimizerKind::Sgd,
            update_target_network_every: 19_200,
            discount_factor: 1.0,
            epsilon_decay_duration: 20_000_000,
            epsilon_start: 0.06,
            epsilon_end: 0.001,
            seed: 0,
        }
    }
}

impl NfspConfig {
    /// Desk-scale Kuhn settings.
    pub fn kuhn_desk() -> Self {
        NfspConfig {
            hidden_layers_sizes: vec![64],
            replay_buffer_capacity: 1_000,
            reservoir_buffer_capacity: 10_000,
            epsilon_decay_duration: 100_000,
            ..NfspConfig::default()
        }
    }
}

/// Linear decay from `epsilon_start` to `epsilon_end` over `epsilon_decay_duration` steps.
pub fn epsilon_at(config: &NfspConfig, step: u64) -> f64 {
    let frac = if config.epsilon_decay_duration == 0 {
        0.0
    } else {
        (1.0 - step as f64 / config.epsilon_decay_duration as f64).max(0.0)
    };
    config.epsilon_end + (config.epsilon_start - config.epsilon_end) * frac
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    BestResponse,
    Average,
}

#[derive(Debug, Clone, PartialEq)]
struct Transition {
    infoset: usize,
    action: usize,
    reward: f64,
    next: Option<usize>,
}

/// One player's learner: an ε-greedy Q-network trained from a replay ring, and an
/// average-policy network trained on the reservoir of its best-response actions.
pub struct NfspAgent {
    player: Player,
    q_net: Mlp,
    target_net: Mlp,
    q_opt: Optimizer,
    avg_net: Mlp,
    avg_opt: Optimizer,
    replay: CircularReplayBuffer<Transition>,
    reservoir: ReservoirBuffer<(usize, usize)>,
    mode: Mode,
    steps: u64,
    pending: Option<(usize, usize)>,
}

impl NfspAgent {
    fn new(tree: &GameTree, config: &NfspConfig, player: Player) -> Result<Self> {
        let mut sizes = vec![tree.feature_width()];
        sizes.extend(&config.hidden_layers_sizes);
        sizes.push(tree.max_actions());
        let q_net = Mlp::new(&sizes, derive_seed(config.seed, &[player as u64, 0]), false)?;
        let avg_net = Mlp::new(&sizes, derive_seed(config.seed, &[player as u64, 1]), false)?;
        Ok(NfspAgent {
            player,
            target_net: q_net.clone(),
            q_opt: Optimizer::new(config.optimizer_str, &q_net),
            avg_opt: Optimizer::new(config.optimizer_str, &avg_net),
            q_net,
            avg_net,
            replay: CircularReplayBuffer::new(config.replay_buffer_capacity),
            reservoir: ReservoirBuffer::new(config.reservoir_buffer_capacity),
            mode: Mode::Average,
            steps: 0,
            pending: None,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn reservoir_len(&self) -> usize {
        self.reservoir.len()
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn q_net(&self) -> &Mlp {
        &self.q_net
    }

    pub fn target_net(&self) -> &Mlp {
        &self.target_net
    }

    fn legal_outputs(net: &Mlp, tree: &GameTree, infoset: usize) -> Result<Vec<f64>> {
        let mut y = net.forward_row(&tree.infoset(infoset).features)?;
        y.truncate(tree.infoset(infoset).num_actions());
        Ok(y)
    }

    /// Softmax of the average-policy network over the legal actions.
    pub fn average_policy(&self, tree: &GameTree, infoset: usize) -> Result<Vec<f64>> {
        Ok(softmax(&Self::legal_outputs(&self.avg_net, tree, infoset)?))
    }

    fn act(&mut self, tree: &GameTree, config: &NfspConfig, infoset: usize, rng: &mut impl Rng) -> Result<usize> {
        if let Some((prev, action)) = self.pending.take() {
            self.replay.add(Transition { infoset: prev, action, reward: 0.0, next: Some(infoset) });
        }
        let action = match self.mode {
            Mode::BestResponse => {
                let n = tree.infoset(infoset).num_actions();
                let action = if rng.gen::<f64>() < epsilon_at(config, self.steps) {
                    rng.gen_range(0..n)
                } else {
                    let q = Self::legal_outputs(&self.q_net, tree, infoset)?;
                    q.iter().enumerate().fold(0, |b, (k, &v)| if v > q[b] { k } else { b })
                };
                self.reservoir.add((infoset, action), rng);
                action
            }
            Mode::Average => sample_index(&self.average_policy(tree, infoset)?, rng),
        };
        self.pending = Some((infoset, action));
        self.steps += 1;
        if self.steps.is_multiple_of(config.learn_every) {
            self.learn(tree, config, rng)?;
        }
        if self.steps.is_multiple_of(config.update_target_network_every) {
            self.target_net = self.q_net.clone();
        }
        Ok(action)
    }

    fn finish(&mut self, reward: f64) {
        if let Some((infoset, action)) = self.pending.take() {
            self.replay.add(Transition { infoset, action, reward, next: None });
        }
    }

    fn learn(&mut self, tree: &GameTree, config: &NfspConfig, rng: &mut impl Rng) -> Result<()> {
        let width = tree.max_actions();
        let min = config.min_buffer_size_to_learn.max(1);
        if let Some(rows) = self.replay.sample(config.batch_size, min, rng) {
            let mut inputs = Vec::with_capacity(rows.len());
            let mut targets = Vec::with_capacity(rows.len());
            let mut mask = Vec::with_capacity(rows.len());
            for t in &rows {
                let bootstrap = match t.next {
                    Some(next) => {
                        let q = Self::legal_outputs(&self.target_net, tree, next)?;
                        config.discount_factor * q.into_iter().fold(f64::NEG_INFINITY, f64::max)
                    }
                    None => 0.0,
                };
                let mut target = vec![0.0; width];
                target[t.action] = t.reward + bootstrap;
                let mut m = vec![0.0; width];
                m[t.action] = 1.0;
                inputs.push(tree.infoset(t.infoset).features.clone());
                targets.push(target);
                mask.push(m);
            }
            // Only the taken action's column carries error; weight rows so the step
            // matches a per-row squared error.
            let batch = TrainBatch::from_rows(&inputs, &targets)?
                .with_mask(&mask)?
                .with_weights(vec![width as f64; rows.len()])?;
            self.q_net.train_step(&batch, LossKind::Mse, &mut self.q_opt, config.rl_learning_rate)?;
        }
        if self.reservoir.len() >= min.max(config.batch_size) {
            let rows = self.reservoir.sample(config.batch_size, rng).expect("reservoir is non-empty");
            let infosets: Vec<usize> = rows.iter().map(|r| r.0).collect();
            let inputs: Vec<Vec<f64>> = infosets.iter().map(|&i| tree.infoset(i).features.clone()).collect();
            let targets: Vec<Vec<f64>> = rows
                .iter()
                .map(|&&(_, a)| (0..width).map(|c| if c == a { 1.0 } else { 0.0 }).collect())
                .collect();
            let batch = TrainBatch::from_rows(&inputs, &targets)?.with_mask(&legal_mask(tree, &infosets, width))?;
            self.avg_net.train_step(&batch, LossKind::SoftmaxCrossEntropy, &mut self.avg_opt, config.sl_learning_rate)?;
        }
        Ok(())
    }
}

/// Neural fictitious self-play; one [`Solver::step`] plays one episode.
pub struct Nfsp {
    tree: Arc<GameTree>,
    pub config: NfspConfig,
    agents: Vec<NfspAgent>,
    rng: ChaCha8Rng,
    episodes: usize,
    nodes: u64,
}

impl Nfsp {
    pub fn new(tree: Arc<GameTree>, config: NfspConfig) -> Result<Self> {
        if config.learn_every == 0 || config.update_target_network_every == 0 || config.batch_size == 0 {
            return Err(Error::config("nfsp learn_every, update_target_network_every and batch_size must be positive"));
        }
        if !(0.0..=1.0).contains(&config.anticipatory_param) {
            return Err(Error::config("anticipatory_param must lie in [0, 1]"));
        }
        let agents = (0..2).map(|p| NfspAgent::new(&tree, &config, p)).collect::<Result<Vec<_>>>()?;
        Ok(Nfsp {
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[u64::MAX])),
            tree,
            config,
            agents,
            episodes: 0,
            nodes: 0,
        })
    }

    pub fn agent(&self, player: Player) -> &NfspAgent {
        &self.agents[player]
    }

    /// Plays one self-play episode, drawing each agent's mode first.
    pub fn episode(&mut self) -> Result<()> {
        for agent in &mut self.agents {
            agent.mode = if self.rng.gen::<f64>() < self.config.anticipatory_param {
                Mode::BestResponse
            } else {
                Mode::Average
            };
        }
        let tree = self.tree.clone();
        let mut node = tree.root();
        loop {
            self.nodes += 1;
            match &tree.node(node).kind {
                TreeNode::Chance { children, probs } => node = children[sample_index(probs, &mut self.rng)],
                TreeNode::Decision { player, infoset, children } => {
                    let a = self.agents[*player].act(&tree, &self.config, *infoset, &mut self.rng)?;
                    node = children[a];
                }
                TreeNode::Terminal { returns } => {
                    for agent in &mut self.agents {
                        agent.finish(returns[agent.player]);
                    }
                    break;
                }
            }
        }
        self.episodes += 1;
        Ok(())
    }

    pub fn average_profile(&self) -> Result<Profile> {
        let mut profile = Profile::uniform(&self.tree);
        for player in 0..2 {
            for &i in self.tree.player_infosets(player) {
                profile.set(i, self.agents[player].average_policy(&self.tree, i)?);
            }
        }
        Ok(profile)
    }
}

impl Solver for Nfsp {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        self.episode()
    }

    fn iteration(&self) -> usize {
        self.episodes
    }

    fn policy(&mut self) -> Result<PolicyTable> {
        Ok(self.average_profile()?.to_table(&self.tree))
    }

    fn nodes_touched(&self) -> u64 {
        self.nodes
    }
}
