use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, layer_sizes};
use crate::approx::{stack, LossKind, Mlp, Optimizer, TrainBatch};
use crate::error::{Error, Result};
use crate::evaluation::PolicyTable;
use crate::game::{GameTree, Player, Profile};
use crate::solver::Solver;
use crate::tabular::{infoset_values, regret_matching_into, RegretTable, StrategyAccumulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcfrConfig {
    pub num_hidden_layers: usize,
    pub num_hidden_units: usize,
    pub use_skip_connections: bool,
    pub num_epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    /// Keep training the previous networks instead of starting from a fresh init.
    pub bootstrap: bool,
    /// Clamp regression targets at zero.
    pub truncate_negative: bool,
    /// `-1` keeps every sequence; the aggregated dataset is never truncated.
    pub buffer_size: i64,
    pub seed: u64,
}

impl Default for RcfrConfig {
    fn default() -> Self {
        RcfrConfig {
            num_hidden_layers: 2,
            num_hidden_units: 400,
            use_skip_connections: true,
            num_epochs: 200,
            batch_size: 100,
            step_size: 0.001,
            bootstrap: false,
            truncate_negative: false,
            buffer_size: -1,
            seed: 0,
        }
    }
}

/// Regression CFR: each player's regrets are predicted by a network over sequence
/// features (infoset features followed by an action one-hot), and the current policy is
/// regret matching on those predictions.
///
/// Every iteration the exact counterfactual regrets of the current policy are added to a
/// cumulative per-sequence target, and the network is fit to those targets.
pub struct Rcfr {
    tree: Arc<GameTree>,
    pub config: RcfrConfig,
    nets: Vec<Mlp>,
    /// Sequence inputs per player and the (infoset, action) each row stands for.
    inputs: Vec<Array2<f64>>,
    sequences: Vec<Vec<(usize, usize)>>,
    pub regrets: RegretTable,
    pub acc: StrategyAccumulator,
    rng: ChaCha8Rng,
    iteration: usize,
    nodes: u64,
}

impl Rcfr {
    pub fn new(tree: Arc<GameTree>, config: RcfrConfig) -> Result<Self> {
        if config.num_epochs == 0 || config.batch_size == 0 {
            return Err(Error::config("rcfr needs positive num_epochs and batch_size"));
        }
        if config.buffer_size != -1 {
            // Targets are cumulative regrets with one row per sequence; there is nothing to evict.
            return Err(Error::config("rcfr supports only buffer_size = -1"));
        }
        let width = tree.feature_width() + tree.max_actions();
        let mut inputs = Vec::new();
        let mut sequences = Vec::new();
        for player in 0..2 {
            let mut rows = Vec::new();
            let mut seqs = Vec::new();
            for &i in tree.player_infosets(player) {
                for a in 0..tree.infoset(i).num_actions() {
                    let mut row = tree.infoset(i).features.clone();
                    row.extend((0..tree.max_actions()).map(|c| if c == a { 1.0 } else { 0.0 }));
                    rows.push(row);
                    seqs.push((i, a));
                }
            }
            inputs.push(stack(&rows)?);
            sequences.push(seqs);
        }
        let sizes = layer_sizes(width, config.num_hidden_layers, config.num_hidden_units, 1);
        let nets = (0..2)
            .map(|p| Mlp::new(&sizes, derive_seed(config.seed, &[p, 0]), config.use_skip_connections))
            .collect::<Result<Vec<_>>>()?;
        Ok(Rcfr {
            regrets: RegretTable::zeros(&tree),
            acc: StrategyAccumulator::zeros(&tree),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[u64::MAX])),
            tree,
            config,
            nets,
            inputs,
            sequences,
            iteration: 0,
            nodes: 0,
        })
    }

    pub fn net(&self, player: Player) -> &Mlp {
        &self.nets[player]
    }

    /// Network regret predictions at every infoset, as rows like a [`RegretTable`].
    pub fn predicted_regrets(&self) -> Result<Vec<Vec<f64>>> {
        let mut rows: Vec<Vec<f64>> = self.tree.infosets().iter().map(|i| vec![0.0; i.num_actions()]).collect();
        for player in 0..2 {
            let out = self.nets[player].forward(&self.inputs[player])?;
            for (&(i, a), y) in self.sequences[player].iter().zip(out.column(0)) {
                rows[i][a] = *y;
            }
        }
        Ok(rows)
    }

    /// Regret matching on the network predictions.
    pub fn current_profile(&self) -> Result<Profile> {
        let rows = self.predicted_regrets()?;
        Ok(Profile::from_vecs(
            rows.iter()
                .map(|r| {
                    let mut p = vec![0.0; r.len()];
                    regret_matching_into(r, &mut p);
                    p
                })
                .collect(),
        ))
    }

    fn fit(&mut self, player: Player) -> Result<()> {
        let targets: Vec<Vec<f64>> = self.sequences[player]
            .iter()
            .map(|&(i, a)| {
                let r = self.regrets.row(i)[a];
                vec![if self.config.truncate_negative { r.max(0.0) } else { r }]
            })
            .collect();
        if !self.config.bootstrap {
            let sizes = self.nets[player].sizes().to_vec();
            let seed = derive_seed(self.config.seed, &[player as u64, self.iteration as u64 + 1]);
            self.nets[player] = Mlp::new(&sizes, seed, self.config.use_skip_connections)?;
        }
        let net = &mut self.nets[player];
        let mut opt = Optimizer::adam(net);
        let mut order: Vec<usize> = (0..targets.len()).collect();
        for _ in 0..self.config.num_epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.config.batch_size) {
                let x = stack(&chunk.iter().map(|&r| self.inputs[player].row(r).to_vec()).collect::<Vec<_>>())?;
                let y = stack(&chunk.iter().map(|&r| targets[r].clone()).collect::<Vec<_>>())?;
                net.train_step(&TrainBatch::new(x, y)?, LossKind::Mse, &mut opt, self.config.step_size)?;
            }
        }
        Ok(())
    }
}

impl Solver for Rcfr {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        let profile = self.current_profile()?;
        let vals = infoset_values(&self.tree, &profile);
        for i in 0..self.tree.num_infosets() {
            self.acc.add(i, vals.own_reach[i], profile.probs(i));
            let v = vals.v[i];
            for (r, q) in self.regrets.row_mut(i).iter_mut().zip(&vals.q[i]) {
                *r += q - v;
            }
        }
        for player in 0..2 {
            self.fit(player)?;
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
