//! Flat, pre-order arena of every node of a game, with dense infoset indices.
//!
//! Parents always precede children, so reach probabilities can be computed with a
//! forward sweep and expected values with a reverse sweep.

use std::collections::HashMap;

use rand::Rng;

use super::{ActionId, GameSpec, InfosetKey, NodeKind as StateKind, Player, State, View};
use crate::error::{Error, Result};
use crate::evaluation::PolicyTable;

#[derive(Debug, Clone)]
pub enum NodeKind {
    Chance {
        children: Vec<usize>,
        probs: Vec<f64>,
    },
    Decision {
        player: Player,
        infoset: usize,
        children: Vec<usize>,
    },
    Terminal {
        returns: [f64; 2],
    },
}

#[derive(Debug, Clone)]
pub struct Node {
    pub parent: Option<usize>,
    /// Position of this node among its parent's children.
    pub slot: usize,
    pub kind: NodeKind,
    /// Product of chance probabilities on the path from the root.
    pub chance_reach: f64,
    pub history: Vec<ActionId>,
}

#[derive(Debug, Clone)]
pub struct InfosetInfo {
    pub key: InfosetKey,
    pub player: Player,
    pub actions: Vec<ActionId>,
    /// Member nodes in pre-order.
    pub nodes: Vec<usize>,
    pub features: Vec<f64>,
}

impl InfosetInfo {
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Debug, Clone)]
pub struct GameTree {
    spec: Option<GameSpec>,
    nodes: Vec<Node>,
    infosets: Vec<InfosetInfo>,
    index: HashMap<InfosetKey, usize>,
    by_player: [Vec<usize>; 2],
    max_actions: usize,
    feature_width: usize,
}

impl GameTree {
    /// Expands the full tree of `spec`.
    pub fn new(spec: &GameSpec) -> Self {
        let mut builder = Builder::default();
        builder.expand(spec, &spec.initial_state(), None, 0, 1.0);
        let feature_width = spec.feature_width();
        let mut tree = builder.finish(Some(spec.clone()), spec.max_actions_per_infoset, feature_width);
        for info in &mut tree.infosets {
            info.features = spec.featurize(&info.key);
        }
        tree
    }

    /// A one-shot zero-sum matrix game: player 0 picks a row, player 1 a column
    /// without seeing it; `payoffs[r][c]` is player 0's payoff.
    pub fn matrix_game(payoffs: &[Vec<f64>]) -> Result<Self> {
        let rows = payoffs.len();
        let cols = payoffs.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || payoffs.iter().any(|r| r.len() != cols) {
            return Err(Error::config("matrix game needs a non-empty rectangular payoff table"));
        }
        let mut b = Builder::default();
        let root_info = b.infoset(InfosetKey { player: 0, observation: vec![0] }, 0, actions(rows));
        let col_info = b.infoset(InfosetKey { player: 1, observation: vec![1] }, 1, actions(cols));
        let root = b.push(None, 0, 1.0, Vec::new(), NodeKind::Terminal { returns: [0.0; 2] });
        b.infosets[root_info].nodes.push(root);
        let mut row_nodes = Vec::new();
        for (r, row) in payoffs.iter().enumerate() {
            let h = vec![ActionId(r as u8)];
            let node = b.push(Some(root), r, 1.0, h.clone(), NodeKind::Terminal { returns: [0.0; 2] });
            b.infosets[col_info].nodes.push(node);
            let mut leaves = Vec::new();
            for (c, &u) in row.iter().enumerate() {
                let mut hc = h.clone();
                hc.push(ActionId(c as u8));
                leaves.push(b.push(Some(node), c, 1.0, hc, NodeKind::Terminal { returns: [u, -u] }));
            }
            b.nodes[node].kind = NodeKind::Decision { player: 1, infoset: col_info, children: leaves };
            row_nodes.push(node);
        }
        b.nodes[root].kind = NodeKind::Decision { player: 0, infoset: root_info, children: row_nodes };
        let mut tree = b.finish(None, rows.max(cols), 2);
        for info in &mut tree.infosets {
            info.features = vec![0.0; 2];
            info.features[info.player] = 1.0;
        }
        Ok(tree)
    }

    /// Same tree with every terminal payoff multiplied by `factor`.
    pub fn with_scaled_utilities(&self, factor: f64) -> Self {
        let mut tree = self.clone();
        for node in &mut tree.nodes {
            if let NodeKind::Terminal { returns } = &mut node.kind {
                returns[0] *= factor;
                returns[1] *= factor;
            }
        }
        tree
    }

    pub fn spec(&self) -> Option<&GameSpec> {
        self.spec.as_ref()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn infosets(&self) -> &[InfosetInfo] {
        &self.infosets
    }

    pub fn infoset(&self, id: usize) -> &InfosetInfo {
        &self.infosets[id]
    }

    pub fn num_infosets(&self) -> usize {
        self.infosets.len()
    }

    pub fn infoset_id(&self, key: &InfosetKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Infoset ids of `player`, in discovery order.
    pub fn player_infosets(&self, player: Player) -> &[usize] {
        &self.by_player[player]
    }

    pub fn max_actions(&self) -> usize {
        self.max_actions
    }

    pub fn feature_width(&self) -> usize {
        self.feature_width
    }

    pub fn terminals(&self) -> impl Iterator<Item = (usize, [f64; 2])> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n.kind {
            NodeKind::Terminal { returns } => Some((i, returns)),
            _ => None,
        })
    }

    /// Largest absolute terminal payoff.
    pub fn utility_bound(&self) -> f64 {
        self.terminals()
            .map(|(_, r)| r[0].abs().max(r[1].abs()))
            .fold(0.0, f64::max)
    }

    /// Product of `player`'s own action probabilities on the path to each node.
    pub fn player_reach(&self, profile: &Profile, player: Player) -> Vec<f64> {
        let mut reach = vec![1.0; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate().skip(1) {
            let parent = node.parent.expect("non-root node without parent");
            reach[i] = reach[parent];
            if let NodeKind::Decision { player: p, infoset, .. } = &self.nodes[parent].kind {
                if *p == player {
                    reach[i] *= profile.probs(*infoset)[node.slot];
                }
            }
        }
        reach
    }

    /// Expected returns at every node under `profile`, computed bottom-up.
    pub fn node_values(&self, profile: &Profile) -> Vec<[f64; 2]> {
        let mut values = vec![[0.0; 2]; self.nodes.len()];
        for i in (0..self.nodes.len()).rev() {
            values[i] = match &self.nodes[i].kind {
                NodeKind::Terminal { returns } => *returns,
                NodeKind::Chance { children, probs } => weighted(children, probs, &values),
                NodeKind::Decision { infoset, children, .. } => {
                    weighted(children, profile.probs(*infoset), &values)
                }
            };
        }
        values
    }

    /// Samples one terminal node by playing `profile` from the root.
    pub fn sample_terminal(&self, profile: &Profile, rng: &mut impl Rng) -> usize {
        let mut node = 0;
        loop {
            node = match &self.nodes[node].kind {
                NodeKind::Terminal { .. } => return node,
                NodeKind::Chance { children, probs } => children[sample_index(probs, rng)],
                NodeKind::Decision { infoset, children, .. } => {
                    children[sample_index(profile.probs(*infoset), rng)]
                }
            };
        }
    }

    /// Reconstructs the `State` of a node (only for trees built from a `GameSpec`).
    pub fn state(&self, node: usize) -> State {
        State::from_history(self.nodes[node].history.clone())
    }
}

fn weighted(children: &[usize], probs: &[f64], values: &[[f64; 2]]) -> [f64; 2] {
    let mut v = [0.0; 2];
    for (&c, &p) in children.iter().zip(probs) {
        v[0] += p * values[c][0];
        v[1] += p * values[c][1];
    }
    v
}

/// Draws an index from a discrete distribution; falls back to the last positive entry
/// when rounding leaves the cumulative sum just below the draw.
pub(crate) fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn actions(n: usize) -> Vec<ActionId> {
    (0..n).map(|a| ActionId(a as u8)).collect()
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Node>,
    infosets: Vec<InfosetInfo>,
    index: HashMap<InfosetKey, usize>,
}

impl Builder {
    fn push(
        &mut self,
        parent: Option<usize>,
        slot: usize,
        chance_reach: f64,
        history: Vec<ActionId>,
        kind: NodeKind,
    ) -> usize {
        self.nodes.push(Node {
            parent,
            slot,
            kind,
            chance_reach,
            history,
        });
        self.nodes.len() - 1
    }

    fn infoset(&mut self, key: InfosetKey, player: Player, actions: Vec<ActionId>) -> usize {
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.infosets.len();
        self.index.insert(key.clone(), id);
        self.infosets.push(InfosetInfo {
            key,
            player,
            actions,
            nodes: Vec::new(),
            features: Vec::new(),
        });
        id
    }

    fn expand(
        &mut self,
        spec: &GameSpec,
        state: &State,
        parent: Option<usize>,
        slot: usize,
        chance_reach: f64,
    ) -> usize {
        let view: View = spec.view(state);
        let placeholder = NodeKind::Terminal { returns: view.returns };
        let id = self.push(parent, slot, chance_reach, state.history().to_vec(), placeholder);
        match view.kind {
            StateKind::Terminal => {}
            StateKind::Chance => {
                let mut children = Vec::with_capacity(view.chance.len());
                let mut probs = Vec::with_capacity(view.chance.len());
                for (k, &(a, p)) in view.chance.iter().enumerate() {
                    let child = child_state(state, a);
                    children.push(self.expand(spec, &child, Some(id), k, chance_reach * p));
                    probs.push(p);
                }
                self.nodes[id].kind = NodeKind::Chance { children, probs };
            }
            StateKind::Decision => {
                let key = InfosetKey {
                    player: view.player as u8,
                    observation: view.observation.clone(),
                };
                let infoset = self.infoset(key, view.player, view.actions.clone());
                debug_assert_eq!(self.infosets[infoset].actions, view.actions);
                self.infosets[infoset].nodes.push(id);
                let children = view
                    .actions
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| self.expand(spec, &child_state(state, a), Some(id), k, chance_reach))
                    .collect();
                self.nodes[id].kind = NodeKind::Decision {
                    player: view.player,
                    infoset,
                    children,
                };
            }
        }
        id
    }

    fn finish(self, spec: Option<GameSpec>, max_actions: usize, feature_width: usize) -> GameTree {
        let mut by_player = [Vec::new(), Vec::new()];
        for (i, info) in self.infosets.iter().enumerate() {
            by_player[info.player].push(i);
        }
        GameTree {
            spec,
            nodes: self.nodes,
            infosets: self.infosets,
            index: self.index,
            by_player,
            max_actions,
            feature_width,
        }
    }
}

fn child_state(state: &State, action: ActionId) -> State {
    let mut h = state.history().to_vec();
    h.push(action);
    State::from_history(h)
}

/// Dense behavioral profile: one distribution per infoset id of a [`GameTree`].
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    probs: Vec<Vec<f64>>,
}

impl Profile {
    pub fn uniform(tree: &GameTree) -> Self {
        Profile {
            probs: tree
                .infosets()
                .iter()
                .map(|i| vec![1.0 / i.num_actions() as f64; i.num_actions()])
                .collect(),
        }
    }

    pub fn from_vecs(probs: Vec<Vec<f64>>) -> Self {
        Profile { probs }
    }

    pub fn probs(&self, infoset: usize) -> &[f64] {
        &self.probs[infoset]
    }

    pub fn set(&mut self, infoset: usize, probs: Vec<f64>) {
        self.probs[infoset] = probs;
    }

    pub fn probs_mut(&mut self, infoset: usize) -> &mut [f64] {
        &mut self.probs[infoset]
    }

    pub fn as_vecs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Copies `player`'s entries from `other`.
    pub fn overwrite_player(&mut self, tree: &GameTree, player: Player, other: &Profile) {
        for &i in tree.player_infosets(player) {
            self.probs[i].clone_from(&other.probs[i]);
        }
    }

    /// Looks up every infoset of `tree` in `table`, validating lengths and normalization.
    pub fn from_table(tree: &GameTree, table: &PolicyTable) -> Result<Self> {
        let mut probs = Vec::with_capacity(tree.num_infosets());
        for info in tree.infosets() {
            let entry = table
                .get(&info.key)
                .ok_or_else(|| Error::MissingInfoset(info.key.clone()))?;
            if entry.len() != info.num_actions() {
                return Err(Error::InvalidPolicy {
                    key: info.key.clone(),
                    reason: format!("expected {} actions, got {}", info.num_actions(), entry.len()),
                });
            }
            let sum: f64 = entry.iter().sum();
            if entry.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidPolicy {
                    key: info.key.clone(),
                    reason: format!("not a probability distribution: {entry:?}"),
                });
            }
            probs.push(entry.to_vec());
        }
        Ok(Profile { probs })
    }

    pub fn to_table(&self, tree: &GameTree) -> PolicyTable {
        tree.infosets()
            .iter()
            .zip(&self.probs)
            .map(|(info, p)| (info.key.clone(), p.clone()))
            .collect()
    }

    /// Table holding only `player`'s infosets.
    pub fn to_player_table(&self, tree: &GameTree, player: Player) -> PolicyTable {
        tree.player_infosets(player)
            .iter()
            .map(|&i| (tree.infoset(i).key.clone(), self.probs[i].clone()))
            .collect()
    }
}
