//! Exact expected returns, best responses, NashConv and exploitability.
//!
//! All quantities are computed by full traversal of a [`GameTree`]. The keyed entry
//! points take a [`PolicyTable`]; solvers use the `*_dense` variants on [`Profile`]s.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameTree, InfosetKey, Player, Profile, TreeNode};

/// Behavioral strategy profile keyed by infoset: one distribution over the infoset's
/// legal actions (in `legal_actions` order) per entry. May hold a single player's
/// infosets only (a policy fragment).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    entries: BTreeMap<InfosetKey, Vec<f64>>,
}

impl PolicyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn uniform(tree: &GameTree) -> Self {
        Profile::uniform(tree).to_table(tree)
    }

    pub fn get(&self, key: &InfosetKey) -> Option<&[f64]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn insert(&mut self, key: InfosetKey, probs: Vec<f64>) -> Option<Vec<f64>> {
        self.entries.insert(key, probs)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InfosetKey, &[f64])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Entries of `other` replace entries of `self` with the same key.
    pub fn merged(mut self, other: &PolicyTable) -> Self {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }

    /// Keeps only `player`'s entries.
    pub fn player_fragment(&self, player: Player) -> Self {
        self.entries
            .iter()
            .filter(|(k, _)| k.player as usize == player)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

impl FromIterator<(InfosetKey, Vec<f64>)> for PolicyTable {
    fn from_iter<I: IntoIterator<Item = (InfosetKey, Vec<f64>)>>(iter: I) -> Self {
        PolicyTable {
            entries: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseInfo {
    pub responder: Player,
    /// Pure policy over every infoset of the responder.
    pub br_policy: PolicyTable,
    /// `u_responder(br_policy, opponent policy)`.
    pub br_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NashConvReport {
    /// Per-player gain from deviating to a best response.
    pub deltas: [f64; 2],
    pub nash_conv: f64,
    pub exploitability: f64,
    /// Expected returns of the evaluated profile.
    pub values: [f64; 2],
}

/// Dense best response: chosen action slot per responder infoset (indexed like the
/// tree's infosets; entries of the other player are unused).
#[derive(Debug, Clone)]
pub struct DenseBestResponse {
    pub responder: Player,
    pub actions: Vec<usize>,
    pub value: f64,
}

impl DenseBestResponse {
    /// Writes the pure best response into `profile`'s responder entries.
    pub fn apply_to(&self, tree: &GameTree, profile: &mut Profile) {
        for &i in tree.player_infosets(self.responder) {
            let n = tree.infoset(i).num_actions();
            let mut p = vec![0.0; n];
            p[self.actions[i]] = 1.0;
            profile.set(i, p);
        }
    }

    pub fn to_profile(&self, tree: &GameTree, base: &Profile) -> Profile {
        let mut p = base.clone();
        self.apply_to(tree, &mut p);
        p
    }
}

/// Exact expected returns of a full profile.
pub fn expected_returns(tree: &GameTree, profile: &PolicyTable) -> Result<[f64; 2]> {
    Ok(expected_returns_dense(tree, &Profile::from_table(tree, profile)?))
}

pub fn expected_returns_dense(tree: &GameTree, profile: &Profile) -> [f64; 2] {
    let r0 = tree.player_reach(profile, 0);
    let r1 = tree.player_reach(profile, 1);
    returns_from_reach(tree, &r0, &r1)
}

fn returns_from_reach(tree: &GameTree, r0: &[f64], r1: &[f64]) -> [f64; 2] {
    let mut v = [0.0; 2];
    for (z, ret) in tree.terminals() {
        let w = tree.node(z).chance_reach * r0[z] * r1[z];
        v[0] += w * ret[0];
        v[1] += w * ret[1];
    }
    v
}

/// Best response of `responder` against the opponent part of `profile`.
pub fn best_response(
    tree: &GameTree,
    profile: &PolicyTable,
    responder: Player,
) -> Result<BestResponseInfo> {
    let opponent = opponent_profile(tree, profile, 1 - responder)?;
    let br = best_response_dense(tree, &opponent, responder);
    let mut br_policy = PolicyTable::new();
    for &i in tree.player_infosets(responder) {
        let info = tree.infoset(i);
        let mut p = vec![0.0; info.num_actions()];
        p[br.actions[i]] = 1.0;
        br_policy.insert(info.key.clone(), p);
    }
    Ok(BestResponseInfo {
        responder,
        br_policy,
        br_value: br.value,
    })
}

/// Dense profile whose `player` entries come from `table`; others stay uniform.
fn opponent_profile(tree: &GameTree, table: &PolicyTable, player: Player) -> Result<Profile> {
    let mut profile = Profile::uniform(tree);
    let mut fragment = PolicyTable::new();
    for &i in tree.player_infosets(player) {
        let key = &tree.infoset(i).key;
        let entry = table
            .get(key)
            .ok_or_else(|| Error::MissingInfoset(key.clone()))?;
        fragment.insert(key.clone(), entry.to_vec());
    }
    let filled = Profile::from_table(tree, &PolicyTable::uniform(tree).merged(&fragment))?;
    profile.overwrite_player(tree, player, &filled);
    Ok(profile)
}

/// Exact best response of `responder` to the opponent entries of `profile`.
pub fn best_response_dense(tree: &GameTree, profile: &Profile, responder: Player) -> DenseBestResponse {
    let opp_reach = tree.player_reach(profile, 1 - responder);
    best_response_to_reach(tree, responder, &opp_reach)
}

/// Two-pass best response given the opponent's reach contribution at every node.
///
/// Pass one forms the opponent-and-chance weight of each node. Pass two evaluates
/// responder infosets bottom-up: an infoset's action value is the sum over its member
/// histories of the weighted value below each child, and the responder commits to the
/// argmax (lowest index on ties). Because the weights are linear in the opponent's
/// reach, `opp_reach` may also be a mixture of several policies' reaches.
pub fn best_response_to_reach(tree: &GameTree, responder: Player, opp_reach: &[f64]) -> DenseBestResponse {
    let weight: Vec<f64> = tree
        .nodes()
        .iter()
        .zip(opp_reach)
        .map(|(n, r)| n.chance_reach * r)
        .collect();
    let mut solver = BrSolver {
        tree,
        responder,
        weight: &weight,
        value: vec![None; tree.nodes().len()],
        best: vec![None; tree.num_infosets()],
    };
    let value = solver.node_value(tree.root());
    let mut actions = vec![0; tree.num_infosets()];
    for &i in tree.player_infosets(responder) {
        actions[i] = solver.best_action(i);
    }
    DenseBestResponse {
        responder,
        actions,
        value,
    }
}

struct BrSolver<'a> {
    tree: &'a GameTree,
    responder: Player,
    weight: &'a [f64],
    value: Vec<Option<f64>>,
    best: Vec<Option<usize>>,
}

impl BrSolver<'_> {
    /// Counterfactual value: opponent-and-chance weighted responder payoff below `node`.
    fn node_value(&mut self, node: usize) -> f64 {
        if let Some(v) = self.value[node] {
            return v;
        }
        let v = match &self.tree.node(node).kind {
            TreeNode::Terminal { returns } => self.weight[node] * returns[self.responder],
            TreeNode::Chance { children, .. } => children.iter().map(|&c| self.node_value(c)).sum(),
            TreeNode::Decision { player, infoset, children } => {
                if *player == self.responder {
                    let a = self.best_action(*infoset);
                    self.node_value(children[a])
                } else {
                    children.iter().map(|&c| self.node_value(c)).sum()
                }
            }
        };
        self.value[node] = Some(v);
        v
    }

    fn best_action(&mut self, infoset: usize) -> usize {
        if let Some(a) = self.best[infoset] {
            return a;
        }
        let tree = self.tree;
        let info = tree.infoset(infoset);
        let mut totals = vec![0.0; info.num_actions()];
        for &h in &info.nodes {
            if let TreeNode::Decision { children, .. } = &tree.node(h).kind {
                for (a, &c) in children.iter().enumerate() {
                    totals[a] += self.node_value(c);
                }
            }
        }
        let mut best = 0;
        for (a, &t) in totals.iter().enumerate().skip(1) {
            if t > totals[best] {
                best = a;
            }
        }
        self.best[infoset] = Some(best);
        best
    }
}

pub fn nash_conv(tree: &GameTree, profile: &PolicyTable) -> Result<NashConvReport> {
    Ok(nash_conv_dense(tree, &Profile::from_table(tree, profile)?))
}

pub fn nash_conv_dense(tree: &GameTree, profile: &Profile) -> NashConvReport {
    let reach = [tree.player_reach(profile, 0), tree.player_reach(profile, 1)];
    report_from_reach(tree, &reach)
}

fn report_from_reach(tree: &GameTree, reach: &[Vec<f64>; 2]) -> NashConvReport {
    let values = returns_from_reach(tree, &reach[0], &reach[1]);
    let mut deltas = [0.0; 2];
    for (p, delta) in deltas.iter_mut().enumerate() {
        let br = best_response_to_reach(tree, p, &reach[1 - p]);
        *delta = br.value - values[p];
    }
    let nash_conv = deltas[0] + deltas[1];
    NashConvReport {
        deltas,
        nash_conv,
        exploitability: nash_conv / 2.0,
        values,
    }
}

/// NashConv of the profile in which each player first draws one of their weighted
/// policies (an extra root chance event) and then plays it throughout.
pub fn mixture_nash_conv(tree: &GameTree, mixtures: [&[(f64, &Profile)]; 2]) -> NashConvReport {
    let reach = [0, 1].map(|p| {
        let mut acc = vec![0.0; tree.nodes().len()];
        for &(w, profile) in mixtures[p] {
            if w == 0.0 {
                continue;
            }
            for (a, r) in acc.iter_mut().zip(tree.player_reach(profile, p)) {
                *a += w * r;
            }
        }
        acc
    });
    report_from_reach(tree, &reach)
}

/// NashConv / 2.
pub fn exploitability(tree: &GameTree, profile: &PolicyTable) -> Result<f64> {
    Ok(nash_conv(tree, profile)?.exploitability)
}

pub fn exploitability_dense(tree: &GameTree, profile: &Profile) -> f64 {
    nash_conv_dense(tree, profile).exploitability
}
