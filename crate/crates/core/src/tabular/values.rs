use crate::game::{GameTree, Profile, TreeNode};

/// Exact per-infoset quantities of a profile, from the acting player's perspective.
///
/// `q[i][a]` and `v[i]` are counterfactual: each member history contributes its value
/// weighted by the chance-and-opponent reach, so `v[i] == Σ_a π(a) q[i][a]`.
#[derive(Debug, Clone)]
pub struct InfosetValues {
    /// Σ over member histories of chance reach × opponent reach.
    pub cf_reach: Vec<f64>,
    /// The acting player's own reach probability of the infoset.
    pub own_reach: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub v: Vec<f64>,
}

impl InfosetValues {
    /// Counterfactual advantages `q - v` at `infoset`.
    pub fn advantages(&self, infoset: usize) -> Vec<f64> {
        self.q[infoset].iter().map(|q| q - self.v[infoset]).collect()
    }
}

pub fn infoset_values(tree: &GameTree, profile: &Profile) -> InfosetValues {
    let reach = [tree.player_reach(profile, 0), tree.player_reach(profile, 1)];
    let values = tree.node_values(profile);
    let n = tree.num_infosets();
    let mut out = InfosetValues {
        cf_reach: vec![0.0; n],
        own_reach: vec![0.0; n],
        q: tree.infosets().iter().map(|i| vec![0.0; i.num_actions()]).collect(),
        v: vec![0.0; n],
    };
    for (i, info) in tree.infosets().iter().enumerate() {
        let p = info.player;
        out.own_reach[i] = reach[p][info.nodes[0]];
        for &h in &info.nodes {
            let node = tree.node(h);
            let w = node.chance_reach * reach[1 - p][h];
            out.cf_reach[i] += w;
            out.v[i] += w * values[h][p];
            if let TreeNode::Decision { children, .. } = &node.kind {
                for (q, &c) in out.q[i].iter_mut().zip(children) {
                    *q += w * values[c][p];
                }
            }
        }
    }
    out
}
