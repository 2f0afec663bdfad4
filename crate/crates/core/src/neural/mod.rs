//! Function-approximation solvers built on [`crate::approx`].
//!
//! Every solver exposes its policy by evaluating its networks at each infoset of the
//! tree, so the reported exploitability always comes from [`crate::evaluation`].

mod deep_cfr;
mod ed;
mod neurd;
mod nfsp;
mod rcfr;

pub use deep_cfr::{DeepCfr, DeepCfrConfig};
pub use ed::{NeuralEd, NeuralEdConfig};
pub use neurd::{neurd_output_gradient, NeuralNeurd, NeuralNeurdConfig};
pub use nfsp::{epsilon_at, Mode, Nfsp, NfspAgent, NfspConfig};
pub use rcfr::{Rcfr, RcfrConfig};

use ndarray::Array2;

use crate::approx::Mlp;
use crate::error::Result;
use crate::game::{GameTree, Player};
use crate::tabular::softmax;

/// Feature vector of every infoset, indexed by dense infoset id.
pub fn infoset_features(tree: &GameTree) -> Vec<Vec<f64>> {
    tree.infosets().iter().map(|i| i.features.clone()).collect()
}

/// `input`, `num_layers` hidden layers of `width` units, `output`.
pub fn layer_sizes(input: usize, num_layers: usize, width: usize, output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend(std::iter::repeat_n(width, num_layers));
    sizes.push(output);
    sizes
}

/// Derives an independent seed for a sub-component from a run seed and a path of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    // SplitMix64 finalizer over the running state.
    let mix = |mut z: u64| {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    tags.iter().fold(mix(seed.wrapping_add(0x9e3779b97f4a7c15)), |acc, &t| {
        mix(acc ^ t.wrapping_add(0x9e3779b97f4a7c15))
    })
}

/// Rows of features for `player`'s infosets, in `tree.player_infosets(player)` order.
pub(crate) fn player_inputs(tree: &GameTree, player: Player) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = tree.player_infosets(player).iter().map(|&i| tree.infoset(i).features.clone()).collect();
    crate::approx::stack(&rows).expect("features have constant width")
}

/// Column mask selecting each infoset's legal outputs (its first `num_actions` columns).
pub(crate) fn legal_mask(tree: &GameTree, infosets: &[usize], width: usize) -> Vec<Vec<f64>> {
    infosets
        .iter()
        .map(|&i| (0..width).map(|c| if c < tree.infoset(i).num_actions() { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Softmax over the legal outputs of `net` at every infoset of `player`.
pub(crate) fn softmax_readout(tree: &GameTree, net: &Mlp, player: Player) -> Result<Vec<Vec<f64>>> {
    let out = net.forward(&player_inputs(tree, player))?;
    Ok(tree
        .player_infosets(player)
        .iter()
        .zip(out.rows())
        .map(|(&i, row)| softmax(&row.as_slice().unwrap()[..tree.infoset(i).num_actions()]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::build_game;

    #[test]
    fn derived_seeds_differ_by_tag() {
        let a = derive_seed(1, &[0, 3]);
        assert_eq!(a, derive_seed(1, &[0, 3]));
        assert_ne!(a, derive_seed(1, &[1, 3]));
        assert_ne!(a, derive_seed(2, &[0, 3]));
    }

    #[test]
    fn features_are_distinct_per_infoset() {
        for game in ["kuhn", "leduc"] {
            let tree = GameTree::new(&build_game(game).unwrap());
            let mut feats = infoset_features(&tree);
            let n = feats.len();
            assert!(feats.iter().all(|f| f.len() == tree.feature_width()));
            feats.sort_by(|a, b| a.partial_cmp(b).unwrap());
            feats.dedup();
            assert_eq!(feats.len(), n, "{game}");
        }
    }

    #[test]
    fn layer_sizes_shape() {
        assert_eq!(layer_sizes(11, 3, 64, 2), vec![11, 64, 64, 64, 2]);
        assert_eq!(layer_sizes(5, 0, 64, 1), vec![5, 1]);
    }
}
