use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{infoset_values, LogitTable};
use crate::error::{Error, Result};
use crate::evaluation::PolicyTable;
use crate::game::GameTree;
use crate::solver::Solver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PgVariant {
    Qpg,
    Rpg,
    Rmpg,
}

impl PgVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PgVariant::Qpg => "qpg",
            PgVariant::Rpg => "rpg",
            PgVariant::Rmpg => "rmpg",
        }
    }
}

impl fmt::Display for PgVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PgVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qpg" => Ok(PgVariant::Qpg),
            "rpg" => Ok(PgVariant::Rpg),
            "rmpg" => Ok(PgVariant::Rmpg),
            other => Err(Error::config(format!("unknown policy-gradient variant `{other}`"))),
        }
    }
}

/// Regret policy-gradient loss at one infoset: `Σ_a relu(q(a) - v)` with `v = Σ π q`.
pub fn rpg_loss(probs: &[f64], q: &[f64]) -> f64 {
    let v: f64 = probs.iter().zip(q).map(|(p, q)| p * q).sum();
    q.iter().map(|q| (q - v).max(0.0)).sum()
}

/// Ascent direction on the logits at one infoset.
///
/// `q` holds counterfactual action values and `cf_reach` the chance-and-opponent reach,
/// which scales the entropy bonus the same way the values are scaled.
pub fn pg_gradient(variant: PgVariant, probs: &[f64], q: &[f64], cf_reach: f64, entropy_cost: f64) -> Vec<f64> {
    let v: f64 = probs.iter().zip(q).map(|(p, q)| p * q).sum();
    let mut grad: Vec<f64> = match variant {
        PgVariant::Qpg => probs.iter().zip(q).map(|(p, q)| p * (q - v)).collect(),
        PgVariant::Rpg => {
            // d/dy_b of Σ_a relu(q_a - v) is -n₊ π_b (q_b - v), with n₊ active terms.
            let active = q.iter().filter(|&&q| q > v).count() as f64;
            probs.iter().zip(q).map(|(p, q)| active * p * (q - v)).collect()
        }
        PgVariant::Rmpg => {
            let relu: Vec<f64> = q.iter().map(|q| (q - v).max(0.0)).collect();
            let mean: f64 = probs.iter().zip(&relu).map(|(p, r)| p * r).sum();
            probs.iter().zip(&relu).map(|(p, r)| p * (r - mean)).collect()
        }
    };
    if entropy_cost != 0.0 {
        let entropy: f64 = -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
        for (g, &p) in grad.iter_mut().zip(probs) {
            if p > 0.0 {
                *g -= entropy_cost * cf_reach * p * (p.ln() + entropy);
            }
        }
    }
    grad
}

/// One simultaneous update of both players' logits with exact critics.
pub fn pg_iteration(tree: &GameTree, logits: &mut LogitTable, variant: PgVariant, lr: f64, entropy_cost: f64) {
    let profile = logits.profile();
    let vals = infoset_values(tree, &profile);
    for i in 0..tree.num_infosets() {
        let g = pg_gradient(variant, profile.probs(i), &vals.q[i], vals.cf_reach[i], entropy_cost);
        for (y, g) in logits.row_mut(i).iter_mut().zip(g) {
            *y += lr * g;
        }
    }
}

pub struct PolicyGradient {
    tree: Arc<GameTree>,
    pub logits: LogitTable,
    pub variant: PgVariant,
    pub lr: f64,
    pub entropy_cost: f64,
    iteration: usize,
    nodes: u64,
}

impl PolicyGradient {
    pub fn new(tree: Arc<GameTree>, variant: PgVariant, lr: f64, entropy_cost: f64) -> Self {
        PolicyGradient {
            logits: LogitTable::zeros(&tree),
            tree,
            variant,
            lr,
            entropy_cost,
            iteration: 0,
            nodes: 0,
        }
    }
}

impl Solver for PolicyGradient {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        pg_iteration(&self.tree, &mut self.logits, self.variant, self.lr, self.entropy_cost);
        self.iteration += 1;
        self.nodes += 2 * self.tree.nodes().len() as u64;
        Ok(())
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn policy(&mut self) -> Result<PolicyTable> {
        Ok(self.logits.profile().to_table(&self.tree))
    }

    fn nodes_touched(&self) -> u64 {
        self.nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::exploitability_dense;
    use crate::game::{build_game, Profile};
    use crate::tabular::softmax;

    const VARIANTS: [PgVariant; 3] = [PgVariant::Qpg, PgVariant::Rpg, PgVariant::Rmpg];

    #[test]
    fn equal_values_give_zero_gradient() {
        for variant in VARIANTS {
            let g = pg_gradient(variant, &[0.2, 0.3, 0.5], &[1.5, 1.5, 1.5], 0.7, 0.0);
            assert!(g.iter().all(|x| x.abs() < 1e-15), "{variant}: {g:?}");
        }
    }

    #[test]
    fn rpg_loss_is_nonnegative_and_zero_at_rest() {
        assert_eq!(rpg_loss(&[0.5, 0.5], &[0.0, 0.0]), 0.0);
        assert!(rpg_loss(&[0.9, 0.1], &[-1.0, 1.0]) > 0.0);
        let tree = GameTree::matrix_game(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let vals = infoset_values(&tree, &Profile::uniform(&tree));
        for i in 0..2 {
            assert_eq!(rpg_loss(&[0.5, 0.5], &vals.q[i]), 0.0);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let q = [0.3, -1.2, 0.8];
        let y = [0.1, -0.4, 0.7];
        let h = 1e-6;
        let objective = |variant: PgVariant, y: &[f64], frozen: &[f64]| -> f64 {
            let p = softmax(y);
            let v: f64 = p.iter().zip(&q).map(|(p, q)| p * q).sum();
            let entropy: f64 = -p.iter().map(|p| p * p.ln()).sum::<f64>();
            let base = match variant {
                PgVariant::Qpg => v,
                PgVariant::Rpg => -rpg_loss(&p, &q),
                // The thresholded regrets are treated as constants.
                PgVariant::Rmpg => p.iter().zip(frozen).map(|(p, r)| p * r).sum(),
            };
            base + 0.1 * 0.5 * entropy
        };
        let p0 = softmax(&y);
        let v0: f64 = p0.iter().zip(&q).map(|(p, q)| p * q).sum();
        let frozen: Vec<f64> = q.iter().map(|q| (q - v0).max(0.0)).collect();
        for variant in VARIANTS {
            let g = pg_gradient(variant, &p0, &q, 0.5, 0.1);
            for b in 0..3 {
                let mut up = y;
                up[b] += h;
                let mut down = y;
                down[b] -= h;
                let fd = (objective(variant, &up, &frozen) - objective(variant, &down, &frozen)) / (2.0 * h);
                assert!((fd - g[b]).abs() < 1e-7, "{variant} {b}: {} vs {fd}", g[b]);
            }
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for variant in VARIANTS {
            assert_eq!(variant.as_str().parse::<PgVariant>().unwrap(), variant);
        }
        assert!("a2c".parse::<PgVariant>().is_err());
    }

    #[test]
    fn each_variant_converges_on_kuhn() {
        let tree = Arc::new(GameTree::new(&build_game("kuhn").unwrap()));
        let uniform = exploitability_dense(&tree, &Profile::uniform(&tree));
        for variant in VARIANTS {
            let mut pg = PolicyGradient::new(tree.clone(), variant, 0.01, 0.1);
            for _ in 0..100_000 {
                pg.step().unwrap();
            }
            let e = exploitability_dense(&tree, &pg.logits.profile());
            assert!(e < 0.2 && e < uniform / 4.0, "{variant}: {e}");
        }
    }
}
