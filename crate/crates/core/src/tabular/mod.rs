//! Exact-traversal learning algorithms over dense per-infoset tables.

mod cfr;
mod ed;
mod mccfr;
mod neurd;
mod pg;
mod values;
mod xfp;

pub use cfr::{cfr_iteration, cfr_update_player, Cfr};
pub use ed::{ed_gradient, ed_tabular_iteration, utility_logit_gradient, ExploitabilityDescent};
pub use mccfr::{external_sampling_traversal, mccfr_external_iteration, ExternalSamplingMccfr};
pub use neurd::{neurd_gate, neurd_tabular_iteration, TabularNeurd};
pub use pg::{pg_gradient, pg_iteration, rpg_loss, PgVariant, PolicyGradient};
pub use values::{infoset_values, InfosetValues};
pub use xfp::{realization_mixture, xfp_iteration, Xfp};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::PolicyTable;
use crate::game::{GameTree, Profile};

/// Policy proportional to the positive parts of `regrets`; uniform when none is positive.
pub fn regret_matching(regrets: &[f64]) -> Result<Vec<f64>> {
    if regrets.is_empty() {
        return Err(Error::contract("regret_matching needs at least one action"));
    }
    let mut out = vec![0.0; regrets.len()];
    regret_matching_into(regrets, &mut out);
    Ok(out)
}

pub(crate) fn regret_matching_into(regrets: &[f64], out: &mut [f64]) {
    let total: f64 = regrets.iter().map(|r| r.max(0.0)).sum();
    if total > 0.0 {
        for (o, r) in out.iter_mut().zip(regrets) {
            *o = r.max(0.0) / total;
        }
    } else {
        out.fill(1.0 / regrets.len() as f64);
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn zeros(tree: &GameTree) -> Vec<Vec<f64>> {
    tree.infosets().iter().map(|i| vec![0.0; i.num_actions()]).collect()
}

/// Cumulative counterfactual regret per infoset and action.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTable {
    rows: Vec<Vec<f64>>,
}

impl RegretTable {
    pub fn zeros(tree: &GameTree) -> Self {
        RegretTable { rows: zeros(tree) }
    }

    pub fn row(&self, infoset: usize) -> &[f64] {
        &self.rows[infoset]
    }

    pub fn row_mut(&mut self, infoset: usize) -> &mut [f64] {
        &mut self.rows[infoset]
    }

    /// Regret-matching policy at every infoset.
    pub fn current_profile(&self) -> Profile {
        Profile::from_vecs(
            self.rows
                .iter()
                .map(|r| {
                    let mut p = vec![0.0; r.len()];
                    regret_matching_into(r, &mut p);
                    p
                })
                .collect(),
        )
    }
}

/// Cumulative reach-weighted strategy per infoset.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyAccumulator {
    rows: Vec<Vec<f64>>,
}

impl StrategyAccumulator {
    pub fn zeros(tree: &GameTree) -> Self {
        StrategyAccumulator { rows: zeros(tree) }
    }

    pub fn row(&self, infoset: usize) -> &[f64] {
        &self.rows[infoset]
    }

    pub fn add(&mut self, infoset: usize, weight: f64, policy: &[f64]) {
        for (acc, p) in self.rows[infoset].iter_mut().zip(policy) {
            *acc += weight * p;
        }
    }

    /// Normalized accumulator; infosets without mass are uniform.
    pub fn average_profile(&self) -> Profile {
        Profile::from_vecs(
            self.rows
                .iter()
                .map(|r| {
                    let total: f64 = r.iter().sum();
                    if total > 0.0 {
                        r.iter().map(|w| w / total).collect()
                    } else {
                        vec![1.0 / r.len() as f64; r.len()]
                    }
                })
                .collect(),
        )
    }
}

pub fn average_policy(tree: &GameTree, acc: &StrategyAccumulator) -> PolicyTable {
    acc.average_profile().to_table(tree)
}

/// Real-valued logits per infoset; the policy is their softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitTable {
    rows: Vec<Vec<f64>>,
}

impl LogitTable {
    pub fn zeros(tree: &GameTree) -> Self {
        LogitTable { rows: zeros(tree) }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        LogitTable { rows }
    }

    pub fn row(&self, infoset: usize) -> &[f64] {
        &self.rows[infoset]
    }

    pub fn row_mut(&mut self, infoset: usize) -> &mut [f64] {
        &mut self.rows[infoset]
    }

    pub fn profile(&self) -> Profile {
        Profile::from_vecs(self.rows.iter().map(|r| softmax(r)).collect())
    }
}

/// Decaying step size `init_lr / (1 + lr_scale * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub init_lr: f64,
    pub lr_scale: f64,
}

impl LrSchedule {
    pub fn lr(&self, t: usize) -> f64 {
        self.init_lr / (1.0 + self.lr_scale * t as f64)
    }
}
