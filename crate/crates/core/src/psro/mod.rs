//! Policy-space response oracles over explicit tabular portfolios.

mod meta;

pub use meta::{
    matrix_nash_conv, meta_solve, MetaSolver, MetaStrategy, NASH_MAX_ITERATIONS, NASH_TOLERANCE, PRD_GAMMA,
    PRD_STEP,
};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{best_response_to_reach, expected_returns_dense, mixture_nash_conv, NashConvReport, PolicyTable};
use crate::game::{GameTree, Player, Profile, TreeNode};
use crate::solver::Solver;
use crate::tabular::realization_mixture;

/// Each player's policies, in insertion order. Entries are stored as dense profiles of
/// which only the owning player's infosets are meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPortfolio {
    policies: [Vec<Profile>; 2],
}

impl PolicyPortfolio {
    /// One uniform policy per player.
    pub fn uniform(tree: &GameTree) -> Self {
        PolicyPortfolio { policies: [vec![Profile::uniform(tree)], vec![Profile::uniform(tree)]] }
    }

    pub fn from_policies(p0: Vec<Profile>, p1: Vec<Profile>) -> Result<Self> {
        if p0.is_empty() || p1.is_empty() {
            return Err(Error::contract("every portfolio needs at least one policy"));
        }
        Ok(PolicyPortfolio { policies: [p0, p1] })
    }

    pub fn policies(&self, player: Player) -> &[Profile] {
        &self.policies[player]
    }

    pub fn push(&mut self, player: Player, policy: Profile) {
        self.policies[player].push(policy);
    }

    /// Sum of both portfolio sizes.
    pub fn pool_length(&self) -> usize {
        self.policies[0].len() + self.policies[1].len()
    }

    /// The `k`-th policy of `player` as a table of that player's infosets only.
    pub fn table(&self, tree: &GameTree, player: Player, k: usize) -> PolicyTable {
        self.policies[player][k].to_player_table(tree, player)
    }

    fn joint(&self, tree: &GameTree, row: usize, col: usize) -> Profile {
        let mut profile = self.policies[0][row].clone();
        profile.overwrite_player(tree, 1, &self.policies[1][col]);
        profile
    }

    fn weighted<'a>(&'a self, meta: &MetaStrategy, player: Player) -> Vec<(f64, &'a Profile)> {
        meta.probs[player].iter().copied().zip(&self.policies[player]).collect()
    }
}

/// Player-0 payoffs of every (row policy, column policy) pairing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPayoffTable {
    cells: Vec<Vec<f64>>,
}

impl EmpiricalPayoffTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cells(cells: Vec<Vec<f64>>) -> Result<Self> {
        let width = cells.first().map_or(0, Vec::len);
        if cells.iter().any(|r| r.len() != width) {
            return Err(Error::contract("payoff table rows differ in length"));
        }
        Ok(EmpiricalPayoffTable { cells })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.cells.len(), self.cells.first().map_or(0, Vec::len))
    }

    pub fn cells(&self) -> &[Vec<f64>] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row][col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffMode {
    Exact,
    Sampled { sims_per_entry: usize },
}

/// Extends `table` to cover the whole portfolio, computing only cells it lacks.
/// Returns the number of game-tree nodes visited.
pub fn fill_payoff_table(
    tree: &GameTree,
    portfolio: &PolicyPortfolio,
    table: &mut EmpiricalPayoffTable,
    mode: PayoffMode,
    rng: &mut impl Rng,
) -> Result<u64> {
    let rows = portfolio.policies(0).len();
    let cols = portfolio.policies(1).len();
    let (have_rows, have_cols) = table.shape();
    if have_rows > rows || have_cols > cols {
        return Err(Error::contract("payoff table is larger than the portfolio"));
    }
    let mut nodes = 0;
    for r in 0..rows {
        if r >= table.cells.len() {
            table.cells.push(Vec::with_capacity(cols));
        }
        for c in table.cells[r].len()..cols {
            let profile = portfolio.joint(tree, r, c);
            let value = match mode {
                PayoffMode::Exact => {
                    nodes += 2 * tree.nodes().len() as u64;
                    expected_returns_dense(tree, &profile)[0]
                }
                PayoffMode::Sampled { sims_per_entry } => {
                    if sims_per_entry == 0 {
                        return Err(Error::config("sims_per_entry must be positive"));
                    }
                    let mut total = 0.0;
                    for _ in 0..sims_per_entry {
                        let z = tree.sample_terminal(&profile, rng);
                        if let TreeNode::Terminal { returns } = &tree.node(z).kind {
                            total += returns[0];
                        }
                        nodes += tree.node(z).history.len() as u64 + 1;
                    }
                    total / sims_per_entry as f64
                }
            };
            table.cells[r].push(value);
        }
    }
    Ok(nodes)
}

/// Exact best response of `responder` to the opponent's meta-mixture, treating the
/// opponent's portfolio draw as a chance event at the root.
pub fn br_oracle(tree: &GameTree, portfolio: &PolicyPortfolio, meta: &MetaStrategy, responder: Player) -> Result<Profile> {
    let opponent = 1 - responder;
    let weights = &meta.probs[opponent];
    if weights.len() != portfolio.policies(opponent).len() {
        return Err(Error::contract("meta-strategy length does not match the portfolio"));
    }
    let mut reach = vec![0.0; tree.nodes().len()];
    for (&w, policy) in weights.iter().zip(portfolio.policies(opponent)) {
        if w == 0.0 {
            continue;
        }
        for (acc, r) in reach.iter_mut().zip(tree.player_reach(policy, opponent)) {
            *acc += w * r;
        }
    }
    let br = best_response_to_reach(tree, responder, &reach);
    Ok(br.to_profile(tree, &Profile::uniform(tree)))
}

/// Exact NashConv of the profile in which each player draws a portfolio policy from
/// the meta-strategy and follows it.
pub fn meta_nash_conv(tree: &GameTree, portfolio: &PolicyPortfolio, meta: &MetaStrategy) -> NashConvReport {
    mixture_nash_conv(tree, [&portfolio.weighted(meta, 0), &portfolio.weighted(meta, 1)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsroConfig {
    pub meta_strategy_method: MetaSolver,
    pub number_policies_selected: usize,
    pub sims_per_entry: usize,
    /// Evaluate payoff cells exactly instead of by `sims_per_entry` rollouts.
    pub exact_payoffs: bool,
    pub prd_iterations: usize,
    pub seed: u64,
}

impl Default for PsroConfig {
    fn default() -> Self {
        PsroConfig {
            meta_strategy_method: MetaSolver::Nash,
            number_policies_selected: 1,
            sims_per_entry: 1000,
            exact_payoffs: true,
            prd_iterations: 50_000,
            seed: 1,
        }
    }
}

impl PsroConfig {
    fn payoff_mode(&self) -> PayoffMode {
        if self.exact_payoffs {
            PayoffMode::Exact
        } else {
            PayoffMode::Sampled { sims_per_entry: self.sims_per_entry }
        }
    }
}

/// PSRO with an exact best-response oracle. The portfolio starts from one uniform
/// policy per player; after each step the table and meta-strategy cover the new pool.
pub struct Psro {
    tree: Arc<GameTree>,
    pub config: PsroConfig,
    portfolio: PolicyPortfolio,
    table: EmpiricalPayoffTable,
    meta: MetaStrategy,
    rng: ChaCha8Rng,
    iteration: usize,
    nodes: u64,
}

impl Psro {
    pub fn new(tree: Arc<GameTree>, config: PsroConfig) -> Result<Self> {
        if config.number_policies_selected != 1 {
            return Err(Error::config("only number_policies_selected = 1 is supported with an exact oracle"));
        }
        let mut psro = Psro {
            portfolio: PolicyPortfolio::uniform(&tree),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            table: EmpiricalPayoffTable::new(),
            meta: MetaStrategy::uniform(1, 1),
            tree,
            config,
            iteration: 0,
            nodes: 0,
        };
        psro.refresh()?;
        Ok(psro)
    }

    fn refresh(&mut self) -> Result<()> {
        self.nodes += fill_payoff_table(&self.tree, &self.portfolio, &mut self.table, self.config.payoff_mode(), &mut self.rng)?;
        self.meta = meta_solve(&self.table, self.config.meta_strategy_method, self.config.prd_iterations)?;
        Ok(())
    }

    pub fn portfolio(&self) -> &PolicyPortfolio {
        &self.portfolio
    }

    pub fn table(&self) -> &EmpiricalPayoffTable {
        &self.table
    }

    pub fn meta(&self) -> &MetaStrategy {
        &self.meta
    }

    /// Behavioral profile realizing the meta-mixture of each player's portfolio.
    pub fn meta_profile(&self) -> Profile {
        let mut profile = Profile::uniform(&self.tree);
        for player in 0..2 {
            let mixed = realization_mixture(&self.tree, player, &self.portfolio.weighted(&self.meta, player));
            profile.overwrite_player(&self.tree, player, &mixed);
        }
        profile
    }
}

impl Solver for Psro {
    fn tree(&self) -> &Arc<GameTree> {
        &self.tree
    }

    fn step(&mut self) -> Result<()> {
        let brs = [0, 1].map(|p| br_oracle(&self.tree, &self.portfolio, &self.meta, p));
        for (player, br) in brs.into_iter().enumerate() {
            self.portfolio.push(player, br?);
        }
        self.nodes += 4 * self.tree.nodes().len() as u64;
        self.refresh()?;
        self.iteration += 1;
        Ok(())
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn policy(&mut self) -> Result<PolicyTable> {
        Ok(self.meta_profile().to_table(&self.tree))
    }

    fn nodes_touched(&self) -> u64 {
        self.nodes
    }

    fn pool_length(&self) -> Option<usize> {
        Some(self.portfolio.pool_length())
    }

    fn report(&mut self) -> Result<NashConvReport> {
        Ok(meta_nash_conv(&self.tree, &self.portfolio, &self.meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{best_response_dense, nash_conv_dense};
    use crate::game::build_game;

    fn kuhn() -> Arc<GameTree> {
        Arc::new(GameTree::new(&build_game("kuhn").unwrap()))
    }

    #[test]
    fn singleton_table_matches_expected_returns() {
        let tree = kuhn();
        let portfolio = PolicyPortfolio::uniform(&tree);
        let mut table = EmpiricalPayoffTable::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        fill_payoff_table(&tree, &portfolio, &mut table, PayoffMode::Exact, &mut rng).unwrap();
        assert_eq!(table.shape(), (1, 1));
        assert_eq!(table.get(0, 0), expected_returns_dense(&tree, &Profile::uniform(&tree))[0]);
    }

    #[test]
    fn refill_only_adds_missing_cells() {
        let tree = kuhn();
        let mut portfolio = PolicyPortfolio::uniform(&tree);
        let mut table = EmpiricalPayoffTable::from_cells(vec![vec![123.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for p in 0..2 {
            let br = best_response_dense(&tree, &Profile::uniform(&tree), p).to_profile(&tree, &Profile::uniform(&tree));
            portfolio.push(p, br);
        }
        portfolio.push(1, Profile::uniform(&tree));
        fill_payoff_table(&tree, &portfolio, &mut table, PayoffMode::Exact, &mut rng).unwrap();
        assert_eq!(table.shape(), (2, 3));
        assert_eq!(table.cells().iter().map(Vec::len).sum::<usize>(), 6);
        assert_eq!(table.get(0, 0), 123.0);
    }

    #[test]
    fn single_uniform_opponent_reduces_to_plain_best_response() {
        let tree = kuhn();
        let portfolio = PolicyPortfolio::uniform(&tree);
        let meta = MetaStrategy::uniform(1, 1);
        for responder in 0..2 {
            let br = br_oracle(&tree, &portfolio, &meta, responder).unwrap();
            let plain = best_response_dense(&tree, &Profile::uniform(&tree), responder);
            for &i in tree.player_infosets(responder) {
                let mut pure = vec![0.0; tree.infoset(i).num_actions()];
                pure[plain.actions[i]] = 1.0;
                assert_eq!(br.probs(i), pure.as_slice());
            }
        }
    }

    #[test]
    fn first_iteration_grows_pool_to_four() {
        let mut psro = Psro::new(kuhn(), PsroConfig::default()).unwrap();
        assert_eq!(psro.pool_length(), Some(2));
        psro.step().unwrap();
        assert_eq!(psro.pool_length(), Some(4));
        assert_eq!(psro.table().shape(), (2, 2));
    }

    #[test]
    fn meta_profile_realizes_the_mixture() {
        let mut psro = Psro::new(kuhn(), PsroConfig::default()).unwrap();
        for _ in 0..3 {
            psro.step().unwrap();
        }
        let tree = psro.tree().clone();
        let direct = psro.report().unwrap().nash_conv;
        let behavioral = nash_conv_dense(&tree, &psro.meta_profile()).nash_conv;
        assert!((direct - behavioral).abs() < 1e-12);
    }

    #[test]
    fn rejects_multiple_selection() {
        let config = PsroConfig { number_policies_selected: 2, ..PsroConfig::default() };
        assert!(matches!(Psro::new(kuhn(), config), Err(Error::Config(_))));
    }
}
