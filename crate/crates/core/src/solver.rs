//! Common interface the harness drives every algorithm through.

use std::sync::Arc;

use crate::error::Result;
use crate::evaluation::{self, NashConvReport, PolicyTable};
use crate::game::GameTree;

pub trait Solver {
    fn tree(&self) -> &Arc<GameTree>;

    /// Runs one iteration (one episode for NFSP).
    fn step(&mut self) -> Result<()>;

    /// Iterations completed so far.
    fn iteration(&self) -> usize;

    /// The policy whose exploitability is reported, read out infoset by infoset.
    fn policy(&mut self) -> Result<PolicyTable>;

    /// Game-tree nodes visited so far (sampled traversals count each visited node).
    fn nodes_touched(&self) -> u64;

    /// Total portfolio size across players, for population-based methods.
    fn pool_length(&self) -> Option<usize> {
        None
    }

    fn report(&mut self) -> Result<NashConvReport> {
        let policy = self.policy()?;
        evaluation::nash_conv(self.tree(), &policy)
    }
}
