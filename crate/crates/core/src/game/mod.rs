//! Extensive-form game definitions: Kuhn poker and Leduc poker.
//!
//! A [`GameSpec`] is an immutable rule set. [`State`] is a plain action history; all
//! node metadata (whose turn, chance outcomes, payoffs) is derived from the history on
//! demand by replaying the rules. Solvers never walk `State`s in their inner loops, they
//! use the compiled [`GameTree`] instead.

mod kuhn;
mod leduc;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use tree::sample_index;
pub use tree::{GameTree, InfosetInfo, Node, NodeKind as TreeNode, Profile};

/// Player index, `0` or `1`.
pub type Player = usize;

pub const NUM_PLAYERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameId {
    Kuhn,
    Leduc,
}

impl GameId {
    pub fn as_str(self) -> &'static str {
        match self {
            GameId::Kuhn => "kuhn",
            GameId::Leduc => "leduc",
        }
    }
}

impl FromStr for GameId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kuhn" | "kuhn_poker" => Ok(GameId::Kuhn),
            "leduc" | "leduc_poker" => Ok(GameId::Leduc),
            other => Err(Error::config(format!(
                "unknown game `{other}` (expected kuhn or leduc)"
            ))),
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Game-level action code.
///
/// Decision actions use the per-game codes below; chance actions carry the dealt card
/// index. Policies are indexed by position within [`GameSpec::legal_actions`], which
/// is always ordered pass/check/fold first, then bet/raise/call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub u8);

impl ActionId {
    pub const KUHN_PASS: ActionId = ActionId(0);
    pub const KUHN_BET: ActionId = ActionId(1);
    pub const LEDUC_FOLD: ActionId = ActionId(0);
    pub const LEDUC_CALL: ActionId = ActionId(1);
    pub const LEDUC_RAISE: ActionId = ActionId(2);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionLabel {
    Pass,
    Bet,
    Fold,
    Call,
    Raise,
    Deal(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Chance,
    Decision,
    Terminal,
}

/// A node of the game tree, identified by its full action history.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct State {
    history: Vec<ActionId>,
}

impl State {
    pub fn history(&self) -> &[ActionId] {
        &self.history
    }

    pub fn from_history(history: Vec<ActionId>) -> Self {
        State { history }
    }

    fn raw(&self) -> Vec<u8> {
        self.history.iter().map(|a| a.0).collect()
    }
}

/// Canonical identifier of an information set.
///
/// `observation` is a compact byte encoding of what `player` can see: private card,
/// public card (Leduc, [`NO_CARD`] before it is revealed) and the betting sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InfosetKey {
    pub player: u8,
    pub observation: Vec<u8>,
}

/// Placeholder for the Leduc public card before the flop.
pub const NO_CARD: u8 = u8::MAX;

impl fmt::Display for InfosetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}:", self.player)?;
        if self.is_leduc() {
            leduc::fmt_observation(&self.observation, f)
        } else {
            kuhn::fmt_observation(&self.observation, f)
        }
    }
}

impl InfosetKey {
    // Leduc observations start with a marker byte so the two encodings never collide.
    fn is_leduc(&self) -> bool {
        self.observation.first() == Some(&leduc::KEY_TAG)
    }
}

/// Immutable rule set of one supported game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub game_id: GameId,
    pub num_players: usize,
    pub max_actions_per_infoset: usize,
    /// Largest absolute terminal payoff, in chips.
    pub utility_bound: f64,
}

/// Constructs the rule set for `game_id` (`"kuhn"` or `"leduc"`).
pub fn build_game(game_id: &str) -> Result<GameSpec> {
    Ok(GameSpec::new(game_id.parse()?))
}

impl GameSpec {
    pub fn new(game_id: GameId) -> Self {
        match game_id {
            GameId::Kuhn => GameSpec {
                game_id,
                num_players: NUM_PLAYERS,
                max_actions_per_infoset: 2,
                utility_bound: 2.0,
            },
            GameId::Leduc => GameSpec {
                game_id,
                num_players: NUM_PLAYERS,
                max_actions_per_infoset: 3,
                utility_bound: leduc::UTILITY_BOUND,
            },
        }
    }

    pub fn initial_state(&self) -> State {
        State::default()
    }

    pub fn node_kind(&self, state: &State) -> NodeKind {
        self.view(state).kind
    }

    /// The player to act at a decision node, `None` elsewhere.
    pub fn current_player(&self, state: &State) -> Option<Player> {
        let view = self.view(state);
        (view.kind == NodeKind::Decision).then_some(view.player)
    }

    pub fn legal_actions(&self, state: &State) -> Result<Vec<ActionId>> {
        let view = self.view(state);
        match view.kind {
            NodeKind::Terminal => Err(Error::contract("legal_actions called on a terminal state")),
            NodeKind::Chance => Ok(view.chance.iter().map(|&(a, _)| a).collect()),
            NodeKind::Decision => Ok(view.actions),
        }
    }

    pub fn apply_action(&self, state: &State, action: ActionId) -> Result<State> {
        let legal = self.legal_actions(state)?;
        if !legal.contains(&action) {
            return Err(Error::contract(format!(
                "action {} is not legal after history {:?}",
                action.0,
                state.raw()
            )));
        }
        let mut history = state.history.clone();
        history.push(action);
        Ok(State { history })
    }

    pub fn chance_outcomes(&self, state: &State) -> Result<Vec<(ActionId, f64)>> {
        let view = self.view(state);
        if view.kind != NodeKind::Chance {
            return Err(Error::contract("chance_outcomes called on a non-chance state"));
        }
        Ok(view.chance)
    }

    pub fn terminal_returns(&self, state: &State) -> Result<[f64; 2]> {
        let view = self.view(state);
        if view.kind != NodeKind::Terminal {
            return Err(Error::contract("terminal_returns called on a non-terminal state"));
        }
        Ok(view.returns)
    }

    pub fn infoset_key(&self, state: &State, player: Player) -> Result<InfosetKey> {
        let view = self.view(state);
        if view.kind != NodeKind::Decision {
            return Err(Error::contract("infoset_key requires a decision state"));
        }
        if view.player != player {
            return Err(Error::contract(format!(
                "infoset_key requested for player {player} but player {} is to act",
                view.player
            )));
        }
        Ok(InfosetKey {
            player: player as u8,
            observation: view.observation,
        })
    }

    pub fn action_label(&self, state: &State, action: ActionId) -> ActionLabel {
        match self.node_kind(state) {
            NodeKind::Chance => ActionLabel::Deal(action.0),
            _ => match self.game_id {
                GameId::Kuhn => kuhn::label(action),
                GameId::Leduc => leduc::label(action),
            },
        }
    }

    /// Every infoset of `player` with its legal action count, in depth-first
    /// discovery order (chance outcomes and actions visited in ascending order).
    pub fn enumerate_infosets(&self, player: Player) -> Vec<(InfosetKey, usize)> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        self.walk(&self.initial_state(), &mut |state, view| {
            if view.kind == NodeKind::Decision && view.player == player {
                let key = InfosetKey {
                    player: player as u8,
                    observation: view.observation.clone(),
                };
                if seen.insert(key.clone()) {
                    out.push((key, view.actions.len()));
                }
            }
            let _ = state;
        });
        out
    }

    /// Depth-first pre-order traversal of every state.
    pub(crate) fn walk(&self, state: &State, visit: &mut impl FnMut(&State, &View)) {
        let view = self.view(state);
        visit(state, &view);
        let children: Vec<ActionId> = match view.kind {
            NodeKind::Terminal => return,
            NodeKind::Chance => view.chance.iter().map(|&(a, _)| a).collect(),
            NodeKind::Decision => view.actions.clone(),
        };
        for a in children {
            let mut history = state.history.clone();
            history.push(a);
            self.walk(&State { history }, visit);
        }
    }

    pub(crate) fn view(&self, state: &State) -> View {
        let raw = state.raw();
        match self.game_id {
            GameId::Kuhn => kuhn::view(&raw),
            GameId::Leduc => leduc::view(&raw),
        }
    }

    /// Width of the fixed infoset feature vector.
    pub fn feature_width(&self) -> usize {
        match self.game_id {
            GameId::Kuhn => kuhn::FEATURE_WIDTH,
            GameId::Leduc => leduc::FEATURE_WIDTH,
        }
    }

    /// Fixed-width encoding of an infoset: player one-hot, private card one-hot, public
    /// card one-hot (Leduc), then one one-hot block per betting slot.
    pub fn featurize(&self, key: &InfosetKey) -> Vec<f64> {
        match self.game_id {
            GameId::Kuhn => kuhn::featurize(key),
            GameId::Leduc => leduc::featurize(key),
        }
    }
}

/// Everything the rules derive from a history.
#[derive(Debug, Clone)]
pub(crate) struct View {
    pub kind: NodeKind,
    pub player: Player,
    pub actions: Vec<ActionId>,
    pub chance: Vec<(ActionId, f64)>,
    pub returns: [f64; 2],
    pub observation: Vec<u8>,
}

impl View {
    fn chance(outcomes: Vec<(ActionId, f64)>) -> Self {
        View {
            kind: NodeKind::Chance,
            player: 0,
            actions: Vec::new(),
            chance: outcomes,
            returns: [0.0; 2],
            observation: Vec::new(),
        }
    }

    fn terminal(returns: [f64; 2]) -> Self {
        View {
            kind: NodeKind::Terminal,
            player: 0,
            actions: Vec::new(),
            chance: Vec::new(),
            returns,
            observation: Vec::new(),
        }
    }

    fn decision(player: Player, actions: Vec<ActionId>, observation: Vec<u8>) -> Self {
        View {
            kind: NodeKind::Decision,
            player,
            actions,
            chance: Vec::new(),
            returns: [0.0; 2],
            observation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn play(spec: &GameSpec, actions: &[u8]) -> State {
        actions.iter().fold(spec.initial_state(), |s, &a| {
            spec.apply_action(&s, ActionId(a)).unwrap()
        })
    }

    #[test]
    fn unknown_game_is_config_error() {
        assert!(matches!(build_game("goofspiel"), Err(Error::Config(_))));
    }

    #[test]
    fn initial_states() {
        let kuhn = build_game("kuhn").unwrap();
        let root = kuhn.initial_state();
        assert!(root.history().is_empty());
        let outcomes = kuhn.chance_outcomes(&root).unwrap();
        assert_eq!(outcomes.len(), 3);
        assert!(outcomes.iter().all(|&(_, p)| (p - 1.0 / 3.0).abs() < 1e-15));

        let leduc = build_game("leduc").unwrap();
        let outcomes = leduc.chance_outcomes(&leduc.initial_state()).unwrap();
        assert_eq!(outcomes.len(), 6);
        assert!(outcomes.iter().all(|&(_, p)| (p - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn kuhn_rules() {
        let spec = build_game("kuhn").unwrap();
        // Deal J to player 0, Q to player 1.
        let s = play(&spec, &[0, 1]);
        assert_eq!(spec.node_kind(&s), NodeKind::Decision);
        assert_eq!(
            spec.legal_actions(&s).unwrap(),
            vec![ActionId::KUHN_PASS, ActionId::KUHN_BET]
        );
        let pp = play(&spec, &[0, 1, 0, 0]);
        assert_eq!(spec.node_kind(&pp), NodeKind::Terminal);
        assert_eq!(spec.terminal_returns(&pp).unwrap(), [-1.0, 1.0]);

        // K vs Q, bet/call: player 0 wins 2.
        let bc = play(&spec, &[2, 1, 1, 1]);
        assert_eq!(spec.terminal_returns(&bc).unwrap(), [2.0, -2.0]);
        // bet/pass: bettor wins the ante regardless of cards.
        let bp = play(&spec, &[0, 2, 1, 0]);
        assert_eq!(spec.terminal_returns(&bp).unwrap(), [1.0, -1.0]);
        // pass/bet/pass: player 1 wins.
        let pbp = play(&spec, &[2, 0, 0, 1, 0]);
        assert_eq!(spec.terminal_returns(&pbp).unwrap(), [-1.0, 1.0]);
    }

    #[test]
    fn contract_violations() {
        let spec = build_game("kuhn").unwrap();
        let terminal = play(&spec, &[0, 1, 0, 0]);
        assert!(spec.legal_actions(&terminal).is_err());
        assert!(spec.chance_outcomes(&play(&spec, &[0, 1])).is_err());
        assert!(spec.terminal_returns(&play(&spec, &[0, 1])).is_err());
        // Player 1 cannot be dealt player 0's card.
        let s = play(&spec, &[1]);
        assert!(spec.apply_action(&s, ActionId(1)).is_err());
        assert!(spec.infoset_key(&play(&spec, &[0, 1]), 1).is_err());
    }

    #[test]
    fn apply_action_is_pure_and_children_distinct() {
        let spec = build_game("leduc").unwrap();
        let s = play(&spec, &[0, 3]);
        let before = s.clone();
        let children: Vec<State> = spec
            .legal_actions(&s)
            .unwrap()
            .into_iter()
            .map(|a| spec.apply_action(&s, a).unwrap())
            .collect();
        assert_eq!(s, before);
        for i in 0..children.len() {
            for j in i + 1..children.len() {
                assert_ne!(children[i].history(), children[j].history());
            }
        }
    }

    #[test]
    fn leduc_raise_cap_and_rounds() {
        let spec = build_game("leduc").unwrap();
        // Deal, then raise, re-raise: caller may only fold or call.
        let s = play(&spec, &[0, 2, 2, 2]);
        assert_eq!(
            spec.legal_actions(&s).unwrap(),
            vec![ActionId::LEDUC_FOLD, ActionId::LEDUC_CALL]
        );
        // No fold when not facing a bet.
        let opening = play(&spec, &[0, 2]);
        assert_eq!(
            spec.legal_actions(&opening).unwrap(),
            vec![ActionId::LEDUC_CALL, ActionId::LEDUC_RAISE]
        );
        // check/check ends round one: public card chance node over 4 remaining cards.
        let flop = play(&spec, &[0, 2, 1, 1]);
        assert_eq!(spec.node_kind(&flop), NodeKind::Chance);
        let outcomes = spec.chance_outcomes(&flop).unwrap();
        assert_eq!(outcomes.len(), 4);
        assert!(outcomes.iter().all(|&(_, p)| (p - 0.25).abs() < 1e-15));
        // raise/call also ends the round.
        let flop = play(&spec, &[0, 2, 2, 1]);
        assert_eq!(spec.node_kind(&flop), NodeKind::Chance);
        // Round two, two raises: capped again.
        let s = play(&spec, &[0, 2, 1, 1, 4, 2, 2]);
        assert_eq!(
            spec.legal_actions(&s).unwrap(),
            vec![ActionId::LEDUC_FOLD, ActionId::LEDUC_CALL]
        );
    }

    #[test]
    fn leduc_payoffs() {
        let spec = build_game("leduc").unwrap();
        // Player 0 holds J (card 0), player 1 holds K (card 4), public J: pair wins.
        // r1: raise, call (contrib 3 each). r2: raise, call (7 each).
        let s = play(&spec, &[0, 4, 2, 1, 1, 2, 1]);
        assert_eq!(spec.terminal_returns(&s).unwrap(), [7.0, -7.0]);
        // Same line with a Q on board: K high wins.
        let s = play(&spec, &[0, 4, 2, 1, 2, 2, 1]);
        assert_eq!(spec.terminal_returns(&s).unwrap(), [-7.0, 7.0]);
        // Equal ranks split.
        let s = play(&spec, &[0, 1, 1, 1, 4, 1, 1]);
        assert_eq!(spec.terminal_returns(&s).unwrap(), [0.0, 0.0]);
        // Fold to the opening raise loses the ante.
        let s = play(&spec, &[0, 4, 2, 0]);
        assert_eq!(spec.terminal_returns(&s).unwrap(), [1.0, -1.0]);
        // Maximum pot: two raises each round, called down.
        let s = play(&spec, &[0, 4, 2, 2, 1, 2, 2, 2, 1]);
        assert_eq!(spec.terminal_returns(&s).unwrap(), [-13.0, 13.0]);
    }

    #[test]
    fn infoset_keys_hide_opponent_card() {
        let spec = build_game("kuhn").unwrap();
        let a = play(&spec, &[1, 0]);
        let b = play(&spec, &[1, 2]);
        assert_eq!(spec.infoset_key(&a, 0).unwrap(), spec.infoset_key(&b, 0).unwrap());
        let c = play(&spec, &[1, 0, 0, 1]);
        assert_ne!(spec.infoset_key(&a, 0).unwrap(), spec.infoset_key(&c, 0).unwrap());
        let p1 = spec.enumerate_infosets(1);
        let p0 = spec.enumerate_infosets(0);
        assert_eq!(p0.len(), 6);
        assert_eq!(p1.len(), 6);
        assert!(p0.iter().chain(&p1).all(|(_, n)| *n == 2));
    }

    #[test]
    fn key_display_is_readable() {
        let spec = build_game("kuhn").unwrap();
        let key = spec.infoset_key(&play(&spec, &[2, 0, 0, 1]), 0).unwrap();
        assert_eq!(key.to_string(), "p0:K pb");
        let leduc = build_game("leduc").unwrap();
        let key = leduc.infoset_key(&play(&leduc, &[0, 4, 2, 1, 3, 2]), 1).unwrap();
        assert_eq!(key.to_string(), "p1:K0 Q1 rc/r");
    }
}
