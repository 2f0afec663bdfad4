//! Leduc hold'em: six cards (J, Q, K in two suits), one-chip ante, fixed raises of
//! 2 then 4 chips, at most two raises per round, one public card between rounds.

use std::fmt;

use super::{ActionId, ActionLabel, InfosetKey, View, NO_CARD};

const NUM_CARDS: u8 = 6;
const NUM_SUITS: u8 = 2;
const ANTE: f64 = 1.0;
const RAISE_SIZES: [f64; 2] = [2.0, 4.0];
const MAX_RAISES: u8 = 2;
/// Longest possible betting sequence in one round (check, raise, raise, call).
const MAX_ROUND_ACTIONS: usize = 4;

/// Ante plus two capped raises in each round.
pub(super) const UTILITY_BOUND: f64 = ANTE + 2.0 * RAISE_SIZES[0] + 2.0 * RAISE_SIZES[1];

pub(super) const KEY_TAG: u8 = 0xfe;
const ROUND_SEP: u8 = 0xfd;

/// player + private card + public card + (fold, call, raise) per betting slot.
pub(super) const FEATURE_WIDTH: usize =
    2 + 2 * NUM_CARDS as usize + 3 * 2 * MAX_ROUND_ACTIONS;

fn rank(card: u8) -> u8 {
    card / NUM_SUITS
}

pub(super) fn label(action: ActionId) -> ActionLabel {
    match action {
        ActionId::LEDUC_FOLD => ActionLabel::Fold,
        ActionId::LEDUC_CALL => ActionLabel::Call,
        _ => ActionLabel::Raise,
    }
}

#[derive(Debug, Default)]
struct Betting {
    contrib: [f64; 2],
    raises: u8,
    calls: u8,
    to_act: usize,
    round_done: bool,
    folded: Option<usize>,
    actions: Vec<u8>,
}

impl Betting {
    fn new(contrib: [f64; 2]) -> Self {
        Betting {
            contrib,
            ..Default::default()
        }
    }

    fn stakes(&self) -> f64 {
        self.contrib[0].max(self.contrib[1])
    }

    fn legal(&self) -> Vec<ActionId> {
        let mut out = Vec::with_capacity(3);
        if self.stakes() > self.contrib[self.to_act] {
            out.push(ActionId::LEDUC_FOLD);
        }
        out.push(ActionId::LEDUC_CALL);
        if self.raises < MAX_RAISES {
            out.push(ActionId::LEDUC_RAISE);
        }
        out
    }

    fn apply(&mut self, action: u8, raise_size: f64) {
        let p = self.to_act;
        self.actions.push(action);
        match ActionId(action) {
            ActionId::LEDUC_FOLD => self.folded = Some(p),
            ActionId::LEDUC_CALL => {
                self.contrib[p] = self.stakes();
                self.calls += 1;
                self.round_done =
                    (self.raises == 0 && self.calls == 2) || (self.raises > 0 && self.calls == 1);
            }
            _ => {
                self.contrib[p] = self.stakes() + raise_size;
                self.raises += 1;
                self.calls = 0;
            }
        }
        self.to_act = 1 - p;
    }
}

pub(super) fn view(history: &[u8]) -> View {
    if history.len() < 2 {
        let dealt = history.first().copied();
        let remaining: Vec<u8> = (0..NUM_CARDS).filter(|&c| Some(c) != dealt).collect();
        let p = 1.0 / remaining.len() as f64;
        return View::chance(remaining.into_iter().map(|c| (ActionId(c), p)).collect());
    }
    let cards = [history[0], history[1]];
    let mut rest = history[2..].iter();

    let mut first = Betting::new([ANTE, ANTE]);
    while !first.round_done && first.folded.is_none() {
        match rest.next() {
            Some(&a) => first.apply(a, RAISE_SIZES[0]),
            None => return decision(cards, NO_CARD, &first, None),
        }
    }
    if let Some(loser) = first.folded {
        return View::terminal(fold_returns(loser, first.contrib));
    }

    let Some(&public) = rest.next() else {
        let remaining: Vec<u8> = (0..NUM_CARDS).filter(|c| !cards.contains(c)).collect();
        let p = 1.0 / remaining.len() as f64;
        return View::chance(remaining.into_iter().map(|c| (ActionId(c), p)).collect());
    };

    let mut second = Betting::new(first.contrib);
    while !second.round_done && second.folded.is_none() {
        match rest.next() {
            Some(&a) => second.apply(a, RAISE_SIZES[1]),
            None => return decision(cards, public, &second, Some(&first.actions)),
        }
    }
    if let Some(loser) = second.folded {
        return View::terminal(fold_returns(loser, second.contrib));
    }
    View::terminal(showdown(cards, public, second.contrib))
}

fn decision(cards: [u8; 2], public: u8, round: &Betting, earlier: Option<&[u8]>) -> View {
    let player = round.to_act;
    let mut observation = vec![KEY_TAG, cards[player], public];
    if let Some(first) = earlier {
        observation.extend_from_slice(first);
        observation.push(ROUND_SEP);
    }
    observation.extend_from_slice(&round.actions);
    View::decision(player, round.legal(), observation)
}

fn fold_returns(loser: usize, contrib: [f64; 2]) -> [f64; 2] {
    let mut r = [0.0; 2];
    r[loser] = -contrib[loser];
    r[1 - loser] = contrib[loser];
    r
}

fn showdown(cards: [u8; 2], public: u8, contrib: [f64; 2]) -> [f64; 2] {
    let strength = |c: u8| {
        if rank(c) == rank(public) {
            // Any pair beats every unpaired hand.
            10 + rank(c)
        } else {
            rank(c)
        }
    };
    let (s0, s1) = (strength(cards[0]), strength(cards[1]));
    // Both players have put in the same amount at showdown.
    let pot = contrib[0];
    match s0.cmp(&s1) {
        std::cmp::Ordering::Greater => [pot, -pot],
        std::cmp::Ordering::Less => [-pot, pot],
        std::cmp::Ordering::Equal => [0.0, 0.0],
    }
}

fn card_name(card: u8) -> String {
    format!("{}{}", ['J', 'Q', 'K'][rank(card) as usize], card % NUM_SUITS)
}

pub(super) fn fmt_observation(obs: &[u8], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let [_, private, public, betting @ ..] = obs else {
        return Ok(());
    };
    f.write_str(&card_name(*private))?;
    if *public != NO_CARD {
        write!(f, " {}", card_name(*public))?;
    }
    if !betting.is_empty() {
        f.write_str(" ")?;
        for &a in betting {
            f.write_str(match a {
                ROUND_SEP => "/",
                0 => "f",
                1 => "c",
                _ => "r",
            })?;
        }
    }
    Ok(())
}

pub(super) fn featurize(key: &InfosetKey) -> Vec<f64> {
    let mut x = vec![0.0; FEATURE_WIDTH];
    x[key.player as usize] = 1.0;
    let [_, private, public, betting @ ..] = key.observation.as_slice() else {
        panic!("malformed leduc key");
    };
    let cards = NUM_CARDS as usize;
    x[2 + *private as usize] = 1.0;
    if *public != NO_CARD {
        x[2 + cards + *public as usize] = 1.0;
    }
    let base = 2 + 2 * cards;
    let mut round = 0;
    let mut slot = 0;
    for &a in betting {
        if a == ROUND_SEP {
            round = 1;
            slot = 0;
            continue;
        }
        x[base + 3 * (round * MAX_ROUND_ACTIONS + slot) + a as usize] = 1.0;
        slot += 1;
    }
    x
}
