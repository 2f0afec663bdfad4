//! Three-card Kuhn poker: one-chip ante, one-chip bet, a single betting round.

use std::fmt;

use super::{ActionId, ActionLabel, InfosetKey, View};

const NUM_CARDS: u8 = 3;
const CARD_NAMES: [char; 3] = ['J', 'Q', 'K'];
const MAX_BETTING_SLOTS: usize = 3;

/// player one-hot + card one-hot + one (pass, bet) block per betting slot.
pub(super) const FEATURE_WIDTH: usize = 2 + NUM_CARDS as usize + 2 * MAX_BETTING_SLOTS;

pub(super) fn label(action: ActionId) -> ActionLabel {
    if action == ActionId::KUHN_PASS {
        ActionLabel::Pass
    } else {
        ActionLabel::Bet
    }
}

pub(super) fn view(history: &[u8]) -> View {
    match history.len() {
        0 => View::chance(
            (0..NUM_CARDS)
                .map(|c| (ActionId(c), 1.0 / NUM_CARDS as f64))
                .collect(),
        ),
        1 => View::chance(
            (0..NUM_CARDS)
                .filter(|&c| c != history[0])
                .map(|c| (ActionId(c), 1.0 / (NUM_CARDS - 1) as f64))
                .collect(),
        ),
        _ => {
            let cards = [history[0], history[1]];
            let betting = &history[2..];
            match betting {
                [] | [0] | [1] | [0, 1] => {
                    let player = betting.len() % 2;
                    let mut observation = vec![cards[player]];
                    observation.extend_from_slice(betting);
                    View::decision(
                        player,
                        vec![ActionId::KUHN_PASS, ActionId::KUHN_BET],
                        observation,
                    )
                }
                _ => View::terminal(returns(cards, betting)),
            }
        }
    }
}

fn returns(cards: [u8; 2], betting: &[u8]) -> [f64; 2] {
    let showdown = |stake: f64| {
        if cards[0] > cards[1] {
            [stake, -stake]
        } else {
            [-stake, stake]
        }
    };
    match betting {
        [0, 0] => showdown(1.0),
        [1, 1] | [0, 1, 1] => showdown(2.0),
        [1, 0] => [1.0, -1.0],
        [0, 1, 0] => [-1.0, 1.0],
        other => unreachable!("not a kuhn terminal: {other:?}"),
    }
}

pub(super) fn fmt_observation(obs: &[u8], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let Some((&card, betting)) = obs.split_first() else {
        return Ok(());
    };
    write!(f, "{}", CARD_NAMES[card as usize])?;
    if !betting.is_empty() {
        f.write_str(" ")?;
        for &a in betting {
            f.write_str(if a == 0 { "p" } else { "b" })?;
        }
    }
    Ok(())
}

pub(super) fn featurize(key: &InfosetKey) -> Vec<f64> {
    let mut x = vec![0.0; FEATURE_WIDTH];
    x[key.player as usize] = 1.0;
    let (&card, betting) = key.observation.split_first().expect("empty kuhn key");
    x[2 + card as usize] = 1.0;
    for (slot, &a) in betting.iter().enumerate() {
        x[2 + NUM_CARDS as usize + 2 * slot + a as usize] = 1.0;
    }
    x
}
