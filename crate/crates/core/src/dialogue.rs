//! Dialogue games over a culture's framework.
//!
//! A dialogue opens with the proponent's motion. Players then alternate, each
//! move attacking the previous one. The player who makes the last move wins.

use std::fmt;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::argumentation::{ArgumentId, ArgumentSet, ArgumentationFramework};
use crate::culture::{AgentContext, Culture, CultureError};

/// Default bound on game-tree nodes visited by [`decide_outcome`].
pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000;

/// Largest position considered in multiple-argument mode.
pub const DEFAULT_POSITION_SIZE: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DialogueError {
    #[error("dialogue has no moves; open it with a motion")]
    Empty,
    #[error("invalid motion: {0}")]
    Motion(String),
    #[error("illegal move {index}: {reason}")]
    IllegalMove { index: usize, reason: String },
    #[error("game tree exceeds the budget of {budget} nodes")]
    BudgetExceeded { budget: u64 },
    #[error(transparent)]
    Culture(#[from] CultureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Proponent,
    Opponent,
}

impl Player {
    pub fn adversary(self) -> Player {
        match self {
            Player::Proponent => Player::Opponent,
            Player::Opponent => Player::Proponent,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::Proponent => "proponent",
            Player::Opponent => "opponent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Move {
    pub player: Player,
    #[serde(with = "id_list")]
    pub position: ArgumentSet,
}

impl Move {
    pub fn new(player: Player, position: ArgumentSet) -> Self {
        Move { player, position }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueMode {
    #[default]
    SingleArgument,
    MultipleArgument,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub mode: DialogueMode,
    pub moves: Vec<Move>,
}

impl Dialogue {
    /// A dialogue holding only the proponent's opening move.
    pub fn opened(mode: DialogueMode, motion: ArgumentSet) -> Self {
        Dialogue { mode, moves: vec![Move::new(Player::Proponent, motion)] }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn last(&self) -> Option<&Move> {
        self.moves.last()
    }

    /// The player due to move next.
    pub fn to_move(&self) -> Player {
        match self.moves.last() {
            Some(m) => m.player.adversary(),
            None => Player::Proponent,
        }
    }

    pub fn motion(&self) -> Option<ArgumentSet> {
        self.moves.first().map(|m| m.position)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueResult {
    pub dialogue: Dialogue,
    pub winner: Player,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Uniform choice among verified legal moves.
    RandomVerified,
    /// Uniform choice among moves that keep a forced win, if there are any.
    OptimalGameTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MoveStrategy {
    pub policy: Policy,
    pub seed: u64,
}

impl MoveStrategy {
    pub fn random(seed: u64) -> Self {
        MoveStrategy { policy: Policy::RandomVerified, seed }
    }

    pub fn optimal(seed: u64) -> Self {
        MoveStrategy { policy: Policy::OptimalGameTree, seed }
    }
}

/// The two contexts of a dispute, indexed by player.
#[derive(Debug, Clone, Copy)]
pub struct Parties<'a> {
    pub proponent: &'a AgentContext,
    pub opponent: &'a AgentContext,
}

impl<'a> Parties<'a> {
    pub fn new(proponent: &'a AgentContext, opponent: &'a AgentContext) -> Self {
        Parties { proponent, opponent }
    }

    pub fn of(&self, p: Player) -> &'a AgentContext {
        match p {
            Player::Proponent => self.proponent,
            Player::Opponent => self.opponent,
        }
    }
}

/// Everything the legality rules need to know about the moves so far.
#[derive(Debug, Clone, Copy)]
struct History<'d> {
    moves: &'d [Move],
    /// Arguments attacked by any position played so far.
    attacked: ArgumentSet,
}

impl<'d> History<'d> {
    fn new(af: &ArgumentationFramework, moves: &'d [Move]) -> Self {
        let attacked = moves.iter().fold(ArgumentSet::EMPTY, |acc, m| acc.union(af.targets_of_set(m.position)));
        History { moves, attacked }
    }

    fn repeats(&self, mv: Move) -> bool {
        self.moves.contains(&mv)
    }
}

/// Positions the mover may play next, drawn from `pool`, in (size, mask)
/// order.
fn candidate_positions(
    af: &ArgumentationFramework,
    mode: DialogueMode,
    history: History<'_>,
    pool: ArgumentSet,
    max_size: usize,
) -> Vec<ArgumentSet> {
    let Some(last) = history.moves.last() else {
        return Vec::new();
    };
    let mover = last.player.adversary();
    // Arguments usable at all: not attacked by a played position, not self-attacking.
    let usable: ArgumentSet = pool.difference(history.attacked).iter().filter(|&a| !af.attacks(a, a)).collect();
    let hitters = usable.intersection(af.attackers_of_set(last.position));
    let mut out = Vec::new();
    match mode {
        DialogueMode::SingleArgument => {
            for a in hitters.iter() {
                let x = ArgumentSet::singleton(a);
                if !history.repeats(Move::new(mover, x)) {
                    out.push(x);
                }
            }
        }
        DialogueMode::MultipleArgument => {
            let cap = max_size.max(1);
            let members: Vec<ArgumentId> = usable.iter().collect();
            let mut stack: Vec<(usize, ArgumentSet)> = vec![(0, ArgumentSet::EMPTY)];
            while let Some((next, set)) = stack.pop() {
                if set.intersects(hitters) && !history.repeats(Move::new(mover, set)) {
                    out.push(set);
                }
                if set.len() == cap {
                    continue;
                }
                for (i, &a) in members.iter().enumerate().skip(next) {
                    let grown = set.with(a);
                    if af.targets_of_set(set).contains(a) || af.targets_of(a).intersects(set) {
                        continue;
                    }
                    stack.push((i + 1, grown));
                }
            }
            out.sort_by_key(|s| (s.len(), s.bits()));
        }
    }
    out
}

/// Legal continuations of `dialogue`, ignoring whether the mover can verify
/// them.
pub fn legal_next_positions(culture: &Culture, dialogue: &Dialogue) -> Result<Vec<ArgumentSet>, DialogueError> {
    legal_next_positions_in(culture.framework(), dialogue, DEFAULT_POSITION_SIZE)
}

pub fn legal_next_positions_in(
    af: &ArgumentationFramework,
    dialogue: &Dialogue,
    max_size: usize,
) -> Result<Vec<ArgumentSet>, DialogueError> {
    if dialogue.is_empty() {
        return Err(DialogueError::Empty);
    }
    let history = History::new(af, &dialogue.moves);
    Ok(candidate_positions(af, dialogue.mode, history, af.all(), max_size))
}

/// Legal continuations whose every argument the mover can demonstrate
/// against its adversary.
pub fn verified_next_positions(
    culture: &Culture,
    dialogue: &Dialogue,
    mover: &AgentContext,
    adversary: &AgentContext,
) -> Result<Vec<ArgumentSet>, DialogueError> {
    if dialogue.is_empty() {
        return Err(DialogueError::Empty);
    }
    let pool = culture.demonstrably_true_set(mover, adversary)?;
    let af = culture.framework();
    let history = History::new(af, &dialogue.moves);
    Ok(candidate_positions(af, dialogue.mode, history, pool, DEFAULT_POSITION_SIZE))
}

/// Precomputed state for repeated play between two fixed contexts.
pub struct Arena<'c> {
    culture: &'c Culture,
    mode: DialogueMode,
    max_size: usize,
    verified: [ArgumentSet; 2],
}

fn slot(p: Player) -> usize {
    match p {
        Player::Proponent => 0,
        Player::Opponent => 1,
    }
}

impl<'c> Arena<'c> {
    pub fn new(culture: &'c Culture, mode: DialogueMode, parties: Parties<'_>) -> Result<Self, DialogueError> {
        let p = culture.demonstrably_true_set(parties.proponent, parties.opponent)?;
        let o = culture.demonstrably_true_set(parties.opponent, parties.proponent)?;
        Ok(Arena { culture, mode, max_size: DEFAULT_POSITION_SIZE, verified: [p, o] })
    }

    pub fn with_max_position_size(mut self, max_size: usize) -> Self {
        self.max_size = max_size;
        self
    }

    pub fn verified(&self, p: Player) -> ArgumentSet {
        self.verified[slot(p)]
    }

    /// Checks that `motion` can open a dialogue in this arena.
    pub fn check_motion(&self, motion: ArgumentSet) -> Result<(), DialogueError> {
        let af = self.culture.framework();
        af.check_set(motion).map_err(|e| DialogueError::Motion(e.to_string()))?;
        if !motion.intersects(self.culture.propositions()) {
            return Err(DialogueError::Motion("the motion contains no proposition".into()));
        }
        if self.mode == DialogueMode::SingleArgument && motion.len() != 1 {
            return Err(DialogueError::Motion("single-argument dialogues open with one argument".into()));
        }
        if af.targets_of_set(motion).intersects(motion) {
            return Err(DialogueError::Motion("the motion attacks itself".into()));
        }
        if !motion.is_subset(self.verified(Player::Proponent)) {
            return Err(DialogueError::Motion("the proponent cannot verify every argument of the motion".into()));
        }
        Ok(())
    }

    pub fn next_positions(&self, moves: &[Move]) -> Vec<ArgumentSet> {
        let af = self.culture.framework();
        let Some(last) = moves.last() else {
            return Vec::new();
        };
        let pool = self.verified(last.player.adversary());
        candidate_positions(af, self.mode, History::new(af, moves), pool, self.max_size)
    }

    /// Whether the player to move after `moves` wins under optimal play.
    fn mover_wins(&self, moves: &mut Vec<Move>, nodes: &mut u64, budget: u64) -> Result<bool, DialogueError> {
        *nodes += 1;
        if *nodes > budget {
            return Err(DialogueError::BudgetExceeded { budget });
        }
        let mover = moves.last().map(|m| m.player.adversary()).unwrap_or(Player::Proponent);
        for x in self.next_positions(moves) {
            moves.push(Move::new(mover, x));
            let adversary_wins = self.mover_wins(moves, nodes, budget);
            moves.pop();
            if !adversary_wins? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Winner under optimal play of the dialogue opened by `motion`.
    pub fn decide(&self, motion: ArgumentSet, budget: u64) -> Result<Player, DialogueError> {
        self.check_motion(motion)?;
        let mut moves = vec![Move::new(Player::Proponent, motion)];
        let mut nodes = 0;
        let opponent_wins = self.mover_wins(&mut moves, &mut nodes, budget)?;
        Ok(if opponent_wins { Player::Opponent } else { Player::Proponent })
    }

    pub fn play(
        &self,
        motion: ArgumentSet,
        strategy: MoveStrategy,
        budget: u64,
    ) -> Result<DialogueResult, DialogueError> {
        self.check_motion(motion)?;
        let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
        let mut moves = vec![Move::new(Player::Proponent, motion)];
        let mut nodes = 0;
        loop {
            let mover = moves.last().map(|m| m.player.adversary()).unwrap_or(Player::Proponent);
            let options = self.next_positions(&moves);
            if options.is_empty() {
                break;
            }
            let choice = match strategy.policy {
                Policy::RandomVerified => *options.choose(&mut rng).expect("non-empty"),
                Policy::OptimalGameTree => {
                    let mut winning = Vec::new();
                    for &x in &options {
                        moves.push(Move::new(mover, x));
                        let adversary_wins = self.mover_wins(&mut moves, &mut nodes, budget);
                        moves.pop();
                        if !adversary_wins? {
                            winning.push(x);
                        }
                    }
                    let from = if winning.is_empty() { &options } else { &winning };
                    *from.choose(&mut rng).expect("non-empty")
                }
            };
            moves.push(Move::new(mover, choice));
        }
        let winner = moves.last().expect("opened").player;
        Ok(DialogueResult { dialogue: Dialogue { mode: self.mode, moves }, winner })
    }

    /// Visits every maximal dialogue opened by `motion`. Returns the number
    /// of dialogues won by each side, or an error when more than `budget`
    /// nodes would be visited.
    pub fn enumerate<F>(&self, motion: ArgumentSet, budget: u64, mut visit: F) -> Result<OutcomeCounts, DialogueError>
    where
        F: FnMut(&[Move], Player),
    {
        self.check_motion(motion)?;
        let mut moves = vec![Move::new(Player::Proponent, motion)];
        let mut counts = OutcomeCounts::default();
        let mut nodes = 0;
        self.walk(&mut moves, &mut nodes, budget, &mut counts, &mut visit)?;
        Ok(counts)
    }

    fn walk<F>(
        &self,
        moves: &mut Vec<Move>,
        nodes: &mut u64,
        budget: u64,
        counts: &mut OutcomeCounts,
        visit: &mut F,
    ) -> Result<(), DialogueError>
    where
        F: FnMut(&[Move], Player),
    {
        *nodes += 1;
        if *nodes > budget {
            return Err(DialogueError::BudgetExceeded { budget });
        }
        let options = self.next_positions(moves);
        if options.is_empty() {
            let winner = moves.last().expect("opened").player;
            match winner {
                Player::Proponent => counts.proponent += 1,
                Player::Opponent => counts.opponent += 1,
            }
            visit(moves, winner);
            return Ok(());
        }
        let mover = moves.last().expect("opened").player.adversary();
        for x in options {
            moves.push(Move::new(mover, x));
            let r = self.walk(moves, nodes, budget, counts, visit);
            moves.pop();
            r?;
        }
        Ok(())
    }
}

/// How many maximal dialogues each side wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub proponent: u64,
    pub opponent: u64,
}

impl OutcomeCounts {
    pub fn total(&self) -> u64 {
        self.proponent + self.opponent
    }

    /// The winner shared by every dialogue, if there is one.
    pub fn unanimous(&self) -> Option<Player> {
        match (self.proponent, self.opponent) {
            (p, 0) if p > 0 => Some(Player::Proponent),
            (0, o) if o > 0 => Some(Player::Opponent),
            _ => None,
        }
    }
}

/// Plays a single-argument dialogue opened by `motion`.
pub fn play_dialogue(
    culture: &Culture,
    motion: ArgumentSet,
    proponent: &AgentContext,
    opponent: &AgentContext,
    strategy: MoveStrategy,
) -> Result<DialogueResult, DialogueError> {
    play_dialogue_in(culture, DialogueMode::SingleArgument, motion, proponent, opponent, strategy)
}

pub fn play_dialogue_in(
    culture: &Culture,
    mode: DialogueMode,
    motion: ArgumentSet,
    proponent: &AgentContext,
    opponent: &AgentContext,
    strategy: MoveStrategy,
) -> Result<DialogueResult, DialogueError> {
    Arena::new(culture, mode, Parties::new(proponent, opponent))?.play(motion, strategy, DEFAULT_NODE_BUDGET)
}

/// Winner of the single-argument dialogue opened by `motion` when both sides
/// play optimally.
pub fn decide_outcome(
    culture: &Culture,
    motion: ArgumentSet,
    proponent: &AgentContext,
    opponent: &AgentContext,
) -> Result<Player, DialogueError> {
    decide_outcome_with_budget(culture, DialogueMode::SingleArgument, motion, proponent, opponent, DEFAULT_NODE_BUDGET)
}

pub fn decide_outcome_with_budget(
    culture: &Culture,
    mode: DialogueMode,
    motion: ArgumentSet,
    proponent: &AgentContext,
    opponent: &AgentContext,
    budget: u64,
) -> Result<Player, DialogueError> {
    Arena::new(culture, mode, Parties::new(proponent, opponent))?.decide(motion, budget)
}

/// Whether `proponent` holds the culture's default motion against `opponent`.
pub fn has_right_of_way(
    culture: &Culture,
    proponent: &AgentContext,
    opponent: &AgentContext,
) -> Result<bool, DialogueError> {
    let motion = ArgumentSet::singleton(culture.default_motion());
    Ok(decide_outcome(culture, motion, proponent, opponent)? == Player::Proponent)
}

/// Renders a dialogue as `(p,{mu}) (o,{a}) ...` using framework labels.
pub fn render_moves(af: &ArgumentationFramework, moves: &[Move]) -> String {
    moves
        .iter()
        .map(|m| {
            let who = match m.player {
                Player::Proponent => "p",
                Player::Opponent => "o",
            };
            let args: Vec<&str> = m.position.iter().map(|a| af.label(a).unwrap_or("?")).collect();
            format!("({who},{{{}}})", args.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

mod id_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::argumentation::{ArgumentId, ArgumentSet};

    pub fn serialize<S: Serializer>(set: &ArgumentSet, s: S) -> Result<S::Ok, S::Error> {
        set.iter().collect::<Vec<ArgumentId>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ArgumentSet, D::Error> {
        let ids = Vec::<ArgumentId>::deserialize(d)?;
        if let Some(bad) = ids.iter().find(|a| a.index() >= crate::argumentation::MAX_ARGUMENTS) {
            return Err(serde::de::Error::custom(format!("argument id {bad} out of range")));
        }
        Ok(ids.into_iter().collect())
    }
}
