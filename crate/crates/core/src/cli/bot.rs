//! Scripted stand-ins for the human player.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deconfliction::{plan_with_table, Cell, Plan, ReservationTable};
use crate::dialogue::has_right_of_way;
use crate::game::{GameError, GameSession, HumanAction, SessionConfig};

/// Hard cap on steps per bot session.
pub const MAX_BOT_STEPS: u64 = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BotKind {
    /// Yields to every agent that holds right of way and never collides
    /// when a safe move exists.
    Optimal,
    /// Walks its shortest path and ignores the agents.
    Greedy,
    /// Mostly walks its shortest path, sometimes moves at random.
    Random,
}

impl BotKind {
    pub const ALL: [BotKind; 3] = [BotKind::Optimal, BotKind::Greedy, BotKind::Random];
}

impl fmt::Display for BotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BotKind::Optimal => "optimal",
            BotKind::Greedy => "greedy",
            BotKind::Random => "random",
        })
    }
}

impl FromStr for BotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(BotKind::Optimal),
            "greedy" => Ok(BotKind::Greedy),
            "random" => Ok(BotKind::Random),
            other => Err(format!("unknown bot `{other}` (expected optimal, greedy or random)")),
        }
    }
}

fn projection_step(session: &GameSession) -> HumanAction {
    let here = session.human().position;
    session
        .projection()
        .at(session.time() + 1)
        .and_then(|next| HumanAction::between(here, next))
        .unwrap_or(HumanAction::Wait)
}

/// Whether moving to `to` collides with an agent's next transition.
fn collides(session: &GameSession, to: Cell) -> bool {
    let t = session.time();
    let from = session.human().position;
    session.agents().iter().filter(|a| a.active).any(|a| {
        let next = a.plan.at(t + 1).unwrap_or(a.position);
        next == to || (a.position == to && next == from)
    })
}

fn optimal_step(session: &GameSession) -> HumanAction {
    let t = session.time();
    let culture = session.culture();
    let human = session.human();
    let grid = &session.config().map.grid;

    // Agents holding right of way keep their plans, so stay clear of them
    // for good. Everyone else is only avoided on the next step.
    let mut table = ReservationTable::new();
    for a in session.agents().iter().filter(|a| a.active) {
        let holds = has_right_of_way(culture, &a.context, &human.context).unwrap_or(true);
        match (holds, a.plan.from_time(t)) {
            (true, Some(p)) => table.reserve(&p),
            (_, Some(p)) if p.len() >= 2 => table.reserve(&Plan::new(p.path[..2].to_vec())),
            _ => table.reserve(&Plan::wait(a.position.at(t))),
        }
    }
    table.release_until(t);

    let safe = |a: HumanAction| session.is_legal(a).is_ok_and(|to| !collides(session, to));
    if let Ok(plan) = plan_with_table(grid, human.position.at(t), human.goal, &table) {
        if let Some(a) = plan.at(t + 1).and_then(|next| HumanAction::between(human.position, next)) {
            if safe(a) {
                return a;
            }
        }
    }
    HumanAction::ALL
        .into_iter()
        .filter(|&a| safe(a))
        .min_by_key(|&a| a.apply(human.position).manhattan(human.goal))
        .unwrap_or(HumanAction::Wait)
}

/// Picks the bot's next action.
pub fn choose_action(kind: BotKind, session: &GameSession, rng: &mut ChaCha8Rng) -> HumanAction {
    match kind {
        BotKind::Optimal => optimal_step(session),
        BotKind::Greedy => projection_step(session),
        BotKind::Random => {
            if rng.random_bool(0.7) {
                projection_step(session)
            } else {
                let legal: Vec<_> = HumanAction::ALL.into_iter().filter(|&a| session.is_legal(a).is_ok()).collect();
                legal[rng.random_range(0..legal.len())]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotRun {
    pub level: crate::culture::Level,
    pub mode: crate::game::Mode,
    pub seed: u64,
    pub bot: BotKind,
    pub steps: u64,
    pub fuel: i64,
    pub collisions: u64,
    /// Session clock at the last step.
    pub sim_ms: u64,
    pub finished: bool,
}

/// Plays one session to completion with a bot, spacing steps `step_ms`
/// apart on the session clock.
pub fn run_bot(config: SessionConfig, kind: BotKind, step_ms: u64) -> Result<(GameSession, BotRun), GameError> {
    let mut session = GameSession::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(session.config().seed ^ 0xb07);
    let mut now = 0;
    while !session.is_finished() && session.move_count() < MAX_BOT_STEPS {
        let action = choose_action(kind, &session, &mut rng);
        session.step(action, now)?;
        now += step_ms;
    }
    let c = session.config();
    let run = BotRun {
        level: c.level,
        mode: c.mode,
        seed: c.seed,
        bot: kind,
        steps: session.move_count(),
        fuel: session.fuel(),
        collisions: session.collision_count(),
        sim_ms: session.move_count().saturating_sub(1) * step_ms,
        finished: session.is_finished(),
    };
    Ok((session, run))
}
