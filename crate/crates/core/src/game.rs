//! The Busy Barracks engine: one human and eight rule-abiding agents share
//! a grid and advance in lockstep.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::argumentation::ArgumentSet;
use crate::culture::{AgentContext, Culture, Level};
use crate::deconfliction::{
    detect_conflict_after, parse_map, plan_path, plan_with_table, render_map, Cell, Conflict, ConflictKind, MapSpec,
    Plan, ReservationTable,
};
use crate::dialogue::{has_right_of_way, play_dialogue, render_moves, DialogueError, Move, MoveStrategy, Player};
use crate::explanation::{generate_explanation, render_hint, ExplanationKind};

pub const REPLAY_VERSION: u32 = 1;
pub const AGENT_COUNT: usize = 8;
/// Agents holding right of way against the human in every session.
pub const RIGHT_OF_WAY_AGENTS: usize = 4;
pub const HUMAN_ID: u8 = 0;
const CONTEXT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("the session has finished")]
    Finished,
    #[error("illegal action {action}: {reason}")]
    IllegalAction { action: HumanAction, reason: String },
    #[error("timestamp {now_ms} ms precedes the previous step at {last_ms} ms")]
    ClockRewind { now_ms: u64, last_ms: u64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("could not assign agent contexts in {0} attempts")]
    Contexts(usize),
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// No hints.
    N,
    /// Hints.
    X,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "N" | "n" => Ok(Mode::N),
            "X" | "x" => Ok(Mode::X),
            other => Err(format!("unknown mode `{other}` (expected N or X)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::N => "N",
            Mode::X => "X",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HumanAction {
    North,
    South,
    West,
    East,
    Wait,
}

impl HumanAction {
    pub const ALL: [HumanAction; 5] =
        [HumanAction::North, HumanAction::South, HumanAction::West, HumanAction::East, HumanAction::Wait];

    pub fn delta(self) -> (i32, i32) {
        match self {
            HumanAction::North => (0, -1),
            HumanAction::South => (0, 1),
            HumanAction::West => (-1, 0),
            HumanAction::East => (1, 0),
            HumanAction::Wait => (0, 0),
        }
    }

    pub fn apply(self, c: Cell) -> Cell {
        let (dx, dy) = self.delta();
        c.offset(dx, dy)
    }

    /// The action leading from `from` to the adjacent (or same) cell `to`.
    pub fn between(from: Cell, to: Cell) -> Option<HumanAction> {
        HumanAction::ALL.into_iter().find(|a| a.apply(from) == to)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HumanAction::North => "north",
            HumanAction::South => "south",
            HumanAction::West => "west",
            HumanAction::East => "east",
            HumanAction::Wait => "wait",
        }
    }
}

impl fmt::Display for HumanAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HumanAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "north" | "n" | "up" => Ok(HumanAction::North),
            "south" | "s" | "down" => Ok(HumanAction::South),
            "west" | "w" | "left" => Ok(HumanAction::West),
            "east" | "e" | "right" => Ok(HumanAction::East),
            "wait" | "stay" => Ok(HumanAction::Wait),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ready,
    Running,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub level: Level,
    pub mode: Mode,
    pub seed: u64,
    pub map: MapSpec,
    pub fuel_start: i64,
    pub move_cost: i64,
    pub collision_cost: i64,
    pub drain_cost: i64,
    pub drain_interval_ms: u64,
}

impl SessionConfig {
    pub fn new(level: Level, mode: Mode, seed: u64) -> Self {
        SessionConfig {
            level,
            mode,
            seed,
            map: MapSpec::default_map(),
            fuel_start: 50,
            move_cost: 1,
            collision_cost: 5,
            drain_cost: 1,
            drain_interval_ms: 10_000,
        }
    }

    pub fn with_map(mut self, map: MapSpec) -> Self {
        self.map = map;
        self
    }

    pub fn with_map_text(self, text: &str) -> Result<Self, GameError> {
        let map = parse_map(text).map_err(|e| GameError::Config(e.to_string()))?;
        Ok(self.with_map(map))
    }

    pub fn check(&self) -> Result<(), GameError> {
        if self.fuel_start <= 0 {
            return Err(GameError::Config("starting fuel must be positive".into()));
        }
        if self.move_cost < 0 || self.collision_cost < 0 || self.drain_cost < 0 {
            return Err(GameError::Config("costs must not be negative".into()));
        }
        if self.drain_interval_ms == 0 {
            return Err(GameError::Config("drain interval must be positive".into()));
        }
        if self.map.agents.len() != AGENT_COUNT {
            return Err(GameError::Config(format!(
                "the map has {} agents, sessions need {AGENT_COUNT}",
                self.map.agents.len()
            )));
        }
        if self.map.grid.d_max != 1 {
            return Err(GameError::Config("sessions move one cell per step".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub id: u8,
    pub context: AgentContext,
    pub position: Cell,
    pub goal: Cell,
    pub plan: Plan,
    pub active: bool,
    right_of_way: bool,
    yielding: bool,
}

impl AgentState {
    /// Whether the agent wins right of way against the human.
    pub fn has_right_of_way(&self) -> bool {
        self.right_of_way
    }

    pub fn name(&self) -> String {
        format!("Agent {}", self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HumanState {
    pub context: AgentContext,
    pub position: Cell,
    pub goal: Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collision {
    pub agent: u8,
    #[serde(flatten)]
    pub conflict: Conflict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerouteReason {
    Collision,
    Exhausted,
    Yield,
    AgentConflict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reroute {
    pub agent: u8,
    pub reason: RerouteReason,
    /// No conflict-free plan existed; the agent waits one step.
    pub fallback: bool,
    pub plan: Plan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisputeKind {
    Human,
    Agents,
    Hint,
}

/// A dialogue played during a step, for the replay log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub kind: DisputeKind,
    pub proponent: u8,
    pub opponent: u8,
    pub trace: String,
    pub moves: Vec<Move>,
    pub winner: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub agent: u8,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    pub t: u32,
    pub action: HumanAction,
    pub human: Cell,
    pub collisions: Vec<Collision>,
    pub reroutes: Vec<Reroute>,
    pub arrivals: Vec<u8>,
    pub hints: Vec<Hint>,
    pub fuel_after: i64,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridView {
    pub width: u32,
    pub height: u32,
    pub walls: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanView {
    pub position: Cell,
    pub goal: Cell,
    pub context: serde_json::Map<String, serde_json::Value>,
    pub projection: Plan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentView {
    pub id: u8,
    pub active: bool,
    pub position: Cell,
    pub goal: Cell,
    pub context: serde_json::Map<String, serde_json::Value>,
    pub plan: Plan,
}

/// What a client may see between steps. Right of way is not revealed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub culture: String,
    pub level: Level,
    pub mode: Mode,
    pub status: Status,
    pub t: u32,
    pub fuel: i64,
    pub move_count: u64,
    pub collision_count: u64,
    pub drained_intervals: u64,
    pub grid: GridView,
    pub human: HumanView,
    pub agents: Vec<AgentView>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hints: Option<Vec<Hint>>,
}

#[derive(Debug, Clone)]
pub struct GameSession {
    config: SessionConfig,
    culture: Culture,
    t: u32,
    human: HumanState,
    agents: Vec<AgentState>,
    projection: Plan,
    fuel: i64,
    move_count: u64,
    collision_count: u64,
    drained_intervals: u64,
    first_move_ms: Option<u64>,
    last_ms: Option<u64>,
    status: Status,
    rng: ChaCha8Rng,
    hints: Vec<Hint>,
    log: Vec<String>,
    chain: String,
}

/// Streams derived from the session seed. Contexts depend on the level; the
/// layout (which agents hold right of way) does not.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn level_stream(level: Level) -> u64 {
    match level {
        Level::Easy => 11,
        Level::Medium => 12,
        Level::Hard => 13,
    }
}

/// Draws nine distinct contexts whose pairwise right of way is a strict
/// total order, weakest first.
fn draw_ordered_contexts(culture: &Culture, rng: &mut ChaCha8Rng) -> Result<Vec<AgentContext>, GameError> {
    let n = AGENT_COUNT + 1;
    for _ in 0..CONTEXT_ATTEMPTS {
        let mut ctxs: Vec<AgentContext> = Vec::with_capacity(n);
        while ctxs.len() < n {
            let c = culture.schema().sample_context(rng);
            if !ctxs.contains(&c) {
                ctxs.push(c);
            }
            if culture.schema().domain_size() < n as u64 {
                return Err(GameError::Contexts(0));
            }
        }
        let mut wins = vec![0usize; n];
        let mut consistent = true;
        for i in 0..n {
            for j in (i + 1)..n {
                let ij = has_right_of_way(culture, &ctxs[i], &ctxs[j])?;
                let ji = has_right_of_way(culture, &ctxs[j], &ctxs[i])?;
                if ij == ji {
                    consistent = false;
                }
                if ij {
                    wins[i] += 1;
                } else {
                    wins[j] += 1;
                }
            }
        }
        // A tournament is transitive iff its score sequence is 0..n-1.
        let mut sorted = wins.clone();
        sorted.sort_unstable();
        if consistent && sorted.iter().enumerate().all(|(i, &w)| i == w) {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&i| wins[i]);
            return Ok(order.into_iter().map(|i| ctxs[i].clone()).collect());
        }
    }
    Err(GameError::Contexts(CONTEXT_ATTEMPTS))
}

impl GameSession {
    pub fn new(config: SessionConfig) -> Result<Self, GameError> {
        config.check()?;
        let culture = Culture::builtin(config.level);
        let mut ctx_rng = stream(config.seed, level_stream(config.level));
        let ordered = draw_ordered_contexts(&culture, &mut ctx_rng)?;

        let mut layout = stream(config.seed, 1);
        let mut slots: Vec<usize> = (0..AGENT_COUNT).collect();
        slots.shuffle(&mut layout);
        // Strength ranks 0..=8; the human holds the median.
        let median = AGENT_COUNT / 2;
        let agent_ranks: Vec<usize> = (0..=AGENT_COUNT).filter(|&r| r != median).collect();

        let human = HumanState {
            context: ordered[median].clone(),
            position: config.map.human_start,
            goal: config.map.human_goal,
        };
        let mut agents = Vec::with_capacity(AGENT_COUNT);
        for (k, spec) in config.map.agents.iter().enumerate() {
            let rank = agent_ranks[slots[k]];
            let context = ordered[rank].clone();
            let right_of_way = has_right_of_way(&culture, &context, &human.context)?;
            agents.push(AgentState {
                id: spec.id,
                context,
                position: spec.start,
                goal: spec.goal,
                plan: Plan::new(vec![spec.start.at(0)]),
                active: true,
                right_of_way,
                yielding: false,
            });
        }
        let holders = agents.iter().filter(|a| a.right_of_way).count();
        if holders != RIGHT_OF_WAY_AGENTS {
            return Err(GameError::Config(format!("{holders} agents hold right of way")));
        }

        let mut session = GameSession {
            rng: stream(config.seed, 2),
            projection: Plan::new(vec![human.position.at(0)]),
            config,
            culture,
            t: 0,
            human,
            agents,
            fuel: 0,
            move_count: 0,
            collision_count: 0,
            drained_intervals: 0,
            first_move_ms: None,
            last_ms: None,
            status: Status::Ready,
            hints: Vec::new(),
            log: Vec::new(),
            chain: String::new(),
        };
        session.fuel = session.config.fuel_start;

        // Initial plans by agent id, each avoiding the agents planned before it.
        let mut reroutes = Vec::new();
        for i in 0..session.agents.len() {
            let table = ReservationTable::from_plans(session.agents[..i].iter().map(|a| &a.plan));
            let a = &session.agents[i];
            match plan_with_table(&session.config.map.grid, a.position.at(0), a.goal, &table) {
                Ok(p) => session.agents[i].plan = p,
                Err(_) => {
                    let p = Plan::wait(a.position.at(0));
                    reroutes.push(Reroute {
                        agent: a.id,
                        reason: RerouteReason::Exhausted,
                        fallback: true,
                        plan: p.clone(),
                    });
                    session.agents[i].plan = p;
                }
            }
        }
        session.projection = session.project_human();
        let mut dialogues = Vec::new();
        session.settle(&mut reroutes, &mut dialogues)?;
        session.write_header();
        session.write_init(&reroutes, &dialogues);
        Ok(session)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn culture(&self) -> &Culture {
        &self.culture
    }

    pub fn time(&self) -> u32 {
        self.t
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_finished(&self) -> bool {
        self.status == Status::Finished
    }

    pub fn fuel(&self) -> i64 {
        self.fuel
    }

    pub fn move_count(&self) -> u64 {
        self.move_count
    }

    pub fn collision_count(&self) -> u64 {
        self.collision_count
    }

    pub fn drained_intervals(&self) -> u64 {
        self.drained_intervals
    }

    pub fn human(&self) -> &HumanState {
        &self.human
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn agent(&self, id: u8) -> Option<&AgentState> {
        self.agents.iter().find(|a| a.id == id)
    }

    /// The human's projected path: the shortest plan to its goal.
    pub fn projection(&self) -> &Plan {
        &self.projection
    }

    /// Hints for the current state; always empty in N mode.
    pub fn current_hints(&self) -> &[Hint] {
        &self.hints
    }

    /// The fuel the ledger identity predicts.
    pub fn expected_fuel(&self) -> i64 {
        let c = &self.config;
        c.fuel_start
            - c.move_cost * self.move_count as i64
            - c.collision_cost * self.collision_count as i64
            - c.drain_cost * self.drained_intervals as i64
    }

    pub fn is_legal(&self, action: HumanAction) -> Result<Cell, String> {
        let to = action.apply(self.human.position);
        let grid = &self.config.map.grid;
        if !grid.in_bounds(to) {
            return Err(format!("{to} is off the grid"));
        }
        if grid.is_wall(to) {
            return Err(format!("{to} is a wall"));
        }
        Ok(to)
    }

    fn project_human(&self) -> Plan {
        plan_path(&self.config.map.grid, self.human.position.at(self.t), self.human.goal, &[])
            .unwrap_or_else(|_| Plan::new(vec![self.human.position.at(self.t)]))
    }

    /// Advances the world by one step. `now_ms` is the caller's clock in
    /// milliseconds; it must not go backwards.
    pub fn step(&mut self, action: HumanAction, now_ms: u64) -> Result<StepEvents, GameError> {
        if self.status == Status::Finished {
            return Err(GameError::Finished);
        }
        let target = self.is_legal(action).map_err(|reason| GameError::IllegalAction { action, reason })?;
        if let Some(last) = self.last_ms {
            if now_ms < last {
                return Err(GameError::ClockRewind { now_ms, last_ms: last });
            }
        }

        self.last_ms = Some(now_ms);
        let first = *self.first_move_ms.get_or_insert(now_ms);
        self.status = Status::Running;
        let intervals = (now_ms - first) / self.config.drain_interval_ms;
        if intervals > self.drained_intervals {
            self.fuel -= self.config.drain_cost * (intervals - self.drained_intervals) as i64;
            self.drained_intervals = intervals;
        }
        self.fuel -= self.config.move_cost;
        self.move_count += 1;

        // Lockstep advance.
        let t1 = self.t + 1;
        let h0 = self.human.position;
        let mut collisions = Vec::new();
        for a in self.agents.iter_mut().filter(|a| a.active) {
            let a0 = a.position;
            let a1 = a.plan.at(t1).unwrap_or(a0);
            a.position = a1;
            if a1 == target {
                collisions.push(Collision {
                    agent: a.id,
                    conflict: Conflict { kind: ConflictKind::Vertex, time: t1, at: a1.at(t1), swap_to: None },
                });
            } else if a0 == target && a1 == h0 {
                collisions.push(Collision {
                    agent: a.id,
                    conflict: Conflict {
                        kind: ConflictKind::Swap,
                        time: t1,
                        at: a0.at(self.t),
                        swap_to: Some(a1.at(t1)),
                    },
                });
            }
        }
        self.human.position = target;
        self.t = t1;
        self.collision_count += collisions.len() as u64;
        self.fuel -= self.config.collision_cost * collisions.len() as i64;

        let mut arrivals = Vec::new();
        for a in self.agents.iter_mut().filter(|a| a.active) {
            if a.position == a.goal {
                a.active = false;
                arrivals.push(a.id);
            }
        }

        let mut reroutes = Vec::new();
        let mut dialogues = Vec::new();
        if self.human.position == self.human.goal {
            self.status = Status::Finished;
            self.hints.clear();
            self.projection = Plan::new(vec![self.human.position.at(self.t)]);
        } else {
            self.projection = self.project_human();
            let collided: Vec<u8> = collisions.iter().map(|c| c.agent).collect();
            for i in 0..self.agents.len() {
                let a = &self.agents[i];
                if !a.active {
                    continue;
                }
                let reason = if collided.contains(&a.id) {
                    RerouteReason::Collision
                } else if a.plan.at(self.t + 1).is_none() {
                    RerouteReason::Exhausted
                } else {
                    continue;
                };
                let yielding = a.yielding;
                self.reroute(i, yielding, reason, &mut reroutes);
            }
            self.settle(&mut reroutes, &mut dialogues)?;
        }

        let events = StepEvents {
            t: self.t,
            action,
            human: self.human.position,
            collisions,
            reroutes,
            arrivals,
            hints: self.hints.clone(),
            fuel_after: self.fuel,
            finished: self.status == Status::Finished,
        };
        self.write_step(action, now_ms, &events, &dialogues);
        Ok(events)
    }

    /// Replans agent `i` from the current vertex, avoiding the other active
    /// agents and, if asked, the human's projection. Falls back to waiting.
    fn reroute(&mut self, i: usize, avoid_human: bool, reason: RerouteReason, out: &mut Vec<Reroute>) -> bool {
        let plan = self.try_replan(i, avoid_human);
        let a = &mut self.agents[i];
        let (plan, fallback) = match plan {
            Some(p) => (p, false),
            None => (Plan::wait(a.position.at(self.t)), true),
        };
        a.plan = plan.clone();
        out.push(Reroute { agent: a.id, reason, fallback, plan });
        !fallback
    }

    fn try_replan(&self, i: usize, avoid_human: bool) -> Option<Plan> {
        let mut table = ReservationTable::from_plans(
            self.agents.iter().enumerate().filter(|(j, b)| *j != i && b.active).map(|(_, b)| &b.plan),
        );
        if avoid_human {
            table.reserve(&self.projection);
        }
        table.release_until(self.t);
        let a = &self.agents[i];
        plan_with_table(&self.config.map.grid, a.position.at(self.t), a.goal, &table).ok()
    }

    fn dispute(
        &mut self,
        kind: DisputeKind,
        proponent: u8,
        opponent: u8,
    ) -> Result<(DialogueRecord, Player), GameError> {
        let ctx = |id: u8| {
            if id == HUMAN_ID {
                &self.human.context
            } else {
                &self.agents.iter().find(|a| a.id == id).expect("known agent").context
            }
        };
        let motion = ArgumentSet::singleton(self.culture.default_motion());
        let seed = self.rng.next_u64();
        let result = play_dialogue(&self.culture, motion, ctx(proponent), ctx(opponent), MoveStrategy::optimal(seed))?;
        let winner = match result.winner {
            Player::Proponent => proponent,
            Player::Opponent => opponent,
        };
        let record = DialogueRecord {
            kind,
            proponent,
            opponent,
            trace: render_moves(self.culture.framework(), &result.dialogue.moves),
            moves: result.dialogue.moves.clone(),
            winner,
        };
        Ok((record, result.winner))
    }

    /// Applies the agent policy against the human's projection, resolves
    /// conflicts between agents, and refreshes hints.
    fn settle(&mut self, reroutes: &mut Vec<Reroute>, dialogues: &mut Vec<DialogueRecord>) -> Result<(), GameError> {
        let t = self.t;
        for i in 0..self.agents.len() {
            let a = &self.agents[i];
            if !a.active {
                continue;
            }
            if detect_conflict_after(&a.plan, &self.projection, Some(t)).is_none() {
                continue;
            }
            let id = a.id;
            let (record, winner) = self.dispute(DisputeKind::Human, id, HUMAN_ID)?;
            dialogues.push(record);
            if winner == Player::Opponent {
                self.agents[i].yielding = true;
                self.reroute(i, true, RerouteReason::Yield, reroutes);
            }
        }

        self.resolve_agent_conflicts(reroutes, dialogues)?;

        self.hints.clear();
        if self.config.mode == Mode::X {
            for i in 0..self.agents.len() {
                let a = &self.agents[i];
                if !a.active || detect_conflict_after(&a.plan, &self.projection, Some(t)).is_none() {
                    continue;
                }
                let id = a.id;
                let name = a.name();
                let motion = ArgumentSet::singleton(self.culture.default_motion());
                let seed = self.rng.next_u64();
                let result =
                    play_dialogue(&self.culture, motion, &a.context, &self.human.context, MoveStrategy::optimal(seed))?;
                let explanation = generate_explanation(&result, ExplanationKind::Contrastive, 2)
                    .expect("finished dialogues always explain");
                let text = render_hint(&explanation, &self.culture, Player::Opponent, &name);
                dialogues.push(DialogueRecord {
                    kind: DisputeKind::Hint,
                    proponent: id,
                    opponent: HUMAN_ID,
                    trace: render_moves(self.culture.framework(), &result.dialogue.moves),
                    moves: result.dialogue.moves.clone(),
                    winner: if result.winner == Player::Proponent { id } else { HUMAN_ID },
                });
                self.hints.push(Hint { agent: id, text });
            }
        }
        Ok(())
    }

    fn first_agent_conflict(&self) -> Option<(usize, usize)> {
        let t = self.t;
        for i in 0..self.agents.len() {
            if !self.agents[i].active {
                continue;
            }
            for j in (i + 1)..self.agents.len() {
                if self.agents[j].active
                    && detect_conflict_after(&self.agents[i].plan, &self.agents[j].plan, Some(t)).is_some()
                {
                    return Some((i, j));
                }
            }
        }
        None
    }

    fn resolve_agent_conflicts(
        &mut self,
        reroutes: &mut Vec<Reroute>,
        dialogues: &mut Vec<DialogueRecord>,
    ) -> Result<(), GameError> {
        let limit = 4 * self.agents.len();
        for _ in 0..limit {
            let Some((i, j)) = self.first_agent_conflict() else {
                return Ok(());
            };
            let (pi, pj) = (self.agents[i].id, self.agents[j].id);
            let (record, winner) = self.dispute(DisputeKind::Agents, pi, pj)?;
            dialogues.push(record);
            let (loser, keeper) = if winner == Player::Proponent { (j, i) } else { (i, j) };
            if let Some(p) = self.try_replan(loser, self.agents[loser].yielding) {
                self.set_plan(loser, p, RerouteReason::AgentConflict, false, reroutes);
            } else if let Some(p) = self.try_replan(keeper, self.agents[keeper].yielding) {
                self.set_plan(keeper, p, RerouteReason::AgentConflict, false, reroutes);
            } else {
                for k in [loser, keeper] {
                    let w = Plan::wait(self.agents[k].position.at(self.t));
                    self.set_plan(k, w, RerouteReason::AgentConflict, true, reroutes);
                }
            }
        }
        // Still tangled: freeze the agents involved until nothing conflicts.
        // Waiting agents occupy distinct cells, so this terminates.
        while let Some((i, j)) = self.first_agent_conflict() {
            for k in [i, j] {
                let w = Plan::wait(self.agents[k].position.at(self.t));
                if self.agents[k].plan != w {
                    self.set_plan(k, w, RerouteReason::AgentConflict, true, reroutes);
                }
            }
        }
        Ok(())
    }

    fn set_plan(&mut self, i: usize, plan: Plan, reason: RerouteReason, fallback: bool, out: &mut Vec<Reroute>) {
        self.agents[i].plan = plan.clone();
        out.push(Reroute { agent: self.agents[i].id, reason, fallback, plan });
    }

    pub fn snapshot(&self) -> StateSnapshot {
        let schema = self.culture.schema();
        StateSnapshot {
            culture: self.culture.name().to_string(),
            level: self.config.level,
            mode: self.config.mode,
            status: self.status,
            t: self.t,
            fuel: self.fuel,
            move_count: self.move_count,
            collision_count: self.collision_count,
            drained_intervals: self.drained_intervals,
            grid: GridView {
                width: self.config.map.grid.width,
                height: self.config.map.grid.height,
                walls: self.config.map.grid.walls.iter().copied().collect(),
            },
            human: HumanView {
                position: self.human.position,
                goal: self.human.goal,
                context: schema.context_to_json(&self.human.context),
                projection: self.projection.clone(),
            },
            agents: self
                .agents
                .iter()
                .map(|a| AgentView {
                    id: a.id,
                    active: a.active,
                    position: a.position,
                    goal: a.goal,
                    context: schema.context_to_json(&a.context),
                    plan: if a.active {
                        a.plan.from_time(self.t).unwrap_or_else(|| a.plan.clone())
                    } else {
                        Plan::new(vec![])
                    },
                })
                .collect(),
            hints: (self.config.mode == Mode::X).then(|| self.hints.clone()),
        }
    }

    fn append(&mut self, body: serde_json::Value) {
        let body = serde_json::to_string(&body).expect("log records serialize");
        let (line, chain) = chain_line(&self.chain, &body);
        self.chain = chain;
        self.log.push(line);
    }

    fn write_header(&mut self) {
        let schema = self.culture.schema();
        let body = serde_json::json!({
            "kind": "header",
            "version": REPLAY_VERSION,
            "level": self.config.level,
            "mode": self.config.mode,
            "seed": self.config.seed,
            "fuel_start": self.config.fuel_start,
            "move_cost": self.config.move_cost,
            "collision_cost": self.config.collision_cost,
            "drain_cost": self.config.drain_cost,
            "drain_interval_ms": self.config.drain_interval_ms,
            "culture": self.culture.name(),
            "map": render_map(&self.config.map),
            "contexts": {
                "human": schema.render_context(&self.human.context),
                "agents": self.agents.iter().map(|a| serde_json::json!({
                    "id": a.id,
                    "context": schema.render_context(&a.context),
                })).collect::<Vec<_>>(),
            },
        });
        self.append(body);
    }

    fn write_init(&mut self, reroutes: &[Reroute], dialogues: &[DialogueRecord]) {
        let body = serde_json::json!({
            "kind": "init",
            "seq": 0,
            "reroutes": reroutes,
            "dialogues": dialogues,
            "state": self.snapshot(),
        });
        self.append(body);
    }

    fn write_step(&mut self, action: HumanAction, now_ms: u64, events: &StepEvents, dialogues: &[DialogueRecord]) {
        let body = serde_json::json!({
            "kind": "step",
            "seq": self.move_count,
            "action": action,
            "offset_ms": now_ms,
            "events": events,
            "dialogues": dialogues,
            "state": self.snapshot(),
        });
        self.append(body);
    }

    /// The replay log: one JSON record per line, each carrying a hash chain
    /// over every line before it.
    pub fn replay_log(&self) -> String {
        let mut out = self.log.join("\n");
        out.push('\n');
        out
    }

    pub fn log_lines(&self) -> &[String] {
        &self.log
    }
}

/// Appends `"chain"` to a serialized JSON object. The chain value is the
/// SHA-256 of the previous chain value followed by the object text.
fn chain_line(prev: &str, body: &str) -> (String, String) {
    let mut h = Sha256::new();
    h.update(prev.as_bytes());
    h.update(body.as_bytes());
    let chain = hex::encode(h.finalize());
    let open = &body[..body.len() - 1];
    (format!("{open},\"chain\":\"{chain}\"}}"), chain)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: hash chain broken")]
    Chain { line: usize },
    #[error("record {seq} (line {line}) diverges from re-simulation")]
    Divergence { seq: u64, line: usize },
    #[error("re-simulation failed at record {seq}: {message}")]
    Simulation { seq: u64, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub steps: u64,
    pub t: u32,
    pub fuel: i64,
    pub collisions: u64,
    pub finished: bool,
}

/// Re-simulates a replay log and checks it line by line.
pub fn verify_replay(text: &str) -> Result<ReplaySummary, ReplayError> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    let format = |line: usize, message: String| ReplayError::Format { line, message };

    // The chain first: it pinpoints edits even in fields re-simulation ignores.
    let mut prev = String::new();
    let mut records = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let n = i + 1;
        let marker = ",\"chain\":\"";
        let pos = line.rfind(marker).ok_or_else(|| format(n, "missing chain".into()))?;
        let claimed =
            line[pos + marker.len()..].strip_suffix("\"}").ok_or_else(|| format(n, "malformed chain".into()))?;
        let body = format!("{}}}", &line[..pos]);
        let (_, chain) = chain_line(&prev, &body);
        if chain != claimed {
            return Err(ReplayError::Chain { line: n });
        }
        prev = chain;
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| format(n, e.to_string()))?;
        records.push(value);
    }

    let header = records.first().ok_or_else(|| format(1, "empty log".into()))?;
    if header["kind"] != "header" {
        return Err(format(1, "first record is not a header".into()));
    }
    if header["version"] != REPLAY_VERSION {
        return Err(format(1, format!("unsupported version {}", header["version"])));
    }
    let field = |k: &str| header.get(k).cloned().ok_or_else(|| format(1, format!("header lacks `{k}`")));
    let de = |k: &str| -> Result<serde_json::Value, ReplayError> { field(k) };
    let level: Level = serde_json::from_value(de("level")?).map_err(|e| format(1, e.to_string()))?;
    let mode: Mode = serde_json::from_value(de("mode")?).map_err(|e| format(1, e.to_string()))?;
    let int = |k: &str| -> Result<i64, ReplayError> {
        de(k)?.as_i64().ok_or_else(|| format(1, format!("`{k}` is not an integer")))
    };
    let seed = de("seed")?.as_u64().ok_or_else(|| format(1, "`seed` is not an integer".into()))?;
    let map_text = de("map")?;
    let map_text = map_text.as_str().ok_or_else(|| format(1, "`map` is not text".into()))?;
    let config = SessionConfig {
        level,
        mode,
        seed,
        map: parse_map(map_text).map_err(|e| format(1, e.to_string()))?,
        fuel_start: int("fuel_start")?,
        move_cost: int("move_cost")?,
        collision_cost: int("collision_cost")?,
        drain_cost: int("drain_cost")?,
        drain_interval_ms: int("drain_interval_ms")? as u64,
    };
    let mut session =
        GameSession::new(config).map_err(|e| ReplayError::Simulation { seq: 0, message: e.to_string() })?;
    for (i, expected) in session.log.iter().take(2).enumerate() {
        if lines.get(i) != Some(&expected.as_str()) {
            return Err(ReplayError::Divergence { seq: 0, line: i + 1 });
        }
    }
    for (i, record) in records.iter().enumerate().skip(2) {
        let n = i + 1;
        let seq = record["seq"].as_u64().unwrap_or(0);
        if record["kind"] != "step" {
            return Err(format(n, "expected a step record".into()));
        }
        let action: HumanAction =
            serde_json::from_value(record["action"].clone()).map_err(|e| format(n, e.to_string()))?;
        let offset = record["offset_ms"].as_u64().ok_or_else(|| format(n, "`offset_ms` is not an integer".into()))?;
        session.step(action, offset).map_err(|e| ReplayError::Simulation { seq, message: e.to_string() })?;
        if session.log.last().map(String::as_str) != Some(lines[i]) {
            return Err(ReplayError::Divergence { seq, line: n });
        }
    }
    Ok(ReplaySummary {
        steps: session.move_count,
        t: session.t,
        fuel: session.fuel,
        collisions: session.collision_count,
        finished: session.is_finished(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_agents_hold_right_of_way() {
        for level in Level::ALL {
            for seed in 0..5 {
                let s = GameSession::new(SessionConfig::new(level, Mode::N, seed)).unwrap();
                let holders = s.agents().iter().filter(|a| a.has_right_of_way()).count();
                assert_eq!(holders, RIGHT_OF_WAY_AGENTS);
            }
        }
    }

    #[test]
    fn layout_ignores_level() {
        let ids = |level| {
            let s = GameSession::new(SessionConfig::new(level, Mode::N, 9)).unwrap();
            s.agents().iter().filter(|a| a.has_right_of_way()).map(|a| a.id).collect::<Vec<_>>()
        };
        assert_eq!(ids(Level::Easy), ids(Level::Hard));
        assert_eq!(ids(Level::Easy), ids(Level::Medium));
    }

    #[test]
    fn wait_costs_one() {
        let mut s = GameSession::new(SessionConfig::new(Level::Easy, Mode::N, 1)).unwrap();
        let e = s.step(HumanAction::Wait, 0).unwrap();
        assert_eq!(s.fuel(), 49 - 5 * e.collisions.len() as i64);
        assert_eq!(s.fuel(), s.expected_fuel());
        assert_eq!(s.time(), 1);
    }

    #[test]
    fn illegal_actions_change_nothing() {
        let mut s = GameSession::new(SessionConfig::new(Level::Easy, Mode::N, 1)).unwrap();
        let before = s.snapshot();
        let err = s.step(HumanAction::West, 0).unwrap_err();
        assert!(matches!(err, GameError::IllegalAction { .. }));
        assert_eq!(s.snapshot(), before);
        assert_eq!(s.log_lines().len(), 2);
    }

    #[test]
    fn clock_must_not_rewind() {
        let mut s = GameSession::new(SessionConfig::new(Level::Easy, Mode::N, 1)).unwrap();
        s.step(HumanAction::Wait, 5_000).unwrap();
        assert!(matches!(s.step(HumanAction::Wait, 4_000), Err(GameError::ClockRewind { .. })));
    }

    #[test]
    fn drain_is_floored_from_the_first_move() {
        let mut s = GameSession::new(SessionConfig::new(Level::Easy, Mode::N, 1)).unwrap();
        s.step(HumanAction::Wait, 120_000).unwrap();
        assert_eq!(s.drained_intervals(), 0);
        s.step(HumanAction::Wait, 129_999).unwrap();
        assert_eq!(s.drained_intervals(), 0);
        s.step(HumanAction::Wait, 150_000).unwrap();
        assert_eq!(s.drained_intervals(), 3);
        assert_eq!(s.fuel(), s.expected_fuel());
    }

    #[test]
    fn hints_only_in_x_mode() {
        let n = GameSession::new(SessionConfig::new(Level::Easy, Mode::N, 4)).unwrap();
        assert!(n.snapshot().hints.is_none());
        assert!(n.current_hints().is_empty());
        let x = GameSession::new(SessionConfig::new(Level::Easy, Mode::X, 4)).unwrap();
        assert!(x.snapshot().hints.is_some());
    }

    #[test]
    fn replay_verifies() {
        let mut s = GameSession::new(SessionConfig::new(Level::Medium, Mode::X, 3)).unwrap();
        for (k, a) in
            [HumanAction::East, HumanAction::Wait, HumanAction::East, HumanAction::North].into_iter().enumerate()
        {
            s.step(a, k as u64 * 3_000).unwrap();
        }
        let log = s.replay_log();
        let summary = verify_replay(&log).unwrap();
        assert_eq!(summary.fuel, s.fuel());
        assert_eq!(summary.steps, 4);
        let tampered = log.replacen("\"fuel\":", "\"fuel\": ", 1);
        assert!(verify_replay(&tampered).is_err());
    }

    #[test]
    fn stepping_after_the_end_fails() {
        let mut s = GameSession::new(SessionConfig::new(Level::Easy, Mode::N, 2)).unwrap();
        let mut now = 0;
        while !s.is_finished() && s.move_count() < 200 {
            let next = s.projection().path.get(1).map(|v| v.cell()).unwrap_or(s.human().position);
            let a = HumanAction::between(s.human().position, next).unwrap();
            s.step(a, now).unwrap();
            now += 1000;
        }
        assert!(s.is_finished());
        assert!(matches!(s.step(HumanAction::Wait, now), Err(GameError::Finished)));
    }
}
