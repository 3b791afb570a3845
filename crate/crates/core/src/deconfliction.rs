//! Space-time grids, plans, conflict detection and reservation-aware
//! planning.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimensions must be positive")]
    EmptyGrid,
    #[error("maximum displacement must be at least 1")]
    ZeroDisplacement,
    #[error("({x}, {y}) is outside the {width}x{height} grid")]
    OutOfBounds { x: i32, y: i32, width: u32, height: u32 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("start {0} is blocked")]
    StartBlocked(SpaceTimeVertex),
    #[error("goal {0} is an obstacle")]
    GoalBlocked(Cell),
    #[error("no conflict-free path from {start} to {goal} by t={limit}")]
    Unreachable { start: SpaceTimeVertex, goal: Cell, limit: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn at(self, t: u32) -> SpaceTimeVertex {
        SpaceTimeVertex { x: self.x, y: self.y, t }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Cell {
        Cell { x: self.x + dx, y: self.y + dy }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpaceTimeVertex {
    pub x: i32,
    pub y: i32,
    pub t: u32,
}

impl SpaceTimeVertex {
    pub const fn new(x: i32, y: i32, t: u32) -> Self {
        SpaceTimeVertex { x, y, t }
    }

    pub fn cell(self) -> Cell {
        Cell { x: self.x, y: self.y }
    }
}

impl fmt::Display for SpaceTimeVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, t={})", self.x, self.y, self.t)
    }
}

/// A bounded grid with static walls and optional timed obstacles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: u32,
    pub height: u32,
    /// Last time step a vertex may have.
    pub horizon: u32,
    pub d_max: u32,
    /// Cells blocked at every time step.
    pub walls: BTreeSet<Cell>,
    /// Vertices blocked at one time step only.
    pub timed: BTreeSet<SpaceTimeVertex>,
}

impl GridSpec {
    pub fn new(width: u32, height: u32, horizon: u32, d_max: u32) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::EmptyGrid);
        }
        if d_max == 0 {
            return Err(GridError::ZeroDisplacement);
        }
        Ok(GridSpec { width, height, horizon, d_max, walls: BTreeSet::new(), timed: BTreeSet::new() })
    }

    pub fn with_wall(mut self, c: Cell) -> Result<Self, GridError> {
        self.check(c)?;
        self.walls.insert(c);
        Ok(self)
    }

    pub fn with_timed_obstacle(mut self, v: SpaceTimeVertex) -> Result<Self, GridError> {
        self.check(v.cell())?;
        self.timed.insert(v);
        Ok(self)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as u32) < self.width && (c.y as u32) < self.height
    }

    pub fn check(&self, c: Cell) -> Result<(), GridError> {
        if self.in_bounds(c) {
            Ok(())
        } else {
            Err(GridError::OutOfBounds { x: c.x, y: c.y, width: self.width, height: self.height })
        }
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.walls.contains(&c)
    }

    pub fn is_obstacle(&self, v: SpaceTimeVertex) -> bool {
        self.walls.contains(&v.cell()) || self.timed.contains(&v)
    }

    /// In bounds, within the horizon and not an obstacle.
    pub fn is_traversable(&self, v: SpaceTimeVertex) -> bool {
        self.in_bounds(v.cell()) && v.t <= self.horizon && !self.is_obstacle(v)
    }

    fn last_timed(&self) -> u32 {
        self.timed.iter().map(|v| v.t).max().unwrap_or(0)
    }

    fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    fn cell_of(&self, i: usize) -> Cell {
        Cell::new((i % self.width as usize) as i32, (i / self.width as usize) as i32)
    }

    fn cell_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Displacements within `d_max`, in tie-break order: north, south, west,
/// east, with waiting last.
pub fn displacements(d_max: u32) -> Vec<(i32, i32)> {
    let d = d_max as i32;
    let mut out = Vec::new();
    for dy in -d..=d {
        for dx in -d..=d {
            if dx.abs() + dy.abs() <= d {
                out.push((dx, dy));
            }
        }
    }
    out.sort_by_key(|&(dx, dy)| {
        let heading = if dy < 0 {
            0
        } else if dy > 0 {
            1
        } else if dx < 0 {
            2
        } else {
            3
        };
        (dx == 0 && dy == 0, heading, dy.abs() + dx.abs(), dy, dx)
    });
    out
}

/// Traversable vertices one step after `v`, in tie-break order.
pub fn successors(grid: &GridSpec, v: SpaceTimeVertex) -> Result<Vec<SpaceTimeVertex>, GridError> {
    grid.check(v.cell())?;
    if v.t >= grid.horizon {
        return Ok(Vec::new());
    }
    Ok(displacements(grid.d_max)
        .into_iter()
        .map(|(dx, dy)| v.cell().offset(dx, dy).at(v.t + 1))
        .filter(|n| grid.in_bounds(n.cell()) && !grid.is_obstacle(*n))
        .collect())
}

/// A timed path. Consecutive vertices are one time step apart.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan {
    pub path: Vec<SpaceTimeVertex>,
}

impl Plan {
    pub fn new(path: Vec<SpaceTimeVertex>) -> Self {
        Plan { path }
    }

    /// Stay at `v` for one step.
    pub fn wait(v: SpaceTimeVertex) -> Self {
        Plan { path: vec![v, v.cell().at(v.t + 1)] }
    }

    pub fn start(&self) -> Option<SpaceTimeVertex> {
        self.path.first().copied()
    }

    pub fn end(&self) -> Option<SpaceTimeVertex> {
        self.path.last().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    /// Time steps covered, i.e. `len() - 1`.
    pub fn duration(&self) -> u32 {
        self.path.len().saturating_sub(1) as u32
    }

    pub fn at(&self, t: u32) -> Option<Cell> {
        let t0 = self.path.first()?.t;
        let i = t.checked_sub(t0)? as usize;
        self.path.get(i).map(|v| v.cell())
    }

    /// Steps that change cell.
    pub fn moves(&self) -> usize {
        self.path.windows(2).filter(|w| w[0].cell() != w[1].cell()).count()
    }

    /// The plan from time `t` onwards, if it reaches that far.
    pub fn from_time(&self, t: u32) -> Option<Plan> {
        let t0 = self.path.first()?.t;
        let i = t.checked_sub(t0)? as usize;
        (i < self.path.len()).then(|| Plan { path: self.path[i..].to_vec() })
    }
}

/// Checks step legality: times consecutive, displacement within `d_max`,
/// every vertex traversable.
pub fn validate_plan(grid: &GridSpec, plan: &Plan) -> Result<(), String> {
    let Some(first) = plan.start() else {
        return Err("plan is empty".into());
    };
    if !grid.is_traversable(first) {
        return Err(format!("{first} is not traversable"));
    }
    for w in plan.path.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.t != a.t + 1 {
            return Err(format!("{a} is followed by {b}"));
        }
        if a.cell().manhattan(b.cell()) > grid.d_max {
            return Err(format!("{a} to {b} exceeds the maximum displacement {}", grid.d_max));
        }
        if !grid.is_traversable(b) {
            return Err(format!("{b} is not traversable"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictKind {
    Vertex,
    Swap,
}

/// A conflict between two plans. `time` is when the parties meet: the shared
/// vertex's step, or the arrival step of a swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub time: u32,
    /// The shared vertex, or for a swap the first plan's vertex before the swap.
    pub at: SpaceTimeVertex,
    /// For a swap, the first plan's vertex after the swap.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub swap_to: Option<SpaceTimeVertex>,
}

/// The earliest conflict between `a` and `b`; vertex conflicts come before
/// swaps at the same time.
pub fn detect_conflict(a: &Plan, b: &Plan) -> Option<Conflict> {
    detect_conflict_after(a, b, None)
}

/// Like [`detect_conflict`], ignoring conflicts at or before `after`.
pub fn detect_conflict_after(a: &Plan, b: &Plan, after: Option<u32>) -> Option<Conflict> {
    let (a0, a1) = (a.start()?.t, a.end()?.t);
    let (b0, b1) = (b.start()?.t, b.end()?.t);
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    let from = match after {
        Some(t) => lo.max(t + 1),
        None => lo,
    };
    for t in from..=hi {
        let (pa, pb) = (a.at(t)?, b.at(t)?);
        if pa == pb {
            return Some(Conflict { kind: ConflictKind::Vertex, time: t, at: pa.at(t), swap_to: None });
        }
        if t > lo {
            let (qa, qb) = (a.at(t - 1)?, b.at(t - 1)?);
            if qa == pb && qb == pa {
                return Some(Conflict { kind: ConflictKind::Swap, time: t, at: qa.at(t - 1), swap_to: Some(pa.at(t)) });
            }
        }
    }
    None
}

/// Committed plans a new plan must avoid.
#[derive(Debug, Clone, Default)]
pub struct ReservationTable {
    vertices: HashSet<SpaceTimeVertex>,
    /// (from, to, t): someone moves from `from` at `t` to `to` at `t + 1`.
    edges: HashSet<(Cell, Cell, u32)>,
    last: u32,
}

impl ReservationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_plans<'a, I: IntoIterator<Item = &'a Plan>>(plans: I) -> Self {
        let mut table = Self::new();
        for p in plans {
            table.reserve(p);
        }
        table
    }

    pub fn reserve(&mut self, plan: &Plan) {
        for v in &plan.path {
            self.vertices.insert(*v);
            self.last = self.last.max(v.t);
        }
        for w in plan.path.windows(2) {
            if w[0].cell() != w[1].cell() {
                self.edges.insert((w[0].cell(), w[1].cell(), w[0].t));
            }
        }
    }

    /// Forgets reserved vertices at or before `t`; edges stay.
    pub fn release_until(&mut self, t: u32) {
        self.vertices.retain(|v| v.t > t);
    }

    pub fn is_reserved(&self, v: SpaceTimeVertex) -> bool {
        self.vertices.contains(&v)
    }

    /// Whether moving from `from` at `t` to `to` at `t + 1` is blocked.
    pub fn blocks(&self, from: Cell, to: Cell, t: u32) -> bool {
        self.vertices.contains(&to.at(t + 1)) || (from != to && self.edges.contains(&(to, from, t)))
    }

    pub fn last_time(&self) -> u32 {
        self.last
    }
}

/// Shortest conflict-free plan from `start` to `goal`: fewest steps, then
/// fewest moves, then earliest deviation in north/south/west/east/wait order.
pub fn plan_path(
    grid: &GridSpec,
    start: SpaceTimeVertex,
    goal: Cell,
    reservations: &[Plan],
) -> Result<Plan, PlanError> {
    plan_with_table(grid, start, goal, &ReservationTable::from_plans(reservations))
}

pub fn plan_with_table(
    grid: &GridSpec,
    start: SpaceTimeVertex,
    goal: Cell,
    table: &ReservationTable,
) -> Result<Plan, PlanError> {
    grid.check(start.cell())?;
    grid.check(goal)?;
    if grid.is_obstacle(start) || table.is_reserved(start) || start.t > grid.horizon {
        return Err(PlanError::StartBlocked(start));
    }
    if grid.is_wall(goal) {
        return Err(PlanError::GoalBlocked(goal));
    }
    if start.cell() == goal {
        return Ok(Plan::new(vec![start]));
    }

    // Once every reservation and timed obstacle has passed, any reachable
    // cell is reachable within one sweep of the grid.
    let settle = start.t.max(table.last_time()).max(grid.last_timed());
    let limit = grid.horizon.min(settle.saturating_add(grid.cell_count() as u32));
    let steps = displacements(grid.d_max);
    let n = grid.cell_count();

    let mut layers: Vec<Vec<bool>> = Vec::new();
    let mut first = vec![false; n];
    first[grid.index(start.cell())] = true;
    layers.push(first);
    let goal_idx = grid.index(goal);
    let mut t = start.t;
    loop {
        if layers.last().expect("non-empty")[goal_idx] {
            break;
        }
        if t >= limit {
            return Err(PlanError::Unreachable { start, goal, limit });
        }
        let cur = layers.last().expect("non-empty");
        let mut next = vec![false; n];
        let mut any = false;
        for (i, &on) in cur.iter().enumerate() {
            if !on {
                continue;
            }
            let c = grid.cell_of(i);
            for &(dx, dy) in &steps {
                let d = c.offset(dx, dy);
                if grid.in_bounds(d) && !grid.is_obstacle(d.at(t + 1)) && !table.blocks(c, d, t) {
                    next[grid.index(d)] = true;
                    any = true;
                }
            }
        }
        if !any {
            return Err(PlanError::Unreachable { start, goal, limit: t });
        }
        layers.push(next);
        t += 1;
    }

    // cost[k][i]: fewest moves from cell i at step start.t + k to the goal
    // at the arrival step.
    let arrival = layers.len() - 1;
    let mut cost: Vec<Vec<u32>> = vec![vec![u32::MAX; n]; layers.len()];
    cost[arrival][goal_idx] = 0;
    for k in (0..arrival).rev() {
        let tk = start.t + k as u32;
        for i in 0..n {
            if !layers[k][i] {
                continue;
            }
            let c = grid.cell_of(i);
            let mut best = u32::MAX;
            for &(dx, dy) in &steps {
                let d = c.offset(dx, dy);
                if !grid.in_bounds(d) || grid.is_obstacle(d.at(tk + 1)) || table.blocks(c, d, tk) {
                    continue;
                }
                let rest = cost[k + 1][grid.index(d)];
                if rest != u32::MAX {
                    best = best.min(rest + u32::from(d != c));
                }
            }
            cost[k][i] = best;
        }
    }

    let mut path = vec![start];
    let mut c = start.cell();
    for k in 0..arrival {
        let tk = start.t + k as u32;
        let mut chosen: Option<(u32, Cell)> = None;
        for &(dx, dy) in &steps {
            let d = c.offset(dx, dy);
            if !grid.in_bounds(d) || grid.is_obstacle(d.at(tk + 1)) || table.blocks(c, d, tk) {
                continue;
            }
            let rest = cost[k + 1][grid.index(d)];
            if rest == u32::MAX {
                continue;
            }
            let total = rest + u32::from(d != c);
            if chosen.is_none_or(|(b, _)| total < b) {
                chosen = Some((total, d));
            }
        }
        let (_, d) = chosen.expect("cost table guarantees a successor");
        c = d;
        path.push(c.at(tk + 1));
    }
    Ok(Plan::new(path))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("map line {line}: {message}")]
pub struct MapError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: u8,
    pub start: Cell,
    pub goal: Cell,
}

/// A parsed map: grid, human start and goal, agent starts and goals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapSpec {
    pub grid: GridSpec,
    pub human_start: Cell,
    pub human_goal: Cell,
    pub agents: Vec<AgentSpec>,
}

pub const DEFAULT_HORIZON: u32 = 512;

pub const DEFAULT_MAP: &str = include_str!("../data/barracks.map");

impl MapSpec {
    pub fn default_map() -> MapSpec {
        parse_map(DEFAULT_MAP).expect("built-in map parses")
    }
}

/// Parses the text map format.
///
/// Header lines contain a colon: `agent <n>: goal <letter>`,
/// `human: goal <letter>` and optionally `horizon: <steps>`. Every other
/// non-blank line is a grid row: `.` free, `#` wall, `1`-`8` agent start,
/// `H` human start, lowercase letters goal markers.
pub fn parse_map(text: &str) -> Result<MapSpec, MapError> {
    let err = |line: usize, message: String| MapError { line, message };
    let mut agent_goals: BTreeMap<u8, (char, usize)> = BTreeMap::new();
    let mut human_goal: Option<(char, usize)> = None;
    let mut horizon = DEFAULT_HORIZON;
    let mut rows: Vec<(usize, &str)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some((key, value)) = line.split_once(':') {
            let key = key.trim();
            let value = value.trim();
            if key == "horizon" {
                horizon = value.parse().map_err(|_| err(lineno, format!("bad horizon `{value}`")))?;
                continue;
            }
            let letter = value
                .strip_prefix("goal")
                .map(str::trim)
                .and_then(|v| {
                    let mut cs = v.chars();
                    match (cs.next(), cs.next()) {
                        (Some(c), None) if c.is_ascii_lowercase() => Some(c),
                        _ => None,
                    }
                })
                .ok_or_else(|| err(lineno, format!("expected `goal <letter>`, got `{value}`")))?;
            if key == "human" {
                if human_goal.replace((letter, lineno)).is_some() {
                    return Err(err(lineno, "human goal declared twice".into()));
                }
            } else if let Some(n) = key.strip_prefix("agent") {
                let id: u8 = n
                    .trim()
                    .parse()
                    .ok()
                    .filter(|id| (1..=8).contains(id))
                    .ok_or_else(|| err(lineno, format!("bad agent id `{}`", n.trim())))?;
                if agent_goals.insert(id, (letter, lineno)).is_some() {
                    return Err(err(lineno, format!("agent {id} goal declared twice")));
                }
            } else {
                return Err(err(lineno, format!("unknown header `{key}`")));
            }
        } else {
            rows.push((lineno, line));
        }
    }

    let Some(&(first_line, first_row)) = rows.first() else {
        return Err(err(1, "map has no grid rows".into()));
    };
    let width = first_row.chars().count();
    let height = rows.len();
    let mut grid =
        GridSpec::new(width as u32, height as u32, horizon, 1).map_err(|e| err(first_line, e.to_string()))?;
    let mut human: Option<Cell> = None;
    let mut starts: BTreeMap<u8, Cell> = BTreeMap::new();
    let mut markers: BTreeMap<char, Cell> = BTreeMap::new();
    for (y, (lineno, row)) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(err(*lineno, format!("row has {} cells, expected {width}", row.chars().count())));
        }
        for (x, ch) in row.chars().enumerate() {
            let c = Cell::new(x as i32, y as i32);
            match ch {
                '.' => {}
                '#' => {
                    grid.walls.insert(c);
                }
                'H' => {
                    if human.replace(c).is_some() {
                        return Err(err(*lineno, "second human start".into()));
                    }
                }
                '1'..='8' => {
                    let id = ch as u8 - b'0';
                    if starts.insert(id, c).is_some() {
                        return Err(err(*lineno, format!("second start for agent {id}")));
                    }
                }
                'a'..='z' => {
                    if markers.insert(ch, c).is_some() {
                        return Err(err(*lineno, format!("goal marker `{ch}` appears twice")));
                    }
                }
                other => return Err(err(*lineno, format!("unexpected map character `{other}`"))),
            }
        }
    }

    let last_line = rows.last().map(|r| r.0).unwrap_or(first_line);
    let human_start = human.ok_or_else(|| err(last_line, "map has no human start `H`".into()))?;
    let (hl, hline) = human_goal.ok_or_else(|| err(1, "missing `human: goal <letter>` header".into()))?;
    let human_goal = *markers.get(&hl).ok_or_else(|| err(hline, format!("goal marker `{hl}` is not on the map")))?;
    let mut agents = Vec::new();
    for (&id, &start) in &starts {
        let &(letter, line) =
            agent_goals.get(&id).ok_or_else(|| err(last_line, format!("agent {id} has no goal header")))?;
        let goal =
            *markers.get(&letter).ok_or_else(|| err(line, format!("goal marker `{letter}` is not on the map")))?;
        agents.push(AgentSpec { id, start, goal });
    }
    if let Some((&id, &(_, line))) = agent_goals.iter().find(|(id, _)| !starts.contains_key(id)) {
        return Err(err(line, format!("agent {id} has a goal but no start")));
    }
    if agents.is_empty() {
        return Err(err(last_line, "map has no agents".into()));
    }
    Ok(MapSpec { grid, human_start, human_goal, agents })
}

/// Renders a map back to text. Goal markers are assigned `a`, `b`, ... in
/// agent order, with the human's goal last.
pub fn render_map(map: &MapSpec) -> String {
    let mut cells: BTreeMap<Cell, char> = BTreeMap::new();
    let mut header = String::new();
    let letters: Vec<char> = ('a'..='z').collect();
    for (i, a) in map.agents.iter().enumerate() {
        cells.insert(a.start, (b'0' + a.id) as char);
        cells.insert(a.goal, letters[i]);
        header.push_str(&format!("agent {}: goal {}\n", a.id, letters[i]));
    }
    let hl = letters[map.agents.len()];
    header.push_str(&format!("human: goal {hl}\n"));
    header.push_str(&format!("horizon: {}\n", map.grid.horizon));
    cells.insert(map.human_start, 'H');
    cells.insert(map.human_goal, hl);
    let mut out = header;
    out.push('\n');
    for y in 0..map.grid.height as i32 {
        for x in 0..map.grid.width as i32 {
            let c = Cell::new(x, y);
            let ch = if map.grid.is_wall(c) { '#' } else { cells.get(&c).copied().unwrap_or('.') };
            out.push(ch);
        }
        out.push('\n');
    }
    out
}
