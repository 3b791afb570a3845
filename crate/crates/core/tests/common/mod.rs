//! Brute-force reference implementations shared by the integration tests.
//! Everything here is written from the definitions alone and never calls
//! the library's own semantics.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::HashSet;

use deconflict::argumentation::{ArgumentId, ArgumentSet, ArgumentationFramework};
use deconflict::culture::{AgentContext, Culture};
use deconflict::deconfliction::{Cell, ConflictKind, GridSpec, Plan, SpaceTimeVertex};
use deconflict::dialogue::{DialogueMode, DialogueResult, Move, Player};
use rand::Rng;

/// Random framework on `n` arguments; each ordered pair (self-attacks
/// included) is an attack with probability `density`.
pub fn random_af<R: Rng>(rng: &mut R, n: usize, density: f64) -> ArgumentationFramework {
    let mut attacks = Vec::new();
    for a in 0..n as u32 {
        for b in 0..n as u32 {
            if rng.random_bool(density) {
                attacks.push((ArgumentId(a), ArgumentId(b)));
            }
        }
    }
    ArgumentationFramework::unlabelled(n, attacks).expect("valid framework")
}

pub fn set_of(mask: u64) -> ArgumentSet {
    ArgumentSet::from_bits(mask)
}

/// Adjacency-matrix view of a framework.
pub struct BruteAf {
    pub n: usize,
    pub att: Vec<Vec<bool>>,
}

impl BruteAf {
    pub fn new(af: &ArgumentationFramework) -> Self {
        let n = af.len();
        let mut att = vec![vec![false; n]; n];
        for (a, b) in af.attack_pairs() {
            att[a.index()][b.index()] = true;
        }
        BruteAf { n, att }
    }

    fn members(&self, mask: u64) -> Vec<usize> {
        (0..self.n).filter(|i| mask >> i & 1 == 1).collect()
    }

    pub fn attacks_set(&self, s: u64, t: u64) -> bool {
        let (s, t) = (self.members(s), self.members(t));
        s.iter().any(|&a| t.iter().any(|&b| self.att[a][b]))
    }

    pub fn conflict_free(&self, s: u64) -> bool {
        !self.attacks_set(s, s)
    }

    pub fn acceptable(&self, a: usize, s: u64) -> bool {
        let defenders = self.members(s);
        (0..self.n).filter(|&b| self.att[b][a]).all(|b| defenders.iter().any(|&c| self.att[c][b]))
    }

    pub fn admissible(&self, s: u64) -> bool {
        self.conflict_free(s) && self.members(s).into_iter().all(|a| self.acceptable(a, s))
    }

    /// r-defence matrix: reflexive, x defends y when x attacks some z that
    /// attacks y, closed transitively (Warshall).
    pub fn r_defence(&self) -> Vec<Vec<bool>> {
        let n = self.n;
        let mut r = vec![vec![false; n]; n];
        for x in 0..n {
            r[x][x] = true;
            for y in 0..n {
                if (0..n).any(|z| self.att[x][z] && self.att[z][y]) {
                    r[x][y] = true;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if r[i][k] && r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
        r
    }

    /// Every admissible S with a ∈ S, |S| ≤ cap and each member r-defending
    /// a, sorted by (size, mask).
    pub fn explanations(&self, a: usize, cap: usize) -> Vec<u64> {
        let r = self.r_defence();
        let mut out: Vec<u64> = (0u64..1 << self.n)
            .filter(|&s| s >> a & 1 == 1)
            .filter(|&s| (s.count_ones() as usize) <= cap)
            .filter(|&s| self.members(s).into_iter().all(|b| r[b][a]))
            .filter(|&s| self.admissible(s))
            .collect();
        out.sort_by_key(|&s| (s.count_ones(), s));
        out
    }
}

/// Labels as (minimal, maximal, compact, verbose) by pairwise comparison.
pub fn brute_labels(family: &[u64]) -> Vec<(bool, bool, bool, bool)> {
    family
        .iter()
        .map(|&s| {
            let size = s.count_ones();
            let strict_sub = |x: u64, y: u64| x != y && x & y == x;
            (
                family.iter().all(|&o| size <= o.count_ones()),
                family.iter().all(|&o| size >= o.count_ones()),
                !family.iter().any(|&o| strict_sub(o, s)),
                !family.iter().any(|&o| strict_sub(s, o)),
            )
        })
        .collect()
}

/// Arguments attacked by some played position.
fn attacked_so_far(b: &BruteAf, moves: &[Move]) -> u64 {
    let mut out = 0u64;
    for m in moves {
        for x in 0..b.n {
            if m.position.bits() >> x & 1 == 1 {
                for y in 0..b.n {
                    if b.att[x][y] {
                        out |= 1 << y;
                    }
                }
            }
        }
    }
    out
}

/// Whether `x` may be played by `player` after `moves`, checking each rule
/// separately.
pub fn position_is_legal(
    b: &BruteAf,
    mode: DialogueMode,
    moves: &[Move],
    player: Player,
    x: u64,
    max_size: usize,
) -> Result<(), String> {
    let Some(last) = moves.last() else {
        return Err("no moves yet".into());
    };
    if x == 0 {
        return Err("empty position".into());
    }
    if last.player == player {
        return Err("players do not alternate".into());
    }
    match mode {
        DialogueMode::SingleArgument if x.count_ones() != 1 => return Err("not a singleton".into()),
        DialogueMode::MultipleArgument if x.count_ones() as usize > max_size => return Err("too large".into()),
        _ => {}
    }
    if !b.conflict_free(x) {
        return Err("self-defeating".into());
    }
    if !b.attacks_set(x, last.position.bits()) {
        return Err("does not attack the previous position".into());
    }
    if moves.iter().any(|m| m.player == player && m.position.bits() == x) {
        return Err("repeats an earlier move".into());
    }
    if x & attacked_so_far(b, moves) != 0 {
        return Err("useless: already attacked by a played position".into());
    }
    Ok(())
}

/// All legal next positions by full subset enumeration, sorted by
/// (size, mask).
pub fn brute_legal_positions(b: &BruteAf, mode: DialogueMode, moves: &[Move], max_size: usize) -> Vec<u64> {
    let player = moves.last().map(|m| m.player).unwrap_or(Player::Opponent);
    let mover = match player {
        Player::Proponent => Player::Opponent,
        Player::Opponent => Player::Proponent,
    };
    let mut out: Vec<u64> =
        (1u64..1 << b.n).filter(|&x| position_is_legal(b, mode, moves, mover, x, max_size).is_ok()).collect();
    out.sort_by_key(|&x| (x.count_ones(), x));
    out
}

/// Whether every argument of `x` verifies for `mover` against `other`.
pub fn verified(culture: &Culture, x: u64, mover: &AgentContext, other: &AgentContext) -> bool {
    (0..culture.framework().len())
        .filter(|i| x >> i & 1 == 1)
        .all(|i| culture.eval_verifier(ArgumentId(i as u32), mover, other).expect("valid contexts"))
}

fn ctx_of<'a>(p: Player, pro: &'a AgentContext, opp: &'a AgentContext) -> (&'a AgentContext, &'a AgentContext) {
    match p {
        Player::Proponent => (pro, opp),
        Player::Opponent => (opp, pro),
    }
}

/// Checks a finished dialogue move by move against the dialogue rules and
/// argument verification, then confirms the loser had no way to continue.
pub fn check_dialogue(
    culture: &Culture,
    result: &DialogueResult,
    pro: &AgentContext,
    opp: &AgentContext,
    max_size: usize,
) -> Result<(), String> {
    let b = BruteAf::new(culture.framework());
    let d = &result.dialogue;
    let Some(first) = d.moves.first() else {
        return Err("empty dialogue".into());
    };
    if first.player != Player::Proponent {
        return Err("the opponent opened".into());
    }
    let props: u64 = (0..b.n).filter(|&i| culture.is_proposition(ArgumentId(i as u32))).fold(0, |acc, i| acc | 1 << i);
    if first.position.bits() & props == 0 {
        return Err("the motion has no proposition".into());
    }
    if !b.conflict_free(first.position.bits()) {
        return Err("the motion attacks itself".into());
    }
    if !verified(culture, first.position.bits(), pro, opp) {
        return Err("the motion is not verified".into());
    }
    for i in 1..d.moves.len() {
        let m = d.moves[i];
        position_is_legal(&b, d.mode, &d.moves[..i], m.player, m.position.bits(), max_size)
            .map_err(|e| format!("move {i}: {e}"))?;
        let (mover, other) = ctx_of(m.player, pro, opp);
        if !verified(culture, m.position.bits(), mover, other) {
            return Err(format!("move {i}: not verified"));
        }
    }
    let last = d.moves.last().expect("non-empty");
    if result.winner != last.player {
        return Err("winner is not the last mover".into());
    }
    let loser = match last.player {
        Player::Proponent => Player::Opponent,
        Player::Opponent => Player::Proponent,
    };
    let (mover, other) = ctx_of(loser, pro, opp);
    let open: Vec<u64> = brute_legal_positions(&b, d.mode, &d.moves, max_size)
        .into_iter()
        .filter(|&x| verified(culture, x, mover, other))
        .collect();
    if !open.is_empty() {
        return Err(format!("the loser could still play {open:?}"));
    }
    Ok(())
}

/// Optimal-play winner by plain minimax over brute-force verified moves.
pub fn brute_winner(
    culture: &Culture,
    mode: DialogueMode,
    motion: u64,
    pro: &AgentContext,
    opp: &AgentContext,
    max_size: usize,
) -> Player {
    fn mover_wins(
        culture: &Culture,
        b: &BruteAf,
        mode: DialogueMode,
        moves: &mut Vec<Move>,
        pro: &AgentContext,
        opp: &AgentContext,
        max_size: usize,
    ) -> bool {
        let mover = match moves.last().expect("opened").player {
            Player::Proponent => Player::Opponent,
            Player::Opponent => Player::Proponent,
        };
        let (me, them) = ctx_of(mover, pro, opp);
        for x in brute_legal_positions(b, mode, moves, max_size) {
            if !verified(culture, x, me, them) {
                continue;
            }
            moves.push(Move::new(mover, set_of(x)));
            let reply = mover_wins(culture, b, mode, moves, pro, opp, max_size);
            moves.pop();
            if !reply {
                return true;
            }
        }
        false
    }
    let b = BruteAf::new(culture.framework());
    let mut moves = vec![Move::new(Player::Proponent, set_of(motion))];
    if mover_wins(culture, &b, mode, &mut moves, pro, opp, max_size) {
        Player::Opponent
    } else {
        Player::Proponent
    }
}

/// Definitional conflict scan: every shared vertex and every position
/// exchange between consecutive steps, earliest first, vertex before swap.
/// Returns (kind, time, cell at the conflict for `a`).
pub fn brute_conflict(a: &Plan, b: &Plan) -> Option<(ConflictKind, u32, Cell)> {
    let mut found: Vec<(u32, u8, ConflictKind, Cell)> = Vec::new();
    for va in &a.path {
        for vb in &b.path {
            if va == vb {
                found.push((va.t, 0, ConflictKind::Vertex, va.cell()));
            }
        }
    }
    for ea in a.path.windows(2) {
        for eb in b.path.windows(2) {
            let same_step = ea[0].t == eb[0].t;
            let exchange = ea[0].cell() == eb[1].cell() && ea[1].cell() == eb[0].cell();
            if same_step && exchange && ea[0].cell() != ea[1].cell() {
                found.push((ea[1].t, 1, ConflictKind::Swap, ea[0].cell()));
            }
        }
    }
    found.into_iter().min_by_key(|f| (f.0, f.1)).map(|(t, _, k, c)| (k, t, c))
}

/// Earliest conflict strictly after `after`.
pub fn brute_conflict_after(a: &Plan, b: &Plan, after: u32) -> Option<(ConflictKind, u32, Cell)> {
    let tail = |p: &Plan| Plan::new(p.path.iter().copied().filter(|v| v.t >= after).collect());
    // Swaps arriving at after+1 start at `after`, so keep that step and drop
    // vertex hits at exactly `after`.
    let (ta, tb) = (tail(a), tail(b));
    let mut found: Vec<(u32, u8, ConflictKind, Cell)> = Vec::new();
    for va in &ta.path {
        for vb in &tb.path {
            if va == vb && va.t > after {
                found.push((va.t, 0, ConflictKind::Vertex, va.cell()));
            }
        }
    }
    for ea in ta.path.windows(2) {
        for eb in tb.path.windows(2) {
            if ea[0].t == eb[0].t
                && ea[0].cell() != ea[1].cell()
                && ea[0].cell() == eb[1].cell()
                && ea[1].cell() == eb[0].cell()
            {
                found.push((ea[1].t, 1, ConflictKind::Swap, ea[0].cell()));
            }
        }
    }
    found.into_iter().min_by_key(|f| (f.0, f.1)).map(|(t, _, k, c)| (k, t, c))
}

/// Direction order used for tie-breaks with d_max = 1.
pub const STEP_ORDER: [(i32, i32); 5] = [(0, -1), (0, 1), (-1, 0), (1, 0), (0, 0)];

/// Result of the exhaustive space-time search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OraclePlan {
    pub arrival: u32,
    pub moves: usize,
    /// The preferred path under the N, S, W, E, wait order (d_max = 1).
    pub path: Vec<SpaceTimeVertex>,
}

struct Blocks {
    vertices: HashSet<SpaceTimeVertex>,
    /// (from, to, t) moves made by reservations.
    edges: HashSet<(Cell, Cell, u32)>,
}

impl Blocks {
    fn new(reservations: &[Plan]) -> Self {
        let mut vertices = HashSet::new();
        let mut edges = HashSet::new();
        for p in reservations {
            vertices.extend(p.path.iter().copied());
            for w in p.path.windows(2) {
                edges.insert((w[0].cell(), w[1].cell(), w[0].t));
            }
        }
        Blocks { vertices, edges }
    }

    fn allows(&self, grid: &GridSpec, from: Cell, to: Cell, t: u32) -> bool {
        let v = to.at(t + 1);
        let free = grid.in_bounds(to)
            && !grid.walls.contains(&to)
            && !grid.timed.contains(&v)
            && v.t <= grid.horizon
            && from.x.abs_diff(to.x) + from.y.abs_diff(to.y) <= grid.d_max;
        free && !self.vertices.contains(&v) && (from == to || !self.edges.contains(&(to, from, t)))
    }
}

fn all_cells(grid: &GridSpec) -> Vec<Cell> {
    let mut out = Vec::new();
    for y in 0..grid.height as i32 {
        for x in 0..grid.width as i32 {
            out.push(Cell::new(x, y));
        }
    }
    out
}

fn neighbours(grid: &GridSpec, c: Cell) -> Vec<Cell> {
    let d = grid.d_max as i32;
    let mut out = Vec::new();
    for dy in -d..=d {
        for dx in -d..=d {
            if dx.abs() + dy.abs() <= d {
                out.push(Cell::new(c.x + dx, c.y + dy));
            }
        }
    }
    out
}

/// Exhaustive breadth-first search over the space-time graph up to the
/// horizon. `None` when the start is blocked or the goal never reached.
pub fn brute_plan(grid: &GridSpec, start: SpaceTimeVertex, goal: Cell, reservations: &[Plan]) -> Option<OraclePlan> {
    let blocks = Blocks::new(reservations);
    let s = start.cell();
    if grid.walls.contains(&s) || grid.timed.contains(&start) || blocks.vertices.contains(&start) {
        return None;
    }
    if grid.walls.contains(&goal) {
        return None;
    }
    // Layered reachability.
    let mut layers: Vec<HashSet<Cell>> = vec![HashSet::from([s])];
    let mut t = start.t;
    while !layers.last().expect("seeded").contains(&goal) {
        if t >= grid.horizon {
            return None;
        }
        let mut next = HashSet::new();
        for &c in layers.last().expect("seeded") {
            for n in neighbours(grid, c) {
                if blocks.allows(grid, c, n, t) {
                    next.insert(n);
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        layers.push(next);
        t += 1;
    }
    let arrival = t;
    let steps = layers.len() - 1;

    // Fewest moves from each layer vertex to the goal at `arrival`.
    let cells = all_cells(grid);
    let inf = usize::MAX;
    let mut cost: Vec<std::collections::HashMap<Cell, usize>> = vec![Default::default(); steps + 1];
    cost[steps].insert(goal, 0);
    for k in (0..steps).rev() {
        let tk = start.t + k as u32;
        for &c in &cells {
            if !layers[k].contains(&c) {
                continue;
            }
            let best = neighbours(grid, c)
                .into_iter()
                .filter(|&n| blocks.allows(grid, c, n, tk))
                .filter_map(|n| cost[k + 1].get(&n).map(|m| m + usize::from(n != c)))
                .min()
                .unwrap_or(inf);
            if best != inf {
                cost[k].insert(c, best);
            }
        }
    }
    let moves = *cost[0].get(&s)?;

    let mut path = vec![start];
    if grid.d_max == 1 {
        let mut here = s;
        for k in 0..steps {
            let tk = start.t + k as u32;
            let remaining = cost[k][&here];
            let next = STEP_ORDER
                .iter()
                .map(|&(dx, dy)| Cell::new(here.x + dx, here.y + dy))
                .find(|&n| {
                    blocks.allows(grid, here, n, tk)
                        && cost[k + 1].get(&n).is_some_and(|m| m + usize::from(n != here) == remaining)
                })
                .expect("cost table is consistent");
            path.push(next.at(tk + 1));
            here = next;
        }
    }
    Some(OraclePlan { arrival, moves, path })
}

/// Independent step-legality validator.
pub fn plan_is_valid(grid: &GridSpec, plan: &Plan) -> bool {
    plan.path
        .windows(2)
        .all(|w| w[1].t == w[0].t + 1 && w[0].x.abs_diff(w[1].x) + w[0].y.abs_diff(w[1].y) <= grid.d_max)
        && plan.path.iter().all(|v| {
            v.x >= 0
                && v.y >= 0
                && (v.x as u32) < grid.width
                && (v.y as u32) < grid.height
                && v.t <= grid.horizon
                && !grid.walls.contains(&v.cell())
                && !grid.timed.contains(v)
        })
}

/// A random grid with walls, timed obstacles and reservation plans made of
/// random walks. Returns the grid, start, goal and reservations.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    width: u32,
    height: u32,
    horizon: u32,
) -> (GridSpec, SpaceTimeVertex, Cell, Vec<Plan>) {
    let mut grid = GridSpec::new(width, height, horizon, 1).expect("valid grid");
    let wall_count = rng.random_range(0..=(width * height / 4));
    for _ in 0..wall_count {
        let c = Cell::new(rng.random_range(0..width as i32), rng.random_range(0..height as i32));
        grid = grid.with_wall(c).expect("in bounds");
    }
    for _ in 0..rng.random_range(0..4) {
        let v = SpaceTimeVertex::new(
            rng.random_range(0..width as i32),
            rng.random_range(0..height as i32),
            rng.random_range(1..8),
        );
        grid = grid.with_timed_obstacle(v).expect("in bounds");
    }
    let free: Vec<Cell> = all_cells(&grid).into_iter().filter(|c| !grid.walls.contains(c)).collect();
    let pick = |rng: &mut R| free[rng.random_range(0..free.len())];
    let start = pick(rng).at(rng.random_range(0..3));
    let goal = pick(rng);
    let mut reservations = Vec::new();
    for _ in 0..rng.random_range(0..4) {
        let mut c = pick(rng);
        let mut t = rng.random_range(0..4);
        let mut path = vec![c.at(t)];
        for _ in 0..rng.random_range(0..12) {
            let (dx, dy) = STEP_ORDER[rng.random_range(0..5)];
            let n = Cell::new(c.x + dx, c.y + dy);
            if grid.in_bounds(n) && !grid.walls.contains(&n) {
                c = n;
            }
            t += 1;
            path.push(c.at(t));
        }
        reservations.push(Plan::new(path));
    }
    (grid, start, goal, reservations)
}

/// A random plan on a `size`×`size` grid: a random walk starting at a random
/// time, with some teleport-free waits.
pub fn random_walk<R: Rng>(rng: &mut R, size: i32, max_len: usize) -> Plan {
    let mut c = Cell::new(rng.random_range(0..size), rng.random_range(0..size));
    let mut t = rng.random_range(0..4);
    let mut path = vec![c.at(t)];
    for _ in 0..rng.random_range(0..max_len) {
        let (dx, dy) = STEP_ORDER[rng.random_range(0..5)];
        let n = Cell::new(c.x + dx, c.y + dy);
        if (0..size).contains(&n.x) && (0..size).contains(&n.y) {
            c = n;
        }
        t += 1;
        path.push(c.at(t));
    }
    Plan::new(path)
}

/// Culture source with random attacks among `rules` rules and one
/// proposition, over two small integer properties.
pub fn random_culture_source<R: Rng>(rng: &mut R, rules: usize) -> String {
    let mut out =
        String::from("culture \"random\"\nproperty p : int 0..2\nproperty q : bool\nproposition mu \"right of way\"\n");
    let verifiers = [
        "self.p > other.p",
        "self.p >= other.p",
        "self.q = true",
        "self.q = true and other.q = false",
        "self.p < other.p or self.q != other.q",
        "not self.p = 1",
        "true",
    ];
    for i in 0..rules {
        let v = verifiers[rng.random_range(0..verifiers.len())];
        out.push_str(&format!("rule r{i} \"rule {i}\" when {v}\n"));
    }
    let names: Vec<String> = std::iter::once("mu".to_string()).chain((0..rules).map(|i| format!("r{i}"))).collect();
    // Make sure the proposition is challenged at least once.
    if rules > 0 {
        out.push_str("attack r0 -> mu\n");
    }
    for a in 1..names.len() {
        for b in 0..names.len() {
            if (a, b) != (1, 0) && rng.random_bool(0.3) {
                out.push_str(&format!("attack {} -> {}\n", names[a], names[b]));
            }
        }
    }
    out
}
