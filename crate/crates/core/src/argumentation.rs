//! Abstract argumentation frameworks and their acceptability semantics.
//!
//! Arguments are dense indices into a framework. Sets of arguments are
//! stored as 64-bit masks, which bounds a framework to [`MAX_ARGUMENTS`]
//! arguments; every ruleset this crate deals with is far smaller.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on the number of arguments in one framework.
pub const MAX_ARGUMENTS: usize = 64;

/// Default bound on the candidate pool for explanation enumeration.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArgumentationError {
    #[error("argument {0} is not part of the framework")]
    UnknownArgument(ArgumentId),
    #[error("framework has {count} arguments, at most {MAX_ARGUMENTS} are supported")]
    TooManyArguments { count: usize },
    #[error("explanation enumeration over {candidates} candidates exceeds the limit of {limit}")]
    EnumerationTooLarge { candidates: usize, limit: usize },
}

pub type Result<T, E = ArgumentationError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArgumentId(pub u32);

impl ArgumentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ArgumentId {
    fn from(i: usize) -> Self {
        ArgumentId(i as u32)
    }
}

impl fmt::Display for ArgumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A set of arguments of one framework.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArgumentSet(u64);

impl ArgumentSet {
    pub const EMPTY: ArgumentSet = ArgumentSet(0);

    pub fn from_bits(bits: u64) -> Self {
        ArgumentSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(id: ArgumentId) -> Self {
        ArgumentSet(1u64 << id.0)
    }

    /// The set `{0, 1, ..., n-1}`.
    pub fn full(n: usize) -> Self {
        if n >= 64 {
            ArgumentSet(u64::MAX)
        } else {
            ArgumentSet((1u64 << n) - 1)
        }
    }

    pub fn contains(self, id: ArgumentId) -> bool {
        id.0 < 64 && self.0 & (1u64 << id.0) != 0
    }

    pub fn insert(&mut self, id: ArgumentId) {
        self.0 |= 1u64 << id.0;
    }

    pub fn remove(&mut self, id: ArgumentId) {
        self.0 &= !(1u64 << id.0);
    }

    pub fn with(mut self, id: ArgumentId) -> Self {
        self.insert(id);
        self
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        ArgumentSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        ArgumentSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        ArgumentSet(self.0 & !other.0)
    }

    pub fn intersects(self, other: Self) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_strict_subset(self, other: Self) -> bool {
        self.is_subset(other) && self != other
    }

    /// The single member, if the set is a singleton.
    pub fn single(self) -> Option<ArgumentId> {
        (self.len() == 1).then(|| ArgumentId(self.0.trailing_zeros()))
    }

    pub fn iter(self) -> impl Iterator<Item = ArgumentId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros();
            bits &= bits - 1;
            Some(ArgumentId(i))
        })
    }

    /// Every subset of `self`, in increasing mask order.
    pub fn subsets(self) -> impl Iterator<Item = ArgumentSet> {
        let full = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some(cur.wrapping_sub(full) & full) };
            Some(ArgumentSet(cur))
        })
    }
}

impl FromIterator<ArgumentId> for ArgumentSet {
    fn from_iter<I: IntoIterator<Item = ArgumentId>>(iter: I) -> Self {
        let mut s = ArgumentSet::EMPTY;
        for id in iter {
            s.insert(id);
        }
        s
    }
}

impl fmt::Debug for ArgumentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|a| a.0)).finish()
    }
}

/// A directed attack graph over abstract arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FrameworkDocument", into = "FrameworkDocument")]
pub struct ArgumentationFramework {
    labels: Vec<String>,
    attacks: BTreeSet<(ArgumentId, ArgumentId)>,
    // derived
    targets: Vec<ArgumentSet>,
    attackers: Vec<ArgumentSet>,
    r_defended: Vec<ArgumentSet>,
}

#[derive(Serialize, Deserialize)]
struct FrameworkDocument {
    arguments: Vec<String>,
    attacks: Vec<(u32, u32)>,
}

impl TryFrom<FrameworkDocument> for ArgumentationFramework {
    type Error = ArgumentationError;

    fn try_from(doc: FrameworkDocument) -> Result<Self> {
        ArgumentationFramework::new(doc.arguments, doc.attacks.into_iter().map(|(a, b)| (ArgumentId(a), ArgumentId(b))))
    }
}

impl From<ArgumentationFramework> for FrameworkDocument {
    fn from(af: ArgumentationFramework) -> Self {
        FrameworkDocument { attacks: af.attacks.iter().map(|(a, b)| (a.0, b.0)).collect(), arguments: af.labels }
    }
}

impl ArgumentationFramework {
    /// Builds a framework; duplicate attack pairs collapse into one.
    pub fn new<I>(labels: Vec<String>, attacks: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ArgumentId, ArgumentId)>,
    {
        let n = labels.len();
        if n > MAX_ARGUMENTS {
            return Err(ArgumentationError::TooManyArguments { count: n });
        }
        let mut set = BTreeSet::new();
        let mut targets = vec![ArgumentSet::EMPTY; n];
        let mut attackers = vec![ArgumentSet::EMPTY; n];
        for (a, b) in attacks {
            for id in [a, b] {
                if id.index() >= n {
                    return Err(ArgumentationError::UnknownArgument(id));
                }
            }
            set.insert((a, b));
            targets[a.index()].insert(b);
            attackers[b.index()].insert(a);
        }
        let r_defended = r_defence_closure(&targets);
        Ok(ArgumentationFramework { labels, attacks: set, targets, attackers, r_defended })
    }

    /// Unlabelled framework with arguments named by index.
    pub fn unlabelled<I>(n: usize, attacks: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ArgumentId, ArgumentId)>,
    {
        Self::new((0..n).map(|i| i.to_string()).collect(), attacks)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn arguments(&self) -> impl Iterator<Item = ArgumentId> {
        (0..self.labels.len()).map(ArgumentId::from)
    }

    pub fn all(&self) -> ArgumentSet {
        ArgumentSet::full(self.len())
    }

    pub fn label(&self, id: ArgumentId) -> Option<&str> {
        self.labels.get(id.index()).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn find(&self, label: &str) -> Option<ArgumentId> {
        self.labels.iter().position(|l| l == label).map(ArgumentId::from)
    }

    pub fn attack_pairs(&self) -> impl Iterator<Item = (ArgumentId, ArgumentId)> + '_ {
        self.attacks.iter().copied()
    }

    pub fn attack_count(&self) -> usize {
        self.attacks.len()
    }

    pub fn check(&self, id: ArgumentId) -> Result<()> {
        if id.index() < self.len() {
            Ok(())
        } else {
            Err(ArgumentationError::UnknownArgument(id))
        }
    }

    pub fn check_set(&self, s: ArgumentSet) -> Result<()> {
        match s.difference(self.all()).iter().next() {
            Some(id) => Err(ArgumentationError::UnknownArgument(id)),
            None => Ok(()),
        }
    }

    pub fn attacks(&self, a: ArgumentId, b: ArgumentId) -> bool {
        self.targets.get(a.index()).is_some_and(|t| t.contains(b))
    }

    /// Arguments attacked by `a`.
    pub fn targets_of(&self, a: ArgumentId) -> ArgumentSet {
        self.targets[a.index()]
    }

    /// Arguments attacking `a`.
    pub fn attackers_of(&self, a: ArgumentId) -> ArgumentSet {
        self.attackers[a.index()]
    }

    /// Union of everything attacked by some member of `s`.
    pub fn targets_of_set(&self, s: ArgumentSet) -> ArgumentSet {
        s.iter().fold(ArgumentSet::EMPTY, |acc, a| acc.union(self.targets[a.index()]))
    }

    /// Union of everything attacking some member of `s`.
    pub fn attackers_of_set(&self, s: ArgumentSet) -> ArgumentSet {
        s.iter().fold(ArgumentSet::EMPTY, |acc, a| acc.union(self.attackers[a.index()]))
    }

    /// Whether some member of `s` attacks some member of `t`.
    pub fn attacks_set(&self, s: ArgumentSet, t: ArgumentSet) -> Result<bool> {
        self.check_set(s)?;
        self.check_set(t)?;
        Ok(self.set_attacks_unchecked(s, t))
    }

    pub(crate) fn set_attacks_unchecked(&self, s: ArgumentSet, t: ArgumentSet) -> bool {
        self.targets_of_set(s).intersects(t)
    }

    pub fn is_conflict_free(&self, s: ArgumentSet) -> Result<bool> {
        self.check_set(s)?;
        Ok(!self.set_attacks_unchecked(s, s))
    }

    /// Every attacker of `a` is attacked by some member of `s`.
    pub fn is_acceptable(&self, a: ArgumentId, s: ArgumentSet) -> Result<bool> {
        self.check(a)?;
        self.check_set(s)?;
        Ok(self.acceptable_unchecked(a, s))
    }

    fn acceptable_unchecked(&self, a: ArgumentId, s: ArgumentSet) -> bool {
        let defended = self.targets_of_set(s);
        self.attackers[a.index()].is_subset(defended)
    }

    pub fn is_admissible(&self, s: ArgumentSet) -> Result<bool> {
        self.check_set(s)?;
        Ok(self.admissible_unchecked(s))
    }

    fn admissible_unchecked(&self, s: ArgumentSet) -> bool {
        if self.set_attacks_unchecked(s, s) {
            return false;
        }
        // S defends a iff attackers(a) ⊆ targets(S); checking the union suffices.
        self.attackers_of_set(s).is_subset(self.targets_of_set(s))
    }

    /// `a` r-defends `b`: reflexive, two-step attack chains, and their
    /// transitive closure.
    pub fn r_defends(&self, a: ArgumentId, b: ArgumentId) -> Result<bool> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.r_defended[a.index()].contains(b))
    }

    /// Every member of `s` r-defends `a`.
    pub fn set_r_defends(&self, s: ArgumentSet, a: ArgumentId) -> Result<bool> {
        self.check_set(s)?;
        self.check(a)?;
        Ok(s.iter().all(|b| self.r_defended[b.index()].contains(a)))
    }

    /// Arguments that r-defend `a` (always includes `a`).
    pub fn r_defenders_of(&self, a: ArgumentId) -> Result<ArgumentSet> {
        self.check(a)?;
        Ok(self.arguments().filter(|b| self.r_defended[b.index()].contains(a)).collect())
    }

    /// All explanations of `a` with at most `size_cap` members, ordered by
    /// size and then by mask.
    pub fn explanations_of(&self, a: ArgumentId, size_cap: usize) -> Result<Vec<ArgumentSet>> {
        self.explanations_with_limit(a, size_cap, DEFAULT_ENUMERATION_LIMIT)
    }

    pub fn explanations_with_limit(&self, a: ArgumentId, size_cap: usize, limit: usize) -> Result<Vec<ArgumentSet>> {
        let cap = size_cap.min(self.len());
        // An explanation S has a as a topic, so a ∈ S and every member r-defends a.
        let others = self.r_defenders_of(a)?.difference(ArgumentSet::singleton(a));
        if others.len() + 1 > limit {
            return Err(ArgumentationError::EnumerationTooLarge { candidates: others.len() + 1, limit });
        }
        let mut found: Vec<ArgumentSet> =
            others.subsets().map(|t| t.with(a)).filter(|s| s.len() <= cap && self.admissible_unchecked(*s)).collect();
        found.sort_by_key(|s| (s.len(), s.bits()));
        Ok(found)
    }
}

fn r_defence_closure(targets: &[ArgumentSet]) -> Vec<ArgumentSet> {
    let n = targets.len();
    // direct[x] = { y | ∃z. x attacks z ∧ z attacks y }
    let direct: Vec<ArgumentSet> =
        targets.iter().map(|t| t.iter().fold(ArgumentSet::EMPTY, |acc, z| acc.union(targets[z.index()]))).collect();
    (0..n)
        .map(|x| {
            let mut reach = ArgumentSet::singleton(ArgumentId::from(x));
            let mut frontier = reach;
            while !frontier.is_empty() {
                let next =
                    frontier.iter().fold(ArgumentSet::EMPTY, |acc, y| acc.union(direct[y.index()])).difference(reach);
                reach = reach.union(next);
                frontier = next;
            }
            reach
        })
        .collect()
}

/// Labels assigned to one explanation relative to a family of explanations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExplanationLabels {
    /// Smallest cardinality in the family.
    pub minimal: bool,
    /// Largest cardinality in the family.
    pub maximal: bool,
    /// No other member is a strict subset.
    pub compact: bool,
    /// No other member is a strict superset.
    pub verbose: bool,
}

pub fn classify_explanations(explanations: &[ArgumentSet]) -> Vec<(ArgumentSet, ExplanationLabels)> {
    let Some(min) = explanations.iter().map(|s| s.len()).min() else {
        return Vec::new();
    };
    let max = explanations.iter().map(|s| s.len()).max().unwrap_or(min);
    explanations
        .iter()
        .map(|&s| {
            let labels = ExplanationLabels {
                minimal: s.len() == min,
                maximal: s.len() == max,
                compact: !explanations.iter().any(|o| o.is_strict_subset(s)),
                verbose: !explanations.iter().any(|o| s.is_strict_subset(*o)),
            };
            (s, labels)
        })
        .collect()
}
