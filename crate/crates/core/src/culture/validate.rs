//! Checks that a culture settles every dispute unambiguously.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AgentContext, Culture};
use crate::argumentation::ArgumentSet;
use crate::dialogue::{Arena, DialogueError, DialogueMode, Parties, Player, DEFAULT_NODE_BUDGET};

/// Chooses the context pairs a validation run looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSampler {
    /// Enumerate every unordered pair of distinct contexts when there are at
    /// most this many.
    pub exhaustive_bound: u64,
    /// Otherwise draw this many pairs of distinct contexts.
    pub samples: usize,
    pub seed: u64,
    pub node_budget: u64,
}

impl Default for ContextSampler {
    fn default() -> Self {
        ContextSampler { exhaustive_bound: 50_000, samples: 10_000, seed: 0, node_budget: DEFAULT_NODE_BUDGET }
    }
}

impl ContextSampler {
    pub fn exhaustive() -> Self {
        ContextSampler { exhaustive_bound: u64::MAX, ..Default::default() }
    }

    pub fn sampled(samples: usize, seed: u64) -> Self {
        ContextSampler { exhaustive_bound: 0, samples, seed, ..Default::default() }
    }

    /// Unordered pairs of distinct contexts; each is checked in both orders.
    pub fn pairs(&self, culture: &Culture) -> (Vec<(AgentContext, AgentContext)>, bool) {
        let schema = culture.schema();
        let n = schema.domain_size();
        let unordered = if n < u64::from(u32::MAX) { n * n.saturating_sub(1) / 2 } else { u64::MAX };
        if unordered <= self.exhaustive_bound {
            let mut out = Vec::with_capacity(unordered as usize);
            for i in 0..n {
                for j in (i + 1)..n {
                    out.push((schema.nth_context(i), schema.nth_context(j)));
                }
            }
            return (out, true);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.samples);
        while out.len() < self.samples {
            let x = schema.sample_context(&mut rng);
            let y = schema.sample_context(&mut rng);
            if x != y {
                out.push((x, y));
            }
        }
        (out, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Defect {
    /// Both contexts win when proposing, or both lose.
    Indecisive,
    /// Some maximal dialogue ends with a different winner than optimal play.
    StrategyDependent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub defect: Defect,
    pub first: String,
    pub second: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub culture: String,
    pub exhaustive: bool,
    /// Unordered context pairs examined; each in both orders.
    pub pairs_checked: usize,
    pub decisive: bool,
    pub strategy_invariant: bool,
    pub counterexamples: Vec<Counterexample>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.decisive && self.strategy_invariant
    }
}

/// Stored counterexamples are capped; the flags reflect every pair.
const MAX_COUNTEREXAMPLES: usize = 16;

struct PairOutcome {
    indecisive: Option<Counterexample>,
    dependent: Vec<Counterexample>,
    warnings: Vec<String>,
}

fn check_direction(
    culture: &Culture,
    motion: ArgumentSet,
    p: &AgentContext,
    o: &AgentContext,
    budget: u64,
    out: &mut PairOutcome,
) -> Option<Player> {
    let schema = culture.schema();
    let arena = match Arena::new(culture, DialogueMode::SingleArgument, Parties::new(p, o)) {
        Ok(a) => a,
        Err(e) => {
            out.warnings.push(e.to_string());
            return None;
        }
    };
    let optimal = match arena.decide(motion, budget) {
        Ok(w) => w,
        Err(DialogueError::BudgetExceeded { .. }) => {
            out.warnings.push(format!(
                "node budget exhausted deciding {} vs {}",
                schema.render_context(p),
                schema.render_context(o)
            ));
            return None;
        }
        Err(e) => {
            out.warnings.push(e.to_string());
            return None;
        }
    };
    match arena.enumerate(motion, budget, |_, _| {}) {
        Ok(counts) if counts.unanimous() == Some(optimal) => {}
        Ok(counts) => out.dependent.push(Counterexample {
            defect: Defect::StrategyDependent,
            first: schema.render_context(p),
            second: schema.render_context(o),
            detail: format!(
                "optimal winner is the {optimal}, but the proponent wins {} and the opponent {} of the maximal dialogues",
                counts.proponent, counts.opponent
            ),
        }),
        Err(_) => out.warnings.push(format!(
            "node budget exhausted enumerating {} vs {}",
            schema.render_context(p),
            schema.render_context(o)
        )),
    }
    Some(optimal)
}

/// Checks decisiveness and strategy invariance on the pairs chosen by
/// `sampler`, using the culture's default motion.
pub fn validate_culture(culture: &Culture, sampler: &ContextSampler) -> ValidationReport {
    let (pairs, exhaustive) = sampler.pairs(culture);
    let motion = ArgumentSet::singleton(culture.default_motion());
    let schema = culture.schema();
    let outcomes: Vec<PairOutcome> = pairs
        .par_iter()
        .map(|(x, y)| {
            let mut out = PairOutcome { indecisive: None, dependent: Vec::new(), warnings: Vec::new() };
            let xy = check_direction(culture, motion, x, y, sampler.node_budget, &mut out);
            let yx = check_direction(culture, motion, y, x, sampler.node_budget, &mut out);
            if let (Some(xy), Some(yx)) = (xy, yx) {
                // Exactly one side should hold the motion against the other.
                if (xy == Player::Proponent) == (yx == Player::Proponent) {
                    let detail = if xy == Player::Proponent {
                        "each side wins when it proposes"
                    } else {
                        "neither side wins when it proposes"
                    };
                    out.indecisive = Some(Counterexample {
                        defect: Defect::Indecisive,
                        first: schema.render_context(x),
                        second: schema.render_context(y),
                        detail: detail.into(),
                    });
                }
            }
            out
        })
        .collect();

    let mut report = ValidationReport {
        culture: culture.name().to_string(),
        exhaustive,
        pairs_checked: pairs.len(),
        decisive: true,
        strategy_invariant: true,
        counterexamples: Vec::new(),
        warnings: Vec::new(),
    };
    for o in outcomes {
        if let Some(c) = o.indecisive {
            report.decisive = false;
            if report.counterexamples.len() < MAX_COUNTEREXAMPLES {
                report.counterexamples.push(c);
            }
        }
        if !o.dependent.is_empty() {
            report.strategy_invariant = false;
        }
        for c in o.dependent {
            if report.counterexamples.len() < MAX_COUNTEREXAMPLES {
                report.counterexamples.push(c);
            }
        }
        report.warnings.extend(o.warnings);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::culture::{parse_culture, Level};

    #[test]
    fn easy_is_sound() {
        let r = validate_culture(&Culture::builtin(Level::Easy), &ContextSampler::exhaustive());
        assert!(r.exhaustive);
        assert_eq!(r.pairs_checked, 45);
        assert!(r.passed(), "{r:?}");
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn unopposed_rules_are_indecisive() {
        let src = r#"
culture "split"
property x : bool
property y : bool
proposition mu "right of way"
rule a "x" when self.x = true
rule b "y" when self.y = true
attack a -> mu
attack b -> mu
"#;
        let r = validate_culture(&parse_culture(src).unwrap(), &ContextSampler::exhaustive());
        assert!(!r.decisive);
        assert!(r.counterexamples.iter().any(|c| c.defect == Defect::Indecisive));
    }

    #[test]
    fn lone_proposition_is_decisive() {
        let src = "culture \"bare\"\nproposition mu \"right of way\"\n";
        let r = validate_culture(&parse_culture(src).unwrap(), &ContextSampler::exhaustive());
        assert!(r.passed());
        assert_eq!(r.pairs_checked, 0);
    }

    #[test]
    fn sampling_is_seeded() {
        let c = Culture::builtin(Level::Hard);
        let a = ContextSampler::sampled(50, 3).pairs(&c);
        let b = ContextSampler::sampled(50, 3).pairs(&c);
        assert_eq!(a, b);
        assert!(!a.1);
        assert!(a.0.iter().all(|(x, y)| x != y));
    }
}
