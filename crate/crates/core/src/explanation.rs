//! Explanations drawn from finished dialogues, and their rendering as hints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::argumentation::ArgumentSet;
use crate::culture::Culture;
use crate::dialogue::{DialogueResult, Move, Player};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExplanationError {
    #[error("dialogue is incomplete: {0}")]
    Incomplete(String),
    #[error("an explanation needs at least one reason")]
    NoReasons,
    #[error("a contrastive explanation needs at least two reasons, got {0}")]
    TooFewReasons(usize),
    #[error("invalid hint templates: {0}")]
    Templates(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplanationKind {
    Plain,
    Contrastive,
}

/// Move indices split by whether the winner played them. Both lists are in
/// dialogue order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovePartition {
    pub winning: Vec<usize>,
    pub losing: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplainedMove {
    pub index: usize,
    #[serde(flatten)]
    pub mv: Move,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueExplanation {
    pub kind: ExplanationKind,
    /// Selected moves; the winner move comes first.
    pub moves: Vec<ExplainedMove>,
    pub requested: usize,
    /// A contrastive explanation was asked for but the loser never moved.
    pub fallback: bool,
    /// Fewer moves were available than requested.
    pub clamped: bool,
    pub winner: Player,
    pub motion: ArgumentSet,
}

impl DialogueExplanation {
    pub fn reasons(&self) -> usize {
        self.moves.len()
    }

    pub fn winner_move(&self) -> ExplainedMove {
        self.moves[0]
    }

    /// The most recent losing move included, if any.
    pub fn defeated_move(&self) -> Option<ExplainedMove> {
        self.moves.iter().filter(|m| m.mv.player != self.winner).max_by_key(|m| m.index).copied()
    }
}

pub fn partition_moves(result: &DialogueResult) -> Result<MovePartition, ExplanationError> {
    let moves = &result.dialogue.moves;
    let last = moves.last().ok_or_else(|| ExplanationError::Incomplete("no moves".into()))?;
    if last.player != result.winner {
        return Err(ExplanationError::Incomplete(format!(
            "the last move belongs to the {}, not the declared winner",
            last.player
        )));
    }
    let (winning, losing) = (0..moves.len()).partition(|&i| moves[i].player == result.winner);
    Ok(MovePartition { winning, losing })
}

/// Selects `reasons` moves explaining the outcome of `result`.
///
/// The winner move (the last move) is always included. A contrastive
/// explanation adds the most recent losing move, then fills up from the whole
/// dialogue most-recent-first. A plain explanation fills up from the winner's
/// moves most-recent-first. A contrastive request on a dialogue without
/// losing moves yields a plain explanation with `fallback` set. Requests
/// larger than the pool are clamped with `clamped` set.
pub fn generate_explanation(
    result: &DialogueResult,
    kind: ExplanationKind,
    reasons: usize,
) -> Result<DialogueExplanation, ExplanationError> {
    if reasons == 0 {
        return Err(ExplanationError::NoReasons);
    }
    if kind == ExplanationKind::Contrastive && reasons < 2 {
        return Err(ExplanationError::TooFewReasons(reasons));
    }
    let partition = partition_moves(result)?;
    let moves = &result.dialogue.moves;
    let winner_idx = moves.len() - 1;

    let (kind, fallback) = if kind == ExplanationKind::Contrastive && partition.losing.is_empty() {
        (ExplanationKind::Plain, true)
    } else {
        (kind, false)
    };

    let mut picked = vec![winner_idx];
    let pool: Vec<usize> = match kind {
        ExplanationKind::Contrastive => {
            let recent_loss = *partition.losing.last().expect("non-empty");
            picked.push(recent_loss);
            (0..moves.len()).rev().collect()
        }
        ExplanationKind::Plain => partition.winning.iter().rev().copied().collect(),
    };
    let available = pool.len();
    let clamped = reasons > available;
    let target = reasons.min(available);
    for i in pool {
        if picked.len() >= target {
            break;
        }
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    Ok(DialogueExplanation {
        kind,
        moves: picked.into_iter().map(|index| ExplainedMove { index, mv: moves[index] }).collect(),
        requested: reasons,
        fallback,
        clamped,
        winner: result.winner,
        motion: moves[0].position,
    })
}

/// Hint sentences keyed by explanation shape and by whether the reader won.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintTemplates {
    pub contrastive: TemplatePair,
    pub plain: TemplatePair,
    pub unopposed: TemplatePair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplatePair {
    pub win: String,
    pub lose: String,
}

pub const DEFAULT_TEMPLATES: &str = include_str!("../data/hints.toml");

const PLACEHOLDERS: [&str; 4] = ["rule_text", "defeated_rule_text", "agent_name", "outcome"];

impl HintTemplates {
    pub fn from_toml(text: &str) -> Result<Self, ExplanationError> {
        let t: HintTemplates = toml::from_str(text).map_err(|e| ExplanationError::Templates(e.to_string()))?;
        for s in [&t.contrastive, &t.plain, &t.unopposed].into_iter().flat_map(|p| [&p.win, &p.lose]) {
            check_placeholders(s)?;
        }
        Ok(t)
    }

    pub fn builtin() -> Self {
        Self::from_toml(DEFAULT_TEMPLATES).expect("built-in templates are valid")
    }
}

fn check_placeholders(template: &str) -> Result<(), ExplanationError> {
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let tail = &rest[open + 1..];
        let close = tail
            .find('}')
            .ok_or_else(|| ExplanationError::Templates(format!("unclosed placeholder in `{template}`")))?;
        let name = &tail[..close];
        if !PLACEHOLDERS.contains(&name) {
            return Err(ExplanationError::Templates(format!("unknown placeholder `{{{name}}}`")));
        }
        rest = &tail[close + 1..];
    }
    Ok(())
}

fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn position_text(culture: &Culture, position: ArgumentSet) -> String {
    position.iter().map(|a| culture.text(a)).collect::<Vec<_>>().join("' and '")
}

/// Renders `explanation` for the reader playing `perspective`; `counterpart`
/// names the other party.
pub fn render_hint_with(
    templates: &HintTemplates,
    explanation: &DialogueExplanation,
    culture: &Culture,
    perspective: Player,
    counterpart: &str,
) -> String {
    let won = explanation.winner == perspective;
    let defeated = explanation.defeated_move();
    let unopposed = defeated.is_none() && explanation.winner_move().index == 0;
    let pair = if unopposed {
        &templates.unopposed
    } else if defeated.is_some() && explanation.kind == ExplanationKind::Contrastive {
        &templates.contrastive
    } else {
        &templates.plain
    };
    let template = if won { &pair.win } else { &pair.lose };
    let rule_text = position_text(culture, explanation.winner_move().mv.position);
    let defeated_text = defeated.map(|m| position_text(culture, m.mv.position)).unwrap_or_default();
    let outcome = position_text(culture, explanation.motion.intersection(culture.propositions()));
    fill(
        template,
        &[
            ("rule_text", &rule_text),
            ("defeated_rule_text", &defeated_text),
            ("agent_name", counterpart),
            ("outcome", &outcome),
        ],
    )
}

pub fn render_hint(
    explanation: &DialogueExplanation,
    culture: &Culture,
    perspective: Player,
    counterpart: &str,
) -> String {
    render_hint_with(&HintTemplates::builtin(), explanation, culture, perspective, counterpart)
}
