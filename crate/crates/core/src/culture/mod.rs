//! Cultures: rulesets compiled to an argumentation framework whose arguments
//! carry verifier predicates over the contexts of the two disputing parties.

mod expr;
mod parser;
mod schema;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::argumentation::{ArgumentId, ArgumentSet, ArgumentationError, ArgumentationFramework};

pub use expr::{CmpOp, Operand, PropertyRef, Subject, VerifierExpr};
pub use parser::parse_culture;
pub use schema::{AgentContext, Property, PropertyKind, PropertySchema, Value};
pub use validate::{validate_culture, ContextSampler, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CultureError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("context error: {0}")]
    Context(String),
    #[error("a culture needs at least one proposition")]
    NoPropositions,
    #[error("invalid culture: {0}")]
    Invalid(String),
    #[error(transparent)]
    Framework(#[from] ArgumentationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Proposition,
    Rule,
}

/// One argument of a culture: its file identifier, display text and verifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub text: String,
    pub kind: RuleKind,
    pub verifier: VerifierExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Easy,
    Medium,
    Hard,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Easy, Level::Medium, Level::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Easy => "easy",
            Level::Medium => "medium",
            Level::Hard => "hard",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Level::Easy),
            "medium" => Ok(Level::Medium),
            "hard" => Ok(Level::Hard),
            other => Err(format!("unknown level `{other}` (expected easy, medium or hard)")),
        }
    }
}

pub const EASY_SOURCE: &str = include_str!("../../data/easy.culture");
pub const MEDIUM_SOURCE: &str = include_str!("../../data/medium.culture");
pub const HARD_SOURCE: &str = include_str!("../../data/hard.culture");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Culture {
    name: String,
    schema: PropertySchema,
    framework: ArgumentationFramework,
    rules: Vec<Rule>,
    propositions: ArgumentSet,
}

impl Culture {
    /// `rules[i]` describes argument `i` of `framework`.
    pub fn new(
        name: String,
        schema: PropertySchema,
        framework: ArgumentationFramework,
        rules: Vec<Rule>,
    ) -> Result<Self, CultureError> {
        if rules.len() != framework.len() {
            return Err(CultureError::Invalid(format!("{} rules for {} arguments", rules.len(), framework.len())));
        }
        let mut propositions = ArgumentSet::EMPTY;
        for (i, r) in rules.iter().enumerate() {
            if framework.labels()[i] != r.id {
                return Err(CultureError::Invalid(format!(
                    "argument {i} is labelled `{}` but its rule is `{}`",
                    framework.labels()[i],
                    r.id
                )));
            }
            if r.kind == RuleKind::Proposition {
                if r.verifier != VerifierExpr::True {
                    return Err(CultureError::Invalid(format!(
                        "proposition `{}` must have the constant verifier `true`",
                        r.id
                    )));
                }
                propositions.insert(ArgumentId::from(i));
            }
            r.verifier.check(&schema).map_err(|m| CultureError::Invalid(format!("rule `{}`: {m}", r.id)))?;
        }
        if propositions.is_empty() {
            return Err(CultureError::NoPropositions);
        }
        Ok(Culture { name, schema, framework, rules, propositions })
    }

    pub fn builtin(level: Level) -> Culture {
        let src = match level {
            Level::Easy => EASY_SOURCE,
            Level::Medium => MEDIUM_SOURCE,
            Level::Hard => HARD_SOURCE,
        };
        parse_culture(src).expect("built-in culture parses")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &PropertySchema {
        &self.schema
    }

    pub fn framework(&self) -> &ArgumentationFramework {
        &self.framework
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: ArgumentId) -> Option<&Rule> {
        self.rules.get(id.index())
    }

    /// The proposition set; never empty.
    pub fn propositions(&self) -> ArgumentSet {
        self.propositions
    }

    pub fn is_proposition(&self, id: ArgumentId) -> bool {
        self.propositions.contains(id)
    }

    /// Number of non-proposition arguments.
    pub fn rule_count(&self) -> usize {
        self.rules.len() - self.propositions.len()
    }

    pub fn property_count(&self) -> usize {
        self.schema.len()
    }

    pub fn find(&self, id: &str) -> Option<ArgumentId> {
        self.framework.find(id)
    }

    /// The first declared proposition: the default motion in disputes.
    pub fn default_motion(&self) -> ArgumentId {
        self.propositions.iter().next().expect("non-empty proposition set")
    }

    pub fn text(&self, id: ArgumentId) -> &str {
        self.rule(id).map(|r| r.text.as_str()).unwrap_or("")
    }

    pub fn check_context(&self, ctx: &AgentContext) -> Result<(), CultureError> {
        self.schema.check(ctx)
    }

    pub fn eval_verifier(
        &self,
        id: ArgumentId,
        mover: &AgentContext,
        other: &AgentContext,
    ) -> Result<bool, CultureError> {
        let rule = self.rule(id).ok_or(CultureError::Framework(ArgumentationError::UnknownArgument(id)))?;
        self.schema.check(mover)?;
        self.schema.check(other)?;
        Ok(rule.verifier.eval(mover, other))
    }

    /// Arguments the mover can demonstrate against `other`. Always contains
    /// every proposition.
    pub fn demonstrably_true_set(
        &self,
        mover: &AgentContext,
        other: &AgentContext,
    ) -> Result<ArgumentSet, CultureError> {
        self.schema.check(mover)?;
        self.schema.check(other)?;
        Ok(self.demonstrably_true_unchecked(mover, other))
    }

    pub(crate) fn demonstrably_true_unchecked(&self, mover: &AgentContext, other: &AgentContext) -> ArgumentSet {
        self.rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.verifier.eval(mover, other))
            .map(|(i, _)| ArgumentId::from(i))
            .collect()
    }

    /// Culture-file text that parses back to an equal culture.
    pub fn render(&self) -> String {
        let mut out = format!("culture {}\n", quote(&self.name));
        if !self.schema.is_empty() {
            out.push('\n');
        }
        for p in self.schema.properties() {
            out.push_str(&format!("property {} : {}\n", p.name, p.kind));
        }
        out.push('\n');
        for r in &self.rules {
            match r.kind {
                RuleKind::Proposition => out.push_str(&format!("proposition {} {}\n", r.id, quote(&r.text))),
                RuleKind::Rule => out.push_str(&format!(
                    "rule {} {} when {}\n",
                    r.id,
                    quote(&r.text),
                    r.verifier.render(&self.schema)
                )),
            }
        }
        if self.framework.attack_count() > 0 {
            out.push('\n');
        }
        for (a, b) in self.framework.attack_pairs() {
            out.push_str(&format!("attack {} -> {}\n", self.rules[a.index()].id, self.rules[b.index()].id));
        }
        out
    }

    pub fn to_document(&self) -> CultureDocument {
        CultureDocument {
            name: self.name.clone(),
            properties: self.schema.properties().to_vec(),
            arguments: self
                .rules
                .iter()
                .enumerate()
                .map(|(i, r)| ArgumentDocument {
                    index: i,
                    id: r.id.clone(),
                    kind: r.kind,
                    text: r.text.clone(),
                    verifier: r.verifier.render(&self.schema),
                })
                .collect(),
            propositions: self.propositions.iter().map(|a| self.rules[a.index()].id.clone()).collect(),
            attacks: self
                .framework
                .attack_pairs()
                .map(|(a, b)| [self.rules[a.index()].id.clone(), self.rules[b.index()].id.clone()])
                .collect(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_document()).expect("culture document serializes")
    }
}

/// Machine-readable export of a culture. Field order is stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CultureDocument {
    pub name: String,
    pub properties: Vec<Property>,
    pub arguments: Vec<ArgumentDocument>,
    pub propositions: Vec<String>,
    pub attacks: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentDocument {
    pub index: usize,
    pub id: String,
    pub kind: RuleKind,
    pub text: String,
    pub verifier: String,
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}
