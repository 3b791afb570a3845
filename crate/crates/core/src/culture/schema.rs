//! Property schemas and per-agent contexts.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CultureError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PropertyKind {
    Int { min: i64, max: i64 },
    Bool,
    Enum { values: Vec<String> },
}

impl PropertyKind {
    pub fn domain_size(&self) -> u64 {
        match self {
            PropertyKind::Int { min, max } => (max - min + 1) as u64,
            PropertyKind::Bool => 2,
            PropertyKind::Enum { values } => values.len() as u64,
        }
    }

    fn nth(&self, i: u64) -> Value {
        match self {
            PropertyKind::Int { min, .. } => Value::Int(min + i as i64),
            PropertyKind::Bool => Value::Bool(i == 1),
            PropertyKind::Enum { .. } => Value::Enum(i as usize),
        }
    }

    fn accepts(&self, v: &Value) -> bool {
        match (self, v) {
            (PropertyKind::Int { min, max }, Value::Int(x)) => min <= x && x <= max,
            (PropertyKind::Bool, Value::Bool(_)) => true,
            (PropertyKind::Enum { values }, Value::Enum(i)) => *i < values.len(),
            _ => false,
        }
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyKind::Int { min, max } => write!(f, "int {min}..{max}"),
            PropertyKind::Bool => f.write_str("bool"),
            PropertyKind::Enum { values } => write!(f, "enum {{ {} }}", values.join(", ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Property {
    pub name: String,
    #[serde(flatten)]
    pub kind: PropertyKind,
}

/// A property value. Enumerated values are stored by their declaration index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Enum(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropertySchema {
    properties: Vec<Property>,
}

impl PropertySchema {
    pub fn new(properties: Vec<Property>) -> Result<Self, CultureError> {
        for (i, p) in properties.iter().enumerate() {
            if properties[..i].iter().any(|q| q.name == p.name) {
                return Err(CultureError::Schema(format!("duplicate property `{}`", p.name)));
            }
            match &p.kind {
                PropertyKind::Int { min, max } if min > max => {
                    return Err(CultureError::Schema(format!("property `{}` has an empty range {min}..{max}", p.name)))
                }
                PropertyKind::Enum { values } => {
                    if values.len() < 2 {
                        return Err(CultureError::Schema(format!(
                            "enumerated property `{}` needs at least two values",
                            p.name
                        )));
                    }
                    for (j, v) in values.iter().enumerate() {
                        if values[..j].contains(v) {
                            return Err(CultureError::Schema(format!("property `{}` repeats value `{v}`", p.name)));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(PropertySchema { properties })
    }

    pub fn properties(&self) -> &[Property] {
        &self.properties
    }

    pub fn len(&self) -> usize {
        self.properties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.properties.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }

    /// Number of distinct contexts, saturating at `u64::MAX`.
    pub fn domain_size(&self) -> u64 {
        self.properties.iter().fold(1u64, |acc, p| acc.saturating_mul(p.kind.domain_size()))
    }

    /// The `i`-th context in mixed-radix order (last property varies fastest).
    pub fn nth_context(&self, mut i: u64) -> AgentContext {
        let mut values = vec![Value::Bool(false); self.properties.len()];
        for (slot, p) in values.iter_mut().zip(&self.properties).rev() {
            let size = p.kind.domain_size();
            *slot = p.kind.nth(i % size);
            i /= size;
        }
        AgentContext { values }
    }

    pub fn contexts(&self) -> impl Iterator<Item = AgentContext> + '_ {
        (0..self.domain_size()).map(|i| self.nth_context(i))
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> AgentContext {
        let values = self.properties.iter().map(|p| p.kind.nth(rng.random_range(0..p.kind.domain_size()))).collect();
        AgentContext { values }
    }

    pub fn check(&self, ctx: &AgentContext) -> Result<(), CultureError> {
        if ctx.values.len() != self.properties.len() {
            return Err(CultureError::Context(format!(
                "context assigns {} properties, schema declares {}",
                ctx.values.len(),
                self.properties.len()
            )));
        }
        for (p, v) in self.properties.iter().zip(&ctx.values) {
            if !p.kind.accepts(v) {
                return Err(CultureError::Context(format!(
                    "value {} does not fit property `{}` ({})",
                    self.show_value(p, v),
                    p.name,
                    p.kind
                )));
            }
        }
        Ok(())
    }

    fn show_value(&self, p: &Property, v: &Value) -> String {
        match (v, &p.kind) {
            (Value::Enum(i), PropertyKind::Enum { values }) => {
                values.get(*i).cloned().unwrap_or_else(|| format!("<{i}>"))
            }
            (Value::Enum(i), _) => format!("<{i}>"),
            (Value::Int(x), _) => x.to_string(),
            (Value::Bool(b), _) => b.to_string(),
        }
    }

    /// Parses a literal for property `p`. Booleans accept `true/false` and `yes/no`.
    pub fn parse_value(&self, p: &Property, text: &str) -> Result<Value, CultureError> {
        let text = text.trim();
        let v = match &p.kind {
            PropertyKind::Int { .. } => text.parse::<i64>().ok().map(Value::Int),
            PropertyKind::Bool => match text {
                "true" | "yes" => Some(Value::Bool(true)),
                "false" | "no" => Some(Value::Bool(false)),
                _ => None,
            },
            PropertyKind::Enum { values } => values.iter().position(|v| v == text).map(Value::Enum),
        };
        match v {
            Some(v) if p.kind.accepts(&v) => Ok(v),
            _ => Err(CultureError::Context(format!("`{text}` is not a valid value for `{}` ({})", p.name, p.kind))),
        }
    }

    /// Parses `name=value,name=value,...`; every property must be assigned once.
    pub fn parse_context(&self, text: &str) -> Result<AgentContext, CultureError> {
        let mut values: Vec<Option<Value>> = vec![None; self.properties.len()];
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| CultureError::Context(format!("expected name=value, got `{part}`")))?;
            let name = name.trim();
            let idx = self.index_of(name).ok_or_else(|| CultureError::Context(format!("unknown property `{name}`")))?;
            if values[idx].is_some() {
                return Err(CultureError::Context(format!("property `{name}` assigned twice")));
            }
            values[idx] = Some(self.parse_value(&self.properties[idx], value)?);
        }
        let values = values
            .into_iter()
            .zip(&self.properties)
            .map(|(v, p)| v.ok_or_else(|| CultureError::Context(format!("property `{}` is missing", p.name))))
            .collect::<Result<_, _>>()?;
        Ok(AgentContext { values })
    }

    pub fn render_context(&self, ctx: &AgentContext) -> String {
        self.properties
            .iter()
            .zip(&ctx.values)
            .map(|(p, v)| format!("{}={}", p.name, self.show_value(p, v)))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Name → JSON value view of a context, in schema order.
    pub fn context_to_json(&self, ctx: &AgentContext) -> serde_json::Map<String, serde_json::Value> {
        self.properties
            .iter()
            .zip(&ctx.values)
            .map(|(p, v)| {
                let json = match v {
                    Value::Int(x) => serde_json::Value::from(*x),
                    Value::Bool(b) => serde_json::Value::from(*b),
                    Value::Enum(_) => serde_json::Value::from(self.show_value(p, v)),
                };
                (p.name.clone(), json)
            })
            .collect()
    }

    pub fn context_to_map(&self, ctx: &AgentContext) -> BTreeMap<String, String> {
        self.properties.iter().zip(&ctx.values).map(|(p, v)| (p.name.clone(), self.show_value(p, v))).collect()
    }
}

/// Property assignment of one agent, aligned with its culture's schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentContext {
    values: Vec<Value>,
}

impl AgentContext {
    /// Unchecked constructor; pair with [`PropertySchema::check`].
    pub fn from_values(values: Vec<Value>) -> Self {
        AgentContext { values }
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn get(&self, index: usize) -> Option<Value> {
        self.values.get(index).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> PropertySchema {
        PropertySchema::new(vec![
            Property { name: "rank".into(), kind: PropertyKind::Int { min: 1, max: 5 } },
            Property { name: "tasked".into(), kind: PropertyKind::Bool },
            Property { name: "cargo".into(), kind: PropertyKind::Enum { values: vec!["empty".into(), "full".into()] } },
        ])
        .unwrap()
    }

    #[test]
    fn enumerates_the_whole_domain() {
        let s = schema();
        assert_eq!(s.domain_size(), 20);
        let all: std::collections::BTreeSet<_> = s.contexts().collect();
        assert_eq!(all.len(), 20);
        assert!(all.iter().all(|c| s.check(c).is_ok()));
    }

    #[test]
    fn parses_and_renders_contexts() {
        let s = schema();
        let ctx = s.parse_context("tasked=yes, rank=4,cargo=full").unwrap();
        assert_eq!(ctx.values(), &[Value::Int(4), Value::Bool(true), Value::Enum(1)]);
        assert_eq!(s.render_context(&ctx), "rank=4,tasked=true,cargo=full");
        assert!(s.parse_context("rank=9,tasked=no,cargo=full").is_err());
        assert!(s.parse_context("rank=2,tasked=no").is_err());
        assert!(s.parse_context("rank=2,rank=3,tasked=no,cargo=empty").is_err());
        assert!(s.parse_context("rank=2,tasked=no,cargo=empty,speed=3").is_err());
    }

    #[test]
    fn rejects_bad_schemas() {
        let dup = vec![
            Property { name: "x".into(), kind: PropertyKind::Bool },
            Property { name: "x".into(), kind: PropertyKind::Bool },
        ];
        assert!(PropertySchema::new(dup).is_err());
        let one_value = vec![Property { name: "e".into(), kind: PropertyKind::Enum { values: vec!["only".into()] } }];
        assert!(PropertySchema::new(one_value).is_err());
        let empty_range = vec![Property { name: "r".into(), kind: PropertyKind::Int { min: 3, max: 1 } }];
        assert!(PropertySchema::new(empty_range).is_err());
    }

    #[test]
    fn check_catches_type_mismatch() {
        let s = schema();
        let bad = AgentContext::from_values(vec![Value::Bool(true), Value::Bool(true), Value::Enum(0)]);
        assert!(s.check(&bad).is_err());
        let short = AgentContext::from_values(vec![Value::Int(1)]);
        assert!(s.check(&short).is_err());
    }
}
