//! Verifier expressions: comparisons over the properties of the two parties
//! in a dispute, combined with `and`, `or` and `not`.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::schema::{AgentContext, PropertyKind, PropertySchema, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subject {
    /// The player putting the argument forward.
    #[serde(rename = "self")]
    Mover,
    /// Its counterpart.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne, CmpOp::Ge, CmpOp::Gt];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    fn apply<T: Ord>(self, a: T, b: T) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PropertyRef {
    pub subject: Subject,
    /// Index into the culture's property schema.
    pub property: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Property(PropertyRef),
    Literal(Value),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VerifierExpr {
    True,
    Compare { lhs: PropertyRef, op: CmpOp, rhs: Operand },
    Not(Box<VerifierExpr>),
    And(Box<VerifierExpr>, Box<VerifierExpr>),
    Or(Box<VerifierExpr>, Box<VerifierExpr>),
}

impl VerifierExpr {
    pub fn and(self, other: VerifierExpr) -> Self {
        VerifierExpr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: VerifierExpr) -> Self {
        VerifierExpr::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        VerifierExpr::Not(Box::new(self))
    }

    /// Strict evaluation. Contexts are assumed to conform to the schema the
    /// expression was checked against.
    pub fn eval(&self, mover: &AgentContext, other: &AgentContext) -> bool {
        match self {
            VerifierExpr::True => true,
            VerifierExpr::Compare { lhs, op, rhs } => {
                let l = read(*lhs, mover, other);
                let r = match rhs {
                    Operand::Property(p) => read(*p, mover, other),
                    Operand::Literal(v) => *v,
                };
                match (l, r) {
                    (Value::Int(a), Value::Int(b)) => op.apply(a, b),
                    (Value::Bool(a), Value::Bool(b)) => op.apply(a, b),
                    (Value::Enum(a), Value::Enum(b)) => op.apply(a, b),
                    _ => false,
                }
            }
            VerifierExpr::Not(e) => !e.eval(mover, other),
            VerifierExpr::And(a, b) => {
                let (a, b) = (a.eval(mover, other), b.eval(mover, other));
                a && b
            }
            VerifierExpr::Or(a, b) => {
                let (a, b) = (a.eval(mover, other), b.eval(mover, other));
                a || b
            }
        }
    }

    /// Type-checks against `schema`; returns a description of the first problem.
    pub fn check(&self, schema: &PropertySchema) -> Result<(), String> {
        match self {
            VerifierExpr::True => Ok(()),
            VerifierExpr::Compare { lhs, op, rhs } => {
                let lk = &schema
                    .properties()
                    .get(lhs.property)
                    .ok_or_else(|| format!("property index {} out of range", lhs.property))?
                    .kind;
                match rhs {
                    Operand::Property(r) => {
                        let rk = &schema
                            .properties()
                            .get(r.property)
                            .ok_or_else(|| format!("property index {} out of range", r.property))?
                            .kind;
                        let compatible = match (lk, rk) {
                            (PropertyKind::Int { .. }, PropertyKind::Int { .. }) => true,
                            (PropertyKind::Bool, PropertyKind::Bool) => true,
                            (PropertyKind::Enum { values: a }, PropertyKind::Enum { values: b }) => a == b,
                            _ => false,
                        };
                        if !compatible {
                            return Err(format!(
                                "cannot compare `{}` with `{}`",
                                schema.properties()[lhs.property].name,
                                schema.properties()[r.property].name
                            ));
                        }
                    }
                    Operand::Literal(v) => {
                        let ok = matches!(
                            (lk, v),
                            (PropertyKind::Int { .. }, Value::Int(_)) | (PropertyKind::Bool, Value::Bool(_))
                        ) || matches!((lk, v), (PropertyKind::Enum { values }, Value::Enum(i)) if *i < values.len());
                        if !ok {
                            return Err(format!(
                                "literal does not match the type of `{}`",
                                schema.properties()[lhs.property].name
                            ));
                        }
                    }
                }
                if op.is_ordering() && !matches!(lk, PropertyKind::Int { .. }) {
                    return Err(format!(
                        "`{}` only applies to integer properties, `{}` is {}",
                        op.symbol(),
                        schema.properties()[lhs.property].name,
                        lk
                    ));
                }
                Ok(())
            }
            VerifierExpr::Not(e) => e.check(schema),
            VerifierExpr::And(a, b) | VerifierExpr::Or(a, b) => {
                a.check(schema)?;
                b.check(schema)
            }
        }
    }

    /// Renders in the culture-file syntax. `and` binds tighter than `or`.
    pub fn render(&self, schema: &PropertySchema) -> String {
        let mut out = String::new();
        self.write(schema, &mut out, Prec::Or);
        out
    }

    fn write(&self, schema: &PropertySchema, out: &mut String, ctx: Prec) {
        match self {
            VerifierExpr::True => out.push_str("true"),
            VerifierExpr::Compare { lhs, op, rhs } => {
                write_ref(schema, *lhs, out);
                let _ = write!(out, " {} ", op.symbol());
                match rhs {
                    Operand::Property(r) => write_ref(schema, *r, out),
                    Operand::Literal(v) => write_literal(schema, lhs.property, *v, out),
                }
            }
            VerifierExpr::Not(e) => {
                out.push_str("not ");
                e.write(schema, out, Prec::Atom);
            }
            VerifierExpr::And(a, b) => {
                let paren = ctx > Prec::And;
                if paren {
                    out.push('(');
                }
                a.write(schema, out, Prec::And);
                out.push_str(" and ");
                // Right operands that are themselves binary need parentheses
                // to survive the left-associative re-parse.
                b.write(schema, out, Prec::Atom);
                if paren {
                    out.push(')');
                }
            }
            VerifierExpr::Or(a, b) => {
                let paren = ctx > Prec::Or;
                if paren {
                    out.push('(');
                }
                a.write(schema, out, Prec::Or);
                out.push_str(" or ");
                b.write(schema, out, Prec::And);
                if paren {
                    out.push(')');
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Or,
    And,
    Atom,
}

fn read(r: PropertyRef, mover: &AgentContext, other: &AgentContext) -> Value {
    let ctx = match r.subject {
        Subject::Mover => mover,
        Subject::Other => other,
    };
    ctx.get(r.property).unwrap_or(Value::Bool(false))
}

fn write_ref(schema: &PropertySchema, r: PropertyRef, out: &mut String) {
    let who = match r.subject {
        Subject::Mover => "self",
        Subject::Other => "other",
    };
    let name = schema.properties().get(r.property).map(|p| p.name.as_str()).unwrap_or("?");
    let _ = write!(out, "{who}.{name}");
}

fn write_literal(schema: &PropertySchema, property: usize, v: Value, out: &mut String) {
    match v {
        Value::Int(x) => {
            let _ = write!(out, "{x}");
        }
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Enum(i) => match schema.properties().get(property).map(|p| &p.kind) {
            Some(PropertyKind::Enum { values }) if i < values.len() => out.push_str(&values[i]),
            _ => {
                let _ = write!(out, "<{i}>");
            }
        },
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subject::Mover => "self",
            Subject::Other => "other",
        })
    }
}
