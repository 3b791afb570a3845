//! Line-oriented culture file parser.
//!
//! ```text
//! culture "<name>"
//! property <name> : int <min>..<max> | bool | enum { v1, v2, ... }
//! proposition <id> "<text>"
//! rule <id> "<text>" when <verifier-expression>
//! attack <attacker-id> -> <target-id>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Declarations may
//! appear in any order; references are resolved once the whole file is read.

use std::collections::HashMap;

use super::expr::{CmpOp, Operand, PropertyRef, Subject, VerifierExpr};
use super::schema::{Property, PropertyKind, PropertySchema, Value};
use super::{Culture, CultureError, Rule, RuleKind};
use crate::argumentation::{ArgumentId, ArgumentationFramework};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Sym(&'static str),
}

const SYMBOLS: [&str; 14] = ["->", "..", "<=", ">=", "!=", "<", ">", "=", ":", "{", "}", ",", "(", ")"];

fn tokenize(line: &str, lineno: usize) -> Result<Vec<(usize, Tok)>, CultureError> {
    let err = |col: usize, msg: &str| CultureError::Parse { line: lineno, column: col + 1, message: msg.to_string() };
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < line.len() {
        let c = line[i..].chars().next().unwrap_or(' ');
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '"' {
            let start = i;
            i += 1;
            let mut text = String::new();
            while i < line.len() {
                let ch = line[i..].chars().next().unwrap_or('"');
                i += ch.len_utf8();
                match ch {
                    '"' => {
                        out.push((start, Tok::Str(text)));
                        continue 'outer;
                    }
                    '\\' => {
                        let esc = line[i..].chars().next().ok_or_else(|| err(i, "dangling escape"))?;
                        i += esc.len_utf8();
                        match esc {
                            '"' | '\\' => text.push(esc),
                            _ => return Err(err(i - 1, "unknown escape in string")),
                        }
                    }
                    ch => text.push(ch),
                }
            }
            return Err(err(start, "unterminated string"));
        }
        if c.is_ascii_digit() || (c == '-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            i += 1;
            while i < line.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = line[start..i].parse::<i64>().map_err(|_| err(start, "integer out of range"))?;
            out.push((start, Tok::Int(n)));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < line.len() {
                let ch = line[i..].chars().next().unwrap_or(' ');
                if ch.is_alphanumeric() || ch == '_' {
                    i += ch.len_utf8();
                } else {
                    break;
                }
            }
            out.push((start, Tok::Ident(line[start..i].to_string())));
            continue;
        }
        for sym in SYMBOLS {
            if line[i..].starts_with(sym) {
                out.push((i, Tok::Sym(sym)));
                i += sym.len();
                continue 'outer;
            }
        }
        if c == '.' {
            out.push((i, Tok::Sym(".")));
            i += 1;
            continue;
        }
        return Err(err(i, &format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    line: usize,
    line_len: usize,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [(usize, Tok)], line: usize, line_len: usize) -> Self {
        Cursor { toks, pos: 0, line, line_len }
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.line_len) + 1
    }

    fn error(&self, message: impl Into<String>) -> CultureError {
        CultureError::Parse { line: self.line, column: self.col(), message: message.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn ident(&mut self, what: &str) -> Result<String, CultureError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn string(&mut self, what: &str) -> Result<String, CultureError> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected quoted {what}"))),
        }
    }

    fn int(&mut self) -> Result<i64, CultureError> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.error("expected integer")),
        }
    }

    fn sym(&mut self, s: &'static str) -> Result<(), CultureError> {
        if self.peek() == Some(&Tok::Sym(s)) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`")))
        }
    }

    fn keyword(&mut self, k: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn end(&self) -> Result<(), CultureError> {
        if self.pos >= self.toks.len() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }
}

/// Expression syntax tree before property names are resolved.
#[derive(Debug)]
enum RawExpr {
    True,
    Compare { lhs: RawRef, op: CmpOp, rhs: RawOperand },
    Not(Box<RawExpr>),
    And(Box<RawExpr>, Box<RawExpr>),
    Or(Box<RawExpr>, Box<RawExpr>),
}

#[derive(Debug)]
struct RawRef {
    subject: Subject,
    name: String,
    column: usize,
}

#[derive(Debug)]
enum RawOperand {
    Ref(RawRef),
    Int(i64),
    Word(String, usize),
}

fn parse_expr(c: &mut Cursor) -> Result<RawExpr, CultureError> {
    let mut lhs = parse_and(c)?;
    while c.keyword("or") {
        let rhs = parse_and(c)?;
        lhs = RawExpr::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_and(c: &mut Cursor) -> Result<RawExpr, CultureError> {
    let mut lhs = parse_term(c)?;
    while c.keyword("and") {
        let rhs = parse_term(c)?;
        lhs = RawExpr::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_term(c: &mut Cursor) -> Result<RawExpr, CultureError> {
    if c.keyword("not") {
        return Ok(RawExpr::Not(Box::new(parse_term(c)?)));
    }
    if c.peek() == Some(&Tok::Sym("(")) {
        c.pos += 1;
        let e = parse_expr(c)?;
        c.sym(")")?;
        return Ok(e);
    }
    if c.keyword("true") {
        return Ok(RawExpr::True);
    }
    let lhs = parse_ref(c)?;
    let op = parse_cmp(c)?;
    let rhs = match c.peek() {
        Some(Tok::Ident(s)) if s == "self" || s == "other" => RawOperand::Ref(parse_ref(c)?),
        Some(Tok::Int(n)) => {
            let n = *n;
            c.pos += 1;
            RawOperand::Int(n)
        }
        Some(Tok::Ident(_)) => {
            let col = c.col();
            RawOperand::Word(c.ident("literal")?, col)
        }
        _ => return Err(c.error("expected a property reference or literal")),
    };
    Ok(RawExpr::Compare { lhs, op, rhs })
}

fn parse_ref(c: &mut Cursor) -> Result<RawRef, CultureError> {
    let column = c.col();
    let subject = if c.keyword("self") {
        Subject::Mover
    } else if c.keyword("other") {
        Subject::Other
    } else {
        return Err(c.error("expected `self.<property>` or `other.<property>`"));
    };
    c.sym(".")?;
    let name = c.ident("property name")?;
    Ok(RawRef { subject, name, column })
}

fn parse_cmp(c: &mut Cursor) -> Result<CmpOp, CultureError> {
    let op = match c.peek() {
        Some(Tok::Sym("<")) => CmpOp::Lt,
        Some(Tok::Sym("<=")) => CmpOp::Le,
        Some(Tok::Sym("=")) => CmpOp::Eq,
        Some(Tok::Sym("!=")) => CmpOp::Ne,
        Some(Tok::Sym(">=")) => CmpOp::Ge,
        Some(Tok::Sym(">")) => CmpOp::Gt,
        _ => return Err(c.error("expected a comparison operator")),
    };
    c.pos += 1;
    Ok(op)
}

fn parse_kind(c: &mut Cursor) -> Result<PropertyKind, CultureError> {
    if c.keyword("int") {
        let min = c.int()?;
        c.sym("..")?;
        let max = c.int()?;
        Ok(PropertyKind::Int { min, max })
    } else if c.keyword("bool") {
        Ok(PropertyKind::Bool)
    } else if c.keyword("enum") {
        c.sym("{")?;
        let mut values = vec![c.ident("enum value")?];
        while c.peek() == Some(&Tok::Sym(",")) {
            c.pos += 1;
            values.push(c.ident("enum value")?);
        }
        c.sym("}")?;
        Ok(PropertyKind::Enum { values })
    } else {
        Err(c.error("expected `int`, `bool` or `enum`"))
    }
}

struct Declared<T> {
    line: usize,
    item: T,
}

enum ArgDecl {
    Proposition { text: String },
    Rule { text: String, when: RawExpr },
}

/// Parses a culture file into a fully type-checked [`Culture`].
pub fn parse_culture(source: &str) -> Result<Culture, CultureError> {
    let mut name: Option<Declared<String>> = None;
    let mut properties: Vec<Declared<Property>> = Vec::new();
    let mut arguments: Vec<Declared<(String, ArgDecl)>> = Vec::new();
    let mut attacks: Vec<Declared<(String, usize, String, usize)>> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let toks = tokenize(line, lineno)?;
        let mut c = Cursor::new(&toks, lineno, line.len());
        let keyword = c.ident("a declaration keyword")?;
        match keyword.as_str() {
            "culture" => {
                if name.is_some() {
                    return Err(CultureError::Parse {
                        line: lineno,
                        column: 1,
                        message: "culture name declared twice".into(),
                    });
                }
                name = Some(Declared { line: lineno, item: c.string("culture name")? });
            }
            "property" => {
                let pname = c.ident("property name")?;
                c.sym(":")?;
                let kind = parse_kind(&mut c)?;
                properties.push(Declared { line: lineno, item: Property { name: pname, kind } });
            }
            "proposition" => {
                let id = c.ident("proposition id")?;
                let text = c.string("proposition text")?;
                arguments.push(Declared { line: lineno, item: (id, ArgDecl::Proposition { text }) });
            }
            "rule" => {
                let id = c.ident("rule id")?;
                let text = c.string("rule text")?;
                if !c.keyword("when") {
                    return Err(c.error("expected `when`"));
                }
                let when = parse_expr(&mut c)?;
                arguments.push(Declared { line: lineno, item: (id, ArgDecl::Rule { text, when }) });
            }
            "attack" => {
                let acol = c.col();
                let attacker = c.ident("attacker id")?;
                c.sym("->")?;
                let tcol = c.col();
                let target = c.ident("target id")?;
                attacks.push(Declared { line: lineno, item: (attacker, acol, target, tcol) });
            }
            other => {
                return Err(CultureError::Parse {
                    line: lineno,
                    column: 1,
                    message: format!("unknown declaration `{other}`"),
                })
            }
        }
        c.end()?;
    }

    let name = name.ok_or_else(|| CultureError::Parse {
        line: 1,
        column: 1,
        message: "missing `culture \"<name>\"` declaration".into(),
    })?;
    let _ = name.line;

    for (i, p) in properties.iter().enumerate() {
        if properties[..i].iter().any(|q| q.item.name == p.item.name) {
            return Err(CultureError::Parse {
                line: p.line,
                column: 1,
                message: format!("property `{}` declared twice", p.item.name),
            });
        }
    }
    let schema = PropertySchema::new(properties.iter().map(|p| p.item.clone()).collect()).map_err(|e| {
        // Attribute schema errors to the first property line they concern.
        let line = properties.first().map(|p| p.line).unwrap_or(1);
        CultureError::Parse { line, column: 1, message: e.to_string() }
    })?;

    let mut ids: HashMap<&str, usize> = HashMap::new();
    for (i, a) in arguments.iter().enumerate() {
        if ids.insert(a.item.0.as_str(), i).is_some() {
            return Err(CultureError::Parse {
                line: a.line,
                column: 1,
                message: format!("argument `{}` declared twice", a.item.0),
            });
        }
    }

    let mut rules = Vec::with_capacity(arguments.len());
    for a in &arguments {
        let (id, decl) = &a.item;
        let rule = match decl {
            ArgDecl::Proposition { text } => {
                Rule { id: id.clone(), text: text.clone(), kind: RuleKind::Proposition, verifier: VerifierExpr::True }
            }
            ArgDecl::Rule { text, when } => Rule {
                id: id.clone(),
                text: text.clone(),
                kind: RuleKind::Rule,
                verifier: resolve(when, &schema, a.line)?,
            },
        };
        rules.push(rule);
    }

    let mut pairs = Vec::with_capacity(attacks.len());
    for at in &attacks {
        let (attacker, acol, target, tcol) = &at.item;
        let lookup = |name: &str, col: usize| {
            ids.get(name).copied().ok_or_else(|| CultureError::Parse {
                line: at.line,
                column: col + 1,
                message: format!("attack references undeclared argument `{name}`"),
            })
        };
        pairs.push((ArgumentId::from(lookup(attacker, *acol)?), ArgumentId::from(lookup(target, *tcol)?)));
    }

    let labels = rules.iter().map(|r| r.id.clone()).collect();
    let framework = ArgumentationFramework::new(labels, pairs)?;
    Culture::new(name.item, schema, framework, rules)
}

fn resolve(e: &RawExpr, schema: &PropertySchema, line: usize) -> Result<VerifierExpr, CultureError> {
    let err = |column: usize, message: String| CultureError::Parse { line, column, message };
    Ok(match e {
        RawExpr::True => VerifierExpr::True,
        RawExpr::Not(inner) => VerifierExpr::Not(Box::new(resolve(inner, schema, line)?)),
        RawExpr::And(a, b) => {
            VerifierExpr::And(Box::new(resolve(a, schema, line)?), Box::new(resolve(b, schema, line)?))
        }
        RawExpr::Or(a, b) => VerifierExpr::Or(Box::new(resolve(a, schema, line)?), Box::new(resolve(b, schema, line)?)),
        RawExpr::Compare { lhs, op, rhs } => {
            let lref = resolve_ref(lhs, schema).map_err(|m| err(lhs.column, m))?;
            let lprop = &schema.properties()[lref.property];
            let rhs = match rhs {
                RawOperand::Ref(r) => Operand::Property(resolve_ref(r, schema).map_err(|m| err(r.column, m))?),
                RawOperand::Int(n) => Operand::Literal(Value::Int(*n)),
                RawOperand::Word(w, col) => {
                    let v = match (&lprop.kind, w.as_str()) {
                        (PropertyKind::Bool, "true") => Value::Bool(true),
                        (PropertyKind::Bool, "false") => Value::Bool(false),
                        (PropertyKind::Enum { values }, w) => match values.iter().position(|v| v == w) {
                            Some(i) => Value::Enum(i),
                            None => return Err(err(*col, format!("`{w}` is not a value of `{}`", lprop.name))),
                        },
                        _ => {
                            return Err(err(*col, format!("literal `{w}` does not match the type of `{}`", lprop.name)))
                        }
                    };
                    Operand::Literal(v)
                }
            };
            let expr = VerifierExpr::Compare { lhs: lref, op: *op, rhs };
            expr.check(schema).map_err(|m| err(lhs.column, m))?;
            expr
        }
    })
}

fn resolve_ref(r: &RawRef, schema: &PropertySchema) -> Result<PropertyRef, String> {
    schema
        .index_of(&r.name)
        .map(|property| PropertyRef { subject: r.subject, property })
        .ok_or_else(|| format!("unknown property `{}`", r.name))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EASY: &str = r#"
culture "easy"
property rank : int 1..5
property tasked : bool
proposition mu "right of way"
rule a "higher rank" when self.rank > other.rank
rule b "tasked overrides rank" when self.tasked = true and other.tasked = false
attack a -> mu
attack b -> mu
attack b -> a
"#;

    fn parse_err(src: &str) -> (usize, String) {
        match parse_culture(src) {
            Err(CultureError::Parse { line, message, .. }) => (line, message),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_the_easy_culture() {
        let c = parse_culture(EASY).unwrap();
        assert_eq!(c.name(), "easy");
        assert_eq!(c.framework().labels(), &["mu", "a", "b"]);
        let attacks: Vec<_> = c.framework().attack_pairs().map(|(a, b)| (a.0, b.0)).collect();
        assert_eq!(attacks, vec![(1, 0), (2, 0), (2, 1)]);
        assert_eq!(c.propositions().len(), 1);
        assert_eq!(c.rule_count(), 2);
    }

    #[test]
    fn reports_positions() {
        let (line, msg) =
            parse_err("culture \"x\"\nproperty r : int 1..3\nproposition mu \"m\"\nrule a \"t\" when self.speed > 1\n");
        assert_eq!(line, 4);
        assert!(msg.contains("unknown property"), "{msg}");

        let (line, msg) = parse_err("culture \"x\"\nproposition mu \"m\"\nattack z -> mu\n");
        assert_eq!(line, 3);
        assert!(msg.contains("undeclared"), "{msg}");

        let (line, _) = parse_err("culture \"x\"\nproposition mu \"m\n");
        assert_eq!(line, 2);

        let (line, msg) =
            parse_err("culture \"x\"\nproperty t : bool\nproposition mu \"m\"\nrule a \"t\" when self.t > other.t\n");
        assert_eq!(line, 4);
        assert!(msg.contains("integer"), "{msg}");

        let (line, msg) =
            parse_err("culture \"x\"\nproperty t : bool\nproposition mu \"m\"\nrule a \"t\" when self.t = 3\n");
        assert_eq!(line, 4);
        assert!(msg.contains("type"), "{msg}");
    }

    #[test]
    fn rejects_empty_proposition_set() {
        let src = "culture \"x\"\nproperty r : int 1..3\nrule a \"t\" when self.r > other.r\n";
        assert!(matches!(parse_culture(src), Err(CultureError::NoPropositions)));
    }

    #[test]
    fn operator_precedence() {
        let src = "culture \"x\"\nproperty p : bool\nproposition mu \"m\"\nrule a \"t\" when self.p = true or self.p = false and other.p = true\n";
        let c = parse_culture(src).unwrap();
        let v = &c.rule(ArgumentId(1)).unwrap().verifier;
        assert!(matches!(v, VerifierExpr::Or(_, rhs) if matches!(**rhs, VerifierExpr::And(_, _))));
    }

    #[test]
    fn comments_and_blank_lines() {
        let src = "# header\nculture \"x\"\n\n   # indented comment\nproposition mu \"m\"\n";
        assert!(parse_culture(src).is_ok());
    }
}
