//! State predicates over named automata (`Aut.State` atoms combined with
//! `not`, `and`, `or`) and the event-condition requirements built on them.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::automaton::StateId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    True,
    False,
    /// Automaton `automaton` is in state `state`.
    Atom { automaton: String, state: String },
    Not(Box<Predicate>),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

/// Serde adapter storing a predicate in its textual form.
pub mod text {
    use super::Predicate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Predicate, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&p.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Predicate, D::Error> {
        let text = String::deserialize(d)?;
        Predicate::parse(&text).map_err(serde::de::Error::custom)
    }
}

fn push_unique(out: &mut Vec<Predicate>, items: impl IntoIterator<Item = Predicate>) {
    for p in items {
        if !out.contains(&p) {
            out.push(p);
        }
    }
}

impl Predicate {
    pub fn atom(automaton: impl Into<String>, state: impl Into<String>) -> Self {
        Predicate::Atom { automaton: automaton.into(), state: state.into() }
    }

    /// Parses the textual form, e.g. `not Mode.Off and (S2.On or S3.On)`.
    pub fn parse(text: &str) -> Result<Self> {
        let toks = lex(text, 1, 1)?;
        let mut p = Parser { toks: &toks, pos: 0 };
        let out = p.or()?;
        if let Some(t) = p.toks.get(p.pos) {
            return Err(Error::Syntax { line: t.line, column: t.col, message: format!("unexpected `{}`", t.text) });
        }
        Ok(out)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Predicate) -> Self {
        match p {
            Predicate::True => Predicate::False,
            Predicate::False => Predicate::True,
            Predicate::Not(inner) => *inner,
            other => Predicate::Not(Box::new(other)),
        }
    }

    pub fn and(parts: impl IntoIterator<Item = Predicate>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Predicate::True => {}
                Predicate::False => return Predicate::False,
                Predicate::And(inner) => push_unique(&mut out, inner),
                other => push_unique(&mut out, [other]),
            }
        }
        match out.len() {
            0 => Predicate::True,
            1 => out.pop().unwrap(),
            _ => Predicate::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Predicate>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Predicate::False => {}
                Predicate::True => return Predicate::True,
                Predicate::Or(inner) => push_unique(&mut out, inner),
                other => push_unique(&mut out, [other]),
            }
        }
        match out.len() {
            0 => Predicate::False,
            1 => out.pop().unwrap(),
            _ => Predicate::Or(out),
        }
    }

    /// All `(automaton, state)` atoms.
    pub fn atoms(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        self.visit(&mut |a, s| {
            out.insert((a.to_string(), s.to_string()));
        });
        out
    }

    /// Names of the automata the predicate refers to.
    pub fn automata(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |a, _| {
            out.insert(a.to_string());
        });
        out
    }

    /// Same predicate with automaton names mapped through `f`.
    pub fn rename_automata(&self, f: &impl Fn(&str) -> String) -> Predicate {
        match self {
            Predicate::True => Predicate::True,
            Predicate::False => Predicate::False,
            Predicate::Atom { automaton, state } => Predicate::Atom { automaton: f(automaton), state: state.clone() },
            Predicate::Not(p) => Predicate::Not(Box::new(p.rename_automata(f))),
            Predicate::And(ps) => Predicate::And(ps.iter().map(|p| p.rename_automata(f)).collect()),
            Predicate::Or(ps) => Predicate::Or(ps.iter().map(|p| p.rename_automata(f)).collect()),
        }
    }

    fn visit(&self, f: &mut impl FnMut(&str, &str)) {
        match self {
            Predicate::True | Predicate::False => {}
            Predicate::Atom { automaton, state } => f(automaton, state),
            Predicate::Not(p) => p.visit(f),
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().for_each(|p| p.visit(f)),
        }
    }

    pub fn eval(&self, holds: &impl Fn(&str, &str) -> bool) -> bool {
        match self {
            Predicate::True => true,
            Predicate::False => false,
            Predicate::Atom { automaton, state } => holds(automaton, state),
            Predicate::Not(p) => !p.eval(holds),
            Predicate::And(ps) => ps.iter().all(|p| p.eval(holds)),
            Predicate::Or(ps) => ps.iter().any(|p| p.eval(holds)),
        }
    }

    /// Resolves atoms to `(slot, state)` pairs. `lookup` maps an atom to the
    /// tuple slot of its automaton and the state index, or `None` when
    /// either is unknown.
    pub fn compile(&self, lookup: &impl Fn(&str, &str) -> Option<(usize, StateId)>) -> Result<Compiled> {
        Ok(match self {
            Predicate::True => Compiled::Const(true),
            Predicate::False => Compiled::Const(false),
            Predicate::Atom { automaton, state } => match lookup(automaton, state) {
                Some((slot, s)) => Compiled::Atom(slot, s),
                None => return Err(Error::ModelReference(format!("unknown state `{automaton}.{state}`"))),
            },
            Predicate::Not(p) => Compiled::Not(Box::new(p.compile(lookup)?)),
            Predicate::And(ps) => Compiled::And(ps.iter().map(|p| p.compile(lookup)).collect::<Result<_>>()?),
            Predicate::Or(ps) => Compiled::Or(ps.iter().map(|p| p.compile(lookup)).collect::<Result<_>>()?),
        })
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // precedence: or = 0, and = 1, not/atom = 2
        match self {
            Predicate::True => write!(f, "true"),
            Predicate::False => write!(f, "false"),
            Predicate::Atom { automaton, state } => write!(f, "{automaton}.{state}"),
            Predicate::Not(p) => {
                write!(f, "not ")?;
                p.fmt_prec(f, 2)
            }
            Predicate::And(ps) | Predicate::Or(ps) => {
                let (own, sep) = if matches!(self, Predicate::And(_)) { (1, " and ") } else { (0, " or ") };
                if prec > own {
                    write!(f, "(")?;
                }
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{sep}")?;
                    }
                    p.fmt_prec(f, own + 1)?;
                }
                if prec > own {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// A predicate whose atoms index into a state tuple.
#[derive(Debug, Clone, PartialEq)]
pub enum Compiled {
    Const(bool),
    Atom(usize, StateId),
    Not(Box<Compiled>),
    And(Vec<Compiled>),
    Or(Vec<Compiled>),
}

impl Compiled {
    pub fn eval(&self, tuple: &[StateId]) -> bool {
        match self {
            Compiled::Const(b) => *b,
            Compiled::Atom(slot, s) => tuple[*slot] == *s,
            Compiled::Not(p) => !p.eval(tuple),
            Compiled::And(ps) => ps.iter().all(|p| p.eval(tuple)),
            Compiled::Or(ps) => ps.iter().any(|p| p.eval(tuple)),
        }
    }
}

/// `event needs condition`: the controllable `event` may only occur in
/// states where `condition` holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub name: String,
    pub event: String,
    pub condition: Predicate,
}

impl Requirement {
    pub fn new(name: impl Into<String>, event: impl Into<String>, condition: Predicate) -> Self {
        Requirement { name: name.into(), event: event.into(), condition }
    }

    /// Parses `<event> needs <predicate>` (without the `requirement` keyword).
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let toks = lex(text, 1, 1)?;
        let needs = toks
            .iter()
            .position(|t| t.text == "needs")
            .ok_or(Error::Syntax { line: 1, column: 1, message: "expected `needs`".into() })?;
        if needs != 1 || toks[0].kind != Tok::Ident {
            return Err(Error::Syntax { line: 1, column: 1, message: "expected `<event> needs <condition>`".into() });
        }
        let mut p = Parser { toks: &toks[2..], pos: 0 };
        let condition = p.or()?;
        if let Some(t) = p.toks.get(p.pos) {
            return Err(Error::Syntax { line: t.line, column: t.col, message: format!("unexpected `{}`", t.text) });
        }
        Ok(Requirement { name: name.into(), event: toks[0].text.clone(), condition })
    }

    /// Automata named in the condition.
    pub fn referenced_automata(&self) -> BTreeSet<String> {
        self.condition.automata()
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} needs {}", self.event, self.condition)
    }
}

/// Splits `A.B.State` into `("A.B", "State")`.
pub fn split_atom(text: &str) -> Option<(&str, &str)> {
    let dot = text.rfind('.')?;
    let (a, s) = (&text[..dot], &text[dot + 1..]);
    (!a.is_empty() && !s.is_empty()).then_some((a, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident,
    LParen,
    RParen,
    Punct,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub kind: Tok,
    pub text: String,
    pub line: usize,
    pub col: usize,
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '\'' | '-')
}

/// Tokenizes predicate text starting at the given position.
pub(crate) fn lex(text: &str, line0: usize, col0: usize) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let (mut line, mut col) = (line0, col0);
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        let start = col;
        if c == '(' || c == ')' {
            chars.next();
            col += 1;
            out.push(Token {
                kind: if c == '(' { Tok::LParen } else { Tok::RParen },
                text: c.to_string(),
                line,
                col: start,
            });
        } else if is_ident_char(c) && c != '-' && c != '\'' && c != '.' {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if is_ident_char(d) && !(d == '-' && s.ends_with('-')) {
                    // `-` only inside names, never `->`
                    if d == '-' {
                        let mut look = chars.clone();
                        look.next();
                        if look.peek() == Some(&'>') {
                            break;
                        }
                    }
                    s.push(d);
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            out.push(Token { kind: Tok::Ident, text: s, line, col: start });
        } else {
            chars.next();
            col += 1;
            out.push(Token { kind: Tok::Punct, text: c.to_string(), line, col: start });
        }
    }
    Ok(out)
}

pub(crate) struct Parser<'t> {
    pub toks: &'t [Token],
    pub pos: usize,
}

impl<'t> Parser<'t> {
    fn peek_word(&self, w: &str) -> bool {
        self.toks.get(self.pos).map(|t| t.kind == Tok::Ident && t.text == w).unwrap_or(false)
    }

    fn err_here(&self, message: &str) -> Error {
        match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) => Error::Syntax { line: t.line, column: t.col, message: message.to_string() },
            None => Error::Syntax { line: 1, column: 1, message: message.to_string() },
        }
    }

    pub fn or(&mut self) -> Result<Predicate> {
        let mut parts = vec![self.and()?];
        while self.peek_word("or") {
            self.pos += 1;
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Predicate::Or(parts) })
    }

    fn and(&mut self) -> Result<Predicate> {
        let mut parts = vec![self.unary()?];
        while self.peek_word("and") {
            self.pos += 1;
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Predicate::And(parts) })
    }

    fn unary(&mut self) -> Result<Predicate> {
        if self.peek_word("not") {
            self.pos += 1;
            return Ok(Predicate::Not(Box::new(self.unary()?)));
        }
        let t = self.toks.get(self.pos).ok_or_else(|| self.err_here("unexpected end of condition"))?;
        match t.kind {
            Tok::LParen => {
                self.pos += 1;
                let inner = self.or()?;
                match self.toks.get(self.pos) {
                    Some(t) if t.kind == Tok::RParen => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(self.err_here("expected `)`")),
                }
            }
            Tok::Ident if t.text == "true" => {
                self.pos += 1;
                Ok(Predicate::True)
            }
            Tok::Ident if t.text == "false" => {
                self.pos += 1;
                Ok(Predicate::False)
            }
            Tok::Ident if !matches!(t.text.as_str(), "and" | "or" | "needs") => {
                let (a, s) = split_atom(&t.text).ok_or(Error::Syntax {
                    line: t.line,
                    column: t.col,
                    message: format!("expected `Automaton.State`, found `{}`", t.text),
                })?;
                self.pos += 1;
                Ok(Predicate::atom(a, s))
            }
            _ => Err(self.err_here(&format!("unexpected `{}`", t.text))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_negated_atom() {
        let r = Requirement::parse("R1", "Pump1.c_on needs not Mode.Off").unwrap();
        assert_eq!(r.event, "Pump1.c_on");
        assert_eq!(r.condition, Predicate::Not(Box::new(Predicate::atom("Mode", "Off"))));
    }

    #[test]
    fn precedence_and_dotted_names() {
        let p = Predicate::parse("Mid.Mode.Empty and Mid.S2.On or Mid.Mode.Store and not (Mid.S5.Off)").unwrap();
        let expected = Predicate::Or(vec![
            Predicate::And(vec![Predicate::atom("Mid.Mode", "Empty"), Predicate::atom("Mid.S2", "On")]),
            Predicate::And(vec![
                Predicate::atom("Mid.Mode", "Store"),
                Predicate::Not(Box::new(Predicate::atom("Mid.S5", "Off"))),
            ]),
        ]);
        assert_eq!(p, expected);
    }

    #[test]
    fn syntax_errors_carry_columns() {
        match Predicate::parse("A.x and (B.y") {
            Err(Error::Syntax { column, .. }) => assert!(column >= 1),
            other => panic!("{other:?}"),
        }
        match Predicate::parse("A.x B.y") {
            Err(Error::Syntax { line: 1, column: 5, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(Predicate::parse("NoDot").is_err());
    }

    #[test]
    fn simplifying_constructors() {
        assert_eq!(Predicate::and([Predicate::True, Predicate::atom("A", "x")]), Predicate::atom("A", "x"));
        assert_eq!(Predicate::or([Predicate::False]), Predicate::False);
        assert_eq!(Predicate::not(Predicate::not(Predicate::atom("A", "x"))), Predicate::atom("A", "x"));
    }

    fn arb_pred() -> impl Strategy<Value = Predicate> {
        let leaf = prop_oneof![
            Just(Predicate::True),
            Just(Predicate::False),
            (0..3usize, 0..2usize).prop_map(|(a, s)| Predicate::atom(format!("G{a}"), format!("s{s}"))),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|p| Predicate::Not(Box::new(p))),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Predicate::And),
                prop::collection::vec(inner, 2..4).prop_map(Predicate::Or),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_preserves_meaning(p in arb_pred(), bits in 0u8..8) {
            let text = p.to_string();
            let q = Predicate::parse(&text).unwrap();
            let holds = |a: &str, s: &str| {
                let i: u32 = a[1..].parse().unwrap();
                let want = (bits >> i) & 1;
                s == format!("s{want}")
            };
            prop_assert_eq!(p.eval(&holds), q.eval(&holds));
            prop_assert_eq!(q.to_string(), text);
        }
    }
}
