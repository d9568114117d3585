//! Textual model format: plant automata and `needs` requirements.
//!
//! ```text
//! model pump version 1;
//! plant Pump1 {
//!     states Off*, On;
//!     initial Off;
//!     edge Off -c_on-> On;
//!     edge On -c_off-> Off;
//! }
//! plant Sensor { states Off*, On; initial Off; uncontrollable u_on, u_off;
//!     edge Off -u_on-> On; edge On -u_off-> Off; }
//! requirement Pump1.c_on needs not Mode.Off;
//! requirement R7: Pump1.c_off needs Mode.Off or not Sensor.On;
//! ```
//!
//! A trailing `*` or a `marked` statement marks states. Event labels without
//! a dot are qualified with the plant name (`c_on` in `Pump1` is
//! `Pump1.c_on`) unless the plant declares `scope global;`. Labels are
//! controllable unless listed as `uncontrollable`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::automaton::{Automaton, AutomatonBuilder, Event};
use crate::error::{Error, Result};
use crate::ops::ComposedSystem;
use crate::predicate::{lex, Parser, Requirement, Tok, Token};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelDocument {
    pub name: Option<String>,
    pub version: Option<String>,
    pub plants: Vec<Automaton>,
    pub requirements: Vec<Requirement>,
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<ModelDocument> {
        parse_model(text)
    }

    pub fn to_text(&self) -> String {
        print_model(self)
    }

    pub fn system(&self) -> Result<ComposedSystem> {
        ComposedSystem::new(self.plants.clone())
    }

    pub fn plant(&self, name: &str) -> Option<&Automaton> {
        self.plants.iter().find(|p| p.name() == name)
    }
}

fn strip_comments(text: &str) -> String {
    text.lines()
        .map(|l| {
            let cut = [l.find("//"), l.find('#')].into_iter().flatten().min();
            match cut {
                Some(i) => format!("{}{}", &l[..i], " ".repeat(l[i..].chars().count())),
                None => l.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let (line, column) = match self.peek().or(self.toks.last()) {
            Some(t) => (t.line, t.col),
            None => (1, 1),
        };
        Error::Syntax { line, column, message: message.into() }
    }

    fn ident(&mut self, what: &str) -> Result<Token> {
        match self.peek() {
            Some(t) if t.kind == Tok::Ident => {
                let t = t.clone();
                self.pos += 1;
                Ok(t)
            }
            Some(t) => Err(self.err(format!("expected {what}, found `{}`", t.text))),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn punct(&mut self, p: &str) -> Result<()> {
        match self.peek() {
            Some(t) if t.text == p && t.kind != Tok::Ident => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err(format!("expected `{p}`, found `{}`", t.text))),
            None => Err(self.err(format!("expected `{p}`, found end of input"))),
        }
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(t) if t.text == p && t.kind != Tok::Ident)
    }

    /// Comma-separated identifiers up to `;`.
    fn ident_list(&mut self, what: &str) -> Result<Vec<Token>> {
        let mut out = vec![self.ident(what)?];
        while self.at_punct(",") {
            self.pos += 1;
            out.push(self.ident(what)?);
        }
        self.punct(";")?;
        Ok(out)
    }
}

pub fn parse_model(text: &str) -> Result<ModelDocument> {
    let toks = lex(&strip_comments(text), 1, 1)?;
    let mut c = Cursor { toks, pos: 0 };
    let mut doc = ModelDocument::default();
    let mut pending_reqs: Vec<(Token, Requirement)> = Vec::new();
    while let Some(t) = c.peek().cloned() {
        match (t.kind, t.text.as_str()) {
            (Tok::Ident, "model") => {
                c.pos += 1;
                doc.name = Some(c.ident("model name")?.text);
                if matches!(c.peek(), Some(t) if t.text == "version") {
                    c.pos += 1;
                    doc.version = Some(c.ident("version")?.text);
                }
                c.punct(";")?;
            }
            (Tok::Ident, "plant") => {
                c.pos += 1;
                let p = parse_plant(&mut c)?;
                if doc.plants.iter().any(|q| q.name() == p.name()) {
                    return Err(Error::Syntax { line: t.line, column: t.col, message: format!("duplicate plant `{}`", p.name()) });
                }
                doc.plants.push(p);
            }
            (Tok::Ident, "requirement") => {
                c.pos += 1;
                let (tok, r) = parse_requirement(&mut c, pending_reqs.len() + 1)?;
                if pending_reqs.iter().any(|(_, q)| q.name == r.name) {
                    return Err(Error::Syntax { line: tok.line, column: tok.col, message: format!("duplicate requirement `{}`", r.name) });
                }
                pending_reqs.push((tok, r));
            }
            _ => return Err(c.err(format!("expected `model`, `plant` or `requirement`, found `{}`", t.text))),
        }
    }
    let ctrl: BTreeMap<&str, bool> =
        doc.plants.iter().flat_map(|p| p.events().iter().map(|e| (e.name.as_str(), e.controllable))).collect();
    for (tok, r) in &pending_reqs {
        match ctrl.get(r.event.as_str()) {
            Some(true) => {}
            Some(false) => {
                return Err(Error::Syntax {
                    line: tok.line,
                    column: tok.col,
                    message: format!("requirement on uncontrollable event `{}`", r.event),
                })
            }
            None => {
                return Err(Error::Syntax { line: tok.line, column: tok.col, message: format!("unknown event `{}`", r.event) })
            }
        }
        for (a, s) in r.condition.atoms() {
            if !doc.plants.iter().any(|p| p.name() == a && p.state_index(&s).is_some()) {
                return Err(Error::Syntax { line: tok.line, column: tok.col, message: format!("unknown state `{a}.{s}`") });
            }
        }
    }
    doc.requirements = pending_reqs.into_iter().map(|(_, r)| r).collect();
    Ok(doc)
}

fn parse_plant(c: &mut Cursor) -> Result<Automaton> {
    let name = c.ident("plant name")?.text;
    c.punct("{")?;
    let mut global = false;
    let mut states: Vec<(Token, bool)> = Vec::new();
    let mut initial: Option<Token> = None;
    let mut marked: Vec<Token> = Vec::new();
    let mut unc: Vec<Token> = Vec::new();
    let mut ctl: Vec<Token> = Vec::new();
    let mut edges: Vec<(Token, Token, Token)> = Vec::new();
    while !c.at_punct("}") {
        let kw = c.ident("plant statement")?;
        match kw.text.as_str() {
            "states" => loop {
                let s = c.ident("state name")?;
                let star = c.at_punct("*");
                if star {
                    c.pos += 1;
                }
                if states.iter().any(|(t, _)| t.text == s.text) {
                    return Err(Error::Syntax { line: s.line, column: s.col, message: format!("duplicate state `{}`", s.text) });
                }
                states.push((s, star));
                if c.at_punct(",") {
                    c.pos += 1;
                } else {
                    c.punct(";")?;
                    break;
                }
            },
            "initial" => {
                initial = Some(c.ident("initial state")?);
                c.punct(";")?;
            }
            "marked" => marked.extend(c.ident_list("state name")?),
            "uncontrollable" => unc.extend(c.ident_list("event name")?),
            "controllable" => ctl.extend(c.ident_list("event name")?),
            "scope" => {
                let s = c.ident("`global`")?;
                if s.text != "global" {
                    return Err(Error::Syntax { line: s.line, column: s.col, message: "expected `global`".into() });
                }
                global = true;
                c.punct(";")?;
            }
            "edge" => {
                let src = c.ident("source state")?;
                c.punct("-")?;
                let ev = c.ident("event label")?;
                c.punct("-")?;
                c.punct(">")?;
                let tgt = c.ident("target state")?;
                c.punct(";")?;
                edges.push((src, ev, tgt));
            }
            other => {
                return Err(Error::Syntax { line: kw.line, column: kw.col, message: format!("unknown plant statement `{other}`") })
            }
        }
    }
    c.punct("}")?;

    let qualify = |label: &str| if global || label.contains('.') { label.to_string() } else { format!("{name}.{label}") };
    for m in &marked {
        match states.iter_mut().find(|(s, _)| s.text == m.text) {
            Some(entry) => entry.1 = true,
            None => return Err(undeclared(m, &name)),
        }
    }
    let mut b = AutomatonBuilder::new(name.clone());
    let mut ids = BTreeMap::new();
    for (s, star) in &states {
        ids.insert(s.text.clone(), b.state(s.text.clone(), *star));
    }
    let lookup = |t: &Token| ids.get(&t.text).copied().ok_or_else(|| undeclared(t, &name));
    match &initial {
        Some(t) => b.initial(lookup(t)?),
        None => return Err(c.err(format!("plant `{name}` has no initial state"))),
    };
    let unc_names: BTreeSet<String> = unc.iter().map(|t| qualify(&t.text)).collect();
    for t in &ctl {
        let q = qualify(&t.text);
        if unc_names.contains(&q) {
            return Err(Error::Syntax { line: t.line, column: t.col, message: format!("event `{q}` declared both ways") });
        }
        b.event(Event::controllable(q))?;
    }
    for n in &unc_names {
        b.event(Event::uncontrollable(n.clone()))?;
    }
    for (src, ev, tgt) in &edges {
        let q = qualify(&ev.text);
        b.controllable(&q);
        b.edge(lookup(src)?, &q, lookup(tgt)?)?;
    }
    b.build().map_err(|e| match e {
        Error::InvalidAutomaton { reason, .. } => {
            let t = edges.first().map(|e| &e.0);
            Error::Syntax { line: t.map_or(1, |t| t.line), column: t.map_or(1, |t| t.col), message: reason }
        }
        other => other,
    })
}

fn undeclared(t: &Token, plant: &str) -> Error {
    Error::Syntax { line: t.line, column: t.col, message: format!("undeclared state `{}` in plant `{plant}`", t.text) }
}

fn parse_requirement(c: &mut Cursor, index: usize) -> Result<(Token, Requirement)> {
    let first = c.ident("event or requirement name")?;
    let (name, event) = if c.at_punct(":") {
        c.pos += 1;
        (first.text.clone(), c.ident("event name")?)
    } else {
        (format!("R{index}"), first.clone())
    };
    let kw = c.ident("`needs`")?;
    if kw.text != "needs" {
        return Err(Error::Syntax { line: kw.line, column: kw.col, message: format!("expected `needs`, found `{}`", kw.text) });
    }
    let end = c.toks[c.pos..]
        .iter()
        .position(|t| t.text == ";" && t.kind == Tok::Punct)
        .map(|i| c.pos + i)
        .ok_or_else(|| c.err("missing `;` after requirement"))?;
    let mut p = Parser { toks: &c.toks[c.pos..end], pos: 0 };
    let condition = p.or()?;
    if p.pos != end - c.pos {
        let t = &c.toks[c.pos + p.pos];
        return Err(Error::Syntax { line: t.line, column: t.col, message: format!("unexpected `{}`", t.text) });
    }
    c.pos = end + 1;
    Ok((first, Requirement { name, event: event.text, condition }))
}

pub fn print_model(doc: &ModelDocument) -> String {
    let mut out = String::new();
    if let Some(n) = &doc.name {
        match &doc.version {
            Some(v) => writeln!(out, "model {n} version {v};").unwrap(),
            None => writeln!(out, "model {n};").unwrap(),
        }
        out.push('\n');
    }
    for p in &doc.plants {
        print_plant(&mut out, p);
        out.push('\n');
    }
    for r in &doc.requirements {
        writeln!(out, "requirement {}: {} needs {};", r.name, r.event, r.condition).unwrap();
    }
    out
}

fn print_plant(out: &mut String, p: &Automaton) {
    let prefix = format!("{}.", p.name());
    let short = |e: &str| -> Option<String> {
        match e.strip_prefix(&prefix) {
            Some(rest) if !rest.contains('.') => Some(rest.to_string()),
            _ if e.contains('.') => Some(e.to_string()),
            _ => None,
        }
    };
    let global = p.events().iter().any(|e| short(&e.name).is_none());
    let label = |e: &str| if global { e.to_string() } else { short(e).expect("checked") };
    writeln!(out, "plant {} {{", p.name()).unwrap();
    if global {
        writeln!(out, "    scope global;").unwrap();
    }
    let states: Vec<String> = (0..p.num_states() as u32)
        .map(|s| format!("{}{}", p.state_name(s), if p.is_marked(s) { "*" } else { "" }))
        .collect();
    writeln!(out, "    states {};", states.join(", ")).unwrap();
    writeln!(out, "    initial {};", p.state_name(p.initial())).unwrap();
    let unc: Vec<String> = p.events().iter().filter(|e| !e.controllable).map(|e| label(&e.name)).collect();
    if !unc.is_empty() {
        writeln!(out, "    uncontrollable {};", unc.join(", ")).unwrap();
    }
    let used: BTreeSet<&str> = p.transitions().map(|(_, e, _)| e).collect();
    let idle: Vec<String> =
        p.events().iter().filter(|e| e.controllable && !used.contains(e.name.as_str())).map(|e| label(&e.name)).collect();
    if !idle.is_empty() {
        writeln!(out, "    controllable {};", idle.join(", ")).unwrap();
    }
    for (s, e, t) in p.transitions() {
        writeln!(out, "    edge {} -{}-> {};", p.state_name(s), label(e), p.state_name(t)).unwrap();
    }
    out.push_str("}\n");
}

#[cfg(test)]
mod tests {
    use super::*;

    const PUMP: &str = "
        // pump
        plant Pump1 {
            states Off*, On;
            initial Off;
            edge Off -c_on-> On;
            edge On -c_off-> Off;
        }
        plant Mode {
            states Empty, Store, Off;
            initial Empty;
            marked Empty;
            edge Empty -c_off-> Off;
            edge Off -c_empty-> Empty;
        }
        requirement Pump1.c_on needs not Mode.Off;
    ";

    #[test]
    fn parses_pump_and_requirement() {
        let doc = parse_model(PUMP).unwrap();
        let p = doc.plant("Pump1").unwrap();
        assert_eq!(p.num_states(), 2);
        assert!(p.is_marked(p.state_index("Off").unwrap()));
        assert_eq!(p.event_names().collect::<Vec<_>>(), ["Pump1.c_off", "Pump1.c_on"]);
        assert!(p.accepts(&["Pump1.c_on", "Pump1.c_off"]));
        let r = &doc.requirements[0];
        assert_eq!(r.name, "R1");
        assert_eq!(r.event, "Pump1.c_on");
        assert_eq!(r.condition.to_string(), "not Mode.Off");
    }

    #[test]
    fn empty_file() {
        assert_eq!(parse_model("").unwrap(), ModelDocument::default());
        assert_eq!(parse_model("  // only a comment\n").unwrap(), ModelDocument::default());
    }

    #[test]
    fn round_trip() {
        let doc = parse_model(PUMP).unwrap();
        let again = parse_model(&print_model(&doc)).unwrap();
        assert_eq!(doc, again);
        let toy = ModelDocument { plants: vec![crate::toys::race_supervisor()], ..Default::default() };
        assert_eq!(parse_model(&print_model(&toy)).unwrap(), toy);
    }

    fn err_at(text: &str) -> (usize, usize, String) {
        match parse_model(text) {
            Err(Error::Syntax { line, column, message }) => (line, column, message),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn diagnostics() {
        let (l, c, m) = err_at("plant A {\n  states x;\n  initial x;\n  edge x -e-> y;\n}");
        assert_eq!((l, c), (4, 15), "{m}");
        assert!(m.contains("undeclared state"));
        let (l, _, m) = err_at("plant A { states x; initial x; }\nplant A { states x; initial x; }");
        assert_eq!(l, 2);
        assert!(m.contains("duplicate plant"));
        let (_, _, m) = err_at("plant A { states x; initial x; uncontrollable u; edge x -u-> x; }\nrequirement A.u needs A.x;");
        assert!(m.contains("uncontrollable"));
        let (l, c, _) = err_at("plant A { states x; initial x }");
        assert_eq!((l, c), (1, 31));
        let (_, _, m) = err_at("plant A { states x, x; initial x; }");
        assert!(m.contains("duplicate state"));
    }

    #[test]
    fn named_requirements_and_global_scope() {
        let doc = parse_model(
            "plant F { scope global; states a*, b; initial a; edge a -go-> b; edge b -Other.back-> a; }
             requirement Keep: go needs F.a;",
        )
        .unwrap();
        assert_eq!(doc.requirements[0].name, "Keep");
        assert!(doc.plants[0].has_event("go"));
        assert!(doc.plants[0].has_event("Other.back"));
    }
}
