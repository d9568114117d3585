//! Deterministic finite automata with a controllable/uncontrollable event
//! partition and marked states.
//!
//! States are dense indices; their human-readable names live in a side
//! table. Events are global names: two automata that mention the same event
//! name synchronize on it when composed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = u32;

/// An event label together with its controllability flag.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub controllable: bool,
}

impl Event {
    pub fn controllable(name: impl Into<String>) -> Self {
        Event { name: name.into(), controllable: true }
    }

    pub fn uncontrollable(name: impl Into<String>) -> Self {
        Event { name: name.into(), controllable: false }
    }
}

/// A finite sequence of event names; the empty trace is ε.
pub type Trace = Vec<String>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Automaton {
    name: String,
    /// Sorted by name, no duplicates.
    events: Vec<Event>,
    states: Vec<String>,
    initial: StateId,
    marked: Vec<bool>,
    /// Per state, outgoing `(event index, target)` sorted by event index.
    delta: Vec<Vec<(u32, StateId)>>,
}

impl Automaton {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event_names(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.name.as_str())
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.events.iter().map(|e| e.name.clone()).collect()
    }

    pub fn event_index(&self, name: &str) -> Option<u32> {
        self.events
            .binary_search_by(|e| e.name.as_str().cmp(name))
            .ok()
            .map(|i| i as u32)
    }

    pub fn event(&self, idx: u32) -> &Event {
        &self.events[idx as usize]
    }

    pub fn has_event(&self, name: &str) -> bool {
        self.event_index(name).is_some()
    }

    pub fn is_controllable(&self, name: &str) -> Option<bool> {
        self.event_index(name).map(|i| self.events[i as usize].controllable)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.delta.iter().map(Vec::len).sum()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s as usize]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(|i| i as StateId)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn is_marked(&self, s: StateId) -> bool {
        self.marked[s as usize]
    }

    pub fn marked_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.marked
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| i as StateId)
    }

    pub fn step_idx(&self, s: StateId, ev: u32) -> Option<StateId> {
        let out = &self.delta[s as usize];
        out.binary_search_by_key(&ev, |(e, _)| *e).ok().map(|i| out[i].1)
    }

    pub fn step(&self, s: StateId, event: &str) -> Option<StateId> {
        self.event_index(event).and_then(|e| self.step_idx(s, e))
    }

    /// Outgoing `(event index, target)` pairs of `s`.
    pub fn outgoing(&self, s: StateId) -> &[(u32, StateId)] {
        &self.delta[s as usize]
    }

    pub fn enabled(&self, s: StateId) -> impl Iterator<Item = &str> + '_ {
        self.delta[s as usize]
            .iter()
            .map(|(e, _)| self.events[*e as usize].name.as_str())
    }

    pub fn transitions(&self) -> impl Iterator<Item = (StateId, &str, StateId)> + '_ {
        self.delta.iter().enumerate().flat_map(move |(s, out)| {
            out.iter()
                .map(move |(e, t)| (s as StateId, self.events[*e as usize].name.as_str(), *t))
        })
    }

    /// Runs a trace from the initial state.
    pub fn run<S: AsRef<str>>(&self, trace: &[S]) -> Option<StateId> {
        let mut s = self.initial;
        for e in trace {
            s = self.step(s, e.as_ref())?;
        }
        Some(s)
    }

    pub fn accepts<S: AsRef<str>>(&self, trace: &[S]) -> bool {
        self.run(trace).is_some()
    }

    pub fn accepts_marked<S: AsRef<str>>(&self, trace: &[S]) -> bool {
        self.run(trace).map(|s| self.is_marked(s)).unwrap_or(false)
    }

    /// Returns a copy with every event renamed through `map`; unmapped events
    /// keep their names.
    pub fn rename_events(&self, map: &BTreeMap<String, String>) -> Result<Automaton> {
        let mut b = AutomatonBuilder::new(self.name.clone());
        for ev in &self.events {
            let name = map.get(&ev.name).cloned().unwrap_or_else(|| ev.name.clone());
            b.event(Event { name, controllable: ev.controllable })?;
        }
        for (i, s) in self.states.iter().enumerate() {
            b.state(s.clone(), self.marked[i]);
        }
        b.initial(self.initial);
        for (s, e, t) in self.transitions() {
            let name = map.get(e).map(String::as_str).unwrap_or(e);
            b.edge(s, name, t)?;
        }
        b.build()
    }

    /// Same automaton with different controllability flags for the listed events.
    pub fn with_controllability(&self, flags: &BTreeMap<String, bool>) -> Automaton {
        let mut a = self.clone();
        for ev in &mut a.events {
            if let Some(c) = flags.get(&ev.name) {
                ev.controllable = *c;
            }
        }
        a
    }

    pub fn with_all_marked(&self) -> Automaton {
        let mut a = self.clone();
        a.marked.iter_mut().for_each(|m| *m = true);
        a
    }

    pub(crate) fn from_raw(
        name: String,
        events: Vec<Event>,
        states: Vec<String>,
        initial: StateId,
        marked: Vec<bool>,
        delta: Vec<Vec<(u32, StateId)>>,
    ) -> Automaton {
        debug_assert!(events.windows(2).all(|w| w[0].name < w[1].name));
        Automaton { name, events, states, initial, marked, delta }
    }

    pub fn to_doc(&self) -> AutomatonDoc {
        AutomatonDoc {
            name: self.name.clone(),
            events: self.events.clone(),
            states: self.states.clone(),
            initial: self.states[self.initial as usize].clone(),
            marked: self.marked_states().map(|s| self.states[s as usize].clone()).collect(),
            transitions: self
                .transitions()
                .map(|(s, e, t)| {
                    (self.states[s as usize].clone(), e.to_string(), self.states[t as usize].clone())
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("automaton serializes")
    }

    pub fn from_json(text: &str) -> Result<Automaton> {
        let doc: AutomatonDoc = serde_json::from_str(text)?;
        Automaton::from_doc(&doc)
    }

    pub fn from_doc(doc: &AutomatonDoc) -> Result<Automaton> {
        let mut b = AutomatonBuilder::new(doc.name.clone());
        for e in &doc.events {
            b.event(e.clone())?;
        }
        let marked: BTreeSet<&String> = doc.marked.iter().collect();
        let mut ids = BTreeMap::new();
        for s in &doc.states {
            if ids.contains_key(s) {
                return Err(invalid(&doc.name, format!("duplicate state `{s}`")));
            }
            ids.insert(s.clone(), b.state(s.clone(), marked.contains(s)));
        }
        for m in &doc.marked {
            if !ids.contains_key(m) {
                return Err(invalid(&doc.name, format!("marked state `{m}` is not declared")));
            }
        }
        let lookup = |s: &String| {
            ids.get(s)
                .copied()
                .ok_or_else(|| invalid(&doc.name, format!("unknown state `{s}`")))
        };
        b.initial(lookup(&doc.initial)?);
        for (s, e, t) in &doc.transitions {
            b.edge(lookup(s)?, e, lookup(t)?)?;
        }
        b.build()
    }
}

impl fmt::Display for Automaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} states, {} events, {} transitions)",
            self.name,
            self.num_states(),
            self.events.len(),
            self.num_transitions()
        )
    }
}

fn invalid(name: &str, reason: String) -> Error {
    Error::InvalidAutomaton { automaton: name.to_string(), reason }
}

/// JSON wire form: states referenced by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutomatonDoc {
    pub name: String,
    pub events: Vec<Event>,
    pub states: Vec<String>,
    pub initial: String,
    pub marked: Vec<String>,
    pub transitions: Vec<(String, String, String)>,
}

/// Incremental constructor enforcing the automaton invariants.
#[derive(Debug, Clone)]
pub struct AutomatonBuilder {
    name: String,
    events: BTreeMap<String, bool>,
    states: Vec<String>,
    marked: Vec<bool>,
    initial: Option<StateId>,
    edges: Vec<(StateId, String, StateId)>,
}

impl AutomatonBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        AutomatonBuilder {
            name: name.into(),
            events: BTreeMap::new(),
            states: Vec::new(),
            marked: Vec::new(),
            initial: None,
            edges: Vec::new(),
        }
    }

    pub fn event(&mut self, ev: Event) -> Result<&mut Self> {
        match self.events.get(&ev.name) {
            Some(c) if *c != ev.controllable => {
                return Err(Error::ControllabilityConflict { event: ev.name })
            }
            _ => {
                self.events.insert(ev.name, ev.controllable);
            }
        }
        Ok(self)
    }

    pub fn controllable(&mut self, name: &str) -> &mut Self {
        self.events.entry(name.to_string()).or_insert(true);
        self
    }

    pub fn uncontrollable(&mut self, name: &str) -> &mut Self {
        self.events.entry(name.to_string()).or_insert(false);
        self
    }

    pub fn state(&mut self, name: impl Into<String>, marked: bool) -> StateId {
        self.states.push(name.into());
        self.marked.push(marked);
        (self.states.len() - 1) as StateId
    }

    pub fn initial(&mut self, s: StateId) -> &mut Self {
        self.initial = Some(s);
        self
    }

    /// Adds a transition; the event must already be declared.
    pub fn edge(&mut self, src: StateId, event: &str, tgt: StateId) -> Result<&mut Self> {
        if !self.events.contains_key(event) {
            return Err(invalid(&self.name, format!("transition label `{event}` not in alphabet")));
        }
        self.edges.push((src, event.to_string(), tgt));
        Ok(self)
    }

    pub fn build(&self) -> Result<Automaton> {
        let n = self.states.len();
        if n == 0 {
            return Err(invalid(&self.name, "no states".into()));
        }
        let initial = self.initial.ok_or_else(|| invalid(&self.name, "no initial state".into()))?;
        if initial as usize >= n {
            return Err(invalid(&self.name, "initial state out of range".into()));
        }
        let events: Vec<Event> = self
            .events
            .iter()
            .map(|(n, c)| Event { name: n.clone(), controllable: *c })
            .collect();
        let index: BTreeMap<&str, u32> =
            events.iter().enumerate().map(|(i, e)| (e.name.as_str(), i as u32)).collect();
        let mut delta: Vec<Vec<(u32, StateId)>> = vec![Vec::new(); n];
        for (s, e, t) in &self.edges {
            if *s as usize >= n || *t as usize >= n {
                return Err(invalid(&self.name, format!("transition on `{e}` references unknown state")));
            }
            let ei = index[e.as_str()];
            let out = &mut delta[*s as usize];
            match out.iter().find(|(x, _)| *x == ei) {
                Some((_, t0)) if t0 == t => {}
                Some(_) => {
                    return Err(invalid(
                        &self.name,
                        format!("nondeterministic on `{e}` from state `{}`", self.states[*s as usize]),
                    ))
                }
                None => out.push((ei, *t)),
            }
        }
        for out in &mut delta {
            out.sort_unstable();
        }
        Ok(Automaton {
            name: self.name.clone(),
            events,
            states: self.states.clone(),
            initial,
            marked: self.marked.clone(),
            delta,
        })
    }
}

/// Builds an automaton from a compact description; used heavily by tests and
/// the bundled models. States are `(name, marked)`, the first is initial.
pub fn automaton(
    name: &str,
    states: &[(&str, bool)],
    events: &[(&str, bool)],
    edges: &[(&str, &str, &str)],
) -> Result<Automaton> {
    let mut b = AutomatonBuilder::new(name);
    for (e, c) in events {
        b.event(Event { name: e.to_string(), controllable: *c })?;
    }
    let mut ids = BTreeMap::new();
    for (s, m) in states {
        ids.insert(*s, b.state(*s, *m));
    }
    b.initial(0);
    for (s, e, t) in edges {
        let s = *ids.get(s).ok_or_else(|| invalid(name, format!("unknown state `{s}`")))?;
        let t = *ids.get(t).ok_or_else(|| invalid(name, format!("unknown state `{t}`")))?;
        b.edge(s, e, t)?;
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pump() -> Automaton {
        automaton(
            "Pump",
            &[("Off", true), ("On", false)],
            &[("c_on", true), ("c_off", true)],
            &[("Off", "c_on", "On"), ("On", "c_off", "Off")],
        )
        .unwrap()
    }

    #[test]
    fn runs_traces() {
        let p = pump();
        assert!(p.accepts_marked(&["c_on", "c_off"]));
        assert!(p.accepts(&["c_on"]));
        assert!(!p.accepts_marked(&["c_on"]));
        assert!(!p.accepts(&["c_off"]));
        assert!(p.accepts::<&str>(&[]));
    }

    #[test]
    fn rejects_nondeterminism() {
        let r = automaton(
            "N",
            &[("a", true), ("b", true)],
            &[("e", true)],
            &[("a", "e", "a"), ("a", "e", "b")],
        );
        assert!(matches!(r, Err(Error::InvalidAutomaton { .. })));
    }

    #[test]
    fn rejects_label_outside_alphabet() {
        let r = automaton("N", &[("a", true)], &[], &[("a", "e", "a")]);
        assert!(r.is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = pump();
        let back = Automaton::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn json_rejects_unknown_marked_state() {
        let mut doc = pump().to_doc();
        doc.marked.push("Nope".into());
        assert!(Automaton::from_doc(&doc).is_err());
    }

    #[test]
    fn rename_keeps_structure() {
        let p = pump();
        let map = BTreeMap::from([("c_on".to_string(), "u_on".to_string())]);
        let r = p.rename_events(&map).unwrap();
        assert!(r.accepts(&["u_on", "c_off"]));
        assert!(!r.has_event("c_on"));
    }
}
