//! Home-based token-passing mutex locks that make delay-critical event
//! pairs mutually exclusive.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::automaton::{automaton, Automaton, StateId, Trace};
use crate::delay::{build_sup_prime, DelayCriticalReport, DelayedComposition};
use crate::error::{Error, Result};
use crate::localization::{LocalSupervisor, SharedEventMap, OBSERVER_PREFIX};
use crate::ops;
use crate::predicate::{Predicate, Requirement};
use crate::synthesis::Supervisor;

/// When a side may ask for the token and when it must hand it back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideConditions {
    #[serde(with = "crate::predicate::text")]
    pub request: Predicate,
    #[serde(with = "crate::predicate::text")]
    pub ret: Predicate,
}

impl Default for SideConditions {
    fn default() -> Self {
        SideConditions { request: Predicate::True, ret: Predicate::True }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutexLockSpec {
    pub lock_id: usize,
    pub home_cluster: String,
    pub away_cluster: String,
    pub home_critical_set: BTreeSet<String>,
    pub away_critical_set: BTreeSet<String>,
    #[serde(default)]
    pub home_conditions: SideConditions,
    #[serde(default)]
    pub away_conditions: SideConditions,
}

impl MutexLockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.home_cluster == self.away_cluster {
            return Err(Error::Partition(format!("lock {} has the same home and away cluster", self.lock_id)));
        }
        if self.home_critical_set.is_empty() || self.away_critical_set.is_empty() {
            return Err(Error::Partition(format!("lock {} has an empty critical set", self.lock_id)));
        }
        Ok(())
    }

    pub fn critical_set(&self, side: Side) -> &BTreeSet<String> {
        match side {
            Side::Home => &self.home_critical_set,
            Side::Away => &self.away_critical_set,
        }
    }

    pub fn cluster(&self, side: Side) -> &str {
        match side {
            Side::Home => &self.home_cluster,
            Side::Away => &self.away_cluster,
        }
    }

    /// The side `cluster` plays in this lock.
    pub fn side_of(&self, cluster: &str) -> Option<Side> {
        if self.home_cluster == cluster {
            Some(Side::Home)
        } else if self.away_cluster == cluster {
            Some(Side::Away)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Home,
    Away,
}

/// Event and automaton names of one lock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockNames {
    pub prefix: String,
}

impl LockNames {
    pub fn new(lock_id: usize) -> Self {
        LockNames { prefix: format!("mx{lock_id}") }
    }

    fn n(&self, s: &str) -> String {
        format!("{}.{s}", self.prefix)
    }

    /// Home sends the token; the away side sees it arrive.
    pub fn to_here(&self) -> String {
        self.n("to_here")
    }
    pub fn to_home(&self) -> String {
        self.n("to_home")
    }
    pub fn request(&self) -> String {
        self.n("request")
    }
    pub fn received(&self) -> String {
        self.n("received")
    }
    pub fn ret(&self) -> String {
        self.n("return")
    }
    pub fn to_cs(&self, side: Side) -> String {
        self.n(&format!("{}.to_cs", side_tag(side)))
    }
    pub fn to_idle(&self, side: Side) -> String {
        self.n(&format!("{}.to_idle", side_tag(side)))
    }
    pub fn token(&self) -> String {
        self.n("Token")
    }
    pub fn cs(&self, side: Side) -> String {
        self.n(match side {
            Side::Home => "HomeCS",
            Side::Away => "AwayCS",
        })
    }
    pub fn requester(&self) -> String {
        self.n("Requester")
    }
    pub fn return_automaton(&self) -> String {
        self.n("Return")
    }
    pub fn tracker(&self) -> String {
        self.n("Tracker")
    }
    pub fn home_requester(&self) -> String {
        self.n("HomeRequester")
    }

    pub fn owned_events(&self, side: Side) -> Vec<String> {
        match side {
            Side::Home => vec![self.to_here(), self.to_cs(Side::Home), self.to_idle(Side::Home)],
            Side::Away => vec![
                self.to_home(),
                self.request(),
                self.received(),
                self.ret(),
                self.to_cs(Side::Away),
                self.to_idle(Side::Away),
            ],
        }
    }
}

fn side_tag(side: Side) -> &'static str {
    match side {
        Side::Home => "home",
        Side::Away => "away",
    }
}

#[derive(Debug, Clone)]
pub struct AwayAutomata {
    pub token: Automaton,
    pub critical_section: Automaton,
    pub requester: Automaton,
    pub return_requirement: Automaton,
}

#[derive(Debug, Clone)]
pub struct HomeAutomata {
    pub tracker: Automaton,
    pub critical_section: Automaton,
    /// Home-side view of the away requester: `request` arrives, `to_here`
    /// answers it.
    pub requester: Automaton,
}

#[derive(Debug, Clone)]
pub struct MutexAutomataBundle {
    pub names: LockNames,
    pub away: AwayAutomata,
    pub home: HomeAutomata,
    pub away_requirements: Vec<Requirement>,
    pub home_requirements: Vec<Requirement>,
}

fn cs_automaton(names: &LockNames, side: Side) -> Automaton {
    let (to_cs, to_idle) = (names.to_cs(side), names.to_idle(side));
    automaton(
        &names.cs(side),
        &[("Idle", true), ("Active", false)],
        &[(&to_cs, true), (&to_idle, true)],
        &[("Idle", &to_cs, "Active"), ("Active", &to_idle, "Idle")],
    )
    .expect("static automaton")
}

/// The six lock automata and the requirements of both sides.
pub fn instantiate_lock(spec: &MutexLockSpec) -> Result<MutexAutomataBundle> {
    spec.validate()?;
    let n = LockNames::new(spec.lock_id);
    let (here, home, req, rec, ret) = (n.to_here(), n.to_home(), n.request(), n.received(), n.ret());
    let (a_cs, a_idle) = (n.to_cs(Side::Away), n.to_idle(Side::Away));
    let token = automaton(
        &n.token(),
        &[("NotHere", true), ("Here", false)],
        &[(&here, true), (&home, true)],
        &[("NotHere", &here, "Here"), ("Here", &home, "NotHere")],
    )?;
    let requester = automaton(
        &n.requester(),
        &[("Idle", true), ("Requested", false), ("Received", false)],
        &[(&req, true), (&rec, true), (&ret, true)],
        &[("Idle", &req, "Requested"), ("Requested", &rec, "Received"), ("Received", &ret, "Idle")],
    )?;
    let return_requirement = automaton(
        &n.return_automaton(),
        &[("A", true), ("B", false), ("C", false), ("D", false)],
        &[(&here, true), (&a_cs, true), (&a_idle, true), (&home, true)],
        &[("A", &here, "B"), ("B", &a_cs, "C"), ("C", &a_idle, "D"), ("D", &home, "A")],
    )?;
    let tracker = automaton(
        &n.tracker(),
        &[("Home", true), ("Away", false)],
        &[(&here, true), (&home, true)],
        &[("Home", &here, "Away"), ("Away", &home, "Home")],
    )?;
    let home_requester = automaton(
        &n.home_requester(),
        &[("Idle", true), ("Requested", false)],
        &[(&req, true), (&here, true)],
        &[("Idle", &req, "Requested"), ("Requested", &here, "Idle")],
    )?;
    let atom = |a: String, s: &str| Predicate::atom(a, s);
    let r = |name: String, event: String, cond: Predicate| Requirement::new(format!("{}.{name}", n.prefix), event, cond);
    let mut away_requirements = vec![
        r("A1".into(), home.clone(), atom(n.cs(Side::Away), "Idle")),
        r("A2".into(), home.clone(), atom(n.requester(), "Received")),
        r("A3".into(), a_cs.clone(), atom(n.token(), "Here")),
        r("A4".into(), a_cs.clone(), atom(n.requester(), "Received")),
        r("A5".into(), a_idle, spec.away_conditions.ret.clone()),
        r("A6".into(), req.clone(), Predicate::not(atom(n.token(), "Here"))),
        r("A7".into(), req, spec.away_conditions.request.clone()),
        r("A8".into(), rec, atom(n.token(), "Here")),
        r("A9".into(), ret, Predicate::not(atom(n.token(), "Here"))),
    ];
    for (i, e) in spec.away_critical_set.iter().enumerate() {
        away_requirements.push(r(format!("A10.{}", i + 1), e.clone(), atom(n.cs(Side::Away), "Active")));
    }
    let h_cs = n.to_cs(Side::Home);
    let mut home_requirements = vec![
        r("H1".into(), here.clone(), atom(n.cs(Side::Home), "Idle")),
        r("H2".into(), here, atom(n.home_requester(), "Requested")),
        r("H3".into(), h_cs.clone(), atom(n.tracker(), "Home")),
        r("H4".into(), h_cs, spec.home_conditions.request.clone()),
        r("H5".into(), n.to_idle(Side::Home), spec.home_conditions.ret.clone()),
    ];
    for (i, e) in spec.home_critical_set.iter().enumerate() {
        home_requirements.push(r(format!("H6.{}", i + 1), e.clone(), atom(n.cs(Side::Home), "Active")));
    }
    Ok(MutexAutomataBundle {
        away: AwayAutomata { token, critical_section: cs_automaton(&n, Side::Away), requester, return_requirement },
        home: HomeAutomata { tracker, critical_section: cs_automaton(&n, Side::Home), requester: home_requester },
        names: n,
        away_requirements,
        home_requirements,
    })
}

fn base_event<'a>(dc: &'a DelayedComposition, e: &'a str) -> (&'a str, Option<&'a str>) {
    match dc.channel_of(e) {
        Some(c) => (&c.event, Some(&c.source)),
        None => (e, None),
    }
}

/// One lock per (home, away) cluster pair of failing combinations. Home is
/// the cluster sending the delayed event; its critical set holds the
/// channeled events, the away set the events they race with.
pub fn plan_locks(report: &DelayCriticalReport, dc: &DelayedComposition, locs: &[LocalSupervisor]) -> Result<Vec<MutexLockSpec>> {
    let owner = |e: &str| locs.iter().find(|l| l.owned_events.contains(e)).map(|l| l.cluster.clone());
    let mut offenders = Vec::new();
    let mut groups: Vec<((String, String), BTreeSet<String>, BTreeSet<String>)> = Vec::new();
    for p in &report.pairs {
        let (r, src) = base_event(dc, &p.delayed_event);
        let (e, _) = base_event(dc, &p.other_event);
        let src = src.expect("delayed event has a channel").to_string();
        let other = owner(e);
        if !p.repairable || other.as_deref() == Some(src.as_str()) || other.is_none() {
            offenders.push(format!("({}, {})", p.delayed_event, p.other_event));
            continue;
        }
        let key = (src, other.unwrap());
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => {
                g.1.insert(r.to_string());
                g.2.insert(e.to_string());
            }
            None => groups.push((key, BTreeSet::from([r.to_string()]), BTreeSet::from([e.to_string()]))),
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Unrepairable(offenders.join(", ")));
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(i, ((home, away), h, a))| {
            let home_loc = locs.iter().find(|l| l.cluster == home).expect("owner cluster");
            Ok(MutexLockSpec {
                lock_id: i + 1,
                home_conditions: SideConditions { request: local_guard(home_loc, &h)?, ret: Predicate::True },
                away_conditions: SideConditions::default(),
                home_cluster: home,
                away_cluster: away,
                home_critical_set: h,
                away_critical_set: a,
            })
        })
        .collect()
}

/// States of the cluster's own automata in which some event of `events` is
/// possible: the event is defined there and every requirement on it that
/// only mentions own automata holds.
pub fn local_guard(loc: &LocalSupervisor, events: &BTreeSet<String>) -> Result<Predicate> {
    let own = |name: &str| !name.starts_with(OBSERVER_PREFIX) && !name.starts_with("mx");
    let mut terms = Vec::new();
    for e in events {
        let mut parts = Vec::new();
        let mut seen = BTreeSet::new();
        for sup in &loc.supervisors {
            for p in sup.plants.iter().filter(|p| own(p.name()) && p.has_event(e)) {
                if seen.insert(p.name().to_string()) {
                    let states = (0..p.num_states() as StateId)
                        .filter(|s| p.step(*s, e).is_some())
                        .map(|s| Predicate::atom(p.name(), p.state_name(s)));
                    parts.push(Predicate::or(states));
                }
            }
            for r in sup.requirements.iter().filter(|r| &r.event == e) {
                if r.referenced_automata().iter().all(|a| own(a)) {
                    parts.push(r.condition.clone());
                }
            }
        }
        if seen.is_empty() {
            return Err(Error::ModelReference(format!("cluster `{}` does not generate `{e}`", loc.cluster)));
        }
        terms.push(Predicate::and(parts));
    }
    Ok(Predicate::or(terms))
}

fn find_plant<'a>(loc: &'a LocalSupervisor, pred: impl Fn(&Automaton) -> bool) -> Option<&'a Automaton> {
    loc.supervisors
        .iter()
        .flat_map(|s| s.plants.iter())
        .filter(|p| pred(p))
        .min_by_key(|p| p.num_states())
}

fn copy_for(loc: &LocalSupervisor, name: &str) -> Result<Automaton> {
    find_plant(loc, |p| p.name() == name)
        .cloned()
        .ok_or_else(|| Error::ModelReference(format!("cluster `{}` has no automaton `{name}`", loc.cluster)))
}

fn owner_copy(loc: &LocalSupervisor, event: &str) -> Result<Automaton> {
    find_plant(loc, |p| p.has_event(event) && !p.name().starts_with(OBSERVER_PREFIX) && !p.name().starts_with("mx"))
        .cloned()
        .ok_or_else(|| Error::ModelReference(format!("cluster `{}` does not generate critical event `{event}`", loc.cluster)))
}

/// Lower-ordered locks whose critical sets on `cluster` overlap this one's.
fn lower_locks<'a>(specs: &'a [MutexLockSpec], spec: &MutexLockSpec, cluster: &str) -> Vec<(&'a MutexLockSpec, Side)> {
    let mine = spec.critical_set(spec.side_of(cluster).expect("participant"));
    specs
        .iter()
        .filter(|m| m.lock_id < spec.lock_id)
        .filter_map(|m| m.side_of(cluster).map(|s| (m, s)))
        .filter(|(m, s)| !m.critical_set(*s).is_disjoint(mine))
        .collect()
}

/// Adds each lock's home and away supervisors to the participating
/// clusters. With `ordering`, a lock may only be requested and entered
/// while the lower-ordered locks it overlaps with are held, and those may
/// only be released once it is neither held nor requested.
pub fn apply_locks(locs: &[LocalSupervisor], specs: &[MutexLockSpec], ordering: bool) -> Result<Vec<LocalSupervisor>> {
    let mut out = locs.to_vec();
    let alphabet: BTreeSet<String> = locs.iter().flat_map(|l| l.alphabet()).collect();
    let mut specs: Vec<MutexLockSpec> = specs.to_vec();
    specs.sort_by_key(|s| s.lock_id);
    for w in specs.windows(2) {
        if w[0].lock_id == w[1].lock_id {
            return Err(Error::Naming(format!("duplicate lock id {}", w[0].lock_id)));
        }
    }
    for spec in &specs {
        let bundle = instantiate_lock(spec)?;
        let n = &bundle.names;
        for side in [Side::Home, Side::Away] {
            for e in n.owned_events(side) {
                if alphabet.contains(&e) {
                    return Err(Error::Naming(format!("lock event `{e}` clashes with a plant event")));
                }
            }
        }
        for side in [Side::Home, Side::Away] {
            let idx = out
                .iter()
                .position(|l| l.cluster == spec.cluster(side))
                .ok_or_else(|| Error::ModelReference(format!("no cluster `{}` for lock {}", spec.cluster(side), spec.lock_id)))?;
            let loc = &out[idx];
            let (mut plants, mut reqs) = match side {
                Side::Home => (
                    vec![bundle.home.tracker.clone(), bundle.home.critical_section.clone(), bundle.home.requester.clone()],
                    bundle.home_requirements.clone(),
                ),
                Side::Away => (
                    vec![
                        bundle.away.token.clone(),
                        bundle.away.critical_section.clone(),
                        bundle.away.requester.clone(),
                        bundle.away.return_requirement.clone(),
                    ],
                    bundle.away_requirements.clone(),
                ),
            };
            if ordering {
                for (m, mside) in lower_locks(&specs, spec, &loc.cluster) {
                    let mn = LockNames::new(m.lock_id);
                    plants.push(copy_for(loc, &mn.cs(mside))?);
                    let held = Predicate::atom(mn.cs(mside), "Active");
                    let mut gated = vec![n.to_cs(side)];
                    if side == Side::Away {
                        gated.push(n.request());
                    }
                    for ev in gated {
                        reqs.push(Requirement::new(format!("{}.order.{}", n.prefix, mn.prefix), ev, held.clone()));
                    }
                    let free = match side {
                        Side::Home => Predicate::atom(n.cs(side), "Idle"),
                        Side::Away => Predicate::atom(n.requester(), "Idle"),
                    };
                    reqs.push(Requirement::new(format!("{}.release.{}", n.prefix, mn.prefix), mn.to_idle(mside), free));
                }
            }
            let mut needed: BTreeSet<String> = BTreeSet::new();
            for r in &reqs {
                needed.extend(r.referenced_automata());
            }
            for e in spec.critical_set(side) {
                let p = owner_copy(loc, e)?;
                needed.remove(p.name());
                if !plants.iter().any(|q| q.name() == p.name()) {
                    plants.push(p);
                }
            }
            for a in needed {
                if !plants.iter().any(|q| q.name() == a) {
                    plants.push(copy_for(loc, &a)?);
                }
            }
            let name = format!("{}.{}", n.prefix, side_tag(side));
            let sup = Supervisor::rebuild(&name, plants, reqs, vec![], ops::DEFAULT_STATE_LIMIT)?;
            let loc = &mut out[idx];
            let owned = n.owned_events(side);
            loc.owned_events.extend(owned.iter().cloned());
            loc.controllable_set.extend(owned.iter().cloned());
            for e in sup.automaton.event_names() {
                if !loc.owned_events.contains(e) {
                    loc.observed_foreign_events.insert(e.to_string());
                }
            }
            loc.supervisors.push(sup);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutexReport {
    pub safety: bool,
    pub deadlock_free: bool,
    pub token_conserved: bool,
    /// Informational: this protocol has no request queue.
    pub starvation_free: bool,
    pub witnesses: BTreeMap<String, Trace>,
}

/// Reads the state of a named automaton inside SUP′ states.
pub struct StateProbe<'a> {
    dc: &'a DelayedComposition,
    part: usize,
    /// `None` when the part is the automaton itself.
    slot: Option<(&'a Supervisor, usize)>,
}

impl<'a> StateProbe<'a> {
    /// Finds `name` among the plants of the local supervisors (flattened in
    /// the order SUP′ was built from).
    pub fn new(dc: &'a DelayedComposition, locs: &'a [LocalSupervisor], name: &str) -> Option<StateProbe<'a>> {
        let sups = locs.iter().flat_map(|l| l.supervisors.iter());
        for (part, sup) in sups.enumerate() {
            if let Some(slot) = sup.plants.iter().position(|p| p.name() == name) {
                return Some(StateProbe { dc, part, slot: Some((sup, slot)) });
            }
        }
        dc.parts.iter().position(|p| p.name() == name).map(|part| StateProbe { dc, part, slot: None })
    }

    pub fn state(&self, s: StateId) -> &'a str {
        let local = self.dc.tuples[s as usize][self.part];
        match self.slot {
            Some((sup, i)) => sup.plants[i].state_name(sup.tuples[local as usize][i]),
            None => self.dc.parts[self.part].state_name(local),
        }
    }
}

/// Safety, token conservation and deadlock freedom of the instrumented
/// system with delay channels; starvation freedom is reported as found.
pub fn verify_mutex_properties(locs: &[LocalSupervisor], specs: &[MutexLockSpec], limit: usize) -> Result<MutexReport> {
    let map = SharedEventMap::from_locals(locs)?;
    let dc = build_sup_prime(locs, &map, limit)?;
    verify_on(&dc, locs, specs)
}

pub fn verify_on(dc: &DelayedComposition, locs: &[LocalSupervisor], specs: &[MutexLockSpec]) -> Result<MutexReport> {
    let a = &dc.sup_prime;
    let mut witnesses = BTreeMap::new();
    let missing = |n: &str| Error::ModelReference(format!("automaton `{n}` not found in the instrumented system"));
    let reach = ops::reachable(a);
    for spec in specs {
        let n = LockNames::new(spec.lock_id);
        let probe = |name: String| StateProbe::new(dc, locs, &name).ok_or_else(|| missing(&name));
        let home_cs = probe(n.cs(Side::Home))?;
        let away_cs = probe(n.cs(Side::Away))?;
        let tracker = probe(n.tracker())?;
        let token = probe(n.token())?;
        let requester = probe(n.requester())?;
        let in_transit = |ev: String| {
            dc.channels
                .iter()
                .position(|c| c.event == ev)
                .map(|i| (dc.local_parts + i, dc.parts[dc.local_parts + i].clone()))
        };
        let there = in_transit(n.to_here());
        let back = in_transit(n.to_home());
        let busy = |ch: &Option<(usize, Automaton)>, s: StateId| match ch {
            Some((k, aut)) => aut.state_name(dc.tuples[s as usize][*k]) == "1",
            None => false,
        };
        for s in (0..a.num_states() as StateId).filter(|s| reach[*s as usize]) {
            if home_cs.state(s) == "Active" && away_cs.state(s) == "Active" {
                witnesses
                    .entry(format!("safety.{}", n.prefix))
                    .or_insert_with(|| ops::trace_to_state(a, s).unwrap_or_default());
            }
            let count = [
                tracker.state(s) == "Home",
                busy(&there, s),
                token.state(s) == "Here",
                busy(&back, s),
            ]
            .iter()
            .filter(|b| **b)
            .count();
            if count != 1 {
                witnesses
                    .entry(format!("token.{}", n.prefix))
                    .or_insert_with(|| ops::trace_to_state(a, s).unwrap_or_default());
            }
        }
        let waiting: Vec<bool> = (0..a.num_states() as StateId)
            .map(|s| reach[s as usize] && requester.state(s) == "Requested")
            .collect();
        if let Some(t) = cycle_within(a, &waiting) {
            witnesses.entry(format!("starvation.{}", n.prefix)).or_insert(t);
        }
    }
    if let Some(w) = ops::blocking_witness(a) {
        witnesses.insert("deadlock".into(), w);
    }
    let has = |k: &str| witnesses.keys().any(|w| w.starts_with(k));
    Ok(MutexReport {
        safety: !has("safety"),
        deadlock_free: !has("deadlock"),
        token_conserved: !has("token"),
        starvation_free: !has("starvation"),
        witnesses,
    })
}

/// A trace reaching a cycle that stays inside `inside`.
fn cycle_within(a: &Automaton, inside: &[bool]) -> Option<Trace> {
    // Iteratively drop states with no successor inside; what remains lies
    // on or leads to a cycle within `inside`.
    let mut keep = inside.to_vec();
    loop {
        let mut changed = false;
        for s in 0..a.num_states() {
            if keep[s] && !a.outgoing(s as StateId).iter().any(|(_, t)| keep[*t as usize]) {
                keep[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..a.num_states()).find(|s| keep[*s]).and_then(|s| ops::trace_to_state(a, s as StateId))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{build_sup_prime, delay_robustness_check, zero_delay_product};
    use crate::toys;

    fn race() -> Vec<LocalSupervisor> {
        toys::race_locals()
    }

    fn spec(id: usize, home: &str, away: &str, h: &[&str], a: &[&str]) -> MutexLockSpec {
        MutexLockSpec {
            lock_id: id,
            home_cluster: home.into(),
            away_cluster: away.into(),
            home_critical_set: h.iter().map(|s| s.to_string()).collect(),
            away_critical_set: a.iter().map(|s| s.to_string()).collect(),
            home_conditions: SideConditions::default(),
            away_conditions: SideConditions::default(),
        }
    }

    #[test]
    fn tables_are_instantiated() {
        let b = instantiate_lock(&spec(3, "H", "A", &["x"], &["y", "z"])).unwrap();
        assert_eq!(b.away_requirements.len(), 11);
        assert_eq!(b.home_requirements.len(), 6);
        assert_eq!(b.away_requirements[1].name, "mx3.A2");
        assert_eq!(b.away_requirements[1].to_string(), "mx3.to_home needs mx3.Requester.Received");
        assert_eq!(b.home_requirements[1].to_string(), "mx3.to_here needs mx3.HomeRequester.Requested");
        assert!(b.away.return_requirement.accepts_marked(&["mx3.to_here", "mx3.away.to_cs", "mx3.away.to_idle", "mx3.to_home"]));
        assert!(!b.away.return_requirement.accepts(&["mx3.to_here", "mx3.to_home"]));
        assert!(b.away.token.accepts_marked(&["mx3.to_here", "mx3.to_home"]));
        assert!(b.home.tracker.accepts_marked(&["mx3.to_here", "mx3.to_home"]));
        assert!(b.away.requester.accepts_marked(&["mx3.request", "mx3.received", "mx3.return"]));
        assert!(instantiate_lock(&spec(1, "H", "H", &["x"], &["y"])).is_err());
        assert!(instantiate_lock(&spec(1, "H", "A", &[], &["y"])).is_err());
    }

    #[test]
    fn plan_round_trips_as_json() {
        let mut s = spec(1, "H", "A", &["x"], &["y"]);
        s.away_conditions.ret = Predicate::parse("P.Done").unwrap();
        let text = serde_json::to_string(&vec![s.clone()]).unwrap();
        assert!(text.contains("\"P.Done\""));
        let back: Vec<MutexLockSpec> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![s]);
    }

    #[test]
    fn race_repair() {
        let locs = race();
        let map = SharedEventMap::from_locals(&locs).unwrap();
        let dc = build_sup_prime(&locs, &map, 10_000).unwrap();
        let rep = delay_robustness_check(&dc);
        let plan = plan_locks(&rep, &dc, &locs).unwrap();
        let mut expected = spec(1, "LOC1", "LOC2", &["b"], &["a"]);
        expected.home_conditions.request = Predicate::parse("B.0").unwrap();
        assert_eq!(plan, vec![expected]);
        let inst = apply_locks(&locs, &plan, true).unwrap();
        let map = SharedEventMap::from_locals(&inst).unwrap();
        let dc2 = build_sup_prime(&inst, &map, 100_000).unwrap();
        let rep2 = delay_robustness_check(&dc2);
        assert!(rep2.robust, "{:?}", rep2.pairs);
        assert!(crate::delay::check_mutual_exclusion(&dc2.sup_prime, "b'", "a"));
        let m = verify_on(&dc2, &inst, &plan).unwrap();
        assert!(m.safety && m.token_conserved, "{m:?}");
        assert!(ops::is_nonblocking(&zero_delay_product(&inst, 100_000).unwrap()));
    }

    #[test]
    fn zero_specs_is_identity() {
        let locs = race();
        let inst = apply_locks(&locs, &[], true).unwrap();
        assert_eq!(inst.len(), 2);
        assert_eq!(inst[0].supervisors.len(), 1);
    }

    #[test]
    fn name_clash_is_rejected() {
        let clash = crate::automaton::automaton("X", &[("0", true)], &[("mx1.request", true)], &[("0", "mx1.request", "0")]).unwrap();
        let locs = vec![
            LocalSupervisor::from_automata("H", vec![clash], &["mx1.request"]).unwrap(),
            LocalSupervisor::from_automata("A", vec![toys::race_supervisor()], &["a", "b", "c"]).unwrap(),
        ];
        let s = spec(1, "H", "A", &["mx1.request"], &["a"]);
        assert!(matches!(apply_locks(&locs, &[s], true), Err(Error::Naming(_))));
    }

    fn crossed(ordering: bool) -> (Vec<LocalSupervisor>, Vec<MutexLockSpec>) {
        let locs = toys::crossed_locals();
        let specs = toys::crossed_locks();
        (apply_locks(&locs, &specs, ordering).unwrap(), specs)
    }

    #[test]
    fn crossed_locks_deadlock_without_ordering() {
        let (inst, specs) = crossed(false);
        assert!(!ops::is_nonblocking(&zero_delay_product(&inst, 100_000).unwrap()));
        let m = verify_mutex_properties(&inst, &specs, 1_000_000).unwrap();
        assert!(!m.deadlock_free);
        assert!(m.safety && m.token_conserved, "{m:?}");
    }

    #[test]
    fn crossed_locks_are_deadlock_free_with_ordering() {
        let (inst, specs) = crossed(true);
        assert!(ops::is_nonblocking(&zero_delay_product(&inst, 100_000).unwrap()));
        let m = verify_mutex_properties(&inst, &specs, 1_000_000).unwrap();
        assert!(m.deadlock_free && m.safety && m.token_conserved, "{m:?}");
        assert!(!m.starvation_free);
    }
}
