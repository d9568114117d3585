//! Delay channels between local supervisors, the composition SUP′ that uses
//! them, the independence / mutual-exclusion test for delayed events, and a
//! brute-force check of the five delay-robustness conditions.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::automaton::{Automaton, AutomatonBuilder, Event, StateId, Trace};
use crate::error::{Error, Result};
use crate::localization::{LocalSupervisor, SharedEventMap};
use crate::ops::{self, ComposeSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub source: String,
    pub event: String,
    pub destination: String,
    pub delayed_event: String,
    pub controllable: bool,
}

impl ChannelSpec {
    pub fn name(&self) -> String {
        format!("CH({},{},{})", self.source, self.event, self.destination)
    }
}

/// `r'` for a single destination, `r'@dest` when `r` is sent to several.
pub fn delayed_name(event: &str, destination: &str, several: bool) -> String {
    if several {
        format!("{event}'@{destination}")
    } else {
        format!("{event}'")
    }
}

/// Two-state cycle `0 -r-> 1 -r'-> 0`, only the initial state marked.
pub fn make_channel(spec: &ChannelSpec) -> Automaton {
    let mut b = AutomatonBuilder::new(spec.name());
    let r = if spec.controllable { Event::controllable(&spec.event) } else { Event::uncontrollable(&spec.event) };
    b.event(r).expect("fresh builder");
    b.uncontrollable(&spec.delayed_event);
    let idle = b.state("0", true);
    let busy = b.state("1", false);
    b.initial(idle);
    b.edge(idle, &spec.event, busy).expect("declared event");
    b.edge(busy, &spec.delayed_event, idle).expect("declared event");
    b.build().expect("channel automaton")
}

/// Order of pending deliveries on one link: `r` appends `r'`, `r'` may only
/// fire at the head of the queue.
pub fn make_fifo(source: &str, destination: &str, channels: &[&ChannelSpec]) -> Automaton {
    let mut b = AutomatonBuilder::new(format!("FIFO({source},{destination})"));
    for c in channels {
        let r = if c.controllable { Event::controllable(&c.event) } else { Event::uncontrollable(&c.event) };
        b.event(r).expect("distinct channel events");
        b.uncontrollable(&c.delayed_event);
    }
    let label = |q: &[usize]| q.iter().map(|&i| channels[i].delayed_event.as_str()).collect::<Vec<_>>().join("|");
    let empty = b.state("", true);
    b.initial(empty);
    let mut ids = BTreeMap::from([(Vec::<usize>::new(), empty)]);
    let mut queue = VecDeque::from([Vec::<usize>::new()]);
    while let Some(q) = queue.pop_front() {
        let from = ids[&q];
        let mut succ: Vec<(String, Vec<usize>)> = Vec::new();
        for i in 0..channels.len() {
            if !q.contains(&i) {
                let mut n = q.clone();
                n.push(i);
                succ.push((channels[i].event.clone(), n));
            }
        }
        if let Some(&head) = q.first() {
            succ.push((channels[head].delayed_event.clone(), q[1..].to_vec()));
        }
        for (ev, n) in succ {
            let to = match ids.get(&n) {
                Some(&id) => id,
                None => {
                    let id = b.state(label(&n), n.is_empty());
                    ids.insert(n.clone(), id);
                    queue.push_back(n);
                    id
                }
            };
            b.edge(from, &ev, to).expect("declared event");
        }
    }
    b.build().expect("fifo automaton")
}

/// One channel per (source, event, destination) of the shared-event map.
pub fn channel_specs(locs: &[LocalSupervisor], shared: &SharedEventMap) -> Result<Vec<ChannelSpec>> {
    let sigma: BTreeSet<String> = locs.iter().flat_map(|l| l.alphabet()).collect();
    let flag = |e: &str| {
        locs.iter()
            .flat_map(|l| l.automata())
            .find_map(|a| a.is_controllable(e))
            .unwrap_or(false)
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for entry in &shared.entries {
        let several = entry.destinations.len() > 1;
        for d in &entry.destinations {
            if !seen.insert((entry.source.clone(), entry.event.clone(), d.clone())) {
                return Err(Error::DuplicateChannel {
                    source_cluster: entry.source.clone(),
                    event: entry.event.clone(),
                    destination: d.clone(),
                });
            }
            let delayed_event = delayed_name(&entry.event, d, several);
            if sigma.contains(&delayed_event) {
                return Err(Error::Naming(format!("delayed event `{delayed_event}` already exists")));
            }
            out.push(ChannelSpec {
                source: entry.source.clone(),
                event: entry.event.clone(),
                destination: d.clone(),
                delayed_event,
                controllable: flag(&entry.event),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DelayedComposition {
    pub sup_prime: Automaton,
    /// Part-state tuple of each SUP′ state, indexed like `parts`.
    pub tuples: Vec<Vec<StateId>>,
    pub channels: Vec<ChannelSpec>,
    /// Local supervisor automata with observed events renamed, then channel
    /// automata, then FIFO automata.
    pub parts: Vec<Automaton>,
    pub local_parts: usize,
}

impl DelayedComposition {
    pub fn delayed_events(&self) -> BTreeSet<String> {
        self.channels.iter().map(|c| c.delayed_event.clone()).collect()
    }

    pub fn channel_of(&self, delayed: &str) -> Option<&ChannelSpec> {
        self.channels.iter().find(|c| c.delayed_event == delayed)
    }

    /// Maps a SUP′ trace to SUP by erasing delayed events.
    pub fn project(&self, trace: &[String]) -> Trace {
        let d = self.delayed_events();
        trace.iter().filter(|e| !d.contains(*e)).cloned().collect()
    }
}

/// Zero-delay product of all local supervisors.
pub fn zero_delay_product(locs: &[LocalSupervisor], limit: usize) -> Result<Automaton> {
    let parts: Vec<&Automaton> = locs.iter().flat_map(|l| l.automata()).collect();
    let spec = ComposeSpec { state_limit: limit, ..ComposeSpec::named("SUP") };
    Ok(ops::compose_with(&parts, &spec)?.automaton)
}

/// Renames observed events to their delayed copies in each destination and
/// composes with one channel per shared event and destination, plus a FIFO
/// order automaton on each link carrying more than one event.
pub fn build_sup_prime(locs: &[LocalSupervisor], shared: &SharedEventMap, limit: usize) -> Result<DelayedComposition> {
    let channels = channel_specs(locs, shared)?;
    let mut parts = Vec::new();
    for l in locs {
        let map: BTreeMap<String, String> = channels
            .iter()
            .filter(|c| c.destination == l.cluster)
            .map(|c| (c.event.clone(), c.delayed_event.clone()))
            .collect();
        let flags: BTreeMap<String, bool> = map.values().map(|d| (d.clone(), false)).collect();
        for a in l.automata() {
            let renamed = if map.is_empty() { a.clone() } else { a.rename_events(&map)?.with_controllability(&flags) };
            parts.push(renamed);
        }
    }
    let local_parts = parts.len();
    parts.extend(channels.iter().map(make_channel));
    let mut links: BTreeMap<(&str, &str), Vec<&ChannelSpec>> = BTreeMap::new();
    for c in &channels {
        links.entry((&c.source, &c.destination)).or_default().push(c);
    }
    for ((s, d), cs) in links {
        if cs.len() > 1 {
            parts.push(make_fifo(s, d, &cs));
        }
    }
    let refs: Vec<&Automaton> = parts.iter().collect();
    let spec = ComposeSpec { state_limit: limit, ..ComposeSpec::named("SUP'") };
    let p = ops::compose_with(&refs, &spec)?;
    Ok(DelayedComposition { sup_prime: p.automaton, tuples: p.tuples, channels, parts, local_parts })
}

fn enabled_pair(a: &Automaton, s: StateId, e1: u32, e2: u32) -> Option<(StateId, StateId)> {
    Some((a.step_idx(s, e1)?, a.step_idx(s, e2)?))
}

fn diamond_closes(a: &Automaton, s: StateId, e1: u32, e2: u32) -> bool {
    let Some((x, y)) = enabled_pair(a, s, e1, e2) else { return true };
    match (a.step_idx(x, e2), a.step_idx(y, e1)) {
        (Some(p), Some(q)) => p == q,
        _ => false,
    }
}

/// Every reachable state enabling both events closes the diamond.
pub fn check_independence(a: &Automaton, e1: &str, e2: &str) -> bool {
    let (Some(i), Some(j)) = (a.event_index(e1), a.event_index(e2)) else { return true };
    let reach = ops::reachable(a);
    (0..a.num_states() as StateId).filter(|s| reach[*s as usize]).all(|s| diamond_closes(a, s, i, j))
}

/// No reachable state enables both events.
pub fn check_mutual_exclusion(a: &Automaton, e1: &str, e2: &str) -> bool {
    let (Some(i), Some(j)) = (a.event_index(e1), a.event_index(e2)) else { return true };
    let reach = ops::reachable(a);
    (0..a.num_states() as StateId).filter(|s| reach[*s as usize]).all(|s| enabled_pair(a, s, i, j).is_none())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Enabled together somewhere without closing the diamond.
    NotMutuallyExclusiveAndNotIndependent,
    /// The destination refuses a delivery that the channel offers.
    DeliveryBlocked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalPair {
    pub delayed_event: String,
    pub other_event: String,
    pub witness_trace: Trace,
    pub verdict: Verdict,
    /// Both underlying events are controllable, so a lock can separate them.
    pub repairable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayCriticalReport {
    pub pairs: Vec<CriticalPair>,
    /// Proven robust. `false` only means the sufficient test did not apply.
    pub robust: bool,
}

impl DelayCriticalReport {
    pub fn unrepairable(&self) -> Vec<&CriticalPair> {
        self.pairs.iter().filter(|p| !p.repairable).collect()
    }

    pub fn has_pair(&self, delayed: &str, other: &str) -> bool {
        self.pairs.iter().any(|p| p.delayed_event == delayed && p.other_event == other)
    }
}

/// Checks every delayed event against every other event of SUP′: the pair
/// must be mutually exclusive or independent. Pairs of delayed events from
/// the same source are skipped since their link keeps them in order.
pub fn delay_robustness_check(dc: &DelayedComposition) -> DelayCriticalReport {
    let a = &dc.sup_prime;
    let delayed: BTreeMap<u32, &ChannelSpec> = dc
        .channels
        .iter()
        .filter_map(|c| a.event_index(&c.delayed_event).map(|i| (i, c)))
        .collect();
    let base_controllable = |e: u32| match delayed.get(&e) {
        Some(c) => c.controllable,
        None => a.event(e).controllable,
    };
    let mut first: BTreeMap<(u32, u32, Verdict), StateId> = BTreeMap::new();
    let order = bfs_order(a);
    for &s in &order {
        let en: Vec<u32> = a.outgoing(s).iter().map(|(e, _)| *e).collect();
        for &d in &en {
            let Some(cd) = delayed.get(&d) else { continue };
            for &e in &en {
                if e == d {
                    continue;
                }
                if let Some(ce) = delayed.get(&e) {
                    if ce.source == cd.source {
                        continue;
                    }
                }
                if !diamond_closes(a, s, d, e) {
                    first.entry((d, e, Verdict::NotMutuallyExclusiveAndNotIndependent)).or_insert(s);
                }
            }
        }
    }
    let dest_slots: Vec<usize> = (0..dc.local_parts).collect();
    for &s in &order {
        let tuple = &dc.tuples[s as usize];
        for (&d, c) in &delayed {
            if a.step_idx(s, d).is_some() {
                continue;
            }
            let name = &c.delayed_event;
            let channel_ready = dc.parts[dc.local_parts..].iter().enumerate().all(|(k, p)| match p.event_index(name) {
                None => true,
                Some(ev) => p.step_idx(tuple[dc.local_parts + k], ev).is_some(),
            });
            let refused = dest_slots.iter().any(|&k| match dc.parts[k].event_index(name) {
                None => false,
                Some(ev) => dc.parts[k].step_idx(tuple[k], ev).is_none(),
            });
            if channel_ready && refused {
                first.entry((d, d, Verdict::DeliveryBlocked)).or_insert(s);
            }
        }
    }
    let rank: BTreeMap<StateId, usize> = order.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut found: Vec<_> = first.into_iter().collect();
    found.sort_by_key(|((d, e, v), s)| (a.event(*d).name.clone(), a.event(*e).name.clone(), *v, rank[s]));
    let pairs: Vec<CriticalPair> = found
        .into_iter()
        .map(|((d, e, verdict), s)| CriticalPair {
            delayed_event: a.event(d).name.clone(),
            other_event: a.event(e).name.clone(),
            witness_trace: ops::trace_to_state(a, s).unwrap_or_default(),
            verdict,
            repairable: base_controllable(d) && base_controllable(e) && verdict != Verdict::DeliveryBlocked,
        })
        .collect();
    DelayCriticalReport { robust: pairs.is_empty(), pairs }
}

fn bfs_order(a: &Automaton) -> Vec<StateId> {
    let mut seen = vec![false; a.num_states()];
    let mut order = vec![a.initial()];
    seen[a.initial() as usize] = true;
    let mut i = 0;
    while i < order.len() {
        for &(_, t) in a.outgoing(order[i]) {
            if !seen[t as usize] {
                seen[t as usize] = true;
                order.push(t);
            }
        }
        i += 1;
    }
    order
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub depth: usize,
    pub cond1: bool,
    pub cond2: bool,
    pub cond3: bool,
    pub cond4: bool,
    pub cond5: bool,
    /// No marked string of SUP was met within the depth, so the marking
    /// conditions hold only vacuously.
    pub inconclusive: bool,
    pub witnesses: BTreeMap<String, Trace>,
}

impl OracleReport {
    pub fn all(&self) -> bool {
        self.cond1 && self.cond2 && self.cond3 && self.cond4 && self.cond5
    }
}

/// `2 * diameter + 2`, kept within 8..=12.
pub fn default_oracle_depth(sup_prime: &Automaton) -> usize {
    (2 * ops::diameter(sup_prime) + 2).clamp(8, 12)
}

struct Closure<'a> {
    a: &'a Automaton,
    hidden: Vec<bool>,
}

impl Closure<'_> {
    fn close(&self, mut set: BTreeSet<StateId>) -> BTreeSet<StateId> {
        let mut stack: Vec<StateId> = set.iter().copied().collect();
        while let Some(s) = stack.pop() {
            for &(e, t) in self.a.outgoing(s) {
                if self.hidden[e as usize] && set.insert(t) {
                    stack.push(t);
                }
            }
        }
        set
    }

    fn step(&self, set: &BTreeSet<StateId>, event: &str) -> BTreeSet<StateId> {
        let Some(e) = self.a.event_index(event) else { return BTreeSet::new() };
        self.close(set.iter().filter_map(|&s| self.a.step_idx(s, e)).collect())
    }

    fn any_marked(&self, set: &BTreeSet<StateId>) -> bool {
        set.iter().any(|&s| self.a.is_marked(s))
    }
}

/// Follows SUP from `y` for up to `depth` events, tracking the SUP′ states
/// whose projection matches. Returns the first string ending in a marked
/// SUP state not matched by a marked SUP′ state, and whether any marked
/// SUP state was met. With `lang`, also fails on the first string SUP′
/// cannot match at all.
fn match_from(
    sup: &Automaton,
    cl: &Closure,
    y: StateId,
    start: BTreeSet<StateId>,
    depth: usize,
    lang: bool,
) -> (Option<Trace>, Option<Trace>, bool) {
    let mut lang_fail = None;
    let mut mark_fail = None;
    let mut met_marked = false;
    let mut seen = HashSet::from([(y, start.clone())]);
    let mut queue = VecDeque::from([(y, start, Vec::<String>::new())]);
    while let Some((y, set, trace)) = queue.pop_front() {
        if sup.is_marked(y) {
            met_marked = true;
            if mark_fail.is_none() && !cl.any_marked(&set) {
                mark_fail = Some(trace.clone());
            }
        }
        if trace.len() >= depth {
            continue;
        }
        for &(e, t) in sup.outgoing(y) {
            let name = &sup.event(e).name;
            let next = cl.step(&set, name);
            let mut tr = trace.clone();
            tr.push(name.clone());
            if lang && next.is_empty() && lang_fail.is_none() {
                lang_fail = Some(tr.clone());
            }
            if seen.insert((t, next.clone())) {
                queue.push_back((t, next, tr));
            }
        }
    }
    (lang_fail, mark_fail, met_marked)
}

/// Enumerates strings up to `depth` and tests the five delay-robustness
/// conditions for SUP′ against SUP, where the projection erases `delayed`.
pub fn appendix_oracle(sup: &Automaton, sup_prime: &Automaton, delayed: &BTreeSet<String>, depth: usize) -> OracleReport {
    let hidden: Vec<bool> = sup_prime.events().iter().map(|e| delayed.contains(&e.name)).collect();
    let cl = Closure { a: sup_prime, hidden: hidden.clone() };
    let mut witnesses = BTreeMap::new();

    // Conditions 1 and 2, and the pairs (x', y) reached by a prefix `a`.
    let mut pairs: Vec<(StateId, StateId, Trace)> = Vec::new();
    let mut seen = HashSet::from([(sup_prime.initial(), sup.initial())]);
    let mut queue = VecDeque::from([(sup_prime.initial(), sup.initial(), Vec::<String>::new())]);
    while let Some((x, y, trace)) = queue.pop_front() {
        if sup_prime.is_marked(x) && !sup.is_marked(y) {
            witnesses.entry("cond2".to_string()).or_insert_with(|| trace.clone());
        }
        pairs.push((x, y, trace.clone()));
        if trace.len() >= depth {
            continue;
        }
        for &(e, x2) in sup_prime.outgoing(x) {
            let name = &sup_prime.event(e).name;
            let mut tr = trace.clone();
            tr.push(name.clone());
            let y2 = if hidden[e as usize] {
                y
            } else {
                match sup.step(y, name) {
                    Some(y2) => y2,
                    None => {
                        witnesses.entry("cond1".to_string()).or_insert(tr);
                        continue;
                    }
                }
            };
            if seen.insert((x2, y2)) {
                queue.push_back((x2, y2, tr));
            }
        }
    }

    // Conditions 3 and 4 from the initial states.
    let start = cl.close(BTreeSet::from([sup_prime.initial()]));
    let (lang, mark, mut met_marked) = match_from(sup, &cl, sup.initial(), start, depth, true);
    if let Some(t) = lang {
        witnesses.insert("cond3".into(), t);
    }
    if let Some(t) = mark {
        witnesses.insert("cond4".into(), t);
    }

    // Condition 5: after any prefix, every marked completion of its
    // projection is reachable in SUP′ with the same projection.
    for (x, y, prefix) in &pairs {
        let (_, mark, met) = match_from(sup, &cl, *y, cl.close(BTreeSet::from([*x])), depth, false);
        met_marked |= met;
        if let Some(c) = mark {
            let mut t = prefix.clone();
            t.push("|".into());
            t.extend(c);
            witnesses.insert("cond5".into(), t);
            break;
        }
    }
    OracleReport {
        depth,
        cond1: !witnesses.contains_key("cond1"),
        cond2: !witnesses.contains_key("cond2"),
        cond3: !witnesses.contains_key("cond3"),
        cond4: !witnesses.contains_key("cond4"),
        cond5: !witnesses.contains_key("cond5"),
        inconclusive: !met_marked,
        witnesses,
    }
}
