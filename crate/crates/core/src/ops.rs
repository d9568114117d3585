//! Synchronous composition, natural projection, reachability analysis and
//! language comparison on explicit automata.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::automaton::{Automaton, Event, StateId, Trace};
use crate::error::{Error, Result};

/// Above this many states product states are named `s<i>` instead of by
/// their component state names.
const NAMED_STATE_LIMIT: usize = 100_000;

/// Default cap on explicitly explored states.
pub const DEFAULT_STATE_LIMIT: usize = 1_000_000;

/// Result of an explicit composition: the product automaton plus, for every
/// product state, the tuple of component states it stands for.
#[derive(Debug, Clone)]
pub struct Product {
    pub automaton: Automaton,
    pub tuples: Vec<Vec<StateId>>,
}

/// Extra knobs for [`compose_with`].
pub struct ComposeSpec<'a> {
    pub name: String,
    /// Events that belong to no component; they self-loop wherever `allow` permits.
    pub extra_events: Vec<Event>,
    /// Returns false to disable `event` in the product state given by the tuple.
    pub allow: Option<&'a dyn Fn(&[StateId], &Event) -> bool>,
    pub state_limit: usize,
}

impl<'a> ComposeSpec<'a> {
    pub fn named(name: impl Into<String>) -> Self {
        ComposeSpec { name: name.into(), extra_events: Vec::new(), allow: None, state_limit: DEFAULT_STATE_LIMIT }
    }
}

/// Merges alphabets, rejecting controllability conflicts.
pub fn merge_alphabets<'a>(parts: impl IntoIterator<Item = &'a Automaton>) -> Result<Vec<Event>> {
    let mut map: BTreeMap<String, bool> = BTreeMap::new();
    for a in parts {
        for e in a.events() {
            match map.get(&e.name) {
                Some(c) if *c != e.controllable => {
                    return Err(Error::ControllabilityConflict { event: e.name.clone() })
                }
                _ => {
                    map.insert(e.name.clone(), e.controllable);
                }
            }
        }
    }
    Ok(map.into_iter().map(|(name, controllable)| Event { name, controllable }).collect())
}

/// Reachable synchronous product of `parts` (shared events synchronize,
/// private events interleave, marking is the conjunction).
pub fn compose_with(parts: &[&Automaton], spec: &ComposeSpec<'_>) -> Result<Product> {
    let mut events = merge_alphabets(parts.iter().copied())?;
    for e in &spec.extra_events {
        match events.iter().find(|x| x.name == e.name) {
            Some(x) if x.controllable != e.controllable => {
                return Err(Error::ControllabilityConflict { event: e.name.clone() })
            }
            Some(_) => {}
            None => events.push(e.clone()),
        }
    }
    events.sort();
    events.dedup_by(|a, b| a.name == b.name);

    // per global event: participating (part, local index)
    let participants: Vec<Vec<(usize, u32)>> = events
        .iter()
        .map(|e| {
            parts
                .iter()
                .enumerate()
                .filter_map(|(p, a)| a.event_index(&e.name).map(|i| (p, i)))
                .collect()
        })
        .collect();

    let init: Vec<StateId> = parts.iter().map(|a| a.initial()).collect();
    let mut index: HashMap<Vec<StateId>, StateId> = HashMap::new();
    let mut tuples: Vec<Vec<StateId>> = vec![init.clone()];
    index.insert(init, 0);
    let mut delta: Vec<Vec<(u32, StateId)>> = Vec::new();
    let mut next = 0usize;
    while next < tuples.len() {
        let cur = tuples[next].clone();
        let mut out = Vec::new();
        'ev: for (ei, ev) in events.iter().enumerate() {
            let mut succ = cur.clone();
            for &(p, li) in &participants[ei] {
                match parts[p].step_idx(cur[p], li) {
                    Some(t) => succ[p] = t,
                    None => continue 'ev,
                }
            }
            if let Some(allow) = spec.allow {
                if !allow(&cur, ev) {
                    continue;
                }
            }
            let id = match index.get(&succ) {
                Some(id) => *id,
                None => {
                    let id = tuples.len() as StateId;
                    if tuples.len() >= spec.state_limit {
                        return Err(Error::StateLimit { limit: spec.state_limit });
                    }
                    index.insert(succ.clone(), id);
                    tuples.push(succ);
                    id
                }
            };
            out.push((ei as u32, id));
        }
        delta.push(out);
        next += 1;
    }

    let names = if tuples.len() <= NAMED_STATE_LIMIT {
        tuples
            .iter()
            .map(|t| {
                t.iter()
                    .enumerate()
                    .map(|(p, s)| parts[p].state_name(*s))
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect()
    } else {
        (0..tuples.len()).map(|i| format!("s{i}")).collect()
    };
    let marked = tuples
        .iter()
        .map(|t| t.iter().enumerate().all(|(p, s)| parts[p].is_marked(*s)))
        .collect();
    let automaton = Automaton::from_raw(spec.name.clone(), events, names, 0, marked, delta);
    Ok(Product { automaton, tuples })
}

pub fn compose(parts: &[&Automaton], name: &str) -> Result<Product> {
    compose_with(parts, &ComposeSpec::named(name))
}

/// On-the-fly stepping of a tuple of automata under synchronous semantics,
/// without materializing the product.
pub struct Stepper<'a> {
    parts: Vec<&'a Automaton>,
    events: Vec<Event>,
    participants: Vec<Vec<(usize, u32)>>,
}

impl<'a> Stepper<'a> {
    pub fn new(parts: Vec<&'a Automaton>) -> Result<Self> {
        let events = merge_alphabets(parts.iter().copied())?;
        let participants = events
            .iter()
            .map(|e| {
                parts
                    .iter()
                    .enumerate()
                    .filter_map(|(p, a)| a.event_index(&e.name).map(|i| (p, i)))
                    .collect()
            })
            .collect();
        Ok(Stepper { parts, events, participants })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event_index(&self, name: &str) -> Option<usize> {
        self.events.binary_search_by(|e| e.name.as_str().cmp(name)).ok()
    }

    pub fn initial(&self) -> Vec<StateId> {
        self.parts.iter().map(|a| a.initial()).collect()
    }

    pub fn is_marked(&self, tuple: &[StateId]) -> bool {
        tuple.iter().enumerate().all(|(p, s)| self.parts[p].is_marked(*s))
    }

    pub fn step(&self, tuple: &[StateId], ev: usize) -> Option<Vec<StateId>> {
        let mut next = tuple.to_vec();
        for &(p, li) in &self.participants[ev] {
            next[p] = self.parts[p].step_idx(tuple[p], li)?;
        }
        Some(next)
    }

    pub fn enabled(&self, tuple: &[StateId]) -> Vec<usize> {
        (0..self.events.len()).filter(|e| self.step(tuple, *e).is_some()).collect()
    }
}

/// Reachable synchronous product of two automata.
pub fn sync_product(a: &Automaton, b: &Automaton) -> Result<Automaton> {
    let name = format!("{}||{}", a.name(), b.name());
    Ok(compose(&[a, b], &name)?.automaton)
}

/// Product of many automata, returning only the automaton.
pub fn sync_all(parts: &[&Automaton], name: &str) -> Result<Automaton> {
    Ok(compose(parts, name)?.automaton)
}

/// Natural projection of a trace onto `keep`.
pub fn projection<S: AsRef<str>>(trace: &[S], keep: &BTreeSet<String>) -> Trace {
    trace
        .iter()
        .filter(|e| keep.contains(e.as_ref()))
        .map(|e| e.as_ref().to_string())
        .collect()
}

/// Deterministic automaton for the projection of `L(a)` onto `keep`, by
/// ε-closure over erased events and subset construction. A subset is marked
/// iff it contains a marked state.
pub fn project_automaton(a: &Automaton, keep: &BTreeSet<String>) -> Automaton {
    let kept: Vec<bool> = a.events().iter().map(|e| keep.contains(&e.name)).collect();
    let closure = |set: &mut BTreeSet<StateId>| {
        let mut stack: Vec<StateId> = set.iter().copied().collect();
        while let Some(s) = stack.pop() {
            for &(e, t) in a.outgoing(s) {
                if !kept[e as usize] && set.insert(t) {
                    stack.push(t);
                }
            }
        }
    };
    let events: Vec<Event> = a.events().iter().filter(|e| keep.contains(&e.name)).cloned().collect();
    let global: Vec<Option<u32>> = {
        let mut k = 0u32;
        kept.iter()
            .map(|x| {
                if *x {
                    k += 1;
                    Some(k - 1)
                } else {
                    None
                }
            })
            .collect()
    };
    let mut start = BTreeSet::from([a.initial()]);
    closure(&mut start);
    let mut subsets = vec![start.clone()];
    let mut index: HashMap<BTreeSet<StateId>, StateId> = HashMap::from([(start, 0)]);
    let mut delta: Vec<Vec<(u32, StateId)>> = Vec::new();
    let mut i = 0;
    while i < subsets.len() {
        let cur = subsets[i].clone();
        let mut moves: BTreeMap<u32, BTreeSet<StateId>> = BTreeMap::new();
        for &s in &cur {
            for &(e, t) in a.outgoing(s) {
                if let Some(pe) = global[e as usize] {
                    moves.entry(pe).or_default().insert(t);
                }
            }
        }
        let mut out = Vec::new();
        for (pe, mut set) in moves {
            closure(&mut set);
            let id = match index.get(&set) {
                Some(id) => *id,
                None => {
                    let id = subsets.len() as StateId;
                    index.insert(set.clone(), id);
                    subsets.push(set);
                    id
                }
            };
            out.push((pe, id));
        }
        delta.push(out);
        i += 1;
    }
    let names = subsets
        .iter()
        .map(|s| {
            let v: Vec<&str> = s.iter().map(|x| a.state_name(*x)).collect();
            format!("{{{}}}", v.join(","))
        })
        .collect();
    let marked = subsets.iter().map(|s| s.iter().any(|x| a.is_marked(*x))).collect();
    Automaton::from_raw(format!("P({})", a.name()), events, names, 0, marked, delta)
}

/// Breadth-first parents from the initial state: `parent[s] = (pred, event)`.
fn bfs_tree(a: &Automaton) -> Vec<Option<(StateId, u32)>> {
    let n = a.num_states();
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([a.initial()]);
    seen[a.initial() as usize] = true;
    while let Some(s) = queue.pop_front() {
        for &(e, t) in a.outgoing(s) {
            if !seen[t as usize] {
                seen[t as usize] = true;
                parent[t as usize] = Some((s, e));
                queue.push_back(t);
            }
        }
    }
    parent
}

/// Shortest trace from the initial state to any state satisfying `target`.
pub fn shortest_trace_to(a: &Automaton, target: impl Fn(StateId) -> bool) -> Option<Trace> {
    let parent = bfs_tree(a);
    let reach = reachable(a);
    let mut best: Option<(usize, StateId)> = None;
    for s in 0..a.num_states() as StateId {
        if reach[s as usize] && target(s) {
            let d = depth_of(&parent, a.initial(), s);
            if best.map(|(bd, _)| d < bd).unwrap_or(true) {
                best = Some((d, s));
            }
        }
    }
    best.map(|(_, s)| trace_to(a, &parent, s))
}

fn depth_of(parent: &[Option<(StateId, u32)>], init: StateId, mut s: StateId) -> usize {
    let mut d = 0;
    while s != init {
        s = parent[s as usize].expect("reachable").0;
        d += 1;
    }
    d
}

fn trace_to(a: &Automaton, parent: &[Option<(StateId, u32)>], mut s: StateId) -> Trace {
    let mut out = Vec::new();
    while s != a.initial() {
        let (p, e) = parent[s as usize].expect("reachable");
        out.push(a.event(e).name.clone());
        s = p;
    }
    out.reverse();
    out
}

/// Shortest trace reaching state `s`.
pub fn trace_to_state(a: &Automaton, s: StateId) -> Option<Trace> {
    shortest_trace_to(a, |x| x == s)
}

pub fn reachable(a: &Automaton) -> Vec<bool> {
    let mut seen = vec![false; a.num_states()];
    let mut stack = vec![a.initial()];
    seen[a.initial() as usize] = true;
    while let Some(s) = stack.pop() {
        for &(_, t) in a.outgoing(s) {
            if !seen[t as usize] {
                seen[t as usize] = true;
                stack.push(t);
            }
        }
    }
    seen
}

/// Predecessor lists of every state.
pub fn predecessors(a: &Automaton) -> Vec<Vec<(u32, StateId)>> {
    let mut pred = vec![Vec::new(); a.num_states()];
    for s in 0..a.num_states() as StateId {
        for &(e, t) in a.outgoing(s) {
            pred[t as usize].push((e, s));
        }
    }
    pred
}

/// States from which some marked state is reachable.
pub fn coreachable(a: &Automaton) -> Vec<bool> {
    let pred = predecessors(a);
    let mut seen = vec![false; a.num_states()];
    let mut stack: Vec<StateId> = a.marked_states().collect();
    for s in &stack {
        seen[*s as usize] = true;
    }
    while let Some(s) = stack.pop() {
        for &(_, p) in &pred[s as usize] {
            if !seen[p as usize] {
                seen[p as usize] = true;
                stack.push(p);
            }
        }
    }
    seen
}

/// Every reachable state can reach a marked state.
pub fn is_nonblocking(a: &Automaton) -> bool {
    blocking_witness(a).is_none()
}

/// Shortest trace to a reachable state that cannot reach a marked state.
pub fn blocking_witness(a: &Automaton) -> Option<Trace> {
    let co = coreachable(a);
    shortest_trace_to(a, |s| !co[s as usize])
}

/// Longest shortest-path distance from the initial state.
pub fn diameter(a: &Automaton) -> usize {
    let mut dist = vec![usize::MAX; a.num_states()];
    dist[a.initial() as usize] = 0;
    let mut queue = VecDeque::from([a.initial()]);
    let mut max = 0;
    while let Some(s) = queue.pop_front() {
        for &(_, t) in a.outgoing(s) {
            if dist[t as usize] == usize::MAX {
                dist[t as usize] = dist[s as usize] + 1;
                max = max.max(dist[t as usize]);
                queue.push_back(t);
            }
        }
    }
    max
}

pub fn reachable_count(a: &Automaton) -> usize {
    reachable(a).iter().filter(|x| **x).count()
}

/// Keeps only the states flagged in `keep` that are reachable through kept
/// states. Returns the new automaton and the old index of each new state.
/// `None` if the initial state is not kept.
pub fn restrict(a: &Automaton, keep: &[bool]) -> Option<(Automaton, Vec<StateId>)> {
    restrict_edges(a, keep, |_, _, _| true)
}

/// Like [`restrict`], additionally dropping transitions for which
/// `edge(src, event, tgt)` is false.
pub fn restrict_edges(
    a: &Automaton,
    keep: &[bool],
    edge: impl Fn(StateId, u32, StateId) -> bool,
) -> Option<(Automaton, Vec<StateId>)> {
    if !keep[a.initial() as usize] {
        return None;
    }
    let mut new_id = vec![u32::MAX; a.num_states()];
    let mut order = vec![a.initial()];
    new_id[a.initial() as usize] = 0;
    let mut i = 0;
    while i < order.len() {
        let s = order[i];
        for &(e, t) in a.outgoing(s) {
            if keep[t as usize] && edge(s, e, t) && new_id[t as usize] == u32::MAX {
                new_id[t as usize] = order.len() as u32;
                order.push(t);
            }
        }
        i += 1;
    }
    let delta = order
        .iter()
        .map(|&s| {
            a.outgoing(s)
                .iter()
                .filter(|(e, t)| keep[*t as usize] && edge(s, *e, *t))
                .map(|(e, t)| (*e, new_id[*t as usize]))
                .collect()
        })
        .collect();
    let names = order.iter().map(|s| a.state_name(*s).to_string()).collect();
    let marked = order.iter().map(|s| a.is_marked(*s)).collect();
    Some((
        Automaton::from_raw(a.name().to_string(), a.events().to_vec(), names, 0, marked, delta),
        order,
    ))
}

/// A trace on which `a` and `b` disagree (one accepts, the other does not,
/// or marking differs), searched up to `depth` (unbounded when `None`).
pub fn language_difference(a: &Automaton, b: &Automaton, depth: Option<usize>) -> Option<Trace> {
    let events: BTreeSet<&str> = a.event_names().chain(b.event_names()).collect();
    let events: Vec<&str> = events.into_iter().collect();
    let ai: Vec<Option<u32>> = events.iter().map(|e| a.event_index(e)).collect();
    let bi: Vec<Option<u32>> = events.iter().map(|e| b.event_index(e)).collect();
    type Pair = (StateId, StateId);
    let start: Pair = (a.initial(), b.initial());
    if a.is_marked(start.0) != b.is_marked(start.1) {
        return Some(Vec::new());
    }
    let mut parent: HashMap<Pair, Option<(Pair, usize)>> = HashMap::from([(start, None)]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    let path = |parent: &HashMap<Pair, Option<(Pair, usize)>>, mut p: Pair, last: usize| {
        let mut out = vec![events[last].to_string()];
        while let Some(Some((q, e))) = parent.get(&p) {
            out.push(events[*e].to_string());
            p = *q;
        }
        out.reverse();
        out
    };
    while let Some((p, d)) = queue.pop_front() {
        if depth.map(|lim| d >= lim).unwrap_or(false) {
            continue;
        }
        for k in 0..events.len() {
            let sa = ai[k].and_then(|e| a.step_idx(p.0, e));
            let sb = bi[k].and_then(|e| b.step_idx(p.1, e));
            match (sa, sb) {
                (None, None) => {}
                (Some(x), Some(y)) => {
                    let q = (x, y);
                    if a.is_marked(x) != b.is_marked(y) {
                        return Some(path(&parent, p, k));
                    }
                    if !parent.contains_key(&q) {
                        parent.insert(q, Some((p, k)));
                        queue.push_back((q, d + 1));
                    }
                }
                _ => return Some(path(&parent, p, k)),
            }
        }
    }
    None
}

/// Depth-bounded comparison of both the closed and the marked language.
pub fn language_equal(a: &Automaton, b: &Automaton, depth: usize) -> bool {
    language_difference(a, b, Some(depth)).is_none()
}

/// Exact comparison for deterministic automata.
pub fn language_equal_exact(a: &Automaton, b: &Automaton) -> bool {
    language_difference(a, b, None).is_none()
}

/// Default bound sufficient for exact equality of deterministic automata.
pub fn default_depth(a: &Automaton, b: &Automaton) -> usize {
    a.num_states() * b.num_states() + 1
}

/// Witness that the projection of `L(a)` onto `b`'s alphabet is not
/// contained in `L(b)`; events of `a` outside `b`'s alphabet are erased.
/// With `marked`, also checks that marked strings of `a` project to marked
/// strings of `b`.
pub fn projected_inclusion_witness(a: &Automaton, b: &Automaton, marked: bool) -> Option<Trace> {
    let map: Vec<Option<u32>> = a.events().iter().map(|e| b.event_index(&e.name)).collect();
    let start = (a.initial(), b.initial());
    let mut parent: HashMap<(StateId, StateId), Option<((StateId, StateId), u32)>> =
        HashMap::from([(start, None)]);
    let mut queue = VecDeque::from([start]);
    let path = |parent: &HashMap<_, Option<((StateId, StateId), u32)>>, mut p: (StateId, StateId), last: Option<u32>| {
        let mut out: Vec<String> = last.iter().map(|e| a.event(*e).name.clone()).collect();
        while let Some(Some((q, e))) = parent.get(&p) {
            out.push(a.event(*e).name.clone());
            p = *q;
        }
        out.reverse();
        out
    };
    while let Some(p) = queue.pop_front() {
        if marked && a.is_marked(p.0) && !b.is_marked(p.1) {
            return Some(path(&parent, p, None));
        }
        for &(e, x) in a.outgoing(p.0) {
            let y = match map[e as usize] {
                None => p.1,
                Some(be) => match b.step_idx(p.1, be) {
                    Some(y) => y,
                    None => return Some(path(&parent, p, Some(e))),
                },
            };
            let q = (x, y);
            if let std::collections::hash_map::Entry::Vacant(v) = parent.entry(q) {
                v.insert(Some((p, e)));
                queue.push_back(q);
            }
        }
    }
    None
}

/// A list of named components whose synchronous product is the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedSystem {
    components: Vec<Automaton>,
    index: BTreeMap<String, usize>,
}

impl ComposedSystem {
    pub fn new(components: Vec<Automaton>) -> Result<Self> {
        merge_alphabets(components.iter())?;
        let mut index = BTreeMap::new();
        for (i, c) in components.iter().enumerate() {
            if index.insert(c.name().to_string(), i).is_some() {
                return Err(Error::ModelReference(format!("duplicate component `{}`", c.name())));
            }
        }
        Ok(ComposedSystem { components, index })
    }

    pub fn components(&self) -> &[Automaton] {
        &self.components
    }

    pub fn get(&self, name: &str) -> Option<&Automaton> {
        self.index.get(name).map(|i| &self.components[*i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.components.iter().flat_map(|c| c.alphabet()).collect()
    }

    /// Explicit product of all components.
    pub fn product(&self, name: &str) -> Result<Automaton> {
        let parts: Vec<&Automaton> = self.components.iter().collect();
        sync_all(&parts, name)
    }
}

/// Groups of component indices connected by the shares-an-event relation,
/// each group ordered by index, groups ordered by their first member.
pub fn mrps_groups(sys: &ComposedSystem) -> Vec<Vec<usize>> {
    let n = sys.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let nx = p[c];
            p[c] = r;
            c = nx;
        }
        r
    }
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, c) in sys.components().iter().enumerate() {
        for e in c.event_names() {
            match owner.get(e) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    owner.insert(e, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Name of an MRPS component built from the given members.
pub fn group_name(members: &[&str]) -> String {
    members.join("+")
}

/// Most refined product system: products of the connected groups.
pub fn mrps(sys: &ComposedSystem) -> Result<ComposedSystem> {
    let mut out = Vec::new();
    for g in mrps_groups(sys) {
        if g.len() == 1 {
            out.push(sys.components()[g[0]].clone());
        } else {
            let parts: Vec<&Automaton> = g.iter().map(|i| &sys.components()[*i]).collect();
            let names: Vec<&str> = parts.iter().map(|a| a.name()).collect();
            out.push(sync_all(&parts, &group_name(&names))?);
        }
    }
    ComposedSystem::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::automaton;

    pub(crate) fn diamond() -> Automaton {
        automaton(
            "Diamond",
            &[("0", true), ("1", false), ("2", false), ("3", true)],
            &[("a", true), ("b", true)],
            &[("0", "a", "1"), ("0", "b", "2"), ("1", "b", "3"), ("2", "a", "3")],
        )
        .unwrap()
    }

    fn branching() -> Automaton {
        automaton(
            "Branch",
            &[("0", true), ("1", true), ("2", true)],
            &[("a", true), ("b", true)],
            &[("0", "a", "1"), ("0", "b", "2")],
        )
        .unwrap()
    }

    fn pump() -> Automaton {
        automaton(
            "Pump",
            &[("Off", true), ("On", false)],
            &[("c_on", true), ("c_off", true)],
            &[("Off", "c_on", "On"), ("On", "c_off", "Off")],
        )
        .unwrap()
    }

    /// All strings over `events` of length <= depth, classified by (in L, in Lm).
    fn enumerate(a: &Automaton, events: &[&str], depth: usize) -> Vec<(Vec<String>, bool, bool)> {
        let mut out = Vec::new();
        let mut frontier: Vec<Vec<String>> = vec![vec![]];
        for _ in 0..=depth {
            let mut next = Vec::new();
            for s in frontier {
                out.push((s.clone(), a.accepts(&s), a.accepts_marked(&s)));
                if out.len() > 200_000 {
                    break;
                }
                for e in events {
                    let mut t = s.clone();
                    t.push(e.to_string());
                    next.push(t);
                }
            }
            frontier = next;
            if frontier.first().map(|f| f.len() > depth).unwrap_or(true) {
                break;
            }
        }
        out
    }

    #[test]
    fn pump_with_alternating_requirement_is_isomorphic() {
        let req = automaton(
            "Alt",
            &[("X", true), ("Y", false)],
            &[("c_on", true), ("c_off", true)],
            &[("X", "c_on", "Y"), ("Y", "c_off", "X")],
        )
        .unwrap();
        let p = sync_product(&pump(), &req).unwrap();
        assert_eq!(p.num_states(), 2);
        assert!(language_equal_exact(&p, &pump()));
    }

    #[test]
    fn product_with_self_is_idempotent() {
        let d = diamond();
        assert!(language_equal_exact(&sync_product(&d, &d).unwrap(), &d));
    }

    #[test]
    fn diamond_with_selfloop_keeps_language() {
        let loop_a = automaton("L", &[("x", true)], &[("a", true)], &[("x", "a", "x")]).unwrap();
        let p = sync_product(&diamond(), &loop_a).unwrap();
        let d = diamond();
        for (s, inl, inm) in enumerate(&d, &["a", "b"], 4) {
            assert_eq!(p.accepts(&s), inl, "{s:?}");
            assert_eq!(p.accepts_marked(&s), inm, "{s:?}");
        }
    }

    #[test]
    fn controllability_conflict_is_rejected() {
        let a = automaton("A", &[("x", true)], &[("e", true)], &[]).unwrap();
        let b = automaton("B", &[("x", true)], &[("e", false)], &[]).unwrap();
        assert_eq!(sync_product(&a, &b), Err(Error::ControllabilityConflict { event: "e".into() }));
    }

    #[test]
    fn trace_projection() {
        let keep: BTreeSet<String> = ["r", "a"].iter().map(|s| s.to_string()).collect();
        assert_eq!(projection(&["r", "r'", "a"], &keep), vec!["r", "a"]);
        let all: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(projection(&["a", "b", "a"], &all), vec!["a", "b", "a"]);
        assert!(projection(&["a", "b", "a"], &BTreeSet::new()).is_empty());
    }

    #[test]
    fn channel_projection_is_r_star() {
        let ch = automaton(
            "CH",
            &[("0", true), ("1", false)],
            &[("r", true), ("r'", false)],
            &[("0", "r", "1"), ("1", "r'", "0")],
        )
        .unwrap();
        let keep = BTreeSet::from(["r".to_string()]);
        let p = project_automaton(&ch, &keep);
        // brute force over strings of the channel up to length 6
        for (s, inl, _) in enumerate(&ch, &["r", "r'"], 6) {
            if inl {
                let ps = projection(&s, &keep);
                assert!(p.accepts(&ps));
                assert!(p.accepts_marked(&ps), "prefix-closed marking {ps:?}");
            }
        }
        for n in 0..6 {
            let s = vec!["r"; n];
            assert!(p.accepts_marked(&s));
        }
    }

    #[test]
    fn projection_of_race_keeps_ac_star() {
        let race = crate::toys::race_supervisor();
        let keep: BTreeSet<String> = ["a", "c"].iter().map(|s| s.to_string()).collect();
        let p = project_automaton(&race, &keep);
        assert!(p.accepts(&["a"]));
        assert!(p.accepts(&["a", "c", "c"]));
        assert!(!p.accepts(&["c"]));
        // brute-force agreement on depth 6
        let evs: Vec<&str> = race.event_names().collect();
        let mut projected = BTreeSet::new();
        for (s, inl, _) in enumerate(&race, &evs, 6) {
            if inl {
                projected.insert(projection(&s, &keep));
            }
        }
        for (s, inl, _) in enumerate(&p, &["a", "c"], 4) {
            assert_eq!(inl, projected.contains(&s), "{s:?}");
        }
    }

    #[test]
    fn nonblocking_examples() {
        assert!(is_nonblocking(&pump()));
        let dead = automaton("D", &[("x", false)], &[], &[]).unwrap();
        assert!(!is_nonblocking(&dead));
        assert_eq!(blocking_witness(&dead), Some(vec![]));
        assert!(is_nonblocking(&crate::toys::race_supervisor()));
    }

    #[test]
    fn language_comparisons() {
        let d = diamond();
        assert!(language_equal(&d, &d, 10));
        let w = language_difference(&d, &branching(), None).unwrap();
        assert!(d.accepts(&w) != branching().accepts(&w) || d.accepts_marked(&w) != branching().accepts_marked(&w));
        assert!(!language_equal(&d, &branching(), default_depth(&d, &branching())));
    }

    #[test]
    fn renamed_sensor_equals_pump() {
        let sensor = automaton(
            "Sensor",
            &[("Off", true), ("On", false)],
            &[("u_on", true), ("u_off", true)],
            &[("Off", "u_on", "On"), ("On", "u_off", "Off")],
        )
        .unwrap();
        assert!(!language_equal_exact(&pump(), &sensor));
        let map = BTreeMap::from([
            ("u_on".to_string(), "c_on".to_string()),
            ("u_off".to_string(), "c_off".to_string()),
        ]);
        assert!(language_equal_exact(&pump(), &sensor.rename_events(&map).unwrap()));
    }

    #[test]
    fn mrps_of_disjoint_components_is_unchanged() {
        let a = automaton("A", &[("x", true)], &[("a", true)], &[("x", "a", "x")]).unwrap();
        let b = automaton("B", &[("x", true)], &[("b", true)], &[("x", "b", "x")]).unwrap();
        let sys = ComposedSystem::new(vec![a, b]).unwrap();
        let m = mrps(&sys).unwrap();
        assert_eq!(m, sys);
    }

    #[test]
    fn mrps_merges_buttons_with_monitor() {
        let button = |n: &str| {
            let ev = format!("{n}.u_push");
            automaton(n, &[("x", true)], &[(ev.as_str(), false)], &[("x", ev.as_str(), "x")]).unwrap()
        };
        let monitor = automaton(
            "Monitor",
            &[("Idle", true), ("EmptyPushed", false), ("StorePushed", false), ("OffPushed", false)],
            &[
                ("ButtonEmpty.u_push", false),
                ("ButtonStore.u_push", false),
                ("ButtonOff.u_push", false),
                ("c_done", true),
            ],
            &[
                ("Idle", "ButtonEmpty.u_push", "EmptyPushed"),
                ("Idle", "ButtonStore.u_push", "StorePushed"),
                ("Idle", "ButtonOff.u_push", "OffPushed"),
                ("EmptyPushed", "c_done", "Idle"),
                ("StorePushed", "c_done", "Idle"),
                ("OffPushed", "c_done", "Idle"),
            ],
        )
        .unwrap();
        let sys = ComposedSystem::new(vec![
            button("ButtonEmpty"),
            button("ButtonStore"),
            button("ButtonOff"),
            monitor,
        ])
        .unwrap();
        let m = mrps(&sys).unwrap();
        assert_eq!(m.len(), 1);
        let all = sys.product("all").unwrap();
        assert!(language_equal_exact(&all, &m.components()[0]));
    }
}
