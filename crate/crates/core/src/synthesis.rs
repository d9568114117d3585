//! Maximally permissive nonblocking controllable supervisors for plants
//! constrained by event-condition requirements, and multilevel synthesis
//! over a cluster tree.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::automaton::{Automaton, Event, StateId, Trace};
use crate::error::{Error, Result};
use crate::ops::{self, ComposeSpec, ComposedSystem, Product, Stepper};
use crate::predicate::{Compiled, Predicate, Requirement};
use crate::tree::ClusterTree;

/// Extra disablement of `event` introduced by synthesis: the event is
/// disabled whenever the states of `automata` form one of the `forbidden`
/// tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub event: String,
    pub automata: Vec<String>,
    pub forbidden: BTreeSet<Vec<StateId>>,
}

impl Guard {
    /// `event needs <predicate>` form of the guard.
    pub fn condition(&self, lookup: &impl Fn(&str) -> Option<Automaton>) -> Predicate {
        let auts: Vec<Option<Automaton>> = self.automata.iter().map(|n| lookup(n)).collect();
        let bad = self.forbidden.iter().map(|t| {
            Predicate::and(t.iter().enumerate().map(|(i, s)| {
                let name = auts[i].as_ref().map(|a| a.state_name(*s).to_string()).unwrap_or_else(|| s.to_string());
                Predicate::atom(self.automata[i].clone(), name)
            }))
        });
        Predicate::not(Predicate::or(bad))
    }

    pub fn referenced_automata(&self) -> BTreeSet<String> {
        self.automata.iter().cloned().collect()
    }
}

/// A synthesized (or localized) supervisor: plant automata, requirements and
/// guards, plus the explicit controlled behavior they generate.
#[derive(Debug, Clone)]
pub struct Supervisor {
    pub name: String,
    pub plants: Vec<Automaton>,
    pub requirements: Vec<Requirement>,
    pub guards: Vec<Guard>,
    pub automaton: Automaton,
    /// Plant state tuple (indexed like `plants`) of each supervisor state.
    pub tuples: Vec<Vec<StateId>>,
}

impl Supervisor {
    pub fn plant_refs(&self) -> Vec<String> {
        self.plants.iter().map(|p| p.name().to_string()).collect()
    }

    pub fn requirement_refs(&self) -> Vec<String> {
        self.requirements.iter().map(|r| r.name.clone()).collect()
    }

    pub fn plant(&self, name: &str) -> Option<&Automaton> {
        self.plants.iter().find(|p| p.name() == name)
    }

    pub fn guard_condition(&self, g: &Guard) -> Predicate {
        g.condition(&|n| self.plant(n).cloned())
    }

    /// Rebuilds the automaton from plants, requirements and guards.
    pub fn rebuild(
        name: &str,
        plants: Vec<Automaton>,
        requirements: Vec<Requirement>,
        guards: Vec<Guard>,
        limit: usize,
    ) -> Result<Supervisor> {
        let refs: Vec<&Automaton> = plants.iter().collect();
        let p = controlled_product(name, &refs, &requirements, &guards, limit)?;
        Ok(Supervisor { name: name.to_string(), plants, requirements, guards, automaton: p.automaton, tuples: p.tuples })
    }
}

/// Checks that requirement events exist and are controllable and that every
/// atom resolves against `plants`.
pub fn check_requirements(plants: &[&Automaton], reqs: &[Requirement]) -> Result<()> {
    for r in reqs {
        match plants.iter().find_map(|p| p.is_controllable(&r.event)) {
            None => {
                return Err(Error::ModelReference(format!(
                    "requirement `{}` names unknown event `{}`",
                    r.name, r.event
                )))
            }
            Some(false) => {
                return Err(Error::UncontrollableRequirement { requirement: r.name.clone(), event: r.event.clone() })
            }
            Some(true) => {}
        }
        for (a, s) in r.condition.atoms() {
            let ok = plants.iter().any(|p| p.name() == a && p.state_index(&s).is_some());
            if !ok {
                return Err(Error::ModelReference(format!("requirement `{}` refers to unknown state `{a}.{s}`", r.name)));
            }
        }
    }
    Ok(())
}

fn slot_lookup<'a>(plants: &'a [&'a Automaton]) -> impl Fn(&str, &str) -> Option<(usize, StateId)> + 'a {
    move |a, s| {
        let slot = plants.iter().position(|p| p.name() == a)?;
        Some((slot, plants[slot].state_index(s)?))
    }
}

struct CompiledGuard {
    slots: Vec<usize>,
    forbidden: HashSet<Vec<StateId>>,
}

/// Product of `plants` in which each requirement and guard disables its
/// event where it does not hold.
pub fn controlled_product(
    name: &str,
    plants: &[&Automaton],
    reqs: &[Requirement],
    guards: &[Guard],
    limit: usize,
) -> Result<Product> {
    let lookup = slot_lookup(plants);
    let mut conds: HashMap<&str, Vec<Compiled>> = HashMap::new();
    for r in reqs {
        conds.entry(r.event.as_str()).or_default().push(r.condition.compile(&lookup)?);
    }
    let mut gmap: HashMap<&str, Vec<CompiledGuard>> = HashMap::new();
    for g in guards {
        let slots = g
            .automata
            .iter()
            .map(|a| {
                plants
                    .iter()
                    .position(|p| p.name() == a)
                    .ok_or_else(|| Error::ModelReference(format!("guard on `{}` refers to missing `{a}`", g.event)))
            })
            .collect::<Result<Vec<_>>>()?;
        gmap.entry(g.event.as_str())
            .or_default()
            .push(CompiledGuard { slots, forbidden: g.forbidden.iter().cloned().collect() });
    }
    let allow = |t: &[StateId], e: &Event| {
        if let Some(cs) = conds.get(e.name.as_str()) {
            if !cs.iter().all(|c| c.eval(t)) {
                return false;
            }
        }
        if let Some(gs) = gmap.get(e.name.as_str()) {
            for g in gs {
                let key: Vec<StateId> = g.slots.iter().map(|s| t[*s]).collect();
                if g.forbidden.contains(&key) {
                    return false;
                }
            }
        }
        true
    };
    let spec = ComposeSpec { name: name.to_string(), extra_events: vec![], allow: Some(&allow), state_limit: limit };
    ops::compose_with(plants, &spec)
}

/// Fixpoint of the standard synthesis step on an explicit automaton whose
/// uncontrollable transitions may not be cut: repeatedly drop states with an
/// uncontrollable transition into a dropped state, then states that cannot
/// reach a kept marked state through kept states.
pub fn supremal_states(a: &Automaton) -> Vec<bool> {
    let n = a.num_states();
    let pred = ops::predecessors(a);
    let mut keep = vec![true; n];
    loop {
        let mut changed = false;
        // uncontrollable violations
        let mut queue: VecDeque<StateId> = VecDeque::new();
        for s in 0..n as StateId {
            if keep[s as usize] && a.outgoing(s).iter().any(|(e, t)| !a.event(*e).controllable && !keep[*t as usize]) {
                keep[s as usize] = false;
                changed = true;
                queue.push_back(s);
            }
        }
        while let Some(t) = queue.pop_front() {
            for &(e, s) in &pred[t as usize] {
                if keep[s as usize] && !a.event(e).controllable {
                    keep[s as usize] = false;
                    queue.push_back(s);
                }
            }
        }
        // blocking states
        let mut co = vec![false; n];
        let mut stack: Vec<StateId> = (0..n as StateId).filter(|s| keep[*s as usize] && a.is_marked(*s)).collect();
        for s in &stack {
            co[*s as usize] = true;
        }
        while let Some(t) = stack.pop() {
            for &(_, s) in &pred[t as usize] {
                if keep[s as usize] && !co[s as usize] {
                    co[s as usize] = true;
                    stack.push(s);
                }
            }
        }
        for s in 0..n {
            if keep[s] && !co[s] {
                keep[s] = false;
                changed = true;
            }
        }
        if !changed {
            return keep;
        }
    }
}

/// Synthesizes a supervisor for the whole system.
pub fn synthesize(plant: &ComposedSystem, reqs: &[Requirement]) -> Result<Supervisor> {
    let parts: Vec<&Automaton> = plant.components().iter().collect();
    synthesize_parts("Sup", &parts, reqs, ops::DEFAULT_STATE_LIMIT)
}

/// Synthesizes a supervisor over the given plant automata.
pub fn synthesize_parts(name: &str, plants: &[&Automaton], reqs: &[Requirement], limit: usize) -> Result<Supervisor> {
    check_requirements(plants, reqs)?;
    let p = controlled_product(name, plants, reqs, &[], limit)?;
    let keep = supremal_states(&p.automaton);
    let (aut, order) = ops::restrict(&p.automaton, &keep).ok_or(Error::NoSupervisor { node: None })?;
    let tuples: Vec<Vec<StateId>> = order.iter().map(|s| p.tuples[*s as usize].clone()).collect();

    // guards: controllable transitions leaving the kept region
    let mut allowed: BTreeMap<u32, Vec<&Vec<StateId>>> = BTreeMap::new();
    let mut forbidden: BTreeMap<u32, Vec<&Vec<StateId>>> = BTreeMap::new();
    for &s in &order {
        for &(e, t) in p.automaton.outgoing(s) {
            if !p.automaton.event(e).controllable {
                continue;
            }
            let bucket = if keep[t as usize] { &mut allowed } else { &mut forbidden };
            bucket.entry(e).or_default().push(&p.tuples[s as usize]);
        }
    }
    let names: Vec<String> = plants.iter().map(|a| a.name().to_string()).collect();
    let guards = forbidden
        .into_iter()
        .map(|(e, bad)| {
            let good = allowed.remove(&e).unwrap_or_default();
            reduce_guard(&p.automaton.event(e).name, &names, &good, &bad)
        })
        .collect();

    Ok(Supervisor {
        name: name.to_string(),
        plants: plants.iter().map(|a| (*a).clone()).collect(),
        requirements: reqs.to_vec(),
        guards,
        automaton: aut,
        tuples,
    })
}

/// Drops tuple coordinates the guard does not depend on (on the states
/// where the event is otherwise possible).
fn reduce_guard(event: &str, names: &[String], good: &[&Vec<StateId>], bad: &[&Vec<StateId>]) -> Guard {
    let mut slots: Vec<usize> = (0..names.len()).collect();
    let project = |t: &Vec<StateId>, slots: &[usize]| -> Vec<StateId> { slots.iter().map(|s| t[*s]).collect() };
    for cand in 0..names.len() {
        let trial: Vec<usize> = slots.iter().copied().filter(|s| *s != cand).collect();
        let good_set: HashSet<Vec<StateId>> = good.iter().map(|t| project(t, &trial)).collect();
        if bad.iter().all(|t| !good_set.contains(&project(t, &trial))) {
            slots = trial;
        }
    }
    Guard {
        event: event.to_string(),
        automata: slots.iter().map(|s| names[*s].clone()).collect(),
        forbidden: bad.iter().map(|t| project(t, &slots)).collect(),
    }
}

/// Automaton form of a requirement: tracks the automata named in its
/// condition and allows `r.event` only where the condition holds. All
/// states are marked.
pub fn requirement_to_automaton(r: &Requirement, ctx: &ComposedSystem) -> Result<Automaton> {
    let tracked: Vec<&Automaton> = r
        .referenced_automata()
        .iter()
        .map(|n| ctx.get(n).ok_or_else(|| Error::ModelReference(format!("unknown automaton `{n}` in `{}`", r.name))))
        .collect::<Result<_>>()?;
    let controllable = ctx
        .components()
        .iter()
        .find_map(|c| c.is_controllable(&r.event))
        .ok_or_else(|| Error::ModelReference(format!("unknown event `{}`", r.event)))?;
    if !controllable {
        return Err(Error::UncontrollableRequirement { requirement: r.name.clone(), event: r.event.clone() });
    }
    let cond = r.condition.compile(&slot_lookup(&tracked))?;
    let allow = |t: &[StateId], e: &Event| e.name != r.event || cond.eval(t);
    let spec = ComposeSpec {
        name: format!("Req_{}", r.name),
        extra_events: vec![Event::controllable(r.event.clone())],
        allow: Some(&allow),
        state_limit: ops::DEFAULT_STATE_LIMIT,
    };
    Ok(ops::compose_with(&tracked, &spec)?.automaton.with_all_marked())
}

/// Recovers the condition of a requirement automaton as a disjunction over
/// the tracked states in which `event` is enabled.
pub fn extract_condition(req: &Automaton, event: &str, tracked: &[&Automaton]) -> Predicate {
    let terms = (0..req.num_states() as StateId).filter(|s| req.step(*s, event).is_some()).map(|s| {
        let parts: Vec<&str> = req.state_name(s).split('|').collect();
        Predicate::and(tracked.iter().zip(parts).map(|(a, st)| Predicate::atom(a.name(), st)))
    });
    Predicate::or(terms)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub safe: bool,
    pub nonblocking: bool,
    pub controllable: bool,
    /// `None` when not evaluated.
    pub maximally_permissive: Option<bool>,
    pub witnesses: BTreeMap<String, Trace>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.safe && self.nonblocking && self.controllable && self.maximally_permissive != Some(false)
    }
}

/// Checks a supervisor automaton against the plant and the requirement
/// automata. With `oracle`, maximal permissiveness is compared against
/// [`brute_force_supremal`].
pub fn verify_supervisor(
    sup: &Automaton,
    plant: &ComposedSystem,
    reqs: &[Requirement],
    oracle: bool,
) -> Result<VerifyReport> {
    let req_auts: Vec<Automaton> = reqs.iter().map(|r| requirement_to_automaton(r, plant)).collect::<Result<_>>()?;
    let plant_parts: Vec<&Automaton> = plant.components().iter().collect();
    let mut spec_parts = plant_parts.clone();
    spec_parts.extend(req_auts.iter());
    let plant_step = Stepper::new(plant_parts)?;
    let spec_step = Stepper::new(spec_parts)?;
    let np = plant.len();

    let mut witnesses = BTreeMap::new();
    let start = (sup.initial(), spec_step.initial());
    let mut parent: HashMap<(StateId, Vec<StateId>), Option<((StateId, Vec<StateId>), String)>> =
        HashMap::from([(start.clone(), None)]);
    let mut queue = VecDeque::from([start]);
    let trace = |parent: &HashMap<_, Option<((StateId, Vec<StateId>), String)>>, mut k: (StateId, Vec<StateId>), last: &str| {
        let mut out = vec![last.to_string()];
        while let Some(Some((p, e))) = parent.get(&k) {
            out.push(e.clone());
            k = p.clone();
        }
        out.reverse();
        out
    };
    while let Some((x, t)) = queue.pop_front() {
        for &(e, y) in sup.outgoing(x) {
            let name = &sup.event(e).name;
            let next = match spec_step.event_index(name) {
                None => Some(t.clone()),
                Some(i) => spec_step.step(&t, i),
            };
            match next {
                None => {
                    witnesses.entry("safe".to_string()).or_insert_with(|| trace(&parent, (x, t.clone()), name));
                }
                Some(u) => {
                    let k = (y, u);
                    if !parent.contains_key(&k) {
                        parent.insert(k.clone(), Some(((x, t.clone()), name.clone())));
                        queue.push_back(k);
                    }
                }
            }
        }
        for i in plant_step.enabled(&t[..np]) {
            let ev = &plant_step.events()[i];
            if !ev.controllable && sup.has_event(&ev.name) && sup.step(x, &ev.name).is_none() {
                witnesses
                    .entry("controllable".to_string())
                    .or_insert_with(|| trace(&parent, (x, t.clone()), &ev.name));
            }
        }
    }
    if let Some(w) = ops::blocking_witness(sup) {
        witnesses.insert("nonblocking".into(), w);
    }
    let maximally_permissive = if oracle {
        Some(match brute_force_supremal(plant, reqs, ORACLE_MAX_TRANSITIONS)? {
            Some(best) => ops::language_equal_exact(sup, &best),
            None => false,
        })
    } else {
        None
    };
    Ok(VerifyReport {
        safe: !witnesses.contains_key("safe"),
        nonblocking: !witnesses.contains_key("nonblocking"),
        controllable: !witnesses.contains_key("controllable"),
        maximally_permissive,
        witnesses,
    })
}

/// Largest number of controllable transitions the brute-force oracle accepts.
pub const ORACLE_MAX_TRANSITIONS: usize = 16;

/// Supremal supervisor by exhaustive search: over every subset of
/// controllable transitions of plant || requirement automata, keep the
/// subsets whose reachable part is nonblocking; the answer is the union of
/// their reachable transitions. `None` if no subset is nonblocking.
pub fn brute_force_supremal(plant: &ComposedSystem, reqs: &[Requirement], max_transitions: usize) -> Result<Option<Automaton>> {
    let req_auts: Vec<Automaton> = reqs.iter().map(|r| requirement_to_automaton(r, plant)).collect::<Result<_>>()?;
    let mut parts: Vec<&Automaton> = plant.components().iter().collect();
    parts.extend(req_auts.iter());
    let p = ops::compose(&parts, "Oracle")?.automaton;
    let ctrl: Vec<(StateId, u32, StateId)> = (0..p.num_states() as StateId)
        .flat_map(|s| p.outgoing(s).iter().map(move |(e, t)| (s, *e, *t)))
        .filter(|(_, e, _)| p.event(*e).controllable)
        .collect();
    if ctrl.len() > max_transitions {
        return Err(Error::StateLimit { limit: max_transitions });
    }
    let all = vec![true; p.num_states()];
    let mut union: HashSet<(StateId, u32, StateId)> = HashSet::new();
    let mut any = false;
    for mask in 0u64..(1u64 << ctrl.len()) {
        let removed: HashSet<(StateId, u32, StateId)> =
            ctrl.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, t)| *t).collect();
        let (cand, order) = ops::restrict_edges(&p, &all, |s, e, t| !removed.contains(&(s, e, t))).expect("initial kept");
        if ops::is_nonblocking(&cand) {
            any = true;
            for s in 0..cand.num_states() as StateId {
                for &(e, t) in cand.outgoing(s) {
                    union.insert((order[s as usize], e, order[t as usize]));
                }
            }
        }
    }
    if !any {
        return Ok(None);
    }
    Ok(ops::restrict_edges(&p, &all, |s, e, t| union.contains(&(s, e, t))).map(|(a, _)| a))
}

/// An MRPS component: a group of plant automata that share events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Component {
    pub name: String,
    pub automata: Vec<String>,
}

pub fn mrps_components(plant: &ComposedSystem) -> Vec<Component> {
    ops::mrps_groups(plant)
        .into_iter()
        .map(|g| {
            let automata: Vec<String> = g.iter().map(|i| plant.components()[*i].name().to_string()).collect();
            let refs: Vec<&str> = automata.iter().map(|s| s.as_str()).collect();
            Component { name: ops::group_name(&refs), automata }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct NodeSupervisor {
    pub node: String,
    /// MRPS components this supervisor is synthesized over.
    pub components: Vec<String>,
    /// `None` for nodes without components or requirements.
    pub supervisor: Option<Supervisor>,
}

#[derive(Debug, Clone)]
pub struct MultilevelSupervisor {
    pub plant: ComposedSystem,
    pub components: Vec<Component>,
    pub tree: ClusterTree,
    pub requirements: Vec<Requirement>,
    /// Aligned with the tree's nodes.
    pub nodes: Vec<NodeSupervisor>,
    /// Requirement name to tree node index.
    pub assignment: BTreeMap<String, usize>,
}

impl MultilevelSupervisor {
    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Component holding the given automaton.
    pub fn component_of(&self, automaton: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.automata.iter().any(|a| a == automaton))
    }

    pub fn node_automata(&self) -> Vec<&Automaton> {
        self.nodes.iter().filter_map(|n| n.supervisor.as_ref().map(|s| &s.automaton)).collect()
    }

    pub fn empty_nodes(&self) -> Vec<&str> {
        self.nodes.iter().filter(|n| n.supervisor.is_none()).map(|n| n.node.as_str()).collect()
    }

    pub fn requirements_of(&self, node: usize) -> Vec<&Requirement> {
        self.requirements.iter().filter(|r| self.assignment.get(&r.name) == Some(&node)).collect()
    }

    /// Synchronous product of all node supervisors.
    pub fn global_product(&self, limit: usize) -> Result<Automaton> {
        let parts = self.node_automata();
        let spec = ComposeSpec { state_limit: limit, ..ComposeSpec::named("Global") };
        Ok(ops::compose_with(&parts, &spec)?.automaton)
    }

    /// Blocking witness of the global product, `None` when the node
    /// supervisors are non-conflicting.
    pub fn conflict_witness(&self, limit: usize) -> Result<Option<Trace>> {
        Ok(ops::blocking_witness(&self.global_product(limit)?))
    }
}

/// Components named by a requirement (event owner and condition automata).
pub fn requirement_components<'c>(r: &Requirement, components: &'c [Component], plant: &ComposedSystem) -> Vec<&'c Component> {
    let mut auts: BTreeSet<String> = r.referenced_automata();
    for a in plant.components() {
        if a.has_event(&r.event) {
            auts.insert(a.name().to_string());
        }
    }
    components.iter().filter(|c| c.automata.iter().any(|a| auts.contains(a))).collect()
}

/// Synthesizes one supervisor per tree node. Each requirement goes to the
/// lowest node covering every component it names; leaves always include
/// their own components.
pub fn multilevel_synthesize(
    plant: &ComposedSystem,
    reqs: &[Requirement],
    tree: &ClusterTree,
    limit: usize,
) -> Result<MultilevelSupervisor> {
    let components = mrps_components(plant);
    let names: Vec<&str> = components.iter().map(|c| c.name.as_str()).collect();
    tree.validate(&names)?;
    let all: Vec<&Automaton> = plant.components().iter().collect();
    check_requirements(&all, reqs)?;
    let mut assignment = BTreeMap::new();
    for r in reqs {
        let comps = requirement_components(r, &components, plant);
        let node = tree
            .lowest_cover(comps.iter().map(|c| c.name.as_str()))
            .ok_or_else(|| Error::ModelReference(format!("requirement `{}` not covered by the tree", r.name)))?;
        if assignment.insert(r.name.clone(), node).is_some() {
            return Err(Error::ModelReference(format!("duplicate requirement name `{}`", r.name)));
        }
    }
    let mut nodes = Vec::with_capacity(tree.len());
    for (i, n) in tree.nodes().iter().enumerate() {
        let node_reqs: Vec<Requirement> = reqs.iter().filter(|r| assignment[&r.name] == i).cloned().collect();
        let mut comp_names: BTreeSet<String> = n.components.iter().cloned().collect();
        for r in &node_reqs {
            comp_names.extend(requirement_components(r, &components, plant).iter().map(|c| c.name.clone()));
        }
        let ordered: Vec<&Component> = components.iter().filter(|c| comp_names.contains(&c.name)).collect();
        let supervisor = if ordered.is_empty() {
            None
        } else {
            let parts: Vec<&Automaton> = ordered
                .iter()
                .flat_map(|c| c.automata.iter().map(|a| plant.get(a).expect("component member")))
                .collect();
            Some(synthesize_parts(&n.name, &parts, &node_reqs, limit).map_err(|e| match e {
                Error::NoSupervisor { .. } => Error::NoSupervisor { node: Some(n.name.clone()) },
                other => Error::Stage { stage: format!("synthesis of {}", n.name), source: Box::new(other) },
            })?)
        };
        nodes.push(NodeSupervisor {
            node: n.name.clone(),
            components: ordered.iter().map(|c| c.name.clone()).collect(),
            supervisor,
        });
    }
    Ok(MultilevelSupervisor {
        plant: plant.clone(),
        components,
        tree: tree.clone(),
        requirements: reqs.to_vec(),
        nodes,
        assignment,
    })
}
