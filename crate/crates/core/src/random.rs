//! Seeded generators of small automata and synthesis instances for
//! property tests and oracle comparisons.

use rand::Rng;

use crate::automaton::{Automaton, AutomatonBuilder, Event};
use crate::ops::ComposedSystem;
use crate::predicate::{Predicate, Requirement};

/// A deterministic automaton with `states` states over `events`
/// (`(name, controllable)`), each state-event pair getting an edge with
/// probability `density`. State 0 is initial.
pub fn random_automaton(rng: &mut impl Rng, name: &str, states: usize, events: &[(&str, bool)], density: f64) -> Automaton {
    let mut b = AutomatonBuilder::new(name);
    for (e, c) in events {
        b.event(if *c { Event::controllable(*e) } else { Event::uncontrollable(*e) }).expect("distinct events");
    }
    let ids: Vec<_> = (0..states).map(|i| b.state(i.to_string(), rng.gen_bool(0.5))).collect();
    b.initial(ids[0]);
    for &s in &ids {
        for (e, _) in events {
            if rng.gen_bool(density) {
                let t = ids[rng.gen_range(0..states)];
                b.edge(s, e, t).expect("declared state and event");
            }
        }
    }
    b.build().expect("well-formed automaton")
}

/// Random events `e0..` with random controllability; at least one is
/// controllable.
pub fn random_events(rng: &mut impl Rng, count: usize) -> Vec<(String, bool)> {
    let mut out: Vec<(String, bool)> = (0..count).map(|i| (format!("e{i}"), rng.gen_bool(0.6))).collect();
    if !out.iter().any(|(_, c)| *c) {
        out[0].1 = true;
    }
    out
}

fn random_atom(rng: &mut impl Rng, plants: &[Automaton]) -> Predicate {
    let p = &plants[rng.gen_range(0..plants.len())];
    let s = rng.gen_range(0..p.num_states());
    Predicate::atom(p.name(), p.state_name(s as u32))
}

fn random_condition(rng: &mut impl Rng, plants: &[Automaton]) -> Predicate {
    match rng.gen_range(0..4) {
        0 => random_atom(rng, plants),
        1 => Predicate::not(random_atom(rng, plants)),
        2 => Predicate::or([random_atom(rng, plants), random_atom(rng, plants)]),
        _ => Predicate::and([random_atom(rng, plants), Predicate::not(random_atom(rng, plants))]),
    }
}

/// A plant of at most `max_states` reachable product states over at most
/// `max_events` events, and up to `max_reqs` requirements on its
/// controllable events.
pub fn random_instance(rng: &mut impl Rng, max_states: usize, max_events: usize, max_reqs: usize) -> (ComposedSystem, Vec<Requirement>) {
    let n_events = rng.gen_range(1..=max_events);
    let events = random_events(rng, n_events);
    let refs: Vec<(&str, bool)> = events.iter().map(|(e, c)| (e.as_str(), *c)).collect();
    let plants = if max_states >= 4 && rng.gen_bool(0.3) {
        // two components with disjoint alphabets, 2 states each
        let split = rng.gen_range(1..=refs.len());
        let (a, b) = refs.split_at(split);
        let mut out = vec![random_automaton(rng, "P", 2, a, 0.7)];
        if !b.is_empty() {
            out.push(random_automaton(rng, "Q", 2, b, 0.7));
        }
        out
    } else {
        let n = rng.gen_range(1..=max_states);
        vec![random_automaton(rng, "P", n, &refs, 0.6)]
    };
    let controllable: Vec<&str> = refs.iter().filter(|(_, c)| *c).map(|(e, _)| *e).collect();
    let n_reqs = rng.gen_range(0..=max_reqs);
    let reqs = (0..n_reqs)
        .map(|i| {
            let e = controllable[rng.gen_range(0..controllable.len())];
            Requirement::new(format!("R{i}"), e, random_condition(rng, &plants))
        })
        .collect();
    (ComposedSystem::new(plants).expect("consistent alphabets"), reqs)
}
