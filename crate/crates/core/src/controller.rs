//! Implementation-readiness checks of a supervisor: finite response,
//! confluence and nonblockingness under control.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::automaton::{Automaton, StateId, Trace};
use crate::ops;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    /// Path from the initial state to where the check fails.
    pub trace: Trace,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerReport {
    pub confluent: bool,
    pub finite_response: bool,
    pub nonblocking_under_control: bool,
    /// Keyed by `confluence`, `finite_response` and
    /// `nonblocking_under_control`; present iff that check failed.
    pub witnesses: BTreeMap<String, Witness>,
}

impl ControllerReport {
    pub fn all(&self) -> bool {
        self.confluent && self.finite_response && self.nonblocking_under_control
    }
}

pub fn check_controller(a: &Automaton) -> ControllerReport {
    let mut witnesses = BTreeMap::new();
    let fr = check_finite_response(a);
    let cf = check_confluence(a);
    let nb = check_nonblocking_under_control(a);
    for (key, w) in [("finite_response", &fr), ("confluence", &cf), ("nonblocking_under_control", &nb)] {
        if let Some(w) = w {
            witnesses.insert(key.to_string(), w.clone());
        }
    }
    ControllerReport {
        confluent: cf.is_none(),
        finite_response: fr.is_none(),
        nonblocking_under_control: nb.is_none(),
        witnesses,
    }
}

fn controllable_succ(a: &Automaton, s: StateId) -> Vec<(u32, StateId)> {
    a.outgoing(s).iter().copied().filter(|(e, _)| a.events()[*e as usize].controllable).collect()
}

fn trace_to(a: &Automaton, s: StateId) -> Trace {
    ops::trace_to_state(a, s).unwrap_or_default()
}

/// `None` when no reachable cycle uses only controllable events, otherwise
/// a path to the cycle followed by one turn around it.
pub fn check_finite_response(a: &Automaton) -> Option<Witness> {
    let reach = ops::reachable(a);
    let n = a.num_states();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; n];
    for root in (0..n).filter(|s| reach[*s]) {
        if color[root] != 0 {
            continue;
        }
        let mut stack: Vec<(StateId, usize)> = vec![(root as StateId, 0)];
        let mut path_events: Vec<u32> = Vec::new();
        color[root] = 1;
        while let Some((s, i)) = stack.last().copied() {
            let succ = controllable_succ(a, s);
            if i < succ.len() {
                stack.last_mut().expect("nonempty").1 += 1;
                let (e, t) = succ[i];
                match color[t as usize] {
                    0 => {
                        color[t as usize] = 1;
                        stack.push((t, 0));
                        path_events.push(e);
                    }
                    1 => {
                        let start = stack.iter().position(|(x, _)| *x == t).expect("on stack");
                        let mut cycle: Vec<String> =
                            path_events[start..].iter().map(|e| a.events()[*e as usize].name.clone()).collect();
                        cycle.push(a.events()[e as usize].name.clone());
                        let mut trace = trace_to(a, t);
                        let note = format!("controllable cycle {} at state {}", cycle.join(" "), a.state_name(t));
                        trace.extend(cycle);
                        return Some(Witness { trace, note });
                    }
                    _ => {}
                }
            } else {
                color[s as usize] = 2;
                stack.pop();
                path_events.pop();
            }
        }
    }
    None
}

/// States reachable from `s` by controllable events only, `s` included.
fn controllable_closure(a: &Automaton, s: StateId) -> Vec<bool> {
    let mut seen = vec![false; a.num_states()];
    let mut queue = VecDeque::from([s]);
    seen[s as usize] = true;
    while let Some(x) = queue.pop_front() {
        for (_, t) in controllable_succ(a, x) {
            if !seen[t as usize] {
                seen[t as usize] = true;
                queue.push_back(t);
            }
        }
    }
    seen
}

fn joinable(a: &Automaton, cache: &mut HashMap<StateId, Vec<bool>>, s1: StateId, s2: StateId) -> bool {
    if s1 == s2 {
        return true;
    }
    let c1 = cache.entry(s1).or_insert_with(|| controllable_closure(a, s1)).clone();
    let c2 = cache.entry(s2).or_insert_with(|| controllable_closure(a, s2));
    c1.iter().zip(c2.iter()).any(|(x, y)| *x && *y)
}

/// `None` when the two successors of every pair of controllable events
/// enabled in a reachable state can be joined by controllable strings.
/// Pairs forming an independence diamond, or leading to the same state,
/// are accepted without search.
pub fn check_confluence(a: &Automaton) -> Option<Witness> {
    let reach = ops::reachable(a);
    let mut cache = HashMap::new();
    for s in (0..a.num_states() as StateId).filter(|s| reach[*s as usize]) {
        let succ = controllable_succ(a, s);
        for (i, &(e1, s1)) in succ.iter().enumerate() {
            for &(e2, s2) in &succ[i + 1..] {
                let (n1, n2) = (&a.events()[e1 as usize].name, &a.events()[e2 as usize].name);
                let diamond = matches!((a.step(s1, n2), a.step(s2, n1)), (Some(x), Some(y)) if x == y);
                if diamond || joinable(a, &mut cache, s1, s2) {
                    continue;
                }
                return Some(Witness {
                    trace: trace_to(a, s),
                    note: format!("after {n1} and after {n2} no common state is reachable by controllable events"),
                });
            }
        }
    }
    None
}

/// Successors under strict priority: controllable events when any is
/// enabled, uncontrollable ones otherwise.
pub fn priority_successors(a: &Automaton, s: StateId) -> Vec<(u32, StateId)> {
    let c = controllable_succ(a, s);
    if !c.is_empty() {
        return c;
    }
    a.outgoing(s).to_vec()
}

/// Marked states in which no controllable event is enabled.
fn settled(a: &Automaton, s: StateId) -> bool {
    a.is_marked(s) && controllable_succ(a, s).is_empty()
}

/// `None` when from every reachable state some path under the priority
/// semantics ends in a marked state that enables no controllable event.
pub fn check_nonblocking_under_control(a: &Automaton) -> Option<Witness> {
    let n = a.num_states();
    let reach = ops::reachable(a);
    let mut pred: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in 0..n as StateId {
        for (_, t) in priority_successors(a, s) {
            pred[t as usize].push(s);
        }
    }
    let mut good = vec![false; n];
    let mut queue: VecDeque<StateId> = (0..n as StateId).filter(|s| settled(a, *s)).collect();
    for s in &queue {
        good[*s as usize] = true;
    }
    while let Some(t) = queue.pop_front() {
        for &s in &pred[t as usize] {
            if !good[s as usize] {
                good[s as usize] = true;
                queue.push_back(s);
            }
        }
    }
    let bad = ops::shortest_trace_to(a, |s| reach[s as usize] && !good[s as usize])?;
    let state = a.run(&bad).unwrap_or_else(|| a.initial());
    Some(Witness {
        trace: bad,
        note: format!("state {} cannot settle in a marked state under controllable-first execution", a.state_name(state)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::automaton;
    use crate::random::{random_automaton, random_events};
    use crate::synthesis::synthesize;
    use crate::toys;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pump() -> Automaton {
        automaton("Pump", &[("Off", true), ("On", true)], &[("c_on", true), ("c_off", true)], &[("Off", "c_on", "On"), ("On", "c_off", "Off")])
            .unwrap()
    }

    #[test]
    fn pump_alone_cycles() {
        let w = check_finite_response(&pump()).unwrap();
        assert_eq!(w.trace, vec!["c_on", "c_off"]);
    }

    #[test]
    fn sensor_gated_pump_responds_finitely() {
        let doc = crate::model::ModelDocument::parse(
            "plant Pump { states Off*, On*; initial Off; edge Off -c_on-> On; edge On -c_off-> Off; }
             plant Level { states Low*, High*; initial Low; uncontrollable u_up, u_down; edge Low -u_up-> High; edge High -u_down-> Low; }
             requirement Pump.c_on needs Level.High;
             requirement Pump.c_off needs Level.Low;",
        )
        .unwrap();
        let sup = synthesize(&doc.system().unwrap(), &doc.requirements).unwrap();
        let r = check_controller(&sup.automaton);
        assert!(r.all(), "{r:?}");
        assert!(r.witnesses.is_empty());
    }

    #[test]
    fn uncontrollable_only_is_finite() {
        let a = automaton("U", &[("0", true)], &[("u", false)], &[("0", "u", "0")]).unwrap();
        assert!(check_finite_response(&a).is_none());
    }

    #[test]
    fn controllable_self_loop_is_a_one_cycle() {
        let a = automaton("L", &[("0", true)], &[("c", true)], &[("0", "c", "0")]).unwrap();
        assert_eq!(check_finite_response(&a).unwrap().trace, vec!["c"]);
    }

    #[test]
    fn diamond_is_confluent_and_race_is_not() {
        assert!(check_confluence(&toys::diamond()).is_none());
        let w = check_confluence(&toys::race_supervisor()).unwrap();
        assert!(w.trace.is_empty());
        assert!(w.note.contains('a') && w.note.contains('b'));
    }

    #[test]
    fn single_choice_is_confluent() {
        let a = automaton("C", &[("0", false), ("1", true)], &[("c", true), ("u", false)], &[("0", "c", "1"), ("0", "u", "1")]).unwrap();
        assert!(check_confluence(&a).is_none());
    }

    #[test]
    fn settling_needs_a_marked_state_without_controllables() {
        // 0 is marked but keeps enabling c; 1 returns only by u
        let a = automaton("N", &[("0", true), ("1", false)], &[("c", true), ("u", false)], &[("0", "c", "1"), ("1", "u", "0")]).unwrap();
        let w = check_nonblocking_under_control(&a).unwrap();
        assert!(w.trace.is_empty());
        let b = automaton("M", &[("0", true)], &[("u", false)], &[("0", "u", "0")]).unwrap();
        assert!(check_nonblocking_under_control(&b).is_none());
    }

    #[test]
    fn priority_hides_uncontrollable_escapes() {
        // from 0 the marked state 2 is reachable only by u, which c preempts
        let a = automaton(
            "P",
            &[("0", false), ("1", false), ("2", true)],
            &[("c", true), ("u", false)],
            &[("0", "c", "1"), ("1", "c", "0"), ("0", "u", "2")],
        )
        .unwrap();
        assert!(crate::ops::is_nonblocking(&a));
        assert!(check_nonblocking_under_control(&a).is_some());
    }

    fn reachable_oracle(a: &Automaton) -> Vec<StateId> {
        let mut seen = vec![a.initial()];
        let mut i = 0;
        while i < seen.len() {
            for (_, t) in a.outgoing(seen[i]) {
                if !seen.contains(t) {
                    seen.push(*t);
                }
            }
            i += 1;
        }
        seen
    }

    /// Every endpoint of a path of at most `len` steps using `next`.
    fn endpoints(s: StateId, len: usize, next: &impl Fn(StateId) -> Vec<StateId>) -> Vec<StateId> {
        let mut out = vec![s];
        if len > 0 {
            for t in next(s) {
                out.extend(endpoints(t, len - 1, next));
            }
        }
        out
    }

    fn has_path_of_len(s: StateId, len: usize, next: &impl Fn(StateId) -> Vec<StateId>) -> bool {
        len == 0 || next(s).into_iter().any(|t| has_path_of_len(t, len - 1, next))
    }

    fn ctl(a: &Automaton) -> impl Fn(StateId) -> Vec<StateId> + '_ {
        move |s| controllable_succ(a, s).into_iter().map(|(_, t)| t).collect()
    }

    fn oracle_finite(a: &Automaton) -> bool {
        let n = a.num_states();
        reachable_oracle(a).into_iter().all(|s| !has_path_of_len(s, n + 1, &ctl(a)))
    }

    fn oracle_confluent(a: &Automaton) -> bool {
        let n = a.num_states();
        let next = ctl(a);
        reachable_oracle(a).into_iter().all(|s| {
            let succ = next(s);
            succ.iter().enumerate().all(|(i, s1)| {
                succ[i + 1..].iter().all(|s2| {
                    let e1 = endpoints(*s1, n, &next);
                    endpoints(*s2, n, &next).iter().any(|x| e1.contains(x))
                })
            })
        })
    }

    fn oracle_nbc(a: &Automaton) -> bool {
        let n = a.num_states();
        let next = |s| priority_successors(a, s).into_iter().map(|(_, t)| t).collect::<Vec<_>>();
        reachable_oracle(a).into_iter().all(|s| endpoints(s, n, &next).into_iter().any(|t| settled(a, t)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn checks_agree_with_path_enumeration(seed in any::<u64>(), states in 1usize..=6, n_events in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let events = random_events(&mut rng, n_events);
            let refs: Vec<(&str, bool)> = events.iter().map(|(e, c)| (e.as_str(), *c)).collect();
            let a = random_automaton(&mut rng, "R", states, &refs, 0.5);
            let r = check_controller(&a);
            prop_assert_eq!(r.finite_response, oracle_finite(&a));
            prop_assert_eq!(r.confluent, oracle_confluent(&a));
            prop_assert_eq!(r.nonblocking_under_control, oracle_nbc(&a));
            for key in ["finite_response", "confluence", "nonblocking_under_control"] {
                let failed = match key {
                    "finite_response" => !r.finite_response,
                    "confluence" => !r.confluent,
                    _ => !r.nonblocking_under_control,
                };
                prop_assert_eq!(r.witnesses.contains_key(key), failed);
            }
            if let Some(w) = r.witnesses.get("finite_response") {
                prop_assert!(a.run(&w.trace).is_some());
            }
        }
    }
}
