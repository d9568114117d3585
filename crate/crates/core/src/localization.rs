//! Splits a multilevel supervisor into one local supervisor per top-level
//! cluster. Foreign automata that are still referenced stay as observers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::automaton::{Automaton, Trace};
use crate::error::{Error, Result};
use crate::ops::{self, ComposeSpec};
use crate::synthesis::{Guard, MultilevelSupervisor, Supervisor};
use crate::tree::ClusterTree;

pub const OBSERVER_PREFIX: &str = "obs_";

pub fn observer_name(cluster: &str, automaton: &str) -> String {
    format!("{OBSERVER_PREFIX}{cluster}_{automaton}")
}

#[derive(Debug, Clone)]
pub struct LocalSupervisor {
    pub cluster: String,
    /// MRPS components controlled by this cluster.
    pub components: Vec<String>,
    pub supervisors: Vec<Supervisor>,
    /// Original names of the foreign automata kept as observers.
    pub observers: Vec<String>,
    pub controllable_set: BTreeSet<String>,
    /// Every event generated inside the cluster.
    pub owned_events: BTreeSet<String>,
    pub observed_foreign_events: BTreeSet<String>,
}

impl LocalSupervisor {
    /// Wraps ready-made automata as a local supervisor owning `owned`.
    pub fn from_automata(cluster: &str, automata: Vec<Automaton>, owned: &[&str]) -> Result<LocalSupervisor> {
        let mut supervisors = Vec::new();
        for a in automata {
            let name = a.name().to_string();
            supervisors.push(Supervisor::rebuild(&name, vec![a], vec![], vec![], ops::DEFAULT_STATE_LIMIT)?);
        }
        let owned: BTreeSet<String> = owned.iter().map(|s| s.to_string()).collect();
        let mut controllable_set = BTreeSet::new();
        let mut alphabet = BTreeSet::new();
        for s in &supervisors {
            for e in s.automaton.events() {
                alphabet.insert(e.name.clone());
                if e.controllable && owned.contains(&e.name) {
                    controllable_set.insert(e.name.clone());
                }
            }
        }
        Ok(LocalSupervisor {
            cluster: cluster.to_string(),
            components: Vec::new(),
            supervisors,
            observers: Vec::new(),
            controllable_set,
            observed_foreign_events: alphabet.difference(&owned).cloned().collect(),
            owned_events: owned,
        })
    }

    pub fn automata(&self) -> Vec<&Automaton> {
        self.supervisors.iter().map(|s| &s.automaton).collect()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.supervisors.iter().flat_map(|s| s.automaton.alphabet()).collect()
    }

    /// Zero-delay product of this cluster's supervisors.
    pub fn product(&self, limit: usize) -> Result<Automaton> {
        let spec = ComposeSpec { state_limit: limit, ..ComposeSpec::named(&format!("LOC_{}", self.cluster)) };
        Ok(ops::compose_with(&self.automata(), &spec)?.automaton)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedEvent {
    pub event: String,
    pub source: String,
    pub destinations: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedEventMap {
    pub entries: Vec<SharedEvent>,
}

impl SharedEventMap {
    pub fn from_locals(locs: &[LocalSupervisor]) -> Result<SharedEventMap> {
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for l in locs {
            for e in &l.owned_events {
                if let Some(prev) = owner.insert(e, &l.cluster) {
                    return Err(Error::Partition(format!("event `{e}` generated in both `{prev}` and `{}`", l.cluster)));
                }
            }
        }
        let mut dests: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for l in locs {
            for e in &l.observed_foreign_events {
                dests.entry(e.clone()).or_default().push(l.cluster.clone());
            }
        }
        let mut entries = Vec::new();
        for (event, destinations) in dests {
            let source = owner
                .get(event.as_str())
                .ok_or_else(|| Error::Partition(format!("observed event `{event}` is generated by no cluster")))?;
            entries.push(SharedEvent { event, source: source.to_string(), destinations });
        }
        Ok(SharedEventMap { entries })
    }

    pub fn get(&self, event: &str) -> Option<&SharedEvent> {
        self.entries.iter().find(|e| e.event == event)
    }

    /// `(source, destination)` links that carry at least one event.
    pub fn links(&self) -> BTreeSet<(String, String)> {
        self.entries
            .iter()
            .flat_map(|e| e.destinations.iter().map(move |d| (e.source.clone(), d.clone())))
            .collect()
    }
}

/// Drops requirements and guards on events outside `ctrl`, then every
/// foreign automaton that is no longer referenced. Remaining foreign
/// automata are renamed as observers.
fn localize_node(
    sup: &Supervisor,
    name: &str,
    cluster: &str,
    own_automata: &BTreeSet<String>,
    ctrl: &BTreeSet<String>,
    observers: &mut BTreeSet<String>,
) -> Result<Option<Supervisor>> {
    let reqs: Vec<_> = sup.requirements.iter().filter(|r| ctrl.contains(&r.event)).cloned().collect();
    let guards: Vec<Guard> = sup.guards.iter().filter(|g| ctrl.contains(&g.event)).cloned().collect();
    let mut referenced: BTreeSet<String> = reqs.iter().flat_map(|r| r.referenced_automata()).collect();
    referenced.extend(guards.iter().flat_map(|g| g.referenced_automata()));
    let foreign = |a: &str| !own_automata.contains(a);
    let plants: Vec<Automaton> = sup
        .plants
        .iter()
        .filter(|p| !foreign(p.name()) || referenced.contains(p.name()))
        .map(|p| {
            let mut p = p.clone();
            if foreign(p.name()) {
                observers.insert(p.name().to_string());
                p.set_name(observer_name(cluster, p.name()));
            }
            p
        })
        .collect();
    if plants.is_empty() {
        return Ok(None);
    }
    let rename = |a: &str| if foreign(a) { observer_name(cluster, a) } else { a.to_string() };
    let reqs = reqs
        .into_iter()
        .map(|mut r| {
            r.condition = r.condition.rename_automata(&rename);
            r
        })
        .collect();
    let guards = guards
        .into_iter()
        .map(|mut g| {
            g.automata = g.automata.iter().map(|a| rename(a)).collect();
            g
        })
        .collect();
    Supervisor::rebuild(name, plants, reqs, guards, ops::DEFAULT_STATE_LIMIT).map(Some)
}

/// One local supervisor per node of `k_clusters`, which must be disjoint
/// subtrees covering every leaf of the tree.
pub fn localize(
    ml: &MultilevelSupervisor,
    tree: &ClusterTree,
    k_clusters: &[usize],
) -> Result<(Vec<LocalSupervisor>, SharedEventMap)> {
    let mut cluster_of: BTreeMap<String, usize> = BTreeMap::new();
    for &k in k_clusters {
        if k >= tree.len() {
            return Err(Error::Partition(format!("no tree node with index {k}")));
        }
        for c in tree.components_under(k) {
            if cluster_of.insert(c.clone(), k).is_some() {
                return Err(Error::Partition(format!("component `{c}` lies in more than one cluster")));
            }
        }
    }
    for c in &ml.components {
        if !cluster_of.contains_key(&c.name) {
            return Err(Error::Partition(format!("component `{}` lies in no cluster", c.name)));
        }
    }
    let mut locs = Vec::new();
    for &k in k_clusters {
        let cname = tree.node(k).name.clone();
        let comps: Vec<String> = ml.components.iter().filter(|c| cluster_of[&c.name] == k).map(|c| c.name.clone()).collect();
        let own_automata: BTreeSet<String> = ml
            .components
            .iter()
            .filter(|c| comps.contains(&c.name))
            .flat_map(|c| c.automata.iter().cloned())
            .collect();
        let mut owned_events = BTreeSet::new();
        let mut ctrl = BTreeSet::new();
        for a in &own_automata {
            for e in ml.plant.get(a).expect("component member").events() {
                owned_events.insert(e.name.clone());
                if e.controllable {
                    ctrl.insert(e.name.clone());
                }
            }
        }
        let mut observers = BTreeSet::new();
        let mut supervisors = Vec::new();
        for (i, node) in ml.nodes.iter().enumerate() {
            let Some(sup) = &node.supervisor else { continue };
            let inside = tree.is_ancestor(k, i) || i == k;
            let above = tree.is_ancestor(i, k);
            if !inside && !above {
                continue;
            }
            let name = if inside { node.node.clone() } else { format!("{}_{}", node.node, cname) };
            if let Some(s) = localize_node(sup, &name, &cname, &own_automata, &ctrl, &mut observers)? {
                supervisors.push(s);
            }
        }
        let alphabet: BTreeSet<String> = supervisors.iter().flat_map(|s| s.automaton.alphabet()).collect();
        locs.push(LocalSupervisor {
            cluster: cname,
            components: comps,
            supervisors,
            observers: observers.into_iter().collect(),
            observed_foreign_events: alphabet.difference(&owned_events).cloned().collect(),
            controllable_set: ctrl,
            owned_events,
        });
    }
    let all_ctrl: usize = locs.iter().map(|l| l.controllable_set.len()).sum();
    let sigma_c: BTreeSet<&str> = ml
        .plant
        .components()
        .iter()
        .flat_map(|a| a.events().iter().filter(|e| e.controllable).map(|e| e.name.as_str()))
        .collect();
    let sigma_c = sigma_c.len();
    if all_ctrl != sigma_c {
        return Err(Error::Partition(format!("{all_ctrl} controllable events assigned, system has {sigma_c}")));
    }
    let map = SharedEventMap::from_locals(&locs)?;
    Ok((locs, map))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equivalence {
    pub equal: bool,
    /// Whether the comparison covered the full products rather than a depth bound.
    pub exact: bool,
    pub witness: Option<Trace>,
}

/// Zero-delay product of the local supervisors versus the product of the
/// node supervisors. Exact when both products fit in `limit` states,
/// otherwise a lazy comparison up to `depth` events and `limit / 4` visited
/// state pairs.
pub fn global_equivalence_check(
    locs: &[LocalSupervisor],
    global: &MultilevelSupervisor,
    depth: usize,
    limit: usize,
) -> Result<Equivalence> {
    let local_parts: Vec<&Automaton> = locs.iter().flat_map(|l| l.automata()).collect();
    let global_parts = global.node_automata();
    let spec = ComposeSpec { state_limit: limit, ..ComposeSpec::named("Distributed") };
    let exact = match ops::compose_with(&local_parts, &spec) {
        Ok(l) => match global.global_product(limit) {
            Ok(g) => Some((l.automaton, g)),
            Err(Error::StateLimit { .. }) => None,
            Err(e) => return Err(e),
        },
        Err(Error::StateLimit { .. }) => None,
        Err(e) => return Err(e),
    };
    let witness = match &exact {
        Some((l, g)) => ops::language_difference(l, g, None),
        None => lazy_difference(&local_parts, &global_parts, depth, limit / 4)?,
    };
    Ok(Equivalence { equal: witness.is_none(), exact: exact.is_some(), witness })
}

/// Breadth-first search over both products side by side without building
/// them, stopping after `depth` events.
fn lazy_difference(a: &[&Automaton], b: &[&Automaton], depth: usize, budget: usize) -> Result<Option<Trace>> {
    let sa = ops::Stepper::new(a.to_vec())?;
    let sb = ops::Stepper::new(b.to_vec())?;
    let events: BTreeSet<String> = sa.events().iter().chain(sb.events().iter()).map(|e| e.name.clone()).collect();
    let start = (sa.initial(), sb.initial());
    if sa.is_marked(&start.0) != sb.is_marked(&start.1) {
        return Ok(Some(Vec::new()));
    }
    let mut seen = std::collections::HashSet::from([start.clone()]);
    let mut frontier = vec![(start, Vec::<String>::new())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for ((x, y), trace) in frontier {
            for e in &events {
                let nx = sa.event_index(e).and_then(|i| sa.step(&x, i));
                let ny = sb.event_index(e).and_then(|i| sb.step(&y, i));
                let extend = || {
                    let mut t = trace.clone();
                    t.push(e.clone());
                    t
                };
                match (nx, ny) {
                    (None, None) => {}
                    (Some(nx), Some(ny)) => {
                        if sa.is_marked(&nx) != sb.is_marked(&ny) {
                            return Ok(Some(extend()));
                        }
                        if seen.len() < budget && seen.insert((nx.clone(), ny.clone())) {
                            next.push(((nx, ny), extend()));
                        }
                    }
                    _ => return Ok(Some(extend())),
                }
            }
        }
        frontier = next;
    }
    Ok(None)
}

#[derive(Serialize)]
struct ObserverDoc<'a> {
    cluster: &'a str,
    components: &'a [String],
    observers: &'a [String],
    controllable_set: &'a BTreeSet<String>,
    observed_foreign_events: &'a BTreeSet<String>,
}

/// Writes one directory per cluster with a JSON file per supervisor
/// automaton and `observers.json`, plus `shared_events.json` at the top.
pub fn write_bundle(locs: &[LocalSupervisor], map: &SharedEventMap, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for l in locs {
        let sub = dir.join(&l.cluster);
        std::fs::create_dir_all(&sub)?;
        for s in &l.supervisors {
            std::fs::write(sub.join(format!("{}.json", s.name)), s.automaton.to_json())?;
        }
        let doc = ObserverDoc {
            cluster: &l.cluster,
            components: &l.components,
            observers: &l.observers,
            controllable_set: &l.controllable_set,
            observed_foreign_events: &l.observed_foreign_events,
        };
        std::fs::write(sub.join("observers.json"), serde_json::to_string_pretty(&doc)?)?;
    }
    std::fs::write(dir.join("shared_events.json"), serde_json::to_string_pretty(map)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::multilevel_synthesize;
    use crate::toys;

    fn machines() -> MultilevelSupervisor {
        let m = toys::machines_model();
        multilevel_synthesize(&m.system().unwrap(), &m.requirements, &toys::machines_tree(), 100_000).unwrap()
    }

    #[test]
    fn machines_two_clusters() {
        let ml = machines();
        let (locs, map) = localize(&ml, &ml.tree, &[1, 4]).unwrap();
        assert_eq!(locs[0].observers, vec!["G2"]);
        assert_eq!(locs[1].observers, vec!["G1"]);
        let names: Vec<&str> = locs[0].supervisors.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, vec!["Sup1_Sup2", "Sup2", "Sup3", "Sup4"]);
        let names: Vec<&str> = locs[1].supervisors.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, vec!["Sup1_Sup5", "Sup5", "Sup6", "Sup7"]);
        for l in &locs {
            for s in &l.supervisors {
                assert!(s.requirements.iter().all(|r| l.controllable_set.contains(&r.event)));
                assert!(s.guards.iter().all(|g| l.controllable_set.contains(&g.event)));
            }
        }
        assert_eq!(map.get("G2.start").unwrap().destinations, vec!["Sup2"]);
        assert_eq!(map.get("G1.done").unwrap().source, "Sup2");
        let eq = global_equivalence_check(&locs, &ml, 8, 100_000).unwrap();
        assert!(eq.equal && eq.exact, "{eq:?}");
    }

    #[test]
    fn observers_are_verbatim_copies() {
        let ml = machines();
        let (locs, _) = localize(&ml, &ml.tree, &[1, 4]).unwrap();
        for l in &locs {
            for s in &l.supervisors {
                for p in &s.plants {
                    if let Some(orig) = p.name().strip_prefix(&format!("{OBSERVER_PREFIX}{}_", l.cluster)) {
                        let mut q = p.clone();
                        q.set_name(orig);
                        assert_eq!(&q, ml.plant.get(orig).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn single_cluster_is_identity() {
        let ml = machines();
        let (locs, map) = localize(&ml, &ml.tree, &[0]).unwrap();
        assert_eq!(locs.len(), 1);
        assert!(locs[0].observers.is_empty());
        assert!(map.entries.is_empty());
        assert_eq!(locs[0].supervisors.len(), 7);
        assert!(global_equivalence_check(&locs, &ml, 8, 100_000).unwrap().equal);
    }

    #[test]
    fn bad_partitions() {
        let ml = machines();
        assert!(matches!(localize(&ml, &ml.tree, &[1]), Err(Error::Partition(_))));
        assert!(matches!(localize(&ml, &ml.tree, &[0, 1]), Err(Error::Partition(_))));
    }

    #[test]
    fn deleted_requirement_is_detected() {
        let ml = machines();
        let (mut locs, _) = localize(&ml, &ml.tree, &[1, 4]).unwrap();
        let s = &locs[0].supervisors[0];
        assert!(!s.requirements.is_empty());
        let reqs = s.requirements[1..].to_vec();
        locs[0].supervisors[0] = Supervisor::rebuild(&s.name, s.plants.clone(), reqs, s.guards.clone(), 1000).unwrap();
        let eq = global_equivalence_check(&locs, &ml, 8, 100_000).unwrap();
        assert!(!eq.equal);
        assert!(eq.witness.is_some());
    }

    #[test]
    fn lazy_check_agrees_with_exact() {
        let ml = machines();
        let (locs, _) = localize(&ml, &ml.tree, &[1, 4]).unwrap();
        let eq = global_equivalence_check(&locs, &ml, 10, 3).unwrap();
        assert!(eq.equal && !eq.exact);
    }

    #[test]
    fn bundle_layout() {
        let ml = machines();
        let (locs, map) = localize(&ml, &ml.tree, &[1, 4]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&locs, &map, dir.path()).unwrap();
        assert!(dir.path().join("shared_events.json").exists());
        assert!(dir.path().join("Sup2/observers.json").exists());
        assert!(dir.path().join("Sup5/Sup7.json").exists());
    }
}
