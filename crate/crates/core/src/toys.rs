//! Small hand-written systems used in tests, examples and the CLI.

use crate::automaton::{automaton, Automaton};
use crate::localization::LocalSupervisor;
use crate::model::ModelDocument;
use crate::mutex::{MutexLockSpec, SideConditions};
use crate::predicate::Predicate;
use crate::tree::{ClusterTree, Shape};

/// Local supervisor with states 0..4 where `c` loops only after `a` then `b`.
pub fn race_supervisor() -> Automaton {
    automaton(
        "Race",
        &[("0", true), ("1", false), ("2", false), ("3", true), ("4", true)],
        &[("a", true), ("b", true), ("c", true)],
        &[("0", "a", "1"), ("2", "a", "4"), ("0", "b", "2"), ("1", "b", "3"), ("3", "c", "3")],
    )
    .expect("static automaton")
}

/// The independence diamond over `a` and `b`.
pub fn diamond() -> Automaton {
    automaton(
        "Diamond",
        &[("0", true), ("1", false), ("2", false), ("3", true)],
        &[("a", true), ("b", true)],
        &[("0", "a", "1"), ("0", "b", "2"), ("1", "b", "3"), ("2", "a", "3")],
    )
    .expect("static automaton")
}

/// The mutual-exclusion branching: `a` only when x > 0, `b` only when x < 0.
/// The sign of x is set by an uncontrollable choice first.
pub fn branching() -> Automaton {
    automaton(
        "Branching",
        &[("0", true), ("Pos", true), ("Neg", true), ("A", true), ("B", true)],
        &[("a", true), ("b", true), ("u_pos", false), ("u_neg", false)],
        &[
            ("0", "u_pos", "Pos"),
            ("0", "u_neg", "Neg"),
            ("Pos", "a", "A"),
            ("Neg", "b", "B"),
        ],
    )
    .expect("static automaton")
}

/// Four machines `G1..G4`, each `Idle -start-> Busy -done-> Idle` with
/// `done` uncontrollable, and eight requirements spread over the tree of
/// [`machines_tree`].
pub fn machines_model() -> ModelDocument {
    let mut text = String::from("model machines;\n");
    for i in 1..=4 {
        text.push_str(&format!(
            "plant G{i} {{ states Idle*, Busy; initial Idle; uncontrollable done; edge Idle -start-> Busy; edge Busy -done-> Idle; }}\n"
        ));
    }
    text.push_str(
        "requirement R1: G1.start needs G2.Idle;
requirement R2: G2.start needs G1.Idle;
requirement R3: G3.start needs G1.Busy;
requirement R4: G1.start needs G1.Idle;
requirement R5: G3.start needs G3.Idle;
requirement R6: G4.start needs G2.Idle;
requirement R7: G2.start needs G4.Idle;
requirement R8: G4.start needs G4.Idle;
",
    );
    ModelDocument::parse(&text).expect("static model")
}

/// `Sup1 -> {Sup2 -> {G1, G3}, Sup5 -> {G2, G4}}`.
pub fn machines_tree() -> ClusterTree {
    ClusterTree::from_shape(&Shape::node(vec![
        Shape::node(vec![Shape::leaf(&["G1"]), Shape::leaf(&["G3"])]),
        Shape::node(vec![Shape::leaf(&["G2"]), Shape::leaf(&["G4"])]),
    ]))
    .expect("static tree")
}

/// The cluster that fires `b` in the distributed reading of
/// [`race_supervisor`]: `b` happens once.
pub fn race_b_side() -> Automaton {
    automaton("B", &[("0", true), ("1", true)], &[("b", true)], &[("0", "b", "1")]).expect("static automaton")
}

/// Two machines whose `e` events each need two crossed mutex locks. `reset`
/// is uncontrollable.
pub fn crossed_pair() -> ModelDocument {
    ModelDocument::parse(
        "model crossed;
plant P1 { states Idle*, Done; initial Idle; uncontrollable reset; edge Idle -e-> Done; edge Done -reset-> Idle; }
plant P2 { states Idle*, Done; initial Idle; uncontrollable reset; edge Idle -e-> Done; edge Done -reset-> Idle; }
",
    )
    .expect("static model")
}

/// [`race_b_side`] and [`race_supervisor`] as two local supervisors:
/// `LOC1` generates `b`, `LOC2` generates `a` and `c`.
pub fn race_locals() -> Vec<LocalSupervisor> {
    vec![
        LocalSupervisor::from_automata("LOC1", vec![race_b_side()], &["b"]).expect("static automaton"),
        LocalSupervisor::from_automata("LOC2", vec![race_supervisor()], &["a", "c"]).expect("static automaton"),
    ]
}

/// The two machines of [`crossed_pair`] as clusters `C1` and `C2`.
pub fn crossed_locals() -> Vec<LocalSupervisor> {
    let m = crossed_pair();
    let local = |c: &str, p: &str| {
        let owned = [format!("{p}.e"), format!("{p}.reset")];
        let owned: Vec<&str> = owned.iter().map(|s| s.as_str()).collect();
        LocalSupervisor::from_automata(c, vec![m.plant(p).expect("declared").clone()], &owned).expect("static automaton")
    };
    vec![local("C1", "P1"), local("C2", "P2")]
}

/// Two locks acquired in opposite orders by [`crossed_locals`]: lock 1 is
/// homed at `C1`, lock 2 at `C2`, and each machine's `e` is critical for
/// both. A side returns the token once its machine is `Done`.
pub fn crossed_locks() -> Vec<MutexLockSpec> {
    let done = |p: &str| SideConditions {
        request: Predicate::True,
        ret: Predicate::atom(p, "Done"),
    };
    let lock = |id: usize, home: &str, away: &str, h: &str, a: &str| MutexLockSpec {
        lock_id: id,
        home_cluster: home.into(),
        away_cluster: away.into(),
        home_critical_set: [format!("{h}.e")].into_iter().collect(),
        away_critical_set: [format!("{a}.e")].into_iter().collect(),
        home_conditions: done(h),
        away_conditions: done(a),
    };
    vec![lock(1, "C1", "C2", "P1", "P2"), lock(2, "C2", "C1", "P2", "P1")]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops;
    use crate::synthesis::multilevel_synthesize;

    #[test]
    fn machines_builds_seven_supervisors() {
        let m = machines_model();
        assert_eq!(m.requirements.len(), 8);
        let ml = multilevel_synthesize(&m.system().unwrap(), &m.requirements, &machines_tree(), 10_000).unwrap();
        assert_eq!(ml.nodes.len(), 7);
        assert!(ml.nodes.iter().all(|n| n.supervisor.is_some()));
        let sup6 = ml.nodes[5].supervisor.as_ref().unwrap();
        assert!(sup6.requirements.is_empty());
        assert_eq!(sup6.plant_refs(), vec!["G2"]);
        assert_eq!(ml.assignment["R3"], 1);
        assert!(ops::is_nonblocking(&ml.global_product(100_000).unwrap()));
    }

    #[test]
    fn race_languages() {
        let s = race_supervisor();
        assert!(s.accepts(&["a", "b", "c", "c"]));
        assert!(!s.accepts(&["b", "a", "c"]));
        assert!(ops::is_nonblocking(&s));
        assert!(ops::is_nonblocking(&crossed_pair().system().unwrap().product("P").unwrap()));
    }
}
