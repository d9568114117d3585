//! Acceptance criteria, one line per criterion.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use distsup::automaton::{automaton, Automaton};
use distsup::controller::{check_confluence, check_controller, check_finite_response, check_nonblocking_under_control};
use distsup::delay::{
    appendix_oracle, build_sup_prime, check_mutual_exclusion, default_oracle_depth, delay_robustness_check, zero_delay_product,
    DelayedComposition,
};
use distsup::localization::{global_equivalence_check, localize, LocalSupervisor, SharedEventMap};
use distsup::model::ModelDocument;
use distsup::mutex::{apply_locks, plan_locks, verify_mutex_properties, verify_on};
use distsup::ops::{self, DEFAULT_STATE_LIMIT};
use distsup::pipeline::{pipeline_run, report_statespace, top_clusters, PipelineConfig, PipelineState};
use distsup::pump_cellar::{full_tree, pump_cellar_model, reduced_tree, Scale, SensorVariant};
use distsup::random::random_instance;
use distsup::sim::{adversarial_search, monitor_safety, safety_violation, DelayDist, SimConfig, Simulation};
use distsup::synthesis::{brute_force_supremal, mrps_components, multilevel_synthesize, synthesize, verify_supervisor};
use distsup::toys;
use distsup::tree::{ClusterTree, Shape};

const LIMIT: usize = DEFAULT_STATE_LIMIT;
const VARIANTS: [SensorVariant; 2] = [SensorVariant::IndependentSensors, SensorVariant::LadderSensors];

// criterion 1
const SYNTH_INSTANCES: usize = 500;
const SYNTH_MAX_STATES: usize = 5;
const SYNTH_MAX_EVENTS: usize = 4;
const SYNTH_MAX_REQS: usize = 2;
const ORACLE_TRANSITIONS: usize = 20;
// criterion 3
const ORACLE_MIN_DEPTH: usize = 8;
const RANDOM_DELAY_INSTANCES: usize = 150;
// criterion 4
const ADVERSARIAL_MAX_DELAY: u64 = 3;
const ADVERSARIAL_BUDGET: usize = 64;
// criterion 7
const ENSEMBLE_RUNS: u64 = 1000;
const ENSEMBLE_TICKS: u64 = 300;
const ENSEMBLE_ENV_RATE: f64 = 0.6;

// Criteria reported red on purpose; see the decisions ledger.
const KNOWN_RED: [u32; 1] = [9];

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

fn criterion(id: u32, name: &'static str, budget_secs: Option<u64>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    let budget = budget_secs.map(Duration::from_secs);
    let in_time = budget.map_or(true, |b| elapsed <= b);
    let outcome = Outcome { id, name, pass: ok && in_time, detail, elapsed, budget };
    let limit = outcome.budget.map_or(String::new(), |b| format!(" / {}s", b.as_secs()));
    println!(
        "[{}] {:>2} {}: {} ({:.1}s{limit})",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.id,
        outcome.name,
        outcome.detail,
        outcome.elapsed.as_secs_f64()
    );
    outcome
}

fn reduced_pipeline(v: SensorVariant) -> PipelineState {
    let m = pump_cellar_model(v, Scale::Reduced);
    let cfg = PipelineConfig { k: 2, tree: Some(reduced_tree(&m).to_shape()), ..Default::default() };
    pipeline_run(&m, &cfg).expect("reduced pipeline")
}

fn synthesis_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut equal, mut empty_both, mut mismatches) = (0, 0, Vec::new());
    for i in 0..SYNTH_INSTANCES {
        let (sys, reqs) = random_instance(&mut rng, SYNTH_MAX_STATES, SYNTH_MAX_EVENTS, SYNTH_MAX_REQS);
        let oracle = brute_force_supremal(&sys, &reqs, ORACLE_TRANSITIONS).expect("oracle within size");
        let ours = synthesize(&sys, &reqs);
        match (ours, oracle) {
            (Ok(s), Some(best)) if ops::language_equal_exact(&s.automaton, &best) => equal += 1,
            (Err(distsup::Error::NoSupervisor { .. }), None) => empty_both += 1,
            (r, o) => mismatches.push(format!("#{i}: ours {:?}, oracle {}", r.map(|s| s.automaton.num_states()), o.is_some())),
        }
    }
    let detail = format!("{equal} equal, {empty_both} empty in both, {} mismatches of {SYNTH_INSTANCES}", mismatches.len());
    (mismatches.is_empty(), if mismatches.is_empty() { detail } else { format!("{detail}; first {}", mismatches[0]) })
}

fn localization_equivalence() -> (bool, String) {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut check = |label: &str, m: &ModelDocument, tree: &ClusterTree| {
        let ml = multilevel_synthesize(&m.system().unwrap(), &m.requirements, tree, LIMIT).unwrap();
        let (locs, _) = localize(&ml, tree, &top_clusters(tree)).unwrap();
        let eq = global_equivalence_check(&locs, &ml, 10, LIMIT).unwrap();
        ok &= eq.equal && eq.exact;
        parts.push(format!("{label} {}", if eq.equal && eq.exact { "equal" } else { "DIFFERENT" }));
    };
    check("machines", &toys::machines_model(), &toys::machines_tree());
    for v in VARIANTS {
        let m = pump_cellar_model(v, Scale::Reduced);
        check(&format!("reduced/{v:?}"), &m, &reduced_tree(&m));
    }
    (ok, parts.join(", "))
}

fn oracle_on(locs: &[LocalSupervisor], dc: &DelayedComposition) -> bool {
    let sup = zero_delay_product(locs, LIMIT).unwrap();
    let depth = default_oracle_depth(&dc.sup_prime).max(ORACLE_MIN_DEPTH);
    appendix_oracle(&sup, &dc.sup_prime, &dc.delayed_events(), depth).all()
}

/// Robust distributed supervisors of a localized system: the system itself
/// if robust, else its repair if the re-check is robust.
fn robust_versions(locs: Vec<LocalSupervisor>) -> Vec<(Vec<LocalSupervisor>, DelayedComposition)> {
    let map = SharedEventMap::from_locals(&locs).unwrap();
    let Ok(dc) = build_sup_prime(&locs, &map, LIMIT) else { return vec![] };
    let rep = delay_robustness_check(&dc);
    if rep.robust {
        return vec![(locs, dc)];
    }
    if !rep.unrepairable().is_empty() {
        return vec![];
    }
    let plan = plan_locks(&rep, &dc, &locs).unwrap();
    let inst = apply_locks(&locs, &plan, true).unwrap();
    let map2 = SharedEventMap::from_locals(&inst).unwrap();
    let dc2 = build_sup_prime(&inst, &map2, LIMIT).unwrap();
    if delay_robustness_check(&dc2).robust {
        vec![(inst, dc2)]
    } else {
        vec![]
    }
}

fn delay_soundness() -> (bool, String) {
    let mut robust_instances: Vec<(String, Vec<LocalSupervisor>, DelayedComposition)> = Vec::new();
    let mut add = |label: String, locs: Vec<LocalSupervisor>| {
        for (l, dc) in robust_versions(locs) {
            robust_instances.push((label.clone(), l, dc));
        }
    };
    add("race".into(), toys::race_locals());
    let machines = toys::machines_model();
    let tree = toys::machines_tree();
    let ml = multilevel_synthesize(&machines.system().unwrap(), &machines.requirements, &tree, LIMIT).unwrap();
    add("machines".into(), localize(&ml, &tree, &top_clusters(&tree)).unwrap().0);
    add("crossed".into(), apply_locks(&toys::crossed_locals(), &toys::crossed_locks(), true).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut generated = 0;
    while generated < RANDOM_DELAY_INSTANCES {
        let (sys, reqs) = random_instance(&mut rng, 4, 4, 2);
        if sys.len() != 2 {
            continue;
        }
        let comps = mrps_components(&sys);
        let tree = ClusterTree::from_shape(&Shape::node(comps.iter().map(|c| Shape::leaf(&[&c.name])).collect())).unwrap();
        let Ok(ml) = multilevel_synthesize(&sys, &reqs, &tree, LIMIT) else { continue };
        let Ok((locs, _)) = localize(&ml, &tree, &top_clusters(&tree)) else { continue };
        generated += 1;
        add(format!("random#{generated}"), locs);
    }

    let failures: Vec<&str> = robust_instances.iter().filter(|(_, l, dc)| !oracle_on(l, dc)).map(|(n, _, _)| n.as_str()).collect();
    let detail = format!("{} robust instances, {} oracle failures", robust_instances.len(), failures.len());
    (failures.is_empty(), if failures.is_empty() { detail } else { format!("{detail}: {}", failures.join(", ")) })
}

fn race_failure() -> (bool, String) {
    let locs = toys::race_locals();
    let map = SharedEventMap::from_locals(&locs).unwrap();
    let dc = build_sup_prime(&locs, &map, LIMIT).unwrap();
    let rep = delay_robustness_check(&dc);
    let pair = !rep.robust && rep.has_pair("b'", "a");
    let sup = zero_delay_product(&locs, LIMIT).unwrap();
    let sim = Simulation::new(&locs).unwrap();
    let base = SimConfig { max_ticks: 20, ..Default::default() };
    let hit = adversarial_search(&sim, &sup, &base, ADVERSARIAL_MAX_DELAY, ADVERSARIAL_BUDGET).unwrap();
    let witness = hit.as_ref().is_some_and(|h| {
        let violation = safety_violation(&h.trace, &sup);
        violation.as_ref() == Some(&h.violating_prefix) && !sup.accepts(&h.violating_prefix)
    });
    let shown = hit.as_ref().map_or("none".into(), |h| h.violating_prefix.join(" "));
    (pair && witness, format!("pair (b', a) reported: {pair}; violating trace: {shown}"))
}

fn mutex_repair() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for v in VARIANTS {
        let m = pump_cellar_model(v, Scale::Reduced);
        let tree = reduced_tree(&m);
        let sys = m.system().unwrap();
        let ml = multilevel_synthesize(&sys, &m.requirements, &tree, LIMIT).unwrap();
        let (locs, map) = localize(&ml, &tree, &top_clusters(&tree)).unwrap();
        let dc = build_sup_prime(&locs, &map, LIMIT).unwrap();
        let rep = delay_robustness_check(&dc);
        let plan = plan_locks(&rep, &dc, &locs).unwrap();
        let inst = apply_locks(&locs, &plan, true).unwrap();
        let dc2 = build_sup_prime(&inst, &SharedEventMap::from_locals(&inst).unwrap(), LIMIT).unwrap();
        let excl = rep.pairs.iter().all(|p| check_mutual_exclusion(&dc2.sup_prime, &p.delayed_event, &p.other_event));
        let robust = delay_robustness_check(&dc2).robust;
        let mr = verify_on(&dc2, &inst, &plan).unwrap();
        let z = zero_delay_product(&inst, LIMIT).unwrap();
        let vr = verify_supervisor(&z, &sys, &m.requirements, false).unwrap();
        let good = !rep.robust && excl && robust && mr.safety && mr.deadlock_free && vr.safe && vr.nonblocking && vr.controllable;
        ok &= good;
        parts.push(format!(
            "{v:?}: {} pairs, {} lock(s), exclusive {excl}, robust {robust}, nonblocking {}, safe {}, controllable {}",
            rep.pairs.len(),
            plan.len(),
            vr.nonblocking,
            vr.safe,
            vr.controllable
        ));
    }
    (ok, parts.join("; "))
}

fn deadlock_ordering() -> (bool, String) {
    let verdict = |ordering: bool| {
        let inst = apply_locks(&toys::crossed_locals(), &toys::crossed_locks(), ordering).unwrap();
        let nb = ops::is_nonblocking(&zero_delay_product(&inst, LIMIT).unwrap());
        let m = verify_mutex_properties(&inst, &toys::crossed_locks(), LIMIT).unwrap();
        nb && m.deadlock_free
    };
    let (without, with) = (verdict(false), verdict(true));
    (!without && with, format!("deadlock-free without ordering: {without}, with ordering: {with}"))
}

fn simulator_ensemble() -> (bool, String) {
    let mut parts = Vec::new();
    let mut ok = true;
    for v in VARIANTS {
        let st = reduced_pipeline(v);
        let original = st.multilevel.global_product(LIMIT).unwrap();
        let sim = Simulation::new(&st.instrumented).unwrap().with_locks(&st.locks);
        let mut failures = 0;
        for seed in 0..ENSEMBLE_RUNS {
            let cfg = SimConfig {
                seed,
                default_delay: DelayDist::Uniform { lo: 1, hi: 5 },
                max_ticks: ENSEMBLE_TICKS,
                env_rate: ENSEMBLE_ENV_RATE,
                ..Default::default()
            };
            let out = sim.run(&cfg).unwrap();
            if !monitor_safety(&out.trace, &original) || !out.verdict.token_conserved {
                failures += 1;
            }
        }
        ok &= failures == 0;
        parts.push(format!("{v:?}: {failures}/{ENSEMBLE_RUNS} failures"));
    }
    (ok, parts.join(", "))
}

fn case_study_structure() -> (bool, String) {
    let m = pump_cellar_model(SensorVariant::IndependentSensors, Scale::Full);
    let sys = m.system().unwrap();
    let comps = mrps_components(&sys).len();
    let reqs = m.requirements.len();
    let ml = multilevel_synthesize(&sys, &m.requirements, &full_tree(&m), LIMIT).unwrap();
    let empty = ml.empty_nodes();
    let ok = comps == 27 && reqs == 37 && ml.nodes.len() == 33 && empty == vec!["Sup2"];
    (ok, format!("{comps} components, {reqs} requirements, {} node supervisors, empty nodes {empty:?}", ml.nodes.len()))
}

fn statespace_reduction() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for v in VARIANTS {
        let m = pump_cellar_model(v, Scale::Reduced);
        let cfg = PipelineConfig { k: 2, tree: Some(reduced_tree(&m).to_shape()), stop_after: Some("localize".into()), ..Default::default() };
        let rows = report_statespace(&pipeline_run(&m, &cfg).unwrap());
        let global = rows[0].states;
        let good = rows.iter().all(|r| r.exact) && rows[1..].iter().all(|r| r.states < global);
        ok &= good;
        let locals: Vec<String> = rows[1..].iter().map(|r| format!("{}={}", r.name, r.states)).collect();
        parts.push(format!("{v:?}: global {global}, {}", locals.join(" ")));
    }
    (ok, parts.join("; "))
}

fn controller_checks() -> (bool, String) {
    let m = pump_cellar_model(SensorVariant::LadderSensors, Scale::Reduced);
    let ml = multilevel_synthesize(&m.system().unwrap(), &m.requirements, &reduced_tree(&m), LIMIT).unwrap();
    let ladder = check_controller(&ml.global_product(LIMIT).unwrap());

    let mi = pump_cellar_model(SensorVariant::IndependentSensors, Scale::Reduced);
    let mli = multilevel_synthesize(&mi.system().unwrap(), &mi.requirements, &reduced_tree(&mi), LIMIT).unwrap();
    let independent = check_controller(&mli.global_product(LIMIT).unwrap());

    let pump: Automaton =
        automaton("Pump", &[("Off", true), ("On", false)], &[("c_on", true), ("c_off", true)], &[("Off", "c_on", "On"), ("On", "c_off", "Off")])
            .unwrap();
    let unsettled = automaton(
        "Unsettled",
        &[("0", false), ("1", true), ("2", false)],
        &[("c", true), ("d", true), ("u", false)],
        &[("0", "c", "2"), ("0", "u", "1"), ("2", "d", "2")],
    )
    .unwrap();
    let cycle = check_finite_response(&pump).is_some_and(|w| !w.trace.is_empty());
    let choice = check_confluence(&toys::race_supervisor()).is_some();
    let settle = check_nonblocking_under_control(&unsettled).is_some();
    let ok = ladder.all() && !independent.all() && cycle && choice && settle;
    (
        ok,
        format!(
            "ladder: confluent {} finite response {} nonblocking under control {}; independent passes all: {}; injected cycle/confluence/settle detected: {cycle}/{choice}/{settle}",
            ladder.confluent,
            ladder.finite_response,
            ladder.nonblocking_under_control,
            independent.all()
        ),
    )
}

#[test]
fn acceptance() {
    println!();
    let outcomes = vec![
        criterion(1, "synthesis matches brute-force supremal", Some(60), synthesis_oracle),
        criterion(2, "localized supervisors equal the global supervisor", Some(30), localization_equivalence),
        criterion(3, "robust verdicts confirmed by the five-condition oracle", Some(300), delay_soundness),
        criterion(4, "delayed shared event breaks the two-cluster example", Some(10), race_failure),
        criterion(5, "mutex repair of the reduced pump cellar", Some(300), mutex_repair),
        criterion(6, "lock ordering avoids crossed-acquisition deadlock", Some(30), deadlock_ordering),
        criterion(7, "simulator safety ensemble", Some(300), simulator_ensemble),
        criterion(8, "pump-cellar case-study structure", None, case_study_structure),
        criterion(9, "local statespaces below global", None, statespace_reduction),
        criterion(10, "controller properties and counterexamples", Some(60), controller_checks),
    ];
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!("{} of {} criteria pass; known red: {KNOWN_RED:?}", outcomes.len() - failed.len(), outcomes.len());
    let unexpected: Vec<u32> = failed.iter().copied().filter(|id| !KNOWN_RED.contains(id)).collect();
    assert!(unexpected.is_empty(), "failing criteria: {unexpected:?}");
}
