//! End-to-end pipeline from a model to a delay-robust distributed
//! supervisor bundle, with every stage persisted as JSON and chained by
//! content hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::automaton::Automaton;
use crate::clustering::{adjust_clusters, markov_cluster, restrict_to_k_top_clusters, ClusterEdit, ClusteringParams, ClusteringResult};
use crate::controller::{check_controller, ControllerReport};
use crate::delay::{appendix_oracle, build_sup_prime, default_oracle_depth, delay_robustness_check, zero_delay_product, DelayCriticalReport, OracleReport};
use crate::dsm::{build_dmms, build_dsm, Dmm, Dsm};
use crate::error::{Error, Result};
use crate::localization::{global_equivalence_check, localize, write_bundle, Equivalence, LocalSupervisor, SharedEventMap};
use crate::model::ModelDocument;
use crate::mutex::{apply_locks, plan_locks, verify_mutex_properties, MutexLockSpec, MutexReport};
use crate::ops::{self, ComposedSystem, DEFAULT_STATE_LIMIT};
use crate::synthesis::{mrps_components, multilevel_synthesize, Component, MultilevelSupervisor};
use crate::tree::{ClusterTree, Shape};

/// Environment variable naming the directory under which runs are stored.
pub const RUN_DIR_ENV: &str = "DISTSUP_RUN_DIR";

pub const STAGES: [&str; 11] = [
    "model",
    "mrps",
    "dsm",
    "cluster",
    "synthesize",
    "localize",
    "channels",
    "check_delay",
    "instrument",
    "recheck",
    "controller",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Number of top-level clusters, one local supervisor each.
    pub k: usize,
    #[serde(default)]
    pub params: ClusteringParams,
    #[serde(default)]
    pub edits: Vec<ClusterEdit>,
    /// Replaces clustering when set; edits still apply.
    #[serde(default)]
    pub tree: Option<Shape>,
    pub state_limit: usize,
    /// Acquire overlapping locks in lock order.
    pub ordering: bool,
    /// Run the brute-force delay oracle on the repaired system.
    #[serde(default)]
    pub oracle: bool,
    /// Last stage to run; later stages are recorded as skipped.
    #[serde(default)]
    pub stop_after: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 2,
            params: ClusteringParams::default(),
            edits: Vec::new(),
            tree: None,
            state_limit: DEFAULT_STATE_LIMIT,
            ordering: true,
            oracle: false,
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub input_hash: String,
    pub output_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    /// Stages of `self` whose inputs differ from the same stage in `old`,
    /// together with everything downstream of the first such stage.
    pub fn stale_since(&self, old: &Manifest) -> Vec<String> {
        let first = self.stages.iter().position(|r| {
            old.stages.iter().find(|o| o.stage == r.stage).map_or(true, |o| o.input_hash != r.input_hash)
        });
        match first {
            Some(i) => self.stages[i..].iter().map(|r| r.stage.clone()).collect(),
            None => Vec::new(),
        }
    }
}

/// Everything the pipeline produced, in memory.
#[derive(Debug, Clone)]
pub struct PipelineState {
    pub model: ModelDocument,
    pub config: PipelineConfig,
    pub components: Vec<Component>,
    pub dmms: (Dmm, Dmm),
    pub dsm: Dsm,
    pub tree: ClusterTree,
    pub multilevel: MultilevelSupervisor,
    pub locals: Vec<LocalSupervisor>,
    pub shared: SharedEventMap,
    pub equivalence: Equivalence,
    pub report: Option<DelayCriticalReport>,
    pub sup_prime_states: Option<usize>,
    pub locks: Vec<MutexLockSpec>,
    pub instrumented: Vec<LocalSupervisor>,
    pub recheck: Option<DelayCriticalReport>,
    pub recheck_states: Option<usize>,
    pub mutex: Option<MutexReport>,
    pub oracle: Option<OracleReport>,
    /// Checks of the global supervisor and of the instrumented zero-delay
    /// product, when they fit the state limit.
    pub controller: BTreeMap<String, ControllerReport>,
    pub manifest: Manifest,
    /// Stage outputs as persisted.
    pub artifacts: BTreeMap<String, Value>,
}

impl PipelineState {
    pub fn robust(&self) -> bool {
        self.recheck.as_ref().or(self.report.as_ref()).map_or(true, |r| r.robust)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Recorder {
    manifest: Manifest,
    artifacts: BTreeMap<String, Value>,
    last: String,
}

impl Recorder {
    fn record(&mut self, stage: &str, output: Value) -> Result<()> {
        let text = serde_json::to_string(&output)?;
        let input_hash = sha256_hex(format!("{}:{stage}", self.last).as_bytes());
        let output_hash = sha256_hex(text.as_bytes());
        self.last = output_hash.clone();
        self.manifest.stages.push(StageRecord { stage: stage.to_string(), input_hash, output_hash });
        self.artifacts.insert(stage.to_string(), output);
        Ok(())
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name.to_string(), source: Box::new(e) })
}

/// JSON summary of every node supervisor.
pub fn supervisor_summary(ml: &MultilevelSupervisor) -> Value {
    let nodes: Vec<Value> = ml
        .nodes
        .iter()
        .map(|n| match &n.supervisor {
            Some(s) => json!({
                "node": n.node,
                "components": n.components,
                "plants": s.plant_refs(),
                "requirements": s.requirement_refs(),
                "guards": s.guards.iter().map(|g| s.guard_condition(g).to_string()).collect::<Vec<_>>(),
                "states": s.automaton.num_states(),
                "automaton": s.automaton.to_doc(),
            }),
            None => json!({ "node": n.node, "components": n.components, "empty": true }),
        })
        .collect();
    json!({ "nodes": nodes, "assignment": ml.assignment })
}

fn locals_summary(locs: &[LocalSupervisor]) -> Value {
    Value::Array(
        locs.iter()
            .map(|l| {
                json!({
                    "cluster": l.cluster,
                    "components": l.components,
                    "supervisors": l.supervisors.iter().map(|s| json!({
                        "name": s.name,
                        "plants": s.plant_refs(),
                        "requirements": s.requirements.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
                        "states": s.automaton.num_states(),
                    })).collect::<Vec<_>>(),
                    "observers": l.observers,
                    "controllable_set": l.controllable_set,
                    "owned_events": l.owned_events,
                    "observed_foreign_events": l.observed_foreign_events,
                })
            })
            .collect(),
    )
}

/// The tree the pipeline synthesizes over: given or clustered, edited,
/// then cut to `k` top-level clusters (kept as is when it already has
/// exactly `k`).
pub fn cluster_tree(dsm: &Dsm, cfg: &PipelineConfig) -> Result<ClusterTree> {
    let result = match &cfg.tree {
        Some(t) => ClusteringResult { tree: ClusterTree::from_shape(t)?, bus_elements: Vec::new(), params: cfg.params, dsm: dsm.clone() },
        None => markov_cluster(dsm, &cfg.params)?,
    };
    let result = adjust_clusters(&result, &cfg.edits)?;
    let tree = &result.tree;
    let top = if tree.is_leaf(tree.root()) { 1 } else { tree.node(tree.root()).children.len() };
    if top == cfg.k && (cfg.k > 1 || tree.is_leaf(tree.root())) {
        return Ok(result.tree);
    }
    restrict_to_k_top_clusters(&result, cfg.k)
}

/// Indices of the top-level clusters of `tree`.
pub fn top_clusters(tree: &ClusterTree) -> Vec<usize> {
    if tree.is_leaf(tree.root()) {
        vec![tree.root()]
    } else {
        tree.node(tree.root()).children.clone()
    }
}

/// The stages up to synthesis: cluster tree and multilevel supervisor.
pub fn synthesize_stages(model: &ModelDocument, cfg: &PipelineConfig) -> Result<(ClusterTree, MultilevelSupervisor)> {
    let sys = stage("mrps", model.system())?;
    let dmms = stage("dsm", build_dmms(&sys, &model.requirements))?;
    let dsm = stage("dsm", build_dsm(&dmms.0, &dmms.1))?;
    let tree = stage("cluster", cluster_tree(&dsm, cfg))?;
    let ml = stage("synthesize", multilevel_synthesize(&sys, &model.requirements, &tree, cfg.state_limit))?;
    Ok((tree, ml))
}

pub fn pipeline_run(model: &ModelDocument, cfg: &PipelineConfig) -> Result<PipelineState> {
    if let Some(s) = cfg.stop_after.as_deref() {
        if s != "localize" {
            return Err(Error::Params(format!("can only stop after `localize`, not `{s}`")));
        }
    }
    let limit = cfg.state_limit;
    let mut rec = Recorder { manifest: Manifest::default(), artifacts: BTreeMap::new(), last: String::new() };
    rec.last = sha256_hex(serde_json::to_string(cfg)?.as_bytes());
    rec.record("model", json!({ "text": model.to_text() }))?;

    let sys: ComposedSystem = stage("mrps", model.system())?;
    let components = mrps_components(&sys);
    rec.record("mrps", json!({ "components": components }))?;

    let dmms = stage("dsm", build_dmms(&sys, &model.requirements))?;
    let dsm = stage("dsm", build_dsm(&dmms.0, &dmms.1))?;
    rec.record("dsm", json!({ "p1": dmms.0, "p2": dmms.1, "dsm": dsm }))?;

    let tree = stage("cluster", cluster_tree(&dsm, cfg))?;
    rec.record("cluster", serde_json::to_value(tree.to_shape())?)?;

    let ml = stage("synthesize", multilevel_synthesize(&sys, &model.requirements, &tree, limit))?;
    rec.record("synthesize", supervisor_summary(&ml))?;

    let (locals, shared) = stage("localize", localize(&ml, &tree, &top_clusters(&tree)))?;
    let equivalence = stage("localize", global_equivalence_check(&locals, &ml, 10, limit))?;
    rec.record("localize", json!({ "locals": locals_summary(&locals), "equivalence": equivalence }))?;

    let mut state = PipelineState {
        model: model.clone(),
        config: cfg.clone(),
        components,
        dmms,
        dsm,
        tree,
        multilevel: ml,
        locals,
        shared,
        equivalence,
        report: None,
        sup_prime_states: None,
        locks: Vec::new(),
        instrumented: Vec::new(),
        recheck: None,
        recheck_states: None,
        mutex: None,
        oracle: None,
        controller: BTreeMap::new(),
        manifest: Manifest::default(),
        artifacts: BTreeMap::new(),
    };
    if cfg.stop_after.as_deref() == Some("localize") {
        for s in &STAGES[6..] {
            rec.record(s, json!({ "skipped": "stopped after localize" }))?;
        }
        state.manifest = rec.manifest;
        state.artifacts = rec.artifacts;
        return Ok(state);
    }
    rec.record("channels", serde_json::to_value(&state.shared)?)?;

    if state.shared.entries.is_empty() {
        state.instrumented = state.locals.clone();
        for s in ["check_delay", "instrument", "recheck"] {
            rec.record(s, json!({ "skipped": "no shared events" }))?;
        }
    } else {
        let dc = stage("check_delay", build_sup_prime(&state.locals, &state.shared, limit))?;
        let report = delay_robustness_check(&dc);
        state.sup_prime_states = Some(dc.sup_prime.num_states());
        rec.record("check_delay", json!({ "sup_prime_states": dc.sup_prime.num_states(), "report": report }))?;
        if report.robust {
            state.instrumented = state.locals.clone();
            rec.record("instrument", json!({ "locks": [] }))?;
            rec.record("recheck", json!({ "skipped": "already robust" }))?;
        } else {
            let locks = stage("instrument", plan_locks(&report, &dc, &state.locals))?;
            let inst = stage("instrument", apply_locks(&state.locals, &locks, cfg.ordering))?;
            rec.record("instrument", json!({ "locks": locks, "locals": locals_summary(&inst) }))?;
            let map = stage("recheck", SharedEventMap::from_locals(&inst))?;
            let dc2 = stage("recheck", build_sup_prime(&inst, &map, limit))?;
            let recheck = delay_robustness_check(&dc2);
            let mutex = stage("recheck", verify_mutex_properties(&inst, &locks, limit))?;
            if cfg.oracle {
                let sup = stage("recheck", zero_delay_product(&inst, limit))?;
                let depth = default_oracle_depth(&dc2.sup_prime);
                state.oracle = Some(appendix_oracle(&sup, &dc2.sup_prime, &dc2.delayed_events(), depth));
            }
            state.recheck_states = Some(dc2.sup_prime.num_states());
            rec.record(
                "recheck",
                json!({ "sup_prime_states": dc2.sup_prime.num_states(), "report": recheck, "mutex": mutex, "oracle": state.oracle }),
            )?;
            state.locks = locks;
            state.instrumented = inst;
            state.recheck = Some(recheck);
            state.mutex = Some(mutex);
        }
        state.report = Some(report);
    }

    if let Ok(g) = state.multilevel.global_product(limit) {
        state.controller.insert("global".into(), check_controller(&g));
    }
    if !state.locks.is_empty() {
        if let Ok(z) = zero_delay_product(&state.instrumented, limit) {
            state.controller.insert("instrumented".into(), check_controller(&z));
        }
    }
    rec.record("controller", serde_json::to_value(&state.controller)?)?;

    state.manifest = rec.manifest;
    state.artifacts = rec.artifacts;
    Ok(state)
}

/// Run directory: `DISTSUP_RUN_DIR` if set, else `runs/` in the working
/// directory.
pub fn run_root() -> PathBuf {
    std::env::var_os(RUN_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Writes every stage artifact, the manifest and the instrumented bundle
/// below `dir`. Returns the stages that changed relative to a manifest
/// already present there.
pub fn persist(state: &PipelineState, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let manifest_path = dir.join("manifest.json");
    let stale = match std::fs::read_to_string(&manifest_path) {
        Ok(text) => state.manifest.stale_since(&serde_json::from_str(&text)?),
        Err(_) => STAGES.iter().map(|s| s.to_string()).collect(),
    };
    for (i, r) in state.manifest.stages.iter().enumerate() {
        let body = json!({ "stage": r.stage, "input_hash": r.input_hash, "output": state.artifacts[&r.stage] });
        std::fs::write(dir.join(format!("{:02}_{}.json", i + 1, r.stage)), serde_json::to_string_pretty(&body)?)?;
    }
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&state.manifest)?)?;
    let map = SharedEventMap::from_locals(&state.instrumented)?;
    write_bundle(&state.instrumented, &map, &dir.join("bundle"))?;
    std::fs::write(dir.join("bundle").join("locks.json"), serde_json::to_string_pretty(&state.locks)?)?;
    Ok(stale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatespaceRow {
    pub name: String,
    pub states: f64,
    /// `false` when `states` is the product of component sizes.
    pub exact: bool,
    pub percent_of_global: f64,
}

fn exact_or_bound(parts: &[&Automaton], name: &str, limit: usize) -> (f64, bool) {
    let spec = ops::ComposeSpec { state_limit: limit, ..ops::ComposeSpec::named(name) };
    match ops::compose_with(parts, &spec) {
        Ok(p) => (p.automaton.num_states() as f64, true),
        Err(_) => (parts.iter().map(|a| a.num_states() as f64).product(), false),
    }
}

/// Reachable state counts of the global supervisor and of each local
/// supervisor, exact where the product fits in the state limit.
pub fn report_statespace(state: &PipelineState) -> Vec<StatespaceRow> {
    let limit = state.config.state_limit;
    let (g, g_exact) = exact_or_bound(&state.multilevel.node_automata(), "global", limit);
    let mut rows = vec![StatespaceRow { name: "global".into(), states: g, exact: g_exact, percent_of_global: 100.0 }];
    for l in &state.locals {
        let (n, exact) = exact_or_bound(&l.automata(), &l.cluster, limit);
        rows.push(StatespaceRow { name: l.cluster.clone(), states: n, exact, percent_of_global: 100.0 * n / g });
    }
    rows
}

pub fn format_statespace(rows: &[StatespaceRow]) -> String {
    let mut out = format!("{:<24} {:>14} {:>7} {:>10}\n", "supervisor", "states", "kind", "% global");
    for r in rows {
        let kind = if r.exact { "exact" } else { "bound" };
        out.push_str(&format!("{:<24} {:>14.4e} {:>7} {:>9.3}%\n", r.name, r.states, kind, r.percent_of_global));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toys;

    fn machines_cfg(k: usize) -> PipelineConfig {
        PipelineConfig { k, tree: Some(toys::machines_tree().to_shape()), state_limit: 100_000, ..Default::default() }
    }

    #[test]
    fn machines_runs_end_to_end() {
        let st = pipeline_run(&toys::machines_model(), &machines_cfg(2)).unwrap();
        assert_eq!(st.multilevel.nodes.len(), 7);
        assert_eq!(st.locals.len(), 2);
        assert!(st.equivalence.equal && st.equivalence.exact);
        assert!(st.report.as_ref().is_some_and(|r| !r.robust));
        assert!(!st.locks.is_empty());
        assert!(st.robust());
        let names: Vec<&str> = st.manifest.stages.iter().map(|r| r.stage.as_str()).collect();
        assert_eq!(names, STAGES);
    }

    #[test]
    fn one_cluster_skips_channels() {
        let st = pipeline_run(&toys::machines_model(), &machines_cfg(1)).unwrap();
        assert_eq!(st.locals.len(), 1);
        assert!(st.shared.entries.is_empty());
        assert!(st.report.is_none() && st.locks.is_empty());
        assert_eq!(st.artifacts["check_delay"]["skipped"], "no shared events");
    }

    #[test]
    fn hashes_are_deterministic_and_track_changes() {
        let a = pipeline_run(&toys::machines_model(), &machines_cfg(2)).unwrap();
        let b = pipeline_run(&toys::machines_model(), &machines_cfg(2)).unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert!(a.manifest.stale_since(&b.manifest).is_empty());
        let c = pipeline_run(&toys::machines_model(), &PipelineConfig { ordering: false, ..machines_cfg(2) }).unwrap();
        assert_eq!(c.manifest.stale_since(&a.manifest), STAGES.to_vec());
    }

    #[test]
    fn persisted_run_reports_stale_stages() {
        let dir = tempfile::tempdir().unwrap();
        let st = pipeline_run(&toys::machines_model(), &machines_cfg(2)).unwrap();
        assert_eq!(persist(&st, dir.path()).unwrap().len(), STAGES.len());
        assert!(persist(&st, dir.path()).unwrap().is_empty());
        assert!(dir.path().join("05_synthesize.json").exists());
        assert!(dir.path().join("bundle").join("shared_events.json").exists());
        assert!(dir.path().join("bundle").join("locks.json").exists());
    }

    #[test]
    fn statespace_of_a_single_automaton() {
        let m = ModelDocument::parse("plant A { states x*, y; initial x; edge x -c-> y; edge y -c2-> x; }").unwrap();
        let cfg = PipelineConfig { k: 1, tree: Some(Shape::leaf(&["A"])), ..Default::default() };
        let st = pipeline_run(&m, &cfg).unwrap();
        let rows = report_statespace(&st);
        assert_eq!(rows[0].states, 2.0);
        assert!(rows.iter().all(|r| r.exact));
        assert!(format_statespace(&rows).contains("exact"));
    }
}
