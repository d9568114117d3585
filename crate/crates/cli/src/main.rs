use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use distsup::clustering::{ClusterEdit, ClusteringParams};
use distsup::controller::check_controller;
use distsup::delay::{build_sup_prime, delay_robustness_check};
use distsup::dsm::{build_dmms, build_dsm};
use distsup::localization::write_bundle;
use distsup::model::ModelDocument;
use distsup::ops::{self, ComposeSpec, DEFAULT_STATE_LIMIT};
use distsup::pipeline::{
    self, format_statespace, persist, pipeline_run, report_statespace, run_root, supervisor_summary, synthesize_stages, PipelineConfig,
    PipelineState,
};
use distsup::pump_cellar::{full_tree, pump_cellar_model, reduced_tree, Scale, SensorVariant};
use distsup::sim::{adversarial_search, DelayDist, Scenario, SimConfig, Simulation};
use distsup::synthesis::mrps_components;
use distsup::tree::{ClusterTree, Shape};
use distsup::{toys, Automaton};

#[derive(Parser)]
#[command(name = "distsup", version, about = "Distributed supervisory control: synthesis, localization, delay robustness and mutex repair")]
struct Cli {
    /// Machine-readable JSON output
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Model file, or `builtin:machines`, `builtin:crossed`,
    /// `builtin:pump-cellar/<reduced|full>/<independent|ladder>`
    model: String,
}

#[derive(Args, Clone)]
struct TreeArgs {
    /// `builtin` (the model's hand-made tree), `auto` (Markov clustering)
    /// or a JSON tree file. Defaults to `builtin` when the model has one.
    #[arg(long)]
    tree: Option<String>,
    /// Number of top-level clusters
    #[arg(long, short, default_value_t = 2)]
    k: usize,
    /// Clustering parameters `alpha,beta,mu,gamma`
    #[arg(long)]
    params: Option<ClusteringParams>,
    /// JSON list of cluster edits
    #[arg(long)]
    edits: Option<PathBuf>,
    /// State limit for explicit compositions
    #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
    limit: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model and print a summary or its canonical text
    Parse {
        #[command(flatten)]
        model: ModelArgs,
        /// Print the canonical model text
        #[arg(long)]
        print: bool,
    },
    /// Most refined product system components
    Mrps {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Domain mapping matrices and the component DSM
    Dsm {
        #[command(flatten)]
        model: ModelArgs,
        /// Print the DSM as CSV
        #[arg(long)]
        csv: bool,
    },
    /// Cluster tree cut to k top-level clusters
    Cluster {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tree: TreeArgs,
    },
    /// Multilevel synthesis over the cluster tree
    Synthesize {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tree: TreeArgs,
    },
    /// Local supervisors of the top-level clusters
    Localize {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tree: TreeArgs,
        /// Write the bundle to this directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Delay-critical event pairs of the distributed supervisor
    CheckDelay {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tree: TreeArgs,
    },
    /// Plan and apply mutex locks, then re-check
    Instrument {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tree: TreeArgs,
        /// Do not order overlapping locks
        #[arg(long)]
        no_ordering: bool,
        /// Write the instrumented bundle to this directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confluence, finite response and nonblocking under control of a
    /// bundle directory, an automaton JSON file or a model's global supervisor
    CheckController {
        target: String,
        #[command(flatten)]
        tree: TreeArgs,
    },
    /// Simulate the instrumented distributed supervisor
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        max_ticks: u64,
        /// Scenario JSON file
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Default delay (`D`, `fixed:D`, `uniform:LO:HI`), optionally
        /// followed by `,LINK=DELAY` overrides
        #[arg(long, default_value = "uniform:1:5")]
        delays: String,
        /// Probability per tick of a random uncontrollable event
        #[arg(long, default_value_t = 0.5)]
        env_rate: f64,
        /// Simulate the supervisor without mutex locks
        #[arg(long)]
        raw: bool,
        /// Search this many runs for a safety violation
        #[arg(long)]
        adversarial: Option<usize>,
        /// Write the trace as JSON lines
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Run every stage and persist the artifacts under the run directory
    Pipeline {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long)]
        no_ordering: bool,
        /// Also run the brute-force delay oracle
        #[arg(long)]
        oracle: bool,
        /// Root of run directories
        #[arg(long, env = pipeline::RUN_DIR_ENV)]
        run_dir: Option<PathBuf>,
    },
    /// Statespace of the global and local supervisors
    Report {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tree: TreeArgs,
    },
}

enum Builtin {
    Machines,
    Crossed,
    PumpCellar(Scale, SensorVariant),
}

fn builtin(spec: &str) -> Result<Builtin> {
    let parts: Vec<&str> = spec.split('/').collect();
    Ok(match parts.as_slice() {
        ["machines"] => Builtin::Machines,
        ["crossed"] => Builtin::Crossed,
        ["pump-cellar"] => Builtin::PumpCellar(Scale::Reduced, SensorVariant::LadderSensors),
        ["pump-cellar", scale] => Builtin::PumpCellar(scale.parse().map_err(anyhow::Error::msg)?, SensorVariant::LadderSensors),
        ["pump-cellar", scale, variant] => {
            Builtin::PumpCellar(scale.parse().map_err(anyhow::Error::msg)?, variant.parse().map_err(anyhow::Error::msg)?)
        }
        _ => bail!("unknown builtin model `{spec}`"),
    })
}

fn load_model(spec: &str) -> Result<(ModelDocument, Option<ClusterTree>)> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return Ok(match builtin(name)? {
            Builtin::Machines => (toys::machines_model(), Some(toys::machines_tree())),
            Builtin::Crossed => (toys::crossed_pair(), None),
            Builtin::PumpCellar(scale, variant) => {
                let m = pump_cellar_model(variant, scale);
                let t = match scale {
                    Scale::Full => full_tree(&m),
                    Scale::Reduced => reduced_tree(&m),
                };
                (m, Some(t))
            }
        });
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
    Ok((ModelDocument::parse(&text).with_context(|| format!("parsing {spec}"))?, None))
}

fn pipeline_config(tree: &TreeArgs, builtin_tree: Option<ClusterTree>) -> Result<PipelineConfig> {
    let shape: Option<Shape> = match tree.tree.as_deref() {
        None | Some("builtin") => match builtin_tree {
            Some(t) => Some(t.to_shape()),
            None if tree.tree.is_some() => bail!("this model has no builtin tree"),
            None => None,
        },
        Some("auto") => None,
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            Some(serde_json::from_str(&text).with_context(|| format!("parsing tree {path}"))?)
        }
    };
    let edits: Vec<ClusterEdit> = match &tree.edits {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).with_context(|| format!("parsing edits {}", p.display()))?,
        None => Vec::new(),
    };
    Ok(PipelineConfig {
        k: tree.k,
        params: tree.params.unwrap_or_default(),
        edits,
        tree: shape,
        state_limit: tree.limit,
        ..Default::default()
    })
}

fn run_until_localize(model: &ModelArgs, tree: &TreeArgs) -> Result<PipelineState> {
    let (m, t) = load_model(&model.model)?;
    let cfg = PipelineConfig { stop_after: Some("localize".into()), ..pipeline_config(tree, t)? };
    Ok(pipeline_run(&m, &cfg)?)
}

fn run_full(model: &ModelArgs, tree: &TreeArgs, ordering: bool, oracle: bool) -> Result<PipelineState> {
    let (m, t) = load_model(&model.model)?;
    let cfg = PipelineConfig { ordering, oracle, ..pipeline_config(tree, t)? };
    Ok(pipeline_run(&m, &cfg)?)
}

fn emit(json_mode: bool, value: Value, text: impl FnOnce() -> String) {
    if json_mode {
        println!("{}", serde_json::to_string_pretty(&value).expect("json value"));
    } else {
        print!("{}", text());
    }
}

fn tree_text(t: &ClusterTree) -> String {
    fn walk(t: &ClusterTree, i: usize, depth: usize, out: &mut String) {
        let n = t.node(i);
        out.push_str(&format!("{}{}", "  ".repeat(depth), n.name));
        if !n.components.is_empty() {
            out.push_str(&format!(": {}", n.components.join(", ")));
        }
        out.push('\n');
        for c in &n.children {
            walk(t, *c, depth + 1, out);
        }
    }
    let mut out = String::new();
    walk(t, t.root(), 0, &mut out);
    out
}

fn parse_delays(spec: &str) -> Result<(DelayDist, Vec<(String, DelayDist)>)> {
    let mut parts = spec.split(',');
    let default: DelayDist = parts.next().unwrap_or("1").parse()?;
    let mut links = Vec::new();
    for p in parts {
        let (k, v) = p.split_once('=').with_context(|| format!("expected LINK=DELAY in `{p}`"))?;
        links.push((k.to_string(), v.parse()?));
    }
    Ok((default, links))
}

fn load_target_automaton(target: &str, tree: &TreeArgs) -> Result<Automaton> {
    let path = Path::new(target);
    if path.is_dir() {
        let mut parts = Vec::new();
        let mut files: Vec<PathBuf> = Vec::new();
        for entry in std::fs::read_dir(path)? {
            let p = entry?.path();
            if p.is_dir() {
                for f in std::fs::read_dir(&p)? {
                    files.push(f?.path());
                }
            }
        }
        files.sort();
        for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "json")) {
            if f.file_name().is_some_and(|n| n == "observers.json") {
                continue;
            }
            parts.push(Automaton::from_json(&std::fs::read_to_string(f)?).with_context(|| format!("reading {}", f.display()))?);
        }
        if parts.is_empty() {
            bail!("no supervisor automata found in {target}");
        }
        let refs: Vec<&Automaton> = parts.iter().collect();
        let spec = ComposeSpec { state_limit: tree.limit, ..ComposeSpec::named("bundle") };
        return Ok(ops::compose_with(&refs, &spec)?.automaton);
    }
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(Automaton::from_json(&std::fs::read_to_string(path)?)?);
    }
    let (m, t) = load_model(target)?;
    let (_, ml) = synthesize_stages(&m, &pipeline_config(tree, t)?)?;
    Ok(ml.global_product(tree.limit)?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let j = cli.json;
    match cli.command {
        Command::Parse { model, print } => {
            let (m, _) = load_model(&model.model)?;
            if print {
                print!("{}", m.to_text());
                return Ok(ExitCode::SUCCESS);
            }
            let plants: Vec<Value> = m
                .plants
                .iter()
                .map(|p| json!({ "name": p.name(), "states": p.num_states(), "transitions": p.num_transitions() }))
                .collect();
            let reqs: Vec<String> = m.requirements.iter().map(|r| format!("{}: {r}", r.name)).collect();
            emit(j, json!({ "name": m.name, "version": m.version, "plants": plants, "requirements": reqs }), || {
                format!("{} plants, {} requirements\n", m.plants.len(), m.requirements.len())
            });
        }
        Command::Mrps { model } => {
            let (m, _) = load_model(&model.model)?;
            let comps = mrps_components(&m.system()?);
            emit(j, json!({ "components": comps }), || {
                let mut out = format!("{} components\n", comps.len());
                for c in &comps {
                    out.push_str(&format!("  {}: {}\n", c.name, c.automata.join(", ")));
                }
                out
            });
        }
        Command::Dsm { model, csv } => {
            let (m, _) = load_model(&model.model)?;
            let (p1, p2) = build_dmms(&m.system()?, &m.requirements)?;
            let dsm = build_dsm(&p1, &p2)?;
            if csv && !j {
                print!("{}", dsm.to_csv());
            } else {
                emit(j, json!({ "p1": p1, "p2": p2, "dsm": dsm }), || {
                    format!("{}x{} DSM over {} requirements\n", dsm.len(), dsm.len(), p1.cols.len())
                });
            }
        }
        Command::Cluster { model, tree } => {
            let (m, t) = load_model(&model.model)?;
            let cfg = pipeline_config(&tree, t)?;
            let sys = m.system()?;
            let (p1, p2) = build_dmms(&sys, &m.requirements)?;
            let dsm = build_dsm(&p1, &p2)?;
            let tr = pipeline::cluster_tree(&dsm, &cfg)?;
            emit(j, serde_json::to_value(tr.to_shape())?, || tree_text(&tr));
        }
        Command::Synthesize { model, tree } => {
            let (m, t) = load_model(&model.model)?;
            let (_, ml) = synthesize_stages(&m, &pipeline_config(&tree, t)?)?;
            emit(j, supervisor_summary(&ml), || {
                let mut out = format!("{} node supervisors, empty: {}\n", ml.nodes.len(), ml.empty_nodes().join(", "));
                for n in &ml.nodes {
                    if let Some(s) = &n.supervisor {
                        out.push_str(&format!(
                            "  {}: {} states, plants [{}], requirements [{}]\n",
                            n.node,
                            s.automaton.num_states(),
                            s.plant_refs().join(", "),
                            s.requirement_refs().join(", ")
                        ));
                    }
                }
                out
            });
        }
        Command::Localize { model, tree, out } => {
            let st = run_until_localize(&model, &tree)?;
            if let Some(dir) = &out {
                write_bundle(&st.locals, &st.shared, dir)?;
            }
            emit(j, st.artifacts["localize"].clone(), || {
                let mut s = String::new();
                for l in &st.locals {
                    let sups: Vec<&str> = l.supervisors.iter().map(|s| s.name.as_str()).collect();
                    s.push_str(&format!("{}: supervisors [{}], observers [{}]\n", l.cluster, sups.join(", "), l.observers.join(", ")));
                }
                let e = &st.equivalence;
                s.push_str(&format!("equal to global: {} ({})\n", e.equal, if e.exact { "exact" } else { "bounded" }));
                s
            });
        }
        Command::CheckDelay { model, tree } => {
            let st = run_until_localize(&model, &tree)?;
            let dc = build_sup_prime(&st.locals, &st.shared, tree.limit)?;
            let rep = delay_robustness_check(&dc);
            emit(j, json!({ "sup_prime_states": dc.sup_prime.num_states(), "report": rep }), || {
                let mut s = format!("SUP' has {} states, robust: {}\n", dc.sup_prime.num_states(), rep.robust);
                for p in &rep.pairs {
                    s.push_str(&format!(
                        "  ({}, {}) {:?} after [{}]{}\n",
                        p.delayed_event,
                        p.other_event,
                        p.verdict,
                        p.witness_trace.join(" "),
                        if p.repairable { "" } else { " unrepairable" }
                    ));
                }
                s
            });
            if !rep.robust {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Instrument { model, tree, no_ordering, out } => {
            let st = run_full(&model, &tree, !no_ordering, false)?;
            if let Some(dir) = &out {
                persist(&st, dir)?;
            }
            emit(j, json!({ "instrument": st.artifacts["instrument"], "recheck": st.artifacts["recheck"] }), || {
                let mut s = format!("{} lock(s)\n", st.locks.len());
                for l in &st.locks {
                    s.push_str(&format!(
                        "  mx{}: home {} [{}], away {} [{}]\n",
                        l.lock_id,
                        l.home_cluster,
                        l.home_critical_set.iter().cloned().collect::<Vec<_>>().join(", "),
                        l.away_cluster,
                        l.away_critical_set.iter().cloned().collect::<Vec<_>>().join(", ")
                    ));
                }
                s.push_str(&format!("robust after repair: {}\n", st.robust()));
                if let Some(m) = &st.mutex {
                    s.push_str(&format!(
                        "safety {}, deadlock free {}, token conserved {}, starvation free {}\n",
                        m.safety, m.deadlock_free, m.token_conserved, m.starvation_free
                    ));
                }
                s
            });
        }
        Command::CheckController { target, tree } => {
            let a = load_target_automaton(&target, &tree)?;
            let r = check_controller(&a);
            emit(j, serde_json::to_value(&r)?, || {
                let mut s = format!(
                    "{} states: confluent {}, finite response {}, nonblocking under control {}\n",
                    a.num_states(),
                    r.confluent,
                    r.finite_response,
                    r.nonblocking_under_control
                );
                for (k, w) in &r.witnesses {
                    s.push_str(&format!("  {k}: {} after [{}]\n", w.note, w.trace.join(" ")));
                }
                s
            });
        }
        Command::Simulate { model, tree, seed, max_ticks, scenario, delays, env_rate, raw, adversarial, trace_out } => {
            let st = if raw { run_until_localize(&model, &tree)? } else { run_full(&model, &tree, true, false)? };
            let locs = if raw { &st.locals } else { &st.instrumented };
            let (default_delay, links) = parse_delays(&delays)?;
            let scenario = match &scenario {
                Some(p) => Scenario::from_json(&std::fs::read_to_string(p)?)?,
                None => Scenario::default(),
            };
            let cfg = SimConfig {
                seed,
                default_delay,
                channel_delays: links.into_iter().collect(),
                max_ticks,
                env_rate,
                scenario,
            };
            let global = st.multilevel.global_product(tree.limit)?;
            let sim = Simulation::new(locs)?.with_locks(&st.locks).with_monitor(&global);
            if let Some(budget) = adversarial {
                let max_delay = match cfg.default_delay {
                    DelayDist::Fixed { ticks } => ticks,
                    DelayDist::Uniform { hi, .. } => hi,
                };
                let hit = adversarial_search(&sim, &global, &cfg, max_delay.max(2), budget)?;
                emit(j, serde_json::to_value(&hit)?, || match &hit {
                    Some(h) => format!("violation: [{}] (seed {})\n", h.violating_prefix.join(" "), h.config.seed),
                    None => "no violation found\n".to_string(),
                });
                return Ok(if hit.is_some() { ExitCode::from(1) } else { ExitCode::SUCCESS });
            }
            let outcome = sim.run(&cfg)?;
            if let Some(p) = &trace_out {
                std::fs::write(p, outcome.trace.to_json_lines())?;
            }
            emit(j, json!({ "ticks": outcome.trace.ticks, "quiescent_at": outcome.trace.quiescent_at, "events": outcome.trace.events().len(), "verdict": outcome.verdict }), || {
                let v = &outcome.verdict;
                let mut s = format!(
                    "{} ticks, {} events, safety {:?}, token conserved {}\n",
                    outcome.trace.ticks,
                    outcome.trace.events().len(),
                    v.safety,
                    v.token_conserved
                );
                for a in &v.assertions {
                    s.push_str(&format!("  tick {}: {} -> {}\n", a.tick, a.predicate, a.holds));
                }
                s
            });
            if !outcome.verdict.ok() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Pipeline { model, tree, no_ordering, oracle, run_dir } => {
            let st = run_full(&model, &tree, !no_ordering, oracle)?;
            let root = run_dir.unwrap_or_else(run_root);
            let name = st.model.name.clone().unwrap_or_else(|| "model".into());
            let dir = root.join(format!("{name}-{}", &st.manifest.stages[0].input_hash[..12]));
            let stale = persist(&st, &dir)?;
            emit(j, json!({ "run_dir": dir, "manifest": st.manifest, "updated": stale, "robust": st.robust() }), || {
                let mut s = format!("run directory {}\n", dir.display());
                for r in &st.manifest.stages {
                    s.push_str(&format!("  {:<12} {}\n", r.stage, &r.output_hash[..16]));
                }
                s.push_str(&format!("robust: {}, locks: {}\n", st.robust(), st.locks.len()));
                for (k, r) in &st.controller {
                    s.push_str(&format!(
                        "controller {k}: confluent {}, finite response {}, nonblocking under control {}\n",
                        r.confluent, r.finite_response, r.nonblocking_under_control
                    ));
                }
                s
            });
        }
        Command::Report { model, tree } => {
            let st = run_until_localize(&model, &tree)?;
            let rows = report_statespace(&st);
            emit(j, serde_json::to_value(&rows)?, || format_statespace(&rows));
        }
    }
    Ok(ExitCode::SUCCESS)
}
