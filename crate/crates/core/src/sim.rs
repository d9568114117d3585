//! Deterministic tick-based simulator for a distributed supervisor: one
//! process per local supervisor, FIFO links between clusters, a random plant
//! environment, scripted scenarios and online monitors.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automaton::{Automaton, StateId, Trace};
use crate::error::{Error, Result};
use crate::localization::{LocalSupervisor, SharedEventMap};
use crate::mutex::{LockNames, MutexLockSpec};
use crate::ops::Stepper;
use crate::predicate::Predicate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DelayDist {
    Fixed { ticks: u64 },
    Uniform { lo: u64, hi: u64 },
}

impl DelayDist {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DelayDist::Fixed { ticks } => ticks >= 1,
            DelayDist::Uniform { lo, hi } => lo >= 1 && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Params(format!("delays must be at least one tick: {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            DelayDist::Fixed { ticks } => ticks,
            DelayDist::Uniform { lo, hi } => rng.gen_range(lo..=hi),
        }
    }
}

impl std::str::FromStr for DelayDist {
    type Err = Error;

    /// `fixed:D`, `uniform:LO:HI` or a bare number of ticks.
    fn from_str(s: &str) -> Result<DelayDist> {
        let bad = || Error::Params(format!("cannot parse delay `{s}`"));
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        let d = match parts.as_slice() {
            [n] => DelayDist::Fixed { ticks: num(n)? },
            ["fixed", n] => DelayDist::Fixed { ticks: num(n)? },
            ["uniform", lo, hi] => DelayDist::Uniform { lo: num(lo)?, hi: num(hi)? },
            _ => return Err(bad()),
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub tick: u64,
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub tick: u64,
    #[serde(with = "crate::predicate::text")]
    pub predicate: Predicate,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub injections: Vec<Injection>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        serde_json::from_str(text).map_err(|e| Error::Syntax { line: e.line(), column: e.column(), message: e.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Used for every link without an entry in `channel_delays`.
    pub default_delay: DelayDist,
    /// Keyed by link (`SRC->DST`) or channel (`CH(SRC,event,DST)`).
    #[serde(default)]
    pub channel_delays: BTreeMap<String, DelayDist>,
    pub max_ticks: u64,
    /// Probability per tick that the environment fires one enabled
    /// uncontrollable event.
    #[serde(default)]
    pub env_rate: f64,
    #[serde(default)]
    pub scenario: Scenario,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            default_delay: DelayDist::Fixed { ticks: 1 },
            channel_delays: BTreeMap::new(),
            max_ticks: 100,
            env_rate: 0.0,
            scenario: Scenario::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_ticks == 0 {
            return Err(Error::Params("max_ticks must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.env_rate) {
            return Err(Error::Params(format!("env_rate {} outside [0, 1]", self.env_rate)));
        }
        self.default_delay.validate()?;
        self.channel_delays.values().try_for_each(|d| d.validate())
    }

    fn delay_for(&self, source: &str, event: &str, dest: &str) -> &DelayDist {
        self.channel_delays
            .get(&format!("CH({source},{event},{dest})"))
            .or_else(|| self.channel_delays.get(&format!("{source}->{dest}")))
            .unwrap_or(&self.default_delay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Plant,
    Control,
    MessageSend,
    MessageDeliver,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub tick: u64,
    pub process: String,
    pub event: String,
    pub kind: EntryKind,
    /// Destination of a send, source of a delivery.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub entries: Vec<TraceEntry>,
    pub ticks: u64,
    pub quiescent_at: Option<u64>,
}

impl SimTrace {
    /// Executed plant and control events in order.
    pub fn events(&self) -> Trace {
        self.entries
            .iter()
            .filter(|e| matches!(e.kind, EntryKind::Plant | EntryKind::Control))
            .map(|e| e.event.clone())
            .collect()
    }

    pub fn in_flight(&self) -> usize {
        let count = |k| self.entries.iter().filter(|e| e.kind == k).count();
        count(EntryKind::MessageSend) - count(EntryKind::MessageDeliver)
    }

    pub fn to_json_lines(&self) -> String {
        self.entries.iter().map(|e| serde_json::to_string(e).expect("entry serializes") + "\n").collect()
    }

    pub fn from_json_lines(text: &str) -> Result<SimTrace> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let e: TraceEntry = serde_json::from_str(line)
                .map_err(|err| Error::Syntax { line: i + 1, column: err.column(), message: err.to_string() })?;
            entries.push(e);
        }
        let ticks = entries.last().map(|e| e.tick).unwrap_or(0);
        Ok(SimTrace { entries, ticks, quiescent_at: None })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub tick: u64,
    pub predicate: String,
    pub holds: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimVerdict {
    /// `None` when no global supervisor was given to monitor against.
    pub safety: Option<bool>,
    pub safety_witness: Option<Trace>,
    pub assertions: Vec<AssertionResult>,
    pub token_conserved: bool,
    /// First tick at which a lock held other than exactly one token.
    pub token_violation_tick: Option<u64>,
    /// Messages the destination could not accept, as `tick:dest:event`.
    pub refused_deliveries: Vec<String>,
}

impl SimVerdict {
    pub fn ok(&self) -> bool {
        self.safety != Some(false)
            && self.token_conserved
            && self.refused_deliveries.is_empty()
            && self.assertions.iter().all(|a| a.holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub trace: SimTrace,
    pub verdict: SimVerdict,
}

struct Process<'a> {
    name: String,
    loc: &'a LocalSupervisor,
    stepper: Stepper<'a>,
}

#[derive(Debug, Clone)]
struct Message {
    event: String,
    source: usize,
    due: u64,
}

/// Plant automaton located inside a process state.
#[derive(Debug, Clone, Copy)]
struct Probe {
    process: usize,
    sup: usize,
    slot: usize,
}

/// A prepared distributed supervisor ready to be run under many configs.
pub struct Simulation<'a> {
    procs: Vec<Process<'a>>,
    /// Destination processes of each shared event.
    destinations: HashMap<String, Vec<usize>>,
    owner: HashMap<String, usize>,
    probes: HashMap<String, Probe>,
    locks: Vec<MutexLockSpec>,
    monitor: Option<&'a Automaton>,
}

struct RunState {
    tuples: Vec<Vec<StateId>>,
    links: BTreeMap<(usize, usize), VecDeque<Message>>,
    last_due: BTreeMap<(usize, usize), u64>,
}

impl RunState {
    fn in_flight(&self, source: usize, event: &str) -> bool {
        self.links.iter().any(|((s, _), q)| *s == source && q.iter().any(|m| m.event == event))
    }

    fn pending(&self) -> bool {
        self.links.values().any(|q| !q.is_empty())
    }
}

impl<'a> Simulation<'a> {
    pub fn new(locs: &'a [LocalSupervisor]) -> Result<Simulation<'a>> {
        let map = SharedEventMap::from_locals(locs)?;
        let mut procs = Vec::new();
        let mut probes = HashMap::new();
        for (pi, loc) in locs.iter().enumerate() {
            procs.push(Process { name: loc.cluster.clone(), loc, stepper: Stepper::new(loc.automata())? });
            for (si, sup) in loc.supervisors.iter().enumerate() {
                for (slot, p) in sup.plants.iter().enumerate() {
                    probes.entry(p.name().to_string()).or_insert(Probe { process: pi, sup: si, slot });
                }
            }
        }
        let index: HashMap<&str, usize> = locs.iter().enumerate().map(|(i, l)| (l.cluster.as_str(), i)).collect();
        let mut destinations = HashMap::new();
        for e in &map.entries {
            destinations.insert(e.event.clone(), e.destinations.iter().map(|d| index[d.as_str()]).collect());
        }
        let mut owner = HashMap::new();
        for (i, l) in locs.iter().enumerate() {
            for e in &l.owned_events {
                owner.insert(e.clone(), i);
            }
        }
        Ok(Simulation { procs, destinations, owner, probes, locks: Vec::new(), monitor: None })
    }

    /// Tracks token conservation of these locks at every tick.
    pub fn with_locks(mut self, specs: &[MutexLockSpec]) -> Self {
        self.locks = specs.to_vec();
        self
    }

    /// Checks every run against this global supervisor.
    pub fn with_monitor(mut self, sup: &'a Automaton) -> Self {
        self.monitor = Some(sup);
        self
    }

    pub fn process_names(&self) -> Vec<&str> {
        self.procs.iter().map(|p| p.name.as_str()).collect()
    }

    fn plant_state(&self, st: &RunState, name: &str) -> Option<&str> {
        let pr = self.probes.get(name)?;
        let sup = &self.procs[pr.process].loc.supervisors[pr.sup];
        let local = st.tuples[pr.process][pr.sup];
        Some(sup.plants[pr.slot].state_name(sup.tuples[local as usize][pr.slot]))
    }

    fn eval(&self, st: &RunState, p: &Predicate) -> bool {
        p.eval(&|a, s| self.plant_state(st, a) == Some(s))
    }

    fn dump(&self, st: &RunState, process: usize) -> String {
        let loc = self.procs[process].loc;
        let mut parts = Vec::new();
        for sup in &loc.supervisors {
            for p in &sup.plants {
                if let Some(s) = self.plant_state(st, p.name()) {
                    parts.push(format!("{}.{s}", p.name()));
                }
            }
        }
        parts.sort();
        parts.dedup();
        parts.join(", ")
    }

    fn can_fire(&self, st: &RunState, process: usize, event: &str) -> Option<Vec<StateId>> {
        let pr = &self.procs[process];
        if st.in_flight(process, event) {
            return None;
        }
        let ev = pr.stepper.event_index(event)?;
        pr.stepper.step(&st.tuples[process], ev)
    }

    #[allow(clippy::too_many_arguments)]
    fn fire(
        &self,
        st: &mut RunState,
        trace: &mut SimTrace,
        rng: &mut ChaCha8Rng,
        cfg: &SimConfig,
        tick: u64,
        process: usize,
        event: &str,
        next: Vec<StateId>,
        kind: EntryKind,
    ) {
        st.tuples[process] = next;
        let src = &self.procs[process].name;
        trace.entries.push(TraceEntry { tick, process: src.clone(), event: event.to_string(), kind, peer: None });
        for &d in self.destinations.get(event).map(|v| v.as_slice()).unwrap_or(&[]) {
            let dst = &self.procs[d].name;
            let delay = cfg.delay_for(src, event, dst).sample(rng);
            let last = st.last_due.get(&(process, d)).copied().unwrap_or(0);
            let due = (tick + delay).max(last);
            st.last_due.insert((process, d), due);
            st.links.entry((process, d)).or_default().push_back(Message { event: event.to_string(), source: process, due });
            trace.entries.push(TraceEntry {
                tick,
                process: src.clone(),
                event: event.to_string(),
                kind: EntryKind::MessageSend,
                peer: Some(dst.clone()),
            });
        }
    }

    fn tokens(&self, st: &RunState, spec: &MutexLockSpec) -> usize {
        let n = LockNames::new(spec.lock_id);
        let home = self.procs.iter().position(|p| p.name == spec.home_cluster);
        let away = self.procs.iter().position(|p| p.name == spec.away_cluster);
        let flying = |src: Option<usize>, ev: String| src.map(|s| st.in_flight(s, &ev)).unwrap_or(false);
        [
            self.plant_state(st, &n.tracker()) == Some("Home"),
            flying(home, n.to_here()),
            self.plant_state(st, &n.token()) == Some("Here"),
            flying(away, n.to_home()),
        ]
        .iter()
        .filter(|b| **b)
        .count()
    }

    fn check_scenario(&self, sc: &Scenario) -> Result<()> {
        for inj in &sc.injections {
            let uncontrollable = self
                .owner
                .get(&inj.event)
                .and_then(|&p| self.procs[p].loc.automata().iter().find_map(|a| a.is_controllable(&inj.event)))
                == Some(false);
            if !uncontrollable {
                return Err(Error::Scenario {
                    tick: inj.tick,
                    message: format!("`{}` is not an uncontrollable plant event", inj.event),
                });
            }
        }
        for a in &sc.assertions {
            if let Some(name) = a.predicate.automata().into_iter().find(|n| !self.probes.contains_key(n)) {
                return Err(Error::Scenario { tick: a.tick, message: format!("assertion refers to unknown automaton `{name}`") });
            }
        }
        Ok(())
    }

    pub fn run(&self, cfg: &SimConfig) -> Result<SimOutcome> {
        cfg.validate()?;
        self.check_scenario(&cfg.scenario)?;
        let mut delay_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut env_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut st = RunState {
            tuples: self.procs.iter().map(|p| p.stepper.initial()).collect(),
            links: BTreeMap::new(),
            last_due: BTreeMap::new(),
        };
        let mut trace = SimTrace::default();
        let mut verdict = SimVerdict { token_conserved: true, ..Default::default() };
        let last_injection = cfg.scenario.injections.iter().map(|i| i.tick).max().unwrap_or(0);
        let mut asserted = vec![false; cfg.scenario.assertions.len()];

        for tick in 1..=cfg.max_ticks {
            let before = trace.entries.len();
            trace.ticks = tick;

            for (&(src, dst), queue) in st.links.iter_mut() {
                while queue.front().is_some_and(|m| m.due <= tick) {
                    let m = queue.pop_front().expect("front checked");
                    let pr = &self.procs[dst];
                    let next = pr.stepper.event_index(&m.event).and_then(|ev| pr.stepper.step(&st.tuples[dst], ev));
                    match next {
                        Some(t) => st.tuples[dst] = t,
                        None => verdict.refused_deliveries.push(format!("{tick}:{}:{}", pr.name, m.event)),
                    }
                    trace.entries.push(TraceEntry {
                        tick,
                        process: pr.name.clone(),
                        event: m.event,
                        kind: EntryKind::MessageDeliver,
                        peer: Some(self.procs[src].name.clone()),
                    });
                    debug_assert_eq!(m.source, src);
                }
            }

            for inj in cfg.scenario.injections.iter().filter(|i| i.tick == tick) {
                let p = self.owner[&inj.event];
                let next = self.can_fire(&st, p, &inj.event).ok_or_else(|| Error::Scenario {
                    tick,
                    message: format!("`{}` is disabled in {} ({})", inj.event, self.procs[p].name, self.dump(&st, p)),
                })?;
                self.fire(&mut st, &mut trace, &mut delay_rng, cfg, tick, p, &inj.event, next, EntryKind::Plant);
            }

            let env_candidates = self.uncontrollable_enabled(&st);
            if cfg.env_rate > 0.0 && !env_candidates.is_empty() && env_rng.gen_bool(cfg.env_rate) {
                let (p, ev, next) = env_candidates[env_rng.gen_range(0..env_candidates.len())].clone();
                self.fire(&mut st, &mut trace, &mut delay_rng, cfg, tick, p, &ev, next, EntryKind::Plant);
            }

            for p in 0..self.procs.len() {
                let loc = self.procs[p].loc;
                let choice = loc
                    .controllable_set
                    .iter()
                    .filter(|e| loc.owned_events.contains(*e))
                    .find_map(|e| self.can_fire(&st, p, e).map(|t| (e.clone(), t)));
                if let Some((ev, next)) = choice {
                    self.fire(&mut st, &mut trace, &mut delay_rng, cfg, tick, p, &ev, next, EntryKind::Control);
                }
            }

            if verdict.token_conserved && self.locks.iter().any(|l| self.tokens(&st, l) != 1) {
                verdict.token_conserved = false;
                verdict.token_violation_tick = Some(tick);
            }
            for (i, a) in cfg.scenario.assertions.iter().enumerate().filter(|(_, a)| a.tick == tick) {
                asserted[i] = true;
                verdict.assertions.push(AssertionResult { tick, predicate: a.predicate.to_string(), holds: self.eval(&st, &a.predicate) });
            }

            let idle = trace.entries.len() == before
                && !st.pending()
                && tick >= last_injection
                && (cfg.env_rate == 0.0 || self.uncontrollable_enabled(&st).is_empty());
            if idle {
                trace.quiescent_at = Some(tick);
                break;
            }
        }

        // assertions scheduled after the run ended see the final state
        for (_, a) in cfg.scenario.assertions.iter().enumerate().filter(|(i, _)| !asserted[*i]) {
            verdict.assertions.push(AssertionResult { tick: a.tick, predicate: a.predicate.to_string(), holds: self.eval(&st, &a.predicate) });
        }
        if let Some(sup) = self.monitor {
            let w = safety_violation(&trace, sup);
            verdict.safety = Some(w.is_none());
            verdict.safety_witness = w;
        }
        Ok(SimOutcome { trace, verdict })
    }

    fn uncontrollable_enabled(&self, st: &RunState) -> Vec<(usize, String, Vec<StateId>)> {
        let mut out = Vec::new();
        for (p, pr) in self.procs.iter().enumerate() {
            for ev in pr.stepper.events() {
                if !ev.controllable && pr.loc.owned_events.contains(&ev.name) {
                    if let Some(t) = self.can_fire(st, p, &ev.name) {
                        out.push((p, ev.name.clone(), t));
                    }
                }
            }
        }
        out
    }
}

/// Runs `locs` once under `cfg`.
pub fn run(locs: &[LocalSupervisor], cfg: &SimConfig) -> Result<SimOutcome> {
    Simulation::new(locs)?.run(cfg)
}

/// Shortest prefix of the executed events, projected onto the alphabet of
/// `sup`, that `sup` rejects.
pub fn safety_violation(trace: &SimTrace, sup: &Automaton) -> Option<Trace> {
    let alphabet: BTreeSet<String> = sup.alphabet();
    let mut state = sup.initial();
    let mut prefix = Vec::new();
    for ev in trace.events().into_iter().filter(|e| alphabet.contains(e)) {
        prefix.push(ev.clone());
        match sup.step(state, &ev) {
            Some(s) => state = s,
            None => return Some(prefix),
        }
    }
    None
}

/// True iff the projected event sequence of `trace` is a string of `sup`.
pub fn monitor_safety(trace: &SimTrace, sup: &Automaton) -> bool {
    safety_violation(trace, sup).is_none()
}

/// Re-runs the configuration and compares against a recorded trace.
pub fn replay(trace: &SimTrace, locs: &[LocalSupervisor], cfg: &SimConfig) -> Result<bool> {
    let again = run(locs, cfg)?.trace;
    Ok(again.entries == trace.entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialHit {
    pub config: SimConfig,
    pub trace: SimTrace,
    pub violating_prefix: Trace,
}

/// Hunts for a run whose projection leaves L(`sup`). Every fixed delay
/// assignment over the links with delays in `1..=max_delay` is tried when
/// there are at most `budget` of them; otherwise `budget` seeded runs with
/// uniform delays are tried.
pub fn adversarial_search(sim: &Simulation, sup: &Automaton, base: &SimConfig, max_delay: u64, budget: usize) -> Result<Option<AdversarialHit>> {
    let mut links: BTreeSet<(String, String)> = BTreeSet::new();
    for (ev, dests) in &sim.destinations {
        let src = &sim.procs[sim.owner[ev]].name;
        for d in dests {
            links.insert((src.clone(), sim.procs[*d].name.clone()));
        }
    }
    let links: Vec<_> = links.into_iter().collect();
    let exhaustive = (max_delay as f64).powi(links.len() as i32) <= budget as f64;
    let mut configs: Vec<SimConfig> = Vec::new();
    if exhaustive {
        let total = max_delay.pow(links.len() as u32);
        for code in 0..total {
            let mut cfg = base.clone();
            let mut c = code;
            for (s, d) in &links {
                cfg.channel_delays.insert(format!("{s}->{d}"), DelayDist::Fixed { ticks: 1 + c % max_delay });
                c /= max_delay;
            }
            configs.push(cfg);
        }
    } else {
        for i in 0..budget as u64 {
            let mut cfg = base.clone();
            cfg.seed = base.seed.wrapping_add(i);
            cfg.default_delay = DelayDist::Uniform { lo: 1, hi: max_delay };
            cfg.channel_delays.clear();
            configs.push(cfg);
        }
    }
    for cfg in configs {
        let out = sim.run(&cfg)?;
        if let Some(prefix) = safety_violation(&out.trace, sup) {
            return Ok(Some(AdversarialHit { config: cfg, trace: out.trace, violating_prefix: prefix }));
        }
    }
    Ok(None)
}
