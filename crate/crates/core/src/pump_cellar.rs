//! The tunnel pump-cellar case study as a textual model.
//!
//! The full model has three cellars (`Mid`, `Main1`, `Main2`), each with two
//! pumps, five level sensors, a mode automaton with manual buttons, a button
//! monitor and an auto/manual control mode, plus the middle cellar's pump
//! direction and two traffic tubes. The reduced model keeps the middle and
//! first main cellar with one pump and three sensor levels each, automatic
//! mode changes only, the pump direction and one tube.
//!
//! With [`SensorVariant::LadderSensors`] the independent level sensors of a cellar
//! are replaced by one chained sensor and each tube gets an operator automaton
//! that decides when tube state changes are requested.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::ModelDocument;
use crate::synthesis::{mrps_components, Component};
use crate::tree::{ClusterTree, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorVariant {
    IndependentSensors,
    LadderSensors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Full,
    Reduced,
}

impl std::str::FromStr for SensorVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "independent" | "independent_sensors" => Ok(SensorVariant::IndependentSensors),
            "ladder" | "ladder_sensors" => Ok(SensorVariant::LadderSensors),
            _ => Err(format!("unknown sensor variant `{s}`")),
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Scale::Full),
            "reduced" => Ok(Scale::Reduced),
            _ => Err(format!("unknown scale `{s}`")),
        }
    }
}

struct Writer {
    out: String,
    variant: SensorVariant,
    levels: usize,
}

impl Writer {
    fn comment(&mut self, text: &str) {
        for line in text.lines() {
            let _ = writeln!(self.out, "// {line}");
        }
    }

    fn plant(&mut self, name: &str, states: &[(&str, bool)], uncontrollable: &[&str], edges: &[(&str, &str, &str)]) {
        let _ = write!(self.out, "plant {name} {{\n    states ");
        let list: Vec<String> = states.iter().map(|(s, m)| if *m { format!("{s}*") } else { s.to_string() }).collect();
        let _ = writeln!(self.out, "{};", list.join(", "));
        let _ = writeln!(self.out, "    initial {};", states[0].0);
        if !uncontrollable.is_empty() {
            let _ = writeln!(self.out, "    uncontrollable {};", uncontrollable.join(", "));
        }
        for (s, e, t) in edges {
            let _ = writeln!(self.out, "    edge {s} -{e}-> {t};");
        }
        self.out.push_str("}\n");
    }

    fn req(&mut self, name: &str, text: &str) {
        let _ = writeln!(self.out, "requirement {name}: {text};");
    }

    fn on_off(&mut self, name: &str, on: &str, off: &str, uncontrollable: bool) {
        let unc: &[&str] = if uncontrollable { &[on, off] } else { &[] };
        self.plant(name, &[("Off", true), ("On", false)], unc, &[("Off", on, "On"), ("On", off, "Off")]);
    }

    fn sensors(&mut self, cellar: &str) {
        match self.variant {
            SensorVariant::IndependentSensors => {
                for i in 1..=self.levels {
                    self.on_off(&format!("{cellar}.S{i}"), "u_on", "u_off", true);
                }
            }
            SensorVariant::LadderSensors => {
                let names: Vec<String> = std::iter::once("Off".to_string()).chain((1..=self.levels).map(|i| format!("L{i}"))).collect();
                let states: Vec<(&str, bool)> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i == 0)).collect();
                let evs: Vec<(String, String)> = (1..=self.levels).map(|i| (format!("s{i}_on"), format!("s{i}_off"))).collect();
                let unc: Vec<&str> = evs.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect();
                let mut edges = Vec::new();
                for i in 0..self.levels {
                    edges.push((names[i].as_str(), evs[i].0.as_str(), names[i + 1].as_str()));
                    edges.push((names[i + 1].as_str(), evs[i].1.as_str(), names[i].as_str()));
                }
                self.plant(&format!("{cellar}.Sensor"), &states, &unc, &edges);
            }
        }
    }

    /// Condition "sensor level `i` is on" of a cellar.
    fn level(&self, cellar: &str, i: usize) -> String {
        match self.variant {
            SensorVariant::IndependentSensors => format!("{cellar}.S{i}.On"),
            SensorVariant::LadderSensors => {
                let parts: Vec<String> = (i..=self.levels).map(|l| format!("{cellar}.Sensor.L{l}")).collect();
                format!("({})", parts.join(" or "))
            }
        }
    }

    fn mode(&mut self, cellar: &str) {
        self.plant(
            &format!("{cellar}.Mode"),
            &[("Empty", true), ("Store", false), ("Off", false)],
            &[],
            &[
                ("Empty", "c_store", "Store"),
                ("Store", "c_empty", "Empty"),
                ("Empty", "c_off", "Off"),
                ("Off", "c_empty", "Empty"),
                ("Store", "c_off", "Off"),
                ("Off", "c_store", "Store"),
            ],
        );
    }

    fn button(&mut self, name: &str) {
        self.plant(name, &[("Released", true)], &["u_push"], &[("Released", "u_push", "Released")]);
    }

    fn tube(&mut self, name: &str) {
        self.plant(
            name,
            &[("Operational", true), ("Emergency", false), ("Recovery", false)],
            &[],
            &[
                ("Operational", "c_em", "Emergency"),
                ("Emergency", "c_rec", "Recovery"),
                ("Recovery", "c_em", "Emergency"),
                ("Recovery", "c_op", "Operational"),
            ],
        );
    }

    fn operator(&mut self, tube: &str) {
        let name = format!("{tube}Operator");
        self.plant(
            &name,
            &[("Normal", true), ("Incident", false), ("Resolved", false)],
            &["u_incident", "u_resolved", "u_cleared"],
            &[
                ("Normal", "u_incident", "Incident"),
                ("Resolved", "u_incident", "Incident"),
                ("Incident", "u_resolved", "Resolved"),
                ("Resolved", "u_cleared", "Normal"),
            ],
        );
    }

    fn operator_reqs(&mut self, tube: &str) {
        let op = format!("{tube}Operator");
        self.req(&format!("{tube}_em"), &format!("{tube}.c_em needs {op}.Incident"));
        self.req(&format!("{tube}_rec"), &format!("{tube}.c_rec needs {op}.Resolved"));
        self.req(&format!("{tube}_op"), &format!("{tube}.c_op needs {op}.Normal"));
    }

    fn direction(&mut self) {
        self.plant(
            "PumpDirection",
            &[("Main1", true), ("Main2", false)],
            &[],
            &[("Main1", "c_MP2", "Main2"), ("Main2", "c_MP1", "Main1")],
        );
    }
}

/// Model text with explanatory comments.
pub fn pump_cellar_text(variant: SensorVariant, scale: Scale) -> String {
    let levels = if scale == Scale::Full { 5 } else { 3 };
    let mut w = Writer { out: String::new(), variant, levels };
    let vname = match variant {
        SensorVariant::IndependentSensors => "independent",
        SensorVariant::LadderSensors => "ladder",
    };
    let sname = if scale == Scale::Full { "full" } else { "reduced" };
    let _ = writeln!(w.out, "model pump_cellar_{sname}_{vname} version 1;\n");
    match scale {
        Scale::Full => full(&mut w),
        Scale::Reduced => reduced(&mut w),
    }
    w.out
}

fn full(w: &mut Writer) {
    let cellars = ["Mid", "Main1", "Main2"];
    let tubes = ["Tube1", "Tube2"];
    for c in cellars {
        w.comment(&format!("cellar {c}"));
        w.on_off(&format!("{c}.P1"), "c_on", "c_off", false);
        w.on_off(&format!("{c}.P2"), "c_on", "c_off", false);
        w.sensors(c);
        if c == "Mid" {
            w.comment("direction of the middle cellar pumps");
            w.direction();
        }
        w.comment("mode, buttons, button monitor and control mode share events; switching the");
        w.comment("control mode clears a pending button command");
        w.mode(c);
        for b in ["Empty", "Store", "Off", "Auto", "Manual"] {
            w.button(&format!("{c}.Button{b}"));
        }
        let push = |b: &str| format!("{c}.Button{b}.u_push");
        let mode = |e: &str| format!("{c}.Mode.{e}");
        let pushed = [("Empty", "EmptyPushed", "c_empty"), ("Store", "StorePushed", "c_store"), ("Off", "OffPushed", "c_off")];
        let mut edges: Vec<(String, String, String)> = Vec::new();
        let states = ["Idle", "EmptyPushed", "StorePushed", "OffPushed"];
        for s in states {
            for (b, target, _) in pushed {
                edges.push((s.into(), push(b), target.into()));
            }
            for (_, from, ev) in pushed {
                let to = if s == from { "Idle" } else { s };
                edges.push((s.into(), mode(ev), to.into()));
            }
            for b in ["Auto", "Manual"] {
                edges.push((s.into(), push(b), "Idle".into()));
            }
        }
        let erefs: Vec<(&str, &str, &str)> = edges.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())).collect();
        let unc: Vec<String> = ["Empty", "Store", "Off", "Auto", "Manual"].iter().map(|b| push(b)).collect();
        let unc_refs: Vec<&str> = unc.iter().map(|s| s.as_str()).collect();
        w.plant(
            &format!("{c}.Monitor"),
            &[("Idle", true), ("EmptyPushed", false), ("StorePushed", false), ("OffPushed", false)],
            &unc_refs,
            &erefs,
        );
        let (pa, pm) = (push("Auto"), push("Manual"));
        w.plant(
            &format!("{c}.ControlMode"),
            &[("Auto", true), ("Manual", true)],
            &[&pa, &pm],
            &[("Auto", &pm, "Manual"), ("Auto", &pa, "Auto"), ("Manual", &pa, "Auto"), ("Manual", &pm, "Manual")],
        );
    }
    w.comment("traffic tubes");
    for t in tubes {
        w.tube(t);
        if w.variant == SensorVariant::LadderSensors {
            w.operator(t);
        }
    }
    w.out.push('\n');

    for c in cellars {
        let m = format!("{c}.Mode");
        w.comment(&format!("pumps of {c}: Empty mode uses levels 2 and 3 to start and level 1 to stop,"));
        w.comment("Store mode uses level 5 to start, Off mode only stops");
        let (s1, s2, s3, s4, s5) = (w.level(c, 1), w.level(c, 2), w.level(c, 3), w.level(c, 4), w.level(c, 5));
        let stop = |empty: &str, store: &str| format!("{m}.Off or ({m}.Empty and not {empty}) or ({m}.Store and not {store})");
        let (stop1, stop2) = if w.variant == SensorVariant::LadderSensors {
            w.comment("ladder variant: each pump stops below its own start level");
            (stop(&s2, &s5), stop(&s3, &s5))
        } else {
            (stop(&s1, &s4), stop(&s1, &s4))
        };
        w.req(&format!("{c}_P1_on_mode"), &format!("{c}.P1.c_on needs not {m}.Off"));
        w.req(&format!("{c}_P1_on_level"), &format!("{c}.P1.c_on needs ({m}.Empty and {s2}) or ({m}.Store and {s5})"));
        w.req(&format!("{c}_P1_off"), &format!("{c}.P1.c_off needs {stop1}"));
        w.req(&format!("{c}_P2_on_mode"), &format!("{c}.P2.c_on needs not {m}.Off"));
        w.req(&format!("{c}_P2_on_level"), &format!("{c}.P2.c_on needs ({m}.Empty and {s3}) or ({m}.Store and {s5})"));
        w.req(&format!("{c}_P2_off"), &format!("{c}.P2.c_off needs {stop2}"));
        w.comment("the second pump only assists a running first pump");
        w.req(&format!("{c}_P2_after_P1"), &format!("{c}.P2.c_on needs {c}.P1.On"));
        w.comment("automatic mode follows the tubes, manual mode follows the buttons");
        let ctl = format!("{c}.ControlMode");
        let mon = format!("{c}.Monitor");
        w.req(
            &format!("{c}_empty"),
            &format!("{m}.c_empty needs ({ctl}.Auto and Tube1.Operational and Tube2.Operational) or ({ctl}.Manual and {mon}.EmptyPushed)"),
        );
        w.req(
            &format!("{c}_store"),
            &format!(
                "{m}.c_store needs ({ctl}.Auto and (Tube1.Emergency or Tube1.Recovery or Tube2.Emergency or Tube2.Recovery)) or ({ctl}.Manual and {mon}.StorePushed)"
            ),
        );
        w.req(&format!("{c}_off_manual"), &format!("{m}.c_off needs {ctl}.Manual"));
        w.req(&format!("{c}_off_button"), &format!("{m}.c_off needs {mon}.OffPushed"));
        w.out.push('\n');
    }
    w.comment("pump direction: towards Main2 once Main1 is full and pumping, back once Main1 has drained");
    let (m4, m5) = (w.level("Main1", 4), w.level("Main1", 5));
    w.req("Dir_MP2_level", &format!("PumpDirection.c_MP2 needs {m5}"));
    w.req("Dir_MP2_pump", "PumpDirection.c_MP2 needs Main1.P1.On");
    w.req("Dir_MP1_level", &format!("PumpDirection.c_MP1 needs not {m4}"));
    w.req("Dir_MP1_mode", "PumpDirection.c_MP1 needs not Main1.Mode.Off");
    if w.variant == SensorVariant::LadderSensors {
        w.comment("tube state changes follow the operator");
        for t in tubes {
            w.operator_reqs(t);
        }
    }
}

fn reduced(w: &mut Writer) {
    let cellars = ["Mid", "Main1"];
    for c in cellars {
        w.comment(&format!("cellar {c}"));
        w.on_off(&format!("{c}.P"), "c_on", "c_off", false);
        w.sensors(c);
        w.mode(c);
    }
    w.direction();
    w.tube("Tube");
    if w.variant == SensorVariant::LadderSensors {
        w.operator("Tube");
    }
    w.out.push('\n');
    for c in cellars {
        let m = format!("{c}.Mode");
        let (s1, s2, s3) = (w.level(c, 1), w.level(c, 2), w.level(c, 3));
        w.req(&format!("{c}_P_on_mode"), &format!("{c}.P.c_on needs not {m}.Off"));
        w.req(&format!("{c}_P_on_level"), &format!("{c}.P.c_on needs ({m}.Empty and {s2}) or ({m}.Store and {s3})"));
        let (empty_stop, store_stop) = if w.variant == SensorVariant::LadderSensors { (&s2, &s3) } else { (&s1, &s2) };
        w.req(
            &format!("{c}_P_off"),
            &format!("{c}.P.c_off needs {m}.Off or ({m}.Empty and not {empty_stop}) or ({m}.Store and not {store_stop})"),
        );
        w.comment("automatic control only");
        w.req(&format!("{c}_empty"), &format!("{m}.c_empty needs Tube.Operational"));
        w.req(&format!("{c}_store"), &format!("{m}.c_store needs Tube.Emergency or Tube.Recovery"));
        w.req(&format!("{c}_off"), &format!("{m}.c_off needs false"));
    }
    let (m2, m3) = (w.level("Main1", 2), w.level("Main1", 3));
    w.req("Dir_MP2", &format!("PumpDirection.c_MP2 needs {m3}"));
    w.req("Dir_MP1", &format!("PumpDirection.c_MP1 needs not {m2}"));
    if w.variant == SensorVariant::LadderSensors {
        w.operator_reqs("Tube");
    }
}

pub fn pump_cellar_model(variant: SensorVariant, scale: Scale) -> ModelDocument {
    ModelDocument::parse(&pump_cellar_text(variant, scale)).expect("bundled model parses")
}

fn component_holding<'a>(comps: &'a [Component], automaton: &str) -> &'a str {
    &comps.iter().find(|c| c.automata.iter().any(|a| a == automaton)).expect("component exists").name
}

/// The hand-made cluster tree of the full model: main cluster 1 holds the
/// middle cellar and main cellar 1 (with the pump direction) as
/// subclusters, main cluster 2 holds both tubes and main cellar 2. Every
/// component has its own leaf; nodes are numbered `Sup1..` in preorder.
pub fn full_tree(model: &ModelDocument) -> ClusterTree {
    let comps = mrps_components(&model.system().expect("bundled model composes"));
    let leaf = |a: &str| Shape::leaf(&[component_holding(&comps, a)]);
    let cellar = |c: &str, extra: &[&str]| {
        let mut members: Vec<String> = vec![format!("{c}.P1"), format!("{c}.P2")];
        for a in &comps {
            let first = &a.automata[0];
            if first.starts_with(&format!("{c}.S")) {
                members.push(first.clone());
            }
        }
        members.push(format!("{c}.Mode"));
        members.extend(extra.iter().map(|s| s.to_string()));
        Shape::node(members.iter().map(|m| leaf(m)).collect())
    };
    let mut tubes: Vec<Shape> = Vec::new();
    for t in ["Tube1", "Tube2"] {
        tubes.push(leaf(t));
        if model.plant(&format!("{t}Operator")).is_some() {
            tubes.push(leaf(&format!("{t}Operator")));
        }
    }
    tubes.push(cellar("Main2", &[]));
    let shape = Shape::node(vec![Shape::node(vec![cellar("Mid", &[]), cellar("Main1", &["PumpDirection"])]), Shape::node(tubes)]);
    ClusterTree::from_shape(&shape).expect("static tree")
}

/// Two-cluster tree of the reduced model: both cellars with the pump
/// direction, and the tube side.
pub fn reduced_tree(model: &ModelDocument) -> ClusterTree {
    let comps = mrps_components(&model.system().expect("bundled model composes"));
    let mut first = Vec::new();
    let mut second = Vec::new();
    for c in &comps {
        if c.automata[0].starts_with("Tube") {
            second.push(Shape::leaf(&[&c.name]));
        } else {
            first.push(Shape::leaf(&[&c.name]));
        }
    }
    ClusterTree::from_shape(&Shape::node(vec![Shape::node(first), Shape::node(second)])).expect("static tree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops;

    #[test]
    fn full_independent_counts() {
        let m = pump_cellar_model(SensorVariant::IndependentSensors, Scale::Full);
        let sys = m.system().unwrap();
        let comps = mrps_components(&sys);
        assert_eq!(comps.len(), 27);
        assert_eq!(m.requirements.len(), 37);
        assert_eq!(comps[8].automata[0], "Mid.Mode");
        assert_eq!(comps[16].automata[0], "Main1.Mode");
        assert_eq!(comps[25].automata, vec!["Tube1"]);
        assert_eq!(comps[8].automata.len(), 8);
        let tree = full_tree(&m);
        assert_eq!(tree.len(), 33);
        assert_eq!(tree.leaves().len(), 27);
    }

    #[test]
    fn ladder_sensor_is_a_six_state_chain() {
        let m = pump_cellar_model(SensorVariant::LadderSensors, Scale::Full);
        let s = m.plant("Main1.Sensor").unwrap();
        assert_eq!(s.num_states(), 6);
        assert!(s.events().iter().all(|e| !e.controllable));
        assert!(s.accepts(&["Main1.Sensor.s1_on", "Main1.Sensor.s2_on", "Main1.Sensor.s2_off"]));
        assert!(!s.accepts(&["Main1.Sensor.s2_on"]));
        assert_eq!(full_tree(&m).leaves().len(), mrps_components(&m.system().unwrap()).len());
    }

    #[test]
    fn round_trips() {
        for v in [SensorVariant::IndependentSensors, SensorVariant::LadderSensors] {
            for s in [Scale::Full, Scale::Reduced] {
                let m = pump_cellar_model(v, s);
                assert_eq!(ModelDocument::parse(&m.to_text()).unwrap(), m);
            }
        }
    }

    #[test]
    fn reduced_is_small() {
        for v in [SensorVariant::IndependentSensors, SensorVariant::LadderSensors] {
            let m = pump_cellar_model(v, Scale::Reduced);
            let p = m.system().unwrap().product("G").unwrap();
            assert!(p.num_states() < 20_000);
            assert!(ops::is_nonblocking(&p));
            let t = reduced_tree(&m);
            assert_eq!(t.node(0).children.len(), 2);
        }
    }

    #[test]
    fn full_multilevel_has_empty_second_node() {
        let m = pump_cellar_model(SensorVariant::IndependentSensors, Scale::Full);
        let ml = crate::synthesis::multilevel_synthesize(&m.system().unwrap(), &m.requirements, &full_tree(&m), 1_000_000).unwrap();
        assert_eq!(ml.nodes.len(), 33);
        assert_eq!(ml.empty_nodes(), vec!["Sup2"]);
        assert_eq!(ml.requirements_of(0).len(), 4);
        let sup1 = ml.nodes[0].supervisor.as_ref().unwrap();
        assert_eq!(sup1.plants.len(), 18);
    }
}
