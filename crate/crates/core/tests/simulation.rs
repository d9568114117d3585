use distsup::delay::zero_delay_product;
use distsup::pipeline::{pipeline_run, PipelineConfig, PipelineState};
use distsup::predicate::Predicate;
use distsup::pump_cellar::{pump_cellar_model, reduced_tree, Scale, SensorVariant};
use distsup::sim::{monitor_safety, Assertion, DelayDist, Injection, Scenario, SimConfig, Simulation};
use distsup::ops::DEFAULT_STATE_LIMIT;

fn instrumented(v: SensorVariant) -> PipelineState {
    let m = pump_cellar_model(v, Scale::Reduced);
    let cfg = PipelineConfig { k: 2, tree: Some(reduced_tree(&m).to_shape()), ..Default::default() };
    pipeline_run(&m, &cfg).unwrap()
}

#[test]
fn tube_emergency_sends_cellars_to_store() {
    let st = instrumented(SensorVariant::LadderSensors);
    let sim = Simulation::new(&st.instrumented).unwrap().with_locks(&st.locks);
    let store = Predicate::parse("Main1.Mode.Store and Mid.Mode.Store").unwrap();
    let cfg = SimConfig {
        seed: 7,
        default_delay: DelayDist::Uniform { lo: 1, hi: 5 },
        max_ticks: 200,
        scenario: Scenario {
            injections: vec![Injection { tick: 1, event: "TubeOperator.u_incident".into() }],
            assertions: vec![
                Assertion { tick: 1, predicate: Predicate::parse("Main1.Mode.Empty").unwrap() },
                Assertion { tick: 150, predicate: store },
            ],
        },
        ..Default::default()
    };
    let out = sim.run(&cfg).unwrap();
    assert!(out.verdict.ok(), "{:?}", out.verdict);
    assert_eq!(out.verdict.assertions.len(), 2);
}

#[test]
fn instrumented_runs_stay_safe() {
    for v in [SensorVariant::LadderSensors, SensorVariant::IndependentSensors] {
        let st = instrumented(v);
        let sup = zero_delay_product(&st.instrumented, DEFAULT_STATE_LIMIT).unwrap();
        let original = st.multilevel.global_product(DEFAULT_STATE_LIMIT).unwrap();
        let sim = Simulation::new(&st.instrumented).unwrap().with_locks(&st.locks).with_monitor(&sup);
        for seed in 0..100 {
            let cfg = SimConfig {
                seed,
                default_delay: DelayDist::Uniform { lo: 1, hi: 5 },
                max_ticks: 300,
                env_rate: 0.6,
                ..Default::default()
            };
            let out = sim.run(&cfg).unwrap();
            assert!(out.verdict.ok(), "{v:?} seed {seed}: {:?}", out.verdict);
            assert!(monitor_safety(&out.trace, &original), "{v:?} seed {seed}");
        }
    }
}
