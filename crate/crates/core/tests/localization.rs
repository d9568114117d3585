use distsup::localization::{global_equivalence_check, localize};
use distsup::ops::DEFAULT_STATE_LIMIT;
use distsup::pump_cellar::{full_tree, pump_cellar_model, reduced_tree, Scale, SensorVariant};
use distsup::synthesis::multilevel_synthesize;

#[test]
fn reduced_pump_cellar_localizes_exactly() {
    for variant in [SensorVariant::IndependentSensors, SensorVariant::LadderSensors] {
        let m = pump_cellar_model(variant, Scale::Reduced);
        let tree = reduced_tree(&m);
        let ml = multilevel_synthesize(&m.system().unwrap(), &m.requirements, &tree, DEFAULT_STATE_LIMIT).unwrap();
        let top = tree.node(0).children.clone();
        let (locs, map) = localize(&ml, &tree, &top).unwrap();
        assert_eq!(locs.len(), 2);
        assert!(!map.entries.is_empty());
        let eq = global_equivalence_check(&locs, &ml, 10, DEFAULT_STATE_LIMIT).unwrap();
        assert!(eq.equal && eq.exact, "{variant:?}: {eq:?}");
    }
}

#[test]
fn full_pump_cellar_observers() {
    let m = pump_cellar_model(SensorVariant::IndependentSensors, Scale::Full);
    let tree = full_tree(&m);
    let ml = multilevel_synthesize(&m.system().unwrap(), &m.requirements, &tree, DEFAULT_STATE_LIMIT).unwrap();
    let top = tree.node(0).children.clone();
    let (locs, _) = localize(&ml, &tree, &top).unwrap();
    let sup1: Vec<_> = locs[0].supervisors.iter().filter(|s| s.name.starts_with("Sup1_")).collect();
    assert_eq!(sup1.len(), 1);
    assert_eq!(locs[0].observers, vec!["Tube1", "Tube2"]);
    assert!(locs[1].observers.is_empty());
    let shared_top = &locs[1].supervisors[0];
    assert!(shared_top.name.starts_with("Sup1_"));
    assert_eq!(shared_top.plant_refs(), vec!["Tube1", "Tube2"]);
}
