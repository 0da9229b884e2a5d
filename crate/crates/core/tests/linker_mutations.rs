use std::collections::BTreeSet;

use wisflow_core::project::load_sources;
use wisflow_testkit::mutations::MUTATIONS;

#[test]
fn every_rule_has_one_mutation() {
    let codes: BTreeSet<_> = MUTATIONS.iter().map(|m| m.code).collect();
    let expected: BTreeSet<_> = (1..=10).map(|i| format!("L{i:03}")).collect();
    assert_eq!(codes.into_iter().map(String::from).collect::<BTreeSet<_>>(), expected);
}

#[test]
fn each_mutation_yields_only_its_code() {
    for m in MUTATIONS {
        let diags = match load_sources("mutant", &m.files()) {
            Ok(_) => panic!("{} ({}) linked cleanly", m.code, m.what),
            Err(d) => d,
        };
        let codes: BTreeSet<_> = diags.iter().filter(|d| d.is_error()).map(|d| d.code.as_str()).collect();
        assert_eq!(codes, BTreeSet::from([m.code]), "{}: {diags:#?}", m.what);
    }
}

#[test]
fn mutation_diagnostics_point_into_the_mutated_file() {
    for m in MUTATIONS {
        let diags = load_sources("mutant", &m.files()).unwrap_err();
        for d in diags.iter().filter(|d| d.is_error()) {
            assert_eq!(d.location.file, m.file, "{}", d);
            assert!(d.location.line >= 1 && d.location.column >= 1);
        }
    }
}
