//! The engine against an independent walker on random acyclic activities.

use wisflow_core::engine::{NextStep, Submission};
use wisflow_core::linker::reachable_actions;
use wisflow_core::project::load_sources;
use wisflow_testkit::rng_for;
use wisflow_testkit::walk::{self, Outcome, WalkModel, ACTIVITY_NAME};

const CASES: u64 = 250;

#[test]
fn simulate_matches_reference_walk_for_every_answer() {
    let mut runs = 0;
    for case in 0..CASES {
        let model = WalkModel::random(&mut rng_for("oracle", case), 6, 2);
        match walk::compare_with_engine(&model) {
            Ok(n) => runs += n,
            Err(e) => panic!("case {case}: {e}"),
        }
    }
    assert!(runs >= CASES as usize);
}

/// Drives the same runs one request at a time and checks every stop.
#[test]
fn stepwise_runs_stop_where_the_reference_does() {
    for case in 0..CASES / 2 {
        let rng = &mut rng_for("oracle-steps", case);
        let model = WalkModel::random(rng, 6, 2);
        let expected = walk::walk(&model, rng);
        if expected.outcome != Outcome::Finished {
            continue;
        }
        let (engine, user) = walk::engine_for(&model).unwrap();
        let interactive: Vec<&String> = expected
            .trace
            .iter()
            .filter(|a| model.nodes[a[1..].parse::<usize>().unwrap()].interactive)
            .collect();
        let (_, mut next) = engine.start_activity(ACTIVITY_NAME, &user).unwrap();
        for (stop, decision) in interactive.iter().zip(&expected.decisions) {
            let NextStep::Interactive { instance_id, action, .. } = &next else {
                panic!("case {case}: finished before {stop}");
            };
            assert_eq!(&action, stop, "case {case}");
            let submission = Submission {
                decision: decision.clone(),
                ..Submission::default()
            };
            next = engine.submit_action(instance_id, &user, &submission).unwrap();
        }
        assert!(matches!(next, NextStep::Finished { .. }), "case {case}: {next:?}");
        assert!(engine.list_tasks(&user).is_empty());
    }
}

#[test]
fn reachability_matches_breadth_first_search() {
    for case in 0..CASES {
        let model = WalkModel::random(&mut rng_for("reach", case), 8, 3);
        let system = load_sources("walk", &model.project_files()).unwrap();
        let activity = system.activity(ACTIVITY_NAME).unwrap();
        assert_eq!(reachable_actions(activity), model.reachable(), "case {case}");
    }
}
