mod common;

use proptest::prelude::*;
use serde_json::{json, Map, Value};

use common::fixtures;
use lfo::session::{parse_edit_log, Export, FramePatch, Session, EDITS_SUFFIX, RECORDING_SUFFIX};
use lfo_core::contact::TaskType;
use lfo_core::taskmodel::to_canonical;

const TASKS: [TaskType; 7] = [
    TaskType::Grasp,
    TaskType::PTG11,
    TaskType::STG12,
    TaskType::PTG13,
    TaskType::PTG51,
    TaskType::PTG31,
    TaskType::Release,
];

fn arb_slots() -> impl Strategy<Value = Map<String, Value>> {
    prop_oneof![
        (-0.05f64..0.2).prop_map(|d| json!({"detach_distance": d})),
        (-0.05f64..0.3).prop_map(|d| json!({"approach_distance": d})),
        (-3.0f64..3.0).prop_map(|a| json!({"rotation_angle": a})),
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y)| json!({"displacement": [x, y, 0.0]})),
        Just(json!({"detach_distance": null})),
        Just(json!({"no_such_slot": 1})),
        Just(json!({"grasp_closure": "passive-force"})),
    ]
    .prop_map(|v| v.as_object().unwrap().clone())
}

fn arb_edit() -> impl Strategy<Value = (usize, FramePatch)> {
    (
        0usize..6,
        prop::option::of(prop::sample::select(TASKS.to_vec())),
        prop::option::of(arb_slots()),
    )
        .prop_map(|(frame, task, slots)| (frame, FramePatch { task, slots }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reopening_replays_to_the_same_draft(edits in prop::collection::vec(arb_edit(), 0..10)) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::copy(fixtures().join("box_demo.rec.json"), dir.path().join(format!("box_demo{RECORDING_SUFFIX}"))).unwrap();
        let log = dir.path().join(format!("box_demo{EDITS_SUFFIX}"));
        let mut s = Session::open(dir.path(), "box_demo").unwrap();
        for (frame, patch) in edits {
            let before = (s.draft.clone(), std::fs::read_to_string(&log).unwrap_or_default());
            if s.edit(frame, patch, Some(&log)).is_err() {
                // a rejected edit changes neither the draft nor the log
                prop_assert_eq!(&s.draft, &before.0);
                prop_assert_eq!(std::fs::read_to_string(&log).unwrap_or_default(), before.1);
            }
        }
        let logged = parse_edit_log(&std::fs::read_to_string(&log).unwrap_or_default()).unwrap();
        prop_assert_eq!(&logged, &s.edits);
        let reopened = Session::open(dir.path(), "box_demo").unwrap();
        prop_assert_eq!(&reopened.draft, &s.draft);
        prop_assert_eq!(&reopened.edits, &s.edits);
        match s.export(false) {
            Ok(Export::Clean(text)) => prop_assert_eq!(text, to_canonical(&reopened.draft)),
            Ok(Export::Forced(_)) => prop_assert!(false, "unforced export came back forced"),
            Err(report) => prop_assert!(!report.ok && !report.violations.is_empty()),
        }
    }
}
