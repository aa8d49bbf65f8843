mod common;

use axum::http::{Method, StatusCode};
use serde_json::{json, Value};

use common::{call, call_json, data_dir};
use lfo::service::{bind, router, AppState};
use lfo::session::{parse_edit_log, Session};
use lfo_core::decoder::{Attachment, ExecutionTrace};
use lfo_core::laban::parse_score;
use lfo_core::taskmodel::{to_canonical, GMRProgram};

fn tasks(program: &Value) -> Vec<String> {
    program["frames"].as_array().unwrap().iter().map(|f| f["task"].as_str().unwrap().to_string()).collect()
}

fn edit_lines(dir: &std::path::Path, id: &str) -> usize {
    std::fs::read_to_string(dir.join(format!("{id}.edits.ndjson"))).map_or(0, |t| t.lines().count())
}

#[tokio::test]
async fn lists_sessions_and_reads_drafts() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    let (s, list) = call_json(&app, Method::GET, "/api/sessions", None).await;
    assert_eq!(s, StatusCode::OK);
    let ids: Vec<&str> = list.as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["box_demo", "fridge_ambiguous"]);

    let (s, view) = call_json(&app, Method::GET, "/api/session/box_demo", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(tasks(&view["program"]), ["Grasp", "PTG11", "STG12", "PTG13", "Release"]);
    assert_eq!(view["segments"].as_array().unwrap().len(), 5);
    assert_eq!(view["validation"]["ok"], true);
    assert_eq!(view["pending_reviews"], json!([]));

    let (_, view) = call_json(&app, Method::GET, "/api/session/fridge_ambiguous", None).await;
    let reviews = view["pending_reviews"].as_array().unwrap();
    assert_eq!(reviews.len(), 1);
    assert_eq!(reviews[0]["frame"], 1);
    assert_eq!(reviews[0]["marker"]["candidates"], json!(["PTG31", "PTG51"]));
}

#[tokio::test]
async fn unknown_ids_and_frames_are_not_found() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    for uri in ["/api/session/nosuch", "/api/session/..box_demo", "/api/session/nosuch/laban", "/api/session/nosuch/trace"] {
        let (s, body) = call_json(&app, Method::GET, uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(body["error"], "not_found");
    }
    let (s, _) = call(&app, Method::PATCH, "/api/session/box_demo/frames/9", Some(json!({"task": "PTG13"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn task_edit_returns_frame_and_fresh_report() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    let (s, body) = call_json(&app, Method::PATCH, "/api/session/box_demo/frames/3", Some(json!({"task": "PTG13"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["frame"]["task"], "PTG13");
    assert_eq!(body["validation"]["ok"], true);

    // carrying turned into a second place
    let (_, body) = call_json(&app, Method::PATCH, "/api/session/box_demo/frames/2", Some(json!({"task": "PTG13"}))).await;
    assert_eq!(body["frame"]["task"], "PTG13");
    assert_eq!(body["frame"]["transition"]["after"], "Hemisphere");
    assert_eq!(body["validation"]["ok"], false);
    assert!(!body["validation"]["violations"].as_array().unwrap().is_empty());

    let (_, report) = call_json(&app, Method::POST, "/api/session/box_demo/validate", None).await;
    assert_eq!(report, body["validation"]);
    assert_eq!(edit_lines(dir.path(), "box_demo"), 2);
}

#[tokio::test]
async fn export_is_refused_until_clean_unless_forced() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    call(&app, Method::PATCH, "/api/session/box_demo/frames/2", Some(json!({"task": "PTG13"}))).await;

    let (s, body) = call_json(&app, Method::POST, "/api/session/box_demo/export", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["error"], "violations");
    assert_eq!(body["validation"]["ok"], false);
    assert!(!dir.path().join("box_demo.program.json").exists());

    let (s, body) = call_json(&app, Method::POST, "/api/session/box_demo/export", Some(json!({"force": true}))).await;
    assert_eq!(s, StatusCode::OK);
    assert!(!body["warnings"].as_array().unwrap().is_empty());
    assert_eq!(tasks(&body["program"]), ["Grasp", "PTG11", "PTG13", "PTG13", "Release"]);

    call(&app, Method::PATCH, "/api/session/box_demo/frames/2", Some(json!({"task": "STG12"}))).await;
    let (s, _) = call(&app, Method::POST, "/api/session/box_demo/export", Some(json!({}))).await;
    assert_eq!(s, StatusCode::OK);
    assert!(dir.path().join("box_demo.program.json").exists());
}

#[tokio::test]
async fn export_equals_last_get_after_canonicalization() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    let edits = [
        (1, json!({"slots": {"detach_distance": 0.12}})),
        (2, json!({"slots": {"displacement": [0.0, 0.3, 0.0]}})),
        (3, json!({"task": "PTG13", "slots": {"approach_distance": 0.05}})),
    ];
    for (i, e) in edits {
        let (s, _) = call(&app, Method::PATCH, &format!("/api/session/box_demo/frames/{i}"), Some(e)).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, view) = call_json(&app, Method::GET, "/api/session/box_demo", None).await;
    let shown: GMRProgram = serde_json::from_value(view["program"].clone()).unwrap();
    let (s, exported) = call(&app, Method::POST, "/api/session/box_demo/export", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(String::from_utf8(exported).unwrap(), to_canonical(&shown));
    assert_eq!(shown.frames[1].slots.detach_distance, Some(0.12));
}

#[tokio::test]
async fn replaying_the_log_reproduces_the_draft() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    let edits = [
        (2, json!({"task": "PTG13"})),
        (1, json!({"slots": {"detach_distance": 0.2, "detach_dir": [0.0, 0.0, 1.0]}})),
        (2, json!({"task": "STG12"})),
        (4, json!({"slots": {"detach_distance": null}})),
        (3, json!({"slots": {"approach_distance": 0.07}})),
    ];
    for (i, e) in edits {
        call(&app, Method::PATCH, &format!("/api/session/box_demo/frames/{i}"), Some(e)).await;
    }
    let (_, before) = call_json(&app, Method::GET, "/api/session/box_demo", None).await;

    // a fresh service knows nothing but the files
    let fresh = router(AppState::new(dir.path()));
    let (_, after) = call_json(&fresh, Method::GET, "/api/session/box_demo", None).await;
    assert_eq!(before["program"], after["program"]);
    assert_eq!(before["validation"], after["validation"]);
    assert_eq!(after["edits"], 5);

    let log = parse_edit_log(&std::fs::read_to_string(dir.path().join("box_demo.edits.ndjson")).unwrap()).unwrap();
    assert_eq!(log.iter().map(|e| e.seq).collect::<Vec<_>>(), [0, 1, 2, 3, 4]);
    assert!(log.windows(2).all(|w| w[0].at <= w[1].at));
    let reopened = Session::open(dir.path(), "box_demo").unwrap();
    assert_eq!(serde_json::to_value(&reopened.draft).unwrap(), after["program"]);
}

#[tokio::test]
async fn bad_slot_values_are_rejected_per_field() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    let uri = "/api/session/box_demo/frames/1";
    let (s, body) = call_json(&app, Method::PATCH, uri, Some(json!({"slots": {"detach_distance": -1.0}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["message"].as_str().unwrap().contains("detach_distance"), "{body}");

    let (s, body) = call_json(&app, Method::PATCH, uri, Some(json!({"slots": {"wingspan": 2.0}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "schema");

    let (s, body) = call_json(&app, Method::PATCH, uri, Some(json!({"slots": {"detach_dir": [0.0, 0.0, 2.0]}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["message"].as_str().unwrap().contains("unit vector"));

    let (s, _) = call(&app, Method::PATCH, uri, Some(json!({"task": "Juggle"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    // rejected edits leave no trace
    assert_eq!(edit_lines(dir.path(), "box_demo"), 0);
    let (_, view) = call_json(&app, Method::GET, "/api/session/box_demo", None).await;
    assert_eq!(view["edits"], 0);

    // clearing a required slot is accepted but reported
    let (s, body) = call_json(&app, Method::PATCH, uri, Some(json!({"slots": {"detach_distance": null}}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["validation"]["ok"], false);
}

#[tokio::test]
async fn choosing_a_task_clears_the_review_marker() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    let (_, body) =
        call_json(&app, Method::PATCH, "/api/session/fridge_ambiguous/frames/1", Some(json!({"task": "PTG51"}))).await;
    assert!(body["frame"].get("review").is_none());
    assert_eq!(body["validation"]["ok"], true);
    let (_, view) = call_json(&app, Method::GET, "/api/session/fridge_ambiguous", None).await;
    assert_eq!(view["pending_reviews"], json!([]));
    assert_eq!(tasks(&view["program"]), ["Grasp", "PTG51"]);
}

#[tokio::test]
async fn laban_score_has_a_row_per_stop() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    let (s, body) = call_json(&app, Method::GET, "/api/session/box_demo/laban", None).await;
    assert_eq!(s, StatusCode::OK);
    let score = parse_score(body["text"].as_str().unwrap()).unwrap();
    assert_eq!(score.rows.len(), 5);
    assert_eq!(serde_json::to_value(&score).unwrap(), body["score"]);
}

#[tokio::test]
async fn trace_is_served_after_simulation() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    let (s, _) = call(&app, Method::GET, "/api/session/box_demo/trace", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, body) =
        call_json(&app, Method::POST, "/api/session/box_demo/simulate", Some(json!({"world": "box_world", "robot": "mobile7"})))
            .await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["completed"], true);
    assert_eq!(body["verification"]["passed"], true);

    let (s, text) = call(&app, Method::GET, "/api/session/box_demo/trace", None).await;
    assert_eq!(s, StatusCode::OK);
    let trace = ExecutionTrace::from_ndjson(std::str::from_utf8(&text).unwrap()).unwrap();
    let world = trace.final_world().unwrap();
    let boxed = world.objects.iter().find(|o| o.name == "box").unwrap();
    assert_eq!(boxed.attachment, Attachment::OnSurface { support: "plate".into() });

    let (s, _) =
        call(&app, Method::POST, "/api/session/box_demo/simulate", Some(json!({"world": "moon", "robot": "mobile7"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    call(&app, Method::PATCH, "/api/session/box_demo/frames/2", Some(json!({"task": "PTG13"}))).await;
    let (s, _) =
        call(&app, Method::POST, "/api/session/box_demo/simulate", Some(json!({"world": "box_world", "robot": "fixed6"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_edits_are_serialized() {
    let dir = data_dir();
    let app = router(AppState::new(dir.path()));
    let mut handles = Vec::new();
    for k in 0..24 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let body = json!({"slots": {"detach_distance": 0.01 * (k + 1) as f64}});
            let (s, _) = call(&app, Method::PATCH, "/api/session/box_demo/frames/1", Some(body)).await;
            assert_eq!(s, StatusCode::OK);
            let (s, view) = call_json(&app, Method::GET, "/api/session/box_demo", None).await;
            assert_eq!(s, StatusCode::OK);
            // a reader sees a whole draft: the edit count matches the log prefix it reflects
            assert!(view["edits"].as_u64().unwrap() >= 1);
        }));
    }
    for h in handles {
        h.await.unwrap();
    }
    let log = parse_edit_log(&std::fs::read_to_string(dir.path().join("box_demo.edits.ndjson")).unwrap()).unwrap();
    assert_eq!(log.len(), 24);
    assert!(log.iter().enumerate().all(|(i, e)| e.seq == i));
    let last = log.last().unwrap().patch.slots.as_ref().unwrap()["detach_distance"].as_f64();
    let (_, view) = call_json(&app, Method::GET, "/api/session/box_demo", None).await;
    assert_eq!(view["program"]["frames"][1]["slots"]["detach_distance"].as_f64(), last);
    let reopened = Session::open(dir.path(), "box_demo").unwrap();
    assert_eq!(serde_json::to_value(&reopened.draft).unwrap(), view["program"]);
}

#[tokio::test]
async fn busy_port_is_a_startup_error() {
    let dir = data_dir();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let err = bind(port, dir.path()).await.err().expect("port is taken");
    assert_eq!(err.kind(), "io");
    assert!(err.to_string().contains(&port.to_string()));
    assert!(bind(0, &dir.path().join("missing")).await.is_err());
}
