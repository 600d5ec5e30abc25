//! The HTTP surface driven in-process: uploads, edits, background
//! compilation, execution and scoring.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use goalplan_core::automaton::{parse_automaton, GoalAutomaton};
use goalplan_core::compiler::{compile_task, CompileOptions};
use goalplan_core::domain::{ground_task, parse_domain};
use goalplan_core::world::{initial_state, parse_world};
use goalplan_service::router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use support::invariants::violations;
use tower::ServiceExt;

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

async fn call(app: &Router, method: Method, uri: &str, body: impl Into<String>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body.into()))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn call_json(app: &Router, method: Method, uri: &str, body: impl Into<String>) -> (StatusCode, Value) {
    let (status, text) = call(app, method, uri, body).await;
    (
        status,
        serde_json::from_str(&text).unwrap_or_else(|e| panic!("{uri}: {e}: {text}")),
    )
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call_json(app, Method::POST, "/sessions", "").await;
    assert_eq!(status, StatusCode::CREATED);
    body["id"].as_str().unwrap().to_string()
}

/// A session with the fixture's domain and world uploaded.
async fn session_with(app: &Router, stem: &str) -> String {
    let id = new_session(app).await;
    let (s, _) = call(
        app,
        Method::PUT,
        &format!("/sessions/{id}/domain"),
        fixture(&format!("{stem}.pddl")),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(
        app,
        Method::PUT,
        &format!("/sessions/{id}/world"),
        fixture(&format!("{stem}.world")),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    id
}

async fn plan(app: &Router, id: &str) -> Value {
    let (status, body) = call_json(app, Method::GET, &format!("/sessions/{id}/plan?wait=true"), "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["stale"], false, "{body}");
    body
}

/// The plan compiled locally from fixture files, as JSON.
fn local_plan(stem: &str, automaton: &GoalAutomaton) -> Value {
    let domain = parse_domain(&fixture(&format!("{stem}.pddl"))).unwrap();
    let world = parse_world(&fixture(&format!("{stem}.world"))).unwrap();
    let task = ground_task(&domain, &world).unwrap();
    let init = initial_state(&world, &task).unwrap();
    let (plan, report) = compile_task(&task, &init, automaton, CompileOptions::default());
    assert_eq!(
        violations(&task, &init, automaton, &plan, &report),
        Vec::<String>::new()
    );
    serde_json::from_str(&plan.to_json()).unwrap()
}

#[tokio::test]
async fn new_session_has_an_empty_automaton() {
    let app = router();
    let a = new_session(&app).await;
    let b = new_session(&app).await;
    assert_ne!(a, b);
    let (status, text) = call(&app, Method::GET, &format!("/sessions/{a}/automaton"), "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(text, GoalAutomaton::new().to_json());
    let (status, _) = call(&app, Method::GET, "/sessions/nope/automaton", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn domain_syntax_errors_are_located() {
    let app = router();
    let id = new_session(&app).await;
    let broken = "(define (domain d)\n  (:predicates (p))\n  (:action a :parameters () :effect (and (p)\n";
    let (status, body) = call_json(&app, Method::PUT, &format!("/sessions/{id}/domain"), broken).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"]["line"].as_u64().unwrap() >= 1, "{body}");
    assert!(body["error"]["column"].as_u64().is_some(), "{body}");

    let (status, body) = call_json(&app, Method::PUT, &format!("/sessions/{id}/world"), "{\n  \"grid\": ").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["line"], 2);
}

#[tokio::test]
async fn uploaded_world_reads_back_canonically() {
    let app = router();
    let id = new_session(&app).await;
    let text = fixture("tidying.world");
    let (status, _) = call(&app, Method::PUT, &format!("/sessions/{id}/world"), text.clone()).await;
    assert_eq!(status, StatusCode::OK);
    let (status, served) = call(&app, Method::GET, &format!("/sessions/{id}/world"), "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(served, parse_world(&text).unwrap().to_json());
}

#[tokio::test]
async fn caregiving_drawn_edit_by_edit() {
    let app = router();
    let id = session_with(&app, "caregiving").await;
    let ops_uri = format!("/sessions/{id}/automaton/ops");
    let steps = [
        json!([
            {"op": "add_checkpoint", "parent": "c0", "id": "alerted", "label": "alerted"},
            {"op": "set_goals", "checkpoint": "alerted", "goals": ["alertedTo(resident,lunchtime)"]},
        ]),
        json!([
            {"op": "add_checkpoint", "parent": "alerted", "id": "fetched", "label": "fetched"},
            {"op": "set_goals", "checkpoint": "fetched", "goals": ["at(tray,table)", "full(tray)"]},
            {"op": "set_conditional", "from": "alerted", "to": "fetched", "conditional": ["acknowledged(lunchalert)"]},
        ]),
        json!([
            {"op": "add_checkpoint", "parent": "alerted", "id": "cancelled", "label": "cancelled"},
            {"op": "set_goals", "checkpoint": "cancelled", "goals": ["robotAt(home)"]},
            {"op": "set_conditional", "from": "alerted", "to": "cancelled", "conditional": ["dismissed"]},
        ]),
        json!([
            {"op": "add_checkpoint", "parent": "fetched", "id": "home", "label": "home"},
            {"op": "set_goals", "checkpoint": "home", "goals": ["robotAt(home)"]},
        ]),
    ];
    let mut revision = 2;
    for ops in steps {
        let body = json!({"baseRevision": revision, "ops": ops}).to_string();
        let (status, res) = call_json(&app, Method::POST, &ops_uri, body).await;
        assert_eq!(status, StatusCode::OK, "{res}");
        assert!(res["issues"].as_array().unwrap().is_empty(), "{res}");
        revision = res["revision"].as_u64().unwrap();
    }

    let expected = parse_automaton(&fixture("caregiving.gat")).unwrap();
    let (_, served) = call(&app, Method::GET, &format!("/sessions/{id}/automaton"), "").await;
    assert_eq!(served, expected.to_json());

    let body = plan(&app, &id).await;
    assert_eq!(body["compiledRevision"], revision);
    assert_eq!(body["status"], "COMPLETE");
    assert_eq!(body["plan"], local_plan("caregiving", &expected));

    // the delivery branch, as the visualizer would request it
    let req = json!({"choices": [["acknowledged(lunchalert)"]]}).to_string();
    let (status, chain) = call_json(&app, Method::POST, &format!("/sessions/{id}/plan/branch"), req).await;
    assert_eq!(status, StatusCode::OK);
    let actions: Vec<&str> = chain["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|n| n["action"].as_str())
        .collect();
    let cafeteria = actions
        .iter()
        .position(|a| a.starts_with("moveTo") && a.ends_with(",cafeteria)"))
        .unwrap();
    let pickup = actions.iter().position(|a| a.starts_with("pickUp(tray")).unwrap();
    assert!(cafeteria < pickup, "{actions:?}");

    let (status, _) = call_json(
        &app,
        Method::POST,
        &format!("/sessions/{id}/plan/branch"),
        r#"{"choices": [["nonsense"]]}"#,
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn stale_revisions_are_rejected() {
    let app = router();
    let id = session_with(&app, "tidying").await;
    let ops_uri = format!("/sessions/{id}/automaton/ops");
    let edit = |rev: u64, cid: &str| {
        json!({"baseRevision": rev, "ops": [{"op": "add_checkpoint", "parent": "c0", "id": cid}]}).to_string()
    };
    let (status, _) = call_json(&app, Method::POST, &ops_uri, edit(2, "a")).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = call_json(&app, Method::POST, &ops_uri, edit(2, "b")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "STALE_REVISION");
    assert_eq!(body["error"]["revision"], 3);

    // a failing batch leaves nothing behind
    let bad = json!({"ops": [
        {"op": "add_checkpoint", "parent": "c0", "id": "x"},
        {"op": "set_goals", "checkpoint": "x", "goals": ["flying(cup)"]},
    ]});
    let (status, _) = call_json(&app, Method::POST, &ops_uri, bad.to_string()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (_, served) = call(&app, Method::GET, &format!("/sessions/{id}/automaton"), "").await;
    assert!(!served.contains("\"x\""));
}

#[tokio::test]
async fn duplicate_conditionals_are_reported_in_band() {
    let app = router();
    let id = session_with(&app, "tidying").await;
    let (status, body) = call_json(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/automaton"),
        fixture("tidying-underspecified.gat"),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(
        body["issues"]
            .as_array()
            .unwrap()
            .iter()
            .any(|i| i["code"] == "UNDERSPECIFIED"),
        "{body}"
    );
    let body = plan(&app, &id).await;
    assert_eq!(body["status"], "BLOCKED");
    let (status, body) = call_json(&app, Method::POST, &format!("/sessions/{id}/execution"), "").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "BLOCKED");
}

#[tokio::test]
async fn tidying_put_compiles_and_matches_local_compilation() {
    let app = router();
    let id = session_with(&app, "tidying").await;
    for gat in [
        "fig4.gat",
        "tidying-conflict.gat",
        "tidying-no-cupboard.gat",
        "tidying-human-opens.gat",
    ] {
        let text = fixture(gat);
        let (status, _) = call(&app, Method::PUT, &format!("/sessions/{id}/automaton"), text.clone()).await;
        assert_eq!(status, StatusCode::OK);
        let body = plan(&app, &id).await;
        assert_eq!(
            body["plan"],
            local_plan("tidying", &parse_automaton(&text).unwrap()),
            "{gat}"
        );
    }
}

async fn step_until_blocked(app: &Router, id: &str) -> Value {
    loop {
        let (status, snap) = call_json(app, Method::POST, &format!("/sessions/{id}/execution/step"), "").await;
        assert_eq!(status, StatusCode::OK, "{snap}");
        if snap["status"]["state"] != "RUNNING" {
            return snap;
        }
    }
}

#[tokio::test]
async fn cooperative_tidying_run_scores_four_of_four() {
    let app = router();
    let id = session_with(&app, "tidying").await;
    call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/automaton"),
        fixture("fig4.gat"),
    )
    .await;
    plan(&app, &id).await;

    let (status, snap) = call_json(&app, Method::POST, &format!("/sessions/{id}/execution"), "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snap["status"]["state"], "RUNNING");
    let snap = step_until_blocked(&app, &id).await;
    assert_eq!(snap["status"]["state"], "WAITING");
    assert_eq!(snap["steps"], 7);

    for dish in ["cup", "plate"] {
        let wash = json!({
            "add": [format!("at({dish},drying-rack)"), format!("clean({dish})")],
            "remove": [format!("at({dish},countertop)")],
        });
        let (status, _) = call_json(
            &app,
            Method::POST,
            &format!("/sessions/{id}/execution/deviation"),
            wash.to_string(),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    let confirm = json!({"conditional": ["at(cup,drying-rack)", "at(plate,drying-rack)"]}).to_string();
    let (status, _) = call_json(
        &app,
        Method::POST,
        &format!("/sessions/{id}/execution/conditional"),
        confirm,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let snap = step_until_blocked(&app, &id).await;
    assert_eq!(snap["status"]["state"], "DONE");

    let (status, trace) = call(&app, Method::GET, &format!("/sessions/{id}/execution/trace"), "").await;
    assert_eq!(status, StatusCode::OK);
    let scenario: Value = serde_json::from_str(&fixture("tidying.scenario")).unwrap();
    let req = json!({"session": id, "scenario": scenario}).to_string();
    let (status, score) = call_json(&app, Method::POST, "/score", req).await;
    assert_eq!(status, StatusCode::OK, "{score}");
    assert_eq!(
        score,
        json!({"runtime": {"value": 4, "max": 4}, "feasibility": {"value": 4, "max": 4}, "effort": 2})
    );

    // the same numbers from standalone documents
    let req = json!({
        "domain": fixture("tidying.pddl"),
        "world": fixture("tidying.world"),
        "automaton": fixture("fig4.gat"),
        "scenario": scenario,
        "trace": trace,
    });
    let (status, standalone) = call_json(&app, Method::POST, "/score", req.to_string()).await;
    assert_eq!(status, StatusCode::OK, "{standalone}");
    assert_eq!(standalone, score);
}

#[tokio::test]
async fn stepping_after_a_halt_is_a_conflict() {
    let app = router();
    let id = session_with(&app, "tidying").await;
    call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/automaton"),
        fixture("fig4.gat"),
    )
    .await;
    plan(&app, &id).await;
    call_json(&app, Method::POST, &format!("/sessions/{id}/execution"), "").await;
    let lose = json!({"remove": ["at(cup,dining-table)"]}).to_string();
    call_json(&app, Method::POST, &format!("/sessions/{id}/execution/deviation"), lose).await;
    let snap = step_until_blocked(&app, &id).await;
    assert_eq!(
        snap["status"],
        json!({"state": "HALTED", "reason": "UNREACHABLE_EFFECT"})
    );
    let (status, body) = call_json(&app, Method::POST, &format!("/sessions/{id}/execution/step"), "").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "TERMINAL");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn interleaved_sessions_stay_isolated() {
    let app = router();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ids = Vec::new();
    let mut expected = Vec::new();
    for _ in 0..4 {
        ids.push(session_with(&app, "tidying").await);
        expected.push(GoalAutomaton::new());
    }
    let goals = [
        "at(cup,countertop)",
        "at(plate,countertop)",
        "holding(cup)",
        "open(cupboard)",
    ];
    let mut batches: Vec<Vec<String>> = vec![Vec::new(); ids.len()];
    for n in 0..40 {
        let k = rng.gen_range(0..ids.len());
        let parent = {
            let a = &expected[k];
            a.checkpoints[rng.gen_range(0..a.checkpoints.len())].id.clone()
        };
        let cid = format!("k{n}");
        let goal = goals[rng.gen_range(0..goals.len())];
        let ops = json!([
            {"op": "add_checkpoint", "parent": parent, "id": cid},
            {"op": "set_goals", "checkpoint": cid, "goals": [goal]},
        ]);
        for op in serde_json::from_value::<Vec<goalplan_core::automaton::Edit>>(ops.clone()).unwrap() {
            expected[k].apply_edit(&op, None).unwrap();
        }
        batches[k].push(json!({"ops": ops}).to_string());
    }
    // each session receives its edits in order; sessions run concurrently
    let tasks: Vec<_> = ids
        .iter()
        .zip(batches)
        .map(|(id, batch)| {
            let (app, uri) = (app.clone(), format!("/sessions/{id}/automaton/ops"));
            tokio::spawn(async move {
                for body in batch {
                    let (status, res) = call_json(&app, Method::POST, &uri, body).await;
                    assert_eq!(status, StatusCode::OK, "{res}");
                    tokio::task::yield_now().await;
                }
            })
        })
        .collect();
    for t in tasks {
        t.await.unwrap();
    }
    for (id, automaton) in ids.iter().zip(&expected) {
        let (_, served) = call(&app, Method::GET, &format!("/sessions/{id}/automaton"), "").await;
        assert_eq!(served, automaton.to_json());
        let body = plan(&app, id).await;
        assert_eq!(body["plan"], local_plan("tidying", automaton));
    }
}
