//! HTTP interface over the planning engine.
//!
//! An authoring session holds a domain, a world and a goal automaton. Every
//! change bumps the session's revision and schedules a background compilation;
//! `GET /sessions/{id}/plan` returns the latest finished compilation together
//! with both revision numbers, so clients can tell when it is stale. Uploads
//! use the engine's own document formats (PDDL text, world and automaton
//! JSON); responses are JSON.

mod error;
mod session;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use goalplan_core::atom::AtomSet;
use goalplan_core::automaton::{parse_automaton, Edit, ValidationIssue};
use goalplan_core::compiler::{compile, BranchingPlan};
use goalplan_core::domain::{ground_task, parse_domain, Domain};
use goalplan_core::executor::{start_session, ExecutionEvent, ExecutionSession, ExecutionTrace};
use goalplan_core::metrics::{evaluate, parse_scenario};
use goalplan_core::world::{parse_world, World};
use serde::Deserialize;
use serde_json::{json, Value};

pub use error::ApiError;
use session::{lock, touch, wait_for, Registry, Session, SessionRef};

/// How long `GET plan?wait=true` waits for the current revision to compile.
const PLAN_WAIT: Duration = Duration::from_secs(30);

type ApiResult<T = Response> = Result<T, ApiError>;

/// Shared server state: the registry of live sessions.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Registry,
}

/// All routes, ready to be served or driven in-process.
pub fn router() -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/domain", put(put_domain).get(get_domain))
        .route("/sessions/{id}/world", put(put_world).get(get_world))
        .route("/sessions/{id}/automaton", put(put_automaton).get(get_automaton))
        .route("/sessions/{id}/automaton/ops", post(automaton_ops))
        .route("/sessions/{id}/plan", get(get_plan))
        .route("/sessions/{id}/plan/branch", post(plan_branch))
        .route("/sessions/{id}/execution", post(start_execution).get(get_execution))
        .route("/sessions/{id}/execution/step", post(execution_step))
        .route("/sessions/{id}/execution/conditional", post(execution_conditional))
        .route("/sessions/{id}/execution/deviation", post(execution_deviation))
        .route("/sessions/{id}/execution/trace", get(execution_trace))
        .route("/score", post(score))
        .with_state(AppState::default())
}

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router()).await
}

fn session(state: &AppState, id: &str) -> ApiResult<SessionRef> {
    state.sessions.get(id).ok_or_else(|| ApiError::not_found("session"))
}

fn json_body<T: for<'de> Deserialize<'de>>(body: &str) -> ApiResult<T> {
    serde_json::from_str(body).map_err(ApiError::body)
}

fn document(content_type: &'static str, text: String) -> Response {
    ([(header::CONTENT_TYPE, content_type)], text).into_response()
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RevisionQuery {
    base_revision: Option<u64>,
}

fn check_base(s: &Session, base: Option<u64>) -> ApiResult<()> {
    match base {
        Some(b) if b != s.revision => Err(ApiError::stale(b, s.revision)),
        _ => Ok(()),
    }
}

/// Structural issues plus, when the universe is known, unknown-atom issues.
fn issues_of(s: &Session) -> Vec<ValidationIssue> {
    let mut issues = s.automaton.validate();
    if let Some(task) = s.universe() {
        issues.extend(s.automaton.check_atoms(&task));
    }
    issues
}

async fn create_session(State(state): State<AppState>) -> Response {
    let (id, slot) = state.sessions.create();
    let s = lock(&slot);
    let body = json!({
        "id": id,
        "revision": s.revision,
        "automaton": s.automaton,
    });
    (StatusCode::CREATED, Json(body)).into_response()
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    state
        .sessions
        .remove(&id)
        .ok_or_else(|| ApiError::not_found("session"))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn put_domain(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RevisionQuery>,
    body: String,
) -> ApiResult<Json<Value>> {
    let slot = session(&state, &id)?;
    let domain = parse_domain(&body)?;
    let mut s = lock(&slot);
    check_base(&s, q.base_revision)?;
    s.domain = Some(domain);
    Ok(Json(json!({ "revision": touch(&mut s, &slot) })))
}

async fn get_domain(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = session(&state, &id)?;
    let s = lock(&slot);
    let domain = s.domain.as_ref().ok_or_else(|| ApiError::not_found("domain"))?;
    Ok(document("text/plain; charset=utf-8", domain.to_pddl()))
}

async fn put_world(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RevisionQuery>,
    body: String,
) -> ApiResult<Json<Value>> {
    let slot = session(&state, &id)?;
    let world = parse_world(&body)?;
    let mut s = lock(&slot);
    check_base(&s, q.base_revision)?;
    s.world = Some(world);
    Ok(Json(json!({ "revision": touch(&mut s, &slot) })))
}

async fn get_world(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = session(&state, &id)?;
    let s = lock(&slot);
    let world = s.world.as_ref().ok_or_else(|| ApiError::not_found("world"))?;
    Ok(document("application/json", world.to_json()))
}

async fn put_automaton(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RevisionQuery>,
    body: String,
) -> ApiResult<Json<Value>> {
    let slot = session(&state, &id)?;
    let automaton = parse_automaton(&body)?;
    let mut s = lock(&slot);
    check_base(&s, q.base_revision)?;
    s.automaton = automaton;
    let issues = issues_of(&s);
    Ok(Json(json!({ "revision": touch(&mut s, &slot), "issues": issues })))
}

async fn get_automaton(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = session(&state, &id)?;
    let s = lock(&slot);
    Ok(document("application/json", s.automaton.to_json()))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct OpsRequest {
    #[serde(default)]
    base_revision: Option<u64>,
    ops: Vec<Edit>,
}

/// Applies a batch of edits atomically: either all succeed or none does.
async fn automaton_ops(State(state): State<AppState>, Path(id): Path<String>, body: String) -> ApiResult<Json<Value>> {
    let slot = session(&state, &id)?;
    let req: OpsRequest = json_body(&body)?;
    let mut s = lock(&slot);
    check_base(&s, req.base_revision)?;
    {
        let universe = s.universe();
        let mut next = s.automaton.clone();
        for (i, op) in req.ops.iter().enumerate() {
            next.apply_edit(op, universe.as_ref()).map_err(|e| {
                let mut err = ApiError::from(e);
                err.message = format!("ops[{i}]: {}", err.message);
                err
            })?;
        }
        s.automaton = next;
    }
    let issues = issues_of(&s);
    let revision = touch(&mut s, &slot);
    Ok(Json(
        json!({ "revision": revision, "issues": issues, "automaton": s.automaton }),
    ))
}

#[derive(Deserialize)]
struct PlanQuery {
    #[serde(default)]
    wait: bool,
}

fn plan_value(plan: &BranchingPlan) -> Value {
    serde_json::from_str(&plan.to_json()).expect("plan JSON is valid")
}

async fn get_plan(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PlanQuery>,
) -> ApiResult<Json<Value>> {
    let slot = session(&state, &id)?;
    if q.wait {
        let revision = lock(&slot).revision;
        if revision > 0 {
            wait_for(&slot, revision, PLAN_WAIT).await;
        }
    }
    let s = lock(&slot);
    let compiled_revision = s.compiled.as_ref().map(|c| c.revision);
    let mut body = json!({
        "revision": s.revision,
        "compiledRevision": compiled_revision,
        "stale": compiled_revision != Some(s.revision),
        "status": null,
        "plan": null,
        "report": null,
        "error": null,
    });
    match s.compiled.as_ref().map(|c| &c.outcome) {
        Some(Ok(c)) => {
            body["status"] = json!(c.report.status);
            body["plan"] = plan_value(&c.plan);
            body["report"] = json!(c.report);
        }
        Some(Err(e)) => body["error"] = json!(e),
        None => {}
    }
    Ok(Json(body))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchRequest {
    #[serde(default)]
    choices: Vec<AtomSet>,
}

/// The node chain the plan follows for the given conditional choices.
async fn plan_branch(State(state): State<AppState>, Path(id): Path<String>, body: String) -> ApiResult<Json<Value>> {
    let slot = session(&state, &id)?;
    let req: BranchRequest = json_body(&body)?;
    let s = lock(&slot);
    let compiled = s
        .plan()
        .ok_or_else(|| ApiError::conflict("NO_PLAN", "nothing has been compiled yet"))?;
    let chain = compiled.plan.linearize_branch(&req.choices)?;
    let all = plan_value(&compiled.plan);
    let nodes: Vec<Value> = chain.iter().map(|n| all["nodes"][n.id].clone()).collect();
    let last = chain.last().map(|n| n.id);
    let branch_point = last.filter(|&n| compiled.plan.is_branch_point(n));
    let options: Vec<AtomSet> = branch_point
        .map(|n| compiled.plan.branch_options(n).into_iter().map(|(p, _)| p).collect())
        .unwrap_or_default();
    Ok(Json(
        json!({ "nodes": nodes, "branchPoint": branch_point, "options": options }),
    ))
}

fn snapshot(exec: &ExecutionSession, events: &[ExecutionEvent]) -> Value {
    json!({
        "status": exec.status(),
        "cursor": exec.cursor(),
        "steps": exec.steps(),
        "perceived": exec.perceived().facts(),
        "pendingConditionals": exec.pending_conditionals(),
        "events": events,
    })
}

/// Starts (or restarts) executing the latest compiled plan.
async fn start_execution(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let slot = session(&state, &id)?;
    let mut s = lock(&slot);
    let compiled = s
        .plan()
        .ok_or_else(|| ApiError::conflict("NO_PLAN", "nothing has been compiled yet"))?;
    let exec = start_session(compiled.plan.clone(), compiled.task.clone())?;
    let body = snapshot(&exec, &[]);
    s.execution = Some(exec);
    Ok(Json(body))
}

fn with_execution(
    slot: &SessionRef,
    f: impl FnOnce(&mut ExecutionSession) -> Result<Vec<ExecutionEvent>, ApiError>,
) -> ApiResult<Json<Value>> {
    let mut s = lock(slot);
    let exec = s
        .execution
        .as_mut()
        .ok_or_else(|| ApiError::conflict("NO_EXECUTION", "no execution has been started"))?;
    let events = f(exec)?;
    Ok(Json(snapshot(exec, &events)))
}

async fn get_execution(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    with_execution(&session(&state, &id)?, |_| Ok(Vec::new()))
}

async fn execution_step(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    with_execution(&session(&state, &id)?, |e| Ok(e.step()?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionalRequest {
    #[serde(default)]
    conditional: AtomSet,
}

async fn execution_conditional(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> ApiResult<Json<Value>> {
    let req: ConditionalRequest = json_body(&body)?;
    with_execution(&session(&state, &id)?, |e| Ok(e.assert_conditional(&req.conditional)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviationRequest {
    #[serde(default)]
    add: AtomSet,
    #[serde(default)]
    remove: AtomSet,
}

async fn execution_deviation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> ApiResult<Json<Value>> {
    let req: DeviationRequest = json_body(&body)?;
    with_execution(&session(&state, &id)?, |e| {
        Ok(e.inject_deviation(&req.add, &req.remove)?)
    })
}

async fn execution_trace(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = session(&state, &id)?;
    let s = lock(&slot);
    let exec = s
        .execution
        .as_ref()
        .ok_or_else(|| ApiError::conflict("NO_EXECUTION", "no execution has been started"))?;
    Ok(document("application/json", exec.trace().to_json()))
}

/// Documents may be sent either as their raw text (a JSON string) or, for the
/// JSON formats, inline.
fn text_of(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ScoreRequest {
    /// Score the session's latest plan against its domain and world.
    #[serde(default)]
    session: Option<String>,
    #[serde(default)]
    domain: Option<Value>,
    #[serde(default)]
    world: Option<Value>,
    /// Compiled plan document; alternatively an automaton to compile.
    #[serde(default)]
    plan: Option<Value>,
    #[serde(default)]
    automaton: Option<Value>,
    scenario: Value,
    /// Trace to compute the runtime score from. With a session and no trace,
    /// the session's current execution trace is used.
    #[serde(default)]
    trace: Option<Value>,
}

struct ScoreInputs {
    domain: Domain,
    world: World,
    plan: Arc<BranchingPlan>,
    task: Arc<goalplan_core::domain::GroundTask>,
    trace: Option<ExecutionTrace>,
}

fn score_inputs(state: &AppState, req: &ScoreRequest) -> ApiResult<ScoreInputs> {
    let trace = req
        .trace
        .as_ref()
        .map(|t| ExecutionTrace::from_json(&text_of(t)).map_err(ApiError::body))
        .transpose()?;
    if let Some(id) = &req.session {
        let slot = session(state, id)?;
        let s = lock(&slot);
        let compiled = s
            .plan()
            .ok_or_else(|| ApiError::conflict("NO_PLAN", "nothing has been compiled yet"))?;
        return Ok(ScoreInputs {
            domain: s.domain.clone().expect("compiled sessions have a domain"),
            world: s.world.clone().expect("compiled sessions have a world"),
            plan: compiled.plan.clone(),
            task: compiled.task.clone(),
            trace: trace.or_else(|| s.execution.as_ref().map(|e| e.trace())),
        });
    }
    let missing = |what| ApiError::invalid("MISSING_INPUT", format!("`{what}` is required without `session`"));
    let domain = parse_domain(&text_of(req.domain.as_ref().ok_or_else(|| missing("domain"))?))?;
    let world = parse_world(&text_of(req.world.as_ref().ok_or_else(|| missing("world"))?))?;
    let task = ground_task(&domain, &world).map_err(|e| ApiError::invalid("GROUNDING", e.to_string()))?;
    let plan = match (&req.plan, &req.automaton) {
        (Some(p), _) => {
            BranchingPlan::from_json(&text_of(p), &task).map_err(|e| ApiError::invalid("PLAN", e.to_string()))?
        }
        (None, Some(a)) => {
            let automaton = parse_automaton(&text_of(a))?;
            compile(&domain, &world, &automaton)
                .map_err(|e| ApiError::invalid("GROUNDING", e.to_string()))?
                .0
        }
        (None, None) => return Err(missing("plan")),
    };
    Ok(ScoreInputs {
        domain,
        world,
        plan: Arc::new(plan),
        task: Arc::new(task),
        trace,
    })
}

async fn score(State(state): State<AppState>, body: String) -> ApiResult<Json<Value>> {
    let req: ScoreRequest = json_body(&body)?;
    let inputs = score_inputs(&state, &req)?;
    let scenario = parse_scenario(&text_of(&req.scenario), &inputs.domain)?;
    let evaluation = tokio::task::spawn_blocking(move || {
        evaluate(
            inputs.plan,
            inputs.task,
            &scenario,
            &inputs.domain,
            &inputs.world,
            inputs.trace.as_ref(),
        )
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))??;
    Ok(Json(json!(evaluation)))
}
