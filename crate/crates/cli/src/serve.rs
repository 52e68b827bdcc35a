//! HTTP scenario service.
//!
//! | route | |
//! |---|---|
//! | `GET /model` | stats, sets, parameter catalog, variables, constraints |
//! | `GET /model/parameters/{name}?page=&page_size=` | one page of a parameter table |
//! | `GET /solution` | base solution |
//! | `POST /scenario` | run a patch list, returns the id and diff |
//! | `GET /scenarios` | ids with status and objective |
//! | `GET /scenario/{id}` | patches and diff |
//! | `GET /scenario/{id}/solution` | scenario solution |
//! | `DELETE /scenario/{id}` | forget a scenario |

use crate::commands::{load, solve_options, Failure};
use crate::{exit, ServeArgs};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use indexmap::IndexMap;
use optir_core::data::table_stem;
use optir_core::model::CompileOptions;
use optir_core::solver::{check_solution, solution_groups, summary_json, SolveOptions};
use optir_core::whatif::{parse_patches, run_scenario, solve_instance, Patch, PatchError, Run, ScenarioDiff, ScenarioErrorKind};
use serde::Deserialize;
use serde_json::{json, Value};
use std::sync::{Arc, Mutex};
use tokio::sync::Semaphore;

pub const DEFAULT_PAGE_SIZE: usize = 100;
pub const MAX_PAGE_SIZE: usize = 1000;
pub const DEFAULT_TOP_K: usize = 10;

struct Scenario {
    patches: Vec<Patch>,
    run: Run,
    diff: ScenarioDiff,
}

#[derive(Default)]
struct Registry {
    next: u64,
    /// `None` while the scenario is being solved.
    entries: IndexMap<String, Option<Arc<Scenario>>>,
}

pub struct AppState {
    base: Run,
    copts: CompileOptions,
    sopts: SolveOptions,
    registry: Mutex<Registry>,
    workers: Semaphore,
}

impl AppState {
    pub fn new(base: Run, copts: CompileOptions, sopts: SolveOptions, workers: usize) -> AppState {
        AppState { base, copts, sopts, registry: Mutex::new(Registry::default()), workers: Semaphore::new(workers.max(1)) }
    }

    pub fn base(&self) -> &Run {
        &self.base
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/model", get(get_model))
        .route("/model/parameters/{name}", get(get_parameter))
        .route("/solution", get(get_solution))
        .route("/scenario", axum::routing::post(post_scenario))
        .route("/scenarios", get(list_scenarios))
        .route("/scenario/{id}", get(get_scenario).delete(delete_scenario))
        .route("/scenario/{id}/solution", get(get_scenario_solution))
        .with_state(state)
}

pub fn run(a: &ServeArgs) -> Result<i32, Failure> {
    let sopts = solve_options(&a.solver)?;
    let l = load(&a.model)?;
    let base = solve_instance(l.model, l.store, &l.copts, &sopts)?;
    if !base.solution.status.has_values() {
        return Err(Failure::new(crate::commands::status_code(base.solution.status), format!("base instance is {}", base.solution.status)));
    }
    let state = Arc::new(AppState::new(base, l.copts, sopts, a.workers));
    let addr = format!("{}:{}", a.bind, a.port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::error(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| Failure::error(format!("cannot bind {addr}: {e}")))?;
        log::info!("listening on {addr}");
        eprintln!("listening on http://{addr}");
        axum::serve(listener, router(state)).await.map_err(|e| Failure::error(e.to_string()))
    })?;
    Ok(exit::OK)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({"error": message.into()}))).into_response()
}

fn not_found(what: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("no {what}"))
}

async fn get_model(State(s): State<Arc<AppState>>) -> Json<Value> {
    let r = &s.base;
    let st = r.cm.stats();
    let sets: Vec<Value> = r
        .cm
        .sets
        .iter()
        .map(|set| json!({"name": set.name, "ordered": set.ordered, "size": set.elements.len()}))
        .collect();
    let parameters: Vec<Value> = r
        .model
        .parameters
        .iter()
        .map(|(name, p)| {
            let rows = r.store.get(&p.source).map_or(0, |t| t.rows.len());
            json!({
                "name": name,
                "domain": p.domain,
                "table": table_stem(&p.source),
                "column": p.column,
                "index_columns": p.index_columns,
                "rows": rows,
            })
        })
        .collect();
    let variables: Vec<Value> = r
        .model
        .variables
        .iter()
        .map(|(name, v)| {
            json!({
                "name": name,
                "domain": v.domain,
                "type": v.ty,
                "lower_bound": v.lower_bound,
                "upper_bound": v.upper_bound,
                "count": st.groups.get(name).copied().unwrap_or(0),
            })
        })
        .collect();
    let constraints: Vec<Value> = r
        .model
        .constraints
        .iter()
        .map(|(name, c)| json!({"name": name, "domain": c.domain, "sense": c.sense.as_str(), "rows": st.families.get(name).copied().unwrap_or(0)}))
        .collect();
    Json(json!({
        "problem_class": r.model.problem_class,
        "sense": r.model.sense.as_str(),
        "stats": st,
        "sets": sets,
        "parameters": parameters,
        "variables": variables,
        "constraints": constraints,
    }))
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    page: Option<usize>,
    page_size: Option<usize>,
}

async fn get_parameter(State(s): State<Arc<AppState>>, Path(name): Path<String>, Query(q): Query<PageQuery>) -> Response {
    let Some(p) = s.base.model.parameters.get(&name) else { return not_found("such parameter") };
    let size = q.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
    if size == 0 || size > MAX_PAGE_SIZE {
        return error(StatusCode::BAD_REQUEST, format!("page_size must be in 1..={MAX_PAGE_SIZE}"));
    }
    let page = q.page.unwrap_or(0);
    let (columns, rows): (Vec<String>, &[Vec<String>]) = match s.base.store.get(&p.source) {
        Some(t) => (t.columns.clone(), &t.rows),
        None => (Vec::new(), &[]),
    };
    let start = page.saturating_mul(size).min(rows.len());
    let end = (start + size).min(rows.len());
    Json(json!({
        "name": name,
        "columns": columns,
        "total_rows": rows.len(),
        "page": page,
        "page_size": size,
        "pages": rows.len().div_ceil(size),
        "rows": &rows[start..end],
    }))
    .into_response()
}

fn solution_body(r: &Run, tol: f64) -> Value {
    let mut v = summary_json(&r.solution, &r.cm);
    v["iterations"] = json!(r.solution.iterations);
    v["nodes"] = json!(r.solution.nodes);
    if r.solution.status.has_values() {
        v["max_violation"] = json!(check_solution(&r.cm, &r.solution.values, tol).max_violation);
    }
    v["groups"] = json!(solution_groups(&r.solution, &r.cm));
    v
}

async fn get_solution(State(s): State<Arc<AppState>>) -> Json<Value> {
    Json(solution_body(&s.base, s.sopts.feasibility_tol))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Accepts a bare patch array or `{"id"?, "patches", "top_k"?}`.
fn parse_body(body: &[u8]) -> Result<(Option<String>, Vec<Patch>, usize), String> {
    let v: Value = serde_json::from_slice(body).map_err(|e| format!("malformed JSON: {e}"))?;
    let (id, patches, top_k) = match v {
        Value::Array(_) => (None, v, DEFAULT_TOP_K),
        Value::Object(mut o) => {
            let id = match o.remove("id") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => Some(s),
                Some(_) => return Err("id must be a string".into()),
            };
            let top_k = match o.remove("top_k") {
                None => DEFAULT_TOP_K,
                Some(t) => t.as_u64().ok_or("top_k must be a non-negative integer")? as usize,
            };
            let patches = o.remove("patches").ok_or("missing \"patches\"")?;
            if let Some(k) = o.keys().next() {
                return Err(format!("unknown field {k:?}"));
            }
            (id, patches, top_k)
        }
        _ => return Err("expected a patch array or an object with \"patches\"".into()),
    };
    if let Some(id) = &id {
        if !valid_id(id) {
            return Err(format!("invalid scenario id {id:?}"));
        }
    }
    let patches = parse_patches(&patches.to_string()).map_err(|e| e.to_string())?;
    Ok((id, patches, top_k))
}

async fn post_scenario(State(s): State<Arc<AppState>>, body: Bytes) -> Response {
    let (id, patches, top_k) = match parse_body(&body) {
        Ok(x) => x,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let id = {
        let mut reg = s.registry.lock().expect("registry lock");
        let id = match id {
            Some(id) => id,
            None => loop {
                reg.next += 1;
                let id = format!("s{}", reg.next);
                if !reg.entries.contains_key(&id) {
                    break id;
                }
            },
        };
        if reg.entries.contains_key(&id) {
            return error(StatusCode::CONFLICT, format!("scenario {id:?} already exists"));
        }
        reg.entries.insert(id.clone(), None);
        id
    };
    let permit = s.workers.acquire().await.expect("semaphore open");
    let st = s.clone();
    let job = tokio::task::spawn_blocking(move || {
        let out = run_scenario(&st.base, &patches, &st.copts, &st.sopts, top_k);
        out.map(|(run, diff)| Scenario { patches, run, diff })
    })
    .await;
    drop(permit);
    let forget = || {
        s.registry.lock().expect("registry lock").entries.shift_remove(&id);
    };
    match job {
        Ok(Ok(sc)) => {
            let sc = Arc::new(sc);
            s.registry.lock().expect("registry lock").entries.insert(id.clone(), Some(sc.clone()));
            Json(json!({"id": id, "diff": sc.diff})).into_response()
        }
        Ok(Err(e)) => {
            forget();
            let mut body = json!({"error": e.to_string(), "patch": e.patch});
            match &e.kind {
                ScenarioErrorKind::Patch(PatchError::ValidationFailed(r)) => body["report"] = json!(r),
                ScenarioErrorKind::Compile(optir_core::model::CompileError::Invalid(r)) => body["report"] = json!(r),
                _ => {}
            }
            (StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response()
        }
        Err(e) => {
            forget();
            error(StatusCode::INTERNAL_SERVER_ERROR, format!("scenario task failed: {e}"))
        }
    }
}

fn lookup(s: &AppState, id: &str) -> Option<Arc<Scenario>> {
    s.registry.lock().expect("registry lock").entries.get(id).cloned().flatten()
}

async fn list_scenarios(State(s): State<Arc<AppState>>) -> Json<Value> {
    let reg = s.registry.lock().expect("registry lock");
    let list: Vec<Value> = reg
        .entries
        .iter()
        .filter_map(|(id, sc)| sc.as_ref().map(|sc| json!({"id": id, "status": sc.diff.new_status, "objective": sc.diff.new_objective})))
        .collect();
    Json(json!(list))
}

async fn get_scenario(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match lookup(&s, &id) {
        Some(sc) => Json(json!({"id": id, "patches": sc.patches, "diff": sc.diff})).into_response(),
        None => not_found("such scenario"),
    }
}

async fn get_scenario_solution(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match lookup(&s, &id) {
        Some(sc) => Json(solution_body(&sc.run, s.sopts.feasibility_tol)).into_response(),
        None => not_found("such scenario"),
    }
}

async fn delete_scenario(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let mut reg = s.registry.lock().expect("registry lock");
    match reg.entries.get(&id) {
        Some(Some(_)) => {
            reg.entries.shift_remove(&id);
            StatusCode::NO_CONTENT.into_response()
        }
        Some(None) => error(StatusCode::CONFLICT, format!("scenario {id:?} is still running")),
        None => not_found("such scenario"),
    }
}
