//! Stateless JSON API over pedigree inference and risk curves.

use axum::body::Bytes;
use axum::extract::DefaultBodyLimit;
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pedrisk::config::{ModelConfig, BUILTIN_MODELS};
use pedrisk::pedigree::PedigreeFile;
use pedrisk::report::{posterior_json, report_log_evidence, risk_json, round_sig};
use pedrisk::risk::{risk_curve_from_pedigree, RiskError, RiskOptions, DEFAULT_DELTA_T, DEFAULT_T_MAX};
use pedrisk::{InferenceError, Model, Network, PedigreeError};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};

pub const MAX_BODY_BYTES: usize = 1 << 20;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    pub pedigree: PedigreeFile,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub queries: Vec<Query>,
}

/// A built-in model by name, or a full parameter set.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Builtin(String),
    Custom(Box<ModelConfig>),
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Query {
    Posterior,
    Risk {
        individual: String,
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default)]
        tmax: Option<f64>,
        #[serde(default)]
        dt: Option<f64>,
    },
    Joint {
        individuals: Vec<String>,
    },
}

/// An error response: status plus a JSON body with a machine-readable `error`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({"error": "validation", "field": field.into(), "message": message.into()}),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn pedigree_error(e: PedigreeError) -> ApiError {
    match &e {
        PedigreeError::Validation { id, rule } => ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({
                "error": "validation",
                "field": "pedigree",
                "individual": id,
                "rule": rule.to_string(),
                "message": e.to_string(),
            }),
        },
        _ => ApiError::invalid("pedigree", e.to_string()),
    }
}

fn resolve_model(spec: Option<&ModelSpec>) -> Result<Model, ApiError> {
    match spec {
        None => Ok(Model::claus_easton()),
        Some(ModelSpec::Builtin(name)) => Model::builtin(name).map_err(|e| ApiError::invalid("model", e.to_string())),
        Some(ModelSpec::Custom(config)) => {
            Model::from_config(config).map_err(|e| ApiError::invalid("model", e.to_string()))
        }
    }
}

fn impossible(explanation: Option<String>) -> ApiError {
    ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        body: json!({
            "error": "impossible_evidence",
            "log_evidence": null,
            "explanation": explanation.unwrap_or_default(),
        }),
    }
}

fn risk_error(q: usize, e: RiskError) -> ApiError {
    let field = format!("queries[{q}]");
    match e {
        RiskError::Affected(id) => ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({
                "error": "affected_individual",
                "field": field,
                "individual": id,
                "message": format!("individual {id:?} is affected; risk curves need an unaffected individual"),
            }),
        },
        RiskError::Inference(InferenceError::Impossible(why)) => impossible(Some(why)),
        other => ApiError::invalid(field, other.to_string()),
    }
}

/// Answers every query of one request. Posterior and joint queries share a
/// single propagation; each risk query conditions on a modified history.
pub fn analyze(request: AnalyzeRequest) -> Result<Value, ApiError> {
    let model = resolve_model(request.model.as_ref())?;
    let pedigree = request.pedigree.into_pedigree().map_err(pedigree_error)?;
    let net = Network::new(&pedigree, &model.genetics, &model.disease);
    let prop = net.propagate();
    let posterior = net.posterior_from(&prop);
    if posterior.is_impossible() {
        return Err(impossible(posterior.explanation));
    }
    let summary = net.tree_summary();
    let mut out = serde_json::Map::new();
    out.insert("log_evidence".into(), json!(round_sig(report_log_evidence(posterior.log_evidence))));
    let mut curves = Vec::new();
    let mut joints = Vec::new();
    let mut warnings = Vec::new();
    for (q, query) in request.queries.iter().enumerate() {
        match query {
            Query::Posterior => {
                out.insert("marginals".into(), posterior_json(&posterior)["marginals"].clone());
            }
            Query::Risk { individual, tau, tmax, dt } => {
                if model.death.is_none() && curves.is_empty() {
                    warnings.push(format!("model {:?} has no death hazard; risk_competing is null", model.name));
                }
                let options = RiskOptions {
                    tau: *tau,
                    death: model.death.as_ref(),
                    t_max: tmax.unwrap_or(DEFAULT_T_MAX),
                    delta_t: dt.unwrap_or(DEFAULT_DELTA_T),
                };
                let risk = risk_curve_from_pedigree(&pedigree, individual, &model.genetics, &model.disease, options)
                    .map_err(|e| risk_error(q, e))?;
                curves.push(risk);
            }
            Query::Joint { individuals } => {
                let field = format!("queries[{q}].individuals");
                let ks = individuals
                    .iter()
                    .map(|id| pedigree.index_of(id).ok_or_else(|| ApiError::invalid(&field, format!("unknown individual {id:?}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                let joint = match net.joint_from_clique(&prop, &ks) {
                    Some(j) => j,
                    None => net.joint_posterior(&ks).map_err(|e| ApiError::invalid(&field, e.to_string()))?,
                };
                let genotypes: Vec<String> = (0..joint.probabilities.len())
                    .map(|idx| {
                        (0..ks.len())
                            .map(|pos| ["00", "01", "10", "11"][(idx >> (2 * (ks.len() - 1 - pos))) & 3])
                            .collect::<Vec<_>>()
                            .join(",")
                    })
                    .collect();
                let carrier = joint.carrier_joint(model.genetics.carrier());
                joints.push(json!({
                    "individuals": individuals,
                    "genotypes": genotypes,
                    "probabilities": joint.probabilities.iter().map(|p| round_sig(*p)).collect::<Vec<_>>(),
                    "carrier_probabilities": carrier.iter().map(|p| round_sig(*p)).collect::<Vec<_>>(),
                }));
            }
        }
    }
    if !curves.is_empty() {
        out.insert("curves".into(), risk_json(&curves));
    }
    if !joints.is_empty() {
        out.insert("joints".into(), Value::Array(joints));
    }
    out.insert(
        "tree_stats".into(),
        json!({"cliques": summary.cliques.len(), "treewidth": summary.treewidth, "cost": summary.cost}),
    );
    out.insert("warnings".into(), json!(warnings));
    Ok(Value::Object(out))
}

fn parse_request(body: &[u8]) -> Result<AnalyzeRequest, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::invalid(if path == "." { "body".to_string() } else { path }, e.into_inner().to_string())
    })
}

async fn analyze_handler(body: Bytes) -> Result<Json<Value>, ApiError> {
    let request = parse_request(&body)?;
    let result = tokio::task::spawn_blocking(move || analyze(request))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: json!({"error": "internal", "message": e.to_string()}),
        })??;
    Ok(Json(result))
}

/// Built-in models with their parameters.
pub fn models() -> Value {
    let list: Vec<ModelConfig> = BUILTIN_MODELS
        .iter()
        .map(|name| Model::builtin(name).expect("built-in model").to_config())
        .collect();
    json!(list)
}

async fn models_handler() -> Json<Value> {
    Json(models())
}

pub fn app() -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/v1/analyze", post(analyze_handler))
        .route("/v1/models", get(models_handler))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(cors)
}
