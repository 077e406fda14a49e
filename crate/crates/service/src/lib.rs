//! Read-only HTTP JSON API over a trained model directory.
//!
//! Endpoints: `GET /health`, `POST /candidates`, `POST /score`,
//! `POST /embedding`. Every error body is `{code, message, field?}`.

pub mod api;
mod error;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use mixgen_core::analyze::{self, filter_dominating, AnalyzeError, DominanceQuery, ScoredMix};
use mixgen_core::cvae::{batch_generate, SamplerSpec, UnitInterval};
use mixgen_core::data::{compute_impacts, AgeGroup, DataError, Feature, MixComposition};
use mixgen_core::{ModelBundle, Target};
use rayon::prelude::*;
use serde::de::DeserializeOwned;

use api::*;
pub use error::{ApiError, ErrorBody};

/// A loaded bundle plus the training rows scored the same way as candidates.
#[derive(Debug)]
pub struct ServiceModel {
    pub bundle: ModelBundle,
    training: Vec<ScoredMix>,
}

impl ServiceModel {
    pub fn new(bundle: ModelBundle) -> Self {
        let training = bundle
            .dataset
            .rows
            .iter()
            .map(|r| ScoredMix { mix: r.mix, age_group: r.age_group(), strength: r.strength, impacts: r.impacts })
            .collect();
        Self { bundle, training }
    }

    pub fn load(dir: &std::path::Path) -> Result<Self, mixgen_core::BundleError> {
        ModelBundle::load(dir).map(Self::new)
    }
}

/// Shared handler state. The model slot is filled once; until then every
/// model-backed endpoint answers 503.
#[derive(Clone, Debug, Default)]
pub struct AppState {
    model: Arc<OnceLock<Arc<ServiceModel>>>,
}

impl AppState {
    pub fn pending() -> Self {
        Self::default()
    }

    pub fn loaded(model: ServiceModel) -> Self {
        let s = Self::default();
        s.install(model);
        s
    }

    /// Returns false when a model was already installed.
    pub fn install(&self, model: ServiceModel) -> bool {
        self.model.set(Arc::new(model)).is_ok()
    }

    fn model(&self) -> Result<Arc<ServiceModel>, ApiError> {
        self.model.get().cloned().ok_or_else(ApiError::not_loaded)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/candidates", post(candidates))
        .route("/score", post(score))
        .route("/embedding", post(embedding))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this endpoint")
        })
        .with_state(state)
}

/// Binds `addr`, loads the model directory in the background and serves
/// until the process receives Ctrl-C or loading fails.
pub async fn run(addr: SocketAddr, model_dir: PathBuf) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(ServeError::Bind)?;
    log::info!("listening on {}", listener.local_addr().map_err(ServeError::Bind)?);
    let state = AppState::pending();
    let loader = {
        let state = state.clone();
        tokio::task::spawn_blocking(move || -> Result<(), ServeError> {
            let model = ServiceModel::load(&model_dir).map_err(|e| ServeError::Load(e.to_string()))?;
            log::info!("model loaded from {}", model_dir.display());
            state.install(model);
            Ok(())
        })
    };
    let server = axum::serve(listener, router(state)).with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    });
    tokio::select! {
        r = server => r.map_err(ServeError::Bind),
        r = loader => match r {
            Ok(Ok(())) => std::future::pending().await,
            Ok(Err(e)) => Err(e),
            Err(e) => Err(ServeError::Load(e.to_string())),
        },
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("server: {0}")]
    Bind(std::io::Error),
    #[error("model load failed: {0}")]
    Load(String),
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

async fn health(State(state): State<AppState>) -> Result<Json<HealthResponse>, ApiError> {
    let model = state.model()?;
    let m = &model.bundle.metadata;
    Ok(Json(HealthResponse {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
        model: ModelInfo {
            format: m.format.clone(),
            tool_version: m.tool_version.clone(),
            seed: m.seed,
            dataset_sha256: m.dataset_sha256.clone(),
            coefficients_sha256: m.coefficients_sha256.clone(),
            dataset_rows: m.dataset_rows,
        },
    }))
}

fn check_mix(mix: &MixComposition, field: &str) -> Result<(), ApiError> {
    match mix.validate() {
        Err(DataError::InvalidMass { ingredient, value }) => {
            Err(ApiError::invalid(format!("{field}.{ingredient}"), format!("mass must be finite and >= 0, found {value}")))
        }
        Err(e) => Err(ApiError::invalid(field, e.to_string())),
        Ok(()) if mix.total_mass() == 0.0 => Err(ApiError::invalid(field, "mix has no mass")),
        Ok(()) => Ok(()),
    }
}

fn check_design(req: &DesignRequest) -> Result<(), ApiError> {
    if !(1..=MAX_COUNT).contains(&req.count) {
        return Err(ApiError::invalid("count", format!("count must be in 1..={MAX_COUNT}")));
    }
    if !(req.strength.is_finite() && req.strength > 0.0) {
        return Err(ApiError::invalid("strength", "strength must be a positive number of MPa"));
    }
    if !(req.superplasticizer_scale.is_finite() && req.superplasticizer_scale >= 0.0) {
        return Err(ApiError::invalid("superplasticizer_scale", "scale must be finite and >= 0"));
    }
    for (name, c) in [("gwp", req.ceilings.gwp), ("ap", req.ceilings.ap), ("cbw", req.ceilings.cbw)] {
        if c.is_some_and(|v| !v.is_finite()) {
            return Err(ApiError::invalid(format!("ceilings.{name}"), "ceiling must be finite"));
        }
    }
    if req.limit == 0 || req.limit > MAX_PAGE {
        return Err(ApiError::invalid("limit", format!("limit must be in 1..={MAX_PAGE}")));
    }
    Ok(())
}

async fn candidates(State(state): State<AppState>, body: Bytes) -> Result<Json<CandidatesResponse>, ApiError> {
    let req: DesignRequest = parse(&body)?;
    check_design(&req)?;
    let model = state.model()?;
    blocking(move || design(&model, &req).map(Json)).await
}

/// Generates `count` samples with the strength condition pinned at the
/// target, scores them, and keeps those in the band and under the ceilings.
pub fn design(model: &ServiceModel, req: &DesignRequest) -> Result<CandidatesResponse, ApiError> {
    let bundle = &model.bundle;
    let group = req.age_group;
    let (t, condition_clamped) = bundle.metadata.stats.normalize_value(Feature::Strength, req.strength);
    let sampler = SamplerSpec { strength: UnitInterval::fixed(t), ..SamplerSpec::default() };
    let samples = batch_generate(&bundle.cvae, req.count, group, &sampler, req.seed)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let strength_model = bundle
        .predictors
        .get(Target::Strength(group))
        .ok_or_else(|| ApiError::internal(format!("no strength predictor for {group}")))?;

    let scored: Vec<(ScoredMix, bool)> = samples
        .par_iter()
        .map(|s| {
            let mix = s.mix.with_superplasticizer_scale(req.superplasticizer_scale);
            let p = strength_model.predict(&mix);
            let impacts = compute_impacts(&mix, &bundle.coefficients);
            (ScoredMix { mix, age_group: group, strength: p.value, impacts }, p.out_of_domain)
        })
        .collect();

    let query = DominanceQuery { age_group: group, strength_center: req.strength, strength_tolerance: STRENGTH_TOLERANCE };
    let under = |v: f64, c: Option<f64>| c.is_none_or(|c| v <= c);
    let mut in_band_count = 0;
    let mut kept: Vec<usize> = Vec::new();
    for (i, (s, _)) in scored.iter().enumerate() {
        if !query.contains(s.strength) {
            continue;
        }
        in_band_count += 1;
        let c = &req.ceilings;
        if under(s.impacts.gwp, c.gwp) && under(s.impacts.ap, c.ap) && under(s.impacts.cbw, c.cbw) {
            kept.push(i);
        }
    }
    let kept_mixes: Vec<ScoredMix> = kept.iter().map(|&i| scored[i].0).collect();

    let mut dominating = vec![false; kept.len()];
    let (reference_count, best_reference, reduction_pct) = match filter_dominating(&kept_mixes, &model.training, &query) {
        Ok((idx, report)) => {
            for &i in &idx {
                dominating[i] = true;
            }
            let reduction = (report.count > 0).then_some(report.reduction_pct);
            (report.reference_count, Some(report.best_reference), reduction)
        }
        Err(AnalyzeError::NoReferenceBand { .. }) => (0, None, None),
        Err(e) => return Err(ApiError::internal(e.to_string())),
    };

    let lowest = |f: fn(&ScoredMix) -> f64| kept_mixes.iter().map(f).min_by(f64::total_cmp);
    let best = BestImpacts {
        gwp: lowest(|s| s.impacts.gwp),
        ap: lowest(|s| s.impacts.ap),
        cbw: lowest(|s| s.impacts.cbw),
    };

    let page: Vec<CandidateMix> = kept
        .iter()
        .enumerate()
        .skip(req.offset)
        .take(req.limit)
        .map(|(j, &i)| {
            let (s, out_of_domain) = &scored[i];
            CandidateMix {
                index: i,
                mix: s.mix,
                predicted_strength: s.strength,
                impacts: s.impacts,
                dominates_training: dominating[j],
                marker_fractions: s.mix.cementitious_fractions(),
                out_of_domain: *out_of_domain,
            }
        })
        .collect();
    let (lo, hi) = query.band();
    Ok(CandidatesResponse {
        age_group: group,
        seed: req.seed,
        units: UNITS,
        summary: CandidateSummary {
            raw_count: samples.len(),
            in_band_count,
            filtered_count: kept.len(),
            dominating_count: dominating.iter().filter(|&&d| d).count(),
            strength_band: [lo, hi],
            condition_clamped,
            reference_count,
            best_reference,
            reduction_pct,
            best,
            offset: req.offset,
            limit: req.limit,
            returned: page.len(),
        },
        candidates: page,
    })
}

async fn score(State(state): State<AppState>, body: Bytes) -> Result<Json<ScoreResponse>, ApiError> {
    let req: ScoreRequest = parse(&body)?;
    check_mix(&req.mix, "mix")?;
    let model = state.model()?;
    score_mix(&model, req.age_group, &req.mix).map(Json)
}

/// Predicted strength for the group and impacts from the coefficient table.
pub fn score_mix(model: &ServiceModel, group: AgeGroup, mix: &MixComposition) -> Result<ScoreResponse, ApiError> {
    let bundle = &model.bundle;
    let p = bundle
        .predictors
        .get(Target::Strength(group))
        .ok_or_else(|| ApiError::internal(format!("no strength predictor for {group}")))?
        .predict(mix);
    Ok(ScoreResponse {
        age_group: group,
        units: UNITS,
        predicted_strength: p.value,
        impacts: compute_impacts(mix, &bundle.coefficients),
        marker_fractions: mix.cementitious_fractions(),
        out_of_domain: p.out_of_domain,
    })
}

async fn embedding(body: Bytes) -> Result<Json<EmbeddingResponse>, ApiError> {
    let req: EmbeddingRequest = parse(&body)?;
    if req.k == 0 {
        return Err(ApiError::invalid("k", "k must be >= 1"));
    }
    if req.mixes.len() < req.k + 1 {
        return Err(ApiError::invalid(
            "mixes",
            format!("need at least k + 1 = {} mixes, found {}", req.k + 1, req.mixes.len()),
        ));
    }
    if req.mixes.len() > MAX_EMBEDDING_MIXES {
        return Err(ApiError::invalid("mixes", format!("at most {MAX_EMBEDDING_MIXES} mixes per request")));
    }
    for (i, m) in req.mixes.iter().enumerate() {
        check_mix(m, &format!("mixes[{i}]"))?;
    }
    blocking(move || {
        analyze::isomap(&req.mixes, req.k).map(Json).map_err(|e| match e {
            AnalyzeError::Disconnected { sizes } => {
                let mut err = ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "disconnected_graph",
                    format!("neighborhood graph with k = {} has {} components; increase k", req.k, sizes.len()),
                );
                err.body.component_sizes = Some(sizes);
                err
            }
            AnalyzeError::NoPositiveEigenvalue => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "degenerate_embedding", e.to_string())
            }
            other => ApiError::invalid("mixes", other.to_string()),
        })
    })
    .await
}
