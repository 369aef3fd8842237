//! HTTP JSON API over a loaded knowledge graph: query routing, item cards,
//! session item selection, storyboards, search, image bytes and optional
//! cross-modal image matching.

mod config;
mod routes;
mod sessions;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use mkg_core::crossmodal::{load_checkpoint, EmbeddingIndex, Encoders};
use mkg_core::kg::{import_jsonl, run_completion, EntityKind, KnowledgeGraph, IMAGE_PATH_ATTR};
use mkg_core::qa::{AnswerTemplates, EncoderSimilarity, FaqStore, QaEngine};
use mkg_core::retrieval::Lexicon;
use mkg_core::storyboard::StoryTemplates;
use thiserror::Error;

pub use config::{FaqBackend, ServiceConfig};
pub use routes::{router, ApiError, QueryRequest, SelectRequest};
pub use sessions::SessionTable;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
}

impl StartupError {
    fn file(path: &Path, e: impl std::fmt::Display) -> Self {
        StartupError::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

/// Cross-modal model and image index loaded together.
pub struct ImageMatcher {
    pub encoders: Encoders<f32>,
    pub index: EmbeddingIndex<f32>,
}

/// Immutable snapshot shared by all requests, plus the session table.
pub struct AppState {
    pub engine: QaEngine,
    pub story_templates: StoryTemplates,
    /// Image entity id to raster file.
    pub images: BTreeMap<String, PathBuf>,
    pub matcher: Option<ImageMatcher>,
    pub sessions: SessionTable,
}

fn load_kg(path: &Path) -> Result<KnowledgeGraph, StartupError> {
    let mut kg = import_jsonl(path).map_err(|e| StartupError::file(path, e))?;
    let derived = run_completion(&mut kg);
    log::info!(
        "{}: {} entities, {} triples ({derived} derived)",
        path.display(),
        kg.entity_count(),
        kg.triple_count()
    );
    Ok(kg)
}

fn image_files(kg: &KnowledgeGraph, base: &Path) -> Result<BTreeMap<String, PathBuf>, StartupError> {
    let mut out = BTreeMap::new();
    for img in kg.entities_of(EntityKind::Image) {
        let rel = &img.attributes[IMAGE_PATH_ATTR];
        let path = base.join(rel);
        if !path.is_file() {
            return Err(StartupError::file(&path, format!("image {} not found", img.id)));
        }
        out.insert(img.id.clone(), path);
    }
    Ok(out)
}

/// Loads and validates everything the config references. Any failure
/// aborts startup.
pub fn build_state(config: &ServiceConfig) -> Result<AppState, StartupError> {
    config.qa.validate().map_err(|e| StartupError::Config(e.to_string()))?;
    if config.session_ttl_secs == 0 {
        return Err(StartupError::Config("session_ttl_secs must be positive".into()));
    }
    let kg = load_kg(&config.kg)?;
    let images = image_files(&kg, config.kg.parent().unwrap_or(Path::new(".")))?;
    let semantic = Lexicon::load(&config.semantic_lexicon).map_err(|e| StartupError::file(&config.semantic_lexicon, e))?;
    let properties =
        Lexicon::load(&config.property_lexicon).map_err(|e| StartupError::file(&config.property_lexicon, e))?;
    let templates = match &config.answer_templates {
        Some(p) => AnswerTemplates::load(p).map_err(|e| StartupError::file(p, e))?,
        None => AnswerTemplates::default(),
    };
    let story_templates = match &config.story_templates {
        Some(p) => StoryTemplates::load(p).map_err(|e| StartupError::file(p, e))?,
        None => StoryTemplates::default(),
    };
    let encoders: Option<Encoders<f32>> = match &config.checkpoint {
        Some(p) => Some(load_checkpoint(p).map_err(|e| StartupError::file(p, e))?),
        None => None,
    };
    let entries = FaqStore::load_entries(&config.faq).map_err(|e| StartupError::file(&config.faq, e))?;
    let faq = match (config.faq_backend, &encoders) {
        (FaqBackend::Tfidf, _) => FaqStore::new(entries),
        (FaqBackend::Encoder, Some(enc)) => {
            let sim = EncoderSimilarity::new(enc.clone(), &entries);
            FaqStore::with_similarity(entries, Box::new(sim))
        }
        (FaqBackend::Encoder, None) => {
            return Err(StartupError::Config("faq_backend \"encoder\" needs a checkpoint".into()))
        }
    }
    .map_err(|e| StartupError::file(&config.faq, e))?;
    let matcher = match (&config.index, encoders) {
        (Some(p), Some(encoders)) => {
            let index = EmbeddingIndex::load(p).map_err(|e| StartupError::file(p, e))?;
            if index.dim() != encoders.config.d_model {
                return Err(StartupError::file(
                    p,
                    format!("index dim {} != model width {}", index.dim(), encoders.config.d_model),
                ));
            }
            Some(ImageMatcher { encoders, index })
        }
        (Some(_), None) => return Err(StartupError::Config("index needs a checkpoint".into())),
        (None, _) => None,
    };
    let engine = QaEngine::new(Arc::new(kg), semantic, properties, faq, templates, config.qa.clone())
        .map_err(|e| StartupError::Config(e.to_string()))?;
    Ok(AppState {
        engine,
        story_templates,
        images,
        matcher,
        sessions: SessionTable::new(Duration::from_secs(config.session_ttl_secs)),
    })
}

/// Validates the config, binds and serves until the task is cancelled.
pub async fn serve(config: ServiceConfig) -> Result<(), StartupError> {
    let state = Arc::new(build_state(&config)?);
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(|e| StartupError::Config(format!("bind {}: {e}", config.listen)))?;
    log::info!("listening on {}", config.listen);
    axum::serve(listener, router(state))
        .await
        .map_err(|e| StartupError::Config(e.to_string()))
}
