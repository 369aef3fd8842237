use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::faq::{faq_fallback, FaqStore, DEFAULT_THETA};
use super::intent::{classify_intent, Intent, IntentRules};
use super::kbqa::{kbqa, AnswerTemplates};
use super::{AnswerPayload, AnswerSource, QaError, Session};
use crate::kg::KnowledgeGraph;
use crate::retrieval::{search, Catalog, Lexicon, ScoreWeights, SearchHit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaConfig {
    pub theta: f64,
    pub default_reply: String,
    /// Length of the ranked list returned for view requests.
    pub top_k: usize,
    pub weights: ScoreWeights,
    pub rules: IntentRules,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            theta: DEFAULT_THETA,
            default_reply: "抱歉，这个问题我还不会回答，可以换个说法试试。".to_string(),
            top_k: 10,
            weights: ScoreWeights::default(),
            rules: IntentRules::default(),
        }
    }
}

impl QaConfig {
    pub fn validate(&self) -> Result<(), QaError> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(QaError::InvalidConfig(format!("theta {} outside [0, 1]", self.theta)));
        }
        if self.default_reply.trim().is_empty() {
            return Err(QaError::InvalidConfig("empty default reply".into()));
        }
        if self.top_k == 0 {
            return Err(QaError::InvalidConfig("top_k must be at least 1".into()));
        }
        self.weights.validate()?;
        Ok(())
    }
}

/// Step taken while handling a query, in call order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Classify,
    Search,
    Kbqa,
    Faq,
}

/// Which branch produced the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Search,
    Kbqa,
    Faq,
    Fallback,
    OutOfScope,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Items { items: Vec<SearchHit> },
    Answer(AnswerPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaResponse {
    pub intent: Intent,
    pub payload: Payload,
    #[serde(skip)]
    pub route: Route,
    #[serde(skip)]
    pub trace: Vec<Stage>,
}

/// Read-only answering state shared by all sessions.
#[derive(Debug)]
pub struct QaEngine {
    pub kg: Arc<KnowledgeGraph>,
    pub semantic: Lexicon,
    pub properties: Lexicon,
    pub catalog: Catalog,
    pub faq: FaqStore,
    pub templates: AnswerTemplates,
    pub config: QaConfig,
}

impl QaEngine {
    pub fn new(
        kg: Arc<KnowledgeGraph>,
        semantic: Lexicon,
        properties: Lexicon,
        faq: FaqStore,
        templates: AnswerTemplates,
        config: QaConfig,
    ) -> Result<Self, QaError> {
        config.validate()?;
        templates.validate()?;
        let catalog = Catalog::from_kg(&kg, &semantic);
        Ok(QaEngine {
            kg,
            semantic,
            properties,
            catalog,
            faq,
            templates,
            config,
        })
    }

    pub fn classify(&self, query: &str, session: &Session) -> Intent {
        classify_intent(query, session, &self.kg, &self.semantic, &self.properties, &self.config.rules)
    }

    pub fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>, QaError> {
        Ok(search(query, &self.catalog, &self.semantic, &self.config.weights, k)?)
    }

    /// Routes one query. A view request with a single hit also selects that
    /// item.
    pub fn handle(&self, query: &str, session: &mut Session) -> Result<QaResponse, QaError> {
        self.handle_with_theta(query, session, self.config.theta)
    }

    pub fn handle_with_theta(&self, query: &str, session: &mut Session, theta: f64) -> Result<QaResponse, QaError> {
        let mut trace = vec![Stage::Classify];
        let intent = self.classify(query, session);
        let (route, payload) = match intent {
            Intent::ViewItem => {
                trace.push(Stage::Search);
                let items = self.search(query, self.config.top_k)?;
                if let [only] = items.as_slice() {
                    session.current_item = Some(only.item.clone());
                }
                session.last_ranked = Some(items.clone());
                (Route::Search, Payload::Items { items })
            }
            Intent::ItemQuestion => {
                let item = session.current_item.as_deref().expect("ItemQuestion implies a current item");
                trace.push(Stage::Kbqa);
                match kbqa(query, item, &self.kg, &self.properties, &self.templates)? {
                    Some(answer) => (Route::Kbqa, Payload::Answer(answer)),
                    None => {
                        trace.push(Stage::Faq);
                        let answer = faq_fallback(query, &self.faq, theta, &self.config.default_reply);
                        let route = match answer.source {
                            AnswerSource::Faq => Route::Faq,
                            _ => Route::Fallback,
                        };
                        (route, Payload::Answer(answer))
                    }
                }
            }
            Intent::OutOfScope => (
                Route::OutOfScope,
                Payload::Answer(AnswerPayload {
                    text: self.config.default_reply.clone(),
                    images: Vec::new(),
                    source: AnswerSource::Fallback,
                }),
            ),
        };
        log::debug!("{query:?} -> {intent:?} via {route:?}");
        Ok(QaResponse {
            intent,
            payload,
            route,
            trace,
        })
    }
}
