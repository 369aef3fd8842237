use std::path::{Path, PathBuf};

use mkg_core::qa::QaConfig;
use serde::{Deserialize, Serialize};

use crate::StartupError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaqBackend {
    #[default]
    Tfidf,
    /// Cosine of text-encoder CLS vectors; needs `checkpoint`.
    Encoder,
}

/// Relative paths resolve against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    pub kg: PathBuf,
    pub semantic_lexicon: PathBuf,
    pub property_lexicon: PathBuf,
    pub faq: PathBuf,
    #[serde(default)]
    pub answer_templates: Option<PathBuf>,
    #[serde(default)]
    pub story_templates: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub index: Option<PathBuf>,
    #[serde(default)]
    pub faq_backend: FaqBackend,
    #[serde(default = "default_ttl")]
    pub session_ttl_secs: u64,
    #[serde(default)]
    pub qa: QaConfig,
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

fn default_ttl() -> u64 {
    30 * 60
}

impl ServiceConfig {
    /// Reads a config file and makes its paths absolute.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StartupError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| StartupError::file(path, e))?;
        let mut config: ServiceConfig =
            serde_json::from_str(&text).map_err(|e| StartupError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        Ok(config)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.kg);
        fix(&mut self.semantic_lexicon);
        fix(&mut self.property_lexicon);
        fix(&mut self.faq);
        for p in [
            &mut self.answer_templates,
            &mut self.story_templates,
            &mut self.checkpoint,
            &mut self.index,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }
}
