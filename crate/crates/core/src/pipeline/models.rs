use std::sync::Arc;

use crate::model_client::{
    ChatModel, ChatReply, ChatRequest, HttpConfig, HttpTransport, LabelClassifier, NoSleep, RetryingClient,
    ScriptedClassifier, ScriptedTransport,
};
use crate::model_client::BackoffPolicy;
use crate::prompts::Template;

use super::config::{LabelerSpec, ModelSpec, ModelsConfig};
use super::ConfigError;

/// Teacher that changes nothing: L4 prompts get their chunk back inside the
/// cleaned-text tags, L5 prompts get the chunk itself.
#[derive(Debug, Clone)]
pub struct IdentityTeacher {
    l4: Template,
    l5: Template,
}

impl Default for IdentityTeacher {
    fn default() -> Self {
        IdentityTeacher {
            l4: Template::l4_refine(),
            l5: Template::l5_complete(),
        }
    }
}

impl ChatModel for IdentityTeacher {
    fn chat(&self, req: &ChatRequest) -> ChatReply {
        let p = req.prompt();
        if let Some(chunk) = self.l4.extract(p) {
            return ChatReply::stop(format!("<CLEANED_TEXT>{chunk}</CLEANED_TEXT>"));
        }
        if let Some(chunk) = self.l5.extract(p) {
            return ChatReply::stop(chunk);
        }
        ChatReply::failed("identity teacher only answers refinement and completion prompts")
    }
}

pub fn chat_model(spec: &ModelSpec) -> Result<Arc<dyn ChatModel>, ConfigError> {
    Ok(match spec {
        ModelSpec::Identity {} => Arc::new(IdentityTeacher::default()),
        ModelSpec::Scripted { script } => {
            let t = ScriptedTransport::from_file(script).map_err(|e| ConfigError::Model(script.clone(), e.to_string()))?;
            Arc::new(RetryingClient::with_sleeper(t, BackoffPolicy::default(), NoSleep))
        }
        ModelSpec::Http {
            base_url,
            token_env,
            timeout_secs,
            retry,
        } => {
            let t = HttpTransport::new(&HttpConfig {
                base_url: base_url.clone(),
                token_env: token_env.clone(),
                timeout_secs: *timeout_secs,
            });
            Arc::new(RetryingClient::new(t, retry.clone()))
        }
    })
}

pub fn labeler(spec: &LabelerSpec) -> Result<Arc<dyn LabelClassifier>, ConfigError> {
    Ok(match spec {
        LabelerSpec::Uniform { fdc_code } => Arc::new(ScriptedClassifier::uniform(fdc_code)),
        LabelerSpec::Scripted { script } => Arc::new(
            ScriptedClassifier::from_file(script).map_err(|e| ConfigError::Model(script.clone(), e.to_string()))?,
        ),
    })
}

/// Backends named in the config, built once per run.
#[derive(Clone, Default)]
pub struct Models {
    pub teacher: Option<Arc<dyn ChatModel>>,
    pub book_paper: Option<Arc<dyn ChatModel>>,
    pub generator: Option<Arc<dyn ChatModel>>,
    pub judge: Option<Arc<dyn ChatModel>>,
    pub labeler: Option<Arc<dyn LabelClassifier>>,
}

impl Models {
    pub fn build(cfg: &ModelsConfig) -> Result<Self, ConfigError> {
        let chat = |s: &Option<ModelSpec>| s.as_ref().map(chat_model).transpose();
        Ok(Models {
            teacher: chat(&cfg.teacher)?,
            book_paper: chat(&cfg.book_paper)?,
            generator: chat(&cfg.generator)?,
            judge: chat(&cfg.judge)?,
            labeler: cfg.labeler.as_ref().map(labeler).transpose()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_echoes() {
        let t = IdentityTeacher::default();
        let l4 = t.chat(&ChatRequest::user("m", Template::l4_refine().fill("some\ntext ")));
        assert_eq!(l4.content, "<CLEANED_TEXT>some\ntext </CLEANED_TEXT>");
        let l5 = t.chat(&ChatRequest::user("m", Template::l5_complete().fill("chunk")));
        assert_eq!(l5.content, "chunk");
        assert!(t.chat(&ChatRequest::user("m", "hello")).is_error());
    }

    #[test]
    fn missing_script_is_config_error() {
        let spec = ModelSpec::Scripted {
            script: "/nonexistent/script.json".into(),
        };
        assert!(matches!(chat_model(&spec), Err(ConfigError::Model(..))));
    }
}
