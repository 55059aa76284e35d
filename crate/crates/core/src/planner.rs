//! Action planning: functionality concretization via retrieved reference
//! pairs, webpage context generation and next-step prediction.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::domain::{render_history, HistoryEntry, NextStep, Screenshot, WebpageContext};
use crate::embeddings::{cosine_similarity, EmbedError, Embedder, EmbeddingVector};
use crate::fsutil;
use crate::llm::prompts::{self, PromptTemplate};
use crate::llm::{CompletionRequest, ExpectedShape, Gateway, LlmError, Tier};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("reference database is empty")]
    EmptyDb,
    #[error("reference database was built with {db}, current embedder is {current}")]
    EmbedderMismatch { db: String, current: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("reference database i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub concrete: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(rename = "embedding")]
    pub abstract_embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDb {
    pub embedder_id: String,
    pub entries: Vec<ReferenceEntry>,
}

impl ReferenceDb {
    pub fn new(embedder_id: impl Into<String>) -> Self {
        ReferenceDb {
            embedder_id: embedder_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PlannerError> {
        let bytes = std::fs::read(path).map_err(|e| PlannerError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| PlannerError::Io(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), PlannerError> {
        let mut s = serde_json::to_string_pretty(self).expect("reference db serializes");
        s.push('\n');
        fsutil::write_atomic(path, s.as_bytes()).map_err(|e| PlannerError::Io(format!("{}: {e}", path.display())))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn one_sentence(raw: &str) -> Result<String, String> {
    let t = raw.trim().trim_matches('"').trim();
    if t.is_empty() {
        Err("empty response".into())
    } else {
        Ok(t.to_string())
    }
}

/// Rewrites a concrete task as a parameter-free functionality (strong tier).
pub fn abstract_functionality(gateway: &Gateway, concrete: &str, temperature: f64) -> Result<String, LlmError> {
    let t = PromptTemplate::bundled(prompts::ABSTRACT_TASK);
    let user = t.render("user", &[("task", concrete)]).map_err(LlmError::InvalidRequest)?;
    let req = CompletionRequest::new(Tier::Strong, t.system(), ExpectedShape::FreeText)
        .temperature(temperature)
        .text(user);
    gateway.complete_text_with(&req, one_sentence)
}

/// Abstracts and embeds every task. With a checkpoint path, progress is
/// saved after each entry and a compatible checkpoint is resumed.
pub fn build_reference_db(
    concrete_tasks: &[String],
    gateway: &Gateway,
    embedder: &dyn Embedder,
    temperature: f64,
    checkpoint: Option<&Path>,
) -> Result<ReferenceDb, PlannerError> {
    let mut db = ReferenceDb::new(embedder.id());
    if let Some(cp) = checkpoint.filter(|p| p.is_file()) {
        let saved = ReferenceDb::load(cp)?;
        let compatible = saved.embedder_id == db.embedder_id
            && saved.entries.len() <= concrete_tasks.len()
            && saved.entries.iter().zip(concrete_tasks).all(|(e, t)| &e.concrete == t);
        if compatible {
            log::info!("resuming reference db from {} entries", saved.len());
            db = saved;
        } else {
            log::warn!("ignoring incompatible checkpoint {}", cp.display());
        }
    }
    for task in &concrete_tasks[db.entries.len()..] {
        let abstract_text = abstract_functionality(gateway, task, temperature)?;
        let abstract_embedding = embedder.embed(&abstract_text)?;
        db.entries.push(ReferenceEntry {
            concrete: task.clone(),
            abstract_text,
            abstract_embedding,
        });
        if let Some(cp) = checkpoint {
            db.save(cp)?;
        }
    }
    Ok(db)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved {
    pub entry: ReferenceEntry,
    pub similarity: f64,
}

/// The `k` entries most similar to `functionality`, best first; ties keep
/// insertion order.
pub fn retrieve_similar(
    functionality: &str,
    db: &ReferenceDb,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<Vec<Retrieved>, PlannerError> {
    if db.is_empty() {
        return Err(PlannerError::EmptyDb);
    }
    if db.embedder_id != embedder.id() {
        return Err(PlannerError::EmbedderMismatch {
            db: db.embedder_id.clone(),
            current: embedder.id(),
        });
    }
    let q = embedder.embed(functionality)?;
    let mut scored = db
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| Ok((cosine_similarity(&q, &e.abstract_embedding)?, i)))
        .collect::<Result<Vec<_>, EmbedError>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(similarity, i)| Retrieved {
            entry: db.entries[i].clone(),
            similarity,
        })
        .collect())
}

/// Turns a functionality into one concrete task, with the retrieved pairs
/// supplied as reference material (strong tier).
pub fn concretize(
    gateway: &Gateway,
    website: &str,
    functionality: &str,
    retrieved: &[Retrieved],
    temperature: f64,
) -> Result<String, PlannerError> {
    if retrieved.is_empty() {
        return Err(PlannerError::Precondition("concretization needs at least one reference pair".into()));
    }
    let references = retrieved
        .iter()
        .map(|r| format!("- abstract: {}\n  concrete: {}", r.entry.abstract_text, r.entry.concrete))
        .collect::<Vec<_>>()
        .join("\n");
    let t = PromptTemplate::bundled(prompts::CONCRETIZE);
    let website = if website.trim().is_empty() { "(unnamed)" } else { website };
    let user = t
        .render(
            "user",
            &[("website", website), ("functionality", functionality), ("references", &references)],
        )
        .map_err(LlmError::InvalidRequest)?;
    let req = CompletionRequest::new(Tier::Strong, t.system(), ExpectedShape::FreeText)
        .temperature(temperature)
        .text(user);
    Ok(gateway.complete_text_with(&req, one_sentence)?)
}

fn parse_context(v: &Value) -> Result<WebpageContext, String> {
    let context = v
        .get("context")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or("missing \"context\" string")?;
    let subs = v
        .get("sub_functionalities")
        .and_then(Value::as_array)
        .ok_or("missing \"sub_functionalities\" list")?;
    let sub_functionalities = subs
        .iter()
        .map(|s| s.as_str().map(|s| s.trim().to_string()).ok_or("non-string sub-functionality"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WebpageContext {
        context: context.to_string(),
        sub_functionalities,
    })
}

/// Abstract description of the current page (strong tier, JSON object).
/// The first page of a run passes neither a previous context nor a leading
/// action, and the request then carries neither section.
pub fn generate_context(
    gateway: &Gateway,
    meta_description: &str,
    previous_context: Option<&WebpageContext>,
    leading_action: Option<&HistoryEntry>,
    screenshot: &Screenshot,
    temperature: f64,
) -> Result<WebpageContext, LlmError> {
    let t = PromptTemplate::bundled(prompts::WEBPAGE_CONTEXT);
    let meta = if meta_description.trim().is_empty() {
        "(none)"
    } else {
        meta_description
    };
    let render = |section: &str, vars: &[(&str, &str)]| t.render(section, vars).map_err(LlmError::InvalidRequest);
    let mut req = CompletionRequest::new(Tier::Strong, t.system(), ExpectedShape::JsonObject)
        .temperature(temperature)
        .text(render("user", &[("meta_description", meta)])?);
    if let Some(prev) = previous_context {
        req = req.text(render("previous_context", &[("previous_context", &prev.context)])?);
    }
    if let Some(h) = leading_action {
        req = req.text(render("leading_action", &[("leading_action", &h.summary())])?);
    }
    req = req.text(render("screenshot", &[])?).image_png(screenshot.png.clone());
    Ok(gateway.complete_json_with(&req, parse_context)?.1)
}

/// `Done` iff the response, stripped of surrounding whitespace and
/// punctuation, is "done" in any case.
pub fn parse_next_step(raw: &str) -> Result<NextStep, String> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err("empty next step".into());
    }
    let core = trimmed.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    if core.eq_ignore_ascii_case("done") {
        Ok(NextStep::Done)
    } else {
        Ok(NextStep::Step(trimmed.to_string()))
    }
}

pub fn predict_next_step(
    gateway: &Gateway,
    task: &str,
    history: &[HistoryEntry],
    context: &WebpageContext,
    temperature: f64,
) -> Result<NextStep, LlmError> {
    let t = PromptTemplate::bundled(prompts::NEXT_STEP);
    let subs = if context.sub_functionalities.is_empty() {
        "(none)".to_string()
    } else {
        context
            .sub_functionalities
            .iter()
            .map(|s| format!("- {s}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let user = t
        .render(
            "user",
            &[
                ("task", task),
                ("history", &render_history(history)),
                ("context", &context.context),
                ("sub_functionalities", &subs),
            ],
        )
        .map_err(LlmError::InvalidRequest)?;
    let req = CompletionRequest::new(Tier::Strong, t.system(), ExpectedShape::FreeText)
        .temperature(temperature)
        .text(user);
    gateway.complete_text_with(&req, parse_next_step)
}
