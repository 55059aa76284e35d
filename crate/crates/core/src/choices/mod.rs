//! Choice extraction: filter, clean, rank, contextualize and describe the
//! actionable elements of a page.

mod preprocess;

use std::collections::HashMap;

use serde_json::{json, Map, Value};

pub use preprocess::{preprocess_html, truncate_chars};

use crate::domain::{ActionableElement, NavConfig, NextStep, TextBlock};
use crate::embeddings::{cosine_similarity, EmbedError, Embedder};
use crate::llm::prompts::{self, PromptTemplate};
use crate::llm::{CompletionRequest, ExpectedShape, Gateway, LlmError, Tier};

pub const INTERACTIVE_TAGS: &[&str] = &["a", "button", "input", "select", "textarea"];

/// An element is actionable when its tag is interactive, it carries an
/// inline `on*` handler, or a listener probe flagged it.
pub fn is_actionable<'a>(tag: &str, attr_names: impl IntoIterator<Item = &'a str>, has_listener: bool) -> bool {
    let tag = tag.to_ascii_lowercase();
    INTERACTIVE_TAGS.contains(&tag.as_str())
        || has_listener
        || attr_names
            .into_iter()
            .any(|a| a.len() > 2 && a.get(..2).is_some_and(|p| p.eq_ignore_ascii_case("on")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedChoices {
    pub items: Vec<ActionableElement>,
    /// The ranking key.
    pub next_step: NextStep,
}

impl RankedChoices {
    pub fn empty(next_step: NextStep) -> Self {
        RankedChoices {
            items: Vec::new(),
            next_step,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains_xpath(&self, xpath: &str) -> bool {
        self.items.iter().any(|e| e.xpath == xpath)
    }

    /// `{"<ordinal>": {"outerHTML": ..., "neighbours": [...]}}` for the given items.
    pub fn context_json(items: &[ActionableElement]) -> Value {
        let mut m = Map::new();
        for e in items {
            m.insert(
                e.ordinal.to_string(),
                json!({ "outerHTML": e.cleaned_html, "neighbours": e.neighbour_texts }),
            );
        }
        Value::Object(m)
    }

    pub fn to_context_json(&self) -> Value {
        Self::context_json(&self.items)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ChoicesError {
    #[error("cannot rank against the Done sentinel")]
    DoneKey,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Fills `cleaned_html` from `outer_html`.
pub fn prepare(elements: &[ActionableElement], limit: usize) -> Vec<ActionableElement> {
    elements
        .iter()
        .map(|e| ActionableElement {
            cleaned_html: preprocess_html(&e.outer_html, limit),
            ..e.clone()
        })
        .collect()
}

/// Text embedded for an element: inner text, or cleaned HTML when empty.
pub fn key_text(e: &ActionableElement) -> &str {
    if e.inner_text.trim().is_empty() {
        &e.cleaned_html
    } else {
        &e.inner_text
    }
}

/// Scores elements against the next step, halves previously selected ones,
/// sorts descending (document order breaks ties) and keeps `top_k`.
///
/// Input ordinals are taken as document positions; output ordinals are rank
/// positions.
pub fn score_choices(
    elements: &[ActionableElement],
    next_step: &NextStep,
    selection_counts: &HashMap<String, u32>,
    embedder: &dyn Embedder,
    config: &NavConfig,
) -> Result<RankedChoices, ChoicesError> {
    let key = next_step.sentence().ok_or(ChoicesError::DoneKey)?;
    let key_vec = embedder.embed(key)?;
    let mut scored = Vec::with_capacity(elements.len());
    for e in elements {
        let raw = cosine_similarity(&embedder.embed(key_text(e))?, &key_vec)?;
        let mut score = raw.clamp(0.0, 1.0);
        let count = selection_counts.get(&e.xpath).copied().unwrap_or(0);
        if count >= 1 {
            score *= config.penalty_factor;
        }
        scored.push(ActionableElement {
            score,
            previously_selected_count: count,
            ..e.clone()
        });
    }
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.ordinal.cmp(&b.ordinal)));
    scored.truncate(config.top_k);
    for (i, e) in scored.iter_mut().enumerate() {
        e.ordinal = i;
    }
    Ok(RankedChoices {
        items: scored,
        next_step: next_step.clone(),
    })
}

/// Inner texts of up to `count` nearest text blocks (bbox-centre distance
/// within `threshold`), excluding the element and its descendants.
pub fn nearest_neighbours(
    element: &ActionableElement,
    blocks: &[TextBlock],
    count: usize,
    threshold: f64,
) -> Vec<String> {
    let own_prefix = format!("{}/", element.xpath);
    let mut near: Vec<(f64, usize)> = blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.xpath != element.xpath && !b.xpath.starts_with(&own_prefix))
        .filter(|(_, b)| !b.text.trim().is_empty())
        .map(|(i, b)| (element.bbox.center_distance(&b.bbox), i))
        .filter(|(d, _)| *d <= threshold)
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    near.into_iter()
        .take(count)
        .map(|(_, i)| blocks[i].text.clone())
        .collect()
}

/// Attaches neighbour texts; select elements also get their option labels
/// appended to `cleaned_html`.
pub fn attach_neighbors(
    element: &ActionableElement,
    blocks: &[TextBlock],
    count: usize,
    threshold: f64,
) -> ActionableElement {
    let mut e = element.clone();
    e.neighbour_texts = nearest_neighbours(element, blocks, count, threshold);
    if let Some(opts) = &e.select_options {
        let listed: Vec<String> = opts.iter().enumerate().map(|(i, o)| format!("{i}: {o}")).collect();
        e.cleaned_html.push_str(&format!(" [options: {}]", listed.join(", ")));
    }
    e
}

pub fn attach_all_neighbors(ranked: &RankedChoices, blocks: &[TextBlock], config: &NavConfig) -> RankedChoices {
    RankedChoices {
        items: ranked
            .items
            .iter()
            .map(|e| attach_neighbors(e, blocks, config.neighbor_count, config.neighbor_threshold))
            .collect(),
        next_step: ranked.next_step.clone(),
    }
}

fn describe_batch(
    gateway: &Gateway,
    template: &PromptTemplate,
    batch: &[ActionableElement],
    temperature: f64,
) -> Result<Vec<String>, LlmError> {
    let elements = serde_json::to_string_pretty(&RankedChoices::context_json(batch)).expect("json");
    let user = template
        .render("user", &[("elements", &elements)])
        .map_err(LlmError::InvalidRequest)?;
    let req = CompletionRequest::new(Tier::Cheap, template.system(), ExpectedShape::JsonObject)
        .temperature(temperature)
        .text(user);
    let keys: Vec<String> = batch.iter().map(|e| e.ordinal.to_string()).collect();
    let (_, descriptions) = gateway.complete_json_with(&req, |v| {
        keys.iter()
            .map(|k| {
                v.get(k)
                    .and_then(Value::as_str)
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| format!("missing description for element {k}"))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(descriptions)
}

/// One-sentence functional descriptions, requested in batches of
/// `batch_size` in rank order. A batch that stays malformed falls back to
/// element texts. With descriptions disabled no model call is made.
pub fn describe_choices(ranked: &RankedChoices, gateway: &Gateway, config: &NavConfig) -> Result<RankedChoices, LlmError> {
    let mut items = ranked.items.clone();
    if !config.enable_descriptions {
        for e in &mut items {
            e.description = Some(e.fallback_text());
        }
        return Ok(RankedChoices {
            items,
            next_step: ranked.next_step.clone(),
        });
    }
    let template = PromptTemplate::bundled(prompts::DESCRIBE_ELEMENTS);
    let batches: Vec<&[ActionableElement]> = ranked.items.chunks(config.batch_size).collect();
    let results: Vec<Result<Vec<String>, LlmError>> = if config.parallel_descriptions {
        std::thread::scope(|s| {
            let handles: Vec<_> = batches
                .iter()
                .map(|b| s.spawn(|| describe_batch(gateway, &template, b, config.temperature)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("description worker panicked"))
                .collect()
        })
    } else {
        batches
            .iter()
            .map(|b| describe_batch(gateway, &template, b, config.temperature))
            .collect()
    };
    for ((chunk, result), batch) in items.chunks_mut(config.batch_size).zip(results).zip(&batches) {
        match result {
            Ok(descs) => {
                for (e, d) in chunk.iter_mut().zip(descs) {
                    e.description = Some(d);
                }
            }
            Err(LlmError::MalformedOutput(m)) => {
                log::warn!(
                    "description batch starting at {} fell back to element texts: {m}",
                    batch.first().map_or(0, |e| e.ordinal)
                );
                for e in chunk.iter_mut() {
                    e.description = Some(e.fallback_text());
                }
            }
            Err(other) => return Err(other),
        }
    }
    Ok(RankedChoices {
        items,
        next_step: ranked.next_step.clone(),
    })
}
