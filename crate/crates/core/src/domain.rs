//! Core data model shared by the planning, extraction and decision phases.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("illegal action: {0}")]
    IllegalActionType(String),
    #[error("action targets {action_xpath} but element is {element_xpath}")]
    XpathMismatch {
        action_xpath: String,
        element_xpath: String,
    },
    #[error("invalid value: {0}")]
    Invalid(String),
}

/// Whether a task names concrete parameters or only an abstract functionality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Concrete,
    Functionality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    #[serde(default)]
    pub website_name: String,
    pub start_url: String,
    pub description: String,
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_length: Option<u32>,
    /// Parameter literals of a concrete task, used by the abstraction leakage guard.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<String>,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.description.trim().is_empty() {
            return Err(DomainError::Invalid(format!(
                "task {} has an empty description",
                self.id
            )));
        }
        if self.reference_length == Some(0) {
            return Err(DomainError::Invalid(format!(
                "task {} has reference_length 0",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionType {
    Click,
    Type,
    Select,
}

impl ActionType {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionType::Click => "click",
            ActionType::Type => "type",
            ActionType::Select => "select",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "click" => Some(ActionType::Click),
            "type" => Some(ActionType::Type),
            "select" => Some(ActionType::Select),
            _ => None,
        }
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Payload of a `type` (text) or `select` (option index) action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionInput {
    Index(u32),
    Text(String),
}

impl fmt::Display for ActionInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionInput::Index(i) => write!(f, "{i}"),
            ActionInput::Text(t) => f.write_str(t),
        }
    }
}

/// One executable step: target element, action type and optional input.
///
/// Serializes to the persisted trajectory record shape
/// `{element, xpath, action, input?}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Action {
    #[serde(rename = "element")]
    pub element_outer_html: String,
    #[serde(rename = "xpath")]
    pub element_xpath: String,
    #[serde(rename = "action")]
    pub action_type: ActionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<ActionInput>,
}

impl Action {
    pub fn click(xpath: impl Into<String>, outer_html: impl Into<String>) -> Self {
        Action {
            element_outer_html: outer_html.into(),
            element_xpath: xpath.into(),
            action_type: ActionType::Click,
            input: None,
        }
    }

    /// Checks that the payload matches the action type.
    pub fn check_shape(&self) -> Result<(), DomainError> {
        match (self.action_type, &self.input) {
            (ActionType::Click, None) => Ok(()),
            (ActionType::Click, Some(_)) => Err(DomainError::IllegalActionType(
                "click carries no input".into(),
            )),
            (ActionType::Type, Some(ActionInput::Text(_))) => Ok(()),
            (ActionType::Type, _) => Err(DomainError::IllegalActionType(
                "type requires a text input".into(),
            )),
            (ActionType::Select, Some(ActionInput::Index(_))) => Ok(()),
            (ActionType::Select, _) => Err(DomainError::IllegalActionType(
                "select requires an option index".into(),
            )),
        }
    }
}

/// Axis-aligned box in CSS pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        BBox {
            x,
            y,
            width,
            height,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn center_distance(&self, other: &BBox) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        (ax - bx).hypot(ay - by)
    }

    /// True when the box overlaps the `[0, width) x [0, height)` viewport.
    pub fn intersects_viewport(&self, width: u32, height: u32) -> bool {
        self.width > 0.0
            && self.height > 0.0
            && self.x < width as f64
            && self.y < height as f64
            && self.x + self.width > 0.0
            && self.y + self.height > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionableElement {
    pub ordinal: usize,
    pub tag_name: String,
    pub outer_html: String,
    pub cleaned_html: String,
    #[serde(default)]
    pub inner_text: String,
    pub xpath: String,
    pub bbox: BBox,
    #[serde(default)]
    pub neighbour_texts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select_options: Option<Vec<String>>,
    /// `type` attribute for inputs, lowercased.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_type: Option<String>,
    #[serde(default)]
    pub content_editable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub score: f64,
    #[serde(default)]
    pub previously_selected_count: u32,
}

const TEXT_INPUT_TYPES: &[&str] = &[
    "text", "search", "email", "password", "number", "tel", "url", "date", "time",
    "datetime-local", "month", "week",
];

impl ActionableElement {
    /// Accepts keyboard text: text-like inputs, textareas, contenteditable hosts.
    pub fn accepts_text(&self) -> bool {
        match self.tag_name.as_str() {
            "textarea" => true,
            "input" => {
                let ty = self.input_type.as_deref().unwrap_or("text");
                TEXT_INPUT_TYPES.contains(&ty)
            }
            _ => self.content_editable,
        }
    }

    pub fn is_select(&self) -> bool {
        self.tag_name == "select"
    }

    pub fn option_count(&self) -> usize {
        self.select_options.as_ref().map_or(0, Vec::len)
    }

    /// Text used when no generated description is available.
    pub fn fallback_text(&self) -> String {
        if !self.inner_text.trim().is_empty() {
            self.inner_text.trim().to_string()
        } else {
            self.cleaned_html.chars().take(200).collect()
        }
    }

    pub fn label(&self) -> String {
        self.description
            .clone()
            .unwrap_or_else(|| self.fallback_text())
    }

    pub fn check(&self, neighbor_count: usize) -> Result<(), DomainError> {
        if self.xpath.is_empty() {
            return Err(DomainError::Invalid("element with empty xpath".into()));
        }
        if self.bbox.width < 0.0 || self.bbox.height < 0.0 {
            return Err(DomainError::Invalid(format!(
                "negative bbox on {}",
                self.xpath
            )));
        }
        if self.neighbour_texts.len() > neighbor_count {
            return Err(DomainError::Invalid(format!(
                "{} neighbours on {}",
                self.neighbour_texts.len(),
                self.xpath
            )));
        }
        if self.select_options.is_some() && !self.is_select() {
            return Err(DomainError::Invalid(format!(
                "select options on <{}>",
                self.tag_name
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(DomainError::Invalid(format!("score {} out of range", self.score)));
        }
        Ok(())
    }
}

/// A rendered element with visible text; candidate pool for visual neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub xpath: String,
    pub text: String,
    pub bbox: BBox,
}

#[derive(Clone, PartialEq, Eq)]
pub struct Screenshot {
    pub png: Vec<u8>,
    pub width: u32,
    pub height: u32,
}

impl fmt::Debug for Screenshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Screenshot")
            .field("bytes", &self.png.len())
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Screenshot {
    /// Reads dimensions from the PNG header.
    pub fn from_png(png: Vec<u8>) -> Result<Self, DomainError> {
        if png.len() < 24 || &png[..8] != b"\x89PNG\r\n\x1a\n" || &png[12..16] != b"IHDR" {
            return Err(DomainError::Invalid("screenshot is not a PNG".into()));
        }
        let width = u32::from_be_bytes([png[16], png[17], png[18], png[19]]);
        let height = u32::from_be_bytes([png[20], png[21], png[22], png[23]]);
        if width == 0 || height == 0 {
            return Err(DomainError::Invalid("screenshot has zero size".into()));
        }
        Ok(Screenshot { png, width, height })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageState {
    pub step_index: usize,
    pub url: String,
    pub meta_description: String,
    pub screenshot: Screenshot,
    /// Actionable elements in document order, before ranking.
    pub elements: Vec<ActionableElement>,
    pub text_blocks: Vec<TextBlock>,
    pub context: Option<WebpageContext>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebpageContext {
    pub context: String,
    pub sub_functionalities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "sentence", rename_all = "snake_case")]
pub enum NextStep {
    Done,
    Step(String),
}

impl NextStep {
    pub fn is_done(&self) -> bool {
        matches!(self, NextStep::Done)
    }

    pub fn sentence(&self) -> Option<&str> {
        match self {
            NextStep::Done => None,
            NextStep::Step(s) => Some(s),
        }
    }
}

impl fmt::Display for NextStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NextStep::Done => f.write_str("Done"),
            NextStep::Step(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Done,
    NoActions,
    StepLimit,
    Error,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Done => "done",
            Termination::NoActions => "no_actions",
            Termination::StepLimit => "step_limit",
            Termination::Error => "error",
        })
    }
}

/// The persisted action sequence of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub task_id: String,
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concretized_task: Option<String>,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
    pub records: Vec<Action>,
}

impl Trajectory {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trajectory serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// An executed action together with the label the model saw for its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub action: Action,
    pub label: String,
}

impl HistoryEntry {
    /// `type on <label> [Blazer]`
    pub fn summary(&self) -> String {
        let mut s = format!("{} on {}", self.action.action_type, self.label);
        if let Some(input) = &self.action.input {
            s.push_str(&format!(" [{input}]"));
        }
        s
    }
}

/// Numbered `step k: ...` lines, or `(none)` for an empty history.
pub fn render_history(history: &[HistoryEntry]) -> String {
    if history.is_empty() {
        return "(none)".into();
    }
    history
        .iter()
        .enumerate()
        .map(|(k, h)| format!("step {}: {}", k + 1, h.summary()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Agent configuration; the toggles reproduce the ablation variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavConfig {
    pub top_k: usize,
    pub step_limit: usize,
    pub neighbor_count: usize,
    pub neighbor_threshold: f64,
    pub batch_size: usize,
    pub retrieval_k: usize,
    pub penalty_factor: f64,
    pub temperature: f64,
    pub enable_descriptions: bool,
    pub enable_planning: bool,
    pub html_truncation_limit: usize,
    pub parallel_descriptions: bool,
}

impl Default for NavConfig {
    fn default() -> Self {
        NavConfig {
            top_k: 40,
            step_limit: 20,
            neighbor_count: 5,
            neighbor_threshold: 300.0,
            batch_size: 10,
            retrieval_k: 3,
            penalty_factor: 0.5,
            temperature: 0.0,
            enable_descriptions: true,
            enable_planning: true,
            html_truncation_limit: 2000,
            parallel_descriptions: false,
        }
    }
}

impl NavConfig {
    pub fn validate(&self) -> Result<(), DomainError> {
        let positive = [
            ("top_k", self.top_k),
            ("step_limit", self.step_limit),
            ("neighbor_count", self.neighbor_count),
            ("batch_size", self.batch_size),
            ("retrieval_k", self.retrieval_k),
            ("html_truncation_limit", self.html_truncation_limit),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(DomainError::Invalid(format!("{name} must be positive")));
            }
        }
        if !(self.neighbor_threshold > 0.0) {
            return Err(DomainError::Invalid("neighbor_threshold must be positive".into()));
        }
        if !(self.penalty_factor > 0.0 && self.penalty_factor <= 1.0) {
            return Err(DomainError::Invalid("penalty_factor must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Checks that `action` is legal for `element` and returns it unchanged.
pub fn validate_action(action: Action, element: &ActionableElement) -> Result<Action, DomainError> {
    if action.element_xpath != element.xpath {
        return Err(DomainError::XpathMismatch {
            action_xpath: action.element_xpath,
            element_xpath: element.xpath.clone(),
        });
    }
    action.check_shape()?;
    match action.action_type {
        ActionType::Click => {}
        ActionType::Type => {
            if !element.accepts_text() {
                return Err(DomainError::IllegalActionType(format!(
                    "type on <{}> which does not accept text",
                    element.tag_name
                )));
            }
        }
        ActionType::Select => {
            if !element.is_select() {
                return Err(DomainError::IllegalActionType(format!(
                    "select on <{}> which is not a select element",
                    element.tag_name
                )));
            }
            if let Some(ActionInput::Index(i)) = action.input {
                if i as usize >= element.option_count() {
                    return Err(DomainError::IllegalActionType(format!(
                        "option index {i} out of range for {} options",
                        element.option_count()
                    )));
                }
            }
        }
    }
    Ok(action)
}
