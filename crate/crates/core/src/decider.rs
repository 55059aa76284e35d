//! Decision making: annotate the screenshot, ask for one action, ground it.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::choices::RankedChoices;
use crate::domain::{
    render_history, validate_action, Action, ActionInput, ActionType, ActionableElement, DomainError,
    HistoryEntry, NextStep, Screenshot,
};
use crate::llm::prompts::{self, PromptTemplate};
use crate::llm::{CompletionRequest, ExpectedShape, Gateway, LlmError, Tier};
use crate::raster::{text_width, Canvas, Color, GLYPH_H};

#[derive(Debug, Error)]
pub enum DeciderError {
    #[error("screenshot could not be decoded: {0}")]
    ImageDecodeFailed(String),
    #[error("index {index} out of range for {len} choices")]
    IndexOutOfRange { index: i64, len: usize },
    #[error("{0}")]
    IllegalActionType(String),
    #[error("malformed action choice: {0}")]
    MalformedOutput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionChoice {
    pub index: usize,
    pub action: ActionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<ActionInput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Badge {
    pub ordinal: usize,
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationManifest {
    pub width: u32,
    pub height: u32,
    pub badges: Vec<Badge>,
    /// Ordinals of elements outside the screenshot.
    pub offscreen: Vec<usize>,
}

const OUTLINE_PX: i64 = 2;
const BADGE_SCALE: u32 = 2;
const BADGE_PAD: u32 = 2;
const PALETTE: [Color; 6] = [
    [220, 20, 60],
    [0, 90, 200],
    [0, 140, 70],
    [200, 100, 0],
    [130, 40, 170],
    [0, 130, 140],
];

fn badge_color(ordinal: usize) -> Color {
    PALETTE[ordinal % PALETTE.len()]
}

/// Draws a 2-px outline and a filled index badge at the top-left corner of
/// every ranked element that intersects the screenshot. Without anything to
/// draw the input bytes are returned unchanged.
pub fn annotate_screenshot(
    screenshot: &Screenshot,
    ranked: &RankedChoices,
) -> Result<(Screenshot, AnnotationManifest), DeciderError> {
    let (onscreen, offscreen): (Vec<&ActionableElement>, Vec<&ActionableElement>) = ranked
        .items
        .iter()
        .partition(|e| e.bbox.intersects_viewport(screenshot.width, screenshot.height));
    let mut manifest = AnnotationManifest {
        width: screenshot.width,
        height: screenshot.height,
        badges: Vec::new(),
        offscreen: offscreen.iter().map(|e| e.ordinal).collect(),
    };
    if onscreen.is_empty() {
        return Ok((screenshot.clone(), manifest));
    }
    let mut canvas = Canvas::from_png(&screenshot.png).map_err(|e| DeciderError::ImageDecodeFailed(e.to_string()))?;
    for e in &onscreen {
        let b = e.bbox;
        canvas.outline_rect(
            b.x.round() as i64,
            b.y.round() as i64,
            b.width.round().max(1.0) as i64,
            b.height.round().max(1.0) as i64,
            OUTLINE_PX,
            badge_color(e.ordinal),
        );
    }
    // Badges go on top of all outlines.
    for e in &onscreen {
        let label = e.ordinal.to_string();
        let width = text_width(&label, BADGE_SCALE) + 2 * BADGE_PAD;
        let height = GLYPH_H * BADGE_SCALE + 2 * BADGE_PAD;
        let x = (e.bbox.x.round().max(0.0) as u32).min(screenshot.width.saturating_sub(1));
        let y = (e.bbox.y.round().max(0.0) as u32).min(screenshot.height.saturating_sub(1));
        canvas.fill_rect(x as i64, y as i64, width as i64, height as i64, badge_color(e.ordinal));
        canvas.draw_text(
            (x + BADGE_PAD) as i64,
            (y + BADGE_PAD) as i64,
            &label,
            BADGE_SCALE,
            [255, 255, 255],
        );
        manifest.badges.push(Badge {
            ordinal: e.ordinal,
            x,
            y,
            width,
            height,
        });
    }
    Ok((canvas.to_screenshot(), manifest))
}

fn element_line(e: &ActionableElement) -> String {
    let mut tag = format!("<{}", e.tag_name);
    if let Some(t) = &e.input_type {
        tag.push_str(&format!(" type={t}"));
    }
    tag.push('>');
    let mut line = format!("[{}] {tag} {}", e.ordinal, e.label());
    if let Some(opts) = &e.select_options {
        let listed: Vec<String> = opts.iter().enumerate().map(|(i, o)| format!("{i}: {o}")).collect();
        line.push_str(&format!(" (options: {})", listed.join(", ")));
    }
    line
}

pub fn render_elements(ranked: &RankedChoices) -> String {
    ranked.items.iter().map(element_line).collect::<Vec<_>>().join("\n")
}

/// Checks a parsed reply against the ranked list.
pub fn validate_choice(v: &Value, ranked: &RankedChoices) -> Result<ActionChoice, DeciderError> {
    let index = match v.get("index") {
        Some(Value::Number(n)) => n
            .as_i64()
            .ok_or_else(|| DeciderError::MalformedOutput(format!("index {n} is not an integer")))?,
        Some(Value::String(s)) => s
            .trim()
            .parse::<i64>()
            .map_err(|_| DeciderError::MalformedOutput(format!("index {s:?} is not an integer")))?,
        _ => return Err(DeciderError::MalformedOutput("missing integer \"index\"".into())),
    };
    if index < 0 || index as usize >= ranked.len() {
        return Err(DeciderError::IndexOutOfRange {
            index,
            len: ranked.len(),
        });
    }
    let action = v
        .get("action")
        .and_then(Value::as_str)
        .ok_or_else(|| DeciderError::MalformedOutput("missing string \"action\"".into()))?;
    let action = ActionType::parse(action)
        .ok_or_else(|| DeciderError::IllegalActionType(format!("unknown action {action:?}")))?;
    let input = match (action, v.get("input")) {
        (ActionType::Click, _) | (_, None | Some(Value::Null)) => None,
        (ActionType::Type, Some(Value::String(s))) => Some(ActionInput::Text(s.clone())),
        (ActionType::Type, Some(Value::Number(n))) => Some(ActionInput::Text(n.to_string())),
        (ActionType::Select, Some(Value::Number(n))) => n.as_u64().and_then(|i| u32::try_from(i).ok()).map(ActionInput::Index),
        (ActionType::Select, Some(Value::String(s))) => s.trim().parse::<u32>().ok().map(ActionInput::Index),
        _ => None,
    };
    let choice = ActionChoice {
        index: index as usize,
        action,
        input,
    };
    let element = &ranked.items[choice.index];
    validate_action(ground(&choice, ranked), element).map_err(|e| match e {
        DomainError::IllegalActionType(m) => DeciderError::IllegalActionType(format!("{m} (element {index})")),
        other => DeciderError::IllegalActionType(other.to_string()),
    })?;
    Ok(choice)
}

pub struct Decision<'a> {
    pub task: &'a str,
    /// `None` when planning is disabled.
    pub next_step: Option<&'a NextStep>,
    pub history: &'a [HistoryEntry],
    pub ranked: &'a RankedChoices,
    pub annotated: &'a Screenshot,
    pub temperature: f64,
}

/// Asks the strong tier for one action. An invalid reply earns exactly one
/// corrective re-prompt naming the violation; a second invalid reply fails.
pub fn select_action(gateway: &Gateway, d: &Decision<'_>) -> Result<ActionChoice, DeciderError> {
    if d.ranked.is_empty() {
        return Err(DeciderError::Precondition("no choices to select from".into()));
    }
    if d.next_step.is_some_and(NextStep::is_done) {
        return Err(DeciderError::Precondition("next step is Done".into()));
    }
    let t = PromptTemplate::bundled(prompts::SELECT_ACTION);
    let render = |section: &str, vars: &[(&str, &str)]| t.render(section, vars).map_err(LlmError::InvalidRequest);
    let history = render_history(d.history);
    let elements = render_elements(d.ranked);
    let mut base = CompletionRequest::new(Tier::Strong, t.system(), ExpectedShape::JsonObject)
        .temperature(d.temperature)
        .text(render(
            "user",
            &[("task", d.task), ("history", &history), ("elements", &elements)],
        )?);
    if let Some(NextStep::Step(s)) = d.next_step {
        base = base.text(render("planned_step", &[("next_step", s)])?);
    }
    base = base.text(render("screenshot", &[])?).image_png(d.annotated.png.clone());

    let (_, v) = gateway.complete_json_with(&base, |v| Ok(v.clone()))?;
    let violation = match validate_choice(&v, d.ranked) {
        Ok(c) => return Ok(c),
        Err(e) => e,
    };
    log::warn!("action choice rejected, re-prompting: {violation}");
    let corrective = base.text(render("correction", &[("violation", &violation.to_string())])?);
    let (_, v) = gateway.complete_json_with(&corrective, |v| Ok(v.clone()))?;
    validate_choice(&v, d.ranked)
}

/// Maps a choice onto the indexed element. Panics on an index outside the
/// list; callers validate first.
pub fn ground(choice: &ActionChoice, ranked: &RankedChoices) -> Action {
    let e = &ranked.items[choice.index];
    Action {
        element_outer_html: e.outer_html.clone(),
        element_xpath: e.xpath.clone(),
        action_type: choice.action,
        input: choice.input.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BBox;
    use crate::llm::{ScriptEntry, ScriptedProvider};
    use std::sync::Arc;

    fn el(ordinal: usize, tag: &str, text: &str, bbox: BBox) -> ActionableElement {
        ActionableElement {
            ordinal,
            tag_name: tag.into(),
            outer_html: format!("<{tag}>{text}</{tag}>"),
            cleaned_html: format!("<{tag}>{text}</{tag}>"),
            inner_text: text.into(),
            xpath: format!("/html/body/{tag}[{}]", ordinal + 1),
            bbox,
            neighbour_texts: vec![],
            select_options: None,
            input_type: None,
            content_editable: false,
            description: None,
            score: 0.5,
            previously_selected_count: 0,
        }
    }

    fn ranked(items: Vec<ActionableElement>) -> RankedChoices {
        RankedChoices {
            items,
            next_step: NextStep::Step("go".into()),
        }
    }

    fn forty() -> RankedChoices {
        let mut items: Vec<_> = (0..40)
            .map(|i| el(i, "a", &format!("link {i}"), BBox::new(0.0, i as f64 * 20.0, 50.0, 15.0)))
            .collect();
        items[7].tag_name = "input".into();
        items[7].input_type = Some("search".into());
        ranked(items)
    }

    fn shot() -> Screenshot {
        Canvas::new(200, 100, [255, 255, 255]).to_screenshot()
    }

    #[test]
    fn three_badges_at_corners() {
        let r = ranked(vec![
            el(0, "a", "a", BBox::new(10.0, 10.0, 40.0, 20.0)),
            el(1, "a", "b", BBox::new(60.0, 10.0, 40.0, 20.0)),
            el(2, "a", "c", BBox::new(10.0, 50.0, 40.0, 20.0)),
        ]);
        let (out, m) = annotate_screenshot(&shot(), &r).unwrap();
        assert_eq!((out.width, out.height), (200, 100));
        let pos: Vec<_> = m.badges.iter().map(|b| (b.ordinal, b.x, b.y)).collect();
        assert_eq!(pos, [(0, 10, 10), (1, 60, 10), (2, 10, 50)]);
        assert!(m.offscreen.is_empty());
        let c = Canvas::from_png(&out.png).unwrap();
        assert_eq!(c.pixel(10, 10), badge_color(0));
        assert_eq!(c.pixel(49, 29), badge_color(0));
    }

    #[test]
    fn below_the_fold_is_skipped() {
        let r = ranked(vec![
            el(0, "a", "a", BBox::new(10.0, 10.0, 40.0, 20.0)),
            el(1, "a", "b", BBox::new(10.0, 500.0, 40.0, 20.0)),
        ]);
        let (_, m) = annotate_screenshot(&shot(), &r).unwrap();
        assert_eq!(m.badges.len(), 1);
        assert_eq!(m.offscreen, [1]);
    }

    #[test]
    fn empty_is_identity() {
        let s = shot();
        let (out, m) = annotate_screenshot(&s, &ranked(vec![])).unwrap();
        assert_eq!(out.png, s.png);
        assert!(m.badges.is_empty());
    }

    #[test]
    fn undecodable_image() {
        let mut s = shot();
        s.png.truncate(40);
        let r = ranked(vec![el(0, "a", "a", BBox::new(1.0, 1.0, 5.0, 5.0))]);
        assert!(matches!(
            annotate_screenshot(&s, &r),
            Err(DeciderError::ImageDecodeFailed(_))
        ));
    }

    fn decide(script: Vec<&str>, r: &RankedChoices) -> (Result<ActionChoice, DeciderError>, Gateway) {
        let entries = script
            .into_iter()
            .map(|s| ScriptEntry::new(Tier::Strong, "action selector", s))
            .collect();
        let g = Gateway::new(Arc::new(ScriptedProvider::new(entries)));
        let step = NextStep::Step("Click the Blazers link".into());
        let s = shot();
        let d = Decision {
            task: "find blazers",
            next_step: Some(&step),
            history: &[],
            ranked: r,
            annotated: &s,
            temperature: 0.0,
        };
        (select_action(&g, &d), g)
    }

    #[test]
    fn typed_action_reply() {
        let r = ranked(vec![el(0, "a", "Blazers", BBox::new(0.0, 0.0, 10.0, 10.0))]);
        let (c, g) = decide(vec!["{\n  \"index\": 0,\n  \"action\": \"click\"\n}"], &r);
        assert_eq!(
            c.unwrap(),
            ActionChoice {
                index: 0,
                action: ActionType::Click,
                input: None
            }
        );
        let t = &g.transcript()[0];
        assert!(t.user_text.contains("Planned sub-goal: Click the Blazers link"));
        assert!(t.user_text.contains("[0] <a> Blazers"));
        assert_eq!(t.image_bytes.len(), 1);
    }

    #[test]
    fn type_into_search_input() {
        let (c, _) = decide(vec![r#"{"index": 7, "action": "type", "input": "Blazer"}"#], &forty());
        assert_eq!(c.unwrap().input, Some(ActionInput::Text("Blazer".into())));
    }

    #[test]
    fn out_of_range_gets_one_correction() {
        let (c, g) = decide(
            vec![r#"{"index": 99, "action": "click"}"#, r#"{"index": 3, "action": "click"}"#],
            &forty(),
        );
        assert_eq!(c.unwrap().index, 3);
        let t = g.transcript();
        assert_eq!(t.len(), 2);
        assert!(t[1].user_text.contains("index 99 out of range for 40 choices"));
    }

    #[test]
    fn second_violation_fails() {
        let (c, g) = decide(
            vec![
                r#"{"index": 99, "action": "click"}"#,
                r#"{"index": 2, "action": "type", "input": "x"}"#,
                r#"{"index": 1, "action": "click"}"#,
            ],
            &forty(),
        );
        assert!(matches!(c, Err(DeciderError::IllegalActionType(_))));
        assert_eq!(g.transcript().len(), 2);
    }

    #[test]
    fn grounding() {
        let mut sel = el(2, "select", "S M L XL XXL", BBox::new(0.0, 0.0, 1.0, 1.0));
        sel.select_options = Some(["S", "M", "L", "XL", "XXL"].map(String::from).to_vec());
        let mut input = el(1, "input", "", BBox::new(0.0, 0.0, 1.0, 1.0));
        input.input_type = Some("text".into());
        let r = ranked(vec![el(0, "a", "men", BBox::new(0.0, 0.0, 1.0, 1.0)), input, sel]);
        let a = ground(
            &ActionChoice {
                index: 1,
                action: ActionType::Type,
                input: Some(ActionInput::Text("Blazer".into())),
            },
            &r,
        );
        assert_eq!(a.element_xpath, "/html/body/input[2]");
        assert_eq!(a.action_type, ActionType::Type);
        let v = serde_json::json!({"index": 2, "action": "select", "input": 3});
        let c = validate_choice(&v, &r).unwrap();
        assert_eq!(ground(&c, &r).input, Some(ActionInput::Index(3)));
        let v = serde_json::json!({"index": 2, "action": "select", "input": 5});
        assert!(validate_choice(&v, &r).is_err());
    }
}
