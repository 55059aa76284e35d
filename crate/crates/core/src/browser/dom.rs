//! Static HTML snapshot analysis: absolute xpaths, actionable elements and
//! text blocks, given per-xpath geometry.

use std::collections::HashMap;

use scraper::{ElementRef, Html, Node};

use crate::choices::is_actionable;
use crate::domain::{ActionableElement, BBox, TextBlock};

/// An element of a parsed snapshot with its absolute positional xpath.
#[derive(Debug, Clone)]
pub struct DomNode<'a> {
    pub xpath: String,
    pub element: ElementRef<'a>,
}

const SKIPPED_TEXT_PARENTS: &[&str] = &["script", "style", "noscript", "template", "head"];

pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Visible text of the element and its descendants, whitespace-normalized.
pub fn inner_text(el: ElementRef<'_>) -> String {
    let mut buf = String::new();
    collect_text(el, &mut buf);
    normalize_ws(&buf)
}

fn collect_text(el: ElementRef<'_>, buf: &mut String) {
    if SKIPPED_TEXT_PARENTS.contains(&el.value().name()) {
        return;
    }
    for child in el.children() {
        match child.value() {
            Node::Text(t) => {
                buf.push(' ');
                buf.push_str(t);
            }
            Node::Element(_) => {
                if let Some(c) = ElementRef::wrap(child) {
                    collect_text(c, buf);
                }
            }
            _ => {}
        }
    }
}

/// Text of the element's direct text-node children only.
pub fn own_text(el: ElementRef<'_>) -> String {
    let mut buf = String::new();
    for child in el.children() {
        if let Node::Text(t) = child.value() {
            buf.push(' ');
            buf.push_str(t);
        }
    }
    normalize_ws(&buf)
}

/// Walks `<body>` in document order. Paths are `/html/body` followed by
/// `tag[n]` steps, `n` counting same-tag siblings from 1.
pub fn walk(doc: &Html) -> Vec<DomNode<'_>> {
    let mut out = Vec::new();
    let root = doc.root_element();
    let Some(body) = root.child_elements().find(|c| c.value().name() == "body") else {
        return out;
    };
    out.push(DomNode {
        xpath: "/html/body".into(),
        element: body,
    });
    walk_children(body, "/html/body", &mut out);
    out
}

fn walk_children<'a>(parent: ElementRef<'a>, prefix: &str, out: &mut Vec<DomNode<'a>>) {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for child in parent.child_elements() {
        let name = child.value().name();
        let n = counts.entry(name).or_insert(0);
        *n += 1;
        let xpath = format!("{prefix}/{name}[{n}]");
        out.push(DomNode {
            xpath: xpath.clone(),
            element: child,
        });
        walk_children(child, &xpath, out);
    }
}

pub fn meta_description(doc: &Html) -> String {
    let sel = scraper::Selector::parse("meta").expect("static selector");
    doc.select(&sel)
        .find(|m| {
            m.value()
                .attr("name")
                .is_some_and(|n| n.eq_ignore_ascii_case("description"))
        })
        .and_then(|m| m.value().attr("content"))
        .map(|c| c.trim().to_string())
        .unwrap_or_default()
}

pub fn select_options(el: ElementRef<'_>) -> Vec<String> {
    el.descendent_elements()
        .filter(|d| d.value().name() == "option")
        .map(inner_text)
        .collect()
}

fn to_actionable(node: &DomNode<'_>, bbox: BBox) -> ActionableElement {
    let el = node.element;
    let tag = el.value().name().to_ascii_lowercase();
    let outer = el.html();
    let select_options = (tag == "select").then(|| select_options(el));
    let input_type = (tag == "input").then(|| {
        el.value()
            .attr("type")
            .unwrap_or("text")
            .trim()
            .to_ascii_lowercase()
    });
    let content_editable = el
        .value()
        .attr("contenteditable")
        .is_some_and(|v| !v.eq_ignore_ascii_case("false"));
    ActionableElement {
        ordinal: 0,
        tag_name: tag,
        cleaned_html: outer.clone(),
        outer_html: outer,
        inner_text: inner_text(el),
        xpath: node.xpath.clone(),
        bbox,
        neighbour_texts: Vec::new(),
        select_options,
        input_type,
        content_editable,
        description: None,
        score: 0.0,
        previously_selected_count: 0,
    }
}

/// Elements whose xpath has geometry are rendered. Returns actionable
/// elements (ordinal = document position among actionables) and text blocks.
pub fn analyze(
    doc: &Html,
    geometry: &HashMap<String, BBox>,
) -> (Vec<ActionableElement>, Vec<TextBlock>) {
    let mut elements = Vec::new();
    let mut blocks = Vec::new();
    for node in walk(doc) {
        let Some(bbox) = geometry.get(&node.xpath).copied() else {
            continue;
        };
        let v = node.element.value();
        if is_actionable(v.name(), v.attrs().map(|(k, _)| k), false) {
            let mut el = to_actionable(&node, bbox);
            el.ordinal = elements.len();
            elements.push(el);
        }
        if !own_text(node.element).is_empty() {
            blocks.push(TextBlock {
                xpath: node.xpath.clone(),
                text: inner_text(node.element),
                bbox,
            });
        }
    }
    (elements, blocks)
}

/// All xpaths of a snapshot, in document order.
pub fn xpaths(html: &str) -> Vec<String> {
    let doc = Html::parse_document(html);
    walk(&doc).into_iter().map(|n| n.xpath).collect()
}
