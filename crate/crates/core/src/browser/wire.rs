//! W3C WebDriver client backend.

use std::time::Duration;

use base64::Engine as _;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{BrowserBackend, BrowserError, ExecutionReport, Observation};
use crate::choices::is_actionable;
use crate::domain::{Action, ActionInput, ActionType, ActionableElement, BBox, Screenshot, TextBlock};

/// Web element identifier key from the W3C WebDriver specification.
pub const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";

/// Waits for `readyState == complete` and then for 500 ms without DOM
/// mutations, giving up after 10 s.
pub const SETTLE_SCRIPT: &str = r#"
const done = arguments[arguments.length - 1];
const start = Date.now();
let last = Date.now();
const obs = new MutationObserver(() => { last = Date.now(); });
obs.observe(document, {subtree: true, childList: true, attributes: true, characterData: true});
(function tick() {
  const now = Date.now();
  if (document.readyState === 'complete' && now - last >= 500) { obs.disconnect(); done(true); }
  else if (now - start >= 10000) { obs.disconnect(); done(false); }
  else { setTimeout(tick, 50); }
})();
"#;

/// Flags elements that register click/input/change listeners from now on.
pub const PROBE_SCRIPT: &str = r#"
if (!window.__webnavProbe) {
  window.__webnavProbe = true;
  const orig = EventTarget.prototype.addEventListener;
  EventTarget.prototype.addEventListener = function (type, listener, options) {
    if (this instanceof Element && (type === 'click' || type === 'input' || type === 'change')) {
      this.__webnavListeners = true;
    }
    return orig.call(this, type, listener, options);
  };
}
return true;
"#;

/// Returns url, meta description and every rendered element under body.
pub const CAPTURE_SCRIPT: &str = r#"
const INTERACTIVE = new Set(['a', 'button', 'input', 'select', 'textarea']);
const norm = (s) => (s || '').split(/\s+/).filter(Boolean).join(' ');
function xp(el) {
  if (el === document.body) return '/html/body';
  const p = el.parentElement;
  if (!p) return '';
  let n = 0;
  for (const c of p.children) { if (c.tagName === el.tagName) n++; if (c === el) break; }
  return xp(p) + '/' + el.tagName.toLowerCase() + '[' + n + ']';
}
const meta = document.querySelector('meta[name="description" i]');
const out = { url: location.href, meta: meta ? (meta.getAttribute('content') || '').trim() : '', nodes: [] };
const all = [document.body, ...document.body.querySelectorAll('*')];
for (const el of all) {
  const r = el.getBoundingClientRect();
  const st = getComputedStyle(el);
  if (r.width <= 0 || r.height <= 0 || st.visibility === 'hidden' || st.display === 'none') continue;
  const tag = el.tagName.toLowerCase();
  const attrs = Array.from(el.attributes).map(a => a.name);
  const listener = el.__webnavListeners === true;
  const interactive = INTERACTIVE.has(tag) || listener || attrs.some(a => a.length > 2 && a.toLowerCase().startsWith('on'));
  let own = '';
  for (const c of el.childNodes) if (c.nodeType === 3) own += ' ' + c.textContent;
  const node = {
    tag, xpath: xp(el), attrs, listener,
    bbox: { x: r.x, y: r.y, width: r.width, height: r.height },
    inner_text: norm(el.innerText), own_text: norm(own),
  };
  if (interactive) {
    node.outer_html = el.outerHTML;
    if (tag === 'select') node.options = Array.from(el.options).map(o => norm(o.text));
    if (tag === 'input') node.input_type = (el.getAttribute('type') || 'text').toLowerCase();
    node.content_editable = el.isContentEditable;
  }
  out.nodes.push(node);
}
return out;
"#;

pub const SELECT_SCRIPT: &str = r#"
const el = arguments[0], i = arguments[1];
if (!(el instanceof HTMLSelectElement) || i < 0 || i >= el.options.length) return false;
el.selectedIndex = i;
el.dispatchEvent(new Event('input', {bubbles: true}));
el.dispatchEvent(new Event('change', {bubbles: true}));
return true;
"#;

#[derive(Debug, Deserialize)]
struct CapturedPage {
    url: String,
    #[serde(default)]
    meta: String,
    nodes: Vec<CapturedNode>,
}

#[derive(Debug, Deserialize)]
struct CapturedNode {
    tag: String,
    xpath: String,
    #[serde(default)]
    attrs: Vec<String>,
    #[serde(default)]
    listener: bool,
    bbox: BBox,
    #[serde(default)]
    inner_text: String,
    #[serde(default)]
    own_text: String,
    outer_html: Option<String>,
    options: Option<Vec<String>>,
    input_type: Option<String>,
    #[serde(default)]
    content_editable: bool,
}

fn page_to_observation(page: CapturedPage, screenshot: Screenshot) -> Observation {
    let mut elements = Vec::new();
    let mut text_blocks = Vec::new();
    for n in page.nodes {
        if !n.own_text.is_empty() {
            text_blocks.push(TextBlock {
                xpath: n.xpath.clone(),
                text: n.inner_text.clone(),
                bbox: n.bbox,
            });
        }
        if !is_actionable(&n.tag, n.attrs.iter().map(String::as_str), n.listener) {
            continue;
        }
        let outer = n.outer_html.unwrap_or_default();
        elements.push(ActionableElement {
            ordinal: elements.len(),
            select_options: if n.tag == "select" { Some(n.options.unwrap_or_default()) } else { None },
            tag_name: n.tag,
            cleaned_html: outer.clone(),
            outer_html: outer,
            inner_text: n.inner_text,
            xpath: n.xpath,
            bbox: n.bbox,
            neighbour_texts: Vec::new(),
            input_type: n.input_type,
            content_editable: n.content_editable,
            description: None,
            score: 0.0,
            previously_selected_count: 0,
        });
    }
    Observation {
        url: page.url,
        meta_description: page.meta,
        screenshot,
        elements,
        text_blocks,
    }
}

#[derive(Debug)]
enum WireError {
    Transport(String),
    Remote { error: String, message: String },
    Protocol(String),
}

impl std::fmt::Display for WireError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WireError::Transport(m) => write!(f, "transport: {m}"),
            WireError::Remote { error, message } => write!(f, "{error}: {message}"),
            WireError::Protocol(m) => write!(f, "protocol: {m}"),
        }
    }
}

pub struct WireBackend {
    endpoint: String,
    session: String,
    client: reqwest::blocking::Client,
    url: String,
}

impl WireBackend {
    pub fn open(endpoint: &str, capabilities: Value, start_url: &str) -> Result<Self, BrowserError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| BrowserError::BackendUnreachable(e.to_string()))?;
        let endpoint = endpoint.trim_end_matches('/').to_string();
        let mut backend = WireBackend {
            endpoint,
            session: String::new(),
            client,
            url: start_url.to_string(),
        };
        let v = backend
            .command("POST", "/session", json!({ "capabilities": capabilities }))
            .map_err(|e| BrowserError::BackendUnreachable(e.to_string()))?;
        backend.session = v
            .get("sessionId")
            .and_then(Value::as_str)
            .ok_or_else(|| BrowserError::BackendUnreachable("new session response without sessionId".into()))?
            .to_string();
        backend
            .session_command("POST", "/timeouts", json!({ "script": 15000, "pageLoad": 60000 }))
            .map_err(|e| BrowserError::BackendUnreachable(e.to_string()))?;
        backend
            .session_command("POST", "/url", json!({ "url": start_url }))
            .map_err(|e| BrowserError::PageUnavailable(e.to_string()))?;
        backend.settle()?;
        Ok(backend)
    }

    fn command(&self, method: &str, path: &str, body: Value) -> Result<Value, WireError> {
        let url = format!("{}{}", self.endpoint, path);
        let req = match method {
            "GET" => self.client.get(&url),
            "DELETE" => self.client.delete(&url),
            _ => self.client.post(&url).json(&body),
        };
        let resp = req.send().map_err(|e| WireError::Transport(e.to_string()))?;
        let status = resp.status();
        let v: Value = resp.json().map_err(|e| WireError::Protocol(e.to_string()))?;
        let value = v.get("value").cloned().unwrap_or(Value::Null);
        if !status.is_success() {
            return Err(WireError::Remote {
                error: value
                    .get("error")
                    .and_then(Value::as_str)
                    .unwrap_or("unknown error")
                    .to_string(),
                message: value
                    .get("message")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string(),
            });
        }
        Ok(value)
    }

    fn session_command(&self, method: &str, path: &str, body: Value) -> Result<Value, WireError> {
        self.command(method, &format!("/session/{}{}", self.session, path), body)
    }

    fn execute_sync(&self, script: &str, args: Value) -> Result<Value, WireError> {
        self.session_command("POST", "/execute/sync", json!({ "script": script, "args": args }))
    }

    fn settle(&mut self) -> Result<(), BrowserError> {
        let settled = self
            .session_command("POST", "/execute/async", json!({ "script": SETTLE_SCRIPT, "args": [] }))
            .map_err(|e| BrowserError::PageUnavailable(e.to_string()))?;
        if settled == Value::Bool(false) {
            log::warn!("page did not settle within 10 s");
        }
        self.execute_sync(PROBE_SCRIPT, json!([]))
            .map_err(|e| BrowserError::PageUnavailable(e.to_string()))?;
        if let Ok(Value::String(u)) = self.session_command("GET", "/url", Value::Null) {
            self.url = u;
        }
        Ok(())
    }

    fn find(&self, xpath: &str) -> Result<String, BrowserError> {
        let v = self
            .session_command("POST", "/element", json!({ "using": "xpath", "value": xpath }))
            .map_err(|e| match e {
                WireError::Remote { ref error, .. } if error == "no such element" => {
                    BrowserError::ElementNotFound(xpath.to_string())
                }
                other => BrowserError::ActionRejected(other.to_string()),
            })?;
        v.get(ELEMENT_KEY)
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| BrowserError::ActionRejected("element reference missing".into()))
    }

    fn element_command(&self, id: &str, path: &str, body: Value) -> Result<Value, BrowserError> {
        self.session_command("POST", &format!("/element/{id}{path}"), body)
            .map_err(|e| match e {
                WireError::Remote { ref error, .. } if error == "stale element reference" => {
                    BrowserError::ElementNotFound(e.to_string())
                }
                other => BrowserError::ActionRejected(other.to_string()),
            })
    }
}

impl BrowserBackend for WireBackend {
    fn current_url(&self) -> String {
        self.url.clone()
    }

    fn observe(&mut self) -> Result<Observation, BrowserError> {
        let page = self
            .execute_sync(CAPTURE_SCRIPT, json!([]))
            .map_err(|e| BrowserError::PageUnavailable(e.to_string()))?;
        let page: CapturedPage = serde_json::from_value(page)
            .map_err(|e| BrowserError::PageUnavailable(format!("capture result: {e}")))?;
        let b64 = self
            .session_command("GET", "/screenshot", Value::Null)
            .map_err(|e| BrowserError::ScreenshotFailed(e.to_string()))?;
        let png = base64::engine::general_purpose::STANDARD
            .decode(b64.as_str().unwrap_or_default())
            .map_err(|e| BrowserError::ScreenshotFailed(e.to_string()))?;
        let screenshot = Screenshot::from_png(png).map_err(|e| BrowserError::ScreenshotFailed(e.to_string()))?;
        self.url = page.url.clone();
        Ok(page_to_observation(page, screenshot))
    }

    fn execute(&mut self, action: &Action) -> Result<ExecutionReport, BrowserError> {
        let before = self.url.clone();
        let id = self.find(&action.element_xpath)?;
        match (action.action_type, &action.input) {
            (ActionType::Click, _) => {
                self.element_command(&id, "/click", json!({}))?;
            }
            (ActionType::Type, Some(ActionInput::Text(text))) => {
                // Focus, then replace the current value.
                self.element_command(&id, "/click", json!({}))?;
                self.element_command(&id, "/clear", json!({}))?;
                self.element_command(&id, "/value", json!({ "text": text }))?;
            }
            (ActionType::Select, Some(ActionInput::Index(i))) => {
                let ok = self
                    .execute_sync(SELECT_SCRIPT, json!([{ ELEMENT_KEY: id }, i]))
                    .map_err(|e| BrowserError::ActionRejected(e.to_string()))?;
                if ok != Value::Bool(true) {
                    return Err(BrowserError::ActionRejected(format!(
                        "option index {i} is not selectable"
                    )));
                }
            }
            _ => return Err(BrowserError::ActionRejected("payload does not match action".into())),
        }
        self.settle()?;
        Ok(ExecutionReport {
            navigated: before != self.url,
            new_url: self.url.clone(),
        })
    }

    fn close(&mut self) {
        if !self.session.is_empty() {
            let _ = self.session_command("DELETE", "", Value::Null);
        }
    }
}
