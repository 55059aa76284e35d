//! Deterministic offline test assets: a page-graph generator for fixture
//! apps plus the bundled app and script definitions.
//!
//! Generated directories use the fixture backend layout and are
//! byte-identical across regenerations.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::browser::fixture::{StateEntry, Transition, TransitionsFile};
use crate::domain::{ActionType, BBox, TaskKind, TaskSpec};
use crate::llm::{ScriptEntry, Tier};
use crate::raster::{text_width, Canvas, Color, GLYPH_H};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),
    #[error("fixture i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    /// Unique within its state; transitions refer to nodes by key.
    pub key: String,
    pub tag: String,
    pub attrs: Vec<(String, String)>,
    pub text: String,
    pub bbox: Option<BBox>,
    pub options: Vec<String>,
    pub children: Vec<NodeSpec>,
}

pub fn node(key: &str, tag: &str) -> NodeSpec {
    NodeSpec {
        key: key.into(),
        tag: tag.into(),
        attrs: Vec::new(),
        text: String::new(),
        bbox: None,
        options: Vec::new(),
        children: Vec::new(),
    }
}

impl NodeSpec {
    pub fn attr(mut self, k: &str, v: &str) -> Self {
        self.attrs.push((k.into(), v.into()));
        self
    }

    pub fn text(mut self, t: &str) -> Self {
        self.text = t.into();
        self
    }

    pub fn at(mut self, x: f64, y: f64, w: f64, h: f64) -> Self {
        self.bbox = Some(BBox::new(x, y, w, h));
        self
    }

    pub fn options(mut self, opts: &[&str]) -> Self {
        self.options = opts.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn child(mut self, c: NodeSpec) -> Self {
        self.children.push(c);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    pub id: String,
    pub url: String,
    pub title: String,
    pub nodes: Vec<NodeSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSpec {
    pub from: String,
    pub node: String,
    pub action: ActionType,
    pub input_pattern: Option<String>,
    pub to: String,
    /// Marks an intentional cycle.
    pub loop_edge: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppSpec {
    pub name: String,
    pub meta_description: String,
    pub viewport: (u32, u32),
    pub initial_state: String,
    pub states: Vec<StateSpec>,
    pub transitions: Vec<TransitionSpec>,
}

const VOID_TAGS: &[&str] = &["input", "img", "br", "hr", "meta"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Rendered {
    html: String,
    /// key -> xpath
    xpaths: HashMap<String, String>,
    geometry: Vec<(String, BBox)>,
}

fn render_nodes(nodes: &[NodeSpec], prefix: &str, depth: usize, out: &mut Rendered) {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for n in nodes {
        let c = counts.entry(n.tag.as_str()).or_insert(0);
        *c += 1;
        let xpath = format!("{prefix}/{}[{c}]", n.tag);
        out.xpaths.insert(n.key.clone(), xpath.clone());
        if let Some(b) = n.bbox {
            out.geometry.push((xpath.clone(), b));
        }
        let indent = "  ".repeat(depth);
        out.html.push_str(&format!("{indent}<{}", n.tag));
        for (k, v) in &n.attrs {
            out.html.push_str(&format!(" {k}=\"{}\"", escape(v)));
        }
        out.html.push('>');
        if VOID_TAGS.contains(&n.tag.as_str()) {
            out.html.push('\n');
            continue;
        }
        out.html.push_str(&escape(&n.text));
        for o in &n.options {
            out.html.push_str(&format!("<option>{}</option>", escape(o)));
        }
        if !n.children.is_empty() {
            out.html.push('\n');
            render_nodes(&n.children, &xpath, depth + 1, out);
            out.html.push_str(&indent);
        }
        out.html.push_str(&format!("</{}>\n", n.tag));
    }
}

fn render_state(app: &AppSpec, state: &StateSpec) -> Rendered {
    let mut r = Rendered {
        html: format!(
            "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<meta name=\"description\" content=\"{}\">\n<title>{}</title>\n</head>\n<body>\n",
            escape(&app.meta_description),
            escape(&state.title)
        ),
        xpaths: HashMap::new(),
        geometry: Vec::new(),
    };
    render_nodes(&state.nodes, "/html/body", 1, &mut r);
    r.html.push_str("</body>\n</html>\n");
    r
}

fn fill_for(n: &NodeSpec) -> Option<Color> {
    let has_handler = n.attrs.iter().any(|(k, _)| k.starts_with("on"));
    match n.tag.as_str() {
        "a" => Some([226, 236, 252]),
        "button" => Some([40, 40, 40]),
        "input" | "textarea" => Some([252, 252, 252]),
        "select" => Some([244, 244, 232]),
        _ if has_handler => Some([255, 232, 205]),
        _ => None,
    }
}

fn draw_label(canvas: &mut Canvas, b: BBox, text: &str, color: Color) {
    let inner = (b.width - 8.0).max(0.0) as u32;
    let scale = if text_width(text, 2) <= inner { 2 } else { 1 };
    let mut shown: String = text.to_string();
    while !shown.is_empty() && text_width(&shown, scale) > inner {
        shown.pop();
    }
    let y = b.y + ((b.height - (GLYPH_H * scale) as f64) / 2.0).max(0.0);
    canvas.draw_text(b.x as i64 + 4, y as i64, &shown, scale, color);
}

fn paint_nodes(canvas: &mut Canvas, nodes: &[NodeSpec]) {
    for n in nodes {
        if let Some(b) = n.bbox {
            let (x, y, w, h) = (b.x as i64, b.y as i64, b.width as i64, b.height as i64);
            match fill_for(n) {
                Some(fill) => {
                    canvas.fill_rect(x, y, w, h, fill);
                    canvas.outline_rect(x, y, w, h, 1, [150, 150, 150]);
                }
                None if n.text.is_empty() => canvas.outline_rect(x, y, w, h, 1, [225, 225, 225]),
                None => {}
            }
            let fg = if n.tag == "button" { [255, 255, 255] } else { [30, 30, 30] };
            let label = if !n.text.is_empty() {
                n.text.clone()
            } else if let Some(o) = n.options.first() {
                o.clone()
            } else {
                n.attrs
                    .iter()
                    .find(|(k, _)| k == "placeholder")
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default()
            };
            if !label.is_empty() {
                draw_label(canvas, b, &label, fg);
            }
        }
        paint_nodes(canvas, &n.children);
    }
}

fn collect_keys<'a>(nodes: &'a [NodeSpec], out: &mut Vec<&'a NodeSpec>) {
    for n in nodes {
        out.push(n);
        collect_keys(&n.children, out);
    }
}

impl AppSpec {
    pub fn validate(&self) -> Result<(), FixtureError> {
        let invalid = |m: String| Err(FixtureError::InvalidSpec(m));
        let mut ids = HashSet::new();
        for s in &self.states {
            if !ids.insert(s.id.as_str()) {
                return invalid(format!("duplicate state {}", s.id));
            }
            let mut all = Vec::new();
            collect_keys(&s.nodes, &mut all);
            let mut keys = HashSet::new();
            for n in all {
                if !keys.insert(n.key.as_str()) {
                    return invalid(format!("duplicate node key {} in state {}", n.key, s.id));
                }
                if !n.options.is_empty() && n.tag != "select" {
                    return invalid(format!("options on <{}> {}", n.tag, n.key));
                }
            }
        }
        if !ids.contains(self.initial_state.as_str()) {
            return invalid(format!("initial state {} is not declared", self.initial_state));
        }
        let mut graph = DiGraph::<&str, ()>::new();
        let idx: HashMap<&str, _> = self.states.iter().map(|s| (s.id.as_str(), graph.add_node(&s.id))).collect();
        for t in &self.transitions {
            let (Some(&from), Some(&to)) = (idx.get(t.from.as_str()), idx.get(t.to.as_str())) else {
                return invalid(format!("transition {} -> {} references an undeclared state", t.from, t.to));
            };
            let state = self.states.iter().find(|s| s.id == t.from).expect("declared");
            let mut all = Vec::new();
            collect_keys(&state.nodes, &mut all);
            match all.iter().find(|n| n.key == t.node) {
                None => return invalid(format!("transition from {} targets missing node {}", t.from, t.node)),
                Some(n) if n.bbox.is_none() => {
                    return invalid(format!("transition from {} targets unrendered node {}", t.from, t.node))
                }
                Some(_) => {}
            }
            if !t.loop_edge {
                graph.add_edge(from, to, ());
            }
        }
        if petgraph::algo::is_cyclic_directed(&graph) {
            return invalid("page graph has a cycle without designated loop edges".into());
        }
        Ok(())
    }
}

fn io<T>(r: std::io::Result<T>, what: &Path) -> Result<T, FixtureError> {
    r.map_err(|e| FixtureError::Io(format!("{}: {e}", what.display())))
}

/// Writes the app into `root/<name>` and returns that directory.
pub fn generate_fixture_app(spec: &AppSpec, root: &Path) -> Result<PathBuf, FixtureError> {
    spec.validate()?;
    let dir = root.join(&spec.name);
    for sub in ["states", "screenshots"] {
        let p = dir.join(sub);
        io(std::fs::create_dir_all(&p), &p)?;
    }
    let mut geometry = serde_json::Map::new();
    let mut transitions = Vec::new();
    for state in &spec.states {
        let r = render_state(spec, state);
        let p = dir.join("states").join(format!("{}.html", state.id));
        io(std::fs::write(&p, &r.html), &p)?;

        let mut canvas = Canvas::new(spec.viewport.0, spec.viewport.1, [255, 255, 255]);
        paint_nodes(&mut canvas, &state.nodes);
        let p = dir.join("screenshots").join(format!("{}.png", state.id));
        io(std::fs::write(&p, canvas.to_png()), &p)?;

        let mut g: Vec<_> = r.geometry.clone();
        g.sort_by(|a, b| a.0.cmp(&b.0));
        geometry.insert(
            state.id.clone(),
            serde_json::Value::Object(
                g.into_iter()
                    .map(|(x, b)| (x, serde_json::to_value(b).expect("bbox")))
                    .collect(),
            ),
        );
        for t in spec.transitions.iter().filter(|t| t.from == state.id) {
            transitions.push(Transition {
                from: t.from.clone(),
                xpath: r.xpaths[&t.node].clone(),
                action: t.action,
                input_pattern: t.input_pattern.clone(),
                to: t.to.clone(),
            });
        }
    }
    let tfile = TransitionsFile {
        app: spec.name.clone(),
        initial_state: spec.initial_state.clone(),
        states: spec
            .states
            .iter()
            .map(|s| StateEntry {
                id: s.id.clone(),
                url: s.url.clone(),
            })
            .collect(),
        transitions,
    };
    write_json(&dir.join("transitions.json"), &tfile)?;
    write_json(&dir.join("geometry.json"), &geometry)?;
    Ok(dir)
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), FixtureError> {
    let mut s = serde_json::to_string_pretty(v).expect("fixture json");
    s.push('\n');
    io(std::fs::write(path, s), path)
}

fn tr(from: &str, node: &str, action: ActionType, to: &str) -> TransitionSpec {
    TransitionSpec {
        from: from.into(),
        node: node.into(),
        action,
        input_pattern: None,
        to: to.into(),
        loop_edge: false,
    }
}

fn header(active: &str) -> NodeSpec {
    let mut h = node("header", "header").at(0.0, 0.0, 1280.0, 72.0);
    h = h.child(node("logo", "span").text("MINI SHOP").at(24.0, 22.0, 130.0, 28.0));
    let mut nav = node("nav", "nav").at(170.0, 16.0, 420.0, 40.0);
    for (i, (k, label)) in [("men", "MEN"), ("women", "WOMEN"), ("kids", "KIDS"), ("baby", "BABY")]
        .into_iter()
        .enumerate()
    {
        let mut a = node(&format!("nav-{k}"), "a")
            .attr("class", if k == active { "nav-item active" } else { "nav-item" })
            .attr("href", &format!("/{k}"))
            .text(label)
            .at(180.0 + i as f64 * 100.0, 22.0, 90.0, 28.0);
        if k == active {
            a = a.attr("aria-current", "page");
        }
        nav = nav.child(a);
    }
    h.child(nav)
}

pub const MINI_SHOP: &str = "mini-shop";
pub const LOOP_APP: &str = "loop";
pub const EMPTY_APP: &str = "empty";

/// Six-state clothing shop: landing, search, results, filtered results,
/// product page and wishlist.
pub fn mini_shop_spec() -> AppSpec {
    let url = |p: &str| format!("fixture://{MINI_SHOP}{p}");
    let landing = StateSpec {
        id: "landing".into(),
        url: url("/"),
        title: "Mini Shop".into(),
        nodes: vec![
            header("")
                .child(
                    node("search-button", "button")
                        .attr("type", "button")
                        .attr("aria-label", "Open search bar")
                        .text("Search")
                        .at(860.0, 20.0, 110.0, 32.0),
                )
                .child(
                    node("wishlist-link", "a")
                        .attr("href", "/wishlist")
                        .text("Wishlist")
                        .at(990.0, 22.0, 100.0, 28.0),
                )
                .child(node("cart-link", "a").attr("href", "/cart").text("Cart").at(1100.0, 22.0, 70.0, 28.0))
                .child(
                    node("language", "select")
                        .attr("name", "language")
                        .options(&["English", "Francais"])
                        .at(1180.0, 22.0, 90.0, 28.0),
                ),
            node("hero", "main")
                .at(0.0, 90.0, 1280.0, 600.0)
                .child(node("hero-title", "h1").text("Spring collection").at(80.0, 140.0, 600.0, 48.0))
                .child(
                    node("hero-copy", "p")
                        .text("New arrivals for the whole family")
                        .at(80.0, 200.0, 600.0, 28.0),
                )
                .child(
                    node("carousel-next", "div")
                        .attr("class", "carousel-arrow")
                        .attr("onclick", "nextSlide()")
                        .text(">")
                        .at(1200.0, 380.0, 48.0, 48.0),
                ),
        ],
    };
    let search = StateSpec {
        id: "search".into(),
        url: url("/search"),
        title: "Search - Mini Shop".into(),
        nodes: vec![
            header(""),
            node("search-panel", "form")
                .attr("role", "search")
                .at(240.0, 100.0, 800.0, 120.0)
                .child(node("search-label", "label").text("Search by keyword").at(260.0, 110.0, 300.0, 24.0))
                .child(
                    node("search-input", "input")
                        .attr("type", "search")
                        .attr("name", "q")
                        .attr("placeholder", "Search by keyword")
                        .attr("style", "border:1px solid #ccc")
                        .at(260.0, 140.0, 640.0, 40.0),
                )
                .child(
                    node("search-close", "button")
                        .attr("type", "button")
                        .text("Close")
                        .at(920.0, 140.0, 100.0, 40.0),
                ),
            node("popular", "section")
                .at(240.0, 240.0, 800.0, 120.0)
                .child(node("popular-title", "h2").text("Popular searches").at(260.0, 250.0, 300.0, 28.0))
                .child(node("popular-1", "a").attr("href", "/search?q=linen").text("Linen").at(260.0, 290.0, 90.0, 28.0))
                .child(node("popular-2", "a").attr("href", "/search?q=denim").text("Denim").at(360.0, 290.0, 90.0, 28.0)),
        ],
    };
    let product_card = |key: &str, name: &str, price: &str, x: f64| {
        node(key, "a")
            .attr("class", "product-tile")
            .attr("href", &format!("/product/{key}"))
            .at(x, 300.0, 260.0, 60.0)
            .child(node(&format!("{key}-name"), "span").text(name).at(x + 8.0, 306.0, 244.0, 24.0))
            .child(node(&format!("{key}-price"), "span").text(price).at(x + 8.0, 332.0, 120.0, 22.0))
    };
    let filters = |active: Option<&str>| {
        let mut f = node("filters", "aside").at(20.0, 100.0, 200.0, 240.0).child(
            node("filters-title", "h3").text("Colour").at(30.0, 110.0, 180.0, 24.0),
        );
        for (i, c) in ["Black", "Navy", "Grey"].into_iter().enumerate() {
            let key = format!("filter-{}", c.to_lowercase());
            let mut a = node(&key, "a")
                .attr("role", "button")
                .attr("data-test", "filter-by-colour")
                .attr("data-label", &format!("/colour/{}", c.to_lowercase()))
                .attr("href", &format!("?colour={}", c.to_lowercase()))
                .text(c)
                .at(30.0, 140.0 + i as f64 * 36.0, 180.0, 30.0);
            if active == Some(c) {
                a = a.attr("aria-pressed", "true");
            }
            f = f.child(a);
        }
        f
    };
    let results = StateSpec {
        id: "results".into(),
        url: url("/search?q=blazer"),
        title: "Blazer - Mini Shop".into(),
        nodes: vec![
            header("men"),
            filters(None),
            node("results", "main")
                .at(240.0, 100.0, 1020.0, 400.0)
                .child(node("results-title", "h1").text("Results for blazer").at(260.0, 110.0, 500.0, 36.0))
                .child(node("results-count", "p").text("3 items").at(260.0, 150.0, 200.0, 24.0))
                .child(product_card("p-navy", "Navy Linen Blazer", "$129", 260.0))
                .child(product_card("p-grey", "Grey Check Blazer", "$139", 540.0))
                .child(product_card("p-black-jersey", "Black Jersey Blazer", "$119", 820.0)),
        ],
    };
    let filtered = StateSpec {
        id: "filtered".into(),
        url: url("/search?q=blazer&colour=black"),
        title: "Black blazer - Mini Shop".into(),
        nodes: vec![
            header("men"),
            filters(Some("Black")),
            node("results", "main")
                .at(240.0, 100.0, 1020.0, 400.0)
                .child(node("results-title", "h1").text("Results for blazer").at(260.0, 110.0, 500.0, 36.0))
                .child(node("results-count", "p").text("2 items in Black").at(260.0, 150.0, 300.0, 24.0))
                .child(product_card("p-black-wool", "Black Wool Blazer", "$159", 260.0))
                .child(product_card("p-black-jersey", "Black Jersey Blazer", "$119", 540.0)),
        ],
    };
    let product = StateSpec {
        id: "product".into(),
        url: url("/product/black-wool-blazer"),
        title: "Black Wool Blazer - Mini Shop".into(),
        nodes: vec![
            header("men"),
            node("pdp", "main")
                .at(0.0, 90.0, 1280.0, 600.0)
                .child(node("pdp-title", "h1").text("Black Wool Blazer").at(640.0, 110.0, 560.0, 40.0))
                .child(node("pdp-price", "p").text("$159").at(640.0, 160.0, 200.0, 28.0))
                .child(node("size-label", "label").text("Size").at(640.0, 210.0, 100.0, 24.0))
                .child(
                    node("size", "select")
                        .attr("name", "size")
                        .options(&["S", "M", "L", "XL"])
                        .at(640.0, 240.0, 200.0, 36.0),
                )
                .child(
                    node("add-to-cart", "button")
                        .attr("type", "submit")
                        .text("Add to Cart")
                        .at(640.0, 300.0, 220.0, 44.0),
                )
                .child(
                    node("add-to-wishlist", "button")
                        .attr("type", "button")
                        .attr("aria-label", "Add to Wishlist")
                        .text("Add to Wishlist")
                        .at(880.0, 300.0, 240.0, 44.0),
                ),
        ],
    };
    let wishlist = StateSpec {
        id: "wishlist".into(),
        url: url("/wishlist"),
        title: "Wishlist - Mini Shop".into(),
        nodes: vec![
            header(""),
            node("wl", "main")
                .at(0.0, 90.0, 1280.0, 400.0)
                .child(node("wl-title", "h1").text("Your wishlist").at(80.0, 110.0, 500.0, 40.0))
                .child(node("wl-item", "p").text("Black Wool Blazer, size L").at(80.0, 170.0, 500.0, 28.0))
                .child(
                    node("wl-continue", "a")
                        .attr("href", "/")
                        .text("Continue shopping")
                        .at(80.0, 220.0, 240.0, 30.0),
                ),
        ],
    };
    AppSpec {
        name: MINI_SHOP.into(),
        meta_description: "Mini Shop sells clothing for men, women, kids and babies.".into(),
        viewport: (1280, 720),
        initial_state: "landing".into(),
        states: vec![landing, search, results, filtered, product, wishlist],
        transitions: vec![
            tr("landing", "search-button", ActionType::Click, "search"),
            tr("landing", "wishlist-link", ActionType::Click, "wishlist"),
            TransitionSpec {
                input_pattern: Some("Blazer".into()),
                ..tr("search", "search-input", ActionType::Type, "results")
            },
            tr("results", "filter-black", ActionType::Click, "filtered"),
            tr("filtered", "p-black-wool", ActionType::Click, "product"),
            tr("product", "add-to-wishlist", ActionType::Click, "wishlist"),
        ],
    }
}

/// Two pages linking to each other.
pub fn loop_spec() -> AppSpec {
    let page = |id: &str, other: &str, label: &str| StateSpec {
        id: id.into(),
        url: format!("fixture://{LOOP_APP}/{id}"),
        title: format!("Page {id}"),
        nodes: vec![
            node("title", "h1").text(&format!("Page {id}")).at(40.0, 40.0, 400.0, 40.0),
            node("link", "a")
                .attr("href", &format!("/{other}"))
                .text(label)
                .at(40.0, 100.0, 200.0, 30.0),
        ],
    };
    AppSpec {
        name: LOOP_APP.into(),
        meta_description: "Two pages that link to each other.".into(),
        viewport: (640, 360),
        initial_state: "a".into(),
        states: vec![page("a", "b", "Next page"), page("b", "a", "Previous page")],
        transitions: vec![
            tr("a", "link", ActionType::Click, "b"),
            TransitionSpec {
                loop_edge: true,
                ..tr("b", "link", ActionType::Click, "a")
            },
        ],
    }
}

/// A single page with text only.
pub fn empty_spec() -> AppSpec {
    AppSpec {
        name: EMPTY_APP.into(),
        meta_description: "A notice page.".into(),
        viewport: (640, 360),
        initial_state: "notice".into(),
        states: vec![StateSpec {
            id: "notice".into(),
            url: format!("fixture://{EMPTY_APP}/"),
            title: "Notice".into(),
            nodes: vec![
                node("title", "h1").text("Service notice").at(40.0, 40.0, 400.0, 40.0),
                node("body", "p")
                    .text("This page has nothing to interact with.")
                    .at(40.0, 100.0, 560.0, 28.0),
            ],
        }],
        transitions: vec![],
    }
}

pub const MOTIVATING_TASK: &str = "Find a black blazer for men with L size and add to wishlist";
pub const MOTIVATING_FUNCTIONALITY: &str = "Add a specific type of clothing item in a particular size to a wishlist";

const CONTEXT: &str = "page-context analyst";
const NEXT: &str = "next-step planner";
const DESCRIBE: &str = "element describer";
const SELECT: &str = "action selector";

fn context_reply(context: &str, subs: &[&str]) -> String {
    serde_json::to_string_pretty(&serde_json::json!({ "context": context, "sub_functionalities": subs }))
        .expect("json")
}

fn describe_reply(descriptions: &[&str]) -> String {
    let m: serde_json::Map<String, serde_json::Value> = descriptions
        .iter()
        .enumerate()
        .map(|(i, d)| (i.to_string(), serde_json::Value::String(d.to_string())))
        .collect();
    serde_json::to_string_pretty(&m).expect("json")
}

struct ScriptedStep<'a> {
    context: &'a str,
    subs: &'a [&'a str],
    next_step: &'a str,
    /// Descriptions in rank order.
    descriptions: &'a [&'a str],
    choice: &'a str,
}

fn script_from(steps: &[ScriptedStep<'_>], final_context: (&str, &[&str])) -> Vec<ScriptEntry> {
    let mut out = Vec::new();
    for s in steps {
        out.push(ScriptEntry::new(Tier::Strong, CONTEXT, &context_reply(s.context, s.subs)));
        out.push(ScriptEntry::new(Tier::Strong, NEXT, s.next_step));
        out.push(ScriptEntry::new(Tier::Cheap, DESCRIBE, &describe_reply(s.descriptions)));
        out.push(ScriptEntry::new(Tier::Strong, SELECT, s.choice));
    }
    out.push(ScriptEntry::new(
        Tier::Strong,
        CONTEXT,
        &context_reply(final_context.0, final_context.1),
    ));
    out.push(ScriptEntry::new(Tier::Strong, NEXT, "Done"));
    out
}

const LANDING_CONTEXT: &str = "This page is the landing page for an online clothing store.";
const LANDING_SUBS: &[&str] = &[
    "Browse clothing categories for men, women, kids and babies.",
    "Search for products by keyword.",
    "Open the wishlist.",
    "View the shopping cart.",
    "Change the site language.",
    "Browse featured promotions in a carousel.",
];

/// Scripted model replies for the motivating task on the mini-shop.
/// Description lists and chosen indices follow the offline-embedder
/// ranking of each page.
pub fn mini_shop_script() -> Vec<ScriptEntry> {
    script_from(
        &[
            ScriptedStep {
                context: LANDING_CONTEXT,
                subs: LANDING_SUBS,
                next_step: "Click the Search button to open the search bar",
                descriptions: &[
                    "A button that opens the search bar.",
                    "A link to the men's section of the website.",
                    "A link to the women's section of the website.",
                    "A link to the kids' section of the website.",
                    "A link to the baby section of the website.",
                    "A link to the wishlist.",
                    "A link to the shopping cart.",
                    "A drop-down to change the site language.",
                    "An arrow that shows the next promotion in the carousel.",
                ],
                choice: "{\n  \"index\": 0,\n  \"action\": \"click\"\n}",
            },
            ScriptedStep {
                context: "This page is the product search page of an online clothing store.",
                subs: &[
                    "Search for products by keyword.",
                    "Close the search panel.",
                    "Open popular searches.",
                    "Browse clothing categories.",
                ],
                next_step: "Type 'Blazer' in the search bar",
                descriptions: &[
                    "An input field with search functionality.",
                    "A link to the men's section of the website.",
                    "A link to the women's section of the website.",
                    "A link to the kids' section of the website.",
                    "A link to the baby section of the website.",
                    "A button that closes the search panel.",
                    "A link that searches for linen products.",
                    "A link that searches for denim products.",
                ],
                choice: "{\"index\": 0, \"action\": \"type\", \"input\": \"Blazer\"}",
            },
            ScriptedStep {
                context: "This page lists search results for clothing products.",
                subs: &[
                    "Filter the results by colour.",
                    "Open a product page.",
                    "Browse clothing categories.",
                ],
                next_step: "Click the Black colour filter",
                descriptions: &[
                    "A filter that shows only black products.",
                    "A link to the product page of the Black Jersey Blazer.",
                    "A link to the men's section of the website.",
                    "A link to the women's section of the website.",
                    "A link to the kids' section of the website.",
                    "A link to the baby section of the website.",
                    "A filter that shows only navy products.",
                    "A filter that shows only grey products.",
                    "A link to the product page of the Navy Linen Blazer.",
                    "A link to the product page of the Grey Check Blazer.",
                ],
                choice: "{\"index\": 0, \"action\": \"click\"}",
            },
            ScriptedStep {
                context: "This page lists search results filtered to black products.",
                subs: &[
                    "Filter the results by colour.",
                    "Open a product page.",
                    "Browse clothing categories.",
                ],
                next_step: "Click the Black Wool Blazer product",
                descriptions: &[
                    "A link to the product page of the Black Wool Blazer.",
                    "A filter that shows only black products.",
                    "A link to the product page of the Black Jersey Blazer.",
                    "A link to the men's section of the website.",
                    "A link to the women's section of the website.",
                    "A link to the kids' section of the website.",
                    "A link to the baby section of the website.",
                    "A filter that shows only navy products.",
                    "A filter that shows only grey products.",
                ],
                choice: "{\"index\": 0, \"action\": \"click\"}",
            },
            ScriptedStep {
                context: "This page shows the details of a single clothing product.",
                subs: &[
                    "Choose a size.",
                    "Add the product to the shopping cart.",
                    "Add the product to the wishlist.",
                ],
                next_step: "Click the Add to Wishlist button",
                descriptions: &[
                    "A button that adds the product to the wishlist.",
                    "A button that adds the product to the shopping cart.",
                    "A link to the men's section of the website.",
                    "A link to the women's section of the website.",
                    "A link to the kids' section of the website.",
                    "A link to the baby section of the website.",
                    "A drop-down to choose the product size.",
                ],
                choice: "{\"index\": 0, \"action\": \"click\"}",
            },
        ],
        (
            "This page shows the user's wishlist.",
            &["Review saved products.", "Continue shopping."],
        ),
    )
}

/// Immediate completion: the first next-step reply is the sentinel.
pub fn immediate_done_script() -> Vec<ScriptEntry> {
    script_from(&[], (LANDING_CONTEXT, LANDING_SUBS))
}

/// A script that never says Done on the loop app, long enough for `steps`
/// actions plus the final planning call.
pub fn loop_script(steps: usize) -> Vec<ScriptEntry> {
    let mut out = Vec::new();
    for i in 0..=steps {
        out.push(ScriptEntry::new(
            Tier::Strong,
            CONTEXT,
            &context_reply("This page links to another page.", &["Follow the link."]),
        ));
        out.push(ScriptEntry::new(Tier::Strong, NEXT, "Click the page link"));
        if i < steps {
            out.push(ScriptEntry::new(
                Tier::Cheap,
                DESCRIBE,
                &describe_reply(&["A link to the other page."]),
            ));
            out.push(ScriptEntry::new(Tier::Strong, SELECT, "{\"index\": 0, \"action\": \"click\"}"));
        }
    }
    out
}

/// Planning replies for a page without actionables.
pub fn empty_page_script() -> Vec<ScriptEntry> {
    vec![
        ScriptEntry::new(
            Tier::Strong,
            CONTEXT,
            &context_reply("This page shows a service notice.", &["Read the notice."]),
        ),
        ScriptEntry::new(Tier::Strong, NEXT, "Click the continue link"),
    ]
}

pub fn task(id: &str, app: &str, description: &str) -> TaskSpec {
    TaskSpec {
        id: id.into(),
        website_name: app.into(),
        start_url: format!("fixture://{app}/"),
        description: description.into(),
        kind: TaskKind::Concrete,
        reference_length: None,
        parameters: Vec::new(),
    }
}

pub fn mini_shop_task() -> TaskSpec {
    TaskSpec {
        reference_length: Some(5),
        parameters: ["black", "blazer", "men", "L"].map(String::from).to_vec(),
        ..task("mini-shop-wishlist", MINI_SHOP, MOTIVATING_TASK)
    }
}

/// Writes every bundled app, script and task file below `root`:
/// `apps/<app>/`, `scripts/<name>.json`, `tasks/<name>.json`.
pub fn write_bundle(root: &Path) -> Result<(), FixtureError> {
    let apps = root.join("apps");
    for spec in [mini_shop_spec(), loop_spec(), empty_spec()] {
        generate_fixture_app(&spec, &apps)?;
    }
    let scripts = root.join("scripts");
    io(std::fs::create_dir_all(&scripts), &scripts)?;
    for (name, script) in [
        ("mini_shop_wishlist", mini_shop_script()),
        ("immediate_done", immediate_done_script()),
        ("loop_never_done", loop_script(20)),
        ("empty_page", empty_page_script()),
    ] {
        write_json(&scripts.join(format!("{name}.json")), &script)?;
    }
    let tasks = root.join("tasks");
    io(std::fs::create_dir_all(&tasks), &tasks)?;
    write_json(&tasks.join("mini_shop.json"), &vec![mini_shop_task()])?;
    write_json(
        &tasks.join("loop.json"),
        &vec![task("loop-forever", LOOP_APP, "Keep following the page link")],
    )?;
    write_json(
        &tasks.join("empty.json"),
        &vec![task("empty-page", EMPTY_APP, "Continue past the notice")],
    )?;
    Ok(())
}

/// Directory of the committed bundle in this crate.
pub fn bundled_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}
