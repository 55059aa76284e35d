//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod support;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use webnav::browser::{open_session, BackendConfig};
use webnav::choices::{attach_neighbors, describe_choices, preprocess_html, score_choices, RankedChoices};
use webnav::decider::{ground, select_action, Decision, DeciderError};
use webnav::domain::{ActionInput, ActionType, ActionableElement, BBox, NavConfig, NextStep, Termination, TextBlock};
use webnav::embeddings::{Embedder, OfflineEmbedder};
use webnav::evalkit::{compute_tos_exact, replay, success_rate_exact, StepStatus, TaskOutcome};
use webnav::llm::{ChatProvider, CompletionRequest, Gateway, LlmError, ScriptEntry, ScriptedProvider, Tier};
use webnav::planner::{retrieve_similar, ReferenceDb, ReferenceEntry};
use webnav::raster::Canvas;

use support::{apps_root, load_script, load_tasks, oracles, run};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

const WORDS: &[&str] = &[
    "search", "cart", "black", "blazer", "size", "men", "women", "filter", "add", "wishlist", "home", "login",
    "account", "price", "sort", "next", "page", "help", "close", "menu",
];

fn phrase(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=4);
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn element(i: usize, text: &str, bbox: BBox) -> ActionableElement {
    ActionableElement {
        ordinal: i,
        tag_name: "button".into(),
        outer_html: format!("<button>{text}</button>"),
        cleaned_html: format!("<button>{text}</button>"),
        inner_text: text.into(),
        xpath: format!("/html/body/button[{}]", i + 1),
        bbox,
        neighbour_texts: vec![],
        select_options: None,
        input_type: None,
        content_editable: false,
        description: None,
        score: 0.0,
        previously_selected_count: 0,
    }
}

fn unit_box() -> BBox {
    BBox::new(0.0, 0.0, 10.0, 10.0)
}

fn c1_end_to_end() -> Outcome {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let task = &load_tasks("mini_shop")[0];
    let started = Instant::now();
    let r = run(load_script("mini_shop_wishlist"), task, NavConfig::default(), out.path());
    let secs = started.elapsed().as_secs_f64();
    let t = &r.trajectory;
    ensure(t.termination == Termination::Done, format!("termination {}", t.termination))?;
    let flow: Vec<(ActionType, Option<ActionInput>)> = t.records.iter().map(|a| (a.action_type, a.input.clone())).collect();
    let want = vec![
        (ActionType::Click, None),
        (ActionType::Type, Some(ActionInput::Text("Blazer".into()))),
        (ActionType::Click, None),
        (ActionType::Click, None),
        (ActionType::Click, None),
    ];
    ensure(flow == want, format!("flow {flow:?}"))?;
    let htmls = ["Search", "search", "filter-by-colour", "Black Wool Blazer", "Add to Wishlist"];
    for (rec, h) in t.records.iter().zip(htmls) {
        ensure(rec.element_outer_html.contains(h), format!("record for {h} is {}", rec.element_outer_html))?;
    }
    ensure(secs < 10.0, format!("took {secs:.2}s"))?;
    let json: Value = serde_json::from_str(&t.to_json()).map_err(|e| e.to_string())?;
    for rec in json["records"].as_array().ok_or("no records")? {
        let keys: Vec<&String> = rec.as_object().ok_or("record not object")?.keys().collect();
        let allowed = ["element", "xpath", "action", "input"];
        ensure(keys.iter().all(|k| allowed.contains(&k.as_str())), format!("keys {keys:?}"))?;
        ensure(["element", "xpath", "action"].iter().all(|k| rec.get(*k).is_some()), "missing key")?;
    }
    Ok(format!("5 actions, done, {secs:.2}s"))
}

fn c2_stopping() -> Outcome {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let shop = &load_tasks("mini_shop")[0];
    let r = run(load_script("immediate_done"), shop, NavConfig::default(), &out.path().join("a"));
    ensure(
        r.trajectory.termination == Termination::Done && r.trajectory.records.is_empty(),
        "immediate done",
    )?;
    let r = run(load_script("loop_never_done"), &load_tasks("loop")[0], NavConfig::default(), &out.path().join("b"));
    ensure(
        r.trajectory.termination == Termination::StepLimit && r.trajectory.records.len() == 20,
        format!("loop: {} after {}", r.trajectory.termination, r.trajectory.records.len()),
    )?;
    let r = run(load_script("empty_page"), &load_tasks("empty")[0], NavConfig::default(), &out.path().join("c"));
    ensure(
        r.trajectory.termination == Termination::NoActions && r.trajectory.records.is_empty(),
        "empty page",
    )?;
    Ok("done/0, step_limit/20, no_actions/0".into())
}

/// Key text as the oracle sees it: inner text, else cleaned HTML.
fn oracle_key(e: &ActionableElement) -> String {
    if e.inner_text.trim().is_empty() {
        e.cleaned_html.clone()
    } else {
        e.inner_text.clone()
    }
}

fn c3_ranking_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let emb = OfflineEmbedder;
    let cfg = NavConfig::default();
    let mut mismatches = 0;
    for case in 0..200 {
        let n = rng.random_range(1..=150);
        let elements: Vec<ActionableElement> = (0..n)
            .map(|i| {
                let text = if rng.random_bool(0.1) { String::new() } else { phrase(&mut rng) };
                element(i, &text, unit_box())
            })
            .collect();
        let mut counts: HashMap<String, u32> = HashMap::new();
        for e in &elements {
            if rng.random_bool(0.15) {
                counts.insert(e.xpath.clone(), rng.random_range(1..3));
            }
        }
        let query = phrase(&mut rng);
        let ranked = score_choices(&elements, &NextStep::Step(query.clone()), &counts, &emb, &cfg)
            .map_err(|e| e.to_string())?;
        let qv = emb.embed(&query).map_err(|e| e.to_string())?.values().to_vec();
        let mut inputs = Vec::new();
        for e in &elements {
            inputs.push(oracles::RankInput {
                doc_pos: e.ordinal,
                xpath: &e.xpath,
                key: emb.embed(&oracle_key(e)).map_err(|e| e.to_string())?.values().to_vec(),
                selected: counts.get(&e.xpath).copied().unwrap_or(0),
            });
        }
        let expected: Vec<String> = oracles::rank(&inputs, &qv, 0.5, 40).into_iter().map(|(x, _)| x).collect();
        let got: Vec<String> = ranked.items.iter().map(|e| e.xpath.clone()).collect();
        if got != expected || got.len() != n.min(40) {
            mismatches += 1;
            eprintln!("case {case}: mismatch");
        }
    }
    ensure(mismatches == 0, format!("{mismatches} mismatches"))?;
    Ok("200 sets, 0 mismatches".into())
}

fn c4_penalty() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let emb = OfflineEmbedder;
    let cfg = NavConfig::default();
    let mut checked = 0;
    while checked < 200 {
        let text = phrase(&mut rng);
        let query = phrase(&mut rng);
        let raw = oracles::cosine(
            emb.embed(&text).map_err(|e| e.to_string())?.values(),
            emb.embed(&query).map_err(|e| e.to_string())?.values(),
        )
        .clamp(0.0, 1.0);
        if raw <= 0.0 {
            continue;
        }
        // The selected twin comes first in document order, so only the
        // penalty can put the unselected one ahead.
        let els = vec![element(0, &text, unit_box()), element(1, &text, unit_box())];
        let counts = HashMap::from([(els[0].xpath.clone(), 1)]);
        let r = score_choices(&els, &NextStep::Step(query), &counts, &emb, &cfg).map_err(|e| e.to_string())?;
        ensure(r.items[0].xpath == els[1].xpath, "selected element not demoted")?;
        ensure((r.items[1].score - 0.5 * raw).abs() < 1e-12, format!("penalised {} raw {raw}", r.items[1].score))?;
        ensure((r.items[0].score - raw).abs() < 1e-12, "unselected score changed")?;
        checked += 1;
    }
    Ok("200 tied pairs, selected twin always second at half score".into())
}

fn c5_retrieval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let emb = OfflineEmbedder;
    for case in 0..100 {
        let n = rng.random_range(1..=30);
        let mut db = ReferenceDb::new(emb.id());
        let mut vecs = Vec::new();
        for i in 0..n {
            let a = phrase(&mut rng);
            let v = emb.embed(&a).map_err(|e| e.to_string())?;
            vecs.push(v.values().to_vec());
            db.entries.push(ReferenceEntry {
                concrete: format!("c{i}"),
                abstract_text: a,
                abstract_embedding: v,
            });
        }
        let q = phrase(&mut rng);
        let got: Vec<String> = retrieve_similar(&q, &db, &emb, 3)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|r| r.entry.concrete)
            .collect();
        let qv = emb.embed(&q).map_err(|e| e.to_string())?.values().to_vec();
        let expected: Vec<String> = oracles::retrieve(&vecs, &qv, 3).into_iter().map(|i| format!("c{i}")).collect();
        ensure(got == expected, format!("case {case}: {got:?} vs {expected:?}"))?;
        let pick = rng.random_range(0..n);
        let same = retrieve_similar(&db.entries[pick].abstract_text.clone(), &db, &emb, 3).map_err(|e| e.to_string())?;
        ensure((same[0].similarity - 1.0).abs() < 1e-9, "identical text not at similarity 1")?;
        ensure(same[0].entry.abstract_text == db.entries[pick].abstract_text, "identical text not first")?;
    }
    Ok("100 DBs match brute force; identical query first at 1.0".into())
}

fn c6_neighbours() -> Outcome {
    let block = |i: usize, x: f64, y: f64, text: &str| TextBlock {
        xpath: format!("/html/body/p[{i}]"),
        text: text.into(),
        bbox: BBox::new(x, y, 10.0, 10.0),
    };
    // (target bbox, blocks, threshold)
    let layouts: Vec<(BBox, Vec<TextBlock>, f64)> = vec![
        (
            BBox::new(100.0, 100.0, 10.0, 10.0),
            vec![
                block(1, 100.0, 80.0, "above"),
                block(2, 130.0, 100.0, "right"),
                block(3, 100.0, 150.0, "far below"),
                block(4, 60.0, 100.0, "left"),
                block(5, 110.0, 110.0, "diagonal"),
                block(6, 100.0, 125.0, "below"),
                block(7, 400.0, 400.0, "out of range"),
                block(8, 95.0, 95.0, "   "),
            ],
            200.0,
        ),
        (
            BBox::new(0.0, 0.0, 20.0, 20.0),
            vec![block(1, 500.0, 0.0, "a"), block(2, 0.0, 500.0, "b")],
            100.0,
        ),
        (
            BBox::new(50.0, 50.0, 10.0, 10.0),
            vec![
                block(1, 50.0, 30.0, "n"),
                block(2, 70.0, 50.0, "e"),
                block(3, 50.0, 70.0, "s"),
                block(4, 30.0, 50.0, "w"),
                TextBlock {
                    xpath: "/html/body/button[1]/span[1]".into(),
                    text: "own label".into(),
                    bbox: BBox::new(50.0, 50.0, 10.0, 10.0),
                },
            ],
            20.0,
        ),
    ];
    let mut sizes = Vec::new();
    for (bbox, blocks, threshold) in &layouts {
        let target = element(0, "x", *bbox);
        let got = attach_neighbors(&target, blocks, 5, *threshold).neighbour_texts;
        let cands: Vec<_> = blocks
            .iter()
            .map(|b| (b.xpath.clone(), b.bbox.x, b.bbox.y, b.bbox.width, b.bbox.height, b.text.clone()))
            .collect();
        let own = format!("{}/", target.xpath);
        let expected = oracles::neighbours(
            (bbox.x, bbox.y, bbox.width, bbox.height),
            &cands,
            &|x| x == target.xpath || x.starts_with(&own),
            5,
            *threshold,
        );
        ensure(got == expected, format!("{got:?} vs {expected:?}"))?;
        sizes.push(got.len());
    }
    ensure(sizes == [5, 0, 4], format!("sizes {sizes:?}"))?;
    Ok("3 layouts match the distance oracle; sizes [5, 0, 4]".into())
}

fn c7_preprocessing() -> Outcome {
    let long = format!("<p>{}</p>", "x".repeat(9_993));
    let corpus: Vec<(&str, String, usize, String)> = vec![
        ("identity", "<a href=\"/cart\" class=\"nav\">Cart</a>".into(), 2000, "<a href=\"/cart\" class=\"nav\">Cart</a>".into()),
        ("style attr", "<button style=\"color:red\" id=\"b\">Go</button>".into(), 2000, "<button id=\"b\">Go</button>".into()),
        (
            "svg child",
            "<button><svg viewBox=\"0 0 8 8\"><path d=\"M0 0\"/></svg>Search</button>".into(),
            2000,
            "<button>Search</button>".into(),
        ),
        ("style child", "<div><style>.a{b:c}</style>Menu</div>".into(), 2000, "<div>Menu</div>".into()),
        ("bare path", "<span><path d=\"M1\"></path>Icon</span>".into(), 2000, "<span>Icon</span>".into()),
        (
            "data attrs",
            "<a data-id=\"7\" data-test=\"nav-home\" data-track='x' href=\"/\">Home</a>".into(),
            2000,
            "<a data-test=\"nav-home\" href=\"/\">Home</a>".into(),
        ),
        (
            "srcset",
            "<img src=\"a.png\" srcset=\"a2.png 2x\" alt=\"logo\">".into(),
            2000,
            "<img src=\"a.png\" alt=\"logo\">".into(),
        ),
        ("truncation", long.clone(), 2000, long[..2000].to_string()),
        ("clean then truncate", "<b style=\"x\">abcdef</b>".into(), 6, "<b>abc".into()),
        (
            "nested",
            "<label>Size<select style=\"w\"><option>S</option></select><svg><g><path/></g></svg></label>".into(),
            2000,
            "<label>Size<select><option>S</option></select></label>".into(),
        ),
    ];
    for (name, input, limit, want) in &corpus {
        let got = preprocess_html(input, *limit);
        ensure(&got == want, format!("{name}: got {got:?}"))?;
        ensure(preprocess_html(&got, *limit) == got, format!("{name}: not idempotent"))?;
    }
    ensure(preprocess_html(&long, 2000).chars().count() == 2000, "long fragment length")?;
    Ok(format!("{} fragments bit-exact and idempotent", corpus.len()))
}

/// Answers every description request for exactly the ordinals it was sent,
/// recording how many there were.
struct CountingDescriber(Mutex<Vec<usize>>);

impl ChatProvider for CountingDescriber {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let text = request.user_text();
        let start = text.find('{').ok_or_else(|| LlmError::InvalidRequest("no elements".into()))?;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        let elements = match stream.next() {
            Some(Ok(Value::Object(m))) => m,
            _ => return Err(LlmError::InvalidRequest("elements not JSON".into())),
        };
        self.0.lock().unwrap().push(elements.len());
        let reply: serde_json::Map<String, Value> =
            elements.keys().map(|k| (k.clone(), Value::String(format!("Element {k}.")))).collect();
        Ok(Value::Object(reply).to_string())
    }
}

fn c8_batching() -> Outcome {
    let items: Vec<ActionableElement> = (0..23).map(|i| element(i, &format!("item {i}"), unit_box())).collect();
    let ranked = RankedChoices { items, next_step: NextStep::Step("go".into()) };
    let provider = Arc::new(CountingDescriber(Mutex::new(Vec::new())));
    let gw = Gateway::new(provider.clone());
    let described = describe_choices(&ranked, &gw, &NavConfig::default()).map_err(|e| e.to_string())?;
    let sizes = provider.0.lock().unwrap().clone();
    ensure(sizes == [10, 10, 3], format!("batch sizes {sizes:?}"))?;
    ensure(described.items[22].description.as_deref() == Some("Element 22."), "description not attached")?;

    let off = NavConfig { enable_descriptions: false, ..NavConfig::default() };
    let provider = Arc::new(CountingDescriber(Mutex::new(Vec::new())));
    let gw = Gateway::new(provider.clone());
    let plain = describe_choices(&ranked, &gw, &off).map_err(|e| e.to_string())?;
    ensure(provider.0.lock().unwrap().is_empty() && gw.transcript().is_empty(), "calls with descriptions off")?;
    ensure(plain.items.iter().all(|e| e.description.as_deref() == Some(e.inner_text.as_str())), "fallback text")?;
    Ok("[10, 10, 3]; disabled → 0 calls, element texts".into())
}

fn two_dp(r: &BigRational) -> String {
    // Round half up at 2 decimals using integer arithmetic.
    let hundredths = (r * BigRational::from_integer(BigInt::from(100)) + BigRational::new(1.into(), 2.into())).floor();
    let v = hundredths.to_integer();
    let (q, m) = (&v / 100, &v % 100);
    format!("{q}.{m:0>2}")
}

fn c9_metrics() -> Outcome {
    let concrete = success_rate_exact(46, 104).map_err(|e| e.to_string())?;
    let abstracted = success_rate_exact(40, 104).map_err(|e| e.to_string())?;
    ensure(two_dp(&concrete) == "44.23", format!("46/104 → {}", two_dp(&concrete)))?;
    ensure(two_dp(&abstracted) == "38.46", format!("40/104 → {}", two_dp(&abstracted)))?;
    let table = [
        (true, 5, 5),
        (true, 10, 5),
        (false, 4, 4),
        (true, 3, 4),
        (true, 8, 6),
        (false, 20, 6),
        (true, 9, 3),
        (true, 7, 7),
        (false, 0, 5),
        (true, 12, 8),
    ];
    let outcomes: Vec<TaskOutcome> = table
        .iter()
        .enumerate()
        .map(|(i, (ok, generated, reference))| TaskOutcome {
            task_id: format!("t{i}"),
            success: *ok,
            generated_length: *generated,
            reference_length: Some(*reference),
        })
        .collect();
    // 1 + 1/2 + 0 + 1 + 3/4 + 0 + 1/3 + 1 + 0 + 2/3 = 21/4 over 10 tasks.
    let tos = compute_tos_exact(&outcomes).map_err(|e| e.to_string())?;
    ensure(tos == BigRational::new(21.into(), 40.into()), format!("tos {tos}"))?;
    let failures_only: Vec<TaskOutcome> = outcomes.iter().filter(|o| !o.success).cloned().collect();
    ensure(compute_tos_exact(&failures_only).map_err(|e| e.to_string())? == BigRational::from_integer(0.into()), "failures")?;
    Ok(format!("SR 44.23 / 38.46, TOS {tos}"))
}

fn c10_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let task = &load_tasks("mini_shop")[0];
    let a = run(load_script("mini_shop_wishlist"), task, NavConfig::default(), &dir.path().join("run_a"));
    let b = run(load_script("mini_shop_wishlist"), task, NavConfig::default(), &dir.path().join("run_b"));
    let ja = std::fs::read(dir.path().join("run_a/trajectory.json")).map_err(|e| e.to_string())?;
    let jb = std::fs::read(dir.path().join("run_b/trajectory.json")).map_err(|e| e.to_string())?;
    ensure(ja == jb, "trajectory JSON differs between runs")?;
    let backend = BackendConfig::Fixture { root: apps_root() };
    let mut session = open_session(&task.start_url, &backend).map_err(|e| e.to_string())?;
    let report = replay(&a.trajectory, &mut session, &dir.path().join("replay")).map_err(|e| e.to_string())?;
    ensure(report.all_executed(), "not all steps executed")?;
    ensure(report.final_state == a.final_state && b.final_state == a.final_state, "final state differs")?;
    let mut broken = a.trajectory.clone();
    broken.records[3].element_xpath = "/html/body/nope[1]".into();
    let mut session = open_session(&task.start_url, &backend).map_err(|e| e.to_string())?;
    let report = replay(&broken, &mut session, &dir.path().join("broken")).map_err(|e| e.to_string())?;
    let statuses: Vec<StepStatus> = report.steps.iter().map(|s| s.status).collect();
    use StepStatus::*;
    ensure(statuses == [Executed, Executed, Executed, Failed, Skipped], format!("{statuses:?}"))?;
    Ok("replay executes all 5, corrupt step 3 fails then skips, runs byte-identical".into())
}

fn c11_guardrails() -> Outcome {
    let items: Vec<ActionableElement> = (0..4).map(|i| element(i, &format!("b{i}"), unit_box())).collect();
    let ranked = RankedChoices { items, next_step: NextStep::Step("go".into()) };
    let shot = Canvas::new(4, 4, [0, 0, 0]).to_screenshot();
    let step = NextStep::Step("go".into());
    let decide = |replies: &[&str]| {
        let script = replies.iter().map(|r| ScriptEntry::new(Tier::Strong, "action selector", r)).collect();
        let gw = Gateway::new(Arc::new(ScriptedProvider::new(script)));
        let d = Decision { task: "t", next_step: Some(&step), history: &[], ranked: &ranked, annotated: &shot, temperature: 0.0 };
        let r = select_action(&gw, &d);
        (r, gw.transcript().len())
    };
    let (r, calls) = decide(&[r#"{"index": 9, "action": "click"}"#, r#"{"index": 12, "action": "click"}"#, r#"{"index": 0, "action": "click"}"#]);
    ensure(matches!(r, Err(DeciderError::IndexOutOfRange { .. })) && calls == 2, format!("out of range: {r:?}, {calls} calls"))?;
    let (r, calls) = decide(&[r#"{"index": 1, "action": "hover"}"#, r#"{"index": 1, "action": "drag"}"#, r#"{"index": 0, "action": "click"}"#]);
    ensure(matches!(r, Err(DeciderError::IllegalActionType(_))) && calls == 2, format!("illegal type: {r:?}, {calls} calls"))?;
    let (r, calls) = decide(&[r#"{"index": 9, "action": "click"}"#, r#"{"index": 2, "action": "click"}"#]);
    ensure(r.as_ref().map(|c| c.index).ok() == Some(2) && calls == 2, "correction accepted")?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let actions = ["click", "type", "select", "hover", "CLICK", ""];
    let mut grounded = 0;
    for _ in 0..500 {
        let replies: Vec<String> = (0..4)
            .map(|_| match rng.random_range(0..4) {
                0 => "not json at all".to_string(),
                1 => format!(r#"{{"index": "{}", "action": "click"}}"#, rng.random_range(-3..8)),
                _ => format!(
                    r#"{{"index": {}, "action": "{}", "input": "x"}}"#,
                    rng.random_range(-3i64..8),
                    actions[rng.random_range(0..actions.len())]
                ),
            })
            .collect();
        let refs: Vec<&str> = replies.iter().map(String::as_str).collect();
        if let (Ok(choice), _) = decide(&refs) {
            let action = ground(&choice, &ranked);
            ensure(ranked.contains_xpath(&action.element_xpath), format!("invented xpath {}", action.element_xpath))?;
            grounded += 1;
        }
    }
    Ok(format!("one correction then failure; 500 adversarial scripts, {grounded} grounded, 0 invented xpaths"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("end-to-end fixture run", c1_end_to_end),
        ("stopping criteria", c2_stopping),
        ("ranking oracle equivalence", c3_ranking_oracle),
        ("penalty semantics", c4_penalty),
        ("retrieval", c5_retrieval),
        ("neighbour extraction", c6_neighbours),
        ("preprocessing", c7_preprocessing),
        ("description batching", c8_batching),
        ("metrics arithmetic", c9_metrics),
        ("replay determinism", c10_replay),
        ("guardrails", c11_guardrails),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", i + 1)
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
