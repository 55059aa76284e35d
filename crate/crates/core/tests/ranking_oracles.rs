mod support;

use std::collections::HashMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use webnav::choices::{nearest_neighbours, score_choices, RankedChoices};
use webnav::decider::{ground, select_action, Decision};
use webnav::domain::{ActionableElement, BBox, NavConfig, NextStep, TextBlock};
use webnav::embeddings::{cosine_similarity, EmbedError, Embedder, EmbeddingVector};
use webnav::llm::{Gateway, ScriptEntry, ScriptedProvider, Tier};
use webnav::planner::{retrieve_similar, ReferenceDb, ReferenceEntry};
use webnav::raster::Canvas;

use support::oracles;

/// Looks vectors up in a table, so oracle and production see the same inputs.
struct TableEmbedder(HashMap<String, Vec<f64>>);

impl Embedder for TableEmbedder {
    fn id(&self) -> String {
        "table".into()
    }
    fn embed_raw(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        self.0
            .get(text)
            .cloned()
            .map(EmbeddingVector::new)
            .ok_or_else(|| EmbedError::ProviderUnreachable(format!("no vector for {text:?}")))
    }
}

fn element(i: usize, bbox: BBox) -> ActionableElement {
    ActionableElement {
        ordinal: i,
        tag_name: "button".into(),
        outer_html: format!("<button>e{i}</button>"),
        cleaned_html: format!("<button>e{i}</button>"),
        inner_text: format!("e{i}"),
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

/// Small-integer vectors make exact ties common.
fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2i32..=3, dim)
        .prop_map(|v| v.into_iter().map(f64::from).collect::<Vec<_>>())
        .prop_filter("non-zero", |v| v.iter().any(|x| *x != 0.0))
}

fn case_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<u32>, usize)> {
    (1usize..25).prop_flat_map(|n| {
        (
            prop::collection::vec(vec_strategy(4), n),
            vec_strategy(4),
            prop::collection::vec(prop_oneof![3 => Just(0u32), 1 => 1u32..4], n),
            1usize..30,
        )
    })
}

fn setup(keys: &[Vec<f64>], query: &[f64]) -> (Vec<ActionableElement>, TableEmbedder) {
    let mut table: HashMap<String, Vec<f64>> = HashMap::new();
    table.insert("query".into(), query.to_vec());
    let elements = keys
        .iter()
        .enumerate()
        .map(|(i, k)| {
            table.insert(format!("e{i}"), k.clone());
            element(i, BBox::new(0.0, i as f64 * 10.0, 10.0, 10.0))
        })
        .collect();
    (elements, TableEmbedder(table))
}

fn counts_map(counts: &[u32]) -> HashMap<String, u32> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(i, c)| (format!("/html/body/button[{}]", i + 1), *c))
        .collect()
}

fn ranked_pairs(r: &RankedChoices) -> Vec<(String, f64)> {
    r.items.iter().map(|e| (e.xpath.clone(), e.score)).collect()
}

proptest! {
    #[test]
    fn ranking_matches_exhaustive_oracle((keys, query, counts, top_k) in case_strategy()) {
        let (elements, emb) = setup(&keys, &query);
        let cfg = NavConfig { top_k, ..NavConfig::default() };
        let ranked = score_choices(&elements, &NextStep::Step("query".into()), &counts_map(&counts), &emb, &cfg).unwrap();
        let inputs: Vec<oracles::RankInput> = elements
            .iter()
            .zip(&keys)
            .zip(&counts)
            .map(|((e, k), c)| oracles::RankInput { doc_pos: e.ordinal, xpath: &e.xpath, key: k.clone(), selected: *c })
            .collect();
        let expected = oracles::rank(&inputs, &query, cfg.penalty_factor, top_k);
        let got = ranked_pairs(&ranked);
        prop_assert_eq!(got.len(), expected.len());
        for ((gx, gs), (ex, es)) in got.iter().zip(&expected) {
            prop_assert_eq!(gx, ex);
            prop_assert!((gs - es).abs() < 1e-12);
        }
        for (i, e) in ranked.items.iter().enumerate() {
            prop_assert_eq!(e.ordinal, i);
        }
    }

    #[test]
    fn ranking_ignores_input_order((keys, query, counts, top_k) in case_strategy(), seed in any::<u64>()) {
        let (elements, emb) = setup(&keys, &query);
        let cfg = NavConfig { top_k, ..NavConfig::default() };
        let step = NextStep::Step("query".into());
        let counts = counts_map(&counts);
        let base = score_choices(&elements, &step, &counts, &emb, &cfg).unwrap();
        let mut shuffled = elements.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let again = score_choices(&shuffled, &step, &counts, &emb, &cfg).unwrap();
        prop_assert_eq!(ranked_pairs(&base), ranked_pairs(&again));
    }

    #[test]
    fn selecting_an_element_never_promotes_it((keys, query, _counts, _k) in case_strategy(), pick in any::<prop::sample::Index>()) {
        let (elements, emb) = setup(&keys, &query);
        let n = elements.len();
        let cfg = NavConfig { top_k: n, ..NavConfig::default() };
        let step = NextStep::Step("query".into());
        let target = elements[pick.index(n)].xpath.clone();
        let fresh = score_choices(&elements, &step, &HashMap::new(), &emb, &cfg).unwrap();
        let penalised = score_choices(&elements, &step, &HashMap::from([(target.clone(), 1)]), &emb, &cfg).unwrap();
        let pos = |r: &RankedChoices| r.items.iter().position(|e| e.xpath == target).unwrap();
        let score = |r: &RankedChoices| r.items[pos(r)].score;
        prop_assert!(pos(&penalised) >= pos(&fresh));
        prop_assert!((score(&penalised) - cfg.penalty_factor * score(&fresh)).abs() < 1e-12);
    }

    #[test]
    fn neighbours_match_brute_force(
        boxes in prop::collection::vec((0u32..50, 0u32..50, 1u32..10, 1u32..10, "[a-c ]{0,3}"), 0..20),
        threshold in 0.0f64..80.0,
    ) {
        let target = element(0, BBox::new(20.0, 20.0, 5.0, 5.0));
        let mut blocks: Vec<TextBlock> = boxes
            .iter()
            .enumerate()
            .map(|(i, (x, y, w, h, t))| TextBlock {
                xpath: format!("/html/body/p[{}]", i + 1),
                text: t.clone(),
                bbox: BBox::new(*x as f64, *y as f64, *w as f64, *h as f64),
            })
            .collect();
        blocks.push(TextBlock { xpath: format!("{}/span[1]", target.xpath), text: "own".into(), bbox: target.bbox });
        let got = nearest_neighbours(&target, &blocks, 5, threshold);
        let cands: Vec<_> = blocks
            .iter()
            .map(|b| (b.xpath.clone(), b.bbox.x, b.bbox.y, b.bbox.width, b.bbox.height, b.text.clone()))
            .collect();
        let own = format!("{}/", target.xpath);
        let expected = oracles::neighbours((20.0, 20.0, 5.0, 5.0), &cands, &|x| x.starts_with(&own), 5, threshold);
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn retrieval_matches_brute_force(
        entries in prop::collection::vec(vec_strategy(3), 1..12),
        query in vec_strategy(3),
        k in 1usize..15,
    ) {
        let mut table = HashMap::from([("q".to_string(), query.clone())]);
        let mut db = ReferenceDb::new("table");
        for (i, v) in entries.iter().enumerate() {
            table.insert(format!("a{i}"), v.clone());
            db.entries.push(ReferenceEntry {
                concrete: format!("c{i}"),
                abstract_text: format!("a{i}"),
                abstract_embedding: EmbeddingVector::new(v.clone()),
            });
        }
        let got: Vec<String> = retrieve_similar("q", &db, &TableEmbedder(table), k)
            .unwrap()
            .into_iter()
            .map(|r| r.entry.concrete)
            .collect();
        let expected: Vec<String> = oracles::retrieve(&entries, &query, k).into_iter().map(|i| format!("c{i}")).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn no_invented_xpath_is_grounded(
        first in "\\PC{0,40}|\\{\"index\": -?[0-9]{1,3}, \"action\": \"(click|type|select|hover)\"(, \"input\": (\"x\"|[0-9]))?\\}",
        second in "\\{\"index\": -?[0-9]{1,2}, \"action\": \"(click|type|select)\"(, \"input\": (\"x\"|[0-9]))?\\}",
        n in 1usize..6,
    ) {
        let items: Vec<ActionableElement> = (0..n).map(|i| element(i, BBox::new(0.0, 0.0, 5.0, 5.0))).collect();
        let ranked = RankedChoices { items, next_step: NextStep::Step("go".into()) };
        let provider = Arc::new(ScriptedProvider::new(vec![
            ScriptEntry::new(Tier::Strong, "action selector", &first),
            ScriptEntry::new(Tier::Strong, "action selector", &first),
            ScriptEntry::new(Tier::Strong, "action selector", &first),
            ScriptEntry::new(Tier::Strong, "action selector", &second),
        ]));
        let gw = Gateway::new(provider);
        let shot = Canvas::new(4, 4, [0, 0, 0]).to_screenshot();
        let step = NextStep::Step("go".into());
        let d = Decision { task: "t", next_step: Some(&step), history: &[], ranked: &ranked, annotated: &shot, temperature: 0.0 };
        if let Ok(choice) = select_action(&gw, &d) {
            let action = ground(&choice, &ranked);
            prop_assert!(ranked.contains_xpath(&action.element_xpath));
        }
    }
}

#[test]
fn cosine_agrees_with_oracle_and_frozen_value() {
    let a = [1.0, 2.0, 3.0];
    let b = [4.0, 5.0, 6.0];
    let got = cosine_similarity(&EmbeddingVector::new(a.to_vec()), &EmbeddingVector::new(b.to_vec())).unwrap();
    // 32 / sqrt(14 * 77)
    assert!((got - 0.974_631_846_197_076_3).abs() < 1e-9);
    assert!((got - oracles::cosine(&a, &b)).abs() < 1e-15);
}
