//! Exhaustive reference implementations. Each recomputes its answer from
//! first principles: own cosine, full sort, pairwise distances.

use std::collections::HashMap;

/// Plain dot-product cosine over f64, no clamping.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Scored item for the ranking oracle: document position, key embedding,
/// selection count.
pub struct RankInput<'a> {
    pub doc_pos: usize,
    pub xpath: &'a str,
    pub key: Vec<f64>,
    pub selected: u32,
}

/// Every element is scored, then the whole list is sorted by a total order
/// (score desc, document position asc) with a stable insertion sort, and the
/// first `top_k` xpaths are returned with their scores.
pub fn rank(items: &[RankInput<'_>], query: &[f64], penalty: f64, top_k: usize) -> Vec<(String, f64)> {
    let mut scored: Vec<(f64, usize, String)> = items
        .iter()
        .map(|i| {
            let mut s = cosine(&i.key, query);
            if s < 0.0 {
                s = 0.0;
            }
            if s > 1.0 {
                s = 1.0;
            }
            if i.selected > 0 {
                s *= penalty;
            }
            (s, i.doc_pos, i.xpath.to_string())
        })
        .collect();
    for j in 1..scored.len() {
        let mut k = j;
        while k > 0 && before(&scored[k], &scored[k - 1]) {
            scored.swap(k, k - 1);
            k -= 1;
        }
    }
    scored.into_iter().take(top_k).map(|(s, _, x)| (x, s)).collect()
}

fn before(a: &(f64, usize, String), b: &(f64, usize, String)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Cosine bounded to its mathematical range; parallel vectors can otherwise
/// land one ulp above 1.
fn bounded_cosine(a: &[f64], b: &[f64]) -> f64 {
    cosine(a, b).max(-1.0).min(1.0)
}

/// Indices of the `k` entries most similar to `query`, ties by index.
pub fn retrieve(entries: &[Vec<f64>], query: &[f64], k: usize) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..entries.len()).collect();
    let mut out = Vec::new();
    while out.len() < k && !remaining.is_empty() {
        let mut best = 0;
        for (pos, &i) in remaining.iter().enumerate() {
            let bi = remaining[best];
            if bounded_cosine(&entries[i], query) > bounded_cosine(&entries[bi], query) {
                best = pos;
            }
        }
        out.push(remaining.remove(best));
    }
    out
}

/// Centre-distance neighbours: candidates are (id, x, y, w, h, text).
pub fn neighbours(
    target: (f64, f64, f64, f64),
    candidates: &[(String, f64, f64, f64, f64, String)],
    excluded: &dyn Fn(&str) -> bool,
    count: usize,
    threshold: f64,
) -> Vec<String> {
    let (tx, ty) = (target.0 + target.2 / 2.0, target.1 + target.3 / 2.0);
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| !excluded(&c.0) && !c.5.trim().is_empty())
        .map(|(i, c)| {
            let (cx, cy) = (c.1 + c.3 / 2.0, c.2 + c.4 / 2.0);
            (((cx - tx).powi(2) + (cy - ty).powi(2)).sqrt(), i)
        })
        .filter(|(dist, _)| *dist <= threshold)
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d.into_iter().take(count).map(|(_, i)| candidates[i].5.clone()).collect()
}

/// Occurrence count of each string.
pub fn histogram(xs: &[String]) -> HashMap<String, usize> {
    let mut h = HashMap::new();
    for x in xs {
        *h.entry(x.clone()).or_insert(0) += 1;
    }
    h
}
