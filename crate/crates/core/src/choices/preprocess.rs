//! Lossless-where-possible cleaning of element HTML before it is shown to a
//! model.
//!
//! The fragment is tokenized, not re-serialized: untouched tags are copied
//! byte for byte. `svg`, `path` and `style` child elements are dropped, and the
//! `style`, `srcset` and `data-*` (except `data-test`) attributes are removed
//! from every tag. Unterminated constructs are copied through verbatim.

const REMOVED_ELEMENTS: &[&str] = &["svg", "path", "style"];
const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style", "textarea", "title"];

fn attr_removed(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    n == "style" || n == "srcset" || (n.starts_with("data-") && n != "data-test")
}

/// Cleans `outer_html` and truncates the result to `limit` characters.
pub fn preprocess_html(outer_html: &str, limit: usize) -> String {
    let cleaned = clean(outer_html);
    truncate_chars(&cleaned, limit)
}

pub fn truncate_chars(s: &str, limit: usize) -> String {
    match s.char_indices().nth(limit) {
        Some((i, _)) => s[..i].to_string(),
        None => s.to_string(),
    }
}

struct StartTag {
    name: String,
    end: usize,
    self_closing: bool,
    /// Byte ranges (including leading whitespace) of each attribute and its name.
    attrs: Vec<(usize, usize, String)>,
    name_end: usize,
}

fn is_name_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'-' || c == b':' || c == b'_'
}

/// Parses a start tag at `start` (which points at `<`). `None` when the tag
/// never terminates.
fn parse_start_tag(s: &str, start: usize) -> Option<StartTag> {
    let b = s.as_bytes();
    let mut i = start + 1;
    while i < b.len() && is_name_char(b[i]) {
        i += 1;
    }
    let name = s[start + 1..i].to_ascii_lowercase();
    let name_end = i;
    let mut attrs = Vec::new();
    loop {
        let ws_start = i;
        while i < b.len() && (b[i].is_ascii_whitespace() || (b[i] == b'/' && b.get(i + 1) != Some(&b'>'))) {
            i += 1;
        }
        if i >= b.len() {
            return None;
        }
        if b[i] == b'>' {
            return Some(StartTag {
                name,
                end: i + 1,
                self_closing: false,
                attrs,
                name_end,
            });
        }
        if b[i] == b'/' && b.get(i + 1) == Some(&b'>') {
            return Some(StartTag {
                name,
                end: i + 2,
                self_closing: true,
                attrs,
                name_end,
            });
        }
        let an_start = i;
        while i < b.len() && !b[i].is_ascii_whitespace() && !matches!(b[i], b'=' | b'>' | b'/') {
            i += 1;
        }
        let attr_name = s[an_start..i].to_string();
        let mut j = i;
        while j < b.len() && b[j].is_ascii_whitespace() {
            j += 1;
        }
        if j < b.len() && b[j] == b'=' {
            j += 1;
            while j < b.len() && b[j].is_ascii_whitespace() {
                j += 1;
            }
            if j >= b.len() {
                return None;
            }
            if b[j] == b'"' || b[j] == b'\'' {
                let q = b[j];
                let close = s[j + 1..].bytes().position(|c| c == q)?;
                j = j + 1 + close + 1;
            } else {
                while j < b.len() && !b[j].is_ascii_whitespace() && b[j] != b'>' {
                    j += 1;
                }
            }
            i = j;
        }
        if attr_name.is_empty() {
            // Stray character such as a lone '='.
            i += 1;
            continue;
        }
        attrs.push((ws_start, i, attr_name));
    }
}

fn find_ci(hay: &str, from: usize, needle: &str) -> Option<usize> {
    let lower = hay[from..].to_ascii_lowercase();
    lower.find(needle).map(|p| p + from)
}

/// Position right after the end tag `</name ...>` at or after `from`.
fn skip_end_tag(s: &str, at: usize) -> Option<usize> {
    s[at..].find('>').map(|p| at + p + 1)
}

fn clean(s: &str) -> String {
    let b = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    let mut seen_root = false;
    // (element name, nesting depth) while inside a removed element.
    let mut skipping: Option<(String, usize)> = None;

    while i < b.len() {
        if b[i] != b'<' {
            let next = s[i..].find('<').map_or(b.len(), |p| i + p);
            if skipping.is_none() {
                out.push_str(&s[i..next]);
            }
            i = next;
            continue;
        }
        let rest = &s[i..];
        if rest.starts_with("<!--") {
            let end = match rest[4..].find("-->") {
                Some(p) => i + 4 + p + 3,
                None => b.len(),
            };
            if skipping.is_none() {
                out.push_str(&s[i..end]);
            }
            i = end;
            continue;
        }
        if rest.starts_with("</") && rest.as_bytes().get(2).is_some_and(|c| c.is_ascii_alphabetic()) {
            let Some(end) = skip_end_tag(s, i) else {
                if skipping.is_none() {
                    out.push_str(rest);
                }
                break;
            };
            let name: String = rest[2..]
                .bytes()
                .take_while(|c| is_name_char(*c))
                .map(|c| (c as char).to_ascii_lowercase())
                .collect();
            match &mut skipping {
                Some((skip_name, depth)) => {
                    if *skip_name == name {
                        *depth -= 1;
                        if *depth == 0 {
                            skipping = None;
                        }
                    }
                }
                None => out.push_str(&s[i..end]),
            }
            i = end;
            continue;
        }
        if rest.starts_with("<!") {
            let end = skip_end_tag(s, i).unwrap_or(b.len());
            if skipping.is_none() {
                out.push_str(&s[i..end]);
            }
            i = end;
            continue;
        }
        if !rest.as_bytes().get(1).is_some_and(|c| c.is_ascii_alphabetic()) {
            // A bare '<' is text.
            if skipping.is_none() {
                out.push('<');
            }
            i += 1;
            continue;
        }
        let Some(tag) = parse_start_tag(s, i) else {
            if skipping.is_none() {
                out.push_str(rest);
            }
            break;
        };

        if let Some((skip_name, depth)) = &mut skipping {
            if *skip_name == tag.name && !tag.self_closing {
                *depth += 1;
            }
            i = tag.end;
            if tag.name == "style" || tag.name == "script" {
                i = raw_text_end(s, i, &tag.name);
            }
            continue;
        }

        let is_root = !seen_root;
        seen_root = true;
        if !is_root && REMOVED_ELEMENTS.contains(&tag.name.as_str()) {
            if tag.self_closing {
                i = tag.end;
            } else if tag.name == "style" {
                i = raw_text_end(s, tag.end, "style");
            } else {
                skipping = Some((tag.name.clone(), 1));
                i = tag.end;
            }
            continue;
        }

        if tag.attrs.iter().any(|(_, _, n)| attr_removed(n)) {
            out.push_str(&s[i..tag.name_end]);
            let mut last = tag.name_end;
            for (ws_start, end, name) in &tag.attrs {
                if !attr_removed(name) {
                    out.push_str(&s[*ws_start..*end]);
                }
                last = *end;
            }
            out.push_str(&s[last..tag.end]);
        } else {
            out.push_str(&s[i..tag.end]);
        }
        i = tag.end;

        if RAW_TEXT_ELEMENTS.contains(&tag.name.as_str()) && !tag.self_closing {
            let end = raw_text_end(s, i, &tag.name);
            out.push_str(&s[i..end]);
            i = end;
        }
    }
    out
}

/// End of a raw-text element body including its end tag, or end of input.
fn raw_text_end(s: &str, from: usize, name: &str) -> usize {
    match find_ci(s, from, &format!("</{name}")) {
        Some(p) => skip_end_tag(s, p).unwrap_or(s.len()),
        None => s.len(),
    }
}
