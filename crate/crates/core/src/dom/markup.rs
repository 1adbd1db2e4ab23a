//! A lenient HTML reader that keeps elements and attributes only.

use super::{Document, NodeId};

pub(crate) struct Tag {
    /// Lowercase tag name.
    pub name: String,
    /// Lowercase names, entity-decoded values, first occurrence wins.
    pub attrs: Vec<(String, String)>,
    /// One past the closing `>`.
    pub end: usize,
    pub self_closing: bool,
}

const VOID: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

const RAW_TEXT: &[&str] = &["script", "style", "textarea", "title", "xmp", "iframe", "noembed"];

pub(crate) fn is_void(tag: &str) -> bool {
    VOID.contains(&tag)
}

/// Case-insensitive ASCII search for `needle` in `hay[from..]`.
pub(crate) fn find_ci(hay: &str, from: usize, needle: &str) -> Option<usize> {
    let h = hay.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || from > h.len() || h.len() - from < n.len() {
        return None;
    }
    (from..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn is_name_byte(b: u8) -> bool {
    !b.is_ascii_whitespace() && !matches!(b, b'/' | b'>' | b'=' | b'<' | b'"' | b'\'')
}

/// Parses a start tag beginning at the `<` at `pos`.
pub(crate) fn parse_start_tag(src: &str, pos: usize) -> Option<Tag> {
    let b = src.as_bytes();
    if b.get(pos) != Some(&b'<') || !b.get(pos + 1)?.is_ascii_alphabetic() {
        return None;
    }
    let mut i = pos + 1;
    while i < b.len() && is_name_byte(b[i]) {
        i += 1;
    }
    let name = src[pos + 1..i].to_ascii_lowercase();
    let mut attrs: Vec<(String, String)> = Vec::new();
    let mut self_closing = false;
    loop {
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        match b.get(i)? {
            b'>' => {
                return Some(Tag {
                    name,
                    attrs,
                    end: i + 1,
                    self_closing,
                })
            }
            b'/' => {
                self_closing = true;
                i += 1;
                continue;
            }
            _ => {}
        }
        self_closing = false;
        let name_start = i;
        while i < b.len() && (is_name_byte(b[i]) || (i == name_start && b[i] == b'=')) {
            i += 1;
        }
        if i == name_start {
            // Stray quote or `<`: skip it.
            i += 1;
            continue;
        }
        let attr = src[name_start..i].to_ascii_lowercase();
        let mut j = i;
        while j < b.len() && b[j].is_ascii_whitespace() {
            j += 1;
        }
        let mut value = String::new();
        if b.get(j) == Some(&b'=') {
            j += 1;
            while j < b.len() && b[j].is_ascii_whitespace() {
                j += 1;
            }
            match b.get(j)? {
                q @ (b'"' | b'\'') => {
                    let close = src[j + 1..].find(*q as char)? + j + 1;
                    value = decode_entities(&src[j + 1..close]);
                    i = close + 1;
                }
                _ => {
                    let start = j;
                    while j < b.len() && !b[j].is_ascii_whitespace() && b[j] != b'>' {
                        j += 1;
                    }
                    value = decode_entities(&src[start..j]);
                    i = j;
                }
            }
        }
        if !attrs.iter().any(|(k, _)| *k == attr) {
            attrs.push((attr, value));
        }
    }
}

/// Decodes the character references that commonly appear in attribute values.
pub(crate) fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        let decoded = rest.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let body = &rest[1..semi];
            let c = if let Some(num) = body.strip_prefix("#x").or_else(|| body.strip_prefix("#X")) {
                u32::from_str_radix(num, 16).ok().and_then(char::from_u32)
            } else if let Some(num) = body.strip_prefix('#') {
                num.parse().ok().and_then(char::from_u32)
            } else {
                match body {
                    "amp" => Some('&'),
                    "lt" => Some('<'),
                    "gt" => Some('>'),
                    "quot" => Some('"'),
                    "apos" => Some('\''),
                    "nbsp" => Some('\u{a0}'),
                    _ => None,
                }
            };
            c.map(|c| (c, semi))
        });
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Open elements closed implicitly when `tag` starts.
fn implicitly_closed_by(tag: &str) -> &'static [&'static str] {
    match tag {
        "li" => &["li"],
        "option" => &["option"],
        "dt" | "dd" => &["dt", "dd"],
        "tr" => &["tr", "td", "th"],
        "td" | "th" => &["td", "th"],
        "p" | "div" | "ul" | "ol" | "table" | "h1" | "h2" | "h3" | "h4" | "h5" | "h6" | "form"
        | "section" | "article" | "header" | "footer" | "nav" | "pre" | "blockquote" => &["p"],
        _ => &[],
    }
}

pub(crate) fn parse(html: &str) -> Document {
    let mut doc = Document::new();
    let mut open: Vec<NodeId> = vec![doc.root()];
    let b = html.as_bytes();
    let mut pos = 0;
    while let Some(lt) = html[pos..].find('<').map(|i| pos + i) {
        let rest = &html[lt..];
        if rest.starts_with("<!--") {
            pos = html[lt + 4..].find("-->").map(|i| lt + 4 + i + 3).unwrap_or(html.len());
            continue;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            pos = html[lt..].find('>').map(|i| lt + i + 1).unwrap_or(html.len());
            continue;
        }
        if rest.starts_with("</") {
            let mut i = lt + 2;
            while i < b.len() && is_name_byte(b[i]) {
                i += 1;
            }
            let name = html[lt + 2..i].to_ascii_lowercase();
            pos = html[i..].find('>').map(|k| i + k + 1).unwrap_or(html.len());
            if let Some(depth) = open.iter().rposition(|&n| doc.tag(n) == name) {
                if depth > 0 {
                    open.truncate(depth);
                }
            }
            continue;
        }
        let Some(tag) = parse_start_tag(html, lt) else {
            pos = lt + 1;
            continue;
        };
        pos = tag.end;
        let closes = implicitly_closed_by(&tag.name);
        if open.len() > 1 && closes.contains(&doc.tag(*open.last().unwrap())) {
            open.pop();
        }
        let parent = *open.last().unwrap();
        let node = doc.create_element(&tag.name, tag.attrs);
        doc.append_child(parent, node);
        if is_void(&tag.name) || tag.self_closing {
            continue;
        }
        if RAW_TEXT.contains(&tag.name.as_str()) {
            let close = format!("</{}", tag.name);
            pos = match find_ci(html, pos, &close) {
                Some(at) => html[at..].find('>').map(|k| at + k + 1).unwrap_or(html.len()),
                None => html.len(),
            };
            continue;
        }
        open.push(node);
    }
    doc
}
