use std::ops::Range;

use crate::dom::markup::{find_ci, parse_start_tag};

const JS_TYPES: &[&str] = &[
    "text/javascript",
    "application/javascript",
    "application/x-javascript",
    "application/ecmascript",
    "text/ecmascript",
    "text/jscript",
    "module",
];

/// Whether a `<script type=...>` value denotes executable JavaScript.
pub fn is_javascript_type(value: Option<&str>) -> bool {
    match value.map(str::trim) {
        None | Some("") => true,
        Some(t) => {
            let base = t.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
            JS_TYPES.contains(&base.as_str())
        }
    }
}

/// Byte ranges of inline JavaScript inside `<script>` elements without `src`.
pub fn inline_script_ranges(html: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < html.len() {
        let Some(lt) = html[pos..].find('<').map(|i| pos + i) else {
            break;
        };
        if html[lt..].starts_with("<!--") {
            pos = html[lt + 4..].find("-->").map(|i| lt + 4 + i + 3).unwrap_or(html.len());
            continue;
        }
        let Some(tag) = parse_start_tag(html, lt) else {
            pos = lt + 1;
            continue;
        };
        pos = tag.end;
        if tag.name != "script" {
            continue;
        }
        let content_end = find_ci(html, tag.end, "</script").unwrap_or(html.len());
        let has_src = tag.attrs.iter().any(|(k, _)| k == "src");
        let ty = tag.attrs.iter().find(|(k, _)| k == "type").map(|(_, v)| v.as_str());
        if !tag.self_closing && !has_src && is_javascript_type(ty) {
            out.push(tag.end..content_end);
        }
        pos = content_end;
    }
    out
}
