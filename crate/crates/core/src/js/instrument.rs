use regex::Regex;

use super::{line_count, FunctionId, FunctionSpan, InstrumentError};

/// Default console marker prefixed to every probe payload.
pub const DEFAULT_PROBE_TOKEN: &str = "__jsprune_5e1f09c3__:";

/// A source file with a probe at the top of every function body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstrumentedSource {
    pub file: String,
    pub text: String,
    pub spans: Vec<FunctionSpan>,
    pub probe_token: String,
}

pub fn validate_probe_token(token: &str) -> Result<(), InstrumentError> {
    let ok = !token.is_empty()
        && token
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | ':' | '.' | '$' | '-'));
    if ok {
        Ok(())
    } else {
        Err(InstrumentError::InvalidToken(token.to_string()))
    }
}

/// The console line a probe for `id` prints.
pub fn probe_payload(id: &FunctionId, token: &str) -> String {
    format!("{token}{id}")
}

/// A JavaScript string literal that is also safe inside an inline `<script>`
/// and never contains a line terminator.
fn js_string_literal(s: &str) -> String {
    serde_json::to_string(s)
        .expect("string serialization is infallible")
        .replace("</", "<\\/")
        .replace('\u{2028}', "\\u2028")
        .replace('\u{2029}', "\\u2029")
}

fn probe_statement(id: &FunctionId, token: &str) -> String {
    format!("console.log({});", js_string_literal(&probe_payload(id, token)))
}

fn arrow_suffix(token: &str) -> String {
    format!(";/*{token}*/}}")
}

struct Insert {
    at: usize,
    /// Orders insertions sharing an offset.
    rank: (u8, usize),
    text: String,
}

/// Inserts a probe into every function in `spans`.
///
/// Block bodies get `console.log("<token><id>");` right after the opening
/// brace (after any directive prologue). Expression-bodied arrows are turned
/// into `{<probe>/*<token>*/ return <expr>;/*<token>*/}`. No line terminators are added.
pub fn instrument(
    source: &str,
    spans: &[FunctionSpan],
    token: &str,
) -> Result<InstrumentedSource, InstrumentError> {
    validate_probe_token(token)?;
    let file = spans.first().map(|s| s.file.clone()).unwrap_or_default();
    let mut inserts = Vec::with_capacity(spans.len() * 2);
    for span in spans {
        if span.file != file || span.offsets.body_end > source.len() {
            return Err(InstrumentError::ForeignSpan(span.id()));
        }
        let probe = probe_statement(&span.id(), token);
        let size = span.offsets.body_end - span.offsets.start;
        if span.offsets.expression_body {
            inserts.push(Insert {
                at: span.offsets.body_start,
                rank: (1, usize::MAX - size),
                text: format!("{{{probe}/*{token}*/ return "),
            });
            inserts.push(Insert {
                at: span.offsets.body_end,
                rank: (0, size),
                text: arrow_suffix(token),
            });
        } else {
            inserts.push(Insert {
                at: span.offsets.probe_at,
                rank: (1, usize::MAX - size),
                text: probe,
            });
        }
    }
    inserts.sort_by_key(|ins| (ins.at, ins.rank));

    let extra: usize = inserts.iter().map(|i| i.text.len()).sum();
    let mut text = String::with_capacity(source.len() + extra);
    let mut cursor = 0;
    for ins in &inserts {
        text.push_str(&source[cursor..ins.at]);
        text.push_str(&ins.text);
        cursor = ins.at;
    }
    text.push_str(&source[cursor..]);

    let (before, after) = (line_count(source), line_count(&text));
    if before != after {
        return Err(InstrumentError::LineCountChanged {
            file,
            before,
            after,
        });
    }
    Ok(InstrumentedSource {
        file,
        text,
        spans: spans.to_vec(),
        probe_token: token.to_string(),
    })
}

/// Removes every probe inserted by [`instrument`] with `token`.
pub fn strip_probes(text: &str, token: &str) -> String {
    let t = regex::escape(token);
    let literal = format!(r#""{t}(?:[^"\\]|\\.)*""#);
    let arrow_prefix =
        Regex::new(&format!(r"\{{console\.log\({literal}\);/\*{t}\*/ return ")).unwrap();
    let suffix = Regex::new(&format!(r";/\*{t}\*/\}}")).unwrap();
    let block = Regex::new(&format!(r"console\.log\({literal}\);")).unwrap();
    let text = arrow_prefix.replace_all(text, "");
    let text = suffix.replace_all(&text, "");
    block.replace_all(&text, "").into_owned()
}
