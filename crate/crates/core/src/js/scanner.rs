//! Function boundary detection over the token stream.
//!
//! Recognized forms: `function` declarations and expressions (including
//! generators and `async`), arrow functions with block or expression bodies,
//! and methods, accessors and generator methods in classes and object
//! literals. Nested functions each get their own span.

use std::collections::{BTreeMap, HashSet};

use super::html::inline_script_ranges;
use super::lexer::{Lexer, Token, TokenKind};
use super::{FunctionKind, FunctionSpan, LineIndex, ParseError, SourceKind, SpanOffsets};

const NONE: usize = usize::MAX;

/// Finds every function in a script file.
pub fn scan_functions(source: &str, file: &str) -> Result<Vec<FunctionSpan>, ParseError> {
    let lines = LineIndex::new(source);
    let spans = scan_range(source, &lines, 0, source.len(), file)?;
    Ok(finish(spans))
}

/// Finds every function inside the inline `<script>` blocks of an HTML document.
/// Line numbers refer to the HTML file.
pub fn scan_html(source: &str, file: &str) -> Result<Vec<FunctionSpan>, ParseError> {
    let lines = LineIndex::new(source);
    let mut spans = Vec::new();
    for range in inline_script_ranges(source) {
        spans.extend(scan_range(source, &lines, range.start, range.end, file)?);
    }
    Ok(finish(spans))
}

pub fn scan_source(
    source: &str,
    file: &str,
    kind: SourceKind,
) -> Result<Vec<FunctionSpan>, ParseError> {
    match kind {
        SourceKind::Script => scan_functions(source, file),
        SourceKind::Html => scan_html(source, file),
    }
}

/// Orders spans outer-before-inner and numbers line-range collisions.
fn finish(mut spans: Vec<FunctionSpan>) -> Vec<FunctionSpan> {
    spans.sort_by(|a, b| {
        a.offsets
            .start
            .cmp(&b.offsets.start)
            .then(b.offsets.body_end.cmp(&a.offsets.body_end))
    });
    number_collisions(&mut spans);
    spans
}

/// Assigns collision ordinals to spans sharing a line range, in slice order.
pub(super) fn number_collisions(spans: &mut [FunctionSpan]) {
    let mut groups: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, s) in spans.iter_mut().enumerate() {
        s.collision = 0;
        groups.entry((s.start_line, s.end_line)).or_default().push(i);
    }
    for members in groups.values().filter(|m| m.len() > 1) {
        for (n, &i) in members.iter().enumerate() {
            spans[i].collision = n as u32 + 1;
        }
    }
}

fn scan_range(
    src: &str,
    lines: &LineIndex,
    start: usize,
    end: usize,
    file: &str,
) -> Result<Vec<FunctionSpan>, ParseError> {
    let toks = Lexer::new(src, start, end, lines).tokenize()?;
    let mut scanner = Scanner::new(src, lines, file, toks)?;
    scanner.run()?;
    Ok(scanner.spans)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Paren,
    Bracket,
    Block,
    FunctionBody,
    ClassBody,
    Object,
    Template,
}

struct Scanner<'a> {
    src: &'a str,
    lines: &'a LineIndex,
    file: &'a str,
    toks: Vec<Token>,
    close_of: Vec<usize>,
    open_of: Vec<usize>,
    function_bodies: HashSet<usize>,
    class_bodies: HashSet<usize>,
    ctx: Vec<(usize, Ctx)>,
    spans: Vec<FunctionSpan>,
}

impl<'a> Scanner<'a> {
    fn new(
        src: &'a str,
        lines: &'a LineIndex,
        file: &'a str,
        toks: Vec<Token>,
    ) -> Result<Self, ParseError> {
        let n = toks.len();
        let mut scanner = Scanner {
            src,
            lines,
            file,
            toks,
            close_of: vec![NONE; n],
            open_of: vec![NONE; n],
            function_bodies: HashSet::new(),
            class_bodies: HashSet::new(),
            ctx: Vec::new(),
            spans: Vec::new(),
        };
        scanner.match_brackets()?;
        Ok(scanner)
    }

    fn error(&self, tok: usize, message: &str) -> ParseError {
        let offset = self.toks.get(tok).map(|t| t.start).unwrap_or(self.src.len());
        let (line, column) = self.lines.line_col(self.src, offset);
        ParseError {
            line,
            column,
            message: message.to_string(),
        }
    }

    fn text(&self, i: usize) -> &'a str {
        let t = &self.toks[i];
        &self.src[t.start..t.end]
    }

    fn kind(&self, i: usize) -> Option<TokenKind> {
        self.toks.get(i).map(|t| t.kind)
    }

    fn is_punct(&self, i: usize, p: &str) -> bool {
        self.kind(i) == Some(TokenKind::Punct) && self.text(i) == p
    }

    fn is_ident(&self, i: usize, name: &str) -> bool {
        self.kind(i) == Some(TokenKind::Ident) && self.text(i) == name
    }

    fn is_opener(&self, i: usize) -> bool {
        match self.kind(i) {
            Some(TokenKind::Punct) => matches!(self.text(i), "(" | "[" | "{"),
            Some(TokenKind::TemplateHead) | Some(TokenKind::TemplateMiddle) => true,
            _ => false,
        }
    }

    fn is_closer(&self, i: usize) -> bool {
        match self.kind(i) {
            Some(TokenKind::Punct) => matches!(self.text(i), ")" | "]" | "}"),
            Some(TokenKind::TemplateMiddle) | Some(TokenKind::TemplateTail) => true,
            _ => false,
        }
    }

    /// Index of the last token of the group opened at `i`, following
    /// template substitutions through to the tail.
    fn group_end(&self, mut i: usize) -> usize {
        loop {
            let c = self.close_of[i];
            if self.kind(c) == Some(TokenKind::TemplateMiddle) {
                i = c;
            } else {
                return c;
            }
        }
    }

    fn match_brackets(&mut self) -> Result<(), ParseError> {
        let mut stack: Vec<usize> = Vec::new();
        for i in 0..self.toks.len() {
            let closes = self.is_closer(i);
            let opens = self.is_opener(i);
            if closes {
                let Some(o) = stack.pop() else {
                    return Err(self.error(i, &format!("unmatched `{}`", self.closer_char(i))));
                };
                let expected = match self.kind(o) {
                    Some(TokenKind::Punct) => match self.text(o) {
                        "(" => ")",
                        "[" => "]",
                        _ => "}",
                    },
                    _ => "}",
                };
                let template_closer = matches!(
                    self.kind(i),
                    Some(TokenKind::TemplateMiddle) | Some(TokenKind::TemplateTail)
                );
                let template_opener = matches!(
                    self.kind(o),
                    Some(TokenKind::TemplateHead) | Some(TokenKind::TemplateMiddle)
                );
                let ok = if template_closer || template_opener {
                    template_closer && template_opener
                } else {
                    self.text(i) == expected
                };
                if !ok {
                    let (line, _) = self.lines.line_col(self.src, self.toks[i].start);
                    return Err(self.error(
                        o,
                        &format!(
                            "`{}` is closed by `{}` on line {line}; expected `{expected}`",
                            self.text(o),
                            self.closer_char(i)
                        ),
                    ));
                }
                self.close_of[o] = i;
                self.open_of[i] = o;
            }
            if opens {
                stack.push(i);
            }
        }
        if let Some(&o) = stack.last() {
            return Err(self.error(o, &format!("unclosed `{}`", self.text(o))));
        }
        Ok(())
    }

    fn closer_char(&self, i: usize) -> &'a str {
        match self.kind(i) {
            Some(TokenKind::Punct) => self.text(i),
            _ => "}",
        }
    }

    fn top(&self) -> Option<(usize, Ctx)> {
        self.ctx.last().copied()
    }

    fn run(&mut self) -> Result<(), ParseError> {
        for i in 0..self.toks.len() {
            let kind = self.toks[i].kind;
            match kind {
                TokenKind::Ident => match self.text(i) {
                    "function" => self.function_keyword(i)?,
                    "class" => self.class_keyword(i),
                    _ => {}
                },
                TokenKind::TemplateHead => self.ctx.push((i, Ctx::Template)),
                TokenKind::TemplateMiddle => {
                    self.ctx.pop();
                    self.ctx.push((i, Ctx::Template));
                }
                TokenKind::TemplateTail => {
                    self.ctx.pop();
                }
                TokenKind::Punct => match self.text(i) {
                    "=>" => self.arrow(i)?,
                    "(" => {
                        if matches!(self.top(), Some((_, Ctx::Object | Ctx::ClassBody))) {
                            self.maybe_method(i);
                        }
                        self.ctx.push((i, Ctx::Paren));
                    }
                    "[" => self.ctx.push((i, Ctx::Bracket)),
                    "{" => {
                        let c = self.brace_kind(i);
                        self.ctx.push((i, c));
                    }
                    ")" | "]" | "}" => {
                        self.ctx.pop();
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        Ok(())
    }

    fn after_member_access(&self, i: usize) -> bool {
        i > 0 && (self.is_punct(i - 1, ".") || self.is_punct(i - 1, "?."))
    }

    fn brace_kind(&self, i: usize) -> Ctx {
        if self.function_bodies.contains(&i) {
            return Ctx::FunctionBody;
        }
        if self.class_bodies.contains(&i) {
            return Ctx::ClassBody;
        }
        if i == 0 {
            return Ctx::Block;
        }
        let p = i - 1;
        match self.toks[p].kind {
            TokenKind::Punct => match self.text(p) {
                ")" | ";" | "{" | "}" | "=>" => Ctx::Block,
                ":" => {
                    if matches!(self.top(), Some((_, Ctx::Object))) {
                        Ctx::Object
                    } else if self.colon_ends_label_or_case(p) {
                        Ctx::Block
                    } else {
                        Ctx::Object
                    }
                }
                _ => Ctx::Object,
            },
            TokenKind::Ident => match self.text(p) {
                "return" | "typeof" | "instanceof" | "in" | "of" | "new" | "delete" | "void"
                | "throw" | "case" | "yield" | "await" => Ctx::Object,
                _ => Ctx::Block,
            },
            TokenKind::TemplateHead | TokenKind::TemplateMiddle => Ctx::Object,
            _ => Ctx::Block,
        }
    }

    /// Whether the `:` at `colon` ends a statement label or a `case`/`default` clause.
    fn colon_ends_label_or_case(&self, colon: usize) -> bool {
        if colon == 0 {
            return false;
        }
        let key = colon - 1;
        if self.kind(key) == Some(TokenKind::Ident) {
            let statement_start = key == 0
                || matches!(self.text(key - 1), ";" | "{" | "}" | ":")
                    && self.kind(key - 1) == Some(TokenKind::Punct)
                || self.is_ident(key - 1, "else")
                || self.is_ident(key - 1, "do");
            if statement_start {
                return true;
            }
        }
        let opener = self.top().map(|(o, _)| o);
        let mut j = colon;
        while j > 0 {
            j -= 1;
            if Some(j) == opener {
                break;
            }
            if self.is_punct(j, ")") || self.is_punct(j, "]") {
                j = self.open_of[j];
                continue;
            }
            if self.is_ident(j, "case") {
                return true;
            }
            if self.is_punct(j, ";")
                || self.is_punct(j, "{")
                || self.is_punct(j, "}")
                || self.is_punct(j, "?")
            {
                break;
            }
        }
        false
    }

    fn function_keyword(&mut self, i: usize) -> Result<(), ParseError> {
        if self.after_member_access(i) || self.is_punct(i + 1, ":") {
            return Ok(());
        }
        match self.top() {
            // `function` directly in a class body can only be a method name.
            Some((_, Ctx::ClassBody)) => return Ok(()),
            Some((open, Ctx::Object))
                if self.is_punct(i + 1, "(") && (i - 1 == open || self.is_punct(i - 1, ",")) =>
            {
                return Ok(())
            }
            _ => {}
        }
        let mut j = i + 1;
        let generator = self.is_punct(j, "*");
        if generator {
            j += 1;
        }
        let mut name = None;
        if self.kind(j) == Some(TokenKind::Ident) {
            name = Some(self.text(j).to_string());
            j += 1;
        }
        if !self.is_punct(j, "(") {
            return Err(self.error(j, "expected `(` after `function`"));
        }
        let body = self.close_of[j] + 1;
        if !self.is_punct(body, "{") {
            return Err(self.error(body, "expected function body"));
        }
        let is_async = i > 0 && self.is_ident(i - 1, "async") && !self.toks[i].nl_before;
        let start = if is_async { i - 1 } else { i };
        let declaration = self.at_statement_start(start);
        let kind = if is_async {
            FunctionKind::AsyncVariant
        } else if generator {
            FunctionKind::Generator
        } else if declaration {
            FunctionKind::Declaration
        } else {
            FunctionKind::Expression
        };
        if name.is_none() {
            name = self.assigned_name(start);
        }
        self.function_bodies.insert(body);
        self.push_block_span(start, body, kind, name);
        Ok(())
    }

    fn at_statement_start(&self, start: usize) -> bool {
        if matches!(
            self.top(),
            Some((_, Ctx::Paren | Ctx::Bracket | Ctx::Object | Ctx::Template))
        ) {
            return false;
        }
        if start == 0 {
            return true;
        }
        let p = start - 1;
        match self.toks[p].kind {
            TokenKind::Punct => matches!(self.text(p), ";" | "{" | "}"),
            TokenKind::Ident => matches!(self.text(p), "else" | "do" | "export" | "default"),
            _ => false,
        }
    }

    fn class_keyword(&mut self, i: usize) {
        if self.after_member_access(i) {
            return;
        }
        let mut j = i + 1;
        if self.kind(j) == Some(TokenKind::Ident) && self.text(j) != "extends" {
            j += 1;
        }
        if self.is_ident(j, "extends") {
            j += 1;
            while j < self.toks.len() && !self.is_punct(j, "{") {
                if self.is_opener(j) {
                    j = self.group_end(j);
                }
                j += 1;
            }
        }
        if self.is_punct(j, "{") {
            self.class_bodies.insert(j);
        }
    }

    fn arrow(&mut self, i: usize) -> Result<(), ParseError> {
        if i == 0 {
            return Err(self.error(i, "arrow without parameters"));
        }
        let p = i - 1;
        let mut start = if self.is_punct(p, ")") {
            self.open_of[p]
        } else if self.kind(p) == Some(TokenKind::Ident) {
            p
        } else {
            return Err(self.error(i, "malformed arrow parameters"));
        };
        let is_async = start > 0
            && self.is_ident(start - 1, "async")
            && !self.toks[start].nl_before
            && !(start >= 2 && self.after_member_access(start - 1));
        if is_async {
            start -= 1;
        }
        let name = self.assigned_name(start);
        if self.is_punct(i + 1, "{") {
            let body = i + 1;
            self.function_bodies.insert(body);
            let kind = if is_async {
                FunctionKind::AsyncVariant
            } else {
                FunctionKind::ArrowBlock
            };
            self.push_block_span(start, body, kind, name);
        } else {
            let (first, last) = self.expression_extent(i + 1)?;
            let kind = if is_async {
                FunctionKind::AsyncVariant
            } else {
                FunctionKind::ArrowExpression
            };
            let offsets = SpanOffsets {
                start: self.toks[start].start,
                body_start: self.toks[first].start,
                body_end: self.toks[last].end,
                probe_at: self.toks[first].start,
                expression_body: true,
            };
            self.push_span(offsets, kind, name);
        }
        Ok(())
    }

    /// Token range of an arrow's expression body beginning at `first`.
    fn expression_extent(&self, first: usize) -> Result<(usize, usize), ParseError> {
        let n = self.toks.len();
        if first >= n || self.is_closer(first) || self.is_punct(first, ",") || self.is_punct(first, ";")
        {
            return Err(self.error(first, "missing arrow body"));
        }
        let mut pending_conditional = 0usize;
        let mut last = first;
        let mut k = first;
        while k < n {
            if k > first && self.toks[k].nl_before && self.asi_boundary(last, k) {
                break;
            }
            if self.is_closer(k) {
                break;
            }
            if self.is_opener(k) {
                last = self.group_end(k);
                k = last + 1;
                continue;
            }
            if self.kind(k) == Some(TokenKind::Punct) {
                match self.text(k) {
                    "," | ";" => break,
                    "?" => pending_conditional += 1,
                    ":" => {
                        if pending_conditional == 0 {
                            break;
                        }
                        pending_conditional -= 1;
                    }
                    _ => {}
                }
            }
            last = k;
            k += 1;
        }
        Ok((first, last))
    }

    /// Whether a line break between `prev` and `next` terminates an expression.
    fn asi_boundary(&self, prev: usize, next: usize) -> bool {
        let prev_ends = match self.toks[prev].kind {
            TokenKind::Ident => !matches!(
                self.text(prev),
                "return" | "typeof" | "instanceof" | "in" | "of" | "new" | "delete" | "void"
                    | "throw" | "yield" | "await" | "async"
            ),
            TokenKind::Punct => matches!(self.text(prev), ")" | "]" | "}" | "++" | "--"),
            TokenKind::TemplateHead | TokenKind::TemplateMiddle => false,
            _ => true,
        };
        prev_ends && !self.continues_expression(next)
    }

    fn continues_expression(&self, i: usize) -> bool {
        match self.toks[i].kind {
            TokenKind::Punct => !matches!(
                self.text(i),
                "{" | "!" | "~" | "++" | "--" | "@"
            ),
            TokenKind::Ident => matches!(self.text(i), "in" | "instanceof" | "of"),
            TokenKind::Template | TokenKind::TemplateHead => true,
            _ => false,
        }
    }

    fn maybe_method(&mut self, paren: usize) {
        let Some((opener, ctx)) = self.top() else {
            return;
        };
        if paren == 0 {
            return;
        }
        let body = self.close_of[paren] + 1;
        if !self.is_punct(body, "{") {
            return;
        }
        let key_end = paren - 1;
        let computed = self.is_punct(key_end, "]");
        let key_start = if computed {
            self.open_of[key_end]
        } else if matches!(
            self.kind(key_end),
            Some(TokenKind::Ident | TokenKind::Str | TokenKind::Number | TokenKind::PrivateName)
        ) {
            key_end
        } else {
            return;
        };
        let (mut star, mut accessor, mut is_async, mut is_static) = (false, false, false, false);
        let mut k = key_start;
        while k > 0 {
            let p = k - 1;
            if !star && !accessor && !is_async && self.is_punct(p, "*") {
                star = true;
            } else if !accessor && !is_async && !star
                && (self.is_ident(p, "get") || self.is_ident(p, "set"))
            {
                accessor = true;
            } else if !is_async && !accessor && self.is_ident(p, "async") && !self.toks[k].nl_before
            {
                is_async = true;
            } else if !is_static && ctx == Ctx::ClassBody && self.is_ident(p, "static") {
                is_static = true;
            } else {
                break;
            }
            k = p;
        }
        if k == 0 {
            return;
        }
        let before = k - 1;
        let member_start = before == opener
            || (ctx == Ctx::Object && self.is_punct(before, ","))
            || (ctx == Ctx::ClassBody && (self.is_punct(before, ";") || self.is_punct(before, "}")));
        if !member_start {
            return;
        }
        let kind = if accessor {
            FunctionKind::GetterSetter
        } else if star {
            FunctionKind::Generator
        } else if is_async {
            FunctionKind::AsyncVariant
        } else {
            FunctionKind::Method
        };
        let name = if computed {
            None
        } else {
            Some(self.text(key_start).trim_matches(['"', '\'']).to_string())
        };
        self.function_bodies.insert(body);
        self.push_block_span(k, body, kind, name);
    }

    /// Name given to an anonymous function by `x = ...` or `key: ...`.
    fn assigned_name(&self, start: usize) -> Option<String> {
        if start < 2 {
            return None;
        }
        let p = start - 1;
        let key = start - 2;
        let named = matches!(self.kind(key), Some(TokenKind::Ident | TokenKind::Str));
        if !named {
            return None;
        }
        if self.is_punct(p, "=") && self.kind(key) == Some(TokenKind::Ident) {
            return Some(self.text(key).to_string());
        }
        if self.is_punct(p, ":") && matches!(self.top(), Some((_, Ctx::Object))) {
            return Some(self.text(key).trim_matches(['"', '\'']).to_string());
        }
        None
    }

    /// Probe insertion point: after the `{`, or after a directive prologue.
    fn probe_offset(&self, body: usize) -> usize {
        let mut at = self.toks[body].end;
        let mut j = body + 1;
        while self.kind(j) == Some(TokenKind::Str) {
            let next = j + 1;
            if self.is_punct(next, ";") {
                at = self.toks[next].end;
                j = next + 1;
            } else if next < self.toks.len()
                && self.toks[next].nl_before
                && !self.continues_expression(next)
            {
                at = self.toks[next].start;
                j = next;
            } else {
                break;
            }
        }
        at
    }

    fn push_block_span(&mut self, start: usize, body: usize, kind: FunctionKind, name: Option<String>) {
        let close = self.close_of[body];
        let offsets = SpanOffsets {
            start: self.toks[start].start,
            body_start: self.toks[body].start,
            body_end: self.toks[close].end,
            probe_at: self.probe_offset(body),
            expression_body: false,
        };
        self.push_span(offsets, kind, name);
    }

    fn push_span(&mut self, offsets: SpanOffsets, kind: FunctionKind, name: Option<String>) {
        self.spans.push(FunctionSpan {
            file: self.file.to_string(),
            start_line: self.lines.line_of(offsets.start),
            end_line: self.lines.line_of(offsets.body_end - 1),
            kind,
            collision: 0,
            name,
            offsets,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triples(src: &str, file: &str) -> Vec<(u32, u32, FunctionKind)> {
        scan_functions(src, file)
            .unwrap()
            .into_iter()
            .map(|s| (s.start_line, s.end_line, s.kind))
            .collect()
    }

    #[test]
    fn empty_source_has_no_functions() {
        assert!(scan_functions("", "e.js").unwrap().is_empty());
    }

    #[test]
    fn single_declaration() {
        let spans = scan_functions("function f(){return 1}", "f.js").unwrap();
        assert_eq!(spans.len(), 1);
        let s = &spans[0];
        assert_eq!((s.file.as_str(), s.start_line, s.end_line), ("f.js", 1, 1));
        assert_eq!(s.kind, FunctionKind::Declaration);
        assert_eq!(s.name.as_deref(), Some("f"));
    }

    #[test]
    fn nested_declarations_keep_their_own_spans() {
        let src = "function outer(){\n function inner(){}\n}";
        assert_eq!(
            triples(src, "g.js"),
            vec![
                (1, 3, FunctionKind::Declaration),
                (2, 2, FunctionKind::Declaration)
            ]
        );
    }

    #[test]
    fn every_form_is_recognized() {
        let src = r#"
const a = function () {};
const b = x => x + 1;
const c = async (x, y) => { await x; };
function* gen() { yield 1; }
async function run() {}
class K extends Base {
  constructor() { super(); }
  static make() { return new K(); }
  get value() { return 1; }
  set value(v) {}
  *items() {}
  async load() {}
  ['computed' + 1]() {}
}
const o = { m() {}, get g() { return 0; }, 'quoted'() {}, f: function () {}, h: () => 0 };
"#;
        let kinds: Vec<FunctionKind> = scan_functions(src, "all.js")
            .unwrap()
            .into_iter()
            .map(|s| s.kind)
            .collect();
        use FunctionKind::*;
        assert_eq!(
            kinds,
            vec![
                Expression,
                ArrowExpression,
                AsyncVariant,
                Generator,
                AsyncVariant,
                Method,
                Method,
                GetterSetter,
                GetterSetter,
                Generator,
                AsyncVariant,
                Method,
                Method,
                GetterSetter,
                Method,
                Expression,
                ArrowExpression
            ]
        );
    }

    #[test]
    fn strings_templates_regexes_and_comments_are_opaque() {
        let src = "var s = 'function a(){}';\nvar t = `function b(){} ${'x'}`;\nvar r = /function c\\(\\)\\{\\}/;\n// function d(){}\n/* () => 1 */";
        assert!(scan_functions(src, "x.js").unwrap().is_empty());
    }

    #[test]
    fn control_flow_is_not_a_method() {
        let src = "const o = { run() { if (a) { b(); } while (c) { d(); } for (;;) {} } };";
        let spans = scan_functions(src, "c.js").unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].kind, FunctionKind::Method);
    }

    #[test]
    fn expression_bodies_end_at_the_right_token() {
        let src = "f(a => a * 2, b);\nconst g = x => y => x + y;\nconst h = c ? () => 1 : () => 2;\nconst k = v => v\nk(1)";
        let spans = scan_functions(src, "e.js").unwrap();
        let bodies: Vec<&str> = spans
            .iter()
            .map(|s| &src[s.offsets.body_start..s.offsets.body_end])
            .collect();
        assert_eq!(bodies, vec!["a * 2", "y => x + y", "x + y", "1", "2", "v"]);
    }

    #[test]
    fn collisions_on_one_line_are_numbered() {
        let spans = scan_functions("function a(){}function b(){}function c(){\n}", "m.js").unwrap();
        let ids: Vec<String> = spans.iter().map(|s| s.id().to_string()).collect();
        assert_eq!(ids, vec!["m.js|1|1|1", "m.js|1|1|2", "m.js|1|2"]);
    }

    #[test]
    fn directive_prologue_is_preserved() {
        let src = "function s(){'use strict'; return 1}";
        let spans = scan_functions(src, "d.js").unwrap();
        assert_eq!(&src[spans[0].offsets.probe_at..], " return 1}");
    }

    #[test]
    fn unbalanced_source_is_rejected() {
        let err = scan_functions("function f() {\n  return (1;\n}", "bad.js").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(scan_functions("function (", "bad.js").is_err());
    }

    #[test]
    fn labels_and_case_blocks() {
        let src = "outer: { f(); }\nswitch (x) { case 1: { g(); } default: { } }\nconst z = q ? {a: () => 1} : {};";
        let spans = scan_functions(src, "l.js").unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].kind, FunctionKind::ArrowExpression);
    }
}
