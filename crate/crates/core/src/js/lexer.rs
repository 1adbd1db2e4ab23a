//! Token-level scanner for ECMAScript source text.
//!
//! The lexer only knows enough grammar to tokenize correctly: it tracks
//! brace and paren context so it can tell a regular expression literal from
//! a division operator and so it can resume a template literal after a
//! `${ ... }` substitution. It never builds an AST.

use super::{LineIndex, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Ident,
    PrivateName,
    Punct,
    Number,
    Str,
    Regex,
    /// A template without substitutions.
    Template,
    /// `` `...${ ``
    TemplateHead,
    /// `` }...${ ``
    TemplateMiddle,
    /// `` }...` ``
    TemplateTail,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
    /// A line terminator separates this token from the previous one.
    pub nl_before: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BraceCtx {
    Block,
    Expr,
    Template,
}

/// Keywords after which a `/` starts a regular expression.
const REGEX_AFTER_KEYWORDS: &[&str] = &[
    "return", "typeof", "instanceof", "in", "of", "new", "delete", "void", "throw", "case", "do",
    "else", "yield", "await",
];

/// Keywords after which a `{` opens an expression (object literal).
const EXPR_BRACE_AFTER_KEYWORDS: &[&str] = &[
    "return", "typeof", "instanceof", "in", "of", "new", "delete", "void", "throw", "case",
    "yield", "await",
];

const PUNCTUATORS: &[&str] = &[
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "??=", "=>", "==",
    "!=", "<=", ">=", "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "<<", ">>", "**", "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-",
    "*", "/", "%", "&", "|", "^", "!", "~", "?", ":", "=", ".", "@",
];

pub(crate) fn is_line_terminator(c: char) -> bool {
    matches!(c, '\n' | '\r' | '\u{2028}' | '\u{2029}')
}

fn is_id_start(c: char) -> bool {
    c == '$' || c == '_' || c == '\\' || c.is_alphabetic()
}

fn is_id_continue(c: char) -> bool {
    is_id_start(c) || c.is_ascii_digit() || c == '\u{200c}' || c == '\u{200d}' || c.is_alphanumeric()
}

pub(crate) struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    end: usize,
    lines: &'a LineIndex,
    tokens: Vec<Token>,
    braces: Vec<BraceCtx>,
    /// For each open paren: whether it follows `if`/`while`/`for`/`with`.
    parens: Vec<bool>,
    last_paren_control: bool,
    last_brace_block: bool,
    saw_newline: bool,
}

impl<'a> Lexer<'a> {
    /// Lexes `src[start..end]`; token offsets are absolute within `src`.
    pub fn new(src: &'a str, start: usize, end: usize, lines: &'a LineIndex) -> Self {
        Lexer {
            src,
            pos: start,
            end,
            lines,
            tokens: Vec::new(),
            braces: Vec::new(),
            parens: Vec::new(),
            last_paren_control: false,
            last_brace_block: true,
            saw_newline: false,
        }
    }

    pub fn tokenize(mut self) -> Result<Vec<Token>, ParseError> {
        // Hashbang only at the very start of a file.
        if self.pos == 0 && self.src[..self.end].starts_with("#!") {
            self.skip_line_comment();
        }
        loop {
            self.skip_trivia()?;
            if self.pos >= self.end {
                break;
            }
            self.lex_token()?;
        }
        if let Some(ctx) = self.braces.last() {
            let msg = if *ctx == BraceCtx::Template {
                "unterminated template substitution"
            } else {
                "unclosed `{`"
            };
            return Err(self.error_at(self.end, msg));
        }
        Ok(self.tokens)
    }

    fn error_at(&self, offset: usize, message: &str) -> ParseError {
        let (line, column) = self.lines.line_col(self.src, offset);
        ParseError {
            line,
            column,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..self.end].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..self.end].chars().nth(n)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..self.end]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_line_comment(&mut self) {
        while let Some(c) = self.peek() {
            if is_line_terminator(c) {
                break;
            }
            self.bump();
        }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        while let Some(c) = self.peek() {
            if is_line_terminator(c) {
                self.saw_newline = true;
                self.bump();
            } else if c.is_whitespace() || c == '\u{feff}' {
                self.bump();
            } else if self.rest().starts_with("//") {
                self.skip_line_comment();
            } else if self.rest().starts_with("/*") {
                let open = self.pos;
                self.pos += 2;
                match self.rest().find("*/") {
                    Some(i) => {
                        if self.src[self.pos..self.pos + i].chars().any(is_line_terminator) {
                            self.saw_newline = true;
                        }
                        self.pos += i + 2;
                    }
                    None => return Err(self.error_at(open, "unterminated block comment")),
                }
            } else {
                break;
            }
        }
        Ok(())
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        self.tokens.push(Token {
            kind,
            start,
            end: self.pos,
            nl_before: std::mem::take(&mut self.saw_newline),
        });
    }

    fn last(&self) -> Option<&Token> {
        self.tokens.last()
    }

    fn last_text(&self) -> &'a str {
        self.last().map(|t| &self.src[t.start..t.end]).unwrap_or("")
    }

    fn regex_allowed(&self) -> bool {
        let Some(prev) = self.last() else {
            return true;
        };
        let text = &self.src[prev.start..prev.end];
        match prev.kind {
            TokenKind::Number
            | TokenKind::Str
            | TokenKind::Regex
            | TokenKind::Template
            | TokenKind::TemplateTail
            | TokenKind::PrivateName => false,
            TokenKind::TemplateHead | TokenKind::TemplateMiddle => true,
            TokenKind::Ident => REGEX_AFTER_KEYWORDS.contains(&text),
            TokenKind::Punct => match text {
                ")" => self.last_paren_control,
                "]" | "++" | "--" => false,
                "}" => self.last_brace_block,
                _ => true,
            },
        }
    }

    fn brace_ctx_for_open(&self) -> BraceCtx {
        let Some(prev) = self.last() else {
            return BraceCtx::Block;
        };
        let text = &self.src[prev.start..prev.end];
        match prev.kind {
            TokenKind::Punct => match text {
                ")" | ";" | "{" | "}" | "=>" => BraceCtx::Block,
                _ => BraceCtx::Expr,
            },
            TokenKind::Ident if EXPR_BRACE_AFTER_KEYWORDS.contains(&text) => BraceCtx::Expr,
            TokenKind::TemplateHead | TokenKind::TemplateMiddle => BraceCtx::Expr,
            _ => BraceCtx::Block,
        }
    }

    fn lex_token(&mut self) -> Result<(), ParseError> {
        let start = self.pos;
        let c = self.peek().expect("not at end");

        if c == '`' {
            self.bump();
            return self.lex_template_rest(start, true);
        }
        if c == '"' || c == '\'' {
            return self.lex_string(start, c);
        }
        if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            self.lex_number();
            self.push(TokenKind::Number, start);
            return Ok(());
        }
        if c == '#' {
            self.bump();
            if !self.peek().is_some_and(is_id_start) {
                return Err(self.error_at(start, "unexpected `#`"));
            }
            self.lex_ident_chars()?;
            self.push(TokenKind::PrivateName, start);
            return Ok(());
        }
        if is_id_start(c) {
            self.lex_ident_chars()?;
            self.push(TokenKind::Ident, start);
            return Ok(());
        }
        if c == '/' && self.regex_allowed() {
            return self.lex_regex(start);
        }
        if c == '}' {
            return match self.braces.pop() {
                Some(BraceCtx::Template) => {
                    self.bump();
                    self.lex_template_rest(start, false)
                }
                Some(ctx) => {
                    self.bump();
                    self.last_brace_block = ctx == BraceCtx::Block;
                    self.push(TokenKind::Punct, start);
                    Ok(())
                }
                None => Err(self.error_at(start, "unmatched `}`")),
            };
        }

        let rest = self.rest();
        let Some(p) = PUNCTUATORS.iter().find(|p| rest.starts_with(**p)) else {
            return Err(self.error_at(start, &format!("unexpected character {c:?}")));
        };
        let mut len = p.len();
        // `?.` followed by a digit is a conditional, not optional chaining.
        if *p == "?." && rest[2..].starts_with(|d: char| d.is_ascii_digit()) {
            len = 1;
        }
        let text = &rest[..len];
        match text {
            "{" => {
                let ctx = self.brace_ctx_for_open();
                self.braces.push(ctx);
            }
            "(" => {
                let control = matches!(self.last_text(), "if" | "while" | "for" | "with")
                    && self.last().is_some_and(|t| t.kind == TokenKind::Ident);
                self.parens.push(control);
            }
            ")" => {
                self.last_paren_control = self.parens.pop().unwrap_or(false);
            }
            _ => {}
        }
        self.pos += len;
        self.push(TokenKind::Punct, start);
        Ok(())
    }

    fn lex_ident_chars(&mut self) -> Result<(), ParseError> {
        while let Some(c) = self.peek() {
            if c == '\\' {
                // \uXXXX or \u{...}
                let at = self.pos;
                self.bump();
                if self.bump() != Some('u') {
                    return Err(self.error_at(at, "invalid identifier escape"));
                }
                if self.peek() == Some('{') {
                    while let Some(d) = self.bump() {
                        if d == '}' {
                            break;
                        }
                    }
                } else {
                    for _ in 0..4 {
                        if !self.bump().is_some_and(|d| d.is_ascii_hexdigit()) {
                            return Err(self.error_at(at, "invalid identifier escape"));
                        }
                    }
                }
            } else if is_id_continue(c) {
                self.bump();
            } else {
                break;
            }
        }
        Ok(())
    }

    fn lex_number(&mut self) {
        let radix_prefix = self.peek() == Some('0')
            && matches!(self.peek_at(1), Some('x' | 'X' | 'o' | 'O' | 'b' | 'B'));
        if radix_prefix {
            self.pos += 2;
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                self.bump();
            }
            return;
        }
        let digits = |lx: &mut Self| {
            while lx.peek().is_some_and(|c| c.is_ascii_digit() || c == '_') {
                lx.bump();
            }
        };
        digits(self);
        if self.peek() == Some('.') {
            self.bump();
            digits(self);
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        if self.peek() == Some('n') {
            self.bump();
        }
    }

    fn lex_string(&mut self, start: usize, quote: char) -> Result<(), ParseError> {
        self.bump();
        loop {
            match self.bump() {
                None => return Err(self.error_at(start, "unterminated string literal")),
                Some('\\') => {
                    // Escaped line terminators are continuations; \r\n counts as one.
                    if self.peek() == Some('\r') && self.peek_at(1) == Some('\n') {
                        self.bump();
                    }
                    self.bump();
                }
                Some(c) if c == quote => break,
                Some('\n' | '\r') => {
                    return Err(self.error_at(start, "unterminated string literal"))
                }
                Some(_) => {}
            }
        }
        self.push(TokenKind::Str, start);
        Ok(())
    }

    /// Continues a template after its opening `` ` `` or a closing `}`.
    fn lex_template_rest(&mut self, start: usize, opened: bool) -> Result<(), ParseError> {
        loop {
            match self.bump() {
                None => return Err(self.error_at(start, "unterminated template literal")),
                Some('\\') => {
                    self.bump();
                }
                Some('`') => {
                    let kind = if opened {
                        TokenKind::Template
                    } else {
                        TokenKind::TemplateTail
                    };
                    self.push(kind, start);
                    return Ok(());
                }
                Some('$') if self.peek() == Some('{') => {
                    self.bump();
                    self.braces.push(BraceCtx::Template);
                    let kind = if opened {
                        TokenKind::TemplateHead
                    } else {
                        TokenKind::TemplateMiddle
                    };
                    self.push(kind, start);
                    return Ok(());
                }
                Some(_) => {}
            }
        }
    }

    fn lex_regex(&mut self, start: usize) -> Result<(), ParseError> {
        self.bump();
        let mut in_class = false;
        loop {
            match self.bump() {
                None => return Err(self.error_at(start, "unterminated regular expression")),
                Some(c) if is_line_terminator(c) => {
                    return Err(self.error_at(start, "unterminated regular expression"))
                }
                Some('\\') => {
                    if self.peek().is_some_and(is_line_terminator) {
                        return Err(self.error_at(start, "unterminated regular expression"));
                    }
                    self.bump();
                }
                Some('[') => in_class = true,
                Some(']') => in_class = false,
                Some('/') if !in_class => break,
                Some(_) => {}
            }
        }
        while self.peek().is_some_and(is_id_continue) {
            self.bump();
        }
        self.push(TokenKind::Regex, start);
        Ok(())
    }
}
