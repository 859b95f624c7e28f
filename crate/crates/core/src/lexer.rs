//! Tokenizer shared by the facts, schema, constraint, query and program
//! dialects. `%` starts a comment that runs to the end of the line.

use std::fmt;

use thiserror::Error;

/// 1-based source location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// A quoted string, either `'...'` or `"..."`.
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Slash,
    Pipe,
    /// `->`
    Arrow,
    /// `<-`
    LeftArrow,
    /// `:-`
    If,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(i) => write!(f, "integer `{i}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::LeftArrow => f.write_str("`<-`"),
            Tok::If => f.write_str("`:-`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Ne => f.write_str("`!=`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Ge => f.write_str("`>=`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {span}: {message}")]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
}

impl SyntaxError {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        SyntaxError {
            span,
            message: message.into(),
        }
    }
}

/// Errors raised by every text front end in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{span}: unknown predicate `{name}`")]
    UnknownPredicate { name: String, span: Span },
    #[error("{span}: predicate `{name}` has arity {expected}, found {found} argument(s)")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
        span: Span,
    },
    #[error("{span}: {message}")]
    Invalid { span: Span, message: String },
}

impl ParseError {
    pub fn invalid(span: Span, message: impl Into<String>) -> Self {
        ParseError::Invalid {
            span,
            message: message.into(),
        }
    }

    pub fn span(&self) -> Span {
        match self {
            ParseError::Syntax(e) => e.span,
            ParseError::UnknownPredicate { span, .. }
            | ParseError::ArityMismatch { span, .. }
            | ParseError::Invalid { span, .. } => *span,
        }
    }
}

pub fn tokenize(text: &str) -> Result<Vec<(Tok, Span)>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, column: col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump!();
            }
            out.push((Tok::Ident(s), span));
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && next.is_some_and(|n| n.is_ascii_digit())) {
            let mut s = String::new();
            s.push(c);
            bump!();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                bump!();
            }
            let value = s
                .parse::<i64>()
                .map_err(|_| SyntaxError::new(span, format!("integer `{s}` out of range")))?;
            out.push((Tok::Int(value), span));
            continue;
        }
        if c == '\'' || c == '"' {
            let quote = c;
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(SyntaxError::new(span, "unterminated string literal"))
                    }
                    Some(&ch) if ch == quote => {
                        bump!();
                        break;
                    }
                    Some('\\') if chars.get(i + 1).is_some() => {
                        bump!();
                        s.push(chars[i]);
                        bump!();
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            out.push((Tok::Str(s), span));
            continue;
        }
        let (tok, width) = match (c, next) {
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('<', Some('-')) => (Tok::LeftArrow, 2),
            (':', Some('-')) => (Tok::If, 2),
            ('!', Some('=')) => (Tok::Ne, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('<', Some('>')) => (Tok::Ne, 2),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            (',', _) => (Tok::Comma, 1),
            ('.', _) => (Tok::Dot, 1),
            (':', _) => (Tok::Colon, 1),
            ('/', _) => (Tok::Slash, 1),
            ('|', _) => (Tok::Pipe, 1),
            ('=', _) => (Tok::Eq, 1),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            _ => return Err(SyntaxError::new(span, format!("unexpected character `{c}`"))),
        };
        for _ in 0..width {
            bump!();
        }
        out.push((tok, span));
    }
    Ok(out)
}

/// Cursor over a token stream with the usual peek/expect helpers.
pub struct Cursor {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    end: Span,
}

impl Cursor {
    pub fn new(text: &str) -> Result<Self, SyntaxError> {
        let toks = tokenize(text)?;
        let end = end_span(text);
        Ok(Cursor { toks, pos: 0, end })
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    pub fn peek_nth(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.pos + n).map(|(t, _)| t)
    }

    pub fn span(&self) -> Span {
        self.toks.get(self.pos).map(|(_, s)| *s).unwrap_or(self.end)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Option<(Tok, Span)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<Span, SyntaxError> {
        let span = self.span();
        match self.next() {
            Some((t, s)) if &t == tok => Ok(s),
            Some((t, s)) => Err(SyntaxError::new(s, format!("expected {tok}, found {t}"))),
            None => Err(SyntaxError::new(span, format!("expected {tok}, found end of input"))),
        }
    }

    pub fn ident(&mut self) -> Result<(String, Span), SyntaxError> {
        let span = self.span();
        match self.next() {
            Some((Tok::Ident(s), sp)) => Ok((s, sp)),
            Some((t, sp)) => Err(SyntaxError::new(sp, format!("expected identifier, found {t}"))),
            None => Err(SyntaxError::new(span, "expected identifier, found end of input")),
        }
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.span(), message)
    }

    pub fn unexpected(&self, what: &str) -> SyntaxError {
        match self.peek() {
            Some(t) => self.error(format!("expected {what}, found {t}")),
            None => self.error(format!("expected {what}, found end of input")),
        }
    }
}

fn end_span(text: &str) -> Span {
    let line = text.lines().count().max(1);
    let column = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    Span { line, column }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operators_and_comments() {
        let toks: Vec<Tok> = tokenize("a v b :- c, not d, X != null. % trailing\n p(x) -> q(x) <- -3")
            .unwrap()
            .into_iter()
            .map(|(t, _)| t)
            .collect();
        assert!(toks.contains(&Tok::If));
        assert!(toks.contains(&Tok::Ne));
        assert!(toks.contains(&Tok::Arrow));
        assert!(toks.contains(&Tok::LeftArrow));
        assert_eq!(toks.last(), Some(&Tok::Int(-3)));
        assert!(!toks.iter().any(|t| matches!(t, Tok::Ident(s) if s == "trailing")));
    }

    #[test]
    fn reports_location() {
        let err = tokenize("p(a).\n  q(#).").unwrap_err();
        assert_eq!(err.span, Span { line: 2, column: 5 });
    }
}
