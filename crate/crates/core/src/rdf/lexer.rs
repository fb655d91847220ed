//! Tokenizer shared by the Turtle and SPARQL Update parsers.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    IriRef(String),
    PName { prefix: String, local: String },
    BlankLabel(String),
    Var(String),
    Str(String),
    Integer(String),
    Decimal(String),
    Double(String),
    LangTag(String),
    DoubleCaret,
    Dot,
    Semicolon,
    Comma,
    LBracket,
    RBracket,
    LParen,
    RParen,
    LBrace,
    RBrace,
    AtPrefix,
    AtBase,
    Word(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::IriRef(s) => write!(f, "<{s}>"),
            Tok::PName { prefix, local } => write!(f, "{prefix}:{local}"),
            Tok::BlankLabel(s) => write!(f, "_:{s}"),
            Tok::Var(s) => write!(f, "?{s}"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Integer(s) | Tok::Decimal(s) | Tok::Double(s) | Tok::Word(s) => f.write_str(s),
            Tok::LangTag(s) => write!(f, "@{s}"),
            Tok::DoubleCaret => f.write_str("^^"),
            Tok::Dot => f.write_str("'.'"),
            Tok::Semicolon => f.write_str("';'"),
            Tok::Comma => f.write_str("','"),
            Tok::LBracket => f.write_str("'['"),
            Tok::RBracket => f.write_str("']'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::LBrace => f.write_str("'{'"),
            Tok::RBrace => f.write_str("'}'"),
            Tok::AtPrefix => f.write_str("@prefix"),
            Tok::AtBase => f.write_str("@base"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

/// A syntax error at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl SyntaxError {
    pub(crate) fn at(token: &Token, message: impl Into<String>) -> Self {
        SyntaxError {
            line: token.line,
            column: token.column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Turtle,
    Sparql,
}

pub(crate) fn tokenize(input: &str, mode: Mode) -> Result<Vec<Token>, SyntaxError> {
    let mut lexer = Lexer {
        chars: input.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
        mode,
    };
    let mut out = Vec::new();
    loop {
        let token = lexer.next_token()?;
        let done = token.tok == Tok::Eof;
        out.push(token);
        if done {
            return Ok(out);
        }
    }
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    mode: Mode,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, column: usize, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line,
            column,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, SyntaxError> {
        self.skip_trivia();
        let (line, column) = (self.line, self.column);
        let make = |tok| Ok(Token { tok, line, column });
        let Some(c) = self.peek() else {
            return make(Tok::Eof);
        };
        match c {
            '<' => {
                self.bump();
                let mut iri = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.err(line, column, "unterminated IRI")),
                        Some('>') => break,
                        Some('\\') => iri.push(self.unicode_escape(line, column)?),
                        Some(c)
                            if c.is_whitespace()
                                || matches!(c, '"' | '{' | '}' | '|' | '^' | '`') =>
                        {
                            return Err(self.err(
                                line,
                                column,
                                format!("invalid character {c:?} in IRI"),
                            ))
                        }
                        Some(c) => iri.push(c),
                    }
                }
                make(Tok::IriRef(iri))
            }
            '"' | '\'' => {
                let s = self.string(c, line, column)?;
                make(Tok::Str(s))
            }
            '@' => {
                self.bump();
                let mut word = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || (c == '-' && !word.is_empty()) {
                        word.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                match word.as_str() {
                    "" => Err(self.err(line, column, "empty language tag")),
                    "prefix" => make(Tok::AtPrefix),
                    "base" => make(Tok::AtBase),
                    _ => make(Tok::LangTag(word)),
                }
            }
            '^' => {
                self.bump();
                if self.peek() == Some('^') {
                    self.bump();
                    make(Tok::DoubleCaret)
                } else {
                    Err(self.err(line, column, "expected '^^'"))
                }
            }
            '.' if !self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) => {
                self.bump();
                make(Tok::Dot)
            }
            ';' => {
                self.bump();
                make(Tok::Semicolon)
            }
            ',' => {
                self.bump();
                make(Tok::Comma)
            }
            '[' => {
                self.bump();
                make(Tok::LBracket)
            }
            ']' => {
                self.bump();
                make(Tok::RBracket)
            }
            '(' => {
                self.bump();
                make(Tok::LParen)
            }
            ')' => {
                self.bump();
                make(Tok::RParen)
            }
            '{' => {
                self.bump();
                make(Tok::LBrace)
            }
            '}' => {
                self.bump();
                make(Tok::RBrace)
            }
            '?' | '$' => {
                if self.mode == Mode::Turtle {
                    return Err(self.err(line, column, "variables are not allowed in Turtle"));
                }
                self.bump();
                let mut name = String::new();
                while let Some(c) = self.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        name.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                if name.is_empty() {
                    return Err(self.err(line, column, "empty variable name"));
                }
                make(Tok::Var(name))
            }
            '_' if self.peek_at(1) == Some(':') => {
                self.bump();
                self.bump();
                let mut label = String::new();
                while let Some(c) = self.peek() {
                    if is_pn_char(c) || c == '.' {
                        label.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.unread_trailing_dots(&mut label);
                if label.is_empty() {
                    return Err(self.err(line, column, "empty blank node label"));
                }
                make(Tok::BlankLabel(label))
            }
            c if c.is_ascii_digit() || c == '+' || c == '-' || c == '.' => {
                self.number(line, column)
            }
            c if c == ':' || is_pn_chars_base(c) || c == '_' => self.name(line, column),
            other => Err(self.err(line, column, format!("unexpected character {other:?}"))),
        }
    }

    fn unread_trailing_dots(&mut self, text: &mut String) {
        while text.ends_with('.') {
            text.pop();
            self.pos -= 1;
            self.column -= 1;
        }
    }

    fn unicode_escape(&mut self, line: usize, column: usize) -> Result<char, SyntaxError> {
        let len = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.err(line, column, "invalid escape in IRI")),
        };
        self.hex_char(len, line, column)
    }

    fn hex_char(&mut self, len: usize, line: usize, column: usize) -> Result<char, SyntaxError> {
        let mut code = 0u32;
        for _ in 0..len {
            let d = self
                .bump()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.err(line, column, "invalid unicode escape"))?;
            code = code * 16 + d;
        }
        char::from_u32(code).ok_or_else(|| self.err(line, column, "invalid unicode code point"))
    }

    fn string(&mut self, quote: char, line: usize, column: usize) -> Result<String, SyntaxError> {
        let long = self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote);
        let delim = if long { 3 } else { 1 };
        for _ in 0..delim {
            self.bump();
        }
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.err(line, column, "unterminated string literal"));
            };
            match c {
                '\\' => {
                    let e = self
                        .bump()
                        .ok_or_else(|| self.err(line, column, "unterminated escape"))?;
                    out.push(match e {
                        't' => '\t',
                        'b' => '\u{8}',
                        'n' => '\n',
                        'r' => '\r',
                        'f' => '\u{c}',
                        '"' => '"',
                        '\'' => '\'',
                        '\\' => '\\',
                        'u' => self.hex_char(4, line, column)?,
                        'U' => self.hex_char(8, line, column)?,
                        other => {
                            return Err(self.err(
                                line,
                                column,
                                format!("invalid escape '\\{other}'"),
                            ))
                        }
                    });
                }
                c if c == quote && !long => return Ok(out),
                c if c == quote && long => {
                    if self.peek() == Some(quote) && self.peek_at(1) == Some(quote) {
                        // a run of more than three quotes ends with the last three
                        if self.peek_at(2) == Some(quote) {
                            out.push(c);
                            continue;
                        }
                        self.bump();
                        self.bump();
                        return Ok(out);
                    }
                    out.push(c);
                }
                '\n' | '\r' if !long => {
                    return Err(self.err(line, column, "newline in short string literal"))
                }
                c => out.push(c),
            }
        }
    }

    fn number(&mut self, line: usize, column: usize) -> Result<Token, SyntaxError> {
        let mut text = String::new();
        if let Some(c @ ('+' | '-')) = self.peek() {
            text.push(c);
            self.bump();
        }
        let mut int_digits = 0;
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            text.push(c);
            self.bump();
            int_digits += 1;
        }
        let mut frac_digits = 0;
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            text.push('.');
            self.bump();
            while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                text.push(c);
                self.bump();
                frac_digits += 1;
            }
        }
        if int_digits + frac_digits == 0 {
            return Err(self.err(line, column, "malformed number"));
        }
        let mut exponent = false;
        if let Some('e' | 'E') = self.peek() {
            let mut lookahead = 1;
            if let Some('+' | '-') = self.peek_at(1) {
                lookahead = 2;
            }
            if self.peek_at(lookahead).is_some_and(|c| c.is_ascii_digit()) {
                exponent = true;
                for _ in 0..lookahead {
                    text.push(self.bump().unwrap_or('e'));
                }
                while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                    text.push(c);
                    self.bump();
                }
            }
        }
        let tok = if exponent {
            Tok::Double(text)
        } else if frac_digits > 0 {
            Tok::Decimal(text)
        } else {
            Tok::Integer(text)
        };
        Ok(Token { tok, line, column })
    }

    fn name(&mut self, line: usize, column: usize) -> Result<Token, SyntaxError> {
        let mut prefix = String::new();
        while let Some(c) = self.peek() {
            if is_pn_char(c) || c == '.' {
                prefix.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if self.peek() != Some(':') {
            self.unread_trailing_dots(&mut prefix);
            return Ok(Token {
                tok: Tok::Word(prefix),
                line,
                column,
            });
        }
        if prefix.ends_with('.') {
            return Err(self.err(line, column, "prefix may not end with '.'"));
        }
        self.bump();
        let mut local = String::new();
        let mut trailing_dots = 0usize;
        while let Some(c) = self.peek() {
            if is_pn_char(c) || c == ':' || (c == '.' && !local.is_empty()) {
                local.push(c);
                self.bump();
                trailing_dots = if c == '.' { trailing_dots + 1 } else { 0 };
            } else if c == '%' {
                self.bump();
                let h1 = self.bump().filter(char::is_ascii_hexdigit);
                let h2 = self.bump().filter(char::is_ascii_hexdigit);
                match (h1, h2) {
                    (Some(a), Some(b)) => {
                        local.push('%');
                        local.push(a);
                        local.push(b);
                        trailing_dots = 0;
                    }
                    _ => return Err(self.err(line, column, "invalid percent escape")),
                }
            } else if c == '\\' {
                self.bump();
                match self.bump() {
                    Some(e) if "_~.-!$&'()*+,;=/?#@%".contains(e) => {
                        local.push(e);
                        trailing_dots = 0;
                    }
                    _ => return Err(self.err(line, column, "invalid local name escape")),
                }
            } else {
                break;
            }
        }
        for _ in 0..trailing_dots {
            local.pop();
            self.pos -= 1;
            self.column -= 1;
        }
        Ok(Token {
            tok: Tok::PName { prefix, local },
            line,
            column,
        })
    }
}

fn is_pn_chars_base(c: char) -> bool {
    c.is_alphabetic()
}

pub(crate) fn is_pn_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '\u{b7}'
}
