//! Shared tokenizer for the four modeling languages and the action-script blocks.

use super::diagnostic::{Diagnostic, Location};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Str(String),
    Int(i64),
    Decimal(f64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Lt,
    Gt,
    Comma,
    Semi,
    Colon,
    Dot,
    Arrow,
    Pipe,
    OrOr,
    AndAnd,
    Assign,
    EqEq,
    NotEq,
    Bang,
    /// Arithmetic and other operators the languages do not support; kept as
    /// tokens so the parser can name them in a diagnostic.
    Operator(String),
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Str(_) => "string literal".to_string(),
            TokenKind::Int(i) => format!("number `{i}`"),
            TokenKind::Decimal(d) => format!("number `{d}`"),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::LBracket => "`[`".into(),
            TokenKind::RBracket => "`]`".into(),
            TokenKind::Lt => "`<`".into(),
            TokenKind::Gt => "`>`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Dot => "`.`".into(),
            TokenKind::Arrow => "`->`".into(),
            TokenKind::Pipe => "`|`".into(),
            TokenKind::OrOr => "`||`".into(),
            TokenKind::AndAnd => "`&&`".into(),
            TokenKind::Assign => "`=`".into(),
            TokenKind::EqEq => "`==`".into(),
            TokenKind::NotEq => "`!=`".into(),
            TokenKind::Bang => "`!`".into(),
            TokenKind::Operator(op) => format!("operator `{op}`"),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: u32,
    pub column: u32,
}

pub fn tokenize(file: &str, source: &str) -> Result<Vec<Token>, Diagnostic> {
    Lexer::new(file, source).run()
}

struct Lexer<'a> {
    file: &'a str,
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Lexer<'a> {
    fn new(file: &'a str, source: &str) -> Self {
        Lexer {
            file,
            chars: source.chars().collect(),
            pos: 0,
            line: 1,
            column: 1,
        }
    }

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

    fn error(&self, line: u32, column: u32, message: impl Into<String>) -> Diagnostic {
        Diagnostic::error(Location::new(self.file, line, column), "lex", message)
    }

    fn run(mut self) -> Result<Vec<Token>, Diagnostic> {
        let mut tokens = Vec::new();
        loop {
            self.skip_trivia();
            let (line, column) = (self.line, self.column);
            let Some(c) = self.peek() else {
                tokens.push(Token {
                    kind: TokenKind::Eof,
                    line,
                    column,
                });
                return Ok(tokens);
            };
            let kind = if c.is_alphabetic() || c == '_' {
                let mut ident = String::new();
                while let Some(c) = self.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        ident.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                TokenKind::Ident(ident)
            } else if c.is_ascii_digit() {
                self.number(line, column)?
            } else if c == '"' {
                self.string(line, column)?
            } else {
                self.bump();
                let next = self.peek();
                match (c, next) {
                    ('-', Some('>')) => {
                        self.bump();
                        TokenKind::Arrow
                    }
                    ('|', Some('|')) => {
                        self.bump();
                        TokenKind::OrOr
                    }
                    ('&', Some('&')) => {
                        self.bump();
                        TokenKind::AndAnd
                    }
                    ('=', Some('=')) => {
                        self.bump();
                        TokenKind::EqEq
                    }
                    ('!', Some('=')) => {
                        self.bump();
                        TokenKind::NotEq
                    }
                    ('{', _) => TokenKind::LBrace,
                    ('}', _) => TokenKind::RBrace,
                    ('(', _) => TokenKind::LParen,
                    (')', _) => TokenKind::RParen,
                    ('[', _) => TokenKind::LBracket,
                    (']', _) => TokenKind::RBracket,
                    ('<', _) => TokenKind::Lt,
                    ('>', _) => TokenKind::Gt,
                    (',', _) => TokenKind::Comma,
                    (';', _) => TokenKind::Semi,
                    (':', _) => TokenKind::Colon,
                    ('.', _) => TokenKind::Dot,
                    ('|', _) => TokenKind::Pipe,
                    ('=', _) => TokenKind::Assign,
                    ('!', _) => TokenKind::Bang,
                    ('+' | '-' | '*' | '/' | '%' | '&' | '^' | '?' | '~', _) => {
                        let mut op = c.to_string();
                        if matches!((c, next), ('+', Some('+')) | ('-', Some('-'))) {
                            self.bump();
                            op.push(c);
                        }
                        TokenKind::Operator(op)
                    }
                    _ => {
                        return Err(self.error(line, column, format!("unexpected character `{c}`")));
                    }
                }
            };
            tokens.push(Token { kind, line, column });
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek_at(1) == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn number(&mut self, line: u32, column: u32) -> Result<TokenKind, Diagnostic> {
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        let fractional = self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit());
        if fractional {
            text.push('.');
            self.bump();
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    text.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            text.parse::<f64>()
                .map(TokenKind::Decimal)
                .map_err(|_| self.error(line, column, format!("invalid number `{text}`")))
        } else {
            text.parse::<i64>()
                .map(TokenKind::Int)
                .map_err(|_| self.error(line, column, format!("number `{text}` out of range")))
        }
    }

    fn string(&mut self, line: u32, column: u32) -> Result<TokenKind, Diagnostic> {
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error(line, column, "unterminated string literal")),
                Some('"') => return Ok(TokenKind::Str(value)),
                Some('\\') => match self.bump() {
                    Some('n') => value.push('\n'),
                    Some('t') => value.push('\t'),
                    Some('"') => value.push('"'),
                    Some('\\') => value.push('\\'),
                    Some(other) => {
                        return Err(self.error(
                            self.line,
                            self.column.saturating_sub(1),
                            format!("unknown escape `\\{other}`"),
                        ))
                    }
                    None => return Err(self.error(line, column, "unterminated string literal")),
                },
                Some(c) => value.push(c),
            }
        }
    }
}

/// Inverse of the string-literal lexing rules.
pub fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize("t", src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn arrows_pipes_and_comments() {
        assert_eq!(
            kinds("A.o -> B.i | C.i; // trailing"),
            vec![
                TokenKind::Ident("A".into()),
                TokenKind::Dot,
                TokenKind::Ident("o".into()),
                TokenKind::Arrow,
                TokenKind::Ident("B".into()),
                TokenKind::Dot,
                TokenKind::Ident("i".into()),
                TokenKind::Pipe,
                TokenKind::Ident("C".into()),
                TokenKind::Dot,
                TokenKind::Ident("i".into()),
                TokenKind::Semi,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn numbers_and_strings() {
        assert_eq!(
            kinds(r#"12 1.5 "a\"b""#),
            vec![
                TokenKind::Int(12),
                TokenKind::Decimal(1.5),
                TokenKind::Str("a\"b".into()),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("t", "a\n  b").unwrap();
        assert_eq!((toks[0].line, toks[0].column), (1, 1));
        assert_eq!((toks[1].line, toks[1].column), (2, 3));
    }

    #[test]
    fn unterminated_string_is_located() {
        let err = tokenize("f.page", "text \"abc").unwrap_err();
        assert_eq!(err.code, "lex");
        assert_eq!((err.location.line, err.location.column), (1, 6));
    }

    #[test]
    fn quote_inverts_lexing() {
        let s = "say \"hi\"\\\n";
        let toks = tokenize("t", &quote(s)).unwrap();
        assert_eq!(toks[0].kind, TokenKind::Str(s.into()));
    }
}
