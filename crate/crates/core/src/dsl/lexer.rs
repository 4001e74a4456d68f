use std::fmt;

use super::ast::Span;
use super::error::DslError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Number,
    // keywords
    Primitives,
    Input,
    Hf,
    If,
    Elif,
    Else,
    And,
    Or,
    Not,
    // punctuation
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semicolon,
}

impl TokenKind {
    pub fn describe(self) -> &'static str {
        match self {
            TokenKind::Ident => "identifier",
            TokenKind::Number => "number",
            TokenKind::Primitives => "`primitives`",
            TokenKind::Input => "`input`",
            TokenKind::Hf => "`hf`",
            TokenKind::If => "`if`",
            TokenKind::Elif => "`elif`",
            TokenKind::Else => "`else`",
            TokenKind::And => "`and`",
            TokenKind::Or => "`or`",
            TokenKind::Not => "`not`",
            TokenKind::Assign => "`=`",
            TokenKind::Plus => "`+`",
            TokenKind::Minus => "`-`",
            TokenKind::Star => "`*`",
            TokenKind::Slash => "`/`",
            TokenKind::Lt => "`<`",
            TokenKind::Le => "`<=`",
            TokenKind::Gt => "`>`",
            TokenKind::Ge => "`>=`",
            TokenKind::EqEq => "`==`",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::Comma => "`,`",
            TokenKind::Semicolon => "`;`",
        }
    }

    fn keyword(word: &str) -> Option<TokenKind> {
        Some(match word {
            "primitives" => TokenKind::Primitives,
            "input" => TokenKind::Input,
            "hf" => TokenKind::Hf,
            "if" => TokenKind::If,
            "elif" => TokenKind::Elif,
            "else" => TokenKind::Else,
            "and" => TokenKind::And,
            "or" => TokenKind::Or,
            "not" => TokenKind::Not,
            _ => return None,
        })
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub lexeme: &'a str,
    pub span: Span,
}

pub fn is_keyword(word: &str) -> bool {
    TokenKind::keyword(word).is_some()
}

/// Splits program text into tokens. Whitespace and `#` line comments are dropped.
pub fn tokenize(source: &str) -> Result<Vec<Token<'_>>, DslError> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let kind = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            TokenKind::keyword(&source[start..i]).unwrap_or(TokenKind::Ident)
        } else if c.is_ascii_digit() {
            i = scan_number(bytes, i);
            TokenKind::Number
        } else {
            let next = bytes.get(i + 1).copied();
            let (kind, len) = match (c, next) {
                (b'<', Some(b'=')) => (TokenKind::Le, 2),
                (b'>', Some(b'=')) => (TokenKind::Ge, 2),
                (b'=', Some(b'=')) => (TokenKind::EqEq, 2),
                (b'<', _) => (TokenKind::Lt, 1),
                (b'>', _) => (TokenKind::Gt, 1),
                (b'=', _) => (TokenKind::Assign, 1),
                (b'+', _) => (TokenKind::Plus, 1),
                (b'-', _) => (TokenKind::Minus, 1),
                (b'*', _) => (TokenKind::Star, 1),
                (b'/', _) => (TokenKind::Slash, 1),
                (b'{', _) => (TokenKind::LBrace, 1),
                (b'}', _) => (TokenKind::RBrace, 1),
                (b'(', _) => (TokenKind::LParen, 1),
                (b')', _) => (TokenKind::RParen, 1),
                (b',', _) => (TokenKind::Comma, 1),
                (b';', _) => (TokenKind::Semicolon, 1),
                _ => {
                    let ch = source[start..].chars().next().unwrap_or('\0');
                    return Err(DslError::IllegalCharacter {
                        ch,
                        span: Span::new(start, start + ch.len_utf8()),
                    });
                }
            };
            i += len;
            kind
        };
        out.push(Token {
            kind,
            lexeme: &source[start..i],
            span: Span::new(start, i),
        });
    }
    Ok(out)
}

// digits ('.' digits)? ([eE] [+-]? digits)?
fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    let digits = |mut j: usize| {
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        j
    };
    i = digits(i);
    if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
        i = digits(i + 1);
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = digits(j);
        }
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn classifies_assignment() {
        use TokenKind::*;
        assert_eq!(
            kinds("ratio = intensity / perimeter"),
            vec![Ident, Assign, Ident, Slash, Ident]
        );
    }

    #[test]
    fn empty_source() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("  # only a comment\n\t").unwrap().is_empty());
    }

    #[test]
    fn illegal_character_offset() {
        let err = tokenize("area @ 3").unwrap_err();
        assert_eq!(
            err,
            DslError::IllegalCharacter {
                ch: '@',
                span: Span::new(5, 6)
            }
        );
    }

    #[test]
    fn non_ascii_is_illegal_with_full_char_span() {
        let err = tokenize("x = é").unwrap_err();
        assert_eq!(err.span(), Some(Span::new(4, 6)));
    }

    #[test]
    fn two_char_operators_and_numbers() {
        use TokenKind::*;
        let toks = tokenize("a<=1.5e3>=b==c<d>e").unwrap();
        let k: Vec<_> = toks.iter().map(|t| t.kind).collect();
        assert_eq!(
            k,
            vec![Ident, Le, Number, Ge, Ident, EqEq, Ident, Lt, Ident, Gt, Ident]
        );
        assert_eq!(toks[2].lexeme, "1.5e3");
    }

    #[test]
    fn comments_are_skipped() {
        use TokenKind::*;
        assert_eq!(kinds("hf # trailing\n if"), vec![Hf, If]);
    }

    #[test]
    fn dangling_dot_is_not_part_of_number() {
        assert!(tokenize("1.").is_err());
        assert_eq!(tokenize("1.25").unwrap()[0].lexeme, "1.25");
    }
}
