//! Tokenizer for the definition language.

use super::diagnostic::{Diagnostic, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Str,
    Number,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Comma,
    Pipe,
    Eq,
    NotEq,
    Arrow,
    Semi,
    Newline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    /// Source text, except for strings where this is the unescaped content.
    pub text: String,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Splits `src` into tokens. Bad characters are reported and skipped so the
/// parser still sees the rest of the file.
pub fn tokenize(src: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let bytes = src.as_bytes();
    let mut chars = src.char_indices().peekable();

    let punct = |kind, start: usize, len: usize| Token {
        kind,
        span: Span::new(start, start + len),
        text: src[start..start + len].to_string(),
    };

    while let Some((start, c)) = chars.next() {
        match c {
            '\n' => tokens.push(punct(TokenKind::Newline, start, 1)),
            c if c.is_whitespace() => {}
            '#' => {
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '{' => tokens.push(punct(TokenKind::LBrace, start, 1)),
            '}' => tokens.push(punct(TokenKind::RBrace, start, 1)),
            '(' => tokens.push(punct(TokenKind::LParen, start, 1)),
            ')' => tokens.push(punct(TokenKind::RParen, start, 1)),
            ':' => tokens.push(punct(TokenKind::Colon, start, 1)),
            ',' => tokens.push(punct(TokenKind::Comma, start, 1)),
            '|' => tokens.push(punct(TokenKind::Pipe, start, 1)),
            ';' => tokens.push(punct(TokenKind::Semi, start, 1)),
            '=' => tokens.push(punct(TokenKind::Eq, start, 1)),
            '-' if bytes.get(start + 1) == Some(&b'>') => {
                chars.next();
                tokens.push(punct(TokenKind::Arrow, start, 2));
            }
            '!' if bytes.get(start + 1) == Some(&b'=') => {
                chars.next();
                tokens.push(punct(TokenKind::NotEq, start, 2));
            }
            '"' => {
                let mut text = String::new();
                let mut end = None;
                while let Some((i, c)) = chars.next() {
                    match c {
                        '"' => {
                            end = Some(i + 1);
                            break;
                        }
                        '\\' => match chars.next() {
                            Some((_, e @ ('"' | '\\'))) => text.push(e),
                            Some((_, 'n')) => text.push('\n'),
                            Some((j, other)) => {
                                diags.push(Diagnostic::error(
                                    "DSL-002",
                                    Span::new(i, j + other.len_utf8()),
                                    format!("unknown escape `\\{other}`"),
                                ));
                            }
                            None => break,
                        },
                        '\n' => {
                            // strings never span lines
                            end = None;
                            diags.push(Diagnostic::error(
                                "DSL-002",
                                Span::new(start, i),
                                "unterminated string literal",
                            ));
                            tokens.push(punct(TokenKind::Newline, i, 1));
                            text.clear();
                            break;
                        }
                        c => text.push(c),
                    }
                }
                match end {
                    Some(end) => tokens.push(Token { kind: TokenKind::Str, span: Span::new(start, end), text }),
                    None if !diags.last().is_some_and(|d| d.span.start == start) => {
                        diags.push(Diagnostic::error(
                            "DSL-002",
                            Span::new(start, src.len()),
                            "unterminated string literal",
                        ));
                    }
                    None => {}
                }
            }
            c if c.is_ascii_digit() => {
                let mut end = start + 1;
                let mut seen_dot = false;
                while let Some(&(i, c)) = chars.peek() {
                    if c.is_ascii_digit() {
                        end = i + 1;
                        chars.next();
                    } else if c == '.' && !seen_dot && src[i + 1..].starts_with(|d: char| d.is_ascii_digit()) {
                        seen_dot = true;
                        end = i + 1;
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push(punct(TokenKind::Number, start, end - start));
            }
            c if is_ident_start(c) => {
                let mut end = start + c.len_utf8();
                while let Some(&(i, c)) = chars.peek() {
                    // `-` followed by `>` is an arrow, not part of the name
                    if is_ident_continue(c) && !(c == '-' && bytes.get(i + 1) == Some(&b'>')) {
                        end = i + c.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push(punct(TokenKind::Ident, start, end - start));
            }
            other => diags.push(Diagnostic::error(
                "DSL-001",
                Span::new(start, start + other.len_utf8()),
                format!("unexpected character `{other}`"),
            )),
        }
    }
    (tokens, diags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).0.into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn hyphenated_identifiers_and_arrows() {
        let (toks, diags) = tokenize("\"shines\" -> radiation-out a->b");
        assert!(diags.is_empty());
        let texts: Vec<_> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["shines", "->", "radiation-out", "a", "->", "b"]);
    }

    #[test]
    fn numbers_and_comments() {
        assert_eq!(
            kinds("saliency 0.5 # trailing\n1"),
            [TokenKind::Ident, TokenKind::Number, TokenKind::Newline, TokenKind::Number]
        );
    }

    #[test]
    fn bad_character_is_reported_and_skipped() {
        let (toks, diags) = tokenize("a @ b");
        assert_eq!(toks.len(), 2);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "DSL-001");
        assert_eq!(diags[0].span, Span::new(2, 3));
    }

    #[test]
    fn unterminated_string() {
        let (_, diags) = tokenize("edge \"heat\nnext");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "DSL-002");
        let (_, diags) = tokenize("edge \"heat");
        assert_eq!(diags[0].span, Span::new(5, 10));
    }
}
