use std::fmt;

use num_bigint::BigInt;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    // keywords
    Contract,
    Function,
    Returns,
    Return,
    IntTy,
    AddressTy,
    EngineKw,
    EnginesKw,
    GlobalKw,
    If,
    Then,
    Else,
    While,
    Skip,
    Relay,
    Addr,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
    At,
    Assign,
    EqSign,
    Plus,
    Minus,
    Le,
    Lt,
    Ge,
    Gt,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.spelling()),
        }
    }

    pub fn spelling(&self) -> &'static str {
        match self {
            Tok::Ident(_) => "identifier",
            Tok::Int(_) => "integer",
            Tok::Contract => "contract",
            Tok::Function => "function",
            Tok::Returns => "returns",
            Tok::Return => "return",
            Tok::IntTy => "int",
            Tok::AddressTy => "address",
            Tok::EngineKw => "engine",
            Tok::EnginesKw => "engines",
            Tok::GlobalKw => "global",
            Tok::If => "if",
            Tok::Then => "then",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::Skip => "skip",
            Tok::Relay => "relay",
            Tok::Addr => "addr",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::At => "@",
            Tok::Assign => ":=",
            Tok::EqSign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Le => "<=",
            Tok::Lt => "<",
            Tok::Ge => ">=",
            Tok::Gt => ">",
            Tok::Eof => "end of input",
        }
    }
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "contract" => Tok::Contract,
        "function" => Tok::Function,
        "returns" => Tok::Returns,
        "return" => Tok::Return,
        "int" => Tok::IntTy,
        "address" => Tok::AddressTy,
        "engine" => Tok::EngineKw,
        "engines" => Tok::EnginesKw,
        "global" => Tok::GlobalKw,
        "if" => Tok::If,
        "then" => Tok::Then,
        "else" => Tok::Else,
        "while" => Tok::While,
        "skip" => Tok::Skip,
        "relay" => Tok::Relay,
        "addr" => Tok::Addr,
        _ => return None,
    })
}

pub fn is_reserved(word: &str) -> bool {
    keyword(word).is_some()
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

/// Splits source text into tokens with longest-match on operators.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
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
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = keyword(&word).unwrap_or(Tok::Ident(word));
            out.push(Token { tok, pos });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let digits: String = chars[start..i].iter().collect();
            let value = digits.parse::<BigInt>().expect("digit run parses");
            out.push(Token {
                tok: Tok::Int(value),
                pos,
            });
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, width) = match (c, next) {
            (':', Some('=')) => (Tok::Assign, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            ('=', _) => (Tok::EqSign, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            (';', _) => (Tok::Semi, 1),
            (',', _) => (Tok::Comma, 1),
            ('@', _) => (Tok::At, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            _ => return Err(ParseError::Lex { pos, found: c }),
        };
        for _ in 0..width {
            bump!();
        }
        out.push(Token { tok, pos });
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn longest_match_operators() {
        assert_eq!(
            kinds("a<=b := c<d"),
            vec![
                Tok::Ident("a".into()),
                Tok::Le,
                Tok::Ident("b".into()),
                Tok::Assign,
                Tok::Ident("c".into()),
                Tok::Lt,
                Tok::Ident("d".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn keywords_are_reserved_and_comments_skipped() {
        assert_eq!(
            kinds("relay // trailing\n engines"),
            vec![Tok::Relay, Tok::EnginesKw, Tok::Eof]
        );
        assert!(is_reserved("global"));
        assert!(!is_reserved("balance"));
    }

    #[test]
    fn positions_track_lines() {
        let toks = tokenize("a\n  b").unwrap();
        assert_eq!(toks[1].pos, Pos { line: 2, col: 3 });
    }

    #[test]
    fn dollar_is_rejected() {
        assert!(matches!(
            tokenize("ret$1"),
            Err(ParseError::Lex { found: '$', .. })
        ));
    }
}
