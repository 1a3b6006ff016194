//! Tokenizer shared by the modelling language and the property language.

use std::fmt;

use super::PrismError;

/// 1-based source position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    KwDtmc,
    KwCtmc,
    KwMdp,
    KwConst,
    KwInt,
    KwDouble,
    KwBool,
    KwFormula,
    KwLabel,
    KwModule,
    KwEndModule,
    KwInit,
    KwRewards,
    KwEndRewards,
    KwTrue,
    KwFalse,
    Ident(String),
    Int(i64),
    /// Real literal, kept as written so the exact domain can parse it exactly.
    Num(String),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Semi,
    Colon,
    Comma,
    Prime,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Arrow,
    DotDot,
    And,
    Or,
    DoublePipe,
    Not,
    Question,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Tok::KwDtmc => "dtmc",
            Tok::KwCtmc => "ctmc",
            Tok::KwMdp => "mdp",
            Tok::KwConst => "const",
            Tok::KwInt => "int",
            Tok::KwDouble => "double",
            Tok::KwBool => "bool",
            Tok::KwFormula => "formula",
            Tok::KwLabel => "label",
            Tok::KwModule => "module",
            Tok::KwEndModule => "endmodule",
            Tok::KwInit => "init",
            Tok::KwRewards => "rewards",
            Tok::KwEndRewards => "endrewards",
            Tok::KwTrue => "true",
            Tok::KwFalse => "false",
            Tok::Ident(name) => return write!(f, "identifier `{}`", name),
            Tok::Int(v) => return write!(f, "{}", v),
            Tok::Num(text) => return write!(f, "{}", text),
            Tok::Str(text) => return write!(f, "\"{}\"", text),
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Prime => "'",
            Tok::Eq => "=",
            Tok::Neq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Arrow => "->",
            Tok::DotDot => "..",
            Tok::And => "&",
            Tok::Or => "|",
            Tok::DoublePipe => "||",
            Tok::Not => "!",
            Tok::Question => "?",
            Tok::Eof => "end of input",
        };
        f.write_str(text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "dtmc" => Tok::KwDtmc,
        "ctmc" => Tok::KwCtmc,
        "mdp" => Tok::KwMdp,
        "const" => Tok::KwConst,
        "int" => Tok::KwInt,
        "double" => Tok::KwDouble,
        "bool" => Tok::KwBool,
        "formula" => Tok::KwFormula,
        "label" => Tok::KwLabel,
        "module" => Tok::KwModule,
        "endmodule" => Tok::KwEndModule,
        "init" => Tok::KwInit,
        "rewards" => Tok::KwRewards,
        "endrewards" => Tok::KwEndRewards,
        "true" => Tok::KwTrue,
        "false" => Tok::KwFalse,
        _ => return None,
    })
}

/// Splits `text` into tokens, skipping whitespace and `//` comments. The
/// stream always ends with [`Tok::Eof`].
pub fn tokenize(text: &str) -> Result<Vec<Token>, PrismError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;
    while i < chars.len() {
        let c = chars[i];
        let span = Span {
            line,
            col: i - line_start + 1,
        };
        let peek = chars.get(i + 1).copied();
        if c == '\n' {
            line += 1;
            line_start = i + 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && peek == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tok, len) = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            let mut end = i;
            while end < chars.len() && (chars[end].is_ascii_alphanumeric() || chars[end] == '_') {
                end += 1;
            }
            let word: String = chars[start..end].iter().collect();
            (keyword(&word).unwrap_or(Tok::Ident(word)), end - start)
        } else if c.is_ascii_digit() || (c == '.' && peek.is_some_and(|d| d.is_ascii_digit())) {
            lex_number(&chars, i, span)?
        } else if c == '"' {
            let mut end = i + 1;
            while end < chars.len() && chars[end] != '"' && chars[end] != '\n' {
                end += 1;
            }
            if end >= chars.len() || chars[end] != '"' {
                return Err(PrismError::Syntax {
                    span,
                    expected: "closing `\"`".into(),
                    found: "end of line".into(),
                });
            }
            (Tok::Str(chars[i + 1..end].iter().collect()), end + 1 - i)
        } else {
            match (c, peek) {
                ('-', Some('>')) => (Tok::Arrow, 2),
                ('.', Some('.')) => (Tok::DotDot, 2),
                ('!', Some('=')) => (Tok::Neq, 2),
                ('<', Some('=')) => (Tok::Le, 2),
                ('>', Some('=')) => (Tok::Ge, 2),
                ('|', Some('|')) => (Tok::DoublePipe, 2),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                (';', _) => (Tok::Semi, 1),
                (':', _) => (Tok::Colon, 1),
                (',', _) => (Tok::Comma, 1),
                ('\'', _) => (Tok::Prime, 1),
                ('=', _) => (Tok::Eq, 1),
                ('<', _) => (Tok::Lt, 1),
                ('>', _) => (Tok::Gt, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('/', _) => (Tok::Slash, 1),
                ('&', _) => (Tok::And, 1),
                ('|', _) => (Tok::Or, 1),
                ('!', _) => (Tok::Not, 1),
                ('?', _) => (Tok::Question, 1),
                _ => return Err(PrismError::UnknownCharacter { span, ch: c }),
            }
        };
        tokens.push(Token { tok, span });
        i += len;
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: Span {
            line,
            col: chars.len() - line_start + 1,
        },
    });
    Ok(tokens)
}

/// Integer or real literal starting at `start`. A `.` directly followed by
/// another `.` ends the literal, so `[0..5]` lexes as a range.
fn lex_number(chars: &[char], start: usize, span: Span) -> Result<(Tok, usize), PrismError> {
    let digits = |mut i: usize| {
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        i
    };
    let mut end = digits(start);
    let mut real = false;
    if end < chars.len() && chars[end] == '.' && chars.get(end + 1) != Some(&'.') {
        real = true;
        end = digits(end + 1);
    }
    if end < chars.len() && (chars[end] == 'e' || chars[end] == 'E') {
        let mut j = end + 1;
        if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
            j += 1;
        }
        if j < chars.len() && chars[j].is_ascii_digit() {
            real = true;
            end = digits(j);
        }
    }
    let text: String = chars[start..end].iter().collect();
    if real {
        return Ok((Tok::Num(text), end - start));
    }
    let value = text.parse::<i64>().map_err(|_| PrismError::Syntax {
        span,
        expected: "an integer that fits in 64 bits".into(),
        found: text.clone(),
    })?;
    Ok((Tok::Int(value), end - start))
}
