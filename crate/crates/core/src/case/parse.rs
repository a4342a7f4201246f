use std::sync::LazyLock;

use regex::Regex;

use super::{Entry, FoamNode, ParseError, Scalar};

static INT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?[0-9]+$").unwrap());
static FLOAT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][+-]?[0-9]+)?$").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok<'a> {
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Word(&'a str),
    Str(&'a str),
    /// `#word`, `#{ … #}` or `$word`.
    Directive(&'a str),
    Eof,
}

impl Tok<'_> {
    fn describe(&self) -> String {
        match self {
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Semi => "';'".into(),
            Tok::Word(w) => format!("word {w:?}"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Directive(d) => format!("directive {d:?}"),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '{' | '}' | '(' | ')' | '[' | ']' | ';' | '"')
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error_at(&self, offset: usize, expected: impl Into<String>) -> ParseError {
        let before = &self.src[..offset.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        ParseError {
            line,
            column,
            expected: expected.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            let rest = self.rest();
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if trimmed.starts_with("//") {
                self.pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else if let Some(body) = trimmed.strip_prefix("/*") {
                match body.find("*/") {
                    Some(end) => self.pos += end + 4,
                    None => return Err(self.error_at(self.pos, "'*/' closing comment")),
                }
            } else {
                return Ok(());
            }
        }
    }

    /// Byte length of a bare word starting at the current position.
    fn word_len(&self, allow_call: bool) -> Result<usize, ParseError> {
        let rest = self.rest();
        let mut iter = rest.char_indices().peekable();
        let mut end = 0;
        while let Some(&(i, c)) = iter.peek() {
            if c == '(' && allow_call && i > 0 && rest[..i].starts_with(|c: char| c.is_alphabetic() || c == '_') {
                let mut depth = 0usize;
                let mut closed = false;
                for (j, c) in rest[i..].char_indices() {
                    match c {
                        '(' => depth += 1,
                        ')' => {
                            depth -= 1;
                            if depth == 0 {
                                end = i + j + 1;
                                closed = true;
                                break;
                            }
                        }
                        '\n' | ';' | '{' | '}' => break,
                        _ => {}
                    }
                }
                if !closed {
                    return Ok(i);
                }
                while iter.peek().is_some_and(|&(k, _)| k < end) {
                    iter.next();
                }
                continue;
            }
            if is_delimiter(c) || rest[i..].starts_with("//") || rest[i..].starts_with("/*") {
                break;
            }
            iter.next();
            end = i + c.len_utf8();
        }
        Ok(end)
    }

    /// Returns the next token and its starting offset without consuming it.
    fn peek(&mut self) -> Result<(Tok<'a>, usize), ParseError> {
        self.skip_trivia()?;
        let start = self.pos;
        let rest = self.rest();
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::Eof, start));
        };
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ';' => Tok::Semi,
            '"' => {
                let mut escaped = false;
                let mut close = None;
                for (i, c) in rest.char_indices().skip(1) {
                    match c {
                        _ if escaped => escaped = false,
                        '\\' => escaped = true,
                        '"' => {
                            close = Some(i);
                            break;
                        }
                        _ => {}
                    }
                }
                match close {
                    Some(i) => Tok::Str(&rest[1..i]),
                    None => return Err(self.error_at(start, "closing '\"'")),
                }
            }
            '#' if rest.starts_with("#{") => match rest.find("#}") {
                Some(end) => Tok::Directive(&rest[..end + 2]),
                None => return Err(self.error_at(start, "'#}' closing code block")),
            },
            '$' if rest.starts_with("${") => match rest.find('}') {
                Some(end) => {
                    self.pos += end + 1;
                    let tail = self.word_len(false)?;
                    self.pos = start;
                    Tok::Directive(&rest[..end + 1 + tail])
                }
                None => return Err(self.error_at(start, "'}' closing macro")),
            },
            '#' | '$' => {
                self.pos += 1;
                let len = self.word_len(false)?;
                self.pos = start;
                Tok::Directive(&rest[..1 + len])
            }
            _ => {
                let len = self.word_len(true)?;
                Tok::Word(&rest[..len])
            }
        };
        Ok((tok, start))
    }

    fn bump(&mut self, tok: Tok<'a>) {
        self.pos += match tok {
            Tok::Word(w) | Tok::Directive(w) => w.len(),
            Tok::Str(s) => s.len() + 2,
            Tok::Eof => 0,
            _ => 1,
        };
    }

    fn next(&mut self) -> Result<(Tok<'a>, usize), ParseError> {
        let (tok, start) = self.peek()?;
        self.bump(tok);
        Ok((tok, start))
    }

    /// Entries up to a closing brace (`nested`) or end of input.
    fn entries(&mut self, nested: bool) -> Result<Vec<Entry>, ParseError> {
        let mut entries = Vec::new();
        loop {
            let (tok, start) = self.peek()?;
            match tok {
                Tok::Eof if !nested => return Ok(entries),
                Tok::Eof => return Err(self.error_at(start, "'}'")),
                Tok::RBrace if nested => {
                    self.bump(tok);
                    return Ok(entries);
                }
                Tok::Semi => self.bump(tok),
                Tok::Directive(text) if text.starts_with("#{") => {
                    self.bump(tok);
                    entries.push(Entry::Directive { text: text.to_string() });
                }
                Tok::Directive(_) => {
                    let rest = self.rest();
                    let line = &rest[..rest.find('\n').unwrap_or(rest.len())];
                    self.pos += line.len();
                    entries.push(Entry::Directive {
                        text: line.trim_end().to_string(),
                    });
                }
                Tok::Word(key) => {
                    self.bump(tok);
                    let value = self.entry_value()?;
                    entries.push(Entry::KeyValue {
                        key: key.to_string(),
                        value,
                    });
                }
                Tok::Str(key) => {
                    self.bump(tok);
                    let value = self.entry_value()?;
                    entries.push(Entry::KeyValue {
                        key: format!("\"{key}\""),
                        value,
                    });
                }
                other => {
                    let expected = if nested { "keyword or '}'" } else { "keyword" };
                    return Err(self.error_at(start, format!("{expected}, found {}", other.describe())));
                }
            }
        }
    }

    fn entry_value(&mut self) -> Result<FoamNode, ParseError> {
        let (tok, _) = self.peek()?;
        if tok == Tok::LBrace {
            self.bump(tok);
            let dict = FoamNode::Dict(self.entries(true)?);
            if self.peek()?.0 == Tok::Semi {
                self.next()?;
            }
            return Ok(dict);
        }
        let mut items = Vec::new();
        loop {
            let (tok, start) = self.peek()?;
            match tok {
                Tok::Semi => {
                    self.bump(tok);
                    break;
                }
                Tok::RBrace | Tok::Eof | Tok::RParen | Tok::RBracket => {
                    return Err(self.error_at(start, format!("';', found {}", tok.describe())));
                }
                _ => items.push(self.item()?),
            }
        }
        Ok(match items.len() {
            1 => items.pop().unwrap(),
            _ => FoamNode::Sequence(items),
        })
    }

    /// One value: scalar, list, dimension set, dictionary or directive.
    fn item(&mut self) -> Result<FoamNode, ParseError> {
        let (tok, start) = self.next()?;
        Ok(match tok {
            Tok::Word(w) => classify(w),
            Tok::Str(s) => FoamNode::Scalar(Scalar::Str(s.to_string())),
            Tok::Directive(d) => FoamNode::Directive(d.to_string()),
            Tok::LBrace => FoamNode::Dict(self.entries(true)?),
            Tok::LParen => {
                let mut items = Vec::new();
                loop {
                    let (tok, start) = self.peek()?;
                    match tok {
                        Tok::RParen => {
                            self.bump(tok);
                            break;
                        }
                        Tok::Eof | Tok::Semi | Tok::RBrace | Tok::RBracket => {
                            return Err(self.error_at(start, format!("')', found {}", tok.describe())));
                        }
                        _ => items.push(self.item()?),
                    }
                }
                FoamNode::List(items)
            }
            Tok::LBracket => {
                let mut dims = Vec::with_capacity(7);
                loop {
                    let (tok, at) = self.next()?;
                    match tok {
                        Tok::RBracket => break,
                        Tok::Word(w) => match w.parse::<i32>() {
                            Ok(v) => dims.push(v),
                            Err(_) => return Err(self.error_at(at, "integer dimension exponent")),
                        },
                        other => {
                            return Err(self.error_at(at, format!("']', found {}", other.describe())));
                        }
                    }
                }
                let dims: [i32; 7] = dims
                    .try_into()
                    .map_err(|_| self.error_at(start, "7 dimension exponents"))?;
                FoamNode::Dimensions(dims)
            }
            other => return Err(self.error_at(start, format!("value, found {}", other.describe()))),
        })
    }
}

fn classify(word: &str) -> FoamNode {
    if INT.is_match(word) {
        if let Ok(v) = word.parse::<i64>() {
            return FoamNode::int(v);
        }
    }
    if FLOAT.is_match(word) {
        if let Ok(v) = word.parse::<f64>() {
            return FoamNode::float(v);
        }
    }
    match word {
        "true" => FoamNode::Scalar(Scalar::Bool(true)),
        "false" => FoamNode::Scalar(Scalar::Bool(false)),
        _ => FoamNode::word(word),
    }
}

/// Parse a dictionary file. The result is always a Dict.
pub fn parse_dict(text: &str) -> Result<FoamNode, ParseError> {
    let mut parser = Parser { src: text, pos: 0 };
    Ok(FoamNode::Dict(parser.entries(false)?))
}
