use super::StepError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Keyword(String),
    Ref(u64),
    Integer(i64),
    Real(f64),
    Str(String),
    Enum(String),
    Binary(String),
    LParen,
    RParen,
    Comma,
    Semicolon,
    Equals,
    Dollar,
    Star,
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub token: Token,
    pub line: usize,
    pub column: usize,
}

pub(crate) struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a [u8]) -> Self {
        Lexer { src, pos: 0, line: 1, column: 1 }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> StepError {
        StepError::Syntax { line, column, message: message.into() }
    }

    fn skip_trivia(&mut self) -> Result<(), StepError> {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek_at(1) == Some(b'*') => {
                    let (line, column) = (self.line, self.column);
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            Some(b'*') if self.peek() == Some(b'/') => {
                                self.bump();
                                break;
                            }
                            Some(_) => {}
                            None => return Err(self.error(line, column, "unterminated comment")),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    pub fn tokenize(mut self) -> Result<Vec<Spanned>, StepError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let (line, column) = (self.line, self.column);
            let Some(c) = self.peek() else { break };
            let token = match c {
                b'(' => {
                    self.bump();
                    Token::LParen
                }
                b')' => {
                    self.bump();
                    Token::RParen
                }
                b',' => {
                    self.bump();
                    Token::Comma
                }
                b';' => {
                    self.bump();
                    Token::Semicolon
                }
                b'=' => {
                    self.bump();
                    Token::Equals
                }
                b'$' => {
                    self.bump();
                    Token::Dollar
                }
                b'*' => {
                    self.bump();
                    Token::Star
                }
                b'#' => {
                    self.bump();
                    let digits = self.take_while(|c| c.is_ascii_digit());
                    if digits.is_empty() {
                        return Err(self.error(line, column, "expected digits after '#'"));
                    }
                    let id = digits
                        .parse::<u64>()
                        .map_err(|_| self.error(line, column, "instance id out of range"))?;
                    Token::Ref(id)
                }
                b'\'' => Token::Str(self.string(line, column)?),
                b'"' => {
                    self.bump();
                    let hex = self.take_while(|c| c.is_ascii_hexdigit());
                    if self.bump() != Some(b'"') {
                        return Err(self.error(line, column, "unterminated binary literal"));
                    }
                    Token::Binary(hex)
                }
                b'.' if self.peek_at(1).is_some_and(|c| c.is_ascii_alphabetic() || c == b'_') => {
                    self.bump();
                    let name = self.take_while(|c| c.is_ascii_alphanumeric() || c == b'_');
                    if self.bump() != Some(b'.') {
                        return Err(self.error(line, column, "unterminated enumeration"));
                    }
                    Token::Enum(name.to_ascii_uppercase())
                }
                b'+' | b'-' | b'.' | b'0'..=b'9' => self.number(line, column)?,
                b'!' | b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                    let mut name = String::new();
                    if c == b'!' {
                        self.bump();
                        name.push('!');
                    }
                    name.push_str(&self.take_while(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'-'));
                    Token::Keyword(name.to_ascii_uppercase())
                }
                other => {
                    return Err(self.error(line, column, format!("unexpected character {:?}", other as char)))
                }
            };
            out.push(Spanned { token, line, column });
        }
        Ok(out)
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> String {
        let start = self.pos;
        while self.peek().is_some_and(&pred) {
            self.bump();
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self, line: usize, column: usize) -> Result<Token, StepError> {
        let start = self.pos;
        if matches!(self.peek(), Some(b'+') | Some(b'-')) {
            self.bump();
        }
        let mut is_real = false;
        while let Some(c) = self.peek() {
            match c {
                b'0'..=b'9' => {
                    self.bump();
                }
                b'.' => {
                    is_real = true;
                    self.bump();
                }
                b'E' | b'e' => {
                    is_real = true;
                    self.bump();
                    if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                        self.bump();
                    }
                }
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if is_real {
            // Part 21 allows "1." and "1.E-5"; Rust's parser accepts both.
            text.parse::<f64>()
                .map(Token::Real)
                .map_err(|_| self.error(line, column, format!("malformed real {text:?}")))
        } else {
            text.parse::<i64>()
                .map(Token::Integer)
                .map_err(|_| self.error(line, column, format!("malformed integer {text:?}")))
        }
    }

    fn string(&mut self, line: usize, column: usize) -> Result<String, StepError> {
        self.bump();
        let mut raw: Vec<u8> = Vec::new();
        loop {
            match self.bump() {
                None => return Err(self.error(line, column, "unterminated string")),
                Some(b'\'') => {
                    if self.peek() == Some(b'\'') {
                        self.bump();
                        raw.push(b'\'');
                    } else {
                        break;
                    }
                }
                Some(b'\r') | Some(b'\n') => {}
                Some(c) => raw.push(c),
            }
        }
        decode_string(&raw).map_err(|m| self.error(line, column, m))
    }
}

fn hex_val(bytes: &[u8]) -> Option<u32> {
    std::str::from_utf8(bytes).ok().and_then(|s| u32::from_str_radix(s, 16).ok())
}

/// Decodes the Part 21 control directives (`\\`, `\S\`, `\X\`, `\X2\`, `\X4\`, `\P?\`).
fn decode_string(raw: &[u8]) -> Result<String, String> {
    let mut out = String::new();
    let mut i = 0;
    while i < raw.len() {
        let c = raw[i];
        if c != b'\\' {
            // ISO 8859-1 maps byte-for-byte onto the first 256 code points.
            out.push(c as char);
            i += 1;
            continue;
        }
        let rest = &raw[i..];
        if rest.starts_with(b"\\\\") {
            out.push('\\');
            i += 2;
        } else if rest.starts_with(b"\\S\\") && rest.len() >= 4 {
            out.push(char::from_u32(rest[3] as u32 + 128).unwrap_or('\u{fffd}'));
            i += 4;
        } else if rest.starts_with(b"\\X\\") && rest.len() >= 5 {
            let v = hex_val(&rest[3..5]).ok_or("bad \\X\\ escape")?;
            out.push(char::from_u32(v).unwrap_or('\u{fffd}'));
            i += 5;
        } else if rest.starts_with(b"\\X2\\") || rest.starts_with(b"\\X4\\") {
            let width = if rest[2] == b'2' { 4 } else { 8 };
            let end = find(rest, b"\\X0\\").ok_or("unterminated \\X2\\ or \\X4\\ escape")?;
            let body = &rest[4..end];
            if body.len() % width != 0 {
                return Err("truncated \\X2\\ or \\X4\\ escape".into());
            }
            let units: Vec<u32> = body
                .chunks(width)
                .map(|ch| hex_val(ch).ok_or_else(|| "bad hex in escape".to_string()))
                .collect::<Result<_, _>>()?;
            if width == 4 {
                let u16s: Vec<u16> = units.iter().map(|&u| u as u16).collect();
                out.push_str(&String::from_utf16_lossy(&u16s));
            } else {
                out.extend(units.iter().map(|&u| char::from_u32(u).unwrap_or('\u{fffd}')));
            }
            i += end + 4;
        } else if rest.starts_with(b"\\P") && rest.len() >= 4 && rest[3] == b'\\' {
            i += 4;
        } else {
            out.push('\\');
            i += 1;
        }
    }
    Ok(out)
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Token> {
        Lexer::new(s.as_bytes()).tokenize().unwrap().into_iter().map(|t| t.token).collect()
    }

    #[test]
    fn numbers_and_refs() {
        assert_eq!(
            toks("#12 = 1. -2.5E-3 42 .T."),
            vec![
                Token::Ref(12),
                Token::Equals,
                Token::Real(1.0),
                Token::Real(-2.5e-3),
                Token::Integer(42),
                Token::Enum("T".into())
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(toks("/* a ; b */ $ /**/ *"), vec![Token::Dollar, Token::Star]);
    }

    #[test]
    fn string_escapes() {
        assert_eq!(toks("'it''s'"), vec![Token::Str("it's".into())]);
        assert_eq!(toks(r"'\X\E9t\X\E9'"), vec![Token::Str("été".into())]);
        assert_eq!(toks(r"'\X2\03B103B2\X0\'"), vec![Token::Str("αβ".into())]);
        assert_eq!(toks(r"'a\\b'"), vec![Token::Str("a\\b".into())]);
        assert_eq!(toks(r"'\S\i'"), vec![Token::Str("é".into())]);
    }

    #[test]
    fn error_reports_position() {
        let err = Lexer::new(b"#1=FOO(\n  @);").tokenize().unwrap_err();
        assert_eq!(err, StepError::Syntax { line: 2, column: 3, message: "unexpected character '@'".into() });
    }
}
