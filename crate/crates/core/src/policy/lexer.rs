use super::parser::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    /// `[a-z][a-z0-9_-]*`, optionally dotted (`build.training_run`).
    Ident(String),
    Str(String),
    Int(i64),
    Real(f64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Eq,
}

impl Tok {
    pub(super) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(_) => "string".into(),
            Tok::Int(_) | Tok::Real(_) => "number".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-'
}

/// Tokenizes the whole input. Lexical errors are collected and the offending
/// character skipped so that parsing can still report later problems.
pub(super) fn tokenize(text: &str) -> (Vec<Token>, Vec<ParseError>) {
    let mut cur = Cursor {
        chars: text.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    let mut errors = Vec::new();

    while let Some(c) = cur.peek() {
        let (line, col) = (cur.line, cur.col);
        let simple = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = simple {
            cur.bump();
            tokens.push(Token { tok, line, col });
            continue;
        }
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '#' {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if c == '"' {
            cur.bump();
            match lex_string(&mut cur) {
                Ok(s) => tokens.push(Token { tok: Tok::Str(s), line, col }),
                Err(msg) => errors.push(ParseError::new(line, col, msg)),
            }
            continue;
        }
        if c.is_ascii_digit() || c == '-' {
            match lex_number(&mut cur) {
                Ok(tok) => tokens.push(Token { tok, line, col }),
                Err(msg) => errors.push(ParseError::new(line, col, msg)),
            }
            continue;
        }
        if c.is_ascii_lowercase() {
            let mut s = String::new();
            loop {
                while let Some(c) = cur.peek().filter(|&c| is_ident_continue(c)) {
                    s.push(c);
                    cur.bump();
                }
                // a dot continues the identifier only when a segment follows
                if cur.peek() != Some('.') {
                    break;
                }
                let mut ahead = cur.chars.clone();
                ahead.next();
                if !ahead.peek().is_some_and(|c| c.is_ascii_lowercase()) {
                    break;
                }
                s.push('.');
                cur.bump();
            }
            tokens.push(Token { tok: Tok::Ident(s), line, col });
            continue;
        }
        cur.bump();
        errors.push(ParseError::new(line, col, format!("unexpected character {c:?}")));
    }
    (tokens, errors)
}

fn lex_string(cur: &mut Cursor<'_>) -> Result<String, String> {
    let mut s = String::new();
    loop {
        match cur.bump() {
            None | Some('\n') => return Err("unterminated string".into()),
            Some('"') => return Ok(s),
            Some('\\') => match cur.bump() {
                Some('"') => s.push('"'),
                Some('\\') => s.push('\\'),
                Some('n') => s.push('\n'),
                Some('t') => s.push('\t'),
                Some(other) => {
                    // consume the rest so one bad escape yields one error
                    while let Some(c) = cur.bump() {
                        if c == '"' || c == '\n' {
                            break;
                        }
                    }
                    return Err(format!("invalid escape \\{other} in string"));
                }
                None => return Err("unterminated string".into()),
            },
            Some(c) => s.push(c),
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>) -> Result<Tok, String> {
    let mut s = String::new();
    if cur.peek() == Some('-') {
        s.push('-');
        cur.bump();
    }
    let mut seen_dot = false;
    while let Some(c) = cur.peek() {
        if c.is_ascii_digit() {
            s.push(c);
        } else if c == '.' && !seen_dot {
            seen_dot = true;
            s.push(c);
        } else if c.is_ascii_alphanumeric() || c == '_' {
            s.push(c);
            cur.bump();
            while let Some(c) = cur.peek().filter(|c| c.is_ascii_alphanumeric()) {
                s.push(c);
                cur.bump();
            }
            return Err(format!("malformed number `{s}`"));
        } else {
            break;
        }
        cur.bump();
    }
    if seen_dot {
        match s.parse::<f64>() {
            Ok(v) if s.ends_with(|c: char| c.is_ascii_digit()) && v.is_finite() => Ok(Tok::Real(v)),
            _ => Err(format!("malformed number `{s}`")),
        }
    } else {
        s.parse::<i64>()
            .map(Tok::Int)
            .map_err(|_| format!("malformed number `{s}`"))
    }
}
