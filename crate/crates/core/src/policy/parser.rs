use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::lexer::{tokenize, Tok, Token};
use super::{AlarpOverrides, Commitment, Harm, PolicyDocument, RuleKind, RuleSpec, Value};

/// A diagnostic with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub(super) fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Parses policy text. Either a document or at least one error comes back,
/// never both. After an error the parser skips to the next top-level block,
/// so one run reports problems from every block.
pub fn parse_policy(text: &str) -> Result<PolicyDocument, Vec<ParseError>> {
    let (tokens, lex_errors) = tokenize(text);
    let (end_line, end_col) = end_position(text);
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        errors: lex_errors,
        end: (end_line, end_col),
        doc: PolicyDocument {
            name: String::new(),
            version: String::new(),
            organisation: String::new(),
            alarp: AlarpOverrides::default(),
            commitments: Vec::new(),
            severity_map: BTreeMap::new(),
            rules: Vec::new(),
        },
        commitment_pos: Vec::new(),
        rule_ids: BTreeSet::new(),
    };
    p.parse_file();
    p.check_commitments();

    let mut errors = p.errors;
    if errors.is_empty() {
        Ok(p.doc)
    } else {
        errors.sort_by_key(|e| (e.line, e.col));
        Err(errors)
    }
}

fn end_position(text: &str) -> (usize, usize) {
    let line = text.matches('\n').count() + 1;
    let col = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

const TOP_LEVEL: [&str; 4] = ["policy", "commitment", "severity_map", "rule"];

type Fallible<T> = Result<T, ParseError>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    errors: Vec<ParseError>,
    end: (usize, usize),
    doc: PolicyDocument,
    commitment_pos: Vec<(usize, usize)>,
    rule_ids: BTreeSet<String>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::new(t.line, t.col, message),
            None => ParseError::new(self.end.0, self.end.1, message),
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        match self.peek() {
            Some(t) => self.err_here(format!("expected {wanted}, found {}", t.tok.describe())),
            None => self.err_here(format!("expected {wanted}, found end of input")),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Fallible<Token> {
        match self.peek() {
            Some(t) if t.tok == tok => Ok(self.next().unwrap()),
            _ => Err(self.unexpected(wanted)),
        }
    }

    /// A plain (undotted) identifier, used for ids and keys.
    fn expect_name(&mut self, wanted: &str) -> Fallible<(String, Token)> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s), ..
            }) => {
                if s.contains('.') {
                    return Err(self.err_here(format!("{wanted} `{s}` may not contain '.'")));
                }
                let s = s.clone();
                Ok((s, self.next().unwrap()))
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn expect_string(&mut self, wanted: &str) -> Fallible<String> {
        match self.peek() {
            Some(Token { tok: Tok::Str(s), .. }) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn at_rbrace(&self) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::RBrace, .. }))
    }

    fn close_block(&mut self, open: &Token) -> Fallible<()> {
        if self.peek().is_none() {
            return Err(ParseError::new(
                open.line,
                open.col,
                format!(
                    "unbalanced braces: `{{` at {}:{} is never closed",
                    open.line, open.col
                ),
            ));
        }
        self.expect(Tok::RBrace, "`}`").map(|_| ())
    }

    fn parse_file(&mut self) {
        let mut header_seen = false;
        while let Some(tok) = self.peek().cloned() {
            let start = self.pos;
            let result = match &tok.tok {
                Tok::Ident(kw) if kw == "policy" => {
                    if header_seen {
                        Err(self.err_here("duplicate `policy` header"))
                    } else {
                        header_seen = true;
                        self.parse_header()
                    }
                }
                Tok::Ident(kw) if TOP_LEVEL.contains(&kw.as_str()) && !header_seen => {
                    header_seen = true;
                    self.errors
                        .push(self.err_here("expected `policy` header before other blocks"));
                    self.parse_item(kw.clone())
                }
                Tok::Ident(kw) if TOP_LEVEL.contains(&kw.as_str()) => self.parse_item(kw.clone()),
                Tok::RBrace => {
                    self.next();
                    Err(ParseError::new(
                        tok.line,
                        tok.col,
                        "unbalanced braces: unexpected `}`",
                    ))
                }
                _ => Err(self.unexpected("`rule`, `commitment` or `severity_map`")),
            };
            if let Err(e) = result {
                self.errors.push(e);
                self.recover(start);
            }
        }
        if !header_seen {
            self.errors.push(ParseError::new(1, 1, "expected `policy` header"));
        }
    }

    /// Skips from the start of a failed item to the next top-level keyword
    /// that sits outside any braces.
    fn recover(&mut self, start: usize) {
        let mut pos = start + 1;
        let mut depth: i64 = 0;
        let mut closed_any = false;
        while let Some(t) = self.toks.get(pos) {
            match &t.tok {
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    depth -= 1;
                    closed_any = true;
                }
                Tok::Ident(kw) if depth <= 0 && TOP_LEVEL.contains(&kw.as_str()) => break,
                _ => {}
            }
            pos += 1;
        }
        self.pos = pos.max(self.pos);
        if self.pos >= self.toks.len() && depth > 0 && !closed_any {
            // the failed block ran off the end; report it once
            if let Some(open) = self.toks[start..].iter().find(|t| t.tok == Tok::LBrace) {
                let msg = format!(
                    "unbalanced braces: `{{` at {}:{} is never closed",
                    open.line, open.col
                );
                if !self.errors.iter().any(|e| e.message == msg) {
                    self.errors.push(ParseError::new(open.line, open.col, msg));
                }
            }
        }
    }

    fn parse_header(&mut self) -> Fallible<()> {
        self.next();
        self.doc.name = self.expect_string("policy name string")?;
        let open = self.expect(Tok::LBrace, "`{`")?;
        let mut seen = BTreeSet::new();
        while !self.at_rbrace() && self.peek().is_some() {
            let (key, key_tok) = self.expect_name("header field")?;
            self.expect(Tok::Eq, "`=`")?;
            if !seen.insert(key.clone()) {
                self.errors.push(ParseError::new(
                    key_tok.line,
                    key_tok.col,
                    format!("duplicate key `{key}` in policy header"),
                ));
            }
            match key.as_str() {
                "version" => self.doc.version = self.expect_string("string")?,
                "organisation" => self.doc.organisation = self.expect_string("string")?,
                "alarp_intolerable_min" => {
                    self.doc.alarp.intolerable_min = Some(self.expect_int()?);
                }
                "alarp_acceptable_max" => {
                    self.doc.alarp.acceptable_max = Some(self.expect_int()?);
                }
                "alarp_disproportion_factor" => {
                    let v = self.parse_value()?;
                    match v.as_number() {
                        Some(f) => self.doc.alarp.disproportion_factor = Some(f),
                        None => {
                            return Err(ParseError::new(
                                key_tok.line,
                                key_tok.col,
                                "alarp_disproportion_factor must be a number",
                            ))
                        }
                    }
                }
                other => {
                    return Err(ParseError::new(
                        key_tok.line,
                        key_tok.col,
                        format!("unknown policy header field `{other}`"),
                    ))
                }
            }
        }
        self.close_block(&open)
    }

    fn expect_int(&mut self) -> Fallible<i64> {
        match self.peek() {
            Some(Token { tok: Tok::Int(i), .. }) => {
                let i = *i;
                self.next();
                Ok(i)
            }
            _ => Err(self.unexpected("integer")),
        }
    }

    fn parse_item(&mut self, kw: String) -> Fallible<()> {
        match kw.as_str() {
            "commitment" => self.parse_commitment(),
            "severity_map" => self.parse_severity_map(),
            "rule" => self.parse_rule(),
            _ => unreachable!("policy header handled by caller"),
        }
    }

    fn parse_commitment(&mut self) -> Fallible<()> {
        let kw = self.next().unwrap();
        let (id, id_tok) = self.expect_name("commitment id")?;
        let open = self.expect(Tok::LBrace, "`{`")?;
        let mut statement = None;
        let mut rule_ids = Vec::new();
        let mut seen = BTreeSet::new();
        while !self.at_rbrace() && self.peek().is_some() {
            let (key, key_tok) = self.expect_name("field name")?;
            self.expect(Tok::Eq, "`=`")?;
            if !seen.insert(key.clone()) {
                self.errors.push(ParseError::new(
                    key_tok.line,
                    key_tok.col,
                    format!("duplicate key `{key}` in commitment {id}"),
                ));
            }
            match key.as_str() {
                "statement" => statement = Some(self.expect_string("string")?),
                "rules" => match self.parse_value()? {
                    Value::List(items) => rule_ids = items,
                    other => {
                        return Err(ParseError::new(
                            key_tok.line,
                            key_tok.col,
                            format!("`rules` must be a list, found {}", other.type_name()),
                        ))
                    }
                },
                other => {
                    return Err(ParseError::new(
                        key_tok.line,
                        key_tok.col,
                        format!("unknown commitment field `{other}`"),
                    ))
                }
            }
        }
        self.close_block(&open)?;
        let Some(statement) = statement else {
            return Err(ParseError::new(
                kw.line,
                kw.col,
                format!("commitment {id} has no statement"),
            ));
        };
        if self.doc.commitments.iter().any(|c| c.id == id) {
            self.errors.push(ParseError::new(
                id_tok.line,
                id_tok.col,
                format!("duplicate commitment id {id}"),
            ));
        }
        self.doc.commitments.push(Commitment {
            id,
            statement,
            rule_ids,
        });
        self.commitment_pos.push((kw.line, kw.col));
        Ok(())
    }

    fn parse_severity_map(&mut self) -> Fallible<()> {
        self.next();
        let open = self.expect(Tok::LBrace, "`{`")?;
        while !self.at_rbrace() && self.peek().is_some() {
            let (label, label_tok) = self.expect_name("severity label")?;
            self.expect(Tok::Eq, "`=`")?;
            let level_tok = self.peek().cloned();
            let level = self.expect_int()?;
            if level < 0 || level > u32::MAX as i64 {
                let t = level_tok.unwrap();
                self.errors.push(ParseError::new(
                    t.line,
                    t.col,
                    format!("independence level for `{label}` must be a non-negative integer"),
                ));
                continue;
            }
            if self.doc.severity_map.insert(label.clone(), level as u32).is_some() {
                self.errors.push(ParseError::new(
                    label_tok.line,
                    label_tok.col,
                    format!("duplicate key `{label}` in severity_map"),
                ));
            }
        }
        self.close_block(&open)
    }

    fn parse_rule(&mut self) -> Fallible<()> {
        let kw = self.next().unwrap();
        let (id, id_tok) = self.expect_name("rule id")?;
        if !self.rule_ids.insert(id.clone()) {
            self.errors.push(ParseError::new(
                id_tok.line,
                id_tok.col,
                format!("duplicate rule id {id}"),
            ));
        }
        let open = self.expect(Tok::LBrace, "`{`")?;

        let mut kind = None;
        let mut harm = None;
        let mut scope = None;
        let mut description = None;
        let mut responsible_role = None;
        let mut params = BTreeMap::new();
        let mut seen = BTreeSet::new();
        let mut block_ok = true;

        while !self.at_rbrace() && self.peek().is_some() {
            let (key, key_tok) = self.expect_name("field name")?;
            self.expect(Tok::Eq, "`=`")?;
            let value_tok = self.peek().cloned();
            let value = self.parse_value()?;
            let at = |msg: String| {
                let t = value_tok.as_ref().unwrap_or(&key_tok);
                ParseError::new(t.line, t.col, msg)
            };
            if !seen.insert(key.clone()) {
                self.errors.push(ParseError::new(
                    key_tok.line,
                    key_tok.col,
                    format!("duplicate key `{key}` in rule {id}"),
                ));
                block_ok = false;
                continue;
            }
            match key.as_str() {
                "kind" => match value.as_name().and_then(RuleKind::from_name) {
                    Some(k) => kind = Some(k),
                    None => {
                        self.errors.push(at(format!(
                            "unknown rule kind `{}` in rule {id}",
                            value.as_name().unwrap_or(value.type_name())
                        )));
                        block_ok = false;
                    }
                },
                "harm" => match value {
                    Value::Int(h) => match Harm::new(h) {
                        Some(h) => harm = Some(h),
                        None => {
                            self.errors
                                .push(at(format!("harm out of range 1..5 in rule {id}: {h}")));
                            block_ok = false;
                        }
                    },
                    other => {
                        self.errors.push(at(format!(
                            "harm must be an integer in rule {id}, found {}",
                            other.type_name()
                        )));
                        block_ok = false;
                    }
                },
                "scope" | "description" => match value {
                    Value::Str(s) => {
                        if key == "scope" {
                            scope = Some(s);
                        } else {
                            description = Some(s);
                        }
                    }
                    other => {
                        self.errors.push(at(format!(
                            "`{key}` must be a string in rule {id}, found {}",
                            other.type_name()
                        )));
                        block_ok = false;
                    }
                },
                "responsible_role" => match value.as_name() {
                    Some(r) => responsible_role = Some(r.to_string()),
                    None => {
                        self.errors
                            .push(at(format!("`responsible_role` must be a name in rule {id}")));
                        block_ok = false;
                    }
                },
                _ => {
                    params.insert(key, value);
                }
            }
        }
        self.close_block(&open)?;

        if block_ok && kind.is_none() {
            self.errors
                .push(ParseError::new(kw.line, kw.col, format!("rule {id} has no kind")));
            block_ok = false;
        }
        if block_ok && harm.is_none() {
            self.errors
                .push(ParseError::new(kw.line, kw.col, format!("rule {id} has no harm")));
            block_ok = false;
        }
        if block_ok {
            self.doc.rules.push(RuleSpec {
                id,
                kind: kind.unwrap(),
                harm: harm.unwrap(),
                scope,
                description,
                responsible_role,
                params,
            });
        }
        Ok(())
    }

    fn parse_value(&mut self) -> Fallible<Value> {
        let Some(t) = self.peek().cloned() else {
            return Err(self.unexpected("value"));
        };
        let v = match t.tok {
            Tok::Str(s) => Value::Str(s),
            Tok::Int(i) => Value::Int(i),
            Tok::Real(r) => Value::Real(r),
            Tok::Ident(s) => Value::Ident(s),
            Tok::LBracket => {
                self.next();
                let mut items = Vec::new();
                if matches!(self.peek(), Some(Token { tok: Tok::RBracket, .. })) {
                    self.next();
                    return Ok(Value::List(items));
                }
                loop {
                    match self.next() {
                        Some(Token {
                            tok: Tok::Ident(s), ..
                        }) => items.push(s),
                        _ => {
                            self.pos -= 1;
                            return Err(self.unexpected("identifier in list"));
                        }
                    }
                    match self.next().map(|t| t.tok) {
                        Some(Tok::Comma) => continue,
                        Some(Tok::RBracket) => return Ok(Value::List(items)),
                        Some(_) => {
                            self.pos -= 1;
                            return Err(self.unexpected("`,` or `]`"));
                        }
                        None => return Err(self.unexpected("`]`")),
                    }
                }
            }
            _ => return Err(self.unexpected("value")),
        };
        self.next();
        Ok(v)
    }

    fn check_commitments(&mut self) {
        for (c, &(line, col)) in self.doc.commitments.iter().zip(&self.commitment_pos) {
            for r in &c.rule_ids {
                if !self.rule_ids.contains(r) {
                    self.errors.push(ParseError::new(
                        line,
                        col,
                        format!("commitment {} references unknown rule {r}", c.id),
                    ));
                }
            }
        }
    }
}
