//! Recursive-descent parser for task text.
//!
//! Accepted grammar (whitespace-insensitive between tokens):
//!
//! ```text
//! task   := '[' state (',' state)* ']'
//! state  := '[' object (',' object)* ']'
//! object := 'obj_attributes' '(' string ',' attrs ')'
//! attrs  := '{' pair (',' pair)* '}' | pair (',' pair)*   // braces optional
//! pair   := string ':' value
//! value  := 'True' | 'False' | string | '[' string (',' string)* ']'
//! ```
//!
//! Temperature values may be quoted (`"Hot"`) or bare (`Hot`). A
//! `receptacleObjects` value may be a single string (one contained object) or
//! a list of strings. Errors carry the 1-based line and column where parsing
//! stopped.

use crate::error::{Error, Result};

use super::{
    AttributeRequirement, AttributeValue, Attribute, EnvStateSpec, ObjectRequirement, TaskSpec,
    Temperature,
};

struct Cursor<'a> {
    rest: std::str::Chars<'a>,
    peeked: Option<char>,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor { rest: text.chars(), peeked: None, line: 1, col: 1 }
    }

    fn peek(&mut self) -> Option<char> {
        if self.peeked.is_none() {
            self.peeked = self.rest.next();
        }
        self.peeked
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.peeked = None;
        match c {
            Some('\n') => {
                self.line += 1;
                self.col = 1;
            }
            Some(_) => self.col += 1,
            None => {}
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, col: self.col, msg: msg.into() }
    }

    /// Consume one expected punctuation character.
    fn expect(&mut self, want: char) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(self.error(format!("expected '{want}', found '{c}'"))),
            None => Err(self.error(format!("expected '{want}', found end of input"))),
        }
    }

    fn eat(&mut self, want: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(want) {
            self.bump();
            true
        } else {
            false
        }
    }

    /// Parse a double-quoted string. No escape sequences: object and
    /// attribute names never contain quotes.
    fn string(&mut self) -> Result<String> {
        self.skip_ws();
        if self.peek() != Some('"') {
            return match self.peek() {
                Some(c) => Err(self.error(format!("expected string, found '{c}'"))),
                None => Err(self.error("expected string, found end of input")),
            };
        }
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(out),
                Some('\n') | None => return Err(self.error("unterminated string")),
                Some(c) => out.push(c),
            }
        }
    }

    /// Parse a bare identifier (letters only), e.g. `True` or `Hot`.
    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let mut out = String::new();
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            out.push(self.bump().expect("peeked"));
        }
        if out.is_empty() {
            return match self.peek() {
                Some(c) => Err(self.error(format!("expected identifier, found '{c}'"))),
                None => Err(self.error("expected identifier, found end of input")),
            };
        }
        Ok(out)
    }
}

/// Raw attribute value before kind checking.
enum RawValue {
    Bool(bool),
    Str(String),
    List(Vec<String>),
}

fn parse_value(cur: &mut Cursor) -> Result<RawValue> {
    cur.skip_ws();
    match cur.peek() {
        Some('"') => Ok(RawValue::Str(cur.string()?)),
        Some('[') => {
            cur.bump();
            let mut items = Vec::new();
            if !cur.eat(']') {
                loop {
                    items.push(cur.string()?);
                    if cur.eat(']') {
                        break;
                    }
                    cur.expect(',')?;
                }
            }
            Ok(RawValue::List(items))
        }
        _ => {
            let word = cur.ident()?;
            match word.as_str() {
                "True" => Ok(RawValue::Bool(true)),
                "False" => Ok(RawValue::Bool(false)),
                // Bare temperature names are tolerated alongside quoted ones.
                other => match Temperature::from_name(other) {
                    Some(_) => Ok(RawValue::Str(word)),
                    None => Err(cur.error(format!("unexpected value '{other}'"))),
                },
            }
        }
    }
}

fn typed_requirement(cur: &Cursor, name: &str, raw: RawValue) -> Result<AttributeRequirement> {
    let attribute = Attribute::from_name(name)
        .ok_or_else(|| cur.error(format!("unknown attribute '{name}'")))?;
    let value = match (attribute.kind(), raw) {
        (super::AttributeKind::Bool, RawValue::Bool(b)) => AttributeValue::Bool(b),
        (super::AttributeKind::Bool, _) => {
            return Err(cur.error(format!("attribute '{name}' takes True or False")))
        }
        (super::AttributeKind::Temperature, RawValue::Str(s)) => match Temperature::from_name(&s) {
            Some(t) => AttributeValue::Temperature(t),
            None => {
                return Err(cur.error(format!(
                    "attribute '{name}' takes \"Hot\", \"Cold\" or \"RoomTemp\", got \"{s}\""
                )))
            }
        },
        (super::AttributeKind::Temperature, _) => {
            return Err(cur.error(format!("attribute '{name}' takes a temperature string")))
        }
        (super::AttributeKind::Objects, RawValue::Str(s)) => {
            AttributeValue::Objects([s].into_iter().collect())
        }
        (super::AttributeKind::Objects, RawValue::List(items)) => {
            let set: std::collections::BTreeSet<String> = items.iter().cloned().collect();
            if set.len() != items.len() {
                return Err(cur.error(format!("attribute '{name}' lists an object twice")));
            }
            AttributeValue::Objects(set)
        }
        (super::AttributeKind::Objects, RawValue::Bool(_)) => {
            return Err(cur.error(format!("attribute '{name}' takes object names")))
        }
    };
    AttributeRequirement::new(attribute, value).map_err(|e| cur.error(e.to_string()))
}

fn parse_pair(cur: &mut Cursor) -> Result<AttributeRequirement> {
    let name = cur.string()?;
    cur.expect(':')?;
    let raw = parse_value(cur)?;
    typed_requirement(cur, &name, raw)
}

fn parse_object(cur: &mut Cursor) -> Result<ObjectRequirement> {
    cur.skip_ws();
    let head = cur.ident()?;
    if head != "obj_attributes" {
        return Err(cur.error(format!("expected 'obj_attributes', found '{head}'")));
    }
    cur.expect('(')?;
    let object = cur.string()?;
    cur.expect(',')?;
    cur.skip_ws();

    let mut requirements = Vec::new();
    if cur.eat('{') {
        loop {
            requirements.push(parse_pair(cur)?);
            if cur.eat('}') {
                break;
            }
            cur.expect(',')?;
        }
    } else {
        // Braceless dict: pairs run until the closing parenthesis.
        loop {
            requirements.push(parse_pair(cur)?);
            cur.skip_ws();
            if cur.peek() == Some(')') {
                break;
            }
            cur.expect(',')?;
        }
    }
    cur.expect(')')?;
    ObjectRequirement::new(object, requirements).map_err(|e| cur.error(e.to_string()))
}

fn parse_state(cur: &mut Cursor) -> Result<EnvStateSpec> {
    cur.expect('[')?;
    let mut objects = vec![parse_object(cur)?];
    while !cur.eat(']') {
        cur.expect(',')?;
        objects.push(parse_object(cur)?);
    }
    EnvStateSpec::new(objects).map_err(|e| cur.error(e.to_string()))
}

/// Parse task text into a [`TaskSpec`].
pub fn parse_task(text: &str) -> Result<TaskSpec> {
    let mut cur = Cursor::new(text);
    cur.expect('[')?;
    let mut states = vec![parse_state(&mut cur)?];
    while !cur.eat(']') {
        cur.expect(',')?;
        states.push(parse_state(&mut cur)?);
    }
    cur.skip_ws();
    if let Some(c) = cur.peek() {
        return Err(cur.error(format!("trailing input starting at '{c}'")));
    }
    TaskSpec::new(states).map_err(|e| cur.error(e.to_string()))
}
