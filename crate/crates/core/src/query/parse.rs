//! Concrete syntax for queries.
//!
//! ```text
//! Q() :- R1(X,Y), R2(Y), R3(Z)
//! Q() :- E(a,b) ; E(a,X), E(X,b)        % a union, or repeat the head
//! Q(sum(Y)) :- S(X,Y)
//! Q(count()) :- S(X,Y)
//! ```
//!
//! Identifiers starting with an uppercase letter are variables; lowercase
//! identifiers, quoted strings and numeric literals are constants. `%`, `#`
//! and `//` start comments.

use crate::error::{Error, Result};
use crate::exact::parse_rational;
use crate::pdb::{Schema, Value};

use super::ast::{AggregateOp, Atom, Cq, Query, Term};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Str(String),
    Num(String),
    LParen,
    RParen,
    Comma,
    Semicolon,
    Dot,
    Turnstile,
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (l, col) = (lineno + 1, i + 1);
            let push = |out: &mut Vec<Spanned>, token| out.push(Spanned { token, line: l, column: col });
            match c {
                _ if c.is_whitespace() => i += 1,
                '%' | '#' => break,
                '/' if chars.get(i + 1) == Some(&'/') => break,
                '(' => {
                    push(&mut out, Token::LParen);
                    i += 1;
                }
                ')' => {
                    push(&mut out, Token::RParen);
                    i += 1;
                }
                ',' => {
                    push(&mut out, Token::Comma);
                    i += 1;
                }
                ';' => {
                    push(&mut out, Token::Semicolon);
                    i += 1;
                }
                '.' if !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                    push(&mut out, Token::Dot);
                    i += 1;
                }
                ':' if chars.get(i + 1) == Some(&'-') => {
                    push(&mut out, Token::Turnstile);
                    i += 2;
                }
                '"' | '\'' => {
                    let quote = c;
                    let start = i + 1;
                    let mut j = start;
                    while j < chars.len() && chars[j] != quote {
                        j += 1;
                    }
                    if j == chars.len() {
                        return Err(syntax(l, col, "unterminated string"));
                    }
                    push(&mut out, Token::Str(chars[start..j].iter().collect()));
                    i = j + 1;
                }
                _ if c.is_ascii_digit() || c == '-' || c == '.' => {
                    let start = i;
                    i += 1;
                    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == '/') {
                        i += 1;
                    }
                    let lit: String = chars[start..i].iter().collect();
                    parse_rational(&lit).map_err(|_| syntax(l, col, format!("malformed number `{lit}`")))?;
                    push(&mut out, Token::Num(lit));
                }
                _ if c.is_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    push(&mut out, Token::Ident(chars[start..i].iter().collect()));
                }
                _ => return Err(syntax(l, col, format!("unexpected character `{c}`"))),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Head {
    Boolean,
    Aggregate(AggregateOp, Option<String>),
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|s| &s.token)
    }

    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .map(|s| (s.line, s.column))
            .unwrap_or(self.end)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let (l, c) = self.here();
        syntax(l, c, message)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|s| s.token.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Token::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn head(&mut self) -> Result<(String, Head)> {
        let name = self.ident("query head")?;
        self.expect(Token::LParen, "`(` after head name")?;
        let head = match self.peek() {
            Some(Token::RParen) => Head::Boolean,
            Some(Token::Ident(f)) if (f == "sum" || f == "count") && self.tokens.get(self.pos + 1).map(|s| &s.token) == Some(&Token::LParen) => {
                let op = if f == "sum" { AggregateOp::Sum } else { AggregateOp::Count };
                self.pos += 2;
                let target = match (op, self.peek()) {
                    (AggregateOp::Count, Some(Token::RParen)) => None,
                    (AggregateOp::Sum, Some(Token::Ident(v))) if starts_upper(v) => {
                        let v = v.clone();
                        self.pos += 1;
                        Some(v)
                    }
                    (AggregateOp::Sum, _) => return Err(self.error("sum() takes one variable")),
                    (AggregateOp::Count, _) => return Err(self.error("count() takes no arguments")),
                };
                self.expect(Token::RParen, "`)` closing the aggregate")?;
                Head::Aggregate(op, target)
            }
            _ => {
                let mut free = Vec::new();
                while let Some(Token::Ident(v)) = self.peek() {
                    if !starts_upper(v) {
                        break;
                    }
                    free.push(v.clone());
                    self.pos += 1;
                    if self.peek() == Some(&Token::Comma) {
                        self.pos += 1;
                    }
                }
                if !free.is_empty() {
                    return Err(Error::FreeVariables(free));
                }
                return Err(self.error("head must be empty, sum(Var) or count()"));
            }
        };
        self.expect(Token::RParen, "`)` closing the head")?;
        Ok((name, head))
    }

    fn term(&mut self) -> Result<Term> {
        match self.next() {
            Some(Token::Ident(s)) if starts_upper(&s) => Ok(Term::Var(s)),
            Some(Token::Ident(s)) => Ok(Term::Const(Value::Sym(s))),
            Some(Token::Str(s)) => Ok(Term::Const(Value::Sym(s))),
            Some(Token::Num(n)) => Ok(Term::Const(Value::Num(parse_rational(&n)?))),
            _ => {
                self.pos -= 1;
                Err(self.error("expected a term"))
            }
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let predicate = self.ident("an atom")?;
        self.expect(Token::LParen, "`(` after predicate")?;
        let mut terms = Vec::new();
        if self.peek() != Some(&Token::RParen) {
            loop {
                terms.push(self.term()?);
                match self.peek() {
                    Some(Token::Comma) => self.pos += 1,
                    _ => break,
                }
            }
        }
        self.expect(Token::RParen, "`)` closing the atom")?;
        Ok(Atom { predicate, terms })
    }

    fn body(&mut self) -> Result<Cq> {
        let mut atoms = vec![self.atom()?];
        while self.peek() == Some(&Token::Comma) {
            self.pos += 1;
            atoms.push(self.atom()?);
        }
        Ok(Cq::new(atoms))
    }

    fn rule(&mut self) -> Result<(String, Head, Vec<Cq>)> {
        let (name, head) = self.head()?;
        self.expect(Token::Turnstile, "`:-`")?;
        let mut bodies = vec![self.body()?];
        while self.peek() == Some(&Token::Semicolon) {
            self.pos += 1;
            bodies.push(self.body()?);
        }
        if self.peek() == Some(&Token::Dot) {
            self.pos += 1;
        }
        Ok((name, head, bodies))
    }
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_uppercase())
}

/// Parses query text without a schema check.
pub fn parse_query_text(text: &str) -> Result<Query> {
    let tokens = lex(text)?;
    let lines = text.lines().count().max(1);
    let last_col = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    let mut p = Parser {
        tokens,
        pos: 0,
        end: (lines, last_col),
    };
    if p.peek().is_none() {
        return Err(p.error("empty query"));
    }
    let mut rules: Vec<(String, Head, Vec<Cq>)> = Vec::new();
    while p.peek().is_some() {
        let start = p.here();
        let rule = p.rule()?;
        if let Some((name, head, _)) = rules.first() {
            if *name != rule.0 || *head != rule.1 {
                return Err(syntax(start.0, start.1, "all rules must share the same head"));
            }
        }
        rules.push(rule);
    }
    let head = rules[0].1.clone();
    let mut bodies: Vec<Cq> = rules.into_iter().flat_map(|r| r.2).collect();
    match head {
        Head::Boolean if bodies.len() == 1 => Ok(Query::Bcq(bodies.remove(0))),
        Head::Boolean => Ok(Query::Ubcq(bodies)),
        Head::Aggregate(..) if bodies.len() > 1 => Err(Error::QueryForm("aggregates over unions are not supported".into())),
        Head::Aggregate(op, target) => {
            let body = bodies.remove(0);
            if let Some(t) = &target {
                if body.atoms_of(t).is_empty() {
                    return Err(Error::QueryForm(format!("aggregate target `{t}` does not occur in the body")));
                }
            }
            Ok(Query::Aggregate { op, target, body })
        }
    }
}

/// Parses query text and checks it against a schema.
pub fn parse_query(text: &str, schema: &Schema) -> Result<Query> {
    let q = parse_query_text(text)?;
    q.check(schema)?;
    Ok(q)
}
