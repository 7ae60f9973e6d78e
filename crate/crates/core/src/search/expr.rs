//! Connective expressions over advanced-search parameters.
//!
//! Parameters are referenced by 1-based position: `1 AND (2 OR 3)`. A
//! parenthesis group may use only one kind of connective, so `1 AND 2 OR 3`
//! is refused as ambiguous.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    /// 0-based parameter index.
    Param(usize),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Token {
    Num(usize),
    And,
    Or,
    Open,
    Close,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '(' {
            out.push(Token::Open);
            chars.next();
        } else if c == ')' {
            out.push(Token::Close);
            chars.next();
        } else if c.is_ascii_digit() {
            let mut n = 0usize;
            while let Some(&(_, d)) = chars.peek() {
                let Some(v) = d.to_digit(10) else { break };
                n = n.saturating_mul(10).saturating_add(v as usize);
                chars.next();
            }
            out.push(Token::Num(n));
        } else if c.is_ascii_alphabetic() {
            let mut word = String::new();
            while let Some(&(_, d)) = chars.peek() {
                if !d.is_ascii_alphabetic() {
                    break;
                }
                word.push(d);
                chars.next();
            }
            match word.to_ascii_uppercase().as_str() {
                "AND" => out.push(Token::And),
                "OR" => out.push(Token::Or),
                _ => return Err(Error::invalid(format!("unknown connective `{word}` at {i}"))),
            }
        } else if c == '&' || c == '|' {
            chars.next();
            if chars.peek().map(|&(_, d)| d) == Some(c) {
                chars.next();
            }
            out.push(if c == '&' { Token::And } else { Token::Or });
        } else {
            return Err(Error::invalid(format!("unexpected `{c}` at {i} in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.peek();
        self.pos += 1;
        t
    }

    fn sequence(&mut self) -> Result<Expr> {
        let mut items = vec![self.atom()?];
        let mut connective = None;
        while let Some(t @ (Token::And | Token::Or)) = self.peek() {
            self.next();
            match connective {
                None => connective = Some(t),
                Some(c) if c != t => {
                    return Err(Error::RefinementRequired(
                        "AND and OR are mixed without parentheses; group the terms to say which binds first".into(),
                    ));
                }
                Some(_) => {}
            }
            items.push(self.atom()?);
        }
        Ok(match connective {
            None => items.pop().expect("one atom"),
            Some(Token::And) => Expr::And(items),
            Some(_) => Expr::Or(items),
        })
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(0)) => Err(Error::invalid("parameters are numbered from 1")),
            Some(Token::Num(n)) => Ok(Expr::Param(n - 1)),
            Some(Token::Open) => {
                let inner = self.sequence()?;
                match self.next() {
                    Some(Token::Close) => Ok(inner),
                    _ => Err(Error::invalid("unbalanced parentheses in expression")),
                }
            }
            _ => Err(Error::invalid("expression is incomplete")),
        }
    }
}

impl Expr {
    /// Parses `src` over `count` parameters. Each parameter must appear
    /// exactly once.
    pub fn parse(src: &str, count: usize) -> Result<Self> {
        let mut p = Parser {
            tokens: tokenize(src)?,
            pos: 0,
        };
        if p.tokens.is_empty() {
            return Err(Error::invalid("expression is empty"));
        }
        let expr = p.sequence()?;
        if p.pos != p.tokens.len() {
            return Err(Error::invalid("unexpected trailing input in expression"));
        }
        let mut seen = vec![0usize; count];
        for i in expr.params() {
            match seen.get_mut(i) {
                Some(n) => *n += 1,
                None => return Err(Error::invalid(format!("expression names parameter {} of {count}", i + 1))),
            }
        }
        if let Some(i) = seen.iter().position(|&n| n != 1) {
            return Err(Error::invalid(format!(
                "parameter {} must appear exactly once in the expression",
                i + 1
            )));
        }
        Ok(expr)
    }

    /// Conjunction of the first `count` parameters.
    pub fn all(count: usize) -> Self {
        match count {
            1 => Expr::Param(0),
            n => Expr::And((0..n).map(Expr::Param).collect()),
        }
    }

    pub fn params(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Param(i) => out.push(*i),
            Expr::And(v) | Expr::Or(v) => v.iter().for_each(|e| e.collect(out)),
        }
    }

    /// Drops references to parameters at or beyond `keep`, collapsing groups
    /// left with one member. `None` if nothing remains.
    pub fn prune(self, keep: usize) -> Option<Self> {
        match self {
            Expr::Param(i) => (i < keep).then_some(Expr::Param(i)),
            Expr::And(v) => Self::regroup(v, keep, Expr::And),
            Expr::Or(v) => Self::regroup(v, keep, Expr::Or),
        }
    }

    fn regroup(v: Vec<Expr>, keep: usize, make: fn(Vec<Expr>) -> Expr) -> Option<Self> {
        let mut kept: Vec<Expr> = v.into_iter().filter_map(|e| e.prune(keep)).collect();
        match kept.len() {
            0 => None,
            1 => kept.pop(),
            _ => Some(make(kept)),
        }
    }

    /// Evaluates against per-parameter truth values.
    pub fn eval(&self, truth: &dyn Fn(usize) -> bool) -> bool {
        match self {
            Expr::Param(i) => truth(*i),
            Expr::And(v) => v.iter().all(|e| e.eval(truth)),
            Expr::Or(v) => v.iter().any(|e| e.eval(truth)),
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized, 1-based.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (items, word) = match self {
            Expr::Param(i) => return write!(f, "{}", i + 1),
            Expr::And(v) => (v, " AND "),
            Expr::Or(v) => (v, " OR "),
        };
        f.write_str("(")?;
        for (n, e) in items.iter().enumerate() {
            if n > 0 {
                f.write_str(word)?;
            }
            write!(f, "{e}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
