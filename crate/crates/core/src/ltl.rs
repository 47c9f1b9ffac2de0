//! LTL formulas with bounded `F<=n` / `G<=n` operators and monitor references.
//!
//! Concrete syntax (ASCII):
//!
//! ```text
//! expr := "true" | "false" | ident | "!" expr | expr ("&" | "|" | "->") expr
//!       | "X" expr | "G" expr | "F" expr | expr "U" expr
//!       | "G<=" int expr | "F<=" int expr | "(" expr ")"
//! ```
//!
//! Precedence from tightest: `!`, temporal unary, `U`, `&`, `|`, `->`.
//! `U` and `->` associate to the right, `&` and `|` to the left.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Three-valued verdict of an LTL3 monitor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl Verdict {
    pub fn is_final(self) -> bool {
        !matches!(self, Verdict::Unknown)
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Verdict::True => Some(true),
            Verdict::False => Some(false),
            Verdict::Unknown => None,
        }
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::True => "TRUE",
            Verdict::False => "FALSE",
            Verdict::Unknown => "UNKNOWN",
        })
    }
}

impl std::str::FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "TRUE" | "T" | "true" => Ok(Verdict::True),
            "FALSE" | "F" | "false" => Ok(Verdict::False),
            "UNKNOWN" | "?" | "unknown" => Ok(Verdict::Unknown),
            other => Err(format!("unrecognized verdict `{other}`")),
        }
    }
}

/// Abstract syntax of a formula.
///
/// The parser only produces [`Formula::Prop`]; names are turned into
/// [`Formula::Ref`] once a registry knows which of them are monitor labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Const(bool),
    Prop(String),
    Ref(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Globally(Box<Formula>),
    Finally(Box<Formula>),
    FinallyWithin(u32, Box<Formula>),
    GloballyWithin(u32, Box<Formula>),
}

impl Formula {
    pub fn prop(name: impl Into<String>) -> Self {
        Formula::Prop(name.into())
    }

    pub fn reference(name: impl Into<String>) -> Self {
        Formula::Ref(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn globally(f: Formula) -> Self {
        Formula::Globally(Box::new(f))
    }

    pub fn finally(f: Formula) -> Self {
        Formula::Finally(Box::new(f))
    }

    pub fn finally_within(bound: u32, f: Formula) -> Self {
        Formula::FinallyWithin(bound, Box::new(f))
    }

    pub fn globally_within(bound: u32, f: Formula) -> Self {
        Formula::GloballyWithin(bound, Box::new(f))
    }

    /// Left-folded conjunction; `true` when empty.
    pub fn conjunction(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::Const(true))
    }

    /// Left-folded disjunction; `false` when empty.
    pub fn disjunction(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or(Formula::Const(false))
    }

    /// `X^n f`
    pub fn next_n(n: u32, f: Formula) -> Self {
        (0..n).fold(f, |acc, _| Formula::next(acc))
    }

    /// Removes `F<=n`, `G<=n` and `->`.
    pub fn desugar(&self) -> Formula {
        use Formula::*;
        match self {
            Const(_) | Prop(_) | Ref(_) => self.clone(),
            Not(a) => Formula::not(a.desugar()),
            And(a, b) => Formula::and(a.desugar(), b.desugar()),
            Or(a, b) => Formula::or(a.desugar(), b.desugar()),
            Implies(a, b) => Formula::or(Formula::not(a.desugar()), b.desugar()),
            Next(a) => Formula::next(a.desugar()),
            Until(a, b) => Formula::until(a.desugar(), b.desugar()),
            Globally(a) => Formula::globally(a.desugar()),
            Finally(a) => Formula::finally(a.desugar()),
            FinallyWithin(n, a) => {
                let body = a.desugar();
                Formula::disjunction((0..=*n).map(|k| Formula::next_n(k, body.clone())))
            }
            GloballyWithin(n, a) => {
                let body = a.desugar();
                Formula::conjunction((0..=*n).map(|k| Formula::next_n(k, body.clone())))
            }
        }
    }

    pub fn is_desugared(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |f| {
            if matches!(
                f,
                Formula::Implies(..) | Formula::FinallyWithin(..) | Formula::GloballyWithin(..)
            ) {
                ok = false;
            }
        });
        ok
    }

    /// Names of every proposition and reference occurring in the formula.
    pub fn propositions(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Prop(n) | Formula::Ref(n) => {
                out.insert(n.clone());
            }
            _ => {}
        });
        out
    }

    /// Names occurring as [`Formula::Ref`].
    pub fn references(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Ref(n) = f {
                out.insert(n.clone());
            }
        });
        out
    }

    /// True when the formula has no `G`, `F` or `U` (the bounded `F<=n`/`G<=n` are fine).
    pub fn is_bounded(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |f| {
            if matches!(f, Formula::Until(..) | Formula::Globally(_) | Formula::Finally(_)) {
                ok = false;
            }
        });
        ok
    }

    /// Maximum `X` nesting after desugaring.
    pub fn next_depth(&self) -> u32 {
        use Formula::*;
        match self {
            Const(_) | Prop(_) | Ref(_) => 0,
            Not(a) | Globally(a) | Finally(a) => a.next_depth(),
            And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) => a.next_depth().max(b.next_depth()),
            Next(a) => 1 + a.next_depth(),
            FinallyWithin(n, a) | GloballyWithin(n, a) => n + a.next_depth(),
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        use Formula::*;
        f(self);
        match self {
            Const(_) | Prop(_) | Ref(_) => {}
            Not(a) | Next(a) | Globally(a) | Finally(a) | FinallyWithin(_, a) | GloballyWithin(_, a) => {
                a.visit(f)
            }
            And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Bottom-up rewrite of the leaves.
    pub fn map_leaves(&self, leaf: &mut impl FnMut(&Formula) -> Formula) -> Formula {
        use Formula::*;
        match self {
            Const(_) | Prop(_) | Ref(_) => leaf(self),
            Not(a) => Formula::not(a.map_leaves(leaf)),
            And(a, b) => Formula::and(a.map_leaves(leaf), b.map_leaves(leaf)),
            Or(a, b) => Formula::or(a.map_leaves(leaf), b.map_leaves(leaf)),
            Implies(a, b) => Formula::implies(a.map_leaves(leaf), b.map_leaves(leaf)),
            Next(a) => Formula::next(a.map_leaves(leaf)),
            Until(a, b) => Formula::until(a.map_leaves(leaf), b.map_leaves(leaf)),
            Globally(a) => Formula::globally(a.map_leaves(leaf)),
            Finally(a) => Formula::finally(a.map_leaves(leaf)),
            FinallyWithin(n, a) => Formula::finally_within(*n, a.map_leaves(leaf)),
            GloballyWithin(n, a) => Formula::globally_within(*n, a.map_leaves(leaf)),
        }
    }

    fn precedence(&self) -> u8 {
        use Formula::*;
        match self {
            Implies(..) => 1,
            Or(..) => 2,
            And(..) => 3,
            Until(..) => 4,
            Next(_) | Globally(_) | Finally(_) | FinallyWithin(..) | GloballyWithin(..) | Not(_) => 5,
            Const(_) | Prop(_) | Ref(_) => 6,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        // Parenthesize any compound child that is not an atom; keeps output
        // unambiguous without tracking associativity.
        fn child(f: &mut fmt::Formatter<'_>, c: &Formula) -> fmt::Result {
            if c.precedence() >= 5 {
                write!(f, "{c}")
            } else {
                write!(f, "({c})")
            }
        }
        fn unary(f: &mut fmt::Formatter<'_>, op: &str, c: &Formula) -> fmt::Result {
            f.write_str(op)?;
            if c.precedence() == 6 {
                f.write_str(" ")?;
                write!(f, "{c}")
            } else {
                write!(f, "({c})")
            }
        }
        match self {
            Const(true) => f.write_str("true"),
            Const(false) => f.write_str("false"),
            Prop(n) | Ref(n) => f.write_str(n),
            Not(a) => {
                f.write_str("!")?;
                child(f, a)
            }
            And(a, b) => {
                child(f, a)?;
                f.write_str(" & ")?;
                child(f, b)
            }
            Or(a, b) => {
                child(f, a)?;
                f.write_str(" | ")?;
                child(f, b)
            }
            Implies(a, b) => {
                child(f, a)?;
                f.write_str(" -> ")?;
                child(f, b)
            }
            Until(a, b) => {
                child(f, a)?;
                f.write_str(" U ")?;
                child(f, b)
            }
            Next(a) => unary(f, "X", a),
            Globally(a) => unary(f, "G", a),
            Finally(a) => unary(f, "F", a),
            FinallyWithin(n, a) => write!(f, "F<={n}({a})"),
            GloballyWithin(n, a) => write!(f, "G<={n}({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("negative bound `{0}`")]
    NegativeBound(String),
    #[error("invalid bound `{0}`")]
    InvalidBound(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    True,
    False,
    Ident(String),
    Not,
    And,
    Or,
    Implies,
    Next,
    Globally,
    Finally,
    Until,
    GloballyWithin(u32),
    FinallyWithin(u32),
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::True => f.write_str("true"),
            Tok::False => f.write_str("false"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Not => f.write_str("!"),
            Tok::And => f.write_str("&"),
            Tok::Or => f.write_str("|"),
            Tok::Implies => f.write_str("->"),
            Tok::Next => f.write_str("X"),
            Tok::Globally => f.write_str("G"),
            Tok::Finally => f.write_str("F"),
            Tok::Until => f.write_str("U"),
            Tok::GloballyWithin(n) => write!(f, "G<={n}"),
            Tok::FinallyWithin(n) => write!(f, "F<={n}"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
}

impl<'a> Lexer<'a> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.src[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(offset, |i| offset - i - 1) + 1;
        (line, column)
    }

    fn error(&self, offset: usize, kind: ParseErrorKind) -> ParseError {
        let (line, column) = self.position(offset);
        ParseError { line, column, kind }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut out = Vec::new();
        while let Some(&(i, c)) = self.chars.peek() {
            if c.is_whitespace() {
                self.chars.next();
                continue;
            }
            let tok = match c {
                '(' => {
                    self.chars.next();
                    Tok::LParen
                }
                ')' => {
                    self.chars.next();
                    Tok::RParen
                }
                '!' => {
                    self.chars.next();
                    Tok::Not
                }
                '&' => {
                    self.chars.next();
                    Tok::And
                }
                '|' => {
                    self.chars.next();
                    Tok::Or
                }
                '-' => {
                    self.chars.next();
                    match self.chars.peek() {
                        Some(&(_, '>')) => {
                            self.chars.next();
                            Tok::Implies
                        }
                        _ => return Err(self.error(i, ParseErrorKind::UnknownOperator("-".into()))),
                    }
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut word = String::new();
                    while let Some(&(_, c)) = self.chars.peek() {
                        if c.is_ascii_alphanumeric() || c == '_' {
                            word.push(c);
                            self.chars.next();
                        } else {
                            break;
                        }
                    }
                    match word.as_str() {
                        "true" => Tok::True,
                        "false" => Tok::False,
                        "X" => Tok::Next,
                        "U" => Tok::Until,
                        "G" | "F" => {
                            if let Some(&(j, '<')) = self.chars.peek() {
                                self.chars.next();
                                match self.chars.peek() {
                                    Some(&(_, '=')) => {
                                        self.chars.next();
                                    }
                                    _ => {
                                        return Err(self.error(
                                            j,
                                            ParseErrorKind::UnknownOperator(format!("{word}<")),
                                        ))
                                    }
                                }
                                let bound = self.bound()?;
                                if word == "G" {
                                    Tok::GloballyWithin(bound)
                                } else {
                                    Tok::FinallyWithin(bound)
                                }
                            } else if word == "G" {
                                Tok::Globally
                            } else {
                                Tok::Finally
                            }
                        }
                        _ => Tok::Ident(word),
                    }
                }
                '<' | '>' | '=' | '^' | '~' | '+' | '*' | '/' => {
                    // Consume the symbol run so the error names the whole operator.
                    let mut op = String::new();
                    while let Some(&(_, c)) = self.chars.peek() {
                        if "<>=^~+*/".contains(c) {
                            op.push(c);
                            self.chars.next();
                        } else {
                            break;
                        }
                    }
                    return Err(self.error(i, ParseErrorKind::UnknownOperator(op)));
                }
                other => return Err(self.error(i, ParseErrorKind::UnexpectedChar(other))),
            };
            out.push((i, tok));
        }
        Ok(out)
    }

    fn bound(&mut self) -> Result<u32, ParseError> {
        while let Some(&(_, c)) = self.chars.peek() {
            if c == ' ' {
                self.chars.next();
            } else {
                break;
            }
        }
        let start = self.chars.peek().map_or(self.src.len(), |&(i, _)| i);
        let mut text = String::new();
        if let Some(&(_, '-')) = self.chars.peek() {
            text.push('-');
            self.chars.next();
        }
        while let Some(&(_, c)) = self.chars.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                self.chars.next();
            } else {
                break;
            }
        }
        if text.starts_with('-') {
            return Err(self.error(start, ParseErrorKind::NegativeBound(text)));
        }
        text.parse::<u32>()
            .map_err(|_| self.error(start, ParseErrorKind::InvalidBound(text)))
    }
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    lexer: Lexer<'a>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .map_or(self.lexer.src.len(), |(i, _)| *i)
    }

    fn err_here(&self) -> ParseError {
        let kind = match self.peek() {
            Some(t) => ParseErrorKind::UnexpectedToken(t.to_string()),
            None => ParseErrorKind::UnexpectedEnd,
        };
        self.lexer.error(self.offset(), kind)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) {
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.until()?;
        while self.eat(&Tok::And) {
            let rhs = self.until()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.unary()?;
        if self.eat(&Tok::Until) {
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.err_here());
        };
        let wrap: fn(Formula) -> Formula = match tok {
            Tok::Not => Formula::not,
            Tok::Next => Formula::next,
            Tok::Globally => Formula::globally,
            Tok::Finally => Formula::finally,
            Tok::GloballyWithin(n) => {
                self.pos += 1;
                return Ok(Formula::globally_within(n, self.unary()?));
            }
            Tok::FinallyWithin(n) => {
                self.pos += 1;
                return Ok(Formula::finally_within(n, self.unary()?));
            }
            _ => return self.atom(),
        };
        self.pos += 1;
        Ok(wrap(self.unary()?))
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let f = match self.peek() {
            Some(Tok::True) => Formula::Const(true),
            Some(Tok::False) => Formula::Const(false),
            Some(Tok::Ident(n)) => Formula::Prop(n.clone()),
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.implication()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.err_here());
                }
                return Ok(inner);
            }
            _ => return Err(self.err_here()),
        };
        self.pos += 1;
        Ok(f)
    }
}

/// Parses a formula in the ASCII grammar described in the module docs.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let lexer = Lexer { chars: text.char_indices().peekable(), src: text };
    let toks = Lexer { chars: text.char_indices().peekable(), src: text }.tokens()?;
    let mut p = Parser { toks, pos: 0, lexer };
    let f = p.implication()?;
    if p.pos != p.toks.len() {
        return Err(p.err_here());
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
