//! Concrete syntax for rules, formulas and expressions.
//!
//! ```text
//! rule { exists i . (i > curr and e[i].org:group == e[i+1].org:group) => "Ping-Pong"; default "Not Ping-Pong" }
//! ```
//!
//! Precedence, loosest first: `->` (right-associative), `or`, `and`, `not`, comparisons, `+`/`-`.

use std::collections::BTreeSet;
use std::fmt;

use crate::ast::{
    standardize_apart, AggCond, AggOp, AnalyticRule, CmpOp, EventExpr, FoeFormula, IndexExpr, NonNumExpr, NumExpr,
    Range, RuleKind, TargetExpr,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: expected ", self.line, self.column)?;
        match self.expected.len() {
            0 => f.write_str("nothing")?,
            1 => f.write_str(&self.expected[0])?,
            _ => write!(f, "one of {}", self.expected.join(", "))?,
        }
        write!(f, ", found {}", self.found)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num { value: f64, int: Option<u64> },
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Dot,
    Comma,
    Semi,
    Colon,
    Plus,
    Minus,
    Arrow,
    FatArrow,
    Assign,
    Cmp(CmpOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num { value, .. } => format!("number {value}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::FatArrow => "`=>`".into(),
            Tok::Assign => "`=`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn lex_error(text: &str, offset: usize, expected: &str, found: String) -> ParseError {
    let (line, column) = position(text, offset);
    ParseError {
        line,
        column,
        expected: vec![expected.to_string()],
        found,
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let two = |a: u8, b: u8| c == a && bytes.get(i + 1) == Some(&b);
        let (tok, len) = if two(b'-', b'>') {
            (Tok::Arrow, 2)
        } else if two(b'=', b'>') {
            (Tok::FatArrow, 2)
        } else if two(b'=', b'=') {
            (Tok::Cmp(CmpOp::Eq), 2)
        } else if two(b'!', b'=') {
            (Tok::Cmp(CmpOp::Ne), 2)
        } else if two(b'<', b'=') {
            (Tok::Cmp(CmpOp::Le), 2)
        } else if two(b'>', b'=') {
            (Tok::Cmp(CmpOp::Ge), 2)
        } else {
            match c {
                b'(' => (Tok::LParen, 1),
                b')' => (Tok::RParen, 1),
                b'[' => (Tok::LBracket, 1),
                b']' => (Tok::RBracket, 1),
                b'{' => (Tok::LBrace, 1),
                b'}' => (Tok::RBrace, 1),
                b'.' => (Tok::Dot, 1),
                b',' => (Tok::Comma, 1),
                b';' => (Tok::Semi, 1),
                b':' => (Tok::Colon, 1),
                b'+' => (Tok::Plus, 1),
                b'-' => (Tok::Minus, 1),
                b'=' => (Tok::Assign, 1),
                b'<' => (Tok::Cmp(CmpOp::Lt), 1),
                b'>' => (Tok::Cmp(CmpOp::Gt), 1),
                b'"' => {
                    let mut s = String::new();
                    let mut j = i + 1;
                    loop {
                        let Some(ch) = text[j..].chars().next() else {
                            return Err(lex_error(text, start, "closing `\"`", "end of input".into()));
                        };
                        match ch {
                            '"' => break,
                            '\\' => match text[j + 1..].chars().next() {
                                Some(e @ ('"' | '\\')) => {
                                    s.push(e);
                                    j += 2;
                                    continue;
                                }
                                other => {
                                    return Err(lex_error(
                                        text,
                                        j,
                                        "escape `\\\"` or `\\\\`",
                                        format!("`\\{}`", other.map(String::from).unwrap_or_default()),
                                    ))
                                }
                            },
                            _ => s.push(ch),
                        }
                        j += ch.len_utf8();
                    }
                    (Tok::Str(s), j + 1 - i)
                }
                b'0'..=b'9' => {
                    let mut j = i;
                    let digits = |j: &mut usize| {
                        while *j < bytes.len() && (bytes[*j].is_ascii_digit() || bytes[*j] == b'_') {
                            *j += 1;
                        }
                    };
                    digits(&mut j);
                    let mut frac = false;
                    if j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
                        frac = true;
                        j += 1;
                        digits(&mut j);
                        if j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
                            return Err(lex_error(
                                text,
                                start,
                                "number (write thousands as 10_800_000, not 10.800.000)",
                                format!("`{}`", &text[start..j]),
                            ));
                        }
                    }
                    let clean: String = text[i..j].chars().filter(|&c| c != '_').collect();
                    let value: f64 = clean
                        .parse()
                        .map_err(|_| lex_error(text, start, "number", format!("`{}`", &text[i..j])))?;
                    let int = if frac { None } else { clean.parse::<u64>().ok() };
                    (Tok::Num { value, int }, j - i)
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let mut j = i;
                    while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                        j += 1;
                    }
                    (Tok::Ident(text[i..j].to_string()), j - i)
                }
                _ => {
                    let ch = text[i..].chars().next().unwrap_or('?');
                    return Err(lex_error(text, start, "token", format!("`{ch}`")));
                }
            }
        };
        out.push(Token {
            tok,
            start,
            end: start + len,
        });
        i = start + len;
    }
    out.push(Token {
        tok: Tok::Eof,
        start: text.len(),
        end: text.len(),
    });
    Ok(out)
}

const RESERVED: &[&str] = &[
    "forall", "exists", "and", "or", "not", "curr", "last", "true", "false", "default", "rule", "where", "within", "if",
];

/// Untyped operand; typed once the surrounding context is known.
#[derive(Debug, Clone)]
enum Term {
    Num(f64, Option<u64>),
    Str(String),
    Bool(bool),
    Curr,
    Last,
    Var(String),
    Attr(IndexExpr, String),
    NumAgg(NumExpr),
    Concat(NonNumExpr),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Num,
    NonNum,
    Either,
}

impl Term {
    fn kind(&self) -> Kind {
        match self {
            Term::Str(_) | Term::Bool(_) | Term::Concat(_) => Kind::NonNum,
            Term::Attr(..) => Kind::Either,
            _ => Kind::Num,
        }
    }

    /// (all leaves are index atoms, at least one leaf is not a literal)
    fn index_shape(&self) -> (bool, bool) {
        match self {
            Term::Num(_, Some(n)) if *n >= 1 => (true, false),
            Term::Curr | Term::Last | Term::Var(_) => (true, true),
            Term::Add(a, b) | Term::Sub(a, b) => {
                let (ia, na) = a.index_shape();
                let (ib, nb) = b.index_shape();
                (ia && ib, na || nb)
            }
            _ => (false, false),
        }
    }

    fn to_index(&self) -> Option<IndexExpr> {
        Some(match self {
            Term::Num(_, Some(n)) if *n >= 1 => IndexExpr::Const(*n),
            Term::Curr => IndexExpr::Curr,
            Term::Last => IndexExpr::Last,
            Term::Var(v) => IndexExpr::Var(v.clone()),
            Term::Add(a, b) => IndexExpr::add(a.to_index()?, b.to_index()?),
            Term::Sub(a, b) => IndexExpr::sub(a.to_index()?, b.to_index()?),
            _ => return None,
        })
    }

    fn to_num(&self) -> Option<NumExpr> {
        let (all, nonlit) = self.index_shape();
        if all && nonlit {
            return self.to_index().map(NumExpr::Index);
        }
        Some(match self {
            Term::Num(v, _) => NumExpr::Lit(*v),
            Term::Curr | Term::Last | Term::Var(_) => NumExpr::Index(self.to_index()?),
            Term::Attr(i, a) => NumExpr::Attr(i.clone(), a.clone()),
            Term::NumAgg(e) => e.clone(),
            Term::Add(a, b) => NumExpr::Add(Box::new(a.to_num()?), Box::new(b.to_num()?)),
            Term::Sub(a, b) => NumExpr::Sub(Box::new(a.to_num()?), Box::new(b.to_num()?)),
            Term::Str(_) | Term::Bool(_) | Term::Concat(_) => return None,
        })
    }

    fn to_nonnum(&self) -> Option<NonNumExpr> {
        Some(match self {
            Term::Str(s) => NonNumExpr::Str(s.clone()),
            Term::Bool(b) => NonNumExpr::Bool(*b),
            Term::Attr(i, a) => NonNumExpr::Attr(i.clone(), a.clone()),
            Term::Concat(e) => e.clone(),
            _ => return None,
        })
    }
}

struct Fail;

type PResult<T> = Result<T, Fail>;

struct Parser<'a> {
    text: &'a str,
    toks: Vec<Token>,
    pos: usize,
    best_at: usize,
    best_expected: BTreeSet<String>,
    best_found: String,
    /// Set while parsing an aggregation condition: quantifiers are not allowed there.
    in_agg_cond: bool,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, ParseError> {
        Ok(Parser {
            text,
            toks: lex(text)?,
            pos: 0,
            best_at: 0,
            best_expected: BTreeSet::new(),
            best_found: String::new(),
            in_agg_cond: false,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].start
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail_at<T>(&mut self, offset: usize, expected: &str, found: String) -> PResult<T> {
        if offset > self.best_at || self.best_expected.is_empty() {
            self.best_at = offset;
            self.best_expected.clear();
            self.best_found = found;
        }
        if offset == self.best_at {
            self.best_expected.insert(expected.to_string());
        }
        Err(Fail)
    }

    fn fail<T>(&mut self, expected: &str) -> PResult<T> {
        let found = self.peek().describe();
        self.fail_at(self.offset(), expected, found)
    }

    fn error(&self) -> ParseError {
        let (line, column) = position(self.text, self.best_at);
        ParseError {
            line,
            column,
            expected: self.best_expected.iter().cloned().collect(),
            found: self.best_found.clone(),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.fail(&t.describe())
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.fail(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail(what),
        }
    }

    fn expect_end(&mut self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.fail("end of input")
        }
    }

    // ---- formulas

    fn formula(&mut self) -> PResult<FoeFormula> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.formula()?;
            return Ok(FoeFormula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<FoeFormula> {
        let mut lhs = self.conjunction()?;
        while self.is_kw("or") {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = FoeFormula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> PResult<FoeFormula> {
        let mut lhs = self.unary()?;
        while self.is_kw("and") {
            self.bump();
            let rhs = self.unary()?;
            lhs = FoeFormula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<FoeFormula> {
        if self.is_kw("not") {
            self.bump();
            return Ok(FoeFormula::not(self.unary()?));
        }
        if self.is_kw("forall") || self.is_kw("exists") {
            if self.in_agg_cond {
                return self.fail("event expression (quantifiers are not allowed in aggregation conditions)");
            }
            let universal = self.is_kw("forall");
            self.bump();
            let mut vars = vec![self.ident("variable name")?];
            while self.eat(&Tok::Comma) {
                vars.push(self.ident("variable name")?);
            }
            self.expect(Tok::Dot)?;
            let mut body = self.formula()?;
            for v in vars.iter().rev() {
                body = if universal {
                    FoeFormula::forall(v, body)
                } else {
                    FoeFormula::exists(v, body)
                };
            }
            return Ok(body);
        }
        if matches!(self.peek(), Tok::LParen) {
            let save = self.pos;
            if let Ok(atom) = self.atom() {
                return Ok(atom);
            }
            self.pos = save;
            self.bump();
            let inner = self.formula()?;
            self.expect(Tok::RParen)?;
            return Ok(inner);
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<FoeFormula> {
        let at = self.offset();
        let lhs = self.term()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => {
                if let Term::Bool(b) = lhs {
                    return Ok(FoeFormula::Atom(EventExpr::Bool(b)));
                }
                return self.fail("comparison operator");
            }
        };
        self.bump();
        let rat = self.offset();
        let rhs = self.term()?;
        let expr = self.comparison(op, lhs, at, rhs, rat)?;
        Ok(FoeFormula::Atom(expr))
    }

    fn comparison(&mut self, op: CmpOp, lhs: Term, at: usize, rhs: Term, rat: usize) -> PResult<EventExpr> {
        let numeric_only = !matches!(op, CmpOp::Eq | CmpOp::Ne);
        let (ka, kb) = (lhs.kind(), rhs.kind());
        if !numeric_only {
            if let (Term::Attr(i, a), Term::Attr(j, b)) = (&lhs, &rhs) {
                return Ok(EventExpr::AttrCompare(
                    op,
                    (i.clone(), a.clone()),
                    (j.clone(), b.clone()),
                ));
            }
            if ka == Kind::NonNum || kb == Kind::NonNum {
                let a = self.typed_nonnum(&lhs, at)?;
                let b = self.typed_nonnum(&rhs, rat)?;
                return Ok(EventExpr::NonNum(op, a, b));
            }
        }
        let a = self.typed_num(&lhs, at)?;
        let b = self.typed_num(&rhs, rat)?;
        Ok(EventExpr::Num(op, a, b))
    }

    fn typed_num(&mut self, t: &Term, at: usize) -> PResult<NumExpr> {
        match t.to_num() {
            Some(e) => Ok(e),
            None => self.fail_at(at, "numeric expression", "non-numeric expression".into()),
        }
    }

    fn typed_nonnum(&mut self, t: &Term, at: usize) -> PResult<NonNumExpr> {
        match t.to_nonnum() {
            Some(e) => Ok(e),
            None => self.fail_at(at, "non-numeric expression", "numeric expression".into()),
        }
    }

    fn typed_index(&mut self, t: &Term, at: usize) -> PResult<IndexExpr> {
        match t.to_index() {
            Some(e) => Ok(e),
            None => self.fail_at(
                at,
                "index expression (variable, positive integer, curr, last, + or -)",
                "other expression".into(),
            ),
        }
    }

    // ---- terms

    fn term(&mut self) -> PResult<Term> {
        let mut lhs = self.primary()?;
        loop {
            let add = match self.peek() {
                Tok::Plus => true,
                Tok::Minus => false,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.primary()?;
            lhs = if add {
                Term::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Term::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
    }

    fn primary(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Num { value, int } => {
                self.bump();
                Ok(Term::Num(value, int))
            }
            Tok::Minus => {
                if let Tok::Num { value, .. } = self.peek_at(1).clone() {
                    self.bump();
                    self.bump();
                    Ok(Term::Num(-value, None))
                } else {
                    self.bump();
                    self.fail("number")
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Term::Str(s))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(name) => {
                let call = matches!(self.peek_at(1), Tok::LParen);
                match name.as_str() {
                    "true" | "false" => {
                        self.bump();
                        Ok(Term::Bool(name == "true"))
                    }
                    "curr" => {
                        self.bump();
                        Ok(Term::Curr)
                    }
                    "last" => {
                        self.bump();
                        Ok(Term::Last)
                    }
                    "e" if matches!(self.peek_at(1), Tok::LBracket) => self.accessor(),
                    "sum" | "avg" | "min" | "max" | "concat" if call => self.aggregate(&name),
                    "count" if call => self.count(),
                    "countval" if call => self.countval(),
                    "min2" | "max2" if call => self.binary_fn(&name),
                    _ => Ok(Term::Var(self.ident("expression")?)),
                }
            }
            _ => self.fail("expression"),
        }
    }

    fn accessor(&mut self) -> PResult<Term> {
        self.bump();
        self.expect(Tok::LBracket)?;
        let at = self.offset();
        let idx = self.term()?;
        let idx = self.typed_index(&idx, at)?;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::Dot)?;
        let name = self.attr_name()?;
        Ok(Term::Attr(idx, name))
    }

    /// `concept:name`, `org:resource`, or a quoted name such as `"organization involved"`.
    fn attr_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Ident(s) => {
                let mut name = s;
                let mut end = self.toks[self.pos].end;
                self.bump();
                loop {
                    let colon = &self.toks[self.pos];
                    let next = &self.toks[(self.pos + 1).min(self.toks.len() - 1)];
                    let adjacent = colon.start == end && next.start == colon.end;
                    let part = match &next.tok {
                        Tok::Ident(p) => p.clone(),
                        Tok::Num { int: Some(_), .. } => self.text[next.start..next.end].to_string(),
                        _ => break,
                    };
                    if colon.tok != Tok::Colon || !adjacent {
                        break;
                    }
                    name.push(':');
                    name.push_str(&part);
                    end = next.end;
                    self.bump();
                    self.bump();
                }
                Ok(name)
            }
            _ => self.fail("attribute name"),
        }
    }

    fn range(&mut self) -> PResult<Range> {
        let at = self.offset();
        let st = self.term()?;
        let st = self.typed_index(&st, at)?;
        self.expect(Tok::Colon)?;
        let at = self.offset();
        let ed = self.term()?;
        let ed = self.typed_index(&ed, at)?;
        Ok(Range::new(st, ed))
    }

    fn agg_cond(&mut self) -> PResult<AggCond> {
        let at = self.offset();
        let outer = self.in_agg_cond;
        self.in_agg_cond = true;
        let f = self.formula();
        self.in_agg_cond = outer;
        match to_agg_cond(f?) {
            Some(c) => Ok(c),
            None => self.fail_at(at, "aggregation condition without `->`", "implication".into()),
        }
    }

    fn where_clause(&mut self) -> PResult<(String, Range)> {
        self.expect(Tok::Semi)?;
        self.expect_kw("where")?;
        let var = self.ident("aggregation variable")?;
        self.expect(Tok::Assign)?;
        let range = self.range()?;
        Ok((var, range))
    }

    fn aggregate(&mut self, name: &str) -> PResult<Term> {
        self.bump();
        self.expect(Tok::LParen)?;
        let at = self.offset();
        let src = self.term()?;
        let (var, range) = self.where_clause()?;
        let cond = if self.eat(&Tok::Semi) {
            self.expect_kw("if")?;
            self.agg_cond()?
        } else {
            AggCond::always()
        };
        self.expect(Tok::RParen)?;
        let cond = Box::new(cond);
        if name == "concat" {
            let source = Box::new(self.typed_nonnum(&src, at)?);
            return Ok(Term::Concat(NonNumExpr::Concat {
                source,
                var,
                range,
                cond,
            }));
        }
        let op = match name {
            "sum" => AggOp::Sum,
            "avg" => AggOp::Avg,
            "min" => AggOp::Min,
            _ => AggOp::Max,
        };
        let source = Box::new(self.typed_num(&src, at)?);
        Ok(Term::NumAgg(NumExpr::Agg {
            op,
            source,
            var,
            range,
            cond,
        }))
    }

    fn count(&mut self) -> PResult<Term> {
        self.bump();
        self.expect(Tok::LParen)?;
        let cond = self.agg_cond()?;
        let (var, range) = self.where_clause()?;
        self.expect(Tok::RParen)?;
        Ok(Term::NumAgg(NumExpr::Count {
            cond: Box::new(cond),
            var,
            range,
        }))
    }

    fn countval(&mut self) -> PResult<Term> {
        self.bump();
        self.expect(Tok::LParen)?;
        let attr = self.attr_name()?;
        self.expect(Tok::Semi)?;
        self.expect_kw("within")?;
        let range = self.range()?;
        self.expect(Tok::RParen)?;
        Ok(Term::NumAgg(NumExpr::CountVal { attr, range }))
    }

    fn binary_fn(&mut self, name: &str) -> PResult<Term> {
        self.bump();
        self.expect(Tok::LParen)?;
        let at = self.offset();
        let a = self.term()?;
        let a = self.typed_num(&a, at)?;
        self.expect(Tok::Comma)?;
        let at = self.offset();
        let b = self.term()?;
        let b = self.typed_num(&b, at)?;
        self.expect(Tok::RParen)?;
        let (a, b) = (Box::new(a), Box::new(b));
        Ok(Term::NumAgg(if name == "min2" {
            NumExpr::Min2(a, b)
        } else {
            NumExpr::Max2(a, b)
        }))
    }

    // ---- rules

    fn rule(&mut self) -> PResult<AnalyticRule> {
        self.expect_kw("rule")?;
        self.expect(Tok::LBrace)?;
        let mut cases = Vec::new();
        while !self.is_kw("default") {
            let cond = self.formula()?;
            self.expect(Tok::FatArrow)?;
            let at = self.offset();
            let target = self.term()?;
            self.expect(Tok::Semi)?;
            cases.push((standardize_apart(&cond), target, at));
        }
        self.bump();
        let at = self.offset();
        let default = self.term()?;
        self.eat(&Tok::Semi);
        self.expect(Tok::RBrace)?;
        self.expect_end()?;

        let kinds: Vec<Kind> = cases
            .iter()
            .map(|(_, t, _)| t.kind())
            .chain(std::iter::once(default.kind()))
            .collect();
        let has_num = kinds.contains(&Kind::Num);
        let has_nonnum = kinds.contains(&Kind::NonNum);
        let fallback = match (has_num, has_nonnum, default.kind()) {
            (true, false, _) => RuleKind::Numeric,
            (true, true, Kind::Num) => RuleKind::Numeric,
            _ => RuleKind::NonNumeric,
        };
        let mut typed = Vec::with_capacity(cases.len());
        for (cond, t, at) in cases {
            typed.push((cond, self.target(&t, at, fallback)?));
        }
        let default = self.target(&default, at, fallback)?;
        Ok(AnalyticRule::new(typed, default))
    }

    fn target(&mut self, t: &Term, at: usize, fallback: RuleKind) -> PResult<TargetExpr> {
        let kind = match t.kind() {
            Kind::Num => RuleKind::Numeric,
            Kind::NonNum => RuleKind::NonNumeric,
            Kind::Either => fallback,
        };
        Ok(match kind {
            RuleKind::Numeric => TargetExpr::Num(self.typed_num(t, at)?),
            RuleKind::NonNumeric => TargetExpr::NonNum(self.typed_nonnum(t, at)?),
        })
    }
}

fn to_agg_cond(f: FoeFormula) -> Option<AggCond> {
    Some(match f {
        FoeFormula::Atom(e) => AggCond::Atom(e),
        FoeFormula::Not(a) => AggCond::Not(Box::new(to_agg_cond(*a)?)),
        FoeFormula::And(a, b) => AggCond::And(Box::new(to_agg_cond(*a)?), Box::new(to_agg_cond(*b)?)),
        FoeFormula::Or(a, b) => AggCond::Or(Box::new(to_agg_cond(*a)?), Box::new(to_agg_cond(*b)?)),
        _ => return None,
    })
}

/// Parses a `rule { ... }` block. Conditions are standardized apart; no validation is done.
pub fn parse_rule(text: &str) -> Result<AnalyticRule, ParseError> {
    let mut p = Parser::new(text)?;
    p.rule().map_err(|_| p.error())
}

/// Parses a bare formula and standardizes it apart.
pub fn parse_formula(text: &str) -> Result<FoeFormula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = p.formula().and_then(|f| p.expect_end().map(|_| f));
    f.map(|f| standardize_apart(&f)).map_err(|_| p.error())
}

/// Parses a numeric expression such as `e[last].time:timestamp - e[curr].time:timestamp`.
pub fn parse_num_expr(text: &str) -> Result<NumExpr, ParseError> {
    let mut p = Parser::new(text)?;
    let r = p.term().and_then(|t| {
        p.expect_end()?;
        p.typed_num(&t, 0)
    });
    r.map_err(|_| p.error())
}

/// Parses a non-numeric expression such as `"Ping-Pong"` or a `concat(...)` aggregate.
pub fn parse_nonnum_expr(text: &str) -> Result<NonNumExpr, ParseError> {
    let mut p = Parser::new(text)?;
    let r = p.term().and_then(|t| {
        p.expect_end()?;
        p.typed_nonnum(&t, 0)
    });
    r.map_err(|_| p.error())
}
