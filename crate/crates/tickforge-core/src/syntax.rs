//! Parser and static analysis for the `.tmsr` specification language.
//!
//! The surface syntax follows the rule notation of timed multiset rewriting:
//!
//! ```text
//! sort energy = 0..5;
//! sort droneid = { d1, d2 };
//! pred Dr(droneid, coordx, coordy, energy);
//! init { Time@0, Dr(d1,0,0,1)@0 }
//! pragma progressing;
//! rule click[e in 0..4]:
//!   Time@T, P(p1,0,0)@T1, Dr(Id,0,0,e+1)@T | { T1 < T }
//!   -> Time@T, P(p1,0,0)@T, Dr(Id,0,0,e)@(T+1);
//! critical { Dr(Id,X,Y,0)@T | { } }
//! ```
//!
//! Rules may carry bounded-range parameters in brackets; they are expanded
//! into ground rule instances at parse time, one per parameter valuation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{
    Configuration, Constraint, CriticalPair, CriticalSpec, Fact, FactPattern, Rel, Rule, RuleKind,
    Term, TimedPattern, TsFact, TICK_RULE, TIME_PRED,
};

pub const NONCE_SORT: &str = "nonce";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sort {
    Enum(Vec<String>),
    Range(u64),
}

/// A parsed and expanded specification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecModel {
    pub sorts: BTreeMap<String, Sort>,
    pub preds: BTreeMap<String, Vec<String>>,
    pub rules: Vec<Rule>,
    pub critical: CriticalSpec,
    pub initial: Configuration,
    pub progressing_pragma: bool,
    /// Rule count before macro expansion, for reporting the expansion factor.
    pub src_rule_count: usize,
}

impl SpecModel {
    /// Structural equality on the semantic content (used by the round-trip
    /// property; `src_rule_count` is presentation metadata).
    pub fn same_model(&self, other: &SpecModel) -> bool {
        self.sorts == other.sorts
            && self.preds == other.preds
            && self.rules == other.rules
            && self.critical == other.critical
            && self.initial == other.initial
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }
}

/// Syntactic bounds of a specification.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SpecStats {
    pub m: u64,
    pub k: u64,
    pub dmax: u64,
    pub j: u64,
    pub e: u64,
    pub balanced: bool,
    pub progressing: bool,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    DotDot,
    At,
    Pipe,
    Arrow,
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    Minus,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Nat(n) => write!(f, "`{n}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::DotDot => write!(f, "`..`"),
            Tok::At => write!(f, "`@`"),
            Tok::Pipe => write!(f, "`|`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Le => write!(f, "`<=`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexed {
    toks: Vec<(Tok, usize, usize)>,
}

fn lex(src: &str) -> Result<Lexed, Diagnostic> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    macro_rules! bump {
        () => {{
            let ch = chars.next();
            if ch == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            ch
        }};
    }
    loop {
        let (l0, c0) = (line, col);
        let Some(&ch) = chars.peek() else {
            toks.push((Tok::Eof, line, col));
            break;
        };
        match ch {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '/' => {
                bump!();
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    return Err(Diagnostic {
                        line: l0,
                        col: c0,
                        msg: "unexpected `/`".into(),
                    });
                }
            }
            '(' => {
                bump!();
                toks.push((Tok::LParen, l0, c0));
            }
            ')' => {
                bump!();
                toks.push((Tok::RParen, l0, c0));
            }
            '{' => {
                bump!();
                toks.push((Tok::LBrace, l0, c0));
            }
            '}' => {
                bump!();
                toks.push((Tok::RBrace, l0, c0));
            }
            '[' => {
                bump!();
                toks.push((Tok::LBracket, l0, c0));
            }
            ']' => {
                bump!();
                toks.push((Tok::RBracket, l0, c0));
            }
            ',' => {
                bump!();
                toks.push((Tok::Comma, l0, c0));
            }
            ';' => {
                bump!();
                toks.push((Tok::Semi, l0, c0));
            }
            ':' => {
                bump!();
                toks.push((Tok::Colon, l0, c0));
            }
            '@' => {
                bump!();
                toks.push((Tok::At, l0, c0));
            }
            '|' => {
                bump!();
                toks.push((Tok::Pipe, l0, c0));
            }
            '+' => {
                bump!();
                toks.push((Tok::Plus, l0, c0));
            }
            '=' => {
                bump!();
                toks.push((Tok::Eq, l0, c0));
            }
            '.' => {
                bump!();
                if chars.peek() == Some(&'.') {
                    bump!();
                    toks.push((Tok::DotDot, l0, c0));
                } else {
                    toks.push((Tok::Dot, l0, c0));
                }
            }
            '-' => {
                bump!();
                if chars.peek() == Some(&'>') {
                    bump!();
                    toks.push((Tok::Arrow, l0, c0));
                } else {
                    toks.push((Tok::Minus, l0, c0));
                }
            }
            '<' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    toks.push((Tok::Le, l0, c0));
                } else {
                    toks.push((Tok::Lt, l0, c0));
                }
            }
            '>' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    toks.push((Tok::Ge, l0, c0));
                } else {
                    toks.push((Tok::Gt, l0, c0));
                }
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                let n: u64 = s.parse().map_err(|_| Diagnostic {
                    line: l0,
                    col: c0,
                    msg: format!("numeral `{s}` out of range"),
                })?;
                toks.push((Tok::Nat(n), l0, c0));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Ident(s), l0, c0));
            }
            other => {
                return Err(Diagnostic {
                    line: l0,
                    col: c0,
                    msg: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    Ok(Lexed { toks })
}

// ---------------------------------------------------------------------------
// Surface forms (pre-expansion)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum PTerm {
    Var(String),
    /// `name + c` where name may be a variable or a rule parameter.
    Plus(String, u64),
    /// `name - c`; only meaningful when name is a rule parameter.
    Minus(String, u64),
    /// lowercase identifier: declared constant or rule parameter.
    Sym(String),
    Num(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum OffAtom {
    Lit(u64),
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum STs {
    Var(String),
    /// `(V + d)`; created-fact timestamps relative to global time.
    Plus(String, OffAtom),
    Nat(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SFact {
    pred: String,
    args: Vec<PTerm>,
    ts: STs,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct STimeExpr {
    var: String,
    sign: i64,
    off: OffAtom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum SRel {
    Gt,
    Ge,
    Eq,
    Lt,
    Le,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SConstraint {
    l: STimeExpr,
    rel: SRel,
    r: STimeExpr,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct SRule {
    name: String,
    params: Vec<(String, u64, u64)>,
    lhs: Vec<SFact>,
    guard: Vec<SConstraint>,
    fresh: Vec<String>,
    rhs: Vec<SFact>,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct SCritical {
    pats: Vec<SFact>,
    guard: Vec<SConstraint>,
}

fn is_upper_ident(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn loc(&self) -> (usize, usize) {
        let (_, l, c) = &self.toks[self.pos];
        (*l, *c)
    }

    fn err(&self, msg: impl Into<String>) -> Diagnostic {
        let (line, col) = self.loc();
        Diagnostic {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            Err(self.err(format!("expected {t}, found {}", self.peek())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.err(format!("expected identifier, found {other}"))),
        }
    }

    fn nat(&mut self) -> PResult<u64> {
        match *self.peek() {
            Tok::Nat(n) => {
                self.next();
                Ok(n)
            }
            _ => Err(self.err(format!("expected numeral, found {}", self.peek()))),
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        match self.peek().clone() {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            other => Err(self.err(format!("expected `{kw}`, found {other}"))),
        }
    }

    fn term(&mut self) -> PResult<PTerm> {
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.next();
                Ok(PTerm::Num(n))
            }
            Tok::Ident(name) => {
                self.next();
                match self.peek() {
                    Tok::Plus => {
                        self.next();
                        let c = self.nat()?;
                        Ok(PTerm::Plus(name, c))
                    }
                    Tok::Minus => {
                        self.next();
                        let c = self.nat()?;
                        Ok(PTerm::Minus(name, c))
                    }
                    _ => {
                        if is_upper_ident(&name) {
                            Ok(PTerm::Var(name))
                        } else {
                            Ok(PTerm::Sym(name))
                        }
                    }
                }
            }
            other => Err(self.err(format!("expected term, found {other}"))),
        }
    }

    fn fact(&mut self, ctx: FactCtx) -> PResult<SFact> {
        let (line, col) = self.loc();
        let pred = self.ident()?;
        if !is_upper_ident(&pred) {
            return Err(Diagnostic {
                line,
                col,
                msg: format!("predicate name `{pred}` must start with an uppercase letter"),
            });
        }
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.next();
            loop {
                args.push(self.term()?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        self.expect(Tok::At)?;
        let ts = match ctx {
            FactCtx::Init => STs::Nat(self.nat()?),
            FactCtx::Lhs | FactCtx::Critical => {
                let v = self.ident()?;
                if !is_upper_ident(&v) {
                    return Err(self.err(format!("time variable `{v}` must be uppercase")));
                }
                STs::Var(v)
            }
            FactCtx::Rhs => {
                if *self.peek() == Tok::LParen {
                    self.next();
                    let v = self.ident()?;
                    self.expect(Tok::Plus)?;
                    let off = match self.peek().clone() {
                        Tok::Nat(n) => {
                            self.next();
                            OffAtom::Lit(n)
                        }
                        Tok::Ident(p) if !is_upper_ident(&p) => {
                            self.next();
                            OffAtom::Param(p)
                        }
                        other => return Err(self.err(format!("expected delay, found {other}"))),
                    };
                    self.expect(Tok::RParen)?;
                    STs::Plus(v, off)
                } else {
                    let v = self.ident()?;
                    if !is_upper_ident(&v) {
                        return Err(self.err(format!("time variable `{v}` must be uppercase")));
                    }
                    STs::Var(v)
                }
            }
        };
        Ok(SFact {
            pred,
            args,
            ts,
            line,
            col,
        })
    }

    fn fact_list(&mut self, ctx: FactCtx) -> PResult<Vec<SFact>> {
        let mut out = vec![self.fact(ctx)?];
        while *self.peek() == Tok::Comma {
            self.next();
            out.push(self.fact(ctx)?);
        }
        Ok(out)
    }

    fn time_expr(&mut self) -> PResult<STimeExpr> {
        let var = self.ident()?;
        if !is_upper_ident(&var) {
            return Err(self.err(format!("time variable `{var}` must be uppercase")));
        }
        let (sign, off) = match self.peek() {
            Tok::Plus => {
                self.next();
                (1, self.off_atom()?)
            }
            Tok::Minus => {
                self.next();
                (-1, self.off_atom()?)
            }
            _ => (0, OffAtom::Lit(0)),
        };
        Ok(STimeExpr { var, sign, off })
    }

    fn off_atom(&mut self) -> PResult<OffAtom> {
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.next();
                Ok(OffAtom::Lit(n))
            }
            Tok::Ident(p) if !is_upper_ident(&p) => {
                self.next();
                Ok(OffAtom::Param(p))
            }
            other => Err(self.err(format!("expected offset, found {other}"))),
        }
    }

    fn constraint(&mut self) -> PResult<SConstraint> {
        let (line, col) = self.loc();
        let l = self.time_expr()?;
        let rel = match self.next() {
            Tok::Gt => SRel::Gt,
            Tok::Ge => SRel::Ge,
            Tok::Eq => SRel::Eq,
            Tok::Lt => SRel::Lt,
            Tok::Le => SRel::Le,
            other => {
                return Err(Diagnostic {
                    line,
                    col,
                    msg: format!("expected relation, found {other}"),
                })
            }
        };
        let r = self.time_expr()?;
        Ok(SConstraint {
            l,
            rel,
            r,
            line,
            col,
        })
    }

    /// `| { c1, c2 }`; the braces may be empty, the whole clause may be absent.
    fn guard_clause(&mut self) -> PResult<Vec<SConstraint>> {
        if *self.peek() != Tok::Pipe {
            return Ok(vec![]);
        }
        self.next();
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        if *self.peek() != Tok::RBrace {
            out.push(self.constraint()?);
            while *self.peek() == Tok::Comma {
                self.next();
                out.push(self.constraint()?);
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FactCtx {
    Init,
    Lhs,
    Rhs,
    Critical,
}

// ---------------------------------------------------------------------------
// Top level: parse, expand, check
// ---------------------------------------------------------------------------

/// Parse a `.tmsr` specification, expanding rule parameters and running the
/// static sort and well-formedness checks.
pub fn parse_spec(src: &str) -> Result<SpecModel, Vec<Diagnostic>> {
    let lexed = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser {
        toks: lexed.toks,
        pos: 0,
    };

    let mut sorts: BTreeMap<String, Sort> = BTreeMap::new();
    let mut preds: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut init_facts: Option<Vec<SFact>> = None;
    let mut srules: Vec<SRule> = Vec::new();
    let mut scrits: Vec<SCritical> = Vec::new();
    let mut pragma_progressing = false;

    let step = |p: &mut Parser| -> PResult<bool> {
        match p.peek().clone() {
            Tok::Eof => return Ok(false),
            Tok::Ident(kw) => match kw.as_str() {
                "sort" | "pred" | "init" | "rule" | "critical" | "pragma" => {}
                other => return Err(p.err(format!("expected declaration, found `{other}`"))),
            },
            other => return Err(p.err(format!("expected declaration, found {other}"))),
        }
        Ok(true)
    };

    loop {
        match step(&mut p) {
            Ok(false) => break,
            Ok(true) => {}
            Err(d) => return Err(vec![d]),
        }
        let res: PResult<()> = (|| {
            let kw = p.ident()?;
            match kw.as_str() {
                "sort" => {
                    let (line, col) = p.loc();
                    let name = p.ident()?;
                    if name == NONCE_SORT {
                        return Err(Diagnostic {
                            line,
                            col,
                            msg: format!("sort name `{NONCE_SORT}` is reserved"),
                        });
                    }
                    p.expect(Tok::Eq)?;
                    let sort = if *p.peek() == Tok::LBrace {
                        p.next();
                        let mut consts = vec![p.ident()?];
                        while *p.peek() == Tok::Comma {
                            p.next();
                            consts.push(p.ident()?);
                        }
                        p.expect(Tok::RBrace)?;
                        for c in &consts {
                            if is_upper_ident(c) {
                                return Err(Diagnostic {
                                    line,
                                    col,
                                    msg: format!("constant `{c}` must be lowercase"),
                                });
                            }
                        }
                        Sort::Enum(consts)
                    } else {
                        let lo = p.nat()?;
                        p.expect(Tok::DotDot)?;
                        let hi = p.nat()?;
                        if lo != 0 {
                            return Err(Diagnostic {
                                line,
                                col,
                                msg: "numeric sorts must start at 0".into(),
                            });
                        }
                        Sort::Range(hi)
                    };
                    p.expect(Tok::Semi)?;
                    if sorts.insert(name.clone(), sort).is_some() {
                        return Err(Diagnostic {
                            line,
                            col,
                            msg: format!("duplicate sort `{name}`"),
                        });
                    }
                    Ok(())
                }
                "pred" => {
                    let (line, col) = p.loc();
                    let name = p.ident()?;
                    if !is_upper_ident(&name) {
                        return Err(Diagnostic {
                            line,
                            col,
                            msg: format!("predicate `{name}` must start uppercase"),
                        });
                    }
                    if name == TIME_PRED {
                        return Err(Diagnostic {
                            line,
                            col,
                            msg: format!("predicate name `{TIME_PRED}` is reserved"),
                        });
                    }
                    let mut args = Vec::new();
                    if *p.peek() == Tok::LParen {
                        p.next();
                        args.push(p.ident()?);
                        while *p.peek() == Tok::Comma {
                            p.next();
                            args.push(p.ident()?);
                        }
                        p.expect(Tok::RParen)?;
                    }
                    p.expect(Tok::Semi)?;
                    if preds.insert(name.clone(), args).is_some() {
                        return Err(Diagnostic {
                            line,
                            col,
                            msg: format!("duplicate predicate `{name}`"),
                        });
                    }
                    Ok(())
                }
                "init" => {
                    let (line, col) = p.loc();
                    if init_facts.is_some() {
                        return Err(Diagnostic {
                            line,
                            col,
                            msg: "duplicate init block".into(),
                        });
                    }
                    p.expect(Tok::LBrace)?;
                    let facts = p.fact_list(FactCtx::Init)?;
                    p.expect(Tok::RBrace)?;
                    if *p.peek() == Tok::Semi {
                        p.next();
                    }
                    init_facts = Some(facts);
                    Ok(())
                }
                "rule" => {
                    let (line, col) = p.loc();
                    let name = p.ident()?;
                    if name == TICK_RULE {
                        return Err(Diagnostic {
                            line,
                            col,
                            msg: format!("rule name `{TICK_RULE}` is reserved"),
                        });
                    }
                    let mut params = Vec::new();
                    if *p.peek() == Tok::LBracket {
                        p.next();
                        loop {
                            let pname = p.ident()?;
                            if is_upper_ident(&pname) {
                                return Err(p.err(format!("parameter `{pname}` must be lowercase")));
                            }
                            p.keyword("in")?;
                            let lo = p.nat()?;
                            p.expect(Tok::DotDot)?;
                            let hi = p.nat()?;
                            if hi < lo {
                                return Err(p.err(format!("empty parameter range {lo}..{hi}")));
                            }
                            params.push((pname, lo, hi));
                            if *p.peek() == Tok::Comma {
                                p.next();
                            } else {
                                break;
                            }
                        }
                        p.expect(Tok::RBracket)?;
                    }
                    p.expect(Tok::Colon)?;
                    let lhs = p.fact_list(FactCtx::Lhs)?;
                    let guard = p.guard_clause()?;
                    p.expect(Tok::Arrow)?;
                    let mut fresh = Vec::new();
                    if let Tok::Ident(kw) = p.peek().clone() {
                        if kw == "exists" {
                            p.next();
                            fresh.push(p.ident()?);
                            while *p.peek() == Tok::Comma {
                                p.next();
                                fresh.push(p.ident()?);
                            }
                            p.expect(Tok::Dot)?;
                        }
                    }
                    let rhs = p.fact_list(FactCtx::Rhs)?;
                    p.expect(Tok::Semi)?;
                    srules.push(SRule {
                        name,
                        params,
                        lhs,
                        guard,
                        fresh,
                        rhs,
                        line,
                        col,
                    });
                    Ok(())
                }
                "critical" => {
                    p.expect(Tok::LBrace)?;
                    let pats = p.fact_list(FactCtx::Critical)?;
                    let guard = p.guard_clause()?;
                    p.expect(Tok::RBrace)?;
                    if *p.peek() == Tok::Semi {
                        p.next();
                    }
                    scrits.push(SCritical { pats, guard });
                    Ok(())
                }
                "pragma" => {
                    p.keyword("progressing")?;
                    p.expect(Tok::Semi)?;
                    pragma_progressing = true;
                    Ok(())
                }
                _ => unreachable!(),
            }
        })();
        if let Err(d) = res {
            return Err(vec![d]);
        }
    }

    let env = CheckEnv::build(&sorts, &preds)?;
    let mut diags = Vec::new();

    // Initial configuration.
    let initial = match init_facts {
        None => {
            diags.push(Diagnostic {
                line: 1,
                col: 1,
                msg: "missing init block".into(),
            });
            None
        }
        Some(facts) => env.check_init(&facts, &mut diags),
    };

    // Expand and check rules.
    let src_rule_count = srules.len();
    let mut rules = Vec::new();
    let mut seen_names = BTreeSet::new();
    for sr in &srules {
        for inst in expand_rule(sr, &mut diags) {
            if let Some(rule) = env.check_rule(&inst, pragma_progressing, &mut diags) {
                if !seen_names.insert(rule.name.clone()) {
                    diags.push(Diagnostic {
                        line: sr.line,
                        col: sr.col,
                        msg: format!("duplicate rule name `{}`", rule.name),
                    });
                }
                rules.push(rule);
            }
        }
    }

    let mut pairs = Vec::new();
    for sc in &scrits {
        if let Some(pair) = env.check_critical(sc, &mut diags) {
            pairs.push(pair);
        }
    }

    if !diags.is_empty() {
        return Err(diags);
    }
    Ok(SpecModel {
        sorts,
        preds,
        rules,
        critical: CriticalSpec { pairs },
        initial: initial.expect("initial checked"),
        progressing_pragma: pragma_progressing,
        src_rule_count,
    })
}

/// One ground instance of a surface rule (all parameters substituted).
#[derive(Debug, Clone)]
struct RuleInstance {
    name: String,
    lhs: Vec<SFact>,
    guard: Vec<SConstraint>,
    fresh: Vec<String>,
    rhs: Vec<SFact>,
    line: usize,
    col: usize,
}

fn expand_rule(sr: &SRule, diags: &mut Vec<Diagnostic>) -> Vec<RuleInstance> {
    let mut insts = Vec::new();
    let mut vals: Vec<u64> = sr.params.iter().map(|(_, lo, _)| *lo).collect();
    loop {
        let env: BTreeMap<&str, u64> = sr
            .params
            .iter()
            .zip(&vals)
            .map(|((n, _, _), v)| (n.as_str(), *v))
            .collect();
        let name = if sr.params.is_empty() {
            sr.name.clone()
        } else {
            let suffix: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            format!("{}_{}", sr.name, suffix.join("_"))
        };
        let mut ok = true;
        let subst_fact = |f: &SFact, diags: &mut Vec<Diagnostic>, ok: &mut bool| -> SFact {
            let args = f
                .args
                .iter()
                .map(|a| subst_pterm(a, &env, f.line, f.col, diags, ok))
                .collect();
            let ts = match &f.ts {
                STs::Plus(v, OffAtom::Param(pn)) => match env.get(pn.as_str()) {
                    Some(val) => STs::Plus(v.clone(), OffAtom::Lit(*val)),
                    None => {
                        diags.push(Diagnostic {
                            line: f.line,
                            col: f.col,
                            msg: format!("unknown parameter `{pn}` in delay"),
                        });
                        *ok = false;
                        f.ts.clone()
                    }
                },
                other => other.clone(),
            };
            SFact {
                pred: f.pred.clone(),
                args,
                ts,
                line: f.line,
                col: f.col,
            }
        };
        let lhs: Vec<SFact> = sr
            .lhs
            .iter()
            .map(|f| subst_fact(f, diags, &mut ok))
            .collect();
        let rhs: Vec<SFact> = sr
            .rhs
            .iter()
            .map(|f| subst_fact(f, diags, &mut ok))
            .collect();
        let guard: Vec<SConstraint> = sr
            .guard
            .iter()
            .map(|c| {
                let mut fix = |e: &STimeExpr| -> STimeExpr {
                    match &e.off {
                        OffAtom::Param(pn) => match env.get(pn.as_str()) {
                            Some(val) => STimeExpr {
                                var: e.var.clone(),
                                sign: e.sign,
                                off: OffAtom::Lit(*val),
                            },
                            None => {
                                diags.push(Diagnostic {
                                    line: c.line,
                                    col: c.col,
                                    msg: format!("unknown parameter `{pn}` in constraint"),
                                });
                                ok = false;
                                e.clone()
                            }
                        },
                        OffAtom::Lit(_) => e.clone(),
                    }
                };
                SConstraint {
                    l: fix(&c.l),
                    rel: c.rel.clone(),
                    r: fix(&c.r),
                    line: c.line,
                    col: c.col,
                }
            })
            .collect();
        if ok {
            insts.push(RuleInstance {
                name,
                lhs,
                guard,
                fresh: sr.fresh.clone(),
                rhs,
                line: sr.line,
                col: sr.col,
            });
        }
        // advance the odometer
        let mut i = vals.len();
        loop {
            if i == 0 {
                return insts;
            }
            i -= 1;
            if vals[i] < sr.params[i].2 {
                vals[i] += 1;
                for (j, v) in vals.iter_mut().enumerate().skip(i + 1) {
                    *v = sr.params[j].1;
                }
                break;
            }
        }
    }
}

fn subst_pterm(
    t: &PTerm,
    env: &BTreeMap<&str, u64>,
    line: usize,
    col: usize,
    diags: &mut Vec<Diagnostic>,
    ok: &mut bool,
) -> PTerm {
    match t {
        PTerm::Sym(s) => match env.get(s.as_str()) {
            Some(v) => PTerm::Num(*v),
            None => t.clone(),
        },
        PTerm::Plus(s, c) => {
            if is_upper_ident(s) {
                t.clone()
            } else {
                match env.get(s.as_str()) {
                    Some(v) => PTerm::Num(v + c),
                    None => {
                        diags.push(Diagnostic {
                            line,
                            col,
                            msg: format!("`{s}` is not a rule parameter"),
                        });
                        *ok = false;
                        t.clone()
                    }
                }
            }
        }
        PTerm::Minus(s, c) => match env.get(s.as_str()) {
            Some(v) => {
                if let Some(r) = v.checked_sub(*c) {
                    PTerm::Num(r)
                } else {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("parameter expression `{s}-{c}` is negative for {s}={v}"),
                    });
                    *ok = false;
                    t.clone()
                }
            }
            None => {
                diags.push(Diagnostic {
                    line,
                    col,
                    msg: format!("`{s}` is not a rule parameter"),
                });
                *ok = false;
                t.clone()
            }
        },
        other => other.clone(),
    }
}

// ---------------------------------------------------------------------------
// Sort checking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum VarSort {
    Enum(String),
    Num { max: u64 },
    NonceS,
}

struct CheckEnv<'a> {
    sorts: &'a BTreeMap<String, Sort>,
    preds: &'a BTreeMap<String, Vec<String>>,
    consts: BTreeMap<String, String>, // constant -> enum sort name
}

impl<'a> CheckEnv<'a> {
    fn build(
        sorts: &'a BTreeMap<String, Sort>,
        preds: &'a BTreeMap<String, Vec<String>>,
    ) -> Result<Self, Vec<Diagnostic>> {
        let mut consts = BTreeMap::new();
        let mut diags = Vec::new();
        for (sname, sort) in sorts {
            if let Sort::Enum(cs) = sort {
                for c in cs {
                    if consts.insert(c.clone(), sname.clone()).is_some() {
                        diags.push(Diagnostic {
                            line: 1,
                            col: 1,
                            msg: format!("constant `{c}` declared in more than one sort"),
                        });
                    }
                }
            }
        }
        for (pname, args) in preds {
            for a in args {
                if a != NONCE_SORT && !sorts.contains_key(a) {
                    diags.push(Diagnostic {
                        line: 1,
                        col: 1,
                        msg: format!("predicate `{pname}` references unknown sort `{a}`"),
                    });
                }
            }
        }
        if diags.is_empty() {
            Ok(CheckEnv {
                sorts,
                preds,
                consts,
            })
        } else {
            Err(diags)
        }
    }

    fn pred_sorts(&self, f: &SFact, diags: &mut Vec<Diagnostic>) -> Option<Vec<String>> {
        if f.pred == TIME_PRED {
            if !f.args.is_empty() {
                diags.push(Diagnostic {
                    line: f.line,
                    col: f.col,
                    msg: format!("`{TIME_PRED}` takes no arguments"),
                });
                return None;
            }
            return Some(vec![]);
        }
        match self.preds.get(&f.pred) {
            None => {
                diags.push(Diagnostic {
                    line: f.line,
                    col: f.col,
                    msg: format!("unknown predicate `{}`", f.pred),
                });
                None
            }
            Some(sorts) => {
                if sorts.len() != f.args.len() {
                    diags.push(Diagnostic {
                        line: f.line,
                        col: f.col,
                        msg: format!(
                            "`{}` expects {} argument(s), found {}",
                            f.pred,
                            sorts.len(),
                            f.args.len()
                        ),
                    });
                    None
                } else {
                    Some(sorts.clone())
                }
            }
        }
    }

    fn check_init(&self, facts: &[SFact], diags: &mut Vec<Diagnostic>) -> Option<Configuration> {
        let mut out = Vec::new();
        for f in facts {
            let Some(sorts) = self.pred_sorts(f, diags) else {
                continue;
            };
            let mut args = Vec::new();
            let mut good = true;
            for (a, sname) in f.args.iter().zip(&sorts) {
                match self.ground_term(a, sname, f.line, f.col, diags) {
                    Some(t) => args.push(t),
                    None => good = false,
                }
            }
            let STs::Nat(ts) = f.ts else {
                unreachable!("init facts parse with literal stamps")
            };
            if good {
                out.push(TsFact::new(Fact::new(f.pred.clone(), args), ts));
            }
        }
        match Configuration::new(out) {
            Ok(c) => Some(c),
            Err(e) => {
                diags.push(Diagnostic {
                    line: 1,
                    col: 1,
                    msg: format!("init: {e}"),
                });
                None
            }
        }
    }

    fn ground_term(
        &self,
        t: &PTerm,
        sort_name: &str,
        line: usize,
        col: usize,
        diags: &mut Vec<Diagnostic>,
    ) -> Option<Term> {
        match t {
            PTerm::Num(n) => match self.sorts.get(sort_name) {
                Some(Sort::Range(max)) if n <= max => Some(Term::Num(*n)),
                Some(Sort::Range(max)) => {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("numeral {n} exceeds sort `{sort_name}` bound {max}"),
                    });
                    None
                }
                _ => {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("numeral in non-numeric position of sort `{sort_name}`"),
                    });
                    None
                }
            },
            PTerm::Sym(c) => match self.consts.get(c) {
                Some(s) if s == sort_name => Some(Term::Const(c.clone())),
                Some(s) => {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("constant `{c}` has sort `{s}`, expected `{sort_name}`"),
                    });
                    None
                }
                None => {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("unknown constant `{c}`"),
                    });
                    None
                }
            },
            PTerm::Var(v) | PTerm::Plus(v, _) if is_upper_ident(v) => {
                diags.push(Diagnostic {
                    line,
                    col,
                    msg: format!("variable `{v}` not allowed in ground context"),
                });
                None
            }
            other => {
                diags.push(Diagnostic {
                    line,
                    col,
                    msg: format!("term {other:?} not allowed in ground context"),
                });
                None
            }
        }
    }

    /// Check one pattern argument against its declared sort, updating the
    /// variable table. Returns the core term.
    #[allow(clippy::too_many_arguments)]
    fn pattern_term(
        &self,
        t: &PTerm,
        sort_name: &str,
        vars: &mut BTreeMap<String, VarSort>,
        binding: bool,
        fresh: &BTreeSet<String>,
        line: usize,
        col: usize,
        diags: &mut Vec<Diagnostic>,
    ) -> Option<Term> {
        let sort = if sort_name == NONCE_SORT {
            None
        } else {
            Some(
                self.sorts
                    .get(sort_name)
                    .expect("sort checked at env build"),
            )
        };
        match t {
            PTerm::Num(n) => match sort {
                Some(Sort::Range(max)) if n <= max => Some(Term::Num(*n)),
                Some(Sort::Range(max)) => {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("numeral {n} exceeds sort `{sort_name}` bound {max}"),
                    });
                    None
                }
                _ => {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("numeral in non-numeric position of sort `{sort_name}`"),
                    });
                    None
                }
            },
            PTerm::Sym(c) => match (self.consts.get(c), sort) {
                (Some(s), _) if s == sort_name => Some(Term::Const(c.clone())),
                (Some(s), _) => {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("constant `{c}` has sort `{s}`, expected `{sort_name}`"),
                    });
                    None
                }
                (None, _) => {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("unknown constant or parameter `{c}`"),
                    });
                    None
                }
            },
            PTerm::Var(v) => {
                let want = match (sort_name, sort) {
                    (NONCE_SORT, _) => VarSort::NonceS,
                    (_, Some(Sort::Enum(_))) => VarSort::Enum(sort_name.to_string()),
                    (_, Some(Sort::Range(max))) => VarSort::Num { max: *max },
                    _ => unreachable!(),
                };
                if binding {
                    self.bind_var(v, want, vars, line, col, diags)?;
                } else {
                    // use-site: the variable must exist (or be fresh) and fit
                    if fresh.contains(v) {
                        if sort_name != NONCE_SORT {
                            diags.push(Diagnostic {
                                line,
                                col,
                                msg: format!(
                                    "fresh variable `{v}` used at non-{NONCE_SORT} position"
                                ),
                            });
                            return None;
                        }
                    } else {
                        match vars.get(v) {
                            None => {
                                diags.push(Diagnostic {
                                    line,
                                    col,
                                    msg: format!("variable `{v}` not bound on the left-hand side"),
                                });
                                return None;
                            }
                            Some(vs) => {
                                if !self.fits(vs, &want, 0) {
                                    diags.push(Diagnostic {
                                        line,
                                        col,
                                        msg: format!(
                                            "variable `{v}` does not fit sort `{sort_name}`"
                                        ),
                                    });
                                    return None;
                                }
                            }
                        }
                    }
                }
                Some(Term::Var(v.clone()))
            }
            PTerm::Plus(v, c) => match sort {
                Some(Sort::Range(max)) => {
                    if c > max {
                        diags.push(Diagnostic {
                            line,
                            col,
                            msg: format!("shift {c} exceeds sort `{sort_name}` bound {max}"),
                        });
                        return None;
                    }
                    if binding {
                        self.bind_var(v, VarSort::Num { max: max - c }, vars, line, col, diags)?;
                    } else {
                        match vars.get(v) {
                            Some(vs) => {
                                if !self.fits(vs, &VarSort::Num { max: *max }, *c) {
                                    diags.push(Diagnostic {
                                        line,
                                        col,
                                        msg: format!(
                                            "`{v}+{c}` may exceed sort `{sort_name}` bound {max}"
                                        ),
                                    });
                                    return None;
                                }
                            }
                            None => {
                                diags.push(Diagnostic {
                                    line,
                                    col,
                                    msg: format!("variable `{v}` not bound on the left-hand side"),
                                });
                                return None;
                            }
                        }
                    }
                    Some(Term::NumVar(v.clone(), *c))
                }
                _ => {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("arithmetic pattern in non-numeric sort `{sort_name}`"),
                    });
                    None
                }
            },
            PTerm::Minus(v, c) => {
                diags.push(Diagnostic {
                    line,
                    col,
                    msg: format!("`{v}-{c}`: subtraction is only allowed on rule parameters"),
                });
                None
            }
        }
    }

    fn bind_var(
        &self,
        v: &str,
        want: VarSort,
        vars: &mut BTreeMap<String, VarSort>,
        line: usize,
        col: usize,
        diags: &mut Vec<Diagnostic>,
    ) -> Option<()> {
        match vars.get_mut(v) {
            None => {
                vars.insert(v.to_string(), want);
                Some(())
            }
            Some(existing) => match (existing, want) {
                (VarSort::Enum(a), VarSort::Enum(b)) if *a == b => Some(()),
                (VarSort::NonceS, VarSort::NonceS) => Some(()),
                (VarSort::Num { max }, VarSort::Num { max: newmax }) => {
                    *max = (*max).min(newmax);
                    Some(())
                }
                _ => {
                    diags.push(Diagnostic {
                        line,
                        col,
                        msg: format!("variable `{v}` used at incompatible sorts"),
                    });
                    None
                }
            },
        }
    }

    fn fits(&self, have: &VarSort, want: &VarSort, shift: u64) -> bool {
        match (have, want) {
            (VarSort::Enum(a), VarSort::Enum(b)) => a == b && shift == 0,
            (VarSort::NonceS, VarSort::NonceS) => shift == 0,
            (VarSort::Num { max: hm }, VarSort::Num { max: wm }) => hm + shift <= *wm,
            _ => false,
        }
    }

    fn check_rule(
        &self,
        inst: &RuleInstance,
        pragma_progressing: bool,
        diags: &mut Vec<Diagnostic>,
    ) -> Option<Rule> {
        let before = diags.len();
        let fresh: BTreeSet<String> = inst.fresh.iter().cloned().collect();

        // locate the Time fact on each side
        let mut time_var: Option<String> = None;
        let mut lhs_rest: Vec<(FactPattern, String)> = Vec::new();
        for f in &inst.lhs {
            if f.pred == TIME_PRED {
                if !f.args.is_empty() {
                    diags.push(Diagnostic {
                        line: f.line,
                        col: f.col,
                        msg: format!("`{TIME_PRED}` takes no arguments"),
                    });
                    return None;
                }
                if time_var.is_some() {
                    diags.push(Diagnostic {
                        line: f.line,
                        col: f.col,
                        msg: "more than one Time fact on the left-hand side".into(),
                    });
                    return None;
                }
                match &f.ts {
                    STs::Var(v) => time_var = Some(v.clone()),
                    _ => {
                        diags.push(Diagnostic {
                            line: f.line,
                            col: f.col,
                            msg: "Time must carry a plain time variable".into(),
                        });
                        return None;
                    }
                }
            }
        }
        let Some(time_var) = time_var else {
            diags.push(Diagnostic {
                line: inst.line,
                col: inst.col,
                msg: format!(
                    "rule `{}` has no {TIME_PRED}@T on the left-hand side",
                    inst.name
                ),
            });
            return None;
        };

        let mut vars: BTreeMap<String, VarSort> = BTreeMap::new();
        let mut tvars: BTreeSet<String> = BTreeSet::new();
        tvars.insert(time_var.clone());

        for f in &inst.lhs {
            if f.pred == TIME_PRED {
                continue;
            }
            let Some(sorts) = self.pred_sorts(f, diags) else {
                continue;
            };
            let mut args = Vec::new();
            for (a, s) in f.args.iter().zip(&sorts) {
                // fresh variables must not occur on the LHS
                if let PTerm::Var(v) | PTerm::Plus(v, _) = a {
                    if fresh.contains(v) {
                        diags.push(Diagnostic {
                            line: f.line,
                            col: f.col,
                            msg: format!("fresh variable `{v}` occurs on the left-hand side"),
                        });
                    }
                }
                if let Some(t) =
                    self.pattern_term(a, s, &mut vars, true, &fresh, f.line, f.col, diags)
                {
                    args.push(t);
                }
            }
            let STs::Var(tv) = &f.ts else { unreachable!() };
            tvars.insert(tv.clone());
            if args.len() == f.args.len() {
                lhs_rest.push((FactPattern::new(f.pred.clone(), args), tv.clone()));
            }
        }

        // guard variables must appear in the precondition
        let mut guard: Vec<Constraint> = Vec::new();
        for c in &inst.guard {
            for side in [&c.l, &c.r] {
                if !tvars.contains(&side.var) {
                    diags.push(Diagnostic {
                        line: c.line,
                        col: c.col,
                        msg: format!("guard variable `{}` not in pre-condition", side.var),
                    });
                }
            }
            if let Some(n) = normalize_constraint(c, diags) {
                guard.push(n);
            }
        }

        // RHS: find Time, split preserved / created
        let mut rhs_time = false;
        let mut preserved: Vec<TimedPattern> = Vec::new();
        let mut created: Vec<(FactPattern, u64)> = Vec::new();
        let mut lhs_pool: Vec<Option<TimedPattern>> = lhs_rest.iter().cloned().map(Some).collect();
        for f in &inst.rhs {
            if f.pred == TIME_PRED {
                if !f.args.is_empty() {
                    diags.push(Diagnostic {
                        line: f.line,
                        col: f.col,
                        msg: format!("`{TIME_PRED}` takes no arguments"),
                    });
                    return None;
                }
                if rhs_time {
                    diags.push(Diagnostic {
                        line: f.line,
                        col: f.col,
                        msg: "more than one Time fact on the right-hand side".into(),
                    });
                    return None;
                }
                match &f.ts {
                    STs::Var(v) if *v == time_var => rhs_time = true,
                    _ => {
                        diags.push(Diagnostic {
                            line: f.line,
                            col: f.col,
                            msg: "Time must be preserved unchanged; time advances only by Tick"
                                .into(),
                        });
                        return None;
                    }
                }
                continue;
            }
            let Some(sorts) = self.pred_sorts(f, diags) else {
                continue;
            };
            let mut args = Vec::new();
            for (a, s) in f.args.iter().zip(&sorts) {
                if let Some(t) =
                    self.pattern_term(a, s, &mut vars, false, &fresh, f.line, f.col, diags)
                {
                    args.push(t);
                }
            }
            if args.len() != f.args.len() {
                continue;
            }
            let pat = FactPattern::new(f.pred.clone(), args);
            match &f.ts {
                STs::Var(tv) => {
                    // a verbatim repeat of a left-hand-side fact is preserved;
                    // otherwise the stamp must be the global time (delay 0)
                    let slot = lhs_pool
                        .iter_mut()
                        .find(|p| p.as_deref_pattern() == Some((&pat, tv.as_str())));
                    match slot {
                        Some(s) => preserved.push(s.take().unwrap()),
                        None if *tv == time_var => created.push((pat, 0)),
                        None => {
                            diags.push(Diagnostic {
                                line: f.line,
                                col: f.col,
                                msg: format!(
                                    "`{}@{}` does not repeat a left-hand-side fact; created facts \
                                     must be stamped with the global time variable",
                                    pat, tv
                                ),
                            });
                        }
                    }
                }
                STs::Plus(tv, off) => {
                    if *tv != time_var {
                        diags.push(Diagnostic {
                            line: f.line,
                            col: f.col,
                            msg: format!(
                                "created timestamps are relative to the global time variable \
                                 `{time_var}`, found `{tv}`"
                            ),
                        });
                        continue;
                    }
                    let OffAtom::Lit(d) = off else {
                        unreachable!("expanded")
                    };
                    created.push((pat, *d));
                }
                STs::Nat(_) => unreachable!(),
            }
        }
        if !rhs_time {
            diags.push(Diagnostic {
                line: inst.line,
                col: inst.col,
                msg: format!(
                    "rule `{}` has no {TIME_PRED}@{time_var} on the right-hand side",
                    inst.name
                ),
            });
        }
        let consumed: Vec<TimedPattern> = lhs_pool.into_iter().flatten().collect();

        if pragma_progressing {
            for (_, tv) in &consumed {
                if *tv != time_var {
                    guard.push(Constraint::new(time_var.clone(), Rel::Ge, tv.clone(), 0));
                }
            }
        }
        guard.sort();
        guard.dedup();

        if diags.len() > before {
            return None;
        }
        Some(Rule {
            name: inst.name.clone(),
            kind: RuleKind::Instantaneous,
            time_var,
            preserved,
            consumed,
            created,
            guard,
            fresh: inst.fresh.clone(),
        })
    }

    fn check_critical(&self, sc: &SCritical, diags: &mut Vec<Diagnostic>) -> Option<CriticalPair> {
        let before = diags.len();
        let mut vars: BTreeMap<String, VarSort> = BTreeMap::new();
        let mut tvars: BTreeSet<String> = BTreeSet::new();
        let empty_fresh = BTreeSet::new();
        let mut patterns = Vec::new();
        for f in &sc.pats {
            let Some(sorts) = self.pred_sorts(f, diags) else {
                continue;
            };
            let mut args = Vec::new();
            for (a, s) in f.args.iter().zip(&sorts) {
                if let Some(t) =
                    self.pattern_term(a, s, &mut vars, true, &empty_fresh, f.line, f.col, diags)
                {
                    args.push(t);
                }
            }
            let STs::Var(tv) = &f.ts else { unreachable!() };
            tvars.insert(tv.clone());
            if args.len() == f.args.len() {
                patterns.push((FactPattern::new(f.pred.clone(), args), tv.clone()));
            }
        }
        let mut constraints = Vec::new();
        for c in &sc.guard {
            for side in [&c.l, &c.r] {
                if !tvars.contains(&side.var) {
                    diags.push(Diagnostic {
                        line: c.line,
                        col: c.col,
                        msg: format!(
                            "constraint variable `{}` is not a time variable of this block",
                            side.var
                        ),
                    });
                }
            }
            if let Some(n) = normalize_constraint(c, diags) {
                constraints.push(n);
            }
        }
        constraints.sort();
        constraints.dedup();
        if diags.len() > before {
            return None;
        }
        Some(CriticalPair {
            patterns,
            constraints,
        })
    }
}

/// Small helper: compare an `Option<TimedPattern>` against a pattern/tvar pair.
trait AsDerefPattern {
    fn as_deref_pattern(&self) -> Option<(&FactPattern, &str)>;
}

impl AsDerefPattern for Option<TimedPattern> {
    fn as_deref_pattern(&self) -> Option<(&FactPattern, &str)> {
        self.as_ref().map(|(p, t)| (p, t.as_str()))
    }
}

/// Normalize `l REL r` (both sides `var ± off`) into `lhs REL rhs + offset`
/// with REL in {>, >=, =}.
fn normalize_constraint(c: &SConstraint, diags: &mut Vec<Diagnostic>) -> Option<Constraint> {
    let atom = |e: &STimeExpr| -> i64 {
        let v = match &e.off {
            OffAtom::Lit(n) => *n as i64,
            OffAtom::Param(_) => unreachable!("expanded before normalization"),
        };
        e.sign * v
    };
    let (lv, lo) = (c.l.var.clone(), atom(&c.l));
    let (rv, ro) = (c.r.var.clone(), atom(&c.r));
    // l + lo REL r + ro  <=>  l REL r + (ro - lo)
    let (lhs, rel, rhs, offset) = match c.rel {
        SRel::Gt => (lv, Rel::Gt, rv, ro - lo),
        SRel::Ge => (lv, Rel::Ge, rv, ro - lo),
        SRel::Eq => (lv, Rel::Eq, rv, ro - lo),
        SRel::Lt => (rv, Rel::Gt, lv, lo - ro),
        SRel::Le => (rv, Rel::Ge, lv, lo - ro),
    };
    if lhs == rhs {
        // constant-decidable constraint; reject rather than silently keep
        let holds = match rel {
            Rel::Gt => 0 > offset,
            Rel::Ge => 0 >= offset,
            Rel::Eq => 0 == offset,
        };
        if holds {
            return None; // tautology, drop it
        }
        diags.push(Diagnostic {
            line: c.line,
            col: c.col,
            msg: "constraint is unsatisfiable for every instantiation".into(),
        });
        return None;
    }
    Some(Constraint {
        lhs,
        rel,
        rhs,
        offset,
    })
}

// ---------------------------------------------------------------------------
// Canonical printer
// ---------------------------------------------------------------------------

fn print_term(t: &Term) -> String {
    t.to_string()
}

fn print_pattern(p: &FactPattern, tv: &str) -> String {
    let args = if p.args.is_empty() {
        String::new()
    } else {
        format!(
            "({})",
            p.args.iter().map(print_term).collect::<Vec<_>>().join(",")
        )
    };
    format!("{}{}@{}", p.pred, args, tv)
}

fn print_created(p: &FactPattern, delay: u64, time_var: &str) -> String {
    let args = if p.args.is_empty() {
        String::new()
    } else {
        format!(
            "({})",
            p.args.iter().map(print_term).collect::<Vec<_>>().join(",")
        )
    };
    if delay == 0 {
        format!("{}{}@{}", p.pred, args, time_var)
    } else {
        format!("{}{}@({}+{})", p.pred, args, time_var, delay)
    }
}

fn print_constraints(cs: &[Constraint]) -> String {
    cs.iter()
        .map(|c| {
            use std::cmp::Ordering;
            let off = match c.offset.cmp(&0) {
                Ordering::Equal => String::new(),
                Ordering::Greater => format!(" + {}", c.offset),
                Ordering::Less => format!(" - {}", -c.offset),
            };
            format!("{} {} {}{}", c.lhs, c.rel, c.rhs, off)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Render a SpecModel in canonical `.tmsr` form. `parse_spec` of the result
/// reproduces the model.
pub fn print_spec(spec: &SpecModel) -> String {
    let mut out = String::new();
    for (name, sort) in &spec.sorts {
        match sort {
            Sort::Enum(cs) => {
                out.push_str(&format!("sort {} = {{ {} }};\n", name, cs.join(", ")));
            }
            Sort::Range(max) => out.push_str(&format!("sort {} = 0..{};\n", name, max)),
        }
    }
    for (name, args) in &spec.preds {
        if args.is_empty() {
            out.push_str(&format!("pred {};\n", name));
        } else {
            out.push_str(&format!("pred {}({});\n", name, args.join(", ")));
        }
    }
    let init = spec
        .initial
        .facts()
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&format!("init {{ {} }}\n", init));
    for r in &spec.rules {
        let mut lhs: Vec<String> = vec![format!("{}@{}", TIME_PRED, r.time_var)];
        for (p, tv) in r.preserved.iter().chain(&r.consumed) {
            lhs.push(print_pattern(p, tv));
        }
        let mut rhs: Vec<String> = vec![format!("{}@{}", TIME_PRED, r.time_var)];
        for (p, tv) in &r.preserved {
            rhs.push(print_pattern(p, tv));
        }
        for (p, d) in &r.created {
            rhs.push(print_created(p, *d, &r.time_var));
        }
        let exists = if r.fresh.is_empty() {
            String::new()
        } else {
            format!("exists {}. ", r.fresh.join(", "))
        };
        out.push_str(&format!(
            "rule {}: {} | {{ {} }} -> {}{};\n",
            r.name,
            lhs.join(", "),
            print_constraints(&r.guard),
            exists,
            rhs.join(", ")
        ));
    }
    for pair in &spec.critical.pairs {
        let pats: Vec<String> = pair
            .patterns
            .iter()
            .map(|(p, tv)| print_pattern(p, tv))
            .collect();
        out.push_str(&format!(
            "critical {{ {} | {{ {} }} }}\n",
            pats.join(", "),
            print_constraints(&pair.constraints)
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Static analysis
// ---------------------------------------------------------------------------

/// Max size a pattern fact can take under maximal instantiation of its
/// numeric variables.
fn pattern_max_size(p: &FactPattern, vars: &BTreeMap<String, VarSort>) -> u64 {
    let term_size = |t: &Term| -> u64 {
        match t {
            Term::Const(_) | Term::Nonce(_) => 1,
            Term::Num(v) => v + 1,
            Term::Var(v) => match vars.get(v) {
                Some(VarSort::Num { max }) => max + 1,
                _ => 1,
            },
            Term::NumVar(v, c) => match vars.get(v) {
                Some(VarSort::Num { max }) => max + c + 1,
                _ => c + 1,
            },
            Term::App(_, _) => t.size(),
        }
    };
    1 + p.args.iter().map(term_size).sum::<u64>()
}

/// Re-infer the variable sorts of a pattern list from predicate declarations.
fn infer_vars(spec: &SpecModel, pats: &[TimedPattern]) -> BTreeMap<String, VarSort> {
    let mut vars = BTreeMap::new();
    for (p, _) in pats {
        let Some(sorts) = spec.preds.get(&p.pred) else {
            continue;
        };
        for (a, sname) in p.args.iter().zip(sorts) {
            let vs = if sname == NONCE_SORT {
                VarSort::NonceS
            } else {
                match spec.sorts.get(sname) {
                    Some(Sort::Enum(_)) => VarSort::Enum(sname.clone()),
                    Some(Sort::Range(max)) => VarSort::Num { max: *max },
                    None => continue,
                }
            };
            match a {
                Term::Var(v) => {
                    match (vars.get_mut(v), vs) {
                        (Some(VarSort::Num { max }), VarSort::Num { max: m2 }) => {
                            *max = (*max).min(m2)
                        }
                        (Some(_), _) => {}
                        (None, vs) => {
                            vars.insert(v.clone(), vs);
                        }
                    };
                }
                Term::NumVar(v, c) => {
                    if let VarSort::Num { max } = vs {
                        let m2 = max.saturating_sub(*c);
                        match vars.get_mut(v) {
                            Some(VarSort::Num { max }) => *max = (*max).min(m2),
                            Some(_) => {}
                            None => {
                                vars.insert(v.clone(), VarSort::Num { max: m2 });
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
    vars
}

/// Does the guard entail `time_var >= tv`?  Checked syntactically against the
/// normalized constraint forms.
fn guard_entails_past(guard: &[Constraint], time_var: &str, tv: &str) -> bool {
    if tv == time_var {
        return true;
    }
    guard.iter().any(|c| {
        (c.lhs == time_var
            && c.rhs == tv
            && match c.rel {
                Rel::Gt => c.offset >= -1,
                Rel::Ge | Rel::Eq => c.offset >= 0,
            })
            || (c.lhs == tv && c.rhs == time_var && c.rel == Rel::Eq && c.offset <= 0)
    })
}

/// Compute the syntactic bounds of a specification: fact count m, max fact
/// size k, numeric bound Dmax, alphabet counts J and E, and the balanced /
/// progressing flags.
pub fn analyze(spec: &SpecModel) -> SpecStats {
    let m = spec.initial.len() as u64;

    let mut k: u64 = spec
        .initial
        .facts()
        .iter()
        .map(crate::model::fact_size)
        .max()
        .unwrap_or(0);
    let mut dmax: u64 = spec.initial.facts().iter().map(|f| f.ts).max().unwrap_or(0);

    for r in &spec.rules {
        let mut pats = r.lhs();
        pats.extend(r.created.iter().map(|(p, _)| (p.clone(), String::new())));
        let vars = infer_vars(spec, &pats);
        for (p, _) in &pats {
            k = k.max(pattern_max_size(p, &vars));
        }
        for (_, d) in &r.created {
            dmax = dmax.max(*d);
        }
        for c in &r.guard {
            dmax = dmax.max(c.offset.unsigned_abs());
        }
    }
    for pair in &spec.critical.pairs {
        let vars = infer_vars(spec, &pair.patterns);
        for (p, _) in &pair.patterns {
            k = k.max(pattern_max_size(p, &vars));
        }
        for c in &pair.constraints {
            dmax = dmax.max(c.offset.unsigned_abs());
        }
    }

    let j = spec.preds.len() as u64 + 1; // declared predicates plus Time
    let enum_consts: u64 = spec
        .sorts
        .values()
        .map(|s| match s {
            Sort::Enum(cs) => cs.len() as u64,
            Sort::Range(_) => 0,
        })
        .sum();
    let has_numerals = spec.sorts.values().any(|s| matches!(s, Sort::Range(_)));
    // z and s are the only function/constant symbols behind numerals
    let e = enum_consts + if has_numerals { 2 } else { 0 };

    let balanced = spec
        .rules
        .iter()
        .filter(|r| r.kind == RuleKind::Instantaneous)
        .all(|r| r.consumed.len() == r.created.len());

    let progressing = balanced
        && spec
            .rules
            .iter()
            .filter(|r| r.kind == RuleKind::Instantaneous)
            .all(|r| {
                r.created.iter().any(|(_, d)| *d >= 1)
                    && r.consumed
                        .iter()
                        .all(|(_, tv)| guard_entails_past(&r.guard, &r.time_var, tv))
            });

    SpecStats {
        m,
        k,
        dmax,
        j,
        e,
        balanced,
        progressing,
    }
}
