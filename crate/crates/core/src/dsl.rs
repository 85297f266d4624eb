//! Datalog-style surface syntax for ontologies (`.ont`) and databases.
//!
//! ```text
//! % comments start with `%` or `#`
//! @class human, object.
//! @relation holds, isAt.
//! human(X) :- holds(X,_).
//! false :- isAt(X,Y), isAt(X,Z), Y != Z.
//! ```
//!
//! Variables start with an uppercase letter or an underscore; a lone `_` is an
//! anonymous variable. Undeclared predicates are added to the vocabulary on
//! first use with the arity of that use; `@class`/`@relation` declarations take
//! precedence wherever they appear in the file.
//!
//! Databases accept inline facts (`holds(mary,apple).`, `-member(apple,human).`,
//! `@individual mary, apple.`) and tab-separated triple lines
//! (`mary<TAB>holds<TAB>apple<TAB>+`), freely mixed.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};

use thiserror::Error;

use crate::kb::{
    is_valid_name, ClassId, Fact, IndividualId, KbError, Literal, PredicateRef, RelationId,
    Roster, SampleKb, Triple, Vocabulary, BOTTOM_TOKEN, MEMBER_TOKEN,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unsafe rule: variable `{0}` does not occur in a positive body atom")]
    Unsafe(String),
    #[error("anonymous variable not allowed here")]
    AnonymousNotAllowed,
    #[error("`{predicate}` has arity {expected} but is used with {found} argument(s)")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("rule body needs at least one atom")]
    EmptyBody,
    #[error("facts must be ground, found variable `{0}`")]
    NonGround(String),
    #[error(transparent)]
    Kb(#[from] KbError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Constant(String),
    Variable(String),
    Anonymous,
}

impl Term {
    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_) | Term::Anonymous)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(c) => f.write_str(c),
            Term::Variable(v) => f.write_str(v),
            Term::Anonymous => f.write_str("_"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub predicate: PredicateRef,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BodyAtom {
    Atom(Atom),
    NotEqual(Term, Term),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Head {
    Atom(Atom),
    /// `false`: the rule is a constraint.
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Head,
    pub body: Vec<BodyAtom>,
}

impl Rule {
    pub fn is_constraint(&self) -> bool {
        matches!(self.head, Head::Bottom)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter_map(|b| match b {
            BodyAtom::Atom(a) => Some(a),
            BodyAtom::NotEqual(..) => None,
        })
    }

    /// Checks the safety conditions: every head variable and every variable of
    /// an inequality occurs in some body atom, and the head has no `_`.
    pub fn check_safety(&self) -> Result<(), ParseErrorKind> {
        if self.atoms().next().is_none() {
            return Err(ParseErrorKind::EmptyBody);
        }
        let bound: BTreeSet<&str> = self
            .atoms()
            .flat_map(|a| a.args.iter())
            .filter_map(|t| match t {
                Term::Variable(v) => Some(v.as_str()),
                _ => None,
            })
            .collect();
        let check = |t: &Term| match t {
            Term::Variable(v) if !bound.contains(v.as_str()) => {
                Err(ParseErrorKind::Unsafe(v.clone()))
            }
            Term::Anonymous => Err(ParseErrorKind::AnonymousNotAllowed),
            _ => Ok(()),
        };
        if let Head::Atom(h) = &self.head {
            h.args.iter().try_for_each(check)?;
        }
        for b in &self.body {
            if let BodyAtom::NotEqual(l, r) = b {
                check(l)?;
                check(r)?;
            }
        }
        Ok(())
    }
}

/// An ontology: vocabulary plus safe rules (constraints included).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub vocabulary: Vocabulary,
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn constraints(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.is_constraint())
    }

    /// Relations that occur in the head of some rule.
    pub fn derived_relations(&self) -> BTreeSet<RelationId> {
        self.rules
            .iter()
            .filter_map(|r| match &r.head {
                Head::Atom(Atom {
                    predicate: PredicateRef::Relation(rel),
                    ..
                }) => Some(*rel),
                _ => None,
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    Var(String),
    Underscore,
    LParen,
    RParen,
    Comma,
    Dot,
    Implies,
    NotEq,
    Minus,
    Question,
    Directive(String),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(s) | Tok::Var(s) => write!(f, "`{s}`"),
            Tok::Underscore => f.write_str("`_`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Implies => f.write_str("`:-`"),
            Tok::NotEq => f.write_str("`!=`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Question => f.write_str("`?`"),
            Tok::Directive(d) => write!(f, "`@{d}`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

fn err(pos: Pos, kind: ParseErrorKind) -> ParseError {
    ParseError {
        line: pos.line,
        column: pos.column,
        kind,
    }
}

fn syntax(pos: Pos, msg: String) -> ParseError {
    err(pos, ParseErrorKind::Syntax(msg))
}

fn lex(text: &str, first_line: usize) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut line = first_line;
    let mut col = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column: col };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == '%' || c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        let ident = |chars: &mut core::iter::Peekable<core::str::Chars<'_>>, col: &mut usize| {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    chars.next();
                    *col += 1;
                } else {
                    break;
                }
            }
            s
        };
        let tok = match c {
            '(' | ')' | ',' | '.' | '-' | '?' => {
                chars.next();
                col += 1;
                match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    '-' => Tok::Minus,
                    _ => Tok::Question,
                }
            }
            ':' | '!' => {
                chars.next();
                col += 1;
                match (c, chars.peek()) {
                    (':', Some('-')) => {
                        chars.next();
                        col += 1;
                        Tok::Implies
                    }
                    ('!', Some('=')) => {
                        chars.next();
                        col += 1;
                        Tok::NotEq
                    }
                    _ => return Err(syntax(pos, format!("unexpected character `{c}`"))),
                }
            }
            '@' => {
                chars.next();
                col += 1;
                let name = ident(&mut chars, &mut col);
                if name.is_empty() {
                    return Err(syntax(pos, "expected directive name after `@`".into()));
                }
                Tok::Directive(name)
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let s = ident(&mut chars, &mut col);
                if s == "_" {
                    Tok::Underscore
                } else if c.is_ascii_uppercase() || c == '_' {
                    Tok::Var(s)
                } else {
                    Tok::Name(s)
                }
            }
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        };
        out.push((tok, pos));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Debug, Clone)]
struct RawAtom {
    name: String,
    args: Vec<Term>,
    pos: Pos,
}

#[derive(Debug, Clone)]
enum RawBody {
    Atom(RawAtom),
    NotEqual(Term, Term),
}

#[derive(Debug, Clone)]
enum RawItem {
    Declare {
        relation: bool,
        names: Vec<(String, Pos)>,
    },
    Individuals(Vec<String>),
    Rule {
        head: Option<RawAtom>,
        body: Vec<RawBody>,
        pos: Pos,
    },
    Fact {
        negated: bool,
        atom: RawAtom,
    },
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
}

impl Parser {
    fn new(toks: Vec<(Tok, Pos)>, end: Pos) -> Self {
        Self { toks, at: 0, end }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let pos = self.pos();
        match self.next() {
            Some((t, _)) if t == want => Ok(()),
            Some((t, _)) => Err(syntax(pos, format!("expected {want}, found {t}"))),
            None => Err(syntax(pos, format!("expected {want}, found end of input"))),
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn name(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.pos();
        match self.next() {
            Some((Tok::Name(n), p)) => Ok((n, p)),
            Some((t, _)) => Err(syntax(pos, format!("expected a name, found {t}"))),
            None => Err(syntax(pos, "expected a name, found end of input".into())),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let pos = self.pos();
        match self.next() {
            Some((Tok::Name(n), _)) => Ok(Term::Constant(n)),
            Some((Tok::Var(v), _)) => Ok(Term::Variable(v)),
            Some((Tok::Underscore, _)) => Ok(Term::Anonymous),
            Some((t, _)) => Err(syntax(pos, format!("expected a term, found {t}"))),
            None => Err(syntax(pos, "expected a term, found end of input".into())),
        }
    }

    fn atom(&mut self) -> Result<RawAtom, ParseError> {
        let (name, pos) = self.name()?;
        self.expect(Tok::LParen)?;
        let mut args = alloc::vec![self.term()?];
        while self.eat(&Tok::Comma) {
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        if args.len() > 2 {
            return Err(syntax(
                pos,
                format!("`{name}` has {} arguments; at most 2 are supported", args.len()),
            ));
        }
        Ok(RawAtom { name, args, pos })
    }

    fn body_atom(&mut self) -> Result<RawBody, ParseError> {
        match (self.peek(), self.toks.get(self.at + 1).map(|(t, _)| t)) {
            (Some(Tok::Name(_)), Some(Tok::LParen)) => Ok(RawBody::Atom(self.atom()?)),
            _ => {
                let l = self.term()?;
                self.expect(Tok::NotEq)?;
                let r = self.term()?;
                Ok(RawBody::NotEqual(l, r))
            }
        }
    }

    fn names_list(&mut self) -> Result<Vec<(String, Pos)>, ParseError> {
        let mut names = alloc::vec![self.name()?];
        while self.eat(&Tok::Comma) {
            names.push(self.name()?);
        }
        self.expect(Tok::Dot)?;
        Ok(names)
    }

    fn directive(&mut self, d: String, pos: Pos) -> Result<RawItem, ParseError> {
        match d.as_str() {
            "class" => Ok(RawItem::Declare {
                relation: false,
                names: self.names_list()?,
            }),
            "relation" => Ok(RawItem::Declare {
                relation: true,
                names: self.names_list()?,
            }),
            "individual" => Ok(RawItem::Individuals(
                self.names_list()?.into_iter().map(|(n, _)| n).collect(),
            )),
            other => Err(syntax(pos, format!("unknown directive `@{other}`"))),
        }
    }

    fn rule_item(&mut self) -> Result<RawItem, ParseError> {
        let pos = self.pos();
        if let Some(Tok::Directive(_)) = self.peek() {
            let Some((Tok::Directive(d), p)) = self.next() else {
                unreachable!()
            };
            return self.directive(d, p);
        }
        let head = match self.peek() {
            Some(Tok::Name(n)) if n == BOTTOM_TOKEN => {
                self.next();
                None
            }
            _ => Some(self.atom()?),
        };
        if self.eat(&Tok::Dot) {
            // A bodiless rule is a fact, which programs do not admit.
            return Err(err(pos, ParseErrorKind::EmptyBody));
        }
        self.expect(Tok::Implies)?;
        let mut body = alloc::vec![self.body_atom()?];
        while self.eat(&Tok::Comma) {
            body.push(self.body_atom()?);
        }
        self.expect(Tok::Dot)?;
        Ok(RawItem::Rule { head, body, pos })
    }

    fn fact_item(&mut self) -> Result<RawItem, ParseError> {
        if let Some(Tok::Directive(_)) = self.peek() {
            let Some((Tok::Directive(d), p)) = self.next() else {
                unreachable!()
            };
            return self.directive(d, p);
        }
        let negated = self.eat(&Tok::Minus);
        let atom = self.atom()?;
        self.expect(Tok::Dot)?;
        Ok(RawItem::Fact { negated, atom })
    }
}

fn end_pos(text: &str) -> Pos {
    let line = text.lines().count().max(1);
    let column = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    Pos { line, column }
}

fn parse_items(
    text: &str,
    mut item: impl FnMut(&mut Parser) -> Result<RawItem, ParseError>,
) -> Result<Vec<RawItem>, ParseError> {
    let mut p = Parser::new(lex(text, 1)?, end_pos(text));
    let mut items = Vec::new();
    while p.peek().is_some() {
        items.push(item(&mut p)?);
    }
    Ok(items)
}

/// Registers a predicate at first use, or checks the arity of a known one.
fn resolve_predicate(
    vocab: &mut Vocabulary,
    name: &str,
    arity: usize,
    pos: Pos,
    infer: bool,
) -> Result<PredicateRef, ParseError> {
    let p = match vocab.lookup(name) {
        Some(p) => p,
        None if infer => {
            let r = if arity == 1 {
                vocab.add_class(name).map(PredicateRef::Class)
            } else {
                vocab.add_relation(name).map(PredicateRef::Relation)
            };
            r.map_err(|e| err(pos, e.into()))?
        }
        None => {
            return Err(err(
                pos,
                KbError::UnknownPredicate(name.to_string()).into(),
            ))
        }
    };
    if p.arity() != arity {
        return Err(err(
            pos,
            ParseErrorKind::ArityMismatch {
                predicate: name.to_string(),
                expected: p.arity(),
                found: arity,
            },
        ));
    }
    Ok(p)
}

fn declare(vocab: &mut Vocabulary, relation: bool, names: &[(String, Pos)]) -> Result<(), ParseError> {
    for (n, pos) in names {
        let r = if relation {
            vocab.add_relation(n).map(|_| ())
        } else {
            vocab.add_class(n).map(|_| ())
        };
        r.map_err(|e| err(*pos, e.into()))?;
    }
    Ok(())
}

/// Parses an ontology; the vocabulary is built from declarations and uses.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let items = parse_items(text, Parser::rule_item)?;
    let mut vocab = Vocabulary::new();
    for it in &items {
        if let RawItem::Declare { relation, names } = it {
            declare(&mut vocab, *relation, names)?;
        }
    }
    let mut rules = Vec::new();
    for it in items {
        let RawItem::Rule { head, body, pos } = it else {
            if let RawItem::Individuals(_) = it {
                return Err(syntax(
                    Pos { line: 1, column: 1 },
                    "`@individual` is only valid in fact files".into(),
                ));
            }
            continue;
        };
        let mut convert = |a: RawAtom| -> Result<Atom, ParseError> {
            let predicate = resolve_predicate(&mut vocab, &a.name, a.args.len(), a.pos, true)?;
            Ok(Atom {
                predicate,
                args: a.args,
            })
        };
        let mut body_atoms = Vec::with_capacity(body.len());
        for b in body {
            body_atoms.push(match b {
                RawBody::Atom(a) => BodyAtom::Atom(convert(a)?),
                RawBody::NotEqual(l, r) => BodyAtom::NotEqual(l, r),
            });
        }
        let head = match head {
            Some(a) => Head::Atom(convert(a)?),
            None => Head::Bottom,
        };
        let rule = Rule {
            head,
            body: body_atoms,
        };
        rule.check_safety().map_err(|k| err(pos, k))?;
        rules.push(rule);
    }
    Ok(Program {
        vocabulary: vocab,
        rules,
    })
}

fn ground_args(atom: &RawAtom) -> Result<Vec<&str>, ParseError> {
    atom.args
        .iter()
        .map(|t| match t {
            Term::Constant(c) => Ok(c.as_str()),
            Term::Variable(v) => Err(err(atom.pos, ParseErrorKind::NonGround(v.clone()))),
            Term::Anonymous => Err(err(atom.pos, ParseErrorKind::NonGround("_".into()))),
        })
        .collect()
}

fn raw_fact_to_literal(
    atom: &RawAtom,
    negated: bool,
    vocab: &mut Vocabulary,
    roster: &mut Roster,
    infer: bool,
) -> Result<Literal, ParseError> {
    let args = ground_args(atom)?;
    let fact = if atom.name == MEMBER_TOKEN {
        if args.len() != 2 {
            return Err(err(
                atom.pos,
                ParseErrorKind::ArityMismatch {
                    predicate: MEMBER_TOKEN.into(),
                    expected: 2,
                    found: args.len(),
                },
            ));
        }
        let p = resolve_predicate(vocab, args[1], 1, atom.pos, infer)?;
        let PredicateRef::Class(class) = p else {
            unreachable!("arity checked")
        };
        Fact::Class {
            class,
            individual: intern_checked(roster, args[0], atom.pos)?,
        }
    } else {
        match resolve_predicate(vocab, &atom.name, args.len(), atom.pos, infer)? {
            PredicateRef::Class(class) => Fact::Class {
                class,
                individual: intern_checked(roster, args[0], atom.pos)?,
            },
            PredicateRef::Relation(relation) => Fact::Relation {
                relation,
                subject: intern_checked(roster, args[0], atom.pos)?,
                object: intern_checked(roster, args[1], atom.pos)?,
            },
        }
    };
    Ok(Literal {
        fact,
        positive: !negated,
    })
}

fn intern_checked(roster: &mut Roster, name: &str, pos: Pos) -> Result<IndividualId, ParseError> {
    if !is_valid_name(name) {
        return Err(err(pos, KbError::InvalidName(name.to_string()).into()));
    }
    Ok(roster.intern(name))
}

fn parse_tsv_line(
    line: &str,
    lineno: usize,
    vocab: &mut Vocabulary,
    roster: &mut Roster,
    infer: bool,
) -> Result<Literal, ParseError> {
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    let pos = Pos {
        line: lineno,
        column: 1,
    };
    if fields.len() != 4 {
        return Err(syntax(
            pos,
            format!("expected 4 tab-separated fields, found {}", fields.len()),
        ));
    }
    let negated = match fields[3] {
        "+" => false,
        "-" => true,
        other => return Err(syntax(pos, format!("expected `+` or `-`, found `{other}`"))),
    };
    let atom = RawAtom {
        name: fields[1].to_string(),
        args: alloc::vec![
            Term::Constant(fields[0].to_string()),
            Term::Constant(fields[2].to_string())
        ],
        pos,
    };
    raw_fact_to_literal(&atom, negated, vocab, roster, infer)
}

fn parse_facts_impl(
    text: &str,
    vocab: &mut Vocabulary,
    infer: bool,
) -> Result<SampleKb, ParseError> {
    let mut roster = Roster::new();
    let mut literals = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        if line.contains('\t') {
            literals.push(parse_tsv_line(line, lineno, vocab, &mut roster, infer)?);
            continue;
        }
        let mut p = Parser::new(
            lex(line, lineno)?,
            Pos {
                line: lineno,
                column: line.chars().count() + 1,
            },
        );
        while p.peek().is_some() {
            match p.fact_item()? {
                RawItem::Fact { negated, atom } => {
                    literals.push(raw_fact_to_literal(&atom, negated, vocab, &mut roster, infer)?)
                }
                RawItem::Individuals(names) => {
                    for n in names {
                        intern_checked(&mut roster, &n, p.pos())?;
                    }
                }
                RawItem::Declare { relation, names } => {
                    if !infer {
                        return Err(syntax(
                            names[0].1,
                            "declarations are not allowed when the vocabulary is fixed".into(),
                        ));
                    }
                    declare(vocab, relation, &names)?;
                }
                RawItem::Rule { .. } => unreachable!("fact parser yields no rules"),
            }
        }
    }
    let mut sample = SampleKb::new(roster);
    for l in &literals {
        sample
            .insert_literal(l)
            .expect("individuals interned while parsing");
    }
    Ok(sample)
}

/// Parses a database against a fixed vocabulary; unknown predicates are errors.
pub fn parse_facts(text: &str, vocab: &Vocabulary) -> Result<SampleKb, ParseError> {
    let mut v = vocab.clone();
    parse_facts_impl(text, &mut v, false)
}

/// Parses a database, inferring the vocabulary from declarations and uses.
pub fn parse_facts_inferring(text: &str) -> Result<(Vocabulary, SampleKb), ParseError> {
    let mut v = Vocabulary::new();
    let s = parse_facts_impl(text, &mut v, true)?;
    Ok((v, s))
}

/// Parses a single ground query such as `isAt(apple,kitchen)`, `?human(apple)` or
/// `-isAt(mary,bedroom)`. Unknown constants are interned into `roster`.
pub fn parse_literal(
    text: &str,
    vocab: &Vocabulary,
    roster: &mut Roster,
) -> Result<Literal, ParseError> {
    let mut p = Parser::new(lex(text, 1)?, end_pos(text));
    p.eat(&Tok::Question);
    let negated = p.eat(&Tok::Minus);
    let atom = p.atom()?;
    p.eat(&Tok::Dot);
    if let Some(t) = p.peek() {
        return Err(syntax(p.pos(), format!("unexpected {t} after query")));
    }
    let mut v = vocab.clone();
    raw_fact_to_literal(&atom, negated, &mut v, roster, false)
}

// ---------------------------------------------------------------------------
// Serialization

fn write_atom(out: &mut String, atom: &Atom, vocab: &Vocabulary) {
    out.push_str(vocab.predicate_name(atom.predicate));
    out.push('(');
    for (i, a) in atom.args.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{a}");
    }
    out.push(')');
}

fn write_declarations(out: &mut String, vocab: &Vocabulary) {
    if vocab.num_classes() > 0 {
        out.push_str("@class ");
        out.push_str(&vocab.classes().join(", "));
        out.push_str(".\n");
    }
    if vocab.num_relations() > 0 {
        out.push_str("@relation ");
        out.push_str(&vocab.relations().join(", "));
        out.push_str(".\n");
    }
}

/// Renders a program so that [`parse_program`] reproduces it exactly.
pub fn serialize_program(program: &Program) -> String {
    let mut out = String::new();
    write_declarations(&mut out, &program.vocabulary);
    for rule in &program.rules {
        write_rule(&mut out, rule, &program.vocabulary);
        out.push('\n');
    }
    out
}

pub fn write_rule(out: &mut String, rule: &Rule, vocab: &Vocabulary) {
    match &rule.head {
        Head::Atom(a) => write_atom(out, a, vocab),
        Head::Bottom => out.push_str(BOTTOM_TOKEN),
    }
    out.push_str(" :- ");
    for (i, b) in rule.body.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match b {
            BodyAtom::Atom(a) => write_atom(out, a, vocab),
            BodyAtom::NotEqual(l, r) => {
                let _ = write!(out, "{l} != {r}");
            }
        }
    }
    out.push('.');
}

pub fn literal_to_string(lit: &Literal, vocab: &Vocabulary, roster: &Roster) -> String {
    let mut out = String::new();
    if !lit.positive {
        out.push('-');
    }
    match lit.fact {
        Fact::Class { class, individual } => {
            let _ = write!(out, "{}({})", vocab.class_name(class), roster.name(individual));
        }
        Fact::Relation {
            relation,
            subject,
            object,
        } => {
            let _ = write!(
                out,
                "{}({},{})",
                vocab.relation_name(relation),
                roster.name(subject),
                roster.name(object)
            );
        }
    }
    out
}

/// Renders a database in inline syntax, preceded by its roster so that
/// individual ids survive a round trip through [`parse_facts`].
pub fn serialize_facts(sample: &SampleKb, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    if !sample.roster.is_empty() {
        out.push_str("@individual ");
        out.push_str(&sample.roster.names().join(", "));
        out.push_str(".\n");
    }
    for lit in sample.literals() {
        out.push_str(&literal_to_string(&lit, vocab, &sample.roster));
        out.push_str(".\n");
    }
    out
}

/// Convenience for building triples by name in tests and fixtures.
pub fn triple_by_name(
    vocab: &Vocabulary,
    roster: &Roster,
    subject: &str,
    predicate: &str,
    object: &str,
) -> Option<Triple> {
    let s = roster.get(subject)?;
    if predicate == MEMBER_TOKEN {
        let c: ClassId = vocab.class(object)?;
        return Some(Triple::member(s, c));
    }
    let r = vocab.relation(predicate)?;
    Some(Triple::relation(s, r, roster.get(object)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const KITCHEN: &str = "\
% Only humans can hold things.
human(X) :- holds(X,_).
object(Y) :- holds(_,Y).
false :- human(X), object(X).
isAt(Y,Z) :- holds(X,Y), isAt(X,Z).
false :- isAt(X,Y), isAt(X,Z), Y != Z.
";

    #[test]
    fn parses_single_rule_with_anonymous_variable() {
        let p = parse_program("human(X) :- holds(X,_).").unwrap();
        assert_eq!(p.rules.len(), 1);
        let Head::Atom(h) = &p.rules[0].head else {
            panic!("expected atom head")
        };
        assert_eq!(p.vocabulary.predicate_name(h.predicate), "human");
        assert_eq!(h.args.len(), 1);
        assert_eq!(p.vocabulary.classes(), &["human"]);
        assert_eq!(p.vocabulary.relations(), &["holds"]);
    }

    #[test]
    fn rejects_unsafe_rule_with_position() {
        let e = parse_program("q(a).\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::EmptyBody);
        let e = parse_program("% c\n  p(X,Y) :- q(Y).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unsafe("X".into()));
        assert_eq!((e.line, e.column), (2, 3));
    }

    #[test]
    fn accepts_constraint_with_inequality() {
        let p = parse_program("false :- isAt(X,Y), isAt(X,Z), Y != Z.").unwrap();
        assert!(p.rules[0].is_constraint());
        assert_eq!(p.rules[0].body.len(), 3);
        assert!(matches!(p.rules[0].body[2], BodyAtom::NotEqual(..)));
    }

    #[test]
    fn inequality_variables_must_be_bound() {
        let e = parse_program("false :- p(X), X != Y.").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unsafe("Y".into()));
    }

    #[test]
    fn arity_errors() {
        let e = parse_program("p(X) :- q(X). r(X) :- p(X,X).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ArityMismatch { .. }));
        let e = parse_program("@relation p.\np(X) :- q(X).").unwrap_err();
        assert!(matches!(
            e.kind,
            ParseErrorKind::ArityMismatch {
                expected: 2,
                found: 1,
                ..
            }
        ));
        assert!(parse_program("p(X,Y,Z) :- q(X,Y,Z).").is_err());
    }

    #[test]
    fn syntax_errors_are_reported() {
        assert!(matches!(
            parse_program("p(X) :- q(X)").unwrap_err().kind,
            ParseErrorKind::Syntax(_)
        ));
        assert!(matches!(
            parse_program("p(X) q(X).").unwrap_err().kind,
            ParseErrorKind::Syntax(_)
        ));
        assert!(matches!(
            parse_program("member(X,c) :- q(X).").unwrap_err().kind,
            ParseErrorKind::Kb(KbError::ReservedName(_))
        ));
    }

    #[test]
    fn declarations_fix_vocabulary_order() {
        let p = parse_program("b(X) :- a(X).\n@class a.").unwrap();
        assert_eq!(p.vocabulary.classes(), &["a", "b"]);
    }

    #[test]
    fn kitchen_round_trip() {
        let p = parse_program(KITCHEN).unwrap();
        assert_eq!(p.rules.len(), 5);
        assert_eq!(p.constraints().count(), 2);
        let text = serialize_program(&p);
        assert_eq!(parse_program(&text).unwrap(), p);
    }

    #[test]
    fn empty_program_round_trip() {
        let p = parse_program("").unwrap();
        assert_eq!(serialize_program(&p), "");
        assert_eq!(parse_program("% nothing\n").unwrap(), p);
    }

    #[test]
    fn facts_inline_and_tsv() {
        let p = parse_program(KITCHEN).unwrap();
        let v = &p.vocabulary;
        let s = parse_facts("holds(mary,apple).\n", v).unwrap();
        assert_eq!(s.num_facts(), 1);
        let lit = s.literals().next().unwrap();
        assert!(lit.positive);
        assert!(matches!(lit.fact, Fact::Relation { .. }));

        let s = parse_facts("-member(apple,human).", v).unwrap();
        let lit = s.literals().next().unwrap();
        assert!(!lit.positive);
        assert!(matches!(lit.fact, Fact::Class { .. }));

        assert_eq!(parse_facts("", v).unwrap().num_facts(), 0);

        let s = parse_facts("mary\tholds\tapple\t+\nmary\tmember\thuman\t-\n", v).unwrap();
        assert_eq!(s.num_facts(), 2);
        assert_eq!(s.to_tsv(v), "mary\tmember\thuman\t-\nmary\tholds\tapple\t+\n");

        assert!(parse_facts("likes(mary,apple).", v).is_err());
        assert!(parse_facts("holds(mary).", v).is_err());
        assert!(matches!(
            parse_facts("holds(X,apple).", v).unwrap_err().kind,
            ParseErrorKind::NonGround(_)
        ));
    }

    #[test]
    fn facts_round_trip_preserves_roster() {
        let p = parse_program(KITCHEN).unwrap();
        let v = &p.vocabulary;
        let s = parse_facts("@individual kitchen.\nholds(mary,apple). -human(apple).\n", v).unwrap();
        assert_eq!(s.roster.names(), &["kitchen", "mary", "apple"]);
        let text = serialize_facts(&s, v);
        assert_eq!(parse_facts(&text, v).unwrap(), s);
    }

    #[test]
    fn inferring_vocabulary_from_facts() {
        let (v, s) = parse_facts_inferring("holds(mary,apple).\nhuman(mary).").unwrap();
        assert_eq!(v.classes(), &["human"]);
        assert_eq!(v.relations(), &["holds"]);
        assert_eq!(s.num_facts(), 2);
    }

    #[test]
    fn query_literal_interns_unknown_constants() {
        let p = parse_program(KITCHEN).unwrap();
        let mut roster = Roster::from_names(["mary"]);
        let l = parse_literal("?isAt(mary,bedroom)", &p.vocabulary, &mut roster).unwrap();
        assert!(l.positive);
        assert_eq!(roster.len(), 2);
        let l = parse_literal("-human(mary)", &p.vocabulary, &mut roster).unwrap();
        assert!(!l.positive);
        assert!(parse_literal("human(mary) x", &p.vocabulary, &mut roster).is_err());
    }
}
