//! Text syntax for formulas.
//!
//! ```text
//! formula := or ( "->" formula )?
//! or      := and ( "|" and )*
//! and     := unary ( "&" unary )*
//! unary   := "!" unary
//!          | "K" "[" item "]" unary
//!          | "E" "{" item ( "," item )* "}" unary
//!          | "C" "{" item ( "," item )* "}" unary
//!          | "occ" "(" label ")"
//!          | "tocc" "(" number "," label ")"
//!          | "(" formula ")"
//! item    := number | number "@" number
//! label   := [A-Za-z_][A-Za-z0-9_]*
//! ```
//!
//! `occ` and bare agent items give `L0`; `tocc` and `i@t` items give
//! `L1`. Mixing the two is an error. `a | b` and `a -> b` are shorthand
//! for `!(!a & !b)` and `!(a & !b)`.

use std::collections::BTreeSet;

use super::{Formula, FormulaL0, FormulaL1, LogicError};
use crate::network::{AgentId, Node};
use crate::runs::Label;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u32),
    Sym(&'static str),
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, LogicError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l, cl) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let push = |out: &mut Vec<Token>, tok| {
            out.push(Token {
                tok,
                line: l,
                column: cl,
            })
        };
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<u32>().map_err(|_| LogicError::Syntax {
                line: l,
                column: cl,
                message: format!("number {s} is too large"),
            })?;
            col += i - start;
            push(&mut out, Tok::Num(v));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            i += 2;
            col += 2;
            push(&mut out, Tok::Sym("->"));
            continue;
        }
        let sym = match c {
            '(' => "(",
            ')' => ")",
            '[' => "[",
            ']' => "]",
            '{' => "{",
            '}' => "}",
            ',' => ",",
            '@' => "@",
            '&' => "&",
            '|' => "|",
            '!' => "!",
            _ => {
                return Err(LogicError::Syntax {
                    line: l,
                    column: cl,
                    message: format!("unexpected character '{c}'"),
                })
            }
        };
        i += 1;
        col += 1;
        push(&mut out, Tok::Sym(sym));
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Level {
    Agent,
    Node,
}

/// Level-agnostic syntax tree; converted once the level is known.
enum Raw {
    Occ(Label),
    Tocc(u32, Label),
    And(Box<Raw>, Box<Raw>),
    Not(Box<Raw>),
    K(Item, Box<Raw>),
    E(Vec<Item>, Box<Raw>),
    C(Vec<Item>, Box<Raw>),
}

#[derive(Clone, Copy)]
enum Item {
    Agent(AgentId),
    Node(Node),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    level: Option<Level>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn err<T>(&self, tok: &Token, message: impl Into<String>) -> Result<T, LogicError> {
        Err(LogicError::Syntax {
            line: tok.line,
            column: tok.column,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, sym: &'static str) -> Result<(), LogicError> {
        let t = self.next();
        if t.tok == Tok::Sym(sym) {
            Ok(())
        } else {
            self.err(&t, format!("expected '{sym}'"))
        }
    }

    fn set_level(&mut self, tok: &Token, level: Level) -> Result<(), LogicError> {
        match self.level {
            Some(l) if l != level => self.err(
                tok,
                "formula mixes agent-indexed and node-indexed constructs",
            ),
            _ => {
                self.level = Some(level);
                Ok(())
            }
        }
    }

    fn formula(&mut self) -> Result<Raw, LogicError> {
        let lhs = self.or()?;
        if self.peek().tok == Tok::Sym("->") {
            self.next();
            let rhs = self.formula()?;
            return Ok(Raw::Not(Box::new(Raw::And(
                Box::new(lhs),
                Box::new(Raw::Not(Box::new(rhs))),
            ))));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Raw, LogicError> {
        let mut lhs = self.and()?;
        while self.peek().tok == Tok::Sym("|") {
            self.next();
            let rhs = self.and()?;
            lhs = Raw::Not(Box::new(Raw::And(
                Box::new(Raw::Not(Box::new(lhs))),
                Box::new(Raw::Not(Box::new(rhs))),
            )));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Raw, LogicError> {
        let mut lhs = self.unary()?;
        while self.peek().tok == Tok::Sym("&") {
            self.next();
            let rhs = self.unary()?;
            lhs = Raw::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn item(&mut self) -> Result<Item, LogicError> {
        let t = self.next();
        let Tok::Num(a) = t.tok else {
            return self.err(&t, "expected an agent number");
        };
        if a == 0 {
            return self.err(&t, "agents are numbered from 1");
        }
        if self.peek().tok == Tok::Sym("@") {
            self.next();
            let tt = self.next();
            let Tok::Num(time) = tt.tok else {
                return self.err(&tt, "malformed node: expected a time after '@'");
            };
            self.set_level(&t, Level::Node)?;
            Ok(Item::Node(Node::new(a, time)))
        } else {
            self.set_level(&t, Level::Agent)?;
            Ok(Item::Agent(AgentId(a)))
        }
    }

    fn label(&mut self) -> Result<Label, LogicError> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) => Ok(Label(s)),
            _ => self.err(&t, "expected an event label"),
        }
    }

    fn unary(&mut self) -> Result<Raw, LogicError> {
        let t = self.next();
        match &t.tok {
            Tok::Sym("!") => Ok(Raw::Not(Box::new(self.unary()?))),
            Tok::Sym("(") => {
                let f = self.formula()?;
                self.expect(")")?;
                Ok(f)
            }
            Tok::Ident(id) if id == "K" && self.peek().tok == Tok::Sym("[") => {
                self.next();
                let item = self.item()?;
                self.expect("]")?;
                Ok(Raw::K(item, Box::new(self.unary()?)))
            }
            Tok::Ident(id) if (id == "E" || id == "C") && self.peek().tok == Tok::Sym("{") => {
                let open = self.next();
                let mut items = Vec::new();
                if self.peek().tok == Tok::Sym("}") {
                    return self.err(&open, "empty agent or node set");
                }
                loop {
                    items.push(self.item()?);
                    let sep = self.next();
                    match sep.tok {
                        Tok::Sym(",") => continue,
                        Tok::Sym("}") => break,
                        _ => return self.err(&sep, "expected ',' or '}'"),
                    }
                }
                let body = Box::new(self.unary()?);
                Ok(if id == "E" {
                    Raw::E(items, body)
                } else {
                    Raw::C(items, body)
                })
            }
            Tok::Ident(id) if id == "occ" => {
                self.set_level(&t, Level::Agent)?;
                self.expect("(")?;
                let l = self.label()?;
                self.expect(")")?;
                Ok(Raw::Occ(l))
            }
            Tok::Ident(id) if id == "tocc" => {
                self.set_level(&t, Level::Node)?;
                self.expect("(")?;
                let tt = self.next();
                let Tok::Num(time) = tt.tok else {
                    return self.err(&tt, "expected a time");
                };
                self.expect(",")?;
                let l = self.label()?;
                self.expect(")")?;
                Ok(Raw::Tocc(time, l))
            }
            Tok::End => self.err(&t, "unexpected end of formula"),
            _ => self.err(&t, "expected a formula"),
        }
    }
}

fn to_l0(r: Raw) -> FormulaL0 {
    let agent = |i: Item| match i {
        Item::Agent(a) => a,
        Item::Node(_) => unreachable!("level checked while parsing"),
    };
    let group = |v: Vec<Item>| -> BTreeSet<AgentId> { v.into_iter().map(agent).collect() };
    match r {
        Raw::Occ(l) => FormulaL0::Occ(l),
        Raw::And(a, b) => FormulaL0::And(Box::new(to_l0(*a)), Box::new(to_l0(*b))),
        Raw::Not(g) => FormulaL0::Not(Box::new(to_l0(*g))),
        Raw::K(i, g) => FormulaL0::K(agent(i), Box::new(to_l0(*g))),
        Raw::E(v, g) => FormulaL0::E(group(v), Box::new(to_l0(*g))),
        Raw::C(v, g) => FormulaL0::C(group(v), Box::new(to_l0(*g))),
        Raw::Tocc(..) => unreachable!("level checked while parsing"),
    }
}

fn to_l1(r: Raw) -> FormulaL1 {
    let node = |i: Item| match i {
        Item::Node(n) => n,
        Item::Agent(_) => unreachable!("level checked while parsing"),
    };
    let set = |v: Vec<Item>| -> BTreeSet<Node> { v.into_iter().map(node).collect() };
    match r {
        Raw::Tocc(t, l) => FormulaL1::Tocc(t, l),
        Raw::And(a, b) => FormulaL1::And(Box::new(to_l1(*a)), Box::new(to_l1(*b))),
        Raw::Not(g) => FormulaL1::Not(Box::new(to_l1(*g))),
        Raw::K(i, g) => FormulaL1::K(node(i), Box::new(to_l1(*g))),
        Raw::E(v, g) => FormulaL1::E(set(v), Box::new(to_l1(*g))),
        Raw::C(v, g) => FormulaL1::C(set(v), Box::new(to_l1(*g))),
        Raw::Occ(_) => unreachable!("level checked while parsing"),
    }
}

/// Parses formula text into an `L0` or `L1` formula.
pub fn parse_formula(text: &str) -> Result<Formula, LogicError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        level: None,
    };
    let raw = p.formula()?;
    let end = p.peek().clone();
    if end.tok != Tok::End {
        return p.err(&end, "unexpected trailing input");
    }
    Ok(match p.level {
        Some(Level::Node) => Formula::L1(to_l1(raw)),
        _ => Formula::L0(to_l0(raw)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_node_knowledge() {
        assert_eq!(
            parse_formula("K[1@3] tocc(0, es)").unwrap(),
            Formula::L1(FormulaL1::k(Node::new(1, 3), FormulaL1::tocc(0, "es")))
        );
        assert_eq!(
            parse_formula("C{1@2, 2@5} tocc(0, es)").unwrap(),
            Formula::L1(FormulaL1::c(
                &[Node::new(1, 2), Node::new(2, 5)],
                FormulaL1::tocc(0, "es")
            ))
        );
    }

    #[test]
    fn parses_agent_formulas_and_sugar() {
        assert_eq!(
            parse_formula("E{1,2} !occ(a) & K[2] occ(b)").unwrap(),
            Formula::L0(FormulaL0::and(
                FormulaL0::e(&[1, 2], FormulaL0::not(FormulaL0::occ("a"))),
                FormulaL0::k(2, FormulaL0::occ("b"))
            ))
        );
        assert_eq!(
            parse_formula("tocc(0,a) -> tocc(1,a)").unwrap(),
            Formula::L1(FormulaL1::implies(
                FormulaL1::tocc(0, "a"),
                FormulaL1::tocc(1, "a")
            ))
        );
    }

    #[test]
    fn errors_carry_positions() {
        match parse_formula("C{} p") {
            Err(LogicError::Syntax { line, column, message }) => {
                assert_eq!((line, column), (1, 2));
                assert!(message.contains("empty"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_formula("K[1@3]\n  tocc(0, es) &") {
            Err(LogicError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 16)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_formula("K[1@] tocc(0,e)").is_err());
        assert!(parse_formula("K[0] occ(e)").is_err());
        assert!(parse_formula("K[1] tocc(0,e)").is_err());
        assert!(parse_formula("occ(e) %").is_err());
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "K[1@3] tocc(0, es)",
            "!(C{1@2, 2@5} tocc(0, es) & E{1@1} !tocc(2, x))",
            "C{1, 2} K[1] occ(e)",
        ] {
            let f = parse_formula(text).unwrap();
            assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
        }
    }
}
