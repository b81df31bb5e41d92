//! Recursive-descent parser for rule files.
//!
//! ```text
//! theory  := clause*
//! clause  := literal [":-" literal ("," literal)*] ["{" ident "}"] "."
//! literal := ident "(" ident ("," ident)* ")"
//! ```
//!
//! `%` starts a comment that runs to the end of the line.

use crate::error::{Error, Result};

use super::ast::{Clause, Literal, Term, Theory};

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Ident(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Neck,
    Eof,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("`{s}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::LBrace => "`{`".into(),
            Token::RBrace => "`}`".into(),
            Token::Comma => "`,`".into(),
            Token::Dot => "`.`".into(),
            Token::Neck => "`:-`".into(),
            Token::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<(Token, Pos)>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        match c {
            '%' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
            }
            c if c.is_whitespace() => {
                bump(&mut chars);
            }
            '(' | ')' | '{' | '}' | ',' | '.' => {
                bump(&mut chars);
                let tok = match c {
                    '(' => Token::LParen,
                    ')' => Token::RParen,
                    '{' => Token::LBrace,
                    '}' => Token::RBrace,
                    ',' => Token::Comma,
                    _ => Token::Dot,
                };
                out.push((tok, pos));
            }
            ':' => {
                bump(&mut chars);
                if chars.peek() == Some(&'-') {
                    bump(&mut chars);
                    out.push((Token::Neck, pos));
                } else {
                    return Err(Error::Parse {
                        line: pos.line,
                        column: pos.column,
                        message: "expected `:-`".into(),
                    });
                }
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        ident.push(c);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                out.push((Token::Ident(ident), pos));
            }
            other => {
                return Err(Error::Parse {
                    line: pos.line,
                    column: pos.column,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push((Token::Eof, Pos { line, column }));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at].0
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].1
    }

    fn next(&mut self) -> Token {
        let tok = self.tokens[self.at].0.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        tok
    }

    fn error(&self, message: String) -> Error {
        let pos = self.pos();
        Error::Parse {
            line: pos.line,
            column: pos.column,
            message,
        }
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            )))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Token::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.error(format!("expected a name, found {}", other.describe()))),
        }
    }

    fn literal(&mut self) -> Result<Literal> {
        let predicate = self.ident()?;
        if predicate.starts_with(|c: char| c.is_ascii_uppercase() || c == '_') {
            return Err(self.error(format!("predicate `{predicate}` must start lowercase")));
        }
        self.expect(Token::LParen)?;
        let mut args = vec![Term::parse(&self.ident()?)];
        while *self.peek() == Token::Comma {
            self.next();
            args.push(Term::parse(&self.ident()?));
        }
        self.expect(Token::RParen)?;
        let lit = Literal { predicate, args };
        if lit.arity() > 2 {
            return Err(Error::Arity(lit.to_string()));
        }
        Ok(lit)
    }

    fn clause(&mut self) -> Result<Clause> {
        let head = self.literal()?;
        let mut body = Vec::new();
        if *self.peek() == Token::Neck {
            self.next();
            body.push(self.literal()?);
            while *self.peek() == Token::Comma {
                self.next();
                body.push(self.literal()?);
            }
        }
        let mut rule_id = None;
        if *self.peek() == Token::LBrace {
            self.next();
            let id = self.ident()?;
            if id.starts_with(|c: char| c.is_ascii_uppercase() || c == '_') {
                return Err(self.error(format!("rule id `{id}` must be a constant")));
            }
            rule_id = Some(id);
            self.expect(Token::RBrace)?;
        }
        self.expect(Token::Dot)?;
        Ok(Clause {
            head,
            body,
            rule_id,
        })
    }
}

/// Parses a rule file into clauses, in file order.
pub fn parse_rules(text: &str) -> Result<Theory> {
    let mut parser = Parser {
        tokens: tokenize(text)?,
        at: 0,
    };
    let mut clauses = Vec::new();
    while *parser.peek() != Token::Eof {
        clauses.push(parser.clause()?);
    }
    Ok(Theory { clauses })
}

/// Parses a single literal such as `uncle(liam,Y)`.
pub fn parse_literal(text: &str) -> Result<Literal> {
    let mut parser = Parser {
        tokens: tokenize(text)?,
        at: 0,
    };
    let lit = parser.literal()?;
    if *parser.peek() != Token::Eof {
        return Err(parser.error(format!(
            "unexpected {} after literal",
            parser.peek().describe()
        )));
    }
    Ok(lit)
}
