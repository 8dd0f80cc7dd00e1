//! Recursive descent parser for contract source text.

use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{tokenize, Pos, Tok, Token};
use super::ParseError;

/// Parses a single contract. The whole input must be consumed.
pub fn parse_contract(source: &str) -> Result<Contract, ParseError> {
    let mut p = Parser::new(tokenize(source)?);
    let contract = p.contract()?;
    p.expect(Tok::Eof)?;
    check_names(&contract)?;
    Ok(contract)
}

/// Parses a standalone expression (used by tests and the schedule reader).
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(tokenize(source)?);
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

fn check_names(c: &Contract) -> Result<(), ParseError> {
    let mut seen = BTreeSet::new();
    for v in &c.state_vars {
        if !seen.insert(v.name.as_str()) {
            return Err(ParseError::DuplicateStateVar(v.name.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    for f in &c.funcs {
        if !seen.insert(f.name.as_str()) {
            return Err(ParseError::DuplicateFunction(f.name.clone()));
        }
        let mut params = BTreeSet::new();
        for p in &f.params {
            if !params.insert(p.name.as_str()) {
                return Err(ParseError::DuplicateParam {
                    func: f.name.clone(),
                    param: p.name.clone(),
                });
            }
        }
    }
    Ok(())
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Self { toks, at: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.at + ahead).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::Unexpected {
            pos: self.pos(),
            found: self.peek().describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.unexpected(&[t.spelling()]))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn ty(&mut self) -> Result<TypeTag, ParseError> {
        match self.peek() {
            Tok::IntTy => {
                self.advance();
                Ok(TypeTag::Int)
            }
            Tok::AddressTy => {
                self.advance();
                Ok(TypeTag::Address)
            }
            _ => Err(self.unexpected(&["int", "address"])),
        }
    }

    fn scope(&mut self) -> Result<Scope, ParseError> {
        self.expect(Tok::At)?;
        let s = match self.peek() {
            Tok::AddressTy => Scope::Address,
            Tok::EngineKw => Scope::Engine,
            Tok::GlobalKw => Scope::Global,
            _ => return Err(self.unexpected(&["address", "engine", "global"])),
        };
        self.advance();
        Ok(s)
    }

    fn contract(&mut self) -> Result<Contract, ParseError> {
        self.expect(Tok::Contract)?;
        let name = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut state_vars = Vec::new();
        while matches!(self.peek(), Tok::IntTy | Tok::AddressTy) {
            let ty = self.ty()?;
            let scope = self.scope()?;
            let name = self.ident()?;
            self.expect(Tok::Semi)?;
            state_vars.push(StateVarDecl { ty, scope, name });
        }
        let mut funcs = Vec::new();
        loop {
            match self.peek() {
                Tok::Function => funcs.push(self.func()?),
                Tok::RBrace => break,
                _ => {
                    let expected: &[&str] = if funcs.is_empty() {
                        &["int", "address", "function", "}"]
                    } else {
                        &["function", "}"]
                    };
                    return Err(self.unexpected(expected));
                }
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(Contract {
            name,
            state_vars,
            funcs,
        })
    }

    fn func(&mut self) -> Result<FuncDecl, ParseError> {
        self.expect(Tok::Function)?;
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let ty = self.ty()?;
                let name = self.ident()?;
                params.push(Param { ty, name });
                if self.eat(&Tok::RParen) {
                    break;
                }
                if !self.eat(&Tok::Comma) {
                    return Err(self.unexpected(&[",", ")"]));
                }
            }
        }
        let scope = self.scope()?;
        let ret = if self.eat(&Tok::Returns) {
            match self.peek() {
                Tok::IntTy | Tok::AddressTy => Some(self.ty()?),
                _ => None,
            }
        } else {
            None
        };
        let body = self.block()?;
        Ok(FuncDecl {
            name,
            params,
            scope,
            ret,
            body,
        })
    }

    fn block(&mut self) -> Result<Stmt, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while !self.eat(&Tok::RBrace) {
            stmts.push(self.stmt()?);
        }
        Ok(Stmt::block(stmts))
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        match self.peek().clone() {
            Tok::IntTy | Tok::AddressTy => {
                let ty = self.ty()?;
                let name = self.ident()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::TempVarDecl(ty, name))
            }
            Tok::Skip => {
                self.advance();
                self.eat(&Tok::Semi);
                Ok(Stmt::Skip)
            }
            Tok::If => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Then)?;
                let then_b = self.block()?;
                self.expect(Tok::Else)?;
                let else_b = self.block()?;
                Ok(Stmt::If(cond, Box::new(then_b), Box::new(else_b)))
            }
            Tok::While => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let body = self.block()?;
                Ok(Stmt::While(cond, Box::new(body)))
            }
            Tok::Relay => {
                self.advance();
                self.expect(Tok::At)?;
                let target = match self.peek() {
                    Tok::EnginesKw => {
                        self.advance();
                        RelayTarget::Engines
                    }
                    Tok::GlobalKw => {
                        self.advance();
                        RelayTarget::Global
                    }
                    _ => RelayTarget::At(self.expr()?),
                };
                let func = self.ident()?;
                let args = self.args()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Relay { target, func, args })
            }
            Tok::Return => {
                self.advance();
                if self.eat(&Tok::Semi) {
                    return Ok(Stmt::Return(None));
                }
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Return(Some(e)))
            }
            Tok::Ident(name) => match self.peek_at(1) {
                Tok::Assign | Tok::EqSign => {
                    self.advance();
                    self.advance();
                    let e = self.expr()?;
                    self.expect(Tok::Semi)?;
                    Ok(Stmt::Assign(name, e))
                }
                Tok::LParen => {
                    self.advance();
                    let args = self.args()?;
                    self.eat(&Tok::Semi);
                    Ok(Stmt::Call(name, args))
                }
                _ => {
                    self.advance();
                    Err(self.unexpected(&[":=", "=", "("]))
                }
            },
            _ => Err(self.unexpected(&[
                "int",
                "address",
                "skip",
                "if",
                "while",
                "relay",
                "return",
                "identifier",
                "}",
            ])),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            if !self.eat(&Tok::Comma) {
                return Err(self.unexpected(&[",", ")"]));
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Le => BinOp::Le,
            Tok::Lt => BinOp::Lt,
            Tok::EqSign => BinOp::Eq,
            Tok::Ge => BinOp::Ge,
            Tok::Gt => BinOp::Gt,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.additive()?;
        Ok(Expr::bin(op, lhs, rhs))
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.atom()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.atom()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::IntLit(v))
            }
            Tok::Addr => {
                self.advance();
                self.expect(Tok::LParen)?;
                let r = self.index()?;
                self.expect(Tok::Comma)?;
                let j = self.index()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::AddrLit(r, j))
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    let args = self.args()?;
                    Ok(Expr::Call(name, args))
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.unexpected(&["identifier", "integer", "addr", "("])),
        }
    }

    fn index(&mut self) -> Result<usize, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                usize::try_from(&v).map_err(|_| ParseError::Unexpected {
                    pos,
                    found: format!("integer `{v}`"),
                    expected: vec!["index".into()],
                })
            }
            _ => Err(self.unexpected(&["integer"])),
        }
    }
}
