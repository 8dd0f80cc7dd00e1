//! Abstract syntax of Crystality contracts.

use std::fmt;

use num_bigint::BigInt;

/// Declared type of a variable, parameter or return slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeTag {
    Int,
    Address,
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Int => f.write_str("int"),
            TypeTag::Address => f.write_str("address"),
        }
    }
}

/// Visibility class of a state variable or function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    Address,
    Engine,
    Global,
}

impl Scope {
    pub fn is_global(self) -> bool {
        self == Scope::Global
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Address => f.write_str("@address"),
            Scope::Engine => f.write_str("@engine"),
            Scope::Global => f.write_str("@global"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Le => "<=",
            BinOp::Lt => "<",
            BinOp::Eq => "=",
            BinOp::Ge => ">=",
            BinOp::Gt => ">",
        }
    }

    pub fn is_comparison(self) -> bool {
        !matches!(self, BinOp::Add | BinOp::Sub)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Ident(String),
    Call(String, Vec<Expr>),
    /// Non-negative integer literal.
    IntLit(BigInt),
    /// `addr(r, j)`: the `j`-th address slot of engine `r`.
    AddrLit(usize, usize),
    BinOp(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn ident(name: impl Into<String>) -> Self {
        Expr::Ident(name.into())
    }

    pub fn int(v: impl Into<BigInt>) -> Self {
        Expr::IntLit(v.into())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Self {
        Expr::BinOp(op, Box::new(l), Box::new(r))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RelayTarget {
    /// `relay @ exp`: an address computed by the expression.
    At(Expr),
    /// `relay @ engines`: broadcast to every engine.
    Engines,
    /// `relay @ global`.
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    /// The empty program `·`.
    Empty,
    TempVarDecl(TypeTag, String),
    Skip,
    Assign(String, Expr),
    Relay {
        target: RelayTarget,
        func: String,
        args: Vec<Expr>,
    },
    Return(Option<Expr>),
    Call(String, Vec<Expr>),
    Seq(Box<Stmt>, Box<Stmt>),
    If(Expr, Box<Stmt>, Box<Stmt>),
    While(Expr, Box<Stmt>),
}

impl Stmt {
    /// Sequential composition with `·` as unit; keeps sequences right-nested.
    pub fn seq(first: Stmt, second: Stmt) -> Stmt {
        match (first, second) {
            (Stmt::Empty, s) | (s, Stmt::Empty) => s,
            (Stmt::Seq(a, b), s) => Stmt::seq(*a, Stmt::seq(*b, s)),
            (a, b) => Stmt::Seq(Box::new(a), Box::new(b)),
        }
    }

    /// Builds a right-nested sequence from a list of statements.
    pub fn block(stmts: impl IntoIterator<Item = Stmt>) -> Stmt {
        let stmts: Vec<Stmt> = stmts.into_iter().collect();
        stmts
            .into_iter()
            .rev()
            .fold(Stmt::Empty, |acc, s| Stmt::seq(s, acc))
    }

    /// Flattens a sequence back into its parts. `·` flattens to nothing.
    pub fn to_list(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        self.collect_into(&mut out);
        out
    }

    fn collect_into<'a>(&'a self, out: &mut Vec<&'a Stmt>) {
        match self {
            Stmt::Empty => {}
            Stmt::Seq(a, b) => {
                a.collect_into(out);
                b.collect_into(out);
            }
            s => out.push(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateVarDecl {
    pub ty: TypeTag,
    pub scope: Scope,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub ty: TypeTag,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FuncDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub scope: Scope,
    pub ret: Option<TypeTag>,
    pub body: Stmt,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Contract {
    pub name: String,
    pub state_vars: Vec<StateVarDecl>,
    pub funcs: Vec<FuncDecl>,
}

impl Contract {
    pub fn func(&self, name: &str) -> Option<&FuncDecl> {
        self.funcs.iter().find(|f| f.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVarDecl> {
        self.state_vars.iter().find(|v| v.name == name)
    }
}
