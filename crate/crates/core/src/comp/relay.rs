use std::collections::BTreeSet;
use std::fmt;

use crate::store::{AddrVal, Value};

/// A pending function call placed in a mempool by a relay.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelayTx {
    Address {
        slot: usize,
        func: String,
        args: Vec<Value>,
    },
    Engine {
        func: String,
        args: Vec<Value>,
    },
    Global {
        func: String,
        args: Vec<Value>,
    },
}

impl RelayTx {
    pub fn func(&self) -> &str {
        match self {
            RelayTx::Address { func, .. }
            | RelayTx::Engine { func, .. }
            | RelayTx::Global { func, .. } => func,
        }
    }

    pub fn args(&self) -> &[Value] {
        match self {
            RelayTx::Address { args, .. }
            | RelayTx::Engine { args, .. }
            | RelayTx::Global { args, .. } => args,
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self, RelayTx::Global { .. })
    }

    /// Canonical drain order: function name, then argument values.
    pub fn sort_key(&self) -> (&str, &[Value], u8, usize) {
        let (rank, slot) = match self {
            RelayTx::Address { slot, .. } => (0, *slot),
            RelayTx::Engine { .. } => (1, 0),
            RelayTx::Global { .. } => (2, 0),
        };
        (self.func(), self.args(), rank, slot)
    }

    /// The transaction executed when this relay is drained into engine
    /// `engine`'s program. Engine-scope relays run from executor slot 1.
    pub fn to_transaction(&self, engine: usize) -> Transaction {
        let sender = match self {
            RelayTx::Address { slot, .. } => Some(AddrVal::new(engine, *slot)),
            RelayTx::Engine { .. } => Some(AddrVal::new(engine, 1)),
            RelayTx::Global { .. } => None,
        };
        Transaction {
            func: self.func().to_string(),
            args: self.args().to_vec(),
            sender,
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Value]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

impl fmt::Display for RelayTx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelayTx::Address { slot, func, args } => {
                write!(f, "(address,{slot},{func}(")?;
                write_args(f, args)?;
                f.write_str("))")
            }
            RelayTx::Engine { func, args } => {
                write!(f, "(engine,{func}(")?;
                write_args(f, args)?;
                f.write_str("))")
            }
            RelayTx::Global { func, args } => {
                write!(f, "(global,{func}(")?;
                write_args(f, args)?;
                f.write_str("))")
            }
        }
    }
}

pub type TxSet = BTreeSet<RelayTx>;

/// Relay transactions emitted by one step: one set per engine plus the
/// global set. The all-empty label is the silent (τ) label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelayLabel {
    pub engines: Vec<TxSet>,
    pub global: TxSet,
}

impl RelayLabel {
    pub fn empty(n: usize) -> Self {
        Self {
            engines: vec![TxSet::new(); n],
            global: TxSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.engines.len()
    }

    pub fn is_tau(&self) -> bool {
        self.global.is_empty() && self.engines.iter().all(BTreeSet::is_empty)
    }

    /// Set for engine `i` (1-based).
    pub fn engine(&self, i: usize) -> &TxSet {
        &self.engines[i - 1]
    }

    pub fn union_with(&mut self, other: &RelayLabel) {
        debug_assert_eq!(self.n(), other.n());
        for (mine, theirs) in self.engines.iter_mut().zip(&other.engines) {
            mine.extend(theirs.iter().cloned());
        }
        self.global.extend(other.global.iter().cloned());
    }

    pub fn union(mut self, other: &RelayLabel) -> Self {
        self.union_with(other);
        self
    }

    /// Number of transactions per component, engines first then global.
    pub fn counts(&self) -> Vec<usize> {
        self.engines
            .iter()
            .map(BTreeSet::len)
            .chain(std::iter::once(self.global.len()))
            .collect()
    }
}

/// A T-function call: a whole transaction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transaction {
    pub func: String,
    pub args: Vec<Value>,
    /// Sending address; `None` for global transactions.
    pub sender: Option<AddrVal>,
}

impl Transaction {
    pub fn local(func: impl Into<String>, args: Vec<Value>, sender: AddrVal) -> Self {
        Self {
            func: func.into(),
            args,
            sender: Some(sender),
        }
    }

    pub fn global(func: impl Into<String>, args: Vec<Value>) -> Self {
        Self {
            func: func.into(),
            args,
            sender: None,
        }
    }

    /// Global transactions are exactly those without a sender.
    pub fn is_global(&self) -> bool {
        self.sender.is_none()
    }
}

impl fmt::Display for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.func)?;
        write_args(f, &self.args)?;
        f.write_str(")")?;
        if let Some(s) = self.sender {
            write!(f, "@{s}")?;
        }
        Ok(())
    }
}
