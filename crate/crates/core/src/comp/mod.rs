//! Component-level semantics: expression evaluation, statement execution and
//! whole-transaction execution inside one engine or inside the global
//! component. Every step reports the relay transactions it emitted.

mod interp;
mod relay;
mod state;

use std::collections::BTreeMap;

use thiserror::Error;

pub use relay::{RelayLabel, RelayTx, Transaction, TxSet};
pub use state::{EngineState, GlobalState};

use crate::faults::Fault;
use crate::store::{StoreError, Value};
use crate::syntax::{Contract, Expr, FuncDecl, Scope, StateVarDecl, Stmt};

use interp::{EngineComp, GlobalComp, Interp};

/// Default statement budget for one transaction.
pub const DEFAULT_FUEL: u64 = 200_000;

/// Function lookup derived from a contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionTable {
    by_name: BTreeMap<String, FuncDecl>,
}

impl FunctionTable {
    pub fn new(contract: &Contract) -> Self {
        Self {
            by_name: contract
                .funcs
                .iter()
                .map(|f| (f.name.clone(), f.clone()))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&FuncDecl> {
        self.by_name.get(name)
    }

    pub fn scope(&self, name: &str) -> Option<Scope> {
        self.get(name).map(|f| f.scope)
    }

    pub fn lookup(&self, name: &str) -> Result<&FuncDecl, ExecError> {
        self.get(name)
            .ok_or_else(|| ExecError::UnknownFunction(name.to_string()))
    }
}

/// Everything a step needs besides the configuration itself.
#[derive(Debug, Clone)]
pub struct Env {
    pub table: FunctionTable,
    /// Number of engines.
    pub n: usize,
    /// Address slots per engine.
    pub k: usize,
    /// Statement budget per transaction.
    pub fuel: u64,
    pub fault: Option<Fault>,
}

impl Env {
    pub fn new(contract: &Contract, n: usize, k: usize) -> Self {
        assert!(n >= 1 && k >= 1, "need at least one engine and one slot");
        Self {
            table: FunctionTable::new(contract),
            n,
            k,
            fuel: DEFAULT_FUEL,
            fault: None,
        }
    }

    pub fn with_fault(mut self, fault: Option<Fault>) -> Self {
        self.fault = fault;
        self
    }

    pub fn has_fault(&self, f: Fault) -> bool {
        self.fault == Some(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("scope violation: {0}")]
    ScopeViolation(String),
    #[error("`{func}` expects {expected} argument(s), got {found}")]
    Arity {
        func: String,
        expected: usize,
        found: usize,
    },
    #[error("type error: {0}")]
    Type(String),
    #[error("relay target {0} is not a valid address")]
    BadRelayTarget(Value),
    #[error("relay arguments must evaluate silently without changing state")]
    RelayArgNotSilent,
    #[error("no rule applies: {0}")]
    NoRule(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("statement budget exhausted")]
    FuelExhausted,
}

/// Result of a completed transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOutcome<S> {
    pub state: S,
    pub label: RelayLabel,
    /// Return value for functions that declare a return type.
    pub value: Option<Value>,
}

fn check_engine(env: &Env, i: usize) -> Result<(), ExecError> {
    if i == 0 || i > env.n {
        return Err(ExecError::Precondition(format!(
            "engine {i} out of range 1..={}",
            env.n
        )));
    }
    Ok(())
}

pub fn eval_local(
    st: &EngineState,
    e: &Expr,
    env: &Env,
    i: usize,
) -> Result<(EngineState, Value, RelayLabel), ExecError> {
    check_engine(env, i)?;
    let mut comp = EngineComp::new(st.clone(), env.k);
    let (v, label) = Interp::new(env).eval(&mut comp, e)?;
    Ok((comp.into_state(), v, label))
}

pub fn eval_global(
    st: &GlobalState,
    e: &Expr,
    env: &Env,
) -> Result<(GlobalState, Value, RelayLabel), ExecError> {
    let mut comp = GlobalComp::new(st.clone());
    let (v, label) = Interp::new(env).eval(&mut comp, e)?;
    Ok((comp.into_state(), v, label))
}

pub fn step_local(
    st: &EngineState,
    s: &Stmt,
    env: &Env,
    i: usize,
) -> Result<(EngineState, RelayLabel), ExecError> {
    check_engine(env, i)?;
    let mut comp = EngineComp::new(st.clone(), env.k);
    let label = Interp::new(env).exec_stmt(&mut comp, s)?;
    Ok((comp.into_state(), label))
}

pub fn step_global(
    st: &GlobalState,
    s: &Stmt,
    env: &Env,
) -> Result<(GlobalState, RelayLabel), ExecError> {
    let mut comp = GlobalComp::new(st.clone());
    let label = Interp::new(env).exec_stmt(&mut comp, s)?;
    Ok((comp.into_state(), label))
}

/// Runs an address- or engine-scope transaction on engine `i`. On error the
/// input state is untouched: the transaction has no effect.
pub fn exec_tx_local(
    st: &EngineState,
    tx: &Transaction,
    env: &Env,
    i: usize,
) -> Result<TxOutcome<EngineState>, ExecError> {
    check_engine(env, i)?;
    if !st.mem.is_empty() {
        return Err(ExecError::Precondition("engine stack is not empty".into()));
    }
    let f = env.table.lookup(&tx.func)?;
    let frame_scope = match (f.scope, tx.sender) {
        (Scope::Global, _) => {
            return Err(ExecError::ScopeViolation(format!(
                "global function `{}` submitted to engine {i}",
                tx.func
            )))
        }
        (_, None) => {
            return Err(ExecError::Precondition(format!(
                "local transaction `{}` has no sender",
                tx.func
            )))
        }
        (_, Some(s)) if s.engine != i || s.slot == 0 || s.slot > env.k => {
            return Err(ExecError::Precondition(format!(
                "sender {s} is not an address of engine {i}"
            )))
        }
        (Scope::Address, Some(s)) => crate::store::FrameScope::Address(s.slot),
        (Scope::Engine, Some(_)) => crate::store::FrameScope::Engine,
    };
    let mut comp = EngineComp::new(st.clone(), env.k);
    let (label, value) = Interp::new(env).run_transaction(&mut comp, f, &tx.args, frame_scope)?;
    Ok(TxOutcome {
        state: comp.into_state(),
        label,
        value,
    })
}

/// Runs a global transaction. On error the input state is untouched.
pub fn exec_tx_global(
    st: &GlobalState,
    tx: &Transaction,
    env: &Env,
) -> Result<TxOutcome<GlobalState>, ExecError> {
    if !st.mem.is_empty() {
        return Err(ExecError::Precondition("global stack is not empty".into()));
    }
    let f = env.table.lookup(&tx.func)?;
    if f.scope != Scope::Global {
        return Err(ExecError::ScopeViolation(format!(
            "{} function `{}` submitted to the global component",
            f.scope, tx.func
        )));
    }
    let mut comp = GlobalComp::new(st.clone());
    let (label, value) = Interp::new(env).run_transaction(
        &mut comp,
        f,
        &tx.args,
        crate::store::FrameScope::Global,
    )?;
    Ok(TxOutcome {
        state: comp.into_state(),
        label,
        value,
    })
}

/// Deployment-time declaration of an address or engine state variable in one
/// engine (one instance per address slot for address scope).
pub fn declare_state_local(st: &mut EngineState, decl: &StateVarDecl) -> Result<(), ExecError> {
    match decl.scope {
        Scope::Address => {
            if st.slots.iter().any(|s| s.contains(&decl.name)) {
                return Err(StoreError::AlreadyDeclared(decl.name.clone()).into());
            }
            for slot in &mut st.slots {
                slot.declare(&decl.name, decl.ty)?;
            }
        }
        Scope::Engine => st.engine.declare(&decl.name, decl.ty)?,
        Scope::Global => {
            return Err(ExecError::ScopeViolation(format!(
                "global variable `{}` declared in an engine",
                decl.name
            )))
        }
    }
    Ok(())
}

/// Deployment-time declaration of a global state variable.
pub fn declare_state_global(st: &mut GlobalState, decl: &StateVarDecl) -> Result<(), ExecError> {
    if decl.scope != Scope::Global {
        return Err(ExecError::ScopeViolation(format!(
            "{} variable `{}` declared in the global component",
            decl.scope, decl.name
        )));
    }
    st.g.declare(&decl.name, decl.ty)?;
    Ok(())
}
