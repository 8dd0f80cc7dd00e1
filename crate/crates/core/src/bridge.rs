//! Translations between monolithic and compositional configurations, with
//! the projections they are built from.

use thiserror::Error;

use crate::comp::{EngineState, GlobalState, Transaction, TxSet};
use crate::mono::{MonoConfig, MonoEngine};
use crate::store::MemStack;
use crate::system::{EngineComponent, GlobalComponent, Mempools, SystemConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BridgeError {
    #[error("configuration is not well formed")]
    NotWellFormed,
    #[error("engine mempools disagree on pending global relays")]
    GlobalRelayDisagreement,
    #[error("global call `{0}` follows a local call")]
    ConventionViolation(String),
}

/// Longest prefix made of global calls.
pub fn gprefix(p: &[Transaction]) -> &[Transaction] {
    let end = p.iter().position(|t| !t.is_global()).unwrap_or(p.len());
    &p[..end]
}

/// What remains after [`gprefix`].
pub fn lsuffix(p: &[Transaction]) -> &[Transaction] {
    &p[gprefix(p).len()..]
}

/// Splits a program into its global prefix and local suffix, rejecting
/// programs where a global call comes after a local one.
pub fn split_program(p: &[Transaction]) -> Result<(&[Transaction], &[Transaction]), BridgeError> {
    let (g, l) = (gprefix(p), lsuffix(p));
    if let Some(t) = l.iter().find(|t| t.is_global()) {
        return Err(BridgeError::ConventionViolation(t.to_string()));
    }
    Ok((g, l))
}

pub fn gtx(s: &TxSet) -> TxSet {
    s.iter().filter(|r| r.is_global()).cloned().collect()
}

pub fn ltx(s: &TxSet) -> TxSet {
    s.iter().filter(|r| !r.is_global()).cloned().collect()
}

pub fn wf(c: &SystemConfig) -> bool {
    c.is_wf()
}

pub fn wf_o(c: &MonoConfig) -> bool {
    c.is_wf()
}

/// All memory stacks of a configuration are empty.
pub trait Boundary {
    fn is_boundary(&self) -> bool;
}

impl Boundary for SystemConfig {
    fn is_boundary(&self) -> bool {
        self.at_boundary()
    }
}

impl Boundary for MonoConfig {
    fn is_boundary(&self) -> bool {
        self.at_boundary()
    }
}

pub fn is_boundary<C: Boundary>(c: &C) -> bool {
    c.is_boundary()
}

pub fn enc(c: &MonoConfig) -> Result<SystemConfig, BridgeError> {
    if !c.is_wf() {
        return Err(BridgeError::NotWellFormed);
    }
    if !c.gtx_agree() {
        return Err(BridgeError::GlobalRelayDisagreement);
    }
    let prog_g: Vec<Transaction> = c.common_gprefix().to_vec();
    let global_running = !prog_g.is_empty();
    let mut engines = Vec::with_capacity(c.n());
    let mut pools = Vec::with_capacity(c.n());
    for e in &c.engines {
        let (_, local) = split_program(&e.prog)?;
        engines.push(EngineComponent {
            state: EngineState {
                slots: e.slots.clone(),
                engine: e.engine.clone(),
                mem: if global_running {
                    MemStack::new()
                } else {
                    e.mem.clone()
                },
                gview: c.g.clone(),
            },
            prog: local.to_vec(),
        });
        pools.push(ltx(&e.mempool));
    }
    let global_mem = match c.engines.first() {
        Some(e) if global_running => e.mem.clone(),
        _ => MemStack::new(),
    };
    Ok(SystemConfig {
        engines,
        mempools: Mempools {
            engines: pools,
            global: c
                .engines
                .first()
                .map(|e| gtx(&e.mempool))
                .unwrap_or_default(),
        },
        global: GlobalComponent {
            state: GlobalState {
                g: c.g.clone(),
                mem: global_mem,
            },
            prog: prog_g,
        },
    })
}

pub fn dec(c: &SystemConfig) -> Result<MonoConfig, BridgeError> {
    if !c.is_wf() {
        return Err(BridgeError::NotWellFormed);
    }
    if let Some(t) = c.global.prog.iter().find(|t| !t.is_global()) {
        return Err(BridgeError::ConventionViolation(t.to_string()));
    }
    let global_running = !c.global.prog.is_empty();
    let mut engines = Vec::with_capacity(c.n());
    for (e, pool) in c.engines.iter().zip(&c.mempools.engines) {
        if let Some(t) = e.prog.iter().find(|t| t.is_global()) {
            return Err(BridgeError::ConventionViolation(t.to_string()));
        }
        let mut mempool = pool.clone();
        mempool.extend(c.mempools.global.iter().cloned());
        engines.push(MonoEngine {
            slots: e.state.slots.clone(),
            engine: e.state.engine.clone(),
            mem: if global_running {
                c.global.state.mem.clone()
            } else {
                e.state.mem.clone()
            },
            mempool,
            prog: c.global.prog.iter().chain(&e.prog).cloned().collect(),
        });
    }
    Ok(MonoConfig {
        engines,
        g: c.global.state.g.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comp::RelayTx;
    use crate::store::{AddrVal, Value};

    fn upd(v: i64) -> Transaction {
        Transaction::global("updateTotal", vec![Value::int(v)])
    }

    fn dep(v: i64, e: usize, j: usize) -> Transaction {
        Transaction::local("deposit", vec![Value::int(v)], AddrVal::new(e, j))
    }

    #[test]
    fn program_split() {
        let p = vec![upd(3), upd(2), dep(2, 1, 2)];
        assert_eq!(gprefix(&p), &p[..2]);
        assert_eq!(lsuffix(&p), &p[2..]);
        let empty: Vec<Transaction> = vec![];
        assert!(gprefix(&empty).is_empty() && lsuffix(&empty).is_empty());
        let local = vec![dep(1, 1, 1), dep(2, 1, 1)];
        assert!(gprefix(&local).is_empty());
        assert_eq!(lsuffix(&local), &local[..]);
        let bad = vec![dep(1, 1, 1), upd(1)];
        assert!(matches!(
            split_program(&bad),
            Err(BridgeError::ConventionViolation(_))
        ));
    }

    #[test]
    fn mempool_projection() {
        let set: TxSet = [
            RelayTx::Address {
                slot: 2,
                func: "deposit".into(),
                args: vec![Value::int(2)],
            },
            RelayTx::Global {
                func: "updateTotal".into(),
                args: vec![Value::int(3)],
            },
            RelayTx::Global {
                func: "updateTotal".into(),
                args: vec![Value::int(2)],
            },
        ]
        .into_iter()
        .collect();
        assert_eq!(ltx(&set).len(), 1);
        assert_eq!(gtx(&set).len(), 2);
        assert!(gtx(&set).iter().all(RelayTx::is_global));
        assert!(ltx(&TxSet::new()).is_empty() && gtx(&TxSet::new()).is_empty());
    }
}
