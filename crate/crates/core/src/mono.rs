//! The monolithic semantics: one configuration holding every engine's
//! storage, stack, mempool and program next to a single shared global store.
//!
//! Global transactions sit at the head of every engine's program and are
//! executed once, jointly, consuming all of those heads. A relayed global
//! transaction is broadcast into every engine's mempool. Rule bodies are the
//! ones in [`crate::comp`]; this module only arranges their inputs and
//! distributes their effects.

use std::fmt::Write as _;

use crate::bridge::{gprefix, gtx, ltx};
use crate::comp::{
    declare_state_global, declare_state_local, exec_tx_global, exec_tx_local, EngineState, Env,
    GlobalState, RelayLabel, RelayTx, TxSet,
};
use crate::dump;
use crate::faults::Fault;
use crate::store::{AddrVal, ByteStore, MemStack};
use crate::syntax::{Contract, InitTarget, Scope, StateInit};
use crate::system::{
    check_senders, init_range, init_store, Program, StepKind, StepRecord, SystemError, DRAIN_BLOCKS,
};

/// One engine's share of a monolithic configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MonoEngine {
    pub slots: Vec<ByteStore>,
    pub engine: ByteStore,
    pub mem: MemStack,
    pub mempool: TxSet,
    pub prog: Program,
}

impl MonoEngine {
    pub fn slot(&self, j: usize) -> &ByteStore {
        &self.slots[j - 1]
    }

    /// The storage part Ψ° together with the stack, i.e. σ° without G°.
    pub fn local_state(&self) -> (&[ByteStore], &ByteStore, &MemStack) {
        (&self.slots, &self.engine, &self.mem)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MonoConfig {
    pub engines: Vec<MonoEngine>,
    pub g: ByteStore,
}

impl MonoConfig {
    pub fn n(&self) -> usize {
        self.engines.len()
    }

    pub fn engine(&self, i: usize) -> &MonoEngine {
        &self.engines[i - 1]
    }

    pub fn engine_mut(&mut self, i: usize) -> &mut MonoEngine {
        &mut self.engines[i - 1]
    }

    /// Every program has the same global prefix.
    pub fn is_wf(&self) -> bool {
        let mut prefixes = self.engines.iter().map(|e| gprefix(&e.prog));
        match prefixes.next() {
            Some(first) => prefixes.all(|p| p == first),
            None => true,
        }
    }

    /// Global relays pending in every mempool are identical.
    pub fn gtx_agree(&self) -> bool {
        let mut sets = self.engines.iter().map(|e| gtx(&e.mempool));
        match sets.next() {
            Some(first) => sets.all(|s| s == first),
            None => true,
        }
    }

    /// While a global prefix is pending, all stacks agree.
    pub fn stacks_agree(&self) -> bool {
        let Some(first) = self.engines.first() else {
            return true;
        };
        gprefix(&first.prog).is_empty() || self.engines.iter().all(|e| e.mem == first.mem)
    }

    pub fn at_boundary(&self) -> bool {
        self.engines.iter().all(|e| e.mem.is_empty())
    }

    pub fn programs_empty(&self) -> bool {
        self.engines.iter().all(|e| e.prog.is_empty())
    }

    pub fn mempools_empty(&self) -> bool {
        self.engines.iter().all(|e| e.mempool.is_empty())
    }

    /// Common global prefix; meaningful when [`MonoConfig::is_wf`] holds.
    pub fn common_gprefix(&self) -> &[crate::comp::Transaction] {
        self.engines.first().map_or(&[], |e| gprefix(&e.prog))
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("engines:\n");
        for (idx, e) in self.engines.iter().enumerate() {
            let _ = writeln!(out, "  engines[{}]:", idx + 1);
            out.push_str("    psi:\n");
            for (j, s) in e.slots.iter().enumerate() {
                let _ = writeln!(out, "      slot[{}]: {}", j + 1, dump::store(s));
            }
            let _ = writeln!(out, "      engine: {}", dump::store(&e.engine));
            dump::stack(&mut out, 4, "mem", &e.mem);
        }
        out.push_str("mempools:\n");
        for (idx, e) in self.engines.iter().enumerate() {
            let _ = writeln!(out, "  engines[{}]: {}", idx + 1, dump::txset(&e.mempool));
        }
        out.push_str("global:\n");
        let _ = writeln!(out, "  g: {}", dump::store(&self.g));
        out.push_str("programs:\n");
        for (idx, e) in self.engines.iter().enumerate() {
            let _ = writeln!(out, "  engines[{}]: {}", idx + 1, dump::program(&e.prog));
        }
        out
    }

    pub fn hash(&self) -> String {
        dump::hash(&self.dump())
    }
}

pub fn deploy(contract: &Contract, n: usize, k: usize) -> Result<MonoConfig, SystemError> {
    let mut global = GlobalState::new();
    let mut engines = Vec::with_capacity(n);
    for decl in contract
        .state_vars
        .iter()
        .filter(|d| d.scope == Scope::Global)
    {
        declare_state_global(&mut global, decl).map_err(SystemError::Deploy)?;
    }
    for _ in 0..n {
        let mut st = EngineState::new(k);
        for decl in contract
            .state_vars
            .iter()
            .filter(|d| d.scope != Scope::Global)
        {
            declare_state_local(&mut st, decl).map_err(SystemError::Deploy)?;
        }
        engines.push(MonoEngine {
            slots: st.slots,
            engine: st.engine,
            mem: MemStack::new(),
            mempool: TxSet::new(),
            prog: Program::new(),
        });
    }
    Ok(MonoConfig {
        engines,
        g: global.g,
    })
}

pub fn apply_inits(c: &mut MonoConfig, inits: &[StateInit]) -> Result<(), SystemError> {
    let n = c.n();
    for init in inits {
        match init.target {
            InitTarget::Address(AddrVal { engine, slot }) => {
                if engine == 0 || engine > n || slot == 0 || slot > c.engine(engine).slots.len() {
                    return Err(init_range(init, "address"));
                }
                init_store(&mut c.engine_mut(engine).slots[slot - 1], init)?;
            }
            InitTarget::Engine(i) => {
                if i == 0 || i > n {
                    return Err(init_range(init, "engine"));
                }
                init_store(&mut c.engine_mut(i).engine, init)?;
            }
            InitTarget::Global => init_store(&mut c.g, init)?,
        }
    }
    Ok(())
}

/// Distributes a step's label: local relays to their target engines, global
/// relays to every engine (or only to `origin` under the broadcast fault).
fn deliver(c: &mut MonoConfig, label: &RelayLabel, origin: Option<usize>, env: &Env) {
    for (e, w) in c.engines.iter_mut().zip(&label.engines) {
        e.mempool.extend(w.iter().cloned());
    }
    let targets: Vec<usize> = match origin {
        Some(i) if env.has_fault(Fault::SkipGlobalBroadcast) => vec![i],
        _ => (1..=c.n()).collect(),
    };
    for i in targets {
        c.engine_mut(i).mempool.extend(label.global.iter().cloned());
    }
}

fn check_wf(c: &MonoConfig) -> Result<(), SystemError> {
    if c.is_wf() {
        Ok(())
    } else {
        Err(SystemError::NotWellFormed)
    }
}

/// Joint execution of the common global head against the shared store.
pub fn mono_exec_tx_global(
    c: &MonoConfig,
    env: &Env,
) -> Result<(MonoConfig, StepRecord), SystemError> {
    check_wf(c)?;
    let Some(tx) = c.common_gprefix().first().cloned() else {
        return Err(SystemError::Precondition(
            "no pending global transaction".into(),
        ));
    };
    if !c.at_boundary() {
        return Err(SystemError::Precondition("stacks are not empty".into()));
    }
    let mut next = c.clone();
    for e in &mut next.engines {
        e.prog.remove(0);
    }
    let st = GlobalState {
        g: c.g.clone(),
        mem: MemStack::new(),
    };
    let record = match exec_tx_global(&st, &tx, env) {
        Ok(out) => {
            next.g = out.state.g;
            deliver(&mut next, &out.label, None, env);
            StepRecord {
                kind: StepKind::Global,
                tx,
                label: out.label,
                outcome: Ok(out.value),
            }
        }
        Err(e) => StepRecord {
            kind: StepKind::Global,
            tx,
            label: RelayLabel::empty(c.n()),
            outcome: Err(e),
        },
    };
    Ok((next, record))
}

/// Engine `i` runs its head local transaction with read-only access to G°.
pub fn mono_exec_tx_local(
    c: &MonoConfig,
    i: usize,
    env: &Env,
) -> Result<(MonoConfig, StepRecord), SystemError> {
    check_wf(c)?;
    if !c.common_gprefix().is_empty() {
        return Err(SystemError::Precondition(
            "local step while a global prefix is pending".into(),
        ));
    }
    if i == 0 || i > c.n() {
        return Err(SystemError::Precondition(format!("no engine {i}")));
    }
    let e = c.engine(i);
    let Some(tx) = e.prog.first().cloned() else {
        return Err(SystemError::Precondition(format!(
            "engine {i} has no pending transaction"
        )));
    };
    if !e.mem.is_empty() {
        return Err(SystemError::Precondition(format!(
            "engine {i} stack is not empty"
        )));
    }
    let st = EngineState {
        slots: e.slots.clone(),
        engine: e.engine.clone(),
        mem: e.mem.clone(),
        gview: c.g.clone(),
    };
    let mut next = c.clone();
    next.engine_mut(i).prog.remove(0);
    let record = match exec_tx_local(&st, &tx, env, i) {
        Ok(out) => {
            let me = next.engine_mut(i);
            me.slots = out.state.slots;
            me.engine = out.state.engine;
            me.mem = out.state.mem;
            deliver(&mut next, &out.label, Some(i), env);
            StepRecord {
                kind: StepKind::Local(i),
                tx,
                label: out.label,
                outcome: Ok(out.value),
            }
        }
        Err(err) => StepRecord {
            kind: StepKind::Local(i),
            tx,
            label: RelayLabel::empty(c.n()),
            outcome: Err(err),
        },
    };
    Ok((next, record))
}

/// Engine that [`mono_step`] dispatches next: `None` for a joint global step.
pub fn next_dispatch(c: &MonoConfig) -> Result<Option<usize>, SystemError> {
    if !c.common_gprefix().is_empty() {
        return Ok(None);
    }
    (1..=c.n())
        .find(|&i| !c.engine(i).prog.is_empty())
        .map(Some)
        .ok_or(SystemError::NoPendingWork)
}

/// One transaction step: the common global head if any, otherwise the
/// lowest-index engine with pending work.
pub fn mono_step(c: &MonoConfig, env: &Env) -> Result<(MonoConfig, StepRecord), SystemError> {
    check_wf(c)?;
    match next_dispatch(c)? {
        None => mono_exec_tx_global(c, env),
        Some(i) => mono_exec_tx_local(c, i, env),
    }
}

fn sorted(set: &TxSet) -> Vec<&RelayTx> {
    let mut v: Vec<_> = set.iter().collect();
    v.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    v
}

/// Drains every mempool into that engine's program: its global relays
/// first, then its local relays, then its user transactions.
pub fn install_block(
    c: &MonoConfig,
    block: &[crate::comp::Transaction],
) -> Result<MonoConfig, SystemError> {
    if !c.programs_empty() {
        return Err(SystemError::Precondition(
            "a block is installed while programs are pending".into(),
        ));
    }
    let k = c.engines.first().map_or(0, |e| e.slots.len());
    check_senders(block, c.n(), k)?;
    let mut next = c.clone();
    for (idx, e) in next.engines.iter_mut().enumerate() {
        let i = idx + 1;
        let globals = gtx(&e.mempool);
        let locals = ltx(&e.mempool);
        e.prog = sorted(&globals)
            .into_iter()
            .chain(sorted(&locals))
            .map(|r| r.to_transaction(i))
            .chain(
                block
                    .iter()
                    .filter(|tx| tx.sender.map(|s| s.engine) == Some(i))
                    .cloned(),
            )
            .collect();
        e.mempool.clear();
    }
    Ok(next)
}

pub type MonoObserver<'a> = dyn FnMut(&StepRecord, &MonoConfig) + 'a;

pub fn run_block(
    c: &MonoConfig,
    block: &[crate::comp::Transaction],
    env: &Env,
    obs: &mut MonoObserver<'_>,
) -> Result<MonoConfig, SystemError> {
    let mut cur = install_block(c, block)?;
    while !cur.programs_empty() {
        let (next, rec) = mono_step(&cur, env)?;
        obs(&rec, &next);
        cur = next;
    }
    Ok(cur)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoRunSummary {
    pub config: MonoConfig,
    pub blocks: usize,
    pub steps: usize,
    pub aborted: usize,
}

/// Runs the schedule's blocks, then empty blocks while relays are pending,
/// up to `max_blocks` (default: schedule length plus a few drain blocks).
pub fn run_schedule(
    c: &MonoConfig,
    blocks: &[Vec<crate::comp::Transaction>],
    env: &Env,
    max_blocks: Option<usize>,
    obs: &mut MonoObserver<'_>,
) -> Result<MonoRunSummary, SystemError> {
    let limit = max_blocks.unwrap_or(blocks.len() + DRAIN_BLOCKS);
    let mut cur = c.clone();
    let (mut steps, mut aborted, mut run) = (0, 0, 0);
    let empty = Vec::new();
    while run < limit && (run < blocks.len() || !cur.mempools_empty()) {
        let block = blocks.get(run).unwrap_or(&empty);
        cur = run_block(
            &cur,
            block,
            env,
            &mut |rec: &StepRecord, post: &MonoConfig| {
                steps += 1;
                aborted += usize::from(rec.aborted());
                obs(rec, post);
            },
        )?;
        run += 1;
    }
    Ok(MonoRunSummary {
        config: cur,
        blocks: run,
        steps,
        aborted,
    })
}
