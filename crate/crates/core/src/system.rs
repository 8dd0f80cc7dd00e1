//! System-level semantics: mempools, configurations of engine and global
//! components, the global and local step relations, and block execution.

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::comp::{
    declare_state_global, declare_state_local, exec_tx_global, exec_tx_local, EngineState, Env,
    ExecError, GlobalState, RelayLabel, Transaction, TxSet,
};
use crate::dump;
use crate::faults::Fault;
use crate::store::{AddrVal, ByteStore, Value};
use crate::syntax::{Contract, InitTarget, Scope, StateInit};

pub use crate::syntax::BlockSchedule;

/// A pending list of T-function calls, head first.
pub type Program = Vec<Transaction>;

/// Per-engine mempools plus the virtual global mempool.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mempools {
    pub engines: Vec<TxSet>,
    pub global: TxSet,
}

impl Mempools {
    pub fn new(n: usize) -> Self {
        Self {
            engines: vec![TxSet::new(); n],
            global: TxSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.engines.len()
    }

    pub fn engine(&self, i: usize) -> &TxSet {
        &self.engines[i - 1]
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty() && self.engines.iter().all(TxSet::is_empty)
    }

    /// Componentwise `other ⊆ self`.
    pub fn includes(&self, other: &Mempools) -> bool {
        self.global.is_superset(&other.global)
            && self
                .engines
                .iter()
                .zip(&other.engines)
                .all(|(a, b)| a.is_superset(b))
    }
}

/// Merges a step's label into the mempools by componentwise union.
pub fn receive(om: &Mempools, lab: &RelayLabel) -> Mempools {
    let mut out = om.clone();
    for (pool, w) in out.engines.iter_mut().zip(&lab.engines) {
        pool.extend(w.iter().cloned());
    }
    out.global.extend(lab.global.iter().cloned());
    out
}

/// [`receive`] as performed by the system steps under `env`, injected
/// faults included.
pub fn receive_with(env: &Env, om: &Mempools, lab: &RelayLabel) -> Mempools {
    if !env.has_fault(Fault::ReceiveOverwrites) {
        return receive(om, lab);
    }
    let mut out = om.clone();
    for (pool, w) in out.engines.iter_mut().zip(&lab.engines) {
        if !w.is_empty() {
            *pool = w.clone();
        }
    }
    if !lab.global.is_empty() {
        out.global = lab.global.clone();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EngineComponent {
    pub state: EngineState,
    pub prog: Program,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlobalComponent {
    pub state: GlobalState,
    pub prog: Program,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemConfig {
    pub engines: Vec<EngineComponent>,
    pub mempools: Mempools,
    pub global: GlobalComponent,
}

impl SystemConfig {
    pub fn n(&self) -> usize {
        self.engines.len()
    }

    /// Engine component `i` (1-based).
    pub fn engine(&self, i: usize) -> &EngineComponent {
        &self.engines[i - 1]
    }

    pub fn engine_mut(&mut self, i: usize) -> &mut EngineComponent {
        &mut self.engines[i - 1]
    }

    /// Every engine's view of global storage equals the global store.
    pub fn is_wf(&self) -> bool {
        self.engines
            .iter()
            .all(|e| e.state.gview == self.global.state.g)
    }

    /// All memory stacks are empty.
    pub fn at_boundary(&self) -> bool {
        self.global.state.mem.is_empty() && self.engines.iter().all(|e| e.state.mem.is_empty())
    }

    pub fn programs_empty(&self) -> bool {
        self.global.prog.is_empty() && self.engines.iter().all(|e| e.prog.is_empty())
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("engines:\n");
        for (idx, e) in self.engines.iter().enumerate() {
            let _ = writeln!(out, "  engines[{}]:", idx + 1);
            out.push_str("    psi:\n");
            for (j, s) in e.state.slots.iter().enumerate() {
                let _ = writeln!(out, "      slot[{}]: {}", j + 1, dump::store(s));
            }
            let _ = writeln!(out, "      engine: {}", dump::store(&e.state.engine));
            dump::stack(&mut out, 4, "mem", &e.state.mem);
            let _ = writeln!(out, "    gview: {}", dump::store(&e.state.gview));
        }
        out.push_str("mempools:\n");
        for (idx, pool) in self.mempools.engines.iter().enumerate() {
            let _ = writeln!(out, "  engines[{}]: {}", idx + 1, dump::txset(pool));
        }
        let _ = writeln!(out, "  global: {}", dump::txset(&self.mempools.global));
        out.push_str("global:\n");
        let _ = writeln!(out, "  g: {}", dump::store(&self.global.state.g));
        dump::stack(&mut out, 2, "mem", &self.global.state.mem);
        out.push_str("programs:\n");
        let _ = writeln!(out, "  global: {}", dump::program(&self.global.prog));
        for (idx, e) in self.engines.iter().enumerate() {
            let _ = writeln!(out, "  engines[{}]: {}", idx + 1, dump::program(&e.prog));
        }
        out
    }

    pub fn hash(&self) -> String {
        dump::hash(&self.dump())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("configuration is not well formed")]
    NotWellFormed,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("deployment failed: {0}")]
    Deploy(ExecError),
    #[error("cannot initialise `{var}`: {msg}")]
    Init { var: String, msg: String },
    #[error("transaction {0} has a sender outside the configured engines")]
    BadSender(Transaction),
    #[error("no engine has pending work")]
    NoPendingWork,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Global,
    Local(usize),
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepKind::Global => f.write_str("G"),
            StepKind::Local(i) => write!(f, "L {i}"),
        }
    }
}

/// What one system step did. Aborted transactions carry their error and an
/// empty label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub kind: StepKind,
    pub tx: Transaction,
    pub label: RelayLabel,
    pub outcome: Result<Option<Value>, ExecError>,
}

impl StepRecord {
    pub fn aborted(&self) -> bool {
        self.outcome.is_err()
    }

    /// One trace line; `mono` selects the `Go`/`Lo i` step names.
    pub fn trace_line(&self, post_hash: &str, mono: bool) -> String {
        let kind = match (self.kind, mono) {
            (StepKind::Global, false) => "G".to_string(),
            (StepKind::Global, true) => "Go".to_string(),
            (StepKind::Local(i), false) => format!("L {i}"),
            (StepKind::Local(i), true) => format!("Lo {i}"),
        };
        let counts: Vec<String> = self
            .label
            .counts()
            .iter()
            .map(ToString::to_string)
            .collect();
        let mut line = format!("{kind} {} | {} | {post_hash}", self.tx, counts.join(","));
        match &self.outcome {
            Ok(Some(v)) => {
                let _ = write!(line, " | ret {v}");
            }
            Ok(None) => {}
            Err(e) => {
                let _ = write!(line, " | abort: {e}");
            }
        }
        line
    }
}

/// Fresh configuration: state variables declared in every component, every
/// gview a copy of the global store, mempools and programs empty.
pub fn deploy(contract: &Contract, n: usize, k: usize) -> Result<SystemConfig, SystemError> {
    let mut global = GlobalState::new();
    let mut engines: Vec<EngineState> = (0..n).map(|_| EngineState::new(k)).collect();
    for decl in &contract.state_vars {
        if decl.scope == Scope::Global {
            declare_state_global(&mut global, decl).map_err(SystemError::Deploy)?;
        } else {
            for e in &mut engines {
                declare_state_local(e, decl).map_err(SystemError::Deploy)?;
            }
        }
    }
    let engines = engines
        .into_iter()
        .map(|mut state| {
            state.gview = global.g.clone();
            EngineComponent {
                state,
                prog: Program::new(),
            }
        })
        .collect();
    Ok(SystemConfig {
        engines,
        mempools: Mempools::new(n),
        global: GlobalComponent {
            state: global,
            prog: Program::new(),
        },
    })
}

pub(crate) fn init_store(store: &mut ByteStore, init: &StateInit) -> Result<(), SystemError> {
    store
        .write(&init.var, init.value.clone())
        .map_err(|e| SystemError::Init {
            var: init.var.clone(),
            msg: e.to_string(),
        })
}

pub(crate) fn init_range(init: &StateInit, what: &str) -> SystemError {
    SystemError::Init {
        var: init.var.clone(),
        msg: format!("{what} out of range"),
    }
}

/// Writes initial values chosen by a schedule. Global values are written to
/// the global store and to every gview.
pub fn apply_inits(c: &mut SystemConfig, inits: &[StateInit]) -> Result<(), SystemError> {
    let n = c.n();
    for init in inits {
        match init.target {
            InitTarget::Address(AddrVal { engine, slot }) => {
                if engine == 0 || engine > n || slot == 0 || slot > c.engine(engine).state.k() {
                    return Err(init_range(init, "address"));
                }
                init_store(c.engine_mut(engine).state.slot_mut(slot), init)?;
            }
            InitTarget::Engine(i) => {
                if i == 0 || i > n {
                    return Err(init_range(init, "engine"));
                }
                init_store(&mut c.engine_mut(i).state.engine, init)?;
            }
            InitTarget::Global => {
                init_store(&mut c.global.state.g, init)?;
                for e in &mut c.engines {
                    init_store(&mut e.state.gview, init)?;
                }
            }
        }
    }
    Ok(())
}

/// One global step: runs the head of the global program, merges its label,
/// and brings every gview up to date. Engine stores and stacks are untouched.
pub fn step_g(c: &SystemConfig, env: &Env) -> Result<(SystemConfig, StepRecord), SystemError> {
    if !c.is_wf() {
        return Err(SystemError::NotWellFormed);
    }
    let Some(tx) = c.global.prog.first().cloned() else {
        return Err(SystemError::Precondition("global program is empty".into()));
    };
    if !c.global.state.mem.is_empty() {
        return Err(SystemError::Precondition(
            "global stack is not empty".into(),
        ));
    }
    let mut next = c.clone();
    next.global.prog.remove(0);
    let record = match exec_tx_global(&c.global.state, &tx, env) {
        Ok(out) => {
            next.global.state = out.state;
            next.mempools = receive_with(env, &c.mempools, &out.label);
            if !env.has_fault(Fault::SkipMuSync) {
                for e in &mut next.engines {
                    e.state.gview = next.global.state.g.clone();
                }
            }
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

fn check_local(c: &SystemConfig, i: usize) -> Result<Transaction, SystemError> {
    if !c.is_wf() {
        return Err(SystemError::NotWellFormed);
    }
    if !c.global.prog.is_empty() {
        return Err(SystemError::Precondition(
            "local step while the global program is pending".into(),
        ));
    }
    if i == 0 || i > c.n() {
        return Err(SystemError::Precondition(format!("no engine {i}")));
    }
    let e = c.engine(i);
    if !e.state.mem.is_empty() {
        return Err(SystemError::Precondition(format!(
            "engine {i} stack is not empty"
        )));
    }
    e.prog
        .first()
        .cloned()
        .ok_or_else(|| SystemError::Precondition(format!("engine {i} has no pending transaction")))
}

/// One local step of engine `i`: runs the head of its program. Only engine
/// `i` and the mempools change.
pub fn step_l(
    c: &SystemConfig,
    i: usize,
    env: &Env,
) -> Result<(SystemConfig, StepRecord), SystemError> {
    let tx = check_local(c, i)?;
    let mut next = c.clone();
    next.engine_mut(i).prog.remove(0);
    let record = match exec_tx_local(&c.engine(i).state, &tx, env, i) {
        Ok(out) => {
            let dest = if env.has_fault(Fault::MisroutedWriteback) {
                i % c.n() + 1
            } else {
                i
            };
            next.engine_mut(dest).state = out.state;
            next.mempools = receive_with(env, &c.mempools, &out.label);
            StepRecord {
                kind: StepKind::Local(i),
                tx,
                label: out.label,
                outcome: Ok(out.value),
            }
        }
        Err(e) => StepRecord {
            kind: StepKind::Local(i),
            tx,
            label: RelayLabel::empty(c.n()),
            outcome: Err(e),
        },
    };
    Ok((next, record))
}

/// Callback invoked after every system step with the post-configuration.
pub type Observer<'a> = dyn FnMut(&StepRecord, &SystemConfig) + 'a;

/// Runs global steps until the global program is empty.
pub fn run_global_phase(
    c: &SystemConfig,
    env: &Env,
    obs: &mut Observer<'_>,
) -> Result<SystemConfig, SystemError> {
    let mut cur = c.clone();
    while !cur.global.prog.is_empty() {
        let (next, rec) = step_g(&cur, env)?;
        obs(&rec, &next);
        cur = next;
    }
    Ok(cur)
}

/// Interleaving policy for the local phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LocalOrder {
    /// One transaction per pending engine per round, ascending index.
    #[default]
    RoundRobin,
    /// As round-robin, descending index.
    Reverse,
    /// Drain engine 1, then engine 2, and so on.
    LowestFirst,
    /// Every pending engine steps simultaneously each round; labels are
    /// merged by union.
    Parallel,
}

impl std::str::FromStr for LocalOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round-robin" => Ok(LocalOrder::RoundRobin),
            "reverse" => Ok(LocalOrder::Reverse),
            "lowest-first" => Ok(LocalOrder::LowestFirst),
            "parallel" => Ok(LocalOrder::Parallel),
            _ => Err(format!("unknown local order `{s}`")),
        }
    }
}

fn pending(c: &SystemConfig) -> Vec<usize> {
    (1..=c.n())
        .filter(|&i| !c.engine(i).prog.is_empty())
        .collect()
}

/// Runs local steps until every engine program is empty.
pub fn run_local_phase(
    c: &SystemConfig,
    env: &Env,
    order: LocalOrder,
    obs: &mut Observer<'_>,
) -> Result<SystemConfig, SystemError> {
    let mut cur = c.clone();
    loop {
        let mut round = pending(&cur);
        if round.is_empty() {
            return Ok(cur);
        }
        match order {
            LocalOrder::RoundRobin => {}
            LocalOrder::Reverse => round.reverse(),
            LocalOrder::LowestFirst => round.truncate(1),
            LocalOrder::Parallel => {
                cur = parallel_round(&cur, &round, env, obs)?;
                continue;
            }
        }
        for i in round {
            let (next, rec) = step_l(&cur, i, env)?;
            obs(&rec, &next);
            cur = next;
        }
    }
}

fn parallel_round(
    c: &SystemConfig,
    round: &[usize],
    env: &Env,
    obs: &mut Observer<'_>,
) -> Result<SystemConfig, SystemError> {
    let heads = round
        .iter()
        .map(|&i| check_local(c, i).map(|tx| (i, tx)))
        .collect::<Result<Vec<_>, _>>()?;
    let results: Vec<_> = heads
        .par_iter()
        .map(|(i, tx)| exec_tx_local(&c.engine(*i).state, tx, env, *i))
        .collect();
    let mut next = c.clone();
    let mut merged = RelayLabel::empty(c.n());
    let mut records = Vec::with_capacity(heads.len());
    for ((i, tx), res) in heads.into_iter().zip(results) {
        next.engine_mut(i).prog.remove(0);
        let rec = match res {
            Ok(out) => {
                next.engine_mut(i).state = out.state;
                merged.union_with(&out.label);
                StepRecord {
                    kind: StepKind::Local(i),
                    tx,
                    label: out.label,
                    outcome: Ok(out.value),
                }
            }
            Err(e) => StepRecord {
                kind: StepKind::Local(i),
                tx,
                label: RelayLabel::empty(c.n()),
                outcome: Err(e),
            },
        };
        records.push(rec);
    }
    next.mempools = receive_with(env, &c.mempools, &merged);
    for rec in &records {
        obs(rec, &next);
    }
    Ok(next)
}

/// Drains every mempool into programs. Global relays, sorted, become the
/// global program. Each engine runs its sorted relays first, then its user
/// transactions in schedule order.
pub fn assemble_block(om: &Mempools, user: &[Transaction]) -> (Program, Vec<Program>, Mempools) {
    let n = om.n();
    let mut global: Vec<_> = om.global.iter().collect();
    global.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let prog_g = global.into_iter().map(|r| r.to_transaction(0)).collect();
    let mut progs: Vec<Program> = om
        .engines
        .iter()
        .enumerate()
        .map(|(idx, pool)| {
            let mut relays: Vec<_> = pool.iter().collect();
            relays.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
            relays
                .into_iter()
                .map(|r| r.to_transaction(idx + 1))
                .collect()
        })
        .collect();
    for tx in user {
        let i = tx.sender.map_or(0, |s| s.engine);
        debug_assert!((1..=n).contains(&i), "sender outside the engines");
        progs[i - 1].push(tx.clone());
    }
    (prog_g, progs, Mempools::new(n))
}

/// Rejects user transactions whose sender is not an address of the system.
pub fn check_senders(block: &[Transaction], n: usize, k: usize) -> Result<(), SystemError> {
    for tx in block {
        match tx.sender {
            Some(s) if (1..=n).contains(&s.engine) && (1..=k).contains(&s.slot) => {}
            _ => return Err(SystemError::BadSender(tx.clone())),
        }
    }
    Ok(())
}

/// Installs assembled programs into a configuration with empty programs.
pub fn install_block(c: &SystemConfig, block: &[Transaction]) -> Result<SystemConfig, SystemError> {
    if !c.programs_empty() {
        return Err(SystemError::Precondition(
            "a block is installed while programs are pending".into(),
        ));
    }
    let k = c.engines.first().map_or(0, |e| e.state.k());
    check_senders(block, c.n(), k)?;
    let (prog_g, progs, pools) = assemble_block(&c.mempools, block);
    let mut next = c.clone();
    next.global.prog = prog_g;
    for (e, p) in next.engines.iter_mut().zip(progs) {
        e.prog = p;
    }
    next.mempools = pools;
    Ok(next)
}

/// One block: assemble, then the global phase, then the local phase.
pub fn run_block(
    c: &SystemConfig,
    block: &[Transaction],
    env: &Env,
    order: LocalOrder,
    obs: &mut Observer<'_>,
) -> Result<SystemConfig, SystemError> {
    if !c.is_wf() {
        return Err(SystemError::NotWellFormed);
    }
    let installed = install_block(c, block)?;
    let after_g = run_global_phase(&installed, env, obs)?;
    run_local_phase(&after_g, env, order, obs)
}

/// Number of blocks run for a schedule: its own blocks, then empty blocks
/// while relays are pending, up to `max_blocks`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub order: LocalOrder,
    pub max_blocks: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            order: LocalOrder::RoundRobin,
            max_blocks: None,
        }
    }
}

/// Extra empty blocks allowed after the schedule to drain relays.
pub const DRAIN_BLOCKS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub config: SystemConfig,
    pub blocks: usize,
    pub steps: usize,
    pub aborted: usize,
}

pub fn run_schedule(
    c: &SystemConfig,
    blocks: &[Vec<Transaction>],
    env: &Env,
    opts: RunOptions,
    obs: &mut Observer<'_>,
) -> Result<RunSummary, SystemError> {
    let limit = opts.max_blocks.unwrap_or(blocks.len() + DRAIN_BLOCKS);
    let mut cur = c.clone();
    let (mut steps, mut aborted, mut run) = (0, 0, 0);
    let empty = Vec::new();
    while run < limit && (run < blocks.len() || !cur.mempools.is_empty()) {
        let block = blocks.get(run).unwrap_or(&empty);
        cur = run_block(
            &cur,
            block,
            env,
            opts.order,
            &mut |rec: &StepRecord, post: &SystemConfig| {
                steps += 1;
                aborted += usize::from(rec.aborted());
                obs(rec, post);
            },
        )?;
        run += 1;
    }
    Ok(RunSummary {
        config: cur,
        blocks: run,
        steps,
        aborted,
    })
}

/// Observer that ignores every step.
pub fn quiet(_: &StepRecord, _: &SystemConfig) {}
