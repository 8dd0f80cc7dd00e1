//! Executable correspondence checking between the two semantics.
//!
//! [`lockstep_run`] deploys a contract under both semantics and advances them
//! one transaction at a time with the same dispatch choice. After every step
//! it checks the frame conditions on the monolithic side, that the
//! monolithic mempools grew by exactly what the compositional label says,
//! and that the two configurations are still related at the boundary.

use std::fmt;

use thiserror::Error;

use crate::bridge::{enc, gtx, ltx};
use crate::comp::{Env, RelayLabel, TxSet};
use crate::faults::Fault;
use crate::mono::{self, MonoConfig};
use crate::syntax::{BlockSchedule, Contract};
use crate::system::{self, StepKind, StepRecord, SystemConfig, SystemError, DRAIN_BLOCKS};

/// Relays added to each engine's mempool by one monolithic step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemDiffRecord {
    pub engines: Vec<TxSet>,
}

impl MemDiffRecord {
    /// Local relays of engine `j`'s difference.
    pub fn local(&self, j: usize) -> TxSet {
        ltx(&self.engines[j - 1])
    }

    pub fn global(&self, j: usize) -> TxSet {
        gtx(&self.engines[j - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BisimError {
    #[error("mempool of engine {engine} lost entries")]
    NonMonotone { engine: usize },
    #[error("configurations have different engine counts")]
    ShapeMismatch,
}

pub fn mem_diff(before: &MonoConfig, after: &MonoConfig) -> Result<MemDiffRecord, BisimError> {
    if before.n() != after.n() {
        return Err(BisimError::ShapeMismatch);
    }
    let mut engines = Vec::with_capacity(before.n());
    for (idx, (b, a)) in before.engines.iter().zip(&after.engines).enumerate() {
        if !a.mempool.is_superset(&b.mempool) {
            return Err(BisimError::NonMonotone { engine: idx + 1 });
        }
        engines.push(a.mempool.difference(&b.mempool).cloned().collect());
    }
    Ok(MemDiffRecord { engines })
}

/// Per-engine `ωⱼ ∪ ω_G` for a compositional label.
pub fn label_delta(label: &RelayLabel) -> Vec<TxSet> {
    label
        .engines
        .iter()
        .map(|w| w.union(&label.global).cloned().collect())
        .collect()
}

/// `Ω°ⱼ' = Ω°ⱼ ∪ ΔΩⱼ` for every engine.
pub fn mem_diff_holds(before: &MonoConfig, after: &MonoConfig, delta: &[TxSet]) -> bool {
    before.n() == after.n()
        && delta.len() == before.n()
        && before
            .engines
            .iter()
            .zip(&after.engines)
            .zip(delta)
            .all(|((b, a), d)| a.mempool == b.mempool.union(d).cloned().collect())
}

/// Every engine other than `i` keeps its storage, stack and program.
pub fn same_l(i: usize, before: &MonoConfig, after: &MonoConfig) -> bool {
    before.n() == after.n()
        && before
            .engines
            .iter()
            .zip(&after.engines)
            .enumerate()
            .filter(|(idx, _)| idx + 1 != i)
            .all(|(_, (b, a))| b.local_state() == a.local_state() && b.prog == a.prog)
}

/// Every engine keeps its storage.
pub fn same_g(before: &MonoConfig, after: &MonoConfig) -> bool {
    before.n() == after.n()
        && before
            .engines
            .iter()
            .zip(&after.engines)
            .all(|(b, a)| b.slots == a.slots && b.engine == a.engine)
}

/// A monolithic and a compositional configuration, with flags recording
/// whether each was produced by execution from deployment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrespondencePair {
    pub mono: MonoConfig,
    pub comp: SystemConfig,
    pub mono_reachable: bool,
    pub comp_reachable: bool,
}

impl CorrespondencePair {
    /// Pair of configurations both obtained by running from deployment.
    pub fn reached(mono: MonoConfig, comp: SystemConfig) -> Self {
        Self {
            mono,
            comp,
            mono_reachable: true,
            comp_reachable: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RtClause {
    MonoReachableWf,
    CompReachableWf,
    Boundary,
    Encoding,
}

impl fmt::Display for RtClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RtClause::MonoReachableWf => "monolithic side reachable and well formed",
            RtClause::CompReachableWf => "compositional side reachable and well formed",
            RtClause::Boundary => "both sides at a transaction boundary",
            RtClause::Encoding => "encoding of the monolithic side equals the compositional side",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("clause failed: {clause} ({detail})")]
pub struct RtViolation {
    pub clause: RtClause,
    pub detail: String,
}

/// Checks the four clauses of the transaction-level correspondence in order
/// and reports the first one that fails.
pub fn check_r_t(p: &CorrespondencePair) -> Result<(), RtViolation> {
    let fail = |clause, detail: &str| {
        Err(RtViolation {
            clause,
            detail: detail.to_string(),
        })
    };
    if !p.mono_reachable {
        return fail(RtClause::MonoReachableWf, "not produced by execution");
    }
    if !p.mono.is_wf() {
        return fail(RtClause::MonoReachableWf, "global prefixes differ");
    }
    if !p.comp_reachable {
        return fail(RtClause::CompReachableWf, "not produced by execution");
    }
    if !p.comp.is_wf() {
        return fail(
            RtClause::CompReachableWf,
            "an engine's global view is stale",
        );
    }
    if !p.mono.at_boundary() || !p.comp.at_boundary() {
        return fail(RtClause::Boundary, "a memory stack is not empty");
    }
    match enc(&p.mono) {
        Ok(c) if c == p.comp => Ok(()),
        Ok(_) => fail(RtClause::Encoding, "configurations differ"),
        Err(e) => fail(RtClause::Encoding, &e.to_string()),
    }
}

/// First point where the two runs disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// Transaction steps completed before the failure (0 = deployment).
    pub step: usize,
    pub block: usize,
    pub reason: String,
    pub mono_dump: String,
    pub comp_dump: String,
    /// Length of the shortest failing schedule prefix, in user transactions.
    pub min_prefix: Option<usize>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "divergence:")?;
        writeln!(f, "  step: {}", self.step)?;
        writeln!(f, "  block: {}", self.block)?;
        writeln!(f, "  reason: {}", self.reason)?;
        if let Some(m) = self.min_prefix {
            writeln!(f, "  min_prefix_txs: {m}")?;
        }
        writeln!(f, "  mono:")?;
        for line in self.mono_dump.lines() {
            writeln!(f, "    {line}")?;
        }
        writeln!(f, "  comp:")?;
        for line in self.comp_dump.lines() {
            writeln!(f, "    {line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass { steps: usize, blocks: usize },
    Diverged(Box<Divergence>),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass { steps, blocks } => {
                writeln!(f, "verdict: pass")?;
                writeln!(f, "  steps: {steps}")?;
                writeln!(f, "  blocks: {blocks}")
            }
            Verdict::Diverged(d) => {
                writeln!(f, "verdict: diverged")?;
                write!(f, "{d}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LockstepOptions {
    pub n: usize,
    pub k: usize,
    pub max_blocks: Option<usize>,
    pub fault: Option<Fault>,
    /// Search for the shortest failing schedule prefix on divergence.
    pub minimize: bool,
}

impl LockstepOptions {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            max_blocks: None,
            fault: None,
            minimize: true,
        }
    }
}

struct Run {
    mono: MonoConfig,
    comp: SystemConfig,
    steps: usize,
    block: usize,
}

impl Run {
    fn diverge(&self, reason: String) -> Box<Divergence> {
        Box::new(Divergence {
            step: self.steps,
            block: self.block,
            reason,
            mono_dump: self.mono.dump(),
            comp_dump: self.comp.dump(),
            min_prefix: None,
        })
    }

    fn relate(&self, when: &str) -> Result<(), Box<Divergence>> {
        let pair = CorrespondencePair::reached(self.mono.clone(), self.comp.clone());
        check_r_t(&pair).map_err(|v| self.diverge(format!("{when}: {v}")))
    }

    /// Dispatch shared by both sides: global work first, then the
    /// lowest-index engine with a pending transaction.
    fn comp_dispatch(&self) -> Option<StepKind> {
        if !self.comp.global.prog.is_empty() {
            return Some(StepKind::Global);
        }
        (1..=self.comp.n())
            .find(|&i| !self.comp.engine(i).prog.is_empty())
            .map(StepKind::Local)
    }

    fn step(&mut self, env: &Env) -> Result<(), Box<Divergence>> {
        let kind = self.comp_dispatch();
        let mono_kind = match mono::next_dispatch(&self.mono) {
            Ok(None) => Some(StepKind::Global),
            Ok(Some(i)) => Some(StepKind::Local(i)),
            Err(_) => None,
        };
        if kind != mono_kind {
            return Err(self.diverge(format!(
                "dispatch differs: compositional {kind:?}, monolithic {mono_kind:?}"
            )));
        }
        let Some(kind) = kind else {
            return Ok(());
        };
        let comp_step = match kind {
            StepKind::Global => system::step_g(&self.comp, env),
            StepKind::Local(i) => system::step_l(&self.comp, i, env),
        };
        let (comp_next, comp_rec) =
            comp_step.map_err(|e| self.diverge(format!("compositional step rejected: {e}")))?;
        let (mono_next, mono_rec) = mono::mono_step(&self.mono, env)
            .map_err(|e| self.diverge(format!("monolithic step rejected: {e}")))?;
        let before = std::mem::replace(&mut self.mono, mono_next);
        self.comp = comp_next;
        self.steps += 1;
        self.check_step(&before, &comp_rec, &mono_rec)?;
        self.relate("after step")
    }

    fn check_step(
        &self,
        before: &MonoConfig,
        comp_rec: &StepRecord,
        mono_rec: &StepRecord,
    ) -> Result<(), Box<Divergence>> {
        if comp_rec.tx != mono_rec.tx || comp_rec.aborted() != mono_rec.aborted() {
            return Err(self.diverge(format!(
                "executed transactions differ: {} vs {}",
                comp_rec.tx, mono_rec.tx
            )));
        }
        let frame_ok = match comp_rec.kind {
            StepKind::Global => same_g(before, &self.mono),
            StepKind::Local(i) => same_l(i, before, &self.mono),
        };
        if !frame_ok {
            return Err(self.diverge(format!("frame condition fails for {}", comp_rec.kind)));
        }
        let diff = mem_diff(before, &self.mono).map_err(|e| self.diverge(e.to_string()))?;
        if !mem_diff_holds(before, &self.mono, &label_delta(&comp_rec.label)) {
            return Err(self.diverge(
                "monolithic mempools did not grow by the compositional label".to_string(),
            ));
        }
        for j in 1..=self.mono.n() {
            let local_ok = diff.local(j).is_subset(comp_rec.label.engine(j));
            let global_ok = diff.global(j).is_subset(&comp_rec.label.global);
            if !local_ok || !global_ok {
                return Err(self.diverge(format!(
                    "mempool difference of engine {j} is not explained by the label"
                )));
            }
        }
        Ok(())
    }
}

fn run_once(
    contract: &Contract,
    sched: &BlockSchedule,
    opts: &LockstepOptions,
) -> Result<Verdict, SystemError> {
    let env = Env::new(contract, opts.n, opts.k).with_fault(opts.fault);
    let mut comp = system::deploy(contract, opts.n, opts.k)?;
    system::apply_inits(&mut comp, &sched.inits)?;
    let mut mono_c = mono::deploy(contract, opts.n, opts.k)?;
    mono::apply_inits(&mut mono_c, &sched.inits)?;
    let mut run = Run {
        mono: mono_c,
        comp,
        steps: 0,
        block: 0,
    };
    if let Err(d) = run.relate("deployment") {
        return Ok(Verdict::Diverged(d));
    }
    let limit = opts.max_blocks.unwrap_or(sched.blocks.len() + DRAIN_BLOCKS);
    let empty = Vec::new();
    while run.block < limit
        && (run.block < sched.blocks.len()
            || !run.comp.mempools.is_empty()
            || !run.mono.mempools_empty())
    {
        let block = sched.blocks.get(run.block).unwrap_or(&empty);
        run.block += 1;
        run.comp = system::install_block(&run.comp, block)?;
        run.mono = mono::install_block(&run.mono, block)?;
        if let Err(d) = run.relate("block assembly") {
            return Ok(Verdict::Diverged(d));
        }
        while !run.comp.programs_empty() || !run.mono.programs_empty() {
            if let Err(d) = run.step(&env) {
                return Ok(Verdict::Diverged(d));
            }
        }
    }
    Ok(Verdict::Pass {
        steps: run.steps,
        blocks: run.block,
    })
}

/// Keeps the first `m` user transactions of a schedule, block structure
/// preserved.
pub fn truncate_schedule(sched: &BlockSchedule, m: usize) -> BlockSchedule {
    let mut out = sched.clone();
    let mut left = m;
    for block in &mut out.blocks {
        let keep = left.min(block.len());
        block.truncate(keep);
        left -= keep;
    }
    out
}

/// Runs both semantics side by side over a schedule. Deployment and
/// initialisation problems are errors; any disagreement is a divergence
/// verdict.
pub fn lockstep_run(
    contract: &Contract,
    sched: &BlockSchedule,
    opts: &LockstepOptions,
) -> Result<Verdict, SystemError> {
    let verdict = run_once(contract, sched, opts)?;
    let Verdict::Diverged(mut d) = verdict else {
        return Ok(verdict);
    };
    if opts.minimize {
        let diverges = |m: usize| {
            matches!(
                run_once(contract, &truncate_schedule(sched, m), opts),
                Ok(Verdict::Diverged(_))
            )
        };
        let (mut lo, mut hi) = (0usize, sched.tx_count());
        if diverges(0) {
            hi = 0;
        }
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if diverges(mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        d.min_prefix = Some(hi);
    }
    Ok(Verdict::Diverged(d))
}
