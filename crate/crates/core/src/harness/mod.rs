//! Property suites over generated contracts and schedules.
//!
//! Every suite takes a [`PropConfig`], derives one seed per case from the
//! base seed, runs the cases in parallel and merges results by case index,
//! so a report depends only on its configuration.

pub mod gen;
pub mod props;

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::bisim::truncate_schedule;
use crate::comp::Env;
use crate::faults::Fault;
use crate::mono::{self, MonoConfig};
use crate::syntax::{pretty_print, render_schedule, BlockSchedule, Contract};
use crate::system::{
    self, install_block, step_g, step_l, StepRecord, SystemConfig, SystemError, DRAIN_BLOCKS,
};

pub use gen::{case_seed, gen_contract, gen_schedule, GenParams};

pub const DEFAULT_CASES: usize = 500;
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PropConfig {
    pub seed: u64,
    pub cases: usize,
    /// Upper bounds for the sampled engine and slot counts.
    pub max_n: usize,
    pub max_k: usize,
    pub fault: Option<Fault>,
}

impl Default for PropConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            cases: DEFAULT_CASES,
            max_n: 4,
            max_k: 3,
            fault: None,
        }
    }
}

impl PropConfig {
    pub fn with_fault(mut self, fault: Option<Fault>) -> Self {
        self.fault = fault;
        self
    }

    pub fn with_cases(mut self, cases: usize) -> Self {
        self.cases = cases;
        self
    }
}

/// One generated input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub seed: u64,
    pub params: GenParams,
    pub contract: Contract,
    pub schedule: BlockSchedule,
}

impl Case {
    pub fn generate(seed: u64, max_n: usize, max_k: usize) -> Self {
        let params = GenParams::sampled(seed, max_n, max_k);
        let contract = gen_contract(&params);
        let schedule = gen_schedule(&contract, &params);
        Self {
            seed,
            params,
            contract,
            schedule,
        }
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn env(&self, fault: Option<Fault>) -> Env {
        Env::new(&self.contract, self.n(), self.k()).with_fault(fault)
    }

    pub fn with_schedule(&self, schedule: BlockSchedule) -> Self {
        Self {
            schedule,
            ..self.clone()
        }
    }

    /// Contract and schedule as they would be written to disk.
    pub fn render(&self) -> String {
        format!(
            "// n = {}, k = {}\n{}\n// schedule\n{}",
            self.n(),
            self.k(),
            pretty_print(&self.contract),
            render_schedule(&self.schedule)
        )
    }

    pub fn deploy_comp(&self) -> Result<SystemConfig, SystemError> {
        let mut c = system::deploy(&self.contract, self.n(), self.k())?;
        system::apply_inits(&mut c, &self.schedule.inits)?;
        Ok(c)
    }

    pub fn deploy_mono(&self) -> Result<MonoConfig, SystemError> {
        let mut c = mono::deploy(&self.contract, self.n(), self.k())?;
        mono::apply_inits(&mut c, &self.schedule.inits)?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub case: usize,
    pub seed: u64,
    /// Smallest schedule prefix that still fails, rendered.
    pub input: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyReport {
    pub name: String,
    pub cases: usize,
    /// Individual assertions evaluated across all cases.
    pub checks: usize,
    pub failures: Vec<Failure>,
    pub wall: Duration,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Tree-structured rendering. Wall time is left out so that reports for
/// the same configuration are byte-identical.
impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "property {}", self.name)?;
        writeln!(f, "  cases: {}", self.cases)?;
        writeln!(f, "  checks: {}", self.checks)?;
        writeln!(f, "  failures: {}", self.failures.len())?;
        for fl in &self.failures {
            writeln!(f, "  failure[{}]:", fl.case)?;
            writeln!(f, "    seed: {}", fl.seed)?;
            writeln!(f, "    message: {}", fl.message)?;
            writeln!(f, "    input:")?;
            for line in fl.input.lines() {
                writeln!(f, "      | {line}")?;
            }
        }
        Ok(())
    }
}

/// Outcome of one case: number of checks performed, or a failure message.
pub type CaseResult = Result<usize, String>;

/// Runs `check` on `cfg.cases` generated cases. A failing case is replayed
/// on shorter schedule prefixes and reported with the shortest that fails.
pub fn run_property<F>(name: &str, cfg: &PropConfig, check: F) -> PropertyReport
where
    F: Fn(&Case, Option<Fault>) -> CaseResult + Sync,
{
    let start = Instant::now();
    let results: Vec<(usize, Case, CaseResult)> = (0..cfg.cases)
        .into_par_iter()
        .map(|idx| {
            let case = Case::generate(case_seed(cfg.seed, idx as u64), cfg.max_n, cfg.max_k);
            let res = check(&case, cfg.fault);
            (idx, case, res)
        })
        .collect();
    let mut checks = 0;
    let mut failures = Vec::new();
    for (idx, case, res) in results {
        match res {
            Ok(c) => checks += c,
            Err(msg) => {
                let (small, message) = minimize(&case, msg, |c| check(c, cfg.fault));
                failures.push(Failure {
                    case: idx,
                    seed: case.seed,
                    input: small.render(),
                    message,
                });
            }
        }
    }
    PropertyReport {
        name: name.to_string(),
        cases: cfg.cases,
        checks,
        failures,
        wall: start.elapsed(),
    }
}

fn minimize<F>(case: &Case, msg: String, check: F) -> (Case, String)
where
    F: Fn(&Case) -> CaseResult,
{
    for m in 0..case.schedule.tx_count() {
        let shorter = case.with_schedule(truncate_schedule(&case.schedule, m));
        if let Err(e) = check(&shorter) {
            return (shorter, e);
        }
    }
    (case.clone(), msg)
}

/// A point reached while running the compositional semantics.
pub enum CompEvent<'a> {
    /// A block was assembled from the mempools and the user transactions.
    Install {
        pre: &'a SystemConfig,
        post: &'a SystemConfig,
    },
    Step {
        pre: &'a SystemConfig,
        rec: &'a StepRecord,
        post: &'a SystemConfig,
    },
}

/// Runs a case under the compositional semantics with round-robin local
/// order, reporting every block installation and every step.
pub fn walk_comp(
    case: &Case,
    env: &Env,
    visit: &mut dyn FnMut(CompEvent<'_>) -> Result<(), String>,
) -> Result<SystemConfig, String> {
    let blocks = &case.schedule.blocks;
    let limit = blocks.len() + DRAIN_BLOCKS;
    let mut cur = case.deploy_comp().map_err(|e| format!("deploy: {e}"))?;
    let empty = Vec::new();
    let mut run = 0;
    while run < limit && (run < blocks.len() || !cur.mempools.is_empty()) {
        let block = blocks.get(run).unwrap_or(&empty);
        let installed =
            install_block(&cur, block).map_err(|e| format!("block {}: {e}", run + 1))?;
        visit(CompEvent::Install {
            pre: &cur,
            post: &installed,
        })?;
        cur = installed;
        while !cur.global.prog.is_empty() {
            let (next, rec) = step_g(&cur, env).map_err(|e| format!("global step: {e}"))?;
            visit(CompEvent::Step {
                pre: &cur,
                rec: &rec,
                post: &next,
            })?;
            cur = next;
        }
        loop {
            let round: Vec<usize> = (1..=cur.n())
                .filter(|&i| !cur.engine(i).prog.is_empty())
                .collect();
            if round.is_empty() {
                break;
            }
            for i in round {
                let (next, rec) =
                    step_l(&cur, i, env).map_err(|e| format!("local step {i}: {e}"))?;
                visit(CompEvent::Step {
                    pre: &cur,
                    rec: &rec,
                    post: &next,
                })?;
                cur = next;
            }
        }
        run += 1;
    }
    Ok(cur)
}

/// Runs a case under the monolithic semantics, reporting every step's
/// post-configuration.
pub fn walk_mono(
    case: &Case,
    env: &Env,
    visit: &mut dyn FnMut(&StepRecord, &MonoConfig) -> Result<(), String>,
) -> Result<MonoConfig, String> {
    let start = case.deploy_mono().map_err(|e| format!("deploy: {e}"))?;
    let mut first_err = None;
    let out = mono::run_schedule(
        &start,
        &case.schedule.blocks,
        env,
        None,
        &mut |rec, post| {
            if first_err.is_none() {
                first_err = visit(rec, post).err();
            }
        },
    );
    if let Some(e) = first_err {
        return Err(e);
    }
    out.map(|s| s.config).map_err(|e| format!("mono run: {e}"))
}
